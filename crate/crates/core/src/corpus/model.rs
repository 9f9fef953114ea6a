use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Section types a classified paper body is grouped into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionType {
    Introduction,
    Background,
    Methodology,
    ExperimentsAndResults,
    Conclusion,
}

impl SectionType {
    pub const ALL: [SectionType; 5] = [
        SectionType::Introduction,
        SectionType::Background,
        SectionType::Methodology,
        SectionType::ExperimentsAndResults,
        SectionType::Conclusion,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SectionType::Introduction => "introduction",
            SectionType::Background => "background",
            SectionType::Methodology => "methodology",
            SectionType::ExperimentsAndResults => "experiments_and_results",
            SectionType::Conclusion => "conclusion",
        }
    }
}

impl fmt::Display for SectionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown section type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected,
    Unknown,
}

/// Calendar year and month, serialized as `"YYYY-MM"`.
///
/// Out-of-range values can be represented so that validation can report
/// them; parsing only checks the textual shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        Self { year, month }
    }

    pub fn is_valid(&self) -> bool {
        (1..=12).contains(&self.month) && (1000..=9999).contains(&self.year)
    }

    /// Months since year 0, for date arithmetic.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    /// Whole months from `self` to `later`, at least 1.
    pub fn months_until(&self, later: YearMonth) -> u32 {
        (later.ordinal() - self.ordinal()).max(1) as u32
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected YYYY-MM, got {s:?}");
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        Ok(Self {
            year: y.parse().map_err(|_| bad())?,
            month: m.parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypothesis {
    pub problem: String,
    pub methodology: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewRecord {
    pub text_review: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub novelty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correctness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impact: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reproducibility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ethics: Option<String>,
}

/// The numeric review dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewDimension {
    Score,
    Confidence,
    Novelty,
    Correctness,
    Clarity,
    Impact,
    Reproducibility,
}

impl ReviewDimension {
    pub const ALL: [ReviewDimension; 7] = [
        ReviewDimension::Score,
        ReviewDimension::Confidence,
        ReviewDimension::Novelty,
        ReviewDimension::Correctness,
        ReviewDimension::Clarity,
        ReviewDimension::Impact,
        ReviewDimension::Reproducibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReviewDimension::Score => "score",
            ReviewDimension::Confidence => "confidence",
            ReviewDimension::Novelty => "novelty",
            ReviewDimension::Correctness => "correctness",
            ReviewDimension::Clarity => "clarity",
            ReviewDimension::Impact => "impact",
            ReviewDimension::Reproducibility => "reproducibility",
        }
    }
}

impl fmt::Display for ReviewDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl ReviewRecord {
    pub fn get(&self, dim: ReviewDimension) -> Option<f64> {
        match dim {
            ReviewDimension::Score => self.score,
            ReviewDimension::Confidence => self.confidence,
            ReviewDimension::Novelty => self.novelty,
            ReviewDimension::Correctness => self.correctness,
            ReviewDimension::Clarity => self.clarity,
            ReviewDimension::Impact => self.impact,
            ReviewDimension::Reproducibility => self.reproducibility,
        }
    }

    pub fn set(&mut self, dim: ReviewDimension, value: Option<f64>) {
        let slot = match dim {
            ReviewDimension::Score => &mut self.score,
            ReviewDimension::Confidence => &mut self.confidence,
            ReviewDimension::Novelty => &mut self.novelty,
            ReviewDimension::Correctness => &mut self.correctness,
            ReviewDimension::Clarity => &mut self.clarity,
            ReviewDimension::Impact => &mut self.impact,
            ReviewDimension::Reproducibility => &mut self.reproducibility,
        };
        *slot = value;
    }

    pub fn has_numeric(&self) -> bool {
        ReviewDimension::ALL.iter().any(|d| self.get(*d).is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRecord {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r#abstract: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arxiv_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    pub is_influential: bool,
}

/// One submission with its text, reviews, references and citation data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    pub r#abstract: String,
    #[serde(default)]
    pub sections: BTreeMap<SectionType, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Hypothesis>,
    #[serde(default)]
    pub reviews: Vec<ReviewRecord>,
    #[serde(default)]
    pub references: Vec<ReferenceRecord>,
    pub venue: String,
    pub publication_date: YearMonth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub influential_citation_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_of_study: Option<Vec<String>>,
}

impl PaperRecord {
    /// A record with only the required fields set.
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        venue: impl Into<String>,
        publication_date: YearMonth,
    ) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            r#abstract: String::new(),
            sections: BTreeMap::new(),
            hypothesis: None,
            reviews: Vec::new(),
            references: Vec::new(),
            venue: venue.into(),
            publication_date,
            decision: None,
            citation_count: None,
            influential_citation_count: None,
            field_of_study: None,
        }
    }

    pub fn title_abstract(&self) -> String {
        if self.r#abstract.is_empty() {
            self.title.clone()
        } else {
            format!("{} {}", self.title, self.r#abstract)
        }
    }
}
