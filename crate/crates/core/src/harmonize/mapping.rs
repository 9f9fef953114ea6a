use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarmonizeError;
use crate::corpus::{ReviewDimension, ReviewRecord};

/// Target slot of a raw venue review field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewAttribute {
    Score,
    Confidence,
    Novelty,
    Correctness,
    Clarity,
    Impact,
    Reproducibility,
    PaperSummary,
    ReviewSummary,
    MainReview,
    StrengthWeakness,
    Limitations,
    Questions,
    Ethics,
}

impl ReviewAttribute {
    pub fn dimension(self) -> Option<ReviewDimension> {
        Some(match self {
            ReviewAttribute::Score => ReviewDimension::Score,
            ReviewAttribute::Confidence => ReviewDimension::Confidence,
            ReviewAttribute::Novelty => ReviewDimension::Novelty,
            ReviewAttribute::Correctness => ReviewDimension::Correctness,
            ReviewAttribute::Clarity => ReviewDimension::Clarity,
            ReviewAttribute::Impact => ReviewDimension::Impact,
            ReviewAttribute::Reproducibility => ReviewDimension::Reproducibility,
            _ => return None,
        })
    }

    pub fn is_numeric(self) -> bool {
        self.dimension().is_some()
    }
}

impl fmt::Display for ReviewAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

/// Field-name normalization used for matching: trimmed, case-folded,
/// inner whitespace collapsed.
pub fn normalize_field_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub field: String,
    pub attribute: ReviewAttribute,
}

/// Ordered venue-field to attribute table for one venue.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FieldMapping {
    entries: Vec<FieldEntry>,
    lookup: HashMap<String, usize>,
}

impl FieldMapping {
    pub fn new(entries: Vec<FieldEntry>) -> Result<Self, HarmonizeError> {
        let mut lookup = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let key = normalize_field_name(&e.field);
            if let Some(&j) = lookup.get(&key) {
                let prev: &FieldEntry = &entries[j];
                if prev.attribute != e.attribute {
                    return Err(HarmonizeError::ConflictingField {
                        field: e.field.clone(),
                        first: prev.attribute,
                        second: e.attribute,
                    });
                }
                continue;
            }
            lookup.insert(key, i);
        }
        Ok(Self { entries, lookup })
    }

    /// Builds a mapping for the given raw field names from the built-in
    /// catalog. Names that appear under several attributes resolve to the
    /// first catalog row (numeric attributes come first). Returns the
    /// names the catalog does not know.
    pub fn from_catalog<'a>(fields: impl IntoIterator<Item = &'a str>) -> (Self, Vec<String>) {
        let mut entries = Vec::new();
        let mut unknown = Vec::new();
        for f in fields {
            match catalog_lookup(f) {
                Some(attribute) => entries.push(FieldEntry {
                    field: f.to_string(),
                    attribute,
                }),
                None => unknown.push(f.to_string()),
            }
        }
        (
            Self::new(entries).expect("catalog lookups are single-valued"),
            unknown,
        )
    }

    pub fn entries(&self) -> &[FieldEntry] {
        &self.entries
    }

    pub fn attribute_of(&self, field: &str) -> Option<ReviewAttribute> {
        self.lookup
            .get(&normalize_field_name(field))
            .map(|&i| self.entries[i].attribute)
    }
}

/// Raw numeric range of one attribute at one venue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub min_value: f64,
    pub max_value: f64,
}

impl ScaleSpec {
    pub fn new(min_value: f64, max_value: f64) -> Result<Self, HarmonizeError> {
        if !(max_value > min_value) || !min_value.is_finite() || !max_value.is_finite() {
            return Err(HarmonizeError::InvalidScale {
                min: min_value,
                max: max_value,
            });
        }
        Ok(Self {
            min_value,
            max_value,
        })
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.min_value) / (self.max_value - self.min_value)
    }
}

/// Result of harmonizing one raw review.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizedReview {
    pub review: ReviewRecord,
    /// Raw field names with no mapping entry, in raw iteration order.
    pub unmapped_fields: Vec<String>,
}

/// Leading number of `"8"`, `"8: accept"` or `"3.5 : borderline"`.
pub fn parse_leading_number(raw: &str) -> Option<f64> {
    let head = raw.split(':').next()?.trim();
    head.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Maps one venue's raw review onto the unified schema.
///
/// Text fields are joined in mapping order with blank lines. Numeric fields
/// are min-max normalized by their [`ScaleSpec`] and clamped to `[0, 1]`;
/// a value further than 0.01 outside the range means the scale is wrong.
/// Empty raw values are treated as absent.
pub fn harmonize_review(
    raw: &BTreeMap<String, String>,
    mapping: &FieldMapping,
    scales: &BTreeMap<ReviewDimension, ScaleSpec>,
) -> Result<HarmonizedReview, HarmonizeError> {
    let mut by_name: HashMap<String, (&str, &str)> = HashMap::with_capacity(raw.len());
    let mut unmapped_fields = Vec::new();
    for (k, v) in raw {
        let key = normalize_field_name(k);
        if mapping.lookup.contains_key(&key) {
            by_name.entry(key).or_insert((k.as_str(), v.as_str()));
        } else {
            unmapped_fields.push(k.clone());
        }
    }

    let mut review = ReviewRecord::default();
    let mut texts: Vec<&str> = Vec::new();
    let mut ethics: Vec<&str> = Vec::new();
    for entry in &mapping.entries {
        let Some(&(name, value)) = by_name.get(&normalize_field_name(&entry.field)) else {
            continue;
        };
        let value = value.trim();
        if value.is_empty() {
            continue;
        }
        match entry.attribute.dimension() {
            Some(dim) => {
                if review.get(dim).is_some() {
                    continue;
                }
                let scale = scales
                    .get(&dim)
                    .ok_or(HarmonizeError::MissingScale { attribute: dim })?;
                let v =
                    parse_leading_number(value).ok_or_else(|| HarmonizeError::NumericParse {
                        field: name.to_string(),
                        value: value.to_string(),
                    })?;
                let n = scale.normalize(v);
                if !(-0.01..=1.01).contains(&n) {
                    return Err(HarmonizeError::OutOfScale {
                        field: name.to_string(),
                        value: v,
                        normalized: n,
                    });
                }
                review.set(dim, Some(n.clamp(0.0, 1.0)));
            }
            None if entry.attribute == ReviewAttribute::Ethics => ethics.push(value),
            None => texts.push(value),
        }
    }
    review.text_review = texts.join("\n\n");
    if !ethics.is_empty() {
        review.ethics = Some(ethics.join("\n\n"));
    }
    Ok(HarmonizedReview {
        review,
        unmapped_fields,
    })
}

/// Known OpenReview review-field names per attribute.
pub const FIELD_CATALOG: &[(ReviewAttribute, &[&str])] = &[
    (
        ReviewAttribute::Score,
        &[
            "overall rating",
            "rating",
            "evaluation",
            "Q6 Overall score",
            "Overall score",
            "recommended decision",
            "overall evaluation",
            "review rating",
            "results",
            "score",
            "preliminary rating",
            "recommendation",
            "workshop rating",
            "custom rating",
        ],
    ),
    (
        ReviewAttribute::Confidence,
        &[
            "experience assessment",
            "Reviewer expertise",
            "confidence",
            "review assessment: thoroughness in paper reading",
            "reviewer's confidence",
            "Q8 Confidence in your score",
            "review confidence",
            "workshop confidence",
        ],
    ),
    (
        ReviewAttribute::Novelty,
        &[
            "technical novelty and significance",
            "originality",
            "empirical novelty and significance",
            "novelty",
            "Q2(1) Originality/Novelty",
        ],
    ),
    (
        ReviewAttribute::Correctness,
        &[
            "correctness",
            "soundness",
            "review assessment: checking correctness of experiments",
            "Q2(3) Correctness/Technical quality",
            "review assessment: checking correctness of derivations and theory",
            "technical rigor",
            "Q2(4) Quality of experiments (Optional)",
            "technical quality and correctness rating",
            "scholarship",
            "technical quality",
            "litreview",
        ],
    ),
    (
        ReviewAttribute::Clarity,
        &[
            "presentation",
            "clarity",
            "clarity of presentation",
            "Q2(6) Clarity of writing",
            "clarity rating",
        ],
    ),
    (
        ReviewAttribute::Impact,
        &[
            "importance",
            "contribution",
            "relevance",
            "impact",
            "significance",
            "Q2(2) Significance/Impact",
            "potential impact on the field of AutoML rating",
            "significance and importance",
        ],
    ),
    (
        ReviewAttribute::Reproducibility,
        &[
            "Q2(5) Reproducibility",
            "reproducibility",
            "usability and ease of reproducibility rating",
            "accessibility",
        ],
    ),
    (
        ReviewAttribute::PaperSummary,
        &[
            "summary of the paper",
            "summary of paper",
            "problem statement",
            "summary",
            "Q1 Summary and contributions",
            "summary of contributions",
        ],
    ),
    (
        ReviewAttribute::ReviewSummary,
        &[
            "summary of recommendation",
            "overall recommendation",
            "summary of the review",
            "reviewer confidence",
            "justification of rating",
            "Justification for rating",
            "Q7 Justification for your score",
            "review summary",
            "overall reproducibility review",
        ],
    ),
    (
        ReviewAttribute::MainReview,
        &[
            "comment",
            "intersection comment",
            "detailed comments",
            "rigor comment",
            "clarity comment",
            "main review",
            "Q5 Detailed comments to the authors",
            "potential impact on the field of AutoML",
            "importance comment",
            "technical quality and correctness",
            "review",
            "clarity",
            "quality",
            "novelty and reproducibility",
            "issues",
            "Q2 Assessment of the paper",
            "overall review",
            "usability and ease of reproducibility",
            "review text",
            "grounds for rejection",
            "workshop review",
        ],
    ),
    (
        ReviewAttribute::StrengthWeakness,
        &[
            "strengths weaknesses",
            "strengths and weaknesses",
            "weaknesses",
            "Q3 Main strengths",
            "strengths",
            "strength and weaknesses",
            "Q4 Main weakness",
            "Review (Strengths/Weaknesses)",
            "Top Reasons to Accept the Paper",
            "Top Reasons to Reject the Paper",
            "reason for not giving higher score",
            "reason for not giving lower score",
            "contributions of the paper",
            "strengths of the paper",
            "weaknesses of the paper",
            "reasons to accept",
            "reasons to reject",
        ],
    ),
    (
        ReviewAttribute::Limitations,
        &[
            "limitations",
            "limitations and societal impact",
            "quality of the limitations section",
        ],
    ),
    (
        ReviewAttribute::Questions,
        &[
            "questions for rebuttal",
            "questions to address in the rebuttal",
            "questions",
            "Detailed Feedback and Questions for Authors",
            "questions for authors",
        ],
    ),
    (
        ReviewAttribute::Ethics,
        &[
            "ethics flag",
            "Q10 Ethical concerns (Optional)",
            "ethics and accessibility rating",
            "ethics review area",
            "flag for ethics review",
            "details of ethics concerns",
            "Ethical concerns",
            "ethics details (optional)",
            "needs ethics review",
            "ethical considerations",
        ],
    ),
];

/// First catalog attribute whose names contain `field` after normalization.
pub fn catalog_lookup(field: &str) -> Option<ReviewAttribute> {
    let key = normalize_field_name(field);
    FIELD_CATALOG
        .iter()
        .find(|(_, names)| names.iter().any(|n| normalize_field_name(n) == key))
        .map(|(a, _)| *a)
}

/// Mapping table and numeric scales for one venue.
#[derive(Debug, Clone, PartialEq)]
pub struct VenueConfig {
    pub name: String,
    pub mapping: FieldMapping,
    pub scales: BTreeMap<ReviewDimension, ScaleSpec>,
}

#[derive(Debug, Deserialize)]
struct RawVenueFile {
    #[serde(default)]
    venue: Vec<RawVenue>,
}

#[derive(Debug, Deserialize)]
struct RawVenue {
    name: String,
    #[serde(default)]
    fields: Vec<FieldEntry>,
    #[serde(default)]
    scales: BTreeMap<ReviewDimension, [f64; 2]>,
}

/// Venue mapping tables keyed by venue name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VenueTable {
    venues: BTreeMap<String, VenueConfig>,
}

impl VenueTable {
    /// Parses the TOML form:
    ///
    /// ```toml
    /// [[venue]]
    /// name = "ICLR 2023"
    /// fields = [{ field = "recommendation", attribute = "score" }]
    /// scales = { score = [1, 10] }
    /// ```
    pub fn from_toml(text: &str) -> Result<Self, HarmonizeError> {
        let raw: RawVenueFile =
            toml::from_str(text).map_err(|e| HarmonizeError::Config(e.to_string()))?;
        let mut venues = BTreeMap::new();
        for v in raw.venue {
            let mapping = FieldMapping::new(v.fields)?;
            let mut scales = BTreeMap::new();
            for (dim, [lo, hi]) in v.scales {
                scales.insert(dim, ScaleSpec::new(lo, hi)?);
            }
            venues.insert(
                v.name.clone(),
                VenueConfig {
                    name: v.name,
                    mapping,
                    scales,
                },
            );
        }
        Ok(Self { venues })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarmonizeError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| HarmonizeError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    pub fn get(&self, venue: &str) -> Option<&VenueConfig> {
        self.venues.get(venue)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VenueConfig> {
        self.venues.values()
    }

    pub fn insert(&mut self, cfg: VenueConfig) {
        self.venues.insert(cfg.name.clone(), cfg);
    }
}
