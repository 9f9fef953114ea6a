use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::SectionsError;
use crate::corpus::SectionType;

const DEFAULT_TABLE: &str = include_str!("../../data/section_synonyms.toml");

/// Heading synonyms per section type.
#[derive(Debug, Clone, PartialEq)]
pub struct SynonymTable {
    synonyms: BTreeMap<SectionType, Vec<String>>,
    lookup: HashMap<String, SectionType>,
}

impl SynonymTable {
    pub fn new(synonyms: BTreeMap<SectionType, Vec<String>>) -> Result<Self, SectionsError> {
        let mut lookup = HashMap::new();
        for kind in SectionType::ALL {
            if synonyms.get(&kind).is_none_or(|v| v.is_empty()) {
                return Err(SectionsError::Synonyms(format!("{kind} has no synonym")));
            }
        }
        for (kind, list) in &synonyms {
            for s in list {
                let key = normalize_heading(s);
                if key.is_empty() {
                    return Err(SectionsError::Synonyms(format!(
                        "{kind}: empty synonym {s:?}"
                    )));
                }
                if let Some(prev) = lookup.insert(key, *kind) {
                    return Err(SectionsError::Synonyms(format!(
                        "{s:?} is listed for both {prev} and {kind}"
                    )));
                }
            }
        }
        Ok(Self { synonyms, lookup })
    }

    pub fn from_toml(text: &str) -> Result<Self, SectionsError> {
        let raw: BTreeMap<SectionType, Vec<String>> =
            toml::from_str(text).map_err(|e| SectionsError::Synonyms(e.to_string()))?;
        Self::new(raw)
    }

    pub fn load(path: &Path) -> Result<Self, SectionsError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn synonyms(&self) -> &BTreeMap<SectionType, Vec<String>> {
        &self.synonyms
    }

    pub fn match_heading(&self, heading: &str) -> Option<SectionType> {
        self.lookup.get(&normalize_heading(heading)).copied()
    }
}

impl Default for SynonymTable {
    fn default() -> Self {
        Self::from_toml(DEFAULT_TABLE).expect("bundled synonym table is valid")
    }
}

fn is_numbering(token: &str) -> bool {
    if token.starts_with('§') {
        return true;
    }
    let core = token.trim_end_matches(['.', ')', ':']);
    let marked = core.len() < token.len();
    if core.is_empty() {
        return false;
    }
    let digits = core.chars().all(|c| c.is_ascii_digit() || c == '.')
        && core.chars().any(|c| c.is_ascii_digit());
    let roman = core
        .chars()
        .all(|c| matches!(c, 'I' | 'V' | 'X' | 'L' | 'C'))
        && (marked || core.len() > 1);
    let letter = core.len() == 1 && core.chars().all(|c| c.is_ascii_alphabetic()) && marked;
    digits || roman || letter
}

/// Case-folds, collapses whitespace, and strips leading numbering ("3.",
/// "2.1", "IV.", "A.", "§") and trailing punctuation.
pub fn normalize_heading(heading: &str) -> String {
    let mut words: Vec<&str> = heading.split_whitespace().collect();
    while words.len() > 1 && is_numbering(words[0]) {
        words.remove(0);
    }
    let joined = words.join(" ").to_lowercase();
    joined
        .trim_start_matches('§')
        .trim_end_matches(|c: char| c.is_ascii_punctuation() && c != ')')
        .trim()
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_from_the_table() {
        let t = SynonymTable::default();
        assert_eq!(
            t.match_heading("Related Work"),
            Some(SectionType::Background)
        );
        assert_eq!(
            t.match_heading("3. Evaluation"),
            Some(SectionType::ExperimentsAndResults)
        );
        assert_eq!(t.match_heading("Acknowledgements"), None);
        assert_eq!(
            t.match_heading("IV. EXPERIMENTS"),
            Some(SectionType::ExperimentsAndResults)
        );
        assert_eq!(
            t.match_heading("§2 Background"),
            Some(SectionType::Background)
        );
        assert_eq!(
            t.match_heading("  2.1   related   work: "),
            Some(SectionType::Background)
        );
        assert_eq!(t.match_heading("A. Method"), Some(SectionType::Methodology));
        assert_eq!(
            t.match_heading("1 Introduction"),
            Some(SectionType::Introduction)
        );
    }

    #[test]
    fn every_synonym_matches_itself() {
        let t = SynonymTable::default();
        for (kind, list) in t.synonyms() {
            for s in list {
                assert_eq!(t.match_heading(s), Some(*kind), "{s}");
                assert_eq!(t.match_heading(&s.to_uppercase()), Some(*kind), "{s}");
                assert_eq!(t.match_heading(&format!("5. {s}")), Some(*kind), "{s}");
            }
        }
    }

    #[test]
    fn roman_words_are_not_stripped_alone() {
        // a heading that is only a roman-looking word stays intact
        assert_eq!(normalize_heading("VI"), "vi");
        assert_eq!(normalize_heading("Civil Engineering"), "civil engineering");
        assert_eq!(normalize_heading("3D Reconstruction"), "3d reconstruction");
    }

    #[test]
    fn invalid_tables_rejected() {
        let dup = "introduction=[\"Intro\"]\nbackground=[\"intro\"]\nmethodology=[\"m\"]\nexperiments_and_results=[\"e\"]\nconclusion=[\"c\"]";
        assert!(SynonymTable::from_toml(dup).is_err());
        let missing = "introduction=[\"Intro\"]";
        assert!(SynonymTable::from_toml(missing).is_err());
    }
}
