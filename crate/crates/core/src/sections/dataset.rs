use serde::{Deserialize, Serialize};

use super::SynonymTable;
use crate::corpus::SectionType;
use crate::embed::segment_sentences;

/// A parsed paper before section classification: headings with bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPaper {
    pub id: String,
    pub sections: Vec<RawSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSection {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionExample {
    pub sentences: Vec<String>,
    pub label: SectionType,
    pub source_paper_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionDataset {
    pub examples: Vec<SectionExample>,
    /// Sections whose heading matched no synonym.
    pub unmatched_sections: usize,
    /// Matched sections that held no sentence.
    pub empty_sections: usize,
}

impl SectionDataset {
    pub fn label_counts(&self) -> [usize; 5] {
        let mut c = [0; 5];
        for e in &self.examples {
            c[e.label.index()] += 1;
        }
        c
    }
}

/// Splits a body into paragraphs at blank lines.
pub fn paragraphs(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in body.lines() {
        if line.trim().is_empty() {
            if !cur.trim().is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            cur.clear();
        } else {
            if !cur.is_empty() {
                cur.push('\n');
            }
            cur.push_str(line);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

/// One labelled example per paragraph of every section whose heading
/// matches the table, in input order.
pub fn build_section_dataset(papers: &[RawPaper], table: &SynonymTable) -> SectionDataset {
    let mut ds = SectionDataset::default();
    for p in papers {
        for s in &p.sections {
            let Some(label) = table.match_heading(&s.heading) else {
                ds.unmatched_sections += 1;
                continue;
            };
            let before = ds.examples.len();
            for para in paragraphs(&s.body) {
                let sentences = segment_sentences(&para);
                if !sentences.is_empty() {
                    ds.examples.push(SectionExample {
                        sentences,
                        label,
                        source_paper_id: p.id.clone(),
                    });
                }
            }
            if ds.examples.len() == before {
                ds.empty_sections += 1;
            }
        }
    }
    ds
}
