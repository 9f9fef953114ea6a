use serde::{Deserialize, Serialize};

use super::model::{ContextKind, EmbeddedExample, ModelSpec, RepresentationKind, TargetKind};
use crate::corpus::{PaperRecord, ReviewDimension, SectionType, YearMonth};
use crate::embed::{embed_texts, EmbedError, EmbeddingProvider};
use crate::harmonize::{mean_review_score, record_citation_target};

/// Source text of the paper representation `ω`.
pub fn representation_text(record: &PaperRecord, kind: RepresentationKind) -> Option<String> {
    let section = |s: SectionType| {
        record
            .sections
            .get(&s)
            .filter(|t| !t.trim().is_empty())
            .cloned()
    };
    match kind {
        RepresentationKind::TitleAbstract => Some(record.title_abstract()),
        RepresentationKind::Hypothesis => record
            .hypothesis
            .as_ref()
            .map(|h| format!("{} {}", h.problem, h.methodology)),
        RepresentationKind::Introduction => section(SectionType::Introduction),
        RepresentationKind::RelatedWork => section(SectionType::Background),
        RepresentationKind::Methodology => section(SectionType::Methodology),
        RepresentationKind::ExperimentsResults => section(SectionType::ExperimentsAndResults),
        RepresentationKind::Conclusion => section(SectionType::Conclusion),
    }
}

/// Context source texts `c`, in section order or reference order.
pub fn context_texts(record: &PaperRecord, kind: ContextKind) -> Vec<String> {
    match kind {
        ContextKind::None => Vec::new(),
        ContextKind::FullPaperSections => SectionType::ALL
            .iter()
            .filter_map(|s| record.sections.get(s))
            .filter(|t| !t.trim().is_empty())
            .cloned()
            .collect(),
        ContextKind::ReferenceTitlesAbstracts => record
            .references
            .iter()
            .map(|r| match &r.r#abstract {
                Some(a) if !a.trim().is_empty() => format!("{} {}", r.title, a),
                _ => r.title.clone(),
            })
            .collect(),
    }
}

pub fn target_value(record: &PaperRecord, kind: TargetKind, snapshot: YearMonth) -> Option<f64> {
    match kind {
        TargetKind::CitationLogAvg => record_citation_target(record, snapshot),
        TargetKind::ReviewScoreMean => mean_review_score(record, ReviewDimension::Score),
        TargetKind::ImpactMean => mean_review_score(record, ReviewDimension::Impact),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleBuildReport {
    pub built: usize,
    pub missing_representation: usize,
    pub missing_target: usize,
}

/// Embeds the representation and context of every record that has both a
/// representation text and a target. Records are returned in input order.
pub fn build_examples<P: EmbeddingProvider + ?Sized>(
    records: &[PaperRecord],
    spec: &ModelSpec,
    provider: &P,
    snapshot: YearMonth,
) -> Result<(Vec<EmbeddedExample>, ExampleBuildReport), EmbedError> {
    let mut report = ExampleBuildReport::default();
    let mut kept = Vec::new();
    for r in records {
        let Some(text) =
            representation_text(r, spec.representation_kind).filter(|t| !t.trim().is_empty())
        else {
            report.missing_representation += 1;
            continue;
        };
        let Some(target) = target_value(r, spec.target_kind, snapshot) else {
            report.missing_target += 1;
            continue;
        };
        kept.push((r, text, target, context_texts(r, spec.context_kind)));
    }
    let texts: Vec<&str> = kept.iter().map(|(_, t, _, _)| t.as_str()).collect();
    let vectors = embed_texts(&texts, provider)?;
    let mut out = Vec::with_capacity(kept.len());
    for ((r, _, target, ctx), v) in kept.iter().zip(vectors) {
        let ctx_refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
        let context = if ctx_refs.is_empty() {
            Vec::new()
        } else {
            embed_texts(&ctx_refs, provider)?
        };
        let mut ex = EmbeddedExample::new(r.id.clone(), provider.id(), v)
            .with_target(*target)
            .with_context(context);
        ex.publication_date = Some(r.publication_date);
        out.push(ex);
    }
    report.built = out.len();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Hypothesis, ReferenceRecord, ReviewRecord};
    use crate::embed::StubEmbedder;

    fn record() -> PaperRecord {
        let mut r = PaperRecord::new("p1", "A title", "v", YearMonth::new(2020, 1));
        r.r#abstract = "An abstract.".into();
        r.citation_count = Some(48);
        r.sections
            .insert(SectionType::Conclusion, "We conclude.".into());
        r.references.push(ReferenceRecord {
            title: "Ref".into(),
            r#abstract: Some("Ref abstract.".into()),
            corpus_id: None,
            arxiv_id: None,
            intent: None,
            is_influential: false,
        });
        r
    }

    #[test]
    fn texts_per_kind() {
        let mut r = record();
        assert_eq!(
            representation_text(&r, RepresentationKind::TitleAbstract).unwrap(),
            "A title An abstract."
        );
        assert_eq!(
            representation_text(&r, RepresentationKind::Hypothesis),
            None
        );
        assert_eq!(
            representation_text(&r, RepresentationKind::Introduction),
            None
        );
        r.hypothesis = Some(Hypothesis {
            problem: "P.".into(),
            methodology: "M.".into(),
        });
        assert_eq!(
            representation_text(&r, RepresentationKind::Hypothesis).unwrap(),
            "P. M."
        );
        assert_eq!(
            context_texts(&r, ContextKind::ReferenceTitlesAbstracts),
            ["Ref Ref abstract."]
        );
        assert_eq!(
            context_texts(&r, ContextKind::FullPaperSections),
            ["We conclude."]
        );
    }

    #[test]
    fn builds_only_complete_examples() {
        let p = StubEmbedder::with_dimension(0, 16);
        let mut no_target = record();
        no_target.id = "p2".into();
        no_target.citation_count = None;
        let mut reviewed = record();
        reviewed.id = "p3".into();
        reviewed.reviews.push(ReviewRecord {
            text_review: "ok".into(),
            score: Some(0.5),
            ..Default::default()
        });
        let recs = [record(), no_target, reviewed];
        let spec = ModelSpec::context("stub", ContextKind::ReferenceTitlesAbstracts);
        let (ex, rep) = build_examples(&recs, &spec, &p, YearMonth::new(2024, 1)).unwrap();
        assert_eq!(
            rep,
            ExampleBuildReport {
                built: 2,
                missing_representation: 0,
                missing_target: 1
            }
        );
        assert_eq!(ex[0].context_embeddings.len(), 1);
        assert!((ex[0].target.unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(ex[0].publication_date, Some(YearMonth::new(2020, 1)));

        let mut spec = ModelSpec::no_context("stub");
        spec.target_kind = TargetKind::ReviewScoreMean;
        let (ex, rep) = build_examples(&recs, &spec, &p, YearMonth::new(2024, 1)).unwrap();
        assert_eq!((ex.len(), rep.missing_target), (1, 2));
        assert_eq!(ex[0].paper_id, "p3");
        assert!(ex[0].context_embeddings.is_empty());
    }
}
