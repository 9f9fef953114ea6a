//! Seeded synthetic corpora with planted structure, used by tests, the
//! demo and fully offline runs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{
    Decision, Hypothesis, PaperRecord, ReferenceRecord, ReviewDimension, ReviewRecord, SectionType,
    YearMonth,
};
use crate::embed::{embed_text, EmbedError, EmbeddingProvider};
use crate::harmonize::citation_target;
use crate::scoremodel::EmbeddedExample;

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st",
];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

/// The `i`-th pseudo-word: three syllables spelled from the digits of `i`.
/// Distinct indices below 96³ give distinct words.
pub fn pseudo_word(i: usize) -> String {
    let base = ONSETS.len() * NUCLEI.len();
    let mut n = i;
    let mut w = String::new();
    for _ in 0..3 {
        let s = n % base;
        n /= base;
        w.push_str(ONSETS[s % ONSETS.len()]);
        w.push_str(NUCLEI[s / ONSETS.len()]);
    }
    w
}

/// `count` consecutive pseudo-words starting at `offset`.
pub fn vocabulary(offset: usize, count: usize) -> Vec<String> {
    (offset..offset + count).map(pseudo_word).collect()
}

/// A sentence of `len` words drawn uniformly from `vocab`, capitalized and
/// terminated with a period.
pub fn random_sentence<R: Rng>(rng: &mut R, vocab: &[String], len: usize) -> String {
    let mut s = String::new();
    for k in 0..len.max(1) {
        let w = vocab.choose(rng).expect("nonempty vocabulary");
        if k == 0 {
            let mut c = w.chars();
            if let Some(f) = c.next() {
                s.extend(f.to_uppercase());
                s.push_str(c.as_str());
            }
        } else {
            s.push(' ');
            s.push_str(w);
        }
    }
    s.push('.');
    s
}

/// Random texts of `words` words each from a shared vocabulary.
pub fn random_texts(n: usize, words: usize, vocab_size: usize, seed: u64) -> Vec<String> {
    let vocab = vocabulary(0, vocab_size.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| random_sentence(&mut rng, &vocab, words))
        .collect()
}

/// A hidden linear scorer `s = w · x` with `w ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignal {
    pub weights: Vec<f64>,
}

impl PlantedSignal {
    pub fn new(dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("valid normal");
        Self {
            weights: (0..dimension).map(|_| normal.sample(&mut rng)).collect(),
        }
    }

    pub fn score(&self, x: &[f32]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * *v as f64).sum()
    }
}

/// Embeds `n` random texts and attaches targets `w · x + N(0, noise)`.
pub fn planted_examples<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<(Vec<EmbeddedExample>, PlantedSignal), EmbedError> {
    let signal = PlantedSignal::new(provider.dimension(), seed ^ 0x5157_4e41_4c00_0001);
    let texts = random_texts(n, 24, 2000, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4e4f_4953_4500_0002);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("valid normal");
    let mut out = Vec::with_capacity(n);
    for (i, t) in texts.iter().enumerate() {
        let x = embed_text(t, provider)?;
        let target = signal.score(&x) + normal.sample(&mut rng);
        out.push(
            EmbeddedExample::new(format!("planted-{i:05}"), provider.id(), x).with_target(target),
        );
    }
    Ok((out, signal))
}

/// Parameters of [`planted_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpusSpec {
    pub papers: usize,
    /// Latent topics; each draws its words from a disjoint vocabulary.
    pub topics: usize,
    pub words_per_topic: usize,
    pub reviews_per_paper: usize,
    pub noise: f64,
    pub first_month: YearMonth,
    pub months: u32,
    pub snapshot: YearMonth,
    pub seed: u64,
}

impl Default for PlantedCorpusSpec {
    fn default() -> Self {
        Self {
            papers: 600,
            topics: 3,
            words_per_topic: 150,
            reviews_per_paper: 3,
            noise: 0.05,
            first_month: YearMonth::new(2018, 1),
            months: 48,
            snapshot: YearMonth::new(2024, 1),
            seed: 7,
        }
    }
}

/// Section vocabularies occupy a disjoint index range after the topics.
const SECTION_VOCAB_OFFSET: usize = 50_000;
const SECTION_VOCAB: usize = 60;

/// Words specific to one section type.
pub fn section_vocabulary(kind: SectionType) -> Vec<String> {
    vocabulary(
        SECTION_VOCAB_OFFSET + kind.index() * SECTION_VOCAB,
        SECTION_VOCAB,
    )
}

/// A paragraph of `sentences` sentences in the vocabulary of `kind`.
pub fn section_paragraph<R: Rng>(rng: &mut R, kind: SectionType, sentences: usize) -> String {
    let vocab = section_vocabulary(kind);
    (0..sentences.max(1))
        .map(|_| {
            let len = rng.random_range(6..12);
            random_sentence(rng, &vocab, len)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A corpus whose citation counts and review scores follow a planted
/// linear function of the stub embedding of each title and abstract.
/// Returns the records and each paper's latent topic.
pub fn planted_corpus<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    spec: &PlantedCorpusSpec,
) -> Result<(Vec<PaperRecord>, Vec<usize>), EmbedError> {
    let topics = spec.topics.max(1);
    let vocabs: Vec<Vec<String>> = (0..topics)
        .map(|t| vocabulary(t * spec.words_per_topic, spec.words_per_topic.max(1)))
        .collect();
    let signal = PlantedSignal::new(provider.dimension(), spec.seed ^ 0x5157_4e41_4c00_0001);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise.max(0.0)).expect("valid normal");
    let review_noise = Normal::new(0.0, 0.05).expect("valid normal");
    let mut records = Vec::with_capacity(spec.papers);
    let mut labels = Vec::with_capacity(spec.papers);
    for i in 0..spec.papers {
        let topic = rng.random_range(0..topics);
        let vocab = &vocabs[topic];
        let title = random_sentence(&mut rng, vocab, 6);
        let title = title.trim_end_matches('.').to_string();
        let abstract_ = (0..3)
            .map(|_| random_sentence(&mut rng, vocab, 12))
            .collect::<Vec<_>>()
            .join(" ");
        let offset = rng.random_range(0..spec.months.max(1));
        let date = add_months(spec.first_month, offset);
        let mut r = PaperRecord::new(format!("paper-{i:05}"), title, "synthetic", date);
        r.r#abstract = abstract_;
        let x = embed_text(&r.title_abstract(), provider)?;
        let s = signal.score(&x) + noise.sample(&mut rng);
        // invert ln(1 + c/m) for a positive target that is monotone in s
        let target = softplus(s + 1.0);
        let months = date.months_until(spec.snapshot).max(1);
        let c = (months as f64 * target.exp_m1()).round() as u64;
        debug_assert!(citation_target(c, months).is_ok());
        r.citation_count = Some(c);
        r.influential_citation_count = Some(c / 10);
        r.decision = Some(Decision::Accepted);
        let base = 1.0 / (1.0 + (-s).exp());
        for _ in 0..spec.reviews_per_paper {
            let mut rev = ReviewRecord {
                text_review: random_sentence(&mut rng, vocab, 10),
                ..Default::default()
            };
            for dim in ReviewDimension::ALL {
                let v = (base + review_noise.sample(&mut rng)).clamp(0.0, 1.0);
                rev.set(dim, Some(quantize(v)));
            }
            r.reviews.push(rev);
        }
        for kind in SectionType::ALL {
            let p = section_paragraph(&mut rng, kind, 3);
            r.sections.insert(kind, p);
        }
        records.push(r);
        labels.push(topic);
    }
    Ok((records, labels))
}

const AWKWARD: [&str; 8] = [
    "\"quoted\"",
    "back\\slash",
    "tab\there",
    "line\nbreak",
    "Ünïcødé",
    "数据集",
    "emoji 🧪",
    "a/b <c> & d",
];

fn mixed_text<R: Rng>(rng: &mut R, vocab: &[String], words: usize) -> String {
    let mut s = random_sentence(rng, vocab, words);
    if rng.random_bool(0.3) {
        s.push(' ');
        s.push_str(AWKWARD.choose(rng).expect("nonempty"));
    }
    s
}

/// A record satisfying every corpus invariant with every optional field
/// randomly present or absent, free-form text including escapes and
/// non-ASCII characters, and unrounded scores.
pub fn random_record<R: Rng>(rng: &mut R, id: &str) -> PaperRecord {
    let vocab = vocabulary(0, 300);
    let date = YearMonth::new(rng.random_range(1990..2030), rng.random_range(1..=12));
    let mut r = PaperRecord::new(
        id,
        mixed_text(rng, &vocab, 8),
        mixed_text(rng, &vocab, 1),
        date,
    );
    if rng.random_bool(0.8) {
        r.r#abstract = mixed_text(rng, &vocab, 30);
    }
    for kind in SectionType::ALL {
        if rng.random_bool(0.4) {
            r.sections.insert(kind, mixed_text(rng, &vocab, 20));
        }
    }
    if rng.random_bool(0.3) {
        r.hypothesis = Some(Hypothesis {
            problem: mixed_text(rng, &vocab, 10),
            methodology: mixed_text(rng, &vocab, 10),
        });
    }
    for _ in 0..rng.random_range(0..4) {
        let mut rev = ReviewRecord::default();
        if rng.random_bool(0.8) {
            rev.text_review = mixed_text(rng, &vocab, 15);
        }
        for dim in ReviewDimension::ALL {
            if rng.random_bool(0.5) {
                let v = match rng.random_range(0..10) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.random::<f64>(),
                };
                rev.set(dim, Some(v));
            }
        }
        if rev.text_review.is_empty() && !rev.has_numeric() {
            rev.score = Some(rng.random::<f64>());
        }
        if rng.random_bool(0.1) {
            rev.ethics = Some(mixed_text(rng, &vocab, 5));
        }
        r.reviews.push(rev);
    }
    for k in 0..rng.random_range(0..3) {
        r.references.push(ReferenceRecord {
            title: mixed_text(rng, &vocab, 6),
            r#abstract: rng.random_bool(0.5).then(|| mixed_text(rng, &vocab, 12)),
            corpus_id: rng
                .random_bool(0.5)
                .then(|| format!("{}", rng.random::<u32>())),
            arxiv_id: rng.random_bool(0.3).then(|| format!("2101.{k:05}")),
            intent: rng.random_bool(0.3).then(|| "methodology".to_string()),
            is_influential: rng.random_bool(0.2),
        });
    }
    r.decision = match rng.random_range(0..4) {
        0 => None,
        1 => Some(Decision::Accepted),
        2 => Some(Decision::Rejected),
        _ => Some(Decision::Unknown),
    };
    if r.decision != Some(Decision::Rejected) && rng.random_bool(0.7) {
        let c = rng.random_range(0..100_000u64);
        r.citation_count = Some(c);
        r.influential_citation_count = rng.random_bool(0.5).then(|| c / 7);
    }
    if rng.random_bool(0.4) {
        r.field_of_study = Some(
            (0..rng.random_range(0..3))
                .map(|_| mixed_text(rng, &vocab, 1))
                .collect(),
        );
    }
    r
}

/// `n` records from [`random_record`] with ids `rec-00000`, ...
pub fn random_records(n: usize, seed: u64) -> Vec<PaperRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| random_record(&mut rng, &format!("rec-{i:05}")))
        .collect()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Rounds to 1e-6 so values survive JSON round trips unchanged.
fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub fn add_months(start: YearMonth, months: u32) -> YearMonth {
    let zero_based = start.month as i64 - 1 + months as i64;
    YearMonth::new(
        start.year + (zero_based / 12) as i32,
        (zero_based % 12) as u32 + 1,
    )
}
