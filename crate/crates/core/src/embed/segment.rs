//! Sentence segmentation and token-budget chunk packing.

/// Words ending in a period that do not end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "al.", "approx.", "cf.", "dr.", "e.g.", "eq.", "eqs.", "fig.", "figs.", "i.e.", "mr.", "mrs.",
    "ms.", "no.", "nos.", "p.", "pp.", "prof.", "ref.", "refs.", "resp.", "sec.", "secs.", "st.",
    "tab.", "viz.", "vol.", "vs.", "w.r.t.",
];

/// Collapses every whitespace run to one space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_abbreviation(word: &str) -> bool {
    let w = word
        .trim_start_matches(['(', '[', '"', '\''])
        .to_lowercase();
    if ABBREVIATIONS.contains(&w.as_str()) {
        return true;
    }
    // single-letter initials such as "J."
    let mut chars = w.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
}

fn ends_sentence(word: &str) -> bool {
    let core = word.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    core.ends_with(['.', '!', '?']) && !(core.ends_with('.') && is_abbreviation(core))
}

/// Splits text into sentences. Joining the result with single spaces gives
/// back the whitespace-normalized input.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..words.len() {
        let last = i + 1 == words.len();
        let split = last
            || (ends_sentence(words[i])
                && !words[i + 1].chars().next().is_some_and(char::is_lowercase));
        if split {
            out.push(words[start..=i].join(" "));
            start = i + 1;
        }
    }
    out
}

/// Proxy for model tokens: whitespace tokens × 1.3, rounded up.
pub fn proxy_token_count(text: &str) -> usize {
    let words = text.split_whitespace().count();
    (words * 13).div_ceil(10)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub text: String,
    pub sentences: usize,
    /// A single sentence that alone exceeds the budget.
    pub over_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChunkPlan {
    pub chunks: Vec<Chunk>,
}

impl ChunkPlan {
    pub fn texts(&self) -> Vec<&str> {
        self.chunks.iter().map(|c| c.text.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

/// Greedy packing: sentences join the current chunk while its token count
/// stays within `budget`.
pub fn pack_chunks<F>(sentences: &[String], budget: usize, count: F) -> ChunkPlan
where
    F: Fn(&str) -> usize,
{
    let budget = budget.max(1);
    let mut chunks = Vec::new();
    let mut cur = String::new();
    let mut n = 0;
    for s in sentences {
        if n > 0 {
            let candidate = format!("{cur} {s}");
            if count(&candidate) <= budget {
                cur = candidate;
                n += 1;
                continue;
            }
            chunks.push(Chunk {
                text: std::mem::take(&mut cur),
                sentences: n,
                over_budget: false,
            });
        }
        cur = s.clone();
        n = 1;
        if count(s) > budget {
            chunks.push(Chunk {
                text: std::mem::take(&mut cur),
                sentences: 1,
                over_budget: true,
            });
            n = 0;
        }
    }
    if n > 0 {
        chunks.push(Chunk {
            text: cur,
            sentences: n,
            over_budget: false,
        });
    }
    ChunkPlan { chunks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> usize {
        s.split_whitespace().count()
    }

    #[test]
    fn basic_segmentation() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("  \n ").is_empty());
        assert_eq!(segment_sentences("A cat. A dog."), ["A cat.", "A dog."]);
        assert_eq!(
            segment_sentences("See Fig. 2. It works."),
            ["See Fig. 2.", "It works."]
        );
        assert_eq!(
            segment_sentences("Why? Because!  Yes"),
            ["Why?", "Because!", "Yes"]
        );
    }

    #[test]
    fn abbreviation_guard() {
        assert_eq!(
            segment_sentences("Smith et al. Show it. Then e.g. This holds."),
            ["Smith et al. Show it.", "Then e.g. This holds."]
        );
        assert_eq!(
            segment_sentences("It is 3.5 m. wide, ok."),
            ["It is 3.5 m. wide, ok."]
        );
        assert_eq!(
            segment_sentences("He said \"stop.\" Then left."),
            ["He said \"stop.\"", "Then left."]
        );
    }

    /// Sentences built so that each contains guarded abbreviations but ends
    /// with a true boundary; segmentation must recover them exactly.
    #[test]
    fn fifty_sentence_fixture() {
        let openers = [
            "We",
            "Results",
            "The model",
            "Our method",
            "Table 3",
            "This",
        ];
        let middles = [
            "follows Smith et al. closely",
            "is shown in Fig. 4 below",
            "uses Eq. 7 as the loss",
            "holds, i.e. it converges",
            "compares A vs. B directly",
            "extends prior work (cf. Sec. 2)",
            "improves e.g. recall and precision",
            "is reported in Tab. 1 and Figs. 2-3",
            "was proposed by J. Doe",
            "reaches 93.5 percent accuracy",
        ];
        let ends = [".", "!", "?", ".\"", ".)"];
        let mut sentences = Vec::new();
        for i in 0..50 {
            sentences.push(format!(
                "{} {}{}",
                openers[i % openers.len()],
                middles[(i * 7) % middles.len()],
                ends[i % ends.len()]
            ));
        }
        let text = sentences.join("   \n");
        assert_eq!(segment_sentences(&text), sentences);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(
            segment_sentences("Values approx. equal. done."),
            ["Values approx. equal. done."]
        );
    }

    #[test]
    fn proxy_counter_rounds_up() {
        assert_eq!(proxy_token_count(""), 0);
        assert_eq!(proxy_token_count("a"), 2);
        assert_eq!(proxy_token_count("a b c d e f g h i j"), 13);
    }

    #[test]
    fn greedy_packing_examples() {
        let s = |t: &str| t.to_string();
        let one = pack_chunks(&[s("a b"), s("c d")], 10, words);
        assert_eq!(one.texts(), ["a b c d"]);

        let three = [s("a b c d"), s("e f g h"), s("i j k l")];
        let plan = pack_chunks(&three, 8, words);
        assert_eq!(plan.texts(), ["a b c d e f g h", "i j k l"]);
        assert!(plan.chunks.iter().all(|c| !c.over_budget));

        let long = s(&vec!["w"; 20].join(" "));
        let plan = pack_chunks(std::slice::from_ref(&long), 8, words);
        assert_eq!(plan.len(), 1);
        assert!(plan.chunks[0].over_budget);

        let plan = pack_chunks(&[s("x"), long.clone(), s("y")], 8, words);
        assert_eq!(plan.texts(), ["x", long.as_str(), "y"]);
        assert_eq!(
            plan.chunks
                .iter()
                .map(|c| c.over_budget)
                .collect::<Vec<_>>(),
            [false, true, false]
        );
    }

    proptest! {
        #[test]
        fn segmentation_reconstructs_normalized_text(text in "[A-Za-z.!? \n\t]{0,200}") {
            let sents = segment_sentences(&text);
            prop_assert!(sents.iter().all(|s| !s.is_empty()));
            prop_assert_eq!(sents.join(" "), normalize_whitespace(&text));
        }

        #[test]
        fn packing_reconstructs_sentences(
            lens in proptest::collection::vec(1usize..12, 0..40),
            budget in 1usize..30,
        ) {
            let sents: Vec<String> = lens
                .iter()
                .enumerate()
                .map(|(i, &n)| (0..n).map(|j| format!("t{i}_{j}")).collect::<Vec<_>>().join(" "))
                .collect();
            let plan = pack_chunks(&sents, budget, proxy_token_count);
            prop_assert_eq!(plan.texts().join(" "), sents.join(" "));
            prop_assert_eq!(plan.chunks.iter().map(|c| c.sentences).sum::<usize>(), sents.len());
            for c in &plan.chunks {
                if proxy_token_count(&c.text) > budget {
                    prop_assert!(c.over_budget && c.sentences == 1);
                }
            }
        }
    }
}
