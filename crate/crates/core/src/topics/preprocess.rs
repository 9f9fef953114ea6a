use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Deserialize;

const EXCEPTIONS: &str = include_str!("../../data/suffix_exceptions.toml");

pub const MIN_TOKEN_LEN: usize = 3;
pub const DEFAULT_PHRASE_THRESHOLD: usize = 20;

/// English function words and frequent academic filler.
pub const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "across",
    "after",
    "again",
    "against",
    "all",
    "almost",
    "along",
    "also",
    "although",
    "always",
    "among",
    "an",
    "and",
    "another",
    "any",
    "are",
    "around",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "cannot",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "done",
    "down",
    "due",
    "each",
    "either",
    "else",
    "et",
    "etc",
    "even",
    "ever",
    "every",
    "few",
    "for",
    "from",
    "further",
    "furthermore",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "him",
    "his",
    "how",
    "however",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "less",
    "like",
    "many",
    "may",
    "me",
    "might",
    "more",
    "moreover",
    "most",
    "much",
    "must",
    "my",
    "neither",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "often",
    "on",
    "once",
    "one",
    "only",
    "or",
    "other",
    "others",
    "otherwise",
    "our",
    "ours",
    "out",
    "over",
    "own",
    "paper",
    "per",
    "rather",
    "same",
    "several",
    "she",
    "should",
    "show",
    "shows",
    "shown",
    "since",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "then",
    "there",
    "therefore",
    "these",
    "they",
    "this",
    "those",
    "though",
    "through",
    "thus",
    "to",
    "too",
    "two",
    "under",
    "until",
    "up",
    "upon",
    "us",
    "use",
    "used",
    "using",
    "very",
    "via",
    "was",
    "we",
    "well",
    "were",
    "what",
    "when",
    "where",
    "whether",
    "which",
    "while",
    "who",
    "whom",
    "whose",
    "why",
    "will",
    "with",
    "within",
    "without",
    "would",
    "yet",
    "you",
    "your",
    "yours",
];

#[derive(Deserialize)]
struct ExceptionFile {
    exceptions: BTreeMap<String, String>,
}

/// Plural, -ing and -ed stripping with an exception table. At most one
/// rule fires per word.
#[derive(Debug, Clone)]
pub struct SuffixRules {
    exceptions: HashMap<String, String>,
}

impl Default for SuffixRules {
    fn default() -> Self {
        let f: ExceptionFile = toml::from_str(EXCEPTIONS).expect("bundled exception table parses");
        Self {
            exceptions: f.exceptions.into_iter().collect(),
        }
    }
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|c| is_vowel(c) || c == b'y')
}

/// Vowel-pair endings that never drop a silent `e` (train, treat, avoid).
const NO_E: &[&str] = &[
    "ain", "oin", "ein", "eat", "oat", "oot", "ear", "air", "oid", "ood", "eam", "aim", "eak",
    "ook", "oom", "eap", "eal", "ail", "oil", "eel", "oal",
];

/// Stem endings after which a removed -ing/-ed leaves a silent `e` behind.
const E_ENDINGS: &[&str] = &[
    "at", "ut", "ot", "id", "od", "ud", "ur", "ir", "ar", "in", "um", "am", "yp", "ap", "ak", "ok",
    "un", "rib", "cal", "plor", "gnor", "stor", "scor",
];

impl SuffixRules {
    pub fn with_exceptions(exceptions: HashMap<String, String>) -> Self {
        Self { exceptions }
    }

    pub fn normalize(&self, word: &str) -> String {
        if let Some(e) = self.exceptions.get(word) {
            return e.clone();
        }
        let n = word.len();
        if n < 4 || !word.is_ascii() {
            return word.to_string();
        }
        // plurals
        if n > 4 && word.ends_with("ies") {
            return format!("{}y", &word[..n - 3]);
        }
        if word.ends_with("sses") || ["xes", "ches", "shes"].iter().any(|s| word.ends_with(s)) {
            return word[..n - 2].to_string();
        }
        if word.ends_with('s') {
            if ["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
                return word.to_string();
            }
            return word[..n - 1].to_string();
        }
        // verb forms
        if word.ends_with("eed") {
            return word[..n - 1].to_string();
        }
        for suffix in ["ing", "ed"] {
            if let Some(stem) = word.strip_suffix(suffix) {
                if stem.len() < 3 || !has_vowel(stem) {
                    return word.to_string();
                }
                return restore_stem(stem, suffix);
            }
        }
        word.to_string()
    }
}

fn restore_stem(stem: &str, suffix: &str) -> String {
    let s = stem.as_bytes();
    let n = s.len();
    let (last, prev) = (s[n - 1], s[n - 2]);
    if suffix == "ed" && last == b'i' {
        return format!("{}y", &stem[..n - 1]);
    }
    // doubled final consonant: embedd, runn, labell (but spell, pass, fill)
    if last == prev && !is_vowel(last) && n >= 4 {
        let undouble = match last {
            b's' | b'z' | b'f' => false,
            b'l' => n >= 6 && s[n - 3] == b'e',
            _ => true,
        };
        if undouble {
            return stem[..n - 1].to_string();
        }
        return stem.to_string();
    }
    if needs_e(stem) {
        format!("{stem}e")
    } else {
        stem.to_string()
    }
}

fn needs_e(stem: &str) -> bool {
    let s = stem.as_bytes();
    let n = s.len();
    let (last, prev) = (s[n - 1], s[n - 2]);
    match last {
        b'v' | b'z' | b'u' | b'c' => true,
        b's' => is_vowel(prev) || matches!(prev, b'r' | b'n' | b'l'),
        b'g' => ["ang", "eng", "rg", "dg", "ag"]
            .iter()
            .any(|e| stem.ends_with(e)),
        b'l' => (!is_vowel(prev) && prev != b'l' && prev != b'r') || stem.ends_with("cal"),
        _ => !NO_E.iter().any(|e| stem.ends_with(e)) && E_ENDINGS.iter().any(|e| stem.ends_with(e)),
    }
}

/// Lowercasing tokenizer with stopword removal and suffix normalization.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub rules: SuffixRules,
    stopwords: HashSet<&'static str>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::new(SuffixRules::default())
    }
}

impl Preprocessor {
    pub fn new(rules: SuffixRules) -> Self {
        Self {
            rules,
            stopwords: STOPWORDS.iter().copied().collect(),
        }
    }

    /// Normalized unigrams of `title` followed by `abstract`.
    pub fn tokens(&self, title: &str, abstract_: &str) -> Vec<String> {
        let text = format!("{title} {abstract_}").to_lowercase();
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| t.chars().count() >= MIN_TOKEN_LEN && !self.stopwords.contains(t))
            .map(|t| self.rules.normalize(t))
            .filter(|t| !self.stopwords.contains(t.as_str()))
            .collect()
    }
}

/// Corpus-level bigram and trigram detector over normalized tokens.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Phraser {
    pub threshold: usize,
    bigrams: HashSet<(String, String)>,
    trigrams: HashSet<(String, String, String)>,
}

impl Phraser {
    /// Keeps every adjacent pair and triple seen at least `threshold` times.
    pub fn fit(docs: &[Vec<String>], threshold: usize) -> Self {
        let mut bi: HashMap<(&str, &str), usize> = HashMap::new();
        let mut tri: HashMap<(&str, &str, &str), usize> = HashMap::new();
        for d in docs {
            for w in d.windows(2) {
                *bi.entry((&w[0], &w[1])).or_default() += 1;
            }
            for w in d.windows(3) {
                *tri.entry((&w[0], &w[1], &w[2])).or_default() += 1;
            }
        }
        let threshold = threshold.max(1);
        Self {
            threshold,
            bigrams: bi
                .into_iter()
                .filter(|(_, c)| *c >= threshold)
                .map(|((a, b), _)| (a.to_string(), b.to_string()))
                .collect(),
            trigrams: tri
                .into_iter()
                .filter(|(_, c)| *c >= threshold)
                .map(|((a, b, c), _)| (a.to_string(), b.to_string(), c.to_string()))
                .collect(),
        }
    }

    pub fn n_phrases(&self) -> usize {
        self.bigrams.len() + self.trigrams.len()
    }

    /// `doc` followed by its frequent bigrams and trigrams, in order of
    /// occurrence, joined with `_`.
    pub fn apply(&self, doc: &[String]) -> Vec<String> {
        let mut out = doc.to_vec();
        for w in doc.windows(2) {
            if self.bigrams.contains(&(w[0].clone(), w[1].clone())) {
                out.push(format!("{}_{}", w[0], w[1]));
            }
        }
        for w in doc.windows(3) {
            if self
                .trigrams
                .contains(&(w[0].clone(), w[1].clone(), w[2].clone()))
            {
                out.push(format!("{}_{}_{}", w[0], w[1], w[2]));
            }
        }
        out
    }
}

/// Tokenizes every `(title, abstract)` pair, then appends phrases that
/// occur at least `threshold` times across the corpus.
pub fn preprocess_corpus(docs: &[(&str, &str)], threshold: usize) -> (Vec<Vec<String>>, Phraser) {
    let pre = Preprocessor::default();
    let shards: Vec<Vec<Vec<String>>> = crate::util::map_shards(docs.len().div_ceil(64), |s| {
        docs[s * 64..((s + 1) * 64).min(docs.len())]
            .iter()
            .map(|(t, a)| pre.tokens(t, a))
            .collect()
    });
    let unigrams: Vec<Vec<String>> = shards.into_iter().flatten().collect();
    let phraser = Phraser::fit(&unigrams, threshold);
    let out = unigrams.iter().map(|d| phraser.apply(d)).collect();
    (out, phraser)
}
