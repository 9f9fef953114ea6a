#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Small enough that every subcommand finishes in seconds.
pub const SMALL_CONFIG: &str = r#"
corpus = "corpus.jsonl"
out_dir = "out"
seeds = [0, 1]

[provider]
dimension = 32

[model]
hidden = 16
heads = 2
ff_hidden = 32

[train]
epochs = 30
batch_size = 32
learning_rate = 3e-3
dropout = 0.0

[rank]
input = "items"
checkpoint = "out/seed-0/model.sdqm"

[evaluate]
checkpoint = "out/seed-0/model.sdqm"

[sections]
papers = "out/raw_papers.jsonl"
heads = 2
layers = 1
ff_hidden = 32

[sections.train]
epochs = 2
batch_size = 64
learning_rate = 1e-3

[topics]
k = 3
iterations = 60
min_size = 20
"#;

pub fn sdq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdq"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("sdq runs")
}

/// Runs and panics with stderr unless the exit status is zero.
pub fn sdq_ok(dir: &Path, args: &[&str]) -> Output {
    let out = sdq(dir, args);
    assert!(
        out.status.success(),
        "sdq {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// A working directory holding the small config and a folder of short
/// texts to rank.
pub fn workspace(items: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL_CONFIG).unwrap();
    let items_dir = dir.path().join("items");
    std::fs::create_dir(&items_dir).unwrap();
    for i in 0..items {
        std::fs::write(
            items_dir.join(format!("item-{i:02}.txt")),
            format!(
                "Paper number {i}\nAn abstract about topic {} and method {}.",
                i % 3,
                i * 7 % 5
            ),
        )
        .unwrap();
    }
    dir
}

pub fn read_json(path: impl AsRef<Path>) -> serde_json::Value {
    let p = path.as_ref();
    serde_json::from_str(
        &std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display())),
    )
    .unwrap()
}

/// Relative paths of every file under `root`, sorted.
pub fn files_under(root: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
