use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::scoremodel::sigmoid;

/// Decides pairwise comparisons between items addressed by index.
pub trait Comparator {
    /// Probability that item `a` is preferred over item `b`.
    fn win_probability(&self, a: usize, b: usize) -> f64;

    /// `a` beats `b` when the probability exceeds one half; exact ties go
    /// to the lower index so the relation stays antisymmetric.
    fn beats(&self, a: usize, b: usize) -> bool {
        let p = self.win_probability(a, b);
        p > 0.5 || (p == 0.5 && a < b)
    }
}

/// Compares by `σ(f(a) − f(b))` over precomputed scores.
#[derive(Debug, Clone)]
pub struct ScoreComparator {
    pub scores: Vec<f64>,
}

impl Comparator for ScoreComparator {
    fn win_probability(&self, a: usize, b: usize) -> f64 {
        sigmoid(self.scores[a] - self.scores[b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub items: usize,
    pub antisymmetry_violations: usize,
    /// Ordered triples `a > b > c > a`.
    pub cycles: usize,
}

impl CoherenceReport {
    pub fn is_coherent(&self) -> bool {
        self.antisymmetry_violations == 0 && self.cycles == 0
    }
}

/// Exhaustively checks antisymmetry over all pairs and the absence of
/// 3-cycles over all triples (which, for a tournament, rules out cycles of
/// any length).
pub fn check_coherence<C: Comparator + ?Sized>(cmp: &C, n: usize) -> CoherenceReport {
    let mut beats = vec![false; n * n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                beats[a * n + b] = cmp.beats(a, b);
            }
        }
    }
    let mut anti = 0;
    for a in 0..n {
        for b in a + 1..n {
            if beats[a * n + b] == beats[b * n + a] {
                anti += 1;
            }
        }
    }
    let mut cycles = 0;
    for a in 0..n {
        for b in 0..n {
            if a == b || !beats[a * n + b] {
                continue;
            }
            for c in 0..n {
                if c != a && c != b && beats[b * n + c] && beats[c * n + a] {
                    cycles += 1;
                }
            }
        }
    }
    CoherenceReport {
        items: n,
        antisymmetry_violations: anti,
        cycles,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standing {
    pub id: String,
    pub wins: usize,
    /// Round robin: sum of win probabilities. Swiss: opponents' wins.
    pub tiebreak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// Best first.
    pub standings: Vec<Standing>,
    pub comparisons: usize,
}

impl Ranking {
    pub fn ids(&self) -> Vec<&str> {
        self.standings.iter().map(|s| s.id.as_str()).collect()
    }
}

fn standing_order(a: &Standing, b: &Standing) -> Ordering {
    b.wins
        .cmp(&a.wins)
        .then_with(|| b.tiebreak.total_cmp(&a.tiebreak))
        .then_with(|| a.id.cmp(&b.id))
}

/// Every unordered pair is compared once; order by wins, then total win
/// probability, then id.
pub fn round_robin_rank<C: Comparator + ?Sized>(ids: &[String], cmp: &C) -> Ranking {
    let n = ids.len();
    let mut wins = vec![0usize; n];
    let mut total = vec![0.0f64; n];
    let mut comparisons = 0;
    for a in 0..n {
        for b in a + 1..n {
            let p = cmp.win_probability(a, b);
            total[a] += p;
            total[b] += 1.0 - p;
            if cmp.beats(a, b) {
                wins[a] += 1;
            } else {
                wins[b] += 1;
            }
            comparisons += 1;
        }
    }
    let mut standings: Vec<Standing> = (0..n)
        .map(|i| Standing {
            id: ids[i].clone(),
            wins: wins[i],
            tiebreak: total[i],
        })
        .collect();
    standings.sort_by(standing_order);
    Ranking {
        standings,
        comparisons,
    }
}

/// Swiss system. Round one pairs items in id order; later rounds pair
/// neighbours in the standings (wins, then opponents' wins, then id),
/// greedily avoiding rematches. With an odd count the lowest-standing
/// item without a bye sits out and is credited a win.
pub fn swiss_rank<C: Comparator + ?Sized>(ids: &[String], cmp: &C, rounds: usize) -> Ranking {
    let n = ids.len();
    let mut wins = vec![0usize; n];
    let mut opponents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut had_bye = vec![false; n];
    let mut played: HashSet<(usize, usize)> = HashSet::new();
    let mut comparisons = 0;
    let key = |i: usize, wins: &[usize], opponents: &[Vec<usize>]| -> Standing {
        Standing {
            id: ids[i].clone(),
            wins: wins[i],
            tiebreak: opponents[i].iter().map(|&o| wins[o]).sum::<usize>() as f64,
        }
    };
    for round in 0..rounds {
        let mut order: Vec<usize> = (0..n).collect();
        if round == 0 {
            order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        } else {
            order.sort_by(|&a, &b| {
                standing_order(&key(a, &wins, &opponents), &key(b, &wins, &opponents))
            });
        }
        if n % 2 == 1 {
            let pos = order
                .iter()
                .rposition(|&i| !had_bye[i])
                .unwrap_or(order.len() - 1);
            let bye = order.remove(pos);
            had_bye[bye] = true;
            wins[bye] += 1;
        }
        let mut pending = order;
        let mut matches = Vec::with_capacity(pending.len() / 2);
        while pending.len() >= 2 {
            let a = pending.remove(0);
            let pick = pending
                .iter()
                .position(|&b| !played.contains(&(a.min(b), a.max(b))))
                .unwrap_or(0);
            let b = pending.remove(pick);
            matches.push((a, b));
        }
        for (a, b) in matches {
            if cmp.beats(a, b) {
                wins[a] += 1;
            } else {
                wins[b] += 1;
            }
            opponents[a].push(b);
            opponents[b].push(a);
            played.insert((a.min(b), a.max(b)));
            comparisons += 1;
        }
    }
    let mut standings: Vec<Standing> = (0..n).map(|i| key(i, &wins, &opponents)).collect();
    standings.sort_by(standing_order);
    Ranking {
        standings,
        comparisons,
    }
}
