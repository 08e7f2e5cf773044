//! Unigram alignment between a candidate and a single reference.
//!
//! Two tokens may be aligned when their Porter stems agree; the pair counts as
//! an exact match when the surface tokens are equal and as a stem match
//! otherwise. The chosen alignment maximizes, in order: the number of matches,
//! the number of exact matches, and then minimizes crossings. Remaining ties go
//! to the alignment that matches earlier candidate tokens to earlier reference
//! positions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::porter::porter_stem;

/// Sentences up to this length (both sides) are aligned by exhaustive
/// branch-and-bound search; longer ones fall back to beam search.
pub const EXHAUSTIVE_MAX_LEN: usize = 12;
pub const BEAM_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Exact,
    Stem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub candidate: usize,
    pub reference: usize,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    /// Sorted by candidate index.
    pub matches: Vec<Match>,
    pub chunk_count: usize,
    pub crossing_count: usize,
}

impl Alignment {
    pub fn exact_count(&self) -> usize {
        self.matches
            .iter()
            .filter(|m| m.stage == Stage::Exact)
            .count()
    }
}

/// Maximal runs of matches adjacent in both sentences, in the same order.
pub fn count_chunks(matches: &[Match]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<&Match> = None;
    for m in matches {
        let continues = prev
            .map(|p| m.candidate == p.candidate + 1 && m.reference == p.reference + 1)
            .unwrap_or(false);
        if !continues {
            chunks += 1;
        }
        prev = Some(m);
    }
    chunks
}

pub fn count_crossings(matches: &[Match]) -> usize {
    let mut n = 0;
    for (a, m1) in matches.iter().enumerate() {
        for m2 in &matches[a + 1..] {
            let c = m1.candidate.cmp(&m2.candidate);
            let r = m1.reference.cmp(&m2.reference);
            if c != r && c != std::cmp::Ordering::Equal && r != std::cmp::Ordering::Equal {
                n += 1;
            }
        }
    }
    n
}

/// Tokens interned into stem classes and surface ids.
struct Problem {
    cand_class: Vec<usize>,
    cand_tok: Vec<usize>,
    ref_class: Vec<usize>,
    ref_tok: Vec<usize>,
    n_classes: usize,
    n_toks: usize,
    /// For each candidate position, reference positions in the same class, ascending.
    options: Vec<Vec<usize>>,
}

impl Problem {
    fn new<'a, S: AsRef<str>>(candidate: &'a [S], reference: &'a [S]) -> Self {
        let mut classes: HashMap<String, usize> = HashMap::new();
        let mut class_of = |t: &str| -> usize {
            let next = classes.len();
            *classes.entry(porter_stem(t)).or_insert(next)
        };
        let cand_class: Vec<usize> = candidate.iter().map(|t| class_of(t.as_ref())).collect();
        let ref_class: Vec<usize> = reference.iter().map(|t| class_of(t.as_ref())).collect();
        let n_classes = classes.len();

        let mut toks: HashMap<&str, usize> = HashMap::new();
        let mut tok_of = |t: &'a str| -> usize {
            let next = toks.len();
            *toks.entry(t).or_insert(next)
        };
        let cand_tok: Vec<usize> = candidate.iter().map(|t| tok_of(t.as_ref())).collect();
        let ref_tok: Vec<usize> = reference.iter().map(|t| tok_of(t.as_ref())).collect();
        let n_toks = toks.len();
        let options = cand_class
            .iter()
            .map(|&c| {
                (0..ref_class.len())
                    .filter(|&j| ref_class[j] == c)
                    .collect()
            })
            .collect();
        Problem {
            cand_class,
            cand_tok,
            ref_class,
            ref_tok,
            n_classes,
            n_toks,
            options,
        }
    }

    fn stage(&self, i: usize, j: usize) -> Stage {
        if self.cand_tok[i] == self.ref_tok[j] {
            Stage::Exact
        } else {
            Stage::Stem
        }
    }
}

/// Remaining-capacity bookkeeping shared by both search strategies.
#[derive(Clone)]
struct State {
    used: Vec<bool>,
    /// (candidate, reference) pairs in candidate order.
    pairs: Vec<(usize, usize)>,
    crossings: usize,
    exact: usize,
    rem_cand_class: Vec<usize>,
    free_ref_class: Vec<usize>,
    rem_cand_tok: Vec<usize>,
    free_ref_tok: Vec<usize>,
}

impl State {
    fn initial(p: &Problem) -> Self {
        let mut s = State {
            used: vec![false; p.ref_class.len()],
            pairs: Vec::new(),
            crossings: 0,
            exact: 0,
            rem_cand_class: vec![0; p.n_classes],
            free_ref_class: vec![0; p.n_classes],
            rem_cand_tok: vec![0; p.n_toks],
            free_ref_tok: vec![0; p.n_toks],
        };
        for (&c, &t) in p.cand_class.iter().zip(&p.cand_tok) {
            s.rem_cand_class[c] += 1;
            s.rem_cand_tok[t] += 1;
        }
        for (&c, &t) in p.ref_class.iter().zip(&p.ref_tok) {
            s.free_ref_class[c] += 1;
            s.free_ref_tok[t] += 1;
        }
        s
    }

    fn card_bound(&self) -> usize {
        self.rem_cand_class
            .iter()
            .zip(&self.free_ref_class)
            .map(|(a, b)| *a.min(b))
            .sum()
    }

    fn exact_bound(&self) -> usize {
        self.rem_cand_tok
            .iter()
            .zip(&self.free_ref_tok)
            .map(|(a, b)| *a.min(b))
            .sum()
    }

    fn feasible(&self, target_card: usize, target_exact: usize) -> bool {
        self.pairs.len() + self.card_bound() >= target_card
            && self.exact + self.exact_bound() >= target_exact
    }

    /// Consume candidate `i`, optionally matching it to reference `j`.
    fn advance(&mut self, p: &Problem, i: usize, j: Option<usize>) {
        self.rem_cand_class[p.cand_class[i]] -= 1;
        self.rem_cand_tok[p.cand_tok[i]] -= 1;
        if let Some(j) = j {
            self.crossings += self.pairs.iter().filter(|&&(_, r)| r > j).count();
            if p.stage(i, j) == Stage::Exact {
                self.exact += 1;
            }
            self.used[j] = true;
            self.free_ref_class[p.ref_class[j]] -= 1;
            self.free_ref_tok[p.ref_tok[j]] -= 1;
            self.pairs.push((i, j));
        }
    }

    fn retreat(&mut self, p: &Problem, i: usize, j: Option<usize>) {
        self.rem_cand_class[p.cand_class[i]] += 1;
        self.rem_cand_tok[p.cand_tok[i]] += 1;
        if let Some(j) = j {
            self.pairs.pop();
            self.free_ref_class[p.ref_class[j]] += 1;
            self.free_ref_tok[p.ref_tok[j]] += 1;
            self.used[j] = false;
            if p.stage(i, j) == Stage::Exact {
                self.exact -= 1;
            }
            self.crossings -= self.pairs.iter().filter(|&&(_, r)| r > j).count();
        }
    }
}

struct Search<'a> {
    p: &'a Problem,
    target_card: usize,
    target_exact: usize,
    best: Option<(usize, Vec<(usize, usize)>)>,
}

impl Search<'_> {
    fn dfs(&mut self, s: &mut State, i: usize) {
        if let Some((best, _)) = &self.best {
            if s.crossings >= *best {
                return;
            }
        }
        if !s.feasible(self.target_card, self.target_exact) {
            return;
        }
        if i == self.p.cand_class.len() {
            self.best = Some((s.crossings, s.pairs.clone()));
            return;
        }
        for k in 0..self.p.options[i].len() {
            let j = self.p.options[i][k];
            if s.used[j] {
                continue;
            }
            s.advance(self.p, i, Some(j));
            self.dfs(s, i + 1);
            s.retreat(self.p, i, Some(j));
        }
        s.advance(self.p, i, None);
        self.dfs(s, i + 1);
        s.retreat(self.p, i, None);
    }
}

fn beam(p: &Problem, target_card: usize, target_exact: usize, width: usize) -> Vec<(usize, usize)> {
    let mut frontier = vec![State::initial(p)];
    for i in 0..p.cand_class.len() {
        let mut next = Vec::new();
        for s in &frontier {
            for &j in &p.options[i] {
                if s.used[j] {
                    continue;
                }
                let mut child = s.clone();
                child.advance(p, i, Some(j));
                if child.feasible(target_card, target_exact) {
                    next.push(child);
                }
            }
            let mut child = s.clone();
            child.advance(p, i, None);
            if child.feasible(target_card, target_exact) {
                next.push(child);
            }
        }
        next.sort_by_key(|s| s.crossings);
        next.truncate(width);
        frontier = next;
    }
    frontier
        .into_iter()
        .next()
        .map(|s| s.pairs)
        .unwrap_or_default()
}

fn finish(p: &Problem, pairs: Vec<(usize, usize)>) -> Alignment {
    let matches: Vec<Match> = pairs
        .into_iter()
        .map(|(i, j)| Match {
            candidate: i,
            reference: j,
            stage: p.stage(i, j),
        })
        .collect();
    Alignment {
        chunk_count: count_chunks(&matches),
        crossing_count: count_crossings(&matches),
        matches,
    }
}

pub fn align<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Alignment {
    let p = Problem::new(candidate, reference);
    let start = State::initial(&p);
    let target_card = start.card_bound();
    let target_exact = start.exact_bound();
    if target_card == 0 {
        return finish(&p, Vec::new());
    }
    let pairs = if candidate.len() <= EXHAUSTIVE_MAX_LEN && reference.len() <= EXHAUSTIVE_MAX_LEN {
        let mut search = Search {
            p: &p,
            target_card,
            target_exact,
            best: None,
        };
        let mut s = start;
        search.dfs(&mut s, 0);
        search.best.map(|(_, pairs)| pairs).unwrap_or_default()
    } else {
        beam(&p, target_card, target_exact, BEAM_WIDTH)
    };
    finish(&p, pairs)
}
