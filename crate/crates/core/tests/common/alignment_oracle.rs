//! Brute-force alignment search: enumerate every one-to-one matching
//! between candidate and reference positions.

use capforge_core::meteor::porter_stem;

pub struct Best {
    pub matches: usize,
    pub exact: usize,
    pub crossings: usize,
}

fn crossings(pairs: &[(usize, usize)]) -> usize {
    let mut n = 0;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (a, b) = (pairs[i], pairs[j]);
            if (a.0 < b.0) != (a.1 < b.1) {
                n += 1;
            }
        }
    }
    n
}

/// Maximize matches, then exact matches, then minimize crossings.
pub fn exhaustive(candidate: &[&str], reference: &[&str]) -> Best {
    let cs: Vec<String> = candidate.iter().map(|w| porter_stem(w)).collect();
    let rs: Vec<String> = reference.iter().map(|w| porter_stem(w)).collect();
    let mut best = Best {
        matches: 0,
        exact: 0,
        crossings: 0,
    };
    let mut used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn go(
        i: usize,
        c: &[&str],
        r: &[&str],
        cs: &[String],
        rs: &[String],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        exact: usize,
        best: &mut Best,
    ) {
        if i == c.len() {
            let key = (pairs.len(), exact);
            let x = crossings(pairs);
            if key > (best.matches, best.exact)
                || (key == (best.matches, best.exact) && x < best.crossings)
            {
                *best = Best {
                    matches: pairs.len(),
                    exact,
                    crossings: x,
                };
            }
            return;
        }
        go(i + 1, c, r, cs, rs, used, pairs, exact, best);
        for j in 0..r.len() {
            if used[j] {
                continue;
            }
            let is_exact = c[i] == r[j];
            if is_exact || cs[i] == rs[j] {
                used[j] = true;
                pairs.push((i, j));
                go(
                    i + 1,
                    c,
                    r,
                    cs,
                    rs,
                    used,
                    pairs,
                    exact + is_exact as usize,
                    best,
                );
                pairs.pop();
                used[j] = false;
            }
        }
    }
    go(
        0, candidate, reference, &cs, &rs, &mut used, &mut pairs, 0, &mut best,
    );
    best
}

pub const VOCAB: [&str; 12] = [
    "park", "parks", "parked", "plane", "planes", "tree", "trees", "green", "road", "roads", "a",
    "the",
];
