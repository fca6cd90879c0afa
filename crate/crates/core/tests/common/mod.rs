//! Independent reference implementations used to cross-check the library.
#![allow(dead_code)]

/// Mean BCE minimized over every assignment of label columns to posterior
/// columns, enumerated recursively. No clamping: keep posteriors inside (0, 1).
pub fn pit_oracle(labels: &[Vec<bool>], posteriors: &[Vec<f64>]) -> f64 {
    let t = labels.len();
    let s = labels[0].len();
    fn rec(
        k: usize,
        used: &mut Vec<bool>,
        perm: &mut Vec<usize>,
        labels: &[Vec<bool>],
        posteriors: &[Vec<f64>],
        best: &mut f64,
    ) {
        let s = used.len();
        if k == s {
            let mut total = 0.0;
            for (lrow, prow) in labels.iter().zip(posteriors) {
                for out in 0..s {
                    let p = prow[out];
                    total -= if lrow[perm[out]] { p.ln() } else { (1.0 - p).ln() };
                }
            }
            let loss = total / (labels.len() * s) as f64;
            if loss < *best {
                *best = loss;
            }
            return;
        }
        for src in 0..s {
            if !used[src] {
                used[src] = true;
                perm.push(src);
                rec(k + 1, used, perm, labels, posteriors, best);
                perm.pop();
                used[src] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    assert!(t > 0);
    rec(0, &mut vec![false; s], &mut Vec::new(), labels, posteriors, &mut best);
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    Diag,
    Del,
    Ins,
}

/// (reference index, hypothesis index) per aligned position.
pub type Path = Vec<(Option<usize>, Option<usize>)>;

fn path_cost<T: PartialEq>(r: &[T], h: &[T], steps: &[Step]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    for s in steps {
        match s {
            Step::Diag => {
                c += usize::from(r[i] != h[j]);
                i += 1;
                j += 1;
            }
            Step::Del => {
                c += 1;
                i += 1;
            }
            Step::Ins => {
                c += 1;
                j += 1;
            }
        }
    }
    c
}

fn to_path(steps: &[Step]) -> Path {
    let (mut i, mut j) = (0, 0);
    steps
        .iter()
        .map(|s| match s {
            Step::Diag => {
                i += 1;
                j += 1;
                (Some(i - 1), Some(j - 1))
            }
            Step::Del => {
                i += 1;
                (Some(i - 1), None)
            }
            Step::Ins => {
                j += 1;
                (None, Some(j - 1))
            }
        })
        .collect()
}

/// Minimum edit cost with ties broken by comparing step sequences from the
/// end (diagonal < deletion < insertion). Recursion over every monotone
/// alignment, memoized on (i, j); each cell keeps its cost and final step.
pub fn align_oracle<T: PartialEq>(r: &[T], h: &[T]) -> (usize, Path) {
    fn best<T: PartialEq>(i: usize, j: usize, r: &[T], h: &[T], memo: &mut [Vec<Option<(usize, Step)>>]) -> usize {
        if i == 0 && j == 0 {
            return 0;
        }
        if let Some((c, _)) = memo[i][j] {
            return c;
        }
        let mut choice: Option<(usize, Step)> = None;
        let mut offer = |c: usize, s: Step| {
            if choice.is_none_or(|(bc, bs)| (c, s) < (bc, bs)) {
                choice = Some((c, s));
            }
        };
        if i > 0 && j > 0 {
            offer(best(i - 1, j - 1, r, h, memo) + usize::from(r[i - 1] != h[j - 1]), Step::Diag);
        }
        if i > 0 {
            offer(best(i - 1, j, r, h, memo) + 1, Step::Del);
        }
        if j > 0 {
            offer(best(i, j - 1, r, h, memo) + 1, Step::Ins);
        }
        memo[i][j] = choice;
        choice.expect("some step exists").0
    }
    let (n, m) = (r.len(), h.len());
    let mut memo = vec![vec![None; m + 1]; n + 1];
    let cost = best(n, m, r, h, &mut memo);
    let mut steps = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let (_, s) = memo[i][j].expect("visited");
        steps.push(s);
        match s {
            Step::Diag => {
                i -= 1;
                j -= 1;
            }
            Step::Del => i -= 1,
            Step::Ins => j -= 1,
        }
    }
    steps.reverse();
    (cost, to_path(&steps))
}

/// Enumerates every monotone alignment without pruning and applies the same
/// cost and tie rule as [`align_oracle`]. Exponential; short inputs only.
pub fn align_enumerate<T: PartialEq>(r: &[T], h: &[T]) -> (usize, Path) {
    fn all(i: usize, j: usize, n: usize, m: usize, cur: &mut Vec<Step>, out: &mut Vec<Vec<Step>>) {
        if i == n && j == m {
            out.push(cur.clone());
            return;
        }
        for (s, ok) in [(Step::Diag, i < n && j < m), (Step::Del, i < n), (Step::Ins, j < m)] {
            if ok {
                cur.push(s);
                let (ni, nj) = match s {
                    Step::Diag => (i + 1, j + 1),
                    Step::Del => (i + 1, j),
                    Step::Ins => (i, j + 1),
                };
                all(ni, nj, n, m, cur, out);
                cur.pop();
            }
        }
    }
    let mut paths = Vec::new();
    all(0, 0, r.len(), h.len(), &mut Vec::new(), &mut paths);
    let best = paths
        .into_iter()
        .map(|p| {
            let c = path_cost(r, h, &p);
            let rev: Vec<Step> = p.iter().rev().copied().collect();
            (c, rev, p)
        })
        .min_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)))
        .expect("at least one alignment");
    (best.0, to_path(&best.2))
}

/// Every sequence over `0..vocab` of length `0..=max_len`.
pub fn all_sequences(vocab: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for w in 0..vocab {
                let mut t: Vec<usize> = s.clone();
                t.push(w);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Fraction of a WDER computed by direct counting: aligned words whose
/// reference speaker differs from the mapped hypothesis speaker, over all
/// aligned words, maximizing agreement over injective speaker maps.
pub fn wder_oracle(pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut hyp: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    hyp.sort_unstable();
    hyp.dedup();
    let mut refs: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    refs.sort_unstable();
    refs.dedup();
    // Assign each hypothesis speaker a distinct reference speaker or none.
    fn rec(k: usize, hyp: &[usize], refs: &[usize], used: &mut Vec<bool>, map: &mut Vec<Option<usize>>, pairs: &[(usize, usize)], best: &mut usize) {
        if k == hyp.len() {
            let agree = pairs
                .iter()
                .filter(|(r, h)| {
                    let idx = hyp.iter().position(|x| x == h).unwrap();
                    map[idx] == Some(*r)
                })
                .count();
            *best = (*best).max(agree);
            return;
        }
        map.push(None);
        rec(k + 1, hyp, refs, used, map, pairs, best);
        map.pop();
        for (ri, &r) in refs.iter().enumerate() {
            if !used[ri] {
                used[ri] = true;
                map.push(Some(r));
                rec(k + 1, hyp, refs, used, map, pairs, best);
                map.pop();
                used[ri] = false;
            }
        }
    }
    let mut best = 0;
    rec(0, &hyp, &refs, &mut vec![false; refs.len()], &mut Vec::new(), pairs, &mut best);
    (pairs.len() - best) as f64 / pairs.len() as f64
}

pub mod models {
    use aglsec_core::corrector::CorrectorConfig;
    use aglsec_core::tokenizer::Vocabulary;
    use aglsec_nn::EncoderConfig;

    pub const WORDS: [&str; 10] = ["how", "are", "you", "i", "am", "good", "absolutely", "yeah", "hello", "weekend"];

    pub fn vocab() -> Vocabulary {
        Vocabulary::build(WORDS, 64).unwrap()
    }

    /// Small enough for exhaustive finite differences.
    pub fn toy_config(vocab_size: usize) -> CorrectorConfig {
        CorrectorConfig {
            backbone: EncoderConfig {
                num_layers: 1,
                model_dim: 4,
                num_heads: 2,
                ff_dim: 6,
                vocab_size,
                max_positions: 24,
            },
            frontend_layers: 1,
            frontend_dim: 4,
            frontend_heads: 2,
            frontend_ff: 6,
            fusion_hidden: 3,
        }
    }
}
