//! Karp's maximum mean cycle over weights with exact comparisons.

use std::cmp::Ordering;

use num_traits::{One, Signed};

use crate::rational::{pow, Rational};

/// Edge weights forming a totally ordered group, so walk weights combine and
/// cycle means compare exactly.
pub trait CycleWeight: Clone {
    fn identity() -> Self;
    fn combine(&self, other: &Self) -> Self;
    /// Weight `w` with `other.combine(w) == self`.
    fn difference(&self, other: &Self) -> Self;
    fn inverse(&self) -> Self;
    /// Compares two walk weights of equal length.
    fn cmp_total(&self, other: &Self) -> Ordering;
    /// Compares the means `self / len` and `other / other_len`.
    fn cmp_mean(&self, len: usize, other: &Self, other_len: usize) -> Ordering;
}

/// A positive rational standing for its logarithm: products add weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogRational(pub Rational);

impl CycleWeight for LogRational {
    fn identity() -> Self {
        LogRational(Rational::one())
    }

    fn combine(&self, other: &Self) -> Self {
        LogRational(&self.0 * &other.0)
    }

    fn difference(&self, other: &Self) -> Self {
        LogRational(&self.0 / &other.0)
    }

    fn inverse(&self) -> Self {
        LogRational(self.0.recip())
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }

    fn cmp_mean(&self, len: usize, other: &Self, other_len: usize) -> Ordering {
        // ln(a)/l <=> ln(b)/k  iff  a^k <=> b^l.
        pow(&self.0, other_len as u64).cmp(&pow(&other.0, len as u64))
    }
}

/// Plain integer weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Count(pub i64);

impl CycleWeight for Count {
    fn identity() -> Self {
        Count(0)
    }

    fn combine(&self, other: &Self) -> Self {
        Count(self.0 + other.0)
    }

    fn difference(&self, other: &Self) -> Self {
        Count(self.0 - other.0)
    }

    fn inverse(&self) -> Self {
        Count(-self.0)
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }

    fn cmp_mean(&self, len: usize, other: &Self, other_len: usize) -> Ordering {
        (self.0 as i128 * other_len as i128).cmp(&(other.0 as i128 * len as i128))
    }
}

/// Optimal cycle mean as `total / len`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanCycle<W> {
    pub total: W,
    pub len: usize,
}

/// Maximum mean over all directed cycles of the multigraph on `n` nodes with
/// `edges` given as `(from, to, weight)`; `None` for an acyclic graph.
pub fn max_mean_cycle<W: CycleWeight>(n: usize, edges: &[(usize, usize, W)]) -> Option<MeanCycle<W>> {
    if n == 0 {
        return None;
    }
    // best[k][v]: heaviest walk with exactly k edges ending at v, from any start.
    let mut best: Vec<Vec<Option<W>>> = vec![vec![Some(W::identity()); n]];
    for k in 1..=n {
        let mut row: Vec<Option<W>> = vec![None; n];
        for (from, to, w) in edges {
            if let Some(prev) = &best[k - 1][*from] {
                let cand = prev.combine(w);
                let replace = match &row[*to] {
                    None => true,
                    Some(cur) => cand.cmp_total(cur) == Ordering::Greater,
                };
                if replace {
                    row[*to] = Some(cand);
                }
            }
        }
        best.push(row);
    }
    let mut answer: Option<MeanCycle<W>> = None;
    for v in 0..n {
        let Some(top) = &best[n][v] else { continue };
        let mut worst: Option<MeanCycle<W>> = None;
        for (k, row) in best.iter().enumerate().take(n) {
            let Some(dk) = &row[v] else { continue };
            let cand = MeanCycle { total: top.difference(dk), len: n - k };
            let smaller = match &worst {
                None => true,
                Some(cur) => cand.total.cmp_mean(cand.len, &cur.total, cur.len) == Ordering::Less,
            };
            if smaller {
                worst = Some(cand);
            }
        }
        if let Some(w) = worst {
            let larger = match &answer {
                None => true,
                Some(cur) => w.total.cmp_mean(w.len, &cur.total, cur.len) == Ordering::Greater,
            };
            if larger {
                answer = Some(w);
            }
        }
    }
    answer
}

/// Minimum mean cycle, via the maximum over inverted weights.
pub fn min_mean_cycle<W: CycleWeight>(n: usize, edges: &[(usize, usize, W)]) -> Option<MeanCycle<W>> {
    let inverted: Vec<(usize, usize, W)> = edges.iter().map(|(a, b, w)| (*a, *b, w.inverse())).collect();
    max_mean_cycle(n, &inverted).map(|m| MeanCycle { total: m.total.inverse(), len: m.len })
}

impl MeanCycle<LogRational> {
    /// Mean as a float, `ln(total) / len`.
    pub fn ln_mean(&self) -> f64 {
        if self.total.0.is_one() {
            return 0.0;
        }
        debug_assert!(self.total.0.is_positive());
        crate::rational::ln_rational(&self.total.0) / self.len as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn brute_force_cycles(n: usize, edges: &[(usize, usize, i64)]) -> Option<(f64, f64)> {
        // Simple cycles suffice for extremal means; enumerate closed walks up to length n.
        let mut best: Option<(f64, f64)> = None;
        fn walk(
            edges: &[(usize, usize, i64)],
            start: usize,
            at: usize,
            len: usize,
            sum: i64,
            max_len: usize,
            best: &mut Option<(f64, f64)>,
        ) {
            if len > 0 && at == start {
                let m = sum as f64 / len as f64;
                *best = Some(match *best {
                    None => (m, m),
                    Some((lo, hi)) => (lo.min(m), hi.max(m)),
                });
            }
            if len == max_len {
                return;
            }
            for &(a, b, w) in edges {
                if a == at {
                    walk(edges, start, b, len + 1, sum + w, max_len, best);
                }
            }
        }
        for s in 0..n {
            walk(edges, s, s, 0, 0, n, &mut best);
        }
        best
    }

    #[test]
    fn two_cycles() {
        // 0 -> 1 -> 0 with weights 3, 1 (mean 2); self loop on 1 with weight 5.
        let edges = vec![(0, 1, Count(3)), (1, 0, Count(1)), (1, 1, Count(5))];
        let max = max_mean_cycle(2, &edges).unwrap();
        assert_eq!(max.total.0, 5 * max.len as i64);
        let min = min_mean_cycle(2, &edges).unwrap();
        assert_eq!(min.total.0, 2 * min.len as i64);
        assert!(max_mean_cycle::<Count>(2, &[(0, 1, Count(1))]).is_none());
    }

    #[test]
    fn multiplicative_weights() {
        let edges = vec![(0, 0, LogRational(int(9))), (0, 0, LogRational(ratio(3, 1)))];
        let max = max_mean_cycle(1, &edges).unwrap();
        assert_eq!(max.total.0, int(9));
        let min = min_mean_cycle(1, &edges).unwrap();
        assert_eq!(min.total.0, int(3));
        assert!((max.ln_mean() - 9f64.ln()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn matches_closed_walk_enumeration(
            n in 1usize..5,
            raw in proptest::collection::vec((0usize..5, 0usize..5, -6i64..7), 1..9),
        ) {
            let edges: Vec<(usize, usize, i64)> = raw.into_iter().map(|(a, b, w)| (a % n, b % n, w)).collect();
            let weighted: Vec<(usize, usize, Count)> = edges.iter().map(|&(a, b, w)| (a, b, Count(w))).collect();
            let brute = brute_force_cycles(n, &edges);
            let max = max_mean_cycle(n, &weighted);
            let min = min_mean_cycle(n, &weighted);
            match brute {
                None => prop_assert!(max.is_none() && min.is_none()),
                Some((lo, hi)) => {
                    let max = max.unwrap();
                    let min = min.unwrap();
                    prop_assert!((max.total.0 as f64 / max.len as f64 - hi).abs() < 1e-12);
                    prop_assert!((min.total.0 as f64 / min.len as f64 - lo).abs() < 1e-12);
                }
            }
        }
    }
}
