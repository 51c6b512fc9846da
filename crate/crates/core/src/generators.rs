//! Deterministic test spaces and symbolic tree specs.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cubes::{ChildKind, CubeTree};
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, Norm};
use crate::rational::{ratio, rational_serde, Rational};

pub const MAX_CANTOR_DEPTH: usize = 12;
pub const MAX_GRID_POINTS: usize = 100_000;
pub const MAX_RANDOM_POINTS: usize = 10_000;
pub const MAX_TRIADIC_GRID_DEPTH: usize = 8;

/// One child slot of a node type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChildSpec {
    #[serde(rename = "type")]
    pub child_type: usize,
    #[serde(flatten)]
    pub kind: ChildKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeType {
    pub children: Vec<ChildSpec>,
}

impl NodeType {
    pub fn branching(&self) -> usize {
        self.children.len()
    }
}

/// Symbolic, eventually self-similar cube tree: a finite set of node types,
/// each listing its ordered children.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeSpec {
    #[serde(with = "rational_serde")]
    pub delta: Rational,
    pub root: usize,
    #[serde(rename = "J")]
    pub central_slots: usize,
    pub types: Vec<NodeType>,
    /// Admits `1/7 <= delta < 1`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub relaxed_delta: bool,
}

impl TreeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let zero = Rational::zero();
        if self.delta <= zero || self.delta >= Rational::one() {
            return Err(Error::DeltaOutOfRange(self.delta.to_string()));
        }
        if !self.relaxed_delta && self.delta >= ratio(1, 7) {
            return Err(Error::DeltaOutOfRange(format!("{} (>= 1/7 needs the relaxation flag)", self.delta)));
        }
        if self.types.is_empty() || self.root >= self.types.len() {
            return bad("root type out of range".into());
        }
        if self.central_slots == 0 {
            return bad("J must be positive".into());
        }
        for (t, ty) in self.types.iter().enumerate() {
            if ty.children.is_empty() {
                return bad(format!("type {t} has no children"));
            }
            let mut slots: Vec<u32> = Vec::new();
            for c in &ty.children {
                if c.child_type >= self.types.len() {
                    return bad(format!("type {t} refers to missing type {}", c.child_type));
                }
                if let ChildKind::Central { slot } = c.kind {
                    slots.push(slot);
                }
            }
            slots.sort_unstable();
            let expected: Vec<u32> = (1..=self.central_slots as u32).collect();
            if slots != expected {
                return bad(format!("type {t} has central slots {slots:?}, expected {expected:?}"));
            }
        }
        let mut seen = vec![false; self.types.len()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(t) = stack.pop() {
            for c in &self.types[t].children {
                if !seen[c.child_type] {
                    seen[c.child_type] = true;
                    stack.push(c.child_type);
                }
            }
        }
        if let Some(t) = seen.iter().position(|s| !s) {
            return bad(format!("type {t} is unreachable from the root"));
        }
        Ok(())
    }

    pub fn max_branching(&self) -> usize {
        self.types.iter().map(NodeType::branching).max().unwrap_or(0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TreeSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

/// Children in positional order with the central slots in the middle.
fn centred_children(m: usize, j: usize, child_type: usize) -> Vec<ChildSpec> {
    let before = (m - j) / 2;
    let boundary = ChildSpec { child_type, kind: ChildKind::Boundary };
    let mut out = vec![boundary; before];
    out.extend((1..=j as u32).map(|slot| ChildSpec { child_type, kind: ChildKind::Central { slot } }));
    out.extend(std::iter::repeat_n(boundary, m - j - before));
    out
}

fn check_delta(delta: &Rational) -> Result<bool> {
    if *delta <= Rational::zero() || *delta >= Rational::one() {
        return Err(Error::InvalidParams(format!("delta {delta} outside (0, 1)")));
    }
    Ok(*delta >= ratio(1, 7))
}

/// Triadic intervals: one type, `delta = 1/3`, children (boundary, central, boundary).
pub fn triadic_spec() -> TreeSpec {
    uniform_spec(3, &ratio(1, 3), 1).expect("triadic parameters are valid")
}

/// One self-similar type with `m` children, `j` of them central. A `delta`
/// of `1/7` or more is accepted and marked with the relaxation flag.
pub fn uniform_spec(m: usize, delta: &Rational, j: usize) -> Result<TreeSpec> {
    if j == 0 || j > m {
        return Err(Error::InvalidParams(format!("need 1 <= J <= M, got J = {j}, M = {m}")));
    }
    let relaxed_delta = check_delta(delta)?;
    Ok(TreeSpec {
        delta: delta.clone(),
        root: 0,
        central_slots: j,
        types: vec![NodeType { children: centred_children(m, j, 0) }],
        relaxed_delta,
    })
}

/// Periodic spec of `beta_den` types visited in a cycle. The first
/// `beta_num` types branch `m` ways (one central child, `m - 1` boundary
/// children, all continuing the cycle); the rest have a single central child.
/// The most boundary-heavy chain therefore takes exactly `beta_num` boundary
/// steps per period and no chain takes more.
pub fn boundary_rich_spec(beta_num: usize, beta_den: usize, m: usize, delta: &Rational) -> Result<TreeSpec> {
    if beta_den == 0 || beta_num == 0 || beta_num > beta_den {
        return Err(Error::InvalidParams(format!("need 0 < beta_num <= beta_den, got {beta_num}/{beta_den}")));
    }
    if m < 2 {
        return Err(Error::InvalidParams("boundary steps need M >= 2".into()));
    }
    let relaxed_delta = check_delta(delta)?;
    let types = (0..beta_den)
        .map(|i| {
            let next = (i + 1) % beta_den;
            let children = if i < beta_num {
                centred_children(m, 1, next)
            } else {
                vec![ChildSpec { child_type: next, kind: ChildKind::Central { slot: 1 } }]
            };
            NodeType { children }
        })
        .collect();
    Ok(TreeSpec { delta: delta.clone(), root: 0, central_slots: 1, types, relaxed_delta })
}

fn index_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Left endpoints of the `2^depth` middle-thirds construction intervals.
pub fn cantor_points(depth: usize) -> Result<FiniteMetricSpace> {
    if depth > MAX_CANTOR_DEPTH {
        return Err(Error::TooDeep { depth, limit: MAX_CANTOR_DEPTH });
    }
    let scale = 3u64.pow(depth as u32) as f64;
    let points = (0..1u64 << depth)
        .map(|word| {
            // Bit i (from the top) picks digit 2 at position i + 1.
            let numer: u64 = (0..depth).filter(|&i| word >> (depth - 1 - i) & 1 == 1).map(|i| 2 * 3u64.pow((depth - 1 - i) as u32)).sum();
            vec![numer as f64 / scale]
        })
        .collect();
    FiniteMetricSpace::from_coordinates(index_ids(1 << depth), points, Norm::Euclidean)
}

/// Lattice `{0, ..., n-1}^d / (n - 1)`.
pub fn grid_points(d: usize, n: usize, norm: Norm) -> Result<FiniteMetricSpace> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidParams("grid needs d >= 1 and n >= 1".into()));
    }
    let total = (n as u128).checked_pow(d as u32).filter(|&t| t <= MAX_GRID_POINTS as u128);
    let total = total.ok_or_else(|| Error::TooLarge(format!("{n}^{d} grid points exceed {MAX_GRID_POINTS}")))? as usize;
    let step = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let points = (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for c in p.iter_mut().rev() {
                *c = (idx % n) as f64 / step;
                idx /= n;
            }
            p
        })
        .collect();
    FiniteMetricSpace::from_coordinates(index_ids(total), points, norm)
}

/// `n` uniform points in `[0, 1]^d` from a seeded ChaCha8 stream.
pub fn random_points(d: usize, n: usize, seed: u64, norm: Norm) -> Result<FiniteMetricSpace> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidParams("random cloud needs d >= 1 and n >= 1".into()));
    }
    if n > MAX_RANDOM_POINTS {
        return Err(Error::TooLarge(format!("{n} random points exceed {MAX_RANDOM_POINTS}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
    FiniteMetricSpace::from_coordinates(index_ids(n), points, norm)
}

/// `3^depth` midpoints of the depth-level triadic intervals of `[0, 1]`,
/// together with the metric cube tree of those intervals (`delta = 1/3`).
pub fn triadic_grid(depth: usize) -> Result<(FiniteMetricSpace, CubeTree)> {
    if depth > MAX_TRIADIC_GRID_DEPTH {
        return Err(Error::TooDeep { depth, limit: MAX_TRIADIC_GRID_DEPTH });
    }
    let n = 3usize.pow(depth as u32);
    let points = (0..n).map(|i| vec![(2 * i + 1) as f64 / (2 * n) as f64]).collect();
    let space = FiniteMetricSpace::from_coordinates(index_ids(n), points, Norm::Euclidean)?;
    let tree = CubeTree::triadic_intervals(depth);
    Ok((space, tree))
}
