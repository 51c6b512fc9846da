//! Assouad and lower dimensions: finite-data estimators for sets and
//! measures, and exact values of symbolic specs via optimal mean cycles.

use std::fmt;

use num_traits::{One, Signed};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cubes::{CubeTree, TreeSource};
use crate::error::{Error, Result};
use crate::generators::TreeSpec;
use crate::mean_cycle::{max_mean_cycle, min_mean_cycle, Count, LogRational, MeanCycle};
use crate::measures::{check_eta, check_p, step_fraction, BallProfile, MassAssignment};
use crate::metric::{covering_number, CoverMode, FiniteMetricSpace, ScaleWindow};
use crate::rational::{int, ln_rational, rational_serde, to_f64, Rational};

/// Evidence entries kept per report.
pub const MAX_EVIDENCE: usize = 16;

/// Only scale pairs with at least this ratio enter slope fits.
pub const SLOPE_FIT_MIN_RATIO: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    SetAssouad,
    SetLower,
    MeasureAssouad,
    MeasureLower,
}

impl DimensionKind {
    pub fn is_upper(self) -> bool {
        matches!(self, DimensionKind::SetAssouad | DimensionKind::MeasureAssouad)
    }

    pub fn is_measure(self) -> bool {
        matches!(self, DimensionKind::MeasureAssouad | DimensionKind::MeasureLower)
    }
}

impl fmt::Display for DimensionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DimensionKind::SetAssouad => "set_assouad",
            DimensionKind::SetLower => "set_lower",
            DimensionKind::MeasureAssouad => "measure_assouad",
            DimensionKind::MeasureLower => "measure_lower",
        })
    }
}

/// Upper (Assouad) or lower variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Assouad,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ChainSup,
    ChainInf,
    SlopeFit,
    ExactCycle,
    BallRatio,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Descriptor {
    /// Cube path from `Q` down to `Q'`.
    Chain { cubes: Vec<usize> },
    /// Point id and the two radii.
    Triple { x: String, big_r: f64, r: f64 },
}

/// One measured ratio: `log_ratio / log_scale` is its exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub descriptor: Descriptor,
    /// Levels separating the two cubes, for chains.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_gap: Option<usize>,
    /// `ln(R/r)`, or `m ln(1/delta)` for chains.
    pub log_scale: f64,
    /// `ln` of the covering number or mass ratio.
    pub log_ratio: f64,
}

impl Evidence {
    pub fn exponent(&self) -> f64 {
        if self.log_scale == 0.0 {
            0.0
        } else {
            self.log_ratio / self.log_scale
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportWindow {
    Scales { r_min: f64, r_max: f64 },
    Depth { m_min: usize, depth: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub kind: DimensionKind,
    pub method: Method,
    #[serde(with = "extended_real")]
    pub value: f64,
    /// Smallest `C` with every sampled ratio within `C (R/r)^value` (or its dual).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// Raw supremum (or infimum) of the sampled exponents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extremal: Option<f64>,
    pub evidence: Vec<Evidence>,
    pub window: ReportWindow,
    pub flags: Vec<String>,
}

/// Floats with `+inf` written as the string `"inf"`.
mod extended_real {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad value {s:?}"))),
        }
    }
}

fn keep_extremal(mut evidence: Vec<Evidence>, upper: bool) -> Vec<Evidence> {
    evidence.sort_by(|a, b| {
        let o = a.exponent().total_cmp(&b.exponent());
        if upper {
            o.reverse()
        } else {
            o
        }
    });
    evidence.truncate(MAX_EVIDENCE);
    evidence
}

/// Least-squares slope with intercept; `None` with fewer than two distinct `x`.
fn slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 1e-12).then(|| sxy / sxx)
}

/// Evenly strided subset of `0..n` of size at most `budget`.
fn sample_centers(n: usize, budget: usize) -> Vec<usize> {
    let budget = budget.max(1);
    if n <= budget {
        return (0..n).collect();
    }
    let mut v: Vec<usize> = (0..budget).map(|i| i * n / budget).collect();
    v.dedup();
    v
}

fn set_estimate(space: &FiniteMetricSpace, window: &ScaleWindow, budget: usize, upper: bool) -> Result<DimensionReport> {
    let kind = if upper { DimensionKind::SetAssouad } else { DimensionKind::SetLower };
    let mut flags = Vec::new();
    let mut w = *window;
    if let Some(min) = space.min_positive_distance() {
        if w.r_min < min / 2.0 {
            flags.push("below_resolution".to_string());
            if !upper {
                w.r_min = min / 2.0;
            }
        }
    }
    let grid: Vec<f64> = if w.r_min < w.r_max { w.geometric_grid(0.5) } else { Vec::new() };
    // Balls of radius >= diam are the whole space and carry no scaling.
    let diam = space.diameter();
    let pairs: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .filter(|(_, &big_r)| big_r < diam * (1.0 - 1e-9))
        .flat_map(|(i, &big_r)| grid[i + 1..].iter().map(move |&r| (big_r, r)))
        .collect();
    let report_window = ReportWindow::Scales { r_min: w.r_min, r_max: w.r_max };
    if pairs.is_empty() || space.is_empty() {
        flags.push("degenerate_window".to_string());
        return Ok(DimensionReport {
            kind,
            method: Method::SlopeFit,
            value: 0.0,
            constant: None,
            extremal: None,
            evidence: Vec::new(),
            window: report_window,
            flags,
        });
    }
    let centers = sample_centers(space.len(), budget);
    if centers.len() < space.len() {
        flags.push(format!("centers_sampled:{}", centers.len()));
    }
    // Extremal covering number over centers for each scale pair.
    let per_pair: Vec<(f64, f64, usize, usize)> = pairs
        .par_iter()
        .map(|&(big_r, r)| {
            let mut best: Option<(usize, usize)> = None;
            for &x in &centers {
                let n = covering_number(space, x, big_r, r, CoverMode::Greedy).expect("r < R");
                let better = match best {
                    None => true,
                    Some((b, _)) => (upper && n > b) || (!upper && n < b),
                };
                if better {
                    best = Some((n, x));
                }
            }
            let (n, x) = best.expect("centers are non-empty");
            (big_r, r, n, x)
        })
        .collect();
    let evidence: Vec<Evidence> = per_pair
        .iter()
        .map(|&(big_r, r, n, x)| Evidence {
            descriptor: Descriptor::Triple { x: space.id(x).to_string(), big_r, r },
            scale_gap: None,
            log_scale: (big_r / r).ln(),
            log_ratio: (n as f64).ln(),
        })
        .collect();
    let raw: Vec<f64> = evidence.iter().map(Evidence::exponent).collect();
    let extremal = if upper { raw.iter().cloned().fold(0.0, f64::max) } else { raw.iter().cloned().fold(f64::INFINITY, f64::min) };
    let mut fit: Vec<(f64, f64)> =
        evidence.iter().filter(|e| e.log_scale >= SLOPE_FIT_MIN_RATIO.ln() - 1e-12).map(|e| (e.log_scale, e.log_ratio)).collect();
    if fit.len() < 2 {
        flags.push("few_scale_pairs".to_string());
        fit = evidence.iter().map(|e| (e.log_scale, e.log_ratio)).collect();
    }
    let value = slope(&fit).unwrap_or(extremal).max(0.0);
    let constant = evidence
        .iter()
        .map(|e| {
            let c = (e.log_ratio - value * e.log_scale).exp();
            if upper {
                c
            } else {
                1.0 / c
            }
        })
        .fold(0.0, f64::max);
    Ok(DimensionReport {
        kind,
        method: Method::SlopeFit,
        value,
        constant: Some(constant),
        extremal: Some(extremal),
        evidence: keep_extremal(evidence, upper),
        window: report_window,
        flags,
    })
}

/// Least-squares slope of `ln max_x N(x, R, r)` against `ln(R/r)` over a
/// dyadic grid of scales in the window (pairs with `R/r >= 4` and
/// `R < diam`), plus the raw supremum of `ln N / ln(R/r)`. Greedy covers are used; at most
/// `sample_budget` evenly spaced centers are visited.
pub fn set_assouad_estimate(space: &FiniteMetricSpace, window: &ScaleWindow, sample_budget: usize) -> Result<DimensionReport> {
    set_estimate(space, window, sample_budget, true)
}

/// Dual of [`set_assouad_estimate`] with minima over centers. The window is clamped to half the minimum interpoint distance.
pub fn set_lower_estimate(space: &FiniteMetricSpace, window: &ScaleWindow, sample_budget: usize) -> Result<DimensionReport> {
    set_estimate(space, window, sample_budget, false)
}

/// Extremal `ln(mu(Q) / mu(Q')) / (m ln(1/delta))` over all pairs `Q' < Q`
/// separated by `m >= m_min` levels.
pub fn measure_chain_estimate(tree: &CubeTree, mu: &MassAssignment, m_min: usize, kind: Extremum) -> Result<DimensionReport> {
    let depth = tree.depth();
    if m_min == 0 || depth < m_min {
        return Err(Error::TreeTooShallow { depth, needed: m_min.max(1) });
    }
    if mu.masses.len() != tree.len() {
        return Err(Error::SourceMismatch("mass assignment does not match the tree".into()));
    }
    let upper = kind == Extremum::Assouad;
    let log_inv_delta = -ln_rational(&tree.delta);
    let ln_mass: Vec<f64> = mu.masses.par_iter().map(ln_rational).collect();
    // Exponents within round-off of each other count as ties.
    let better = |a: f64, b: f64| {
        let slack = 1e-12 * a.abs().max(b.abs()).max(1.0);
        if upper {
            a > b + slack
        } else {
            a < b - slack
        }
    };
    let tied = |a: f64, b: f64| !better(a, b) && !better(b, a);
    // Best (exponent, top cube, bottom cube, m) found below each cube.
    let candidates: Vec<(f64, usize, usize, usize)> = tree
        .cubes
        .par_iter()
        .filter(|c| c.level >= m_min)
        .filter_map(|c| {
            let mut best: Option<(f64, usize, usize, usize)> = None;
            for (step, a) in tree.ancestors(c.id).enumerate() {
                let m = step + 1;
                if m < m_min {
                    continue;
                }
                let e = (ln_mass[a] - ln_mass[c.id]) / (m as f64 * log_inv_delta);
                if best.is_none_or(|b| better(e, b.0) || (tied(e, b.0) && m < b.3)) {
                    best = Some((e, a, c.id, m));
                }
            }
            best
        })
        .collect();
    let (_, top, bottom, m) = candidates
        .into_iter()
        .reduce(|a, b| if better(b.0, a.0) || (tied(a.0, b.0) && (b.3, b.1, b.2) < (a.3, a.1, a.2)) { b } else { a })
        .expect("depth >= m_min leaves a pair");
    let ratio = mu.mass(top) / mu.mass(bottom);
    let log_ratio = ln_rational(&ratio);
    let log_scale = m as f64 * log_inv_delta;
    let mut cubes: Vec<usize> = std::iter::once(bottom).chain(tree.ancestors(bottom).take(m - 1)).collect();
    cubes.push(top);
    cubes.reverse();
    Ok(DimensionReport {
        kind: if upper { DimensionKind::MeasureAssouad } else { DimensionKind::MeasureLower },
        method: if upper { Method::ChainSup } else { Method::ChainInf },
        value: (log_ratio / log_scale).max(0.0),
        constant: None,
        extremal: Some(log_ratio / log_scale),
        evidence: vec![Evidence { descriptor: Descriptor::Chain { cubes }, scale_gap: Some(m), log_scale, log_ratio }],
        window: ReportWindow::Depth { m_min, depth },
        flags: Vec::new(),
    })
}

/// Exact dimension `ln(base) / (cycle_len ln(1/delta))` of a symbolic spec.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactDimension {
    #[serde(with = "rational_serde")]
    pub base: Rational,
    pub cycle_len: usize,
    #[serde(with = "rational_serde")]
    pub delta: Rational,
}

impl ExactDimension {
    pub fn value(&self) -> f64 {
        if self.base.is_one() {
            return 0.0;
        }
        ln_rational(&self.base) / (self.cycle_len as f64 * -ln_rational(&self.delta))
    }
}

/// Validates `p` and `eta` against a spec.
pub fn check_spec_params(spec: &TreeSpec, p: &Rational, eta: &[Rational]) -> Result<()> {
    spec.validate()?;
    let wrap = |e: Error| Error::InvalidParams(e.to_string());
    check_p(p, spec.max_branching()).map_err(wrap)?;
    check_eta(eta).map_err(wrap)?;
    if eta.len() != spec.central_slots {
        return Err(Error::InvalidParams(format!("eta has {} entries, spec has {} central slots", eta.len(), spec.central_slots)));
    }
    Ok(())
}

/// Type graph of a spec with multiplicative weights: the inverse step
/// fraction for measure kinds, the source type's child count for set kinds.
pub fn type_graph(spec: &TreeSpec, p: &Rational, eta: &[Rational], measure: bool) -> Vec<(usize, usize, LogRational)> {
    let mut edges = Vec::new();
    for (t, node) in spec.types.iter().enumerate() {
        let m_t = node.branching();
        for child in &node.children {
            let w = if measure { step_fraction(child.kind, m_t, p, eta).recip() } else { int(m_t as i64) };
            edges.push((t, child.child_type, LogRational(w)));
        }
    }
    edges
}

/// Exact Assouad or lower dimension of the measure `mu_{p,eta}` (or of the
/// set) on the infinite tree described by `spec`: the maximum (or minimum)
/// mean cycle of the type graph divided by `ln(1/delta)`, with cycle means
/// compared through exact rational powers.
pub fn exact_dimension_spec(spec: &TreeSpec, p: &Rational, eta: &[Rational], kind: DimensionKind) -> Result<ExactDimension> {
    if kind.is_measure() {
        check_spec_params(spec, p, eta)?;
    } else {
        spec.validate()?;
    }
    let edges = type_graph(spec, p, eta, kind.is_measure());
    let n = spec.types.len();
    let cycle: MeanCycle<LogRational> = if kind.is_upper() { max_mean_cycle(n, &edges) } else { min_mean_cycle(n, &edges) }
        .ok_or_else(|| Error::InvalidParams("spec type graph has no cycle".into()))?;
    Ok(ExactDimension { base: cycle.total.0, cycle_len: cycle.len, delta: spec.delta.clone() })
}

/// Largest fraction of boundary steps over cycles of the type graph.
pub fn max_cycle_boundary_fraction(spec: &TreeSpec) -> Result<Rational> {
    spec.validate()?;
    let edges: Vec<(usize, usize, Count)> = spec
        .types
        .iter()
        .enumerate()
        .flat_map(|(t, node)| node.children.iter().map(move |c| (t, c.child_type, Count(c.kind.is_boundary() as i64))))
        .collect();
    let cycle = max_mean_cycle(spec.types.len(), &edges).ok_or_else(|| Error::InvalidParams("spec type graph has no cycle".into()))?;
    Ok(Rational::new(cycle.total.0.into(), (cycle.len as i64).into()))
}

fn ball_setup(space: &FiniteMetricSpace, tree: &CubeTree, mu: &MassAssignment) -> Result<()> {
    if tree.source != TreeSource::Metric {
        return Err(Error::SourceMismatch("ball masses need a metric tree".into()));
    }
    if mu.masses.len() != tree.len() {
        return Err(Error::SourceMismatch("mass assignment does not match the tree".into()));
    }
    if tree.cubes.iter().flat_map(|c| &c.members).any(|&m| m >= space.len()) {
        return Err(Error::SourceMismatch("tree refers to points outside the space".into()));
    }
    Ok(())
}

/// Extremal `ln(mu(B(x,R)) / mu(B(x,r))) / ln(R/r)` over a geometric scale grid
/// of ratio `delta` in the window and up to `sample_budget` centers.
pub fn measure_ball_estimate(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    mu: &MassAssignment,
    window: &ScaleWindow,
    sample_budget: usize,
    kind: Extremum,
) -> Result<DimensionReport> {
    ball_setup(space, tree, mu)?;
    let upper = kind == Extremum::Assouad;
    let mut flags = Vec::new();
    let grid = window.geometric_grid(tree.delta_f64());
    let diam = space.diameter();
    let pairs: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .filter(|(_, &big_r)| upper || big_r < diam * (1.0 - 1e-9))
        .flat_map(|(i, &big_r)| grid[i + 1..].iter().map(move |&r| (big_r, r)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::WindowInvalid("no admissible scale pairs in the window".into()));
    }
    let centers = sample_centers(space.len(), sample_budget);
    if centers.len() < space.len() {
        flags.push(format!("centers_sampled:{}", centers.len()));
    }
    let evidence: Vec<Evidence> = centers
        .par_iter()
        .flat_map_iter(|&x| {
            let profile = BallProfile::new(space, tree, mu, x);
            pairs
                .iter()
                .map(|&(big_r, r)| {
                    let q = profile.mass(big_r) / profile.mass(r);
                    Evidence {
                        descriptor: Descriptor::Triple { x: space.id(x).to_string(), big_r, r },
                        scale_gap: None,
                        log_scale: (big_r / r).ln(),
                        log_ratio: ln_rational(&q),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let pick = |a: f64, b: f64| if upper { a.max(b) } else { a.min(b) };
    let value = evidence.iter().map(Evidence::exponent).reduce(pick).expect("pairs and centers are non-empty");
    let constant = evidence
        .iter()
        .map(|e| {
            let c = (e.log_ratio - value * e.log_scale).exp();
            if upper {
                c
            } else {
                1.0 / c
            }
        })
        .fold(0.0, f64::max);
    Ok(DimensionReport {
        kind: if upper { DimensionKind::MeasureAssouad } else { DimensionKind::MeasureLower },
        method: Method::BallRatio,
        value: value.max(0.0),
        constant: Some(constant),
        extremal: Some(value),
        evidence: keep_extremal(evidence, upper),
        window: ReportWindow::Scales { r_min: window.r_min, r_max: window.r_max },
        flags,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub value: f64,
    /// False when some covering number fell back to a greedy cover.
    pub exact: bool,
    pub scales: Vec<f64>,
}

/// `sup N(x, 2r, r)` (set form) or `sup mu(B(x,2r)) / mu(B(x,r))` (measure
/// form) over all points and a dyadic grid of `r` spanning the window, which
/// defaults to `[min distance / 2, diameter]`.
pub fn doubling_constant(
    space: &FiniteMetricSpace,
    measure: Option<(&CubeTree, &MassAssignment)>,
    window: Option<ScaleWindow>,
) -> Result<DoublingReport> {
    let window = match window {
        Some(w) => w,
        None => match space.min_positive_distance() {
            None => return Ok(DoublingReport { value: 1.0, exact: true, scales: Vec::new() }),
            Some(min) => ScaleWindow::new(min / 2.0, space.diameter())?,
        },
    };
    let scales = window.geometric_grid(0.5);
    match measure {
        None => {
            let mut exact = true;
            let mut value = 1usize;
            for x in 0..space.len() {
                for &r in &scales {
                    let n = match covering_number(space, x, 2.0 * r, r, CoverMode::Exact) {
                        Ok(n) => n,
                        Err(Error::InstanceTooLarge { .. }) => {
                            exact = false;
                            covering_number(space, x, 2.0 * r, r, CoverMode::Greedy)?
                        }
                        Err(e) => return Err(e),
                    };
                    value = value.max(n);
                }
            }
            Ok(DoublingReport { value: value as f64, exact, scales })
        }
        Some((tree, mu)) => {
            ball_setup(space, tree, mu)?;
            let mut best = Rational::one();
            for x in 0..space.len() {
                let profile = BallProfile::new(space, tree, mu, x);
                for &r in &scales {
                    let q = profile.mass(2.0 * r) / profile.mass(r);
                    if q > best {
                        best = q;
                    }
                }
            }
            debug_assert!(best.is_positive());
            Ok(DoublingReport { value: to_f64(&best), exact: true, scales })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubes::{offspring_chains, unfold_spec};
    use crate::generators::{boundary_rich_spec, cantor_points, grid_points, triadic_grid, triadic_spec, uniform_spec};
    use crate::measures::{build_mu_p, ball_mass};
    use crate::metric::Norm;
    use crate::rational::ratio;
    use proptest::prelude::*;

    const LOG3: f64 = 1.0986122886681098;

    fn exact(spec: &TreeSpec, p: Rational, kind: DimensionKind) -> f64 {
        exact_dimension_spec(spec, &p, &[int(1)], kind).unwrap().value()
    }

    #[test]
    fn exact_examples() {
        let t = triadic_spec();
        assert!((exact(&t, ratio(1, 9), DimensionKind::MeasureAssouad) - 2.0).abs() < 1e-12);
        for p in [ratio(1, 3), ratio(1, 4), ratio(1, 100)] {
            assert!((exact(&t, p.clone(), DimensionKind::SetAssouad) - 1.0).abs() < 1e-12);
            assert!((exact(&t, p, DimensionKind::SetLower) - 1.0).abs() < 1e-12);
        }
        assert!((exact(&t, ratio(1, 4), DimensionKind::MeasureLower) - 2f64.ln() / LOG3).abs() < 1e-12);
        let u2 = uniform_spec(2, &ratio(1, 4), 1).unwrap();
        assert!((exact(&u2, ratio(1, 8), DimensionKind::MeasureAssouad) - 1.5).abs() < 1e-12);
        let chain = uniform_spec(1, &ratio(1, 8), 1).unwrap();
        assert_eq!(exact(&chain, ratio(1, 2), DimensionKind::MeasureAssouad), 0.0);
        assert!(matches!(
            exact_dimension_spec(&t, &ratio(1, 2), &[int(1)], DimensionKind::MeasureAssouad),
            Err(Error::InvalidParams(_))
        ));
    }

    /// Extremal whole-chain exponents of `mu_{p,eta}` by enumerating every
    /// depth-`depth` path of the tree spec from its root.
    fn enumerate_whole_chains(spec: &TreeSpec, p: &Rational, eta: &[Rational], depth: usize) -> (f64, f64) {
        fn walk(spec: &TreeSpec, logs: &[Vec<f64>], t: usize, left: usize, sum: f64, out: &mut (f64, f64)) {
            if left == 0 {
                out.0 = out.0.min(sum);
                out.1 = out.1.max(sum);
                return;
            }
            for (i, c) in spec.types[t].children.iter().enumerate() {
                walk(spec, logs, c.child_type, left - 1, sum + logs[t][i], out);
            }
        }
        let logs: Vec<Vec<f64>> = spec
            .types
            .iter()
            .map(|n| n.children.iter().map(|c| -ln_rational(&step_fraction(c.kind, n.branching(), p, eta))).collect())
            .collect();
        let mut out = (f64::INFINITY, f64::NEG_INFINITY);
        walk(spec, &logs, spec.root, depth, 0.0, &mut out);
        let scale = depth as f64 * -ln_rational(&spec.delta);
        (out.0 / scale, out.1 / scale)
    }

    #[test]
    fn lower_agrees_with_deep_chain_infimum() {
        let (lo, _) = enumerate_whole_chains(&triadic_spec(), &ratio(1, 4), &[int(1)], 14);
        assert!((lo - 2f64.ln() / LOG3).abs() < 1e-9);
        assert!((exact(&triadic_spec(), ratio(1, 4), DimensionKind::MeasureLower) - lo).abs() < 1e-9);
    }

    #[test]
    fn whole_chains_on_unfolding_match_enumeration() {
        let spec = boundary_rich_spec(1, 2, 2, &ratio(1, 8)).unwrap();
        let tree = unfold_spec(&spec, 12).unwrap();
        for p in [ratio(1, 3), ratio(1, 50)] {
            let mu = build_mu_p(&tree, &p).unwrap();
            let (lo, hi) = enumerate_whole_chains(&spec, &p, &[int(1)], 12);
            assert!((measure_chain_estimate(&tree, &mu, 12, Extremum::Assouad).unwrap().value - hi).abs() < 1e-12);
            assert!((measure_chain_estimate(&tree, &mu, 12, Extremum::Lower).unwrap().value - lo).abs() < 1e-12);
            assert!((exact(&spec, p.clone(), DimensionKind::MeasureAssouad) - hi).abs() < 1e-9);
        }
    }

    #[test]
    fn chain_estimate_examples() {
        let tree = unfold_spec(&triadic_spec(), 10).unwrap();
        let mu = build_mu_p(&tree, &ratio(1, 9)).unwrap();
        let r = measure_chain_estimate(&tree, &mu, 1, Extremum::Assouad).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(r.method, Method::ChainSup);
        let Descriptor::Chain { cubes } = &r.evidence[0].descriptor else { panic!() };
        let reproduced = ln_rational(&(mu.mass(cubes[0]) / mu.mass(*cubes.last().unwrap())));
        assert_eq!(reproduced, r.evidence[0].log_ratio);
        let uniform = build_mu_p(&tree, &ratio(1, 3)).unwrap();
        for kind in [Extremum::Assouad, Extremum::Lower] {
            assert!((measure_chain_estimate(&tree, &uniform, 1, kind).unwrap().value - 1.0).abs() < 1e-12);
        }
        let chain = unfold_spec(&uniform_spec(1, &ratio(1, 8), 1).unwrap(), 5).unwrap();
        let mu = build_mu_p(&chain, &ratio(1, 3)).unwrap();
        assert_eq!(measure_chain_estimate(&chain, &mu, 1, Extremum::Assouad).unwrap().value, 0.0);
        assert!(matches!(measure_chain_estimate(&chain, &mu, 6, Extremum::Assouad), Err(Error::TreeTooShallow { .. })));
    }

    #[test]
    fn chain_estimate_matches_brute_force_enumeration() {
        let spec = boundary_rich_spec(1, 2, 3, &ratio(1, 8)).unwrap();
        let tree = unfold_spec(&spec, 6).unwrap();
        let mu = build_mu_p(&tree, &ratio(1, 5)).unwrap();
        let ln8 = 8f64.ln();
        let mut hi = f64::MIN;
        let mut lo = f64::MAX;
        for q in 0..tree.len() {
            let level = tree.cube(q).level;
            for m in 2..=tree.depth() - level {
                for chain in offspring_chains(&tree, q, m).unwrap() {
                    let e = ln_rational(&(mu.mass(q) / mu.mass(*chain.cubes.last().unwrap()))) / (m as f64 * ln8);
                    hi = hi.max(e);
                    lo = lo.min(e);
                }
            }
        }
        assert!((measure_chain_estimate(&tree, &mu, 2, Extremum::Assouad).unwrap().value - hi).abs() < 1e-12);
        assert!((measure_chain_estimate(&tree, &mu, 2, Extremum::Lower).unwrap().value - lo).abs() < 1e-12);
    }

    #[test]
    fn boundary_fractions() {
        assert_eq!(max_cycle_boundary_fraction(&triadic_spec()).unwrap(), int(1));
        assert_eq!(max_cycle_boundary_fraction(&uniform_spec(1, &ratio(1, 8), 1).unwrap()).unwrap(), int(0));
        assert_eq!(max_cycle_boundary_fraction(&boundary_rich_spec(1, 2, 2, &ratio(1, 8)).unwrap()).unwrap(), ratio(1, 2));
    }

    #[test]
    fn set_estimates_on_singletons_and_pairs() {
        let one = FiniteMetricSpace::from_coordinates(vec!["a".into()], vec![vec![0.0]], Norm::Euclidean).unwrap();
        let w = ScaleWindow::new(0.01, 1.0).unwrap();
        assert_eq!(set_assouad_estimate(&one, &w, 10).unwrap().value, 0.0);
        assert_eq!(set_lower_estimate(&one, &w, 10).unwrap().value, 0.0);
        let two = FiniteMetricSpace::from_coordinates(vec!["a".into(), "b".into()], vec![vec![0.0], vec![1.0]], Norm::Euclidean).unwrap();
        let r = set_lower_estimate(&two, &w, 10).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.flags.iter().any(|f| f == "degenerate_window"));
    }

    #[test]
    fn set_estimates_on_the_line() {
        let line = grid_points(1, 1024, Norm::Euclidean).unwrap();
        let w = ScaleWindow::new(1.0 / 512.0, 1.0).unwrap();
        let a = set_assouad_estimate(&line, &w, 64).unwrap();
        assert!((0.9..=1.1).contains(&a.value), "{}", a.value);
        let l = set_lower_estimate(&line, &w, 64).unwrap();
        assert!((0.9..=1.1).contains(&l.value), "{}", l.value);
        assert!(l.value <= a.value + 1e-12);
        let Descriptor::Triple { x, big_r, r } = &a.evidence[0].descriptor else { panic!() };
        let n = covering_number(&line, line.index_of(x).unwrap(), *big_r, *r, CoverMode::Greedy).unwrap();
        assert_eq!((n as f64).ln(), a.evidence[0].log_ratio);
    }

    #[test]
    fn set_estimates_on_cantor() {
        let c = cantor_points(8).unwrap();
        let w = ScaleWindow::new(3f64.powi(-8), 1.0).unwrap();
        let target = 2f64.ln() / LOG3;
        let a = set_assouad_estimate(&c, &w, 256).unwrap();
        assert!((a.value - target).abs() < 0.1, "{}", a.value);
        let l = set_lower_estimate(&c, &w, 256).unwrap();
        assert!((l.value - target).abs() < 0.1, "{}", l.value);
    }

    #[test]
    fn ball_estimate_uniform_line() {
        // 729 equispaced points carrying equal masses.
        let (space, tri) = triadic_grid(6).unwrap();
        let mu = build_mu_p(&tri, &ratio(1, 3)).unwrap();
        let w = ScaleWindow::new(1.0 / 243.0, 1.0 / 3.0).unwrap();
        let r = measure_ball_estimate(&space, &tri, &mu, &w, 729, Extremum::Assouad).unwrap();
        assert!((r.value - 1.0).abs() < 0.15, "{}", r.value);
        assert!(matches!(ScaleWindow::new(0.1, 0.1), Err(Error::WindowInvalid(_))));
    }

    #[test]
    fn ball_estimate_small_triadic_grid() {
        // Frozen brute-force value for the 27-point grid, window [1/27, 1/3].
        let (space, tree) = triadic_grid(3).unwrap();
        let mu = build_mu_p(&tree, &ratio(1, 9)).unwrap();
        let w = ScaleWindow::new(1.0 / 27.0, 1.0 / 3.0).unwrap();
        let r = measure_ball_estimate(&space, &tree, &mu, &w, 27, Extremum::Assouad).unwrap();
        let mut brute = f64::MIN;
        for x in 0..27 {
            for (big_r, r) in [(1.0 / 3.0, 1.0 / 9.0), (1.0 / 3.0, 1.0 / 27.0), (1.0 / 9.0, 1.0 / 27.0)] {
                let direct = |t: f64| -> Rational {
                    tree.leaves()
                        .filter(|l| l.members.iter().any(|&m| space.distance(x, m) <= t * (1.0 + 1e-12)))
                        .map(|l| mu.mass(l.id))
                        .sum()
                };
                let q = direct(big_r) / direct(r);
                brute = brute.max(ln_rational(&q) / (big_r / r).ln());
            }
        }
        assert!((r.value - brute).abs() < 1e-12);
        assert!((r.value - 2.365_316_677_288_276).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn doubling_examples() {
        let one = FiniteMetricSpace::from_coordinates(vec!["a".into()], vec![vec![0.0]], Norm::Euclidean).unwrap();
        assert_eq!(doubling_constant(&one, None, None).unwrap().value, 1.0);
        let nine = grid_points(1, 9, Norm::Euclidean).unwrap();
        let d = doubling_constant(&nine, None, None).unwrap();
        assert!(d.exact);
        let mut brute = 1;
        for x in 0..9 {
            for &r in &d.scales {
                brute = brute.max(brute_cover(&nine, x, 2.0 * r, r));
            }
        }
        assert_eq!(d.value, brute as f64);
    }

    fn brute_cover(s: &FiniteMetricSpace, x: usize, big_r: f64, r: f64) -> usize {
        let ball = s.ball(x, big_r);
        for k in 1..=ball.len() {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                if ball.iter().all(|&y| idx.iter().any(|&c| s.within(s.distance(c, y), r))) {
                    return k;
                }
                let mut i = k;
                while i > 0 && idx[i - 1] == s.len() - k + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                idx[i - 1] += 1;
                for j in i..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        ball.len()
    }

    #[test]
    fn measure_doubling_matches_enumeration() {
        let (space, tree) = triadic_grid(2).unwrap();
        let mu = build_mu_p(&tree, &ratio(1, 4)).unwrap();
        let d = doubling_constant(&space, Some((&tree, &mu)), None).unwrap();
        let mut brute = Rational::one();
        for x in 0..9 {
            for &r in &d.scales {
                let q = ball_mass(&space, &tree, &mu, x, 2.0 * r) / ball_mass(&space, &tree, &mu, x, r);
                if q > brute {
                    brute = q;
                }
            }
        }
        assert_eq!(d.value, to_f64(&brute));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn duality_and_monotone_branch(m in 2usize..5, a in 1i64..200, b in 1i64..200) {
            let spec = uniform_spec(m, &ratio(1, 8), 1).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let p1 = ratio(lo, 200 * m as i64);
            let p2 = ratio(hi, 200 * m as i64);
            for p in [&p1, &p2] {
                let up = exact(&spec, p.clone(), DimensionKind::MeasureAssouad);
                let low = exact(&spec, p.clone(), DimensionKind::MeasureLower);
                prop_assert!(low <= up + 1e-12);
            }
            if lo < hi && hi as usize <= 200 / m {
                // Below the point where the central fraction takes over, the
                // value is -log_delta p and strictly decreasing.
                let v1 = exact(&spec, p1.clone(), DimensionKind::MeasureAssouad);
                let v2 = exact(&spec, p2.clone(), DimensionKind::MeasureAssouad);
                let expect1 = ln_rational(&p1.recip()) / 8f64.ln();
                prop_assert!((v1 - expect1).abs() < 1e-12);
                prop_assert!(v1 > v2);
            }
        }

        #[test]
        fn scaling_invariance(num in 1i64..30, scale in 1i64..50) {
            let tree = unfold_spec(&triadic_spec(), 5).unwrap();
            let mu = build_mu_p(&tree, &ratio(num, 90)).unwrap();
            let mut scaled = mu.clone();
            for m in &mut scaled.masses {
                *m *= ratio(scale, 7);
            }
            for kind in [Extremum::Assouad, Extremum::Lower] {
                let a = measure_chain_estimate(&tree, &mu, 1, kind).unwrap().value;
                let b = measure_chain_estimate(&tree, &scaled, 1, kind).unwrap().value;
                prop_assert_eq!(a, b);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn chain_ratios_bounded_by_p_power(num in 1i64..30) {
            let tree = unfold_spec(&triadic_spec(), 10).unwrap();
            let p = ratio(num, 90);
            let mu = build_mu_p(&tree, &p).unwrap();
            for c in tree.leaves() {
                for (step, a) in tree.ancestors(c.id).enumerate() {
                    let bound = crate::rational::pow(&p.recip(), step as u64 + 1);
                    prop_assert!(mu.mass(a) / mu.mass(c.id) <= bound);
                }
            }
        }
    }
}
