//! Quantitative checks on the `mu_p` family and the intermediate-value
//! solvers: continuity modulus, key ratio estimate, boundary-chain counts,
//! blow-up as `p -> 0`, and `p` (or `(p, eta)`) realizing a target dimension.

use std::io::Write;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubes::{max_branching, CubeTree};
use crate::dimension::{exact_dimension_spec, max_cycle_boundary_fraction, DimensionKind, ExactDimension};
use crate::error::{Error, Result};
use crate::generators::TreeSpec;
use crate::measures::build_mu_p;
use crate::rational::{from_f64, int, ln_rational, pow, rational_serde, rational_vec_serde, to_f64, Rational};

/// Geometric ratio of the solver's scan grid `p_i = (1/M) 0.9^i`.
pub const SCAN_RATIO: f64 = 0.9;
pub const SCAN_POINTS: usize = 400;
pub const MAX_BISECTIONS: usize = 200;
/// Floor for every weight on the solver's `eta` rays.
pub const ETA_FLOOR: f64 = 1e-9;
/// Largest chain length for [`binom_bound_check`].
pub const MAX_BINOM_DEPTH: usize = 64;

fn ordered(p: &Rational, p2: &Rational, m: usize) -> Result<(Rational, Rational)> {
    let (lo, hi) = if p <= p2 { (p.clone(), p2.clone()) } else { (p2.clone(), p.clone()) };
    let bound = Rational::one() / int(m.max(1) as i64);
    if !lo.is_positive() || hi > bound {
        return Err(Error::ParamsOutOfRange(format!("need 0 < p, p2 <= 1/{m}, got {p} and {p2}")));
    }
    Ok((lo, hi))
}

/// `delta^eps` for the continuity modulus, i.e. `min(p/p2, c2/c1)` with
/// `c = 1 - (M-1) p` and `p <= p2` after ordering.
pub fn continuity_factor(p: &Rational, p2: &Rational, m: usize) -> Result<Rational> {
    let (lo, hi) = ordered(p, p2, m)?;
    let central = |q: &Rational| Rational::one() - int(m as i64 - 1) * q;
    let a = &lo / &hi;
    let b = central(&hi) / central(&lo);
    Ok(if a < b { a } else { b })
}

/// `eps = max(log_delta p - log_delta p2, log_delta(1-(M-1)p2) - log_delta(1-(M-1)p))`
/// for `p <= p2`; the arguments are swapped when needed.
pub fn continuity_modulus(p: &Rational, p2: &Rational, m: usize, delta: &Rational) -> Result<f64> {
    let f = continuity_factor(p, p2, m)?;
    if f.is_one() {
        return Ok(0.0);
    }
    Ok(ln_rational(&f) / ln_rational(delta))
}

/// Chain with the least room in the key estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstChain {
    pub top: usize,
    pub bottom: usize,
    pub levels: usize,
    /// `ln` distance from the ratio to the nearer bound (negative on failure).
    pub log_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyEstimateReport {
    pub pass: bool,
    pub epsilon: f64,
    #[serde(with = "rational_serde")]
    pub factor: Rational,
    pub chains_checked: usize,
    pub failures: usize,
    pub worst: Option<WorstChain>,
}

/// Checks `delta^{eps N} <= [mu_p(Q')/mu_p(Q)] / [mu_p2(Q')/mu_p2(Q)] <= delta^{-eps N}`
/// for every pair `Q' < Q` separated by `N >= 1` levels, exactly.
pub fn check_key_estimate(tree: &CubeTree, p: &Rational, p2: &Rational) -> Result<KeyEstimateReport> {
    let m = max_branching(tree);
    let factor = continuity_factor(p, p2, m)?;
    let epsilon = if factor.is_one() { 0.0 } else { ln_rational(&factor) / ln_rational(&tree.delta) };
    let mu = build_mu_p(tree, p).map_err(|e| Error::ParamsOutOfRange(e.to_string()))?;
    let mu2 = build_mu_p(tree, p2).map_err(|e| Error::ParamsOutOfRange(e.to_string()))?;
    let rho: Vec<Rational> = mu.masses.par_iter().zip(&mu2.masses).map(|(a, b)| a / b).collect();
    let depth = tree.depth();
    let powers: Vec<Rational> = (0..=depth as u64).map(|n| pow(&factor, n)).collect();
    let ln_factor = if factor.is_one() { 0.0 } else { ln_rational(&factor) };
    let per_cube: Vec<(usize, usize, Option<WorstChain>)> = tree
        .cubes
        .par_iter()
        .map(|c| {
            let mut checked = 0;
            let mut failures = 0;
            let mut worst: Option<WorstChain> = None;
            for (step, a) in tree.ancestors(c.id).enumerate() {
                let n = step + 1;
                let r = &rho[c.id] / &rho[a];
                let low = &powers[n];
                let ok = low <= &r && &r * low <= Rational::one();
                checked += 1;
                if !ok {
                    failures += 1;
                }
                let ln_r = ln_rational(&r);
                let bound = -(n as f64) * ln_factor;
                let slack = (bound - ln_r).min(ln_r + bound);
                if worst.as_ref().is_none_or(|w| slack < w.log_slack) {
                    worst = Some(WorstChain { top: a, bottom: c.id, levels: n, log_slack: slack });
                }
            }
            (checked, failures, worst)
        })
        .collect();
    let mut chains_checked = 0;
    let mut failures = 0;
    let mut worst: Option<WorstChain> = None;
    for (c, f, w) in per_cube {
        chains_checked += c;
        failures += f;
        if let Some(w) = w {
            if worst.as_ref().is_none_or(|cur| w.log_slack < cur.log_slack) {
                worst = Some(w);
            }
        }
    }
    Ok(KeyEstimateReport { pass: failures == 0, epsilon, factor, chains_checked, failures, worst })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    #[serde(with = "rational_serde")]
    pub p: Rational,
    #[serde(with = "rational_serde")]
    pub p2: Rational,
    pub epsilon: f64,
    pub gap_assouad: f64,
    pub gap_lower: f64,
    pub pass_assouad: bool,
    pub pass_lower: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub pass: bool,
    pub rows: Vec<ContinuityRow>,
}

fn uniform_eta(j: usize) -> Vec<Rational> {
    vec![Rational::new(BigInt::one(), BigInt::from(j)); j]
}

/// `|d1 - d2| <= ln(1/f) / ln(1/delta)` in exact form: with `A = b1^{k2}`,
/// `B = b2^{k1}` and `E = (1/f)^{k1 k2}`, both `A <= B E` and `B <= A E`.
fn gap_within(d1: &ExactDimension, d2: &ExactDimension, factor: &Rational) -> bool {
    let (k1, k2) = (d1.cycle_len as u64, d2.cycle_len as u64);
    let a = pow(&d1.base, k2);
    let b = pow(&d2.base, k1);
    let e = pow(&factor.recip(), k1 * k2);
    a <= &b * &e && b <= &a * &e
}

/// For each pair, the exact Assouad and lower dimensions of `mu_p` and
/// `mu_p2` on the tree spec differ by at most the continuity modulus. Specs with
/// several central slots use the uniform weight vector.
pub fn dimension_continuity_check(spec: &TreeSpec, pairs: &[(Rational, Rational)]) -> Result<ContinuityReport> {
    let m = spec.max_branching();
    let eta = uniform_eta(spec.central_slots);
    let rows = pairs
        .par_iter()
        .map(|(p, p2)| -> Result<ContinuityRow> {
            let factor = continuity_factor(p, p2, m)?;
            let epsilon = continuity_modulus(p, p2, m, &spec.delta)?;
            let mut gaps = [0.0; 2];
            let mut passes = [false; 2];
            for (i, kind) in [DimensionKind::MeasureAssouad, DimensionKind::MeasureLower].into_iter().enumerate() {
                let d1 = exact_dimension_spec(spec, p, &eta, kind)?;
                let d2 = exact_dimension_spec(spec, p2, &eta, kind)?;
                gaps[i] = (d1.value() - d2.value()).abs();
                passes[i] = gap_within(&d1, &d2, &factor);
            }
            Ok(ContinuityRow {
                p: p.clone(),
                p2: p2.clone(),
                epsilon,
                gap_assouad: gaps[0],
                gap_lower: gaps[1],
                pass_assouad: passes[0],
                pass_lower: passes[1],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContinuityReport { pass: rows.iter().all(|r| r.pass_assouad && r.pass_lower), rows })
}

/// A root chain split into boundary and central steps (1-based step indices).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainProfile {
    pub chain: Vec<usize>,
    pub boundary_set: Vec<usize>,
    pub central_set: Vec<usize>,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Depth-`n` chain from the root with the most boundary steps; ties go to
/// the smaller child id. Returns the chain and `beta = boundary steps / n`.
pub fn boundary_chain_search(tree: &CubeTree, n: usize) -> Result<(ChainProfile, Rational)> {
    let root = tree.root()?;
    if n == 0 || n > tree.depth() {
        return Err(Error::DepthExceeded { cube: root, requested: n, available: tree.depth() });
    }
    // best[c]: most boundary steps on a path from c down to level n.
    let mut best = vec![0usize; tree.len()];
    let mut next = vec![usize::MAX; tree.len()];
    for k in (0..n).rev() {
        for &id in tree.level(k) {
            let mut choice: Option<(usize, usize)> = None;
            for &ch in &tree.cube(id).children {
                let score = best[ch] + tree.cube(ch).kind.is_some_and(|kd| kd.is_boundary()) as usize;
                if choice.is_none_or(|(s, c)| score > s || (score == s && ch < c)) {
                    choice = Some((score, ch));
                }
            }
            let (s, c) = choice.ok_or_else(|| Error::StructureError(format!("cube {id} above level {n} has no children")))?;
            best[id] = s;
            next[id] = c;
        }
    }
    let mut chain = vec![root];
    for _ in 0..n {
        chain.push(next[*chain.last().unwrap()]);
    }
    let (boundary_set, central_set): (Vec<usize>, Vec<usize>) =
        (1..=n).partition(|&i| tree.cube(chain[i]).kind.is_some_and(|kd| kd.is_boundary()));
    let beta = Rational::new(BigInt::from(boundary_set.len()), BigInt::from(n));
    Ok((ChainProfile { chain, boundary_set, central_set, n }, beta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BinomMode {
    /// Count only offspring with at most `floor(beta N)` boundary steps.
    #[default]
    Restrict,
    /// Require every offspring to satisfy the cap.
    Strict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomReport {
    pub pass: bool,
    /// Offspring counted (admissible ones in restrict mode).
    pub count: String,
    pub total: String,
    /// Binomial factor `C(N, floor(beta N))`.
    pub binomial: String,
    /// `C(N, floor(beta N)) M^{beta N}` as a float.
    pub bound: f64,
    pub max_boundary_steps: usize,
    pub cap: usize,
}

/// Counts depth-`n` offspring of the tree spec's root and checks
/// `count <= C(n, floor(beta n)) M^{beta n}` exactly.
pub fn binom_bound_check(spec: &TreeSpec, beta: &Rational, n: usize, mode: BinomMode) -> Result<BinomReport> {
    spec.validate()?;
    if beta.is_negative() || beta > &Rational::one() {
        return Err(Error::ParamsOutOfRange(format!("beta = {beta} outside [0, 1]")));
    }
    if n > MAX_BINOM_DEPTH {
        return Err(Error::TooLarge(format!("chain length {n} exceeds {MAX_BINOM_DEPTH}")));
    }
    let types = spec.types.len();
    // paths[t][b]: depth-k chains from the root ending at type t with b boundary steps.
    let mut paths = vec![vec![BigInt::zero(); n + 1]; types];
    paths[spec.root][0] = BigInt::one();
    for _ in 0..n {
        let mut next = vec![vec![BigInt::zero(); n + 1]; types];
        for (t, row) in paths.iter().enumerate() {
            for (b, count) in row.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                for child in &spec.types[t].children {
                    let nb = b + child.kind.is_boundary() as usize;
                    next[child.child_type][nb] += count;
                }
            }
        }
        paths = next;
    }
    let by_boundary: Vec<BigInt> = (0..=n).map(|b| paths.iter().map(|row| &row[b]).sum()).collect();
    let cap = (beta * int(n as i64)).floor().to_integer().to_usize().expect("cap fits");
    let max_boundary_steps = by_boundary.iter().rposition(|c| !c.is_zero()).unwrap_or(0);
    if mode == BinomMode::Strict && max_boundary_steps > cap {
        return Err(Error::NotApplicable(format!(
            "a depth-{n} chain has {max_boundary_steps} boundary steps, more than floor(beta N) = {cap}"
        )));
    }
    let total: BigInt = by_boundary.iter().sum();
    let count: BigInt = by_boundary[..=cap.min(n)].iter().sum();
    let m = BigInt::from(spec.max_branching());
    let choose = binomial(BigInt::from(n), BigInt::from(cap));
    // count <= C M^{a n / b}  iff  count^b <= C^b M^{a n}.
    let a = beta.numer().to_u32().expect("small numerator");
    let b = beta.denom().to_u32().expect("small denominator");
    let lhs = num_traits::pow(count.clone(), b as usize);
    let rhs = num_traits::pow(choose.clone(), b as usize) * num_traits::pow(m.clone(), a as usize * n);
    let bound = to_f64(&Rational::from_integer(choose.clone())) * (to_f64(&Rational::from_integer(m)).powf(to_f64(beta) * n as f64));
    Ok(BinomReport {
        pass: lhs <= rhs,
        count: count.to_string(),
        total: total.to_string(),
        binomial: choose.to_string(),
        bound,
        max_boundary_steps,
        cap,
    })
}

/// `kappa(beta) = H(beta) / ln(1/delta)` with the binary entropy `H` in nats.
pub fn kappa(beta: f64, delta: &Rational) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::ParamsOutOfRange(format!("beta = {beta} outside [0, 1]")));
    }
    let h = |x: f64| if x == 0.0 { 0.0 } else { -x * x.ln() };
    Ok((h(beta) + h(1.0 - beta)) / -ln_rational(delta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    #[serde(with = "rational_serde")]
    pub p: Rational,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub pass: bool,
    #[serde(with = "rational_serde")]
    pub beta_hat: Rational,
    /// Rows by decreasing `p`.
    pub rows: Vec<BlowupRow>,
    /// Values strictly increase as `p` decreases.
    pub increasing: bool,
}

/// Checks `dim_A mu_p >= beta_hat log_delta p` for each `p` (exactly) and
/// that the values strictly increase as `p` decreases.
pub fn blowup_check(spec: &TreeSpec, p_list: &[Rational]) -> Result<BlowupReport> {
    let beta_hat = max_cycle_boundary_fraction(spec)?;
    if beta_hat.is_zero() {
        return Err(Error::NotApplicable("no cycle of the tree spec contains a boundary step".into()));
    }
    let mut ps = p_list.to_vec();
    ps.sort_by(|a, b| b.cmp(a));
    ps.dedup();
    let eta = uniform_eta(spec.central_slots);
    let c = beta_hat.numer().to_u64().expect("small numerator");
    let l = beta_hat.denom().to_u64().expect("small denominator");
    let dims: Vec<ExactDimension> =
        ps.iter().map(|p| exact_dimension_spec(spec, p, &eta, DimensionKind::MeasureAssouad)).collect::<Result<_>>()?;
    let rows: Vec<BlowupRow> = ps
        .iter()
        .zip(&dims)
        .map(|(p, d)| {
            // ln(b)/k >= (c/l) ln(1/p)  iff  b^l >= (1/p)^{k c}.
            let k = d.cycle_len as u64;
            let pass = pow(&d.base, l) >= pow(&p.recip(), k * c);
            let bound = to_f64(&beta_hat) * ln_rational(&p.recip()) / -ln_rational(&spec.delta);
            BlowupRow { p: p.clone(), value: d.value(), bound, pass }
        })
        .collect();
    let increasing = dims.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        pow(&b.base, a.cycle_len as u64) > pow(&a.base, b.cycle_len as u64)
    });
    Ok(BlowupReport { pass: increasing && rows.iter().all(|r| r.pass), beta_hat, rows, increasing })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveKind {
    Assouad,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(with = "rational_serde")]
    pub p: Rational,
    #[serde(with = "rational_vec_serde")]
    pub eta: Vec<Rational>,
    pub achieved: f64,
    pub target: f64,
    pub tol: f64,
    pub iterations: usize,
}

/// Weight vector `(1 - lambda) uniform + lambda e_1`, every entry at least
/// [`ETA_FLOOR`], summing to 1 exactly.
fn eta_ray(j: usize, lambda: f64) -> Result<Vec<Rational>> {
    if j == 1 {
        return Ok(vec![Rational::one()]);
    }
    let floor = from_f64(ETA_FLOOR)?;
    let base = from_f64((1.0 - lambda) / j as f64)?;
    let rest = if base < floor { floor } else { base };
    let mut eta = vec![rest; j];
    let tail: Rational = eta[1..].iter().sum();
    eta[0] = Rational::one() - tail;
    Ok(eta)
}

fn scan_grid(m: usize) -> Result<Vec<Rational>> {
    let top = Rational::one() / int(m as i64);
    let mut grid = vec![top];
    let mut x = 1.0 / m as f64;
    for _ in 1..SCAN_POINTS {
        x *= SCAN_RATIO;
        grid.push(from_f64(x)?);
    }
    Ok(grid)
}

/// Finds `p` (and `eta` for the lower kind) with `|dim - s| < tol`.
///
/// The Assouad kind scans `p` over `(1/M) 0.9^i` to bracket `s` and then
/// bisects; `s` below the set's Assouad dimension is rejected. The lower kind
/// scans `p` along weight rays from the uniform vector towards `e_1`. When no
/// bracket exists the attainable range over the scan is reported.
pub fn ivp_solve(spec: &TreeSpec, s: f64, kind: SolveKind, tol: f64) -> Result<SolveResult> {
    spec.validate()?;
    if !(s.is_finite() && s > 0.0 && tol > 0.0) {
        return Err(Error::ParamsOutOfRange(format!("need s > 0 and tol > 0, got s = {s}, tol = {tol}")));
    }
    let dim_kind = match kind {
        SolveKind::Assouad => DimensionKind::MeasureAssouad,
        SolveKind::Lower => DimensionKind::MeasureLower,
    };
    if kind == SolveKind::Assouad {
        let set = exact_dimension_spec(spec, &Rational::one(), &[], DimensionKind::SetAssouad)?.value();
        if s < set - 1e-12 {
            return Err(Error::TargetBelowSetDimension { target: s, set_dimension: set });
        }
    }
    let j = spec.central_slots;
    let grid = scan_grid(spec.max_branching())?;
    let lambdas: Vec<f64> = if j == 1 || kind == SolveKind::Assouad {
        vec![0.0]
    } else {
        (0..10).map(|i| i as f64 / 10.0).chain([0.99, 0.999, 1.0]).collect()
    };
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    let mut iterations = 0;
    for lambda in lambdas {
        let eta = eta_ray(j, lambda)?;
        let f = |p: &Rational| exact_dimension_spec(spec, p, &eta, dim_kind).map(|d| d.value());
        let values: Vec<f64> = grid.par_iter().map(f).collect::<Result<_>>()?;
        iterations += values.len();
        for &v in &values {
            low = low.min(v);
            high = high.max(v);
        }
        if let Some(i) = values.iter().position(|v| (v - s).abs() < tol) {
            return Ok(SolveResult { p: grid[i].clone(), eta, achieved: values[i], target: s, tol, iterations });
        }
        let Some(i) = (0..values.len() - 1).find(|&i| (values[i] - s) * (values[i + 1] - s) < 0.0) else { continue };
        // Bisect between grid[i + 1] (smaller p) and grid[i].
        let (mut a, mut b) = (grid[i + 1].clone(), grid[i].clone());
        let sign_a = (values[i + 1] - s).signum();
        for _ in 0..MAX_BISECTIONS {
            let mid = (&a + &b) / int(2);
            let v = f(&mid)?;
            iterations += 1;
            if (v - s).abs() < tol / 4.0 {
                return Ok(SolveResult { p: mid, eta, achieved: v, target: s, tol, iterations });
            }
            if (v - s).signum() == sign_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mid = (&a + &b) / int(2);
        let v = f(&mid)?;
        if (v - s).abs() < tol {
            return Ok(SolveResult { p: mid, eta, achieved: v, target: s, tol, iterations: iterations + 1 });
        }
    }
    Err(Error::TargetNotBracketed { target: s, low, high })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(with = "rational_serde")]
    pub p: Rational,
    pub dim_assouad: f64,
    pub dim_lower: f64,
}

/// Exact Assouad and lower dimensions of `mu_{p,eta}` at each grid point.
pub fn sweep(spec: &TreeSpec, p_grid: &[Rational], eta: Option<&[Rational]>) -> Result<Vec<SweepRow>> {
    let eta = eta.map(<[Rational]>::to_vec).unwrap_or_else(|| uniform_eta(spec.central_slots));
    p_grid
        .par_iter()
        .map(|p| {
            Ok(SweepRow {
                p: p.clone(),
                dim_assouad: exact_dimension_spec(spec, p, &eta, DimensionKind::MeasureAssouad)?.value(),
                dim_lower: exact_dimension_spec(spec, p, &eta, DimensionKind::MeasureLower)?.value(),
            })
        })
        .collect()
}

/// Writes sweep rows as CSV with header `p_num,p_den,dim_assouad,dim_lower`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p_num", "p_den", "dim_assouad", "dim_lower"])?;
    for r in rows {
        w.write_record([r.p.numer().to_string(), r.p.denom().to_string(), r.dim_assouad.to_string(), r.dim_lower.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
