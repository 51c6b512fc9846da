//! Finite metric spaces: distance oracles, validation, greedy nets, covering
//! numbers and the `n_t` scale index.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{to_f64, Rational};

/// Relative tolerance used for distance comparisons on floating-point coordinates.
pub const COORDINATE_TOLERANCE: f64 = 1e-12;

/// Default cap on the ball size for exact covering numbers.
pub const EXACT_COVER_CAP: usize = 20;

/// Triangle inequality is checked on every triple up to this many points.
pub const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 500;

const SAMPLED_TRIPLES: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Chebyshev,
    Manhattan,
}

impl Norm {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Chebyshev => diffs.fold(0.0, f64::max),
            Norm::Manhattan => diffs.sum(),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Norm::Euclidean),
            "chebyshev" => Ok(Norm::Chebyshev),
            "manhattan" => Ok(Norm::Manhattan),
            other => Err(Error::Parse(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
enum DistanceSource {
    Matrix { data: Vec<f64> },
    Coordinates { dim: usize, coords: Vec<f64>, norm: Norm },
}

/// A finite point set with a distance oracle. Points are addressed by their
/// position in the id list; id order is the tie-break order everywhere.
#[derive(Clone, Debug)]
pub struct FiniteMetricSpace {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    source: DistanceSource,
    diameter: f64,
    tolerance: f64,
}

impl FiniteMetricSpace {
    pub fn from_coordinates(ids: Vec<String>, points: Vec<Vec<f64>>, norm: Norm) -> Result<Self> {
        if ids.len() != points.len() {
            return Err(Error::InvalidParams(format!("{} ids for {} points", ids.len(), points.len())));
        }
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidParams("points have differing dimensions".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("non-finite coordinate".into()));
        }
        let coords = points.into_iter().flatten().collect();
        Self::assemble(ids, DistanceSource::Coordinates { dim, coords, norm }, COORDINATE_TOLERANCE)
    }

    /// Dense distance matrix, row-major. The matrix is taken as given; call
    /// [`validate_metric`] to check the metric axioms.
    pub fn from_matrix(ids: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParams(format!("distance matrix must be {n}x{n}")));
        }
        let data = matrix.into_iter().flatten().collect();
        Self::assemble(ids, DistanceSource::Matrix { data }, 0.0)
    }

    fn assemble(ids: Vec<String>, source: DistanceSource, tolerance: f64) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidParams("empty point set".into()));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidParams(format!("duplicate point id {id:?}")));
            }
        }
        let mut space = FiniteMetricSpace { ids, index, source, diameter: 0.0, tolerance };
        let n = space.len();
        let mut diameter = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    diameter = diameter.max(space.distance(i, j));
                }
            }
        }
        space.diameter = diameter;
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match &self.source {
            DistanceSource::Matrix { data } => data[i * self.ids.len() + j],
            DistanceSource::Coordinates { dim, coords, norm } => {
                norm.distance(&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim])
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Relative tolerance for comparisons: zero for matrix input.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn norm(&self) -> Option<Norm> {
        match &self.source {
            DistanceSource::Coordinates { norm, .. } => Some(*norm),
            DistanceSource::Matrix { .. } => None,
        }
    }

    pub fn coordinates(&self, i: usize) -> Option<&[f64]> {
        match &self.source {
            DistanceSource::Coordinates { dim, coords, .. } => Some(&coords[i * dim..(i + 1) * dim]),
            DistanceSource::Matrix { .. } => None,
        }
    }

    /// `d <= r` up to the space's comparison tolerance.
    #[inline]
    pub fn within(&self, d: f64, r: f64) -> bool {
        d <= r + self.tolerance * d.abs().max(r.abs())
    }

    /// Indices of the closed ball `B(x, radius)`, in id order.
    pub fn ball(&self, x: usize, radius: f64) -> Vec<usize> {
        (0..self.len()).filter(|&y| self.within(self.distance(x, y), radius)).collect()
    }

    pub fn min_positive_distance(&self) -> Option<f64> {
        let n = self.len();
        let mut best: Option<f64> = None;
        for i in 0..n {
            for j in i + 1..n {
                let d = self.distance(i, j);
                if d > 0.0 && best.is_none_or(|b| d < b) {
                    best = Some(d);
                }
            }
        }
        best
    }

    /// Serializes as `id,x1,...,xd` (coordinates) or `id_row,id_col,dist` triplets.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match &self.source {
            DistanceSource::Coordinates { dim, .. } => {
                let mut header = vec!["id".to_string()];
                header.extend((1..=*dim).map(|k| format!("x{k}")));
                w.write_record(&header)?;
                for i in 0..self.len() {
                    let mut rec = vec![self.ids[i].clone()];
                    rec.extend(self.coordinates(i).unwrap().iter().map(|c| format!("{c:?}")));
                    w.write_record(&rec)?;
                }
            }
            DistanceSource::Matrix { .. } => {
                w.write_record(["id_row", "id_col", "dist"])?;
                for i in 0..self.len() {
                    for j in 0..self.len() {
                        w.write_record([&self.ids[i], &self.ids[j], &format!("{:?}", self.distance(i, j))])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8 csv")
    }

    /// Reads either CSV layout, detected from the header.
    pub fn read_csv<R: Read>(input: R, norm: Norm) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")))
        };
        if header == ["id_row", "id_col", "dist"] {
            let mut ids: Vec<String> = Vec::new();
            let mut pos: HashMap<String, usize> = HashMap::new();
            let mut entries = Vec::new();
            for rec in r.records() {
                let rec = rec?;
                let mut idx = |s: &str| {
                    let n = pos.len();
                    *pos.entry(s.to_string()).or_insert_with(|| {
                        ids.push(s.to_string());
                        n
                    })
                };
                let (a, b) = (idx(&rec[0]), idx(&rec[1]));
                entries.push((a, b, parse(&rec[2])?));
            }
            let n = ids.len();
            let mut matrix = vec![vec![f64::NAN; n]; n];
            for (i, row) in matrix.iter_mut().enumerate() {
                row[i] = 0.0;
            }
            for (a, b, d) in entries {
                matrix[a][b] = d;
            }
            // A single listed direction stands for both.
            for i in 0..n {
                for j in 0..n {
                    if matrix[i][j].is_nan() {
                        matrix[i][j] = matrix[j][i];
                    }
                    if matrix[i][j].is_nan() {
                        return Err(Error::Parse(format!("missing distance between {:?} and {:?}", ids[i], ids[j])));
                    }
                }
            }
            return Self::from_matrix(ids, matrix);
        }
        if header.first().map(String::as_str) != Some("id") || header.len() < 2 {
            return Err(Error::Parse(format!("unrecognized point CSV header {header:?}")));
        }
        let mut ids = Vec::new();
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            points.push(rec.iter().skip(1).map(parse).collect::<Result<Vec<f64>>>()?);
        }
        Self::from_coordinates(ids, points, norm)
    }
}

/// Finite scale range `0 < r_min < r_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub r_min: f64,
    pub r_max: f64,
}

impl ScaleWindow {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite() && r_min > 0.0 && r_min < r_max) {
            return Err(Error::WindowInvalid(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
        }
        Ok(ScaleWindow { r_min, r_max })
    }

    /// Geometric grid `r_max, r_max*ratio, ...` down to `r_min` (inclusive up
    /// to round-off).
    pub fn geometric_grid(&self, ratio: f64) -> Vec<f64> {
        assert!(ratio > 0.0 && ratio < 1.0);
        let mut out = Vec::new();
        let mut t = self.r_max;
        let floor = self.r_min * (1.0 - 1e-9);
        while t >= floor {
            out.push(t);
            t *= ratio;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub violations: Vec<Violation>,
}

/// Checks the metric axioms. Triangle inequality is exhaustive up to
/// [`EXHAUSTIVE_TRIANGLE_LIMIT`] points and sampled (fixed seed) above.
pub fn validate_metric(space: &FiniteMetricSpace) -> ValidationReport {
    let n = space.len();
    let mut violations = Vec::new();
    let ids = |v: &[usize]| v.iter().map(|&i| space.id(i).to_string()).collect::<Vec<_>>();
    for a in 0..n {
        let daa = space.distance(a, a);
        if daa != 0.0 {
            violations.push(Violation { kind: "nonzero_self_distance".into(), ids: ids(&[a]), values: vec![daa] });
        }
        for b in 0..n {
            if a == b {
                continue;
            }
            let dab = space.distance(a, b);
            if !dab.is_finite() || dab < 0.0 {
                violations.push(Violation { kind: "invalid_distance".into(), ids: ids(&[a, b]), values: vec![dab] });
            } else if dab == 0.0 && a < b {
                violations.push(Violation { kind: "zero_distance".into(), ids: ids(&[a, b]), values: vec![dab] });
            }
            let dba = space.distance(b, a);
            if a < b && dab != dba {
                violations.push(Violation { kind: "asymmetric".into(), ids: ids(&[a, b]), values: vec![dab, dba] });
            }
        }
    }
    let mut check = |a: usize, b: usize, c: usize| {
        let (dac, dab, dbc) = (space.distance(a, c), space.distance(a, b), space.distance(b, c));
        if !space.within(dac, dab + dbc) {
            violations.push(Violation { kind: "triangle".into(), ids: ids(&[a, b, c]), values: vec![dab, dbc, dac] });
        }
    };
    if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
        for a in 0..n {
            for c in 0..n {
                if a == c {
                    continue;
                }
                for b in 0..n {
                    if b != a && b != c {
                        check(a, b, c);
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..SAMPLED_TRIPLES {
            let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b && b != c && a != c {
                check(a, b, c);
            }
        }
    }
    ValidationReport { pass: violations.is_empty(), violations }
}

/// Greedy `radius`-net of `candidates`: seeds first, then every candidate (in
/// id order) farther than `radius` from everything accepted so far.
pub fn greedy_net(space: &FiniteMetricSpace, candidates: &[usize], radius: f64, seeds: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &s in seeds {
        if sorted.binary_search(&s).is_err() {
            return Err(Error::InvalidParams(format!("seed {:?} is not a candidate", space.id(s))));
        }
    }
    for (i, &a) in seeds.iter().enumerate() {
        for &b in &seeds[..i] {
            if space.within(space.distance(a, b), radius) {
                return Err(Error::SeedConflict(space.id(b).to_string(), space.id(a).to_string()));
            }
        }
    }
    let mut net = seeds.to_vec();
    for &c in &sorted {
        if net.iter().all(|&q| !space.within(space.distance(c, q), radius)) {
            net.push(c);
        }
    }
    Ok(net)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMode {
    Greedy,
    Exact,
}

/// `N(x, R, r)` with the default exact-mode cap.
pub fn covering_number(space: &FiniteMetricSpace, x: usize, big_r: f64, r: f64, mode: CoverMode) -> Result<usize> {
    covering_number_capped(space, x, big_r, r, mode, EXACT_COVER_CAP)
}

/// Number of closed `r`-balls centred at space points needed to cover `B(x, R)`.
///
/// Greedy mode counts a greedy `r`-net of the ball seeded with `x`: an upper
/// bound for the exact value, and at most the exact value at radius `r/2`.
pub fn covering_number_capped(
    space: &FiniteMetricSpace,
    x: usize,
    big_r: f64,
    r: f64,
    mode: CoverMode,
    cap: usize,
) -> Result<usize> {
    if !(r > 0.0 && big_r > 0.0) || r > big_r {
        return Err(Error::InvalidScales { r, big_r });
    }
    if r == big_r {
        return Ok(1);
    }
    let ball = space.ball(x, big_r);
    match mode {
        CoverMode::Greedy => Ok(greedy_net(space, &ball, r, &[x])?.len()),
        CoverMode::Exact => {
            if ball.len() > cap || ball.len() > 63 {
                return Err(Error::InstanceTooLarge { size: ball.len(), cap });
            }
            let masks: Vec<u64> = (0..space.len())
                .map(|z| {
                    ball.iter()
                        .enumerate()
                        .filter(|&(_, &y)| space.within(space.distance(z, y), r))
                        .fold(0u64, |m, (bit, _)| m | (1 << bit))
                })
                .collect();
            Ok(min_set_cover(&masks, ball.len()))
        }
    }
}

/// Minimum number of masks whose union is the full `universe`-bit set.
fn min_set_cover(masks: &[u64], universe: usize) -> usize {
    let full: u64 = if universe == 64 { u64::MAX } else { (1u64 << universe) - 1 };
    if full == 0 {
        return 0;
    }
    let mut sets: Vec<u64> = masks.iter().copied().filter(|&m| m != 0).collect();
    sets.sort_unstable_by(|a, b| b.count_ones().cmp(&a.count_ones()).then(a.cmp(b)));
    sets.dedup();
    // Drop dominated masks.
    let sets: Vec<u64> = sets
        .iter()
        .enumerate()
        .filter(|&(i, &m)| !sets.iter().enumerate().any(|(j, &o)| j != i && m & o == m && (m != o || j < i)))
        .map(|(_, &m)| m)
        .collect();

    fn search(sets: &[u64], covered: u64, full: u64, left: usize) -> bool {
        if covered == full {
            return true;
        }
        if left == 0 {
            return false;
        }
        let need = (!covered & full).trailing_zeros();
        sets.iter()
            .filter(|&&m| m >> need & 1 == 1)
            .any(|&m| search(sets, covered | m, full, left - 1))
    }

    (1..=universe).find(|&k| search(&sets, 0, full, k)).unwrap_or(universe)
}

/// Least integer `n` with `delta^n <= t`, compared with a relative tolerance
/// of [`COORDINATE_TOLERANCE`] so exact powers land on their own index.
pub fn scale_index(t: f64, delta: f64) -> i64 {
    assert!(t > 0.0 && delta > 0.0 && delta < 1.0, "scale_index needs t > 0 and 0 < delta < 1");
    let le = |a: f64, b: f64| a <= b * (1.0 + COORDINATE_TOLERANCE);
    let pow = |n: i64| delta.powf(n as f64);
    let mut n = (t.ln() / delta.ln()).ceil() as i64;
    while !le(pow(n), t) {
        n += 1;
    }
    while le(pow(n - 1), t) {
        n -= 1;
    }
    n
}

/// Exact version of [`scale_index`] for rational inputs.
pub fn scale_index_exact(t: &Rational, delta: &Rational) -> i64 {
    use num_traits::{One, Zero};
    assert!(t > &Rational::zero() && delta > &Rational::zero() && delta < &Rational::one());
    let guess = scale_index(to_f64(t).max(f64::MIN_POSITIVE), to_f64(delta));
    let pow = |n: i64| -> Rational {
        if n >= 0 {
            crate::rational::pow(delta, n as u64)
        } else {
            crate::rational::pow(&delta.recip(), n.unsigned_abs())
        }
    };
    let mut n = guess;
    while &pow(n) > t {
        n += 1;
    }
    while &pow(n - 1) <= t {
        n -= 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn line(xs: &[f64]) -> FiniteMetricSpace {
        let ids = (0..xs.len()).map(|i| i.to_string()).collect();
        FiniteMetricSpace::from_coordinates(ids, xs.iter().map(|&x| vec![x]).collect(), Norm::Euclidean).unwrap()
    }

    fn matrix(rows: &[&[f64]]) -> FiniteMetricSpace {
        let ids = ["a", "b", "c", "d"][..rows.len()].iter().map(|s| s.to_string()).collect();
        FiniteMetricSpace::from_matrix(ids, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn collinear_points_validate() {
        let report = validate_metric(&line(&[0.0, 1.0, 2.0]));
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn triangle_violation_has_witness() {
        let s = matrix(&[&[0.0, 1.0, 3.0], &[1.0, 0.0, 1.0], &[3.0, 1.0, 0.0]]);
        let report = validate_metric(&s);
        assert!(!report.pass);
        let v = report.violations.iter().find(|v| v.kind == "triangle").unwrap();
        assert_eq!(v.ids, ["a", "b", "c"]);
        assert_eq!(v.values, [1.0, 1.0, 3.0]);
    }

    #[test]
    fn asymmetry_has_witness() {
        let s = matrix(&[&[0.0, 1.0], &[2.0, 0.0]]);
        let report = validate_metric(&s);
        let v = report.violations.iter().find(|v| v.kind == "asymmetric").unwrap();
        assert_eq!(v.ids, ["a", "b"]);
        assert_eq!(v.values, [1.0, 2.0]);
    }

    #[test]
    fn greedy_net_examples() {
        let s = line(&[0.0, 1.0, 2.0, 3.0]);
        let all: Vec<usize> = (0..4).collect();
        assert_eq!(greedy_net(&s, &all, 3.0, &[0]).unwrap(), [0]);
        assert_eq!(greedy_net(&s, &all, 1.5, &[0]).unwrap(), [0, 2]);
        assert_eq!(greedy_net(&s, &all, 0.4, &[0]).unwrap(), [0, 1, 2, 3]);
        assert!(matches!(greedy_net(&s, &all, 1.5, &[0, 1]), Err(Error::SeedConflict(..))));
    }

    /// Brute force over every subset of candidate centres.
    fn cover_oracle(s: &FiniteMetricSpace, x: usize, big_r: f64, r: f64) -> usize {
        let ball = s.ball(x, big_r);
        let n = s.len();
        (1u32..1 << n)
            .filter(|&set| {
                ball.iter().all(|&y| (0..n).any(|z| set >> z & 1 == 1 && s.within(s.distance(z, y), r)))
            })
            .map(u32::count_ones)
            .min()
            .unwrap() as usize
    }

    #[test]
    fn exact_cover_on_integer_line() {
        let s = line(&(0..9).map(f64::from).collect::<Vec<_>>());
        assert_eq!(cover_oracle(&s, 4, 4.0, 1.0), 3);
        assert_eq!(covering_number(&s, 4, 4.0, 1.0, CoverMode::Exact).unwrap(), 3);
        for x in 0..9 {
            for (big_r, r) in [(2.0, 0.5), (3.0, 1.0), (8.0, 2.0), (5.0, 1.5)] {
                assert_eq!(covering_number(&s, x, big_r, r, CoverMode::Exact).unwrap(), cover_oracle(&s, x, big_r, r));
            }
        }
    }

    #[test]
    fn cover_edge_cases() {
        let s = line(&[0.0, 1.0, 2.0]);
        assert_eq!(covering_number(&s, 0, 1.0, 1.0, CoverMode::Greedy).unwrap(), 1);
        assert!(matches!(covering_number(&s, 0, 1.0, 2.0, CoverMode::Greedy), Err(Error::InvalidScales { .. })));
        let single = line(&[0.5]);
        assert_eq!(covering_number(&single, 0, 2.0, 0.1, CoverMode::Exact).unwrap(), 1);
        let big = line(&(0..30).map(f64::from).collect::<Vec<_>>());
        assert!(matches!(
            covering_number(&big, 0, 100.0, 1.0, CoverMode::Exact),
            Err(Error::InstanceTooLarge { size: 30, cap: 20 })
        ));
    }

    #[test]
    fn scale_index_examples() {
        assert_eq!(scale_index(1.0, 1.0 / 3.0), 0);
        assert_eq!(scale_index(1.0 / 9.0, 1.0 / 3.0), 2);
        assert_eq!(scale_index(0.1, 1.0 / 3.0), 3);
        assert_eq!(scale_index(5.0, 0.5), -2);
        assert_eq!(scale_index_exact(&ratio(1, 9), &ratio(1, 3)), 2);
        assert_eq!(scale_index_exact(&ratio(1, 10), &ratio(1, 3)), 3);
    }

    #[test]
    fn csv_round_trip() {
        let s = line(&[0.0, 0.25, 1.0]);
        let text = s.to_csv_string();
        let back = FiniteMetricSpace::read_csv(text.as_bytes(), Norm::Euclidean).unwrap();
        assert_eq!(back.to_csv_string(), text);
        let tri = "id_row,id_col,dist\na,b,1\nb,c,1\na,c,3\n";
        let m = FiniteMetricSpace::read_csv(tri.as_bytes(), Norm::Euclidean).unwrap();
        assert_eq!(m.distance(2, 0), 3.0);
        assert!(!validate_metric(&m).pass);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cloud() -> impl Strategy<Value = FiniteMetricSpace> {
            prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..12).prop_map(|pts| {
                let ids = (0..pts.len()).map(|i| format!("p{i:02}")).collect();
                FiniteMetricSpace::from_coordinates(ids, pts.into_iter().map(|(a, b)| vec![a, b]).collect(), Norm::Euclidean)
                    .unwrap()
            })
        }

        proptest! {
            #[test]
            fn nets_separate_and_cover(s in cloud(), radius in 0.01f64..1.5) {
                let all: Vec<usize> = (0..s.len()).collect();
                let net = greedy_net(&s, &all, radius, &[0]).unwrap();
                for (i, &a) in net.iter().enumerate() {
                    for &b in &net[..i] {
                        prop_assert!(!s.within(s.distance(a, b), radius));
                    }
                }
                for y in all {
                    prop_assert!(net.iter().any(|&q| s.within(s.distance(q, y), radius)));
                }
            }

            #[test]
            fn greedy_bounds_exact_and_monotone(s in cloud(), x in 0usize..12, big_r in 0.05f64..1.5, frac in 0.05f64..1.0) {
                let x = x % s.len();
                let r = big_r * frac;
                let exact = covering_number(&s, x, big_r, r, CoverMode::Exact).unwrap();
                let greedy = covering_number(&s, x, big_r, r, CoverMode::Greedy).unwrap();
                prop_assert!(greedy >= exact);
                let exact_half = covering_number(&s, x, big_r, r / 2.0, CoverMode::Exact).unwrap();
                prop_assert!(greedy <= exact_half);
                prop_assert!(exact_half >= exact);
                let exact_wide = covering_number(&s, x, big_r * 1.5, r, CoverMode::Exact).unwrap();
                prop_assert!(exact_wide >= exact);
            }

            #[test]
            fn scale_index_brackets(t in 1e-6f64..1e3, delta in 0.01f64..0.99) {
                let n = scale_index(t, delta);
                prop_assert!(delta.powf(n as f64) <= t * (1.0 + COORDINATE_TOLERANCE));
                prop_assert!(delta.powf((n - 1) as f64) > t);
            }
        }
    }
}
