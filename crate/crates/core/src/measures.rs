//! The measures `mu_p` and `mu_{p,eta}` on cube trees, with exact masses.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cubes::{max_branching, ChildKind, CubeTree, TreeSource};
use crate::error::{Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::rational::{int, rational_serde, rational_vec_serde, Rational, RationalRepr};

/// Exact mass of every cube of one tree, normalized so the root has mass 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassAssignment {
    /// Fingerprint of the tree the masses belong to.
    pub tree: String,
    #[serde(with = "rational_serde")]
    pub p: Rational,
    #[serde(with = "rational_vec_serde")]
    pub eta: Vec<Rational>,
    /// Indexed by cube id.
    #[serde(with = "mass_list")]
    pub masses: Vec<Rational>,
}

mod mass_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        cube: usize,
        #[serde(flatten)]
        value: RationalRepr,
    }

    pub fn serialize<S: Serializer>(m: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        m.iter().enumerate().map(|(cube, q)| Entry { cube, value: RationalRepr::new(q) }).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let mut entries = Vec::<Entry>::deserialize(d)?;
        entries.sort_by_key(|e| e.cube);
        if entries.iter().enumerate().any(|(i, e)| e.cube != i) {
            return Err(serde::de::Error::custom("mass entries must cover cubes 0..n exactly once"));
        }
        entries.iter().map(|e| e.value.value()).collect()
    }
}

impl MassAssignment {
    pub fn mass(&self, cube: usize) -> &Rational {
        &self.masses[cube]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("masses serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Errors unless the assignment was built on `tree`.
    pub fn check_tree(&self, tree: &CubeTree) -> Result<()> {
        if self.tree != tree.fingerprint() || self.masses.len() != tree.len() {
            return Err(Error::SourceMismatch("mass assignment belongs to a different tree".into()));
        }
        Ok(())
    }
}

/// Admissible `p` for branching `m`: `0 < p <= 1/m`.
pub fn check_p(p: &Rational, m: usize) -> Result<()> {
    let bound = Rational::one() / int(m.max(1) as i64);
    if !p.is_positive() || *p > bound {
        return Err(Error::POutOfRange { p: p.to_string(), bound: bound.to_string() });
    }
    Ok(())
}

pub fn check_eta(eta: &[Rational]) -> Result<()> {
    if eta.is_empty() {
        return Err(Error::EtaInvalid("empty weight vector".into()));
    }
    if let Some(bad) = eta.iter().find(|e| !e.is_positive()) {
        return Err(Error::EtaInvalid(format!("entry {bad} is not positive")));
    }
    let sum: Rational = eta.iter().sum();
    if !sum.is_one() {
        return Err(Error::EtaInvalid(format!("entries sum to {sum}, not 1")));
    }
    Ok(())
}

/// Mass fraction a child of the given kind receives from a parent with `m_q`
/// children and `eta.len()` central slots.
pub fn step_fraction(kind: ChildKind, m_q: usize, p: &Rational, eta: &[Rational]) -> Rational {
    match kind {
        ChildKind::Boundary => p.clone(),
        ChildKind::Central { slot } => {
            let central = Rational::one() - int((m_q - eta.len()) as i64) * p;
            &eta[slot as usize - 1] * central
        }
    }
}

/// `mu_p`: each boundary child receives `p` times its parent's mass, the
/// central child the remainder `(1 - (M_Q - 1) p)`.
pub fn build_mu_p(tree: &CubeTree, p: &Rational) -> Result<MassAssignment> {
    build_mu_p_eta(tree, p, &[Rational::one()])
}

/// `mu_{p,eta}`: boundary children receive `p` times the parent's mass and
/// central slot `j` receives `eta_j (1 - (M_Q - J) p)` times it.
pub fn build_mu_p_eta(tree: &CubeTree, p: &Rational, eta: &[Rational]) -> Result<MassAssignment> {
    check_p(p, max_branching(tree))?;
    check_eta(eta)?;
    let root = tree.root()?;
    let j = eta.len();
    // Masses repeat across the tree, so products are memoized on
    // (parent mass, step fraction) and equal values share one class.
    let mut values: Vec<Rational> = vec![Rational::one()];
    let mut class_of_value: HashMap<Rational, usize> = HashMap::from([(Rational::one(), 0)]);
    let mut fractions: HashMap<(ChildKind, usize), Rational> = HashMap::new();
    let mut products: HashMap<(usize, ChildKind, usize), usize> = HashMap::new();
    let mut class = vec![usize::MAX; tree.len()];
    class[root] = 0;
    for k in 0..tree.num_levels() {
        for &id in tree.level(k) {
            let cube = tree.cube(id);
            if cube.children.is_empty() {
                continue;
            }
            let mut slots: Vec<u32> = cube
                .children
                .iter()
                .filter_map(|&c| match tree.cube(c).kind {
                    Some(ChildKind::Central { slot }) => Some(slot),
                    _ => None,
                })
                .collect();
            slots.sort_unstable();
            if slots.len() != j || slots.iter().zip(1..).any(|(&s, want)| s != want) {
                return Err(Error::StructureError(format!(
                    "cube {id} has central slots {slots:?}, expected 1..={j}"
                )));
            }
            let m_q = cube.children.len();
            for &c in &cube.children {
                let kind = tree.cube(c).kind.expect("child has a kind");
                class[c] = *products.entry((class[id], kind, m_q)).or_insert_with(|| {
                    let fraction = fractions.entry((kind, m_q)).or_insert_with(|| step_fraction(kind, m_q, p, eta));
                    let value = &values[class[id]] * &*fraction;
                    *class_of_value.entry(value.clone()).or_insert_with(|| {
                        values.push(value);
                        values.len() - 1
                    })
                });
            }
        }
    }
    let masses = class.iter().map(|&c| values.get(c).cloned().unwrap_or_else(Rational::zero)).collect();
    Ok(MassAssignment { tree: tree.fingerprint(), p: p.clone(), eta: eta.to_vec(), masses })
}

/// Distance from `point` to the nearest point of the space outside `members`
/// (sorted); infinite when `members` is everything.
fn distance_to_complement(space: &FiniteMetricSpace, point: usize, members: &[usize]) -> f64 {
    (0..space.len())
        .filter(|y| members.binary_search(y).is_err())
        .map(|y| space.distance(point, y))
        .fold(f64::INFINITY, f64::min)
}

/// Picks the `j` children of `q` whose centers lie deepest inside `q` and
/// relabels them as central slots `1..=j` (the rest become boundary).
///
/// Each selected child must sit at distance at least `scale * delta^k / 6`
/// from the complement of `q`, `k` being the level of `q`.
pub fn select_central_subcubes(tree: &mut CubeTree, space: &FiniteMetricSpace, q: usize, j: usize) -> Result<Vec<usize>> {
    if tree.source != TreeSource::Metric {
        return Err(Error::SourceMismatch("central subcube selection needs a metric tree".into()));
    }
    let cube = tree.cubes.get(q).ok_or_else(|| Error::InvalidParams(format!("no cube {q}")))?;
    if cube.children.is_empty() {
        return Err(Error::InvalidParams(format!("cube {q} is a leaf")));
    }
    if j == 0 || j > cube.children.len() {
        return Err(Error::InvalidParams(format!("cube {q} has {} children, cannot select {j}", cube.children.len())));
    }
    let threshold = tree.level_radius(cube.level) / 6.0;
    let mut ranked: Vec<(f64, bool, usize)> = cube
        .children
        .iter()
        .map(|&c| {
            let center = tree.cubes[c].center;
            (distance_to_complement(space, center, &cube.members), center != cube.center, c)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let found = ranked.iter().filter(|r| r.0 >= threshold).count();
    if found < j {
        return Err(Error::NotEnoughInteriorChildren { cube: q, found, wanted: j, threshold });
    }
    let chosen: Vec<usize> = ranked[..j].iter().map(|r| r.2).collect();
    for &c in &tree.cubes[q].children.clone() {
        tree.cubes[c].kind = Some(match chosen.iter().position(|&x| x == c) {
            Some(i) => ChildKind::Central { slot: i as u32 + 1 },
            None => ChildKind::Boundary,
        });
    }
    Ok(chosen)
}

/// Runs [`select_central_subcubes`] on every non-leaf cube and records `j`
/// as the tree's slot count.
pub fn select_central_all(tree: &mut CubeTree, space: &FiniteMetricSpace, j: usize) -> Result<()> {
    let parents: Vec<usize> = tree.cubes.iter().filter(|c| !c.children.is_empty()).map(|c| c.id).collect();
    for q in parents {
        select_central_subcubes(tree, space, q, j)?;
    }
    tree.central_slots = j;
    Ok(())
}

/// Ball masses around one point for every radius: leaves sorted by their
/// nearest member's distance, with prefix sums of their masses.
pub struct BallProfile {
    space_tol: f64,
    distances: Vec<f64>,
    prefix: Vec<Rational>,
}

impl BallProfile {
    pub fn new(space: &FiniteMetricSpace, tree: &CubeTree, mu: &MassAssignment, x: usize) -> Self {
        let mut leaves: Vec<(f64, usize)> = tree
            .leaves()
            .map(|l| (l.members.iter().map(|&m| space.distance(x, m)).fold(f64::INFINITY, f64::min), l.id))
            .collect();
        leaves.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut prefix = Vec::with_capacity(leaves.len() + 1);
        prefix.push(Rational::zero());
        for &(_, id) in &leaves {
            let next = prefix.last().unwrap() + mu.mass(id);
            prefix.push(next);
        }
        BallProfile { space_tol: space.tolerance(), distances: leaves.into_iter().map(|l| l.0).collect(), prefix }
    }

    /// Total mass of leaves meeting the closed ball of radius `t`.
    pub fn mass(&self, t: f64) -> &Rational {
        let tol = self.space_tol;
        let count = self.distances.partition_point(|&d| d <= t + tol * d.abs().max(t.abs()));
        &self.prefix[count]
    }
}

/// Sum of the masses of the leaf cubes meeting the closed ball `B(x, t)`.
pub fn ball_mass(space: &FiniteMetricSpace, tree: &CubeTree, mu: &MassAssignment, x: usize, t: f64) -> Rational {
    BallProfile::new(space, tree, mu, x).mass(t).clone()
}

/// Mass of the level-`level` cube containing `x`.
pub fn containing_cube_mass<'a>(tree: &CubeTree, mu: &'a MassAssignment, x: usize, level: usize) -> Option<&'a Rational> {
    tree.containing_cube(x, level).map(|c| mu.mass(c))
}
