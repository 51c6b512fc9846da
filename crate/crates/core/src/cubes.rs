//! Generalized nested cube systems: construction on finite metric spaces by
//! nested greedy nets, unfolding of symbolic specs, validation of the five
//! structural properties, and offspring-chain iteration.
//!
//! Level `k` cubes have radius unit `scale * delta^k`, where `scale` is the
//! diameter of the space for constructed trees, so level 0 is a single cube.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generators::TreeSpec;
use crate::metric::{greedy_net, FiniteMetricSpace};
use crate::rational::{ratio, rational_serde, to_f64, Rational};

/// Maximum number of cubes produced by [`unfold_spec`].
pub const MAX_UNFOLDED_CUBES: u128 = 10_000_000;

/// Relation of a cube to its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChildKind {
    /// Shares the parent's center (slot 1) or is one of the distinguished
    /// interior children of a multi-slot tree.
    Central { slot: u32 },
    Boundary,
}

impl ChildKind {
    pub fn is_boundary(self) -> bool {
        self == ChildKind::Boundary
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeSource {
    Metric,
    Spec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "CubeRepr", into = "CubeRepr")]
pub struct Cube {
    pub id: usize,
    pub level: usize,
    /// Point index (metric trees) or virtual point id (spec trees).
    pub center: usize,
    pub parent: Option<usize>,
    pub kind: Option<ChildKind>,
    pub children: Vec<usize>,
    /// Point indices, sorted. Empty for spec trees.
    pub members: Vec<usize>,
    /// Node type for spec trees.
    pub spec_type: Option<usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct CubeRepr {
    id: usize,
    k: usize,
    center: usize,
    parent: Option<usize>,
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<u32>,
    children: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    members: Vec<usize>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    spec_type: Option<usize>,
}

impl From<CubeRepr> for Cube {
    fn from(r: CubeRepr) -> Self {
        let kind = match r.kind.as_deref() {
            Some("central") => Some(ChildKind::Central { slot: r.slot.unwrap_or(1) }),
            Some(_) => Some(ChildKind::Boundary),
            None => None,
        };
        Cube {
            id: r.id,
            level: r.k,
            center: r.center,
            parent: r.parent,
            kind,
            children: r.children,
            members: r.members,
            spec_type: r.spec_type,
        }
    }
}

impl From<Cube> for CubeRepr {
    fn from(c: Cube) -> Self {
        let (kind, slot) = match c.kind {
            Some(ChildKind::Central { slot }) => (Some("central".to_string()), Some(slot)),
            Some(ChildKind::Boundary) => (Some("boundary".to_string()), None),
            None => (None, None),
        };
        CubeRepr {
            id: c.id,
            k: c.level,
            center: c.center,
            parent: c.parent,
            kind,
            slot,
            children: c.children,
            members: c.members,
            spec_type: c.spec_type,
        }
    }
}

/// Explicit finite realization of the nested families of cubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TreeRepr", into = "TreeRepr")]
pub struct CubeTree {
    pub delta: Rational,
    pub source: TreeSource,
    /// Distinguished point present as a center at every level.
    pub origin: usize,
    pub unit_cube: usize,
    pub scale: f64,
    /// Number of central slots per non-leaf cube.
    pub central_slots: usize,
    pub cubes: Vec<Cube>,
    levels: Vec<Vec<usize>>,
}

#[derive(Clone, Serialize, Deserialize)]
struct TreeRepr {
    #[serde(with = "rational_serde")]
    delta: Rational,
    source: TreeSource,
    origin: usize,
    levels: usize,
    #[serde(default)]
    unit_cube: usize,
    #[serde(default = "unit_scale")]
    scale: f64,
    #[serde(default = "one_slot", rename = "J")]
    central_slots: usize,
    cubes: Vec<Cube>,
}

fn unit_scale() -> f64 {
    1.0
}

fn one_slot() -> usize {
    1
}

impl From<TreeRepr> for CubeTree {
    fn from(r: TreeRepr) -> Self {
        let mut levels = vec![Vec::new(); r.levels.max(1)];
        for c in &r.cubes {
            if c.level >= levels.len() {
                levels.resize(c.level + 1, Vec::new());
            }
            levels[c.level].push(c.id);
        }
        CubeTree {
            delta: r.delta,
            source: r.source,
            origin: r.origin,
            unit_cube: r.unit_cube,
            scale: r.scale,
            central_slots: r.central_slots,
            cubes: r.cubes,
            levels,
        }
    }
}

impl From<CubeTree> for TreeRepr {
    fn from(t: CubeTree) -> Self {
        TreeRepr {
            delta: t.delta,
            source: t.source,
            origin: t.origin,
            levels: t.levels.len(),
            unit_cube: t.unit_cube,
            scale: t.scale,
            central_slots: t.central_slots,
            cubes: t.cubes,
        }
    }
}

impl CubeTree {
    /// Deepest level index.
    pub fn depth(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &[usize] {
        &self.levels[k]
    }

    pub fn cube(&self, id: usize) -> &Cube {
        &self.cubes[id]
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Cube> {
        self.cubes.iter().filter(|c| c.children.is_empty())
    }

    pub fn delta_f64(&self) -> f64 {
        to_f64(&self.delta)
    }

    /// Radius unit `scale * delta^k` of level `k`.
    pub fn level_radius(&self, k: usize) -> f64 {
        self.scale * self.delta_f64().powi(k as i32)
    }

    /// Top cube; errors when level 0 holds several cubes.
    pub fn root(&self) -> Result<usize> {
        match self.levels.first().map(Vec::as_slice) {
            Some([root]) => Ok(*root),
            _ => Err(Error::StructureError("tree must have exactly one level-0 cube".into())),
        }
    }

    /// Ancestors of `id` from its parent upwards.
    pub fn ancestors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.cubes[id].parent, move |&a| self.cubes[a].parent)
    }

    /// Leaf cube holding each point (metric trees).
    pub fn point_leaves(&self, num_points: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; num_points];
        for leaf in self.leaves() {
            for &m in &leaf.members {
                if m < num_points {
                    out[m] = Some(leaf.id);
                }
            }
        }
        out
    }

    /// Cube at `level` that contains `point` (metric trees).
    pub fn containing_cube(&self, point: usize, level: usize) -> Option<usize> {
        let leaf = self.leaves().find(|l| l.members.binary_search(&point).is_ok())?.id;
        std::iter::once(leaf).chain(self.ancestors(leaf)).find(|&c| self.cubes[c].level == level)
    }

    /// Short digest identifying the tree's shape, used by mass assignments.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.delta.to_string().as_bytes());
        for c in &self.cubes {
            let kind = match c.kind {
                None => 0u32,
                Some(ChildKind::Boundary) => 1,
                Some(ChildKind::Central { slot }) => 1 + slot,
            };
            h.update((c.id as u64).to_le_bytes());
            h.update((c.parent.map_or(u64::MAX, |p| p as u64)).to_le_bytes());
            h.update(kind.to_le_bytes());
            h.update((c.center as u64).to_le_bytes());
        }
        h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Triadic intervals of `[0, 1]` over the `3^depth` interval midpoints
    /// (point `i` sits at `(2i + 1) / (2 * 3^depth)`), children in positional order.
    pub fn triadic_intervals(depth: usize) -> CubeTree {
        let n = 3usize.pow(depth as u32);
        let mut cubes = Vec::new();
        let mut levels = Vec::new();
        for k in 0..=depth {
            let width = 3usize.pow((depth - k) as u32);
            let first = cubes.len();
            let count = 3usize.pow(k as u32);
            levels.push((first..first + count).collect());
            for j in 0..count {
                let (parent, kind) = if k == 0 {
                    (None, None)
                } else {
                    let prev_first = first - count / 3;
                    let kind = if j % 3 == 1 { ChildKind::Central { slot: 1 } } else { ChildKind::Boundary };
                    (Some(prev_first + j / 3), Some(kind))
                };
                let children = if k < depth { (0..3).map(|c| first + count + 3 * j + c).collect() } else { vec![] };
                cubes.push(Cube {
                    id: first + j,
                    level: k,
                    center: j * width + (width - 1) / 2,
                    parent,
                    kind,
                    children,
                    members: (j * width..(j + 1) * width).collect(),
                    spec_type: None,
                });
            }
        }
        CubeTree {
            delta: ratio(1, 3),
            source: TreeSource::Metric,
            origin: (n - 1) / 2,
            unit_cube: 0,
            scale: 1.0,
            central_slots: 1,
            cubes,
            levels,
        }
    }
}

/// Smallest level count whose deepest radius unit falls below the minimum
/// positive interpoint distance, i.e. the deepest level is all singletons.
pub fn natural_levels(space: &FiniteMetricSpace, delta: &Rational) -> usize {
    let d = to_f64(delta);
    let scale = if space.diameter() > 0.0 { space.diameter() } else { 1.0 };
    match space.min_positive_distance() {
        None => 1,
        Some(min) => {
            let mut levels = 1;
            while scale * d.powi(levels as i32 - 1) >= min {
                levels += 1;
            }
            levels
        }
    }
}

/// Builds cube families on `space` from nested greedy nets.
///
/// Net `k` has radius `diam * delta^k` and is seeded with net `k - 1` (origin
/// first). Each level-`k+1` center attaches to its nearest level-`k` center and
/// each point to its nearest deepest-level center (ties by id). The result is
/// validated; a ball-sandwich failure is reported as [`Error::SandwichViolation`].
pub fn build_cube_tree(space: &FiniteMetricSpace, delta: &Rational, num_levels: usize, origin: usize) -> Result<CubeTree> {
    if *delta <= Rational::zero() || *delta >= ratio(1, 7) {
        return Err(Error::DeltaOutOfRange(format!("{delta} (cube construction needs 0 < delta < 1/7)")));
    }
    if num_levels == 0 {
        return Err(Error::InvalidParams("need at least one level".into()));
    }
    if origin >= space.len() {
        return Err(Error::InvalidParams(format!("origin index {origin} out of range")));
    }
    let scale = if space.diameter() > 0.0 { space.diameter() } else { 1.0 };
    let d = to_f64(delta);
    let all: Vec<usize> = (0..space.len()).collect();

    let mut nets: Vec<Vec<usize>> = Vec::with_capacity(num_levels);
    for k in 0..num_levels {
        let seeds = nets.last().cloned().unwrap_or_else(|| vec![origin]);
        nets.push(greedy_net(space, &all, scale * d.powi(k as i32), &seeds)?);
    }

    let nearest = |x: usize, centers: &[usize]| -> usize {
        let mut sorted = centers.to_vec();
        sorted.sort_unstable();
        let mut best = sorted[0];
        let mut best_d = space.distance(x, best);
        for &c in &sorted[1..] {
            let dc = space.distance(x, c);
            if dc < best_d {
                best = c;
                best_d = dc;
            }
        }
        best
    };

    // parent_center[k][c] for centers c of level k + 1.
    let n = space.len();
    let mut parent_of: Vec<Vec<usize>> = Vec::with_capacity(num_levels);
    for k in 0..num_levels - 1 {
        let mut map = vec![usize::MAX; n];
        for &c in &nets[k + 1] {
            map[c] = nearest(c, &nets[k]);
        }
        parent_of.push(map);
    }
    let mut leaf_center = vec![usize::MAX; n];
    for (x, slot) in leaf_center.iter_mut().enumerate() {
        *slot = nearest(x, &nets[num_levels - 1]);
    }

    // Lay cubes out level by level, children grouped under their parent:
    // central child first, then by center index.
    let mut cubes: Vec<Cube> = Vec::new();
    let mut levels: Vec<Vec<usize>> = Vec::with_capacity(num_levels);
    let mut cube_of_center: Vec<usize> = vec![usize::MAX; n];
    let mut top: Vec<usize> = nets[0].clone();
    top.sort_unstable_by_key(|&c| (c != origin, c));
    for c in top {
        cube_of_center[c] = cubes.len();
        cubes.push(Cube { id: cubes.len(), level: 0, center: c, parent: None, kind: None, children: vec![], members: vec![], spec_type: None });
    }
    levels.push((0..cubes.len()).collect());
    for k in 1..num_levels {
        let mut next_cube_of_center = vec![usize::MAX; n];
        let mut level_ids = Vec::new();
        for &pid in &levels[k - 1] {
            let pc = cubes[pid].center;
            let mut kids: Vec<usize> = nets[k].iter().copied().filter(|&c| parent_of[k - 1][c] == pc).collect();
            kids.sort_unstable_by_key(|&c| (c != pc, c));
            for c in kids {
                let id = cubes.len();
                let kind = if c == pc { ChildKind::Central { slot: 1 } } else { ChildKind::Boundary };
                cubes.push(Cube { id, level: k, center: c, parent: Some(pid), kind: Some(kind), children: vec![], members: vec![], spec_type: None });
                cubes[pid].children.push(id);
                next_cube_of_center[c] = id;
                level_ids.push(id);
            }
        }
        levels.push(level_ids);
        cube_of_center = next_cube_of_center;
    }
    for (x, &c) in leaf_center.iter().enumerate() {
        let mut id = cube_of_center[c];
        loop {
            cubes[id].members.push(x);
            match cubes[id].parent {
                Some(p) => id = p,
                None => break,
            }
        }
    }
    for c in &mut cubes {
        c.members.sort_unstable();
    }

    let tree = CubeTree {
        delta: delta.clone(),
        source: TreeSource::Metric,
        origin,
        unit_cube: 0,
        scale,
        central_slots: 1,
        cubes,
        levels,
    };
    let report = validate_tree(&tree, Some(space))?;
    if let Some(fail) = report.properties.iter().find(|p| p.status == CheckStatus::Fail) {
        if fail.property == Property::Sandwich {
            let cube = fail.witness_cube.unwrap_or(0);
            return Err(Error::SandwichViolation {
                cube,
                level: tree.cubes.get(cube).map_or(0, |c| c.level),
                detail: fail.witnesses.join("; "),
            });
        }
        return Err(Error::StructureError(format!("{:?} failed: {}", fail.property, fail.witnesses.join("; "))));
    }
    Ok(tree)
}

/// Explicit finite truncation of a symbolic spec to levels `0..=depth`.
///
/// Virtual centers: the root's center is its own id, a slot-1 central child
/// inherits its parent's center, every other child is its own center.
pub fn unfold_spec(spec: &TreeSpec, depth: usize) -> Result<CubeTree> {
    spec.validate()?;
    // Cube count by level via type multiplicities.
    let mut counts = vec![0u128; spec.types.len()];
    counts[spec.root] = 1;
    let mut total: u128 = 1;
    for _ in 0..depth {
        let mut next = vec![0u128; spec.types.len()];
        for (t, &c) in counts.iter().enumerate() {
            for child in &spec.types[t].children {
                next[child.child_type] = next[child.child_type].saturating_add(c);
            }
        }
        counts = next;
        total = total.saturating_add(counts.iter().fold(0u128, |a, &b| a.saturating_add(b)));
        if total > MAX_UNFOLDED_CUBES {
            return Err(Error::TooLarge(format!("unfolding to depth {depth} exceeds {MAX_UNFOLDED_CUBES} cubes")));
        }
    }
    let mut cubes = vec![Cube {
        id: 0,
        level: 0,
        center: 0,
        parent: None,
        kind: None,
        children: vec![],
        members: vec![],
        spec_type: Some(spec.root),
    }];
    let mut levels = vec![vec![0usize]];
    for k in 1..=depth {
        let mut ids = Vec::new();
        for &pid in &levels[k - 1] {
            let ty = cubes[pid].spec_type.expect("spec cube has a type");
            for child in &spec.types[ty].children {
                let id = cubes.len();
                let center = match child.kind {
                    ChildKind::Central { slot: 1 } => cubes[pid].center,
                    _ => id,
                };
                cubes.push(Cube {
                    id,
                    level: k,
                    center,
                    parent: Some(pid),
                    kind: Some(child.kind),
                    children: vec![],
                    members: vec![],
                    spec_type: Some(child.child_type),
                });
                cubes[pid].children.push(id);
                ids.push(id);
            }
        }
        levels.push(ids);
    }
    Ok(CubeTree {
        delta: spec.delta.clone(),
        source: TreeSource::Spec,
        origin: 0,
        unit_cube: 0,
        scale: 1.0,
        central_slots: spec.central_slots,
        cubes,
        levels,
    })
}

/// `M`: maximum child count over non-leaf cubes.
pub fn max_branching(tree: &CubeTree) -> usize {
    tree.cubes.iter().map(|c| c.children.len()).max().unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Structure,
    Partition,
    Nesting,
    Sandwich,
    Origin,
    Persistence,
    Kinds,
}

impl Property {
    pub fn label(self) -> &'static str {
        match self {
            Property::Structure => "structure",
            Property::Partition => "(i) partition",
            Property::Nesting => "(ii) nesting",
            Property::Sandwich => "(iii) ball sandwich",
            Property::Origin => "(iv) origin",
            Property::Persistence => "(v) center persistence",
            Property::Kinds => "central/boundary kinds",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: Property,
    pub status: CheckStatus,
    pub witnesses: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_cube: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeValidation {
    pub properties: Vec<PropertyCheck>,
}

impl TreeValidation {
    pub fn pass(&self) -> bool {
        self.properties.iter().all(|p| p.status != CheckStatus::Fail)
    }

    pub fn get(&self, property: Property) -> &PropertyCheck {
        self.properties.iter().find(|p| p.property == property).expect("all properties are reported")
    }
}

const MAX_WITNESSES: usize = 10;

struct Collector {
    property: Property,
    witnesses: Vec<String>,
    witness_cube: Option<usize>,
    failed: bool,
}

impl Collector {
    fn new(property: Property) -> Self {
        Collector { property, witnesses: vec![], witness_cube: None, failed: false }
    }

    fn fail(&mut self, cube: Option<usize>, msg: impl FnOnce() -> String) {
        if !self.failed {
            self.witness_cube = cube;
        }
        self.failed = true;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(msg());
        }
    }

    fn finish(self) -> PropertyCheck {
        let status = if self.failed { CheckStatus::Fail } else { CheckStatus::Pass };
        PropertyCheck { property: self.property, status, witnesses: self.witnesses, witness_cube: self.witness_cube }
    }

    fn skipped(property: Property, why: &str) -> PropertyCheck {
        PropertyCheck { property, status: CheckStatus::Skipped, witnesses: vec![why.to_string()], witness_cube: None }
    }
}

/// Checks the structural properties of a cube tree, with witnesses.
///
/// Metric trees need their space; spec trees must not be given one. For spec
/// trees the atoms of a cube are its descendant leaves and the ball sandwich is
/// skipped.
pub fn validate_tree(tree: &CubeTree, space: Option<&FiniteMetricSpace>) -> Result<TreeValidation> {
    match (tree.source, space) {
        (TreeSource::Metric, None) => return Err(Error::SourceMismatch("metric tree needs its point set".into())),
        (TreeSource::Spec, Some(_)) => return Err(Error::SourceMismatch("spec tree has no point set".into())),
        _ => {}
    }
    let n_cubes = tree.cubes.len();
    let mut structure = Collector::new(Property::Structure);
    if n_cubes == 0 {
        structure.fail(None, || "tree has no cubes".into());
    }
    for (i, c) in tree.cubes.iter().enumerate() {
        if c.id != i {
            structure.fail(Some(i), || format!("cube at position {i} has id {}", c.id));
            continue;
        }
        match (c.parent, c.level) {
            (None, 0) if c.kind.is_none() => {}
            (None, _) | (_, 0) => structure.fail(Some(i), || format!("cube {i} at level {} has parent {:?}", c.level, c.parent)),
            (Some(p), k) => {
                let ok = p < n_cubes && tree.cubes[p].level + 1 == k && tree.cubes[p].children.contains(&i) && c.kind.is_some();
                if !ok {
                    structure.fail(Some(i), || format!("cube {i} is inconsistent with its parent {p}"));
                }
            }
        }
        for &ch in &c.children {
            if ch >= n_cubes || tree.cubes[ch].parent != Some(i) {
                structure.fail(Some(i), || format!("cube {i} lists child {ch} that does not point back"));
            }
        }
    }
    for (k, ids) in tree.levels.iter().enumerate() {
        for &id in ids {
            if id >= n_cubes || tree.cubes[id].level != k {
                structure.fail(Some(id), || format!("level index {k} lists cube {id}"));
            }
        }
    }
    let structure = structure.finish();
    if structure.status == CheckStatus::Fail {
        let mut properties = vec![structure];
        for p in [Property::Partition, Property::Nesting, Property::Sandwich, Property::Origin, Property::Persistence, Property::Kinds] {
            properties.push(Collector::skipped(p, "structure check failed"));
        }
        return Ok(TreeValidation { properties });
    }

    // Atoms: point indices (metric) or descendant leaf ids (spec).
    let atoms: Vec<Vec<usize>> = match tree.source {
        TreeSource::Metric => tree.cubes.iter().map(|c| c.members.clone()).collect(),
        TreeSource::Spec => {
            let mut atoms = vec![Vec::new(); n_cubes];
            for k in (0..tree.levels.len()).rev() {
                for &id in &tree.levels[k] {
                    let c = &tree.cubes[id];
                    atoms[id] = if c.children.is_empty() {
                        vec![id]
                    } else {
                        let mut a: Vec<usize> = c.children.iter().flat_map(|&ch| atoms[ch].iter().copied()).collect();
                        a.sort_unstable();
                        a
                    };
                }
            }
            atoms
        }
    };
    let universe: Vec<usize> = match tree.source {
        TreeSource::Metric => (0..space.unwrap().len()).collect(),
        TreeSource::Spec => tree.leaves().map(|c| c.id).collect(),
    };
    let atom_name = |a: usize| match space {
        Some(s) if a < s.len() => format!("point {:?}", s.id(a)),
        Some(_) => format!("point index {a}"),
        None => format!("leaf {a}"),
    };

    let mut partition = Collector::new(Property::Partition);
    let max_atom = universe.iter().copied().max().unwrap_or(0) + 1;
    for (k, ids) in tree.levels.iter().enumerate() {
        let mut owner: Vec<Vec<usize>> = vec![Vec::new(); max_atom];
        for &id in ids {
            for &a in &atoms[id] {
                if a < max_atom {
                    owner[a].push(id);
                } else {
                    partition.fail(Some(id), || format!("cube {id} holds unknown {}", atom_name(a)));
                }
            }
        }
        for &a in &universe {
            match owner[a].len() {
                1 => {}
                0 => partition.fail(None, || format!("{} lies in no level-{k} cube", atom_name(a))),
                _ => partition.fail(Some(owner[a][0]), || format!("{} lies in level-{k} cubes {:?}", atom_name(a), owner[a])),
            }
        }
    }

    let mut nesting = Collector::new(Property::Nesting);
    for c in &tree.cubes {
        if c.children.is_empty() {
            continue;
        }
        let mut union: Vec<usize> = c.children.iter().flat_map(|&ch| atoms[ch].iter().copied()).collect();
        let total = union.len();
        union.sort_unstable();
        union.dedup();
        if union.len() != total {
            nesting.fail(Some(c.id), || format!("children of cube {} overlap", c.id));
        }
        if union != atoms[c.id] {
            nesting.fail(Some(c.id), || format!("cube {} differs from the union of its children", c.id));
        }
    }

    let sandwich = match space {
        None => Collector::skipped(Property::Sandwich, "spec trees carry no metric"),
        Some(s) => {
            let mut col = Collector::new(Property::Sandwich);
            for c in &tree.cubes {
                if c.center >= s.len() {
                    col.fail(Some(c.id), || format!("cube {} has center index {} outside the space", c.id, c.center));
                    continue;
                }
                let rho = tree.level_radius(c.level);
                for &m in &c.members {
                    let d = s.distance(c.center, m);
                    if !s.within(d, 2.0 * rho) {
                        col.fail(Some(c.id), || format!("cube {} member {} at distance {d} > 2*{rho}", c.id, atom_name(m)));
                    }
                }
                for y in s.ball(c.center, rho / 3.0) {
                    if c.members.binary_search(&y).is_err() {
                        col.fail(Some(c.id), || format!("cube {} misses {} inside the inner ball of radius {}", c.id, atom_name(y), rho / 3.0));
                    }
                }
            }
            col.finish()
        }
    };

    let centers_at = |k: usize| -> Vec<usize> {
        let mut v: Vec<usize> = tree.levels[k].iter().map(|&id| tree.cubes[id].center).collect();
        v.sort_unstable();
        v
    };

    let mut origin = Collector::new(Property::Origin);
    for k in 0..tree.levels.len() {
        if centers_at(k).binary_search(&tree.origin).is_err() {
            origin.fail(None, || format!("origin {} is not a level-{k} center", tree.origin));
        }
    }
    match tree.cubes.get(tree.unit_cube) {
        Some(q0) if q0.level == 0 => {
            let holds = match tree.source {
                TreeSource::Metric => q0.members.binary_search(&tree.origin).is_ok(),
                TreeSource::Spec => q0.center == tree.origin,
            };
            if !holds {
                origin.fail(Some(q0.id), || format!("unit cube {} does not contain the origin", q0.id));
            }
        }
        _ => origin.fail(None, || format!("unit cube {} is not a level-0 cube", tree.unit_cube)),
    }

    let mut persistence = Collector::new(Property::Persistence);
    for k in 0..tree.levels.len().saturating_sub(1) {
        let next = centers_at(k + 1);
        for c in centers_at(k) {
            if next.binary_search(&c).is_err() {
                persistence.fail(None, || format!("level-{k} center {c} is not a level-{} center", k + 1));
            }
        }
    }

    let mut kinds = Collector::new(Property::Kinds);
    let j = tree.central_slots as u32;
    for c in &tree.cubes {
        if c.children.is_empty() {
            continue;
        }
        let mut slots: Vec<u32> = c
            .children
            .iter()
            .filter_map(|&ch| match tree.cubes[ch].kind {
                Some(ChildKind::Central { slot }) => Some(slot),
                _ => None,
            })
            .collect();
        slots.sort_unstable();
        if slots != (1..=j).collect::<Vec<_>>() {
            kinds.fail(Some(c.id), || format!("cube {} has central slots {slots:?}, expected 1..={j}", c.id));
        }
        for &ch in &c.children {
            let child = &tree.cubes[ch];
            let shares = child.center == c.center;
            let bad = match (tree.source, child.kind) {
                (_, Some(ChildKind::Central { slot: 1 })) if !shares && j == 1 => true,
                (TreeSource::Metric, Some(ChildKind::Boundary)) if shares => true,
                _ => false,
            };
            if bad {
                kinds.fail(Some(ch), || format!("cube {ch} kind {:?} disagrees with its center", child.kind));
            }
        }
    }

    Ok(TreeValidation {
        properties: vec![
            structure,
            partition.finish(),
            nesting.finish(),
            sandwich,
            origin.finish(),
            persistence.finish(),
            kinds.finish(),
        ],
    })
}

/// A descending chain `Q = cubes[0] > cubes[1] > ... > cubes[m]` with the
/// kind of each step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub cubes: Vec<usize>,
    pub kinds: Vec<ChildKind>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn boundary_steps(&self) -> usize {
        self.kinds.iter().filter(|k| k.is_boundary()).count()
    }
}

/// Streams all chains of length `m` starting at `from`, depth-first in child order.
pub fn offspring_chains(tree: &CubeTree, from: usize, m: usize) -> Result<OffspringChains<'_>> {
    let cube = tree.cubes.get(from).ok_or_else(|| Error::InvalidParams(format!("no cube {from}")))?;
    let available = tree.depth() - cube.level;
    if m == 0 || m > available {
        return Err(Error::DepthExceeded { cube: from, requested: m, available });
    }
    Ok(OffspringChains { tree, m, path: vec![from], next: vec![0], done: false })
}

pub struct OffspringChains<'a> {
    tree: &'a CubeTree,
    m: usize,
    path: Vec<usize>,
    next: Vec<usize>,
    done: bool,
}

impl Iterator for OffspringChains<'_> {
    type Item = Chain;

    fn next(&mut self) -> Option<Chain> {
        while !self.done {
            if self.path.len() == self.m + 1 {
                let chain = Chain {
                    cubes: self.path.clone(),
                    kinds: self.path[1..].iter().map(|&c| self.tree.cubes[c].kind.expect("non-root has a kind")).collect(),
                };
                self.path.pop();
                self.next.pop();
                return Some(chain);
            }
            let top = *self.path.last().unwrap();
            let i = self.next.last_mut().unwrap();
            match self.tree.cubes[top].children.get(*i) {
                Some(&child) => {
                    *i += 1;
                    self.path.push(child);
                    self.next.push(0);
                }
                None => {
                    self.path.pop();
                    self.next.pop();
                    if self.path.is_empty() {
                        self.done = true;
                    }
                }
            }
        }
        None
    }
}
