//! Policy distances over (cohort, individual) pairs, per-pair cluster
//! mappings, the derived cluster measures and the two total-variation
//! closeness conditions.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};

use crate::core::{Cohort, CohortDistribution, CohortSet, UniverseSpec};
use crate::rational::{qabs, render_q, Q};
use crate::scoring::ScoringFunction;
use crate::{Error, Result};

/// A distance function over (cohort, individual) pairs describing how
/// differently a scoring family may treat two cohort contexts.
#[derive(Clone, Debug)]
pub enum PolicyDistance {
    /// Swap interchangeability: `D(u,v)` on the same or swapped cohort,
    /// 1 otherwise.
    Interchangeability,
    /// Quality-based treatment: 0 within a group at equal profiles, the
    /// inter-group distance across groups at equal profiles, 1 otherwise.
    Quality,
    /// Supremum score gap over an explicit finite family.
    Family(Vec<ScoringFunction>),
    /// Custom symmetric table; missing pairs fall back to the default.
    Table {
        entries: BTreeMap<((Cohort, usize), (Cohort, usize)), Q>,
        default: Q,
    },
}

impl PolicyDistance {
    pub fn eval(&self, spec: &UniverseSpec, a: (Cohort, usize), b: (Cohort, usize)) -> Result<Q> {
        if a == b {
            return Ok(Q::zero());
        }
        match self {
            PolicyDistance::Interchangeability => Ok(delta_int(a, b, spec)),
            PolicyDistance::Quality => delta_quality(a, b, spec),
            PolicyDistance::Family(fs) => {
                let mut sup = Q::zero();
                for f in fs {
                    let gap = qabs(&(f.eval(a.0, a.1) - f.eval(b.0, b.1)));
                    if gap > sup {
                        sup = gap;
                    }
                }
                Ok(sup)
            }
            PolicyDistance::Table { entries, default } => Ok(entries
                .get(&(a, b))
                .or_else(|| entries.get(&(b, a)))
                .cloned()
                .unwrap_or_else(|| default.clone())),
        }
    }
}

/// The interchangeability policy distance: replacing one individual moves
/// treatment by at most the task distance.
pub fn delta_int(a: (Cohort, usize), b: (Cohort, usize), spec: &UniverseSpec) -> Q {
    let ((c1, u), (c2, v)) = (a, b);
    if c1 == c2 || c2 == c1.swap(u, v) || c1 == c2.swap(v, u) {
        spec.d(u, v).clone()
    } else {
        Q::one()
    }
}

/// The quality-based treatment policy distance, trivially completed to 1 on
/// differing profiles.
pub fn delta_quality(a: (Cohort, usize), b: (Cohort, usize), spec: &UniverseSpec) -> Result<Q> {
    let quality = spec.quality.as_ref().ok_or(Error::MissingQualityStructure)?;
    let ((c1, u), (c2, v)) = (a, b);
    if spec.profile(c1)? != spec.profile(c2)? {
        return Ok(Q::one());
    }
    let gi = spec
        .group_of(u)
        .ok_or_else(|| Error::Precondition(format!("{} has no quality group", spec.name(u))))?;
    let gj = spec
        .group_of(v)
        .ok_or_else(|| Error::Precondition(format!("{} has no quality group", spec.name(v))))?;
    if gi == gj {
        Ok(Q::zero())
    } else {
        Ok(quality.inter[gi][gj].clone())
    }
}

/// Policy distance from an explicit finite family of scoring functions.
pub fn delta_from_family(family: Vec<ScoringFunction>) -> Result<PolicyDistance> {
    if family.is_empty() {
        return Err(Error::Precondition("policy family must be non-empty".into()));
    }
    Ok(PolicyDistance::Family(family))
}

/// Partition of one pair's cohort contexts `(𝒞_u × {u}) ∪ (𝒞_v × {v})` into
/// clusters, with canonical labels `1..=n_clusters`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairMapping {
    pub u: usize,
    pub v: usize,
    pub n_clusters: usize,
    pub label_u: BTreeMap<Cohort, usize>,
    pub label_v: BTreeMap<Cohort, usize>,
}

impl PairMapping {
    /// Builds a mapping from raw clusters, relabeling them canonically by
    /// their minimal (cohort, individual) element so reports are
    /// deterministic.
    pub fn from_clusters(u: usize, v: usize, clusters: Vec<Vec<(Cohort, usize)>>) -> PairMapping {
        let mut keyed: Vec<(Cohort, usize, Vec<(Cohort, usize)>)> = clusters
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|c| {
                let key = c.iter().min_by_key(|(ch, ind)| (ch.0, *ind)).copied().unwrap();
                (key.0, key.1, c)
            })
            .collect();
        keyed.sort_by_key(|(ch, ind, _)| (ch.0, *ind));
        let mut label_u = BTreeMap::new();
        let mut label_v = BTreeMap::new();
        for (idx, (_, _, cluster)) in keyed.iter().enumerate() {
            for &(cohort, ind) in cluster {
                if ind == u {
                    label_u.insert(cohort, idx + 1);
                }
                if ind == v {
                    label_v.insert(cohort, idx + 1);
                }
            }
        }
        PairMapping { u, v, n_clusters: keyed.len(), label_u, label_v }
    }

    /// All (cohort, individual) contexts with their cluster labels.
    pub fn contexts(&self) -> Vec<((Cohort, usize), usize)> {
        let mut out = Vec::with_capacity(self.label_u.len() + self.label_v.len());
        for (&c, &k) in &self.label_u {
            out.push(((c, self.u), k));
        }
        for (&c, &k) in &self.label_v {
            out.push(((c, self.v), k));
        }
        out
    }

    /// Checks structural validity against a cohort set: every context
    /// labeled exactly once with labels in range.
    pub fn validate(&self, n: usize, cohort_set: &CohortSet) -> Result<()> {
        for (labels, ind) in [(&self.label_u, self.u), (&self.label_v, self.v)] {
            let expected = cohort_set.cohorts_containing(n, ind);
            if labels.len() != expected.len()
                || expected.iter().any(|c| !labels.contains_key(c))
            {
                return Err(Error::Precondition(format!(
                    "mapping for pair ({}, {}) does not label every cohort of individual {}",
                    self.u, self.v, ind
                )));
            }
            if labels.values().any(|&k| k == 0 || k > self.n_clusters) {
                return Err(Error::Precondition("cluster label out of range".into()));
            }
        }
        Ok(())
    }
}

/// The mapping that puts every context of the pair into one cluster.
pub fn single_cluster_mapping(
    cohort_set: &CohortSet,
    n: usize,
    u: usize,
    v: usize,
) -> PairMapping {
    let mut cluster = Vec::new();
    for c in cohort_set.cohorts_containing(n, u) {
        cluster.push((c, u));
    }
    for c in cohort_set.cohorts_containing(n, v) {
        cluster.push((c, v));
    }
    PairMapping::from_clusters(u, v, vec![cluster])
}

/// The swapping mapping over the complete size-`k` cohort set: size-2
/// clusters pairing `(C,u)` with `(C,v)` when both are members, and `(C,u)`
/// with the swapped cohort context otherwise.
pub fn swapping_mapping(cohort_set: &CohortSet, n: usize, u: usize, v: usize) -> Result<PairMapping> {
    crate::core::complete_level(cohort_set, n)?;
    let mut clusters = Vec::new();
    for c in cohort_set.cohorts_containing(n, u) {
        if c.contains(v) {
            clusters.push(vec![(c, u), (c, v)]);
        } else {
            clusters.push(vec![(c, u), (c.swap(u, v), v)]);
        }
    }
    Ok(PairMapping::from_clusters(u, v, clusters))
}

/// Checks that a cohort set is closed under swaps within every quality
/// group; returns a missing swap on failure.
pub fn check_quality_symmetric(spec: &UniverseSpec, cohort_set: &CohortSet) -> Result<()> {
    let quality = spec.quality.as_ref().ok_or(Error::MissingQualityStructure)?;
    let cohorts = cohort_set.cohorts(spec.len());
    for &c in &cohorts {
        for u in c.members() {
            let group = quality.groups.iter().find(|g| g.contains(&u)).unwrap();
            for &v in group {
                if c.contains(v) {
                    continue;
                }
                let swapped = c.swap(u, v);
                if !cohorts.contains(&swapped) {
                    return Err(Error::Precondition(format!(
                        "cohort set is not quality-symmetric: {c:?} with {} -> {} gives {swapped:?}, which is missing",
                        spec.name(u),
                        spec.name(v)
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The quality-based mapping: one cluster per quality profile appearing
/// among the pair's cohorts. Requires a quality-symmetric cohort set.
pub fn quality_mapping(
    spec: &UniverseSpec,
    cohort_set: &CohortSet,
    u: usize,
    v: usize,
) -> Result<PairMapping> {
    check_quality_symmetric(spec, cohort_set)?;
    let mut by_profile: BTreeMap<Vec<usize>, Vec<(Cohort, usize)>> = BTreeMap::new();
    for c in cohort_set.cohorts_containing(spec.len(), u) {
        by_profile.entry(spec.profile(c)?.0).or_default().push((c, u));
    }
    for c in cohort_set.cohorts_containing(spec.len(), v) {
        by_profile.entry(spec.profile(c)?.0).or_default().push((c, v));
    }
    Ok(PairMapping::from_clusters(u, v, by_profile.into_values().collect()))
}

/// The induced partition of the pair's contexts when `delta/α` restricted to
/// them is a `(D(u,v), 1/α)`-metric: contexts within `α·D(u,v)` cluster
/// together and clusters must be 1-separated.
///
/// Built by union-find over close pairs, then verified; chained clusters that
/// break either bound are reported as non-clusterable rather than resolved.
pub fn coarsest_mapping(
    delta: &PolicyDistance,
    spec: &UniverseSpec,
    cohort_set: &CohortSet,
    u: usize,
    v: usize,
    alpha: &Q,
) -> Result<PairMapping> {
    let mut contexts: Vec<(Cohort, usize)> = Vec::new();
    for c in cohort_set.cohorts_containing(spec.len(), u) {
        contexts.push((c, u));
    }
    for c in cohort_set.cohorts_containing(spec.len(), v) {
        contexts.push((c, v));
    }
    let threshold = alpha.clone() * spec.d(u, v);
    let m = contexts.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..m {
        for j in i + 1..m {
            let d = delta.eval(spec, contexts[i], contexts[j])?;
            if d <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<(Cohort, usize)>> = BTreeMap::new();
    for i in 0..m {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(contexts[i]);
    }
    // Verify the (α·D, 1) structure; union-find chaining can overshoot.
    for (i, a) in contexts.iter().enumerate() {
        for (j, b) in contexts.iter().enumerate().skip(i + 1) {
            let d = delta.eval(spec, *a, *b)?;
            let same = find(&mut parent, i) == find(&mut parent, j);
            if same && d > threshold {
                return Err(Error::NotClusterable {
                    alpha: render_q(&threshold),
                    beta: "1".into(),
                    witness: format!("chained contexts {a:?} and {b:?} at distance {}", render_q(&d)),
                });
            }
            if !same && d < Q::one() {
                return Err(Error::NotClusterable {
                    alpha: render_q(&threshold),
                    beta: "1".into(),
                    witness: format!(
                        "cross-cluster contexts {a:?} and {b:?} at distance {}",
                        render_q(&d)
                    ),
                });
            }
        }
    }
    Ok(PairMapping::from_clusters(u, v, clusters.into_values().collect()))
}

/// Whether every intra-cluster pair satisfies `δ ≤ D(u,v)`.
pub fn mapping_respects(
    mapping: &PairMapping,
    delta: &PolicyDistance,
    spec: &UniverseSpec,
) -> Result<(bool, Option<String>)> {
    let bound = spec.d(mapping.u, mapping.v);
    let contexts = mapping.contexts();
    for (i, (a, ka)) in contexts.iter().enumerate() {
        for (b, kb) in &contexts[i + 1..] {
            if ka != kb {
                continue;
            }
            let d = delta.eval(spec, *a, *b)?;
            if d > *bound {
                return Ok((
                    false,
                    Some(format!(
                        "cluster {ka} holds {a:?} and {b:?} at δ = {} > D = {}",
                        render_q(&d),
                        render_q(bound)
                    )),
                ));
            }
        }
    }
    Ok((true, None))
}

/// A finite measure over cluster labels `1..=n`.
pub type ClusterMeasure = BTreeMap<usize, Q>;

/// The per-pair cluster measures: unconditional `q¹` (totals `p(u)`, `p(v)`)
/// and conditional `q²` (probability measures, absent when the individual is
/// never selected).
#[derive(Clone, Debug)]
pub struct ClusterMeasures {
    pub q1_uv: ClusterMeasure,
    pub q1_vu: ClusterMeasure,
    pub q2_uv: Option<ClusterMeasure>,
    pub q2_vu: Option<ClusterMeasure>,
}

/// Aggregates the mechanism's law into cluster measures for one pair.
pub fn cluster_measures(dist: &CohortDistribution, mapping: &PairMapping) -> ClusterMeasures {
    let aggregate = |labels: &BTreeMap<Cohort, usize>, ind: usize| -> ClusterMeasure {
        let mut measure = ClusterMeasure::new();
        for (cohort, p) in &dist.probabilities {
            if !cohort.contains(ind) {
                continue;
            }
            let label = labels.get(cohort).copied().unwrap_or(0);
            *measure.entry(label).or_insert_with(Q::zero) += p;
        }
        measure
    };
    let q1_uv = aggregate(&mapping.label_u, mapping.u);
    let q1_vu = aggregate(&mapping.label_v, mapping.v);
    let normalize = |m: &ClusterMeasure| -> Option<ClusterMeasure> {
        let total: Q = m.values().cloned().sum();
        if total.is_zero() {
            None
        } else {
            Some(m.iter().map(|(k, p)| (*k, p.clone() / total.clone())).collect())
        }
    };
    let q2_uv = normalize(&q1_uv);
    let q2_vu = normalize(&q1_vu);
    ClusterMeasures { q1_uv, q1_vu, q2_uv, q2_vu }
}

/// Total variation between two cluster measures (may have unequal totals).
pub fn tv_measures(a: &ClusterMeasure, b: &ClusterMeasure) -> Q {
    let mut keys: Vec<usize> = a.keys().copied().collect();
    for k in b.keys() {
        if !a.contains_key(k) {
            keys.push(*k);
        }
    }
    let mut total = Q::zero();
    for k in keys {
        let x = a.get(&k).cloned().unwrap_or_else(Q::zero);
        let y = b.get(&k).cloned().unwrap_or_else(Q::zero);
        total += qabs(&(x - y));
    }
    total / Q::from_integer(2.into())
}

/// A full mapping: one [`PairMapping`] per unordered pair of individuals.
#[derive(Clone, Debug)]
pub struct MappingSet {
    pub by_pair: BTreeMap<(usize, usize), PairMapping>,
}

/// The built-in mapping constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MappingKind {
    SingleCluster,
    Swapping,
    Quality,
}

impl MappingKind {
    pub fn parse(tag: &str) -> Option<MappingKind> {
        match tag {
            "single_cluster" => Some(MappingKind::SingleCluster),
            "swapping" => Some(MappingKind::Swapping),
            "quality" => Some(MappingKind::Quality),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MappingKind::SingleCluster => "single_cluster",
            MappingKind::Swapping => "swapping",
            MappingKind::Quality => "quality",
        }
    }
}

impl MappingSet {
    pub fn build(kind: MappingKind, spec: &UniverseSpec, cohort_set: &CohortSet) -> Result<MappingSet> {
        let n = spec.len();
        let mut by_pair = BTreeMap::new();
        for u in 0..n {
            for v in u + 1..n {
                let mapping = match kind {
                    MappingKind::SingleCluster => single_cluster_mapping(cohort_set, n, u, v),
                    MappingKind::Swapping => swapping_mapping(cohort_set, n, u, v)?,
                    MappingKind::Quality => quality_mapping(spec, cohort_set, u, v)?,
                };
                by_pair.insert((u, v), mapping);
            }
        }
        Ok(MappingSet { by_pair })
    }

    pub fn get(&self, u: usize, v: usize) -> Option<&PairMapping> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.by_pair.get(&key)
    }
}

/// Result of a notion check for one pair.
#[derive(Clone, Debug)]
pub struct PairNotion {
    pub u: usize,
    pub v: usize,
    pub tv: Q,
    pub bound: Q,
    pub distance: Q,
    pub satisfied: bool,
}

#[derive(Clone, Debug)]
pub struct NotionReport {
    pub satisfied: bool,
    pub per_pair: Vec<PairNotion>,
    pub worst: Option<PairNotion>,
    pub warnings: Vec<String>,
}

fn notion_report(pairs: Vec<PairNotion>, warnings: Vec<String>) -> NotionReport {
    let satisfied = pairs.iter().all(|p| p.satisfied);
    let worst = pairs
        .iter()
        .max_by(|a, b| {
            let excess_a = a.tv.clone() - &a.bound;
            let excess_b = b.tv.clone() - &b.bound;
            excess_a.cmp(&excess_b)
        })
        .cloned();
    NotionReport { satisfied, per_pair: pairs, worst, warnings }
}

/// Unconditional closeness: `TV(q¹_{u,v}, q¹_{v,u}) ≤ (α - 0.5)·D(u,v)` for
/// every pair at metric distance below 1. Requires `α ≥ 0.5`; the half unit
/// of slack is consumed later when the unconditional measure is smoothed to
/// a probability measure.
pub fn check_notion1(
    dist: &CohortDistribution,
    mappings: &MappingSet,
    spec: &UniverseSpec,
    alpha: &Q,
) -> Result<NotionReport> {
    if *alpha < Q::new(1.into(), 2.into()) {
        return Err(Error::Precondition("notion 1 requires α ≥ 0.5".into()));
    }
    let slack = alpha.clone() - Q::new(1.into(), 2.into());
    let mut pairs = Vec::new();
    for ((u, v), mapping) in &mappings.by_pair {
        let d = spec.d(*u, *v).clone();
        if d >= Q::one() {
            continue;
        }
        let measures = cluster_measures(dist, mapping);
        let tv = tv_measures(&measures.q1_uv, &measures.q1_vu);
        let bound = slack.clone() * &d;
        let satisfied = tv <= bound;
        pairs.push(PairNotion { u: *u, v: *v, tv, bound, distance: d, satisfied });
    }
    Ok(notion_report(pairs, Vec::new()))
}

/// Conditional closeness: `TV(q²_{u,v}, q²_{v,u}) ≤ α·D(u,v)` for every pair
/// at metric distance below 1. Pairs involving a never-selected individual
/// are skipped with a warning.
pub fn check_notion2(
    dist: &CohortDistribution,
    mappings: &MappingSet,
    spec: &UniverseSpec,
    alpha: &Q,
) -> Result<NotionReport> {
    if alpha.is_negative() {
        return Err(Error::Precondition("notion 2 requires α ≥ 0".into()));
    }
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for ((u, v), mapping) in &mappings.by_pair {
        let d = spec.d(*u, *v).clone();
        if d >= Q::one() {
            continue;
        }
        let measures = cluster_measures(dist, mapping);
        match (&measures.q2_uv, &measures.q2_vu) {
            (Some(qu), Some(qv)) => {
                let tv = tv_measures(qu, qv);
                let bound = alpha.clone() * &d;
                let satisfied = tv <= bound;
                pairs.push(PairNotion { u: *u, v: *v, tv, bound, distance: d, satisfied });
            }
            _ => warnings.push(format!(
                "pair ({}, {}) skipped: conditional measure undefined at p = 0",
                spec.name(*u),
                spec.name(*v)
            )),
        }
    }
    Ok(notion_report(pairs, warnings))
}
