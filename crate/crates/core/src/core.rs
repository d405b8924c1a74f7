//! Universe, metric, cohort-set and cohort-distribution types with exact
//! probability arithmetic and validity checks.

use std::collections::BTreeMap;
use std::fmt;

use num::{One, Signed, Zero};

use crate::rational::{qabs, render_q, Q};
use crate::{Error, Result};

/// A cohort as a fixed-width bitset indexed by universe order.
///
/// Bit `i` set means individual `i` is a member. Universes are capped at 64
/// individuals; exact enumeration is only intended up to about 20.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cohort(pub u64);

impl Cohort {
    pub const EMPTY: Cohort = Cohort(0);

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Cohort {
        let mut bits = 0u64;
        for m in members {
            bits |= 1 << m;
        }
        Cohort(bits)
    }

    pub fn contains(&self, individual: usize) -> bool {
        self.0 >> individual & 1 == 1
    }

    pub fn insert(&self, individual: usize) -> Cohort {
        Cohort(self.0 | 1 << individual)
    }

    pub fn remove(&self, individual: usize) -> Cohort {
        Cohort(self.0 & !(1 << individual))
    }

    /// The swap `(C \ {u}) ∪ {v}`.
    pub fn swap(&self, u: usize, v: usize) -> Cohort {
        self.remove(u).insert(v)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..64).filter(move |i| self.contains(*i))
    }

    pub fn union(&self, other: Cohort) -> Cohort {
        Cohort(self.0 | other.0)
    }

    pub fn intersects(&self, other: Cohort) -> bool {
        self.0 & other.0 != 0
    }
}

impl fmt::Debug for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.members().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

/// Enumerates all size-`k` subsets of `{0..n}` in lexicographic bitset order.
pub fn subsets_of_size(n: usize, k: usize) -> Vec<Cohort> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    if k == 0 {
        out.push(Cohort::EMPTY);
        return out;
    }
    // Gosper's hack walks masks of fixed popcount in increasing numeric order.
    let mut mask: u64 = (1 << k) - 1;
    let limit: u64 = if n == 64 { u64::MAX } else { (1 << n) - 1 };
    while mask <= limit {
        out.push(Cohort(mask));
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        if r > limit || c == 0 {
            break;
        }
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    out
}

/// The permissible cohort set, either every size-`k` subset or an explicit
/// list of distinct non-empty subsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CohortSet {
    AllSizeK { k: usize },
    Explicit(Vec<Cohort>),
}

impl CohortSet {
    /// All permissible cohorts, in deterministic (lexicographic bitset) order.
    pub fn cohorts(&self, n: usize) -> Vec<Cohort> {
        match self {
            CohortSet::AllSizeK { k } => subsets_of_size(n, *k),
            CohortSet::Explicit(list) => list.clone(),
        }
    }

    /// Cohorts containing `u` (the per-individual slice `𝒞_u`).
    pub fn cohorts_containing(&self, n: usize, u: usize) -> Vec<Cohort> {
        self.cohorts(n).into_iter().filter(|c| c.contains(u)).collect()
    }

    pub fn contains(&self, n: usize, cohort: Cohort) -> bool {
        match self {
            CohortSet::AllSizeK { k } => {
                cohort.len() == *k && (n >= 64 || cohort.0 < (1u64 << n))
            }
            CohortSet::Explicit(list) => list.contains(&cohort),
        }
    }

    /// Checks structural validity against a universe of `n` individuals.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            CohortSet::AllSizeK { k } => {
                if *k == 0 || *k > n {
                    return Err(Error::Precondition(format!(
                        "cohort size {k} out of range for universe of {n}"
                    )));
                }
            }
            CohortSet::Explicit(list) => {
                let mut seen = std::collections::BTreeSet::new();
                for c in list {
                    if c.is_empty() {
                        return Err(Error::Precondition("empty cohort in cohort set".into()));
                    }
                    if n < 64 && c.0 >= (1u64 << n) {
                        return Err(Error::Precondition(format!(
                            "cohort {c:?} references individuals outside the universe"
                        )));
                    }
                    if !seen.insert(*c) {
                        return Err(Error::Precondition(format!("duplicate cohort {c:?}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The uniform cohort size when the set is a complete size-`k` level, else
/// an error naming a missing cohort.
pub fn complete_level(cohort_set: &CohortSet, n: usize) -> Result<usize> {
    match cohort_set {
        CohortSet::AllSizeK { k } => Ok(*k),
        CohortSet::Explicit(list) => {
            let k = list
                .first()
                .map(|c| c.len())
                .ok_or_else(|| Error::Precondition("empty cohort set".into()))?;
            let complete = subsets_of_size(n, k);
            if list.len() == complete.len() && complete.iter().all(|c| list.contains(c)) {
                Ok(k)
            } else {
                let missing = complete
                    .iter()
                    .find(|c| !list.contains(c))
                    .map(|c| format!("{c:?}"))
                    .unwrap_or_else(|| "a size mismatch".into());
                Err(Error::Precondition(format!(
                    "operation requires every size-{k} cohort; missing {missing}"
                )))
            }
        }
    }
}

/// Quality-group structure: a partition of the universe plus the derived
/// inter-group distance matrix `D(i,j) = min_{u∈q_i, v∈q_j} D(u,v)` and the
/// declared clustering parameter β.
#[derive(Clone, Debug)]
pub struct QualityStructure {
    pub groups: Vec<Vec<usize>>,
    pub beta: Q,
    /// Derived inter-group distances; `inter[i][j]` for `i != j`.
    pub inter: Vec<Vec<Q>>,
}

/// Per-quality-group membership counts of a cohort (the profile `P(C)`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualityProfile(pub Vec<usize>);

/// The universe: ordered individuals, a task pseudo-metric with entries in
/// `[0,1]`, optional per-individual qualifications and optional quality-group
/// structure.
#[derive(Clone, Debug)]
pub struct UniverseSpec {
    pub individuals: Vec<String>,
    pub metric: Vec<Vec<Q>>,
    pub qualifications: Option<Vec<Q>>,
    pub quality: Option<QualityStructure>,
}

/// One diagnosed invariant violation from [`UniverseSpec::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UniverseViolation {
    NonZeroDiagonal { u: usize },
    Asymmetric { u: usize, v: usize },
    OutOfRange { u: usize, v: usize },
    TriangleInequality { u: usize, v: usize, w: usize },
    QualificationOutOfRange { u: usize },
    GroupsNotPartition { detail: String },
}

impl UniverseSpec {
    pub fn new(individuals: Vec<String>, metric: Vec<Vec<Q>>) -> UniverseSpec {
        UniverseSpec { individuals, metric, qualifications: None, quality: None }
    }

    /// Universe with metric `D(u,v) = |q_u - q_v|` from qualifications.
    pub fn from_qualifications(names: Vec<String>, quals: Vec<Q>) -> UniverseSpec {
        let n = names.len();
        let metric = (0..n)
            .map(|u| (0..n).map(|v| qabs(&(quals[u].clone() - quals[v].clone()))).collect())
            .collect();
        UniverseSpec { individuals: names, metric, qualifications: Some(quals), quality: None }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn d(&self, u: usize, v: usize) -> &Q {
        &self.metric[u][v]
    }

    pub fn name(&self, u: usize) -> &str {
        &self.individuals[u]
    }

    /// Attaches a quality-group partition; derives the inter-group matrix.
    pub fn with_quality_groups(mut self, groups: Vec<Vec<usize>>, beta: Q) -> UniverseSpec {
        let k = groups.len();
        let mut inter = vec![vec![Q::zero(); k]; k];
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let mut best: Option<Q> = None;
                for &u in &groups[i] {
                    for &v in &groups[j] {
                        let d = self.metric[u][v].clone();
                        if best.as_ref().map_or(true, |b| d < *b) {
                            best = Some(d);
                        }
                    }
                }
                inter[i][j] = best.unwrap_or_else(Q::zero);
            }
        }
        self.quality = Some(QualityStructure { groups, beta, inter });
        self
    }

    /// Group index of an individual, if quality groups are present.
    pub fn group_of(&self, u: usize) -> Option<usize> {
        let q = self.quality.as_ref()?;
        q.groups.iter().position(|g| g.contains(&u))
    }

    /// The quality profile `P(C)` of a cohort.
    pub fn profile(&self, cohort: Cohort) -> Result<QualityProfile> {
        let q = self.quality.as_ref().ok_or(Error::MissingQualityStructure)?;
        let mut counts = vec![0usize; q.groups.len()];
        for (i, g) in q.groups.iter().enumerate() {
            counts[i] = g.iter().filter(|u| cohort.contains(**u)).count();
        }
        Ok(QualityProfile(counts))
    }

    /// Full invariant check. Violations are data, not failures.
    pub fn validate(&self) -> Vec<UniverseViolation> {
        let n = self.len();
        let mut out = Vec::new();
        for u in 0..n {
            if !self.metric[u][u].is_zero() {
                out.push(UniverseViolation::NonZeroDiagonal { u });
            }
            for v in 0..n {
                let d = &self.metric[u][v];
                if d.is_negative() || *d > Q::one() {
                    out.push(UniverseViolation::OutOfRange { u, v });
                }
                if v > u && self.metric[u][v] != self.metric[v][u] {
                    out.push(UniverseViolation::Asymmetric { u, v });
                }
            }
        }
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    if u != v && v != w && u != w {
                        let lhs = &self.metric[u][w];
                        let rhs = self.metric[u][v].clone() + self.metric[v][w].clone();
                        if *lhs > rhs {
                            out.push(UniverseViolation::TriangleInequality { u, v, w });
                        }
                    }
                }
            }
        }
        if let Some(quals) = &self.qualifications {
            for (u, q) in quals.iter().enumerate() {
                if q.is_negative() || *q > Q::one() {
                    out.push(UniverseViolation::QualificationOutOfRange { u });
                }
            }
        }
        if let Some(quality) = &self.quality {
            let mut seen = vec![false; n];
            for g in &quality.groups {
                for &u in g {
                    if u >= n || seen[u] {
                        out.push(UniverseViolation::GroupsNotPartition {
                            detail: format!("individual {u} repeated or out of range"),
                        });
                    } else {
                        seen[u] = true;
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                out.push(UniverseViolation::GroupsNotPartition {
                    detail: "groups do not cover the universe".into(),
                });
            }
        }
        out
    }

    /// Smallest β' such that `max intra-group distance ≤ β' · min inter-group
    /// distance` holds for every group, and whether β' ≤ the declared β.
    ///
    /// A single-group universe has no inter-group term; β' = 0 by convention.
    pub fn check_quality_clustered(&self) -> Result<(bool, Q)> {
        let quality = self.quality.as_ref().ok_or(Error::MissingQualityStructure)?;
        let groups = &quality.groups;
        let mut achieved = Q::zero();
        for (i, g) in groups.iter().enumerate() {
            let mut intra = Q::zero();
            for (a, &u) in g.iter().enumerate() {
                for &v in &g[a + 1..] {
                    if self.metric[u][v] > intra {
                        intra = self.metric[u][v].clone();
                    }
                }
            }
            let mut min_inter: Option<Q> = None;
            for j in 0..groups.len() {
                if i == j {
                    continue;
                }
                let d = quality.inter[i][j].clone();
                if min_inter.as_ref().map_or(true, |m| d < *m) {
                    min_inter = Some(d);
                }
            }
            let ratio = match min_inter {
                None => Q::zero(), // single group: trivially clustered
                Some(m) if m.is_zero() => {
                    if intra.is_zero() {
                        Q::zero()
                    } else {
                        // Intra-group spread with touching groups: no finite β.
                        return Ok((false, Q::from_integer(num::BigInt::from(i64::MAX))));
                    }
                }
                Some(m) => intra / m,
            };
            if ratio > achieved {
                achieved = ratio;
            }
        }
        Ok((achieved <= quality.beta, achieved))
    }
}

/// An exact probability measure over a permissible cohort set (the output law
/// of a cohort-selection mechanism).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CohortDistribution {
    pub n: usize,
    pub cohort_set: CohortSet,
    pub probabilities: BTreeMap<Cohort, Q>,
}

impl CohortDistribution {
    pub fn new(n: usize, cohort_set: CohortSet, probabilities: BTreeMap<Cohort, Q>) -> Result<CohortDistribution> {
        let dist = CohortDistribution { n, cohort_set, probabilities };
        dist.validate()?;
        Ok(dist)
    }

    /// Point mass on a single cohort.
    pub fn point_mass(n: usize, cohort: Cohort) -> CohortDistribution {
        let mut probabilities = BTreeMap::new();
        probabilities.insert(cohort, Q::one());
        CohortDistribution { n, cohort_set: CohortSet::Explicit(vec![cohort]), probabilities }
    }

    /// Uniform distribution over an explicit list of cohorts.
    pub fn uniform(n: usize, cohorts: &[Cohort]) -> CohortDistribution {
        let p = Q::one() / Q::from_integer(num::BigInt::from(cohorts.len()));
        let probabilities = cohorts.iter().map(|c| (*c, p.clone())).collect();
        CohortDistribution { n, cohort_set: CohortSet::Explicit(cohorts.to_vec()), probabilities }
    }

    pub fn validate(&self) -> Result<()> {
        self.cohort_set.validate(self.n)?;
        let mut total = Q::zero();
        for (cohort, p) in &self.probabilities {
            if p.is_negative() {
                return Err(Error::InvalidDistribution(format!(
                    "negative probability {} on {cohort:?}",
                    render_q(p)
                )));
            }
            if !self.cohort_set.contains(self.n, *cohort) {
                return Err(Error::InvalidDistribution(format!(
                    "support cohort {cohort:?} outside the permissible set"
                )));
            }
            total += p;
        }
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {}, not 1",
                render_q(&total)
            )));
        }
        Ok(())
    }

    pub fn prob(&self, cohort: Cohort) -> Q {
        self.probabilities.get(&cohort).cloned().unwrap_or_else(Q::zero)
    }

    /// `p(u) = Σ_{C ∋ u} 𝔸(C)`.
    pub fn p(&self, u: usize) -> Q {
        self.probabilities
            .iter()
            .filter(|(c, _)| c.contains(u))
            .fold(Q::zero(), |acc, (_, p)| acc + p)
    }

    /// Selection probability for every individual.
    pub fn selection_probabilities(&self) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.n];
        for (cohort, p) in &self.probabilities {
            for u in cohort.members() {
                out[u] += p;
            }
        }
        out
    }

    /// Mixes two distributions: `weight·self + (1-weight)·other`.
    pub fn mix(&self, other: &CohortDistribution, weight: &Q) -> Result<CohortDistribution> {
        if self.n != other.n {
            return Err(Error::Precondition("mixing distributions over different universes".into()));
        }
        let mut probabilities: BTreeMap<Cohort, Q> = BTreeMap::new();
        let mut support: Vec<Cohort> = Vec::new();
        for (c, p) in &self.probabilities {
            let entry = probabilities.entry(*c).or_insert_with(Q::zero);
            *entry += weight.clone() * p;
        }
        let complement = Q::one() - weight.clone();
        for (c, p) in &other.probabilities {
            let entry = probabilities.entry(*c).or_insert_with(Q::zero);
            *entry += complement.clone() * p;
        }
        for c in probabilities.keys() {
            support.push(*c);
        }
        CohortDistribution::new(self.n, CohortSet::Explicit(support), probabilities)
    }
}

/// Worst pair found by [`is_individually_fair`].
#[derive(Clone, Debug)]
pub struct FairnessWitness {
    pub u: usize,
    pub v: usize,
    pub gap: Q,
    pub distance: Q,
}

/// Checks `|p(u) - p(v)| ≤ α·D(u,v)` for every pair.
///
/// Pairs at metric distance zero require exactly equal probabilities. The
/// returned witness is the pair maximizing `|p(u)-p(v)| / D(u,v)` (a zero
/// -distance violation dominates every finite ratio).
pub fn is_individually_fair(
    dist: &CohortDistribution,
    spec: &UniverseSpec,
    alpha: &Q,
) -> (bool, Option<FairnessWitness>) {
    let p = dist.selection_probabilities();
    let n = spec.len();
    let mut fair = true;
    let mut worst: Option<(Q, FairnessWitness)> = None; // keyed by ratio
    let mut zero_violation: Option<FairnessWitness> = None;
    for u in 0..n {
        for v in u + 1..n {
            let gap = qabs(&(p[u].clone() - p[v].clone()));
            let d = spec.d(u, v);
            if d.is_zero() {
                if !gap.is_zero() {
                    fair = false;
                    if zero_violation.is_none() {
                        zero_violation = Some(FairnessWitness { u, v, gap, distance: d.clone() });
                    }
                }
                continue;
            }
            let bound = alpha.clone() * d;
            if gap > bound {
                fair = false;
            }
            let ratio = gap.clone() / d;
            if worst.as_ref().map_or(true, |(r, _)| ratio > *r) {
                worst = Some((ratio.clone(), FairnessWitness { u, v, gap, distance: d.clone() }));
            }
        }
    }
    let witness = zero_violation.or(worst.map(|(_, w)| w));
    (fair, witness)
}
