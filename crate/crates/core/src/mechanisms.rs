//! The five cohort-selection mechanisms as exact laws and seeded samplers,
//! plus the multi-cohort wrappers.

use std::collections::BTreeMap;

use num::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::{complete_level, subsets_of_size, Cohort, CohortDistribution, CohortSet, QualityProfile, UniverseSpec};
use crate::distances::{unconditional, pipeline_distribution, ScorePmf};
use crate::rational::{binomial, q, qabs, qi, render_q, Q};
use crate::scoring::ScoringFunction;
use crate::simplex::{solve_or_explain, Constraint, LinearProgram, Relation};
use crate::{Error, Result};

/// Individually fair selection weights: `w(u) ∈ [0,1]` with
/// `|w(u) - w(v)| ≤ λ·D(u,v)`.
#[derive(Clone, Debug)]
pub struct WeightAssignment {
    pub weights: Vec<Q>,
    pub lipschitz: Q,
}

impl WeightAssignment {
    pub fn new(weights: Vec<Q>, lipschitz: Q) -> WeightAssignment {
        WeightAssignment { weights, lipschitz }
    }

    pub fn unit(weights: Vec<Q>) -> WeightAssignment {
        WeightAssignment { weights, lipschitz: Q::one() }
    }

    pub fn validate(&self, spec: &UniverseSpec) -> Result<()> {
        if self.weights.len() != spec.len() {
            return Err(Error::Precondition("weight vector length mismatch".into()));
        }
        for (u, w) in self.weights.iter().enumerate() {
            if w.is_negative() || *w > Q::one() {
                return Err(Error::Precondition(format!(
                    "weight {} for {} outside [0,1]",
                    render_q(w),
                    spec.name(u)
                )));
            }
        }
        for u in 0..self.weights.len() {
            for v in u + 1..self.weights.len() {
                let gap = qabs(&(self.weights[u].clone() - self.weights[v].clone()));
                if gap > self.lipschitz.clone() * spec.d(u, v) {
                    return Err(Error::Precondition(format!(
                        "weights violate the λ-Lipschitz condition on ({}, {})",
                        spec.name(u),
                        spec.name(v)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sum(&self) -> Q {
        self.weights.iter().cloned().sum()
    }
}

/// Seeded cohort samplers; each call draws one cohort.
pub trait CohortSampler {
    fn sample(&mut self) -> Result<Cohort>;
}

impl CohortSampler for Box<dyn CohortSampler> {
    fn sample(&mut self) -> Result<Cohort> {
        (**self).sample()
    }
}

/// Samples any exact law by inverse CDF in deterministic cohort order.
pub struct DistributionSampler {
    cumulative: Vec<(Cohort, f64)>,
    rng: ChaCha8Rng,
}

impl DistributionSampler {
    pub fn new(dist: &CohortDistribution, seed: u64) -> DistributionSampler {
        let mut cumulative = Vec::with_capacity(dist.probabilities.len());
        let mut acc = 0.0;
        for (c, p) in &dist.probabilities {
            acc += p.to_f64().unwrap_or(0.0);
            cumulative.push((*c, acc));
        }
        DistributionSampler { cumulative, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl CohortSampler for DistributionSampler {
    fn sample(&mut self) -> Result<Cohort> {
        let x: f64 = self.rng.gen();
        for (c, acc) in &self.cumulative {
            if x < *acc {
                return Ok(*c);
            }
        }
        self.cumulative
            .last()
            .map(|(c, _)| *c)
            .ok_or_else(|| Error::InvalidDistribution("empty support".into()))
    }
}

// ---------------------------------------------------------------------------
// Permute-then-classify
// ---------------------------------------------------------------------------

/// Exact output law of the permute-then-classify mechanism: walk a uniformly
/// random permutation, accept each individual with probability `w(u)` while
/// space remains, and force-fill once only exactly enough individuals are
/// left to reach size `k`.
///
/// A uniform permutation draws its next element uniformly from the remaining
/// set, and both the forced-fill rule and the stopping rule depend only on
/// the processed/selected counts, so the process is Markov in the pair
/// (remaining set, selected set). The layer-by-layer sweep below is exact
/// for arbitrary weight vectors; tests cross-check it against literal
/// permutation-times-coin enumeration on small universes.
///
/// Individuals with weight zero can still be force-selected by the fill
/// rule; the rule is implemented literally.
pub fn permute_then_classify(w: &WeightAssignment, k: usize, n: usize) -> Result<CohortDistribution> {
    if k > n || k == 0 {
        return Err(Error::Precondition(format!("cohort size {k} out of range for universe of {n}")));
    }
    let full: u64 = if n == 64 { u64::MAX } else { (1 << n) - 1 };
    let mut layer: BTreeMap<(u64, u64), Q> = BTreeMap::new();
    layer.insert((full, 0), Q::one());
    let mut law: BTreeMap<Cohort, Q> = BTreeMap::new();
    while !layer.is_empty() {
        let mut next: BTreeMap<(u64, u64), Q> = BTreeMap::new();
        for ((remaining, selected), mass) in layer {
            let selected_count = selected.count_ones() as usize;
            let remaining_count = remaining.count_ones() as usize;
            if selected_count == k {
                *law.entry(Cohort(selected)).or_insert_with(Q::zero) += mass;
                continue;
            }
            if remaining_count <= k - selected_count {
                *law.entry(Cohort(selected | remaining)).or_insert_with(Q::zero) += mass;
                continue;
            }
            let pick = Q::one() / qi(remaining_count as i64);
            for u in Cohort(remaining).members() {
                let rest = remaining & !(1 << u);
                let accept = mass.clone() * &pick * &w.weights[u];
                if !accept.is_zero() {
                    *next.entry((rest, selected | 1 << u)).or_insert_with(Q::zero) += accept;
                }
                let reject = mass.clone() * &pick * (Q::one() - &w.weights[u]);
                if !reject.is_zero() {
                    *next.entry((rest, selected)).or_insert_with(Q::zero) += reject;
                }
            }
        }
        layer = next;
    }
    CohortDistribution::new(n, CohortSet::AllSizeK { k }, law)
}

/// Literal permute-then-classify sampler.
pub struct PtcSampler {
    weights: Vec<f64>,
    k: usize,
    rng: ChaCha8Rng,
}

impl PtcSampler {
    pub fn new(w: &WeightAssignment, k: usize, seed: u64) -> PtcSampler {
        PtcSampler {
            weights: w.weights.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect(),
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl CohortSampler for PtcSampler {
    fn sample(&mut self) -> Result<Cohort> {
        let n = self.weights.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let mut selected = Cohort::EMPTY;
        for (pos, &u) in order.iter().enumerate() {
            if selected.len() == self.k {
                break;
            }
            let left = n - pos;
            if left <= self.k - selected.len() {
                for &v in &order[pos..] {
                    selected = selected.insert(v);
                }
                break;
            }
            if self.rng.gen_bool(self.weights[u]) {
                selected = selected.insert(u);
            }
        }
        Ok(selected)
    }
}

// ---------------------------------------------------------------------------
// Weighted sampling
// ---------------------------------------------------------------------------

/// Weighted sampling: a size-`k` cohort is drawn with probability
/// proportional to the sum of its members' weights.
pub fn weighted_sampling(w: &WeightAssignment, k: usize, n: usize) -> Result<CohortDistribution> {
    if k > n || k == 0 {
        return Err(Error::Precondition(format!("cohort size {k} out of range for universe of {n}")));
    }
    if w.sum().is_zero() {
        return Err(Error::Precondition("weighted sampling requires a positive total weight".into()));
    }
    let cohorts = subsets_of_size(n, k);
    let weight_of = |c: &Cohort| -> Q { c.members().map(|u| w.weights[u].clone()).sum() };
    let total: Q = cohorts.iter().map(weight_of).sum();
    let mut law = BTreeMap::new();
    for c in &cohorts {
        let p = weight_of(c) / total.clone();
        if !p.is_zero() {
            law.insert(*c, p);
        }
    }
    CohortDistribution::new(n, CohortSet::AllSizeK { k }, law)
}

/// Closed-form weighted-sampling marginal
/// `p(x) = (w(x)/S)·(n-k)/(n-1) + (k-1)/(n-1)`.
pub fn weighted_sampling_marginal(w: &WeightAssignment, k: usize, n: usize, x: usize) -> Q {
    if n == 1 {
        return Q::one();
    }
    let s = w.sum();
    let share = w.weights[x].clone() / s;
    share * qi((n - k) as i64) / qi((n - 1) as i64) + qi(k as i64 - 1) / qi((n - 1) as i64)
}

// ---------------------------------------------------------------------------
// Structured weighted sampling over crafted cohort sets
// ---------------------------------------------------------------------------

fn exact_cover_exists(cohorts: &[Cohort], n: usize) -> bool {
    fn go(cohorts: &[Cohort], covered: Cohort, n: usize) -> bool {
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        if covered.0 == full {
            return true;
        }
        let lowest = (0..n).find(|&i| !covered.contains(i)).unwrap();
        for c in cohorts {
            if c.contains(lowest) && !c.intersects(covered) && go(cohorts, covered.union(*c), n) {
                return true;
            }
        }
        false
    }
    go(cohorts, Cohort::EMPTY, n)
}

/// Derives individually fair sampling weights for an explicit cohort set.
///
/// Preconditions (both checked): each pair appears in a similar number of
/// cohorts (`||𝒞_u| - |𝒞_v|| / |𝒞| ≤ D(u,v)`) and some sub-collection of
/// the cohorts partitions the universe.
///
/// The distance system is first solved without non-negativity (the weight
/// spread is maximized via its minimum, which makes symmetric instances
/// yield symmetric weights), then shifted by the largest-magnitude negative
/// weight and renormalized by `y = 1 + |𝒞|·w*`. The count precondition is
/// exactly what keeps the distance constraints intact through that shift.
pub fn structured_weighted_sampling(
    cohorts: &[Cohort],
    spec: &UniverseSpec,
) -> Result<(Vec<Q>, CohortDistribution)> {
    let n = spec.len();
    let m = cohorts.len();
    if m == 0 {
        return Err(Error::Precondition("empty cohort set".into()));
    }
    let counts: Vec<i64> = (0..n)
        .map(|u| cohorts.iter().filter(|c| c.contains(u)).count() as i64)
        .collect();
    for u in 0..n {
        for v in u + 1..n {
            let gap = qi((counts[u] - counts[v]).abs()) / qi(m as i64);
            if gap > *spec.d(u, v) {
                return Err(Error::Precondition(format!(
                    "individuals {} and {} appear in {} and {} of {} cohorts; \
                     the count gap exceeds D = {}",
                    spec.name(u),
                    spec.name(v),
                    counts[u],
                    counts[v],
                    m,
                    render_q(spec.d(u, v))
                )));
            }
        }
    }
    if !exact_cover_exists(cohorts, n) {
        return Err(Error::Precondition(
            "no sub-collection of the cohort set partitions the universe".into(),
        ));
    }

    // Variables: w_0..w_{m-1} free, then t = min weight (maximized).
    let mut lp = LinearProgram::new(m + 1).free_variables();
    let mut objective = vec![Q::zero(); m + 1];
    objective[m] = Q::one();
    lp.objective = objective;
    for i in 0..m {
        let mut row = vec![Q::zero(); m + 1];
        row[i] = -Q::one();
        row[m] = Q::one();
        lp.push(Constraint::new(row, Relation::Le, Q::zero(), format!("t<=w{i}")));
    }
    lp.push(Constraint::new(
        (0..m).map(|_| Q::one()).chain([Q::zero()]).collect(),
        Relation::Eq,
        Q::one(),
        "sum=1",
    ));
    for u in 0..n {
        for v in u + 1..n {
            let mut row = vec![Q::zero(); m + 1];
            for (i, c) in cohorts.iter().enumerate() {
                if c.contains(u) {
                    row[i] += Q::one();
                }
                if c.contains(v) {
                    row[i] -= Q::one();
                }
            }
            let d = spec.d(u, v).clone();
            lp.push(Constraint::new(row.clone(), Relation::Le, d.clone(), format!("p({u})-p({v})")));
            let neg: Vec<Q> = row.into_iter().map(|c| -c).collect();
            lp.push(Constraint::new(neg, Relation::Le, d, format!("p({v})-p({u})")));
        }
    }
    let (solution, _) = solve_or_explain(&lp)?;
    let mut weights: Vec<Q> = solution[..m].to_vec();

    // Shift-and-renormalize: move the most negative weight to zero.
    let min = weights.iter().min().cloned().unwrap_or_else(Q::zero);
    let shift = if min.is_negative() { -min } else { Q::zero() };
    let y = Q::one() + qi(m as i64) * &shift;
    for w in weights.iter_mut() {
        *w = (w.clone() + &shift) / &y;
    }

    let mut law = BTreeMap::new();
    for (c, w) in cohorts.iter().zip(&weights) {
        if w.is_negative() {
            return Err(Error::Precondition("negative weight after renormalization".into()));
        }
        if !w.is_zero() {
            *law.entry(*c).or_insert_with(Q::zero) += w;
        }
    }
    let dist = CohortDistribution::new(n, CohortSet::Explicit(cohorts.to_vec()), law)?;
    Ok((weights, dist))
}

// ---------------------------------------------------------------------------
// Conditioning mechanism
// ---------------------------------------------------------------------------

/// Constants and exact diagnostics for the conditioning mechanism.
#[derive(Clone, Debug)]
pub struct ConditioningBounds {
    pub k: usize,
    pub alpha1: Q,
    pub alpha2: Q,
    pub alpha3: Q,
    /// Exact expected number of rounds, `1 / Pr[|S| ≥ k]`.
    pub expected_rounds: Q,
    /// Whether the weight-sum precondition `Σw ≥ 3k/2` held; the α bounds
    /// are only claimed when it does.
    pub sum_guarantee: bool,
}

/// Poisson-binomial counts: coefficient `m` is `Pr[exactly m successes]`.
fn poisson_binomial(weights: &[Q]) -> Vec<Q> {
    let mut coeffs = vec![Q::one()];
    for w in weights {
        let mut next = vec![Q::zero(); coeffs.len() + 1];
        let stay = Q::one() - w;
        for (m, c) in coeffs.iter().enumerate() {
            next[m] += c.clone() * &stay;
            next[m + 1] += c.clone() * w;
        }
        coeffs = next;
    }
    coeffs
}

fn alpha1_for(k: usize) -> Q {
    if k >= 12 {
        q(8, 5)
    } else {
        qi(13)
    }
}

fn alpha3_for(k: usize) -> Q {
    if k >= 180 {
        q(97, 200)
    } else if k >= 54 {
        q(1, 5)
    } else {
        Q::zero()
    }
}

/// Exact output law of the conditioning mechanism: select `S` by independent
/// weight-`w(u)` coin flips, restart until `|S| ≥ k`, then return a uniform
/// size-`k` subset of `S`.
///
/// The restart collapses to conditioning on `|S| ≥ k`. For a cohort `R`,
/// `𝔸(R) = η₁ · (∏_{x∈R} w_x) · Σ_t g_R(t)/C(k+t, k)` where `g_R(t)` is the
/// probability that exactly `t` of the complement's coins succeed; tests
/// cross-check against literal 2^|U| subset enumeration.
pub fn conditioning_mechanism(
    w: &WeightAssignment,
    k: usize,
    n: usize,
) -> Result<(CohortDistribution, ConditioningBounds)> {
    if k < 2 || k > n {
        return Err(Error::Precondition(format!(
            "conditioning mechanism requires 2 ≤ k ≤ |U|, got k = {k}, |U| = {n}"
        )));
    }
    let success: Q = poisson_binomial(&w.weights)[k..].iter().cloned().sum();
    if success.is_zero() {
        return Err(Error::Precondition(
            "Pr[|S| ≥ k] = 0: the mechanism never terminates".into(),
        ));
    }
    let eta1 = Q::one() / &success;
    let mut law = BTreeMap::new();
    for cohort in subsets_of_size(n, k) {
        let in_product: Q = cohort.members().map(|u| w.weights[u].clone()).product();
        if in_product.is_zero() {
            continue;
        }
        let complement: Vec<Q> = (0..n)
            .filter(|u| !cohort.contains(*u))
            .map(|u| w.weights[u].clone())
            .collect();
        let g = poisson_binomial(&complement);
        let mut sum = Q::zero();
        for (t, mass) in g.iter().enumerate() {
            sum += mass.clone() / binomial(k + t, k);
        }
        let p = eta1.clone() * in_product * sum;
        if !p.is_zero() {
            law.insert(cohort, p);
        }
    }
    let dist = CohortDistribution::new(n, CohortSet::AllSizeK { k }, law)?;
    let sum_guarantee = w.sum() * qi(2) >= qi(3 * k as i64);
    let bounds = ConditioningBounds {
        k,
        alpha1: alpha1_for(k),
        alpha2: qi(12),
        alpha3: alpha3_for(k),
        expected_rounds: eta1,
        sum_guarantee,
    };
    Ok((dist, bounds))
}

/// Closed-form selection probability of the conditioning mechanism:
/// `p(u) = η₁ · w(u) · Σ_{m ≥ k-1} Pr[|S∖{u}| = m] · k/(m+1)`.
pub fn conditioning_marginal(w: &WeightAssignment, k: usize, n: usize, u: usize) -> Result<Q> {
    let success: Q = poisson_binomial(&w.weights)[k..].iter().cloned().sum();
    if success.is_zero() {
        return Err(Error::Precondition("Pr[|S| ≥ k] = 0".into()));
    }
    let others: Vec<Q> = (0..n).filter(|x| *x != u).map(|x| w.weights[x].clone()).collect();
    let pb = poisson_binomial(&others);
    let mut sum = Q::zero();
    for (m, mass) in pb.iter().enumerate() {
        if m + 1 >= k {
            sum += mass.clone() * qi(k as i64) / qi((m + 1) as i64);
        }
    }
    Ok(w.weights[u].clone() * sum / success)
}

/// Closed-form gap
/// `|p(u)-p(v)| = η₁ · |w(u)-w(v)| · Σ_{m ≥ k-1} Pr[|S∖{u,v}| = m] · k/(m+1)`.
pub fn conditioning_marginal_gap(
    w: &WeightAssignment,
    k: usize,
    n: usize,
    u: usize,
    v: usize,
) -> Result<Q> {
    let success: Q = poisson_binomial(&w.weights)[k..].iter().cloned().sum();
    if success.is_zero() {
        return Err(Error::Precondition("Pr[|S| ≥ k] = 0".into()));
    }
    let others: Vec<Q> =
        (0..n).filter(|x| *x != u && *x != v).map(|x| w.weights[x].clone()).collect();
    let pb = poisson_binomial(&others);
    let mut sum = Q::zero();
    for (m, mass) in pb.iter().enumerate() {
        if m + 1 >= k {
            sum += mass.clone() * qi(k as i64) / qi((m + 1) as i64);
        }
    }
    Ok(qabs(&(w.weights[u].clone() - w.weights[v].clone())) * sum / success)
}

/// Exact per-pair diagnostics of the conditioning mechanism's conditional
/// closeness analysis.
#[derive(Clone, Debug)]
pub struct ConditioningPairDiagnostics {
    /// `κ₁ = Σ_{m ≥ k-1} Pr[|S∖{u,v}| = m] · k/(m+1)`.
    pub kappa1: Q,
    /// `κ₂ = Σ_{m ≥ k-2} Pr[|S∖{u,v}| = m] · k/(m+2)`.
    pub kappa2: Q,
    /// `η₂ = 4·(1 + max(1/k, Pr[|S∖{u,v}| = k-2] / Pr[|S∖{u,v}| = k-1]))`,
    /// undefined when the size-(k-1) layer has no mass.
    pub eta2: Option<Q>,
}

/// Computes the conditional-closeness diagnostics for one pair.
pub fn conditioning_pair_diagnostics(
    w: &WeightAssignment,
    k: usize,
    n: usize,
    u: usize,
    v: usize,
) -> ConditioningPairDiagnostics {
    let others: Vec<Q> =
        (0..n).filter(|x| *x != u && *x != v).map(|x| w.weights[x].clone()).collect();
    let pb = poisson_binomial(&others);
    let mut kappa1 = Q::zero();
    let mut kappa2 = Q::zero();
    for (m, mass) in pb.iter().enumerate() {
        if m + 1 >= k {
            kappa1 += mass.clone() * qi(k as i64) / qi((m + 1) as i64);
        }
        if m + 2 >= k {
            kappa2 += mass.clone() * qi(k as i64) / qi((m + 2) as i64);
        }
    }
    let layer = |m: usize| pb.get(m).cloned().unwrap_or_else(Q::zero);
    let eta2 = if k >= 2 && !layer(k - 1).is_zero() {
        let ratio = layer(k - 2) / layer(k - 1);
        Some(qi(4) * (Q::one() + (Q::one() / qi(k as i64)).max(ratio)))
    } else {
        None
    };
    ConditioningPairDiagnostics { kappa1, kappa2, eta2 }
}

/// Literal conditioning-mechanism sampler with restart semantics.
pub struct ConditioningSampler {
    weights: Vec<f64>,
    k: usize,
    rng: ChaCha8Rng,
    pub max_rounds: u64,
}

impl ConditioningSampler {
    pub fn new(w: &WeightAssignment, k: usize, seed: u64) -> ConditioningSampler {
        ConditioningSampler {
            weights: w.weights.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect(),
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_rounds: 1_000_000,
        }
    }
}

impl CohortSampler for ConditioningSampler {
    fn sample(&mut self) -> Result<Cohort> {
        for _ in 0..self.max_rounds {
            let mut pool: Vec<usize> = Vec::new();
            for (u, w) in self.weights.iter().enumerate() {
                if self.rng.gen_bool(*w) {
                    pool.push(u);
                }
            }
            if pool.len() >= self.k {
                pool.shuffle(&mut self.rng);
                return Ok(Cohort::from_members(pool.into_iter().take(self.k)));
            }
        }
        Err(Error::SamplerExhausted(self.max_rounds))
    }
}

// ---------------------------------------------------------------------------
// Quality compositional mechanism
// ---------------------------------------------------------------------------

/// Uniform law over the size-`count` subsets of one quality group.
pub fn uniform_group_law(spec: &UniverseSpec, group: usize, count: usize) -> Result<CohortDistribution> {
    let quality = spec.quality.as_ref().ok_or(Error::MissingQualityStructure)?;
    let members = &quality.groups[group];
    if count > members.len() {
        return Err(Error::Precondition(format!(
            "cannot select {count} from a group of {}",
            members.len()
        )));
    }
    let subsets = subsets_of_size(members.len(), count);
    let cohorts: Vec<Cohort> = subsets
        .iter()
        .map(|s| Cohort::from_members(s.members().map(|i| members[i])))
        .collect();
    Ok(CohortDistribution::uniform(spec.len(), &cohorts))
}

/// Runs the per-group mechanisms independently for a drawn quality profile
/// and returns the mixture law over the unions.
///
/// `sub_law(i, x_i)` supplies the group-`i` mechanism selecting `x_i`
/// members; it must be individually fair within the group. The profile
/// constraint `|x_i/|q_i| - x_j/|q_j|| ≤ (1-2β)·D(i,j)` is checked and
/// reported as a warning when violated (the guarantees are then not
/// claimed); profiles outside the permissible set are errors.
pub fn quality_compositional(
    spec: &UniverseSpec,
    cohort_set: &CohortSet,
    profile_dist: &[(Q, QualityProfile)],
    sub_law: &mut dyn FnMut(usize, usize) -> Result<CohortDistribution>,
) -> Result<(CohortDistribution, Vec<String>)> {
    let quality = spec.quality.as_ref().ok_or(Error::MissingQualityStructure)?;
    let n_groups = quality.groups.len();
    let mut warnings = Vec::new();
    if matches!(cohort_set, CohortSet::Explicit(_)) {
        crate::policies::check_quality_symmetric(spec, cohort_set)?;
    }
    let total: Q = profile_dist.iter().map(|(g, _)| g.clone()).sum();
    if !total.is_one() {
        return Err(Error::InvalidDistribution("profile distribution must sum to 1".into()));
    }
    let permissible: std::collections::BTreeSet<Vec<usize>> = cohort_set
        .cohorts(spec.len())
        .into_iter()
        .map(|c| spec.profile(c).map(|p| p.0))
        .collect::<Result<_>>()?;
    let one_minus_2beta = Q::one() - qi(2) * &quality.beta;
    for (_, profile) in profile_dist {
        if profile.0.len() != n_groups {
            return Err(Error::Precondition("profile arity mismatch".into()));
        }
        if !permissible.contains(&profile.0) {
            return Err(Error::Precondition(format!(
                "profile {:?} outside the permissible cohort set",
                profile.0
            )));
        }
        for i in 0..n_groups {
            for j in i + 1..n_groups {
                let share_i = qi(profile.0[i] as i64) / qi(quality.groups[i].len() as i64);
                let share_j = qi(profile.0[j] as i64) / qi(quality.groups[j].len() as i64);
                let gap = qabs(&(share_i - share_j));
                if gap > one_minus_2beta.clone() * &quality.inter[i][j] {
                    warnings.push(format!(
                        "profile {:?} violates the (1-2β)·D({i},{j}) share constraint; \
                         fairness guarantees are not claimed",
                        profile.0
                    ));
                }
            }
        }
    }

    let mut law: BTreeMap<Cohort, Q> = BTreeMap::new();
    for (gamma, profile) in profile_dist {
        // Product of the per-group laws.
        let mut partial: Vec<(Cohort, Q)> = vec![(Cohort::EMPTY, gamma.clone())];
        for (i, &count) in profile.0.iter().enumerate() {
            let group_law = sub_law(i, count)?;
            let mut next = Vec::new();
            for (base, mass) in &partial {
                for (sub, p) in &group_law.probabilities {
                    next.push((base.union(*sub), mass.clone() * p));
                }
            }
            partial = next;
        }
        for (cohort, mass) in partial {
            if !mass.is_zero() {
                *law.entry(cohort).or_insert_with(Q::zero) += mass;
            }
        }
    }
    let support: Vec<Cohort> = law.keys().copied().collect();
    let set = match cohort_set {
        CohortSet::AllSizeK { .. } if support.iter().map(|c| c.len()).collect::<std::collections::BTreeSet<_>>().len() == 1 => {
            cohort_set.clone()
        }
        _ => CohortSet::Explicit(cohort_set.cohorts(spec.len())),
    };
    let dist = CohortDistribution::new(spec.len(), set, law)?;
    Ok((dist, warnings))
}

// ---------------------------------------------------------------------------
// Monotonicity
// ---------------------------------------------------------------------------

/// Exhaustive monotonicity check over a complete size-`k` law: whenever the
/// ordering value of `u` is at most that of `v`, `𝔸(C'∪{u}) ≤ 𝔸(C'∪{v})`
/// must hold for every context `C'`.
pub fn is_monotonic(
    dist: &CohortDistribution,
    ordering: &[Q],
) -> Result<(bool, Option<(usize, usize, Cohort)>)> {
    let k = complete_level(&dist.cohort_set, dist.n)?;
    for u in 0..dist.n {
        for v in 0..dist.n {
            if u == v || ordering[u] > ordering[v] {
                continue;
            }
            for context in subsets_of_size(dist.n, k - 1) {
                if context.contains(u) || context.contains(v) {
                    continue;
                }
                if dist.prob(context.insert(u)) > dist.prob(context.insert(v)) {
                    return Ok((false, Some((u, v, context))));
                }
            }
        }
    }
    Ok((true, None))
}

// ---------------------------------------------------------------------------
// Multi-cohort wrappers
// ---------------------------------------------------------------------------

/// Joint law over labeled sub-cohorts produced by splitting each selected
/// cohort uniformly at random.
#[derive(Clone, Debug)]
pub struct MultiCohortDistribution {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub probabilities: BTreeMap<Vec<Cohort>, Q>,
}

impl MultiCohortDistribution {
    /// Marginal law of one labeled sub-cohort.
    pub fn marginal(&self, label: usize) -> CohortDistribution {
        let mut law: BTreeMap<Cohort, Q> = BTreeMap::new();
        for (split, p) in &self.probabilities {
            *law.entry(split[label]).or_insert_with(Q::zero) += p;
        }
        CohortDistribution {
            n: self.n,
            cohort_set: CohortSet::AllSizeK { k: self.sizes[label] },
            probabilities: law,
        }
    }
}

fn ordered_splits(cohort: Cohort, sizes: &[usize]) -> Vec<Vec<Cohort>> {
    if sizes.is_empty() {
        return vec![vec![]];
    }
    let members: Vec<usize> = cohort.members().collect();
    let mut out = Vec::new();
    for first in subsets_of_size(members.len(), sizes[0]) {
        let chosen = Cohort::from_members(first.members().map(|i| members[i]));
        let rest = Cohort(cohort.0 & !chosen.0);
        for mut tail in ordered_splits(rest, &sizes[1..]) {
            let mut split = vec![chosen];
            split.append(&mut tail);
            out.push(split);
        }
    }
    out
}

/// Splits each selected cohort uniformly at random into labeled sub-cohorts
/// of the given sizes (which must sum to the cohort size).
pub fn split_cohort(dist: &CohortDistribution, sizes: &[usize]) -> Result<MultiCohortDistribution> {
    let mut law: BTreeMap<Vec<Cohort>, Q> = BTreeMap::new();
    let expected: usize = sizes.iter().sum();
    for (cohort, p) in &dist.probabilities {
        if cohort.len() != expected {
            return Err(Error::Precondition(format!(
                "split sizes sum to {expected} but cohort {cohort:?} has {} members",
                cohort.len()
            )));
        }
        let splits = ordered_splits(*cohort, sizes);
        let share = p.clone() / qi(splits.len() as i64);
        for split in splits {
            *law.entry(split).or_insert_with(Q::zero) += share.clone();
        }
    }
    Ok(MultiCohortDistribution { n: dist.n, sizes: sizes.to_vec(), probabilities: law })
}

/// `T` independent repetitions with summed scores.
#[derive(Clone, Debug)]
pub struct RepeatedMechanism {
    pub base: CohortDistribution,
    pub t: usize,
}

impl RepeatedMechanism {
    pub fn new(base: CohortDistribution, t: usize) -> Result<RepeatedMechanism> {
        if t == 0 {
            return Err(Error::Precondition("repetition count must be at least 1".into()));
        }
        Ok(RepeatedMechanism { base, t })
    }

    /// Law of the summed unconditional score over `T` independent runs
    /// (T-fold convolution of the single-run law).
    pub fn summed_score_law(&self, f: &ScoringFunction, u: usize) -> ScorePmf {
        let single = unconditional(&pipeline_distribution(&self.base, f, u));
        let mut acc = ScorePmf::point(Q::zero());
        for _ in 0..self.t {
            let mut next = ScorePmf::new();
            for (a, pa) in &acc.mass {
                for (b, pb) in &single.mass {
                    next.add(a.clone() + b, pa.clone() * pb);
                }
            }
            acc = next;
        }
        acc
    }

    /// Expected summed score; equals `T` times the single-run expectation.
    pub fn expected_sum(&self, f: &ScoringFunction, u: usize) -> Q {
        self.summed_score_law(f, u).expectation()
    }

    /// The summed-score analogue of the unconditional expected-score gap.
    pub fn uncond_e_distance(&self, f: &ScoringFunction, u: usize, v: usize) -> Q {
        qabs(&(self.expected_sum(f, u) - self.expected_sum(f, v)))
    }
}
