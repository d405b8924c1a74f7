//! Intra-cohort individually fair scoring: family membership checks, the
//! catalog compensation policies, Lipschitz extension and the adversarial
//! witness constructors.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};

use crate::core::{Cohort, CohortSet, UniverseSpec};
use crate::policies::{ClusterMeasures, PairMapping, PolicyDistance};
use crate::rational::{q, qabs, qi, render_q, Q};
use crate::simplex::{solve_or_explain, Constraint, LinearProgram, Relation};
use crate::{Error, Result};

/// A deterministic scoring function, realized as a value table over
/// (cohort, member) pairs. `f(C, x) = 0` for `x ∉ C` by convention.
///
/// Context-free functions carry a per-individual vector instead of a table so
/// they stay exact over lazily enumerated cohort sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoringFunction {
    pub name: String,
    values: BTreeMap<(Cohort, usize), Q>,
    per_ind: Option<Vec<Q>>,
    default: Q,
}

impl ScoringFunction {
    /// Empty table; scores filled in with [`ScoringFunction::set`].
    pub fn table(name: impl Into<String>) -> ScoringFunction {
        ScoringFunction { name: name.into(), values: BTreeMap::new(), per_ind: None, default: Q::zero() }
    }

    /// The constant function on members.
    pub fn constant(value: Q) -> ScoringFunction {
        ScoringFunction {
            name: format!("const_{}", render_q(&value)),
            values: BTreeMap::new(),
            per_ind: None,
            default: value,
        }
    }

    /// Context-free scoring `f(C, u) = g(u)`.
    pub fn per_individual(name: impl Into<String>, g: Vec<Q>) -> ScoringFunction {
        ScoringFunction { name: name.into(), values: BTreeMap::new(), per_ind: Some(g), default: Q::zero() }
    }

    pub fn set(&mut self, cohort: Cohort, member: usize, value: Q) {
        self.values.insert((cohort, member), value);
    }

    /// Builds the table by evaluating a closure over every (cohort, member).
    pub fn from_fn(
        name: impl Into<String>,
        cohorts: &[Cohort],
        mut f: impl FnMut(Cohort, usize) -> Q,
    ) -> ScoringFunction {
        let mut table = ScoringFunction::table(name);
        for &c in cohorts {
            for m in c.members() {
                let v = f(c, m);
                table.set(c, m, v);
            }
        }
        table
    }

    pub fn eval(&self, cohort: Cohort, x: usize) -> Q {
        if !cohort.contains(x) {
            return Q::zero();
        }
        if let Some(g) = &self.per_ind {
            return g[x].clone();
        }
        self.values.get(&(cohort, x)).cloned().unwrap_or_else(|| self.default.clone())
    }
}

/// Witness of an intra-cohort fairness violation.
#[derive(Clone, Debug)]
pub struct IntraCohortWitness {
    pub cohort: Cohort,
    pub u: usize,
    pub v: usize,
    pub gap: Q,
    pub bound: Q,
}

/// Exhaustively checks `|f(C,u) - f(C,v)| ≤ D(u,v)` for all `u, v ∈ C`.
pub fn intra_cohort_fair_check(
    f: &ScoringFunction,
    cohorts: &[Cohort],
    spec: &UniverseSpec,
) -> (bool, Option<IntraCohortWitness>) {
    for &c in cohorts {
        let members: Vec<usize> = c.members().collect();
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                let gap = qabs(&(f.eval(c, u) - f.eval(c, v)));
                if gap > *spec.d(u, v) {
                    return (
                        false,
                        Some(IntraCohortWitness { cohort: c, u, v, gap, bound: spec.d(u, v).clone() }),
                    );
                }
            }
        }
    }
    (true, None)
}

/// The three scoring-function families with closed-form membership tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Ignores the cohort context entirely: `f(C,u) = g(u)`.
    F1,
    /// Swap-stable: `|f((C∖{u})∪{v}, v) - f(C,u)| ≤ D(u,v)`.
    F2,
    /// Profile-determined: equal within a quality group at equal profiles,
    /// bounded by `D(i,j)` across groups at equal profiles.
    F3,
}

#[derive(Clone, Debug)]
pub struct FamilyWitness {
    pub description: String,
}

/// Exhaustive membership check of `f` in a family over a finite cohort set.
pub fn family_membership(
    f: &ScoringFunction,
    family: Family,
    spec: &UniverseSpec,
    cohorts: &[Cohort],
) -> Result<(bool, Option<FamilyWitness>)> {
    match family {
        Family::F1 => {
            for u in 0..spec.len() {
                let mut seen: Option<(Cohort, Q)> = None;
                for &c in cohorts {
                    if !c.contains(u) {
                        continue;
                    }
                    let value = f.eval(c, u);
                    match &seen {
                        None => seen = Some((c, value)),
                        Some((c0, v0)) => {
                            if *v0 != value {
                                return Ok((
                                    false,
                                    Some(FamilyWitness {
                                        description: format!(
                                            "{} scores {} in {:?} but {} in {:?}",
                                            spec.name(u),
                                            render_q(v0),
                                            c0,
                                            render_q(&value),
                                            c
                                        ),
                                    }),
                                ));
                            }
                        }
                    }
                }
            }
            Ok((true, None))
        }
        Family::F2 => {
            for &c in cohorts {
                for u in c.members() {
                    for v in 0..spec.len() {
                        if c.contains(v) {
                            continue;
                        }
                        let swapped = c.swap(u, v);
                        if !cohorts.contains(&swapped) {
                            continue;
                        }
                        let gap = qabs(&(f.eval(swapped, v) - f.eval(c, u)));
                        if gap > *spec.d(u, v) {
                            return Ok((
                                false,
                                Some(FamilyWitness {
                                    description: format!(
                                        "swap {:?}->{:?} moves {}'s score by {} > D = {}",
                                        c,
                                        swapped,
                                        spec.name(u),
                                        render_q(&gap),
                                        render_q(spec.d(u, v))
                                    ),
                                }),
                            ));
                        }
                    }
                }
            }
            Ok((true, None))
        }
        Family::F3 => {
            let quality = spec.quality.as_ref().ok_or(Error::MissingQualityStructure)?;
            if let (false, Some(w)) = intra_cohort_fair_check(f, cohorts, spec) {
                return Ok((
                    false,
                    Some(FamilyWitness {
                        description: format!(
                            "not intra-cohort fair: gap {} > {} for ({}, {}) in {:?}",
                            render_q(&w.gap),
                            render_q(&w.bound),
                            spec.name(w.u),
                            spec.name(w.v),
                            w.cohort
                        ),
                    }),
                ));
            }
            let mut contexts: Vec<(Cohort, usize)> = Vec::new();
            for &c in cohorts {
                for m in c.members() {
                    contexts.push((c, m));
                }
            }
            for (i, &(c1, u)) in contexts.iter().enumerate() {
                for &(c2, v) in &contexts[i..] {
                    if spec.profile(c1)? != spec.profile(c2)? {
                        continue;
                    }
                    let gi = spec.group_of(u).unwrap();
                    let gj = spec.group_of(v).unwrap();
                    let gap = qabs(&(f.eval(c1, u) - f.eval(c2, v)));
                    let ok = if gi == gj { gap.is_zero() } else { gap <= quality.inter[gi][gj] };
                    if !ok {
                        return Ok((
                            false,
                            Some(FamilyWitness {
                                description: format!(
                                    "profile-equal contexts ({:?},{}) and ({:?},{}) differ by {}",
                                    c1,
                                    spec.name(u),
                                    c2,
                                    spec.name(v),
                                    render_q(&gap)
                                ),
                            }),
                        ));
                    }
                }
            }
            Ok((true, None))
        }
    }
}

fn lipschitz_constraints(members: &[usize], quals: &[Q], lp: &mut LinearProgram) {
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let bound = qabs(&(quals[i].clone() - quals[j].clone()));
            let mut pos = vec![Q::zero(); members.len()];
            pos[i] = Q::one();
            pos[j] = -Q::one();
            lp.push(Constraint::new(pos.clone(), Relation::Le, bound.clone(), format!("|f{i}-f{j}|")));
            let neg: Vec<Q> = pos.into_iter().map(|c| -c).collect();
            lp.push(Constraint::new(neg, Relation::Le, bound, format!("|f{j}-f{i}|")));
        }
    }
    for i in 0..members.len() {
        let mut row = vec![Q::zero(); members.len()];
        row[i] = Q::one();
        lp.push(Constraint::new(row, Relation::Le, Q::one(), format!("f{i}<=1")));
    }
}

/// Fixed bonus pool: shares maximize the qualification-weighted spread
/// `Σ_{u,v} (b_u - b_v)(q_u - q_v)` subject to the pairwise fairness
/// constraints and a unit total, then scale by the pool.
///
/// Returns `(member, share_of_pool)` pairs; shares sum to `pool` exactly.
pub fn fixed_bonus_pool(cohort: Cohort, quals_by_ind: &[Q], pool: &Q) -> Result<Vec<(usize, Q)>> {
    let members: Vec<usize> = cohort.members().collect();
    let quals: Vec<Q> = members.iter().map(|&m| quals_by_ind[m].clone()).collect();
    let m = members.len();
    let total: Q = quals.iter().cloned().sum();
    // The double sum has gradient 2(m·q_u - Σq) in b_u.
    let objective: Vec<Q> =
        quals.iter().map(|qu| qi(2) * (qi(m as i64) * qu - total.clone())).collect();
    let mut lp = LinearProgram::new(m).maximize(objective);
    lipschitz_constraints(&members, &quals, &mut lp);
    lp.push(Constraint::new(vec![Q::one(); m], Relation::Eq, Q::one(), "sum=1"));
    let (x, _) = solve_or_explain(&lp)?;
    Ok(members.into_iter().zip(x.into_iter().map(|b| b * pool)).collect())
}

/// Bottom-of-cohort indicator used by stack ranking: the share of strictly
/// less qualified members is at most 10%. Ties at the cutoff are all marked
/// bottom.
pub fn bottom_decile(cohort: Cohort, quals_by_ind: &[Q]) -> Vec<usize> {
    let members: Vec<usize> = cohort.members().collect();
    let size = qi(members.len() as i64);
    members
        .iter()
        .copied()
        .filter(|&u| {
            let below = members.iter().filter(|&&v| quals_by_ind[v] < quals_by_ind[u]).count();
            qi(below as i64) / size.clone() <= q(1, 10)
        })
        .collect()
}

/// Individually fair stack ranking: performance-plan probabilities maximize
/// agreement with the bottom-decile indicator subject to the pairwise
/// fairness constraints, with the expected number of plans pinned to the
/// bottom-decile head count (the budget that reproduces the published
/// comparison tables).
pub fn stack_rank_if(cohort: Cohort, quals_by_ind: &[Q]) -> Result<Vec<(usize, Q)>> {
    let members: Vec<usize> = cohort.members().collect();
    let quals: Vec<Q> = members.iter().map(|&m| quals_by_ind[m].clone()).collect();
    let bottom = bottom_decile(cohort, quals_by_ind);
    let m = members.len();
    let objective: Vec<Q> = members
        .iter()
        .map(|u| if bottom.contains(u) { Q::one() } else { -Q::one() })
        .collect();
    let mut lp = LinearProgram::new(m).maximize(objective);
    lipschitz_constraints(&members, &quals, &mut lp);
    lp.push(Constraint::new(
        vec![Q::one(); m],
        Relation::Eq,
        qi(bottom.len() as i64),
        "expected-plans",
    ));
    let (x, _) = solve_or_explain(&lp)?;
    Ok(members.into_iter().zip(x).collect())
}

/// Hard-cutoff stack ranking (not intra-cohort fair); reference used only to
/// reproduce the published table's last column.
pub fn stack_rank_exact(cohort: Cohort, quals_by_ind: &[Q]) -> Vec<(usize, Q)> {
    let bottom = bottom_decile(cohort, quals_by_ind);
    cohort
        .members()
        .map(|u| (u, if bottom.contains(&u) { Q::one() } else { Q::zero() }))
        .collect()
}

/// Equal treatment: every member scores the cohort's average qualification;
/// the per-member bonus is `base · avg`.
pub fn equal_treatment(cohort: Cohort, quals_by_ind: &[Q], base: &Q) -> Vec<(usize, Q)> {
    let members: Vec<usize> = cohort.members().collect();
    let avg: Q =
        members.iter().map(|&m| quals_by_ind[m].clone()).sum::<Q>() / qi(members.len() as i64);
    members.into_iter().map(|u| (u, base.clone() * &avg)).collect()
}

/// Promotion: probabilities maximize the chance of promoting a maximally
/// qualified member subject to fairness constraints, with expected promotions
/// equal to one. Falls back to the uniform cohort lottery if the program is
/// ever infeasible.
pub fn promotion(cohort: Cohort, quals_by_ind: &[Q]) -> Result<Vec<(usize, Q)>> {
    let members: Vec<usize> = cohort.members().collect();
    let quals: Vec<Q> = members.iter().map(|&m| quals_by_ind[m].clone()).collect();
    let m = members.len();
    let top = quals.iter().max().cloned().unwrap_or_else(Q::zero);
    let objective: Vec<Q> =
        quals.iter().map(|qu| if *qu == top { Q::one() } else { Q::zero() }).collect();
    let mut lp = LinearProgram::new(m).maximize(objective);
    lipschitz_constraints(&members, &quals, &mut lp);
    lp.push(Constraint::new(vec![Q::one(); m], Relation::Eq, Q::one(), "expected-promotions"));
    match solve_or_explain(&lp) {
        Ok((x, _)) => Ok(members.into_iter().zip(x).collect()),
        Err(Error::LpInfeasible(_)) => {
            let share = Q::one() / qi(m as i64);
            Ok(members.into_iter().map(|u| (u, share.clone())).collect())
        }
        Err(e) => Err(e),
    }
}

/// The catalog policies named in scenario documents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatalogPolicy {
    FixedBonusPool,
    StackRankIf,
    EqualTreatment,
    Promotion,
}

impl CatalogPolicy {
    pub fn parse(tag: &str) -> Option<CatalogPolicy> {
        match tag {
            "fixed_bonus_pool" => Some(CatalogPolicy::FixedBonusPool),
            "stack_rank_if" => Some(CatalogPolicy::StackRankIf),
            "equal_treatment" => Some(CatalogPolicy::EqualTreatment),
            "promotion" => Some(CatalogPolicy::Promotion),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CatalogPolicy::FixedBonusPool => "fixed_bonus_pool",
            CatalogPolicy::StackRankIf => "stack_rank_if",
            CatalogPolicy::EqualTreatment => "equal_treatment",
            CatalogPolicy::Promotion => "promotion",
        }
    }

    /// Per-cohort share/probability vector as `[0,1]` scores (unit pool).
    pub fn shares(&self, cohort: Cohort, quals: &[Q]) -> Result<Vec<(usize, Q)>> {
        match self {
            CatalogPolicy::FixedBonusPool => fixed_bonus_pool(cohort, quals, &Q::one()),
            CatalogPolicy::StackRankIf => stack_rank_if(cohort, quals),
            CatalogPolicy::EqualTreatment => Ok(equal_treatment(cohort, quals, &Q::one())),
            CatalogPolicy::Promotion => promotion(cohort, quals),
        }
    }

    /// Materializes the policy as a scoring-function table over a cohort set.
    pub fn scoring_function(&self, cohorts: &[Cohort], spec: &UniverseSpec) -> Result<ScoringFunction> {
        let quals = spec
            .qualifications
            .as_ref()
            .ok_or_else(|| Error::Precondition("catalog policies require qualifications".into()))?;
        let mut f = ScoringFunction::table(self.label());
        for &c in cohorts {
            for (member, share) in self.shares(c, quals)? {
                f.set(c, member, share);
            }
        }
        Ok(f)
    }
}

/// Extends a partial scoring table to every (cohort, member) pair of the
/// cohort set while preserving the Lipschitz constant under `delta`:
/// `g(x) = min(1, inf_p (f(p) + α·δ(x, p)))`.
pub fn lipschitz_extend(
    partial: &[((Cohort, usize), Q)],
    delta: &PolicyDistance,
    spec: &UniverseSpec,
    cohort_set: &CohortSet,
    alpha: &Q,
) -> Result<ScoringFunction> {
    for (i, ((c1, x1), v1)) in partial.iter().enumerate() {
        if v1.is_negative() || *v1 > Q::one() {
            return Err(Error::Precondition(format!("partial score {} outside [0,1]", render_q(v1))));
        }
        for ((c2, x2), v2) in &partial[i + 1..] {
            let gap = qabs(&(v1.clone() - v2.clone()));
            let bound = alpha.clone() * delta.eval(spec, (*c1, *x1), (*c2, *x2))?;
            if gap > bound {
                return Err(Error::Precondition(format!(
                    "partial function not {}-Lipschitz: |{} - {}| > {} at ({:?},{})/({:?},{})",
                    render_q(alpha),
                    render_q(v1),
                    render_q(v2),
                    render_q(&bound),
                    c1,
                    x1,
                    c2,
                    x2
                )));
            }
        }
    }
    let mut f = ScoringFunction::table("lipschitz_extension");
    for c in cohort_set.cohorts(spec.len()) {
        for m in c.members() {
            let mut best: Option<Q> = None;
            for ((cp, xp), vp) in partial {
                let candidate = vp.clone() + alpha.clone() * delta.eval(spec, (c, m), (*cp, *xp))?;
                if best.as_ref().map_or(true, |b| candidate < *b) {
                    best = Some(candidate);
                }
            }
            let value = best.unwrap_or_else(Q::zero).min(Q::one());
            f.set(c, m, value);
        }
    }
    Ok(f)
}

/// Validates that `delta` restricted to the pair's contexts is an
/// (`intra`, `cross`)-metric with the mapping as its induced partition.
fn verify_cluster_metric(
    mapping: &PairMapping,
    delta: &PolicyDistance,
    spec: &UniverseSpec,
    intra: &Q,
    cross: &Q,
) -> Result<()> {
    let contexts = mapping.contexts();
    for (i, ((c1, x1), k1)) in contexts.iter().enumerate() {
        for ((c2, x2), k2) in &contexts[i + 1..] {
            let d = delta.eval(spec, (*c1, *x1), (*c2, *x2))?;
            if k1 == k2 && d > *intra {
                return Err(Error::NotClusterable {
                    alpha: render_q(intra),
                    beta: render_q(cross),
                    witness: format!("intra-cluster ({c1:?},{x1})/({c2:?},{x2}) at {}", render_q(&d)),
                });
            }
            if k1 != k2 && d < *cross {
                return Err(Error::NotClusterable {
                    alpha: render_q(intra),
                    beta: render_q(cross),
                    witness: format!("cross-cluster ({c1:?},{x1})/({c2:?},{x2}) at {}", render_q(&d)),
                });
            }
        }
    }
    Ok(())
}

/// Staircase witness for mass-moving-distance necessity: cluster `i` scores
/// `i(α+ε)·D(u,v)`, extended 1-Lipschitz under `delta`.
///
/// Requires `D(u,v) < 1/(α·n)` so the staircase fits in `[0,1]`, and the
/// cluster structure `δ ≤ α·D(u,v)` within / `δ ≥ 1` across.
pub fn adversarial_score_mmd(
    mapping: &PairMapping,
    spec: &UniverseSpec,
    cohort_set: &CohortSet,
    delta: &PolicyDistance,
    alpha: &Q,
    epsilon: Option<Q>,
) -> Result<ScoringFunction> {
    let d = spec.d(mapping.u, mapping.v).clone();
    let n = qi(mapping.n_clusters as i64);
    if alpha.clone() * &n * &d >= Q::one() {
        return Err(Error::Precondition(format!(
            "D(u,v) = {} is not below 1/(α·n) = 1/({}·{})",
            render_q(&d),
            render_q(alpha),
            mapping.n_clusters
        )));
    }
    verify_cluster_metric(mapping, delta, spec, &(alpha.clone() * &d), &Q::one())?;
    let epsilon = match epsilon {
        Some(e) => {
            if !d.is_zero() && (alpha.clone() + &e) * &n * &d > Q::one() {
                return Err(Error::Precondition("epsilon too large for scores in [0,1]".into()));
            }
            e
        }
        None => {
            if d.is_zero() {
                q(1, 2)
            } else {
                // Halfway to the cap keeps every score strictly inside [0,1].
                (Q::one() / (n.clone() * &d) - alpha.clone()) / qi(2)
            }
        }
    };
    let step = (alpha.clone() + epsilon) * &d;
    let partial: Vec<((Cohort, usize), Q)> = mapping
        .contexts()
        .into_iter()
        .map(|((c, x), cluster)| ((c, x), qi(cluster as i64) * &step))
        .collect();
    let mut f = lipschitz_extend(&partial, delta, spec, cohort_set, &Q::one())?;
    f.name = "adversarial_mmd_staircase".into();
    Ok(f)
}

/// Binary witness for expected-score necessity: clusters where the
/// higher-probability individual's measure dominates score 1, the rest 0.
///
/// The measured expected-score gap equals `TV(q)` exactly for the conditional
/// measures (equal totals); for the unconditional measures it equals
/// `TV(q¹) + |p(u)-p(v)|/2`.
pub fn adversarial_score_expected(
    mapping: &PairMapping,
    measures: &ClusterMeasures,
    spec: &UniverseSpec,
    cohort_set: &CohortSet,
    delta: &PolicyDistance,
    alpha: &Q,
    conditional: bool,
) -> Result<ScoringFunction> {
    let d = spec.d(mapping.u, mapping.v).clone();
    verify_cluster_metric(mapping, delta, spec, &(alpha.clone() * &d), &Q::one())?;
    let (qu, qv) = if conditional {
        let qu = measures
            .q2_uv
            .as_ref()
            .ok_or_else(|| Error::NeverSelected(spec.name(mapping.u).to_string()))?;
        let qv = measures
            .q2_vu
            .as_ref()
            .ok_or_else(|| Error::NeverSelected(spec.name(mapping.v).to_string()))?;
        (qu, qv)
    } else {
        (&measures.q1_uv, &measures.q1_vu)
    };
    // Orient so the dominated side's clusters score 0: gap = TV + |Δtotal|/2.
    let total_u: Q = qu.values().cloned().sum();
    let total_v: Q = qv.values().cloned().sum();
    let (hi, lo) = if total_u >= total_v { (qu, qv) } else { (qv, qu) };
    let ones: Vec<usize> = (1..=mapping.n_clusters)
        .filter(|i| {
            let a = hi.get(i).cloned().unwrap_or_else(Q::zero);
            let b = lo.get(i).cloned().unwrap_or_else(Q::zero);
            a >= b
        })
        .collect();
    let partial: Vec<((Cohort, usize), Q)> = mapping
        .contexts()
        .into_iter()
        .map(|((c, x), cluster)| {
            let v = if ones.contains(&cluster) { Q::one() } else { Q::zero() };
            ((c, x), v)
        })
        .collect();
    let mut f = lipschitz_extend(&partial, delta, spec, cohort_set, &Q::one())?;
    f.name = "adversarial_expected_binary".into();
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::subsets_of_size;

    fn quals_spec(quals: &[Q]) -> UniverseSpec {
        let names = (0..quals.len()).map(|i| format!("u{i}")).collect();
        UniverseSpec::from_qualifications(names, quals.to_vec())
    }

    #[test]
    fn constant_function_is_intra_cohort_fair() {
        let spec = quals_spec(&[q(1, 2), q(1, 4), Q::one()]);
        let cohorts = subsets_of_size(3, 2);
        let f = ScoringFunction::constant(q(1, 2));
        let (ok, _) = intra_cohort_fair_check(&f, &cohorts, &spec);
        assert!(ok);
    }

    #[test]
    fn qualification_scoring_is_fair_under_qualification_metric() {
        let quals = [q(3, 10), q(7, 10), q(1, 2)];
        let spec = quals_spec(&quals);
        let cohorts = subsets_of_size(3, 2);
        let f = ScoringFunction::per_individual("qual", quals.to_vec());
        let (ok, _) = intra_cohort_fair_check(&f, &cohorts, &spec);
        assert!(ok);
    }

    #[test]
    fn pathological_function_is_fair_but_outside_f2() {
        // Universe of three equivalent individuals (zero metric).
        let names = vec!["a".into(), "b".into(), "c".into()];
        let spec = UniverseSpec::new(names, vec![vec![Q::zero(); 3]; 3]);
        let ab = Cohort::from_members([0, 1]);
        let ac = Cohort::from_members([0, 2]);
        let bc = Cohort::from_members([1, 2]);
        let cohorts = vec![ab, ac, bc];
        let mut f = ScoringFunction::table("pathological");
        f.set(ab, 0, Q::zero());
        f.set(ab, 1, Q::zero());
        f.set(ac, 0, Q::one());
        f.set(ac, 2, Q::one());
        f.set(bc, 1, q(1, 2));
        f.set(bc, 2, q(1, 2));
        let (ok, _) = intra_cohort_fair_check(&f, &cohorts, &spec);
        assert!(ok, "scores are constant within each cohort");
        let (in_f2, witness) = family_membership(&f, Family::F2, &spec, &cohorts).unwrap();
        assert!(!in_f2, "swapping a for c changes the score by 1 > D = 0");
        assert!(witness.is_some());
        let (in_f1, _) = family_membership(&f, Family::F1, &spec, &cohorts).unwrap();
        assert!(!in_f1);
    }

    #[test]
    fn context_free_function_is_in_f1() {
        let spec = quals_spec(&[q(1, 2), q(1, 4), Q::one()]);
        let cohorts = subsets_of_size(3, 2);
        let f = ScoringFunction::per_individual("g", vec![q(1, 2), q(1, 4), Q::one()]);
        let (ok, _) = family_membership(&f, Family::F1, &spec, &cohorts).unwrap();
        assert!(ok);
    }

    #[test]
    fn equal_treatment_is_in_f3_but_not_f1() {
        // Two qualification levels as quality groups with the 0-1 metric.
        let names = (0..4).map(|i| format!("u{i}")).collect::<Vec<_>>();
        let mut metric = vec![vec![Q::one(); 4]; 4];
        for i in 0..4 {
            metric[i][i] = Q::zero();
        }
        metric[0][1] = Q::zero();
        metric[1][0] = Q::zero();
        metric[2][3] = Q::zero();
        metric[3][2] = Q::zero();
        let spec = UniverseSpec {
            qualifications: Some(vec![Q::one(), Q::one(), Q::zero(), Q::zero()]),
            ..UniverseSpec::new(names, metric)
        }
        .with_quality_groups(vec![vec![0, 1], vec![2, 3]], q(1, 2));
        let cohorts = subsets_of_size(4, 2);
        let f = CatalogPolicy::EqualTreatment.scoring_function(&cohorts, &spec).unwrap();
        let (in_f3, w) = family_membership(&f, Family::F3, &spec, &cohorts).unwrap();
        assert!(in_f3, "witness: {w:?}");
        let (in_f1, _) = family_membership(&f, Family::F1, &spec, &cohorts).unwrap();
        assert!(!in_f1, "cohort averages depend on the cohort");
    }

    #[test]
    fn fixed_bonus_equal_qualifications_split_evenly() {
        let quals = vec![q(1, 2); 4];
        let shares = fixed_bonus_pool(Cohort::from_members([0, 1, 2, 3]), &quals, &qi(100)).unwrap();
        for (_, share) in shares {
            assert_eq!(share, qi(25));
        }
    }

    #[test]
    fn fixed_bonus_two_member_extreme() {
        let quals = vec![Q::one(), Q::zero()];
        let shares = fixed_bonus_pool(Cohort::from_members([0, 1]), &quals, &Q::one()).unwrap();
        assert_eq!(shares, vec![(0, Q::one()), (1, Q::zero())]);
    }

    #[test]
    fn figure_cohort_one_fixed_bonus_shares() {
        // Qualifications .8 .7 .5 .2 .8 with a pool of 100.
        let quals = vec![q(4, 5), q(7, 10), q(1, 2), q(1, 5), q(4, 5)];
        let shares = fixed_bonus_pool(Cohort::from_members([0, 1, 2, 3, 4]), &quals, &qi(100)).unwrap();
        let expect = vec![(0, qi(35)), (1, qi(25)), (2, qi(5)), (3, qi(0)), (4, qi(35))];
        assert_eq!(shares, expect);
    }

    #[test]
    fn figure_cohort_two_fixed_bonus_shares() {
        // Qualifications .8 .6 .1 .2 .3; exact optimum (17/30, 11/30, 0, 0, 2/30).
        let quals = vec![q(4, 5), q(3, 5), q(1, 10), q(1, 5), q(3, 10)];
        let shares = fixed_bonus_pool(Cohort::from_members([0, 1, 2, 3, 4]), &quals, &Q::one()).unwrap();
        let expect =
            vec![(0, q(17, 30)), (1, q(11, 30)), (2, Q::zero()), (3, Q::zero()), (4, q(2, 30))];
        assert_eq!(shares, expect);
    }

    #[test]
    fn stack_rank_matches_figure_tables() {
        let cohort1 = vec![q(4, 5), q(7, 10), q(1, 2), q(1, 5), q(4, 5)];
        let plans = stack_rank_if(Cohort::from_members([0, 1, 2, 3, 4]), &cohort1).unwrap();
        let expect =
            vec![(0, Q::zero()), (1, q(1, 10)), (2, q(3, 10)), (3, q(3, 5)), (4, Q::zero())];
        assert_eq!(plans, expect);

        let cohort2 = vec![q(4, 5), q(3, 5), q(1, 10), q(1, 5), q(3, 10)];
        let plans = stack_rank_if(Cohort::from_members([0, 1, 2, 3, 4]), &cohort2).unwrap();
        let expect =
            vec![(0, Q::zero()), (1, Q::zero()), (2, q(13, 30)), (3, q(10, 30)), (4, q(7, 30))];
        assert_eq!(plans, expect);

        // Hard-cutoff reference (the table's last column).
        let exact = stack_rank_exact(Cohort::from_members([0, 1, 2, 3, 4]), &cohort1);
        assert_eq!(exact[3], (3, Q::one()));
        assert_eq!(exact.iter().map(|(_, v)| v.clone()).sum::<Q>(), Q::one());
    }

    #[test]
    fn stack_rank_all_equal_spreads_budget_evenly() {
        let quals = vec![q(1, 2); 4];
        let plans = stack_rank_if(Cohort::from_members([0, 1, 2, 3]), &quals).unwrap();
        // Everyone ties at the bottom; fairness forces equality and the
        // head-count budget then pins each probability to 1.
        for (_, p) in plans {
            assert_eq!(p, Q::one());
        }
    }

    #[test]
    fn promotion_matches_figure_tables() {
        let cohort1 = vec![q(4, 5), q(7, 10), q(1, 2), q(1, 5), q(4, 5)];
        let probs = promotion(Cohort::from_members([0, 1, 2, 3, 4]), &cohort1).unwrap();
        let expect =
            vec![(0, q(35, 100)), (1, q(25, 100)), (2, q(5, 100)), (3, Q::zero()), (4, q(35, 100))];
        assert_eq!(probs, expect);

        let cohort2 = vec![q(4, 5), q(3, 5), q(1, 10), q(1, 5), q(3, 10)];
        let probs = promotion(Cohort::from_members([0, 1, 2, 3, 4]), &cohort2).unwrap();
        let expect =
            vec![(0, q(17, 30)), (1, q(11, 30)), (2, Q::zero()), (3, Q::zero()), (4, q(2, 30))];
        assert_eq!(probs, expect);
    }

    #[test]
    fn promotion_edge_cases() {
        let quals = vec![q(1, 2); 3];
        let probs = promotion(Cohort::from_members([0, 1, 2]), &quals).unwrap();
        for (_, p) in probs {
            assert_eq!(p, q(1, 3));
        }
        let probs = promotion(Cohort::from_members([1]), &[Q::zero(), Q::one()]).unwrap();
        assert_eq!(probs, vec![(1, Q::one())]);
    }

    #[test]
    fn equal_treatment_matches_figure() {
        let quals = vec![q(4, 5), q(7, 10), q(1, 2), q(1, 5), q(4, 5)];
        let shares = equal_treatment(Cohort::from_members([0, 1, 2, 3, 4]), &quals, &qi(100));
        for (_, share) in shares {
            assert_eq!(share, qi(60));
        }
        let shares = equal_treatment(Cohort::from_members([0]), &[Q::one()], &qi(100));
        assert_eq!(shares, vec![(0, qi(100))]);
    }

    #[test]
    fn catalog_outputs_are_intra_cohort_fair_under_qualification_metric() {
        let quals = vec![q(4, 5), q(7, 10), q(1, 2), q(1, 5), q(4, 5), q(3, 10)];
        let spec = quals_spec(&quals);
        let cohorts = subsets_of_size(6, 4);
        for policy in [
            CatalogPolicy::FixedBonusPool,
            CatalogPolicy::StackRankIf,
            CatalogPolicy::EqualTreatment,
            CatalogPolicy::Promotion,
        ] {
            let f = policy.scoring_function(&cohorts, &spec).unwrap();
            let (ok, w) = intra_cohort_fair_check(&f, &cohorts, &spec);
            assert!(ok, "{}: {w:?}", policy.label());
        }
    }

    #[test]
    fn bonus_shares_sum_to_pool_exactly() {
        let quals = vec![q(4, 5), q(3, 5), q(1, 10), q(1, 5), q(3, 10)];
        let shares = fixed_bonus_pool(Cohort::from_members([0, 1, 2, 3, 4]), &quals, &qi(100)).unwrap();
        let total: Q = shares.into_iter().map(|(_, s)| s).sum();
        assert_eq!(total, qi(100));
    }

    #[test]
    fn family_f3_requires_quality_structure() {
        let spec = quals_spec(&[q(1, 2), q(1, 4)]);
        let cohorts = subsets_of_size(2, 1);
        let f = ScoringFunction::constant(q(1, 2));
        assert!(matches!(
            family_membership(&f, Family::F3, &spec, &cohorts),
            Err(Error::MissingQualityStructure)
        ));
    }

    #[test]
    fn lipschitz_extension_basics() {
        let spec = quals_spec(&[q(1, 2), q(1, 4), Q::one()]);
        let set = CohortSet::AllSizeK { k: 2 };
        let delta = PolicyDistance::Interchangeability;
        // Full-domain partial function: the extension is the identity.
        let cohorts = set.cohorts(3);
        let quals = spec.qualifications.clone().unwrap();
        let mut partial = Vec::new();
        for &c in &cohorts {
            for m in c.members() {
                partial.push(((c, m), quals[m].clone()));
            }
        }
        let g = lipschitz_extend(&partial, &delta, &spec, &set, &Q::one()).unwrap();
        for ((c, m), v) in &partial {
            assert_eq!(g.eval(*c, *m), *v);
        }

        // Single anchor: g(x) = min(1, v₀ + α·δ(x, p₀)).
        let anchor = (cohorts[0], 0usize);
        let g = lipschitz_extend(&[(anchor, q(1, 2))], &delta, &spec, &set, &Q::one()).unwrap();
        for &c in &cohorts {
            for m in c.members() {
                let expect = (q(1, 2) + delta.eval(&spec, (c, m), anchor).unwrap()).min(Q::one());
                assert_eq!(g.eval(c, m), expect);
            }
        }

        // A non-Lipschitz partial function is rejected with a witness.
        let c0 = cohorts[0];
        let bad = vec![((c0, 0), Q::zero()), ((c0, 1), Q::one())];
        assert!(matches!(
            lipschitz_extend(&bad, &delta, &spec, &set, &Q::one()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn extension_never_exceeds_its_lipschitz_constant() {
        let spec = quals_spec(&[q(1, 2), q(1, 4), Q::one(), q(3, 4)]);
        let set = CohortSet::AllSizeK { k: 2 };
        let delta = PolicyDistance::Interchangeability;
        let cohorts = set.cohorts(4);
        let anchors = vec![
            ((cohorts[0], 0usize), q(1, 4)),
            ((cohorts[2], 2usize), q(7, 8)),
        ];
        let alpha = q(3, 2);
        let g = lipschitz_extend(&anchors, &delta, &spec, &set, &alpha).unwrap();
        for ((c, m), v) in &anchors {
            assert_eq!(g.eval(*c, *m), *v);
        }
        let mut contexts = Vec::new();
        for &c in &cohorts {
            for m in c.members() {
                contexts.push((c, m));
            }
        }
        for (i, a) in contexts.iter().enumerate() {
            for b in &contexts[i + 1..] {
                let gap = qabs(&(g.eval(a.0, a.1) - g.eval(b.0, b.1)));
                let bound = alpha.clone() * delta.eval(&spec, *a, *b).unwrap();
                assert!(gap <= bound, "extension must stay {alpha:?}-Lipschitz");
            }
        }
    }

    #[test]
    fn adversarial_expected_gap_is_zero_on_equal_measures() {
        use crate::core::CohortDistribution;
        use crate::distances::{pipeline_distribution, unconditional};
        use crate::policies::{cluster_measures, swapping_mapping};
        // A symmetric law gives identical cluster measures; any sign
        // partition then yields a zero expected-score gap.
        let spec = quals_spec(&[q(1, 2), q(1, 2), q(1, 4)]);
        let set = CohortSet::AllSizeK { k: 2 };
        let dist = CohortDistribution::uniform(3, &set.cohorts(3));
        let mapping = swapping_mapping(&set, 3, 0, 1).unwrap();
        let measures = cluster_measures(&dist, &mapping);
        let f = adversarial_score_expected(
            &mapping,
            &measures,
            &spec,
            &set,
            &PolicyDistance::Interchangeability,
            &Q::one(),
            false,
        )
        .unwrap();
        let eu = unconditional(&pipeline_distribution(&dist, &f, 0)).expectation();
        let ev = unconditional(&pipeline_distribution(&dist, &f, 1)).expectation();
        assert_eq!(eu, ev);
    }

    #[test]
    fn adversarial_mmd_preconditions() {
        use crate::policies::single_cluster_mapping;
        let spec = quals_spec(&[q(1, 2), q(1, 4), Q::one()]);
        let set = CohortSet::AllSizeK { k: 2 };
        // Single cluster: the staircase is constant, no violation produced.
        let m = single_cluster_mapping(&set, 3, 0, 1);
        let zero = PolicyDistance::Table { entries: BTreeMap::new(), default: Q::zero() };
        // With a single cluster there is no cross-cluster bound to fail.
        let f = adversarial_score_mmd(&m, &spec, &set, &zero, &Q::one(), None).unwrap();
        let values: std::collections::BTreeSet<Q> =
            set.cohorts(3).iter().flat_map(|c| c.members().map(|x| f.eval(*c, x))).collect();
        assert_eq!(values.len(), 1, "constant staircase over one cluster");

        // Hypothesis gate: D(u,v) ≥ 1/(α·n) is rejected.
        let spec2 = quals_spec(&[Q::zero(), Q::one(), q(1, 2)]);
        let m2 = single_cluster_mapping(&set, 3, 0, 1); // D(0,1) = 1 ≥ 1/(1·1)
        assert!(matches!(
            adversarial_score_mmd(&m2, &spec2, &set, &zero, &Q::one(), None),
            Err(Error::Precondition(_))
        ));
    }
}
