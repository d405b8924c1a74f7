//! Pipeline outcome distributions and the four distance measures.
//!
//! The mass-moving distance is computed exactly through its coupling
//! characterization, documented on [`mmd`].

use std::collections::BTreeMap;

use num::{One, Zero};

use crate::core::CohortDistribution;
use crate::rational::{qabs, Q};
use crate::scoring::ScoringFunction;
use crate::{Error, Result};

/// The pipeline's outcome law for one individual: probability of never being
/// selected (⊥) plus a finite map of score values to probabilities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineOutcomeDistribution {
    pub p_bot: Q,
    pub scores: BTreeMap<Q, Q>,
}

impl PipelineOutcomeDistribution {
    pub fn total(&self) -> Q {
        self.p_bot.clone() + self.scores.values().fold(Q::zero(), |a, b| a + b)
    }
}

/// A finite-support probability mass function over `[0,1]`.
///
/// Also used as an unnormalized measure in cluster computations; callers that
/// require a probability measure check [`ScorePmf::total`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScorePmf {
    pub mass: BTreeMap<Q, Q>,
}

impl ScorePmf {
    pub fn new() -> ScorePmf {
        ScorePmf { mass: BTreeMap::new() }
    }

    pub fn point(value: Q) -> ScorePmf {
        let mut mass = BTreeMap::new();
        mass.insert(value, Q::one());
        ScorePmf { mass }
    }

    pub fn from_pairs<I: IntoIterator<Item = (Q, Q)>>(pairs: I) -> ScorePmf {
        let mut pmf = ScorePmf::new();
        for (value, p) in pairs {
            pmf.add(value, p);
        }
        pmf
    }

    pub fn add(&mut self, value: Q, p: Q) {
        if p.is_zero() {
            return;
        }
        *self.mass.entry(value).or_insert_with(Q::zero) += p;
    }

    pub fn total(&self) -> Q {
        self.mass.values().fold(Q::zero(), |a, b| a + b)
    }

    pub fn is_probability(&self) -> bool {
        self.total().is_one()
    }

    pub fn expectation(&self) -> Q {
        self.mass.iter().fold(Q::zero(), |acc, (v, p)| acc + v.clone() * p)
    }

    /// Support values in increasing order.
    pub fn support(&self) -> Vec<Q> {
        self.mass.keys().cloned().collect()
    }
}

impl Default for ScorePmf {
    fn default() -> Self {
        ScorePmf::new()
    }
}

/// The pipeline distribution `S_u`: mass `Σ_{C ∋ u, f(C,u)=s} 𝔸(C)` at each
/// score `s`, and `1 - p(u)` at ⊥.
pub fn pipeline_distribution(
    dist: &CohortDistribution,
    f: &ScoringFunction,
    u: usize,
) -> PipelineOutcomeDistribution {
    let mut scores: BTreeMap<Q, Q> = BTreeMap::new();
    let mut p_u = Q::zero();
    for (cohort, p) in &dist.probabilities {
        if !cohort.contains(u) {
            continue;
        }
        p_u += p;
        let s = f.eval(*cohort, u);
        *scores.entry(s).or_insert_with(Q::zero) += p;
    }
    PipelineOutcomeDistribution { p_bot: Q::one() - p_u, scores }
}

/// Pipeline distribution for a randomized scoring function given as a finite
/// mixture of deterministic components.
pub fn pipeline_distribution_mixture(
    dist: &CohortDistribution,
    components: &[(Q, ScoringFunction)],
    u: usize,
) -> PipelineOutcomeDistribution {
    let mut scores: BTreeMap<Q, Q> = BTreeMap::new();
    let mut p_u = Q::zero();
    for (cohort, p) in &dist.probabilities {
        if !cohort.contains(u) {
            continue;
        }
        p_u += p;
        for (w, f) in components {
            let s = f.eval(*cohort, u);
            *scores.entry(s).or_insert_with(Q::zero) += w.clone() * p;
        }
    }
    PipelineOutcomeDistribution { p_bot: Q::one() - p_u, scores }
}

/// The unconditional transform: ⊥ is treated as score 0.
pub fn unconditional(d: &PipelineOutcomeDistribution) -> ScorePmf {
    let mut pmf = ScorePmf::new();
    pmf.add(Q::zero(), d.p_bot.clone());
    for (v, p) in &d.scores {
        pmf.add(v.clone(), p.clone());
    }
    pmf
}

/// The conditional transform: the score law given selection.
///
/// Undefined when the individual is never selected.
pub fn conditional(d: &PipelineOutcomeDistribution) -> Result<ScorePmf> {
    let selected = Q::one() - d.p_bot.clone();
    if selected.is_zero() {
        return Err(Error::NeverSelected("p(u) = 0".into()));
    }
    let mut pmf = ScorePmf::new();
    for (v, p) in &d.scores {
        pmf.add(v.clone(), p.clone() / selected.clone());
    }
    Ok(pmf)
}

/// Total variation distance `½ Σ_w |g1(w) - g2(w)|` over the union support.
///
/// Defined for arbitrary finite measures (used on cluster measures too).
pub fn tv_distance(g1: &ScorePmf, g2: &ScorePmf) -> Q {
    let mut keys: Vec<&Q> = g1.mass.keys().collect();
    for k in g2.mass.keys() {
        if !g1.mass.contains_key(k) {
            keys.push(k);
        }
    }
    let mut total = Q::zero();
    for k in keys {
        let a = g1.mass.get(k).cloned().unwrap_or_else(Q::zero);
        let b = g2.mass.get(k).cloned().unwrap_or_else(Q::zero);
        total += qabs(&(a - b));
    }
    total / Q::from_integer(2.into())
}

/// `|E[g1] - E[g2]|`.
pub fn expected_score_distance(g1: &ScorePmf, g2: &ScorePmf) -> Q {
    qabs(&(g1.expectation() - g2.expectation()))
}

/// Maximum probability mass couplable between `g1` and `g2` using only pairs
/// `(x, y)` with `|x - y| ≤ cap`.
///
/// Both supports are one-dimensional, so an uncrossed (monotone) coupling is
/// optimal: if an optimal coupling pairs `x1<x2` with `y2<y1` inside the cap,
/// swapping to `(x1,y1), (x2,y2)` stays inside the cap. The two-pointer sweep
/// below therefore attains the maximum; tests cross-check it against a
/// generic max-flow.
pub fn max_coupling_within(g1: &ScorePmf, g2: &ScorePmf, cap: &Q) -> Q {
    let xs: Vec<(&Q, Q)> = g1.mass.iter().map(|(v, p)| (v, p.clone())).collect();
    let ys: Vec<(&Q, Q)> = g2.mass.iter().map(|(v, p)| (v, p.clone())).collect();
    let mut coupled = Q::zero();
    let mut i = 0;
    let mut j = 0;
    let mut remaining_x = xs.first().map(|(_, p)| p.clone()).unwrap_or_else(Q::zero);
    let mut remaining_y = ys.first().map(|(_, p)| p.clone()).unwrap_or_else(Q::zero);
    while i < xs.len() && j < ys.len() {
        let dx = xs[i].0;
        let dy = ys[j].0;
        if qabs(&(dx.clone() - dy.clone())) <= *cap {
            let take = remaining_x.clone().min(remaining_y.clone());
            coupled += take.clone();
            remaining_x -= take.clone();
            remaining_y -= take;
            if remaining_x.is_zero() {
                i += 1;
                if i < xs.len() {
                    remaining_x = xs[i].1.clone();
                }
            }
            if remaining_y.is_zero() && j < ys.len() {
                j += 1;
                if j < ys.len() {
                    remaining_y = ys[j].1.clone();
                }
            }
        } else if dx < dy {
            // x too far left: no later y gets closer.
            i += 1;
            if i < xs.len() {
                remaining_x = xs[i].1.clone();
            }
        } else {
            j += 1;
            if j < ys.len() {
                remaining_y = ys[j].1.clone();
            }
        }
    }
    coupled
}

/// Exact mass-moving distance between two probability mass functions over
/// `[0,1]` with finite supports.
///
/// The definition asks for the infimum over `v` such that both pmfs can be
/// perturbed by moving mass at most `v/2` and the perturbed pmfs have total
/// variation at most `v/2`. Coupling characterization: `v` is feasible iff a
/// partial coupling of mass at least `1 - v/2` exists using only pairs with
/// `|x - y| ≤ v` —
///
/// * if mass `m` is coupled within distance `v`, moving each coupled pair to
///   its midpoint moves nothing farther than `v/2` and leaves TV at most
///   `1 - m ≤ v/2`;
/// * conversely any perturbation pair with `TV ≤ v/2` shares at least
///   `1 - v/2` mass, and tracing that shared mass back through the two
///   moves yields a coupling supported on `|x - y| ≤ v`.
///
/// The max-couplable mass `m(v)` is a right-continuous step function jumping
/// only at pairwise support distances `d`, so the infimum is attained at one
/// of the candidates `max(d, 2·(1 - m(d)))`; every such candidate is itself
/// feasible, hence the minimum over candidates is exact.
pub fn mmd(g1: &ScorePmf, g2: &ScorePmf) -> Q {
    debug_assert!(g1.is_probability() && g2.is_probability());
    let mut thresholds: Vec<Q> = vec![Q::zero()];
    for x in g1.mass.keys() {
        for y in g2.mass.keys() {
            let d = qabs(&(x.clone() - y.clone()));
            thresholds.push(d);
        }
    }
    thresholds.sort();
    thresholds.dedup();
    let two = Q::from_integer(2.into());
    let mut best: Option<Q> = None;
    for d in &thresholds {
        let m = max_coupling_within(g1, g2, d);
        let candidate = d.clone().max(two.clone() * (Q::one() - m));
        if best.as_ref().map_or(true, |b| candidate < *b) {
            best = Some(candidate);
        }
    }
    best.unwrap_or_else(Q::zero).min(Q::one())
}

/// The four distance measures over pipeline outcome distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DistanceMeasure {
    UncondE,
    CondE,
    UncondMmd,
    CondMmd,
}

impl DistanceMeasure {
    pub const ALL: [DistanceMeasure; 4] = [
        DistanceMeasure::UncondE,
        DistanceMeasure::CondE,
        DistanceMeasure::UncondMmd,
        DistanceMeasure::CondMmd,
    ];

    pub fn is_conditional(&self) -> bool {
        matches!(self, DistanceMeasure::CondE | DistanceMeasure::CondMmd)
    }

    pub fn label(&self) -> &'static str {
        match self {
            DistanceMeasure::UncondE => "uncond-e",
            DistanceMeasure::CondE => "cond-e",
            DistanceMeasure::UncondMmd => "uncond-mmd",
            DistanceMeasure::CondMmd => "cond-mmd",
        }
    }

    pub fn parse(text: &str) -> Option<DistanceMeasure> {
        match text {
            "uncond-e" => Some(DistanceMeasure::UncondE),
            "cond-e" => Some(DistanceMeasure::CondE),
            "uncond-mmd" => Some(DistanceMeasure::UncondMmd),
            "cond-mmd" => Some(DistanceMeasure::CondMmd),
            _ => None,
        }
    }
}

/// Distance between two individuals' pipeline laws under one measure.
///
/// Conditional measures return an error when either individual is never
/// selected.
pub fn pipeline_distance(
    du: &PipelineOutcomeDistribution,
    dv: &PipelineOutcomeDistribution,
    measure: DistanceMeasure,
) -> Result<Q> {
    match measure {
        DistanceMeasure::UncondE => {
            Ok(expected_score_distance(&unconditional(du), &unconditional(dv)))
        }
        DistanceMeasure::CondE => Ok(expected_score_distance(&conditional(du)?, &conditional(dv)?)),
        DistanceMeasure::UncondMmd => Ok(mmd(&unconditional(du), &unconditional(dv))),
        DistanceMeasure::CondMmd => Ok(mmd(&conditional(du)?, &conditional(dv)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Cohort, CohortSet};
    use crate::rational::{q, qi};
    use crate::scoring::ScoringFunction;

    fn impossibility_setup() -> (CohortDistribution, ScoringFunction) {
        let ab = Cohort::from_members([0, 1]);
        let ac = Cohort::from_members([0, 2]);
        let bc = Cohort::from_members([1, 2]);
        let dist = CohortDistribution::uniform(3, &[ab, ac, bc]);
        let mut f = ScoringFunction::table("pathological");
        f.set(ab, 0, Q::zero());
        f.set(ab, 1, Q::zero());
        f.set(ac, 0, Q::one());
        f.set(ac, 2, Q::one());
        f.set(bc, 1, q(1, 2));
        f.set(bc, 2, q(1, 2));
        (dist, f)
    }

    #[test]
    fn pipeline_distribution_of_pathological_example() {
        let (dist, f) = impossibility_setup();
        let d = pipeline_distribution(&dist, &f, 0);
        assert_eq!(d.p_bot, q(1, 3));
        assert_eq!(d.scores.get(&Q::zero()), Some(&q(1, 3)));
        assert_eq!(d.scores.get(&Q::one()), Some(&q(1, 3)));
        assert_eq!(d.total(), qi(1));
    }

    #[test]
    fn pipeline_distribution_never_selected() {
        let dist = CohortDistribution::point_mass(3, Cohort::from_members([1, 2]));
        let f = ScoringFunction::constant(q(1, 2));
        let d = pipeline_distribution(&dist, &f, 0);
        assert_eq!(d.p_bot, qi(1));
        assert!(d.scores.is_empty());
        assert!(conditional(&d).is_err());
    }

    #[test]
    fn pipeline_distribution_constant_score() {
        let dist = CohortDistribution::uniform(
            3,
            &[Cohort::from_members([0, 1]), Cohort::from_members([1, 2])],
        );
        let f = ScoringFunction::constant(q(1, 2));
        let d = pipeline_distribution(&dist, &f, 1);
        assert_eq!(d.p_bot, qi(0));
        assert_eq!(d.scores.get(&q(1, 2)), Some(&qi(1)));
    }

    #[test]
    fn unconditional_folds_bot_into_zero() {
        let (dist, f) = impossibility_setup();
        let d = pipeline_distribution(&dist, &f, 0);
        let h = unconditional(&d);
        assert_eq!(h.mass.get(&Q::zero()), Some(&q(2, 3)));
        assert_eq!(h.mass.get(&Q::one()), Some(&q(1, 3)));
        assert_eq!(h.expectation(), q(1, 3));

        // p_bot = 0 is the identity on scores.
        let d = PipelineOutcomeDistribution {
            p_bot: Q::zero(),
            scores: BTreeMap::from([(q(1, 4), q(1, 2)), (q(3, 4), q(1, 2))]),
        };
        let h = unconditional(&d);
        assert_eq!(h.mass, d.scores);

        // Point mass on ⊥ becomes a point mass at 0.
        let d = PipelineOutcomeDistribution { p_bot: Q::one(), scores: BTreeMap::new() };
        assert_eq!(unconditional(&d), ScorePmf::point(Q::zero()));
    }

    #[test]
    fn conditional_renormalizes() {
        let (dist, f) = impossibility_setup();
        let d = pipeline_distribution(&dist, &f, 0);
        let g = conditional(&d).unwrap();
        assert_eq!(g.mass.get(&Q::zero()), Some(&q(1, 2)));
        assert_eq!(g.mass.get(&Q::one()), Some(&q(1, 2)));
        assert_eq!(g.expectation(), q(1, 2));
        assert!(g.is_probability());

        let d = PipelineOutcomeDistribution {
            p_bot: q(1, 2),
            scores: BTreeMap::from([(Q::one(), q(1, 2))]),
        };
        assert_eq!(conditional(&d).unwrap(), ScorePmf::point(Q::one()));
    }

    #[test]
    fn conditional_unconditional_expectation_identity() {
        let (dist, f) = impossibility_setup();
        for u in 0..3 {
            let d = pipeline_distribution(&dist, &f, u);
            let h = unconditional(&d);
            let g = conditional(&d).unwrap();
            let selected = Q::one() - d.p_bot.clone();
            assert_eq!(h.expectation(), selected * g.expectation());
        }
    }

    #[test]
    fn tv_distance_examples() {
        let a = ScorePmf::from_pairs([(Q::zero(), q(2, 3)), (Q::one(), q(1, 3))]);
        assert_eq!(tv_distance(&a, &a), Q::zero());
        let p0 = ScorePmf::point(Q::zero());
        let p1 = ScorePmf::point(Q::one());
        assert_eq!(tv_distance(&p0, &p1), Q::one());
        let b = ScorePmf::from_pairs([(Q::zero(), q(5, 6)), (Q::one(), q(1, 6))]);
        assert_eq!(tv_distance(&a, &b), q(1, 6));
    }

    #[test]
    fn expected_score_distance_pathological_values() {
        let (dist, f) = impossibility_setup();
        let hu: Vec<ScorePmf> =
            (0..3).map(|u| unconditional(&pipeline_distribution(&dist, &f, u))).collect();
        assert_eq!(expected_score_distance(&hu[0], &hu[1]), q(1, 6));
        let gu: Vec<ScorePmf> =
            (0..3).map(|u| conditional(&pipeline_distribution(&dist, &f, u)).unwrap()).collect();
        assert_eq!(expected_score_distance(&gu[0], &gu[2]), q(1, 4));
        assert_eq!(expected_score_distance(&gu[0], &gu[0]), Q::zero());
    }

    #[test]
    fn mmd_identical_is_zero() {
        let a = ScorePmf::from_pairs([(q(1, 4), q(1, 2)), (q(3, 4), q(1, 2))]);
        assert_eq!(mmd(&a, &a), Q::zero());
    }

    #[test]
    fn mmd_small_perturbation() {
        // Point mass at 0.7 vs {0.6: 1/2, 0.8: 1/2}: both can meet at the
        // midpoints with moves of 0.05 and no residual TV.
        let a = ScorePmf::point(q(7, 10));
        let b = ScorePmf::from_pairs([(q(3, 5), q(1, 2)), (q(4, 5), q(1, 2))]);
        assert_eq!(mmd(&a, &b), q(1, 10));
    }

    #[test]
    fn mmd_opposite_points() {
        let p0 = ScorePmf::point(Q::zero());
        let p1 = ScorePmf::point(Q::one());
        assert_eq!(mmd(&p0, &p1), Q::one());
    }

    #[test]
    fn mmd_pure_tv_case() {
        // Same support, different masses: coupling at distance 0 moves
        // nothing; MMD = 2·TV when supports coincide and TV is small.
        let a = ScorePmf::from_pairs([(Q::zero(), q(2, 3)), (Q::one(), q(1, 3))]);
        let b = ScorePmf::from_pairs([(Q::zero(), q(5, 6)), (Q::one(), q(1, 6))]);
        let d = mmd(&a, &b);
        assert_eq!(d, q(1, 3));
        assert!(d <= Q::from_integer(2.into()) * tv_distance(&a, &b));
    }

    #[test]
    fn max_coupling_respects_cap() {
        let a = ScorePmf::from_pairs([(Q::zero(), q(1, 2)), (Q::one(), q(1, 2))]);
        let b = ScorePmf::from_pairs([(q(1, 10), q(1, 2)), (q(9, 10), q(1, 2))]);
        assert_eq!(max_coupling_within(&a, &b, &q(1, 10)), Q::one());
        assert_eq!(max_coupling_within(&a, &b, &q(1, 20)), Q::zero());
    }

    #[test]
    fn measure_labels_round_trip() {
        for m in DistanceMeasure::ALL {
            assert_eq!(DistanceMeasure::parse(m.label()), Some(m));
        }
        assert_eq!(DistanceMeasure::parse("nope"), None);
    }

    #[test]
    fn mixture_distribution_accumulates_components() {
        let c = Cohort::from_members([0, 1]);
        let dist = CohortDistribution::new(
            2,
            CohortSet::Explicit(vec![c]),
            BTreeMap::from([(c, Q::one())]),
        )
        .unwrap();
        let f0 = ScoringFunction::constant(Q::zero());
        let f1 = ScoringFunction::constant(Q::one());
        let d = pipeline_distribution_mixture(&dist, &[(q(1, 4), f0), (q(3, 4), f1)], 0);
        assert_eq!(d.scores.get(&Q::zero()), Some(&q(1, 4)));
        assert_eq!(d.scores.get(&Q::one()), Some(&q(3, 4)));
    }
}
