//! The JSON scenario document: universe, cohort set, mechanism, scoring
//! family and audit options, plus report serialization.
//!
//! All probabilities and scores are written as exact literals: `"1/3"`,
//! `"0.25"` or plain integers.

use std::collections::BTreeMap;

use num::Zero;
use serde::{Deserialize, Serialize};

use crate::audit::{AuditOptions, AuditReport, FamilySpec};
use crate::core::{Cohort, CohortDistribution, CohortSet, QualityProfile, UniverseSpec};
use crate::distances::DistanceMeasure;
use crate::mechanisms::{
    conditioning_mechanism, permute_then_classify, quality_compositional,
    structured_weighted_sampling, uniform_group_law, weighted_sampling, CohortSampler,
    ConditioningSampler, DistributionSampler, PtcSampler, WeightAssignment,
};
use crate::policies::{MappingKind, PolicyDistance};
use crate::rational::{parse_q, qf, render_q, Q};
use crate::scoring::{CatalogPolicy, ScoringFunction};
use crate::{Error, Result};

fn err(path: &str, message: impl Into<String>) -> Error {
    Error::Scenario { path: path.to_string(), message: message.into() }
}

fn rational(text: &str, path: &str) -> Result<Q> {
    parse_q(text).ok_or_else(|| err(path, format!("cannot parse {text:?} as an exact rational")))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseDoc {
    pub individuals: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qualifications: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_groups: Option<QualityGroupsDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityGroupsDoc {
    pub groups: Vec<Vec<String>>,
    pub beta: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum CohortsDoc {
    #[serde(rename = "all_size_k")]
    AllSizeK(usize),
    #[serde(rename = "explicit")]
    Explicit(Vec<Vec<String>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum MechanismDoc {
    #[serde(rename = "explicit")]
    Explicit { probabilities: Vec<CohortProbabilityDoc> },
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "weighted_sampling")]
    WeightedSampling { weights: BTreeMap<String, String> },
    #[serde(rename = "permute_then_classify")]
    PermuteThenClassify { weights: BTreeMap<String, String> },
    #[serde(rename = "conditioning")]
    Conditioning { weights: BTreeMap<String, String> },
    #[serde(rename = "structured_weighted_sampling")]
    StructuredWeightedSampling,
    #[serde(rename = "quality_compositional")]
    QualityCompositional { profiles: Vec<ProfileDoc> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortProbabilityDoc {
    pub cohort: Vec<String>,
    pub probability: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub counts: Vec<usize>,
    pub probability: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum ScoringDoc {
    #[serde(rename = "family")]
    Family(Vec<ScoringFunctionDoc>),
    #[serde(rename = "policy")]
    Policy { delta: String, mapping: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum ScoringFunctionDoc {
    #[serde(rename = "catalog")]
    Catalog(String),
    #[serde(rename = "constant")]
    Constant(String),
    #[serde(rename = "per_individual")]
    PerIndividual(BTreeMap<String, String>),
    #[serde(rename = "table")]
    Table { name: String, values: Vec<TableEntryDoc> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntryDoc {
    pub cohort: Vec<String>,
    pub individual: String,
    pub score: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditDoc {
    #[serde(default = "default_alpha")]
    pub alpha: String,
    #[serde(default)]
    pub measures: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<u64>,
}

fn default_alpha() -> String {
    "1".into()
}

impl Default for AuditDoc {
    fn default() -> Self {
        AuditDoc { alpha: default_alpha(), measures: Vec::new(), seed: 0, monte_carlo: None }
    }
}

/// A complete scenario document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub universe: UniverseDoc,
    pub cohorts: CohortsDoc,
    pub mechanism: MechanismDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scoring: Option<ScoringDoc>,
    #[serde(default)]
    pub audit: AuditDoc,
}

/// A scenario resolved into core types.
pub struct BuiltScenario {
    pub spec: UniverseSpec,
    pub cohort_set: CohortSet,
    pub dist: CohortDistribution,
    pub family: Option<FamilySpec>,
    pub options: AuditOptions,
    pub monte_carlo: Option<u64>,
}

impl ScenarioDocument {
    pub fn parse(text: &str) -> Result<ScenarioDocument> {
        serde_json::from_str(text)
            .map_err(|e| err("$", format!("schema violation: {e}")))
    }

    fn index_of(&self, name: &str, path: &str) -> Result<usize> {
        self.universe
            .individuals
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| err(path, format!("unknown individual {name:?}")))
    }

    fn cohort_of(&self, names: &[String], path: &str) -> Result<Cohort> {
        let mut cohort = Cohort::EMPTY;
        for n in names {
            cohort = cohort.insert(self.index_of(n, path)?);
        }
        Ok(cohort)
    }

    fn weight_vector(&self, weights: &BTreeMap<String, String>, path: &str) -> Result<Vec<Q>> {
        let n = self.universe.individuals.len();
        let mut out = vec![Q::zero(); n];
        let mut seen = vec![false; n];
        for (name, text) in weights {
            let i = self.index_of(name, path)?;
            out[i] = rational(text, path)?;
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(err(
                path,
                format!("missing weight for {:?}", self.universe.individuals[missing]),
            ));
        }
        Ok(out)
    }

    pub fn universe_spec(&self) -> Result<UniverseSpec> {
        let names = self.universe.individuals.clone();
        let n = names.len();
        if n == 0 {
            return Err(err("$.universe.individuals", "universe must be non-empty"));
        }
        if n > 64 {
            return Err(err("$.universe.individuals", "at most 64 individuals supported"));
        }
        let quals = match &self.universe.qualifications {
            Some(map) => {
                let mut out = vec![Q::zero(); n];
                for (name, text) in map {
                    let i = self.index_of(name, "$.universe.qualifications")?;
                    out[i] = rational(text, "$.universe.qualifications")?;
                }
                Some(out)
            }
            None => None,
        };
        let mut spec = match (&self.universe.metric, &quals) {
            (Some(rows), _) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(err("$.universe.metric", format!("metric must be {n}x{n}")));
                }
                let mut metric = vec![vec![Q::zero(); n]; n];
                for (i, row) in rows.iter().enumerate() {
                    for (j, text) in row.iter().enumerate() {
                        metric[i][j] = rational(text, "$.universe.metric")?;
                    }
                }
                let mut s = UniverseSpec::new(names, metric);
                s.qualifications = quals;
                s
            }
            (None, Some(qs)) => UniverseSpec::from_qualifications(names, qs.clone()),
            (None, None) => {
                return Err(err("$.universe", "either metric or qualifications required"))
            }
        };
        if let Some(groups_doc) = &self.universe.quality_groups {
            let mut groups = Vec::new();
            for (gi, group) in groups_doc.groups.iter().enumerate() {
                let mut members = Vec::new();
                for name in group {
                    members.push(self.index_of(name, &format!("$.universe.quality_groups.groups[{gi}]"))?);
                }
                groups.push(members);
            }
            let beta = rational(&groups_doc.beta, "$.universe.quality_groups.beta")?;
            spec = spec.with_quality_groups(groups, beta);
        }
        let violations = spec.validate();
        if !violations.is_empty() {
            return Err(err("$.universe", format!("invalid universe: {violations:?}")));
        }
        Ok(spec)
    }

    pub fn cohort_set(&self) -> Result<CohortSet> {
        let set = match &self.cohorts {
            CohortsDoc::AllSizeK(k) => CohortSet::AllSizeK { k: *k },
            CohortsDoc::Explicit(list) => {
                let mut cohorts = Vec::new();
                for (i, names) in list.iter().enumerate() {
                    cohorts.push(self.cohort_of(names, &format!("$.cohorts.explicit[{i}]"))?);
                }
                CohortSet::Explicit(cohorts)
            }
        };
        set.validate(self.universe.individuals.len())
            .map_err(|e| err("$.cohorts", e.to_string()))?;
        Ok(set)
    }

    pub fn mechanism_law(&self, spec: &UniverseSpec, cohort_set: &CohortSet) -> Result<CohortDistribution> {
        let n = spec.len();
        match &self.mechanism {
            MechanismDoc::Explicit { probabilities } => {
                let mut law = BTreeMap::new();
                for (i, entry) in probabilities.iter().enumerate() {
                    let path = format!("$.mechanism.probabilities[{i}]");
                    let cohort = self.cohort_of(&entry.cohort, &path)?;
                    let p = rational(&entry.probability, &path)?;
                    if !p.is_zero() {
                        *law.entry(cohort).or_insert_with(Q::zero) += p;
                    }
                }
                CohortDistribution::new(n, cohort_set.clone(), law)
            }
            MechanismDoc::Uniform => {
                let cohorts = cohort_set.cohorts(n);
                let dist = CohortDistribution::uniform(n, &cohorts);
                CohortDistribution::new(n, cohort_set.clone(), dist.probabilities)
            }
            MechanismDoc::WeightedSampling { weights } => {
                let k = level(cohort_set, n)?;
                let w = WeightAssignment::unit(self.weight_vector(weights, "$.mechanism.weights")?);
                weighted_sampling(&w, k, n)
            }
            MechanismDoc::PermuteThenClassify { weights } => {
                let k = level(cohort_set, n)?;
                let w = WeightAssignment::unit(self.weight_vector(weights, "$.mechanism.weights")?);
                permute_then_classify(&w, k, n)
            }
            MechanismDoc::Conditioning { weights } => {
                let k = level(cohort_set, n)?;
                let w = WeightAssignment::unit(self.weight_vector(weights, "$.mechanism.weights")?);
                conditioning_mechanism(&w, k, n).map(|(dist, _)| dist)
            }
            MechanismDoc::StructuredWeightedSampling => {
                let cohorts = cohort_set.cohorts(n);
                structured_weighted_sampling(&cohorts, spec).map(|(_, dist)| dist)
            }
            MechanismDoc::QualityCompositional { profiles } => {
                let mut dist_profiles = Vec::new();
                for (i, p) in profiles.iter().enumerate() {
                    let path = format!("$.mechanism.profiles[{i}]");
                    dist_profiles
                        .push((rational(&p.probability, &path)?, QualityProfile(p.counts.clone())));
                }
                let spec_ref = spec.clone();
                quality_compositional(spec, cohort_set, &dist_profiles, &mut |g, c| {
                    uniform_group_law(&spec_ref, g, c)
                })
                .map(|(dist, _)| dist)
            }
        }
    }

    /// A seeded sampler with the mechanism's literal run-time semantics.
    pub fn sampler(
        &self,
        spec: &UniverseSpec,
        cohort_set: &CohortSet,
        dist: &CohortDistribution,
        seed: u64,
    ) -> Result<Box<dyn CohortSampler>> {
        let n = spec.len();
        Ok(match &self.mechanism {
            MechanismDoc::PermuteThenClassify { weights } => {
                let k = level(cohort_set, n)?;
                let w = WeightAssignment::unit(self.weight_vector(weights, "$.mechanism.weights")?);
                Box::new(PtcSampler::new(&w, k, seed))
            }
            MechanismDoc::Conditioning { weights } => {
                let k = level(cohort_set, n)?;
                let w = WeightAssignment::unit(self.weight_vector(weights, "$.mechanism.weights")?);
                Box::new(ConditioningSampler::new(&w, k, seed))
            }
            _ => Box::new(DistributionSampler::new(dist, seed)),
        })
    }

    pub fn scoring_family(
        &self,
        spec: &UniverseSpec,
        cohort_set: &CohortSet,
    ) -> Result<Option<FamilySpec>> {
        let Some(doc) = &self.scoring else { return Ok(None) };
        match doc {
            ScoringDoc::Policy { delta, mapping } => {
                let delta = match delta.as_str() {
                    "interchangeability" => PolicyDistance::Interchangeability,
                    "quality" => PolicyDistance::Quality,
                    other => {
                        return Err(err("$.scoring.policy.delta", format!("unknown policy {other:?}")))
                    }
                };
                let mapping = MappingKind::parse(mapping).ok_or_else(|| {
                    err("$.scoring.policy.mapping", format!("unknown mapping {mapping:?}"))
                })?;
                Ok(Some(FamilySpec::Policy { delta, mapping }))
            }
            ScoringDoc::Family(entries) => {
                let cohorts = cohort_set.cohorts(spec.len());
                let mut family = Vec::new();
                for (i, entry) in entries.iter().enumerate() {
                    let path = format!("$.scoring.family[{i}]");
                    let f = match entry {
                        ScoringFunctionDoc::Catalog(tag) => {
                            let policy = CatalogPolicy::parse(tag)
                                .ok_or_else(|| err(&path, format!("unknown catalog policy {tag:?}")))?;
                            policy.scoring_function(&cohorts, spec)?
                        }
                        ScoringFunctionDoc::Constant(text) => {
                            ScoringFunction::constant(rational(text, &path)?)
                        }
                        ScoringFunctionDoc::PerIndividual(map) => {
                            let g = self.weight_vector(map, &path)?;
                            ScoringFunction::per_individual(format!("per_individual_{i}"), g)
                        }
                        ScoringFunctionDoc::Table { name, values } => {
                            let mut f = ScoringFunction::table(name.clone());
                            for (j, v) in values.iter().enumerate() {
                                let vpath = format!("{path}.values[{j}]");
                                let cohort = self.cohort_of(&v.cohort, &vpath)?;
                                let ind = self.index_of(&v.individual, &vpath)?;
                                if !cohort.contains(ind) {
                                    return Err(err(&vpath, "individual not in cohort"));
                                }
                                f.set(cohort, ind, rational(&v.score, &vpath)?);
                            }
                            f
                        }
                    };
                    family.push(f);
                }
                if family.is_empty() {
                    return Err(err("$.scoring.family", "family must be non-empty"));
                }
                Ok(Some(FamilySpec::Explicit(family)))
            }
        }
    }

    pub fn audit_options(&self) -> Result<AuditOptions> {
        let alpha = rational(&self.audit.alpha, "$.audit.alpha")?;
        let measures = if self.audit.measures.is_empty() {
            DistanceMeasure::ALL.to_vec()
        } else {
            let mut out = Vec::new();
            for (i, m) in self.audit.measures.iter().enumerate() {
                out.push(DistanceMeasure::parse(m).ok_or_else(|| {
                    err(&format!("$.audit.measures[{i}]"), format!("unknown measure {m:?}"))
                })?);
            }
            out
        };
        Ok(AuditOptions { measures, alpha, seed: self.audit.seed, tolerance: 1e-9 })
    }

    /// Resolves the whole document.
    pub fn build(&self) -> Result<BuiltScenario> {
        let spec = self.universe_spec()?;
        let cohort_set = self.cohort_set()?;
        let dist = self.mechanism_law(&spec, &cohort_set)?;
        let family = self.scoring_family(&spec, &cohort_set)?;
        let options = self.audit_options()?;
        Ok(BuiltScenario {
            spec,
            cohort_set,
            dist,
            family,
            options,
            monte_carlo: self.audit.monte_carlo,
        })
    }
}

fn level(cohort_set: &CohortSet, n: usize) -> Result<usize> {
    crate::core::complete_level(cohort_set, n)
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

/// Exact law dump: sorted cohorts with exact and float probabilities.
pub fn law_to_json(dist: &CohortDistribution, spec: &UniverseSpec) -> serde_json::Value {
    let cohorts: Vec<serde_json::Value> = dist
        .probabilities
        .iter()
        .map(|(c, p)| {
            serde_json::json!({
                "cohort": c.members().map(|u| spec.name(u).to_string()).collect::<Vec<_>>(),
                "probability": render_q(p),
                "probability_float": qf(p),
            })
        })
        .collect();
    let marginals: Vec<serde_json::Value> = dist
        .selection_probabilities()
        .iter()
        .enumerate()
        .map(|(u, p)| {
            serde_json::json!({
                "individual": spec.name(u).to_string(),
                "probability": render_q(p),
                "probability_float": qf(p),
            })
        })
        .collect();
    serde_json::json!({ "cohorts": cohorts, "selection_probabilities": marginals })
}

/// One pair's cluster mapping as `{pair, clusters: [[cohort, individual]]}`.
pub fn mapping_to_json(
    mapping: &crate::policies::PairMapping,
    spec: &UniverseSpec,
) -> serde_json::Value {
    let mut clusters: Vec<Vec<serde_json::Value>> = vec![Vec::new(); mapping.n_clusters];
    for ((cohort, individual), label) in mapping.contexts() {
        clusters[label - 1].push(serde_json::json!([
            cohort.members().map(|u| spec.name(u).to_string()).collect::<Vec<_>>(),
            spec.name(individual).to_string(),
        ]));
    }
    serde_json::json!({
        "pair": [spec.name(mapping.u).to_string(), spec.name(mapping.v).to_string()],
        "clusters": clusters,
    })
}

/// Audit report as JSON. Pairs are sorted, rationals rendered exactly.
pub fn report_to_json(report: &AuditReport, spec: &UniverseSpec) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|row| {
            let cells: Vec<serde_json::Value> = row
                .cells
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "measure": c.measure.label(),
                        "distance": render_q(&c.distance),
                        "distance_float": qf(&c.distance),
                        "worst_f": c.worst_f,
                        "ratio": c.ratio.as_ref().map(render_q),
                    })
                })
                .collect();
            serde_json::json!({
                "u": spec.name(row.u).to_string(),
                "v": spec.name(row.v).to_string(),
                "metric": render_q(&row.metric),
                "measures": cells,
            })
        })
        .collect();
    let alpha_star: BTreeMap<String, Option<String>> = report
        .alpha_star
        .iter()
        .map(|(m, a)| (m.to_string(), a.as_ref().map(render_q)))
        .collect();
    let witnesses: Vec<serde_json::Value> = report
        .witnesses
        .iter()
        .map(|w| {
            let mapping = report
                .mappings
                .as_ref()
                .and_then(|ms| ms.get(w.u, w.v))
                .map(|m| mapping_to_json(m, spec))
                .unwrap_or(serde_json::Value::Null);
            serde_json::json!({
                "u": spec.name(w.u).to_string(),
                "v": spec.name(w.v).to_string(),
                "measure": w.measure.label(),
                "f": w.f_name,
                "distance": render_q(&w.distance),
                "metric": render_q(&w.metric),
                "sub_universe": w.sub_universe.iter().map(|&u| spec.name(u).to_string()).collect::<Vec<_>>(),
                "mapping": mapping,
            })
        })
        .collect();
    let notion = |r: &Option<crate::policies::NotionReport>| -> serde_json::Value {
        match r {
            None => serde_json::Value::Null,
            Some(r) => serde_json::json!({
                "satisfied": r.satisfied,
                "worst": r.worst.as_ref().map(|p| serde_json::json!({
                    "u": spec.name(p.u).to_string(),
                    "v": spec.name(p.v).to_string(),
                    "tv": render_q(&p.tv),
                    "bound": render_q(&p.bound),
                })),
                "warnings": r.warnings,
            }),
        }
    };
    serde_json::json!({
        "alpha": render_q(&report.alpha),
        "robust": report.robust,
        "alpha_star": alpha_star,
        "pairs": rows,
        "notion1": notion(&report.notion1),
        "notion2": notion(&report.notion2),
        "witnesses": witnesses,
        "warnings": report.warnings,
        "findings": report.findings,
        "seed": report.seed,
        "tolerance": report.tolerance,
    })
}

/// Audit report as a fixed-width text table.
pub fn report_to_table(report: &AuditReport, spec: &UniverseSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "robustness audit (alpha = {}, seed = {})\n",
        render_q(&report.alpha),
        report.seed
    ));
    out.push_str(&format!(
        "{:<8}{:<8}{:<10}{:<12}{:<14}{:<10}{}\n",
        "u", "v", "D(u,v)", "measure", "distance", "ratio", "worst f"
    ));
    for row in &report.rows {
        for cell in &row.cells {
            out.push_str(&format!(
                "{:<8}{:<8}{:<10}{:<12}{:<14}{:<10}{}\n",
                spec.name(row.u),
                spec.name(row.v),
                render_q(&row.metric),
                cell.measure.label(),
                format!("{:.6}", qf(&cell.distance)),
                match (&cell.ratio, cell.distance.is_zero()) {
                    (Some(r), _) => format!("{:.4}", qf(r)),
                    (None, true) => "0".into(),
                    (None, false) => "inf".into(),
                },
                cell.worst_f,
            ));
        }
    }
    for (measure, alpha) in &report.alpha_star {
        out.push_str(&format!(
            "alpha* [{measure}] = {}\n",
            alpha.as_ref().map(render_q).unwrap_or_else(|| "unbounded".into())
        ));
    }
    out.push_str(&format!("robust at alpha: {}\n", report.robust));
    for w in &report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use num::One;

    const IMPOSSIBILITY_JSON: &str = r#"{
      "universe": {
        "individuals": ["a", "b", "c"],
        "metric": [["0","0","0"],["0","0","0"],["0","0","0"]]
      },
      "cohorts": {"explicit": [["a","b"],["a","c"],["b","c"]]},
      "mechanism": {"kind": "uniform"},
      "scoring": {"family": [{"table": {"name": "f", "values": [
        {"cohort": ["a","b"], "individual": "a", "score": "0"},
        {"cohort": ["a","b"], "individual": "b", "score": "0"},
        {"cohort": ["a","c"], "individual": "a", "score": "1"},
        {"cohort": ["a","c"], "individual": "c", "score": "1"},
        {"cohort": ["b","c"], "individual": "b", "score": "1/2"},
        {"cohort": ["b","c"], "individual": "c", "score": "1/2"}
      ]}}]},
      "audit": {"alpha": "10", "seed": 7}
    }"#;

    #[test]
    fn parses_and_builds_the_impossibility_scenario() {
        let doc = ScenarioDocument::parse(IMPOSSIBILITY_JSON).unwrap();
        let built = doc.build().unwrap();
        assert_eq!(built.dist.probabilities.len(), 3);
        for p in built.dist.probabilities.values() {
            assert_eq!(*p, q(1, 3));
        }
        let report = crate::audit::audit_robustness(
            &built.dist,
            built.family.as_ref().unwrap(),
            &built.spec,
            &built.options,
        )
        .unwrap();
        assert!(!report.robust);
        let json = report_to_json(&report, &built.spec);
        // Emitted reports re-parse as JSON.
        let text = serde_json::to_string_pretty(&json).unwrap();
        let _: serde_json::Value = serde_json::from_str(&text).unwrap();
        let table = report_to_table(&report, &built.spec);
        assert!(table.contains("alpha*"));
    }

    #[test]
    fn schema_rejects_unknown_fields_and_bad_references() {
        let bad = r#"{"universe": {"individuals": ["a"], "metric": [["0"]]},
                      "cohorts": {"all_size_k": 1},
                      "mechanism": {"kind": "uniform"},
                      "unknown_field": 1}"#;
        assert!(ScenarioDocument::parse(bad).is_err());

        let bad_ref = r#"{"universe": {"individuals": ["a","b"], "metric": [["0","1"],["1","0"]]},
                      "cohorts": {"explicit": [["a","z"]]},
                      "mechanism": {"kind": "uniform"}}"#;
        let doc = ScenarioDocument::parse(bad_ref).unwrap();
        match doc.build() {
            Err(Error::Scenario { .. }) => {}
            Err(other) => panic!("expected scenario error, got {other}"),
            Ok(_) => panic!("expected scenario error"),
        }
    }

    #[test]
    fn mechanism_kinds_build() {
        for kind in [
            r#"{"kind": "weighted_sampling", "weights": {"a": "1/2", "b": "1/2", "c": "1/4"}}"#,
            r#"{"kind": "permute_then_classify", "weights": {"a": "1/2", "b": "1/2", "c": "1/4"}}"#,
            r#"{"kind": "conditioning", "weights": {"a": "1/2", "b": "1/2", "c": "1/4"}}"#,
        ] {
            let text = format!(
                r#"{{"universe": {{"individuals": ["a","b","c"],
                                   "metric": [["0","1","1"],["1","0","1"],["1","1","0"]]}},
                     "cohorts": {{"all_size_k": 2}},
                     "mechanism": {kind}}}"#
            );
            let doc = ScenarioDocument::parse(&text).unwrap();
            let built = doc.build().unwrap();
            let total: Q = built.dist.probabilities.values().cloned().sum();
            assert!(total.is_one(), "{kind}");
            let mut sampler = doc.sampler(&built.spec, &built.cohort_set, &built.dist, 3).unwrap();
            assert_eq!(sampler.sample().unwrap().len(), 2);
        }
    }

    #[test]
    fn structured_and_compositional_mechanisms_build() {
        let structured = r#"{
          "universe": {"individuals": ["a","b","c","d"],
                        "metric": [["0","1","1","1"],["1","0","1","1"],
                                    ["1","1","0","1"],["1","1","1","0"]]},
          "cohorts": {"explicit": [["a","b"],["c","d"],["a","c"],["b","d"]]},
          "mechanism": {"kind": "structured_weighted_sampling"}
        }"#;
        let built = ScenarioDocument::parse(structured).unwrap().build().unwrap();
        assert!(built.dist.probabilities.values().cloned().sum::<Q>().is_one());

        let compositional = r#"{
          "universe": {"individuals": ["a","b","c","d"],
                        "metric": [["0","0","1","1"],["0","0","1","1"],
                                    ["1","1","0","0"],["1","1","0","0"]],
                        "quality_groups": {"groups": [["a","b"],["c","d"]], "beta": "0"}},
          "cohorts": {"all_size_k": 2},
          "mechanism": {"kind": "quality_compositional",
                        "profiles": [{"counts": [1, 1], "probability": "1"}]}
        }"#;
        let built = ScenarioDocument::parse(compositional).unwrap().build().unwrap();
        assert_eq!(built.dist.probabilities.len(), 4);
        for p in built.dist.probabilities.values() {
            assert_eq!(*p, q(1, 4));
        }
    }

    #[test]
    fn qualification_universe_and_catalog_family() {
        let text = r#"{
          "universe": {
            "individuals": ["a", "b", "c", "d"],
            "qualifications": {"a": "0.8", "b": "0.7", "c": "0.5", "d": "0.2"}
          },
          "cohorts": {"all_size_k": 2},
          "mechanism": {"kind": "uniform"},
          "scoring": {"family": [{"catalog": "fixed_bonus_pool"}, {"catalog": "equal_treatment"}]},
          "audit": {"alpha": "1", "measures": ["uncond-e", "cond-e"]}
        }"#;
        let doc = ScenarioDocument::parse(text).unwrap();
        let built = doc.build().unwrap();
        assert_eq!(built.options.measures.len(), 2);
        assert!(built.family.is_some());
    }

    #[test]
    fn roundtrip_document_serialization() {
        let doc = ScenarioDocument::parse(IMPOSSIBILITY_JSON).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        let again = ScenarioDocument::parse(&text).unwrap();
        assert_eq!(format!("{doc:?}"), format!("{again:?}"));
    }
}
