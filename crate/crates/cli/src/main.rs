//! Command-line front end: scenario ingestion, mechanism simulation,
//! robustness audits, canned reproductions and report emission.
//!
//! Exit codes: 0 pass, 1 audit/golden failure, 2 usage or parse error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fairpipe::audit::{audit_robustness, monte_carlo_estimate, reproduce_scenario, SCENARIO_NAMES};
use fairpipe::distances::{mmd, DistanceMeasure, ScorePmf};
use fairpipe::rational::{parse_q, qf, render_q};
use fairpipe::scenario::{law_to_json, report_to_json, report_to_table, ScenarioDocument};

#[derive(Parser)]
#[command(
    name = "fairpipe",
    about = "Simulate individually fair cohort-selection pipelines and audit their robustness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Dump a mechanism's exact law, or draw seeded samples from it.
    Simulate {
        scenario: PathBuf,
        /// Seed for samplers; also recorded in reports.
        #[arg(long)]
        seed: Option<u64>,
        /// Emit the exact distribution (default).
        #[arg(long, conflicts_with = "montecarlo")]
        exact: bool,
        /// Draw this many samples instead of dumping the exact law.
        #[arg(long)]
        montecarlo: Option<u64>,
        #[arg(long, value_enum, default_value = "json")]
        out: OutputFormat,
    },
    /// Run the robustness audit described by a scenario file.
    Audit {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Robustness target α (overrides the scenario file).
        #[arg(long)]
        alpha: Option<String>,
        /// Comma-separated subset of cond-e,uncond-e,cond-mmd,uncond-mmd.
        #[arg(long, value_delimiter = ',')]
        measures: Vec<String>,
        #[arg(long, value_enum, default_value = "table")]
        out: OutputFormat,
    },
    /// Compute the mass-moving distance between two inline pmfs
    /// ("value:mass,value:mass", exact rationals).
    Mmd {
        #[arg(long)]
        g1: String,
        #[arg(long)]
        g2: String,
    },
    /// Re-run a canned counterexample scenario and check its golden values.
    Reproduce {
        /// One of: impossibility, ws-counterexample, packing, splitting,
        /// adversarial-ranking, bonus-tables, or "all".
        name: String,
    },
    /// Validate a scenario file against the schema and cross-references.
    Validate { scenario: PathBuf },
}

fn read_scenario(path: &PathBuf) -> Result<ScenarioDocument, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ScenarioDocument::parse(&text).map_err(|e| e.to_string())
}

fn parse_pmf(text: &str, flag: &str) -> Result<ScorePmf, String> {
    let mut pmf = ScorePmf::new();
    for part in text.split(',') {
        let (value, mass) = part
            .split_once(':')
            .ok_or_else(|| format!("{flag}: expected value:mass, got {part:?}"))?;
        let value = parse_q(value).ok_or_else(|| format!("{flag}: bad value {value:?}"))?;
        let mass = parse_q(mass).ok_or_else(|| format!("{flag}: bad mass {mass:?}"))?;
        pmf.add(value, mass);
    }
    if !pmf.is_probability() {
        return Err(format!("{flag}: masses must sum to 1"));
    }
    Ok(pmf)
}

fn run() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { scenario, seed, exact: _, montecarlo, out } => {
            let mut doc = read_scenario(&scenario)?;
            if let Some(seed) = seed {
                doc.audit.seed = seed;
            }
            let built = doc.build().map_err(|e| e.to_string())?;
            let draws = montecarlo.or(built.monte_carlo);
            match draws {
                None => match out {
                    OutputFormat::Json => {
                        let json = law_to_json(&built.dist, &built.spec);
                        println!("{}", serde_json::to_string_pretty(&json).unwrap());
                    }
                    OutputFormat::Table => {
                        for (c, p) in &built.dist.probabilities {
                            let names: Vec<&str> =
                                c.members().map(|u| built.spec.name(u)).collect();
                            println!("{:<30} {:<12} {:.6}", names.join(","), render_q(p), qf(p));
                        }
                    }
                },
                Some(n) => {
                    let mut sampler = doc
                        .sampler(&built.spec, &built.cohort_set, &built.dist, built.options.seed)
                        .map_err(|e| e.to_string())?;
                    let mut samples = Vec::with_capacity(n as usize);
                    for _ in 0..n {
                        let c = sampler.sample().map_err(|e| e.to_string())?;
                        let names: Vec<String> =
                            c.members().map(|u| built.spec.name(u).to_string()).collect();
                        samples.push(names);
                    }
                    match out {
                        OutputFormat::Json => {
                            let json = serde_json::json!({
                                "seed": built.options.seed,
                                "draws": n,
                                "samples": samples,
                            });
                            println!("{}", serde_json::to_string_pretty(&json).unwrap());
                        }
                        OutputFormat::Table => {
                            for s in samples {
                                println!("{}", s.join(","));
                            }
                        }
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { scenario, seed, alpha, measures, out } => {
            let mut doc = read_scenario(&scenario)?;
            if let Some(seed) = seed {
                doc.audit.seed = seed;
            }
            if let Some(alpha) = alpha {
                doc.audit.alpha = alpha;
            }
            if !measures.is_empty() {
                for m in &measures {
                    if DistanceMeasure::parse(m).is_none() {
                        return Err(format!("unknown measure {m:?}"));
                    }
                }
                doc.audit.measures = measures;
            }
            let built = doc.build().map_err(|e| e.to_string())?;
            let family = built
                .family
                .as_ref()
                .ok_or_else(|| "audit requires a scoring section".to_string())?;
            let report = audit_robustness(&built.dist, family, &built.spec, &built.options)
                .map_err(|e| e.to_string())?;
            match out {
                OutputFormat::Json => {
                    let json = report_to_json(&report, &built.spec);
                    println!("{}", serde_json::to_string_pretty(&json).unwrap());
                }
                OutputFormat::Table => print!("{}", report_to_table(&report, &built.spec)),
            }
            // Per-atom Monte Carlo check is advisory output only.
            if let Some(n) = built.monte_carlo {
                if let fairpipe::audit::FamilySpec::Explicit(fs) = family {
                    if let Some(f) = fs.first() {
                        let mut sampler = doc
                            .sampler(&built.spec, &built.cohort_set, &built.dist, built.options.seed)
                            .map_err(|e| e.to_string())?;
                        let estimate = monte_carlo_estimate(&mut sampler, f, 0, n)
                            .map_err(|e| e.to_string())?;
                        eprintln!(
                            "monte carlo ({} draws, seed {}): bot frequency {:.6} ± {:.6}",
                            n, built.options.seed, estimate.bot.1, estimate.bot.2
                        );
                    }
                }
            }
            Ok(if report.robust { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Mmd { g1, g2 } => {
            let a = parse_pmf(&g1, "--g1")?;
            let b = parse_pmf(&g2, "--g2")?;
            let d = mmd(&a, &b);
            println!("{} ({:.9})", render_q(&d), qf(&d));
            Ok(ExitCode::SUCCESS)
        }
        Command::Reproduce { name } => {
            let names: Vec<&str> = if name == "all" {
                SCENARIO_NAMES.to_vec()
            } else {
                vec![name.as_str()]
            };
            let mut all_passed = true;
            for n in names {
                let report = reproduce_scenario(n).map_err(|e| e.to_string())?;
                for a in &report.assertions {
                    let status = if a.passed { "PASS" } else { "FAIL" };
                    if a.detail.is_empty() {
                        println!("[{status}] {}: {}", report.name, a.label);
                    } else {
                        println!("[{status}] {}: {} ({})", report.name, a.label, a.detail);
                    }
                }
                all_passed &= report.passed();
            }
            Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Validate { scenario } => {
            let doc = read_scenario(&scenario)?;
            doc.build().map_err(|e| e.to_string())?;
            println!("ok");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
