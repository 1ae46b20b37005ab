//! Multi-seed experiment campaigns and their reports.
//!
//! CSV layout, one row per trial followed by one `aggregate` row per run
//! (plus `best` and `worst` rows when every objective choice was tried):
//!
//! | column | trial rows | summary rows |
//! |---|---|---|
//! | `kind` | `trial` | `aggregate`, `best` or `worst` |
//! | `algorithm` | `cmaes` or `mcr` | same |
//! | `objective` | objective conjunct (mcr only) | same |
//! | `seed` | seed | empty |
//! | `outcome` | trial outcome | empty |
//! | `time_s` | wall time | empty |
//! | `simulations`, `generations` | counts | empty |
//! | `best_robustness` | min over conjuncts of the best input | empty |
//! | `conjunct_robustness` | `;`-separated per-conjunct values | empty |
//! | `successes`, `trials` | empty | success count, trial count |
//! | `mean_time_s` | empty | mean time of successful trials, `---` if none |
//!
//! Infinite robustness values are written `inf` / `-inf` in both formats.

use std::cmp::Ordering;
use std::io::Write;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::Scenario;
use crate::synthesis::{synthesize, Algorithm, Evaluator, Outcome, Progress, SynthesisConfig, SynthesisError, SynthesisProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignAlgorithm {
    Cmaes,
    Mcr,
    /// MCR once per choice of objective conjunct.
    McrAll,
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub scenario: Scenario,
    pub algorithm: CampaignAlgorithm,
    /// 1-based objective conjunct for `Mcr`.
    pub objective: usize,
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub timeout: Duration,
    pub lambda: Option<usize>,
    /// Run trials concurrently.
    pub parallel: bool,
}

impl Campaign {
    pub fn new(scenario: Scenario, algorithm: CampaignAlgorithm) -> Self {
        let budget = scenario.budget;
        Campaign {
            scenario,
            algorithm,
            objective: 1,
            seeds: (1..=20).collect(),
            budget,
            timeout: Duration::from_secs(600),
            lambda: None,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialOutcome {
    Satisfied,
    FailureBudget,
    FailureTimeout,
    FailureStationary,
    /// The model or monitor raised an error.
    FailureError,
}

impl From<Outcome> for TrialOutcome {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Satisfied => TrialOutcome::Satisfied,
            Outcome::FailureBudget => TrialOutcome::FailureBudget,
            Outcome::FailureTimeout => TrialOutcome::FailureTimeout,
            Outcome::FailureStationary => TrialOutcome::FailureStationary,
        }
    }
}

impl TrialOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialOutcome::Satisfied => "satisfied",
            TrialOutcome::FailureBudget => "failure-budget",
            TrialOutcome::FailureTimeout => "failure-timeout",
            TrialOutcome::FailureStationary => "failure-stationary",
            TrialOutcome::FailureError => "failure-error",
        }
    }
}

/// Serializes non-finite floats as the strings `inf`, `-inf`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn decode<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(E::custom(format!("expected a number, `inf` or `-inf`, got `{s}`"))),
            },
        }
    }

    fn encode<S: Serializer>(v: f64, s: S) -> Result<S::Ok, S::Error> {
        if v == f64::INFINITY {
            s.serialize_str("inf")
        } else if v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(v)
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        encode(*v, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        decode(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            struct Item(f64);
            impl serde::Serialize for Item {
                fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                    encode(self.0, s)
                }
            }
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for &x in v {
                seq.serialize_element(&Item(x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(decode).collect()
        }
    }
}

fn format_float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub outcome: TrialOutcome,
    /// Wall time in seconds.
    pub time: f64,
    pub simulations: usize,
    pub generations: usize,
    #[serde(with = "extended_float")]
    pub best_robustness: f64,
    #[serde(with = "extended_float::vec")]
    pub conjunct_robustness: Vec<f64>,
    pub best_input: Option<Vec<f64>>,
    pub error: Option<String>,
}

/// All trials of one algorithm and objective choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    /// Objective conjunct (1-based) for MCR runs.
    pub objective: Option<usize>,
    /// The objective conjunct as text.
    pub objective_formula: Option<String>,
    pub trials: Vec<TrialRecord>,
    /// Number of satisfied trials.
    pub successes: usize,
    /// Mean wall time of the satisfied trials; `None` when there are none.
    pub mean_time: Option<f64>,
}

impl RunReport {
    pub fn from_trials(
        algorithm: Algorithm,
        objective: Option<usize>,
        objective_formula: Option<String>,
        trials: Vec<TrialRecord>,
    ) -> Self {
        let times: Vec<f64> = trials
            .iter()
            .filter(|t| t.outcome == TrialOutcome::Satisfied)
            .map(|t| t.time)
            .collect();
        let mean_time = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
        RunReport {
            algorithm,
            objective,
            objective_formula,
            successes: times.len(),
            mean_time,
            trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub scenario: String,
    pub spec: String,
    pub algorithm: CampaignAlgorithm,
    pub budget: usize,
    pub timeout: f64,
    pub lambda: Option<usize>,
    pub runs: Vec<RunReport>,
    /// Indices into `runs` of the best and worst objective choice.
    pub best: Option<usize>,
    pub worst: Option<usize>,
}

impl CampaignReport {
    /// Successes of the best run (the only run unless objectives were compared).
    pub fn headline_successes(&self) -> usize {
        self.runs.get(self.best.unwrap_or(0)).map_or(0, |r| r.successes)
    }

    /// Copy with every wall-time field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> CampaignReport {
        let mut r = self.clone();
        for run in &mut r.runs {
            run.mean_time = run.mean_time.map(|_| 0.0);
            for t in &mut run.trials {
                t.time = 0.0;
            }
        }
        r
    }
}

/// Per-generation progress of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialProgress {
    pub seed: u64,
    pub objective: Option<usize>,
    pub generation: usize,
    pub best_robustness: f64,
    pub best_conjuncts: Vec<f64>,
    pub simulations: usize,
}

fn compare_runs(a: &RunReport, b: &RunReport) -> Ordering {
    b.successes.cmp(&a.successes).then_with(|| match (a.mean_time, b.mean_time) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => Ordering::Equal,
    })
}

/// Indices of the best and worst run: more successes first, then shorter mean time.
/// Ties go to the earlier run.
pub fn best_worst_objective(reports: &[RunReport]) -> Option<(usize, usize)> {
    if reports.is_empty() {
        return None;
    }
    let mut best = 0;
    let mut worst = 0;
    for i in 1..reports.len() {
        if compare_runs(&reports[i], &reports[best]) == Ordering::Less {
            best = i;
        }
        if compare_runs(&reports[i], &reports[worst]) == Ordering::Greater {
            worst = i;
        }
    }
    Some((best, worst))
}

pub fn run_campaign(campaign: &Campaign) -> Result<CampaignReport, SynthesisError> {
    run_campaign_with_progress(campaign, &|_| {})
}

/// Configuration problems abort before any trial runs; errors inside a trial
/// are recorded as `failure-error` and the campaign continues.
pub fn run_campaign_with_progress(
    campaign: &Campaign,
    progress: &(dyn Fn(&TrialProgress) + Sync),
) -> Result<CampaignReport, SynthesisError> {
    if campaign.seeds.is_empty() {
        return Err(SynthesisError::Config("empty seed list".into()));
    }
    let problem = Arc::new(SynthesisProblem::from_scenario(&campaign.scenario)?);
    let m = problem.conjuncts().len();
    let runs: Vec<(Algorithm, Option<usize>)> = match campaign.algorithm {
        CampaignAlgorithm::Cmaes => vec![(Algorithm::Cmaes, None)],
        CampaignAlgorithm::Mcr => vec![(Algorithm::Mcr, Some(campaign.objective))],
        CampaignAlgorithm::McrAll => (1..=m).map(|k| (Algorithm::Mcr, Some(k))).collect(),
    };
    let base = SynthesisConfig {
        problem: problem.clone(),
        objective: 1,
        lambda: campaign.lambda,
        budget: campaign.budget,
        timeout: campaign.timeout,
        seed: 0,
        parallel: false,
    };
    for &(_, objective) in &runs {
        SynthesisConfig {
            objective: objective.unwrap_or(1),
            ..base.clone()
        }
        .validate()?;
    }
    crate::cmaes::Cmaes::new(&problem.input_spec().bounds(), campaign.lambda, 0)?;

    let mut reports = Vec::new();
    for (algorithm, objective) in runs {
        let trial = |seed: u64| {
            let cfg = SynthesisConfig {
                objective: objective.unwrap_or(1),
                seed,
                ..base.clone()
            };
            let mut observe = |p: &Progress| {
                progress(&TrialProgress {
                    seed,
                    objective,
                    generation: p.generation,
                    best_robustness: p.best_robustness,
                    best_conjuncts: p.best_conjuncts.to_vec(),
                    simulations: p.simulations,
                })
            };
            let start = std::time::Instant::now();
            match synthesize(algorithm, &cfg, &mut observe) {
                Ok(r) => TrialRecord {
                    seed,
                    outcome: r.outcome.into(),
                    time: r.elapsed.as_secs_f64(),
                    simulations: r.simulations,
                    generations: r.generations,
                    best_robustness: r.best_robustness,
                    conjunct_robustness: r.best_conjuncts,
                    best_input: r.best_input.map(|x| x.0),
                    error: None,
                },
                Err(e) => TrialRecord {
                    seed,
                    outcome: TrialOutcome::FailureError,
                    time: start.elapsed().as_secs_f64(),
                    simulations: 0,
                    generations: 0,
                    best_robustness: f64::NEG_INFINITY,
                    conjunct_robustness: Vec::new(),
                    best_input: None,
                    error: Some(e.to_string()),
                },
            }
        };
        let trials: Vec<TrialRecord> = if campaign.parallel {
            campaign.seeds.par_iter().map(|&s| trial(s)).collect()
        } else {
            campaign.seeds.iter().map(|&s| trial(s)).collect()
        };
        let formula = objective.map(|k| problem.conjuncts()[k - 1].to_string());
        reports.push(RunReport::from_trials(algorithm, objective, formula, trials));
    }
    let (best, worst) = match campaign.algorithm {
        CampaignAlgorithm::McrAll => best_worst_objective(&reports).unzip(),
        _ => (None, None),
    };
    Ok(CampaignReport {
        scenario: campaign.scenario.name.clone(),
        spec: campaign.scenario.spec.clone(),
        algorithm: campaign.algorithm,
        budget: campaign.budget,
        timeout: campaign.timeout.as_secs_f64(),
        lambda: campaign.lambda,
        runs: reports,
        best,
        worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

const CSV_HEADER: [&str; 13] = [
    "kind",
    "algorithm",
    "objective",
    "seed",
    "outcome",
    "time_s",
    "simulations",
    "generations",
    "best_robustness",
    "conjunct_robustness",
    "successes",
    "trials",
    "mean_time_s",
];

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Cmaes => "cmaes",
        Algorithm::Mcr => "mcr",
    }
}

fn summary_row(kind: &str, run: &RunReport) -> Vec<String> {
    let mut row = vec![
        kind.to_string(),
        algorithm_name(run.algorithm).into(),
        run.objective.map(|k| k.to_string()).unwrap_or_default(),
    ];
    row.extend(std::iter::repeat_n(String::new(), 7));
    row.push(run.successes.to_string());
    row.push(run.trials.len().to_string());
    row.push(run.mean_time.map_or("---".into(), |t| t.to_string()));
    row
}

pub fn write_csv<W: Write>(report: &CampaignReport, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for run in &report.runs {
        for t in &run.trials {
            let conj: Vec<String> = t.conjunct_robustness.iter().map(|&v| format_float(v)).collect();
            w.write_record([
                "trial".to_string(),
                algorithm_name(run.algorithm).into(),
                run.objective.map(|k| k.to_string()).unwrap_or_default(),
                t.seed.to_string(),
                t.outcome.as_str().into(),
                t.time.to_string(),
                t.simulations.to_string(),
                t.generations.to_string(),
                format_float(t.best_robustness),
                conj.join(";"),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        w.write_record(summary_row("aggregate", run))?;
    }
    if let (Some(b), Some(wst)) = (report.best, report.worst) {
        w.write_record(summary_row("best", &report.runs[b]))?;
        w.write_record(summary_row("worst", &report.runs[wst]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report<W: Write>(report: &CampaignReport, format: ReportFormat, mut out: W) -> std::io::Result<()> {
    match format {
        ReportFormat::Csv => write_csv(report, out).map_err(std::io::Error::other),
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)
        }
    }
}
