//! Search drivers: plain CMA-ES on the min-aggregated robustness of the
//! conjunction, and CMA-ES whose selection uses multiple constraint ranking.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmaes::{Cmaes, CmaesError, Population};
use crate::mcr::{self, EvaluatedIndividual, McrError};
use crate::models::{ModelError, Scenario, SystemModel};
use crate::signals::{DecisionVector, InputSpec, SignalError};
use crate::stl::{parse_formula, Formula, Monitor, StlError, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cmaes(#[from] CmaesError),
    #[error(transparent)]
    Mcr(#[from] McrError),
    #[error("generation {generation}: {source}")]
    Evaluation {
        generation: usize,
        #[source]
        source: Box<SynthesisError>,
    },
}

/// Maps a decision vector to the robustness of each top-level conjunct.
pub trait Evaluator: Send + Sync {
    fn input_spec(&self) -> &InputSpec;

    fn conjunct_count(&self) -> usize;

    fn evaluate(&self, x: &DecisionVector) -> Result<Vec<f64>, SynthesisError>;
}

/// A model, its input parameterization and a requirement split into conjuncts.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    model: Arc<dyn SystemModel>,
    input: InputSpec,
    formula: Formula,
    conjuncts: Vec<Formula>,
    monitors: Vec<Monitor>,
}

impl SynthesisProblem {
    /// Formulas may mention both the model's outputs and its inputs.
    pub fn new(model: Arc<dyn SystemModel>, input: InputSpec, spec: &str) -> Result<Self, SynthesisError> {
        input.validate()?;
        let defaults = model.input_spec();
        if input.names() != defaults.names() {
            return Err(SynthesisError::Config(format!(
                "model `{}` expects inputs {:?}",
                model.name(),
                defaults.names()
            )));
        }
        let formula = parse_formula(spec)?;
        let mut variables = input.names();
        for o in model.outputs() {
            if variables.contains(&o) {
                return Err(SynthesisError::Config(format!("output `{o}` shadows an input")));
            }
            variables.push(o);
        }
        let conjuncts = formula.top_level_conjuncts();
        let monitors = conjuncts
            .iter()
            .map(|c| Monitor::new(c, &variables))
            .collect::<Result<_, _>>()?;
        Ok(SynthesisProblem {
            model,
            input,
            formula,
            conjuncts,
            monitors,
        })
    }

    pub fn from_scenario(s: &Scenario) -> Result<Self, SynthesisError> {
        Self::new(s.model.clone(), s.input.clone(), &s.spec)
    }

    pub fn model(&self) -> &Arc<dyn SystemModel> {
        &self.model
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn conjuncts(&self) -> &[Formula] {
        &self.conjuncts
    }

    /// Input signal stacked with the simulated outputs.
    pub fn run(&self, x: &DecisionVector) -> Result<Trace, SynthesisError> {
        let input = self.input.gen_signal(x)?;
        let output = self.model.simulate(&input)?;
        Ok(input.merge(&output)?)
    }
}

impl Evaluator for SynthesisProblem {
    fn input_spec(&self) -> &InputSpec {
        &self.input
    }

    fn conjunct_count(&self) -> usize {
        self.conjuncts.len()
    }

    fn evaluate(&self, x: &DecisionVector) -> Result<Vec<f64>, SynthesisError> {
        let trace = self.run(x)?;
        self.monitors
            .iter()
            .map(|m| Ok(m.robustness(&trace, 0)?.value()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Cmaes,
    Mcr,
}

#[derive(Clone)]
pub struct SynthesisConfig {
    pub problem: Arc<dyn Evaluator>,
    /// 1-based index of the conjunct used as the MCR objective.
    pub objective: usize,
    pub lambda: Option<usize>,
    /// Maximum number of simulations.
    pub budget: usize,
    pub timeout: Duration,
    pub seed: u64,
    /// Evaluate each generation on the rayon pool.
    pub parallel: bool,
}

impl std::fmt::Debug for SynthesisConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SynthesisConfig")
            .field("conjuncts", &self.problem.conjunct_count())
            .field("objective", &self.objective)
            .field("lambda", &self.lambda)
            .field("budget", &self.budget)
            .field("timeout", &self.timeout)
            .field("seed", &self.seed)
            .finish()
    }
}

impl SynthesisConfig {
    pub fn new(problem: Arc<dyn Evaluator>, budget: usize, seed: u64) -> Self {
        SynthesisConfig {
            problem,
            objective: 1,
            lambda: None,
            budget,
            timeout: Duration::from_secs(600),
            seed,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let m = self.problem.conjunct_count();
        if m == 0 {
            return Err(SynthesisError::Config("no conjuncts".into()));
        }
        if self.objective == 0 || self.objective > m {
            return Err(SynthesisError::Config(format!(
                "objective conjunct {} out of range 1..={m}",
                self.objective
            )));
        }
        if self.timeout.is_zero() {
            return Err(SynthesisError::Config("timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Satisfied,
    FailureBudget,
    FailureTimeout,
    FailureStationary,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::Satisfied
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub outcome: Outcome,
    /// Best individual by min-aggregated robustness; `None` if nothing was simulated.
    pub best_input: Option<DecisionVector>,
    pub best_signal: Option<Trace>,
    /// `-inf` if nothing was simulated.
    pub best_robustness: f64,
    pub best_conjuncts: Vec<f64>,
    pub simulations: usize,
    pub generations: usize,
    pub elapsed: Duration,
}

/// Snapshot handed to the observer after every generation.
#[derive(Debug)]
pub struct Progress<'a> {
    /// 1-based.
    pub generation: usize,
    pub simulations: usize,
    pub best_robustness: f64,
    pub best_conjuncts: &'a [f64],
    /// As sampled, before ranking.
    pub population: &'a Population,
    /// Per-individual conjunct robustness, in population order.
    pub robustness: &'a [Vec<f64>],
    /// Population indices, fittest first, as passed to the optimizer.
    pub ranking: &'a [usize],
}

fn min_of(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Fittest-first order by min-aggregated robustness, ties by index.
pub fn rank_by_min(rows: &[Vec<f64>]) -> Vec<usize> {
    let mins: Vec<f64> = rows.iter().map(|r| min_of(r)).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| mins[b].total_cmp(&mins[a]));
    order
}

/// Fittest-first order by MCR score with conjunct `objective` (1-based) as the objective.
pub fn rank_by_mcr(population: &Population, rows: &[Vec<f64>], objective: usize) -> Result<Vec<usize>, McrError> {
    let k = objective - 1;
    let evaluated: Vec<EvaluatedIndividual> = population
        .individuals
        .iter()
        .zip(rows)
        .map(|(x, row)| {
            let constraints = row.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v).collect();
            EvaluatedIndividual::new(x.clone(), row[k], constraints)
        })
        .collect();
    mcr::selection_order(&evaluated)
}

pub fn cmaes_synthesize(config: &SynthesisConfig) -> Result<SynthesisResult, SynthesisError> {
    synthesize(Algorithm::Cmaes, config, &mut |_| {})
}

pub fn mcr_synthesize(config: &SynthesisConfig) -> Result<SynthesisResult, SynthesisError> {
    synthesize(Algorithm::Mcr, config, &mut |_| {})
}

/// Runs the search loop until a satisfying input is found, the budget or
/// timeout runs out, or the optimizer stagnates.
///
/// Under MCR the stagnation test watches the conjunct robustness vector of the
/// top-ranked individual, which is unaffected by rescaling a conjunct.
pub fn synthesize(
    algorithm: Algorithm,
    config: &SynthesisConfig,
    observer: &mut dyn FnMut(&Progress),
) -> Result<SynthesisResult, SynthesisError> {
    config.validate()?;
    let start = Instant::now();
    let problem = config.problem.as_ref();
    let spec = problem.input_spec();
    let mut es = Cmaes::new(&spec.bounds(), config.lambda, config.seed)?;
    let lambda = es.lambda();

    let mut best_input: Option<DecisionVector> = None;
    let mut best_robustness = f64::NEG_INFINITY;
    let mut best_conjuncts = Vec::new();
    let mut simulations = 0;
    let mut generations = 0;

    let outcome = loop {
        if best_robustness > 0.0 {
            break Outcome::Satisfied;
        }
        if simulations + lambda > config.budget {
            break Outcome::FailureBudget;
        }
        if start.elapsed() >= config.timeout {
            break Outcome::FailureTimeout;
        }
        if es.equal_fun_values_triggered() {
            break Outcome::FailureStationary;
        }
        let population = match es.ask() {
            Ok(p) => p,
            Err(CmaesError::Degenerate(_)) => break Outcome::FailureStationary,
            Err(e) => return Err(e.into()),
        };
        let rows: Result<Vec<Vec<f64>>, SynthesisError> = if config.parallel {
            population.individuals.par_iter().map(|x| problem.evaluate(x)).collect()
        } else {
            population.individuals.iter().map(|x| problem.evaluate(x)).collect()
        };
        let rows = rows.map_err(|e| SynthesisError::Evaluation {
            generation: generations + 1,
            source: Box::new(e),
        })?;
        simulations += lambda;
        generations += 1;

        for (x, row) in population.individuals.iter().zip(&rows) {
            let rb = min_of(row);
            if best_input.is_none() || rb > best_robustness {
                best_robustness = rb;
                best_conjuncts = row.clone();
                best_input = Some(x.clone());
            }
        }

        let ranking = match algorithm {
            Algorithm::Cmaes => rank_by_min(&rows),
            Algorithm::Mcr => rank_by_mcr(&population, &rows, config.objective)?,
        };
        es.tell(&population.permuted(&ranking))?;
        match algorithm {
            Algorithm::Cmaes => es.record_best(&[min_of(&rows[ranking[0]])]),
            Algorithm::Mcr => es.record_best(&rows[ranking[0]]),
        }

        observer(&Progress {
            generation: generations,
            simulations,
            best_robustness,
            best_conjuncts: &best_conjuncts,
            population: &population,
            robustness: &rows,
            ranking: &ranking,
        });
    };

    let best_signal = match &best_input {
        Some(x) => Some(spec.gen_signal(x)?),
        None => None,
    };
    Ok(SynthesisResult {
        outcome,
        best_input,
        best_signal,
        best_robustness,
        best_conjuncts,
        simulations,
        generations,
        elapsed: start.elapsed(),
    })
}

/// One configuration per choice of objective conjunct, otherwise identical.
pub fn choose_objective_variants(config: &SynthesisConfig) -> Vec<SynthesisConfig> {
    (1..=config.problem.conjunct_count())
        .map(|k| SynthesisConfig {
            objective: k,
            ..config.clone()
        })
        .collect()
}
