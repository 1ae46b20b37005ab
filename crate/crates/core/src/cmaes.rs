//! (mu/mu_w, lambda)-CMA-ES with an ask/tell interface.
//!
//! The search runs in box-normalized coordinates: each coordinate's range is
//! mapped onto `[0, 1]`, the initial mean is the box center, the initial step
//! size is `0.3` (i.e. 0.3 of each coordinate's width) and the covariance
//! starts as the identity. Samples are clipped into the box. Strategy
//! parameters are the usual defaults (Hansen's tutorial).
//!
//! `tell` only sees the order of the individuals, never their scores. Score
//! values only enter through [`Cmaes::record_best`], which feeds the
//! `EqualFunValues` stationarity test.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::signals::DecisionVector;

/// Relative tolerance for "best value did not change".
pub const EQUAL_FUN_VALUES_TOL: f64 = 1e-12;

/// Initial step size in normalized coordinates.
pub const INITIAL_STEP: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmaesError {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("population size must be at least 2, got {0}")]
    InvalidLambda(usize),
    #[error("population has {got} individuals, expected {expected}")]
    PopulationSize { expected: usize, got: usize },
    #[error("individual has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("numerical degeneracy: {0}; a restart is needed")]
    Degenerate(String),
}

/// A sampled generation, in the order `ask` produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub individuals: Vec<DecisionVector>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Reorders the population: position `i` of the result is `self[order[i]]`.
    pub fn permuted(&self, order: &[usize]) -> Population {
        Population {
            individuals: order.iter().map(|&i| self.individuals[i].clone()).collect(),
        }
    }
}

/// Default population size `4 + floor(3 ln n)`.
pub fn default_lambda(n: usize) -> usize {
    4 + (3.0 * (n as f64).ln()).floor() as usize
}

/// Length of the `EqualFunValues` window, `10 + ceil(30 n / lambda)`.
pub fn equal_fun_values_window(n: usize, lambda: usize) -> usize {
    10 + (30 * n).div_ceil(lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cmaes {
    n: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    lower: Vec<f64>,
    width: Vec<f64>,

    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    inv_sqrt_cov: DMatrix<f64>,
    degenerate: Option<String>,

    generation: usize,
    rng: ChaCha8Rng,
    best_history: VecDeque<Vec<f64>>,
}

impl Cmaes {
    /// Fresh optimizer over the box `bounds`. `lambda` defaults to `4 + floor(3 ln n)`.
    pub fn new(bounds: &[(f64, f64)], lambda: Option<usize>, seed: u64) -> Result<Self, CmaesError> {
        let n = bounds.len();
        if n == 0 {
            return Err(CmaesError::InvalidBounds("dimension must be at least 1".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(CmaesError::InvalidBounds(format!("coordinate {i}: [{lo}, {hi}]")));
            }
        }
        let lambda = lambda.unwrap_or_else(|| default_lambda(n));
        if lambda < 2 {
            return Err(CmaesError::InvalidLambda(lambda));
        }
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let nf = n as f64;
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        Ok(Cmaes {
            n,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            lower: bounds.iter().map(|b| b.0).collect(),
            width: bounds.iter().map(|b| b.1 - b.0).collect(),
            mean: DVector::from_element(n, 0.5),
            sigma: INITIAL_STEP,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            inv_sqrt_cov: DMatrix::identity(n, n),
            degenerate: None,
            generation: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            best_history: VecDeque::new(),
        })
    }

    /// Overrides the step size (normalized units).
    pub fn with_step_size(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn step_size(&self) -> f64 {
        self.sigma
    }

    /// Covariance in normalized coordinates.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Distribution mean in the original coordinates.
    pub fn mean(&self) -> DecisionVector {
        DecisionVector(self.denormalize(&self.mean))
    }

    fn denormalize(&self, z: &DVector<f64>) -> Vec<f64> {
        z.iter()
            .zip(self.lower.iter().zip(&self.width))
            .map(|(v, (lo, w))| lo + v * w)
            .collect()
    }

    fn normalize(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.n,
            x.iter().zip(self.lower.iter().zip(&self.width)).map(|(v, (lo, w))| (v - lo) / w),
        )
    }

    /// Samples `lambda` individuals from `N(mean, sigma^2 C)`, clipped into the box.
    pub fn ask(&mut self) -> Result<Population, CmaesError> {
        if let Some(reason) = &self.degenerate {
            return Err(CmaesError::Degenerate(reason.clone()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(CmaesError::Degenerate(format!("step size {}", self.sigma)));
        }
        let mut individuals = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = DVector::from_fn(self.n, |_, _| StandardNormal.sample(&mut self.rng));
            let y = &self.basis * z.component_mul(&self.scales);
            let mut x = &self.mean + y * self.sigma;
            x.apply(|v| *v = v.clamp(0.0, 1.0));
            let mut coords = self.denormalize(&x);
            // rounding in the affine map must not leave the box
            for (c, (lo, w)) in coords.iter_mut().zip(self.lower.iter().zip(&self.width)) {
                *c = c.clamp(*lo, lo + w);
            }
            individuals.push(DecisionVector(coords));
        }
        Ok(Population { individuals })
    }

    /// Updates the distribution from a population ordered best-first.
    pub fn tell(&mut self, ranked: &Population) -> Result<(), CmaesError> {
        if ranked.len() != self.lambda {
            return Err(CmaesError::PopulationSize {
                expected: self.lambda,
                got: ranked.len(),
            });
        }
        if let Some(bad) = ranked.individuals.iter().find(|x| x.0.len() != self.n) {
            return Err(CmaesError::Dimension {
                expected: self.n,
                got: bad.0.len(),
            });
        }
        let steps: Vec<DVector<f64>> = ranked.individuals[..self.mu]
            .iter()
            .map(|x| (self.normalize(&x.0) - &self.mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(self.n);
        for (w, y) in self.weights.iter().zip(&steps) {
            y_w += y * *w;
        }
        self.mean += &y_w * self.sigma;

        let cs = self.c_sigma;
        self.p_sigma =
            &self.p_sigma * (1.0 - cs) + (&self.inv_sqrt_cov * &y_w) * (cs * (2.0 - cs) * self.mu_eff).sqrt();
        let ps_norm = self.p_sigma.norm();
        let decay = 1.0 - (1.0 - cs).powi(2 * (self.generation as i32 + 1));
        let h_sigma = ps_norm / decay.sqrt() / self.chi_n < 1.4 + 2.0 / (self.n as f64 + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };

        let cc = self.c_c;
        self.p_c = &self.p_c * (1.0 - cc) + &y_w * (h * (cc * (2.0 - cc) * self.mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(self.n, self.n);
        for (w, y) in self.weights.iter().zip(&steps) {
            rank_mu += (y * y.transpose()) * *w;
        }
        let old = (1.0 - self.c_1 - self.c_mu) + (1.0 - h) * self.c_1 * cc * (2.0 - cc);
        self.cov = &self.cov * old + (&self.p_c * self.p_c.transpose()) * self.c_1 + rank_mu * self.c_mu;

        self.sigma *= ((cs / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        self.decompose();
        Ok(())
    }

    fn decompose(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        if sym.iter().any(|v| !v.is_finite()) {
            self.degenerate = Some("non-finite covariance".into());
            return;
        }
        self.cov = sym;
        let eig = SymmetricEigen::new(self.cov.clone());
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            self.degenerate = Some("covariance is not positive definite".into());
            return;
        }
        self.scales = eig.eigenvalues.map(f64::sqrt);
        let inv = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
        self.inv_sqrt_cov = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
        self.basis = eig.eigenvectors;
    }

    /// Appends the best individual's score vector for this generation.
    pub fn record_best(&mut self, scores: &[f64]) {
        let window = equal_fun_values_window(self.n, self.lambda);
        self.best_history.push_back(scores.to_vec());
        while self.best_history.len() > window {
            self.best_history.pop_front();
        }
    }

    /// `EqualFunValues`: the recorded best scores have not changed over the last
    /// `10 + ceil(30 n / lambda)` generations.
    pub fn equal_fun_values_triggered(&self) -> bool {
        let window = equal_fun_values_window(self.n, self.lambda);
        if self.best_history.len() < window {
            return false;
        }
        let first = &self.best_history[0];
        if self.best_history.iter().any(|h| h.len() != first.len()) {
            return false;
        }
        (0..first.len()).all(|j| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for h in &self.best_history {
                lo = lo.min(h[j]);
                hi = hi.max(h[j]);
            }
            // relative, so a positive rescaling of a score column cannot change the verdict
            lo == hi || (lo.is_finite() && hi.is_finite() && hi - lo <= EQUAL_FUN_VALUES_TOL * lo.abs().max(hi.abs()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rank_by(pop: &Population, f: impl Fn(&[f64]) -> f64) -> Population {
        let mut idx: Vec<usize> = (0..pop.len()).collect();
        let scores: Vec<f64> = pop.individuals.iter().map(|x| f(&x.0)).collect();
        idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        pop.permuted(&idx)
    }

    #[test]
    fn default_population_sizes() {
        assert_eq!(default_lambda(10), 10);
        assert_eq!(default_lambda(1), 4);
        assert_eq!(default_lambda(2), 6);
        assert_eq!(equal_fun_values_window(10, 10), 40);
    }

    #[test]
    fn init_centers_mean() {
        let es = Cmaes::new(&[(0.0, 100.0), (0.0, 325.0)], None, 1).unwrap();
        assert_eq!(es.mean().0, vec![50.0, 162.5]);
        assert_eq!(es.step_size(), INITIAL_STEP);
        assert_eq!(es.covariance(), &DMatrix::identity(2, 2));
        assert_eq!(es.mu(), 3);
    }

    #[test]
    fn invalid_inputs() {
        assert!(Cmaes::new(&[], None, 0).is_err());
        assert!(Cmaes::new(&[(1.0, 1.0)], None, 0).is_err());
        assert!(Cmaes::new(&[(0.0, f64::INFINITY)], None, 0).is_err());
        assert!(matches!(Cmaes::new(&[(0.0, 1.0)], Some(1), 0), Err(CmaesError::InvalidLambda(1))));
        let mut es = Cmaes::new(&[(0.0, 1.0)], None, 0).unwrap();
        let pop = es.ask().unwrap();
        let short = Population {
            individuals: pop.individuals[..2].to_vec(),
        };
        assert!(matches!(es.tell(&short), Err(CmaesError::PopulationSize { .. })));
    }

    #[test]
    fn same_seed_same_state() {
        let mut a = Cmaes::new(&[(-1.0, 1.0); 4], None, 7).unwrap();
        let mut b = Cmaes::new(&[(-1.0, 1.0); 4], None, 7).unwrap();
        assert_eq!(a, b);
        for _ in 0..5 {
            let pa = a.ask().unwrap();
            let pb = b.ask().unwrap();
            assert_eq!(pa, pb);
            a.tell(&rank_by(&pa, sphere)).unwrap();
            b.tell(&rank_by(&pb, sphere)).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn ask_respects_shape_and_bounds() {
        let bounds = [(0.0, 100.0), (0.0, 325.0), (-3.0, -1.0)];
        let mut es = Cmaes::new(&bounds, Some(12), 3).unwrap().with_step_size(5.0);
        let pop = es.ask().unwrap();
        assert_eq!(pop.len(), 12);
        for x in &pop.individuals {
            assert_eq!(x.0.len(), 3);
            for (v, (lo, hi)) in x.0.iter().zip(bounds) {
                assert!(*v >= lo && *v <= hi);
            }
        }
    }

    #[test]
    fn vanishing_step_size_samples_the_mean() {
        let mut es = Cmaes::new(&[(-1.0, 1.0); 3], None, 5).unwrap().with_step_size(1e-300);
        let mean = es.mean();
        for x in es.ask().unwrap().individuals {
            assert_eq!(x, mean);
        }
    }

    #[test]
    fn uniform_weights_special_case() {
        // With mu = 1 the single weight is 1 and the new mean is the best individual.
        let mut es = Cmaes::new(&[(-1.0, 1.0); 2], Some(2), 9).unwrap();
        assert_eq!(es.weights(), &[1.0]);
        let pop = es.ask().unwrap();
        let ranked = rank_by(&pop, sphere);
        es.tell(&ranked).unwrap();
        for (m, b) in es.mean().0.iter().zip(&ranked.individuals[0].0) {
            assert!((m - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_are_log_decreasing_and_normalized() {
        let es = Cmaes::new(&[(0.0, 1.0); 10], None, 0).unwrap();
        let w = es.weights();
        assert_eq!(w.len(), 5);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn covariance_stays_spd_under_random_rankings() {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut es = Cmaes::new(&[(-5.0, 5.0); 5], None, 11).unwrap();
        for _ in 0..1000 {
            let pop = es.ask().unwrap();
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.shuffle(&mut rng);
            es.tell(&pop.permuted(&order)).unwrap();
            let c = es.covariance();
            assert!((c - c.transpose()).abs().max() <= 1e-9);
            let eig = SymmetricEigen::new(c.clone());
            assert!(eig.eigenvalues.iter().all(|&l| l >= 1e-14), "{:?}", eig.eigenvalues);
        }
    }

    #[test]
    fn equal_fun_values_window_behaviour() {
        let mut es = Cmaes::new(&[(0.0, 1.0); 10], None, 0).unwrap();
        for _ in 0..39 {
            es.record_best(&[-1.0]);
            assert!(!es.equal_fun_values_triggered());
        }
        es.record_best(&[-1.0]);
        assert!(es.equal_fun_values_triggered());

        let mut es = Cmaes::new(&[(0.0, 1.0); 10], None, 0).unwrap();
        for g in 0..500 {
            es.record_best(&[g as f64 * 1e-3]);
            assert!(!es.equal_fun_values_triggered());
        }

        let mut es = Cmaes::new(&[(0.0, 1.0); 10], None, 0).unwrap();
        for _ in 0..40 {
            es.record_best(&[f64::NEG_INFINITY, 2.0]);
        }
        assert!(es.equal_fun_values_triggered());
    }
}
