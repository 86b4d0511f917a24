//! Projected subgradient descent with multiplicative step adaptation.
//!
//! Starting from `M₀ = I`, each attempt takes `M ← P₊(M − λG)`. A step that
//! lowers the objective is accepted and grows `λ` by `lambda_up`; a step that
//! does not is discarded (the previous `M` is kept) and `λ` shrinks by
//! `lambda_down`. Accepted losses are therefore strictly decreasing.
//!
//! With fewer samples than dimensions every iterate has the form
//! `Q (M_r − I) Qᵀ + I`, where `Q` is an orthonormal basis of the span of
//! the samples: the gradient lives in that span and the orthogonal
//! complement keeps eigenvalue 1. The loop then runs on the `n × n` block
//! `M_r` and lifts the result, which is exact and avoids `d × d`
//! eigendecompositions.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::objective::{ObjectiveParts, Problem, TriggeredSet};
use super::{psd_project, TrainConfig};
use crate::error::Result;
use crate::metric::{symmetrize, LabeledSample, MetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Relative loss change fell below `rel_tol`.
    Converged,
    /// The objective reached exactly zero, its global minimum.
    ZeroLoss,
    MaxIters,
    LambdaUnderflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Accepted { loss: f64, rel_change: f64 },
    Rejected { candidate_loss: f64 },
    /// The candidate left the loss unchanged.
    Stationary,
}

/// Result of [`train`].
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    #[serde(skip)]
    pub final_metric: MetricMatrix,
    /// Objective at `M₀` followed by the loss after every accepted step.
    pub loss_trace: Vec<f64>,
    /// Step size used by every accepted step.
    pub lambda_trace: Vec<f64>,
    /// Step attempts, accepted or rejected.
    pub iters_run: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub final_objective: ObjectiveParts,
    pub final_triggered: usize,
    /// Largest eigenvalue of `final_metric`.
    pub max_eigenvalue: f64,
    pub elapsed_secs: f64,
    pub config: TrainConfig,
}

/// Orthonormal `d × n` basis of the sample span, used when `n < d`.
#[derive(Debug, Clone)]
struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    fn of(x: &DMatrix<f64>) -> Option<Self> {
        let (n, d) = x.shape();
        (n < d).then(|| Subspace {
            basis: x.transpose().qr().q(),
        })
    }

    fn reduce(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * &self.basis
    }

    fn lift(&self, m: &MetricMatrix) -> MetricMatrix {
        let (d, r) = self.basis.shape();
        let inner = m.as_matrix() - DMatrix::identity(r, r);
        let full = &self.basis * inner * self.basis.transpose() + DMatrix::identity(d, d);
        MetricMatrix::from_psd_unchecked(symmetrize(&full))
    }
}

/// Stateful training loop; [`train`] drives it to completion.
pub struct Trainer {
    problem: Problem,
    subspace: Option<Subspace>,
    cfg: TrainConfig,
    /// `(1 − α)·Σ X_{i,j}`, constant for the whole run.
    pull_gradient: DMatrix<f64>,
    metric: MetricMatrix,
    parts: ObjectiveParts,
    triggered: TriggeredSet,
    lambda: f64,
    rng: ChaCha8Rng,
    attempts: usize,
    accepted: usize,
    rejected: usize,
    loss_trace: Vec<f64>,
    lambda_trace: Vec<f64>,
}

impl Trainer {
    pub fn new(samples: &[LabeledSample], cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let full = Problem::new(samples)?;
        let subspace = Subspace::of(full.features());
        let problem = match &subspace {
            Some(s) => full.with_features(s.reduce(full.features()))?,
            None => full,
        };
        let metric = MetricMatrix::identity(problem.dim());
        let pull_gradient = problem.positive_outer_sum() * (1.0 - cfg.alpha);
        let dist = problem.distances(&metric)?;
        let parts = problem.objective(&dist, cfg.alpha, cfg.rho);
        let triggered = problem.triggered(&dist, cfg.rho);
        Ok(Trainer {
            problem,
            subspace,
            cfg: cfg.clone(),
            pull_gradient,
            metric,
            parts,
            triggered,
            lambda: cfg.lambda0,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            attempts: 0,
            accepted: 0,
            rejected: 0,
            loss_trace: vec![parts.total],
            lambda_trace: Vec::new(),
        })
    }

    /// The current metric in feature space.
    pub fn metric(&self) -> MetricMatrix {
        match &self.subspace {
            Some(s) => s.lift(&self.metric),
            None => self.metric.clone(),
        }
    }

    /// The metric the loop iterates on: `M` itself, or its block in the
    /// sample span when there are fewer samples than dimensions.
    pub fn working_metric(&self) -> &MetricMatrix {
        &self.metric
    }

    pub fn working_dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn loss(&self) -> f64 {
        self.parts.total
    }

    pub fn objective_parts(&self) -> ObjectiveParts {
        self.parts
    }

    pub fn triggered(&self) -> &TriggeredSet {
        &self.triggered
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Overrides the current step size (any finite value ≥ 0).
    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    pub fn attempts(&self) -> usize {
        self.attempts
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    /// Subgradient at the current metric.
    pub fn gradient(&mut self) -> DMatrix<f64> {
        let alpha = self.cfg.alpha;
        if alpha == 0.0 || self.triggered.is_empty() {
            return self.pull_gradient.clone();
        }
        let push = if self.cfg.anchor_fraction < 1.0 {
            let n = self.problem.len();
            let keep = ((n as f64 * self.cfg.anchor_fraction).ceil() as usize).clamp(1, n);
            let mut chosen = vec![false; n];
            for a in sample(&mut self.rng, n, keep).iter() {
                chosen[a] = true;
            }
            let subset = self.triggered.triplets.iter().filter(|t| chosen[t.triplet.anchor]);
            self.problem.triplet_outer_sum(subset) * (n as f64 / keep as f64)
        } else {
            self.problem.triplet_outer_sum(&self.triggered.triplets)
        };
        &self.pull_gradient + push * alpha
    }

    /// One projected step with the current `λ`.
    pub fn step(&mut self) -> Result<StepOutcome> {
        self.attempts += 1;
        let grad = self.gradient();
        let candidate = psd_project(&(self.metric.as_matrix() - grad * self.lambda))?;
        let dist = self.problem.distances(&candidate)?;
        let parts = self.problem.objective(&dist, self.cfg.alpha, self.cfg.rho);
        let prev = self.parts.total;
        if parts.total < prev {
            let rel_change = (prev - parts.total) / prev.max(1e-12);
            self.lambda_trace.push(self.lambda);
            self.loss_trace.push(parts.total);
            self.metric = candidate;
            self.parts = parts;
            self.triggered = self.problem.triggered(&dist, self.cfg.rho);
            self.accepted += 1;
            self.lambda *= self.cfg.lambda_up;
            Ok(StepOutcome::Accepted {
                loss: parts.total,
                rel_change,
            })
        } else if parts.total == prev {
            Ok(StepOutcome::Stationary)
        } else {
            self.rejected += 1;
            self.lambda *= self.cfg.lambda_down;
            Ok(StepOutcome::Rejected {
                candidate_loss: parts.total,
            })
        }
    }

    /// Runs until convergence or a budget guard trips.
    pub fn run(&mut self) -> Result<StopReason> {
        if self.parts.total == 0.0 {
            return Ok(StopReason::ZeroLoss);
        }
        while self.attempts < self.cfg.max_iters {
            match self.step()? {
                StepOutcome::Accepted { loss, rel_change } => {
                    if loss == 0.0 {
                        return Ok(StopReason::ZeroLoss);
                    }
                    if rel_change < self.cfg.rel_tol {
                        return Ok(StopReason::Converged);
                    }
                }
                StepOutcome::Stationary => return Ok(StopReason::Converged),
                StepOutcome::Rejected { .. } => {
                    if self.lambda < self.cfg.lambda_floor {
                        return Ok(StopReason::LambdaUnderflow);
                    }
                }
            }
        }
        Ok(StopReason::MaxIters)
    }

    pub fn into_report(self, stop_reason: StopReason, elapsed_secs: f64) -> Result<TrainReport> {
        let eig = self.metric.eigenvalues()?;
        let mut max_eigenvalue = eig[eig.len() - 1];
        if self.subspace.is_some() {
            max_eigenvalue = max_eigenvalue.max(1.0);
        }
        Ok(TrainReport {
            final_metric: self.metric(),
            loss_trace: self.loss_trace,
            lambda_trace: self.lambda_trace,
            iters_run: self.attempts,
            accepted: self.accepted,
            rejected: self.rejected,
            converged: matches!(stop_reason, StopReason::Converged | StopReason::ZeroLoss),
            stop_reason,
            final_objective: self.parts,
            final_triggered: self.triggered.len(),
            max_eigenvalue,
            elapsed_secs,
            config: self.cfg,
        })
    }
}

/// Learns a metric on `samples`, starting from the identity.
pub fn train(samples: &[LabeledSample], cfg: &TrainConfig) -> Result<TrainReport> {
    let start = Instant::now();
    let mut trainer = Trainer::new(samples, cfg)?;
    let reason = trainer.run()?;
    trainer.into_report(reason, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FeatureVector;
    use crate::optimizer::{gradient, objective, triggered_set};

    fn s(v: &[f64], id: &str) -> LabeledSample {
        LabeledSample::new(FeatureVector::new(v.to_vec()).unwrap(), id, "c").unwrap()
    }

    fn separated() -> Vec<LabeledSample> {
        vec![
            s(&[0.0, 0.0], "A"),
            s(&[0.3, 0.1], "A"),
            s(&[10.0, 0.0], "B"),
            s(&[10.2, -0.3], "B"),
            s(&[0.0, 10.0], "C"),
            s(&[-0.2, 10.1], "C"),
        ]
    }

    fn wide() -> Vec<LabeledSample> {
        let cfg = crate::dataset::SynthConfig {
            num_identities: 5,
            samples_per_identity: 2,
            dim: 24,
            informative_dim: 4,
            ..crate::dataset::SynthConfig::moderate()
        };
        crate::dataset::generate_synthetic(&cfg).unwrap()
    }

    #[test]
    fn wide_data_runs_in_sample_span_and_matches_full_space_steps() {
        let data = wide();
        let cfg = TrainConfig { max_iters: 25, ..TrainConfig::default() };
        let mut t = Trainer::new(&data, &cfg).unwrap();
        assert_eq!(t.working_dim(), data.len());

        let mut m = MetricMatrix::identity(24);
        let mut lambda = cfg.lambda0;
        let mut loss = objective(&m, &data, &cfg).unwrap();
        for _ in 0..cfg.max_iters {
            let trig = triggered_set(&m, &data, cfg.rho).unwrap();
            let g = gradient(&m, &data, &cfg, &trig).unwrap();
            let cand = psd_project(&(m.as_matrix() - g * lambda)).unwrap();
            let cand_loss = objective(&cand, &data, &cfg).unwrap();
            let out = t.step().unwrap();
            if cand_loss < loss {
                assert!(matches!(out, StepOutcome::Accepted { .. }), "{out:?}");
                m = cand;
                loss = cand_loss;
                lambda *= cfg.lambda_up;
            } else {
                assert!(matches!(out, StepOutcome::Rejected { .. }), "{out:?}");
                lambda *= cfg.lambda_down;
            }
            assert!((t.loss() - loss).abs() <= 1e-9 * loss.max(1.0));
        }
        let lifted = t.metric();
        assert!((lifted.as_matrix() - m.as_matrix()).amax() < 1e-9);
        let report = t.into_report(StopReason::MaxIters, 0.0).unwrap();
        let eig = report.final_metric.eigenvalues().unwrap();
        assert!((report.max_eigenvalue - eig[eig.len() - 1]).abs() < 1e-9);
        assert!(eig.iter().filter(|v| (**v - 1.0).abs() < 1e-9).count() >= 24 - data.len());
    }

    #[test]
    fn zero_step_keeps_identity() {
        let data = separated();
        let mut t = Trainer::new(&data, &TrainConfig::default()).unwrap();
        let before = t.loss();
        t.set_lambda(0.0);
        assert_eq!(t.step().unwrap(), StepOutcome::Stationary);
        assert_eq!(t.metric(), MetricMatrix::identity(2));
        assert_eq!(t.loss(), before);
    }

    #[test]
    fn separated_data_converges_without_triggers() {
        let data = separated();
        let report = train(&data, &TrainConfig::default()).unwrap();
        assert!(report.loss_trace.windows(2).all(|w| w[1] < w[0]));
        assert!(report.loss_trace.last().unwrap() < &report.loss_trace[0]);
        assert_eq!(report.final_objective.hinge, 0.0);
        assert_eq!(report.final_triggered, 0);
        report.final_metric.check_invariants().unwrap();
    }

    #[test]
    fn rejected_steps_keep_previous_metric() {
        let data = separated();
        let mut t = Trainer::new(&data, &TrainConfig::default()).unwrap();
        t.set_lambda(1e6);
        let before = t.metric();
        let out = t.step().unwrap();
        assert!(matches!(out, StepOutcome::Rejected { .. }), "{out:?}");
        assert_eq!(t.metric(), before);
        assert_eq!(t.lambda(), 1e6 * 0.5);
    }

    #[test]
    fn anchor_subsampling_is_seeded() {
        let data = separated();
        let cfg = TrainConfig {
            anchor_fraction: 0.5,
            rho: 200.0,
            rng_seed: 3,
            ..TrainConfig::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert!(a.loss_trace.windows(2).all(|w| w[1] < w[0]));
    }
}
