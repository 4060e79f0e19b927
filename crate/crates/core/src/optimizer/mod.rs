//! Limited-memory BFGS over smooth objectives.
//!
//! Search directions come from the two-loop recursion over the most recent
//! `memory` curvature pairs, with the initial inverse Hessian scaled by
//! `γ = sᵀy / yᵀy` of the newest kept pair. Steps satisfy the strong Wolfe
//! conditions. Termination is on the infinity norm of the gradient.

mod line_search;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};
use line_search::{strong_wolfe, SearchResult, WolfeParams};

/// Smooth objective: writes the gradient at `x` into `grad` and returns the value.
pub trait Objective<T> {
    fn evaluate(&mut self, x: &[T], grad: &mut [T]) -> T;
}

impl<T, F> Objective<T> for F
where
    F: FnMut(&[T], &mut [T]) -> T,
{
    fn evaluate(&mut self, x: &[T], grad: &mut [T]) -> T {
        self(x, grad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub memory: usize,
    /// Convergence threshold on `‖∇f‖∞`.
    pub grad_tolerance: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_search_steps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            memory: 10,
            grad_tolerance: 1e-4,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search_steps: 20,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::Config(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.memory == 0 || self.max_iterations == 0 || self.max_line_search_steps == 0 {
            return Err(Error::Config(
                "memory, max_iterations and max_line_search_steps must be positive".into(),
            ));
        }
        if !(self.grad_tolerance >= 0.0) {
            return Err(Error::Config(format!(
                "grad_tolerance {} is negative",
                self.grad_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterationCap,
    LineSearchFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOutcome<T> {
    pub x_final: Vec<T>,
    pub f_final: T,
    pub grad_inf_norm: T,
    pub iterations_used: usize,
    pub status: Status,
}

#[derive(Clone, Debug)]
pub(crate) struct Trial<T> {
    step: T,
    x: Vec<T>,
    value: T,
    grad: Vec<T>,
    slope: T,
}

/// Evaluates the objective along a fixed ray `x + t·d`.
pub(crate) trait Evaluator<T> {
    fn trial(&mut self, step: T) -> Result<Trial<T>>;
}

struct Ray<'a, T, O> {
    objective: &'a mut O,
    origin: &'a [T],
    direction: &'a [T],
}

impl<T: Scalar, O: Objective<T>> Evaluator<T> for Ray<'_, T, O> {
    fn trial(&mut self, step: T) -> Result<Trial<T>> {
        let x: Vec<T> = self
            .origin
            .iter()
            .zip(self.direction)
            .map(|(&xi, &di)| xi + step * di)
            .collect();
        let (value, grad) = checked_eval(self.objective, &x)?;
        let slope = dot(&grad, self.direction);
        Ok(Trial {
            step,
            x,
            value,
            grad,
            slope,
        })
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

fn checked_eval<T: Scalar, O: Objective<T>>(objective: &mut O, x: &[T]) -> Result<(T, Vec<T>)> {
    let mut grad = vec![T::zero(); x.len()];
    let value = objective.evaluate(x, &mut grad);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numerical(
            format!("objective returned non-finite value or gradient (value {value})"),
            x.iter().map(|v| v.to_f64_lossy()).collect(),
        ));
    }
    Ok((value, grad))
}

/// Curvature pairs, newest at the back.
struct History<T> {
    pairs: VecDeque<(Vec<T>, Vec<T>, T)>,
    capacity: usize,
}

impl<T: Scalar> History<T> {
    fn new(capacity: usize) -> Self {
        Self {
            pairs: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Stores `(s, y)` unless `sᵀy ≤ 1e-10 · ‖s‖‖y‖`. Returns whether it was kept.
    fn push(&mut self, s: Vec<T>, y: Vec<T>) -> bool {
        let sy = dot(&s, &y);
        let threshold = T::of(1e-10) * dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if !(sy > threshold) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, T::one() / sy));
        true
    }

    /// Two-loop recursion: returns `−H·g`.
    fn direction(&self, grad: &[T]) -> Vec<T> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let alpha = *rho * dot(s, &q);
            for (qi, &yi) in q.iter_mut().zip(y) {
                *qi = *qi - alpha * yi;
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi = *qi * gamma;
            }
        }
        for ((s, y, rho), alpha) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let beta = *rho * dot(y, &q);
            for (qi, &si) in q.iter_mut().zip(s) {
                *qi = *qi + (alpha - beta) * si;
            }
        }
        q.iter().map(|&v| -v).collect()
    }
}

/// Minimizes `objective` from `x0`.
///
/// Reaching `max_iterations` is a normal outcome (`Status::IterationCap`), as
/// is a line search that cannot find a strong Wolfe point
/// (`Status::LineSearchFailure`, returning the best iterate seen). Non-finite
/// values or gradients abort with [`Error::Numerical`].
pub fn minimize<T: Scalar, O: Objective<T>>(
    objective: &mut O,
    x0: &[T],
    cfg: &OptimizerConfig,
) -> Result<OptimizeOutcome<T>> {
    cfg.validate()?;
    let tolerance = T::of(cfg.grad_tolerance);
    let wolfe = WolfeParams {
        c1: T::of(cfg.wolfe_c1),
        c2: T::of(cfg.wolfe_c2),
        max_steps: cfg.max_line_search_steps,
    };

    let mut x = x0.to_vec();
    let (mut f, mut grad) = checked_eval(objective, &x)?;
    let mut history = History::new(cfg.memory);
    let mut iterations = 0;

    let finish = |x: Vec<T>, f: T, grad: &[T], iterations: usize, status: Status| OptimizeOutcome {
        grad_inf_norm: inf_norm(grad),
        x_final: x,
        f_final: f,
        iterations_used: iterations,
        status,
    };

    loop {
        let gnorm = inf_norm(&grad);
        log::trace!("lbfgs iter {iterations}: f = {f}, |g|inf = {gnorm}");
        if gnorm <= tolerance {
            return Ok(finish(x, f, &grad, iterations, Status::Converged));
        }
        if iterations >= cfg.max_iterations {
            return Ok(finish(x, f, &grad, iterations, Status::IterationCap));
        }

        let mut direction = history.direction(&grad);
        let mut slope = dot(&grad, &direction);
        if !(slope < T::zero()) {
            history.pairs.clear();
            direction = grad.iter().map(|&g| -g).collect();
            slope = dot(&grad, &direction);
        }
        // Without curvature information the raw gradient can be badly scaled;
        // start the very first search at a step of unit length.
        let initial_step = if history.pairs.is_empty() {
            T::one().min(T::one() / dot(&direction, &direction).sqrt())
        } else {
            T::one()
        };

        let mut ray = Ray {
            objective: &mut *objective,
            origin: &x,
            direction: &direction,
        };
        let trial = match strong_wolfe(&mut ray, f, slope, initial_step, &wolfe)? {
            SearchResult::Accepted(trial) => trial,
            SearchResult::Failed(best) => {
                log::debug!("lbfgs line search failed at iteration {iterations}");
                return Ok(match best {
                    Some(t) if t.value < f => finish(t.x, t.value, &t.grad, iterations + 1, Status::LineSearchFailure),
                    _ => finish(x, f, &grad, iterations, Status::LineSearchFailure),
                });
            }
        };

        let s: Vec<T> = trial.x.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = trial.grad.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        history.push(s, y);
        x = trial.x;
        f = trial.value;
        grad = trial.grad;
        iterations += 1;
    }
}
