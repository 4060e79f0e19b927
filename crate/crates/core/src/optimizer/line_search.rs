//! Strong Wolfe line search: bracketing phase followed by a zoom that uses
//! safeguarded cubic interpolation.

use super::{Evaluator, Trial};
use crate::{Result, Scalar};

pub(super) struct WolfeParams<T> {
    pub c1: T,
    pub c2: T,
    pub max_steps: usize,
}

pub(super) enum SearchResult<T> {
    Accepted(Trial<T>),
    /// No strong Wolfe point found; carries the lowest sufficient-decrease
    /// point seen, if any.
    Failed(Option<Trial<T>>),
}

/// Minimizer of the cubic through `(a, fa, ga)` and `(b, fb, gb)`, clamped to
/// `[lo, hi]`. Falls back to the midpoint when the cubic has no minimizer.
#[allow(clippy::too_many_arguments)]
fn cubic_minimizer<T: Scalar>(a: T, fa: T, ga: T, b: T, fb: T, gb: T, lo: T, hi: T) -> T {
    let three = T::of(3.0);
    let two = T::of(2.0);
    let d1 = ga + gb - three * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    let candidate = if disc >= T::zero() && a != b {
        let d2 = disc.sqrt() * (b - a).signum();
        b - (b - a) * ((gb + d2 - d1) / (gb - ga + two * d2))
    } else {
        (lo + hi) / two
    };
    if candidate.is_finite() {
        candidate.max(lo).min(hi)
    } else {
        (lo + hi) / two
    }
}

struct Point<T> {
    step: T,
    value: T,
    slope: T,
}

pub(super) fn strong_wolfe<T: Scalar, E: Evaluator<T>>(
    eval: &mut E,
    f0: T,
    slope0: T,
    initial_step: T,
    params: &WolfeParams<T>,
) -> Result<SearchResult<T>> {
    let armijo = |step: T, value: T| value <= f0 + params.c1 * step * slope0;
    let curvature = |slope: T| slope.abs() <= -params.c2 * slope0;
    // Near the optimum the decrease drops below the rounding noise of f and
    // the Armijo test becomes meaningless. There, accept a value within that
    // noise of f(0) whose slope obeys the derivative form of sufficient decrease.
    let noise = T::of(1e-10) * f0.abs();
    let approximate =
        |value: T, slope: T| (value - f0).abs() <= noise && slope <= (T::one() - T::of(2.0) * params.c1) * -slope0;

    let mut best: Option<Trial<T>> = None;
    let keep_best = |trial: &Trial<T>, best: &mut Option<Trial<T>>| {
        if armijo(trial.step, trial.value) && best.as_ref().is_none_or(|b| trial.value < b.value) {
            *best = Some(trial.clone());
        }
    };

    let mut prev = Point {
        step: T::zero(),
        value: f0,
        slope: slope0,
    };
    let mut step = initial_step;
    let mut evals = 0;

    // Bracketing.
    let (mut lo, mut hi) = loop {
        if evals >= params.max_steps {
            return Ok(SearchResult::Failed(best));
        }
        let trial = eval.trial(step)?;
        evals += 1;
        keep_best(&trial, &mut best);
        let here = Point {
            step,
            value: trial.value,
            slope: trial.slope,
        };
        let approx = approximate(trial.value, trial.slope);
        if !(armijo(step, trial.value) || approx) || (evals > 1 && trial.value >= prev.value && !approx) {
            break (prev, here);
        }
        if curvature(trial.slope) {
            return Ok(SearchResult::Accepted(trial));
        }
        if trial.slope >= T::zero() {
            break (here, prev);
        }
        // extrapolate, keeping the new step in [step + 0.01·Δ, 10·step]
        let delta = step - prev.step;
        let next = cubic_minimizer(
            prev.step,
            prev.value,
            prev.slope,
            step,
            trial.value,
            trial.slope,
            step + T::of(0.01) * delta,
            step * T::of(10.0),
        );
        prev = here;
        step = next;
    };

    // Zoom: `lo` satisfies sufficient decrease and has the lower value of the pair.
    let tiny = T::epsilon() * T::of(16.0);
    while evals < params.max_steps {
        let (left, right) = if lo.step < hi.step {
            (lo.step, hi.step)
        } else {
            (hi.step, lo.step)
        };
        let width = right - left;
        if width <= tiny * right.max(T::one()) {
            break;
        }
        let mut step = cubic_minimizer(lo.step, lo.value, lo.slope, hi.step, hi.value, hi.slope, left, right);
        // stay away from the bracket ends so the interval keeps shrinking
        let margin = T::of(0.1) * width;
        if step - left < margin || right - step < margin {
            step = (left + right) / T::of(2.0);
        }
        let trial = eval.trial(step)?;
        evals += 1;
        keep_best(&trial, &mut best);
        let here = Point {
            step,
            value: trial.value,
            slope: trial.slope,
        };
        let approx = approximate(trial.value, trial.slope);
        if !(armijo(step, trial.value) || approx) || (trial.value >= lo.value && !approx) {
            hi = here;
        } else {
            if curvature(trial.slope) {
                return Ok(SearchResult::Accepted(trial));
            }
            if trial.slope * (hi.step - lo.step) >= T::zero() {
                hi = lo;
            }
            lo = here;
        }
    }
    Ok(SearchResult::Failed(best))
}
