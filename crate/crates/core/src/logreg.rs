//! Class-weighted, L2-regularized multinomial logistic regression.
//!
//! With per-class weights `s`, inverse regularization `C`, weights `W` (K×d)
//! and intercepts `b`, the fitted objective is
//!
//! ```text
//! J(W, b) = Σ_i s[y_i] · (−log softmax(W x_i + b)[y_i]) + ‖W‖²_F / (2C)
//! ```
//!
//! The sample loss is the unscaled weighted sum; intercepts are not penalized.
//! Parameters are flattened as `W` row-major followed by `b`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::optimizer::{self, Objective, OptimizerConfig, Status};
use crate::sampling::SampleSelection;
use crate::store::EmbeddingDataset;
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    Uniform,
    Balanced,
}

impl std::str::FromStr for ClassWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "none" => Ok(ClassWeighting::Uniform),
            "balanced" => Ok(ClassWeighting::Balanced),
            other => Err(Error::Config(format!("unknown class weighting {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Inverse regularization strength.
    #[serde(rename = "C")]
    pub c: f64,
    pub class_weighting: ClassWeighting,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            c: 10.0,
            class_weighting: ClassWeighting::Balanced,
            max_iterations: 100,
            grad_tolerance: 1e-4,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive and finite, got {}", self.c)));
        }
        self.optimizer().validate()
    }

    fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iterations: self.max_iterations,
            grad_tolerance: self.grad_tolerance,
            ..OptimizerConfig::default()
        }
    }
}

/// Per-class multipliers on the sample loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassWeights<T> {
    values: Vec<T>,
}

impl<T: Scalar> ClassWeights<T> {
    /// Balanced mode gives class `c` the weight `N / (K · n_c)`, where the
    /// counts refer to the rows actually used for training.
    pub fn from_labels(labels: &[usize], n_classes: usize, mode: ClassWeighting) -> Result<Self> {
        let mut counts = vec![0usize; n_classes];
        for &label in labels {
            if label >= n_classes {
                return Err(Error::Consistency(format!("label {label} outside {n_classes} classes")));
            }
            counts[label] += 1;
        }
        if let Some(empty) = counts.iter().position(|&n| n == 0) {
            return Err(Error::Degenerate(format!("class {empty} has no training rows")));
        }
        let values = match mode {
            ClassWeighting::Uniform => vec![T::one(); n_classes],
            ClassWeighting::Balanced => {
                let total = T::of(labels.len() as f64);
                let k = T::of(n_classes as f64);
                counts.iter().map(|&n| total / (k * T::of(n as f64))).collect()
            }
        };
        Ok(Self { values })
    }

    pub fn uniform(n_classes: usize) -> Self {
        Self {
            values: vec![T::one(); n_classes],
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Fitted probe parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// K × d
    pub weights: Array2<T>,
    pub intercept: Array1<T>,
    pub classes: Vec<String>,
    pub c: f64,
    pub class_weighting: ClassWeighting,
}

/// JSON layout of a saved model.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    classes: Vec<String>,
    #[serde(rename = "C")]
    c: f64,
    class_weighting: ClassWeighting,
    n_classes: usize,
    dim: usize,
    /// Row-major K × d.
    weights: Vec<f64>,
    intercept: Vec<f64>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(classes: Vec<String>, dim: usize, cfg: &ProbeConfig) -> Self {
        let k = classes.len();
        Self {
            weights: Array2::zeros((k, dim)),
            intercept: Array1::zeros(k),
            classes,
            c: cfg.c,
            class_weighting: cfg.class_weighting,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// `W` row-major followed by the intercepts.
    pub fn to_flat(&self) -> Vec<T> {
        self.weights.iter().chain(self.intercept.iter()).copied().collect()
    }

    fn from_flat(flat: &[T], k: usize, d: usize, classes: Vec<String>, cfg: &ProbeConfig) -> Self {
        let (w, b) = flat.split_at(k * d);
        Self {
            weights: Array2::from_shape_vec((k, d), w.to_vec()).expect("flat length checked by caller"),
            intercept: Array1::from(b.to_vec()),
            classes,
            c: cfg.c,
            class_weighting: cfg.class_weighting,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            classes: self.classes.clone(),
            c: self.c,
            class_weighting: self.class_weighting,
            n_classes: self.n_classes(),
            dim: self.dim(),
            weights: self.weights.iter().map(|v| v.to_f64_lossy()).collect(),
            intercept: self.intercept.iter().map(|v| v.to_f64_lossy()).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        let (k, d) = (doc.n_classes, doc.dim);
        if doc.classes.len() != k || doc.weights.len() != k * d || doc.intercept.len() != k {
            return Err(Error::Shape(format!(
                "model document declares {k}×{d} but holds {} classes, {} weights, {} intercepts",
                doc.classes.len(),
                doc.weights.len(),
                doc.intercept.len()
            )));
        }
        Ok(Self {
            weights: Array2::from_shape_vec((k, d), doc.weights.into_iter().map(T::of).collect())
                .map_err(|e| Error::Shape(e.to_string()))?,
            intercept: doc.intercept.into_iter().map(T::of).collect(),
            classes: doc.classes,
            c: doc.c,
            class_weighting: doc.class_weighting,
        })
    }

    /// Raw logits `X Wᵀ + b`.
    pub fn decision_function(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.dim()
            )));
        }
        Ok(x.dot(&self.weights.t()) + &self.intercept)
    }

    /// Softmax class probabilities, one row per sample.
    pub fn predict_proba(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let mut logits = self.decision_function(x)?;
        for mut row in logits.rows_mut() {
            let lse = log_sum_exp(row.view());
            row.mapv_inplace(|z| (z - lse).exp());
        }
        Ok(logits)
    }

    /// Most probable class per row; ties go to the lower class index.
    pub fn predict(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        let logits = self.decision_function(x)?;
        Ok(logits.rows().into_iter().map(|row| argmax(row)).collect())
    }
}

fn argmax<T: Scalar>(row: ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

fn log_sum_exp<T: Scalar>(row: ArrayView1<'_, T>) -> T {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let sum = row.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp());
    max + sum.ln()
}

/// Borrowed training problem; evaluates `J` and its gradient.
struct ProbeObjective<'a, T> {
    x: ArrayView2<'a, T>,
    y: &'a [usize],
    sample_weight: Vec<T>,
    n_classes: usize,
    inv_c: T,
}

impl<'a, T: Scalar> ProbeObjective<'a, T> {
    fn new(x: ArrayView2<'a, T>, y: &'a [usize], weights: &ClassWeights<T>, c: T) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Shape(format!("{} labels for {} rows", y.len(), x.nrows())));
        }
        let n_classes = weights.values.len();
        if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Consistency(format!("label {bad} outside {n_classes} classes")));
        }
        Ok(Self {
            x,
            y,
            sample_weight: y.iter().map(|&l| weights.values[l]).collect(),
            n_classes,
            inv_c: T::one() / c,
        })
    }

    fn n_params(&self) -> usize {
        self.n_classes * self.x.ncols() + self.n_classes
    }
}

impl<T: Scalar> Objective<T> for ProbeObjective<'_, T> {
    fn evaluate(&mut self, params: &[T], grad: &mut [T]) -> T {
        let (k, d) = (self.n_classes, self.x.ncols());
        let (w_flat, b) = params.split_at(k * d);
        let w = ArrayView2::from_shape((k, d), w_flat).expect("parameter length");
        let b = ArrayView1::from(b);

        // logits become the loss residuals s_i (p_ic − [y_i = c]) in place
        let mut residual = self.x.dot(&w.t()) + b;
        let mut loss = T::zero();
        for ((mut row, &label), &s) in residual.rows_mut().into_iter().zip(self.y).zip(&self.sample_weight) {
            let lse = log_sum_exp(row.view());
            loss = loss + s * (lse - row[label]);
            row.mapv_inplace(|z| s * (z - lse).exp());
            row[label] = row[label] - s;
        }

        let grad_w = residual.t().dot(&self.x) + &(&w * self.inv_c);
        let grad_b = residual.sum_axis(Axis(0));
        let (gw, gb) = grad.split_at_mut(k * d);
        for (dst, &src) in gw.iter_mut().zip(grad_w.iter()) {
            *dst = src;
        }
        for (dst, &src) in gb.iter_mut().zip(grad_b.iter()) {
            *dst = src;
        }

        let penalty = w.iter().fold(T::zero(), |acc, &v| acc + v * v) * self.inv_c / T::of(2.0);
        loss + penalty
    }
}

/// Value and analytic gradient of the probe objective at `params`.
pub fn objective_and_gradient<T: Scalar>(
    params: &[T],
    x: ArrayView2<'_, T>,
    y: &[usize],
    weights: &ClassWeights<T>,
    c: T,
) -> Result<(T, Vec<T>)> {
    let mut objective = ProbeObjective::new(x, y, weights, c)?;
    if params.len() != objective.n_params() {
        return Err(Error::Shape(format!(
            "parameter vector has length {}, expected {}",
            params.len(),
            objective.n_params()
        )));
    }
    let non_finite = |v: &[T]| v.iter().any(|t| !t.is_finite());
    if non_finite(params) || x.iter().any(|t| !t.is_finite()) || !c.is_finite() {
        return Err(Error::numerical(
            "non-finite parameters, features or C",
            params.iter().map(|v| v.to_f64_lossy()).collect(),
        ));
    }
    let mut grad = vec![T::zero(); params.len()];
    let value = objective.evaluate(params, &mut grad);
    if !value.is_finite() || non_finite(&grad) {
        return Err(Error::numerical(
            "objective evaluated to a non-finite value",
            params.iter().map(|v| v.to_f64_lossy()).collect(),
        ));
    }
    Ok((value, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub status: Status,
    pub iterations: usize,
    pub objective: f64,
    pub grad_inf_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedProbe<T> {
    pub model: ModelParams<T>,
    pub report: FitReport,
}

/// Fits the probe on an explicit matrix, starting from all-zero parameters.
pub fn fit_rows<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: &[usize],
    classes: &[String],
    cfg: &ProbeConfig,
) -> Result<FittedProbe<T>> {
    cfg.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "training features contain non-finite values",
            Vec::new(),
        ));
    }
    let weights = ClassWeights::from_labels(y, classes.len(), cfg.class_weighting)?;
    let mut objective = ProbeObjective::new(x, y, &weights, T::of(cfg.c))?;
    let x0 = vec![T::zero(); objective.n_params()];
    let outcome = optimizer::minimize(&mut objective, &x0, &cfg.optimizer())?;
    let model = ModelParams::from_flat(&outcome.x_final, classes.len(), x.ncols(), classes.to_vec(), cfg);
    Ok(FittedProbe {
        model,
        report: FitReport {
            status: outcome.status,
            iterations: outcome.iterations_used,
            objective: outcome.f_final.to_f64_lossy(),
            grad_inf_norm: outcome.grad_inf_norm.to_f64_lossy(),
        },
    })
}

/// Fits the probe on the selected training rows.
pub fn fit<T: Scalar>(
    ds: &EmbeddingDataset<T>,
    selection: &SampleSelection,
    cfg: &ProbeConfig,
) -> Result<FittedProbe<T>> {
    let (x, y) = ds.gather(&selection.selected)?;
    fit_rows(x.view(), &y, ds.classes(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("c{c}")).collect()
    }

    #[test]
    fn zero_parameters_cost_log_k_per_sample() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [0.8, -0.6]];
        let y = [0, 1, 2, 2];
        let w = ClassWeights::uniform(3);
        let (value, _) = objective_and_gradient(&[0.0; 9], x.view(), &y, &w, 10.0).unwrap();
        assert!((value - 4.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn doubling_c_halves_the_penalty() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]];
        let y = [0, 1, 1];
        let w = ClassWeights::from_labels(&y, 2, ClassWeighting::Balanced).unwrap();
        let params = [0.3f64, -1.2, 0.7, 0.4, 0.1, -0.2];
        let loss_only = objective_and_gradient(&params, x.view(), &y, &w, 1e300).unwrap().0;
        let j10 = objective_and_gradient(&params, x.view(), &y, &w, 10.0).unwrap().0;
        let j20 = objective_and_gradient(&params, x.view(), &y, &w, 20.0).unwrap().0;
        assert!(((j20 - loss_only) - 0.5 * (j10 - loss_only)).abs() < 1e-12);
        // penalty covers W only: ‖W‖² = 0.09 + 1.44 + 0.49 + 0.16
        assert!(((j10 - loss_only) - 2.18 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_weights_from_selected_counts() {
        let mut y = vec![0; 10];
        y.extend(vec![1; 30]);
        let w = ClassWeights::<f64>::from_labels(&y, 2, ClassWeighting::Balanced).unwrap();
        assert!((w.values()[0] - 2.0).abs() < 1e-15);
        assert!((w.values()[1] - 40.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn missing_class_cannot_be_weighted() {
        let err = ClassWeights::<f64>::from_labels(&[0, 0, 2], 3, ClassWeighting::Balanced).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn separable_problem_is_fit_exactly_with_finite_weights() {
        let x = array![
            [1.0, 0.1],
            [0.9, -0.2],
            [0.95, 0.3],
            [-1.0, 0.2],
            [-0.8, -0.1],
            [-0.9, 0.4]
        ];
        let y = [0, 0, 0, 1, 1, 1];
        let fitted = fit_rows(x.view(), &y, &names(2), &ProbeConfig::default()).unwrap();
        assert_eq!(fitted.model.predict(x.view()).unwrap(), y);
        let norm: f64 = fitted.model.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm.is_finite() && norm < 100.0, "norm {norm}");
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = ModelParams::<f64>::zeros(names(4), 3, &ProbeConfig::default());
        let x = array![[0.1, 0.2, 0.3], [5.0, -1.0, 2.0]];
        let p = model.predict_proba(x.view()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        // all logits tie, so the lowest index wins
        assert_eq!(model.predict(x.view()).unwrap(), vec![0, 0]);
    }

    #[test]
    fn intercept_shift_keeps_probabilities() {
        let mut model = ModelParams::<f64>::zeros(names(3), 2, &ProbeConfig::default());
        model.weights = array![[1.0, -2.0], [0.5, 0.5], [-1.0, 3.0]];
        model.intercept = array![0.1, -0.3, 0.2];
        let x = array![[0.6, 0.8], [1.0, 0.0], [-0.3, 0.2]];
        let before = model.predict_proba(x.view()).unwrap();
        let labels = model.predict(x.view()).unwrap();
        model.intercept.mapv_inplace(|b| b + 1234.5);
        let after = model.predict_proba(x.view()).unwrap();
        for (a, b) in before.iter().zip(after.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(model.predict(x.view()).unwrap(), labels);
        for row in after.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn naive_softmax_agrees() {
        let mut model = ModelParams::<f64>::zeros(names(2), 3, &ProbeConfig::default());
        model.weights = array![[0.3, -0.7, 1.1], [-0.4, 0.2, 0.9]];
        model.intercept = array![0.05, -0.15];
        let x = array![[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.5, 0.5, -0.5]];
        let p = model.predict_proba(x.view()).unwrap();
        for i in 0..3 {
            let z: Vec<f64> = (0..2)
                .map(|c| model.intercept[c] + (0..3).map(|j| model.weights[[c, j]] * x[[i, j]]).sum::<f64>())
                .collect();
            let denom: f64 = z.iter().map(|v| v.exp()).sum();
            for c in 0..2 {
                assert!((p[[i, c]] - z[c].exp() / denom).abs() < 1e-15);
            }
        }
        let single: ModelParams<f32> = ModelParams::from_json(&model.to_json().unwrap()).unwrap();
        let p32 = single.predict_proba(x.mapv(|v| v as f32).view()).unwrap();
        for (a, b) in p.iter().zip(p32.iter()) {
            assert!((a - *b as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn dominant_logit_and_tie() {
        let mut model = ModelParams::<f64>::zeros(names(3), 1, &ProbeConfig::default());
        model.intercept = array![0.0, 5.0, 1.0];
        assert_eq!(model.predict(array![[0.0]].view()).unwrap(), vec![1]);
        model.intercept = array![0.0, 2.0, 2.0];
        assert_eq!(model.predict(array![[0.0]].view()).unwrap(), vec![1]);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let model = ModelParams::<f64>::zeros(names(2), 3, &ProbeConfig::default());
        assert!(matches!(model.predict(array![[1.0, 2.0]].view()), Err(Error::Shape(_))));
    }

    #[test]
    fn json_round_trip() {
        let mut model = ModelParams::<f64>::zeros(names(2), 2, &ProbeConfig::default());
        model.weights = array![[1.5, -2.25], [0.125, 3.0]];
        model.intercept = array![-0.5, 0.5];
        let back = ModelParams::<f64>::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn non_finite_input_is_numerical_error() {
        let x = array![[f64::NAN, 0.0]];
        let w = ClassWeights::uniform(2);
        let err = objective_and_gradient(&[0.0; 6], x.view(), &[0], &w, 1.0).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }
}
