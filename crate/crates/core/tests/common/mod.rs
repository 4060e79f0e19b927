//! Independent reference computations used by the integration and acceptance tests.
//! Nothing here calls into the probe's objective code.
#![allow(dead_code, clippy::needless_range_loop)]

use labelprobe::logreg::ClassWeighting;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Small dense classification problem with unit-norm rows.
#[derive(Clone, Debug)]
pub struct Problem {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub k: usize,
    pub c: f64,
    pub weighting: ClassWeighting,
}

impl Problem {
    pub fn random(seed: u64, n: usize, d: usize, k: usize, c: f64, weighting: ClassWeighting) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.into_iter().map(|a| a / norm).collect()
            })
            .collect();
        // first k rows cover every class, the rest are random
        let y = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        Self { x, y, k, c, weighting }
    }

    pub fn d(&self) -> usize {
        self.x[0].len()
    }

    pub fn n_params(&self) -> usize {
        self.k * self.d() + self.k
    }

    pub fn matrix(&self) -> ndarray::Array2<f64> {
        let n = self.x.len();
        ndarray::Array2::from_shape_fn((n, self.d()), |(i, j)| self.x[i][j])
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.k).map(|c| format!("c{c}")).collect()
    }

    pub fn sample_weights(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.k];
        for &l in &self.y {
            counts[l] += 1.0;
        }
        let n = self.y.len() as f64;
        self.y
            .iter()
            .map(|&l| match self.weighting {
                ClassWeighting::Uniform => 1.0,
                ClassWeighting::Balanced => n / (self.k as f64 * counts[l]),
            })
            .collect()
    }

    /// Objective and gradient by explicit loops.
    pub fn naive(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let (k, d) = (self.k, self.d());
        let s = self.sample_weights();
        let w = |c: usize, j: usize| params[c * d + j];
        let b = |c: usize| params[k * d + c];
        let mut value = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (i, xi) in self.x.iter().enumerate() {
            let z: Vec<f64> = (0..k)
                .map(|c| b(c) + (0..d).map(|j| w(c, j) * xi[j]).sum::<f64>())
                .collect();
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = z.iter().map(|v| (v - m).exp()).sum();
            value += s[i] * (m + denom.ln() - z[self.y[i]]);
            for c in 0..k {
                let p = (z[c] - m).exp() / denom;
                let r = s[i] * (p - if c == self.y[i] { 1.0 } else { 0.0 });
                for j in 0..d {
                    grad[c * d + j] += r * xi[j];
                }
                grad[k * d + c] += r;
            }
        }
        for c in 0..k {
            for j in 0..d {
                value += w(c, j) * w(c, j) / (2.0 * self.c);
                grad[c * d + j] += w(c, j) / self.c;
            }
        }
        (value, grad)
    }
}

/// Plain gradient descent from zero: fixed step 1e-2, halved whenever a step
/// would increase the objective. Stops after `max_steps`, once the gradient
/// vanishes to `1e-10`, or once rounding noise has driven the step below
/// `1e-10` (every further halving would only repeat the same rejection).
pub fn gradient_descent_oracle(problem: &Problem, max_steps: usize) -> f64 {
    let mut x = vec![0.0; problem.n_params()];
    let (mut f, mut g) = problem.naive(&x);
    let mut step = 1e-2;
    for _ in 0..max_steps {
        if step < 1e-10 || g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-10 {
            break;
        }
        let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let (ft, gt) = problem.naive(&trial);
        if ft > f {
            step *= 0.5;
            continue;
        }
        x = trial;
        f = ft;
        g = gt;
    }
    f
}

/// Mixed relative error `|a − b| / max(1, |a|, |b|)`, maximized over components.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / 1f64.max(x.abs()).max(y.abs()))
        .fold(0.0, f64::max)
}

/// Central differences of `f` with step `h`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = f(&probe);
            probe[j] = x[j] - h;
            let down = f(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Solves `a · x = rhs` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / a[row][row];
    }
    x
}

/// Symmetric positive definite matrix with eigenvalues log-spaced in `[1, cond]`.
pub fn spd_matrix(rng: &mut ChaCha8Rng, dim: usize, cond: f64) -> Vec<Vec<f64>> {
    // Gram–Schmidt on a random Gaussian matrix for the eigenvectors
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while q.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for u in &q {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= p * ui;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            q.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let eig: Vec<f64> = (0..dim)
        .map(|i| {
            if dim == 1 {
                1.0
            } else {
                cond.powf(i as f64 / (dim - 1) as f64)
            }
        })
        .collect();
    (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| (0..dim).map(|i| eig[i] * q[i][r] * q[i][c]).sum())
                .collect()
        })
        .collect()
}

/// Well-separated Gaussian clusters, `dim` ≥ `n_classes`: class `c` is centred on `e_c`.
pub fn separated_gaussians(
    n_classes: usize,
    dim: usize,
    train_per_class: usize,
    test_per_class: usize,
    noise: f64,
    seed: u64,
) -> (labelprobe::Dataset, labelprobe::Dataset) {
    use labelprobe::store::{EmbeddingDataset, SplitTag};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<String> = (0..n_classes).map(|c| format!("g{c}")).collect();
    let mut make = |per_class: usize, split| {
        let labels: Vec<usize> = (0..n_classes).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
        let data = ndarray::Array2::from_shape_fn((labels.len(), dim), |(i, j)| {
            let mean = if j == labels[i] { 1.0 } else { 0.0 };
            mean + noise * rng.sample::<f64, _>(StandardNormal)
        });
        EmbeddingDataset::new(data, labels, classes.clone(), split)
            .unwrap()
            .normalize_rows()
            .unwrap()
    };
    let train = make(train_per_class, SplitTag::Train);
    let test = make(test_per_class, SplitTag::Test);
    (train, test)
}
