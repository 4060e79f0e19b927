//! Gaussian class clusters on the unit sphere, for tests and demos.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::store::{EmbeddingDataset, SplitTag};
use crate::{Result, Scalar};

#[derive(Clone, Debug)]
pub struct GaussianClasses {
    pub dim: usize,
    /// Training rows per class; its length sets the number of classes.
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
    /// Distance of every class mean from the origin.
    pub separation: f64,
    /// Per-coordinate standard deviation around the mean.
    pub noise: f64,
    pub seed: u64,
}

impl GaussianClasses {
    pub fn balanced(n_classes: usize, dim: usize, train: usize, test: usize) -> Self {
        Self {
            dim,
            train_counts: vec![train; n_classes],
            test_counts: vec![test; n_classes],
            separation: 1.0,
            noise: 0.1,
            seed: 0,
        }
    }

    /// Train and test splits, rows normalized to unit length.
    pub fn generate<T: Scalar>(&self) -> Result<(EmbeddingDataset<T>, EmbeddingDataset<T>)> {
        assert_eq!(self.train_counts.len(), self.test_counts.len(), "class count mismatch");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let means: Vec<Vec<f64>> = (0..self.train_counts.len())
            .map(|_| {
                let v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / norm * self.separation).collect()
            })
            .collect();
        let classes: Vec<String> = (0..means.len()).map(|c| format!("class{c:02}")).collect();
        let mut draw = |counts: &[usize], split: SplitTag| {
            let labels: Vec<usize> = counts
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
                .collect();
            let mut data = Array2::<T>::zeros((labels.len(), self.dim));
            for (mut row, &label) in data.rows_mut().into_iter().zip(&labels) {
                for (x, &m) in row.iter_mut().zip(&means[label]) {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = T::of(m + self.noise * z);
                }
            }
            EmbeddingDataset::new(data, labels, classes.clone(), split)?.normalize_rows()
        };
        let train = draw(&self.train_counts, SplitTag::Train)?;
        let test = draw(&self.test_counts, SplitTag::Test)?;
        Ok((train, test))
    }
}
