//! Artificial curve collections drawn from four point distributions:
//! `y = x`, `y = -x`, a symmetric mix of both, and a noisy circle.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::PointDataset;
use crate::error::{Error, Result};
use crate::optimizer::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    F1,
    F2,
    F3,
    F4,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::F1, Pattern::F2, Pattern::F3, Pattern::F4];

    /// Point for a latent `z`, noise pair and slope sign (used by `F3` only).
    pub fn point(self, z: f64, eps_x: f64, eps_y: f64, positive_slope: bool) -> (f64, f64) {
        match self {
            Pattern::F1 => (z + eps_x, z + eps_y),
            Pattern::F2 => (z + eps_x, -z + eps_y),
            Pattern::F3 => {
                let alpha = if positive_slope { 1.0 } else { -1.0 };
                (z + eps_x, alpha * z + eps_y)
            }
            Pattern::F4 => {
                let angle = PI * (1.0 + z);
                ((0.75 + eps_x) * angle.cos(), (0.75 + eps_y) * angle.sin())
            }
        }
    }

    /// Draw `z ~ U(-1, 1)` and Gaussian noise with standard deviation `noise_std`.
    pub fn sample<R: Rng + ?Sized>(self, noise_std: f64, rng: &mut R) -> (f64, f64) {
        let z = rng.random_range(-1.0..1.0);
        let (eps_x, eps_y) = if noise_std > 0.0 {
            let normal = Normal::new(0.0, noise_std).expect("finite positive std");
            (normal.sample(rng), normal.sample(rng))
        } else {
            (0.0, 0.0)
        };
        let positive_slope = rng.random_bool(0.5);
        self.point(z, eps_x, eps_y, positive_slope)
    }
}

/// Generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub total_points: usize,
    pub curves_per_distribution: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(total_points: usize, seed: u64) -> Self {
        Self { total_points, curves_per_distribution: 10, noise_std: 0.25, seed }
    }

    pub fn curves(&self) -> usize {
        4 * self.curves_per_distribution
    }

    /// Pattern of curve label `curve` (`0..curves()`).
    pub fn pattern_of(&self, curve: usize) -> Pattern {
        Pattern::ALL[curve / self.curves_per_distribution]
    }
}

/// A generated dataset plus ground truth, kept beside the dataset.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub dataset: PointDataset,
    /// Raw points `(curve label, x, y)` in generation order.
    pub points: Vec<(usize, f64, f64)>,
    /// Pattern index (`0..4`) of each canonical curve of `dataset`.
    pub truth: Vec<usize>,
}

/// Each point picks a curve uniformly at random, then samples that curve's
/// pattern. Curves that receive no point are absent from the dataset.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    if spec.total_points == 0 || spec.curves_per_distribution == 0 {
        return Err(Error::InvalidArgument("need at least one point and one curve per pattern".into()));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise std {} is not a finite non-negative number", spec.noise_std)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let curves = spec.curves();
    let points: Vec<(usize, f64, f64)> = (0..spec.total_points)
        .map(|_| {
            let curve = rng.random_range(0..curves);
            let (x, y) = spec.pattern_of(curve).sample(spec.noise_std, &mut rng);
            (curve, x, y)
        })
        .collect();
    let dataset = PointDataset::new(&points)?;
    let truth = dataset
        .labels()
        .iter()
        .map(|l| l.parse::<usize>().expect("numeric labels") / spec.curves_per_distribution)
        .collect();
    Ok(SynthData { dataset, points, truth })
}

/// Fraction of curves outside their matched cluster, under the one-to-one
/// matching of found clusters to true groups that maximizes agreement.
pub fn misplacement_rate(fit: &FitResult, truth: &[usize]) -> f64 {
    misplacement_of_assignment(&fit.model.cluster_of_curve, fit.model.k_c, truth)
}

/// [`misplacement_rate`] for a bare assignment.
pub fn misplacement_of_assignment(cluster_of_curve: &[usize], k_c: usize, truth: &[usize]) -> f64 {
    assert_eq!(cluster_of_curve.len(), truth.len(), "assignment and truth cover different curves");
    if truth.is_empty() {
        return 0.0;
    }
    let groups = truth.iter().max().map_or(0, |&g| g + 1);
    assert!(groups <= 16, "matching supports at most 16 true groups");
    let mut overlap = vec![vec![0usize; groups]; k_c];
    for (&c, &g) in cluster_of_curve.iter().zip(truth) {
        overlap[c][g] += 1;
    }
    // best[mask]: max agreement using the groups in `mask`, clusters so far
    let full = 1usize << groups;
    let mut best = vec![usize::MIN; full];
    let mut reachable = vec![false; full];
    reachable[0] = true;
    best[0] = 0;
    for row in &overlap {
        let (prev_best, prev_reach) = (best.clone(), reachable.clone());
        for mask in 0..full {
            if !prev_reach[mask] {
                continue;
            }
            for (g, &agree) in row.iter().enumerate() {
                if mask & (1 << g) == 0 {
                    let next = mask | (1 << g);
                    let v = prev_best[mask] + agree;
                    if !reachable[next] || v > best[next] {
                        best[next] = v;
                        reachable[next] = true;
                    }
                }
            }
        }
    }
    let agreed = (0..full).filter(|&m| reachable[m]).map(|m| best[m]).max().unwrap_or(0);
    1.0 - agreed as f64 / truth.len() as f64
}
