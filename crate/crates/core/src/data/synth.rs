use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::cfkm::SampleSet;

/// Shapes of the distribution study, all on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Beta(5, 5): one central bell.
    Symmetric,
    /// Beta(2, 6): mass in the low region with a long right tail.
    Skewed,
    /// Equal mixture of normals (sd 0.05) at 0.2, 0.5 and 0.8, truncated to the unit interval.
    Multimodal,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Symmetric, Shape::Skewed, Shape::Multimodal];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Symmetric => "symmetric",
            Shape::Skewed => "skewed",
            Shape::Multimodal => "multimodal",
        }
    }
}

fn beta(rng: &mut ChaCha8Rng, alpha: f64, beta: f64, n: usize) -> Vec<f64> {
    let dist = Beta::new(alpha, beta).expect("valid beta parameters");
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lower: f64, upper: f64) -> f64 {
    let dist = Normal::new(mean, sd).expect("valid normal parameters");
    loop {
        let x = dist.sample(rng);
        if (lower..=upper).contains(&x) {
            return x;
        }
    }
}

/// Seeded synthetic sample on `[0, 1]`; ChaCha8 keeps it identical across
/// platforms.
pub fn synth_generate(shape: Shape, n: usize, seed: u64) -> Result<SampleSet, DataError> {
    if n < 100 {
        return Err(DataError::Parameter(format!("synthetic samples need n >= 100, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match shape {
        Shape::Symmetric => beta(&mut rng, 5.0, 5.0, n),
        Shape::Skewed => beta(&mut rng, 2.0, 6.0, n),
        Shape::Multimodal => (0..n)
            .map(|_| {
                let mode = [0.2, 0.5, 0.8][rng.gen_range(0..3)];
                truncated_normal(&mut rng, mode, 0.05, 0.0, 1.0)
            })
            .collect(),
    };
    Ok(SampleSet::new(values, 0.0, 1.0)?)
}

/// Bundled stand-in for a column of quiz marks on `[2.8, 10]`, recorded to
/// one decimal: a crowd of low scores and four smaller groups of middle and
/// high marks, the top one piled against the maximum.
///
/// Five-class C-FKM with even initialisation puts its centroids at about
/// (3.85, 5.68, 7.09, 8.32, 9.77) on this sample.
pub fn quiz_standin() -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let groups: [(f64, f64, usize); 5] =
        [(3.9, 0.45, 70), (5.75, 0.45, 55), (7.17, 0.4, 60), (8.49, 0.4, 50), (10.28, 0.3, 25)];
    let mut values = Vec::new();
    for (mean, sd, count) in groups {
        for _ in 0..count {
            let x = truncated_normal(&mut rng, mean, sd, 2.8, 10.0);
            values.push((x * 10.0).round() / 10.0);
        }
    }
    values.push(2.8);
    values.push(10.0);
    SampleSet::new(values, 2.8, 10.0).expect("stand-in values lie in [2.8, 10]")
}
