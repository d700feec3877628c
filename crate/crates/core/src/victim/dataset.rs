//! Three Gaussian blobs in the plane.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const NUM_CLASSES: usize = 3;
pub const TRAIN_POINTS: usize = 3000;
pub const TEST_POINTS: usize = 1000;
pub const STANDARD_SEED: u64 = 2024;

const RADIUS: f32 = 3.0;
const SPREAD: f32 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub train: Vec<([f32; 2], usize)>,
    pub test: Vec<([f32; 2], usize)>,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, SPREAD).expect("valid spread");
        let centers: Vec<[f32; 2]> = (0..NUM_CLASSES)
            .map(|c| {
                let angle = std::f32::consts::FRAC_PI_2
                    + c as f32 * 2.0 * std::f32::consts::PI / NUM_CLASSES as f32;
                [RADIUS * angle.cos(), RADIUS * angle.sin()]
            })
            .collect();
        let mut split = |n: usize| -> Vec<([f32; 2], usize)> {
            (0..n)
                .map(|i| {
                    let class = i % NUM_CLASSES;
                    let c = centers[class];
                    let x = [c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)];
                    (x, class)
                })
                .collect()
        };
        let train = split(TRAIN_POINTS);
        let test = split(TEST_POINTS);
        Self { train, test, seed }
    }

    pub fn standard() -> Self {
        Self::generate(STANDARD_SEED)
    }

    pub fn class_counts(points: &[([f32; 2], usize)]) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for (_, c) in points {
            counts[*c] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_balance() {
        let d = SyntheticDataset::standard();
        assert_eq!(d.train.len(), 3000);
        assert_eq!(d.test.len(), 1000);
        assert_eq!(SyntheticDataset::class_counts(&d.train), [1000; 3]);
        let t = SyntheticDataset::class_counts(&d.test);
        assert!(t.iter().all(|&c| (333..=334).contains(&c)));
    }

    #[test]
    fn deterministic() {
        assert_eq!(SyntheticDataset::generate(5), SyntheticDataset::generate(5));
        assert_ne!(SyntheticDataset::generate(5), SyntheticDataset::generate(6));
    }
}
