//! Flat impairment channel: timing padding, static phase, carrier offset and AWGN.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ofdm::{mean_power, ComplexSample, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Signal-to-noise ratio in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub cfo_hz: f64,
    pub phase_rad: f64,
    /// Noise-only samples prepended ahead of the frame.
    pub timing_offset: usize,
    pub seed: u64,
    pub sample_rate: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ChannelConfig {
    pub fn ideal() -> Self {
        Self {
            snr_db: f64::INFINITY,
            cfo_hz: 0.0,
            phase_rad: 0.0,
            timing_offset: 0,
            seed: 0,
            sample_rate: SAMPLE_RATE_HZ,
        }
    }

    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            seed,
            ..Self::ideal()
        }
    }
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adds complex white Gaussian noise of total variance `signal_power / snr`.
fn add_noise(samples: &mut [ComplexSample], signal_power: f64, snr_db: f64, seed: u64) {
    if snr_db == f64::INFINITY || signal_power == 0.0 {
        return;
    }
    let variance = signal_power / 10f64.powf(snr_db / 10.0);
    let sigma = (variance / 2.0).sqrt();
    let mut rng = noise_rng(seed);
    for s in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *s += ComplexSample::new(re * sigma, im * sigma);
    }
}

/// AWGN referenced to the measured mean power of `samples`.
pub fn apply_awgn(samples: &[ComplexSample], snr_db: f64, seed: u64) -> Vec<ComplexSample> {
    let mut out = samples.to_vec();
    add_noise(&mut out, mean_power(samples), snr_db, seed);
    out
}

/// Multiplies sample n by exp(j·2π·cfo·n/fs).
pub fn apply_cfo(samples: &[ComplexSample], cfo_hz: f64, sample_rate: f64) -> Vec<ComplexSample> {
    let mut out = samples.to_vec();
    rotate_cfo(&mut out, cfo_hz, sample_rate, 0);
    out
}

/// In-place carrier rotation with sample index starting at `start`.
pub(crate) fn rotate_cfo(samples: &mut [ComplexSample], cfo_hz: f64, sample_rate: f64, start: usize) {
    if cfo_hz == 0.0 {
        return;
    }
    let w = 2.0 * std::f64::consts::PI * cfo_hz / sample_rate;
    for (n, s) in samples.iter_mut().enumerate() {
        *s *= ComplexSample::from_polar(1.0, w * (n + start) as f64);
    }
}

/// Padding, then phase, then CFO, then AWGN. Noise power is set by the frame's own
/// mean power so padding does not dilute the SNR reference.
pub fn apply_channel(frame_samples: &[ComplexSample], cfg: &ChannelConfig) -> Vec<ComplexSample> {
    apply_channel_at_power(frame_samples, cfg, mean_power(frame_samples))
}

/// As [`apply_channel`], with the SNR referenced to an explicit signal power. Used
/// for multi-frame captures whose idle gaps would otherwise lower the reference.
pub fn apply_channel_at_power(
    samples: &[ComplexSample],
    cfg: &ChannelConfig,
    signal_power: f64,
) -> Vec<ComplexSample> {
    let mut out = vec![ComplexSample::new(0.0, 0.0); cfg.timing_offset];
    out.extend_from_slice(samples);
    if cfg.phase_rad != 0.0 {
        let rot = ComplexSample::from_polar(1.0, cfg.phase_rad);
        out.iter_mut().for_each(|s| *s *= rot);
    }
    rotate_cfo(&mut out, cfg.cfo_hz, cfg.sample_rate, 0);
    add_noise(&mut out, signal_power, cfg.snr_db, cfg.seed);
    out
}

/// Mixes a base seed with a trial index.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    base ^ trial
}

/// SplitMix64 finalizer; decorrelates seeds of neighbouring sweep points.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base.wrapping_add(salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{forward_transform, inverse_transform, SubcarrierGrid};

    fn unit_signal(n: usize) -> Vec<ComplexSample> {
        (0..n)
            .map(|i| ComplexSample::from_polar(1.0, i as f64 * 0.7))
            .collect()
    }

    #[test]
    fn infinite_snr_is_identity() {
        let x = unit_signal(100);
        assert_eq!(apply_awgn(&x, f64::INFINITY, 1), x);
    }

    #[test]
    fn awgn_calibration() {
        let x = unit_signal(1_000_000);
        let y = apply_awgn(&x, 20.0, 11);
        let noise: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - a).norm_sqr())
            .sum::<f64>()
            / x.len() as f64;
        let snr = 10.0 * (mean_power(&x) / noise).log10();
        assert!((snr - 20.0).abs() < 0.1, "measured {snr}");
    }

    #[test]
    fn awgn_deterministic() {
        let x = unit_signal(256);
        assert_eq!(apply_awgn(&x, 10.0, 5), apply_awgn(&x, 10.0, 5));
        assert_ne!(apply_awgn(&x, 10.0, 5), apply_awgn(&x, 10.0, 6));
    }

    #[test]
    fn cfo_zero_and_inverse() {
        let x = unit_signal(500);
        assert_eq!(apply_cfo(&x, 0.0, 20e6), x);
        let y = apply_cfo(&apply_cfo(&x, 3300.0, 20e6), -3300.0, 20e6);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn cfo_of_one_bin_moves_energy() {
        let mut g = SubcarrierGrid::zeros();
        g.set_bin(5, ComplexSample::new(1.0, 0.0));
        let t = inverse_transform(&g);
        let shifted = apply_cfo(&t, 20e6 / 64.0, 20e6);
        let out = forward_transform(&shifted).unwrap();
        assert!((out.magnitude(6) - 1.0).abs() < 1e-12);
        assert!(out.magnitude(5) < 1e-12);
    }

    #[test]
    fn unit_rotations_preserve_magnitude() {
        let x = unit_signal(1000);
        let cfg = ChannelConfig {
            cfo_hz: 12_345.0,
            phase_rad: 1.1,
            ..ChannelConfig::ideal()
        };
        let y = apply_channel(&x, &cfg);
        for (a, b) in x.iter().zip(&y) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn timing_offset_pads() {
        let x = unit_signal(50);
        let cfg = ChannelConfig {
            timing_offset: 100,
            ..ChannelConfig::ideal()
        };
        let y = apply_channel(&x, &cfg);
        assert_eq!(y.len(), 150);
        assert!(y[..100].iter().all(|v| v.norm() == 0.0));
        assert_eq!(&y[100..], &x[..]);
    }

    #[test]
    fn padding_does_not_change_noise_reference() {
        let x = unit_signal(200_000);
        let cfg = ChannelConfig {
            timing_offset: 200_000,
            ..ChannelConfig::awgn(10.0, 4)
        };
        let y = apply_channel(&x, &cfg);
        let noise = mean_power(&y[..200_000]);
        assert!((noise - 0.1).abs() < 0.002, "noise power {noise}");
    }

    #[test]
    fn channel_deterministic() {
        let x = unit_signal(300);
        let cfg = ChannelConfig {
            snr_db: 12.0,
            cfo_hz: 900.0,
            phase_rad: 0.3,
            timing_offset: 7,
            seed: 99,
            sample_rate: 20e6,
        };
        assert_eq!(apply_channel(&x, &cfg), apply_channel(&x, &cfg));
    }

    #[test]
    fn seeds_mix() {
        assert_eq!(trial_seed(10, 3), 9);
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
    }
}
