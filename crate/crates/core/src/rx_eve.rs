//! The eavesdropper: recovers one leaked byte from each frame's STS.
//!
//! Eve synchronizes like Bob (minus the nominal-STS check), removes the carrier
//! offset and the LTS-derived common phase from the STS, averages its ten periods,
//! and reads the magnitudes of the eight corrupted subcarriers against a threshold
//! derived from the four reference subcarriers.

use crate::covert::{CORRUPTED_SUBCARRIERS, DEFAULT_ALPHA, REFERENCE_SUBCARRIERS};
use crate::error::{Error, Result};
use crate::ofdm::{
    forward_transform, ComplexSample, SubcarrierGrid, FFT_SIZE, LTS_LEN, LTS_OFFSET,
    SHORT_STS_LEN, STS_LEN,
};
use crate::rx_bob::{
    average_sts_period, corrected_region, detect_frame_with, estimate_channel, SyncConfig,
    SyncResult,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EveConfig {
    /// Must equal the transmitter's alpha.
    pub alpha: f64,
    pub reference_indices: [i32; 4],
    pub bit_order: [i32; 8],
    /// Bit 1 means "attenuated" (magnitude below threshold). Setting this to false
    /// flips the decision convention.
    pub one_below_threshold: bool,
    pub sync: SyncConfig,
}

impl Default for EveConfig {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA)
    }
}

impl EveConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            reference_indices: REFERENCE_SUBCARRIERS,
            bit_order: CORRUPTED_SUBCARRIERS,
            one_below_threshold: true,
            sync: SyncConfig::eve(),
        }
    }

    pub fn threshold_factor(&self) -> f64 {
        1.0 - self.alpha / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let mut all: Vec<i32> = self
            .reference_indices
            .iter()
            .chain(self.bit_order.iter())
            .copied()
            .collect();
        all.sort_unstable();
        let mut expected: Vec<i32> = REFERENCE_SUBCARRIERS
            .iter()
            .chain(CORRUPTED_SUBCARRIERS.iter())
            .copied()
            .collect();
        expected.sort_unstable();
        if all != expected {
            return Err(Error::Config(
                "reference and bit-order subcarriers must partition the STS support".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractedByte {
    pub value: u8,
    /// Signed distance of each corrupted bin (MSB first) from the threshold;
    /// positive means "above threshold".
    pub margins: [f64; 8],
    pub frame_index: u64,
}

/// The 160 STS samples at the detected frame start, with carrier offset and the
/// LTS-estimated common phase removed.
pub fn correct_sts(raw: &[ComplexSample], sync: &SyncResult, sample_rate: f64) -> Result<Vec<ComplexSample>> {
    if !sync.detected {
        return Err(Error::Extraction("frame not synchronized".into()));
    }
    let region = corrected_region(raw, sync, 0, LTS_OFFSET + LTS_LEN, sample_rate);
    let gains = estimate_channel(&region[LTS_OFFSET..LTS_OFFSET + LTS_LEN])?;
    let common: ComplexSample = (-32..32).map(|k| gains.bin(k)).sum();
    let derot = if common.norm() > 0.0 {
        ComplexSample::from_polar(1.0, -common.arg())
    } else {
        ComplexSample::new(1.0, 0.0)
    };
    Ok(region[..STS_LEN].iter().map(|v| v * derot).collect())
}

/// Spectrum of the corrected STS: the ten periods are averaged, the average is
/// tiled back to 64 samples and transformed, so bin magnitudes are on the same
/// unitary scale as the transmitted grid.
pub fn sts_spectrum(corrected_sts: &[ComplexSample]) -> Result<SubcarrierGrid> {
    if corrected_sts.len() != STS_LEN {
        return Err(Error::Dimension {
            expected: STS_LEN,
            actual: corrected_sts.len(),
        });
    }
    let avg = average_sts_period(corrected_sts);
    let tiled: Vec<ComplexSample> = avg.iter().copied().cycle().take(FFT_SIZE).collect();
    debug_assert_eq!(FFT_SIZE % SHORT_STS_LEN, 0);
    forward_transform(&tiled)
}

/// Spectrum of one un-averaged 64-sample STS slice, for comparing averaging gain.
pub fn single_period_spectrum(corrected_sts: &[ComplexSample]) -> Result<SubcarrierGrid> {
    if corrected_sts.len() < FFT_SIZE {
        return Err(Error::Dimension {
            expected: FFT_SIZE,
            actual: corrected_sts.len(),
        });
    }
    forward_transform(&corrected_sts[..FFT_SIZE])
}

/// Threshold decision on the corrupted bins.
pub fn extract_byte(grid: &SubcarrierGrid, cfg: &EveConfig, frame_index: u64) -> Result<ExtractedByte> {
    let reference = cfg
        .reference_indices
        .iter()
        .map(|&k| grid.magnitude(k))
        .sum::<f64>()
        / cfg.reference_indices.len() as f64;
    if !(reference > 1e-12) || !reference.is_finite() {
        return Err(Error::Extraction(format!(
            "reference magnitude {reference} indicates no signal"
        )));
    }
    let threshold = reference * cfg.threshold_factor();
    let mut value = 0u8;
    let mut margins = [0.0; 8];
    for (j, &k) in cfg.bit_order.iter().enumerate() {
        let margin = grid.magnitude(k) - threshold;
        margins[j] = margin;
        let below = margin < 0.0;
        if below == cfg.one_below_threshold {
            value |= 1 << (7 - j);
        }
    }
    Ok(ExtractedByte {
        value,
        margins,
        frame_index,
    })
}

/// Result of listening for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EveOutcome {
    /// Sync failed; the byte position is kept so voting can align copies.
    Erasure { frame_index: u64 },
    Byte(ExtractedByte, SyncResult),
}

impl EveOutcome {
    pub fn value(&self) -> Option<u8> {
        match self {
            EveOutcome::Erasure { .. } => None,
            EveOutcome::Byte(b, _) => Some(b.value),
        }
    }
}

/// Full eavesdropper chain for the first frame at or after `from`.
pub fn receive(raw: &[ComplexSample], from: usize, frame_index: u64, cfg: &EveConfig) -> EveOutcome {
    let sync = detect_frame_with(raw, from, &cfg.sync);
    if !sync.detected {
        return EveOutcome::Erasure { frame_index };
    }
    let decoded = correct_sts(raw, &sync, cfg.sync.sample_rate)
        .and_then(|sts| sts_spectrum(&sts))
        .and_then(|grid| extract_byte(&grid, cfg, frame_index));
    match decoded {
        Ok(b) => EveOutcome::Byte(b, sync),
        Err(_) => EveOutcome::Erasure { frame_index },
    }
}

/// Single-owner accumulator of leaked bytes in frame order.
#[derive(Debug, Clone, Default)]
pub struct StreamAssembler {
    bytes: Vec<Option<u8>>,
}

impl StreamAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, outcome: &EveOutcome) {
        self.bytes.push(outcome.value());
    }

    pub fn erasures(&self) -> usize {
        self.bytes.iter().filter(|b| b.is_none()).count()
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Splits the stream into consecutive copies of `copy_len` bytes.
    pub fn copies(&self, copy_len: usize) -> Vec<Vec<Option<u8>>> {
        self.bytes.chunks(copy_len).map(|c| c.to_vec()).collect()
    }

    pub fn bytes(&self) -> &[Option<u8>] {
        &self.bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, ChannelConfig};
    use crate::covert::{build_lookup_table, encode_sts_grid, CovertConfig};
    use crate::ofdm::{assemble_frame, sts_amplitude, PhyConfig};

    fn frame_for(byte: u8, alpha: f64) -> Vec<ComplexSample> {
        let table = build_lookup_table(alpha).unwrap();
        assemble_frame(table.row(byte), &[true; 96], &PhyConfig::default())
            .unwrap()
            .samples()
    }

    #[test]
    fn noiseless_byte_roundtrip_from_grid() {
        let cfg = EveConfig::new(0.15);
        let covert = CovertConfig::new(0.15).unwrap();
        let g = encode_sts_grid(0xA0, &covert);
        assert_eq!(extract_byte(&g, &cfg, 0).unwrap().value, 0xA0);
        let zero = extract_byte(&encode_sts_grid(0x00, &covert), &cfg, 0).unwrap();
        assert_eq!(zero.value, 0);
        assert!(zero.margins.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn flipped_convention() {
        let mut cfg = EveConfig::new(0.15);
        cfg.one_below_threshold = false;
        let g = encode_sts_grid(0xA0, &CovertConfig::new(0.15).unwrap());
        assert_eq!(extract_byte(&g, &cfg, 0).unwrap().value, !0xA0);
    }

    #[test]
    fn zero_grid_is_extraction_error() {
        let err = extract_byte(&SubcarrierGrid::zeros(), &EveConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Extraction(_)));
    }

    #[test]
    fn noiseless_spectrum_magnitudes() {
        let full = (2.0f64).sqrt() * sts_amplitude();
        let rx = frame_for(0x00, 0.15);
        let g = sts_spectrum(&rx[..STS_LEN]).unwrap();
        for (k, v) in g.nonzero(1e-9) {
            assert!((v.norm() - full).abs() < 1e-9 * full, "bin {k}");
        }
        assert_eq!(g.nonzero(1e-9).len(), 12);

        let rx = frame_for(0xFF, 0.15);
        let g = sts_spectrum(&rx[..STS_LEN]).unwrap();
        for k in CORRUPTED_SUBCARRIERS {
            assert!((g.magnitude(k) - 0.85 * full).abs() < 1e-9 * full);
        }
        for k in REFERENCE_SUBCARRIERS {
            assert!((g.magnitude(k) - full).abs() < 1e-9 * full);
        }
    }

    #[test]
    fn corrected_sts_matches_transmitted_without_impairments() {
        let rx = frame_for(0x5A, 0.15);
        let sync = detect_frame_with(&rx, 0, &SyncConfig::eve());
        assert!(sync.detected);
        let sts = correct_sts(&rx, &sync, 20e6).unwrap();
        for (a, b) in sts.iter().zip(&rx[..STS_LEN]) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn phase_is_removed() {
        let tx = frame_for(0x3C, 0.15);
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let rx = apply_channel(
                &tx,
                &ChannelConfig {
                    snr_db: 30.0,
                    phase_rad: std::f64::consts::FRAC_PI_4,
                    timing_offset: 64,
                    seed,
                    ..ChannelConfig::ideal()
                },
            );
            let sync = detect_frame_with(&rx, 0, &SyncConfig::eve());
            let sts = correct_sts(&rx, &sync, 20e6).unwrap();
            let dot: ComplexSample = tx[..STS_LEN].iter().zip(&sts).map(|(t, r)| t.conj() * r).sum();
            worst = worst.max(dot.arg().abs());
        }
        // Residual CFO error carried over ~180 samples dominates; magnitudes do not care.
        assert!(worst < 0.03, "residual phase {worst}");
    }

    #[test]
    fn cfo_is_removed() {
        let tx = frame_for(0x81, 0.15);
        let rx = apply_channel(
            &tx,
            &ChannelConfig {
                snr_db: 30.0,
                cfo_hz: 5000.0,
                timing_offset: 50,
                seed: 3,
                ..ChannelConfig::ideal()
            },
        );
        let sync = detect_frame_with(&rx, 0, &SyncConfig::eve());
        let sts = correct_sts(&rx, &sync, 20e6).unwrap();
        let p: ComplexSample = (0..STS_LEN - 16).map(|n| sts[n].conj() * sts[n + 16]).sum();
        assert!(p.arg().abs() < 0.01);
    }

    #[test]
    fn threshold_geometry() {
        for alpha in [0.05, 0.15, 0.30] {
            let cfg = EveConfig::new(alpha);
            let covert = CovertConfig::new(alpha).unwrap();
            let reference = (2.0f64).sqrt() * sts_amplitude();
            for b in [0x00u8, 0x01, 0xA0, 0xFF, 0x7E] {
                let e = extract_byte(&encode_sts_grid(b, &covert), &cfg, 0).unwrap();
                let min = e.margins.iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
                assert!((min - alpha / 2.0 * reference).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn erasure_on_noise() {
        let noise = vec![ComplexSample::new(0.0, 0.0); 2000];
        assert_eq!(
            receive(&noise, 0, 7, &EveConfig::default()),
            EveOutcome::Erasure { frame_index: 7 }
        );
    }

    #[test]
    fn assembler_keeps_positions() {
        let mut s = StreamAssembler::new();
        s.push(&EveOutcome::Erasure { frame_index: 0 });
        s.push(&EveOutcome::Erasure { frame_index: 1 });
        assert_eq!(s.erasures(), 2);
        assert_eq!(s.copies(1).len(), 2);
    }
}
