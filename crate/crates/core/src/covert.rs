//! Transmit-side covert modulation of the short training sequence.
//!
//! One leaked byte per frame. Bit `j` of the byte (MSB first) rides on subcarrier
//! `CORRUPTED_SUBCARRIERS[j]`; a one attenuates that bin by `1 - alpha`, a zero
//! leaves it alone. The remaining four occupied STS bins are never touched and serve
//! as the receiver's amplitude reference.
//!
//! Because every occupied STS bin sits on a multiple of four, any such modulation
//! keeps the 16-sample periodicity that frame detection relies on.

use crate::error::{Error, Result};
use crate::ofdm::{
    assemble_frame, nominal_sts_grid, short_sts_from_grid, Frame, PhyConfig, ShortSts,
    SubcarrierGrid,
};

/// Carrier order for byte bits, MSB first.
pub const CORRUPTED_SUBCARRIERS: [i32; 8] = [-24, -20, -16, -8, 4, 8, 16, 24];
pub const REFERENCE_SUBCARRIERS: [i32; 4] = [-12, -4, 12, 20];
pub const DEFAULT_ALPHA: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct CovertConfig {
    pub alpha: f64,
    /// `bit_order[j]` is the subcarrier that carries bit `7 - j` (MSB at j = 0).
    pub bit_order: [i32; 8],
}

impl Default for CovertConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            bit_order: CORRUPTED_SUBCARRIERS,
        }
    }
}

impl CovertConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Accepts alpha in [0, 1); alpha = 0 is the HT-free transmitter.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Parameter(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        let mut order = self.bit_order;
        order.sort_unstable();
        if order != CORRUPTED_SUBCARRIERS {
            return Err(Error::Config(
                "bit order must be a permutation of the corrupted subcarriers".into(),
            ));
        }
        Ok(())
    }
}

/// The STS grid carrying `byte`.
pub fn encode_sts_grid(byte: u8, cfg: &CovertConfig) -> SubcarrierGrid {
    let mut grid = nominal_sts_grid();
    for (j, &k) in cfg.bit_order.iter().enumerate() {
        if (byte >> (7 - j)) & 1 == 1 {
            grid.set_bin(k, grid.bin(k) * (1.0 - cfg.alpha));
        }
    }
    grid
}

/// Precomputed time-domain short STS for every byte value at one alpha.
#[derive(Debug, Clone)]
pub struct StsLookupTable {
    alpha: f64,
    rows: Vec<ShortSts>,
}

impl StsLookupTable {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn row(&self, byte: u8) -> &ShortSts {
        &self.rows[byte as usize]
    }

    pub fn rows(&self) -> &[ShortSts] {
        &self.rows
    }
}

/// Builds the 256-row table. Alpha must lie strictly inside (0, 1).
pub fn build_lookup_table(alpha: f64) -> Result<StsLookupTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let cfg = CovertConfig::new(alpha)?;
    Ok(table_for(&cfg))
}

fn table_for(cfg: &CovertConfig) -> StsLookupTable {
    let rows = (0..=255u8)
        .map(|b| short_sts_from_grid(&encode_sts_grid(b, cfg)))
        .collect();
    StsLookupTable {
        alpha: cfg.alpha,
        rows,
    }
}

/// Table for an arbitrary covert configuration (custom bit order, or alpha = 0 for
/// an HT-free transmitter whose rows are all nominal).
pub fn build_lookup_table_with(cfg: &CovertConfig) -> Result<StsLookupTable> {
    cfg.validate()?;
    Ok(table_for(cfg))
}

/// Endless byte source over the victim's weight memory.
#[derive(Debug, Clone)]
pub struct LeakByteSource {
    weight_bytes: Vec<u8>,
    cursor: usize,
    repetitions_completed: u64,
}

impl LeakByteSource {
    pub fn new(weight_bytes: Vec<u8>) -> Result<Self> {
        if weight_bytes.is_empty() {
            return Err(Error::Config("leak source has no weight bytes".into()));
        }
        Ok(Self {
            weight_bytes,
            cursor: 0,
            repetitions_completed: 0,
        })
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::new(std::fs::read(path)?)
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn repetitions_completed(&self) -> u64 {
        self.repetitions_completed
    }

    pub fn len(&self) -> usize {
        self.weight_bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight_bytes.is_empty()
    }

    pub fn next_leak_byte(&mut self) -> u8 {
        let b = self.weight_bytes[self.cursor];
        self.cursor += 1;
        if self.cursor == self.weight_bytes.len() {
            self.cursor = 0;
            self.repetitions_completed += 1;
        }
        b
    }
}

/// A frame whose STS carries the next byte of `src`; everything after the STS is
/// exactly what the HT-free transmitter would send. Returns the leaked byte too.
pub fn ht_frame(
    payload_bits: &[bool],
    src: &mut LeakByteSource,
    table: &StsLookupTable,
    cfg: &PhyConfig,
) -> Result<(Frame, u8)> {
    let byte = src.next_leak_byte();
    let frame = assemble_frame(table.row(byte), payload_bits, cfg)?;
    Ok((frame, byte))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{inverse_transform, sts_amplitude, ShortSts, STS_LEN};

    #[test]
    fn reference_and_corrupted_partition_the_sts_support() {
        let mut all: Vec<i32> = CORRUPTED_SUBCARRIERS
            .iter()
            .chain(REFERENCE_SUBCARRIERS.iter())
            .copied()
            .collect();
        all.sort_unstable();
        let support: Vec<i32> = nominal_sts_grid().nonzero(0.0).iter().map(|(k, _)| *k).collect();
        assert_eq!(all, support);
    }

    #[test]
    fn zero_byte_is_nominal() {
        for alpha in [0.05, 0.15, 0.3] {
            let cfg = CovertConfig::new(alpha).unwrap();
            assert_eq!(encode_sts_grid(0x00, &cfg), nominal_sts_grid());
        }
    }

    #[test]
    fn all_ones_attenuates_every_corrupted_bin() {
        let cfg = CovertConfig::new(0.15).unwrap();
        let g = encode_sts_grid(0xFF, &cfg);
        let full = (2.0f64).sqrt() * sts_amplitude();
        for k in CORRUPTED_SUBCARRIERS {
            assert!((g.magnitude(k) - 0.85 * full).abs() < 1e-12);
        }
        for k in REFERENCE_SUBCARRIERS {
            assert!((g.magnitude(k) - full).abs() < 1e-12);
        }
    }

    #[test]
    fn byte_a0_hits_msb_carriers() {
        let cfg = CovertConfig::new(0.15).unwrap();
        let g = encode_sts_grid(0xA0, &cfg);
        let n = nominal_sts_grid();
        for k in [-24, -16] {
            assert!((g.bin(k) - n.bin(k) * 0.85).norm() < 1e-12);
        }
        for k in [-20, -8, 4, 8, 16, 24] {
            assert_eq!(g.bin(k), n.bin(k));
        }
    }

    #[test]
    fn alpha_zero_is_degenerate() {
        let cfg = CovertConfig {
            alpha: 0.0,
            ..Default::default()
        };
        for b in 0..=255u8 {
            assert_eq!(encode_sts_grid(b, &cfg), nominal_sts_grid());
        }
    }

    #[test]
    fn table_rejects_bad_alpha() {
        for a in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(build_lookup_table(a), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn table_row_zero_is_nominal_and_rows_distinct() {
        let t = build_lookup_table(0.15).unwrap();
        assert_eq!(*t.row(0), ShortSts::nominal());
        for a in 0..256 {
            for b in (a + 1)..256 {
                let d: f64 = t.rows()[a]
                    .samples
                    .iter()
                    .zip(t.rows()[b].samples.iter())
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                assert!(d > 1e-6, "rows {a:#x} and {b:#x} coincide");
            }
        }
    }

    #[test]
    fn table_matches_direct_construction() {
        for alpha in [0.05, 0.15, 0.30] {
            let t = build_lookup_table(alpha).unwrap();
            let cfg = CovertConfig::new(alpha).unwrap();
            for b in 0..=255u8 {
                let direct = inverse_transform(&encode_sts_grid(b, &cfg));
                let err = t
                    .row(b)
                    .samples
                    .iter()
                    .zip(&direct[..16])
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-9);
            }
        }
    }

    #[test]
    fn energy_non_increasing_in_popcount() {
        let t = build_lookup_table(0.2).unwrap();
        let mut by_weight = vec![f64::NEG_INFINITY; 9];
        let mut min_by_weight = vec![f64::INFINITY; 9];
        for b in 0..=255u8 {
            let w = b.count_ones() as usize;
            let e = t.row(b).energy();
            by_weight[w] = by_weight[w].max(e);
            min_by_weight[w] = min_by_weight[w].min(e);
        }
        for w in 1..9 {
            // Every bin has the same magnitude, so energy depends on popcount only.
            assert!((by_weight[w] - min_by_weight[w]).abs() < 1e-12);
            assert!(by_weight[w] < by_weight[w - 1]);
        }
    }

    #[test]
    fn leak_source_wraps() {
        let mut s = LeakByteSource::new(vec![0xA0, 0xA3]).unwrap();
        assert_eq!(s.next_leak_byte(), 0xA0);
        assert_eq!(s.next_leak_byte(), 0xA3);
        assert_eq!(s.repetitions_completed(), 1);

        let mut s = LeakByteSource::new(vec![0xA0]).unwrap();
        let got: Vec<u8> = (0..3).map(|_| s.next_leak_byte()).collect();
        assert_eq!(got, vec![0xA0; 3]);
        assert_eq!(s.repetitions_completed(), 3);
        assert_eq!(s.cursor(), 0);

        let n = 37;
        let mut s = LeakByteSource::new((0..n as u8).collect()).unwrap();
        for _ in 0..n {
            s.next_leak_byte();
        }
        assert_eq!(s.repetitions_completed(), 1);
    }

    #[test]
    fn empty_source_is_config_error() {
        assert!(matches!(LeakByteSource::new(vec![]), Err(Error::Config(_))));
    }

    #[test]
    fn ht_frame_only_touches_sts() {
        let phy = PhyConfig::default();
        let bits: Vec<bool> = (0..960).map(|i| (i * 7) % 5 < 2).collect();
        let table = build_lookup_table(0.15).unwrap();
        let clean = assemble_frame(&ShortSts::nominal(), &bits, &phy).unwrap().samples();

        let mut src = LeakByteSource::new(vec![0x00, 0xFF]).unwrap();
        let (f0, b0) = ht_frame(&bits, &mut src, &table, &phy).unwrap();
        assert_eq!(b0, 0x00);
        assert_eq!(f0.samples(), clean);

        let (f1, b1) = ht_frame(&bits, &mut src, &table, &phy).unwrap();
        assert_eq!(b1, 0xFF);
        let s1 = f1.samples();
        assert_eq!(s1.len(), clean.len());
        let differing: Vec<usize> = (0..s1.len()).filter(|&i| s1[i] != clean[i]).collect();
        assert!(!differing.is_empty());
        assert!(differing.iter().all(|&i| i < STS_LEN));
    }
}
