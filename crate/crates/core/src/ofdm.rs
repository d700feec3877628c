//! OFDM physical-layer primitives for a 20 Msps, 64-subcarrier Wi-Fi style frame.
//!
//! All transforms are unitary (scaled by 1/8 in both directions), so a subcarrier
//! value written into a [`SubcarrierGrid`] is recovered with the same magnitude by
//! [`forward_transform`]. Under this convention every preamble and payload symbol
//! with 52 unit-energy occupied bins has a mean time-domain power of 52/64.
//!
//! Frame layout (sample offsets at 20 Msps):
//!
//! | field   | offset | length   |
//! |---------|--------|----------|
//! | STS     | 0      | 160      |
//! | LTS     | 160    | 160      |
//! | SIGNAL  | 320    | 80       |
//! | payload | 400    | 80 · n   |

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type ComplexSample = Complex64;

pub const FFT_SIZE: usize = 64;
pub const CYCLIC_PREFIX: usize = 16;
pub const SYMBOL_LEN: usize = FFT_SIZE + CYCLIC_PREFIX;
pub const SHORT_STS_LEN: usize = 16;
pub const STS_REPETITIONS: usize = 10;
pub const STS_LEN: usize = SHORT_STS_LEN * STS_REPETITIONS;
pub const LTS_GUARD: usize = 32;
pub const LTS_LEN: usize = LTS_GUARD + 2 * FFT_SIZE;
pub const SIGNAL_LEN: usize = SYMBOL_LEN;

pub const LTS_OFFSET: usize = STS_LEN;
pub const SIGNAL_OFFSET: usize = LTS_OFFSET + LTS_LEN;
pub const PAYLOAD_OFFSET: usize = SIGNAL_OFFSET + SIGNAL_LEN;

pub const SAMPLE_RATE_HZ: f64 = 20e6;
pub const MAX_PAYLOAD_BYTES: usize = 1500;

/// Indices of the 12 occupied STS subcarriers and their sign.
pub const STS_POSITIVE: [i32; 7] = [-24, -16, -4, 12, 16, 20, 24];
pub const STS_NEGATIVE: [i32; 5] = [-20, -12, -8, 4, 8];

/// Long training sequence on subcarriers -26..=26 (DC included as zero).
const LTS_SEQUENCE: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1, -1,
    -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

pub fn sts_amplitude() -> f64 {
    (13.0f64 / 6.0).sqrt()
}

fn fft_pair() -> &'static (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    static PLANS: OnceLock<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)> = OnceLock::new();
    PLANS.get_or_init(|| {
        let mut planner = FftPlanner::new();
        (
            planner.plan_fft_forward(FFT_SIZE),
            planner.plan_fft_inverse(FFT_SIZE),
        )
    })
}

/// 64 frequency bins indexed by subcarrier k in [-32, 31].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubcarrierGrid {
    // FFT order: position (k mod 64).
    bins: [ComplexSample; FFT_SIZE],
}

impl Default for SubcarrierGrid {
    fn default() -> Self {
        Self::zeros()
    }
}

impl SubcarrierGrid {
    pub fn zeros() -> Self {
        Self {
            bins: [ComplexSample::new(0.0, 0.0); FFT_SIZE],
        }
    }

    /// Builds a grid from 64 values in FFT order (index 0 is DC, index 63 is k = -1).
    pub fn from_fft_order(values: &[ComplexSample]) -> Result<Self> {
        if values.len() != FFT_SIZE {
            return Err(Error::Dimension {
                expected: FFT_SIZE,
                actual: values.len(),
            });
        }
        let mut bins = [ComplexSample::new(0.0, 0.0); FFT_SIZE];
        bins.copy_from_slice(values);
        Ok(Self { bins })
    }

    pub fn fft_order(&self) -> &[ComplexSample; FFT_SIZE] {
        &self.bins
    }

    fn position(k: i32) -> usize {
        assert!((-32..32).contains(&k), "subcarrier index {k} out of range");
        k.rem_euclid(FFT_SIZE as i32) as usize
    }

    pub fn bin(&self, k: i32) -> ComplexSample {
        self.bins[Self::position(k)]
    }

    pub fn set_bin(&mut self, k: i32, value: ComplexSample) {
        self.bins[Self::position(k)] = value;
    }

    pub fn magnitude(&self, k: i32) -> f64 {
        self.bin(k).norm()
    }

    /// Bins with magnitude above `tol`, as (k, value) pairs in ascending k.
    pub fn nonzero(&self, tol: f64) -> Vec<(i32, ComplexSample)> {
        (-32..32)
            .map(|k| (k, self.bin(k)))
            .filter(|(_, v)| v.norm() > tol)
            .collect()
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = *self;
        out.bins.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Unitary 64-point inverse transform.
pub fn inverse_transform(grid: &SubcarrierGrid) -> Vec<ComplexSample> {
    let mut buf = grid.bins.to_vec();
    fft_pair().1.process(&mut buf);
    let scale = 1.0 / (FFT_SIZE as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Unitary 64-point forward transform.
pub fn forward_transform(samples: &[ComplexSample]) -> Result<SubcarrierGrid> {
    if samples.len() != FFT_SIZE {
        return Err(Error::Dimension {
            expected: FFT_SIZE,
            actual: samples.len(),
        });
    }
    let mut buf = samples.to_vec();
    fft_pair().0.process(&mut buf);
    let scale = 1.0 / (FFT_SIZE as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    SubcarrierGrid::from_fft_order(&buf)
}

/// The standard STS definition: 12 occupied bins at ±sqrt(13/6)·(1 + j).
pub fn nominal_sts_grid() -> SubcarrierGrid {
    let a = sts_amplitude();
    let mut grid = SubcarrierGrid::zeros();
    for &k in &STS_POSITIVE {
        grid.set_bin(k, ComplexSample::new(a, a));
    }
    for &k in &STS_NEGATIVE {
        grid.set_bin(k, ComplexSample::new(-a, -a));
    }
    grid
}

/// One 0.8 µs period of the short training sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortSts {
    pub samples: [ComplexSample; SHORT_STS_LEN],
}

impl ShortSts {
    pub fn nominal() -> Self {
        short_sts_from_grid(&nominal_sts_grid())
    }

    /// The full 160-sample STS field: this period repeated ten times.
    pub fn repeated(&self) -> Vec<ComplexSample> {
        self.samples
            .iter()
            .copied()
            .cycle()
            .take(STS_LEN)
            .collect()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// First 16 samples of the inverse transform of an STS grid.
pub fn short_sts_from_grid(grid: &SubcarrierGrid) -> ShortSts {
    let time = inverse_transform(grid);
    let mut samples = [ComplexSample::new(0.0, 0.0); SHORT_STS_LEN];
    samples.copy_from_slice(&time[..SHORT_STS_LEN]);
    ShortSts { samples }
}

pub fn lts_grid() -> SubcarrierGrid {
    let mut grid = SubcarrierGrid::zeros();
    for (i, &v) in LTS_SEQUENCE.iter().enumerate() {
        grid.set_bin(i as i32 - 26, ComplexSample::new(v as f64, 0.0));
    }
    grid
}

/// One 64-sample long training symbol.
pub fn lts_symbol() -> Vec<ComplexSample> {
    inverse_transform(&lts_grid())
}

/// 32-sample guard (tail of the long symbol) followed by two long symbols.
pub fn build_lts() -> Vec<ComplexSample> {
    let sym = lts_symbol();
    let mut out = Vec::with_capacity(LTS_LEN);
    out.extend_from_slice(&sym[FFT_SIZE - LTS_GUARD..]);
    out.extend_from_slice(&sym);
    out.extend_from_slice(&sym);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_subcarrier(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Modulation::Bpsk => 0,
            Modulation::Qpsk => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Modulation::Bpsk),
            1 => Some(Modulation::Qpsk),
            _ => None,
        }
    }

    /// Gray-coded, unit-energy constellation point.
    pub fn map(self, bits: &[bool]) -> ComplexSample {
        let level = |b: bool| if b { -1.0 } else { 1.0 };
        match self {
            Modulation::Bpsk => ComplexSample::new(level(bits[0]), 0.0),
            Modulation::Qpsk => {
                ComplexSample::new(level(bits[0]), level(bits[1])) * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }

    /// Hard decision.
    pub fn demap(self, value: ComplexSample, out: &mut Vec<bool>) {
        match self {
            Modulation::Bpsk => out.push(value.re < 0.0),
            Modulation::Qpsk => {
                out.push(value.re < 0.0);
                out.push(value.im < 0.0);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyConfig {
    pub sample_rate: f64,
    pub fft_size: usize,
    pub cyclic_prefix: usize,
    pub data_subcarriers: Vec<i32>,
    pub pilot_subcarriers: [i32; 4],
    pub modulation: Modulation,
}

impl Default for PhyConfig {
    fn default() -> Self {
        let pilots = [-21, -7, 7, 21];
        let data = (-26..=26)
            .filter(|k| *k != 0 && !pilots.contains(k))
            .collect();
        Self {
            sample_rate: SAMPLE_RATE_HZ,
            fft_size: FFT_SIZE,
            cyclic_prefix: CYCLIC_PREFIX,
            data_subcarriers: data,
            pilot_subcarriers: pilots,
            modulation: Modulation::Qpsk,
        }
    }
}

impl PhyConfig {
    pub fn with_modulation(modulation: Modulation) -> Self {
        Self {
            modulation,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size != FFT_SIZE || self.cyclic_prefix != CYCLIC_PREFIX {
            return Err(Error::Config(
                "only a 64-point transform with a 16-sample cyclic prefix is supported".into(),
            ));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        let all: Vec<i32> = self
            .data_subcarriers
            .iter()
            .chain(self.pilot_subcarriers.iter())
            .copied()
            .collect();
        if all.iter().any(|&k| k == 0 || !(-26..=26).contains(&k)) {
            return Err(Error::Config(
                "subcarriers must lie in [-26, 26] excluding DC".into(),
            ));
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(Error::Config(
                "data and pilot subcarriers overlap".into(),
            ));
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.data_subcarriers.len() * self.modulation.bits_per_subcarrier()
    }

    pub fn symbols_for_bits(&self, n_bits: usize) -> usize {
        n_bits.div_ceil(self.bits_per_symbol())
    }
}

/// Builds one 80-sample OFDM symbol from per-data-subcarrier values; pilots are +1.
pub fn ofdm_symbol(data_values: &[ComplexSample], cfg: &PhyConfig) -> Vec<ComplexSample> {
    debug_assert_eq!(data_values.len(), cfg.data_subcarriers.len());
    let mut grid = SubcarrierGrid::zeros();
    for (&k, &v) in cfg.data_subcarriers.iter().zip(data_values) {
        grid.set_bin(k, v);
    }
    for &k in &cfg.pilot_subcarriers {
        grid.set_bin(k, ComplexSample::new(1.0, 0.0));
    }
    let time = inverse_transform(&grid);
    let mut out = Vec::with_capacity(SYMBOL_LEN);
    out.extend_from_slice(&time[FFT_SIZE - CYCLIC_PREFIX..]);
    out.extend_from_slice(&time);
    out
}

/// Maps bits onto OFDM symbols, zero-padding the last symbol.
pub fn modulate_payload(bits: &[bool], cfg: &PhyConfig) -> Vec<Vec<ComplexSample>> {
    let per_sub = cfg.modulation.bits_per_subcarrier();
    let per_symbol = cfg.bits_per_symbol();
    bits.chunks(per_symbol)
        .map(|chunk| {
            let mut padded = chunk.to_vec();
            padded.resize(per_symbol, false);
            let values: Vec<ComplexSample> = padded
                .chunks(per_sub)
                .map(|b| cfg.modulation.map(b))
                .collect();
            ofdm_symbol(&values, cfg)
        })
        .collect()
}

/// Strips the cyclic prefix and transforms one received symbol.
pub fn symbol_spectrum(symbol: &[ComplexSample]) -> Result<SubcarrierGrid> {
    if symbol.len() != SYMBOL_LEN {
        return Err(Error::Dimension {
            expected: SYMBOL_LEN,
            actual: symbol.len(),
        });
    }
    forward_transform(&symbol[CYCLIC_PREFIX..])
}

/// Hard-decision demodulation of an (already equalized) grid.
pub fn demap_grid(grid: &SubcarrierGrid, cfg: &PhyConfig, out: &mut Vec<bool>) {
    for &k in &cfg.data_subcarriers {
        cfg.modulation.demap(grid.bin(k), out);
    }
}

/// Number of information bits in the SIGNAL field: 16-bit length plus 8-bit tag.
pub const SIGNAL_INFO_BITS: usize = 24;

/// SIGNAL field: payload bit count (16 bits) and modulation tag (8 bits), MSB first,
/// sent twice over the 48 data subcarriers as BPSK.
pub fn signal_field(payload_bits: u16, modulation: Modulation, cfg: &PhyConfig) -> Vec<ComplexSample> {
    let info = signal_info_bits(payload_bits, modulation);
    let values: Vec<ComplexSample> = info
        .iter()
        .cycle()
        .take(cfg.data_subcarriers.len())
        .map(|&b| Modulation::Bpsk.map(&[b]))
        .collect();
    ofdm_symbol(&values, cfg)
}

pub fn signal_info_bits(payload_bits: u16, modulation: Modulation) -> Vec<bool> {
    let mut bits = Vec::with_capacity(SIGNAL_INFO_BITS);
    bits.extend((0..16).rev().map(|i| (payload_bits >> i) & 1 == 1));
    bits.extend((0..8).rev().map(|i| (modulation.tag() >> i) & 1 == 1));
    bits
}

/// Parses SIGNAL information bits into (payload bit count, modulation tag).
pub fn parse_signal_bits(bits: &[bool]) -> (u16, u8) {
    let len = bits[..16]
        .iter()
        .fold(0u16, |acc, &b| (acc << 1) | b as u16);
    let tag = bits[16..24].iter().fold(0u8, |acc, &b| (acc << 1) | b as u8);
    (len, tag)
}

/// A complete time-domain frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub sts: Vec<ComplexSample>,
    pub lts: Vec<ComplexSample>,
    pub signal: Vec<ComplexSample>,
    pub payload: Vec<ComplexSample>,
    pub tx_bits: Vec<bool>,
    pub modulation: Modulation,
}

impl Frame {
    pub fn payload_symbols(&self) -> usize {
        self.payload.len() / SYMBOL_LEN
    }

    pub fn len(&self) -> usize {
        PAYLOAD_OFFSET + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> Vec<ComplexSample> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.sts);
        out.extend_from_slice(&self.lts);
        out.extend_from_slice(&self.signal);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Air time in microseconds.
    pub fn duration_us(&self, sample_rate: f64) -> f64 {
        self.len() as f64 / sample_rate * 1e6
    }
}

/// Assembles STS (ten copies of `short_sts`), LTS, SIGNAL and payload.
pub fn assemble_frame(short_sts: &ShortSts, payload_bits: &[bool], cfg: &PhyConfig) -> Result<Frame> {
    cfg.validate()?;
    let max_bits = MAX_PAYLOAD_BYTES * 8;
    if payload_bits.len() > max_bits {
        return Err(Error::PayloadTooLarge {
            bytes: payload_bits.len().div_ceil(8),
            max: MAX_PAYLOAD_BYTES,
        });
    }
    let payload: Vec<ComplexSample> = modulate_payload(payload_bits, cfg)
        .into_iter()
        .flatten()
        .collect();
    Ok(Frame {
        sts: short_sts.repeated(),
        lts: build_lts(),
        signal: signal_field(payload_bits.len() as u16, cfg.modulation, cfg),
        payload,
        tx_bits: payload_bits.to_vec(),
        modulation: cfg.modulation,
    })
}

pub fn mean_power(samples: &[ComplexSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64
}
