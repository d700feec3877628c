//! The legitimate receiver.
//!
//! Synchronization is Schmidl-Cox style: a lag-16 autocorrelation plateau over the
//! STS finds the frame and gives a coarse carrier offset, cross-correlation with the
//! known long symbol pins the timing, and a lag-64 correlation over both training
//! fields (the STS is 64-periodic as well) refines the offset. None of these steps
//! depend on the STS amplitudes, only on its period, so covert modulation is
//! invisible to them.
//!
//! Bob additionally validates the preamble shape against the *nominal* short STS
//! ([`SyncConfig::nominal_sts_gate`]). That check is the one place where a deep
//! covert modulation can cost the legitimate link frames.

use crate::channel::rotate_cfo;
use crate::error::{Error, Result};
use crate::ofdm::{
    forward_transform, lts_grid, lts_symbol, parse_signal_bits, symbol_spectrum, ComplexSample,
    Modulation, PhyConfig, ShortSts, SubcarrierGrid, FFT_SIZE, LTS_GUARD, LTS_LEN, LTS_OFFSET,
    PAYLOAD_OFFSET, SAMPLE_RATE_HZ, SHORT_STS_LEN, SIGNAL_INFO_BITS, SIGNAL_OFFSET, STS_LEN,
    STS_REPETITIONS, SYMBOL_LEN,
};
use crate::stats::BerReport;

pub const PLATEAU_THRESHOLD: f64 = 0.8;
pub const MIN_PLATEAU: usize = 64;
pub const AUTOCORR_WINDOW: usize = 48;
pub const LTS_SEARCH: usize = 48;
/// Minimum squared normalized correlation between the received (period-averaged) STS
/// and the nominal short STS.
pub const NOMINAL_STS_GATE: f64 = 0.96;

#[derive(Debug, Clone, PartialEq)]
pub struct SyncConfig {
    pub window: usize,
    pub plateau_threshold: f64,
    pub min_plateau: usize,
    pub lts_search: usize,
    pub nominal_sts_gate: Option<f64>,
    pub sample_rate: f64,
}

impl SyncConfig {
    /// Legitimate receiver: plateau detection plus nominal-STS validation.
    pub fn bob() -> Self {
        Self {
            window: AUTOCORR_WINDOW,
            plateau_threshold: PLATEAU_THRESHOLD,
            min_plateau: MIN_PLATEAU,
            lts_search: LTS_SEARCH,
            nominal_sts_gate: Some(NOMINAL_STS_GATE),
            sample_rate: SAMPLE_RATE_HZ,
        }
    }

    /// Same synchronizer without the nominal-STS check.
    pub fn eve() -> Self {
        Self {
            nominal_sts_gate: None,
            ..Self::bob()
        }
    }
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self::bob()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub frame_start: usize,
    pub coarse_cfo_hz: f64,
    /// Refined estimate: coarse plus the lag-64 residual over both training fields.
    pub fine_cfo_hz: f64,
    pub detected: bool,
    /// Squared normalized correlation with the nominal short STS, when checked.
    pub sts_match: Option<f64>,
    /// First sample after the autocorrelation plateau; scanning resumes here.
    pub plateau_end: usize,
}

impl SyncResult {
    fn missed(plateau_end: usize) -> Self {
        Self {
            frame_start: 0,
            coarse_cfo_hz: 0.0,
            fine_cfo_hz: 0.0,
            detected: false,
            sts_match: None,
            plateau_end,
        }
    }
}

/// Detects the first frame in `samples` with Bob's settings.
pub fn detect_frame(samples: &[ComplexSample]) -> SyncResult {
    detect_frame_with(samples, 0, &SyncConfig::bob())
}

/// Detects the first frame whose plateau begins at or after `from`.
pub fn detect_frame_with(samples: &[ComplexSample], from: usize, cfg: &SyncConfig) -> SyncResult {
    let lag = SHORT_STS_LEN;
    let l = cfg.window;
    let n_total = samples.len();
    if n_total < from + l + lag {
        return SyncResult::missed(n_total);
    }
    let last = n_total - l - lag;

    let corr = |n: usize| samples[n].conj() * samples[n + lag];
    let mut p = ComplexSample::new(0.0, 0.0);
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for m in 0..l {
        p += corr(from + m);
        e1 += samples[from + m].norm_sqr();
        e2 += samples[from + m + lag].norm_sqr();
    }

    let mut run_start = None;
    let mut run_len = 0usize;
    let mut run_sum = ComplexSample::new(0.0, 0.0);
    let mut plateau: Option<(usize, usize, ComplexSample)> = None;

    let mut n = from;
    loop {
        let denom = (e1 * e2).sqrt();
        let metric = if denom > 0.0 { p.norm() / denom } else { 0.0 };
        if metric > cfg.plateau_threshold {
            if run_start.is_none() {
                run_start = Some(n);
                run_len = 0;
                run_sum = ComplexSample::new(0.0, 0.0);
            }
            run_len += 1;
            run_sum += p;
        } else if let Some(start) = run_start.take() {
            if run_len >= cfg.min_plateau {
                plateau = Some((start, run_len, run_sum));
                break;
            }
        }
        if n == last {
            if let Some(start) = run_start {
                if run_len >= cfg.min_plateau {
                    plateau = Some((start, run_len, run_sum));
                }
            }
            break;
        }
        // Slide the window by one sample.
        p += corr(n + l) - corr(n);
        e1 += samples[n + l].norm_sqr() - samples[n].norm_sqr();
        e2 += samples[n + l + lag].norm_sqr() - samples[n + lag].norm_sqr();
        n += 1;
    }

    let Some((plateau_start, plateau_len, plateau_sum)) = plateau else {
        return SyncResult::missed(n_total);
    };
    let plateau_end = plateau_start + plateau_len;
    let fs = cfg.sample_rate;
    let coarse = plateau_sum.arg() / (2.0 * std::f64::consts::PI * lag as f64 / fs);

    // Fine timing on a coarse-corrected copy around the expected long symbols.
    let expected = plateau_start + LTS_OFFSET + LTS_GUARD;
    let lo = expected.saturating_sub(cfg.lts_search).max(LTS_OFFSET + LTS_GUARD);
    let hi = (expected + cfg.lts_search).min(n_total.saturating_sub(2 * FFT_SIZE));
    if lo > hi {
        return SyncResult::missed(plateau_end);
    }
    let mut seg = samples[lo..hi + 2 * FFT_SIZE].to_vec();
    rotate_cfo(&mut seg, -coarse, fs, lo);
    let template = lts_symbol();
    let xcorr = |offset: usize| -> ComplexSample {
        template
            .iter()
            .zip(&seg[offset..offset + FFT_SIZE])
            .map(|(t, r)| t.conj() * r)
            .sum()
    };
    let mut best = (0usize, f64::NEG_INFINITY);
    for offset in 0..=(hi - lo) {
        let score = xcorr(offset).norm() + xcorr(offset + FFT_SIZE).norm();
        if score > best.1 {
            best = (offset, score);
        }
    }
    let lts_start = lo + best.0;
    let frame_start = lts_start - LTS_OFFSET - LTS_GUARD;

    if frame_start + PAYLOAD_OFFSET > n_total {
        return SyncResult::missed(plateau_end);
    }

    // Both training fields are 64-periodic (the STS trivially, the LTS including its
    // guard), so a lag-64 correlation over 96 pairs of each refines the offset.
    let lag64 = |start: usize| -> ComplexSample {
        samples[start..start + LTS_LEN - FFT_SIZE]
            .iter()
            .zip(&samples[start + FFT_SIZE..start + LTS_LEN])
            .map(|(a, b)| a.conj() * b)
            .sum()
    };
    let w64 = 2.0 * std::f64::consts::PI * FFT_SIZE as f64 / fs;
    let p64 = (lag64(frame_start) + lag64(frame_start + LTS_OFFSET))
        * ComplexSample::from_polar(1.0, -w64 * coarse);
    let fine = coarse + p64.arg() / w64;

    let mut result = SyncResult {
        frame_start,
        coarse_cfo_hz: coarse,
        fine_cfo_hz: fine,
        detected: true,
        sts_match: None,
        plateau_end,
    };
    if let Some(gate) = cfg.nominal_sts_gate {
        let corrected = corrected_region(samples, &result, 0, STS_LEN, fs);
        let m = nominal_sts_match(&corrected);
        result.sts_match = Some(m);
        result.detected = m >= gate;
    }
    result
}

/// `len` samples starting `offset` samples after the frame start, de-rotated by the
/// refined carrier offset (phase referenced to the frame start).
pub fn corrected_region(
    samples: &[ComplexSample],
    sync: &SyncResult,
    offset: usize,
    len: usize,
    sample_rate: f64,
) -> Vec<ComplexSample> {
    let start = sync.frame_start + offset;
    let mut out = samples[start..start + len].to_vec();
    rotate_cfo(&mut out, -sync.fine_cfo_hz, sample_rate, offset);
    out
}

/// Average of the ten 16-sample STS periods.
pub fn average_sts_period(sts: &[ComplexSample]) -> [ComplexSample; SHORT_STS_LEN] {
    let mut acc = [ComplexSample::new(0.0, 0.0); SHORT_STS_LEN];
    for period in sts.chunks_exact(SHORT_STS_LEN).take(STS_REPETITIONS) {
        for (a, s) in acc.iter_mut().zip(period) {
            *a += s;
        }
    }
    acc.iter_mut()
        .for_each(|a| *a /= STS_REPETITIONS as f64);
    acc
}

/// Squared normalized correlation of the period-averaged STS with the nominal one.
pub fn nominal_sts_match(sts: &[ComplexSample]) -> f64 {
    let avg = average_sts_period(sts);
    let nominal = ShortSts::nominal();
    let dot: ComplexSample = nominal
        .samples
        .iter()
        .zip(avg.iter())
        .map(|(t, r)| t.conj() * r)
        .sum();
    let e_rx: f64 = avg.iter().map(|v| v.norm_sqr()).sum();
    if e_rx == 0.0 {
        return 0.0;
    }
    dot.norm_sqr() / (e_rx * nominal.energy())
}

/// Per-subcarrier gains from a synchronized 160-sample LTS; zero on unused bins.
pub fn estimate_channel(lts_samples: &[ComplexSample]) -> Result<SubcarrierGrid> {
    if lts_samples.len() != LTS_LEN {
        return Err(Error::Dimension {
            expected: LTS_LEN,
            actual: lts_samples.len(),
        });
    }
    let y1 = forward_transform(&lts_samples[LTS_GUARD..LTS_GUARD + FFT_SIZE])?;
    let y2 = forward_transform(&lts_samples[LTS_GUARD + FFT_SIZE..])?;
    let known = lts_grid();
    let mut gains = SubcarrierGrid::zeros();
    for k in -32..32 {
        let x = known.bin(k);
        if x.norm() > 0.0 {
            gains.set_bin(k, (y1.bin(k) + y2.bin(k)) / (2.0 * x));
        }
    }
    Ok(gains)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BobConfig {
    pub sync: SyncConfig,
    pub phy: PhyConfig,
    /// Common-phase correction from the four pilots of every symbol.
    pub pilot_tracking: bool,
}

impl Default for BobConfig {
    fn default() -> Self {
        Self {
            sync: SyncConfig::bob(),
            phy: PhyConfig::default(),
            pilot_tracking: true,
        }
    }
}

fn equalize(grid: &SubcarrierGrid, gains: &SubcarrierGrid, phy: &PhyConfig, pilots: bool) -> SubcarrierGrid {
    let mut out = SubcarrierGrid::zeros();
    for &k in phy.data_subcarriers.iter().chain(phy.pilot_subcarriers.iter()) {
        let h = gains.bin(k);
        if h.norm() > 0.0 {
            out.set_bin(k, grid.bin(k) / h);
        }
    }
    if pilots {
        let pilot_sum: ComplexSample = phy.pilot_subcarriers.iter().map(|&k| out.bin(k)).sum();
        if pilot_sum.norm() > 0.0 {
            let derot = ComplexSample::from_polar(1.0, -pilot_sum.arg());
            for &k in phy.data_subcarriers.iter().chain(phy.pilot_subcarriers.iter()) {
                out.set_bin(k, out.bin(k) * derot);
            }
        }
    }
    out
}

/// Decoded SIGNAL contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalField {
    pub payload_bits: u16,
    pub modulation: Modulation,
}

/// Decodes the SIGNAL symbol of a corrected frame (sample 0 = frame start).
pub fn decode_signal(frame: &[ComplexSample], gains: &SubcarrierGrid, cfg: &BobConfig) -> Result<SignalField> {
    if frame.len() < PAYLOAD_OFFSET {
        return Err(Error::Decode("frame too short for SIGNAL field".into()));
    }
    let grid = symbol_spectrum(&frame[SIGNAL_OFFSET..PAYLOAD_OFFSET])?;
    let eq = equalize(&grid, gains, &cfg.phy, cfg.pilot_tracking);
    let data = &cfg.phy.data_subcarriers;
    let bits: Vec<bool> = (0..SIGNAL_INFO_BITS)
        .map(|i| {
            let mut soft = eq.bin(data[i]).re;
            if i + SIGNAL_INFO_BITS < data.len() {
                soft += eq.bin(data[i + SIGNAL_INFO_BITS]).re;
            }
            soft < 0.0
        })
        .collect();
    let (len, tag) = parse_signal_bits(&bits);
    let modulation = Modulation::from_tag(tag)
        .ok_or_else(|| Error::Decode(format!("unknown modulation tag {tag}")))?;
    Ok(SignalField {
        payload_bits: len,
        modulation,
    })
}

/// Demodulates the payload of a corrected frame (sample 0 = frame start).
pub fn demod_payload(frame: &[ComplexSample], gains: &SubcarrierGrid, cfg: &BobConfig) -> Result<Vec<bool>> {
    let signal = decode_signal(frame, gains, cfg)?;
    let phy = PhyConfig {
        modulation: signal.modulation,
        ..cfg.phy.clone()
    };
    let n_bits = signal.payload_bits as usize;
    let n_sym = phy.symbols_for_bits(n_bits);
    let needed = PAYLOAD_OFFSET + n_sym * SYMBOL_LEN;
    if frame.len() < needed {
        return Err(Error::Decode(format!(
            "SIGNAL declares {n_bits} bits ({needed} samples) but only {} samples follow the frame start",
            frame.len()
        )));
    }
    let mut bits = Vec::with_capacity(n_sym * phy.bits_per_symbol());
    for s in 0..n_sym {
        let start = PAYLOAD_OFFSET + s * SYMBOL_LEN;
        let grid = symbol_spectrum(&frame[start..start + SYMBOL_LEN])?;
        let eq = equalize(&grid, gains, &phy, cfg.pilot_tracking);
        crate::ofdm::demap_grid(&eq, &phy, &mut bits);
    }
    bits.truncate(n_bits);
    Ok(bits)
}

/// Total frame length in samples as announced by SIGNAL.
pub fn frame_len_from_signal(signal: &SignalField, phy: &PhyConfig) -> usize {
    let phy = PhyConfig {
        modulation: signal.modulation,
        ..phy.clone()
    };
    PAYLOAD_OFFSET + phy.symbols_for_bits(signal.payload_bits as usize) * SYMBOL_LEN
}

/// Residual carrier offset from the common pilot phase of SIGNAL and payload symbols.
///
/// Channel gains pin the phase to zero at the centre of the long symbols, which
/// enters the fit as an anchor weighted by its 104 known bins (52 per symbol);
/// each data symbol contributes its four pilots. Returns Hz.
pub fn pilot_cfo_residual(
    frame: &[ComplexSample],
    gains: &SubcarrierGrid,
    phy: &PhyConfig,
    n_symbols: usize,
    sample_rate: f64,
) -> Result<f64> {
    let anchor = (LTS_OFFSET + LTS_GUARD + FFT_SIZE) as f64;
    let mut points = vec![(anchor, 0.0, 2.0 * 52.0)];
    let mut prev = 0.0;
    for s in 0..=n_symbols {
        let start = SIGNAL_OFFSET + s * SYMBOL_LEN;
        if start + SYMBOL_LEN > frame.len() {
            break;
        }
        let grid = symbol_spectrum(&frame[start..start + SYMBOL_LEN])?;
        let eq = equalize(&grid, gains, phy, false);
        let sum: ComplexSample = phy.pilot_subcarriers.iter().map(|&k| eq.bin(k)).sum();
        // Unwrap against the previous symbol.
        let mut phase = sum.arg();
        while phase - prev > std::f64::consts::PI {
            phase -= 2.0 * std::f64::consts::PI;
        }
        while phase - prev < -std::f64::consts::PI {
            phase += 2.0 * std::f64::consts::PI;
        }
        prev = phase;
        let centre = (start + crate::ofdm::CYCLIC_PREFIX) as f64 + FFT_SIZE as f64 / 2.0;
        points.push((centre, phase, phy.pilot_subcarriers.len() as f64));
    }
    let w: f64 = points.iter().map(|p| p.2).sum();
    let t_mean = points.iter().map(|p| p.2 * p.0).sum::<f64>() / w;
    let p_mean = points.iter().map(|p| p.2 * p.1).sum::<f64>() / w;
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - t_mean) * (p.1 - p_mean)).sum();
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - t_mean).powi(2)).sum();
    Ok(sxy / sxx * sample_rate / (2.0 * std::f64::consts::PI))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BobFrame {
    pub sync: SyncResult,
    /// Carrier offset after pilot-phase refinement.
    pub cfo_hz: f64,
    pub gains: SubcarrierGrid,
    pub bits: Vec<bool>,
    /// Samples occupied by the frame, from its start.
    pub frame_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reception {
    Missed(SyncResult),
    Decoded(BobFrame),
}

/// Full receive chain for the first frame at or after `from`.
pub fn receive(samples: &[ComplexSample], from: usize, cfg: &BobConfig) -> Result<Reception> {
    let sync = detect_frame_with(samples, from, &cfg.sync);
    if !sync.detected {
        return Ok(Reception::Missed(sync));
    }
    let fs = cfg.sync.sample_rate;
    let frame = corrected_region(samples, &sync, 0, samples.len() - sync.frame_start, fs);
    let gains = estimate_channel(&frame[LTS_OFFSET..LTS_OFFSET + LTS_LEN])?;
    let signal = decode_signal(&frame, &gains, cfg)?;
    let bits = demod_payload(&frame, &gains, cfg)?;
    let phy = PhyConfig {
        modulation: signal.modulation,
        ..cfg.phy.clone()
    };
    let n_sym = phy.symbols_for_bits(signal.payload_bits as usize);
    let cfo_hz = sync.fine_cfo_hz + pilot_cfo_residual(&frame, &gains, &phy, n_sym, fs)?;
    Ok(Reception::Decoded(BobFrame {
        sync,
        cfo_hz,
        gains,
        bits,
        frame_len: frame_len_from_signal(&signal, &cfg.phy),
    }))
}

/// Exact error count plus Wilson 95% interval.
pub fn measure_payload_ber(tx_bits: &[bool], rx_bits: &[bool]) -> Result<BerReport> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::Comparison(format!(
            "bit streams differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    let errors = tx_bits.iter().zip(rx_bits).filter(|(a, b)| a != b).count() as u64;
    Ok(BerReport::from_counts(tx_bits.len() as u64, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, ChannelConfig};
    use crate::covert::build_lookup_table;
    use crate::ofdm::assemble_frame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(n: usize, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random()).collect()
    }

    fn test_frame(bits: &[bool]) -> Vec<ComplexSample> {
        assemble_frame(&ShortSts::nominal(), bits, &PhyConfig::default())
            .unwrap()
            .samples()
    }

    #[test]
    fn clean_frame_exact_timing() {
        let frame = test_frame(&random_bits(960, 1));
        let rx = apply_channel(
            &frame,
            &ChannelConfig {
                timing_offset: 100,
                ..ChannelConfig::ideal()
            },
        );
        // A noiseless lead-in gives a zero-energy window; add a trace of noise instead.
        let rx: Vec<ComplexSample> = rx
            .iter()
            .enumerate()
            .map(|(i, v)| v + ComplexSample::new(1e-6 * ((i * 7919) % 13) as f64, 0.0))
            .collect();
        let sync = detect_frame(&rx);
        assert!(sync.detected);
        assert_eq!(sync.frame_start, 100);
        assert!(sync.fine_cfo_hz.abs() < 1.0);
    }

    #[test]
    fn noise_only_not_detected() {
        let noise = apply_channel(
            &vec![ComplexSample::new(0.0, 0.0); 5000],
            &ChannelConfig::ideal(),
        );
        assert!(!detect_frame(&noise).detected);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise: Vec<ComplexSample> = (0..20_000)
            .map(|_| ComplexSample::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        assert!(!detect_frame(&noise).detected);
    }

    #[test]
    fn cfo_estimate_at_30db() {
        let frame = test_frame(&random_bits(12_000, 2));
        let mut sq = 0.0;
        for seed in 0..20 {
            let rx = apply_channel(
                &frame,
                &ChannelConfig {
                    snr_db: 30.0,
                    cfo_hz: 5000.0,
                    phase_rad: 0.4,
                    timing_offset: 80,
                    seed,
                    sample_rate: 20e6,
                },
            );
            let Reception::Decoded(f) = receive(&rx, 0, &BobConfig::default()).unwrap() else {
                panic!("frame missed");
            };
            assert_eq!(f.sync.frame_start, 80);
            sq += (f.sync.fine_cfo_hz - 5000.0).powi(2);
            assert!((f.cfo_hz - 5000.0).abs() < 100.0, "{}", f.cfo_hz);
        }
        // Preamble-only estimate: about 115 Hz rms is the lag-64 bound at 30 dB.
        let rms = (sq / 20.0).sqrt();
        assert!(rms < 170.0, "preamble rms {rms}");
    }

    #[test]
    fn ideal_channel_gains_are_unity() {
        let g = estimate_channel(&crate::ofdm::build_lts()).unwrap();
        for k in (-26..=26).filter(|k| *k != 0) {
            assert!((g.bin(k) - ComplexSample::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert_eq!(g.bin(0), ComplexSample::new(0.0, 0.0));
    }

    #[test]
    fn phase_rotation_shows_in_gains() {
        let phi = 0.9;
        let lts: Vec<ComplexSample> = crate::ofdm::build_lts()
            .iter()
            .map(|v| v * ComplexSample::from_polar(1.0, phi))
            .collect();
        let g = estimate_channel(&lts).unwrap();
        for k in (-26..=26).filter(|k| *k != 0) {
            assert!((g.bin(k).arg() - phi).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_error_matches_noise_power() {
        // Each gain averages two long symbols, so its error variance is sigma^2 / 2.
        let lts = crate::ofdm::build_lts();
        let snr_db = 30.0;
        let sigma2 = crate::ofdm::mean_power(&lts) / 10f64.powf(snr_db / 10.0);
        let mut acc = 0.0;
        let mut n = 0.0;
        for seed in 0..400 {
            let rx = crate::channel::apply_awgn(&lts, snr_db, seed);
            let g = estimate_channel(&rx).unwrap();
            for k in (-26..=26).filter(|k| *k != 0) {
                acc += (g.bin(k) - ComplexSample::new(1.0, 0.0)).norm_sqr();
                n += 1.0;
            }
        }
        let measured = acc / n;
        assert!((measured / (sigma2 / 2.0) - 1.0).abs() < 0.05, "{measured} vs {}", sigma2 / 2.0);
    }

    #[test]
    fn noiseless_loopback_many_bits() {
        let cfg = BobConfig::default();
        let mut total = 0;
        for seed in 0..90 {
            let bits = random_bits(12_000, seed);
            let rx = test_frame(&bits);
            match receive(&rx, 0, &cfg).unwrap() {
                Reception::Decoded(f) => {
                    let r = measure_payload_ber(&bits, &f.bits).unwrap();
                    assert_eq!(r.bit_errors, 0);
                    total += r.bits_compared;
                }
                Reception::Missed(_) => panic!("missed noiseless frame"),
            }
        }
        assert!(total >= 1_000_000);
    }

    #[test]
    fn bpsk_frames_decode() {
        let cfg = BobConfig::default();
        let phy = PhyConfig::with_modulation(Modulation::Bpsk);
        let bits = random_bits(500, 3);
        let rx = assemble_frame(&ShortSts::nominal(), &bits, &phy).unwrap().samples();
        let Reception::Decoded(f) = receive(&rx, 0, &cfg).unwrap() else {
            panic!("missed");
        };
        assert_eq!(f.bits, bits);
        assert_eq!(f.frame_len, rx.len());
    }

    #[test]
    fn truncated_frame_is_decode_error() {
        let cfg = BobConfig::default();
        let bits = random_bits(9600, 4);
        let rx = test_frame(&bits);
        let gains = estimate_channel(&rx[LTS_OFFSET..LTS_OFFSET + LTS_LEN]).unwrap();
        let err = demod_payload(&rx[..rx.len() - 80], &gains, &cfg).unwrap_err();
        assert!(matches!(err, Error::Decode(_)));
    }

    #[test]
    fn nominal_match_is_one_for_nominal() {
        let sts = ShortSts::nominal().repeated();
        assert!((nominal_sts_match(&sts) - 1.0).abs() < 1e-12);
        let table = build_lookup_table(0.3).unwrap();
        let m = nominal_sts_match(&table.row(0xFF).repeated());
        assert!(m < 0.975 && m > 0.96);
    }

    #[test]
    fn ber_report_cases() {
        let a = random_bits(1000, 5);
        assert_eq!(measure_payload_ber(&a, &a).unwrap().ber, 0.0);
        let mut b = a.clone();
        b[17] = !b[17];
        assert!((measure_payload_ber(&a, &b).unwrap().ber - 1e-3).abs() < 1e-15);
        let c: Vec<bool> = a.iter().map(|x| !x).collect();
        assert_eq!(measure_payload_ber(&a, &c).unwrap().ber, 1.0);
        assert!(matches!(
            measure_payload_ber(&a, &a[..999]),
            Err(Error::Comparison(_))
        ));
    }
}
