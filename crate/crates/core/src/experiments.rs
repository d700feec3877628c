//! Monte Carlo sweeps and the end-to-end leak pipeline.
//!
//! Every sweep point is an independent task. Points run on a rayon pool and results
//! are collected in parameter order, so output does not depend on scheduling.
//! Noise and payload seeds depend on the trial index only, not on alpha or SNR:
//! all points of a sweep see the same underlying random draws (common random
//! numbers), which keeps curve comparisons free of between-point sampling jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::{bytes_to_bits, count_bit_errors};
use crate::channel::{apply_channel, apply_channel_at_power, mix_seed, ChannelConfig};
use crate::config::ExperimentConfig;
use crate::covert::{build_lookup_table_with, CovertConfig, StsLookupTable};
use crate::error::{Error, Result};
use crate::leakage::{cycle_time_us, frames_required, LeakageBudget, MacTiming};
use crate::ofdm::{assemble_frame, mean_power, ComplexSample, PhyConfig, PAYLOAD_OFFSET, SAMPLE_RATE_HZ};
use crate::recovery::{plan_repetitions, post_vote_ber, ReconstructionReport, RepetitionPlan, VotingBuffer};
use crate::rx_bob::{self, BobConfig, Reception};
use crate::rx_eve::{self, correct_sts, extract_byte, sts_spectrum, EveConfig, EveOutcome};
use crate::stats::{mean_and_stderr, BerReport};
use crate::victim::{
    deserialize_weights, evaluate, inject_bit_flips, quantize, serialize_weights, train_tiny_mlp,
    ModelDescriptor, QuantizedMlp, SyntheticDataset, TinyMlp, FIXTURE_SEED,
};

/// Salts separating the independent random streams drawn from one frame seed.
const SALT_CHANNEL: u64 = 0xC4A7;
const SALT_PAYLOAD: u64 = 0xB175;
const SALT_BYTE: u64 = 0x0B7E;
const SALT_CALIBRATION: u64 = 0xCA11;

/// Runs `f` on a pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn random_bits(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

/// Random phase and leading idle samples, fixed by the frame seed.
pub fn frame_channel(snr_db: f64, cfo_hz: f64, frame_seed: u64) -> ChannelConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(frame_seed, SALT_CHANNEL));
    ChannelConfig {
        snr_db,
        cfo_hz,
        phase_rad: rng.random_range(0.0..std::f64::consts::TAU),
        timing_offset: rng.random_range(32..160),
        seed: frame_seed,
        sample_rate: SAMPLE_RATE_HZ,
    }
}

fn table_for_alpha(alpha: f64) -> Result<StsLookupTable> {
    build_lookup_table_with(&CovertConfig::new(alpha)?)
}

fn check_grid(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Usage(format!("{name} grid is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Usage(format!("{name} grid has a non-finite entry")));
    }
    Ok(())
}

/// Rows that can be written as CSV.
pub trait CsvRow {
    fn header() -> &'static str;
    fn row(&self) -> String;
}

/// Config comment, header, then one line per row.
pub fn to_csv<R: CsvRow>(rows: &[R], cfg: &ExperimentConfig) -> String {
    let mut s = cfg.csv_comment();
    s.push('\n');
    s.push_str(R::header());
    s.push('\n');
    for r in rows {
        s.push_str(&r.row());
        s.push('\n');
    }
    s
}

fn ber_fields(r: &BerReport) -> String {
    format!("{},{},{:.6e},{:.6e},{:.6e}", r.bits_compared, r.bit_errors, r.ber, r.ci_low, r.ci_high)
}

// ---------------------------------------------------------------------------
// Transparency: Bob's payload BER with and without the covert modulation.

#[derive(Debug, Clone, PartialEq)]
pub struct TransparencyParams {
    /// 0 means an HT-free transmitter.
    pub alphas: Vec<f64>,
    pub snrs_db: Vec<f64>,
    pub frames: usize,
    pub payload_bytes: usize,
    pub cfo_hz: f64,
    pub seed: u64,
}

impl Default for TransparencyParams {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.30],
            snrs_db: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            // 84 frames of 1500 bytes is just over 1e6 payload bits.
            frames: 84,
            payload_bytes: 1500,
            cfo_hz: 0.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransparencyRow {
    pub seed: u64,
    pub alpha: f64,
    pub snr_db: f64,
    pub frames: usize,
    /// Frames Bob failed to synchronize or decode; all their bits count as errors.
    pub missed: usize,
    pub report: BerReport,
}

impl CsvRow for TransparencyRow {
    fn header() -> &'static str {
        "role,alpha,snr_db,frames,missed,bits,errors,ber,ci_low,ci_high,seed"
    }

    fn row(&self) -> String {
        format!(
            "bob,{},{},{},{},{},{}",
            self.alpha,
            self.snr_db,
            self.frames,
            self.missed,
            ber_fields(&self.report),
            self.seed
        )
    }
}

/// Errors between sent and received payload; missing or extra bits are errors.
fn payload_errors(tx: &[bool], rx: &[bool]) -> u64 {
    let common = tx.len().min(rx.len());
    let flips = tx[..common].iter().zip(&rx[..common]).filter(|(a, b)| a != b).count();
    (flips + tx.len().abs_diff(rx.len())) as u64
}

fn transparency_point(p: &TransparencyParams, alpha: f64, snr_db: f64) -> Result<TransparencyRow> {
    let table = table_for_alpha(alpha)?;
    let phy = PhyConfig::default();
    let bob = BobConfig::default();
    let n_bits = p.payload_bytes * 8;
    let mut missed = 0;
    let mut errors = 0u64;
    for trial in 0..p.frames {
        let fseed = mix_seed(p.seed, trial as u64);
        let bits = random_bits(n_bits, mix_seed(fseed, SALT_PAYLOAD));
        let byte = (mix_seed(fseed, SALT_BYTE) & 0xFF) as u8;
        let frame = assemble_frame(table.row(byte), &bits, &phy)?;
        let rx = apply_channel(&frame.samples(), &frame_channel(snr_db, p.cfo_hz, fseed));
        match rx_bob::receive(&rx, 0, &bob) {
            Ok(Reception::Decoded(f)) => errors += payload_errors(&bits, &f.bits),
            Ok(Reception::Missed(_)) | Err(_) => {
                missed += 1;
                errors += n_bits as u64;
            }
        }
    }
    Ok(TransparencyRow {
        seed: p.seed,
        alpha,
        snr_db,
        frames: p.frames,
        missed,
        report: BerReport::from_counts((p.frames * n_bits) as u64, errors),
    })
}

pub fn run_transparency(p: &TransparencyParams) -> Result<Vec<TransparencyRow>> {
    check_grid("alpha", &p.alphas)?;
    check_grid("SNR", &p.snrs_db)?;
    if p.frames == 0 || p.payload_bytes == 0 {
        return Err(Error::Usage("transparency needs at least one frame and payload byte".into()));
    }
    for &a in &p.alphas {
        CovertConfig::new(a).map_err(|e| Error::Usage(e.to_string()))?;
    }
    let points: Vec<(f64, f64)> = p
        .alphas
        .iter()
        .flat_map(|&a| p.snrs_db.iter().map(move |&s| (a, s)))
        .collect();
    points
        .par_iter()
        .map(|&(a, s)| transparency_point(p, a, s))
        .collect()
}

/// Outcome of the transparency comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TransparencyVerdict {
    /// SNRs where the HT-free and reference-alpha intervals do not overlap.
    pub non_overlapping_snrs: Vec<f64>,
    /// SNRs where the deep-alpha curve is significantly above HT-free.
    pub degraded_snrs: Vec<f64>,
}

pub fn transparency_verdict(rows: &[TransparencyRow], reference_alpha: f64, deep_alpha: f64) -> TransparencyVerdict {
    let find = |a: f64, s: f64| rows.iter().find(|r| r.alpha == a && r.snr_db == s);
    let mut v = TransparencyVerdict {
        non_overlapping_snrs: Vec::new(),
        degraded_snrs: Vec::new(),
    };
    let mut snrs: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    for s in snrs {
        let Some(free) = find(0.0, s) else { continue };
        if let Some(r) = find(reference_alpha, s) {
            if !free.report.overlaps(&r.report) {
                v.non_overlapping_snrs.push(s);
            }
        }
        if let Some(d) = find(deep_alpha, s) {
            if d.report.significantly_above(&free.report) {
                v.degraded_snrs.push(s);
            }
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Eve's covert BER over alpha and SNR.

#[derive(Debug, Clone, PartialEq)]
pub struct EveBerParams {
    pub alphas: Vec<f64>,
    pub snrs_db: Vec<f64>,
    pub frames: usize,
    /// Short payloads keep the sweep cheap; Eve only reads the preamble.
    pub payload_bits: usize,
    pub cfo_hz: f64,
    pub seed: u64,
}

impl Default for EveBerParams {
    fn default() -> Self {
        Self {
            alphas: vec![0.05, 0.10, 0.15, 0.20, 0.30],
            snrs_db: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            frames: 20_000,
            payload_bits: 96,
            cfo_hz: 0.0,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveBerRow {
    pub seed: u64,
    pub alpha: f64,
    pub snr_db: f64,
    pub frames: usize,
    pub erasures: usize,
    /// Over bytes that were not erased.
    pub report: BerReport,
}

impl CsvRow for EveBerRow {
    fn header() -> &'static str {
        "role,alpha,snr_db,frames,bits,errors,ber,ci_low,ci_high,erasures,seed"
    }

    fn row(&self) -> String {
        format!(
            "eve,{},{},{},{},{},{}",
            self.alpha,
            self.snr_db,
            self.frames,
            ber_fields(&self.report),
            self.erasures,
            self.seed
        )
    }
}

/// The leaked byte of trial `trial`, shared by every point of a sweep.
fn trial_byte(seed: u64, trial: usize) -> u8 {
    (mix_seed(mix_seed(seed, trial as u64), SALT_BYTE) & 0xFF) as u8
}

/// Eve's decision on a single frame carrying `byte`.
pub fn eve_trial(
    table: &StsLookupTable,
    eve: &EveConfig,
    byte: u8,
    payload_bits: &[bool],
    channel: &ChannelConfig,
) -> Result<EveOutcome> {
    let frame = assemble_frame(table.row(byte), payload_bits, &PhyConfig::default())?;
    let rx = apply_channel(&frame.samples(), channel);
    Ok(rx_eve::receive(&rx, 0, 0, eve))
}

fn eve_point(p: &EveBerParams, alpha: f64, snr_db: f64) -> Result<EveBerRow> {
    let table = table_for_alpha(alpha)?;
    let eve = EveConfig::new(alpha);
    let mut erasures = 0;
    let mut errors = 0u64;
    for trial in 0..p.frames {
        let fseed = mix_seed(p.seed, trial as u64);
        let byte = trial_byte(p.seed, trial);
        let bits = random_bits(p.payload_bits, mix_seed(fseed, SALT_PAYLOAD));
        match eve_trial(&table, &eve, byte, &bits, &frame_channel(snr_db, p.cfo_hz, fseed))?.value() {
            Some(v) => errors += (v ^ byte).count_ones() as u64,
            None => erasures += 1,
        }
    }
    Ok(EveBerRow {
        seed: p.seed,
        alpha,
        snr_db,
        frames: p.frames,
        erasures,
        report: BerReport::from_counts(((p.frames - erasures) * 8) as u64, errors),
    })
}

pub fn run_eve_ber(p: &EveBerParams) -> Result<Vec<EveBerRow>> {
    check_grid("alpha", &p.alphas)?;
    check_grid("SNR", &p.snrs_db)?;
    if p.frames == 0 {
        return Err(Error::Usage("eve-ber needs at least one frame per point".into()));
    }
    for &a in &p.alphas {
        EveConfig::new(a).validate().map_err(|e| Error::Usage(e.to_string()))?;
    }
    let points: Vec<(f64, f64)> = p
        .alphas
        .iter()
        .flat_map(|&a| p.snrs_db.iter().map(move |&s| (a, s)))
        .collect();
    points.par_iter().map(|&(a, s)| eve_point(p, a, s)).collect()
}

/// Checks one ordered curve (worst first). Every adjacent pair must be
/// non-increasing; where both points sit at or above `floor` the decrease must be
/// strict with disjoint confidence intervals. Returns the offending pairs.
pub fn monotone_violations(curve: &[&BerReport], floor: f64) -> Vec<usize> {
    let mut bad = Vec::new();
    for i in 1..curve.len() {
        let (hi, lo) = (curve[i - 1], curve[i]);
        let ok = if hi.ber >= floor && lo.ber >= floor {
            lo.ber < hi.ber && lo.ci_high < hi.ci_low
        } else {
            lo.ber <= hi.ber
        };
        if !ok {
            bad.push(i);
        }
    }
    bad
}

// ---------------------------------------------------------------------------
// End-to-end weight theft.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    Int8,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::Int8 => "int8",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "f32" | "float32" => Ok(Precision::F32),
            "int8" | "i8" => Ok(Precision::Int8),
            _ => Err(Error::Usage(format!("unknown precision {s:?} (f32 or int8)"))),
        }
    }
}

/// The trained victim in both forms plus the dataset it is scored on.
#[derive(Debug, Clone)]
pub struct Victim {
    pub model: TinyMlp,
    pub quantized: QuantizedMlp,
    pub data: SyntheticDataset,
}

impl Victim {
    pub fn fixture() -> Result<Self> {
        let model = train_tiny_mlp(FIXTURE_SEED);
        let quantized = quantize(&model)?;
        Ok(Self {
            model,
            quantized,
            data: SyntheticDataset::standard(),
        })
    }

    /// Bytes an attacker must steal. The int8 form carries its scale records.
    pub fn stream(&self, precision: Precision) -> Vec<u8> {
        match precision {
            Precision::F32 => serialize_weights(&self.model),
            Precision::Int8 => {
                let mut s = self.quantized.serialize();
                s.extend(self.quantized.scale_records());
                s
            }
        }
    }

    pub fn baseline(&self, precision: Precision) -> f64 {
        match precision {
            Precision::F32 => evaluate(&self.model, &self.data.test),
            Precision::Int8 => evaluate(&crate::victim::dequantize(&self.quantized), &self.data.test),
        }
    }

    /// Accuracy of a model rebuilt from a (possibly corrupted) stream.
    pub fn accuracy_of_stream(&self, precision: Precision, stream: &[u8]) -> Result<f64> {
        match precision {
            Precision::F32 => {
                let m = deserialize_weights(stream, &ModelDescriptor::tiny_mlp_f32())?;
                Ok(evaluate(&m, &self.data.test))
            }
            Precision::Int8 => {
                let n = ModelDescriptor::tiny_mlp_int8().total_bytes();
                if stream.len() < n {
                    return Err(Error::Format(format!("int8 stream of {} bytes", stream.len())));
                }
                let q = QuantizedMlp::deserialize(&stream[..n], &stream[n..], &ModelDescriptor::tiny_mlp_int8())?;
                Ok(evaluate(&crate::victim::dequantize(&q), &self.data.test))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakParams {
    pub alpha: f64,
    pub snr_db: f64,
    /// Repetitions; `None` asks the planner.
    pub reps: Option<u32>,
    pub precision: Precision,
    pub runs: usize,
    pub cfo_hz: f64,
    pub seed: u64,
    /// Frames used to estimate the per-copy BER before planning.
    pub calibration_frames: usize,
    /// Planner target; `None` means one expected bit error in ten streams.
    pub target_ber: Option<f64>,
    pub payload_bits: usize,
}

impl Default for LeakParams {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            snr_db: 30.0,
            reps: Some(1),
            precision: Precision::F32,
            runs: 1,
            cfo_hz: 0.0,
            seed: 3,
            calibration_frames: 4000,
            target_ber: None,
            payload_bits: 96,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakReport {
    pub run: usize,
    pub alpha: f64,
    pub snr_db: f64,
    pub precision: Precision,
    pub repetitions: u32,
    pub stream_bytes: usize,
    pub frames_sent: u64,
    /// N_f · r from the analytical budget.
    pub frames_predicted: u64,
    pub erasures: usize,
    /// Pre-vote errors over all copies.
    pub raw: BerReport,
    pub residual: ReconstructionReport,
    pub baseline_accuracy: f64,
    pub stolen_accuracy: f64,
    /// Frames sent times the MAC cycle.
    pub air_time_s: f64,
    pub predicted_leak_time_s: f64,
}

impl CsvRow for LeakReport {
    fn header() -> &'static str {
        "run,alpha,snr_db,precision,repetitions,stream_bytes,frames_sent,frames_predicted,erasures,\
raw_bits,raw_errors,raw_ber,residual_bit_errors,residual_ber,byte_mismatches,baseline_accuracy,\
stolen_accuracy,air_time_s,predicted_leak_time_s"
    }

    fn row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.6e},{},{:.6e},{},{:.4},{:.4},{:.6},{:.6}",
            self.run,
            self.alpha,
            self.snr_db,
            self.precision.name(),
            self.repetitions,
            self.stream_bytes,
            self.frames_sent,
            self.frames_predicted,
            self.erasures,
            self.raw.bits_compared,
            self.raw.bit_errors,
            self.raw.ber,
            self.residual.bit_errors,
            self.residual.residual_ber,
            self.residual.byte_mismatches,
            self.baseline_accuracy,
            self.stolen_accuracy,
            self.air_time_s,
            self.predicted_leak_time_s,
        )
    }
}

/// Per-copy BER estimate from calibration frames carrying random bytes.
pub fn calibrate_covert_ber(alpha: f64, snr_db: f64, cfo_hz: f64, frames: usize, seed: u64) -> Result<BerReport> {
    let p = EveBerParams {
        alphas: vec![alpha],
        snrs_db: vec![snr_db],
        frames,
        payload_bits: 96,
        cfo_hz,
        seed: mix_seed(seed, SALT_CALIBRATION),
    };
    Ok(eve_point(&p, alpha, snr_db)?.report)
}

/// Planner step of the pipeline: per-copy BER from the upper confidence bound of a
/// calibration run, repetitions for the target.
pub fn plan_for_leak(p: &LeakParams, stream_bits: usize) -> Result<(BerReport, RepetitionPlan)> {
    let cal = calibrate_covert_ber(p.alpha, p.snr_db, p.cfo_hz, p.calibration_frames, p.seed)?;
    let target = p.target_ber.unwrap_or(1.0 / (10.0 * stream_bits as f64));
    let plan = plan_repetitions(cal.ci_high, target)?;
    Ok((cal, plan))
}

fn leak_run(p: &LeakParams, victim: &Victim, reps: u32, run: usize) -> Result<LeakReport> {
    let table = table_for_alpha(p.alpha)?;
    let eve = EveConfig::new(p.alpha);
    let truth = victim.stream(p.precision);
    let mut src = crate::covert::LeakByteSource::new(truth.clone())?;
    let run_seed = mix_seed(p.seed, run as u64);
    let total = truth.len() as u64 * reps as u64;
    let mut assembler = rx_eve::StreamAssembler::new();
    let phy = PhyConfig::default();
    for f in 0..total {
        let fseed = mix_seed(run_seed, f);
        let bits = random_bits(p.payload_bits, mix_seed(fseed, SALT_PAYLOAD));
        let (frame, _) = crate::covert::ht_frame(&bits, &mut src, &table, &phy)?;
        let rx = apply_channel(&frame.samples(), &frame_channel(p.snr_db, p.cfo_hz, fseed));
        assembler.push(&rx_eve::receive(&rx, 0, f, &eve));
    }
    let copies = assembler.copies(truth.len());
    let mut raw_errors = 0u64;
    let mut raw_bits = 0u64;
    for copy in &copies {
        for (got, want) in copy.iter().zip(&truth) {
            if let Some(g) = got {
                raw_errors += (g ^ want).count_ones() as u64;
                raw_bits += 8;
            }
        }
    }
    let voted = VotingBuffer::with_erasures(copies)?.majority_vote();
    let residual = ReconstructionReport::compare(&voted, &truth)?;
    let stolen_accuracy = victim.accuracy_of_stream(p.precision, &voted)?;
    let timing = MacTiming::default();
    let budget = LeakageBudget::new(truth.len() as u64, 8, 1)?;
    let frames_predicted = frames_required(&budget)? * reps as u64;
    Ok(LeakReport {
        run,
        alpha: p.alpha,
        snr_db: p.snr_db,
        precision: p.precision,
        repetitions: reps,
        stream_bytes: truth.len(),
        frames_sent: total,
        frames_predicted,
        erasures: assembler.erasures(),
        raw: BerReport::from_counts(raw_bits, raw_errors),
        residual,
        baseline_accuracy: victim.baseline(p.precision),
        stolen_accuracy,
        air_time_s: total as f64 * cycle_time_us(&timing) * 1e-6,
        predicted_leak_time_s: crate::leakage::leak_time(&budget, &timing)? * reps as f64,
    })
}

/// Leak, vote, rebuild and score. Returns the plan used when repetitions were
/// chosen automatically.
pub fn run_leak(p: &LeakParams) -> Result<(Option<(BerReport, RepetitionPlan)>, Vec<LeakReport>)> {
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(Error::Usage(format!("alpha must lie in (0, 1), got {}", p.alpha)));
    }
    if p.runs == 0 {
        return Err(Error::Usage("leak needs at least one run".into()));
    }
    if let Some(r) = p.reps {
        if r == 0 || r % 2 == 0 {
            return Err(Error::Usage(format!("repetitions must be odd, got {r}")));
        }
    }
    let victim = Victim::fixture()?;
    let stream_bits = victim.stream(p.precision).len() * 8;
    let plan = match p.reps {
        Some(_) => None,
        None => Some(plan_for_leak(p, stream_bits)?),
    };
    let reps = p.reps.unwrap_or_else(|| plan.as_ref().map(|(_, pl)| pl.repetitions).unwrap_or(1));
    let reports = (0..p.runs)
        .into_par_iter()
        .map(|run| leak_run(p, &victim, reps, run))
        .collect::<Result<Vec<_>>>()?;
    Ok((plan, reports))
}

// ---------------------------------------------------------------------------
// Accuracy versus injected bit error rate.

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyParams {
    pub bers: Vec<f64>,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for AccuracyParams {
    fn default() -> Self {
        let mut bers = vec![0.0];
        for exp in -7..=-1 {
            for m in [1, 3] {
                // Parsed from decimal text so the grid prints without binary noise.
                let b: f64 = format!("{m}e{exp}").parse().unwrap();
                if b <= 0.1 {
                    bers.push(b);
                }
            }
        }
        Self {
            bers,
            seeds: 30,
            seed: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub precision: Precision,
    pub ber: f64,
    pub seeds: usize,
    pub mean: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    pub baseline: f64,
}

impl CsvRow for AccuracyRow {
    fn header() -> &'static str {
        "precision,ber,seeds,mean_accuracy,stderr,min_accuracy,max_accuracy,baseline"
    }

    fn row(&self) -> String {
        format!(
            "{},{:e},{},{:.6},{:.6},{:.4},{:.4},{:.4}",
            self.precision.name(),
            self.ber,
            self.seeds,
            self.mean,
            self.stderr,
            self.min,
            self.max,
            self.baseline
        )
    }
}

pub fn run_accuracy_ber(p: &AccuracyParams) -> Result<Vec<AccuracyRow>> {
    check_grid("BER", &p.bers)?;
    if p.bers.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::Usage("BER grid entries must lie in [0, 1]".into()));
    }
    if p.seeds == 0 {
        return Err(Error::Usage("accuracy-ber needs at least one seed".into()));
    }
    let victim = Victim::fixture()?;
    let points: Vec<(Precision, f64)> = [Precision::F32, Precision::Int8]
        .into_iter()
        .flat_map(|pr| p.bers.iter().map(move |&b| (pr, b)))
        .collect();
    points
        .par_iter()
        .map(|&(precision, ber)| {
            let stream = victim.stream(precision);
            // Scale records are side information, not weights: only the weight bytes
            // are exposed to flips.
            let exposed = match precision {
                Precision::F32 => stream.len(),
                Precision::Int8 => ModelDescriptor::tiny_mlp_int8().total_bytes(),
            };
            let accs = (0..p.seeds)
                .map(|s| {
                    let mut flipped = inject_bit_flips(&stream[..exposed], ber, mix_seed(p.seed, s as u64))?;
                    flipped.extend_from_slice(&stream[exposed..]);
                    victim.accuracy_of_stream(precision, &flipped)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean, stderr) = mean_and_stderr(&accs);
            Ok(AccuracyRow {
                precision,
                ber,
                seeds: p.seeds,
                mean,
                stderr,
                min: accs.iter().copied().fold(f64::INFINITY, f64::min),
                max: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                baseline: victim.baseline(precision),
            })
        })
        .collect()
}

/// Smallest BER whose mean accuracy is at least `drop` below baseline.
pub fn accuracy_breakpoint(rows: &[AccuracyRow], precision: Precision, drop: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.precision == precision && r.mean <= r.baseline - drop)
        .map(|r| r.ber)
        .min_by(f64::total_cmp)
}

/// BER grid points where the mean rises above its predecessor by more than the
/// combined two-sigma band.
pub fn accuracy_monotone_violations(rows: &[AccuracyRow], precision: Precision) -> Vec<f64> {
    let mut curve: Vec<&AccuracyRow> = rows.iter().filter(|r| r.precision == precision).collect();
    curve.sort_by(|a, b| a.ber.total_cmp(&b.ber));
    curve
        .windows(2)
        .filter(|w| {
            let band = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].mean > w[0].mean + band
        })
        .map(|w| w[1].ber)
        .collect()
}

// ---------------------------------------------------------------------------
// Voting over independent bit flips against the binomial closed form.

#[derive(Debug, Clone, PartialEq)]
pub struct VotingParams {
    pub qs: Vec<f64>,
    pub reps: Vec<u32>,
    pub bits: u64,
    pub seed: u64,
}

impl Default for VotingParams {
    fn default() -> Self {
        Self {
            qs: vec![7e-4, 1e-3, 1e-2, 0.1],
            reps: vec![1, 3, 5, 7, 9],
            bits: 10_000_000,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VotingRow {
    pub q: f64,
    pub r: u32,
    pub bits: u64,
    pub errors: u64,
    pub empirical: f64,
    pub predicted: f64,
    /// (errors − n·p) / √(n·p·(1−p)); zero when the prediction is degenerate.
    pub z: f64,
}

impl CsvRow for VotingRow {
    fn header() -> &'static str {
        "q,r,bits,errors,empirical_ber,predicted_ber,z_score"
    }

    fn row(&self) -> String {
        format!(
            "{:e},{},{},{},{:.6e},{:.6e},{:.3}",
            self.q, self.r, self.bits, self.errors, self.empirical, self.predicted, self.z
        )
    }
}

const VOTING_CHUNK_BYTES: usize = 1 << 16;

fn voting_chunk(q: f64, r: u32, bytes: usize, seed: u64) -> Result<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<u8> = (0..bytes).map(|_| rng.random()).collect();
    let copies = (0..r)
        .map(|c| inject_bit_flips(&truth, q, mix_seed(seed, c as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    let voted = VotingBuffer::new(copies)?.majority_vote();
    Ok(count_bit_errors(&voted, &truth))
}

pub fn run_voting(p: &VotingParams) -> Result<Vec<VotingRow>> {
    check_grid("q", &p.qs)?;
    if p.reps.is_empty() || p.reps.iter().any(|r| r % 2 == 0) {
        return Err(Error::Usage("repetition list must be non-empty and odd".into()));
    }
    if p.qs.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::Usage("q must lie in [0, 1]".into()));
    }
    let total_bytes = (p.bits as usize).div_ceil(8);
    let chunks = total_bytes.div_ceil(VOTING_CHUNK_BYTES);
    let points: Vec<(usize, f64, u32)> = p
        .qs
        .iter()
        .enumerate()
        .flat_map(|(i, &q)| p.reps.iter().map(move |&r| (i, q, r)))
        .collect();
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|pi| (0..chunks).map(move |c| (pi, c)))
        .collect();
    let counts = tasks
        .par_iter()
        .map(|&(pi, c)| {
            let (qi, q, r) = points[pi];
            let len = VOTING_CHUNK_BYTES.min(total_bytes - c * VOTING_CHUNK_BYTES);
            // Seeded by q and chunk so every r at one q shares the truth stream.
            voting_chunk(q, r, len, mix_seed(mix_seed(p.seed, qi as u64), c as u64))
        })
        .collect::<Result<Vec<u64>>>()?;
    points
        .iter()
        .enumerate()
        .map(|(pi, &(_, q, r))| {
            let errors: u64 = counts[pi * chunks..(pi + 1) * chunks].iter().sum();
            let bits = total_bytes as u64 * 8;
            let predicted = post_vote_ber(q, r)?;
            let var = bits as f64 * predicted * (1.0 - predicted);
            let z = if var > 0.0 {
                (errors as f64 - bits as f64 * predicted) / var.sqrt()
            } else {
                0.0
            };
            Ok(VotingRow {
                q,
                r,
                bits,
                errors,
                empirical: errors as f64 / bits as f64,
                predicted,
                z,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Raw IQ captures.

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureParams {
    pub alpha: f64,
    pub snr_db: f64,
    pub cfo_hz: f64,
    pub payload_bytes: usize,
    /// Idle samples before each frame.
    pub gap: usize,
    pub seed: u64,
}

impl Default for CaptureParams {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            snr_db: 30.0,
            cfo_hz: 0.0,
            payload_bytes: 100,
            gap: 400,
            seed: 6,
        }
    }
}

/// One frame per leak byte, separated by idle gaps, through one continuous channel.
/// The SNR is referenced to the mean power of the frames alone.
pub fn generate_capture(leak_bytes: &[u8], p: &CaptureParams) -> Result<Vec<ComplexSample>> {
    if leak_bytes.is_empty() {
        return Err(Error::Usage("nothing to leak".into()));
    }
    let table = table_for_alpha(p.alpha)?;
    let mut src = crate::covert::LeakByteSource::new(leak_bytes.to_vec())?;
    let phy = PhyConfig::default();
    let mut buffer = Vec::new();
    let mut energy = 0.0;
    let mut frame_samples = 0usize;
    for i in 0..leak_bytes.len() {
        let bits = random_bits(p.payload_bytes * 8, mix_seed(mix_seed(p.seed, i as u64), SALT_PAYLOAD));
        let (frame, _) = crate::covert::ht_frame(&bits, &mut src, &table, &phy)?;
        let s = frame.samples();
        energy += mean_power(&s) * s.len() as f64;
        frame_samples += s.len();
        buffer.extend(std::iter::repeat_n(ComplexSample::new(0.0, 0.0), p.gap));
        buffer.extend(s);
    }
    buffer.extend(std::iter::repeat_n(ComplexSample::new(0.0, 0.0), p.gap));
    let mut channel = frame_channel(p.snr_db, p.cfo_hz, p.seed);
    channel.timing_offset = 0;
    Ok(apply_channel_at_power(&buffer, &channel, energy / frame_samples as f64))
}

/// Eve over a capture: every synchronized frame yields a byte or an erasure.
pub fn decode_capture_eve(samples: &[ComplexSample], alpha: f64) -> Result<Vec<Option<u8>>> {
    let eve = EveConfig::new(alpha);
    eve.validate()?;
    let mut out = Vec::new();
    let mut cursor = 0;
    while cursor < samples.len() {
        let sync = rx_bob::detect_frame_with(samples, cursor, &eve.sync);
        if !sync.detected {
            if sync.plateau_end >= samples.len() || sync.plateau_end <= cursor {
                break;
            }
            cursor = sync.plateau_end;
            continue;
        }
        let byte = correct_sts(samples, &sync, eve.sync.sample_rate)
            .and_then(|sts| sts_spectrum(&sts))
            .and_then(|g| extract_byte(&g, &eve, out.len() as u64))
            .ok()
            .map(|b| b.value);
        out.push(byte);
        cursor = sync.frame_start + PAYLOAD_OFFSET;
    }
    Ok(out)
}

/// Bob over a capture: payload bits of every frame he decodes.
pub fn decode_capture_bob(samples: &[ComplexSample]) -> Vec<Vec<bool>> {
    let bob = BobConfig::default();
    let mut out = Vec::new();
    let mut cursor = 0;
    while cursor < samples.len() {
        match rx_bob::receive(samples, cursor, &bob) {
            Ok(Reception::Decoded(f)) => {
                cursor = f.sync.frame_start + f.frame_len;
                out.push(f.bits);
            }
            Ok(Reception::Missed(sync)) => {
                if sync.plateau_end >= samples.len() || sync.plateau_end <= cursor {
                    break;
                }
                cursor = sync.plateau_end;
            }
            Err(_) => break,
        }
    }
    out
}

/// Leaked bytes of a capture as bits, for BER against the source.
pub fn capture_bits(bytes: &[Option<u8>]) -> Vec<bool> {
    bytes_to_bits(&bytes.iter().map(|b| b.unwrap_or(0)).collect::<Vec<_>>())
}
