//! Command-line runner for the STS covert-channel experiments.
//!
//! Settings resolve in three layers: `--config` file, then explicit flags, then
//! built-in defaults. The resolved set is hashed into the first line of every CSV.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stsleak::config::ExperimentConfig;
use stsleak::experiments::{
    self, decode_capture_bob, decode_capture_eve, generate_capture, to_csv, with_workers, AccuracyParams,
    CaptureParams, CsvRow, EveBerParams, LeakParams, Precision, TransparencyParams, Victim, VotingParams,
};
use stsleak::iq::{read_cf32, write_cf32};
use stsleak::leakage::{case_study_table, render_table, LeakTimeRow};
use stsleak::recovery::{ReconstructionReport, VotingBuffer};
use stsleak::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "stsleak", version, about = "OFDM preamble covert-channel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bob's payload BER with and without the covert modulation.
    Transparency(Common),
    /// Eve's covert BER over the alpha and SNR grid.
    EveBer(Common),
    /// End-to-end theft of the victim model's weights.
    Leak(Common),
    /// Victim accuracy under random bit flips, float32 and int8.
    AccuracyBer(Common),
    /// Majority voting against the binomial closed form.
    Voting(Common),
    /// Case-study leakage times.
    LeakTimes(Common),
    /// Write a .cf32 capture of HT frames leaking the victim's weight bytes.
    GenIq(Common),
    /// Decode a .cf32 capture as Eve (leaked bytes) and Bob (frame count).
    DecodeIq(Common),
    /// Majority-vote recovered stream files into one.
    Vote(VoteArgs),
}

#[derive(Args, Debug, Clone)]
struct VoteArgs {
    /// Recovered streams, one flat binary file per copy.
    #[arg(required = true)]
    copies: Vec<PathBuf>,
    /// Voted stream output.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth stream for the reconstruction report.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Report CSV; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Modulation depth; a comma-separated list for sweeps.
    #[arg(long)]
    alpha: Option<String>,
    /// SNR in dB; a comma-separated list for sweeps.
    #[arg(long)]
    snr: Option<String>,
    /// Frames per point, seeds, runs or bits depending on the subcommand.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions per leaked byte, or a list for `voting`. `auto` asks the planner.
    #[arg(long)]
    reps: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Line-oriented key=value file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for sweep points (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Carrier frequency offset in Hz.
    #[arg(long)]
    cfo: Option<f64>,
    /// Weight precision for `leak`: f32 or int8.
    #[arg(long)]
    precision: Option<String>,
    /// Input .cf32 file for `decode-iq`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `decode-iq`: also write the recovered bytes as a flat binary file
    /// (erased positions as 0).
    #[arg(long)]
    stream_out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, command: &str) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::new(),
        };
        cfg.set("command", command);
        let flags: [(&str, Option<String>); 9] = [
            ("alpha", self.alpha.clone()),
            ("snr", self.snr.clone()),
            ("trials", self.trials.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("reps", self.reps.clone()),
            ("workers", self.workers.map(|v| v.to_string())),
            ("cfo", self.cfo.map(|v| v.to_string())),
            ("precision", self.precision.clone()),
            ("input", self.input.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v);
            }
        }
        cfg.set_default("workers", 0);
        cfg.set_default("cfo", 0);
        cfg.set_default("snr_reference", "frame_mean_power");
        Ok(cfg)
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn list_csv(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn single_f64(cfg: &ExperimentConfig, key: &str) -> Result<f64> {
    let v = cfg.get_f64_list(key)?;
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::Usage(format!("{key} takes a single value here, got {}", v.len()))),
    }
}

fn sweep<R: CsvRow + Send>(
    cfg: &ExperimentConfig,
    out: &Option<PathBuf>,
    run: impl FnOnce() -> Result<Vec<R>> + Send,
) -> Result<()> {
    let rows = with_workers(cfg.get_usize("workers")?, run)??;
    emit(out, &to_csv(&rows, cfg))
}

fn transparency(c: &Common) -> Result<()> {
    let mut cfg = c.resolve("transparency")?;
    let d = TransparencyParams::default();
    cfg.set_default("alpha", list_csv(&d.alphas));
    cfg.set_default("snr", list_csv(&d.snrs_db));
    cfg.set_default("trials", d.frames);
    cfg.set_default("seed", d.seed);
    cfg.set_default("payload_bytes", d.payload_bytes);
    let p = TransparencyParams {
        alphas: cfg.get_f64_list("alpha")?,
        snrs_db: cfg.get_f64_list("snr")?,
        frames: cfg.get_usize("trials")?,
        payload_bytes: cfg.get_usize("payload_bytes")?,
        cfo_hz: cfg.get_f64("cfo")?,
        seed: cfg.get_u64("seed")?,
    };
    sweep(&cfg, &c.out, || experiments::run_transparency(&p))
}

fn eve_ber(c: &Common) -> Result<()> {
    let mut cfg = c.resolve("eve-ber")?;
    let d = EveBerParams::default();
    cfg.set_default("alpha", list_csv(&d.alphas));
    cfg.set_default("snr", list_csv(&d.snrs_db));
    cfg.set_default("trials", d.frames);
    cfg.set_default("seed", d.seed);
    cfg.set_default("payload_bits", d.payload_bits);
    let p = EveBerParams {
        alphas: cfg.get_f64_list("alpha")?,
        snrs_db: cfg.get_f64_list("snr")?,
        frames: cfg.get_usize("trials")?,
        payload_bits: cfg.get_usize("payload_bits")?,
        cfo_hz: cfg.get_f64("cfo")?,
        seed: cfg.get_u64("seed")?,
    };
    sweep(&cfg, &c.out, || experiments::run_eve_ber(&p))
}

fn leak(c: &Common) -> Result<()> {
    let mut cfg = c.resolve("leak")?;
    let d = LeakParams::default();
    cfg.set_default("alpha", d.alpha);
    cfg.set_default("snr", d.snr_db);
    cfg.set_default("reps", 1);
    cfg.set_default("trials", d.runs);
    cfg.set_default("seed", d.seed);
    cfg.set_default("precision", d.precision.name());
    cfg.set_default("calibration_frames", d.calibration_frames);
    let reps = match cfg.get("reps").unwrap_or("1") {
        "auto" => None,
        s => Some(
            s.parse::<u32>()
                .map_err(|_| Error::Usage(format!("reps must be an odd integer or auto, got {s:?}")))?,
        ),
    };
    let p = LeakParams {
        alpha: single_f64(&cfg, "alpha")?,
        snr_db: single_f64(&cfg, "snr")?,
        reps,
        precision: Precision::parse(cfg.get("precision").unwrap_or("f32"))?,
        runs: cfg.get_usize("trials")?,
        cfo_hz: cfg.get_f64("cfo")?,
        seed: cfg.get_u64("seed")?,
        calibration_frames: cfg.get_usize("calibration_frames")?,
        ..d
    };
    let (plan, reports) = with_workers(cfg.get_usize("workers")?, || experiments::run_leak(&p))??;
    if let Some((cal, plan)) = plan {
        eprintln!(
            "planner: per-copy BER {:.3e} (upper bound {:.3e} over {} bits) -> r = {}, predicted {:.3e}",
            cal.ber, cal.ci_high, cal.bits_compared, plan.repetitions, plan.predicted_ber
        );
    }
    for r in &reports {
        eprintln!(
            "run {}: {} frames ({} predicted), {} erasures, residual BER {:.3e}, accuracy {:.4} vs baseline {:.4}",
            r.run,
            r.frames_sent,
            r.frames_predicted,
            r.erasures,
            r.residual.residual_ber,
            r.stolen_accuracy,
            r.baseline_accuracy
        );
    }
    emit(&c.out, &to_csv(&reports, &cfg))
}

fn accuracy_ber(c: &Common) -> Result<()> {
    let mut cfg = c.resolve("accuracy-ber")?;
    let d = AccuracyParams::default();
    cfg.set_default("ber", list_csv(&d.bers));
    cfg.set_default("trials", d.seeds);
    cfg.set_default("seed", d.seed);
    let p = AccuracyParams {
        bers: cfg.get_f64_list("ber")?,
        seeds: cfg.get_usize("trials")?,
        seed: cfg.get_u64("seed")?,
    };
    sweep(&cfg, &c.out, || experiments::run_accuracy_ber(&p))
}

fn voting(c: &Common) -> Result<()> {
    let mut cfg = c.resolve("voting")?;
    let d = VotingParams::default();
    cfg.set_default("q", list_csv(&d.qs));
    cfg.set_default(
        "reps",
        d.reps.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
    );
    cfg.set_default("trials", d.bits);
    cfg.set_default("seed", d.seed);
    let p = VotingParams {
        qs: cfg.get_f64_list("q")?,
        reps: cfg.get_u32_list("reps")?,
        bits: cfg.get_u64("trials")?,
        seed: cfg.get_u64("seed")?,
    };
    sweep(&cfg, &c.out, || experiments::run_voting(&p))
}

fn leak_times(c: &Common) -> Result<()> {
    let mut cfg = c.resolve("leak-times")?;
    cfg.set_default("rate", 3105);
    cfg.set_default("reps", 1);
    let reps: u32 = cfg
        .get("reps")
        .unwrap_or("1")
        .parse()
        .map_err(|_| Error::Usage("reps must be a positive integer".into()))?;
    if reps == 0 {
        return Err(Error::Usage("reps must be positive".into()));
    }
    let rows = case_study_table(cfg.get_f64("rate")?, reps)?;
    eprint!("{}", render_table(&rows));
    let mut csv = cfg.csv_comment();
    csv.push('\n');
    csv.push_str(LeakTimeRow::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    emit(&c.out, &csv)
}

fn gen_iq(c: &Common) -> Result<()> {
    let mut cfg = c.resolve("gen-iq")?;
    let d = CaptureParams::default();
    cfg.set_default("alpha", d.alpha);
    cfg.set_default("snr", d.snr_db);
    cfg.set_default("trials", 16);
    cfg.set_default("seed", d.seed);
    cfg.set_default("payload_bytes", d.payload_bytes);
    cfg.set_default("gap", d.gap);
    cfg.set_default("precision", "f32");
    let Some(out) = &c.out else {
        return Err(Error::Usage("gen-iq needs --out <file.cf32>".into()));
    };
    let p = CaptureParams {
        alpha: single_f64(&cfg, "alpha")?,
        snr_db: single_f64(&cfg, "snr")?,
        cfo_hz: cfg.get_f64("cfo")?,
        payload_bytes: cfg.get_usize("payload_bytes")?,
        gap: cfg.get_usize("gap")?,
        seed: cfg.get_u64("seed")?,
    };
    let stream = Victim::fixture()?.stream(Precision::parse(cfg.get("precision").unwrap_or("f32"))?);
    let n = cfg.get_usize("trials")?.min(stream.len());
    let iq = generate_capture(&stream[..n], &p)?;
    write_cf32(out, &iq)?;
    eprintln!("{}", cfg.csv_comment());
    eprintln!("wrote {} samples ({} frames) to {}", iq.len(), n, out.display());
    Ok(())
}

fn decode_iq(c: &Common) -> Result<()> {
    let mut cfg = c.resolve("decode-iq")?;
    cfg.set_default("alpha", CaptureParams::default().alpha);
    let Some(input) = cfg.get("input").map(PathBuf::from) else {
        return Err(Error::Usage("decode-iq needs --input <file.cf32>".into()));
    };
    let samples = read_cf32(&input)?;
    let bytes = decode_capture_eve(&samples, single_f64(&cfg, "alpha")?)?;
    if bytes.is_empty() {
        return Err(Error::Decode(format!("no frames found in {}", input.display())));
    }
    let bob_frames = decode_capture_bob(&samples).len();
    if let Some(path) = &c.stream_out {
        let flat: Vec<u8> = bytes.iter().map(|b| b.unwrap_or(0)).collect();
        std::fs::write(path, flat)?;
    }
    eprintln!("eve: {} frames, bob: {} frames", bytes.len(), bob_frames);
    let mut csv = cfg.csv_comment();
    csv.push_str("\nframe,byte\n");
    for (i, b) in bytes.iter().enumerate() {
        match b {
            Some(v) => csv.push_str(&format!("{i},{v}\n")),
            None => csv.push_str(&format!("{i},\n")),
        }
    }
    emit(&c.out, &csv)
}

fn vote(v: &VoteArgs) -> Result<()> {
    let copies = v
        .copies
        .iter()
        .map(|p| std::fs::read(p).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    let voted = VotingBuffer::new(copies)?.majority_vote();
    std::fs::write(&v.out, &voted)?;
    let mut cfg = ExperimentConfig::new();
    cfg.set("command", "vote");
    cfg.set(
        "copies",
        v.copies.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
    );
    let mut csv = cfg.csv_comment();
    csv.push('\n');
    csv.push_str(ReconstructionReport::csv_header());
    csv.push('\n');
    if let Some(t) = &v.truth {
        let truth = std::fs::read(t)?;
        csv.push_str(&ReconstructionReport::compare(&voted, &truth)?.csv_row());
        csv.push('\n');
    }
    emit(&v.report, &csv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Transparency(c) => transparency(c),
        Command::EveBer(c) => eve_ber(c),
        Command::Leak(c) => leak(c),
        Command::AccuracyBer(c) => accuracy_ber(c),
        Command::Voting(c) => voting(c),
        Command::LeakTimes(c) => leak_times(c),
        Command::GenIq(c) => gen_iq(c),
        Command::DecodeIq(c) => decode_iq(c),
        Command::Vote(v) => vote(v),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stsleak: {e}");
            match e {
                Error::Usage(_) | Error::Config(_) | Error::Parameter(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
