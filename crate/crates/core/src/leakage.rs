//! Analytical leakage budget: frames needed, MAC cycle timing, covert throughput
//! and total leak time.

use crate::error::{Error, Result};

/// What has to be leaked and how much of it rides on each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeakageBudget {
    pub n_weights: u64,
    pub precision_bits: u32,
    pub bytes_per_frame: u32,
}

impl LeakageBudget {
    pub fn new(n_weights: u64, precision_bits: u32, bytes_per_frame: u32) -> Result<Self> {
        let b = Self {
            n_weights,
            precision_bits,
            bytes_per_frame,
        };
        b.validate()?;
        Ok(b)
    }

    /// Budget from a memory footprint and element width in bytes, one byte per frame.
    pub fn from_bytes(memory_bytes: u64, precision_bytes: u32) -> Result<Self> {
        if precision_bytes == 0 || memory_bytes % precision_bytes as u64 != 0 {
            return Err(Error::Parameter(format!(
                "{memory_bytes} bytes is not a whole number of {precision_bytes}-byte weights"
            )));
        }
        Self::new(memory_bytes / precision_bytes as u64, precision_bytes * 8, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_weights == 0 || self.precision_bits == 0 || self.bytes_per_frame == 0 {
            return Err(Error::Parameter(format!("budget fields must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn total_bits(&self) -> u64 {
        self.n_weights * self.precision_bits as u64
    }
}

/// ⌈N_w·p / (8·B)⌉.
pub fn frames_required(budget: &LeakageBudget) -> Result<u64> {
    budget.validate()?;
    Ok(budget.total_bits().div_ceil(8 * budget.bytes_per_frame as u64))
}

/// One DCF transmit cycle, all durations in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacTiming {
    pub difs_us: f64,
    pub sifs_us: f64,
    pub ack_us: f64,
    /// Preamble plus SIGNAL.
    pub fixed_frame_us: f64,
    pub payload_bytes: u32,
    pub data_rate_mbps: f64,
    pub symbol_us: f64,
}

impl Default for MacTiming {
    fn default() -> Self {
        Self {
            difs_us: 28.0,
            sifs_us: 10.0,
            ack_us: 40.0,
            fixed_frame_us: 20.0,
            payload_bytes: 1500,
            data_rate_mbps: 54.0,
            symbol_us: 4.0,
        }
    }
}

impl MacTiming {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.difs_us,
            self.sifs_us,
            self.ack_us,
            self.fixed_frame_us,
            self.data_rate_mbps,
            self.symbol_us,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Parameter(format!("timing fields must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> f64 {
        self.data_rate_mbps * self.symbol_us
    }

    /// Payload air time rounded up to whole OFDM symbols.
    pub fn payload_duration_us(&self) -> f64 {
        let symbols = (self.payload_bytes as f64 * 8.0 / self.bits_per_symbol()).ceil();
        symbols * self.symbol_us
    }
}

pub fn cycle_time_us(t: &MacTiming) -> f64 {
    t.difs_us + t.fixed_frame_us + t.payload_duration_us() + t.sifs_us + t.ack_us
}

/// Covert bytes per second when every cycle carries `bytes_per_frame` bytes.
pub fn throughput(t: &MacTiming, bytes_per_frame: u32) -> f64 {
    bytes_per_frame as f64 / (cycle_time_us(t) * 1e-6)
}

/// Seconds of air time: one cycle per frame.
pub fn leak_time(budget: &LeakageBudget, t: &MacTiming) -> Result<f64> {
    t.validate()?;
    Ok(frames_required(budget)? as f64 * cycle_time_us(t) * 1e-6)
}

/// Leak time for a one-byte-per-frame budget at a given covert rate.
pub fn leak_time_at_rate(budget: &LeakageBudget, bytes_per_second: f64) -> Result<f64> {
    if !(bytes_per_second > 0.0) {
        return Err(Error::Parameter(format!("rate {bytes_per_second} must be positive")));
    }
    Ok(frames_required(budget)? as f64 * budget.bytes_per_frame as f64 / bytes_per_second)
}

/// A published case study: memory footprint and the quoted leak time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseStudy {
    pub model: &'static str,
    pub precision_bytes: u32,
    pub memory_bytes: u64,
    pub quoted_seconds: f64,
    pub quoted_label: &'static str,
}

impl CaseStudy {
    /// Smallest unit shown in the quoted label.
    pub fn display_resolution_s(&self) -> f64 {
        if self.quoted_label.contains('h') {
            60.0
        } else {
            1.0
        }
    }
}

pub const CASE_STUDIES: [CaseStudy; 5] = [
    CaseStudy {
        model: "LeNet5",
        precision_bytes: 4,
        memory_bytes: 246_824,
        quoted_seconds: 79.0,
        quoted_label: "79s",
    },
    CaseStudy {
        model: "Quantized LeNet5",
        precision_bytes: 1,
        memory_bytes: 61_470,
        quoted_seconds: 20.0,
        quoted_label: "20s",
    },
    CaseStudy {
        model: "MobileNetV3-Large",
        precision_bytes: 4,
        memory_bytes: 21_932_128,
        quoted_seconds: 7080.0,
        quoted_label: "1h58m",
    },
    CaseStudy {
        model: "IBM DVS128 Gesture SNN",
        precision_bytes: 4,
        memory_bytes: 16_954_240,
        quoted_seconds: 5460.0,
        quoted_label: "1h31m",
    },
    CaseStudy {
        model: "YOLO11n",
        precision_bytes: 4,
        memory_bytes: 10_464_992,
        quoted_seconds: 3376.0,
        quoted_label: "56m16s",
    },
];

/// Seconds rendered as `XhYm`, `MmSs` or `Ss`; under two minutes stays in seconds.
pub fn format_duration(seconds: f64) -> String {
    if seconds >= 3600.0 {
        let m = (seconds / 60.0).round() as u64;
        format!("{}h{}m", m / 60, m % 60)
    } else if seconds >= 120.0 {
        let s = seconds.round() as u64;
        format!("{}m{}s", s / 60, s % 60)
    } else {
        format!("{}s", seconds.round() as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakTimeRow {
    pub model: String,
    pub precision_bytes: u32,
    pub memory_bytes: u64,
    pub frames: u64,
    pub throughput: f64,
    pub leak_seconds: f64,
    pub repetitions: u32,
    pub total_seconds: f64,
    pub quoted_seconds: Option<f64>,
    /// Computed time rounded to the quoted label's resolution.
    pub displayed_seconds: f64,
}

impl LeakTimeRow {
    pub fn relative_error(&self) -> Option<f64> {
        self.quoted_seconds
            .map(|q| (self.displayed_seconds - q) / q)
    }

    pub fn raw_relative_error(&self) -> Option<f64> {
        self.quoted_seconds.map(|q| (self.leak_seconds - q) / q)
    }

    pub const CSV_HEADER: &'static str = "model,precision_bytes,memory_bytes,frames,throughput_bps,\
leak_seconds,leak_time,repetitions,total_seconds,quoted_seconds,rel_error";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.2},{:.3},{},{},{:.3},{},{}",
            self.model,
            self.precision_bytes,
            self.memory_bytes,
            self.frames,
            self.throughput,
            self.leak_seconds,
            format_duration(self.leak_seconds),
            self.repetitions,
            self.total_seconds,
            self.quoted_seconds.map(|q| q.to_string()).unwrap_or_default(),
            self.relative_error()
                .map(|e| format!("{e:.5}"))
                .unwrap_or_default(),
        )
    }
}

pub fn case_study_row(c: &CaseStudy, bytes_per_second: f64, repetitions: u32) -> Result<LeakTimeRow> {
    let budget = LeakageBudget::from_bytes(c.memory_bytes, c.precision_bytes)?;
    let leak_seconds = leak_time_at_rate(&budget, bytes_per_second)?;
    let res = c.display_resolution_s();
    Ok(LeakTimeRow {
        model: c.model.to_string(),
        precision_bytes: c.precision_bytes,
        memory_bytes: c.memory_bytes,
        frames: frames_required(&budget)?,
        throughput: bytes_per_second,
        leak_seconds,
        repetitions,
        total_seconds: repetitions as f64 * leak_seconds,
        quoted_seconds: Some(c.quoted_seconds),
        displayed_seconds: (leak_seconds / res).round() * res,
    })
}

/// All case-study rows at one covert rate.
pub fn case_study_table(bytes_per_second: f64, repetitions: u32) -> Result<Vec<LeakTimeRow>> {
    CASE_STUDIES
        .iter()
        .map(|c| case_study_row(c, bytes_per_second, repetitions))
        .collect()
}

/// Fixed-width text rendering of a leak-time table.
pub fn render_table(rows: &[LeakTimeRow]) -> String {
    let mut s = format!(
        "{:<24} {:>4} {:>12} {:>12} {:>9} {:>10} {:>3} {:>10}\n",
        "model", "p", "bytes", "frames", "T (B/s)", "T_leak", "r", "r*T_leak"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<24} {:>4} {:>12} {:>12} {:>9.1} {:>10} {:>3} {:>10}\n",
            r.model,
            r.precision_bytes,
            r.memory_bytes,
            r.frames,
            r.throughput,
            format_duration(r.leak_seconds),
            r.repetitions,
            format_duration(r.total_seconds),
        ));
    }
    s
}
