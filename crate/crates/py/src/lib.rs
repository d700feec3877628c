//! Python bindings: transmitter, channel, both receivers, voting and the timing model.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use stsleak::channel::{apply_channel, ChannelConfig};
use stsleak::covert::{build_lookup_table_with, CovertConfig, StsLookupTable};
use stsleak::experiments::{decode_capture_eve, Precision, Victim};
use stsleak::leakage::{self, format_duration, LeakageBudget, MacTiming};
use stsleak::ofdm::{assemble_frame, PhyConfig};
use stsleak::recovery::{self, VotingBuffer};
use stsleak::rx_bob::{self, BobConfig, Reception};
use stsleak::rx_eve::{self, EveConfig, EveOutcome};
use stsleak::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Usage(_) | Error::Config(_) | Error::Infeasible(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// HT-infected transmitter: one leaked byte per frame, hidden in the STS.
#[pyclass(frozen)]
struct Transmitter {
    table: StsLookupTable,
    phy: PhyConfig,
}

#[pymethods]
impl Transmitter {
    /// `alpha = 0` gives an HT-free transmitter.
    #[new]
    fn new(alpha: f64) -> PyResult<Self> {
        let cfg = CovertConfig::new(alpha).map_err(py_err)?;
        Ok(Self {
            table: build_lookup_table_with(&cfg).map_err(py_err)?,
            phy: PhyConfig::default(),
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.table.alpha()
    }

    /// The 160-sample STS carrying `byte`.
    fn sts(&self, byte: u8) -> Vec<Complex64> {
        self.table.row(byte).repeated()
    }

    /// A complete frame: covert STS, LTS, SIGNAL and QPSK payload.
    fn frame(&self, byte: u8, payload_bits: Vec<bool>) -> PyResult<Vec<Complex64>> {
        let f = assemble_frame(self.table.row(byte), &payload_bits, &self.phy).map_err(py_err)?;
        Ok(f.samples())
    }
}

/// AWGN channel with carrier offset, phase and leading idle samples.
#[pyclass(frozen)]
struct Channel {
    cfg: ChannelConfig,
}

#[pymethods]
impl Channel {
    #[new]
    #[pyo3(signature = (snr_db = f64::INFINITY, cfo_hz = 0.0, phase_rad = 0.0, timing_offset = 0, seed = 0))]
    fn new(snr_db: f64, cfo_hz: f64, phase_rad: f64, timing_offset: usize, seed: u64) -> Self {
        Self {
            cfg: ChannelConfig {
                snr_db,
                cfo_hz,
                phase_rad,
                timing_offset,
                seed,
                ..ChannelConfig::ideal()
            },
        }
    }

    fn apply(&self, samples: Vec<Complex64>) -> Vec<Complex64> {
        apply_channel(&samples, &self.cfg)
    }
}

/// The eavesdropper.
#[pyclass(frozen)]
struct Eve {
    cfg: EveConfig,
}

#[pymethods]
impl Eve {
    #[new]
    fn new(alpha: f64) -> PyResult<Self> {
        let cfg = EveConfig::new(alpha);
        cfg.validate().map_err(py_err)?;
        Ok(Self { cfg })
    }

    /// Leaked byte of the first frame in `samples`, or None on an erasure.
    fn decode(&self, samples: Vec<Complex64>) -> Option<u8> {
        rx_eve::receive(&samples, 0, 0, &self.cfg).value()
    }

    /// Byte plus the eight signed threshold margins, MSB first.
    fn decode_with_margins(&self, samples: Vec<Complex64>) -> Option<(u8, Vec<f64>)> {
        match rx_eve::receive(&samples, 0, 0, &self.cfg) {
            EveOutcome::Byte(b, _) => Some((b.value, b.margins.to_vec())),
            EveOutcome::Erasure { .. } => None,
        }
    }

    /// Every frame of a multi-frame capture, in order.
    fn decode_capture(&self, samples: Vec<Complex64>) -> PyResult<Vec<Option<u8>>> {
        decode_capture_eve(&samples, self.cfg.alpha).map_err(py_err)
    }
}

/// The legitimate receiver.
#[pyclass(frozen)]
struct Bob {
    cfg: BobConfig,
}

#[pymethods]
impl Bob {
    #[new]
    fn new() -> Self {
        Self {
            cfg: BobConfig::default(),
        }
    }

    /// Payload bits, or None when the frame is missed.
    fn decode(&self, samples: Vec<Complex64>) -> PyResult<Option<Vec<bool>>> {
        match rx_bob::receive(&samples, 0, &self.cfg).map_err(py_err)? {
            Reception::Decoded(f) => Ok(Some(f.bits)),
            Reception::Missed(_) => Ok(None),
        }
    }

    /// Estimated carrier offset in Hz, or None when the frame is missed.
    fn cfo_hz(&self, samples: Vec<Complex64>) -> PyResult<Option<f64>> {
        match rx_bob::receive(&samples, 0, &self.cfg).map_err(py_err)? {
            Reception::Decoded(f) => Ok(Some(f.cfo_hz)),
            Reception::Missed(_) => Ok(None),
        }
    }
}

/// Bit-wise majority over equal-length copies.
#[pyfunction]
fn majority_vote<'py>(py: Python<'py>, copies: Vec<Vec<u8>>) -> PyResult<Bound<'py, PyBytes>> {
    let voted = VotingBuffer::new(copies).map_err(py_err)?.majority_vote();
    Ok(PyBytes::new(py, &voted))
}

#[pyfunction]
fn post_vote_ber(q: f64, r: u32) -> PyResult<f64> {
    recovery::post_vote_ber(q, r).map_err(py_err)
}

/// Smallest odd repetition count meeting `target_ber`, with its predicted BER.
#[pyfunction]
fn plan_repetitions(q: f64, target_ber: f64) -> PyResult<(u32, f64)> {
    let p = recovery::plan_repetitions(q, target_ber).map_err(py_err)?;
    Ok((p.repetitions, p.predicted_ber))
}

#[pyfunction]
fn inject_bit_flips<'py>(py: Python<'py>, data: &[u8], ber: f64, seed: u64) -> PyResult<Bound<'py, PyBytes>> {
    let out = stsleak::victim::inject_bit_flips(data, ber, seed).map_err(py_err)?;
    Ok(PyBytes::new(py, &out))
}

/// Seconds to leak `memory_bytes` at one byte per frame; default MAC timing unless
/// a rate in bytes per second is given.
#[pyfunction]
#[pyo3(signature = (memory_bytes, precision_bytes = 4, rate = None))]
fn leak_time(memory_bytes: u64, precision_bytes: u32, rate: Option<f64>) -> PyResult<f64> {
    let budget = LeakageBudget::from_bytes(memory_bytes, precision_bytes).map_err(py_err)?;
    match rate {
        Some(r) => leakage::leak_time_at_rate(&budget, r),
        None => leakage::leak_time(&budget, &MacTiming::default()),
    }
    .map_err(py_err)
}

/// Covert throughput in bytes per second under the default MAC timing.
#[pyfunction]
fn covert_throughput() -> f64 {
    leakage::throughput(&MacTiming::default(), 1)
}

/// Case-study rows as (model, bytes, frames, seconds, label).
#[pyfunction]
#[pyo3(signature = (rate = 3105.0))]
fn case_study_table(rate: f64) -> PyResult<Vec<(String, u64, u64, f64, String)>> {
    let rows = leakage::case_study_table(rate, 1).map_err(py_err)?;
    Ok(rows
        .into_iter()
        .map(|r| {
            let label = format_duration(r.leak_seconds);
            (r.model, r.memory_bytes, r.frames, r.leak_seconds, label)
        })
        .collect())
}

/// Serialized weights of the victim fixture: "f32" or "int8" (with scale records).
#[pyfunction]
#[pyo3(signature = (precision = "f32"))]
fn victim_stream<'py>(py: Python<'py>, precision: &str) -> PyResult<Bound<'py, PyBytes>> {
    let p = Precision::parse(precision).map_err(py_err)?;
    let v = Victim::fixture().map_err(py_err)?;
    Ok(PyBytes::new(py, &v.stream(p)))
}

/// Test accuracy of a model rebuilt from `stream`, and the baseline.
#[pyfunction]
#[pyo3(signature = (stream, precision = "f32"))]
fn stream_accuracy(stream: &[u8], precision: &str) -> PyResult<(f64, f64)> {
    let p = Precision::parse(precision).map_err(py_err)?;
    let v = Victim::fixture().map_err(py_err)?;
    Ok((v.accuracy_of_stream(p, stream).map_err(py_err)?, v.baseline(p)))
}

#[pyfunction]
fn read_cf32(path: std::path::PathBuf) -> PyResult<Vec<Complex64>> {
    stsleak::iq::read_cf32(&path).map_err(py_err)
}

#[pyfunction]
fn write_cf32(path: std::path::PathBuf, samples: Vec<Complex64>) -> PyResult<()> {
    stsleak::iq::write_cf32(&path, &samples).map_err(py_err)
}

#[pymodule]
fn pystsleak(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Transmitter>()?;
    m.add_class::<Channel>()?;
    m.add_class::<Eve>()?;
    m.add_class::<Bob>()?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(post_vote_ber, m)?)?;
    m.add_function(wrap_pyfunction!(plan_repetitions, m)?)?;
    m.add_function(wrap_pyfunction!(inject_bit_flips, m)?)?;
    m.add_function(wrap_pyfunction!(leak_time, m)?)?;
    m.add_function(wrap_pyfunction!(covert_throughput, m)?)?;
    m.add_function(wrap_pyfunction!(case_study_table, m)?)?;
    m.add_function(wrap_pyfunction!(victim_stream, m)?)?;
    m.add_function(wrap_pyfunction!(stream_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(read_cf32, m)?)?;
    m.add_function(wrap_pyfunction!(write_cf32, m)?)?;
    Ok(())
}
