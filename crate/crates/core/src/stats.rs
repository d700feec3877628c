//! Error-count statistics.

/// 97.5th percentile of the standard normal.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    // Clamp so the interval always contains the point estimate despite rounding.
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Bit error counts with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerReport {
    pub bits_compared: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerReport {
    pub fn from_counts(bits_compared: u64, bit_errors: u64) -> Self {
        let ber = if bits_compared == 0 {
            0.0
        } else {
            bit_errors as f64 / bits_compared as f64
        };
        let (ci_low, ci_high) = wilson_interval(bit_errors, bits_compared, Z_95);
        Self {
            bits_compared,
            bit_errors,
            ber,
            ci_low,
            ci_high,
        }
    }

    pub fn overlaps(&self, other: &BerReport) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }

    /// True when this interval lies entirely above `other`'s.
    pub fn significantly_above(&self, other: &BerReport) -> bool {
        self.ci_low > other.ci_high
    }

    pub fn merge(&self, other: &BerReport) -> Self {
        Self::from_counts(
            self.bits_compared + other.bits_compared,
            self.bit_errors + other.bit_errors,
        )
    }
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
