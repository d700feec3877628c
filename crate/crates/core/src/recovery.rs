//! Majority voting over repeated leaks and the binomial model behind it.

use crate::error::{Error, Result};
use crate::victim::ModelDescriptor;

/// Bitwise vote tallies over `r` received copies of the same byte stream.
///
/// Missing bytes (erasures) abstain. With all copies present the rule is a plain
/// majority over an odd `r`; when erasures leave an even number of voters and the
/// count ties, the lowest-index present copy decides.
#[derive(Debug, Clone)]
pub struct VotingBuffer {
    copies: Vec<Vec<Option<u8>>>,
}

impl VotingBuffer {
    /// Complete copies. `r` must be odd and all copies the same length.
    pub fn new(copies: Vec<Vec<u8>>) -> Result<Self> {
        Self::with_erasures(
            copies
                .into_iter()
                .map(|c| c.into_iter().map(Some).collect())
                .collect(),
        )
    }

    pub fn with_erasures(copies: Vec<Vec<Option<u8>>>) -> Result<Self> {
        if copies.is_empty() || copies.len() % 2 == 0 {
            return Err(Error::Structure(format!(
                "voting needs an odd number of copies, got {}",
                copies.len()
            )));
        }
        let len = copies[0].len();
        if let Some(bad) = copies.iter().position(|c| c.len() != len) {
            return Err(Error::Structure(format!(
                "copy {bad} has {} bytes, expected {len}",
                copies[bad].len()
            )));
        }
        Ok(Self { copies })
    }

    pub fn repetitions(&self) -> usize {
        self.copies.len()
    }

    pub fn len(&self) -> usize {
        self.copies[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of present copies voting 1 at (byte, bit) with bit 7 = MSB.
    pub fn ones_count(&self, byte: usize, bit: u32) -> usize {
        self.copies
            .iter()
            .filter_map(|c| c[byte])
            .filter(|b| (b >> bit) & 1 == 1)
            .count()
    }

    /// Byte positions erased in every copy.
    pub fn unresolved(&self) -> usize {
        (0..self.len())
            .filter(|&i| self.copies.iter().all(|c| c[i].is_none()))
            .count()
    }

    pub fn majority_vote(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.vote_byte(i)).collect()
    }

    fn vote_byte(&self, i: usize) -> u8 {
        let present: Vec<u8> = self.copies.iter().filter_map(|c| c[i]).collect();
        let Some(&first) = present.first() else {
            return 0;
        };
        let voters = present.len();
        let mut out = 0u8;
        for bit in 0..8 {
            let ones = present.iter().filter(|b| (*b >> bit) & 1 == 1).count();
            let one = if 2 * ones == voters {
                (first >> bit) & 1 == 1
            } else {
                2 * ones > voters
            };
            if one {
                out |= 1 << bit;
            }
        }
        out
    }
}

pub fn majority_vote(buffer: &VotingBuffer) -> Vec<u8> {
    buffer.majority_vote()
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Probability that a majority of `r` independent copies are wrong when each bit is
/// flipped with probability `q`: the upper binomial tail from ceil(r/2).
pub fn post_vote_ber(q: f64, r: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Parameter(format!("q must lie in [0, 1], got {q}")));
    }
    if r % 2 == 0 {
        return Err(Error::Parameter(format!("r must be odd, got {r}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(1.0);
    }
    let r = r as u64;
    let (lq, lp) = (q.ln(), (1.0 - q).ln());
    let terms: Vec<f64> = (r.div_ceil(2)..=r)
        .map(|k| ln_choose(r, k) + k as f64 * lq + (r - k) as f64 * lp)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    Ok((max + sum.ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepetitionPlan {
    pub per_copy_ber: f64,
    pub target_ber: f64,
    pub repetitions: u32,
    pub predicted_ber: f64,
}

impl RepetitionPlan {
    /// Total leak time for `r` passes given the single-pass time.
    pub fn total_leak_time(&self, single_pass_s: f64) -> f64 {
        self.repetitions as f64 * single_pass_s
    }
}

const MAX_REPETITIONS: u32 = 10_001;

/// Smallest odd r whose post-vote BER meets `target_ber`.
pub fn plan_repetitions(q: f64, target_ber: f64) -> Result<RepetitionPlan> {
    if !(q >= 0.0) || q >= 0.5 {
        return Err(Error::Infeasible(q));
    }
    if !(target_ber > 0.0) {
        return Err(Error::Parameter(format!(
            "target BER must be positive, got {target_ber}"
        )));
    }
    let mut r = 1;
    loop {
        let predicted = post_vote_ber(q, r)?;
        if predicted <= target_ber {
            return Ok(RepetitionPlan {
                per_copy_ber: q,
                target_ber,
                repetitions: r,
                predicted_ber: predicted,
            });
        }
        r += 2;
        if r > MAX_REPETITIONS {
            return Err(Error::Infeasible(q));
        }
    }
}

/// One named tensor recovered from the voted stream.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBytes {
    pub name: String,
    pub shape: Vec<usize>,
    pub bytes: Vec<u8>,
}

/// Splits a voted stream into per-layer buffers according to the known architecture.
pub fn reconstruct_weights(voted: &[u8], descriptor: &ModelDescriptor) -> Result<Vec<LayerBytes>> {
    if voted.len() != descriptor.total_bytes() {
        return Err(Error::Reconstruction(format!(
            "stream has {} bytes, model needs {}",
            voted.len(),
            descriptor.total_bytes()
        )));
    }
    Ok(descriptor
        .entries()
        .iter()
        .map(|e| LayerBytes {
            name: e.name.clone(),
            shape: e.shape.clone(),
            bytes: voted[e.offset..e.offset + e.byte_len()].to_vec(),
        })
        .collect())
}

/// Residual errors of a voted stream against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionReport {
    pub bytes: usize,
    pub byte_mismatches: usize,
    pub bit_errors: u64,
    pub residual_ber: f64,
}

impl ReconstructionReport {
    pub fn compare(voted: &[u8], truth: &[u8]) -> Result<Self> {
        if voted.len() != truth.len() {
            return Err(Error::Comparison(format!(
                "voted stream has {} bytes, ground truth {}",
                voted.len(),
                truth.len()
            )));
        }
        let bit_errors = crate::bits::count_bit_errors(voted, truth);
        Ok(Self {
            bytes: voted.len(),
            byte_mismatches: voted.iter().zip(truth).filter(|(a, b)| a != b).count(),
            bit_errors,
            residual_ber: if voted.is_empty() {
                0.0
            } else {
                bit_errors as f64 / (voted.len() * 8) as f64
            },
        })
    }

    pub fn csv_header() -> &'static str {
        "bytes,byte_mismatches,bit_errors,residual_ber"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e}",
            self.bytes, self.byte_mismatches, self.bit_errors, self.residual_ber
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct binomial sum in linear space, independent of the log-space path.
    fn binomial_tail(q: f64, r: u64) -> f64 {
        let mut total = 0.0;
        for k in r.div_ceil(2)..=r {
            let mut c = 1.0;
            for i in 0..k {
                c = c * (r - i) as f64 / (i + 1) as f64;
            }
            total += c * q.powi(k as i32) * (1.0 - q).powi((r - k) as i32);
        }
        total
    }

    #[test]
    fn table_iv_example() {
        let buf = VotingBuffer::new(vec![vec![160], vec![163], vec![160]]).unwrap();
        assert_eq!(buf.ones_count(0, 7), 3);
        assert_eq!(buf.ones_count(0, 1), 1);
        assert_eq!(buf.majority_vote(), vec![160]);
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            VotingBuffer::new(vec![vec![1], vec![2]]),
            Err(Error::Structure(_))
        ));
        assert!(matches!(
            VotingBuffer::new(vec![vec![1], vec![2, 3], vec![4]]),
            Err(Error::Structure(_))
        ));
        assert!(VotingBuffer::new(vec![]).is_err());
    }

    #[test]
    fn erasures_abstain_with_lowest_index_tiebreak() {
        let buf = VotingBuffer::with_erasures(vec![
            vec![Some(0b1010_0000), None, None],
            vec![Some(0b0000_0000), Some(0xFF), None],
            vec![None, Some(0x0F), None],
        ])
        .unwrap();
        let v = buf.majority_vote();
        // Two voters that tie on bits 7 and 5: copy 0 decides.
        assert_eq!(v[0], 0b1010_0000);
        assert_eq!(v[1], 0xFF);
        assert_eq!(v[2], 0);
        assert_eq!(buf.unresolved(), 1);
    }

    #[test]
    fn analytic_values() {
        assert_eq!(post_vote_ber(0.0, 5).unwrap(), 0.0);
        let r3 = post_vote_ber(7e-4, 3).unwrap();
        assert!((r3 - binomial_tail(7e-4, 3)).abs() < 1e-18);
        assert!((r3 - 1.469e-6).abs() < 1e-9);
        assert!(r3 < 1e-5);
        let r9 = post_vote_ber(7e-4, 9).unwrap();
        assert!((r9 / binomial_tail(7e-4, 9) - 1.0).abs() < 1e-9);
        assert!(r9 < 1e-8 && r9 > 1e-14);
        assert_eq!(post_vote_ber(0.3, 1).unwrap(), 0.3);
        assert!(post_vote_ber(0.1, 4).is_err());
    }

    #[test]
    fn planner() {
        assert_eq!(plan_repetitions(7e-4, 1e-5).unwrap().repetitions, 3);
        let p = plan_repetitions(7e-4, 1e-8).unwrap();
        assert_eq!(p.repetitions, 5);
        assert!(p.predicted_ber <= 1e-8);
        assert_eq!(plan_repetitions(1e-9, 1e-8).unwrap().repetitions, 1);
        assert!(matches!(plan_repetitions(0.5, 1e-3), Err(Error::Infeasible(_))));
        assert!((p.total_leak_time(79.0) - 395.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_length_checks() {
        let d = crate::victim::ModelDescriptor::tiny_mlp_f32();
        let stream: Vec<u8> = (0..d.total_bytes()).map(|i| i as u8).collect();
        let layers = reconstruct_weights(&stream, &d).unwrap();
        assert_eq!(layers.len(), 6);
        assert_eq!(layers[0].shape, vec![16, 2]);
        assert_eq!(layers[0].bytes.len(), 16 * 2 * 4);
        let rebuilt: Vec<u8> = layers.iter().flat_map(|l| l.bytes.clone()).collect();
        assert_eq!(rebuilt, stream);
        assert!(matches!(
            reconstruct_weights(&stream[1..], &d),
            Err(Error::Reconstruction(_))
        ));
    }

    #[test]
    fn report() {
        let r = ReconstructionReport::compare(&[160, 0], &[163, 0]).unwrap();
        assert_eq!(r.byte_mismatches, 1);
        assert_eq!(r.bit_errors, 2);
        assert!((r.residual_ber - 2.0 / 16.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn unanimous_vote_is_identity(bytes in proptest::collection::vec(any::<u8>(), 1..50), r in 0usize..4) {
            let r = 2 * r + 1;
            let buf = VotingBuffer::new(vec![bytes.clone(); r]).unwrap();
            prop_assert_eq!(buf.majority_vote(), bytes);
        }

        #[test]
        fn vote_is_permutation_symmetric(
            a in proptest::collection::vec(any::<u8>(), 20),
            b in proptest::collection::vec(any::<u8>(), 20),
            c in proptest::collection::vec(any::<u8>(), 20),
        ) {
            let v1 = VotingBuffer::new(vec![a.clone(), b.clone(), c.clone()]).unwrap().majority_vote();
            let v2 = VotingBuffer::new(vec![c, a, b]).unwrap().majority_vote();
            prop_assert_eq!(v1, v2);
        }

        #[test]
        fn post_vote_monotone(q in 1e-6f64..0.49, r in 0u32..10) {
            let r = 2 * r + 1;
            let here = post_vote_ber(q, r).unwrap();
            prop_assert!(post_vote_ber(q, r + 2).unwrap() < here);
            prop_assert!(post_vote_ber((q * 1.01).min(0.499), r).unwrap() > here);
            let direct = binomial_tail(q, r as u64);
            prop_assert!((here - direct).abs() <= 1e-9 * direct);
        }
    }
}
