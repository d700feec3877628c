//! Stand-in victim network: a tiny MLP in float32 and int8 forms, its byte-level
//! serialization, bit-flip injection and accuracy evaluation.

pub mod dataset;
pub mod mlp;
pub mod quant;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use dataset::SyntheticDataset;
pub use mlp::{train_on, train_tiny_mlp, Dense, TinyMlp, LAYER_DIMS};
pub use quant::{dequantize, quantize, QuantLayer, QuantizedMlp};

/// Seed of the committed model fixture.
pub const FIXTURE_SEED: u64 = 42;

/// Anything that maps a 2-D point to a class; `None` means a non-finite activation.
pub trait Classifier {
    fn predict(&self, x: [f32; 2]) -> Option<usize>;
}

/// Fraction of correctly classified points. Non-finite outputs count as wrong.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, points: &[([f32; 2], usize)]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let correct = points
        .iter()
        .filter(|(x, label)| model.predict(*x) == Some(*label))
        .count();
    correct as f64 / points.len() as f64
}

/// One tensor in the serialized stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    /// Bytes per element.
    pub width: usize,
}

impl DescriptorEntry {
    pub fn elements(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn byte_len(&self) -> usize {
        self.elements() * self.width
    }
}

/// Ordered layout of a weight stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDescriptor {
    entries: Vec<DescriptorEntry>,
}

impl ModelDescriptor {
    /// Checks that offsets are contiguous from zero and widths are sane.
    pub fn new(entries: Vec<DescriptorEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Format("descriptor has no entries".into()));
        }
        let mut next = 0;
        for e in &entries {
            if e.width == 0 || e.shape.is_empty() || e.elements() == 0 {
                return Err(Error::Format(format!("entry {} is empty", e.name)));
            }
            if e.offset != next {
                return Err(Error::Format(format!(
                    "entry {} starts at {} but previous entry ends at {next}",
                    e.name, e.offset
                )));
            }
            next += e.byte_len();
        }
        Ok(Self { entries })
    }

    fn tiny_mlp(width: usize) -> Self {
        let mut entries = Vec::new();
        let mut offset = 0;
        for (i, d) in LAYER_DIMS.windows(2).enumerate() {
            for (suffix, shape) in [("weight", vec![d[1], d[0]]), ("bias", vec![d[1]])] {
                let e = DescriptorEntry {
                    name: format!("fc{}.{suffix}", i + 1),
                    shape,
                    offset,
                    width,
                };
                offset += e.byte_len();
                entries.push(e);
            }
        }
        Self { entries }
    }

    pub fn tiny_mlp_f32() -> Self {
        Self::tiny_mlp(4)
    }

    pub fn tiny_mlp_int8() -> Self {
        Self::tiny_mlp(1)
    }

    pub fn entries(&self) -> &[DescriptorEntry] {
        &self.entries
    }

    pub fn total_bytes(&self) -> usize {
        self.entries.iter().map(DescriptorEntry::byte_len).sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.entries.iter().map(DescriptorEntry::elements).sum()
    }

    /// Text form, one entry per line: `name dims offset width`, dims joined by `x`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# name dims offset width\n");
        for e in &self.entries {
            let dims: Vec<String> = e.shape.iter().map(usize::to_string).collect();
            s.push_str(&format!("{} {} {} {}\n", e.name, dims.join("x"), e.offset, e.width));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("descriptor line {}: {what}", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let shape = fields[1]
                .split('x')
                .map(|d| d.parse::<usize>().map_err(|_| bad("bad dimension")))
                .collect::<Result<Vec<_>>>()?;
            entries.push(DescriptorEntry {
                name: fields[0].to_string(),
                shape,
                offset: fields[2].parse().map_err(|_| bad("bad offset"))?,
                width: fields[3].parse().map_err(|_| bad("bad width"))?,
            });
        }
        Self::new(entries)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// True if entries line up with the tiny MLP tensors (any width).
    fn matches_tiny_mlp(&self) -> bool {
        let reference = Self::tiny_mlp(1);
        self.entries.len() == reference.entries.len()
            && self
                .entries
                .iter()
                .zip(&reference.entries)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }
}

/// Little-endian float32 stream, layer by layer, weights before biases.
pub fn serialize_weights(model: &TinyMlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(model.parameter_count() * 4);
    for layer in &model.layers {
        for v in layer.weights.iter().chain(&layer.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn deserialize_weights(bytes: &[u8], descriptor: &ModelDescriptor) -> Result<TinyMlp> {
    if !descriptor.matches_tiny_mlp() || descriptor.entries.iter().any(|e| e.width != 4) {
        return Err(Error::Format("descriptor does not describe a float32 tiny MLP".into()));
    }
    if bytes.len() != descriptor.total_bytes() {
        return Err(Error::Format(format!(
            "weight stream is {} bytes, descriptor expects {}",
            bytes.len(),
            descriptor.total_bytes()
        )));
    }
    let mut model = TinyMlp::zeros();
    let mut values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for layer in &mut model.layers {
        for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *v = values.next().expect("length checked");
        }
    }
    Ok(model)
}

/// Flips every bit independently with probability `ber`.
pub fn inject_bit_flips(bytes: &[u8], ber: f64, seed: u64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&ber) {
        return Err(Error::Parameter(format!("bit error rate {ber} outside [0, 1]")));
    }
    let mut out = bytes.to_vec();
    if ber == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for byte in &mut out {
        let mut mask = 0u8;
        for bit in 0..8 {
            if rng.random::<f64>() < ber {
                mask |= 1 << bit;
            }
        }
        *byte ^= mask;
    }
    Ok(out)
}

/// Model plus its serialized forms, as written to the fixture directory.
pub fn write_fixture(model: &TinyMlp, dir: &Path, stem: &str) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}.bin")), serialize_weights(model))?;
    ModelDescriptor::tiny_mlp_f32().write(&dir.join(format!("{stem}.desc")))
}

pub fn read_fixture(dir: &Path, stem: &str) -> Result<TinyMlp> {
    let desc = ModelDescriptor::read(&dir.join(format!("{stem}.desc")))?;
    let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
    deserialize_weights(&bytes, &desc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn descriptor_layout() {
        let d = ModelDescriptor::tiny_mlp_f32();
        assert_eq!(d.parameter_count(), 2 * 16 + 16 + 16 * 16 + 16 + 16 * 3 + 3);
        assert_eq!(d.total_bytes(), 1484);
        assert_eq!(ModelDescriptor::tiny_mlp_int8().total_bytes(), 371);
        let names: Vec<&str> = d.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(
            names,
            ["fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias", "fc3.weight", "fc3.bias"]
        );
        assert_eq!(d.entries()[2].offset, (32 + 16) * 4);
    }

    #[test]
    fn descriptor_text_roundtrip() {
        let d = ModelDescriptor::tiny_mlp_f32();
        assert_eq!(ModelDescriptor::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn descriptor_rejects_gaps() {
        let text = "a 2x2 0 4\nb 3 20 4\n";
        assert!(matches!(ModelDescriptor::parse(text), Err(Error::Format(_))));
        assert!(matches!(ModelDescriptor::parse("a 2x 0 4"), Err(Error::Format(_))));
        assert!(matches!(ModelDescriptor::parse(""), Err(Error::Format(_))));
    }

    #[test]
    fn serialization_roundtrip_is_bitwise() {
        let m = TinyMlp::random(3);
        let bytes = serialize_weights(&m);
        assert_eq!(bytes.len(), 1484);
        let back = deserialize_weights(&bytes, &ModelDescriptor::tiny_mlp_f32()).unwrap();
        assert_eq!(serialize_weights(&back), bytes);
        // First weight, little-endian.
        assert_eq!(&bytes[..4], &m.layers[0].weights[0].to_le_bytes());
    }

    #[test]
    fn deserialize_size_mismatch() {
        let d = ModelDescriptor::tiny_mlp_f32();
        assert!(matches!(deserialize_weights(&[0; 1419], &d), Err(Error::Format(_))));
        let d8 = ModelDescriptor::tiny_mlp_int8();
        assert!(matches!(deserialize_weights(&[0; 371], &d8), Err(Error::Format(_))));
    }

    #[test]
    fn flips_identity_and_complement() {
        let bytes: Vec<u8> = (0..=255).collect();
        assert_eq!(inject_bit_flips(&bytes, 0.0, 1).unwrap(), bytes);
        let all = inject_bit_flips(&bytes, 1.0, 1).unwrap();
        assert!(all.iter().zip(&bytes).all(|(a, b)| *a == !*b));
        assert!(inject_bit_flips(&bytes, 1.5, 1).is_err());
    }

    #[test]
    fn flip_count_is_binomial() {
        let bytes = vec![0u8; 125_000];
        let flipped = inject_bit_flips(&bytes, 1e-2, 77).unwrap();
        let k: u32 = flipped.iter().map(|b| b.count_ones()).sum();
        let n = 1e6;
        let sigma = (n * 1e-2 * (1.0 - 1e-2) as f64).sqrt();
        assert!((k as f64 - n * 1e-2).abs() < 3.0 * sigma, "{k} flips");
        assert_eq!(flipped, inject_bit_flips(&bytes, 1e-2, 77).unwrap());
    }

    #[test]
    fn random_model_is_near_chance() {
        let data = SyntheticDataset::standard();
        let accs: Vec<f64> = (0..30)
            .map(|s| evaluate(&TinyMlp::random(1000 + s), &data.test))
            .collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn non_finite_scores_as_wrong() {
        let mut m = TinyMlp::random(1);
        m.layers[2].biases[0] = f32::NAN;
        let data = SyntheticDataset::standard();
        assert_eq!(evaluate(&m, &data.test), 0.0);
    }

    #[test]
    fn training_reaches_baseline_and_is_reproducible() {
        let a = train_tiny_mlp(FIXTURE_SEED);
        let b = train_tiny_mlp(FIXTURE_SEED);
        assert_eq!(serialize_weights(&a), serialize_weights(&b));
        assert!(a.all_finite());
        let data = SyntheticDataset::standard();
        let acc = evaluate(&a, &data.test);
        assert!(acc >= 0.95, "baseline {acc}");
    }

    #[test]
    fn seeds_agree_on_accuracy() {
        let data = SyntheticDataset::standard();
        let accs: Vec<f64> = [1u64, 7, 42, 99]
            .iter()
            .map(|&s| evaluate(&train_tiny_mlp(s), &data.test))
            .collect();
        let lo = accs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = accs.iter().copied().fold(0.0, f64::max);
        assert!(hi - lo <= 0.03, "{accs:?}");
    }

    proptest! {
        #[test]
        fn flips_are_deterministic_and_involutive(
            bytes in proptest::collection::vec(any::<u8>(), 1..200),
            ber in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let once = inject_bit_flips(&bytes, ber, seed).unwrap();
            prop_assert_eq!(&once, &inject_bit_flips(&bytes, ber, seed).unwrap());
            // Same seed draws the same mask, so applying twice restores the input.
            prop_assert_eq!(inject_bit_flips(&once, ber, seed).unwrap(), bytes);
        }
    }
}
