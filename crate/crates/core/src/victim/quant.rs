//! Symmetric post-training int8 quantization with one scale per layer.

use super::mlp::{Dense, TinyMlp};
use super::{Classifier, ModelDescriptor};
use crate::error::{Error, Result};

pub const QMAX: f32 = 127.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<i8>,
    pub biases: Vec<i8>,
    /// Real value of one integer step; zero point is 0.
    pub scale: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMlp {
    pub layers: Vec<QuantLayer>,
}

fn quantize_layer(layer: &Dense) -> Result<QuantLayer> {
    let peak = layer
        .weights
        .iter()
        .chain(&layer.biases)
        .fold(0.0f32, |m, v| m.max(v.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::Scale(format!("layer peak magnitude {peak} cannot set a scale")));
    }
    let scale = peak / QMAX;
    let q = |v: &f32| (v / scale).round().clamp(-QMAX, QMAX) as i8;
    Ok(QuantLayer {
        inputs: layer.inputs,
        outputs: layer.outputs,
        weights: layer.weights.iter().map(q).collect(),
        biases: layer.biases.iter().map(q).collect(),
        scale,
    })
}

pub fn quantize(model: &TinyMlp) -> Result<QuantizedMlp> {
    Ok(QuantizedMlp {
        layers: model.layers.iter().map(quantize_layer).collect::<Result<_>>()?,
    })
}

pub fn dequantize(q: &QuantizedMlp) -> TinyMlp {
    TinyMlp {
        layers: q
            .layers
            .iter()
            .map(|l| Dense {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: l.weights.iter().map(|&w| w as f32 * l.scale).collect(),
                biases: l.biases.iter().map(|&b| b as f32 * l.scale).collect(),
            })
            .collect(),
    }
}

impl QuantizedMlp {
    /// The int8 stream: one byte per parameter, same order as the float stream.
    pub fn serialize(&self) -> Vec<u8> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).map(|&v| v as u8))
            .collect()
    }

    /// One little-endian float32 scale per layer.
    pub fn scale_records(&self) -> Vec<u8> {
        self.layers
            .iter()
            .flat_map(|l| l.scale.to_le_bytes())
            .collect()
    }

    pub fn deserialize(bytes: &[u8], scales: &[u8], descriptor: &ModelDescriptor) -> Result<Self> {
        if *descriptor != ModelDescriptor::tiny_mlp_int8() {
            return Err(Error::Format("descriptor does not describe an int8 tiny MLP".into()));
        }
        if bytes.len() != descriptor.total_bytes() {
            return Err(Error::Format(format!(
                "int8 stream is {} bytes, descriptor expects {}",
                bytes.len(),
                descriptor.total_bytes()
            )));
        }
        let template = TinyMlp::zeros();
        if scales.len() != template.layers.len() * 4 {
            return Err(Error::Format(format!(
                "expected {} scale bytes, got {}",
                template.layers.len() * 4,
                scales.len()
            )));
        }
        let mut values = bytes.iter().map(|&b| b as i8);
        let layers = template
            .layers
            .iter()
            .zip(scales.chunks_exact(4))
            .map(|(d, s)| QuantLayer {
                inputs: d.inputs,
                outputs: d.outputs,
                weights: values.by_ref().take(d.weights.len()).collect(),
                biases: values.by_ref().take(d.biases.len()).collect(),
                scale: f32::from_le_bytes([s[0], s[1], s[2], s[3]]),
            })
            .collect();
        Ok(Self { layers })
    }
}

impl Classifier for QuantizedMlp {
    fn predict(&self, x: [f32; 2]) -> Option<usize> {
        dequantize(self).predict(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::victim::{evaluate, train_tiny_mlp, SyntheticDataset, FIXTURE_SEED};
    use proptest::prelude::*;

    #[test]
    fn dequantization_error_bound() {
        let m = TinyMlp::random(11);
        let q = quantize(&m).unwrap();
        let d = dequantize(&q);
        for ((orig, deq), ql) in m.layers.iter().zip(&d.layers).zip(&q.layers) {
            let pairs = orig.weights.iter().zip(&deq.weights);
            for (a, b) in pairs.chain(orig.biases.iter().zip(&deq.biases)) {
                assert!((a - b).abs() <= ql.scale * 0.5 * (1.0 + 1e-5));
            }
        }
    }

    #[test]
    fn idempotent_on_grid() {
        let q = quantize(&TinyMlp::random(5)).unwrap();
        let again = quantize(&dequantize(&q)).unwrap();
        for (a, b) in q.layers.iter().zip(&again.layers) {
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.biases, b.biases);
            assert!((a.scale - b.scale).abs() <= a.scale * 1e-6);
        }
    }

    #[test]
    fn zero_layer_is_a_scale_error() {
        let m = TinyMlp::zeros();
        assert!(matches!(quantize(&m), Err(Error::Scale(_))));
    }

    #[test]
    fn serialization_sizes_and_roundtrip() {
        let q = quantize(&TinyMlp::random(2)).unwrap();
        let bytes = q.serialize();
        let scales = q.scale_records();
        assert_eq!(bytes.len(), 371);
        assert_eq!(scales.len(), 12);
        let back =
            QuantizedMlp::deserialize(&bytes, &scales, &ModelDescriptor::tiny_mlp_int8()).unwrap();
        assert_eq!(back, q);
        assert!(QuantizedMlp::deserialize(&bytes[1..], &scales, &ModelDescriptor::tiny_mlp_int8())
            .is_err());
    }

    #[test]
    fn fixture_accuracy_drop_small() {
        let data = SyntheticDataset::standard();
        let m = train_tiny_mlp(FIXTURE_SEED);
        let q = quantize(&m).unwrap();
        let drop = evaluate(&m, &data.test) - evaluate(&q, &data.test);
        assert!(drop <= 0.02, "drop {drop}");
    }

    proptest! {
        // A single flipped bit moves one weight by at most scale·2⁷ (sign bit of a
        // two's-complement byte is worth 128 steps).
        #[test]
        fn single_flip_is_bounded(seed in 0u64..50, pos in 0usize..371, bit in 0u32..8) {
            let q = quantize(&TinyMlp::random(seed)).unwrap();
            let mut bytes = q.serialize();
            bytes[pos] ^= 1 << bit;
            let flipped = QuantizedMlp::deserialize(
                &bytes, &q.scale_records(), &ModelDescriptor::tiny_mlp_int8()).unwrap();
            let a = dequantize(&q);
            let b = dequantize(&flipped);
            for ((la, lb), lq) in a.layers.iter().zip(&b.layers).zip(&q.layers) {
                let pairs = la.weights.iter().zip(&lb.weights).chain(la.biases.iter().zip(&lb.biases));
                for (x, y) in pairs {
                    prop_assert!((x - y).abs() <= lq.scale * 128.0 * (1.0 + 1e-6));
                }
            }
        }
    }
}
