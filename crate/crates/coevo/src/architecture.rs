//! Bitstring encoding of candidate architectures and the topological
//! complexity objective.
//!
//! A genome is a fixed-length bit vector over the joint search space of
//! feature subsets and hidden-layer topologies: one bit per input feature,
//! then per hidden layer a size field plus one activation bit. Under the
//! default layout (68 features, 2 layers, 8 size bits) the genome is 86
//! bits long.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the genome: feature-mask width plus per-layer fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenomeLayout {
    pub n_features: usize,
    pub n_layers: usize,
    pub size_bits: usize,
    pub max_layer_size: usize,
}

impl Default for GenomeLayout {
    fn default() -> Self {
        GenomeLayout {
            n_features: 68,
            n_layers: 2,
            size_bits: 8,
            max_layer_size: 128,
        }
    }
}

impl GenomeLayout {
    /// Total genome length in bits.
    pub fn genome_len(&self) -> usize {
        self.n_features + self.n_layers * (self.size_bits + 1)
    }

    fn layer_offset(&self, k: usize) -> usize {
        self.n_features + k * (self.size_bits + 1)
    }
}

/// Hidden-layer activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tansig,
    Logsig,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tansig => z.tanh(),
            Activation::Logsig => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation value itself.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tansig => 1.0 - a * a,
            Activation::Logsig => a * (1.0 - a),
        }
    }
}

/// One hidden-layer tuple (size, activation). Size 0 means the layer is
/// skipped in forward passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub size: usize,
    pub activation: Activation,
}

/// Which reading of the complexity formula to use.
///
/// `Literal` evaluates the printed formula, whose maximum is 4/3 when every
/// layer is at full size. `Normalized` divides the size term by the layer
/// count so the measure is bounded by 1. Both are provided; `Literal` is the
/// default because it matches the reported architecture complexities more
/// closely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityMode {
    #[default]
    Literal,
    Normalized,
}

/// Fixed-length bit vector over the joint feature/topology search space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome {
    bits: Vec<bool>,
}

impl Genome {
    pub fn new(bits: Vec<bool>) -> Self {
        Genome { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set_bit(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    /// Pack bits into bytes, MSB-first, zero-padded to a byte boundary.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        bytes
    }

    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        let expected_bytes = len.div_ceil(8);
        if hex.len() != expected_bytes * 2 {
            return Err(Error::Encoding(format!(
                "genome hex has {} chars, expected {}",
                hex.len(),
                expected_bytes * 2
            )));
        }
        let mut bytes = Vec::with_capacity(expected_bytes);
        for i in 0..expected_bytes {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::Encoding(format!("bad genome hex: {e}")))?;
            bytes.push(byte);
        }
        let mut bits = Vec::with_capacity(len);
        for i in 0..len {
            bits.push(bytes[i / 8] & (0x80 >> (i % 8)) != 0);
        }
        // padding bits must be zero
        for i in len..expected_bytes * 8 {
            if bytes[i / 8] & (0x80 >> (i % 8)) != 0 {
                return Err(Error::Encoding("nonzero padding bits in genome hex".into()));
            }
        }
        Ok(Genome { bits })
    }

    /// FNV-1a over the packed bytes. Stable across runs and platforms, so it
    /// is safe to persist values derived from it.
    pub fn fnv_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in self.to_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Decoded (feature subset, layer tuples) form of a genome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedArchitecture {
    pub selected_features: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub layout: GenomeLayout,
}

impl DecodedArchitecture {
    pub fn n_selected(&self) -> usize {
        self.selected_features.len()
    }

    /// Hidden layers with nonzero size, in order.
    pub fn active_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().filter(|l| l.size > 0)
    }

    pub fn n_active_layers(&self) -> usize {
        self.active_layers().count()
    }

    /// Topological-resource complexity of the architecture.
    pub fn complexity(&self, mode: ComplexityMode) -> f64 {
        let nf = self.layout.n_features as f64;
        let nl = self.layout.n_layers as f64;
        let smax = self.layout.max_layer_size as f64;
        let feature_term = self.n_selected() as f64 / nf;
        let layer_term = self.n_active_layers() as f64 / nl;
        let size_sum: f64 = self.layers.iter().map(|l| l.size as f64 / smax).sum();
        let size_term = match mode {
            ComplexityMode::Literal => size_sum,
            ComplexityMode::Normalized => size_sum / nl,
        };
        (feature_term + layer_term + size_term) / 3.0
    }
}

/// Decode a genome into a repaired, always-valid architecture.
///
/// Repair keeps the search space closed: a genome with an empty feature mask
/// gets a single deterministic feature (index = hash mod n_features), and a
/// genome with all-zero layer sizes gets a single unit in the first layer.
pub fn decode(genome: &Genome, layout: &GenomeLayout) -> Result<DecodedArchitecture> {
    if genome.len() != layout.genome_len() {
        return Err(Error::Encoding(format!(
            "genome length {} does not match layout length {}",
            genome.len(),
            layout.genome_len()
        )));
    }
    let mut selected_features: Vec<usize> = (0..layout.n_features)
        .filter(|&i| genome.bit(i))
        .collect();
    let mut layers = Vec::with_capacity(layout.n_layers);
    for k in 0..layout.n_layers {
        let off = layout.layer_offset(k);
        let mut raw = 0usize;
        for b in 0..layout.size_bits {
            raw = (raw << 1) | genome.bit(off + b) as usize;
        }
        let size = raw.min(layout.max_layer_size);
        let activation = if genome.bit(off + layout.size_bits) {
            Activation::Logsig
        } else {
            Activation::Tansig
        };
        layers.push(LayerSpec { size, activation });
    }
    if selected_features.is_empty() {
        selected_features.push((genome.fnv_hash() % layout.n_features as u64) as usize);
    }
    if layers.iter().all(|l| l.size == 0) {
        layers[0].size = 1;
    }
    Ok(DecodedArchitecture {
        selected_features,
        layers,
        layout: *layout,
    })
}

/// Encode an architecture back into a genome. Inverse of `decode` on the
/// canonical range (sizes within bounds, no repair involved).
pub fn encode(arch: &DecodedArchitecture) -> Result<Genome> {
    let layout = &arch.layout;
    if arch.layers.len() != layout.n_layers {
        return Err(Error::Encoding(format!(
            "architecture has {} layers, layout expects {}",
            arch.layers.len(),
            layout.n_layers
        )));
    }
    let mut bits = vec![false; layout.genome_len()];
    for &f in &arch.selected_features {
        if f >= layout.n_features {
            return Err(Error::Range(format!("feature index {f} out of range")));
        }
        bits[f] = true;
    }
    for (k, layer) in arch.layers.iter().enumerate() {
        if layer.size > layout.max_layer_size {
            return Err(Error::Range(format!(
                "layer size {} exceeds maximum {}",
                layer.size, layout.max_layer_size
            )));
        }
        let off = layout.layer_offset(k);
        for b in 0..layout.size_bits {
            bits[off + b] = layer.size & (1 << (layout.size_bits - 1 - b)) != 0;
        }
        bits[off + layout.size_bits] = layer.activation == Activation::Logsig;
    }
    Ok(Genome::new(bits))
}

/// Draw each bit uniformly at random.
pub fn random_genome<R: Rng>(layout: &GenomeLayout, rng: &mut R) -> Genome {
    Genome::new((0..layout.genome_len()).map(|_| rng.gen::<bool>()).collect())
}

/// Flip each bit independently with probability `rate`.
pub fn mutate<R: Rng>(genome: &Genome, rate: f64, rng: &mut R) -> Genome {
    let bits = genome
        .bits()
        .iter()
        .map(|&b| if rng.gen::<f64>() < rate { !b } else { b })
        .collect();
    Genome::new(bits)
}
