//! Fully connected decoders `G̃(z) = φ_d(W_d ⋯ φ_1(W_1 z + b_1) ⋯ + b_d)`.
//!
//! # Weight files
//!
//! A model is stored as a JSON manifest. In the binary variant the manifest
//! lists the shape of each layer and names a payload file (resolved relative
//! to the manifest):
//!
//! ```json
//! {
//!   "latent_radius": 1.0,
//!   "layers": [
//!     { "inputs": 4, "outputs": 16, "activation": "tanh" },
//!     { "inputs": 16, "outputs": 64, "activation": "sigmoid" }
//!   ],
//!   "payload": "decoder.bin"
//! }
//! ```
//!
//! The payload is the concatenation, layer by layer, of the weight matrix
//! (`outputs × inputs`, row-major) followed by the offset vector, every value
//! a little-endian IEEE-754 binary64. No header, no padding.
//!
//! The pure-JSON variant used for small fixtures omits `payload` and
//! `inputs`/`outputs`, and gives each layer `"weights": [[…], …]` (one inner
//! array per output unit) and `"bias": […]` inline.
//!
//! Activation names are `relu`, `sigmoid`, `tanh` and `identity`.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{check_latent, GenerativeModel};
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative at pre-activation `pre` with output `out`. The relu
    /// derivative at 0 is taken as 0.
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        ensure_len("layer bias", bias.len(), weights.nrows())?;
        if weights.is_empty() {
            return Err(Error::invalid("layer weights must be non-empty"));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardModel {
    layers: Vec<Layer>,
    radius: f64,
}

impl FeedForwardModel {
    pub fn new(layers: Vec<Layer>, radius: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "latent radius must be positive, got {radius}"
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::invalid(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i + 1,
                    pair[0].outputs(),
                    i + 2,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers, radius })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Largest of the widths `n_0, …, n_d`.
    pub fn max_width(&self) -> usize {
        self.layers
            .iter()
            .map(Layer::outputs)
            .chain(std::iter::once(self.layers[0].inputs()))
            .max()
            .unwrap()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .fold(0.0, |acc, w| acc.max(w.abs()))
    }

    /// `(w·W_max)^d` with `w` the maximum width and `W_max` the largest
    /// absolute weight.
    pub fn lipschitz_product_bound(&self) -> f64 {
        (self.max_width() as f64 * self.max_abs_weight()).powi(self.depth() as i32)
    }

    /// Forward pass keeping every layer's pre-activation and output.
    fn trace(&self, z: &Array1<f64>) -> Result<Vec<(Array1<f64>, Array1<f64>)>> {
        check_latent(z, self.latent_dim(), self.radius)?;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut h = z.clone();
        for layer in &self.layers {
            let pre = layer.weights.dot(&h) + &layer.bias;
            h = pre.mapv(|v| layer.activation.apply(v));
            acts.push((pre, h.clone()));
        }
        Ok(acts)
    }

    /// Pre-activations of every layer at `z`, for callers that need to stay
    /// away from relu kinks.
    pub fn pre_activations(&self, z: &Array1<f64>) -> Result<Vec<Array1<f64>>> {
        Ok(self.trace(z)?.into_iter().map(|(pre, _)| pre).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let payload = match &manifest.payload {
            Some(name) => Some(fs::read(
                path.parent().unwrap_or(Path::new(".")).join(name),
            )?),
            None => None,
        };
        manifest.into_model(payload.as_deref())
    }

    /// Parses the pure-JSON variant from a string.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let manifest: Manifest =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if manifest.payload.is_some() {
            return Err(Error::Format(
                "manifest references a payload file; use FeedForwardModel::load".into(),
            ));
        }
        manifest.into_model(None)
    }

    pub fn to_json_string(&self) -> String {
        let manifest = Manifest {
            latent_radius: self.radius,
            payload: None,
            layers: self
                .layers
                .iter()
                .map(|l| LayerEntry {
                    inputs: None,
                    outputs: None,
                    activation: l.activation,
                    weights: Some(l.weights.outer_iter().map(|row| row.to_vec()).collect()),
                    bias: Some(l.bias.to_vec()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&manifest).expect("manifest serializes")
    }

    /// Writes the binary variant: `manifest_path` plus a payload file named
    /// `payload_name` next to it.
    pub fn save_binary(&self, manifest_path: impl AsRef<Path>, payload_name: &str) -> Result<()> {
        let manifest_path = manifest_path.as_ref();
        let manifest = Manifest {
            latent_radius: self.radius,
            payload: Some(payload_name.to_string()),
            layers: self
                .layers
                .iter()
                .map(|l| LayerEntry {
                    inputs: Some(l.inputs()),
                    outputs: Some(l.outputs()),
                    activation: l.activation,
                    weights: None,
                    bias: None,
                })
                .collect(),
        };
        let mut payload = Vec::new();
        for layer in &self.layers {
            for v in layer.weights.iter().chain(layer.bias.iter()) {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        fs::write(dir.join(payload_name), payload)?;
        fs::write(
            manifest_path,
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    latent_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<String>,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inputs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outputs: Option<usize>,
    activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
}

impl Manifest {
    fn into_model(self, payload: Option<&[u8]>) -> Result<FeedForwardModel> {
        let mut values = payload.map(|bytes| {
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        });
        if let Some(bytes) = payload {
            if bytes.len() % 8 != 0 {
                return Err(Error::Format(
                    "payload length is not a multiple of 8".into(),
                ));
            }
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, entry) in self.layers.into_iter().enumerate() {
            let layer = match (&mut values, entry.weights, entry.bias) {
                (Some(stream), None, None) => {
                    let (rows, cols) = entry.outputs.zip(entry.inputs).ok_or_else(|| {
                        Error::Format(format!("layer {i}: payload layers need inputs and outputs"))
                    })?;
                    let w: Vec<f64> = stream.by_ref().take(rows * cols).collect();
                    let b: Vec<f64> = stream.by_ref().take(rows).collect();
                    if w.len() != rows * cols || b.len() != rows {
                        return Err(Error::Format(format!("payload ends inside layer {i}")));
                    }
                    let weights = Array2::from_shape_vec((rows, cols), w)
                        .map_err(|e| Error::Format(e.to_string()))?;
                    Layer::new(weights, Array1::from(b), entry.activation)?
                }
                (None, Some(rows), Some(bias)) => {
                    let cols = rows.first().map_or(0, Vec::len);
                    if rows.iter().any(|r| r.len() != cols) {
                        return Err(Error::Format(format!("layer {i}: ragged weight rows")));
                    }
                    let nrows = rows.len();
                    let weights =
                        Array2::from_shape_vec((nrows, cols), rows.into_iter().flatten().collect())
                            .map_err(|e| Error::Format(e.to_string()))?;
                    if entry.inputs.is_some_and(|c| c != cols)
                        || entry.outputs.is_some_and(|r| r != nrows)
                    {
                        return Err(Error::Format(format!(
                            "layer {i}: declared shape disagrees with inline weights"
                        )));
                    }
                    Layer::new(weights, Array1::from(bias), entry.activation)?
                }
                _ => {
                    return Err(Error::Format(format!(
                        "layer {i}: give either inline weights and bias, or a payload file"
                    )))
                }
            };
            layers.push(layer);
        }
        if let Some(mut stream) = values {
            if stream.next().is_some() {
                return Err(Error::Format("payload has trailing values".into()));
            }
        }
        FeedForwardModel::new(layers, self.latent_radius)
    }
}

impl GenerativeModel for FeedForwardModel {
    fn latent_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    fn ambient_dim(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    fn latent_radius(&self) -> f64 {
        self.radius
    }

    fn forward(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        Ok(self.trace(z)?.pop().unwrap().1)
    }

    fn vjp(&self, z: &Array1<f64>, u: &Array1<f64>) -> Result<Array1<f64>> {
        ensure_len("cotangent", u.len(), self.ambient_dim())?;
        let acts = self.trace(z)?;
        let mut delta = u.clone();
        for (layer, (pre, out)) in self.layers.iter().zip(&acts).rev() {
            ndarray::Zip::from(&mut delta)
                .and(pre)
                .and(out)
                .for_each(|d, &p, &o| *d *= layer.activation.derivative(p, o));
            delta = layer.weights.t().dot(&delta);
        }
        Ok(delta)
    }

    fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_product_bound()
    }

    fn is_normalized(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        let dims: Vec<String> = std::iter::once(self.latent_dim())
            .chain(self.layers.iter().map(Layer::outputs))
            .map(|d| d.to_string())
            .collect();
        format!("ffnet({})", dims.join("-"))
    }
}
