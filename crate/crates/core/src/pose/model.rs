//! Dense modular network with an explicit layer → module partition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, LayerId, ModuleId, Parameter, Tape, Tensor, Var};
use crate::error::{MqatError, Result};
use crate::planner::ModuleSizes;
use crate::quant::{grad_scale, QuantKind, QuantizerState, MIN_STEP};

use super::dataset::PoseSample;

/// Output layout: unnormalized quaternion (4) then translation (3).
pub const OUTPUT_DIM: usize = 7;

/// Per-module hidden widths of the default three-module network.
///
/// The aggregator taps every backbone layer (skip connections) and the head
/// ends with an extra 7-wide output layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub backbone: Vec<usize>,
    pub aggregator: Vec<usize>,
    pub head: Vec<usize>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            backbone: vec![96, 96, 96],
            aggregator: vec![16],
            head: vec![64, 64],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerInput {
    Features,
    Layer(LayerId),
}

/// Shape and wiring of one dense layer. The weight block is
/// `(in_dim + 1) × out_dim`; the last row multiplies a constant one (bias).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub id: LayerId,
    pub module: ModuleId,
    pub inputs: Vec<LayerInput>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub relu: bool,
}

impl LayerSpec {
    pub fn n_params(&self) -> usize {
        (self.in_dim + 1) * self.out_dim
    }
}

/// Fixed, parameter-free transform applied to raw inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Preprocess {
    /// Per-feature multipliers.
    Scale(Vec<f32>),
    /// Raw layout `[u0, v0, …, flag0, …]` for `points` keypoints. Pixel
    /// coordinates are centered on their mean and divided by their RMS
    /// spread; the flags pass through. Appended are a depth estimate
    /// `radius·focal/spread` (divided by 4) and the centroid back-projected
    /// to that depth. `radius` is the expected RMS spread of the projected
    /// object at unit depth.
    Keypoints {
        points: usize,
        focal: f32,
        radius: f32,
    },
}

impl Preprocess {
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            Preprocess::Scale(_) => input_dim,
            Preprocess::Keypoints { .. } => input_dim + 3,
        }
    }

    fn check(&self, input_dim: usize) -> Result<()> {
        let ok = match self {
            Preprocess::Scale(s) => s.len() == input_dim,
            Preprocess::Keypoints {
                points,
                focal,
                radius,
            } => 3 * points == input_dim && *points > 1 && *focal > 0.0 && *radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(MqatError::invalid("preprocessing does not match input_dim"))
        }
    }

    /// Transforms a `B × input_dim` batch.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let (rows, cols) = x.dims2("preprocess")?;
        self.check(cols)?;
        match self {
            Preprocess::Scale(scale) => {
                let mut out = x.clone();
                for (i, v) in out.data_mut().iter_mut().enumerate() {
                    *v *= scale[i % cols];
                }
                Ok(out)
            }
            &Preprocess::Keypoints {
                points,
                focal,
                radius,
            } => {
                let width = cols + 3;
                let mut out = Vec::with_capacity(rows * width);
                for r in 0..rows {
                    let row = x.row(r);
                    let (mut cu, mut cv) = (0f64, 0f64);
                    for p in 0..points {
                        cu += row[2 * p] as f64;
                        cv += row[2 * p + 1] as f64;
                    }
                    cu /= points as f64;
                    cv /= points as f64;
                    let mut spread = 0f64;
                    for p in 0..points {
                        spread +=
                            (row[2 * p] as f64 - cu).powi(2) + (row[2 * p + 1] as f64 - cv).powi(2);
                    }
                    let spread = (spread / points as f64).sqrt().max(1e-6);
                    for p in 0..points {
                        out.push(((row[2 * p] as f64 - cu) / spread) as f32);
                        out.push(((row[2 * p + 1] as f64 - cv) / spread) as f32);
                    }
                    out.extend_from_slice(&row[2 * points..]);
                    // Weak-perspective depth from the spread, then the
                    // back-projected centroid at that depth.
                    let depth = radius as f64 * focal as f64 / spread;
                    out.push((depth * cu / focal as f64) as f32);
                    out.push((depth * cv / focal as f64) as f32);
                    out.push((depth / 4.0) as f32);
                }
                Tensor::new([rows, width], out)
            }
        }
    }
}

/// Everything about a model except its weights and quantizer states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Raw input width.
    pub input_dim: usize,
    pub preprocess: Preprocess,
    /// Fixed offset added to the final layer output.
    pub output_offset: Vec<f32>,
    /// Per output column, an optional preprocessed feature column and
    /// multiplier added to that output (a fixed residual).
    pub output_skip: Vec<Option<(usize, f32)>>,
    pub module_names: Vec<String>,
    pub layers: Vec<LayerSpec>,
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.check(self.input_dim)?;
        let feature_dim = self.feature_dim();
        if self.layers.is_empty() {
            return Err(MqatError::invalid("model has no layers"));
        }
        for (k, name) in self.module_names.iter().enumerate() {
            if !self.layers.iter().any(|l| l.module == ModuleId(k)) {
                return Err(MqatError::invalid(format!("module `{name}` has no layers")));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.id != LayerId(i) {
                return Err(MqatError::invalid(format!(
                    "layer {i} carries id {:?}",
                    l.id
                )));
            }
            if l.module.0 >= self.module_names.len() {
                return Err(MqatError::invalid(format!(
                    "layer {i} names unknown module"
                )));
            }
            if l.inputs.is_empty() || l.out_dim == 0 {
                return Err(MqatError::invalid(format!(
                    "layer {i} has no inputs or outputs"
                )));
            }
            let mut width = 0;
            for inp in &l.inputs {
                width += match *inp {
                    LayerInput::Features => feature_dim,
                    LayerInput::Layer(src) if src.0 < i => self.layers[src.0].out_dim,
                    LayerInput::Layer(src) => {
                        return Err(MqatError::invalid(format!(
                            "layer {i} reads layer {} which is not earlier",
                            src.0
                        )))
                    }
                };
            }
            if width != l.in_dim {
                return Err(MqatError::invalid(format!(
                    "layer {i} declares in_dim {} but inputs sum to {width}",
                    l.in_dim
                )));
            }
        }
        let last = self.layers.last().unwrap();
        if !self.output_offset.is_empty() && self.output_offset.len() != last.out_dim {
            return Err(MqatError::invalid(
                "output_offset length differs from output width",
            ));
        }
        if !self.output_skip.is_empty() {
            if self.output_skip.len() != last.out_dim {
                return Err(MqatError::invalid(
                    "output_skip length differs from output width",
                ));
            }
            if self
                .output_skip
                .iter()
                .flatten()
                .any(|&(c, _)| c >= feature_dim)
            {
                return Err(MqatError::invalid(
                    "output_skip names a missing feature column",
                ));
            }
        }
        Ok(())
    }

    /// Width seen by layers reading [`LayerInput::Features`].
    pub fn feature_dim(&self) -> usize {
        self.preprocess.output_dim(self.input_dim)
    }
}

/// Incremental construction of a [`ModularModel`].
#[derive(Debug)]
pub struct ModelBuilder {
    topo: Topology,
}

impl ModelBuilder {
    pub fn new(input_dim: usize) -> Self {
        Self {
            topo: Topology {
                input_dim,
                preprocess: Preprocess::Scale(vec![1.0; input_dim]),
                output_offset: Vec::new(),
                output_skip: Vec::new(),
                module_names: Vec::new(),
                layers: Vec::new(),
            },
        }
    }

    pub fn preprocess(mut self, preprocess: Preprocess) -> Self {
        self.topo.preprocess = preprocess;
        self
    }

    pub fn output_offset(mut self, offset: Vec<f32>) -> Self {
        self.topo.output_offset = offset;
        self
    }

    pub fn output_skip(mut self, skip: Vec<Option<(usize, f32)>>) -> Self {
        self.topo.output_skip = skip;
        self
    }

    pub fn module(&mut self, name: &str) -> ModuleId {
        self.topo.module_names.push(name.to_string());
        ModuleId(self.topo.module_names.len() - 1)
    }

    pub fn layer(
        &mut self,
        module: ModuleId,
        inputs: &[LayerInput],
        out_dim: usize,
        relu: bool,
    ) -> LayerId {
        let in_dim = inputs
            .iter()
            .map(|i| match *i {
                LayerInput::Features => self.topo.feature_dim(),
                LayerInput::Layer(l) => self.topo.layers.get(l.0).map_or(0, |s| s.out_dim),
            })
            .sum();
        let id = LayerId(self.topo.layers.len());
        self.topo.layers.push(LayerSpec {
            id,
            module,
            inputs: inputs.to_vec(),
            in_dim,
            out_dim,
            relu,
        });
        id
    }

    /// He-normal weights (zero bias rows), one RNG stream per layer.
    pub fn build(self, seed: u64) -> Result<ModularModel> {
        let topo = self.topo;
        topo.validate()?;
        let mut params = Vec::with_capacity(topo.layers.len());
        for l in &topo.layers {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l.id.0 as u64);
            let std = (2.0 / l.in_dim as f64).sqrt() * if l.relu { 1.0 } else { 0.5 };
            let normal = Normal::new(0.0, std).map_err(|e| MqatError::invalid(e.to_string()))?;
            let mut data = vec![0f32; l.n_params()];
            for v in &mut data[..l.in_dim * l.out_dim] {
                *v = normal.sample(&mut rng) as f32;
            }
            params.push(Parameter::new(
                Tensor::new([l.in_dim + 1, l.out_dim], data)?,
                l.id,
                l.module,
            ));
        }
        ModularModel::from_parts(topo, params, None)
    }
}

/// Variables recorded by one forward pass.
#[derive(Debug)]
pub struct ForwardPass {
    pub output: Var,
    pub weights: Vec<Var>,
    pub steps: Vec<Option<Var>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModularModel {
    topo: Topology,
    params: Vec<Parameter>,
    quant: Vec<QuantizerState>,
}

/// Expected RMS distance of the projected `vertices` from their centroid at
/// unit depth and unit focal length, over uniformly random rotations.
pub fn projected_radius(vertices: &[[f32; 3]]) -> f32 {
    let n = vertices.len().max(1) as f64;
    let mut c = [0f64; 3];
    for v in vertices {
        for k in 0..3 {
            c[k] += v[k] as f64 / n;
        }
    }
    let ms: f64 = vertices
        .iter()
        .map(|v| (0..3).map(|k| (v[k] as f64 - c[k]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n;
    (ms * 2.0 / 3.0).sqrt() as f32
}

/// Default three-module pose network for an object with the given mesh
/// vertices.
pub fn build_model(arch: &ArchConfig, vertices: &[[f32; 3]], seed: u64) -> Result<ModularModel> {
    let num_vertices = vertices.len();
    if num_vertices < 2 {
        return Err(MqatError::invalid("need at least two mesh vertices"));
    }
    for (name, widths) in [
        ("backbone", &arch.backbone),
        ("aggregator", &arch.aggregator),
        ("head", &arch.head),
    ] {
        if widths.is_empty() {
            return Err(MqatError::invalid(format!("module `{name}` has no layers")));
        }
        if widths.contains(&0) {
            return Err(MqatError::invalid(format!(
                "module `{name}` has a zero-width layer"
            )));
        }
    }
    let input_dim = 3 * num_vertices;
    let mut b = ModelBuilder::new(input_dim)
        .preprocess(Preprocess::Keypoints {
            points: num_vertices,
            focal: super::dataset::FOCAL_PX as f32,
            radius: projected_radius(vertices),
        })
        // identity rotation when the head outputs zero
        .output_offset(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        // translation = learned correction + weak-perspective estimate
        .output_skip(vec![
            None,
            None,
            None,
            None,
            Some((input_dim, 1.0)),
            Some((input_dim + 1, 1.0)),
            Some((input_dim + 2, 4.0)),
        ]);
    let backbone = b.module("backbone");
    let aggregator = b.module("aggregator");
    let head = b.module("head");

    let mut prev = LayerInput::Features;
    let mut taps = Vec::new();
    for &w in &arch.backbone {
        let id = b.layer(backbone, &[prev], w, true);
        taps.push(LayerInput::Layer(id));
        prev = LayerInput::Layer(id);
    }
    let mut inputs = taps;
    for &w in &arch.aggregator {
        let id = b.layer(aggregator, &inputs, w, true);
        inputs = vec![LayerInput::Layer(id)];
    }
    for &w in &arch.head {
        let id = b.layer(head, &inputs, w, true);
        inputs = vec![LayerInput::Layer(id)];
    }
    b.layer(head, &inputs, OUTPUT_DIM, false);
    b.build(seed)
}

impl ModularModel {
    pub fn from_parts(
        topo: Topology,
        params: Vec<Parameter>,
        quant: Option<Vec<QuantizerState>>,
    ) -> Result<Self> {
        topo.validate()?;
        if params.len() != topo.layers.len() {
            return Err(MqatError::invalid(
                "parameter count differs from layer count",
            ));
        }
        for (p, l) in params.iter().zip(&topo.layers) {
            if p.value.shape() != [l.in_dim + 1, l.out_dim]
                || p.layer_id != l.id
                || p.module_id != l.module
            {
                return Err(MqatError::invalid(format!(
                    "parameter for layer {} does not match its layer shape",
                    l.id.0
                )));
            }
        }
        let quant = quant.unwrap_or_else(|| vec![QuantizerState::full_precision(); params.len()]);
        if quant.len() != params.len() {
            return Err(MqatError::invalid(
                "quantizer state count differs from layer count",
            ));
        }
        Ok(Self {
            topo,
            params,
            quant,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn input_dim(&self) -> usize {
        self.topo.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.topo.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn num_modules(&self) -> usize {
        self.topo.module_names.len()
    }

    pub fn module_ids(&self) -> impl Iterator<Item = ModuleId> {
        (0..self.num_modules()).map(ModuleId)
    }

    pub fn module_name(&self, k: ModuleId) -> &str {
        &self.topo.module_names[k.0]
    }

    pub fn module_by_name(&self, name: &str) -> Option<ModuleId> {
        self.topo
            .module_names
            .iter()
            .position(|n| n == name)
            .map(ModuleId)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.topo.layers
    }

    pub fn module_layers(&self, k: ModuleId) -> Vec<LayerId> {
        self.topo
            .layers
            .iter()
            .filter(|l| l.module == k)
            .map(|l| l.id)
            .collect()
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn param(&self, l: LayerId) -> &Parameter {
        &self.params[l.0]
    }

    pub fn quant(&self) -> &[QuantizerState] {
        &self.quant
    }

    pub fn quant_state(&self, l: LayerId) -> &QuantizerState {
        &self.quant[l.0]
    }

    pub fn set_quant(&mut self, l: LayerId, state: QuantizerState) {
        self.quant[l.0] = state;
    }

    /// Mutable access to a layer's weights together with its quantizer state.
    pub fn layer_mut(&mut self, l: LayerId) -> (&mut Parameter, &mut QuantizerState) {
        (&mut self.params[l.0], &mut self.quant[l.0])
    }

    pub fn param_count(&self) -> u64 {
        self.params.iter().map(|p| p.len() as u64).sum()
    }

    /// Parameter counts S_k per module.
    pub fn module_sizes(&self) -> ModuleSizes {
        let mut sizes = vec![0u64; self.num_modules()];
        for p in &self.params {
            sizes[p.module_id.0] += p.len() as u64;
        }
        ModuleSizes::new(
            sizes
                .into_iter()
                .enumerate()
                .map(|(k, s)| (ModuleId(k), self.topo.module_names[k].clone(), s))
                .collect(),
        )
        .expect("validated topology has non-empty modules")
    }

    /// Weight payload in bits: quantized layers at their bit width, the rest
    /// at 32.
    pub fn storage_bits(&self) -> u64 {
        self.params
            .iter()
            .zip(&self.quant)
            .map(|(p, q)| p.len() as u64 * q.storage_bits() as u64)
            .sum()
    }

    /// Weight values the network actually computes with (LSQ layers
    /// fake-quantized).
    pub fn effective_weights(&self, l: LayerId) -> Result<Tensor> {
        let (p, q) = (&self.params[l.0], &self.quant[l.0]);
        match q.kind {
            QuantKind::Lsq => crate::quant::fake_quant_lsq(&p.value, q),
            _ => Ok(p.value.clone()),
        }
    }

    /// Records the forward pass for a `B × input_dim` feature batch.
    pub fn forward(&self, tape: &mut Tape, features: &Tensor) -> Result<ForwardPass> {
        let (rows, cols) = features.dims2("forward")?;
        if cols != self.topo.input_dim {
            return Err(MqatError::shape(
                "forward",
                format!(
                    "features have {cols} columns, model expects {}",
                    self.topo.input_dim
                ),
            ));
        }
        let x = self.topo.preprocess.apply(features)?;
        let residual = self.output_residual(&x)?;
        let x0 = tape.constant(x);
        let ones = tape.constant(Tensor::full([rows, 1], 1.0));
        let mut outs: Vec<Var> = Vec::with_capacity(self.topo.layers.len());
        let mut weights = Vec::with_capacity(self.topo.layers.len());
        let mut steps = Vec::with_capacity(self.topo.layers.len());
        for (l, (p, q)) in self
            .topo
            .layers
            .iter()
            .zip(self.params.iter().zip(&self.quant))
        {
            let mut parts: Vec<Var> = l
                .inputs
                .iter()
                .map(|i| match *i {
                    LayerInput::Features => x0,
                    LayerInput::Layer(src) => outs[src.0],
                })
                .collect();
            parts.push(ones);
            let x = tape.concat(&parts)?;
            let w = tape.leaf(p.value.clone());
            weights.push(w);
            let w_eff = if q.kind == QuantKind::Lsq {
                let range = q.range()?;
                let s = tape.leaf(Tensor::scalar(q.scale));
                steps.push(Some(s));
                tape.fake_quant(w, s, range, grad_scale(p.len(), range))?
            } else {
                steps.push(None);
                w
            };
            let mut h = tape.matmul(x, w_eff)?;
            if l.relu {
                h = tape.relu(h)?;
            }
            outs.push(h);
        }
        let mut output = *outs.last().unwrap();
        if let Some(r) = residual {
            let r = tape.constant(r);
            output = tape.add(output, r)?;
        }
        Ok(ForwardPass {
            output,
            weights,
            steps,
        })
    }

    /// Fixed offset plus skipped features for each row of preprocessed `x`.
    fn output_residual(&self, x: &Tensor) -> Result<Option<Tensor>> {
        let (offset, skip) = (&self.topo.output_offset, &self.topo.output_skip);
        if offset.is_empty() && skip.is_empty() {
            return Ok(None);
        }
        let rows = x.shape()[0];
        let width = self.output_dim();
        let mut r = Tensor::zeros([rows, width]);
        for i in 0..rows {
            let src = x.row(i);
            let dst = &mut r.data_mut()[i * width..(i + 1) * width];
            for j in 0..width {
                dst[j] = offset.get(j).copied().unwrap_or(0.0)
                    + skip
                        .get(j)
                        .copied()
                        .flatten()
                        .map_or(0.0, |(c, m)| src[c] * m);
            }
        }
        Ok(Some(r))
    }

    /// Inference without recording gradients.
    pub fn predict(&self, features: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let pass = self.forward(&mut tape, features)?;
        Ok(tape.value(pass.output).clone())
    }

    /// Writes gradients from `grads` into parameters (masked) and LSQ step
    /// gradients into the quantizer states.
    pub fn apply_grads(&mut self, grads: &Gradients, pass: &ForwardPass) -> Result<()> {
        for (i, p) in self.params.iter_mut().enumerate() {
            match grads.get(pass.weights[i]) {
                Some(g) => p.set_grad(g)?,
                None => p.zero_grad(),
            }
            self.quant[i].step_grad = pass.steps[i]
                .and_then(|s| grads.get(s))
                .map_or(Ok(0.0), |g| g.item())?;
        }
        Ok(())
    }

    /// Keeps learned steps strictly positive after an update.
    pub fn clamp_steps(&mut self) {
        for q in &mut self.quant {
            if q.kind == QuantKind::Lsq && !(q.scale >= MIN_STEP) {
                q.scale = MIN_STEP;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.all_finite())
            && self.quant.iter().all(|q| q.scale.is_finite())
    }

    /// Multiply-accumulates per sample for each layer (bias counted as a MAC
    /// against the constant input).
    pub fn layer_macs(&self) -> Vec<u64> {
        self.topo
            .layers
            .iter()
            .map(|l| l.n_params() as u64)
            .collect()
    }
}

/// Stacks sample inputs into a `B × input_dim` tensor.
pub fn features(samples: &[&PoseSample]) -> Result<Tensor> {
    let cols = samples.first().map_or(0, |s| s.input.len());
    let mut data = Vec::with_capacity(samples.len() * cols);
    for s in samples {
        if s.input.len() != cols {
            return Err(MqatError::shape(
                "features",
                "samples have different input widths",
            ));
        }
        data.extend_from_slice(&s.input);
    }
    Tensor::new([samples.len(), cols], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::cube_vertices;

    #[test]
    fn default_model_partition() {
        let m = build_model(&ArchConfig::default(), &cube_vertices(), 0).unwrap();
        assert_eq!(m.num_modules(), 3);
        let sizes = m.module_sizes();
        assert!(sizes.iter().all(|(_, _, s)| s > 0));
        assert_eq!(sizes.total(), m.param_count());
    }

    #[test]
    fn default_sizes_follow_declared_widths() {
        // Counted by hand from (in + 1) · out per layer.
        let backbone = 46 * 96 + 97 * 96 * 2;
        let aggregator = (3 * 96 + 1) * 16;
        let head = 17 * 64 + 65 * 64 + 65 * 7;
        let m = build_model(&ArchConfig::default(), &cube_vertices(), 0).unwrap();
        let s = m.module_sizes();
        assert_eq!(s.size(ModuleId(0)), backbone);
        assert_eq!(s.size(ModuleId(1)), aggregator);
        assert_eq!(s.size(ModuleId(2)), head);
        assert!(aggregator < head && head < backbone);
    }

    #[test]
    fn empty_module_rejected() {
        let arch = ArchConfig {
            aggregator: vec![],
            ..ArchConfig::default()
        };
        assert!(build_model(&arch, &cube_vertices(), 0).is_err());
    }

    #[test]
    fn forward_shape_and_determinism() {
        let m = build_model(&ArchConfig::default(), &cube_vertices(), 7).unwrap();
        let x = crate::pose::features(
            &crate::pose::generate_dataset(0, 5, 1.0)
                .unwrap()
                .iter()
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let a = m.predict(&x).unwrap();
        assert_eq!(a.shape(), &[5, OUTPUT_DIM]);
        assert_eq!(
            a,
            build_model(&ArchConfig::default(), &cube_vertices(), 7)
                .unwrap()
                .predict(&x)
                .unwrap()
        );
    }
}
