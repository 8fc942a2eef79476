//! Hessian-trace sensitivities and the per-module importance table.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{default_eps, hvp_fd, LayerId, ModuleId, Tape, Tensor};
use crate::error::{MqatError, Result};
use crate::pose::{batch_loss, features, ModularModel, PoseSample};
use crate::quant::{fit_step, LevelRange};

/// RNG for the probes of one layer: stream `layer_id` of `seed`.
pub fn layer_rng(seed: u64, layer: LayerId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer.0 as u64);
    rng
}

/// Hutchinson estimate of `tr(H)/N` for one parameter block, clamped at 0.
///
/// `grad_fn` returns the loss gradient for the block at the given weights.
pub fn hutchinson_trace<F, R>(mut grad_fn: F, weights: &[f32], m: usize, rng: &mut R) -> Result<f64>
where
    F: FnMut(&[f32]) -> Result<Vec<f32>>,
    R: Rng + ?Sized,
{
    if m == 0 {
        return Err(MqatError::invalid(
            "hutchinson_trace needs at least one probe",
        ));
    }
    if weights.is_empty() {
        return Err(MqatError::invalid("hutchinson_trace on an empty block"));
    }
    let eps = default_eps(weights);
    let mut v = vec![0f32; weights.len()];
    let mut total = 0f64;
    for _ in 0..m {
        for x in &mut v {
            *x = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let hv = hvp_fd(&mut grad_fn, weights, &v, eps)?;
        total += v
            .iter()
            .zip(&hv)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum::<f64>();
    }
    let lambda = total / m as f64 / weights.len() as f64;
    if !lambda.is_finite() {
        return Err(MqatError::NonFinite {
            context: "hutchinson trace".into(),
        });
    }
    Ok(lambda.max(0.0))
}

/// Gradient of the batch loss on `data` with respect to one layer's weights,
/// with that layer set to `w`.
pub fn layer_gradient(
    model: &ModularModel,
    layer: LayerId,
    w: &[f32],
    data: &[&PoseSample],
) -> Result<Vec<f32>> {
    let mut m = model.clone();
    let p = &mut m.params_mut()[layer.0];
    let shape = p.value.shape().to_vec();
    p.value = Tensor::new(shape, w.to_vec())?;
    let mut tape = Tape::new();
    let pass = m.forward(&mut tape, &features(data)?)?;
    let loss = batch_loss(&mut tape, pass.output, data)?;
    let grads = tape.backward(loss)?;
    Ok(grads
        .get(pass.weights[layer.0])
        .map(|g| g.data().to_vec())
        .unwrap_or_else(|| vec![0.0; w.len()]))
}

/// λ_i for every layer on a calibration batch; layers run in parallel and
/// each draws probes from its own stream.
pub fn model_sensitivities(
    model: &ModularModel,
    calibration: &[PoseSample],
    m: usize,
    seed: u64,
) -> Result<BTreeMap<LayerId, f64>> {
    if calibration.is_empty() {
        return Err(MqatError::invalid("empty calibration set"));
    }
    let batch: Vec<&PoseSample> = calibration.iter().collect();
    let ids: Vec<LayerId> = model.layers().iter().map(|l| l.id).collect();
    let lambdas: Vec<Result<f64>> = ids
        .par_iter()
        .map(|&l| {
            let w = model.param(l).value.data().to_vec();
            let mut rng = layer_rng(seed, l);
            hutchinson_trace(|x| layer_gradient(model, l, x, &batch), &w, m, &mut rng)
        })
        .collect();
    ids.into_iter()
        .zip(lambdas)
        .map(|(l, r)| r.map(|v| (l, v)))
        .collect()
}

/// `(1/L_k)·Σ_i (λ_i/N_i)·err_i` for the layers of one module, given as
/// `(λ_i, N_i, err_i)`.
pub fn module_importance(terms: &[(f64, usize, f64)]) -> Result<f64> {
    if terms.is_empty() {
        return Err(MqatError::invalid("module has no layers"));
    }
    let l = terms.len() as f64;
    let mut sum = 0f64;
    for &(lambda, n, err) in terms {
        if n == 0 {
            return Err(MqatError::invalid("layer with zero parameters"));
        }
        sum += lambda / n as f64 * err;
    }
    Ok(sum / l)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityProfile {
    pub lambda: BTreeMap<LayerId, f64>,
    pub n_params: BTreeMap<LayerId, usize>,
    pub layer_module: BTreeMap<LayerId, ModuleId>,
    pub layers_per_module: BTreeMap<ModuleId, usize>,
    pub module_names: BTreeMap<ModuleId, String>,
    /// Ω_k^(ρ)
    pub omega: BTreeMap<(ModuleId, u8), f64>,
    /// Per-layer share of Ω: `(1/L_k)·(λ_i/N_i)·err_i(ρ)`. Summing a
    /// module's layers at one width gives its Ω.
    pub layer_omega: BTreeMap<(LayerId, u8), f64>,
    pub num_hutchinson_samples: usize,
    pub seed: u64,
}

impl SensitivityProfile {
    /// Profile skeleton for `model` with the given λ values (no Ω yet).
    pub fn new(
        model: &ModularModel,
        lambda: BTreeMap<LayerId, f64>,
        m: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut n_params = BTreeMap::new();
        let mut layer_module = BTreeMap::new();
        let mut layers_per_module = BTreeMap::new();
        for l in model.layers() {
            n_params.insert(l.id, l.n_params());
            layer_module.insert(l.id, l.module);
            *layers_per_module.entry(l.module).or_insert(0) += 1;
        }
        for (l, v) in &lambda {
            if !n_params.contains_key(l) {
                return Err(MqatError::invalid(format!(
                    "λ given for unknown layer {}",
                    l.0
                )));
            }
            if !(v.is_finite() && *v >= 0.0) {
                return Err(MqatError::invalid(format!("λ for layer {} is {v}", l.0)));
            }
        }
        let module_names = model
            .module_ids()
            .map(|k| (k, model.module_name(k).to_string()))
            .collect();
        Ok(Self {
            lambda,
            n_params,
            layer_module,
            layers_per_module,
            module_names,
            omega: BTreeMap::new(),
            layer_omega: BTreeMap::new(),
            num_hutchinson_samples: m,
            seed,
        })
    }

    /// Estimates λ on `calibration` and builds the profile.
    pub fn estimate(
        model: &ModularModel,
        calibration: &[PoseSample],
        m: usize,
        seed: u64,
    ) -> Result<Self> {
        let lambda = model_sensitivities(model, calibration, m, seed)?;
        Self::new(model, lambda, m, seed)
    }

    pub fn bits(&self) -> Vec<u8> {
        let set: std::collections::BTreeSet<u8> = self.omega.keys().map(|k| k.1).collect();
        set.into_iter().collect()
    }

    /// Ω for module `k` at `bits`.
    pub fn omega(&self, k: ModuleId, bits: u8) -> Option<f64> {
        self.omega.get(&(k, bits)).copied()
    }
}

/// Fills Ω (and its per-layer shares) for every module and every width in
/// `q`, re-fitting the step per width on the model's current weights.
pub fn importance_table(
    model: &ModularModel,
    profile: &mut SensitivityProfile,
    q: &[u8],
) -> Result<()> {
    if q.is_empty() {
        return Err(MqatError::invalid("no candidate bit widths"));
    }
    let mut errs: BTreeMap<(LayerId, u8), f64> = BTreeMap::new();
    for l in model.layers() {
        if !profile.lambda.contains_key(&l.id) {
            return Err(MqatError::invalid(format!("no λ for layer {}", l.id.0)));
        }
    }
    let work: Vec<(LayerId, u8)> = model
        .layers()
        .iter()
        .flat_map(|l| q.iter().map(move |&b| (l.id, b)))
        .collect();
    let fitted: Vec<Result<f64>> = work
        .par_iter()
        .map(|&(l, b)| Ok(fit_step(model.param(l).value.data(), LevelRange::new(b)?).1))
        .collect();
    for (key, e) in work.into_iter().zip(fitted) {
        errs.insert(key, e?);
    }
    for k in model.module_ids() {
        let layers = model.module_layers(k);
        for &b in q {
            let terms: Vec<(f64, usize, f64)> = layers
                .iter()
                .map(|l| (profile.lambda[l], model.param(*l).len(), errs[&(*l, b)]))
                .collect();
            profile.omega.insert((k, b), module_importance(&terms)?);
            for (l, t) in layers.iter().zip(&terms) {
                profile
                    .layer_omega
                    .insert((*l, b), t.0 / t.1 as f64 * t.2 / layers.len() as f64);
            }
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    num_hutchinson_samples: usize,
    seed: u64,
    #[serde(default)]
    module: Vec<ModuleRecord>,
    #[serde(default)]
    layer: Vec<LayerRecord>,
    #[serde(default)]
    omega: Vec<OmegaRecord>,
    #[serde(default)]
    layer_omega: Vec<LayerOmegaRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModuleRecord {
    module_id: usize,
    name: String,
    layers: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    layer_id: usize,
    module_id: usize,
    n_params: usize,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OmegaRecord {
    module_id: usize,
    bits: u8,
    omega: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerOmegaRecord {
    layer_id: usize,
    bits: u8,
    omega: f64,
}

impl SensitivityProfile {
    pub fn to_toml(&self) -> Result<String> {
        let file = ProfileFile {
            num_hutchinson_samples: self.num_hutchinson_samples,
            seed: self.seed,
            module: self
                .layers_per_module
                .iter()
                .map(|(k, &n)| ModuleRecord {
                    module_id: k.0,
                    name: self.module_names.get(k).cloned().unwrap_or_default(),
                    layers: n,
                })
                .collect(),
            layer: self
                .n_params
                .iter()
                .map(|(l, &n)| LayerRecord {
                    layer_id: l.0,
                    module_id: self.layer_module[l].0,
                    n_params: n,
                    lambda: self.lambda.get(l).copied().unwrap_or(0.0),
                })
                .collect(),
            omega: self
                .omega
                .iter()
                .map(|(&(k, bits), &omega)| OmegaRecord {
                    module_id: k.0,
                    bits,
                    omega,
                })
                .collect(),
            layer_omega: self
                .layer_omega
                .iter()
                .map(|(&(l, bits), &omega)| LayerOmegaRecord {
                    layer_id: l.0,
                    bits,
                    omega,
                })
                .collect(),
        };
        toml::to_string(&file).map_err(|e| MqatError::Format(format!("profile: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ProfileFile =
            toml::from_str(text).map_err(|e| MqatError::Format(format!("profile: {e}")))?;
        let mut p = SensitivityProfile {
            lambda: BTreeMap::new(),
            n_params: BTreeMap::new(),
            layer_module: BTreeMap::new(),
            layers_per_module: BTreeMap::new(),
            module_names: BTreeMap::new(),
            omega: BTreeMap::new(),
            layer_omega: BTreeMap::new(),
            num_hutchinson_samples: file.num_hutchinson_samples,
            seed: file.seed,
        };
        for m in file.module {
            p.layers_per_module.insert(ModuleId(m.module_id), m.layers);
            p.module_names.insert(ModuleId(m.module_id), m.name);
        }
        for l in file.layer {
            let id = LayerId(l.layer_id);
            if p.n_params.insert(id, l.n_params).is_some() {
                return Err(MqatError::Format(format!(
                    "profile: layer {} listed twice",
                    l.layer_id
                )));
            }
            p.layer_module.insert(id, ModuleId(l.module_id));
            p.lambda.insert(id, l.lambda);
        }
        for o in file.omega {
            p.omega.insert((ModuleId(o.module_id), o.bits), o.omega);
        }
        for o in file.layer_omega {
            p.layer_omega.insert((LayerId(o.layer_id), o.bits), o.omega);
        }
        for (l, k) in &p.layer_module {
            if !p.layers_per_module.contains_key(k) {
                return Err(MqatError::Format(format!(
                    "profile: layer {} names unknown module {}",
                    l.0, k.0
                )));
            }
        }
        Ok(p)
    }
}
