//! Pretraining, quantize-and-retrain stages, the full MQAT run and the
//! comparison baselines.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{LayerId, ModuleId};
use crate::error::{MqatError, Result};
use crate::metrics::MetricSet;
use crate::planner::{
    baseline_probe, bops_estimate, budget_limit_bits, compression_factor, flow_search_exhaustive,
    layerwise_allocate, normalize_bits, ProbeOutcome, QuantPlan, SearchRow, PROBE_BITS,
};
use crate::pose::{build_model, cube_vertices, evaluate, ModularModel};
use crate::quant::{inq_advance, QuantKind, QuantizerState};
use crate::sensitivity::{importance_table, SensitivityProfile};

use super::config::{Datasets, RunConfig};
use super::schedule::{fraction_at, gamma_at, inq_schedule, lsq_schedule, scale_schedule};
use super::train::{derive_seed, name_tag, train_epoch, Optimizer};

/// One line of the progress log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub stage: String,
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub fraction: Option<f64>,
    /// ADD-0.1d on the validation split, logged at the end of a stage.
    pub val_accuracy: Option<f64>,
}

/// Outcome of one training stage.
#[derive(Clone, Debug)]
pub struct StageResult {
    pub metrics: MetricSet,
    pub epochs: usize,
    pub log: Vec<ProgressRecord>,
}

impl StageResult {
    /// ac(M): ADD-0.1d on the validation split.
    pub fn accuracy(&self) -> f64 {
        self.metrics.add_01d.value
    }
}

/// ac(M) used by probes and reports.
pub fn accuracy(model: &ModularModel, data: &Datasets) -> Result<MetricSet> {
    evaluate(model, &data.val, "val")
}

/// Full-precision training from a seeded initialization with a cosine
/// learning-rate decay from `pretrain_lr`.
pub fn pretrain(config: &RunConfig, data: &Datasets) -> Result<(ModularModel, StageResult)> {
    config.validate()?;
    let vertices = data
        .train
        .first()
        .map(|s| s.vertices.clone())
        .unwrap_or_else(cube_vertices);
    let mut model = build_model(&config.arch, &vertices, config.seed_for("init"))?;
    let mut opt = Optimizer::new(config.momentum)?;
    let epochs = config.pretrain_epochs;
    let mut log = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let t = e as f64 / epochs as f64;
        let lr = config.pretrain_lr as f64 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        let shuffle = derive_seed(config.seed, &[name_tag("pretrain"), e as u64]);
        let loss = train_epoch(
            &mut model,
            &data.train,
            &mut opt,
            lr as f32,
            config.batch_size,
            shuffle,
            "pretrain",
            e,
        )?;
        log.push(ProgressRecord {
            stage: "pretrain".into(),
            epoch: e,
            loss,
            lr,
            fraction: None,
            val_accuracy: None,
        });
    }
    let metrics = accuracy(&model, data)?;
    if let Some(last) = log.last_mut() {
        last.val_accuracy = Some(metrics.add_01d.value);
    }
    Ok((
        model,
        StageResult {
            metrics,
            epochs,
            log,
        },
    ))
}

/// Layer widths implied by a per-module assignment.
pub fn layer_bits(model: &ModularModel, bits: &BTreeMap<ModuleId, u8>) -> BTreeMap<LayerId, u8> {
    model
        .layers()
        .iter()
        .filter_map(|l| bits.get(&l.module).map(|&b| (l.id, b)))
        .collect()
}

/// Quantizes the given layers with `kind` and retrains the whole model for
/// `epochs` epochs under the matching schedule. Layers quantized earlier
/// keep their state; all other layers stay trainable.
///
/// On exit INQ layers are fully frozen on their grid and LSQ layers have
/// fake quantization active with a positive learned step.
pub fn retrain_layers(
    model: &mut ModularModel,
    bits: &BTreeMap<LayerId, u8>,
    kind: QuantKind,
    epochs: usize,
    config: &RunConfig,
    data: &Datasets,
    stage: &str,
) -> Result<StageResult> {
    if epochs == 0 {
        return Err(MqatError::invalid(
            "a retrain stage needs at least one epoch",
        ));
    }
    if bits.is_empty() {
        return Err(MqatError::invalid(format!(
            "stage `{stage}` quantizes no layers"
        )));
    }
    let schedule = match kind {
        QuantKind::Inq => scale_schedule(&inq_schedule(), epochs),
        QuantKind::Lsq => scale_schedule(&lsq_schedule(), epochs),
        QuantKind::None => return Err(MqatError::invalid("cannot retrain with quantizer `none`")),
    };
    for (&l, &b) in bits {
        if l.0 >= model.layers().len() {
            return Err(MqatError::invalid(format!("unknown layer {}", l.0)));
        }
        let state = match kind {
            QuantKind::Inq => QuantizerState::inq(&model.param(l).value, b)?,
            _ => QuantizerState::lsq(&model.param(l).value, b)?,
        };
        model.set_quant(l, state);
    }
    let tag = name_tag(stage);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[tag, 0]));
    let mut opt = Optimizer::new(config.momentum)?;
    let mut fraction = 0f64;
    let mut log = Vec::with_capacity(epochs);
    for e in 0..epochs {
        if kind == QuantKind::Inq {
            if let Some(f) = fraction_at(&schedule, e).filter(|&f| f > fraction) {
                for &l in bits.keys() {
                    let (p, q) = model.layer_mut(l);
                    inq_advance(p, q, f, config.partition, &mut rng)?;
                }
                fraction = f;
            }
        }
        let lr = config.lr as f64 * gamma_at(&schedule, e);
        let shuffle = derive_seed(config.seed, &[tag, 1, e as u64]);
        let loss = train_epoch(
            model,
            &data.train,
            &mut opt,
            lr as f32,
            config.batch_size,
            shuffle,
            stage,
            e,
        )?;
        log.push(ProgressRecord {
            stage: stage.to_string(),
            epoch: e,
            loss,
            lr,
            fraction: (kind == QuantKind::Inq).then_some(fraction),
            val_accuracy: None,
        });
    }
    if kind == QuantKind::Inq && fraction < 1.0 {
        return Err(MqatError::invalid(format!(
            "stage `{stage}` ended with INQ fraction {fraction}"
        )));
    }
    let metrics = accuracy(model, data)?;
    if let Some(last) = log.last_mut() {
        last.val_accuracy = Some(metrics.add_01d.value);
    }
    Ok(StageResult {
        metrics,
        epochs,
        log,
    })
}

/// [`retrain_layers`] for every layer of the given modules.
pub fn quantize_and_retrain(
    model: &mut ModularModel,
    bits: &BTreeMap<ModuleId, u8>,
    kind: QuantKind,
    epochs: usize,
    config: &RunConfig,
    data: &Datasets,
    stage: &str,
) -> Result<StageResult> {
    for k in bits.keys() {
        if k.0 >= model.num_modules() {
            return Err(MqatError::invalid(format!("unknown module {}", k.0)));
        }
    }
    let lb = layer_bits(model, bits);
    retrain_layers(model, &lb, kind, epochs, config, data, stage)
}

/// One flow stage of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageReport {
    pub module: String,
    pub bits: u8,
    pub metrics: MetricSet,
    pub size_bits: u64,
    pub compression: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub model: ModularModel,
    pub plan: QuantPlan,
    pub baseline: MetricSet,
    pub probes: Vec<ProbeOutcome>,
    pub stages: Vec<StageReport>,
    pub final_metrics: MetricSet,
    pub profile: Option<SensitivityProfile>,
    pub total_epochs: usize,
    pub bops: u64,
    pub log: Vec<ProgressRecord>,
}

fn ensure_fp(model: &ModularModel) -> Result<()> {
    if model.quant().iter().any(|q| q.is_active()) {
        return Err(MqatError::invalid(
            "expected a full-precision starting model",
        ));
    }
    Ok(())
}

/// Result of the probe step alone.
#[derive(Debug)]
pub struct ProbeStep {
    pub baseline: MetricSet,
    pub outcomes: Vec<ProbeOutcome>,
    pub best: Option<(ModuleId, ModularModel)>,
    pub log: Vec<ProgressRecord>,
    pub epochs: usize,
}

/// Quantizes each module alone to 2 bits from the same pretrained weights,
/// retrains, and keeps the best strict improvement over full precision.
pub fn probe_step(
    config: &RunConfig,
    pretrained: &ModularModel,
    data: &Datasets,
) -> Result<ProbeStep> {
    ensure_fp(pretrained)?;
    let baseline = accuracy(pretrained, data)?;
    let modules: Vec<ModuleId> = pretrained.module_ids().collect();
    let probe = |k: ModuleId| -> Result<(f64, (ModularModel, StageResult))> {
        let mut m = pretrained.clone();
        let stage = format!("probe/{}", pretrained.module_name(k));
        let bits = BTreeMap::from([(k, PROBE_BITS)]);
        let r = quantize_and_retrain(
            &mut m,
            &bits,
            config.quantizer,
            config.probe_epochs,
            config,
            data,
            &stage,
        )?;
        Ok((r.accuracy(), (m, r)))
    };
    let res = baseline_probe(&modules, baseline.add_01d.value, probe)?;
    // logs of successful probes in module order
    let mut log = Vec::new();
    let mut best = None;
    if let Some((k, (m, r))) = res.best {
        log.extend(r.log);
        best = Some((k, m));
    }
    Ok(ProbeStep {
        baseline,
        outcomes: res.outcomes,
        best,
        log,
        epochs: config.probe_epochs * modules.len(),
    })
}

/// Sensitivities on the calibration split with Ω for the configured widths.
pub fn profile_model(
    config: &RunConfig,
    model: &ModularModel,
    data: &Datasets,
) -> Result<SensitivityProfile> {
    let mut p = SensitivityProfile::estimate(
        model,
        &data.calibration,
        config.hutchinson_samples,
        config.seed_for("hutchinson"),
    )?;
    importance_table(model, &mut p, &normalize_bits(&config.bits)?)?;
    Ok(p)
}

fn precheck_budget(config: &RunConfig, model: &ModularModel) -> Result<()> {
    let sizes = model.module_sizes();
    let q = normalize_bits(&config.bits)?;
    let floor = q[0].min(PROBE_BITS);
    let min_size = sizes.total() * floor as u64;
    let limit = budget_limit_bits(sizes.full_precision_bits(), config.budget);
    if min_size as f64 > limit {
        return Err(MqatError::Infeasible {
            budget: config.budget,
            min_size_bits: min_size,
            limit_bits: limit,
        });
    }
    Ok(())
}

/// Probe, plan and flow from a pretrained full-precision model.
pub fn mqat_run(
    config: &RunConfig,
    pretrained: &ModularModel,
    data: &Datasets,
) -> Result<RunOutput> {
    config.validate()?;
    ensure_fp(pretrained)?;
    let sizes = pretrained.module_sizes();
    let macs = pretrained.layer_macs();
    if config.quantizer == QuantKind::None {
        if config.budget > 1.0 {
            return Err(MqatError::Infeasible {
                budget: config.budget,
                min_size_bits: sizes.full_precision_bits(),
                limit_bits: budget_limit_bits(sizes.full_precision_bits(), config.budget),
            });
        }
        let metrics = accuracy(pretrained, data)?;
        let bits: BTreeMap<ModuleId, u8> = sizes.ids().into_iter().map(|k| (k, 32)).collect();
        let plan = QuantPlan {
            flow: Vec::new(),
            achieved_compression: compression_factor(&sizes, &bits)?,
            achieved_size_bits: sizes.size_bits(&bits),
            bits,
            k_best: None,
            budget: config.budget,
            objective: 0.0,
        };
        return Ok(RunOutput {
            model: pretrained.clone(),
            plan,
            baseline: metrics.clone(),
            probes: Vec::new(),
            stages: Vec::new(),
            final_metrics: metrics,
            profile: None,
            total_epochs: 0,
            bops: bops_estimate(&macs, &vec![32; macs.len()], 32)?,
            log: Vec::new(),
        });
    }
    precheck_budget(config, pretrained)?;

    let mut profile = profile_model(config, pretrained, data)?;
    let probe = probe_step(config, pretrained, data)?;
    let mut log = probe.log;
    let mut total_epochs = probe.epochs;
    let k_best = probe.best.as_ref().map(|b| b.0);
    let mut model = match probe.best {
        Some((_, m)) => m,
        None => pretrained.clone(),
    };
    // λ stays from the pretrained weights; quantization error follows the
    // current model.
    importance_table(&model, &mut profile, &normalize_bits(&config.bits)?)?;
    let plan = QuantPlan::build(&sizes, &profile.omega, &config.bits, config.budget, k_best)?;

    let mut assigned: BTreeMap<ModuleId, u8> =
        k_best.map(|k| (k, PROBE_BITS)).into_iter().collect();
    let mut stages = Vec::with_capacity(plan.flow.len());
    for &k in &plan.flow {
        let b = plan.bits[&k];
        let stage = format!("stage/{}", sizes.name(k));
        let r = quantize_and_retrain(
            &mut model,
            &BTreeMap::from([(k, b)]),
            config.quantizer,
            config.epochs_per_module,
            config,
            data,
            &stage,
        )?;
        total_epochs += r.epochs;
        assigned.insert(k, b);
        let size_bits = sizes.size_bits(&assigned);
        stages.push(StageReport {
            module: sizes.name(k).to_string(),
            bits: b,
            metrics: r.metrics,
            size_bits,
            compression: sizes.full_precision_bits() as f64 / size_bits as f64,
        });
        log.extend(r.log);
    }
    let final_metrics = accuracy(&model, data)?;
    let wbits: Vec<u8> = model.quant().iter().map(|q| q.storage_bits()).collect();
    let bops = bops_estimate(&macs, &wbits, 32)?;
    Ok(RunOutput {
        model,
        plan,
        baseline: probe.baseline,
        probes: probe.outcomes,
        stages,
        final_metrics,
        profile: Some(profile),
        total_epochs,
        bops,
        log,
    })
}

/// Width of the uniform baseline matching a compression budget.
pub fn uniform_bits_for_budget(budget: f64) -> Result<u8> {
    if !(budget.is_finite() && budget >= 1.0) {
        return Err(MqatError::invalid(format!("budget {budget} must be >= 1")));
    }
    Ok(((32.0 / budget).floor() as u8).clamp(1, crate::quant::MAX_BITS))
}

/// Every layer at `bits` with LSQ, trained `epochs` epochs in one stage.
pub fn uniform_lsq(
    config: &RunConfig,
    pretrained: &ModularModel,
    data: &Datasets,
    bits: u8,
    epochs: usize,
) -> Result<(ModularModel, StageResult)> {
    ensure_fp(pretrained)?;
    let mut m = pretrained.clone();
    let all: BTreeMap<ModuleId, u8> = m.module_ids().map(|k| (k, bits)).collect();
    let r = quantize_and_retrain(
        &mut m,
        &all,
        QuantKind::Lsq,
        epochs,
        config,
        data,
        &format!("uniform/{bits}"),
    )?;
    Ok((m, r))
}

/// Per-layer widths from the layer-wise allocator, then LSQ on every layer
/// for `epochs` epochs.
pub fn layerwise_lsq(
    config: &RunConfig,
    pretrained: &ModularModel,
    data: &Datasets,
    profile: &SensitivityProfile,
    budget: f64,
    epochs: usize,
) -> Result<(ModularModel, StageResult, BTreeMap<LayerId, u8>)> {
    ensure_fp(pretrained)?;
    let sizes: BTreeMap<LayerId, u64> = pretrained
        .layers()
        .iter()
        .map(|l| (l.id, l.n_params() as u64))
        .collect();
    let alloc = layerwise_allocate(&profile.layer_omega, &sizes, &config.bits, budget)?;
    let mut m = pretrained.clone();
    let r = retrain_layers(
        &mut m,
        &alloc.bits,
        QuantKind::Lsq,
        epochs,
        config,
        data,
        &format!("layerwise/{budget}"),
    )?;
    Ok((m, r, alloc.bits))
}

/// Total epochs a run spends for a given flow length.
pub fn run_epochs(config: &RunConfig, modules: usize, flow_len: usize) -> usize {
    config.probe_epochs * modules + config.epochs_per_module * flow_len
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub module: String,
    pub bits: u8,
    pub metrics: MetricSet,
}

/// Each module alone at each width, retrained for `epochs_per_module`.
pub fn bit_sweep(
    config: &RunConfig,
    pretrained: &ModularModel,
    data: &Datasets,
    bits: &[u8],
) -> Result<Vec<SweepRow>> {
    ensure_fp(pretrained)?;
    if config.quantizer == QuantKind::None {
        return Err(MqatError::config(
            "quantizer",
            "a bit sweep needs inq or lsq",
        ));
    }
    let bits = normalize_bits(bits)?;
    let jobs: Vec<(ModuleId, u8)> = pretrained
        .module_ids()
        .flat_map(|k| bits.iter().map(move |&b| (k, b)))
        .collect();
    jobs.par_iter()
        .map(|&(k, b)| {
            let mut m = pretrained.clone();
            let name = pretrained.module_name(k).to_string();
            let stage = format!("sweep/{name}/{b}");
            let r = quantize_and_retrain(
                &mut m,
                &BTreeMap::from([(k, b)]),
                config.quantizer,
                config.epochs_per_module,
                config,
                data,
                &stage,
            )?;
            Ok(SweepRow {
                module: name,
                bits: b,
                metrics: r.metrics,
            })
        })
        .collect()
}

/// Every subset of modules quantized together to 2 bits.
pub fn flow_search(
    config: &RunConfig,
    pretrained: &ModularModel,
    data: &Datasets,
) -> Result<(MetricSet, Vec<SearchRow>)> {
    ensure_fp(pretrained)?;
    if config.quantizer == QuantKind::None {
        return Err(MqatError::config(
            "quantizer",
            "a flow search needs inq or lsq",
        ));
    }
    let baseline = accuracy(pretrained, data)?;
    let modules: Vec<ModuleId> = pretrained.module_ids().collect();
    let rows = flow_search_exhaustive(&modules, baseline.add_01d.value, |subset| {
        let mut m = pretrained.clone();
        let names: Vec<&str> = subset.iter().map(|&k| pretrained.module_name(k)).collect();
        let bits: BTreeMap<ModuleId, u8> = subset.iter().map(|&k| (k, PROBE_BITS)).collect();
        let stage = format!("search/{}", names.join("+"));
        let r = quantize_and_retrain(
            &mut m,
            &bits,
            config.quantizer,
            config.epochs_per_module,
            config,
            data,
            &stage,
        )?;
        Ok(r.accuracy())
    })?;
    Ok((baseline, rows))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareRow {
    pub budget: f64,
    pub method: String,
    pub compression: f64,
    pub epochs: usize,
    pub metrics: MetricSet,
}

/// MQAT against uniform LSQ and layer-wise mixed LSQ at each budget, with
/// the baselines given the epochs the MQAT run used.
pub fn compare(
    config: &RunConfig,
    pretrained: &ModularModel,
    data: &Datasets,
    budgets: &[f64],
) -> Result<Vec<CompareRow>> {
    ensure_fp(pretrained)?;
    let profile = profile_model(config, pretrained, data)?;
    let sizes = pretrained.module_sizes();
    let mut rows = Vec::new();
    for &budget in budgets {
        let cfg = RunConfig {
            budget,
            ..config.clone()
        };
        let run = mqat_run(&cfg, pretrained, data)?;
        let epochs = run.total_epochs.max(1);
        rows.push(CompareRow {
            budget,
            method: "mqat".into(),
            compression: run.plan.achieved_compression,
            epochs: run.total_epochs,
            metrics: run.final_metrics,
        });
        let b = uniform_bits_for_budget(budget)?;
        let (_, r) = uniform_lsq(&cfg, pretrained, data, b, epochs)?;
        let all: BTreeMap<ModuleId, u8> = sizes.ids().into_iter().map(|k| (k, b)).collect();
        rows.push(CompareRow {
            budget,
            method: "uniform-lsq".into(),
            compression: compression_factor(&sizes, &all)?,
            epochs,
            metrics: r.metrics,
        });
        let (_, r, lb) = layerwise_lsq(&cfg, pretrained, data, &profile, budget, epochs)?;
        let payload: u64 = pretrained
            .layers()
            .iter()
            .map(|l| l.n_params() as u64 * lb[&l.id] as u64)
            .sum();
        rows.push(CompareRow {
            budget,
            method: "layerwise-lsq".into(),
            compression: sizes.full_precision_bits() as f64 / payload as f64,
            epochs,
            metrics: r.metrics,
        });
    }
    Ok(rows)
}
