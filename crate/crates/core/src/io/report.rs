//! Run reports: structured JSON, a text table, plot triples and the JSONL
//! progress log.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MqatError, Result};
use crate::metrics::{Accuracy, MetricSet};
use crate::planner::{ModuleSizes, ProbeOutcome, QuantPlan, SearchRow};
use crate::pose::ModularModel;
use crate::trainer::{
    inq_schedule, lsq_schedule, scale_schedule, CompareRow, ProgressRecord, RunConfig,
    ScheduleEntry, StageReport, SweepRow,
};

use super::config::config_hash;
use super::write_atomic;

/// ADD-0.1d on the validation split.
pub fn val_add01(value: f64) -> Accuracy {
    Accuracy {
        metric: "ADD-0.1d".into(),
        split: "val".into(),
        value,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleRow {
    pub name: String,
    pub params: u64,
    pub bits: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub budget: f64,
    pub achieved_compression: f64,
    pub achieved_size_bits: u64,
    pub objective: f64,
    pub k_best: Option<String>,
    pub flow: Vec<String>,
    pub modules: Vec<ModuleRow>,
}

impl PlanSummary {
    pub fn new(plan: &QuantPlan, sizes: &ModuleSizes) -> Self {
        Self {
            budget: plan.budget,
            achieved_compression: plan.achieved_compression,
            achieved_size_bits: plan.achieved_size_bits,
            objective: plan.objective,
            k_best: plan.k_best.map(|k| sizes.name(k).to_string()),
            flow: plan
                .flow
                .iter()
                .map(|&k| sizes.name(k).to_string())
                .collect(),
            modules: sizes
                .iter()
                .map(|(k, name, params)| ModuleRow {
                    name: name.to_string(),
                    params,
                    bits: plan.bits.get(&k).copied().unwrap_or(32),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub module: String,
    pub bits: u8,
    pub accuracy: Option<Accuracy>,
    pub failure: Option<String>,
}

impl ProbeRow {
    pub fn rows(outcomes: &[ProbeOutcome], sizes: &ModuleSizes) -> Vec<Self> {
        outcomes
            .iter()
            .map(|o| ProbeRow {
                module: sizes.name(o.module).to_string(),
                bits: crate::planner::PROBE_BITS,
                accuracy: o.accuracy.map(val_add01),
                failure: o.failure.clone(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub modules: Vec<String>,
    pub accuracy: Accuracy,
}

impl SubsetRow {
    pub fn rows(rows: &[SearchRow], sizes: &ModuleSizes) -> Vec<Self> {
        rows.iter()
            .map(|r| SubsetRow {
                modules: r
                    .subset
                    .iter()
                    .map(|&k| sizes.name(k).to_string())
                    .collect(),
                accuracy: val_add01(r.accuracy),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReportBody {
    Pretrain {
        metrics: MetricSet,
    },
    Probe {
        baseline: MetricSet,
        probes: Vec<ProbeRow>,
        k_best: Option<String>,
    },
    Plan {
        plan: PlanSummary,
        bops: u64,
    },
    Run {
        baseline: MetricSet,
        probes: Vec<ProbeRow>,
        plan: PlanSummary,
        stages: Vec<StageReport>,
        final_metrics: MetricSet,
        compression: f64,
        payload_bits: u64,
        bops: u64,
        total_epochs: usize,
    },
    FlowSearch {
        baseline: MetricSet,
        rows: Vec<SubsetRow>,
    },
    BitSweep {
        rows: Vec<SweepRow>,
    },
    Compare {
        rows: Vec<CompareRow>,
    },
    Eval {
        metrics: MetricSet,
        modules: Vec<ModuleRow>,
        compression: f64,
        payload_bits: u64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schedules {
    pub epochs_per_module: usize,
    pub inq: Vec<ScheduleEntry>,
    pub lsq: Vec<ScheduleEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    /// Seconds since the Unix epoch (`SOURCE_DATE_EPOCH` if set).
    pub generated_at: u64,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub schedules: Schedules,
    pub body: ReportBody,
    pub trace: Vec<ProgressRecord>,
}

fn now() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

impl Report {
    pub fn new(
        command: &str,
        config: &RunConfig,
        body: ReportBody,
        trace: Vec<ProgressRecord>,
    ) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at: now(),
            seed: config.seed,
            config_hash: config_hash(config),
            config: config.clone(),
            schedules: Schedules {
                epochs_per_module: config.epochs_per_module,
                inq: scale_schedule(&inq_schedule(), config.epochs_per_module),
                lsq: scale_schedule(&lsq_schedule(), config.epochs_per_module),
            },
            body,
            trace,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| MqatError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| MqatError::Format(format!("report: {e}")))
    }

    /// Human-readable summary.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command      {}", self.command);
        let _ = writeln!(s, "seed         {}", self.seed);
        let _ = writeln!(s, "config hash  {}", self.config_hash);
        let _ = writeln!(s);
        let metrics_line = |s: &mut String, label: &str, m: &MetricSet| {
            let _ = writeln!(
                s,
                "{label:<12} {}={:.4} {}={:.4} {}={:.4} {}={:.4} ({})",
                m.add_01d.metric,
                m.add_01d.value,
                m.add_05d.metric,
                m.add_05d.value,
                m.adi_01d.metric,
                m.adi_01d.value,
                m.adi_05d.metric,
                m.adi_05d.value,
                m.add_01d.split
            );
        };
        let probe_table = |s: &mut String, probes: &[ProbeRow]| {
            let _ = writeln!(s, "{:<12} {:>4} {:>10}", "probe", "bits", "ADD-0.1d");
            for p in probes {
                match &p.accuracy {
                    Some(a) => {
                        let _ = writeln!(s, "{:<12} {:>4} {:>10.4}", p.module, p.bits, a.value);
                    }
                    None => {
                        let _ = writeln!(s, "{:<12} {:>4} {:>10}", p.module, p.bits, "failed");
                    }
                }
            }
        };
        let plan_table = |s: &mut String, p: &PlanSummary| {
            let _ = writeln!(
                s,
                "budget {}x  achieved {:.4}x  ({} bits)  objective {:.6e}",
                p.budget, p.achieved_compression, p.achieved_size_bits, p.objective
            );
            let _ = writeln!(s, "k_best {}", p.k_best.as_deref().unwrap_or("-"));
            let _ = writeln!(s, "flow   {}", p.flow.join(" -> "));
            let _ = writeln!(s, "{:<12} {:>8} {:>4}", "module", "params", "bits");
            for m in &p.modules {
                let _ = writeln!(s, "{:<12} {:>8} {:>4}", m.name, m.params, m.bits);
            }
        };
        match &self.body {
            ReportBody::Pretrain { metrics } => metrics_line(&mut s, "pretrained", metrics),
            ReportBody::Probe {
                baseline,
                probes,
                k_best,
            } => {
                metrics_line(&mut s, "baseline", baseline);
                probe_table(&mut s, probes);
                let _ = writeln!(s, "k_best {}", k_best.as_deref().unwrap_or("-"));
            }
            ReportBody::Plan { plan, bops } => {
                plan_table(&mut s, plan);
                let _ = writeln!(s, "BOPs   {bops}");
            }
            ReportBody::Run {
                baseline,
                probes,
                plan,
                stages,
                final_metrics,
                compression,
                payload_bits,
                bops,
                total_epochs,
            } => {
                metrics_line(&mut s, "baseline", baseline);
                probe_table(&mut s, probes);
                let _ = writeln!(s);
                plan_table(&mut s, plan);
                let _ = writeln!(s);
                let _ = writeln!(
                    s,
                    "{:<12} {:>4} {:>10} {:>12} {:>8}",
                    "stage", "bits", "ADD-0.1d", "size_bits", "ratio"
                );
                for st in stages {
                    let _ = writeln!(
                        s,
                        "{:<12} {:>4} {:>10.4} {:>12} {:>8.3}",
                        st.module, st.bits, st.metrics.add_01d.value, st.size_bits, st.compression
                    );
                }
                metrics_line(&mut s, "final", final_metrics);
                let _ = writeln!(
                    s,
                    "compression  {compression:.4}x ({payload_bits} payload bits)"
                );
                let _ = writeln!(s, "BOPs         {bops}");
                let _ = writeln!(s, "epochs       {total_epochs}");
            }
            ReportBody::FlowSearch { baseline, rows } => {
                metrics_line(&mut s, "baseline", baseline);
                let _ = writeln!(s, "{:<32} {:>10}", "quantized modules", "ADD-0.1d");
                for r in rows {
                    let name = if r.modules.is_empty() {
                        "(none)".to_string()
                    } else {
                        r.modules.join("+")
                    };
                    let _ = writeln!(s, "{:<32} {:>10.4}", name, r.accuracy.value);
                }
            }
            ReportBody::BitSweep { rows } => {
                let _ = writeln!(
                    s,
                    "{:<12} {:>4} {:>10} {:>10}",
                    "module", "bits", "ADI-0.1d", "ADD-0.1d"
                );
                for r in rows {
                    let _ = writeln!(
                        s,
                        "{:<12} {:>4} {:>10.4} {:>10.4}",
                        r.module, r.bits, r.metrics.adi_01d.value, r.metrics.add_01d.value
                    );
                }
            }
            ReportBody::Compare { rows } => {
                let _ = writeln!(
                    s,
                    "{:>7} {:<14} {:>8} {:>7} {:>10}",
                    "budget", "method", "ratio", "epochs", "ADD-0.1d"
                );
                for r in rows {
                    let _ = writeln!(
                        s,
                        "{:>7} {:<14} {:>8.3} {:>7} {:>10.4}",
                        r.budget, r.method, r.compression, r.epochs, r.metrics.add_01d.value
                    );
                }
            }
            ReportBody::Eval {
                metrics,
                modules,
                compression,
                payload_bits,
            } => {
                metrics_line(&mut s, "eval", metrics);
                for m in modules {
                    let _ = writeln!(s, "{:<12} {:>8} {:>4}", m.name, m.params, m.bits);
                }
                let _ = writeln!(
                    s,
                    "compression  {compression:.4}x ({payload_bits} payload bits)"
                );
            }
        }
        s
    }

    /// `(x, y, series)` triples: bits vs ADI-0.1d for a bit sweep,
    /// compression vs ADD-0.1d for comparisons and run stages.
    pub fn plot_rows(&self) -> Vec<(f64, f64, String)> {
        match &self.body {
            ReportBody::BitSweep { rows } => rows
                .iter()
                .map(|r| (r.bits as f64, r.metrics.adi_01d.value, r.module.clone()))
                .collect(),
            ReportBody::Compare { rows } => rows
                .iter()
                .map(|r| (r.compression, r.metrics.add_01d.value, r.method.clone()))
                .collect(),
            ReportBody::FlowSearch { rows, .. } => rows
                .iter()
                .map(|r| {
                    let label = if r.modules.is_empty() {
                        "none".to_string()
                    } else {
                        r.modules.join("+")
                    };
                    (r.modules.len() as f64, r.accuracy.value, label)
                })
                .collect(),
            ReportBody::Run { stages, .. } => stages
                .iter()
                .map(|st| {
                    (
                        st.compression,
                        st.metrics.add_01d.value,
                        "mqat-stages".to_string(),
                    )
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn plot_csv(&self) -> Option<String> {
        let rows = self.plot_rows();
        if rows.is_empty() {
            return None;
        }
        let (x, y) = match &self.body {
            ReportBody::BitSweep { .. } => ("bits", "ADI-0.1d"),
            ReportBody::FlowSearch { .. } => ("quantized modules", "ADD-0.1d"),
            _ => ("compression", "ADD-0.1d"),
        };
        let mut s = format!("x,y,series\n# x={x} y={y}\n");
        for (x, y, series) in rows {
            let _ = writeln!(s, "{x},{y},{series}");
        }
        Some(s)
    }
}

/// Module rows for a model's current quantization state.
pub fn module_rows(model: &ModularModel) -> Vec<ModuleRow> {
    model
        .module_ids()
        .map(|k| {
            let layers = model.module_layers(k);
            let bits = layers
                .iter()
                .map(|&l| model.quant_state(l).storage_bits())
                .max()
                .unwrap_or(32);
            ModuleRow {
                name: model.module_name(k).to_string(),
                params: layers.iter().map(|&l| model.param(l).len() as u64).sum(),
                bits,
            }
        })
        .collect()
}

pub fn progress_jsonl(log: &[ProgressRecord]) -> Result<String> {
    let mut s = String::new();
    for r in log {
        s.push_str(&serde_json::to_string(r).map_err(|e| MqatError::Format(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

/// Writes `report.json`, `report.txt`, `plotdata.csv` (when the report has
/// plot data) and `progress.jsonl` into `dir`. Returns the written paths.
pub fn emit_report(dir: &Path, report: &Report) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        out.push(p);
        Ok(())
    };
    put("report.json", &report.to_json()?)?;
    put("report.txt", &report.to_table())?;
    if let Some(csv) = report.plot_csv() {
        put("plotdata.csv", &csv)?;
    }
    put("progress.jsonl", &progress_jsonl(&report.trace)?)?;
    Ok(out)
}
