use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mqat::io::{
    checkpoint_compression, emit_report, load_checkpoint, module_rows, parse_config, payload_bits,
    save_checkpoint, save_dataset, write_atomic, PlanSummary, ProbeRow, Report, ReportBody,
    SubsetRow,
};
use mqat::planner::{bops_estimate, normalize_bits, QuantPlan};
use mqat::pose::ModularModel;
use mqat::sensitivity::importance_table;
use mqat::trainer::{
    accuracy, bit_sweep, compare, flow_search, mqat_run, pretrain, probe_step, profile_model,
    Datasets, RunConfig,
};
use mqat::{MqatError, Result};

#[derive(Parser)]
#[command(
    name = "mqat",
    version,
    about = "Modular quantization-aware training on a toy 6D pose task"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FromPretrained {
    #[command(flatten)]
    common: Common,
    /// Full-precision checkpoint; pretrains from the config when omitted.
    #[arg(short, long)]
    pretrained: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the full-precision model.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Also write the generated splits as MQTD files.
        #[arg(long)]
        export_data: bool,
    },
    /// Quantize each module alone to 2 bits and pick the best one.
    Probe(FromPretrained),
    /// Probe, sensitivities and bit allocation; writes plan.toml.
    Plan(FromPretrained),
    /// Full MQAT run; writes model.mqck and plan.toml.
    Run(FromPretrained),
    /// Every subset of modules quantized together to 2 bits.
    Flowsearch(FromPretrained),
    /// Each module alone at each width.
    Bitsweep {
        #[command(flatten)]
        inner: FromPretrained,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,8")]
        bits: Vec<u8>,
    },
    /// MQAT against uniform and layer-wise LSQ at matched budgets and epochs.
    Compare {
        #[command(flatten)]
        inner: FromPretrained,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        budgets: Vec<f64>,
    },
    /// Evaluate a checkpoint on the validation split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Re-render report.txt and plotdata.csv from a report.json.
    Report {
        /// report.json to read.
        input: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

fn exit_code(e: &MqatError) -> u8 {
    match e {
        MqatError::Config { .. } => 2,
        MqatError::Infeasible { .. } => 3,
        MqatError::Divergence { .. } => 4,
        _ => 1,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MQAT_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            MqatError::config("MQAT_THREADS", format!("`{v}` is not a positive integer"))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| MqatError::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

struct Setup {
    config: RunConfig,
    data: Datasets,
    out: PathBuf,
}

fn setup(common: &Common) -> Result<Setup> {
    let config = parse_config(&common.config)?;
    let data = Datasets::generate(&config)?;
    std::fs::create_dir_all(&common.out)?;
    Ok(Setup {
        config,
        data,
        out: common.out.clone(),
    })
}

fn pretrained_model(s: &Setup, path: Option<&Path>) -> Result<ModularModel> {
    match path {
        Some(p) => load_checkpoint(p),
        None => {
            eprintln!("pretraining ({} epochs)", s.config.pretrain_epochs);
            let (m, r) = pretrain(&s.config, &s.data)?;
            eprintln!("pretrained ADD-0.1d {:.4}", r.accuracy());
            Ok(m)
        }
    }
}

fn finish(s: &Setup, report: Report) -> Result<()> {
    let files = emit_report(&s.out, &report)?;
    print!("{}", report.to_table());
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn write_plan(s: &Setup, model: &ModularModel, plan: &QuantPlan, bops: u64) -> Result<()> {
    let text = plan.to_toml(&model.module_sizes(), Some(bops))?;
    write_atomic(&s.out.join("plan.toml"), text.as_bytes())
}

fn plan_bops(model: &ModularModel, plan: &QuantPlan) -> Result<u64> {
    let bits: Vec<u8> = model
        .layers()
        .iter()
        .map(|l| plan.bits.get(&l.module).copied().unwrap_or(32))
        .collect();
    bops_estimate(&model.layer_macs(), &bits, 32)
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Pretrain {
            common,
            export_data,
        } => {
            let s = setup(&common)?;
            let (model, r) = pretrain(&s.config, &s.data)?;
            save_checkpoint(&s.out.join("pretrained.mqck"), &model)?;
            if export_data {
                save_dataset(&s.out.join("train.mqtd"), &s.data.train)?;
                save_dataset(&s.out.join("val.mqtd"), &s.data.val)?;
                save_dataset(&s.out.join("calibration.mqtd"), &s.data.calibration)?;
            }
            finish(
                &s,
                Report::new(
                    "pretrain",
                    &s.config,
                    ReportBody::Pretrain { metrics: r.metrics },
                    r.log,
                ),
            )
        }
        Command::Probe(a) => {
            let s = setup(&a.common)?;
            let m = pretrained_model(&s, a.pretrained.as_deref())?;
            let p = probe_step(&s.config, &m, &s.data)?;
            let sizes = m.module_sizes();
            let body = ReportBody::Probe {
                baseline: p.baseline,
                probes: ProbeRow::rows(&p.outcomes, &sizes),
                k_best: p.best.as_ref().map(|b| sizes.name(b.0).to_string()),
            };
            finish(&s, Report::new("probe", &s.config, body, p.log))
        }
        Command::Plan(a) => {
            let s = setup(&a.common)?;
            let m = pretrained_model(&s, a.pretrained.as_deref())?;
            let p = probe_step(&s.config, &m, &s.data)?;
            let k_best = p.best.as_ref().map(|b| b.0);
            // λ from the pretrained weights, quantization error from the
            // model the flow starts from
            let mut profile = profile_model(&s.config, &m, &s.data)?;
            if let Some((_, current)) = &p.best {
                importance_table(current, &mut profile, &normalize_bits(&s.config.bits)?)?;
            }
            let sizes = m.module_sizes();
            let plan = QuantPlan::build(
                &sizes,
                &profile.omega,
                &s.config.bits,
                s.config.budget,
                k_best,
            )?;
            let bops = plan_bops(&m, &plan)?;
            write_plan(&s, &m, &plan, bops)?;
            write_atomic(&s.out.join("profile.toml"), profile.to_toml()?.as_bytes())?;
            let body = ReportBody::Plan {
                plan: PlanSummary::new(&plan, &sizes),
                bops,
            };
            finish(&s, Report::new("plan", &s.config, body, p.log))
        }
        Command::Run(a) => {
            let s = setup(&a.common)?;
            let m = pretrained_model(&s, a.pretrained.as_deref())?;
            let out = mqat_run(&s.config, &m, &s.data)?;
            let sizes = m.module_sizes();
            save_checkpoint(&s.out.join("model.mqck"), &out.model)?;
            write_plan(&s, &m, &out.plan, out.bops)?;
            if let Some(p) = &out.profile {
                write_atomic(&s.out.join("profile.toml"), p.to_toml()?.as_bytes())?;
            }
            let body = ReportBody::Run {
                baseline: out.baseline,
                probes: ProbeRow::rows(&out.probes, &sizes),
                plan: PlanSummary::new(&out.plan, &sizes),
                stages: out.stages,
                final_metrics: out.final_metrics,
                compression: checkpoint_compression(&out.model),
                payload_bits: payload_bits(&out.model),
                bops: out.bops,
                total_epochs: out.total_epochs,
            };
            finish(&s, Report::new("run", &s.config, body, out.log))
        }
        Command::Flowsearch(a) => {
            let s = setup(&a.common)?;
            let m = pretrained_model(&s, a.pretrained.as_deref())?;
            let (baseline, rows) = flow_search(&s.config, &m, &s.data)?;
            let body = ReportBody::FlowSearch {
                baseline,
                rows: SubsetRow::rows(&rows, &m.module_sizes()),
            };
            finish(&s, Report::new("flowsearch", &s.config, body, Vec::new()))
        }
        Command::Bitsweep { inner, bits } => {
            let s = setup(&inner.common)?;
            let m = pretrained_model(&s, inner.pretrained.as_deref())?;
            let rows = bit_sweep(&s.config, &m, &s.data, &bits)?;
            finish(
                &s,
                Report::new(
                    "bitsweep",
                    &s.config,
                    ReportBody::BitSweep { rows },
                    Vec::new(),
                ),
            )
        }
        Command::Compare { inner, budgets } => {
            let s = setup(&inner.common)?;
            let m = pretrained_model(&s, inner.pretrained.as_deref())?;
            let rows = compare(&s.config, &m, &s.data, &budgets)?;
            finish(
                &s,
                Report::new(
                    "compare",
                    &s.config,
                    ReportBody::Compare { rows },
                    Vec::new(),
                ),
            )
        }
        Command::Eval { common, checkpoint } => {
            let s = setup(&common)?;
            let m = load_checkpoint(&checkpoint)?;
            let body = ReportBody::Eval {
                metrics: accuracy(&m, &s.data)?,
                modules: module_rows(&m),
                compression: checkpoint_compression(&m),
                payload_bits: payload_bits(&m),
            };
            finish(&s, Report::new("eval", &s.config, body, Vec::new()))
        }
        Command::Report { input, out } => {
            let text = std::fs::read_to_string(&input)?;
            let report = Report::from_json(&text)?;
            std::fs::create_dir_all(&out)?;
            write_atomic(&out.join("report.txt"), report.to_table().as_bytes())?;
            if let Some(csv) = report.plot_csv() {
                write_atomic(&out.join("plotdata.csv"), csv.as_bytes())?;
            }
            print!("{}", report.to_table());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
