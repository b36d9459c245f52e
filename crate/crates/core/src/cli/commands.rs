//! Command implementations shared by the binary and by manifest replay.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DataKind, ExperimentConfig, Resolved};
use crate::channel::digital::digital_infer_frame;
use crate::channel::{ChannelSpec, QuantizerSpec};
use crate::datapipe::{save_archive, ArchiveHeader, DomainDataset};
use crate::error::{Error, Result};
use crate::evalkit::{confusion_matrix, cr_sweep, plot_confusion, plot_sweep, snr_sweep, Axis, Method, SweepResult};
use crate::model::{load_checkpoint_for, save_checkpoint, ModelConfig, ModelParams};
use crate::rng::{substream, Stream};
use crate::trainer::{evaluate, train_step1, train_step2, TrainPlan};

pub const MANIFEST: &str = "manifest";

/// A fully specified unit of work. Stored in the manifest so that a run can
/// be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Synth,
    TrainUda,
    FinetuneKd {
        checkpoint: PathBuf,
    },
    Eval {
        method: Method,
        /// Evaluate this checkpoint instead of training the method's pipeline.
        checkpoint: Option<PathBuf>,
    },
    Sweep {
        axis: Axis,
        from: f64,
        to: f64,
        step: f64,
        methods: Vec<Method>,
        seeds: Vec<u64>,
        jobs: usize,
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub job: Job,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

struct Layout {
    checkpoints: PathBuf,
    metrics: PathBuf,
    plots: PathBuf,
}

fn prepare_output(config: &ExperimentConfig, job: &Job) -> Result<Layout> {
    let root = &config.output;
    let layout = Layout {
        checkpoints: root.join("checkpoints"),
        metrics: root.join("metrics"),
        plots: root.join("plots"),
    };
    for dir in [&layout.checkpoints, &layout.metrics, &layout.plots] {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        job: job.clone(),
        config: config.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let path = root.join(MANIFEST);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(layout)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fresh_model(model: &ModelConfig, plan: &TrainPlan) -> Result<ModelParams> {
    ModelParams::init(model, plan.lr0, plan.seed)
}

/// Models produced by the three deployment pipelines for one seed.
struct Pipelines {
    source_only: Option<ModelParams>,
    adapted: Option<ModelParams>,
}

fn source_only(r: &Resolved, s: &DomainDataset, t: &DomainDataset) -> Result<(ModelParams, String)> {
    let mut plan = r.plan.clone();
    plan.weights.lambda = 0.0;
    let out = train_step1(&plan, s, t, fresh_model(&r.model, &plan)?, &r.source_channel)?;
    Ok((out.params, out.log.to_csv()?))
}

fn adapted(r: &Resolved, s: &DomainDataset, t: &DomainDataset) -> Result<(ModelParams, String)> {
    let out = train_step1(&r.plan, s, t, fresh_model(&r.model, &r.plan)?, &r.source_channel)?;
    Ok((out.params, out.log.to_csv()?))
}

fn finetuned(
    r: &Resolved,
    s: &DomainDataset,
    t: &DomainDataset,
    theta_t: &ModelParams,
    target: &ChannelSpec,
) -> Result<(ModelParams, String)> {
    let out = train_step2(&r.plan, s, t, theta_t, &r.source_channel, target)?;
    debug_assert_eq!(out.teacher_checksum_before, out.teacher_checksum_after);
    Ok((out.student, out.log.to_csv()?))
}

fn with_snr(channel: &ChannelSpec, snr: f64) -> Result<ChannelSpec> {
    ChannelSpec::uniform(snr, channel.k_devices(), channel.mode(), channel.quantizer().cloned())
}

/// Human-readable summary lines of a finished job.
pub type Report = Vec<String>;

pub fn run_job(config: &ExperimentConfig, job: &Job) -> Result<Report> {
    let resolved = config.resolve()?;
    let layout = prepare_output(config, job)?;
    match job {
        Job::Synth => cmd_synth(config),
        Job::TrainUda => cmd_train_uda(config, &resolved, &layout),
        Job::FinetuneKd { checkpoint } => cmd_finetune_kd(config, &resolved, &layout, checkpoint),
        Job::Eval { method, checkpoint } => cmd_eval(config, &resolved, &layout, *method, checkpoint.as_deref()),
        Job::Sweep { .. } => cmd_sweep(config, &resolved, &layout, job),
    }
}

/// Re-runs a manifest, optionally into a different output directory.
pub fn replay(manifest: &Path, output: Option<PathBuf>) -> Result<Report> {
    let m = Manifest::load(manifest)?;
    let mut config = m.config;
    if let Some(o) = output {
        config.output = o;
    }
    run_job(&config, &m.job)
}

fn cmd_synth(config: &ExperimentConfig) -> Result<Report> {
    if config.data.kind != DataKind::Synthetic {
        return Err(Error::Config("synth needs data.kind = \"synthetic\"".into()));
    }
    let (s, t) = config.load_datasets()?;
    let dir = config.output.join("data");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("synth.semd");
    let header = ArchiveHeader {
        seed: config.seed,
        spec: config.synth_spec(),
        n_per_class: config.data.n_per_class,
        classes: s.class_count(),
        k_devices: s.k_devices(),
    };
    save_archive(&path, &header, &s, &t)?;
    Ok(vec![format!(
        "wrote {} ({} source / {} target samples, {} views each)",
        path.display(),
        s.len(),
        t.len(),
        s.k_devices()
    )])
}

fn accuracy_line(label: &str, params: &ModelParams, data: &DomainDataset, ch: &ChannelSpec, r: &Resolved) -> Result<String> {
    let e = evaluate(params, data, ch, r.plan.eval_draws, r.plan.seed)?;
    Ok(format!(
        "{label} at {} dB: {:.2}% ± {:.2}",
        ch.snr_db()[0],
        100.0 * e.mean,
        100.0 * e.std
    ))
}

fn cmd_train_uda(config: &ExperimentConfig, r: &Resolved, layout: &Layout) -> Result<Report> {
    let (s, t) = config.load_datasets()?;
    let (params, csv) = adapted(r, &s, &t)?;
    write_text(&layout.metrics.join("step1.csv"), &csv)?;
    let ckpt = layout.checkpoints.join("theta_t.ckpt");
    save_checkpoint(&ckpt, &params, r.plan.seed)?;
    Ok(vec![
        format!("wrote {}", ckpt.display()),
        accuracy_line("source", &params, &s, &r.source_channel, r)?,
        accuracy_line("target", &params, &t, &r.source_channel, r)?,
    ])
}

fn cmd_finetune_kd(config: &ExperimentConfig, r: &Resolved, layout: &Layout, checkpoint: &Path) -> Result<Report> {
    let (theta_t, _) = load_checkpoint_for(checkpoint, &r.model)?;
    let (s, t) = config.load_datasets()?;
    let (student, csv) = finetuned(r, &s, &t, &theta_t, &r.target_channel)?;
    write_text(&layout.metrics.join("step2.csv"), &csv)?;
    let ckpt = layout.checkpoints.join("theta_st.ckpt");
    save_checkpoint(&ckpt, &student, r.plan.seed)?;
    Ok(vec![
        format!("wrote {}", ckpt.display()),
        accuracy_line("target (teacher)", &theta_t, &t, &r.target_channel, r)?,
        accuracy_line("target (student)", &student, &t, &r.target_channel, r)?,
    ])
}

fn method_slug(m: Method) -> &'static str {
    match m {
        Method::Dasein => "dasein",
        Method::DaseinS1 => "dasein-s1",
        Method::TestD => "test-d",
    }
}

fn cmd_eval(
    config: &ExperimentConfig,
    r: &Resolved,
    layout: &Layout,
    method: Method,
    checkpoint: Option<&Path>,
) -> Result<Report> {
    let (s, t) = config.load_datasets()?;
    let params = match checkpoint {
        Some(p) => load_checkpoint_for(p, &r.model)?.0,
        None => {
            let (p, csv) = match method {
                Method::TestD => source_only(r, &s, &t)?,
                Method::DaseinS1 | Method::Dasein => adapted(r, &s, &t)?,
            };
            write_text(&layout.metrics.join("step1.csv"), &csv)?;
            save_checkpoint(&layout.checkpoints.join("theta_t.ckpt"), &p, r.plan.seed)?;
            if method == Method::Dasein {
                let (p2, csv2) = finetuned(r, &s, &t, &p, &r.target_channel)?;
                write_text(&layout.metrics.join("step2.csv"), &csv2)?;
                save_checkpoint(&layout.checkpoints.join("theta_st.ckpt"), &p2, r.plan.seed)?;
                p2
            } else {
                p
            }
        }
    };
    let slug = method_slug(method);
    let report = evaluate(&params, &t, &r.target_channel, r.plan.eval_draws, r.plan.seed)?;
    let mut csv = String::from("method,snr_db,draw,accuracy\n");
    for (d, a) in report.per_draw.iter().enumerate() {
        let _ = writeln!(csv, "{method},{},{d},{a}", r.target_channel.snr_db()[0]);
    }
    write_text(&layout.metrics.join(format!("eval_{slug}.csv")), &csv)?;
    let truth = t.truths().ok_or_else(|| Error::Data("target dataset has no evaluation labels".into()))?;
    let cm = confusion_matrix(&report.predictions, &truth, t.class_count())?;
    cm.write_csv(&layout.metrics.join(format!("confusion_{slug}.csv")))?;
    plot_confusion(&cm, &layout.plots.join(format!("confusion_{slug}.png")))?;
    Ok(vec![format!(
        "{method} target accuracy at {} dB: {:.2}% ± {:.2} over {} noise draws",
        r.target_channel.snr_db()[0],
        100.0 * report.mean,
        100.0 * report.std,
        report.per_draw.len()
    )])
}

fn seeded(r: &Resolved, seed: u64) -> Resolved {
    let mut out = r.clone();
    out.plan.seed = seed;
    out
}

fn cmd_sweep(config: &ExperimentConfig, r: &Resolved, layout: &Layout, job: &Job) -> Result<Report> {
    let Job::Sweep {
        axis,
        from,
        to,
        step,
        methods,
        seeds,
        jobs,
        name,
    } = job
    else {
        unreachable!("cmd_sweep called with another job")
    };
    let points = crate::evalkit::axis_range(*from, *to, *step)?;
    let (s, t) = config.load_datasets()?;
    let draws = r.plan.eval_draws;
    let eval_at = |p: &ModelParams, ch: &ChannelSpec, seed: u64| -> Result<Vec<f64>> {
        Ok(evaluate(p, &t, ch, draws, seed)?.per_draw)
    };
    let result: SweepResult = match axis {
        Axis::Snr => {
            // source-side models do not depend on the target SNR: train once per seed
            let need_src = methods.contains(&Method::TestD);
            let need_s1 = methods.iter().any(|m| *m != Method::TestD);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads((*jobs).max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let base: Vec<Pipelines> = pool.install(|| {
                use rayon::prelude::*;
                seeds
                    .par_iter()
                    .map(|&seed| {
                        let rs = seeded(r, seed);
                        Ok(Pipelines {
                            source_only: need_src.then(|| source_only(&rs, &s, &t).map(|x| x.0)).transpose()?,
                            adapted: need_s1.then(|| adapted(&rs, &s, &t).map(|x| x.0)).transpose()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let by_seed: BTreeMap<u64, &Pipelines> = seeds.iter().copied().zip(base.iter()).collect();
            snr_sweep(name, &points, methods, seeds, *jobs, |method, snr, seed| {
                let rs = seeded(r, seed);
                let ch = with_snr(&r.target_channel, snr)?;
                let p = by_seed[&seed];
                match method {
                    Method::TestD => eval_at(p.source_only.as_ref().expect("trained"), &ch, seed),
                    Method::DaseinS1 => eval_at(p.adapted.as_ref().expect("trained"), &ch, seed),
                    Method::Dasein => {
                        let (st, _) = finetuned(&rs, &s, &t, p.adapted.as_ref().expect("trained"), &ch)?;
                        eval_at(&st, &ch, seed)
                    }
                }
            })?
        }
        Axis::Cr => cr_sweep(name, &points, methods, seeds, *jobs, |method, cr, seed| {
            let mut rs = seeded(r, seed);
            rs.model.cr = cr;
            rs.model.validate()?;
            match method {
                Method::TestD => eval_at(&source_only(&rs, &s, &t)?.0, &r.target_channel, seed),
                Method::DaseinS1 => eval_at(&adapted(&rs, &s, &t)?.0, &r.target_channel, seed),
                Method::Dasein => {
                    let (p, _) = adapted(&rs, &s, &t)?;
                    let (st, _) = finetuned(&rs, &s, &t, &p, &r.target_channel)?;
                    eval_at(&st, &r.target_channel, seed)
                }
            }
        })?,
    };
    let csv = result.write_csv(&layout.metrics)?;
    plot_sweep(&result, &layout.plots.join(format!("sweep_{name}.png")))?;
    let mut report = vec![format!("wrote {}", csv.display())];
    for p in result.points() {
        report.push(format!("{:>10} {:>8} {:6.2}% ± {:.2}", p.method.to_string(), p.axis, 100.0 * p.mean, 100.0 * p.std));
    }
    Ok(report)
}

/// Dumps the digital chain for one feature vector as a table.
pub fn digital_debug(values: &[f64], spec: &QuantizerSpec, snr_db: Option<f64>, seed: u64) -> Result<String> {
    spec.validate()?;
    let sigma = match snr_db {
        Some(snr) => crate::channel::snr_to_sigma(snr, 1.0)?,
        None => 0.0,
    };
    let mut rng = substream(seed, Stream::Channel { phase: 99, device: 0 });
    let frame = digital_infer_frame(values, spec, sigma, &mut rng)?;
    let qb = spec.q_b as usize;
    let mut out = String::new();
    let _ = writeln!(out, "value      index  bits       symbols                    received                   rx_bits    recon");
    for (i, &v) in values.iter().enumerate() {
        let bits: String = frame.bits[i * qb..(i + 1) * qb].iter().map(|b| char::from(b'0' + b)).collect();
        let rx_bits: String = frame.received_bits[i * qb..(i + 1) * qb]
            .iter()
            .map(|b| char::from(b'0' + b))
            .collect();
        // symbols carrying this entry's bits
        let first = i * qb / 2;
        let last = ((i + 1) * qb).div_ceil(2);
        let fmt_c = |c: &num_complex::Complex64| format!("{:+.3}{:+.3}j", c.re, c.im);
        let syms: Vec<String> = frame.symbols[first..last].iter().map(fmt_c).collect();
        let rx: Vec<String> = frame.received[first..last].iter().map(fmt_c).collect();
        let _ = writeln!(
            out,
            "{v:<10.4} {:<6} {bits:<10} {:<26} {:<26} {rx_bits:<10} {:.4}",
            frame.indices[i],
            syms.join(" "),
            rx.join(" "),
            frame.reconstruction[i]
        );
    }
    Ok(out)
}
