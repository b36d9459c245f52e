use rand_chacha::ChaCha8Rng;

use super::eval::evaluate;
use super::metrics::{EpochMetrics, MetricLog};
use super::optim::{lr_anneal, sgd_step, Momentum};
use super::plan::TrainPlan;
use crate::channel::ChannelSpec;
use crate::datapipe::{make_paired_loader, DomainDataset, MultiViewSample};
use crate::error::{Error, Result};
use crate::losses::{loss_step1, loss_step2, DomainOutputs, LossBreakdown, LossOptions, LossWeights};
use crate::model::{
    backward_sample, draw_link_noise, forward_sample, softmax_backward, GroupId, Link, ModelGrads, ModelParams,
    PredictionDist, SampleTrace,
};
use crate::rng::{mix, substream, Stream};

const STEP1_PHASE: u32 = 1;
const STUDENT_PHASE: u32 = 2;
const TEACHER_PHASE: u32 = 3;
const CURVE_SEED_TAG: u64 = 0xC0_0000;

/// Standard-normal link noise for every sample of a batch, indexed
/// `[sample][device][entry]`.
pub type BatchNoise = Vec<Vec<Vec<f64>>>;

pub fn draw_batch_noise(rngs: &mut [ChaCha8Rng], samples: usize, a_out: usize) -> BatchNoise {
    (0..samples).map(|_| draw_link_noise(rngs, a_out)).collect()
}

fn channel_rngs(seed: u64, phase: u32, k: usize) -> Vec<ChaCha8Rng> {
    (0..k)
        .map(|d| {
            substream(
                seed,
                Stream::Channel {
                    phase,
                    device: d as u32,
                },
            )
        })
        .collect()
}

fn forward_batch(
    params: &ModelParams,
    samples: &[&MultiViewSample],
    channel: &ChannelSpec,
    noise: &BatchNoise,
) -> Result<Vec<SampleTrace>> {
    if noise.len() != samples.len() {
        return Err(Error::Dimension("one noise draw per sample is required".into()));
    }
    samples
        .iter()
        .zip(noise)
        .map(|(s, n)| forward_sample(params, s.views(), channel, Link::Train(n)))
        .collect()
}

fn outputs(traces: &[SampleTrace]) -> (Vec<Vec<f64>>, Vec<PredictionDist>) {
    traces
        .iter()
        .map(|t| (t.received.clone(), t.prediction.clone()))
        .unzip()
}

fn backward_batch(
    params: &ModelParams,
    samples: &[&MultiViewSample],
    traces: &[SampleTrace],
    d_probs: &[Vec<f64>],
    d_features: &[Vec<f64>],
    grads: &mut ModelGrads,
) {
    for (((s, t), dp), df) in samples.iter().zip(traces).zip(d_probs).zip(d_features) {
        let d_logits = softmax_backward(t.prediction.probs(), dp);
        backward_sample(params, s.views(), t, &d_logits, Some(df), grads);
    }
}

/// Step-1 objective and its exact parameter gradient for one batch under
/// fixed link noise.
#[allow(clippy::too_many_arguments)]
pub fn step1_objective(
    params: &ModelParams,
    source: &[&MultiViewSample],
    labels: &[usize],
    target: &[&MultiViewSample],
    channel: &ChannelSpec,
    source_noise: &BatchNoise,
    target_noise: &BatchNoise,
    weights: &LossWeights,
    options: &LossOptions,
    epoch: usize,
    epochs: usize,
) -> Result<(LossBreakdown, ModelGrads)> {
    let st = forward_batch(params, source, channel, source_noise)?;
    let tt = forward_batch(params, target, channel, target_noise)?;
    let (sf, sp) = outputs(&st);
    let (tf, tp) = outputs(&tt);
    let loss = loss_step1(
        DomainOutputs {
            features: &sf,
            preds: &sp,
        },
        labels,
        DomainOutputs {
            features: &tf,
            preds: &tp,
        },
        weights,
        options,
        epoch,
        epochs,
    )?;
    let mut grads = ModelGrads::zeros_like(params);
    backward_batch(params, source, &st, &loss.d_source_probs, &loss.d_source_features, &mut grads);
    backward_batch(params, target, &tt, &loss.d_target_probs, &loss.d_target_features, &mut grads);
    Ok((loss, grads))
}

/// Teacher soft labels for a batch of target samples.
pub fn teacher_predictions(
    teacher: &ModelParams,
    target: &[&MultiViewSample],
    channel: &ChannelSpec,
    noise: &BatchNoise,
) -> Result<Vec<PredictionDist>> {
    Ok(forward_batch(teacher, target, channel, noise)?
        .into_iter()
        .map(|t| t.prediction)
        .collect())
}

/// Step-2 objective of the student and its gradient; the teacher's
/// predictions enter as constants.
#[allow(clippy::too_many_arguments)]
pub fn step2_objective(
    student: &ModelParams,
    source: &[&MultiViewSample],
    labels: &[usize],
    target: &[&MultiViewSample],
    channel: &ChannelSpec,
    source_noise: &BatchNoise,
    target_noise: &BatchNoise,
    teacher_target: &[PredictionDist],
    weights: &LossWeights,
    options: &LossOptions,
) -> Result<(LossBreakdown, ModelGrads)> {
    let st = forward_batch(student, source, channel, source_noise)?;
    let tt = forward_batch(student, target, channel, target_noise)?;
    let (sf, sp) = outputs(&st);
    let (tf, tp) = outputs(&tt);
    let loss = loss_step2(
        DomainOutputs {
            features: &sf,
            preds: &sp,
        },
        labels,
        DomainOutputs {
            features: &tf,
            preds: &tp,
        },
        teacher_target,
        weights,
        options,
    )?;
    let mut grads = ModelGrads::zeros_like(student);
    backward_batch(student, source, &st, &loss.d_source_probs, &loss.d_source_features, &mut grads);
    backward_batch(student, target, &tt, &loss.d_target_probs, &loss.d_target_features, &mut grads);
    Ok((loss, grads))
}

/// Result of one training phase.
#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub params: ModelParams,
    pub log: MetricLog,
}

/// Result of step 2, with the teacher checksums taken before and after.
#[derive(Debug, Clone)]
pub struct Step2Outcome {
    pub student: ModelParams,
    pub log: MetricLog,
    pub teacher_checksum_before: u32,
    pub teacher_checksum_after: u32,
}

fn check_inputs(plan: &TrainPlan, source: &DomainDataset, target: &DomainDataset, params: &ModelParams) -> Result<()> {
    plan.validate()?;
    if source.class_count() != params.config.classes || target.class_count() != params.config.classes {
        return Err(Error::Config("dataset class count differs from the model".into()));
    }
    if source.k_devices() != params.config.k_devices || target.k_devices() != params.config.k_devices {
        return Err(Error::Config("dataset view count differs from the model's device count".into()));
    }
    let shape = params.config.view_shape;
    if source.view_shape() != Some(shape) || target.view_shape() != Some(shape) {
        return Err(Error::Config(format!("dataset views do not match model view shape {shape:?}")));
    }
    Ok(())
}

fn epoch_rates(plan: &TrainPlan, e: usize, total: usize) -> [f64; 3] {
    GroupId::ALL.map(|id| lr_anneal(plan.lr0.get(id), e, total))
}

fn ensure_finite(loss: &LossBreakdown, grads: &ModelGrads, phase: u8, epoch: usize, batch: usize) -> Result<()> {
    if !loss.total.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite(format!(
            "phase {phase} epoch {epoch} batch {batch}: loss {} (ce {}, uda {}, kd {})",
            loss.total, loss.ce, loss.uda, loss.kd
        )));
    }
    Ok(())
}

#[derive(Default)]
struct Running {
    ce: f64,
    uda: f64,
    kd: f64,
    n: usize,
}

impl Running {
    fn add(&mut self, l: &LossBreakdown) {
        self.ce += l.ce;
        self.uda += l.uda;
        self.kd += l.kd;
        self.n += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn epoch_row(
    plan: &TrainPlan,
    params: &ModelParams,
    source: &DomainDataset,
    target: &DomainDataset,
    channel: &ChannelSpec,
    phase: u8,
    epoch: usize,
    delta: f64,
    lr: [f64; 3],
    run: &Running,
) -> Result<EpochMetrics> {
    let curve_seed = mix(plan.seed, CURVE_SEED_TAG + ((phase as u64) << 16) + epoch as u64);
    let (source_acc, target_acc) = if plan.curve_draws == 0 {
        (None, None)
    } else {
        let s = evaluate(params, source, channel, plan.curve_draws, curve_seed)?.mean;
        let t = match target.truths() {
            Some(_) => Some(evaluate(params, target, channel, plan.curve_draws, curve_seed)?.mean),
            None => None,
        };
        (Some(s), t)
    };
    let n = run.n.max(1) as f64;
    Ok(EpochMetrics {
        phase,
        epoch,
        l_ce: run.ce / n,
        l_uda: run.uda / n,
        l_kd: run.kd / n,
        delta,
        eta_sre: lr[0],
        eta_cce: lr[1],
        eta_decoder: lr[2],
        source_acc,
        target_acc,
    })
}

fn with_plan_rates(mut params: ModelParams, plan: &TrainPlan) -> ModelParams {
    for id in GroupId::ALL {
        params.group_mut(id).base_lr = plan.lr0.get(id);
    }
    params
}

/// Step 1: class-weighted MMD adaptation under the source channel for `E`
/// full passes over the paired loader.
pub fn train_step1(
    plan: &TrainPlan,
    source: &DomainDataset,
    target: &DomainDataset,
    init: ModelParams,
    channel: &ChannelSpec,
) -> Result<PhaseOutcome> {
    check_inputs(plan, source, target, &init)?;
    let mut params = with_plan_rates(init, plan);
    let a_out = params.config.a_out();
    let mut loader = make_paired_loader(source, target, plan.batch_size, plan.seed)?;
    let mut rngs = channel_rngs(plan.seed, STEP1_PHASE, channel.k_devices());
    let mut state = Momentum::new(&params);
    let mut log = MetricLog::default();
    for e in 0..plan.epochs {
        let lr = epoch_rates(plan, e, plan.epochs);
        let mut run = Running::default();
        let mut delta = 0.0;
        for (b, batch) in loader.next_epoch().into_iter().enumerate() {
            let sn = draw_batch_noise(&mut rngs, batch.source.len(), a_out);
            let tn = draw_batch_noise(&mut rngs, batch.target.len(), a_out);
            let (loss, grads) = step1_objective(
                &params,
                &batch.source,
                &batch.source_labels(),
                &batch.target,
                channel,
                &sn,
                &tn,
                &plan.weights,
                &plan.losses,
                e,
                plan.epochs,
            )?;
            ensure_finite(&loss, &grads, 1, e, b)?;
            delta = loss.delta;
            run.add(&loss);
            sgd_step(&mut params, &grads, lr, plan.momentum, plan.weight_decay, &mut state)?;
        }
        if !params.is_finite() {
            return Err(Error::NonFinite(format!("phase 1 epoch {e}: parameters diverged")));
        }
        log.rows.push(epoch_row(plan, &params, source, target, channel, 1, e, delta, lr, &run)?);
    }
    Ok(PhaseOutcome { params, log })
}

/// Step 2: distillation fine-tuning of a student copy of `theta_t` to the
/// target channel. The frozen teacher forwards under `teacher_channel`.
pub fn train_step2(
    plan: &TrainPlan,
    source: &DomainDataset,
    target: &DomainDataset,
    theta_t: &ModelParams,
    teacher_channel: &ChannelSpec,
    student_channel: &ChannelSpec,
) -> Result<Step2Outcome> {
    check_inputs(plan, source, target, theta_t)?;
    let teacher = theta_t.clone();
    let teacher_checksum_before = teacher.checksum();
    let mut student = with_plan_rates(theta_t.clone(), plan);
    let a_out = student.config.a_out();
    let mut loader = make_paired_loader(source, target, plan.batch_size, mix(plan.seed, 2))?;
    let mut student_rngs = channel_rngs(plan.seed, STUDENT_PHASE, student_channel.k_devices());
    let mut teacher_rngs = channel_rngs(plan.seed, TEACHER_PHASE, teacher_channel.k_devices());
    let mut state = Momentum::new(&student);
    let mut log = MetricLog::default();
    for e in 0..plan.finetune_epochs {
        let lr = epoch_rates(plan, e, plan.finetune_epochs);
        let mut run = Running::default();
        for (b, batch) in loader.next_epoch().into_iter().enumerate() {
            let teacher_noise = draw_batch_noise(&mut teacher_rngs, batch.target.len(), a_out);
            let soft = teacher_predictions(&teacher, &batch.target, teacher_channel, &teacher_noise)?;
            let sn = draw_batch_noise(&mut student_rngs, batch.source.len(), a_out);
            let tn = draw_batch_noise(&mut student_rngs, batch.target.len(), a_out);
            let (loss, grads) = step2_objective(
                &student,
                &batch.source,
                &batch.source_labels(),
                &batch.target,
                student_channel,
                &sn,
                &tn,
                &soft,
                &plan.weights,
                &plan.losses,
            )?;
            ensure_finite(&loss, &grads, 2, e, b)?;
            run.add(&loss);
            sgd_step(&mut student, &grads, lr, plan.momentum, plan.weight_decay, &mut state)?;
        }
        if !student.is_finite() {
            return Err(Error::NonFinite(format!("phase 2 epoch {e}: parameters diverged")));
        }
        log.rows.push(epoch_row(plan, &student, source, target, student_channel, 2, e, 1.0, lr, &run)?);
    }
    Ok(Step2Outcome {
        student,
        log,
        teacher_checksum_before,
        teacher_checksum_after: teacher.checksum(),
    })
}
