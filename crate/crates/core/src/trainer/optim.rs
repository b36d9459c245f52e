use crate::error::{Error, Result};
use crate::model::{GroupId, ModelGrads, ModelParams};

/// Annealed learning rate `eta0 / (1 + 10 e / E)^0.75`.
pub fn lr_anneal(eta0: f64, e: usize, total: usize) -> f64 {
    let progress = e as f64 / total.max(1) as f64;
    eta0 / (1.0 + 10.0 * progress).powf(0.75)
}

/// Velocity buffers of momentum SGD, one per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    velocity: ModelGrads,
}

impl Momentum {
    pub fn new(params: &ModelParams) -> Self {
        Momentum {
            velocity: ModelGrads::zeros_like(params),
        }
    }

    pub fn velocity(&self) -> &ModelGrads {
        &self.velocity
    }
}

/// One momentum-SGD update with per-group learning rates.
///
/// Weight decay is folded into the gradient: `v <- mu v + (g + wd theta)`,
/// `theta <- theta - eta v`.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &ModelGrads,
    lr: [f64; 3],
    momentum: f64,
    weight_decay: f64,
    state: &mut Momentum,
) -> Result<()> {
    for (i, id) in GroupId::ALL.into_iter().enumerate() {
        let g = grads.group(id);
        let theta = &mut params.group_mut(id).values;
        let v = match id {
            GroupId::Extractor => &mut state.velocity.sre,
            GroupId::Encoder => &mut state.velocity.cce,
            GroupId::Decoder => &mut state.velocity.decoder,
        };
        if g.len() != theta.len() || v.len() != theta.len() {
            return Err(Error::Dimension(format!("{} gradient does not match parameters", id.name())));
        }
        for ((t, &gi), vi) in theta.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = momentum * *vi + gi + weight_decay * *t;
            *t -= lr[i] * *vi;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroupRates, ModelConfig};
    use approx::assert_relative_eq;

    fn small() -> ModelParams {
        let config = ModelConfig {
            view_shape: (1, 2, 2),
            extractor_hidden: vec![3],
            a_in: 4,
            cr: 0.5,
            decoder_hidden: 3,
            classes: 2,
            k_devices: 1,
            ..ModelConfig::default()
        };
        ModelParams::init(&config, GroupRates::default(), 3).unwrap()
    }

    #[test]
    fn anneal_examples() {
        assert_eq!(lr_anneal(0.01, 0, 10), 0.01);
        assert_relative_eq!(lr_anneal(1.0, 10, 10), 11f64.powf(-0.75), epsilon = 1e-15);
        assert_relative_eq!(lr_anneal(1.0, 10, 10), 0.165_560_026_076_170_18, epsilon = 1e-12);
        assert_relative_eq!(lr_anneal(0.01, 5, 10), 0.002_608_474_300_122_145_4, epsilon = 1e-12);
        for e in 0..20 {
            assert!(lr_anneal(0.1, e + 1, 20) < lr_anneal(0.1, e, 20));
        }
    }

    #[test]
    fn plain_descent_without_momentum() {
        let mut p = small();
        let before = p.flatten();
        let mut g = ModelGrads::zeros_like(&p);
        g.decoder.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1);
        let mut state = Momentum::new(&p);
        sgd_step(&mut p, &g, [0.5, 0.5, 0.5], 0.0, 0.0, &mut state).unwrap();
        let after = p.flatten();
        let flat_g = g.flatten();
        for i in 0..before.len() {
            assert_relative_eq!(after[i], before[i] - 0.5 * flat_g[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn second_momentum_step_is_scaled_by_1_9() {
        let mut p = small();
        p.set_flat(&vec![0.0; p.num_params()]).unwrap();
        let mut g = ModelGrads::zeros_like(&p);
        g.cce.iter_mut().for_each(|v| *v = 1.0);
        let mut state = Momentum::new(&p);
        sgd_step(&mut p, &g, [0.1; 3], 0.9, 0.0, &mut state).unwrap();
        let first = p.cce.values[0];
        sgd_step(&mut p, &g, [0.1; 3], 0.9, 0.0, &mut state).unwrap();
        assert_relative_eq!(first, -0.1, epsilon = 1e-15);
        assert_relative_eq!(p.cce.values[0] - first, -0.1 * 1.9, epsilon = 1e-15);
    }

    #[test]
    fn weight_decay_shrinks_parameters() {
        let mut p = small();
        let before = p.flatten();
        let g = ModelGrads::zeros_like(&p);
        let mut state = Momentum::new(&p);
        sgd_step(&mut p, &g, [1.0; 3], 0.0, 0.1, &mut state).unwrap();
        for (a, b) in p.flatten().iter().zip(&before) {
            assert_relative_eq!(*a, 0.9 * b, epsilon = 1e-15);
        }
    }
}
