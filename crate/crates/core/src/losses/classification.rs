//! Cross-entropy and the confidence-masked distillation term. Every log is
//! taken of `max(p, PROB_FLOOR)`.

use serde::{Deserialize, Serialize};

use crate::model::PredictionDist;

pub const PROB_FLOOR: f64 = 1e-12;

fn clamped_log(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// `d/dp [-log max(p, floor)]`; zero where the clamp is active.
fn clamped_log_grad(p: f64) -> f64 {
    if p > PROB_FLOOR {
        -1.0 / p
    } else {
        0.0
    }
}

/// `-sum_c y_c log p_c`.
pub fn cross_entropy(p: &PredictionDist, target: &[f64]) -> f64 {
    -p.probs()
        .iter()
        .zip(target)
        .filter(|(_, &y)| y != 0.0)
        .map(|(&pc, &y)| y * clamped_log(pc))
        .sum::<f64>()
}

/// Gradient of [`cross_entropy`] with respect to the probabilities.
pub fn cross_entropy_grad(p: &PredictionDist, target: &[f64]) -> Vec<f64> {
    p.probs()
        .iter()
        .zip(target)
        .map(|(&pc, &y)| if y != 0.0 { y * clamped_log_grad(pc) } else { 0.0 })
        .collect()
}

/// Which distribution sits inside the log of the distillation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdOrientation {
    /// `-sum_c p_tc,c log p_st,c`: the teacher is the target distribution.
    #[default]
    TeacherTarget,
    /// `-sum_c p_st,c log p_tc,c`.
    AsPrinted,
}

/// `m_i = 1` iff the teacher's confidence exceeds `epsilon`.
pub fn kd_mask(teacher: &[PredictionDist], epsilon: f64) -> Vec<bool> {
    teacher.iter().map(|p| p.confidence() > epsilon).collect()
}

fn kd_term(student: &PredictionDist, teacher: &PredictionDist, orientation: KdOrientation) -> f64 {
    let (st, tc) = (student.probs(), teacher.probs());
    match orientation {
        KdOrientation::TeacherTarget => -tc.iter().zip(st).map(|(t, s)| t * clamped_log(*s)).sum::<f64>(),
        KdOrientation::AsPrinted => -st.iter().zip(tc).map(|(s, t)| s * clamped_log(*t)).sum::<f64>(),
    }
}

/// Mean per-sample cross-entropy over the kept samples; 0 when none are kept.
pub fn kd_ce_masked(
    student: &[PredictionDist],
    teacher: &[PredictionDist],
    mask: &[bool],
    orientation: KdOrientation,
) -> f64 {
    let kept = mask.iter().filter(|&&m| m).count();
    if kept == 0 {
        return 0.0;
    }
    student
        .iter()
        .zip(teacher)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((s, t), _)| kd_term(s, t, orientation))
        .sum::<f64>()
        / kept as f64
}

/// Gradient of [`kd_ce_masked`] with respect to each student probability
/// vector (zero rows for masked-out samples).
pub fn kd_ce_masked_grad(
    student: &[PredictionDist],
    teacher: &[PredictionDist],
    mask: &[bool],
    orientation: KdOrientation,
) -> Vec<Vec<f64>> {
    let kept = mask.iter().filter(|&&m| m).count();
    student
        .iter()
        .zip(teacher)
        .zip(mask)
        .map(|((s, t), &m)| {
            if !m {
                return vec![0.0; s.classes()];
            }
            let scale = 1.0 / kept as f64;
            match orientation {
                KdOrientation::TeacherTarget => s
                    .probs()
                    .iter()
                    .zip(t.probs())
                    .map(|(&ps, &pt)| scale * pt * clamped_log_grad(ps))
                    .collect(),
                KdOrientation::AsPrinted => t.probs().iter().map(|&pt| -scale * clamped_log(pt)).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pd(v: &[f64]) -> PredictionDist {
        PredictionDist::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy(&pd(&[0.0, 1.0]), &[0.0, 1.0]).abs() < 1e-15);
        let uniform = PredictionDist::from_logits(&[0.0; 31]);
        let mut y = vec![0.0; 31];
        y[4] = 1.0;
        assert_relative_eq!(cross_entropy(&uniform, &y), 31f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(cross_entropy(&uniform, &y), 3.433_987_204_485_146, epsilon = 1e-12);
        // clamped at 1e-12 instead of diverging
        assert_relative_eq!(cross_entropy(&pd(&[1.0, 0.0]), &[0.0, 1.0]), -(1e-12f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn mask_examples() {
        let t = [pd(&[0.95, 0.05]), pd(&[0.5, 0.5])];
        assert_eq!(kd_mask(&t, 0.9), vec![true, false]);
        assert_eq!(kd_mask(&t, 1e-9), vec![true, true]);
    }

    #[test]
    fn kd_examples() {
        let teacher = [pd(&[0.5, 0.5])];
        let student = [pd(&[1.0 - 1e-15, 1e-15])];
        // -(0.5 log(1-1e-15) + 0.5 log 1e-12) with the clamp
        let v = kd_ce_masked(&student, &teacher, &[true], KdOrientation::TeacherTarget);
        assert_relative_eq!(v, -0.5 * (1e-12f64).ln(), epsilon = 1e-9);
        // the as-printed orientation puts the log on the uniform teacher
        let w = kd_ce_masked(&student, &teacher, &[true], KdOrientation::AsPrinted);
        assert_relative_eq!(w, 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(w, 0.693_147_180_559_945_3, epsilon = 1e-12);
        assert_eq!(kd_ce_masked(&student, &teacher, &[false], KdOrientation::TeacherTarget), 0.0);
        let near = [pd(&[1.0 - 1e-13, 1e-13])];
        assert!(kd_ce_masked(&near, &near, &[true], KdOrientation::TeacherTarget) < 1e-10);
    }

    #[test]
    fn kd_grad_matches_differences() {
        for orientation in [KdOrientation::TeacherTarget, KdOrientation::AsPrinted] {
            let teacher = [pd(&[0.7, 0.2, 0.1]), pd(&[0.3, 0.3, 0.4]), pd(&[0.1, 0.85, 0.05])];
            let mask = [true, false, true];
            let base = [vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![0.25, 0.25, 0.5]];
            let st: Vec<PredictionDist> = base.iter().map(|v| pd(v)).collect();
            let g = kd_ce_masked_grad(&st, &teacher, &mask, orientation);
            for i in 0..3 {
                for c in 0..3 {
                    // a 1e-7 perturbation stays inside the simplex tolerance
                    let eval = |delta: f64| {
                        let mut v = base.clone();
                        v[i][c] += delta;
                        let students: Vec<PredictionDist> = v.into_iter().map(|r| pd(&r)).collect();
                        kd_ce_masked(&students, &teacher, &mask, orientation)
                    };
                    let fd = (eval(1e-7) - eval(-1e-7)) / 2e-7;
                    assert_relative_eq!(g[i][c], fd, epsilon = 1e-6);
                }
            }
        }
    }
}
