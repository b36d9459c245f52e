/// UDA warm-up factor `delta = 2 / (1 + exp(-10 e / E)) - 1`.
///
/// `e` counts completed epochs; the result rises from 0 at `e = 0` towards 1.
pub fn warmup_delta(e: usize, total: usize) -> f64 {
    let progress = e as f64 / total.max(1) as f64;
    2.0 / (1.0 + (-10.0 * progress).exp()) - 1.0
}
