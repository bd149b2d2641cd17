use rand::Rng;

/// Systematic resampling: one uniform offset, `n` evenly spaced pointers into
/// the cumulative weights. Returns the selected source index for each output slot.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let step = 1.0 / n as f64;
    let start: f64 = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut cumulative = weights[0];
    for k in 0..n {
        let u = start + k as f64 * step;
        while u >= cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}
