//! Small numeric helpers shared across modules.

pub use statrs::function::gamma::ln_gamma;

/// log(sum_i exp(x_i)) without overflow. Empty input yields -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Stable sigmoid of a log-odds difference: exp(a) / (exp(a) + exp(b)).
pub fn prob_from_log_odds(a: f64, b: f64) -> f64 {
    if a >= b {
        1.0 / (1.0 + (b - a).exp())
    } else {
        let e = (a - b).exp();
        e / (1.0 + e)
    }
}

/// Deterministic 64-bit mix (splitmix64 finalizer); used to derive
/// per-node RNG seeds that are stable across platforms and thread counts.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
