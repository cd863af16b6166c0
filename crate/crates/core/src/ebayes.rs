//! Moment-matched Gamma hyperparameters from crude per-slot rates.
//!
//! Every observation slot in both groups contributes one smoothed rate
//! (y + 1/2) / exposure; the Gamma(alpha, beta) base measure is matched to the
//! pooled mean and variance of those rates. Degenerate tracks (no variance)
//! push beta to its clamp while alpha keeps the ratio alpha/beta equal to the
//! mean rate, so the prior mean stays honest even when the spread is not
//! identifiable.

use crate::model::CountTrack;

/// Clamp range for both outputs.
pub const CLAMP: (f64, f64) = (1e-3, 1e3);
const VAR_FLOOR: f64 = 1e-12;

/// Estimate (alpha, beta) for the Gamma base measure from the track.
pub fn estimate_gamma_hyperparams(track: &CountTrack) -> (f64, f64) {
    estimate_with_offset(track, 0.5)
}

/// Offset-parameterized core; offset 0 makes the estimate exactly
/// scale-equivariant in the exposures, which the tests exploit.
pub(crate) fn estimate_with_offset(track: &CountTrack, offset: f64) -> (f64, f64) {
    let mut rates = Vec::with_capacity(2 * track.len());
    for g in 0..2 {
        let counts = track.counts(g);
        let exposures = track.exposures(g);
        for i in 0..track.len() {
            rates.push((counts[i] as f64 + offset) / exposures[i]);
        }
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = if rates.len() > 1 {
        rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let v = var.max(VAR_FLOOR);
    let beta = (mean / v).clamp(CLAMP.0, CLAMP.1);
    let alpha = (mean * beta).clamp(CLAMP.0, CLAMP.1);
    (alpha, beta)
}
