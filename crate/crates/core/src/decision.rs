//! Decision rules on posterior differential probabilities.
//!
//! A position is rejected when its omega strictly exceeds the threshold. An
//! interval is worth expanding when the joint null probability
//! prod_i (1 - omega_i) falls strictly below (1 - xi)^m, evaluated in log
//! space; for a single position the two rules coincide.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneDecision {
    Prune,
    Expand,
}

fn check_inputs(omegas: &[f64], xi: f64) -> Result<()> {
    if !(xi.is_finite() && xi > 0.0 && xi < 1.0) {
        return Err(Error::Domain(format!("threshold must lie in (0, 1), got {xi}")));
    }
    for &w in omegas {
        if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
            return Err(Error::Domain(format!("omega must lie in [0, 1], got {w}")));
        }
    }
    Ok(())
}

/// Indices (0-based) of positions whose omega strictly exceeds xi.
pub fn local_rejections(omegas: &[f64], xi: f64) -> Result<Vec<usize>> {
    check_inputs(omegas, xi)?;
    Ok(omegas
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > xi)
        .map(|(i, _)| i)
        .collect())
}

/// Sum of ln(1 - omega_i); -inf when some omega equals 1.
pub fn global_null_log(omegas: &[f64]) -> Result<f64> {
    check_inputs(omegas, 0.5)?;
    Ok(omegas.iter().map(|&w| (-w).ln_1p()).sum())
}

/// prod_i (1 - omega_i), accumulated in log space.
pub fn global_null_probability(omegas: &[f64]) -> Result<f64> {
    Ok(global_null_log(omegas)?.exp())
}

/// Expand when prod (1 - omega_i) < (1 - xi)^m, strictly, with m the number
/// of tested positions. Empty input never expands.
pub fn prune_decision(omegas: &[f64], xi: f64) -> Result<PruneDecision> {
    check_inputs(omegas, xi)?;
    let log_null = global_null_log(omegas)?;
    let budget = omegas.len() as f64 * (-xi).ln_1p();
    Ok(if log_null < budget { PruneDecision::Expand } else { PruneDecision::Prune })
}
