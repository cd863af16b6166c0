//! Brute-force reference posterior for small tracks, plus a numeric check of
//! the convexity bound that justifies interval-level pruning.
//!
//! The exact posterior enumerates every indicator vector and every set
//! partition of the implied rate draws (one draw per shared pair, two per
//! differential position), weighting each configuration by the product of the
//! indicator prior, the Chinese-restaurant partition prior, and the collapsed
//! marginal likelihood. Sampler output must agree with these values; that
//! agreement is the strongest correctness check in the test suite.

use crate::error::{Error, Result};
use crate::math::{ln_gamma, logsumexp};
use crate::model::{CountTrack, Hyperparams};

/// Largest track the exact enumeration accepts (8 observation slots).
pub const MAX_EXACT_POSITIONS: usize = 4;

/// Exact posterior probability that each position is differential.
pub fn exact_omegas(track: &CountTrack, hp: &Hyperparams) -> Result<Vec<f64>> {
    let (lws, masks) = config_log_weights(track, hp, true)?;
    let k = track.len();
    let z = logsumexp(&lws);
    let mut omegas = Vec::with_capacity(k);
    for i in 0..k {
        let hits: Vec<f64> = lws
            .iter()
            .zip(&masks)
            .filter(|(_, m)| *m & (1 << i) != 0)
            .map(|(w, _)| *w)
            .collect();
        omegas.push((logsumexp(&hits) - z).exp());
    }
    Ok(omegas)
}

/// Log weight and indicator bitmask of every configuration. With
/// `with_likelihood` off the weights are the prior alone, which must sum to
/// one; the tests audit exactly that.
pub(crate) fn config_log_weights(
    track: &CountTrack,
    hp: &Hyperparams,
    with_likelihood: bool,
) -> Result<(Vec<f64>, Vec<u32>)> {
    let k = track.len();
    if k > MAX_EXACT_POSITIONS {
        return Err(Error::TooLarge(format!(
            "exact enumeration handles at most {MAX_EXACT_POSITIONS} positions, got {k}"
        )));
    }
    // data-dependent constants shared by every configuration
    let mut base = 0.0;
    if with_likelihood {
        for g in 0..2 {
            for i in 0..k {
                let y = track.counts(g)[i] as f64;
                base += y * track.exposures(g)[i].ln() - ln_gamma(y + 1.0);
            }
        }
    }
    let ln_pi = hp.diff_prob.ln();
    let ln_not_pi = (-hp.diff_prob).ln_1p();
    let mut lws = Vec::new();
    let mut masks = Vec::new();
    for gamma in 0u32..(1 << k) {
        // rate draws implied by the indicators, in position order
        let mut elems: Vec<(u64, f64)> = Vec::with_capacity(2 * k);
        let mut lw_gamma = 0.0;
        for i in 0..k {
            let (y1, n1) = (track.counts(0)[i], track.exposures(0)[i]);
            let (y2, n2) = (track.counts(1)[i], track.exposures(1)[i]);
            if gamma & (1 << i) != 0 {
                lw_gamma += ln_pi;
                elems.push((y1, n1));
                elems.push((y2, n2));
            } else {
                lw_gamma += ln_not_pi;
                elems.push((y1 + y2, n1 + n2));
            }
        }
        for_each_partition(elems.len(), |labels| {
            let num_clusters = labels.iter().copied().max().unwrap() + 1;
            let mut sizes = vec![0usize; num_clusters];
            let mut sums = vec![0u64; num_clusters];
            let mut exps = vec![0.0f64; num_clusters];
            for (e, &l) in labels.iter().enumerate() {
                sizes[l] += 1;
                sums[l] += elems[e].0;
                exps[l] += elems[e].1;
            }
            let mut lw = base + lw_gamma + crp_log_prior(&sizes, hp.dp_precision);
            if with_likelihood {
                for j in 0..num_clusters {
                    let a = hp.alpha + sums[j] as f64;
                    lw += hp.alpha * hp.beta.ln() - ln_gamma(hp.alpha) + ln_gamma(a)
                        - a * (hp.beta + exps[j]).ln();
                }
            }
            lws.push(lw);
            masks.push(gamma);
        });
    }
    Ok((lws, masks))
}

/// Log prior of a partition with the given cluster sizes under a
/// Chinese-restaurant process with precision m:
/// J ln m + sum_j ln (n_j - 1)! - sum_{t=0}^{n-1} ln(m + t).
fn crp_log_prior(sizes: &[usize], m: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let mut lp = sizes.len() as f64 * m.ln();
    for &s in sizes {
        lp += ln_gamma(s as f64);
    }
    for t in 0..n {
        lp -= (m + t as f64).ln();
    }
    lp
}

/// Visit every set partition of n items as restricted-growth label strings.
fn for_each_partition(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut labels = vec![0usize; n];
    fn rec(labels: &mut Vec<usize>, i: usize, max_used: usize, visit: &mut impl FnMut(&[usize])) {
        if i == labels.len() {
            visit(labels);
            return;
        }
        for l in 0..=max_used + 1 {
            labels[i] = l;
            rec(labels, i + 1, max_used.max(l), visit);
        }
    }
    if n == 0 {
        visit(&labels);
        return;
    }
    // first item always opens cluster 0
    rec(&mut labels, 1, 0, &mut visit);
}

/// Kullback-Leibler divergence between two pmfs on a shared finite support.
pub fn kl_divergence(f: &[f64], g: &[f64]) -> Result<f64> {
    check_pmf(f)?;
    check_pmf(g)?;
    if f.len() != g.len() {
        return Err(Error::Domain(format!("pmf supports differ: {} vs {}", f.len(), g.len())));
    }
    let mut d = 0.0;
    for (&p, &q) in f.iter().zip(g) {
        if p > 0.0 {
            if q == 0.0 {
                return Ok(f64::INFINITY);
            }
            d += p * (p / q).ln();
        }
    }
    Ok(d)
}

/// Slack allowed on the convexity inequality before declaring a violation.
pub const KL_CONVEXITY_SLACK: f64 = 1e-12;

/// Check that KL(sum_p w_p f_p || sum_p w_p g_p) <= sum_p w_p KL(f_p || g_p)
/// up to [`KL_CONVEXITY_SLACK`]; joint convexity of the divergence makes the
/// pointwise bound sound for any mixture over intervals.
pub fn kl_convexity_check(fs: &[Vec<f64>], gs: &[Vec<f64>], weights: &[f64]) -> Result<bool> {
    if fs.len() != gs.len() || fs.len() != weights.len() || fs.is_empty() {
        return Err(Error::Domain("need equally many f pmfs, g pmfs, and weights".into()));
    }
    let support = fs[0].len();
    if fs.iter().chain(gs.iter()).any(|p| p.len() != support) {
        return Err(Error::Domain("all pmfs must share one support".into()));
    }
    let wsum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) || (wsum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("weights must be a probability vector, sum = {wsum}")));
    }
    let mut fmix = vec![0.0; support];
    let mut gmix = vec![0.0; support];
    let mut rhs = 0.0;
    for ((f, g), &w) in fs.iter().zip(gs).zip(weights) {
        rhs += w * kl_divergence(f, g)?;
        for x in 0..support {
            fmix[x] += w * f[x];
            gmix[x] += w * g[x];
        }
    }
    let lhs = kl_divergence(&fmix, &gmix)?;
    Ok(lhs <= rhs + KL_CONVEXITY_SLACK)
}

fn check_pmf(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("pmf must have non-empty support".into()));
    }
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::Domain("pmf entries must be non-negative and finite".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("pmf must sum to 1, got {s}")));
    }
    Ok(())
}
