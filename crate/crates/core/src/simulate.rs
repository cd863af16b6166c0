//! Synthetic data: inhomogeneous Poisson processes with Gaussian-bump
//! intensities, binned into paired count tracks.
//!
//! Events are drawn by thinning a homogeneous process at the summed bump
//! amplitudes, which dominates the intensity everywhere, so the draw is exact
//! rather than discretized. Binning uses evenly spaced interior grid points;
//! with k interior points the domain splits into k+1 bins, half-open except
//! the last so every event in the closed domain lands somewhere.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::model::CountTrack;

/// One Gaussian intensity component `amplitude * exp(-((x-center)/width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

/// Event-rate function on a closed interval: a sum of Gaussian bumps.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySpec {
    bumps: Vec<GaussianBump>,
    lo: f64,
    hi: f64,
}

impl IntensitySpec {
    pub fn new(bumps: Vec<GaussianBump>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("domain must be a finite interval, got [{lo}, {hi}]")));
        }
        for b in &bumps {
            if !(b.amplitude.is_finite() && b.amplitude >= 0.0) {
                return Err(Error::Domain(format!("bump amplitude must be non-negative, got {}", b.amplitude)));
            }
            if !(b.width.is_finite() && b.width > 0.0 && b.center.is_finite()) {
                return Err(Error::Domain(format!(
                    "bump must have finite center and positive width, got ({}, {})",
                    b.center, b.width
                )));
            }
        }
        Ok(Self { bumps, lo, hi })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Intensity at x; zero outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        self.bumps
            .iter()
            .map(|b| {
                let z = (x - b.center) / b.width;
                b.amplitude * (-z * z).exp()
            })
            .sum()
    }

    /// Upper bound on the intensity, used as the thinning envelope.
    pub fn max_intensity(&self) -> f64 {
        self.bumps.iter().map(|b| b.amplitude).sum()
    }

    /// Exact integral of the intensity over [a, b] in closed form.
    pub fn integral_between(&self, a: f64, b: f64) -> Result<f64> {
        if !(self.lo <= a && a < b && b <= self.hi) {
            return Err(Error::Domain(format!(
                "integration range [{a}, {b}] must lie inside [{}, {}]",
                self.lo, self.hi
            )));
        }
        let sqrt_pi_half = std::f64::consts::PI.sqrt() / 2.0;
        Ok(self
            .bumps
            .iter()
            .map(|bp| {
                bp.amplitude
                    * bp.width
                    * sqrt_pi_half
                    * (erf((b - bp.center) / bp.width) - erf((a - bp.center) / bp.width))
            })
            .sum())
    }

    /// Expected number of events over the whole domain.
    pub fn integral(&self) -> f64 {
        self.integral_between(self.lo, self.hi).expect("domain is a valid range")
    }
}

/// Draw one realization of the process; event coordinates come back sorted.
pub fn sample_poisson_process(spec: &IntensitySpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = spec.domain();
    let bound = spec.max_intensity();
    let total = bound * (hi - lo);
    if total == 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(total).expect("positive mean").sample(rng) as usize;
    let mut events: Vec<f64> = (0..n)
        .filter_map(|_| {
            let x = rng.gen_range(lo..hi);
            (rng.gen::<f64>() * bound < spec.eval(x)).then_some(x)
        })
        .collect();
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events
}

/// Histogram events over `interior + 1` bins split by evenly spaced interior
/// grid points. Bins are half-open except the last, which is closed at `hi`.
pub fn bin_counts(events: &[f64], lo: f64, hi: f64, interior: usize) -> Result<Vec<u64>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("binning domain must be a finite interval, got [{lo}, {hi}]")));
    }
    let nbins = interior + 1;
    let width = (hi - lo) / nbins as f64;
    let mut counts = vec![0u64; nbins];
    for &x in events {
        if !(lo..=hi).contains(&x) {
            return Err(Error::Domain(format!("event {x} lies outside [{lo}, {hi}]")));
        }
        let idx = (((x - lo) / width) as usize).min(nbins - 1);
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Simulate `replicates` paired realizations of two processes on a shared
/// domain and sum the binned counts into one track with unit exposures and
/// bin-index positions.
pub fn make_paired_tracks(
    spec1: &IntensitySpec,
    spec2: &IntensitySpec,
    interior: usize,
    replicates: usize,
    seed: u64,
) -> Result<CountTrack> {
    if spec1.domain() != spec2.domain() {
        return Err(Error::Domain("the two intensities must share one domain".into()));
    }
    let (lo, hi) = spec1.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nbins = interior + 1;
    let mut counts = [vec![0u64; nbins], vec![0u64; nbins]];
    for _ in 0..replicates {
        for (g, spec) in [spec1, spec2].into_iter().enumerate() {
            let events = sample_poisson_process(spec, &mut rng);
            for (c, add) in counts[g].iter_mut().zip(bin_counts(&events, lo, hi, interior)?) {
                *c += add;
            }
        }
    }
    let [c1, c2] = counts;
    CountTrack::new((0..nbins as i64).collect(), c1, c2)
}

/// The standard benchmark pair: each group has a tall and a short Gaussian
/// peak at coordinates 10 and 50 on [0, 70], with the amplitudes swapped
/// between groups, so both neighborhoods are differential while the region
/// between them is nearly null.
pub fn two_peak_intensities() -> (IntensitySpec, IntensitySpec) {
    let bump = |amplitude, center| GaussianBump { amplitude, center, width: 10.0 };
    let s1 = IntensitySpec::new(vec![bump(2.0, 50.0), bump(20.0, 10.0)], 0.0, 70.0).unwrap();
    let s2 = IntensitySpec::new(vec![bump(2.0, 10.0), bump(20.0, 50.0)], 0.0, 70.0).unwrap();
    (s1, s2)
}

/// Paired track from [`two_peak_intensities`] with `interior + 1` bins.
pub fn make_two_peak_tracks(interior: usize, replicates: usize, seed: u64) -> CountTrack {
    let (s1, s2) = two_peak_intensities();
    make_paired_tracks(&s1, &s2, interior, replicates, seed).expect("specs share a domain")
}
