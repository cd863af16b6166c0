//! Collapsed Gibbs sampler over differential indicators and the rate
//! partition.
//!
//! Each sweep visits every position once and resamples its indicator jointly
//! with its seat assignments from the exact full conditional: the position's
//! one or two rate draws are removed, the weight of "shared draw in cluster k
//! or a fresh cluster" is set against the weight of "two draws over every
//! ordered pair of destinations", and the branch plus seats are drawn from the
//! normalized weights. The pair branch marginalizes the second seat in O(J)
//! per first-seat candidate by correcting a shared sum, so a sweep costs
//! O(K J) predictive evaluations rather than O(K J^2).
//!
//! All randomness flows through one counter-based generator seeded from the
//! run seed, so results are reproducible bit for bit regardless of thread
//! count elsewhere in the process.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Beta;

use crate::decision::global_null_probability;
use crate::error::{Error, Result};
use crate::math::{ln_gamma, prob_from_log_odds};
use crate::model::{CountTrack, Hyperparams, MixtureState, PosteriorSummary};

/// How the differential prior probability evolves across sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PiUpdate {
    /// Keep the prior fixed at its hyperparameter value.
    Fixed,
    /// Give it a Beta(a, b) hyperprior and resample it each sweep from the
    /// conjugate posterior given the current indicators.
    BetaConjugate { a: f64, b: f64 },
}

/// Run-length, seed, and prior-update policy for one chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub n_sweeps: usize,
    pub n_burnin: usize,
    pub seed: u64,
    pub pi_update: PiUpdate,
}

impl SamplerConfig {
    pub fn new(n_sweeps: usize, n_burnin: usize, seed: u64) -> Result<Self> {
        let cfg = Self { n_sweeps, n_burnin, seed, pi_update: PiUpdate::Fixed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_pi_update(self, pi_update: PiUpdate) -> Result<Self> {
        let cfg = Self { pi_update, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sweeps == 0 {
            return Err(Error::Domain("n_sweeps must be at least 1".into()));
        }
        if self.n_burnin >= self.n_sweeps {
            return Err(Error::Domain(format!(
                "n_burnin ({}) must be smaller than n_sweeps ({})",
                self.n_burnin, self.n_sweeps
            )));
        }
        if let PiUpdate::BetaConjugate { a, b } = self.pi_update {
            if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
                return Err(Error::Domain(format!("Beta hyperparameters must be positive, got ({a}, {b})")));
            }
        }
        Ok(())
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { n_sweeps: 10_000, n_burnin: 2_000, seed: 0, pi_update: PiUpdate::Fixed }
    }
}

/// Run one chain and return posterior frequencies of the indicators.
pub fn run_chain(track: &CountTrack, hp: &Hyperparams, cfg: &SamplerConfig) -> Result<PosteriorSummary> {
    cfg.validate()?;
    let k = track.len();
    let mut chain = Chain::new(track, *hp);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut diff_counts = vec![0u64; k];
    let mut cluster_acc = 0.0;
    let mut pi_acc = 0.0;
    for sweep in 0..cfg.n_sweeps {
        for i in 0..k {
            chain.update_position(i, &mut rng);
        }
        if let PiUpdate::BetaConjugate { a, b } = cfg.pi_update {
            chain.resample_pi(a, b, &mut rng);
        }
        if sweep >= cfg.n_burnin {
            for (i, cnt) in diff_counts.iter_mut().enumerate() {
                *cnt += chain.gamma[i] as u64;
            }
            cluster_acc += chain.active.len() as f64;
            pi_acc += chain.hp.diff_prob;
        }
    }
    debug_assert!(chain.to_state().validate(track).is_ok(), "cluster statistics drifted");
    let retained = (cfg.n_sweeps - cfg.n_burnin) as f64;
    let omegas: Vec<f64> = diff_counts.iter().map(|&c| c as f64 / retained).collect();
    Ok(PosteriorSummary {
        global_null_prob: global_null_probability(&omegas)?,
        omegas,
        n_sweeps: cfg.n_sweeps,
        n_burnin: cfg.n_burnin,
        mean_num_clusters: cluster_acc / retained,
        mean_diff_prob: pi_acc / retained,
    })
}

/// ln Gamma(shift + t) memoized over integer t; counts are integers, so every
/// lgamma the sampler needs hits this table.
struct LnGammaTable {
    shift: f64,
    vals: Vec<f64>,
}

impl LnGammaTable {
    fn new(shift: f64) -> Self {
        Self { shift, vals: Vec::new() }
    }

    #[inline]
    fn get(&mut self, t: u64) -> f64 {
        let t = t as usize;
        while self.vals.len() <= t {
            self.vals.push(ln_gamma(self.shift + self.vals.len() as f64));
        }
        self.vals[t]
    }
}

#[derive(Clone, Copy, Default)]
struct Cluster {
    seats: usize,
    sum: u64,
    exposure: f64,
}

/// Mutable sampler state with O(1) seat insertion and removal.
///
/// Clusters live in a table with a free list; `active` lists live ids and
/// `pos_in_active` inverts it, so cluster death and birth never shift labels
/// of unrelated positions.
struct Chain<'a> {
    track: &'a CountTrack,
    hp: Hyperparams,
    clusters: Vec<Cluster>,
    free: Vec<usize>,
    active: Vec<usize>,
    pos_in_active: Vec<usize>,
    assignment: Vec<[usize; 2]>,
    gamma: Vec<bool>,
    n_elements: usize,
    lg_alpha: LnGammaTable,
    ln_fact: LnGammaTable,
    // per-position scratch, reused to keep sweeps allocation-free
    pm: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
    p2aug: Vec<f64>,
    w0: Vec<f64>,
    w1: Vec<f64>,
    w2base: Vec<f64>,
    cval: Vec<f64>,
    wseat: Vec<f64>,
}

impl<'a> Chain<'a> {
    /// Start fully differential with every draw in its own cluster.
    fn new(track: &'a CountTrack, hp: Hyperparams) -> Self {
        let state = MixtureState::init_split(track);
        Self::from_state(track, hp, &state)
    }

    fn from_state(track: &'a CountTrack, hp: Hyperparams, state: &MixtureState) -> Self {
        let j = state.num_clusters();
        let mut clusters = Vec::with_capacity(j);
        for c in 0..j {
            clusters.push(Cluster {
                seats: state.cluster_elems[c],
                sum: state.cluster_sums[c],
                exposure: state.cluster_exposures[c],
            });
        }
        let alpha = hp.alpha;
        Self {
            track,
            hp,
            clusters,
            free: Vec::new(),
            active: (0..j).collect(),
            pos_in_active: (0..j).collect(),
            assignment: state.assignments().to_vec(),
            gamma: state.gammas().to_vec(),
            n_elements: state.num_elements(),
            lg_alpha: LnGammaTable::new(alpha),
            ln_fact: LnGammaTable::new(1.0),
            pm: Vec::new(),
            p1: Vec::new(),
            p2: Vec::new(),
            p2aug: Vec::new(),
            w0: Vec::new(),
            w1: Vec::new(),
            w2base: Vec::new(),
            cval: Vec::new(),
            wseat: Vec::new(),
        }
    }

    fn add_element(&mut self, id: usize, y: u64, n: f64) {
        let c = &mut self.clusters[id];
        c.seats += 1;
        c.sum += y;
        c.exposure += n;
        self.n_elements += 1;
    }

    fn remove_element(&mut self, id: usize, y: u64, n: f64) {
        let c = &mut self.clusters[id];
        c.seats -= 1;
        c.sum -= y;
        c.exposure -= n;
        self.n_elements -= 1;
        if c.seats == 0 {
            // zero the stats exactly so float drift cannot accumulate
            *c = Cluster::default();
            let slot = self.pos_in_active[id];
            self.active.swap_remove(slot);
            if let Some(&moved) = self.active.get(slot) {
                self.pos_in_active[moved] = slot;
            }
            self.free.push(id);
        }
    }

    fn new_cluster(&mut self) -> usize {
        let id = match self.free.pop() {
            Some(id) => id,
            None => {
                self.clusters.push(Cluster::default());
                self.pos_in_active.push(0);
                self.clusters.len() - 1
            }
        };
        self.pos_in_active[id] = self.active.len();
        self.active.push(id);
        id
    }

    fn remove_position(&mut self, i: usize) {
        let [a1, a2] = self.assignment[i];
        let (y1, n1) = (self.track.counts(0)[i], self.track.exposures(0)[i]);
        let (y2, n2) = (self.track.counts(1)[i], self.track.exposures(1)[i]);
        if self.gamma[i] {
            self.remove_element(a1, y1, n1);
            self.remove_element(a2, y2, n2);
        } else {
            self.remove_element(a1, y1 + y2, n1 + n2);
        }
    }

    /// Predictive log probability of (y, n) joining the cluster with the
    /// given statistics (zeros for a fresh cluster).
    #[inline]
    fn pred(&mut self, y: u64, n: f64, sum: u64, nexp: f64) -> f64 {
        let b0 = self.hp.beta + nexp;
        let denom = (b0 + n).ln();
        self.lg_alpha.get(sum + y) - self.lg_alpha.get(sum) - self.ln_fact.get(y)
            + (self.hp.alpha + sum as f64) * (b0.ln() - denom)
            + y as f64 * (n.ln() - denom)
    }

    /// Seat one draw by its Chinese-restaurant predictive weights and insert
    /// it; used for the second draw of a differential pair, after the first
    /// is already seated.
    fn seat_element(&mut self, y: u64, n: f64, rng: &mut ChaCha8Rng) -> usize {
        let j = self.active.len();
        let mut smax = f64::NEG_INFINITY;
        let mut exps = std::mem::take(&mut self.wseat);
        exps.clear();
        for idx in 0..=j {
            let (sum, nexp) = if idx < j {
                let c = &self.clusters[self.active[idx]];
                (c.sum, c.exposure)
            } else {
                (0, 0.0)
            };
            let e = self.pred(y, n, sum, nexp);
            smax = smax.max(e);
            exps.push(e);
        }
        for (idx, e) in exps.iter_mut().enumerate() {
            let seats = if idx < j {
                self.clusters[self.active[idx]].seats as f64
            } else {
                self.hp.dp_precision
            };
            *e = seats * (*e - smax).exp();
        }
        let idx = sample_index(&exps, rng);
        self.wseat = exps;
        let id = if idx < j { self.active[idx] } else { self.new_cluster() };
        self.add_element(id, y, n);
        id
    }

    /// Resample the indicator and seats of position i from the exact full
    /// conditional given everything else.
    fn update_position(&mut self, i: usize, rng: &mut ChaCha8Rng) {
        let (y1, n1) = (self.track.counts(0)[i], self.track.exposures(0)[i]);
        let (y2, n2) = (self.track.counts(1)[i], self.track.exposures(1)[i]);
        let (ym, nm) = (y1 + y2, n1 + n2);
        let (ln_n1, ln_n2, ln_nm) = (n1.ln(), n2.ln(), nm.ln());
        self.remove_position(i);
        let n_rest = self.n_elements as f64;
        let m = self.hp.dp_precision;
        let (alpha, beta) = (self.hp.alpha, self.hp.beta);
        let j = self.active.len();

        // predictive exponents against every live cluster plus a final fresh
        // row; the fresh row's augmented entry is the second draw joining a
        // new cluster that already holds the first
        let mut pm = std::mem::take(&mut self.pm);
        let mut p1 = std::mem::take(&mut self.p1);
        let mut p2 = std::mem::take(&mut self.p2);
        let mut p2aug = std::mem::take(&mut self.p2aug);
        pm.clear();
        p1.clear();
        p2.clear();
        p2aug.clear();
        for idx in 0..=j {
            let (sum, nexp) = if idx < j {
                let c = &self.clusters[self.active[idx]];
                (c.sum, c.exposure)
            } else {
                (0, 0.0)
            };
            let b0 = beta + nexp;
            let l0 = b0.ln();
            let l1 = (b0 + n1).ln();
            let l2 = (b0 + n2).ln();
            let l12 = (b0 + nm).ln();
            let a0 = alpha + sum as f64;
            let lg_s = self.lg_alpha.get(sum);
            let lg_s1 = self.lg_alpha.get(sum + y1);
            let lg_sm = self.lg_alpha.get(sum + ym);
            pm.push(lg_sm - lg_s - self.ln_fact.get(ym) + a0 * (l0 - l12) + ym as f64 * (ln_nm - l12));
            p1.push(lg_s1 - lg_s - self.ln_fact.get(y1) + a0 * (l0 - l1) + y1 as f64 * (ln_n1 - l1));
            p2.push(self.lg_alpha.get(sum + y2) - lg_s - self.ln_fact.get(y2)
                + a0 * (l0 - l2)
                + y2 as f64 * (ln_n2 - l2));
            p2aug.push(lg_sm - lg_s1 - self.ln_fact.get(y2)
                + (a0 + y1 as f64) * (l1 - l12)
                + y2 as f64 * (ln_n2 - l12));
        }
        let seats_of = |chain: &Self, idx: usize| {
            if idx < j { chain.clusters[chain.active[idx]].seats as f64 } else { m }
        };

        // shared branch: one merged draw seated anywhere
        let s_m = pm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w0 = std::mem::take(&mut self.w0);
        w0.clear();
        for (idx, &lp) in pm[..=j].iter().enumerate() {
            w0.push(seats_of(self, idx) * (lp - s_m).exp());
        }
        let a0_sum: f64 = w0.iter().sum();

        // differential branch: marginalize the second seat for every first
        // seat via the shared sum plus a per-candidate correction
        let s_2 = p2
            .iter()
            .chain(p2aug.iter())
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut w2base = std::mem::take(&mut self.w2base);
        w2base.clear();
        for (idx, &lp) in p2[..=j].iter().enumerate() {
            w2base.push(seats_of(self, idx) * (lp - s_2).exp());
        }
        let t: f64 = w2base.iter().sum();
        let mut cval = std::mem::take(&mut self.cval);
        cval.clear();
        for idx in 0..=j {
            let aug = (p2aug[idx] - s_2).exp();
            let c = if idx < j {
                let fast = t - w2base[idx] + (seats_of(self, idx) + 1.0) * aug;
                if fast > t * 1e-9 {
                    fast
                } else {
                    // the correction nearly cancels the shared sum; rebuild
                    // the remainder term by term
                    let mut slow = (seats_of(self, idx) + 1.0) * aug;
                    for (r, w) in w2base.iter().enumerate() {
                        if r != idx {
                            slow += w;
                        }
                    }
                    slow
                }
            } else {
                t + aug
            };
            cval.push(c);
        }
        let s_1 = p1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w1 = std::mem::take(&mut self.w1);
        w1.clear();
        for idx in 0..=j {
            w1.push(seats_of(self, idx) * (p1[idx] - s_1).exp() * cval[idx]);
        }
        let a1_sum: f64 = w1.iter().sum();

        // A shared draw still produces two observations; their joint
        // probability given the cluster equals the merged-total predictive
        // times the exposure-split binomial P(y1 | ym, n1/nm), which is
        // cluster-independent and so enters the branch weight once.
        let ln_split = self.ln_fact.get(ym) - self.ln_fact.get(y1) - self.ln_fact.get(y2)
            + y1 as f64 * (ln_n1 - ln_nm)
            + y2 as f64 * (ln_n2 - ln_nm);
        let pi = self.hp.diff_prob;
        let lw_diff =
            pi.ln() - (n_rest + 1.0 + m).ln() + a1_sum.ln() + s_1 + s_2;
        let lw_shared = (-pi).ln_1p() + a0_sum.ln() + s_m + ln_split;
        if rng.gen::<f64>() < prob_from_log_odds(lw_diff, lw_shared) {
            let idx = sample_index(&w1, rng);
            let id1 = if idx < j { self.active[idx] } else { self.new_cluster() };
            self.add_element(id1, y1, n1);
            let id2 = self.seat_element(y2, n2, rng);
            self.assignment[i] = [id1, id2];
            self.gamma[i] = true;
        } else {
            let idx = sample_index(&w0, rng);
            let id = if idx < j { self.active[idx] } else { self.new_cluster() };
            self.add_element(id, ym, nm);
            self.assignment[i] = [id, id];
            self.gamma[i] = false;
        }
        self.pm = pm;
        self.p1 = p1;
        self.p2 = p2;
        self.p2aug = p2aug;
        self.w0 = w0;
        self.w1 = w1;
        self.w2base = w2base;
        self.cval = cval;
    }

    fn resample_pi(&mut self, a: f64, b: f64, rng: &mut ChaCha8Rng) {
        let k = self.gamma.len();
        let d = self.gamma.iter().filter(|&&g| g).count();
        let beta = Beta::new(a + d as f64, b + (k - d) as f64).expect("positive Beta parameters");
        self.hp.diff_prob = beta.sample(rng).clamp(1e-12, 1.0 - 1e-12);
    }

    /// Snapshot as a canonical state with contiguous first-appearance labels.
    fn to_state(&self) -> MixtureState {
        let mut relabel = vec![usize::MAX; self.clusters.len()];
        let mut order = Vec::new();
        let mut assignments = Vec::with_capacity(self.gamma.len());
        for (i, &[a1, a2]) in self.assignment.iter().enumerate() {
            let slots = if self.gamma[i] { [a1, a2] } else { [a1, a1] };
            let mut out = [0usize; 2];
            for (g, &s) in slots.iter().enumerate() {
                if relabel[s] == usize::MAX {
                    relabel[s] = order.len();
                    order.push(s);
                }
                out[g] = relabel[s];
            }
            assignments.push(out);
        }
        MixtureState {
            assignments,
            gammas: self.gamma.clone(),
            cluster_sums: order.iter().map(|&s| self.clusters[s].sum).collect(),
            cluster_exposures: order.iter().map(|&s| self.clusters[s].exposure).collect(),
            cluster_elems: order.iter().map(|&s| self.clusters[s].seats).collect(),
        }
    }
}

/// Draw an index proportional to non-negative weights.
fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0 && total.is_finite(), "degenerate weights: {total}");
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}
