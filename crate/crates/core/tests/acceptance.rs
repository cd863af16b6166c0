//! Release gate. Each test exercises one shipping criterion end to end and
//! prints a single `ACCEPTANCE n (...): PASS/FAIL (...)` line with the
//! measured numbers; the same text is carried in the assertion message so a
//! red criterion is self-describing.

use std::collections::HashSet;
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use ratescan::ebayes::estimate_gamma_hyperparams;
use ratescan::model::{cluster_predictive_logprob, log_marginal_likelihood};
use ratescan::multires::{full_scan, run_multiscale};
use ratescan::oracle::{exact_omegas, kl_convexity_check};
use ratescan::sampler::run_chain;
use ratescan::simulate::make_two_peak_tracks;
use ratescan::{CountTrack, Hyperparams, MixtureState, NodeStatus, SamplerConfig};

/// Criteria that measure wall-clock time or saturate the machine take turns,
/// so that one criterion's load does not skew another's timings.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_lock() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn report(number: usize, name: &str, pass: bool, detail: &str) -> String {
    let line = format!(
        "ACCEPTANCE {number} ({name}): {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("{line}");
    line
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn criterion_1_sampler_matches_exact_enumeration() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let mut worst = 0.0f64;
    for instance in 0..20u64 {
        let k = rng.gen_range(1..=3);
        let c1: Vec<u64> = (0..k).map(|_| rng.gen_range(0..=3)).collect();
        let c2: Vec<u64> = (0..k).map(|_| rng.gen_range(0..=3)).collect();
        let track = CountTrack::new((0..k as i64).collect(), c1, c2).unwrap();
        let hp = Hyperparams::new(
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.15..0.85),
            0.5,
        )
        .unwrap();
        let exact = exact_omegas(&track, &hp).unwrap();
        let cfg = SamplerConfig::new(50_000, 5_000, 7_000 + instance).unwrap();
        let sampled = run_chain(&track, &hp, &cfg).unwrap().omegas;
        for (e, s) in exact.iter().zip(&sampled) {
            worst = worst.max((e - s).abs());
        }
    }
    let pass = worst <= 0.03;
    let detail = format!(
        "20 random instances, K <= 3, counts <= 3, 50k sweeps: max |sampled - exact| = {worst:.4}, tol 0.03, {:.1?}",
        started.elapsed()
    );
    let line = report(1, "sampler agrees with exact enumeration", pass, &detail);
    assert!(pass, "{line}");
}

fn bin_center(position: i64, n_bins: usize) -> f64 {
    (position as f64 + 0.5) * 70.0 / n_bins as f64
}

fn region_mean(omegas: &[(i64, f64)], n_bins: usize, spans: &[(f64, f64)]) -> f64 {
    let vals: Vec<f64> = omegas
        .iter()
        .filter(|&&(p, _)| {
            let c = bin_center(p, n_bins);
            spans.iter().any(|&(lo, hi)| lo <= c && c <= hi)
        })
        .map(|&(_, om)| om)
        .collect();
    mean(&vals)
}

fn benchmark_hp(track: &CountTrack) -> Hyperparams {
    let (alpha, beta) = estimate_gamma_hyperparams(track);
    Hyperparams::new(alpha, beta, 1.0, 0.1, 0.5).unwrap()
}

#[test]
fn criterion_2_benchmark_full_scan_separates_peaks_from_middle() {
    let _guard = heavy_lock();
    let started = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for interior in [35usize, 100] {
        let n_bins = interior + 1;
        let mut peak_means = Vec::new();
        let mut middle_means = Vec::new();
        for seed in 0..10u64 {
            let track = make_two_peak_tracks(interior, 100, 1_000 + seed);
            let cfg = SamplerConfig::new(3_000, 600, 31 * seed + 5).unwrap();
            let res = full_scan(&track, &benchmark_hp(&track), &cfg).unwrap();
            peak_means.push(region_mean(&res.position_omegas, n_bins, &[(5.0, 15.0), (45.0, 55.0)]));
            middle_means.push(region_mean(&res.position_omegas, n_bins, &[(22.0, 33.0)]));
        }
        let wins = (0..10)
            .filter(|&i| peak_means[i] > 0.8 && middle_means[i] < 0.2)
            .count();
        pass &= wins >= 8;
        details.push(format!(
            "K={interior}: {wins}/10 seeds meet both bounds (need 8), \
             mean peak omega {:.3} vs bound 0.8, mean middle omega {:.3} vs bound 0.2",
            mean(&peak_means),
            mean(&middle_means),
        ));
    }
    details.push(format!("100 pooled replicates, pi 0.1, {:.1?}", started.elapsed()));
    let detail = details.join("; ");
    let line = report(2, "two-peak benchmark region calls at pooled scale", pass, &detail);
    assert!(pass, "{line}");
}

#[test]
fn criterion_3_shallow_scan_is_contained_and_prunes_the_middle() {
    let _guard = heavy_lock();
    let started = Instant::now();
    let width = 70.0 / 36.0;
    let target = (20.0 / width, 35.0 / width);
    let mut stray_flags = 0usize;
    let mut prune_wins = 0usize;
    for seed in 0..10u64 {
        let track = make_two_peak_tracks(35, 100, 1_000 + seed);
        let hp = benchmark_hp(&track);
        let cfg = SamplerConfig::new(4_000, 800, 77 * seed + 3).unwrap();
        let shallow = run_multiscale(&track, &hp, &cfg, 3).unwrap();
        let full = full_scan(&track, &hp, &cfg).unwrap();
        let full_set: HashSet<i64> = full.flagged.iter().map(|&(p, _)| p).collect();
        stray_flags += shallow.flagged.iter().filter(|&&(p, _)| !full_set.contains(&p)).count();
        let middle_pruned = shallow.nodes.iter().any(|n| {
            n.level <= 2
                && n.status == NodeStatus::Pruned
                && n.span.0 <= target.0
                && n.span.1 >= target.1
        });
        if middle_pruned {
            prune_wins += 1;
        }
    }
    let pass = stray_flags == 0 && prune_wins >= 8;
    let detail = format!(
        "10 seeds at K=35, depth 3 vs full scan: {stray_flags} positions flagged by the shallow scan \
         but not the full scan (need 0); middle subtree pruned by level 2 in {prune_wins}/10 seeds \
         (need 8); {:.1?}",
        started.elapsed()
    );
    let line = report(3, "shallow-scan flags contained, middle pruned early", pass, &detail);
    assert!(pass, "{line}");
}

/// 2^14 positions with a 2^6-wide differential hotspot and a faint symmetric
/// background everywhere else.
fn hotspot_track(seed: u64) -> CountTrack {
    let n = 1usize << 14;
    let hot = (1usize << 13)..((1usize << 13) + (1 << 6));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let rates = if hot.contains(&i) { [8.0, 0.5] } else { [0.05, 0.05] };
        for g in 0..2 {
            counts[g].push(Poisson::new(rates[g]).unwrap().sample(&mut rng) as u64);
        }
    }
    let [c1, c2] = counts;
    CountTrack::new((0..n as i64).collect(), c1, c2).unwrap()
}

#[test]
fn criterion_4_pruned_scan_cost_grows_linearly_in_depth() {
    let _guard = heavy_lock();
    let track = hotspot_track(0xB07);
    let hp = benchmark_hp(&track);

    let quick = SamplerConfig::new(500, 100, 99).unwrap();
    let mut bound_ok = true;
    let mut per_depth = Vec::new();
    for depth in 4..=12usize {
        let res = run_multiscale(&track, &hp, &quick, depth).unwrap();
        let n = res.stats.sampler_invocations;
        bound_ok &= n <= 4 * (depth + 1);
        per_depth.push(format!("L{depth}:{n}"));
    }

    let timed = SamplerConfig::new(1_500, 300, 99).unwrap();
    let t0 = Instant::now();
    let deep = run_multiscale(&track, &hp, &timed, 12).unwrap();
    let t_deep = t0.elapsed();
    let t1 = Instant::now();
    let full = full_scan(&track, &hp, &timed).unwrap();
    let t_full = t1.elapsed();
    let ratio = t_deep.as_secs_f64() / t_full.as_secs_f64();

    let hot = 8192i64..8256;
    let deep_hits = deep.flagged.iter().filter(|&&(p, _)| hot.contains(&p)).count();
    let full_hits = full.flagged.iter().filter(|&&(p, _)| hot.contains(&p)).count();

    let pass = bound_ok && ratio < 0.25 && deep_hits > 0 && full_hits > 0;
    let detail = format!(
        "invocations {} vs bound 4(L+1); depth-12 scan {t_deep:.2?} vs full scan {t_full:.2?}, \
         ratio {ratio:.3} (need < 0.25); hotspot positions flagged: {deep_hits} pruned / {full_hits} full",
        per_depth.join(" "),
    );
    let line = report(4, "pruning work bound and runtime", pass, &detail);
    assert!(pass, "{line}");
}

fn random_track(rng: &mut ChaCha8Rng, k: usize) -> CountTrack {
    let c1: Vec<u64> = (0..k).map(|_| rng.gen_range(0..=30)).collect();
    let c2: Vec<u64> = (0..k).map(|_| rng.gen_range(0..=30)).collect();
    if rng.gen_bool(0.5) {
        CountTrack::new((0..k as i64).collect(), c1, c2).unwrap()
    } else {
        let e1: Vec<f64> = (0..k).map(|_| rng.gen_range(0.25..4.0)).collect();
        let e2: Vec<f64> = (0..k).map(|_| rng.gen_range(0.25..4.0)).collect();
        CountTrack::with_exposures((0..k as i64).collect(), c1, c2, e1, e2).unwrap()
    }
}

/// Random indicators plus a uniform restricted-growth labeling of the
/// resulting rate draws; always a valid state.
fn random_state(rng: &mut ChaCha8Rng, track: &CountTrack) -> MixtureState {
    let k = track.len();
    let gammas: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.5)).collect();
    let mut next = 0usize;
    let mut assignments = Vec::with_capacity(k);
    for &gamma in &gammas {
        let mut draw = |rng: &mut ChaCha8Rng| {
            let label = rng.gen_range(0..=next);
            if label == next {
                next += 1;
            }
            label
        };
        let a = draw(rng);
        let b = if gamma { draw(rng) } else { a };
        assignments.push([a, b]);
    }
    MixtureState::from_parts(assignments, gammas, track).unwrap()
}

/// Accumulate the one-observation predictives over the given slot order.
fn sequential_logprob(state: &MixtureState, track: &CountTrack, hp: &Hyperparams, order: &[(usize, usize)]) -> f64 {
    let mut sums = vec![0u64; state.num_clusters()];
    let mut exps = vec![0.0f64; state.num_clusters()];
    let mut lp = 0.0;
    for &(i, g) in order {
        let c = state.assignments()[i][g];
        let y = track.counts(g)[i];
        let e = track.exposures(g)[i];
        lp += cluster_predictive_logprob(y, e, sums[c], exps[c], hp).unwrap();
        sums[c] += y;
        exps[c] += e;
    }
    lp
}

#[test]
fn criterion_5_marginal_likelihood_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let mut worst_additive = 0.0f64;
    for _ in 0..1_000 {
        let k = rng.gen_range(1..=8);
        let track = random_track(&mut rng, k);
        let state = random_state(&mut rng, &track);
        let hp = Hyperparams::new(
            rng.gen_range(0.3..5.0),
            rng.gen_range(0.3..5.0),
            1.0,
            0.5,
            0.5,
        )
        .unwrap();
        let direct = log_marginal_likelihood(&state, &track, &hp);
        let mut order: Vec<(usize, usize)> =
            (0..k).flat_map(|i| [(i, 0), (i, 1)]).collect();
        let in_order = sequential_logprob(&state, &track, &hp, &order);
        order.shuffle(&mut rng);
        let shuffled = sequential_logprob(&state, &track, &hp, &order);
        worst_additive = worst_additive
            .max((direct - in_order).abs())
            .max((direct - shuffled).abs());
    }

    let hp11 = Hyperparams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
    let base0 = (cluster_predictive_logprob(0, 1.0, 0, 0.0, &hp11).unwrap() - 0.5f64.ln()).abs();
    let base1 = (cluster_predictive_logprob(1, 1.0, 0, 0.0, &hp11).unwrap() - 0.25f64.ln()).abs();

    let mut worst_norm = 0.0f64;
    for _ in 0..50 {
        let hp = Hyperparams::new(rng.gen_range(0.3..4.0), rng.gen_range(0.3..4.0), 1.0, 0.5, 0.5).unwrap();
        let exposure = rng.gen_range(0.25..4.0);
        let cluster_sum = rng.gen_range(0..=200);
        let cluster_exposure = rng.gen_range(2.0..40.0);
        let total: f64 = (0..=20_000u64)
            .map(|y| cluster_predictive_logprob(y, exposure, cluster_sum, cluster_exposure, &hp).unwrap().exp())
            .sum();
        worst_norm = worst_norm.max((total - 1.0).abs());
    }

    let pass = worst_additive <= 1e-10 && base0 <= 1e-12 && base1 <= 1e-12 && worst_norm <= 1e-8;
    let detail = format!(
        "additive decomposition over 1000 random states: max gap {worst_additive:.2e} (tol 1e-10); \
         unit-hyperparameter base cases off by {base0:.1e} and {base1:.1e} (tol 1e-12); \
         predictive normalization off by {worst_norm:.2e} over 50 draws (tol 1e-8)"
    );
    let line = report(5, "marginal likelihood identities", pass, &detail);
    assert!(pass, "{line}");
}

fn random_pmf(rng: &mut ChaCha8Rng, support: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..support).map(|_| rng.gen_range(0.02..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

#[test]
fn criterion_6_kl_divergence_is_convex_over_random_ensembles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6);
    let mut holds = 0usize;
    let cases = 10_000usize;
    for case in 0..cases {
        let n = rng.gen_range(2..=6);
        let support = rng.gen_range(2..=8);
        let fs: Vec<Vec<f64>> = (0..n).map(|_| random_pmf(&mut rng, support)).collect();
        let mut gs: Vec<Vec<f64>> = (0..n).map(|_| random_pmf(&mut rng, support)).collect();
        if case % 7 == 0 {
            // push one component onto the boundary to exercise the infinite
            // divergence path
            let j = rng.gen_range(0..n);
            let s = rng.gen_range(0..support);
            gs[j][s] = 0.0;
            let total: f64 = gs[j].iter().sum();
            gs[j].iter_mut().for_each(|v| *v /= total);
        }
        let weights = random_pmf(&mut rng, n);
        if kl_convexity_check(&fs, &gs, &weights).unwrap() {
            holds += 1;
        }
    }
    let pass = holds == cases;
    let detail =
        format!("{holds}/{cases} random ensembles satisfy the mixture inequality within 1e-12");
    let line = report(6, "KL divergence convexity", pass, &detail);
    assert!(pass, "{line}");
}

#[test]
fn criterion_7_cli_outputs_are_byte_deterministic() {
    let _guard = heavy_lock();
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_ratescan");
    let track = dir.path().join("track.csv");
    let sim = std::process::Command::new(bin)
        .args(["simulate", "--interior", "35", "--replicates", "3", "--seed", "9"])
        .args(["--out", track.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));

    let runs = [("a", "1"), ("b", "1"), ("c", "4"), ("d", "8")];
    for (name, threads) in runs {
        let out = std::process::Command::new(bin)
            .args(["scan", "--depth", "4", "--sweeps", "800", "--burnin", "200"])
            .args(["--seed", "5", "--pi", "0.2", "--input", track.to_str().unwrap()])
            .arg("--out")
            .arg(dir.path().join(name))
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }

    let mut identical = true;
    for file in ["omegas.csv", "flagged.csv", "plotdata.csv", "decisions.log"] {
        let reference = std::fs::read(dir.path().join("a").join(file)).unwrap();
        for (name, _) in &runs[1..] {
            identical &= std::fs::read(dir.path().join(name).join(file)).unwrap() == reference;
        }
    }
    let detail = "4 output files compared across repeated seeds and 1/4/8 worker threads".to_string();
    let line = report(7, "CLI byte determinism", identical, &detail);
    assert!(identical, "{line}");
}
