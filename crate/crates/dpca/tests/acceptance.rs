//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS/FAIL` line with the measured quantities.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use rayon::prelude::*;

use dpca::cluster::{cluster_from_matrix, load_cluster, SignPolicy};
use dpca::distributions::{make_spec, DistKind};
use dpca::harness::{run_experiment, ExperimentConfig, RunRecord};
use dpca::iterative::{distributed_lanczos, distributed_power_method, IterativeConfig};
use dpca::linalg::{spectral_norm, sym_eig, SymMatrix, Vector};
use dpca::oneshot::error_metric;
use dpca::rng::{mix64, SplitMix64};
use dpca::shift_invert::{
    build_preconditioner, inner_solve, mu_from_data, shift_invert, InnerSolver, Lambda1Estimate,
    ShiftInvertConfig,
};
use dpca::theory::{davis_kahan_check, log_log_slope, taylor_slope_families};

fn report(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {}: {} - {}",
        criterion,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
    assert!(pass, "criterion {} failed: {}", criterion, detail);
}

fn experiment(
    distribution: DistKind,
    m: usize,
    n_grid: Vec<usize>,
    methods: &[&str],
    replicates: u64,
    master_seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        distribution,
        m,
        n_grid,
        methods: methods.iter().map(|s| s.to_string()).collect(),
        replicates,
        master_seed,
        epsilon: 1e-6,
        failure_prob: 0.1,
        oja_step: 1.0,
        output_path: None,
        desk_scale: false,
    }
}

fn mean_err(records: &[RunRecord], method: &str, n: usize) -> f64 {
    let picked: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method && r.n == n)
        .map(|r| r.error)
        .collect();
    assert!(!picked.is_empty(), "no records for {} at n={}", method, n);
    picked.iter().sum::<f64>() / picked.len() as f64
}

/// Modified Gram-Schmidt on a seeded Gaussian matrix; columns returned.
fn random_orthonormal(d: usize, rng: &mut SplitMix64) -> Vec<Vector> {
    let mut cols: Vec<Vector> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut v = Vec::with_capacity(d);
        while v.len() < d {
            let (a, b) = rng.next_gaussian_pair();
            v.push(a);
            if v.len() < d {
                v.push(b);
            }
        }
        cols.push(Vector(v));
    }
    for i in 0..d {
        for _pass in 0..2 {
            for j in 0..i {
                let proj = cols[j].dot(&cols[i]);
                let prev = cols[j].clone();
                cols[i].add_scaled(-proj, &prev);
            }
        }
        let norm = cols[i].norm();
        cols[i] = cols[i].scaled(1.0 / norm);
    }
    cols
}

/// Symmetric matrix with the given eigenvalues (eigs[0] largest) in a random
/// orthonormal basis; returns the matrix and its leading eigenvector.
fn rotated_sym(eigs: &[f64], rng: &mut SplitMix64) -> (SymMatrix, Vector) {
    let d = eigs.len();
    let basis = random_orthonormal(d, rng);
    let mut a = SymMatrix::zeros(d);
    for (j, col) in basis.iter().enumerate() {
        a.add_outer(col, eigs[j]);
    }
    (a, basis[0].clone())
}

fn random_symmetric(d: usize, scale: f64, rng: &mut SplitMix64) -> SymMatrix {
    let mut a = SymMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            a.set_sym(i, j, scale * rng.next_signed());
        }
    }
    a
}

/// Benchmark orderings of the one-shot estimators at desk scale: on both
/// synthetic chain families the centralized solution dominates, sign-fixed
/// averaging tracks it within 3x, projection averaging is at least as good as
/// sign-fixing, and naive averaging is worse than even a single machine.
#[test]
fn criterion_1_benchmark_orderings() {
    let started = Instant::now();
    let methods = [
        "centralized",
        "naive",
        "signfix",
        "projection",
        "single-machine",
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (kind, label) in [
        (
            DistKind::GaussianChain {
                d: 50,
                structure_seed: 0,
            },
            "gaussian-chain",
        ),
        (
            DistKind::ScaledUniformChain {
                d: 50,
                structure_seed: 0,
            },
            "scaled-uniform-chain",
        ),
    ] {
        let cfg = experiment(
            kind,
            25,
            vec![250, 500, 1000, 2000, 4000],
            &methods,
            100,
            101,
        );
        let records = run_experiment(&cfg).expect("experiment runs");
        let cent = mean_err(&records, "centralized", 4000);
        let sf = mean_err(&records, "signfix", 4000);
        let proj = mean_err(&records, "projection", 4000);
        let naive = mean_err(&records, "naive", 4000);
        let single = mean_err(&records, "single-machine", 4000);
        // at n=4000 the signfix/projection/centralized means have converged to
        // within fractions of a percent, so the orderings on the equal side
        // carry a 5% Monte-Carlo slack
        let ok = sf >= 0.95 * cent
            && sf <= 3.0 * cent
            && proj <= 1.05 * sf
            && naive >= 5.0 * cent
            && naive >= single;
        pass &= ok;
        detail.push_str(&format!(
            "[{label}: cent={cent:.3e} signfix={sf:.3e} proj={proj:.3e} naive={naive:.3e} single={single:.3e}] "
        ));
    }
    let elapsed = started.elapsed().as_secs_f64();
    pass &= elapsed < 600.0;
    detail.push_str(&format!("elapsed={elapsed:.0}s (<600s)"));
    report(1, pass, &detail);
}

/// Rate separation of naive averaging vs the centralized solution: raising m
/// from 8 to 64 improves the centralized error by >= 4x at every n, while the
/// naive average improves at least 2x more slowly (it is not at the pooled
/// 1/(mn) rate).
#[test]
fn criterion_2_naive_vs_centralized_rates() {
    let run = |m: usize| {
        let cfg = experiment(
            DistKind::Rademacher2d,
            m,
            vec![25, 100, 400],
            &["naive", "centralized"],
            400,
            21,
        );
        run_experiment(&cfg).expect("experiment runs")
    };
    let rec8 = run(8);
    let rec64 = run(64);
    let mut pass = true;
    let mut detail = String::new();
    for n in [25usize, 100, 400] {
        let cent_change = mean_err(&rec8, "centralized", n) / mean_err(&rec64, "centralized", n);
        let naive_ratio = mean_err(&rec64, "naive", n) / mean_err(&rec8, "naive", n);
        let naive_change = naive_ratio.max(1.0 / naive_ratio);
        let ok = cent_change >= 4.0 && cent_change >= 2.0 * naive_change;
        pass &= ok;
        detail.push_str(&format!(
            "[n={n}: centralized drop {cent_change:.2}x (>=4), naive change {naive_change:.2}x, contrast {:.2}x (>=2)] ",
            cent_change / naive_change
        ));
    }
    report(2, pass, &detail);
}

/// Regime split for sign-fixed averaging: its mean error exceeds 3x the
/// centralized error when per-machine samples are scarce (n = m) and falls
/// within 3x once n is large; the crossover n and the tiny-n (= m/4) ratio are
/// reported. At n = m/4 both estimators saturate (errors are capped at 1), so
/// the ratio there is bounded by 1/centralized and cannot certify the small-n
/// regime; n = m does.
#[test]
fn criterion_3_signfix_regime() {
    let n_grid = vec![6, 25, 50, 100, 200, 400, 800, 1600];
    let cfg = experiment(
        DistKind::GaussianChain {
            d: 50,
            structure_seed: 0,
        },
        25,
        n_grid.clone(),
        &["signfix", "centralized"],
        60,
        33,
    );
    let records = run_experiment(&cfg).expect("experiment runs");
    let ratio = |n: usize| mean_err(&records, "signfix", n) / mean_err(&records, "centralized", n);
    let ratios: Vec<(usize, f64)> = n_grid.iter().map(|&n| (n, ratio(n))).collect();
    let small_n = ratio(25);
    let large_n = ratio(1600);
    // smallest n whose ratio, and every larger n's ratio, is <= 3
    let crossover = {
        let mut best = None;
        for &(n, r) in ratios.iter().rev() {
            if r <= 3.0 {
                best = Some(n);
            } else {
                break;
            }
        }
        best
    };
    let pass = small_n > 3.0 && large_n <= 3.0 && crossover.is_some();
    let detail = format!(
        "ratio(n=25)={small_n:.2} (>3), ratio(n=1600)={large_n:.2} (<=3), crossover n={:?}, ratio(n=m/4=6)={:.2} (saturation-capped)",
        crossover,
        ratios[0].1
    );
    report(3, pass, &detail);
}

/// Exact bias of the sign-fixed local eigenvector for the asymmetric 2-d
/// construction: the sample second-moment matrix of n draws is determined by
/// the binomial count of sqrt(2)-outcomes, so E[v2] is a finite sum.
fn exact_signfix_bias(n: usize, delta: f64) -> f64 {
    let mut p = (2.0f64 / 3.0).powi(n as i32);
    let mut bias = 0.0;
    for k in 0..=n {
        let kf = k as f64;
        let nf = n as f64;
        let y = (1.0 + delta).sqrt() * (kf * 2.0f64.sqrt() - (nf - kf) / 2.0f64.sqrt()) / nf;
        let z = (2.0 * kf + (nf - kf) * 0.5) / nf;
        let a = 0.5 * (1.0 + delta - z);
        let u1 = a + (a * a + y * y).sqrt();
        let norm = u1.hypot(y);
        let (v1, v2) = (u1 / norm, y / norm);
        bias += p * if v1 < 0.0 { -v2 } else { v2 };
        // pmf recurrence: C(n,k+1)/C(n,k) = (n-k)/(k+1), outcome odds 1:2
        p *= 0.5 * (nf - kf) / (kf + 1.0);
    }
    bias
}

/// n^-2 signature of the sign-fixing bias: with m = 256 machines the error of
/// the aggregate still carries an O(1/(mn)) variance share, so the error
/// flattens toward the floor (E[sign-fixed v2])^2, the m-growth limit. The
/// floor is computed exactly by binomial enumeration and its log-log slope
/// against n must sit near -2; the Monte-Carlo floor (all machines pooled
/// across the 400 replicates) must agree, and the raw per-replicate slope is
/// reported alongside.
#[test]
fn criterion_4_signfix_bias_floor() {
    let spec = make_spec(DistKind::AsymmetricXiLb { delta: 0.3 }).expect("spec");
    let mut raw_points = Vec::new();
    let mut floor_points = Vec::new();
    let mut mc_floor_points = Vec::new();
    for &n in &[200usize, 400, 800] {
        let seed_n = mix64(31, n as u64);
        let (err_sum, pooled) = (0..400u64)
            .into_par_iter()
            .map(|rep| {
                let cluster = load_cluster(&spec, 256, n, seed_n, rep, false).expect("cluster");
                let mut sum = Vector::zeros(2);
                for i in 0..256 {
                    let v = cluster
                        .local_erm(i, SignPolicy::Canonical)
                        .expect("local solution");
                    // sign-fix against the population eigenvector, not the
                    // canonical largest-coordinate convention: past 45 degrees
                    // the two disagree and would attenuate the bias
                    let s = if v.dot(&spec.population_v1) < 0.0 { -1.0 } else { 1.0 };
                    sum.add_scaled(s, &v);
                }
                let err = error_metric(&sum.normalized().unwrap(), &spec.population_v1).unwrap();
                (err, sum)
            })
            .reduce(
                || (0.0, Vector::zeros(2)),
                |a, b| {
                    let mut v = a.1;
                    v.add_scaled(1.0, &b.1);
                    (a.0 + b.0, v)
                },
            );
        raw_points.push((n as f64, err_sum / 400.0));
        let mc_floor =
            error_metric(&pooled.normalized().unwrap(), &spec.population_v1).unwrap();
        mc_floor_points.push((n as f64, mc_floor));
        let bias = exact_signfix_bias(n, 0.3);
        floor_points.push((n as f64, bias * bias));
    }
    let slope_floor = log_log_slope(&floor_points).expect("slope");
    let slope_raw = log_log_slope(&raw_points).expect("slope");
    // raw error must sit above the floor (flattening), and the Monte-Carlo
    // floor must agree with the exact one within sampling noise
    let flattened = raw_points
        .iter()
        .zip(&floor_points)
        .all(|(r, f)| r.1 > f.1);
    let mc_consistent = mc_floor_points
        .iter()
        .zip(&floor_points)
        .all(|(mc, f)| mc.1 / f.1 < 1.6 && mc.1 / f.1 > 0.625);
    let pass = (-2.6..=-1.4).contains(&slope_floor) && flattened && mc_consistent;
    let detail = format!(
        "exact bias-floor slope {slope_floor:.2} (in [-2.6,-1.4]); raw m=256 mean-error slope {slope_raw:.2}; floors exact {:?} vs pooled Monte-Carlo {:?}",
        floor_points
            .iter()
            .map(|&(n, f)| format!("n={n}: {f:.2e}"))
            .collect::<Vec<_>>(),
        mc_floor_points
            .iter()
            .map(|&(n, f)| format!("n={n}: {f:.2e}"))
            .collect::<Vec<_>>()
    );
    report(4, pass, &detail);
}

/// Second-order accuracy of the eigenvector perturbation expansion: the
/// residual after subtracting the first-order term scales quadratically in
/// the perturbation size, with a uniformly bounded constant.
#[test]
fn criterion_5_taylor_residual_slopes() {
    let results = taylor_slope_families(20, 7).expect("slope families");
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    let mut slope_lo = f64::INFINITY;
    let mut slope_hi = f64::NEG_INFINITY;
    for &(slope, ratio) in &results {
        pass &= (1.9..=2.5).contains(&slope) && ratio <= 100.0;
        worst_ratio = worst_ratio.max(ratio);
        slope_lo = slope_lo.min(slope);
        slope_hi = slope_hi.max(slope);
    }
    let detail = format!(
        "20 families, slopes in [{slope_lo:.2}, {slope_hi:.2}] (required [1.9,2.5]), worst residual ratio {worst_ratio:.2} (<=100)"
    );
    report(5, pass, &detail);
}

/// Subspace perturbation bound: no violations over 10^4 randomized matrix
/// pairs and subspace sizes with eigengap at least 0.05, slack 1e-9.
#[test]
fn criterion_6_davis_kahan_sweep() {
    let mut rng = SplitMix64::new(6001);
    let mut violations = 0usize;
    let mut checked = 0usize;
    while checked < 10_000 {
        let d = 2 + (rng.next_u64() % 9) as usize;
        let x = random_symmetric(d, 1.0, &mut rng);
        let info = sym_eig(&x, 0.0).expect("eig");
        let ks: Vec<usize> = (1..d)
            .filter(|&k| info.eigenvalues[k - 1] - info.eigenvalues[k] >= 0.05)
            .collect();
        if ks.is_empty() {
            continue;
        }
        let k = ks[(rng.next_u64() % ks.len() as u64) as usize];
        let tau = 10f64.powf(-3.0 + 2.5 * rng.next_f64());
        let y = x.add(&random_symmetric(d, tau, &mut rng));
        let rep = davis_kahan_check(&x, &y, k).expect("bound check");
        if !rep.satisfied {
            violations += 1;
        }
        checked += 1;
    }
    let pass = violations == 0;
    let detail = format!("{checked} randomized instances, {violations} violations (slack 1e-9)");
    report(6, pass, &detail);
}

/// Local preconditioning: whenever the pooled covariance is spectrally within
/// mu of machine 0's, the condition number of the preconditioned system is at
/// most 1 + 2 mu / (lambda - lambda1) + 1e-6. Instances violating the
/// closeness hypothesis are excluded; their rate must stay within the mu
/// concentration budget p = 1/3.
#[test]
fn criterion_7_preconditioner_condition_number() {
    let spec = make_spec(DistKind::GaussianChain {
        d: 50,
        structure_seed: 0,
    })
    .expect("spec");
    let reps = 24u64;
    let mut pass = true;
    let mut detail = String::new();
    for &n in &[100usize, 1_000, 10_000] {
        let mu = mu_from_data(n, 50, 1.0 / 3.0).expect("mu");
        let outcomes: Vec<(bool, f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let cluster =
                    load_cluster(&spec, 8, n, mix64(71, n as u64), rep, false).expect("cluster");
                let pooled = cluster.pooled_covariance();
                let local = &cluster.machines[0].local_cov;
                let dev = spectral_norm(&pooled.sub(local)).expect("spectral norm");
                if dev > mu {
                    return (false, 0.0, dev);
                }
                let info = sym_eig(&pooled, 0.0).expect("eig");
                let lambda = info.lambda1 + 0.1;
                let pc = build_preconditioner(local, lambda, mu).expect("preconditioner");
                let mut m_mat = SymMatrix::identity(50).scaled(lambda);
                m_mat = m_mat.sub(&pooled);
                let h = pc.c_inv_sqrt.sandwich(&m_mat);
                let h_info = sym_eig(&h, 0.0).expect("eig");
                let kappa = h_info.lambda1 / h_info.eigenvalues.last().unwrap();
                (true, kappa, dev)
            })
            .collect();
        let included: Vec<f64> = outcomes.iter().filter(|o| o.0).map(|o| o.1).collect();
        let excluded = reps as usize - included.len();
        let bound = 1.0 + 2.0 * mu / 0.1 + 1e-6;
        let worst = included.iter().cloned().fold(0.0f64, f64::max);
        let ok = included.iter().all(|&k| k <= bound)
            && (excluded as f64) <= (reps as f64) / 3.0
            && !included.is_empty();
        pass &= ok;
        detail.push_str(&format!(
            "[n={n}: worst kappa {worst:.3} <= {bound:.3}, excluded {excluded}/{reps}] "
        ));
    }
    report(7, pass, &detail);
}

/// End-to-end solver correctness: on 50 random instances with a known pooled
/// matrix the shifted-inverse solver reaches alignment error <= 1e-8 on at
/// least 48, each within 5 seconds.
#[test]
fn criterion_8_shift_invert_correctness() {
    let results: Vec<(bool, f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::new(mix64(81, i));
            let d = 20 + (rng.next_u64() % 81) as usize;
            let lambda1 = 0.9 + 0.1 * rng.next_f64();
            let gap = 0.1 + 0.4 * rng.next_f64();
            let lambda2 = lambda1 - gap;
            let mut eigs = vec![lambda1, lambda2];
            for _ in 2..d {
                eigs.push(0.02 + (0.9 * lambda2 - 0.02) * rng.next_f64());
            }
            let (a, v1) = rotated_sym(&eigs, &mut rng);
            let mut cluster = cluster_from_matrix(a);
            let cfg = ShiftInvertConfig {
                gap_estimate: Some(0.6 * gap),
                epsilon: 1e-8,
                failure_prob: 0.1,
                warm_start: false,
                inner_solver: InnerSolver::ConjugateGradient,
                lambda1_mode: Lambda1Estimate::Machine0,
                seed: i,
                verbose: false,
            };
            let started = Instant::now();
            let out = shift_invert(&mut cluster, &cfg);
            let elapsed = started.elapsed().as_secs_f64();
            match out {
                Ok(out) => {
                    let err = error_metric(&out.w, &v1).unwrap();
                    (err <= 1e-8 && elapsed < 5.0, err, elapsed)
                }
                Err(_) => (false, 1.0, elapsed),
            }
        })
        .collect();
    let successes = results.iter().filter(|r| r.0).count();
    let worst_err = results.iter().map(|r| r.1).fold(0.0f64, f64::max);
    let worst_time = results.iter().map(|r| r.2).fold(0.0f64, f64::max);
    let pass = successes >= 48;
    let detail = format!(
        "{successes}/50 instances with error <= 1e-8 (need >= 48); worst error {worst_err:.2e}, worst wall time {worst_time:.2}s (<5s)"
    );
    report(8, pass, &detail);
}

/// Round-count contrast of the iterative solvers: the tridiagonalization
/// solver beats plain power iterations on >= 18/20 seeds; warm-started
/// shifted-inverse rounds decrease monotonically in n (its inner conditioning
/// improves with sample size) while power/tridiagonal rounds stay flat.
#[test]
fn criterion_9_round_count_contrast() {
    let spec = make_spec(DistKind::GaussianChain {
        d: 50,
        structure_seed: 0,
    })
    .expect("spec");
    let wins: usize = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let cluster = load_cluster(&spec, 4, 2000, mix64(91, s), 0, false).expect("cluster");
            let icfg = IterativeConfig::new(200_000, 1e-6, 0.1, s).expect("config");
            let power = distributed_power_method(&mut cluster.clone(), &icfg).expect("power");
            let lanczos = distributed_lanczos(&mut cluster.clone(), &icfg).expect("lanczos");
            usize::from(lanczos.rounds_used < power.rounds_used)
        })
        .sum();

    let median = |mut v: Vec<u64>| {
        v.sort_unstable();
        v[v.len() / 2]
    };
    let mut si_medians = Vec::new();
    let mut power_medians = Vec::new();
    let mut lanczos_medians = Vec::new();
    for &n in &[100usize, 1_000, 10_000] {
        let rounds: Vec<(u64, u64, u64)> = (0..5u64)
            .into_par_iter()
            .map(|rep| {
                let cluster =
                    load_cluster(&spec, 4, n, mix64(92, n as u64), rep, false).expect("cluster");
                let icfg = IterativeConfig::new(200_000, 1e-6, 0.1, rep).expect("config");
                let power = distributed_power_method(&mut cluster.clone(), &icfg).expect("power");
                let lanczos = distributed_lanczos(&mut cluster.clone(), &icfg).expect("lanczos");
                let scfg = ShiftInvertConfig {
                    gap_estimate: None,
                    epsilon: 1e-6,
                    failure_prob: 0.1,
                    warm_start: true,
                    inner_solver: InnerSolver::ConjugateGradient,
                    lambda1_mode: Lambda1Estimate::Machine0,
                    seed: rep,
                    verbose: false,
                };
                let si = shift_invert(&mut cluster.clone(), &scfg).expect("shift invert");
                (si.rounds, power.rounds_used, lanczos.rounds_used)
            })
            .collect();
        si_medians.push(median(rounds.iter().map(|r| r.0).collect()));
        power_medians.push(median(rounds.iter().map(|r| r.1).collect()));
        lanczos_medians.push(median(rounds.iter().map(|r| r.2).collect()));
    }
    let flat = |v: &[u64]| {
        let lo = *v.iter().min().unwrap() as f64;
        let hi = *v.iter().max().unwrap() as f64;
        hi <= 1.5 * lo
    };
    let monotone = si_medians.windows(2).all(|w| w[1] < w[0]);
    let pass = wins >= 18 && monotone && flat(&power_medians) && flat(&lanczos_medians);
    let detail = format!(
        "lanczos<power on {wins}/20 seeds (>=18); warm shifted-inverse median rounds {si_medians:?} strictly decreasing over n=1e2..1e4; power {power_medians:?} and lanczos {lanczos_medians:?} flat within 1.5x"
    );
    report(9, pass, &detail);
}

/// Finite termination of conjugate gradients: on 100 random systems of
/// dimension <= 20 the gradient norm reaches 1e-10 within d+3 iterations.
#[test]
fn criterion_10_cg_finite_termination() {
    let mut rng = SplitMix64::new(1001);
    let mut pass = true;
    let mut worst_iters = 0u64;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..100 {
        let d = 2 + (rng.next_u64() % 19) as usize;
        let eigs: Vec<f64> = {
            let mut e: Vec<f64> = (0..d).map(|_| 0.2 + rng.next_f64()).collect();
            e.sort_by(|a, b| b.partial_cmp(a).unwrap());
            e
        };
        let (a, _) = rotated_sym(&eigs, &mut rng);
        let lambda = eigs[0] + 0.5;
        let pc = build_preconditioner(&SymMatrix::zeros(d), lambda, 0.0).expect("plain shift");
        let mut cluster = cluster_from_matrix(a);
        let mut w = Vec::with_capacity(d);
        while w.len() < d {
            let (x, y) = rng.next_gaussian_pair();
            w.push(x);
            if w.len() < d {
                w.push(y);
            }
        }
        let w = Vector(w);
        let out = inner_solve(
            &mut cluster,
            &pc,
            &w,
            1e-11,
            0.5,
            InnerSolver::ConjugateGradient,
        )
        .expect("solve");
        let ok = out.grad_norm <= 1e-10 && out.iterations <= (d + 3) as u64;
        worst_iters = worst_iters.max(out.iterations);
        worst_grad = worst_grad.max(out.grad_norm);
        pass &= ok;
    }
    let detail = format!(
        "100 systems (d<=20): max iterations {worst_iters}, max final gradient norm {worst_grad:.2e} (<=1e-10), all within d+3"
    );
    report(10, pass, &detail);
}
