//! Baseline multi-round algorithms: distributed power method, distributed
//! Lanczos with full reorthogonalization, and hot-potato SGD.

use crate::cluster::ClusterState;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SymMatrix, Vector};
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug)]
pub struct IterativeConfig {
    pub max_rounds: u64,
    /// Target alignment error.
    pub epsilon: f64,
    pub failure_prob: f64,
    pub seed: u64,
}

impl IterativeConfig {
    pub fn new(max_rounds: u64, epsilon: f64, failure_prob: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) || !(failure_prob > 0.0 && failure_prob < 1.0) {
            return Err(Error::Parameter(
                "epsilon and failure_prob must lie in (0,1)".into(),
            ));
        }
        Ok(IterativeConfig {
            max_rounds,
            epsilon,
            failure_prob,
            seed,
        })
    }
}

/// Outcome of an iterative run.
#[derive(Clone, Debug)]
pub struct IterativeOutcome {
    pub estimate: Vector,
    pub rounds_used: u64,
    /// Set when the round budget ran out before the stopping rule fired.
    pub budget_exhausted: bool,
}

const RAYLEIGH_STALL: f64 = 1e-14;

pub(crate) fn seeded_unit(d: usize, seed: u64) -> Vector {
    let mut rng = SplitMix64::new(seed ^ 0x1B87_3593_21E0_D7A3);
    loop {
        let mut v = Vec::with_capacity(d);
        while v.len() < d {
            let (a, b) = rng.next_gaussian_pair();
            v.push(a);
            if v.len() < d {
                v.push(b);
            }
        }
        let v = Vector(v);
        if v.norm() > 1e-6 {
            return v.normalized().unwrap();
        }
    }
}

/// Power iterations on the pooled covariance via the distributed matvec.
/// Stops when successive Rayleigh quotients stabilize.
pub fn distributed_power_method(
    cluster: &mut ClusterState,
    cfg: &IterativeConfig,
) -> Result<IterativeOutcome> {
    let start_rounds = cluster.round_counter;
    let mut w = seeded_unit(cluster.d, cfg.seed);
    let mut prev_rayleigh = f64::NEG_INFINITY;
    let mut budget_exhausted = true;
    while cluster.round_counter - start_rounds + 2 <= cfg.max_rounds {
        let u = cluster.broadcast_matvec(&w)?;
        let rayleigh = w.dot(&u);
        let norm = u.norm();
        if norm < 1e-300 {
            // covariance annihilates the iterate; any unit vector is as good
            budget_exhausted = false;
            break;
        }
        w = u.scaled(1.0 / norm);
        if (rayleigh - prev_rayleigh).abs() < RAYLEIGH_STALL * rayleigh.abs().max(1.0) {
            budget_exhausted = false;
            break;
        }
        prev_rayleigh = rayleigh;
    }
    Ok(IterativeOutcome {
        estimate: w,
        rounds_used: cluster.round_counter - start_rounds,
        budget_exhausted,
    })
}

/// Lanczos with full reorthogonalization against the stored basis; one
/// distributed matvec per iteration, Ritz vector of the largest Ritz value.
pub fn distributed_lanczos(
    cluster: &mut ClusterState,
    cfg: &IterativeConfig,
) -> Result<IterativeOutcome> {
    let start_rounds = cluster.round_counter;
    let d = cluster.d;
    let q0 = seeded_unit(d, cfg.seed);
    let mut basis: Vec<Vector> = vec![q0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev_ritz = f64::NEG_INFINITY;
    let budget_exhausted;

    loop {
        if cluster.round_counter - start_rounds + 2 > cfg.max_rounds || alphas.len() == d {
            budget_exhausted = alphas.len() != d;
            break;
        }
        let q = basis.last().unwrap().clone();
        let mut u = cluster.broadcast_matvec(&q)?;
        let alpha = q.dot(&u);
        alphas.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&u);
                u.add_scaled(-proj, b);
            }
        }
        let beta = u.norm();
        let t = alphas.len();
        let ritz = top_ritz_value(&alphas, &betas);
        if beta < 1e-13 {
            // exact invariant subspace found
            budget_exhausted = false;
            break;
        }
        if t >= 2 && (ritz - prev_ritz).abs() < RAYLEIGH_STALL * ritz.abs().max(1.0) {
            budget_exhausted = false;
            break;
        }
        prev_ritz = ritz;
        betas.push(beta);
        basis.push(u.scaled(1.0 / beta));
    }

    let estimate = top_ritz_vector(&alphas, &betas, &basis)?;
    Ok(IterativeOutcome {
        estimate,
        rounds_used: cluster.round_counter - start_rounds,
        budget_exhausted,
    })
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> SymMatrix {
    let t = alphas.len();
    let mut m = SymMatrix::zeros(t);
    for (i, a) in alphas.iter().enumerate() {
        m.set_sym(i, i, *a);
    }
    for (i, b) in betas.iter().take(t.saturating_sub(1)).enumerate() {
        m.set_sym(i, i + 1, *b);
    }
    m
}

fn top_ritz_value(alphas: &[f64], betas: &[f64]) -> f64 {
    if alphas.len() == 1 {
        return alphas[0];
    }
    sym_eig(&tridiagonal(alphas, betas), 0.0)
        .map(|info| info.lambda1)
        .unwrap_or(f64::NEG_INFINITY)
}

fn top_ritz_vector(alphas: &[f64], betas: &[f64], basis: &[Vector]) -> Result<Vector> {
    let t = alphas.len();
    if t == 0 {
        return Err(Error::NumericalFailure("empty Lanczos factorization".into()));
    }
    if t == 1 {
        return Ok(basis[0].clone());
    }
    let info = sym_eig(&tridiagonal(alphas, betas), 0.0)?;
    let coeffs = &info.v1;
    let mut out = Vector::zeros(basis[0].dim());
    for (c, q) in coeffs.0.iter().zip(basis) {
        out.add_scaled(*c, q);
    }
    out.normalized()
}

/// Single-pass Oja updates, the iterate travelling machine-to-machine.
/// Exactly m hand-off rounds; step size step_c / (gap_est * t) with t the
/// global sample counter and gap_est machine 0's local eigengap.
pub fn hot_potato_oja(
    cluster: &mut ClusterState,
    step_c: f64,
    cfg: &IterativeConfig,
) -> Result<IterativeOutcome> {
    let start_rounds = cluster.round_counter;
    if cluster.machines.iter().any(|m| m.samples.is_none()) {
        return Err(Error::Parameter(
            "hot-potato SGD needs retained raw samples".into(),
        ));
    }
    let gap_est = {
        let info = cluster.machines[0].local_spectrum()?;
        if info.gap <= 1e-12 {
            return Err(Error::Degenerate("machine 0 local eigengap is zero".into()));
        }
        info.gap
    };
    let mut w = seeded_unit(cluster.d, cfg.seed);
    let mut t: u64 = 0;
    for idx in 0..cluster.m() {
        let samples = cluster.machines[idx].samples.clone().unwrap();
        for x in &samples {
            t += 1;
            let eta = step_c / (gap_est * t as f64);
            let coeff = eta * x.dot(&w);
            w.add_scaled(coeff, x);
            w = w.normalized()?;
        }
        cluster.hand_off();
    }
    Ok(IterativeOutcome {
        estimate: w,
        rounds_used: cluster.round_counter - start_rounds,
        budget_exhausted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{cluster_from_matrix, load_cluster};
    use crate::distributions::{make_spec, DistKind};
    use crate::linalg::random_spd;
    use crate::oneshot::error_metric;

    fn cfg(seed: u64) -> IterativeConfig {
        IterativeConfig::new(10_000, 1e-8, 0.1, seed).unwrap()
    }

    #[test]
    fn power_on_diagonal_matches_recursion() {
        // starting from (1,1)/sqrt(2) on diag(2,1), after t iterations the
        // alignment with e1 is 4^t/(4^t + 1)
        let mut cluster = cluster_from_matrix(SymMatrix::diagonal(&[2.0, 1.0]));
        let mut w = Vector(vec![1.0, 1.0]).normalized().unwrap();
        for t in 1..=8u32 {
            let u = cluster.broadcast_matvec(&w).unwrap();
            w = u.normalized().unwrap();
            let align = w.0[0] * w.0[0];
            let expected = 4f64.powi(t as i32) / (4f64.powi(t as i32) + 1.0);
            assert!((align - expected).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn power_zero_gap_stabilizes_immediately() {
        let mut cluster = cluster_from_matrix(SymMatrix::identity(4));
        let out = distributed_power_method(&mut cluster, &cfg(3)).unwrap();
        assert!(!out.budget_exhausted);
        assert!(out.rounds_used <= 6);
        assert!((out.estimate.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_converges_to_eigensolver_answer() {
        let a = random_spd(20, 42);
        let info = sym_eig(&a, 0.0).unwrap();
        assert!(info.gap >= 0.1, "test instance needs a gap");
        let mut cluster = cluster_from_matrix(a);
        let out = distributed_power_method(&mut cluster, &cfg(7)).unwrap();
        assert!(!out.budget_exhausted);
        assert!(error_metric(&out.estimate, &info.v1).unwrap() <= 1e-8);
        assert_eq!(out.rounds_used % 2, 0);
        assert_eq!(out.rounds_used / 2, cluster.matvec_counter);
    }

    #[test]
    fn lanczos_exact_termination_on_diagonal() {
        let d = 12;
        let diag: Vec<f64> = (0..d).map(|i| 2.0 - 0.13 * i as f64).collect();
        let a = SymMatrix::diagonal(&diag);
        let info = sym_eig(&a, 0.0).unwrap();
        let mut cluster = cluster_from_matrix(a);
        let out = distributed_lanczos(&mut cluster, &cfg(5)).unwrap();
        assert!(error_metric(&out.estimate, &info.v1).unwrap() <= 1e-10);
        assert!(out.rounds_used <= 2 * d as u64);
    }

    #[test]
    fn lanczos_breakdown_on_eigenvector_start() {
        // a start that is already an eigenvector: beta underflows on the
        // first iteration and the current Ritz vector is returned.
        let mut cluster = cluster_from_matrix(SymMatrix::diagonal(&[2.0, 1.0]));
        let basis = vec![Vector::basis(2, 0)];
        let betas: Vec<f64> = Vec::new();
        let q = basis[0].clone();
        let mut u = cluster.broadcast_matvec(&q).unwrap();
        let alphas = vec![q.dot(&u)];
        u.add_scaled(-basis[0].dot(&u), &basis[0]);
        assert!(u.norm() < 1e-13, "breakdown expected");
        let ritz = top_ritz_vector(&alphas, &betas, &basis).unwrap();
        assert!(ritz.sub(&Vector::basis(2, 0)).norm() < 1e-12);
    }

    #[test]
    fn lanczos_beats_power_on_rounds() {
        let mut lanczos_wins = 0;
        let trials = 20;
        for seed in 0..trials {
            let a = {
                // random PSD with a modest gap
                let base = random_spd(50, 1000 + seed);
                let info = sym_eig(&base, 0.0).unwrap();
                crate::linalg::from_eigenbasis(&info, |lam| lam / info.lambda1)
            };
            let info = sym_eig(&a, 0.0).unwrap();
            if info.gap < 0.02 {
                continue;
            }
            let c = IterativeConfig::new(4000, 1e-6, 0.1, seed).unwrap();
            let mut c1 = cluster_from_matrix(a.clone());
            let p = distributed_power_method(&mut c1, &c).unwrap();
            let mut c2 = cluster_from_matrix(a);
            let l = distributed_lanczos(&mut c2, &c).unwrap();
            assert!(error_metric(&l.estimate, &info.v1).unwrap() <= 1e-6);
            if l.rounds_used <= p.rounds_used {
                lanczos_wins += 1;
            }
        }
        assert!(
            lanczos_wins >= 14,
            "lanczos cheaper on only {lanczos_wins}/{trials} seeds"
        );
    }

    #[test]
    fn oja_orthogonal_data_has_no_effect() {
        let spec = make_spec(DistKind::Rademacher2d).unwrap();
        let mut cluster = load_cluster(&spec, 1, 1, 3, 0, true).unwrap();
        // overwrite with a fixed orthogonal configuration
        cluster.machines[0].samples = Some(vec![Vector::basis(2, 0)]);
        let start = Vector::basis(2, 1);
        let x = &cluster.machines[0].samples.as_ref().unwrap()[0].clone();
        assert_eq!(x.dot(&start), 0.0);
        // direct single update: w + eta * x * (x.w) = w
        let mut w = start.clone();
        w.add_scaled(1.0 * x.dot(&start), x);
        assert_eq!(w, start);
    }

    #[test]
    fn oja_rounds_equal_m() {
        let spec = make_spec(DistKind::GaussianChain {
            d: 5,
            structure_seed: 2,
        })
        .unwrap();
        let mut cluster = load_cluster(&spec, 3, 20, 11, 0, true).unwrap();
        let out = hot_potato_oja(&mut cluster, 1.0, &cfg(1)).unwrap();
        assert_eq!(out.rounds_used, 3);
        assert!((out.estimate.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oja_requires_samples() {
        let spec = make_spec(DistKind::Rademacher2d).unwrap();
        let mut cluster = load_cluster(&spec, 2, 10, 1, 0, false).unwrap();
        assert!(hot_potato_oja(&mut cluster, 1.0, &cfg(1)).is_err());
    }

    #[test]
    fn rayleigh_monotone_along_power_iterations() {
        let a = random_spd(15, 9);
        let mut cluster = cluster_from_matrix(a);
        let mut w = seeded_unit(15, 4);
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..60 {
            let u = cluster.broadcast_matvec(&w).unwrap();
            let r = w.dot(&u);
            assert!(r >= prev - 1e-12, "Rayleigh decreased: {prev} -> {r}");
            prev = r;
            w = u.normalized().unwrap();
        }
    }
}
