//! Shift-and-invert power method: the outer shift schedule, the locally
//! preconditioned quadratic, the distributed first-order oracle, and the
//! CG / accelerated-gradient inner solvers.

use crate::cluster::{ClusterState, SignPolicy};
use crate::error::{Error, Result};
use crate::iterative::seeded_unit;
use crate::linalg::{from_eigenbasis, sym_eig, SymMatrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSolver {
    ConjugateGradient,
    AcceleratedGradient,
}

/// Where the solver obtains its estimate of the pooled top eigenvalue, which
/// enters only stopping rules and iteration caps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lambda1Estimate {
    /// Exact pooled spectrum; free in simulation, used by tests.
    Pooled,
    /// Machine 0's local estimate; what a real coordinator could know.
    Machine0,
}

#[derive(Clone, Copy, Debug)]
pub struct ShiftInvertConfig {
    /// Estimate of the pooled eigengap; defaults to half of machine 0's local
    /// gap when absent.
    pub gap_estimate: Option<f64>,
    pub epsilon: f64,
    pub failure_prob: f64,
    pub warm_start: bool,
    pub inner_solver: InnerSolver,
    pub lambda1_mode: Lambda1Estimate,
    /// Seed for the random cold-start vector.
    pub seed: u64,
    pub verbose: bool,
}

impl ShiftInvertConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gap_estimate {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Parameter("gap_estimate must lie in (0,1]".into()));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0)
            || !(self.failure_prob > 0.0 && self.failure_prob < 1.0)
        {
            return Err(Error::Parameter(
                "epsilon and failure_prob must lie in (0,1)".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ShiftInvertConfig {
    fn default() -> Self {
        ShiftInvertConfig {
            gap_estimate: None,
            epsilon: 1e-6,
            failure_prob: 0.1,
            warm_start: false,
            inner_solver: InnerSolver::ConjugateGradient,
            lambda1_mode: Lambda1Estimate::Pooled,
            seed: 0,
            verbose: false,
        }
    }
}

/// Iteration counts and the per-solve accuracy derived from (d, eps, p,
/// gap_estimate). eps_tilde is carried in log space: the raw value underflows
/// long before the schedule does.
#[derive(Clone, Copy, Debug)]
pub struct ShiftInvertDerived {
    pub m1: u64,
    pub m2: u64,
    pub log_eps_tilde: f64,
    /// exp(log_eps_tilde) clamped below at EPS_TILDE_FLOOR.
    pub eps_tilde_effective: f64,
    pub eps_tilde_clamped: bool,
    pub lambda0: f64,
}

/// Below this per-solve accuracy, double precision cannot certify further
/// progress; the nominal schedule is far more conservative than needed.
pub const EPS_TILDE_FLOOR: f64 = 1e-14;

pub fn derive_schedule(
    d: usize,
    gap_estimate: f64,
    epsilon: f64,
    p: f64,
    lambda_scale: f64,
) -> ShiftInvertDerived {
    let d = d as f64;
    let m1 = (8.0 * (144.0 * d / (p * p)).ln()).ceil().max(1.0) as u64;
    let m2 = (1.5 * (18.0 * d / (p * p * epsilon)).ln()).ceil().max(1.0) as u64;
    let log_base = (gap_estimate / 8.0).ln();
    let log_a = (1.0f64 / 16.0).ln() + (m1 as f64 + 1.0) * log_base;
    let log_b = (epsilon / 4.0).ln() + (m2 as f64 + 1.0) * log_base;
    let log_eps_tilde = log_a.min(log_b);
    let raw = log_eps_tilde.exp();
    ShiftInvertDerived {
        m1,
        m2,
        log_eps_tilde,
        eps_tilde_effective: raw.max(EPS_TILDE_FLOOR),
        eps_tilde_clamped: raw < EPS_TILDE_FLOOR,
        lambda0: lambda_scale.max(1.0) + gap_estimate,
    }
}

/// mu = 4 sqrt(ln(3d/p)/n): the spectral-norm radius within which the local
/// covariance tracks the pooled one.
pub fn mu_from_data(n: usize, d: usize, p: f64) -> Result<f64> {
    if n < 1 || d < 1 || !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(
            "mu_from_data needs n,d >= 1 and p in (0,1)".into(),
        ));
    }
    Ok(4.0 * ((3.0 * d as f64 / p).ln() / n as f64).sqrt())
}

/// C = (lambda + mu) I - X_hat_1, with its inverse and inverse square root
/// materialized once per shift.
#[derive(Clone, Debug)]
pub struct Preconditioner {
    pub lambda: f64,
    pub mu: f64,
    pub c: SymMatrix,
    pub c_inv: SymMatrix,
    pub c_inv_sqrt: SymMatrix,
}

pub fn build_preconditioner(
    machine1_cov: &SymMatrix,
    lambda: f64,
    mu: f64,
) -> Result<Preconditioner> {
    let d = machine1_cov.dim();
    let mut c = SymMatrix::identity(d).scaled(lambda + mu);
    c = c.sub(machine1_cov);
    let info = sym_eig(&c, 0.0)?;
    let min_eig = *info.eigenvalues.last().unwrap();
    if min_eig <= 1e-12 * info.lambda1.abs().max(1.0) {
        return Err(Error::ShiftTooSmall);
    }
    let c_inv = from_eigenbasis(&info, |lam| 1.0 / lam);
    let c_inv_sqrt = from_eigenbasis(&info, |lam| 1.0 / lam.sqrt());
    Ok(Preconditioner {
        lambda,
        mu,
        c,
        c_inv,
        c_inv_sqrt,
    })
}

/// One query of the distributed oracle for the preconditioned quadratic
/// F(y) = 1/2 y' C^{-1/2} (lambda I - X_hat) C^{-1/2} y - y' C^{-1/2} w.
/// Costs one broadcast plus one gather.
pub fn precond_oracle(
    cluster: &mut ClusterState,
    pc: &Preconditioner,
    w: &Vector,
    y: &Vector,
) -> Result<(f64, Vector)> {
    if w.dim() != cluster.d || y.dim() != cluster.d || pc.c.dim() != cluster.d {
        return Err(Error::DimensionMismatch(
            "precond_oracle: w, y, preconditioner, cluster must agree".into(),
        ));
    }
    let y_tilde = pc.c_inv_sqrt.matvec(y);
    let grad_tilde = cluster.broadcast_matvec(&y_tilde)?;
    let ci_y = pc.c_inv.matvec(y);
    let cis_grad = pc.c_inv_sqrt.matvec(&grad_tilde);
    let cis_w = pc.c_inv_sqrt.matvec(w);
    let value = 0.5 * (pc.lambda * y.dot(&ci_y) - y.dot(&cis_grad)) - y.dot(&cis_w);
    let mut gradient = ci_y.scaled(pc.lambda);
    gradient.add_scaled(-1.0, &cis_grad);
    gradient.add_scaled(-1.0, &cis_w);
    Ok((value, gradient))
}

#[derive(Clone, Debug)]
pub struct InnerSolveOutcome {
    /// z = C^{-1/2} y, the approximation to (lambda I - X_hat)^{-1} w.
    pub z: Vector,
    /// The minimizing argument in the preconditioned coordinates.
    pub y: Vector,
    pub iterations: u64,
    pub grad_norm: f64,
}

/// Numerical floor on the gradient-norm stopping threshold, relative to the
/// data scale; below it CG cannot certify progress in double precision.
const GRAD_FLOOR_REL: f64 = 1e-14;

fn stop_threshold(gap_est: f64, mu: f64, eps_target: f64, b_norm: f64) -> (f64, f64, u64) {
    // strong convexity of the preconditioned quadratic when the local and
    // pooled covariances are mu-close
    let alpha = (gap_est / (gap_est + 2.0 * mu)).clamp(f64::MIN_POSITIVE, 1.0);
    // F - F* <= ||grad||^2 / (2 alpha); F - F* <= gap * eps^2 / 2 gives
    // ||z - M^{-1} w|| <= eps
    let eps_prime = 0.5 * gap_est * eps_target * eps_target;
    let tau = (2.0 * alpha * eps_prime).sqrt().max(GRAD_FLOOR_REL * b_norm.max(1.0));
    let kappa_est = 1.0 + 2.0 * mu / gap_est;
    let cap = (10.0 * kappa_est.sqrt() * (1.0 / eps_prime).ln().max(1.0)) as u64;
    (tau, alpha, cap)
}

/// Minimizes the preconditioned quadratic to accuracy eps_target in the
/// original coordinates: on return ||z - (lambda I - X_hat)^{-1} w|| <=
/// eps_target (up to the double-precision floor). gap_est is the caller's
/// estimate of lambda - lambda1(X_hat).
pub fn inner_solve(
    cluster: &mut ClusterState,
    pc: &Preconditioner,
    w: &Vector,
    eps_target: f64,
    gap_est: f64,
    solver: InnerSolver,
) -> Result<InnerSolveOutcome> {
    if !(eps_target > 0.0) || !(gap_est > 0.0) {
        return Err(Error::Parameter(
            "inner_solve needs eps_target > 0 and gap_est > 0".into(),
        ));
    }
    let d = cluster.d;
    if w.norm() == 0.0 {
        return Ok(InnerSolveOutcome {
            z: Vector::zeros(d),
            y: Vector::zeros(d),
            iterations: 0,
            grad_norm: 0.0,
        });
    }
    let b = pc.c_inv_sqrt.matvec(w);
    let (tau, _alpha, cap) = stop_threshold(gap_est, pc.mu, eps_target, b.norm());
    let cap = cap + d as u64;

    let y = match solver {
        InnerSolver::ConjugateGradient => cg_loop(cluster, pc, w, &b, tau, cap)?,
        InnerSolver::AcceleratedGradient => agd_loop(cluster, pc, w, tau, cap, gap_est)?,
    };
    Ok(y)
}

fn cg_loop(
    cluster: &mut ClusterState,
    pc: &Preconditioner,
    w: &Vector,
    b: &Vector,
    tau: f64,
    cap: u64,
) -> Result<InnerSolveOutcome> {
    let d = cluster.d;
    let mut y = Vector::zeros(d);
    // gradient at 0 is -b
    let mut r = b.scaled(-1.0);
    let mut p = b.clone();
    let mut iterations = 0u64;
    let mut rr = r.dot(&r);
    while rr.sqrt() > tau {
        if iterations >= cap {
            return Err(Error::SolverStall {
                iters: iterations as usize,
                grad_norm: rr.sqrt(),
            });
        }
        // H p recovered from the oracle: grad(p) = H p - b
        let (_, grad_p) = precond_oracle(cluster, pc, w, &p)?;
        let mut hp = grad_p;
        hp.add_scaled(1.0, b);
        let php = p.dot(&hp);
        if !(php > 0.0) {
            return Err(Error::NumericalFailure(format!(
                "CG curvature p'Hp = {php:.3e} is not positive"
            )));
        }
        let step = rr / php;
        y.add_scaled(step, &p);
        r.add_scaled(step, &hp);
        let rr_new = r.dot(&r);
        let beta = rr_new / rr;
        let mut p_new = r.scaled(-1.0);
        p_new.add_scaled(beta, &p);
        p = p_new;
        rr = rr_new;
        iterations += 1;
    }
    Ok(InnerSolveOutcome {
        z: pc.c_inv_sqrt.matvec(&y),
        y,
        iterations,
        grad_norm: rr.sqrt(),
    })
}

fn agd_loop(
    cluster: &mut ClusterState,
    pc: &Preconditioner,
    w: &Vector,
    tau: f64,
    cap: u64,
    gap_est: f64,
) -> Result<InnerSolveOutcome> {
    // Nesterov's constant-momentum scheme for a 1-smooth, alpha-strongly
    // convex quadratic
    let d = cluster.d;
    let alpha = (gap_est / (gap_est + 2.0 * pc.mu)).clamp(f64::MIN_POSITIVE, 1.0);
    let sqrt_kappa = (1.0 / alpha).sqrt();
    let momentum = (sqrt_kappa - 1.0) / (sqrt_kappa + 1.0);
    let mut y_prev = Vector::zeros(d);
    let mut x = Vector::zeros(d);
    let mut iterations = 0u64;
    loop {
        let (_, grad) = precond_oracle(cluster, pc, w, &x)?;
        let gnorm = grad.norm();
        if gnorm <= tau {
            return Ok(InnerSolveOutcome {
                z: pc.c_inv_sqrt.matvec(&x),
                y: x,
                iterations,
                grad_norm: gnorm,
            });
        }
        if iterations >= cap {
            return Err(Error::SolverStall {
                iters: iterations as usize,
                grad_norm: gnorm,
            });
        }
        let mut y_next = x.clone();
        y_next.add_scaled(-1.0, &grad);
        let mut x_next = y_next.clone();
        x_next.add_scaled(momentum, &y_next.sub(&y_prev));
        y_prev = y_next;
        x = x_next;
        iterations += 1;
    }
}

/// One row of the outer-loop trace: shift index, shift value, the computed
/// step, inner iterations spent at this shift, cumulative rounds.
#[derive(Clone, Copy, Debug)]
pub struct ShiftTrace {
    pub s: u64,
    pub lambda: f64,
    pub delta: f64,
    pub inner_iterations: u64,
    pub cumulative_rounds: u64,
}

#[derive(Clone, Debug)]
pub struct ShiftInvertOutcome {
    pub w: Vector,
    pub lambda_final: f64,
    pub trace: Vec<ShiftTrace>,
    pub derived: ShiftInvertDerived,
    pub rounds: u64,
    pub matvecs: u64,
}

const MAX_SHIFTS: u64 = 500;

pub fn shift_invert(cluster: &mut ClusterState, cfg: &ShiftInvertConfig) -> Result<ShiftInvertOutcome> {
    cfg.validate()?;
    let d = cluster.d;
    let start_ledger = cluster.ledger();
    let mu = mu_from_data(cluster.n, d, cfg.failure_prob)?;

    let (local_lambda1, local_gap) = {
        let info = cluster.machines[0].local_spectrum()?;
        (info.lambda1, info.gap)
    };
    let lambda1_est = match cfg.lambda1_mode {
        Lambda1Estimate::Machine0 => local_lambda1,
        Lambda1Estimate::Pooled => sym_eig(&cluster.pooled_covariance(), 0.0)?.lambda1,
    };
    let gap_tilde = match cfg.gap_estimate {
        Some(g) => g,
        None => {
            let g = local_gap / 2.0;
            if !(g > 0.0) {
                return Err(Error::Degenerate(
                    "machine 0 local eigengap is zero; supply gap_estimate".into(),
                ));
            }
            g.min(1.0)
        }
    };
    let derived = derive_schedule(d, gap_tilde, cfg.epsilon, cfg.failure_prob, lambda1_est);
    let eps_tilde = derived.eps_tilde_effective;
    let machine0_cov = cluster.machines[0].local_cov.clone();
    let mut trace: Vec<ShiftTrace> = Vec::new();

    let mut w;
    let lambda_final;
    if cfg.warm_start {
        // no communication: the coordinator reads machine 0's local solution
        w = cluster.local_erm(0, SignPolicy::Canonical)?;
        lambda_final = local_lambda1 + local_gap / 2.0;
    } else {
        w = seeded_unit(d, cfg.seed ^ 0x51A9_7C2B_83D0_4E6F);
        let mut lambda = derived.lambda0;
        let mut s = 0u64;
        loop {
            s += 1;
            if s > MAX_SHIFTS {
                return Err(Error::NumericalFailure(format!(
                    "shift schedule did not terminate within {MAX_SHIFTS} shifts"
                )));
            }
            let pc = build_preconditioner(&machine0_cov, lambda, mu)?;
            let gap_est = (lambda - lambda1_est).max(eps_tilde);
            let mut inner_iters = 0u64;
            for _ in 0..derived.m1 {
                let out = inner_solve(cluster, &pc, &w, eps_tilde, gap_est, cfg.inner_solver)?;
                inner_iters += out.iterations;
                w = out.z.normalized()?;
            }
            let v = inner_solve(cluster, &pc, &w, eps_tilde, gap_est, cfg.inner_solver)?;
            inner_iters += v.iterations;
            let denom = w.dot(&v.z) - eps_tilde;
            if denom <= 0.0 {
                return Err(Error::NumericalFailure(format!(
                    "shift step denominator w'v - eps = {denom:.3e} is not positive"
                )));
            }
            let delta = 0.5 / denom;
            lambda -= delta / 2.0;
            trace.push(ShiftTrace {
                s,
                lambda,
                delta,
                inner_iterations: inner_iters,
                cumulative_rounds: cluster.round_counter - start_ledger.0,
            });
            if cfg.verbose {
                eprintln!(
                    "shift s={s} lambda={lambda:.12} delta={delta:.6e} inner={inner_iters} rounds={}",
                    cluster.round_counter - start_ledger.0
                );
            }
            if delta <= gap_tilde {
                break;
            }
        }
        lambda_final = lambda;
    }

    let pc = build_preconditioner(&machine0_cov, lambda_final, mu)?;
    let gap_est = (lambda_final - lambda1_est).max(eps_tilde);
    let mut final_iters = 0u64;
    for _ in 0..derived.m2 {
        let out = inner_solve(cluster, &pc, &w, eps_tilde, gap_est, cfg.inner_solver)?;
        final_iters += out.iterations;
        w = out.z.normalized()?;
    }
    trace.push(ShiftTrace {
        s: trace.last().map_or(1, |t| t.s + 1),
        lambda: lambda_final,
        delta: 0.0,
        inner_iterations: final_iters,
        cumulative_rounds: cluster.round_counter - start_ledger.0,
    });
    if cfg.verbose {
        eprintln!(
            "final lambda={lambda_final:.12} inner={final_iters} rounds={}",
            cluster.round_counter - start_ledger.0
        );
    }

    let end_ledger = cluster.ledger();
    Ok(ShiftInvertOutcome {
        w,
        lambda_final,
        trace,
        derived,
        rounds: end_ledger.0 - start_ledger.0,
        matvecs: end_ledger.1 - start_ledger.1,
    })
}
