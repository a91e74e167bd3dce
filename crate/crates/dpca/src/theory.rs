//! Executable forms of the bounds: centralized ERM risk, the matrix
//! concentration tail, Davis-Kahan (top eigenvector and general k), the
//! second-order eigenvector perturbation residual, and the approximate-ERM
//! transfer inequality.

use crate::error::{Error, Result};
use crate::linalg::{
    shifted_pseudo_inverse_apply, spectral_norm, sym_eig, SymMatrix, Vector, UNIT_TOL,
};

/// One evaluated inequality: the bound, the measured quantity, and the slack.
#[derive(Clone, Copy, Debug)]
pub struct BoundReport {
    pub bound_value: f64,
    pub observed_value: f64,
    pub satisfied: bool,
    pub slack: f64,
}

pub const BOUND_TOL: f64 = 1e-9;

impl BoundReport {
    pub fn new(bound_value: f64, observed_value: f64) -> BoundReport {
        BoundReport {
            bound_value,
            observed_value,
            satisfied: observed_value <= bound_value + BOUND_TOL,
            slack: bound_value - observed_value,
        }
    }
}

/// Risk bound for the centralized leading-eigenvector estimate:
/// 32 b^2 ln(d/p) / (m n delta^2).
pub fn epsilon_erm(b: f64, d: usize, p: f64, m: usize, n: usize, delta: f64) -> Result<f64> {
    if !(b > 0.0 && delta > 0.0) || d < 1 || m < 1 || n < 1 || !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(
            "epsilon_erm needs positive arguments and p in (0,1)".into(),
        ));
    }
    Ok(32.0 * b * b * (d as f64 / p).ln() / (m as f64 * n as f64 * delta * delta))
}

/// Tail probability that the empirical covariance of n norm-b-bounded samples
/// deviates from its mean by eps in spectral norm: d exp(-eps^2 n / (16 b^2)),
/// clamped to [0,1] for reporting.
pub fn hoeffding_tail(eps: f64, n: usize, b: f64, d: usize) -> Result<f64> {
    if !(eps > 0.0) || !(b > 0.0) || d < 1 {
        return Err(Error::Parameter(
            "hoeffding_tail needs eps > 0, b > 0, d >= 1".into(),
        ));
    }
    Ok((d as f64 * (-eps * eps * n as f64 / (16.0 * b * b)).exp()).clamp(0.0, 1.0))
}

/// Eigenvector (k=1) and invariant-subspace (k>=1) perturbation check.
/// For k=1: observed 1-(vX.vY)^2 against 2||X-Y||^2/gap(X)^2.
/// For general k: observed ||P_X - P_Y||_F against 2||X-Y||/gap_k(X).
pub fn davis_kahan_check(x: &SymMatrix, y: &SymMatrix, k: usize) -> Result<BoundReport> {
    let d = x.dim();
    if y.dim() != d {
        return Err(Error::DimensionMismatch("davis_kahan_check: X vs Y".into()));
    }
    if k < 1 || k >= d {
        return Err(Error::Parameter(format!(
            "davis_kahan_check needs 1 <= k < d, got k={k}, d={d}"
        )));
    }
    let ix = sym_eig(x, 0.0)?;
    let iy = sym_eig(y, 0.0)?;
    let gap_k = ix.eigenvalues[k - 1] - ix.eigenvalues[k];
    if gap_k <= 1e-12 * ix.lambda1.abs().max(1.0) {
        return Err(Error::Degenerate(format!(
            "davis_kahan_check: zero k-th eigengap ({gap_k:.3e})"
        )));
    }
    let diff_norm = spectral_norm(&x.sub(y))?;
    if k == 1 {
        let c = ix.v1.dot(&iy.v1);
        let observed = (1.0 - c * c).clamp(0.0, 1.0);
        let bound = 2.0 * diff_norm * diff_norm / (gap_k * gap_k);
        return Ok(BoundReport::new(bound, observed));
    }
    let proj = |vecs: &[Vector]| {
        let mut p = SymMatrix::zeros(d);
        for v in vecs.iter().take(k) {
            p.add_outer(v, 1.0);
        }
        p
    };
    let observed = proj(&ix.eigenvectors).sub(&proj(&iy.eigenvectors)).frobenius();
    let bound = 2.0 * diff_norm / gap_k;
    Ok(BoundReport::new(bound, observed))
}

/// Residual of the first-order eigenvector expansion: with E = A_hat - A and
/// v1_hat signed so v1_hat.v1 >= 0, returns
/// (||v1_hat - v1 - (lambda1 I - A)^+ E v1||, ||E||).
/// Requires ||E|| <= gap(A)/4.
pub fn taylor_residual(a: &SymMatrix, a_hat: &SymMatrix) -> Result<(f64, f64)> {
    if a.dim() != a_hat.dim() {
        return Err(Error::DimensionMismatch("taylor_residual: A vs A_hat".into()));
    }
    let ia = sym_eig(a, 0.0)?;
    if ia.gap <= 1e-12 * ia.lambda1.abs().max(1.0) {
        return Err(Error::Degenerate("taylor_residual: zero eigengap".into()));
    }
    let e = a_hat.sub(a);
    let e_norm = spectral_norm(&e)?;
    if e_norm > ia.gap / 4.0 {
        return Err(Error::Parameter(format!(
            "taylor_residual hypothesis violated: ||E|| = {e_norm:.3e} > gap/4 = {:.3e}",
            ia.gap / 4.0
        )));
    }
    let ih = sym_eig(a_hat, 0.0)?;
    let v1_hat = if ih.v1.dot(&ia.v1) < 0.0 {
        ih.v1.scaled(-1.0)
    } else {
        ih.v1.clone()
    };
    // first-order term: (lambda1 I - A)^+ E v1
    let first_order = shifted_pseudo_inverse_apply(a, ia.lambda1, &e.matvec(&ia.v1))?;
    let mut resid = v1_hat.sub(&ia.v1);
    resid.add_scaled(-1.0, &first_order);
    Ok((resid.norm(), e_norm))
}

/// Transfer inequality for an approximate empirical solution: with
/// eps = 1-(w.v_hat)^2, checks 1-(w.v1)^2 <= 1-(w.v_hat)^2 + sqrt(2 eps).
pub fn approx_erm_transfer(w: &Vector, v_hat: &Vector, v1: &Vector) -> Result<BoundReport> {
    for (name, v) in [("w", w), ("v_hat", v_hat), ("v1", v1)] {
        if !v.is_unit(UNIT_TOL) {
            return Err(Error::Parameter(format!(
                "approx_erm_transfer: {name} is not a unit vector (norm {:.12})",
                v.norm()
            )));
        }
    }
    let c_hat = w.dot(v_hat);
    let eps = (1.0 - c_hat * c_hat).clamp(0.0, 1.0);
    let c = w.dot(v1);
    let observed = (1.0 - c * c).clamp(0.0, 1.0);
    let bound = eps + (2.0 * eps).sqrt();
    Ok(BoundReport::new(bound, observed))
}

/// Least-squares slope of log(y) against log(x); used by the second-order
/// scaling tests.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Parameter("log_log_slope needs >= 2 points".into()));
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| {
            if x > 0.0 && y > 0.0 {
                Ok((x.ln(), y.ln()))
            } else {
                Err(Error::Parameter("log_log_slope needs positive data".into()))
            }
        })
        .collect::<Result<_>>()?;
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("log_log_slope: degenerate abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Per-family second-order scaling report: builds a rotated matrix with a
/// controlled eigengap, perturbs it along a random symmetric direction at
/// geometrically shrinking magnitudes, and returns the fitted log-log slope of
/// the residual together with the worst residual/(||E||^2/gap^2) ratio.
pub fn taylor_slope_families(families: usize, base_seed: u64) -> Result<Vec<(f64, f64)>> {
    use crate::distributions::random_orthonormal;
    use crate::rng::{mix64, SplitMix64};

    let d = 8;
    let mut out = Vec::with_capacity(families);
    for f in 0..families {
        let seed = mix64(base_seed, f as u64);
        let mut rng = SplitMix64::new(seed);
        let gap = 0.4 + 0.3 * rng.next_f64();
        let basis = random_orthonormal(d, seed ^ 0x9E37_79B9_7F4A_7C15);
        let mut a = SymMatrix::zeros(d);
        let mut lam = 2.0;
        for (j, col) in basis.iter().enumerate() {
            a.add_outer(col, lam);
            lam = if j == 0 { 2.0 - gap } else { lam * 0.7 };
        }
        let mut e_dir = SymMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                e_dir.set_sym(i, j, rng.next_signed());
            }
        }
        let e_dir = e_dir.scaled(1.0 / spectral_norm(&e_dir)?);

        let mut pts = Vec::new();
        let mut worst_ratio = 0.0f64;
        for k in 0..4 {
            let t = 0.99 * gap / 4.0 * 10f64.powi(-k);
            let a_hat = a.add(&e_dir.scaled(t));
            let (resid, e_norm) = taylor_residual(&a, &a_hat)?;
            pts.push((e_norm, resid));
            worst_ratio = worst_ratio.max(resid / (e_norm * e_norm / (gap * gap)));
        }
        out.push((log_log_slope(&pts)?, worst_ratio));
    }
    Ok(out)
}
