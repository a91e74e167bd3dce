//! Dense symmetric linear algebra kernels sized for d up to a few hundred:
//! cyclic-Jacobi eigendecomposition, matrix functions and norms.

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const UNIT_TOL: f64 = 1e-9;
const MAX_JACOBI_SWEEPS: usize = 100;

/// Dense real vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(d: usize) -> Self {
        Vector(vec![0.0; d])
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn scaled(&self, a: f64) -> Vector {
        Vector(self.0.iter().map(|x| a * x).collect())
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &Vector) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn normalized(&self) -> Result<Vector> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::Degenerate("cannot normalize zero vector".into()));
        }
        Ok(self.scaled(1.0 / n))
    }

    /// Flip the sign so the largest-magnitude coordinate is positive.
    pub fn canonical_sign(mut self) -> Vector {
        let mut best = 0usize;
        for i in 1..self.0.len() {
            if self.0[i].abs() > self.0[best].abs() {
                best = i;
            }
        }
        if self.0[best] < 0.0 {
            for x in &mut self.0 {
                *x = -*x;
            }
        }
        self
    }
}

/// Dense real symmetric matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    entries: Vec<f64>,
    d: usize,
}

impl SymMatrix {
    /// Validates finiteness and symmetry, then stores the symmetrized matrix.
    pub fn new(entries: Vec<f64>, d: usize) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {d}x{d} matrix, got {}",
                d * d,
                entries.len()
            )));
        }
        if !entries.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("SymMatrix"));
        }
        let fro = entries.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tol = SYMMETRY_TOL * fro.max(1.0);
        let mut max_dev = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                max_dev = max_dev.max((entries[i * d + j] - entries[j * d + i]).abs());
            }
        }
        if max_dev > tol {
            return Err(Error::NotSymmetric { max_dev, tol });
        }
        let mut m = SymMatrix { entries, d };
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (m.entries[i * d + j] + m.entries[j * d + i]);
                m.entries[i * d + j] = avg;
                m.entries[j * d + i] = avg;
            }
        }
        Ok(m)
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix {
            entries: vec![0.0; d * d],
            d,
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.entries[i * d + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.entries[i * d + i] = diag[i];
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.d + j] = v;
        self.entries[j * self.d + i] = v;
    }

    pub fn matvec(&self, v: &Vector) -> Vector {
        assert_eq!(v.dim(), self.d, "matvec dimension mismatch");
        let mut out = vec![0.0; self.d];
        for i in 0..self.d {
            let row = &self.entries[i * self.d..(i + 1) * self.d];
            out[i] = row.iter().zip(&v.0).map(|(a, b)| a * b).sum();
        }
        Vector(out)
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.d, other.d);
        SymMatrix {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
            d: self.d,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.d, other.d);
        SymMatrix {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
            d: self.d,
        }
    }

    pub fn scaled(&self, a: f64) -> SymMatrix {
        SymMatrix {
            entries: self.entries.iter().map(|x| a * x).collect(),
            d: self.d,
        }
    }

    /// `self += weight * v v^T`
    pub fn add_outer(&mut self, v: &Vector, weight: f64) {
        assert_eq!(v.dim(), self.d);
        for i in 0..self.d {
            let wi = weight * v.0[i];
            for j in 0..self.d {
                self.entries[i * self.d + j] += wi * v.0[j];
            }
        }
    }

    /// Symmetric product A*B*A for symmetric A = self, B = other. Used by the
    /// preconditioner identity checks; the result is symmetrized.
    pub fn sandwich(&self, other: &SymMatrix) -> SymMatrix {
        let ab = self.mul_general(other);
        ab.mul_sym(self)
    }

    fn mul_general(&self, other: &SymMatrix) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let aik = self.entries[i * d + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += aik * other.entries[k * d + j];
                }
            }
        }
        out
    }
}

trait MulSym {
    fn mul_sym(self, rhs: &SymMatrix) -> SymMatrix;
}

impl MulSym for Vec<f64> {
    fn mul_sym(self, rhs: &SymMatrix) -> SymMatrix {
        let d = rhs.d;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let aik = self[i * d + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += aik * rhs.entries[k * d + j];
                }
            }
        }
        // numerical symmetrization
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (out[i * d + j] + out[j * d + i]);
                out[i * d + j] = avg;
                out[j * d + i] = avg;
            }
        }
        SymMatrix { entries: out, d }
    }
}

/// Leading eigenpair(s) and eigengap of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SpectralInfo {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `lambda1 - lambda2`, clamped at zero.
    pub gap: f64,
    /// Unit leading eigenvector, sign canonicalized.
    pub v1: Vector,
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors matching `eigenvalues`.
    pub eigenvectors: Vec<Vector>,
}

/// Full eigendecomposition via cyclic Jacobi rotations.
///
/// `tol` bounds the final off-diagonal Frobenius norm relative to the scale of
/// the matrix; pass 0.0 for the default `1e-12 * ||A||_F`.
pub fn sym_eig(a: &SymMatrix, tol: f64) -> Result<SpectralInfo> {
    let d = a.d;
    if d == 0 {
        return Err(Error::Parameter("empty matrix".into()));
    }
    if !a.entries.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("sym_eig input"));
    }
    let fro = a.frobenius();
    let eff_tol = if tol > 0.0 { tol * fro.max(1.0) } else { 1e-12 * fro.max(1.0) };

    let mut b = a.entries.clone();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }

    let off_norm = |b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                s += 2.0 * b[i * d + j] * b[i * d + j];
            }
        }
        s.sqrt()
    };

    let mut final_off = off_norm(&b);
    let mut converged = final_off <= eff_tol;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_JACOBI_SWEEPS {
        sweeps += 1;
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = b[p * d + q];
                if apq.abs() <= eff_tol / (d as f64 * d as f64) {
                    continue;
                }
                let app = b[p * d + p];
                let aqq = b[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // rows/cols p,q of B
                for k in 0..d {
                    if k != p && k != q {
                        let akp = b[k * d + p];
                        let akq = b[k * d + q];
                        let np = c * akp - s * akq;
                        let nq = s * akp + c * akq;
                        b[k * d + p] = np;
                        b[p * d + k] = np;
                        b[k * d + q] = nq;
                        b[q * d + k] = nq;
                    }
                }
                b[p * d + p] = app - t * apq;
                b[q * d + q] = aqq + t * apq;
                b[p * d + q] = 0.0;
                b[q * d + p] = 0.0;

                // eigenvector accumulation
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
        final_off = off_norm(&b);
        converged = final_off <= eff_tol;
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps,
            off_norm: final_off,
        });
    }

    let mut pairs: Vec<(f64, Vector)> = (0..d)
        .map(|j| {
            let col = Vector((0..d).map(|i| v[i * d + j]).collect());
            (b[j * d + j], col.canonical_sign())
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

    let lambda1 = pairs[0].0;
    let lambda2 = if d > 1 { pairs[1].0 } else { f64::NEG_INFINITY };
    let gap = if d > 1 { (lambda1 - lambda2).max(0.0) } else { f64::INFINITY };
    let v1 = pairs[0].1.clone();
    let (eigenvalues, eigenvectors): (Vec<f64>, Vec<Vector>) = pairs.into_iter().unzip();
    Ok(SpectralInfo {
        lambda1,
        lambda2,
        gap,
        v1,
        eigenvalues,
        eigenvectors,
    })
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(a: &SymMatrix) -> Result<f64> {
    let info = sym_eig(a, 0.0)?;
    Ok(info
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.abs())))
}

/// Inverse square root of a positive definite matrix: returns `S` with
/// `S C S = I`.
pub fn inv_sqrt_psd(c: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    let info = sym_eig(c, 0.0)?;
    let min_eig = *info.eigenvalues.last().unwrap();
    if min_eig <= floor {
        return Err(Error::NotInvertible { min_eig, floor });
    }
    Ok(from_eigenbasis(&info, |lam| 1.0 / lam.sqrt()))
}

/// Rebuild `f(C)` from an eigendecomposition of `C`.
pub fn from_eigenbasis(info: &SpectralInfo, f: impl Fn(f64) -> f64) -> SymMatrix {
    let d = info.v1.dim();
    let mut out = SymMatrix::zeros(d);
    for (lam, vec) in info.eigenvalues.iter().zip(&info.eigenvectors) {
        out.add_outer(vec, f(*lam));
    }
    out
}

/// Applies the pseudo-inverse `(lambda1 I - A)^+` to `u` via the eigenbasis of
/// `A`, annihilating the leading-eigenvector component.
pub fn shifted_pseudo_inverse_apply(a: &SymMatrix, lambda1: f64, u: &Vector) -> Result<Vector> {
    if u.dim() != a.dim() {
        return Err(Error::DimensionMismatch(
            "shifted_pseudo_inverse_apply: vector/matrix".into(),
        ));
    }
    let info = sym_eig(a, 0.0)?;
    let scale = info.lambda1.abs().max(1.0);
    if info.gap <= 1e-12 * scale {
        return Err(Error::Degenerate(format!(
            "zero eigengap ({:.3e}) in shifted pseudo-inverse",
            info.gap
        )));
    }
    let mut out = Vector::zeros(a.dim());
    for (k, (lam, vec)) in info.eigenvalues.iter().zip(&info.eigenvectors).enumerate() {
        if k == 0 {
            continue; // null-space component
        }
        let coeff = vec.dot(u) / (lambda1 - lam);
        out.add_scaled(coeff, vec);
    }
    Ok(out)
}


#[cfg(test)]
pub use tests::{random_spd, random_symmetric};
