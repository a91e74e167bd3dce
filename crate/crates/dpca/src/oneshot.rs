//! Single-round aggregators for the locally computed eigenvectors, and the
//! alignment error metric used throughout.

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SymMatrix, Vector, UNIT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregationMethod {
    NaiveAverage,
    SignFixAverage,
    ProjectionAverage,
}

impl AggregationMethod {
    pub fn name(&self) -> &'static str {
        match self {
            AggregationMethod::NaiveAverage => "naive",
            AggregationMethod::SignFixAverage => "signfix",
            AggregationMethod::ProjectionAverage => "projection",
        }
    }

    pub fn aggregate(&self, vs: &[Vector]) -> Result<Vector> {
        match self {
            AggregationMethod::NaiveAverage => aggregate_naive(vs),
            AggregationMethod::SignFixAverage => aggregate_signfix(vs),
            AggregationMethod::ProjectionAverage => aggregate_projection(vs),
        }
    }
}

/// Alignment error 1 - (v1 . w)^2, sign-invariant in both arguments.
pub fn error_metric(w: &Vector, v1: &Vector) -> Result<f64> {
    if !w.is_unit(UNIT_TOL) || !v1.is_unit(UNIT_TOL) {
        return Err(Error::Parameter(format!(
            "error_metric expects unit vectors (norms {:.12}, {:.12})",
            w.norm(),
            v1.norm()
        )));
    }
    let c = w.dot(v1);
    Ok((1.0 - c * c).clamp(0.0, 1.0))
}

fn check_units(vs: &[Vector]) -> Result<()> {
    if vs.is_empty() {
        return Err(Error::Parameter("aggregation needs at least one vector".into()));
    }
    for (i, v) in vs.iter().enumerate() {
        if !v.is_unit(UNIT_TOL) {
            return Err(Error::Parameter(format!(
                "aggregation input {i} is not unit (norm {:.12})",
                v.norm()
            )));
        }
    }
    Ok(())
}

fn mean(vs: &[Vector], signs: Option<&[f64]>) -> Vector {
    let mut acc = Vector::zeros(vs[0].dim());
    for (i, v) in vs.iter().enumerate() {
        let s = signs.map_or(1.0, |s| s[i]);
        acc.add_scaled(s / vs.len() as f64, v);
    }
    acc
}

/// Mean of the inputs, normalized. Exact cancellation is surfaced as an error
/// rather than an arbitrary direction.
pub fn aggregate_naive(vs: &[Vector]) -> Result<Vector> {
    check_units(vs)?;
    let avg = mean(vs, None);
    let norm = avg.norm();
    if norm < 1e-12 {
        return Err(Error::Cancellation(norm));
    }
    Ok(avg.scaled(1.0 / norm))
}

/// Each input is flipped to positively correlate with the first one (the
/// reference machine), then averaged and normalized. sign(0) is taken as +1.
pub fn aggregate_signfix(vs: &[Vector]) -> Result<Vector> {
    check_units(vs)?;
    let reference = &vs[0];
    let signs: Vec<f64> = vs
        .iter()
        .map(|v| if v.dot(reference) < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let avg = mean(vs, Some(&signs));
    let norm = avg.norm();
    if norm < 1e-12 {
        return Err(Error::Cancellation(norm));
    }
    Ok(avg.scaled(1.0 / norm))
}

/// Leading eigenvector of the mean of the outer products, canonical sign.
/// A tie in the top eigenvalue of the aggregate is reported as degenerate.
pub fn aggregate_projection(vs: &[Vector]) -> Result<Vector> {
    check_units(vs)?;
    let d = vs[0].dim();
    let mut p = SymMatrix::zeros(d);
    for v in vs {
        p.add_outer(v, 1.0 / vs.len() as f64);
    }
    let info = sym_eig(&p, 0.0)?;
    if info.gap <= 1e-12 {
        return Err(Error::Degenerate(format!(
            "tied top eigenvalue of the projection average (gap {:.3e})",
            info.gap
        )));
    }
    Ok(info.v1)
}
