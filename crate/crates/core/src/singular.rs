//! Finite singular points of the canonical form and the parameter windows
//! that keep exactly two of them.

use serde::{Deserialize, Serialize};

use crate::error::{QlcError, Result};
use crate::flow::{next_section_crossing, IntegratorConfig, Orientation, Section};
use crate::vectorfield::{det, trace, CanonicalParamsII, Mat2, Point, QuadraticCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularKind {
    Saddle,
    StableFocus,
    UnstableFocus,
    StableNode,
    UnstableNode,
    /// Purely imaginary eigenvalues; the nonlinear character (centre or weak
    /// focus) is not decided by the linearization.
    LinearCenter,
    Degenerate,
}

impl SingularKind {
    /// Positive Jacobian determinant.
    pub fn is_anti_saddle(self) -> bool {
        !matches!(self, SingularKind::Saddle | SingularKind::Degenerate)
    }

    pub fn is_focus_or_center(self) -> bool {
        matches!(
            self,
            SingularKind::StableFocus | SingularKind::UnstableFocus | SingularKind::LinearCenter
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

pub fn eigenvalues(m: &Mat2) -> [Eigenvalue; 2] {
    let tr = trace(m);
    let dt = det(m);
    let disc = tr * tr - 4.0 * dt;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // Stable pairing of the two real roots.
        let q = -0.5 * (-tr + if tr >= 0.0 { -sq } else { sq });
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q, dt / q) };
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        [Eigenvalue { re: lo, im: 0.0 }, Eigenvalue { re: hi, im: 0.0 }]
    } else {
        let im = (-disc).sqrt() / 2.0;
        [
            Eigenvalue { re: tr / 2.0, im: -im },
            Eigenvalue { re: tr / 2.0, im },
        ]
    }
}

const DET_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;

pub fn kind_from_jacobian(m: &Mat2) -> SingularKind {
    let tr = trace(m);
    let dt = det(m);
    if dt < -DET_TOL {
        SingularKind::Saddle
    } else if dt.abs() <= DET_TOL {
        SingularKind::Degenerate
    } else if tr.abs() <= TRACE_TOL {
        SingularKind::LinearCenter
    } else if tr * tr - 4.0 * dt < 0.0 {
        if tr > 0.0 {
            SingularKind::UnstableFocus
        } else {
            SingularKind::StableFocus
        }
    } else if tr > 0.0 {
        SingularKind::UnstableNode
    } else {
        SingularKind::StableNode
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub location: Point,
    pub jacobian: Mat2,
    pub eigenvalues: [Eigenvalue; 2],
    pub kind: SingularKind,
    pub divergence: f64,
}

impl SingularPoint {
    pub fn at(system: &QuadraticCoefficients, location: Point) -> Self {
        let jacobian = system.jacobian(location);
        Self {
            location,
            jacobian,
            eigenvalues: eigenvalues(&jacobian),
            kind: kind_from_jacobian(&jacobian),
            divergence: trace(&jacobian),
        }
    }
}

/// Classify a singular point of `system`; fails when `location` is not
/// singular to 1e-10.
pub fn classify(system: &QuadraticCoefficients, location: Point) -> Result<SingularKind> {
    let v = system.eval(location);
    let residual = v.norm();
    if residual > 1e-10 {
        return Err(QlcError::NotSingular {
            x: location.x,
            y: location.y,
            residual,
        });
    }
    Ok(kind_from_jacobian(&system.jacobian(location)))
}

/// Real roots of `a x^2 + b x + c`; `None` when the polynomial vanishes
/// identically.
fn real_roots(a: f64, b: f64, c: f64) -> Option<Vec<f64>> {
    if a == 0.0 {
        if b == 0.0 {
            return if c == 0.0 { None } else { Some(vec![]) };
        }
        return Some(vec![-c / b]);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Some(vec![]);
    }
    if disc == 0.0 {
        return Some(vec![-b / (2.0 * a)]);
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let q = if q == 0.0 { -0.5 * disc.sqrt() } else { q };
    let (r1, r2) = (q / a, c / q);
    Some(if r1 <= r2 { vec![r1, r2] } else { vec![r2, r1] })
}

/// All real finite singular points of the canonical form, sorted by `(x, y)`.
///
/// `P = -y (1 + nu y)` vanishes on `y = 0` and, for `nu = 1`, on `y = -1`;
/// on each line `Q` restricts to a quadratic in `x`.
pub fn finite_singular_points(p: &CanonicalParamsII) -> Result<Vec<SingularPoint>> {
    let system = p.to_general();
    let mut lines = vec![0.0];
    if p.nu() == 1 {
        lines.push(-1.0);
    }
    let bg = p.beta + p.gamma;
    let mut out = Vec::new();
    for y0 in lines {
        let qa = p.a;
        let qb = 1.0 + bg * y0;
        let qc = p.origin_trace() * y0 + p.c * p.gamma * y0 * y0;
        let roots = real_roots(qa, qb, qc).ok_or(QlcError::ContinuumOfSingularPoints)?;
        for x in roots {
            out.push(SingularPoint::at(&system, Point::new(x, y0)));
        }
    }
    out.sort_by(|a, b| {
        a.location
            .x
            .total_cmp(&b.location.x)
            .then(a.location.y.total_cmp(&b.location.y))
    });
    Ok(out)
}

/// Discriminant of `Q(x, -1)` for `nu = 1`; negative exactly when the line
/// `y = -1` carries no singular point.
pub fn lower_line_discriminant(p: &CanonicalParamsII) -> f64 {
    let bg = p.beta + p.gamma;
    let qb = 1.0 - bg;
    let qc = -p.origin_trace() + p.c * p.gamma;
    qb * qb - 4.0 * p.a * qc
}

/// The `gamma` window `(-1 + 2(c - sqrt(c(c-1))), -1 + 2(c + sqrt(c(c-1))))`.
pub fn gamma_window(c: f64) -> Result<(f64, f64)> {
    let r = c * (c - 1.0);
    if !(r >= 0.0) {
        return Err(QlcError::ConditionUndefined(format!("c(c-1) = {r} < 0")));
    }
    let s = r.sqrt();
    Ok((-1.0 + 2.0 * (c - s), -1.0 + 2.0 * (c + s)))
}

pub fn check_gamma_window(c: f64, gamma: f64) -> Result<bool> {
    let (lo, hi) = gamma_window(c)?;
    Ok(lo < gamma && gamma < hi)
}

/// Window for `beta + gamma + lambda`:
/// `(-1 - sqrt(4 c gamma - 1), -1 + sqrt(4 c gamma - 1))`.
pub fn trace_window(c: f64, gamma: f64) -> Result<(f64, f64)> {
    let r = 4.0 * c * gamma - 1.0;
    if !(r >= 0.0) {
        return Err(QlcError::ConditionUndefined(format!("4 c gamma - 1 = {r} < 0")));
    }
    let s = r.sqrt();
    Ok((-1.0 - s, -1.0 + s))
}

pub fn check_trace_window(c: f64, gamma: f64, beta: f64, lambda: f64) -> Result<bool> {
    let (lo, hi) = trace_window(c, gamma)?;
    let s = beta + gamma + lambda;
    Ok(lo < s && s < hi)
}

/// Sign of the first focus quantity at a weak focus at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusQuantityEstimate {
    /// -1, 0 or +1.
    pub sign: i8,
    /// Cubic coefficient of the displacement fitted on the base radii.
    pub coefficient: f64,
    /// Same fit on halved radii.
    pub coefficient_halved: f64,
}

/// Least-squares-free fit of `d(r) = l r^3 + m r^4 + n r^5` through three
/// samples; returns `l`.
fn cubic_coefficient(rs: &[f64; 3], ds: &[f64; 3]) -> f64 {
    // Divide by r^3: l + m r + n r^2 = d / r^3, a quadratic through 3 points.
    let g: Vec<f64> = rs.iter().zip(ds).map(|(r, d)| d / (r * r * r)).collect();
    let (r0, r1, r2) = (rs[0], rs[1], rs[2]);
    // Lagrange interpolation evaluated at r = 0.
    g[0] * (r1 * r2) / ((r0 - r1) * (r0 - r2))
        + g[1] * (r0 * r2) / ((r1 - r0) * (r1 - r2))
        + g[2] * (r0 * r1) / ((r2 - r0) * (r2 - r1))
}

/// Threshold on the fitted coefficient below which the estimate reports 0.
pub const FOCUS_QUANTITY_ZERO: f64 = 1e-4;

/// Estimate the sign of the first focus quantity from the return map on the
/// positive x-axis at radii `{1e-2, 2e-2, 4e-2}`, confirmed on halved radii.
pub fn first_lyapunov_sign(p: &CanonicalParamsII) -> Result<FocusQuantityEstimate> {
    let tr = p.origin_trace();
    if tr.abs() > 1e-12 {
        return Err(QlcError::NotWeakFocusCandidate(format!("origin trace {tr:e} is not zero")));
    }
    let system = p.to_general();
    let jac = system.jacobian(Point::ORIGIN);
    if det(&jac) <= 0.0 {
        return Err(QlcError::NotWeakFocusCandidate("origin Jacobian determinant is not positive".into()));
    }
    let cfg = IntegratorConfig {
        rtol: 1e-13,
        atol: 1e-15,
        max_step: 0.05,
        max_time: 100.0,
        ..IntegratorConfig::default()
    };
    let section = Section::default();
    let fit = |scale: f64| -> Result<f64> {
        let rs = [1e-2 * scale, 2e-2 * scale, 4e-2 * scale];
        let mut ds = [0.0; 3];
        for (d, &r) in ds.iter_mut().zip(&rs) {
            let (q, _) = next_section_crossing(&system, Point::new(r, 0.0), &section, Orientation::Positive, &cfg)?;
            *d = q.x - r;
        }
        Ok(cubic_coefficient(&rs, &ds))
    };
    let l = fit(1.0)?;
    let lh = fit(0.5)?;
    let sign_of = |v: f64| -> i8 {
        if v.abs() < FOCUS_QUANTITY_ZERO {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let s = sign_of(l);
    if s != sign_of(lh) {
        return Err(QlcError::NotWeakFocusCandidate(format!(
            "focus quantity estimate unstable under halving radii ({l:e} vs {lh:e})"
        )));
    }
    Ok(FocusQuantityEstimate {
        sign: s,
        coefficient: l,
        coefficient_halved: lh,
    })
}
