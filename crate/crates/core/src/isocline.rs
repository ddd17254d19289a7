//! Nullcline conics and their factorization into straight lines.

use serde::{Deserialize, Serialize};

use crate::vectorfield::{Point, QuadraticCoefficients};

/// `c00 + c10 x + c01 y + c20 x^2 + c11 x y + c02 y^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ConicCurve {
    pub c00: f64,
    pub c10: f64,
    pub c01: f64,
    pub c20: f64,
    pub c11: f64,
    pub c02: f64,
}

impl ConicCurve {
    pub fn eval(&self, p: Point) -> f64 {
        let (x, y) = (p.x, p.y);
        self.c00 + self.c10 * x + self.c01 * y + self.c20 * x * x + self.c11 * x * y + self.c02 * y * y
    }

    fn coeffs(&self) -> [f64; 6] {
        [self.c00, self.c10, self.c01, self.c20, self.c11, self.c02]
    }

    fn max_abs(&self) -> f64 {
        self.coeffs().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coefficient-wise distance to `other`.
    pub fn max_diff(&self, other: &ConicCurve) -> f64 {
        self.coeffs()
            .iter()
            .zip(other.coeffs())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// The product of two lines, scaled.
    pub fn from_lines(l1: &Line, l2: &Line, scale: f64) -> Self {
        let (a1, b1, d1) = (l1.normal.x, l1.normal.y, l1.offset);
        let (a2, b2, d2) = (l2.normal.x, l2.normal.y, l2.offset);
        Self {
            c00: scale * d1 * d2,
            c10: scale * (a1 * d2 + a2 * d1),
            c01: scale * (b1 * d2 + b2 * d1),
            c20: scale * a1 * a2,
            c11: scale * (a1 * b2 + a2 * b1),
            c02: scale * b1 * b2,
        }
    }

    /// A single line, scaled.
    pub fn from_line(l: &Line, scale: f64) -> Self {
        Self {
            c00: scale * l.offset,
            c10: scale * l.normal.x,
            c01: scale * l.normal.y,
            ..Default::default()
        }
    }
}

/// The line `normal . p + offset = 0` with a unit normal whose first nonzero
/// component is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub normal: Point,
    pub offset: f64,
}

impl Line {
    /// Normalizes `(a, b, d)`; returns the line and the factor that was
    /// divided out.
    pub fn normalized(a: f64, b: f64, d: f64) -> (Line, f64) {
        let mut n = a.hypot(b);
        let first = if a.abs() > 1e-15 * n { a } else { b };
        if first < 0.0 {
            n = -n;
        }
        (
            Line {
                normal: Point::new(a / n, b / n),
                offset: d / n,
            },
            n,
        )
    }

    pub fn signed_distance(&self, p: Point) -> f64 {
        self.normal.x * p.x + self.normal.y * p.y + self.offset
    }

    /// Same line up to `tol` in normal and offset.
    pub fn approx_eq(&self, other: &Line, tol: f64) -> bool {
        (self.normal.x - other.normal.x).abs() <= tol
            && (self.normal.y - other.normal.y).abs() <= tol
            && (self.offset - other.offset).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IsoclineTag {
    TwoParallelLines,
    TwoIntersectingLines,
    DoubleLine,
    SingleLine,
    IrreducibleConic,
    EmptyOrWholePlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoclineClass {
    pub tag: IsoclineTag,
    /// Extracted lines, sorted by offset then normal.
    pub lines: Vec<Line>,
    /// Factor such that the conic equals `scale` times the product of the
    /// lines (the line itself for `SingleLine`, its square for `DoubleLine`).
    pub scale: f64,
}

impl IsoclineClass {
    fn bare(tag: IsoclineTag) -> Self {
        Self {
            tag,
            lines: Vec::new(),
            scale: 0.0,
        }
    }

    /// Multiply the extracted lines back out.
    pub fn reconstruct(&self) -> Option<ConicCurve> {
        match (self.tag, self.lines.as_slice()) {
            (IsoclineTag::SingleLine, [l]) => Some(ConicCurve::from_line(l, self.scale)),
            (IsoclineTag::DoubleLine, [l]) => Some(ConicCurve::from_lines(l, l, self.scale)),
            (IsoclineTag::TwoParallelLines | IsoclineTag::TwoIntersectingLines, [l1, l2]) => {
                Some(ConicCurve::from_lines(l1, l2, self.scale))
            }
            _ => None,
        }
    }
}

/// The `x' = 0` (vertical) and `y' = 0` (horizontal) isocline conics.
pub fn nullcline_conics(system: &QuadraticCoefficients) -> (ConicCurve, ConicCurve) {
    let s = system;
    (
        ConicCurve {
            c00: s.a00,
            c10: s.a10,
            c01: s.a01,
            c20: s.a20,
            c11: s.a11,
            c02: s.a02,
        },
        ConicCurve {
            c00: s.b00,
            c10: s.b10,
            c01: s.b01,
            c20: s.b20,
            c11: s.b11,
            c02: s.b02,
        },
    )
}

const DEGENERACY_TOL: f64 = 1e-10;

fn sort_lines(lines: &mut [Line]) {
    lines.sort_by(|a, b| {
        a.offset
            .total_cmp(&b.offset)
            .then(a.normal.x.total_cmp(&b.normal.x))
            .then(a.normal.y.total_cmp(&b.normal.y))
    });
}

/// Factor a conic into real lines when it is degenerate.
pub fn classify_conic(conic: &ConicCurve) -> IsoclineClass {
    let scale = conic.max_abs();
    if scale == 0.0 {
        return IsoclineClass::bare(IsoclineTag::EmptyOrWholePlane);
    }
    let ConicCurve {
        c00,
        c10,
        c01,
        c20,
        c11,
        c02,
    } = *conic;
    let quad_scale = c20.abs().max(c11.abs()).max(c02.abs());
    if quad_scale <= DEGENERACY_TOL * scale {
        if c10.abs().max(c01.abs()) <= DEGENERACY_TOL * scale {
            return IsoclineClass::bare(IsoclineTag::EmptyOrWholePlane);
        }
        let (line, n) = Line::normalized(c10, c01, c00);
        return IsoclineClass {
            tag: IsoclineTag::SingleLine,
            lines: vec![line],
            scale: n,
        };
    }
    // Extended symmetric matrix of the conic.
    let m = [
        [c20, c11 / 2.0, c10 / 2.0],
        [c11 / 2.0, c02, c01 / 2.0],
        [c10 / 2.0, c01 / 2.0, c00],
    ];
    let det3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det3.abs() > DEGENERACY_TOL * scale.powi(3) {
        return IsoclineClass::bare(IsoclineTag::IrreducibleConic);
    }
    let disc = c11 * c11 - 4.0 * c20 * c02;
    if disc.abs() <= DEGENERACY_TOL * quad_scale * quad_scale {
        parallel_pair(conic)
    } else if disc > 0.0 {
        intersecting_pair(conic, disc)
    } else {
        // Complex-conjugate pair meeting in one real point.
        IsoclineClass::bare(IsoclineTag::IrreducibleConic)
    }
}

fn parallel_pair(conic: &ConicCurve) -> IsoclineClass {
    let ConicCurve {
        c00,
        c10,
        c01,
        c20,
        c11,
        c02,
    } = *conic;
    // Quadratic part k (n . p)^2 with unit n.
    let (n, k) = if c20.abs() >= c02.abs() {
        let (l, f) = Line::normalized(1.0, c11 / (2.0 * c20), 0.0);
        (l.normal, c20 * f * f)
    } else {
        let (l, f) = Line::normalized(c11 / (2.0 * c02), 1.0, 0.0);
        (l.normal, c02 * f * f)
    };
    let m = c10 * n.x + c01 * n.y;
    // k u^2 + m u + c00 = 0 in u = n . p
    let disc = m * m - 4.0 * k * c00;
    let tol = DEGENERACY_TOL * (m * m).max((k * c00).abs()).max(f64::MIN_POSITIVE);
    if disc.abs() <= tol {
        let u = -m / (2.0 * k);
        return IsoclineClass {
            tag: IsoclineTag::DoubleLine,
            lines: vec![Line { normal: n, offset: -u }],
            scale: k,
        };
    }
    if disc < 0.0 {
        return IsoclineClass::bare(IsoclineTag::EmptyOrWholePlane);
    }
    let sq = disc.sqrt();
    let q = -0.5 * (m + m.signum() * sq);
    let (u1, u2) = if q == 0.0 {
        (sq / (2.0 * k), -sq / (2.0 * k))
    } else {
        (q / k, c00 / q)
    };
    let mut lines = vec![
        Line {
            normal: n,
            offset: -u1,
        },
        Line {
            normal: n,
            offset: -u2,
        },
    ];
    sort_lines(&mut lines);
    IsoclineClass {
        tag: IsoclineTag::TwoParallelLines,
        lines,
        scale: k,
    }
}

fn intersecting_pair(conic: &ConicCurve, disc: f64) -> IsoclineClass {
    let ConicCurve {
        c10,
        c01,
        c20,
        c11,
        c02,
        ..
    } = *conic;
    // Centre: gradient of the conic vanishes.
    let d = 4.0 * c20 * c02 - c11 * c11;
    let x0 = (-c10 * 2.0 * c02 + c01 * c11) / d;
    let y0 = (-c01 * 2.0 * c20 + c10 * c11) / d;
    let sq = disc.sqrt();
    let raw: [(f64, f64); 2];
    let mut factor;
    if c20 == 0.0 && c02 == 0.0 {
        // c11 X Y
        raw = [(1.0, 0.0), (0.0, 1.0)];
        factor = c11;
    } else if c20.abs() >= c02.abs() {
        // c20 (X - r1 Y)(X - r2 Y)
        let q = -0.5 * (c11 + c11.signum() * sq);
        let q = if q == 0.0 { -0.5 * sq } else { q };
        let r1 = q / c20;
        let r2 = c02 / q;
        raw = [(1.0, -r1), (1.0, -r2)];
        factor = c20;
    } else {
        // c02 (Y - s1 X)(Y - s2 X)
        let q = -0.5 * (c11 + c11.signum() * sq);
        let q = if q == 0.0 { -0.5 * sq } else { q };
        let s1 = q / c02;
        let s2 = c20 / q;
        raw = [(-s1, 1.0), (-s2, 1.0)];
        factor = c02;
    }
    let mut lines = Vec::with_capacity(2);
    for (a, b) in raw {
        let (l, n) = Line::normalized(a, b, -(a * x0 + b * y0));
        factor *= n;
        lines.push(l);
    }
    sort_lines(&mut lines);
    IsoclineClass {
        tag: IsoclineTag::TwoIntersectingLines,
        lines,
        scale: factor,
    }
}
