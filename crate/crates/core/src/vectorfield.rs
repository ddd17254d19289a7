//! Quadratic planar vector fields.
//!
//! Every system is stored as the twelve coefficients of
//!
//! ```text
//! x' = a00 + a10 x + a01 y + a20 x^2 + a11 x y + a02 y^2
//! y' = b00 + b10 x + b01 y + b20 x^2 + b11 x y + b02 y^2
//! ```
//!
//! The canonical families are constructors that produce this layout, so there
//! is a single evaluation path.

use serde::{Deserialize, Serialize};

use crate::error::{QlcError, Result};

/// A point of the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Row-major 2x2 matrix.
pub type Mat2 = [[f64; 2]; 2];

pub fn trace(m: &Mat2) -> f64 {
    m[0][0] + m[1][1]
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Coefficients of a general quadratic system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct QuadraticCoefficients {
    pub a00: f64,
    pub a10: f64,
    pub a01: f64,
    pub a20: f64,
    pub a11: f64,
    pub a02: f64,
    pub b00: f64,
    pub b10: f64,
    pub b01: f64,
    pub b20: f64,
    pub b11: f64,
    pub b02: f64,
}

impl QuadraticCoefficients {
    pub fn as_array(&self) -> [f64; 12] {
        [
            self.a00, self.a10, self.a01, self.a20, self.a11, self.a02, self.b00, self.b10,
            self.b01, self.b20, self.b11, self.b02,
        ]
    }

    pub fn from_array(c: [f64; 12]) -> Self {
        Self {
            a00: c[0],
            a10: c[1],
            a01: c[2],
            a20: c[3],
            a11: c[4],
            a02: c[5],
            b00: c[6],
            b10: c[7],
            b01: c[8],
            b20: c[9],
            b11: c[10],
            b02: c[11],
        }
    }

    /// True when at least one second-degree coefficient is nonzero.
    pub fn is_quadratic(&self) -> bool {
        [self.a20, self.a11, self.a02, self.b20, self.b11, self.b02]
            .iter()
            .any(|&v| v != 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|v| !v.is_finite()) {
            return Err(QlcError::InvalidSystem("non-finite coefficient".into()));
        }
        if !self.is_quadratic() {
            return Err(QlcError::InvalidSystem(
                "all quadratic coefficients are zero".into(),
            ));
        }
        Ok(())
    }

    /// Velocity `(x', y')` at `p`.
    #[inline]
    pub fn eval(&self, p: Point) -> Point {
        let (x, y) = (p.x, p.y);
        Point {
            x: self.a00
                + self.a10 * x
                + self.a01 * y
                + self.a20 * x * x
                + self.a11 * x * y
                + self.a02 * y * y,
            y: self.b00
                + self.b10 * x
                + self.b01 * y
                + self.b20 * x * x
                + self.b11 * x * y
                + self.b02 * y * y,
        }
    }

    pub fn jacobian(&self, p: Point) -> Mat2 {
        let (x, y) = (p.x, p.y);
        [
            [
                self.a10 + 2.0 * self.a20 * x + self.a11 * y,
                self.a01 + self.a11 * x + 2.0 * self.a02 * y,
            ],
            [
                self.b10 + 2.0 * self.b20 * x + self.b11 * y,
                self.b01 + self.b11 * x + 2.0 * self.b02 * y,
            ],
        ]
    }

    pub fn divergence(&self, p: Point) -> f64 {
        trace(&self.jacobian(p))
    }

    /// The same system with time reversed.
    pub fn reversed(&self) -> Self {
        let mut c = self.as_array();
        c.iter_mut().for_each(|v| *v = -*v);
        Self::from_array(c)
    }

    /// The conservative system `x' = -y(1+y)`, `y' = x + x^2`.
    pub fn hamiltonian_system() -> Self {
        CanonicalParamsII::hamiltonian().to_general()
    }
}

/// Parameters of the canonical form with two parallel straight isoclines:
///
/// ```text
/// x' = -y (1 + nu y)
/// y' = x + (lambda + beta + gamma) y + a x^2 + (beta + gamma) x y + c gamma y^2
/// ```
///
/// `lambda`, `beta` and `gamma` are the field rotation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParamsII", into = "RawParamsII")]
pub struct CanonicalParamsII {
    nu: u8,
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub c: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParamsII {
    nu: i64,
    lambda: f64,
    beta: f64,
    gamma: f64,
    a: f64,
    c: f64,
}

impl TryFrom<RawParamsII> for CanonicalParamsII {
    type Error = QlcError;

    fn try_from(r: RawParamsII) -> Result<Self> {
        let nu = u8::try_from(r.nu)
            .map_err(|_| QlcError::InvalidParams(format!("nu must be 0 or 1, got {}", r.nu)))?;
        CanonicalParamsII::new(nu, r.lambda, r.beta, r.gamma, r.a, r.c)
    }
}

impl From<CanonicalParamsII> for RawParamsII {
    fn from(p: CanonicalParamsII) -> Self {
        Self {
            nu: i64::from(p.nu),
            lambda: p.lambda,
            beta: p.beta,
            gamma: p.gamma,
            a: p.a,
            c: p.c,
        }
    }
}

impl CanonicalParamsII {
    pub fn new(nu: u8, lambda: f64, beta: f64, gamma: f64, a: f64, c: f64) -> Result<Self> {
        if nu > 1 {
            return Err(QlcError::InvalidParams(format!(
                "nu must be 0 or 1, got {nu}"
            )));
        }
        if ![lambda, beta, gamma, a, c].iter().all(|v| v.is_finite()) {
            return Err(QlcError::InvalidParams("non-finite parameter".into()));
        }
        Ok(Self {
            nu,
            lambda,
            beta,
            gamma,
            a,
            c,
        })
    }

    /// The class studied in the constructive sequence: `nu = 1`, `a = 1`.
    pub fn with_unit_a(c: f64, gamma: f64, beta: f64, lambda: f64) -> Self {
        Self {
            nu: 1,
            lambda,
            beta,
            gamma,
            a: 1.0,
            c,
        }
    }

    /// All rotation parameters vanish: the Hamiltonian fixture.
    pub fn hamiltonian() -> Self {
        Self::with_unit_a(2.0, 0.0, 0.0, 0.0)
    }

    pub fn nu(&self) -> u8 {
        self.nu
    }

    pub fn nu_f64(&self) -> f64 {
        f64::from(self.nu)
    }

    /// Trace of the linearization at the origin.
    pub fn origin_trace(&self) -> f64 {
        self.lambda + self.beta + self.gamma
    }

    pub fn to_general(&self) -> QuadraticCoefficients {
        let bg = self.beta + self.gamma;
        QuadraticCoefficients {
            a01: -1.0,
            a02: -self.nu_f64(),
            b10: 1.0,
            b01: self.lambda + bg,
            b20: self.a,
            b11: bg,
            b02: self.c * self.gamma,
            ..Default::default()
        }
    }

    /// `P` and `Q` evaluated straight from the factored canonical form.
    pub fn eval_direct(&self, p: Point) -> Point {
        let (x, y) = (p.x, p.y);
        let bg = self.beta + self.gamma;
        Point {
            x: -y * (1.0 + self.nu_f64() * y),
            y: x + (self.lambda + bg) * y + self.a * x * x + bg * x * y + self.c * self.gamma * y * y,
        }
    }
}

/// Parameters of the four-rotation-parameter canonical form
///
/// ```text
/// x' = -y (1 + x + alpha y)
/// y' = x + (lambda + beta + gamma) y + a x^2 + (alpha + beta + gamma) x y + c gamma y^2
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParamsI {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub c: f64,
}

impl CanonicalParamsI {
    pub fn to_general(&self) -> QuadraticCoefficients {
        QuadraticCoefficients {
            a01: -1.0,
            a11: -1.0,
            a02: -self.alpha,
            b10: 1.0,
            b01: self.lambda + self.beta + self.gamma,
            b20: self.a,
            b11: self.alpha + self.beta + self.gamma,
            b02: self.c * self.gamma,
            ..Default::default()
        }
    }
}

/// `H(x, y) = x^2/2 + x^3/3 + y^2/2 + y^3/3`, the first integral of the
/// Hamiltonian fixture (`x' = -dH/dy`, `y' = dH/dx`).
pub fn hamiltonian_energy(p: Point) -> f64 {
    let (x, y) = (p.x, p.y);
    x * x / 2.0 + x * x * x / 3.0 + y * y / 2.0 + y * y * y / 3.0
}

/// Analytic gradient of [`hamiltonian_energy`].
pub fn hamiltonian_gradient(p: Point) -> Point {
    Point::new(p.x + p.x * p.x, p.y + p.y * p.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys_3_2(gamma: f64, c: f64) -> QuadraticCoefficients {
        CanonicalParamsII::with_unit_a(c, gamma, 0.0, 0.0).to_general()
    }

    #[test]
    fn eval_hamiltonian_fixture() {
        let v = QuadraticCoefficients::hamiltonian_system().eval(Point::new(0.5, 0.5));
        assert_abs_diff_eq!(v.x, -0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn eval_gamma_only() {
        let v = sys_3_2(1.0, 2.0).eval(Point::new(0.0, -0.5));
        assert_abs_diff_eq!(v.x, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn canonical_embeddings() {
        let h = CanonicalParamsII::with_unit_a(7.0, 0.0, 0.0, 0.0).to_general();
        assert_eq!(
            h.as_array(),
            [0.0, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]
        );
        let lin = CanonicalParamsII::new(0, 0.0, 0.0, 0.0, 1.0, 3.0)
            .unwrap()
            .to_general();
        assert_eq!(lin.a02, 0.0);
        assert_eq!(lin.a01, -1.0);
        assert_eq!(lin.b20, 1.0);
        let g = sys_3_2(1.0, 2.0);
        assert_eq!((g.b01, g.b11, g.b02, g.b20), (1.0, 1.0, 2.0, 1.0));
    }

    #[test]
    fn canonical_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let p = CanonicalParamsII::new(
                rng.gen_range(0..=1),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-3.0..3.0),
            )
            .unwrap();
            let sys = p.to_general();
            for _ in 0..100 {
                let pt = Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
                let a = sys.eval(pt);
                let b = p.eval_direct(pt);
                let scale = 1.0 + b.x.abs().max(b.y.abs());
                assert!((a.x - b.x).abs() <= 1e-13 * scale);
                assert!((a.y - b.y).abs() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn jacobian_fixtures() {
        let h = QuadraticCoefficients::hamiltonian_system();
        assert_eq!(h.jacobian(Point::ORIGIN), [[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!(h.jacobian(Point::new(-1.0, 0.0)), [[0.0, -1.0], [-1.0, 0.0]]);
        let p = CanonicalParamsII::with_unit_a(2.0, 0.3, -0.7, 0.2);
        let j = p.to_general().jacobian(Point::ORIGIN);
        assert_eq!(j, [[0.0, -1.0], [1.0, p.lambda + p.beta + p.gamma]]);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let systems = [
            QuadraticCoefficients::hamiltonian_system(),
            sys_3_2(1.0, 2.0),
            CanonicalParamsII::with_unit_a(2.0, 1.0, -0.95, 0.05).to_general(),
            CanonicalParamsI {
                lambda: 0.1,
                alpha: 0.4,
                beta: -0.3,
                gamma: 0.8,
                a: 1.2,
                c: 0.5,
            }
            .to_general(),
        ];
        let h = 1e-6;
        for sys in systems {
            for _ in 0..100 {
                let p = Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let j = sys.jacobian(p);
                let fx = |dx: f64, dy: f64| sys.eval(Point::new(p.x + dx, p.y + dy));
                let (xp, xm) = (fx(h, 0.0), fx(-h, 0.0));
                let (yp, ym) = (fx(0.0, h), fx(0.0, -h));
                let fd = [
                    [(xp.x - xm.x) / (2.0 * h), (yp.x - ym.x) / (2.0 * h)],
                    [(xp.y - xm.y) / (2.0 * h), (yp.y - ym.y) / (2.0 * h)],
                ];
                for r in 0..2 {
                    for c in 0..2 {
                        assert_abs_diff_eq!(j[r][c], fd[r][c], epsilon = 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn divergence_fixtures() {
        let h = QuadraticCoefficients::hamiltonian_system();
        for &(x, y) in &[(0.5, 0.25), (-3.0, 1.5), (0.125, -7.75)] {
            assert_eq!(h.divergence(Point::new(x, y)), 0.0);
        }
        let p = CanonicalParamsII::with_unit_a(2.0, 1.0, -0.95, 0.0625);
        assert_eq!(p.to_general().divergence(Point::new(-1.0, 0.0)), 0.0625);
        assert_abs_diff_eq!(
            p.to_general().divergence(Point::ORIGIN),
            p.origin_trace(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn energy_values_and_gradient() {
        assert_eq!(hamiltonian_energy(Point::ORIGIN), 0.0);
        assert_abs_diff_eq!(
            hamiltonian_energy(Point::new(0.1, 0.0)),
            0.005 + 0.001 / 3.0,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(hamiltonian_energy(Point::new(-1.0, 0.0)), 1.0 / 6.0, epsilon = 1e-16);
        assert_abs_diff_eq!(hamiltonian_energy(Point::new(0.0, -1.0)), 1.0 / 6.0, epsilon = 1e-16);

        let sys = QuadraticCoefficients::hamiltonian_system();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-5;
        for _ in 0..10 {
            let p = Point::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let v = sys.eval(p);
            let dhdx = (hamiltonian_energy(Point::new(p.x + h, p.y))
                - hamiltonian_energy(Point::new(p.x - h, p.y)))
                / (2.0 * h);
            let dhdy = (hamiltonian_energy(Point::new(p.x, p.y + h))
                - hamiltonian_energy(Point::new(p.x, p.y - h)))
                / (2.0 * h);
            assert_abs_diff_eq!(v.x, -dhdy, epsilon = 1e-9);
            assert_abs_diff_eq!(v.y, dhdx, epsilon = 1e-9);
            let g = hamiltonian_gradient(p);
            assert_abs_diff_eq!(v.x, -g.y, epsilon = 1e-12);
            assert_abs_diff_eq!(v.y, g.x, epsilon = 1e-12);
        }
    }

    #[test]
    fn json_field_names() {
        let p = CanonicalParamsII::with_unit_a(2.0, 1.0, -0.95, 0.0);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"nu":1,"lambda":0.0,"beta":-0.95,"gamma":1.0,"a":1.0,"c":2.0}"#
        );
        let back: CanonicalParamsII = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<CanonicalParamsII>(
            r#"{"nu":2,"lambda":0,"beta":0,"gamma":0,"a":1,"c":2}"#
        )
        .is_err());
        let q = serde_json::to_value(QuadraticCoefficients::hamiltonian_system()).unwrap();
        assert_eq!(q["a02"], -1.0);
        assert_eq!(q["b20"], 1.0);
    }

    #[test]
    fn validate_rejects_linear() {
        let lin = QuadraticCoefficients {
            a01: -1.0,
            b10: 1.0,
            ..Default::default()
        };
        assert!(lin.validate().is_err());
        assert!(QuadraticCoefficients::hamiltonian_system().validate().is_ok());
    }
}
