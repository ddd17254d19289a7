//! Field-rotation determinants `P dQ/dmu - Q dP/dmu` of the canonical form.

use serde::{Deserialize, Serialize};

use crate::flow::Trajectory;
use crate::vectorfield::{CanonicalParamsII, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationParam {
    Lambda,
    Beta,
    Gamma,
}

impl RotationParam {
    pub const ALL: [RotationParam; 3] = [RotationParam::Lambda, RotationParam::Beta, RotationParam::Gamma];

    pub fn get(self, p: &CanonicalParamsII) -> f64 {
        match self {
            RotationParam::Lambda => p.lambda,
            RotationParam::Beta => p.beta,
            RotationParam::Gamma => p.gamma,
        }
    }

    pub fn with(self, p: &CanonicalParamsII, value: f64) -> CanonicalParamsII {
        let mut q = *p;
        match self {
            RotationParam::Lambda => q.lambda = value,
            RotationParam::Beta => q.beta = value,
            RotationParam::Gamma => q.gamma = value,
        }
        q
    }

    pub fn name(self) -> &'static str {
        match self {
            RotationParam::Lambda => "lambda",
            RotationParam::Beta => "beta",
            RotationParam::Gamma => "gamma",
        }
    }

    /// The factor whose sign, together with `1 + nu y`, decides the rotation
    /// direction: `1`, `1 + x`, or `1 + x + c y`.
    pub fn domain_factor(self, p: &CanonicalParamsII, pt: Point) -> f64 {
        match self {
            RotationParam::Lambda => 1.0,
            RotationParam::Beta => 1.0 + pt.x,
            RotationParam::Gamma => 1.0 + pt.x + p.c * pt.y,
        }
    }
}

impl std::str::FromStr for RotationParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lambda" => Ok(RotationParam::Lambda),
            "beta" => Ok(RotationParam::Beta),
            "gamma" => Ok(RotationParam::Gamma),
            _ => Err(format!("unknown rotation parameter '{s}' (expected lambda, beta or gamma)")),
        }
    }
}

/// Closed-form rotation determinant; positive means counterclockwise rotation
/// as the parameter increases.
pub fn delta(param: RotationParam, p: &CanonicalParamsII, pt: Point) -> f64 {
    let y = pt.y;
    -y * y * param.domain_factor(p, pt) * (1.0 + p.nu_f64() * y)
}

/// The same determinant from central differences in the parameter.
pub fn delta_numeric(param: RotationParam, p: &CanonicalParamsII, pt: Point, h: f64) -> f64 {
    assert!(h > 0.0, "difference step must be positive");
    let mu = param.get(p);
    let (hi, lo) = (mu + h, mu - h);
    let plus = param.with(p, hi).eval_direct(pt);
    let minus = param.with(p, lo).eval_direct(pt);
    let here = p.eval_direct(pt);
    let span = hi - lo;
    let dp = (plus.x - minus.x) / span;
    let dq = (plus.y - minus.y) / span;
    here.x * dq - here.y * dp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(v: f64, tol: f64) -> Sign {
        if v > tol {
            Sign::Positive
        } else if v < -tol {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationSignReport {
    pub param: RotationParam,
    pub signs: Vec<Sign>,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
    /// All points with `|delta| >= 1e-12` share one sign.
    pub constant: bool,
    /// That common sign when `constant` holds and any nonzero point exists.
    pub common: Option<Sign>,
}

pub fn rotation_sign_on_orbit(param: RotationParam, p: &CanonicalParamsII, orbit: &Trajectory) -> RotationSignReport {
    rotation_sign_on_points(param, p, &orbit.points)
}

pub fn rotation_sign_on_points(param: RotationParam, p: &CanonicalParamsII, points: &[Point]) -> RotationSignReport {
    let signs: Vec<Sign> = points.iter().map(|&q| Sign::of(delta(param, p, q), 1e-12)).collect();
    let positive = signs.iter().filter(|&&s| s == Sign::Positive).count();
    let negative = signs.iter().filter(|&&s| s == Sign::Negative).count();
    let zero = signs.len() - positive - negative;
    let constant = positive == 0 || negative == 0;
    let common = match (positive, negative) {
        (0, 0) => None,
        (_, 0) => Some(Sign::Positive),
        (0, _) => Some(Sign::Negative),
        _ => None,
    };
    RotationSignReport {
        param,
        signs,
        positive,
        negative,
        zero,
        constant,
        common,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::TerminalStatus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(c: f64) -> CanonicalParamsII {
        CanonicalParamsII::with_unit_a(c, 0.7, -0.3, 0.2)
    }

    #[test]
    fn closed_form_values() {
        let p = params(2.0);
        assert_eq!(delta(RotationParam::Lambda, &p, Point::new(5.0, 1.0)), -2.0);
        assert_eq!(delta(RotationParam::Beta, &p, Point::new(-2.0, 1.0)), 2.0);
        assert_eq!(delta(RotationParam::Gamma, &p, Point::new(0.0, 1.0)), -6.0);
        for param in RotationParam::ALL {
            assert_eq!(delta(param, &p, Point::new(0.37, 0.0)), 0.0);
        }
    }

    #[test]
    fn numeric_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = CanonicalParamsII::new(
                rng.gen_range(0..=1),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-3.0..3.0),
            )
            .unwrap();
            let pt = Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            for param in RotationParam::ALL {
                let a = delta(param, &p, pt);
                let b = delta_numeric(param, &p, pt, 1e-5);
                let tol = if param == RotationParam::Lambda { 1e-10 } else { 1e-9 };
                assert!((a - b).abs() <= tol * (1.0 + a.abs()), "{param:?} {a} {b}");
            }
        }
        let p = params(2.0);
        for param in RotationParam::ALL {
            assert_eq!(delta_numeric(param, &p, Point::new(-0.4, 0.0), 1e-5), 0.0);
        }
    }

    #[test]
    fn lambda_negative_on_small_circle() {
        let p = params(2.0);
        let pts: Vec<Point> = (0..64)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 64.0;
                Point::new(0.1 * th.cos(), 0.1 * th.sin())
            })
            .collect();
        let orbit = Trajectory {
            times: (0..64).map(f64::from).collect(),
            points: pts,
            status: TerminalStatus::TimeExhausted,
            backward: false,
        };
        let r = rotation_sign_on_orbit(RotationParam::Lambda, &p, &orbit);
        assert!(r.constant);
        assert_eq!(r.common, Some(Sign::Negative));
        assert_eq!(r.negative, 64);
    }

    #[test]
    fn beta_negative_in_strip_and_zero_crossings_ignored() {
        let p = params(2.0);
        let pts = vec![
            Point::new(0.2, 0.3),
            Point::new(-0.5, 0.0),
            Point::new(-0.9, -0.5),
            Point::new(3.0, 4.0),
            Point::new(0.0, 0.0),
        ];
        let r = rotation_sign_on_points(RotationParam::Beta, &p, &pts);
        assert!(r.constant);
        assert_eq!(r.zero, 2);
        assert_eq!(r.common, Some(Sign::Negative));

        let mixed = rotation_sign_on_points(RotationParam::Beta, &p, &[Point::new(0.2, 0.3), Point::new(-2.0, 0.3)]);
        assert!(!mixed.constant);
        assert_eq!(mixed.common, None);
    }

    #[test]
    fn sign_domains_by_rejection_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let p = CanonicalParamsII::new(rng.gen_range(0..=1), 0.0, 0.0, 0.0, 1.0, rng.gen_range(-3.0..3.0)).unwrap();
            let pt = Point::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let strip = 1.0 + p.nu_f64() * pt.y;
            let predicates = [
                strip > 0.0,
                (1.0 + pt.x) * strip > 0.0,
                (1.0 + pt.x + p.c * pt.y) * strip > 0.0,
            ];
            for (param, inside) in RotationParam::ALL.into_iter().zip(predicates) {
                let negative = delta(param, &p, pt) < 0.0;
                assert_eq!(negative, inside && pt.y != 0.0, "{param:?} at {pt:?}");
            }
        }
    }
}
