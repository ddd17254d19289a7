//! Saddle separatrices and the parameter values where a separatrix loop
//! closes around the origin.

use serde::{Deserialize, Serialize};

use crate::error::{QlcError, Result};
use crate::flow::{scan_crossings, IntegratorConfig, Orientation, ScanControl, Section, TerminalStatus, Trajectory};
use crate::rotation::RotationParam;
use crate::singular::{eigenvalues, kind_from_jacobian, SingularKind};
use crate::vectorfield::{CanonicalParamsII, Point, QuadraticCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleFrame {
    pub saddle: Point,
    pub unstable_value: f64,
    /// Unit vector, pointing into the half-plane that contains the origin.
    pub unstable_vector: Point,
    pub stable_value: f64,
    pub stable_vector: Point,
    /// Seed offset along the unstable vector.
    pub epsilon: f64,
}

impl SaddleFrame {
    pub fn divergence(&self) -> f64 {
        self.unstable_value + self.stable_value
    }

    /// The frame of the time-reversed field at the same saddle.
    pub fn reversed(&self) -> SaddleFrame {
        SaddleFrame {
            unstable_value: -self.stable_value,
            unstable_vector: self.stable_vector,
            stable_value: -self.unstable_value,
            stable_vector: self.unstable_vector,
            ..*self
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-6;

fn eigenvector(j: &[[f64; 2]; 2], sigma: f64) -> Point {
    let a = Point::new(j[0][1], sigma - j[0][0]);
    let b = Point::new(sigma - j[1][1], j[1][0]);
    let v = if a.norm() >= b.norm() { a } else { b };
    let n = v.norm();
    Point::new(v.x / n, v.y / n)
}

fn orient_towards_origin(v: Point, saddle: Point) -> Point {
    let dot = -saddle.x * v.x - saddle.y * v.y;
    if dot < 0.0 {
        Point::new(-v.x, -v.y)
    } else {
        v
    }
}

pub fn saddle_frame(system: &QuadraticCoefficients, location: Point) -> Result<SaddleFrame> {
    let j = system.jacobian(location);
    if system.eval(location).norm() > 1e-10 || kind_from_jacobian(&j) != SingularKind::Saddle {
        return Err(QlcError::NotSaddle {
            x: location.x,
            y: location.y,
        });
    }
    let [lo, hi] = eigenvalues(&j);
    let u = orient_towards_origin(eigenvector(&j, hi.re), location);
    let s = orient_towards_origin(eigenvector(&j, lo.re), location);
    let frame = SaddleFrame {
        saddle: location,
        unstable_value: hi.re,
        unstable_vector: u,
        stable_value: lo.re,
        stable_vector: s,
        epsilon: DEFAULT_EPSILON,
    };
    for (sigma, v) in [(hi.re, u), (lo.re, s)] {
        let r = Point::new(
            j[0][0] * v.x + j[0][1] * v.y - sigma * v.x,
            j[1][0] * v.x + j[1][1] * v.y - sigma * v.y,
        );
        if r.norm() > 1e-10 {
            return Err(QlcError::Inconclusive(format!("eigenvector residual {:e}", r.norm())));
        }
    }
    Ok(frame)
}

/// The saddle `(-1/a, 0)` of the canonical form.
pub fn canonical_saddle(p: &CanonicalParamsII) -> Result<SaddleFrame> {
    saddle_frame(&p.to_general(), Point::new(-1.0 / p.a, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeparatrixTag {
    SpiralsToFocusRegion,
    EscapesDomain,
    ReturnsNearSaddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Leaves the saddle into the half-plane containing the origin.
    TowardFocus,
    AwayFromFocus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixOutcome {
    pub tag: SeparatrixTag,
    pub branch: Branch,
    /// Successive crossings of the positive x-axis.
    pub returns: Vec<f64>,
    pub status: TerminalStatus,
    pub end: Point,
    #[serde(skip)]
    pub witness: Trajectory,
}

/// Radius of the ball around the saddle whose re-entry counts as a return.
pub const SADDLE_BALL: f64 = 1e-3;

pub fn classify_unstable_separatrix(p: &CanonicalParamsII, frame: &SaddleFrame, config: &IntegratorConfig) -> Result<SeparatrixOutcome> {
    classify_branch(&p.to_general(), frame, Branch::TowardFocus, config)
}

/// Integrate one unstable branch from `saddle + epsilon * vector` and decide
/// where it goes: three decreasing returns to the positive x-axis or
/// convergence to the origin mean it spirals inside, leaving the box means
/// it escapes. A branch that re-enters the saddle ball and then stays
/// undecided returns near the saddle.
pub fn classify_branch(system: &QuadraticCoefficients, frame: &SaddleFrame, branch: Branch, config: &IntegratorConfig) -> Result<SeparatrixOutcome> {
    let sign = match branch {
        Branch::TowardFocus => 1.0,
        Branch::AwayFromFocus => -1.0,
    };
    let start = Point::new(
        frame.saddle.x + sign * frame.epsilon * frame.unstable_vector.x,
        frame.saddle.y + sign * frame.epsilon * frame.unstable_vector.y,
    );
    let section = Section::default();
    let mut returns: Vec<f64> = Vec::new();
    let res = scan_crossings(system, start, &section, Orientation::Positive, config, false, true, |c, _| {
        returns.push(c.along);
        let n = returns.len();
        if n >= 3 && returns[n - 1] < returns[n - 2] && returns[n - 2] < returns[n - 3] {
            ScanControl::Stop
        } else {
            ScanControl::Continue
        }
    })?;
    let witness = res.trajectory.unwrap_or_default();
    let end = res.last;
    let near_saddle = |q: &Point| q.dist(frame.saddle) <= SADDLE_BALL;
    let left_ball = witness
        .points
        .iter()
        .position(|q| q.dist(frame.saddle) > 10.0 * SADDLE_BALL);
    let reentered = left_ball.is_some_and(|i| witness.points[i..].iter().any(near_saddle));
    let tag = match res.status {
        TerminalStatus::EventLimitReached => SeparatrixTag::SpiralsToFocusRegion,
        TerminalStatus::LeftDomain => SeparatrixTag::EscapesDomain,
        TerminalStatus::ConvergedToPoint if end.norm() <= SADDLE_BALL => SeparatrixTag::SpiralsToFocusRegion,
        TerminalStatus::ConvergedToPoint | TerminalStatus::TimeExhausted if reentered || near_saddle(&end) => {
            SeparatrixTag::ReturnsNearSaddle
        }
        _ => return Err(QlcError::Undecided(config.max_time)),
    };
    Ok(SeparatrixOutcome {
        tag,
        branch,
        returns,
        status: res.status,
        end,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopValue {
    pub param: RotationParam,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub lo_outcome: SeparatrixTag,
    pub hi_outcome: SeparatrixTag,
    pub branch: Branch,
}

pub const DEFAULT_LOOP_TOL: f64 = 1e-8;

fn outcome_at(p: &CanonicalParamsII, param: RotationParam, mu: f64, branch: Branch, epsilon: f64, config: &IntegratorConfig) -> Result<SeparatrixTag> {
    let q = param.with(p, mu);
    let frame = canonical_saddle(&q)?.with_epsilon(epsilon);
    Ok(classify_branch(&q.to_general(), &frame, branch, config)?.tag)
}

/// Bisect `param` over `bracket` on a change of the separatrix outcome.
pub fn find_loop_parameter(
    p: &CanonicalParamsII,
    param: RotationParam,
    bracket: (f64, f64),
    tol: f64,
    config: &IntegratorConfig,
) -> Result<LoopValue> {
    find_loop_parameter_eps(p, param, bracket, tol, DEFAULT_EPSILON, config)
}

pub fn find_loop_parameter_eps(
    p: &CanonicalParamsII,
    param: RotationParam,
    bracket: (f64, f64),
    tol: f64,
    epsilon: f64,
    config: &IntegratorConfig,
) -> Result<LoopValue> {
    let (lo0, hi0) = bracket;
    if !(lo0.is_finite() && hi0.is_finite()) || lo0 == hi0 {
        return Err(QlcError::NoBracket(format!("degenerate bracket ({lo0}, {hi0})")));
    }
    if !(tol > 0.0) {
        return Err(QlcError::InvalidConfig("loop tolerance must be positive".into()));
    }
    for branch in [Branch::TowardFocus, Branch::AwayFromFocus] {
        let lo_outcome = outcome_at(p, param, lo0, branch, epsilon, config)?;
        let hi_outcome = outcome_at(p, param, hi0, branch, epsilon, config)?;
        if lo_outcome == hi_outcome {
            continue;
        }
        let (mut lo, mut hi) = (lo0, hi0);
        while (hi - lo).abs() > tol {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let t = outcome_at(p, param, mid, branch, epsilon, config)?;
            if t == SeparatrixTag::ReturnsNearSaddle && lo_outcome != t && hi_outcome != t {
                lo = mid;
                hi = mid;
                break;
            }
            if t == lo_outcome {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(LoopValue {
            param,
            value: 0.5 * (lo + hi),
            lo,
            hi,
            lo_outcome,
            hi_outcome,
            branch,
        });
    }
    Err(QlcError::NoBracket(format!(
        "separatrix outcome is the same at {} = {lo0} and {hi0} on both branches",
        param.name()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_frame() {
        let h = QuadraticCoefficients::hamiltonian_system();
        let f = saddle_frame(&h, Point::new(-1.0, 0.0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f.unstable_value - 1.0).abs() < 1e-15);
        assert!((f.stable_value + 1.0).abs() < 1e-15);
        assert!((f.unstable_vector.x - r).abs() < 1e-15 && (f.unstable_vector.y + r).abs() < 1e-15);
        assert!((f.stable_vector.x - r).abs() < 1e-15 && (f.stable_vector.y - r).abs() < 1e-15);
        assert!(matches!(saddle_frame(&h, Point::ORIGIN), Err(QlcError::NotSaddle { .. })));
    }

    #[test]
    fn frame_divergence_is_lambda() {
        for lambda in [0.1, 0.5, 0.82] {
            let p = CanonicalParamsII::with_unit_a(2.0, 1.0, -1.8, lambda);
            let f = canonical_saddle(&p).unwrap();
            assert!((f.divergence() - lambda).abs() < 1e-13);
        }
    }

    #[test]
    fn reversal_swaps_roles() {
        let p = CanonicalParamsII::with_unit_a(2.0, 1.0, -1.8, 0.3);
        let f = canonical_saddle(&p).unwrap();
        let r = saddle_frame(&p.to_general().reversed(), f.saddle).unwrap();
        assert!(r.unstable_vector.dist(f.stable_vector) < 1e-14);
        assert!(r.stable_vector.dist(f.unstable_vector) < 1e-14);
        assert_eq!(f.reversed(), r);
    }

    #[test]
    fn degenerate_bracket() {
        let p = CanonicalParamsII::with_unit_a(2.0, 1.0, 0.0, 0.0);
        let r = find_loop_parameter(&p, RotationParam::Beta, (-1.0, -1.0), 1e-8, &IntegratorConfig::default());
        assert!(matches!(r, Err(QlcError::NoBracket(_))));
    }
}
