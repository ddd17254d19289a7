//! Trajectory integration with an embedded Dormand–Prince 5(4) pair.
//!
//! Section crossings are bracketed on the continuous extension of each
//! accepted step, bisected on it, and then polished with Newton iterations
//! that re-take a partial step from the start of the bracketing step, so the
//! crossing inherits the accuracy of the fifth-order solution rather than the
//! interpolant.

use serde::{Deserialize, Serialize};

use crate::error::{QlcError, Result};
use crate::vectorfield::{Point, QuadraticCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_time: f64,
    /// Half-width of the square domain centred on the origin.
    pub domain: f64,
    /// Speed below which a trajectory is considered to have reached a
    /// singular point.
    pub stop_speed: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.1,
            max_time: 500.0,
            domain: 10.0,
            stop_speed: 1e-11,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(QlcError::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.max_time > 0.0 && self.max_step > 0.0 && self.domain > 0.0) {
            return Err(QlcError::InvalidConfig(
                "max_time, max_step and domain must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Both tolerances scaled by `factor`.
    pub fn scaled_tolerances(&self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
            ..*self
        }
    }

    fn inside(&self, p: Point) -> bool {
        p.x.abs() <= self.domain && p.y.abs() <= self.domain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalStatus {
    TimeExhausted,
    LeftDomain,
    ConvergedToPoint,
    EventLimitReached,
}

/// A sampled orbit. `times` holds elapsed integration time, so it is strictly
/// increasing in both directions; `backward` records time reversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub status: TerminalStatus,
    pub backward: bool,
}

impl Default for Trajectory {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            points: Vec::new(),
            status: TerminalStatus::TimeExhausted,
            backward: false,
        }
    }
}

impl Trajectory {
    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn end(&self) -> Point {
        *self.points.last().expect("trajectory has at least one point")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A ray `base + s * direction`, `s > 0`, used as a Poincaré section. The
/// range `[x_min, x_max]` bounds the sampled part of the ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub base: Point,
    pub direction: Point,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for Section {
    fn default() -> Self {
        Self {
            base: Point::ORIGIN,
            direction: Point::new(1.0, 0.0),
            x_min: 1e-3,
            x_max: 0.95,
        }
    }
}

impl Section {
    pub fn positive_x_axis(x_min: f64, x_max: f64) -> Result<Self> {
        let s = Self {
            x_min,
            x_max,
            ..Self::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min > 0.0 && self.x_max > self.x_min) {
            return Err(QlcError::InvalidConfig(format!(
                "section range must satisfy 0 < x_min < x_max, got ({}, {})",
                self.x_min, self.x_max
            )));
        }
        let n = self.direction.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(QlcError::InvalidConfig("section direction must be a unit vector".into()));
        }
        Ok(())
    }

    /// The point at coordinate `s` along the ray.
    pub fn point_at(&self, s: f64) -> Point {
        Point::new(self.base.x + s * self.direction.x, self.base.y + s * self.direction.y)
    }

    /// Coordinate along the ray.
    pub fn along(&self, p: Point) -> f64 {
        (p.x - self.base.x) * self.direction.x + (p.y - self.base.y) * self.direction.y
    }

    /// Signed transverse coordinate; positive on the counterclockwise side.
    pub fn transverse(&self, p: Point) -> f64 {
        self.direction.x * (p.y - self.base.y) - self.direction.y * (p.x - self.base.x)
    }

    /// Angle between the flow and the section line at `p`, in radians,
    /// folded into `[0, pi/2]`.
    pub fn transversality_angle(&self, system: &QuadraticCoefficients, p: Point) -> f64 {
        let v = system.eval(p);
        let speed = v.norm();
        if speed == 0.0 {
            return 0.0;
        }
        let cross = self.direction.x * v.y - self.direction.y * v.x;
        (cross.abs() / speed).clamp(0.0, 1.0).asin()
    }
}

/// Orientation of a section crossing: `Positive` crosses from the clockwise
/// side to the counterclockwise side of the ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub point: Point,
    /// Elapsed time from the start of the integration.
    pub time: f64,
    pub along: f64,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy(y: Point, terms: &[(f64, Point)], h: f64) -> Point {
    let mut out = y;
    for &(c, k) in terms {
        out.x += h * c * k.x;
        out.y += h * c * k.y;
    }
    out
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DenseStep {
    pub t0: f64,
    pub h: f64,
    pub y0: Point,
    pub f0: Point,
    pub y1: Point,
    rcont: [Point; 5],
}

impl DenseStep {
    pub fn eval(&self, t: f64) -> Point {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let comp = |a: f64, b: f64, c: f64, d: f64, e: f64| a + th * (b + th1 * (c + th * (d + th1 * e)));
        Point::new(
            comp(r[0].x, r[1].x, r[2].x, r[3].x, r[4].x),
            comp(r[0].y, r[1].y, r[2].y, r[3].y, r[4].y),
        )
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

struct RawStep {
    y1: Point,
    f1: Point,
    err: f64,
    k: [Point; 7],
}

/// Adaptive stepper over elapsed time. `sign = -1` integrates the reversed
/// field.
pub(crate) struct Stepper<'a> {
    system: &'a QuadraticCoefficients,
    cfg: &'a IntegratorConfig,
    sign: f64,
    pub t: f64,
    pub y: Point,
    f: Point,
    h: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a QuadraticCoefficients, cfg: &'a IntegratorConfig, start: Point, backward: bool) -> Self {
        let sign = if backward { -1.0 } else { 1.0 };
        let mut s = Self {
            system,
            cfg,
            sign,
            t: 0.0,
            y: start,
            f: Point::ORIGIN,
            h: 0.0,
        };
        s.f = s.rhs(start);
        s.h = s.initial_step();
        s
    }

    #[inline]
    fn rhs(&self, p: Point) -> Point {
        let v = self.system.eval(p);
        Point::new(self.sign * v.x, self.sign * v.y)
    }

    pub fn speed(&self) -> f64 {
        self.f.norm()
    }

    fn initial_step(&self) -> f64 {
        let scale = |v: f64| self.cfg.atol + self.cfg.rtol * v.abs();
        let d0 = ((self.y.x / scale(self.y.x)).powi(2) + (self.y.y / scale(self.y.y)).powi(2)).sqrt();
        let d1 = ((self.f.x / scale(self.y.x)).powi(2) + (self.f.y / scale(self.y.y)).powi(2)).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.clamp(1e-8, self.cfg.max_step)
    }

    fn raw_step(&self, y0: Point, f0: Point, h: f64) -> RawStep {
        let k1 = f0;
        let k2 = self.rhs(axpy(y0, &[(A21, k1)], h));
        let k3 = self.rhs(axpy(y0, &[(A31, k1), (A32, k2)], h));
        let k4 = self.rhs(axpy(y0, &[(A41, k1), (A42, k2), (A43, k3)], h));
        let k5 = self.rhs(axpy(y0, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
        let k6 = self.rhs(axpy(
            y0,
            &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
            h,
        ));
        let y1 = axpy(
            y0,
            &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
            h,
        );
        let k7 = self.rhs(y1);
        let e = axpy(
            Point::ORIGIN,
            &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)],
            h,
        );
        let sc = |a: f64, b: f64| self.cfg.atol + self.cfg.rtol * a.abs().max(b.abs());
        let err = (((e.x / sc(y0.x, y1.x)).powi(2) + (e.y / sc(y0.y, y1.y)).powi(2)) / 2.0).sqrt();
        RawStep {
            y1,
            f1: k7,
            err,
            k: [k1, k2, k3, k4, k5, k6, k7],
        }
    }

    /// Fifth-order solution after a partial step of length `tau` from the
    /// start of `step`.
    pub fn partial(&self, step: &DenseStep, tau: f64) -> Point {
        if tau == 0.0 {
            return step.y0;
        }
        self.raw_step(step.y0, step.f0, tau).y1
    }

    pub fn field(&self, p: Point) -> Point {
        self.rhs(p)
    }

    /// Take one accepted step, never beyond elapsed time `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<DenseStep> {
        let mut h = self.h.min(self.cfg.max_step);
        let mut reject = false;
        loop {
            let last = self.t + h >= t_end;
            if last {
                h = t_end - self.t;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(QlcError::StepUnderflow { t: self.t });
            }
            let raw = self.raw_step(self.y, self.f, h);
            if raw.err <= 1.0 && raw.y1.is_finite() {
                let fac = if raw.err == 0.0 {
                    5.0
                } else {
                    (0.9 * raw.err.powf(-0.2)).clamp(0.2, 5.0)
                };
                let fac = if reject { fac.min(1.0) } else { fac };
                let ydiff = Point::new(raw.y1.x - self.y.x, raw.y1.y - self.y.y);
                let [k1, _, k3, k4, k5, k6, k7] = raw.k;
                let bspl = Point::new(h * k1.x - ydiff.x, h * k1.y - ydiff.y);
                let r4 = Point::new(ydiff.x - h * k7.x - bspl.x, ydiff.y - h * k7.y - bspl.y);
                let r5 = axpy(
                    Point::ORIGIN,
                    &[(D1, k1), (D3, k3), (D4, k4), (D5, k5), (D6, k6), (D7, k7)],
                    h,
                );
                let dense = DenseStep {
                    t0: self.t,
                    h,
                    y0: self.y,
                    f0: self.f,
                    y1: raw.y1,
                    rcont: [self.y, ydiff, bspl, r4, r5],
                };
                self.t = if last { t_end } else { self.t + h };
                self.y = raw.y1;
                self.f = raw.f1;
                if !last {
                    self.h = (h * fac).min(self.cfg.max_step);
                }
                return Ok(dense);
            }
            reject = true;
            let fac = if raw.y1.is_finite() && raw.err.is_finite() {
                (0.9 * raw.err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            self.h = h;
        }
    }
}

/// Integrate from `start` for `duration` time units; a negative duration
/// follows the time-reversed flow.
pub fn integrate(
    system: &QuadraticCoefficients,
    start: Point,
    duration: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    if !start.is_finite() || !duration.is_finite() {
        return Err(QlcError::InvalidConfig("non-finite start or duration".into()));
    }
    let backward = duration < 0.0;
    let t_end = duration.abs().min(config.max_time);
    let mut st = Stepper::new(system, config, start, backward);
    let mut traj = Trajectory {
        times: vec![0.0],
        points: vec![start],
        status: TerminalStatus::TimeExhausted,
        backward,
    };
    if st.speed() <= config.stop_speed {
        traj.status = TerminalStatus::ConvergedToPoint;
        return Ok(traj);
    }
    while st.t < t_end {
        st.step(t_end)?;
        traj.times.push(st.t);
        traj.points.push(st.y);
        if !config.inside(st.y) {
            traj.status = TerminalStatus::LeftDomain;
            return Ok(traj);
        }
        if st.speed() <= config.stop_speed {
            traj.status = TerminalStatus::ConvergedToPoint;
            return Ok(traj);
        }
    }
    Ok(traj)
}

/// What a crossing scan should do after each detected crossing.
pub(crate) enum ScanControl {
    Continue,
    Stop,
}

/// Outcome of [`scan_crossings`].
pub(crate) struct ScanResult {
    pub trajectory: Option<Trajectory>,
    pub status: TerminalStatus,
    pub last: Point,
}

/// Integrate from `start` and report every crossing of `section` with the
/// given orientation to `on_crossing`. `record` keeps the sampled orbit.
pub(crate) fn scan_crossings<F>(
    system: &QuadraticCoefficients,
    start: Point,
    section: &Section,
    orientation: Orientation,
    config: &IntegratorConfig,
    backward: bool,
    record: bool,
    mut on_crossing: F,
) -> Result<ScanResult>
where
    F: FnMut(&Crossing, &[Point]) -> ScanControl,
{
    config.validate()?;
    let mut st = Stepper::new(system, config, start, backward);
    let mut pts = vec![start];
    let mut times = vec![0.0];
    let sig = |p: Point| -> f64 {
        let s = section.transverse(p);
        match orientation {
            Orientation::Positive => s,
            Orientation::Negative => -s,
        }
    };
    let collar = 1e-8;
    let mut armed = sig(start).abs() > collar;
    let mut s_prev = sig(start);
    let finish = |status, st: &Stepper, pts: Vec<Point>, times: Vec<f64>| ScanResult {
        last: st.y,
        status,
        trajectory: record.then(|| Trajectory {
            times,
            points: pts,
            status,
            backward,
        }),
    };
    if st.speed() <= config.stop_speed {
        return Ok(finish(TerminalStatus::ConvergedToPoint, &st, pts, times));
    }
    while st.t < config.max_time {
        let step = st.step(config.max_time)?;
        let s_new = sig(step.y1);
        if armed && s_prev < 0.0 && s_new >= 0.0 {
            let t_c = locate(&st, &step, &sig);
            let p = st.partial(&step, t_c - step.t0);
            let along = section.along(p);
            if along > 0.0 {
                let c = Crossing {
                    point: p,
                    time: t_c,
                    along,
                };
                if record {
                    pts.push(p);
                    times.push(t_c);
                }
                if let ScanControl::Stop = on_crossing(&c, &pts) {
                    return Ok(finish(TerminalStatus::EventLimitReached, &st, pts, times));
                }
                if record {
                    pts.pop();
                    times.pop();
                }
            }
        }
        if !armed && s_new.abs() > collar {
            armed = true;
        }
        s_prev = s_new;
        if record {
            pts.push(st.y);
            times.push(st.t);
        }
        if !config.inside(st.y) {
            return Ok(finish(TerminalStatus::LeftDomain, &st, pts, times));
        }
        if st.speed() <= config.stop_speed {
            return Ok(finish(TerminalStatus::ConvergedToPoint, &st, pts, times));
        }
    }
    Ok(finish(TerminalStatus::TimeExhausted, &st, pts, times))
}

/// Crossing time inside `step`: bisection on the continuous extension to
/// |value| <= 1e-11, then Newton polishing on partial steps.
fn locate<G: Fn(Point) -> f64>(st: &Stepper, step: &DenseStep, sig: &G) -> f64 {
    let (mut lo, mut hi) = (step.t0, step.t1());
    let mut t = hi;
    for _ in 0..200 {
        t = 0.5 * (lo + hi);
        let v = sig(step.eval(t));
        if v.abs() <= 1e-11 {
            break;
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 1e-16 * t.abs().max(1.0) {
            break;
        }
    }
    for _ in 0..4 {
        let p = st.partial(step, t - step.t0);
        let v = sig(p);
        let f = st.field(p);
        let origin_sig = sig(Point::ORIGIN);
        let dv = sig(f) - origin_sig;
        if dv == 0.0 {
            break;
        }
        let dt = v / dv;
        let tn = (t - dt).clamp(step.t0, step.t1());
        if (tn - t).abs() <= 1e-15 * t.abs().max(1.0) {
            t = tn;
            break;
        }
        t = tn;
    }
    t
}

/// First crossing of `section` with the given orientation, as point and
/// elapsed time.
pub fn next_section_crossing(
    system: &QuadraticCoefficients,
    start: Point,
    section: &Section,
    orientation: Orientation,
    config: &IntegratorConfig,
) -> Result<(Point, f64)> {
    let mut found = None;
    scan_crossings(system, start, section, orientation, config, false, false, |c, _| {
        found = Some((c.point, c.time));
        ScanControl::Stop
    })?;
    found.ok_or(QlcError::NoReturn)
}

/// Orbit from `start` up to and including its first return to `section`.
pub fn orbit_to_return(
    system: &QuadraticCoefficients,
    start: Point,
    section: &Section,
    config: &IntegratorConfig,
) -> Result<(Trajectory, Crossing)> {
    let mut found = None;
    let res = scan_crossings(
        system,
        start,
        section,
        Orientation::Positive,
        config,
        false,
        true,
        |c, _| {
            found = Some(*c);
            ScanControl::Stop
        },
    )?;
    match (found, res.trajectory) {
        (Some(c), Some(t)) => Ok((t, c)),
        _ => Err(QlcError::NoReturn),
    }
}
