//! Limit cycles around the origin as zeros of the displacement function
//! `d(x) = P(x) - x` of the return map on a section.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QlcError, Result};
use crate::flow::{next_section_crossing, orbit_to_return, IntegratorConfig, Orientation, Section, Trajectory};
use crate::rotation::RotationParam;
use crate::singular::{finite_singular_points, kind_from_jacobian, SingularKind};
use crate::vectorfield::{CanonicalParamsII, Point, QuadraticCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    pub integrator: IntegratorConfig,
    /// Geometric samples per scan.
    pub samples: usize,
    /// Bisection stops once `|d| <= zero_tol`.
    pub zero_tol: f64,
    /// `|d'|` below this makes a zero semi-stable.
    pub stability_tol: f64,
    /// A dip of `|d|` below this without a sign change is a semi-stable cycle.
    pub semistable_tol: f64,
    /// Zeros closer than this cannot be separated.
    pub cluster_tol: f64,
    /// `|d(x)| <= annulus_tol * x` over a long run of samples marks a
    /// centre annulus.
    pub annulus_tol: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            samples: 256,
            zero_tol: 1e-10,
            stability_tol: 1e-5,
            semistable_tol: 1e-8,
            cluster_tol: 1e-6,
            annulus_tol: 1e-7,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if self.samples < 16 {
            return Err(QlcError::InvalidConfig(format!("at least 16 samples required, got {}", self.samples)));
        }
        let tols = [
            self.zero_tol,
            self.stability_tol,
            self.semistable_tol,
            self.cluster_tol,
            self.annulus_tol,
        ];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return Err(QlcError::InvalidConfig("cycle tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// The Poincaré return map of a system on a section.
pub struct ReturnMap<'a> {
    system: QuadraticCoefficients,
    section: &'a Section,
    config: &'a IntegratorConfig,
}

impl<'a> ReturnMap<'a> {
    pub fn new(system: QuadraticCoefficients, section: &'a Section, config: &'a IntegratorConfig) -> Self {
        Self { system, section, config }
    }

    pub fn system(&self) -> &QuadraticCoefficients {
        &self.system
    }

    /// `P(x)` and the return time, or `None` when the orbit never returns.
    pub fn image(&self, x: f64) -> Result<Option<(f64, f64)>> {
        let start = self.section.point_at(x);
        match next_section_crossing(&self.system, start, self.section, Orientation::Positive, self.config) {
            Ok((q, t)) => Ok(Some((self.section.along(q), t))),
            Err(QlcError::NoReturn) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn displacement(&self, x: f64) -> Result<Option<f64>> {
        Ok(self.image(x)?.map(|(px, _)| px - x))
    }

    fn many(&self, xs: &[f64]) -> Result<Vec<DisplacementSample>> {
        xs.par_iter()
            .map(|&x| {
                let px = self.image(x)?.map(|(px, _)| px);
                Ok(DisplacementSample {
                    x,
                    px,
                    d: px.map(|v| v - x),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSample {
    pub x: f64,
    /// `None` when the orbit escapes or stalls before returning.
    pub px: Option<f64>,
    pub d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSamples {
    /// Strictly increasing in `x`.
    pub samples: Vec<DisplacementSample>,
    /// Section coordinates where the return map stops being defined.
    pub escape_boundaries: Vec<f64>,
}

pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = hi / lo;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo * r.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Kind of the origin, failing unless it is a focus or centre.
pub fn origin_anti_saddle(system: &QuadraticCoefficients) -> Result<SingularKind> {
    let v = system.eval(Point::ORIGIN);
    if v.norm() > 1e-12 {
        return Err(QlcError::NoSurroundingCycles("origin is not a singular point".into()));
    }
    let kind = kind_from_jacobian(&system.jacobian(Point::ORIGIN));
    if !kind.is_focus_or_center() {
        return Err(QlcError::NoSurroundingCycles(format!("origin is a {kind:?}")));
    }
    Ok(kind)
}

const ESCAPE_CLUSTER: usize = 40;

/// Sample the displacement on `n` geometric points of the section range,
/// then add a cluster of samples next to every boundary of the region where
/// the return map is defined.
pub fn displacement_scan(p: &CanonicalParamsII, section: &Section, n: usize, config: &CycleConfig) -> Result<DisplacementSamples> {
    scan_system(&p.to_general(), section, n, config)
}

pub fn scan_system(system: &QuadraticCoefficients, section: &Section, n: usize, config: &CycleConfig) -> Result<DisplacementSamples> {
    CycleConfig { samples: n, ..*config }.validate()?;
    section.validate()?;
    origin_anti_saddle(system)?;
    let xs = geometric_grid(section.x_min, section.x_max, n);
    for &x in &xs {
        let angle = section.transversality_angle(system, section.point_at(x));
        if angle < 1e-3 {
            return Err(QlcError::InvalidConfig(format!(
                "flow is not transversal to the section at {x} (angle {angle:e})"
            )));
        }
    }
    let map = ReturnMap::new(*system, section, &config.integrator);
    let mut samples = map.many(&xs)?;

    let mut boundaries = Vec::new();
    let mut extra = Vec::new();
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.d.is_some() == b.d.is_some() {
            continue;
        }
        let (mut inside, mut outside) = if a.d.is_some() { (a.x, b.x) } else { (b.x, a.x) };
        for _ in 0..80 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if map.displacement(mid)?.is_some() {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        boundaries.push(outside);
        let gap = (w[1].x - w[0].x) / 2.0;
        let smallest = (1e-13 * outside.abs()).max(f64::EPSILON);
        let side = if a.d.is_some() { -1.0 } else { 1.0 };
        for k in 0..ESCAPE_CLUSTER {
            let off = gap * (smallest / gap).powf(k as f64 / (ESCAPE_CLUSTER - 1) as f64);
            extra.push(outside + side * off);
        }
        extra.push(inside);
    }
    if !extra.is_empty() {
        samples.extend(map.many(&extra)?);
        samples.sort_by(|a, b| a.x.total_cmp(&b.x));
        samples.dedup_by(|a, b| a.x == b.x);
    }
    boundaries.sort_by(f64::total_cmp);
    Ok(DisplacementSamples {
        samples,
        escape_boundaries: boundaries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    SemiStable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleRecord {
    /// Section coordinate of the cycle.
    pub x: f64,
    /// `d(x)` at the reported coordinate.
    pub residual: f64,
    pub period: f64,
    /// `d'(x)`.
    pub multiplier: f64,
    /// `d''(x)`, computed for semi-stable cycles.
    pub curvature: Option<f64>,
    pub stability: Stability,
    pub multiplicity: u8,
    /// Winding number of the orbit around the origin.
    pub winding: i32,
    /// No singular point other than the origin lies inside the orbit.
    pub encloses_only_origin: bool,
    /// Distance between the orbit's first and last point.
    pub closure: f64,
    #[serde(skip)]
    pub orbit: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSearch {
    pub origin: SingularKind,
    pub records: Vec<LimitCycleRecord>,
    /// Range of a band of closed orbits, where zeros are not isolated.
    pub center_annulus: Option<(f64, f64)>,
    pub samples: DisplacementSamples,
}

/// Winding number of the closed polygon `points` around `q`.
pub fn winding_number(points: &[Point], q: Point) -> i32 {
    let n = points.len();
    if n < 3 {
        return 0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let a = Point::new(points[i].x - q.x, points[i].y - q.y);
        let j = (i + 1) % n;
        let b = Point::new(points[j].x - q.x, points[j].y - q.y);
        total += (a.x * b.y - a.y * b.x).atan2(a.x * b.x + a.y * b.y);
    }
    (total / std::f64::consts::TAU).round() as i32
}

/// Bisection on a sign change of `d` until `|d| <= tol` or the bracket
/// cannot shrink further.
fn refine_zero(map: &ReturnMap, mut lo: f64, mut dlo: f64, mut hi: f64, mut dhi: f64, tol: f64) -> Result<(f64, f64)> {
    if dlo == 0.0 {
        return Ok((lo, 0.0));
    }
    if dhi == 0.0 {
        return Ok((hi, 0.0));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let dm = map
            .displacement(mid)?
            .ok_or_else(|| QlcError::Inconclusive(format!("return map undefined inside bracket at {mid}")))?;
        if dm.abs() <= tol {
            return Ok((mid, dm));
        }
        if (dm > 0.0) == (dlo > 0.0) {
            lo = mid;
            dlo = dm;
        } else {
            hi = mid;
            dhi = dm;
        }
    }
    Ok(if dlo.abs() <= dhi.abs() { (lo, dlo) } else { (hi, dhi) })
}

/// Central difference of `d` with step `1e-5 x`, shrunk when a neighbour has
/// no return. A cycle hugging the edge of the returning region (just past a
/// separatrix loop) only has returns on one side; then a one-sided
/// difference is used.
fn derivative(map: &ReturnMap, x: f64) -> Result<f64> {
    let mut h = 1e-5 * x;
    for _ in 0..6 {
        if let (Some(a), Some(b)) = (map.displacement(x + h)?, map.displacement(x - h)?) {
            return Ok((a - b) / (2.0 * h));
        }
        h /= 10.0;
    }
    let h = 1e-5 * x;
    let d0 = map
        .displacement(x)?
        .ok_or_else(|| QlcError::Inconclusive(format!("no return at the cycle {x}")))?;
    for side in [-1.0, 1.0] {
        if let Some(a) = map.displacement(x + side * h)? {
            return Ok(side * (a - d0) / h);
        }
    }
    Err(QlcError::Inconclusive(format!("no neighbourhood with returns at {x}")))
}

fn second_derivative(map: &ReturnMap, x: f64, d0: f64) -> Result<f64> {
    let mut h = 1e-3 * x;
    for _ in 0..6 {
        if let (Some(a), Some(b)) = (map.displacement(x + h)?, map.displacement(x - h)?) {
            return Ok((a - 2.0 * d0 + b) / (h * h));
        }
        h /= 10.0;
    }
    let h = 1e-3 * x;
    for side in [-1.0, 1.0] {
        if let (Some(a), Some(b)) = (map.displacement(x + side * h)?, map.displacement(x + 2.0 * side * h)?) {
            return Ok((b - 2.0 * a + d0) / (h * h));
        }
    }
    Err(QlcError::Inconclusive(format!("no neighbourhood with returns at {x}")))
}

/// Golden-section minimisation of `sign * d` on `[a, b]`; missing returns
/// count as `+inf`.
fn golden_min(map: &ReturnMap, mut a: f64, mut b: f64, sign: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |x: f64| -> Result<f64> { Ok(map.displacement(x)?.map_or(f64::INFINITY, |d| sign * d)) };
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a) <= 1e-13 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

fn longest_annulus(samples: &[DisplacementSample], tol: f64) -> Option<(usize, usize)> {
    let quiet = |s: &DisplacementSample| s.d.is_some_and(|d| d.abs() <= tol * s.x);
    let present = samples.iter().filter(|s| s.d.is_some()).count();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < samples.len() {
        if quiet(&samples[i]) {
            let mut j = i;
            while j + 1 < samples.len() && quiet(&samples[j + 1]) {
                j += 1;
            }
            if best.is_none_or(|(a, b)| j - i > b - a) {
                best = Some((i, j));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    best.filter(|&(a, b)| b - a + 1 >= (present / 4).max(4))
}

/// Zeros of `d` from a scan: bracketed sign changes, plus dips of `|d|`
/// that either touch zero (semi-stable) or hide a close pair.
fn zeros_from_samples(
    map: &ReturnMap,
    samples: &[DisplacementSample],
    skip: Option<(usize, usize)>,
    config: &CycleConfig,
) -> Result<Vec<(f64, f64, bool)>> {
    let skipped = |i: usize| skip.is_some_and(|(a, b)| i >= a && i <= b);
    let mut zeros = Vec::new();
    for i in 0..samples.len().saturating_sub(1) {
        if skipped(i) || skipped(i + 1) {
            continue;
        }
        let (a, b) = (samples[i], samples[i + 1]);
        if let (Some(da), Some(db)) = (a.d, b.d) {
            if da == 0.0 {
                zeros.push((a.x, 0.0, false));
            } else if db != 0.0 && (da > 0.0) != (db > 0.0) {
                let (x, d) = refine_zero(map, a.x, da, b.x, db, config.zero_tol)?;
                zeros.push((x, d, false));
            }
        }
    }
    for i in 1..samples.len().saturating_sub(1) {
        if skipped(i - 1) || skipped(i) || skipped(i + 1) {
            continue;
        }
        let (Some(dl), Some(dm), Some(dr)) = (samples[i - 1].d, samples[i].d, samples[i + 1].d) else {
            continue;
        };
        if dm == 0.0 || (dl > 0.0) != (dm > 0.0) || (dr > 0.0) != (dm > 0.0) {
            continue;
        }
        if dm.abs() > dl.abs() || dm.abs() > dr.abs() {
            continue;
        }
        let (xl, xr) = (samples[i - 1].x, samples[i + 1].x);
        let s = dm.signum();
        let (xmin, vmin) = golden_min(map, xl, xr, s)?;
        if vmin < 0.0 {
            let dmin = s * vmin;
            let (x1, d1) = refine_zero(map, xl, dl, xmin, dmin, config.zero_tol)?;
            let (x2, d2) = refine_zero(map, xmin, dmin, xr, dr, config.zero_tol)?;
            zeros.push((x1, d1, false));
            zeros.push((x2, d2, false));
        } else if vmin <= config.semistable_tol {
            zeros.push((xmin, s * vmin, true));
        }
    }
    zeros.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(zeros)
}

fn build_record(
    map: &ReturnMap,
    section: &Section,
    x: f64,
    residual: f64,
    touching: bool,
    others: &[Point],
    config: &CycleConfig,
) -> Result<LimitCycleRecord> {
    let multiplier = derivative(map, x)?;
    let semistable = touching || multiplier.abs() <= config.stability_tol;
    let curvature = if semistable {
        Some(second_derivative(map, x, residual)?)
    } else {
        None
    };
    let stability = if semistable {
        Stability::SemiStable
    } else if multiplier < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    let (orbit, crossing) = orbit_to_return(map.system(), section.point_at(x), section, &config.integrator)?;
    let closure = orbit.start().dist(orbit.end());
    let winding = winding_number(&orbit.points, Point::ORIGIN);
    let encloses_only_origin = others.iter().all(|&q| winding_number(&orbit.points, q) == 0);
    Ok(LimitCycleRecord {
        x,
        residual,
        period: crossing.time,
        multiplier,
        curvature,
        stability,
        multiplicity: if semistable { 2 } else { 1 },
        winding,
        encloses_only_origin,
        closure,
        orbit,
    })
}

/// Isolated limit cycles crossing the section, sorted by `x`.
pub fn find_cycles(p: &CanonicalParamsII, section: &Section, config: &CycleConfig) -> Result<CycleSearch> {
    let others: Vec<Point> = finite_singular_points(p)?
        .into_iter()
        .map(|s| s.location)
        .filter(|q| q.norm() > 1e-12)
        .collect();
    find_cycles_in(&p.to_general(), &others, section, config)
}

/// [`find_cycles`] for a general system; `others` are the singular points
/// other than the origin.
pub fn find_cycles_in(
    system: &QuadraticCoefficients,
    others: &[Point],
    section: &Section,
    config: &CycleConfig,
) -> Result<CycleSearch> {
    config.validate()?;
    let origin = origin_anti_saddle(system)?;
    let samples = scan_system(system, section, config.samples, config)?;
    let map = ReturnMap::new(*system, section, &config.integrator);
    let annulus = longest_annulus(&samples.samples, config.annulus_tol);
    let zeros = zeros_from_samples(&map, &samples.samples, annulus, config)?;
    for w in zeros.windows(2) {
        if w[1].0 - w[0].0 < config.cluster_tol {
            return Err(QlcError::RefineGrid(w[0].0, w[1].0));
        }
    }
    let records = zeros
        .par_iter()
        .map(|&(x, d, touching)| build_record(&map, section, x, d, touching, others, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(CycleSearch {
        origin,
        records,
        center_annulus: annulus.map(|(a, b)| (samples.samples[a].x, samples.samples[b].x)),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleCount {
    pub count: usize,
    /// Sample counts tried, in order.
    pub resolutions: Vec<usize>,
    pub records: Vec<LimitCycleRecord>,
}

/// Count isolated cycles around the origin on the default section, doubling
/// the sample count from 64 until two successive counts agree.
///
/// A node at the origin gives a count of zero without a scan: a cycle of a
/// quadratic system always surrounds a focus.
pub fn count_cycles_around_origin(p: &CanonicalParamsII, config: &CycleConfig) -> Result<CycleCount> {
    let census = finite_singular_points(p)?;
    if census.len() != 2 {
        return Err(QlcError::InvalidParams(format!(
            "expected exactly two finite singular points, found {}",
            census.len()
        )));
    }
    let system = p.to_general();
    if matches!(
        kind_from_jacobian(&system.jacobian(Point::ORIGIN)),
        SingularKind::StableNode | SingularKind::UnstableNode
    ) {
        return Ok(CycleCount {
            count: 0,
            resolutions: Vec::new(),
            records: Vec::new(),
        });
    }
    let section = Section::default();
    let mut previous: Option<usize> = None;
    let mut resolutions = Vec::new();
    let mut last_err = None;
    for n in [64, 128, 256, 512, 1024] {
        resolutions.push(n);
        let cfg = CycleConfig { samples: n, ..*config };
        match find_cycles(p, &section, &cfg) {
            Ok(search) => {
                let count = search.records.len();
                if previous == Some(count) {
                    return Ok(CycleCount {
                        count,
                        resolutions,
                        records: search.records,
                    });
                }
                previous = Some(count);
            }
            Err(e @ (QlcError::RefineGrid(..) | QlcError::Inconclusive(_))) => {
                previous = None;
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(QlcError::Inconclusive(match last_err {
        Some(e) => format!("counts did not settle after 4 refinements ({e})"),
        None => "counts did not settle after 4 refinements".into(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepPolicy {
    pub initial: f64,
    pub max_halvings: u32,
    pub max_steps: usize,
    /// Bisection tolerance for a fold parameter.
    pub fold_tol: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-3,
            max_halvings: 3,
            max_steps: 5000,
            fold_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyPoint {
    pub mu: f64,
    pub x: f64,
    pub multiplier: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    RangeEnd,
    FoldDetected,
    ShrankToFocus,
    SeparatrixLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPoint {
    pub mu: f64,
    pub x: f64,
    /// Last parameter value where the tracked branch was found.
    pub last_mu: f64,
    pub last_x: f64,
    /// The opposite-stability cycle at `last_mu`.
    pub partner_x: f64,
    /// `|x*|` change over the last accepted step.
    pub last_step_dx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCurve {
    pub param: RotationParam,
    pub points: Vec<FamilyPoint>,
    pub termination: Termination,
    pub fold: Option<FoldPoint>,
}

struct LocalSearch {
    found: Option<FamilyPoint>,
    hit_escape: bool,
}

/// Find the zero of `d` nearest `x0` whose crossing direction matches
/// `stability`, walking outward with doubling steps from `w`.
fn local_zero(map: &ReturnMap, mu: f64, x0: f64, stability: Stability, w: f64, floor: f64, ceil: f64, config: &CycleConfig) -> Result<LocalSearch> {
    // Sign of d just inside the cycle.
    let inner = if stability == Stability::Stable { 1.0 } else { -1.0 };
    let mut hit_escape = false;
    let fail = |hit_escape| Ok(LocalSearch { found: None, hit_escape });

    let mut xa = x0;
    let mut da = match map.displacement(xa)? {
        Some(d) => d,
        None => {
            // Beyond the escape boundary: walk back in.
            hit_escape = true;
            let mut step = w;
            loop {
                let x = xa - step;
                if x <= floor {
                    return fail(true);
                }
                if let Some(d) = map.displacement(x)? {
                    xa = x;
                    break d;
                }
                step *= 2.0;
            }
        }
    };
    let right = da * inner > 0.0;
    let dir = if right { 1.0 } else { -1.0 };
    let mut step = w;
    let mut shrink = 0;
    loop {
        let mut xb = xa + dir * step;
        if xb <= floor || xb >= ceil {
            xb = if dir > 0.0 { 0.5 * (xa + ceil) } else { 0.5 * (xa + floor) };
            if (xb - xa).abs() <= 1e-13 * xa {
                return fail(hit_escape);
            }
        }
        match map.displacement(xb)? {
            None => {
                hit_escape = true;
                shrink += 1;
                if shrink > 60 || step <= 1e-14 * xa {
                    return fail(true);
                }
                step /= 2.0;
            }
            Some(db) => {
                if db * inner * dir < 0.0 || db == 0.0 {
                    let (lo, dlo, hi, dhi) = if dir > 0.0 { (xa, da, xb, db) } else { (xb, db, xa, da) };
                    let (x, _) = refine_zero(map, lo, dlo, hi, dhi, config.zero_tol)?;
                    let multiplier = derivative(map, x)?;
                    if (multiplier < 0.0) != (stability == Stability::Stable) {
                        return fail(hit_escape);
                    }
                    return Ok(LocalSearch {
                        found: Some(FamilyPoint {
                            mu,
                            x,
                            multiplier,
                            stability,
                        }),
                        hit_escape,
                    });
                }
                if db.abs() > da.abs() {
                    return fail(hit_escape);
                }
                xa = xb;
                da = db;
                if shrink == 0 {
                    step *= 2.0;
                }
            }
        }
    }
}

/// Extremum of `sign * d` on `[a, b]` at parameter `mu`.
fn dip(p: &CanonicalParamsII, param: RotationParam, mu: f64, a: f64, b: f64, sign: f64, section: &Section, config: &CycleConfig) -> Result<(f64, f64)> {
    let q = param.with(p, mu);
    let map = ReturnMap::new(q.to_general(), section, &config.integrator);
    golden_min(&map, a, b, sign)
}

/// Continue the cycle nearest `seed_x` at `param = range.0` towards
/// `range.1` by warm-started bracketing.
pub fn track_family(
    p: &CanonicalParamsII,
    param: RotationParam,
    range: (f64, f64),
    seed_x: f64,
    section: &Section,
    config: &CycleConfig,
    policy: &StepPolicy,
) -> Result<FamilyCurve> {
    if !(policy.initial > 0.0) || range.0 == range.1 {
        return Err(QlcError::InvalidConfig("family range must be non-empty and the step positive".into()));
    }
    let start = param.with(p, range.0);
    let trace_start = start.origin_trace();
    let search = find_cycles(&start, section, config)?;
    let seed = search
        .records
        .iter()
        .filter(|r| r.stability != Stability::SemiStable)
        .min_by(|a, b| (a.x - seed_x).abs().total_cmp(&(b.x - seed_x).abs()))
        .ok_or_else(|| QlcError::NoSurroundingCycles(format!("no hyperbolic cycle at {} = {}", param.name(), range.0)))?;
    let mut points = vec![FamilyPoint {
        mu: range.0,
        x: seed.x,
        multiplier: seed.multiplier,
        stability: seed.stability,
    }];
    let dir = (range.1 - range.0).signum();
    let mut h = policy.initial;
    let mut halvings = 0;
    let floor = 0.25 * section.x_min;
    let ceil = section.x_max;
    let curve = |points, termination, fold| FamilyCurve {
        param,
        points,
        termination,
        fold,
    };
    while points.len() < policy.max_steps {
        let cur = *points.last().unwrap();
        if (range.1 - cur.mu) * dir <= 0.0 {
            return Ok(curve(points, Termination::RangeEnd, None));
        }
        let mu = if (cur.mu + dir * h - range.1) * dir >= 0.0 { range.1 } else { cur.mu + dir * h };
        let x_pred = match points.len() {
            1 => cur.x,
            n => {
                let prev = points[n - 2];
                let slope = (cur.x - prev.x) / (cur.mu - prev.mu);
                (cur.x + slope * (mu - cur.mu)).clamp(0.5 * cur.x, 2.0 * cur.x)
            }
        };
        let w = match points.len() {
            1 => 1e-4 * cur.x,
            n => (0.25 * (cur.x - points[n - 2].x).abs()).max(1e-7 * cur.x),
        };
        let q = param.with(p, mu);
        let map = ReturnMap::new(q.to_general(), section, &config.integrator);
        let res = local_zero(&map, mu, x_pred, cur.stability, w, floor, ceil, config)?;
        if let Some(fp) = res.found {
            points.push(fp);
            halvings = 0;
            h = (2.0 * h).min(policy.initial);
            if fp.x < 2.0 * section.x_min {
                return Ok(curve(points, Termination::ShrankToFocus, None));
            }
            continue;
        }
        if halvings < policy.max_halvings {
            halvings += 1;
            h /= 2.0;
            continue;
        }
        // The branch is lost between cur.mu and mu.
        // A cycle can only vanish into the focus when the focus takes over its
        // stability.
        let trace_now = q.to_general().jacobian(Point::ORIGIN);
        let trace_now = trace_now[0][0] + trace_now[1][1];
        let hopf = trace_start * trace_now <= 0.0
            && (trace_now > 0.0) == (cur.stability == Stability::Unstable);
        if cur.x < 2.0 * section.x_min || hopf {
            return Ok(curve(points, Termination::ShrankToFocus, None));
        }
        if res.hit_escape {
            return Ok(curve(points, Termination::SeparatrixLoop, None));
        }
        if let Some(fold) = locate_fold(p, param, &points, mu, section, config, policy)? {
            return Ok(curve(points, Termination::FoldDetected, Some(fold)));
        }
        return Err(QlcError::ContinuationFailed {
            param: param.name().into(),
            last_value: cur.mu,
            last_x: cur.x,
        });
    }
    Err(QlcError::ContinuationFailed {
        param: param.name().into(),
        last_value: points.last().unwrap().mu,
        last_x: points.last().unwrap().x,
    })
}

/// Look for the opposite-stability partner of the last family point and
/// bisect the parameter where the pair annihilates.
fn locate_fold(
    p: &CanonicalParamsII,
    param: RotationParam,
    points: &[FamilyPoint],
    mu_lost: f64,
    section: &Section,
    config: &CycleConfig,
    policy: &StepPolicy,
) -> Result<Option<FoldPoint>> {
    let cur = *points.last().unwrap();
    let q = param.with(p, cur.mu);
    let map = ReturnMap::new(q.to_general(), section, &config.integrator);
    let d0 = map.displacement(cur.x)?.unwrap_or(0.0);
    let curv = second_derivative(&map, cur.x, d0)?;
    if curv == 0.0 {
        return Ok(None);
    }
    let guess = cur.x - 2.0 * cur.multiplier / curv;
    if !(guess > 0.0) || (guess - cur.x).abs() > 0.5 * cur.x {
        return Ok(None);
    }
    let partner_stability = if cur.stability == Stability::Stable {
        Stability::Unstable
    } else {
        Stability::Stable
    };
    let w = 0.1 * (guess - cur.x).abs();
    let res = local_zero(&map, cur.mu, guess, partner_stability, w, 0.25 * section.x_min, section.x_max, config)?;
    let Some(partner) = res.found else {
        return Ok(None);
    };
    let gap = (partner.x - cur.x).abs();
    if gap <= f64::EPSILON * cur.x {
        return Ok(None);
    }
    let a = cur.x.min(partner.x) - 0.25 * gap;
    let b = cur.x.max(partner.x) + 0.25 * gap;
    let sign = curv.signum();
    let (_, v_lo) = dip(p, param, cur.mu, a, b, sign, section, config)?;
    let (mut x_hi, v_hi) = dip(p, param, mu_lost, a, b, sign, section, config)?;
    if !(v_lo < 0.0 && v_hi > 0.0) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (cur.mu, mu_lost);
    while (hi - lo).abs() > policy.fold_tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let (xm, vm) = dip(p, param, mid, a, b, sign, section, config)?;
        if vm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
            x_hi = xm;
        }
    }
    let last_step_dx = match points.len() {
        n if n >= 2 => (cur.x - points[n - 2].x).abs(),
        _ => 0.0,
    };
    Ok(Some(FoldPoint {
        mu: 0.5 * (lo + hi),
        x: x_hi,
        last_mu: cur.mu,
        last_x: cur.x,
        partner_x: partner.x,
        last_step_dx,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winding_of_square() {
        let sq = [
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
        ];
        assert_eq!(winding_number(&sq, Point::ORIGIN), 1);
        assert_eq!(winding_number(&sq, Point::new(3.0, 0.0)), 0);
        let rev: Vec<Point> = sq.iter().rev().copied().collect();
        assert_eq!(winding_number(&rev, Point::ORIGIN), -1);
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1e-3, 0.95, 32);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[31], 0.95);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let r0 = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r0).abs() < 1e-12));
    }

    #[test]
    fn hamiltonian_scan_is_flat() {
        let p = CanonicalParamsII::hamiltonian();
        let section = Section::positive_x_axis(0.01, 0.4).unwrap();
        let s = displacement_scan(&p, &section, 32, &CycleConfig::default()).unwrap();
        assert_eq!(s.samples.len(), 32);
        for smp in &s.samples {
            assert!(smp.d.unwrap().abs() <= 1e-7, "{smp:?}");
        }
    }

    #[test]
    fn unstable_focus_pushes_outward() {
        let p = CanonicalParamsII::with_unit_a(2.0, 1.0, 0.0, 0.0);
        let section = Section::positive_x_axis(1e-3, 1e-2).unwrap();
        let s = displacement_scan(&p, &section, 16, &CycleConfig::default()).unwrap();
        assert!(s.samples.iter().all(|smp| smp.d.unwrap() > 0.0));
    }

    #[test]
    fn saddle_origin_has_no_cycles() {
        let sys = QuadraticCoefficients {
            a01: 1.0,
            b10: 1.0,
            ..Default::default()
        };
        let sys = QuadraticCoefficients { a20: 1.0, ..sys };
        let r = find_cycles_in(&sys, &[], &Section::default(), &CycleConfig::default());
        assert!(matches!(r, Err(QlcError::NoSurroundingCycles(_))));
    }
}
