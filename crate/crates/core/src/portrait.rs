//! Phase portraits: a grid of seeds integrated both ways, written as CSV and
//! as a plain SVG drawing.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QlcError, Result};
use crate::flow::{integrate, IntegratorConfig, Trajectory};
use crate::isocline::{classify_conic, nullcline_conics, IsoclineClass, Line};
use crate::numfmt::g17;
use crate::singular::{classify, SingularKind};
use crate::vectorfield::{Point, QuadraticCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PortraitConfig {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Seeds per axis.
    pub nx: usize,
    pub ny: usize,
    /// Integration time in each direction.
    pub duration: f64,
    pub integrator: IntegratorConfig,
    /// Drawing size in pixels.
    pub width: u32,
    pub height: u32,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        Self {
            x_range: (-2.0, 1.0),
            y_range: (-2.0, 1.0),
            nx: 7,
            ny: 7,
            duration: 20.0,
            integrator: IntegratorConfig {
                domain: 4.0,
                ..IntegratorConfig::default()
            },
            width: 600,
            height: 600,
        }
    }
}

impl PortraitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok_range = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.1 > r.0;
        if !ok_range(self.x_range) || !ok_range(self.y_range) {
            return Err(QlcError::InvalidConfig("portrait ranges need finite lo < hi".into()));
        }
        if self.nx == 0 || self.ny == 0 || self.width == 0 || self.height == 0 {
            return Err(QlcError::InvalidConfig("portrait grid and canvas must be non-empty".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(QlcError::InvalidConfig("portrait duration must be positive".into()));
        }
        self.integrator.validate()
    }

    /// Seeds at cell centres, row by row from the bottom.
    pub fn seeds(&self) -> Vec<Point> {
        let (dx, dy) = (
            (self.x_range.1 - self.x_range.0) / self.nx as f64,
            (self.y_range.1 - self.y_range.0) / self.ny as f64,
        );
        (0..self.ny)
            .flat_map(|j| {
                (0..self.nx).map(move |i| {
                    Point::new(
                        self.x_range.0 + (i as f64 + 0.5) * dx,
                        self.y_range.0 + (j as f64 + 0.5) * dy,
                    )
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub location: Point,
    pub kind: SingularKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portrait {
    /// Forward and backward orbit of every seed, in seed order.
    pub orbits: Vec<Trajectory>,
    pub singular: Vec<MarkedPoint>,
    pub vertical: IsoclineClass,
    pub horizontal: IsoclineClass,
    pub config: PortraitConfig,
}

/// Integrate every seed forward and backward. `singular` are the locations
/// to mark; each is classified on the way.
pub fn portrait(system: &QuadraticCoefficients, singular: &[Point], config: &PortraitConfig) -> Result<Portrait> {
    config.validate()?;
    let orbits = config
        .seeds()
        .par_iter()
        .map(|&s| {
            let fwd = integrate(system, s, config.duration, &config.integrator)?;
            let bwd = integrate(system, s, -config.duration, &config.integrator)?;
            Ok([bwd, fwd])
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let singular = singular
        .iter()
        .map(|&location| {
            Ok(MarkedPoint {
                location,
                kind: classify(system, location)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (v, h) = nullcline_conics(system);
    Ok(Portrait {
        orbits,
        singular,
        vertical: classify_conic(&v),
        horizontal: classify_conic(&h),
        config: *config,
    })
}

impl Portrait {
    /// Columns `t,x,y,orbit_id`; backward orbits carry negative times.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,orbit_id\n");
        for (id, orbit) in self.orbits.iter().enumerate() {
            let sign = if orbit.backward { -1.0 } else { 1.0 };
            for (t, p) in orbit.times.iter().zip(&orbit.points) {
                let _ = writeln!(out, "{},{},{},{id}", g17(sign * t.abs()), g17(p.x), g17(p.y));
            }
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let cfg = &self.config;
        let (w, h) = (cfg.width as f64, cfg.height as f64);
        let (x0, x1) = cfg.x_range;
        let (y0, y1) = cfg.y_range;
        let sx = |x: f64| (x - x0) / (x1 - x0) * w;
        let sy = |y: f64| (y1 - y) / (y1 - y0) * h;
        let px = |v: f64| format!("{:.2}", v);

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            cfg.width, cfg.height, cfg.width, cfg.height
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(out, r##"<g fill="none" stroke="#1f4e79" stroke-width="0.8">"##);
        for orbit in &self.orbits {
            if orbit.points.len() < 2 {
                continue;
            }
            out.push_str(r#"<polyline points=""#);
            for (k, p) in orbit.points.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                let (a, b) = (sx(p.x).clamp(-w, 2.0 * w), sy(p.y).clamp(-h, 2.0 * h));
                let _ = write!(out, "{},{}", px(a), px(b));
            }
            out.push_str("\"/>\n");
        }
        out.push_str("</g>\n");

        let mut iso = |lines: &[Line], colour: &str| {
            for l in lines {
                if let Some((a, b)) = clip_line(l, cfg.x_range, cfg.y_range) {
                    let _ = writeln!(
                        out,
                        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{colour}" stroke-width="1" stroke-dasharray="6 4"/>"#,
                        px(sx(a.x)),
                        px(sy(a.y)),
                        px(sx(b.x)),
                        px(sy(b.y))
                    );
                }
            }
        };
        iso(&self.vertical.lines, "#b22222");
        iso(&self.horizontal.lines, "#228b22");

        for s in &self.singular {
            let fill = match s.kind {
                SingularKind::Saddle => "white",
                _ => "black",
            };
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="4" fill="{fill}" stroke="black" stroke-width="1"/>"#,
                px(sx(s.location.x)),
                px(sy(s.location.y))
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Segment of `l` inside the box, if any.
fn clip_line(l: &Line, xr: (f64, f64), yr: (f64, f64)) -> Option<(Point, Point)> {
    let (a, b, d) = (l.normal.x, l.normal.y, l.offset);
    let mut pts: Vec<Point> = Vec::new();
    if b.abs() > 1e-14 {
        for x in [xr.0, xr.1] {
            let y = -(a * x + d) / b;
            if y >= yr.0 - 1e-12 && y <= yr.1 + 1e-12 {
                pts.push(Point::new(x, y));
            }
        }
    }
    if a.abs() > 1e-14 {
        for y in [yr.0, yr.1] {
            let x = -(b * y + d) / a;
            if x >= xr.0 - 1e-12 && x <= xr.1 + 1e-12 {
                pts.push(Point::new(x, y));
            }
        }
    }
    let first = *pts.first()?;
    let far = pts.iter().copied().max_by(|p, q| first.dist(*p).total_cmp(&first.dist(*q)))?;
    (far.dist(first) > 0.0).then_some((first, far))
}
