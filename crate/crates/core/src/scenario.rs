//! Staged two-cycle construction, the fold of the cycle pair, and random
//! sweeps of the two-singularity region.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycles::{
    count_cycles_around_origin, find_cycles, track_family, CycleConfig, FamilyCurve, LimitCycleRecord, Stability,
    StepPolicy, Termination,
};
use crate::error::{QlcError, Result};
use crate::flow::Section;
use crate::rotation::RotationParam;
use crate::separatrix::{find_loop_parameter, LoopValue};
use crate::singular::{check_gamma_window, check_trace_window, finite_singular_points, gamma_window, trace_window, SingularKind};
use crate::vectorfield::CanonicalParamsII;

/// Which rotation parameters are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    Hamiltonian,
    Gamma,
    GammaBeta,
    GammaBetaLambda,
    Beta,
    GammaLambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    #[default]
    GammaFirst,
    BetaFirst,
    GammaLambdaFirst,
}

impl std::str::FromStr for Order {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gamma-first" => Ok(Order::GammaFirst),
            "beta-first" => Ok(Order::BetaFirst),
            "gamma-lambda-first" => Ok(Order::GammaLambdaFirst),
            _ => Err(format!(
                "unknown order '{s}' (expected gamma-first, beta-first or gamma-lambda-first)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensusEntry {
    pub x: f64,
    pub y: f64,
    pub kind: SingularKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub system: SystemId,
    pub params: CanonicalParamsII,
    pub census: Vec<CensusEntry>,
    pub origin: SingularKind,
    pub gamma_window: Option<bool>,
    pub trace_window: Option<bool>,
    pub loop_value: Option<LoopValue>,
    pub cycles: Vec<LimitCycleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
    pub cycles_above: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub count: usize,
    pub stabilities: Vec<Stability>,
    /// Cycles strictly ordered on the section, each winding once around the
    /// origin.
    pub nested: bool,
    pub enclose_only_origin: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub c: f64,
    pub order: Order,
    /// Offset above the loop value used for the final parameters.
    pub delta: f64,
    pub stages: Vec<Stage>,
    pub diagnostics: Vec<Diagnostic>,
    pub verdict: Verdict,
}

impl ScenarioReport {
    pub fn final_params(&self) -> CanonicalParamsII {
        self.stages.last().expect("report has stages").params
    }

    pub fn loop_value(&self, param: RotationParam) -> Option<f64> {
        self.stages
            .iter()
            .filter_map(|s| s.loop_value.as_ref())
            .find(|l| l.param == param)
            .map(|l| l.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub cycles: CycleConfig,
    pub loop_tol: f64,
    /// `beta + gamma` while only `gamma` and `beta` are on.
    pub small_trace: f64,
    /// `beta + gamma` when `lambda` is switched on.
    pub lambda_stage_trace: f64,
    pub beta_bracket: (f64, f64),
    pub delta_max: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cycles: CycleConfig::default(),
            loop_tol: 1e-8,
            small_trace: 0.05,
            lambda_stage_trace: -0.8,
            beta_bracket: (-3.0, 0.0),
            delta_max: 0.01,
        }
    }
}

fn fail(stage: &str, details: impl Into<String>) -> QlcError {
    QlcError::StageFailed {
        stage: stage.into(),
        details: details.into(),
    }
}

fn stage(name: &str, system: SystemId, params: CanonicalParamsII) -> Result<Stage> {
    let census = finite_singular_points(&params)?;
    let origin = census
        .iter()
        .find(|s| s.location.norm() == 0.0)
        .map(|s| s.kind)
        .ok_or_else(|| fail(name, "origin is not singular"))?;
    Ok(Stage {
        name: name.into(),
        system,
        params,
        census: census
            .iter()
            .map(|s| CensusEntry {
                x: s.location.x,
                y: s.location.y,
                kind: s.kind,
            })
            .collect(),
        origin,
        gamma_window: check_gamma_window(params.c, params.gamma).ok(),
        trace_window: check_trace_window(params.c, params.gamma, params.beta, params.lambda).ok(),
        loop_value: None,
        cycles: Vec::new(),
    })
}

fn require_two(st: &Stage) -> Result<()> {
    if st.census.len() != 2 {
        return Err(fail(&st.name, format!("expected two finite singular points, found {}", st.census.len())));
    }
    Ok(())
}

fn count_at(p: &CanonicalParamsII, config: &ScenarioConfig) -> Result<Vec<LimitCycleRecord>> {
    Ok(count_cycles_around_origin(p, &config.cycles)?.records)
}

fn verdict(records: &[LimitCycleRecord]) -> Verdict {
    Verdict {
        count: records.len(),
        stabilities: records.iter().map(|r| r.stability).collect(),
        nested: records.windows(2).all(|w| w[0].x < w[1].x) && records.iter().all(|r| r.winding == 1),
        enclose_only_origin: records.iter().all(|r| r.encloses_only_origin),
    }
}

/// Switch on `gamma`, then `beta` past the loop value, then `lambda` past its
/// loop value, and check that two nested cycles surround the origin.
pub fn run_two_cycle_scenario(c: f64, order: Order, config: &ScenarioConfig) -> Result<ScenarioReport> {
    if !(c > 1.0) {
        return Err(fail("setup", format!("c must exceed 1, got {c}")));
    }
    let (glo, ghi) = gamma_window(c)?;
    if !(glo < ghi) {
        return Err(fail("setup", "gamma window is empty"));
    }
    let gamma = (glo * ghi).sqrt();
    let with = |beta: f64, lambda: f64| CanonicalParamsII::with_unit_a(c, gamma, beta, lambda);

    // Conservative start.
    let s1 = stage("hamiltonian", SystemId::Hamiltonian, CanonicalParamsII::with_unit_a(c, 0.0, 0.0, 0.0))?;
    let centers = s1.census.iter().filter(|e| e.kind == SingularKind::LinearCenter).count();
    let saddles = s1.census.iter().filter(|e| e.kind == SingularKind::Saddle).count();
    if (centers, saddles) != (2, 2) {
        return Err(fail("hamiltonian", format!("expected two centres and two saddles, found {centers} and {saddles}")));
    }

    // gamma alone: the four singular points merge into two.
    let s2 = stage("gamma", SystemId::Gamma, with(0.0, 0.0))?;
    require_two(&s2)?;
    if s2.gamma_window != Some(true) || s2.origin != SingularKind::UnstableFocus {
        return Err(fail("gamma", format!("gamma = {gamma}: window {:?}, origin {:?}", s2.gamma_window, s2.origin)));
    }

    // beta: the separatrix loop, then a small positive trace.
    let beta_loop = find_loop_parameter(&with(0.0, 0.0), RotationParam::Beta, config.beta_bracket, config.loop_tol, &config.cycles.integrator)?;
    let beta = config.small_trace - gamma;
    if !(beta < beta_loop.value) {
        return Err(fail("beta", format!("beta = {beta} is not below the loop value {}", beta_loop.value)));
    }
    let mut s3 = stage("beta", SystemId::GammaBeta, with(beta, 0.0))?;
    require_two(&s3)?;
    s3.cycles = count_at(&s3.params, config)?;
    s3.loop_value = Some(beta_loop);
    if s3.cycles.len() != 1 || s3.cycles[0].stability != Stability::Stable {
        return Err(fail("beta", format!("expected one stable cycle, found {:?}", s3.cycles.iter().map(|r| r.stability).collect::<Vec<_>>())));
    }

    // Near the small-trace state the lambda loop swallows the stable cycle
    // without leaving an unstable one; recorded as a diagnostic.
    let mut diagnostics = Vec::new();
    if let Ok(d) = lambda_loop(c, gamma, beta, config) {
        let above = with(beta, d.value + 10.0 * config.loop_tol);
        if let Ok(r) = count_at(&above, config) {
            diagnostics.push(Diagnostic {
                name: "lambda_loop_at_small_trace".into(),
                value: d.value,
                cycles_above: r.len(),
            });
        }
    }

    // lambda: Hopf birth of a stable cycle, then the loop gives an unstable one.
    let beta4 = config.lambda_stage_trace - gamma;
    if !(beta4 < beta_loop.value) {
        return Err(fail("lambda", format!("beta = {beta4} is not below the loop value {}", beta_loop.value)));
    }
    let lambda_loop_value = lambda_loop(c, gamma, beta4, config).map_err(|e| fail("lambda", e.to_string()))?;
    let (_, t_hi) = trace_window(c, gamma)?;
    let slack = t_hi - (beta4 + gamma + lambda_loop_value.value);
    if !(slack > 0.0) {
        return Err(fail("lambda", format!("loop value {} violates the trace window", lambda_loop_value.value)));
    }
    let mut delta = config.delta_max.min(slack / 2.0);
    let mut found = None;
    for _ in 0..40 {
        let q = with(beta4, lambda_loop_value.value + delta);
        if let Ok(r) = count_at(&q, config) {
            if r.len() == 2 {
                found = Some(delta);
                break;
            }
        }
        delta /= 2.0;
    }
    let Some(first_two) = found else {
        return Err(fail("lambda", "no offset above the loop value gives two cycles"));
    };
    delta = first_two / 2.0;
    let mut s4 = stage("lambda", SystemId::GammaBetaLambda, with(beta4, lambda_loop_value.value + delta))?;
    require_two(&s4)?;
    if s4.trace_window != Some(true) || s4.gamma_window != Some(true) {
        return Err(fail("lambda", "parameter windows violated"));
    }
    s4.cycles = count_at(&s4.params, config)?;
    s4.loop_value = Some(lambda_loop_value);
    let v = verdict(&s4.cycles);
    if v.count != 2 || v.stabilities != [Stability::Stable, Stability::Unstable] || !v.nested || !v.enclose_only_origin {
        return Err(fail("lambda", format!("final cycles {v:?}")));
    }

    let stages = match order {
        Order::GammaFirst => vec![s1, s2, s3, s4],
        Order::BetaFirst => {
            let mut b = stage("beta", SystemId::Beta, CanonicalParamsII::with_unit_a(c, 0.0, beta4, 0.0))?;
            b.loop_value = s3.loop_value.clone();
            let g = stage("gamma", SystemId::GammaBeta, with(beta4, 0.0))?;
            require_two(&g)?;
            let mut l = s4.clone();
            l.cycles = count_at(&l.params, config)?;
            vec![s1, b, g, l]
        }
        Order::GammaLambdaFirst => {
            let mut gl = stage("lambda", SystemId::GammaLambda, with(0.0, s4.params.lambda))?;
            gl.loop_value = s4.loop_value.clone();
            let mut b = stage("beta", SystemId::GammaBetaLambda, s4.params)?;
            b.loop_value = s3.loop_value.clone();
            require_two(&b)?;
            b.cycles = count_at(&b.params, config)?;
            vec![s1, s2, gl, b]
        }
    };
    let verdict = verdict(&stages.last().unwrap().cycles);
    Ok(ScenarioReport {
        c,
        order,
        delta,
        stages,
        diagnostics,
        verdict,
    })
}

/// Loop value of `lambda` at fixed `(c, gamma, beta)`, bracketed between
/// zero trace and the edge of the two-singularity region.
pub fn lambda_loop(c: f64, gamma: f64, beta: f64, config: &ScenarioConfig) -> Result<LoopValue> {
    let b = beta + gamma;
    let (_, t_hi) = trace_window(c, gamma)?;
    let census_edge = (4.0 * c * gamma - (1.0 + b) * (1.0 + b)) / 4.0;
    let lo = (-b).max(0.0);
    let hi = (t_hi - b).min(census_edge) - 1e-3;
    if !(hi > lo) {
        return Err(QlcError::NoBracket(format!("empty lambda range ({lo}, {hi})")));
    }
    let p = CanonicalParamsII::with_unit_a(c, gamma, beta, lo);
    find_loop_parameter(&p, RotationParam::Lambda, (lo, hi), config.loop_tol, &config.cycles.integrator)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldExhibit {
    pub lambda_fold: f64,
    pub x_fold: f64,
    /// Fold value seen from the unstable branch.
    pub lambda_fold_outer: f64,
    pub stable_branch: FamilyCurve,
    pub unstable_branch: FamilyCurve,
    pub semistable: LimitCycleRecord,
    pub semistable_lambda: f64,
    pub past_fold_lambda: f64,
    pub past_fold_count: usize,
    /// Sign of `dx*/dlambda` on the last five steps of each branch.
    pub stable_slopes: Vec<f64>,
    pub unstable_slopes: Vec<f64>,
}

impl FoldExhibit {
    pub fn slopes_opposite(&self) -> bool {
        self.stable_slopes.len() == self.unstable_slopes.len()
            && !self.stable_slopes.is_empty()
            && self
                .stable_slopes
                .iter()
                .zip(&self.unstable_slopes)
                .all(|(a, b)| a * b < 0.0)
    }
}

fn last_slopes(curve: &FamilyCurve, n: usize) -> Vec<f64> {
    let pts = &curve.points;
    let k = pts.len().saturating_sub(n + 1);
    pts[k..].windows(2).map(|w| (w[1].x - w[0].x) / (w[1].mu - w[0].mu)).collect()
}

/// Track both cycles of a two-cycle state in increasing `lambda` until they
/// merge into a semi-stable cycle.
pub fn fold_exhibit(p: &CanonicalParamsII, step: f64, config: &CycleConfig) -> Result<FoldExhibit> {
    let section = Section::default();
    let search = find_cycles(p, &section, config)?;
    let rec = &search.records;
    if rec.len() != 2 || rec[0].stability != Stability::Stable || rec[1].stability != Stability::Unstable {
        return Err(QlcError::NoFold(format!(
            "expected a stable cycle inside an unstable one, found {:?}",
            rec.iter().map(|r| r.stability).collect::<Vec<_>>()
        )));
    }
    let (_, t_hi) = trace_window(p.c, p.gamma)?;
    let top = t_hi - p.beta - p.gamma - 1e-3;
    let policy = StepPolicy {
        initial: step,
        ..StepPolicy::default()
    };
    let range = (p.lambda, top);
    let inner = track_family(p, RotationParam::Lambda, range, rec[0].x, &section, config, &policy)?;
    let outer = track_family(p, RotationParam::Lambda, range, rec[1].x, &section, config, &policy)?;
    let fold = match (inner.termination, inner.fold) {
        (Termination::FoldDetected, Some(f)) => f,
        _ => {
            return Err(QlcError::NoFold(format!(
                "stable branch ended with {:?} after {} points",
                inner.termination,
                inner.points.len()
            )))
        }
    };
    let outer_fold = match (outer.termination, outer.fold) {
        (Termination::FoldDetected, Some(f)) => f,
        _ => {
            return Err(QlcError::NoFold(format!(
                "unstable branch ended with {:?} after {} points",
                outer.termination,
                outer.points.len()
            )))
        }
    };
    let mut semi = None;
    for eta in [1e-9, 1e-10, 1e-8, 1e-11, 1e-7, 1e-6] {
        let lam = fold.mu + eta;
        let q = RotationParam::Lambda.with(p, lam);
        if let Ok(s) = find_cycles(&q, &section, config) {
            if let Some(r) = s
                .records
                .into_iter()
                .find(|r| r.stability == Stability::SemiStable && (r.x - fold.x).abs() < 1e-3)
            {
                semi = Some((lam, r));
                break;
            }
        }
    }
    let Some((semistable_lambda, semistable)) = semi else {
        return Err(QlcError::NoFold(format!("no semi-stable cycle found next to lambda = {}", fold.mu)));
    };
    let past = (fold.mu + 1e-3).min(top);
    let past_fold_count = count_cycles_around_origin(&RotationParam::Lambda.with(p, past), config)?.count;
    Ok(FoldExhibit {
        lambda_fold: fold.mu,
        x_fold: fold.x,
        lambda_fold_outer: outer_fold.mu,
        stable_slopes: last_slopes(&inner, 5),
        unstable_slopes: last_slopes(&outer, 5),
        stable_branch: inner,
        unstable_branch: outer,
        semistable,
        semistable_lambda,
        past_fold_lambda: past,
        past_fold_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub c: f64,
    pub gamma: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl SweepParams {
    pub fn canonical(&self) -> CanonicalParamsII {
        CanonicalParamsII::with_unit_a(self.c, self.gamma, self.beta, self.lambda)
    }

    /// Both parameter windows hold and the census has exactly two points.
    pub fn admissible(&self) -> bool {
        let p = self.canonical();
        check_gamma_window(self.c, self.gamma).unwrap_or(false)
            && check_trace_window(self.c, self.gamma, self.beta, self.lambda).unwrap_or(false)
            && finite_singular_points(&p).is_ok_and(|s| s.len() == 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// Latin hypercube in `(c, gamma, lambda, trace)`; `gamma` is placed
    /// inside its window with the fraction `gamma_margin` trimmed from each
    /// end, and `beta = trace - gamma - lambda`. Inadmissible points are
    /// replaced by fresh draws until `n` points are admissible.
    LatinHypercube {
        n: usize,
        seed: u64,
        c: (f64, f64),
        lambda: (f64, f64),
        trace: (f64, f64),
        #[serde(default = "default_margin")]
        gamma_margin: f64,
        /// Keep `beta = lambda = 0`.
        #[serde(default)]
        only_gamma: bool,
    },
    /// Points just past the separatrix loop in `lambda`: draws
    /// `(c, gamma, shift, offset)` with `shift = beta + gamma`, finds the loop
    /// value `lambda_S` and puts `lambda = lambda_S + offset`, the offset being
    /// log-uniform. Draws with no loop bracket are rejected.
    LoopAnchored {
        n: usize,
        seed: u64,
        c: (f64, f64),
        #[serde(default = "default_margin")]
        gamma_margin: f64,
        shift: (f64, f64),
        offset: (f64, f64),
    },
    Explicit { points: Vec<SweepParams> },
    /// Concatenation of other grids.
    Composite { parts: Vec<GridSpec> },
}

fn default_margin() -> f64 {
    0.02
}

impl Default for GridSpec {
    /// 250 space-filling points plus 250 points just past the loop, where the
    /// second cycle lives.
    fn default() -> Self {
        GridSpec::Composite {
            parts: vec![
                GridSpec::LatinHypercube {
                    n: 250,
                    seed: 20_080_301,
                    c: (1.05, 5.0),
                    lambda: (0.0, 1.5),
                    trace: (-0.1, 0.3),
                    gamma_margin: 0.02,
                    only_gamma: false,
                },
                GridSpec::LoopAnchored {
                    n: 250,
                    seed: 20_080_302,
                    c: (1.05, 5.0),
                    gamma_margin: 0.02,
                    shift: (-1.0, -0.2),
                    offset: (1e-6, 1e-2),
                },
            ],
        }
    }
}

fn lhs_unit(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            strata.swap(i, j);
        }
        cols.push(strata.iter().map(|&k| (k as f64 + rng.gen::<f64>()) / n as f64).collect());
    }
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

impl GridSpec {
    /// Admissible points, plus the number of rejected draws. The cycle
    /// configuration is only used to locate loop values.
    pub fn points(&self, config: &CycleConfig) -> Result<(Vec<SweepParams>, usize)> {
        match self {
            GridSpec::Composite { parts } => {
                let mut out = Vec::new();
                let mut rejected = 0;
                for part in parts {
                    let (p, r) = part.points(config)?;
                    out.extend(p);
                    rejected += r;
                }
                Ok((out, rejected))
            }
            GridSpec::LoopAnchored {
                n,
                seed,
                c,
                gamma_margin,
                shift,
                offset,
            } => {
                if !(c.0 > 1.0 && c.1 >= c.0) || !(0.0..0.5).contains(gamma_margin) {
                    return Err(QlcError::InvalidConfig("grid needs 1 < c_lo <= c_hi and 0 <= gamma_margin < 0.5".into()));
                }
                if !(offset.0 > 0.0 && offset.1 >= offset.0) || !(shift.1 >= shift.0) {
                    return Err(QlcError::InvalidConfig("grid needs 0 < offset_lo <= offset_hi and shift_lo <= shift_hi".into()));
                }
                let scenario = ScenarioConfig {
                    cycles: *config,
                    ..ScenarioConfig::default()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(*n);
                let mut rejected = 0;
                let mut batch = *n;
                for _ in 0..20 {
                    if out.len() >= *n {
                        break;
                    }
                    let draws = lhs_unit(&mut rng, batch.max(1), 4)
                        .into_iter()
                        .map(|u| {
                            let cc = c.0 + (c.1 - c.0) * u[0];
                            let (glo, ghi) = gamma_window(cc)?;
                            let g = glo + (ghi - glo) * (gamma_margin + (1.0 - 2.0 * gamma_margin) * u[1]);
                            let b = shift.0 + (shift.1 - shift.0) * u[2];
                            let off = (offset.0.ln() + (offset.1.ln() - offset.0.ln()) * u[3]).exp();
                            Ok((cc, g, b - g, off))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let anchored: Vec<Option<SweepParams>> = draws
                        .par_iter()
                        .map(|&(cc, g, beta, off)| {
                            let l = lambda_loop(cc, g, beta, &scenario).ok()?;
                            Some(SweepParams {
                                c: cc,
                                gamma: g,
                                beta,
                                lambda: l.value + off,
                            })
                        })
                        .collect();
                    for sp in anchored {
                        if out.len() >= *n {
                            break;
                        }
                        match sp {
                            Some(sp) if sp.admissible() => out.push(sp),
                            _ => rejected += 1,
                        }
                    }
                    batch = (*n - out.len()).max(1) * 2;
                }
                if out.len() < *n {
                    return Err(QlcError::InvalidConfig(format!("only {} admissible points after 20 batches", out.len())));
                }
                Ok((out, rejected))
            }
            GridSpec::Explicit { points } => {
                let ok: Vec<SweepParams> = points.iter().copied().filter(SweepParams::admissible).collect();
                let rejected = points.len() - ok.len();
                Ok((ok, rejected))
            }
            GridSpec::LatinHypercube {
                n,
                seed,
                c,
                lambda,
                trace,
                gamma_margin,
                only_gamma,
            } => {
                if !(c.0 > 1.0 && c.1 >= c.0) || !(0.0..0.5).contains(gamma_margin) {
                    return Err(QlcError::InvalidConfig("grid needs 1 < c_lo <= c_hi and 0 <= gamma_margin < 0.5".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(*n);
                let mut rejected = 0;
                let mut batch = *n;
                for _ in 0..100 {
                    if out.len() >= *n {
                        break;
                    }
                    for u in lhs_unit(&mut rng, batch.max(1), 4) {
                        let cc = c.0 + (c.1 - c.0) * u[0];
                        let (glo, ghi) = gamma_window(cc)?;
                        let g = glo + (ghi - glo) * (gamma_margin + (1.0 - 2.0 * gamma_margin) * u[1]);
                        let (beta, lam) = if *only_gamma {
                            (0.0, 0.0)
                        } else {
                            let lam = lambda.0 + (lambda.1 - lambda.0) * u[2];
                            let tr = trace.0 + (trace.1 - trace.0) * u[3];
                            (tr - g - lam, lam)
                        };
                        let sp = SweepParams {
                            c: cc,
                            gamma: g,
                            beta,
                            lambda: lam,
                        };
                        if out.len() < *n && sp.admissible() {
                            out.push(sp);
                        } else if out.len() < *n {
                            rejected += 1;
                        }
                    }
                    batch = (*n - out.len()).max(1) * 2;
                }
                if out.len() < *n {
                    return Err(QlcError::InvalidConfig(format!("only {} admissible points after 100 batches", out.len())));
                }
                Ok((out, rejected))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub params: SweepParams,
    pub count: Option<usize>,
    pub error: Option<String>,
    pub records: Vec<LimitCycleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub evaluated: usize,
    pub rejected: usize,
    pub max_count: Option<usize>,
    pub argmax: Option<SweepParams>,
    pub histogram: BTreeMap<usize, usize>,
    pub inconclusive: Vec<SweepPoint>,
}

/// Count cycles at every admissible grid point; failures are kept as
/// inconclusive points.
pub fn sweep_points(grid: &GridSpec, config: &CycleConfig) -> Result<(Vec<SweepPoint>, usize)> {
    let (pts, rejected) = grid.points(config)?;
    let out = pts
        .par_iter()
        .enumerate()
        .map(|(index, sp)| match count_cycles_around_origin(&sp.canonical(), config) {
            Ok(c) => SweepPoint {
                index,
                params: *sp,
                count: Some(c.count),
                error: None,
                records: c.records,
            },
            Err(e) => SweepPoint {
                index,
                params: *sp,
                count: None,
                error: Some(e.to_string()),
                records: Vec::new(),
            },
        })
        .collect();
    Ok((out, rejected))
}

pub fn summarize(points: &[SweepPoint], rejected: usize) -> SweepSummary {
    let mut histogram = BTreeMap::new();
    let mut best: Option<(usize, SweepParams)> = None;
    for p in points {
        if let Some(c) = p.count {
            *histogram.entry(c).or_insert(0) += 1;
            if best.is_none_or(|(b, _)| c > b) {
                best = Some((c, p.params));
            }
        }
    }
    SweepSummary {
        evaluated: points.len(),
        rejected,
        max_count: best.map(|b| b.0),
        argmax: best.map(|b| b.1),
        histogram,
        inconclusive: points.iter().filter(|p| p.count.is_none()).cloned().collect(),
    }
}

pub fn sweep_max_cycles(grid: &GridSpec, config: &CycleConfig) -> Result<SweepSummary> {
    let (points, rejected) = sweep_points(grid, config)?;
    Ok(summarize(&points, rejected))
}

/// True when the origin-enclosing orbit avoids the other singular points.
pub fn encloses_only(records: &[LimitCycleRecord]) -> bool {
    records.iter().all(|r| r.encloses_only_origin && r.winding == 1)
}
