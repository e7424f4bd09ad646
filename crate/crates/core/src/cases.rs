//! Initial conditions, experiment definitions and the convergence driver.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::l1_error;
use crate::error::{Error, Result};
use crate::field::PoissonMethod;
use crate::grid::{PhaseArray, PhaseGrid};
use crate::pushers::{FieldSource, FrozenField, PusherKind};
use crate::solver::{self, DistributionState, RunOutput, RunSettings, Scheme};
use crate::splines::SplineKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    TwoStream,
    BumpOnTail,
    FreeStreaming,
    /// Perturbed Maxwellian `M_{v_t}(v) (1 + α cos kx)`, self-consistent.
    Custom,
}

impl CaseKind {
    pub const ALL: [CaseKind; 4] = [
        CaseKind::TwoStream,
        CaseKind::BumpOnTail,
        CaseKind::FreeStreaming,
        CaseKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::TwoStream => "two_stream",
            CaseKind::BumpOnTail => "bump_on_tail",
            CaseKind::FreeStreaming => "free_streaming",
            CaseKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown case `{s}`")))
    }

    pub fn description(self) -> &'static str {
        match self {
            CaseKind::TwoStream => "two-stream instability, f0 = v^2 exp(-v^2/2)/sqrt(2pi) (1 - alpha cos kx)",
            CaseKind::BumpOnTail => "bump-on-tail instability, Maxwellian plus a beam at u",
            CaseKind::FreeStreaming => "field-free transport of a perturbed Maxwellian (exact solution known)",
            CaseKind::Custom => "self-consistent perturbed Maxwellian with thermal width v_t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    pub n_p: f64,
    pub n_b: f64,
    pub u: f64,
    pub v_t: f64,
}

impl Default for BeamParams {
    fn default() -> Self {
        let s = (2.0 * PI).sqrt();
        Self {
            n_p: 9.0 / (10.0 * s),
            n_b: 2.0 / (10.0 * s),
            u: 4.5,
            v_t: 0.5,
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseConfig {
    pub case: CaseKind,
    pub k: f64,
    pub alpha: f64,
    /// Beam parameters (bump-on-tail).
    pub beam: BeamParams,
    /// Thermal width of the Maxwellian (free_streaming, custom).
    pub v_t: f64,
    /// Number of distinct x nodes.
    pub nodes_x: usize,
    /// Number of v intervals.
    pub nv: usize,
    pub vmax: f64,
    pub length: f64,
    pub dt: f64,
    pub t_final: f64,
    pub pusher: PusherKind,
    pub spline: SplineKind,
    pub poisson: PoissonMethod,
    pub diag_stride: usize,
    pub snapshot_times: Vec<f64>,
}

/// Defaults for a case, and the keys whose default is not a published value.
#[derive(Debug, Clone)]
pub struct CaseDefaults {
    pub config: CaseConfig,
    pub artifact_keys: Vec<&'static str>,
}

impl CaseConfig {
    pub fn defaults(case: CaseKind) -> CaseDefaults {
        let two_pi = 2.0 * PI;
        let base = CaseConfig {
            case,
            k: 0.2,
            alpha: 0.05,
            beam: BeamParams::default(),
            v_t: 1.0,
            nodes_x: 128,
            nv: 128,
            vmax: 9.0,
            length: two_pi / 0.2,
            dt: 0.1,
            t_final: 50.0,
            pusher: PusherKind::Verlet,
            spline: SplineKind::Cubic,
            poisson: PoissonMethod::Green,
            diag_stride: 1,
            snapshot_times: Vec::new(),
        };
        let common = ["pusher", "poisson", "t_final", "diag_stride"];
        match case {
            CaseKind::TwoStream => CaseDefaults {
                config: base,
                artifact_keys: common.to_vec(),
            },
            CaseKind::BumpOnTail => CaseDefaults {
                config: CaseConfig {
                    k: 0.3,
                    alpha: 0.04,
                    length: 20.0 * PI,
                    dt: 0.2,
                    t_final: 100.0,
                    ..base
                },
                artifact_keys: [&common[..], &["k", "alpha"]].concat(),
            },
            CaseKind::FreeStreaming => CaseDefaults {
                config: CaseConfig {
                    k: 1.0,
                    alpha: 0.2,
                    length: two_pi,
                    nodes_x: 32,
                    nv: 128,
                    vmax: 6.0,
                    dt: 0.1,
                    t_final: 1.0,
                    spline: SplineKind::Linear,
                    ..base
                },
                artifact_keys: [&common[..], &["k", "alpha", "v_t", "length", "nodes_x", "nv", "vmax", "dt", "spline"]].concat(),
            },
            CaseKind::Custom => CaseDefaults {
                config: CaseConfig {
                    alpha: 0.001,
                    nodes_x: 256,
                    nv: 256,
                    dt: 0.05,
                    t_final: 1.0,
                    ..base
                },
                artifact_keys: [&common[..], &["k", "alpha", "v_t", "length", "nodes_x", "nv", "vmax", "dt", "spline"]].concat(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        let modes = self.k * self.length / (2.0 * PI);
        if (modes - modes.round()).abs() > 1e-9 * modes.max(1.0) || modes.round() < 1.0 {
            return bad(format!(
                "k L / 2pi = {modes} is not a positive integer; the perturbation must be periodic on the box"
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be non-negative, got {}", self.t_final));
        }
        if !(self.v_t > 0.0 && self.beam.v_t > 0.0) {
            return bad("thermal widths must be positive".into());
        }
        if self.diag_stride == 0 {
            return bad("diag_stride must be at least 1".into());
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::from_nodes(self.length, self.vmax, self.nodes_x, self.nv)
    }

    pub fn field_source(&self) -> FieldSource {
        match self.case {
            CaseKind::FreeStreaming => FieldSource::Frozen(FrozenField::Uniform(0.0)),
            _ => FieldSource::Poisson(self.poisson),
        }
    }

    pub fn scheme(&self) -> Scheme {
        Scheme {
            pusher: self.pusher,
            spline: self.spline,
            field: self.field_source(),
            dt: self.dt,
        }
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            t_final: self.t_final,
            diag_stride: self.diag_stride,
            snapshot_times: self.snapshot_times.clone(),
        }
    }

    pub fn initial_values(&self, grid: &PhaseGrid) -> PhaseArray {
        match self.case {
            CaseKind::TwoStream => init_two_stream(grid, self.k, self.alpha),
            CaseKind::BumpOnTail => init_bump_on_tail(grid, self.k, self.alpha, &self.beam),
            CaseKind::FreeStreaming | CaseKind::Custom => {
                init_perturbed_maxwellian(grid, self.k, self.alpha, self.v_t)
            }
        }
    }

    /// Exact solution at time `t`, where one is known.
    pub fn exact_values(&self, grid: &PhaseGrid, t: f64) -> Option<PhaseArray> {
        match self.case {
            CaseKind::FreeStreaming => Some(exact_free_streaming(grid, self.k, self.alpha, self.v_t, t)),
            _ => None,
        }
    }

    pub fn initial_state(&self) -> Result<(PhaseGrid, DistributionState)> {
        self.validate()?;
        let grid = self.grid()?;
        let values = self.initial_values(&grid);
        let state = DistributionState::new(&grid, values, self.spline)?;
        Ok((grid, state))
    }

    pub fn run(&self) -> Result<RunOutput> {
        let (grid, state) = self.initial_state()?;
        solver::run(&grid, state, &self.scheme(), &self.settings())
    }
}

fn maxwellian(v: f64, v_t: f64) -> f64 {
    (-0.5 * v * v / (v_t * v_t)).exp() / ((2.0 * PI).sqrt() * v_t)
}

/// `(1/√(2π)) e^{-v²/2} v² (1 - α cos kx)`.
pub fn init_two_stream(grid: &PhaseGrid, k: f64, alpha: f64) -> PhaseArray {
    PhaseArray::from_fn(grid, |x, v| maxwellian(v, 1.0) * v * v * (1.0 - alpha * (k * x).cos()))
}

/// `f̃(v) = n_p e^{-v²/2} + n_b e^{-(v-u)²/(2 v_t²)}`, times `1 + α cos kx`.
pub fn bump_on_tail_profile(v: f64, beam: &BeamParams) -> f64 {
    let d = v - beam.u;
    beam.n_p * (-0.5 * v * v).exp() + beam.n_b * (-0.5 * d * d / (beam.v_t * beam.v_t)).exp()
}

pub fn init_bump_on_tail(grid: &PhaseGrid, k: f64, alpha: f64, beam: &BeamParams) -> PhaseArray {
    PhaseArray::from_fn(grid, |x, v| bump_on_tail_profile(v, beam) * (1.0 + alpha * (k * x).cos()))
}

/// Normalized Maxwellian of width `v_t` times `1 + α cos kx`.
pub fn init_perturbed_maxwellian(grid: &PhaseGrid, k: f64, alpha: f64, v_t: f64) -> PhaseArray {
    PhaseArray::from_fn(grid, |x, v| maxwellian(v, v_t) * (1.0 + alpha * (k * x).cos()))
}

/// Field-free solution `f₀(x - v t, v)` of the perturbed Maxwellian.
pub fn exact_free_streaming(grid: &PhaseGrid, k: f64, alpha: f64, v_t: f64, t: f64) -> PhaseArray {
    PhaseArray::from_fn(grid, |x, v| maxwellian(v, v_t) * (1.0 + alpha * (k * (x - v * t)).cos()))
}

/// Time step at a refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    Fixed(f64),
    /// `dt = c h^exponent` with `h = max(dx, dv)`. Against a fine reference
    /// run dt is shortened so an integer number of steps reaches the final
    /// time; against an exact solution it is kept and the error is taken at
    /// the time actually reached.
    Power { c: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ladder {
    /// Fixed grid, decreasing time steps, errors against the same scheme at
    /// `reference_dt` (or against the exact solution when one is known).
    TimeStep { dts: Vec<f64>, reference_dt: f64 },
    /// Both axes refined by 2 per level starting from the base config's grid.
    Resolution { levels: usize, dt: DtRule },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// Number of distinct x nodes.
    pub resolution: usize,
    pub dx: f64,
    pub dv: f64,
    pub dt: f64,
    pub l1_error: f64,
    /// `log(e_{k-1}/e_k) / log(s_{k-1}/s_k)` with `s` the refined quantity
    /// (dt or h); absent on the first row.
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Errors strictly decreasing along the ladder.
    pub monotone: bool,
    /// Whether errors were measured against an exact solution.
    pub exact_reference: bool,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.observed_order).collect()
    }

    /// Least-squares slope of `log e` against `log s`.
    pub fn fitted_order(&self, by_dt: bool) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| {
                let s = if by_dt { r.dt } else { r.dx.max(r.dv) };
                (s.ln(), r.l1_error.ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "resolution,dx,dv,dt,l1_error,observed_order")?;
        for r in &self.rows {
            let order = r.observed_order.map(|o| format!("{o:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.resolution, r.dx, r.dv, r.dt, r.l1_error, order
            )?;
        }
        Ok(())
    }
}

fn fitted_dt(rule: DtRule, h: f64, t_final: f64, land_on_final: bool) -> f64 {
    match rule {
        DtRule::Fixed(dt) => dt,
        DtRule::Power { c, exponent } => {
            let raw = c * h.powf(exponent);
            if land_on_final && t_final > 0.0 {
                t_final / (t_final / raw).ceil()
            } else {
                raw
            }
        }
    }
}

fn final_values(cfg: &CaseConfig) -> Result<(PhaseGrid, PhaseArray, f64)> {
    let mut cfg = cfg.clone();
    cfg.snapshot_times.clear();
    cfg.diag_stride = usize::MAX;
    let out = cfg.run()?;
    let grid = cfg.grid()?;
    Ok((grid, out.final_state.values, out.final_state.t))
}

/// Restriction by injection of a grid refined `2^levels` times in both axes.
fn inject(fine: &PhaseArray, coarse: &PhaseGrid, levels: u32) -> PhaseArray {
    let r = 1usize << levels;
    let (fnx, _) = fine.shape();
    let data = fine.as_slice();
    PhaseArray::from_fn_indexed(coarse, |i, j| data[(j * r) * fnx + i * r])
}

pub fn convergence_study(base: &CaseConfig, ladder: &Ladder) -> Result<ConvergenceTable> {
    base.validate()?;
    let mut rows = Vec::new();
    let mut exact_reference = true;
    match ladder {
        Ladder::TimeStep { dts, reference_dt } => {
            if dts.len() < 3 {
                return Err(Error::Config("a convergence ladder needs at least 3 levels".into()));
            }
            let grid = base.grid()?;
            let configs: Vec<CaseConfig> = dts
                .iter()
                .map(|&dt| CaseConfig { dt, ..base.clone() })
                .collect();
            let finals: Vec<Result<(PhaseGrid, PhaseArray, f64)>> =
                configs.par_iter().map(final_values).collect();
            let reference = match base.exact_values(&grid, base.t_final) {
                Some(exact) => exact,
                None => {
                    exact_reference = false;
                    final_values(&CaseConfig { dt: *reference_dt, ..base.clone() })?.1
                }
            };
            for (cfg, fin) in configs.iter().zip(finals) {
                let (_, values, _) = fin?;
                rows.push(ConvergenceRow {
                    resolution: grid.x_nodes(),
                    dx: grid.dx(),
                    dv: grid.dv(),
                    dt: cfg.dt,
                    l1_error: l1_error(&grid, &values, &reference)?,
                    observed_order: None,
                });
            }
        }
        Ladder::Resolution { levels, dt } => {
            if *levels < 3 {
                return Err(Error::Config("a convergence ladder needs at least 3 levels".into()));
            }
            let exact = base.exact_values(&base.grid()?, 0.0).is_some();
            let configs: Vec<CaseConfig> = (0..*levels)
                .map(|lvl| {
                    let nodes_x = base.nodes_x << lvl;
                    let nv = base.nv << lvl;
                    let g = PhaseGrid::from_nodes(base.length, base.vmax, nodes_x, nv)?;
                    Ok(CaseConfig {
                        nodes_x,
                        nv,
                        dt: fitted_dt(*dt, g.h(), base.t_final, !exact),
                        ..base.clone()
                    })
                })
                .collect::<Result<_>>()?;
            let finals: Vec<Result<(PhaseGrid, PhaseArray, f64)>> =
                configs.par_iter().map(final_values).collect();
            let reference_fine = if exact {
                None
            } else {
                exact_reference = false;
                let lvl = *levels + 1;
                let nodes_x = base.nodes_x << lvl;
                let nv = base.nv << lvl;
                let g = PhaseGrid::from_nodes(base.length, base.vmax, nodes_x, nv)?;
                let cfg = CaseConfig {
                    nodes_x,
                    nv,
                    dt: fitted_dt(*dt, g.h(), base.t_final, true),
                    ..base.clone()
                };
                Some((lvl, final_values(&cfg)?.1))
            };
            for (cfg, fin) in configs.iter().zip(finals) {
                let (grid, values, t) = fin?;
                let reference = match &reference_fine {
                    None => cfg.exact_values(&grid, t).expect("exact solution"),
                    Some((lvl, fine)) => {
                        let level = (cfg.nodes_x / base.nodes_x).trailing_zeros();
                        inject(fine, &grid, *lvl as u32 - level)
                    }
                };
                rows.push(ConvergenceRow {
                    resolution: grid.x_nodes(),
                    dx: grid.dx(),
                    dv: grid.dv(),
                    dt: cfg.dt,
                    l1_error: l1_error(&grid, &values, &reference)?,
                    observed_order: None,
                });
            }
        }
    }
    let by_dt = matches!(ladder, Ladder::TimeStep { .. });
    for n in 1..rows.len() {
        let (a, b) = (rows[n - 1], rows[n]);
        let (sa, sb) = if by_dt {
            (a.dt, b.dt)
        } else {
            (a.dx.max(a.dv), b.dx.max(b.dv))
        };
        rows[n].observed_order = Some((a.l1_error / b.l1_error).ln() / (sa / sb).ln());
    }
    let monotone = rows.windows(2).all(|w| w[1].l1_error < w[0].l1_error);
    if !monotone {
        log::warn!("convergence ladder errors are not monotone");
    }
    Ok(ConvergenceTable {
        rows,
        monotone,
        exact_reference,
    })
}
