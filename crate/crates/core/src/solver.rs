//! Forward semi-Lagrangian time loop: push every grid node along its
//! approximate characteristic, deposit its coefficient onto the fixed grid
//! with tensor B-spline weights, and re-solve the spline coefficients.

use std::io::Write;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::field;
use crate::grid::{PhaseArray, PhaseGrid};
use crate::moments::compute_moments;
use crate::pushers::{self, Endpoints, FieldSource, PusherKind};
use crate::splines::{solve_coefficients, CoefficientField, SplineKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scheme {
    pub pusher: PusherKind,
    pub spline: SplineKind,
    pub field: FieldSource,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionState {
    pub values: PhaseArray,
    pub coeffs: CoefficientField,
    pub t: f64,
    pub step_index: usize,
}

impl DistributionState {
    pub fn new(grid: &PhaseGrid, values: PhaseArray, spline: SplineKind) -> Result<Self> {
        let coeffs = solve_coefficients(grid, &values, spline)?;
        Ok(Self {
            values,
            coeffs,
            t: 0.0,
            step_index: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deposition {
    pub values: PhaseArray,
    /// Weight (mass units) that fell outside the velocity domain.
    pub mass_lost: f64,
}

/// `f^{n+1}_{i,j} = Σ_{k,l} ω_{k,l} S(x_i - X_{k,l}) S(v_j - V_{k,l})`.
/// Endpoints with `|V| > vmax` are dropped; stencil weight landing on rows
/// outside `0..=nv` is dropped as well. Both are counted in `mass_lost`.
pub fn deposit_distribution(
    grid: &PhaseGrid,
    coeffs: &CoefficientField,
    endpoints: &Endpoints,
) -> Result<Deposition> {
    endpoints.x.check_shape(grid)?;
    endpoints.v.check_shape(grid)?;
    let kind = coeffs.kind();
    let nv = grid.nv() as isize;
    let mut out = PhaseArray::zeros(grid);
    let mut lost = 0.0;
    let omega = coeffs.omega().as_slice();
    let xs = endpoints.x.as_slice();
    let vs = endpoints.v.as_slice();
    for ((&w, &x), &v) in omega.iter().zip(xs).zip(vs) {
        if w == 0.0 {
            continue;
        }
        let Some((q, beta)) = grid.locate_v(v) else {
            lost += w;
            continue;
        };
        let (p, alpha) = grid.locate_x(x);
        let sx = kind.stencil(alpha);
        for (dl, wv) in kind.stencil(beta).iter() {
            let l = q as isize + dl;
            if l < 0 || l > nv {
                lost += w * wv;
                continue;
            }
            let wwv = w * wv;
            for (dk, wx) in sx.iter() {
                out.add(grid.wrap_index(p as isize + dk), l as usize, wwv * wx);
            }
        }
    }
    Ok(Deposition {
        values: out,
        mass_lost: grid.dx() * grid.dv() * lost,
    })
}

/// Advances one time step. Returns the new state and the mass lost at the
/// velocity boundary during the step.
pub fn step(
    grid: &PhaseGrid,
    state: &DistributionState,
    scheme: &Scheme,
) -> Result<(DistributionState, f64)> {
    if state.coeffs.kind() != scheme.spline {
        return Err(Error::Config("state and scheme use different spline kinds".into()));
    }
    let endpoints = pushers::push(scheme.pusher, grid, &state.coeffs, scheme.dt, &scheme.field)?;
    let dep = deposit_distribution(grid, &state.coeffs, &endpoints)?;
    let step_index = state.step_index + 1;
    if !dep.values.all_finite() {
        return Err(Error::NumericalAbort { step: step_index });
    }
    let coeffs = solve_coefficients(grid, &dep.values, scheme.spline)?;
    Ok((
        DistributionState {
            values: dep.values,
            coeffs,
            t: step_index as f64 * scheme.dt,
            step_index,
        },
        dep.mass_lost,
    ))
}

/// Nodal electric field of the state at its own time level.
pub fn nodal_field(grid: &PhaseGrid, coeffs: &CoefficientField, source: &FieldSource) -> Result<Vec<f64>> {
    match source {
        FieldSource::Frozen(f) => Ok(grid.xs().iter().map(|&x| f.value(x)).collect()),
        FieldSource::Poisson(method) => {
            let m = compute_moments(grid, coeffs);
            field::solve(grid, &m.rho, *method)
        }
    }
}

pub fn measure(
    grid: &PhaseGrid,
    state: &DistributionState,
    source: &FieldSource,
    mass_lost: f64,
) -> Result<DiagnosticsRecord> {
    let e = nodal_field(grid, &state.coeffs, source)?;
    Ok(DiagnosticsRecord::measure(
        grid,
        state.t,
        state.coeffs.omega(),
        &state.values,
        &e,
        mass_lost,
    ))
}

/// `ceil(T / dt)`, tolerant to the rounding of `T / dt`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    if t_final <= 0.0 {
        return 0;
    }
    let r = t_final / dt;
    let n = r.round();
    if n >= 1.0 && (r - n).abs() <= 1e-9 * n {
        n as usize
    } else {
        r.ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub t_final: f64,
    /// A diagnostics row every `diag_stride` steps (and always the last one).
    pub diag_stride: usize,
    pub snapshot_times: Vec<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            t_final: 0.0,
            diag_stride: 1,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub values: PhaseArray,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: DistributionState,
}

pub fn run(
    grid: &PhaseGrid,
    initial: DistributionState,
    scheme: &Scheme,
    settings: &RunSettings,
) -> Result<RunOutput> {
    run_with(grid, initial, scheme, settings, |_, _| {})
}

/// Same as [`run`], calling `observe` after every step with the new state
/// and its diagnostics row (when one is recorded).
pub fn run_with(
    grid: &PhaseGrid,
    initial: DistributionState,
    scheme: &Scheme,
    settings: &RunSettings,
    mut observe: impl FnMut(&DistributionState, Option<&DiagnosticsRecord>),
) -> Result<RunOutput> {
    if !initial.values.all_finite() {
        return Err(Error::NumericalAbort { step: initial.step_index });
    }
    let stride = settings.diag_stride.max(1);
    let n_steps = step_count(settings.t_final, scheme.dt);
    let mut pending: Vec<f64> = settings.snapshot_times.clone();
    pending.sort_by(|a, b| a.total_cmp(b));
    let mut pending = pending.into_iter().peekable();
    let snap_tol = 1e-9 * scheme.dt.max(1e-300);

    let mut lost = 0.0;
    let mut diagnostics = vec![measure(grid, &initial, &scheme.field, lost)?];
    let mut snapshots = Vec::new();
    let mut take_snapshots = |state: &DistributionState, snapshots: &mut Vec<Snapshot>| {
        while let Some(&ts) = pending.peek() {
            if ts <= state.t + snap_tol {
                snapshots.push(Snapshot {
                    t: state.t,
                    values: state.values.clone(),
                });
                pending.next();
            } else {
                break;
            }
        }
    };
    take_snapshots(&initial, &mut snapshots);

    let mut state = initial;
    for n in 1..=n_steps {
        let (next, dl) = step(grid, &state, scheme)?;
        lost += dl;
        state = next;
        let rec = if n % stride == 0 || n == n_steps {
            let r = measure(grid, &state, &scheme.field, lost)?;
            if !r.total_energy.is_finite() {
                return Err(Error::NumericalAbort { step: n });
            }
            diagnostics.push(r);
            diagnostics.last()
        } else {
            None
        };
        observe(&state, rec);
        take_snapshots(&state, &mut snapshots);
    }
    Ok(RunOutput {
        diagnostics,
        snapshots,
        final_state: state,
    })
}

/// Header `# t=.. Nx=.. Nv=.. L=.. R=..`, then one line of `Nx + 1` values
/// per velocity node.
pub fn write_snapshot<W: Write>(mut out: W, grid: &PhaseGrid, snap: &Snapshot) -> std::io::Result<()> {
    writeln!(
        out,
        "# t={} Nx={} Nv={} L={} R={}",
        snap.t,
        grid.nx(),
        grid.nv(),
        grid.length(),
        grid.vmax()
    )?;
    for j in 0..grid.v_nodes() {
        let row: Vec<String> = snap.values.row(j).iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}
