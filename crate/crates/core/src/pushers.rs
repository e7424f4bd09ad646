//! One-step characteristic integrators mapping every grid node `(x_k, v_l)`
//! at `t^n` to its endpoint at `t^{n+1}`.
//!
//! * Verlet: drift half a step, deposit charge at the half-step positions,
//!   solve Poisson, kick with the linearly interpolated field, drift again.
//! * CK2 / CK3: Taylor expansion of the characteristics in time, with the
//!   time derivatives of `E` along the trajectory replaced by velocity
//!   moments at `t^n` through the charge and current conservation laws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, PoissonMethod};
use crate::grid::{PhaseArray, PhaseGrid};
use crate::moments::{compute_moments, MomentSet};
use crate::splines::{CoefficientField, SplineKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PusherKind {
    Verlet,
    Ck2,
    Ck3,
}

impl PusherKind {
    pub const ALL: [PusherKind; 3] = [PusherKind::Verlet, PusherKind::Ck2, PusherKind::Ck3];

    pub fn name(self) -> &'static str {
        match self {
            PusherKind::Verlet => "verlet",
            PusherKind::Ck2 => "ck2",
            PusherKind::Ck3 => "ck3",
        }
    }
}

/// Externally prescribed static field used in place of the Poisson solve.
/// Test hook: the CK closure then uses the trajectory derivatives of the
/// static field, `dE/dt = v E'` and `d²E/dt² = v² E'' + E E'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrozenField {
    Uniform(f64),
    /// `amplitude * sin(wavenumber * x)`.
    Sine { amplitude: f64, wavenumber: f64 },
}

impl FrozenField {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            FrozenField::Uniform(e) => e,
            FrozenField::Sine { amplitude, wavenumber } => amplitude * (wavenumber * x).sin(),
        }
    }

    pub fn dx(&self, x: f64) -> f64 {
        match *self {
            FrozenField::Uniform(_) => 0.0,
            FrozenField::Sine { amplitude, wavenumber } => {
                amplitude * wavenumber * (wavenumber * x).cos()
            }
        }
    }

    pub fn dxx(&self, x: f64) -> f64 {
        match *self {
            FrozenField::Uniform(_) => 0.0,
            FrozenField::Sine { amplitude, wavenumber } => {
                -amplitude * wavenumber * wavenumber * (wavenumber * x).sin()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSource {
    Poisson(PoissonMethod),
    Frozen(FrozenField),
}

/// Characteristic endpoints, one per grid node, same layout as the phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoints {
    /// Positions wrapped to `[0, L)`.
    pub x: PhaseArray,
    pub v: PhaseArray,
    pub dt: f64,
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::Config(format!("time step must be finite and non-negative, got {dt}")));
    }
    Ok(())
}

/// Fills endpoints row by row; `node(i, j) -> (X, V)` with X unwrapped.
fn map_nodes(
    grid: &PhaseGrid,
    dt: f64,
    node: impl Fn(usize, usize) -> (f64, f64) + Sync,
) -> Result<Endpoints> {
    let (nxn, _) = grid.shape();
    let mut xs = vec![0.0; grid.node_count()];
    let mut vs = vec![0.0; grid.node_count()];
    xs.par_chunks_mut(nxn)
        .zip(vs.par_chunks_mut(nxn))
        .enumerate()
        .for_each(|(j, (xrow, vrow))| {
            for i in 0..nxn {
                let (x, v) = node(i, j);
                xrow[i] = grid.wrap_x(x);
                vrow[i] = v;
            }
        });
    Ok(Endpoints {
        x: PhaseArray::from_vec(grid, xs)?,
        v: PhaseArray::from_vec(grid, vs)?,
        dt,
    })
}

pub fn push(
    kind: PusherKind,
    grid: &PhaseGrid,
    coeffs: &CoefficientField,
    dt: f64,
    source: &FieldSource,
) -> Result<Endpoints> {
    match kind {
        PusherKind::Verlet => verlet_step(grid, coeffs, dt, source),
        PusherKind::Ck2 => ck2_step(grid, coeffs, dt, source),
        PusherKind::Ck3 => ck3_step(grid, coeffs, dt, source),
    }
}

/// Single-particle drift-kick-drift in a given field, positions unwrapped.
#[inline]
pub fn verlet_particle(x: f64, v: f64, dt: f64, e: impl Fn(f64) -> f64) -> (f64, f64) {
    let x_half = x + 0.5 * dt * v;
    let v_new = v + dt * e(x_half);
    (x_half + 0.5 * dt * v_new, v_new)
}

/// Half-step positions `x_k + dt/2 v_l`, wrapped.
pub fn half_step_positions(grid: &PhaseGrid, dt: f64) -> PhaseArray {
    PhaseArray::from_fn(grid, |x, v| grid.wrap_x(x + 0.5 * dt * v))
}

pub fn verlet_step(
    grid: &PhaseGrid,
    coeffs: &CoefficientField,
    dt: f64,
    source: &FieldSource,
) -> Result<Endpoints> {
    check_dt(dt)?;
    match source {
        FieldSource::Frozen(frozen) => map_nodes(grid, dt, |i, j| {
            verlet_particle(grid.x(i), grid.v(j), dt, |x| frozen.value(x))
        }),
        FieldSource::Poisson(method) => {
            let x_half = half_step_positions(grid, dt);
            // linear deposition pairs with the linear field interpolation below
            let rho = field::deposit_charge(grid, coeffs.omega(), &x_half, SplineKind::Linear)?;
            let e = field::solve(grid, &rho, *method)?;
            map_nodes(grid, dt, |i, j| {
                let xh = x_half.get(i, j);
                let v_new = grid.v(j) + dt * field::eval_e(grid, &e, xh);
                (xh + 0.5 * dt * v_new, v_new)
            })
        }
    }
}

/// Field and closure terms of the CK expansion at the grid nodes.
enum Closure<'a> {
    SelfConsistent { e: Vec<f64>, m: MomentSet },
    Frozen(&'a FrozenField),
}

impl Closure<'_> {
    fn build<'a>(
        grid: &PhaseGrid,
        coeffs: &CoefficientField,
        source: &'a FieldSource,
    ) -> Result<Closure<'a>> {
        Ok(match source {
            FieldSource::Frozen(f) => Closure::Frozen(f),
            FieldSource::Poisson(method) => {
                let m = compute_moments(grid, coeffs);
                let e = field::solve(grid, &m.rho, *method)?;
                Closure::SelfConsistent { e, m }
            }
        })
    }

    #[inline]
    fn e(&self, grid: &PhaseGrid, i: usize) -> f64 {
        match self {
            Closure::SelfConsistent { e, .. } => e[i],
            Closure::Frozen(f) => f.value(grid.x(i)),
        }
    }

    /// First total time derivative of `E` along the trajectory.
    #[inline]
    fn phi(&self, grid: &PhaseGrid, i: usize, v: f64) -> f64 {
        match self {
            Closure::SelfConsistent { m, .. } => v * m.rho[i] - m.j[i] + m.j_bar,
            Closure::Frozen(f) => v * f.dx(grid.x(i)),
        }
    }

    /// Second total time derivative of `E` along the trajectory.
    #[inline]
    fn varphi(&self, grid: &PhaseGrid, i: usize, v: f64) -> f64 {
        match self {
            Closure::SelfConsistent { e, m } => {
                m.di2_dx[i] - e[i] - 2.0 * v * m.dj_dx[i] + v * v * m.drho_dx[i]
            }
            Closure::Frozen(f) => {
                let x = grid.x(i);
                v * v * f.dxx(x) + f.value(x) * f.dx(x)
            }
        }
    }
}

pub fn ck2_step(
    grid: &PhaseGrid,
    coeffs: &CoefficientField,
    dt: f64,
    source: &FieldSource,
) -> Result<Endpoints> {
    check_dt(dt)?;
    let c = Closure::build(grid, coeffs, source)?;
    let h2 = 0.5 * dt * dt;
    map_nodes(grid, dt, |i, j| {
        let (x, v) = (grid.x(i), grid.v(j));
        let e = c.e(grid, i);
        (x + dt * v + h2 * e, v + dt * e + h2 * c.phi(grid, i, v))
    })
}

pub fn ck3_step(
    grid: &PhaseGrid,
    coeffs: &CoefficientField,
    dt: f64,
    source: &FieldSource,
) -> Result<Endpoints> {
    check_dt(dt)?;
    let c = Closure::build(grid, coeffs, source)?;
    let h2 = 0.5 * dt * dt;
    let h3 = dt * dt * dt / 6.0;
    map_nodes(grid, dt, |i, j| {
        let (x, v) = (grid.x(i), grid.v(j));
        let e = c.e(grid, i);
        let phi = c.phi(grid, i, v);
        (
            x + dt * v + h2 * e + h3 * phi,
            v + dt * e + h2 * phi + h3 * c.varphi(grid, i, v),
        )
    })
}

/// The three weighted sums whose vanishing makes the CK transport phase
/// momentum conserving, each with the sum of absolute contributions as scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportSums {
    pub e: f64,
    pub e_scale: f64,
    pub phi: f64,
    pub phi_scale: f64,
    pub varphi: f64,
    pub varphi_scale: f64,
}

impl TransportSums {
    pub fn relative(&self) -> [f64; 3] {
        let rel = |s: f64, scale: f64| if scale > 0.0 { s.abs() / scale } else { s.abs() };
        [
            rel(self.e, self.e_scale),
            rel(self.phi, self.phi_scale),
            rel(self.varphi, self.varphi_scale),
        ]
    }
}

/// `Σ ω E(x_i)`, `Σ ω φ(x_i, v_j)` and `Σ ω ϕ(x_i, v_j)` at `t^n`.
pub fn transport_sums(
    grid: &PhaseGrid,
    coeffs: &CoefficientField,
    method: PoissonMethod,
) -> Result<TransportSums> {
    let m = compute_moments(grid, coeffs);
    let e = field::solve(grid, &m.rho, method)?;
    let mut s = TransportSums {
        e: 0.0,
        e_scale: 0.0,
        phi: 0.0,
        phi_scale: 0.0,
        varphi: 0.0,
        varphi_scale: 0.0,
    };
    for j in 0..grid.v_nodes() {
        let v = grid.v(j);
        for i in 0..grid.x_nodes() {
            let w = coeffs.get(i, j);
            s.e += w * e[i];
            s.e_scale += (w * e[i]).abs();

            let phi_terms = [v * m.rho[i], -m.j[i], m.j_bar];
            s.phi += w * phi_terms.iter().sum::<f64>();
            s.phi_scale += phi_terms.iter().map(|t| (w * t).abs()).sum::<f64>();

            let var_terms = [
                m.di2_dx[i],
                -e[i],
                -2.0 * v * m.dj_dx[i],
                v * v * m.drho_dx[i],
            ];
            s.varphi += w * var_terms.iter().sum::<f64>();
            s.varphi_scale += var_terms.iter().map(|t| (w * t).abs()).sum::<f64>();
        }
    }
    Ok(s)
}
