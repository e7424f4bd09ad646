//! Charge density and electrostatic field on the periodic x grid.
//!
//! Two Poisson solvers are provided: the Green-kernel integral operator
//! (rectangle rule on the periodic nodes) and a centered finite-difference
//! solve on the staggered half-node mesh, the latter paired with linear
//! spline evaluation of the field between nodes.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseArray, PhaseGrid};
use crate::splines::SplineKind;

/// Mean charge tolerated by the periodic solvers.
pub const NEUTRALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonMethod {
    Green,
    StaggeredFd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub rho: Vec<f64>,
    pub e: Vec<f64>,
    pub method: PoissonMethod,
}

impl FieldState {
    pub fn solve(grid: &PhaseGrid, rho: Vec<f64>, method: PoissonMethod) -> Result<Self> {
        let e = solve(grid, &rho, method)?;
        Ok(Self { rho, e, method })
    }
}

/// `ρ(x_i) = dv Σ_{k,l} w_{k,l} S((x_i - x_{k,l}) / dx) - 1` for weights
/// sitting at the given x positions.
pub fn deposit_charge(
    grid: &PhaseGrid,
    weights: &PhaseArray,
    positions: &PhaseArray,
    kernel: SplineKind,
) -> Result<Vec<f64>> {
    weights.check_shape(grid)?;
    positions.check_shape(grid)?;
    let mut acc = vec![0.0; grid.x_nodes()];
    for (&w, &x) in weights.iter().zip(positions.iter()) {
        if w == 0.0 {
            continue;
        }
        let (p, alpha) = grid.locate_x(x);
        for (off, s) in kernel.stencil(alpha).iter() {
            acc[grid.wrap_index(p as isize + off)] += w * s;
        }
    }
    let dv = grid.dv();
    Ok(acc.into_iter().map(|a| dv * a - 1.0).collect())
}

fn mean_charge(rho: &[f64]) -> f64 {
    rho.iter().sum::<f64>() / rho.len() as f64
}

/// Green kernel of `∂E/∂x = ρ` with zero-mean E: `y/L - 1` for `x < y`,
/// `y/L` for `x > y`. On the diagonal the average of the two one-sided limits
/// is used, which turns the periodic rectangle rule into the trapezoid rule
/// on each side of the kink.
pub fn green_kernel(length: f64, x: f64, y: f64) -> f64 {
    let base = y / length;
    if x < y {
        base - 1.0
    } else if x > y {
        base
    } else {
        base - 0.5
    }
}

static NON_NEUTRAL_REPORTED: AtomicBool = AtomicBool::new(false);

/// `E(x_i) = dx Σ_j K(x_i, x_j) ρ(x_j)`.
pub fn solve_green(grid: &PhaseGrid, rho: &[f64]) -> Vec<f64> {
    let n = grid.x_nodes();
    assert_eq!(rho.len(), n, "charge density length");
    let mean = mean_charge(rho);
    if mean.abs() > NEUTRALITY_TOL {
        if NON_NEUTRAL_REPORTED.swap(true, Ordering::Relaxed) {
            log::debug!("Green solve on non-neutral charge density (mean {mean:e})");
        } else {
            log::warn!("Green solve on non-neutral charge density (mean {mean:e}); further occurrences logged at debug level");
        }
    }
    let l = grid.length();
    let dx = grid.dx();
    let mut e: Vec<f64> = (0..n)
        .map(|i| {
            let xi = grid.x(i);
            dx * (0..n)
                .map(|j| green_kernel(l, xi, grid.x(j)) * rho[j])
                .sum::<f64>()
        })
        .collect();
    // exact zero mean for neutral input; fixes the constant otherwise
    let e_mean = e.iter().sum::<f64>() / n as f64;
    e.iter_mut().for_each(|x| *x -= e_mean);
    e
}

/// Field on the staggered mesh: `half[k] = E(x_{k+1/2})`, and nodal values
/// `nodal[i] = (half[i-1] + half[i]) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredField {
    pub half: Vec<f64>,
    pub nodal: Vec<f64>,
}

/// Solves `E(x_{k+1/2}) - E(x_{k-1/2}) = dx ρ(x_k)` with zero mean.
pub fn solve_staggered_fd(grid: &PhaseGrid, rho: &[f64]) -> Result<StaggeredField> {
    let n = grid.x_nodes();
    assert_eq!(rho.len(), n, "charge density length");
    let mean = mean_charge(rho);
    if !(mean.abs() <= NEUTRALITY_TOL) {
        return Err(Error::Solvability { mean });
    }
    let dx = grid.dx();
    let mut half = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &r in rho {
        acc += dx * (r - mean);
        half.push(acc);
    }
    let shift = half.iter().sum::<f64>() / n as f64;
    half.iter_mut().for_each(|h| *h -= shift);
    let nodal = (0..n)
        .map(|i| 0.5 * (half[(i + n - 1) % n] + half[i]))
        .collect();
    Ok(StaggeredField { half, nodal })
}

/// Nodal field from the chosen solver.
pub fn solve(grid: &PhaseGrid, rho: &[f64], method: PoissonMethod) -> Result<Vec<f64>> {
    match method {
        PoissonMethod::Green => Ok(solve_green(grid, rho)),
        PoissonMethod::StaggeredFd => Ok(solve_staggered_fd(grid, rho)?.nodal),
    }
}

/// `E(x) = Σ_i E(x_i) S₁((x - x_i) / dx)`.
#[inline]
pub fn eval_e(grid: &PhaseGrid, nodal_e: &[f64], x: f64) -> f64 {
    let (p, alpha) = grid.locate_x(x);
    let q = if p + 1 == grid.x_nodes() { 0 } else { p + 1 };
    (1.0 - alpha) * nodal_e[p] + alpha * nodal_e[q]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(green_kernel(1.0, 0.25, 0.5), -0.5);
        assert_eq!(green_kernel(1.0, 0.75, 0.5), 0.5);
    }

    #[test]
    fn zero_charge_gives_zero_field() {
        let g = PhaseGrid::from_nodes(3.0, 1.0, 16, 4).unwrap();
        let rho = vec![0.0; 16];
        assert!(solve_green(&g, &rho).iter().all(|&e| e == 0.0));
        let s = solve_staggered_fd(&g, &rho).unwrap();
        assert!(s.half.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn deposition_on_nodes_of_neutral_plasma() {
        let g = PhaseGrid::from_nodes(1.0, 2.0, 8, 4).unwrap();
        // ∫ f dv = dv Σ_j f = 1 with f uniform over the five v nodes
        let w = PhaseArray::filled(&g, 1.0 / (g.dv() * g.v_nodes() as f64));
        let pos = PhaseArray::from_fn(&g, |x, _| x);
        let rho = deposit_charge(&g, &w, &pos, SplineKind::Linear).unwrap();
        assert!(rho.iter().all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn half_cell_particle_splits_evenly() {
        let g = PhaseGrid::from_nodes(1.0, 1.0, 8, 2).unwrap();
        let mut w = PhaseArray::zeros(&g);
        w.set(0, 1, 1.0);
        let p = 3;
        let pos = PhaseArray::filled(&g, g.x(p) + 0.5 * g.dx());
        let rho = deposit_charge(&g, &w, &pos, SplineKind::Linear).unwrap();
        assert!((rho[p] + 1.0 - g.dv() / 2.0).abs() < 1e-15);
        assert!((rho[p + 1] + 1.0 - g.dv() / 2.0).abs() < 1e-15);
        assert_eq!(rho[0], -1.0);
    }

    #[test]
    fn green_is_exactly_zero_mean_and_matches_cosine() {
        let g = PhaseGrid::from_nodes(4.0, 1.0, 64, 2).unwrap();
        let k = 2.0 * PI / g.length();
        let rho: Vec<f64> = g.xs().iter().map(|&x| (k * x).cos()).collect();
        let e = solve_green(&g, &rho);
        let exact: Vec<f64> = g.xs().iter().map(|&x| (k * x).sin() / k).collect();
        assert!(e.iter().sum::<f64>().abs() * g.dx() < 1e-12);
        assert!(max_abs_diff(&e, &exact) < 5e-3);
    }

    #[test]
    fn staggered_two_loads() {
        let g = PhaseGrid::from_nodes(1.0, 1.0, 10, 2).unwrap();
        let c = 0.8;
        let mut rho = vec![0.0; 10];
        rho[2] = c;
        rho[6] = -c;
        let s = solve_staggered_fd(&g, &rho).unwrap();
        // by hand: cumulative sum jumps +dx c at node 2, -dx c at node 6,
        // then the mean (4 of 10 half nodes at dx c) is removed
        let dx = g.dx();
        for k in 0..10 {
            let raw = if (2..6).contains(&k) { dx * c } else { 0.0 };
            let expected = raw - 0.4 * dx * c;
            assert!((s.half[k] - expected).abs() < 1e-15, "k={k}");
        }
        for k in 0..10 {
            let prev = s.half[(k + 9) % 10];
            assert!((s.half[k] - prev - dx * rho[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn staggered_rejects_non_neutral() {
        let g = PhaseGrid::from_nodes(1.0, 1.0, 10, 2).unwrap();
        let rho = vec![1e-3; 10];
        assert!(matches!(
            solve_staggered_fd(&g, &rho),
            Err(Error::Solvability { .. })
        ));
    }

    #[test]
    fn staggered_orthogonality() {
        let g = PhaseGrid::from_nodes(2.0, 1.0, 37, 2).unwrap();
        let mut rho: Vec<f64> = (0..37).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let m = rho.iter().sum::<f64>() / 37.0;
        rho.iter_mut().for_each(|r| *r -= m);
        let s = solve_staggered_fd(&g, &rho).unwrap();
        let n = s.nodal.len();
        let rho_back: Vec<f64> = (0..n)
            .map(|k| (s.half[k] - s.half[(k + n - 1) % n]) / g.dx())
            .collect();
        let dot: f64 = s.nodal.iter().zip(&rho_back).map(|(e, r)| e * r).sum();
        let scale: f64 = s.nodal.iter().zip(&rho_back).map(|(e, r)| (e * r).abs()).sum();
        assert!(dot.abs() <= 1e-12 * scale);
        assert!(s.nodal.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn solvers_agree_on_smooth_charge() {
        let g = PhaseGrid::from_nodes(5.0, 1.0, 128, 2).unwrap();
        let k = 2.0 * PI / g.length();
        let rho: Vec<f64> = g.xs().iter().map(|&x| (k * x).cos()).collect();
        let a = solve_green(&g, &rho);
        let b = solve_staggered_fd(&g, &rho).unwrap().nodal;
        assert!(max_abs_diff(&a, &b) < 2.0 * g.dx() * g.dx());
    }

    #[test]
    fn field_interpolation() {
        let g = PhaseGrid::from_nodes(1.0, 1.0, 8, 2).unwrap();
        let e: Vec<f64> = (0..8).map(|i| (i as f64).powi(2)).collect();
        assert_eq!(eval_e(&g, &e, g.x(3)), e[3]);
        assert!((eval_e(&g, &e, g.x(3) + 0.5 * g.dx()) - 0.5 * (e[3] + e[4])).abs() < 1e-14);
        assert!((eval_e(&g, &e, g.x(7) + 0.5 * g.dx()) - 0.5 * (e[7] + e[0])).abs() < 1e-14);
        let c = vec![2.5; 8];
        assert!((eval_e(&g, &c, 0.123) - 2.5).abs() < 1e-15);
    }
}
