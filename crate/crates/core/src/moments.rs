//! Velocity moments of the spline representation at the x nodes, and the
//! centered differences used by the Cauchy-Kovalevsky closure.

use crate::grid::PhaseGrid;
use crate::splines::CoefficientField;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `∫ f dv - 1`.
    pub rho: Vec<f64>,
    /// `∫ f v dv`.
    pub j: Vec<f64>,
    /// `(1/L) ∫ J dx`.
    pub j_bar: f64,
    /// `∫ f v² dv`.
    pub i2: Vec<f64>,
    pub drho_dx: Vec<f64>,
    pub dj_dx: Vec<f64>,
    pub di2_dx: Vec<f64>,
}

/// Moments of `f_h = Σ ω_{k,l} S(x - x_k) S(v - v_l)` at `x_i`. Integrating
/// the v kernel exactly gives `dv`, `dv v_l` and `dv v_l² + dv³ m₂` with
/// `m₂ = ∫ u² S(u) du`.
pub fn compute_moments(grid: &PhaseGrid, coeffs: &CoefficientField) -> MomentSet {
    let kind = coeffs.kind();
    let (nxn, nvn) = grid.shape();
    let dv = grid.dv();
    let alpha = dv * dv * dv * kind.second_moment();

    let mut c0 = vec![0.0; nxn];
    let mut c1 = vec![0.0; nxn];
    let mut c2 = vec![0.0; nxn];
    for l in 0..nvn {
        let v = grid.v(l);
        let row = coeffs.omega().row(l);
        for (k, &w) in row.iter().enumerate() {
            c0[k] += w;
            c1[k] += w * v;
            c2[k] += w * v * v;
        }
    }
    let total1: f64 = c1.iter().sum();

    let weights = kind.node_weights();
    let r = (weights.len() / 2) as isize;
    let smooth = |c: &[f64]| -> Vec<f64> {
        (0..nxn)
            .map(|i| {
                weights
                    .iter()
                    .enumerate()
                    .map(|(a, &s)| s * c[grid.wrap_index(i as isize + a as isize - r)])
                    .sum()
            })
            .collect()
    };
    let s0 = smooth(&c0);
    let s1 = smooth(&c1);
    let s2 = smooth(&c2);

    let rho: Vec<f64> = s0.iter().map(|&a| dv * a - 1.0).collect();
    let j: Vec<f64> = s1.iter().map(|&b| dv * b).collect();
    let i2: Vec<f64> = s0
        .iter()
        .zip(&s2)
        .map(|(&a, &c)| dv * c + alpha * a)
        .collect();
    let j_bar = grid.dx() * dv / grid.length() * total1;

    MomentSet {
        drho_dx: centered_dx(grid, &rho),
        dj_dx: centered_dx(grid, &j),
        di2_dx: centered_dx(grid, &i2),
        rho,
        j,
        j_bar,
        i2,
    }
}

/// `(g_{i+1} - g_{i-1}) / (2 dx)` with periodic indices.
pub fn centered_dx(grid: &PhaseGrid, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    assert_eq!(n, grid.x_nodes(), "nodal field length");
    let inv = 0.5 / grid.dx();
    (0..n)
        .map(|i| (g[(i + 1) % n] - g[(i + n - 1) % n]) * inv)
        .collect()
}
