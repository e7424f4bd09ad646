//! Centered B-spline kernels of degree 1 and 3, the tensor-product
//! coefficient solve, and evaluation of the spline representation.
//!
//! Kernels are expressed in normalized units: the physical kernel is
//! `S(x / spacing)`, so `S` integrates to 1 and the physical one to the
//! spacing. Coefficients are extended periodically in `x` and by zero
//! outside `0..=nv` in `v`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseArray, PhaseGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplineKind {
    Linear,
    Cubic,
}

/// Weights of the nodes touched by a point at `node_p + alpha * spacing`.
/// Node `p + offset + n` receives `weights[n]` for `n < len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub offset: isize,
    pub len: usize,
    pub weights: [f64; 4],
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.weights[..self.len]
            .iter()
            .enumerate()
            .map(move |(n, &w)| (self.offset + n as isize, w))
    }
}

impl SplineKind {
    pub fn degree(self) -> usize {
        match self {
            SplineKind::Linear => 1,
            SplineKind::Cubic => 3,
        }
    }

    /// Half-width of the kernel support in cells.
    pub fn support(self) -> f64 {
        match self {
            SplineKind::Linear => 1.0,
            SplineKind::Cubic => 2.0,
        }
    }

    pub fn kernel(self, u: f64) -> f64 {
        let a = u.abs();
        match self {
            SplineKind::Linear => {
                if a < 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            SplineKind::Cubic => {
                if a < 1.0 {
                    2.0 / 3.0 - a * a + 0.5 * a * a * a
                } else if a < 2.0 {
                    let b = 2.0 - a;
                    b * b * b / 6.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ u² S(u) du` in normalized units. Linear: 1/6. Cubic: 1/3 (the
    /// variance of four convolved unit boxes).
    pub fn second_moment(self) -> f64 {
        match self {
            SplineKind::Linear => 1.0 / 6.0,
            SplineKind::Cubic => 1.0 / 3.0,
        }
    }

    /// Kernel values at integer offsets `-r..=r`, the interpolation matrix row.
    pub fn node_weights(self) -> &'static [f64] {
        match self {
            SplineKind::Linear => &[1.0],
            SplineKind::Cubic => &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        }
    }

    #[inline]
    pub fn stencil(self, alpha: f64) -> Stencil {
        match self {
            SplineKind::Linear => Stencil {
                offset: 0,
                len: 2,
                weights: [1.0 - alpha, alpha, 0.0, 0.0],
            },
            SplineKind::Cubic => {
                let b = 1.0 - alpha;
                let a2 = alpha * alpha;
                let b2 = b * b;
                Stencil {
                    offset: -1,
                    len: 4,
                    weights: [
                        b2 * b / 6.0,
                        2.0 / 3.0 - a2 + 0.5 * a2 * alpha,
                        2.0 / 3.0 - b2 + 0.5 * b2 * b,
                        a2 * alpha / 6.0,
                    ],
                }
            }
        }
    }
}

/// Spline coefficients `ω_{i,j}` on the phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    kind: SplineKind,
    omega: PhaseArray,
}

impl CoefficientField {
    pub fn new(kind: SplineKind, omega: PhaseArray) -> Self {
        Self { kind, omega }
    }

    pub fn kind(&self) -> SplineKind {
        self.kind
    }

    pub fn omega(&self) -> &PhaseArray {
        &self.omega
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.omega.get(i, j)
    }

    pub fn into_array(self) -> PhaseArray {
        self.omega
    }
}

/// Solves the interpolation conditions
/// `Σ_{k,l} ω_{k,l} S(x_i - x_k) S(v_j - v_l) = values_{i,j}`.
pub fn solve_coefficients(
    grid: &PhaseGrid,
    values: &PhaseArray,
    kind: SplineKind,
) -> Result<CoefficientField> {
    values.check_shape(grid)?;
    let omega = match kind {
        SplineKind::Linear => values.clone(),
        SplineKind::Cubic => {
            let (nxn, nvn) = grid.shape();
            let mut data = values.as_slice().to_vec();
            let (lo, diag, hi) = (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0);
            data.par_chunks_mut(nxn)
                .for_each(|row| solve_cyclic_tridiagonal(lo, diag, hi, row));
            let columns: Vec<Vec<f64>> = (0..nxn)
                .into_par_iter()
                .map(|i| {
                    let mut col: Vec<f64> = (0..nvn).map(|j| data[j * nxn + i]).collect();
                    solve_tridiagonal(lo, diag, hi, &mut col);
                    col
                })
                .collect();
            for (i, col) in columns.iter().enumerate() {
                for (j, &c) in col.iter().enumerate() {
                    data[j * nxn + i] = c;
                }
            }
            if data.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config("spline coefficient solve produced non-finite values".into()));
            }
            PhaseArray::from_vec(grid, data)?
        }
    };
    Ok(CoefficientField::new(kind, omega))
}

/// Constant-coefficient tridiagonal solve (Thomas), in place.
fn solve_tridiagonal(lo: f64, diag: f64, hi: f64, rhs: &mut [f64]) {
    let n = rhs.len();
    if n == 0 {
        return;
    }
    let mut c = vec![0.0; n];
    let mut beta = diag;
    rhs[0] /= beta;
    for j in 1..n {
        c[j] = hi / beta;
        beta = diag - lo * c[j];
        rhs[j] = (rhs[j] - lo * rhs[j - 1]) / beta;
    }
    for j in (0..n - 1).rev() {
        rhs[j] -= c[j + 1] * rhs[j + 1];
    }
}

/// Periodic (cyclic) tridiagonal solve by Sherman-Morrison, in place.
/// Requires `rhs.len() >= 3`.
fn solve_cyclic_tridiagonal(lo: f64, diag: f64, hi: f64, rhs: &mut [f64]) {
    let n = rhs.len();
    debug_assert!(n >= 3);
    // corners: A[0][n-1] = lo, A[n-1][0] = hi
    let gamma = -diag;
    let mut b = vec![diag; n];
    b[0] = diag - gamma;
    b[n - 1] = diag - hi * lo / gamma;

    let thomas = |b: &[f64], r: &mut [f64]| {
        let mut c = vec![0.0; n];
        let mut beta = b[0];
        r[0] /= beta;
        for j in 1..n {
            c[j] = hi / beta;
            beta = b[j] - lo * c[j];
            r[j] = (r[j] - lo * r[j - 1]) / beta;
        }
        for j in (0..n - 1).rev() {
            r[j] -= c[j + 1] * r[j + 1];
        }
    };

    thomas(&b, rhs);
    let mut z = vec![0.0; n];
    z[0] = gamma;
    z[n - 1] = hi;
    thomas(&b, &mut z);
    let fact = (rhs[0] + lo * rhs[n - 1] / gamma) / (1.0 + z[0] + lo * z[n - 1] / gamma);
    for (r, zk) in rhs.iter_mut().zip(&z) {
        *r -= fact * zk;
    }
}

/// Evaluates `Σ ω_{k,l} S((x - x_k)/dx) S((v - v_l)/dv)`. Zero outside the
/// velocity domain.
pub fn interpolate(grid: &PhaseGrid, coeffs: &CoefficientField, x: f64, v: f64) -> f64 {
    let Some((q, beta)) = grid.locate_v(v) else {
        return 0.0;
    };
    let (p, alpha) = grid.locate_x(x);
    let kind = coeffs.kind();
    let sx = kind.stencil(alpha);
    let sv = kind.stencil(beta);
    let mut acc = 0.0;
    for (dl, wv) in sv.iter() {
        let l = q as isize + dl;
        if l < 0 || l > grid.nv() as isize {
            continue;
        }
        for (dk, wx) in sx.iter() {
            let k = grid.wrap_index(p as isize + dk);
            acc += coeffs.get(k, l as usize) * wx * wv;
        }
    }
    acc
}

/// Values of the spline representation at the grid nodes.
pub fn reconstruct_nodal(grid: &PhaseGrid, coeffs: &CoefficientField) -> PhaseArray {
    let w = coeffs.kind().node_weights();
    let r = (w.len() / 2) as isize;
    let (nxn, nvn) = grid.shape();
    let mut out = PhaseArray::zeros(grid);
    for j in 0..nvn {
        for i in 0..nxn {
            let mut acc = 0.0;
            for (b, &wv) in w.iter().enumerate() {
                let l = j as isize + b as isize - r;
                if l < 0 || l >= nvn as isize {
                    continue;
                }
                for (a, &wx) in w.iter().enumerate() {
                    let k = grid.wrap_index(i as isize + a as isize - r);
                    acc += coeffs.get(k, l as usize) * wx * wv;
                }
            }
            out.set(i, j, acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Cox-de Boor recursion on uniform integer knots starting at `t0`.
    fn cox_de_boor(t0: f64, degree: usize, u: f64) -> f64 {
        if degree == 0 {
            return if u >= t0 && u < t0 + 1.0 { 1.0 } else { 0.0 };
        }
        let d = degree as f64;
        (u - t0) / d * cox_de_boor(t0, degree - 1, u)
            + (t0 + d + 1.0 - u) / d * cox_de_boor(t0 + 1.0, degree - 1, u)
    }

    #[test]
    fn kernel_values() {
        assert_eq!(SplineKind::Linear.kernel(0.0), 1.0);
        assert_eq!(SplineKind::Linear.kernel(1.2), 0.0);
        assert_eq!(SplineKind::Linear.kernel(-0.5), 0.5);
        // set from the recursion: 2/3 and 1/6
        let c0 = cox_de_boor(-2.0, 3, 0.0);
        let c1 = cox_de_boor(-2.0, 3, 1.0);
        assert!((c0 - 2.0 / 3.0).abs() < 1e-15);
        assert!((c1 - 1.0 / 6.0).abs() < 1e-15);
        assert!((SplineKind::Cubic.kernel(0.0) - c0).abs() < 1e-15);
        assert!((SplineKind::Cubic.kernel(1.0) - c1).abs() < 1e-15);
        assert_eq!(SplineKind::Cubic.kernel(2.0), 0.0);
    }

    #[test]
    fn cubic_kernel_matches_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u: f64 = rng.gen_range(-2.5..2.5);
            let r = cox_de_boor(-2.0, 3, u);
            assert!((SplineKind::Cubic.kernel(u) - r).abs() < 1e-14, "u={u}");
            let r1 = cox_de_boor(-1.0, 1, u);
            assert!((SplineKind::Linear.kernel(u) - r1).abs() < 1e-14, "u={u}");
        }
    }

    #[test]
    fn stencil_matches_kernel() {
        for kind in [SplineKind::Linear, SplineKind::Cubic] {
            for &alpha in &[0.0, 0.1, 0.5, 0.77, 0.999] {
                let st = kind.stencil(alpha);
                for (off, w) in st.iter() {
                    let expected = kind.kernel(alpha - off as f64);
                    assert!((w - expected).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [SplineKind::Linear, SplineKind::Cubic] {
            for _ in 0..1000 {
                let u: f64 = rng.gen_range(-50.0..50.0);
                let base = u.floor() as i64;
                let s: f64 = (base - 3..=base + 3).map(|i| kind.kernel(u - i as f64)).sum();
                assert!((s - 1.0).abs() < 1e-14, "{kind:?} u={u} sum={s}");
            }
        }
    }

    #[test]
    fn first_moment_reproduction_linear() {
        let g = PhaseGrid::new(1.0, 3.0, 4, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let v: f64 = rng.gen_range(-2.9..2.9);
            let s: f64 = (0..g.v_nodes())
                .map(|l| g.v(l) * SplineKind::Linear.kernel((g.v(l) - v) / g.dv()))
                .sum();
            assert!((s - v).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_coefficients_are_values() {
        let g = PhaseGrid::new(1.0, 1.0, 7, 6).unwrap();
        let vals = PhaseArray::from_fn(&g, |x, v| x * x + 3.0 * v);
        let c = solve_coefficients(&g, &vals, SplineKind::Linear).unwrap();
        assert_eq!(c.omega(), &vals);
    }

    #[test]
    fn cubic_reproduces_constants_in_interior() {
        let g = PhaseGrid::new(1.0, 1.0, 15, 40).unwrap();
        let vals = PhaseArray::filled(&g, 1.0);
        let c = solve_coefficients(&g, &vals, SplineKind::Cubic).unwrap();
        // zero closure in v decays away from the boundary rows
        for j in 15..=25 {
            for i in 0..g.x_nodes() {
                assert!((c.get(i, j) - 1.0).abs() < 1e-6, "j={j} {}", c.get(i, j));
            }
        }
    }

    #[test]
    fn cubic_interpolation_conditions_hold() {
        let g = PhaseGrid::new(2.0, 4.0, 31, 33).unwrap();
        let vals = PhaseArray::from_fn(&g, |x, v| {
            (2.0 * PI * x / 2.0).sin() * (-v * v).exp() + 0.1 * (-(v - 1.0).powi(2)).exp()
        });
        let c = solve_coefficients(&g, &vals, SplineKind::Cubic).unwrap();
        let back = reconstruct_nodal(&g, &c);
        let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in back.iter().zip(vals.iter()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        for i in 0..g.x_nodes() {
            for j in 0..g.v_nodes() {
                let f = interpolate(&g, &c, g.x(i), g.v(j));
                assert!((f - vals.get(i, j)).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn cubic_single_row_sine() {
        // single non-zero v row
        let g = PhaseGrid::new(1.0, 1.0, 24, 4).unwrap();
        let vals = PhaseArray::from_fn(&g, |x, v| {
            if v.abs() < 1e-12 {
                (2.0 * PI * x).sin()
            } else {
                0.0
            }
        });
        let c = solve_coefficients(&g, &vals, SplineKind::Cubic).unwrap();
        let back = reconstruct_nodal(&g, &c);
        for (a, b) in back.iter().zip(vals.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_integral() {
        for kind in [SplineKind::Linear, SplineKind::Cubic] {
            for spacing in [1.0, 0.25, 0.013] {
                // composite Simpson on each polynomial piece
                let r = kind.support();
                let pieces = (2.0 * r) as usize;
                let mut total = 0.0;
                for p in 0..pieces {
                    let a = -r + p as f64;
                    let n = 64;
                    let hstep = 1.0 / n as f64;
                    let mut acc = kind.kernel(a) + kind.kernel(a + 1.0);
                    for m in 1..n {
                        let w = if m % 2 == 1 { 4.0 } else { 2.0 };
                        acc += w * kind.kernel(a + m as f64 * hstep);
                    }
                    total += acc * hstep / 3.0;
                }
                let physical = total * spacing;
                assert!((physical - spacing).abs() < 1e-12 * spacing.max(1.0));
            }
        }
    }

    #[test]
    fn second_moments() {
        for kind in [SplineKind::Linear, SplineKind::Cubic] {
            let n = 200_000;
            let r = kind.support();
            let hstep = 2.0 * r / n as f64;
            let m: f64 = (0..n)
                .map(|k| {
                    let u = -r + (k as f64 + 0.5) * hstep;
                    u * u * kind.kernel(u) * hstep
                })
                .sum();
            assert!((m - kind.second_moment()).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_interpolation_examples() {
        let g = PhaseGrid::new(1.0, 2.0, 9, 8).unwrap();
        let c = solve_coefficients(&g, &PhaseArray::filled(&g, 0.7), SplineKind::Linear).unwrap();
        assert!((interpolate(&g, &c, 0.33, 0.41) - 0.7).abs() < 1e-15);

        let f = PhaseArray::from_fn(&g, |x, v| x + v * v);
        let c = solve_coefficients(&g, &f, SplineKind::Linear).unwrap();
        assert!((interpolate(&g, &c, g.x(3), g.v(5)) - f.get(3, 5)).abs() < 1e-15);

        let fv = PhaseArray::from_fn(&g, |_, v| v);
        let c = solve_coefficients(&g, &fv, SplineKind::Linear).unwrap();
        for &v in &[-1.93, -0.2, 0.0, 0.61, 1.99] {
            assert!((interpolate(&g, &c, 0.47, v) - v).abs() < 1e-14);
        }
        assert_eq!(interpolate(&g, &c, 0.47, 2.5), 0.0);
    }

    #[test]
    fn linear_positivity() {
        let g = PhaseGrid::new(1.0, 1.0, 11, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let vals = PhaseArray::from_fn(&g, |_, _| rng.gen_range(0.0..1.0));
            let c = solve_coefficients(&g, &vals, SplineKind::Linear).unwrap();
            assert!(c.omega().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g = PhaseGrid::new(1.0, 1.0, 7, 6).unwrap();
        let h = PhaseGrid::new(1.0, 1.0, 8, 6).unwrap();
        let vals = PhaseArray::zeros(&h);
        assert!(solve_coefficients(&g, &vals, SplineKind::Cubic).is_err());
    }
}
