//! Conserved quantities, discrete norms and energies, all evaluated with
//! nodal values and rectangle quadrature.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{PhaseArray, PhaseGrid};

pub const CSV_HEADER: &str =
    "t,mass,momentum,l2_norm,kinetic_energy,electric_energy,total_energy,mass_lost";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub l2_norm: f64,
    pub kinetic_energy: f64,
    pub electric_energy: f64,
    pub total_energy: f64,
    /// Cumulative weight (in mass units) deposited outside the velocity domain.
    pub mass_lost: f64,
}

impl DiagnosticsRecord {
    pub fn measure(
        grid: &PhaseGrid,
        t: f64,
        coeffs: &PhaseArray,
        values: &PhaseArray,
        e: &[f64],
        mass_lost: f64,
    ) -> Self {
        let (kinetic_energy, electric_energy) = energies(grid, values, e);
        Self {
            t,
            mass: mass(grid, coeffs),
            momentum: momentum(grid, values),
            l2_norm: l2_norm(grid, values),
            kinetic_energy,
            electric_energy,
            total_energy: kinetic_energy + electric_energy,
            mass_lost,
        }
    }

    fn fields(&self) -> [f64; 8] {
        [
            self.t,
            self.mass,
            self.momentum,
            self.l2_norm,
            self.kinetic_energy,
            self.electric_energy,
            self.total_energy,
            self.mass_lost,
        ]
    }
}

/// `dx dv Σ ω`.
pub fn mass(grid: &PhaseGrid, coeffs: &PhaseArray) -> f64 {
    grid.dx() * grid.dv() * coeffs.sum()
}

/// `dx dv Σ v_j f_{i,j}`.
pub fn momentum(grid: &PhaseGrid, values: &PhaseArray) -> f64 {
    let s: f64 = (0..grid.v_nodes())
        .map(|j| grid.v(j) * values.row(j).iter().sum::<f64>())
        .sum();
    grid.dx() * grid.dv() * s
}

/// `(dx dv Σ ½ v_j² f_{i,j}, dx Σ ½ E_i²)`.
pub fn energies(grid: &PhaseGrid, values: &PhaseArray, e: &[f64]) -> (f64, f64) {
    let kin: f64 = (0..grid.v_nodes())
        .map(|j| {
            let v = grid.v(j);
            0.5 * v * v * values.row(j).iter().sum::<f64>()
        })
        .sum();
    let ele: f64 = e.iter().map(|x| 0.5 * x * x).sum();
    (grid.dx() * grid.dv() * kin, grid.dx() * ele)
}

pub fn l1_norm(grid: &PhaseGrid, f: &PhaseArray) -> f64 {
    grid.dx() * grid.dv() * f.iter().map(|x| x.abs()).sum::<f64>()
}

pub fn l2_norm(grid: &PhaseGrid, f: &PhaseArray) -> f64 {
    (grid.dx() * grid.dv() * f.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// `dx dv Σ |a - b|`.
pub fn l1_error(grid: &PhaseGrid, a: &PhaseArray, b: &PhaseArray) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            expected: a.shape(),
            found: b.shape(),
        });
    }
    a.check_shape(grid)?;
    let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
    Ok(grid.dx() * grid.dv() * s)
}

pub fn write_csv<W: Write>(mut out: W, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let row: Vec<String> = r.fields().iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Config("empty diagnostics file".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::Config(format!("unexpected diagnostics header: {header}")));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("row {}: {e}", n + 2)))?;
        if vals.len() != 8 {
            return Err(Error::Config(format!("row {}: expected 8 columns", n + 2)));
        }
        out.push(DiagnosticsRecord {
            t: vals[0],
            mass: vals[1],
            momentum: vals[2],
            l2_norm: vals[3],
            kinetic_energy: vals[4],
            electric_energy: vals[5],
            total_energy: vals[6],
            mass_lost: vals[7],
        });
    }
    Ok(out)
}
