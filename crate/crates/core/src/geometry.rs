//! Cell-grid geometry, binary configuration arrays, the sensing mask,
//! interleaving of sensing patterns into a steering configuration, and
//! vector/matrix reshaping.
//!
//! Public APIs use 0-based `(row, col)` indices. The mask rule "both indices
//! even" is stated in 1-based terms, which makes the mask cells the 0-based
//! positions `(2a + 1, 2b + 1)`.

use std::fmt::Write as _;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};

/// Square lattice of `n x n` cells in the `z = 0` plane, centred on the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    n: usize,
    pitch: f64,
}

impl CellGrid {
    pub fn new(n: usize, pitch: f64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(invalid(format!("grid side must be an even integer >= 2, got {n}")));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(invalid(format!("cell pitch must be positive, got {pitch}")));
        }
        Ok(Self { n, pitch })
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Side of the sensing grid, `n / 2`.
    pub fn m(&self) -> usize {
        self.n / 2
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn side_length(&self) -> f64 {
        self.n as f64 * self.pitch
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    /// Centre of cell `(row, col)`: rows run towards `-y`, columns towards `+x`.
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 3] {
        let mid = (self.n as f64 - 1.0) / 2.0;
        [
            (col as f64 - mid) * self.pitch,
            (mid - row as f64) * self.pitch,
            0.0,
        ]
    }

    /// Cell centres in row-major order.
    pub fn centers(&self) -> Vec<[f64; 3]> {
        (0..self.n)
            .flat_map(|r| (0..self.n).map(move |c| (r, c)))
            .map(|(r, c)| self.cell_center(r, c))
            .collect()
    }
}

/// Square array of bits stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitGrid {
    side: usize,
    bits: Vec<bool>,
}

impl BitGrid {
    pub fn new(side: usize, bits: Vec<bool>) -> Result<Self> {
        if side == 0 {
            return Err(invalid("bit grid side must be positive"));
        }
        if bits.len() != side * side {
            return Err(mismatch(format!(
                "bit grid of side {side} needs {} bits, got {}",
                side * side,
                bits.len()
            )));
        }
        Ok(Self { side, bits })
    }

    pub fn filled(side: usize, value: bool) -> Self {
        Self { side, bits: vec![value; side * side] }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let bits = (0..side * side).map(|k| f(k / side, k % side)).collect();
        Self { side, bits }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.side + col]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Copy rotated by 90 degrees (clockwise in row/col terms).
    pub fn rotated(&self) -> Self {
        let s = self.side;
        Self::from_fn(s, |r, c| self.get(s - 1 - c, r))
    }

    /// Copy with every bit flipped.
    pub fn complemented(&self) -> Self {
        Self { side: self.side, bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// `side` lines of comma-separated `0`/`1` digits, each newline-terminated.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.side * (2 * self.side + 1));
        for row in self.bits.chunks(self.side) {
            for (k, &b) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push(if b { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut bits = Vec::new();
        let mut side = None;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut count = 0;
            for cell in line.split(',') {
                bits.push(match cell.trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(crate::Error::Parse(format!(
                            "line {}: expected 0 or 1, found {other:?}",
                            line_no + 1
                        )))
                    }
                });
                count += 1;
            }
            match side {
                None => side = Some(count),
                Some(s) if s != count => {
                    return Err(crate::Error::Parse(format!(
                        "line {}: expected {s} columns, found {count}",
                        line_no + 1
                    )))
                }
                _ => {}
            }
        }
        let side = side.ok_or_else(|| crate::Error::Parse("empty configuration".into()))?;
        Self::new(side, bits)
    }
}

macro_rules! bit_grid_newtype {
    ($name:ident) => {
        impl Deref for $name {
            type Target = BitGrid;
            fn deref(&self) -> &BitGrid {
                &self.0
            }
        }

        impl From<$name> for BitGrid {
            fn from(v: $name) -> BitGrid {
                v.0
            }
        }
    };
}

/// Full `n x n` actuation state of the surface.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HsfConfiguration(BitGrid);
bit_grid_newtype!(HsfConfiguration);

impl HsfConfiguration {
    pub fn new(grid: BitGrid) -> Self {
        Self(grid)
    }

    pub fn zeros(n: usize) -> Self {
        Self(BitGrid::filled(n, false))
    }

    pub fn ones(n: usize) -> Self {
        Self(BitGrid::filled(n, true))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        BitGrid::from_csv(text).map(Self)
    }
}

/// `m x m` sensing pattern, `m = n / 2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SensingConfiguration(BitGrid);
bit_grid_newtype!(SensingConfiguration);

impl SensingConfiguration {
    pub fn new(grid: BitGrid) -> Self {
        Self(grid)
    }

    /// Sensing pattern from a row-major 0/1 vector of length `m * m`.
    pub fn from_row(row: &[u8], m: usize) -> Result<Self> {
        if row.len() != m * m {
            return Err(mismatch(format!(
                "binary row of length {} cannot form a {m}x{m} pattern",
                row.len()
            )));
        }
        BitGrid::new(m, row.iter().map(|&b| b != 0).collect()).map(Self)
    }
}

/// Mask cells of an `n`-sided surface, 0-based and row-major.
fn mask_positions(n: usize) -> impl Iterator<Item = (usize, usize)> {
    let m = n / 2;
    (0..m * m).map(move |k| (2 * (k / m) + 1, 2 * (k % m) + 1))
}

/// Cells reserved for sensing: bit `(i, j)` is set iff `i` and `j` are both
/// even in 1-based counting.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask(BitGrid);
bit_grid_newtype!(Mask);

impl Mask {
    /// Sensing positions in row-major order (0-based `(row, col)`).
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        mask_positions(self.side())
    }

    /// The mask deployed as a surface configuration.
    pub fn as_configuration(&self) -> HsfConfiguration {
        HsfConfiguration(self.0.clone())
    }
}

pub fn make_mask(grid: &CellGrid) -> Mask {
    mask_for_side(grid.n()).expect("CellGrid guarantees an even side")
}

pub fn mask_for_side(n: usize) -> Result<Mask> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(invalid(format!("mask side must be an even integer >= 2, got {n}")));
    }
    Ok(Mask(BitGrid::from_fn(n, |r, c| r % 2 == 1 && c % 2 == 1)))
}

/// Writes `c_s` into the mask cells of `c_f`. Mask positions are visited
/// row-major and receive the elements of `c_s` in row-major order.
pub fn interleave(c_f: &HsfConfiguration, c_s: &SensingConfiguration) -> Result<HsfConfiguration> {
    let n = c_f.side();
    if !n.is_multiple_of(2) || c_s.side() * 2 != n {
        return Err(mismatch(format!(
            "sensing side {} must be half of configuration side {n}",
            c_s.side()
        )));
    }
    let mut bits = c_f.bits().to_vec();
    for ((r, c), &b) in mask_positions(n).zip(c_s.bits()) {
        bits[r * n + c] = b;
    }
    Ok(HsfConfiguration(BitGrid { side: n, bits }))
}

/// Reads the mask cells of a full configuration back into a sensing pattern.
pub fn extract(config: &HsfConfiguration) -> Result<SensingConfiguration> {
    let mask = mask_for_side(config.side())?;
    let bits = mask.positions().map(|(r, c)| config.get(r, c)).collect();
    BitGrid::new(config.side() / 2, bits).map(SensingConfiguration)
}

/// Square array of reals stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealGrid {
    side: usize,
    values: Vec<f64>,
}

impl RealGrid {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.side)
    }

    /// Row-major flattening, the inverse of [`reshape`].
    pub fn flatten(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `side` lines of comma-separated decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Splits `v` into `m` consecutive chunks of length `m` and stacks them as rows.
pub fn reshape(v: &[f64], m: usize) -> Result<RealGrid> {
    if m == 0 || v.len() != m * m {
        return Err(mismatch(format!("vector of length {} cannot form a {m}x{m} array", v.len())));
    }
    Ok(RealGrid { side: m, values: v.to_vec() })
}

/// Direction (and optional range) in spherical coordinates about the surface
/// origin. `phi` is the polar angle from the `+z` normal, `theta` the azimuth
/// from `+x` in the surface plane; both in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    pub phi: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "r")]
    pub radius: Option<f64>,
}

impl SphericalDirection {
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        if !(phi.is_finite() && (0.0..=90.0).contains(&phi)) {
            return Err(invalid(format!("phi must lie in [0, 90] degrees, got {phi}")));
        }
        if !theta.is_finite() {
            return Err(invalid(format!("theta must be finite, got {theta}")));
        }
        Ok(Self { phi, theta, radius: None })
    }

    pub fn at(phi: f64, theta: f64, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { radius: Some(radius), ..Self::new(phi, theta)? })
    }

    pub fn validate(&self) -> Result<()> {
        match self.radius {
            Some(r) => Self::at(self.phi, self.theta, r).map(|_| ()),
            None => Self::new(self.phi, self.theta).map(|_| ()),
        }
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (sp, cp) = self.phi.to_radians().sin_cos();
        let (st, ct) = self.theta.to_radians().sin_cos();
        [sp * ct, sp * st, cp]
    }

    /// Cartesian point, if a range is attached.
    pub fn position(&self) -> Option<[f64; 3]> {
        let r = self.radius?;
        let u = self.unit_vector();
        Some([r * u[0], r * u[1], r * u[2]])
    }
}
