//! Physical layer: spherical incident wave, binary-phase reflection and
//! far-field superposition toward a direction.
//!
//! Each cell reflects with coefficient `+1` (bit 1) or `-1` (bit 0). The
//! field toward unit direction `u` is the coherent array-factor sum
//! `sum Γ_ij · E_inc(i,j) · exp(j·k·(p_ij · u))` with isotropic elements.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::geometry::{make_mask, CellGrid, HsfConfiguration, RealGrid, SphericalDirection};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Point source, detector and carrier frequency for one surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceScene {
    pub grid: CellGrid,
    pub source: SphericalDirection,
    pub detector: SphericalDirection,
    /// Hz.
    pub frequency: f64,
}

impl SourceScene {
    pub fn new(
        grid: CellGrid,
        source: SphericalDirection,
        detector: SphericalDirection,
        frequency: f64,
    ) -> Result<Self> {
        let scene = Self { grid, source, detector, frequency };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.detector.validate()?;
        if self.source.radius.is_none() {
            return Err(invalid("source position needs a range r > 0"));
        }
        if self.detector.radius.is_none() {
            return Err(invalid("detector position needs a range r > 0"));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(invalid(format!("frequency must be positive, got {}", self.frequency)));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }

    /// Same scene with the source moved.
    pub fn with_source(&self, source: SphericalDirection) -> Result<Self> {
        Self::new(self.grid, source, self.detector, self.frequency)
    }

    fn source_distances(&self) -> Vec<f64> {
        let s = self.source.position().expect("validated scene has a source range");
        self.grid.centers().iter().map(|p| distance(&s, p)).collect()
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Complex field sample per cell, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFieldMap {
    side: usize,
    values: Vec<Complex64>,
}

impl ComplexFieldMap {
    pub fn new(side: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != side * side {
            return Err(mismatch(format!("field map of side {side} needs {} values", side * side)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field map entries must be finite"));
        }
        Ok(Self { side, values })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.side + col]
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self { side: self.side, values: self.values.iter().map(|v| v * alpha).collect() }
    }
}

/// Unit-amplitude isotropic spherical wave `exp(-j·k·d) / d` at `point`.
pub fn incident_at(scene: &SourceScene, point: &[f64; 3]) -> Complex64 {
    let s = scene.source.position().expect("validated scene has a source range");
    let d = distance(&s, point);
    Complex64::from_polar(1.0 / d, -scene.wavenumber() * d)
}

/// [`incident_at`] evaluated at every cell centre.
pub fn incident_field(scene: &SourceScene) -> ComplexFieldMap {
    let values = scene.grid.centers().iter().map(|p| incident_at(scene, p)).collect();
    ComplexFieldMap { side: scene.grid.n(), values }
}

/// Wraps an angle into `[-π, π)`.
fn wrap_phase(psi: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    psi - TAU * ((psi + PI) / TAU).floor()
}

/// 1-bit steering configuration that turns the source's spherical wave into
/// a plane wave toward `target`.
///
/// The ideal compensation phase `k·(d_ij - p_ij·u)` is quantized to bit 1
/// when it wraps into `[-π/2, π/2)` and bit 0 otherwise.
pub fn synthesize_steering_config(scene: &SourceScene, target: &SphericalDirection) -> HsfConfiguration {
    use std::f64::consts::FRAC_PI_2;
    let k = scene.wavenumber();
    let u = target.unit_vector();
    let n = scene.grid.n();
    let distances = scene.source_distances();
    let centers = scene.grid.centers();
    let bits = distances
        .iter()
        .zip(&centers)
        .map(|(d, p)| {
            let w = wrap_phase(k * (d - dot(p, &u)));
            (-FRAC_PI_2..FRAC_PI_2).contains(&w)
        })
        .collect();
    HsfConfiguration::new(crate::geometry::BitGrid::new(n, bits).expect("n*n bits"))
}

/// Per-cell contributions toward `dir` before applying the reflection sign:
/// `E_inc(i,j) · exp(j·k·(p_ij · u))`.
pub fn radiating_terms(
    incident: &ComplexFieldMap,
    dir: &SphericalDirection,
    grid: &CellGrid,
    wavelength: f64,
) -> Result<Vec<Complex64>> {
    if incident.side() != grid.n() {
        return Err(mismatch(format!(
            "incident field side {} does not match grid side {}",
            incident.side(),
            grid.n()
        )));
    }
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let u = dir.unit_vector();
    Ok(incident
        .values()
        .iter()
        .zip(grid.centers())
        .map(|(e, p)| e * Complex64::cis(k * dot(&p, &u)))
        .collect())
}

/// Coherent sum of `terms` with sign `+1` for set bits and `-1` otherwise.
pub fn signed_sum(config: &HsfConfiguration, terms: &[Complex64]) -> Complex64 {
    config
        .bits()
        .iter()
        .zip(terms)
        .fold(Complex64::new(0.0, 0.0), |acc, (&b, &t)| if b { acc + t } else { acc - t })
}

pub fn far_field(
    config: &HsfConfiguration,
    incident: &ComplexFieldMap,
    dir: &SphericalDirection,
    grid: &CellGrid,
    wavelength: f64,
) -> Result<Complex64> {
    if config.side() != grid.n() {
        return Err(mismatch(format!(
            "configuration side {} does not match grid side {}",
            config.side(),
            grid.n()
        )));
    }
    Ok(signed_sum(config, &radiating_terms(incident, dir, grid, wavelength)?))
}

/// Power received by the scene's detector for `config`.
pub fn measure_power_physical(config: &HsfConfiguration, scene: &SourceScene) -> Result<f64> {
    power_toward(config, scene, &scene.detector)
}

/// Power reflected toward an arbitrary far-field direction.
pub fn power_toward(config: &HsfConfiguration, scene: &SourceScene, dir: &SphericalDirection) -> Result<f64> {
    let field = far_field(config, &incident_field(scene), dir, &scene.grid, scene.wavelength())?;
    Ok(field.norm_sqr())
}

/// Per-cell power `|E_inc|²` at the mask cells, row-major over mask positions.
pub fn ground_truth_wavefront(scene: &SourceScene) -> WavefrontPower {
    let field = incident_field(scene);
    let mask = make_mask(&scene.grid);
    let values: Vec<f64> = mask.positions().map(|(r, c)| field.get(r, c).norm_sqr()).collect();
    WavefrontPower::from_values(scene.grid.m(), values).expect("powers are nonnegative")
}

/// Nonnegative `m x m` power map over the sensing cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavefrontPower(RealGrid);

impl WavefrontPower {
    pub fn from_values(side: usize, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("wavefront power entries must be finite and nonnegative"));
        }
        crate::geometry::reshape(&values, side).map(Self)
    }

    pub fn zeros(side: usize) -> Self {
        Self::from_values(side, vec![0.0; side * side]).expect("zeros are valid")
    }

    pub fn grid(&self) -> &RealGrid {
        &self.0
    }

    pub fn side(&self) -> usize {
        self.0.side()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    pub fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    /// Binary PGM (P5), 8-bit, scaled over this map's own min..max range.
    pub fn to_pgm(&self) -> Vec<u8> {
        let side = self.side();
        let (lo, hi) = self
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
        out.extend(self.values().iter().map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        }));
        out
    }

    /// Power-weighted centroid `(x, y)` in cell units relative to the map
    /// centre, with `x` growing with column and `y` growing toward row 0.
    /// `None` for an all-zero map.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let total = self.total();
        if total <= 0.0 {
            return None;
        }
        let side = self.side();
        let mid = (side as f64 - 1.0) / 2.0;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (k, &v) in self.values().iter().enumerate() {
            let (r, c) = (k / side, k % side);
            sx += v * (c as f64 - mid);
            sy += v * (mid - r as f64);
        }
        Some((sx / total, sy / total))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramSample {
    pub phi: f64,
    pub theta: f64,
    pub power: f64,
}

/// Reflected power over the upper hemisphere on a regular `(phi, theta)` grid.
/// Samples are ordered by `phi` (outer) then `theta` (inner).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringDiagram {
    resolution: f64,
    phi_steps: usize,
    theta_steps: usize,
    samples: Vec<DiagramSample>,
}

/// A local maximum of the diagram.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lobe {
    pub phi: f64,
    pub theta: f64,
    pub power: f64,
}

impl ScatteringDiagram {
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn samples(&self) -> &[DiagramSample] {
        &self.samples
    }

    pub fn sample(&self, phi_idx: usize, theta_idx: usize) -> &DiagramSample {
        &self.samples[phi_idx * self.theta_steps + theta_idx]
    }

    pub fn peak(&self) -> DiagramSample {
        *self
            .samples
            .iter()
            .max_by(|a, b| a.power.total_cmp(&b.power))
            .expect("diagram is never empty")
    }

    /// Local maxima in decreasing power order. The `phi = 0` ring collapses
    /// to a single point; `theta` wraps around.
    pub fn lobes(&self) -> Vec<Lobe> {
        let (np, nt) = (self.phi_steps, self.theta_steps);
        let power = |i: usize, j: usize| self.sample(i, j).power;
        let mut lobes = Vec::new();
        let pole = power(0, 0);
        if np > 1 && (0..nt).all(|j| pole > power(1, j)) {
            lobes.push(Lobe { phi: 0.0, theta: 0.0, power: pole });
        }
        for i in 1..np {
            for j in 0..nt {
                let p = power(i, j);
                let mut strictly_above_one = false;
                let mut is_max = true;
                for di in [-1i64, 0, 1] {
                    for dj in [-1i64, 0, 1] {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let ii = i as i64 + di;
                        if ii < 0 || ii >= np as i64 {
                            continue;
                        }
                        let q = if ii == 0 {
                            pole
                        } else {
                            let jj = (j as i64 + dj).rem_euclid(nt as i64) as usize;
                            power(ii as usize, jj)
                        };
                        if q > p {
                            is_max = false;
                        } else if q < p {
                            strictly_above_one = true;
                        }
                    }
                }
                if is_max && strictly_above_one {
                    let s = self.sample(i, j);
                    lobes.push(Lobe { phi: s.phi, theta: s.theta, power: p });
                }
            }
        }
        lobes.sort_by(|a, b| b.power.total_cmp(&a.power));
        lobes
    }

    /// Power ratio in dB between the global peak and the strongest other
    /// local maximum lying more than `exclusion_deg` away from the peak.
    /// `None` when no such lobe exists.
    pub fn parasitic_margin_db(&self, exclusion_deg: f64) -> Option<f64> {
        let peak = self.peak();
        let main = SphericalDirection { phi: peak.phi, theta: peak.theta, radius: None };
        self.lobes()
            .into_iter()
            .find(|l| {
                let d = SphericalDirection { phi: l.phi, theta: l.theta, radius: None };
                angular_separation_deg(&main, &d) > exclusion_deg
            })
            .map(|l| 10.0 * (peak.power / l.power).log10())
    }

    /// CSV with header `theta_deg,phi_deg,power,power_db`; dB relative to the peak.
    pub fn to_csv(&self) -> String {
        let peak = self.peak().power;
        let mut out = String::from("theta_deg,phi_deg,power,power_db\n");
        for s in &self.samples {
            let db = if peak > 0.0 { 10.0 * (s.power / peak).log10() } else { 0.0 };
            writeln!(out, "{:?},{:?},{:?},{:?}", s.theta, s.phi, s.power, db).unwrap();
        }
        out
    }
}

pub fn angular_separation_deg(a: &SphericalDirection, b: &SphericalDirection) -> f64 {
    dot(&a.unit_vector(), &b.unit_vector()).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Power toward every direction of a `resolution`-degree hemisphere grid.
pub fn scattering_diagram(
    config: &HsfConfiguration,
    scene: &SourceScene,
    resolution: f64,
) -> Result<ScatteringDiagram> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(invalid(format!("resolution must be positive, got {resolution}")));
    }
    let phi_intervals = (90.0 / resolution).round();
    if phi_intervals < 1.0 || (phi_intervals * resolution - 90.0).abs() > 1e-9 {
        return Err(invalid(format!("resolution {resolution} does not divide 90 degrees evenly")));
    }
    let grid = &scene.grid;
    if config.side() != grid.n() {
        return Err(mismatch("configuration does not match scene grid"));
    }
    let phi_steps = phi_intervals as usize + 1;
    let theta_steps = 4 * phi_intervals as usize;
    let n = grid.n();
    let k = scene.wavenumber();
    let incident = incident_field(scene);
    let weights: Vec<Complex64> = config
        .bits()
        .iter()
        .zip(incident.values())
        .map(|(&b, &e)| if b { e } else { -e })
        .collect();
    let xs: Vec<f64> = (0..n).map(|c| grid.cell_center(0, c)[0]).collect();
    let ys: Vec<f64> = (0..n).map(|r| grid.cell_center(r, 0)[1]).collect();

    let samples = (0..phi_steps)
        .into_par_iter()
        .flat_map_iter(|i| {
            let phi = i as f64 * resolution;
            let weights = &weights;
            let (xs, ys) = (&xs, &ys);
            (0..theta_steps).map(move |j| {
                let theta = j as f64 * resolution;
                let u = SphericalDirection { phi, theta, radius: None }.unit_vector();
                let col_phase: Vec<Complex64> = xs.iter().map(|x| Complex64::cis(k * x * u[0])).collect();
                let mut total = Complex64::new(0.0, 0.0);
                for (r, y) in ys.iter().enumerate() {
                    let row = &weights[r * n..(r + 1) * n];
                    let inner = row
                        .iter()
                        .zip(&col_phase)
                        .fold(Complex64::new(0.0, 0.0), |acc, (w, p)| acc + w * p);
                    total += inner * Complex64::cis(k * y * u[1]);
                }
                DiagramSample { phi, theta, power: total.norm_sqr() }
            })
        })
        .collect();
    Ok(ScatteringDiagram { resolution, phi_steps, theta_steps, samples })
}
