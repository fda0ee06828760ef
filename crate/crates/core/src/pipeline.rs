//! Joint sense/steer operation.
//!
//! One special measurement with the mask deployed estimates `X = Σ x`. Each
//! sampling row `a_i` is decomposed into binary rows; every binary row is
//! reshaped to the sensing grid, written into the mask cells of the steering
//! configuration and measured. The row observation is then
//! `o_i = (Σ_j s_j · P_j) · D / U + S · X`, and the wavefront is recovered
//! from `(A, o)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cs::{reconstruct, MatrixKind, ObservationVector, ReconstructionOptions, SamplingMatrix};
use crate::decomposition::{decompose, DecompositionResult, MAX_DIGITS};
use crate::em::{incident_field, radiating_terms, signed_sum, SourceScene, WavefrontPower};
use crate::error::{invalid, mismatch, Result};
use crate::geometry::{interleave, mask_for_side, HsfConfiguration, Mask, SensingConfiguration};

/// Anything that returns a received power for a deployed configuration.
pub trait MeasurementBackend {
    /// Side `n` of the configurations this backend accepts.
    fn side(&self) -> usize;

    fn measure(&self, config: &HsfConfiguration) -> Result<f64>;
}

fn check_side(expected: usize, config: &HsfConfiguration) -> Result<()> {
    if config.side() != expected {
        return Err(mismatch(format!(
            "backend expects a {expected}x{expected} configuration, got side {}",
            config.side()
        )));
    }
    Ok(())
}

/// Detector power from the array-factor model of [`crate::em`].
#[derive(Clone, Debug)]
pub struct PhysicalBackend {
    scene: SourceScene,
    terms: Vec<Complex64>,
}

impl PhysicalBackend {
    pub fn new(scene: SourceScene) -> Result<Self> {
        scene.validate()?;
        let terms = radiating_terms(&incident_field(&scene), &scene.detector, &scene.grid, scene.wavelength())?;
        Ok(Self { scene, terms })
    }

    pub fn scene(&self) -> &SourceScene {
        &self.scene
    }
}

impl MeasurementBackend for PhysicalBackend {
    fn side(&self) -> usize {
        self.scene.grid.n()
    }

    fn measure(&self, config: &HsfConfiguration) -> Result<f64> {
        check_side(self.side(), config)?;
        Ok(signed_sum(config, &self.terms).norm_sqr())
    }
}

/// Exactly linear reference backend: the power is the sum of the ground-truth
/// wavefront over the mask cells whose deployed bit is 1. Steering cells do
/// not contribute.
#[derive(Clone, Debug)]
pub struct IdealLinearBackend {
    truth: WavefrontPower,
    mask: Mask,
}

impl IdealLinearBackend {
    pub fn new(truth: WavefrontPower) -> Result<Self> {
        let mask = mask_for_side(2 * truth.side())?;
        Ok(Self { truth, mask })
    }

    pub fn truth(&self) -> &WavefrontPower {
        &self.truth
    }
}

impl MeasurementBackend for IdealLinearBackend {
    fn side(&self) -> usize {
        self.mask.side()
    }

    fn measure(&self, config: &HsfConfiguration) -> Result<f64> {
        check_side(self.side(), config)?;
        Ok(self
            .mask
            .positions()
            .zip(self.truth.values())
            .filter(|((r, c), _)| config.get(*r, *c))
            .map(|(_, &x)| x)
            .sum())
    }
}

/// The special measurement with every sensing cell ON and every other cell OFF.
pub fn estimate_x(backend: &dyn MeasurementBackend, mask: &Mask) -> Result<f64> {
    backend.measure(&mask.as_configuration())
}

/// `(Σ_j s_j · P_j) · D / U + S · X`.
pub fn assemble_observation(r: &DecompositionResult, powers: &[f64], x_total: f64) -> Result<f64> {
    if powers.len() != r.row_count() {
        return Err(mismatch(format!(
            "{} measurements for {} decomposition rows",
            powers.len(),
            r.row_count()
        )));
    }
    let accumulated: f64 = r.multiplicities.iter().zip(powers).map(|(&s, &p)| s as f64 * p).sum();
    Ok(accumulated * r.range / r.scale + r.shift * x_total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Mean and spread of the steering efficiency over every deployed
/// sensing configuration of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTrace {
    pub p_max: f64,
    pub mean: f64,
    pub sigma: f64,
    pub count: usize,
}

/// Everything needed to audit and replay one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "I_e")]
    pub digits: u32,
    pub epsilon: f64,
    pub seed: Option<u64>,
    pub matrix_kind: Option<MatrixKind>,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "X")]
    pub x_measurement: f64,
    pub per_row_measurements: Vec<usize>,
    pub total_measurements: usize,
    pub solver: ReconstructionOptions,
    pub observations: Vec<f64>,
    pub reconstruction: ReconstructionSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defaults_version: Option<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Runs the joint operation and returns the reconstructed wavefront.
pub fn run_joint_sensing(
    backend: &dyn MeasurementBackend,
    c_f: &HsfConfiguration,
    a: &SamplingMatrix,
    digits: u32,
    epsilon: f64,
    opts: &ReconstructionOptions,
) -> Result<(WavefrontPower, RunManifest)> {
    run_joint_sensing_observed(backend, c_f, a, digits, epsilon, opts, &mut |_, _| {})
}

/// As [`run_joint_sensing`], calling `observer` with every deployed combined
/// configuration and its measured power, in measurement order.
pub fn run_joint_sensing_observed(
    backend: &dyn MeasurementBackend,
    c_f: &HsfConfiguration,
    a: &SamplingMatrix,
    digits: u32,
    epsilon: f64,
    opts: &ReconstructionOptions,
    observer: &mut dyn FnMut(&HsfConfiguration, f64),
) -> Result<(WavefrontPower, RunManifest)> {
    let n = c_f.side();
    if !n.is_multiple_of(2) {
        return Err(invalid(format!("configuration side must be even, got {n}")));
    }
    let m = n / 2;
    if backend.side() != n {
        return Err(mismatch(format!("backend side {} != configuration side {n}", backend.side())));
    }
    if a.cols() != m * m {
        return Err(mismatch(format!("sampling matrix has {} columns, expected m² = {}", a.cols(), m * m)));
    }
    if !(1..=MAX_DIGITS).contains(&digits) {
        return Err(invalid(format!("digits must lie in [1, {MAX_DIGITS}], got {digits}")));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(invalid(format!("epsilon must be a nonnegative real, got {epsilon}")));
    }
    opts.validate()?;

    let mask = mask_for_side(n)?;
    let x_total = estimate_x(backend, &mask)?;

    let mut observations = Vec::with_capacity(a.rows());
    let mut per_row = Vec::with_capacity(a.rows());
    for row in a.row_iter() {
        let r = decompose(row, digits, epsilon)?;
        let mut powers = Vec::with_capacity(r.row_count());
        for bits in &r.rows {
            let pattern = SensingConfiguration::from_row(bits, m)?;
            let deployed = interleave(c_f, &pattern)?;
            let p = backend.measure(&deployed)?;
            observer(&deployed, p);
            powers.push(p);
        }
        per_row.push(powers.len());
        observations.push(assemble_observation(&r, &powers, x_total)?);
    }

    let o = ObservationVector::new(observations)?;
    let rec = reconstruct(a, &o, opts)?;
    let estimate: Vec<f64> = rec.x.iter().map(|v| v.max(0.0)).collect();
    let wavefront = WavefrontPower::from_values(m, estimate)?;

    let manifest = RunManifest {
        k: a.rows(),
        digits,
        epsilon,
        seed: a.seed(),
        matrix_kind: a.kind(),
        n,
        m,
        x_measurement: x_total,
        total_measurements: 1 + per_row.iter().sum::<usize>(),
        per_row_measurements: per_row,
        solver: *opts,
        observations: o.values().to_vec(),
        reconstruction: ReconstructionSummary {
            converged: rec.converged,
            iterations: rec.iterations,
            residual_norm: rec.residual_norm,
        },
        efficiency: None,
        config_hash: None,
        defaults_version: None,
    };
    Ok((wavefront, manifest))
}
