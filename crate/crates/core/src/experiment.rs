//! Experiment driver: configuration with the reference-scene defaults,
//! steering efficiency under interleaved sensing, position sweeps and the
//! ideal-backend self test.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cs::{reconstruct, MatrixKind, ObservationVector, ReconstructionOptions, SamplingMatrix};
use crate::decomposition::{decompose, recompose, MAX_DIGITS};
use crate::em::{
    ground_truth_wavefront, incident_field, power_toward, radiating_terms, scattering_diagram, signed_sum,
    synthesize_steering_config, ScatteringDiagram, SourceScene, WavefrontPower,
};
use crate::error::{invalid, Result};
use crate::geometry::{interleave, CellGrid, HsfConfiguration, SensingConfiguration, SphericalDirection};
use crate::pipeline::{
    run_joint_sensing_observed, EfficiencyTrace, IdealLinearBackend, MeasurementBackend, PhysicalBackend, RunManifest,
};

/// Bumped whenever a default below changes, so manifests stay replayable.
pub const DEFAULTS_VERSION: &str = "1";

/// Source positions `(phi, theta)` of the efficiency table, in degrees.
pub const TABLE_POSITIONS: [(f64, f64); 9] = [
    (20.0, 0.0),
    (20.0, 45.0),
    (20.0, 90.0),
    (40.0, 0.0),
    (40.0, 45.0),
    (40.0, 90.0),
    (60.0, 0.0),
    (60.0, 45.0),
    (0.0, 0.0),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Physical,
    Ideal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Cells per side.
    pub n: usize,
    /// Metres.
    pub cell_pitch: f64,
    /// Hz.
    pub frequency: f64,
    pub source: SphericalDirection,
    pub detector: SphericalDirection,
    pub target: SphericalDirection,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "I_e")]
    pub digits: u32,
    pub epsilon: f64,
    pub seed: u64,
    pub matrix_kind: MatrixKind,
    pub solver: ReconstructionOptions,
    pub backend: BackendKind,
    /// Source positions `[phi, theta]` visited by a sweep.
    pub positions: Vec<(f64, f64)>,
    /// Degrees.
    pub scatter_resolution: f64,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 40,
            cell_pitch: 0.01,
            frequency: 15e9,
            source: SphericalDirection { phi: 0.0, theta: 0.0, radius: Some(4.0) },
            detector: SphericalDirection { phi: 0.0, theta: 0.0, radius: Some(4.0) },
            target: SphericalDirection { phi: 45.0, theta: 0.0, radius: None },
            k: 300,
            digits: 2,
            epsilon: 1e-3,
            seed: 1,
            matrix_kind: MatrixKind::Gaussian,
            solver: ReconstructionOptions::default(),
            backend: BackendKind::Physical,
            positions: TABLE_POSITIONS.to_vec(),
            scatter_resolution: 1.0,
            output_dir: "out".into(),
        }
    }
}

fn field_error(field: &str, err: impl std::fmt::Display) -> crate::Error {
    invalid(format!("config field `{field}`: {err}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("plain data serializes"));
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }

    pub fn validate(&self) -> Result<()> {
        CellGrid::new(self.n, self.cell_pitch).map_err(|e| field_error("n/cell_pitch", e))?;
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(field_error("frequency", "must be positive"));
        }
        self.source.validate().map_err(|e| field_error("source", e))?;
        if self.source.radius.is_none() {
            return Err(field_error("source", "needs a range r"));
        }
        self.detector.validate().map_err(|e| field_error("detector", e))?;
        if self.detector.radius.is_none() {
            return Err(field_error("detector", "needs a range r"));
        }
        self.target.validate().map_err(|e| field_error("target", e))?;
        if self.k == 0 {
            return Err(field_error("K", "must be at least 1"));
        }
        if !(1..=MAX_DIGITS).contains(&self.digits) {
            return Err(field_error("I_e", format!("must lie in [1, {MAX_DIGITS}]")));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(field_error("epsilon", "must be a nonnegative real"));
        }
        self.solver.validate().map_err(|e| field_error("solver", e))?;
        for &(phi, theta) in &self.positions {
            SphericalDirection::new(phi, theta).map_err(|e| field_error("positions", e))?;
        }
        if self.scatter_resolution.is_nan() || self.scatter_resolution <= 0.0 {
            return Err(field_error("scatter_resolution", "must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<CellGrid> {
        CellGrid::new(self.n, self.cell_pitch)
    }

    /// Scene with the configured source.
    pub fn scene(&self) -> Result<SourceScene> {
        SourceScene::new(self.grid()?, self.source, self.detector, self.frequency)
    }

    /// Scene with the source moved to `(phi, theta)` at the configured range.
    pub fn scene_at(&self, phi: f64, theta: f64) -> Result<SourceScene> {
        let r = self.source.radius.ok_or_else(|| field_error("source", "needs a range r"))?;
        self.scene()?.with_source(SphericalDirection::at(phi, theta, r)?)
    }

    pub fn sampling_matrix(&self) -> Result<SamplingMatrix> {
        let m = self.n / 2;
        SamplingMatrix::generate(self.k, m * m, self.matrix_kind, self.seed)
    }

    /// Fraction of cells left to the steering function, `(n² − m²) / n²`.
    pub fn baseline_ratio(&self) -> f64 {
        let n2 = (self.n * self.n) as f64;
        let m = self.n / 2;
        (n2 - (m * m) as f64) / n2
    }
}

/// Steered power with sensing relative to the pure steering configuration.
pub fn compute_efficiency(p: f64, p_max: f64) -> Result<f64> {
    if !(p_max.is_finite() && p_max > 0.0) {
        return Err(invalid(format!("P_max must be positive, got {p_max}")));
    }
    Ok(p / p_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub phi: f64,
    pub theta: f64,
    pub efficiency: f64,
    pub baseline_ratio: f64,
    pub sigma: f64,
}

/// One source position of a sweep.
#[derive(Clone, Debug)]
pub struct PositionOutcome {
    pub row: EfficiencyRow,
    pub steering: HsfConfiguration,
    pub wavefront: WavefrontPower,
    pub ground_truth: WavefrontPower,
    pub manifest: RunManifest,
}

fn mean_and_sigma(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Joint sensing with the source at `(phi, theta)`.
///
/// The steering configuration is synthesized for that source position and
/// the configured target. `P_max` is the target-direction power of the pure
/// steering configuration; every deployed combined configuration contributes
/// one efficiency sample toward the mean and `sigma`.
pub fn run_position(config: &ExperimentConfig, phi: f64, theta: f64) -> Result<PositionOutcome> {
    config.validate()?;
    let scene = config.scene_at(phi, theta)?;
    let steering = synthesize_steering_config(&scene, &config.target);
    let target_terms = radiating_terms(&incident_field(&scene), &config.target, &scene.grid, scene.wavelength())?;
    let p_max = signed_sum(&steering, &target_terms).norm_sqr();
    let a = config.sampling_matrix()?;
    let ground_truth = ground_truth_wavefront(&scene);

    let backend: Box<dyn MeasurementBackend> = match config.backend {
        BackendKind::Physical => Box::new(PhysicalBackend::new(scene)?),
        BackendKind::Ideal => Box::new(IdealLinearBackend::new(ground_truth.clone())?),
    };

    let mut samples = Vec::new();
    let (wavefront, mut manifest) = run_joint_sensing_observed(
        backend.as_ref(),
        &steering,
        &a,
        config.digits,
        config.epsilon,
        &config.solver,
        &mut |deployed, _| {
            let p: Complex64 = signed_sum(deployed, &target_terms);
            samples.push(p.norm_sqr());
        },
    )?;
    let efficiencies: Vec<f64> = samples
        .iter()
        .map(|&p| compute_efficiency(p, p_max))
        .collect::<Result<_>>()?;
    let (mean, sigma) = mean_and_sigma(&efficiencies);
    manifest.efficiency = Some(EfficiencyTrace { p_max, mean, sigma, count: efficiencies.len() });
    manifest.config_hash = Some(config.hash());
    manifest.defaults_version = Some(DEFAULTS_VERSION.into());

    Ok(PositionOutcome {
        row: EfficiencyRow { phi, theta, efficiency: mean, baseline_ratio: config.baseline_ratio(), sigma },
        steering,
        wavefront,
        ground_truth,
        manifest,
    })
}

/// [`run_position`] for every position, evaluated in parallel and returned in
/// input order.
pub fn run_sweep(config: &ExperimentConfig, positions: &[(f64, f64)]) -> Result<Vec<PositionOutcome>> {
    config.validate()?;
    positions.par_iter().map(|&(phi, theta)| run_position(config, phi, theta)).collect()
}

/// CSV with header `phi_deg,theta_deg,efficiency,baseline_ratio,sigma`.
pub fn sweep_csv(rows: &[EfficiencyRow]) -> String {
    let mut out = String::from("phi_deg,theta_deg,efficiency,baseline_ratio,sigma\n");
    for r in rows {
        writeln!(out, "{:?},{:?},{:?},{:?},{:?}", r.phi, r.theta, r.efficiency, r.baseline_ratio, r.sigma).unwrap();
    }
    out
}

/// Scattering diagram of the steering configuration for the configured
/// source, optionally with one sensing pattern interleaved.
pub fn steering_diagram(config: &ExperimentConfig, sensing: Option<&SensingConfiguration>) -> Result<ScatteringDiagram> {
    let scene = config.scene()?;
    let mut deployed = synthesize_steering_config(&scene, &config.target);
    if let Some(pattern) = sensing {
        deployed = interleave(&deployed, pattern)?;
    }
    scattering_diagram(&deployed, &scene, config.scatter_resolution)
}

/// Power of `config` toward the configured target for the configured source.
pub fn target_power(config: &ExperimentConfig, deployed: &HsfConfiguration) -> Result<f64> {
    power_toward(deployed, &config.scene()?, &config.target)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Ideal-backend oracle checks on a small surface.
pub fn self_test() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        out.push(CheckResult { name: name.into(), passed, detail });
    };

    // decomposition identity
    let a = SamplingMatrix::generate(50, 64, MatrixKind::Gaussian, 7).expect("valid dims");
    let worst = a
        .row_iter()
        .map(|row| {
            let r = decompose(row, 2, 0.0).expect("finite row");
            let back = recompose(&r);
            let err = row.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            err / (0.5 * r.range * 1e-2)
        })
        .fold(0.0, f64::max);
    push("decomposition-identity", worst <= 1.0 + 1e-9, format!("worst error / bound = {worst:.4}"));

    // observation exactness and reconstruction on the ideal backend
    let result = (|| -> Result<(f64, f64)> {
        let m = 8;
        let mut truth = vec![0.0; m * m];
        for (k, idx) in [3usize, 17, 29, 40, 58].iter().enumerate() {
            truth[*idx] = 0.5 + 0.25 * k as f64;
        }
        let x = WavefrontPower::from_values(m, truth.clone())?;
        let backend = IdealLinearBackend::new(x)?;
        let a = SamplingMatrix::generate(40, m * m, MatrixKind::Gaussian, 3)?;
        let opts = ReconstructionOptions { max_iterations: 20, residual_tolerance: 1e-3, ..Default::default() };
        let (w, manifest) = run_joint_sensing_observed(
            &backend,
            &HsfConfiguration::zeros(2 * m),
            &a,
            2,
            0.0,
            &opts,
            &mut |_, _| {},
        )?;
        let direct = a.apply(&truth)?;
        let total: f64 = truth.iter().sum();
        let mut worst = 0.0f64;
        for (i, (o, d)) in manifest.observations.iter().zip(&direct).enumerate() {
            let r = decompose(a.row(i), 2, 0.0)?;
            worst = worst.max((o - d).abs() / (0.5e-2 * r.range * total));
        }
        let num: f64 = w.values().iter().zip(&truth).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let den: f64 = truth.iter().map(|q| q * q).sum::<f64>().sqrt();
        Ok((worst, num / den))
    })();
    match result {
        Ok((bound_ratio, rel)) => {
            push("observation-exactness", bound_ratio <= 1.0 + 1e-9, format!("worst error / bound = {bound_ratio:.4}"));
            push("ideal-reconstruction", rel < 0.05, format!("relative L2 error = {rel:.2e}"));
        }
        Err(e) => push("ideal-pipeline", false, e.to_string()),
    }

    // noiseless sparse recovery
    let a = SamplingMatrix::generate(8, 16, MatrixKind::Gaussian, 11).expect("valid dims");
    let mut x = vec![0.0; 16];
    x[2] = 1.0;
    x[11] = 0.6;
    let recovered = ObservationVector::new(a.apply(&x).expect("dims"))
        .and_then(|o| reconstruct(&a, &o, &ReconstructionOptions::default()));
    match recovered {
        Ok(r) => {
            let err = r.x.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            push("sparse-recovery", err < 1e-6, format!("max abs error = {err:.2e}"));
        }
        Err(e) => push("sparse-recovery", false, e.to_string()),
    }
    out
}
