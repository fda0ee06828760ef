//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypersense::cs::{reconstruct, MatrixKind, ObservationVector, ReconstructionOptions, SamplingMatrix};
use hypersense::decomposition::{decompose, recompose};
use hypersense::em::{angular_separation_deg, Lobe, ScatteringDiagram, WavefrontPower};
use hypersense::experiment::{run_position, run_sweep, steering_diagram, sweep_csv, ExperimentConfig, TABLE_POSITIONS};
use hypersense::geometry::{HsfConfiguration, SensingConfiguration, SphericalDirection};
use hypersense::pipeline::{run_joint_sensing, IdealLinearBackend};

/// Lobes closer than this to the main peak belong to the main beam.
const MAIN_BEAM_EXCLUSION_DEG: f64 = 5.0;
/// A sensing-diagram lobe within this distance of a steering-only lobe is not "additional".
const LOBE_MATCH_DEG: f64 = 3.0;

type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if elapsed > limit {
        o.passed = false;
    }
    o.detail = format!("{}; {:.2}s (limit {}s)", o.detail, elapsed.as_secs_f64(), limit.as_secs());
    o
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn decomposition_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut nonzero_residual = 0;
    for _ in 0..1000 {
        let v: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = decompose(&v, 2, 0.0).expect("finite vector");
        let back = recompose(&r);
        let err = v.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(err / (0.5 * r.range * 1e-2));

        let r = decompose(&v, 2, 1e-3).expect("finite vector");
        let w: Vec<u64> = v.iter().map(|x| ((x - r.shift) / r.range * r.scale).round() as u64).collect();
        if r.weighted_sum() != w {
            nonzero_residual += 1;
        }
    }
    outcome(
        worst <= 1.0 + 1e-12 && nonzero_residual == 0,
        format!("worst error/bound {worst:.4}; vectors with residual at eps=1e-3: {nonzero_residual}"),
    )
}

fn observation_exactness() -> Outcome {
    let m = 20;
    let n = 2 * m;
    let mut worst_obs = 0.0f64;
    let mut worst_rec = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let mut x = vec![0.0; m * m];
        for i in sample(&mut rng, m * m, 20) {
            x[i] = rng.random_range(0.5..1.5);
        }
        let a = SamplingMatrix::generate(300, m * m, MatrixKind::Gaussian, trial).expect("valid dims");
        let backend = IdealLinearBackend::new(WavefrontPower::from_values(m, x.clone()).expect("nonnegative"))
            .expect("valid truth");
        let (w, manifest) = run_joint_sensing(
            &backend,
            &HsfConfiguration::zeros(n),
            &a,
            2,
            1e-3,
            &ReconstructionOptions::default(),
        )
        .expect("ideal run");
        let sum_x: f64 = x.iter().sum();
        for (i, o) in manifest.observations.iter().enumerate() {
            let row = a.row(i);
            let range = row.iter().cloned().fold(f64::MIN, f64::max) - row.iter().cloned().fold(f64::MAX, f64::min);
            let bound = 0.5e-2 * range * sum_x;
            worst_obs = worst_obs.max((o - dot(row, &x)).abs() / bound);
        }
        worst_rec = worst_rec.max(rel_err(w.values(), &x));
    }
    outcome(
        worst_obs <= 1.0 + 1e-9 && worst_rec < 0.05,
        format!("worst observation error/bound {worst_obs:.4}; worst relative L2 error {worst_rec:.4} (limit 0.05)"),
    )
}

/// Smallest support (size <= 2) reproducing `o` exactly.
fn min_l0(a: &SamplingMatrix, o: &[f64]) -> Option<Vec<f64>> {
    let n = a.cols();
    let col = |j: usize| -> Vec<f64> { (0..a.rows()).map(|i| a.row(i)[j]).collect() };
    let scale = dot(o, o).sqrt();
    let fits = |support: &[usize]| -> Option<Vec<f64>> {
        let cols: Vec<Vec<f64>> = support.iter().map(|&j| col(j)).collect();
        let g = |p: usize, q: usize| dot(&cols[p], &cols[q]);
        let b = |p: usize| dot(&cols[p], o);
        let coef = if support.len() == 1 {
            vec![b(0) / g(0, 0)]
        } else {
            let det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
            vec![(b(0) * g(1, 1) - b(1) * g(0, 1)) / det, (g(0, 0) * b(1) - g(1, 0) * b(0)) / det]
        };
        let resid: f64 = (0..a.rows())
            .map(|i| (o[i] - cols.iter().zip(&coef).map(|(c, w)| c[i] * w).sum::<f64>()).powi(2))
            .sum::<f64>()
            .sqrt();
        (resid <= 1e-9 * scale).then(|| {
            let mut x = vec![0.0; n];
            for (&j, &w) in support.iter().zip(&coef) {
                x[j] = w;
            }
            x
        })
    };
    (0..n)
        .find_map(|j| fits(&[j]))
        .or_else(|| (0..n).find_map(|i| (i + 1..n).find_map(|j| fits(&[i, j]))))
}

fn solver_oracle() -> Outcome {
    let mut matches = 0;
    for trial in 0..100u64 {
        let a = SamplingMatrix::generate(8, 16, MatrixKind::Gaussian, trial).expect("valid dims");
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + trial);
        let mut x = vec![0.0; 16];
        for i in sample(&mut rng, 16, 2) {
            x[i] = rng.random_range(0.5..1.5);
        }
        let o = ObservationVector::new(a.apply(&x).expect("dims")).expect("finite");
        let Some(oracle) = min_l0(&a, o.values()) else { continue };
        let r = reconstruct(&a, &o, &ReconstructionOptions::default()).expect("solve");
        if r.x.iter().zip(&oracle).all(|(g, w)| (g - w).abs() < 1e-6) {
            matches += 1;
        }
    }
    outcome(matches >= 95, format!("{matches}/100 match the minimum-L0 solution (need 95)"))
}

fn steering_correctness() -> Outcome {
    let cfg = ExperimentConfig::default();
    let d = steering_diagram(&cfg, None).expect("diagram");
    let peak = d.peak();
    let target = SphericalDirection { phi: 45.0, theta: 0.0, radius: None };
    let off = angular_separation_deg(&SphericalDirection { phi: peak.phi, theta: peak.theta, radius: None }, &target);
    let margin = d.parasitic_margin_db(MAIN_BEAM_EXCLUSION_DEG).unwrap_or(f64::INFINITY);
    outcome(
        off <= 2.0 && margin >= 10.0,
        format!(
            "peak at (phi {}, theta {}) {off:.2} deg from target (limit 2); parasitic margin {margin:.2} dB (need 10)",
            peak.phi, peak.theta
        ),
    )
}

fn efficiency_sweep(n: usize, k: usize) -> Outcome {
    let cfg = ExperimentConfig { n, k, ..Default::default() };
    let rows: Vec<_> = run_sweep(&cfg, &TABLE_POSITIONS).expect("sweep").into_iter().map(|o| o.row).collect();
    let in_range = rows.iter().all(|r| (0.60..=0.90).contains(&r.efficiency));
    let grand = rows.iter().map(|r| r.efficiency).sum::<f64>() / rows.len() as f64;
    let boresight = rows.iter().find(|r| r.phi == 0.0 && r.theta == 0.0).expect("boresight row").efficiency;
    let maximal = rows.iter().all(|r| r.efficiency <= boresight);
    let max_sigma = rows.iter().map(|r| r.sigma).fold(0.0, f64::max);
    let (lo, hi) = rows
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r.efficiency), hi.max(r.efficiency)));
    outcome(
        in_range && (grand - 0.75).abs() <= 0.10 && maximal && max_sigma < 1e-3,
        format!(
            "n={n} K={k}: efficiency range [{lo:.4}, {hi:.4}] (need [0.60, 0.90]); grand mean {grand:.4} (need 0.75±0.10); \
             boresight {boresight:.4} maximal: {maximal}; max sigma {max_sigma:.2e} (need < 1e-3)"
        ),
    )
}

fn near(a: &Lobe, b: &Lobe, deg: f64) -> bool {
    let da = SphericalDirection { phi: a.phi, theta: a.theta, radius: None };
    let db = SphericalDirection { phi: b.phi, theta: b.theta, radius: None };
    angular_separation_deg(&da, &db) <= deg
}

/// Main-lobe power over the strongest lobe absent from `reference`, in dB.
fn additional_lobe_margin(d: &ScatteringDiagram, reference: &[Lobe]) -> f64 {
    let peak = d.peak();
    let main = Lobe { phi: peak.phi, theta: peak.theta, power: peak.power };
    d.lobes()
        .into_iter()
        .find(|l| !near(l, &main, MAIN_BEAM_EXCLUSION_DEG) && !reference.iter().any(|r| near(l, r, LOBE_MATCH_DEG)))
        .map_or(f64::INFINITY, |l| 10.0 * (peak.power / l.power).log10())
}

fn sensing_lobes() -> Outcome {
    let cfg = ExperimentConfig::default();
    let reference = steering_diagram(&cfg, None).expect("diagram").lobes();
    let a = cfg.sampling_matrix().expect("matrix");
    let m = cfg.n / 2;
    let mut worst = f64::INFINITY;
    let mut patterns = 0;
    for i in 0..2 {
        let r = decompose(a.row(i), cfg.digits, cfg.epsilon).expect("row");
        for bits in r.rows.iter().step_by(10) {
            let pattern = SensingConfiguration::from_row(bits, m).expect("row length");
            let d = steering_diagram(&cfg, Some(&pattern)).expect("diagram");
            worst = worst.min(additional_lobe_margin(&d, &reference));
            patterns += 1;
        }
    }
    outcome(worst >= 10.0, format!("worst additional-lobe margin {worst:.2} dB over {patterns} sensing patterns (need 10)"))
}

fn wavefront_trend() -> Outcome {
    let cfg = ExperimentConfig::default();
    let centroid = |phi: f64, theta: f64| -> (f64, f64) {
        let o = run_position(&cfg, phi, theta).expect("run");
        o.wavefront.centroid().unwrap_or((0.0, 0.0))
    };
    let along: Vec<f64> = [20.0, 40.0, 60.0].iter().map(|&p| centroid(p, 0.0).0).collect();
    let monotone = along.windows(2).all(|w| w[1] > w[0]);
    let angles: Vec<f64> = [0.0, 45.0, 90.0]
        .iter()
        .map(|&t| {
            let (x, y) = centroid(20.0, t);
            y.atan2(x).to_degrees()
        })
        .collect();
    let rotates = angles.windows(2).all(|w| w[1] > w[0]);
    outcome(
        monotone && rotates,
        format!(
            "centroid x at phi 20/40/60: {:.3}/{:.3}/{:.3}; centroid angle at theta 0/45/90: {:.1}/{:.1}/{:.1} deg",
            along[0], along[1], along[2], angles[0], angles[1], angles[2]
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig { n: 16, k: 48, ..Default::default() };
    let render = || -> Vec<String> {
        let outcomes = run_sweep(&cfg, &TABLE_POSITIONS).expect("sweep");
        let mut csvs: Vec<String> = outcomes.iter().map(|o| o.wavefront.to_csv()).collect();
        csvs.push(sweep_csv(&outcomes.iter().map(|o| o.row.clone()).collect::<Vec<_>>()));
        csvs.push(steering_diagram(&cfg, None).expect("diagram").to_csv());
        csvs.push(cfg.sampling_matrix().expect("matrix").to_csv());
        csvs
    };
    let first = render();
    let second = render();
    outcome(first == second, format!("{} CSV outputs compared byte for byte", first.len()))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 decomposition identity", Box::new(|| timed(Duration::from_secs(5), decomposition_identity))),
        ("2 observation exactness", Box::new(|| timed(Duration::from_secs(60), observation_exactness))),
        ("3 solver oracle equivalence", Box::new(|| timed(Duration::from_secs(10), solver_oracle))),
        ("4 steering correctness", Box::new(|| timed(Duration::from_secs(30), steering_correctness))),
        ("5 efficiency (n=40, K=300)", Box::new(|| timed(Duration::from_secs(600), || efficiency_sweep(40, 300)))),
        ("5 efficiency (n=16, K=48)", Box::new(|| timed(Duration::from_secs(30), || efficiency_sweep(16, 48)))),
        ("6 sensing-lobe property", Box::new(sensing_lobes)),
        ("7 wavefront trend", Box::new(wavefront_trend)),
        ("8 determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} criterion check(s) failed");
        std::process::exit(1);
    }
}
