//! End-to-end acceptance checks. Runs every criterion, prints one line per
//! criterion and exits non-zero if any of them fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptyremix::forward::{
    add_poisson_noise, diffract, exit_wave, make_phantom, make_probe, simulate_scan, synthetic_specimen, NoiseSpec,
    ProbeSpec,
};
use ptyremix::io::{pta, ptd};
use ptyremix::metrics::{aligned_mse, aligned_mse_between, l1_misfit, CoverageMap, Mask};
use ptyremix::remix::{flat_object, oversampled_geometry, remix_once, remix_pipeline, splice, Truth};
use ptyremix::solver::{run_epie, Epie, EpieOptions, EpieState};
use ptyremix::{
    raster_geometry, ComplexField, DiffractionRecord, DiffractionStack, EpieOrder, Position, Provenance, RealField,
    RemixConfig,
};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

const OBJECT: usize = 240;
const PROBE: usize = 60;
const PHASE_MAX: f64 = 1.0;

struct Scene {
    gray: RealField,
    truth: ComplexField,
    probe: ComplexField,
}

fn scene() -> Scene {
    let gray = synthetic_specimen(OBJECT, 1).unwrap();
    let truth = make_phantom(&gray, PHASE_MAX).unwrap();
    let probe = make_probe(&ProbeSpec::top_hat(PROBE, PROBE as f64)).unwrap();
    Scene { gray, truth, probe }
}

/// `truth * exp(j * amp * sin(2 pi u / T) cos(2 pi v / T))`
fn smooth_perturbation(truth: &ComplexField, amp: f64) -> ComplexField {
    let t = truth.rows() as f64;
    ComplexField::from_fn(truth.rows(), truth.cols(), |u, v| {
        let phase = amp * (2.0 * PI * u as f64 / t).sin() * (2.0 * PI * v as f64 / t).cos();
        truth.get(u, v) * Complex64::from_polar(1.0, phase)
    })
    .unwrap()
}

fn coverage(probe: &ComplexField, positions: &[Position]) -> Mask {
    Mask::Coverage(CoverageMap::new(OBJECT, OBJECT, probe, positions).unwrap())
}

fn random_field(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexField {
    ComplexField::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
    .unwrap()
}

fn forward_model() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let psi = random_field(&mut rng, PROBE, PROBE);
        let energy: f64 = psi.data().iter().map(|z| z.norm_sqr()).sum();
        let total: f64 = diffract(&psi).data().iter().sum();
        worst = worst.max((total - energy).abs() / energy);
    }

    let probe = make_probe(&ProbeSpec::top_hat(PROBE, 1.0))?;
    let object = make_phantom(&synthetic_specimen(PROBE, 3)?, 2.5)?;
    let psi = exit_wave(&object, &probe, Position { row: 0, col: 0 })?;
    let power: f64 = psi.data().iter().map(|z| z.norm_sqr()).sum();
    let flat = power / (PROBE * PROBE) as f64;
    let impulse_err = diffract(&psi).data().iter().map(|d| (d - flat).abs()).fold(0.0, f64::max);

    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-10 && impulse_err < 1e-12 && secs < 10.0,
        format!("parseval rel err {worst:.2e}, impulse flatness err {impulse_err:.2e}, {secs:.2} s"),
    ))
}

fn epie_fixed_point(sc: &Scene) -> Check {
    let geom = raster_geometry(OBJECT, PROBE, 30)?;
    let stack = simulate_scan(&sc.truth, &sc.probe, &geom, Provenance::Real)?;
    let mut engine = Epie::new(&sc.probe, EpieOptions::default())?;
    let mut state = EpieState::new(sc.truth.clone(), 0);
    engine.sweep(&mut state, &stack)?;
    let change = state.object().max_norm_diff(&sc.truth);
    Ok((change < 1e-10, format!("max change after one sweep {change:.2e}")))
}

fn epie_overlap(sc: &Scene) -> Check {
    let start = Instant::now();
    let mut mse = Vec::new();
    let mut sweeps = Vec::new();
    for step in [15, 60] {
        let geom = raster_geometry(OBJECT, PROBE, step)?;
        let stack = simulate_scan(&sc.truth, &sc.probe, &geom, Provenance::Real)?;
        let opts = EpieOptions { sweeps: 3000, ..Default::default() };
        let out = run_epie(&flat_object(OBJECT)?, &sc.probe, &stack, &opts)?;
        mse.push(aligned_mse(&out.object, &sc.gray, PHASE_MAX, &coverage(&sc.probe, geom.positions()))?);
        sweeps.push(out.sweeps_run);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        mse[0] < 1e-4 && mse[1] >= 10.0 * mse[0] && secs < 900.0,
        format!(
            "step 15: mse {:.2e} ({} sweeps); step 60: mse {:.2e} ({} sweeps); {secs:.1} s",
            mse[0], sweeps[0], mse[1], sweeps[1]
        ),
    ))
}

fn splice_exactness(sc: &Scene) -> Check {
    let real_geom = raster_geometry(OBJECT, PROBE, 60)?;
    let dense = oversampled_geometry(&real_geom, 3)?;
    let real = simulate_scan(&sc.truth, &sc.probe, &real_geom, Provenance::Real)?;
    let sim = simulate_scan(&smooth_perturbation(&sc.truth, 0.5), &sc.probe, &dense, Provenance::Simulated)?;
    let mixed = splice(&real, &sim)?;
    let exact = real.records().iter().all(|r| {
        mixed.records().iter().any(|m| {
            m.position == r.position
                && m.provenance == Provenance::Real
                && m.intensity.data().iter().zip(r.intensity.data()).all(|(a, b)| a.to_bits() == b.to_bits())
        })
    });
    let m = mixed.count(Provenance::Real);
    Ok((
        exact && m == 16 && real.len() == 16 && mixed.len() == 100,
        format!("real {m}, total {}, bit-exact {exact}", mixed.len()),
    ))
}

fn weight_limits(sc: &Scene) -> Check {
    let geom = raster_geometry(OBJECT, PROBE, 60)?;
    let real = simulate_scan(&sc.truth, &sc.probe, &geom, Provenance::Real)?;
    let init = smooth_perturbation(&sc.truth, 0.5);
    let sim = simulate_scan(&init, &sc.probe, &oversampled_geometry(&geom, 3)?, Provenance::Simulated)?;
    let sim = splice(&real, &sim)?.filter_provenance(Provenance::Simulated);
    let sweeps = 300;
    let opts = EpieOptions { sweeps, order: EpieOrder::Raster, ..Default::default() };
    let real_only = run_epie(&flat_object(OBJECT)?, &sc.probe, &real, &opts)?.object;

    let weights = [1.0, 1e2, 1e4, 1e6];
    let mut dist = Vec::new();
    let mut misfit = Vec::new();
    for w in weights {
        let cfg = RemixConfig { weight: w, epie_sweeps: sweeps, epie_order: EpieOrder::Raster, ..Default::default() };
        let x = remix_once(&init, &sc.probe, &real, &geom, &cfg)?;
        dist.push(aligned_mse_between(&x, &real_only, PHASE_MAX, &Mask::Full)?);
        misfit.push(l1_misfit(&x, &sc.probe, &sim)?);
    }
    let dist_ok = dist.windows(2).all(|p| p[1] <= p[0]);
    // Misfit must not grow as w decreases, i.e. it is non-decreasing in w.
    let misfit_ok = misfit.windows(2).all(|p| p[0] <= p[1]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ");
    Ok((
        dist_ok && misfit_ok,
        format!("w 1..1e6: dist to ePIE [{}], simulated l1 [{}]", fmt(&dist), fmt(&misfit)),
    ))
}

fn self_consistency(sc: &Scene) -> Check {
    let geom = raster_geometry(OBJECT, PROBE, 60)?;
    let real = simulate_scan(&sc.truth, &sc.probe, &geom, Provenance::Real)?;
    let cfg = RemixConfig { weight: 20.0, oversample: 3, epie_sweeps: 1000, ..Default::default() };
    let x = remix_once(&sc.truth, &sc.probe, &real, &geom, &cfg)?;
    let mask = coverage(&sc.probe, oversampled_geometry(&geom, 3)?.positions());
    let mse = aligned_mse(&x, &sc.gray, PHASE_MAX, &mask)?;
    Ok((mse < 1e-6, format!("mse {mse:.2e}")))
}

fn multi_round(sc: &Scene) -> Check {
    let geom = raster_geometry(OBJECT, PROBE, 45)?;
    let real = simulate_scan(&sc.truth, &sc.probe, &geom, Provenance::Real)?;
    // Pixels reached only by simulated patterns keep the init's error.
    let mask = coverage(&sc.probe, geom.positions());
    let init = smooth_perturbation(&sc.truth, 0.02);
    let init_mse = aligned_mse(&init, &sc.gray, PHASE_MAX, &mask)?;
    let cfg = RemixConfig {
        weight: 20.0,
        w_decay: 1.0,
        outer_iters: 4,
        epie_sweeps: 1000,
        epie_order: EpieOrder::Raster,
        stop_tol: 1e-10,
        ..Default::default()
    };
    let truth = Truth { gray: sc.gray.clone(), phase_max: PHASE_MAX, mask };
    let out = remix_pipeline(&init, &sc.probe, &real, &geom, &cfg, Some(&truth))?;
    let mse: Vec<f64> = out.report.rounds.iter().map(|r| r.aligned_mse.unwrap()).collect();
    let monotone = mse.windows(2).all(|p| p[1] <= p[0]);
    let last = *mse.last().unwrap();
    let list = mse.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ");
    Ok((
        mse.len() >= 3 && monotone && last < 1e-5,
        format!("init mse {init_mse:.2e}, rounds [{list}], non-increasing {monotone}"),
    ))
}

fn poisson_statistics() -> Check {
    let clean = RealField::filled(10, 10, 4.0)?;
    let records = (0..1000)
        .map(|k| DiffractionRecord {
            position: Position { row: k, col: 0 },
            provenance: Provenance::Real,
            intensity: clean.clone(),
        })
        .collect();
    let stack = DiffractionStack::new(10, records)?;
    let scale = 1000.0;
    let noisy = add_poisson_noise(&stack, &NoiseSpec { photon_scale: scale, seed: 2024 })?;
    let draws: Vec<f64> = noisy.records().iter().flat_map(|r| r.intensity.data().iter().copied()).collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let expected_var = 4.0 / scale;
    let sigma = (expected_var / n).sqrt();
    Ok((
        draws.len() == 100_000 && (mean - 4.0).abs() <= 3.0 * sigma && (var - expected_var).abs() <= 0.1 * expected_var,
        format!("mean {mean:.5} (3 sigma {:.1e}), variance {var:.3e} vs {expected_var:.1e}", 3.0 * sigma),
    ))
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name);
    let gray = synthetic_specimen(120, 4)?;
    let truth = make_phantom(&gray, PHASE_MAX)?;
    let probe = make_probe(&ProbeSpec::top_hat(30, 30.0))?;
    let geom = raster_geometry(120, 30, 30)?;
    let real = simulate_scan(&truth, &probe, &geom, Provenance::Real)?;
    let real = add_poisson_noise(&real, &NoiseSpec { photon_scale: 1e4, seed: 1 })?;
    pta::write_complex(&path("init.pta"), &smooth_perturbation(&truth, 0.3))?;
    pta::write_complex(&path("probe.pta"), &probe)?;
    ptd::write(&path("real.ptd"), &real)?;

    let run = |out: &Path| -> std::io::Result<bool> {
        let status = Command::new(env!("CARGO_BIN_EXE_ptyremix"))
            .arg("remix")
            .args(["--init".as_ref(), path("init.pta").as_os_str()])
            .args(["--probe".as_ref(), path("probe.pta").as_os_str()])
            .args(["--data".as_ref(), path("real.ptd").as_os_str()])
            .args(["--step", "30", "--oversample", "3", "--weight", "20", "--w-decay", "0.5"])
            .args(["--outer", "2", "--sweeps", "40", "--order", "shuffle", "--seed", "7"])
            .args(["-o".as_ref(), out.as_os_str()])
            .status()?;
        Ok(status.success())
    };
    let ok = run(&path("a.pta"))? && run(&path("b.pta"))?;
    if !ok {
        return Ok((false, "remix exited with an error".into()));
    }
    let a = std::fs::read(path("a.pta"))?;
    let b = std::fs::read(path("b.pta"))?;
    Ok((a == b && !a.is_empty(), format!("{} bytes, identical {}", a.len(), a == b)))
}

fn random_pta(rng: &mut ChaCha8Rng) -> pta::PtaArray {
    let ndim = rng.random_range(0..=4);
    let dims: Vec<u64> = (0..ndim).map(|_| rng.random_range(0..6)).collect();
    let n = dims.iter().product::<u64>() as usize;
    let complex = rng.random_bool(0.5);
    let mut value = || {
        let x = f64::from_bits(rng.random::<u64>());
        if x.is_finite() { x } else { rng.random_range(-1e6..1e6) }
    };
    let data = if !complex {
        pta::PtaData::Real((0..n).map(|_| value()).collect())
    } else {
        pta::PtaData::Complex((0..n).map(|_| Complex64::new(value(), value())).collect())
    };
    pta::PtaArray { dims, data }
}

fn random_ptd(rng: &mut ChaCha8Rng) -> DiffractionStack {
    let s = rng.random_range(1..6);
    let count = rng.random_range(0..5);
    let records = (0..count)
        .map(|_| DiffractionRecord {
            position: Position { row: rng.random_range(0..1000), col: rng.random_range(0..1000) },
            provenance: if rng.random_bool(0.5) { Provenance::Real } else { Provenance::Simulated },
            intensity: RealField::from_fn(s, s, |_, _| rng.random_range(0.0..1e3)).unwrap(),
        })
        .collect();
    DiffractionStack::new(s, records).unwrap()
}

fn format_round_trips() -> Check {
    let dir = tempfile::tempdir()?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = 0;
    for _ in 0..1000 {
        pta::write(&a, &random_pta(&mut rng))?;
        pta::write(&b, &pta::read(&a)?)?;
        failures += usize::from(std::fs::read(&a)? != std::fs::read(&b)?);

        ptd::write(&a, &random_ptd(&mut rng))?;
        ptd::write(&b, &ptd::read(&a)?)?;
        failures += usize::from(std::fs::read(&a)? != std::fs::read(&b)?);
    }
    Ok((failures == 0, format!("1000 PTA + 1000 PTD trials, {failures} mismatches")))
}

fn main() -> ExitCode {
    let sc = scene();
    let criteria: Vec<Criterion> = vec![
        ("forward model", Box::new(forward_model)),
        ("ePIE fixed point", Box::new(|| epie_fixed_point(&sc))),
        ("ePIE at high overlap", Box::new(|| epie_overlap(&sc))),
        ("splice exactness", Box::new(|| splice_exactness(&sc))),
        ("weight limits", Box::new(|| weight_limits(&sc))),
        ("remix self-consistency", Box::new(|| self_consistency(&sc))),
        ("multi-round improvement", Box::new(|| multi_round(&sc))),
        ("Poisson statistics", Box::new(poisson_statistics)),
        ("CLI determinism", Box::new(cli_determinism)),
        ("format round trips", Box::new(format_round_trips)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("criterion {:>2} {} {name}: {detail}", k + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
