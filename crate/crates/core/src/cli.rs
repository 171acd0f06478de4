//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 I/O, 4 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EpieOrder, RemixConfig};
use crate::error::Error;
use crate::field::{ComplexField, RealField};
use crate::forward::{
    add_poisson_noise, make_phantom, make_probe, simulate_scan, synthetic_specimen, NoiseSpec,
    ProbeProfile, ProbeSpec,
};
use crate::geometry::{raster_geometry, ScanGeometry};
use crate::io::{self, pta, ptd, positions, run_config::{MaskKind, RunConfig}};
use crate::metrics::{aligned_mse, metric_report, CoverageMap, Mask};
use crate::remix::{flat_object, remix_pipeline, RemixReport, Truth};
use crate::solver::{run_epie, EpieOptions};
use crate::stack::Provenance;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 3,
            Error::NonFinite(_) => 4,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ptyremix", version, about = "Ptychography simulation, ePIE and oversample-and-splice refinement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderArg {
    Raster,
    Shuffle,
}

impl From<OrderArg> for EpieOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Raster => EpieOrder::Raster,
            OrderArg::Shuffle => EpieOrder::RandomShuffle,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    TopHat,
    GaussianEdge,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProvenanceArg {
    Real,
    Simulated,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MaskArg {
    Full,
    Coverage,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RenderMode {
    Phase,
    Amplitude,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum SweepParam {
    Weight,
    Oversample,
    /// Values are real scan steps in pixels.
    Overlap,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a grayscale PNG (or a generated specimen) into a phase-only object.
    Phantom {
        #[arg(long, conflicts_with = "synthetic")]
        image: Option<PathBuf>,
        /// Generate a SIZE x SIZE synthetic specimen instead of reading a PNG.
        #[arg(long, value_name = "SIZE")]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        phase_max: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a disk probe.
    Probe {
        #[arg(long)]
        size: usize,
        #[arg(long)]
        diameter: f64,
        #[arg(long, value_enum, default_value_t = ProfileArg::TopHat)]
        profile: ProfileArg,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Raster scan positions as CSV.
    Scan {
        #[arg(long)]
        object_size: usize,
        #[arg(long)]
        probe_size: usize,
        #[arg(long)]
        step: usize,
        /// Defaults to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate noise-free diffraction patterns.
    Simulate {
        #[arg(long)]
        object: PathBuf,
        #[arg(long)]
        probe: PathBuf,
        #[arg(long)]
        positions: PathBuf,
        #[arg(long, value_enum, default_value_t = ProvenanceArg::Real)]
        provenance: ProvenanceArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Apply Poisson noise to a diffraction stack.
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        photon_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Plain ePIE reconstruction.
    Epie {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        probe: PathBuf,
        /// Starting object; a flat object of --object-size when omitted.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        object_size: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        sweeps: usize,
        #[arg(long, value_enum, default_value_t = OrderArg::Shuffle)]
        order: OrderArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-12)]
        zero_guard: f64,
        #[arg(long, default_value_t = 0.0)]
        stop_tol: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Oversample-and-splice refinement of an initial estimate.
    Remix {
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        probe: PathBuf,
        /// Real diffraction data (PTD).
        #[arg(long)]
        data: PathBuf,
        /// Real scan step in pixels.
        #[arg(long)]
        step: usize,
        #[arg(long, default_value_t = 3)]
        oversample: usize,
        #[arg(long, default_value_t = 20.0)]
        weight: f64,
        #[arg(long, default_value_t = 1.0)]
        w_decay: f64,
        #[arg(long, default_value_t = 1)]
        outer: usize,
        #[arg(long, default_value_t = 2000)]
        sweeps: usize,
        #[arg(long, value_enum, default_value_t = OrderArg::Shuffle)]
        order: OrderArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-12)]
        zero_guard: f64,
        #[arg(long, default_value_t = 0.0)]
        stop_tol: f64,
        /// Ground truth for per-round scoring.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        phase_max: f64,
        #[arg(long, value_enum, default_value_t = MaskArg::Full)]
        mask: MaskArg,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print quality metrics as JSON.
    Metrics {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        probe: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        phase_max: f64,
        #[arg(long, value_enum, default_value_t = MaskArg::Full)]
        mask: MaskArg,
        #[arg(long, default_value_t = 1e-12)]
        zero_guard: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render phase or amplitude of a complex field as PNG.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = RenderMode::Phase)]
        mode: RenderMode,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the configured pipeline once per parameter value and tabulate MSE.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Defaults to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

pub fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Phantom { image, synthetic, seed, phase_max, output } => {
            let gray = match (image, synthetic) {
                (Some(path), None) => io::png::read_gray(&path)?,
                (None, Some(size)) => synthetic_specimen(size, seed)?,
                _ => return Err(usage("exactly one of --image or --synthetic is required")),
            };
            if !gray.is_square() {
                return Err(usage(format!("image must be square, got {}x{}", gray.rows(), gray.cols())));
            }
            pta::write_complex(&output, &make_phantom(&gray, phase_max)?)?;
        }
        Command::Probe { size, diameter, profile, sigma, amplitude, output } => {
            let profile = match (profile, sigma) {
                (ProfileArg::TopHat, _) => ProbeProfile::TopHat,
                (ProfileArg::GaussianEdge, Some(sigma)) => ProbeProfile::GaussianEdge { sigma },
                (ProfileArg::GaussianEdge, None) => return Err(usage("--sigma is required for gaussian-edge")),
            };
            let probe = make_probe(&ProbeSpec { size, diameter, profile, amplitude })?;
            pta::write_complex(&output, &probe)?;
        }
        Command::Scan { object_size, probe_size, step, output } => {
            let geom = raster_geometry(object_size, probe_size, step)?;
            match output {
                Some(path) => positions::write(&path, geom.positions())?,
                None => print!("{}", positions::to_csv(geom.positions())),
            }
        }
        Command::Simulate { object, probe, positions: pos_path, provenance, output } => {
            let object = read_square(&object, "object")?;
            let probe = read_square(&probe, "probe")?;
            let positions = positions::read(&pos_path)?;
            let geom = ScanGeometry::new(object.rows(), probe.rows(), 1, positions)?;
            let provenance = match provenance {
                ProvenanceArg::Real => Provenance::Real,
                ProvenanceArg::Simulated => Provenance::Simulated,
            };
            ptd::write(&output, &simulate_scan(&object, &probe, &geom, provenance)?)?;
        }
        Command::Noise { input, photon_scale, seed, output } => {
            let stack = ptd::read(&input)?;
            ptd::write(&output, &add_poisson_noise(&stack, &NoiseSpec { photon_scale, seed })?)?;
        }
        Command::Epie { data, probe, init, object_size, sweeps, order, seed, alpha, zero_guard, stop_tol, output } => {
            let stack = ptd::read(&data)?;
            let probe = read_square(&probe, "probe")?;
            let x0 = match (init, object_size) {
                (Some(path), _) => read_square(&path, "init")?,
                (None, Some(t)) => flat_object(t)?,
                (None, None) => return Err(usage("either --init or --object-size is required")),
            };
            let opts = EpieOptions {
                sweeps,
                order: order.into(),
                seed,
                alpha_real: alpha,
                alpha_sim: alpha,
                zero_guard,
                stop_tol,
            };
            let result = run_epie(&x0, &probe, &stack, &opts)?;
            pta::write_complex(&output, &result.object)?;
            eprintln!("epie: {} sweeps, final relative update {:.3e}", result.sweeps_run, result.final_update_norm);
        }
        Command::Remix {
            init, probe, data, step, oversample, weight, w_decay, outer, sweeps, order, seed, alpha,
            zero_guard, stop_tol, truth, phase_max, mask, output, report,
        } => {
            let cfg = RemixConfig {
                oversample,
                weight,
                w_decay,
                outer_iters: outer,
                epie_sweeps: sweeps,
                epie_order: order.into(),
                seed,
                zero_guard,
                alpha_base: alpha,
                stop_tol,
            };
            cfg.validate()?;
            if oversample == 0 || step % oversample != 0 {
                return Err(usage(format!(
                    "--step {step} must be divisible by --oversample {oversample} so real positions lie on the oversampled grid"
                )));
            }
            let init = read_square(&init, "init")?;
            let probe = read_square(&probe, "probe")?;
            let real = ptd::read(&data)?;
            let geom = ScanGeometry::new(init.rows(), probe.rows(), step, real.positions())?;
            let truth = truth
                .map(|path| -> CliResult<Truth> {
                    let (_, gray) = load_truth(&path, phase_max)?;
                    Ok(Truth { gray, phase_max, mask: build_mask(mask, &geom, &probe)? })
                })
                .transpose()?;
            let outcome = remix_pipeline(&init, &probe, &real, &geom, &cfg, truth.as_ref())?;
            pta::write_complex(&output, &outcome.object)?;
            if let Some(path) = report {
                write_json(&path, &RemixRun { config: &cfg, report: &outcome.report })?;
            }
        }
        Command::Metrics { recon, truth, probe, data, phase_max, mask, zero_guard, output } => {
            let recon = read_square(&recon, "recon")?;
            let (_, gray) = load_truth(&truth, phase_max)?;
            let probe = read_square(&probe, "probe")?;
            let stack = ptd::read(&data)?;
            let geom = ScanGeometry::new(recon.rows(), probe.rows(), 1, stack.positions())?;
            let mask = build_mask(mask, &geom, &probe)?;
            let report = metric_report(&recon, &gray, phase_max, &mask, &probe, &stack, zero_guard)?;
            let json = serde_json::to_string_pretty(&report).expect("report serialises");
            match output {
                Some(path) => io::write_file(&path, json.as_bytes())?,
                None => println!("{json}"),
            }
        }
        Command::Render { input, mode, output } => {
            let field = pta::read_complex(&input)?;
            let img = match mode {
                RenderMode::Phase => io::png::render_phase(&field),
                RenderMode::Amplitude => io::png::render_amplitude(&field),
            };
            io::png::write(&output, &img)?;
        }
        Command::Sweep { config, param, values, output } => {
            let base = RunConfig::load(&config)?;
            let csv = sweep(&base, param, &values)?;
            match output {
                Some(path) => io::write_file(&path, csv.as_bytes())?,
                None => {
                    let mut out = std::io::stdout().lock();
                    out.write_all(csv.as_bytes()).map_err(Error::from)?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct RemixRun<'a> {
    config: &'a RemixConfig,
    #[serde(flatten)]
    report: &'a RemixReport,
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError { code: 4, message: format!("cannot serialise report: {e}") })?;
    io::write_file(path, text.as_bytes())?;
    Ok(())
}

fn read_square(path: &Path, what: &str) -> CliResult<ComplexField> {
    let field = pta::read_complex(path)?;
    if !field.is_square() {
        return Err(usage(format!("{what} must be square, got {}x{}", field.rows(), field.cols())));
    }
    Ok(field)
}

fn build_mask(kind: MaskArg, geom: &ScanGeometry, probe: &ComplexField) -> crate::Result<Mask> {
    Ok(match kind {
        MaskArg::Full => Mask::Full,
        MaskArg::Coverage => {
            let t = geom.object_size();
            Mask::Coverage(CoverageMap::new(t, t, probe, geom.positions())?)
        }
    })
}

/// Ground truth as `(object, gray)`. A real PTA is a grayscale image; a
/// complex PTA is a phase-only object whose phase is divided by `phase_max`.
pub fn load_truth(path: &Path, phase_max: f64) -> crate::Result<(ComplexField, RealField)> {
    let array = pta::read(path)?;
    match array.dtype() {
        pta::DType::Real => {
            let gray = pta::to_real_field(array)?;
            Ok((make_phantom(&gray, phase_max)?, gray))
        }
        pta::DType::Complex => {
            let object = pta::to_complex_field(array)?;
            let gray = object.phase().map(|p| {
                let p = if p < 0.0 { p + 2.0 * std::f64::consts::PI } else { p };
                p / phase_max
            })?;
            if let Some(g) = gray.data().iter().find(|g| **g > 1.0 + 1e-9) {
                return Err(Error::Validation(format!(
                    "truth phase exceeds phase_max (normalised value {g})"
                )));
            }
            let gray = gray.map(|g| g.min(1.0))?;
            Ok((object, gray))
        }
    }
}

/// Simulates the real scan described by `cfg`, refines `cfg.init` and scores
/// the result. Returns the reconstruction and its aligned MSE.
pub fn run_configured(cfg: &RunConfig) -> crate::Result<(ComplexField, RemixReport, f64)> {
    cfg.validate()?;
    let (truth_obj, gray) = load_truth(&cfg.truth, cfg.phase_max)?;
    if !truth_obj.is_square() {
        return Err(Error::Dimension("truth must be square".into()));
    }
    let probe = make_probe(&cfg.probe.spec()?)?;
    let geom = raster_geometry(truth_obj.rows(), probe.rows(), cfg.step)?;
    let mut real = simulate_scan(&truth_obj, &probe, &geom, Provenance::Real)?;
    if let Some(noise) = cfg.noise {
        real = add_poisson_noise(&real, &noise.into())?;
    }
    let init = pta::read_complex(&cfg.init)?;
    let mask = match cfg.mask {
        MaskKind::Full => Mask::Full,
        MaskKind::Coverage => {
            let t = geom.object_size();
            Mask::Coverage(CoverageMap::new(t, t, &probe, geom.positions())?)
        }
    };
    let truth = Truth { gray: gray.clone(), phase_max: cfg.phase_max, mask: mask.clone() };
    let outcome = remix_pipeline(&init, &probe, &real, &geom, &cfg.remix, Some(&truth))?;
    let mse = aligned_mse(&outcome.object, &gray, cfg.phase_max, &mask)?;
    if !mse.is_finite() {
        return Err(Error::NonFinite("aligned MSE".into()));
    }
    Ok((outcome.object, outcome.report, mse))
}

fn apply_sweep_value(base: &RunConfig, param: SweepParam, raw: &str) -> crate::Result<RunConfig> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("sweep value '{raw}' is not a number")))?;
    let as_count = || -> crate::Result<usize> {
        if value >= 1.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(Error::Config(format!("sweep value '{raw}' must be a positive integer")))
        }
    };
    let mut cfg = base.clone();
    match param {
        SweepParam::Weight => cfg.remix.weight = value,
        SweepParam::Oversample => cfg.remix.oversample = as_count()?,
        SweepParam::Overlap => cfg.step = as_count()?,
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one pipeline per value (in parallel) and returns the CSV table
/// `value,aligned_mse,runtime_s,status`. Failed runs are recorded, not fatal.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[String]) -> crate::Result<String> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if let Some(dir) = &base.output_dir {
        std::fs::create_dir_all(dir)?;
    }
    let label = match param {
        SweepParam::Weight => "weight",
        SweepParam::Oversample => "oversample",
        SweepParam::Overlap => "overlap",
    };
    let rows: Vec<String> = values
        .par_iter()
        .enumerate()
        .map(|(k, raw)| {
            let start = Instant::now();
            let outcome = apply_sweep_value(base, param, raw).and_then(|cfg| {
                let (object, _, mse) = run_configured(&cfg)?;
                if let Some(dir) = &cfg.output_dir {
                    pta::write_complex(&dir.join(format!("{label}_{k}.pta")), &object)?;
                }
                Ok(mse)
            });
            let runtime = start.elapsed().as_secs_f64();
            match outcome {
                Ok(mse) => format!("{},{mse:e},{runtime:.3},ok", raw.trim()),
                Err(e) => format!("{},nan,{runtime:.3},\"error: {}\"", raw.trim(), e.to_string().replace('"', "'")),
            }
        })
        .collect();
    let mut csv = String::from("value,aligned_mse,runtime_s,status\n");
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    Ok(csv)
}
