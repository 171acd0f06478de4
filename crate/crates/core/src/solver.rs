//! Object-only ePIE with a known probe and per-provenance step sizes.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::EpieOrder;
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::ComplexField;
use crate::forward::exit_wave_into;
use crate::stack::{DiffractionRecord, DiffractionStack, Provenance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpieOptions {
    /// Maximum number of full passes over the stack.
    pub sweeps: usize,
    pub order: EpieOrder,
    pub seed: u64,
    /// Step size for records tagged [`Provenance::Real`].
    pub alpha_real: f64,
    /// Step size for records tagged [`Provenance::Simulated`].
    pub alpha_sim: f64,
    /// Added to `|F psi|` before dividing in the modulus projection.
    pub zero_guard: f64,
    /// Stop once a sweep changes the object by less than this relative L2 amount.
    pub stop_tol: f64,
}

impl Default for EpieOptions {
    fn default() -> Self {
        Self {
            sweeps: 2000,
            order: EpieOrder::RandomShuffle,
            seed: 0,
            alpha_real: 1.0,
            alpha_sim: 1.0,
            zero_guard: 1e-12,
            stop_tol: 0.0,
        }
    }
}

impl EpieOptions {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps < 1 {
            return Err(Error::Config("ePIE needs at least one sweep".into()));
        }
        if !(self.zero_guard.is_finite() && self.zero_guard > 0.0) {
            return Err(Error::Config("zero_guard must be positive".into()));
        }
        for (name, a) in [("alpha_real", self.alpha_real), ("alpha_sim", self.alpha_sim)] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {a}")));
            }
        }
        if !(self.stop_tol.is_finite() && self.stop_tol >= 0.0) {
            return Err(Error::Config("stop_tol must be >= 0".into()));
        }
        Ok(())
    }

    fn alpha(&self, provenance: Provenance) -> f64 {
        match provenance {
            Provenance::Real => self.alpha_real,
            Provenance::Simulated => self.alpha_sim,
        }
    }
}

/// Mutable state of one ePIE run.
#[derive(Debug, Clone)]
pub struct EpieState {
    object: ComplexField,
    sweeps: usize,
    last_update_norm: f64,
    rng: ChaCha8Rng,
}

impl EpieState {
    pub fn new(x0: ComplexField, seed: u64) -> Self {
        Self {
            object: x0,
            sweeps: 0,
            last_update_norm: f64::INFINITY,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn object(&self) -> &ComplexField {
        &self.object
    }

    pub fn into_object(self) -> ComplexField {
        self.object
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn last_update_norm(&self) -> f64 {
        self.last_update_norm
    }
}

#[derive(Debug, Clone)]
pub struct EpieResult {
    pub object: ComplexField,
    pub sweeps_run: usize,
    pub final_update_norm: f64,
}

/// Planned per-pattern update for one probe.
pub struct Epie {
    probe: ComplexField,
    /// `conj(P) / max |P|^2`
    weight: Vec<Complex64>,
    opts: EpieOptions,
    fft: Fft2,
    psi: Vec<Complex64>,
    spectrum: Vec<Complex64>,
}

impl Epie {
    pub fn new(probe: &ComplexField, opts: EpieOptions) -> Result<Self> {
        opts.validate()?;
        if !probe.is_square() {
            return Err(Error::Dimension(format!(
                "probe must be square, got {}x{}",
                probe.rows(),
                probe.cols()
            )));
        }
        let max_power = probe.data().iter().map(|p| p.norm_sqr()).fold(0.0, f64::max);
        if max_power == 0.0 {
            return Err(Error::DegenerateProbe);
        }
        let s = probe.rows();
        Ok(Self {
            probe: probe.clone(),
            weight: probe.data().iter().map(|p| p.conj() / max_power).collect(),
            opts,
            fft: Fft2::new(s, s),
            psi: vec![Complex64::default(); s * s],
            spectrum: vec![Complex64::default(); s * s],
        })
    }

    pub fn options(&self) -> &EpieOptions {
        &self.opts
    }

    fn probe_size(&self) -> usize {
        self.probe.rows()
    }

    fn check_record(&self, object: &ComplexField, rec: &DiffractionRecord) -> Result<()> {
        let s = self.probe_size();
        if rec.intensity.shape() != (s, s) {
            return Err(Error::Dimension(format!(
                "pattern is {}x{}, probe is {s}x{s}",
                rec.intensity.rows(),
                rec.intensity.cols()
            )));
        }
        let p = rec.position;
        if p.row + s > object.rows() || p.col + s > object.cols() {
            return Err(Error::Geometry(format!(
                "window at ({}, {}) exceeds the {}x{} object",
                p.row,
                p.col,
                object.rows(),
                object.cols()
            )));
        }
        Ok(())
    }

    /// Applies one modulus-projection update to the patch under `rec`.
    /// Bounds must already be checked.
    fn update_in_place(&mut self, object: &mut ComplexField, rec: &DiffractionRecord) {
        let alpha = self.opts.alpha(rec.provenance);
        if alpha == 0.0 {
            return;
        }
        let s = self.probe_size();
        let eps = self.opts.zero_guard;
        exit_wave_into(object, &self.probe, rec.position, &mut self.psi);
        self.spectrum.copy_from_slice(&self.psi);
        self.fft.forward(&mut self.spectrum);
        for (z, &d) in self.spectrum.iter_mut().zip(rec.intensity.data()) {
            *z *= d.sqrt() / (z.norm() + eps);
        }
        self.fft.inverse(&mut self.spectrum);

        let t = object.cols();
        let pos = rec.position;
        let data = object.data_mut();
        for u in 0..s {
            let base = (pos.row + u) * t + pos.col;
            let row = &mut data[base..base + s];
            let off = u * s;
            for (v, x) in row.iter_mut().enumerate() {
                let k = off + v;
                *x += self.weight[k] * (self.spectrum[k] - self.psi[k]) * alpha;
            }
        }
    }

    /// Single-record update on a copy of `object`.
    pub fn pattern_update(&mut self, object: &ComplexField, rec: &DiffractionRecord) -> Result<ComplexField> {
        self.check_record(object, rec)?;
        let mut out = object.clone();
        self.update_in_place(&mut out, rec);
        out.check_finite()?;
        Ok(out)
    }

    /// One pass over every record. Returns the relative L2 change of the object.
    pub fn sweep(&mut self, state: &mut EpieState, stack: &DiffractionStack) -> Result<f64> {
        for rec in stack.records() {
            self.check_record(&state.object, rec)?;
        }
        let mut order: Vec<usize> = (0..stack.len()).collect();
        if self.opts.order == EpieOrder::RandomShuffle {
            order.shuffle(&mut state.rng);
        }
        let before = state.object.data().to_vec();
        for &k in &order {
            self.update_in_place(&mut state.object, &stack.records()[k]);
        }
        state.object.check_finite()?;
        let (mut diff, mut norm) = (0.0, 0.0);
        for (a, b) in state.object.data().iter().zip(&before) {
            diff += (a - b).norm_sqr();
            norm += b.norm_sqr();
        }
        let rel = if norm > 0.0 { (diff / norm).sqrt() } else { diff.sqrt() };
        state.sweeps += 1;
        state.last_update_norm = rel;
        Ok(rel)
    }
}

/// ePIE update of the object from a single diffraction record.
///
/// Only the `S x S` window at the record position changes.
pub fn epie_pattern_update(
    x: &ComplexField,
    probe: &ComplexField,
    record: &DiffractionRecord,
    opts: &EpieOptions,
) -> Result<ComplexField> {
    Epie::new(probe, *opts)?.pattern_update(x, record)
}

/// Runs ePIE sweeps from `x0` until the sweep budget or `stop_tol` is reached.
pub fn run_epie(
    x0: &ComplexField,
    probe: &ComplexField,
    stack: &DiffractionStack,
    opts: &EpieOptions,
) -> Result<EpieResult> {
    if stack.is_empty() {
        return Err(Error::Validation("cannot run ePIE on an empty stack".into()));
    }
    if stack.probe_size() != probe.rows() || !probe.is_square() {
        return Err(Error::Dimension(format!(
            "stack patterns are {0}x{0} but the probe is {1}x{2}",
            stack.probe_size(),
            probe.rows(),
            probe.cols()
        )));
    }
    let mut engine = Epie::new(probe, *opts)?;
    let mut state = EpieState::new(x0.clone(), opts.seed);
    for _ in 0..opts.sweeps {
        let rel = engine.sweep(&mut state, stack)?;
        if rel < opts.stop_tol {
            break;
        }
    }
    Ok(EpieResult {
        sweeps_run: state.sweeps,
        final_update_norm: state.last_update_norm,
        object: state.into_object(),
    })
}
