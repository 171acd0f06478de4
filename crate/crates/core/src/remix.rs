//! Oversample-and-splice refinement.
//!
//! An initial reconstruction is re-imaged on a dense raster, the measured
//! patterns replace the simulated ones at their own positions, and ePIE runs
//! on the mixture with simulated records down-weighted by `w`. The result can
//! be fed back as the next initial estimate.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::config::RemixConfig;
use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};
use crate::forward::simulate_scan;
use crate::geometry::{raster_geometry, ScanGeometry};
use crate::metrics::{aligned_mse, l1_misfit, Mask};
use crate::solver::{run_epie, EpieOptions, EpieResult};
use crate::stack::{DiffractionStack, Provenance};

/// Dense raster with step `step / oversample` over the same object.
pub fn oversampled_geometry(real_geom: &ScanGeometry, oversample: usize) -> Result<ScanGeometry> {
    if oversample == 0 {
        return Err(Error::Config("oversampling ratio must be >= 1".into()));
    }
    let step = real_geom.step();
    if !step.is_multiple_of(oversample) {
        return Err(Error::Config(format!(
            "scan step {step} is not divisible by oversampling ratio {oversample}"
        )));
    }
    let dense = raster_geometry(real_geom.object_size(), real_geom.probe_size(), step / oversample)?;
    if let Some(p) = real_geom.positions().iter().find(|p| !dense.contains(**p)) {
        return Err(Error::Config(format!(
            "real position ({}, {}) is not on the step-{} grid",
            p.row,
            p.col,
            dense.step()
        )));
    }
    Ok(dense)
}

/// Replaces simulated records with real ones wherever the positions coincide.
///
/// The output follows `simulated`'s order; substituted records are tagged
/// [`Provenance::Real`] and carry the real intensities unchanged.
pub fn splice(real: &DiffractionStack, simulated: &DiffractionStack) -> Result<DiffractionStack> {
    if real.probe_size() != simulated.probe_size() {
        return Err(Error::Splice(format!(
            "real patterns are {0}x{0}, simulated are {1}x{1}",
            real.probe_size(),
            simulated.probe_size()
        )));
    }
    let mut by_position = HashMap::with_capacity(real.len());
    for rec in real.records() {
        if by_position.insert(rec.position, rec).is_some() {
            return Err(Error::Splice(format!(
                "real stack has two records at ({}, {})",
                rec.position.row, rec.position.col
            )));
        }
    }
    let mut used = 0;
    let records = simulated
        .records()
        .iter()
        .map(|sim| match by_position.get(&sim.position) {
            Some(real_rec) => {
                used += 1;
                let mut rec = (*real_rec).clone();
                rec.provenance = Provenance::Real;
                rec
            }
            None => {
                let mut rec = sim.clone();
                rec.provenance = Provenance::Simulated;
                rec
            }
        })
        .collect();
    if used != real.len() {
        let missing = real
            .records()
            .iter()
            .find(|r| !simulated.records().iter().any(|s| s.position == r.position))
            .map(|r| r.position)
            .expect("an unmatched real record exists");
        return Err(Error::Splice(format!(
            "real position ({}, {}) is missing from the simulated grid",
            missing.row, missing.col
        )));
    }
    DiffractionStack::new(simulated.probe_size(), records)
}

pub fn flat_object(size: usize) -> Result<ComplexField> {
    ComplexField::filled(size, size, Complex64::new(1.0, 0.0))
}

struct Round {
    epie: EpieResult,
    mixed: DiffractionStack,
}

fn remix_round(
    init: &ComplexField,
    probe: &ComplexField,
    real: &DiffractionStack,
    real_geom: &ScanGeometry,
    cfg: &RemixConfig,
    weight: f64,
    seed: u64,
) -> Result<Round> {
    let t = real_geom.object_size();
    if init.shape() != (t, t) {
        return Err(Error::Dimension(format!(
            "initial estimate is {}x{} but the scan covers {t}x{t}",
            init.rows(),
            init.cols()
        )));
    }
    let dense = oversampled_geometry(real_geom, cfg.oversample)?;
    let simulated = simulate_scan(init, probe, &dense, Provenance::Simulated)?;
    let mixed = splice(real, &simulated)?;
    let (alpha_real, alpha_sim) = cfg.step_sizes(weight);
    let opts = EpieOptions {
        sweeps: cfg.epie_sweeps,
        order: cfg.epie_order,
        seed,
        alpha_real,
        alpha_sim,
        zero_guard: cfg.zero_guard,
        stop_tol: cfg.stop_tol,
    };
    let epie = run_epie(&flat_object(t)?, probe, &mixed, &opts)?;
    Ok(Round { epie, mixed })
}

/// One oversample, splice and weighted-ePIE pass starting from a flat object.
pub fn remix_once(
    init: &ComplexField,
    probe: &ComplexField,
    real: &DiffractionStack,
    real_geom: &ScanGeometry,
    cfg: &RemixConfig,
) -> Result<ComplexField> {
    cfg.validate()?;
    Ok(remix_round(init, probe, real, real_geom, cfg, cfg.weight, cfg.seed)?.epie.object)
}

/// Ground truth used to score rounds.
#[derive(Debug, Clone)]
pub struct Truth {
    pub gray: RealField,
    pub phase_max: f64,
    pub mask: Mask,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: usize,
    pub weight: f64,
    pub sweeps_run: usize,
    pub final_update_norm: f64,
    /// Present only when a ground truth was supplied.
    pub aligned_mse: Option<f64>,
    /// L1 misfit of the round's reconstruction on the real records.
    pub real_l1_misfit: f64,
    /// L1 misfit on the simulated records the round was fitted to.
    pub simulated_l1_misfit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RemixReport {
    pub rounds: Vec<RoundReport>,
}

#[derive(Debug, Clone)]
pub struct RemixOutcome {
    pub object: ComplexField,
    pub report: RemixReport,
}

/// Repeats [`remix_once`] `outer_iters` times, feeding each reconstruction
/// back as the next initial estimate and multiplying `w` by `w_decay`.
///
/// Round `r` seeds its ePIE ordering with `seed + r`.
pub fn remix_pipeline(
    init: &ComplexField,
    probe: &ComplexField,
    real: &DiffractionStack,
    real_geom: &ScanGeometry,
    cfg: &RemixConfig,
    truth: Option<&Truth>,
) -> Result<RemixOutcome> {
    cfg.validate()?;
    let mut current = init.clone();
    let mut weight = cfg.weight;
    let mut report = RemixReport::default();
    for round in 0..cfg.outer_iters {
        let seed = cfg.seed.wrapping_add(round as u64);
        let Round { epie, mixed } = remix_round(&current, probe, real, real_geom, cfg, weight, seed)?;
        let aligned = truth
            .map(|t| aligned_mse(&epie.object, &t.gray, t.phase_max, &t.mask))
            .transpose()?;
        let real_l1 = if real.is_empty() { 0.0 } else { l1_misfit(&epie.object, probe, real)? };
        let sim = mixed.filter_provenance(Provenance::Simulated);
        let sim_l1 = if sim.is_empty() { 0.0 } else { l1_misfit(&epie.object, probe, &sim)? };
        report.rounds.push(RoundReport {
            round: round + 1,
            weight,
            sweeps_run: epie.sweeps_run,
            final_update_norm: epie.final_update_norm,
            aligned_mse: aligned,
            real_l1_misfit: real_l1,
            simulated_l1_misfit: sim_l1,
        });
        current = epie.object;
        weight *= cfg.w_decay;
    }
    Ok(RemixOutcome { object: current, report })
}
