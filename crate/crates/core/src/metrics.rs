//! Objectives and reconstruction quality measures.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{ComplexField, RealField};
use crate::forward::exit_wave_into;
use crate::geometry::Position;
use crate::stack::{DiffractionRecord, DiffractionStack};

/// Pixels illuminated by a nonzero probe value at one or more scan positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    rows: usize,
    cols: usize,
    covered: Vec<bool>,
}

impl CoverageMap {
    pub fn new(rows: usize, cols: usize, probe: &ComplexField, positions: &[Position]) -> Result<Self> {
        let (pr, pc) = probe.shape();
        let mut covered = vec![false; rows * cols];
        for p in positions {
            if p.row + pr > rows || p.col + pc > cols {
                return Err(Error::Geometry(format!(
                    "window at ({}, {}) exceeds the {rows}x{cols} object",
                    p.row, p.col
                )));
            }
            for u in 0..pr {
                for v in 0..pc {
                    if probe.get(u, v).norm_sqr() > 0.0 {
                        covered[(p.row + u) * cols + p.col + v] = true;
                    }
                }
            }
        }
        Ok(Self { rows, cols, covered })
    }

    pub fn from_pixels(rows: usize, cols: usize, covered: Vec<bool>) -> Result<Self> {
        if covered.len() != rows * cols {
            return Err(Error::Dimension("coverage length does not match shape".into()));
        }
        Ok(Self { rows, cols, covered })
    }

    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            covered: self.covered.iter().map(|c| !c).collect(),
        }
    }

    pub fn pixels(&self) -> &[bool] {
        &self.covered
    }

    pub fn count(&self) -> usize {
        self.covered.iter().filter(|c| **c).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.covered.len() as f64
    }
}

/// Pixels over which phase errors are averaged.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Mask {
    #[default]
    Full,
    Coverage(CoverageMap),
}

impl Mask {
    fn selection(&self, rows: usize, cols: usize) -> Result<Vec<bool>> {
        match self {
            Mask::Full => Ok(vec![true; rows * cols]),
            Mask::Coverage(map) => {
                if (map.rows, map.cols) != (rows, cols) {
                    return Err(Error::Dimension(format!(
                        "mask is {}x{} but the field is {rows}x{cols}",
                        map.rows, map.cols
                    )));
                }
                Ok(map.covered.clone())
            }
        }
    }
}

/// Wraps an angle into (-pi, pi].
fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn masked_phase_pairs(
    recon: &ComplexField,
    target: &RealField,
    mask: &Mask,
) -> Result<Vec<(f64, f64)>> {
    if recon.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "reconstruction is {}x{} but the reference is {}x{}",
            recon.rows(),
            recon.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let sel = mask.selection(recon.rows(), recon.cols())?;
    let pairs: Vec<(f64, f64)> = recon
        .data()
        .iter()
        .zip(target.data())
        .zip(&sel)
        .filter(|(_, keep)| **keep)
        .map(|((z, t), _)| (z.arg(), *t))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Metric("mask selects no pixels".into()));
    }
    Ok(pairs)
}

fn check_phase_max(phase_max: f64) -> Result<()> {
    if !(phase_max.is_finite() && phase_max > 0.0) {
        return Err(Error::Metric(format!("phase_max must be positive, got {phase_max}")));
    }
    Ok(())
}

fn target_phase(truth_gray: &RealField, phase_max: f64) -> RealField {
    truth_gray.map(|g| g * phase_max).expect("finite gray times finite scale")
}

/// Global phase offset: circular mean of `arg(recon) - target` over the mask.
pub fn phase_offset(recon: &ComplexField, target: &RealField, mask: &Mask) -> Result<f64> {
    let pairs = masked_phase_pairs(recon, target, mask)?;
    let sum: Complex64 = pairs.iter().map(|(p, t)| Complex64::from_polar(1.0, p - t)).sum();
    Ok(sum.arg())
}

/// Mean squared wrapped phase error at a fixed offset, in units of `phase_max`.
pub fn mse_at_offset(
    recon: &ComplexField,
    truth_gray: &RealField,
    phase_max: f64,
    mask: &Mask,
    offset: f64,
) -> Result<f64> {
    check_phase_max(phase_max)?;
    let target = target_phase(truth_gray, phase_max);
    let pairs = masked_phase_pairs(recon, &target, mask)?;
    let sum: f64 = pairs
        .iter()
        .map(|(p, t)| (wrap(p - t - offset) / phase_max).powi(2))
        .sum();
    Ok(sum / pairs.len() as f64)
}

/// Phase MSE against a grayscale ground truth after removing the global phase.
///
/// The result is in normalised grayscale units (phase error divided by
/// `phase_max`).
pub fn aligned_mse(recon: &ComplexField, truth_gray: &RealField, phase_max: f64, mask: &Mask) -> Result<f64> {
    check_phase_max(phase_max)?;
    let target = target_phase(truth_gray, phase_max);
    let offset = phase_offset(recon, &target, mask)?;
    mse_at_offset(recon, truth_gray, phase_max, mask, offset)
}

/// [`aligned_mse`] between two reconstructions, using `reference`'s phase as truth.
pub fn aligned_mse_between(
    recon: &ComplexField,
    reference: &ComplexField,
    phase_max: f64,
    mask: &Mask,
) -> Result<f64> {
    check_phase_max(phase_max)?;
    let gray = reference.phase().map(|p| p / phase_max)?;
    aligned_mse(recon, &gray, phase_max, mask)
}

/// Anisotropic TV of a real image: sum of absolute forward differences, no wrap.
pub fn total_variation_real(image: &RealField) -> f64 {
    let (rows, cols) = image.shape();
    let mut tv = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let v = image.get(r, c);
            if c + 1 < cols {
                tv += (image.get(r, c + 1) - v).abs();
            }
            if r + 1 < rows {
                tv += (image.get(r + 1, c) - v).abs();
            }
        }
    }
    tv
}

/// Anisotropic TV of the phase map of `x`.
pub fn total_variation(x: &ComplexField) -> f64 {
    total_variation_real(&x.phase())
}

fn check_model(x: &ComplexField, probe: &ComplexField, stack: &DiffractionStack) -> Result<()> {
    if !probe.is_square() || probe.rows() != stack.probe_size() {
        return Err(Error::Dimension(format!(
            "probe is {}x{} but patterns are {2}x{2}",
            probe.rows(),
            probe.cols(),
            stack.probe_size()
        )));
    }
    let s = probe.rows();
    for rec in stack.records() {
        let p = rec.position;
        if p.row + s > x.rows() || p.col + s > x.cols() {
            return Err(Error::Dimension(format!(
                "window at ({}, {}) exceeds the {}x{} object",
                p.row,
                p.col,
                x.rows(),
                x.cols()
            )));
        }
    }
    Ok(())
}

/// Sums `per_pixel(model_intensity, measured)` over every pixel of every record.
fn sum_over_model(
    x: &ComplexField,
    probe: &ComplexField,
    stack: &DiffractionStack,
    per_pixel: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<f64> {
    check_model(x, probe, stack)?;
    let s = probe.rows();
    let per_record: Vec<f64> = stack
        .records()
        .par_iter()
        .map_init(
            || (Fft2::new(s, s), vec![Complex64::default(); s * s]),
            |(fft, buf), rec: &DiffractionRecord| {
                exit_wave_into(x, probe, rec.position, buf);
                fft.forward(buf);
                buf.iter()
                    .zip(rec.intensity.data())
                    .map(|(z, &d)| per_pixel(z.norm_sqr(), d))
                    .sum::<f64>()
            },
        )
        .collect();
    Ok(per_record.iter().sum())
}

/// `sum_i || d_i - |F(P_i x)|^2 ||_1`
pub fn l1_misfit(x: &ComplexField, probe: &ComplexField, stack: &DiffractionStack) -> Result<f64> {
    sum_over_model(x, probe, stack, |model, d| (d - model).abs())
}

/// Poisson negative log-likelihood data term, up to terms depending only on `d`:
/// `sum |F psi|^2 - 2 d log(|F psi| + eps)`.
pub fn poisson_nll(x: &ComplexField, probe: &ComplexField, stack: &DiffractionStack, eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Metric("zero guard must be positive".into()));
    }
    sum_over_model(x, probe, stack, |model, d| model - 2.0 * d * (model.sqrt() + eps).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub aligned_mse: f64,
    #[serde(rename = "tv")]
    pub tv_value: f64,
    pub poisson_nll: f64,
    pub l1_misfit: f64,
    pub coverage_fraction: f64,
}

/// All metrics for `recon` against `truth_gray` and the data in `stack`.
/// Coverage is taken from the stack positions and the probe support.
pub fn metric_report(
    recon: &ComplexField,
    truth_gray: &RealField,
    phase_max: f64,
    mask: &Mask,
    probe: &ComplexField,
    stack: &DiffractionStack,
    zero_guard: f64,
) -> Result<MetricReport> {
    let coverage = CoverageMap::new(recon.rows(), recon.cols(), probe, &stack.positions())?;
    let report = MetricReport {
        aligned_mse: aligned_mse(recon, truth_gray, phase_max, mask)?,
        tv_value: total_variation(recon),
        poisson_nll: poisson_nll(recon, probe, stack, zero_guard)?,
        l1_misfit: l1_misfit(recon, probe, stack)?,
        coverage_fraction: coverage.fraction(),
    };
    for (name, v) in [
        ("aligned_mse", report.aligned_mse),
        ("tv", report.tv_value),
        ("poisson_nll", report.poisson_nll),
        ("l1_misfit", report.l1_misfit),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("metric {name} is {v}")));
        }
    }
    Ok(report)
}
