//! Far-field ptychography forward model.
//!
//! An exit wave is the probe times the object patch under it; the detector
//! records the squared modulus of its orthonormal 2-D DFT.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{ComplexField, RealField};
use crate::geometry::{Position, ScanGeometry};
use crate::stack::{DiffractionRecord, DiffractionStack, Provenance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeProfile {
    TopHat,
    /// Flat core with a Gaussian rolloff of width `sigma` pixels inside the rim.
    GaussianEdge { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    pub size: usize,
    pub diameter: f64,
    pub profile: ProbeProfile,
    pub amplitude: f64,
}

impl ProbeSpec {
    pub fn top_hat(size: usize, diameter: f64) -> Self {
        Self { size, diameter, profile: ProbeProfile::TopHat, amplitude: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Validation("probe size must be at least 1".into()));
        }
        if !(self.diameter > 0.0 && self.diameter <= self.size as f64) {
            return Err(Error::Validation(format!(
                "probe diameter must lie in (0, {}], got {}",
                self.size, self.diameter
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::Validation("probe amplitude must be positive".into()));
        }
        if let ProbeProfile::GaussianEdge { sigma } = self.profile {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::Validation("gaussian edge sigma must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Poisson detector model: `photon_scale` expected counts per unit intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub photon_scale: f64,
    pub seed: u64,
}

/// Flat-phase disk centred on pixel `(S/2, S/2)`.
///
/// Pixel `(u, v)` is inside when its distance to the centre is at most
/// `diameter / 2`.
pub fn make_probe(spec: &ProbeSpec) -> Result<ComplexField> {
    spec.validate()?;
    let n = spec.size;
    let centre = (n / 2) as f64;
    let radius = spec.diameter / 2.0;
    ComplexField::from_fn(n, n, |u, v| {
        let rho = ((u as f64 - centre).powi(2) + (v as f64 - centre).powi(2)).sqrt();
        if rho > radius {
            return Complex64::default();
        }
        let rolloff = match spec.profile {
            ProbeProfile::TopHat => 1.0,
            ProbeProfile::GaussianEdge { sigma } => {
                let excess = (rho - (radius - sigma)).max(0.0);
                (-excess * excess / (2.0 * sigma * sigma)).exp()
            }
        };
        Complex64::new(spec.amplitude * rolloff, 0.0)
    })
}

/// Phase-only object `exp(j * gray * phase_max)`.
pub fn make_phantom(gray: &RealField, phase_max: f64) -> Result<ComplexField> {
    if !phase_max.is_finite() {
        return Err(Error::Validation("phase_max must be finite".into()));
    }
    if let Some(g) = gray.data().iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::Validation(format!("gray value {g} outside [0, 1]")));
    }
    gray.map(|g| Complex64::from_polar(1.0, g * phase_max))
}

/// Deterministic grayscale test specimen in [0, 1].
///
/// A smooth background with overlapping ellipses of random level and a
/// band of fine stripes, standing in for natural images.
pub fn synthetic_specimen(size: usize, seed: u64) -> Result<RealField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as f64;
    struct Ellipse {
        cr: f64,
        cc: f64,
        ar: f64,
        ac: f64,
        cos: f64,
        sin: f64,
        level: f64,
    }
    let ellipses: Vec<Ellipse> = (0..14)
        .map(|_| {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            Ellipse {
                cr: rng.random_range(0.1..0.9) * n,
                cc: rng.random_range(0.1..0.9) * n,
                ar: rng.random_range(0.04..0.22) * n,
                ac: rng.random_range(0.04..0.22) * n,
                cos: theta.cos(),
                sin: theta.sin(),
                level: rng.random_range(-0.35..0.35),
            }
        })
        .collect();
    let fx: f64 = rng.random_range(1.0..2.5);
    let fy: f64 = rng.random_range(1.0..2.5);
    let stripe_row = rng.random_range(0.55..0.75) * n;
    RealField::from_fn(size, size, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let mut g = 0.5
            + 0.15 * (2.0 * std::f64::consts::PI * fx * x / n).sin()
                * (2.0 * std::f64::consts::PI * fy * y / n).cos();
        for e in &ellipses {
            let (dy, dx) = (y - e.cr, x - e.cc);
            let (ry, rx) = (dy * e.cos + dx * e.sin, -dy * e.sin + dx * e.cos);
            if (ry / e.ar).powi(2) + (rx / e.ac).powi(2) <= 1.0 {
                g += e.level;
            }
        }
        if (y - stripe_row).abs() < 0.06 * n {
            g += 0.1 * if (x as usize / 3).is_multiple_of(2) { 1.0 } else { -1.0 };
        }
        g.clamp(0.0, 1.0)
    })
}

fn check_window(object: &ComplexField, probe_size: usize, pos: Position) -> Result<()> {
    let (rows, cols) = object.shape();
    if pos.row + probe_size > rows || pos.col + probe_size > cols {
        return Err(Error::Geometry(format!(
            "window at ({}, {}) of size {probe_size} exceeds the {rows}x{cols} object",
            pos.row, pos.col
        )));
    }
    Ok(())
}

fn check_probe(probe: &ComplexField) -> Result<usize> {
    if !probe.is_square() {
        return Err(Error::Dimension(format!(
            "probe must be square, got {}x{}",
            probe.rows(),
            probe.cols()
        )));
    }
    Ok(probe.rows())
}

/// Writes `P * x[pos..pos+S]` into `out` without bounds validation.
pub(crate) fn exit_wave_into(
    object: &ComplexField,
    probe: &ComplexField,
    pos: Position,
    out: &mut [Complex64],
) {
    let s = probe.rows();
    let t = object.cols();
    let obj = object.data();
    for (u, (dst, p)) in out.chunks_exact_mut(s).zip(probe.data().chunks_exact(s)).enumerate() {
        let base = (pos.row + u) * t + pos.col;
        for ((d, &pv), &xv) in dst.iter_mut().zip(p).zip(&obj[base..base + s]) {
            *d = pv * xv;
        }
    }
}

pub fn exit_wave(object: &ComplexField, probe: &ComplexField, pos: Position) -> Result<ComplexField> {
    let s = check_probe(probe)?;
    check_window(object, s, pos)?;
    let mut buf = vec![Complex64::default(); s * s];
    exit_wave_into(object, probe, pos, &mut buf);
    ComplexField::new(s, s, buf)
}

/// `|F psi|^2` with the orthonormal DFT.
pub fn diffract(psi: &ComplexField) -> RealField {
    let mut fft = Fft2::new(psi.rows(), psi.cols());
    let mut buf = psi.data().to_vec();
    fft.forward(&mut buf);
    // Finite input stays finite under a unitary transform.
    RealField::new(psi.rows(), psi.cols(), buf.iter().map(|z| z.norm_sqr()).collect())
        .expect("intensity of a finite field is finite")
}

/// In-place: transforms `buf` and writes its squared modulus into `out`.
pub(crate) fn diffract_into(fft: &mut Fft2, buf: &mut [Complex64], out: &mut [f64]) {
    fft.forward(buf);
    for (o, z) in out.iter_mut().zip(buf.iter()) {
        *o = z.norm_sqr();
    }
}

/// One diffraction record per scan position, in geometry order.
pub fn simulate_scan(
    object: &ComplexField,
    probe: &ComplexField,
    geometry: &ScanGeometry,
    provenance: Provenance,
) -> Result<DiffractionStack> {
    let s = check_probe(probe)?;
    let t = geometry.object_size();
    if object.shape() != (t, t) {
        return Err(Error::Dimension(format!(
            "object is {}x{} but the geometry expects {t}x{t}",
            object.rows(),
            object.cols()
        )));
    }
    if geometry.probe_size() != s {
        return Err(Error::Dimension(format!(
            "probe is {s}x{s} but the geometry expects size {}",
            geometry.probe_size()
        )));
    }
    let records = geometry
        .positions()
        .par_iter()
        .map_init(
            || (Fft2::new(s, s), vec![Complex64::default(); s * s]),
            |(fft, buf), &pos| {
                exit_wave_into(object, probe, pos, buf);
                let mut intensity = vec![0.0; s * s];
                diffract_into(fft, buf, &mut intensity);
                RealField::new(s, s, intensity).map(|intensity| DiffractionRecord {
                    position: pos,
                    provenance,
                    intensity,
                })
            },
        )
        .collect::<Result<Vec<_>>>()?;
    DiffractionStack::new(s, records)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the Poisson draw of one detector pixel.
fn pixel_seed(seed: u64, record: usize, pixel: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ record as u64) ^ pixel as u64)
}

/// Replaces every pixel `d` with `Poisson(d * photon_scale) / photon_scale`.
///
/// Each draw is keyed by `(seed, record index, pixel index)`, so the result
/// does not depend on evaluation order.
pub fn add_poisson_noise(stack: &DiffractionStack, noise: &NoiseSpec) -> Result<DiffractionStack> {
    if !(noise.photon_scale.is_finite() && noise.photon_scale > 0.0) {
        return Err(Error::Validation(format!(
            "photon_scale must be positive, got {}",
            noise.photon_scale
        )));
    }
    let scale = noise.photon_scale;
    let records = stack
        .records()
        .par_iter()
        .enumerate()
        .map(|(k, rec)| {
            let noisy = rec
                .intensity
                .data()
                .iter()
                .enumerate()
                .map(|(p, &d)| {
                    let lambda = d * scale;
                    if lambda <= 0.0 {
                        return Ok(0.0);
                    }
                    let dist = Poisson::new(lambda).map_err(|e| {
                        Error::Validation(format!("cannot sample Poisson({lambda}): {e}"))
                    })?;
                    let mut rng = ChaCha8Rng::seed_from_u64(pixel_seed(noise.seed, k, p));
                    Ok(dist.sample(&mut rng) / scale)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(DiffractionRecord {
                position: rec.position,
                provenance: rec.provenance,
                intensity: RealField::new(rec.intensity.rows(), rec.intensity.cols(), noisy)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DiffractionStack::new(stack.probe_size(), records)
}
