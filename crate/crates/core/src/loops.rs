//! Loop functionals: energy, symplectic area, Fourier analysis, and the
//! area-energy equality characterization.
//!
//! A loop `z : R/2piZ -> R^{2n}` is expanded as `z(theta) = sum_m e^{m theta J} z_m`
//! with real coefficient vectors `z_m`. In these coefficients the energy
//! `E = (1/2) int |z'|^2` equals `pi sum m^2 |z_m|^2` and the symplectic area
//! `A = (1/2) int Omega[z, z']` equals `pi sum m |z_m|^2`, so
//! `E - A = pi sum m (m - 1) |z_m|^2 >= 0`, with equality exactly for harmonic
//! circles `z_0 + e^{theta J} z_1`.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symplinalg::{apply_j, omega, rotate_phase};

/// Default number of uniform samples on `[0, 2pi)`.
pub const DEFAULT_SAMPLES: usize = 256;
/// Default number of retained Fourier modes (`|m| <= M`).
pub const DEFAULT_MODES: usize = 100;

/// A 2pi-periodic loop in `R^{2n}` held as uniform samples plus Fourier
/// coefficients with respect to `e^{m theta J}`.
#[derive(Debug, Clone)]
pub struct FourierLoop {
    n: usize,
    samples: Vec<DVector<f64>>,
    /// Coefficients for m = -M..=M, stored at index `m + M`.
    coeffs: Vec<DVector<f64>>,
    m_max: usize,
}

impl FourierLoop {
    /// Analyze uniformly spaced samples `z(2 pi i / N)`. The discrete transform is
    /// taken per conjugate pair, where `e^{theta J}` acts as a unit-modulus complex
    /// multiplication.
    pub fn from_samples(samples: Vec<DVector<f64>>, m_max: usize) -> Result<Self> {
        let n_samp = samples.len();
        if n_samp < 8 {
            return Err(Error::TooFewSamples {
                got: n_samp,
                min: 8,
            });
        }
        let dim = samples[0].len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: dim,
            });
        }
        for s in &samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
        }
        let m_max = m_max.min((n_samp - 1) / 2);
        let n = dim / 2;
        let mut coeffs = vec![DVector::zeros(dim); 2 * m_max + 1];
        for (mi, c) in coeffs.iter_mut().enumerate() {
            let m = mi as isize - m_max as isize;
            for (i, s) in samples.iter().enumerate() {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n_samp as f64;
                let (sn, cs) = (m as f64 * theta).sin_cos();
                for a in 0..n {
                    let p = s[2 * a];
                    let q = s[2 * a + 1];
                    // (z_m)_a = (1/N) sum (p + iq) e^{-im theta}, split into re/im
                    c[2 * a] += p * cs + q * sn;
                    c[2 * a + 1] += q * cs - p * sn;
                }
            }
            *c /= n_samp as f64;
        }
        Ok(Self {
            n,
            samples,
            coeffs,
            m_max,
        })
    }

    /// Build a loop by sampling a closure at `n_samples` uniform angles.
    pub fn from_fn<F>(n_samples: usize, m_max: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> DVector<f64>,
    {
        let samples = (0..n_samples)
            .map(|i| f(2.0 * std::f64::consts::PI * i as f64 / n_samples as f64))
            .collect();
        Self::from_samples(samples, m_max)
    }

    /// Synthesize a band-limited loop from coefficients `z_m`, `m = -M..=M`.
    pub fn from_coeffs(coeffs: Vec<DVector<f64>>, n_samples: usize) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len().is_multiple_of(2) {
            return Err(Error::InvalidConfig {
                reason: "coefficients must cover m = -M..=M (odd count)".into(),
            });
        }
        let m_max = coeffs.len() / 2;
        if n_samples < 2 * m_max + 2 {
            return Err(Error::TooFewSamples {
                got: n_samples,
                min: 2 * m_max + 2,
            });
        }
        let dim = coeffs[0].len();
        let samples: Vec<DVector<f64>> = (0..n_samples)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n_samples as f64;
                let mut s = DVector::zeros(dim);
                for (mi, c) in coeffs.iter().enumerate() {
                    let m = mi as isize - m_max as isize;
                    s += rotate_phase(c, m as f64 * theta);
                }
                s
            })
            .collect();
        Ok(Self {
            n: dim / 2,
            samples,
            coeffs,
            m_max,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// Coefficient `z_m` as a real vector (pairs are `(Re, Im)` of the complex
    /// coefficient per conjugate pair).
    pub fn coeff(&self, m: isize) -> DVector<f64> {
        let mi = m + self.m_max as isize;
        if mi < 0 || mi as usize >= self.coeffs.len() {
            DVector::zeros(2 * self.n)
        } else {
            self.coeffs[mi as usize].clone()
        }
    }

    /// Iterate `(m, z_m)`.
    pub fn coeffs(&self) -> impl Iterator<Item = (isize, &DVector<f64>)> {
        let m_max = self.m_max as isize;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(mi, c)| (mi as isize - m_max, c))
    }

    /// Resynthesize the loop value at an arbitrary angle from the coefficients.
    pub fn eval(&self, theta: f64) -> DVector<f64> {
        let mut s = DVector::zeros(2 * self.n);
        for (m, c) in self.coeffs() {
            s += rotate_phase(c, m as f64 * theta);
        }
        s
    }

    /// Spectral derivative: mode `m` maps to `m J z_m`.
    pub fn derivative_coeff(&self, m: isize) -> DVector<f64> {
        apply_j(&self.coeff(m)) * m as f64
    }

    /// Derivative samples on the loop grid, synthesized spectrally.
    pub fn derivative_samples(&self) -> Vec<DVector<f64>> {
        let n_samp = self.samples.len();
        (0..n_samp)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n_samp as f64;
                let mut s = DVector::zeros(2 * self.n);
                for (m, c) in self.coeffs() {
                    if m != 0 {
                        s += rotate_phase(&(apply_j(c) * m as f64), m as f64 * theta);
                    }
                }
                s
            })
            .collect()
    }

    /// Largest truncation residual `|z(theta_i) - synthesis(theta_i)|`.
    pub fn resynthesis_defect(&self) -> f64 {
        let n_samp = self.samples.len();
        (0..n_samp)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n_samp as f64;
                (self.eval(theta) - &self.samples[i]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Parseval mismatch `|(1/2pi) int |z|^2 - sum |z_m|^2|` (relative).
    pub fn parseval_defect(&self) -> f64 {
        let mean_sq =
            self.samples.iter().map(|s| s.norm_squared()).sum::<f64>() / self.samples.len() as f64;
        let coeff_sq: f64 = self.coeffs.iter().map(|c| c.norm_squared()).sum();
        (mean_sq - coeff_sq).abs() / mean_sq.max(1e-300)
    }
}

fn check_samples(z: &FourierLoop) -> Result<()> {
    if z.sample_count() < 8 {
        return Err(Error::TooFewSamples {
            got: z.sample_count(),
            min: 8,
        });
    }
    Ok(())
}

/// Loop energy `E(z) = (1/2) int_0^{2pi} |z'|^2 d theta = pi sum m^2 |z_m|^2`.
pub fn loop_energy(z: &FourierLoop) -> Result<f64> {
    check_samples(z)?;
    let by_coeff: f64 = z
        .coeffs()
        .map(|(m, c)| (m * m) as f64 * c.norm_squared())
        .sum::<f64>()
        * std::f64::consts::PI;
    Ok(by_coeff)
}

/// Energy by direct quadrature of the spectrally differentiated samples
/// (cross-check path; agrees with the coefficient formula to 1e-8 relative).
pub fn loop_energy_by_quadrature(z: &FourierLoop) -> Result<f64> {
    check_samples(z)?;
    let d = z.derivative_samples();
    let mean: f64 = d.iter().map(|v| v.norm_squared()).sum::<f64>() / d.len() as f64;
    Ok(std::f64::consts::PI * mean)
}

/// Symplectic area `A(z) = (1/2) int Omega[z, z'] d theta = pi sum m |z_m|^2`.
pub fn loop_area(z: &FourierLoop) -> Result<f64> {
    check_samples(z)?;
    let by_coeff: f64 = z
        .coeffs()
        .map(|(m, c)| m as f64 * c.norm_squared())
        .sum::<f64>()
        * std::f64::consts::PI;
    Ok(by_coeff)
}

/// Area by quadrature of `(1/2) Omega[z, z']` (cross-check path).
pub fn loop_area_by_quadrature(z: &FourierLoop) -> Result<f64> {
    check_samples(z)?;
    let d = z.derivative_samples();
    let mean: f64 = z
        .samples()
        .iter()
        .zip(&d)
        .map(|(zi, di)| omega(zi, di))
        .sum::<f64>()
        / d.len() as f64;
    Ok(std::f64::consts::PI * mean)
}

/// Area as the pullback integral of the primitive one-form,
/// `int z^*(sum_j p_j dq_j)` (third path).
pub fn loop_area_by_primitive(z: &FourierLoop) -> Result<f64> {
    check_samples(z)?;
    let d = z.derivative_samples();
    let n = z.n();
    let mut acc = 0.0;
    for (zi, di) in z.samples().iter().zip(&d) {
        for a in 0..n {
            acc += zi[2 * a] * di[2 * a + 1];
        }
    }
    Ok(2.0 * std::f64::consts::PI * acc / d.len() as f64)
}

/// The gap `E - A` and the harmonic-circle equality flag.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyAreaGap {
    /// `E - A = pi sum m (m - 1) |z_m|^2 >= 0`.
    pub gap: f64,
    /// True when every mode outside `{0, 1}` is negligible, i.e. the loop is a
    /// harmonic circle `z_0 + e^{theta J} z_1`.
    pub is_harmonic_circle: bool,
    /// Largest coefficient norm outside modes 0 and 1.
    pub spurious_mode_norm: f64,
}

/// Tolerance for declaring a loop a harmonic circle.
pub const HARMONIC_TOL: f64 = 1e-9;

/// `E - A` with the equality characterization.
pub fn energy_area_gap(z: &FourierLoop) -> Result<EnergyAreaGap> {
    check_samples(z)?;
    let gap: f64 = z
        .coeffs()
        .map(|(m, c)| (m * (m - 1)) as f64 * c.norm_squared())
        .sum::<f64>()
        * std::f64::consts::PI;
    let scale = z
        .coeffs()
        .map(|(_, c)| c.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    let spurious = z
        .coeffs()
        .filter(|(m, _)| *m != 0 && *m != 1)
        .map(|(_, c)| c.norm())
        .fold(0.0, f64::max);
    Ok(EnergyAreaGap {
        gap,
        is_harmonic_circle: spurious <= HARMONIC_TOL * scale,
        spurious_mode_norm: spurious,
    })
}
