//! Explicit maps that bound the non-squeezing phenomenon from the other side: a
//! radial twist of the plane whose restricted 2-Jacobian stays at or above 1 while
//! it squeezes cylinders, and the symplectic shear used to build nonlinear
//! squeezing embeddings.
//!
//! The twist is `phi(z, t) = rho(|z|) e^{it} z` on `C x R ~ R^3 -> C ~ R^2` with a
//! radial profile satisfying `rho(0) = 1`, `rho'(0) = 0`, `rho(r) < 1` for `r > 0`
//! and `rho''(0) > -1/4`; its restricted 2-Jacobian has the closed form
//! `J_2 = rho (rho + r rho') sqrt(1 + r^2) = 1 + (1/2 + 2 rho''(0)) r^2 + O(r^3)`.
//!
//! The shear is `phi(p1, q1, p2, q2) = (p1, q1 + chi(p2), p2, q2 + chi'(p2) p1)`
//! for a plateau bump `chi` with `chi = 2R` on `[-eps, eps]`, support inside
//! `[-2R + eps, 2R - eps]` and `|chi'| <= 3/2`; it is the time-one flow of the
//! Hamiltonian `chi(p2) p1` and hence exactly symplectic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::poly::ScalarPoly;
use crate::symplinalg::symplectic_defect;
#[cfg(test)]
use rand::{Rng, SeedableRng};
#[cfg(test)]
use rand_chacha::ChaCha8Rng;

/// A rational radial profile `rho(r) = N(r^2) / D(r^2)` with exact derivatives.
#[derive(Debug, Clone)]
pub struct RhoProfile {
    num: ScalarPoly,
    den: ScalarPoly,
    /// Largest radius on which the profile conditions were verified.
    pub r_max: f64,
}

impl RhoProfile {
    /// Validate the four profile conditions on a grid over `(0, r_max]`:
    /// `rho(0) = 1`, `rho'(0) = 0`, `rho < 1` away from zero, `rho''(0) > -1/4`.
    pub fn new(num: ScalarPoly, den: ScalarPoly, r_max: f64) -> Result<Self> {
        let p = Self { num, den, r_max };
        if (p.value(0.0) - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidProfile {
                reason: format!("rho(0) = {} instead of 1", p.value(0.0)),
            });
        }
        if p.derivative(0.0).abs() > 1e-14 {
            return Err(Error::InvalidProfile {
                reason: "rho'(0) must vanish".into(),
            });
        }
        let c = p.second_derivative(0.0);
        if c <= -0.25 {
            return Err(Error::InvalidProfile {
                reason: format!("rho''(0) = {c} is not above -1/4"),
            });
        }
        for i in 1..=1000 {
            let r = r_max * i as f64 / 1000.0;
            if p.value(r) >= 1.0 {
                return Err(Error::InvalidProfile {
                    reason: format!("rho({r}) = {} is not below 1", p.value(r)),
                });
            }
            if p.den.eval(r * r).abs() < 1e-12 {
                return Err(Error::InvalidProfile {
                    reason: format!("denominator vanishes near r = {r}"),
                });
            }
        }
        Ok(p)
    }

    /// Shipped default `rho(r) = (1 + r^2/16) / (1 + r^2/8)`:
    /// `rho''(0) = -1/8` and `J_2 = 1 + r^2/4 + O(r^4)`.
    pub fn default_profile() -> Self {
        Self::new(
            ScalarPoly::new(vec![1.0, 1.0 / 16.0]),
            ScalarPoly::new(vec![1.0, 1.0 / 8.0]),
            5.0,
        )
        .expect("default profile satisfies the conditions")
    }

    pub fn value(&self, r: f64) -> f64 {
        let u = r * r;
        self.num.eval(u) / self.den.eval(u)
    }

    /// `d rho / dr = 2 r (N' D - N D') / D^2` evaluated at `u = r^2`.
    pub fn derivative(&self, r: f64) -> f64 {
        let u = r * r;
        let g = self
            .num
            .derivative()
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.derivative()));
        let d = self.den.eval(u);
        2.0 * r * g.eval(u) / (d * d)
    }

    /// Exact second radial derivative via the chain rule in `u = r^2`.
    pub fn second_derivative(&self, r: f64) -> f64 {
        let u = r * r;
        let g = self
            .num
            .derivative()
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.derivative()));
        let d = self.den.eval(u);
        let dprime = self.den.derivative().eval(u);
        let term1 = 2.0 * g.eval(u) / (d * d);
        let term2 = 4.0 * u * (g.derivative().eval(u) * d - 2.0 * g.eval(u) * dprime) / (d * d * d);
        term1 + term2
    }
}

/// `phi(z, t) = rho(|z|) e^{it} z` on the plane.
pub fn rho_map(profile: &RhoProfile, z: &DVector<f64>, t: f64) -> DVector<f64> {
    let r = z.norm();
    let scale = profile.value(r);
    let (s, c) = t.sin_cos();
    DVector::from_vec(vec![
        scale * (c * z[0] - s * z[1]),
        scale * (s * z[0] + c * z[1]),
    ])
}

/// Exact derivative of the twist as a map `R^3 -> R^2` in variables `(z1, z2, t)`.
pub fn rho_map_derivative(profile: &RhoProfile, z: &DVector<f64>, t: f64) -> DMatrix<f64> {
    let r = z.norm();
    let rho = profile.value(r);
    let (s, c) = t.sin_cos();
    let rot = [[c, -s], [s, c]];
    let rz = [
        rot[0][0] * z[0] + rot[0][1] * z[1],
        rot[1][0] * z[0] + rot[1][1] * z[1],
    ];
    let mut m = DMatrix::zeros(2, 3);
    for a in 0..2 {
        for j in 0..2 {
            let radial = if r > 1e-14 {
                profile.derivative(r) * z[j] / r * rz[a]
            } else {
                0.0
            };
            m[(a, j)] = radial + rho * rot[a][j];
        }
        // d/dt rotates by a further quarter turn
        let rpz = [-rz[1], rz[0]];
        m[(a, 2)] = rho * rpz[a];
    }
    m
}

/// The closed-form restricted 2-Jacobian and its two numerical cross-checks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RhoJacobian {
    /// `rho (rho + r rho') sqrt(1 + r^2)`.
    pub closed_form: f64,
    /// Max of `|det Dphi|_W|` over a sampled Grassmannian of 2-planes in `R^3`.
    pub sampled_max: f64,
    /// `sqrt(det(Dphi Dphi^T))`, the exact value of that maximum.
    pub gram_value: f64,
}

/// Evaluate the 2-Jacobian of the twist at `(z, t)` along with the sampled
/// Grassmannian maximum (the planes are sampled by Fibonacci-distributed normals).
pub fn rho_map_jacobian2(
    profile: &RhoProfile,
    z: &DVector<f64>,
    t: f64,
    plane_samples: usize,
) -> RhoJacobian {
    let r = z.norm();
    let closed_form =
        profile.value(r) * (profile.value(r) + r * profile.derivative(r)) * (1.0 + r * r).sqrt();
    let d = rho_map_derivative(profile, z, t);
    let gram = &d * d.transpose();
    let gram_value = gram.determinant().max(0.0).sqrt();
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut sampled_max: f64 = 0.0;
    for i in 0..plane_samples {
        let zc = 1.0 - 2.0 * (i as f64 + 0.5) / plane_samples as f64;
        let rad = (1.0 - zc * zc).sqrt();
        let phi = golden * i as f64;
        let normal = DVector::from_vec(vec![rad * phi.cos(), rad * phi.sin(), zc]);
        // orthonormal basis of the plane orthogonal to `normal`
        let mut u = if normal[0].abs() < 0.9 {
            DVector::from_vec(vec![1.0, 0.0, 0.0])
        } else {
            DVector::from_vec(vec![0.0, 1.0, 0.0])
        };
        let du = normal.dot(&u);
        u -= &normal * du;
        u /= u.norm();
        let v = DVector::from_vec(vec![
            normal[1] * u[2] - normal[2] * u[1],
            normal[2] * u[0] - normal[0] * u[2],
            normal[0] * u[1] - normal[1] * u[0],
        ]);
        let au = &d * &u;
        let av = &d * &v;
        let det = (au[0] * av[1] - au[1] * av[0]).abs();
        sampled_max = sampled_max.max(det);
    }
    RhoJacobian {
        closed_form,
        sampled_max,
        gram_value,
    }
}

/// Largest radius `r0 <= r_max` with `J_2 >= 1` on all of `[0, r0]` (grid scan).
pub fn jacobian2_lower_radius(profile: &RhoProfile, r_max: f64) -> f64 {
    let steps = 2000;
    let mut r0 = 0.0;
    for i in 1..=steps {
        let r = r_max * i as f64 / steps as f64;
        let j2 = profile.value(r)
            * (profile.value(r) + r * profile.derivative(r))
            * (1.0 + r * r).sqrt();
        if j2 < 1.0 - 1e-12 {
            break;
        }
        r0 = r;
    }
    r0
}

/// A plateau bump `chi` for the shear: `chi = 2R` on `[-eps, eps]`, ramps to zero
/// before `|p| = 2R - eps` through quintic-free C^2 corners, `|chi'| <= 3/2`.
#[derive(Debug, Clone)]
pub struct ShearProfile {
    /// Plateau height is `2R`; the shear displaces `q1` by up to this much.
    pub r_big: f64,
    /// Plateau half-width; must satisfy `eps < R/3`.
    pub eps: f64,
    /// Fraction of the ramp spent in each rounded corner.
    pub corner: f64,
}

impl ShearProfile {
    pub fn new(r_big: f64, eps: f64, corner: f64) -> Result<Self> {
        if r_big <= 0.0 || eps <= 0.0 || eps >= r_big / 3.0 {
            return Err(Error::InvalidProfile {
                reason: format!("need 0 < eps < R/3, got R = {r_big}, eps = {eps}"),
            });
        }
        if !(0.0..0.5).contains(&corner) || corner == 0.0 {
            return Err(Error::InvalidProfile {
                reason: "corner fraction must lie in (0, 1/2)".into(),
            });
        }
        let p = Self { r_big, eps, corner };
        if p.max_slope() > 1.5 {
            return Err(Error::InvalidProfile {
                reason: format!("|chi'| reaches {} above 3/2", p.max_slope()),
            });
        }
        Ok(p)
    }

    pub fn with_radius(r_big: f64) -> Result<Self> {
        Self::new(r_big, r_big / 6.0, 0.1)
    }

    /// Peak ramp slope `R / ((R - eps)(1 - corner))`.
    pub fn max_slope(&self) -> f64 {
        self.r_big / ((self.r_big - self.eps) * (1.0 - self.corner))
    }

    fn ramp_len(&self) -> f64 {
        2.0 * self.r_big - 2.0 * self.eps
    }

    /// Normalized ramp shape `S: [0,1] -> [0,1]` (integral of a cornered plateau).
    fn ramp(&self, x: f64) -> f64 {
        let w = self.corner;
        let g_int = |x: f64| -> f64 {
            // integral of the corner bump profile g
            if x <= 0.0 {
                0.0
            } else if x < w {
                let u = x / w;
                w * (u * u * u - 0.5 * u * u * u * u)
            } else if x <= 1.0 - w {
                x - 0.5 * w
            } else if x < 1.0 {
                let u = (1.0 - x) / w;
                (1.0 - w) - w * (u * u * u - 0.5 * u * u * u * u)
            } else {
                1.0 - w
            }
        };
        g_int(x) / (1.0 - w)
    }

    fn ramp_slope(&self, x: f64) -> f64 {
        let w = self.corner;
        let g = if x <= 0.0 || x >= 1.0 {
            0.0
        } else if x < w {
            let u = x / w;
            3.0 * u * u - 2.0 * u * u * u
        } else if x <= 1.0 - w {
            1.0
        } else {
            let u = (1.0 - x) / w;
            3.0 * u * u - 2.0 * u * u * u
        };
        g / (1.0 - w)
    }

    fn ramp_curvature(&self, x: f64) -> f64 {
        let w = self.corner;
        let g = if x <= 0.0 || x >= 1.0 {
            0.0
        } else if x < w {
            let u = x / w;
            (6.0 * u - 6.0 * u * u) / w
        } else if x <= 1.0 - w {
            0.0
        } else {
            let u = (1.0 - x) / w;
            -(6.0 * u - 6.0 * u * u) / w
        };
        g / (1.0 - w)
    }

    pub fn chi(&self, p: f64) -> f64 {
        let s = p.abs();
        if s <= self.eps {
            2.0 * self.r_big
        } else if s >= 2.0 * self.r_big - self.eps {
            0.0
        } else {
            2.0 * self.r_big * (1.0 - self.ramp((s - self.eps) / self.ramp_len()))
        }
    }

    pub fn chi_prime(&self, p: f64) -> f64 {
        let s = p.abs();
        if s <= self.eps || s >= 2.0 * self.r_big - self.eps {
            return 0.0;
        }
        let slope =
            -2.0 * self.r_big * self.ramp_slope((s - self.eps) / self.ramp_len()) / self.ramp_len();
        slope * p.signum()
    }

    pub fn chi_second(&self, p: f64) -> f64 {
        let s = p.abs();
        if s <= self.eps || s >= 2.0 * self.r_big - self.eps {
            return 0.0;
        }
        -2.0 * self.r_big * self.ramp_curvature((s - self.eps) / self.ramp_len())
            / (self.ramp_len() * self.ramp_len())
    }

    /// Least-squares polynomial surrogate of `chi` on `[-2R, 2R]` (for feeding the
    /// flow integrator, which needs polynomial data). Returns the polynomial in
    /// the scaled variable `p / (2R)` together with the measured sup errors of the
    /// value and the first derivative.
    pub fn polynomial_approximation(&self, degree: usize) -> (ScalarPoly, f64, f64) {
        let scale = 2.0 * self.r_big;
        let samples = 400;
        let mut ts = Vec::with_capacity(samples);
        let mut ys = Vec::with_capacity(samples);
        for i in 0..samples {
            // Chebyshev abscissas avoid endpoint oscillation
            let x = (std::f64::consts::PI * (i as f64 + 0.5) / samples as f64).cos();
            ts.push(x);
            ys.push(self.chi(scale * x));
        }
        let vand = DMatrix::from_fn(samples, degree + 1, |r, c| ts[r].powi(c as i32));
        let y = DVector::from_column_slice(&ys);
        let sol = vand
            .svd(true, true)
            .solve(&y, 1e-13)
            .expect("least squares solve");
        let poly = ScalarPoly::new(sol.iter().copied().collect());
        let dpoly = poly.derivative();
        let mut sup = 0.0f64;
        let mut sup_d = 0.0f64;
        for i in 0..=2000 {
            let p = scale * (2.0 * i as f64 / 2000.0 - 1.0);
            sup = sup.max((self.chi(p) - poly.eval(p / scale)).abs());
            sup_d = sup_d.max((self.chi_prime(p) - dpoly.eval(p / scale) / scale).abs());
        }
        (poly, sup, sup_d)
    }
}

/// The shear `(p1, q1 + chi(p2), p2, q2 + chi'(p2) p1)`.
pub fn guth_shear(profile: &ShearProfile, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![
        x[0],
        x[1] + profile.chi(x[2]),
        x[2],
        x[3] + profile.chi_prime(x[2]) * x[0],
    ])
}

/// Exact Jacobian of the shear.
pub fn guth_shear_jacobian(profile: &ShearProfile, x: &DVector<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::identity(4, 4);
    m[(1, 2)] = profile.chi_prime(x[2]);
    m[(3, 0)] = profile.chi_prime(x[2]);
    m[(3, 2)] = profile.chi_second(x[2]) * x[0];
    m
}

/// Pointwise symplectic defect of the shear at `x`.
pub fn guth_shear_defect(profile: &ShearProfile, x: &DVector<f64>) -> f64 {
    symplectic_defect(&guth_shear_jacobian(profile, x))
}
