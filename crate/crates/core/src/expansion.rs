//! The second-order coefficient `C(H_0, Phi)` of the shadow-volume expansion
//! `f(t) = omega_2k + C t^2 + O(t^3)`, the symmetry predicates that characterize
//! `C = 0`, and validation of the expansion against measured `f(t)`.
//!
//! `C` is the Grassmannian average of the energy-area gap of the loops
//! `zeta_L(theta) = Phi^{-1} (I - P) X_{H_0} (Phi e^{theta J} xi_L)`, `xi_L` a unit
//! vector of the complex line `L` in `Phi^T V`. The gap `E - A` is nonnegative and
//! vanishes exactly on harmonic circles, so `C >= 0`, and `C = 0` is equivalent to
//! the symmetry condition
//! `Z(e^{theta J} x) = (Z(x) + Z(-x))/2 + e^{theta J} (Z(x) - Z(-x))/2`
//! for the pulled-back field `Z = Phi^*((I - P) X_{H_0})` on the unit sphere of
//! `Phi^T V`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grassmann::{GrassmannQuadrature, LineScheme};
use crate::hamflow::PolyHamiltonian;
use crate::loops::{energy_area_gap, loop_area, loop_energy, FourierLoop};
use crate::shadowvol::{BoundaryGrid, BoundaryOptions, ShadowSolver};
use crate::symplinalg::{
    apply_j, ball_volume_2k, complex_adapted_basis, linear_shadow_volume, rotate_phase,
    ComplexProjector, SympLinearMap,
};

/// Tolerance for the symmetry-condition predicates.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// One sampled line with its loop functionals.
#[derive(Debug, Clone, Serialize)]
pub struct LineSample {
    pub xi: Vec<f64>,
    pub energy: f64,
    pub area: f64,
    pub gap: f64,
}

/// Everything measured around the second-order coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    /// `C = int (E - A)(zeta_L) dmu`.
    pub c: f64,
    /// Monte Carlo standard error or grid refinement estimate, floored at 1e-10.
    pub quadrature_error: f64,
    pub lines: usize,
    pub per_line: Vec<LineSample>,
    /// Whether the pulled-back field satisfies the symmetry condition.
    pub symmetry: bool,
    /// Quadratic coefficient fitted from measured `f(t)` (`None` until validation).
    pub fitted_c: Option<f64>,
    /// Max-norm residual of that fit.
    pub fit_residual: Option<f64>,
    /// Constant term of the unconstrained cubic fit (should be `omega_2k`).
    pub fit_constant: Option<f64>,
    /// Linear term of the unconstrained cubic fit (should vanish).
    pub fit_linear: Option<f64>,
    /// Measured `(t, f(t))` pairs.
    pub f_values: Vec<(f64, f64)>,
}

fn check_in_subspace(w_basis: &DMatrix<f64>, xi: &DVector<f64>) -> Result<()> {
    let proj = w_basis * (w_basis.transpose() * xi);
    let defect = (xi - proj).norm();
    if defect > 1e-9 {
        return Err(Error::OutsideSubspace { defect });
    }
    Ok(())
}

/// The loop `zeta(theta) = Phi^{-1} (I - P) X_{H_0} (Phi e^{theta J} xi)` sampled
/// on the loop grid; `xi` must be a unit vector of `Phi^T V`.
pub fn zeta_loop(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
    xi: &DVector<f64>,
) -> Result<FourierLoop> {
    let w_basis = complex_adapted_basis(&(phi.matrix().transpose() * proj.basis()))?;
    check_in_subspace(&w_basis, xi)?;
    if (xi.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::OutsideSubspace {
            defect: (xi.norm() - 1.0).abs(),
        });
    }
    zeta_loop_unchecked(h, phi, proj, xi)
}

fn zeta_loop_unchecked(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
    xi: &DVector<f64>,
) -> Result<FourierLoop> {
    let inv = phi.inverse();
    // band limit: X_{H_0} has polynomial degree d, so zeta is a trigonometric
    // polynomial of degree <= d
    let degree = h.frozen_at(0.0).total_degree().max(2) as usize;
    let n_samples = (8 * degree).next_power_of_two().max(64);
    FourierLoop::from_fn(n_samples, 2 * degree, |theta| {
        let x = phi.apply(&rotate_phase(xi, theta));
        let field = h.vector_field(&x, 0.0);
        inv.apply(&(&field - proj.apply(&field)))
    })
}

/// `C(H_0, Phi)` by Grassmannian quadrature of the per-line energy-area gap.
pub fn expansion_coefficient(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
    scheme: LineScheme,
) -> Result<ExpansionReport> {
    let w = phi.matrix().transpose() * proj.basis();
    let quad = GrassmannQuadrature::from_subspace(&w, scheme)?;
    let gap_of = |xi: &DVector<f64>| -> Result<f64> {
        Ok(energy_area_gap(&zeta_loop_unchecked(h, phi, proj, xi)?)?.gap)
    };
    let integral = quad.integrate(&gap_of)?;
    let per_line = quad
        .sample_line_points(32.min(integral.lines))
        .into_iter()
        .map(|xi| {
            let z = zeta_loop_unchecked(h, phi, proj, &xi)?;
            Ok(LineSample {
                xi: xi.iter().copied().collect(),
                energy: loop_energy(&z)?,
                area: loop_area(&z)?,
                gap: energy_area_gap(&z)?.gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let symmetry = symmetry_condition(h, phi, proj)?;
    Ok(ExpansionReport {
        c: integral.value,
        quadrature_error: integral.std_error.max(1e-10),
        lines: integral.lines,
        per_line,
        symmetry,
        fitted_c: None,
        fit_residual: None,
        fit_constant: None,
        fit_linear: None,
        f_values: Vec::new(),
    })
}

/// Largest violation of the harmonic symmetry identity for an arbitrary field `Z`
/// on the unit sphere of the subspace spanned by `w_basis`.
fn symmetry_violation<F>(z: &F, w_basis: &DMatrix<f64>, points: usize, phases: usize) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x51a2);
    let normal = rand_distr::StandardNormal;
    let dim_w = w_basis.ncols();
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let c = DVector::<f64>::from_fn(dim_w, |_, _| normal.sample(&mut rng));
        let x = w_basis * (&c / c.norm());
        let zp = z(&x);
        let zm = z(&(-&x));
        let even = (&zp + &zm) * 0.5;
        let odd = (&zp - &zm) * 0.5;
        for i in 0..phases {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / phases as f64;
            let lhs = z(&rotate_phase(&x, theta));
            let rhs = &even + rotate_phase(&odd, theta);
            worst = worst.max((lhs - rhs).amax());
        }
    }
    worst
}

/// Whether `Z = Phi^*((I - P) X_{H_0})` satisfies the symmetry condition on
/// `partial B intersect Phi^T V` (200 Gaussian-normalized points, 32 phases).
pub fn symmetry_condition(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
) -> Result<bool> {
    let w_basis = complex_adapted_basis(&(phi.matrix().transpose() * proj.basis()))?;
    let inv = phi.inverse();
    let z = |x: &DVector<f64>| {
        let y = phi.apply(x);
        let field = h.vector_field(&y, 0.0);
        inv.apply(&(&field - proj.apply(&field)))
    };
    Ok(symmetry_violation(&z, &w_basis, 200, 32) <= SYMMETRY_TOL)
}

/// Pointwise form of the symmetry condition for a fixed diffeomorphism given by
/// exact second-derivative data at the origin:
/// `(I - P) D^2 phi(0)[J x, x] = 0` for all `x` in `D phi(0)^T V`.
///
/// `d2` holds one symmetric matrix per output component, so that
/// `D^2 phi(0)[u, v]_a = u^T d2[a] v`.
pub fn symmetry_condition_pointwise(
    d2: &[DMatrix<f64>],
    dphi0: &DMatrix<f64>,
    proj: &ComplexProjector,
) -> Result<bool> {
    let dim = 2 * proj.n();
    if d2.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: d2.len(),
        });
    }
    for m in d2 {
        let asym = (m - m.transpose()).amax();
        if asym > 1e-12 * m.amax().max(1.0) {
            return Err(Error::NotSymmetricBilinear { asymmetry: asym });
        }
    }
    let w_basis = complex_adapted_basis(&(dphi0.transpose() * proj.basis()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xd2);
    let normal = rand_distr::StandardNormal;
    let mut worst: f64 = 0.0;
    // spanning grid: the frame vectors themselves plus random unit combinations
    let mut samples: Vec<DVector<f64>> = (0..w_basis.ncols())
        .map(|c| w_basis.column(c).into())
        .collect();
    for _ in 0..50 {
        let c = DVector::<f64>::from_fn(w_basis.ncols(), |_, _| normal.sample(&mut rng));
        samples.push(&w_basis * (&c / c.norm()));
    }
    for x in &samples {
        let jx = apply_j(x);
        let mut val = DVector::zeros(dim);
        for (a, m) in d2.iter().enumerate() {
            val[a] = (jx.transpose() * m * x)[(0, 0)];
        }
        let resid = &val - proj.apply(&val);
        worst = worst.max(resid.amax());
    }
    Ok(worst <= SYMMETRY_TOL)
}

/// Least squares fit of `y ~ sum_j c_j t^{powers[j]}`.
fn fit_powers(ts: &[f64], ys: &[f64], powers: &[i32]) -> Result<Vec<f64>> {
    if ts.len() < powers.len() {
        return Err(Error::InvalidConfig {
            reason: format!("need at least {} samples for the fit", powers.len()),
        });
    }
    let vand = DMatrix::from_fn(ts.len(), powers.len(), |r, c| ts[r].powi(powers[c]));
    let y = DVector::from_column_slice(ys);
    let svd = vand.svd(true, true);
    let sol = svd.solve(&y, 1e-14).map_err(|e| Error::InvalidConfig {
        reason: format!("fit failed: {e}"),
    })?;
    Ok(sol.iter().copied().collect())
}

/// Controls for [`validate_expansion`].
#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub t_grid: Vec<f64>,
    pub scheme: LineScheme,
    pub grid: BoundaryGrid,
    pub boundary: BoundaryOptions,
}

impl ValidationConfig {
    pub fn default_for_k(k: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            t_grid: (1..=8).map(|i| i as f64 * 0.01).collect(),
            scheme: if k == 1 {
                LineScheme::default_monte_carlo(seed)
            } else {
                LineScheme::Hopf {
                    eta_res: 24,
                    n_phi1: 16,
                    n_phi2: 16,
                }
            },
            grid: BoundaryGrid::default_for_k(k)?,
            boundary: BoundaryOptions::default(),
        })
    }
}

/// Measure `f(t)` over the grid, fit `f = omega_2k + c2 t^2 + c3 t^3` (constrained
/// constant and no linear term), and report the fitted quadratic coefficient next
/// to the Grassmannian value. The constant and linear terms of an unconstrained
/// cubic fit are reported as consistency diagnostics.
pub fn validate_expansion(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
    cfg: &ValidationConfig,
) -> Result<ExpansionReport> {
    if cfg.t_grid.len() < 4 {
        return Err(Error::InvalidConfig {
            reason: "need at least 4 fit times".into(),
        });
    }
    if cfg.t_grid.iter().any(|&t| t.abs() > 0.1 + 1e-12) {
        return Err(Error::InvalidConfig {
            reason: "fit window is limited to |t| <= 0.1".into(),
        });
    }
    let mut report = expansion_coefficient(h, phi, proj, cfg.scheme.clone())?;
    let solver = ShadowSolver::new(h, phi, proj, cfg.grid.clone(), cfg.boundary.clone())?;
    let boundaries = solver.solve_targets(&cfg.t_grid)?;
    let omega = ball_volume_2k(proj.k());
    let mut ts = Vec::with_capacity(boundaries.len());
    let mut fs = Vec::with_capacity(boundaries.len());
    for b in &boundaries {
        let f = solver.volume(b)?;
        report.f_values.push((b.t, f));
        ts.push(b.t);
        fs.push(f);
    }
    // constrained fit on f - omega
    let shifted: Vec<f64> = fs.iter().map(|f| f - omega).collect();
    let coeffs = fit_powers(&ts, &shifted, &[2, 3])?;
    let fitted_c = coeffs[0];
    let residual = ts
        .iter()
        .zip(&shifted)
        .map(|(&t, &y)| (y - coeffs[0] * t * t - coeffs[1] * t * t * t).abs())
        .fold(0.0, f64::max);
    // unconstrained fit for the constant/linear diagnostics; the quartic term
    // keeps genuine O(t^4) content out of the low coefficients (needs 5 points)
    let free = if ts.len() >= 5 {
        fit_powers(&ts, &fs, &[0, 1, 2, 3, 4])?
    } else {
        fit_powers(&ts, &fs, &[0, 1, 2, 3])?
    };
    report.fitted_c = Some(fitted_c);
    report.fit_residual = Some(residual);
    report.fit_constant = Some(free[0]);
    report.fit_linear = Some(free[1]);
    Ok(report)
}

/// Fitted slope of `f` over the symmetric grid `{-d, -d/2, d/2, d}`; the expansion
/// has no linear term, so this should vanish to fit tolerance.
pub fn fitted_slope_about_zero(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
    delta: f64,
) -> Result<f64> {
    let solver = ShadowSolver::new(
        h,
        phi,
        proj,
        BoundaryGrid::default_for_k(proj.k())?,
        BoundaryOptions::default(),
    )?;
    let mut ts = Vec::with_capacity(4);
    let mut fs = Vec::with_capacity(4);
    for sign in [-1.0, 1.0] {
        for b in solver.solve_targets(&[sign * delta / 2.0, sign * delta])? {
            ts.push(b.t);
            fs.push(solver.volume(&b)?);
        }
    }
    let coeffs = fit_powers(&ts, &fs, &[0, 1, 2])?;
    Ok(coeffs[1])
}

/// Independent linear-algebra cross-check for quadratic Hamiltonians: the flow of
/// `H = (1/2) x^T S x` is `exp(t J S)`, so `f(t)` comes from the linear
/// shadow-volume formula alone, with no boundary solver involved. Returns
/// `(fitted quadratic coefficient, C from quadrature)`.
pub fn quadratic_hamiltonian_cross_check(
    h: &PolyHamiltonian,
    proj: &ComplexProjector,
    scheme: LineScheme,
) -> Result<(f64, f64)> {
    let frozen = h.frozen_at(0.0);
    if frozen.total_degree() > 2 {
        return Err(Error::InvalidConfig {
            reason: "cross-check needs a quadratic Hamiltonian".into(),
        });
    }
    let n2 = 2 * h.n();
    let a = h.vector_field_jacobian(&DVector::zeros(n2), 0.0); // J S, constant
    let ts: Vec<f64> = (1..=8).map(|i| i as f64 * 0.005).collect();
    let omega = ball_volume_2k(proj.k());
    let mut ys = Vec::with_capacity(ts.len());
    for &t in &ts {
        let phi_t = SympLinearMap::new((&a * t).exp())?;
        ys.push(linear_shadow_volume(&phi_t, proj)?.volume - omega);
    }
    // include a quartic term so only O(t^6) leaks into the quadratic coefficient
    let coeffs = fit_powers(&ts, &ys, &[2, 3, 4])?;
    let c = expansion_coefficient(h, &SympLinearMap::identity(h.n()), proj, scheme)?.c;
    Ok((coeffs[0], c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use std::f64::consts::PI;

    fn proj21() -> ComplexProjector {
        ComplexProjector::coordinate(2, 1).unwrap()
    }

    fn cubic_h() -> PolyHamiltonian {
        PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[2, 0, 0, 1])]).unwrap(),
        )
        .unwrap()
    }

    /// H = p1 p2 + q1 q2: (I-P)X_H restricted to V is complex-linear.
    fn complex_linear_h() -> PolyHamiltonian {
        PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[1, 0, 1, 0]), (1.0, &[0, 1, 0, 1])]).unwrap(),
        )
        .unwrap()
    }

    /// H = p1 p2: zeta has only modes +-1 with an E - A gap of pi/2.
    fn bilinear_h() -> PolyHamiltonian {
        PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[1, 0, 1, 0])]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zeta_vanishes_when_field_stays_in_v() {
        // H = p1 q1: X_H is tangent to the (p1, q1) plane
        let h = PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[1, 1, 0, 0])]).unwrap(),
        )
        .unwrap();
        let xi = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let z = zeta_loop(&h, &SympLinearMap::identity(2), &proj21(), &xi).unwrap();
        for s in z.samples() {
            assert!(s.amax() < 1e-14);
        }
        let r = expansion_coefficient(
            &h,
            &SympLinearMap::identity(2),
            &proj21(),
            LineScheme::default_monte_carlo(1),
        )
        .unwrap();
        assert!(r.c.abs() < 1e-12);
        assert!(r.symmetry);
    }

    #[test]
    fn complex_linear_field_gives_harmonic_circles() {
        let h = complex_linear_h();
        let xi = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let z = zeta_loop(&h, &SympLinearMap::identity(2), &proj21(), &xi).unwrap();
        let g = energy_area_gap(&z).unwrap();
        assert!(g.gap.abs() < 1e-12);
        assert!(g.is_harmonic_circle);
        let e = loop_energy(&z).unwrap();
        let a = loop_area(&z).unwrap();
        assert!((e - a).abs() < 1e-12 && e > 0.1);
        assert!(symmetry_condition(&h, &SympLinearMap::identity(2), &proj21()).unwrap());
    }

    #[test]
    fn cubic_zeta_has_mode_two_and_hand_computed_c() {
        let h = cubic_h();
        let xi = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let z = zeta_loop(&h, &SympLinearMap::identity(2), &proj21(), &xi).unwrap();
        // zeta = (0, 0, -cos^2 theta, 0): modes 0, +-2 on the second pair
        assert!(z.coeff(2).norm() > 0.2);
        let r = expansion_coefficient(
            &h,
            &SympLinearMap::identity(2),
            &proj21(),
            LineScheme::default_monte_carlo(1),
        )
        .unwrap();
        // gap = pi (2 |z_2|^2 + 6 |z_-2|^2) with |z_{+-2}| = 1/4: C = pi/2
        assert!((r.c - PI / 2.0).abs() < 1e-10, "C = {}", r.c);
        assert!(!r.symmetry);
        assert!(r.c >= -r.quadrature_error);
        for line in &r.per_line {
            assert!(line.gap >= -1e-9);
        }
    }

    #[test]
    fn unit_norm_flow_has_zero_c_even_after_unitary() {
        // H = |x|^2 / 2 with a unitary Phi: zeta is identically zero
        let mut terms = Vec::new();
        for i in 0..4 {
            let mut e = vec![0u32; 4];
            e[i] = 2;
            terms.push((0.5, e));
        }
        let refs: Vec<(f64, &[u32])> = terms.iter().map(|(c, e)| (*c, e.as_slice())).collect();
        let h = PolyHamiltonian::autonomous(2, Polynomial::from_terms(4, &refs).unwrap()).unwrap();
        let phi = crate::symplinalg::random_unitary(2, 3).unwrap();
        let r =
            expansion_coefficient(&h, &phi, &proj21(), LineScheme::default_monte_carlo(2)).unwrap();
        assert!(r.c.abs() < 1e-10);
        assert!(r.symmetry);
    }

    #[test]
    fn zeta_rejects_bad_xi() {
        let h = cubic_h();
        let phi = SympLinearMap::identity(2);
        // outside Phi^T V
        let xi = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            zeta_loop(&h, &phi, &proj21(), &xi),
            Err(Error::OutsideSubspace { .. })
        ));
        // not unit
        let xi = DVector::from_vec(vec![2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            zeta_loop(&h, &phi, &proj21(), &xi),
            Err(Error::OutsideSubspace { .. })
        ));
    }

    #[test]
    fn symmetry_condition_examples() {
        let id = SympLinearMap::identity(2);
        // Z = 0
        assert!(symmetry_condition(&PolyHamiltonian::zero(2), &id, &proj21()).unwrap());
        // linear J-commuting
        assert!(symmetry_condition(&complex_linear_h(), &id, &proj21()).unwrap());
        // cubic violates it; witness at theta = pi/2, x = e_p1
        let h = cubic_h();
        assert!(!symmetry_condition(&h, &id, &proj21()).unwrap());
        let z = |x: &DVector<f64>| {
            let f = h.vector_field(x, 0.0);
            let p = proj21().apply(&f);
            f - p
        };
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let theta = PI / 2.0;
        let lhs = z(&rotate_phase(&x, theta));
        let zp = z(&x);
        let zm = z(&(-&x));
        let rhs = (&zp + &zm) * 0.5 + rotate_phase(&((&zp - &zm) * 0.5), theta);
        assert!((lhs - rhs).amax() > 0.5);
    }

    #[test]
    fn pointwise_symmetry_examples() {
        let proj = proj21();
        let id = DMatrix::<f64>::identity(4, 4);
        // linear map: all second derivatives vanish
        let zeros: Vec<DMatrix<f64>> = (0..4).map(|_| DMatrix::zeros(4, 4)).collect();
        assert!(symmetry_condition_pointwise(&zeros, &id, &proj).unwrap());

        // time-eps flow of p1^2 q2 at leading order: D^2 phi(0) ~ eps D(DX_H)(0)
        let eps = 0.01;
        let h = cubic_h();
        let mut d2 = Vec::with_capacity(4);
        for a in 0..4 {
            // Hessian of component a of X_H at the origin
            let comp = |x: &DVector<f64>| h.vector_field(x, 0.0)[a];
            let mut m = DMatrix::zeros(4, 4);
            let dl = 1e-4;
            for i in 0..4 {
                for j in 0..4 {
                    let mut xpp = DVector::zeros(4);
                    xpp[i] += dl;
                    xpp[j] += dl;
                    let mut xpm = DVector::zeros(4);
                    xpm[i] += dl;
                    xpm[j] -= dl;
                    let mut xmp = DVector::zeros(4);
                    xmp[i] -= dl;
                    xmp[j] += dl;
                    let mut xmm = DVector::zeros(4);
                    xmm[i] -= dl;
                    xmm[j] -= dl;
                    m[(i, j)] =
                        (comp(&xpp) - comp(&xpm) - comp(&xmp) + comp(&xmm)) / (4.0 * dl * dl);
                }
            }
            // symmetrize away the finite-difference noise
            m = (m.clone() + m.transpose()) * 0.5 * eps;
            d2.push(m);
        }
        assert!(!symmetry_condition_pointwise(&d2, &id, &proj).unwrap());

        // consistency with the path formulation: Z(x) = (1/2) Dphi(0)^{-1} (I-P) D^2 phi(0)[x, x]
        let w_basis = complex_adapted_basis(proj.basis()).unwrap();
        let z = |x: &DVector<f64>| {
            let mut v = DVector::zeros(4);
            for (a, m) in d2.iter().enumerate() {
                v[a] = (x.transpose() * m * x)[(0, 0)];
            }
            let v = &v - proj.apply(&v);
            v * 0.5
        };
        let viol = symmetry_violation(&z, &w_basis, 60, 16);
        assert!(viol > SYMMETRY_TOL, "path-form violation {viol}");

        // asymmetric data is rejected
        let mut bad = zeros.clone();
        bad[0][(0, 1)] = 1.0;
        assert!(matches!(
            symmetry_condition_pointwise(&bad, &id, &proj),
            Err(Error::NotSymmetricBilinear { .. })
        ));
    }

    #[test]
    fn validation_on_flat_case_fits_zeros() {
        // H = p1 q1: X_H tangent to V, f(t) = pi identically
        let h = PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[1, 1, 0, 0])]).unwrap(),
        )
        .unwrap();
        let cfg = ValidationConfig {
            t_grid: vec![0.01, 0.02, 0.03, 0.04],
            scheme: LineScheme::default_monte_carlo(3),
            grid: BoundaryGrid::Circle { nodes: 64 },
            boundary: BoundaryOptions::default(),
        };
        let r = validate_expansion(&h, &SympLinearMap::identity(2), &proj21(), &cfg).unwrap();
        assert!(r.c.abs() < 1e-12);
        assert!(r.fitted_c.unwrap().abs() < 1e-4);
        assert!((r.fit_constant.unwrap() - PI).abs() < 1e-7);
        assert!(r.fit_linear.unwrap().abs() < 1e-5);
        assert!(r.symmetry);
    }

    #[test]
    fn quadratic_cross_check_matches_c() {
        let (fitted, c) = quadratic_hamiltonian_cross_check(
            &bilinear_h(),
            &proj21(),
            LineScheme::default_monte_carlo(4),
        )
        .unwrap();
        assert!((c - PI / 2.0).abs() < 1e-10, "C = {c}");
        assert!((fitted - c).abs() <= 1e-4 * c, "fitted {fitted} vs C {c}");
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let h = cubic_h();
        let id = SympLinearMap::identity(2);
        let mut cfg = ValidationConfig::default_for_k(1, 1).unwrap();
        cfg.t_grid = vec![0.01, 0.02];
        assert!(matches!(
            validate_expansion(&h, &id, &proj21(), &cfg),
            Err(Error::InvalidConfig { .. })
        ));
        let mut cfg = ValidationConfig::default_for_k(1, 1).unwrap();
        cfg.t_grid = vec![0.05, 0.1, 0.15, 0.2];
        assert!(matches!(
            validate_expansion(&h, &id, &proj21(), &cfg),
            Err(Error::InvalidConfig { .. })
        ));
    }
}
