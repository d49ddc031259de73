//! Polynomial Hamiltonians, their vector fields, symplectic time-t flows with the
//! variational equation, and the rescaled-path construction.
//!
//! The sign convention is certified, not trusted: with `Omega[u, v] = (Ju) . v` and
//! `i_{X_H} Omega = -dH`, the Hamiltonian vector field is `X_H = J grad H`, and the
//! contract `Omega[X_H(x), v] + grad H(x) . v = 0` is checked in tests.
//!
//! The integrator is the implicit midpoint rule. Its variational update is the
//! Cayley transform `(I - (h/2) A)^{-1} (I + (h/2) A)` of the midpoint Jacobian
//! `A = DX_H`, which is exactly symplectic whenever `A` is a Hamiltonian matrix, so
//! the symplecticity defect stays at roundoff level per step. An explicit RK4
//! stepper is kept as an independent cross-check path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Polynomial, ScalarPoly};
use crate::symplinalg::{apply_j, symplectic_defect, SympLinearMap};

/// One time-weighted piece `w(t) * H(x)` of a Hamiltonian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HamPiece {
    pub weight: ScalarPoly,
    pub h: Polynomial,
}

/// A polynomial function on `R^{2n}`, optionally time dependent as a finite sum
/// `H_t = sum_i w_i(t) H_i` with polynomial scalar weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyHamiltonian {
    n: usize,
    pieces: Vec<HamPiece>,
}

/// On-disk schema for an autonomous Hamiltonian:
/// `{ "n": int, "monomials": [{"coeff": real, "exps": [int x 2n]}] }` with exponent
/// order `(p_1, q_1, ..., p_n, q_n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n: usize,
    pub monomials: Vec<crate::poly::Monomial>,
}

impl PolyHamiltonian {
    pub fn autonomous(n: usize, h: Polynomial) -> Result<Self> {
        if h.dim() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: h.dim(),
            });
        }
        Ok(Self {
            n,
            pieces: vec![HamPiece {
                weight: ScalarPoly::constant(1.0),
                h,
            }],
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            pieces: vec![HamPiece {
                weight: ScalarPoly::constant(0.0),
                h: Polynomial::zero(2 * n),
            }],
        }
    }

    pub fn time_dependent(n: usize, pieces: Vec<HamPiece>) -> Result<Self> {
        for p in &pieces {
            if p.h.dim() != 2 * n {
                return Err(Error::DimensionMismatch {
                    expected: 2 * n,
                    got: p.h.dim(),
                });
            }
        }
        Ok(Self { n, pieces })
    }

    pub fn from_spec(spec: &HamiltonianSpec) -> Result<Self> {
        let h = Polynomial::new(2 * spec.n, spec.monomials.clone())?;
        Self::autonomous(spec.n, h)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: HamiltonianSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig {
                reason: format!("bad Hamiltonian JSON: {e}"),
            })?;
        Self::from_spec(&spec)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: HamiltonianSpec = toml::from_str(text).map_err(|e| Error::InvalidConfig {
            reason: format!("bad Hamiltonian TOML: {e}"),
        })?;
        Self::from_spec(&spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn is_autonomous(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| p.weight.coeffs.iter().skip(1).all(|&c| c == 0.0))
    }

    /// The frozen polynomial `H_t` at a fixed time (exact coefficients).
    pub fn frozen_at(&self, t: f64) -> Polynomial {
        let mut acc = Polynomial::zero(2 * self.n);
        for p in &self.pieces {
            acc = acc
                .add(&p.h.scale(p.weight.eval(t)))
                .expect("same dimension");
        }
        acc
    }

    pub fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.weight.eval(t) * p.h.eval(x))
            .sum()
    }

    pub fn gradient(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut g = DVector::zeros(2 * self.n);
        for p in &self.pieces {
            let w = p.weight.eval(t);
            if w != 0.0 {
                g += p.h.gradient(x) * w;
            }
        }
        g
    }

    pub fn hessian(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(2 * self.n, 2 * self.n);
        for p in &self.pieces {
            let w = p.weight.eval(t);
            if w != 0.0 {
                h += p.h.hessian(x) * w;
            }
        }
        h
    }

    /// The Hamiltonian vector field `X_H(x) = J grad H_t(x)`.
    pub fn vector_field(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        apply_j(&self.gradient(x, t))
    }

    /// `D X_H(x) = J Hess H_t(x)`.
    pub fn vector_field_jacobian(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64> {
        let hess = self.hessian(x, t);
        let mut out = DMatrix::zeros(2 * self.n, 2 * self.n);
        for a in 0..self.n {
            for c in 0..2 * self.n {
                out[(2 * a, c)] = -hess[(2 * a + 1, c)];
                out[(2 * a + 1, c)] = hess[(2 * a, c)];
            }
        }
        out
    }

    /// Residual of the defining contract `Omega[X_H(x), v] + grad H(x) . v = 0`.
    pub fn iota_contract_defect(&self, x: &DVector<f64>, v: &DVector<f64>, t: f64) -> f64 {
        let xh = self.vector_field(x, t);
        (crate::symplinalg::omega(&xh, v) + self.gradient(x, t).dot(v)).abs()
    }
}

/// Integration controls for [`flow`].
#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Requested step size (the actual step divides `t` evenly and never exceeds this).
    pub step: f64,
    /// Fixed-point tolerance of the implicit midpoint solve.
    pub fixed_point_tol: f64,
    /// Largest acceptable symplecticity defect of the flow derivative.
    pub defect_tol: f64,
    /// When set and the Hamiltonian is autonomous, largest acceptable relative
    /// energy drift along the trajectory; violations trigger step halving.
    pub energy_tol: Option<f64>,
    /// Blow-up guard on `|x|`.
    pub blowup_bound: f64,
    /// How many times the step may be halved before giving up.
    pub max_halvings: u32,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            step: 1e-4,
            fixed_point_tol: 1e-13,
            defect_tol: 1e-8,
            energy_tol: Some(1e-8),
            blowup_bound: 1e6,
            max_halvings: 20,
        }
    }
}

impl FlowOptions {
    /// Faster profile for inner solver loops: position accuracy ~ O(step^2) with
    /// the defect gate kept, the energy gate dropped.
    pub fn solver_profile() -> Self {
        Self {
            step: 1e-3,
            energy_tol: None,
            ..Self::default()
        }
    }
}

/// Endpoint, flow derivative and quality measures of one time-t flow.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub t: f64,
    /// `psi_t(x)`.
    pub endpoint: DVector<f64>,
    /// `D psi_t(x)` from the variational equation.
    pub derivative: DMatrix<f64>,
    /// `||D psi_t^T J D psi_t - J||_max`.
    pub defect: f64,
    /// Relative energy drift along the trajectory (autonomous Hamiltonians only).
    pub energy_drift: f64,
    pub steps: usize,
}

fn midpoint_state_step(
    h: &PolyHamiltonian,
    x: &DVector<f64>,
    t_mid: f64,
    dt: f64,
    fp_tol: f64,
) -> Result<DVector<f64>> {
    let mut mid = x + h.vector_field(x, t_mid) * (dt / 2.0);
    let mut converged = false;
    for _ in 0..60 {
        let next = x + h.vector_field(&mid, t_mid) * (dt / 2.0);
        let delta = (&next - &mid).amax();
        mid = next;
        if delta <= fp_tol * (1.0 + mid.amax()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FlowNonConvergent { t: t_mid, step: dt });
    }
    Ok(mid)
}

fn integrate_midpoint(
    h: &PolyHamiltonian,
    x0: &DVector<f64>,
    t: f64,
    dt_req: f64,
    opts: &FlowOptions,
    with_derivative: bool,
) -> Result<FlowResult> {
    let dim = 2 * h.n();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    let n_steps = if t == 0.0 {
        0
    } else {
        (t.abs() / dt_req).ceil().max(1.0) as usize
    };
    let dt = if n_steps == 0 {
        0.0
    } else {
        t / n_steps as f64
    };
    let autonomous = h.is_autonomous();
    let e0 = if autonomous { h.value(x0, 0.0) } else { 0.0 };
    let mut x = x0.clone();
    let mut deriv = DMatrix::identity(dim, dim);
    let id = DMatrix::identity(dim, dim);
    let mut energy_drift: f64 = 0.0;
    for step in 0..n_steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let mid = midpoint_state_step(h, &x, t_mid, dt, opts.fixed_point_tol)?;
        x = &mid * 2.0 - &x;
        let time = (step + 1) as f64 * dt;
        if x.norm() > opts.blowup_bound {
            return Err(Error::FlowBlowUp {
                t: time,
                norm: x.norm(),
                bound: opts.blowup_bound,
            });
        }
        if with_derivative {
            let a = h.vector_field_jacobian(&mid, t_mid);
            let lhs = &id - &a * (dt / 2.0);
            let rhs = (&id + &a * (dt / 2.0)) * &deriv;
            deriv = lhs
                .lu()
                .solve(&rhs)
                .ok_or(Error::FlowNonConvergent { t: time, step: dt })?;
        }
        if autonomous {
            let drift = (h.value(&x, time) - e0).abs() / (1.0 + e0.abs());
            energy_drift = energy_drift.max(drift);
        }
    }
    let defect = if with_derivative {
        symplectic_defect(&deriv)
    } else {
        0.0
    };
    Ok(FlowResult {
        t,
        endpoint: x,
        derivative: deriv,
        defect,
        energy_drift,
        steps: n_steps,
    })
}

/// Flow `x` for time `t` under `H`, integrating the variational equation
/// `d/dt D psi = DX_H(psi) D psi` alongside the state. The step is halved until
/// both the symplecticity defect and (for autonomous `H`, when enabled) the
/// relative energy drift meet their tolerances.
pub fn flow(
    h: &PolyHamiltonian,
    x: &DVector<f64>,
    t: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    let mut dt = opts.step;
    for _ in 0..=opts.max_halvings {
        let r = integrate_midpoint(h, x, t, dt, opts, true)?;
        let defect_ok = r.defect <= opts.defect_tol;
        let energy_ok = match opts.energy_tol {
            Some(tol) if h.is_autonomous() => r.energy_drift <= tol,
            _ => true,
        };
        if defect_ok && energy_ok {
            return Ok(r);
        }
        dt /= 2.0;
    }
    Err(Error::StepControlExhausted {
        step: dt,
        min_step: opts.step / 2f64.powi(opts.max_halvings as i32),
    })
}

/// Flow of the state only (no variational equation); used by Monte Carlo sweeps.
pub fn flow_point(
    h: &PolyHamiltonian,
    x: &DVector<f64>,
    t: f64,
    opts: &FlowOptions,
) -> Result<DVector<f64>> {
    Ok(integrate_midpoint(h, x, t, opts.step, opts, false)?.endpoint)
}

/// The flow applied after a linear symplectic map:
/// `psi_t(x) = (flow of H for time t)(Phi x)`, `D psi_t(x) = (flow derivative) Phi`.
pub fn flow_with_initial_map(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    x: &DVector<f64>,
    t: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    let start = phi.apply(x);
    let mut r = flow(h, &start, t, opts)?;
    r.derivative = &r.derivative * phi.matrix();
    r.defect = symplectic_defect(&r.derivative);
    Ok(r)
}

/// Explicit RK4 integration of state + variational equation (cross-check path;
/// not symplectic, defect only monitored).
pub fn flow_rk4(h: &PolyHamiltonian, x0: &DVector<f64>, t: f64, dt_req: f64) -> Result<FlowResult> {
    let dim = 2 * h.n();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    let n_steps = if t == 0.0 {
        0
    } else {
        (t.abs() / dt_req).ceil().max(1.0) as usize
    };
    let dt = if n_steps == 0 {
        0.0
    } else {
        t / n_steps as f64
    };
    let autonomous = h.is_autonomous();
    let e0 = if autonomous { h.value(x0, 0.0) } else { 0.0 };
    let mut x = x0.clone();
    let mut m = DMatrix::<f64>::identity(dim, dim);
    let mut energy_drift: f64 = 0.0;
    for step in 0..n_steps {
        let t0 = step as f64 * dt;
        let rhs = |xx: &DVector<f64>, mm: &DMatrix<f64>, tt: f64| {
            (h.vector_field(xx, tt), h.vector_field_jacobian(xx, tt) * mm)
        };
        let (k1x, k1m) = rhs(&x, &m, t0);
        let (k2x, k2m) = rhs(
            &(&x + &k1x * (dt / 2.0)),
            &(&m + &k1m * (dt / 2.0)),
            t0 + dt / 2.0,
        );
        let (k3x, k3m) = rhs(
            &(&x + &k2x * (dt / 2.0)),
            &(&m + &k2m * (dt / 2.0)),
            t0 + dt / 2.0,
        );
        let (k4x, k4m) = rhs(&(&x + &k3x * dt), &(&m + &k3m * dt), t0 + dt);
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
        m += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (dt / 6.0);
        if autonomous {
            let drift = (h.value(&x, t0 + dt) - e0).abs() / (1.0 + e0.abs());
            energy_drift = energy_drift.max(drift);
        }
    }
    Ok(FlowResult {
        t,
        endpoint: x,
        defect: symplectic_defect(&m),
        derivative: m,
        energy_drift,
        steps: n_steps,
    })
}

/// A map of `R^{2n}` that can be evaluated and differentiated anywhere.
pub trait SympMap {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn derivative(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
}

impl SympMap for SympLinearMap {
    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.apply(x))
    }

    fn derivative(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.matrix().clone())
    }
}

/// A fixed-time flow map `x -> psi_t(Phi x)`, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct FlowMap {
    pub h: PolyHamiltonian,
    pub initial: SympLinearMap,
    pub t: f64,
    pub opts: FlowOptions,
}

impl SympMap for FlowMap {
    fn dim(&self) -> usize {
        2 * self.h.n()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(flow_with_initial_map(&self.h, &self.initial, x, self.t, &self.opts)?.endpoint)
    }

    fn derivative(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(flow_with_initial_map(&self.h, &self.initial, x, self.t, &self.opts)?.derivative)
    }
}

/// The rescaled path `phi_s(x) = (phi(s x) - phi(0)) / s` that turns a fixed
/// diffeomorphism into a path of maps through its linearization; at `s = 0` it is
/// `D phi(0) x`, and `D phi_s(x) = D phi(s x)`.
pub struct PathMap<M: SympMap> {
    base: M,
    s: f64,
}

impl<M: SympMap> PathMap<M> {
    pub fn new(base: M, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidConfig {
                reason: format!("path parameter must lie in [0, 1], got {s}"),
            });
        }
        Ok(Self { base, s })
    }

    /// Rounding amplification of the difference quotient at `x`: near `s = 0` the
    /// subtraction `phi(sx) - phi(0)` loses roughly this factor in precision.
    pub fn conditioning(&self, x: &DVector<f64>) -> Result<f64> {
        if self.s == 0.0 {
            return Ok(1.0);
        }
        let at0 = self.base.eval(&DVector::zeros(self.base.dim()))?;
        let atx = self.base.eval(&(x * self.s))?;
        let diff = (&atx - &at0).norm();
        Ok((atx.norm() + at0.norm()) / diff.max(1e-300))
    }
}

impl<M: SympMap> SympMap for PathMap<M> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.s == 0.0 {
            let d0 = self.base.derivative(&DVector::zeros(self.base.dim()))?;
            return Ok(d0 * x);
        }
        let at0 = self.base.eval(&DVector::zeros(self.base.dim()))?;
        let atx = self.base.eval(&(x * self.s))?;
        Ok((atx - at0) / self.s)
    }

    fn derivative(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.base.derivative(&(x * self.s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplinalg::standard_j;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn quadratic_norm_hamiltonian(n: usize) -> PolyHamiltonian {
        let mut terms = Vec::new();
        for i in 0..2 * n {
            let mut e = vec![0u32; 2 * n];
            e[i] = 2;
            terms.push((0.5, e));
        }
        let refs: Vec<(f64, &[u32])> = terms.iter().map(|(c, e)| (*c, e.as_slice())).collect();
        PolyHamiltonian::autonomous(n, Polynomial::from_terms(2 * n, &refs).unwrap()).unwrap()
    }

    fn cubic_hamiltonian() -> PolyHamiltonian {
        // H = p1^2 q2 on R^4
        PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[2, 0, 0, 1])]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn vector_field_examples() {
        let n = 2;
        let h = quadratic_norm_hamiltonian(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        assert!((h.vector_field(&x, 0.0) - apply_j(&x)).amax() < 1e-14);

        // H = p1 on R^2: constant field along q1
        let hp =
            PolyHamiltonian::autonomous(1, Polynomial::from_terms(2, &[(1.0, &[1, 0])]).unwrap())
                .unwrap();
        let x1 = DVector::from_vec(vec![0.3, -0.7]);
        let f = hp.vector_field(&x1, 0.0);
        assert!((f[0] - 0.0).abs() < 1e-15 && (f[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn iota_contract_certifies_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = cubic_hamiltonian();
        for _ in 0..50 {
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let v = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            assert!(h.iota_contract_defect(&x, &v, 0.0) < 1e-12);
        }
        // a flipped field violates the contract
        let x = DVector::from_vec(vec![0.5, 0.2, -0.3, 0.8]);
        let v = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let flipped = -h.vector_field(&x, 0.0);
        let defect = (crate::symplinalg::omega(&flipped, &v) + h.gradient(&x, 0.0).dot(&v)).abs();
        assert!(defect > 1e-3);
    }

    #[test]
    fn rotation_flow_closed_form() {
        let n = 2;
        let h = quadratic_norm_hamiltonian(n);
        let x = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1]);
        let t = PI / 2.0;
        let opts = FlowOptions {
            step: 1e-4,
            ..Default::default()
        };
        let r = flow(&h, &x, t, &opts).unwrap();
        // midpoint phase error is t h^2 / 12 ~ 1.3e-9 at this step
        let expected = crate::symplinalg::rotate_phase(&x, t);
        assert!((&r.endpoint - &expected).amax() < 5e-9);
        let j = standard_j(n);
        let rot = (j * t).exp();
        assert!((&r.derivative - &rot).amax() < 5e-9);
        assert!(r.defect <= 1e-10);
        assert!(r.energy_drift <= 1e-12); // midpoint is exact on quadratic invariants
    }

    #[test]
    fn hyperbolic_flow_matches_exponential() {
        // H = p1 q1 on R^2: p' = -p, q' = q
        let h =
            PolyHamiltonian::autonomous(1, Polynomial::from_terms(2, &[(1.0, &[1, 1])]).unwrap())
                .unwrap();
        let x = DVector::from_vec(vec![0.7, -0.4]);
        let r = flow(&h, &x, 1.0, &FlowOptions::default()).unwrap();
        assert!((r.endpoint[0] - 0.7 * (-1.0f64).exp()).abs() < 1e-8);
        assert!((r.endpoint[1] + 0.4 * 1.0f64.exp()).abs() < 1e-8);
        assert!((r.derivative[(0, 0)] - (-1.0f64).exp()).abs() < 1e-8);
        assert!((r.derivative[(1, 1)] - 1.0f64.exp()).abs() < 1e-8);
        assert!(r.defect <= 1e-8 && r.energy_drift <= 1e-8);
    }

    #[test]
    fn small_time_derivative_expansion() {
        let h = cubic_hamiltonian();
        let x = DVector::from_vec(vec![0.4, 0.1, -0.3, 0.6]);
        let t = 1e-3;
        let r = flow(
            &h,
            &x,
            t,
            &FlowOptions {
                step: 1e-5,
                ..Default::default()
            },
        )
        .unwrap();
        let first_order = DMatrix::identity(4, 4) + h.vector_field_jacobian(&x, 0.0) * t;
        assert!((&r.derivative - &first_order).amax() < 5.0 * t * t);
    }

    #[test]
    fn polynomial_shear_flow_has_closed_form() {
        // H = chi(p2) p1 with chi(s) = s^3 - 2 s: time-one map is
        // (p1, q1 + chi(p2), p2, q2 + chi'(p2) p1)
        let h = PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[1, 0, 3, 0]), (-2.0, &[1, 0, 1, 0])]).unwrap(),
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.3, -0.5, 0.8, 0.2]);
        let chi = |s: f64| s * s * s - 2.0 * s;
        let chi_p = |s: f64| 3.0 * s * s - 2.0;
        let r = flow(
            &h,
            &x,
            1.0,
            &FlowOptions {
                step: 1e-2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((r.endpoint[0] - x[0]).abs() < 1e-10);
        assert!((r.endpoint[1] - (x[1] + chi(x[2]))).abs() < 1e-9);
        assert!((r.endpoint[2] - x[2]).abs() < 1e-10);
        assert!((r.endpoint[3] - (x[3] + chi_p(x[2]) * x[0])).abs() < 1e-9);
    }

    #[test]
    fn group_property_autonomous() {
        let h = cubic_hamiltonian();
        let x = DVector::from_vec(vec![0.2, 0.4, -0.1, 0.3]);
        let opts = FlowOptions {
            step: 1e-3,
            ..Default::default()
        };
        let direct = flow(&h, &x, 0.09, &opts).unwrap();
        let first = flow(&h, &x, 0.04, &opts).unwrap();
        let second = flow(&h, &first.endpoint, 0.05, &opts).unwrap();
        assert!((&direct.endpoint - &second.endpoint).amax() < 1e-7);
    }

    #[test]
    fn variational_matches_finite_differences() {
        let h = cubic_hamiltonian();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let opts = FlowOptions {
            step: 5e-4,
            ..Default::default()
        };
        let x = DVector::from_fn(4, |_, _| rng.gen_range(-0.8..0.8));
        let r = flow(&h, &x, 0.1, &opts).unwrap();
        for _ in 0..4 {
            let v = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let eps = 1e-5;
            let plus = flow(&h, &(&x + &v * eps), 0.1, &opts).unwrap();
            let minus = flow(&h, &(&x - &v * eps), 0.1, &opts).unwrap();
            let fd = (plus.endpoint - minus.endpoint) / (2.0 * eps);
            let dv = &r.derivative * &v;
            assert!((&dv - &fd).amax() <= 1e-6 * (1.0 + dv.amax()));
        }
    }

    #[test]
    fn rk4_cross_checks_midpoint() {
        let h = cubic_hamiltonian();
        let x = DVector::from_vec(vec![0.5, -0.2, 0.1, 0.4]);
        let mid = flow(
            &h,
            &x,
            0.1,
            &FlowOptions {
                step: 1e-3,
                ..Default::default()
            },
        )
        .unwrap();
        let rk = flow_rk4(&h, &x, 0.1, 1e-3).unwrap();
        assert!((&mid.endpoint - &rk.endpoint).amax() < 1e-8);
        assert!((&mid.derivative - &rk.derivative).amax() < 1e-7);
    }

    #[test]
    fn initial_map_composition() {
        let h = quadratic_norm_hamiltonian(2);
        let phi = crate::symplinalg::random_symplectic(2, 5, 0.4).unwrap();
        let x = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        // t = 0 reduces to the linear map
        let r0 = flow_with_initial_map(&h, &phi, &x, 0.0, &FlowOptions::default()).unwrap();
        assert!((&r0.endpoint - &phi.apply(&x)).amax() < 1e-14);
        assert!((&r0.derivative - phi.matrix()).amax() < 1e-14);
        // H = 0 stays the linear map for all t
        let hz = PolyHamiltonian::zero(2);
        let rz = flow_with_initial_map(&hz, &phi, &x, 0.7, &FlowOptions::default()).unwrap();
        assert!((&rz.endpoint - &phi.apply(&x)).amax() < 1e-12);
        // quadratic norm flow: psi_t = e^{tJ} Phi
        let t = 0.3;
        let r = flow_with_initial_map(&h, &phi, &x, t, &FlowOptions::default()).unwrap();
        let expected = crate::symplinalg::rotate_phase(&phi.apply(&x), t);
        assert!((&r.endpoint - &expected).amax() < 1e-9);
    }

    #[test]
    fn flow_errors_are_reported() {
        // H = -p^2 q: p' = p^2 blows up at t = 1/p(0)
        let h =
            PolyHamiltonian::autonomous(1, Polynomial::from_terms(2, &[(-1.0, &[2, 1])]).unwrap())
                .unwrap();
        let x = DVector::from_vec(vec![1.0, 0.5]);
        let r = flow(
            &h,
            &x,
            2.0,
            &FlowOptions {
                step: 1e-3,
                energy_tol: None,
                blowup_bound: 1e3,
                ..Default::default()
            },
        );
        assert!(matches!(
            r,
            Err(Error::FlowBlowUp { .. }) | Err(Error::FlowNonConvergent { .. })
        ));
    }

    #[test]
    fn path_map_examples() {
        // linear base: the path is constant in s
        let phi = crate::symplinalg::random_symplectic(2, 8, 0.3).unwrap();
        let x = DVector::from_vec(vec![0.4, -0.1, 0.2, 0.5]);
        for &s in &[0.0, 0.25, 1.0] {
            let p = PathMap::new(phi.clone(), s).unwrap();
            assert!((p.eval(&x).unwrap() - phi.apply(&x)).amax() < 1e-12);
        }

        // nonlinear base with phi(0) = 0: s = 1 recovers the map itself
        let fm = FlowMap {
            h: cubic_hamiltonian(),
            initial: SympLinearMap::identity(2),
            t: 0.05,
            opts: FlowOptions {
                step: 1e-3,
                ..Default::default()
            },
        };
        let direct = fm.eval(&x).unwrap();
        let p1 = PathMap::new(fm, 1.0).unwrap();
        assert!((p1.eval(&x).unwrap() - direct).amax() < 1e-12);

        // D phi_s(0) = D phi(0) for every s (chain rule at the origin)
        let zero = DVector::zeros(4);
        let base = FlowMap {
            h: cubic_hamiltonian(),
            initial: SympLinearMap::identity(2),
            t: 0.05,
            opts: FlowOptions {
                step: 1e-3,
                ..Default::default()
            },
        };
        let d_at_0 = base.derivative(&zero).unwrap();
        for &s in &[0.0, 0.3, 0.9] {
            let p = PathMap::new(base.clone(), s).unwrap();
            assert!((p.derivative(&zero).unwrap() - &d_at_0).amax() < 1e-10);
        }
        // conditioning estimate grows as s shrinks when phi(0) != 0
        let translating = FlowMap {
            h: PolyHamiltonian::autonomous(
                2,
                Polynomial::from_terms(4, &[(1.0, &[1, 0, 0, 0])]).unwrap(),
            )
            .unwrap(),
            initial: SympLinearMap::identity(2),
            t: 0.5,
            opts: FlowOptions {
                step: 1e-3,
                ..Default::default()
            },
        };
        let p_small = PathMap::new(translating.clone(), 0.01).unwrap();
        let p_big = PathMap::new(translating, 1.0).unwrap();
        assert!(p_small.conditioning(&x).unwrap() > 10.0 * p_big.conditioning(&x).unwrap());
    }

    #[test]
    fn hamiltonian_file_schemas() {
        let json = r#"{ "n": 2, "monomials": [ { "coeff": 1.0, "exps": [2, 0, 0, 1] } ] }"#;
        let h = PolyHamiltonian::from_json(json).unwrap();
        let x = DVector::from_vec(vec![2.0, 0.0, 0.0, 3.0]);
        assert!((h.value(&x, 0.0) - 12.0).abs() < 1e-14);

        let toml_text = "n = 2\n\n[[monomials]]\ncoeff = 1.0\nexps = [2, 0, 0, 1]\n";
        let h2 = PolyHamiltonian::from_toml(toml_text).unwrap();
        assert!((h2.value(&x, 0.0) - 12.0).abs() < 1e-14);
    }

    #[test]
    fn time_dependent_weights() {
        // H_t = (1 + t) * p1 q1
        let h = PolyHamiltonian::time_dependent(
            1,
            vec![HamPiece {
                weight: ScalarPoly::new(vec![1.0, 1.0]),
                h: Polynomial::from_terms(2, &[(1.0, &[1, 1])]).unwrap(),
            }],
        )
        .unwrap();
        assert!(!h.is_autonomous());
        let frozen = h.frozen_at(0.0);
        let x = DVector::from_vec(vec![0.5, 0.3]);
        assert!((frozen.eval(&x) - 0.15).abs() < 1e-15);
        assert!((h.value(&x, 1.0) - 0.30).abs() < 1e-15);
    }
}
