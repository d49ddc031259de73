//! Nonlinear shadow volume `f(t) = vol_2k(P psi_t(B))` through the boundary
//! parametrization, plus an independent Monte Carlo occupancy estimator.
//!
//! The flow is applied after the linear map `Psi = Phi U`, where `U` is unitary and
//! maps `V` onto `Phi^T V` (required to be complex), so that `Psi` commutes with
//! the projector `P` and the shadow boundary at `t = 0` is the unit sphere of `V`.
//! For each grid node `theta` of `S^{2k-1}` the boundary point `x_t(theta)` on the
//! unit sphere solves
//!
//! - the critical-set equation `(I - P) D psi_t(x) [J x] = 0`  (2(n-k) rows),
//! - the sphere constraint `|x|^2 = 1`                          (1 row),
//! - the ray normalization `P x` parallel to `x_0(theta)`       (2k - 1 rows),
//!
//! tracked by Newton continuation in `t` from `x_0 = ` the identity embedding.
//! The shadow volume is `f(t) = int_{S^{2k-1}} (psi_t . x_t)^* alpha` with
//! `alpha = p_1 dq_1 ^ dp_2 ^ dq_2 ^ ... ^ dp_k ^ dq_k` read in a complex-adapted
//! frame of `V`. Second derivatives of the flow enter only the Newton matrix and
//! come from central differences of the variational derivative; node tangents for
//! the pullback come from differentiating the solved system in the chart
//! coordinates (implicit function theorem), which keeps their accuracy at the
//! level of the flow derivative itself.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grassmann::gauss_legendre;
use crate::hamflow::{flow_point, flow_with_initial_map, FlowOptions, PolyHamiltonian};
use crate::loops::FourierLoop;
use crate::symplinalg::{
    apply_j, complex_adapted_basis, complex_adapted_complement, standard_j, ComplexProjector,
    FormsContext, SympLinearMap,
};

/// Discretization of the parametrizing sphere `S^{2k-1}`.
#[derive(Debug, Clone)]
pub enum BoundaryGrid {
    /// Uniform circle grid (k = 1).
    Circle { nodes: usize },
    /// Hopf-coordinate product grid on `S^3` with Gauss-Legendre eta nodes (k = 2).
    Hopf {
        eta_res: usize,
        n_phi1: usize,
        n_phi2: usize,
    },
}

impl BoundaryGrid {
    pub fn default_for_k(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Self::Circle { nodes: 256 }),
            2 => Ok(Self::Hopf {
                eta_res: 16,
                n_phi1: 16,
                n_phi2: 16,
            }),
            _ => Err(Error::UnsupportedK {
                k,
                supported: "k in {1, 2} (boundary tracking)",
            }),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Self::Circle { .. } => 1,
            Self::Hopf { .. } => 2,
        }
    }
}

/// One node of the model sphere: position, chart tangent directions, quadrature
/// weight.
#[derive(Debug, Clone)]
struct ModelNode {
    s: DVector<f64>,
    /// Chart coordinates of the node: `[theta]` for the circle,
    /// `[eta, phi1, phi2]` for the Hopf grid.
    chart: Vec<f64>,
    chart_tangents: Vec<DVector<f64>>,
    weight: f64,
}

/// Solver controls.
#[derive(Debug, Clone)]
pub struct BoundaryOptions {
    pub flow: FlowOptions,
    /// Newton convergence tolerance on the max-norm of the residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Central-difference step for second derivatives of the flow.
    pub fd_step: f64,
    /// Initial continuation step in t.
    pub t_step: f64,
    /// Give up when halving drives the continuation step below this.
    pub t_step_min: f64,
    /// Per-node residual bound for accepted boundaries.
    pub residual_tol: f64,
    /// Optional reseeding of the unitary factor inside `Psi = Phi U` (mixes the
    /// complex frame of `Phi^T V`); any choice must give the same volumes.
    pub unitary_mix_seed: Option<u64>,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        Self {
            flow: FlowOptions::solver_profile(),
            newton_tol: 1e-11,
            max_newton: 30,
            fd_step: 1e-5,
            t_step: 1e-2,
            t_step_min: 1e-5,
            residual_tol: 1e-9,
            unitary_mix_seed: None,
        }
    }
}

/// A solved boundary family at one time.
#[derive(Debug, Clone)]
pub struct ShadowBoundary {
    pub t: f64,
    /// `x_t(theta_i)` on the unit sphere of `R^{2n}`.
    pub points: Vec<DVector<f64>>,
    /// `psi_t(x_t(theta_i))`.
    pub endpoints: Vec<DVector<f64>>,
    /// `D psi_t(x_t(theta_i))`.
    pub derivatives: Vec<DMatrix<f64>>,
    /// Chart tangents `dx_t/dc_j` per node (implicit differentiation).
    pub tangents: Vec<Vec<DVector<f64>>>,
    /// Per-node norm of the critical-set equation.
    pub residuals: Vec<f64>,
    /// Per-node `| |x| - 1 |`.
    pub norm_defects: Vec<f64>,
}

impl ShadowBoundary {
    pub fn worst_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn worst_norm_defect(&self) -> f64 {
        self.norm_defects.iter().copied().fold(0.0, f64::max)
    }
}

struct NodeState {
    x: DVector<f64>,
    jac: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

/// Boundary tracker for one `(H, Phi, P)` configuration.
pub struct ShadowSolver {
    h: PolyHamiltonian,
    phi: SympLinearMap,
    psi: SympLinearMap,
    proj: ComplexProjector,
    v_perp: DMatrix<f64>,
    /// Full orthogonal frame `[v_basis | v_perp]` mapping model coordinates to lab.
    frame: DMatrix<f64>,
    forms: FormsContext,
    model: Vec<ModelNode>,
    orientation: f64,
    grid: BoundaryGrid,
    opts: BoundaryOptions,
}

impl ShadowSolver {
    pub fn new(
        h: &PolyHamiltonian,
        phi: &SympLinearMap,
        proj: &ComplexProjector,
        grid: BoundaryGrid,
        opts: BoundaryOptions,
    ) -> Result<Self> {
        let n = proj.n();
        let k = proj.k();
        if h.n() != n || phi.n() != n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: 2 * h.n(),
            });
        }
        if grid.k() != k {
            return Err(Error::UnsupportedK {
                k,
                supported: "grid dimension must match",
            });
        }
        // Phi^T V must be complex; this also produces the frame for U
        let mut w_basis = complex_adapted_basis(&(phi.matrix().transpose() * proj.basis()))?;
        if let Some(seed) = opts.unitary_mix_seed {
            let mix = crate::symplinalg::random_unitary(k, seed)?;
            w_basis *= mix.matrix();
        }
        let v_perp = complex_adapted_complement(proj.basis())?;
        let w_perp = complex_adapted_complement(&w_basis)?;
        let mut full_w = DMatrix::zeros(2 * n, 2 * n);
        full_w.view_mut((0, 0), (2 * n, 2 * k)).copy_from(&w_basis);
        full_w
            .view_mut((0, 2 * k), (2 * n, 2 * (n - k)))
            .copy_from(&w_perp);
        let mut full_v = DMatrix::zeros(2 * n, 2 * n);
        full_v
            .view_mut((0, 0), (2 * n, 2 * k))
            .copy_from(proj.basis());
        full_v
            .view_mut((0, 2 * k), (2 * n, 2 * (n - k)))
            .copy_from(&v_perp);
        let u = &full_w * full_v.transpose();
        let psi = SympLinearMap::new(phi.matrix() * u)?;
        // Psi commutes with P by construction; keep a hard check
        let comm = (psi.matrix() * proj.matrix() - proj.matrix() * psi.matrix()).amax();
        if comm > 1e-8 {
            return Err(Error::NotComplexSubspace {
                defect: comm,
                limit: 1e-8,
            });
        }
        let (model, orientation) = build_model_nodes(&grid)?;
        Ok(Self {
            h: h.clone(),
            phi: phi.clone(),
            psi,
            proj: proj.clone(),
            v_perp,
            frame: full_v,
            forms: FormsContext::new(n, k)?,
            model,
            orientation,
            grid,
            opts,
        })
    }

    pub fn psi(&self) -> &SympLinearMap {
        &self.psi
    }

    pub fn phi(&self) -> &SympLinearMap {
        &self.phi
    }

    pub fn grid(&self) -> &BoundaryGrid {
        &self.grid
    }

    pub fn node_count(&self) -> usize {
        self.model.len()
    }

    /// Chart coordinates of node `i` (`[theta]` for k = 1, `[eta, phi1, phi2]`
    /// for k = 2).
    pub fn chart_coordinates(&self, i: usize) -> &[f64] {
        &self.model[i].chart
    }

    fn n(&self) -> usize {
        self.proj.n()
    }

    fn k(&self) -> usize {
        self.proj.k()
    }

    /// Base point of a node in the lab frame.
    fn base_point(&self, node: usize) -> DVector<f64> {
        self.proj.basis() * &self.model[node].s
    }

    /// Normalization frame vectors `tau_i = v_basis Q_i s` at the node's base point.
    fn tau(&self, node: usize) -> Vec<DVector<f64>> {
        let k = self.k();
        let s = &self.model[node].s;
        sphere_frames(k)
            .iter()
            .map(|q| self.proj.basis() * (q * s))
            .collect()
    }

    /// Residual of the per-node system at `x` given the flow derivative there.
    fn residual(&self, node: usize, x: &DVector<f64>, dpsi: &DMatrix<f64>) -> DVector<f64> {
        let n2 = 2 * self.n();
        let k = self.k();
        let mut g = DVector::zeros(n2);
        let crit = self.v_perp.transpose() * (dpsi * apply_j(x));
        let rows_crit = n2 - 2 * k;
        for r in 0..rows_crit {
            g[r] = crit[r];
        }
        g[rows_crit] = 0.5 * (x.norm_squared() - 1.0);
        for (i, tau) in self.tau(node).iter().enumerate() {
            g[rows_crit + 1 + i] = tau.dot(x);
        }
        g
    }

    fn flow_at(&self, x: &DVector<f64>, t: f64) -> Result<crate::hamflow::FlowResult> {
        flow_with_initial_map(&self.h, &self.psi, x, t, &self.opts.flow)
    }

    /// Newton matrix at `x`: rows follow [`residual`]; the second derivative of the
    /// flow is taken by central differences of the variational derivative.
    fn assemble_jacobian(
        &self,
        node: usize,
        x: &DVector<f64>,
        t: f64,
    ) -> Result<(DMatrix<f64>, crate::hamflow::FlowResult)> {
        let n2 = 2 * self.n();
        let k = self.k();
        let rows_crit = n2 - 2 * k;
        let base = self.flow_at(x, t)?;
        let jx = apply_j(x);
        let mut jac = DMatrix::zeros(n2, n2);
        let delta = self.opts.fd_step;
        for j in 0..n2 {
            let mut ej = DVector::zeros(n2);
            ej[j] = 1.0;
            if rows_crit > 0 {
                let plus = self.flow_at(&(x + &ej * delta), t)?;
                let minus = self.flow_at(&(x - &ej * delta), t)?;
                let ddpsi = (&plus.derivative - &minus.derivative) / (2.0 * delta);
                let col =
                    self.v_perp.transpose() * (&ddpsi * &jx + &base.derivative * apply_j(&ej));
                for r in 0..rows_crit {
                    jac[(r, j)] = col[r];
                }
            }
            jac[(rows_crit, j)] = x[j];
        }
        for (i, tau) in self.tau(node).iter().enumerate() {
            for j in 0..n2 {
                jac[(rows_crit + 1 + i, j)] = tau[j];
            }
        }
        Ok((jac, base))
    }

    /// Chord/Newton iteration for one node. Reuses the supplied factorization and
    /// refreshes it at the current iterate when progress stalls.
    fn solve_node(&self, node: usize, state: &mut NodeState, t: f64) -> Result<()> {
        let mut x = state.x.clone();
        let mut flow_res = self.flow_at(&x, t)?;
        let mut g = self.residual(node, &x, &flow_res.derivative);
        let mut iterations = 0;
        let mut since_refresh = 0;
        while g.amax() > self.opts.newton_tol {
            if iterations >= self.opts.max_newton {
                return Err(Error::NewtonDiverged {
                    t,
                    node,
                    residual: g.amax(),
                    iterations,
                    reached_t: t,
                });
            }
            if state.jac.is_none() || since_refresh >= 8 {
                let (jac, _) = self.assemble_jacobian(node, &x, t)?;
                state.jac = Some(jac.lu());
                since_refresh = 0;
            }
            let lu = state.jac.as_ref().expect("factorization present");
            let step = lu.solve(&g).ok_or(Error::NewtonDiverged {
                t,
                node,
                residual: g.amax(),
                iterations,
                reached_t: t,
            })?;
            x -= &step;
            flow_res = self.flow_at(&x, t)?;
            g = self.residual(node, &x, &flow_res.derivative);
            iterations += 1;
            since_refresh += 1;
        }
        // ray normalization must stay on the positive side
        if x.dot(&self.base_point(node)) <= 0.0 {
            return Err(Error::NewtonDiverged {
                t,
                node,
                residual: g.amax(),
                iterations,
                reached_t: t,
            });
        }
        state.x = x;
        Ok(())
    }

    /// Extract the full boundary data at the current continuation state,
    /// assembling a fresh Newton matrix at each solution for the implicit-function
    /// tangents (and leaving it cached for the next continuation leg).
    fn extract_boundary(&self, states: &mut [NodeState], t: f64) -> Result<ShadowBoundary> {
        let k = self.k();
        let n2 = 2 * self.n();
        let rows_crit = n2 - 2 * k;
        let frames = sphere_frames(k);
        let per_node: Vec<_> = states
            .par_iter_mut()
            .enumerate()
            .map(|(node, st)| {
                let (jac, flow_res) = self.assemble_jacobian(node, &st.x, t)?;
                let lu = jac.lu();
                let mut tangents = Vec::with_capacity(2 * k - 1);
                for ct in &self.model[node].chart_tangents {
                    let mut rhs = DVector::zeros(n2);
                    for (i, q) in frames.iter().enumerate() {
                        let dtau = self.proj.basis() * (q * ct);
                        rhs[rows_crit + 1 + i] = dtau.dot(&st.x);
                    }
                    let sol = lu.solve(&rhs).ok_or(Error::NewtonDiverged {
                        t,
                        node,
                        residual: 0.0,
                        iterations: 0,
                        reached_t: t,
                    })?;
                    tangents.push(-sol);
                }
                let crit = self.v_perp.transpose() * (&flow_res.derivative * apply_j(&st.x));
                let residual = crit.norm();
                let norm_defect = (st.x.norm() - 1.0).abs();
                st.jac = Some(lu);
                Ok((
                    st.x.clone(),
                    flow_res.endpoint,
                    flow_res.derivative,
                    tangents,
                    residual,
                    norm_defect,
                ))
            })
            .collect::<Result<_>>()?;
        let mut b = ShadowBoundary {
            t,
            points: Vec::with_capacity(per_node.len()),
            endpoints: Vec::with_capacity(per_node.len()),
            derivatives: Vec::with_capacity(per_node.len()),
            tangents: Vec::with_capacity(per_node.len()),
            residuals: Vec::with_capacity(per_node.len()),
            norm_defects: Vec::with_capacity(per_node.len()),
        };
        for (x, y, d, tg, r, nd) in per_node {
            b.points.push(x);
            b.endpoints.push(y);
            b.derivatives.push(d);
            b.tangents.push(tg);
            b.residuals.push(r);
            b.norm_defects.push(nd);
        }
        Ok(b)
    }

    /// Track the boundary to each target time (all of one sign, sorted by
    /// magnitude), returning one boundary per target. Continuation starts at the
    /// identity embedding, halves its step on Newton failure, and reports the
    /// reached time when the step collapses below the minimum.
    pub fn solve_targets(&self, targets: &[f64]) -> Result<Vec<ShadowBoundary>> {
        if targets.is_empty() {
            return Ok(Vec::new());
        }
        let positive = targets.iter().any(|&t| t > 0.0);
        let negative = targets.iter().any(|&t| t < 0.0);
        if positive && negative {
            return Err(Error::InvalidConfig {
                reason: "continuation targets must share one sign".into(),
            });
        }
        let mut sorted: Vec<f64> = targets.to_vec();
        sorted.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
        let sign = if negative { -1.0 } else { 1.0 };

        let mut states: Vec<NodeState> = self
            .model
            .iter()
            .enumerate()
            .map(|(i, _)| NodeState {
                x: self.base_point(i),
                jac: None,
            })
            .collect();
        let mut t_cur = 0.0;
        let mut dt = self.opts.t_step * sign;
        let mut out = Vec::with_capacity(sorted.len());
        for &target in &sorted {
            while (target - t_cur).abs() > 1e-15 {
                let remaining = target - t_cur;
                let step = if remaining.abs() <= dt.abs() {
                    remaining
                } else {
                    dt
                };
                let t_next = t_cur + step;
                let trial: Result<Vec<DVector<f64>>> = states
                    .par_iter_mut()
                    .enumerate()
                    .map(|(node, st)| {
                        let keep = st.x.clone();
                        match self.solve_node(node, st, t_next) {
                            Ok(()) => Ok(std::mem::replace(&mut st.x, keep)),
                            Err(e) => Err(e),
                        }
                    })
                    .collect();
                match trial {
                    Ok(new_points) => {
                        for (st, x) in states.iter_mut().zip(new_points) {
                            st.x = x;
                        }
                        t_cur = t_next;
                    }
                    Err(e) => {
                        dt /= 2.0;
                        if dt.abs() < self.opts.t_step_min {
                            return Err(match e {
                                Error::NewtonDiverged {
                                    t,
                                    node,
                                    residual,
                                    iterations,
                                    ..
                                } => Error::NewtonDiverged {
                                    t,
                                    node,
                                    residual,
                                    iterations,
                                    reached_t: t_cur,
                                },
                                other => other,
                            });
                        }
                    }
                }
            }
            out.push(self.extract_boundary(&mut states, t_cur)?);
        }
        Ok(out)
    }

    /// Solve at a single time.
    pub fn solve(&self, t: f64) -> Result<ShadowBoundary> {
        Ok(self.solve_targets(&[t])?.pop().expect("one target"))
    }

    /// `f(t) = int (psi_t . x_t)^* alpha` over the grid, with the boundary form
    /// read in the complex-adapted frame of `V`. For `k = 1` the node tangents are
    /// spectral derivatives of the solved loop; for `k = 2` they are the stored
    /// implicit-function tangents.
    pub fn volume(&self, b: &ShadowBoundary) -> Result<f64> {
        if b.worst_residual() > self.opts.residual_tol {
            return Err(Error::UnconvergedBoundary {
                residual: b.worst_residual(),
            });
        }
        match self.grid {
            BoundaryGrid::Circle { nodes } => {
                let x_loop = FourierLoop::from_samples(b.points.clone(), nodes / 2 - 1)?;
                let dx = x_loop.derivative_samples();
                let mut acc = 0.0;
                for (i, w) in self.model.iter().map(|m| m.weight).enumerate() {
                    let dy = &b.derivatives[i] * &dx[i];
                    let my = self.frame.transpose() * &b.endpoints[i];
                    let mdy = self.frame.transpose() * dy;
                    acc += w * self.forms.alpha(&my, &[mdy])?;
                }
                Ok(self.orientation * acc)
            }
            BoundaryGrid::Hopf { .. } => {
                let vals: Vec<f64> = (0..self.model.len())
                    .into_par_iter()
                    .map(|i| {
                        let my = self.frame.transpose() * &b.endpoints[i];
                        let mdys: Vec<DVector<f64>> = b.tangents[i]
                            .iter()
                            .map(|tg| self.frame.transpose() * (&b.derivatives[i] * tg))
                            .collect();
                        Ok(self.model[i].weight * self.forms.alpha(&my, &mdys)?)
                    })
                    .collect::<Result<_>>()?;
                Ok(self.orientation * vals.iter().sum::<f64>())
            }
        }
    }

    /// Volume using the implicit-function tangents also for `k = 1`
    /// (cross-check of the spectral path).
    pub fn volume_from_stored_tangents(&self, b: &ShadowBoundary) -> Result<f64> {
        let vals: Vec<f64> = (0..self.model.len())
            .map(|i| {
                let my = self.frame.transpose() * &b.endpoints[i];
                let mdys: Vec<DVector<f64>> = b.tangents[i]
                    .iter()
                    .map(|tg| self.frame.transpose() * (&b.derivatives[i] * tg))
                    .collect();
                Ok(self.model[i].weight * self.forms.alpha(&my, &mdys)?)
            })
            .collect::<Result<_>>()?;
        Ok(self.orientation * vals.iter().sum::<f64>())
    }

    /// For `k = 1`: whether the projected boundary curve is free of
    /// self-intersections (the boundary integral equals the shadow volume only
    /// then).
    pub fn projected_curve_is_simple(&self, b: &ShadowBoundary) -> Option<bool> {
        if self.k() != 1 {
            return None;
        }
        let pts: Vec<(f64, f64)> = b
            .endpoints
            .iter()
            .map(|y| {
                let c = self.proj.basis().transpose() * y;
                (c[0], c[1])
            })
            .collect();
        Some(!closed_polyline_self_intersects(&pts))
    }

    /// First-order node velocity `y = J Psi^{-1} (I - P) DX_H(Psi x0) Psi J x0`
    /// predicted for small times; used to verify the observed continuation order.
    pub fn first_order_velocity(&self, node: usize) -> DVector<f64> {
        let x0 = self.base_point(node);
        let psix = self.psi.apply(&x0);
        let dx = self.h.vector_field_jacobian(&psix, 0.0);
        let v = &dx * self.psi.apply(&apply_j(&x0));
        let ip = v.clone() - self.proj.apply(&v);
        apply_j(&self.psi.inverse().apply(&ip))
    }
}

/// Constant matrices whose action on a sphere point spans its tangent space:
/// `J` for the circle; the three quaternionic structures for `S^3`.
fn sphere_frames(k: usize) -> Vec<DMatrix<f64>> {
    match k {
        1 => vec![standard_j(1)],
        2 => {
            let j = standard_j(2);
            let kq = DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0, 0.0, -1.0, 0.0, //
                    0.0, 0.0, 0.0, 1.0, //
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, -1.0, 0.0, 0.0,
                ],
            );
            let lq = DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0, 0.0, 0.0, -1.0, //
                    0.0, 0.0, -1.0, 0.0, //
                    0.0, 1.0, 0.0, 0.0, //
                    1.0, 0.0, 0.0, 0.0,
                ],
            );
            vec![j, kq, lq]
        }
        _ => unreachable!("grids exist only for k in {{1, 2}}"),
    }
}

fn build_model_nodes(grid: &BoundaryGrid) -> Result<(Vec<ModelNode>, f64)> {
    match *grid {
        BoundaryGrid::Circle { nodes } => {
            if nodes < 8 {
                return Err(Error::TooFewSamples { got: nodes, min: 8 });
            }
            let w = 2.0 * std::f64::consts::PI / nodes as f64;
            let model = (0..nodes)
                .map(|i| {
                    let th = i as f64 * w;
                    ModelNode {
                        s: DVector::from_vec(vec![th.cos(), th.sin()]),
                        chart: vec![th],
                        chart_tangents: vec![DVector::from_vec(vec![-th.sin(), th.cos()])],
                        weight: w,
                    }
                })
                .collect();
            // theta -> (cos, sin) is the positive orientation of the (p1, q1) model
            Ok((model, 1.0))
        }
        BoundaryGrid::Hopf {
            eta_res,
            n_phi1,
            n_phi2,
        } => {
            if eta_res < 4 || n_phi1 < 4 || n_phi2 < 4 {
                return Err(Error::InvalidConfig {
                    reason: "Hopf boundary grid needs at least 4 nodes per direction".into(),
                });
            }
            let eta_nodes = gauss_legendre(eta_res, 0.0, std::f64::consts::FRAC_PI_2);
            let w1 = 2.0 * std::f64::consts::PI / n_phi1 as f64;
            let w2 = 2.0 * std::f64::consts::PI / n_phi2 as f64;
            let mut model = Vec::with_capacity(eta_res * n_phi1 * n_phi2);
            for &(eta, we) in &eta_nodes {
                for i1 in 0..n_phi1 {
                    for i2 in 0..n_phi2 {
                        let phi1 = i1 as f64 * w1;
                        let phi2 = i2 as f64 * w2;
                        let (se, ce) = eta.sin_cos();
                        let (s1, c1) = phi1.sin_cos();
                        let (s2, c2) = phi2.sin_cos();
                        model.push(ModelNode {
                            s: DVector::from_vec(vec![ce * c1, ce * s1, se * c2, se * s2]),
                            chart: vec![eta, phi1, phi2],
                            chart_tangents: vec![
                                DVector::from_vec(vec![-se * c1, -se * s1, ce * c2, ce * s2]),
                                DVector::from_vec(vec![-ce * s1, ce * c1, 0.0, 0.0]),
                                DVector::from_vec(vec![0.0, 0.0, -se * s2, se * c2]),
                            ],
                            weight: we * w1 * w2,
                        });
                    }
                }
            }
            // chart orientation vs outward-normal-first, from a generic node
            let (e, f1, f2) = (0.7, 0.3, 1.1);
            let x = crate::grassmann::hopf_point(e, f1, f2);
            let mut m = DMatrix::zeros(4, 4);
            m.set_column(0, &x);
            let (se, ce) = e.sin_cos();
            let (s1, c1) = f1.sin_cos();
            let (s2, c2) = f2.sin_cos();
            m.set_column(
                1,
                &DVector::from_vec(vec![-se * c1, -se * s1, ce * c2, ce * s2]),
            );
            m.set_column(2, &DVector::from_vec(vec![-ce * s1, ce * c1, 0.0, 0.0]));
            m.set_column(3, &DVector::from_vec(vec![0.0, 0.0, -se * s2, se * c2]));
            Ok((model, m.determinant().signum()))
        }
    }
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    fn orient(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    }
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn closed_polyline_self_intersects(pts: &[(f64, f64)]) -> bool {
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // adjacent through the wrap
            }
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Convenience wrapper: solve the boundary at one time with default grid/options.
pub fn solve_boundary(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
    t: f64,
) -> Result<ShadowBoundary> {
    let grid = BoundaryGrid::default_for_k(proj.k())?;
    ShadowSolver::new(h, phi, proj, grid, BoundaryOptions::default())?.solve(t)
}

/// Convenience wrapper: the pulled-back boundary integral of a solved boundary.
pub fn boundary_shadow_volume(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
    b: &ShadowBoundary,
) -> Result<f64> {
    let grid = BoundaryGrid::default_for_k(proj.k())?;
    ShadowSolver::new(h, phi, proj, grid, BoundaryOptions::default())?.volume(b)
}

/// Monte Carlo occupancy estimate of the shadow volume.
#[derive(Debug, Clone, serde::Serialize)]
pub struct McShadowVolume {
    /// `occupied cells * cell^{2k}`.
    pub estimate: f64,
    pub cells_occupied: usize,
    pub samples: usize,
    pub cell: f64,
}

/// Sample the ball uniformly, flow each point for time `t` after `Phi`, project
/// onto `V`, and count occupied cells of side `cell`. Biased low at fixed sample
/// count and high as the cell grows; run two cell sizes to bracket.
pub fn mc_shadow_volume(
    h: &PolyHamiltonian,
    phi: &SympLinearMap,
    proj: &ComplexProjector,
    t: f64,
    samples: usize,
    cell: f64,
    seed: u64,
) -> Result<McShadowVolume> {
    if samples < 100_000 {
        return Err(Error::TooFewSamples {
            got: samples,
            min: 100_000,
        });
    }
    if cell <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: "cell size must be positive".into(),
        });
    }
    let n2 = 2 * proj.n();
    let k2 = 2 * proj.k();
    let opts = FlowOptions::solver_profile();
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let sets: Vec<HashSet<u128>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let normal = rand_distr::StandardNormal;
            let uniform = rand_distr::Uniform::new(0.0f64, 1.0);
            let take = CHUNK.min(samples - c * CHUNK);
            let mut set = HashSet::with_capacity(take);
            for _ in 0..take {
                // uniform point of the unit ball: direction times radius u^{1/2n}
                let g = DVector::<f64>::from_fn(n2, |_, _| normal.sample(&mut rng));
                let r: f64 = uniform.sample(&mut rng);
                let x = &g * (r.powf(1.0 / n2 as f64) / g.norm());
                let y = flow_point(h, &phi.apply(&x), t, &opts)?;
                let coords = proj.basis().transpose() * y;
                let mut key: u128 = 0;
                for i in 0..k2 {
                    let idx = (coords[i] / cell).floor() as i64 + (1 << 20);
                    key = (key << 21) | (idx as u128 & ((1 << 21) - 1));
                }
                set.insert(key);
            }
            Ok(set)
        })
        .collect::<Result<_>>()?;
    let mut all = HashSet::new();
    for s in sets {
        all.extend(s);
    }
    Ok(McShadowVolume {
        estimate: all.len() as f64 * cell.powi(k2 as i32),
        cells_occupied: all.len(),
        samples,
        cell,
    })
}
