//! The built-in invariant suite behind the `selftest` command: Wirtinger sweep,
//! area-energy sweep, Hopf fiber check, flow quality, and the `f(0)` / `f'(0)`
//! boundary checks, each reported as one pass/fail row.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::expansion::fitted_slope_about_zero;
use crate::grassmann::{hopf_fiber_check, LineScheme, OneForm};
use crate::hamflow::{flow, FlowOptions, PolyHamiltonian};
use crate::loops::{
    energy_area_gap, loop_area_by_quadrature, loop_energy_by_quadrature, FourierLoop,
};
use crate::poly::Polynomial;
use crate::shadowvol::{BoundaryGrid, BoundaryOptions, ShadowSolver};
use crate::symplinalg::{
    apply_j, ball_volume_2k, linear_shadow_volume, random_symplectic, section_volume, wedge_norm,
    wirtinger_check, ComplexProjector, FormsContext, SympLinearMap,
};

/// Outcome of one named invariant check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// Sweep sizes for the suite.
#[derive(Debug, Clone)]
pub struct SelfTestOptions {
    pub seed: u64,
    pub wirtinger_tuples: usize,
    pub loops: usize,
    pub linear_maps: usize,
    pub hopf_resolution: usize,
}

impl Default for SelfTestOptions {
    fn default() -> Self {
        Self {
            seed: 123,
            wirtinger_tuples: 2000,
            loops: 500,
            linear_maps: 200,
            hopf_resolution: 32,
        }
    }
}

fn shipped_cubic() -> PolyHamiltonian {
    PolyHamiltonian::autonomous(
        2,
        Polynomial::from_terms(4, &[(1.0, &[2, 0, 0, 1])]).unwrap(),
    )
    .unwrap()
}

fn coupled_cubic() -> PolyHamiltonian {
    PolyHamiltonian::autonomous(
        2,
        Polynomial::from_terms(4, &[(1.0, &[2, 0, 0, 1]), (1.0, &[0, 1, 2, 0])]).unwrap(),
    )
    .unwrap()
}

fn shipped_quadratics() -> Vec<PolyHamiltonian> {
    let mut terms = Vec::new();
    for i in 0..4 {
        let mut e = vec![0u32; 4];
        e[i] = 2;
        terms.push((0.5, e));
    }
    let refs: Vec<(f64, &[u32])> = terms.iter().map(|(c, e)| (*c, e.as_slice())).collect();
    vec![
        PolyHamiltonian::autonomous(2, Polynomial::from_terms(4, &refs).unwrap()).unwrap(),
        PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[1, 0, 1, 0])]).unwrap(),
        )
        .unwrap(),
    ]
}

/// Largest violation of the `i_{X_H} Omega = -dH` contract over random probes,
/// for an arbitrary candidate field (the suite passes the true field; mutation
/// tests pass corrupted ones).
pub fn iota_contract_violation<F>(h: &PolyHamiltonian, field: F, probes: usize, seed: u64) -> f64
where
    F: Fn(&DVector<f64>, f64) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2 * h.n();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let xh = field(&x, 0.0);
        worst = worst.max((crate::symplinalg::omega(&xh, &v) + h.gradient(&x, 0.0).dot(&v)).abs());
    }
    worst
}

/// Both sides of the k = 2 fiber identity for the primitive form, with the
/// Grassmannian mass scaled by `mass_factor` (1 is correct; anything else breaks
/// the identity by about that factor).
pub fn hopf_identity_sides(resolution: usize, mass_factor: f64) -> Result<(f64, f64)> {
    let lambda = OneForm::primitive(2);
    let r = hopf_fiber_check(
        2,
        &lambda,
        resolution,
        LineScheme::Hopf {
            eta_res: resolution.max(8),
            n_phi1: resolution.max(8),
            n_phi2: resolution.max(8),
        },
    )?;
    Ok((r.lhs, r.rhs * mass_factor))
}

fn check_wirtinger(opts: &SelfTestOptions) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ctx = FormsContext::new(3, 2).unwrap();
    let mut worst_violation: f64 = 0.0;
    let mut worst_equality_gap: f64 = 0.0;
    for i in 0..opts.wirtinger_tuples {
        let vs: Vec<DVector<f64>> = (0..4)
            .map(|_| DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        if wedge_norm(&vs) < 1e-6 {
            continue;
        }
        let w = match wirtinger_check(&ctx, &vs) {
            Ok(w) => w,
            Err(_) => continue,
        };
        worst_violation = worst_violation.max(w.lhs - w.rhs);
        // every other tuple: build an exactly complex span and demand equality
        if i % 2 == 0 {
            let a = &vs[0];
            let b = &vs[1];
            let tuple = [a.clone(), apply_j(a), b.clone(), apply_j(b)];
            if wedge_norm(&tuple) > 1e-6 {
                if let Ok(w) = wirtinger_check(&ctx, &tuple) {
                    worst_equality_gap = worst_equality_gap.max(w.gap / w.rhs.max(1.0));
                }
            }
        }
    }
    Check::new(
        "wirtinger",
        worst_violation <= 1e-10 && worst_equality_gap <= 1e-9,
        format!("max lhs-rhs {worst_violation:.2e}, max equality gap {worst_equality_gap:.2e}"),
    )
}

fn check_area_energy(opts: &SelfTestOptions) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xae);
    let mut worst_identity: f64 = 0.0;
    let mut worst_negative: f64 = 0.0;
    for _ in 0..opts.loops {
        let coeffs: Vec<DVector<f64>> = (0..11)
            .map(|_| DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let z = FourierLoop::from_coeffs(coeffs, 128).unwrap();
        let e = loop_energy_by_quadrature(&z).unwrap();
        let a = loop_area_by_quadrature(&z).unwrap();
        let g = energy_area_gap(&z).unwrap();
        worst_identity = worst_identity.max((g.gap - (e - a)).abs() / e.max(1.0));
        worst_negative = worst_negative.min(g.gap);
    }
    Check::new(
        "area-energy",
        worst_identity <= 1e-8 && worst_negative >= -1e-9,
        format!("max identity error {worst_identity:.2e}, min gap {worst_negative:.2e}"),
    )
}

fn check_hopf(opts: &SelfTestOptions) -> Check {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    match hopf_identity_sides(opts.hopf_resolution, 1.0) {
        Ok((lhs, rhs)) => {
            let ok = (lhs - pi2).abs() <= 1e-4 * pi2
                && (rhs - pi2).abs() <= 1e-4 * pi2
                && (lhs - rhs).abs() <= 2e-4 * pi2;
            Check::new(
                "hopf-fiber",
                ok,
                format!("lhs {lhs:.8}, rhs {rhs:.8}, target pi^2 = {pi2:.8}"),
            )
        }
        Err(e) => Check::new("hopf-fiber", false, format!("error: {e}")),
    }
}

fn check_flow_quality(opts: &SelfTestOptions) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xf1);
    let mut hams = shipped_quadratics();
    hams.push(shipped_cubic());
    hams.push(coupled_cubic());
    let mut worst_defect: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut worst_iota: f64 = 0.0;
    for h in &hams {
        worst_iota = worst_iota.max(iota_contract_violation(
            h,
            |x, t| h.vector_field(x, t),
            20,
            opts.seed,
        ));
        for _ in 0..3 {
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-0.8..0.8));
            match flow(h, &x, 0.1, &FlowOptions::default()) {
                Ok(r) => {
                    worst_defect = worst_defect.max(r.defect);
                    worst_drift = worst_drift.max(r.energy_drift);
                }
                Err(e) => {
                    return Check::new("flow-quality", false, format!("flow failed: {e}"));
                }
            }
        }
    }
    Check::new(
        "flow-quality",
        worst_defect <= 1e-8 && worst_drift <= 1e-8 && worst_iota <= 1e-12,
        format!(
            "max defect {worst_defect:.2e}, max energy drift {worst_drift:.2e}, \
             max iota violation {worst_iota:.2e}"
        ),
    )
}

fn check_boundary_baseline() -> Check {
    let h = shipped_cubic();
    let proj = match ComplexProjector::coordinate(2, 1) {
        Ok(p) => p,
        Err(e) => return Check::new("f0-slope", false, format!("{e}")),
    };
    let run = || -> Result<(f64, f64)> {
        let solver = ShadowSolver::new(
            &h,
            &SympLinearMap::identity(2),
            &proj,
            BoundaryGrid::Circle { nodes: 64 },
            BoundaryOptions::default(),
        )?;
        let f0 = solver.volume(&solver.solve(0.0)?)?;
        let slope = fitted_slope_about_zero(&h, &SympLinearMap::identity(2), &proj, 0.01)?;
        Ok((f0, slope))
    };
    match run() {
        Ok((f0, slope)) => {
            let pi = std::f64::consts::PI;
            Check::new(
                "f0-slope",
                (f0 - pi).abs() <= 1e-6 && slope.abs() <= 1e-4,
                format!("f(0) - pi = {:.2e}, fitted slope {slope:.2e}", f0 - pi),
            )
        }
        Err(e) => Check::new("f0-slope", false, format!("{e}")),
    }
}

fn check_linear_sweeps(opts: &SelfTestOptions) -> Check {
    let mut worst_shadow: f64 = f64::INFINITY;
    let mut worst_section: f64 = -f64::INFINITY;
    let mut flags_agree = true;
    let mut seed = opts.seed ^ 0x11;
    for n in 2..=3usize {
        for k in 1..=n {
            let proj = ComplexProjector::coordinate(n, k).unwrap();
            let floor = ball_volume_2k(k);
            for _ in 0..opts.linear_maps / 4 {
                seed += 1;
                let phi = match random_symplectic(n, seed, 0.5) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                if let Ok(s) = linear_shadow_volume(&phi, &proj) {
                    worst_shadow = worst_shadow.min(s.volume - floor);
                    flags_agree &= s.equality == s.volume_at_floor();
                }
                if let Ok(s) = section_volume(&phi, &proj) {
                    worst_section = worst_section.max(s.volume - floor);
                }
            }
        }
    }
    Check::new(
        "linear-bounds",
        worst_shadow >= -1e-9 && worst_section <= 1e-9 && flags_agree,
        format!(
            "min shadow gap {worst_shadow:.2e}, max section gap {worst_section:.2e}, \
             equality flags agree: {flags_agree}"
        ),
    )
}

fn check_counterexample_formulas() -> Check {
    let p = crate::counterexamples::RhoProfile::default_profile();
    let mut rng = ChaCha8Rng::seed_from_u64(0xce);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let z = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let j = crate::counterexamples::rho_map_jacobian2(&p, &z, rng.gen_range(-3.0..3.0), 20_000);
        worst = worst.max((j.closed_form - j.sampled_max).abs());
    }
    let s = crate::counterexamples::ShearProfile::with_radius(1.0).unwrap();
    let mut worst_defect: f64 = 0.0;
    for _ in 0..50 {
        let x = DVector::from_fn(4, |_, _| rng.gen_range(-2.5..2.5));
        worst_defect = worst_defect.max(crate::counterexamples::guth_shear_defect(&s, &x));
    }
    Check::new(
        "counterexample-formulas",
        worst <= 2e-4 && worst_defect <= 1e-9,
        format!("max J2 mismatch {worst:.2e}, max shear defect {worst_defect:.2e}"),
    )
}

/// Run every check; the suite passes when all rows pass.
pub fn run_all(opts: &SelfTestOptions) -> Vec<Check> {
    vec![
        check_wirtinger(opts),
        check_area_energy(opts),
        check_hopf(opts),
        check_flow_quality(opts),
        check_boundary_baseline(),
        check_linear_sweeps(opts),
        check_counterexample_formulas(),
    ]
}
