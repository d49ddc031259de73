//! Acceptance suite: every mathematical guarantee of the crate, each as one
//! criterion with its stated tolerance and runtime budget, printing one pass/fail
//! line per criterion (run with `cargo test --test acceptance -- --nocapture`).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

use shadowlab_core::expansion::{
    expansion_coefficient, symmetry_condition, validate_expansion, ValidationConfig,
};
use shadowlab_core::grassmann::{hopf_fiber_check, LineScheme, OneForm};
use shadowlab_core::hamflow::{flow, FlowOptions, PolyHamiltonian};
use shadowlab_core::loops::{
    energy_area_gap, loop_area_by_quadrature, loop_energy_by_quadrature, FourierLoop,
};
use shadowlab_core::poly::Polynomial;
use shadowlab_core::shadowvol::{mc_shadow_volume, BoundaryGrid, BoundaryOptions, ShadowSolver};
use shadowlab_core::symplinalg::{
    apply_j, ball_volume_2k, complex_adapted_basis, is_complex_subspace, linear_shadow_volume,
    random_symplectic, wedge_norm, wirtinger_check, ComplexProjector, FormsContext, SympLinearMap,
};

struct Criterion {
    name: &'static str,
    budget_s: f64,
    start: Instant,
}

impl Criterion {
    fn begin(name: &'static str, budget_s: f64) -> Self {
        Self {
            name,
            budget_s,
            start: Instant::now(),
        }
    }

    fn finish(self, passed: bool, detail: &str) {
        let elapsed = self.start.elapsed().as_secs_f64();
        let verdict = if passed { "PASS" } else { "FAIL" };
        println!(
            "[{}] {verdict} ({elapsed:.2}s / budget {:.0}s) {detail}",
            self.name, self.budget_s
        );
        assert!(passed, "{} failed: {detail}", self.name);
        assert!(
            elapsed <= self.budget_s,
            "{} exceeded its runtime budget: {elapsed:.1}s > {}s",
            self.name,
            self.budget_s
        );
    }
}

fn cubic_h_n2() -> PolyHamiltonian {
    // H = p1^2 q2 on R^4
    PolyHamiltonian::autonomous(
        2,
        Polynomial::from_terms(4, &[(1.0, &[2, 0, 0, 1])]).unwrap(),
    )
    .unwrap()
}

fn cubic_h_n3() -> PolyHamiltonian {
    // H = p1^2 q3 on R^6
    PolyHamiltonian::autonomous(
        3,
        Polynomial::from_terms(6, &[(1.0, &[2, 0, 0, 0, 0, 1])]).unwrap(),
    )
    .unwrap()
}

#[test]
fn a1_linear_nonsqueezing_sweep() {
    let c = Criterion::begin("A1", 10.0);
    let mut violations = 0usize;
    let mut flag_mismatches = 0usize;
    let mut count = 0usize;
    let mut worst_gap: f64 = f64::INFINITY;
    let mut seed = 1000;
    'outer: for n in 2..=4usize {
        for k in 1..=n {
            let proj = ComplexProjector::coordinate(n, k).unwrap();
            let floor = ball_volume_2k(k);
            // one exact-equality instance per (n, k): the identity map
            let id = SympLinearMap::identity(n);
            let s = linear_shadow_volume(&id, &proj).unwrap();
            let w: Vec<DVector<f64>> = (0..2 * k).map(|c| proj.basis().column(c).into()).collect();
            if s.equality != is_complex_subspace(&w).unwrap() {
                flag_mismatches += 1;
            }
            count += 1;
            while count < 1000 * (3 * (n - 2) + k) / 9 + 1 {
                seed += 1;
                let phi = random_symplectic(n, seed, 0.6).unwrap();
                let s = linear_shadow_volume(&phi, &proj).unwrap();
                worst_gap = worst_gap.min(s.volume - floor);
                if s.volume < floor - 1e-9 {
                    violations += 1;
                }
                let wt: Vec<DVector<f64>> = {
                    let m = phi.matrix().transpose() * proj.basis();
                    (0..2 * k).map(|c| m.column(c).into()).collect()
                };
                if s.equality != is_complex_subspace(&wt).unwrap() {
                    flag_mismatches += 1;
                }
                count += 1;
                if count >= 1100 {
                    break 'outer;
                }
            }
        }
    }
    let passed = count >= 1000 && violations == 0 && flag_mismatches == 0;
    c.finish(
        passed,
        &format!(
            "{count} maps, {violations} floor violations, {flag_mismatches} flag mismatches, \
             min gap {worst_gap:.2e}"
        ),
    );
}

#[test]
fn a2_wirtinger_sweep() {
    let c = Criterion::begin("A2", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0usize;
    let mut equality_failures = 0usize;
    let mut count = 0usize;
    for (n, k) in [(2usize, 1usize), (2, 2), (3, 2), (4, 2), (4, 3)] {
        let ctx = FormsContext::new(n, k).unwrap();
        for i in 0..2000 {
            let vs: Vec<DVector<f64>> = (0..2 * k)
                .map(|_| DVector::from_fn(2 * n, |_, _| rng.gen_range(-1.0..1.0)))
                .collect();
            if wedge_norm(&vs) < 1e-8 {
                continue;
            }
            let w = wirtinger_check(&ctx, &vs).unwrap();
            count += 1;
            if w.lhs > w.rhs + 1e-10 {
                violations += 1;
            }
            // constructed complex span: equality within 1e-9 relative
            if i % 4 == 0 {
                let base: Vec<DVector<f64>> = (0..k)
                    .map(|_| DVector::from_fn(2 * n, |_, _| rng.gen_range(-1.0..1.0)))
                    .collect();
                let mut tuple = Vec::with_capacity(2 * k);
                for b in &base {
                    tuple.push(b.clone());
                    tuple.push(apply_j(b));
                }
                if wedge_norm(&tuple) > 1e-6 {
                    let w = wirtinger_check(&ctx, &tuple).unwrap();
                    count += 1;
                    if w.gap > 1e-9 * w.rhs.max(1.0) || !w.is_equality {
                        equality_failures += 1;
                    }
                }
            }
        }
    }
    let passed = count >= 10_000 && violations == 0 && equality_failures == 0;
    c.finish(
        passed,
        &format!("{count} tuples, {violations} violations, {equality_failures} equality failures"),
    );
}

#[test]
fn a3_hopf_fiber_identity() {
    let c = Criterion::begin("A3", 30.0);
    let lambda = OneForm::primitive(2);
    let r = hopf_fiber_check(
        2,
        &lambda,
        64,
        LineScheme::Hopf {
            eta_res: 48,
            n_phi1: 32,
            n_phi2: 32,
        },
    )
    .unwrap();
    let pi2 = PI * PI;
    let lhs_err = (r.lhs - pi2).abs() / pi2;
    let rhs_err = (r.rhs - pi2).abs() / pi2;
    let gap = (r.lhs - r.rhs).abs() / pi2;
    let passed = lhs_err <= 1e-4 && rhs_err <= 1e-4 && gap <= 2e-4;
    c.finish(
        passed,
        &format!(
            "lhs {:.8} (rel err {lhs_err:.2e}), rhs {:.8} (rel err {rhs_err:.2e}), gap {gap:.2e}",
            r.lhs, r.rhs
        ),
    );
}

#[test]
fn a4_area_energy() {
    let c = Criterion::begin("A4", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst_identity: f64 = 0.0;
    let mut flag_failures = 0usize;
    for i in 0..1000 {
        let coeffs: Vec<DVector<f64>> = (0..13)
            .map(|_| DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let z = FourierLoop::from_coeffs(coeffs, 128).unwrap();
        let e = loop_energy_by_quadrature(&z).unwrap();
        let a = loop_area_by_quadrature(&z).unwrap();
        let g = energy_area_gap(&z).unwrap();
        worst_identity = worst_identity.max((g.gap - (e - a)).abs() / e.max(1.0));
        // constructed harmonic circles must be flagged as the equality case,
        // and adding any higher mode must clear the flag
        if i % 4 == 0 {
            let z0 = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let z1 = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let mut coeffs = vec![DVector::zeros(4); 7];
            coeffs[3] = z0.clone();
            coeffs[4] = z1.clone();
            let harmonic = FourierLoop::from_coeffs(coeffs.clone(), 64).unwrap();
            let gh = energy_area_gap(&harmonic).unwrap();
            if !gh.is_harmonic_circle || gh.gap.abs() > 1e-9 {
                flag_failures += 1;
            }
            coeffs[5] = DVector::from_fn(4, |_, _| rng.gen_range(0.5..1.0));
            let spoiled = FourierLoop::from_coeffs(coeffs, 64).unwrap();
            let gs = energy_area_gap(&spoiled).unwrap();
            if gs.is_harmonic_circle || gs.gap <= 1e-9 {
                flag_failures += 1;
            }
        }
    }
    let passed = worst_identity <= 1e-8 && flag_failures == 0;
    c.finish(
        passed,
        &format!("max identity error {worst_identity:.2e}, {flag_failures} flag failures"),
    );
}

#[test]
fn a5_expansion_validation_k1() {
    let c = Criterion::begin("A5-k1", 300.0);
    let h = cubic_h_n2();
    let proj = ComplexProjector::coordinate(2, 1).unwrap();
    let cfg = ValidationConfig {
        t_grid: (1..=8).map(|i| i as f64 * 0.01).collect(),
        scheme: LineScheme::default_monte_carlo(5),
        grid: BoundaryGrid::Circle { nodes: 256 },
        boundary: BoundaryOptions {
            flow: FlowOptions {
                step: 5e-4,
                energy_tol: None,
                ..Default::default()
            },
            ..Default::default()
        },
    };
    let r = validate_expansion(&h, &SympLinearMap::identity(2), &proj, &cfg).unwrap();
    let fitted = r.fitted_c.unwrap();
    let rel = (fitted - r.c).abs() / r.c;
    let const_err = (r.fit_constant.unwrap() - PI).abs();
    let lin_err = r.fit_linear.unwrap().abs();
    let passed = rel <= 0.05 && const_err <= 1e-5 && lin_err <= 1e-4;
    c.finish(
        passed,
        &format!(
            "C {:.6}, fitted {fitted:.6} (rel {rel:.3e}), constant err {const_err:.2e}, \
             linear {lin_err:.2e}",
            r.c
        ),
    );
}

#[test]
fn a5_expansion_validation_k2() {
    let c = Criterion::begin("A5-k2", 1200.0);
    let h = cubic_h_n3();
    let proj = ComplexProjector::coordinate(3, 2).unwrap();
    let cfg = ValidationConfig {
        t_grid: (1..=8).map(|i| i as f64 * 0.01).collect(),
        scheme: LineScheme::Hopf {
            eta_res: 24,
            n_phi1: 16,
            n_phi2: 16,
        },
        grid: BoundaryGrid::Hopf {
            eta_res: 16,
            n_phi1: 16,
            n_phi2: 16,
        },
        boundary: BoundaryOptions::default(),
    };
    let r = validate_expansion(&h, &SympLinearMap::identity(3), &proj, &cfg).unwrap();
    let fitted = r.fitted_c.unwrap();
    let rel = (fitted - r.c).abs() / r.c;
    // hand value for this Hamiltonian: C = pi^2/6
    let hand = PI * PI / 6.0;
    let passed = rel <= 0.10;
    c.finish(
        passed,
        &format!(
            "C {:.6} (hand value {hand:.6}), fitted {fitted:.6}, rel {rel:.3e}, \
             fit constant {:.8}",
            r.c,
            r.fit_constant.unwrap()
        ),
    );
}

#[test]
fn a6_corollary_consistency() {
    let c = Criterion::begin("A6", 60.0);
    // quadratic with (I-P) X_H complex-linear on V: H = p1 p2 + q1 q2
    let h_sym = PolyHamiltonian::autonomous(
        2,
        Polynomial::from_terms(4, &[(1.0, &[1, 0, 1, 0]), (1.0, &[0, 1, 0, 1])]).unwrap(),
    )
    .unwrap();
    let proj = ComplexProjector::coordinate(2, 1).unwrap();
    let id = SympLinearMap::identity(2);
    let sym =
        expansion_coefficient(&h_sym, &id, &proj, LineScheme::default_monte_carlo(6)).unwrap();
    let sym_ok = sym.symmetry && sym.c.abs() <= sym.quadrature_error;

    // perturb by the cubic term: the flag must flip and C must clear the noise
    let h_pert = PolyHamiltonian::autonomous(
        2,
        Polynomial::from_terms(
            4,
            &[
                (1.0, &[1, 0, 1, 0]),
                (1.0, &[0, 1, 0, 1]),
                (1.0, &[2, 0, 0, 1]),
            ],
        )
        .unwrap(),
    )
    .unwrap();
    let pert =
        expansion_coefficient(&h_pert, &id, &proj, LineScheme::default_monte_carlo(7)).unwrap();
    let pert_ok = !pert.symmetry && pert.c > 3.0 * pert.quadrature_error;
    // the symmetry flag must match "every sampled loop is a harmonic circle"
    let consistency = symmetry_condition(&h_sym, &id, &proj).unwrap()
        && sym.per_line.iter().all(|l| l.gap.abs() <= 1e-8)
        && pert.per_line.iter().any(|l| l.gap > 1e-4);
    let passed = sym_ok && pert_ok && consistency;
    c.finish(
        passed,
        &format!(
            "symmetric: C {:.2e} (err {:.2e}, flag {}), perturbed: C {:.6} (err {:.2e}, flag {})",
            sym.c, sym.quadrature_error, sym.symmetry, pert.c, pert.quadrature_error, pert.symmetry
        ),
    );
}

#[test]
fn a7_flow_quality() {
    let c = Criterion::begin("A7", 60.0);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_defect: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut count = 0;
    let hams = vec![
        cubic_h_n2(),
        cubic_h_n3(),
        PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[1, 0, 1, 0])]).unwrap(),
        )
        .unwrap(),
        // genuinely coupled cubic (no conserved shear structure)
        PolyHamiltonian::autonomous(
            2,
            Polynomial::from_terms(4, &[(1.0, &[2, 0, 0, 1]), (1.0, &[0, 1, 2, 0])]).unwrap(),
        )
        .unwrap(),
    ];
    for h in &hams {
        for _ in 0..5 {
            let x = DVector::from_fn(2 * h.n(), |_, _| rng.gen_range(-0.9..0.9));
            let r = flow(h, &x, 0.1, &FlowOptions::default()).unwrap();
            worst_defect = worst_defect.max(r.defect);
            worst_drift = worst_drift.max(r.energy_drift);
            count += 1;
        }
    }
    let passed = worst_defect <= 1e-8 && worst_drift <= 1e-8;
    c.finish(
        passed,
        &format!(
            "{count} trajectories, max defect {worst_defect:.2e}, max energy drift \
             {worst_drift:.2e}"
        ),
    );
}

#[test]
fn a8_cross_estimator_agreement() {
    let c = Criterion::begin("A8", 900.0);
    let mut details = Vec::new();
    let mut passed = true;

    // shipped k = 1 examples: linear diagonal, unitary flow, cubic flow
    let proj = ComplexProjector::coordinate(2, 1).unwrap();
    let hz = PolyHamiltonian::zero(2);
    let diag = SympLinearMap::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
        2.0, 0.5, 1.0, 1.0,
    ])))
    .unwrap();
    let cases_k1: Vec<(&str, PolyHamiltonian, SympLinearMap, f64)> = vec![
        ("k1-linear-diag", hz.clone(), diag, 0.0),
        (
            "k1-unitary",
            {
                let mut terms = Vec::new();
                for i in 0..4 {
                    let mut e = vec![0u32; 4];
                    e[i] = 2;
                    terms.push((0.5, e));
                }
                let refs: Vec<(f64, &[u32])> =
                    terms.iter().map(|(c, e)| (*c, e.as_slice())).collect();
                PolyHamiltonian::autonomous(2, Polynomial::from_terms(4, &refs).unwrap()).unwrap()
            },
            SympLinearMap::identity(2),
            0.1,
        ),
        ("k1-cubic", cubic_h_n2(), SympLinearMap::identity(2), 0.05),
    ];
    for (name, h, phi, t) in &cases_k1 {
        let solver = ShadowSolver::new(
            h,
            phi,
            &proj,
            BoundaryGrid::Circle { nodes: 128 },
            BoundaryOptions::default(),
        )
        .unwrap();
        let f = solver.volume(&solver.solve(*t).unwrap()).unwrap();
        let mc = mc_shadow_volume(h, phi, &proj, *t, 1_500_000, 0.01, 4242).unwrap();
        let rel = (f - mc.estimate).abs() / f;
        passed &= rel <= 0.02;
        details.push(format!(
            "{name}: boundary {f:.5} mc {:.5} rel {rel:.3e}",
            mc.estimate
        ));
    }

    // k = 2 case
    let proj3 = ComplexProjector::coordinate(3, 2).unwrap();
    let h3 = cubic_h_n3();
    let phi3 = SympLinearMap::identity(3);
    let solver = ShadowSolver::new(
        &h3,
        &phi3,
        &proj3,
        BoundaryGrid::Hopf {
            eta_res: 12,
            n_phi1: 12,
            n_phi2: 12,
        },
        BoundaryOptions::default(),
    )
    .unwrap();
    let f = solver.volume(&solver.solve(0.05).unwrap()).unwrap();
    // cell/sample sizes calibrated on the exactly known ball (bias ~ +1%)
    let mc = mc_shadow_volume(&h3, &phi3, &proj3, 0.05, 8_000_000, 0.06, 4243).unwrap();
    let rel = (f - mc.estimate).abs() / f;
    passed &= rel <= 0.03;
    details.push(format!(
        "k2-cubic: boundary {f:.5} mc {:.5} rel {rel:.3e}",
        mc.estimate
    ));

    c.finish(passed, &details.join("; "));
}

#[test]
fn a9_counterexample_formulas() {
    let c = Criterion::begin("A9", 60.0);
    let p = shadowlab_core::counterexamples::RhoProfile::default_profile();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_j2: f64 = 0.0;
    for _ in 0..50 {
        let z = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let t = rng.gen_range(-3.0..3.0);
        let j = shadowlab_core::counterexamples::rho_map_jacobian2(&p, &z, t, 50_000);
        worst_j2 = worst_j2.max((j.closed_form - j.sampled_max).abs());
    }
    let s = shadowlab_core::counterexamples::ShearProfile::with_radius(1.0).unwrap();
    let mut worst_defect: f64 = 0.0;
    for _ in 0..200 {
        let x = DVector::from_fn(4, |_, _| rng.gen_range(-2.5..2.5));
        worst_defect = worst_defect.max(shadowlab_core::counterexamples::guth_shear_defect(&s, &x));
    }
    let passed = worst_j2 <= 1e-4 && worst_defect <= 1e-9;
    c.finish(
        passed,
        &format!("max J2 mismatch {worst_j2:.2e}, max shear defect {worst_defect:.2e}"),
    );
}

/// Extra guard: the solver's Psi construction and the complex frames behave for a
/// nontrivial Phi with complex Phi^T V (diagonal blocks), k = 1 and k = 2.
#[test]
fn frames_cover_nontrivial_phi() {
    let proj = ComplexProjector::coordinate(3, 2).unwrap();
    let phi = SympLinearMap::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
        2.0, 0.5, 1.0, 1.0, 0.25, 4.0,
    ])))
    .unwrap();
    let w = complex_adapted_basis(&(phi.matrix().transpose() * proj.basis())).unwrap();
    assert_eq!(w.ncols(), 4);
    let h = cubic_h_n3();
    let solver = ShadowSolver::new(
        &h,
        &phi,
        &proj,
        BoundaryGrid::Hopf {
            eta_res: 8,
            n_phi1: 8,
            n_phi2: 8,
        },
        BoundaryOptions::default(),
    )
    .unwrap();
    let b = solver.solve(0.0).unwrap();
    let f0 = solver.volume(&b).unwrap();
    assert!((f0 - PI * PI / 2.0).abs() < 1e-6, "f(0) = {f0}");
}
