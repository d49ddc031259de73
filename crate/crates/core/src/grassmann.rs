//! Quadrature over the Grassmannian of complex lines `Gr_1(W)` of a complex
//! subspace `W` of real dimension `2k`, and verification of the Hopf
//! fiber-integration identity.
//!
//! `Gr_1(W)` is `CP^{k-1}` with the Fubini-Study volume `mu = omega^{k-1}/(k-1)!`.
//! The total mass is *not* a free normalization here: it is pinned by the Stokes
//! identity `int_{S^{2k-1}} Omega_k^{k-1} ^ Lambda = k! omega_2k = pi^k` (the left
//! side integrates `Omega_k^k` over the unit ball via `d Lambda = Omega_k`), and
//! fiber integration turns it into `(k-1)! * (per-line integral pi) * mu(Gr_1)`,
//! forcing `mu(Gr_1(W)) = pi^{k-1}/(k-1)!`. For `k = 1` the Grassmannian is a
//! single point carrying unit mass, consistent with `omega^0 = 1`.
//!
//! Uniform sampling on the unit sphere of `W` (a normalized Gaussian in a
//! complex-adapted frame) pushes forward to the Fubini-Study-uniform measure on
//! `CP^{k-1}` under the Hopf map, which is what the Monte Carlo scheme uses. For
//! `k = 2` a deterministic product grid in Hopf coordinates on `S^3` is available.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::symplinalg::{ball_volume_2k, complex_adapted_basis, omega, rotate_phase};

/// Tolerance for the phase-invariance spot check of integrands.
pub const PHASE_INVARIANCE_TOL: f64 = 1e-6;

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        out.push((mid + half * x, half * w));
    }
    out.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
    out
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature rule for the eta direction of the Hopf chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaRule {
    /// Composite Simpson on a uniform grid (clean 4th-order refinement).
    Simpson,
    /// Gauss-Legendre nodes (near machine precision for analytic integrands).
    GaussLegendre,
}

/// A product grid in Hopf coordinates on `S^3`:
/// `x(eta, phi1, phi2) = (cos eta cos phi1, cos eta sin phi1, sin eta cos phi2, sin eta sin phi2)`
/// with `eta` in `[0, pi/2]` and periodic `phi1, phi2`. The chart is negatively
/// oriented against the boundary orientation of the unit 4-ball (outward normal
/// first); the compensating sign is determined at construction from
/// `det[x, d_eta, d_phi1, d_phi2]`.
#[derive(Debug, Clone)]
pub struct HopfGrid {
    eta: Vec<(f64, f64)>,
    n_phi1: usize,
    n_phi2: usize,
    orientation: f64,
}

/// One grid node with the chart point and tangent vectors in `R^4`.
#[derive(Debug, Clone)]
pub struct HopfNode {
    pub point: DVector<f64>,
    pub tangents: [DVector<f64>; 3],
    /// Chart weight `w_eta * w_phi1 * w_phi2` (no metric factor).
    pub chart_weight: f64,
    /// Metric volume factor `cos(eta) sin(eta)` of the chart.
    pub metric_factor: f64,
}

pub fn hopf_point(eta: f64, phi1: f64, phi2: f64) -> DVector<f64> {
    let (se, ce) = eta.sin_cos();
    let (s1, c1) = phi1.sin_cos();
    let (s2, c2) = phi2.sin_cos();
    DVector::from_vec(vec![ce * c1, ce * s1, se * c2, se * s2])
}

fn hopf_tangents(eta: f64, phi1: f64, phi2: f64) -> [DVector<f64>; 3] {
    let (se, ce) = eta.sin_cos();
    let (s1, c1) = phi1.sin_cos();
    let (s2, c2) = phi2.sin_cos();
    [
        DVector::from_vec(vec![-se * c1, -se * s1, ce * c2, ce * s2]),
        DVector::from_vec(vec![-ce * s1, ce * c1, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, 0.0, -se * s2, se * c2]),
    ]
}

impl HopfGrid {
    pub fn new(eta_res: usize, n_phi1: usize, n_phi2: usize, rule: EtaRule) -> Result<Self> {
        if eta_res < 2 || n_phi1 < 4 || n_phi2 < 4 {
            return Err(Error::InvalidConfig {
                reason: "Hopf grid needs eta_res >= 2 and phi resolutions >= 4".into(),
            });
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        let eta = match rule {
            EtaRule::GaussLegendre => gauss_legendre(eta_res, 0.0, half_pi),
            EtaRule::Simpson => {
                let m = if eta_res.is_multiple_of(2) {
                    eta_res
                } else {
                    eta_res + 1
                };
                let h = half_pi / m as f64;
                (0..=m)
                    .map(|i| {
                        let w = if i == 0 || i == m {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        (i as f64 * h, w * h / 3.0)
                    })
                    .collect()
            }
        };
        // orientation of the chart against outward-normal-first, at a generic point
        let (e, f1, f2) = (0.7, 0.3, 1.1);
        let x = hopf_point(e, f1, f2);
        let t = hopf_tangents(e, f1, f2);
        let mut m = DMatrix::zeros(4, 4);
        m.set_column(0, &x);
        for (c, tc) in t.iter().enumerate() {
            m.set_column(c + 1, tc);
        }
        let orientation = m.determinant().signum();
        Ok(Self {
            eta,
            n_phi1,
            n_phi2,
            orientation,
        })
    }

    pub fn node_count(&self) -> usize {
        self.eta.len() * self.n_phi1 * self.n_phi2
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    /// All grid nodes in deterministic row-major order (eta, phi1, phi2).
    pub fn nodes(&self) -> Vec<HopfNode> {
        let w1 = 2.0 * std::f64::consts::PI / self.n_phi1 as f64;
        let w2 = 2.0 * std::f64::consts::PI / self.n_phi2 as f64;
        let mut out = Vec::with_capacity(self.node_count());
        for &(eta, we) in &self.eta {
            for i1 in 0..self.n_phi1 {
                let phi1 = i1 as f64 * w1;
                for i2 in 0..self.n_phi2 {
                    let phi2 = i2 as f64 * w2;
                    out.push(HopfNode {
                        point: hopf_point(eta, phi1, phi2),
                        tangents: hopf_tangents(eta, phi1, phi2),
                        chart_weight: we * w1 * w2,
                        metric_factor: eta.cos() * eta.sin(),
                    });
                }
            }
        }
        out
    }

    /// Integrate a 3-form over `S^3` with the boundary orientation of `B^4`:
    /// the callback receives the point and the three chart tangents.
    pub fn integrate_form<F>(&self, f: F) -> f64
    where
        F: Fn(&DVector<f64>, &[DVector<f64>; 3]) -> f64 + Sync,
    {
        let nodes = self.nodes();
        let values: Vec<f64> = nodes
            .par_iter()
            .map(|n| n.chart_weight * f(&n.point, &n.tangents))
            .collect();
        self.orientation * values.iter().sum::<f64>()
    }

    /// Integrate a scalar function against the metric volume of `S^3`.
    pub fn integrate_scalar<F>(&self, f: F) -> f64
    where
        F: Fn(&DVector<f64>) -> f64 + Sync,
    {
        let nodes = self.nodes();
        let values: Vec<f64> = nodes
            .par_iter()
            .map(|n| n.chart_weight * n.metric_factor * f(&n.point))
            .collect();
        values.iter().sum()
    }
}

/// How lines of `Gr_1(W)` are sampled or swept.
#[derive(Debug, Clone)]
pub enum LineScheme {
    /// Uniform unit vectors in `W` from a seeded Gaussian.
    MonteCarlo { count: usize, seed: u64 },
    /// Deterministic Hopf product grid on the unit sphere of `W` (k = 2 only).
    Hopf {
        eta_res: usize,
        n_phi1: usize,
        n_phi2: usize,
    },
}

impl LineScheme {
    pub fn default_monte_carlo(seed: u64) -> Self {
        Self::MonteCarlo {
            count: 20_000,
            seed,
        }
    }

    pub fn default_hopf() -> Self {
        Self::Hopf {
            eta_res: 64,
            n_phi1: 64,
            n_phi2: 64,
        }
    }
}

/// Quadrature over the complex lines of a complex `2k`-dimensional subspace `W`.
#[derive(Debug, Clone)]
pub struct GrassmannQuadrature {
    basis: DMatrix<f64>,
    k: usize,
    scheme: LineScheme,
}

/// Value and error accounting of one line integral.
#[derive(Debug, Clone)]
pub struct LineIntegral {
    pub value: f64,
    /// Monte Carlo standard error, or a refinement-based estimate for grids.
    pub std_error: f64,
    pub lines: usize,
}

impl GrassmannQuadrature {
    /// Build from any spanning set of `W`; the span must be complex.
    pub fn from_subspace(w: &DMatrix<f64>, scheme: LineScheme) -> Result<Self> {
        let basis = complex_adapted_basis(w)?;
        let k = basis.ncols() / 2;
        if let LineScheme::Hopf { .. } = scheme {
            if k != 2 {
                return Err(Error::UnsupportedK {
                    k,
                    supported: "k = 2 (Hopf grid)",
                });
            }
        }
        Ok(Self { basis, k, scheme })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn scheme(&self) -> &LineScheme {
        &self.scheme
    }

    /// Total mass `pi^{k-1}/(k-1)!` of the Fubini-Study volume.
    pub fn total_volume(&self) -> f64 {
        ball_volume_2k(self.k - 1)
    }

    /// Deterministic sample of unit vectors, one per line, for reporting.
    pub fn sample_line_points(&self, count: usize) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        (0..count).map(|_| self.random_unit(&mut rng)).collect()
    }

    fn random_unit(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let normal = rand_distr::StandardNormal;
        loop {
            let c = DVector::<f64>::from_fn(2 * self.k, |_, _| normal.sample(rng));
            let n = c.norm();
            if n > 1e-6 {
                return &self.basis * (c / n);
            }
        }
    }

    fn check_phase_invariance<G>(&self, g: &G) -> Result<()>
    where
        G: Fn(&DVector<f64>) -> Result<f64> + Sync,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0xfa5e);
        for _ in 0..4 {
            let xi = self.random_unit(&mut rng);
            let base = g(&xi)?;
            for &theta in &[1.234567, 2.642239] {
                let rotated = g(&rotate_phase(&xi, theta))?;
                let violation = (rotated - base).abs();
                if violation > PHASE_INVARIANCE_TOL * base.abs().max(1.0) {
                    return Err(Error::NotPhaseInvariant { violation });
                }
            }
        }
        Ok(())
    }

    /// `int_{Gr_1(W)} g dmu` for a function of unit vectors that is constant on
    /// complex lines (checked by sampling).
    pub fn integrate<G>(&self, g: &G) -> Result<LineIntegral>
    where
        G: Fn(&DVector<f64>) -> Result<f64> + Sync,
    {
        self.check_phase_invariance(g)?;
        if self.k == 1 {
            // single point with unit mass
            let xi: DVector<f64> = self.basis.column(0).into();
            return Ok(LineIntegral {
                value: g(&xi)?,
                std_error: 0.0,
                lines: 1,
            });
        }
        match &self.scheme {
            LineScheme::MonteCarlo { count, seed } => self.integrate_mc(g, *count, *seed),
            LineScheme::Hopf {
                eta_res,
                n_phi1,
                n_phi2,
            } => {
                let fine = self.integrate_hopf(g, *eta_res, *n_phi1, *n_phi2)?;
                let coarse = self.integrate_hopf(
                    g,
                    (*eta_res / 2).max(2),
                    (*n_phi1 / 2).max(4),
                    (*n_phi2 / 2).max(4),
                )?;
                Ok(LineIntegral {
                    value: fine,
                    std_error: (fine - coarse).abs(),
                    lines: eta_res * n_phi1 * n_phi2,
                })
            }
        }
    }

    fn integrate_mc<G>(&self, g: &G, count: usize, seed: u64) -> Result<LineIntegral>
    where
        G: Fn(&DVector<f64>) -> Result<f64> + Sync,
    {
        const CHUNK: usize = 1024;
        let chunks = count.div_ceil(CHUNK);
        // per-chunk RNG streams keep the sample set independent of thread count
        let sums: Vec<(f64, f64)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64 + 1);
                let take = CHUNK.min(count - c * CHUNK);
                let mut s = 0.0;
                let mut s2 = 0.0;
                for _ in 0..take {
                    let v = g(&self.random_unit(&mut rng))?;
                    s += v;
                    s2 += v * v;
                }
                Ok((s, s2))
            })
            .collect::<Result<_>>()?;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for (s, s2) in &sums {
            sum += s;
            sum2 += s2;
        }
        let nf = count as f64;
        let mean = sum / nf;
        let var = (sum2 / nf - mean * mean).max(0.0);
        Ok(LineIntegral {
            value: self.total_volume() * mean,
            std_error: self.total_volume() * (var / nf).sqrt(),
            lines: count,
        })
    }

    fn integrate_hopf<G>(&self, g: &G, eta: usize, p1: usize, p2: usize) -> Result<f64>
    where
        G: Fn(&DVector<f64>) -> Result<f64> + Sync,
    {
        // push-forward of the normalized S^3 volume: int g dmu = (1/2pi) int_{S^3} g
        let grid = HopfGrid::new(eta, p1, p2, EtaRule::GaussLegendre)?;
        let nodes = grid.nodes();
        let vals: Vec<f64> = nodes
            .par_iter()
            .map(|n| {
                let xi = &self.basis * &n.point;
                Ok(n.chart_weight * n.metric_factor * g(&xi)?)
            })
            .collect::<Result<_>>()?;
        Ok(vals.iter().sum::<f64>() / (2.0 * std::f64::consts::PI))
    }
}

/// A one-form `sum_i c_i(x) dx_i` on `R^{2k}` with polynomial coefficients.
#[derive(Debug, Clone)]
pub struct OneForm {
    coeffs: Vec<Polynomial>,
}

impl OneForm {
    pub fn new(coeffs: Vec<Polynomial>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "empty one-form".into(),
            });
        }
        let dim = coeffs[0].dim();
        if coeffs.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs })
    }

    /// The constant form `dx_i`.
    pub fn coordinate_differential(dim: usize, i: usize) -> Self {
        let coeffs = (0..dim)
            .map(|j| {
                if j == i {
                    Polynomial::constant(dim, 1.0)
                } else {
                    Polynomial::zero(dim)
                }
            })
            .collect();
        Self { coeffs }
    }

    /// The primitive form `Lambda = sum_j p_j dq_j` on `R^{2k}`.
    pub fn primitive(k: usize) -> Self {
        let dim = 2 * k;
        let coeffs = (0..dim)
            .map(|i| {
                if i % 2 == 1 {
                    Polynomial::coordinate(dim, i - 1)
                } else {
                    Polynomial::zero(dim)
                }
            })
            .collect();
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.eval(x) * v[i])
            .sum()
    }
}

/// Both sides of the fiber-integration identity
/// `int_{S^{2k-1}} Omega_k^{k-1} ^ eta = (k-1)! int_{Gr_1} (int_{L cap S} eta) dmu`.
#[derive(Debug, Clone)]
pub struct HopfFiberCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Number of quadrature nodes for circle (fiber) integrals.
pub const FIBER_NODES: usize = 128;

/// Integrate a one-form around the fiber circle `theta -> e^{theta J} xi`, with the
/// orientation induced by the complex structure of the line.
pub fn fiber_circle_integral(eta_form: &OneForm, xi: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..FIBER_NODES {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / FIBER_NODES as f64;
        let w = rotate_phase(xi, theta);
        let wprime = crate::symplinalg::apply_j(&w);
        acc += eta_form.eval(&w, &wprime);
    }
    2.0 * std::f64::consts::PI * acc / FIBER_NODES as f64
}

/// Verify the fiber-integration identity for `k` in `{1, 2}`.
///
/// The left side is a direct quadrature over the sphere (circle grid for `k = 1`,
/// Hopf product grid with the Simpson eta-rule for `k = 2`); the right side
/// integrates the per-line fiber circle integrals over the Grassmannian.
pub fn hopf_fiber_check(
    k: usize,
    eta_form: &OneForm,
    resolution: usize,
    scheme: LineScheme,
) -> Result<HopfFiberCheck> {
    if eta_form.dim() != 2 * k {
        return Err(Error::DimensionMismatch {
            expected: 2 * k,
            got: eta_form.dim(),
        });
    }
    match k {
        1 => {
            // Omega_k^0 = 1: both sides are the plain circle integral
            let xi = DVector::from_vec(vec![1.0, 0.0]);
            let lhs = fiber_circle_integral(eta_form, &xi);
            let quad = GrassmannQuadrature::from_subspace(&DMatrix::identity(2, 2), scheme)?;
            let r = quad.integrate(&|x: &DVector<f64>| Ok(fiber_circle_integral(eta_form, x)))?;
            Ok(HopfFiberCheck {
                lhs,
                rhs: r.value,
                gap: lhs - r.value,
            })
        }
        2 => {
            let grid = HopfGrid::new(resolution, resolution, resolution, EtaRule::Simpson)?;
            let lhs = grid.integrate_form(|x, t| {
                let e = [
                    eta_form.eval(x, &t[0]),
                    eta_form.eval(x, &t[1]),
                    eta_form.eval(x, &t[2]),
                ];
                omega(&t[0], &t[1]) * e[2] - omega(&t[0], &t[2]) * e[1] + omega(&t[1], &t[2]) * e[0]
            });
            let quad = GrassmannQuadrature::from_subspace(&DMatrix::identity(4, 4), scheme)?;
            let r = quad.integrate(&|x: &DVector<f64>| Ok(fiber_circle_integral(eta_form, x)))?;
            let rhs = r.value; // (k-1)! = 1
            Ok(HopfFiberCheck {
                lhs,
                rhs,
                gap: lhs - rhs,
            })
        }
        _ => Err(Error::UnsupportedK {
            k,
            supported: "k in {1, 2}",
        }),
    }
}
