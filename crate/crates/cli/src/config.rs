//! Run configuration: TOML or JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use shadowlab_core::grassmann::LineScheme;
use shadowlab_core::hamflow::PolyHamiltonian;
use shadowlab_core::shadowvol::{BoundaryGrid, BoundaryOptions};
use shadowlab_core::symplinalg::{random_symplectic, ComplexProjector, SympLinearMap};

/// How the linear map is specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[derive(Default)]
pub enum PhiSpec {
    #[default]
    Identity,
    Random {
        seed: u64,
        scale: f64,
    },
    /// Row-major JSON array file (`[[...], [...], ...]`).
    Matrix {
        path: PathBuf,
    },
    Diagonal {
        entries: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct QuadratureConfig {
    /// "monte-carlo" or "hopf".
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_lines")]
    pub lines: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hopf_res")]
    pub eta_res: usize,
    #[serde(default = "default_hopf_res")]
    pub phi_res: usize,
}

fn default_scheme() -> String {
    "monte-carlo".into()
}

fn default_lines() -> usize {
    20_000
}

fn default_hopf_res() -> usize {
    24
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            lines: default_lines(),
            seed: 0,
            eta_res: default_hopf_res(),
            phi_res: default_hopf_res(),
        }
    }
}

impl QuadratureConfig {
    pub fn line_scheme(&self, k: usize) -> Result<LineScheme> {
        match self.scheme.as_str() {
            "monte-carlo" => Ok(LineScheme::MonteCarlo {
                count: self.lines,
                seed: self.seed,
            }),
            "hopf" => {
                if k != 2 {
                    bail!("the hopf quadrature scheme needs k = 2, got k = {k}");
                }
                Ok(LineScheme::Hopf {
                    eta_res: self.eta_res,
                    n_phi1: self.phi_res,
                    n_phi2: self.phi_res,
                })
            }
            other => bail!("unknown quadrature scheme '{other}' (monte-carlo | hopf)"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_nonsqueezing_tol")]
    pub nonsqueezing: f64,
    #[serde(default = "default_residual_tol")]
    pub boundary_residual: f64,
    #[serde(default = "default_agreement")]
    pub estimator_agreement: f64,
}

fn default_nonsqueezing_tol() -> f64 {
    1e-9
}

fn default_residual_tol() -> f64 {
    1e-9
}

fn default_agreement() -> f64 {
    0.02
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            nonsqueezing: default_nonsqueezing_tol(),
            boundary_residual: default_residual_tol(),
            estimator_agreement: default_agreement(),
        }
    }
}

/// Radial profile of the plane twist, as numerator/denominator coefficients in
/// `u = r^2` (increasing degree order).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RhoConfig {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_r_max() -> f64 {
    5.0
}

/// Plateau shear parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ShearConfig {
    pub r: f64,
    pub eps: f64,
    #[serde(default = "default_corner")]
    pub corner: f64,
}

fn default_corner() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_experiment")]
    pub experiment: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Path to a Hamiltonian spec file (JSON or TOML).
    #[serde(default)]
    pub hamiltonian: Option<PathBuf>,
    #[serde(default)]
    pub phi: PhiSpec,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    /// Times for boundary tracking and fits.
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Random-map count for sweep commands.
    #[serde(default = "default_sweep")]
    pub sweep: usize,
    /// Monte Carlo sample count for occupancy estimates.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Occupancy cell sizes (two sizes bracket the estimate).
    #[serde(default = "default_cells")]
    pub cells: Vec<f64>,
    /// Boundary grid sizes: circle nodes for k = 1.
    #[serde(default = "default_circle_nodes")]
    pub circle_nodes: usize,
    /// Boundary grid per-direction resolution for k = 2.
    #[serde(default = "default_boundary_res")]
    pub boundary_res: usize,
    /// Twist profile override (default `(1 + u/16)/(1 + u/8)`).
    #[serde(default)]
    pub rho: Option<RhoConfig>,
    /// Shear profile override (default `R = 1, eps = R/6`).
    #[serde(default)]
    pub shear: Option<ShearConfig>,
}

fn default_experiment() -> String {
    "run".into()
}

fn default_n() -> usize {
    2
}

fn default_k() -> usize {
    1
}

fn default_t_grid() -> Vec<f64> {
    (1..=8).map(|i| i as f64 * 0.01).collect()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_sweep() -> usize {
    1000
}

fn default_samples() -> usize {
    1_000_000
}

fn default_cells() -> Vec<f64> {
    vec![0.01, 0.02]
}

fn default_circle_nodes() -> usize {
    256
}

fn default_boundary_res() -> usize {
    12
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub t_max: Option<f64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let mut cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                if p.extension().and_then(|e| e.to_str()) == Some("json") {
                    serde_json::from_str(&text)
                        .with_context(|| format!("bad JSON config {}", p.display()))?
                } else {
                    toml::from_str(&text)
                        .with_context(|| format!("bad TOML config {}", p.display()))?
                }
            }
        };
        // relative data paths resolve against the config file's directory
        if let Some(dir) = path.and_then(|p| p.parent()) {
            if let Some(h) = &cfg.hamiltonian {
                if h.is_relative() {
                    cfg.hamiltonian = Some(dir.join(h));
                }
            }
            if let PhiSpec::Matrix { path: mp } = &cfg.phi {
                if mp.is_relative() {
                    cfg.phi = PhiSpec::Matrix { path: dir.join(mp) };
                }
            }
        }
        if let Some(n) = ov.n {
            cfg.n = n;
        }
        if let Some(k) = ov.k {
            cfg.k = k;
        }
        if let Some(seed) = ov.seed {
            cfg.quadrature.seed = seed;
            if let PhiSpec::Random { scale, .. } = cfg.phi {
                cfg.phi = PhiSpec::Random { seed, scale };
            }
        }
        if let Some(t_max) = ov.t_max {
            cfg.t_grid = (1..=8).map(|i| i as f64 * t_max / 8.0).collect();
        }
        if let Some(s) = ov.samples {
            cfg.samples = s;
        }
        if let Some(out) = &ov.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            bail!("need 1 <= k <= n, got n = {}, k = {}", self.n, self.k);
        }
        if self.t_grid.is_empty() {
            bail!("empty t grid");
        }
        if self.tolerances.nonsqueezing <= 0.0
            || self.tolerances.boundary_residual <= 0.0
            || self.tolerances.estimator_agreement <= 0.0
        {
            bail!("tolerances must be positive");
        }
        if self.cells.iter().any(|&c| c <= 0.0) {
            bail!("cell sizes must be positive");
        }
        if let Some(p) = &self.hamiltonian {
            if !p.exists() {
                bail!("Hamiltonian file {} does not exist", p.display());
            }
        }
        if let PhiSpec::Matrix { path } = &self.phi {
            if !path.exists() {
                bail!("matrix file {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn hamiltonian(&self) -> Result<PolyHamiltonian> {
        match &self.hamiltonian {
            None => Ok(PolyHamiltonian::zero(self.n)),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read {}", p.display()))?;
                let h = if p.extension().and_then(|e| e.to_str()) == Some("toml") {
                    PolyHamiltonian::from_toml(&text)?
                } else {
                    PolyHamiltonian::from_json(&text)?
                };
                if h.n() != self.n {
                    bail!(
                        "Hamiltonian is on R^{} but the run is on R^{}",
                        2 * h.n(),
                        2 * self.n
                    );
                }
                Ok(h)
            }
        }
    }

    pub fn phi_map(&self) -> Result<SympLinearMap> {
        match &self.phi {
            PhiSpec::Identity => Ok(SympLinearMap::identity(self.n)),
            PhiSpec::Random { seed, scale } => Ok(random_symplectic(self.n, *seed, *scale)?),
            PhiSpec::Diagonal { entries } => {
                if entries.len() != 2 * self.n {
                    bail!("diagonal needs {} entries", 2 * self.n);
                }
                Ok(SympLinearMap::new(DMatrix::from_diagonal(
                    &nalgebra::DVector::from_vec(entries.clone()),
                ))?)
            }
            PhiSpec::Matrix { path } => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                    .with_context(|| format!("bad matrix JSON {}", path.display()))?;
                let size = rows.len();
                if size != 2 * self.n || rows.iter().any(|r| r.len() != size) {
                    bail!("matrix must be {0} x {0} row-major", 2 * self.n);
                }
                let m = DMatrix::from_fn(size, size, |r, c| rows[r][c]);
                Ok(SympLinearMap::new(m)?)
            }
        }
    }

    pub fn projector(&self) -> Result<ComplexProjector> {
        Ok(ComplexProjector::coordinate(self.n, self.k)?)
    }

    pub fn boundary_grid(&self) -> Result<BoundaryGrid> {
        match self.k {
            1 => Ok(BoundaryGrid::Circle {
                nodes: self.circle_nodes,
            }),
            2 => Ok(BoundaryGrid::Hopf {
                eta_res: self.boundary_res,
                n_phi1: self.boundary_res,
                n_phi2: self.boundary_res,
            }),
            k => bail!("boundary tracking supports k in {{1, 2}}, got {k}"),
        }
    }

    pub fn boundary_options(&self) -> BoundaryOptions {
        BoundaryOptions {
            residual_tol: self.tolerances.boundary_residual,
            ..Default::default()
        }
    }

    pub fn rho_profile(&self) -> Result<shadowlab_core::counterexamples::RhoProfile> {
        match &self.rho {
            None => Ok(shadowlab_core::counterexamples::RhoProfile::default_profile()),
            Some(r) => Ok(shadowlab_core::counterexamples::RhoProfile::new(
                shadowlab_core::poly::ScalarPoly::new(r.num.clone()),
                shadowlab_core::poly::ScalarPoly::new(r.den.clone()),
                r.r_max,
            )?),
        }
    }

    pub fn shear_profile(&self) -> Result<shadowlab_core::counterexamples::ShearProfile> {
        match &self.shear {
            None => Ok(shadowlab_core::counterexamples::ShearProfile::with_radius(
                1.0,
            )?),
            Some(c) => Ok(shadowlab_core::counterexamples::ShearProfile::new(
                c.r, c.eps, c.corner,
            )?),
        }
    }

    pub fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output dir {}", self.out.display()))
    }
}
