//! Symplectic/complex linear algebra, exterior-form evaluation, and the linear
//! shadow- and section-volume formulas with their equality criteria.
//!
//! Coordinates are ordered `(p_1, q_1, ..., p_n, q_n)` and the complex structure is
//! `J(p, q) = (-q, p)` blockwise, so `Omega[u, v] = (Ju) . v` is the standard
//! symplectic form `sum_j dp_j ^ dq_j`. The volume of the shadow of the unit ball
//! under a linear symplectic map `Phi`, projected onto a complex subspace `V`, is
//! `omega_2k * sqrt(det(A^T A |_{ran A^T}))` with `A = P Phi`; it is bounded below by
//! `omega_2k`, with equality exactly when `Phi^T V` is a complex subspace.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Symplectic defect allowed at map construction.
pub const SYMPLECTIC_DEFECT_LIMIT: f64 = 1e-10;
/// Symplectic defect above which operations refuse a map.
pub const OP_DEFECT_LIMIT: f64 = 1e-8;
/// Tolerance on operator norms deciding whether a subspace is complex.
pub const COMPLEXITY_TOL: f64 = 1e-9;
/// Relative tolerance deciding equality of a volume with `omega_2k`.
pub const VOLUME_EQUALITY_TOL: f64 = 1e-7;

/// Volume of the unit ball of dimension `2k`, in closed form: `pi^k / k!`.
pub fn ball_volume_2k(k: usize) -> f64 {
    let mut v = 1.0;
    for j in 1..=k {
        v *= std::f64::consts::PI / j as f64;
    }
    v
}

/// The standard complex structure as a `2n x 2n` matrix.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        j[(2 * a, 2 * a + 1)] = -1.0;
        j[(2 * a + 1, 2 * a)] = 1.0;
    }
    j
}

/// `J v`, acting blockwise on conjugate pairs: `(p, q) -> (-q, p)`.
pub fn apply_j(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for a in 0..v.len() / 2 {
        out[2 * a] = -v[2 * a + 1];
        out[2 * a + 1] = v[2 * a];
    }
    out
}

/// `e^{theta J} v`: rotation by `theta` in every conjugate pair.
pub fn rotate_phase(v: &DVector<f64>, theta: f64) -> DVector<f64> {
    let (s, c) = theta.sin_cos();
    let mut out = DVector::zeros(v.len());
    for a in 0..v.len() / 2 {
        let p = v[2 * a];
        let q = v[2 * a + 1];
        out[2 * a] = c * p - s * q;
        out[2 * a + 1] = s * p + c * q;
    }
    out
}

/// `Omega[u, v] = (Ju) . v = sum_j (u_p v_q - u_q v_p)`.
pub fn omega(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for a in 0..u.len() / 2 {
        acc += u[2 * a] * v[2 * a + 1] - u[2 * a + 1] * v[2 * a];
    }
    acc
}

/// `k`-volume of the prism spanned by the given vectors: `sqrt(det Gram)`.
///
/// Returns 0 for dependent vectors.
pub fn wedge_norm(vectors: &[DVector<f64>]) -> f64 {
    let m = vectors.len();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let d = vectors[i].dot(&vectors[j]);
            gram[(i, j)] = d;
            gram[(j, i)] = d;
        }
    }
    gram.determinant().max(0.0).sqrt()
}

/// Ambient dimensions and the evaluation rules for the auxiliary forms.
///
/// Houses `Omega = Omega_k + Omega_hat` (the split into the first `k` and the last
/// `n - k` conjugate pairs), the primitive one-form `Lambda = sum_j p_j dq_j`, the
/// `(2k-1)`-form `alpha = p_1 dq_1 ^ dp_2 ^ dq_2 ^ ... ^ dp_k ^ dq_k`, and the
/// `2k`-form `beta` defined by `Omega^k = k! (d alpha + beta)`.
#[derive(Debug, Clone)]
pub struct FormsContext {
    n: usize,
    k: usize,
}

impl FormsContext {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::InvalidConfig {
                reason: format!("need 1 <= k <= n, got n = {n}, k = {k}"),
            });
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn j_matrix(&self) -> DMatrix<f64> {
        standard_j(self.n)
    }

    pub fn omega(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        omega(u, v)
    }

    /// `Omega_k`: the symplectic form of the first `k` conjugate pairs.
    pub fn omega_k(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.k {
            acc += u[2 * a] * v[2 * a + 1] - u[2 * a + 1] * v[2 * a];
        }
        acc
    }

    /// `Omega_hat`: the symplectic form of the last `n - k` conjugate pairs.
    pub fn omega_hat(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for a in self.k..self.n {
            acc += u[2 * a] * v[2 * a + 1] - u[2 * a + 1] * v[2 * a];
        }
        acc
    }

    /// The primitive one-form `Lambda = sum_j p_j dq_j` evaluated at `x` on `v`.
    pub fn lambda(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.n {
            acc += x[2 * a] * v[2 * a + 1];
        }
        acc
    }

    /// `alpha = p_1 dq_1 ^ dp_2 ^ dq_2 ^ ... ^ dp_k ^ dq_k` at `x` on `2k - 1` vectors.
    pub fn alpha(&self, x: &DVector<f64>, vs: &[DVector<f64>]) -> Result<f64> {
        if vs.len() != 2 * self.k - 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.k - 1,
                got: vs.len(),
            });
        }
        // coordinate slots: q_1, p_2, q_2, ..., p_k, q_k
        let idx: Vec<usize> = (1..2 * self.k).collect();
        Ok(x[0] * coordinate_minor(vs, &idx))
    }

    /// `d alpha = dp_1 ^ dq_1 ^ ... ^ dp_k ^ dq_k` (a constant `2k`-form).
    pub fn d_alpha(&self, vs: &[DVector<f64>]) -> Result<f64> {
        if vs.len() != 2 * self.k {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.k,
                got: vs.len(),
            });
        }
        let idx: Vec<usize> = (0..2 * self.k).collect();
        Ok(coordinate_minor(vs, &idx))
    }

    /// `beta`: the sum of `dp_{i_1} ^ dq_{i_1} ^ ... ^ dp_{i_k} ^ dq_{i_k}` over all
    /// index sets `i_1 < ... < i_k` that reach past the first `k` pairs.
    pub fn beta(&self, vs: &[DVector<f64>]) -> Result<f64> {
        if vs.len() != 2 * self.k {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.k,
                got: vs.len(),
            });
        }
        let mut total = 0.0;
        let mut subset = Vec::with_capacity(self.k);
        self.beta_rec(vs, 0, &mut subset, &mut total);
        Ok(total)
    }

    fn beta_rec(
        &self,
        vs: &[DVector<f64>],
        start: usize,
        subset: &mut Vec<usize>,
        total: &mut f64,
    ) {
        if subset.len() == self.k {
            // skip the all-within-first-k subset; it is d alpha, not part of beta
            if *subset.last().unwrap() >= self.k {
                let mut idx = Vec::with_capacity(2 * self.k);
                for &a in subset.iter() {
                    idx.push(2 * a);
                    idx.push(2 * a + 1);
                }
                *total += coordinate_minor(vs, &idx);
            }
            return;
        }
        for a in start..self.n {
            subset.push(a);
            self.beta_rec(vs, a + 1, subset, total);
            subset.pop();
        }
    }

    /// `Omega^k` on a tuple of `2k` vectors, dispatching on size: full permutation
    /// sum for `2k <= 6`, Pfaffian minor expansion of `Omega[u_i, u_j]` for larger
    /// tuples. Both paths are exposed and cross-checked in tests.
    pub fn omega_power(&self, vs: &[DVector<f64>]) -> Result<f64> {
        if vs.len() != 2 * self.k {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.k,
                got: vs.len(),
            });
        }
        for v in vs {
            if v.len() != 2 * self.n {
                return Err(Error::DimensionMismatch {
                    expected: 2 * self.n,
                    got: v.len(),
                });
            }
        }
        if 2 * self.k <= 6 {
            Ok(self.omega_power_by_permutations(vs))
        } else {
            Ok(self.omega_power_by_pfaffian(vs))
        }
    }

    /// `Omega^k[u_1, ..., u_2k] = (1/2^k) sum_{sigma} sgn(sigma) prod_j
    /// Omega[u_{sigma(2j)}, u_{sigma(2j+1)}]`.
    pub fn omega_power_by_permutations(&self, vs: &[DVector<f64>]) -> f64 {
        let m = vs.len();
        let mut pair = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                pair[(i, j)] = omega(&vs[i], &vs[j]);
            }
        }
        let mut acc = 0.0;
        let mut perm: Vec<usize> = Vec::with_capacity(m);
        let mut used = vec![false; m];
        permutation_sum(&pair, m, &mut perm, &mut used, 1.0, &mut acc);
        acc / 2f64.powi(self.k as i32)
    }

    /// `Omega^k[u_1, ..., u_2k] = k! Pf(G)` with `G_{ij} = Omega[u_i, u_j]`.
    pub fn omega_power_by_pfaffian(&self, vs: &[DVector<f64>]) -> f64 {
        let m = vs.len();
        let mut pair = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                pair[(i, j)] = omega(&vs[i], &vs[j]);
            }
        }
        let idx: Vec<usize> = (0..m).collect();
        factorial(self.k) * pfaffian(&pair, &idx)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Determinant of the rows `idx` (coordinate slots) of the given column vectors.
fn coordinate_minor(vs: &[DVector<f64>], idx: &[usize]) -> f64 {
    let m = idx.len();
    debug_assert_eq!(vs.len(), m);
    let mat = DMatrix::from_fn(m, m, |r, c| vs[c][idx[r]]);
    mat.determinant()
}

fn permutation_sum(
    pair: &DMatrix<f64>,
    m: usize,
    perm: &mut Vec<usize>,
    used: &mut [bool],
    sign: f64,
    acc: &mut f64,
) {
    if perm.len() == m {
        let mut prod = sign;
        for j in 0..m / 2 {
            prod *= pair[(perm[2 * j], perm[2 * j + 1])];
        }
        *acc += prod;
        return;
    }
    for i in 0..m {
        if used[i] {
            continue;
        }
        // parity: inserting i after the current prefix flips sign once per
        // already-placed element greater than i
        let flips = perm.iter().filter(|&&p| p > i).count();
        let s = if flips % 2 == 0 { sign } else { -sign };
        used[i] = true;
        perm.push(i);
        permutation_sum(pair, m, perm, used, s, acc);
        perm.pop();
        used[i] = false;
    }
}

/// Pfaffian of the antisymmetric submatrix indexed by `idx`, by minor expansion
/// along the first row (sum over perfect matchings).
fn pfaffian(pair: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let i0 = idx[0];
    let mut acc = 0.0;
    let mut sign = 1.0;
    for p in 1..idx.len() {
        let j = idx[p];
        let a = pair[(i0, j)];
        if a != 0.0 {
            let rest: Vec<usize> = idx[1..].iter().copied().filter(|&r| r != j).collect();
            acc += sign * a * pfaffian(pair, &rest);
        }
        sign = -sign;
    }
    acc
}

/// Orthonormalize the columns of `m` by thin QR, failing if the rank drops.
pub fn orthonormalize_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cols = m.ncols();
    let qr = m.clone().qr();
    let r = qr.r();
    let scale = m.amax().max(1e-300);
    for i in 0..cols {
        if r[(i, i)].abs() <= 1e-12 * scale {
            return Err(Error::DependentVectors {
                wedge: r[(i, i)].abs(),
            });
        }
    }
    Ok(qr.q())
}

fn columns_from(vectors: &[DVector<f64>]) -> DMatrix<f64> {
    let rows = vectors[0].len();
    DMatrix::from_fn(rows, vectors.len(), |r, c| vectors[c][r])
}

/// Spectral norm of `(I - Q) J Q` where `Q` projects onto the span of the given
/// orthonormal columns. Zero exactly when the span is J-invariant.
pub fn complexity_defect_of_orthonormal(basis: &DMatrix<f64>) -> f64 {
    let q = basis * basis.transpose();
    let j = standard_j(basis.nrows() / 2);
    let jq = &j * &q;
    let m = &jq - &q * &jq;
    m.svd(false, false).singular_values.amax()
}

/// Whether the span of the given independent vectors is a complex subspace,
/// measured by `||(I - Q) J Q|| <= 1e-9`.
pub fn is_complex_subspace(basis: &[DVector<f64>]) -> Result<bool> {
    Ok(complexity_defect(basis)? <= COMPLEXITY_TOL)
}

/// The complexity defect `||(I - Q) J Q||` of the span of the given vectors.
pub fn complexity_defect(basis: &[DVector<f64>]) -> Result<f64> {
    let q = orthonormalize_columns(&columns_from(basis))?;
    Ok(complexity_defect_of_orthonormal(&q))
}

/// Build a complex-adapted orthonormal basis `(b_1, J b_1, ..., b_k, J b_k)` of the
/// span of the given columns. Fails if the span is not complex within tolerance.
pub fn complex_adapted_basis(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = orthonormalize_columns(basis)?;
    let defect = complexity_defect_of_orthonormal(&q);
    if defect > COMPLEXITY_TOL {
        return Err(Error::NotComplexSubspace {
            defect,
            limit: COMPLEXITY_TOL,
        });
    }
    let dim = q.nrows();
    let two_k = q.ncols();
    let proj = &q * q.transpose();
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(two_k);
    while chosen.len() < two_k {
        // best remaining direction: column of q with largest residual
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for c in 0..two_k {
            let mut v: DVector<f64> = q.column(c).into();
            for b in &chosen {
                let d = b.dot(&v);
                v -= b * d;
            }
            let n = v.norm();
            if n > best_norm {
                best_norm = n;
                best = Some(v);
            }
        }
        let mut b = best.ok_or(Error::DependentVectors { wedge: 0.0 })?;
        b /= b.norm();
        // companion J b, pushed back into the span and re-orthonormalized
        let mut jb = &proj * apply_j(&b);
        for prev in chosen.iter().chain(std::iter::once(&b)) {
            let d = prev.dot(&jb);
            jb -= prev * d;
        }
        let njb = jb.norm();
        if njb < 0.5 {
            return Err(Error::NotComplexSubspace {
                defect,
                limit: COMPLEXITY_TOL,
            });
        }
        jb /= njb;
        chosen.push(b);
        chosen.push(jb);
    }
    let mut out = DMatrix::zeros(dim, two_k);
    for (c, v) in chosen.iter().enumerate() {
        out.set_column(c, v);
    }
    Ok(out)
}

/// Complex-adapted orthonormal basis of the orthogonal complement of the span of
/// the given orthonormal columns. The complement of a complex subspace is complex.
pub fn complex_adapted_complement(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = basis.nrows();
    let m = basis.ncols();
    if m == dim {
        return Ok(DMatrix::zeros(dim, 0));
    }
    let mut chosen: Vec<DVector<f64>> = (0..m).map(|c| basis.column(c).into()).collect();
    let mut extra: Vec<DVector<f64>> = Vec::new();
    while chosen.len() < dim {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for i in 0..dim {
            let mut v = DVector::zeros(dim);
            v[i] = 1.0;
            for b in &chosen {
                let d = b.dot(&v);
                v -= b * d;
            }
            let n = v.norm();
            if n > best_norm {
                best_norm = n;
                best = Some(v);
            }
        }
        let mut v = best.ok_or(Error::DependentVectors { wedge: 0.0 })?;
        // second orthogonalization pass for hygiene
        for b in &chosen {
            let d = b.dot(&v);
            v -= b * d;
        }
        v /= v.norm();
        chosen.push(v.clone());
        extra.push(v);
    }
    complex_adapted_basis(&columns_from(&extra))
}

/// Orthogonal projector onto a complex (J-invariant) subspace `V` of real
/// dimension `2k`, together with a complex-adapted orthonormal basis of `V`.
#[derive(Debug, Clone)]
pub struct ComplexProjector {
    p: DMatrix<f64>,
    basis: DMatrix<f64>,
    n: usize,
    k: usize,
}

impl ComplexProjector {
    /// Projector onto the span of the given vectors, which must be a complex
    /// subspace within tolerance.
    pub fn from_basis(vectors: &[DVector<f64>]) -> Result<Self> {
        if vectors.is_empty() || !vectors.len().is_multiple_of(2) {
            return Err(Error::InvalidConfig {
                reason: "a complex subspace has even real dimension".into(),
            });
        }
        let basis = complex_adapted_basis(&columns_from(vectors))?;
        let p = &basis * basis.transpose();
        Ok(Self {
            n: vectors[0].len() / 2,
            k: vectors.len() / 2,
            p,
            basis,
        })
    }

    /// Projector onto the coordinate subspace spanned by the conjugate pairs with
    /// the given zero-based indices.
    pub fn from_coordinate_pairs(n: usize, pairs: &[usize]) -> Result<Self> {
        let mut vectors = Vec::with_capacity(2 * pairs.len());
        for &a in pairs {
            if a >= n {
                return Err(Error::InvalidConfig {
                    reason: format!("pair index {a} out of range for n = {n}"),
                });
            }
            let mut ep = DVector::zeros(2 * n);
            ep[2 * a] = 1.0;
            let mut eq = DVector::zeros(2 * n);
            eq[2 * a + 1] = 1.0;
            vectors.push(ep);
            vectors.push(eq);
        }
        Self::from_basis(&vectors)
    }

    /// Projector onto the first `k` conjugate pairs.
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        Self::from_coordinate_pairs(n, &(0..k).collect::<Vec<_>>())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Complex-adapted orthonormal basis of `V`, columns `(b_1, J b_1, ...)`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.p * v
    }

    /// Coordinates of `P v` in the complex-adapted frame of `V`.
    pub fn frame_coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * v
    }

    /// Max-norm violations of the projector invariants
    /// (`P^2 = P`, `P^T = P`, `PJ = JP`, `P basis = basis`, `rank = 2k`).
    pub fn invariant_defect(&self) -> f64 {
        let p2 = (&self.p * &self.p - &self.p).amax();
        let sym = (&self.p - self.p.transpose()).amax();
        let j = standard_j(self.n);
        let comm = (&self.p * &j - &j * &self.p).amax();
        let fix = (&self.p * &self.basis - &self.basis).amax();
        let rank = (self.p.trace() - 2.0 * self.k as f64).abs();
        p2.max(sym).max(comm).max(fix).max(rank)
    }
}

/// A linear symplectic automorphism of `R^{2n}` with a certified symplecticity
/// defect `||M^T J M - J||_max`.
#[derive(Debug, Clone)]
pub struct SympLinearMap {
    m: DMatrix<f64>,
    defect: f64,
    n: usize,
}

/// `||M^T J M - J||_max`.
pub fn symplectic_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let j = standard_j(n);
    (m.transpose() * &j * m - &j).amax()
}

impl SympLinearMap {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
            return Err(Error::InvalidConfig {
                reason: "symplectic matrix must be square of even size".into(),
            });
        }
        let defect = symplectic_defect(&m);
        if defect > SYMPLECTIC_DEFECT_LIMIT {
            return Err(Error::NotSymplectic {
                defect,
                limit: SYMPLECTIC_DEFECT_LIMIT,
            });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > 1e-8 {
            return Err(Error::NotSymplectic {
                defect: (det - 1.0).abs(),
                limit: 1e-8,
            });
        }
        let n = m.nrows() / 2;
        Ok(Self { m, defect, n })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(2 * n, 2 * n),
            defect: 0.0,
            n,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    /// The symplectic inverse `M^{-1} = -J M^T J`.
    pub fn inverse(&self) -> Self {
        let j = standard_j(self.n);
        let inv = -(&j * self.m.transpose() * &j);
        let defect = symplectic_defect(&inv);
        Self {
            m: inv,
            defect,
            n: self.n,
        }
    }

    /// The transposed map (also symplectic).
    pub fn transpose_map(&self) -> Self {
        let t = self.m.transpose();
        let defect = symplectic_defect(&t);
        Self {
            m: t,
            defect,
            n: self.n,
        }
    }

    fn check_usable(&self) -> Result<()> {
        if self.defect > OP_DEFECT_LIMIT {
            return Err(Error::NotSymplectic {
                defect: self.defect,
                limit: OP_DEFECT_LIMIT,
            });
        }
        Ok(())
    }
}

/// `exp(J S)` for a random symmetric `S` with entries uniform in `[-scale, scale]`.
/// Deterministic per seed.
pub fn random_symplectic(n: usize, seed: u64, scale: f64) -> Result<SympLinearMap> {
    if scale < 0.0 {
        return Err(Error::InvalidConfig {
            reason: "scale must be nonnegative".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        for j in i..2 * n {
            let v = rng.gen_range(-1.0..1.0) * scale;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let js = standard_j(n) * s;
    SympLinearMap::new(js.exp())
}

/// A random unitary automorphism (orthogonal and symplectic), realified from the
/// complex QR factor of a seeded Gaussian matrix.
pub fn random_unitary(n: usize, seed: u64) -> Result<SympLinearMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        v
    };
    let g =
        DMatrix::from_fn(n, n, |_, _| Complex64::new(0.0, 0.0)).map(|_| Complex64::new(0.0, 0.0));
    // from_fn gives column-major deterministic order, but draw order must be explicit
    let mut g = g;
    for c in 0..n {
        for r in 0..n {
            g[(r, c)] = Complex64::new(draw(), draw());
        }
    }
    let q = g.qr().q();
    SympLinearMap::new(realify(&q))
}

/// Real `2n x 2n` representation of a complex `n x n` matrix under
/// `(p, q) <-> p + i q`.
pub fn realify(u: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = u.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        for b in 0..n {
            let z = u[(a, b)];
            r[(2 * a, 2 * b)] = z.re;
            r[(2 * a, 2 * b + 1)] = -z.im;
            r[(2 * a + 1, 2 * b)] = z.im;
            r[(2 * a + 1, 2 * b + 1)] = z.re;
        }
    }
    r
}

/// Result of the linear shadow-volume formula.
#[derive(Debug, Clone, Serialize)]
pub struct ShadowVolume {
    /// `vol_2k(P Phi(B))`.
    pub volume: f64,
    /// `volume - omega_2k` (signed; the non-squeezing bound makes it >= -1e-9).
    pub gap: f64,
    /// Equality criterion: `Phi^T V` is a complex subspace.
    pub equality: bool,
    /// `||(I - Q) J Q||` for `Q` projecting onto `Phi^T V`.
    pub subspace_defect: f64,
}

impl ShadowVolume {
    /// Whether the volume itself sits at the `omega_2k` floor within tolerance.
    /// Must agree with `equality` (tested, not assumed).
    pub fn volume_at_floor(&self) -> bool {
        self.gap.abs() <= VOLUME_EQUALITY_TOL * self.volume.max(1.0)
    }
}

/// `vol_2k(P Phi(B)) = omega_2k * sqrt(det(A^T A |_{ran A^T}))` with `A = P Phi`,
/// computed through an orthonormal basis of `ran A^T = Phi^T V`.
pub fn linear_shadow_volume(phi: &SympLinearMap, proj: &ComplexProjector) -> Result<ShadowVolume> {
    phi.check_usable()?;
    if phi.n() != proj.n() {
        return Err(Error::DimensionMismatch {
            expected: 2 * proj.n(),
            got: 2 * phi.n(),
        });
    }
    let w = phi.matrix().transpose() * proj.basis();
    let qw = orthonormalize_columns(&w)?;
    // A restricted to Phi^T V, expressed in the V-frame: B = basis^T Phi Q_w
    let b = proj.basis().transpose() * (phi.matrix() * &qw);
    let volume = ball_volume_2k(proj.k()) * b.determinant().abs();
    let subspace_defect = complexity_defect_of_orthonormal(&qw);
    Ok(ShadowVolume {
        volume,
        gap: volume - ball_volume_2k(proj.k()),
        equality: subspace_defect <= COMPLEXITY_TOL,
        subspace_defect,
    })
}

/// Result of the complex section-volume formula.
#[derive(Debug, Clone, Serialize)]
pub struct SectionVolume {
    /// `vol_2k(V intersect Phi(B))`.
    pub volume: f64,
    /// `volume - omega_2k` (the section bound makes it <= 1e-9).
    pub gap: f64,
    /// Equality criterion: `Phi^{-1} V` is a complex subspace.
    pub equality: bool,
    /// `||(I - Q) J Q||` for `Q` projecting onto `Phi^{-1} V`.
    pub subspace_defect: f64,
}

/// `vol_2k(V intersect Phi(B)) = omega_2k / sqrt(det(G |_V))` where
/// `G = (Phi^{-1})^T Phi^{-1}` restricted to `V` in an orthonormal frame.
pub fn section_volume(phi: &SympLinearMap, proj: &ComplexProjector) -> Result<SectionVolume> {
    phi.check_usable()?;
    if phi.n() != proj.n() {
        return Err(Error::DimensionMismatch {
            expected: 2 * proj.n(),
            got: 2 * phi.n(),
        });
    }
    let inv = phi.inverse();
    let c = inv.matrix() * proj.basis();
    let gram = c.transpose() * &c;
    let volume = ball_volume_2k(proj.k()) / gram.determinant().sqrt();
    let qc = orthonormalize_columns(&c)?;
    let subspace_defect = complexity_defect_of_orthonormal(&qc);
    Ok(SectionVolume {
        volume,
        gap: volume - ball_volume_2k(proj.k()),
        equality: subspace_defect <= COMPLEXITY_TOL,
        subspace_defect,
    })
}

/// The subspace on which a surjection attains its maximal restricted Jacobian.
#[derive(Debug, Clone)]
pub struct MaxJacobian {
    /// Orthonormal basis of `ran A^T` (columns).
    pub basis: DMatrix<f64>,
    /// `|det(A|_{ran A^T})|`, the product of the top singular values.
    pub value: f64,
}

/// The restricted-determinant map `W -> |det(A|_W)|` has a unique maximum at
/// `ran A^T`; this returns the maximizing subspace and the value.
pub fn max_jacobian_subspace(a: &DMatrix<f64>, rank: usize) -> Result<MaxJacobian> {
    let svd = a.clone().svd(false, true);
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    if rank > sv.len() {
        return Err(Error::RankDeficient {
            sigma: 0.0,
            index: rank,
        });
    }
    let smax = sv[order[0]].max(1e-300);
    let slast = sv[order[rank - 1]];
    if slast <= 1e-10 * smax {
        return Err(Error::RankDeficient {
            sigma: slast,
            index: rank - 1,
        });
    }
    let vt = svd.v_t.as_ref().expect("svd computed with right vectors");
    let mut basis = DMatrix::zeros(a.ncols(), rank);
    let mut value = 1.0;
    for (c, &i) in order.iter().take(rank).enumerate() {
        value *= sv[i];
        basis.set_column(c, &vt.row(i).transpose());
    }
    Ok(MaxJacobian { basis, value })
}

/// Both sides of the Wirtinger inequality on a tuple of `2k` vectors.
#[derive(Debug, Clone, Serialize)]
pub struct WirtingerCheck {
    /// `|Omega^k[u_1, ..., u_2k]|`.
    pub lhs: f64,
    /// `k! |u_1 ^ ... ^ u_2k|`.
    pub rhs: f64,
    /// `rhs - lhs >= -1e-10`.
    pub gap: f64,
    /// Equality case: gap within tolerance and the span is complex.
    pub is_equality: bool,
    /// Complexity defect of the span.
    pub subspace_defect: f64,
}

/// Evaluate `|Omega^k| <= k! |u_1 ^ ... ^ u_2k|` on a tuple of `2k` independent
/// vectors. Equality holds exactly when the span is a complex subspace.
pub fn wirtinger_check(ctx: &FormsContext, vs: &[DVector<f64>]) -> Result<WirtingerCheck> {
    if vs.len() != 2 * ctx.k() {
        return Err(Error::DimensionMismatch {
            expected: 2 * ctx.k(),
            got: vs.len(),
        });
    }
    let scale: f64 = vs.iter().map(|v| v.norm()).product();
    let wedge = wedge_norm(vs);
    if wedge <= 1e-12 * scale.max(1e-300) {
        return Err(Error::DependentVectors { wedge });
    }
    let lhs = ctx.omega_power(vs)?.abs();
    let rhs = factorial(ctx.k()) * wedge;
    let gap = rhs - lhs;
    let subspace_defect = complexity_defect(vs)?;
    let is_equality = subspace_defect <= COMPLEXITY_TOL && gap <= 1e-9 * rhs.max(1.0);
    Ok(WirtingerCheck {
        lhs,
        rhs,
        gap,
        is_equality,
        subspace_defect,
    })
}
