//! Complex dense linear algebra shared by the receiver.
//!
//! Everything here is a pure function of its inputs. Full-column-rank
//! pseudo-inverses are computed through a Cholesky factorization of the Gram
//! matrix; rank deficiency is reported as [`Error::Rank`] instead of
//! producing a garbage inverse.

use nalgebra::{Cholesky, DMatrix, DVector};

pub use nalgebra::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Numerical tolerances, kept in one place.
pub mod tol {
    /// Smallest admissible ratio between the smallest and largest Cholesky
    /// pivot of a Gram matrix before it is declared rank deficient.
    pub const RANK_RATIO: f64 = 1e-12;
    /// Relative Hermitian deviation accepted by [`super::loaded_solve`].
    pub const HERMITIAN: f64 = 1e-10;
    /// Floor applied to diagonal loading so that a zero covariance with a
    /// zero noise estimate still yields a solvable system.
    pub const MIN_LOADING: f64 = 1e-9;
}

/// Ordered set of block (user) indices, 0-based, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BlockIndexSet(Vec<usize>);

impl BlockIndexSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds a set from arbitrary indices; duplicates are merged.
    /// Returns a dimension error if any index is `>= universe`.
    pub fn new(mut indices: Vec<usize>, universe: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= universe) {
            return Err(Error::dim(
                "block index set",
                format!("index {bad} outside 0..{universe}"),
            ));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self(indices))
    }

    pub fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.0.binary_search(&idx).is_ok()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self(self.0.iter().copied().filter(|&i| other.contains(i)).collect())
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self(self.0.iter().copied().filter(|&i| !other.contains(i)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

fn ensure_finite(m: &CMat, context: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract(format!("non-finite entries produced by {context}")))
    }
}

fn gram_cholesky(a: &CMat, context: &'static str) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    let gram = a.adjoint() * a;
    let chol = Cholesky::new(gram).ok_or(Error::Rank {
        context,
        ratio: 0.0,
        threshold: tol::RANK_RATIO,
    })?;
    let pivots = chol.l_dirty().diagonal().map(|d| d.re * d.re);
    let (lo, hi) = (pivots.min(), pivots.max());
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio >= tol::RANK_RATIO) {
        return Err(Error::Rank {
            context,
            ratio,
            threshold: tol::RANK_RATIO,
        });
    }
    Ok(chol)
}

/// Moore-Penrose inverse `(AᴴA)⁻¹Aᴴ` of a full-column-rank matrix.
pub fn pinv_full_col(a: &CMat) -> Result<CMat> {
    if a.ncols() == 0 {
        return Ok(CMat::zeros(0, a.nrows()));
    }
    if a.ncols() > a.nrows() {
        return Err(Error::Rank {
            context: "pseudo-inverse (more columns than rows)",
            ratio: 0.0,
            threshold: tol::RANK_RATIO,
        });
    }
    let chol = gram_cholesky(a, "pseudo-inverse")?;
    let out = chol.solve(&a.adjoint());
    ensure_finite(&out, "pinv_full_col")?;
    Ok(out)
}

/// Least-squares solution `A† · rhs` for every column of `rhs`, without
/// forming the pseudo-inverse.
pub fn ls_solve(a: &CMat, rhs: &CMat) -> Result<CMat> {
    if a.nrows() != rhs.nrows() {
        return Err(Error::dim(
            "least squares",
            format!("{} rows vs {} rhs rows", a.nrows(), rhs.nrows()),
        ));
    }
    if a.ncols() == 0 {
        return Ok(CMat::zeros(0, rhs.ncols()));
    }
    if a.ncols() > a.nrows() {
        return Err(Error::Rank {
            context: "least squares (more columns than rows)",
            ratio: 0.0,
            threshold: tol::RANK_RATIO,
        });
    }
    let chol = gram_cholesky(a, "least squares")?;
    let out = chol.solve(&(a.adjoint() * rhs));
    ensure_finite(&out, "ls_solve")?;
    Ok(out)
}

/// Pseudo-inverse of `[A B]` split into its top (`A† − F`) and bottom (`Wᴴ`)
/// row blocks, with the intermediate `F` and `W` kept for inspection.
#[derive(Debug, Clone)]
pub struct BlockPinv {
    pub top: CMat,
    pub bottom: CMat,
    pub f: CMat,
    pub w: CMat,
}

impl BlockPinv {
    pub fn stacked(&self) -> CMat {
        let mut out = CMat::zeros(self.top.nrows() + self.bottom.nrows(), self.top.ncols());
        out.rows_mut(0, self.top.nrows()).copy_from(&self.top);
        out.rows_mut(self.top.nrows(), self.bottom.nrows())
            .copy_from(&self.bottom);
        out
    }
}

/// Block Moore-Penrose inverse of `[A B]`:
/// `U = B − A A† B`, `W = U(UᴴU)⁻¹`, `F = A† B Wᴴ`.
pub fn block_pinv(a: &CMat, b: &CMat) -> Result<BlockPinv> {
    if a.nrows() != b.nrows() {
        return Err(Error::dim(
            "block pseudo-inverse",
            format!("A has {} rows, B has {}", a.nrows(), b.nrows()),
        ));
    }
    let a_pinv = pinv_full_col(a)?;
    let a_pinv_b = &a_pinv * b;
    let u = b - a * &a_pinv_b;
    // U is compared against B itself: a column of B inside span(A) leaves
    // only rounding noise in U, which is well conditioned on its own.
    let ratio = u
        .column_iter()
        .zip(b.column_iter())
        .map(|(uc, bc)| uc.norm_squared() / bc.norm_squared().max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    if !(ratio >= tol::RANK_RATIO) {
        return Err(Error::Rank {
            context: "block pseudo-inverse (B within span of A)",
            ratio,
            threshold: tol::RANK_RATIO,
        });
    }
    // (UᴴU)⁻¹Uᴴ is exactly Wᴴ.
    let w_h = pinv_full_col(&u).map_err(|e| match e {
        Error::Rank { ratio, threshold, .. } => Error::Rank {
            context: "block pseudo-inverse (B within span of A)",
            ratio,
            threshold,
        },
        other => other,
    })?;
    let f = &a_pinv_b * &w_h;
    let top = a_pinv - &f;
    Ok(BlockPinv {
        top,
        bottom: w_h.clone(),
        f,
        w: w_h.adjoint(),
    })
}

/// Solves `(R + εI) x = a` for Hermitian positive semidefinite `R`.
pub fn loaded_solve(r: &CMat, epsilon: f64, a: &CVec) -> Result<CVec> {
    let m = r.nrows();
    if r.ncols() != m || a.len() != m {
        return Err(Error::dim(
            "loaded solve",
            format!("R is {}x{}, a has {} entries", r.nrows(), r.ncols(), a.len()),
        ));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Contract(format!("diagonal loading {epsilon} is negative")));
    }
    let scale = r.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let dev = (r - r.adjoint()).iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if dev > tol::HERMITIAN * scale {
        return Err(Error::Contract(format!(
            "covariance is not Hermitian (deviation {dev:.3e})"
        )));
    }
    let mut loaded = r.clone();
    for i in 0..m {
        loaded[(i, i)] += C64::new(epsilon, 0.0);
    }
    // Symmetrize so tiny asymmetries do not leak into the factorization.
    let loaded = (&loaded + loaded.adjoint()).scale(0.5);
    let chol = Cholesky::new(loaded).ok_or(Error::Rank {
        context: "loaded solve",
        ratio: 0.0,
        threshold: tol::RANK_RATIO,
    })?;
    let x = chol.solve(a);
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Contract("non-finite loaded solve".into()));
    }
    Ok(x)
}

/// Column-stacking vectorization.
pub fn vec(x: &CMat) -> CVec {
    CVec::from_iterator(x.len(), x.iter().copied())
}

/// Inverse of [`vec`]: reshapes `c` into a matrix with `rows` rows.
pub fn unvec(c: &CVec, rows: usize) -> Result<CMat> {
    if rows == 0 || !c.len().is_multiple_of(rows) {
        return Err(Error::dim(
            "unvec",
            format!("length {} not divisible by {rows}", c.len()),
        ));
    }
    Ok(CMat::from_column_slice(rows, c.len() / rows, c.as_slice()))
}

/// Computes `(I_K ⊗ b)ᴴ Y` by applying `bᴴ` to each of the `K` stacked
/// `M`-row blocks of `Y`.
pub fn combine_kron(y: &CMat, b: &CVec, k: usize) -> Result<CMat> {
    let m = b.len();
    if m == 0 || y.nrows() != m * k {
        return Err(Error::dim(
            "kronecker combining",
            format!("Y has {} rows, expected {m}x{k}", y.nrows()),
        ));
    }
    let mut out = CMat::zeros(k, y.ncols());
    for col in 0..y.ncols() {
        for kk in 0..k {
            let mut acc = C64::new(0.0, 0.0);
            for mm in 0..m {
                acc += b[mm].conj() * y[(kk * m + mm, col)];
            }
            out[(kk, col)] = acc;
        }
    }
    Ok(out)
}

/// Dense Kronecker product; used by tests and explicit-structure checks only.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}
