//! Dense complex linear algebra on small Hermitian matrices.
//!
//! Every matrix function (logarithm, exponential, projector) goes through a
//! full Hermitian eigendecomposition. Dimensions handled here are at most a
//! few dozen, so accuracy wins over speed everywhere.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: CMat,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuild `V f(Λ) V†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            for i in 0..n {
                let vi = v[i] * w;
                for j in 0..n {
                    out[(i, j)] += vi * v[j].conj();
                }
            }
        }
        out
    }

    /// Indices of eigenvalues strictly above `eps · λ_max`.
    pub fn support_indices(&self, eps: f64) -> Vec<usize> {
        let cut = eps * self.max().max(0.0);
        (0..self.dim()).filter(|&k| self.values[k] > cut).collect()
    }

    /// Columns of the eigenvectors listed in `idx`.
    pub fn columns(&self, idx: &[usize]) -> CMat {
        let n = self.vectors.nrows();
        CMat::from_fn(n, idx.len(), |i, j| self.vectors[(i, idx[j])])
    }
}

/// Hermitian eigendecomposition. The input is symmetrized first, so tiny
/// asymmetries from prior arithmetic do not leak into the spectrum.
pub fn herm_eig(m: &CMat) -> HermEig {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    if n == 0 {
        return HermEig {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        };
    }
    if n == 1 {
        return HermEig {
            values: vec![m[(0, 0)].re],
            vectors: CMat::identity(1, 1),
        };
    }
    let sym = hermitian_part(m);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermEig { values, vectors }
}

/// Eigenvalues only, ascending.
pub fn herm_eigenvalues(m: &CMat) -> Vec<f64> {
    herm_eig(m).values
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Largest entrywise deviation `max |m_kl − conj(m_lk)|`.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Symmetrize in place and return the pre-symmetrization deviation.
pub fn symmetrize(m: &mut CMat) -> f64 {
    let dev = hermiticity_deviation(m);
    if dev > 0.0 {
        *m = hermitian_part(m);
    }
    dev
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Re Tr(A B)`, the real trace inner product on Hermitian matrices.
pub fn hs_inner(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// `Tr(A B)` with the full complex value.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_diag(d: &[f64]) -> CMat {
    let n = d.len();
    CMat::from_fn(n, n, |i, j| if i == j { c(d[i], 0.0) } else { c(0.0, 0.0) })
}

/// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
pub fn outer(v: &DVector<C64>) -> CMat {
    v * v.adjoint()
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &CMat) -> f64 {
    herm_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// `½‖A − B‖₁`.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    0.5 * trace_norm(&(a - b))
}

/// Spectral norm of a Hermitian matrix.
pub fn herm_op_norm(m: &CMat) -> f64 {
    let e = herm_eigenvalues(m);
    e.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Coefficients `c` minimizing `‖g − Σ c_a C_a‖` under the trace inner
/// product, with a pseudo-inverse of the Gram matrix that drops eigenvalues
/// below `rel_threshold · max diag`.
pub fn gram_coefficients(g: &CMat, basis: &[CMat], rel_threshold: f64) -> Vec<f64> {
    let m = basis.len();
    if m == 0 {
        return vec![];
    }
    let gram = RMat::from_fn(m, m, |a, b| hs_inner(&basis[a], &basis[b]));
    let rhs = DVector::from_fn(m, |a, _| hs_inner(&basis[a], g));
    let sol = sym_pinv_solve(&gram, &rhs, rel_threshold);
    sol.iter().copied().collect()
}

/// Component of `g` orthogonal (trace metric) to the real span of `basis`.
pub fn project_out(g: &CMat, basis: &[CMat], rel_threshold: f64) -> CMat {
    let coeffs = gram_coefficients(g, basis, rel_threshold);
    let mut out = g.clone();
    for (cf, b) in coeffs.iter().zip(basis) {
        out -= b * c(*cf, 0.0);
    }
    out
}

/// Solve `A x = b` for a real symmetric positive semidefinite `A` through its
/// eigendecomposition, discarding eigenvalues below `rel_threshold · max diag`.
pub fn sym_pinv_solve(a: &RMat, b: &DVector<f64>, rel_threshold: f64) -> DVector<f64> {
    let max_diag = a.diagonal().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if max_diag == 0.0 {
        return DVector::zeros(b.len());
    }
    let cut = rel_threshold * max_diag;
    let eig = a.clone().symmetric_eigen();
    let mut x = DVector::zeros(b.len());
    for k in 0..eig.eigenvalues.len() {
        let lam = eig.eigenvalues[k];
        if lam.abs() <= cut {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let w = v.dot(b) / lam;
        x += v * w;
    }
    x
}

/// Numerical rank of a real symmetric PSD matrix, relative threshold.
pub fn sym_rank(a: &RMat, rel_threshold: f64) -> usize {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if max == 0.0 {
        return 0;
    }
    eig.eigenvalues
        .iter()
        .filter(|x| x.abs() > rel_threshold * max)
        .count()
}

/// All entries finite.
pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eig_sorted_and_reconstructs() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(0.6, 0.0), c(0.6, 0.0), c(0.5, 0.0)],
        );
        let e = herm_eig(&m);
        assert_abs_diff_eq!(e.values[0], -0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.1, epsilon = 1e-14);
        let back = e.apply(|x| x);
        assert!(frobenius(&(back - m)) < 1e-14);
    }

    #[test]
    fn complex_hermitian_eigenvalues() {
        // σ_y has eigenvalues ±1.
        let sy = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let e = herm_eigenvalues(&sy);
        assert_abs_diff_eq!(e[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn projection_removes_span() {
        let g = real_diag(&[1.0, 2.0, 5.0]);
        let basis = vec![identity(3), real_diag(&[0.0, 1.0, 2.0])];
        let p = project_out(&g, &basis, 1e-12);
        for b in &basis {
            assert!(hs_inner(&p, b).abs() < 1e-13);
        }
    }

    #[test]
    fn degenerate_gram_is_handled() {
        let g = real_diag(&[1.0, 3.0]);
        // The second constraint duplicates the first.
        let basis = vec![identity(2), identity(2) * c(2.0, 0.0)];
        let p = project_out(&g, &basis, 1e-12);
        assert_abs_diff_eq!(p[(0, 0)].re, -1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(p[(1, 1)].re, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states() {
        let a = real_diag(&[1.0, 0.0]);
        let b = real_diag(&[0.0, 1.0]);
        assert_abs_diff_eq!(trace_distance(&a, &b), 1.0, epsilon = 1e-14);
    }
}
