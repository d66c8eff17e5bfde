//! Quantum states, observables and the system model.
//!
//! A [`QuantumState`] is a unit-trace, Hermitian, nonnegative matrix. The
//! effective subspace machinery restricts operators to the support of a
//! state, where the state has no zero eigenvalues and its logarithm is
//! finite.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, HermEig, C64};

/// Eigenvalues at or below `DEFAULT_EPS_KER · λ_max` count as zero.
pub const DEFAULT_EPS_KER: f64 = 1e-12;

/// Thresholds for membership in the state domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateTolerance {
    pub hermiticity: f64,
    pub trace: f64,
    pub eigenvalue: f64,
}

impl Default for StateTolerance {
    fn default() -> Self {
        StateTolerance {
            hermiticity: 1e-12,
            trace: 1e-10,
            eigenvalue: 1e-10,
        }
    }
}

impl StateTolerance {
    pub fn uniform(tol: f64) -> Self {
        StateTolerance {
            hermiticity: tol,
            trace: tol,
            eigenvalue: tol,
        }
    }
}

/// Measured violations of the three domain conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviations {
    /// `max |m_kl − conj(m_lk)|`.
    pub hermiticity: f64,
    /// `Re Tr m − 1` (signed).
    pub trace: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
}

pub fn deviations(m: &CMat) -> Deviations {
    Deviations {
        hermiticity: linalg::hermiticity_deviation(m),
        trace: linalg::trace(m).re - 1.0,
        min_eigenvalue: linalg::herm_eig(m).min(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    matrix: CMat,
    label: Option<String>,
}

/// Check membership in the state domain and wrap the matrix.
pub fn validate_state(m: &CMat, tol: StateTolerance) -> Result<QuantumState> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidModel("zero-dimensional state".into()));
    }
    if !linalg::is_finite(m) {
        return Err(Error::NonFinite(0.0));
    }
    let dev = deviations(m);
    if dev.hermiticity > tol.hermiticity {
        return Err(Error::NotHermitian(dev.hermiticity));
    }
    if dev.trace.abs() > tol.trace {
        return Err(Error::TraceDeviation(dev.trace));
    }
    if dev.min_eigenvalue < -tol.eigenvalue {
        return Err(Error::NegativeEigenvalue(dev.min_eigenvalue));
    }
    let mut matrix = m.clone();
    linalg::symmetrize(&mut matrix);
    Ok(QuantumState {
        matrix,
        label: None,
    })
}

impl QuantumState {
    pub fn new(m: CMat) -> Result<Self> {
        validate_state(&m, StateTolerance::default())
    }

    /// Wrap without validation. Used for integrator samples, which are
    /// validated by the domain check rather than on construction.
    pub fn from_matrix_unchecked(m: CMat) -> Self {
        QuantumState {
            matrix: m,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_matrix_unchecked(linalg::identity(dim) * c(1.0 / dim as f64, 0.0))
    }

    /// Diagonal state from populations (must sum to one).
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(linalg::real_diag(p))
    }

    /// `|ψ⟩⟨ψ|`, normalizing ψ.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::InvalidModel("zero state vector".into()));
        }
        let v = v / c(n, 0.0);
        Self::new(linalg::outer(&v))
    }

    /// Basis state `|k⟩⟨k|`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut m = CMat::zeros(dim, dim);
        m[(k, k)] = c(1.0, 0.0);
        Self::from_matrix_unchecked(m)
    }

    pub fn eigen(&self) -> HermEig {
        linalg::herm_eig(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::herm_eigenvalues(&self.matrix)
    }

    pub fn rank(&self, eps_ker: f64) -> usize {
        self.eigen().support_indices(eps_ker).len()
    }

    pub fn purity(&self) -> f64 {
        linalg::hs_inner(&self.matrix, &self.matrix)
    }

    pub fn trace_distance(&self, other: &QuantumState) -> f64 {
        linalg::trace_distance(&self.matrix, &other.matrix)
    }

    pub fn tensor(&self, other: &QuantumState) -> QuantumState {
        QuantumState::from_matrix_unchecked(linalg::kron(&self.matrix, &other.matrix))
    }
}

/// A Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    matrix: CMat,
}

impl Observable {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let dev = linalg::hermiticity_deviation(&m);
        let scale = m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
        if dev > 1e-12 * scale {
            return Err(Error::NotHermitian(dev));
        }
        let mut matrix = m;
        linalg::symmetrize(&mut matrix);
        Ok(Observable { matrix })
    }

    pub(crate) fn from_matrix_unchecked(m: CMat) -> Self {
        Observable { matrix: m }
    }

    pub fn identity(dim: usize) -> Self {
        Observable {
            matrix: linalg::identity(dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Observable {
            matrix: CMat::zeros(dim, dim),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Observable {
            matrix: linalg::real_diag(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    pub fn op_norm(&self) -> f64 {
        linalg::herm_op_norm(&self.matrix)
    }

    pub fn tensor(&self, other: &Observable) -> Observable {
        Observable::from_matrix_unchecked(linalg::kron(&self.matrix, &other.matrix))
    }

    pub fn scaled(&self, s: f64) -> Observable {
        Observable::from_matrix_unchecked(&self.matrix * c(s, 0.0))
    }
}

/// Kronecker product, shared by states and observables.
pub trait TensorProduct {
    fn tensor_product(&self, other: &Self) -> Self;
}

impl TensorProduct for QuantumState {
    fn tensor_product(&self, other: &Self) -> Self {
        self.tensor(other)
    }
}

impl TensorProduct for Observable {
    fn tensor_product(&self, other: &Self) -> Self {
        self.tensor(other)
    }
}

pub fn tensor_product<T: TensorProduct>(a: &T, b: &T) -> T {
    a.tensor_product(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(default = "one")]
    pub k_b: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Constants {
    fn default() -> Self {
        Constants { k_b: 1.0, hbar: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    A,
    B,
}

impl Subsystem {
    pub fn other(self) -> Subsystem {
        match self {
            Subsystem::A => Subsystem::B,
            Subsystem::B => Subsystem::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Subsystem::A => 0,
            Subsystem::B => 1,
        }
    }
}

/// Hamiltonian, conserved operators and subsystem structure.
#[derive(Clone, Debug)]
pub struct SystemModel {
    subsystem_dims: Vec<usize>,
    hamiltonian: Observable,
    invariants: Vec<Observable>,
    hamiltonian_parts: Option<Vec<Observable>>,
    constants: Constants,
}

const COMMUTE_TOL: f64 = 1e-10;

impl SystemModel {
    pub fn new(
        subsystem_dims: Vec<usize>,
        hamiltonian: Observable,
        invariants: Vec<Observable>,
        hamiltonian_parts: Option<Vec<Observable>>,
        constants: Constants,
    ) -> Result<Self> {
        let dim = hamiltonian.dim();
        if subsystem_dims.is_empty() || subsystem_dims.len() > 2 {
            return Err(Error::InvalidModel(format!(
                "{} subsystems declared; one or two are supported",
                subsystem_dims.len()
            )));
        }
        if subsystem_dims.contains(&0) {
            return Err(Error::InvalidModel("zero subsystem dimension".into()));
        }
        let prod: usize = subsystem_dims.iter().product();
        if prod != dim {
            return Err(Error::DimensionMismatch {
                expected: prod,
                found: dim,
            });
        }
        if !(constants.k_b > 0.0 && constants.hbar > 0.0) {
            return Err(Error::InvalidModel("k_B and hbar must be positive".into()));
        }
        let h_f = hamiltonian.frobenius();
        for (i, g) in invariants.iter().enumerate() {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: g.dim(),
                });
            }
            let comm = linalg::frobenius(&linalg::commutator(hamiltonian.matrix(), g.matrix()));
            if comm > COMMUTE_TOL * h_f * g.frobenius() {
                return Err(Error::InvalidModel(format!(
                    "invariant {i} does not commute with H (‖[H,G]‖ = {comm:e})"
                )));
            }
            for (j, g2) in invariants.iter().enumerate().skip(i + 1) {
                let comm = linalg::frobenius(&linalg::commutator(g.matrix(), g2.matrix()));
                if comm > COMMUTE_TOL * g.frobenius() * g2.frobenius() {
                    return Err(Error::InvalidModel(format!(
                        "invariants {i} and {j} do not commute (‖[G,G']‖ = {comm:e})"
                    )));
                }
            }
        }
        if let Some(parts) = &hamiltonian_parts {
            if subsystem_dims.len() != 2 || parts.len() != 2 {
                return Err(Error::InvalidModel(
                    "H_parts requires a bipartite partition and exactly two local Hamiltonians".into(),
                ));
            }
            for (k, p) in parts.iter().enumerate() {
                if p.dim() != subsystem_dims[k] {
                    return Err(Error::DimensionMismatch {
                        expected: subsystem_dims[k],
                        found: p.dim(),
                    });
                }
            }
            let sum = linalg::kron(parts[0].matrix(), &linalg::identity(subsystem_dims[1]))
                + linalg::kron(&linalg::identity(subsystem_dims[0]), parts[1].matrix());
            let dev = linalg::frobenius(&(hamiltonian.matrix() - sum));
            if dev > COMMUTE_TOL * h_f.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidModel(format!(
                    "H differs from H_A⊗I + I⊗H_B by {dev:e}"
                )));
            }
        }
        Ok(SystemModel {
            subsystem_dims,
            hamiltonian,
            invariants,
            hamiltonian_parts,
            constants,
        })
    }

    /// Single system with unit constants and no further invariants.
    pub fn simple(hamiltonian: Observable) -> Result<Self> {
        let d = hamiltonian.dim();
        SystemModel::new(vec![d], hamiltonian, vec![], None, Constants::default())
    }

    /// Bipartite noninteracting model `H = H_A⊗I + I⊗H_B`.
    pub fn noninteracting(h_a: Observable, h_b: Observable) -> Result<Self> {
        let (da, db) = (h_a.dim(), h_b.dim());
        let h = h_a.tensor(&Observable::identity(db)).matrix() + Observable::identity(da).tensor(&h_b).matrix();
        SystemModel::new(
            vec![da, db],
            Observable::from_matrix_unchecked(h),
            vec![],
            Some(vec![h_a, h_b]),
            Constants::default(),
        )
    }

    pub fn with_invariants(mut self, invariants: Vec<Observable>) -> Result<Self> {
        let parts = self.hamiltonian_parts.take();
        SystemModel::new(self.subsystem_dims, self.hamiltonian, invariants, parts, self.constants)
    }

    pub fn with_constants(mut self, constants: Constants) -> Result<Self> {
        let parts = self.hamiltonian_parts.take();
        SystemModel::new(self.subsystem_dims, self.hamiltonian, self.invariants, parts, constants)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.subsystem_dims
    }

    pub fn hamiltonian(&self) -> &Observable {
        &self.hamiltonian
    }

    pub fn invariants(&self) -> &[Observable] {
        &self.invariants
    }

    pub fn hamiltonian_parts(&self) -> Option<&[Observable]> {
        self.hamiltonian_parts.as_deref()
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn k_b(&self) -> f64 {
        self.constants.k_b
    }

    pub fn is_bipartite(&self) -> bool {
        self.subsystem_dims.len() == 2
    }

    pub fn bipartite_dims(&self) -> Result<(usize, usize)> {
        match self.subsystem_dims.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::PartitionUndeclared),
        }
    }

    /// `H` followed by every `G_i`.
    pub fn conserved(&self) -> Vec<&Observable> {
        std::iter::once(&self.hamiltonian)
            .chain(self.invariants.iter())
            .collect()
    }

    /// Local Hamiltonian of one subsystem embedded in the full space.
    pub fn embedded_part(&self, j: Subsystem) -> Option<CMat> {
        let parts = self.hamiltonian_parts.as_ref()?;
        let (da, db) = self.bipartite_dims().ok()?;
        Some(match j {
            Subsystem::A => linalg::kron(parts[0].matrix(), &linalg::identity(db)),
            Subsystem::B => linalg::kron(&linalg::identity(da), parts[1].matrix()),
        })
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// `Tr(ρ X)`.
pub fn expectation(rho: &QuantumState, x: &Observable) -> Result<f64> {
    check_dim(rho.dim(), x.dim())?;
    Ok(expectation_matrix(rho.matrix(), x.matrix()))
}

pub(crate) fn expectation_matrix(rho: &CMat, x: &CMat) -> f64 {
    let v = linalg::trace_product(rho, x);
    debug_assert!(
        v.im.abs() <= 1e-9 * (1.0 + linalg::frobenius(x)),
        "imaginary residue {} in expectation",
        v.im
    );
    v.re
}

/// `−k_B Σ λ ln λ`, with `0 ln 0 = 0`.
pub fn entropy(rho: &QuantumState, k_b: f64) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues(), k_b)
}

pub fn entropy_of_spectrum(values: &[f64], k_b: f64) -> f64 {
    let s: f64 = values
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum();
    let upper = (values.len() as f64).ln();
    k_b * s.clamp(0.0, upper.max(0.0))
}

pub(crate) fn entropy_matrix(rho: &CMat, k_b: f64) -> f64 {
    entropy_of_spectrum(&linalg::herm_eigenvalues(rho), k_b)
}

/// Projector onto the eigenvectors with eigenvalue above `eps_ker · λ_max`.
pub fn support_projector(rho: &QuantumState, eps_ker: f64) -> Observable {
    let eig = rho.eigen();
    let idx = eig.support_indices(eps_ker);
    let v = eig.columns(&idx);
    Observable::from_matrix_unchecked(&v * v.adjoint())
}

/// `S = −k_B B ln ρ`, zero on the kernel.
pub fn entropy_operator(rho: &QuantumState, k_b: f64) -> Observable {
    entropy_operator_with(rho, k_b, DEFAULT_EPS_KER)
}

pub fn entropy_operator_with(rho: &QuantumState, k_b: f64, eps_ker: f64) -> Observable {
    Observable::from_matrix_unchecked(entropy_operator_matrix(rho.matrix(), k_b, eps_ker))
}

pub(crate) fn entropy_operator_matrix(rho: &CMat, k_b: f64, eps_ker: f64) -> CMat {
    let eig = linalg::herm_eig(rho);
    let cut = eps_ker * eig.max().max(0.0);
    eig.apply(|l| if l > cut { -k_b * l.ln() } else { 0.0 })
}

/// The support of a state with operators restricted to it.
#[derive(Clone, Debug)]
pub struct EffectiveSubspace {
    pub parent_dim: usize,
    /// Orthonormal columns spanning the support (`parent_dim × d′`).
    pub support_basis: CMat,
    pub rho: CMat,
    pub hamiltonian: CMat,
    pub invariants: Vec<CMat>,
}

impl EffectiveSubspace {
    pub fn dim(&self) -> usize {
        self.support_basis.ncols()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.parent_dim
    }

    /// `⟨α_k|X|α_l⟩` in the support basis.
    pub fn restrict(&self, x: &CMat) -> CMat {
        restrict_to(&self.support_basis, x)
    }

    /// Embed an operator on the support back into the parent space, zero on
    /// the kernel.
    pub fn embed(&self, x: &CMat) -> CMat {
        &self.support_basis * x * self.support_basis.adjoint()
    }
}

pub(crate) fn restrict_to(basis: &CMat, x: &CMat) -> CMat {
    let mut r = basis.adjoint() * x * basis;
    linalg::symmetrize(&mut r);
    r
}

/// Restrict a state and the model operators to the state's support.
///
/// For full-rank states the canonical basis is kept, so restricted operators
/// coincide with the originals.
pub fn effective_subspace(rho: &QuantumState, model: &SystemModel, eps_ker: f64) -> Result<EffectiveSubspace> {
    check_dim(model.dim(), rho.dim())?;
    Ok(effective_subspace_matrix(rho.matrix(), model, eps_ker))
}

pub(crate) fn effective_subspace_matrix(rho: &CMat, model: &SystemModel, eps_ker: f64) -> EffectiveSubspace {
    let n = rho.nrows();
    let eig = linalg::herm_eig(rho);
    let idx = eig.support_indices(eps_ker);
    let basis = if idx.len() == n {
        linalg::identity(n)
    } else {
        eig.columns(&idx)
    };
    let rho_r = if idx.len() == n {
        linalg::hermitian_part(rho)
    } else {
        // ρ′ is diagonal in its own eigenbasis.
        let d: Vec<f64> = idx.iter().map(|&k| eig.values[k]).collect();
        linalg::real_diag(&d)
    };
    EffectiveSubspace {
        parent_dim: n,
        hamiltonian: restrict_to(&basis, model.hamiltonian().matrix()),
        invariants: model
            .invariants()
            .iter()
            .map(|g| restrict_to(&basis, g.matrix()))
            .collect(),
        support_basis: basis,
        rho: rho_r,
    }
}

/// Reduced matrix of a bipartite operator, keeping one factor.
pub fn partial_trace_matrix(m: &CMat, dims: (usize, usize), keep: Subsystem) -> CMat {
    let (da, db) = dims;
    match keep {
        Subsystem::A => CMat::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()
        }),
        Subsystem::B => CMat::from_fn(db, db, |i, j| {
            (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()
        }),
    }
}

pub fn partial_trace(rho: &QuantumState, model: &SystemModel, keep: Subsystem) -> Result<QuantumState> {
    let dims = model.bipartite_dims()?;
    check_dim(model.dim(), rho.dim())?;
    let mut r = partial_trace_matrix(rho.matrix(), dims, keep);
    linalg::symmetrize(&mut r);
    Ok(QuantumState::from_matrix_unchecked(r))
}

/// `½Tr(ρ{X,Y}) − Tr(ρX)Tr(ρY)`.
pub fn covariance(rho: &QuantumState, x: &Observable, y: &Observable) -> Result<f64> {
    check_dim(rho.dim(), x.dim())?;
    check_dim(rho.dim(), y.dim())?;
    Ok(covariance_matrix(rho.matrix(), x.matrix(), y.matrix()))
}

pub(crate) fn covariance_matrix(rho: &CMat, x: &CMat, y: &CMat) -> f64 {
    // centered first so near-scalar operators do not cancel catastrophically
    let id = linalg::identity(rho.nrows());
    let dx = x - &id * C64::new(expectation_matrix(rho, x), 0.0);
    let dy = y - &id * C64::new(expectation_matrix(rho, y), 0.0);
    0.5 * expectation_matrix(rho, &linalg::anticommutator(&dx, &dy))
}

/// `s(ρ_A) + s(ρ_B) − s(ρ)`.
pub fn mutual_information(rho: &QuantumState, model: &SystemModel) -> Result<f64> {
    let dims = model.bipartite_dims()?;
    check_dim(model.dim(), rho.dim())?;
    Ok(mutual_information_matrix(rho.matrix(), dims, model.k_b()))
}

pub(crate) fn mutual_information_matrix(rho: &CMat, dims: (usize, usize), k_b: f64) -> f64 {
    let ra = partial_trace_matrix(rho, dims, Subsystem::A);
    let rb = partial_trace_matrix(rho, dims, Subsystem::B);
    entropy_matrix(&ra, k_b) + entropy_matrix(&rb, k_b) - entropy_matrix(rho, k_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sigma_x() -> Observable {
        Observable::new(CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])).unwrap()
    }

    fn sigma_z() -> Observable {
        Observable::diagonal(&[1.0, -1.0])
    }

    fn bell() -> QuantumState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        QuantumState::pure(&[c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(validate_state(&(linalg::identity(2) * c(0.5, 0.)), StateTolerance::default()).is_ok());
        match validate_state(&linalg::real_diag(&[0.6, 0.5]), StateTolerance::default()) {
            Err(Error::TraceDeviation(d)) => assert_abs_diff_eq!(d, 0.1, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let m = CMat::from_row_slice(2, 2, &[c(0.5, 0.), c(0.6, 0.), c(0.6, 0.), c(0.5, 0.)]);
        match validate_state(&m, StateTolerance::default()) {
            Err(Error::NegativeEigenvalue(l)) => assert_abs_diff_eq!(l, -0.1, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let nh = CMat::from_row_slice(2, 2, &[c(0.5, 0.), c(0.1, 0.), c(0.0, 0.), c(0.5, 0.)]);
        assert!(matches!(validate_state(&nh, StateTolerance::default()), Err(Error::NotHermitian(_))));
        let ns = CMat::zeros(2, 3);
        assert!(matches!(validate_state(&ns, StateTolerance::default()), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn expectation_examples() {
        let rho = QuantumState::diagonal(&[0.75, 0.25]).unwrap();
        assert_abs_diff_eq!(expectation(&rho, &Observable::identity(2)).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            expectation(&QuantumState::maximally_mixed(2), &sigma_z()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            expectation(&rho, &Observable::diagonal(&[0.0, 1.0])).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert!(matches!(
            expectation(&rho, &Observable::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&QuantumState::basis(3, 1), 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(entropy(&QuantumState::maximally_mixed(4), 2.0), 2.0 * 4f64.ln(), epsilon = 1e-14);
        // −0.75 ln 0.75 − 0.25 ln 0.25
        let expected = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert_abs_diff_eq!(expected, 0.5623351446188083, epsilon = 1e-15);
        let rho = QuantumState::diagonal(&[0.75, 0.25]).unwrap();
        assert_abs_diff_eq!(entropy(&rho, 1.0), 0.5623351, epsilon = 1e-7);
    }

    #[test]
    fn support_projector_examples() {
        let rho = QuantumState::diagonal(&[0.5, 0.5, 0.0]).unwrap();
        let b = support_projector(&rho, DEFAULT_EPS_KER);
        assert!(linalg::frobenius(&(b.matrix() - linalg::real_diag(&[1., 1., 0.]))) < 1e-14);
        let full = QuantumState::diagonal(&[0.2, 0.3, 0.5]).unwrap();
        let b = support_projector(&full, DEFAULT_EPS_KER);
        assert!(linalg::frobenius(&(b.matrix() - linalg::identity(3))) < 1e-14);
        let psi = QuantumState::pure(&[c(0.6, 0.), c(0., 0.8)]).unwrap();
        let b = support_projector(&psi, DEFAULT_EPS_KER);
        assert!(linalg::frobenius(&(b.matrix() - psi.matrix())) < 1e-14);
        let b2 = b.matrix() * b.matrix();
        assert!(linalg::frobenius(&(b2 - b.matrix())) < 1e-12);
    }

    #[test]
    fn entropy_operator_examples() {
        let psi = QuantumState::pure(&[c(0.6, 0.), c(0., 0.8)]).unwrap();
        assert!(entropy_operator(&psi, 1.0).frobenius() < 1e-14);
        let s = entropy_operator(&QuantumState::maximally_mixed(2), 1.5);
        let expected = linalg::identity(2) * c(1.5 * 2f64.ln(), 0.);
        assert!(linalg::frobenius(&(s.matrix() - expected)) < 1e-14);

        // Independent states: S = S_A⊗I + I⊗S_B.
        let ra = QuantumState::diagonal(&[0.7, 0.3]).unwrap();
        let rb = QuantumState::new(CMat::from_row_slice(
            2,
            2,
            &[c(0.6, 0.), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.)],
        ))
        .unwrap();
        let s = entropy_operator(&ra.tensor(&rb), 1.0);
        let sa = entropy_operator(&ra, 1.0);
        let sb = entropy_operator(&rb, 1.0);
        let sum = linalg::kron(sa.matrix(), &linalg::identity(2)) + linalg::kron(&linalg::identity(2), sb.matrix());
        assert!(linalg::frobenius(&(s.matrix() - sum)) < 1e-13);
    }

    #[test]
    fn effective_subspace_examples() {
        let h = Observable::diagonal(&[0.0, 1.0, 2.0]);
        let model = SystemModel::simple(h).unwrap();
        let rho = QuantumState::diagonal(&[0.75, 0.25, 0.0]).unwrap();
        let sub = effective_subspace(&rho, &model, DEFAULT_EPS_KER).unwrap();
        assert_eq!(sub.dim(), 2);
        let ev = linalg::herm_eigenvalues(&sub.hamiltonian);
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 1.0, epsilon = 1e-14);
        let back = sub.embed(&sub.rho);
        assert!(linalg::frobenius(&(back - rho.matrix())) < 1e-12);

        let psi = QuantumState::basis(3, 2);
        let sub = effective_subspace(&psi, &model, DEFAULT_EPS_KER).unwrap();
        assert_eq!(sub.dim(), 1);
        assert_abs_diff_eq!(sub.rho[(0, 0)].re, 1.0, epsilon = 1e-15);

        let full = QuantumState::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let sub = effective_subspace(&full, &model, DEFAULT_EPS_KER).unwrap();
        assert!(sub.is_full());
        assert!(linalg::frobenius(&(&sub.hamiltonian - model.hamiltonian().matrix())) < 1e-15);
    }

    #[test]
    fn tensor_examples() {
        let m = QuantumState::maximally_mixed(2);
        let t = tensor_product(&m, &m);
        assert!(linalg::frobenius(&(t.matrix() - QuantumState::maximally_mixed(4).matrix())) < 1e-15);
        let p = QuantumState::pure(&[c(0.6, 0.), c(0., 0.8)]).unwrap();
        let pp = tensor_product(&p, &p);
        assert_abs_diff_eq!(pp.purity(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_examples() {
        let model = SystemModel::noninteracting(sigma_z(), sigma_z()).unwrap();
        let ra = partial_trace(&bell(), &model, Subsystem::A).unwrap();
        assert!(linalg::frobenius(&(ra.matrix() - QuantumState::maximally_mixed(2).matrix())) < 1e-15);

        let a = QuantumState::diagonal(&[0.7, 0.3]).unwrap();
        let b = QuantumState::pure(&[c(0.6, 0.), c(0., 0.8)]).unwrap();
        let rb = partial_trace(&a.tensor(&b), &model, Subsystem::B).unwrap();
        assert!(linalg::frobenius(&(rb.matrix() - b.matrix())) < 1e-15);

        let single = SystemModel::simple(sigma_z()).unwrap();
        assert!(matches!(
            partial_trace(&a, &single, Subsystem::A),
            Err(Error::PartitionUndeclared)
        ));
    }

    #[test]
    fn covariance_examples() {
        let rho = QuantumState::diagonal(&[0.3, 0.7]).unwrap();
        let id = Observable::identity(2);
        assert_abs_diff_eq!(covariance(&rho, &id, &id).unwrap(), 0.0, epsilon = 1e-15);
        let e0 = QuantumState::basis(2, 0);
        assert_abs_diff_eq!(covariance(&e0, &sigma_z(), &sigma_z()).unwrap(), 0.0, epsilon = 1e-15);
        let mm = QuantumState::maximally_mixed(2);
        assert_abs_diff_eq!(covariance(&mm, &sigma_x(), &sigma_x()).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mutual_information_examples() {
        let model = SystemModel::noninteracting(sigma_z(), sigma_z()).unwrap();
        let a = QuantumState::diagonal(&[0.7, 0.3]).unwrap();
        assert_abs_diff_eq!(mutual_information(&a.tensor(&a), &model).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            mutual_information(&bell(), &model).unwrap(),
            2.0 * 2f64.ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn model_rejects_noncommuting_invariant() {
        let r = SystemModel::simple(sigma_z()).unwrap().with_invariants(vec![sigma_x()]);
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn model_rejects_inconsistent_parts() {
        let h = Observable::diagonal(&[0., 1., 2., 3.]);
        let r = SystemModel::new(
            vec![2, 2],
            h,
            vec![],
            Some(vec![sigma_z(), sigma_z()]),
            Constants::default(),
        );
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }
}
