//! Equation-of-motion terms `dρ/dt = −(i/ħ)[H, ρ] + D`.
//!
//! Three dissipators are provided:
//!
//! * `sea_single`: steepest entropy ascent in the trace metric on the
//!   effective subspace. The entropy gradient `−k_B ln ρ′` is projected
//!   orthogonally to `span{I′, H′, G′_i}` and scaled by `1/(k_B τ)`.
//! * `sea_composite`: the same construction applied per subsystem, using
//!   operators as perceived locally through the reduced state of the other
//!   subsystem.
//! * `naive_relaxation`: linear relaxation toward the Gibbs state at the
//!   current invariants. It conserves everything it should but fills the
//!   kernel and moves pure states, and serves as a negative control.

use serde::{Deserialize, Serialize};

use crate::equilibrium;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, I};
use crate::state::{self, Observable, QuantumState, Subsystem, SystemModel, DEFAULT_EPS_KER};

/// Relative threshold for dropping near-dependent constraint directions.
pub const GRAM_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    Unitary,
    SeaSingle,
    SeaComposite,
    NaiveRelaxation,
}

impl DynamicsKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DynamicsKind::Unitary => "unitary",
            DynamicsKind::SeaSingle => "sea_single",
            DynamicsKind::SeaComposite => "sea_composite",
            DynamicsKind::NaiveRelaxation => "naive_relaxation",
        }
    }
}

fn default_tau() -> Vec<f64> {
    vec![1.0]
}

fn default_eps() -> f64 {
    DEFAULT_EPS_KER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub kind: DynamicsKind,
    /// Relaxation time per subsystem; a single value is shared.
    #[serde(default = "default_tau")]
    pub tau: Vec<f64>,
    #[serde(default)]
    pub notes: String,
    /// Kernel threshold used when restricting to the effective subspace.
    #[serde(default = "default_eps")]
    pub eps_ker: f64,
}

impl DynamicsSpec {
    pub fn new(kind: DynamicsKind) -> Self {
        DynamicsSpec {
            kind,
            tau: default_tau(),
            notes: String::new(),
            eps_ker: DEFAULT_EPS_KER,
        }
    }

    pub fn with_tau(mut self, tau: Vec<f64>) -> Self {
        self.tau = tau;
        self
    }

    pub fn tau_for(&self, j: usize) -> f64 {
        self.tau.get(j).copied().unwrap_or(self.tau[0])
    }

    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        if self.tau.is_empty() {
            return Err(Error::InvalidDynamics("tau must have at least one entry".into()));
        }
        if self.tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidDynamics("tau must be positive".into()));
        }
        if !(self.eps_ker > 0.0 && self.eps_ker < 1.0) {
            return Err(Error::InvalidDynamics("eps_ker must lie in (0, 1)".into()));
        }
        if self.kind == DynamicsKind::SeaComposite {
            if !model.is_bipartite() {
                return Err(Error::PartitionUndeclared);
            }
            if self.tau.len() > 2 {
                return Err(Error::InvalidDynamics("composite dynamics takes at most two tau values".into()));
            }
        } else if self.tau.len() > 1 && self.tau.len() != model.subsystem_dims().len() {
            return Err(Error::InvalidDynamics("one tau per subsystem expected".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionDiagnostics {
    pub trace_d: f64,
    pub trace_dh: f64,
    pub trace_dg: Vec<f64>,
    /// `Tr(D S)` with `S = −k_B B ln ρ`.
    pub entropy_production: f64,
}

#[derive(Clone, Debug)]
pub struct MotionTerms {
    pub hamiltonian_term: CMat,
    pub dissipative_term: CMat,
    pub diagnostics: MotionDiagnostics,
}

impl MotionTerms {
    pub fn total(&self) -> CMat {
        &self.hamiltonian_term + &self.dissipative_term
    }
}

fn check_dim(model: &SystemModel, rho: &QuantumState) -> Result<()> {
    if model.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `−(i/ħ)[H, ρ]`.
pub fn von_neumann_term(model: &SystemModel, rho: &QuantumState) -> Result<CMat> {
    check_dim(model, rho)?;
    Ok(von_neumann_matrix(model, rho.matrix()))
}

pub(crate) fn von_neumann_matrix(model: &SystemModel, rho: &CMat) -> CMat {
    let comm = linalg::commutator(model.hamiltonian().matrix(), rho);
    let mut out = comm * (-I / c(model.constants().hbar, 0.0));
    linalg::symmetrize(&mut out);
    out
}

fn weight(dims: (usize, usize), j: Subsystem, reduced_other: &CMat) -> CMat {
    match j {
        Subsystem::A => linalg::kron(&linalg::identity(dims.0), reduced_other),
        Subsystem::B => linalg::kron(reduced_other, &linalg::identity(dims.1)),
    }
}

fn perceived(dims: (usize, usize), j: Subsystem, w: &CMat, x: &CMat) -> CMat {
    let mut out = state::partial_trace_matrix(&(w * x), dims, j);
    linalg::symmetrize(&mut out);
    out
}

/// `(X)^J = Tr_{J̄}[(I_J ⊗ ρ_{J̄}) X]`, the operator `X` as seen from
/// subsystem `J` given the reduced state of the complement.
pub fn locally_perceived(model: &SystemModel, rho: &QuantumState, x: &Observable, j: Subsystem) -> Result<Observable> {
    let dims = model.bipartite_dims()?;
    check_dim(model, rho)?;
    let other = state::partial_trace_matrix(rho.matrix(), dims, j.other());
    let w = weight(dims, j, &other);
    Ok(Observable::from_matrix_unchecked(perceived(dims, j, &w, x.matrix())))
}

/// Single-system steepest-entropy-ascent dissipator.
pub fn sea_dissipator_single(model: &SystemModel, rho: &QuantumState, tau: f64) -> Result<CMat> {
    check_dim(model, rho)?;
    Ok(sea_single_matrix(model, rho.matrix(), tau, DEFAULT_EPS_KER))
}

pub(crate) fn sea_single_matrix(model: &SystemModel, rho: &CMat, tau: f64, eps_ker: f64) -> CMat {
    let n = rho.nrows();
    let sub = state::effective_subspace_matrix(rho, model, eps_ker);
    let d = sub.dim();
    if d <= 1 {
        return CMat::zeros(n, n);
    }
    let k_b = model.k_b();
    let eig = linalg::herm_eig(&sub.rho);
    // Restricted ρ′ is strictly positive by construction; clamp guards
    // against a stage state whose support eigenvalue dipped under zero.
    let g = eig.apply(|l| -k_b * l.max(f64::MIN_POSITIVE).ln());
    let mut constraints = Vec::with_capacity(2 + sub.invariants.len());
    constraints.push(linalg::identity(d));
    constraints.push(sub.hamiltonian.clone());
    constraints.extend(sub.invariants.iter().cloned());
    let perp = linalg::project_out(&g, &constraints, GRAM_THRESHOLD);
    let d_sub = perp / c(k_b * tau, 0.0);
    let mut out = if sub.is_full() { d_sub } else { sub.embed(&d_sub) };
    linalg::symmetrize(&mut out);
    out
}

/// Composite steepest-entropy-ascent dissipator for a bipartite system.
pub fn sea_dissipator_composite(model: &SystemModel, rho: &QuantumState, tau: &[f64]) -> Result<CMat> {
    check_dim(model, rho)?;
    if tau.is_empty() {
        return Err(Error::InvalidDynamics("tau must have at least one entry".into()));
    }
    let taus = [tau[0], *tau.get(1).unwrap_or(&tau[0])];
    sea_composite_matrix(model, rho.matrix(), taus, DEFAULT_EPS_KER)
}

/// The local dissipator `D^J` entering the composite construction.
pub(crate) fn local_sea_term(
    model: &SystemModel,
    dims: (usize, usize),
    j: Subsystem,
    rho: &CMat,
    entropy_op: &CMat,
    tau: f64,
) -> CMat {
    let other = state::partial_trace_matrix(rho, dims, j.other());
    let w = weight(dims, j, &other);
    let local_dim = match j {
        Subsystem::A => dims.0,
        Subsystem::B => dims.1,
    };
    let g = perceived(dims, j, &w, entropy_op);
    let mut constraints = Vec::with_capacity(2 + model.invariants().len());
    constraints.push(linalg::identity(local_dim));
    constraints.push(perceived(dims, j, &w, model.hamiltonian().matrix()));
    for inv in model.invariants() {
        constraints.push(perceived(dims, j, &w, inv.matrix()));
    }
    let perp = linalg::project_out(&g, &constraints, GRAM_THRESHOLD);
    perp / c(model.k_b() * tau, 0.0)
}

pub(crate) fn sea_composite_matrix(model: &SystemModel, rho: &CMat, taus: [f64; 2], eps_ker: f64) -> Result<CMat> {
    let dims = model.bipartite_dims()?;
    let s = state::entropy_operator_matrix(rho, model.k_b(), eps_ker);
    let rho_a = state::partial_trace_matrix(rho, dims, Subsystem::A);
    let rho_b = state::partial_trace_matrix(rho, dims, Subsystem::B);
    let d_a = local_sea_term(model, dims, Subsystem::A, rho, &s, taus[0]);
    let d_b = local_sea_term(model, dims, Subsystem::B, rho, &s, taus[1]);
    let mut out = linalg::kron(&d_a, &rho_b) + linalg::kron(&rho_a, &d_b);
    linalg::symmetrize(&mut out);
    Ok(out)
}

/// `−(ρ − ρ_e)/τ_r` with ρ_e the Gibbs state at the current invariants.
pub fn naive_relaxation(model: &SystemModel, rho: &QuantumState, tau_r: f64) -> Result<CMat> {
    check_dim(model, rho)?;
    naive_matrix(model, rho.matrix(), tau_r)
}

pub(crate) fn naive_matrix(model: &SystemModel, rho: &CMat, tau_r: f64) -> Result<CMat> {
    let e = state::expectation_matrix(rho, model.hamiltonian().matrix());
    let g: Vec<f64> = model
        .invariants()
        .iter()
        .map(|x| state::expectation_matrix(rho, x.matrix()))
        .collect();
    let eq = equilibrium::solve_gibbs(model, e, &g)?;
    let mut out = (eq.state().matrix() - rho) / c(tau_r, 0.0);
    linalg::symmetrize(&mut out);
    Ok(out)
}

pub(crate) fn dissipative_matrix(model: &SystemModel, spec: &DynamicsSpec, rho: &CMat, eps_ker: f64) -> Result<CMat> {
    let n = rho.nrows();
    match spec.kind {
        DynamicsKind::Unitary => Ok(CMat::zeros(n, n)),
        DynamicsKind::SeaSingle => Ok(sea_single_matrix(model, rho, spec.tau[0], eps_ker)),
        DynamicsKind::SeaComposite => {
            sea_composite_matrix(model, rho, [spec.tau_for(0), spec.tau_for(1)], eps_ker)
        }
        DynamicsKind::NaiveRelaxation => naive_matrix(model, rho, spec.tau[0]),
    }
}

/// Full vector field evaluated at a raw matrix.
pub(crate) fn vector_field(model: &SystemModel, spec: &DynamicsSpec, rho: &CMat, eps_ker: f64) -> Result<CMat> {
    let d = dissipative_matrix(model, spec, rho, eps_ker)?;
    Ok(von_neumann_matrix(model, rho) + d)
}

pub(crate) fn diagnostics(model: &SystemModel, rho: &CMat, d: &CMat, eps_ker: f64) -> MotionDiagnostics {
    let s = state::entropy_operator_matrix(rho, model.k_b(), eps_ker);
    MotionDiagnostics {
        trace_d: linalg::trace(d).re,
        trace_dh: linalg::hs_inner(d, model.hamiltonian().matrix()),
        trace_dg: model
            .invariants()
            .iter()
            .map(|g| linalg::hs_inner(d, g.matrix()))
            .collect(),
        entropy_production: linalg::hs_inner(d, &s),
    }
}

/// Model whose invariant list covers everything the dynamics conserves.
///
/// Composite SEA on a noninteracting Hamiltonian also conserves each
/// subsystem energy. Equilibrium and affinity analyses need those extra
/// constraints, so `H_A ⊗ I` is appended when it is not already spanned.
pub fn conserved_model(model: &SystemModel, spec: &DynamicsSpec) -> Result<SystemModel> {
    if spec.kind != DynamicsKind::SeaComposite {
        return Ok(model.clone());
    }
    let Some(h_a) = model.embedded_part(Subsystem::A) else {
        return Ok(model.clone());
    };
    let mut span: Vec<CMat> = vec![linalg::identity(model.dim())];
    span.extend(model.conserved().iter().map(|x| x.matrix().clone()));
    let rest = linalg::project_out(&h_a, &span, GRAM_THRESHOLD);
    if linalg::frobenius(&rest) <= 1e-10 * linalg::frobenius(&h_a).max(1.0) {
        return Ok(model.clone());
    }
    let mut inv = model.invariants().to_vec();
    inv.push(Observable::new(h_a)?);
    model.clone().with_invariants(inv)
}

/// Both terms of the equation of motion with constraint diagnostics.
pub fn motion(model: &SystemModel, spec: &DynamicsSpec, rho: &QuantumState) -> Result<MotionTerms> {
    check_dim(model, rho)?;
    spec.validate(model)?;
    motion_with_eps(model, spec, rho.matrix(), spec.eps_ker)
}

pub(crate) fn motion_with_eps(model: &SystemModel, spec: &DynamicsSpec, rho: &CMat, eps_ker: f64) -> Result<MotionTerms> {
    let dissipative_term = dissipative_matrix(model, spec, rho, eps_ker)?;
    let diagnostics = diagnostics(model, rho, &dissipative_term, eps_ker);
    Ok(MotionTerms {
        hamiltonian_term: von_neumann_matrix(model, rho),
        dissipative_term,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::gibbs_density;
    use crate::random;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn sigma_z() -> Observable {
        Observable::diagonal(&[1.0, -1.0])
    }

    fn qutrit() -> SystemModel {
        SystemModel::simple(Observable::diagonal(&[0.0, 1.0, 2.0])).unwrap()
    }

    fn plus() -> QuantumState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        QuantumState::pure(&[c(s, 0.), c(s, 0.)]).unwrap()
    }

    #[test]
    fn von_neumann_examples() {
        let model = SystemModel::simple(sigma_z()).unwrap();
        let diag = QuantumState::diagonal(&[0.3, 0.7]).unwrap();
        assert!(linalg::frobenius(&von_neumann_term(&model, &diag).unwrap()) < 1e-16);

        // [σ_z, |+⟩⟨+|] = [[0, 1], [−1, 0]]; times −i gives off-diagonals ∓i.
        let v = von_neumann_term(&model, &plus()).unwrap();
        assert_abs_diff_eq!(v[(0, 1)].im, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[(1, 0)].im, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(linalg::frobenius(&v), 2f64.sqrt(), epsilon = 1e-15);

        let mut rng = random::rng(11, 0);
        for _ in 0..10 {
            let h = Observable::new(random::hermitian(4, &mut rng)).unwrap();
            let m = SystemModel::simple(h).unwrap();
            let rho = random::full_rank_state(4, &mut rng);
            let v = von_neumann_term(&m, &rho).unwrap();
            assert!(linalg::trace(&v).norm() < 1e-13);
            assert!(linalg::hs_inner(&v, m.hamiltonian().matrix()).abs() < 1e-11);
        }
    }

    #[test]
    fn locally_perceived_examples() {
        let h_a = Observable::diagonal(&[0.0, 1.0]);
        let h_b = Observable::diagonal(&[0.0, 2.5]);
        let model = SystemModel::noninteracting(h_a.clone(), h_b.clone()).unwrap();
        let mut rng = random::rng(5, 0);
        let rho = random::full_rank_state(4, &mut rng);

        let xa = h_a.tensor(&Observable::identity(2));
        let got = locally_perceived(&model, &rho, &xa, Subsystem::A).unwrap();
        assert!(linalg::frobenius(&(got.matrix() - h_a.matrix())) < 1e-14);

        let got = locally_perceived(&model, &rho, &Observable::identity(4), Subsystem::B).unwrap();
        assert!(linalg::frobenius(&(got.matrix() - linalg::identity(2))) < 1e-14);

        // Oracle: explicit index summation Σ_{k,l} ρ_B[l,k] H[(i,k),(j,l)].
        let rho_b = state::partial_trace_matrix(rho.matrix(), (2, 2), Subsystem::B);
        let h = model.hamiltonian().matrix();
        let mut oracle = CMat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        oracle[(i, j)] += rho_b[(k, l)] * h[(i * 2 + l, j * 2 + k)];
                    }
                }
            }
        }
        let got = locally_perceived(&model, &rho, model.hamiltonian(), Subsystem::A).unwrap();
        assert!(linalg::frobenius(&(got.matrix() - &oracle)) < 1e-14);
        let e_b = linalg::hs_inner(&rho_b, h_b.matrix());
        let expected = h_a.matrix() + linalg::identity(2) * c(e_b, 0.0);
        assert!(linalg::frobenius(&(got.matrix() - expected)) < 1e-14);
    }

    #[test]
    fn sea_single_vanishes_on_pure_and_gibbs() {
        let model = qutrit();
        let psi = random::pure_state(3, &mut random::rng(1, 0));
        assert!(linalg::frobenius(&sea_dissipator_single(&model, &psi, 1.0).unwrap()) < 1e-15);
        let g = gibbs_density(&model, 1.0, &[]).unwrap();
        assert!(linalg::frobenius(&sea_dissipator_single(&model, &g, 1.0).unwrap()) < 1e-11);
    }

    #[test]
    fn sea_single_matches_least_squares_oracle() {
        let model = qutrit();
        let p = [0.7, 0.2, 0.1];
        let rho = QuantumState::diagonal(&p).unwrap();
        let d = sea_dissipator_single(&model, &rho, 2.0).unwrap();
        // Normal equations for the affine fit of −ln p_k on (1, E_k).
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_iterator(3, p.iter().map(|x: &f64| -x.ln()));
        let ata = a.transpose() * &a;
        let coef = ata.try_inverse().unwrap() * a.transpose() * &y;
        let resid = &y - &a * coef;
        for k in 0..3 {
            assert_abs_diff_eq!(d[(k, k)].re, resid[k] / 2.0, epsilon = 1e-13);
            for l in 0..3 {
                if k != l {
                    assert!(d[(k, l)].norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn sea_single_constraints_and_production() {
        let mut rng = random::rng(21, 0);
        for n in 2..6 {
            let h = Observable::new(random::hermitian(n, &mut rng)).unwrap();
            let model = SystemModel::simple(h).unwrap();
            let rho = random::full_rank_state(n, &mut rng);
            let d = sea_dissipator_single(&model, &rho, 0.7).unwrap();
            let diag = diagnostics(&model, rho.matrix(), &d, DEFAULT_EPS_KER);
            assert!(diag.trace_d.abs() < 1e-11);
            assert!(diag.trace_dh.abs() < 1e-11 * model.hamiltonian().op_norm());
            // Entropy production equals k_B τ ‖D‖².
            let norm2 = linalg::hs_inner(&d, &d);
            assert_abs_diff_eq!(diag.entropy_production, 0.7 * norm2, epsilon = 1e-10 * (1.0 + norm2));
            assert!(diag.entropy_production > 0.0);
        }
    }

    #[test]
    fn sea_single_rank_deficient_support() {
        let model = qutrit();
        let rho = QuantumState::diagonal(&[0.75, 0.25, 0.0]).unwrap();
        let d = sea_dissipator_single(&model, &rho, 1.0).unwrap();
        // On the two-level support, {I′, H′} spans all diagonals: D vanishes.
        assert!(linalg::frobenius(&d) < 1e-14);
        let rho = random::ranked_state(3, 2, &mut random::rng(3, 3));
        let d = sea_dissipator_single(&model, &rho, 1.0).unwrap();
        let b = state::support_projector(&rho, DEFAULT_EPS_KER);
        let k = linalg::identity(3) - b.matrix();
        assert!(linalg::frobenius(&(&k * &d)) < 1e-12);
    }

    #[test]
    fn composite_vanishes_on_trivial_states() {
        let h_a = Observable::diagonal(&[0.0, 1.0]);
        let h_b = Observable::diagonal(&[0.0, 1.0]);
        let model = SystemModel::noninteracting(h_a, h_b).unwrap();
        let beta = 0.8;
        let ga = gibbs_density(&SystemModel::simple(Observable::diagonal(&[0.0, 1.0])).unwrap(), beta, &[]).unwrap();
        let prod = ga.tensor(&ga);
        let d = sea_dissipator_composite(&model, &prod, &[1.0]).unwrap();
        assert!(linalg::frobenius(&d) < 1e-12);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = QuantumState::pure(&[c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]).unwrap();
        let d = sea_dissipator_composite(&model, &bell, &[1.0]).unwrap();
        assert!(linalg::frobenius(&d) < 1e-14);

        let g = gibbs_density(&model, 0.6, &[]).unwrap();
        let d = sea_dissipator_composite(&model, &g, &[1.0, 2.0]).unwrap();
        assert!(linalg::frobenius(&d) < 1e-12);
    }

    /// Independent route: build the local projections from explicit index sums
    /// and a raw normal-equations solve.
    fn composite_oracle(model: &SystemModel, rho: &CMat, tau: f64) -> CMat {
        let (da, db) = model.bipartite_dims().unwrap();
        let eig = rho.clone().symmetric_eigen();
        let mut s = CMat::zeros(da * db, da * db);
        for k in 0..da * db {
            let l = eig.eigenvalues[k];
            let v = eig.eigenvectors.column(k);
            s += v * v.adjoint() * c(-l.ln(), 0.0);
        }
        let mut rho_a = CMat::zeros(da, da);
        let mut rho_b = CMat::zeros(db, db);
        for i in 0..da {
            for j in 0..da {
                for k in 0..db {
                    rho_a[(i, j)] += rho[(i * db + k, j * db + k)];
                }
            }
        }
        for i in 0..db {
            for j in 0..db {
                for k in 0..da {
                    rho_b[(i, j)] += rho[(k * db + i, k * db + j)];
                }
            }
        }
        let seen_a = |x: &CMat| {
            CMat::from_fn(da, da, |i, j| {
                let mut acc = c(0., 0.);
                for k in 0..db {
                    for l in 0..db {
                        acc += rho_b[(k, l)] * x[(i * db + l, j * db + k)];
                    }
                }
                acc
            })
        };
        let seen_b = |x: &CMat| {
            CMat::from_fn(db, db, |i, j| {
                let mut acc = c(0., 0.);
                for k in 0..da {
                    for l in 0..da {
                        acc += rho_a[(k, l)] * x[(l * db + i, k * db + j)];
                    }
                }
                acc
            })
        };
        let project = |g: CMat, cs: Vec<CMat>| {
            let m = cs.len();
            let gram = DMatrix::from_fn(m, m, |a, b| (cs[a].adjoint() * &cs[b]).trace().re);
            let rhs = DVector::from_fn(m, |a, _| (cs[a].adjoint() * &g).trace().re);
            let coef = gram.try_inverse().unwrap() * rhs;
            let mut out = g;
            for (k, cm) in cs.iter().enumerate() {
                out -= cm * c(coef[k], 0.0);
            }
            out
        };
        let h = model.hamiltonian().matrix();
        let d_a = project(seen_a(&s), vec![CMat::identity(da, da), seen_a(h)]) / c(tau, 0.);
        let d_b = project(seen_b(&s), vec![CMat::identity(db, db), seen_b(h)]) / c(tau, 0.);
        d_a.kronecker(&rho_b) + rho_a.kronecker(&d_b)
    }

    #[test]
    fn composite_constraints_and_oracle() {
        let h_a = Observable::diagonal(&[0.0, 1.0]);
        let h_b = Observable::diagonal(&[0.3, 1.7]);
        let model = SystemModel::noninteracting(h_a, h_b).unwrap();
        let rho = random::full_rank_state(4, &mut random::rng(8, 0));
        assert!(mutual_info(&model, &rho) > 1e-3);
        let d = sea_dissipator_composite(&model, &rho, &[1.0]).unwrap();
        let oracle = composite_oracle(&model, rho.matrix(), 1.0);
        assert!(linalg::frobenius(&(&d - &oracle)) < 1e-12);
        let ha = model.embedded_part(Subsystem::A).unwrap();
        let hb = model.embedded_part(Subsystem::B).unwrap();
        for x in [linalg::identity(4), model.hamiltonian().matrix().clone(), ha, hb] {
            assert!(linalg::hs_inner(&d, &x).abs() < 1e-11);
        }
        let s = state::entropy_operator(&rho, 1.0);
        assert!(linalg::hs_inner(&d, s.matrix()) > 0.0);
    }

    fn mutual_info(model: &SystemModel, rho: &QuantumState) -> f64 {
        state::mutual_information(rho, model).unwrap()
    }

    #[test]
    fn composite_on_products_is_product_rule() {
        let h_a = Observable::new(random::hermitian(2, &mut random::rng(1, 9))).unwrap();
        let h_b = Observable::new(random::hermitian(3, &mut random::rng(2, 9))).unwrap();
        let model = SystemModel::noninteracting(h_a.clone(), h_b.clone()).unwrap();
        let ra = random::full_rank_state(2, &mut random::rng(3, 9));
        let rb = random::full_rank_state(3, &mut random::rng(4, 9));
        let d = sea_dissipator_composite(&model, &ra.tensor(&rb), &[1.0, 0.5]).unwrap();
        let da = sea_dissipator_single(&SystemModel::simple(h_a).unwrap(), &ra, 1.0).unwrap();
        let db = sea_dissipator_single(&SystemModel::simple(h_b).unwrap(), &rb, 0.5).unwrap();
        let expected = linalg::kron(&da, rb.matrix()) + linalg::kron(ra.matrix(), &db);
        assert!(linalg::frobenius(&(d - expected)) < 1e-12);
    }

    #[test]
    fn naive_examples() {
        let model = qutrit();
        let g = gibbs_density(&model, 0.4, &[]).unwrap();
        assert!(linalg::frobenius(&naive_relaxation(&model, &g, 1.0).unwrap()) < 1e-10);

        let excited = QuantumState::basis(3, 1);
        let d = naive_relaxation(&model, &excited, 1.0).unwrap();
        assert!(linalg::frobenius(&d) > 0.1);

        let rho = QuantumState::diagonal(&[0.75, 0.25, 0.0]).unwrap();
        let d = naive_relaxation(&model, &rho, 1.0).unwrap();
        assert!(d[(2, 2)].re > 1e-3);
        assert!(linalg::trace(&d).norm() < 1e-12);
        assert!(linalg::hs_inner(&d, model.hamiltonian().matrix()).abs() < 1e-11);
    }

    #[test]
    fn motion_dispatch() {
        let model = qutrit();
        let rho = random::full_rank_state(3, &mut random::rng(2, 2));
        let m = motion(&model, &DynamicsSpec::new(DynamicsKind::Unitary), &rho).unwrap();
        assert_eq!(linalg::frobenius(&m.dissipative_term), 0.0);

        let g = gibbs_density(&model, 0.7, &[]).unwrap();
        let m = motion(&model, &DynamicsSpec::new(DynamicsKind::SeaSingle), &g).unwrap();
        assert!(linalg::frobenius(&m.dissipative_term) < 1e-11);
        assert!(m.diagnostics.trace_d.abs() < 1e-11 && m.diagnostics.trace_dh.abs() < 1e-11);

        let zero = SystemModel::noninteracting(Observable::zero(2), Observable::zero(2)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = QuantumState::pure(&[c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]).unwrap();
        let m = motion(&zero, &DynamicsSpec::new(DynamicsKind::SeaComposite), &bell).unwrap();
        assert!(linalg::frobenius(&m.total()) < 1e-14);

        let bad = motion(&model, &DynamicsSpec::new(DynamicsKind::SeaComposite), &rho);
        assert!(matches!(bad, Err(Error::PartitionUndeclared)));
    }
}
