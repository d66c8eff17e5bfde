//! Maximum-entropy states under linear constraints.
//!
//! The Gibbs state `exp(−βH + Σν_iG_i)/Z` maximizes the entropy at fixed
//! energy and invariant values. The solver runs a damped Newton iteration on
//! the multipliers; the Jacobian of the mean values with respect to
//! `(−β, ν)` is the covariance matrix of `(H, G_i)` in the current state.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, RMat};
use crate::state::{self, Observable, QuantumState, SystemModel};

/// Exponent spread beyond which the smallest Boltzmann weight underflows.
pub const EXPONENT_GUARD: f64 = 700.0;

const RESIDUAL_TOL: f64 = 1e-13;
const ACCEPT_TOL: f64 = 1e-9;
const MAX_NEWTON: usize = 400;

#[derive(Clone, Debug)]
pub struct GibbsSolution {
    pub beta: f64,
    pub nu: Vec<f64>,
    pub state: QuantumState,
    pub s_max: f64,
    /// `⟨H⟩ − ẽ` followed by `⟨G_i⟩ − g̃_i`.
    pub residuals: Vec<f64>,
}

impl GibbsSolution {
    pub fn state(&self) -> &QuantumState {
        &self.state
    }
}

fn gibbs_exponent(model: &SystemModel, beta: f64, nu: &[f64]) -> Result<CMat> {
    if nu.len() != model.invariants().len() {
        return Err(Error::DimensionMismatch {
            expected: model.invariants().len(),
            found: nu.len(),
        });
    }
    let mut a = model.hamiltonian().matrix() * c(-beta, 0.0);
    for (g, &v) in model.invariants().iter().zip(nu) {
        a += g.matrix() * c(v, 0.0);
    }
    Ok(a)
}

/// Normalized `exp(A)` for Hermitian `A`, computed with a shifted exponent.
pub(crate) fn normalized_exp(a: &CMat) -> Result<CMat> {
    let eig = linalg::herm_eig(a);
    let top = eig.max();
    let spread = top - eig.min();
    if !spread.is_finite() || spread > EXPONENT_GUARD {
        return Err(Error::OverflowGuard(spread));
    }
    let z: f64 = eig.values.iter().map(|&l| (l - top).exp()).sum();
    let mut m = eig.apply(|l| (l - top).exp() / z);
    linalg::symmetrize(&mut m);
    Ok(m)
}

/// `exp(−βH + Σν_iG_i) / Tr(·)`.
pub fn gibbs_density(model: &SystemModel, beta: f64, nu: &[f64]) -> Result<QuantumState> {
    let a = gibbs_exponent(model, beta, nu)?;
    Ok(QuantumState::from_matrix_unchecked(normalized_exp(&a)?))
}

fn spectral_range(x: &CMat) -> (f64, f64) {
    let e = linalg::herm_eigenvalues(x);
    (e[0], e[e.len() - 1])
}

fn is_scalar(x: &CMat) -> Option<f64> {
    let (lo, hi) = spectral_range(x);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    if hi - lo <= 1e-12 * scale {
        Some(0.5 * (lo + hi))
    } else {
        None
    }
}

/// Maximum-entropy state with `Tr(ρH) = e_target` and `Tr(ρG_i) = g_targets[i]`.
pub fn solve_gibbs(model: &SystemModel, e_target: f64, g_targets: &[f64]) -> Result<GibbsSolution> {
    let n_inv = model.invariants().len();
    if g_targets.len() != n_inv {
        return Err(Error::DimensionMismatch {
            expected: n_inv,
            found: g_targets.len(),
        });
    }
    if !e_target.is_finite() || g_targets.iter().any(|g| !g.is_finite()) {
        return Err(Error::Infeasible("non-finite target".into()));
    }
    let ops: Vec<&CMat> = model.conserved().iter().map(|o| o.matrix()).collect();
    let targets: Vec<f64> = std::iter::once(e_target).chain(g_targets.iter().copied()).collect();

    // Scalar operators fix their mean value; the rest are solved for.
    let mut active = Vec::new();
    for (k, x) in ops.iter().enumerate() {
        let name = if k == 0 { "energy".to_string() } else { format!("g_{}", k) };
        match is_scalar(x) {
            Some(v) => {
                if (targets[k] - v).abs() > 1e-10 * v.abs().max(1.0) {
                    return Err(Error::Infeasible(format!(
                        "{name} target {} but the operator is {v}·I",
                        targets[k]
                    )));
                }
            }
            None => {
                let (lo, hi) = spectral_range(x);
                if !(targets[k] > lo && targets[k] < hi) {
                    return Err(Error::Infeasible(format!(
                        "{name} target {} outside the open spectral range ({lo}, {hi})",
                        targets[k]
                    )));
                }
                active.push(k);
            }
        }
    }

    let mut phi = vec![0.0; ops.len()]; // (−β, ν)
    if active.len() == 1 {
        let k = active[0];
        phi[k] = bisect_single(ops[k], targets[k])?;
    }
    if !active.is_empty() {
        newton(&ops, &targets, &active, &mut phi)?;
    }
    finish(model, -phi[0], phi[1..].to_vec(), &targets)
}

fn exponent_from_phi(ops: &[&CMat], phi: &[f64]) -> CMat {
    let n = ops[0].nrows();
    let mut a = CMat::zeros(n, n);
    for (x, &p) in ops.iter().zip(phi) {
        if p != 0.0 {
            a += *x * c(p, 0.0);
        }
    }
    a
}

fn residual_vec(rho: &CMat, ops: &[&CMat], targets: &[f64], active: &[usize]) -> DVector<f64> {
    DVector::from_iterator(
        active.len(),
        active
            .iter()
            .map(|&k| targets[k] - state::expectation_matrix(rho, ops[k])),
    )
}

fn residual_scale(ops: &[&CMat], active: &[usize]) -> f64 {
    active
        .iter()
        .map(|&k| linalg::herm_op_norm(ops[k]))
        .fold(1.0f64, f64::max)
}

/// Bisection on the single multiplier φ (= −β for H), using that the mean
/// value is strictly increasing in φ.
fn bisect_single(x: &CMat, target: f64) -> Result<f64> {
    let (lo_e, hi_e) = spectral_range(x);
    let spread = hi_e - lo_e;
    let mean = |phi: f64| -> Result<f64> {
        let rho = normalized_exp(&(x * c(phi, 0.0)))?;
        Ok(state::expectation_matrix(&rho, x))
    };
    let cap = 0.99 * EXPONENT_GUARD / spread;
    let mut lo = -1.0f64.min(cap);
    let mut hi = 1.0f64.min(cap);
    while mean(lo)? > target {
        if lo <= -cap {
            return Err(Error::Infeasible(format!(
                "target {target} needs an exponent beyond the overflow guard"
            )));
        }
        lo = (2.0 * lo).max(-cap);
    }
    while mean(hi)? < target {
        if hi >= cap {
            return Err(Error::Infeasible(format!(
                "target {target} needs an exponent beyond the overflow guard"
            )));
        }
        hi = (2.0 * hi).min(cap);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn newton(ops: &[&CMat], targets: &[f64], active: &[usize], phi: &mut [f64]) -> Result<()> {
    let scale = residual_scale(ops, active);
    let mut rho = normalized_exp(&exponent_from_phi(ops, phi))?;
    let mut r = residual_vec(&rho, ops, targets, active);
    let mut iterations = 0;
    while r.amax() > RESIDUAL_TOL * scale && iterations < MAX_NEWTON {
        iterations += 1;
        let m = active.len();
        let jac = RMat::from_fn(m, m, |a, b| {
            state::covariance_matrix(&rho, ops[active[a]], ops[active[b]])
        });
        let step = linalg::sym_pinv_solve(&jac, &r, 1e-13);
        let r_norm = r.norm();
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let mut trial = phi.to_vec();
            for (i, &k) in active.iter().enumerate() {
                trial[k] += t * step[i];
            }
            if let Ok(rt) = normalized_exp(&exponent_from_phi(ops, &trial)) {
                let rr = residual_vec(&rt, ops, targets, active);
                if rr.norm() < r_norm {
                    phi.copy_from_slice(&trial);
                    rho = rt;
                    r = rr;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let res = r.amax();
    if res > ACCEPT_TOL * scale {
        return Err(Error::NoConvergence {
            iterations,
            residual: res,
        });
    }
    Ok(())
}

fn finish(model: &SystemModel, beta: f64, nu: Vec<f64>, targets: &[f64]) -> Result<GibbsSolution> {
    let st = gibbs_density(model, beta, &nu)?;
    let residuals = model
        .conserved()
        .iter()
        .zip(targets)
        .map(|(x, t)| state::expectation_matrix(st.matrix(), x.matrix()) - t)
        .collect();
    let s_max = state::entropy(&st, model.k_b());
    Ok(GibbsSolution {
        beta,
        nu,
        state: st,
        s_max,
        residuals,
    })
}

/// Orthonormal basis of the range of an idempotent Hermitian operator.
fn projector_range(b: &CMat) -> CMat {
    let eig = linalg::herm_eig(b);
    let idx: Vec<usize> = (0..eig.dim()).filter(|&k| eig.values[k] > 0.5).collect();
    eig.columns(&idx)
}

fn check_projector(model: &SystemModel, b: &Observable) -> Result<()> {
    if b.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: b.dim(),
        });
    }
    let bm = b.matrix();
    let idem = linalg::frobenius(&(bm * bm - bm));
    if idem > 1e-10 {
        return Err(Error::NotIdempotent(idem));
    }
    for x in model.conserved() {
        let comm = linalg::frobenius(&linalg::commutator(bm, x.matrix()));
        if comm > 1e-10 * x.frobenius().max(1.0) {
            return Err(Error::NotCommuting(comm));
        }
    }
    Ok(())
}

/// Maximum-entropy state supported on the range of `B` (a projector commuting
/// with `H` and every `G_i`), with the given energy and invariant values.
/// The returned multipliers refer to the restricted problem; `β < 0` is
/// allowed.
pub fn nd_solution(model: &SystemModel, b: &Observable, e_target: f64, g_targets: &[f64]) -> Result<GibbsSolution> {
    check_projector(model, b)?;
    let basis = projector_range(b.matrix());
    let rank = basis.ncols();
    if rank == 0 {
        return Err(Error::Infeasible("projector has rank zero".into()));
    }
    let h_r = state::restrict_to(&basis, model.hamiltonian().matrix());
    let g_r: Vec<Observable> = model
        .invariants()
        .iter()
        .map(|g| Observable::from_matrix_unchecked(state::restrict_to(&basis, g.matrix())))
        .collect();
    let sub = SystemModel::new(
        vec![rank],
        Observable::from_matrix_unchecked(h_r),
        g_r,
        None,
        model.constants(),
    )?;
    let sol = if rank == 1 {
        let targets: Vec<f64> = std::iter::once(e_target).chain(g_targets.iter().copied()).collect();
        for (x, t) in sub.conserved().iter().zip(&targets) {
            let v = x.matrix()[(0, 0)].re;
            if (v - t).abs() > 1e-10 * v.abs().max(1.0) {
                return Err(Error::Infeasible(format!(
                    "rank-one projector fixes the mean value at {v}, target {t}"
                )));
            }
        }
        finish(&sub, 0.0, vec![0.0; g_targets.len()], &targets)?
    } else {
        solve_gibbs(&sub, e_target, g_targets)?
    };
    let mut full = &basis * sol.state().matrix() * basis.adjoint();
    linalg::symmetrize(&mut full);
    let st = QuantumState::from_matrix_unchecked(full);
    Ok(GibbsSolution {
        s_max: state::entropy(&st, model.k_b()),
        state: st,
        ..sol
    })
}

/// `B exp(−βH + Σν_iG_i) B / Tr(B exp(·))` at the given targets.
pub fn nd_state(model: &SystemModel, b: &Observable, e_target: f64, g_targets: &[f64]) -> Result<QuantumState> {
    Ok(nd_solution(model, b, e_target, g_targets)?.state)
}
