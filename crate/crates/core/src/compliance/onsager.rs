//! Affinity representation and the linear-response (Onsager) analysis.
//!
//! On the effective subspace, `S′ = −k_B ln ρ′ = f0·I′ + Σ_j f_j X′_j` with
//! `{X′_j}` the orthonormal generalized Gell-Mann basis. Affinities are
//! `f − f_e` relative to the maximum-entropy state at equal invariants;
//! dissipative rates are `Tr(D X′_j)`.

use nalgebra::DVector;

use super::{ComplianceSetup, ConditionResult, Metric, Tolerances};
use crate::dynamics::{self, DynamicsKind, DynamicsSpec};
use crate::equilibrium::{self, GibbsSolution};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, RMat};
use crate::random;
use crate::state::{self, SystemModel};

/// Orthonormal traceless Hermitian basis of `d×d` matrices (`d² − 1`
/// elements): symmetric and antisymmetric off-diagonal pairs, then the
/// diagonal family.
pub fn gell_mann_basis(d: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(d * d - 1);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut s = CMat::zeros(d, d);
            s[(j, k)] = c(r, 0.0);
            s[(k, j)] = c(r, 0.0);
            out.push(s);
            let mut a = CMat::zeros(d, d);
            a[(j, k)] = c(0.0, -r);
            a[(k, j)] = c(0.0, r);
            out.push(a);
        }
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut m = CMat::zeros(d, d);
        for i in 0..l {
            m[(i, i)] = c(1.0 / norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) / norm, 0.0);
        out.push(m);
    }
    out
}

/// `(f0, f, S)` for a strictly positive state: `S = −k_B ln ρ`,
/// `f_j = Tr(S X_j)`, `f0 = Tr(S)/d`.
pub fn affinity_coordinates(rho: &CMat, k_b: f64, basis: &[CMat]) -> (f64, Vec<f64>, CMat) {
    let eig = linalg::herm_eig(rho);
    let s = eig.apply(|l| -k_b * l.ln());
    let d = rho.nrows() as f64;
    let f0 = linalg::trace(&s).re / d;
    let f = basis.iter().map(|x| linalg::hs_inner(&s, x)).collect();
    (f0, f, s)
}

fn expansion_residual(s: &CMat, f0: f64, f: &[f64], basis: &[CMat]) -> f64 {
    let n = s.nrows();
    let mut r = s - linalg::identity(n) * c(f0, 0.0);
    for (fj, x) in f.iter().zip(basis) {
        r -= x * c(*fj, 0.0);
    }
    linalg::frobenius(&r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluctuationCheck {
    /// `Tr(ρ S²) − s²`.
    pub lhs: f64,
    /// `Σ f_i f_j ⟨ΔX_i ΔX_j⟩`.
    pub rhs: f64,
    /// `‖S − f0 I − Σ f_j X_j‖_F`.
    pub completeness: f64,
    /// `ε‖S‖_F²`, the resolution of either side.
    pub floor: f64,
}

impl FluctuationCheck {
    /// Relative to the larger side. `floor` absorbs the case where both sides
    /// are roundoff (the maximally mixed state has no entropy fluctuation).
    pub fn relative_error(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs()).max(self.floor);
        (self.lhs - self.rhs).abs() / scale
    }
}

fn support_state(rho: &CMat, eps: f64) -> CMat {
    let eig = linalg::herm_eig(rho);
    let idx = eig.support_indices(eps);
    if idx.len() == rho.nrows() {
        return rho.clone();
    }
    let v = eig.columns(&idx);
    state::restrict_to(&v, rho)
}

/// Entropy fluctuation identity on the effective subspace of `rho`.
pub fn fluctuation_identity(rho: &CMat, k_b: f64, eps_ker: f64) -> FluctuationCheck {
    let r = support_state(rho, eps_ker);
    let basis = gell_mann_basis(r.nrows());
    let (f0, f, s) = affinity_coordinates(&r, k_b, &basis);
    let lhs = state::covariance_matrix(&r, &s, &s);
    let mut rhs = 0.0;
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            rhs += f[i] * f[j] * state::covariance_matrix(&r, &basis[i], &basis[j]);
        }
    }
    FluctuationCheck {
        lhs,
        rhs,
        completeness: expansion_residual(&s, f0, &f, &basis),
        floor: f64::EPSILON * linalg::frobenius(&s).powi(2),
    }
}

/// Maximum-entropy state with the same invariants as `rho` (full rank).
fn matched_equilibrium(model: &SystemModel, rho: &CMat) -> Result<GibbsSolution> {
    let e = state::expectation_matrix(rho, model.hamiltonian().matrix());
    let g: Vec<f64> = model
        .invariants()
        .iter()
        .map(|x| state::expectation_matrix(rho, x.matrix()))
        .collect();
    equilibrium::solve_gibbs(model, e, &g)
}

fn full_rank(rho: &CMat) -> Result<()> {
    let l = linalg::herm_eigenvalues(rho)[0];
    if l <= 0.0 {
        return Err(Error::NegativeEigenvalue(l));
    }
    Ok(())
}

/// `s(ρ) − s(ρ_e(ρ))` versus `f0 − f0e + Σ (f_i − f_ie) x_i(ρ)`, for a
/// full-rank `rho`. Returns `(lhs, rhs)`.
pub fn expansion_check(model: &SystemModel, rho: &CMat) -> Result<(f64, f64)> {
    full_rank(rho)?;
    let k_b = model.k_b();
    let basis = gell_mann_basis(rho.nrows());
    let eq = matched_equilibrium(model, rho)?;
    let (f0, f, s) = affinity_coordinates(rho, k_b, &basis);
    let (f0e, fe, se) = affinity_coordinates(eq.state().matrix(), k_b, &basis);
    let lhs = linalg::hs_inner(rho, &s) - linalg::hs_inner(eq.state().matrix(), &se);
    let mut rhs = f0 - f0e;
    for j in 0..basis.len() {
        rhs += (f[j] - fe[j]) * linalg::hs_inner(rho, &basis[j]);
    }
    Ok((lhs, rhs))
}

/// Central finite differences of `s − s_e(ρ_e(ρ))` along each basis
/// direction against `f_i − f_ie`. Returns `(finite differences, affinities)`.
pub fn affinity_gradient_check(model: &SystemModel, rho: &CMat, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    full_rank(rho)?;
    let k_b = model.k_b();
    let basis = gell_mann_basis(rho.nrows());
    let phi = |m: &CMat| -> Result<f64> {
        let eq = matched_equilibrium(model, m)?;
        Ok(state::entropy_matrix(m, k_b) - eq.s_max)
    };
    let eq = matched_equilibrium(model, rho)?;
    let (_, f, _) = affinity_coordinates(rho, k_b, &basis);
    let (_, fe, _) = affinity_coordinates(eq.state().matrix(), k_b, &basis);
    let aff: Vec<f64> = f.iter().zip(&fe).map(|(a, b)| a - b).collect();
    let mut fd = Vec::with_capacity(basis.len());
    for x in &basis {
        let plus = rho + x * c(h, 0.0);
        let minus = rho - x * c(h, 0.0);
        fd.push((phi(&plus)? - phi(&minus)?) / (2.0 * h));
    }
    Ok((fd, aff))
}

#[derive(Clone, Debug)]
pub struct OnsagerProbe {
    pub probes: Option<usize>,
    pub radius: f64,
    pub seed: u64,
}

impl OnsagerProbe {
    pub fn from_setup(setup: &ComplianceSetup) -> Self {
        OnsagerProbe {
            probes: setup.probes.onsager_probes,
            radius: setup.probes.onsager_radius,
            seed: setup.seed,
        }
    }
}

impl Default for OnsagerProbe {
    fn default() -> Self {
        OnsagerProbe {
            probes: None,
            radius: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeSample {
    pub f0: f64,
    pub f: Vec<f64>,
    pub affinities: Vec<f64>,
    pub rates: Vec<f64>,
    pub production_measured: f64,
    /// `Σ (f_i − f_ie)·Dx_i/Dt`.
    pub production_predicted: f64,
    /// `Σ f_i·Dx_i/Dt`.
    pub production_first_form: f64,
    /// `aᵀ L a` with the reported `L`.
    pub quadratic_form: f64,
    pub fluctuation: FluctuationCheck,
}

#[derive(Clone, Debug)]
pub struct AffinityFrame {
    pub basis: Vec<CMat>,
    pub f0_e: f64,
    pub f_e: Vec<f64>,
    pub probes: Vec<ProbeSample>,
    /// Fitted conductivity restricted to the identifiable affinity subspace.
    pub l: RMat,
    pub l_raw: RMat,
    /// `⟨ΔX_i ΔX_j⟩` at the equilibrium state.
    pub covariances: RMat,
    pub identifiable_rank: usize,
    pub singular_values: Vec<f64>,
    /// Entropy production of the first probe.
    pub entropy_production: f64,
}

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn coords(m: &CMat, basis: &[CMat]) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|x| linalg::hs_inner(m, x)))
}

/// Directional derivative of the entropy along `m` at `rho`, by a
/// Richardson-extrapolated central difference.
fn entropy_rate(rho: &CMat, m: &CMat, k_b: f64) -> (f64, f64) {
    let mn = linalg::frobenius(m);
    if mn == 0.0 {
        return (0.0, f64::MIN_POSITIVE);
    }
    let lmin = linalg::herm_eigenvalues(rho)[0];
    let h = (1e-4f64).min(0.05 * lmin) / mn;
    let cd = |h: f64| {
        let p = rho + m * c(h, 0.0);
        let q = rho - m * c(h, 0.0);
        (state::entropy_matrix(&p, k_b) - state::entropy_matrix(&q, k_b)) / (2.0 * h)
    };
    let rate = (4.0 * cd(h / 2.0) - cd(h)) / 3.0;
    let s = state::entropy_matrix(rho, k_b).abs().max(k_b);
    // Rounding in the entropy differences, amplified by the extrapolation.
    let floor = 1e3 * f64::EPSILON * s / h;
    (rate, floor)
}

/// Condition 10: entropy-production identity, fluctuation identity and a
/// symmetric non-negative conductivity fitted from probe states around `ρ_e`.
pub fn onsager_analysis(
    model: &SystemModel,
    spec: &DynamicsSpec,
    solution: &GibbsSolution,
    probe: &OnsagerProbe,
    tol: &Tolerances,
) -> Result<(AffinityFrame, ConditionResult)> {
    let k_b = model.k_b();
    let rho_e = solution.state().matrix();
    let sub = state::effective_subspace_matrix(rho_e, model, spec.eps_ker);
    let d = sub.dim();
    if d < 2 {
        let r = ConditionResult::from_metrics(
            10,
            tol.symmetry,
            vec![],
            "one-dimensional effective subspace; no affinities, condition holds vacuously",
        );
        let frame = AffinityFrame {
            basis: vec![],
            f0_e: 0.0,
            f_e: vec![],
            probes: vec![],
            l: RMat::zeros(0, 0),
            l_raw: RMat::zeros(0, 0),
            covariances: RMat::zeros(0, 0),
            identifiable_rank: 0,
            singular_values: vec![],
            entropy_production: 0.0,
        };
        return Ok((frame, r));
    }
    let basis = gell_mann_basis(d);
    let n = basis.len();
    let (f0_e, f_e, _) = affinity_coordinates(&sub.rho, k_b, &basis);

    let mut constraints = vec![linalg::identity(d), sub.hamiltonian.clone()];
    constraints.extend(sub.invariants.iter().cloned());
    // Conserved directions in affinity coordinates (traceless parts).
    let cons: Vec<DVector<f64>> = constraints[1..].iter().map(|x| coords(x, &basis)).collect();
    // Absolute scale: a constraint proportional to I has roundoff-only
    // traceless coordinates and must count as zero.
    let scale = constraints.iter().map(|x| linalg::frobenius(x).powi(2)).fold(0.0, f64::max);
    let conserved = if cons.is_empty() {
        0
    } else {
        let m = RMat::from_fn(n, cons.len(), |i, j| cons[j][i]);
        let gram = m.transpose() * &m;
        gram.symmetric_eigen().eigenvalues.iter().filter(|&&v| v > 1e-12 * scale).count()
    };
    let required = n - conserved;

    let count = probe.probes.unwrap_or(4 * n);
    let radius = probe.radius;
    let mut samples = Vec::with_capacity(count);
    // Probes come in antithetic pairs ±X; the regression uses the odd part of
    // each pair so second-order terms in the radius cancel.
    let columns = count.div_ceil(2);
    let mut a_mat = RMat::zeros(n, columns);
    let mut r_mat = RMat::zeros(n, columns);
    let mut fluct_rel: f64 = 0.0;
    let mut completeness: f64 = 0.0;
    let mut prod_rel: f64 = 0.0;
    let mut prod_floor = Vec::with_capacity(count);
    for p in 0..count {
        let mut rng = random::rng(probe.seed, 1000 + (p / 2) as u64);
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let x = random::hermitian(d, &mut rng) * c(sign, 0.0);
        let xp = linalg::project_out(&x, &constraints, 1e-12);
        let norm = linalg::frobenius(&xp);
        if norm == 0.0 {
            return Err(Error::DegenerateProbeEnsemble { rank: 0, required });
        }
        let mut rho_p = &sub.rho + xp * c(radius / norm, 0.0);
        linalg::symmetrize(&mut rho_p);
        if linalg::herm_eigenvalues(&rho_p)[0] <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "probe radius {radius:e} leaves the state domain around the equilibrium state"
            )));
        }
        let full = if sub.is_full() { rho_p.clone() } else { sub.embed(&rho_p) };
        let terms = dynamics::motion_with_eps(model, spec, &full, spec.eps_ker)?;
        let d_sub = if sub.is_full() {
            terms.dissipative_term.clone()
        } else {
            sub.restrict(&terms.dissipative_term)
        };
        let (f0, f, _) = affinity_coordinates(&rho_p, k_b, &basis);
        let aff: Vec<f64> = f.iter().zip(&f_e).map(|(a, b)| a - b).collect();
        let rates: Vec<f64> = basis.iter().map(|x| linalg::hs_inner(&d_sub, x)).collect();
        let predicted: f64 = aff.iter().zip(&rates).map(|(a, r)| a * r).sum();
        let first: f64 = f.iter().zip(&rates).map(|(a, r)| a * r).sum();
        let (measured, floor) = entropy_rate(&full, &terms.total(), k_b);
        prod_rel = prod_rel.max(rel(measured, predicted, floor));
        prod_floor.push(floor);
        let fl = fluctuation_identity(&rho_p, k_b, spec.eps_ker);
        fluct_rel = fluct_rel.max(fl.relative_error());
        completeness = completeness.max(fl.completeness);
        let w = if p % 2 == 0 && p + 1 == count { 1.0 } else { 0.5 * sign };
        for i in 0..n {
            a_mat[(i, p / 2)] += w * aff[i];
            r_mat[(i, p / 2)] += w * rates[i];
        }
        samples.push(ProbeSample {
            f0,
            f,
            affinities: aff,
            rates,
            production_measured: measured,
            production_predicted: predicted,
            production_first_form: first,
            quadratic_form: 0.0,
            fluctuation: fl,
        });
    }
    let fl_e = fluctuation_identity(&sub.rho, k_b, spec.eps_ker);
    fluct_rel = fluct_rel.max(fl_e.relative_error());
    completeness = completeness.max(fl_e.completeness);

    // Affinities fill an (n − c)-dimensional subspace to first order; the
    // remaining singular values are higher order in the radius.
    let svd = a_mat.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let s1 = sv.first().copied().unwrap_or(0.0);
    let threshold = radius.sqrt() * s1;
    let found = sv.iter().filter(|&&s| s > threshold).count();
    if found < required || s1 == 0.0 {
        return Err(Error::DegenerateProbeEnsemble { rank: found, required });
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let uk = RMat::from_fn(n, required, |i, j| u[(i, order[j])]);
    let vk = RMat::from_fn(columns, required, |i, j| vt[(order[j], i)]);
    let sinv = RMat::from_fn(required, required, |i, j| if i == j { 1.0 / sv[i] } else { 0.0 });
    let l_raw = &r_mat * &vk * &sinv * uk.transpose();
    let proj = &uk * uk.transpose();
    let l = &proj * &l_raw * &proj;

    let lnorm = l.norm();
    let symmetry = if lnorm > 0.0 { (&l - l.transpose()).norm() / lnorm } else { 0.0 };
    let sym = (&l + l.transpose()) * 0.5;
    let min_eig = sym.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);

    let mut quad_rel: f64 = 0.0;
    for (p, s) in samples.iter_mut().enumerate() {
        let a = DVector::from_column_slice(&s.affinities);
        s.quadratic_form = (a.transpose() * &l * &a)[(0, 0)];
        quad_rel = quad_rel.max(rel(s.production_measured, s.quadratic_form, prod_floor[p]));
    }

    let covariances = RMat::from_fn(n, n, |i, j| state::covariance_matrix(&sub.rho, &basis[i], &basis[j]));
    let pcp = &proj * &covariances * &proj;
    let callen = {
        let num = l.dot(&pcp);
        let den = pcp.dot(&pcp);
        if den > 0.0 && lnorm > 0.0 {
            (&l - &pcp * (num / den)).norm() / lnorm
        } else {
            f64::NAN
        }
    };

    let mut metrics = vec![
        Metric::at_most("fluctuation_identity_rel", fluct_rel, tol.fluctuation),
        Metric::at_most("expansion_completeness", completeness, tol.expansion),
        Metric::at_most("production_identity_rel", prod_rel, tol.production),
        Metric::at_most("quadratic_form_rel", quad_rel, tol.production),
        Metric::at_most("l_asymmetry_rel", symmetry, tol.symmetry),
        Metric::at_least("l_min_eigenvalue", min_eig, -tol.psd),
        Metric::info("identifiable_rank", required as f64),
        Metric::info("basis_dimension", n as f64),
        Metric::info("l_norm", lnorm),
        Metric::info("callen_residual_rel", callen),
    ];
    if spec.kind == DynamicsKind::SeaSingle {
        let tau = spec.tau[0];
        let l_an = RMat::from_fn(n, n, |i, j| {
            let pj = linalg::project_out(&basis[j], &constraints, 1e-12);
            linalg::hs_inner(&basis[i], &pj) / (k_b * tau)
        });
        let pl = &proj * l_an * &proj;
        let dev = (&l - &pl).norm() / pl.norm().max(f64::MIN_POSITIVE);
        metrics.push(Metric::info("analytic_l_deviation_rel", dev));
    }
    let entropy_production = samples.first().map(|s| s.production_measured).unwrap_or(0.0);
    let narrative = format!(
        "{count} probes at radius {radius:.0e}; L fitted on {required} of {n} affinity directions"
    );
    let result = ConditionResult::from_metrics(10, tol.symmetry, metrics, narrative);
    let frame = AffinityFrame {
        basis,
        f0_e,
        f_e,
        probes: samples,
        l,
        l_raw,
        covariances,
        identifiable_rank: required,
        singular_values: sv,
        entropy_production,
    };
    Ok((frame, result))
}
