//! Conditions 1 through 9.

use rayon::prelude::*;

use super::{ComplianceSetup, ConditionResult, Metric, Tolerances};
use crate::dynamics::{self, DynamicsSpec};
use crate::equilibrium;
use crate::error::{Error, Result};
use crate::integrator::{self, uniform_times, IntegratorConfig, Trajectory};
use crate::linalg::{self, c, CMat, HermEig};
use crate::random;
use crate::state::{self, Observable, QuantumState, Subsystem, SystemModel};

/// `(e, g)` of a state.
pub(crate) fn targets_of(model: &SystemModel, rho: &QuantumState) -> Result<(f64, Vec<f64>)> {
    let e = state::expectation(rho, model.hamiltonian())?;
    let g = model
        .invariants()
        .iter()
        .map(|x| state::expectation(rho, x))
        .collect::<Result<Vec<_>>>()?;
    Ok((e, g))
}

fn scale_of(x: &Observable) -> f64 {
    let n = x.op_norm();
    if n > 0.0 {
        n
    } else {
        1.0
    }
}

fn forward_config(base: &IntegratorConfig, horizon: f64, samples: usize) -> IntegratorConfig {
    base.clone().with_times(uniform_times(0.0, horizon, samples.max(1)))
}

/// `exp(−iHt/ħ)` from a precomputed eigendecomposition.
fn evolution(h: &HermEig, hbar: f64, t: f64) -> CMat {
    let n = h.dim();
    let phases = CMat::from_fn(n, n, |i, j| {
        if i == j {
            c(0.0, -h.values[i] * t / hbar).exp()
        } else {
            c(0.0, 0.0)
        }
    });
    &h.vectors * phases * h.vectors.adjoint()
}

/// Condition 1: every sample is a valid density matrix.
pub fn check_domain(traj: &Trajectory, tol: &Tolerances) -> ConditionResult {
    let mut herm: f64 = 0.0;
    let mut tr: f64 = 0.0;
    let mut lmin = f64::INFINITY;
    for s in &traj.states {
        let d = state::deviations(s.matrix());
        herm = herm.max(d.hermiticity);
        tr = tr.max(d.trace.abs());
        lmin = lmin.min(d.min_eigenvalue);
    }
    let metrics = vec![
        Metric::at_most("max_hermiticity_deviation", herm, tol.hermiticity),
        Metric::at_most("max_trace_deviation", tr, tol.trace),
        Metric::at_least("min_eigenvalue", lmin, -tol.positivity),
        Metric::info("max_symmetrization_repair", traj.stats.max_symmetrization),
        Metric::info("samples", traj.len() as f64),
    ];
    let narrative = format!(
        "{} samples on [{:.3}, {:.3}], worst eigenvalue {:.3e}",
        traj.len(),
        traj.times.first().copied().unwrap_or(0.0),
        traj.times.last().copied().unwrap_or(0.0),
        lmin
    );
    ConditionResult::from_metrics(1, tol.positivity, metrics, narrative)
}

/// Conditions 2 and 7: conservation of trace, energy, invariants and, for
/// declared noninteracting parts, of each subsystem energy.
pub fn check_invariants(traj: &Trajectory, model: &SystemModel, tol: &Tolerances) -> (ConditionResult, ConditionResult) {
    let i0 = traj.index_of(0.0).unwrap_or(0);
    let r0 = &traj.records[i0];
    let drift = |f: &dyn Fn(usize) -> f64| traj.records.iter().enumerate().map(|(k, _)| (f(k) - f(i0)).abs()).fold(0.0, f64::max);
    let mut m2 = vec![
        Metric::at_most("trace_drift", drift(&|k| traj.records[k].trace), tol.invariant),
        Metric::at_most(
            "energy_drift_rel",
            drift(&|k| traj.records[k].e) / scale_of(model.hamiltonian()),
            tol.invariant,
        ),
    ];
    for (i, g) in model.invariants().iter().enumerate() {
        m2.push(Metric::at_most(
            format!("g{}_drift_rel", i + 1),
            drift(&|k| traj.records[k].g[i]) / scale_of(g),
            tol.invariant,
        ));
    }
    let r2 = ConditionResult::from_metrics(
        2,
        tol.invariant,
        m2,
        format!("e(0) = {:.6}, {} invariant(s) besides H", r0.e, model.invariants().len()),
    );

    let r7 = match (model.hamiltonian_parts(), r0.subsystem_energies) {
        (Some(parts), Some(_)) => {
            let ea = drift(&|k| traj.records[k].subsystem_energies.map(|x| x[0]).unwrap_or(f64::NAN));
            let eb = drift(&|k| traj.records[k].subsystem_energies.map(|x| x[1]).unwrap_or(f64::NAN));
            let corr = traj.records.iter().filter_map(|r| r.mutual_information).fold(0.0, f64::max);
            ConditionResult::from_metrics(
                7,
                tol.subsystem_energy,
                vec![
                    Metric::at_most("subsystem_a_energy_drift_rel", ea / scale_of(&parts[0]), tol.subsystem_energy),
                    Metric::at_most("subsystem_b_energy_drift_rel", eb / scale_of(&parts[1]), tol.subsystem_energy),
                    Metric::info("max_mutual_information", corr),
                ],
                "noninteracting parts declared; local energies tracked through correlated states",
            )
        }
        _ => ConditionResult::from_metrics(
            7,
            tol.subsystem_energy,
            vec![],
            "no noninteracting subsystem decomposition declared; condition holds vacuously",
        ),
    };
    (r2, r7)
}

/// Condition 3: a pure state follows the Schrödinger orbit.
pub fn check_pure_unitarity(
    model: &SystemModel,
    spec: &DynamicsSpec,
    psi0: &QuantumState,
    horizon: f64,
    config: &IntegratorConfig,
    tol: &Tolerances,
) -> Result<ConditionResult> {
    let d0 = dynamics::dissipative_matrix(model, spec, psi0.matrix(), spec.eps_ker)?;
    let dnorm = linalg::frobenius(&d0);
    // A strongly non-unitary field can leave the state domain; what was
    // reached still measures the departure.
    let traj = match integrator::propagate(model, spec, psi0, config) {
        Ok(t) => t,
        Err(Error::StepUnderflow { partial, .. }) => *partial,
        Err(e) => return Err(e),
    };
    let h = linalg::herm_eig(model.hamiltonian().matrix());
    let hbar = model.constants().hbar;
    let mut worst: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let u = evolution(&h, hbar, *t);
        let exact = &u * psi0.matrix() * u.adjoint();
        worst = worst.max(linalg::trace_distance(s.matrix(), &exact));
    }
    let reached = traj.times.last().copied().unwrap_or(0.0);
    let purity_end = traj.last().map(|s| s.purity()).unwrap_or(f64::NAN);
    let mut metrics = vec![
        Metric::at_most("dissipator_norm_at_pure", dnorm, tol.pure_unitarity),
        Metric::at_most("max_trace_distance_to_unitary_orbit", worst, tol.pure_unitarity),
        Metric::info("horizon", horizon),
        Metric::info("final_purity", purity_end),
    ];
    if reached < horizon {
        metrics.push(Metric::at_least("horizon_reached", reached, horizon));
    }
    Ok(ConditionResult::from_metrics(
        3,
        tol.pure_unitarity,
        metrics,
        format!("pure start propagated over t in [0, {horizon:.4}] against exp(-iHt) conjugation"),
    ))
}

pub(crate) fn pure_check_for_setup(
    model: &SystemModel,
    spec: &DynamicsSpec,
    setup: &ComplianceSetup,
    tol: &Tolerances,
) -> Result<ConditionResult> {
    let psi0 = if setup.initial.rank(tol.kernel_eps) == 1 {
        setup.initial.clone()
    } else {
        random::pure_state(model.dim(), &mut random::rng(setup.seed, 3))
    };
    let h = linalg::herm_eigenvalues(model.hamiltonian().matrix());
    let gap = h[h.len() - 1] - h[0];
    let horizon = setup.probes.pure_horizon.unwrap_or(if gap > 1e-12 {
        2.0 * std::f64::consts::PI * model.constants().hbar / gap
    } else {
        2.0 * std::f64::consts::PI
    });
    let cfg = forward_config(&setup.integration, horizon, setup.probes.pure_samples);
    check_pure_unitarity(model, spec, &psi0, horizon, &cfg, tol)
}

/// Condition 4: initially zero eigenvalues stay zero. The initial kernel
/// is carried along by the Hamiltonian flow, so for `[H, ρ0] = 0` it is
/// the fixed initial kernel.
pub fn check_kernel(traj: &Trajectory, model: &SystemModel, tol: &Tolerances) -> ConditionResult {
    let i0 = traj.index_of(0.0).unwrap_or(0);
    let rho0 = traj.states[i0].matrix();
    let eig = linalg::herm_eig(rho0);
    let thr = tol.kernel_eps * eig.max().max(0.0);
    let ker: Vec<usize> = (0..eig.dim()).filter(|&k| eig.values[k] <= thr).collect();
    let rank0 = eig.dim() - ker.len();
    if ker.is_empty() {
        return ConditionResult::from_metrics(
            4,
            tol.kernel_leakage,
            vec![Metric::info("initial_rank", rank0 as f64)],
            "initial state has full rank; condition holds vacuously",
        );
    }
    let kv = eig.columns(&ker);
    let k0 = &kv * kv.adjoint();
    let h = linalg::herm_eig(model.hamiltonian().matrix());
    let hbar = model.constants().hbar;
    let mut leak: f64 = 0.0;
    let mut rank_changes = 0usize;
    let mut t_first = f64::NAN;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let u = evolution(&h, hbar, *t);
        let kt = &u * &k0 * u.adjoint();
        let l = linalg::frobenius(&(&kt * s.matrix() * &kt));
        leak = leak.max(l);
        if s.rank(tol.kernel_eps) != rank0 {
            rank_changes += 1;
            if t_first.is_nan() {
                t_first = *t;
            }
        }
    }
    let mut metrics = vec![
        Metric::at_most("max_kernel_leakage", leak, tol.kernel_leakage),
        Metric::at_most("rank_changes", rank_changes as f64, 0.0),
        Metric::info("initial_rank", rank0 as f64),
    ];
    if !t_first.is_nan() {
        metrics.push(Metric::info("first_rank_change_time", t_first));
    }
    ConditionResult::from_metrics(
        4,
        tol.kernel_leakage,
        metrics,
        format!("{} kernel direction(s) tracked over {} samples", ker.len(), traj.len()),
    )
}

/// Entropy sensitivity `k_B (1 + max |ln λ|)` over the resolved spectrum.
fn entropy_sensitivity(rho: &CMat, k_b: f64, eps: f64) -> f64 {
    let v = linalg::herm_eigenvalues(rho);
    let lmax = v.last().copied().unwrap_or(1.0).max(0.0);
    let worst = v
        .iter()
        .filter(|&&l| l > eps * lmax)
        .map(|l| l.ln().abs())
        .fold(0.0, f64::max);
    k_b * (1.0 + worst)
}

/// Slack for the entropy change between samples `k` and `k+1` of an ascending
/// trajectory, from the local error estimates of the steps in between.
fn interval_slack(traj: &Trajectory, k: usize, k_b: f64, tol: &Tolerances) -> f64 {
    let err = if traj.times[k + 1] > 0.0 {
        traj.records[k + 1].step_error_sum
    } else {
        traj.records[k].step_error_sum
    };
    let sens = entropy_sensitivity(traj.states[k].matrix(), k_b, tol.kernel_eps)
        .max(entropy_sensitivity(traj.states[k + 1].matrix(), k_b, tol.kernel_eps));
    tol.entropy_slack_factor * err * sens + tol.entropy_floor * k_b
}

/// Condition 5: entropy nondecreasing in time (forward and backward legs
/// alike, since times are stored ascending).
pub fn check_entropy(traj: &Trajectory, model: &SystemModel, tol: &Tolerances) -> ConditionResult {
    let k_b = model.k_b();
    let mut margin = f64::INFINITY;
    let mut min_inc = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    let mut max_slack: f64 = 0.0;
    for k in 0..traj.len().saturating_sub(1) {
        let ds = traj.records[k + 1].entropy - traj.records[k].entropy;
        let slack = interval_slack(traj, k, k_b, tol);
        margin = margin.min(ds + slack);
        min_inc = min_inc.min(ds);
        max_abs = max_abs.max(ds.abs());
        max_slack = max_slack.max(slack);
    }
    if traj.len() < 2 {
        margin = 0.0;
        min_inc = 0.0;
    }
    let s0 = traj.records.first().map(|r| r.entropy).unwrap_or(0.0);
    let s1 = traj.records.last().map(|r| r.entropy).unwrap_or(0.0);
    ConditionResult::from_metrics(
        5,
        tol.entropy_slack_factor,
        vec![
            Metric::at_least("min_increment_plus_slack", margin, 0.0),
            Metric::info("min_increment", min_inc),
            Metric::info("max_abs_increment", max_abs),
            Metric::info("max_slack", max_slack),
            Metric::info("entropy_gain", s1 - s0),
        ],
        format!("entropy {s0:.6} -> {s1:.6} across the sampled range"),
    )
}

#[derive(Clone, Debug)]
pub struct EquilibriumProbe {
    pub perturbations: usize,
    pub scale: f64,
    pub horizon: f64,
    pub nd_epsilon: f64,
    pub nd_horizon: f64,
    pub samples: usize,
    pub seed: u64,
    pub integration: IntegratorConfig,
}

impl EquilibriumProbe {
    pub fn from_setup(setup: &ComplianceSetup) -> Self {
        EquilibriumProbe {
            perturbations: setup.probes.perturbations,
            scale: setup.probes.perturbation_scale,
            horizon: setup.probes.equilibrium_horizon,
            nd_epsilon: setup.probes.nd_epsilon,
            nd_horizon: setup.probes.nd_horizon,
            samples: 10,
            seed: setup.seed,
            integration: setup.integration.clone(),
        }
    }
}

impl Default for EquilibriumProbe {
    fn default() -> Self {
        let p = super::ProbeConfig::default();
        EquilibriumProbe {
            perturbations: p.perturbations,
            scale: p.perturbation_scale,
            horizon: p.equilibrium_horizon,
            nd_epsilon: p.nd_epsilon,
            nd_horizon: p.nd_horizon,
            samples: 10,
            seed: 0,
            integration: IntegratorConfig::default(),
        }
    }
}

fn conserved_basis(model: &SystemModel) -> Vec<CMat> {
    let mut b = vec![linalg::identity(model.dim()), model.hamiltonian().matrix().clone()];
    b.extend(model.invariants().iter().map(|g| g.matrix().clone()));
    b
}

/// A rank-deficient non-dissipative equilibrium at the targets together with
/// a kernel-occupying perturbation of it.
#[derive(Clone, Debug)]
pub struct NdCandidate {
    pub rho_nd: QuantumState,
    pub projector: Observable,
    pub perturbed: QuantumState,
    pub epsilon: f64,
}

/// Drop joint eigenvectors of the conserved set, highest energy first, until
/// the restricted maximum-entropy problem is feasible; then occupy the first
/// dropped direction with weight `epsilon`, compensating on the support so
/// trace, energy and invariants are unchanged.
pub fn nd_candidate(model: &SystemModel, e: f64, g: &[f64], epsilon: f64) -> Option<NdCandidate> {
    let n = model.dim();
    // Generic combination of commuting operators shares their eigenbasis.
    let mut mix = model.hamiltonian().matrix().clone();
    let mut w = 0.618_033_988_749_894_8;
    for inv in model.invariants() {
        mix += inv.matrix() * c(w * scale_of(model.hamiltonian()) / scale_of(inv), 0.0);
        w *= 0.618_033_988_749_894_8;
    }
    let joint = linalg::herm_eig(&mix);
    let h = model.hamiltonian().matrix();
    let mut order: Vec<usize> = (0..n).collect();
    let energy = |k: usize| linalg::hs_inner(&linalg::outer(&joint.vectors.column(k).into_owned()), h);
    order.sort_by(|&a, &b| energy(b).total_cmp(&energy(a)).then(a.cmp(&b)));
    let basis = conserved_basis(model);
    for dropped in 1..n {
        let kept: Vec<usize> = order[dropped..].to_vec();
        let kv = joint.columns(&kept);
        let b = Observable::from_matrix_unchecked(&kv * kv.adjoint());
        let Ok(sol) = equilibrium::nd_solution(model, &b, e, g) else {
            continue;
        };
        let kvec = joint.vectors.column(order[0]).into_owned();
        let kk = linalg::outer(&kvec);
        // Correction C = Σ a_j B X_j B with Tr(X_i C) = −ε Tr(X_i |k⟩⟨k|).
        let bm = b.matrix();
        let ys: Vec<CMat> = basis.iter().map(|x| bm * x * bm).collect();
        let m = basis.len();
        let gram = crate::linalg::RMat::from_fn(m, m, |i, j| linalg::hs_inner(&basis[i], &ys[j]));
        let rhs = nalgebra::DVector::from_fn(m, |i, _| -epsilon * linalg::hs_inner(&basis[i], &kk));
        let a = linalg::sym_pinv_solve(&gram, &rhs, 1e-12);
        let mut corr = CMat::zeros(n, n);
        for (j, y) in ys.iter().enumerate() {
            corr += y * c(a[j], 0.0);
        }
        let resid = (0..m)
            .map(|i| (linalg::hs_inner(&basis[i], &corr) - rhs[i]).abs())
            .fold(0.0, f64::max);
        if resid > 1e-12 * (1.0 + epsilon) {
            continue;
        }
        let mut p = sol.state().matrix() + kk * c(epsilon, 0.0) + corr;
        linalg::symmetrize(&mut p);
        if linalg::herm_eigenvalues(&p)[0] < 0.0 {
            continue;
        }
        return Some(NdCandidate {
            rho_nd: sol.state().clone(),
            projector: b,
            perturbed: QuantumState::from_matrix_unchecked(p),
            epsilon,
        });
    }
    None
}

/// Condition 6: unique globally stable equilibrium.
pub fn check_equilibrium(
    model: &SystemModel,
    spec: &DynamicsSpec,
    e: f64,
    g: &[f64],
    probe: &EquilibriumProbe,
    tol: &Tolerances,
) -> Result<ConditionResult> {
    let sol = equilibrium::solve_gibbs(model, e, g)?;
    let rho_e = sol.state().clone();
    let s_max = sol.s_max;
    let k_b = model.k_b();

    // (a) stationarity.
    let m_e = dynamics::motion_with_eps(model, spec, rho_e.matrix(), spec.eps_ker)?;
    let stationarity = linalg::frobenius(&m_e.total());

    // (b) local stability under invariant-preserving perturbations.
    let basis = conserved_basis(model);
    let lmin_e = rho_e.eigenvalues()[0];
    let cfg = forward_config(&probe.integration, probe.horizon, probe.samples);
    let runs: Vec<Result<(f64, f64)>> = (0..probe.perturbations)
        .into_par_iter()
        .map(|i| {
            let mut rng = random::rng(probe.seed, 600 + i as u64);
            let x = random::hermitian(model.dim(), &mut rng);
            let xp = linalg::project_out(&x, &basis, 1e-12);
            let norm = linalg::herm_op_norm(&xp);
            if norm == 0.0 {
                return Ok((0.0, 0.0));
            }
            let mut p = rho_e.matrix() + xp * c(probe.scale * lmin_e / norm, 0.0);
            linalg::symmetrize(&mut p);
            let start = QuantumState::from_matrix_unchecked(p);
            let traj = integrator::propagate(model, spec, &start, &cfg)?;
            let end = traj.last().expect("non-empty trajectory");
            let d0 = start.trace_distance(&rho_e);
            let d1 = end.trace_distance(&rho_e);
            let gap0 = s_max - state::entropy(&start, k_b);
            let gap1 = s_max - state::entropy(end, k_b);
            Ok((d1 / d0, gap1 / gap0))
        })
        .collect();
    let mut dist_ratio: f64 = 0.0;
    let mut gap_ratio: f64 = 0.0;
    for r in runs {
        let (a, b) = r?;
        dist_ratio = dist_ratio.max(a);
        gap_ratio = gap_ratio.max(b);
    }

    let mut metrics = vec![
        Metric::at_most("stationarity_norm", stationarity, tol.stationarity),
        Metric::at_most("max_distance_ratio", dist_ratio, 1.0 - tol.contraction),
        Metric::at_most("max_entropy_gap_ratio", gap_ratio, 1.0 - tol.contraction),
    ];

    // (c) the rank-deficient equilibrium is not globally stable.
    let mut narrative = format!(
        "Gibbs state at beta = {:.6}; {} perturbations over {:.2}",
        sol.beta, probe.perturbations, probe.horizon
    );
    match nd_candidate(model, e, g, probe.nd_epsilon) {
        Some(nd) => {
            let s_nd = state::entropy(&nd.rho_nd, k_b);
            let m_nd = dynamics::motion_with_eps(model, spec, nd.rho_nd.matrix(), spec.eps_ker)?;
            let cfg = forward_config(&probe.integration, probe.nd_horizon, probe.samples);
            let traj = integrator::propagate(model, spec, &nd.perturbed, &cfg)?;
            let s_end = traj.records.last().map(|r| r.entropy).unwrap_or(s_nd);
            let frac = (s_end - s_nd) / (s_max - s_nd);
            metrics.push(Metric::at_least("nd_entropy_fraction", frac, tol.nd_fraction));
            metrics.push(Metric::info("nd_stationarity_norm", linalg::frobenius(&m_nd.total())));
            metrics.push(Metric::info("nd_rank", nd.rho_nd.rank(1e-9) as f64));
            metrics.push(Metric::info("nd_entropy", s_nd));
            metrics.push(Metric::info("s_max", s_max));
            narrative.push_str(&format!("; rank-{} equilibrium perturbed by {:.0e}", nd.rho_nd.rank(1e-9), nd.epsilon));
        }
        None => {
            metrics.push(Metric::info("s_max", s_max));
            narrative.push_str("; no feasible rank-deficient equilibrium at these targets, sub-check (c) vacuous");
        }
    }
    Ok(ConditionResult::from_metrics(6, tol.stationarity, metrics, narrative))
}

#[derive(Clone, Debug)]
pub struct SeparabilityProbe {
    pub horizon: f64,
    pub samples: usize,
    pub weight: f64,
    pub signaling: f64,
    pub integration: IntegratorConfig,
}

impl SeparabilityProbe {
    pub fn from_setup(setup: &ComplianceSetup) -> Self {
        SeparabilityProbe {
            horizon: setup.probes.separability_horizon,
            samples: setup.probes.separability_samples,
            weight: setup.probes.correlation_weight,
            signaling: setup.probes.signaling_strength,
            integration: setup.integration.clone(),
        }
    }
}

impl Default for SeparabilityProbe {
    fn default() -> Self {
        let p = super::ProbeConfig::default();
        SeparabilityProbe {
            horizon: p.separability_horizon,
            samples: p.separability_samples,
            weight: p.correlation_weight,
            signaling: p.signaling_strength,
            integration: IntegratorConfig::default(),
        }
    }
}

fn full_rank_marginal(m: &CMat) -> CMat {
    let lmin = linalg::herm_eigenvalues(m)[0];
    if lmin > 1e-6 {
        m.clone()
    } else {
        let n = m.nrows();
        m * c(0.9, 0.0) + linalg::identity(n) * c(0.1 / n as f64, 0.0)
    }
}

/// Conditions 8 and 9 on noninteracting bipartite systems.
pub fn check_separability(
    model: &SystemModel,
    spec: &DynamicsSpec,
    initial: &QuantumState,
    probe: &SeparabilityProbe,
    tol: &Tolerances,
) -> Result<(ConditionResult, ConditionResult)> {
    let (Ok(dims), Some(parts)) = (model.bipartite_dims(), model.hamiltonian_parts()) else {
        let why = "no noninteracting bipartite decomposition declared; condition holds vacuously";
        return Ok((
            ConditionResult::from_metrics(8, tol.product, vec![], why),
            ConditionResult::from_metrics(9, tol.mutual_information, vec![], why),
        ));
    };
    let k_b = model.k_b();
    let cfg = forward_config(&probe.integration, probe.horizon, probe.samples);
    let rho = initial.matrix();
    let ra = full_rank_marginal(&state::partial_trace_matrix(rho, dims, Subsystem::A));
    let rb = full_rank_marginal(&state::partial_trace_matrix(rho, dims, Subsystem::B));
    let product = QuantumState::from_matrix_unchecked(linalg::kron(&ra, &rb));

    // (a), (b): product start.
    let traj = integrator::propagate(model, spec, &product, &cfg)?;
    let mut defect: f64 = 0.0;
    let mut local_margin = f64::INFINITY;
    let mut local_entropies: Vec<(f64, f64)> = Vec::with_capacity(traj.len());
    for s in &traj.states {
        let a = state::partial_trace_matrix(s.matrix(), dims, Subsystem::A);
        let b = state::partial_trace_matrix(s.matrix(), dims, Subsystem::B);
        defect = defect.max(linalg::trace_norm(&(s.matrix() - linalg::kron(&a, &b))));
        local_entropies.push((state::entropy_matrix(&a, k_b), state::entropy_matrix(&b, k_b)));
    }
    for k in 0..traj.len().saturating_sub(1) {
        let slack = interval_slack(&traj, k, k_b, tol);
        let da = local_entropies[k + 1].0 - local_entropies[k].0;
        let db = local_entropies[k + 1].1 - local_entropies[k].1;
        local_margin = local_margin.min(da + slack).min(db + slack);
    }
    if !local_margin.is_finite() {
        local_margin = 0.0;
    }
    let r8 = ConditionResult::from_metrics(
        8,
        tol.product,
        vec![
            Metric::at_most("max_product_defect_trace_norm", defect, tol.product),
            Metric::at_least("min_local_entropy_increment_plus_slack", local_margin, 0.0),
        ],
        format!("product start propagated over [0, {:.2}]", probe.horizon),
    );

    // (c): correlated start.
    let mi0 = state::mutual_information_matrix(rho, dims, k_b);
    let correlated = if mi0 > 1e-6 {
        initial.clone()
    } else {
        let m = dims.0.min(dims.1);
        let mut phi = nalgebra::DVector::from_element(dims.0 * dims.1, c(0.0, 0.0));
        for k in 0..m {
            phi[k * dims.1 + k] = c(1.0 / (m as f64).sqrt(), 0.0);
        }
        // Werner-like: the background keeps the local coherences of the
        // marginals so the start is not trivially stationary
        let w = probe.weight;
        let ia = linalg::identity(dims.0) * c(1.0 / dims.0 as f64, 0.0);
        let ib = linalg::identity(dims.1) * c(1.0 / dims.1 as f64, 0.0);
        let background = (linalg::kron(&ra, &ib) + linalg::kron(&ia, &rb)) * c(0.5, 0.0);
        let mm = linalg::outer(&phi) * c(w, 0.0) + background * c(1.0 - w, 0.0);
        QuantumState::from_matrix_unchecked(mm)
    };
    let traj_c = integrator::propagate(model, spec, &correlated, &cfg)?;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut raw_rise = f64::NEG_INFINITY;
    for k in 0..traj_c.len().saturating_sub(1) {
        let (Some(i0), Some(i1)) = (traj_c.records[k].mutual_information, traj_c.records[k + 1].mutual_information) else {
            continue;
        };
        let slack = interval_slack(&traj_c, k, k_b, tol);
        worst_rise = worst_rise.max(i1 - i0 - slack);
        raw_rise = raw_rise.max(i1 - i0);
    }
    let mi_start = traj_c.records.first().and_then(|r| r.mutual_information).unwrap_or(0.0);
    let mi_end = traj_c.records.last().and_then(|r| r.mutual_information).unwrap_or(0.0);

    // (d): no-signaling probe.
    let hb = linalg::herm_eig(parts[1].matrix());
    let v0 = hb.vectors.column(0).into_owned();
    let v1 = hb.vectors.column(1.min(hb.dim() - 1)).into_owned();
    let vb = (&v0 * v1.adjoint() + &v1 * v0.adjoint()) * c(probe.signaling, 0.0);
    let hb2 = Observable::new(parts[1].matrix() + vb)?;
    let base = SystemModel::noninteracting(parts[0].clone(), hb2)?.with_constants(model.constants())?;
    let modified = base.clone().with_invariants(model.invariants().to_vec()).unwrap_or(base);
    let mut signaling: f64 = 0.0;
    let mut signaling_note = String::new();
    match integrator::propagate(&modified, spec, &correlated, &cfg) {
        Ok(traj_m) => {
            for (s1, s2) in traj_c.states.iter().zip(&traj_m.states) {
                let a1 = state::partial_trace_matrix(s1.matrix(), dims, Subsystem::A);
                let a2 = state::partial_trace_matrix(s2.matrix(), dims, Subsystem::A);
                signaling = signaling.max(linalg::trace_distance(&a1, &a2));
            }
        }
        Err(e) => signaling_note = format!("; no-signaling probe failed: {e}"),
    }
    let r9 = ConditionResult::from_metrics(
        9,
        tol.mutual_information,
        vec![
            Metric::at_most("max_mutual_information_rise_minus_slack", worst_rise.max(-1.0), tol.mutual_information),
            Metric::info("max_mutual_information_rise", raw_rise),
            Metric::info("mutual_information_start", mi_start),
            Metric::info("mutual_information_end", mi_end),
            Metric::info("no_signaling_max_local_deviation", signaling),
        ],
        format!("correlated start (I = {mi_start:.4}); no-signaling reported as info{signaling_note}"),
    );
    Ok((r8, r9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compliance::Status;
    use crate::dynamics::DynamicsKind;

    fn qutrit() -> SystemModel {
        SystemModel::simple(Observable::diagonal(&[0.0, 1.0, 2.0])).unwrap()
    }

    #[test]
    fn domain_flags_planted_trace_defect() {
        let model = qutrit();
        let spec = DynamicsSpec::new(DynamicsKind::Unitary);
        let good = QuantumState::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let bad = QuantumState::from_matrix_unchecked(linalg::real_diag(&[0.51, 0.3, 0.2]));
        let traj = Trajectory::from_states(&model, &spec, vec![(0.0, good.clone()), (1.0, bad)]).unwrap();
        let r = check_domain(&traj, &Tolerances::default());
        assert_eq!(r.status, Status::Fail);
        let traj = Trajectory::from_states(&model, &spec, vec![(0.0, good.clone()), (1.0, good)]).unwrap();
        assert_eq!(check_domain(&traj, &Tolerances::default()).status, Status::Pass);
    }

    #[test]
    fn invariants_flag_planted_drift() {
        let model = qutrit();
        let spec = DynamicsSpec::new(DynamicsKind::Unitary);
        let a = QuantumState::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let b = QuantumState::diagonal(&[0.5, 0.2, 0.3]).unwrap();
        let traj = Trajectory::from_states(&model, &spec, vec![(0.0, a.clone()), (1.0, b)]).unwrap();
        let (r2, r7) = check_invariants(&traj, &model, &Tolerances::default());
        assert_eq!(r2.status, Status::Fail);
        assert_eq!(r7.status, Status::Pass);
        let traj = Trajectory::from_states(&model, &spec, vec![(0.0, a.clone()), (1.0, a)]).unwrap();
        assert_eq!(check_invariants(&traj, &model, &Tolerances::default()).0.status, Status::Pass);
    }

    #[test]
    fn entropy_flags_planted_decrease() {
        let model = qutrit();
        let spec = DynamicsSpec::new(DynamicsKind::Unitary);
        let a = QuantumState::diagonal(&[0.4, 0.3, 0.3]).unwrap();
        let b = QuantumState::diagonal(&[0.6, 0.3, 0.1]).unwrap();
        let traj = Trajectory::from_states(&model, &spec, vec![(0.0, a.clone()), (1.0, b.clone())]).unwrap();
        assert_eq!(check_entropy(&traj, &model, &Tolerances::default()).status, Status::Fail);
        let traj = Trajectory::from_states(&model, &spec, vec![(0.0, b), (1.0, a)]).unwrap();
        assert_eq!(check_entropy(&traj, &model, &Tolerances::default()).status, Status::Pass);
    }

    #[test]
    fn nd_candidate_for_qutrit() {
        let model = qutrit();
        let nd = nd_candidate(&model, 0.9, &[], 1e-3).unwrap();
        assert_eq!(nd.rho_nd.rank(1e-12), 2);
        let p = nd.perturbed.matrix();
        assert!((linalg::trace(p).re - 1.0).abs() < 1e-14);
        assert!((linalg::hs_inner(p, model.hamiltonian().matrix()) - 0.9).abs() < 1e-13);
        assert!((p[(2, 2)].re - 1e-3).abs() < 1e-15);
        assert!(nd.perturbed.eigenvalues()[0] > 0.0);
    }

    #[test]
    fn nd_candidate_absent_for_qubit_mixed() {
        // Any qubit rank-1 projector fixes e at an eigenvalue.
        let model = SystemModel::simple(Observable::diagonal(&[0.0, 1.0])).unwrap();
        assert!(nd_candidate(&model, 0.3, &[], 1e-3).is_none());
    }
}
