//! Ten-condition compatibility suite.
//!
//! Each condition is scored on its own from named metrics with explicit
//! bounds; a result passes iff every binding metric is within its bound.

mod checks;
mod onsager;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsSpec;
use crate::error::{Error, Result};
use crate::integrator::{self, IntegratorConfig, Trajectory};
use crate::state::{QuantumState, SystemModel};

pub use checks::{
    check_domain, check_entropy, check_equilibrium, check_invariants, check_kernel, check_pure_unitarity,
    check_separability, nd_candidate, EquilibriumProbe, SeparabilityProbe,
};
pub use onsager::{
    affinity_coordinates, affinity_gradient_check, expansion_check, fluctuation_identity, gell_mann_basis,
    onsager_analysis, AffinityFrame, FluctuationCheck, OnsagerProbe,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: Option<f64>,
}

impl Metric {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            bound: Bound::AtMost,
            limit: Some(limit),
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            bound: Bound::AtLeast,
            limit: Some(limit),
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            bound: Bound::Info,
            limit: None,
        }
    }

    pub fn is_binding(&self) -> bool {
        self.bound != Bound::Info
    }

    /// NaN never satisfies a binding bound.
    pub fn holds(&self) -> bool {
        match (self.bound, self.limit) {
            (Bound::AtMost, Some(l)) => self.value <= l,
            (Bound::AtLeast, Some(l)) => self.value >= l,
            _ => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition_id: u8,
    pub status: Status,
    pub metrics: Vec<Metric>,
    pub tolerance: f64,
    pub narrative: String,
}

impl ConditionResult {
    pub fn from_metrics(condition_id: u8, tolerance: f64, metrics: Vec<Metric>, narrative: impl Into<String>) -> Self {
        let status = if metrics.iter().all(Metric::holds) { Status::Pass } else { Status::Fail };
        ConditionResult {
            condition_id,
            status,
            metrics,
            tolerance,
            narrative: narrative.into(),
        }
    }

    /// A condition that could not be evaluated.
    pub fn error(condition_id: u8, tolerance: f64, err: &Error) -> Self {
        ConditionResult {
            condition_id,
            status: Status::Fail,
            metrics: vec![Metric::at_most("evaluation_error", 1.0, 0.0)],
            tolerance,
            narrative: format!("evaluation failed: {err}"),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn failing_metrics(&self) -> Vec<&Metric> {
        self.metrics.iter().filter(|m| !m.holds()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub positivity: f64,
    pub invariant: f64,
    pub pure_unitarity: f64,
    pub kernel_leakage: f64,
    /// Relative eigenvalue threshold for rank and kernel detection.
    pub kernel_eps: f64,
    pub entropy_slack_factor: f64,
    pub entropy_floor: f64,
    pub stationarity: f64,
    pub contraction: f64,
    pub nd_fraction: f64,
    pub subsystem_energy: f64,
    pub product: f64,
    pub mutual_information: f64,
    pub fluctuation: f64,
    pub expansion: f64,
    pub production: f64,
    pub symmetry: f64,
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermiticity: 1e-12,
            trace: 1e-8,
            positivity: 1e-10,
            invariant: 1e-8,
            pure_unitarity: 1e-8,
            kernel_leakage: 1e-9,
            kernel_eps: 1e-9,
            entropy_slack_factor: 10.0,
            entropy_floor: 1e-13,
            stationarity: 1e-10,
            contraction: 1e-6,
            nd_fraction: 0.5,
            subsystem_energy: 1e-8,
            product: 1e-7,
            mutual_information: 1e-8,
            fluctuation: 1e-9,
            expansion: 1e-10,
            production: 1e-2,
            symmetry: 1e-2,
            psd: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceProfile {
    #[default]
    Default,
    Strict,
    Loose,
}

pub const PROFILE_ENV: &str = "QTHERMO_TOLERANCE_PROFILE";

impl ToleranceProfile {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "default" => Ok(ToleranceProfile::Default),
            "strict" => Ok(ToleranceProfile::Strict),
            "loose" => Ok(ToleranceProfile::Loose),
            other => Err(Error::InvalidConfig(format!(
                "unknown tolerance profile '{other}' (expected default, strict or loose)"
            ))),
        }
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var(PROFILE_ENV) {
            Ok(v) => Self::parse(&v),
            Err(_) => Ok(ToleranceProfile::Default),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ToleranceProfile::Default => "default",
            ToleranceProfile::Strict => "strict",
            ToleranceProfile::Loose => "loose",
        }
    }
}

impl Tolerances {
    /// Absolute tolerances scaled by 0.1 (strict) or 10 (loose); ratios,
    /// fractions and detection thresholds are left alone.
    pub fn for_profile(profile: ToleranceProfile) -> Self {
        let s = match profile {
            ToleranceProfile::Default => return Tolerances::default(),
            ToleranceProfile::Strict => 0.1,
            ToleranceProfile::Loose => 10.0,
        };
        let d = Tolerances::default();
        Tolerances {
            hermiticity: d.hermiticity * s,
            trace: d.trace * s,
            positivity: d.positivity * s,
            invariant: d.invariant * s,
            pure_unitarity: d.pure_unitarity * s,
            kernel_leakage: d.kernel_leakage * s,
            entropy_floor: d.entropy_floor * s,
            stationarity: d.stationarity * s,
            subsystem_energy: d.subsystem_energy * s,
            product: d.product * s,
            mutual_information: d.mutual_information * s,
            fluctuation: d.fluctuation * s,
            expansion: d.expansion * s,
            production: d.production * s,
            symmetry: d.symmetry * s,
            psd: d.psd * s,
            ..d
        }
    }

    /// Overlay a partial JSON object of tolerance fields.
    pub fn overlay(&self, patch: &serde_json::Value, path: &str) -> Result<Self> {
        let obj = patch
            .as_object()
            .ok_or_else(|| Error::schema(path, "tolerance overrides must be an object"))?;
        let mut base = serde_json::to_value(self)?;
        let map = base.as_object_mut().expect("tolerances serialize to an object");
        for (k, v) in obj {
            if !map.contains_key(k) {
                return Err(Error::schema(format!("{path}.{k}"), "unknown tolerance"));
            }
            match v.as_f64() {
                Some(x) if x.is_finite() && x >= 0.0 => {
                    map.insert(k.clone(), v.clone());
                }
                _ => return Err(Error::schema(format!("{path}.{k}"), "tolerance must be a non-negative number")),
            }
        }
        Ok(serde_json::from_value(base)?)
    }

    /// The headline tolerance reported for a condition.
    pub fn primary(&self, condition: u8) -> f64 {
        match condition {
            1 => self.positivity,
            2 => self.invariant,
            3 => self.pure_unitarity,
            4 => self.kernel_leakage,
            5 => self.entropy_slack_factor,
            6 => self.stationarity,
            7 => self.subsystem_energy,
            8 => self.product,
            9 => self.mutual_information,
            _ => self.symmetry,
        }
    }
}

/// Horizons and probe sizes for the checks that run their own propagations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Horizon for the pure-state check; defaults to one period of the
    /// widest energy gap.
    pub pure_horizon: Option<f64>,
    pub pure_samples: usize,
    pub perturbations: usize,
    pub perturbation_scale: f64,
    pub equilibrium_horizon: f64,
    pub nd_epsilon: f64,
    pub nd_horizon: f64,
    pub separability_horizon: f64,
    pub separability_samples: usize,
    pub correlation_weight: f64,
    pub signaling_strength: f64,
    pub onsager_probes: Option<usize>,
    pub onsager_radius: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            pure_horizon: None,
            pure_samples: 100,
            perturbations: 8,
            perturbation_scale: 0.5,
            equilibrium_horizon: 5.0,
            nd_epsilon: 1e-3,
            nd_horizon: 50.0,
            separability_horizon: 10.0,
            separability_samples: 100,
            correlation_weight: 0.6,
            signaling_strength: 0.5,
            onsager_probes: None,
            onsager_radius: 1e-4,
        }
    }
}

pub const ALL_CONDITIONS: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Everything `run_all` needs besides the model and the dynamics.
#[derive(Clone, Debug)]
pub struct ComplianceSetup {
    pub id: String,
    pub initial: QuantumState,
    pub integration: IntegratorConfig,
    pub conditions: Vec<u8>,
    pub tolerances: Tolerances,
    pub overrides: BTreeMap<u8, Tolerances>,
    pub probes: ProbeConfig,
    pub seed: u64,
    pub profile: ToleranceProfile,
}

impl ComplianceSetup {
    pub fn new(id: impl Into<String>, initial: QuantumState, integration: IntegratorConfig) -> Self {
        ComplianceSetup {
            id: id.into(),
            initial,
            integration,
            conditions: ALL_CONDITIONS.to_vec(),
            tolerances: Tolerances::default(),
            overrides: BTreeMap::new(),
            probes: ProbeConfig::default(),
            seed: 0,
            profile: ToleranceProfile::Default,
        }
    }

    pub fn tol(&self, condition: u8) -> &Tolerances {
        self.overrides.get(&condition).unwrap_or(&self.tolerances)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub profile: ToleranceProfile,
    pub tolerances: Tolerances,
    pub overrides: BTreeMap<u8, Tolerances>,
    pub seed: u64,
    pub integrator: IntegratorConfig,
    pub probes: ProbeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub scenario_id: String,
    pub dynamics: DynamicsSpec,
    pub results: Vec<ConditionResult>,
    pub environment: Environment,
    pub pass_count: usize,
    pub fail_count: usize,
    pub info_count: usize,
}

impl ComplianceReport {
    pub fn failed_conditions(&self) -> Vec<u8> {
        self.results
            .iter()
            .filter(|r| r.status == Status::Fail)
            .map(|r| r.condition_id)
            .collect()
    }

    pub fn all_passed(&self) -> bool {
        self.fail_count == 0
    }

    pub fn result(&self, id: u8) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.condition_id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_canonical_string(self)
    }

    /// Plain-text table, one row per condition.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} ({})", self.scenario_id, self.dynamics.kind.as_str());
        let _ = writeln!(out, "{:>4}  {:<6} {:<40} narrative", "cond", "status", "worst metric");
        for r in &self.results {
            let status = match r.status {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::Info => "info",
            };
            let shown = r
                .failing_metrics()
                .first()
                .copied()
                .or_else(|| r.metrics.iter().find(|m| m.is_binding()))
                .map(|m| format!("{} = {:.3e}", m.name, m.value))
                .unwrap_or_else(|| "-".to_string());
            let _ = writeln!(out, "{:>4}  {:<6} {:<40} {}", r.condition_id, status, shown, r.narrative);
        }
        let _ = writeln!(
            out,
            "{} pass, {} fail, {} info",
            self.pass_count, self.fail_count, self.info_count
        );
        out
    }
}

/// Main trajectory plus the backward-leg outcome.
pub struct MainRun {
    pub trajectory: Trajectory,
    pub backward_failure: Option<String>,
    pub forward_failure: Option<String>,
}

pub fn main_run(model: &SystemModel, spec: &DynamicsSpec, setup: &ComplianceSetup) -> Result<MainRun> {
    match integrator::propagate(model, spec, &setup.initial, &setup.integration) {
        Ok(trajectory) => Ok(MainRun {
            trajectory,
            backward_failure: None,
            forward_failure: None,
        }),
        Err(Error::StepUnderflow {
            t,
            dt,
            diagnosis,
            partial,
        }) => {
            let t_end = setup.integration.sample_times.last().copied().unwrap_or(0.0);
            let msg = format!("step underflow at t = {t:.6e} (dt = {dt:.3e}): {diagnosis}");
            let forward_done = partial.times.last().copied() == Some(t_end);
            Ok(MainRun {
                trajectory: *partial,
                backward_failure: forward_done.then(|| msg.clone()),
                forward_failure: (!forward_done).then_some(msg),
            })
        }
        Err(e) => Err(e),
    }
}

/// Run every requested check. Deterministic for a fixed setup.
pub fn run_all(model: &SystemModel, spec: &DynamicsSpec, setup: &ComplianceSetup) -> Result<ComplianceReport> {
    run_all_with_trajectory(model, spec, setup).map(|(r, _)| r)
}

/// As [`run_all`], also returning the main trajectory when one was needed.
pub fn run_all_with_trajectory(
    model: &SystemModel,
    spec: &DynamicsSpec,
    setup: &ComplianceSetup,
) -> Result<(ComplianceReport, Option<Trajectory>)> {
    spec.validate(model)?;
    setup.integration.validate()?;
    let mut wanted: Vec<u8> = setup.conditions.clone();
    wanted.sort_unstable();
    wanted.dedup();
    if let Some(bad) = wanted.iter().find(|c| !(1..=10).contains(*c)) {
        return Err(Error::InvalidConfig(format!("unknown condition id {bad}")));
    }
    let needs_main = wanted.iter().any(|c| [1, 2, 4, 5, 7].contains(c));
    let main = if needs_main { Some(main_run(model, spec, setup)?) } else { None };

    let results: Vec<ConditionResult> = wanted
        .par_iter()
        .map(|&id| evaluate(model, spec, setup, main.as_ref(), id))
        .collect();

    let pass_count = results.iter().filter(|r| r.status == Status::Pass).count();
    let fail_count = results.iter().filter(|r| r.status == Status::Fail).count();
    let info_count = results.iter().filter(|r| r.status == Status::Info).count();
    let report = ComplianceReport {
        scenario_id: setup.id.clone(),
        dynamics: spec.clone(),
        results,
        environment: Environment {
            profile: setup.profile,
            tolerances: setup.tolerances.clone(),
            overrides: setup.overrides.clone(),
            seed: setup.seed,
            integrator: setup.integration.clone(),
            probes: setup.probes.clone(),
        },
        pass_count,
        fail_count,
        info_count,
    };
    Ok((report, main.map(|m| m.trajectory)))
}

fn evaluate(
    model: &SystemModel,
    spec: &DynamicsSpec,
    setup: &ComplianceSetup,
    main: Option<&MainRun>,
    id: u8,
) -> ConditionResult {
    let tol = setup.tol(id);
    let t = tol.primary(id);
    let out = match id {
        1 => {
            let m = main.expect("main run computed");
            let mut r = check_domain(&m.trajectory, tol);
            annotate_domain(&mut r, m, &setup.integration);
            Ok(r)
        }
        2 => Ok(check_invariants(&main.expect("main run").trajectory, model, tol).0),
        7 => Ok(check_invariants(&main.expect("main run").trajectory, model, tol).1),
        3 => checks::pure_check_for_setup(model, spec, setup, tol),
        4 => Ok(check_kernel(&main.expect("main run").trajectory, model, tol)),
        5 => Ok(check_entropy(&main.expect("main run").trajectory, model, tol)),
        6 => {
            let probe = EquilibriumProbe::from_setup(setup);
            crate::dynamics::conserved_model(model, spec).and_then(|cm| {
                checks::targets_of(&cm, &setup.initial).and_then(|(e, g)| check_equilibrium(&cm, spec, e, &g, &probe, tol))
            })
        }
        8 | 9 => {
            let probe = SeparabilityProbe::from_setup(setup);
            check_separability(model, spec, &setup.initial, &probe, tol).map(|(r8, r9)| if id == 8 { r8 } else { r9 })
        }
        _ => {
            let probe = OnsagerProbe::from_setup(setup);
            crate::dynamics::conserved_model(model, spec).and_then(|cm| {
                checks::targets_of(&cm, &setup.initial)
                    .and_then(|(e, g)| crate::equilibrium::solve_gibbs(&cm, e, &g))
                    .and_then(|sol| onsager_analysis(&cm, spec, &sol, &probe, tol))
                    .map(|(_, r)| r)
            })
        }
    };
    out.unwrap_or_else(|e| ConditionResult::error(id, t, &e))
}

fn annotate_domain(r: &mut ConditionResult, m: &MainRun, cfg: &IntegratorConfig) {
    let requested = -cfg.sample_times.first().copied().unwrap_or(0.0).min(0.0);
    let reached = -m.trajectory.times.first().copied().unwrap_or(0.0).min(0.0);
    if requested > 0.0 {
        r.metrics.push(Metric::info("backward_horizon_requested", requested));
        r.metrics.push(Metric::info("backward_horizon_reached", reached));
    }
    if let Some(msg) = &m.backward_failure {
        r.narrative.push_str(&format!("; backward leg stopped early (reported, not adjudicated): {msg}"));
    }
    if let Some(msg) = &m.forward_failure {
        let t_end = cfg.sample_times.last().copied().unwrap_or(0.0);
        let got = m.trajectory.times.last().copied().unwrap_or(0.0);
        r.metrics.push(Metric::at_least("forward_horizon_reached", got, t_end));
        r.narrative.push_str(&format!("; forward leg failed: {msg}"));
        r.status = Status::Fail;
    }
}
