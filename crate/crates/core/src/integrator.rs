//! Adaptive Dormand–Prince 5(4) propagation of `dρ/dt = −(i/ħ)[H, ρ] + D`.
//!
//! Steps are controlled by `max |err| / (atol + rtol·|y|)` over matrix
//! entries. Accepted states are Hermitian-symmetrized (the deviation is
//! logged). In strict mode the trace is also renormalized; raw mode applies
//! no other repair. Samples at negative times are reached by integrating the
//! same vector field backward from `t = 0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DynamicsSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::state::{self, QuantumState, Subsystem, SystemModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairMode {
    #[default]
    Raw,
    Strict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub mode: RepairMode,
    /// Ascending sample times; must contain 0. Negative entries are reached
    /// by backward integration.
    pub sample_times: Vec<f64>,
    /// Relative eigenvalue floor below which a direction is treated as
    /// kernel inside vector-field evaluations. Integration noise lifts exact
    /// zeros to roughly `atol`-sized eigenvalues, which the entropy gradient
    /// would otherwise amplify.
    pub kernel_floor: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-9,
            atol: 1e-11,
            dt_init: 1e-3,
            dt_max: 0.25,
            mode: RepairMode::Raw,
            sample_times: uniform_times(0.0, 1.0, 200),
            kernel_floor: 1e-8,
            max_steps: 2_000_000,
        }
    }
}

/// `n` equal intervals on `[t0, t1]`, endpoints included.
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect()
}

/// Samples on `[−backward, forward]` with a given count on each side.
pub fn two_sided_times(backward: f64, n_back: usize, forward: f64, n_fwd: usize) -> Vec<f64> {
    let mut t: Vec<f64> = Vec::new();
    if backward > 0.0 && n_back > 0 {
        t.extend(uniform_times(-backward, 0.0, n_back));
        t.pop();
    }
    t.extend(uniform_times(0.0, forward, n_fwd));
    t
}

impl IntegratorConfig {
    pub fn with_times(mut self, t: Vec<f64>) -> Self {
        self.sample_times = t;
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_mode(mut self, mode: RepairMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("rtol and atol must be positive");
        }
        if self.rtol < self.atol * 1e-3 {
            return bad("rtol must be at least 1e-3 * atol");
        }
        if !(self.dt_init > 0.0 && self.dt_max > 0.0) {
            return bad("dt_init and dt_max must be positive");
        }
        if !(self.kernel_floor >= 0.0 && self.kernel_floor < 1e-2) {
            return bad("kernel_floor must lie in [0, 1e-2)");
        }
        if self.sample_times.iter().any(|t| !t.is_finite()) {
            return bad("sample times must be finite");
        }
        if self.sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sample times must be strictly increasing");
        }
        if !self.sample_times.contains(&0.0) {
            return bad("sample times must include 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub trace: f64,
    pub e: f64,
    pub g: Vec<f64>,
    pub subsystem_energies: Option<[f64; 2]>,
    pub entropy: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub rank: usize,
    pub dnorm: f64,
    pub mutual_information: Option<f64>,
    /// Local error estimates (Frobenius) of the steps that led here from the
    /// previous sample: largest and summed.
    pub step_error_max: f64,
    pub step_error_sum: f64,
    pub symmetrization: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub positivity_rejections: usize,
    pub evaluations: usize,
    pub max_symmetrization: f64,
    pub max_trace_repair: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Ascending sample times.
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub records: Vec<SampleRecord>,
    pub stats: IntegrationStats,
    pub mode: RepairMode,
    pub eps_ker: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&x| x == t)
    }

    pub fn initial(&self) -> Option<&QuantumState> {
        self.index_of(0.0).map(|i| &self.states[i])
    }

    pub fn last(&self) -> Option<&QuantumState> {
        self.states.last()
    }

    /// Entries with `t ≥ 0`.
    pub fn forward_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.times[i] >= 0.0).collect()
    }

    /// Build a trajectory from states alone, recomputing records.
    pub fn from_states(model: &SystemModel, spec: &DynamicsSpec, samples: Vec<(f64, QuantumState)>) -> Result<Self> {
        let mut out = Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            records: Vec::new(),
            stats: IntegrationStats::default(),
            mode: RepairMode::Raw,
            eps_ker: spec.eps_ker,
        };
        for (t, s) in samples {
            let rec = record(model, spec, spec.eps_ker, t, s.matrix(), Telemetry::default())?;
            out.times.push(t);
            out.states.push(s);
            out.records.push(rec);
        }
        Ok(out)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let ng = self.records.first().map(|r| r.g.len()).unwrap_or(0);
        let mut h: Vec<String> = ["t", "entropy", "trace", "e"].iter().map(|s| s.to_string()).collect();
        for i in 0..ng {
            h.push(format!("g_{}", i + 1));
        }
        for s in ["lambda_min", "lambda_max", "rank", "dnorm", "mutual_information"] {
            h.push(s.to_string());
        }
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.csv_header())?;
        let f = |x: f64| format!("{:.16e}", x);
        for r in &self.records {
            let mut row = vec![f(r.t), f(r.entropy), f(r.trace), f(r.e)];
            row.extend(r.g.iter().map(|&x| f(x)));
            row.push(f(r.lambda_min));
            row.push(f(r.lambda_max));
            row.push(r.rank.to_string());
            row.push(f(r.dnorm));
            row.push(r.mutual_information.map(f).unwrap_or_default());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// `[{ "t": .., "rho": [[[re, im], ..], ..] }, ..]`.
    pub fn states_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.times
                .iter()
                .zip(&self.states)
                .map(|(t, s)| serde_json::json!({ "t": t, "rho": crate::json::matrix_to_value(s.matrix()) }))
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Telemetry {
    err_max: f64,
    err_sum: f64,
    sym: f64,
}

fn record(model: &SystemModel, spec: &DynamicsSpec, eps_eval: f64, t: f64, rho: &CMat, tel: Telemetry) -> Result<SampleRecord> {
    let k_b = model.k_b();
    let eig = linalg::herm_eig(rho);
    let lmax = eig.max();
    let rank = eig.values.iter().filter(|&&l| l > spec.eps_ker * lmax.max(0.0)).count();
    let d = dynamics::dissipative_matrix(model, spec, rho, eps_eval)?;
    let (subsystem_energies, mutual_information) = match (model.bipartite_dims(), model.hamiltonian_parts()) {
        (Ok(dims), parts) => {
            let mi = state::mutual_information_matrix(rho, dims, k_b);
            let se = parts.map(|p| {
                let ra = state::partial_trace_matrix(rho, dims, Subsystem::A);
                let rb = state::partial_trace_matrix(rho, dims, Subsystem::B);
                [
                    state::expectation_matrix(&ra, p[0].matrix()),
                    state::expectation_matrix(&rb, p[1].matrix()),
                ]
            });
            (se, Some(mi))
        }
        _ => (None, None),
    };
    Ok(SampleRecord {
        t,
        trace: linalg::trace(rho).re,
        e: state::expectation_matrix(rho, model.hamiltonian().matrix()),
        g: model
            .invariants()
            .iter()
            .map(|g| state::expectation_matrix(rho, g.matrix()))
            .collect(),
        subsystem_energies,
        entropy: state::entropy_of_spectrum(&eig.values, k_b),
        lambda_min: eig.min(),
        lambda_max: lmax,
        rank,
        dnorm: linalg::frobenius(&d),
        mutual_information,
        step_error_max: tel.err_max,
        step_error_sum: tel.err_sum,
        symmetrization: tel.sym,
    })
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    model: &'a SystemModel,
    spec: &'a DynamicsSpec,
    config: &'a IntegratorConfig,
    eps_eval: f64,
    stats: IntegrationStats,
}

struct StepResult {
    y: CMat,
    err_norm: f64,
    err_abs: f64,
}

impl Stepper<'_> {
    fn field(&mut self, y: &CMat) -> Result<CMat> {
        self.stats.evaluations += 1;
        dynamics::vector_field(self.model, self.spec, y, self.eps_eval)
    }

    fn attempt(&mut self, y: &CMat, h: f64) -> Result<StepResult> {
        let mut k: Vec<CMat> = Vec::with_capacity(7);
        k.push(self.field(y)?);
        for row in A.iter() {
            let mut yi = y.clone();
            for (j, &a) in row.iter().enumerate().take(k.len()) {
                if a != 0.0 {
                    yi += &k[j] * c(h * a, 0.0);
                }
            }
            k.push(self.field(&yi)?);
        }
        let mut ynew = y.clone();
        let mut err = CMat::zeros(y.nrows(), y.ncols());
        for i in 0..7 {
            if B5[i] != 0.0 {
                ynew += &k[i] * c(h * B5[i], 0.0);
            }
            if E[i] != 0.0 {
                err += &k[i] * c(h * E[i], 0.0);
            }
        }
        let (atol, rtol) = (self.config.atol, self.config.rtol);
        let mut err_norm: f64 = 0.0;
        for ((e, a), b) in err.iter().zip(y.iter()).zip(ynew.iter()) {
            let scale = atol + rtol * a.norm().max(b.norm());
            err_norm = err_norm.max(e.re.abs() / scale).max(e.im.abs() / scale);
        }
        Ok(StepResult {
            y: ynew,
            err_norm,
            err_abs: linalg::frobenius(&err),
        })
    }

    /// Integrate from `t0` through each target in order (targets move away
    /// from `t0` monotonically). Calls `emit` at every target.
    fn leg(
        &mut self,
        y0: &CMat,
        t0: f64,
        targets: &[f64],
        mut emit: impl FnMut(&mut Self, f64, &CMat, Telemetry) -> Result<()>,
    ) -> std::result::Result<(), (f64, f64, String, Option<Error>)> {
        if targets.is_empty() {
            return Ok(());
        }
        let dir = (targets[0] - t0).signum();
        let span = (targets[targets.len() - 1] - t0).abs().max(1.0);
        let min_dt = 1e-14 * span;
        let mut y = y0.clone();
        let mut t = t0;
        let mut dt = self.config.dt_init.min(self.config.dt_max);
        let mut steps = 0usize;
        for &target in targets {
            let mut tel = Telemetry::default();
            while (target - t) * dir > 0.0 {
                steps += 1;
                if steps > self.config.max_steps {
                    return Err((t, dt, "step limit".into(), Some(Error::StepLimit(self.config.max_steps))));
                }
                let remaining = (target - t).abs();
                let (h_abs, hits) = if dt >= remaining * (1.0 - 1e-12) { (remaining, true) } else { (dt, false) };
                let res = match self.attempt(&y, dir * h_abs) {
                    Ok(r) => r,
                    Err(e) => return Err((t, dt, format!("vector field failed: {e}"), Some(e))),
                };
                if !res.err_norm.is_finite() || !linalg::is_finite(&res.y) {
                    self.stats.rejected += 1;
                    dt *= 0.25;
                    if dt < min_dt {
                        return Err((t, dt, "non-finite vector field".into(), Some(Error::NonFinite(t))));
                    }
                    continue;
                }
                if res.err_norm > 1.0 {
                    self.stats.rejected += 1;
                    let fac = (0.9 * res.err_norm.powf(-0.2)).clamp(0.1, 0.9);
                    dt = h_abs * fac;
                    if dt < min_dt {
                        return Err((t, dt, format!("error control cannot meet tolerance at t = {t}"), None));
                    }
                    continue;
                }
                let mut ynew = res.y;
                let sym = linalg::symmetrize(&mut ynew);
                let lmin = linalg::herm_eigenvalues(&ynew).first().copied().unwrap_or(0.0);
                if lmin < -10.0 * self.config.atol {
                    self.stats.rejected += 1;
                    self.stats.positivity_rejections += 1;
                    dt = h_abs * 0.25;
                    if dt < min_dt {
                        return Err((
                            t,
                            dt,
                            format!("positivity boundary: smallest eigenvalue {lmin:e} after step"),
                            None,
                        ));
                    }
                    continue;
                }
                if self.config.mode == RepairMode::Strict {
                    let tr = linalg::trace(&ynew).re;
                    self.stats.max_trace_repair = self.stats.max_trace_repair.max((tr - 1.0).abs());
                    ynew /= c(tr, 0.0);
                }
                self.stats.accepted += 1;
                self.stats.max_symmetrization = self.stats.max_symmetrization.max(sym);
                tel.err_max = tel.err_max.max(res.err_abs);
                tel.err_sum += res.err_abs;
                tel.sym = tel.sym.max(sym);
                y = ynew;
                t = if hits { target } else { t + dir * h_abs };
                let fac = if res.err_norm == 0.0 { 5.0 } else { (0.9 * res.err_norm.powf(-0.2)).clamp(0.2, 5.0) };
                // A clipped step says nothing about the free step size.
                let proposed = h_abs * fac;
                dt = if hits { dt.max(proposed) } else { proposed };
                dt = dt.min(self.config.dt_max);
            }
            if let Err(e) = emit(self, target, &y, tel) {
                return Err((t, dt, format!("telemetry failed: {e}"), Some(e)));
            }
        }
        Ok(())
    }
}

fn collect(sink: &mut Vec<(f64, CMat, SampleRecord)>, s: &mut Stepper, t: f64, y: &CMat, tel: Telemetry) -> Result<()> {
    let r = record(s.model, s.spec, s.eps_eval, t, y, tel)?;
    sink.push((t, y.clone(), r));
    Ok(())
}

/// Propagate `rho0` to every sample time. On step-size underflow the error
/// carries the partial trajectory (already-reached samples, ascending).
pub fn propagate(
    model: &SystemModel,
    spec: &DynamicsSpec,
    rho0: &QuantumState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    spec.validate(model)?;
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    let eps_eval = spec.eps_ker.max(config.kernel_floor);
    let mut stepper = Stepper {
        model,
        spec,
        config,
        eps_eval,
        stats: IntegrationStats::default(),
    };
    let y0 = rho0.matrix().clone();
    let mut fwd: Vec<(f64, CMat, SampleRecord)> = Vec::new();
    let mut bwd: Vec<(f64, CMat, SampleRecord)> = Vec::new();

    let forward: Vec<f64> = config.sample_times.iter().copied().filter(|&t| t > 0.0).collect();
    let backward: Vec<f64> = config.sample_times.iter().rev().copied().filter(|&t| t < 0.0).collect();

    let rec0 = record(model, spec, eps_eval, 0.0, &y0, Telemetry::default())?;
    fwd.push((0.0, y0.clone(), rec0));

    let fwd_res = stepper.leg(&y0, 0.0, &forward, |s, t, y, tel| collect(&mut fwd, s, t, y, tel));
    let bwd_res = match fwd_res {
        Ok(()) => stepper.leg(&y0, 0.0, &backward, |s, t, y, tel| collect(&mut bwd, s, t, y, tel)),
        Err(e) => Err(e),
    };

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        records: Vec::new(),
        stats: stepper.stats.clone(),
        mode: config.mode,
        eps_ker: spec.eps_ker,
    };
    for (t, y, r) in bwd.into_iter().rev().chain(fwd) {
        traj.times.push(t);
        traj.states.push(QuantumState::from_matrix_unchecked(y));
        traj.records.push(r);
    }
    match bwd_res {
        Ok(()) => Ok(traj),
        Err((t, dt, diagnosis, cause)) => match cause {
            Some(e @ (Error::Infeasible(_) | Error::NoConvergence { .. } | Error::OverflowGuard(_))) => {
                // Equilibrium lookups inside the vector field can fail near
                // the boundary; report as underflow with the cause attached.
                Err(Error::StepUnderflow {
                    t,
                    dt,
                    diagnosis: format!("{diagnosis} ({e})"),
                    partial: Box::new(traj),
                })
            }
            Some(Error::StepLimit(n)) => Err(Error::StepLimit(n)),
            Some(Error::NonFinite(t)) => Err(Error::NonFinite(t)),
            _ => Err(Error::StepUnderflow {
                t,
                dt,
                diagnosis,
                partial: Box::new(traj),
            }),
        },
    }
}
