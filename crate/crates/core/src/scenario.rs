//! Scenario files.
//!
//! A scenario is one JSON object: the system, an initial state (explicit
//! matrix or constructor), dynamics, integration horizon, the conditions to
//! check with optional tolerance overrides, and the conditions expected to
//! fail. Every schema error names the offending field path.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::compliance::{
    self, ComplianceReport, ComplianceSetup, ProbeConfig, ToleranceProfile, Tolerances, ALL_CONDITIONS,
};
use crate::dynamics::DynamicsSpec;
use crate::equilibrium;
use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Trajectory};
use crate::json::matrix_from_value;
use crate::linalg::{self, c, CMat, C64};
use crate::random;
use crate::state::{Constants, Observable, QuantumState, SystemModel};

const TOP_KEYS: &[&str] = &[
    "id",
    "description",
    "system",
    "initial_state",
    "dynamics",
    "integration",
    "checks",
    "tolerances",
    "probes",
    "seed",
    "expect",
    "outputs",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub trajectory_csv: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: String,
    pub description: Option<String>,
    pub model: SystemModel,
    pub initial: QuantumState,
    pub dynamics: DynamicsSpec,
    pub integration: IntegratorConfig,
    pub checks: Vec<u8>,
    pub tolerances: Option<Value>,
    pub check_tolerances: BTreeMap<u8, Value>,
    pub probes: ProbeConfig,
    pub seed: u64,
    /// Conditions expected to fail; the suite runner compares against this.
    pub expect_fail: Vec<u8>,
    pub outputs: Outputs,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::schema(path_or_root(path), "expected an object"))
}

fn path_or_root(path: &str) -> &str {
    if path.is_empty() {
        "$"
    } else {
        path
    }
}

fn reject_unknown(map: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<()> {
    for k in map.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::schema(join(path, k), "unknown field"));
        }
    }
    Ok(())
}

fn required<'a>(map: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value> {
    map.get(key).ok_or_else(|| Error::schema(join(path, key), "missing required field"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::schema(path, "expected a finite number"))
}

fn unsigned(v: &Value, path: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| Error::schema(path, "expected a non-negative integer"))
}

fn numbers(v: &Value, path: &str) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| Error::schema(path, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn typed<T: DeserializeOwned>(v: &Value, path: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::schema(path, e.to_string()))
}

fn observable(v: &Value, path: &str) -> Result<Observable> {
    let m = matrix_from_value(v, path)?;
    Observable::new(m).map_err(|e| Error::schema(path, e.to_string()))
}

fn vector(v: &Value, path: &str) -> Result<Vec<C64>> {
    let arr = v.as_array().ok_or_else(|| Error::schema(path, "expected an array of amplitudes"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            let p = format!("{path}[{i}]");
            match x {
                Value::Number(_) => Ok(c(number(x, &p)?, 0.0)),
                Value::Array(pair) if pair.len() == 2 => Ok(c(number(&pair[0], &p)?, number(&pair[1], &p)?)),
                _ => Err(Error::schema(p, "amplitude must be a number or an [re, im] pair")),
            }
        })
        .collect()
}

fn condition_id(v: &Value, path: &str) -> Result<u8> {
    let id = unsigned(v, path)?;
    if !(1..=10).contains(&id) {
        return Err(Error::schema(path, format!("condition id {id} outside 1..=10")));
    }
    Ok(id as u8)
}

fn parse_system(v: &Value) -> Result<SystemModel> {
    let path = "system";
    let map = object(v, path)?;
    reject_unknown(map, path, &["subsystem_dims", "H", "H_parts", "G", "constants"])?;
    let h = observable(required(map, path, "H")?, "system.H")?;
    let dims = match map.get("subsystem_dims") {
        None => vec![h.dim()],
        Some(d) => {
            let arr = d
                .as_array()
                .ok_or_else(|| Error::schema("system.subsystem_dims", "expected an array"))?;
            arr.iter()
                .enumerate()
                .map(|(i, x)| unsigned(x, &format!("system.subsystem_dims[{i}]")).map(|n| n as usize))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let invariants = match map.get("G") {
        None => vec![],
        Some(g) => {
            let arr = g.as_array().ok_or_else(|| Error::schema("system.G", "expected an array of matrices"))?;
            arr.iter()
                .enumerate()
                .map(|(i, x)| observable(x, &format!("system.G[{i}]")))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let parts = match map.get("H_parts") {
        None => None,
        Some(p) => {
            let arr = p
                .as_array()
                .ok_or_else(|| Error::schema("system.H_parts", "expected an array of two matrices"))?;
            Some(
                arr.iter()
                    .enumerate()
                    .map(|(i, x)| observable(x, &format!("system.H_parts[{i}]")))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    let constants = match map.get("constants") {
        None => Constants::default(),
        Some(cv) => {
            let cm = object(cv, "system.constants")?;
            reject_unknown(cm, "system.constants", &["k_b", "hbar"])?;
            let mut k = Constants::default();
            if let Some(x) = cm.get("k_b") {
                k.k_b = number(x, "system.constants.k_b")?;
            }
            if let Some(x) = cm.get("hbar") {
                k.hbar = number(x, "system.constants.hbar")?;
            }
            k
        }
    };
    SystemModel::new(dims, h, invariants, parts, constants).map_err(|e| Error::schema(path, e.to_string()))
}

/// Where an initial-state constructor is evaluated: the full system or one
/// factor of a product.
struct StateContext {
    dim: usize,
    model: Option<SystemModel>,
    factors: Option<[StateContextFactor; 2]>,
}

#[derive(Clone)]
struct StateContextFactor {
    dim: usize,
    hamiltonian: Option<Observable>,
}

impl StateContext {
    fn full(model: &SystemModel) -> Self {
        let factors = model.bipartite_dims().ok().map(|(da, db)| {
            let parts = model.hamiltonian_parts();
            let part = |k: usize| parts.map(|p| p[k].clone());
            [
                StateContextFactor {
                    dim: da,
                    hamiltonian: part(0),
                },
                StateContextFactor {
                    dim: db,
                    hamiltonian: part(1),
                },
            ]
        });
        StateContext {
            dim: model.dim(),
            model: Some(model.clone()),
            factors,
        }
    }

    fn factor(f: &StateContextFactor) -> Result<Self> {
        let model = match &f.hamiltonian {
            Some(h) => Some(SystemModel::simple(h.clone())?),
            None => None,
        };
        Ok(StateContext {
            dim: f.dim,
            model,
            factors: None,
        })
    }

    fn model(&self, path: &str, kind: &str) -> Result<&SystemModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::schema(path, format!("'{kind}' needs a Hamiltonian; declare system.H_parts")))
    }
}

fn state_from(m: CMat, path: &str) -> Result<QuantumState> {
    QuantumState::new(m).map_err(|e| Error::schema(path, e.to_string()))
}

fn seed_of(map: &Map<String, Value>, path: &str) -> Result<u64> {
    match map.get("seed") {
        Some(s) => unsigned(s, &join(path, "seed")),
        None => Err(Error::schema(join(path, "seed"), "seed is mandatory for random constructors")),
    }
}

fn targets(map: &Map<String, Value>, path: &str, model: &SystemModel) -> Result<(f64, Vec<f64>)> {
    let e = number(required(map, path, "e")?, &join(path, "e"))?;
    let g = match map.get("g") {
        Some(g) => numbers(g, &join(path, "g"))?,
        None => vec![],
    };
    if g.len() != model.invariants().len() {
        return Err(Error::schema(
            join(path, "g"),
            format!("{} targets given, {} invariants declared", g.len(), model.invariants().len()),
        ));
    }
    Ok((e, g))
}

fn parse_state(v: &Value, path: &str, ctx: &StateContext) -> Result<QuantumState> {
    let st = if v.is_array() {
        state_from(matrix_from_value(v, path)?, path)?
    } else {
        constructed_state(v, path, ctx)?
    };
    if st.dim() != ctx.dim {
        return Err(Error::schema(
            path,
            format!("state has dimension {}, expected {}", st.dim(), ctx.dim),
        ));
    }
    Ok(st)
}

fn constructed_state(v: &Value, path: &str, ctx: &StateContext) -> Result<QuantumState> {
    let map = object(v, path)?;
    let kind = required(map, path, "kind")?
        .as_str()
        .ok_or_else(|| Error::schema(join(path, "kind"), "expected a string"))?;
    let keys: &[&str] = match kind {
        "pure" => &["kind", "psi"],
        "gibbs" => &["kind", "beta", "nu", "e", "g"],
        "nd" => &["kind", "support", "projector", "e", "g"],
        "product" => &["kind", "factors"],
        "mixture" => &["kind", "components"],
        "maximally_mixed" => &["kind"],
        "random_full_rank" => &["kind", "seed"],
        "random_ranked" => &["kind", "rank", "seed"],
        "random_pure" => &["kind", "seed"],
        other => return Err(Error::schema(join(path, "kind"), format!("unknown constructor '{other}'"))),
    };
    reject_unknown(map, path, keys)?;
    let n = ctx.dim;
    match kind {
        "pure" => {
            let p = join(path, "psi");
            let psi = vector(required(map, path, "psi")?, &p)?;
            if psi.len() != n {
                return Err(Error::schema(p, format!("{} amplitudes, expected {n}", psi.len())));
            }
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::schema(p, "zero vector"));
            }
            let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
            QuantumState::pure(&psi).map_err(|e| Error::schema(p, e.to_string()))
        }
        "gibbs" => {
            let model = ctx.model(path, kind)?;
            if let Some(b) = map.get("beta") {
                if map.contains_key("e") || map.contains_key("g") {
                    return Err(Error::schema(path, "give either beta/nu or e/g, not both"));
                }
                let beta = number(b, &join(path, "beta"))?;
                let nu = match map.get("nu") {
                    Some(x) => numbers(x, &join(path, "nu"))?,
                    None => vec![0.0; model.invariants().len()],
                };
                equilibrium::gibbs_density(model, beta, &nu).map_err(|e| Error::schema(path, e.to_string()))
            } else {
                let (e, g) = targets(map, path, model)?;
                equilibrium::solve_gibbs(model, e, &g)
                    .map(|s| s.state().clone())
                    .map_err(|e| Error::schema(path, e.to_string()))
            }
        }
        "nd" => {
            let model = ctx.model(path, kind)?;
            let b = match (map.get("support"), map.get("projector")) {
                (Some(s), None) => {
                    let sp = join(path, "support");
                    let idx = s.as_array().ok_or_else(|| Error::schema(&sp, "expected an array of indices"))?;
                    let mut d = vec![0.0; n];
                    for (i, x) in idx.iter().enumerate() {
                        let k = unsigned(x, &format!("{sp}[{i}]"))? as usize;
                        if k >= n {
                            return Err(Error::schema(format!("{sp}[{i}]"), format!("index {k} out of range")));
                        }
                        d[k] = 1.0;
                    }
                    Observable::diagonal(&d)
                }
                (None, Some(p)) => observable(p, &join(path, "projector"))?,
                _ => return Err(Error::schema(path, "give exactly one of support or projector")),
            };
            let (e, g) = targets(map, path, model)?;
            equilibrium::nd_state(model, &b, e, &g).map_err(|e| Error::schema(path, e.to_string()))
        }
        "product" => {
            let fp = join(path, "factors");
            let factors = ctx
                .factors
                .as_ref()
                .ok_or_else(|| Error::schema(&fp, "product states need a bipartite subsystem_dims"))?;
            let arr = required(map, path, "factors")?
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::schema(&fp, "expected exactly two factor states"))?;
            let a = parse_state(&arr[0], &format!("{fp}[0]"), &StateContext::factor(&factors[0])?)?;
            let b = parse_state(&arr[1], &format!("{fp}[1]"), &StateContext::factor(&factors[1])?)?;
            Ok(a.tensor(&b))
        }
        "mixture" => {
            let cp = join(path, "components");
            let arr = required(map, path, "components")?
                .as_array()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| Error::schema(&cp, "expected a non-empty array"))?;
            let mut acc = CMat::zeros(n, n);
            let mut total = 0.0;
            for (i, comp) in arr.iter().enumerate() {
                let ip = format!("{cp}[{i}]");
                let cm = object(comp, &ip)?;
                reject_unknown(cm, &ip, &["weight", "state"])?;
                let w = number(required(cm, &ip, "weight")?, &join(&ip, "weight"))?;
                if w <= 0.0 {
                    return Err(Error::schema(join(&ip, "weight"), "weights must be positive"));
                }
                let st = parse_state(required(cm, &ip, "state")?, &join(&ip, "state"), ctx)?;
                acc += st.matrix() * c(w, 0.0);
                total += w;
            }
            acc /= c(total, 0.0);
            linalg::symmetrize(&mut acc);
            state_from(acc, path)
        }
        "maximally_mixed" => Ok(QuantumState::maximally_mixed(n)),
        "random_full_rank" => {
            let seed = seed_of(map, path)?;
            Ok(random::full_rank_state(n, &mut random::rng(seed, 0)))
        }
        "random_ranked" => {
            let seed = seed_of(map, path)?;
            let rp = join(path, "rank");
            let r = unsigned(required(map, path, "rank")?, &rp)? as usize;
            if r == 0 || r > n {
                return Err(Error::schema(rp, format!("rank must be in 1..={n}")));
            }
            Ok(random::ranked_state(n, r, &mut random::rng(seed, 0)))
        }
        _ => {
            let seed = seed_of(map, path)?;
            Ok(random::pure_state(n, &mut random::rng(seed, 0)))
        }
    }
}

fn parse_integration(v: Option<&Value>) -> Result<IntegratorConfig> {
    let path = "integration";
    let empty = Map::new();
    let map = match v {
        Some(v) => object(v, path)?,
        None => &empty,
    };
    let horizon_keys = ["t_final", "samples", "backward_horizon", "backward_samples"];
    let mut rest = map.clone();
    let mut get = |k: &str| rest.remove(k);
    let t_final = get("t_final");
    let samples = get("samples");
    let back = get("backward_horizon");
    let back_samples = get("backward_samples");
    let explicit = rest.contains_key("sample_times");
    if explicit && horizon_keys.iter().any(|k| map.contains_key(*k)) {
        return Err(Error::schema(
            "integration.sample_times",
            "sample_times cannot be combined with t_final/samples/backward_horizon",
        ));
    }
    if !explicit {
        let tf = t_final.map(|x| number(&x, "integration.t_final")).transpose()?.unwrap_or(10.0);
        let nf = samples.map(|x| unsigned(&x, "integration.samples")).transpose()?.unwrap_or(200) as usize;
        let tb = back
            .map(|x| number(&x, "integration.backward_horizon"))
            .transpose()?
            .unwrap_or(0.0);
        let nb = back_samples
            .map(|x| unsigned(&x, "integration.backward_samples"))
            .transpose()?
            .unwrap_or(20) as usize;
        if tf <= 0.0 {
            return Err(Error::schema("integration.t_final", "must be positive"));
        }
        if tb < 0.0 {
            return Err(Error::schema("integration.backward_horizon", "must be non-negative"));
        }
        if nf == 0 || (tb > 0.0 && nb == 0) {
            return Err(Error::schema(path, "sample counts must be positive"));
        }
        let times = if tb > 0.0 {
            crate::integrator::two_sided_times(tb, nb, tf, nf)
        } else {
            crate::integrator::uniform_times(0.0, tf, nf)
        };
        rest.insert("sample_times".into(), serde_json::json!(times));
    }
    let cfg: IntegratorConfig = typed(&Value::Object(rest), path)?;
    cfg.validate().map_err(|e| Error::schema(path, e.to_string()))?;
    Ok(cfg)
}

fn parse_checks(v: Option<&Value>) -> Result<(Vec<u8>, BTreeMap<u8, Value>)> {
    let Some(v) = v else {
        return Ok((ALL_CONDITIONS.to_vec(), BTreeMap::new()));
    };
    let arr = v
        .as_array()
        .ok_or_else(|| Error::schema("checks", "expected an array of condition ids"))?;
    let mut ids = Vec::with_capacity(arr.len());
    let mut patches = BTreeMap::new();
    for (i, item) in arr.iter().enumerate() {
        let p = format!("checks[{i}]");
        let id = match item {
            Value::Object(m) => {
                reject_unknown(m, &p, &["id", "tolerances"])?;
                let id = condition_id(required(m, &p, "id")?, &join(&p, "id"))?;
                if let Some(t) = m.get("tolerances") {
                    object(t, &join(&p, "tolerances"))?;
                    patches.insert(id, t.clone());
                }
                id
            }
            _ => condition_id(item, &p)?,
        };
        if ids.contains(&id) {
            return Err(Error::schema(p, format!("condition {id} listed twice")));
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(Error::schema("checks", "no conditions requested"));
    }
    ids.sort_unstable();
    Ok((ids, patches))
}

fn parse_outputs(v: Option<&Value>) -> Result<Outputs> {
    let Some(v) = v else {
        return Ok(Outputs::default());
    };
    let map = object(v, "outputs")?;
    reject_unknown(map, "outputs", &["report", "trajectory_csv"])?;
    let path_of = |k: &str| -> Result<Option<PathBuf>> {
        match map.get(k) {
            None => Ok(None),
            Some(Value::String(s)) if !s.is_empty() => Ok(Some(PathBuf::from(s))),
            Some(_) => Err(Error::schema(join("outputs", k), "expected a non-empty path string")),
        }
    };
    Ok(Outputs {
        report: path_of("report")?,
        trajectory_csv: path_of("trajectory_csv")?,
    })
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::schema("$", format!("invalid JSON: {e}")))?;
        Scenario::from_value(&v)
    }

    /// Read a scenario file. Relative output paths are resolved against the
    /// directory containing the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut sc = Scenario::from_json_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        resolve(&mut sc.outputs.report);
        resolve(&mut sc.outputs.trajectory_csv);
        Ok(sc)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let map = object(v, "")?;
        reject_unknown(map, "", TOP_KEYS)?;
        let id = required(map, "", "id")?
            .as_str()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| Error::schema("id", "expected a non-empty string"))?
            .to_string();
        let description = match map.get("description") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::schema("description", "expected a string")),
        };
        let model = parse_system(required(map, "", "system")?)?;
        let initial = parse_state(required(map, "", "initial_state")?, "initial_state", &StateContext::full(&model))?;
        let dynamics: DynamicsSpec = typed(required(map, "", "dynamics")?, "dynamics")?;
        dynamics.validate(&model).map_err(|e| Error::schema("dynamics", e.to_string()))?;
        let integration = parse_integration(map.get("integration"))?;
        let (checks, check_tolerances) = parse_checks(map.get("checks"))?;
        let tolerances = match map.get("tolerances") {
            None => None,
            Some(t) => {
                object(t, "tolerances")?;
                Some(t.clone())
            }
        };
        let probes: ProbeConfig = match map.get("probes") {
            None => ProbeConfig::default(),
            Some(p) => typed(p, "probes")?,
        };
        let seed = match map.get("seed") {
            None => 0,
            Some(s) => unsigned(s, "seed")?,
        };
        let expect_fail = match map.get("expect") {
            None => vec![],
            Some(e) => {
                let em = object(e, "expect")?;
                reject_unknown(em, "expect", &["fail"])?;
                let mut ids = BTreeSet::new();
                if let Some(f) = em.get("fail") {
                    let arr = f.as_array().ok_or_else(|| Error::schema("expect.fail", "expected an array"))?;
                    for (i, x) in arr.iter().enumerate() {
                        let p = format!("expect.fail[{i}]");
                        let id = condition_id(x, &p)?;
                        if !checks.contains(&id) {
                            return Err(Error::schema(p, format!("condition {id} is not among the requested checks")));
                        }
                        ids.insert(id);
                    }
                }
                ids.into_iter().collect()
            }
        };
        let outputs = parse_outputs(map.get("outputs"))?;
        let sc = Scenario {
            id,
            description,
            model,
            initial,
            dynamics,
            integration,
            checks,
            tolerances,
            check_tolerances,
            probes,
            seed,
            expect_fail,
            outputs,
        };
        // Surface bad tolerance keys at parse time.
        sc.setup(ToleranceProfile::Default)?;
        Ok(sc)
    }

    /// Compliance setup with the profile's tolerances overlaid by the
    /// scenario-wide and then per-check overrides.
    pub fn setup(&self, profile: ToleranceProfile) -> Result<ComplianceSetup> {
        let mut base = Tolerances::for_profile(profile);
        if let Some(t) = &self.tolerances {
            base = base.overlay(t, "tolerances")?;
        }
        let mut overrides = BTreeMap::new();
        for (id, patch) in &self.check_tolerances {
            let idx = self.checks.iter().position(|c| c == id).unwrap_or(0);
            overrides.insert(*id, base.overlay(patch, &format!("checks[{idx}].tolerances"))?);
        }
        let mut setup = ComplianceSetup::new(self.id.clone(), self.initial.clone(), self.integration.clone());
        setup.conditions = self.checks.clone();
        setup.tolerances = base;
        setup.overrides = overrides;
        setup.probes = self.probes.clone();
        setup.seed = self.seed;
        setup.profile = profile;
        Ok(setup)
    }

    pub fn run(&self, profile: ToleranceProfile) -> Result<(ComplianceReport, Option<Trajectory>)> {
        let setup = self.setup(profile)?;
        compliance::run_all_with_trajectory(&self.model, &self.dynamics, &setup)
    }

    /// The failing set equals the declared expectation.
    pub fn expectation_met(&self, report: &ComplianceReport) -> bool {
        report.failed_conditions() == self.expect_fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn qutrit() -> Value {
        json!({
            "id": "t",
            "system": { "H": [[0, 0, 0], [0, 1, 0], [0, 0, 2]] },
            "initial_state": { "kind": "gibbs", "e": 0.9 },
            "dynamics": { "kind": "sea_single" },
            "checks": [2, { "id": 5, "tolerances": { "entropy_floor": 1e-12 } }],
            "integration": { "t_final": 1.0, "samples": 4 }
        })
    }

    fn path_of(e: Error) -> String {
        match e {
            Error::SchemaViolation { path, .. } => path,
            other => panic!("expected schema violation, got {other}"),
        }
    }

    #[test]
    fn parses_constructor_and_overrides() {
        let sc = Scenario::from_value(&qutrit()).unwrap();
        assert_eq!(sc.checks, vec![2, 5]);
        assert_eq!(sc.integration.sample_times.len(), 5);
        let setup = sc.setup(ToleranceProfile::Default).unwrap();
        assert_eq!(setup.tol(5).entropy_floor, 1e-12);
        assert_eq!(setup.tol(2).entropy_floor, Tolerances::default().entropy_floor);
        let e = crate::state::expectation(&sc.initial, sc.model.hamiltonian()).unwrap();
        assert!((e - 0.9).abs() < 1e-10);
    }

    #[test]
    fn non_square_hamiltonian_names_field() {
        let mut v = qutrit();
        v["system"]["H"] = json!([[0, 0], [0, 1, 2]]);
        let err = Scenario::from_value(&v).unwrap_err();
        assert!(err.to_string().contains("not square"));
        assert_eq!(path_of(err), "system.H");
    }

    #[test]
    fn random_constructor_requires_seed() {
        let mut v = qutrit();
        v["initial_state"] = json!({ "kind": "random_full_rank" });
        assert_eq!(path_of(Scenario::from_value(&v).unwrap_err()), "initial_state.seed");
        v["initial_state"] = json!({ "kind": "random_ranked", "rank": 2, "seed": 4 });
        let sc = Scenario::from_value(&v).unwrap();
        assert_eq!(sc.initial.rank(1e-10), 2);
    }

    #[test]
    fn unknown_fields_are_rejected_with_paths() {
        let mut v = qutrit();
        v["integration"]["rtoll"] = json!(1e-9);
        assert_eq!(path_of(Scenario::from_value(&v).unwrap_err()), "integration");
        let mut v = qutrit();
        v["bogus"] = json!(1);
        assert_eq!(path_of(Scenario::from_value(&v).unwrap_err()), "bogus");
        let mut v = qutrit();
        v["tolerances"] = json!({ "nope": 1.0 });
        assert!(path_of(Scenario::from_value(&v).unwrap_err()).starts_with("tolerances"));
    }

    #[test]
    fn dimension_mismatch_reports_state_path() {
        let mut v = qutrit();
        v["initial_state"] = json!({ "kind": "pure", "psi": [1, 0] });
        assert_eq!(path_of(Scenario::from_value(&v).unwrap_err()), "initial_state.psi");
    }

    #[test]
    fn product_and_mixture_on_bipartite_system() {
        let v = json!({
            "id": "b",
            "system": {
                "subsystem_dims": [2, 2],
                "H": [[0, 0, 0, 0], [0, 1.5, 0, 0], [0, 0, 1, 0], [0, 0, 0, 2.5]],
                "H_parts": [[[0, 0], [0, 1]], [[0, 0], [0, 1.5]]]
            },
            "initial_state": { "kind": "mixture", "components": [
                { "weight": 0.5, "state": { "kind": "pure", "psi": [1, 0, 0, 1] } },
                { "weight": 0.5, "state": { "kind": "product", "factors": [
                    { "kind": "gibbs", "beta": 1.0 },
                    [[0.5, [0.1, 0.1]], [[0.1, -0.1], 0.5]]
                ] } }
            ] },
            "dynamics": { "kind": "sea_composite", "tau": [1.0, 2.0] }
        });
        let sc = Scenario::from_value(&v).unwrap();
        assert_eq!(sc.initial.dim(), 4);
        assert!((linalg::trace(sc.initial.matrix()).re - 1.0).abs() < 1e-14);
        let mut bad = v.clone();
        bad["system"]["subsystem_dims"] = json!([4]);
        let err = Scenario::from_value(&bad).unwrap_err();
        assert_eq!(path_of(err), "system");
    }

    #[test]
    fn expectations_must_be_requested() {
        let mut v = qutrit();
        v["expect"] = json!({ "fail": [3] });
        assert_eq!(path_of(Scenario::from_value(&v).unwrap_err()), "expect.fail[0]");
    }
}
