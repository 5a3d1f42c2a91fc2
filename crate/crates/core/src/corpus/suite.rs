//! The theorem suite: each check measures one inequality or identity on a
//! scenario and records the value, the bound and the margin.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::algebra::{Element, LinearMap};
use crate::condexp::{validate_ce, Axiom, CondExp, Params};
use crate::constants::{
    compute_k, compute_l, k_ratio, kadison_check, pimsner_popa_check, positivity_margin, BlockVector,
    Certificate,
};
use crate::corpus::scenario::{fmt_real, CheckId, Scenario, SCHEMA_VERSION};
use crate::error::Result;
use crate::hilbert::{basic_construction, index_element, jones_tower, stinespring, IndexElement, Stabilization, DEFAULT_DIM_BUDGET};
use crate::inclusion::{max_orthogonal_family, relative_commutant, Embedding};
use crate::tol::{integer_part, Tolerances};

/// Slack for inequalities between the computed constants.
pub const CONSTANT_TOL: f64 = 1e-6;
/// Slack for identities that hold to rounding error.
pub const IDENTITY_TOL: f64 = 1e-8;
pub const DILATION_TOL: f64 = 1e-10;
/// Agreement of the pointwise index with the orbit weights.
pub const POINTWISE_TOL: f64 = 1e-12;

pub const DEFAULT_RESTARTS: usize = 16;
pub const DEFAULT_TOWER_LEVELS: usize = 3;
pub const DEFAULT_KADISON_SAMPLES: usize = 500;
pub const DEFAULT_PIMSNER_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub tol: Tolerances,
    pub seed: u64,
    pub restarts: usize,
    pub tower_levels: usize,
    pub dim_budget: usize,
    pub kadison_samples: usize,
    pub pimsner_samples: usize,
}

impl RunOptions {
    pub fn for_scenario(s: &Scenario) -> Self {
        Self {
            tol: s.tolerances.resolve(),
            seed: s.seed,
            restarts: s.restarts.unwrap_or(DEFAULT_RESTARTS),
            tower_levels: s.tower_levels.unwrap_or(DEFAULT_TOWER_LEVELS),
            dim_budget: DEFAULT_DIM_BUDGET,
            kadison_samples: DEFAULT_KADISON_SAMPLES,
            pimsner_samples: DEFAULT_PIMSNER_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "skipped")]
    Skipped,
    #[serde(rename = "infinite-index")]
    InfiniteIndex,
}

fn ser_real<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_real(*x))
}

fn ser_opt_real<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&fmt_real(*v)),
        None => s.serialize_none(),
    }
}

fn ser_real_map<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let strs: BTreeMap<&str, String> = m.iter().map(|(k, v)| (k.as_str(), fmt_real(*v))).collect();
    strs.serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub id: CheckIdName,
    pub status: Status,
    #[serde(serialize_with = "ser_real_map")]
    pub measured: BTreeMap<String, f64>,
    /// The inequality or identity being checked, in words.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<String>,
    #[serde(serialize_with = "ser_opt_real", skip_serializing_if = "Option::is_none")]
    pub bound_value: Option<f64>,
    /// Distance to failure including the allowed slack; non-negative on pass.
    #[serde(serialize_with = "ser_opt_real", skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub witnesses: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub expected_violation: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A check id that serializes as its snake_case name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckIdName(pub CheckId);

impl Serialize for CheckIdName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.0.as_str())
    }
}

impl CheckRecord {
    fn new(id: CheckId, status: Status) -> Self {
        Self {
            id: CheckIdName(id),
            status,
            measured: BTreeMap::new(),
            bound: None,
            bound_value: None,
            margin: None,
            witnesses: BTreeMap::new(),
            expected_violation: false,
            note: None,
        }
    }

    fn skipped(id: CheckId, note: impl Into<String>) -> Self {
        Self::new(id, Status::Skipped).note(note)
    }

    fn measure(mut self, name: &str, v: f64) -> Self {
        self.measured.insert(name.into(), v);
        self
    }

    fn witness(mut self, name: &str, v: Value) -> Self {
        self.witnesses.insert(name.into(), v);
        self
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.note = Some(n.into());
        self
    }

    /// `measured ≤ bound + slack`.
    fn upper(id: CheckId, text: &str, measured: f64, bound: f64, slack: f64) -> Self {
        let margin = bound + slack - measured;
        let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
        Self {
            bound: Some(text.into()),
            bound_value: Some(bound),
            margin: Some(margin),
            ..Self::new(id, status)
        }
    }

    pub fn id(&self) -> CheckId {
        self.id.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub crate_version: &'static str,
    #[serde(serialize_with = "ser_real")]
    pub tol_abs: f64,
    #[serde(serialize_with = "ser_real")]
    pub tol_rank: f64,
    #[serde(serialize_with = "ser_real")]
    pub tol_support: f64,
    #[serde(serialize_with = "ser_real")]
    pub tol_range: f64,
    pub seed: String,
    pub restarts: String,
    pub tower_levels: String,
    pub dim_budget: String,
    pub kadison_samples: String,
    pub pimsner_samples: String,
}

impl From<&RunOptions> for Environment {
    fn from(o: &RunOptions) -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION"),
            tol_abs: o.tol.abs,
            tol_rank: o.tol.rank,
            tol_support: o.tol.support,
            tol_range: o.tol.range,
            seed: o.seed.to_string(),
            restarts: o.restarts.to_string(),
            tower_levels: o.tower_levels.to_string(),
            dim_budget: o.dim_budget.to_string(),
            kadison_samples: o.kadison_samples.to_string(),
            pimsner_samples: o.pimsner_samples.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema_version: &'static str,
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub checks: Vec<CheckRecord>,
    pub environment: Environment,
}

impl SuiteReport {
    pub fn get(&self, id: CheckId) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id() == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub schema_version: &'static str,
    pub status: Status,
    pub reports: Vec<SuiteReport>,
}

impl BatchReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Fails if anything failed, otherwise reports infinite index if any check
/// did, otherwise passes.
pub fn aggregate(statuses: impl IntoIterator<Item = Status>) -> Status {
    let mut out = Status::Pass;
    for s in statuses {
        match s {
            Status::Fail => return Status::Fail,
            Status::InfiniteIndex => out = Status::InfiniteIndex,
            _ => {}
        }
    }
    out
}

pub fn block_vector_json(v: &BlockVector) -> Value {
    json!({
        "block": v.block.to_string(),
        "vector": v.vector.iter().map(|z| [fmt_real(z.re), fmt_real(z.im)]).collect::<Vec<_>>(),
    })
}

pub fn element_json(x: &Element) -> Value {
    let blocks: Vec<Vec<Vec<[String; 2]>>> = x
        .blocks()
        .iter()
        .map(|m| {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [fmt_real(m[(r, c)].re), fmt_real(m[(r, c)].im)]).collect())
                .collect()
        })
        .collect();
    json!({ "shape": x.shape().blocks().iter().map(ToString::to_string).collect::<Vec<_>>(), "blocks": blocks })
}

/// `ι(e₀₀)` for each block of `B`: one minimal projection of `ι(B)` per
/// equivalence class.
pub fn minimal_projections(emb: &Embedding) -> Vec<Element> {
    let sub = emb.sub_shape();
    (0..sub.num_blocks())
        .map(|j| emb.embed(&Element::matrix_unit(sub, j, 0, 0)).expect("shape by construction"))
        .collect()
}

/// The number of mutually orthogonal pure-state extensions of the state
/// supported on the minimal projection `p ∈ ι(B)`.
pub fn pure_state_extensions(e: &CondExp, p: &Element, tol: f64) -> Result<usize> {
    Ok(max_orthogonal_family(e.embedding(), p, tol)?.family_size)
}

struct Ctx<'a> {
    e: &'a CondExp,
    opts: &'a RunOptions,
    k: Option<Certificate>,
    l: Option<Certificate>,
    index: Option<std::result::Result<IndexElement, String>>,
}

impl<'a> Ctx<'a> {
    fn k(&mut self) -> &Certificate {
        let (e, o) = (self.e, self.opts);
        self.k.get_or_insert_with(|| compute_k(e, o.restarts, o.seed))
    }

    fn l(&mut self) -> &Certificate {
        let e = self.e;
        self.l.get_or_insert_with(|| compute_l(e))
    }

    fn kv(&mut self) -> f64 {
        self.k().value
    }

    fn lv(&mut self) -> f64 {
        self.l().value
    }

    fn finite(&mut self) -> bool {
        self.kv().is_finite() && self.lv().is_finite()
    }

    fn index(&mut self) -> std::result::Result<&IndexElement, &String> {
        let e = self.e;
        self.index
            .get_or_insert_with(|| index_element(e).map_err(|err| err.to_string()))
            .as_ref()
    }
}

const INFINITE_NOTE: &str = "infinite index: the statement needs a finite constant";

pub fn run_suite(scenario: &Scenario, checks: Option<&[CheckId]>, opts: &RunOptions) -> SuiteReport {
    let ids: Vec<CheckId> = match checks {
        Some(c) => c.to_vec(),
        None if scenario.checks.is_empty() => CheckId::default_set(),
        None => scenario.checks.clone(),
    };
    let mut report = SuiteReport {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.name.clone(),
        kind: None,
        status: Status::Pass,
        error: None,
        checks: Vec::new(),
        environment: opts.into(),
    };
    let e = match scenario.build(&opts.tol) {
        Ok(e) => e,
        Err(err) => {
            report.status = Status::Fail;
            report.error = Some(format!("construction failed: {err}"));
            return report;
        }
    };
    report.kind = Some(e.kind().to_string());
    let mut ctx = Ctx {
        e: &e,
        opts,
        k: None,
        l: None,
        index: None,
    };
    for id in ids {
        let mut rec = run_check(&mut ctx, id);
        if scenario.expected_violations.contains(&id) {
            rec = expect_violation(rec);
        }
        report.checks.push(rec);
    }
    report.status = aggregate(report.checks.iter().map(|c| c.status));
    report
}

/// Runs scenarios concurrently; reports come back ordered by scenario name.
pub fn run_batch(
    scenarios: &[Scenario],
    checks: Option<&[CheckId]>,
    options: impl Fn(&Scenario) -> RunOptions + Sync,
) -> BatchReport {
    let mut reports: Vec<SuiteReport> = scenarios
        .par_iter()
        .map(|s| run_suite(s, checks, &options(s)))
        .collect();
    reports.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    BatchReport {
        schema_version: SCHEMA_VERSION,
        status: aggregate(reports.iter().map(|r| r.status)),
        reports,
    }
}

fn expect_violation(mut rec: CheckRecord) -> CheckRecord {
    rec.expected_violation = true;
    match rec.status {
        Status::Fail => {
            rec.status = Status::Pass;
            rec.margin = rec.margin.map(|m| -m);
            rec.bound = rec.bound.map(|b| format!("violation of: {b}"));
            rec.note("expected violation reproduced")
        }
        Status::Pass => {
            rec.status = Status::Fail;
            rec.margin = rec.margin.map(|m| -m);
            rec.note("a violation was expected but the inequality holds")
        }
        _ => rec,
    }
}

fn run_check(ctx: &mut Ctx, id: CheckId) -> CheckRecord {
    match id {
        CheckId::Validate => check_validate(ctx),
        CheckId::KCertificate => check_k_certificate(ctx),
        CheckId::LCertificate => check_l_certificate(ctx),
        CheckId::Sandwich => check_sandwich(ctx),
        CheckId::GapLaw => check_gap_law(ctx),
        CheckId::LEqualsIndexNorm => check_l_equals_index_norm(ctx),
        CheckId::IndexBound => check_index_bound(ctx),
        CheckId::DimBound => check_dim_bound(ctx),
        CheckId::CommutativeDimBound => check_commutative_dim_bound(ctx),
        CheckId::RelativeCommutantBound => check_relative_commutant(ctx),
        CheckId::PmpBound | CheckId::SummandCount | CheckId::PureStateExtensions => check_corners(ctx, id),
        CheckId::Kadison => check_kadison(ctx),
        CheckId::PimsnerPopa => check_pimsner_popa(ctx),
        CheckId::QuasiBasis => check_quasi_basis(ctx),
        CheckId::Tower => check_tower(ctx),
        CheckId::Stinespring => check_stinespring(ctx),
        CheckId::PointwiseIndex => check_pointwise_index(ctx),
        CheckId::LLeFloorKSq => check_l_le_floor_k_sq(ctx),
    }
}

fn check_validate(ctx: &mut Ctx) -> CheckRecord {
    let report = validate_ce(ctx.e, &ctx.opts.tol);
    let failures: Vec<Axiom> = report.checks.iter().filter(|c| !c.passed).map(|c| c.axiom).collect();
    let status = match failures.as_slice() {
        [] => Status::Pass,
        [Axiom::Faithful] => Status::InfiniteIndex,
        _ => Status::Fail,
    };
    let mut rec = CheckRecord::new(CheckId::Validate, status);
    for c in &report.checks {
        rec = rec.measure(&format!("{}_residual", c.axiom), c.residual);
    }
    if let Some(f) = report.first_failure() {
        if let Some(w) = &f.witness {
            rec = rec.witness(&f.axiom.to_string(), element_json(w));
        }
        let names: Vec<String> = failures.iter().map(ToString::to_string).collect();
        rec = rec.note(format!("failed axioms: {}", names.join(", ")));
    }
    rec
}

fn with_witnesses(mut rec: CheckRecord, cert: &Certificate) -> CheckRecord {
    if let Some(x) = &cert.witness_xi {
        rec = rec.witness("xi", block_vector_json(x));
    }
    if let Some(y) = &cert.witness_eta {
        rec = rec.witness("eta", block_vector_json(y));
    }
    rec
}

fn check_k_certificate(ctx: &mut Ctx) -> CheckRecord {
    let (restarts, seed) = (ctx.opts.restarts, ctx.opts.seed);
    let map = ctx.e.map().clone();
    let cert = ctx.k().clone();
    let method = format!("method {:?}, {} restarts", cert.method, cert.restarts_used).to_lowercase();
    if !cert.is_finite() {
        let rec = CheckRecord::new(CheckId::KCertificate, Status::InfiniteIndex).measure("K", cert.value);
        return with_witnesses(rec, &cert).note(method);
    }
    let k = cert.value;
    // upper bound: K·E − id is positive; lower bound: the witness attains K
    let margin = positivity_margin(&map.scaled_minus_identity(k), restarts.clamp(1, 8), seed ^ 0x6b);
    let ratio = match (&cert.witness_xi, &cert.witness_eta) {
        (Some(x), Some(y)) => k_ratio(&map, x, y),
        _ => f64::NAN,
    };
    let slack = IDENTITY_TOL * k.max(1.0);
    let upper_ok = margin.value >= -slack;
    let lower_ok = (ratio - k).abs() <= CONSTANT_TOL * k.max(1.0);
    let status = if upper_ok && lower_ok { Status::Pass } else { Status::Fail };
    let rec = CheckRecord {
        bound: Some("min <η,(K·E − id)(ξξ*)η> >= 0 and witness ratio = K".into()),
        margin: Some((margin.value + slack).min(CONSTANT_TOL * k.max(1.0) - (ratio - k).abs())),
        ..CheckRecord::new(CheckId::KCertificate, status)
    }
    .measure("K", k)
    .measure("positivity_margin", margin.value)
    .measure("witness_ratio", ratio)
    .measure("residual", cert.residual);
    with_witnesses(rec, &cert).note(method)
}

fn check_l_certificate(ctx: &mut Ctx) -> CheckRecord {
    let cert = ctx.l().clone();
    if !cert.is_finite() {
        let rec = CheckRecord::new(CheckId::LCertificate, Status::InfiniteIndex).measure("L", cert.value);
        return with_witnesses(rec, &cert).note("L·E − id is not completely positive for any L");
    }
    let margin = IDENTITY_TOL - cert.residual.abs();
    let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
    let rec = CheckRecord {
        bound: Some("min Choi eigenvalue of L·E − id is 0".into()),
        bound_value: Some(0.0),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::LCertificate, status)
    }
    .measure("L", cert.value)
    .measure("choi_min_eigenvalue", cert.residual);
    with_witnesses(rec, &cert)
}

fn check_sandwich(ctx: &mut Ctx) -> CheckRecord {
    let (k, l) = (ctx.kv(), ctx.lv());
    if !k.is_finite() || !l.is_finite() {
        let status = if k.is_infinite() && l.is_infinite() {
            Status::InfiniteIndex
        } else {
            Status::Fail
        };
        return CheckRecord::new(CheckId::Sandwich, status)
            .measure("K", k)
            .measure("L", l)
            .note("K and L must be finite together");
    }
    let top = k * integer_part(k);
    let margin = (l - k).min(top - l) + CONSTANT_TOL;
    let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
    let rec = CheckRecord {
        bound: Some("K <= L <= K·[K]".into()),
        bound_value: Some(top),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::Sandwich, status)
    }
    .measure("K", k)
    .measure("L", l)
    .measure("K_floor_K", top)
    .measure("L_minus_K_sq", l - k * k);
    if (l - k * k).abs() <= CONSTANT_TOL {
        rec.note("L = K² on this scenario")
    } else {
        rec
    }
}

fn check_gap_law(ctx: &mut Ctx) -> CheckRecord {
    let k = ctx.kv();
    if k.is_infinite() {
        return CheckRecord::new(CheckId::GapLaw, Status::InfiniteIndex).measure("K", k);
    }
    let id = LinearMap::identity(ctx.e.shape());
    let identity_defect = ctx.e.map().distance(&id);
    let is_identity = identity_defect <= ctx.opts.tol.abs;
    let (text, margin) = if is_identity {
        ("E = id and K = 1", CONSTANT_TOL - (k - 1.0).abs())
    } else {
        ("E != id and K >= 2", k - 2.0 + CONSTANT_TOL)
    };
    let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
    CheckRecord {
        bound: Some(text.into()),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::GapLaw, status)
    }
    .measure("K", k)
    .measure("identity_defect", identity_defect)
}

fn index_or_skip(ctx: &mut Ctx, id: CheckId) -> std::result::Result<IndexElement, CheckRecord> {
    if !ctx.finite() {
        return Err(CheckRecord::skipped(id, INFINITE_NOTE));
    }
    match ctx.index() {
        Ok(ind) => Ok(ind.clone()),
        Err(msg) => Err(CheckRecord::new(id, Status::Fail).note(format!("index computation failed: {msg}"))),
    }
}

fn check_l_equals_index_norm(ctx: &mut Ctx) -> CheckRecord {
    let ind = match index_or_skip(ctx, CheckId::LEqualsIndexNorm) {
        Ok(i) => i,
        Err(r) => return r,
    };
    let l = ctx.lv();
    let diff = (l - ind.norm).abs();
    let margin = IDENTITY_TOL - diff;
    let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
    CheckRecord {
        bound: Some("|L − ‖Ind(E)‖| <= 1e-8".into()),
        bound_value: Some(0.0),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::LEqualsIndexNorm, status)
    }
    .measure("L", l)
    .measure("index_norm", ind.norm)
    .measure("difference", diff)
}

fn check_index_bound(ctx: &mut Ctx) -> CheckRecord {
    let ind = match index_or_skip(ctx, CheckId::IndexBound) {
        Ok(i) => i,
        Err(r) => return r,
    };
    let k = ctx.kv();
    let top = k * integer_part(k);
    CheckRecord::upper(CheckId::IndexBound, "‖Ind(E)‖ <= K·[K]", ind.norm, top, CONSTANT_TOL)
        .measure("index_norm", ind.norm)
        .measure("K", k)
}

fn floor_k_or_skip(ctx: &mut Ctx, id: CheckId) -> std::result::Result<f64, CheckRecord> {
    let k = ctx.kv();
    if k.is_finite() {
        Ok(integer_part(k))
    } else {
        Err(CheckRecord::skipped(id, INFINITE_NOTE))
    }
}

fn check_dim_bound(ctx: &mut Ctx) -> CheckRecord {
    let fk = match floor_k_or_skip(ctx, CheckId::DimBound) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let dim_a = ctx.e.shape().dim() as f64;
    let dim_b = ctx.e.sub_shape().dim() as f64;
    let bound = fk * fk * dim_b * dim_b;
    CheckRecord::upper(CheckId::DimBound, "dim A <= [K]²·(dim B)²", dim_a, bound, 0.0)
        .measure("dim_A", dim_a)
        .measure("dim_B", dim_b)
        .measure("floor_K", fk)
}

fn check_commutative_dim_bound(ctx: &mut Ctx) -> CheckRecord {
    if !ctx.e.shape().is_commutative() {
        return CheckRecord::skipped(CheckId::CommutativeDimBound, "A is not commutative");
    }
    let fk = match floor_k_or_skip(ctx, CheckId::CommutativeDimBound) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let dim_a = ctx.e.shape().dim() as f64;
    let dim_b = ctx.e.sub_shape().dim() as f64;
    CheckRecord::upper(CheckId::CommutativeDimBound, "dim A <= [K]·dim B", dim_a, fk * dim_b, 0.0)
        .measure("dim_A", dim_a)
        .measure("dim_B", dim_b)
        .measure("floor_K", fk)
}

fn check_relative_commutant(ctx: &mut Ctx) -> CheckRecord {
    let fk = match floor_k_or_skip(ctx, CheckId::RelativeCommutantBound) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let emb = ctx.e.embedding();
    let rc = relative_commutant(emb, ctx.opts.tol.rank);
    let expected: usize = emb.inclusion_matrix().iter().flatten().map(|l| l * l).sum();
    let center = emb.sub_shape().num_blocks() as f64;
    let dim = rc.dim as f64;
    let mut rec = CheckRecord::upper(
        CheckId::RelativeCommutantBound,
        "dim(B' ∩ A) <= [K]²·dim Z(B)",
        dim,
        fk * fk * center,
        0.0,
    )
    .measure("relative_commutant_dim", dim)
    .measure("multiplicity_square_sum", expected as f64)
    .measure("center_dim_B", center)
    .measure("floor_K", fk);
    if rc.dim != expected {
        rec.status = Status::Fail;
        rec = rec.note("null-space dimension disagrees with the sum of squared multiplicities");
    }
    rec
}

fn check_corners(ctx: &mut Ctx, id: CheckId) -> CheckRecord {
    let fk = match floor_k_or_skip(ctx, id) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let tol = ctx.opts.tol.abs;
    let emb = ctx.e.embedding();
    let mut worst: Option<(usize, usize)> = None;
    for (j, p) in minimal_projections(emb).iter().enumerate() {
        let value = match id {
            CheckId::PmpBound => max_orthogonal_family(emb, p, tol).map(|f| f.corner_dim),
            CheckId::SummandCount => max_orthogonal_family(emb, p, tol).map(|f| f.family_size),
            _ => pure_state_extensions(ctx.e, p, tol),
        };
        match value {
            Ok(v) if worst.is_none_or(|(_, w)| v > w) => worst = Some((j, v)),
            Ok(_) => {}
            Err(err) => return CheckRecord::new(id, Status::Fail).note(err.to_string()),
        }
    }
    let (block, value) = worst.expect("B has at least one block");
    let (text, bound, name) = match id {
        CheckId::PmpBound => ("dim(pAp) <= [K]² for minimal p in B", fk * fk, "corner_dim"),
        CheckId::SummandCount => ("orthogonal summands of p in A <= [K]", fk, "summands"),
        _ => ("orthogonal pure-state extensions <= [K]", fk, "extensions"),
    };
    CheckRecord::upper(id, text, value as f64, bound, 0.0)
        .measure(name, value as f64)
        .measure("floor_K", fk)
        .witness("projection_block_of_B", json!(block.to_string()))
}

fn check_kadison(ctx: &mut Ctx) -> CheckRecord {
    let k = ctx.kv();
    if k.is_infinite() {
        return CheckRecord::skipped(CheckId::Kadison, INFINITE_NOTE);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.opts.seed ^ 0x4ad1);
    let shape = ctx.e.shape();
    let mut left = f64::INFINITY;
    let mut right = f64::INFINITY;
    let mut worst_sample = 0;
    for s in 0..ctx.opts.kadison_samples {
        let a = Element::random_self_adjoint(shape, &mut rng);
        let a = &a * (1.0 / a.operator_norm().max(f64::MIN_POSITIVE));
        let r = kadison_check(ctx.e, k, &a, ctx.opts.tol.abs).expect("sample is self-adjoint");
        left = left.min(r.left_min);
        if r.right_min < right {
            right = r.right_min;
            worst_sample = s;
        }
    }
    let margin = left.min(right) + IDENTITY_TOL;
    let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
    CheckRecord {
        bound: Some("0 <= (E(a) − a)² <= (K − 1)(E(a²) − E(a)²)".into()),
        bound_value: Some(0.0),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::Kadison, status)
    }
    .measure("left_min_eigenvalue", left)
    .measure("right_min_eigenvalue", right)
    .measure("samples", ctx.opts.kadison_samples as f64)
    .witness("worst_sample", json!(worst_sample.to_string()))
}

fn check_pimsner_popa(ctx: &mut Ctx) -> CheckRecord {
    let k = ctx.kv();
    if k.is_infinite() {
        return CheckRecord::skipped(CheckId::PimsnerPopa, INFINITE_NOTE);
    }
    let r = pimsner_popa_check(ctx.e, k, ctx.opts.pimsner_samples, ctx.opts.seed ^ 0x9e9a);
    let margin = r.min_eigenvalue.min(r.norm_margin) + IDENTITY_TOL;
    let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
    CheckRecord {
        bound: Some("a*a <= K(ε + E(a*a)) and ‖a‖² <= K‖E(a*a)‖".into()),
        bound_value: Some(0.0),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::PimsnerPopa, status)
    }
    .measure("min_eigenvalue", r.min_eigenvalue)
    .measure("norm_margin", r.norm_margin)
    .measure("samples", r.samples as f64)
}

fn check_quasi_basis(ctx: &mut Ctx) -> CheckRecord {
    let ind = match index_or_skip(ctx, CheckId::QuasiBasis) {
        Ok(i) => i,
        Err(r) => return r,
    };
    let worst = ind.reconstruction_residual.max(ind.basis_independence);
    let margin = IDENTITY_TOL - worst;
    let status = if margin >= 0.0 && ind.is_central { Status::Pass } else { Status::Fail };
    CheckRecord {
        bound: Some("Σ u E(u* x) = x and Ind independent of the quasi-basis, to 1e-8".into()),
        bound_value: Some(0.0),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::QuasiBasis, status)
    }
    .measure("reconstruction_residual", ind.reconstruction_residual)
    .measure("basis_independence", ind.basis_independence)
    .measure("quasi_basis_size", ind.quasi_basis_size as f64)
    .measure("index_norm", ind.norm)
    .measure("index_min_spectrum", ind.min_spectrum)
    .witness("index_value", element_json(&ind.value))
}

fn check_tower(ctx: &mut Ctx) -> CheckRecord {
    if !ctx.finite() {
        return CheckRecord::skipped(CheckId::Tower, INFINITE_NOTE);
    }
    let o = ctx.opts;
    let tower = match jones_tower(ctx.e, o.tower_levels, o.dim_budget, &o.tol) {
        Ok(t) => t,
        Err(err) => return CheckRecord::new(CheckId::Tower, Status::Fail).note(format!("tower failed: {err}")),
    };
    let base = tower.levels[0].index.norm;
    let mut rec = CheckRecord::new(CheckId::Tower, Status::Pass).measure("levels_built", (tower.levels.len() - 1) as f64);
    let mut worst = 0.0_f64;
    let mut skipped = 0;
    for lvl in &tower.levels {
        let k = lvl.level;
        rec = rec
            .measure(&format!("level{k}.dim"), lvl.algebra_shape.dim() as f64)
            .measure(&format!("level{k}.index_norm"), lvl.index.norm);
        if let Some(r) = lvl.jones_image_residual {
            rec = rec.measure(&format!("level{k}.jones_image_residual"), r);
            worst = worst.max(r);
        }
        if let Some(r) = lvl.projection_defect {
            worst = worst.max(r);
        }
        match &lvl.stabilization {
            Some(Stabilization::Checked { residual, .. }) => {
                let rel = residual / base.max(1.0);
                rec = rec.measure(&format!("level{k}.stabilization_residual"), *residual);
                worst = worst.max(rel).max((lvl.index.norm - base).abs() / base.max(1.0));
            }
            Some(Stabilization::Skipped) => skipped += 1,
            None => {}
        }
    }
    let mut notes = Vec::new();
    if tower.levels.len() > 1 {
        match f1_convention(ctx.e, o.seed) {
            Ok((used, printed)) => {
                rec = rec
                    .measure("f1.a2_a1star_residual", used)
                    .measure("f1.a1_a2_gap", printed);
                worst = worst.max(used);
                notes.push(format!(
                    "F₁(θ_{{a₁,a₂}}) evaluated as a₂·a₁*; the form a₁·a₂ differs by {printed:.3e}"
                ));
            }
            Err(err) => notes.push(format!("F₁ convention not measured: {err}")),
        }
    }
    rec.bound = Some("E_k validated, E_k(e_k) = Ind⁻¹ and Ind(E_k) = Ind(E) at every level, to 1e-8".into());
    rec.bound_value = Some(0.0);
    rec.margin = Some(IDENTITY_TOL - worst);
    if worst > IDENTITY_TOL {
        rec.status = Status::Fail;
    }
    if tower.truncated {
        notes.push(format!("stopped after level {} by the dimension budget", tower.levels.len() - 1));
    }
    if skipped > 0 {
        notes.push(format!(
            "{skipped} level(s) not compared: the previous index is not in the embedded center"
        ));
    }
    if !notes.is_empty() {
        rec = rec.note(notes.join("; "));
    }
    rec
}

/// Relative distances of `F₁(θ_{a₁,a₂})` from `a₂a₁*` and from `a₁a₂` on a
/// random pair.
fn f1_convention(e: &CondExp, seed: u64) -> Result<(f64, f64)> {
    let bc = basic_construction(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf1);
    let a1 = Element::random(e.shape(), &mut rng);
    let a2 = Element::random(e.shape(), &mut rng);
    let f = bc.f1(&bc.theta(&a1, &a2));
    let scale = a1.frobenius_norm() * a2.frobenius_norm();
    let used = f.distance(&(&a2 * &a1.adjoint())) / scale;
    let printed = f.distance(&(&a1 * &a2)) / scale;
    Ok((used, printed))
}

fn check_stinespring(ctx: &mut Ctx) -> CheckRecord {
    if !ctx.finite() {
        return CheckRecord::skipped(CheckId::Stinespring, INFINITE_NOTE);
    }
    let s = match stinespring(ctx.e) {
        Ok(s) => s,
        Err(err) => {
            return CheckRecord::new(CheckId::Stinespring, Status::Fail).note(format!("dilation failed: {err}"))
        }
    };
    let worst = s.residual.max(s.isometry_residual);
    let margin = DILATION_TOL - worst;
    let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
    let mut rec = CheckRecord {
        bound: Some("V*π(a)V = E(a) and V*V = 1, to 1e-10".into()),
        bound_value: Some(0.0),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::Stinespring, status)
    }
    .measure("residual", s.residual)
    .measure("isometry_residual", s.isometry_residual)
    .measure("module_dim", s.module_dim as f64)
    .measure("dim_A1", s.basic().shape().dim() as f64);
    if let Some(g) = s.gram_rank {
        rec = rec.measure("gram_form_rank", g as f64);
    }
    rec
}

fn check_pointwise_index(ctx: &mut Ctx) -> CheckRecord {
    let (orbits, weights) = match ctx.e.params() {
        Params::GroupAverage { orbits, point_weights, .. } => (orbits.clone(), point_weights.clone()),
        _ => return CheckRecord::skipped(CheckId::PointwiseIndex, "only defined for group averages"),
    };
    let ind = match index_or_skip(ctx, CheckId::PointwiseIndex) {
        Ok(i) => i,
        Err(r) => return r,
    };
    let (k, l) = (ctx.kv(), ctx.lv());
    let mut deviation = 0.0_f64;
    let mut expected_max = 0.0_f64;
    for (x, w) in weights.iter().enumerate() {
        let expected = 1.0 / w;
        expected_max = expected_max.max(expected);
        let got = ind.value.block(x)[(0, 0)];
        deviation = deviation.max((got.re - expected).abs() / expected + got.im.abs());
    }
    let fixed = orbits.iter().filter(|o| o.len() == 1).count();
    let moved: usize = orbits.iter().filter(|o| o.len() > 1).map(Vec::len).sum();
    let const_dev = (k - expected_max).abs().max((l - expected_max).abs());
    let margin = (POINTWISE_TOL - deviation).min(CONSTANT_TOL - const_dev);
    let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
    CheckRecord {
        bound: Some("Ind(x) = 1/w(x) (orbit size when uniform) and K = L = max Ind".into()),
        bound_value: Some(expected_max),
        margin: Some(margin),
        ..CheckRecord::new(CheckId::PointwiseIndex, status)
    }
    .measure("pointwise_deviation", deviation)
    .measure("fixed_points", fixed as f64)
    .measure("moved_points", moved as f64)
    .measure("K", k)
    .measure("L", l)
    .note("finite surrogate: pointwise index of a finite group action on a discretized space")
}

fn check_l_le_floor_k_sq(ctx: &mut Ctx) -> CheckRecord {
    if !ctx.finite() {
        return CheckRecord::skipped(CheckId::LLeFloorKSq, INFINITE_NOTE);
    }
    let (k, l) = (ctx.kv(), ctx.lv());
    let fk = integer_part(k);
    CheckRecord::upper(CheckId::LLeFloorKSq, "L <= [K]²", l, fk * fk, CONSTANT_TOL)
        .measure("K", k)
        .measure("L", l)
        .measure("floor_K_squared", fk * fk)
}
