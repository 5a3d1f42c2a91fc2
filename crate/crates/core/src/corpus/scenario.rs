//! The scenario document: a versioned JSON file with every number written as
//! a decimal string.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraShape, LinearMap};
use crate::condexp::{
    abelian_average_ce, tensor_state_ce, trace_ce, weighted_corner_ce, CondExp,
};
use crate::error::{Error, Result};
use crate::inclusion::Embedding;
use crate::linalg::{c, CMat};
use crate::tol::Tolerances;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckId {
    Validate,
    KCertificate,
    LCertificate,
    Sandwich,
    GapLaw,
    LEqualsIndexNorm,
    IndexBound,
    DimBound,
    CommutativeDimBound,
    RelativeCommutantBound,
    PmpBound,
    SummandCount,
    PureStateExtensions,
    Kadison,
    PimsnerPopa,
    QuasiBasis,
    Tower,
    Stinespring,
    PointwiseIndex,
    LLeFloorKSq,
}

impl CheckId {
    pub const ALL: [CheckId; 20] = [
        CheckId::Validate,
        CheckId::KCertificate,
        CheckId::LCertificate,
        CheckId::Sandwich,
        CheckId::GapLaw,
        CheckId::LEqualsIndexNorm,
        CheckId::IndexBound,
        CheckId::DimBound,
        CheckId::CommutativeDimBound,
        CheckId::RelativeCommutantBound,
        CheckId::PmpBound,
        CheckId::SummandCount,
        CheckId::PureStateExtensions,
        CheckId::Kadison,
        CheckId::PimsnerPopa,
        CheckId::QuasiBasis,
        CheckId::Tower,
        CheckId::Stinespring,
        CheckId::PointwiseIndex,
        CheckId::LLeFloorKSq,
    ];

    /// Every check whose statement is a theorem. `l_le_floor_k_sq` is left
    /// out because it is false in general.
    pub fn default_set() -> Vec<CheckId> {
        Self::ALL
            .iter()
            .copied()
            .filter(|&c| c != CheckId::LLeFloorKSq)
            .collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::Validate => "validate",
            CheckId::KCertificate => "k_certificate",
            CheckId::LCertificate => "l_certificate",
            CheckId::Sandwich => "sandwich",
            CheckId::GapLaw => "gap_law",
            CheckId::LEqualsIndexNorm => "l_equals_index_norm",
            CheckId::IndexBound => "index_bound",
            CheckId::DimBound => "dim_bound",
            CheckId::CommutativeDimBound => "commutative_dim_bound",
            CheckId::RelativeCommutantBound => "relative_commutant_bound",
            CheckId::PmpBound => "pmp_bound",
            CheckId::SummandCount => "summand_count",
            CheckId::PureStateExtensions => "pure_state_extensions",
            CheckId::Kadison => "kadison",
            CheckId::PimsnerPopa => "pimsner_popa",
            CheckId::QuasiBasis => "quasi_basis",
            CheckId::Tower => "tower",
            CheckId::Stinespring => "stinespring",
            CheckId::PointwiseIndex => "pointwise_index",
            CheckId::LLeFloorKSq => "l_le_floor_k_sq",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Scenario(format!("unknown check id `{s}`")))
    }
}

/// Parses a comma-separated list of check ids.
pub fn parse_check_list(s: &str) -> Result<Vec<CheckId>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(CheckId::from_str)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpec {
    pub sub_blocks: Vec<usize>,
    pub amb_blocks: Vec<usize>,
    pub inclusion: Vec<Vec<usize>>,
    pub unitaries: Option<Vec<CMat>>,
}

impl EmbeddingSpec {
    pub fn build(&self) -> Result<Embedding> {
        Embedding::new(
            AlgebraShape::new(self.sub_blocks.clone())?,
            AlgebraShape::new(self.amb_blocks.clone())?,
            self.inclusion.clone(),
            self.unitaries.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExpectationSpec {
    Trace {
        embedding: EmbeddingSpec,
        weights: Vec<f64>,
    },
    TensorState {
        h_dim: usize,
        density: CMat,
    },
    WeightedCorner {
        n_blocks: Vec<usize>,
        lambda: f64,
    },
    /// Averaging over the group generated by commuting permutations of
    /// `{0, …, n-1}`.
    GroupAverage {
        n: usize,
        generators: Vec<Vec<usize>>,
        weights: Option<Vec<f64>>,
    },
    /// A dense map on the block coordinates of the ambient algebra.
    Custom {
        embedding: EmbeddingSpec,
        map: CMat,
    },
}

/// Optional overrides of the default tolerance record.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ToleranceOverrides {
    pub abs: Option<f64>,
    pub rank: Option<f64>,
    pub support: Option<f64>,
    pub range: Option<f64>,
}

impl ToleranceOverrides {
    pub fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            abs: self.abs.unwrap_or(d.abs),
            rank: self.rank.unwrap_or(d.rank),
            support: self.support.unwrap_or(d.support),
            range: self.range.unwrap_or(d.range),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub expectation: ExpectationSpec,
    pub tolerances: ToleranceOverrides,
    pub restarts: Option<usize>,
    pub tower_levels: Option<usize>,
    pub checks: Vec<CheckId>,
    /// Checks whose statement is expected to fail on this scenario.
    pub expected_violations: Vec<CheckId>,
}

impl Scenario {
    pub fn build(&self, tol: &Tolerances) -> Result<CondExp> {
        match &self.expectation {
            ExpectationSpec::Trace { embedding, weights } => trace_ce(&embedding.build()?, weights, tol),
            ExpectationSpec::TensorState { h_dim, density } => tensor_state_ce(*h_dim, density, tol),
            ExpectationSpec::WeightedCorner { n_blocks, lambda } => {
                weighted_corner_ce(&AlgebraShape::new(n_blocks.clone())?, *lambda, tol)
            }
            ExpectationSpec::GroupAverage { n, generators, weights } => {
                abelian_average_ce(*n, generators, weights.as_deref(), tol)
            }
            ExpectationSpec::Custom { embedding, map } => {
                let emb = embedding.build()?;
                let shape = emb.amb_shape().clone();
                let map = LinearMap::from_matrix(shape.clone(), shape, map.clone())?;
                CondExp::custom_unchecked(emb, map)
            }
        }
    }

    pub fn to_json(&self) -> String {
        let raw = RawScenario::from(self);
        let mut s = serde_json::to_string_pretty(&raw).expect("scenario serializes");
        s.push('\n');
        s
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario =
        serde_json::from_str(text).map_err(|e| Error::Scenario(format!("schema violation: {e}")))?;
    let scenario = raw.into_scenario()?;
    if let ExpectationSpec::Trace { embedding, .. } | ExpectationSpec::Custom { embedding, .. } =
        &scenario.expectation
    {
        embedding.build()?;
    }
    Ok(scenario)
}

/// Formats a real so that parsing it back yields the same bits.
pub fn fmt_real(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// Accepts decimal notation and exact fractions `p/q`.
fn parse_real(s: &str, field: &str) -> Result<f64> {
    let bad = || Error::Scenario(format!("field `{field}`: `{s}` is not a finite decimal number"));
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            p / q
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_uint<T: FromStr>(s: &str, field: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Scenario(format!("field `{field}`: `{s}` is not a non-negative integer")))
}

fn parse_uints(v: &[String], field: &str) -> Result<Vec<usize>> {
    v.iter()
        .enumerate()
        .map(|(i, s)| parse_uint(s, &format!("{field}[{i}]")))
        .collect()
}

fn parse_reals(v: &[String], field: &str) -> Result<Vec<f64>> {
    v.iter()
        .enumerate()
        .map(|(i, s)| parse_real(s, &format!("{field}[{i}]")))
        .collect()
}

type RawMatrix = Vec<Vec<[String; 2]>>;

fn parse_matrix(rows: &RawMatrix, field: &str) -> Result<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let mut out = CMat::zeros(n, m);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Scenario(format!(
                "field `{field}`: row {r} has {} entries, expected {m}",
                row.len()
            )));
        }
        for (k, [re, im]) in row.iter().enumerate() {
            let f = format!("{field}[{r}][{k}]");
            out[(r, k)] = c(parse_real(re, &f)?, parse_real(im, &f)?);
        }
    }
    Ok(out)
}

fn fmt_matrix(m: &CMat) -> RawMatrix {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|k| [fmt_real(m[(r, k)].re), fmt_real(m[(r, k)].im)])
                .collect()
        })
        .collect()
}

fn strs<T: ToString>(v: &[T]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

fn reals(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| fmt_real(x)).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: String,
    name: String,
    seed: String,
    expectation: RawExpectation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerances: Option<RawTolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    restarts: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tower_levels: Option<String>,
    checks: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    expected_violations: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    abs: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmbedding {
    sub_blocks: Vec<String>,
    amb_blocks: Vec<String>,
    inclusion: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unitaries: Option<Vec<RawMatrix>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawExpectation {
    Trace {
        embedding: RawEmbedding,
        weights: Vec<String>,
    },
    TensorState {
        h_dim: String,
        density: RawMatrix,
    },
    WeightedCorner {
        n_blocks: Vec<String>,
        lambda: String,
    },
    GroupAverage {
        n: String,
        generators: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<String>>,
    },
    Custom {
        embedding: RawEmbedding,
        map: RawMatrix,
    },
}

impl From<&EmbeddingSpec> for RawEmbedding {
    fn from(e: &EmbeddingSpec) -> Self {
        Self {
            sub_blocks: strs(&e.sub_blocks),
            amb_blocks: strs(&e.amb_blocks),
            inclusion: e.inclusion.iter().map(|r| strs(r)).collect(),
            unitaries: e.unitaries.as_ref().map(|us| us.iter().map(fmt_matrix).collect()),
        }
    }
}

impl RawEmbedding {
    fn parse(&self, field: &str) -> Result<EmbeddingSpec> {
        let inclusion = self
            .inclusion
            .iter()
            .enumerate()
            .map(|(i, r)| parse_uints(r, &format!("{field}.inclusion[{i}]")))
            .collect::<Result<_>>()?;
        let unitaries = match &self.unitaries {
            None => None,
            Some(us) => Some(
                us.iter()
                    .enumerate()
                    .map(|(i, u)| parse_matrix(u, &format!("{field}.unitaries[{i}]")))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(EmbeddingSpec {
            sub_blocks: parse_uints(&self.sub_blocks, &format!("{field}.sub_blocks"))?,
            amb_blocks: parse_uints(&self.amb_blocks, &format!("{field}.amb_blocks"))?,
            inclusion,
            unitaries,
        })
    }
}

impl From<&Scenario> for RawScenario {
    fn from(s: &Scenario) -> Self {
        let expectation = match &s.expectation {
            ExpectationSpec::Trace { embedding, weights } => RawExpectation::Trace {
                embedding: embedding.into(),
                weights: reals(weights),
            },
            ExpectationSpec::TensorState { h_dim, density } => RawExpectation::TensorState {
                h_dim: h_dim.to_string(),
                density: fmt_matrix(density),
            },
            ExpectationSpec::WeightedCorner { n_blocks, lambda } => RawExpectation::WeightedCorner {
                n_blocks: strs(n_blocks),
                lambda: fmt_real(*lambda),
            },
            ExpectationSpec::GroupAverage { n, generators, weights } => RawExpectation::GroupAverage {
                n: n.to_string(),
                generators: generators.iter().map(|g| strs(g)).collect(),
                weights: weights.as_deref().map(reals),
            },
            ExpectationSpec::Custom { embedding, map } => RawExpectation::Custom {
                embedding: embedding.into(),
                map: fmt_matrix(map),
            },
        };
        let t = &s.tolerances;
        let tolerances = (*t != ToleranceOverrides::default()).then(|| RawTolerances {
            abs: t.abs.map(fmt_real),
            rank: t.rank.map(fmt_real),
            support: t.support.map(fmt_real),
            range: t.range.map(fmt_real),
        });
        Self {
            schema_version: SCHEMA_VERSION.into(),
            name: s.name.clone(),
            seed: s.seed.to_string(),
            expectation,
            tolerances,
            restarts: s.restarts.map(|r| r.to_string()),
            tower_levels: s.tower_levels.map(|r| r.to_string()),
            checks: s.checks.iter().map(|c| c.as_str().to_string()).collect(),
            expected_violations: s.expected_violations.iter().map(|c| c.as_str().to_string()).collect(),
        }
    }
}

fn parse_checks(v: &[String], field: &str) -> Result<Vec<CheckId>> {
    v.iter()
        .map(|s| {
            CheckId::from_str(s).map_err(|_| Error::Scenario(format!("field `{field}`: unknown check id `{s}`")))
        })
        .collect()
}

impl RawScenario {
    fn into_scenario(self) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "field `schema_version`: unsupported version `{}`, expected `{SCHEMA_VERSION}`",
                self.schema_version
            )));
        }
        let expectation = match &self.expectation {
            RawExpectation::Trace { embedding, weights } => ExpectationSpec::Trace {
                embedding: embedding.parse("expectation.embedding")?,
                weights: parse_reals(weights, "expectation.weights")?,
            },
            RawExpectation::TensorState { h_dim, density } => ExpectationSpec::TensorState {
                h_dim: parse_uint(h_dim, "expectation.h_dim")?,
                density: parse_matrix(density, "expectation.density")?,
            },
            RawExpectation::WeightedCorner { n_blocks, lambda } => ExpectationSpec::WeightedCorner {
                n_blocks: parse_uints(n_blocks, "expectation.n_blocks")?,
                lambda: parse_real(lambda, "expectation.lambda")?,
            },
            RawExpectation::GroupAverage { n, generators, weights } => ExpectationSpec::GroupAverage {
                n: parse_uint(n, "expectation.n")?,
                generators: generators
                    .iter()
                    .enumerate()
                    .map(|(i, g)| parse_uints(g, &format!("expectation.generators[{i}]")))
                    .collect::<Result<_>>()?,
                weights: weights
                    .as_deref()
                    .map(|w| parse_reals(w, "expectation.weights"))
                    .transpose()?,
            },
            RawExpectation::Custom { embedding, map } => ExpectationSpec::Custom {
                embedding: embedding.parse("expectation.embedding")?,
                map: parse_matrix(map, "expectation.map")?,
            },
        };
        let opt_real = |v: &Option<String>, f: &str| v.as_deref().map(|s| parse_real(s, f)).transpose();
        let tolerances = match &self.tolerances {
            None => ToleranceOverrides::default(),
            Some(t) => ToleranceOverrides {
                abs: opt_real(&t.abs, "tolerances.abs")?,
                rank: opt_real(&t.rank, "tolerances.rank")?,
                support: opt_real(&t.support, "tolerances.support")?,
                range: opt_real(&t.range, "tolerances.range")?,
            },
        };
        Ok(Scenario {
            name: self.name,
            seed: parse_uint(&self.seed, "seed")?,
            expectation,
            tolerances,
            restarts: self.restarts.as_deref().map(|s| parse_uint(s, "restarts")).transpose()?,
            tower_levels: self
                .tower_levels
                .as_deref()
                .map(|s| parse_uint(s, "tower_levels"))
                .transpose()?,
            checks: parse_checks(&self.checks, "checks")?,
            expected_violations: parse_checks(&self.expected_violations, "expected_violations")?,
        })
    }
}
