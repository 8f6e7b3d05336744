//! JSON persistence: system files, instance descriptors, Gramian caches with
//! checksums, and replayable run records.
//!
//! All serialization goes through [`to_json_string`], which prints every
//! finite float with 17 significant digits (`{:.16e}`) so that parsing the
//! file recovers bit-identical values. Fields that can legitimately be
//! `±∞` (an uncontrollable set's exact metric, a saturated bound
//! component) serialize as the strings `"inf"` / `"-inf"` instead, since
//! JSON has no infinity literal.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::{self, DeserializeOwned, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::OracleResult;
use crate::instances::{
    chain_network, erdos_renyi_system, hitting_set_system, HittingSetInstance, InstanceError,
    RandomNetworkConfig,
};
use crate::linalg::{LinalgError, PsdMatrix};
use crate::placement::{BisectionIteration, GreedyStep, GreedyTrace, PlacementResult};
use crate::system::{
    ActuatorSet, GramianMethod, Horizon, LinearSystem, NodeGramianSet, SystemError,
};

/// Version stamped into cache files and run records.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Errors from loading or saving artifact files.
#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("checksum mismatch: file records {recorded}, content hashes to {computed}")]
    ChecksumMismatch { recorded: String, computed: String },
    #[error("invalid file contents: {0}")]
    Schema(String),
}

// ---------------------------------------------------------------------------
// 17-significant-digit JSON writer
// ---------------------------------------------------------------------------

/// Prints floats as `d.dddddddddddddddde±x` — 17 significant digits, enough
/// to reproduce any `f64` exactly on parse.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// Serializes any value to single-line JSON with lossless float formatting.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, IoError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Parses a value previously written by [`to_json_string`] (or any
/// schema-compatible JSON).
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    Ok(serde_json::from_str(text)?)
}

fn write_file<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = to_json_string(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })
}

fn read_file<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })?;
    from_json_str(&text)
}

// ---------------------------------------------------------------------------
// Floats that may be infinite
// ---------------------------------------------------------------------------

/// Field codec for floats that may be `±∞`: finite values stay JSON
/// numbers; infinities become the strings `"inf"` / `"-inf"`.
mod maybe_inf {
    use super::*;

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            ser.serialize_f64(*value)
        } else if value.is_nan() {
            Err(serde::ser::Error::custom("NaN is not representable"))
        } else if *value > 0.0 {
            ser.serialize_str("inf")
        } else {
            ser.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        struct MaybeInfVisitor;

        impl Visitor<'_> for MaybeInfVisitor {
            type Value = f64;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, \"inf\", or \"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    other => Err(E::custom(format!("unrecognized float string {other:?}"))),
                }
            }
        }

        de.deserialize_any(MaybeInfVisitor)
    }
}

// ---------------------------------------------------------------------------
// System files
// ---------------------------------------------------------------------------

/// JSON image of a [`Horizon`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HorizonDto {
    Finite { t0: f64, t1: f64 },
    Infinite,
}

impl From<Horizon> for HorizonDto {
    fn from(h: Horizon) -> Self {
        match h {
            Horizon::Finite { t0, t1 } => HorizonDto::Finite { t0, t1 },
            Horizon::Infinite => HorizonDto::Infinite,
        }
    }
}

impl From<HorizonDto> for Horizon {
    fn from(h: HorizonDto) -> Self {
        match h {
            HorizonDto::Finite { t0, t1 } => Horizon::Finite { t0, t1 },
            HorizonDto::Infinite => Horizon::Infinite,
        }
    }
}

/// On-disk system description: `{"n", "A" (row-major), "horizon"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub horizon: HorizonDto,
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, IoError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(IoError::Schema(format!(
            "matrix must be {n}×{n} to match \"n\""
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl SystemFile {
    pub fn from_system(sys: &LinearSystem) -> Self {
        SystemFile {
            n: sys.n(),
            a: matrix_to_rows(sys.a()),
            horizon: sys.horizon().into(),
        }
    }

    pub fn into_system(self) -> Result<LinearSystem, IoError> {
        let a = rows_to_matrix(&self.a, self.n)?;
        Ok(LinearSystem::new(a, self.horizon.into())?)
    }
}

pub fn save_system(path: impl AsRef<Path>, sys: &LinearSystem) -> Result<(), IoError> {
    write_file(path.as_ref(), &SystemFile::from_system(sys))
}

pub fn load_system(path: impl AsRef<Path>) -> Result<LinearSystem, IoError> {
    read_file::<SystemFile>(path.as_ref())?.into_system()
}

// ---------------------------------------------------------------------------
// Instance descriptors
// ---------------------------------------------------------------------------

/// A named instance family plus its parameters; resolves to a full system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InstanceDescriptor {
    Chain { n: usize },
    Er { n: usize, seed: u64 },
    HittingSet { m: usize, sets: Vec<Vec<usize>> },
}

impl InstanceDescriptor {
    /// Builds the system this descriptor names. Deterministic: `er`
    /// descriptors regenerate the identical network from their seed.
    pub fn resolve(&self) -> Result<LinearSystem, IoError> {
        match self {
            InstanceDescriptor::Chain { n } => {
                if *n == 0 {
                    return Err(IoError::Schema("chain requires n >= 1".into()));
                }
                Ok(chain_network(*n))
            }
            InstanceDescriptor::Er { n, seed } => {
                let net = erdos_renyi_system(&RandomNetworkConfig { n: *n, seed: *seed })?;
                Ok(net.system)
            }
            InstanceDescriptor::HittingSet { m, sets } => {
                let inst = HittingSetInstance::new(*m, sets.clone())?;
                Ok(hitting_set_system(&inst)?.system)
            }
        }
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<InstanceDescriptor, IoError> {
    read_file(path.as_ref())
}

pub fn save_instance(
    path: impl AsRef<Path>,
    descriptor: &InstanceDescriptor,
) -> Result<(), IoError> {
    write_file(path.as_ref(), descriptor)
}

// ---------------------------------------------------------------------------
// Gramian cache files
// ---------------------------------------------------------------------------

/// On-disk Gramian cache: the system container plus per-node matrices, the
/// producing method and tool version, per-node residuals when the method
/// reports them, and a SHA-256 content checksum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramianCacheFile {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub horizon: HorizonDto,
    pub method_tag: String,
    pub tool_version: String,
    /// Descriptor the system was generated from, when it came from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceDescriptor>,
    pub per_node: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<f64>>,
    pub checksum: String,
}

/// SHA-256 over the payload (dimension, state matrix, horizon, method tag,
/// originating descriptor, per-node matrices), with floats hashed as
/// big-endian IEEE bits so the digest is exactly as strict as bit-identity.
fn cache_digest(
    n: usize,
    a: &[Vec<f64>],
    horizon: HorizonDto,
    method_tag: &str,
    instance: Option<&InstanceDescriptor>,
    per_node: &[Vec<Vec<f64>>],
) -> String {
    let mut hasher = Sha256::new();
    hasher.update((n as u64).to_be_bytes());
    match horizon {
        HorizonDto::Finite { t0, t1 } => {
            hasher.update([1u8]);
            hasher.update(t0.to_bits().to_be_bytes());
            hasher.update(t1.to_bits().to_be_bytes());
        }
        HorizonDto::Infinite => hasher.update([2u8]),
    }
    hasher.update(method_tag.as_bytes());
    if let Some(desc) = instance {
        hasher.update(
            serde_json::to_vec(desc).expect("descriptors serialize infallibly"),
        );
    }
    for rows in std::iter::once(a).chain(per_node.iter().map(|m| &m[..])) {
        for row in rows {
            for &x in row {
                hasher.update(x.to_bits().to_be_bytes());
            }
        }
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use fmt::Write as _;
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    hex
}

impl GramianCacheFile {
    pub fn from_gramians(
        gramians: &NodeGramianSet,
        instance: Option<&InstanceDescriptor>,
    ) -> Self {
        let sys = gramians.system();
        let n = sys.n();
        let a = matrix_to_rows(sys.a());
        let horizon: HorizonDto = sys.horizon().into();
        let method_tag = gramians.method().tag().to_string();
        let per_node: Vec<Vec<Vec<f64>>> = gramians
            .nodes()
            .iter()
            .map(|w| matrix_to_rows(w.matrix()))
            .collect();
        let checksum = cache_digest(n, &a, horizon, &method_tag, instance, &per_node);
        GramianCacheFile {
            n,
            a,
            horizon,
            method_tag,
            tool_version: TOOL_VERSION.to_string(),
            instance: instance.cloned(),
            per_node,
            residuals: gramians.residuals().map(<[f64]>::to_vec),
            checksum,
        }
    }

    /// Validates the checksum and rebuilds the Gramian set, re-running the
    /// symmetry/PSD checks on every stored matrix and the node-sum
    /// consistency check.
    pub fn into_gramians(self) -> Result<NodeGramianSet, IoError> {
        let computed = cache_digest(
            self.n,
            &self.a,
            self.horizon,
            &self.method_tag,
            self.instance.as_ref(),
            &self.per_node,
        );
        if computed != self.checksum {
            return Err(IoError::ChecksumMismatch {
                recorded: self.checksum,
                computed,
            });
        }
        let method = match self.method_tag.as_str() {
            "finite-horizon" => GramianMethod::FiniteHorizon,
            "infinite-horizon" => GramianMethod::InfiniteHorizon,
            other => {
                return Err(IoError::Schema(format!("unknown method_tag {other:?}")));
            }
        };
        let horizon: Horizon = self.horizon.into();
        match (method, horizon) {
            (GramianMethod::FiniteHorizon, Horizon::Finite { .. })
            | (GramianMethod::InfiniteHorizon, Horizon::Infinite) => {}
            _ => {
                return Err(IoError::Schema(
                    "method_tag does not match the stored horizon".into(),
                ));
            }
        }
        let a = rows_to_matrix(&self.a, self.n)?;
        let system = LinearSystem::new(a, horizon)?;
        if self.per_node.len() != self.n {
            return Err(IoError::Schema(format!(
                "expected {} per-node matrices, found {}",
                self.n,
                self.per_node.len()
            )));
        }
        let nodes = self
            .per_node
            .iter()
            .map(|rows| Ok(PsdMatrix::new(rows_to_matrix(rows, self.n)?)?))
            .collect::<Result<Vec<_>, IoError>>()?;
        if let Some(res) = &self.residuals {
            if res.len() != self.n {
                return Err(IoError::Schema(format!(
                    "expected {} residuals, found {}",
                    self.n,
                    res.len()
                )));
            }
        }
        Ok(NodeGramianSet::from_parts(
            system,
            method,
            nodes,
            self.residuals,
        )?)
    }
}

pub fn save_gramian_cache(
    path: impl AsRef<Path>,
    gramians: &NodeGramianSet,
    instance: Option<&InstanceDescriptor>,
) -> Result<(), IoError> {
    write_file(
        path.as_ref(),
        &GramianCacheFile::from_gramians(gramians, instance),
    )
}

/// Reads a cache file without unpacking it (checksum not yet verified);
/// use [`GramianCacheFile::into_gramians`] to validate and unpack.
pub fn load_cache_file(path: impl AsRef<Path>) -> Result<GramianCacheFile, IoError> {
    read_file(path.as_ref())
}

pub fn load_gramian_cache(path: impl AsRef<Path>) -> Result<NodeGramianSet, IoError> {
    load_cache_file(path)?.into_gramians()
}

// ---------------------------------------------------------------------------
// Result DTOs
// ---------------------------------------------------------------------------

/// JSON image of an [`ActuatorSet`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActuatorSetDto {
    pub members: Vec<usize>,
    pub n: usize,
}

impl From<&ActuatorSet> for ActuatorSetDto {
    fn from(set: &ActuatorSet) -> Self {
        ActuatorSetDto {
            members: set.members().to_vec(),
            n: set.n(),
        }
    }
}

impl TryFrom<ActuatorSetDto> for ActuatorSet {
    type Error = IoError;

    fn try_from(dto: ActuatorSetDto) -> Result<Self, IoError> {
        Ok(ActuatorSet::new(dto.members, dto.n)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyStepDto {
    pub node: usize,
    pub gain: f64,
    pub metric_after: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GreedyTraceDto {
    pub steps: Vec<GreedyStepDto>,
    pub evaluations: usize,
}

/// One bisection log entry; `eps` steps come from the ε-search of the
/// bounded-energy solver, `energy` steps from the outer budget search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BisectionIterationDto {
    Eps {
        eps: f64,
        cardinality: usize,
        #[serde(with = "maybe_inf")]
        gap: f64,
    },
    Energy {
        e_bound: f64,
        cardinality: usize,
        #[serde(with = "maybe_inf")]
        achieved: f64,
    },
}

/// JSON image of a [`PlacementResult`], including the full greedy trace and
/// bisection log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementResultDto {
    pub delta: ActuatorSetDto,
    pub metric_eps: f64,
    #[serde(with = "maybe_inf")]
    pub metric_exact: f64,
    pub eps_used: f64,
    pub e_used: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_f: Option<f64>,
    pub controllable: bool,
    pub trace: GreedyTraceDto,
    pub iterations: Vec<BisectionIterationDto>,
}

impl From<&PlacementResult> for PlacementResultDto {
    fn from(r: &PlacementResult) -> Self {
        PlacementResultDto {
            delta: (&r.delta).into(),
            metric_eps: r.metric_eps,
            metric_exact: r.metric_exact,
            eps_used: r.eps_used,
            e_used: r.e_used,
            bound_f: r.bound_f,
            controllable: r.controllable,
            trace: GreedyTraceDto {
                steps: r
                    .trace
                    .steps
                    .iter()
                    .map(|s| GreedyStepDto {
                        node: s.node,
                        gain: s.gain,
                        metric_after: s.metric_after,
                    })
                    .collect(),
                evaluations: r.trace.evaluations,
            },
            iterations: r
                .iterations
                .iter()
                .map(|it| match *it {
                    BisectionIteration::Eps {
                        eps,
                        cardinality,
                        gap,
                    } => BisectionIterationDto::Eps {
                        eps,
                        cardinality,
                        gap,
                    },
                    BisectionIteration::Energy {
                        e_bound,
                        cardinality,
                        achieved,
                    } => BisectionIterationDto::Energy {
                        e_bound,
                        cardinality,
                        achieved,
                    },
                })
                .collect(),
        }
    }
}

impl TryFrom<PlacementResultDto> for PlacementResult {
    type Error = IoError;

    fn try_from(dto: PlacementResultDto) -> Result<Self, IoError> {
        Ok(PlacementResult {
            delta: dto.delta.try_into()?,
            metric_eps: dto.metric_eps,
            metric_exact: dto.metric_exact,
            eps_used: dto.eps_used,
            e_used: dto.e_used,
            bound_f: dto.bound_f,
            controllable: dto.controllable,
            trace: GreedyTrace {
                steps: dto
                    .trace
                    .steps
                    .iter()
                    .map(|s| GreedyStep {
                        node: s.node,
                        gain: s.gain,
                        metric_after: s.metric_after,
                    })
                    .collect(),
                evaluations: dto.trace.evaluations,
            },
            iterations: dto
                .iterations
                .iter()
                .map(|it| match *it {
                    BisectionIterationDto::Eps {
                        eps,
                        cardinality,
                        gap,
                    } => BisectionIteration::Eps {
                        eps,
                        cardinality,
                        gap,
                    },
                    BisectionIterationDto::Energy {
                        e_bound,
                        cardinality,
                        achieved,
                    } => BisectionIteration::Energy {
                        e_bound,
                        cardinality,
                        achieved,
                    },
                })
                .collect(),
        })
    }
}

/// JSON image of an [`OracleResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResultDto {
    pub optimal_set: ActuatorSetDto,
    pub optimal_value: f64,
    pub subsets_examined: usize,
}

impl From<&OracleResult> for OracleResultDto {
    fn from(r: &OracleResult) -> Self {
        OracleResultDto {
            optimal_set: (&r.optimal_set).into(),
            optimal_value: r.optimal_value,
            subsets_examined: r.subsets_examined,
        }
    }
}

impl TryFrom<OracleResultDto> for OracleResult {
    type Error = IoError;

    fn try_from(dto: OracleResultDto) -> Result<Self, IoError> {
        Ok(OracleResult {
            optimal_set: dto.optimal_set.try_into()?,
            optimal_value: dto.optimal_value,
            subsets_examined: dto.subsets_examined,
        })
    }
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

/// Solver parameters recorded with a run; absent fields were not used by
/// that solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lazy: Option<bool>,
}

/// What a run produced: a solver placement or an oracle optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutcome {
    Placement(PlacementResultDto),
    Oracle(OracleResultDto),
}

/// A complete, replayable record of one solver invocation.
///
/// Replaying `instance` + `params` through the named solver reproduces
/// `outcome` bit-identically (tie-breaks and RNG streams are
/// deterministic); `wall_time_s`, `tool_version`, and `method_tag` are
/// provenance only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Absent when the run came from a raw system file rather than a
    /// generated instance; replay then requires the original cache.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceDescriptor>,
    pub solver: String,
    pub params: SolverParams,
    pub outcome: RunOutcome,
    pub wall_time_s: f64,
    pub tool_version: String,
    pub method_tag: String,
}

pub fn save_run_record(path: impl AsRef<Path>, record: &RunRecord) -> Result<(), IoError> {
    write_file(path.as_ref(), record)
}

pub fn load_run_record(path: impl AsRef<Path>) -> Result<RunRecord, IoError> {
    read_file(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::chain_network;
    use crate::placement::min_actuators_bounded_energy;
    use crate::system::{energy_metric, node_gramians};

    #[test]
    fn float_formatting_is_lossless_and_scientific() {
        let values = [
            0.0,
            -1.0,
            8.517537e7,
            std::f64::consts::PI,
            f64::MIN_POSITIVE,
            1.0 + f64::EPSILON,
            -2.420941e3,
        ];
        let json = to_json_string(&values).unwrap();
        assert!(json.contains('e'), "expected scientific notation: {json}");
        let back: Vec<f64> = from_json_str(&json).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn system_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("system.json");
        let sys = chain_network(4);
        save_system(&path, &sys).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"A\""));
        assert!(text.contains("\"finite\""));
        let loaded = load_system(&path).unwrap();
        assert_eq!(loaded.a(), sys.a());
        assert_eq!(loaded.horizon(), sys.horizon());
    }

    #[test]
    fn instance_descriptors_parse_their_documented_forms() {
        let chain: InstanceDescriptor = from_json_str(r#"{"type":"chain","n":5}"#).unwrap();
        assert_eq!(chain, InstanceDescriptor::Chain { n: 5 });
        assert_eq!(chain.resolve().unwrap().n(), 5);

        let er: InstanceDescriptor = from_json_str(r#"{"type":"er","n":10,"seed":1}"#).unwrap();
        let sys_a = er.resolve().unwrap();
        let sys_b = er.resolve().unwrap();
        assert_eq!(sys_a.a(), sys_b.a());
        assert_eq!(sys_a.horizon(), Horizon::Infinite);

        let hs: InstanceDescriptor =
            from_json_str(r#"{"type":"hitting_set","m":3,"sets":[[1,2],[2,3]]}"#).unwrap();
        let sys = hs.resolve().unwrap();
        assert_eq!(sys.n(), 6);

        assert!(matches!(
            InstanceDescriptor::Chain { n: 0 }.resolve(),
            Err(IoError::Schema(_))
        ));
    }

    #[test]
    fn gramian_cache_round_trips_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let gramians = node_gramians(&chain_network(5)).unwrap();
        save_gramian_cache(&path, &gramians, Some(&InstanceDescriptor::Chain { n: 5 })).unwrap();
        let loaded = load_gramian_cache(&path).unwrap();
        assert_eq!(loaded.n(), 5);
        assert_eq!(loaded.method(), GramianMethod::FiniteHorizon);
        for i in 1..=5 {
            assert_eq!(loaded.node(i).matrix(), gramians.node(i).matrix());
        }
        let delta = ActuatorSet::new([1usize, 3], 5).unwrap();
        let a = energy_metric(&gramians, &delta, 0.0).unwrap();
        let b = energy_metric(&loaded, &delta, 0.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn gramian_cache_stores_lyapunov_residuals_for_infinite_horizon() {
        use crate::instances::{erdos_renyi_system, RandomNetworkConfig};
        let net = erdos_renyi_system(&RandomNetworkConfig { n: 6, seed: 3 }).unwrap();
        let gramians = node_gramians(&net.system).unwrap();
        let file = GramianCacheFile::from_gramians(&gramians, None);
        let residuals = file.residuals.as_ref().expect("infinite horizon records residuals");
        assert_eq!(residuals.len(), 6);
        assert!(residuals.iter().all(|&r| r >= 0.0 && r <= 1e-8));
        assert_eq!(file.method_tag, "infinite-horizon");
        let loaded = file.into_gramians().unwrap();
        assert_eq!(loaded.residuals().unwrap().len(), 6);
    }

    #[test]
    fn tampered_caches_are_rejected() {
        let gramians = node_gramians(&chain_network(3)).unwrap();
        let mut file = GramianCacheFile::from_gramians(&gramians, None);
        file.per_node[0][0][0] += 1e-9;
        assert!(matches!(
            file.clone().into_gramians(),
            Err(IoError::ChecksumMismatch { .. })
        ));
        file.method_tag = "infinite-horizon".into();
        assert!(matches!(
            file.into_gramians(),
            Err(IoError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn mismatched_method_and_horizon_fail_schema_validation() {
        let gramians = node_gramians(&chain_network(3)).unwrap();
        let mut file = GramianCacheFile::from_gramians(&gramians, None);
        file.method_tag = "infinite-horizon".into();
        file.checksum = cache_digest(
            file.n,
            &file.a,
            file.horizon,
            &file.method_tag,
            None,
            &file.per_node,
        );
        assert!(matches!(file.into_gramians(), Err(IoError::Schema(_))));
    }

    #[test]
    fn run_records_round_trip_with_infinities() {
        let gramians = node_gramians(&chain_network(5)).unwrap();
        let e_bound = 3.3594e5;
        let result = min_actuators_bounded_energy(&gramians, e_bound, 1e-4, 1e-4, false).unwrap();
        let record = RunRecord {
            instance: Some(InstanceDescriptor::Chain { n: 5 }),
            solver: "place-min".into(),
            params: SolverParams {
                e_bound: Some(e_bound),
                c: Some(1e-4),
                a0: Some(1e-4),
                lazy: Some(false),
                ..SolverParams::default()
            },
            outcome: RunOutcome::Placement((&result).into()),
            wall_time_s: 0.25,
            tool_version: TOOL_VERSION.into(),
            method_tag: gramians.method().tag().into(),
        };
        let json = to_json_string(&record).unwrap();
        let back: RunRecord = from_json_str(&json).unwrap();
        assert_eq!(back, record);
        let RunOutcome::Placement(dto) = back.outcome else {
            panic!("expected a placement outcome");
        };
        let rebuilt: PlacementResult = dto.try_into().unwrap();
        assert_eq!(rebuilt, result);

        // An uncontrollable baseline result carries exact metric +inf, which
        // must survive the round trip as the string "inf". A single step on
        // zero dynamics always leaves a singular Gramian.
        let zero = LinearSystem::new(
            DMatrix::zeros(3, 3),
            Horizon::Finite { t0: 0.0, t1: 1.0 },
        )
        .unwrap();
        let naive =
            crate::baselines::naive_budget_greedy(&node_gramians(&zero).unwrap(), 3, 0.1, 1)
                .unwrap();
        assert!(!naive.controllable);
        let dto = PlacementResultDto::from(&naive);
        let json = to_json_string(&dto).unwrap();
        assert!(json.contains("\"inf\""));
        let back: PlacementResultDto = from_json_str(&json).unwrap();
        let rebuilt: PlacementResult = back.try_into().unwrap();
        assert_eq!(rebuilt, naive);
    }

    #[test]
    fn oracle_outcomes_round_trip() {
        let gramians = node_gramians(&chain_network(5)).unwrap();
        let oracle = crate::baselines::brute_force_min_energy(&gramians, 2).unwrap();
        let dto = OracleResultDto::from(&oracle);
        let json = to_json_string(&RunOutcome::Oracle(dto)).unwrap();
        assert!(json.contains("\"kind\":\"oracle\""));
        let back: RunOutcome = from_json_str(&json).unwrap();
        let RunOutcome::Oracle(dto) = back else {
            panic!("expected an oracle outcome");
        };
        let rebuilt: OracleResult = dto.try_into().unwrap();
        assert_eq!(rebuilt, oracle);
    }
}
