use std::collections::HashSet;
use std::fmt;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::combine::{GradDropConfig, GradNormConfig, MgdaConfig};
use crate::error::{Error, Result};
use crate::optim::{Combiner, Optimizer, Schedule, TrainConfig};
use crate::problems::{
    mlp_multitask_problem, quad_pair_problem, transfer_toy_problem, Problem, Sines, SINE_PARAMS,
};

/// A leak coefficient, validated to lie in `[0, 1]` while parsing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Leak(f64);

impl TryFrom<f64> for Leak {
    type Error = String;

    fn try_from(v: f64) -> Result<Self, String> {
        if (0.0..=1.0).contains(&v) {
            Ok(Leak(v))
        } else {
            Err(format!("leak must lie in [0, 1], got {v}"))
        }
    }
}

impl From<Leak> for f64 {
    fn from(l: Leak) -> f64 {
        l.0
    }
}

/// Activation slope, validated to be finite and nonnegative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Slope(f64);

impl TryFrom<f64> for Slope {
    type Error = String;

    fn try_from(v: f64) -> Result<Self, String> {
        if v >= 0.0 && v.is_finite() {
            Ok(Slope(v))
        } else {
            Err(format!("k must be finite and >= 0, got {v}"))
        }
    }
}

impl From<Slope> for f64 {
    fn from(k: Slope) -> f64 {
        k.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Naive,
    Graddrop,
    RandomGraddrop,
    Pcgrad,
    IterativePcgrad,
    Mgda,
    Gradnorm,
    Clip,
}

impl MethodKind {
    pub const ALL: [MethodKind; 8] = [
        MethodKind::Naive,
        MethodKind::Graddrop,
        MethodKind::RandomGraddrop,
        MethodKind::Pcgrad,
        MethodKind::IterativePcgrad,
        MethodKind::Mgda,
        MethodKind::Gradnorm,
        MethodKind::Clip,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Naive => "naive",
            MethodKind::Graddrop => "graddrop",
            MethodKind::RandomGraddrop => "random_graddrop",
            MethodKind::Pcgrad => "pcgrad",
            MethodKind::IterativePcgrad => "iterative_pcgrad",
            MethodKind::Mgda => "mgda",
            MethodKind::Gradnorm => "gradnorm",
            MethodKind::Clip => "clip",
        }
    }

    fn is_graddrop(self) -> bool {
        matches!(self, MethodKind::Graddrop | MethodKind::RandomGraddrop)
    }
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        MethodKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = MethodKind::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown method `{s}`, expected one of {}", known.join(", "))
            })
    }
}

/// One method entry. Written either as a bare kind (`"graddrop"`) or as an
/// object; fields that do not apply to the kind must be left out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    #[serde(default)]
    pub name: String,
    pub kind: MethodKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Slope>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub leaks: Option<Vec<Leak>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginalize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renormalize: Option<bool>,
    /// Global-norm clip on the full weight gradient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Step size of the GradNorm task-weight update.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        MethodSpec {
            name: kind.as_str().to_string(),
            kind,
            k: None,
            leaks: None,
            marginalize: None,
            renormalize: None,
            clip: None,
            alpha: None,
            weight_lr: None,
            max_iters: None,
            tol: None,
            optimizer: None,
            schedule: None,
        }
    }

    fn resolve(mut self, n_tasks: usize, optimizer: Optimizer, schedule: Schedule) -> Result<Self> {
        let kind = self.kind;
        let name = if self.name.is_empty() {
            kind.as_str().to_string()
        } else {
            self.name.clone()
        };
        let misplaced = |field: &str, set: bool| -> Result<()> {
            if set {
                Err(Error::Config(format!(
                    "method `{name}`: field `{field}` does not apply to kind `{}`",
                    kind.as_str()
                )))
            } else {
                Ok(())
            }
        };

        if kind.is_graddrop() {
            let k = match (kind, self.k) {
                (MethodKind::RandomGraddrop, Some(k)) if k.0 != 0.0 => {
                    return Err(Error::Config(format!(
                        "method `{name}`: random_graddrop fixes k = 0, got {}",
                        k.0
                    )))
                }
                (MethodKind::RandomGraddrop, _) => Slope(0.0),
                (_, k) => k.unwrap_or(Slope(1.0)),
            };
            self.k = Some(k);
            self.leaks = Some(match self.leaks.take() {
                None => vec![Leak(0.0); n_tasks],
                Some(l) if l.len() == 1 => vec![l[0]; n_tasks],
                Some(l) if l.len() == n_tasks => l,
                Some(l) => {
                    return Err(Error::Config(format!(
                        "method `{name}`: {} leaks for {n_tasks} tasks",
                        l.len()
                    )))
                }
            });
            self.marginalize.get_or_insert(true);
            self.renormalize.get_or_insert(true);
        } else {
            misplaced("k", self.k.is_some())?;
            misplaced("leaks", self.leaks.is_some())?;
            misplaced("marginalize", self.marginalize.is_some())?;
            misplaced("renormalize", self.renormalize.is_some())?;
        }

        if kind == MethodKind::Gradnorm {
            let d = GradNormConfig::default();
            self.alpha.get_or_insert(d.alpha);
            self.weight_lr.get_or_insert(d.lr);
        } else {
            misplaced("alpha", self.alpha.is_some())?;
            misplaced("weight_lr", self.weight_lr.is_some())?;
        }

        if kind == MethodKind::Mgda {
            let d = MgdaConfig::default();
            self.max_iters.get_or_insert(d.max_iters);
            self.tol.get_or_insert(d.tol);
        } else {
            misplaced("max_iters", self.max_iters.is_some())?;
            misplaced("tol", self.tol.is_some())?;
        }

        if kind == MethodKind::Clip {
            self.clip.get_or_insert(1.0);
        }
        if let Some(c) = self.clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("method `{name}`: clip must be positive, got {c}")));
            }
        }
        self.optimizer.get_or_insert(optimizer);
        self.schedule.get_or_insert(schedule).validate()?;
        self.name = name;
        Ok(self)
    }

    /// Training configuration of a resolved method.
    pub fn train_config(&self, steps: usize) -> TrainConfig {
        let graddrop = || {
            GradDropConfig {
                k: self.k.map_or(1.0, f64::from),
                leaks: self.leaks.iter().flatten().map(|l| l.0).collect(),
                marginalize: self.marginalize.unwrap_or(true),
                renormalize: self.renormalize.unwrap_or(true),
            }
        };
        let combiner = match self.kind {
            MethodKind::Naive | MethodKind::Clip => Combiner::Naive,
            MethodKind::Graddrop | MethodKind::RandomGraddrop => Combiner::GradDrop(graddrop()),
            MethodKind::Pcgrad => Combiner::PcGrad { iterative: false },
            MethodKind::IterativePcgrad => Combiner::PcGrad { iterative: true },
            MethodKind::Mgda => {
                let d = MgdaConfig::default();
                Combiner::Mgda(MgdaConfig {
                    max_iters: self.max_iters.unwrap_or(d.max_iters),
                    tol: self.tol.unwrap_or(d.tol),
                })
            }
            MethodKind::Gradnorm => {
                let d = GradNormConfig::default();
                Combiner::GradNorm(GradNormConfig {
                    alpha: self.alpha.unwrap_or(d.alpha),
                    lr: self.weight_lr.unwrap_or(d.lr),
                })
            }
        };
        TrainConfig {
            combiner,
            clip: self.clip,
            optimizer: self.optimizer.unwrap_or_default(),
            schedule: self.schedule.unwrap_or_default(),
            steps,
        }
    }

    /// Hex digest of everything but the name: methods that differ only in
    /// name share it, and with it their random streams.
    pub fn fingerprint(&self) -> String {
        let mut unnamed = self.clone();
        unnamed.name.clear();
        let json = serde_json::to_string(&unnamed).expect("method specs serialize");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

impl FromStr for MethodSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(MethodSpec::new(s.parse()?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Sines {
        #[serde(default)]
        params: Option<Vec<(f64, f64)>>,
    },
    QuadPair {
        #[serde(default = "default_separation")]
        c: f64,
    },
    Mlp {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default = "default_tasks")]
        tasks: usize,
    },
    Transfer {
        #[serde(default)]
        seed: u64,
    },
}

fn default_separation() -> f64 {
    1.0
}
fn default_hidden() -> usize {
    16
}
fn default_tasks() -> usize {
    4
}

impl ProblemSpec {
    pub fn build(&self) -> Box<dyn Problem> {
        match self {
            ProblemSpec::Sines { params } => {
                Box::new(Sines::new(params.clone().unwrap_or_else(|| SINE_PARAMS.to_vec())))
            }
            ProblemSpec::QuadPair { c } => Box::new(quad_pair_problem(*c)),
            ProblemSpec::Mlp { seed, hidden, tasks } => Box::new(mlp_multitask_problem(*seed, *hidden, *tasks)),
            ProblemSpec::Transfer { seed } => Box::new(transfer_toy_problem(*seed)),
        }
    }

    fn resolve(self) -> Result<Self> {
        match self {
            ProblemSpec::Sines { params: None } => Ok(ProblemSpec::Sines {
                params: Some(SINE_PARAMS.to_vec()),
            }),
            ProblemSpec::Sines { params: Some(p) } if p.is_empty() => {
                Err(Error::Config("sines needs at least one (a, b) pair".into()))
            }
            ProblemSpec::Mlp { hidden: 0, .. } | ProblemSpec::Mlp { tasks: 0, .. } => {
                Err(Error::Config("mlp needs hidden >= 1 and tasks >= 1".into()))
            }
            other => Ok(other),
        }
    }
}

impl FromStr for ProblemSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sines" => Ok(ProblemSpec::Sines { params: None }),
            "quad_pair" => Ok(ProblemSpec::QuadPair { c: default_separation() }),
            "mlp" => Ok(ProblemSpec::Mlp {
                seed: 0,
                hidden: default_hidden(),
                tasks: default_tasks(),
            }),
            "transfer" => Ok(ProblemSpec::Transfer { seed: 0 }),
            _ => Err(format!(
                "unknown problem `{s}`, expected one of sines, quad_pair, mlp, transfer"
            )),
        }
    }
}

/// A full experiment: one problem, several methods, many trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(deserialize_with = "string_or_struct")]
    pub problem: ProblemSpec,
    #[serde(deserialize_with = "methods")]
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults for methods that do not set their own.
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub schedule: Schedule,
    /// Distance to the grid-search optimum counted as reaching it.
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    /// Trajectory files are written for trials `0..traj_trials`.
    #[serde(default = "default_traj_trials")]
    pub traj_trials: usize,
    /// Record wall-clock times. Off by default so output files are reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_steps() -> usize {
    10_000
}
fn default_trials() -> usize {
    200
}
fn default_oracle_tol() -> f64 {
    0.05
}
fn default_traj_trials() -> usize {
    5
}

impl ExperimentSpec {
    /// A spec with every default applied.
    pub fn new(problem: ProblemSpec, methods: Vec<MethodSpec>) -> Result<Self> {
        ExperimentSpec {
            problem,
            methods,
            steps: default_steps(),
            trials: default_trials(),
            seed: 0,
            optimizer: Optimizer::default(),
            schedule: Schedule::default(),
            oracle_tol: default_oracle_tol(),
            traj_trials: default_traj_trials(),
            timing: false,
            out: None,
        }
        .resolve()
    }

    /// Validates the spec and fills every per-method default in explicitly,
    /// so the serialized form replays without relying on defaults.
    pub fn resolve(mut self) -> Result<Self> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if !(self.oracle_tol >= 0.0) {
            return Err(Error::Config(format!("oracle_tol must be >= 0, got {}", self.oracle_tol)));
        }
        self.schedule.validate()?;
        self.problem = self.problem.resolve()?;
        let n_tasks = self.problem.build().n_tasks();
        let (optimizer, schedule) = (self.optimizer, self.schedule);
        self.methods = self
            .methods
            .into_iter()
            .map(|m| m.resolve(n_tasks, optimizer, schedule))
            .collect::<Result<_>>()?;
        let mut seen = HashSet::new();
        for m in &self.methods {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::Config(format!("method name `{}` is used twice", m.name)));
            }
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("specs serialize");
        s.push('\n');
        s
    }
}

/// Parses a JSON experiment spec and applies defaults.
pub fn parse_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec_str(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// As [`parse_spec`], from text. Errors name the line and column.
pub fn parse_spec_str(text: &str) -> Result<ExperimentSpec> {
    let parse_err = |message: String| Error::Parse {
        path: PathBuf::from("<spec>"),
        message,
    };
    let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    spec.resolve().map_err(|e| match e {
        Error::Config(m) => parse_err(m),
        other => other,
    })
}

fn string_or_struct<'de, T, D>(d: D) -> Result<T, D::Error>
where
    T: Deserialize<'de> + FromStr<Err = String>,
    D: Deserializer<'de>,
{
    struct StringOrStruct<T>(PhantomData<T>);

    impl<'de, T> Visitor<'de> for StringOrStruct<T>
    where
        T: Deserialize<'de> + FromStr<Err = String>,
    {
        type Value = T;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a name or an object")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<T, E> {
            v.parse().map_err(E::custom)
        }

        fn visit_map<M: MapAccess<'de>>(self, map: M) -> Result<T, M::Error> {
            T::deserialize(de::value::MapAccessDeserializer::new(map))
        }
    }

    d.deserialize_any(StringOrStruct(PhantomData))
}

fn methods<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<MethodSpec>, D::Error> {
    #[derive(Deserialize)]
    struct Entry(#[serde(deserialize_with = "string_or_struct")] MethodSpec);

    Ok(Vec::<Entry>::deserialize(d)?.into_iter().map(|e| e.0).collect())
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Leak>>, D::Error> {
    struct OneOrMany;

    impl<'de> Visitor<'de> for OneOrMany {
        type Value = Vec<Leak>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a leak or a list of leaks")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
            Leak::try_from(v).map(|l| vec![l]).map_err(E::custom)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
            self.visit_f64(v as f64)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
            self.visit_f64(v as f64)
        }

        fn visit_seq<S: SeqAccess<'de>>(self, mut seq: S) -> Result<Self::Value, S::Error> {
            let mut out = Vec::new();
            while let Some(l) = seq.next_element()? {
                out.push(l);
            }
            Ok(out)
        }
    }

    d.deserialize_any(OneOrMany).map(Some)
}
