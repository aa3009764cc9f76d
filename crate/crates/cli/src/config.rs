//! Run configuration: what to build and which checks to run.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use hodge_dn::mesh::Shape;
use hodge_dn::witten::{Grading, VectorFieldSpec};
use hodge_dn::{Error, Tolerances};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Identities,
    Harmonic,
    Dn,
    Recovery,
    Sequence,
    Cup,
    Equivariant,
}

impl Check {
    pub const ALL: [Check; 7] =
        [Check::Identities, Check::Harmonic, Check::Dn, Check::Recovery, Check::Sequence, Check::Cup, Check::Equivariant];

    pub fn name(self) -> &'static str {
        match self {
            Check::Identities => "identities",
            Check::Harmonic => "harmonic",
            Check::Dn => "dn",
            Check::Recovery => "recovery",
            Check::Sequence => "sequence",
            Check::Cup => "cup",
            Check::Equivariant => "equivariant",
        }
    }

    /// Checks that only make sense when `∂M ≠ ∅`.
    pub fn needs_boundary(self) -> bool {
        matches!(self, Check::Dn | Check::Recovery | Check::Sequence | Check::Cup | Check::Equivariant)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown check `{s}` (expected one of identities, harmonic, dn, recovery, sequence, cup, equivariant)")))
    }
}

/// Parse a comma separated check list; empty means "everything applicable".
pub fn parse_checks(list: &str) -> Result<Vec<Check>, Error> {
    let mut v: Vec<Check> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    v.sort();
    v.dedup();
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Generated { shape: Shape, res: usize },
    Off { path: PathBuf },
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub source: Source,
    pub field: VectorFieldSpec,
    /// `None`: degree grading for `X = 0`, parity for the rotation field.
    pub grading: Option<Grading>,
    /// Empty: every check applicable to the backend.
    pub checks: Vec<Check>,
    pub seed: u64,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub export: Option<PathBuf>,
}

impl RunConfig {
    pub fn generated(shape: Shape, res: usize, field: VectorFieldSpec) -> Self {
        RunConfig {
            source: Source::Generated { shape, res },
            field,
            grading: None,
            checks: vec![],
            seed: 0,
            tolerances: Tolerances::default(),
            export: None,
        }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self.field, VectorFieldSpec::ProductRotation { .. })
    }

    pub fn effective_grading(&self) -> Grading {
        self.grading.unwrap_or(if self.is_rotation() { Grading::Parity } else { Grading::Degree })
    }

    pub fn effective_checks(&self) -> Vec<Check> {
        if !self.checks.is_empty() {
            return self.checks.clone();
        }
        Check::ALL.into_iter().filter(|&c| c != Check::Equivariant || self.is_rotation()).collect()
    }
}

/// Pull `--tol.<name> <v>` / `--tol.<name>=<v>` out of an argument list.
/// Returns the remaining arguments and the overrides in order.
pub fn split_tolerance_args(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, f64)>), Error> {
    let mut rest = Vec::with_capacity(args.len());
    let mut tols = vec![];
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(spec) = a.strip_prefix("--tol.") else {
            rest.push(a);
            continue;
        };
        let (name, value) = match spec.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::Config(format!("`--tol.{spec}` needs a value")))?;
                (spec.to_string(), v)
            }
        };
        let v: f64 = value.parse().map_err(|_| Error::Config(format!("tolerance `{name}`: `{value}` is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Config(format!("tolerance `{name}` must be finite and non-negative, got {v}")));
        }
        tols.push((name, v));
    }
    Ok((rest, tols))
}

pub fn apply_tolerances(tol: &mut Tolerances, overrides: &[(String, f64)]) -> Result<(), Error> {
    for (name, v) in overrides {
        tol.set(name, *v).map_err(Error::Config)?;
    }
    Ok(())
}
