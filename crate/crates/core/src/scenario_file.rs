//! The declarative scenario document shared by the CLI and the explorer.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "example",
//!   "dimension": 2,
//!   "state": { "pure": [[1.0, 0.0], [0.0, 0.0]] },
//!   "schedule": { "times": [0.0, 1.0], "unitaries": [ ... ] },
//!   "families": [ { "projectors": [ ... ] } ],
//!   "histories": "fine_grained",
//!   "checks": ["classify"]
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conditions::Condition;
use crate::diosi::Scenario;
use crate::error::{Error, Result};
use crate::hilbert::{ProjectorFamily, Schedule, State, Unitary};
use crate::history::{coarse_grain, fine_grained_set, HistoryLabel, HistorySet, LabelKind, PhasePerturbation};
use crate::io::{self, Pair};
use crate::linalg::{self, CMatrix};
use crate::{DEFAULT_CLASSIFY_TOL, DEFAULT_TOL};

pub const FORMAT_VERSION: u32 = 1;

pub type MatrixRows = Vec<Vec<Pair>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Pure(Vec<Pair>),
    Density(MatrixRows),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitaries: Option<Vec<MatrixRows>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixRows>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projectors: Option<Vec<MatrixRows>>,
    /// Orthonormal basis, one vector per column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HistoryEntry {
    Chain(Vec<usize>),
    Sum(Vec<Vec<usize>>),
    Named { name: String, chains: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HistoriesSpec {
    FineGrained,
    /// Groups of fine-grained member indices (lexicographic chain order).
    CoarseGrain(Vec<Vec<usize>>),
    Explicit(Vec<HistoryEntry>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Classify,
    DiosiForward,
    DiosiReverse,
    Robustness,
    Records,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    /// One phase per outcome of the slot's family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    /// One phase per history, instead of `slot` + `phases`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_phases: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<MatrixRows>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ToleranceSpec {
    Single(f64),
    Split {
        #[serde(default)]
        construction: Option<f64>,
        #[serde(default)]
        classification: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub construction: f64,
    pub classification: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            construction: DEFAULT_TOL,
            classification: DEFAULT_CLASSIFY_TOL,
        }
    }
}

impl ToleranceSpec {
    /// A single number sets the classification threshold only.
    pub fn resolve(self) -> Tolerances {
        let d = Tolerances::default();
        match self {
            ToleranceSpec::Single(c) => Tolerances {
                classification: c,
                ..d
            },
            ToleranceSpec::Split {
                construction,
                classification,
            } => Tolerances {
                construction: construction.unwrap_or(d.construction),
                classification: classification.unwrap_or(d.classification),
            },
        }
    }
}

/// Second subsystem for the Diósi checks: a path relative to this file or an
/// inline document. Defaults to an independent copy of the scenario itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartnerSpec {
    Path(PathBuf),
    Inline(Box<ScenarioFile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    pub state: StateSpec,
    pub schedule: ScheduleSpec,
    /// One per slot, or a single family used at every slot.
    pub families: Vec<FamilySpec>,
    pub histories: HistoriesSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<Vec<Condition>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<PartnerSpec>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub near_identical: bool,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Internal(_) => e,
        other => Error::Parse(format!("field `{name}`: {other}")),
    })
}

fn matrix(name: &str, rows: &MatrixRows, d: usize) -> Result<CMatrix> {
    let m = io::rows_matrix(rows).map_err(|e| Error::Parse(format!("field `{name}`: {e}")))?;
    field(name, linalg::ensure_dim(&m, d).map(|_| m))
}

impl StateSpec {
    pub fn resolve(&self, d: usize, tol: f64) -> Result<State> {
        match self {
            StateSpec::Pure(v) => {
                if v.len() != d {
                    return Err(Error::Parse(format!(
                        "field `state.pure`: expected {d} amplitudes, got {}",
                        v.len()
                    )));
                }
                field("state.pure", State::from_pure(io::pairs_vector(v), tol))
            }
            StateSpec::Density(rows) => {
                let m = matrix("state.density", rows, d)?;
                field("state.density", State::from_density(m, tol))
            }
        }
    }

    pub fn from_state(s: &State) -> Self {
        match s.pure_vector() {
            Some(v) => StateSpec::Pure(io::vector_pairs(v)),
            None => StateSpec::Density(io::matrix_rows(s.rho())),
        }
    }
}

impl FamilySpec {
    fn resolve(&self, d: usize, tol: f64, name: &str) -> Result<ProjectorFamily> {
        match (&self.projectors, &self.basis, &self.groups) {
            (Some(ps), None, None) => {
                let mats = ps
                    .iter()
                    .map(|p| matrix(name, p, d))
                    .collect::<Result<Vec<_>>>()?;
                field(name, ProjectorFamily::validate(mats, self.labels.clone(), tol))
            }
            (None, Some(b), Some(groups)) => {
                let basis = matrix(name, b, d)?;
                let f = field(name, ProjectorFamily::from_basis_groups(&basis, groups, tol))?;
                match &self.labels {
                    Some(l) => field(name, ProjectorFamily::validate(f.members().to_vec(), Some(l.clone()), tol)),
                    None => Ok(f),
                }
            }
            _ => Err(Error::Parse(format!(
                "field `{name}`: give either `projectors` or both `basis` and `groups`"
            ))),
        }
    }
}

impl PerturbationSpec {
    pub fn resolve(&self, d: usize, tol: f64) -> Result<PhasePerturbation> {
        let u_k = match &self.unitary {
            Some(rows) => field("perturbation.unitary", Unitary::new(matrix("perturbation.unitary", rows, d)?, tol))?,
            None => Unitary::identity(d),
        };
        match (self.slot, &self.phases, &self.history_phases) {
            (Some(slot), Some(phases), None) => Ok(PhasePerturbation::at_slot(slot, phases.clone(), u_k)),
            (None, None, Some(phases)) => Ok(PhasePerturbation::per_history(phases.clone(), u_k)),
            _ => Err(Error::Parse(
                "field `perturbation`: give either `slot` and `phases`, or `history_phases`".into(),
            )),
        }
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "field `format_version`: unsupported version {}",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents always serialize")
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerance.map(ToleranceSpec::resolve).unwrap_or_default()
    }

    pub fn resolve_schedule(&self, tol: f64) -> Result<Schedule> {
        let d = self.dimension;
        if d == 0 {
            return Err(Error::Parse("field `dimension`: must be at least 1".into()));
        }
        let n = self.schedule.times.len();
        let families = match self.families.len() {
            0 => return Err(Error::Parse("field `families`: at least one family is required".into())),
            1 => {
                let f = self.families[0].resolve(d, tol, "families[0]")?;
                vec![f; n]
            }
            k if k == n => self
                .families
                .iter()
                .enumerate()
                .map(|(i, f)| f.resolve(d, tol, &format!("families[{i}]")))
                .collect::<Result<Vec<_>>>()?,
            k => {
                return Err(Error::Parse(format!(
                    "field `families`: {k} families for {n} time slots"
                )))
            }
        };
        let times = self.schedule.times.clone();
        match (&self.schedule.unitaries, &self.schedule.hamiltonian) {
            (Some(us), None) => {
                let evolutions = us
                    .iter()
                    .enumerate()
                    .map(|(i, u)| {
                        let name = format!("schedule.unitaries[{i}]");
                        field(&name, Unitary::new(matrix(&name, u, d)?, tol))
                    })
                    .collect::<Result<Vec<_>>>()?;
                field("schedule", Schedule::new(times, evolutions, families))
            }
            (None, Some(h)) => {
                let h = matrix("schedule.hamiltonian", h, d)?;
                field("schedule", Schedule::from_hamiltonian(&h, times, families, tol))
            }
            _ => Err(Error::Parse(
                "field `schedule`: give exactly one of `unitaries` or `hamiltonian`".into(),
            )),
        }
    }

    pub fn resolve_histories(&self, schedule: Schedule, tol: f64) -> Result<HistorySet> {
        match &self.histories {
            HistoriesSpec::FineGrained => Ok(fine_grained_set(&schedule)),
            HistoriesSpec::CoarseGrain(groups) => field("histories.coarse_grain", coarse_grain(&fine_grained_set(&schedule), groups)),
            HistoriesSpec::Explicit(entries) => {
                let labels = entries
                    .iter()
                    .map(|e| match e {
                        HistoryEntry::Chain(c) => Ok(HistoryLabel::chain(c.clone())),
                        HistoryEntry::Sum(cs) => HistoryLabel::sum(cs.clone()),
                        HistoryEntry::Named { name, chains } => Ok(HistoryLabel::sum(chains.clone())?.with_name(name.clone())),
                    })
                    .collect::<Result<Vec<_>>>();
                field("histories", labels.and_then(|l| HistorySet::from_labels(schedule, l, tol)))
            }
        }
    }

    /// Builds the scenario after validating every component.
    pub fn resolve(&self) -> Result<Scenario> {
        let tol = self.tolerances().construction;
        let schedule = self.resolve_schedule(tol)?;
        let histories = self.resolve_histories(schedule, tol)?;
        let state = self.state.resolve(self.dimension, tol)?;
        field(
            "state",
            Scenario::new(self.name.clone().unwrap_or_else(|| "scenario".into()), histories, state),
        )
    }

    /// A standalone document with every matrix written out explicitly.
    pub fn from_scenario(sc: &Scenario) -> Self {
        let s = sc.schedule();
        let families = s
            .families()
            .iter()
            .map(|f| FamilySpec {
                projectors: Some(f.members().iter().map(io::matrix_rows).collect()),
                labels: Some(f.labels().to_vec()),
                ..FamilySpec::default()
            })
            .collect();
        let histories = if sc.histories.is_fine_grained() {
            HistoriesSpec::FineGrained
        } else {
            HistoriesSpec::Explicit(
                sc.histories
                    .members()
                    .iter()
                    .map(|m| match &m.label.kind {
                        LabelKind::Chain(c) => HistoryEntry::Chain(c.clone()),
                        LabelKind::Sum(cs) => HistoryEntry::Sum(cs.clone()),
                    })
                    .collect(),
            )
        };
        ScenarioFile {
            format_version: FORMAT_VERSION,
            name: Some(sc.name.clone()),
            dimension: sc.dim(),
            state: StateSpec::from_state(&sc.state),
            schedule: ScheduleSpec {
                times: s.times().to_vec(),
                unitaries: Some(s.evolutions().iter().map(|u| io::matrix_rows(u.matrix())).collect()),
                hamiltonian: None,
            },
            families,
            histories,
            checks: Vec::new(),
            conditions: None,
            perturbation: None,
            tolerance: None,
            seed: None,
            partner: None,
            near_identical: false,
        }
    }
}
