//! Library side of the `histlab` command: loading scenario and search
//! documents, running the requested checks, and writing reports.

pub mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use histlab::conditions::{ConditionReport, DecoherenceFunctional, FunctionalResiduals};
use histlab::diosi::{factorization_residuals, ReverseOptions, RobustnessOutcome, TestVerdict};
use histlab::explorer::{self, ProductFailure, RegionCatalog, SampleConfig, SearchOutcome, SuperProbability};
use histlab::io::Pair;
use histlab::linalg::{c, CMatrix, CVector};
use histlab::records::RecordSet;
use histlab::scenario_file::{Check, PartnerSpec, ScenarioFile, Tolerances};
use histlab::{Condition, Error, Execution, HilbertDim, Scenario, State, Unitary, VennRegion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for bad input, 2 for a violated internal identity.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if e.is_internal() => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    /// Replaces the classification threshold.
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<TestVerdict>,
    /// Why no verdict was produced (the test's precondition failed).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_applicable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckOutcome {
    Classified { report: ConditionReport },
    Verdicts { partner: String, verdicts: Vec<ConditionVerdict> },
    Robustness { outcome: RobustnessOutcome },
    Records { records: RecordSet },
    Error { message: String, internal: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check: Check,
    #[serde(flatten)]
    pub outcome: CheckOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub functional: FunctionalResiduals,
    /// `‖Σ C_α − 1‖∞`.
    pub class_operator_sum: f64,
    /// `‖Σ C_α† C_α − 1‖∞`.
    pub class_operator_square_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// The scenario with every matrix written out.
    pub scenario: ScenarioFile,
    pub tolerances: Tolerances,
    pub functional: DecoherenceFunctional,
    pub checks: Vec<CheckEntry>,
    pub residuals: ResidualSummary,
    pub elapsed_ms: f64,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.checks
            .iter()
            .map(|c| match &c.outcome {
                CheckOutcome::Error { internal: true, .. } => 2,
                CheckOutcome::Error { .. } => 1,
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn classification(&self) -> Option<&ConditionReport> {
        self.checks.iter().find_map(|c| match &c.outcome {
            CheckOutcome::Classified { report } => Some(report),
            _ => None,
        })
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn effective_tolerances(file: &ScenarioFile, o: &Overrides) -> Tolerances {
    let mut t = file.tolerances();
    if let Some(tol) = o.tolerance {
        t.classification = tol;
    }
    t
}

fn resolve_partner(file: &ScenarioFile, base: Option<&Path>, sc: &Scenario) -> CliResult<(String, Scenario)> {
    match &file.partner {
        None => Ok(("copy of itself".into(), sc.clone())),
        Some(PartnerSpec::Inline(inner)) => {
            let p = inner.resolve()?;
            Ok((p.name.clone(), p))
        }
        Some(PartnerSpec::Path(rel)) => {
            let path = base.map_or_else(|| rel.clone(), |b| b.join(rel));
            let p = ScenarioFile::load(&path)?.resolve()?;
            Ok((path.display().to_string(), p))
        }
    }
}

fn conditions_of(file: &ScenarioFile) -> Vec<Condition> {
    file.conditions.clone().unwrap_or_else(|| Condition::ALL.to_vec())
}

fn verdicts<F>(conds: &[Condition], run: F) -> std::result::Result<Vec<ConditionVerdict>, Error>
where
    F: Fn(Condition) -> histlab::Result<TestVerdict>,
{
    conds
        .iter()
        .map(|&cond| match run(cond) {
            Ok(v) => Ok(ConditionVerdict {
                condition: cond,
                verdict: Some(v),
                not_applicable: None,
            }),
            Err(Error::Precondition(msg)) => Ok(ConditionVerdict {
                condition: cond,
                verdict: None,
                not_applicable: Some(msg),
            }),
            Err(e) => Err(e),
        })
        .collect()
}

fn run_check(
    check: Check,
    file: &ScenarioFile,
    base: Option<&Path>,
    sc: &Scenario,
    tol: &Tolerances,
) -> CliResult<CheckOutcome> {
    let t = tol.classification;
    let lib = |r: histlab::Result<CheckOutcome>| r.map_err(CliError::from);
    match check {
        Check::Classify => lib(sc.classify(t).map(|report| CheckOutcome::Classified { report })),
        Check::DiosiForward | Check::DiosiReverse => {
            let (partner, other) = resolve_partner(file, base, sc)?;
            let conds = conditions_of(file);
            let opts = ReverseOptions {
                near_identical: file.near_identical,
            };
            let verdicts = if check == Check::DiosiForward {
                verdicts(&conds, |cond| histlab::forward_diosi_check(cond, sc, &other, t))?
            } else {
                verdicts(&conds, |cond| histlab::reverse_diosi_check(cond, sc, &other, t, opts))?
            };
            Ok(CheckOutcome::Verdicts { partner, verdicts })
        }
        Check::Robustness => {
            let spec = file.perturbation.as_ref().ok_or_else(|| {
                Error::Parse("field `perturbation`: the robustness check needs a perturbation".into())
            })?;
            let pert = spec.resolve(sc.dim(), tol.construction)?;
            lib(histlab::robustness_check(sc, &pert, t).map(|outcome| CheckOutcome::Robustness { outcome }))
        }
        Check::Records => lib(histlab::construct_records(&sc.histories, &sc.state, t).map(|records| CheckOutcome::Records { records })),
    }
}

/// Runs every requested check in declaration order (classification when none
/// are listed). Failing checks are recorded in the report; only unreadable or
/// invalid documents are returned as errors.
pub fn run_scenario_file(file: &ScenarioFile, base: Option<&Path>, overrides: &Overrides) -> CliResult<Report> {
    let start = Instant::now();
    let tol = effective_tolerances(file, overrides);
    let sc = file.resolve()?;
    let functional = sc.functional()?;
    let requested = if file.checks.is_empty() {
        vec![Check::Classify]
    } else {
        file.checks.clone()
    };
    let checks = requested
        .into_iter()
        .map(|check| {
            let outcome = match run_check(check, file, base, &sc, &tol) {
                Ok(o) => o,
                Err(e) => CheckOutcome::Error {
                    internal: e.exit_code() == 2,
                    message: e.to_string(),
                },
            };
            CheckEntry { check, outcome }
        })
        .collect();
    let mut echo = ScenarioFile::from_scenario(&sc);
    echo.checks = file.checks.clone();
    echo.conditions = file.conditions.clone();
    echo.perturbation = file.perturbation.clone();
    echo.tolerance = file.tolerance;
    echo.seed = overrides.seed.or(file.seed);
    echo.near_identical = file.near_identical;
    Ok(Report {
        scenario: echo,
        tolerances: tol,
        residuals: ResidualSummary {
            functional: functional.residuals.clone(),
            class_operator_sum: sc.histories.sum_residual(),
            class_operator_square_sum: sc.histories.cdc_residual(),
        },
        functional,
        checks,
        elapsed_ms: elapsed_ms(start),
    })
}

pub fn run_scenario(path: &Path, overrides: &Overrides) -> CliResult<Report> {
    let file = ScenarioFile::load(path)?;
    run_scenario_file(&file, path.parent(), overrides)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub d_residual: f64,
    pub q_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeReport {
    pub a: String,
    pub b: String,
    pub composite_dimension: usize,
    pub composite_histories: usize,
    pub tolerance: f64,
    pub factorization: Factorization,
    pub forward: Vec<ConditionVerdict>,
    pub reverse: Vec<ConditionVerdict>,
    pub elapsed_ms: f64,
}

/// Both Diósi tests for every condition on the pair `a ⊗ b`.
pub fn compose_files(a: &Path, b: &Path, overrides: &Overrides) -> CliResult<ComposeReport> {
    let start = Instant::now();
    let fa = ScenarioFile::load(a)?;
    let fb = ScenarioFile::load(b)?;
    let tol = effective_tolerances(&fa, overrides).classification;
    let (sa, sb) = (fa.resolve()?, fb.resolve()?);
    let ab = histlab::compose(&sa, &sb)?;
    let (d_residual, q_residual) = factorization_residuals(&sa.functional()?, &sb.functional()?, &ab.functional()?);
    let conds = Condition::ALL;
    let opts = ReverseOptions {
        near_identical: fa.near_identical,
    };
    Ok(ComposeReport {
        a: sa.name.clone(),
        b: sb.name.clone(),
        composite_dimension: ab.dim(),
        composite_histories: ab.histories.len(),
        tolerance: tol,
        factorization: Factorization { d_residual, q_residual },
        forward: verdicts(&conds, |cond| histlab::forward_diosi_check(cond, &sa, &sb, tol))?,
        reverse: verdicts(&conds, |cond| histlab::reverse_diosi_check(cond, &sa, &sb, tol, opts))?,
        elapsed_ms: elapsed_ms(start),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchKind {
    Venn,
    Superprob,
    ForwardFailure,
}

/// A search document: what to look for and how to sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchFile {
    pub kind: SearchKind,
    /// Condition for `forward_failure`; defaults to linear positivity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    /// Minimum violation for `forward_failure`; defaults to 1e-6.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub sample: SampleConfig,
}

impl SearchFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())).into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchResult {
    Venn { catalog: RegionCatalog },
    Superprob { outcome: SearchOutcome<SuperProbability> },
    ForwardFailure { outcome: SearchOutcome<ProductFailure> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub config: SampleConfig,
    pub result: SearchResult,
    pub witness_files: Vec<PathBuf>,
    pub elapsed_ms: f64,
}

pub fn region_slug(r: VennRegion) -> &'static str {
    match r {
        VennRegion::Decoherent => "decoherent",
        VennRegion::PartialAndConsistent => "partial-and-consistent",
        VennRegion::PartialOnly => "partial-only",
        VennRegion::ConsistentOnly => "consistent-only",
        VennRegion::LinearPositiveOnly => "linear-positive-only",
        VennRegion::None => "none",
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Runs a search document. With `out`, every witness is written there as a
/// standalone scenario file.
pub fn run_search(path: &Path, overrides: &Overrides, out: Option<&Path>, exec: Execution) -> CliResult<SearchReport> {
    let search = SearchFile::load(path)?;
    run_search_file(&search, overrides, out, exec)
}

pub fn run_search_file(
    search: &SearchFile,
    overrides: &Overrides,
    out: Option<&Path>,
    exec: Execution,
) -> CliResult<SearchReport> {
    let start = Instant::now();
    let mut cfg = search.sample.clone();
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = overrides.tolerance {
        cfg.tolerance = Some(tol);
    }
    let mut witnesses: Vec<(String, ScenarioFile)> = Vec::new();
    let result = match search.kind {
        SearchKind::Venn => {
            let catalog = explorer::venn_search(&cfg, exec)?;
            for e in &catalog.regions {
                if let Some(w) = &e.witness {
                    witnesses.push((format!("witness-{}.scenario", region_slug(e.region)), w.clone()));
                }
            }
            SearchResult::Venn { catalog }
        }
        SearchKind::Superprob => {
            let outcome = explorer::superprob_search(&cfg, exec)?;
            if let Some((file, _)) = outcome.found() {
                let mut file = file.clone();
                file.checks = vec![Check::Classify];
                witnesses.push(("witness-superprob.scenario".into(), file));
            }
            SearchResult::Superprob { outcome }
        }
        SearchKind::ForwardFailure => {
            let cond = search.condition.unwrap_or(Condition::LinearPositivity);
            let outcome = explorer::forward_failure_search(&cfg, cond, search.margin.unwrap_or(1e-6), exec)?;
            if let Some((file, _)) = outcome.found() {
                let mut file = file.clone();
                file.checks = vec![Check::Classify, Check::DiosiForward];
                file.conditions = Some(vec![cond]);
                witnesses.push(("witness-forward-failure.scenario".into(), file));
            }
            SearchResult::ForwardFailure { outcome }
        }
    };
    let mut witness_files = Vec::new();
    if let Some(dir) = out {
        for (name, file) in witnesses {
            let path = dir.join(name);
            write_atomic(&path, &file.to_json())?;
            witness_files.push(path);
        }
    }
    Ok(SearchReport {
        config: cfg,
        result,
        witness_files,
        elapsed_ms: elapsed_ms(start),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppendixParams {
    pub dim: usize,
    /// Rank of the projector `P`; defaults to `dim / 2` (at least 1).
    pub rank: Option<usize>,
    pub mixed: bool,
    /// Grid size of the phase sweep.
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakingPhase {
    pub lambda: f64,
    pub outcome: RobustnessOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub scenario: ScenarioFile,
    /// `‖C̄†C + C†C̄‖∞`.
    pub certificate: f64,
    /// `D(C, C̄)`.
    pub interference: Pair,
    pub classification: ConditionReport,
    pub breaking_phase: Option<BreakingPhase>,
    pub elapsed_ms: f64,
}

fn canonical_appendix_inputs() -> (CMatrix, Unitary, State) {
    let p = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
    let psi = CVector::from_vec(vec![c(0.3f64.cos(), 0.0), c(0.0, 0.7).exp() * 0.3f64.sin()]);
    let s = State::from_pure(psi, histlab::DEFAULT_TOL).expect("normalized");
    (p, Unitary::hadamard(), s)
}

fn random_appendix_inputs(params: &AppendixParams, seed: u64) -> histlab::Result<(CMatrix, Unitary, State)> {
    let d = HilbertDim::new(params.dim)?;
    let rank = params.rank.unwrap_or((params.dim / 2).max(1));
    if rank == 0 || rank > params.dim {
        return Err(Error::Config(format!("rank must be in 1..={}, got {rank}", params.dim)));
    }
    let basis = histlab::haar_random_unitary(d, seed);
    let v = basis.matrix().columns(0, rank).into_owned();
    let p = &v * v.adjoint();
    let u12 = histlab::haar_random_unitary(d, seed.wrapping_add(1));
    let s = if params.mixed {
        histlab::hilbert::hilbert_schmidt_state(d, seed.wrapping_add(2))
    } else {
        histlab::hilbert::haar_pure_state(d, seed.wrapping_add(2))
    };
    Ok((p, u12, s))
}

/// The two-time `{C, C̄}` scenario. Without a seed this is a fixed qubit
/// example; with one, `P`, `U` and the state are drawn at random.
pub fn run_appendix(params: &AppendixParams, overrides: &Overrides) -> CliResult<AppendixReport> {
    let start = Instant::now();
    let (p, u12, s) = match overrides.seed {
        None if params.dim != 2 || params.mixed || params.rank.is_some_and(|r| r != 1) => {
            return Err(Error::Config("only the qubit example is available without --seed".into()).into())
        }
        None => canonical_appendix_inputs(),
        Some(seed) => random_appendix_inputs(params, seed)?,
    };
    let tol = overrides.tolerance.unwrap_or(histlab::DEFAULT_CLASSIFY_TOL);
    let built = explorer::appendix_scenario(&p, &u12, s)?;
    let df = built.scenario.functional()?;
    let classification = histlab::classify(&df, tol);
    let breaking_phase = explorer::consistency_breaking_phase(&built.scenario, 0, params.steps, tol)?
        .map(|w| BreakingPhase {
            lambda: w.lambda,
            outcome: w.outcome,
        });
    let mut scenario = ScenarioFile::from_scenario(&built.scenario);
    scenario.seed = overrides.seed;
    Ok(AppendixReport {
        scenario,
        certificate: built.certificate,
        interference: histlab::io::pair(df.entry(0, 1)),
        classification,
        breaking_phase,
        elapsed_ms: elapsed_ms(start),
    })
}
