//! Seeded scenario sampling and witness searches.
//!
//! Every trial is a pure function of `(seed, trial)`: the generator is a
//! ChaCha8 stream seeded with `seed` and positioned on stream `trial`.
//! Sampled scenarios are produced as [`ScenarioFile`] documents first, so a
//! stored witness re-resolves to exactly the scenario that was classified.

mod partition;

pub use partition::{PartitionSampler, MAX_ELEMENTS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditions::{Condition, ConditionReport, VennRegion};
use crate::diosi::{forward_diosi_check, robustness_check, RobustnessOutcome, Scenario, TestVerdict};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::hilbert::{self, HilbertDim, ProjectorFamily, Schedule, State, Unitary};
use crate::history::{HistoryLabel, HistorySet, PhasePerturbation};
use crate::io;
use crate::linalg::{self, CMatrix};
use crate::scenario_file::{
    FamilySpec, HistoriesSpec, ScenarioFile, ScheduleSpec, StateSpec, ToleranceSpec, FORMAT_VERSION,
};
use crate::{DEFAULT_CLASSIFY_TOL, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    PureRandom,
    MixedRandom,
    Supplied(StateSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseGraining {
    None,
    /// A uniform set partition of the chains with at least one merged block.
    RandomPartition,
    /// `{C, C̄}` from the same binary family at two slots.
    AppendixPairing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub dim: usize,
    pub slots: usize,
    /// Block ranks of each family; they must sum to `dim`.
    pub family_sizes: Vec<usize>,
    pub state_kind: StateKind,
    pub coarse_grainings: CoarseGraining,
    pub trials: u64,
    pub seed: u64,
    /// Classification threshold; defaults to [`DEFAULT_CLASSIFY_TOL`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.slots == 0 {
            return bad("slots must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.family_sizes.is_empty() || self.family_sizes.contains(&0) {
            return bad("family sizes must be at least 1".into());
        }
        let total: usize = self.family_sizes.iter().sum();
        if total != self.dim {
            return bad(format!("family sizes sum to {total}, expected dim = {}", self.dim));
        }
        if let Some(t) = self.tolerance {
            if !(t.is_finite() && t >= 0.0) {
                return bad(format!("tolerance must be a non-negative number, got {t}"));
            }
        }
        let chains = self.family_sizes.len().checked_pow(self.slots as u32);
        match self.coarse_grainings {
            CoarseGraining::AppendixPairing if self.slots != 2 || self.family_sizes.len() != 2 => {
                return bad("appendix_pairing needs 2 slots and a binary family".into())
            }
            CoarseGraining::RandomPartition if chains.is_none_or(|n| n > MAX_ELEMENTS) => {
                return bad(format!("random_partition supports at most {MAX_ELEMENTS} chains"))
            }
            _ => {}
        }
        if let StateKind::Supplied(s) = &self.state_kind {
            s.resolve(self.dim, DEFAULT_TOL)
                .map_err(|e| Error::Config(format!("supplied state: {e}")))?;
        }
        Ok(())
    }

    pub fn classify_tol(&self) -> f64 {
        self.tolerance.unwrap_or(DEFAULT_CLASSIFY_TOL)
    }

    fn rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// The document for one trial. Draw order: one evolution per slot, one basis
/// per family, the state, then the partition.
pub fn sample_file(cfg: &SampleConfig, trial: u64) -> Result<ScenarioFile> {
    cfg.validate()?;
    let mut rng = cfg.rng(trial);
    let d = HilbertDim::new(cfg.dim)?;
    let unitaries = (0..cfg.slots)
        .map(|_| io::matrix_rows(hilbert::haar_unitary_with(&mut rng, d).matrix()))
        .collect();
    let mut groups = Vec::with_capacity(cfg.family_sizes.len());
    let mut start = 0;
    for &size in &cfg.family_sizes {
        groups.push((start..start + size).collect::<Vec<_>>());
        start += size;
    }
    let n_families = match cfg.coarse_grainings {
        CoarseGraining::AppendixPairing => 1,
        _ => cfg.slots,
    };
    let families = (0..n_families)
        .map(|_| FamilySpec {
            basis: Some(io::matrix_rows(hilbert::haar_unitary_with(&mut rng, d).matrix())),
            groups: Some(groups.clone()),
            ..FamilySpec::default()
        })
        .collect();
    let state = match &cfg.state_kind {
        StateKind::PureRandom => StateSpec::from_state(&hilbert::haar_pure_state_with(&mut rng, d)),
        StateKind::MixedRandom => StateSpec::from_state(&hilbert::hilbert_schmidt_state_with(&mut rng, d)),
        StateKind::Supplied(s) => s.clone(),
    };
    let n_chains = cfg.family_sizes.len().pow(cfg.slots as u32);
    let histories = match cfg.coarse_grainings {
        CoarseGraining::None => HistoriesSpec::FineGrained,
        CoarseGraining::RandomPartition => {
            HistoriesSpec::CoarseGrain(PartitionSampler::new(n_chains)?.sample_nontrivial(&mut rng))
        }
        CoarseGraining::AppendixPairing => HistoriesSpec::CoarseGrain(vec![vec![0, 3], vec![1, 2]]),
    };
    Ok(ScenarioFile {
        format_version: FORMAT_VERSION,
        name: Some(format!("trial-{}-{trial}", cfg.seed)),
        dimension: cfg.dim,
        state,
        schedule: ScheduleSpec {
            times: (0..cfg.slots).map(|k| k as f64).collect(),
            unitaries: Some(unitaries),
            hamiltonian: None,
        },
        families,
        histories,
        checks: Vec::new(),
        conditions: None,
        perturbation: None,
        tolerance: cfg.tolerance.map(|t| ToleranceSpec::Split {
            construction: None,
            classification: Some(t),
        }),
        seed: Some(cfg.seed),
        partner: None,
        near_identical: false,
    })
}

pub fn sample_scenario(cfg: &SampleConfig, trial: u64) -> Result<Scenario> {
    let file = sample_file(cfg, trial)?;
    file.resolve()
        .map_err(|e| Error::Internal(format!("sampled scenario {trial} failed validation: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub region: VennRegion,
    pub count: u64,
    pub first_trial: Option<u64>,
    /// Smallest distance of any residual from the threshold, over the region.
    pub min_margin: Option<f64>,
    pub witness: Option<ScenarioFile>,
    pub witness_report: Option<ConditionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCatalog {
    pub trials: u64,
    pub seed: u64,
    pub tolerance: f64,
    /// One entry per region, in [`VennRegion::ALL`] order.
    pub regions: Vec<RegionEntry>,
    /// Trials whose probabilities do not sum to one within the threshold.
    pub probability_sum_deviations: u64,
}

impl RegionCatalog {
    pub fn entry(&self, region: VennRegion) -> &RegionEntry {
        self.regions
            .iter()
            .find(|e| e.region == region)
            .expect("every region has an entry")
    }

    pub fn count(&self, region: VennRegion) -> u64 {
        self.entry(region).count
    }
}

/// Classifies every trial and keeps the lowest-index witness per region.
pub fn venn_search(cfg: &SampleConfig, exec: Execution) -> Result<RegionCatalog> {
    cfg.validate()?;
    let tol = cfg.classify_tol();
    let results = exec::map_trials(exec, cfg.trials, |t| -> Result<(VennRegion, f64, bool)> {
        let sc = sample_scenario(cfg, t)?;
        let df = sc.functional()?;
        let report = crate::conditions::classify(&df, tol);
        Ok((report.venn_region, report.margin(), (df.probability_sum() - 1.0).abs() > tol))
    });
    let mut regions: Vec<RegionEntry> = VennRegion::ALL
        .iter()
        .map(|&region| RegionEntry {
            region,
            count: 0,
            first_trial: None,
            min_margin: None,
            witness: None,
            witness_report: None,
        })
        .collect();
    let mut deviations = 0;
    for (t, r) in results.into_iter().enumerate() {
        let (region, margin, deviates) = r?;
        deviations += deviates as u64;
        let e = regions.iter_mut().find(|e| e.region == region).expect("known region");
        e.count += 1;
        e.first_trial.get_or_insert(t as u64);
        e.min_margin = Some(e.min_margin.map_or(margin, |m: f64| m.min(margin)));
    }
    for e in &mut regions {
        if let Some(t) = e.first_trial {
            let mut file = sample_file(cfg, t)?;
            file.checks = vec![crate::scenario_file::Check::Classify];
            e.witness_report = Some(sample_scenario(cfg, t)?.classify(tol)?);
            e.witness = Some(file);
        }
    }
    Ok(RegionCatalog {
        trials: cfg.trials,
        seed: cfg.seed,
        tolerance: tol,
        regions,
        probability_sum_deviations: deviations,
    })
}

/// A search result; not finding anything is an ordinary outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome<T> {
    Found {
        trial: u64,
        scenario: ScenarioFile,
        detail: T,
    },
    NotFound {
        trials: u64,
    },
}

impl<T> SearchOutcome<T> {
    pub fn found(&self) -> Option<(&ScenarioFile, &T)> {
        match self {
            SearchOutcome::Found { scenario, detail, .. } => Some((scenario, detail)),
            SearchOutcome::NotFound { .. } => None,
        }
    }
}

fn search<T, F>(cfg: &SampleConfig, exec: Execution, f: F) -> Result<SearchOutcome<T>>
where
    T: Send,
    F: Fn(&Scenario) -> Result<Option<T>> + Sync + Send,
{
    cfg.validate()?;
    let hit = exec::find_first(exec, cfg.trials, |t| match sample_scenario(cfg, t).and_then(|sc| f(&sc)) {
        Ok(None) => None,
        other => Some(other),
    });
    match hit {
        None => Ok(SearchOutcome::NotFound { trials: cfg.trials }),
        Some((trial, detail)) => Ok(SearchOutcome::Found {
            trial,
            scenario: sample_file(cfg, trial)?,
            detail: detail?.expect("only hits are kept"),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperProbability {
    pub history: usize,
    pub label: String,
    pub probability: f64,
}

/// First trial with an inhomogeneous history whose `p` exceeds `1 + tol`.
pub fn superprob_search(cfg: &SampleConfig, exec: Execution) -> Result<SearchOutcome<SuperProbability>> {
    if cfg.coarse_grainings == CoarseGraining::None {
        return Err(Error::Precondition(
            "homogeneous fine-grained histories have p ≤ 1; choose a coarse graining".into(),
        ));
    }
    let tol = cfg.classify_tol();
    search(cfg, exec, |sc| {
        let df = sc.functional()?;
        Ok(sc
            .histories
            .members()
            .iter()
            .zip(&df.p)
            .enumerate()
            .filter(|(_, (m, &p))| !m.homogeneous() && p > 1.0 + tol)
            .max_by(|a, b| a.1 .1.total_cmp(b.1 .1))
            .map(|(i, (m, &p))| SuperProbability {
                history: i,
                label: m.label.name.clone(),
                probability: p,
            }))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductFailure {
    pub condition: Condition,
    pub verdict: TestVerdict,
}

/// First trial satisfying `cond` whose composite with an independent copy of
/// itself violates it by more than `margin`.
pub fn forward_failure_search(
    cfg: &SampleConfig,
    cond: Condition,
    margin: f64,
    exec: Execution,
) -> Result<SearchOutcome<ProductFailure>> {
    let tol = cfg.classify_tol();
    search(cfg, exec, |sc| {
        if !sc.classify(tol)?.holds(cond) {
            return Ok(None);
        }
        let verdict = forward_diosi_check(cond, sc, sc, tol)?;
        Ok((!verdict.passed && verdict.residual > margin).then_some(ProductFailure {
            condition: cond,
            verdict,
        }))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixScenario {
    pub scenario: Scenario,
    /// `‖C̄†C + C†C̄‖∞`, which vanishes identically.
    pub certificate: f64,
}

/// Histories `C = P₂P₁ + P̄₂P̄₁` and `C̄ = P₂P̄₁ + P̄₂P₁` with `P₁ = p` and
/// `P₂ = u12† p u12`.
pub fn appendix_scenario(p: &CMatrix, u12: &Unitary, s: State) -> Result<AppendixScenario> {
    let family = ProjectorFamily::binary(p.clone(), DEFAULT_TOL)?;
    linalg::ensure_dim(p, u12.dim())?;
    let schedule = Schedule::new(
        vec![0.0, 1.0],
        vec![Unitary::identity(u12.dim()), u12.clone()],
        vec![family.clone(), family],
    )?;
    let labels = vec![
        HistoryLabel::sum(vec![vec![0, 0], vec![1, 1]])?.with_name("C"),
        HistoryLabel::sum(vec![vec![0, 1], vec![1, 0]])?.with_name("C̄"),
    ];
    let histories = HistorySet::from_labels(schedule, labels, DEFAULT_TOL)?;
    let (cm, cbar) = (&histories.members()[0].matrix, &histories.members()[1].matrix);
    let certificate = linalg::max_norm(&(cbar.adjoint() * cm + cm.adjoint() * cbar));
    Ok(AppendixScenario {
        scenario: Scenario::new("appendix", histories, s)?,
        certificate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseWitness {
    pub lambda: f64,
    pub perturbation: PhasePerturbation,
    pub outcome: RobustnessOutcome,
}

/// Sweeps `λ = 2πk/steps` on the phase of history `target` (all others
/// unshifted) and returns the earliest grid point that breaks consistency by
/// the largest margin, if any does.
pub fn consistency_breaking_phase(
    sc: &Scenario,
    target: usize,
    steps: usize,
    tol: f64,
) -> Result<Option<PhaseWitness>> {
    let n = sc.histories.len();
    if target >= n {
        return Err(Error::IndexOutOfRange {
            what: "history",
            index: target,
            len: n,
        });
    }
    let mut best: Option<PhaseWitness> = None;
    for k in 1..steps {
        let lambda = std::f64::consts::TAU * k as f64 / steps as f64;
        let mut phases = vec![0.0; n];
        phases[target] = lambda;
        let pert = PhasePerturbation::per_history(phases, Unitary::identity(sc.dim()));
        let outcome = robustness_check(sc, &pert, tol)?;
        let broken = outcome
            .verdicts
            .iter()
            .any(|v| v.condition == Condition::Consistency && !v.passed);
        let better = best
            .as_ref()
            .is_none_or(|b| outcome.after.residuals.consistency > b.outcome.after.residuals.consistency + 1e-12);
        if broken && better {
            best = Some(PhaseWitness {
                lambda,
                perturbation: pert,
                outcome,
            });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVector};

    fn cfg(slots: usize, cg: CoarseGraining, trials: u64) -> SampleConfig {
        SampleConfig {
            dim: 2,
            slots,
            family_sizes: vec![1, 1],
            state_kind: StateKind::PureRandom,
            coarse_grainings: cg,
            trials,
            seed: 42,
            tolerance: None,
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = cfg(2, CoarseGraining::RandomPartition, 1);
        assert_eq!(sample_file(&c, 5).unwrap(), sample_file(&c, 5).unwrap());
        assert_ne!(sample_file(&c, 5).unwrap(), sample_file(&c, 6).unwrap());
        let a = sample_scenario(&c, 5).unwrap().functional().unwrap();
        let b = sample_scenario(&c, 5).unwrap().functional().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(2, CoarseGraining::None, 1);
        c.family_sizes = vec![1, 2];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = cfg(3, CoarseGraining::AppendixPairing, 1);
        assert!(c.validate().is_err());
        c.slots = 2;
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_slot_is_decoherent() {
        let cat = venn_search(&cfg(1, CoarseGraining::None, 1), Execution::Sequential).unwrap();
        assert_eq!(cat.count(VennRegion::Decoherent), 1);
        assert_eq!(cat.regions.iter().map(|e| e.count).sum::<u64>(), 1);
    }

    #[test]
    fn appendix_pairing_lands_in_consistent_not_pd() {
        let cat = venn_search(&cfg(2, CoarseGraining::AppendixPairing, 200), Execution::Parallel).unwrap();
        assert_eq!(cat.count(VennRegion::ConsistentOnly), 200);
        let e = cat.entry(VennRegion::ConsistentOnly);
        assert_eq!(e.first_trial, Some(0));
        let again = e.witness.as_ref().unwrap().resolve().unwrap().classify(cat.tolerance).unwrap();
        assert_eq!(&again, e.witness_report.as_ref().unwrap());
    }

    #[test]
    fn policies_give_identical_catalogs() {
        let c = cfg(2, CoarseGraining::RandomPartition, 300);
        assert_eq!(
            venn_search(&c, Execution::Sequential).unwrap(),
            venn_search(&c, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn superprob_needs_coarse_graining() {
        let err = superprob_search(&cfg(2, CoarseGraining::None, 1), Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let r = superprob_search(&cfg(2, CoarseGraining::AppendixPairing, 50), Execution::Sequential).unwrap();
        assert_eq!(r, SearchOutcome::NotFound { trials: 50 });
    }

    #[test]
    fn appendix_builder() {
        let p = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        let zero = State::from_pure(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), DEFAULT_TOL).unwrap();
        let id = appendix_scenario(&p, &Unitary::identity(2), zero.clone()).unwrap();
        assert!(linalg::max_abs_diff(&id.scenario.histories.members()[0].matrix, &linalg::identity(2)) < 1e-15);
        let h = appendix_scenario(&p, &Unitary::hadamard(), zero).unwrap();
        assert!(h.certificate <= 1e-12);
        let d = h.scenario.functional().unwrap().entry(0, 1);
        assert!(d.re.abs() <= 1e-12 && d.im.abs() <= 1e-12);
        let bad = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5, 0.0), c(0.0, 0.0)]));
        assert!(appendix_scenario(&bad, &Unitary::hadamard(), State::from_density(linalg::identity(2) / c(2.0, 0.0), DEFAULT_TOL).unwrap()).is_err());
    }

    #[test]
    fn sweep_finds_a_breaking_phase() {
        let p = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        let (a, b) = (0.3f64, 0.7f64);
        let psi = CVector::from_vec(vec![c(a.cos(), 0.0), c(0.0, b).exp() * a.sin()]);
        let sc = appendix_scenario(&p, &Unitary::hadamard(), State::from_pure(psi, DEFAULT_TOL).unwrap())
            .unwrap()
            .scenario;
        let w = consistency_breaking_phase(&sc, 0, 8, DEFAULT_CLASSIFY_TOL).unwrap().unwrap();
        assert!((w.lambda - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(w.outcome.probability_shift < 1e-12);
        assert!(w.outcome.quasi_shift > 1e-3);
    }
}
