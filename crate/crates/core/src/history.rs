//! Class operators for homogeneous chains and their sums, exhaustive history
//! sets, coarse grainings, negation and the one-slot phase perturbation.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{Schedule, Unitary};
use crate::linalg::{self, ensure_dim, max_abs_diff, CMatrix};

/// Outcome indices `(a_1, …, a_n)`, one per time slot.
pub type Chain = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LabelKind {
    Chain(Chain),
    /// Non-empty, duplicate-free, kept sorted lexicographically.
    Sum(Vec<Chain>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HistoryLabel {
    pub kind: LabelKind,
    pub name: String,
}

fn chain_name(chain: &[usize]) -> String {
    let inner: Vec<String> = chain.iter().map(ToString::to_string).collect();
    format!("({})", inner.join(","))
}

impl HistoryLabel {
    pub fn chain(chain: Chain) -> Self {
        let name = chain_name(&chain);
        HistoryLabel {
            kind: LabelKind::Chain(chain),
            name,
        }
    }

    /// A sum label; collapses to a chain label when only one chain remains.
    pub fn sum(chains: Vec<Chain>) -> Result<Self> {
        let set: BTreeSet<Chain> = chains.iter().cloned().collect();
        if set.is_empty() {
            return Err(Error::InvalidPartition("empty history".into()));
        }
        if set.len() != chains.len() {
            return Err(Error::InvalidPartition("history lists a chain twice".into()));
        }
        let mut chains: Vec<Chain> = set.into_iter().collect();
        if chains.len() == 1 {
            return Ok(Self::chain(chains.pop().unwrap()));
        }
        let name = chains.iter().map(|c| chain_name(c)).collect::<Vec<_>>().join("+");
        Ok(HistoryLabel {
            kind: LabelKind::Sum(chains),
            name,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn chains(&self) -> Vec<&Chain> {
        match &self.kind {
            LabelKind::Chain(c) => vec![c],
            LabelKind::Sum(cs) => cs.iter().collect(),
        }
    }

    pub fn is_chain(&self) -> bool {
        matches!(self.kind, LabelKind::Chain(_))
    }
}

impl fmt::Display for HistoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A history operator together with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassOperator {
    pub matrix: CMatrix,
    pub label: HistoryLabel,
}

impl ClassOperator {
    pub fn homogeneous(&self) -> bool {
        self.label.is_chain()
    }
}

/// `P_{a_n}(t_n) ⋯ P_{a_1}(t_1)`, latest time leftmost.
pub fn chain_class_operator(s: &Schedule, outcomes: &[usize]) -> Result<ClassOperator> {
    Ok(ClassOperator {
        matrix: chain_matrix(s, outcomes)?,
        label: HistoryLabel::chain(outcomes.to_vec()),
    })
}

fn check_chain(s: &Schedule, outcomes: &[usize]) -> Result<()> {
    if outcomes.len() != s.slots() {
        return Err(Error::DimensionMismatch {
            expected: s.slots(),
            got: outcomes.len(),
        });
    }
    for (&a, f) in outcomes.iter().zip(s.families()) {
        if a >= f.len() {
            return Err(Error::IndexOutOfRange {
                what: "outcome",
                index: a,
                len: f.len(),
            });
        }
    }
    Ok(())
}

fn chain_matrix(s: &Schedule, outcomes: &[usize]) -> Result<CMatrix> {
    check_chain(s, outcomes)?;
    let n = s.slots();
    let mut m = s.projector(n - 1, outcomes[n - 1]).clone();
    for k in (0..n - 1).rev() {
        m *= s.projector(k, outcomes[k]);
    }
    Ok(m)
}

fn label_matrix(s: &Schedule, label: &HistoryLabel) -> Result<CMatrix> {
    let d = s.dim();
    label
        .chains()
        .into_iter()
        .try_fold(CMatrix::zeros(d, d), |acc, c| Ok(acc + chain_matrix(s, c)?))
}

/// All chains of a schedule in lexicographic order of their outcome tuples.
pub fn enumerate_chains(sizes: &[usize]) -> Vec<Chain> {
    let mut out = vec![Vec::with_capacity(sizes.len())];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |a| {
                    let mut c = prefix.clone();
                    c.push(a);
                    c
                })
            })
            .collect();
    }
    out
}

/// An exhaustive, exclusive set of class operators over one schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySet {
    members: Vec<ClassOperator>,
    schedule: Schedule,
    fine_grained: bool,
    perturbed: bool,
    sum_residual: f64,
    cdc_residual: f64,
}

impl HistorySet {
    fn assemble(members: Vec<ClassOperator>, schedule: Schedule, fine_grained: bool, perturbed: bool) -> Self {
        let d = schedule.dim();
        let id = linalg::identity(d);
        let sum = members.iter().fold(CMatrix::zeros(d, d), |acc, c| acc + &c.matrix);
        let cdc = members
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, c| acc + c.matrix.adjoint() * &c.matrix);
        HistorySet {
            sum_residual: max_abs_diff(&sum, &id),
            cdc_residual: max_abs_diff(&cdc, &id),
            members,
            schedule,
            fine_grained,
            perturbed,
        }
    }

    /// Builds a set from explicit labels, checking exclusivity and `Σ C = 1`.
    pub fn from_labels(schedule: Schedule, labels: Vec<HistoryLabel>, tol: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidPartition("a history set needs at least one history".into()));
        }
        let mut seen = BTreeSet::new();
        let mut members = Vec::with_capacity(labels.len());
        for label in labels {
            for c in label.chains() {
                if !seen.insert(c.clone()) {
                    return Err(Error::InvalidPartition(format!(
                        "chain {} appears in more than one history",
                        chain_name(c)
                    )));
                }
            }
            members.push(ClassOperator {
                matrix: label_matrix(&schedule, &label)?,
                label,
            });
        }
        let all_chains = enumerate_chains(&schedule.family_sizes());
        let fine_grained = members.iter().all(ClassOperator::homogeneous) && seen.len() == all_chains.len();
        let set = Self::assemble(members, schedule, fine_grained, false);
        if set.sum_residual > tol {
            return Err(Error::invalid(
                "history set",
                vec![crate::error::Violation {
                    what: "class operators do not sum to the identity",
                    residual: set.sum_residual,
                }],
            ));
        }
        Ok(set)
    }

    pub fn members(&self) -> &[ClassOperator] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.schedule.dim()
    }

    /// `‖Σ C_α − 1‖∞`.
    pub fn sum_residual(&self) -> f64 {
        self.sum_residual
    }

    /// `‖Σ C_α† C_α − 1‖∞`; zero only guaranteed for full fine-grainings.
    pub fn cdc_residual(&self) -> f64 {
        self.cdc_residual
    }

    /// Every chain of the schedule appears as its own member.
    pub fn is_fine_grained(&self) -> bool {
        self.fine_grained
    }

    /// Every member is a single chain.
    pub fn is_homogeneous(&self) -> bool {
        self.members.iter().all(ClassOperator::homogeneous)
    }

    /// Produced by [`phase_perturb`]; matrices no longer equal their label products.
    pub fn is_perturbed(&self) -> bool {
        self.perturbed
    }

    pub fn is_exhaustive(&self, tol: f64) -> bool {
        self.sum_residual <= tol
    }

    pub fn position(&self, label: &HistoryLabel) -> Option<usize> {
        self.members.iter().position(|m| m.label.kind == label.kind)
    }

    pub fn labels(&self) -> Vec<HistoryLabel> {
        self.members.iter().map(|m| m.label.clone()).collect()
    }

    /// Products `C^A_α ⊗ C^B_β` in row-major order `α · N_B + β`, expressed
    /// as chains of the merged composite schedule.
    pub(crate) fn compose(a: &HistorySet, b: &HistorySet) -> HistorySet {
        let (schedule, order) = Schedule::compose(&a.schedule, &b.schedule);
        let merge = |ca: &Chain, cb: &Chain| -> Chain {
            order
                .iter()
                .map(|src| match *src {
                    crate::hilbert::SlotSource::A(k) => ca[k],
                    crate::hilbert::SlotSource::B(k) => cb[k],
                })
                .collect()
        };
        let mut members = Vec::with_capacity(a.len() * b.len());
        for ma in &a.members {
            for mb in &b.members {
                let chains: Vec<Chain> = ma
                    .label
                    .chains()
                    .into_iter()
                    .flat_map(|ca| mb.label.chains().into_iter().map(move |cb| (ca, cb)))
                    .map(|(ca, cb)| merge(ca, cb))
                    .collect();
                let label = HistoryLabel::sum(chains)
                    .expect("products of disjoint chains are disjoint")
                    .with_name(format!("({}, {})", ma.label.name, mb.label.name));
                members.push(ClassOperator {
                    matrix: linalg::kron(&ma.matrix, &mb.matrix),
                    label,
                });
            }
        }
        let fine = a.fine_grained && b.fine_grained;
        Self::assemble(members, schedule, fine, a.perturbed || b.perturbed)
    }
}

/// All `∏ |family_k|` chains, zero chains included.
pub fn fine_grained_set(s: &Schedule) -> HistorySet {
    let members = enumerate_chains(&s.family_sizes())
        .into_iter()
        .map(|c| chain_class_operator(s, &c).expect("enumerated chains are in range"))
        .collect();
    HistorySet::assemble(members, s.clone(), true, false)
}

/// Merges groups of members (given by index) into single class operators.
pub fn coarse_grain(h: &HistorySet, partition: &[Vec<usize>]) -> Result<HistorySet> {
    let n = h.len();
    let mut seen = vec![false; n];
    for group in partition {
        if group.is_empty() {
            return Err(Error::InvalidPartition("empty group".into()));
        }
        for &i in group {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    what: "history",
                    index: i,
                    len: n,
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPartition(format!("history {i} appears in two groups")));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!(
            "history {} is not covered by the partition",
            h.members[missing].label
        )));
    }
    let d = h.dim();
    let members = partition
        .iter()
        .map(|group| {
            if let [single] = group.as_slice() {
                return Ok(h.members[*single].clone());
            }
            let chains = group
                .iter()
                .flat_map(|&i| h.members[i].label.chains().into_iter().cloned())
                .collect();
            let matrix = group
                .iter()
                .fold(CMatrix::zeros(d, d), |acc, &i| acc + &h.members[i].matrix);
            Ok(ClassOperator {
                matrix,
                label: HistoryLabel::sum(chains)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fine = h.fine_grained && partition.iter().all(|g| g.len() == 1);
    Ok(HistorySet::assemble(members, h.schedule.clone(), fine, h.perturbed))
}

/// `1 − C`, labelled as the sum of every other member's chains.
pub fn negation(c: &ClassOperator, h: &HistorySet) -> Result<ClassOperator> {
    let idx = h.position(&c.label).ok_or_else(|| Error::NotAMember(c.label.name.clone()))?;
    let d = h.dim();
    let complement: Vec<Chain> = h
        .members
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .flat_map(|(_, m)| m.label.chains().into_iter().cloned())
        .collect();
    let label = if complement.is_empty() {
        HistoryLabel {
            kind: LabelKind::Sum(Vec::new()),
            name: "∅".into(),
        }
    } else {
        HistoryLabel::sum(complement)?.with_name(format!("¬{}", c.label.name))
    };
    Ok(ClassOperator {
        matrix: linalg::identity(d) - &c.matrix,
        label,
    })
}

/// How the phases of a one-slot perturbation attach to histories.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseAssignment {
    /// `λ_{a_k}` read from each history's outcome at `slot`.
    SlotOutcomes { slot: usize, phases: Vec<f64> },
    /// One explicit phase per history, in set order. Needed for histories
    /// (like the two-time same/opposite pair) that carry no definite outcome
    /// at any single slot.
    PerHistory(Vec<f64>),
}

/// `C_α → e^{−iλ_α} U_k† C_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePerturbation {
    pub assignment: PhaseAssignment,
    pub u_k: Unitary,
}

impl PhasePerturbation {
    pub fn at_slot(slot: usize, phases: Vec<f64>, u_k: Unitary) -> Self {
        PhasePerturbation {
            assignment: PhaseAssignment::SlotOutcomes { slot, phases },
            u_k,
        }
    }

    pub fn per_history(phases: Vec<f64>, u_k: Unitary) -> Self {
        PhasePerturbation {
            assignment: PhaseAssignment::PerHistory(phases),
            u_k,
        }
    }

    /// The phase `λ_α` of every member, or an error if one is ill-defined.
    pub fn phases_for(&self, h: &HistorySet) -> Result<Vec<f64>> {
        match &self.assignment {
            PhaseAssignment::PerHistory(phases) => {
                if phases.len() != h.len() {
                    return Err(Error::DimensionMismatch {
                        expected: h.len(),
                        got: phases.len(),
                    });
                }
                Ok(phases.clone())
            }
            PhaseAssignment::SlotOutcomes { slot, phases } => {
                let slot = *slot;
                if slot >= h.schedule.slots() {
                    return Err(Error::IndexOutOfRange {
                        what: "slot",
                        index: slot,
                        len: h.schedule.slots(),
                    });
                }
                let size = h.schedule.families()[slot].len();
                if phases.len() != size {
                    return Err(Error::DimensionMismatch {
                        expected: size,
                        got: phases.len(),
                    });
                }
                h.members
                    .iter()
                    .map(|m| {
                        let outcomes: BTreeSet<usize> = m.label.chains().iter().map(|c| c[slot]).collect();
                        match outcomes.len() {
                            1 => Ok(phases[*outcomes.iter().next().unwrap()]),
                            _ => Err(Error::PhaseAmbiguous(m.label.name.clone())),
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Applies a one-slot phase perturbation to every member. The result is
/// flagged as perturbed: in general `Σ C_α ≠ 1` afterwards.
pub fn phase_perturb(h: &HistorySet, pert: &PhasePerturbation) -> Result<HistorySet> {
    ensure_dim(pert.u_k.matrix(), h.dim())?;
    let phases = pert.phases_for(h)?;
    let u_dag = pert.u_k.matrix().adjoint();
    let members = h
        .members
        .iter()
        .zip(phases)
        .map(|(m, lambda)| ClassOperator {
            matrix: (&u_dag * &m.matrix) * Complex64::from_polar(1.0, -lambda),
            label: m.label.clone(),
        })
        .collect();
    Ok(HistorySet::assemble(members, h.schedule.clone(), h.fine_grained, true))
}
