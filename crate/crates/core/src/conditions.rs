//! The decoherence functional, probabilities and quasi-probabilities, and
//! classification against the four probability-assignment conditions.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::State;
use crate::history::HistorySet;
use crate::io;
use crate::linalg::{self, trace_a_bdag, CMatrix};
use crate::DEFAULT_TOL;

/// The four conditions, weakest last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Decoherence,
    PartialDecoherence,
    Consistency,
    LinearPositivity,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Decoherence,
        Condition::PartialDecoherence,
        Condition::Consistency,
        Condition::LinearPositivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Decoherence => "decoherence",
            Condition::PartialDecoherence => "partial_decoherence",
            Condition::Consistency => "consistency",
            Condition::LinearPositivity => "linear_positivity",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s || c.name().replace('_', "-") == s)
            .ok_or_else(|| Error::Parse(format!("unknown condition {s:?}")))
    }
}

/// Residuals of the functional's own identities. The sum rules only apply
/// when the class operators add up to the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalResiduals {
    pub hermiticity: f64,
    pub normalization: Option<f64>,
    pub decomposition: Option<f64>,
    pub quasi_sum: Option<f64>,
    pub min_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceFunctional {
    #[serde(with = "io::matrix")]
    pub d_matrix: CMatrix,
    pub p: Vec<f64>,
    #[serde(with = "io::complex_vec")]
    pub q: Vec<Complex64>,
    pub residuals: FunctionalResiduals,
}

impl DecoherenceFunctional {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn entry(&self, a: usize, b: usize) -> Complex64 {
        self.d_matrix[(a, b)]
    }

    /// `Σ_{α′≠α} D(α, α′)`, which equals `D(α, ᾱ)` for exhaustive sets.
    pub fn rowsum_offdiag(&self, a: usize) -> Complex64 {
        (0..self.len()).filter(|&b| b != a).map(|b| self.d_matrix[(a, b)]).sum()
    }

    pub fn probability_sum(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// `D(α, α′) = Tr(C_α ρ C_α′†)` together with `p` and `q`.
pub fn decoherence_functional(h: &HistorySet, s: &State) -> Result<DecoherenceFunctional> {
    linalg::ensure_dim(s.rho(), h.dim())?;
    let rho = s.rho();
    let members = h.members();
    let n = members.len();
    let weighted: Vec<CMatrix> = members.iter().map(|c| &c.matrix * rho).collect();

    let mut d = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            d[(a, b)] = trace_a_bdag(&weighted[a], &members[b].matrix);
        }
    }
    let p: Vec<f64> = (0..n).map(|a| d[(a, a)].re).collect();
    let q: Vec<Complex64> = weighted.iter().map(linalg::trace).collect();

    let exhaustive = h.is_exhaustive(DEFAULT_TOL);
    let hermiticity = linalg::hermiticity_residual(&d);
    let mut df = DecoherenceFunctional {
        d_matrix: d,
        p,
        q,
        residuals: FunctionalResiduals {
            hermiticity,
            normalization: None,
            decomposition: None,
            quasi_sum: None,
            min_probability: 0.0,
        },
    };
    df.residuals.min_probability = df.p.iter().copied().fold(f64::INFINITY, f64::min);
    if exhaustive {
        let total: Complex64 = df.d_matrix.iter().sum();
        df.residuals.normalization = Some((total - linalg::ONE).norm());
        df.residuals.decomposition = Some(
            (0..n)
                .map(|a| (df.q[a] - df.p[a] - df.rowsum_offdiag(a)).norm())
                .fold(0.0, f64::max),
        );
        df.residuals.quasi_sum = Some((df.q.iter().sum::<Complex64>() - linalg::ONE).norm());
    }
    check_functional(&df, DEFAULT_TOL)?;
    Ok(df)
}

fn check_functional(df: &DecoherenceFunctional, tol: f64) -> Result<()> {
    let r = &df.residuals;
    let failures: Vec<String> = [
        ("D(α,α′) = D*(α′,α)", Some(r.hermiticity)),
        ("ΣΣD = 1", r.normalization),
        ("q = p + Σ_{α′≠α} D", r.decomposition),
        ("Σq = 1", r.quasi_sum),
    ]
    .into_iter()
    .filter_map(|(what, res)| res.filter(|&x| x > tol).map(|x| format!("{what} residual {x:.3e}")))
    .chain((r.min_probability < -tol).then(|| format!("negative probability {:.3e}", r.min_probability)))
    .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Internal(failures.join("; ")))
    }
}

/// `q(α) = Tr(C_α ρ)`.
pub fn quasi_probabilities(h: &HistorySet, s: &State) -> Result<Vec<Complex64>> {
    linalg::ensure_dim(s.rho(), h.dim())?;
    Ok(h.members().iter().map(|c| linalg::trace(&(&c.matrix * s.rho()))).collect())
}

/// `Tr(C_α ρ (1 − C_α†))`, the interference of a history with its negation.
pub fn interference_with_negation(h: &HistorySet, s: &State, alpha: usize) -> Result<Complex64> {
    linalg::ensure_dim(s.rho(), h.dim())?;
    let c = &h
        .members()
        .get(alpha)
        .ok_or(Error::IndexOutOfRange {
            what: "history",
            index: alpha,
            len: h.len(),
        })?
        .matrix;
    let neg_dag = linalg::identity(h.dim()) - c.adjoint();
    Ok(linalg::trace(&(c * s.rho() * neg_dag)))
}

/// Location of the worst entry for a condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entry {
    Pair(usize, usize),
    Single(usize),
}

/// Residual of one condition on `D` and where it is attained. A condition
/// holds iff its residual is at most the tolerance.
pub fn evaluate(df: &DecoherenceFunctional, cond: Condition) -> (f64, Option<Entry>) {
    let n = df.len();
    let offdiag = || (0..n).flat_map(move |a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)));
    let worst = |it: Box<dyn Iterator<Item = (f64, Entry)> + '_>| {
        it.fold((0.0, None), |(best, at), (r, e)| if r > best { (r, Some(e)) } else { (best, at) })
    };
    match cond {
        Condition::Decoherence => worst(Box::new(offdiag().map(|(a, b)| (df.entry(a, b).norm(), Entry::Pair(a, b))))),
        Condition::Consistency => {
            worst(Box::new(offdiag().map(|(a, b)| (df.entry(a, b).re.abs(), Entry::Pair(a, b)))))
        }
        Condition::PartialDecoherence => {
            worst(Box::new((0..n).map(|a| (df.rowsum_offdiag(a).norm(), Entry::Single(a)))))
        }
        Condition::LinearPositivity => worst(Box::new((0..n).map(|a| {
            let row: f64 = (0..n).map(|b| df.entry(a, b).re).sum();
            (-row, Entry::Single(a))
        }))),
    }
}

/// Cells of the four-condition Venn diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VennRegion {
    #[serde(rename = "D")]
    Decoherent,
    #[serde(rename = "PD∩C∖D")]
    PartialAndConsistent,
    #[serde(rename = "PD∖C")]
    PartialOnly,
    #[serde(rename = "C∖PD")]
    ConsistentOnly,
    #[serde(rename = "LP∖(PD∪C)")]
    LinearPositiveOnly,
    #[serde(rename = "none")]
    None,
}

impl VennRegion {
    pub const ALL: [VennRegion; 6] = [
        VennRegion::Decoherent,
        VennRegion::PartialAndConsistent,
        VennRegion::PartialOnly,
        VennRegion::ConsistentOnly,
        VennRegion::LinearPositiveOnly,
        VennRegion::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VennRegion::Decoherent => "D",
            VennRegion::PartialAndConsistent => "PD∩C∖D",
            VennRegion::PartialOnly => "PD∖C",
            VennRegion::ConsistentOnly => "C∖PD",
            VennRegion::LinearPositiveOnly => "LP∖(PD∪C)",
            VennRegion::None => "none",
        }
    }

    fn from_flags(d: bool, pd: bool, c: bool, lp: bool) -> Self {
        match (d, pd, c, lp) {
            (true, ..) => VennRegion::Decoherent,
            (false, true, true, _) => VennRegion::PartialAndConsistent,
            (false, true, false, _) => VennRegion::PartialOnly,
            (false, false, true, _) => VennRegion::ConsistentOnly,
            (false, false, false, true) => VennRegion::LinearPositiveOnly,
            _ => VennRegion::None,
        }
    }
}

impl fmt::Display for VennRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlags {
    pub decoherent: bool,
    pub partially_decoherent: bool,
    pub consistent: bool,
    pub linearly_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionResiduals {
    pub decoherence: f64,
    pub partial_decoherence: f64,
    pub consistency: f64,
    pub linear_positivity: f64,
}

/// Number of scalar conditions behind each flag for `N` histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub decoherence: usize,
    pub partial_decoherence: usize,
    pub consistency: usize,
    pub linear_positivity: usize,
}

impl ConditionCounts {
    pub fn for_histories(n: usize) -> Self {
        ConditionCounts {
            decoherence: n * n.saturating_sub(1),
            partial_decoherence: 2 * n,
            consistency: n * n.saturating_sub(1) / 2,
            linear_positivity: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub flags: ConditionFlags,
    pub residuals: ConditionResiduals,
    pub counts: ConditionCounts,
    pub venn_region: VennRegion,
    pub tolerance: f64,
}

impl ConditionReport {
    pub fn holds(&self, cond: Condition) -> bool {
        match cond {
            Condition::Decoherence => self.flags.decoherent,
            Condition::PartialDecoherence => self.flags.partially_decoherent,
            Condition::Consistency => self.flags.consistent,
            Condition::LinearPositivity => self.flags.linearly_positive,
        }
    }

    pub fn residual(&self, cond: Condition) -> f64 {
        match cond {
            Condition::Decoherence => self.residuals.decoherence,
            Condition::PartialDecoherence => self.residuals.partial_decoherence,
            Condition::Consistency => self.residuals.consistency,
            Condition::LinearPositivity => self.residuals.linear_positivity,
        }
    }

    /// Distance of the closest residual to the tolerance threshold.
    pub fn margin(&self) -> f64 {
        Condition::ALL
            .iter()
            .map(|&c| (self.residual(c) - self.tolerance).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Classifies `D` against all four conditions with one absolute tolerance.
///
/// The implications decoherence ⇒ everything, partial decoherence ⇒ linear
/// positivity and consistency ⇒ linear positivity are exact theorems; they
/// are enforced on the flags so tolerance accumulation over a row cannot
/// break them.
pub fn classify(df: &DecoherenceFunctional, tol: f64) -> ConditionReport {
    let res = |c| evaluate(df, c).0;
    let residuals = ConditionResiduals {
        decoherence: res(Condition::Decoherence),
        partial_decoherence: res(Condition::PartialDecoherence),
        consistency: res(Condition::Consistency),
        linear_positivity: res(Condition::LinearPositivity).max(0.0),
    };
    let d = residuals.decoherence <= tol;
    let pd = d || residuals.partial_decoherence <= tol;
    let c = d || residuals.consistency <= tol;
    let lp = pd || c || residuals.linear_positivity <= tol;
    ConditionReport {
        flags: ConditionFlags {
            decoherent: d,
            partially_decoherent: pd,
            consistent: c,
            linearly_positive: lp,
        },
        residuals,
        counts: ConditionCounts::for_histories(df.len()),
        venn_region: VennRegion::from_flags(d, pd, c, lp),
        tolerance: tol,
    }
}
