//! Composition of independent subsystems and the forward Diósi, reverse
//! Diósi and phase-robustness tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conditions::{classify, decoherence_functional, evaluate, Condition, ConditionReport, DecoherenceFunctional, Entry};
use crate::error::{Error, Result};
use crate::hilbert::{Schedule, State};
use crate::history::{phase_perturb, HistorySet, PhasePerturbation};
use crate::io;
use crate::linalg;
use crate::DEFAULT_TOL;

/// A history set bound to an initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub histories: HistorySet,
    pub state: State,
}

impl Scenario {
    pub fn new(name: impl Into<String>, histories: HistorySet, state: State) -> Result<Self> {
        linalg::ensure_dim(state.rho(), histories.dim())?;
        Ok(Scenario {
            name: name.into(),
            histories,
            state,
        })
    }

    pub fn schedule(&self) -> &Schedule {
        self.histories.schedule()
    }

    pub fn dim(&self) -> usize {
        self.histories.dim()
    }

    pub fn functional(&self) -> Result<DecoherenceFunctional> {
        decoherence_functional(&self.histories, &self.state)
    }

    pub fn classify(&self, tol: f64) -> Result<ConditionReport> {
        Ok(classify(&self.functional()?, tol))
    }
}

/// `max |D^AB(αβ, α′β′) − D^A(α,α′) D^B(β,β′)|` and the same for `q`.
pub fn factorization_residuals(
    a: &DecoherenceFunctional,
    b: &DecoherenceFunctional,
    ab: &DecoherenceFunctional,
) -> (f64, f64) {
    let (na, nb) = (a.len(), b.len());
    let mut d_res = 0.0f64;
    let mut q_res = 0.0f64;
    for i in 0..na * nb {
        let (al, be) = (i / nb, i % nb);
        q_res = q_res.max((ab.q[i] - a.q[al] * b.q[be]).norm());
        for j in 0..na * nb {
            let (al2, be2) = (j / nb, j % nb);
            d_res = d_res.max((ab.entry(i, j) - a.entry(al, al2) * b.entry(be, be2)).norm());
        }
    }
    (d_res, q_res)
}

/// Product scenario on `d_A · d_B` with history `(α, β)` at index `α · N_B + β`.
/// The factorization of `D` and `q` is verified before returning.
pub fn compose(a: &Scenario, b: &Scenario) -> Result<Scenario> {
    Ok(compose_with_functionals(a, b)?.0)
}

struct Functionals {
    a: DecoherenceFunctional,
    b: DecoherenceFunctional,
    ab: DecoherenceFunctional,
}

fn compose_with_functionals(a: &Scenario, b: &Scenario) -> Result<(Scenario, Functionals)> {
    let histories = HistorySet::compose(&a.histories, &b.histories);
    let state = a.state.tensor(&b.state);
    let ab = Scenario::new(format!("{} ⊗ {}", a.name, b.name), histories, state)?;
    let f = Functionals {
        a: a.functional()?,
        b: b.functional()?,
        ab: ab.functional()?,
    };
    let (d_res, q_res) = factorization_residuals(&f.a, &f.b, &f.ab);
    if d_res > DEFAULT_TOL || q_res > DEFAULT_TOL {
        return Err(Error::Internal(format!(
            "composite decoherence functional does not factor (D residual {d_res:.3e}, q residual {q_res:.3e})"
        )));
    }
    Ok((ab, f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    ForwardDiosi,
    ReverseDiosi,
    Robustness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    #[serde(with = "io::complex")]
    pub value: Complex64,
}

fn named(name: &str, value: Complex64) -> NamedValue {
    NamedValue {
        name: name.to_string(),
        value,
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// The entry that demonstrates a failure, with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// `"A"`, `"B"` or `"AB"`; `None` for single-system tests.
    pub system: Option<String>,
    /// `(α, β, α′, β′)`, `(α, β)`, `(α, α′)` or `(α)` depending on the test.
    pub entry: Vec<usize>,
    pub values: Vec<NamedValue>,
}

/// Extra bookkeeping of the reverse test for partial decoherence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversePartialDetail {
    pub a_homogeneous: bool,
    pub b_homogeneous: bool,
    pub sum_p_a: f64,
    pub sum_p_b: f64,
    /// `|Σp^A · Σp^B − 1|`.
    pub product_sum_residual: f64,
    /// `max_α |q^A(α) Σp^A − p^A(α)|` over both subsystems.
    pub normalized_identity_residual: f64,
    pub near_identical: Option<NearIdentical>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearIdentical {
    pub sum_difference: f64,
    pub applies: bool,
    /// Whether `Σp = 1` then holds for both, as the restriction forces.
    pub forced_unit_sum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub test: TestKind,
    pub condition: Condition,
    pub passed: bool,
    pub residual: f64,
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub partial_detail: Option<ReversePartialDetail>,
}

fn composite_witness(cond: Condition, entry: Entry, nb: usize, f: &Functionals) -> Witness {
    let split = |i: usize| (i / nb, i % nb);
    match entry {
        Entry::Pair(i, j) => {
            let ((al, be), (al2, be2)) = (split(i), split(j));
            Witness {
                system: Some("AB".into()),
                entry: vec![al, be, al2, be2],
                values: vec![
                    named("D_AB", f.ab.entry(i, j)),
                    named("D_A", f.a.entry(al, al2)),
                    named("D_B", f.b.entry(be, be2)),
                ],
            }
        }
        Entry::Single(i) => {
            let (al, be) = split(i);
            let mut values = vec![
                named("q_A", f.a.q[al]),
                named("q_B", f.b.q[be]),
                named("p_A", real(f.a.p[al])),
                named("p_B", real(f.b.p[be])),
            ];
            match cond {
                Condition::LinearPositivity => {
                    values.push(named("q_A*q_B", f.a.q[al] * f.b.q[be]));
                    let row: f64 = (0..f.ab.len()).map(|j| f.ab.entry(i, j).re).sum();
                    values.push(named("row_sum_Re_D_AB", real(row)));
                }
                _ => values.push(named("D_AB(ab, not ab)", f.ab.rowsum_offdiag(i))),
            }
            Witness {
                system: Some("AB".into()),
                entry: vec![al, be],
                values,
            }
        }
    }
}

fn single_witness(system: Option<&str>, cond: Condition, entry: Entry, df: &DecoherenceFunctional) -> Witness {
    let system = system.map(str::to_string);
    match entry {
        Entry::Pair(a, b) => Witness {
            system,
            entry: vec![a, b],
            values: vec![named("D", df.entry(a, b))],
        },
        Entry::Single(a) => {
            let mut values = vec![named("p", real(df.p[a])), named("q", df.q[a])];
            match cond {
                Condition::LinearPositivity => {
                    let row: f64 = (0..df.len()).map(|j| df.entry(a, j).re).sum();
                    values.push(named("row_sum_Re_D", real(row)));
                }
                _ => values.push(named("D(a, not a)", df.rowsum_offdiag(a))),
            }
            Witness { system, entry: vec![a], values }
        }
    }
}

/// Does the condition on both subsystems carry over to the composite?
pub fn forward_diosi_check(cond: Condition, a: &Scenario, b: &Scenario, tol: f64) -> Result<TestVerdict> {
    let (_, f) = compose_with_functionals(a, b)?;
    for (name, df) in [("A", &f.a), ("B", &f.b)] {
        if !classify(df, tol).holds(cond) {
            return Err(Error::Precondition(format!("{cond} does not hold for subsystem {name}")));
        }
    }
    let report = classify(&f.ab, tol);
    let (residual, entry) = evaluate(&f.ab, cond);
    let passed = report.holds(cond);
    let witness = match (passed, entry) {
        (false, Some(e)) => Some(composite_witness(cond, e, f.b.len(), &f)),
        _ => None,
    };
    Ok(TestVerdict {
        test: TestKind::ForwardDiosi,
        condition: cond,
        passed,
        residual: residual.max(0.0),
        witness,
        partial_detail: None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReverseOptions {
    /// Restrict the partial-decoherence branch to near-identical subsystems.
    pub near_identical: bool,
}

/// Does the condition on the composite carry over to each subsystem?
pub fn reverse_diosi_check(
    cond: Condition,
    a: &Scenario,
    b: &Scenario,
    tol: f64,
    opts: ReverseOptions,
) -> Result<TestVerdict> {
    let (_, f) = compose_with_functionals(a, b)?;
    if !classify(&f.ab, tol).holds(cond) {
        return Err(Error::Precondition(format!("{cond} does not hold for the composite")));
    }
    let ra = classify(&f.a, tol);
    let rb = classify(&f.b, tol);
    let passed = ra.holds(cond) && rb.holds(cond);
    let (res_a, entry_a) = evaluate(&f.a, cond);
    let (res_b, entry_b) = evaluate(&f.b, cond);
    let witness = if passed {
        None
    } else if !ra.holds(cond) {
        entry_a.map(|e| single_witness(Some("A"), cond, e, &f.a))
    } else {
        entry_b.map(|e| single_witness(Some("B"), cond, e, &f.b))
    };

    let partial_detail = (cond == Condition::PartialDecoherence).then(|| {
        let (sa, sb) = (f.a.probability_sum(), f.b.probability_sum());
        let normalized = |df: &DecoherenceFunctional, s: f64| {
            (0..df.len())
                .map(|i| (df.q[i] * s - df.p[i]).norm())
                .fold(0.0, f64::max)
        };
        let near_identical = opts.near_identical.then(|| {
            let diff = (sa - sb).abs();
            NearIdentical {
                sum_difference: diff,
                applies: diff <= tol,
                forced_unit_sum: (sa - 1.0).abs() <= tol && (sb - 1.0).abs() <= tol,
            }
        });
        ReversePartialDetail {
            a_homogeneous: a.histories.is_homogeneous(),
            b_homogeneous: b.histories.is_homogeneous(),
            sum_p_a: sa,
            sum_p_b: sb,
            product_sum_residual: (sa * sb - 1.0).abs(),
            normalized_identity_residual: normalized(&f.a, sa).max(normalized(&f.b, sb)),
            near_identical,
        }
    });

    Ok(TestVerdict {
        test: TestKind::ReverseDiosi,
        condition: cond,
        passed,
        residual: res_a.max(res_b).max(0.0),
        witness,
        partial_detail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessOutcome {
    pub verdicts: Vec<TestVerdict>,
    /// `max |D_after(α,α′) − e^{−i(λ_α − λ_α′)} D_before(α,α′)|`, the law implied by
    /// `C_α → e^{−iλ_α} U_k† C_α` with `D(α,α′) = Tr(C_α ρ C_α′†)`.
    pub law_residual: f64,
    pub before: ConditionReport,
    pub after: ConditionReport,
    /// `max_α |p_after(α) − p_before(α)|`.
    pub probability_shift: f64,
    /// `max_α |q_after(α) − q_before(α)|` with `q = p + Σ_{α′≠α} D(α,α′)`.
    pub quasi_shift: f64,
}

/// Applies the perturbation and reports, for each condition that held
/// beforehand, whether it survives. Checks the phase transformation law of
/// `D` entrywise; a violation is an internal fault.
pub fn robustness_check(sc: &Scenario, pert: &PhasePerturbation, tol: f64) -> Result<RobustnessOutcome> {
    let phases = pert.phases_for(&sc.histories)?;
    let perturbed = phase_perturb(&sc.histories, pert)?;
    let before = sc.functional()?;
    let after = decoherence_functional(&perturbed, &sc.state)?;

    let n = before.len();
    let mut law_residual = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let rot = Complex64::from_polar(1.0, phases[b] - phases[a]);
            law_residual = law_residual.max((after.entry(a, b) - rot * before.entry(a, b)).norm());
        }
    }
    if law_residual > tol {
        return Err(Error::Internal(format!(
            "phase transformation law violated (residual {law_residual:.3e})"
        )));
    }

    let rb = classify(&before, tol);
    let ra = classify(&after, tol);
    let verdicts = Condition::ALL
        .into_iter()
        .filter(|&c| rb.holds(c))
        .map(|c| {
            let (residual, entry) = evaluate(&after, c);
            let passed = ra.holds(c);
            TestVerdict {
                test: TestKind::Robustness,
                condition: c,
                passed,
                residual: residual.max(0.0),
                witness: if passed { None } else { entry.map(|e| single_witness(None, c, e, &after)) },
                partial_detail: None,
            }
        })
        .collect();

    let dq = |df: &DecoherenceFunctional, a: usize| df.p[a] + df.rowsum_offdiag(a);
    let probability_shift = (0..n).map(|a| (after.p[a] - before.p[a]).abs()).fold(0.0, f64::max);
    let quasi_shift = (0..n).map(|a| (dq(&after, a) - dq(&before, a)).norm()).fold(0.0, f64::max);

    Ok(RobustnessOutcome {
        verdicts,
        law_residual,
        before: rb,
        after: ra,
        probability_shift,
        quasi_shift,
    })
}
