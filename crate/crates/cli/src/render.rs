//! Human-readable text reports.

use std::fmt::Write;

use histlab::conditions::ConditionReport;
use histlab::diosi::TestVerdict;
use histlab::explorer::SearchOutcome;
use histlab::scenario_file::Check;
use histlab::Condition;

use crate::{
    AppendixReport, CheckOutcome, ComposeReport, ConditionVerdict, Report, SearchReport, SearchResult,
};

fn fmt_c(z: histlab::io::Pair) -> String {
    let [re, im] = z;
    if im < 0.0 {
        format!("{re:.6e} − {:.6e}i", -im)
    } else {
        format!("{re:.6e} + {im:.6e}i")
    }
}

fn check_name(c: Check) -> &'static str {
    match c {
        Check::Classify => "classify",
        Check::DiosiForward => "diosi_forward",
        Check::DiosiReverse => "diosi_reverse",
        Check::Robustness => "robustness",
        Check::Records => "records",
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn conditions(out: &mut String, r: &ConditionReport) {
    let _ = writeln!(out, "  region: {}  (tolerance {:.1e})", r.venn_region.name(), r.tolerance);
    for cond in Condition::ALL {
        let _ = writeln!(
            out,
            "  {:<20} {:<3}  residual {:.3e}",
            cond.name(),
            yes(r.holds(cond)),
            r.residual(cond)
        );
    }
}

fn verdict(out: &mut String, v: &TestVerdict) {
    let _ = writeln!(
        out,
        "  {:<20} {}  residual {:.3e}",
        v.condition.name(),
        if v.passed { "pass" } else { "FAIL" },
        v.residual
    );
    if let Some(w) = &v.witness {
        let sys = w.system.as_deref().map(|s| format!("subsystem {s}, ")).unwrap_or_default();
        let _ = writeln!(out, "    witness: {sys}entry {:?}", w.entry);
        for nv in &w.values {
            let _ = writeln!(out, "      {} = {}", nv.name, fmt_c(histlab::io::pair(nv.value)));
        }
    }
    if let Some(d) = &v.partial_detail {
        let _ = writeln!(
            out,
            "    homogeneous: A {}, B {}; Σp^A = {:.12}, Σp^B = {:.12}; normalized-identity residual {:.3e}",
            yes(d.a_homogeneous),
            yes(d.b_homogeneous),
            d.sum_p_a,
            d.sum_p_b,
            d.normalized_identity_residual
        );
    }
}

fn verdict_list(out: &mut String, list: &[ConditionVerdict]) {
    for cv in list {
        match (&cv.verdict, &cv.not_applicable) {
            (Some(v), _) => verdict(out, v),
            (None, Some(why)) => {
                let _ = writeln!(out, "  {:<20} n/a   {why}", cv.condition.name());
            }
            (None, None) => {}
        }
    }
}

pub fn report(r: &Report) -> String {
    let mut out = String::new();
    let name = r.scenario.name.as_deref().unwrap_or("scenario");
    let _ = writeln!(
        out,
        "scenario {name}: dimension {}, {} slot(s), {} histories",
        r.scenario.dimension,
        r.scenario.schedule.times.len(),
        r.functional.len()
    );
    let _ = writeln!(out, "decoherence functional:");
    for i in 0..r.functional.len() {
        let row: Vec<String> = (0..r.functional.len())
            .map(|j| fmt_c(histlab::io::pair(r.functional.entry(i, j))))
            .collect();
        let _ = writeln!(out, "  [{}]", row.join(", "));
    }
    let _ = writeln!(out, "p = {:?}", r.functional.p);
    for entry in &r.checks {
        let _ = writeln!(out, "check {}:", check_name(entry.check));
        match &entry.outcome {
            CheckOutcome::Classified { report } => conditions(&mut out, report),
            CheckOutcome::Verdicts { partner, verdicts } => {
                let _ = writeln!(out, "  partner: {partner}");
                verdict_list(&mut out, verdicts);
            }
            CheckOutcome::Robustness { outcome } => {
                let _ = writeln!(
                    out,
                    "  transformation-law residual {:.3e}; max |Δp| {:.3e}; max |Δq| {:.3e}",
                    outcome.law_residual, outcome.probability_shift, outcome.quasi_shift
                );
                for v in &outcome.verdicts {
                    verdict(&mut out, v);
                }
            }
            CheckOutcome::Records { records } => {
                let present = records.mapping.iter().filter(|m| m.is_some()).count();
                let _ = writeln!(
                    out,
                    "  {present} record projector(s); record residual {:.3e}; probability residual {:.3e}",
                    records.record_residual, records.probability_residual
                );
            }
            CheckOutcome::Error { message, .. } => {
                let _ = writeln!(out, "  error: {message}");
            }
        }
    }
    let f = &r.residuals.functional;
    let _ = writeln!(
        out,
        "residuals: hermiticity {:.3e}, ΣC − 1 {:.3e}, ΣC†C − 1 {:.3e}{}",
        f.hermiticity,
        r.residuals.class_operator_sum,
        r.residuals.class_operator_square_sum,
        f.normalization.map(|n| format!(", ΣΣD − 1 {n:.3e}")).unwrap_or_default()
    );
    let _ = writeln!(out, "elapsed {:.1} ms", r.elapsed_ms);
    out
}

pub fn compose(r: &ComposeReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "composite {} ⊗ {}: dimension {}, {} histories",
        r.a, r.b, r.composite_dimension, r.composite_histories
    );
    let _ = writeln!(
        out,
        "factorization residuals: D {:.3e}, q {:.3e}",
        r.factorization.d_residual, r.factorization.q_residual
    );
    let _ = writeln!(out, "forward test:");
    verdict_list(&mut out, &r.forward);
    let _ = writeln!(out, "reverse test:");
    verdict_list(&mut out, &r.reverse);
    out
}

fn outcome_line<T>(out: &mut String, o: &SearchOutcome<T>, describe: impl Fn(&T) -> String) {
    match o {
        SearchOutcome::Found { trial, detail, .. } => {
            let _ = writeln!(out, "found at trial {trial}: {}", describe(detail));
        }
        SearchOutcome::NotFound { trials } => {
            let _ = writeln!(out, "not found in {trials} trials");
        }
    }
}

pub fn search(r: &SearchReport) -> String {
    let mut out = String::new();
    let c = &r.config;
    let _ = writeln!(
        out,
        "search: dimension {}, {} slot(s), family sizes {:?}, {} trials, seed {}",
        c.dim, c.slots, c.family_sizes, c.trials, c.seed
    );
    match &r.result {
        SearchResult::Venn { catalog } => {
            for e in &catalog.regions {
                let _ = writeln!(
                    out,
                    "  {:<10} {:>7}{}",
                    e.region.name(),
                    e.count,
                    match (e.first_trial, e.min_margin) {
                        (Some(t), Some(m)) => format!("  first trial {t}, min margin {m:.3e}"),
                        _ => String::new(),
                    }
                );
            }
            let _ = writeln!(out, "  Σp ≠ 1 in {} trial(s)", catalog.probability_sum_deviations);
        }
        SearchResult::Superprob { outcome } => outcome_line(&mut out, outcome, |d| {
            format!("history {} has p = {:.12}", d.label, d.probability)
        }),
        SearchResult::ForwardFailure { outcome } => outcome_line(&mut out, outcome, |d| {
            format!("{} fails on the composite, residual {:.3e}", d.condition.name(), d.verdict.residual)
        }),
    }
    for p in &r.witness_files {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    out
}

pub fn appendix(r: &AppendixReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "appendix scenario, dimension {}", r.scenario.dimension);
    let _ = writeln!(out, "  ‖C̄†C + C†C̄‖∞ = {:.3e}", r.certificate);
    let _ = writeln!(out, "  D(C, C̄) = {}", fmt_c(r.interference));
    conditions(&mut out, &r.classification);
    match &r.breaking_phase {
        Some(b) => {
            let _ = writeln!(
                out,
                "  phase λ = {:.6} on C breaks consistency: residual {:.3e}, max |Δp| {:.3e}, max |Δq| {:.3e}",
                b.lambda, b.outcome.after.residuals.consistency, b.outcome.probability_shift, b.outcome.quasi_shift
            );
        }
        None => {
            let _ = writeln!(out, "  no phase on the grid breaks consistency");
        }
    }
    out
}
