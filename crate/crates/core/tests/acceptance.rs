//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod oracle;

use std::time::Instant;

use histlab::conditions::quasi_probabilities;
use histlab::diosi::TestVerdict;
use histlab::explorer::{
    appendix_scenario, forward_failure_search, sample_scenario, venn_search, CoarseGraining, SampleConfig,
    SearchOutcome, StateKind,
};
use histlab::hilbert::{haar_pure_state, hilbert_schmidt_state};
use histlab::linalg::{self, c, CMatrix, CVector};
use histlab::{
    compose, construct_records, forward_diosi_check, haar_random_unitary, reverse_diosi_check, robustness_check,
    Condition, Error, Execution, HilbertDim, PhasePerturbation, ReverseOptions, Scenario, State, Unitary,
    VennRegion,
};
use num_complex::Complex64;

const CLASSIFY_TOL: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    match failures.first() {
        None => Outcome {
            pass: true,
            detail: summary,
        },
        Some(first) => Outcome {
            pass: false,
            detail: format!("{summary}; {} failure(s), first: {first}", failures.len()),
        },
    }
}

fn config(dim: usize, slots: usize, sizes: &[usize], mixed: bool, cg: CoarseGraining, trials: u64, seed: u64) -> SampleConfig {
    SampleConfig {
        dim,
        slots,
        family_sizes: sizes.to_vec(),
        state_kind: if mixed { StateKind::MixedRandom } else { StateKind::PureRandom },
        coarse_grainings: cg,
        trials,
        seed,
        tolerance: None,
    }
}

/// The sampled corpus shared by the criteria: qubits and qutrits, one to
/// three slots, fine-grained and randomly coarse-grained, pure and mixed.
fn corpus_configs(per_config: u64, seed: u64) -> Vec<SampleConfig> {
    use CoarseGraining::{None as Fine, RandomPartition as Random};
    let shapes: [(usize, usize, &[usize]); 6] = [
        (2, 1, &[1, 1]),
        (2, 2, &[1, 1]),
        (2, 3, &[1, 1]),
        (3, 1, &[1, 1, 1]),
        (3, 2, &[1, 2]),
        (3, 2, &[1, 1, 1]),
    ];
    let mut out = Vec::new();
    for (i, &(dim, slots, sizes)) in shapes.iter().enumerate() {
        for (j, cg) in [Fine, Random].into_iter().enumerate() {
            for mixed in [false, true] {
                let s = seed + 100 * i as u64 + 10 * j as u64 + mixed as u64;
                out.push(config(dim, slots, sizes, mixed, cg, per_config, s));
            }
        }
    }
    out
}

fn corpus(per_config: u64, seed: u64) -> Vec<Scenario> {
    corpus_configs(per_config, seed)
        .iter()
        .flat_map(|cfg| (0..cfg.trials).map(move |t| sample_scenario(cfg, t).expect("sampling succeeds")))
        .collect()
}

fn canonical_appendix() -> Scenario {
    let p = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
    let psi = CVector::from_vec(vec![c(0.3f64.cos(), 0.0), c(0.0, 0.7).exp() * 0.3f64.sin()]);
    let s = State::from_pure(psi, 1e-10).unwrap();
    appendix_scenario(&p, &Unitary::hadamard(), s).unwrap().scenario
}

fn criterion_1(corpus: &[Scenario]) -> Outcome {
    let mut worst = [0.0f64; 6];
    let mut homogeneous = 0;
    for sc in corpus {
        let df = sc.functional().unwrap();
        let n = df.len();
        let d = &df.d_matrix;
        let total: Complex64 = d.iter().sum();
        let q = quasi_probabilities(&sc.histories, &sc.state).unwrap();
        let decomposition = (0..n)
            .map(|a| (q[a] - (df.p[a] + df.rowsum_offdiag(a))).norm())
            .fold(0.0, f64::max);
        let qsum: Complex64 = q.iter().sum();
        let r = [
            linalg::hermiticity_residual(d),
            (total - 1.0).norm(),
            decomposition,
            (qsum - 1.0).norm(),
            if sc.histories.is_fine_grained() { sc.histories.sum_residual() } else { 0.0 },
            if sc.histories.is_fine_grained() { sc.histories.cdc_residual() } else { 0.0 },
        ];
        homogeneous += sc.histories.is_fine_grained() as usize;
        for (w, x) in worst.iter_mut().zip(r) {
            *w = w.max(x);
        }
    }
    let names = ["D−D†", "ΣΣD−1", "q−p−offdiag", "Σq−1", "ΣC−1", "ΣC†C−1"];
    let failures = names
        .iter()
        .zip(worst)
        .filter(|(_, w)| *w > 1e-10)
        .map(|(n, w)| format!("{n} residual {w:.3e}"))
        .collect();
    let max = worst.iter().copied().fold(0.0, f64::max);
    outcome(
        failures,
        format!("{} scenarios ({homogeneous} fine-grained), max residual {max:.3e}", corpus.len()),
    )
}

fn criterion_2() -> Outcome {
    let shapes: [(usize, &[usize]); 5] = [(2, &[1, 1]), (3, &[1, 1, 1]), (3, &[1, 2]), (4, &[2, 2]), (4, &[1, 1, 1, 1])];
    let mut count = 0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (i, &(dim, sizes)) in shapes.iter().enumerate() {
        for mixed in [false, true] {
            let cfg = config(dim, 1, sizes, mixed, CoarseGraining::None, 100, 900 + 2 * i as u64 + mixed as u64);
            for t in 0..cfg.trials {
                let sc = sample_scenario(&cfg, t).unwrap();
                let df = sc.functional().unwrap();
                let report = histlab::classify(&df, CLASSIFY_TOL);
                let off = report.residuals.decoherence;
                worst = worst.max(off);
                count += 1;
                if !report.flags.decoherent || off > 1e-12 {
                    failures.push(format!("dim {dim} trial {t}: off-diagonal {off:.3e}"));
                }
            }
        }
    }
    outcome(failures, format!("{count} one-slot scenarios, max off-diagonal |D| {worst:.3e}"))
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let (mut total, mut generic) = (0usize, 0usize);
    let (mut worst_cert, mut worst_re) = (0.0f64, 0.0f64);
    for i in 0..1200u64 {
        let dim = 2 + (i % 2) as usize;
        let d = HilbertDim::new(dim).unwrap();
        let rank = 1 + (i as usize / 2) % (dim - 1);
        let basis = haar_random_unitary(d, 10_000 + i);
        let v = basis.matrix().columns(0, rank).into_owned();
        let p = &v * v.adjoint();
        let u = haar_random_unitary(d, 20_000 + i);
        let s = if i % 3 == 0 { hilbert_schmidt_state(d, 30_000 + i) } else { haar_pure_state(d, 30_000 + i) };
        let built = appendix_scenario(&p, &u, s).unwrap();
        let reference = oracle::evaluate(&built.scenario);
        let lib = built.scenario.functional().unwrap().entry(0, 1);
        let re = lib.re.abs().max(reference.d[0][1].re.abs());
        worst_cert = worst_cert.max(built.certificate);
        worst_re = worst_re.max(re);
        if built.certificate > 1e-12 || re > 1e-12 {
            failures.push(format!("instance {i}: certificate {:.3e}, |Re D| {re:.3e}", built.certificate));
        }
        total += 1;
        generic += (lib.im.abs() > 1e-6) as usize;
    }
    let fraction = generic as f64 / total as f64;
    if fraction <= 0.95 {
        failures.push(format!("only {:.1}% have |Im D| > 1e-6", 100.0 * fraction));
    }
    outcome(
        failures,
        format!(
            "{total} instances, max certificate {worst_cert:.3e}, max |Re D| {worst_re:.3e}, |Im D| > 1e-6 in {:.2}%",
            100.0 * fraction
        ),
    )
}

/// Adjacent pairs of the corpus, small enough to compose cheaply.
fn pairs(corpus: &[Scenario]) -> impl Iterator<Item = (&Scenario, &Scenario)> {
    corpus
        .iter()
        .zip(corpus.iter().skip(1))
        .chain(corpus.iter().map(|s| (s, s)))
        .filter(|(a, b)| a.histories.len() * b.histories.len() <= 64 && a.dim() * b.dim() <= 9)
}

fn forward(cond: Condition, a: &Scenario, b: &Scenario) -> Option<TestVerdict> {
    match forward_diosi_check(cond, a, b, CLASSIFY_TOL) {
        Ok(v) => Some(v),
        Err(Error::Precondition(_)) => None,
        Err(e) => panic!("forward check errored: {e}"),
    }
}

fn criterion_4(corpus: &[Scenario]) -> Outcome {
    let mut failures = Vec::new();
    let mut counts = [[0usize; 2]; 4];
    for (a, b) in pairs(corpus) {
        for (k, cond) in Condition::ALL.into_iter().enumerate() {
            if let Some(v) = forward(cond, a, b) {
                counts[k][v.passed as usize] += 1;
                if !v.passed && matches!(cond, Condition::Decoherence | Condition::PartialDecoherence) {
                    failures.push(format!("{cond} failed on {} ⊗ {}", a.name, b.name));
                }
            }
        }
    }
    for k in 0..2 {
        if counts[k][1] == 0 {
            failures.push(format!("no applicable {} pairs in the corpus", Condition::ALL[k]));
        }
    }

    // appendix ⊗ appendix
    let app = canonical_appendix();
    let reference = oracle::evaluate(&app);
    let v = forward(Condition::Consistency, &app, &app).expect("the appendix scenario is consistent");
    let consistency = match &v.witness {
        Some(w) if !v.passed => {
            let nb = app.histories.len();
            let (al, be, al2, be2) = (w.entry[0], w.entry[1], w.entry[2], w.entry[3]);
            let ab = compose(&app, &app).unwrap().functional().unwrap();
            let re = ab.entry(al * nb + be, al2 * nb + be2).re;
            let predicted = -reference.d[al][al2].im * reference.d[be][be2].im;
            if (re - predicted).abs() > 1e-12 || v.residual <= 1e-6 {
                failures.push(format!("appendix witness Re D^AB {re:.6e} vs −Im·Im {predicted:.6e}"));
            }
            re
        }
        _ => {
            failures.push("consistency passed on appendix ⊗ appendix".into());
            0.0
        }
    };

    // stored linear-positivity witness
    let cfg = config(2, 2, &[1, 1], false, CoarseGraining::RandomPartition, 2000, 7);
    let lp = match forward_failure_search(&cfg, Condition::LinearPositivity, 1e-6, Execution::Parallel).unwrap() {
        SearchOutcome::Found { trial, scenario, detail } => {
            let sc = scenario.resolve().unwrap();
            let q = oracle::evaluate(&sc).q;
            let e = &detail.verdict.witness.as_ref().expect("failing verdicts carry a witness").entry;
            let value = (q[e[0]] * q[e[1]]).re;
            if trial != 1 || (value - -0.033550419289525124).abs() > 1e-12 || value >= -1e-6 {
                failures.push(format!("stored LP witness moved: trial {trial}, Re(q^A q^B) = {value:.6e}"));
            }
            value
        }
        SearchOutcome::NotFound { trials } => {
            failures.push(format!("no LP witness in {trials} trials"));
            0.0
        }
    };
    let tally: Vec<String> = Condition::ALL
        .iter()
        .zip(counts)
        .map(|(c, [fail, pass])| format!("{}: {pass} pass/{fail} fail", c.name()))
        .collect();
    outcome(
        failures,
        format!(
            "{}; appendix⊗appendix Re D^AB = {consistency:.6e}; LP witness Re(q^A q^B) = {lp:.6e}",
            tally.join(", ")
        ),
    )
}

fn criterion_5(corpus: &[Scenario]) -> Outcome {
    let mut failures = Vec::new();
    let (mut dec, mut pd_homog, mut pd_all) = (0usize, 0usize, 0usize);
    let mut worst_identity = 0.0f64;
    for (a, b) in pairs(corpus) {
        for cond in [Condition::Decoherence, Condition::PartialDecoherence] {
            let v = match reverse_diosi_check(cond, a, b, CLASSIFY_TOL, ReverseOptions::default()) {
                Ok(v) => v,
                Err(Error::Precondition(_)) => continue,
                Err(e) => panic!("reverse check errored: {e}"),
            };
            if cond == Condition::Decoherence {
                dec += 1;
                if !v.passed {
                    failures.push(format!("decoherence reverse failed on {} ⊗ {}", a.name, b.name));
                }
                continue;
            }
            pd_all += 1;
            let d = v.partial_detail.as_ref().expect("partial decoherence carries detail");
            worst_identity = worst_identity.max(d.normalized_identity_residual);
            if d.normalized_identity_residual > 1e-10 {
                failures.push(format!(
                    "q^A Σp^A ≠ p^A on {} ⊗ {}: {:.3e}",
                    a.name, b.name, d.normalized_identity_residual
                ));
            }
            if d.a_homogeneous && d.b_homogeneous {
                pd_homog += 1;
                if !v.passed {
                    failures.push(format!("homogeneous partial decoherence failed on {} ⊗ {}", a.name, b.name));
                }
            }
        }
    }
    if dec == 0 || pd_homog == 0 {
        failures.push("corpus has no applicable reverse pairs".into());
    }
    outcome(
        failures,
        format!(
            "decoherence {dec} composites, partial decoherence {pd_all} composites ({pd_homog} homogeneous), max identity residual {worst_identity:.3e}"
        ),
    )
}

fn criterion_6(corpus: &[Scenario]) -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let (mut decoherent, mut total) = (0usize, 0usize);
    for (i, sc) in corpus.iter().enumerate().step_by(2) {
        let n = sc.histories.len();
        let u = haar_random_unitary(HilbertDim::new(sc.dim()).unwrap(), 50_000 + i as u64);
        let seed = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1);
        let pert = if sc.histories.is_fine_grained() {
            let slot = i % sc.schedule().slots();
            let m = sc.schedule().families()[slot].len();
            let phases = (0..m).map(|k| ((seed >> (8 * k)) & 0xff) as f64 / 40.0).collect();
            PhasePerturbation::at_slot(slot, phases, u.clone())
        } else {
            let phases = (0..n).map(|k| ((seed >> (4 * k % 56)) & 0xff) as f64 / 40.0).collect();
            PhasePerturbation::per_history(phases, u.clone())
        };
        let lambdas = pert.phases_for(&sc.histories).unwrap();
        let out = match robustness_check(sc, &pert, CLASSIFY_TOL) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("{}: {e}", sc.name));
                continue;
            }
        };
        let reference = oracle::evaluate(sc);
        let after = oracle::perturbed(&reference, &oracle::dense(sc.state.rho()), &lambdas, &oracle::dense(u.matrix()));
        let mut law = out.law_residual;
        for a in 0..n {
            for b in 0..n {
                let expected = Complex64::from_polar(1.0, lambdas[b] - lambdas[a]) * reference.d[a][b];
                law = law.max((after[a][b] - expected).norm());
            }
        }
        worst = worst.max(law);
        if law > 1e-10 {
            failures.push(format!("{}: transformation law residual {law:.3e}", sc.name));
        }
        if out.before.flags.decoherent {
            decoherent += 1;
            if !out.after.flags.decoherent {
                failures.push(format!("{}: decoherence lost", sc.name));
            }
        }
        total += 1;
    }

    let app = canonical_appendix();
    let stored = PhasePerturbation::per_history(vec![std::f64::consts::FRAC_PI_2, 0.0], Unitary::identity(2));
    let out = robustness_check(&app, &stored, CLASSIFY_TOL).unwrap();
    let broken = out
        .verdicts
        .iter()
        .any(|v| v.condition == Condition::Consistency && !v.passed);
    let re_after = {
        let reference = oracle::evaluate(&app);
        let after = oracle::perturbed(&reference, &oracle::dense(app.state.rho()), &[std::f64::consts::FRAC_PI_2, 0.0], &oracle::eye(2));
        after[0][1].re
    };
    if !broken || re_after.abs() <= 1e-6 || out.probability_shift > 1e-12 || out.quasi_shift <= 1e-6 {
        failures.push(format!("stored appendix perturbation did not break consistency (Re D after {re_after:.3e})"));
    }
    outcome(
        failures,
        format!(
            "{total} perturbations ({decoherent} decoherent scenarios), max law residual {worst:.3e}; appendix λ = π/2 gives Re D(C,C̄) = {re_after:.6e}"
        ),
    )
}

fn criterion_7(corpus: &[Scenario]) -> Outcome {
    let mut failures = Vec::new();
    let (mut checked, mut multi_slot) = (0usize, 0usize);
    let (mut worst_record, mut worst_prob) = (0.0f64, 0.0f64);
    for sc in corpus {
        if !sc.state.is_pure() || !sc.classify(CLASSIFY_TOL).unwrap().flags.decoherent {
            continue;
        }
        let records = construct_records(&sc.histories, &sc.state, CLASSIFY_TOL).unwrap();
        let reference = oracle::evaluate(sc);
        let rho = oracle::dense(sc.state.rho());
        let n = reference.class_operators.len();
        let mut record = 0.0f64;
        let mut prob = 0.0f64;
        for g in 0..n {
            let r = match records.record_for(g) {
                Some(r) => oracle::dense(r),
                None => {
                    prob = prob.max(reference.p[g].abs());
                    continue;
                }
            };
            for a in 0..n {
                for b in 0..n {
                    let value = oracle::trace(&oracle::mul(
                        &oracle::mul(&oracle::mul(&r, &reference.class_operators[a]), &rho),
                        &oracle::dagger(&reference.class_operators[b]),
                    ));
                    let expected = if g == a && g == b { reference.p[a] } else { 0.0 };
                    record = record.max((value - expected).norm());
                }
            }
            prob = prob.max((oracle::trace(&oracle::mul(&r, &rho)).re - reference.p[g]).abs());
        }
        worst_record = worst_record.max(record);
        worst_prob = worst_prob.max(prob);
        if record > 1e-9 || prob > 1e-10 {
            failures.push(format!("{}: record {record:.3e}, probability {prob:.3e}", sc.name));
        }
        checked += 1;
        multi_slot += (sc.schedule().slots() > 1) as usize;
    }
    if multi_slot == 0 {
        failures.push("no multi-slot decoherent pure-state scenario in the corpus".into());
    }
    outcome(
        failures,
        format!(
            "{checked} decoherent pure-state scenarios ({multi_slot} multi-slot), max record residual {worst_record:.3e}, max probability residual {worst_prob:.3e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    let pinned: [(&str, SampleConfig, [u64; 6]); 2] = [
        (
            "qubit",
            config(2, 2, &[1, 1], false, CoarseGraining::RandomPartition, 10_000, 42),
            [2106, 0, 0, 688, 5362, 1844],
        ),
        (
            "qutrit",
            config(3, 2, &[1, 1, 1], false, CoarseGraining::RandomPartition, 10_000, 42),
            [7, 0, 0, 4, 5044, 4945],
        ),
    ];
    for (name, cfg, expected) in pinned.iter().cloned() {
        let cat = venn_search(&cfg, Execution::Parallel).unwrap();
        let counts: Vec<u64> = VennRegion::ALL.iter().map(|&r| cat.count(r)).collect();
        if counts != expected {
            failures.push(format!("{name} counts {counts:?}, pinned {expected:?}"));
        }
        for r in [VennRegion::Decoherent, VennRegion::ConsistentOnly] {
            if cat.count(r) == 0 {
                failures.push(format!("{name}: region {} empty", r.name()));
            }
        }
        lines.push(format!("{name} {counts:?}"));
    }
    // the qubit fixture, reclassified by the brute-force evaluator
    let cfg = &pinned[0].1;
    let mut oracle_counts = [0u64; 6];
    for t in 0..cfg.trials {
        let sc = sample_scenario(cfg, t).unwrap();
        let name = oracle::region(&oracle::evaluate(&sc).d, CLASSIFY_TOL);
        let k = VennRegion::ALL.iter().position(|r| r.name() == name).unwrap();
        oracle_counts[k] += 1;
    }
    if oracle_counts != pinned[0].2 {
        failures.push(format!("oracle reclassification gives {oracle_counts:?}"));
    }
    outcome(failures, format!("{} (regions D, PD∩C∖D, PD∖C, C∖PD, LP∖(PD∪C), none)", lines.join("; ")))
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 3];
    let cfgs = corpus_configs(5, 7_000);
    let mut count = 0;
    for cfg in cfgs.iter().cycle().take(20) {
        for t in 0..cfg.trials {
            let sc = sample_scenario(cfg, t).unwrap();
            let df = sc.functional().unwrap();
            let r = oracle::evaluate(&sc);
            let n = df.len();
            let mut dd = 0.0f64;
            for a in 0..n {
                for b in 0..n {
                    dd = dd.max((df.entry(a, b) - r.d[a][b]).norm());
                }
            }
            let dp = df.p.iter().zip(&r.p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let dq = df.q.iter().zip(&r.q).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            for (w, x) in worst.iter_mut().zip([dd, dp, dq]) {
                *w = w.max(x);
            }
            if dd.max(dp).max(dq) > 1e-12 {
                failures.push(format!("{}: D {dd:.3e}, p {dp:.3e}, q {dq:.3e}", sc.name));
            }
            count += 1;
        }
    }
    if count < 100 {
        failures.push(format!("only {count} scenarios"));
    }
    outcome(
        failures,
        format!("{count} scenarios, max deviation D {:.3e}, p {:.3e}, q {:.3e}", worst[0], worst[1], worst[2]),
    )
}

fn main() {
    let start = Instant::now();
    let corpus = corpus(50, 1);
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "algebraic identities", Box::new(|| criterion_1(&corpus))),
        (2, "single-time decoherence", Box::new(criterion_2)),
        (3, "appendix reproduction", Box::new(criterion_3)),
        (4, "forward Diósi verdicts", Box::new(|| criterion_4(&corpus))),
        (5, "reverse Diósi verdicts", Box::new(|| criterion_5(&corpus))),
        (6, "robustness", Box::new(|| criterion_6(&corpus))),
        (7, "records", Box::new(|| criterion_7(&corpus))),
        (8, "Venn catalog regression", Box::new(criterion_8)),
        (9, "oracle equivalence", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (n, title, run) in criteria {
        let t = Instant::now();
        let o = run();
        failed += (!o.pass) as usize;
        println!(
            "criterion {n} {}: {title}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of 9 criteria passed in {:.1}s", 9 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
