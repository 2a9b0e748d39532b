//! Brute-force reference evaluator. Works on plain nested vectors with
//! explicit index loops and shares no arithmetic with the library.

#![allow(dead_code)]

use histlab::history::LabelKind;
use histlab::Scenario;
use num_complex::Complex64;

pub type Dense = Vec<Vec<Complex64>>;

pub fn dense(m: &histlab::linalg::CMatrix) -> Dense {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn eye(d: usize) -> Dense {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).collect())
        .collect()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let d = a.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); b[0].len()]; d];
    for i in 0..d {
        for j in 0..b[0].len() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..b.len() {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn dagger(a: &Dense) -> Dense {
    (0..a[0].len()).map(|i| (0..a.len()).map(|j| a[j][i].conj()).collect()).collect()
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn trace(a: &Dense) -> Complex64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn max_norm(a: &Dense) -> f64 {
    a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

pub struct Reference {
    pub d: Dense,
    pub p: Vec<f64>,
    pub q: Vec<Complex64>,
    pub class_operators: Vec<Dense>,
}

/// `C = Σ_chains P_{a_n}(t_n) ⋯ P_{a_1}(t_1)` with `P(t) = U(t)† P U(t)`.
pub fn class_operator(sc: &Scenario, chains: &[Vec<usize>]) -> Dense {
    let s = sc.schedule();
    let dim = sc.dim();
    let mut total = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for chain in chains {
        let mut c = eye(dim);
        for (k, &a) in chain.iter().enumerate() {
            let u = dense(s.evolutions()[k].matrix());
            let p = dense(&s.families()[k].members()[a]);
            let heis = mul(&dagger(&u), &mul(&p, &u));
            c = mul(&heis, &c);
        }
        total = add(&total, &c);
    }
    total
}

/// Reference `D`, `p`, `q` for an unperturbed scenario.
pub fn evaluate(sc: &Scenario) -> Reference {
    let rho = dense(sc.state.rho());
    let cs: Vec<Dense> = sc
        .histories
        .members()
        .iter()
        .map(|m| match &m.label.kind {
            LabelKind::Chain(c) => class_operator(sc, std::slice::from_ref(c)),
            LabelKind::Sum(cs) => class_operator(sc, cs),
        })
        .collect();
    let n = cs.len();
    let mut d = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for a in 0..n {
        for b in 0..n {
            d[a][b] = trace(&mul(&mul(&cs[a], &rho), &dagger(&cs[b])));
        }
    }
    let p = (0..n).map(|a| d[a][a].re).collect();
    let q = cs.iter().map(|c| trace(&mul(c, &rho))).collect();
    Reference {
        d,
        p,
        q,
        class_operators: cs,
    }
}

/// Reference `D` after `C_α → e^{−iλ_α} U† C_α`.
pub fn perturbed(reference: &Reference, rho: &Dense, phases: &[f64], u: &Dense) -> Dense {
    let ud = dagger(u);
    let cs: Vec<Dense> = reference
        .class_operators
        .iter()
        .zip(phases)
        .map(|(c, &l)| {
            let rot = Complex64::from_polar(1.0, -l);
            mul(&ud, c).into_iter().map(|r| r.into_iter().map(|z| z * rot).collect()).collect()
        })
        .collect();
    let n = cs.len();
    (0..n)
        .map(|a| (0..n).map(|b| trace(&mul(&mul(&cs[a], rho), &dagger(&cs[b])))).collect())
        .collect()
}

/// Region name from the four conditions evaluated directly on `D`.
pub fn region(d: &Dense, tol: f64) -> &'static str {
    let n = d.len();
    let mut dec = 0.0f64;
    let mut cons = 0.0f64;
    let mut pd = 0.0f64;
    let mut lp = 0.0f64;
    for a in 0..n {
        let mut off = Complex64::new(0.0, 0.0);
        let mut re_row = 0.0;
        for b in 0..n {
            re_row += d[a][b].re;
            if a != b {
                dec = dec.max(d[a][b].norm());
                cons = cons.max(d[a][b].re.abs());
                off += d[a][b];
            }
        }
        pd = pd.max(off.norm());
        lp = lp.max(-re_row);
    }
    let (is_d, is_pd, is_c, is_lp) = (dec <= tol, pd <= tol, cons <= tol, lp <= tol);
    match (is_d, is_pd, is_c, is_lp) {
        (true, ..) => "D",
        (false, true, true, _) => "PD∩C∖D",
        (false, true, false, _) => "PD∖C",
        (false, false, true, _) => "C∖PD",
        (false, false, false, true) => "LP∖(PD∪C)",
        _ => "none",
    }
}
