//! Record projectors for decoherent history sets with a pure initial state.

use serde::{Deserialize, Serialize};

use crate::conditions::{decoherence_functional, evaluate, Condition, Entry};
use crate::error::{Error, Result};
use crate::hilbert::State;
use crate::history::HistorySet;
use crate::io;
use crate::linalg::{self, max_abs_diff, trace, CMatrix, CVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledProjector {
    pub history: String,
    #[serde(with = "io::matrix")]
    pub matrix: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSet {
    pub projectors: Vec<LabeledProjector>,
    #[serde(with = "io::matrix")]
    pub rest: CMatrix,
    /// History index → record index; `None` for histories of probability ≤ tol.
    pub mapping: Vec<Option<usize>>,
    /// `max |Tr(R_γ C_α ρ C_α′†) − δ_γα δ_γα′ p(α)|`.
    pub record_residual: f64,
    /// `max_α |p(α) − Tr(R_α ρ)|`, with `Tr(R_α ρ) = 0` for unrecorded α.
    pub probability_residual: f64,
    /// Worst of Hermiticity, idempotence, orthogonality and completeness.
    pub projector_residual: f64,
}

impl RecordSet {
    pub fn record_for(&self, history: usize) -> Option<&CMatrix> {
        self.mapping.get(history).copied().flatten().map(|r| &self.projectors[r].matrix)
    }
}

/// One rank-1 record per history with `‖C_γ ψ‖² > tol`, projecting onto
/// `C_γ ψ` after sequential orthogonalization in history order.
pub fn construct_records(h: &HistorySet, s: &State, tol: f64) -> Result<RecordSet> {
    let psi = s.pure_vector().ok_or(Error::NotPure)?;
    let df = decoherence_functional(h, s)?;
    let (worst, at) = evaluate(&df, Condition::Decoherence);
    if worst > tol {
        let (row, col) = match at {
            Some(Entry::Pair(a, b)) => (a, b),
            _ => (0, 0),
        };
        return Err(Error::NotDecoherent {
            row,
            col,
            magnitude: worst,
        });
    }

    let d = h.dim();
    let branches: Vec<CVector> = h.members().iter().map(|c| &c.matrix * psi).collect();
    let mut basis: Vec<CVector> = Vec::new();
    let mut mapping = Vec::with_capacity(branches.len());
    let mut projectors = Vec::new();
    for (member, v) in h.members().iter().zip(&branches) {
        if v.norm_squared() <= tol {
            mapping.push(None);
            continue;
        }
        let mut w = v.clone();
        for e in &basis {
            let overlap = e.dotc(&w);
            w -= e * overlap;
        }
        let e = w.unscale(w.norm());
        let r = &e * e.adjoint();
        mapping.push(Some(projectors.len()));
        projectors.push(LabeledProjector {
            history: member.label.name.clone(),
            matrix: r,
        });
        basis.push(e);
    }
    let rest = projectors
        .iter()
        .fold(linalg::identity(d), |acc, r| acc - &r.matrix);

    // Tr(R_γ C_α ρ C_α′†) = ⟨v_α′| R_γ |v_α⟩ for ρ = |ψ⟩⟨ψ|
    let n = h.len();
    let mut record_residual = 0.0f64;
    for (alpha_g, slot) in mapping.iter().enumerate() {
        let Some(g) = *slot else { continue };
        let r = &projectors[g].matrix;
        for a in 0..n {
            let rv = r * &branches[a];
            for b in 0..n {
                let value = branches[b].dotc(&rv);
                let want = if a == alpha_g && b == alpha_g { df.p[a] } else { 0.0 };
                record_residual = record_residual.max((value - linalg::c(want, 0.0)).norm());
            }
        }
    }
    let probability_residual = (0..n)
        .map(|a| {
            let recorded = mapping[a].map_or(0.0, |g| trace(&(&projectors[g].matrix * s.rho())).re);
            (df.p[a] - recorded).abs()
        })
        .fold(0.0, f64::max);

    let mut projector_residual = max_abs_diff(&(&rest * &rest), &rest);
    for (i, r) in projectors.iter().enumerate() {
        projector_residual = projector_residual
            .max(linalg::hermiticity_residual(&r.matrix))
            .max(max_abs_diff(&(&r.matrix * &r.matrix), &r.matrix));
        for other in &projectors[i + 1..] {
            projector_residual = projector_residual.max(linalg::max_norm(&(&r.matrix * &other.matrix)));
        }
    }

    Ok(RecordSet {
        projectors,
        rest,
        mapping,
        record_residual,
        probability_residual,
        projector_residual,
    })
}
