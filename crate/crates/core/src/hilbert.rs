//! Finite-dimensional Hilbert-space primitives: states, unitaries, projector
//! families, time-slot schedules and seeded Haar sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result, Violation};
use crate::linalg::{
    self, c, ensure_dim, ensure_square, hermitian_eigenvalues, hermiticity_residual, max_abs_diff,
    CMatrix, CVector, ONE,
};

/// Hilbert-space dimension, always at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HilbertDim(usize);

impl HilbertDim {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("Hilbert-space dimension must be at least 1".into()));
        }
        Ok(HilbertDim(d))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// A density matrix. Pure inputs are promoted to `v v†` and keep their vector.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    rho: CMatrix,
    pure: Option<CVector>,
}

impl State {
    /// Promote a normalized vector to a density matrix. No silent renormalization.
    pub fn from_pure(v: CVector, tol: f64) -> Result<Self> {
        let norm = v.norm();
        if v.is_empty() || norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        if (norm - 1.0).abs() > tol {
            return Err(Error::invalid(
                "state vector",
                vec![Violation {
                    what: "norm ≠ 1",
                    residual: (norm - 1.0).abs(),
                }],
            ));
        }
        let rho = &v * v.adjoint();
        Ok(State { rho, pure: Some(v) })
    }

    /// Wrap a density matrix after checking Hermiticity, unit trace and positivity.
    pub fn from_density(m: CMatrix, tol: f64) -> Result<Self> {
        ensure_square(&m)?;
        let mut violations = Vec::new();
        let herm = hermiticity_residual(&m);
        if herm > tol {
            violations.push(Violation {
                what: "not Hermitian",
                residual: herm,
            });
        }
        let tr = linalg::trace(&m);
        let tr_res = (tr - ONE).norm();
        if tr_res > tol {
            violations.push(Violation {
                what: "trace ≠ 1",
                residual: tr_res,
            });
        }
        let min_ev = hermitian_eigenvalues(&m).first().copied().unwrap_or(0.0);
        if min_ev < -tol {
            violations.push(Violation {
                what: "not PSD",
                residual: -min_ev,
            });
        }
        if !violations.is_empty() {
            return Err(Error::invalid("density matrix", violations));
        }
        Ok(State { rho: m, pure: None })
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn is_pure(&self) -> bool {
        self.pure.is_some()
    }

    /// The generating vector when the state was built from one.
    pub fn pure_vector(&self) -> Option<&CVector> {
        self.pure.as_ref()
    }

    /// Product state `self ⊗ other`; purity is kept when both factors are pure.
    pub fn tensor(&self, other: &State) -> State {
        let pure = match (&self.pure, &other.pure) {
            (Some(a), Some(b)) => Some(a.kronecker(b)),
            _ => None,
        };
        State {
            rho: tensor(&self.rho, &other.rho),
            pure,
        }
    }
}

/// A unitary matrix (`u†u = 1` within tolerance).
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(CMatrix);

impl Unitary {
    pub fn new(u: CMatrix, tol: f64) -> Result<Self> {
        let d = ensure_square(&u)?;
        let res = max_abs_diff(&(u.adjoint() * &u), &linalg::identity(d));
        if res > tol {
            return Err(Error::invalid(
                "unitary",
                vec![Violation {
                    what: "u†u ≠ 1",
                    residual: res,
                }],
            ));
        }
        Ok(Unitary(u))
    }

    pub fn identity(d: usize) -> Self {
        Unitary(linalg::identity(d))
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Unitary(CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]))
    }

    /// `exp(-i H t)` for a Hermitian `H`.
    pub fn from_hamiltonian(h: &CMatrix, t: f64, tol: f64) -> Result<Self> {
        ensure_square(h)?;
        let herm = hermiticity_residual(h);
        if herm > tol {
            return Err(Error::invalid(
                "hamiltonian",
                vec![Violation {
                    what: "not Hermitian",
                    residual: herm,
                }],
            ));
        }
        Ok(Unitary(linalg::unitary_from_hamiltonian(h, t)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn tensor(&self, other: &Unitary) -> Unitary {
        Unitary(tensor(&self.0, &other.0))
    }
}

/// An exhaustive, exclusive set of orthogonal projectors for one time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorFamily {
    members: Vec<CMatrix>,
    labels: Vec<String>,
}

impl ProjectorFamily {
    /// Checks Hermiticity, idempotence, completeness and mutual orthogonality,
    /// reporting the max-norm residual of every violated condition.
    pub fn validate(mats: Vec<CMatrix>, labels: Option<Vec<String>>, tol: f64) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::invalid("projector family", vec![Violation { what: "empty family", residual: 0.0 }]))?;
        let d = ensure_square(first)?;
        for m in &mats {
            ensure_dim(m, d)?;
        }
        let labels = match labels {
            Some(l) if l.len() != mats.len() => {
                return Err(Error::DimensionMismatch {
                    expected: mats.len(),
                    got: l.len(),
                })
            }
            Some(l) => l,
            None => (0..mats.len()).map(|i| i.to_string()).collect(),
        };

        let mut herm = 0.0f64;
        let mut idem = 0.0f64;
        let mut orth = 0.0f64;
        for (a, pa) in mats.iter().enumerate() {
            herm = herm.max(hermiticity_residual(pa));
            idem = idem.max(max_abs_diff(&(pa * pa), pa));
            for pb in mats.iter().skip(a + 1) {
                orth = orth.max(linalg::max_norm(&(pa * pb)));
                orth = orth.max(linalg::max_norm(&(pb * pa)));
            }
        }
        let sum = mats.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
        let complete = max_abs_diff(&sum, &linalg::identity(d));

        let violations: Vec<Violation> = [
            ("not Hermitian", herm),
            ("not idempotent", idem),
            ("completeness violated", complete),
            ("orthogonality violated", orth),
        ]
        .into_iter()
        .filter(|(_, r)| *r > tol)
        .map(|(what, residual)| Violation { what, residual })
        .collect();
        if !violations.is_empty() {
            return Err(Error::invalid("projector family", violations));
        }
        Ok(ProjectorFamily {
            members: mats,
            labels,
        })
    }

    /// Projectors onto groups of columns of an orthonormal basis.
    pub fn from_basis_groups(basis: &CMatrix, groups: &[Vec<usize>], tol: f64) -> Result<Self> {
        let d = ensure_square(basis)?;
        let gram = basis.adjoint() * basis;
        let res = max_abs_diff(&gram, &linalg::identity(d));
        if res > tol {
            return Err(Error::invalid(
                "basis",
                vec![Violation {
                    what: "columns not orthonormal",
                    residual: res,
                }],
            ));
        }
        let mut seen = vec![false; d];
        for g in groups {
            for &i in g {
                if i >= d {
                    return Err(Error::IndexOutOfRange {
                        what: "basis column",
                        index: i,
                        len: d,
                    });
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("basis column {i} appears twice")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("basis column {missing} not grouped")));
        }
        let mats = groups
            .iter()
            .map(|g| {
                g.iter().fold(CMatrix::zeros(d, d), |acc, &i| {
                    let col = basis.column(i);
                    acc + &col * col.adjoint()
                })
            })
            .collect();
        Self::validate(mats, None, tol)
    }

    /// The two-outcome family `{P, 1 - P}`.
    pub fn binary(p: CMatrix, tol: f64) -> Result<Self> {
        let d = ensure_square(&p)?;
        let q = linalg::identity(d) - &p;
        Self::validate(vec![p, q], Some(vec!["P".into(), "P̄".into()]), tol)
    }

    pub fn members(&self) -> &[CMatrix] {
        &self.members
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].nrows()
    }

    /// `{P_a ⊗ 1}` or `{1 ⊗ P_a}` on a composite space.
    pub(crate) fn embed(&self, left: usize, right: usize) -> ProjectorFamily {
        let l = linalg::identity(left);
        let r = linalg::identity(right);
        ProjectorFamily {
            members: self.members.iter().map(|p| tensor(&tensor(&l, p), &r)).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Time slots with their evolution operators and projector families.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<f64>,
    evolutions: Vec<Unitary>,
    families: Vec<ProjectorFamily>,
    heisenberg: Vec<Vec<CMatrix>>,
}

impl Schedule {
    pub fn new(times: Vec<f64>, evolutions: Vec<Unitary>, families: Vec<ProjectorFamily>) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::Config("a schedule needs at least one time slot".into()));
        }
        if evolutions.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: evolutions.len(),
            });
        }
        if families.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: families.len(),
            });
        }
        if let Some(w) = times.windows(2).find(|w| !(w[0] <= w[1])) {
            return Err(Error::Config(format!("time labels out of order: {} then {}", w[0], w[1])));
        }
        let d = families[0].dim();
        for (u, f) in evolutions.iter().zip(&families) {
            ensure_dim(u.matrix(), d)?;
            if f.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: f.dim(),
                });
            }
        }
        let heisenberg = evolutions
            .iter()
            .zip(&families)
            .map(|(u, f)| {
                f.members()
                    .iter()
                    .map(|p| heisenberg_projector(p, u))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule {
            times,
            evolutions,
            families,
            heisenberg,
        })
    }

    /// Per-slot evolutions `exp(-i H t_k)` for a time-independent Hamiltonian.
    pub fn from_hamiltonian(h: &CMatrix, times: Vec<f64>, families: Vec<ProjectorFamily>, tol: f64) -> Result<Self> {
        let evolutions = times
            .iter()
            .map(|&t| Unitary::from_hamiltonian(h, t, tol))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, evolutions, families)
    }

    /// One slot, identity evolution.
    pub fn single(family: ProjectorFamily) -> Self {
        let d = family.dim();
        Self::new(vec![0.0], vec![Unitary::identity(d)], vec![family]).expect("single-slot schedule is valid")
    }

    pub fn slots(&self) -> usize {
        self.times.len()
    }

    pub fn dim(&self) -> usize {
        self.families[0].dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn evolutions(&self) -> &[Unitary] {
        &self.evolutions
    }

    pub fn families(&self) -> &[ProjectorFamily] {
        &self.families
    }

    pub fn family_sizes(&self) -> Vec<usize> {
        self.families.iter().map(ProjectorFamily::len).collect()
    }

    /// Heisenberg-picture projector `P_a(t_k)`.
    pub fn projector(&self, slot: usize, outcome: usize) -> &CMatrix {
        &self.heisenberg[slot][outcome]
    }

    /// Composite schedule on `A ⊗ B`: slots of both factors merged by time
    /// (ties keep `A` first), each embedded with identity on the other factor.
    pub(crate) fn compose(a: &Schedule, b: &Schedule) -> (Schedule, Vec<SlotSource>) {
        let (da, db) = (a.dim(), b.dim());
        let mut order: Vec<SlotSource> = (0..a.slots())
            .map(SlotSource::A)
            .chain((0..b.slots()).map(SlotSource::B))
            .collect();
        order.sort_by(|x, y| {
            let tx = x.time(a, b);
            let ty = y.time(a, b);
            tx.total_cmp(&ty)
        });
        let mut times = Vec::new();
        let mut evolutions = Vec::new();
        let mut families = Vec::new();
        for src in &order {
            match *src {
                SlotSource::A(k) => {
                    times.push(a.times[k]);
                    evolutions.push(a.evolutions[k].tensor(&Unitary::identity(db)));
                    families.push(a.families[k].embed(1, db));
                }
                SlotSource::B(k) => {
                    times.push(b.times[k]);
                    evolutions.push(Unitary::identity(da).tensor(&b.evolutions[k]));
                    families.push(b.families[k].embed(da, 1));
                }
            }
        }
        let s = Schedule::new(times, evolutions, families).expect("composite of valid schedules is valid");
        (s, order)
    }
}

/// Which factor a composite slot came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SlotSource {
    A(usize),
    B(usize),
}

impl SlotSource {
    fn time(&self, a: &Schedule, b: &Schedule) -> f64 {
        match *self {
            SlotSource::A(k) => a.times[k],
            SlotSource::B(k) => b.times[k],
        }
    }
}

/// `U† P U`, the Heisenberg-picture form of a Schrödinger-picture projector.
pub fn heisenberg_projector(p: &CMatrix, u: &Unitary) -> Result<CMatrix> {
    ensure_dim(p, u.dim())?;
    Ok(u.matrix().adjoint() * p * u.matrix())
}

/// Kronecker product, row-major composite index `i * d_B + j`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    linalg::kron(a, b)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    // Fill row-major so the draw order does not depend on storage layout.
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = complex_gaussian(rng);
        }
    }
    m
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix, with the phases
/// of `diag(R)` absorbed into `Q` so the factorization is unique.
pub fn haar_unitary_with<R: Rng + ?Sized>(rng: &mut R, d: HilbertDim) -> Unitary {
    let d = d.get();
    let g = gaussian_matrix(rng, d);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CVector::from_iterator(
        d,
        (0..d).map(|i| {
            let z = r[(i, i)];
            if z.norm() == 0.0 {
                ONE
            } else {
                z / z.norm()
            }
        }),
    );
    Unitary(q * CMatrix::from_diagonal(&phases))
}

pub fn haar_random_unitary(d: HilbertDim, seed: u64) -> Unitary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary_with(&mut rng, d)
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn haar_pure_state_with<R: Rng + ?Sized>(rng: &mut R, d: HilbertDim) -> State {
    let v = CVector::from_iterator(d.get(), (0..d.get()).map(|_| complex_gaussian(rng)));
    let v = v.unscale(v.norm());
    let rho = &v * v.adjoint();
    State { rho, pure: Some(v) }
}

/// Mixed state from the Hilbert–Schmidt measure, `G G† / Tr(G G†)`.
pub fn hilbert_schmidt_state_with<R: Rng + ?Sized>(rng: &mut R, d: HilbertDim) -> State {
    let g = gaussian_matrix(rng, d.get());
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    let mut rho = m.unscale(tr);
    // exact Hermiticity
    rho = (&rho + rho.adjoint()).scale(0.5);
    State { rho, pure: None }
}

pub fn haar_pure_state(d: HilbertDim, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_pure_state_with(&mut rng, d)
}

pub fn hilbert_schmidt_state(d: HilbertDim, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    hilbert_schmidt_state_with(&mut rng, d)
}

#[cfg(test)]
pub(crate) fn basis_state(d: usize, i: usize) -> CVector {
    CVector::from_fn(d, |k, _| if k == i { ONE } else { crate::linalg::ZERO })
}
