//! Truncated Fock space, column-stacked vectorization and the lifts of
//! single-space operators to superoperators.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use ndarray::{Array2, ShapeBuilder};
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::linalg::{self, c, dagger, frobenius, CMatrix, CVector, C64, I};
use crate::{Error, Result};

/// Ladder, position and momentum matrices on the span of `|0>..|N-1>`.
///
/// `x = (a + a†)/√2`, `p = (a - a†)/(i√2)`.
#[derive(Debug, Clone)]
pub struct FockRep {
    dim: usize,
    a: CMatrix,
    a_dag: CMatrix,
    x: CMatrix,
    p: CMatrix,
}

impl FockRep {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension {
                what: "truncation",
                value: dim,
                reason: "need at least two Fock levels",
            });
        }
        let mut a = CMatrix::zeros((dim, dim));
        for n in 1..dim {
            a[[n - 1, n]] = c((n as f64).sqrt());
        }
        let a_dag = dagger(&a);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let x = (&a + &a_dag).mapv(|z| z * s);
        let p = (&a - &a_dag).mapv(|z| z * (-I * s));
        Ok(FockRep { dim, a, a_dag, x, p })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn a_dag(&self) -> &CMatrix {
        &self.a_dag
    }

    pub fn x(&self) -> &CMatrix {
        &self.x
    }

    pub fn p(&self) -> &CMatrix {
        &self.p
    }

    pub fn number(&self) -> CMatrix {
        self.a_dag.dot(&self.a)
    }

    pub fn identity(&self) -> CMatrix {
        linalg::identity(self.dim)
    }
}

/// Position of the entry `(row, col)` in the column-stacked vector.
pub fn vec_index(dim: usize, row: usize, col: usize) -> usize {
    row + col * dim
}

pub fn vectorize(rho: &CMatrix) -> CVector {
    rho.t().iter().cloned().collect()
}

pub fn devectorize(v: &CVector) -> Result<CMatrix> {
    let len = v.len();
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(Error::InvalidDimension {
            what: "vectorized density matrix",
            value: len,
            reason: "length is not a perfect square",
        });
    }
    Array2::from_shape_vec((n, n).f(), v.to_vec()).map_err(|_| Error::ShapeMismatch {
        expected: (n, n),
        found: (len, 1),
    })
}

/// A linear map on `N × N` matrices stored as an `N² × N²` matrix acting on
/// column-stacked vectors.
#[derive(Debug, Clone)]
pub struct SuperOp {
    dim: usize,
    matrix: CMatrix,
    params: BTreeMap<String, f64>,
}

impl SuperOp {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        let d2 = dim * dim;
        if matrix.dim() != (d2, d2) {
            return Err(Error::ShapeMismatch {
                expected: (d2, d2),
                found: matrix.dim(),
            });
        }
        Ok(SuperOp {
            dim,
            matrix,
            params: BTreeMap::new(),
        })
    }

    pub fn zero(dim: usize) -> Self {
        let d2 = dim * dim;
        SuperOp {
            dim,
            matrix: CMatrix::zeros((d2, d2)),
            params: BTreeMap::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SuperOp {
            dim,
            matrix: linalg::identity(dim * dim),
            params: BTreeMap::new(),
        }
    }

    /// `ρ ↦ X ρ Y`.
    pub fn sandwich(x: &CMatrix, y: &CMatrix) -> Result<Self> {
        let n = linalg::require_square(x)?;
        if y.dim() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                found: y.dim(),
            });
        }
        let yt = y.t().to_owned();
        Ok(SuperOp {
            dim: n,
            matrix: linalg::kron(&yt, x),
            params: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.dim() != (self.dim, self.dim) {
            return Err(Error::ShapeMismatch {
                expected: (self.dim, self.dim),
                found: rho.dim(),
            });
        }
        devectorize(&self.matrix.dot(&vectorize(rho)))
    }

    pub fn apply_vec(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.matrix.ncols() {
            return Err(Error::ShapeMismatch {
                expected: (self.matrix.ncols(), 1),
                found: (v.len(), 1),
            });
        }
        Ok(self.matrix.dot(v))
    }

    /// `self ∘ other`, i.e. `other` acts first.
    pub fn compose(&self, other: &SuperOp) -> Result<SuperOp> {
        self.check_same(other)?;
        Ok(SuperOp {
            dim: self.dim,
            matrix: self.matrix.dot(&other.matrix),
            params: BTreeMap::new(),
        })
    }

    pub fn commutator(&self, other: &SuperOp) -> Result<SuperOp> {
        self.check_same(other)?;
        Ok(SuperOp {
            dim: self.dim,
            matrix: self.matrix.dot(&other.matrix) - other.matrix.dot(&self.matrix),
            params: BTreeMap::new(),
        })
    }

    pub fn scaled(&self, z: C64) -> SuperOp {
        SuperOp {
            dim: self.dim,
            matrix: self.matrix.mapv(|w| w * z),
            params: self.params.clone(),
        }
    }

    pub fn adjoint(&self) -> SuperOp {
        SuperOp {
            dim: self.dim,
            matrix: dagger(&self.matrix),
            params: BTreeMap::new(),
        }
    }

    /// `U K U†` for a square matrix `U` on the doubled space.
    pub fn conjugated(&self, u: &CMatrix) -> Result<SuperOp> {
        if u.dim() != self.matrix.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.matrix.dim(),
                found: u.dim(),
            });
        }
        Ok(SuperOp {
            dim: self.dim,
            matrix: u.dot(&self.matrix).dot(&dagger(u)),
            params: self.params.clone(),
        })
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.matrix)
    }

    /// Largest deviation of `Tr(K ρ)` from zero over the basis `|p><q|`.
    pub fn trace_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for col in 0..n * n {
            let mut t = C64::zero();
            for k in 0..n {
                t += self.matrix[[vec_index(n, k, k), col]];
            }
            worst = worst.max(t.norm());
        }
        worst
    }

    fn check_same(&self, other: &SuperOp) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch {
                expected: self.matrix.dim(),
                found: other.matrix.dim(),
            });
        }
        Ok(())
    }
}

fn assert_same(a: &SuperOp, b: &SuperOp) {
    assert_eq!(a.dim, b.dim, "superoperator dimensions differ");
}

impl Add for &SuperOp {
    type Output = SuperOp;
    /// Panics if the dimensions differ.
    fn add(self, rhs: &SuperOp) -> SuperOp {
        assert_same(self, rhs);
        SuperOp {
            dim: self.dim,
            matrix: &self.matrix + &rhs.matrix,
            params: BTreeMap::new(),
        }
    }
}

impl Sub for &SuperOp {
    type Output = SuperOp;
    /// Panics if the dimensions differ.
    fn sub(self, rhs: &SuperOp) -> SuperOp {
        assert_same(self, rhs);
        SuperOp {
            dim: self.dim,
            matrix: &self.matrix - &rhs.matrix,
            params: BTreeMap::new(),
        }
    }
}

impl Mul for &SuperOp {
    type Output = SuperOp;
    /// Composition; panics if the dimensions differ.
    fn mul(self, rhs: &SuperOp) -> SuperOp {
        assert_same(self, rhs);
        SuperOp {
            dim: self.dim,
            matrix: self.matrix.dot(&rhs.matrix),
            params: BTreeMap::new(),
        }
    }
}

impl Mul<&SuperOp> for C64 {
    type Output = SuperOp;
    fn mul(self, rhs: &SuperOp) -> SuperOp {
        rhs.scaled(self)
    }
}

impl Mul<&SuperOp> for f64 {
    type Output = SuperOp;
    fn mul(self, rhs: &SuperOp) -> SuperOp {
        rhs.scaled(c(self))
    }
}

impl Neg for &SuperOp {
    type Output = SuperOp;
    fn neg(self) -> SuperOp {
        self.scaled(c(-1.0))
    }
}

/// `ρ ↦ X ρ`, i.e. `I ⊗ X`.
pub fn lift_left(x: &CMatrix) -> Result<SuperOp> {
    let n = linalg::require_square(x)?;
    SuperOp::sandwich(x, &linalg::identity(n))
}

/// `ρ ↦ ρ Y`, i.e. `Yᵀ ⊗ I`.
pub fn lift_right(y: &CMatrix) -> Result<SuperOp> {
    let n = linalg::require_square(y)?;
    SuperOp::sandwich(&linalg::identity(n), y)
}

/// The four ladder superoperators of the doubled space:
/// `A ρ = aρ`, `A† ρ = a†ρ`, `Ã ρ = ρa†`, `Ã† ρ = ρa`.
#[derive(Debug, Clone)]
pub struct LadderLifts {
    pub a: SuperOp,
    pub a_dag: SuperOp,
    pub a_tilde: SuperOp,
    pub a_tilde_dag: SuperOp,
}

impl LadderLifts {
    pub fn new(rep: &FockRep) -> Result<Self> {
        Ok(LadderLifts {
            a: lift_left(rep.a())?,
            a_dag: lift_left(rep.a_dag())?,
            a_tilde: lift_right(rep.a_dag())?,
            a_tilde_dag: lift_right(rep.a())?,
        })
    }

    /// `U X U†` applied to each of the four operators.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        Ok(LadderLifts {
            a: self.a.conjugated(u)?,
            a_dag: self.a_dag.conjugated(u)?,
            a_tilde: self.a_tilde.conjugated(u)?,
            a_tilde_dag: self.a_tilde_dag.conjugated(u)?,
        })
    }
}

/// Fock levels `0..=max_level` in both factors of the doubled space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteriorWindow {
    dim: usize,
    max_level: usize,
}

impl InteriorWindow {
    pub fn new(dim: usize, max_level: usize) -> Result<Self> {
        if max_level >= dim {
            return Err(Error::InvalidWindow {
                window: max_level,
                dim,
            });
        }
        Ok(InteriorWindow { dim, max_level })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// True when the window reaches the last level, where `[a, a†] ≠ 1`.
    pub fn touches_edge(&self) -> bool {
        self.max_level + 1 >= self.dim
    }

    pub fn indices(&self) -> Vec<usize> {
        let m = self.max_level;
        let mut out = Vec::with_capacity((m + 1) * (m + 1));
        for q in 0..=m {
            for p in 0..=m {
                out.push(vec_index(self.dim, p, q));
            }
        }
        out
    }

    /// `P X P` as a square matrix on the window indices.
    pub fn restrict(&self, m: &CMatrix) -> Result<CMatrix> {
        let d2 = self.dim * self.dim;
        if m.dim() != (d2, d2) {
            return Err(Error::ShapeMismatch {
                expected: (d2, d2),
                found: m.dim(),
            });
        }
        let idx = self.indices();
        let k = idx.len();
        let mut out = CMatrix::zeros((k, k));
        for (bi, &i) in idx.iter().enumerate() {
            for (bj, &j) in idx.iter().enumerate() {
                out[[bi, bj]] = m[[i, j]];
            }
        }
        Ok(out)
    }

    /// Frobenius norm of `P X P`.
    pub fn norm(&self, m: &CMatrix) -> Result<f64> {
        Ok(frobenius(&self.restrict(m)?))
    }
}

/// Density matrix on the truncated space.
#[derive(Debug, Clone)]
pub struct DensityState {
    matrix: CMatrix,
}

impl DensityState {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let n = linalg::require_square(&matrix)?;
        if n == 0 {
            return Err(Error::InvalidDimension {
                what: "density matrix",
                value: 0,
                reason: "empty",
            });
        }
        Ok(DensityState { matrix })
    }

    pub fn from_vector(v: &CVector) -> Result<Self> {
        Self::from_matrix(devectorize(v)?)
    }

    /// `|k><k|`.
    pub fn fock(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidDimension {
                what: "Fock level",
                value: k,
                reason: "outside the truncated space",
            });
        }
        let mut m = CMatrix::zeros((dim, dim));
        m[[k, k]] = c(1.0);
        Self::from_matrix(m)
    }

    /// `|ψ><ψ|` for a (not necessarily normalized) amplitude vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(Error::UnsupportedState {
                reason: "zero amplitude vector",
                defect: 0.0,
            });
        }
        let n = psi.len();
        let mut m = CMatrix::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] = psi[i] * psi[j].conj() / norm2;
            }
        }
        Self::from_matrix(m)
    }

    /// Thermal state with mean occupation `b - 1/2`, restricted to the
    /// truncated space and renormalized.
    pub fn thermal(dim: usize, b: f64) -> Result<Self> {
        if !(b >= 0.5) || !b.is_finite() {
            return Err(Error::InvalidParameter {
                name: "b",
                value: b,
                reason: "thermal parameter must be finite and at least 1/2",
            });
        }
        let ratio = (b - 0.5) / (b + 0.5);
        let mut pops = Vec::with_capacity(dim);
        let mut w = 1.0;
        for _ in 0..dim {
            pops.push(w);
            w *= ratio;
        }
        let total: f64 = pops.iter().sum();
        let mut m = CMatrix::zeros((dim, dim));
        for (k, p) in pops.iter().enumerate() {
            m[[k, k]] = c(p / total);
        }
        Self::from_matrix(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn vector(&self) -> CVector {
        vectorize(&self.matrix)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        frobenius(&(&self.matrix - &dagger(&self.matrix)))
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t.norm() == 0.0 {
            return Err(Error::UnsupportedState {
                reason: "zero trace",
                defect: 0.0,
            });
        }
        Ok(DensityState {
            matrix: self.matrix.mapv(|z| z / t),
        })
    }

    /// `Tr(ρ O)`.
    pub fn expectation(&self, op: &CMatrix) -> Result<C64> {
        if op.dim() != self.matrix.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.matrix.dim(),
                found: op.dim(),
            });
        }
        let n = self.dim();
        let mut s = C64::zero();
        for i in 0..n {
            for k in 0..n {
                s += self.matrix[[i, k]] * op[[k, i]];
            }
        }
        Ok(s)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|z| z.re).collect()
    }

    /// Population held in the top `levels` Fock states.
    pub fn edge_weight(&self, levels: usize) -> f64 {
        let n = self.dim();
        let start = n.saturating_sub(levels);
        (start..n).map(|k| self.matrix[[k, k]].re.abs()).sum()
    }
}

/// Window residuals of the doubled-space commutation relations.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorCheck {
    pub window: usize,
    /// `[A, A†] - 1` and `[Ã, Ã†] - 1`.
    pub canonical: [f64; 2],
    /// `[A, Ã]`, `[A, Ã†]`, `[A†, Ã]`, `[A†, Ã†]`.
    pub cross: [f64; 4],
    /// `[A - Ã†, (A - Ã†)†]`, which vanishes because the two canonical
    /// pairs cancel.
    pub difference_pair: f64,
    /// The window contains the last level, so the canonical residuals pick
    /// up the truncation defect.
    pub includes_edge: bool,
    /// `|([a, a†] - 1)_{N-1,N-1}|`.
    pub edge_defect: f64,
}

impl CommutatorCheck {
    pub fn max_residual(&self) -> f64 {
        self.canonical
            .iter()
            .chain(self.cross.iter())
            .chain(core::iter::once(&self.difference_pair))
            .fold(0.0, |m, &v| m.max(v))
    }
}

pub fn doubled_commutators_check(rep: &FockRep, window: usize) -> Result<CommutatorCheck> {
    let w = InteriorWindow::new(rep.dim(), window)?;
    let mut chk = lift_commutators(&LadderLifts::new(rep)?, &w)?;
    chk.edge_defect = commutator_edge(rep);
    Ok(chk)
}

/// Commutator residuals for an arbitrary quadruple of doubled-space ladder
/// operators, e.g. rotated ones. `edge_defect` is left at zero.
pub fn lift_commutators(l: &LadderLifts, w: &InteriorWindow) -> Result<CommutatorCheck> {
    let id = SuperOp::identity(l.a.dim());
    let canon = |x: &SuperOp, y: &SuperOp| -> Result<f64> {
        let r = &x.commutator(y)? - &id;
        w.norm(r.matrix())
    };
    let cross = |x: &SuperOp, y: &SuperOp| -> Result<f64> { w.norm(x.commutator(y)?.matrix()) };
    let diff = &l.a - &l.a_tilde_dag;
    let diff_dag = &l.a_dag - &l.a_tilde;
    Ok(CommutatorCheck {
        window: w.max_level(),
        canonical: [canon(&l.a, &l.a_dag)?, canon(&l.a_tilde, &l.a_tilde_dag)?],
        cross: [
            cross(&l.a, &l.a_tilde)?,
            cross(&l.a, &l.a_tilde_dag)?,
            cross(&l.a_dag, &l.a_tilde)?,
            cross(&l.a_dag, &l.a_tilde_dag)?,
        ],
        difference_pair: cross(&diff, &diff_dag)?,
        includes_edge: w.touches_edge(),
        edge_defect: 0.0,
    })
}

fn commutator_edge(rep: &FockRep) -> f64 {
    let n = rep.dim();
    let k = linalg::commutator(rep.a(), rep.a_dag());
    (k[[n - 1, n - 1]] - c(1.0)).norm()
}
