//! Dense complex linear algebra used by the rest of the crate: Kronecker
//! products, LU solves, the Padé matrix exponential and a Hessenberg QR
//! eigenvalue solver.

use alloc::vec;
use alloc::vec::Vec;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) - b.dot(a)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    ndarray::linalg::kron(a, b)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    frobenius_view(m.view())
}

pub fn frobenius_view(m: ArrayView2<'_, C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn one_norm(m: &CMatrix) -> f64 {
    m.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().iter().sum()
}

pub(crate) fn require_square(m: &CMatrix) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::ShapeMismatch {
            expected: (r, r),
            found: (r, c),
        });
    }
    Ok(r)
}

fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let n = require_square(a)?;
        if !all_finite(a) {
            return Err(Error::NonFinite { routine: "lu" });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[[k, k]].norm();
            for i in k + 1..n {
                let v = lu[[i, k]].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            if best == 0.0 {
                return Err(Error::Singular { pivot: 0.0 });
            }
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
            }
            let pivot = lu[[k, k]];
            for i in k + 1..n {
                let f = lu[[i, k]] / pivot;
                lu[[i, k]] = f;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let t = lu[[k, j]];
                    lu[[i, j]] -= f * t;
                }
            }
        }
        Ok(Lu {
            lu,
            perm,
            min_pivot,
            max_pivot,
        })
    }

    /// Smallest over largest pivot magnitude; a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    pub fn solve_vec(&self, b: &CVector) -> Result<CVector> {
        let n = self.perm.len();
        if b.len() != n {
            return Err(Error::ShapeMismatch {
                expected: (n, 1),
                found: (b.len(), 1),
            });
        }
        let mut x: CVector = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s / self.lu[[i, i]];
        }
        Ok(x)
    }

    pub fn solve_mat(&self, b: &CMatrix) -> Result<CMatrix> {
        let n = self.perm.len();
        if b.nrows() != n {
            return Err(Error::ShapeMismatch {
                expected: (n, b.ncols()),
                found: b.dim(),
            });
        }
        let m = b.ncols();
        let mut x = Array2::zeros((n, m));
        for (i, &p) in self.perm.iter().enumerate() {
            x.row_mut(i).assign(&b.row(p));
        }
        // Row-oriented substitution keeps the inner loop contiguous.
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[[i, j]];
                if l.is_zero() {
                    continue;
                }
                let (head, mut tail) = x.view_mut().split_at(Axis(0), i);
                let src = head.row(j);
                tail.row_mut(0).zip_mut_with(&src, |a, &b| *a -= l * b);
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[[i, j]];
                if u.is_zero() {
                    continue;
                }
                let (mut head, tail) = x.view_mut().split_at(Axis(0), j);
                let src = tail.row(0);
                head.row_mut(i).zip_mut_with(&src, |a, &b| *a -= u * b);
            }
            let d = self.lu[[i, i]];
            x.row_mut(i).mapv_inplace(|z| z / d);
        }
        Ok(x)
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree 13 Padé
/// approximant.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = require_square(a)?;
    if !all_finite(a) {
        return Err(Error::NonFinite { routine: "expm" });
    }
    if n == 0 {
        return Ok(CMatrix::zeros((0, 0)));
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = c(0.5f64.powi(s));
    let a1 = a.mapv(|z| z * scale);
    let id = identity(n);
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = |k: usize| c(PADE13[k]);

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u_poly = a6.dot(&inner_u) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = a1.dot(&u_poly);
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = a6.dot(&inner_v) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = Lu::new(&q)?.solve_mat(&p)?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    if !all_finite(&r) {
        return Err(Error::NonFinite { routine: "expm" });
    }
    Ok(r)
}

/// `expm` computed independently on each decoupled block of the nonzero
/// pattern and reassembled; exact for block-diagonal-after-permutation
/// matrices and much cheaper than the dense route.
pub fn expm_blocks(a: &CMatrix) -> Result<CMatrix> {
    let n = require_square(a)?;
    let mut out = CMatrix::zeros((n, n));
    for block in decoupled_blocks(a) {
        let k = block.len();
        let mut sub = CMatrix::zeros((k, k));
        for (bi, &i) in block.iter().enumerate() {
            for (bj, &j) in block.iter().enumerate() {
                sub[[bi, bj]] = a[[i, j]];
            }
        }
        let e = expm(&sub)?;
        for (bi, &i) in block.iter().enumerate() {
            for (bj, &j) in block.iter().enumerate() {
                out[[i, j]] = e[[bi, bj]];
            }
        }
    }
    Ok(out)
}

/// Groups indices into connected components of the (symmetrized) nonzero
/// pattern, so that the matrix is block diagonal after permutation.
pub fn decoupled_blocks(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for ((i, j), z) in m.indexed_iter() {
        if i != j && !z.is_zero() {
            let ri = find(&mut parent, i);
            let rj = find(&mut parent, j);
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

/// All eigenvalues of a general complex matrix. The matrix is first split
/// into decoupled blocks; each block is reduced to Hessenberg form and
/// iterated with single-shift QR.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    require_square(m)?;
    if !all_finite(m) {
        return Err(Error::NonFinite {
            routine: "eigenvalues",
        });
    }
    let mut out = Vec::with_capacity(m.nrows());
    for block in decoupled_blocks(m) {
        let k = block.len();
        let mut h = Array2::zeros((k, k));
        for (bi, &i) in block.iter().enumerate() {
            for (bj, &j) in block.iter().enumerate() {
                h[[bi, bj]] = m[[i, j]];
            }
        }
        out.extend(dense_eigenvalues(h)?);
    }
    Ok(out)
}

fn dense_eigenvalues(mut h: CMatrix) -> Result<Vec<C64>> {
    let n = h.nrows();
    hessenberg(&mut h);
    let scale = frobenius(&h).max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut eig = vec![C64::zero(); n];
    if n == 0 {
        return Ok(eig);
    }
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let max_total = 60 * n.max(4);
    loop {
        if hi == 0 {
            eig[0] = h[[0, 0]];
            break;
        }
        let mut l = hi;
        while l > 0 {
            let off = h[[l, l - 1]].norm();
            let mut diag = h[[l - 1, l - 1]].norm() + h[[l, l]].norm();
            if diag == 0.0 {
                diag = scale;
            }
            if off <= eps * diag {
                h[[l, l - 1]] = C64::zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[[hi, hi]];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_total {
            return Err(Error::NoConvergence {
                routine: "eigenvalues",
                iterations: total,
                residual: h[[hi, hi - 1]].norm(),
            });
        }
        let mu = if iter.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[[hi, hi]] + c(0.75 * h[[hi, hi - 1]].norm())
        } else {
            wilkinson_shift(
                h[[hi - 1, hi - 1]],
                h[[hi - 1, hi]],
                h[[hi, hi - 1]],
                h[[hi, hi]],
            )
        };
        qr_sweep(&mut h, l, hi, mu);
    }
    Ok(eig)
}

fn wilkinson_shift(a: C64, b: C64, c_: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c_).sqrt();
    let m = (a + d) * 0.5;
    let e1 = m + disc;
    let e2 = m - disc;
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

/// One explicitly shifted QR step restricted to the active block `lo..=hi`.
fn qr_sweep(h: &mut CMatrix, lo: usize, hi: usize, mu: C64) {
    for k in lo..=hi {
        h[[k, k]] -= mu;
    }
    let mut rots: Vec<(C64, C64)> = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let x = h[[k, k]];
        let y = h[[k + 1, k]];
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (cs, sn) = if r == 0.0 {
            (C64::new(1.0, 0.0), C64::zero())
        } else {
            (x / r, y / r)
        };
        for j in k..=hi {
            let p = h[[k, j]];
            let q = h[[k + 1, j]];
            h[[k, j]] = cs.conj() * p + sn.conj() * q;
            h[[k + 1, j]] = -sn * p + cs * q;
        }
        rots.push((cs, sn));
    }
    for (idx, &(cs, sn)) in rots.iter().enumerate() {
        let k = lo + idx;
        let top = (k + 2).min(hi);
        for i in lo..=top {
            let p = h[[i, k]];
            let q = h[[i, k + 1]];
            h[[i, k]] = cs * p + sn * q;
            h[[i, k + 1]] = -sn.conj() * p + cs.conj() * q;
        }
    }
    for k in lo..=hi {
        h[[k, k]] += mu;
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut CMatrix) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[[i, k]]).collect();
        let alpha = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let phase = if v[0].norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            v[0] / v[0].norm()
        };
        v[0] += phase * alpha;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vn;
        }
        // H <- (I - 2vv†) H
        for j in 0..n {
            let mut s = C64::zero();
            for (t, vi) in v.iter().enumerate() {
                s += vi.conj() * h[[k + 1 + t, j]];
            }
            s *= 2.0;
            for (t, vi) in v.iter().enumerate() {
                h[[k + 1 + t, j]] -= vi * s;
            }
        }
        // H <- H (I - 2vv†)
        for i in 0..n {
            let mut s = C64::zero();
            for (t, vi) in v.iter().enumerate() {
                s += h[[i, k + 1 + t]] * vi;
            }
            s *= 2.0;
            for (t, vi) in v.iter().enumerate() {
                h[[i, k + 1 + t]] -= s * vi.conj();
            }
        }
        for i in k + 2..n {
            h[[i, k]] = C64::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        v
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.7;
        let a = array![[c(0.0), c(-t)], [c(t), c(0.0)]];
        let e = expm(&a).unwrap();
        assert_abs_diff_eq!(e[[0, 0]].re, t.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 0]].re, t.sin(), epsilon = 1e-14);
    }

    #[test]
    fn expm_large_norm_nilpotent_and_diagonal() {
        let a = array![[c(3.0), c(100.0)], [c(0.0), c(3.0)]];
        let e = expm(&a).unwrap();
        let e3 = 3.0f64.exp();
        assert_abs_diff_eq!(e[[0, 0]].re, e3, epsilon = 1e-11 * e3);
        assert_abs_diff_eq!(e[[0, 1]].re, 100.0 * e3, epsilon = 1e-11 * 100.0 * e3);
        assert_abs_diff_eq!(e[[1, 0]].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lu_solves_and_detects_singular() {
        let a = array![[c(0.0), c(2.0)], [C64::new(1.0, 1.0), c(1.0)]];
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve_vec(&array![c(2.0), c(3.0)]).unwrap();
        let r = a.dot(&x) - array![c(2.0), c(3.0)];
        assert!(r.iter().all(|z| z.norm() < 1e-14));
        let s = array![[c(1.0), c(2.0)], [c(2.0), c(4.0)]];
        assert!(Lu::new(&s).is_err() || Lu::new(&s).unwrap().pivot_ratio() < 1e-15);
    }

    #[test]
    fn eigenvalues_of_triangular_and_companion() {
        let a = array![
            [c(1.0), c(5.0), c(2.0)],
            [c(0.0), C64::new(0.0, 2.0), c(7.0)],
            [c(0.0), c(0.0), c(-3.0)]
        ];
        let e = sorted(eigenvalues(&a).unwrap());
        assert_abs_diff_eq!(e[0].re, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1].im, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[2].re, 1.0, epsilon = 1e-12);
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let comp = array![
            [c(6.0), c(-11.0), c(6.0)],
            [c(1.0), c(0.0), c(0.0)],
            [c(0.0), c(1.0), c(0.0)]
        ];
        let e = sorted(eigenvalues(&comp).unwrap());
        for (k, z) in e.iter().enumerate() {
            assert_abs_diff_eq!(z.re, (k + 1) as f64, epsilon = 1e-10);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn eigenvalues_rotation_block_is_complex_pair() {
        let a = array![[c(0.0), c(-2.0)], [c(2.0), c(0.0)]];
        let e = sorted(eigenvalues(&a).unwrap());
        assert_abs_diff_eq!(e[0].im.abs(), 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(e[1].im.abs(), 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(e[0].im + e[1].im, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn blockwise_expm_matches_dense() {
        let a = array![
            [c(0.1), c(0.0), c(2.0), c(0.0)],
            [c(0.0), C64::new(0.0, 1.0), c(0.0), c(0.5)],
            [c(-1.0), c(0.0), c(0.3), c(0.0)],
            [c(0.0), c(0.2), c(0.0), c(-0.4)]
        ];
        let d = expm(&a).unwrap();
        let b = expm_blocks(&a).unwrap();
        assert!(frobenius(&(d - b)) < 1e-14);
    }

    #[test]
    fn blocks_split_pattern() {
        let a = array![
            [c(1.0), c(0.0), c(2.0)],
            [c(0.0), c(1.0), c(0.0)],
            [c(0.0), c(0.0), c(1.0)]
        ];
        let b = decoupled_blocks(&a);
        assert_eq!(b, vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn kron_matches_definition() {
        let a = array![[c(1.0), c(2.0)], [c(3.0), c(4.0)]];
        let b = array![[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
        let k = kron(&a, &b);
        assert_eq!(k[[0, 1]], c(1.0));
        assert_eq!(k[[2, 3]], c(4.0));
        assert_eq!(k[[3, 2]], c(4.0));
        assert_eq!(k[[1, 2]], c(2.0));
        assert_eq!(k[[1, 3]], c(0.0));
    }
}
