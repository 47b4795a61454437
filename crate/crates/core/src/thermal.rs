//! The thermal rotation `U(θ) = exp(iGθ)`, its 2×2 and 4×4 real avatars,
//! the SU(1,1) generators, symmetry residuals between temperatures, and the
//! reduction of the extended dissipator by a single-mode Bogoliubov map.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fock::{lift_commutators, CommutatorCheck, FockRep, InteriorWindow, LadderLifts, SuperOp};
use crate::linalg::{self, c, expm, expm_blocks, frobenius, CMatrix, Lu, C64, I};
use crate::superops::{b_tilde, extended_dissipator, lindblad_pair, ThermalFamily};
use crate::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];
pub type Mat4 = [[f64; 4]; 4];

/// `G = i(AÃ - A†Ã†)`, i.e. `Gρ = i(aρa† - a†ρa)`.
pub fn generator_g(rep: &FockRep) -> Result<SuperOp> {
    let pair_down = SuperOp::sandwich(rep.a(), rep.a_dag())?;
    let pair_up = SuperOp::sandwich(rep.a_dag(), rep.a())?;
    Ok((&pair_down - &pair_up).scaled(I))
}

/// `[[cosh θ, sinh θ], [sinh θ, cosh θ]]`.
pub fn hyperbolic_r(theta: f64) -> Mat2 {
    let (ch, sh) = (theta.cosh(), theta.sinh());
    [[ch, sh], [sh, ch]]
}

fn block_diag(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut s = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = a[i][j];
            s[i + 2][j + 2] = b[i][j];
        }
    }
    s
}

/// `blockdiag(R(θ), R(-θ))`.
pub fn symplectic_s(theta: f64) -> Mat4 {
    block_diag(&hyperbolic_r(theta), &hyperbolic_r(-theta))
}

/// `J = blockdiag(σ_x, -σ_x)`, so that `S(θ) = exp(θJ)`.
pub fn symplectic_generator() -> Mat4 {
    block_diag(&[[0.0, 1.0], [1.0, 0.0]], &[[0.0, -1.0], [-1.0, 0.0]])
}

/// `Ω = [[0, 1], [-1, 0]]` in 2×2 blocks.
pub fn symplectic_form() -> Mat4 {
    let mut o = [[0.0; 4]; 4];
    for i in 0..2 {
        o[i][i + 2] = 1.0;
        o[i + 2][i] = -1.0;
    }
    o
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat4_transpose(a: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat4_distance(a: &Mat4, b: &Mat4) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += (a[i][j] - b[i][j]).powi(2);
        }
    }
    s.sqrt()
}

/// `‖S Ω Sᵀ - Ω‖_F`.
pub fn omega_check(s: &Mat4) -> f64 {
    let o = symplectic_form();
    mat4_distance(&mat4_mul(&mat4_mul(s, &o), &mat4_transpose(s)), &o)
}

/// `exp(θJ)` by the general matrix exponential, for comparison with the
/// closed form.
pub fn symplectic_exp(theta: f64) -> Result<Mat4> {
    let j = symplectic_generator();
    let m = CMatrix::from_shape_fn((4, 4), |(r, col)| c(theta * j[r][col]));
    let e = expm(&m)?;
    let mut out = [[0.0; 4]; 4];
    for r in 0..4 {
        for col in 0..4 {
            out[r][col] = e[[r, col]].re;
        }
    }
    Ok(out)
}

/// `θ = ½ ln(b'/b)`.
pub fn theta_from_b(b: f64, b_prime: f64) -> Result<f64> {
    for (name, v) in [("b", b), ("b_prime", b_prime)] {
        if !v.is_finite() || v < 0.5 {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "thermal parameter must be finite and at least 1/2",
            });
        }
    }
    Ok(0.5 * (b_prime / b).ln())
}

/// How far the truncated rotation may be trusted: the Bogoliubov action
/// residual on levels `0..=window` must stay below `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationBudget {
    pub window: usize,
    pub tolerance: f64,
}

impl RotationBudget {
    pub fn new(window: usize, tolerance: f64) -> Self {
        RotationBudget { window, tolerance }
    }

    /// Window `N/2`, tolerance `1e-8`.
    pub fn for_dim(dim: usize) -> Self {
        RotationBudget {
            window: dim / 2,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThermalRotation {
    theta: f64,
    u: CMatrix,
    r2: Mat2,
    s4: Mat4,
    action_residual: Option<f64>,
}

impl ThermalRotation {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn u(&self) -> &CMatrix {
        &self.u
    }

    pub fn r2(&self) -> Mat2 {
        self.r2
    }

    pub fn s4(&self) -> Mat4 {
        self.s4
    }

    /// Bogoliubov action residual on the budget window, if one was checked.
    pub fn action_residual(&self) -> Option<f64> {
        self.action_residual
    }
}

/// `U A U† - (cosh θ A - sinh θ Ã†)` on the full doubled space.
fn action_defect(rep: &FockRep, u: &CMatrix, theta: f64) -> Result<CMatrix> {
    let l = LadderLifts::new(rep)?;
    let moved = l.a.conjugated(u)?;
    let expect = &l.a.scaled(c(theta.cosh())) - &l.a_tilde_dag.scaled(c(theta.sinh()));
    Ok(moved.matrix() - expect.matrix())
}

/// `‖P(U A U† - (cosh θ A - sinh θ Ã†))P‖` for the given window.
pub fn bogoliubov_action_residual(rep: &FockRep, rot: &ThermalRotation, window: usize) -> Result<f64> {
    let w = InteriorWindow::new(rep.dim(), window)?;
    w.norm(&action_defect(rep, rot.u(), rot.theta())?)
}

/// Builds `U(θ)`. With a budget, the Bogoliubov action residual on the
/// budget window is checked and an over-budget angle is an error carrying
/// the largest window that does pass and a dimension that would pass.
pub fn rotation_u(rep: &FockRep, theta: f64, budget: Option<RotationBudget>) -> Result<ThermalRotation> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "must be finite",
        });
    }
    let g = generator_g(rep)?;
    let u = expm_blocks(&g.matrix().mapv(|z| z * I * theta))?;
    let mut action_residual = None;
    if let Some(b) = budget {
        let n = rep.dim();
        let defect = action_defect(rep, &u, theta)?;
        let w = InteriorWindow::new(n, b.window)?;
        let res = w.norm(&defect)?;
        if !(res <= b.tolerance) {
            let mut passing = None;
            for m in (0..b.window).rev() {
                if InteriorWindow::new(n, m)?.norm(&defect)? <= b.tolerance {
                    passing = Some(m);
                    break;
                }
            }
            return Err(Error::TruncationAccuracy {
                theta,
                window: b.window,
                residual: res,
                tolerance: b.tolerance,
                largest_passing_window: passing,
                suggested_dim: suggest_dimension(theta, b.window, b.tolerance, n),
            });
        }
        action_residual = Some(res);
    }
    Ok(ThermalRotation {
        theta,
        u,
        r2: hyperbolic_r(theta),
        s4: symplectic_s(theta),
        action_residual,
    })
}

// G preserves d = p - q. Within a sector the basis |p><q| is labelled by
// k = min(p, q).
fn sector_levels(d: isize, k: usize) -> (usize, usize) {
    if d >= 0 {
        (k + d as usize, k)
    } else {
        (k, k + (-d) as usize)
    }
}

fn sector_len(n: usize, d: isize) -> usize {
    n.saturating_sub(d.unsigned_abs())
}

fn sector_rotation(n: usize, d: isize, theta: f64) -> Result<CMatrix> {
    let len = sector_len(n, d);
    // iG on the sector: |p><q| -> √((p+1)(q+1)) |p+1><q+1| - √(pq) |p-1><q-1|
    let mut x = CMatrix::zeros((len, len));
    for k in 0..len {
        let (p, q) = sector_levels(d, k);
        if k + 1 < len {
            x[[k + 1, k]] = c(theta * (((p + 1) * (q + 1)) as f64).sqrt());
        }
        if k > 0 {
            x[[k - 1, k]] = c(-theta * ((p * q) as f64).sqrt());
        }
    }
    expm(&x)
}

/// Bogoliubov action residual at truncation `n`, computed sector by sector
/// without forming any `n² × n²` matrix. Agrees with
/// [`bogoliubov_action_residual`] on the same window.
pub fn sector_action_residual(n: usize, theta: f64, window: usize) -> Result<f64> {
    if window >= n {
        return Err(Error::InvalidWindow { window, dim: n });
    }
    let m = window as isize;
    let (ch, sh) = (theta.cosh(), theta.sinh());
    let mut total = 0.0;
    let mut target = sector_rotation(n, -m, theta)?;
    for d in (-m + 1)..=m {
        let source = sector_rotation(n, d, theta)?;
        let ls = sector_len(n, d);
        let lt = sector_len(n, d - 1);
        // A: |p><q| -> √p |p-1><q|, Ã†: |p><q| -> √(q+1) |p><q+1|
        let mut a_op = CMatrix::zeros((lt, ls));
        let mut at_op = CMatrix::zeros((lt, ls));
        for k in 0..ls {
            let (p, q) = sector_levels(d, k);
            if p >= 1 {
                a_op[[(p - 1).min(q), k]] = c((p as f64).sqrt());
            }
            if q + 1 < n {
                at_op[[p.min(q + 1), k]] = c(((q + 1) as f64).sqrt());
            }
        }
        let moved = target.dot(&a_op).dot(&source.t());
        let defect = moved - a_op.mapv(|z| z * ch) + at_op.mapv(|z| z * sh);
        for kt in 0..lt {
            let (pt, qt) = sector_levels(d - 1, kt);
            if pt > window || qt > window {
                continue;
            }
            for ks in 0..ls {
                let (ps, qs) = sector_levels(d, ks);
                if ps > window || qs > window {
                    continue;
                }
                total += defect[[kt, ks]].norm_sqr();
            }
        }
        target = source;
    }
    Ok(total.sqrt())
}

/// Smallest truncation from a doubling ladder `start + 8·2^k` (capped at
/// 160) whose action residual on `window` meets `tolerance`.
pub fn suggest_dimension(theta: f64, window: usize, tolerance: f64, start: usize) -> Option<usize> {
    let mut step = 8;
    loop {
        let n = start + step;
        if n > 160 {
            return None;
        }
        match sector_action_residual(n, theta, window) {
            Ok(r) if r <= tolerance => return Some(n),
            Ok(_) => {}
            Err(_) => return None,
        }
        step *= 2;
    }
}

/// `U K U†`.
pub fn transform_superop(k: &SuperOp, rot: &ThermalRotation) -> Result<SuperOp> {
    k.conjugated(rot.u())
}

/// The two combinations that scale under the rotation:
/// `‖P(A' - Ã'† - e^θ (A - Ã†))P‖` and `‖P(A' + Ã'† - e^{-θ} (A + Ã†))P‖`.
pub fn scaling_residuals(rep: &FockRep, rot: &ThermalRotation, window: usize) -> Result<(f64, f64)> {
    let w = InteriorWindow::new(rep.dim(), window)?;
    let l = LadderLifts::new(rep)?;
    let r = l.conjugated(rot.u())?;
    let th = rot.theta();
    let minus = &(&r.a - &r.a_tilde_dag) - &(&l.a - &l.a_tilde_dag).scaled(c(th.exp()));
    let plus = &(&r.a + &r.a_tilde_dag) - &(&l.a + &l.a_tilde_dag).scaled(c((-th).exp()));
    Ok((w.norm(minus.matrix())?, w.norm(plus.matrix())?))
}

/// Commutation relations of the rotated ladder operators on the window.
pub fn rotated_commutators(rep: &FockRep, rot: &ThermalRotation, window: usize) -> Result<CommutatorCheck> {
    let w = InteriorWindow::new(rep.dim(), window)?;
    let l = LadderLifts::new(rep)?.conjugated(rot.u())?;
    lift_commutators(&l, &w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryResidual {
    pub theta: f64,
    /// `‖P(U K(b) U† - K(b'))P‖ / ‖P K(b') P‖`.
    pub relative: f64,
    pub absolute: f64,
    pub reference_norm: f64,
    /// Action residual of `U` on the budget window, when checked.
    pub action_residual: Option<f64>,
}

/// Compares the rotated generator at `b` with the generator at `b'`, using
/// `θ = ½ ln(b'/b)`.
pub fn symmetry_residual(
    family: &dyn ThermalFamily,
    rep: &FockRep,
    b: f64,
    b_prime: f64,
    window: usize,
    budget: Option<RotationBudget>,
) -> Result<SymmetryResidual> {
    let theta = theta_from_b(b, b_prime)?;
    let w = InteriorWindow::new(rep.dim(), window)?;
    let rot = rotation_u(rep, theta, budget)?;
    let k = family.build(rep, b)?;
    let k_prime = family.build(rep, b_prime)?;
    let moved = transform_superop(&k, &rot)?;
    let absolute = w.norm((&moved - &k_prime).matrix())?;
    let reference_norm = w.norm(k_prime.matrix())?;
    Ok(SymmetryResidual {
        theta,
        relative: absolute / reference_norm,
        absolute,
        reference_norm,
        action_residual: rot.action_residual(),
    })
}

/// Largest deviation over `omega_grid` of
/// `coth(ħβ'ω/2)/coth(ħβω/2)` from its value at `ω₀`. Inverse temperatures
/// are given as `ħβ`; `f64::INFINITY` stands for `T = 0`.
pub fn coth_ratio_scan(hbar_beta: f64, hbar_beta_prime: f64, omega0: f64, omega_grid: &[f64]) -> Result<f64> {
    for (name, v) in [("hbar_beta", hbar_beta), ("hbar_beta_prime", hbar_beta_prime)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "inverse temperature must be positive (infinity for T = 0)",
            });
        }
    }
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "omega0",
            value: omega0,
            reason: "must be finite and positive",
        });
    }
    if omega_grid.is_empty() {
        return Err(Error::Other("empty frequency grid".into()));
    }
    let ratio = |w: f64| b_tilde(hbar_beta_prime * w) / b_tilde(hbar_beta * w);
    let at_resonance = ratio(omega0);
    let mut worst = 0.0f64;
    for &w in omega_grid {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "omega_grid",
                value: w,
                reason: "frequencies must be finite and positive",
            });
        }
        worst = worst.max((ratio(w) - at_resonance).abs());
    }
    Ok(worst)
}

/// `M₁ = ½(A†Ã† + AÃ)`, `M₂ = (1/2i)(A†Ã† - AÃ)`, `M₀ = ½(A†A + Ã†Ã + 1)`.
#[derive(Debug, Clone)]
pub struct Su11Algebra {
    pub m0: SuperOp,
    pub m1: SuperOp,
    pub m2: SuperOp,
}

impl Su11Algebra {
    /// Window norms of `[M₁,M₂] + iM₀`, `[M₂,M₀] - iM₁`, `[M₀,M₁] - iM₂`.
    pub fn commutator_residuals(&self, window: usize) -> Result<[f64; 3]> {
        let w = InteriorWindow::new(self.m0.dim(), window)?;
        let r12 = &self.m1.commutator(&self.m2)? + &self.m0.scaled(I);
        let r20 = &self.m2.commutator(&self.m0)? - &self.m1.scaled(I);
        let r01 = &self.m0.commutator(&self.m1)? - &self.m2.scaled(I);
        Ok([w.norm(r12.matrix())?, w.norm(r20.matrix())?, w.norm(r01.matrix())?])
    }
}

pub fn su11_generators(rep: &FockRep) -> Result<Su11Algebra> {
    let l = LadderLifts::new(rep)?;
    let create = &l.a_dag * &l.a_tilde_dag;
    let annihilate = &l.a * &l.a_tilde;
    let id = SuperOp::identity(rep.dim());
    let m1 = (&create + &annihilate).scaled(c(0.5));
    let m2 = (&create - &annihilate).scaled(-I * 0.5);
    let number = &(&l.a_dag * &l.a) + &(&l.a_tilde_dag * &l.a_tilde);
    let m0 = (&number + &id).scaled(c(0.5));
    Ok(Su11Algebra { m0, m1, m2 })
}

/// Options for [`ekert_reduce`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkertOptions {
    /// Restrict the coefficient fit to this window; `None` uses every level.
    pub window: Option<usize>,
    /// Reject coefficient sets with `|c₃|² > c₁c₂`.
    pub enforce_positivity: bool,
    pub nu_max: f64,
    pub tolerance: f64,
}

impl Default for EkertOptions {
    fn default() -> Self {
        EkertOptions {
            window: None,
            enforce_positivity: true,
            nu_max: 3.0,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkertRoot {
    pub u: f64,
    pub v: C64,
    pub nu: f64,
    /// Phase of `v` in `[0, 2π)`.
    pub eta: f64,
    /// Magnitude of the remaining `K₃` coefficient.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkertReduction {
    /// Root reached from `v = 0`.
    pub root: EkertRoot,
    /// Every distinct root found from the multi-start search.
    pub roots: Vec<EkertRoot>,
    /// Coefficients `[D[a'], D[a'†], K₃(a'), K₃†(a'), 1]` at `root`.
    pub coefficients: [C64; 5],
    /// Norm of what the five structures fail to represent.
    pub fit_residual: f64,
    /// Largest commutator of `L(a')` with a right lift.
    pub sector_defect: f64,
}

/// `a' = u a + v a†` with `u = √(1 + |v|²)`.
pub fn transformed_ladder(rep: &FockRep, v: C64) -> CMatrix {
    let u = (1.0 + v.norm_sqr()).sqrt();
    rep.a().mapv(|z| z * u) + rep.a_dag().mapv(|z| z * v)
}

/// Least-squares coefficients of `k` in the structures built from
/// `lower = a'` and `raise = a'†`, plus the fit residual.
pub fn dissipator_coefficients_in(
    k: &SuperOp,
    lower: &CMatrix,
    raise: &CMatrix,
    window: Option<usize>,
) -> Result<([C64; 5], f64)> {
    let n = k.dim();
    let basis = [
        lindblad_pair(lower, lower)?,
        lindblad_pair(raise, raise)?,
        lindblad_pair(lower, raise)?,
        lindblad_pair(raise, lower)?,
        SuperOp::identity(n),
    ];
    let restrict = |m: &CMatrix| -> Result<CMatrix> {
        match window {
            Some(wl) => InteriorWindow::new(n, wl)?.restrict(m),
            None => Ok(m.clone()),
        }
    };
    let vecs: Vec<CMatrix> = basis.iter().map(|s| restrict(s.matrix())).collect::<Result<_>>()?;
    let target = restrict(k.matrix())?;
    let inner = |x: &CMatrix, y: &CMatrix| -> C64 { x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum() };
    let gram = CMatrix::from_shape_fn((5, 5), |(i, j)| inner(&vecs[i], &vecs[j]));
    let rhs = ndarray::Array1::from_shape_fn(5, |i| inner(&vecs[i], &target));
    let coef = Lu::new(&gram)?.solve_vec(&rhs)?;
    let mut fit = target.clone();
    for (cf, v) in coef.iter().zip(vecs.iter()) {
        fit = fit - v.mapv(|z| z * cf);
    }
    Ok(([coef[0], coef[1], coef[2], coef[3], coef[4]], frobenius(&fit)))
}

fn k3_coefficient(rep: &FockRep, k: &SuperOp, v: C64, window: Option<usize>) -> Result<C64> {
    let lower = transformed_ladder(rep, v);
    let raise = linalg::dagger(&lower);
    Ok(dissipator_coefficients_in(k, &lower, &raise, window)?.0[2])
}

fn newton_from(rep: &FockRep, k: &SuperOp, start: C64, opts: &EkertOptions) -> Result<(C64, f64)> {
    let v_max = opts.nu_max.sinh();
    let mut v = start;
    let mut f = k3_coefficient(rep, k, v, opts.window)?;
    let h = 1e-7;
    for _ in 0..60 {
        if f.norm() < 0.01 * opts.tolerance {
            break;
        }
        let fx = (k3_coefficient(rep, k, v + c(h), opts.window)? - f) / h;
        let fy = (k3_coefficient(rep, k, v + I * h, opts.window)? - f) / h;
        // Real 2×2 Jacobian of (Re F, Im F) w.r.t. (Re v, Im v).
        let (j11, j12, j21, j22) = (fx.re, fy.re, fx.im, fy.im);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            break;
        }
        let dx = -(j22 * f.re - j12 * f.im) / det;
        let dy = -(-j21 * f.re + j11 * f.im) / det;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-6 {
            let trial = v + Complex64::new(dx * step, dy * step);
            if trial.norm() <= v_max {
                let ft = k3_coefficient(rep, k, trial, opts.window)?;
                if ft.norm() < f.norm() {
                    v = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((v, f.norm()))
}

fn make_root(v: C64, residual: f64) -> EkertRoot {
    let mut eta = v.arg();
    if eta < 0.0 {
        eta += 2.0 * core::f64::consts::PI;
    }
    EkertRoot {
        u: (1.0 + v.norm_sqr()).sqrt(),
        v,
        nu: v.norm().asinh(),
        eta,
        residual,
    }
}

/// Finds `a' = u a + v a†` in which the extended dissipator
/// `c₁ D[a] + c₂ D[a†] + c₃ K₃ + c₃* K₃†` has no `K₃` term.
///
/// The `K₃` coefficient is extracted by least squares against the five
/// structures built from `a'` and driven to zero by damped Newton in
/// `(Re v, Im v)`, starting at `v = 0` and from a ring of other starts.
pub fn ekert_reduce(rep: &FockRep, c1: f64, c2: f64, c3: C64, opts: EkertOptions) -> Result<EkertReduction> {
    if !(c1 > 0.0) || !(c2 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: if c1 > 0.0 { "c2" } else { "c1" },
            value: if c1 > 0.0 { c2 } else { c1 },
            reason: "need c1 > 0 and c2 >= 0",
        });
    }
    let defect = c3.norm_sqr() - c1 * c2;
    if opts.enforce_positivity && defect > 0.0 {
        return Err(Error::NotCompletelyPositive { defect });
    }
    let k = extended_dissipator(rep.a(), rep.a_dag(), c1, c2, c3)?;
    let (v0, r0) = newton_from(rep, &k, C64::new(0.0, 0.0), &opts)?;
    if !(r0 <= opts.tolerance) {
        return Err(Error::NoReduction { residual: r0 });
    }
    let root = make_root(v0, r0);
    let mut roots = alloc::vec![root];
    for &nu in &[0.5, 1.5] {
        if nu > opts.nu_max {
            continue;
        }
        for j in 0..6 {
            let phase = j as f64 * core::f64::consts::PI / 3.0;
            let start = Complex64::from_polar(nu.sinh(), phase);
            let (v, r) = newton_from(rep, &k, start, &opts)?;
            if r <= opts.tolerance && roots.iter().all(|x| (x.v - v).norm() > 1e-6) {
                roots.push(make_root(v, r));
            }
        }
    }
    let lower = transformed_ladder(rep, v0);
    let raise = linalg::dagger(&lower);
    let (coefficients, fit_residual) = dissipator_coefficients_in(&k, &lower, &raise, opts.window)?;
    Ok(EkertReduction {
        root,
        roots,
        coefficients,
        fit_residual,
        sector_defect: hilbert_sector_defect(rep, v0)?,
    })
}

/// Largest `‖[uA + vA†, X]‖` for `X` in `{Ã, Ã†}`, with `u = √(1 + |v|²)`.
/// The right lifts of `a` and `a†` generate every right multiplication, so
/// a zero here means the transformed ladder operator never touches the
/// tilde factor.
pub fn hilbert_sector_defect(rep: &FockRep, v: C64) -> Result<f64> {
    let l = LadderLifts::new(rep)?;
    let u = (1.0 + v.norm_sqr()).sqrt();
    let moved = &l.a.scaled(c(u)) + &l.a_dag.scaled(v);
    let mut worst = 0.0f64;
    for probe in [&l.a_tilde, &l.a_tilde_dag] {
        worst = worst.max(moved.commutator(probe)?.frobenius());
    }
    Ok(worst)
}
