//! Generators of the reduced dynamics: the rotating-wave master equation,
//! the extended (Ekert) dissipator, Caldeira-Leggett and the HPZ form, plus
//! the thermal coefficients they depend on.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::fock::{lift_left, lift_right, FockRep, LadderLifts, SuperOp};
use crate::linalg::{c, dagger, CMatrix, C64, I};
use crate::quadrature::integrate;
use crate::{Error, Result};

fn check_b(b: f64) -> Result<f64> {
    if !b.is_finite() || b < 0.5 {
        return Err(Error::InvalidParameter {
            name: "b",
            value: b,
            reason: "thermal parameter must be finite and at least 1/2",
        });
    }
    Ok(b)
}

fn check_positive(name: &'static str, v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter {
            name,
            value: v,
            reason: "must be finite and positive",
        });
    }
    Ok(v)
}

fn check_non_negative(name: &'static str, v: f64) -> Result<f64> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter {
            name,
            value: v,
            reason: "must be finite and non-negative",
        });
    }
    Ok(v)
}

/// `½ coth(x/2)` for `x = ħωβ ≥ 0`, with `x = ∞` meaning zero temperature.
pub fn b_tilde(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.5
    } else {
        0.5 + 1.0 / x.exp_m1()
    }
}

/// `½ coth(ħω₀ / 2 k_B T)`, exactly ½ at `T = 0`.
pub fn thermal_b(t: f64, omega0: f64, hbar: f64, k_b: f64) -> Result<f64> {
    check_non_negative("T", t)?;
    check_positive("omega0", omega0)?;
    check_positive("hbar", hbar)?;
    check_positive("k_B", k_b)?;
    if t == 0.0 {
        return Ok(0.5);
    }
    Ok(b_tilde(hbar * omega0 / (k_b * t)))
}

/// `ħβ` (in units of time) recovered from `b` at frequency `ω₀`; infinite at
/// `b = ½`.
pub fn hbar_beta_from_b(b: f64, omega0: f64) -> Result<f64> {
    check_b(b)?;
    check_positive("omega0", omega0)?;
    if b == 0.5 {
        return Ok(f64::INFINITY);
    }
    Ok(((2.0 * b + 1.0) / (2.0 * b - 1.0)).ln() / omega0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParam {
    b: f64,
}

impl ThermalParam {
    pub fn from_b(b: f64) -> Result<Self> {
        Ok(ThermalParam { b: check_b(b)? })
    }

    pub fn from_temperature(t: f64, omega0: f64, hbar: f64, k_b: f64) -> Result<Self> {
        Ok(ThermalParam {
            b: thermal_b(t, omega0, hbar, k_b)?,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean_occupation(&self) -> f64 {
        self.b - 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmeParams {
    pub omega0: f64,
    pub gamma: f64,
    pub thermal: ThermalParam,
}

impl MmeParams {
    pub fn new(omega0: f64, gamma: f64, b: f64) -> Result<Self> {
        Ok(MmeParams {
            omega0: check_positive("omega0", omega0)?,
            gamma: check_non_negative("gamma", gamma)?,
            thermal: ThermalParam::from_b(b)?,
        })
    }

    pub fn b(&self) -> f64 {
        self.thermal.b()
    }
}

/// `(c₁, c₂) = (γ/2 (b + ½), γ/2 (b - ½))`.
pub fn dissipator_coefficients(gamma: f64, b: f64) -> (f64, f64) {
    (0.5 * gamma * (b + 0.5), 0.5 * gamma * (b - 0.5))
}

/// `ρ ↦ 2 L ρ M† - M†L ρ - ρ M†L`.
pub fn lindblad_pair(l: &CMatrix, m: &CMatrix) -> Result<SuperOp> {
    let md = dagger(m);
    let mdl = md.dot(l);
    let id = crate::linalg::identity(l.nrows());
    let jump = SuperOp::sandwich(l, &md)?;
    let left = SuperOp::sandwich(&mdl, &id)?;
    let right = SuperOp::sandwich(&id, &mdl)?;
    Ok(&(&jump.scaled(c(2.0)) - &left) - &right)
}

/// `ρ ↦ -iω₀ [a†a, ρ]`.
pub fn build_k0(rep: &FockRep, omega0: f64) -> Result<SuperOp> {
    let n = rep.number();
    let k = &lift_left(&n)? - &lift_right(&n)?;
    Ok(k.scaled(-I * omega0).with_param("omega0", omega0))
}

pub fn build_kd(rep: &FockRep, params: &MmeParams) -> Result<SuperOp> {
    let (c1, c2) = dissipator_coefficients(params.gamma, params.b());
    let decay = lindblad_pair(rep.a(), rep.a())?;
    let pump = lindblad_pair(rep.a_dag(), rep.a_dag())?;
    let k = &decay.scaled(c(c1)) + &pump.scaled(c(c2));
    Ok(k.with_param("gamma", params.gamma)
        .with_param("b", params.b()))
}

/// The dissipator written with the doubled-space ladder lifts,
/// `-γ/4 [D†S - D S†] - bγ D†D` with `D = A - Ã†`, `S = A + Ã†`.
///
/// Using `[A, A†] = [Ã, Ã†] = 1` the bracket equals `2(A†Ã† - AÃ - 1)`, so
/// the drift prefactor has to be `-γ/4` for this to agree with
/// [`build_kd`]; it does so on any window that avoids the last level.
pub fn build_kd_lifted(rep: &FockRep, params: &MmeParams) -> Result<SuperOp> {
    let l = LadderLifts::new(rep)?;
    let d = &l.a - &l.a_tilde_dag;
    let s = &l.a + &l.a_tilde_dag;
    let dd = d.adjoint();
    let sd = s.adjoint();
    let gamma = params.gamma;
    let drift = &(&dd * &s) - &(&d * &sd);
    let noise = &dd * &d;
    Ok(&drift.scaled(c(-0.25 * gamma)) - &noise.scaled(c(params.b() * gamma)))
}

pub fn build_k(rep: &FockRep, params: &MmeParams) -> Result<SuperOp> {
    let k = &build_k0(rep, params.omega0)? + &build_kd(rep, params)?;
    Ok(k.with_param("omega0", params.omega0)
        .with_param("gamma", params.gamma)
        .with_param("b", params.b()))
}

/// `ρ ↦ 2aρa - aaρ - ρaa`.
pub fn build_k3(rep: &FockRep) -> Result<SuperOp> {
    lindblad_pair(rep.a(), rep.a_dag())
}

/// `c₁ D[a] + c₂ D[a†] + c₃ K₃ + c₃* K₃†` with arbitrary ladder matrices, so
/// the same routine serves for transformed operators.
pub fn extended_dissipator(lower: &CMatrix, raise: &CMatrix, c1: f64, c2: f64, c3: C64) -> Result<SuperOp> {
    let d1 = lindblad_pair(lower, lower)?;
    let d2 = lindblad_pair(raise, raise)?;
    let k3 = lindblad_pair(lower, raise)?;
    let k3d = lindblad_pair(raise, lower)?;
    let sum = &(&d1.scaled(c(c1)) + &d2.scaled(c(c2))) + &(&k3.scaled(c3) + &k3d.scaled(c3.conj()));
    Ok(sum)
}

pub fn build_k3_extended(rep: &FockRep, c1: f64, c2: f64, c3: C64) -> Result<SuperOp> {
    Ok(extended_dissipator(rep.a(), rep.a_dag(), c1, c2, c3)?
        .with_param("c1", c1)
        .with_param("c2", c2)
        .with_param("c3_re", c3.re)
        .with_param("c3_im", c3.im))
}

/// Coordinate-space symbols realized as superoperators:
/// `x → L(x̂)`, `x̃ → R(x̂)`, `∂x → L(ip̂)`, `∂x̃ → R(-ip̂)`.
#[derive(Debug, Clone)]
pub struct CoordinateDictionary {
    pub x: SuperOp,
    pub x_tilde: SuperOp,
    pub d_x: SuperOp,
    pub d_x_tilde: SuperOp,
}

impl CoordinateDictionary {
    pub fn new(rep: &FockRep) -> Result<Self> {
        let ip = rep.p().mapv(|z| z * I);
        let mip = rep.p().mapv(|z| -z * I);
        Ok(CoordinateDictionary {
            x: lift_left(rep.x())?,
            x_tilde: lift_right(rep.x())?,
            d_x: lift_left(&ip)?,
            d_x_tilde: lift_right(&mip)?,
        })
    }

    /// `x - x̃`.
    pub fn x_minus(&self) -> SuperOp {
        &self.x - &self.x_tilde
    }

    /// `x + x̃`.
    pub fn x_plus(&self) -> SuperOp {
        &self.x + &self.x_tilde
    }

    /// `∂x - ∂x̃`, acting as `ρ ↦ i{p̂, ρ}`.
    pub fn d_minus(&self) -> SuperOp {
        &self.d_x - &self.d_x_tilde
    }

    /// `∂x + ∂x̃`, acting as `ρ ↦ i[p̂, ρ]`.
    pub fn d_plus(&self) -> SuperOp {
        &self.d_x + &self.d_x_tilde
    }

    /// `-iω₀ ½[(x² - ∂x²) - (x̃² - ∂x̃²)]`.
    pub fn k0(&self, omega0: f64) -> SuperOp {
        let h = &(&self.x * &self.x) - &(&self.d_x * &self.d_x);
        let ht = &(&self.x_tilde * &self.x_tilde) - &(&self.d_x_tilde * &self.d_x_tilde);
        (&h - &ht).scaled(-I * 0.5 * omega0)
    }

    /// `γ/4 [(∂x + ∂x̃)(x + x̃) - (x - x̃)(∂x - ∂x̃)] + bγ/2 [(∂x + ∂x̃)² - (x - x̃)²]`.
    pub fn kd(&self, gamma: f64, b: f64) -> SuperOp {
        let dp = self.d_plus();
        let xm = self.x_minus();
        let drift = &(&dp * &self.x_plus()) - &(&xm * &self.d_minus());
        let noise = &(&dp * &dp) - &(&xm * &xm);
        &drift.scaled(c(0.25 * gamma)) + &noise.scaled(c(0.5 * b * gamma))
    }

    /// `i (x ∂x̃ + x̃ ∂x)`.
    pub fn rotation_generator(&self) -> SuperOp {
        (&(&self.x * &self.d_x_tilde) + &(&self.x_tilde * &self.d_x)).scaled(I)
    }
}

/// Caldeira-Leggett: `K₀ - γ₁ (x - x̃)(∂x - ∂x̃) - γ₁ b_cl (x - x̃)²`.
pub fn build_cl(rep: &FockRep, omega0: f64, gamma1: f64, b_cl: f64) -> Result<SuperOp> {
    check_non_negative("gamma1", gamma1)?;
    check_positive("b_cl", b_cl)?;
    let dict = CoordinateDictionary::new(rep)?;
    let xm = dict.x_minus();
    let friction = &xm * &dict.d_minus();
    let noise = &xm * &xm;
    let k = &(&build_k0(rep, omega0)? - &friction.scaled(c(gamma1))) - &noise.scaled(c(gamma1 * b_cl));
    Ok(k.with_param("omega0", omega0)
        .with_param("gamma1", gamma1)
        .with_param("b_cl", b_cl))
}

/// Ohmic spectral density with exponential cutoff, `I(ω) = η ω e^{-ω/Ω_c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicBath {
    pub eta: f64,
    pub cutoff: f64,
}

impl OhmicBath {
    pub fn new(eta: f64, cutoff: f64) -> Result<Self> {
        Ok(OhmicBath {
            eta: check_non_negative("eta", eta)?,
            cutoff: check_positive("cutoff", cutoff)?,
        })
    }

    pub fn density(&self, omega: f64) -> f64 {
        self.eta * omega * (-omega / self.cutoff).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSource {
    /// Fixed value, independent of temperature.
    Direct(f64),
    /// Recomputed from the bath at the temperature implied by `b`.
    Ohmic(OhmicBath),
}

impl GammaSource {
    pub fn resolve(&self, omega0: f64, b: f64) -> Result<f64> {
        match self {
            GammaSource::Direct(g) => {
                if g.is_finite() {
                    Ok(*g)
                } else {
                    Err(Error::InvalidParameter {
                        name: "Gamma",
                        value: *g,
                        reason: "must be finite",
                    })
                }
            }
            GammaSource::Ohmic(bath) => {
                let hb = hbar_beta_from_b(b, omega0)?;
                Ok(gamma_coefficient(bath, omega0, hb, DEFAULT_PV_WINDOW)?.value)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpzParams {
    pub omega0: f64,
    pub gamma2: f64,
    pub b: f64,
    pub gamma_source: GammaSource,
}

/// `K₀ - γ₂ (x - x̃)(∂x - ∂x̃) - 2γ₂ b (x - x̃)² + iΓ (x - x̃)(∂x + ∂x̃)`.
pub fn build_hpz(rep: &FockRep, params: &HpzParams) -> Result<SuperOp> {
    check_non_negative("gamma2", params.gamma2)?;
    check_b(params.b)?;
    let big_gamma = params.gamma_source.resolve(params.omega0, params.b)?;
    let dict = CoordinateDictionary::new(rep)?;
    let xm = dict.x_minus();
    let friction = &xm * &dict.d_minus();
    let noise = &xm * &xm;
    let shift = &xm * &dict.d_plus();
    let k = &(&(&build_k0(rep, params.omega0)? - &friction.scaled(c(params.gamma2)))
        - &noise.scaled(c(2.0 * params.gamma2 * params.b)))
        + &shift.scaled(I * big_gamma);
    Ok(k.with_param("omega0", params.omega0)
        .with_param("gamma2", params.gamma2)
        .with_param("b", params.b)
        .with_param("Gamma", big_gamma))
}

/// A generator family parameterized by its thermal coefficient.
pub trait ThermalFamily {
    fn label(&self) -> &'static str;
    fn build(&self, rep: &FockRep, b: f64) -> Result<SuperOp>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwaFamily {
    pub omega0: f64,
    pub gamma: f64,
}

impl ThermalFamily for RwaFamily {
    fn label(&self) -> &'static str {
        "rwa"
    }

    fn build(&self, rep: &FockRep, b: f64) -> Result<SuperOp> {
        build_k(rep, &MmeParams::new(self.omega0, self.gamma, b)?)
    }
}

/// Caldeira-Leggett with `b` standing for `b_cl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClFamily {
    pub omega0: f64,
    pub gamma1: f64,
}

impl ThermalFamily for ClFamily {
    fn label(&self) -> &'static str {
        "cl"
    }

    fn build(&self, rep: &FockRep, b: f64) -> Result<SuperOp> {
        build_cl(rep, self.omega0, self.gamma1, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpzFamily {
    pub omega0: f64,
    pub gamma2: f64,
    pub gamma_source: GammaSource,
}

impl ThermalFamily for HpzFamily {
    fn label(&self) -> &'static str {
        "hpz"
    }

    fn build(&self, rep: &FockRep, b: f64) -> Result<SuperOp> {
        build_hpz(
            rep,
            &HpzParams {
                omega0: self.omega0,
                gamma2: self.gamma2,
                b,
                gamma_source: self.gamma_source,
            },
        )
    }
}

pub const DEFAULT_PV_WINDOW: f64 = 1e-3;

/// Principal value estimate together with the raw windowed values it was
/// extrapolated from.
#[derive(Debug, Clone, PartialEq)]
pub struct PvEstimate {
    pub value: f64,
    pub error: f64,
    pub windows: Vec<(f64, f64)>,
}

/// `P∫₀^∞ I(ω) b̃(ω) / (ω² - ω₀²) dω` with `b̃(ω) = ½ coth(ħβω/2)`.
///
/// The constant `f(ω₀)/(ω² - ω₀²)` is subtracted, leaving a regular
/// integrand; the subtracted piece has a closed-form integral over the
/// excluded-window domain. Values for window half-widths `ε, ε/2, ε/4, ε/8`
/// are Richardson-extrapolated in odd powers of `ε`.
pub fn gamma_coefficient(bath: &OhmicBath, omega0: f64, hbar_beta: f64, eps: f64) -> Result<PvEstimate> {
    check_positive("omega0", omega0)?;
    if !(hbar_beta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "hbar_beta",
            value: hbar_beta,
            reason: "must be positive (infinity for zero temperature)",
        });
    }
    if !(eps > 0.0 && eps < 0.5 * omega0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "exclusion half-width must lie in (0, omega0/2)",
        });
    }
    if bath.eta == 0.0 {
        return Ok(PvEstimate {
            value: 0.0,
            error: 0.0,
            windows: Vec::new(),
        });
    }
    let f = |w: f64| bath.density(w) * b_tilde(hbar_beta * w);
    let f0 = f(omega0);
    let h = |w: f64| (f(w) - f0) / (w * w - omega0 * omega0);
    let upper = omega0 + 80.0 * bath.cutoff;
    let tail = -f0 / (2.0 * omega0) * ((upper + omega0) / (upper - omega0)).ln();
    let windowed = |e: f64| -> Result<f64> {
        let lo = integrate(h, 0.0, omega0 - e, 1e-14, 1e-13, 4000)?;
        let hi = integrate(h, omega0 + e, upper, 1e-14, 1e-13, 4000)?;
        let gap = f0 / (2.0 * omega0) * ((2.0 * omega0 + e) / (2.0 * omega0 - e)).ln();
        Ok(lo.value + hi.value + tail + gap)
    };
    let mut windows = Vec::with_capacity(4);
    let mut e = eps;
    for _ in 0..4 {
        windows.push((e, windowed(e)?));
        e *= 0.5;
    }
    // Neville-style table for errors in ε, ε³, ε⁵ with ratio 2.
    let mut table: Vec<f64> = windows.iter().map(|w| w.1).collect();
    let mut last_change = f64::INFINITY;
    for (k, power) in [1i32, 3, 5].iter().enumerate() {
        let factor = 2f64.powi(*power);
        let prev = table.clone();
        for j in 0..prev.len() - 1 - k {
            table[j] = (factor * prev[j + 1] - prev[j]) / (factor - 1.0);
        }
        last_change = (table[0] - prev[0]).abs();
    }
    let value = table[0];
    let error = last_change.min((windows[3].1 - value).abs());
    if !value.is_finite() {
        return Err(Error::NonFinite {
            routine: "gamma_coefficient",
        });
    }
    let target = 1e-9 * value.abs().max(f0.abs() / omega0);
    if error > target {
        return Err(Error::Quadrature {
            estimate: value,
            error_estimate: error,
            tolerance: target,
        });
    }
    Ok(PvEstimate {
        value,
        error,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{vec_index, InteriorWindow};
    use crate::linalg::{commutator, frobenius};
    use crate::DensityState;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn test_matrix(n: usize, phase: f64) -> CMatrix {
        CMatrix::from_shape_fn((n, n), |(i, j)| {
            C64::new(
                ((i * 7 + j * 3) as f64 + phase).sin(),
                ((i * 2 + j * 5) as f64 - phase).cos(),
            )
        })
    }

    fn hermitian(n: usize, phase: f64) -> CMatrix {
        let m = test_matrix(n, phase);
        &m + &dagger(&m)
    }

    #[test]
    fn thermal_b_values() {
        assert_eq!(thermal_b(0.0, 1.0, 1.0, 1.0).unwrap(), 0.5);
        let b = thermal_b(1.0 / 3f64.ln(), 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(b, 1.0, max_relative = 1e-14);
        let hot = thermal_b(1e3, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(hot, 1e3, max_relative = 1e-6);
        assert!(thermal_b(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn b_grows_with_temperature() {
        let temps = [0.0, 0.1, 0.5, 1.0, 4.0, 50.0];
        let bs: Vec<f64> = temps.iter().map(|&t| thermal_b(t, 1.0, 1.0, 1.0).unwrap()).collect();
        assert!(bs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn hbar_beta_round_trip() {
        let b = 1.7;
        let hb = hbar_beta_from_b(b, 2.0).unwrap();
        assert_relative_eq!(b_tilde(hb * 2.0), b, max_relative = 1e-13);
        assert_eq!(hbar_beta_from_b(0.5, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn k0_action_and_spectrum() {
        let rep = FockRep::new(4).unwrap();
        let k0 = build_k0(&rep, 1.3).unwrap();
        let mut rho = CMatrix::zeros((4, 4));
        rho[[1, 0]] = c(1.0);
        let out = k0.apply(&rho).unwrap();
        assert_abs_diff_eq!(out[[1, 0]].im, -1.3, epsilon = 1e-14);
        for p in 0..4 {
            for q in 0..4 {
                let i = vec_index(4, p, q);
                let expect = -1.3 * (p as f64 - q as f64);
                assert_abs_diff_eq!(k0.matrix()[[i, i]].im, expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn kd_coefficients_and_vacuum() {
        let (c1, c2) = dissipator_coefficients(0.1, 1.5);
        assert_abs_diff_eq!(c1, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(c2, 0.05, epsilon = 1e-15);
        let rep = FockRep::new(6).unwrap();
        let kd = build_kd(&rep, &MmeParams::new(1.0, 0.3, 0.5).unwrap()).unwrap();
        let vac = DensityState::fock(6, 0).unwrap();
        assert!(frobenius(&kd.apply(vac.matrix()).unwrap()) < 1e-15);
        assert!(MmeParams::new(1.0, 0.3, 0.49).is_err());
    }

    #[test]
    fn kd_matches_ladder_lift_form() {
        let n = 16;
        let rep = FockRep::new(n).unwrap();
        let p = MmeParams::new(1.0, 0.2, 2.0).unwrap();
        let direct = build_kd(&rep, &p).unwrap();
        let lifted = build_kd_lifted(&rep, &p).unwrap();
        let w = InteriorWindow::new(n, n - 4).unwrap();
        let diff = w.norm((&direct - &lifted).matrix()).unwrap();
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn coordinate_dictionary_reproduces_generator() {
        let n = 14;
        let rep = FockRep::new(n).unwrap();
        let dict = CoordinateDictionary::new(&rep).unwrap();
        let p = MmeParams::new(0.8, 0.3, 1.4).unwrap();
        let w = InteriorWindow::new(n, n - 4).unwrap();
        let k = build_k(&rep, &p).unwrap();
        let kc = &dict.k0(0.8) + &dict.kd(0.3, 1.4);
        let diff = w.norm((&k - &kc).matrix()).unwrap();
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn derivative_symbols_act_as_commutators() {
        let n = 6;
        let rep = FockRep::new(n).unwrap();
        let dict = CoordinateDictionary::new(&rep).unwrap();
        let rho = test_matrix(n, 0.4);
        let anti = rep.p().dot(&rho) + rho.dot(rep.p());
        let comm = commutator(rep.p(), &rho);
        let dm = dict.d_minus().apply(&rho).unwrap();
        let dp = dict.d_plus().apply(&rho).unwrap();
        assert!(frobenius(&(dm - anti.mapv(|z| z * I))) < 1e-13);
        assert!(frobenius(&(dp - comm.mapv(|z| z * I))) < 1e-13);
    }

    #[test]
    fn trace_preservation_of_builders() {
        let n = 16;
        let rep = FockRep::new(n).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 1.0).unwrap()).unwrap();
        assert!(k.trace_defect() < 1e-12);
        let k3 = build_k3_extended(&rep, 0.3, 0.1, C64::new(0.02, 0.01)).unwrap();
        assert!(k3.trace_defect() < 1e-12);
        let cl = build_cl(&rep, 1.0, 0.1, 2.0).unwrap();
        assert!(cl.trace_defect() < 1e-11);
        let hpz = build_hpz(
            &rep,
            &HpzParams {
                omega0: 1.0,
                gamma2: 0.1,
                b: 1.0,
                gamma_source: GammaSource::Direct(0.02),
            },
        )
        .unwrap();
        assert!(hpz.trace_defect() < 1e-11);
    }

    #[test]
    fn thermal_state_is_stationary() {
        let n = 24;
        let rep = FockRep::new(n).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 1.0).unwrap()).unwrap();
        let rho = DensityState::thermal(n, 1.0).unwrap();
        let r = k.apply(rho.matrix()).unwrap();
        assert!(frobenius(&r) < 1e-12);
    }

    #[test]
    fn gamma_is_linear_in_dissipator() {
        let rep = FockRep::new(8).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.5, 1.2).unwrap()).unwrap();
        let k0 = build_k0(&rep, 1.0).unwrap();
        let ka = build_kd(&rep, &MmeParams::new(1.0, 0.2, 1.2).unwrap()).unwrap();
        let kb = build_kd(&rep, &MmeParams::new(1.0, 0.3, 1.2).unwrap()).unwrap();
        let sum = &(&k0 + &ka) + &kb;
        assert!((&k - &sum).frobenius() < 1e-13);
        let k_nodamp = build_k(&rep, &MmeParams::new(1.0, 0.0, 1.2).unwrap()).unwrap();
        assert!((&k_nodamp - &k0).frobenius() == 0.0);
    }

    #[test]
    fn k3_ladder_arithmetic() {
        let rep = FockRep::new(4).unwrap();
        let k3 = build_k3(&rep).unwrap();
        let mut rho = CMatrix::zeros((4, 4));
        rho[[2, 0]] = c(1.0);
        let out = k3.apply(&rho).unwrap();
        // 2a|2><0|a - aa|2><0| - |2><0|aa with <0|a = <1| and <0|aa = √2<2|
        let r2 = 2f64.sqrt();
        let mut expect = CMatrix::zeros((4, 4));
        expect[[1, 1]] = c(2.0 * r2);
        expect[[0, 0]] = c(-r2);
        expect[[2, 2]] = c(-r2);
        assert!(frobenius(&(out - expect)) < 1e-14);
        let kd = build_kd(&rep, &MmeParams::new(1.0, 0.4, 1.0).unwrap()).unwrap();
        let (c1, c2) = dissipator_coefficients(0.4, 1.0);
        let ext = build_k3_extended(&rep, c1, c2, C64::new(0.0, 0.0)).unwrap();
        assert!((&kd - &ext).frobenius() < 1e-15);
    }

    #[test]
    fn extended_dissipator_is_linear_in_c3() {
        let rep = FockRep::new(6).unwrap();
        let base = build_k3_extended(&rep, 0.3, 0.1, C64::new(0.0, 0.0)).unwrap();
        let ext = build_k3_extended(&rep, 0.3, 0.1, c(0.01)).unwrap();
        let k3 = build_k3(&rep).unwrap();
        let k3d = k3.adjoint();
        let expect = (&k3 + &lindblad_pair(rep.a_dag(), rep.a()).unwrap()).frobenius() * 0.01;
        assert_abs_diff_eq!((&ext - &base).frobenius(), expect, epsilon = 1e-12);
        assert!(k3d.frobenius() > 0.0);
    }

    #[test]
    fn cl_noise_term_is_double_commutator() {
        let n = 8;
        let rep = FockRep::new(n).unwrap();
        let rho = test_matrix(n, 1.1);
        let with = build_cl(&rep, 1.0, 0.3, 2.5).unwrap();
        let without = build_cl(&rep, 1.0, 0.3, 1.0).unwrap();
        let x = rep.x();
        let dc = commutator(x, &commutator(x, &rho));
        let got = (&with - &without).apply(&rho).unwrap();
        let expect = dc.mapv(|z| z * (-0.3 * 1.5));
        assert!(frobenius(&(got - expect)) < 1e-12);
        let free = build_cl(&rep, 1.0, 0.0, 1.0).unwrap();
        assert!((&free - &build_k0(&rep, 1.0).unwrap()).frobenius() < 1e-14);
    }

    #[test]
    fn hpz_without_shift_is_cl() {
        let rep = FockRep::new(10).unwrap();
        let hpz = build_hpz(
            &rep,
            &HpzParams {
                omega0: 1.0,
                gamma2: 0.15,
                b: 1.3,
                gamma_source: GammaSource::Direct(0.0),
            },
        )
        .unwrap();
        let cl = build_cl(&rep, 1.0, 0.15, 2.6).unwrap();
        assert!((&hpz - &cl).frobenius() < 1e-13);
    }

    #[test]
    fn hpz_shift_on_vacuum_matches_coordinate_oracle() {
        // In coordinates the vacuum is exp(-(x² + x̃²)/2); (∂x + ∂x̃) brings
        // down -(x + x̃), so the term gives -iΓ(x² - x̃²)ρ = -iΓ[x̂², ρ].
        // With x̂²|0> = (|0> + √2|2>)/2 that is -iΓ/√2 (|2><0| - |0><2|).
        let n = 6;
        let rep = FockRep::new(n).unwrap();
        let g = 0.37;
        let make = |gs| {
            build_hpz(
                &rep,
                &HpzParams {
                    omega0: 1.0,
                    gamma2: 0.1,
                    b: 1.0,
                    gamma_source: GammaSource::Direct(gs),
                },
            )
            .unwrap()
        };
        let term = &make(g) - &make(0.0);
        let vac = DensityState::fock(n, 0).unwrap();
        let got = term.apply(vac.matrix()).unwrap();
        let mut expect = CMatrix::zeros((n, n));
        let amp = -I * g * core::f64::consts::FRAC_1_SQRT_2;
        expect[[2, 0]] = amp;
        expect[[0, 2]] = -amp;
        assert!(frobenius(&(&got - &expect)) < 1e-14);
        let dc = commutator(rep.x(), &commutator(rep.p(), vac.matrix())).mapv(|z| z * -g);
        assert!(frobenius(&(&got - &dc)) < 1e-14);
    }

    #[test]
    fn pv_zero_coupling_and_window_independence() {
        let zero = OhmicBath::new(0.0, 10.0).unwrap();
        assert_eq!(gamma_coefficient(&zero, 1.0, 1.0, 1e-3).unwrap().value, 0.0);
        let bath = OhmicBath::new(1.0, 10.0).unwrap();
        let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| gamma_coefficient(&bath, 1.0, 1.0, e).unwrap().value)
            .collect();
        for v in &vals[1..] {
            assert_relative_eq!(*v, vals[0], max_relative = 1e-6);
        }
    }

    #[test]
    fn pv_matches_frozen_reference() {
        // Independent reference: Cauchy-weighted adaptive quadrature of
        // f(ω)/(ω + ω₀) on [0, 60], plus the tail from 60 to 2000, with
        // η = 1, Ω_c = 10, ω₀ = 1, ħβ = 1.
        let bath = OhmicBath::new(1.0, 10.0).unwrap();
        let est = gamma_coefficient(&bath, 1.0, 1.0, DEFAULT_PV_WINDOW).unwrap();
        assert_relative_eq!(est.value, PV_REFERENCE, max_relative = 1e-8);
    }

    const PV_REFERENCE: f64 = 0.210_312_547_901_670_6;

    proptest! {
        #[test]
        fn builders_preserve_hermiticity(b in 0.5f64..4.0, gamma in 0.0f64..0.5, phase in 0.0f64..6.0) {
            let n = 6;
            let rep = FockRep::new(n).unwrap();
            let rho = hermitian(n, phase);
            let ops = [
                build_k(&rep, &MmeParams::new(1.0, gamma, b).unwrap()).unwrap(),
                build_cl(&rep, 1.0, gamma, b).unwrap(),
                build_hpz(&rep, &HpzParams { omega0: 1.0, gamma2: gamma, b, gamma_source: GammaSource::Direct(0.1) }).unwrap(),
                build_k3_extended(&rep, 0.3, 0.1, C64::new(0.02, -0.01)).unwrap(),
            ];
            for k in ops.iter() {
                let out = k.apply(&rho).unwrap();
                prop_assert!(frobenius(&(&out - &dagger(&out))) < 1e-12);
            }
        }
    }
}
