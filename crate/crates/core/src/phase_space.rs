//! Gaussian equilibrium in `(Q, r)`, the scalings induced by the thermal
//! rotation, and a finite-volume Fokker-Planck solver in `(Q, P)`.
//!
//! Coordinates: `Q = (x + x̃)/2`, `r = x - x̃`, and `P` conjugate to `r`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::fock::{DensityState, FockRep};
use crate::linalg::{self, c, CMatrix};
use crate::quadrature::integrate;
use crate::spectral::evolve;
use crate::superops::{build_k, MmeParams};
use crate::thermal::hyperbolic_r;
use crate::{Error, Result};

fn check_b(b: f64) -> Result<()> {
    if !b.is_finite() || !(b >= 0.5) {
        return Err(Error::InvalidParameter {
            name: "b",
            value: b,
            reason: "thermal parameter must be finite and at least 1/2",
        });
    }
    Ok(())
}

/// `ρ(Q, r) = (2πb)^{-1/2} exp(-Q²/2b - b r²/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianQr {
    b: f64,
}

impl GaussianQr {
    pub fn new(b: f64) -> Result<Self> {
        check_b(b)?;
        Ok(GaussianQr { b })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn normalization(&self) -> f64 {
        1.0 / (2.0 * core::f64::consts::PI * self.b).sqrt()
    }

    pub fn density(&self, q: f64, r: f64) -> f64 {
        self.normalization() * (-q * q / (2.0 * self.b) - self.b * r * r / 2.0).exp()
    }

    /// Closed form `(ΔQ, Δr) = (√b, 1/√b)`.
    pub fn dispersions(&self) -> (f64, f64) {
        let s = self.b.sqrt();
        (s, 1.0 / s)
    }
}

pub fn equilibrium_gaussian(b: f64) -> Result<GaussianQr> {
    GaussianQr::new(b)
}

/// Moments along the `r = 0` and `Q = 0` sections, by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionMoments {
    pub mean_q: f64,
    pub second_q: f64,
    pub mean_r: f64,
    pub second_r: f64,
}

impl SectionMoments {
    pub fn delta_q(&self) -> f64 {
        (self.second_q - self.mean_q * self.mean_q).sqrt()
    }

    pub fn delta_r(&self) -> f64 {
        (self.second_r - self.mean_r * self.mean_r).sqrt()
    }
}

/// Section moments by adaptive quadrature over `±20` standard widths.
pub fn section_moments(g: &GaussianQr) -> Result<SectionMoments> {
    let (sq, sr) = g.dispersions();
    let moments = |f: &dyn Fn(f64) -> f64, half: f64| -> Result<(f64, f64)> {
        let tol = 1e-15;
        let m0 = integrate(f, -half, half, 0.0, tol, 2000)?.value;
        let m1 = integrate(|t| t * f(t), -half, half, tol * half, tol, 2000)?.value;
        let m2 = integrate(|t| t * t * f(t), -half, half, 0.0, tol, 2000)?.value;
        Ok((m1 / m0, m2 / m0))
    };
    let (mean_q, second_q) = moments(&|q| g.density(q, 0.0), 20.0 * sq)?;
    let (mean_r, second_r) = moments(&|r| g.density(0.0, r), 20.0 * sr)?;
    Ok(SectionMoments {
        mean_q,
        second_q,
        mean_r,
        second_r,
    })
}

/// The Gaussian at `b' = e^{2θ} b`.
pub fn transformed_gaussian(g: &GaussianQr, theta: f64) -> Result<GaussianQr> {
    let floor = -0.5 * (2.0 * g.b).ln();
    if !theta.is_finite() || theta < floor - 1e-15 {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "would take the thermal parameter below 1/2",
        });
    }
    GaussianQr::new((g.b * (2.0 * theta).exp()).max(0.5))
}

/// `(e^θ ΔQ, e^{-θ} Δr)`.
pub fn thermal_map_dispersions(g: &GaussianQr, theta: f64) -> Result<(f64, f64)> {
    transformed_gaussian(g, theta)?;
    let (dq, dr) = g.dispersions();
    Ok((theta.exp() * dq, (-theta).exp() * dr))
}

/// `(Q, r) -> (e^{-θ} Q, e^θ r)`.
pub fn scale_qr(q: f64, r: f64, theta: f64) -> (f64, f64) {
    ((-theta).exp() * q, theta.exp() * r)
}

/// `(P, Q) -> (e^{-θ} P, e^{-θ} Q)`.
pub fn scale_pq(p: f64, q: f64, theta: f64) -> (f64, f64) {
    let s = (-theta).exp();
    (s * p, s * q)
}

/// Angle of `b` measured from the zero-temperature value: `θ = ½ ln(2b)`.
pub fn theta_from_zero_temperature(b: f64) -> Result<f64> {
    check_b(b)?;
    Ok(0.5 * (2.0 * b).ln())
}

/// `tanh θ`.
pub fn velocity_from_theta(theta: f64) -> f64 {
    theta.tanh()
}

/// `(b - ½)/(b + ½)`.
pub fn velocity_from_b(b: f64) -> Result<f64> {
    check_b(b)?;
    Ok((b - 0.5) / (b + 0.5))
}

/// `exp(-ħω₀β)`.
pub fn velocity_from_hbar_omega_beta(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParameter {
            name: "hbar_omega_beta",
            value: x,
            reason: "must be positive",
        });
    }
    Ok((-x).exp())
}

/// `(J, α) = (½(P² + Q²), atan2(Q, P))`.
pub fn action_angle(p: f64, q: f64) -> (f64, f64) {
    (0.5 * (p * p + q * q), q.atan2(p))
}

/// `(J, α) -> (e^{-2θ} J, α)`.
pub fn action_angle_scale(j: f64, alpha: f64, theta: f64) -> Result<(f64, f64)> {
    if !(j >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "J",
            value: j,
            reason: "action must be non-negative",
        });
    }
    Ok(((-2.0 * theta).exp() * j, alpha))
}

/// Whether the hyperbolic rotation keeps `(x, x̃)` in its region: the sign
/// of `x² - x̃²`, and the sign of the larger coordinate.
pub fn preserves_region(x: f64, x_tilde: f64, theta: f64) -> bool {
    let r = hyperbolic_r(theta);
    let xp = r[0][0] * x + r[0][1] * x_tilde;
    let xtp = r[1][0] * x + r[1][1] * x_tilde;
    let form = x * x - x_tilde * x_tilde;
    let form_p = xp * xp - xtp * xtp;
    let scale = (x * x + x_tilde * x_tilde) * (2.0 * theta.abs()).exp();
    if form.abs() <= 1e-12 * scale {
        return form_p.abs() <= 1e-9 * scale;
    }
    if form.signum() != form_p.signum() {
        return false;
    }
    if form > 0.0 {
        x.signum() == xp.signum()
    } else {
        x_tilde.signum() == xtp.signum()
    }
}

/// Drift discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Advection {
    /// Second order, node-product central flux.
    #[default]
    Central,
    /// First order upwind; keeps the field non-negative.
    Upwind,
    /// Central where the face Péclet number is at most 2, upwind elsewhere.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpParams {
    pub omega0: f64,
    pub gamma: f64,
    pub b: f64,
}

impl FpParams {
    pub fn new(omega0: f64, gamma: f64, b: f64) -> Result<Self> {
        if !omega0.is_finite() || omega0 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "omega0",
                value: omega0,
                reason: "must be finite and non-negative",
            });
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
                reason: "must be finite and non-negative",
            });
        }
        check_b(b)?;
        Ok(FpParams { omega0, gamma, b })
    }
}

/// Grid function `W(Q, P)` on a uniform tensor grid; `field[i·n_p + j]`
/// holds `W(Q_i, P_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpGrid {
    q_half: f64,
    p_half: f64,
    nq: usize,
    np: usize,
    field: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    /// Raw second moments `⟨Q²⟩`, `⟨P²⟩`, `⟨QP⟩`.
    pub q2: f64,
    pub p2: f64,
    pub qp: f64,
    pub mass: f64,
}

impl FpGrid {
    /// Zero field on `[-q_half, q_half] × [-p_half, p_half]`.
    pub fn new(q_half: f64, p_half: f64, nq: usize, np: usize) -> Result<Self> {
        for (name, v) in [("q_half", q_half), ("p_half", p_half)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "box half-width must be finite and positive",
                });
            }
        }
        for (what, v) in [("nq", nq), ("np", np)] {
            if v < 3 {
                return Err(Error::InvalidDimension {
                    what,
                    value: v,
                    reason: "need at least three grid points",
                });
            }
        }
        Ok(FpGrid {
            q_half,
            p_half,
            nq,
            np,
            field: alloc::vec![0.0; nq * np],
        })
    }

    /// Fills the field with a normalized Gaussian of the given means and
    /// covariance `[[var_q, cov], [cov, var_p]]`.
    pub fn set_gaussian(&mut self, mean: (f64, f64), var_q: f64, var_p: f64, cov: f64) -> Result<()> {
        let det = var_q * var_p - cov * cov;
        if !(var_q > 0.0 && var_p > 0.0 && det > 0.0) {
            return Err(Error::InvalidParameter {
                name: "covariance",
                value: det,
                reason: "covariance must be positive definite",
            });
        }
        let norm = 1.0 / (2.0 * core::f64::consts::PI * det.sqrt());
        for i in 0..self.nq {
            for j in 0..self.np {
                let dq = self.q(i) - mean.0;
                let dp = self.p(j) - mean.1;
                let quad = (var_p * dq * dq - 2.0 * cov * dq * dp + var_q * dp * dp) / det;
                self.field[i * self.np + j] = norm * (-0.5 * quad).exp();
            }
        }
        Ok(())
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn q_half(&self) -> f64 {
        self.q_half
    }

    pub fn p_half(&self) -> f64 {
        self.p_half
    }

    pub fn hq(&self) -> f64 {
        2.0 * self.q_half / (self.nq - 1) as f64
    }

    pub fn hp(&self) -> f64 {
        2.0 * self.p_half / (self.np - 1) as f64
    }

    pub fn q(&self, i: usize) -> f64 {
        -self.q_half + i as f64 * self.hq()
    }

    pub fn p(&self, j: usize) -> f64 {
        -self.p_half + j as f64 * self.hp()
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.field[i * self.np + j]
    }

    pub fn min_value(&self) -> f64 {
        self.field.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Trapezoid-rule moments.
    pub fn moments(&self) -> FpMoments {
        let (hq, hp) = (self.hq(), self.hp());
        let mut acc = [0.0f64; 6];
        for i in 0..self.nq {
            let wi = if i == 0 || i == self.nq - 1 { 0.5 } else { 1.0 };
            let q = self.q(i);
            for j in 0..self.np {
                let wj = if j == 0 || j == self.np - 1 { 0.5 } else { 1.0 };
                let p = self.p(j);
                let w = wi * wj * self.value(i, j) * hq * hp;
                acc[0] += w;
                acc[1] += w * q;
                acc[2] += w * p;
                acc[3] += w * q * q;
                acc[4] += w * p * p;
                acc[5] += w * q * p;
            }
        }
        let m = acc[0];
        FpMoments {
            mean_q: acc[1] / m,
            mean_p: acc[2] / m,
            q2: acc[3] / m,
            p2: acc[4] / m,
            qp: acc[5] / m,
            mass: m,
        }
    }

    /// Discrete `L²` distance to another field on the same index grid,
    /// weighted by this grid's cell area.
    pub fn l2_distance(&self, other: &FpGrid) -> Result<f64> {
        if self.nq != other.nq || self.np != other.np {
            return Err(Error::ShapeMismatch {
                expected: (self.nq, self.np),
                found: (other.nq, other.np),
            });
        }
        let s: f64 = self.field.iter().zip(other.field.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        Ok((s * self.hq() * self.hp()).sqrt())
    }

    /// The same field on a grid stretched by `e^θ` and multiplied by
    /// `e^{-2θ}`, so that total mass is unchanged.
    pub fn stretched(&self, theta: f64) -> FpGrid {
        let s = theta.exp();
        FpGrid {
            q_half: self.q_half * s,
            p_half: self.p_half * s,
            nq: self.nq,
            np: self.np,
            field: self.field.iter().map(|w| w / (s * s)).collect(),
        }
    }

    /// `(Q, P, W)` triples in index order.
    pub fn snapshot(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.field.len());
        for i in 0..self.nq {
            for j in 0..self.np {
                out.push((self.q(i), self.p(j), self.value(i, j)));
            }
        }
        out
    }
}

/// Discretized `K(Q, P; b)` with zero-flux walls. Each face carries the two
/// coefficients of its flux `F = c_lo W_lo + c_hi W_hi`.
#[derive(Debug, Clone)]
pub struct FpOperator {
    params: FpParams,
    advection: Advection,
    nq: usize,
    np: usize,
    hq: f64,
    hp: f64,
    // faces between (i, j) and (i+1, j), indexed i·np + j
    q_faces: Vec<(f64, f64)>,
    // faces between (i, j) and (i, j+1), indexed i·(np-1) + j
    p_faces: Vec<(f64, f64)>,
    max_stable_dt: f64,
    max_peclet: f64,
}

fn face_coefficients(advection: Advection, v_lo: f64, v_hi: f64, diff: f64, h: f64) -> (f64, f64, f64) {
    let d = diff / h;
    let v_face = 0.5 * (v_lo + v_hi);
    let peclet = if diff > 0.0 { v_face.abs() * h / diff } else { f64::INFINITY };
    let central = (0.5 * v_lo + d, 0.5 * v_hi - d);
    let upwind = (v_face.max(0.0) + d, v_face.min(0.0) - d);
    let pick = match advection {
        Advection::Central => central,
        Advection::Upwind => upwind,
        Advection::Hybrid => {
            if peclet <= 2.0 {
                central
            } else {
                upwind
            }
        }
    };
    (pick.0, pick.1, if v_face == 0.0 { 0.0 } else { peclet })
}

/// Builds the operator for a grid. Requires at least 8 points per `√b`.
pub fn fp_build(params: FpParams, grid: &FpGrid, advection: Advection) -> Result<FpOperator> {
    let (hq, hp) = (grid.hq(), grid.hp());
    let needed = params.b.sqrt() / 8.0;
    let h = hq.max(hp);
    if h > needed * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "grid spacing",
            value: h,
            reason: "grid must resolve the Gaussian with at least 8 points per sqrt(b)",
        });
    }
    let (w, g) = (params.omega0, params.gamma);
    let diff = params.b * g / 2.0;
    let (nq, np) = (grid.nq, grid.np);
    let mut max_peclet = 0.0f64;
    let mut q_faces = Vec::with_capacity((nq - 1) * np);
    for i in 0..nq - 1 {
        for j in 0..np {
            let p = grid.p(j);
            let v_lo = w * p - 0.5 * g * grid.q(i);
            let v_hi = w * p - 0.5 * g * grid.q(i + 1);
            let (a, b, pe) = face_coefficients(advection, v_lo, v_hi, diff, hq);
            max_peclet = max_peclet.max(pe);
            q_faces.push((a, b));
        }
    }
    let mut p_faces = Vec::with_capacity(nq * (np - 1));
    for i in 0..nq {
        let q = grid.q(i);
        for j in 0..np - 1 {
            let v_lo = -w * q - 0.5 * g * grid.p(j);
            let v_hi = -w * q - 0.5 * g * grid.p(j + 1);
            let (a, b, pe) = face_coefficients(advection, v_lo, v_hi, diff, hp);
            max_peclet = max_peclet.max(pe);
            p_faces.push((a, b));
        }
    }
    let hmin = hq.min(hp);
    let range = grid.q_half.max(grid.p_half);
    let diffusive = if params.b * g > 0.0 {
        hmin * hmin / (params.b * g)
    } else {
        f64::INFINITY
    };
    let speed = (w + 0.5 * g) * range;
    let advective = if speed > 0.0 { hmin / speed } else { f64::INFINITY };
    Ok(FpOperator {
        params,
        advection,
        nq,
        np,
        hq,
        hp,
        q_faces,
        p_faces,
        max_stable_dt: 0.4 * diffusive.min(advective),
        max_peclet,
    })
}

impl FpOperator {
    pub fn params(&self) -> FpParams {
        self.params
    }

    pub fn advection(&self) -> Advection {
        self.advection
    }

    /// `0.4·min(h²/(bγ), h/((ω₀ + γ/2)·range))`.
    pub fn max_stable_dt(&self) -> f64 {
        self.max_stable_dt
    }

    /// Largest face Péclet number `|v| h / D`.
    pub fn max_peclet(&self) -> f64 {
        self.max_peclet
    }

    fn check_grid(&self, grid: &FpGrid) -> Result<()> {
        if grid.nq != self.nq || grid.np != self.np || (grid.hq() - self.hq).abs() > 1e-12 * self.hq {
            return Err(Error::ShapeMismatch {
                expected: (self.nq, self.np),
                found: (grid.nq, grid.np),
            });
        }
        Ok(())
    }

    /// `dW/dt` for a field on the operator's grid.
    pub fn apply(&self, field: &[f64], out: &mut [f64]) {
        let np = self.np;
        out.iter_mut().for_each(|x| *x = 0.0);
        let (iq, ip) = (1.0 / self.hq, 1.0 / self.hp);
        for i in 0..self.nq - 1 {
            for j in 0..np {
                let (a, b) = self.q_faces[i * np + j];
                let lo = i * np + j;
                let hi = lo + np;
                let f = (a * field[lo] + b * field[hi]) * iq;
                out[lo] -= f;
                out[hi] += f;
            }
        }
        for i in 0..self.nq {
            for j in 0..np - 1 {
                let (a, b) = self.p_faces[i * (np - 1) + j];
                let lo = i * np + j;
                let f = (a * field[lo] + b * field[lo + 1]) * ip;
                out[lo] -= f;
                out[lo + 1] += f;
            }
        }
    }

    /// One explicit second-order Runge-Kutta (Heun) step.
    pub fn step(&self, grid: &mut FpGrid, dt: f64) -> Result<()> {
        self.check_grid(grid)?;
        if !(dt > 0.0) || dt > self.max_stable_dt * (1.0 + 1e-12) {
            return Err(Error::StepSize {
                dt,
                max_stable: self.max_stable_dt,
            });
        }
        let n = grid.field.len();
        let mut k1 = alloc::vec![0.0; n];
        self.apply(&grid.field, &mut k1);
        let stage: Vec<f64> = grid.field.iter().zip(&k1).map(|(w, k)| w + dt * k).collect();
        let mut k2 = alloc::vec![0.0; n];
        self.apply(&stage, &mut k2);
        for ((w, a), b) in grid.field.iter_mut().zip(&k1).zip(&k2) {
            *w += 0.5 * dt * (a + b);
        }
        if grid.field.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { routine: "fp_step" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpSample {
    pub t: f64,
    pub moments: FpMoments,
    pub min_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpRun {
    pub grid: FpGrid,
    pub samples: Vec<FpSample>,
    pub steps: usize,
    /// Largest `|mass(t) - mass(0)|` over the samples.
    pub max_mass_drift: f64,
}

/// Advances `grid` through each time of `sample_times` (increasing, from
/// 0), splitting every interval into equal steps no larger than `dt_max`
/// (default: the stability bound).
pub fn fp_run(op: &FpOperator, grid: FpGrid, sample_times: &[f64], dt_max: Option<f64>) -> Result<FpRun> {
    op.check_grid(&grid)?;
    let dt_cap = dt_max.unwrap_or(op.max_stable_dt);
    if !(dt_cap > 0.0) || dt_cap > op.max_stable_dt * (1.0 + 1e-12) {
        return Err(Error::StepSize {
            dt: dt_cap,
            max_stable: op.max_stable_dt,
        });
    }
    let mut grid = grid;
    let m0 = grid.moments().mass;
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut t = 0.0;
    let mut steps = 0;
    let mut drift = 0.0f64;
    for &ts in sample_times {
        if !ts.is_finite() || ts < t {
            return Err(Error::InvalidParameter {
                name: "sample_times",
                value: ts,
                reason: "sample times must be finite, non-negative and non-decreasing",
            });
        }
        let span = ts - t;
        if span > 0.0 {
            let n = (span / dt_cap).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            for _ in 0..n {
                op.step(&mut grid, dt)?;
            }
            steps += n;
        }
        t = ts;
        let moments = grid.moments();
        drift = drift.max((moments.mass - m0).abs());
        samples.push(FpSample {
            t,
            moments,
            min_value: grid.min_value(),
        });
    }
    Ok(FpRun {
        grid,
        samples,
        steps,
        max_mass_drift: drift,
    })
}

/// Exact first and second moments of the Fokker-Planck flow:
/// `d⟨Q⟩ = ω₀⟨P⟩ - γ/2⟨Q⟩`, `d⟨P⟩ = -ω₀⟨Q⟩ - γ/2⟨P⟩`,
/// `d⟨Q²⟩ = 2ω₀⟨QP⟩ - γ⟨Q²⟩ + bγ`, `d⟨P²⟩ = -2ω₀⟨QP⟩ - γ⟨P²⟩ + bγ`,
/// `d⟨QP⟩ = ω₀(⟨P²⟩ - ⟨Q²⟩) - γ⟨QP⟩`.
pub fn moment_flow(params: FpParams, start: &FpMoments, t: f64) -> Result<FpMoments> {
    let (w, g, b) = (params.omega0, params.gamma, params.b);
    // state (⟨Q⟩, ⟨P⟩, ⟨Q²⟩, ⟨P²⟩, ⟨QP⟩, 1)
    let rows: [[f64; 6]; 6] = [
        [-0.5 * g, w, 0.0, 0.0, 0.0, 0.0],
        [-w, -0.5 * g, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -g, 0.0, 2.0 * w, b * g],
        [0.0, 0.0, 0.0, -g, -2.0 * w, b * g],
        [0.0, 0.0, -w, w, -g, 0.0],
        [0.0; 6],
    ];
    let m = CMatrix::from_shape_fn((6, 6), |(i, j)| c(rows[i][j] * t));
    let e = linalg::expm(&m)?;
    let x0 = [start.mean_q, start.mean_p, start.q2, start.p2, start.qp, 1.0];
    let mut x = [0.0; 6];
    for i in 0..6 {
        x[i] = (0..6).map(|j| e[[i, j]].re * x0[j]).sum();
    }
    Ok(FpMoments {
        mean_q: x[0],
        mean_p: x[1],
        q2: x[2],
        p2: x[3],
        qp: x[4],
        mass: start.mass,
    })
}

/// Quadrature moments of a Fock-space state, with `Q ↔ x̂`, `P ↔ p̂` and
/// `QP ↔ (x̂p̂ + p̂x̂)/2`.
pub fn fock_moments(rep: &FockRep, rho: &DensityState) -> Result<FpMoments> {
    let (x, p) = (rep.x(), rep.p());
    let xp = (x.dot(p) + p.dot(x)).mapv(|z| z * 0.5);
    let e = |op: &CMatrix| -> Result<f64> { Ok(rho.expectation(op)?.re) };
    Ok(FpMoments {
        mean_q: e(x)?,
        mean_p: e(p)?,
        q2: e(&x.dot(x))?,
        p2: e(&p.dot(p))?,
        qp: e(&xp)?,
        mass: rho.trace().re,
    })
}

/// Largest fourth cumulant of the quadratures `cos φ x̂ + sin φ p̂` over
/// four angles, relative to the squared variance; zero for Gaussian states.
/// Only levels below `N - 2` enter, so the truncation edge stays out.
pub fn gaussianity_defect(rep: &FockRep, rho: &DensityState) -> Result<f64> {
    let n = rep.dim();
    let inner = FockRep::new(n)?;
    let mut worst = 0.0f64;
    for k in 0..4 {
        let phi = k as f64 * core::f64::consts::FRAC_PI_4;
        let quad: CMatrix = inner.x().mapv(|z| z * phi.cos()) + inner.p().mapv(|z| z * phi.sin());
        // Rows near the edge of powers of truncated ladders are corrupted;
        // build powers on a larger space and cut back.
        let big = FockRep::new(n + 4)?;
        let qb: CMatrix = big.x().mapv(|z| z * phi.cos()) + big.p().mapv(|z| z * phi.sin());
        let q2b = qb.dot(&qb);
        let q3b = q2b.dot(&qb);
        let q4b = q2b.dot(&q2b);
        let cut = |m: &CMatrix| m.slice(ndarray::s![0..n, 0..n]).to_owned();
        let mu = rho.expectation(&quad)?.re;
        let m2 = rho.expectation(&cut(&q2b))?.re;
        let m3 = rho.expectation(&cut(&q3b))?.re;
        let m4 = rho.expectation(&cut(&q4b))?.re;
        let var = m2 - mu * mu;
        let central4 = m4 - 4.0 * mu * m3 + 6.0 * mu * mu * m2 - 3.0 * mu.powi(4);
        let kappa = central4 - 3.0 * var * var;
        worst = worst.max(kappa.abs() / (var * var));
    }
    Ok(worst)
}

/// Gaussianity threshold for [`fp_vs_fock_moments`].
pub const GAUSSIANITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentComparison {
    pub times: Vec<f64>,
    pub fp: Vec<FpMoments>,
    pub fock: Vec<FpMoments>,
    /// Largest difference over times and the five moments.
    pub max_discrepancy: f64,
    pub fp_mass_drift: f64,
}

/// Evolves a Gaussian state both as a Fock-space density matrix and as a
/// Wigner function on `grid_template`'s grid, and compares moments.
pub fn fp_vs_fock_moments(
    params: FpParams,
    dim: usize,
    rho0: &DensityState,
    times: &[f64],
    grid_template: &FpGrid,
    advection: Advection,
) -> Result<MomentComparison> {
    let rep = FockRep::new(dim)?;
    let defect = gaussianity_defect(&rep, rho0)?;
    if !(defect <= GAUSSIANITY_TOLERANCE) {
        return Err(Error::UnsupportedState {
            reason: "initial state is not Gaussian",
            defect,
        });
    }
    let k = build_k(&rep, &MmeParams::new(params.omega0, params.gamma, params.b)?)?;
    let fock = fock_moment_series(&rep, &evolve(&k, rho0, times)?)?;

    let m = fock_moments(&rep, rho0)?;
    let mut grid = FpGrid::new(grid_template.q_half, grid_template.p_half, grid_template.nq, grid_template.np)?;
    grid.set_gaussian(
        (m.mean_q, m.mean_p),
        m.q2 - m.mean_q * m.mean_q,
        m.p2 - m.mean_p * m.mean_p,
        m.qp - m.mean_q * m.mean_p,
    )?;
    let op = fp_build(params, &grid, advection)?;
    let run = fp_run(&op, grid, times, None)?;
    let fp: Vec<FpMoments> = run.samples.iter().map(|s| s.moments).collect();
    let mut worst = 0.0f64;
    for (a, b) in fp.iter().zip(fock.iter()) {
        for d in [a.mean_q - b.mean_q, a.mean_p - b.mean_p, a.q2 - b.q2, a.p2 - b.p2, a.qp - b.qp] {
            worst = worst.max(d.abs());
        }
    }
    Ok(MomentComparison {
        times: times.to_vec(),
        fp,
        fock,
        max_discrepancy: worst,
        fp_mass_drift: run.max_mass_drift,
    })
}

/// Evolves `initial` for time `t` with parameter `b`, and separately
/// evolves the stretched copy with `b' = e^{2θ} b` on the stretched grid;
/// returns the `L²` difference between the stretched first result and the
/// second result.
pub fn scale_symmetry_defect(params: FpParams, initial: &FpGrid, theta: f64, t: f64, advection: Advection) -> Result<f64> {
    let op = fp_build(params, initial, advection)?;
    let direct = fp_run(&op, initial.clone(), &[t], None)?;
    let scaled_params = FpParams::new(params.omega0, params.gamma, params.b * (2.0 * theta).exp())?;
    let stretched_initial = initial.stretched(theta);
    let op2 = fp_build(scaled_params, &stretched_initial, advection)?;
    // Same step count on both sides so the comparison isolates the symmetry.
    let dt = op.max_stable_dt().min(op2.max_stable_dt());
    let direct = if dt < op.max_stable_dt() {
        fp_run(&op, initial.clone(), &[t], Some(dt))?
    } else {
        direct
    };
    let rescaled = fp_run(&op2, stretched_initial, &[t], Some(dt))?;
    direct.grid.stretched(theta).l2_distance(&rescaled.grid)
}

/// Moment trajectories of an evolved list of Fock-space states.
pub fn fock_moment_series(rep: &FockRep, states: &[DensityState]) -> Result<Vec<FpMoments>> {
    states.iter().map(|s| fock_moments(rep, s)).collect()
}
