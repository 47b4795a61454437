//! One parameter struct per scenario. Defaults reproduce the acceptance
//! setups, so `run --scenario <name>` with an empty config is the reference run.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use thermosym::fock::{DensityState, FockRep, InteriorWindow};
use thermosym::linalg::{frobenius, C64};
use thermosym::phase_space::{
    equilibrium_gaussian, fp_build, fp_run, moment_flow, scale_symmetry_defect, section_moments,
    theta_from_zero_temperature, thermal_map_dispersions, velocity_from_b, velocity_from_hbar_omega_beta,
    velocity_from_theta, Advection, FpGrid, FpParams,
};
use thermosym::spectral::{
    coherent_state, default_order, degeneracy_across_b, eigen_spectrum, evolve, expectation_series,
    extract_decay_rate, match_spectrum, refinement_distance, stationary_state, MATCH_TOLERANCE_FACTOR,
};
use thermosym::superops::{
    b_tilde, build_k, build_k0, ClFamily, GammaSource, HpzFamily, MmeParams, OhmicBath, RwaFamily, ThermalFamily,
};
use thermosym::thermal::{
    bogoliubov_action_residual, coth_ratio_scan, ekert_reduce, generator_g, omega_check, rotated_commutators,
    rotation_u, su11_generators, symmetry_residual, symplectic_s, transform_superop, EkertOptions, RotationBudget,
};
use thermosym::Error;

use crate::config::UsageError;
use crate::report::{Check, Outcome, Relation, Table};

pub trait Scenario: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    const TAG: &'static str;

    fn validate(&self) -> Result<(), UsageError> {
        Ok(())
    }

    fn run(&self) -> thermosym::Result<Outcome>;
}

pub const NAMES: [&str; 9] = [
    "symmetry",
    "spectrum",
    "degeneracy",
    "evolve",
    "gaussian",
    "fokker-planck",
    "hpz-breaking",
    "ekert",
    "coth-scan",
];

/// Runs `f` and records its value, or a failed check when it errors.
fn attempt(
    out: &mut Outcome,
    name: &str,
    tag: &str,
    tolerance: f64,
    relation: Relation,
    f: impl FnOnce() -> thermosym::Result<f64>,
) {
    let c = match f() {
        Ok(v) => Check::new(name, tag, v, tolerance, relation),
        Err(e) => Check::failed(name, tag, tolerance, relation, e),
    };
    out.check(c);
}

fn bad(msg: String) -> UsageError {
    UsageError(msg)
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), UsageError> {
    if ok {
        Ok(())
    } else {
        Err(bad(msg()))
    }
}

fn positive(name: &str, v: f64) -> Result<(), UsageError> {
    require(v.is_finite() && v > 0.0, || format!("{name} = {v}: must be finite and positive"))
}

fn non_negative(name: &str, v: f64) -> Result<(), UsageError> {
    require(v.is_finite() && v >= 0.0, || format!("{name} = {v}: must be finite and non-negative"))
}

fn thermal(name: &str, b: f64) -> Result<(), UsageError> {
    require(b.is_finite() && b >= 0.5, || format!("{name} = {b}: thermal parameter must be finite and at least 0.5"))
}

fn dimension(name: &str, n: usize, min: usize) -> Result<(), UsageError> {
    require(n >= min && n <= 64, || format!("{name} = {n}: must lie in {min}..=64"))
}

fn window_in(name: &str, w: usize, dim: usize) -> Result<(), UsageError> {
    require(w < dim, || format!("{name} = {w}: must be below the dimension {dim}"))
}

fn largest_window(max: usize, tol: f64, f: impl Fn(usize) -> thermosym::Result<f64>) -> Option<usize> {
    (0..=max).rev().find(|&m| f(m).map(|v| v < tol).unwrap_or(false))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rwa,
    Cl,
    Hpz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymmetryParams {
    pub family: Family,
    pub dim: usize,
    /// Interior window for first-order checks; `N/2` when absent.
    pub window: Option<usize>,
    pub omega0: f64,
    /// Damping rate of the chosen family (`γ`, `γ₁` or `γ₂`).
    pub gamma: f64,
    /// Fixed `Γ` for the HPZ family.
    pub big_gamma: f64,
    pub b: f64,
    pub b_prime: f64,
    /// Rotation angle for the action checks; `½ ln(b'/b)` when absent.
    pub theta: Option<f64>,
    pub tolerance: f64,
    pub action_tolerance: f64,
    pub algebra_tolerance: f64,
    pub symplectic_tolerance: f64,
    /// Angle that must be rejected by the rotation budget.
    pub over_budget_theta: f64,
}

impl Default for SymmetryParams {
    fn default() -> Self {
        SymmetryParams {
            family: Family::Rwa,
            dim: 24,
            window: None,
            omega0: 1.0,
            gamma: 0.2,
            big_gamma: 0.02,
            b: 0.5,
            b_prime: 2.0,
            theta: None,
            tolerance: 1e-6,
            action_tolerance: 1e-8,
            algebra_tolerance: 1e-10,
            symplectic_tolerance: 1e-14,
            over_budget_theta: 1.5,
        }
    }
}

impl SymmetryParams {
    fn window(&self) -> usize {
        self.window.unwrap_or(RotationBudget::for_dim(self.dim).window)
    }

    fn family(&self) -> Box<dyn ThermalFamily> {
        match self.family {
            Family::Rwa => Box::new(RwaFamily {
                omega0: self.omega0,
                gamma: self.gamma,
            }),
            Family::Cl => Box::new(ClFamily {
                omega0: self.omega0,
                gamma1: self.gamma,
            }),
            Family::Hpz => Box::new(HpzFamily {
                omega0: self.omega0,
                gamma2: self.gamma,
                gamma_source: GammaSource::Direct(self.big_gamma),
            }),
        }
    }
}

impl Scenario for SymmetryParams {
    const NAME: &'static str = "symmetry";
    const TAG: &'static str = "thermal similarity of the master-equation generator";

    fn validate(&self) -> Result<(), UsageError> {
        dimension("dim", self.dim, 8)?;
        window_in("window", self.window(), self.dim)?;
        positive("omega0", self.omega0)?;
        non_negative("gamma", self.gamma)?;
        require(self.big_gamma.is_finite(), || "big_gamma must be finite".into())?;
        thermal("b", self.b)?;
        thermal("b_prime", self.b_prime)?;
        if let Some(t) = self.theta {
            require(t.is_finite(), || "theta must be finite".into())?;
        }
        require(self.over_budget_theta.is_finite(), || "over_budget_theta must be finite".into())?;
        for (n, v) in [
            ("tolerance", self.tolerance),
            ("action_tolerance", self.action_tolerance),
            ("algebra_tolerance", self.algebra_tolerance),
            ("symplectic_tolerance", self.symplectic_tolerance),
        ] {
            positive(n, v)?;
        }
        Ok(())
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let n = self.dim;
        let m = self.window();
        let rep = FockRep::new(n)?;
        let fam = self.family();
        let tag = match self.family {
            Family::Rwa => Self::TAG,
            Family::Cl => "form invariance of the Caldeira-Leggett generator",
            Family::Hpz => "thermal similarity tested on the HPZ generator",
        };
        out.note("window", m);
        out.note("family", fam.label());

        let r = symmetry_residual(fam.as_ref(), &rep, self.b, self.b_prime, m, None)?;
        out.note("theta", r.theta);
        out.check(Check::below("symmetry_residual", tag, r.relative, self.tolerance));
        if r.relative >= self.tolerance {
            let best = largest_window(m, self.tolerance, |w| {
                symmetry_residual(fam.as_ref(), &rep, self.b, self.b_prime, w, None).map(|s| s.relative)
            });
            out.note("symmetry_largest_passing_window", json!(best));
        }

        let k0 = build_k0(&rep, self.omega0)?;
        let rot = rotation_u(&rep, r.theta, None)?;
        let w = InteriorWindow::new(n, m)?;
        attempt(
            &mut out,
            "free_part_symmetry",
            "invariance of the free generator under the rotation",
            self.action_tolerance * k0.frobenius(),
            Relation::Below,
            || w.norm((&transform_superop(&k0, &rot)? - &k0).matrix()),
        );

        let theta = self.theta.unwrap_or(r.theta);
        let rot = rotation_u(&rep, theta, None)?;
        let action_tag = "Bogoliubov action of the rotation on the ladder lifts";
        attempt(&mut out, "bogoliubov_action", action_tag, self.action_tolerance, Relation::Below, || {
            bogoliubov_action_residual(&rep, &rot, m)
        });
        attempt(&mut out, "rotated_commutators", action_tag, self.action_tolerance, Relation::Below, || {
            Ok(rotated_commutators(&rep, &rot, m)?.max_residual())
        });
        if let Err(Error::TruncationAccuracy {
            largest_passing_window,
            suggested_dim,
            ..
        }) = rotation_u(&rep, theta, Some(RotationBudget::new(m, self.action_tolerance)))
        {
            out.note("action_largest_passing_window", json!(largest_passing_window));
            out.note("action_suggested_dim", json!(suggested_dim));
        }

        let alg_tag = "su(1,1) closure of the quadratic generators";
        let alg_window = n - 4;
        match su11_generators(&rep) {
            Ok(alg) => {
                attempt(&mut out, "su11_commutators", alg_tag, self.algebra_tolerance, Relation::Below, || {
                    Ok(alg.commutator_residuals(alg_window)?.iter().copied().fold(0.0, f64::max))
                });
                attempt(&mut out, "generator_matches_su11", alg_tag, 0.0, Relation::Equal, || {
                    Ok((&generator_g(&rep)? - &alg.m2.scaled(C64::new(2.0, 0.0))).frobenius())
                });
            }
            Err(e) => out.check(Check::failed("su11_commutators", alg_tag, self.algebra_tolerance, Relation::Below, e)),
        }

        let s = symplectic_s(theta);
        out.check(Check::below(
            "symplectic_form",
            "symplectic preservation by the phase-space map",
            omega_check(&s),
            self.symplectic_tolerance,
        ));

        let guarded = rotation_u(&rep, self.over_budget_theta, Some(RotationBudget::new(m, self.action_tolerance)));
        out.check(Check::holds(
            "over_budget_rotation_rejected",
            "truncation budget guard",
            matches!(guarded, Err(Error::TruncationAccuracy { .. })),
        ));
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    pub dim: usize,
    pub omega0: f64,
    pub gamma: f64,
    pub b: f64,
    /// Largest `m + n` compared; `N/2 - 2` when absent.
    pub order: Option<usize>,
    /// Replaces `ω₀` in the predictions only.
    pub prediction_omega0: Option<f64>,
    /// Replaces `γ` in the predictions only.
    pub prediction_gamma: Option<f64>,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            dim: 20,
            omega0: 1.0,
            gamma: 0.2,
            b: 1.0,
            order: None,
            prediction_omega0: None,
            prediction_gamma: None,
        }
    }
}

impl Scenario for SpectrumParams {
    const NAME: &'static str = "spectrum";
    const TAG: &'static str = "relaxation spectrum formula";

    fn validate(&self) -> Result<(), UsageError> {
        dimension("dim", self.dim, 2)?;
        positive("omega0", self.omega0)?;
        positive("gamma", self.gamma)?;
        thermal("b", self.b)?;
        if let Some(w) = self.prediction_omega0 {
            positive("prediction_omega0", w)?;
        }
        if let Some(g) = self.prediction_gamma {
            positive("prediction_gamma", g)?;
        }
        Ok(())
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let order = self.order.unwrap_or(default_order(self.dim));
        let (pw, pg) = (
            self.prediction_omega0.unwrap_or(self.omega0),
            self.prediction_gamma.unwrap_or(self.gamma),
        );
        let rep = FockRep::new(self.dim)?;
        let k = build_k(&rep, &MmeParams::new(self.omega0, self.gamma, self.b)?)?;
        let computed = eigen_spectrum(&k)?;
        let tol = MATCH_TOLERANCE_FACTOR * (self.omega0 + self.gamma);
        let r = match_spectrum(&computed, pw, pg, order, tol);
        out.note("order", order);
        out.note("modes", r.matches.len());
        out.note("collisions", r.collisions);
        out.check(Check::below("spectrum_max_delta", Self::TAG, r.max_delta(), tol));
        out.check(Check::new("modes_outside_tolerance", Self::TAG, r.failures() as f64, 0.0, Relation::Equal));
        if !r.passes() {
            let best = (0..=order).rev().find(|&o| match_spectrum(&computed, pw, pg, o, tol).passes());
            out.note("largest_passing_order", json!(best));
        }
        let mut t = Table::new(
            "spectrum.csv",
            &["m", "n", "sign", "re_predicted", "im_predicted", "re_computed", "im_computed", "abs_delta"],
        );
        for mm in &r.matches {
            let z = mm.computed.unwrap_or(C64::new(f64::NAN, f64::NAN));
            t.push(vec![
                mm.label.m as f64,
                mm.label.n as f64,
                mm.label.sign as f64,
                mm.predicted.re,
                mm.predicted.im,
                z.re,
                z.im,
                if mm.computed.is_some() { mm.delta } else { f64::NAN },
            ]);
        }
        out.tables.push(t);
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegeneracyParams {
    pub dim: usize,
    pub omega0: f64,
    pub gamma: f64,
    pub b_values: Vec<f64>,
    pub order: Option<usize>,
    /// Also compare the spectrum at `N` with the one at `N + 8`.
    pub refine: bool,
}

impl Default for DegeneracyParams {
    fn default() -> Self {
        DegeneracyParams {
            dim: 20,
            omega0: 1.0,
            gamma: 0.2,
            b_values: vec![0.5, 1.0, 3.0],
            order: None,
            refine: true,
        }
    }
}

impl Scenario for DegeneracyParams {
    const NAME: &'static str = "degeneracy";
    const TAG: &'static str = "temperature independence of the relaxation spectrum";

    fn validate(&self) -> Result<(), UsageError> {
        dimension("dim", self.dim, 2)?;
        positive("omega0", self.omega0)?;
        positive("gamma", self.gamma)?;
        require(self.b_values.len() >= 2, || "b_values needs at least two entries".into())?;
        for &b in &self.b_values {
            thermal("b_values[]", b)?;
        }
        Ok(())
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let order = self.order.unwrap_or(default_order(self.dim));
        let rep = FockRep::new(self.dim)?;
        let fam = RwaFamily {
            omega0: self.omega0,
            gamma: self.gamma,
        };
        let tol = MATCH_TOLERANCE_FACTOR * (self.omega0 + self.gamma);
        let d = degeneracy_across_b(&fam, &rep, &self.b_values, self.omega0, self.gamma, order)?;
        out.note("order", order);
        out.check(Check::below("spectral_distance", Self::TAG, d.max_distance, tol));
        if d.max_distance >= tol {
            let best = (0..order).rev().find(|&o| {
                degeneracy_across_b(&fam, &rep, &self.b_values, self.omega0, self.gamma, o)
                    .map(|r| r.max_distance < tol)
                    .unwrap_or(false)
            });
            out.note("largest_passing_order", json!(best));
        }
        if self.refine {
            // b = 1/2 is exact under truncation, so refine at the hottest value
            let b_max = self.b_values.iter().copied().fold(0.5, f64::max);
            out.note("refinement_b", b_max);
            attempt(
                &mut out,
                "refinement_distance",
                "stability of the trusted spectral window under refinement",
                tol,
                Relation::Below,
                || refinement_distance(&fam, self.dim, b_max, self.omega0, self.gamma, order),
            );
        }
        let mut t = Table::new("spectra.csv", &["b", "index", "re", "im"]);
        for (b, spec) in d.values.iter().zip(&d.spectra) {
            for (i, z) in spec.iter().enumerate() {
                t.push(vec![*b, i as f64, z.re, z.im]);
            }
        }
        out.tables.push(t);
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveParams {
    pub dim: usize,
    pub omega0: f64,
    pub gamma: f64,
    pub b: f64,
    /// Largest weight allowed on the top two levels of the stationary state.
    pub edge_tolerance: f64,
    pub tolerance: f64,
    /// Coherent amplitude of the initial state.
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub t_end: f64,
    pub samples: usize,
    pub rate_tolerance: f64,
}

impl Default for EvolveParams {
    fn default() -> Self {
        EvolveParams {
            dim: 30,
            omega0: 1.0,
            gamma: 0.2,
            b: 1.0,
            edge_tolerance: 1e-6,
            tolerance: 1e-8,
            alpha_re: 1.0,
            alpha_im: 0.0,
            t_end: 10.0,
            samples: 41,
            rate_tolerance: 1e-6,
        }
    }
}

impl Scenario for EvolveParams {
    const NAME: &'static str = "evolve";
    const TAG: &'static str = "thermal stationary state and coherence decay";

    fn validate(&self) -> Result<(), UsageError> {
        dimension("dim", self.dim, 4)?;
        positive("omega0", self.omega0)?;
        positive("gamma", self.gamma)?;
        thermal("b", self.b)?;
        positive("edge_tolerance", self.edge_tolerance)?;
        positive("tolerance", self.tolerance)?;
        positive("rate_tolerance", self.rate_tolerance)?;
        positive("t_end", self.t_end)?;
        require(self.alpha_re.is_finite() && self.alpha_im.is_finite(), || "alpha must be finite".into())?;
        require(self.samples >= 2, || format!("samples = {}: need at least 2", self.samples))
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let n = self.dim;
        let rep = FockRep::new(n)?;
        let k = build_k(&rep, &MmeParams::new(self.omega0, self.gamma, self.b)?)?;
        let stat_tag = "thermal stationary state";

        match stationary_state(&k, Some(self.edge_tolerance)) {
            Ok(st) => {
                // geometric with mean occupation b - 1/2
                let occ = self.b - 0.5;
                let ratio = occ / (occ + 1.0);
                let weights: Vec<f64> = (0..n).map(|j| ratio.powi(j as i32)).collect();
                let norm: f64 = weights.iter().sum();
                let pops = st.state.populations();
                let mut t = Table::new("stationary.csv", &["level", "population", "expected"]);
                let mut worst = 0.0f64;
                for (j, (p, w)) in pops.iter().zip(&weights).enumerate() {
                    worst = worst.max((p - w / norm).abs());
                    t.push(vec![j as f64, *p, w / norm]);
                }
                out.tables.push(t);
                let mut coherence = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            coherence = coherence.max(st.state.matrix()[[i, j]].norm());
                        }
                    }
                }
                out.note("stationary_pivot_ratio", st.pivot_ratio);
                out.note("stationary_edge_weight", st.edge_weight);
                out.check(Check::below("stationary_populations", stat_tag, worst, self.tolerance));
                out.check(Check::below("stationary_coherence", stat_tag, coherence, self.tolerance));
            }
            Err(e) => {
                out.check(Check::failed("stationary_populations", stat_tag, self.tolerance, Relation::Below, e));
            }
        }

        attempt(&mut out, "zero_temperature_vacuum", stat_tag, self.tolerance, Relation::Below, || {
            let cold = build_k(&rep, &MmeParams::new(self.omega0, self.gamma, 0.5)?)?;
            let st = stationary_state(&cold, Some(self.edge_tolerance))?;
            Ok(frobenius(&(st.state.matrix() - DensityState::fock(n, 0)?.matrix())))
        });

        let rho0 = coherent_state(n, C64::new(self.alpha_re, self.alpha_im))?;
        let times: Vec<f64> = (0..self.samples).map(|j| self.t_end * j as f64 / (self.samples - 1) as f64).collect();
        let states = evolve(&k, &rho0, &times)?;
        let coh = expectation_series(&states, rep.a_dag())?;
        let number = expectation_series(&states, &rep.number())?;
        let expected = C64::new(-0.5 * self.gamma, self.omega0);
        attempt(
            &mut out,
            "coherence_decay_rate",
            "decay rate of the first coherence",
            self.rate_tolerance,
            Relation::Below,
            || Ok((extract_decay_rate(&times, &coh)? - expected).norm()),
        );
        let mut trace_drift = 0.0f64;
        for s in &states {
            trace_drift = trace_drift.max((s.trace() - 1.0).norm());
        }
        out.check(Check::below("trace_preservation", "trace preservation of the evolution", trace_drift, self.tolerance));
        let mut t = Table::new("evolve.csv", &["t", "re_coherence", "im_coherence", "mean_number"]);
        for ((t0, z), nn) in times.iter().zip(&coh).zip(&number) {
            t.push(vec![*t0, z.re, z.im, nn.re]);
        }
        out.tables.push(t);
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianParams {
    pub b_values: Vec<f64>,
    pub thetas: Vec<f64>,
    pub tolerance: f64,
    /// Range of `ħω₀β` for the velocity comparison.
    pub x_min: f64,
    pub x_max: f64,
    pub x_samples: usize,
    pub velocity_tolerance: f64,
}

impl Default for GaussianParams {
    fn default() -> Self {
        GaussianParams {
            b_values: vec![0.5, 1.0, 2.0, 5.0],
            thetas: vec![0.0, 0.3, std::f64::consts::LN_2, 1.1],
            tolerance: 1e-8,
            x_min: 1e-3,
            x_max: 10.0,
            x_samples: 401,
            velocity_tolerance: 1e-12,
        }
    }
}

impl Scenario for GaussianParams {
    const NAME: &'static str = "gaussian";
    const TAG: &'static str = "equilibrium Gaussian under the thermal map";

    fn validate(&self) -> Result<(), UsageError> {
        require(!self.b_values.is_empty(), || "b_values must not be empty".into())?;
        for &b in &self.b_values {
            thermal("b_values[]", b)?;
        }
        for &t in &self.thetas {
            require(t.is_finite() && t >= 0.0, || format!("thetas[] = {t}: must be finite and non-negative"))?;
        }
        positive("x_min", self.x_min)?;
        positive("x_max", self.x_max)?;
        require(self.x_min < self.x_max, || "x_min must be below x_max".into())?;
        require(self.x_samples >= 2, || "x_samples must be at least 2".into())?;
        positive("tolerance", self.tolerance)?;
        positive("velocity_tolerance", self.velocity_tolerance)
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let mut t = Table::new("dispersions.csv", &["b", "theta", "delta_q", "delta_r", "expected_q", "expected_r"]);
        let mut worst = 0.0f64;
        for &b in &self.b_values {
            let g = equilibrium_gaussian(b)?;
            let mq = section_moments(&g)?;
            worst = worst.max((mq.delta_q() - b.sqrt()).abs());
            worst = worst.max((mq.delta_r() - 1.0 / b.sqrt()).abs());
            for &theta in &self.thetas {
                let (dq, dr) = thermal_map_dispersions(&g, theta)?;
                let (eq, er) = (theta.exp() * b.sqrt(), (-theta).exp() / b.sqrt());
                worst = worst.max((dq - eq).abs()).max((dr - er).abs()).max((dq * dr - 1.0).abs());
                let target = section_moments(&equilibrium_gaussian(b * (2.0 * theta).exp())?)?;
                worst = worst.max((dq - target.delta_q()).abs()).max((dr - target.delta_r()).abs());
                t.push(vec![b, theta, dq, dr, eq, er]);
            }
        }
        out.tables.push(t);
        out.check(Check::below("gaussian_dispersions", Self::TAG, worst, self.tolerance));

        let mut vt = Table::new("velocity.csv", &["hbar_omega_beta", "from_theta", "from_b", "direct"]);
        let mut vworst = 0.0f64;
        let steps = (self.x_samples - 1) as f64;
        for j in 0..self.x_samples {
            let x = self.x_min * (self.x_max / self.x_min).powf(j as f64 / steps);
            let b = 0.5 / (0.5 * x).tanh();
            let v1 = velocity_from_theta(theta_from_zero_temperature(b)?);
            let v2 = velocity_from_b(b)?;
            let v3 = velocity_from_hbar_omega_beta(x)?;
            vworst = vworst.max((v1 - v2).abs()).max((v2 - v3).abs()).max((v1 - v3).abs());
            vt.push(vec![x, v1, v2, v3]);
        }
        out.tables.push(vt);
        out.check(Check::below(
            "velocity_agreement",
            "three forms of the velocity parameter agree",
            vworst,
            self.velocity_tolerance,
        ));
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvectionChoice {
    Central,
    Upwind,
    Hybrid,
}

impl From<AdvectionChoice> for Advection {
    fn from(a: AdvectionChoice) -> Self {
        match a {
            AdvectionChoice::Central => Advection::Central,
            AdvectionChoice::Upwind => Advection::Upwind,
            AdvectionChoice::Hybrid => Advection::Hybrid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FokkerPlanckParams {
    pub omega0: f64,
    pub gamma: f64,
    pub b: f64,
    pub q_half: f64,
    pub p_half: f64,
    pub nq: usize,
    pub np: usize,
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov: f64,
    pub advection: AdvectionChoice,
    /// Stretch applied in the scale-symmetry comparison.
    pub theta: f64,
    /// Evolution time of the scale-symmetry comparison.
    pub t_symmetry: f64,
    /// Time at which the steady variance is read off.
    pub t_steady: f64,
    /// Number of rows in the moment time series.
    pub samples: usize,
    pub tolerance: f64,
    pub mass_tolerance: f64,
    /// Also write the final field as `(Q, P, W)` rows.
    pub snapshot: bool,
}

impl Default for FokkerPlanckParams {
    fn default() -> Self {
        FokkerPlanckParams {
            omega0: 1.0,
            gamma: 0.2,
            b: 1.0,
            q_half: 8.0,
            p_half: 8.0,
            nq: 129,
            np: 129,
            mean_q: 1.5,
            mean_p: -0.5,
            var_q: 0.6,
            var_p: 0.9,
            cov: 0.1,
            advection: AdvectionChoice::Central,
            theta: 0.3,
            t_symmetry: 5.0,
            t_steady: 80.0,
            samples: 81,
            tolerance: 1e-3,
            mass_tolerance: 1e-10,
            snapshot: false,
        }
    }
}

impl Scenario for FokkerPlanckParams {
    const NAME: &'static str = "fokker-planck";
    const TAG: &'static str = "scale symmetry of the phase-space Fokker-Planck flow";

    fn validate(&self) -> Result<(), UsageError> {
        non_negative("omega0", self.omega0)?;
        non_negative("gamma", self.gamma)?;
        thermal("b", self.b)?;
        positive("q_half", self.q_half)?;
        positive("p_half", self.p_half)?;
        require(self.nq >= 3 && self.np >= 3, || "nq and np must be at least 3".into())?;
        positive("var_q", self.var_q)?;
        positive("var_p", self.var_p)?;
        require(self.cov * self.cov < self.var_q * self.var_p, || "covariance matrix must be positive definite".into())?;
        require(self.theta.is_finite(), || "theta must be finite".into())?;
        positive("t_symmetry", self.t_symmetry)?;
        positive("t_steady", self.t_steady)?;
        require(self.samples >= 2, || "samples must be at least 2".into())?;
        positive("tolerance", self.tolerance)?;
        positive("mass_tolerance", self.mass_tolerance)
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let params = FpParams::new(self.omega0, self.gamma, self.b)?;
        let advection = Advection::from(self.advection);
        let mut grid = FpGrid::new(self.q_half, self.p_half, self.nq, self.np)?;
        grid.set_gaussian((self.mean_q, self.mean_p), self.var_q, self.var_p, self.cov)?;
        let start = grid.moments();

        attempt(&mut out, "scale_symmetry_l2", Self::TAG, self.tolerance, Relation::Below, || {
            scale_symmetry_defect(params, &grid, self.theta, self.t_symmetry, advection)
        });

        let op = fp_build(params, &grid, advection)?;
        out.note("max_stable_dt", op.max_stable_dt());
        out.note("max_peclet", op.max_peclet());
        let times: Vec<f64> =
            (0..self.samples).map(|j| self.t_steady * j as f64 / (self.samples - 1) as f64).collect();
        let run = fp_run(&op, grid, &times, None)?;
        out.note("steps", run.steps);

        let mut t = Table::new("fokker_planck.csv", &["t", "mean_q", "mean_p", "q2", "p2", "mass"]);
        let mut flow_worst = 0.0f64;
        for s in &run.samples {
            let m = s.moments;
            t.push(vec![s.t, m.mean_q, m.mean_p, m.q2, m.p2, m.mass]);
            let exact = moment_flow(params, &start, s.t)?;
            for d in [m.mean_q - exact.mean_q, m.mean_p - exact.mean_p, m.q2 - exact.q2, m.p2 - exact.p2, m.qp - exact.qp] {
                flow_worst = flow_worst.max(d.abs());
            }
        }
        out.tables.push(t);

        let last = run.samples.last().expect("at least two samples").moments;
        let var_q = last.q2 - last.mean_q * last.mean_q;
        let var_p = last.p2 - last.mean_p * last.mean_p;
        let var_dev = (var_q - self.b).abs().max((var_p - self.b).abs());
        out.check(Check::below("steady_variance", "equilibrium variance of the Fokker-Planck flow", var_dev, self.tolerance));
        out.check(Check::below("moment_flow", "closed moment equations of the Fokker-Planck flow", flow_worst, self.tolerance));
        out.check(Check::below("mass_drift", "probability conservation", run.max_mass_drift, self.mass_tolerance));

        if self.snapshot {
            let mut g = Table::new("grid.csv", &["q", "p", "w"]);
            for (q, p, w) in run.grid.snapshot() {
                g.push(vec![q, p, w]);
            }
            out.tables.push(g);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpzBreakingParams {
    pub dim: usize,
    pub window: Option<usize>,
    pub omega0: f64,
    pub gamma2: f64,
    /// Fixed `Γ`; ignored when `ohmic_eta` is set.
    pub big_gamma: f64,
    /// Recompute `Γ` at each temperature from an Ohmic bath with this coupling.
    pub ohmic_eta: Option<f64>,
    pub ohmic_cutoff: f64,
    /// Damping of the Caldeira-Leggett control.
    pub gamma1: f64,
    pub b: f64,
    pub b_prime: f64,
    /// HPZ residual must exceed this.
    pub breaking_threshold: f64,
    /// Caldeira-Leggett residual must stay below this.
    pub tolerance: f64,
    /// Temperatures in units of `ħω₀/k_B` for the coth-ratio pairs; 0 is allowed.
    pub coth_pairs: Vec<[f64; 2]>,
}

impl Default for HpzBreakingParams {
    fn default() -> Self {
        HpzBreakingParams {
            dim: 24,
            window: None,
            omega0: 1.0,
            gamma2: 0.1,
            big_gamma: 0.02,
            ohmic_eta: None,
            ohmic_cutoff: 10.0,
            gamma1: 0.1,
            b: 1.0,
            b_prime: 2.0,
            breaking_threshold: 0.01,
            tolerance: 1e-6,
            coth_pairs: vec![[1.0, 1.0], [1.0, 2.0], [0.5, 3.0], [1.0, 0.0]],
        }
    }
}

/// `ħβ` in units where `ω₀` carries the energy scale; `T = 0` maps to infinity.
fn hbar_beta(t: f64, omega0: f64) -> f64 {
    if t == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (omega0 * t)
    }
}

fn coth_grid(omega0: f64, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let steps = (points - 1).max(1) as f64;
    (0..points).map(|k| omega0 * lo * (hi / lo).powf(k as f64 / steps)).collect()
}

impl Scenario for HpzBreakingParams {
    const NAME: &'static str = "hpz-breaking";
    const TAG: &'static str = "HPZ generator breaks the thermal symmetry";

    fn validate(&self) -> Result<(), UsageError> {
        dimension("dim", self.dim, 8)?;
        window_in("window", self.window.unwrap_or(self.dim / 2), self.dim)?;
        positive("omega0", self.omega0)?;
        non_negative("gamma2", self.gamma2)?;
        non_negative("gamma1", self.gamma1)?;
        require(self.big_gamma.is_finite(), || "big_gamma must be finite".into())?;
        if let Some(eta) = self.ohmic_eta {
            non_negative("ohmic_eta", eta)?;
            positive("ohmic_cutoff", self.ohmic_cutoff)?;
        }
        thermal("b", self.b)?;
        thermal("b_prime", self.b_prime)?;
        for pair in &self.coth_pairs {
            non_negative("coth_pairs[][0]", pair[0])?;
            non_negative("coth_pairs[][1]", pair[1])?;
        }
        positive("tolerance", self.tolerance)?;
        positive("breaking_threshold", self.breaking_threshold)
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let m = self.window.unwrap_or(RotationBudget::for_dim(self.dim).window);
        let rep = FockRep::new(self.dim)?;
        let source = match self.ohmic_eta {
            Some(eta) => GammaSource::Ohmic(OhmicBath::new(eta, self.ohmic_cutoff)?),
            None => GammaSource::Direct(self.big_gamma),
        };
        let hpz = HpzFamily {
            omega0: self.omega0,
            gamma2: self.gamma2,
            gamma_source: source,
        };
        let cl = ClFamily {
            omega0: self.omega0,
            gamma1: self.gamma1,
        };
        out.note("window", m);
        attempt(&mut out, "hpz_residual", Self::TAG, self.breaking_threshold, Relation::Above, || {
            Ok(symmetry_residual(&hpz, &rep, self.b, self.b_prime, m, None)?.relative)
        });
        attempt(
            &mut out,
            "cl_residual",
            "form invariance of the Caldeira-Leggett generator",
            self.tolerance,
            Relation::Below,
            || Ok(symmetry_residual(&cl, &rep, self.b, self.b_prime, m, None)?.relative),
        );
        let grid = coth_grid(self.omega0, 0.05, 20.0, 200);
        for pair in &self.coth_pairs {
            let (hb, hbp) = (hbar_beta(pair[0], self.omega0), hbar_beta(pair[1], self.omega0));
            let name = format!("coth_ratio_T{}_T{}", pair[0], pair[1]);
            let tag = "frequency dependence of the coth ratio";
            let r = coth_ratio_scan(hb, hbp, self.omega0, &grid);
            out.check(match (r, pair[0] == pair[1]) {
                (Ok(d), true) => Check::new(&name, tag, d, 0.0, Relation::Equal),
                (Ok(d), false) => Check::above(&name, tag, d, 0.0),
                (Err(e), same) => {
                    Check::failed(&name, tag, 0.0, if same { Relation::Equal } else { Relation::Above }, e)
                }
            });
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkertParams {
    pub dim: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3_re: f64,
    pub c3_im: f64,
    /// Coefficient fit window; every level when absent.
    pub window: Option<usize>,
    pub enforce_positivity: bool,
    pub nu_max: f64,
    pub tolerance: f64,
    pub sector_tolerance: f64,
}

impl Default for EkertParams {
    fn default() -> Self {
        let o = EkertOptions::default();
        EkertParams {
            dim: 16,
            c1: 0.3,
            c2: 0.1,
            c3_re: 0.02,
            c3_im: 0.0,
            window: o.window,
            enforce_positivity: o.enforce_positivity,
            nu_max: o.nu_max,
            tolerance: o.tolerance,
            sector_tolerance: 1e-12,
        }
    }
}

impl Scenario for EkertParams {
    const NAME: &'static str = "ekert";
    const TAG: &'static str = "reduction of the extended dissipator to Lindblad form";

    fn validate(&self) -> Result<(), UsageError> {
        dimension("dim", self.dim, 4)?;
        if let Some(w) = self.window {
            window_in("window", w, self.dim)?;
        }
        for (n, v) in [("c1", self.c1), ("c2", self.c2), ("c3_re", self.c3_re), ("c3_im", self.c3_im)] {
            require(v.is_finite(), || format!("{n} must be finite"))?;
        }
        positive("nu_max", self.nu_max)?;
        positive("tolerance", self.tolerance)?;
        positive("sector_tolerance", self.sector_tolerance)
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let rep = FockRep::new(self.dim)?;
        let opts = EkertOptions {
            window: self.window,
            enforce_positivity: self.enforce_positivity,
            nu_max: self.nu_max,
            tolerance: self.tolerance,
        };
        let red = match ekert_reduce(&rep, self.c1, self.c2, C64::new(self.c3_re, self.c3_im), opts) {
            Ok(r) => r,
            Err(e @ (Error::NotCompletelyPositive { .. } | Error::NoReduction { .. })) => {
                out.check(Check::failed("k3_coefficient", Self::TAG, self.tolerance, Relation::Below, e));
                return Ok(out);
            }
            Err(e) => return Err(e),
        };
        out.note("u", red.root.u);
        out.note("v_re", red.root.v.re);
        out.note("v_im", red.root.v.im);
        out.note("fit_residual", red.fit_residual);
        out.note("roots_found", red.roots.len());
        out.check(Check::below("k3_coefficient", Self::TAG, red.coefficients[2].norm(), self.tolerance));
        out.check(Check::below(
            "tilde_sector_defect",
            "transformed ladder stays in the untilded sector",
            red.sector_defect,
            self.sector_tolerance,
        ));
        let mut t = Table::new("roots.csv", &["u", "re_v", "im_v", "nu", "eta", "residual"]);
        for r in &red.roots {
            t.push(vec![r.u, r.v.re, r.v.im, r.nu, r.eta, r.residual]);
        }
        out.tables.push(t);
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CothScanParams {
    pub omega0: f64,
    /// Temperatures in units of `ħω₀/k_B`; 0 is allowed.
    pub t: f64,
    pub t_prime: f64,
    /// Frequency range in units of `ω₀`.
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for CothScanParams {
    fn default() -> Self {
        CothScanParams {
            omega0: 1.0,
            t: 1.0,
            t_prime: 1.0,
            omega_min: 0.05,
            omega_max: 20.0,
            points: 200,
        }
    }
}

impl Scenario for CothScanParams {
    const NAME: &'static str = "coth-scan";
    const TAG: &'static str = "frequency dependence of the coth ratio";

    fn validate(&self) -> Result<(), UsageError> {
        positive("omega0", self.omega0)?;
        non_negative("t", self.t)?;
        non_negative("t_prime", self.t_prime)?;
        positive("omega_min", self.omega_min)?;
        positive("omega_max", self.omega_max)?;
        require(self.omega_min < self.omega_max, || "omega_min must be below omega_max".into())?;
        require(self.points >= 2, || "points must be at least 2".into())
    }

    fn run(&self) -> thermosym::Result<Outcome> {
        let mut out = Outcome::default();
        let (hb, hbp) = (hbar_beta(self.t, self.omega0), hbar_beta(self.t_prime, self.omega0));
        let grid = coth_grid(self.omega0, self.omega_min, self.omega_max, self.points);
        let d = coth_ratio_scan(hb, hbp, self.omega0, &grid)?;
        let mut t = Table::new("coth.csv", &["omega", "ratio"]);
        for &w in &grid {
            t.push(vec![w, b_tilde(hbp * w) / b_tilde(hb * w)]);
        }
        out.tables.push(t);
        out.check(if self.t == self.t_prime {
            Check::new("coth_ratio_deviation", Self::TAG, d, 0.0, Relation::Equal)
        } else {
            Check::above("coth_ratio_deviation", Self::TAG, d, 0.0)
        });
        Ok(out)
    }
}
