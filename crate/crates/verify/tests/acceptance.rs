//! One check per acceptance criterion. Each prints a single PASS/FAIL line
//! with the measured value and the pinned tolerance, plus diagnostics when
//! it fails. Runs without the libtest harness so every line is printed; the
//! process fails when any criterion does.

use std::panic;
use std::process::ExitCode;

use thermosym::fock::{DensityState, FockRep, InteriorWindow};
use thermosym::linalg::{frobenius, C64};
use thermosym::phase_space::{
    equilibrium_gaussian, fp_build, fp_run, scale_symmetry_defect, section_moments, theta_from_zero_temperature,
    thermal_map_dispersions, velocity_from_b, velocity_from_hbar_omega_beta, velocity_from_theta, Advection, FpGrid,
    FpParams,
};
use thermosym::spectral::{
    degeneracy_across_b, eigen_spectrum, match_spectrum, spectrum_report, stationary_state, MATCH_TOLERANCE_FACTOR,
};
use thermosym::superops::{build_k, build_k0, ClFamily, GammaSource, HpzFamily, MmeParams, RwaFamily, ThermalFamily};
use thermosym::thermal::{
    bogoliubov_action_residual, coth_ratio_scan, ekert_reduce, generator_g, hyperbolic_r, mat4_distance, omega_check,
    rotated_commutators, rotation_u, su11_generators, symmetry_residual, symplectic_exp, symplectic_s,
    transform_superop, EkertOptions, RotationBudget,
};
use thermosym::Error;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("{} {:02} {}: {}", if pass { "PASS" } else { "FAIL" }, id, name, detail);
}

/// Largest window in `0..=max` whose value stays below `tol`.
fn largest_window(max: usize, tol: f64, f: impl Fn(usize) -> f64) -> Option<usize> {
    (0..=max).rev().find(|&m| f(m) < tol)
}

fn criterion_01_thermal_similarity() -> bool {
    let (n, m, tol) = (24, 12, 1e-6);
    let rep = FockRep::new(n).unwrap();
    let fam = RwaFamily { omega0: 1.0, gamma: 0.2 };
    let r = symmetry_residual(&fam, &rep, 0.5, 2.0, m, None).unwrap();
    let pass = r.relative < tol;
    let mut detail = format!("relative residual {:.3e} (tol {tol:.0e}), N={n} M={m} theta={:.6}", r.relative, r.theta);
    if !pass {
        let rot = rotation_u(&rep, r.theta, None).unwrap();
        let moved = transform_superop(&fam.build(&rep, 0.5).unwrap(), &rot).unwrap();
        let target = fam.build(&rep, 2.0).unwrap();
        let diff = (&moved - &target).into_matrix();
        let best = largest_window(m, tol, |w| {
            let win = InteriorWindow::new(n, w).unwrap();
            win.norm(&diff).unwrap() / win.norm(target.matrix()).unwrap()
        });
        detail += &format!("; largest passing window {best:?}");
    }
    report(1, "thermal similarity", pass, &detail);
    pass
}

fn criterion_02_exact_free_symmetry() -> bool {
    let (n, m) = (24, 12);
    let rep = FockRep::new(n).unwrap();
    let k0 = build_k0(&rep, 1.0).unwrap();
    let rot = rotation_u(&rep, 2f64.ln(), None).unwrap();
    let w = InteriorWindow::new(n, m).unwrap();
    let r = w.norm((&transform_superop(&k0, &rot).unwrap() - &k0).matrix()).unwrap();
    let tol = 1e-8 * k0.frobenius();
    let pass = r < tol;
    let detail = format!("window residual {r:.3e} (tol {tol:.3e}), N={n} M={m}");
    report(2, "exact free-part symmetry", pass, &detail);
    pass
}

fn criterion_03_spectrum_formula() -> bool {
    let (n, order, omega0, gamma) = (20, 8, 1.0, 0.2);
    let rep = FockRep::new(n).unwrap();
    let k = build_k(&rep, &MmeParams::new(omega0, gamma, 1.0).unwrap()).unwrap();
    let r = spectrum_report(&k, omega0, gamma, order).unwrap();
    let pass = r.passes();
    let mut detail = format!(
        "max |delta| {:.3e} (tol {:.1e}), {} of {} modes outside tolerance, N={n} m+n<={order}",
        r.max_delta(),
        r.tolerance,
        r.failures(),
        r.matches.len()
    );
    if !pass {
        let best = (0..=order).rev().find(|&o| match_spectrum(&r.computed, omega0, gamma, o, r.tolerance).passes());
        detail += &format!("; largest passing order {best:?}");
    }
    report(3, "spectrum formula", pass, &detail);
    pass
}

fn criterion_04_b_degeneracy() -> bool {
    let (n, order, omega0, gamma) = (20, 8, 1.0, 0.2);
    let rep = FockRep::new(n).unwrap();
    let fam = RwaFamily { omega0, gamma };
    let tol = MATCH_TOLERANCE_FACTOR * (omega0 + gamma);
    let d = degeneracy_across_b(&fam, &rep, &[0.5, 1.0, 3.0], omega0, gamma, order).unwrap();
    let pass = d.max_distance < tol;
    let mut detail = format!("max spectral distance {:.3e} (tol {tol:.1e}), N={n} m+n<={order}", d.max_distance);
    if !pass {
        let best = (0..order).rev().find(|&o| {
            degeneracy_across_b(&fam, &rep, &[0.5, 1.0, 3.0], omega0, gamma, o).unwrap().max_distance < tol
        });
        detail += &format!("; largest passing order {best:?}");
    }
    report(4, "b-degeneracy", pass, &detail);
    pass
}

fn criterion_05_bogoliubov_action() -> bool {
    let (n, theta, tol) = (24, 0.3, 1e-8);
    let m = RotationBudget::for_dim(n).window;
    let rep = FockRep::new(n).unwrap();
    let rot = rotation_u(&rep, theta, None).unwrap();
    let action = bogoliubov_action_residual(&rep, &rot, m).unwrap();
    let comm = rotated_commutators(&rep, &rot, m).unwrap().max_residual();
    let pass = action < tol && comm < tol;
    let mut detail = format!("action residual {action:.3e}, commutator residual {comm:.3e} (tol {tol:.0e}), N={n} M={m}");
    if !pass {
        let best_action = largest_window(m, tol, |w| bogoliubov_action_residual(&rep, &rot, w).unwrap());
        let best_comm = largest_window(m, tol, |w| rotated_commutators(&rep, &rot, w).unwrap().max_residual());
        detail += &format!("; largest passing window action {best_action:?}, commutators {best_comm:?}");
        if let Err(Error::TruncationAccuracy { suggested_dim, .. }) =
            rotation_u(&rep, theta, Some(RotationBudget::new(m, tol)))
        {
            detail += &format!("; dimension meeting the budget at M={m}: {suggested_dim:?}");
        }
    }
    report(5, "Bogoliubov action", pass, &detail);
    pass
}

fn criterion_06_su11_algebra() -> bool {
    let (n, tol) = (16, 1e-10);
    let m = n - 4;
    let rep = FockRep::new(n).unwrap();
    let alg = su11_generators(&rep).unwrap();
    let r = alg.commutator_residuals(m).unwrap();
    let g = generator_g(&rep).unwrap();
    let g_defect = (&g - &alg.m2.scaled(C64::new(2.0, 0.0))).frobenius();
    let worst = r.iter().copied().fold(0.0, f64::max);
    let pass = worst < tol && g_defect == 0.0;
    let detail = format!("commutator residuals {:.3e} {:.3e} {:.3e} (tol {tol:.0e}), |G - 2M2| = {g_defect:.1e}, N={n} M={m}", r[0], r[1], r[2]);
    report(6, "SU(1,1) algebra", pass, &detail);
    pass
}

fn criterion_07_symplectic_preservation() -> bool {
    let tol = 1e-14;
    let mut worst_form = 0.0f64;
    let mut worst_block = 0.0f64;
    for &t in &[0.1, 0.7, 1.2] {
        let s = symplectic_s(t);
        worst_form = worst_form.max(omega_check(&s));
        let r = hyperbolic_r(t);
        let r_inv = hyperbolic_r(-t);
        let mut expect = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                expect[i][j] = r[i][j];
                expect[i + 2][j + 2] = r_inv[i][j];
            }
        }
        worst_block = worst_block.max(mat4_distance(&s, &expect));
        // R(-θ) really is the inverse.
        let prod = [
            [r[0][0] * r_inv[0][0] + r[0][1] * r_inv[1][0], r[0][0] * r_inv[0][1] + r[0][1] * r_inv[1][1]],
            [r[1][0] * r_inv[0][0] + r[1][1] * r_inv[1][0], r[1][0] * r_inv[0][1] + r[1][1] * r_inv[1][1]],
        ];
        worst_block = worst_block.max((prod[0][0] - 1.0).abs() + prod[0][1].abs() + prod[1][0].abs() + (prod[1][1] - 1.0).abs());
        let via_exp = mat4_distance(&symplectic_exp(t).unwrap(), &s);
        worst_block = worst_block.max(via_exp / t.cosh());
    }
    let pass = worst_form < tol && worst_block < tol;
    let detail = format!("form defect {worst_form:.3e}, block-structure defect {worst_block:.3e} (tol {tol:.0e})");
    report(7, "symplectic preservation", pass, &detail);
    pass
}

fn criterion_08_gaussian_dispersions() -> bool {
    let tol = 1e-8;
    let mut worst = 0.0f64;
    for &b in &[0.5, 1.0, 2.0, 5.0] {
        let g = equilibrium_gaussian(b).unwrap();
        let mq = section_moments(&g).unwrap();
        worst = worst.max((mq.delta_q() - b.sqrt()).abs());
        worst = worst.max((mq.delta_r() - 1.0 / b.sqrt()).abs());
        for &theta in &[0.0, 0.3, 2f64.ln(), 1.1] {
            let (dq, dr) = thermal_map_dispersions(&g, theta).unwrap();
            worst = worst.max((dq - theta.exp() * b.sqrt()).abs());
            worst = worst.max((dr - (-theta).exp() / b.sqrt()).abs());
            worst = worst.max((dq * dr - 1.0).abs());
            let target = section_moments(&equilibrium_gaussian(b * (2.0 * theta).exp()).unwrap()).unwrap();
            worst = worst.max((dq - target.delta_q()).abs());
            worst = worst.max((dr - target.delta_r()).abs());
        }
    }
    let pass = worst < tol;
    let detail = format!("largest dispersion deviation {worst:.3e} (tol {tol:.0e})");
    report(8, "Gaussian dispersions", pass, &detail);
    pass
}

fn criterion_09_velocity_parameter() -> bool {
    let tol = 1e-12;
    let mut worst = 0.0f64;
    let samples = 400;
    for k in 0..=samples {
        let x = 1e-3 * (1e4f64).powf(k as f64 / samples as f64);
        let b = 0.5 / (0.5 * x).tanh();
        let v1 = velocity_from_theta(theta_from_zero_temperature(b).unwrap());
        let v2 = velocity_from_b(b).unwrap();
        let v3 = velocity_from_hbar_omega_beta(x).unwrap();
        worst = worst.max((v1 - v2).abs()).max((v2 - v3).abs()).max((v1 - v3).abs());
    }
    let pass = worst < tol;
    let detail = format!("largest disagreement {worst:.3e} over hbar*omega0*beta in [1e-3, 10] (tol {tol:.0e})");
    report(9, "velocity parameter", pass, &detail);
    pass
}

fn criterion_10_hpz_breaking() -> bool {
    let n = 24;
    let m = RotationBudget::for_dim(n).window;
    let (omega0, gamma2, b, b_prime) = (1.0, 0.1, 1.0, 2.0);
    let rep = FockRep::new(n).unwrap();
    let hpz = HpzFamily {
        omega0,
        gamma2,
        gamma_source: GammaSource::Direct(0.2 * gamma2),
    };
    let cl = ClFamily { omega0, gamma1: gamma2 };
    let h = symmetry_residual(&hpz, &rep, b, b_prime, m, None).unwrap();
    let c = symmetry_residual(&cl, &rep, b, b_prime, m, None).unwrap();
    let grid: Vec<f64> = (0..200).map(|k| 0.05 * (400f64).powf(k as f64 / 199.0)).collect();
    let same = coth_ratio_scan(1.0, 1.0, omega0, &grid).unwrap();
    let differ = [
        coth_ratio_scan(1.0, 0.5, omega0, &grid).unwrap(),
        coth_ratio_scan(2.0, 0.3, omega0, &grid).unwrap(),
        coth_ratio_scan(1.0, f64::INFINITY, omega0, &grid).unwrap(),
    ];
    let pass = h.relative > 0.01 && c.relative < 1e-6 && same == 0.0 && differ.iter().all(|&d| d > 0.0);
    let mut detail = format!(
        "HPZ residual {:.3e} (> 1e-2), CL residual {:.3e} (< 1e-6), coth deviation same T {same:.1e}, different T min {:.3e}, N={n} M={m}",
        h.relative,
        c.relative,
        differ.iter().copied().fold(f64::INFINITY, f64::min)
    );
    if !pass {
        let small = 6;
        let h6 = symmetry_residual(&hpz, &rep, b, b_prime, small, None).unwrap();
        let c6 = symmetry_residual(&cl, &rep, b, b_prime, small, None).unwrap();
        detail += &format!("; at M={small}: HPZ {:.3e}, CL {:.3e}", h6.relative, c6.relative);
    }
    report(10, "HPZ symmetry breaking", pass, &detail);
    pass
}

fn criterion_11_cl_form_invariance() -> bool {
    let (n, tol) = (24, 1e-6);
    let m = RotationBudget::for_dim(n).window;
    let rep = FockRep::new(n).unwrap();
    let cl = ClFamily { omega0: 1.0, gamma1: 0.1 };
    let (b, b_prime) = (1.0, 2.0);
    let r = symmetry_residual(&cl, &rep, b, b_prime, m, None).unwrap();
    let pass = r.relative < tol;
    let mut detail = format!("relative residual {:.3e} (tol {tol:.0e}), b_cl {b} -> {b_prime}, N={n} M={m}", r.relative);
    if !pass {
        let best = largest_window(m, tol, |w| symmetry_residual(&cl, &rep, b, b_prime, w, None).unwrap().relative);
        detail += &format!("; largest passing window {best:?}");
    }
    report(11, "CL form invariance", pass, &detail);
    pass
}

fn criterion_12_stationary_state() -> bool {
    let (n, tol) = (30, 1e-8);
    let rep = FockRep::new(n).unwrap();
    let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 1.0).unwrap()).unwrap();
    let st = stationary_state(&k, Some(1e-6)).unwrap();
    // geometric distribution with mean occupation b - 1/2 = 1/2
    let ratio: f64 = 1.0 / 3.0;
    let pops = st.state.populations();
    let mut worst = 0.0f64;
    let norm: f64 = (0..n).map(|k| ratio.powi(k as i32)).sum();
    for (k, p) in pops.iter().enumerate() {
        worst = worst.max((p - ratio.powi(k as i32) / norm).abs());
    }
    let mut offdiag = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                offdiag = offdiag.max(st.state.matrix()[[i, j]].norm());
            }
        }
    }
    let k_cold = build_k(&rep, &MmeParams::new(1.0, 0.2, 0.5).unwrap()).unwrap();
    let cold = stationary_state(&k_cold, Some(1e-6)).unwrap();
    let vacuum = DensityState::fock(n, 0).unwrap();
    let vac_defect = frobenius(&(cold.state.matrix() - vacuum.matrix()));
    let pass = worst < tol && offdiag < tol && vac_defect < tol;
    let detail = format!(
        "population deviation {worst:.3e}, coherence {offdiag:.1e}, vacuum defect {vac_defect:.1e} (tol {tol:.0e}), N={n}"
    );
    report(12, "stationary state", pass, &detail);
    pass
}

fn criterion_13_fokker_planck_scale_symmetry() -> bool {
    let tol = 1e-3;
    let params = FpParams::new(1.0, 0.2, 1.0).unwrap();
    let mut grid = FpGrid::new(8.0, 8.0, 129, 129).unwrap();
    grid.set_gaussian((1.5, -0.5), 0.6, 0.9, 0.1).unwrap();
    let l2 = scale_symmetry_defect(params, &grid, 0.3, 5.0, Advection::Central).unwrap();
    let op = fp_build(params, &grid, Advection::Central).unwrap();
    let run = fp_run(&op, grid, &[80.0], None).unwrap();
    let s = run.samples[0].moments;
    let var_q = s.q2 - s.mean_q * s.mean_q;
    let var_p = s.p2 - s.mean_p * s.mean_p;
    let var_dev = (var_q - params.b).abs().max((var_p - params.b).abs());
    let pass = l2 < tol && var_dev < tol;
    let detail = format!(
        "rescaled-evolution L2 difference {l2:.3e}, steady variance deviation {var_dev:.3e} (tol {tol:.0e}), mass drift {:.1e}, 129x129",
        run.max_mass_drift
    );
    report(13, "Fokker-Planck scale symmetry", pass, &detail);
    pass
}

fn criterion_14_ekert_reduction() -> bool {
    let n = 16;
    let rep = FockRep::new(n).unwrap();
    let red = ekert_reduce(&rep, 0.3, 0.1, C64::new(0.02, 0.0), EkertOptions::default()).unwrap();
    let k3 = red.coefficients[2].norm();
    let pass = k3 < 1e-10 && red.sector_defect < 1e-12;
    let detail = format!(
        "K3 coefficient {k3:.3e} (tol 1e-10), tilde-sector defect {:.1e} (tol 1e-12), u={:.12} v={:.12}, roots found {}",
        red.sector_defect,
        red.root.u,
        red.root.v,
        red.roots.len()
    );
    report(14, "Ekert reduction", pass, &detail);
    pass
}

fn criterion_15_negative_controls() -> bool {
    let rep = FockRep::new(20).unwrap();
    let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 0.5).unwrap()).unwrap();
    let computed = eigen_spectrum(&k).unwrap();
    let tol = MATCH_TOLERANCE_FACTOR * 1.2;
    let honest = match_spectrum(&computed, 1.0, 0.2, 8, tol);
    let corrupted = match_spectrum(&computed, 1.05, 0.2, 8, tol);
    let n = 24;
    let rep = FockRep::new(n).unwrap();
    let over_budget = rotation_u(&rep, 1.5, Some(RotationBudget::for_dim(n)));
    let raised = matches!(over_budget, Err(Error::TruncationAccuracy { .. }));
    let pass = honest.passes() && !corrupted.passes() && raised;
    let detail = format!(
        "honest spectrum passes: {}, corrupted spectrum flagged {} modes, over-budget rotation raised truncation error: {raised}",
        honest.passes(),
        corrupted.failures()
    );
    report(15, "negative controls", pass, &detail);
    pass
}

type Criterion = (&'static str, fn() -> bool);

fn main() -> ExitCode {
    let criteria: [Criterion; 15] = [
        ("criterion_01_thermal_similarity", criterion_01_thermal_similarity),
        ("criterion_02_exact_free_symmetry", criterion_02_exact_free_symmetry),
        ("criterion_03_spectrum_formula", criterion_03_spectrum_formula),
        ("criterion_04_b_degeneracy", criterion_04_b_degeneracy),
        ("criterion_05_bogoliubov_action", criterion_05_bogoliubov_action),
        ("criterion_06_su11_algebra", criterion_06_su11_algebra),
        ("criterion_07_symplectic_preservation", criterion_07_symplectic_preservation),
        ("criterion_08_gaussian_dispersions", criterion_08_gaussian_dispersions),
        ("criterion_09_velocity_parameter", criterion_09_velocity_parameter),
        ("criterion_10_hpz_breaking", criterion_10_hpz_breaking),
        ("criterion_11_cl_form_invariance", criterion_11_cl_form_invariance),
        ("criterion_12_stationary_state", criterion_12_stationary_state),
        ("criterion_13_fokker_planck_scale_symmetry", criterion_13_fokker_planck_scale_symmetry),
        ("criterion_14_ekert_reduction", criterion_14_ekert_reduction),
        ("criterion_15_negative_controls", criterion_15_negative_controls),
    ];
    // unexpected panics are reported on stdout below
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        match panic::catch_unwind(f) {
            Ok(true) => {}
            Ok(false) => failed += 1,
            Err(payload) => {
                failed += 1;
                let msg = payload
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| payload.downcast_ref::<&str>().copied())
                    .unwrap_or("");
                println!("FAIL {name}: aborted: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
