//! Eigenvalues of `iK`, matching against the damped-oscillator mode
//! formula, stationary states and time evolution.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::fock::{vec_index, DensityState, SuperOp};
use crate::linalg::{self, c, CMatrix, CVector, Lu, C64, I};
use crate::superops::ThermalFamily;
use crate::{Error, FockRep, Result};

/// Default matching tolerance is this factor times `ω₀ + γ`.
pub const MATCH_TOLERANCE_FACTOR: f64 = 1e-6;

/// Mode `(m, n)` with `m ≥ n`; `sign` is `+1` or `-1` and is `+1` when `n = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub m: usize,
    pub n: usize,
    pub sign: i8,
}

/// `z = ±nω₀ - i(m - n/2)γ`.
pub fn predicted_zmn(m: usize, n: usize, sign: i8, omega0: f64, gamma: f64) -> Result<C64> {
    if m < n {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            reason: "mode index m must be at least n",
        });
    }
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidParameter {
            name: "sign",
            value: sign as f64,
            reason: "sign must be +1 or -1",
        });
    }
    let re = sign as f64 * n as f64 * omega0;
    let im = -(m as f64 - 0.5 * n as f64) * gamma;
    Ok(C64::new(re, im))
}

/// Every mode with `m + n ≤ order`, each listed once. For `n = 0` the two
/// signs coincide and only `+` is kept.
pub fn predicted_modes(omega0: f64, gamma: f64, order: usize) -> Vec<(ModeLabel, C64)> {
    let mut out = Vec::new();
    for n in 0..=order / 2 {
        for m in n..=order - n {
            let signs: &[i8] = if n == 0 { &[1] } else { &[1, -1] };
            for &sign in signs {
                let z = C64::new(sign as f64 * n as f64 * omega0, -(m as f64 - 0.5 * n as f64) * gamma);
                out.push((ModeLabel { m, n, sign }, z));
            }
        }
    }
    out
}

/// Full eigenvalue multiset of `iK`.
pub fn eigen_spectrum(k: &SuperOp) -> Result<Vec<C64>> {
    linalg::eigenvalues(&k.matrix().mapv(|z| z * I))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedMode {
    pub label: ModeLabel,
    pub predicted: C64,
    /// `None` only when the computed list is shorter than the prediction list.
    pub computed: Option<C64>,
    pub delta: f64,
}

impl MatchedMode {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.computed.is_some() && self.delta <= tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub computed: Vec<C64>,
    pub matches: Vec<MatchedMode>,
    /// Largest `m + n` in the trusted window.
    pub order: usize,
    pub tolerance: f64,
    /// Predictions whose nearest computed value was taken by another prediction.
    pub collisions: usize,
}

impl SpectrumReport {
    pub fn failures(&self) -> usize {
        self.matches.iter().filter(|m| !m.passes(self.tolerance)).count()
    }

    pub fn passes(&self) -> bool {
        self.failures() == 0
    }

    pub fn max_delta(&self) -> f64 {
        self.matches.iter().map(|m| if m.computed.is_some() { m.delta } else { f64::INFINITY }).fold(0.0, f64::max)
    }

    /// Computed eigenvalues assigned to the trusted window, in prediction order.
    pub fn trusted(&self) -> Vec<C64> {
        self.matches.iter().filter_map(|m| m.computed).collect()
    }
}

/// Default trusted order `N/2 - 2`.
pub fn default_order(dim: usize) -> usize {
    (dim / 2).saturating_sub(2)
}

/// Greedy nearest-neighbour matching of the predicted modes up to `order`
/// (built with the given `ω₀`, `γ`) against `computed`. Pairs are taken in
/// order of increasing distance, each eigenvalue used at most once.
pub fn match_spectrum(computed: &[C64], omega0: f64, gamma: f64, order: usize, tolerance: f64) -> SpectrumReport {
    let predicted = predicted_modes(omega0, gamma, order);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(predicted.len() * computed.len());
    let mut nearest = alloc::vec![usize::MAX; predicted.len()];
    for (pi, (_, z)) in predicted.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (ci, w) in computed.iter().enumerate() {
            let d = (z - w).norm();
            pairs.push((d, pi, ci));
            if d < best {
                best = d;
                nearest[pi] = ci;
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned: Vec<Option<(usize, f64)>> = alloc::vec![None; predicted.len()];
    let mut used = alloc::vec![false; computed.len()];
    let mut left = predicted.len().min(computed.len());
    for (d, pi, ci) in pairs {
        if left == 0 {
            break;
        }
        if assigned[pi].is_none() && !used[ci] {
            assigned[pi] = Some((ci, d));
            used[ci] = true;
            left -= 1;
        }
    }
    let mut collisions = 0;
    let matches = predicted
        .iter()
        .zip(assigned.iter())
        .enumerate()
        .map(|(pi, ((label, z), a))| {
            if let Some((ci, _)) = a {
                if *ci != nearest[pi] {
                    collisions += 1;
                }
            }
            MatchedMode {
                label: *label,
                predicted: *z,
                computed: a.map(|(ci, _)| computed[ci]),
                delta: a.map_or(f64::INFINITY, |(_, d)| d),
            }
        })
        .collect();
    SpectrumReport {
        computed: computed.to_vec(),
        matches,
        order,
        tolerance,
        collisions,
    }
}

/// Eigensolve plus matching with the default tolerance `1e-6(ω₀ + γ)`.
pub fn spectrum_report(k: &SuperOp, omega0: f64, gamma: f64, order: usize) -> Result<SpectrumReport> {
    let computed = eigen_spectrum(k)?;
    Ok(match_spectrum(&computed, omega0, gamma, order, MATCH_TOLERANCE_FACTOR * (omega0 + gamma)))
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let one_way = |x: &[C64], y: &[C64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    one_way(a, b).max(one_way(b, a))
}

/// Largest distance from a computed eigenvalue to the nearest `-z*`; zero
/// for a generator that preserves Hermiticity.
pub fn reflection_defect(computed: &[C64]) -> f64 {
    let mirrored: Vec<C64> = computed.iter().map(|z| -z.conj()).collect();
    hausdorff(computed, &mirrored)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    /// Parameter values swept.
    pub values: Vec<f64>,
    /// Trusted-window spectrum at each value.
    pub spectra: Vec<Vec<C64>>,
    /// Largest pairwise Hausdorff distance between the trusted spectra.
    pub max_distance: f64,
}

/// Trusted-window spectra of `build(value)` for each value, and the largest
/// pairwise distance between them. The window is anchored on the predicted
/// modes for `ω₀`, `γ` up to `order`.
pub fn degeneracy_across<F>(build: F, values: &[f64], omega0: f64, gamma: f64, order: usize) -> Result<DegeneracyReport>
where
    F: Fn(f64) -> Result<SuperOp>,
{
    let mut spectra = Vec::with_capacity(values.len());
    for &v in values {
        let k = build(v)?;
        let r = spectrum_report(&k, omega0, gamma, order)?;
        spectra.push(r.trusted());
    }
    let mut max_distance = 0.0f64;
    for i in 0..spectra.len() {
        for j in i + 1..spectra.len() {
            max_distance = max_distance.max(hausdorff(&spectra[i], &spectra[j]));
        }
    }
    Ok(DegeneracyReport {
        values: values.to_vec(),
        spectra,
        max_distance,
    })
}

/// [`degeneracy_across`] over thermal parameters of a family.
pub fn degeneracy_across_b(
    family: &dyn ThermalFamily,
    rep: &FockRep,
    b_list: &[f64],
    omega0: f64,
    gamma: f64,
    order: usize,
) -> Result<DegeneracyReport> {
    for &b in b_list {
        if !(b >= 0.5) || !b.is_finite() {
            return Err(Error::InvalidParameter {
                name: "b",
                value: b,
                reason: "thermal parameter must be finite and at least 1/2",
            });
        }
    }
    degeneracy_across(|b| family.build(rep, b), b_list, omega0, gamma, order)
}

/// Distance between the trusted spectra at `N` and `N + 8`; small when the
/// window is free of truncation effects.
pub fn refinement_distance(family: &dyn ThermalFamily, dim: usize, b: f64, omega0: f64, gamma: f64, order: usize) -> Result<f64> {
    let coarse = spectrum_report(&family.build(&FockRep::new(dim)?, b)?, omega0, gamma, order)?;
    let fine = spectrum_report(&family.build(&FockRep::new(dim + 8)?, b)?, omega0, gamma, order)?;
    Ok(hausdorff(&coarse.trusted(), &fine.trusted()))
}

/// Normalized null vector of `K`.
#[derive(Debug, Clone)]
pub struct StationaryState {
    pub state: DensityState,
    /// Smallest over largest pivot of the bordered solve.
    pub pivot_ratio: f64,
    /// Population on the top two Fock levels.
    pub edge_weight: f64,
    /// `‖K vec(ρ)‖`.
    pub residual: f64,
}

/// Pivot ratio below which the zero mode is treated as degenerate.
pub const AMBIGUITY_PIVOT_RATIO: f64 = 1e-12;

/// Solves `Kρ = 0, Tr ρ = 1` with a bordered system on the decoupled blocks
/// that touch the diagonal. With `edge_tolerance`, a state whose top two
/// levels carry more weight than that is rejected as a truncation artefact.
pub fn stationary_state(k: &SuperOp, edge_tolerance: Option<f64>) -> Result<StationaryState> {
    let n = k.dim();
    let km = k.matrix();
    let diag: Vec<usize> = (0..n).map(|i| vec_index(n, i, i)).collect();
    let mut idx: Vec<usize> = Vec::new();
    for block in linalg::decoupled_blocks(km) {
        if block.iter().any(|i| diag.contains(i)) {
            idx.extend(block);
        }
    }
    idx.sort_unstable();
    let s = idx.len();
    let mut bordered = CMatrix::zeros((s + 1, s + 1));
    for (bi, &i) in idx.iter().enumerate() {
        for (bj, &j) in idx.iter().enumerate() {
            bordered[[bi, bj]] = km[[i, j]];
        }
        if diag.contains(&i) {
            bordered[[s, bi]] = c(1.0);
            bordered[[bi, s]] = c(1.0);
        }
    }
    let lu = match Lu::new(&bordered) {
        Ok(lu) => lu,
        Err(Error::Singular { .. }) => return Err(Error::AmbiguousStationaryState { pivot_ratio: 0.0 }),
        Err(e) => return Err(e),
    };
    let pivot_ratio = lu.pivot_ratio();
    if pivot_ratio < AMBIGUITY_PIVOT_RATIO {
        return Err(Error::AmbiguousStationaryState { pivot_ratio });
    }
    let mut rhs = CVector::zeros(s + 1);
    rhs[s] = c(1.0);
    let sol = lu.solve_vec(&rhs)?;
    let mut v = CVector::zeros(n * n);
    for (bi, &i) in idx.iter().enumerate() {
        v[i] = sol[bi];
    }
    let residual = k.matrix().dot(&v).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let raw = DensityState::from_vector(&v)?;
    // Symmetrize away round-off so the state is exactly Hermitian.
    let m = raw.matrix();
    let herm = (m + &linalg::dagger(m)).mapv(|z| z * 0.5);
    let state = DensityState::from_matrix(herm)?.normalized()?;
    let edge_weight = state.edge_weight(2);
    if let Some(tol) = edge_tolerance {
        if edge_weight > tol {
            return Err(Error::UnsupportedState {
                reason: "stationary state reaches the truncation edge",
                defect: edge_weight,
            });
        }
    }
    Ok(StationaryState {
        state,
        pivot_ratio,
        edge_weight,
        residual,
    })
}

/// `exp(K t) ρ₀` at each time of an increasing grid (times measured from 0).
/// Propagators are reused for repeated increments.
pub fn evolve(k: &SuperOp, rho0: &DensityState, times: &[f64]) -> Result<Vec<DensityState>> {
    let n = k.dim();
    if rho0.dim() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            found: (rho0.dim(), rho0.dim()),
        });
    }
    let mut cache: Vec<(f64, CMatrix)> = Vec::new();
    let mut out = Vec::with_capacity(times.len());
    let mut v = rho0.vector();
    let mut t_prev = 0.0;
    for &t in times {
        if !t.is_finite() || t < t_prev {
            return Err(Error::InvalidParameter {
                name: "times",
                value: t,
                reason: "time grid must be finite, non-negative and non-decreasing",
            });
        }
        let dt = t - t_prev;
        if dt > 0.0 {
            let hit = cache.iter().position(|(h, _)| (h - dt).abs() <= 1e-13 * dt.max(1.0));
            let slot = match hit {
                Some(i) => i,
                None => {
                    let e = linalg::expm_blocks(&k.matrix().mapv(|z| z * dt))?;
                    cache.push((dt, e));
                    cache.len() - 1
                }
            };
            v = cache[slot].1.dot(&v);
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { routine: "evolve" });
            }
        }
        out.push(DensityState::from_vector(&v)?);
        t_prev = t;
    }
    Ok(out)
}

/// `Tr(ρ(t) O)` along a trajectory.
pub fn expectation_series(states: &[DensityState], op: &CMatrix) -> Result<Vec<C64>> {
    states.iter().map(|s| s.expectation(op)).collect()
}

/// Least-squares rate `λ` in `s(t) ≈ s₀ e^{λt}`: the real part from
/// `ln|s|`, the imaginary part from the unwrapped phase.
pub fn extract_decay_rate(times: &[f64], series: &[C64]) -> Result<C64> {
    if times.len() != series.len() {
        return Err(Error::ShapeMismatch {
            expected: (times.len(), 1),
            found: (series.len(), 1),
        });
    }
    if times.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "series",
            value: times.len() as f64,
            reason: "need at least two samples",
        });
    }
    let mut logs = Vec::with_capacity(series.len());
    let mut phases = Vec::with_capacity(series.len());
    let mut last = 0.0;
    for (i, s) in series.iter().enumerate() {
        let r = s.norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::NonFinite {
                routine: "extract_decay_rate",
            });
        }
        logs.push(r.ln());
        let mut ph = s.arg();
        if i > 0 {
            let tau = 2.0 * core::f64::consts::PI;
            ph += tau * ((last - ph) / tau).round();
        }
        phases.push(ph);
        last = ph;
    }
    Ok(C64::new(slope(times, &logs), slope(times, &phases)))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Coherent state `|α⟩` on the truncated space, renormalized.
pub fn coherent_state(dim: usize, alpha: C64) -> Result<DensityState> {
    let mut psi = CVector::zeros(dim);
    let mut amp = c((-0.5 * alpha.norm_sqr()).exp());
    for k in 0..dim {
        psi[k] = amp;
        amp = amp * alpha / ((k + 1) as f64).sqrt();
    }
    DensityState::pure(&psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superops::{build_k, build_k0, HpzFamily, MmeParams, RwaFamily, GammaSource};
    use crate::thermal::{rotation_u, transform_superop};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn formula_examples() {
        assert_eq!(predicted_zmn(0, 0, 1, 1.0, 0.2).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(predicted_zmn(1, 0, 1, 1.0, 0.2).unwrap(), C64::new(0.0, -0.2));
        let z = predicted_zmn(1, 1, 1, 1.0, 0.2).unwrap();
        assert_abs_diff_eq!(z.re, 1.0);
        assert_abs_diff_eq!(z.im, -0.1, epsilon = 1e-16);
        assert!(predicted_zmn(0, 1, 1, 1.0, 0.2).is_err());
    }

    #[test]
    fn mode_count() {
        // m + n ≤ 8, m ≥ n: 9 real-axis modes plus both signs of 7 + 5 + 3 + 1
        assert_eq!(predicted_modes(1.0, 0.2, 8).len(), 9 + 2 * 16);
    }

    #[test]
    fn closed_spectrum_is_integer_frequencies() {
        let rep = FockRep::new(3).unwrap();
        let k0 = build_k0(&rep, 1.0).unwrap();
        let mut ev: Vec<f64> = eigen_spectrum(&k0).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        let expect = [-2.0, -1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0];
        for (a, b) in ev.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_temperature_spectrum_is_exact() {
        let rep = FockRep::new(20).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 0.5).unwrap()).unwrap();
        let r = spectrum_report(&k, 1.0, 0.2, 8).unwrap();
        assert!(r.passes(), "max delta {}", r.max_delta());
        assert!(r.computed.iter().all(|z| z.im <= 1e-10));
        assert!(reflection_defect(&r.computed) < 1e-9);
    }

    #[test]
    fn low_modes_match_at_finite_temperature() {
        let rep = FockRep::new(20).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 1.0).unwrap()).unwrap();
        assert!(spectrum_report(&k, 1.0, 0.2, 1).unwrap().passes());
        // Higher modes feel the truncation and converge under refinement.
        let coarse = spectrum_report(&k, 1.0, 0.2, 3).unwrap().max_delta();
        let rep = FockRep::new(28).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 1.0).unwrap()).unwrap();
        let fine = spectrum_report(&k, 1.0, 0.2, 3).unwrap().max_delta();
        assert!(fine < 1e-2 * coarse, "{coarse} {fine}");
    }

    #[test]
    fn corrupted_prediction_is_flagged() {
        let rep = FockRep::new(12).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 0.5).unwrap()).unwrap();
        let computed = eigen_spectrum(&k).unwrap();
        let r = match_spectrum(&computed, 1.05, 0.2, 4, 1.2e-6);
        assert!(!r.passes());
        assert!(r.failures() > 0);
    }

    #[test]
    fn gamma_zero_matches_tightly() {
        let rep = FockRep::new(10).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.0, 1.5).unwrap()).unwrap();
        let r = match_spectrum(&eigen_spectrum(&k).unwrap(), 1.0, 0.0, 3, 1e-10);
        assert!(r.passes(), "{}", r.max_delta());
    }

    #[test]
    fn degeneracy_singleton_is_zero() {
        let rep = FockRep::new(8).unwrap();
        let fam = RwaFamily { omega0: 1.0, gamma: 0.2 };
        let d = degeneracy_across_b(&fam, &rep, &[1.0], 1.0, 0.2, 2).unwrap();
        assert_eq!(d.max_distance, 0.0);
    }

    #[test]
    fn gamma_sweep_breaks_degeneracy() {
        let rep = FockRep::new(12).unwrap();
        let d = degeneracy_across(
            |g| {
                HpzFamily {
                    omega0: 1.0,
                    gamma2: 0.2,
                    gamma_source: GammaSource::Direct(g),
                }
                .build(&rep, 1.0)
            },
            &[0.0, 0.1],
            1.0,
            0.2,
            2,
        )
        .unwrap();
        assert!(d.max_distance > 1e-3, "{}", d.max_distance);
    }

    #[test]
    fn stationary_state_is_geometric() {
        let n = 30;
        let rep = FockRep::new(n).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 1.0).unwrap()).unwrap();
        let st = stationary_state(&k, Some(1e-6)).unwrap();
        let pops = st.state.populations();
        let oracle = DensityState::thermal(n, 1.0).unwrap().populations();
        for (p, q) in pops.iter().zip(oracle.iter()) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(pops[1] / pops[0], 1.0 / 3.0, epsilon = 1e-10);
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 0.5).unwrap()).unwrap();
        let st = stationary_state(&k, Some(1e-6)).unwrap();
        assert_abs_diff_eq!(st.state.populations()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_dynamics_is_ambiguous() {
        let rep = FockRep::new(5).unwrap();
        let k0 = build_k0(&rep, 1.0).unwrap();
        assert!(matches!(stationary_state(&k0, None), Err(Error::AmbiguousStationaryState { .. })));
    }

    #[test]
    fn stationary_state_follows_rotation() {
        let n = 12;
        let rep = FockRep::new(n).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 1.0).unwrap()).unwrap();
        let rot = rotation_u(&rep, 0.2, None).unwrap();
        let st = stationary_state(&k, None).unwrap();
        let moved = stationary_state(&transform_superop(&k, &rot).unwrap(), None).unwrap();
        let expect = DensityState::from_vector(&rot.u().dot(&st.state.vector())).unwrap().normalized().unwrap();
        assert!(linalg::frobenius(&(moved.state.matrix() - expect.matrix())) < 1e-10);
    }

    #[test]
    fn evolution_of_stationary_state_is_static() {
        let n = 12;
        let rep = FockRep::new(n).unwrap();
        let k = build_k(&rep, &MmeParams::new(1.0, 0.2, 1.0).unwrap()).unwrap();
        let rho = DensityState::thermal(n, 1.0).unwrap();
        let out = evolve(&k, &rho, &[0.0, 1.0, 2.0, 5.0]).unwrap();
        for s in out {
            assert!(linalg::frobenius(&(s.matrix() - rho.matrix())) < 1e-12);
        }
    }

    #[test]
    fn single_quantum_decays_at_zero_temperature() {
        let n = 8;
        let rep = FockRep::new(n).unwrap();
        let gamma = 0.2;
        let k = build_k(&rep, &MmeParams::new(1.0, gamma, 0.5).unwrap()).unwrap();
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let out = evolve(&k, &DensityState::fock(n, 1).unwrap(), &times).unwrap();
        for (t, s) in times.iter().zip(out.iter()) {
            assert_abs_diff_eq!(s.matrix()[[1, 1]].re, (-gamma * t).exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(s.trace().re, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn coherence_rate() {
        let n = 20;
        let (omega0, gamma) = (1.0, 0.2);
        let rep = FockRep::new(n).unwrap();
        let k = build_k(&rep, &MmeParams::new(omega0, gamma, 1.0).unwrap()).unwrap();
        let rho = coherent_state(n, c(1.0)).unwrap();
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1 / gamma).collect();
        let out = evolve(&k, &rho, &times).unwrap();
        let series = expectation_series(&out, rep.a_dag()).unwrap();
        let rate = extract_decay_rate(&times, &series).unwrap();
        assert!((rate - C64::new(-gamma / 2.0, omega0)).norm() < 0.01 * (gamma / 2.0), "{rate}");
    }

    #[test]
    fn rate_fit_recovers_exponential() {
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.3).collect();
        let lam = C64::new(-0.13, 2.1);
        let series: Vec<C64> = times.iter().map(|t| (lam * t).exp() * C64::new(0.3, 0.4)).collect();
        let r = extract_decay_rate(&times, &series).unwrap();
        assert!((r - lam).norm() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn spectrum_is_dissipative_and_reflected(b in 0.5f64..3.0, gamma in 0.01f64..0.5) {
            let rep = FockRep::new(8).unwrap();
            let k = build_k(&rep, &MmeParams::new(1.0, gamma, b).unwrap()).unwrap();
            let ev = eigen_spectrum(&k).unwrap();
            let scale = 1.0 + gamma * b * 8.0;
            prop_assert!(ev.iter().all(|z| z.im <= 1e-10 * scale));
            prop_assert!(reflection_defect(&ev) < 1e-8 * scale);
        }

        #[test]
        fn evolution_keeps_trace_and_hermiticity(b in 0.5f64..2.0, t in 0.0f64..10.0) {
            let n = 8;
            let rep = FockRep::new(n).unwrap();
            let k = build_k(&rep, &MmeParams::new(1.0, 0.2, b).unwrap()).unwrap();
            let rho = coherent_state(n, C64::new(0.7, -0.3)).unwrap();
            let out = evolve(&k, &rho, &[t]).unwrap();
            prop_assert!((out[0].trace() - c(1.0)).norm() < 1e-10);
            prop_assert!(out[0].hermiticity_defect() < 1e-10);
        }
    }
}
