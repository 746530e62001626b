use proptest::prelude::*;
use qswitch_core::dressed::{dressed_energy, effective_coupling, gate_resonance_energies, Branch};
use qswitch_core::spectra::{eigen_sweep_on, find_anticrossing, linspace, point_eigenvalues, CrossingKind};
use qswitch_core::{build_basis, Detunings, SystemParams};

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Analytic one-quantum levels (absolute energies) with the waveguide photon at 0.
fn analytic_levels(p: &SystemParams, det: &Detunings) -> Vec<f64> {
    let mut v: Vec<f64> = gate_resonance_energies(p, det).as_array().iter().map(|e| e + p.omega_c).collect();
    v.push(0.0);
    sorted(v)
}

#[test]
fn decoupled_levels_match_dressed_energies_over_extreme_detunings() {
    let basis = build_basis(1, Some(1)).unwrap();
    let p = SystemParams { kappa_cq: 0.0, ..SystemParams::fig2() };
    for exp in -6..=6 {
        for sign in [-1.0, 1.0] {
            let ratio = sign * 10f64.powi(exp);
            let det = Detunings::new(0.3 * ratio * p.rabi_c, ratio * p.rabi_q);
            let numeric = point_eigenvalues(&p, &det, &basis).unwrap();
            let analytic = analytic_levels(&p, &det);
            let scale = numeric.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!((a - n).abs() <= 1e-12 * scale, "Δ/Ω = {ratio}: {a} vs {n}");
            }
        }
    }
}

#[test]
fn coupled_levels_stay_within_second_order_shift() {
    let basis = build_basis(1, Some(1)).unwrap();
    let p = SystemParams { omega_c: 2.0, omega_q: 3.0, rabi_c: 0.1, rabi_q: 0.1, kappa_cq: 0.01, kappa_qw: 0.0 };
    let tol = 5.0 * p.kappa_cq * p.kappa_cq / p.delta();
    for dq in linspace(-3.0, 1.0, 81) {
        let det = Detunings::new(0.0, dq);
        let e = gate_resonance_energies(&p, &det);
        // near a cavity-gate crossing the levels hybridise at first order
        let near = [e.gate_plus, e.gate_minus]
            .iter()
            .any(|g| (g - e.cavity_plus).abs() < p.rabi_c || (g - e.cavity_minus).abs() < p.rabi_c);
        if near {
            continue;
        }
        let numeric = point_eigenvalues(&p, &det, &basis).unwrap();
        for (a, n) in analytic_levels(&p, &det).iter().zip(&numeric) {
            assert!((a - n).abs() < tol, "Δ_q = {dq}: {a} vs {n}");
        }
    }
}

#[test]
fn gap_tracks_twice_the_effective_coupling_as_detuning_grows() {
    let basis = build_basis(1, Some(1)).unwrap();
    let mut last = f64::INFINITY;
    for ratio in [10.0, 20.0, 50.0] {
        let p = SystemParams { omega_c: 5.0, omega_q: 5.0 + ratio, rabi_c: 1.0, rabi_q: 1.0, kappa_cq: 0.01 * ratio, kappa_qw: 0.0 };
        let j = effective_coupling(&p).unwrap();
        let centre = -p.delta() + p.rabi_c;
        let grid = linspace(centre - 0.5, centre + 0.5, 2001);
        let table = eigen_sweep_on(&p, 0.0, &grid, &basis).unwrap();
        let x = find_anticrossing(&table, 1, (centre - 0.5, centre + 0.5)).unwrap();
        assert_eq!(x.kind, CrossingKind::Avoided);
        // two-level gap: κ_cq times the photon amplitudes of |+_c⟩ and of the gate
        // branch; the other levels shift it at relative order κ_cq/δ
        let a = p.delta() - p.rabi_c;
        let exact = 2.0 * p.kappa_cq * std::f64::consts::FRAC_1_SQRT_2 * p.rabi_q / (p.rabi_q.powi(2) + a * a).sqrt();
        assert!((x.gap - exact).abs() < 1e-2 * exact, "δ/Ω = {ratio}: {} vs {exact}", x.gap);
        let rel = x.gap / (2.0 * j) - 1.0;
        assert!(rel > 0.0 && rel < last, "δ/Ω = {ratio}: relative excess {rel}");
        last = rel;
    }
}

#[test]
fn full_space_sweep_preserves_trace_and_quanta() {
    let p = SystemParams::fig3();
    let basis = build_basis(2, None).unwrap();
    let grid = linspace(-3.0, -1.0, 41);
    let table = eigen_sweep_on(&p, 0.1, &grid, &basis).unwrap();
    for k in 0..grid.len() {
        let sum: f64 = table.eigenvalues(k).iter().sum();
        assert!((sum - table.traces[k]).abs() < 1e-10 * table.traces[k].abs());
        for level in &table.levels[k] {
            assert!(level.quanta_variance.abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_cavity_block_eigenvalues(rabi in 0.01f64..5.0, detuning in -20.0f64..20.0) {
        let basis = build_basis(1, Some(1)).unwrap();
        let p = SystemParams { omega_c: 3.0, omega_q: 9.0, rabi_c: rabi, rabi_q: 0.0, kappa_cq: 0.0, kappa_qw: 0.0 };
        let ev = point_eigenvalues(&p, &Detunings::new(detuning, 40.0), &basis).unwrap();
        for b in [Branch::Plus, Branch::Minus] {
            let e = p.omega_c + dressed_energy(rabi, detuning, b);
            prop_assert!(ev.iter().any(|x| (x - e).abs() < 1e-12 * (1.0 + e.abs())));
        }
    }
}
