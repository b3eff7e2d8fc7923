//! End-to-end behavior of the coupled perturbation pipeline through the public API:
//! order consistency across truncations, multi-segment restarts, linear response to
//! data corrections, and the renormalized observable round trip.

use semilat_core::lattice::{
    make_lattice, make_switching, LatticeSpec, Profile, SwitchingFunction, SwitchingShape,
};
use semilat_core::perturb::{
    assemble, correct_data, restart, solve_tower, solve_tower_resumed, solve_tower_with_data,
    CouplingConfig, DataTower,
};
use semilat_core::renorm::{ambiguity_shift, phi_squared, phi_squared_recorded, subtraction_tower};
use semilat_core::perturb::SolveOptions;
use semilat_core::twopoint::thermal_data;
use semilat_core::Strategy;

fn spec() -> LatticeSpec {
    make_lattice(12, 6.0, 0.2, 60, 0.0, 1.0, 9.0).unwrap()
}

fn config(order: usize) -> CouplingConfig {
    CouplingConfig {
        lambda: 0.05,
        order,
        classical_mass: 0.7,
        quantum_mass: 1.0,
        beta1: 0.4,
        beta2: 0.3,
        beta3: 0.1,
        scale: 1.0,
    }
}

fn sigma(spec: &LatticeSpec) -> Vec<f64> {
    Profile::Gaussian { center: 0.5 * spec.circumference, width: 0.8, amplitude: 0.6 }
        .sample(spec)
        .unwrap()
}

/// The tower is triangular: solving at a higher truncation order never changes the
/// lower-order coefficients — they agree bitwise across truncations.
#[test]
fn lower_orders_are_independent_of_the_truncation_order() {
    let spec = spec();
    let chi = make_switching(&spec, SwitchingShape::Bump).unwrap();
    let sig = sigma(&spec);
    let pi = vec![0.0; spec.n_x];
    let data = thermal_data(&spec, 1.0, 1.5).unwrap();
    let towers: Vec<_> = (1..=3usize)
        .map(|ord| {
            solve_tower(&spec, &chi, &config(ord), &sig, &pi, &data, Strategy::default()).unwrap()
        })
        .collect();
    for hi in 1..towers.len() {
        for lo in 0..hi {
            let limit = towers[lo].n_orders();
            for k in 0..limit {
                assert_eq!(towers[lo].psi_k(k).u, towers[hi].psi_k(k).u, "ψ order {k}");
                assert_eq!(towers[lo].g_diag_k(k), towers[hi].g_diag_k(k), "G order {k}");
                assert_eq!(towers[lo].h_diag_k(k), towers[hi].h_diag_k(k), "H order {k}");
                assert_eq!(towers[lo].phi2_k(k), towers[hi].phi2_k(k), "q order {k}");
            }
        }
    }
}

/// Chained restarts across two cut slices reproduce the unsplit run bitwise on
/// every recorded table.
#[test]
fn two_chained_restarts_match_the_unsplit_run_bitwise() {
    let n_t = 60usize;
    let (cut1, cut2) = (20usize, 41usize);
    let spec = make_lattice(10, 5.0, 0.2, n_t, 0.0, 1.0, 12.0).unwrap();
    let chi = make_switching(&spec, SwitchingShape::Plateau { t_rise: 3.0 }).unwrap();
    let cfg = config(2);
    let sig = sigma(&spec);
    let pi = vec![0.0; spec.n_x];
    let data = thermal_data(&spec, cfg.quantum_mass, 1.0).unwrap();
    let full = solve_tower(&spec, &chi, &cfg, &sig, &pi, &data, Strategy::default()).unwrap();

    let mut segments = Vec::new();
    let bounds = [0usize, cut1, cut2, n_t];
    let mut carried = None;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let t_a = spec.time(a);
        let seg_spec = make_lattice(
            spec.n_x,
            spec.circumference,
            spec.dt,
            b - a,
            t_a,
            t_a + spec.dt,
            spec.time(b),
        )
        .unwrap();
        let seg_chi =
            SwitchingFunction::from_values(&seg_spec, chi.values[a..=b].to_vec()).unwrap();
        let tower = match carried.take() {
            None => solve_tower(&seg_spec, &seg_chi, &cfg, &sig, &pi, &data, Strategy::default())
                .unwrap(),
            Some(state) => solve_tower_resumed(
                &seg_spec,
                &seg_chi,
                &cfg,
                &state,
                SolveOptions::default(),
                Strategy::default(),
            )
            .unwrap(),
        };
        carried = Some(restart(&tower, cfg.lambda, b - a).unwrap());
        segments.push(tower);
    }

    for (i, w) in bounds.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        for k in 0..cfg.n_orders() {
            for (local, global) in (a..=b).enumerate() {
                assert_eq!(
                    segments[i].psi_k(k).u.row(local),
                    full.psi_k(k).u.row(global),
                    "ψ{k} differs at segment {i} slice {global}"
                );
                assert_eq!(
                    segments[i].phi2_k(k).row(local),
                    full.phi2_k(k).row(global),
                    "q{k} differs at segment {i} slice {global}"
                );
                assert_eq!(
                    segments[i].h_diag_k(k).row(local),
                    full.h_diag_k(k).row(global),
                    "H{k} differs at segment {i} slice {global}"
                );
            }
        }
    }
}

/// Starting from corrected data: the order-0 run is untouched bitwise, and the
/// order-1 response to the correction is linear.
#[test]
fn data_corrections_act_linearly_on_their_own_order() {
    let spec = spec();
    let chi = make_switching(&spec, SwitchingShape::Bump).unwrap();
    let cfg = config(1);
    let sig = sigma(&spec);
    let pi = vec![0.0; spec.n_x];
    let base_data = thermal_data(&spec, cfg.quantum_mass, 1.5).unwrap();
    let correction = {
        let mut c = thermal_data(&spec, cfg.quantum_mass, 0.8).unwrap();
        let cold = thermal_data(&spec, cfg.quantum_mass, 0.4).unwrap();
        c.g_phiphi -= &cold.g_phiphi;
        c.g_pipi -= &cold.g_pipi;
        c.g_phipi -= &cold.g_phipi;
        c.g_piphi -= &cold.g_piphi;
        c
    };
    let double = {
        let mut d = correction.clone();
        d.g_phiphi *= 2.0;
        d.g_pipi *= 2.0;
        d.g_phipi.mapv_inplace(|v| v * 2.0);
        d.g_piphi.mapv_inplace(|v| v * 2.0);
        d
    };
    let solve = |tower: DataTower| {
        solve_tower_with_data(
            &spec,
            &chi,
            &cfg,
            &sig,
            &pi,
            &tower,
            SolveOptions::default(),
            Strategy::default(),
        )
        .unwrap()
    };
    let plain = solve(correct_data(&base_data, &[], cfg.lambda, cfg.order).unwrap());
    let once = solve(
        correct_data(&base_data, std::slice::from_ref(&correction), cfg.lambda, cfg.order)
            .unwrap(),
    );
    let twice = solve(
        correct_data(&base_data, std::slice::from_ref(&double), cfg.lambda, cfg.order).unwrap(),
    );

    // Order 0 never sees order-1 data.
    assert_eq!(plain.g_diag_k(0), once.g_diag_k(0));
    assert_eq!(plain.g_diag_k(0), twice.g_diag_k(0));
    assert_eq!(plain.psi_k(0).u, once.psi_k(0).u);

    // Order 1 responds linearly: G₁(2c) − G₁(0) = 2·(G₁(c) − G₁(0)).
    let scale = plain.g_diag_k(1).iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    for n in (0..=spec.n_t).step_by(12) {
        for x in 0..spec.n_x {
            let d1 = once.g_diag_k(1)[[n, x]] - plain.g_diag_k(1)[[n, x]];
            let d2 = twice.g_diag_k(1)[[n, x]] - plain.g_diag_k(1)[[n, x]];
            assert!(
                (d2 - 2.0 * d1).abs() < 1e-12 * scale,
                "nonlinear response at n={n} x={x}: {d2} vs {}",
                2.0 * d1
            );
        }
    }
}

/// Round trip of the renormalized observable at the public level: recompute the
/// reference tower standalone, reassemble the observable, compare to the recorded
/// one bitwise, and verify the zero ambiguity shift is the identity.
#[test]
fn observable_round_trip_and_trivial_ambiguity() {
    let spec = spec();
    let chi = make_switching(&spec, SwitchingShape::Bump).unwrap();
    let cfg = config(2);
    let sig = sigma(&spec);
    let pi = vec![0.0; spec.n_x];
    let data = thermal_data(&spec, cfg.quantum_mass, 1.2).unwrap();
    let tower = solve_tower(&spec, &chi, &cfg, &sig, &pi, &data, Strategy::default()).unwrap();
    let sub = subtraction_tower(
        &spec,
        &chi,
        tower.psi(),
        cfg.quantum_mass,
        cfg.order,
        SolveOptions::default(),
        Strategy::default(),
    )
    .unwrap();
    let rebuilt = phi_squared(&tower, &sub).unwrap();
    let recorded = phi_squared_recorded(&tower);
    assert_eq!(rebuilt, recorded);

    let same = ambiguity_shift(&recorded, tower.config(), tower.chi(), tower.psi(), 0.0, 0.0, 0.0)
        .unwrap();
    assert_eq!(same, recorded);

    let asm = assemble(&tower, cfg.lambda).unwrap();
    assert_eq!(asm.psi.dim(), (spec.n_slices(), spec.n_x));
    assert_eq!(asm.phi2.dim(), (spec.n_slices(), spec.n_x));
}
