use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use surfloss::analysis::{simulate, standard_drive, SimulationSetup};
use surfloss::field::{capacitance, charging_energy, solve, total_energy, FieldSolution, MaterialStack};
use surfloss::geometry::{build_layout, parallel_plate, Material, ModId};
use surfloss::mesh::{generate_mesh, Mesh, MeshControls};
use surfloss::units::{ff, nm, um, EPSILON_0};

fn plate_mesh(layers: &[(f64, Material)]) -> Mesh {
    let layout = parallel_plate(um(20.0), layers, um(1.0)).unwrap();
    generate_mesh(
        &layout,
        &MeshControls {
            h_max: um(2.0),
            corner_h_min: um(0.5),
            grading_ratio: 2.0,
            max_refine_passes: 0,
        },
    )
    .unwrap()
}

fn plates(v: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([("bottom".to_string(), -0.5 * v), ("top".to_string(), 0.5 * v)])
}

#[test]
fn uniform_box_energy_matches_closed_form() {
    let mesh = plate_mesh(&[(um(10.0), Material::Substrate)]);
    let sol = solve(mesh, &MaterialStack::default(), &plates(2.0)).unwrap();
    let e0 = 2.0 / um(10.0);
    let want = 0.5 * EPSILON_0 * 11.45 * e0 * e0 * um(20.0) * um(10.0);
    assert!((total_energy(&sol) - want).abs() < 1e-9 * want);
}

#[test]
fn zero_voltages_store_no_energy() {
    let mesh = plate_mesh(&[(um(10.0), Material::Vacuum)]);
    let sol = solve(mesh, &MaterialStack::default(), &plates(0.0)).unwrap();
    assert_eq!(total_energy(&sol), 0.0);
}

#[test]
fn no_conductor_reference_is_a_solve_failure() {
    let mut mesh = plate_mesh(&[(um(10.0), Material::Vacuum)]);
    for e in mesh.vertex_electrode.iter_mut() {
        *e = None;
    }
    let err = solve(mesh, &MaterialStack::default(), &plates(1.0)).unwrap_err();
    assert_eq!(err.kind(), "solve-failure");
}

#[test]
fn capacitance_is_independent_of_drive() {
    let mesh = Arc::new(plate_mesh(&[(um(4.0), Material::Substrate), (um(6.0), Material::Vacuum)]));
    let a = capacitance(&solve(mesh.clone(), &MaterialStack::default(), &plates(1.0)).unwrap()).unwrap();
    let b = capacitance(&solve(mesh, &MaterialStack::default(), &plates(2.0)).unwrap()).unwrap();
    assert!((a - b).abs() < 1e-12 * a);
    // Series plates: 1/C = d1/(eps1) + d2/(eps2), per eps0 w.
    let want = EPSILON_0 * um(20.0) / (um(4.0) / 11.45 + um(6.0));
    assert!((a - want).abs() < 1e-9 * want);
}

#[test]
fn charging_energy_scales_inversely_with_capacitance() {
    let ec = charging_energy(ff(27.7)).unwrap();
    assert!((ec - 700e6).abs() < 2e6, "{ec}");
    assert!(charging_energy(1.0).unwrap() < 1e-3);
    assert!(charging_energy(-1.0).is_err());
}

#[test]
fn pad_pair_capacitance_near_transmon_target() {
    let preset = ModId::D.preset();
    let s = simulate(&preset.params, nm(50.0), &SimulationSetup::default()).unwrap();
    let c = s.capacitance * preset.params.pad_height.unwrap();
    let target = ff(55.35);
    assert!(c > 0.5 * target && c < 2.0 * target, "{:.2} fF", c / ff(1.0));
}

#[test]
fn energy_decreases_under_refinement() {
    let setup = SimulationSetup {
        controls: MeshControls {
            max_refine_passes: 3,
            ..MeshControls::default()
        },
        ..SimulationSetup::default()
    };
    let s = simulate(&ModId::C.preset().params, nm(300.0), &setup).unwrap();
    let u = &s.energy_history;
    assert_eq!(u.len(), 4);
    assert!(u.windows(2).all(|w| w[1] < w[0]), "{u:?}");
    let changes: Vec<f64> = u.windows(2).map(|w| (w[0] - w[1]) / w[1]).collect();
    assert!(changes.windows(2).all(|w| w[1] < w[0]), "{changes:?}");
}

#[test]
fn mod_a_energy_is_stable_across_passes() {
    let setup = SimulationSetup {
        controls: MeshControls {
            max_refine_passes: 2,
            ..MeshControls::default()
        },
        ..SimulationSetup::default()
    };
    let s = simulate(&ModId::A.preset().params, nm(300.0), &setup).unwrap();
    let u = &s.energy_history;
    let last = (u[u.len() - 2] - u[u.len() - 1]).abs() / u[u.len() - 1];
    assert!(u[u.len() - 1] > 0.0 && last < 0.01, "{u:?}");
}

fn small_solution() -> (Arc<Mesh>, FieldSolution) {
    let layout = build_layout(&ModId::E.preset().params, nm(300.0)).unwrap();
    let mesh = Arc::new(
        generate_mesh(
            &layout,
            &MeshControls {
                h_max: um(20.0),
                corner_h_min: nm(100.0),
                grading_ratio: 2.0,
                max_refine_passes: 0,
            },
        )
        .unwrap(),
    );
    let v = standard_drive(&mesh.electrodes, 1.0).unwrap();
    let sol = solve(mesh.clone(), &MaterialStack::default(), &v).unwrap();
    (mesh, sol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn voltage_scaling(lambda in 0.01f64..100.0) {
        let (mesh, sol) = small_solution();
        let v = standard_drive(&mesh.electrodes, lambda).unwrap();
        let scaled = solve(mesh, &MaterialStack::default(), &v).unwrap();
        prop_assert!((scaled.total_energy / sol.total_energy - lambda * lambda).abs() < 1e-9 * lambda * lambda);
        for (a, b) in sol.field.iter().zip(&scaled.field) {
            prop_assert!(b.sub(a.scale(lambda)).norm() <= 1e-8 * (lambda * a.norm()).max(1.0));
        }
        let (ca, cb) = (capacitance(&sol).unwrap(), capacitance(&scaled).unwrap());
        prop_assert!((ca - cb).abs() < 1e-9 * ca);
    }

    #[test]
    fn perturbations_never_lower_energy(seed in any::<u64>(), amplitude in 1e-6f64..1e-1) {
        use rand::{Rng, SeedableRng};
        let (mesh, sol) = small_solution();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let potential: Vec<f64> = sol
            .potential
            .iter()
            .zip(&mesh.vertex_electrode)
            .map(|(&u, e)| if e.is_some() { u } else { u + amplitude * rng.random_range(-1.0..1.0) })
            .collect();
        let perturbed = FieldSolution::from_potential(mesh, &MaterialStack::default(), potential, sol.voltages.clone()).unwrap();
        prop_assert!(perturbed.total_energy >= sol.total_energy * (1.0 - 1e-12));
    }
}

#[test]
fn two_dielectric_field_continuity() {
    let mesh = plate_mesh(&[(um(3.0), Material::Substrate), (um(7.0), Material::Vacuum)]);
    let sol = solve(mesh, &MaterialStack::default(), &plates(1.0)).unwrap();
    let (mut sub, mut vac) = (None, None);
    for (t, e) in sol.field.iter().enumerate() {
        assert!(e.x.abs() < 1e-9 * e.y.abs(), "tangential field must vanish");
        match sol.mesh.regions[t] {
            Material::Substrate => sub = Some(e.y),
            _ => vac = Some(e.y),
        }
    }
    let (e1, e2) = (sub.unwrap(), vac.unwrap());
    assert!((11.45 * e1 - e2).abs() < 1e-9 * e2.abs());
}
