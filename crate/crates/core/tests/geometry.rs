use proptest::prelude::*;
use surfloss::geometry::{build_layout, preset, validate, DesignParams, InterfaceTag, LayoutSpec, ModId, Point};
use surfloss::units::{mhz, nm, um};

#[test]
fn preset_lookup() {
    let a = preset("A").unwrap();
    assert_eq!((a.params.conductor_width, a.params.gap), (um(1.0), um(1.0)));
    let e = preset("mod_e").unwrap();
    assert_eq!((e.params.conductor_width, e.params.pad_height, e.params.gap), (um(120.0), Some(um(500.0)), um(70.0)));
    assert_eq!(preset("D").unwrap().coupling_g, mhz(52.0));
    assert_eq!(preset("F").unwrap_err().kind(), "invalid-argument");
}

fn mirrored_key(p: Point, electrode: &str) -> (i64, i64, String) {
    let swapped = match electrode {
        "plus" => "minus",
        "minus" => "plus",
        other => other,
    };
    ((-p.x * 1e13).round() as i64, (p.y * 1e13).round() as i64, swapped.to_string())
}

fn conductor_keys(layout: &LayoutSpec, mirror: bool) -> Vec<(i64, i64, String)> {
    let mut keys: Vec<_> = layout
        .conductors()
        .flat_map(|r| {
            let name = r.electrode.clone().unwrap();
            r.polygon.iter().map(move |&p| {
                if mirror {
                    mirrored_key(p, &name)
                } else {
                    ((p.x * 1e13).round() as i64, (p.y * 1e13).round() as i64, name.clone())
                }
            }).collect::<Vec<_>>()
        })
        .collect();
    keys.sort();
    keys
}

#[test]
fn two_electrode_layouts_mirror_with_swapped_labels() {
    for id in ModId::ALL {
        let layout = build_layout(&id.preset().params, nm(300.0)).unwrap();
        assert_eq!(conductor_keys(&layout, false), conductor_keys(&layout, true), "{id}");
    }
}

#[test]
fn conductor_edges_are_exactly_sm_and_ma() {
    for id in ModId::ALL {
        let layout = build_layout(&id.preset().params, nm(200.0)).unwrap();
        assert!(validate(&layout).is_valid(), "{id}: {}", validate(&layout));
        let tol = layout.tolerance();
        for s in &layout.segments {
            let on_conductor = layout
                .conductors()
                .any(|r| r.on_boundary(s.a, tol) && r.on_boundary(s.b, tol) && r.on_boundary(s.a.midpoint(s.b), tol));
            let inner = !layout.bbox.on_boundary(s.a.midpoint(s.b), tol);
            if on_conductor && inner {
                assert!(matches!(s.tag, InterfaceTag::Sm | InterfaceTag::Ma), "{id}: {s:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sa_length_grows_with_trench(width in 0.5f64..50.0, gap in 0.5f64..50.0, pairs in 1usize..6, d1 in 0.0f64..2000.0, d2 in 0.0f64..2000.0) {
        let params = DesignParams::interdigitated(um(width), um(gap), pairs);
        prop_assume!(params.electrode_extent() < 0.9 * params.ground_box_span);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = build_layout(&params, nm(lo)).unwrap();
        let b = build_layout(&params, nm(hi)).unwrap();
        prop_assert!(b.segment_length(InterfaceTag::Sa) >= a.segment_length(InterfaceTag::Sa) - 1e-15);
        prop_assert!(validate(&b).is_valid());
    }
}
