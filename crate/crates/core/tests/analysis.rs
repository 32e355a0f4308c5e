use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfloss::analysis::{
    compare_designs, fit_linear, fit_log, log_extrapolate, loss_budget, purcell_limit, q_from_t1, t1_from_q,
    tan_delta_bound, trench_sweep, CompareSetup, LossChannel, PurcellParams, SimulationSetup,
};
use surfloss::geometry::{Interface, ModId};
use surfloss::units::{ghz, mhz, nm, us};

fn depths() -> Vec<f64> {
    [300.0, 400.0, 600.0, 1000.0].map(nm).to_vec()
}

#[test]
fn mod_c_sweep_and_extrapolation() {
    let sweep = trench_sweep("mod_c", &ModId::C.preset().params, &depths(), nm(300.0), &SimulationSetup::default()).unwrap();
    assert_eq!(sweep.runs.len(), 4);
    for r in sweep.reports() {
        assert!(Interface::ALL.iter().all(|&i| r.p_over_t.get(i).is_finite()));
    }
    let sm: Vec<f64> = sweep.reports().map(|r| r.p_over_t.sm).collect();
    assert!(sm[3] < sm[0]);

    let fits = log_extrapolate(&sweep, nm(50.0)).unwrap();
    for i in Interface::ALL {
        let f = fits.get(i);
        assert!(f.extrapolated_value > 0.0);
        // Inside the sampled range the fit reproduces its own curve and residuals.
        let values: Vec<f64> = sweep.reports().map(|r| *r.p_over_t.get(i)).collect();
        let mean = values.iter().sum::<f64>() / 4.0;
        let ss_tot: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let ss_res: f64 = sweep.depths.iter().zip(&values).map(|(&d, v)| (v - f.value_at(d)).powi(2)).sum();
        assert!(((1.0 - ss_res / ss_tot) - f.r_squared).abs() < 1e-9);
        let inside = fit_log(i, &sweep.depths, &values, nm(500.0)).unwrap();
        assert!((inside.extrapolated_value - f.value_at(nm(500.0))).abs() <= 1e-9 * f.value_at(nm(500.0)).abs());
    }
}

#[test]
fn sweep_preconditions() {
    let p = ModId::C.preset().params;
    let setup = SimulationSetup::default();
    assert_eq!(trench_sweep("c", &p, &[nm(100.0)], nm(300.0), &setup).unwrap_err().kind(), "invalid-argument");
    assert_eq!(trench_sweep("c", &p, &[nm(300.0), nm(300.0)], nm(300.0), &setup).unwrap_err().kind(), "invalid-argument");
    let single = trench_sweep("c", &p, &[nm(400.0)], nm(300.0), &setup).unwrap();
    assert_eq!(log_extrapolate(&single, nm(50.0)).unwrap_err().kind(), "invalid-argument");
}

#[test]
fn noisy_slope_recovery() {
    // Shape of the MOD C substrate-metal sweep, with 1% multiplicative noise.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ds = depths();
    let (a, b) = (4.96e5, -4.17e4);
    let slopes: Vec<f64> = (0..100)
        .map(|_| {
            let values: Vec<f64> = ds
                .iter()
                .map(|&d| (a + b * (d * 1e9).ln()) * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
                .collect();
            fit_log(Interface::Sm, &ds, &values, nm(50.0)).unwrap().b
        })
        .collect();
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    assert!((mean - b).abs() <= 0.05 * b.abs(), "mean slope {mean}");
}

proptest! {
    #[test]
    fn extrapolation_ignores_log_base(a in -1e6f64..1e6, b in -1e5f64..1e5, base in 1.5f64..20.0, target in 1.0f64..5000.0, noise in proptest::collection::vec(-1e3f64..1e3, 4)) {
        let ds: [f64; 4] = [300.0, 400.0, 600.0, 1000.0];
        let ys: Vec<f64> = ds.iter().zip(&noise).map(|(d, n)| a + b * d.ln() + n).collect();
        let natural = fit_linear(&ds.map(f64::ln), &ys).unwrap();
        let other = fit_linear(&ds.map(|d| d.log(base)), &ys).unwrap();
        let (x, y) = (natural.eval(target.ln()), other.eval(target.log(base)));
        prop_assert!((x - y).abs() <= 1e-7 * (x.abs() + y.abs() + 1.0));
        prop_assert!((natural.r_squared - other.r_squared).abs() < 1e-9);
    }

    #[test]
    fn budget_is_harmonic(ps in proptest::collection::vec((1e3f64..1e7, 1e-9f64..1e-8, 1e-5f64..1e-2), 1..5), p_sub in 0.5f64..1.0, tan_sub in 0.0f64..1e-5, f in 1e9f64..1e10) {
        let mut channels: Vec<LossChannel> = ps.iter().enumerate().map(|(k, &(p, t, tan))| LossChannel::surface(format!("s{k}"), p, t, tan)).collect();
        channels.push(LossChannel::bulk("substrate", p_sub, tan_sub));
        let b = loss_budget(channels, 0.0, f).unwrap();
        let harmonic: f64 = (0..b.channels.len()).map(|k| 1.0 / b.channel_q(k)).sum();
        prop_assert!((1.0 / b.q - harmonic).abs() <= 1e-12 * harmonic);
        prop_assert!((b.t1.unwrap() - t1_from_q(b.q, f).unwrap()).abs() <= 1e-12 * b.t1.unwrap());
    }

    #[test]
    fn t1_round_trip(t1 in 1e-7f64..1e-2, f in 1e8f64..2e10) {
        let back = t1_from_q(q_from_t1(t1, f).unwrap(), f).unwrap();
        prop_assert!((back - t1).abs() <= 1e-14 * t1);
    }

    #[test]
    fn purcell_monotonicity(g in 1e6f64..1e8, f_q in 3e9f64..6e9, det in 5e8f64..3e9, q_c in 1e3f64..1e5) {
        let base = PurcellParams { g, f_qubit: f_q, f_res: f_q + det, q_c };
        let t = purcell_limit(&base).unwrap();
        let more_q = PurcellParams { q_c: 1.1 * q_c, ..base };
        let more_g = PurcellParams { g: 1.1 * g, ..base };
        // Wider detuning at fixed resonator frequency.
        let wider = PurcellParams { f_qubit: f_q - 1e8, ..base };
        prop_assert!(purcell_limit(&more_q).unwrap() > t);
        prop_assert!(purcell_limit(&more_g).unwrap() < t);
        prop_assert!(purcell_limit(&wider).unwrap() > t);
    }
}

#[test]
fn budget_examples() {
    let b = loss_budget(vec![LossChannel::surface("SA", 1.24e6, 3e-9, 2e-3)], 0.0, ghz(4.8)).unwrap();
    assert!((b.inverse_q - 7.44e-6).abs() <= 1e-9 * 7.44e-6);
    assert!((b.q - 1.34e5).abs() / 1.34e5 < 0.005);
    let b = loss_budget(vec![LossChannel::bulk("substrate", 0.92, 5e-7)], 0.0, ghz(4.8)).unwrap();
    assert!((b.q - 2.17e6).abs() / 2.17e6 < 0.005);
    let b = loss_budget(vec![LossChannel::surface("SM", 1e6, 3e-9, 0.0)], 0.0, ghz(4.8)).unwrap();
    assert!(b.infinite_q() && b.t1.is_none());
}

#[test]
fn quality_factor_examples() {
    assert!((q_from_t1(us(50.0), ghz(4.8)).unwrap() - 1.51e6).abs() / 1.51e6 < 0.01);
    assert!((q_from_t1(us(100.0), ghz(4.8)).unwrap() - 3.02e6).abs() / 3.02e6 < 0.01);
    assert!((tan_delta_bound(2e6, 0.92).unwrap() - 5.4e-7).abs() < 0.05e-7);
    assert!((tan_delta_bound(1e6, 1.0).unwrap() - 1e-6).abs() < 1e-18);
    assert!((tan_delta_bound(1.5e6, 0.92).unwrap() - 7.2e-7).abs() < 0.05e-7);
    assert!(tan_delta_bound(1e6, 0.0).is_err());
}

#[test]
fn purcell_examples() {
    let p = PurcellParams {
        g: mhz(50.0),
        f_qubit: ghz(4.5),
        f_res: ghz(7.0),
        q_c: 2e4,
    };
    let t1 = purcell_limit(&p).unwrap();
    assert!((t1 - 1.137e-3).abs() < 0.005e-3, "{t1}");
    assert!(t1 > 10.0 * us(50.0));
    assert!(purcell_limit(&PurcellParams { g: 0.0, ..p }).unwrap().is_infinite());
    // Halving the detuning (qubit moved toward the resonator at fixed f_res).
    let half = PurcellParams { f_qubit: ghz(5.75), ..p };
    assert!((purcell_limit(&half).unwrap() - 0.25 * t1).abs() < 1e-12);
}

#[test]
fn comparison_needs_two_designs() {
    let one = vec![("mod_a".to_string(), ModId::A.preset().params)];
    assert_eq!(compare_designs(&one, &CompareSetup::default()).unwrap_err().kind(), "invalid-argument");
}

#[test]
fn mod_a_sa_far_exceeds_mod_b() {
    let designs: Vec<_> = [ModId::A, ModId::B].iter().map(|id| (id.name().to_string(), id.preset().params)).collect();
    let rows = compare_designs(&designs, &CompareSetup::default()).unwrap();
    let ratio = rows[0].p_over_t(Interface::Sa) / rows[1].p_over_t(Interface::Sa);
    assert!(ratio > 3.0, "{ratio}");
    assert_eq!(rows[0].design, "mod_a");
    assert!(rows[0].inverse_p_sa() < rows[1].inverse_p_sa());
}
