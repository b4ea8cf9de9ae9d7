use std::path::Path;

use proptest::prelude::*;

use nlres::fields::{DrivingField, Envelope, FieldMode, TimeGrid};
use nlres::generator::{generate, GeneratorSpec, Lobe, LobeKind, TransitionSpec};
use nlres::io::{parse_sections, read_model, write_model};
use nlres::model::MolecularModel;
use nlres::oracle::{propagate, OracleOptions};
use nlres::response::ResponseEngine;
use nlres::scalar::{rel_l2, Cplx};
use nlres::signals::{energy_exchange_of, SignalKind, SignalTrace};

fn small_model(gap: f64, amp: f64, phase: f64, axis: usize, eta: f64) -> MolecularModel<f64> {
    let mut spec = GeneratorSpec::<f64>::tlm_a();
    spec.n_grid = 10;
    spec.spacing = 0.6;
    spec.energies = vec![0.0, gap];
    spec.dephasing = eta;
    spec.transitions = vec![TransitionSpec {
        upper: 1,
        lower: 0,
        lobes: vec![Lobe {
            kind: LobeKind::P(axis),
            amplitude: Cplx::from_polar(amp, phase),
            center: [0.0; 3],
            width: 1.1,
        }],
        dipole: None,
    }];
    generate(&spec).unwrap()
}

fn pulse(omega: f64, q: f64, pol: [f64; 3]) -> DrivingField<f64> {
    DrivingField::new(
        vec![FieldMode::plane_wave(
            0.01,
            omega,
            [q, 0.0, 0.0],
            pol,
            Envelope::Gaussian {
                center: 26.0,
                width: 4.0,
            },
        )],
        TimeGrid::new(0.0, 0.1, 521).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn model_round_trip_is_exact(
        gap in 0.05f64..0.5,
        amp in 0.1f64..2.0,
        phase in -3.0f64..3.0,
        axis in 0usize..3,
        eta in 0.0f64..0.01,
    ) {
        let m = small_model(gap, amp, phase, axis, eta);
        let d = tempfile::tempdir().unwrap();
        write_model(&m, d.path()).unwrap();
        let back: MolecularModel<f64> = read_model(d.path()).unwrap();
        prop_assert!(back == m);
    }

    #[test]
    fn csv_rows_round_trip(values in prop::collection::vec((-1e6f64..1e6, -1e-6f64..1e-6), 1..40)) {
        let t = SignalTrace {
            kind: SignalKind::EnergyExchange,
            order: 1,
            axis: (0..values.len()).map(|k| 0.1 * k as f64).collect(),
            values: values.iter().map(|&(a, b)| Cplx::new(a, b)).collect(),
            axis_unit: "hbar/hartree",
            value_unit: "hartree^2/hbar",
        };
        let text = t.to_csv();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        prop_assert_eq!(rows.len(), values.len());
        for (row, (x, v)) in rows.iter().zip(t.axis.iter().zip(&t.values)) {
            let p: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
            prop_assert_eq!(p[0], *x);
            prop_assert_eq!(p[1], v.re + 0.0);
            prop_assert_eq!(p[2], v.im + 0.0);
        }
    }

    #[test]
    fn sections_preserve_values(keys in prop::collection::btree_map("[a-z][a-z_]{0,8}", "[A-Za-z0-9.,+-]{1,12}", 1..8)) {
        let mut text = String::from("[mode]\n");
        for (k, v) in &keys {
            text.push_str(&format!("{k} = {v}   # note\n"));
        }
        let secs = parse_sections(&text, Path::new("x.cfg")).unwrap();
        let mode = secs.iter().find(|s| s.name == "mode").unwrap();
        for (k, v) in &keys {
            prop_assert_eq!(mode.get(k), Some(v.as_str()));
        }
    }

    #[test]
    fn order_n_scales_as_lambda_to_the_n(
        lam in 0.1f64..5.0,
        omega in 0.05f64..0.2,
        q in 0.0f64..0.5,
    ) {
        let m = small_model(0.12, 1.0, 0.3, 2, 0.004);
        let f = pulse(omega, q, [0.0, 0.0, 1.0]);
        let base = ResponseEngine::new(&m, &f).unwrap().currents(3).unwrap();
        let scaled = ResponseEngine::new(&m, &f.scaled(lam)).unwrap().currents(3).unwrap();
        for n in [1usize, 3] {
            // ΔẆ⁽ⁿ⁾ carries one extra power of E beyond J⁽ⁿ⁾.
            let k = lam.powi(n as i32 + 1);
            let want: Vec<Cplx<f64>> = energy_exchange_of(&base[n - 1]).values.iter().map(|v| v * k).collect();
            let got = energy_exchange_of(&scaled[n - 1]).values;
            prop_assert!(rel_l2(&got, &want, 0.0) < 1e-12);
        }
    }

    #[test]
    fn propagation_keeps_density_physical(
        omega in 0.05f64..0.3,
        q in 0.0f64..0.6,
        amp in 0.5f64..40.0,
        eta in 0.0f64..0.02,
    ) {
        let m = small_model(0.12, 1.0, 0.0, 2, eta);
        let f = pulse(omega, q, [0.0, 0.0, 1.0]).scaled(amp);
        let tr = propagate(&m, &f, &OracleOptions::default()).unwrap();
        prop_assert!(tr.hermiticity <= 1e-10);
        prop_assert!(tr.trace_drift <= 1e-8);
        prop_assert!(tr.positive);
    }
}
