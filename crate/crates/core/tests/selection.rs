use fieldsense_core::gp::{KernelSpec, Location, MeanSpec, Prior};
use fieldsense_core::obs::{Sensor, SensorArray};
use fieldsense_core::selection::{
    brute_force_select, cem_select, cem_select_with, feasibility_check, CemConfig, MseTable,
    SelectionEvaluator,
};
use fieldsense_core::{rng, ActivationMask, SelectionProblem};
use rand::Rng;

fn random_problem(seed: u64, n: usize) -> SelectionProblem {
    let mut r = rng::stream(seed, "test", "selection");
    let sensors = (0..n)
        .map(|i| {
            let loc = Location::new(r.random_range(0.0..10.0), r.random_range(0.0..10.0));
            let cost = r.random_range(1.0..10.0);
            if i % 2 == 0 {
                Sensor::high(format!("s{i}"), loc, 0.1, cost)
            } else {
                Sensor::low(format!("s{i}"), loc, 0.2, 0.0, cost)
            }
        })
        .collect();
    let prior = Prior::new(MeanSpec::Zero, KernelSpec::squared_exponential(3.0, 4.0));
    let mut p = SelectionProblem {
        query: Location::new(5.0, 5.0),
        qos_var: 3.0,
        arr: SensorArray::new(sensors).unwrap(),
        prior,
    };
    let eval = SelectionEvaluator::new(&p).unwrap();
    let full = eval.mse(&ActivationMask::full(n)).unwrap();
    p.qos_var = full + r.random_range(0.1..0.6) * (3.0 - full);
    p
}

#[test]
fn cem_with_full_sampling_finds_optimum() {
    // K >= 2^N and alpha = 1 make every mask likely in the first draw
    let mut hits = 0;
    for seed in 0..100 {
        let n = 6;
        let p = random_problem(seed, n);
        let (_, best) = brute_force_select(&p).unwrap();
        let cfg = CemConfig {
            n_samples: 1 << 8,
            smoothing: 1.0,
            seed,
            ..CemConfig::default()
        };
        let got = cem_select(&p, &cfg).unwrap();
        if (got.state.best_utility - best).abs() <= 1e-9 * best.abs() {
            hits += 1;
        }
    }
    assert!(hits >= 99, "{hits}/100");
}

#[test]
fn cost_scaling_keeps_the_argmax() {
    for seed in 0..10 {
        let p = random_problem(seed, 8);
        let (mask, u) = brute_force_select(&p).unwrap();
        let mut scaled = p.clone();
        let sensors = scaled
            .arr
            .sensors()
            .iter()
            .map(|s| Sensor {
                cost: s.cost * 3.5,
                ..s.clone()
            })
            .collect();
        scaled.arr = SensorArray::new(sensors).unwrap();
        let (mask2, u2) = brute_force_select(&scaled).unwrap();
        assert_eq!(mask, mask2);
        assert!((u2 - 3.5 * u).abs() <= 1e-9 * u2.abs());
    }
}

#[test]
fn removing_a_sensor_never_helps() {
    for seed in 0..10 {
        let p = random_problem(seed, 8);
        let (_, u) = brute_force_select(&p).unwrap();
        for drop in 0..8 {
            let keep: Vec<usize> = (0..8).filter(|&i| i != drop).collect();
            let mut q = p.clone();
            q.arr = p.arr.subset(&keep);
            let (_, u2) = brute_force_select(&q).unwrap();
            assert!(
                u2 <= u + 1e-9 * u.abs(),
                "seed {seed} drop {drop}: {u2} > {u}"
            );
        }
    }
}

#[test]
fn unique_feasible_mask() {
    // only the sensor on the query point can meet the bound on its own,
    // and it is the cheapest way to do so
    let prior = Prior::new(MeanSpec::Zero, KernelSpec::squared_exponential(1.0, 1.0));
    let q = Location::new(0.0, 0.0);
    let sensors = vec![
        Sensor::high("far1", Location::new(30.0, 0.0), 0.01, 1.0),
        Sensor::high("far2", Location::new(0.0, 30.0), 0.01, 1.0),
        Sensor::high("on", q, 0.01, 5.0),
        Sensor::low("far3", Location::new(-30.0, 0.0), 0.01, 0.0, 1.0),
    ];
    let p = SelectionProblem {
        query: q,
        qos_var: 0.01,
        arr: SensorArray::new(sensors).unwrap(),
        prior,
    };
    assert!(feasibility_check(&p).unwrap().is_feasible());
    let eval = SelectionEvaluator::new(&p).unwrap();
    let table = MseTable::build(&eval).unwrap();
    let on = p.arr.sensors().iter().position(|s| s.id == "on").unwrap();
    let feasible: Vec<u64> = (0..16u64)
        .filter(|&c| {
            table
                .utility(&ActivationMask::from_code(4, c), p.qos_var)
                .is_finite()
        })
        .collect();
    assert!(feasible
        .iter()
        .all(|&c| ActivationMask::from_code(4, c).bits[on]));
    let (mask, u) = table.optimum(p.qos_var);
    assert_eq!(mask.active(), vec![on]);
    assert_eq!(u, -5.0);
    for seed in 0..5 {
        let got = cem_select_with(
            &eval,
            &CemConfig {
                seed,
                ..CemConfig::default()
            },
        )
        .unwrap();
        assert_eq!(got.state.best_mask, mask);
    }
}
