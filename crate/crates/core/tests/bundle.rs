use fieldsense_core::gp::{KernelSpec, Location, MeanSpec, Prior};
use fieldsense_core::moments::mc::Moments;
use fieldsense_core::obs::{moment_bundle, ObservationSimulator, Sensor, SensorArray};
use fieldsense_core::rng;

fn prior() -> Prior {
    Prior::new(
        MeanSpec::Constant(0.4),
        KernelSpec::squared_exponential(2.0, 3.0),
    )
}

fn mixed(threshold: f64) -> SensorArray {
    SensorArray::new(vec![
        Sensor::high("a", Location::new(0.0, 0.0), 0.2, 1.0),
        Sensor::high("b", Location::new(2.0, 1.0), 0.1, 1.0),
        Sensor::low("c", Location::new(1.0, 2.0), 0.3, threshold, 1.0),
        Sensor::low("d", Location::new(3.0, 0.5), 0.05, threshold + 0.3, 1.0),
    ])
    .unwrap()
}

#[test]
fn bundle_matches_simulation() {
    let p = prior();
    let arr = mixed(0.2);
    let q = Location::new(1.5, 1.0);
    let b = moment_bundle(&p, &arr, q).unwrap();
    let sim = ObservationSimulator::new(&p, &arr, &[q]).unwrap();
    let mut r = rng::stream(4, "test", "bundle");
    let n = 200_000;
    let draws: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| {
            let d = sim.draw(&mut r);
            (d.obs.0.iter().copied().collect(), d.extra[0])
        })
        .collect();

    // centre on the analytic means so the products are plain sample means
    for i in 0..4 {
        let mut m = Moments::default();
        for (y, _) in &draws {
            m.push(y[i]);
        }
        let z = (m.mean - b.mean[i]) / m.std_error();
        assert!(
            z.abs() < 4.0,
            "mean {i}: {} vs {} (z {z})",
            b.mean[i],
            m.mean
        );
        for j in 0..4 {
            let mut c = Moments::default();
            for (y, _) in &draws {
                c.push((y[i] - b.mean[i]) * (y[j] - b.mean[j]));
            }
            let z = (c.mean - b.cov.0[(i, j)]) / c.std_error();
            assert!(
                z.abs() < 4.0,
                "cov {i}{j}: {} vs {} (z {z})",
                b.cov.0[(i, j)],
                c.mean
            );
        }
        let mut c = Moments::default();
        for (y, f) in &draws {
            c.push((f - b.prior_mean) * (y[i] - b.mean[i]));
        }
        let z = (c.mean - b.cross[i]) / c.std_error();
        assert!(
            z.abs() < 4.0,
            "cross {i}: {} vs {} (z {z})",
            b.cross[i],
            c.mean
        );
    }
}

#[test]
fn bundle_is_continuous_in_threshold() {
    let p = prior();
    let q = Location::new(1.0, 1.0);
    let mut prev = moment_bundle(&p, &mixed(-1.0), q).unwrap();
    let mut t = -1.0;
    while t < 2.0 {
        t += 1e-3;
        let cur = moment_bundle(&p, &mixed(t), q).unwrap();
        let dm = (&cur.mean - &prev.mean).amax();
        let dc = (&cur.cov.0 - &prev.cov.0).amax();
        let dx = (&cur.cross - &prev.cross).amax();
        assert!(
            dm < 5e-3 && dc < 5e-3 && dx < 5e-3,
            "jump at T={t}: {dm} {dc} {dx}"
        );
        prev = cur;
    }
}

#[test]
fn far_low_threshold_approaches_high_network() {
    let p = prior();
    let q = Location::new(1.0, 1.0);
    let low = moment_bundle(&p, &mixed(-40.0), q).unwrap();
    let ninf = moment_bundle(&p, &mixed(f64::NEG_INFINITY), q).unwrap();
    assert!((&low.mean - &ninf.mean).amax() < 1e-12);
    assert!((&low.cov.0 - &ninf.cov.0).amax() < 1e-10);
    assert!((&low.cross - &ninf.cross).amax() < 1e-12);
}

#[test]
fn masking_is_coherent() {
    let p = prior();
    let arr = mixed(0.0);
    let q = Location::new(0.5, 2.0);
    let full = moment_bundle(&p, &arr, q).unwrap();
    for idx in [vec![0], vec![1, 3], vec![0, 2, 3], vec![]] {
        let sub = moment_bundle(&p, &arr.subset(&idx), q).unwrap();
        let sel = full.select(&idx);
        assert_eq!(sel.dim(), idx.len());
        assert!((&sel.mean - &sub.mean).amax() <= 1e-14);
        assert!((&sel.cov.0 - &sub.cov.0).amax() <= 1e-14);
        assert!((&sel.cross - &sub.cross).amax() <= 1e-14);
    }
}
