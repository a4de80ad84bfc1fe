mod common;

use std::path::Path;
use std::process::Command;

use common::*;
use fieldsense_cli::output::read_pgm;

fn run_in(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin())
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn cfg(name: &str) -> String {
    configs_dir().join(name).to_str().unwrap().to_string()
}

fn read_csv_values(path: &Path) -> Vec<(f64, f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect()
}

#[test]
fn reconstruct_rasters_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let (code, err) = run_in(&[
        "reconstruct",
        "--config",
        &cfg("reconstruct-csv.toml"),
        "--out",
        out,
    ]);
    assert_eq!(code, 0, "{err}");
    for name in ["field", "mse"] {
        let csv = read_csv_values(&tmp.path().join(format!("{name}.csv")));
        let pgm =
            read_pgm(&std::fs::read(tmp.path().join(format!("{name}.pgm"))).unwrap()).unwrap();
        assert_eq!((pgm.nx, pgm.ny), (32, 32));
        assert_eq!(csv.len(), pgm.values.len());
        let range = pgm.max - pgm.min;
        assert!(range > 0.0);
        for ((x, y, v), d) in csv.iter().zip(&pgm.values) {
            assert!(
                (v - d).abs() <= range / 65535.0,
                "{name} at ({x},{y}): {v} vs {d}"
            );
        }
        // row-major with y ascending
        assert!(csv[0].1 < csv[csv.len() - 1].1);
    }
}

#[test]
fn every_file_is_stamped() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let (code, err) = run_in(&[
        "select",
        "--config",
        &cfg("select.toml"),
        "--seed",
        "5",
        "--out",
        out,
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, err) = run_in(&[
        "reconstruct",
        "--config",
        &cfg("reconstruct-csv.toml"),
        "--seed",
        "5",
        "--out",
        out,
    ]);
    assert_eq!(code, 0, "{err}");
    let files = dir_files(tmp.path());
    assert!(files.len() >= 8);
    for (name, bytes) in files {
        let text = String::from_utf8_lossy(&bytes);
        let mut lines = text.lines();
        let first = if name.ends_with(".pgm") {
            assert_eq!(lines.next(), Some("P5"));
            lines.next().unwrap()
        } else {
            lines.next().unwrap()
        };
        assert!(
            first.starts_with("# fieldsense config_hash="),
            "{name}: {first}"
        );
        assert!(first.ends_with(" seed=5"), "{name}: {first}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let (code, err) = run_in(&[
            "select",
            "--config",
            &cfg("select.toml"),
            "--seed",
            seed,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    let sa = std::fs::read_to_string(a.join("selection.csv")).unwrap();
    let sb = std::fs::read_to_string(b.join("selection.csv")).unwrap();
    assert!(sa.starts_with("# fieldsense") && sa.contains("seed=1\n"));
    assert_ne!(sa, sb);
}

#[test]
fn select_lists_every_sensor_and_meets_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, err) = run_in(&[
        "select",
        "--config",
        &cfg("select.toml"),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let sel = std::fs::read_to_string(tmp.path().join("selection.csv")).unwrap();
    let lines: Vec<&str> = sel.lines().collect();
    assert_eq!(lines[1], "id,network,cost,active");
    assert_eq!(lines.len(), 2 + 100);
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let get = |k: &str| -> String {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{k},")))
            .unwrap()
            .to_string()
    };
    assert_eq!(get("feasible"), "true");
    let achieved: f64 = get("achieved_mse").parse().unwrap();
    let qos: f64 = get("qos_var").parse().unwrap();
    assert!(achieved < qos);
    let trace = std::fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().nth(1), Some("iter,beta_t,best_u,p_mean"));
}

#[test]
fn infeasible_selection_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs_dir().join("select.toml"))
        .unwrap()
        .replace("qos_var = 4.0", "qos_var = 1e-9");
    let path = tmp.path().join("c.toml");
    std::fs::write(&path, text).unwrap();
    let out = tmp.path().join("out");
    let (code, _) = run_in(&[
        "select",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("feasible,false"));
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    // task kind does not match the subcommand
    assert_eq!(
        run_in(&["reconstruct", "--config", &cfg("select.toml"), "--out", out]).0,
        2
    );
    // missing config
    assert_eq!(
        run_in(&["select", "--config", "/nonexistent.toml", "--out", out]).0,
        2
    );
    assert_eq!(run_in(&["select", "--out", out]).0, 2);
    // bad flag
    assert_eq!(run_in(&["select", "--seed", "minus-one"]).0, 2);

    let bad_field = tmp.path().join("bad.toml");
    std::fs::write(
        &bad_field,
        std::fs::read_to_string(configs_dir().join("select.toml"))
            .unwrap()
            .replace("lengthscale = 20.0", "lengthscale = -1.0"),
    )
    .unwrap();
    let (code, err) = run_in(&[
        "select",
        "--config",
        bad_field.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("prior.kernel.lengthscale"), "{err}");

    // schema error in the sensor table names the line
    std::fs::write(
        tmp.path().join("s.csv"),
        "id,x,y,network,noise_std,threshold,cost\na,0,0,H,0.1,0.5,1\n",
    )
    .unwrap();
    let c = tmp.path().join("csv.toml");
    std::fs::write(
        &c,
        std::fs::read_to_string(configs_dir().join("reconstruct-csv.toml"))
            .unwrap()
            .replace("sensors-example.csv", "s.csv"),
    )
    .unwrap();
    let (code, err) = run_in(&["reconstruct", "--config", c.to_str().unwrap(), "--out", out]);
    assert_eq!(code, 2);
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn experiment_outputs_are_tidy() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.toml");
    std::fs::write(
        &path,
        std::fs::read_to_string(configs_dir().join("mse-vs-counts.toml"))
            .unwrap()
            .replace("seeds = 20", "seeds = 3")
            .replace("empirical_draws = 50", "empirical_draws = 2"),
    )
    .unwrap();
    let out = tmp.path().join("o");
    let (code, err) = run_in(&[
        "experiment",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = std::fs::read_to_string(out.join("mse_vs_counts.csv")).unwrap();
    // two sweeps x four counts x three seeds, plus stamp and header
    assert_eq!(rows.lines().count(), 2 + 2 * 4 * 3);

    let path = tmp.path().join("c.toml");
    std::fs::write(
        &path,
        std::fs::read_to_string(configs_dir().join("cem-vs-optimal.toml"))
            .unwrap()
            .replace("instances = 100", "instances = 2"),
    )
    .unwrap();
    let (code, err) = run_in(&[
        "experiment",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = std::fs::read_to_string(out.join("cem_vs_optimal.csv")).unwrap();
    // instances x qos values x iterations
    assert_eq!(rows.lines().count(), 2 + 2 * 6 * 10);
    assert_eq!(
        rows.lines().nth(1),
        Some("instance,layout_seed,qos_var,iter,cem_best_u,optimal_u,feasible,hit")
    );
}

#[test]
fn oracle_subcommand_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, err) = run_in(&[
        "oracle",
        "--seed",
        "3",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = std::fs::read_to_string(tmp.path().join("oracle.csv")).unwrap();
    assert!(rows.lines().skip(2).all(|l| l.ends_with(",1")));
}
