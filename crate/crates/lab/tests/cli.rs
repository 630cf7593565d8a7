//! End-to-end CLI behavior: exit codes, determinism of scalar outputs, field
//! file round-trips, and sweep isolation.

use std::path::Path;
use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anderson-lab"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const BER_FIELD: &str = r#"{"rule":{"kind":"iid","dist":{"components":[
    {"kind":"atom","x":0.0,"w":0.5},{"kind":"atom","x":1.0,"w":0.5}],
    "m_bound":1.0}},"m_bound":1.0,"sigma2_min":0.2}"#;

fn wegner_config(trials: usize) -> String {
    format!(
        r#"{{"schema_version":1,"seed":11,"kind":"wegner-mc",
            "cube":{{"radius":2}},
            "potential":{{"kind":"field","field":{BER_FIELD}}},
            "ebar":0.05,"threshold_exponent":2.0,"trials":{trials}}}"#
    )
}

#[test]
fn zero_trials_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.json");
    write(&cfg, &wegner_config(0));
    let out = lab()
        .args(["wegner-mc", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, "{this is not json");
    let out = lab()
        .args(["wegner-mc", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.json");
    write(&cfg, &wegner_config(5));
    let out = lab()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_configs_reproduce_scalars_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.json");
    write(&cfg, &wegner_config(12));
    let run = || {
        let out = lab()
            .args(["wegner-mc", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        serde_json::to_string(&v["scalars"]).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn thread_count_does_not_change_scalars() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.json");
    write(&cfg, &wegner_config(10));
    let run = |threads: &str| {
        let out = lab()
            .args(["wegner-mc", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        serde_json::to_string(&v["scalars"]).unwrap()
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    write(
        &cfg,
        &format!(
            r#"{{"schema_version":1,"seed":1,"kind":"spectrum",
                "cube":{{"radius":1}},
                "potential":{{"kind":"field","field":{BER_FIELD}}}}}"#
        ),
    );
    let run = |extra: &[&str]| {
        let out = lab()
            .args(["spectrum", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .args(extra)
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["scalars"]["min"].as_f64().unwrap()
    };
    let base = run(&[]);
    let same = run(&["--seed", "1"]);
    let other = run(&["--seed", "2"]);
    assert_eq!(base, same);
    assert_ne!(base, other);
}

#[test]
fn spectrum_csv_matches_tensor_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("free.json");
    write(
        &cfg,
        r#"{"schema_version":1,"seed":1,"kind":"spectrum",
            "cube":{"radius":1},"potential":{"kind":"constant","value":0.0}}"#,
    );
    let out = lab()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let table = v["tables"][0]["path"].as_str().unwrap();
    let mut rdr = csv::Reader::from_path(table).unwrap();
    let got: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[1].parse::<f64>().unwrap())
        .collect();
    assert_eq!(got.len(), 27);
    // tensor oracle: sums of 1D Dirichlet path eigenvalues, descending
    let p: Vec<f64> = (1..=3)
        .map(|j| 2.0 - 2.0 * (j as f64 * std::f64::consts::PI / 4.0).cos())
        .collect();
    let mut want = Vec::new();
    for a in &p {
        for b in &p {
            for c in &p {
                want.push(a + b + c);
            }
        }
    }
    want.sort_by(|x, y| y.total_cmp(x));
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-10, "{g} vs {w}");
    }
}

#[test]
fn field_file_round_trips_and_is_usable() {
    let dir = tempfile::tempdir().unwrap();
    let field_path = dir.path().join("field.json");
    write(&field_path, BER_FIELD);
    // parse -> serialize -> parse gives the identical structure
    let spec: anderson_lab::config::FieldSpec =
        serde_json::from_str(BER_FIELD).unwrap();
    let json = serde_json::to_string(&spec).unwrap();
    let reparsed: anderson_lab::config::FieldSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(spec, reparsed);

    let cfg = dir.path().join("w.json");
    write(
        &cfg,
        &format!(
            r#"{{"schema_version":1,"seed":4,"kind":"wegner-mc",
                "cube":{{"radius":2}},
                "potential":{{"kind":"field-file","path":{:?}}},
                "ebar":0.05,"threshold_exponent":2.0,"trials":6}}"#,
            field_path.to_string_lossy()
        ),
    );
    let out = lab()
        .args(["wegner-mc", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
}

#[test]
fn sweep_isolates_failures_and_derives_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.json");
    // second entry is broken (zero trials); first and third still run
    write(
        &sweep,
        &format!(
            r#"{{"schema_version":1,"master_seed":9,"configs":[
                {good},
                {bad},
                {good2}
            ]}}"#,
            good = wegner_config(4),
            bad = wegner_config(0),
            good2 = wegner_config(5),
        ),
    );
    let out = lab()
        .args(["sweep", "--config"])
        .arg(&sweep)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    // the failing entry dominates the exit code
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("entry 0: ok"));
    assert!(stdout.contains("entry 2: ok"));
}

#[test]
fn sweep_of_one_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let master_seed = 9u64;
    let derived = anderson_core::rng::substream(master_seed, 0);
    let sweep = dir.path().join("sweep.json");
    write(
        &sweep,
        &format!(
            r#"{{"schema_version":1,"master_seed":{master_seed},"configs":[{}]}}"#,
            wegner_config(8)
        ),
    );
    let sweep_out = lab()
        .args(["sweep", "--config"])
        .arg(&sweep)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(sweep_out.status.success());

    let cfg = dir.path().join("w.json");
    write(&cfg, &wegner_config(8));
    let run_out = lab()
        .args(["wegner-mc", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .args(["--seed", &derived.to_string()])
        .output()
        .unwrap();
    assert!(run_out.status.success());
    let run_v: serde_json::Value = serde_json::from_slice(&run_out.stdout).unwrap();
    // the sweep member wrote its record under the derived seed; re-running
    // standalone with that seed reproduces the same exceed count
    let sweep_records: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name.starts_with("wegner-mc-") && name.ends_with(".json")).then_some(p)
        })
        .collect();
    let mut found = false;
    for rec in sweep_records {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(rec).unwrap()).unwrap();
        if v["seed"].as_u64() == Some(derived) {
            assert_eq!(v["scalars"]["exceed_count"], run_v["scalars"]["exceed_count"]);
            found = true;
        }
    }
    assert!(found, "derived-seed record not written");
}

#[test]
fn parallelism_levels_agree_on_sweep_scalars() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let mk = |dir: &Path| {
        let sweep = dir.join("sweep.json");
        write(
            &sweep,
            &format!(
                r#"{{"schema_version":1,"master_seed":3,"configs":[{},{}]}}"#,
                wegner_config(6),
                wegner_config(7)
            ),
        );
        sweep
    };
    let run = |sweep: &Path, dir: &Path, threads: &str| {
        let out = lab()
            .args(["sweep", "--config"])
            .arg(sweep)
            .arg("--out")
            .arg(dir)
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert!(out.status.success());
        // gather all scalar blocks, keyed by fingerprint+seed
        let mut v: Vec<String> = std::fs::read_dir(dir)
            .unwrap()
            .filter_map(|e| {
                let p = e.unwrap().path();
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                if name.starts_with("wegner-mc-") && name.ends_with(".json") {
                    let rec: serde_json::Value =
                        serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
                    Some(format!("{}:{}", rec["seed"], rec["scalars"]))
                } else {
                    None
                }
            })
            .collect();
        v.sort();
        v
    };
    let s1 = mk(dir1.path());
    let s2 = mk(dir2.path());
    assert_eq!(run(&s1, dir1.path(), "1"), run(&s2, dir2.path(), "2"));
}
