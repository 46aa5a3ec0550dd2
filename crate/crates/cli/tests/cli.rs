use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hhg(args: &[&str]) -> Output {
    hhg_env(args, &[])
}

fn hhg_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hhg"));
    cmd.args(args).env_remove("HHG_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(out: Output) -> Output {
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn simulate(dir: &TempDir, name: &str, n: usize, events: usize, seed: u64) -> (String, String) {
    let ev = path(dir, &format!("{name}.csv"));
    let truth = path(dir, &format!("{name}.truth.json"));
    ok(hhg(&[
        "simulate",
        "--n",
        &n.to_string(),
        "--N",
        &events.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        &ev,
        "--truth",
        &truth,
    ]));
    (ev, truth)
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, ta) = simulate(&dir, "a", 15, 300, 7);
    let (b, tb) = simulate(&dir, "b", 15, 300, 7);
    let (c, _) = simulate(&dir, "c", 15, 300, 8);
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&ta), read(&tb));
    assert_ne!(read(&a), read(&c));
    let text = String::from_utf8(read(&a)).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 301);
}

#[test]
fn pipeline_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (ev, truth) = simulate(&dir, "ev", 8, 150, 3);
    let mut outputs = Vec::new();
    for (tag, threads) in [("x", "1"), ("y", "4"), ("z", "1")] {
        let rep = path(&dir, &format!("{tag}.rep.json"));
        let diag = path(&dir, &format!("{tag}.diag.json"));
        let env = [("HHG_THREADS", threads)];
        ok(hhg_env(
            &[
                "fit",
                "--events",
                &ev,
                "--mode",
                "hhg-b",
                "--epochs",
                "40",
                "--train-fraction",
                "0.8",
                "--out",
                &rep,
            ],
            &env,
        ));
        let eval = ok(hhg_env(
            &["evaluate", "--events", &ev, "--report", &rep, "--train-fraction", "0.8"],
            &env,
        ));
        ok(hhg_env(
            &[
                "diagnose",
                "--events",
                &ev,
                "--report",
                &rep,
                "--truth",
                &truth,
                "--train-fraction",
                "0.8",
                "--out",
                &diag,
            ],
            &env,
        ));
        outputs.push((read(&rep), eval.stdout, read(&diag)));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn fit_report_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let (ev, _) = simulate(&dir, "ev", 6, 120, 11);
    let rep = path(&dir, "rep.json");
    let model = path(&dir, "model.json");
    ok(hhg(&[
        "fit",
        "--events",
        &ev,
        "--mode",
        "hhg-a",
        "--epochs",
        "12",
        "--out",
        &rep,
        "--model-out",
        &model,
    ]));

    let report: serde_json::Value = serde_json::from_slice(&read(&rep)).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["config"]["mode"], "hhg-a");
    assert_eq!(report["train_ll"].as_array().unwrap().len(), 12);
    assert_eq!(report["branching"].as_array().unwrap().len(), 120);
    assert_eq!(
        report["best_model"],
        serde_json::from_slice::<serde_json::Value>(&read(&model)).unwrap()
    );

    let emb = path(&dir, "emb.csv");
    ok(hhg(&[
        "export",
        "--what",
        "embedding",
        "--model",
        &model,
        "--out",
        &emb,
    ]));
    let text = String::from_utf8(read(&emb)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "type_label,role,coord_1,coord_2");
    assert_eq!(lines.len(), 1 + 2 * 6);
    assert!(lines[1].starts_with("t0,reception,"));
    assert!(lines[7].starts_with("t0,influence,"));

    let curve = path(&dir, "curve.csv");
    ok(hhg(&["export", "--what", "curve", "--report", &rep, "--out", &curve]));
    let text = String::from_utf8(read(&curve)).unwrap();
    assert_eq!(text.lines().next(), Some("epoch,train_ll"));
    assert_eq!(text.lines().count(), 13);

    let diag = path(&dir, "diag.json");
    let qq = path(&dir, "qq.csv");
    ok(hhg(&["diagnose", "--events", &ev, "--model", &model, "--out", &diag]));
    ok(hhg(&["export", "--what", "qq", "--diagnostics", &diag, "--out", &qq]));
    assert!(String::from_utf8(read(&qq))
        .unwrap()
        .starts_with("empirical,theoretical\n"));

    let again = path(&dir, "again.csv");
    ok(hhg(&["export", "--what", "events", "--events", &ev, "--out", &again]));
    assert_eq!(read(&again), read(&ev));
}

#[test]
fn frozen_embedding_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let (ev, _) = simulate(&dir, "ev", 3, 80, 2);
    let coords = path(&dir, "geo.csv");
    std::fs::write(&coords, "type_label,coord_1,coord_2\nt2,1.5,0\nt0,0,0\nt1,0,2.25\n").unwrap();
    let rep = path(&dir, "rep.json");
    ok(hhg(&[
        "fit",
        "--events",
        &ev,
        "--frozen-embedding",
        &coords,
        "--epochs",
        "10",
        "--out",
        &rep,
    ]));
    let report: serde_json::Value = serde_json::from_slice(&read(&rep)).unwrap();
    assert_eq!(report["config"]["mode"], "geo");
    let want = serde_json::json!([[0.0, 0.0], [0.0, 2.25], [1.5, 0.0]]);
    assert_eq!(report["final_model"]["reception_X"], want);
    assert_eq!(report["final_model"]["influence_Y"], want);

    let out = hhg(&[
        "fit",
        "--events",
        &ev,
        "--frozen-embedding",
        &coords,
        "--mode",
        "hhg-b",
        "--out",
        &rep,
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "run.toml");
    std::fs::write(
        &cfg,
        "[simulate]\nn = 4\nevents = 50\nseed = 9\n\n[fit]\nmode = \"frb\"\nepochs = 5\n",
    )
    .unwrap();
    let ev = path(&dir, "ev.csv");
    ok(hhg(&["simulate", "--config", &cfg, "--out", &ev]));
    let (direct, _) = simulate(&dir, "direct", 4, 50, 9);
    assert_eq!(read(&ev), read(&direct));

    let rep = path(&dir, "rep.json");
    ok(hhg(&[
        "fit", "--config", &cfg, "--events", &ev, "--epochs", "3", "--out", &rep,
    ]));
    let report: serde_json::Value = serde_json::from_slice(&read(&rep)).unwrap();
    assert_eq!(report["config"]["mode"], "frb");
    assert_eq!(report["train_ll"].as_array().unwrap().len(), 3);
    assert!(report["final_model"]["phi"].is_array());
}

#[test]
fn discretize_counts_file() {
    let dir = tempfile::tempdir().unwrap();
    let counts = path(&dir, "counts.csv");
    std::fs::write(
        &counts,
        "location,day,cumulative\nLA,0,0\nLA,1,5\nLA,2,25\nSF,0,0\nSF,4,40\n",
    )
    .unwrap();
    let ev = path(&dir, "ev.csv");
    ok(hhg(&["discretize", "--counts", &counts, "--out", &ev]));
    let text = String::from_utf8(read(&ev)).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0], "SF,1");
    assert!(rows[1].starts_with("LA,1.43"));
    // The last crossing lands on the final day, so the horizon sits just past it.
    assert!(text.contains("# horizon=4.000000004"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (ev, _) = simulate(&dir, "ev", 3, 40, 1);
    let out = path(&dir, "out.json");

    assert_eq!(code(&hhg(&[])), 1);
    assert_eq!(code(&hhg(&["fit", "--events", &ev, "--out", &out, "--bogus"])), 1);
    assert_eq!(
        code(&hhg(&["fit", "--events", &path(&dir, "missing.csv"), "--out", &out])),
        1
    );
    assert_eq!(
        code(&hhg(&[
            "fit",
            "--events",
            &ev,
            "--out",
            &path(&dir, "no/such/dir.json")
        ])),
        1
    );
    assert_eq!(code(&hhg(&["fit", "--events", &ev, "--epochs", "0", "--out", &out])), 1);
    assert_eq!(
        code(&hhg(&["fit", "--events", &ev, "--mode", "hhg-z", "--out", &out])),
        1
    );
    assert_eq!(
        code(&hhg_env(
            &["fit", "--events", &ev, "--out", &out],
            &[("HHG_THREADS", "zero")]
        )),
        1
    );
    assert_eq!(code(&hhg(&["evaluate", "--events", &ev, "--model", &out])), 1);

    let bad_cfg = path(&dir, "bad.toml");
    std::fs::write(&bad_cfg, "[fit]\nepoch = 3\n").unwrap();
    assert_eq!(
        code(&hhg(&["fit", "--events", &ev, "--config", &bad_cfg, "--out", &out])),
        1
    );

    let bad_events = path(&dir, "bad.csv");
    std::fs::write(&bad_events, "type,time\na,1\nb,-2\n").unwrap();
    let res = hhg(&["fit", "--events", &bad_events, "--out", &out]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains(":3:"));

    let bad_model = path(&dir, "bad.json");
    std::fs::write(&bad_model, "{\"schema_version\": 1}").unwrap();
    assert_eq!(
        code(&hhg(&[
            "evaluate",
            "--events",
            &ev,
            "--model",
            &bad_model,
            "--test-last",
            "1"
        ])),
        2
    );

    let counts = path(&dir, "counts.csv");
    std::fs::write(&counts, "location,day,cumulative\nLA,0,20\nLA,1,10\n").unwrap();
    assert_eq!(
        code(&hhg(&[
            "discretize",
            "--counts",
            &counts,
            "--out",
            &path(&dir, "c.csv")
        ])),
        2
    );

    let runaway = hhg(&[
        "simulate",
        "--n",
        "3",
        "--horizon",
        "1e6",
        "--event-cap",
        "10",
        "--out",
        &path(&dir, "r.csv"),
    ]);
    assert_eq!(code(&runaway), 3);
    assert!(!PathBuf::from(path(&dir, "r.csv")).exists());
}
