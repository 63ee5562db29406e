use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn prony(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prony"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, clusters: &str, delta: &str) -> String {
    let sig = dir.join(format!("sig_{clusters}_{delta}.json"));
    let o = prony(&["gen", "--clusters", clusters, "--delta", delta, "--seed", "1", "-o", path(&sig)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path(&sig).to_string()
}

fn max_of(v: &Value) -> f64 {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).fold(0.0, f64::max)
}

#[test]
fn gen_writes_a_valid_signal() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("sig.json");
    let o = prony(&["gen", "--n", "3", "--clusters", "2,1", "--delta", "1e-2", "--seed", "1", "-o", path(&sig)]);
    assert_eq!(code(&o), 0);
    let s = prony_lab::io::read_signal(&sig).unwrap();
    assert_eq!(s.config.partition, vec![vec![0, 1], vec![2]]);

    let o = prony(&["gen", "--n", "1", "--json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["nodes"].as_array().unwrap().len(), 1);
}

#[test]
fn gen_rejects_bad_cluster_sum() {
    let o = prony(&["gen", "--n", "4", "--clusters", "2,1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sum to n"));
    let o = prony(&["gen", "--clusters", "30", "--delta", "0.5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn recover_noiseless_and_method_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let sig = gen(dir.path(), "1,1", "0.3");
    let o = prony(&["recover", "--signal", &sig, "--json"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert!(max_of(&r["result"]["node_errors"]) <= 1e-12);
    assert!(r["backward"].is_object());

    let sig = gen(dir.path(), "2,1", "0.05");
    let args = ["recover", "--signal", &sig, "--epsilon", "1e-13", "--seed", "4", "--json"];
    let c = json(&prony(&args));
    let mut h_args = args.to_vec();
    h_args.extend(["--method", "homogeneous"]);
    let h = json(&prony(&h_args));
    for (a, b) in c["result"]["nodes_used"].as_array().unwrap().iter().zip(h["result"]["nodes_used"].as_array().unwrap()) {
        let d = (a[0].as_f64().unwrap() - b[0].as_f64().unwrap()).hypot(a[1].as_f64().unwrap() - b[1].as_f64().unwrap());
        assert!(d <= 1e-10, "{d:e}");
    }
}

#[test]
fn projection_changes_isolated_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let sig = gen(dir.path(), "2,1", "1e-3");
    let base = ["recover", "--signal", &sig, "--epsilon", "1e-14", "--seed", "3", "--json"];
    let raw = json(&prony(&base));
    let mut p = base.to_vec();
    p.push("--project");
    let proj = json(&prony(&p));
    assert_eq!(raw["result"]["projected"], false);
    assert_eq!(proj["result"]["projected"], true);
    let a_raw = raw["result"]["amp_errors"][2].as_f64().unwrap();
    let a_proj = proj["result"]["amp_errors"][2].as_f64().unwrap();
    assert!(a_proj > 3.0 * a_raw, "{a_proj:e} vs {a_raw:e}");
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("zero.json");
    fs::write(
        &sig,
        r#"{"nodes":[[1.0,0.0],[0.0,1.0]],"amplitudes":[[1.0,0.0],[0.0,0.0]],
           "config":{"n":2,"partition":[[0],[1]],"delta":0.1,"tau":1.5,"bigT":1.4142135623730951,"eta":1.5,"ell_star":1},
           "amp_lo":0.0,"amp_hi":1.5}"#,
    )
    .unwrap();
    let o = prony(&["recover", "--signal", path(&sig)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fig2_preset_summary_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = prony(&["sweep", "--preset", "fig2", "--out-dir", path(&a), "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let s = json(&o);
    assert_eq!(s["pass"], true);
    let slope = |k: &str| s["fits"][k]["slope"].as_f64().unwrap();
    assert!((slope("kx_cluster") + 2.0).abs() <= 0.35);
    assert!((slope("ka_cluster") + 3.0).abs() <= 0.35);
    assert!(slope("kx_noncluster").abs() <= 0.3);

    let o = Command::new(env!("CARGO_BIN_EXE_prony"))
        .args(["sweep", "--preset", "fig2", "--out-dir", path(&b)])
        .env("PRONY_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for f in ["fig2.csv", "fig2_summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failing_checks_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    // a vanishing regime constant leaves no point to fit
    let o = prony(&[
        "sweep",
        "--preset",
        "fig3",
        "--set",
        "trials_per_point=1",
        "--set",
        "regime_c=1e-30",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn unknown_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = prony(&["sweep", "--preset", "fig2", "--set", "nonsense=1", "--out-dir", path(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown configuration key"));
    let o = prony(&["sweep", "--preset", "fig9", "--out-dir", path(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn spec_file_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"method":"classical","cluster_sizes":[2,1],"grid":{"delta":[0.01,0.02,0.04,0.06,0.08,0.1]},
           "epsilon":{"kind":"fixed","value":0.0},"omega":{"kind":"fixed","value":5.0},"trials_per_point":2}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = prony(&["sweep", "--spec", path(&spec), "--out-dir", path(&out), "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records = prony_lab::sweep::read_csv(fs::File::open(out.join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 6 * 2 * 3);
    assert!(records.iter().all(|r| r.kx.unwrap() < 1e-6 && r.ka.unwrap() < 1e-6));
}

#[test]
fn audits_pass() {
    let o = prony(&["verify-expansion", "--n", "3", "--seed", "5", "--json"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert!(r["max_rel_err"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["pass"], true);

    let o = prony(&["backward", "--trials", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));

    let o = prony(&["first-order", "--json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["entries"].as_array().unwrap().len(), 3);
}

#[test]
fn naive_command_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = prony(&["naive", "--ell", "2", "--out-dir", path(dir.path()), "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("naive_l2.csv").exists());
    assert_eq!(json(&o)["pass"], true);
}

#[test]
fn plot_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&prony(&["sweep", "--preset", "fig2", "--out-dir", path(d)])), 0);
    let csv = d.join("fig2.csv");
    let svg1 = d.join("p1.svg");
    let svg2 = d.join("p2.svg");
    for svg in [&svg1, &svg2] {
        let o = prony(&["plot", "--csv", path(&csv), "-o", path(svg)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&svg1).unwrap();
    assert_eq!(text.matches("<g>").count(), 3);
    assert_eq!(fs::read(&svg1).unwrap(), fs::read(&svg2).unwrap());
    assert_eq!(fs::read(d.join("p1_data.csv")).unwrap(), fs::read(d.join("p2_data.csv")).unwrap());

    let o = prony(&["plot", "--csv", path(&csv), "--nodes", "9", "-o", path(&d.join("x.svg"))]);
    assert_eq!(code(&o), 2);

    let bad = d.join("bad.csv");
    fs::write(&bad, "delta,kx\n0.1,1\n").unwrap();
    let o = prony(&["plot", "--csv", path(&bad), "-o", path(&d.join("y.svg"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing column"));
}
