//! End-to-end runs of the `mixdio` binary.

use std::process::{Command, Output};

use serde_json::Value;

fn mixdio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixdio"))
        .args(args)
        .env_remove("MIXDIO_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = mixdio(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn rational(v: &Value) -> (i64, i64) {
    let (n, d) = v.as_str().unwrap().split_once('/').unwrap();
    (n.parse().unwrap(), d.parse().unwrap())
}

#[test]
fn dimension_reports_jb_exponent_and_bracket() {
    let v = json(&["dimension", "--weights", "1/2,1/2", "--tau", "3/2", "--ratios", "2"]);
    assert_eq!(v["schema"], "mixdio/1");
    let r = &v["result"];
    assert_eq!(r["jb_dimension"], "5/7");
    let (ln, ld) = rational(&r["s_star"]["lo"]);
    let (hn, hd) = rational(&r["s_star"]["hi"]);
    assert!(ln * 7 <= 5 * ld && 5 * hd <= hn * 7);
    assert_eq!(r["contains_jb_dimension"], true);
    assert_eq!(v["config"]["psi"], "power:3/2");
}

#[test]
fn counterexample_blocks_exceed_one_with_bad_measure_two_alpha() {
    let v = json(&["counterexample", "--blocks", "2", "--weights", "1/2,1/2", "--ratios", "2"]);
    let blocks = v["result"]["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 2);
    for b in blocks {
        assert_eq!(b["block_sum_exceeds_one"], true);
        let (an, ad) = rational(&b["alpha"]);
        let (bn, bd) = rational(&b["bad_measure"]);
        assert_eq!(bn * ad, 2 * an * bd);
    }
    assert_eq!(v["result"]["cumulative_sum_exceeds_T"], true);
}

#[test]
fn single_block_defaults() {
    let v = json(&["counterexample"]);
    let b = &v["result"]["blocks"][0];
    assert_eq!(b["alpha"], "2/5");
    assert_eq!(b["bad_measure"], "4/5");
    assert!(b["block_sum"].is_string());
}

#[test]
fn measure_of_covering_layer_is_one() {
    let v = json(&["measure", "--psi", "power:1", "--weights", "1/2,1/2", "--ratios", "2", "--range", "3:4"]);
    assert_eq!(v["result"]["measure"], "1/1");
    assert_eq!(v["result"]["exact"], true);
}

#[test]
fn dirichlet_output_fields() {
    let v = json(&["dirichlet", "--x", "1/3", "--k", "5"]);
    let r = &v["result"];
    for key in ["x", "c", "k", "m_k", "p", "q", "err_num", "err_den"] {
        assert!(!r[key].is_null(), "missing {key}");
    }
}

#[test]
fn csv_output_has_header() {
    let out = mixdio(&["enumerate", "--range", "0:20", "--csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,pav_index,psi_lo,psi_hi"));
    assert_eq!(lines.next(), Some("2,1,1/2,1/2"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mixdio(&["bogus"]).status.code(), Some(2));
    assert_eq!(mixdio(&["measure"]).status.code(), Some(2));
    assert_eq!(mixdio(&["dimension", "--tau", "x"]).status.code(), Some(2));
}

#[test]
fn computation_errors_exit_one_with_json() {
    let out = mixdio(&["dimension", "--tau", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["kind"], "empty_set_regime");
    assert_eq!(v["schema"], "mixdio/1");
}

#[test]
fn config_file_supplies_defaults() {
    let path = std::env::temp_dir().join(format!("mixdio-cli-test-{}.cfg", std::process::id()));
    std::fs::write(&path, "tau = 3/2\nratios = 2\n").unwrap();
    let p = path.to_str().unwrap();
    let v = json(&["dimension", "--config", p]);
    assert_eq!(v["result"]["jb_dimension"], "5/7");
    let v = json(&["dimension", "--config", p, "--tau", "1"]);
    assert_eq!(v["result"]["jb_dimension"], "1/1");
    std::fs::remove_file(path).unwrap();
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let args = ["measure", "--tau", "3/2", "--ratios", "2,3", "--range", "100:900"];
    let a = mixdio(&args).stdout;
    let b = mixdio(&args).stdout;
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    let c = mixdio(&threaded).stdout;
    assert_eq!(a, b);
    assert_eq!(a, c);
}
