use std::process::Command;

use onebit_cli::{exit, run};

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
fn onebit(args: &[&str]) -> (u8, String, String) {
    let mut argv = vec!["onebit"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

/// Data rows of a CSV document, after the metadata and header lines.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# onebit "));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn kl(p: f64, q: f64) -> f64 {
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

#[test]
fn cue_symmetric_noncoherent_is_zero() {
    let (code, out, _) = onebit(&["cue", "--case", "symmetric-noncoherent", "--sigma-sq", "1"]);
    assert_eq!(code, exit::OK);
    assert_eq!(json(&out)["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn cue_symmetric_coherent_constant() {
    let (code, out, _) = onebit(&["cue", "--case", "symmetric-coherent", "--sigma-sq", "1"]);
    assert_eq!(code, exit::OK);
    let v = json(&out)["value"].as_f64().unwrap();
    assert!((v - 0.63662).abs() < 1e-3, "{v}");
}

#[test]
fn cue_noncoherent_radial_range() {
    let (code, out, _) = onebit(&["cue", "--case", "noncoherent-radial", "--sigma-sq", "1", "--xi2-max", "1000"]);
    assert_eq!(code, exit::OK);
    let r = json(&out);
    let inv_e = (-1.0f64).exp();
    let v = r["value"].as_f64().unwrap();
    assert!(v >= inv_e - 5e-3 && v < inv_e, "{v}");
    assert_eq!(r["supremum_at_infinity"], true);
}

#[test]
fn cue_json_mirrors_result_fields() {
    let (_, out, _) = onebit(&["cue", "--case", "percomponent-noncoherent"]);
    let r = json(&out);
    let keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
    for field in [
        "case",
        "sigma_sq",
        "value",
        "probe_energy",
        "threshold",
        "bound_checks",
        "supremum_at_infinity",
        "largest_probe_energy",
        "max_evaluated",
        "evaluations",
        "diagnostics",
        "metadata",
    ] {
        assert!(keys.contains(&field), "{field} missing from {keys:?}");
    }
    assert_eq!(r["case"], "percomponent-noncoherent");
    assert_eq!(r["metadata"]["seed"], "1");
}

#[test]
fn cue_csv_is_self_describing() {
    let (code, out, _) = onebit(&["cue", "--case", "noncoherent-radial", "--format", "csv", "--sigma-sq", "2"]);
    assert_eq!(code, exit::OK);
    assert!(!out.contains('\r'));
    let meta = out.lines().next().unwrap();
    for key in ["case=noncoherent-radial", "sigma_sq=2", "seed=1", "xi2=0.02:2000:41", "tau=0.02:20000:49"] {
        assert!(meta.contains(key), "{meta}");
    }
    let (header, rows) = csv_rows(&out);
    assert_eq!(header[2], "value");
    let v: f64 = rows[0][2].parse().unwrap();
    assert!((v - 0.5 * 0.367_589_557).abs() < 1e-8, "{v}");
}

#[test]
fn sweep_single_point() {
    let (code, out, _) = onebit(&[
        "sweep", "--xi2-min", "3", "--xi2-max", "3", "--xi2-points", "1", "--tau-min", "4", "--tau-max", "4",
        "--tau-points", "1",
    ]);
    assert_eq!(code, exit::OK);
    let (header, rows) = csv_rows(&out);
    assert_eq!(
        header,
        ["xi2", "threshold", "divergence", "divergence_per_energy", "unquantized_bound", "exp_bound"]
    );
    assert_eq!(rows.len(), 1);
    let d: f64 = rows[0][2].parse().unwrap();
    let oracle = kl((-1.0f64).exp(), (-4.0f64).exp());
    assert!((d - oracle).abs() < 1e-11, "{d} vs {oracle}");
    // Twelve significant digits.
    assert_eq!(rows[0][2], "0.825385365269");
}

#[test]
fn sweep_zero_threshold_row() {
    let (code, out, _) = onebit(&[
        "sweep", "--xi2-min", "3", "--xi2-max", "3", "--xi2-points", "1", "--tau-min", "0", "--tau-max", "0",
        "--tau-points", "1",
    ]);
    assert_eq!(code, exit::OK);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows[0][2], "0");
}

#[test]
fn sweep_rows_respect_both_bounds() {
    for case in ["noncoherent-radial", "percomponent-noncoherent", "coherent-radial"] {
        let (code, out, _) = onebit(&["sweep", "--case", case, "--xi2-points", "12", "--tau-points", "10"]);
        assert_eq!(code, exit::OK, "{case}");
        let (_, rows) = csv_rows(&out);
        assert!(!rows.is_empty());
        for r in rows {
            let v: Vec<f64> = r.iter().map(|s| s.parse().unwrap_or(f64::INFINITY)).collect();
            // Columns carry 12 digits, hence the relative slack.
            assert!(v[2] <= v[4] * (1.0 + 1e-11) && v[2] <= v[5] * (1.0 + 1e-11), "{case}: {r:?}");
            if case == "coherent-radial" {
                // Only the unquantized divergence xi2/sigma^2 applies.
                assert_eq!((v[4], r[5].as_str()), (v[0], ""));
            }
        }
    }
}

#[test]
fn sweep_unwritable_path_is_io_error() {
    let (code, _, err) = onebit(&["sweep", "--out", "/nonexistent-dir/sweep.csv"]);
    assert_eq!(code, exit::IO);
    assert!(err.contains("cannot write"));
}

#[test]
fn output_goes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cue.json");
    let (code, out, _) = onebit(&["cue", "--case", "symmetric-coherent", "--out", path.to_str().unwrap()]);
    assert_eq!(code, exit::OK);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(json(&text)["case"], "symmetric-coherent");
}

#[test]
fn usage_errors() {
    let cases: [&[&str]; 8] = [
        &["cue", "--case", "no-such-case"],
        &["cue"],
        &["cue", "--case", "noncoherent-radial", "--sigma-sq", "-1"],
        &["cue", "--case", "noncoherent-radial", "--xi2-min", "5", "--xi2-max", "1"],
        &["cue", "--case", "coherent-radial", "--mu", "1.5"],
        &["mc", "--trials", "100"],
        &["sweep", "--tau-min", "1", "--tau-max", "2", "--tau-points", "1"],
        &["frobnicate"],
    ];
    for args in cases {
        let (code, _, err) = onebit(args);
        assert_eq!(code, exit::USAGE, "{args:?}");
        assert!(!err.is_empty());
    }
    let (code, out, _) = onebit(&["--help"]);
    assert_eq!(code, exit::OK);
    assert!(out.contains("verify"));
}

#[test]
fn mc_silent_input_and_sign_quantizer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mc.csv");
    let (code, _, _) = onebit(&["mc", "--trials", "200000", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code, exit::OK);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&path)
        .unwrap();
    let mut seen_sign = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let z: f64 = rec[11].parse().unwrap();
        if &rec[0] == "1" {
            // Radial threshold T^2 = sigma^2 with no input.
            assert_eq!(&rec[3], "radial");
            assert_eq!((&rec[4], &rec[5]), ("0", "0"));
            assert!(z.abs() <= 4.0, "{z}");
        }
        if &rec[2] == "symmetric-noncoherent" {
            seen_sign += 1;
            let p: f64 = rec[9].parse().unwrap();
            assert!((p - 0.5).abs() < 5e-3, "{p}");
            assert_eq!(&rec[8], "0.5");
        }
    }
    assert_eq!(seen_sign, 4);
}

#[test]
fn mc_is_reproducible() {
    let args = ["mc", "--case", "percomponent-coherent", "--trials", "50000", "--seed", "9"];
    let (_, a, _) = onebit(&args);
    let (_, b, _) = onebit(&args);
    assert_eq!(a, b);
    let (_, c, _) = onebit(&["mc", "--case", "percomponent-coherent", "--trials", "50000", "--seed", "10"]);
    assert_ne!(a, c);
}

#[test]
fn verify_passes_and_is_deterministic() {
    let (code, a, _) = onebit(&["verify", "--seed", "7"]);
    assert_eq!(code, exit::OK, "{a}");
    assert_eq!(a.lines().filter(|l| l.starts_with("[PASS]")).count(), 11);
    let (_, b, _) = onebit(&["verify", "--seed", "7"]);
    assert_eq!(a, b);
}

#[test]
fn verify_self_test_fails() {
    let (code, out, _) = onebit(&["verify", "--self-test-perturb-marcum"]);
    assert_eq!(code, exit::ASSERTION);
    assert!(out.contains("[FAIL]  7"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_onebit");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();
    assert_eq!(status(&["cue", "--case", "symmetric-noncoherent"]), 0);
    assert_eq!(status(&["cue", "--case", "nope"]), 64);
    assert_eq!(status(&["sweep", "--out", "/nonexistent-dir/x.csv"]), 73);
}
