use std::path::Path;
use std::process::Command;

fn euler_lab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_euler-lab")).args(args).output().expect("spawn euler-lab");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn exit_codes_separate_success_config_errors_and_blowup() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let ok = write(tmp.path(), "ok.cfg", "system = couette_linear\nmodes = 1:0:1\nt_end = 2\n");
    assert_eq!(euler_lab(&["run", "--config", &ok, "--output-dir", out]).0, 0);
    assert!(Path::new(out).join("couette.csv").exists());
    assert!(Path::new(out).join("manifest.txt").exists());

    let unknown = write(tmp.path(), "bad.cfg", "system = euler2d\nt_end = 1\nviscosity = 0.1\n");
    assert_eq!(euler_lab(&["run", "--config", &unknown, "--output-dir", out]).0, 2);
    assert_eq!(euler_lab(&["selfsim", "--config", &ok, "--output-dir", out]).0, 2);

    let clm = write(tmp.path(), "clm.cfg", "system = clm\nn = 256\nt_end = 3\nomega_cap = 50\ntail_tol = 1\n");
    assert_eq!(euler_lab(&["run", "--config", &clm, "--output-dir", out]).0, 4);
    let manifest = std::fs::read_to_string(Path::new(out).join("manifest.txt")).unwrap();
    assert!(manifest.contains("status = completed: blow-up detected"));
}

#[test]
fn lemma_check_rejects_vanishing_weight() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "lemma.cfg", "system = lemma_check\nu_coeffs = 0, 1\n");
    let out = tmp.path().join("out");
    assert_eq!(euler_lab(&["lemma-check", "--config", &cfg, "--output-dir", out.to_str().unwrap()]).0, 2);
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("status = failed"));
}

#[test]
fn presets_and_validate_print_to_stdout() {
    let (code, text) = euler_lab(&["presets"]);
    assert_eq!(code, 0);
    for name in ["taylor_green", "couette", "clm_cosine", "heavy_over_light", "random_bandlimited"] {
        assert!(text.contains(name), "{name} missing from preset list");
    }
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "v.cfg", "system = ipm\nt_end = 1\n");
    let (code, text) = euler_lab(&["validate", "--config", &cfg]);
    assert_eq!(code, 0);
    assert!(text.contains("init = heavy_over_light"));
}
