use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

/// `target/<profile>`, where cargo leaves the static library.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(manifest().join("include/adaftrl.h")).unwrap();
    for sym in [
        "typedef struct AdaftrlLearner AdaftrlLearner;",
        "ADAFTRL_STATUS_OK = 0",
        "adaftrl_learner_new(",
        "adaftrl_learner_step(",
        "adaftrl_learner_step_loss(",
        "adaftrl_learner_x(",
        "adaftrl_learner_free(",
        "adaftrl_run_config(",
        "adaftrl_string_free(",
        "adaftrl_last_error(",
        "size_t adaftrl_learner_dim(",
    ] {
        assert!(h.contains(sym), "missing {sym}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let lib = profile_dir().join("libadaftrl_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !cfg!(unix) || !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(manifest().join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
