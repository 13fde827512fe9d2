//! The generated header must declare every exported symbol and compile as C.

use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/qlap.h")
}

#[test]
fn declares_exports() {
    let text = std::fs::read_to_string(header()).expect("header generated by build.rs");
    for name in [
        "qlap_last_error",
        "qlap_version",
        "qlap_classify_regime",
        "qlap_minimize_global",
        "qlap_minimize_local",
        "qlap_min_result_free",
        "qlap_min_result_profile",
        "qlap_alpha0",
        "qlap_find_ground_state",
        "qlap_ground_state_free",
        "typedef struct QlapMinResult QlapMinResult",
        "QLAP_STATUS_NULL_POINTER",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn compiles_and_links_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    assert!(cc.status.success());
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let lib = [deps, deps.parent().unwrap()]
        .iter()
        .map(|d| d.join("libqlap_ffi.a"))
        .find(|p| p.exists())
        .expect("static library next to the test binary");
    let dir = tempfile_dir();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include "qlap.h"
int main(void) {
    QlapParams bad = { 1, 2.0, 4.5, 1.0, 1.0 };
    QlapRegime out;
    if (qlap_classify_regime(bad, &out) != QLAP_STATUS_INVALID_PARAMS) return 1;
    if (qlap_last_error() == NULL) return 2;
    QlapParams p = { 1, 3.0, 4.5, 1.0, 1.0 };
    QlapGroundState *gs = NULL;
    if (qlap_find_ground_state(p, 1.0, &gs) != QLAP_STATUS_OK) return 3;
    double u0 = qlap_ground_state_u0(gs);
    qlap_ground_state_free(gs);
    if (fabs(u0 - pow(2.25, 0.4)) > 1e-8) return 4;
    printf("%s\n", qlap_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to build");
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}

fn tempfile_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c-smoke");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
