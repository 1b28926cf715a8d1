use std::path::{Path, PathBuf};
use std::process::Command;

use fedgraph::federation::{DataConfig, RunConfig};
use fedgraph::synth::SbmConfig;

/// target/<profile>, where cargo leaves the shared library.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_drives_a_run_through_the_header() {
    let lib = profile_dir();
    if !lib.join("libfedgraph_ffi.so").exists() {
        eprintln!("shared library not built at {}; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib)
        .arg(format!("-Wl,-rpath,{}", lib.display()))
        .arg("-lfedgraph_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());

    let cfg = RunConfig {
        clients: 2,
        rounds: 2,
        local_batches_per_round: Some(2),
        data: DataConfig { synthetic: Some(SbmConfig { nodes: 40, ..Default::default() }), ..Default::default() },
        ..Default::default()
    };
    let config = dir.path().join("run.toml");
    std::fs::write(&config, cfg.to_toml().unwrap()).unwrap();
    let out = Command::new(&exe).arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields[0], "40");
    assert_eq!(fields[1], (2 * cfg.embedding.skipgram.dimension).to_string());
    assert!(fields[3].starts_with('n'));
}
