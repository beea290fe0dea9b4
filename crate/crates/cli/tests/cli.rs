use std::path::Path;
use std::process::{Command, Output};

fn phonon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phonon"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

const ARRAY: &str = "[array]\nspacing_m = 1550e-9\ntrap_frequency_hz = 1e5\n";

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn invalid_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{ARRAY}sites = 1\n[kick]\nsite = 1\n"));
    let out = phonon(dir.path(), &["couplings", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("array.sites"), "{err}");

    let cfg = write_config(dir.path(), "[array]\nsites = 4\n");
    let out = phonon(dir.path(), &["couplings", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spacing_m"));

    let cfg = write_config(dir.path(), "[array]\nsites = [\n");
    let out = phonon(dir.path(), &["couplings", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn empty_angle_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = phonon(dir.path(), &["forces", "--theta", ""]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_phonon"))
        .args(["couplings", "--out"])
        .arg(dir.path())
        .env("PHONON_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nearest_topology_gives_tridiagonal_couplings() {
    let dir = tempfile::tempdir().unwrap();
    let out = phonon(dir.path(), &["couplings", "--coupling", "nearest_neighbor"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = table(&dir.path().join("couplings.csv"));
    assert_eq!(header.len(), 16);
    for (i, row) in rows.iter().enumerate() {
        for (j, g) in row[1..].iter().enumerate() {
            if i.abs_diff(j) == 1 {
                assert!(*g != 0.0);
            } else {
                assert_eq!(*g, 0.0, "g_{}{}", i + 1, j + 1);
            }
        }
    }
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn two_sites_have_one_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{ARRAY}sites = 2\n[kick]\nsite = 1\n"));
    let out = phonon(dir.path(), &["couplings", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (_, rows) = table(&dir.path().join("couplings.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][2], rows[1][1]);
    assert!(rows[0][2] != 0.0);
}

#[test]
fn no_kick_leaves_populations_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{ARRAY}sites = 5\n\n[kick]\nsite = 0\nbackground_quanta = 0.5\n\n[run]\nt_end = 5\nsamples = 20\n"));
    let out = phonon(dir.path(), &["evolve", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = table(&dir.path().join("trajectory.csv"));
    assert_eq!(header[0], "t");
    assert!(rows.len() > 2);
    for row in &rows {
        for n in &row[1..] {
            assert!((n - 0.5).abs() < 1e-9, "{n}");
        }
    }
}

#[test]
fn scatter_writes_map_and_locus() {
    let dir = tempfile::tempdir().unwrap();
    let out = phonon(dir.path(), &["scatter", "--grid", "-1.5:1.5:7,-3:3:7"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (_, map) = table(&dir.path().join("eta_map.csv"));
    assert_eq!(map.len(), 49);
    let (header, locus) = table(&dir.path().join("locus.csv"));
    assert_eq!(header[..3], ["delta", "gamma1", "gamma2"]);
    for row in locus {
        assert!((row[1] - 2.0 * (4.0 - row[0] * row[0]).sqrt()).abs() < 1e-8);
        assert!(row[2].is_nan());
    }
}
