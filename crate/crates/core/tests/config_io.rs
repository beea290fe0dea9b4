use std::path::PathBuf;

use nalgebra::DMatrix;
use phonon_core::config::RunConfig;
use phonon_core::io::{fmt_f64, read_snapshots, write_snapshot, CsvTable};
use phonon_core::Complex;
use proptest::prelude::*;

fn shipped_configs() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths
}

#[test]
fn shipped_configs_load_and_round_trip() {
    let paths = shipped_configs();
    assert!(!paths.is_empty());
    for path in paths {
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        assert_eq!(cfg.trap_frequencies().len(), cfg.array.sites);
        assert_eq!(cfg.initial_occupations().len(), cfg.array.sites);
    }
}

#[test]
fn reference_round_trips() {
    let cfg = RunConfig::reference();
    assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn bad_values_name_the_field() {
    let mut text = RunConfig::reference().to_toml();
    text = text.replace("sites = 15", "sites = 1");
    let err = RunConfig::parse(&text).unwrap_err().to_string();
    assert!(err.contains("array.sites"), "{err}");

    let err = RunConfig::parse("[array]\nsites = \"many\"\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("line"), "{err}");

    let err = RunConfig::parse("[array]\nbogus = 1\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn csv_rows_are_exact() {
    let mut table = CsvTable::new(Vec::new(), &["t", "x"]).unwrap();
    table.row(&[0.1, -2.5e-300]).unwrap();
    let text = String::from_utf8(table.finish().unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x"));
    let values: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values, vec![0.1, -2.5e-300]);
}

proptest! {
    #[test]
    fn formatted_floats_parse_back(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn snapshots_round_trip(
        n in 1usize..5,
        values in prop::collection::vec(-1e6f64..1e6, 2 * 4 * 4 * 3),
        records in 1usize..4,
    ) {
        let mut buf = Vec::new();
        let mut written = Vec::new();
        for r in 0..records {
            let c = DMatrix::from_fn(n, n, |i, j| {
                let k = 2 * (r * 16 + i * n + j);
                Complex::new(values[k], values[k + 1])
            });
            write_snapshot(&mut buf, r as f64 * 0.5, &c).unwrap();
            written.push((r as f64 * 0.5, c));
        }
        prop_assert_eq!(read_snapshots(buf.as_slice(), n).unwrap(), written);
        prop_assert!(read_snapshots(&buf[..buf.len() - 1], n).is_err());
    }
}
