use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{info, warn};

use phonon_core::config::RunConfig;
use phonon_core::dynamics::{evolve_auto, EvolutionSettings, SpectralPropagator};
use phonon_core::io::{fmt_f64, population_header, write_snapshot, CsvTable};
use phonon_core::lattice::{
    build_model, thermal_state, ArrayConfig, CouplingModel, CouplingSpec, CouplingTopology,
    DissipationSpec, SiteDissipation,
};
use phonon_core::optical_binding::binding_force;
use phonon_core::scattering::{
    asymmetry_map, reflection_pair, zero_reflection_locus, Hopping, Method,
};
use phonon_core::thermo::{
    detect_plateau, gge_predict, prethermal_model, spectral_asymmetry, FrequencyProfile,
    PlateauSettings,
};

use crate::manifest::RunManifest;
use crate::{Common, Failure};

const FEMTO: f64 = 1e15;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// `min:max:n` into `n` evenly spaced values; `n = 1` gives `min`.
pub fn parse_range(spec: &str, what: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || usage(format!("{what}: expected min:max:n, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && hi < lo) {
        return Err(bad());
    }
    Ok(linspace(lo, hi, n))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    if !common.seedless {
        info!("all workflows are deterministic; --seedless only asserts it");
    }
    match &common.config {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::reference()),
    }
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

fn with_topology(cfg: &RunConfig, topology: Option<CouplingTopology>) -> ArrayConfig {
    let mut array = cfg.array_config();
    if let Some(t) = topology {
        array.coupling = CouplingSpec::Topology(t);
    }
    array
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

pub fn forces(common: &Common, r_range: &str, theta: &str) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let thetas: Vec<f64> = theta
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| usage(format!("bad angle '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    if thetas.is_empty() {
        return Err(usage("--theta needs at least one angle"));
    }
    if let Some(t) = thetas.iter().find(|t| !(0.0..=90.0).contains(*t)) {
        return Err(usage(format!("angle {t} deg outside [0, 90]")));
    }
    let radii = parse_range(r_range, "--r-range")?;
    let beam = cfg.beam_params();
    let sphere = cfg.sphere_params();
    let lambda = beam.wavelength;
    if let Some(r) = radii.iter().find(|r| **r * lambda <= sphere.diameter) {
        return Err(usage(format!(
            "separation {r} wavelengths does not exceed the sphere diameter"
        )));
    }
    prepare_out(&common.out)?;
    let mut manifest = RunManifest::start("forces");
    manifest.config = config_json(&cfg);
    manifest
        .notes
        .push("R in wavelengths, theta in degrees, forces in fN".into());

    let path = common.out.join("forces.csv");
    let mut table = CsvTable::create(&path, &["R", "theta", "F_xx", "F_xy", "F_x"])?;
    for &t in &thetas {
        let b = beam.with_angle(t.to_radians());
        for &r in &radii {
            let f = binding_force(r * lambda, &b, &sphere)?;
            table.row(&[r, t, f.f_xx * FEMTO, f.f_xy * FEMTO, f.total() * FEMTO])?;
        }
    }
    table.finish()?;
    manifest.output(&path);
    manifest.write(&common.out)?;
    Ok(())
}

pub fn couplings(
    common: &Common,
    topology: Option<CouplingTopology>,
    spacing_scan: Option<&str>,
) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let array = with_topology(&cfg, topology);
    let scan = spacing_scan
        .map(|s| parse_range(s, "--spacing-scan"))
        .transpose()?;
    let g = array.hopping_rates()?;
    let omega = array.dressed_frequencies()?;
    prepare_out(&common.out)?;
    let mut manifest = RunManifest::start("couplings");
    manifest.config = config_json(&cfg);
    manifest
        .notes
        .push("g_ij / 2pi and Omega_i / 2pi in kHz".into());
    let n = array.sites;
    let to_khz = 1.0 / (2.0 * std::f64::consts::PI * 1e3);

    let path = common.out.join("couplings.csv");
    let header: Vec<String> = std::iter::once("site".to_string())
        .chain((1..=n).map(|j| format!("g_{j}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = CsvTable::create(&path, &header)?;
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| g[(i, j)] * to_khz).collect();
        table.labelled_row(i + 1, &row)?;
    }
    table.finish()?;
    manifest.output(&path);

    let path = common.out.join("frequencies.csv");
    let mut table = CsvTable::create(&path, &["site", "omega"])?;
    for (i, w) in omega.iter().enumerate() {
        table.labelled_row(i + 1, &[w * to_khz])?;
    }
    table.finish()?;
    manifest.output(&path);

    if let Some(spacings) = scan {
        let path = common.out.join("spacing_scan.csv");
        let mut table = CsvTable::create(&path, &["d", "g_12"])?;
        for d in spacings {
            let mut pair = array.clone();
            pair.sites = 2;
            pair.spacing = d * array.beam.wavelength;
            pair.trap_frequencies = array.trap_frequencies[..2].to_vec();
            if let CouplingSpec::Explicit(_) = pair.coupling {
                pair.coupling = CouplingSpec::Topology(CouplingTopology::FullLongRange);
            }
            let g12 = match pair.hopping_rates() {
                Ok(g) => g[(0, 1)] * to_khz,
                Err(e) => {
                    warn!("spacing {d}: {e}");
                    f64::NAN
                }
            };
            table.row(&[d, g12])?;
        }
        table.finish()?;
        manifest.output(&path);
        manifest.notes.push("spacing scan: d in wavelengths".into());
    }
    manifest.write(&common.out)?;
    Ok(())
}

/// Physical model rescaled so that `max |g_ij| = 1`; returns the scale in rad/s.
fn dimensionless_model(
    array: &ArrayConfig,
    dissipation: &DissipationSpec<f64>,
) -> Result<(CouplingModel<f64>, f64), Failure> {
    let physical = build_model(array, dissipation)?;
    let g_max = physical.max_coupling();
    if !(g_max > 0.0) {
        return Err(usage("all couplings vanish; no natural time unit"));
    }
    let scaled = DissipationSpec {
        sites: dissipation
            .sites
            .iter()
            .map(|s| SiteDissipation {
                rate: s.rate / g_max,
                ..*s
            })
            .collect(),
    };
    let model = CouplingModel::new(physical.hopping() / g_max, &scaled)?;
    Ok((model, g_max))
}

pub fn evolve(
    common: &Common,
    topology: Option<CouplingTopology>,
    t_end: Option<f64>,
    dt: Option<f64>,
    snapshots: bool,
) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let array = with_topology(&cfg, topology);
    let t_end = t_end.unwrap_or(cfg.run.t_end);
    let dt = dt.or(cfg.run.dt);
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(usage(format!("--t-end must be > 0, got {t_end}")));
    }
    if let Some(dt) = dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(usage(format!("--dt must be > 0, got {dt}")));
        }
    }
    let snapshots = snapshots || cfg.run.snapshots;
    let (model, g_max) = dimensionless_model(&array, &cfg.dissipation_spec())?;
    let c0 = thermal_state(&cfg.initial_occupations())?;

    let mut settings = EvolutionSettings::new(t_end).with_snapshots(snapshots);
    if let Some(dt) = dt {
        settings = settings.with_dt(dt);
    }
    let (steps, _) = settings.step_grid(&model);
    settings = settings.with_stride((steps / cfg.run.samples).max(1));
    prepare_out(&common.out)?;
    let samples = evolve_auto(&c0, &model, &settings)?;

    let mut manifest = RunManifest::start("evolve");
    manifest.config = config_json(&cfg);
    manifest.time_unit_s = Some(1.0 / g_max);
    manifest.notes.push(format!(
        "t in units of 1/g_max, g_max = {g_max:e} rad/s; {} steps",
        steps
    ));
    if model.is_closed() && model.is_symmetric() {
        manifest
            .notes
            .push("closed model: spectral propagator".into());
    }

    let path = common.out.join("trajectory.csv");
    let header = population_header(model.sites());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = CsvTable::create(&path, &header)?;
    for s in &samples {
        let mut row = vec![s.time];
        row.extend_from_slice(&s.populations);
        table.row(&row)?;
    }
    table.finish()?;
    manifest.output(&path);

    if snapshots {
        let path = common.out.join("snapshots.bin");
        let mut out = BufWriter::new(File::create(&path)?);
        for s in &samples {
            if let Some(c) = &s.snapshot {
                write_snapshot(&mut out, s.time, c)?;
            }
        }
        std::io::Write::flush(&mut out)?;
        manifest.output(&path);
        manifest.notes.push(
            "snapshots.bin: per sample t then C row-major, re/im interleaved, f64 little-endian"
                .into(),
        );
    }
    manifest.write(&common.out)?;
    Ok(())
}

fn log_times(t_start: f64, t_end: f64, n: usize) -> Vec<f64> {
    let (a, b) = (t_start.log10(), t_end.log10());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                t_end
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

pub fn pretherm(
    common: &Common,
    preset: Option<FrequencyProfile>,
    topology: Option<CouplingTopology>,
    t_end: Option<f64>,
) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let p = &cfg.pretherm;
    let profile = preset.unwrap_or(p.profile);
    let t_end = t_end.unwrap_or(p.t_end);
    if !(t_end > p.t_start && t_end.is_finite()) {
        return Err(usage(format!(
            "--t-end must exceed t_start = {}, got {t_end}",
            p.t_start
        )));
    }
    let array = with_topology(&cfg, topology);
    let g = array.hopping_rates()?;
    let model = prethermal_model(&g, profile, p.edge_frequency, p.depth)?;
    let c0 = thermal_state(&cfg.initial_occupations())?;
    let prop = SpectralPropagator::new(&model, &c0)?;
    let times = log_times(p.t_start, t_end, p.samples);
    let series = spectral_asymmetry(&prop, &c0, &times)?;
    let plateau = detect_plateau(
        &series,
        &PlateauSettings {
            epsilon: p.plateau_epsilon,
            ..PlateauSettings::default()
        },
    )?;
    let gge = gge_predict(&model, &c0)?;
    if gge.degenerate {
        warn!(
            "mode spectrum is degenerate (min gap {:e}); the GGE need not match the time average",
            gge.min_gap
        );
    }
    let averaged = prop.running_mean_populations(t_end);
    prepare_out(&common.out)?;

    let mut manifest = RunManifest::start("pretherm");
    manifest.config = config_json(&cfg);
    manifest.time_unit_s = Some(1.0 / g.abs().max());
    manifest.notes.push(format!(
        "profile {profile}, couplings normalized to max|g| = 1, t in units of 1/g_max"
    ));

    let path = common.out.join("asymmetry.csv");
    let mut table = CsvTable::create(&path, &["t", "A", "Abar"])?;
    for k in 0..series.len() {
        table.row(&[series.time[k], series.a[k], series.abar[k]])?;
    }
    table.finish()?;
    manifest.output(&path);

    let path = common.out.join("gge.csv");
    let mut table = CsvTable::create(&path, &["site", "n_gge", "n_timeavg"])?;
    for (i, (a, b)) in gge.site_populations.iter().zip(&averaged).enumerate() {
        table.labelled_row(i + 1, &[*a, *b])?;
    }
    table.finish()?;
    manifest.output(&path);

    let path = common.out.join("plateau.json");
    let report = serde_json::json!({
        "profile": profile.name(),
        "present": plateau.present,
        "t_start": fmt_f64(plateau.t_start),
        "t_end": fmt_f64(plateau.t_end),
        "level": fmt_f64(plateau.level),
        "epsilon": p.plateau_epsilon,
        "axis": "log10 t",
    });
    fs::write(
        &path,
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    manifest.output(&path);
    manifest.write(&common.out)?;
    Ok(())
}

fn default_grid(hopping: Hopping) -> String {
    match hopping {
        Hopping::Nearest => "-1.99:1.99:101,-6:6:101".into(),
        Hopping::NextNearest => "-1.49:2.99:101,-6:6:101".into(),
    }
}

pub fn scatter(
    out: &PathBuf,
    grid: Option<&str>,
    hopping: Hopping,
    eta_max: f64,
    gamma_max: f64,
) -> Result<(), Failure> {
    let grid = grid
        .map(str::to_string)
        .unwrap_or_else(|| default_grid(hopping));
    let (ds, gs) = grid.split_once(',').ok_or_else(|| {
        usage(format!(
            "--grid: expected dmin:dmax:n,gmin:gmax:n, got '{grid}'"
        ))
    })?;
    let deltas = parse_range(ds, "--grid delta")?;
    let gammas = parse_range(gs, "--grid gamma")?;
    if !(eta_max > 0.0) {
        return Err(usage("--eta-max must be > 0"));
    }
    if !(gamma_max > 0.0) {
        return Err(usage("--gamma-max must be > 0"));
    }
    let map = asymmetry_map(&deltas, &gammas, hopping, Method::Numeric, eta_max)?;
    if map.skipped > 0 {
        warn!(
            "skipped {} grid points outside the band or on a channel threshold",
            map.skipped
        );
    }
    let locus = zero_reflection_locus(&deltas, hopping, gamma_max)?;
    prepare_out(out)?;

    let mut manifest = RunManifest::start("scatter");
    manifest.config = serde_json::json!({
        "grid": grid,
        "hopping": hopping.to_string(),
        "eta_max": eta_max,
        "gamma_max": gamma_max,
    });
    manifest.notes.push(format!(
        "delta and Gamma in units of g; {} grid points skipped",
        map.skipped
    ));

    let nearest = hopping == Hopping::Nearest;
    let mut header = vec![
        "delta",
        "gamma_rate",
        "eta",
        "beta_lg_re",
        "beta_lg_im",
        "beta_gl_re",
        "beta_gl_im",
        "trans_re",
        "trans_im",
    ];
    if nearest {
        header.push("closed_form_deviation");
    }
    let path = out.join("eta_map.csv");
    let mut table = CsvTable::create(&path, &header)?;
    let mut indeterminate = 0;
    for p in &map.points {
        let eta = if p.indeterminate {
            indeterminate += 1;
            f64::NAN
        } else {
            p.eta
        };
        let mut row = vec![
            p.delta,
            p.gamma_rate,
            eta,
            p.beta_lg.re,
            p.beta_lg.im,
            p.beta_gl.re,
            p.beta_gl.im,
            p.transmission.re,
            p.transmission.im,
        ];
        if nearest {
            let cf = reflection_pair(p.delta, p.gamma_rate, hopping, Method::ClosedForm)?;
            let dev = (cf.loss_to_gain.beta - p.beta_lg)
                .norm()
                .max((cf.gain_to_loss.beta - p.beta_gl).norm())
                .max((cf.loss_to_gain.transmission - p.transmission).norm());
            row.push(dev);
        }
        table.row(&row)?;
    }
    table.finish()?;
    manifest.output(&path);
    if indeterminate > 0 {
        manifest.notes.push(format!(
            "{indeterminate} points with both reflections below 1e-12: eta written as NaN"
        ));
    }

    let path = out.join("locus.csv");
    let mut table = CsvTable::create(
        &path,
        &[
            "delta",
            "gamma1",
            "gamma2",
            "beta2_residual",
            "beta2_residual2",
        ],
    )?;
    for p in &locus {
        let pick = |k: usize| match p.branches[k] {
            Some(r) => (r.gamma_rate, r.beta2_lg),
            None => (f64::NAN, f64::NAN),
        };
        let (g1, r1) = pick(0);
        let (g2, r2) = pick(1);
        table.row(&[p.delta, g1, g2, r1, r2])?;
    }
    table.finish()?;
    manifest.output(&path);
    manifest.write(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse_and_include_endpoints() {
        assert_eq!(parse_range("1:3:3", "x").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_range("0.5:9:1", "x").unwrap(), vec![0.5]);
        assert!(parse_range("1:3", "x").is_err());
        assert!(parse_range("3:1:4", "x").is_err());
        assert!(parse_range("1:3:0", "x").is_err());
    }

    #[test]
    fn log_times_hit_both_ends() {
        let t = log_times(1e-2, 1e4, 7);
        assert_eq!(t[0], 1e-2);
        assert_eq!(t[6], 1e4);
        assert!((t[3] - 10.0).abs() < 1e-12);
    }
}
