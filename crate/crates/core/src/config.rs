//! TOML run configuration.
//!
//! Sections `[beam]`, `[sphere]`, `[array]`, `[dissipation]` and `[kick]`
//! describe the physical array; `[run]` and `[pretherm]` are optional knobs
//! for the evolution and prethermalization workflows. Every physical key
//! carries its SI unit as a suffix, and unknown keys are rejected.
//!
//! ```toml
//! [beam]
//! power_w = 0.1
//! waist_m = 600e-9
//! wavelength_m = 1550e-9
//! polarization_angle_deg = 90.0
//!
//! [sphere]
//! diameter_m = 200e-9
//! density_kg_per_m3 = 2200.0
//! relative_permittivity = 2.1
//!
//! [array]
//! sites = 15
//! spacing_m = 1550e-9
//! trap_frequency_hz = 100e3
//! coupling = "full_long_range"
//!
//! [kick]
//! site = 8
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    kick_occupations, ArrayConfig, CouplingSpec, CouplingTopology, DissipationKind,
    DissipationSpec, FrequencyMode, SiteDissipation,
};
use crate::optical_binding::{BeamParams, SphereParams};
use crate::thermo::FrequencyProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub power_w: f64,
    pub waist_m: f64,
    pub wavelength_m: f64,
    pub polarization_angle_deg: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        let b = BeamParams::reference();
        BeamSection {
            power_w: b.power,
            waist_m: b.waist,
            wavelength_m: b.wavelength,
            polarization_angle_deg: b.polarization_angle.to_degrees(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSection {
    pub diameter_m: f64,
    pub density_kg_per_m3: f64,
    pub relative_permittivity: f64,
}

impl Default for SphereSection {
    fn default() -> Self {
        let s = SphereParams::silica_200nm();
        SphereSection {
            diameter_m: s.diameter,
            density_kg_per_m3: s.mass_density,
            relative_permittivity: s.relative_permittivity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub sites: usize,
    pub spacing_m: f64,
    /// Same trap frequency at every site, Hz (cycles per second).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap_frequency_hz: Option<f64>,
    /// Per-site trap frequencies, Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap_frequencies_hz: Option<Vec<f64>>,
    #[serde(default)]
    pub frequency_mode: FrequencyMode,
    #[serde(default = "default_topology")]
    pub coupling: CouplingTopology,
    /// Explicit hopping matrix, rad/s; overrides `coupling` and implies fixed
    /// frequencies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_matrix_rad_per_s: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub hopping_scale: f64,
}

fn default_topology() -> CouplingTopology {
    CouplingTopology::FullLongRange
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDissipationEntry {
    /// 1-based site index.
    pub site: usize,
    pub kind: DissipationKind,
    pub rate_hz: f64,
    #[serde(default)]
    pub bath_occupation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationSection {
    /// Loss rate applied to every site not listed in `sites`, Hz.
    #[serde(default)]
    pub uniform_loss_hz: f64,
    #[serde(default)]
    pub uniform_bath_occupation: f64,
    #[serde(default)]
    pub sites: Vec<SiteDissipationEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickSection {
    /// 1-based kicked site; 0 leaves every site at the background.
    pub site: usize,
    #[serde(default = "default_kick")]
    pub quanta: f64,
    #[serde(default = "default_background")]
    pub background_quanta: f64,
}

fn default_kick() -> f64 {
    1e3
}

fn default_background() -> f64 {
    1e-2
}

impl Default for KickSection {
    fn default() -> Self {
        KickSection {
            site: 1,
            quanta: default_kick(),
            background_quanta: default_background(),
        }
    }
}

/// Evolution settings in units of `1 / g_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub snapshots: bool,
}

fn default_t_end() -> f64 {
    100.0
}

fn default_samples() -> usize {
    200
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_end: default_t_end(),
            dt: None,
            samples: default_samples(),
            snapshots: false,
        }
    }
}

/// Normalized prethermalization setup: couplings divided by `max |g|`,
/// frequencies in the same unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrethermSection {
    #[serde(default = "default_profile")]
    pub profile: FrequencyProfile,
    #[serde(default = "default_edge")]
    pub edge_frequency: f64,
    #[serde(default = "default_depth")]
    pub depth: f64,
    #[serde(default = "default_pretherm_t_end")]
    pub t_end: f64,
    #[serde(default = "default_pretherm_t_start")]
    pub t_start: f64,
    #[serde(default = "default_pretherm_samples")]
    pub samples: usize,
    #[serde(default = "default_epsilon")]
    pub plateau_epsilon: f64,
}

fn default_profile() -> FrequencyProfile {
    FrequencyProfile::MiddleLower
}

fn default_edge() -> f64 {
    20.0
}

fn default_depth() -> f64 {
    0.1
}

fn default_pretherm_t_end() -> f64 {
    1e6
}

fn default_pretherm_t_start() -> f64 {
    1e-2
}

fn default_pretherm_samples() -> usize {
    2000
}

fn default_epsilon() -> f64 {
    0.02
}

impl Default for PrethermSection {
    fn default() -> Self {
        PrethermSection {
            profile: default_profile(),
            edge_frequency: default_edge(),
            depth: default_depth(),
            t_end: default_pretherm_t_end(),
            t_start: default_pretherm_t_start(),
            samples: default_pretherm_samples(),
            plateau_epsilon: default_epsilon(),
        }
    }
}

/// Whole configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub beam: BeamSection,
    #[serde(default)]
    pub sphere: SphereSection,
    pub array: ArraySection,
    #[serde(default)]
    pub dissipation: DissipationSection,
    #[serde(default)]
    pub kick: KickSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub pretherm: PrethermSection,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("must be > 0, got {x}")))
    }
}

fn non_negative(field: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("must be >= 0, got {x}")))
    }
}

impl RunConfig {
    /// Reference array: 15 spheres one wavelength apart, 100 kHz traps,
    /// perpendicular polarization, site 8 kicked.
    pub fn reference() -> Self {
        RunConfig {
            beam: BeamSection::default(),
            sphere: SphereSection::default(),
            array: ArraySection {
                sites: 15,
                spacing_m: BeamParams::reference().wavelength,
                trap_frequency_hz: Some(100e3),
                trap_frequencies_hz: None,
                frequency_mode: FrequencyMode::Bare,
                coupling: default_topology(),
                coupling_matrix_rad_per_s: None,
                hopping_scale: 1.0,
            },
            dissipation: DissipationSection::default(),
            kick: KickSection {
                site: 8,
                ..KickSection::default()
            },
            run: RunSection::default(),
            pretherm: PrethermSection::default(),
        }
    }

    /// Parses and fully validates a TOML document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.beam;
        non_negative("beam.power_w", b.power_w)?;
        positive("beam.waist_m", b.waist_m)?;
        positive("beam.wavelength_m", b.wavelength_m)?;
        if !(0.0..=90.0).contains(&b.polarization_angle_deg) {
            return Err(field_error(
                "beam.polarization_angle_deg",
                format!("must lie in [0, 90], got {}", b.polarization_angle_deg),
            ));
        }
        let s = &self.sphere;
        positive("sphere.diameter_m", s.diameter_m)?;
        positive("sphere.density_kg_per_m3", s.density_kg_per_m3)?;
        positive("sphere.relative_permittivity", s.relative_permittivity)?;

        let a = &self.array;
        if a.sites < 2 {
            return Err(field_error(
                "array.sites",
                format!("need at least 2 sites, got {}", a.sites),
            ));
        }
        positive("array.spacing_m", a.spacing_m)?;
        if a.spacing_m <= s.diameter_m {
            return Err(field_error(
                "array.spacing_m",
                "spheres overlap (spacing <= diameter)",
            ));
        }
        match (&a.trap_frequency_hz, &a.trap_frequencies_hz) {
            (Some(_), Some(_)) => {
                return Err(field_error(
                    "array.trap_frequencies_hz",
                    "give either trap_frequency_hz or trap_frequencies_hz, not both",
                ))
            }
            (None, None) => {
                return Err(field_error(
                    "array.trap_frequency_hz",
                    "missing trap frequency",
                ))
            }
            (Some(f), None) => positive("array.trap_frequency_hz", *f)?,
            (None, Some(fs)) => {
                if fs.len() != a.sites {
                    return Err(field_error(
                        "array.trap_frequencies_hz",
                        format!("expected {} entries, got {}", a.sites, fs.len()),
                    ));
                }
                for (i, f) in fs.iter().enumerate() {
                    positive(&format!("array.trap_frequencies_hz[{}]", i), *f)?;
                }
            }
        }
        if !a.hopping_scale.is_finite() {
            return Err(field_error("array.hopping_scale", "must be finite"));
        }
        if let Some(g) = &a.coupling_matrix_rad_per_s {
            if g.len() != a.sites || g.iter().any(|r| r.len() != a.sites) {
                return Err(field_error(
                    "array.coupling_matrix_rad_per_s",
                    format!("must be {0}x{0}", a.sites),
                ));
            }
            for i in 0..a.sites {
                for j in 0..a.sites {
                    let (x, y) = (g[i][j], g[j][i]);
                    if !x.is_finite() || (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                        return Err(field_error(
                            "array.coupling_matrix_rad_per_s",
                            format!("entry ({}, {}) is not finite and symmetric", i + 1, j + 1),
                        ));
                    }
                }
            }
        }

        let d = &self.dissipation;
        non_negative("dissipation.uniform_loss_hz", d.uniform_loss_hz)?;
        non_negative(
            "dissipation.uniform_bath_occupation",
            d.uniform_bath_occupation,
        )?;
        for (k, e) in d.sites.iter().enumerate() {
            if e.site == 0 || e.site > a.sites {
                return Err(field_error(
                    &format!("dissipation.sites[{k}].site"),
                    format!("must lie in 1..={}, got {}", a.sites, e.site),
                ));
            }
            non_negative(&format!("dissipation.sites[{k}].rate_hz"), e.rate_hz)?;
            non_negative(
                &format!("dissipation.sites[{k}].bath_occupation"),
                e.bath_occupation,
            )?;
        }

        let k = &self.kick;
        if k.site > a.sites {
            return Err(field_error(
                "kick.site",
                format!("must lie in 0..={}, got {}", a.sites, k.site),
            ));
        }
        non_negative("kick.quanta", k.quanta)?;
        non_negative("kick.background_quanta", k.background_quanta)?;

        let r = &self.run;
        positive("run.t_end", r.t_end)?;
        if let Some(dt) = r.dt {
            positive("run.dt", dt)?;
        }
        if r.samples == 0 {
            return Err(field_error("run.samples", "must be >= 1"));
        }

        let p = &self.pretherm;
        positive("pretherm.edge_frequency", p.edge_frequency)?;
        if !(0.0..1.0).contains(&p.depth) {
            return Err(field_error(
                "pretherm.depth",
                format!("must lie in [0, 1), got {}", p.depth),
            ));
        }
        positive("pretherm.t_start", p.t_start)?;
        positive("pretherm.t_end", p.t_end)?;
        if p.t_end <= p.t_start {
            return Err(field_error(
                "pretherm.t_end",
                "must exceed pretherm.t_start",
            ));
        }
        if p.samples < 10 {
            return Err(field_error("pretherm.samples", "must be >= 10"));
        }
        positive("pretherm.plateau_epsilon", p.plateau_epsilon)?;
        Ok(())
    }

    pub fn beam_params(&self) -> BeamParams {
        BeamParams {
            power: self.beam.power_w,
            waist: self.beam.waist_m,
            wavelength: self.beam.wavelength_m,
            polarization_angle: self.beam.polarization_angle_deg.to_radians(),
        }
    }

    pub fn sphere_params(&self) -> SphereParams {
        SphereParams {
            diameter: self.sphere.diameter_m,
            mass_density: self.sphere.density_kg_per_m3,
            relative_permittivity: self.sphere.relative_permittivity,
        }
    }

    /// Trap frequencies in rad/s.
    pub fn trap_frequencies(&self) -> Vec<f64> {
        let a = &self.array;
        match (&a.trap_frequency_hz, &a.trap_frequencies_hz) {
            (_, Some(fs)) => fs.iter().map(|f| 2.0 * PI * f).collect(),
            (Some(f), None) => vec![2.0 * PI * f; a.sites],
            (None, None) => Vec::new(),
        }
    }

    pub fn array_config(&self) -> ArrayConfig {
        let a = &self.array;
        let coupling = match &a.coupling_matrix_rad_per_s {
            Some(g) => CouplingSpec::Explicit(DMatrix::from_fn(a.sites, a.sites, |i, j| g[i][j])),
            None => CouplingSpec::Topology(a.coupling),
        };
        ArrayConfig {
            sites: a.sites,
            spacing: a.spacing_m,
            beam: self.beam_params(),
            sphere: self.sphere_params(),
            trap_frequencies: self.trap_frequencies(),
            frequency_mode: a.frequency_mode,
            coupling,
            hopping_scale: a.hopping_scale,
        }
    }

    /// Per-site dissipation with rates in rad/s.
    pub fn dissipation_spec(&self) -> DissipationSpec<f64> {
        let d = &self.dissipation;
        let n = self.array.sites;
        let mut spec = if d.uniform_loss_hz > 0.0 {
            DissipationSpec::uniform_loss(
                n,
                2.0 * PI * d.uniform_loss_hz,
                d.uniform_bath_occupation,
            )
        } else {
            DissipationSpec::closed(n)
        };
        for e in &d.sites {
            spec = spec.set(
                e.site - 1,
                SiteDissipation {
                    rate: 2.0 * PI * e.rate_hz,
                    kind: e.kind,
                    bath_occupation: e.bath_occupation,
                },
            );
        }
        spec
    }

    /// Initial occupations from `[kick]`.
    pub fn initial_occupations(&self) -> Vec<f64> {
        let k = &self.kick;
        let n = self.array.sites;
        if k.site == 0 {
            vec![k.background_quanta; n]
        } else {
            kick_occupations(n, k.site - 1, k.quanta, k.background_quanta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[array]
sites = 4
spacing_m = 1550e-9
trap_frequency_hz = 100e3
"#;

    #[test]
    fn minimal_config_uses_reference_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.beam_params(), BeamParams::reference());
        assert_eq!(cfg.sphere_params(), SphereParams::silica_200nm());
        assert_eq!(cfg.initial_occupations(), vec![1e3, 1e-2, 1e-2, 1e-2]);
        let a = cfg.array_config();
        assert_eq!(a.trap_frequencies.len(), 4);
        assert!((a.trap_frequencies[0] - 2.0 * PI * 100e3).abs() < 1e-6);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{MINIMAL}spacing_nm = 3\n");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("spacing_nm"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn invalid_value_names_field() {
        let text = MINIMAL.replace("sites = 4", "sites = 1");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("array.sites"), "{err}");
    }

    #[test]
    fn dissipation_sites_are_one_based() {
        let text = format!(
            "{MINIMAL}[dissipation]\nsites = [{{ site = 2, kind = \"gain\", rate_hz = 1.0 }}]\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        let spec = cfg.dissipation_spec();
        assert_eq!(spec.sites[1].kind, DissipationKind::Gain);
        assert_eq!(spec.sites[0].kind, DissipationKind::None);
        let bad = text.replace("site = 2", "site = 5");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn reference_is_valid() {
        let cfg = RunConfig::reference();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }
}
