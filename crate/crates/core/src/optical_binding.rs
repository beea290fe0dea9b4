//! Optical binding between point-dipole nanospheres.
//!
//! Two spheres on the x axis, each trapped by its own beam with a shared
//! polarization angle `theta` measured from the array axis, exchange a
//! first-order scattered field. The resulting force along the axis splits into
//! a part driven by the axial field component (`F_xx`) and one driven by the
//! transverse component (`F_xy`):
//!
//! ```text
//! F_xx = 2 a^2 Ex^2 / (8 pi e0 R^4) * [-3 cos kR - 3 kR cos kR + (kR)^2 cos kR]
//! F_xy =   a^2 Ey^2 / (8 pi e0 R^4) * [3 cos kR + 3 kR sin kR - 2 (kR)^2 cos kR - (kR)^3 sin kR]
//! ```
//!
//! with `Ex = E0 cos(theta)`, `Ey = E0 sin(theta)`. Positive force is
//! repulsive. In the far field `F_xx ~ R^-2` and `F_xy ~ R^-1`.
//!
//! The axial bracket carries `-3kR cos kR` where the textbook radiating-dipole
//! expression has a sine; it is kept in this form so that coupling profiles
//! match the reference lattice parameters.
//!
//! Everything here is SI and `f64`: `alpha^2` is of order 1e-63 and does not
//! survive in `f32`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::consts::{EPSILON_0, SPEED_OF_LIGHT};

/// Trapping beam shared by every site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    /// Power, W.
    pub power: f64,
    /// Focal waist, m.
    pub waist: f64,
    /// Vacuum wavelength, m.
    pub wavelength: f64,
    /// Angle between polarization and the array axis, rad, in `[0, pi/2]`.
    pub polarization_angle: f64,
}

impl BeamParams {
    /// 100 mW, 600 nm waist, 1550 nm, polarization perpendicular to the array.
    pub fn reference() -> Self {
        BeamParams {
            power: 0.1,
            waist: 600e-9,
            wavelength: 1550e-9,
            polarization_angle: PI / 2.0,
        }
    }

    pub fn with_angle(self, polarization_angle: f64) -> Self {
        BeamParams {
            polarization_angle,
            ..self
        }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0) || !self.power.is_finite() {
            return Err(Error::invalid(format!(
                "beam power must be >= 0, got {}",
                self.power
            )));
        }
        if !(self.waist > 0.0) {
            return Err(Error::invalid(format!(
                "beam waist must be > 0, got {}",
                self.waist
            )));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid(format!(
                "wavelength must be > 0, got {}",
                self.wavelength
            )));
        }
        let theta = self.polarization_angle;
        if !(0.0..=PI / 2.0 + 1e-12).contains(&theta) {
            return Err(Error::invalid(format!(
                "polarization angle must lie in [0, pi/2], got {theta}"
            )));
        }
        Ok(())
    }
}

/// Dielectric nanosphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereParams {
    /// Diameter, m.
    pub diameter: f64,
    /// Mass density, kg/m^3.
    pub mass_density: f64,
    /// Relative permittivity at the trapping wavelength.
    pub relative_permittivity: f64,
}

impl SphereParams {
    /// 200 nm fused silica.
    pub fn silica_200nm() -> Self {
        SphereParams {
            diameter: 200e-9,
            mass_density: 2200.0,
            relative_permittivity: 2.1,
        }
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    pub fn mass(&self) -> f64 {
        let a = self.radius();
        self.mass_density * 4.0 / 3.0 * PI * a * a * a
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diameter > 0.0) {
            return Err(Error::invalid(format!(
                "sphere diameter must be > 0, got {}",
                self.diameter
            )));
        }
        if !(self.mass_density > 0.0) {
            return Err(Error::invalid(format!(
                "mass density must be > 0, got {}",
                self.mass_density
            )));
        }
        if !(self.relative_permittivity > 0.0) {
            return Err(Error::invalid(format!(
                "relative permittivity must be > 0, got {}",
                self.relative_permittivity
            )));
        }
        Ok(())
    }

    /// Logs a warning when the sphere is too large for the point-dipole model.
    pub fn check_dipole_regime(&self, wavelength: f64) {
        if self.diameter >= wavelength / 5.0 {
            log::warn!(
                "sphere diameter {:.3e} m is not << wavelength {:.3e} m; dipole approximation is questionable",
                self.diameter,
                wavelength
            );
        }
    }
}

/// Axial binding force split by field component, N.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceDecomposition {
    pub separation: f64,
    pub f_xx: f64,
    pub f_xy: f64,
}

impl ForceDecomposition {
    pub fn total(&self) -> f64 {
        self.f_xx + self.f_xy
    }
}

/// Clausius-Mossotti point-dipole polarizability, C m^2 / V.
pub fn polarizability(sphere: &SphereParams) -> Result<f64> {
    sphere.validate()?;
    let a = sphere.radius();
    let eps = sphere.relative_permittivity;
    Ok(4.0 * PI * EPSILON_0 * a.powi(3) * (eps - 1.0) / (eps + 2.0))
}

/// Peak field amplitude squared at the focus of a Gaussian beam, V^2/m^2.
pub fn field_amplitude_squared(beam: &BeamParams) -> f64 {
    4.0 * beam.power / (PI * EPSILON_0 * SPEED_OF_LIGHT * beam.waist * beam.waist)
}

/// Prefactors `(2 a^2 Ex^2, a^2 Ey^2) / (8 pi e0)` of the two force branches.
fn branch_prefactors(beam: &BeamParams, sphere: &SphereParams) -> Result<(f64, f64)> {
    beam.validate()?;
    let alpha = polarizability(sphere)?;
    let e0_sq = field_amplitude_squared(beam);
    let (s, c) = beam.polarization_angle.sin_cos();
    let base = alpha * alpha * e0_sq / (8.0 * PI * EPSILON_0);
    Ok((2.0 * base * c * c, base * s * s))
}

fn axial_bracket(x: f64) -> f64 {
    x.cos() * (x * x - 3.0 * x - 3.0)
}

fn axial_bracket_deriv(x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    -s * (x * x - 3.0 * x - 3.0) + c * (2.0 * x - 3.0)
}

fn transverse_bracket(x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    3.0 * c + 3.0 * x * s - 2.0 * x * x * c - x * x * x * s
}

fn transverse_bracket_deriv(x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    -x * c - x * x * s - x * x * x * c
}

/// Binding force between two spheres separated by `separation` along x.
pub fn binding_force(
    separation: f64,
    beam: &BeamParams,
    sphere: &SphereParams,
) -> Result<ForceDecomposition> {
    if !(separation > 0.0) || !separation.is_finite() {
        return Err(Error::invalid(format!(
            "separation must be a positive finite length, got {separation}"
        )));
    }
    let (pxx, pxy) = branch_prefactors(beam, sphere)?;
    let r4 = separation.powi(4);
    let x = beam.wavenumber() * separation;
    Ok(ForceDecomposition {
        separation,
        f_xx: pxx / r4 * axial_bracket(x),
        f_xy: pxy / r4 * transverse_bracket(x),
    })
}

/// Analytic `dF_x/dR` at `separation`, N/m.
pub fn force_gradient(separation: f64, beam: &BeamParams, sphere: &SphereParams) -> Result<f64> {
    if !(separation > 0.0) || !separation.is_finite() {
        return Err(Error::invalid(format!(
            "separation must be a positive finite length, got {separation}"
        )));
    }
    let (pxx, pxy) = branch_prefactors(beam, sphere)?;
    let k = beam.wavenumber();
    let x = k * separation;
    let r4 = separation.powi(4);
    let r5 = r4 * separation;
    let dxx = pxx * (-4.0 * axial_bracket(x) / r5 + k * axial_bracket_deriv(x) / r4);
    let dxy = pxy * (-4.0 * transverse_bracket(x) / r5 + k * transverse_bracket_deriv(x) / r4);
    Ok(dxx + dxy)
}

/// Spring constant `k_n = dF_x/dR` at `R = n d`, N/m.
pub fn spring_constant(
    n: usize,
    spacing: f64,
    beam: &BeamParams,
    sphere: &SphereParams,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("pair distance index n must be >= 1"));
    }
    if !(spacing > 0.0) {
        return Err(Error::invalid(format!(
            "spacing must be > 0, got {spacing}"
        )));
    }
    force_gradient(n as f64 * spacing, beam, sphere)
}

/// Restoring stiffness of the pair spring, `kappa_n = -dF_x/dR`.
///
/// With repulsion counted positive, a binding force that weakens with
/// distance acts as an ordinary spring of stiffness `-dF/dR`. This is the
/// quantity that dresses trap frequencies, sets hopping rates and enters the
/// classical equations of motion.
pub fn restoring_stiffness(
    n: usize,
    spacing: f64,
    beam: &BeamParams,
    sphere: &SphereParams,
) -> Result<f64> {
    spring_constant(n, spacing, beam, sphere).map(|k| -k)
}

/// `omega_n = sqrt(k_n / m)`, defined only where `k_n >= 0`.
pub fn pair_frequency(spring: f64, mass: f64) -> Option<f64> {
    (spring >= 0.0 && mass > 0.0).then(|| (spring / mass).sqrt())
}

/// Least-squares log-log slope of the far-field envelope of `|F_x|`.
///
/// Samples `kR` uniformly on `[kr_min, kr_max]`, keeps local maxima of `|F_x|`
/// (the oscillation envelope) and fits `ln|F|` against `ln R`.
pub fn far_field_slope(
    beam: &BeamParams,
    sphere: &SphereParams,
    kr_min: f64,
    kr_max: f64,
    samples: usize,
) -> Result<f64> {
    if !(kr_min > 0.0 && kr_max > kr_min) || samples < 16 {
        return Err(Error::invalid(
            "far_field_slope needs 0 < kr_min < kr_max and >= 16 samples",
        ));
    }
    let k = beam.wavenumber();
    let mut mags = Vec::with_capacity(samples);
    for i in 0..samples {
        let kr = kr_min + (kr_max - kr_min) * i as f64 / (samples - 1) as f64;
        let r = kr / k;
        mags.push((r, binding_force(r, beam, sphere)?.total().abs()));
    }
    let peaks: Vec<(f64, f64)> = mags
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].1 > 0.0)
        .map(|w| (w[1].0.ln(), w[1].1.ln()))
        .collect();
    if peaks.len() < 2 {
        return Err(Error::invalid("too few envelope peaks to fit a slope"));
    }
    let n = peaks.len() as f64;
    let mx = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let my = peaks.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn beam(theta: f64) -> BeamParams {
        BeamParams::reference().with_angle(theta)
    }

    #[test]
    fn polarizability_vacuum_sphere_vanishes() {
        let mut s = SphereParams::silica_200nm();
        s.relative_permittivity = 1.0;
        assert_eq!(polarizability(&s).unwrap(), 0.0);
    }

    #[test]
    fn polarizability_scales_with_volume() {
        let s = SphereParams::silica_200nm();
        let mut big = s;
        big.diameter *= 2.0;
        let ratio = polarizability(&big).unwrap() / polarizability(&s).unwrap();
        assert_relative_eq!(ratio, 8.0, max_relative = 1e-14);
    }

    #[test]
    fn polarizability_silica_hand_value() {
        // 4 pi e0 = 1.11265005545e-10 F/m, a^3 = 1e-21 m^3, (2.1-1)/(2.1+2) = 11/41
        let expected = 1.112_650_055_45e-10 * 1e-21 * 11.0 / 41.0;
        let got = polarizability(&SphereParams::silica_200nm()).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-9);
        assert_relative_eq!(got, 2.985_158_7e-32, max_relative = 1e-7);
    }

    #[test]
    fn rejects_nonphysical_permittivity() {
        let mut s = SphereParams::silica_200nm();
        s.relative_permittivity = 0.0;
        assert!(polarizability(&s).is_err());
        s.relative_permittivity = -2.0;
        assert!(polarizability(&s).is_err());
    }

    #[test]
    fn rejects_nonpositive_separation() {
        let s = SphereParams::silica_200nm();
        assert!(binding_force(0.0, &beam(0.0), &s).is_err());
        assert!(binding_force(-1e-6, &beam(0.0), &s).is_err());
    }

    #[test]
    fn zero_power_means_zero_force() {
        let s = SphereParams::silica_200nm();
        let mut b = beam(0.7);
        b.power = 0.0;
        let f = binding_force(1.3e-6, &b, &s).unwrap();
        assert_eq!(f.f_xx, 0.0);
        assert_eq!(f.f_xy, 0.0);
        assert_eq!(spring_constant(2, 1.55e-6, &b, &s).unwrap(), 0.0);
    }

    #[test]
    fn pure_polarizations_select_one_branch() {
        let s = SphereParams::silica_200nm();
        let par = binding_force(2e-6, &beam(0.0), &s).unwrap();
        assert!(par.f_xy.abs() < 1e-30 * par.f_xx.abs().max(1e-300) + 1e-300);
        let perp = binding_force(2e-6, &beam(PI / 2.0), &s).unwrap();
        assert!(perp.f_xx.abs() <= 1e-30 * perp.f_xy.abs());
    }

    #[test]
    fn far_field_power_laws() {
        let s = SphereParams::silica_200nm();
        let par = far_field_slope(&beam(0.0), &s, 50.0, 500.0, 20_001).unwrap();
        let perp = far_field_slope(&beam(PI / 2.0), &s, 50.0, 500.0, 20_001).unwrap();
        assert!((par + 2.0).abs() < 0.05, "theta=0 slope {par}");
        assert!((perp + 1.0).abs() < 0.05, "theta=pi/2 slope {perp}");
    }

    #[test]
    fn quarter_angle_is_mean_of_extremes() {
        let s = SphereParams::silica_200nm();
        let d = 1550e-9;
        for n in 1..15 {
            let k0 = spring_constant(n, d, &beam(0.0), &s).unwrap();
            let k90 = spring_constant(n, d, &beam(PI / 2.0), &s).unwrap();
            let k45 = spring_constant(n, d, &beam(PI / 4.0), &s).unwrap();
            assert_relative_eq!(k45, 0.5 * (k0 + k90), max_relative = 1e-12);
        }
    }

    #[test]
    fn outputs_finite_over_validity_range() {
        let s = SphereParams::silica_200nm();
        let lam = 1550e-9;
        for theta in [0.0, 0.3, PI / 2.0] {
            let mut r = s.diameter;
            while r < 1e3 * lam {
                let f = binding_force(r, &beam(theta), &s).unwrap();
                assert!(f.total().is_finite());
                assert!(force_gradient(r, &beam(theta), &s).unwrap().is_finite());
                r *= 1.37;
            }
        }
    }

    #[test]
    fn forces_vanish_far_away() {
        let s = SphereParams::silica_200nm();
        let near = binding_force(2e-6, &beam(0.4), &s).unwrap();
        let far = binding_force(2e-1, &beam(0.4), &s).unwrap();
        assert!(far.f_xx.abs() < 1e-6 * near.f_xx.abs().max(near.f_xy.abs()));
        assert!(far.f_xy.abs() < 1e-3 * near.f_xy.abs().max(near.f_xx.abs()));
    }

    fn central_difference(r: f64, h: f64, b: &BeamParams, s: &SphereParams) -> f64 {
        let f = |x: f64| binding_force(r + x * h, b, s).unwrap().total();
        (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * h)
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_difference(
            n in 1usize..15,
            d_over_lambda in 0.6f64..3.0,
            theta in 0.0f64..(PI / 2.0),
        ) {
            let s = SphereParams::silica_200nm();
            let b = beam(theta);
            let d = d_over_lambda * b.wavelength;
            let analytic = spring_constant(n, d, &b, &s).unwrap();
            let fd = central_difference(n as f64 * d, 1e-3 * d, &b, &s);
            let k0 = spring_constant(n, d, &b.with_angle(0.0), &s).unwrap().abs();
            let k90 = spring_constant(n, d, &b.with_angle(PI / 2.0), &s).unwrap().abs();
            let envelope = k0 * theta.cos().powi(2) + k90 * theta.sin().powi(2);
            // relative error is meaningless at a zero crossing of dF/dR
            prop_assume!(analytic.abs() > 1e-3 * envelope);
            prop_assert!(((analytic - fd) / analytic).abs() < 1e-5,
                "n={n} d={d} theta={theta}: {analytic} vs {fd}");
        }

        #[test]
        fn angle_decomposition_is_exact(r_over_lambda in 0.2f64..50.0, theta in 0.0f64..(PI / 2.0)) {
            let s = SphereParams::silica_200nm();
            let r = r_over_lambda * 1550e-9;
            let f = binding_force(r, &beam(theta), &s).unwrap().total();
            let f0 = binding_force(r, &beam(0.0), &s).unwrap().total();
            let f90 = binding_force(r, &beam(PI / 2.0), &s).unwrap().total();
            let mix = f0 * theta.cos().powi(2) + f90 * theta.sin().powi(2);
            prop_assert!((f - mix).abs() <= 1e-12 * (f0.abs() + f90.abs()));
        }
    }
}
