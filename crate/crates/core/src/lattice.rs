//! Rotating-wave lattice model of the array.
//!
//! The phonon hopping matrix is `W_ij = Omega_i delta_ij + g_ij` with
//!
//! ```text
//! Omega_i = sqrt((k0_i + sum_{j != i} kappa_ij) / m)
//! g_ij    = -s * kappa_ij / (2 m sqrt(Omega_i Omega_j))
//! ```
//!
//! where `kappa_ij` is the restoring stiffness of the binding spring between
//! sites `i` and `j` (see [`optical_binding::restoring_stiffness`]) and `s` is
//! the dimensionless `hopping_scale` knob (1 by default). Feedback gain and
//! loss enter the diagonal matrix `L` as `+Gamma/2` and `-Gamma/2`; only lossy
//! sites inject bath quanta through `M = diag(Gamma_j n_j)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optical_binding::{self, BeamParams, SphereParams};
use crate::scalar::{lit, Complex, Real};

/// Which pairs of sites are coupled, and with what distance profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingTopology {
    /// Every pair, with the optical-binding stiffness at its separation.
    FullLongRange,
    /// Only `|i - j| = 1`.
    NearestNeighbor,
    /// Every pair, `kappa_n = kappa_1 / n^2`.
    InverseSquare,
    /// `|i - j| <= 2`, `kappa_2 = kappa_1 / 2`.
    NextNearest,
}

impl CouplingTopology {
    pub const ALL: [CouplingTopology; 4] = [
        CouplingTopology::FullLongRange,
        CouplingTopology::NearestNeighbor,
        CouplingTopology::InverseSquare,
        CouplingTopology::NextNearest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CouplingTopology::FullLongRange => "full_long_range",
            CouplingTopology::NearestNeighbor => "nearest_neighbor",
            CouplingTopology::InverseSquare => "inverse_square",
            CouplingTopology::NextNearest => "next_nearest",
        }
    }

    /// Stiffness at pair distance `n` given the per-distance binding profile
    /// `profile[n - 1]`; zero when the pair is not coupled.
    fn stiffness(self, n: usize, profile: &[f64]) -> f64 {
        match self {
            CouplingTopology::FullLongRange => profile[n - 1],
            CouplingTopology::NearestNeighbor => {
                if n == 1 {
                    profile[0]
                } else {
                    0.0
                }
            }
            CouplingTopology::InverseSquare => profile[0] / (n * n) as f64,
            CouplingTopology::NextNearest => match n {
                1 => profile[0],
                2 => 0.5 * profile[0],
                _ => 0.0,
            },
        }
    }
}

impl fmt::Display for CouplingTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CouplingTopology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "full_long_range" | "long_range" => Ok(CouplingTopology::FullLongRange),
            "nearest_neighbor" | "nearest" => Ok(CouplingTopology::NearestNeighbor),
            "inverse_square" | "r2" => Ok(CouplingTopology::InverseSquare),
            "next_nearest" => Ok(CouplingTopology::NextNearest),
            _ => Err(Error::invalid(format!("unknown coupling model '{s}'"))),
        }
    }
}

/// How the per-site trap frequencies in [`ArrayConfig`] are interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    /// Bare trap frequencies `Omega0_i`; the binding springs dress them.
    #[default]
    Bare,
    /// Final frequencies `Omega_i`, used as given.
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CouplingSpec {
    Topology(CouplingTopology),
    /// Explicit `g_ij` in rad/s (diagonal ignored). Frequencies are taken as
    /// given and never dressed.
    Explicit(DMatrix<f64>),
}

/// Geometry and trap settings of the array. SI units throughout.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayConfig {
    pub sites: usize,
    /// Spacing between neighbours, m.
    pub spacing: f64,
    pub beam: BeamParams,
    pub sphere: SphereParams,
    /// Per-site trap frequency, rad/s.
    pub trap_frequencies: Vec<f64>,
    pub frequency_mode: FrequencyMode,
    pub coupling: CouplingSpec,
    /// Dimensionless factor applied to derived `g_ij`.
    pub hopping_scale: f64,
}

impl ArrayConfig {
    /// Identical traps at angular frequency `trap_frequency`, full long-range
    /// coupling, bare frequency mode.
    pub fn uniform(
        sites: usize,
        spacing: f64,
        beam: BeamParams,
        sphere: SphereParams,
        trap_frequency: f64,
    ) -> Self {
        ArrayConfig {
            sites,
            spacing,
            beam,
            sphere,
            trap_frequencies: vec![trap_frequency; sites],
            frequency_mode: FrequencyMode::Bare,
            coupling: CouplingSpec::Topology(CouplingTopology::FullLongRange),
            hopping_scale: 1.0,
        }
    }

    /// Reference array: 15 silica spheres, spacing one wavelength, 2pi x 100 kHz traps.
    pub fn reference(sites: usize) -> Self {
        let beam = BeamParams::reference();
        ArrayConfig::uniform(
            sites,
            beam.wavelength,
            beam,
            SphereParams::silica_200nm(),
            2.0 * std::f64::consts::PI * 100e3,
        )
    }

    pub fn with_topology(mut self, topology: CouplingTopology) -> Self {
        self.coupling = CouplingSpec::Topology(topology);
        self
    }

    pub fn with_frequency_mode(mut self, mode: FrequencyMode) -> Self {
        self.frequency_mode = mode;
        self
    }

    pub fn mass(&self) -> f64 {
        self.sphere.mass()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 sites, got {}",
                self.sites
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::invalid(format!(
                "spacing must be > 0, got {}",
                self.spacing
            )));
        }
        self.beam.validate()?;
        self.sphere.validate()?;
        if self.trap_frequencies.len() != self.sites {
            return Err(Error::DimensionMismatch {
                expected: self.sites,
                got: self.trap_frequencies.len(),
            });
        }
        if let Some((i, w)) = self
            .trap_frequencies
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w > 0.0) || !w.is_finite())
        {
            return Err(Error::invalid(format!(
                "trap frequency at site {} must be > 0, got {w}",
                i + 1
            )));
        }
        if !self.hopping_scale.is_finite() {
            return Err(Error::invalid("hopping_scale must be finite"));
        }
        if let CouplingSpec::Explicit(g) = &self.coupling {
            if g.nrows() != self.sites || g.ncols() != self.sites {
                return Err(Error::DimensionMismatch {
                    expected: self.sites,
                    got: g.nrows(),
                });
            }
            let asym = (g - g.transpose()).abs().max();
            if asym > 1e-12 * g.abs().max().max(1.0) {
                return Err(Error::invalid("explicit coupling matrix must be symmetric"));
            }
        }
        Ok(())
    }

    /// Restoring stiffness `kappa_n` for `n = 1..sites-1` from the binding force.
    pub fn stiffness_profile(&self) -> Result<Vec<f64>> {
        (1..self.sites)
            .map(|n| {
                optical_binding::restoring_stiffness(n, self.spacing, &self.beam, &self.sphere)
            })
            .collect()
    }

    /// Pair stiffness matrix `kappa_ij` (zero diagonal), N/m. `None` for an
    /// explicit coupling override.
    pub fn stiffness_matrix(&self) -> Result<Option<DMatrix<f64>>> {
        let topology = match &self.coupling {
            CouplingSpec::Topology(t) => *t,
            CouplingSpec::Explicit(_) => return Ok(None),
        };
        let profile = self.stiffness_profile()?;
        let n = self.sites;
        Ok(Some(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                topology.stiffness(i.abs_diff(j), &profile)
            }
        })))
    }

    /// Frequencies `Omega_i` that sit on the diagonal of `W`, rad/s.
    pub fn dressed_frequencies(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let stiffness = match (self.frequency_mode, self.stiffness_matrix()?) {
            (FrequencyMode::Bare, Some(k)) => k,
            _ => return Ok(self.trap_frequencies.clone()),
        };
        let m = self.mass();
        self.trap_frequencies
            .iter()
            .enumerate()
            .map(|(i, w0)| {
                let total = m * w0 * w0 + stiffness.row(i).sum();
                if total < 0.0 {
                    Err(Error::UnstableTrap {
                        site: i + 1,
                        stiffness: total,
                    })
                } else {
                    Ok((total / m).sqrt())
                }
            })
            .collect()
    }

    /// Hopping matrix `g_ij` (zero diagonal), rad/s.
    pub fn hopping_rates(&self) -> Result<DMatrix<f64>> {
        let omega = self.dressed_frequencies()?;
        let n = self.sites;
        match (&self.coupling, self.stiffness_matrix()?) {
            (CouplingSpec::Explicit(g), _) => {
                let mut g = g.clone();
                g.fill_diagonal(0.0);
                Ok(g)
            }
            (_, Some(k)) => {
                let m = self.mass();
                let s = self.hopping_scale;
                Ok(DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        -s * k[(i, j)] / (2.0 * m * (omega[i] * omega[j]).sqrt())
                    }
                }))
            }
            (CouplingSpec::Topology(_), None) => unreachable!("topology always yields stiffness"),
        }
    }
}

/// Pairwise hopping rate `g_ij`, rad/s.
pub fn coupling_strength(i: usize, j: usize, config: &ArrayConfig) -> Result<f64> {
    if i == j {
        return Err(Error::invalid("coupling_strength needs two distinct sites"));
    }
    if i >= config.sites || j >= config.sites {
        return Err(Error::invalid(format!(
            "site index out of range for {} sites",
            config.sites
        )));
    }
    Ok(config.hopping_rates()?[(i, j)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationKind {
    Loss,
    Gain,
    None,
}

impl FromStr for DissipationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "loss" => Ok(DissipationKind::Loss),
            "gain" => Ok(DissipationKind::Gain),
            "none" => Ok(DissipationKind::None),
            other => Err(Error::invalid(format!(
                "unknown dissipation kind '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteDissipation<T> {
    pub rate: T,
    pub kind: DissipationKind,
    pub bath_occupation: T,
}

/// Per-site feedback damping or amplification.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipationSpec<T> {
    pub sites: Vec<SiteDissipation<T>>,
}

impl<T: Real> DissipationSpec<T> {
    pub fn closed(n: usize) -> Self {
        DissipationSpec {
            sites: vec![
                SiteDissipation {
                    rate: T::zero(),
                    kind: DissipationKind::None,
                    bath_occupation: T::zero(),
                };
                n
            ],
        }
    }

    /// Every site lossy at `rate` into a bath with occupation `bath`.
    pub fn uniform_loss(n: usize, rate: T, bath: T) -> Self {
        DissipationSpec {
            sites: vec![
                SiteDissipation {
                    rate,
                    kind: DissipationKind::Loss,
                    bath_occupation: bath,
                };
                n
            ],
        }
    }

    pub fn set(mut self, site: usize, dissipation: SiteDissipation<T>) -> Self {
        self.sites[site] = dissipation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.sites.iter().enumerate() {
            if !(s.rate >= T::zero()) {
                return Err(Error::invalid(format!(
                    "damping rate at site {} must be >= 0",
                    i + 1
                )));
            }
            if !(s.bath_occupation >= T::zero()) {
                return Err(Error::invalid(format!(
                    "bath occupation at site {} must be >= 0",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Diagonal of `L`.
    pub fn gain_loss(&self) -> DVector<T> {
        let half: T = lit(0.5);
        DVector::from_iterator(
            self.sites.len(),
            self.sites.iter().map(|s| match s.kind {
                DissipationKind::Loss => -half * s.rate,
                DissipationKind::Gain => half * s.rate,
                DissipationKind::None => T::zero(),
            }),
        )
    }

    /// Diagonal of `M`. Gain sites inject nothing.
    pub fn injection(&self) -> DVector<T> {
        DVector::from_iterator(
            self.sites.len(),
            self.sites.iter().map(|s| match s.kind {
                DissipationKind::Loss => s.rate * s.bath_occupation,
                _ => T::zero(),
            }),
        )
    }
}

/// `W`, `diag(L)` and `diag(M)` of the correlation-matrix equation.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingModel<T: Real> {
    hopping: DMatrix<T>,
    gain_loss: DVector<T>,
    injection: DVector<T>,
}

impl<T: Real> CouplingModel<T> {
    pub fn new(hopping: DMatrix<T>, dissipation: &DissipationSpec<T>) -> Result<Self> {
        let n = hopping.nrows();
        if hopping.ncols() != n {
            return Err(Error::invalid("hopping matrix must be square"));
        }
        if dissipation.sites.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: dissipation.sites.len(),
            });
        }
        dissipation.validate()?;
        if hopping.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("hopping matrix has non-finite entries"));
        }
        Ok(CouplingModel {
            hopping,
            gain_loss: dissipation.gain_loss(),
            injection: dissipation.injection(),
        })
    }

    /// Closed model (`L = M = 0`).
    pub fn closed(hopping: DMatrix<T>) -> Result<Self> {
        let n = hopping.nrows();
        Self::new(hopping, &DissipationSpec::closed(n))
    }

    pub fn sites(&self) -> usize {
        self.hopping.nrows()
    }

    pub fn hopping(&self) -> &DMatrix<T> {
        &self.hopping
    }

    pub fn gain_loss(&self) -> &DVector<T> {
        &self.gain_loss
    }

    pub fn injection(&self) -> &DVector<T> {
        &self.injection
    }

    pub fn is_closed(&self) -> bool {
        self.gain_loss.iter().all(|x| *x == T::zero())
            && self.injection.iter().all(|x| *x == T::zero())
    }

    /// `max |W_ij - W_ji|`.
    pub fn asymmetry(&self) -> T {
        (&self.hopping - self.hopping.transpose()).abs().max()
    }

    pub fn is_symmetric(&self) -> bool {
        let scale = self.hopping.abs().max().max(T::one());
        self.asymmetry() <= lit::<T>(1e-12) * scale
    }

    pub fn frequencies(&self) -> Vec<T> {
        self.hopping.diagonal().iter().copied().collect()
    }

    /// Largest `|g_ij|`, the natural unit of dimensionless time.
    pub fn max_coupling(&self) -> T {
        let n = self.sites();
        let mut best = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(self.hopping[(i, j)].abs());
                }
            }
        }
        best
    }

    /// Replaces the diagonal of `W`.
    pub fn with_frequencies(mut self, frequencies: &[T]) -> Result<Self> {
        if frequencies.len() != self.sites() {
            return Err(Error::DimensionMismatch {
                expected: self.sites(),
                got: frequencies.len(),
            });
        }
        for (i, w) in frequencies.iter().enumerate() {
            self.hopping[(i, i)] = *w;
        }
        Ok(self)
    }

    pub fn with_dissipation(self, dissipation: &DissipationSpec<T>) -> Result<Self> {
        Self::new(self.hopping, dissipation)
    }

    /// Same model with `W -> -W`; evolving under it runs the closed dynamics backwards.
    pub fn time_reversed(&self) -> Self {
        CouplingModel {
            hopping: -self.hopping.clone(),
            gain_loss: self.gain_loss.clone(),
            injection: self.injection.clone(),
        }
    }
}

/// Builds `W`, `L`, `M` for a physical array.
pub fn build_model(
    config: &ArrayConfig,
    dissipation: &DissipationSpec<f64>,
) -> Result<CouplingModel<f64>> {
    config.validate()?;
    config.sphere.check_dipole_regime(config.beam.wavelength);
    let omega = config.dressed_frequencies()?;
    let mut w = config.hopping_rates()?;
    for (i, om) in omega.iter().enumerate() {
        w[(i, i)] = *om;
    }
    CouplingModel::new(w, dissipation)
}

/// Matrix of second moments `C_ij = <b_i^dag b_j>` at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationState<T: Real> {
    pub matrix: DMatrix<Complex<T>>,
    pub time: T,
}

impl<T: Real> CorrelationState<T> {
    pub fn new(matrix: DMatrix<Complex<T>>, time: T) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid("correlation matrix must be square"));
        }
        Ok(CorrelationState { matrix, time })
    }

    pub fn sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn populations(&self) -> Vec<T> {
        self.matrix.diagonal().iter().map(|c| c.re).collect()
    }

    pub fn trace(&self) -> T {
        self.matrix
            .diagonal()
            .iter()
            .fold(T::zero(), |acc, c| acc + c.re)
    }

    /// `max |C - C^dag|`.
    pub fn hermiticity_error(&self) -> T {
        let n = self.sites();
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                let d = self.matrix[(i, j)] - self.matrix[(j, i)].conj();
                worst = worst.max(d.modulus());
            }
        }
        worst
    }

    /// `C <- (C + C^dag) / 2`.
    pub fn hermitize(&mut self) {
        hermitize(&mut self.matrix);
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> T {
        let mut h = self.matrix.clone();
        hermitize(&mut h);
        h.symmetric_eigenvalues()
            .iter()
            .fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(*b))
    }

    /// Hermitian within `1e-10` and PSD down to `-1e-8`, both relative to
    /// `max(1, tr C)`.
    pub fn validate(&self) -> Result<()> {
        let scale = self.trace().abs().max(T::one());
        let herm = self.hermiticity_error();
        if herm > lit::<T>(1e-10) * scale {
            return Err(Error::invalid(format!(
                "correlation matrix not Hermitian (error {herm:e})"
            )));
        }
        if let Some((i, c)) = self
            .matrix
            .diagonal()
            .iter()
            .enumerate()
            .find(|(_, c)| c.re < lit::<T>(-1e-8) * scale)
        {
            return Err(Error::invalid(format!(
                "negative population {:e} at site {}",
                c.re,
                i + 1
            )));
        }
        let min = self.min_eigenvalue();
        if min < lit::<T>(-1e-8) * scale {
            return Err(Error::invalid(format!(
                "correlation matrix not PSD (min eigenvalue {min:e})"
            )));
        }
        Ok(())
    }
}

pub(crate) fn hermitize<T: Real>(m: &mut DMatrix<Complex<T>>) {
    let n = m.nrows();
    let half: T = lit(0.5);
    for i in 0..n {
        m[(i, i)] = Complex::new(m[(i, i)].re, T::zero());
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()).scale(half);
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Product thermal state: `C = diag(n_1, ..., n_N)` at `t = 0`.
pub fn thermal_state<T: Real>(occupations: &[T]) -> Result<CorrelationState<T>> {
    if occupations.is_empty() {
        return Err(Error::invalid("thermal state needs at least one site"));
    }
    if let Some((i, n)) = occupations
        .iter()
        .enumerate()
        .find(|(_, n)| !(**n >= T::zero()) || !n.is_finite())
    {
        return Err(Error::invalid(format!(
            "occupation at site {} must be >= 0, got {n}",
            i + 1
        )));
    }
    let diag = DVector::from_iterator(
        occupations.len(),
        occupations.iter().map(|n| Complex::new(*n, T::zero())),
    );
    CorrelationState::new(DMatrix::from_diagonal(&diag), T::zero())
}

/// Occupations for a single kicked site (0-based) over a uniform background.
pub fn kick_occupations<T: Real>(sites: usize, kicked: usize, kick: T, background: T) -> Vec<T> {
    (0..sites)
        .map(|i| if i == kicked { kick } else { background })
        .collect()
}
