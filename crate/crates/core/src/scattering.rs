//! Phonon scattering off a gain-loss pair embedded in an infinite chain.
//!
//! Energies and rates are in units of the nearest-neighbour hopping `g`:
//! `delta = E - Omega`, `Gamma` the feedback rate. Sites are labelled by an
//! integer `x`; the lossy site sits at `x = 1` and the amplifying one at
//! `x = 2` for loss-to-gain incidence. Amplitudes obey
//!
//! ```text
//! delta a_x = v_x a_x + sum_d h_d (a_{x+d} + a_{x-d})
//! ```
//!
//! with `v_1 = -i Gamma/2`, `v_2 = +i Gamma/2` and `h = [1]` (nearest) or
//! `h = [1, 1/2]` (next-nearest). Outside the pair the wave is
//! `e^{ikx} + beta e^{-ikx}` for `x <= 0` and `gamma e^{ik(x-3)}` for `x >= 3`.
//! Gain-to-loss incidence is the same problem with `Gamma -> -Gamma`.
//!
//! A mode `e^{i kappa x}` counts as right-moving when `d delta / d kappa < 0`.
//! This is the orientation under which the nearest-neighbour closed form
//! below holds with `kb = arccos(delta/2)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{ComplexField, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Complex, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hopping {
    Nearest,
    /// Second-neighbour hopping `g2 = g1 / 2`.
    NextNearest,
}

impl Hopping {
    /// `h_d` for `d = 1, 2, ...`.
    pub fn amplitudes<T: Real>(self) -> Vec<T> {
        match self {
            Hopping::Nearest => vec![T::one()],
            Hopping::NextNearest => vec![T::one(), lit(0.5)],
        }
    }

    pub fn range(self) -> usize {
        match self {
            Hopping::Nearest => 1,
            Hopping::NextNearest => 2,
        }
    }

    /// Open propagating band `(lower, upper)` of `delta`.
    pub fn band(self) -> (f64, f64) {
        match self {
            Hopping::Nearest => (-2.0, 2.0),
            Hopping::NextNearest => (-1.5, 3.0),
        }
    }

    /// Energies where the number of propagating channels changes inside the band.
    pub fn thresholds(self) -> &'static [f64] {
        match self {
            Hopping::Nearest => &[],
            Hopping::NextNearest => &[-1.0],
        }
    }

    /// `d delta / d kappa` at wavevector `kappa`.
    pub fn group_velocity<T: Real>(self, kappa: T) -> T {
        self.amplitudes::<T>()
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, h)| {
                let d = lit::<T>((i + 1) as f64);
                acc - lit::<T>(2.0) * *h * d * (d * kappa).sin()
            })
    }

    /// `delta(kappa) = sum_d 2 h_d cos(d kappa)`.
    pub fn dispersion<T: Real>(self, kappa: T) -> T {
        self.amplitudes::<T>()
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, h)| {
                acc + lit::<T>(2.0) * *h * (lit::<T>((i + 1) as f64) * kappa).cos()
            })
    }

    /// Roots `c = cos k` of the dispersion relation at `delta`, largest first.
    fn cosine_roots<T: Real>(self, delta: T) -> Vec<T> {
        match self {
            Hopping::Nearest => vec![delta * lit(0.5)],
            Hopping::NextNearest => {
                // 2c + (2c^2 - 1) = delta
                let disc = (lit::<T>(3.0) + lit::<T>(2.0) * delta)
                    .max(T::zero())
                    .sqrt();
                vec![(-T::one() + disc) * lit(0.5), (-T::one() - disc) * lit(0.5)]
            }
        }
    }

    fn check_energy<T: Real>(self, delta: T) -> Result<()> {
        let d = to_f64(delta);
        let (lo, hi) = self.band();
        if !(d > lo && d < hi) {
            return Err(Error::OutsideBand {
                delta: d,
                lower: lo,
                upper: hi,
            });
        }
        if let Some(t) = self.thresholds().iter().find(|t| (d - **t).abs() < 1e-9) {
            return Err(Error::invalid(format!(
                "delta = {d} sits on the channel threshold {t}; the mode basis is degenerate there"
            )));
        }
        Ok(())
    }

    /// Number of propagating channels at `delta`.
    pub fn channel_count<T: Real>(self, delta: T) -> usize {
        if self.check_energy(delta).is_err() {
            return 0;
        }
        self.cosine_roots(delta)
            .iter()
            .filter(|c| c.abs() < T::one())
            .count()
    }
}

impl fmt::Display for Hopping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hopping::Nearest => "nearest",
            Hopping::NextNearest => "next-nearest",
        })
    }
}

impl FromStr for Hopping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "nearest" | "nearest-neighbor" => Ok(Hopping::Nearest),
            "next-nearest" | "next-nearest-neighbor" => Ok(Hopping::NextNearest),
            other => Err(Error::invalid(format!(
                "unknown hopping model '{other}' (expected nearest or next-nearest)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LossToGain,
    GainToLoss,
}

impl Direction {
    /// Rate seen by the site at `x = 1` being lossy.
    fn effective_rate<T: Real>(self, gamma_rate: T) -> T {
        match self {
            Direction::LossToGain => gamma_rate,
            Direction::GainToLoss => -gamma_rate,
        }
    }
}

/// Which propagating channel carries the incident wave. The primary channel
/// exists across the whole band; the secondary one only where two channels
/// coexist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidentChannel {
    Primary,
    Secondary,
}

impl IncidentChannel {
    fn index(self) -> usize {
        match self {
            IncidentChannel::Primary => 0,
            IncidentChannel::Secondary => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterParams<T> {
    pub delta: T,
    pub gamma_rate: T,
    pub hopping: Hopping,
    pub direction: Direction,
    pub channel: IncidentChannel,
}

impl<T: Real> ScatterParams<T> {
    pub fn new(delta: T, gamma_rate: T, hopping: Hopping, direction: Direction) -> Self {
        ScatterParams {
            delta,
            gamma_rate,
            hopping,
            direction,
            channel: IncidentChannel::Primary,
        }
    }

    pub fn with_channel(mut self, channel: IncidentChannel) -> Self {
        self.channel = channel;
        self
    }

    pub fn reversed(mut self) -> Self {
        self.direction = match self.direction {
            Direction::LossToGain => Direction::GainToLoss,
            Direction::GainToLoss => Direction::LossToGain,
        };
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatteringSolution<T: Real> {
    pub delta: T,
    pub gamma_rate: T,
    pub direction: Direction,
    /// Reflection back into the incident channel.
    pub beta: Complex<T>,
    /// Transmission in the incident channel.
    pub transmission: Complex<T>,
    /// Reflection and transmission into the other propagating channel, when
    /// there is one.
    pub beta_cross: Option<Complex<T>>,
    pub transmission_cross: Option<Complex<T>>,
    /// Largest residual of the site equations (zero for the closed form).
    pub residual: T,
}

/// `kappa` of the right-moving incident wave `e^{i kappa x}` in the primary
/// channel. For nearest hopping this is `arccos(delta/2)`, in `(0, pi)`.
pub fn wavevector<T: Real>(delta: T, hopping: Hopping) -> Result<T> {
    channel_wavevector(delta, hopping, IncidentChannel::Primary)?
        .ok_or_else(|| Error::invalid("no propagating channel"))
}

/// Signed wavevector of the right-moving wave in `channel`, or `None` when
/// that channel is evanescent at `delta`.
pub fn channel_wavevector<T: Real>(
    delta: T,
    hopping: Hopping,
    channel: IncidentChannel,
) -> Result<Option<T>> {
    hopping.check_energy(delta)?;
    let roots = hopping.cosine_roots(delta);
    let c = match roots.get(channel.index()) {
        Some(c) if c.abs() < T::one() => *c,
        _ => return Ok(None),
    };
    let k = c.acos();
    Ok(Some(if hopping.group_velocity(k) < T::zero() {
        k
    } else {
        -k
    }))
}

#[derive(Clone, Copy, Debug)]
enum ModeKind {
    /// `e^{i kappa x}` with `kappa` in `(-pi, pi)`.
    Propagating {
        right: bool,
        channel: usize,
    },
    Evanescent,
}

#[derive(Clone, Copy, Debug)]
struct Mode<T: Real> {
    q: Complex<T>,
    kind: ModeKind,
}

/// All `2 r` bulk solutions `q^x` at `delta`.
fn bulk_modes<T: Real>(delta: T, hopping: Hopping) -> Vec<Mode<T>> {
    let mut modes = Vec::with_capacity(2 * hopping.range());
    for (ch, c) in hopping.cosine_roots(delta).into_iter().enumerate() {
        if c.abs() < T::one() {
            let k = c.acos();
            for kappa in [k, -k] {
                modes.push(Mode {
                    q: Complex::new(kappa.cos(), kappa.sin()),
                    kind: ModeKind::Propagating {
                        right: hopping.group_velocity(kappa) < T::zero(),
                        channel: ch,
                    },
                });
            }
        } else {
            // q + 1/q = 2c with real c, |c| > 1
            let s = (c * c - T::one()).sqrt();
            for q in [c + s, c - s] {
                modes.push(Mode {
                    q: Complex::new(q, T::zero()),
                    kind: ModeKind::Evanescent,
                });
            }
        }
    }
    modes
}

/// A basis function `q^{x - reference}` used outside the explicit window.
#[derive(Clone, Copy, Debug)]
struct Outgoing<T: Real> {
    q: Complex<T>,
    reference: i64,
    channel: Option<usize>,
}

struct System<T: Real> {
    matrix: DMatrix<Complex<T>>,
    rhs: DVector<Complex<T>>,
    /// Unknown index of each left-side outgoing mode.
    left: Vec<(usize, Outgoing<T>)>,
    right: Vec<(usize, Outgoing<T>)>,
    incident_channel: usize,
}

fn build_system<T: Real>(params: &ScatterParams<T>, half_length: usize) -> Result<System<T>> {
    let hopping = params.hopping;
    hopping.check_energy(params.delta)?;
    if !params.gamma_rate.is_finite() {
        return Err(Error::invalid("gain-loss rate must be finite"));
    }
    if half_length < 1 {
        return Err(Error::invalid("chain half length must be >= 1"));
    }
    let h = hopping.amplitudes::<T>();
    let r = hopping.range() as i64;
    let modes = bulk_modes(params.delta, hopping);
    let incident = modes
        .iter()
        .find(|m| matches!(m.kind, ModeKind::Propagating { right: true, channel, .. } if channel == params.channel.index()))
        .copied()
        .ok_or_else(|| Error::invalid(format!("channel {:?} is not propagating at delta = {}", params.channel, params.delta)))?;
    let incident_channel = params.channel.index();

    let xa = 1 - half_length as i64;
    let xb = 2 + half_length as i64;
    let nw = (xb - xa + 1) as usize;
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut next = nw;
    for m in &modes {
        let (goes_left, reference, channel) = match m.kind {
            ModeKind::Propagating {
                right: true,
                channel,
                ..
            } => (false, 3, Some(channel)),
            ModeKind::Propagating {
                right: false,
                channel,
                ..
            } => (true, 0, Some(channel)),
            ModeKind::Evanescent => {
                if m.q.modulus() > T::one() {
                    (true, xa - 1, None)
                } else {
                    (false, xb + 1, None)
                }
            }
        };
        let out = Outgoing {
            q: m.q,
            reference,
            channel,
        };
        if goes_left {
            left.push((next, out));
        } else {
            right.push((next, out));
        }
        next += 1;
    }
    let unknowns = next;
    let rows = nw + 2 * r as usize;
    if rows != unknowns {
        return Err(Error::invalid(format!(
            "mode count mismatch: {rows} equations, {unknowns} unknowns"
        )));
    }

    let zero = Complex::new(T::zero(), T::zero());
    let mut matrix = DMatrix::from_element(rows, unknowns, zero);
    let mut rhs = DVector::from_element(rows, zero);
    let half_rate = params.direction.effective_rate(params.gamma_rate) * lit(0.5);
    let potential = |x: i64| match x {
        1 => Complex::new(T::zero(), -half_rate),
        2 => Complex::new(T::zero(), half_rate),
        _ => zero,
    };
    let pow = |q: Complex<T>, n: i64| -> Complex<T> { q.powi(n as i32) };

    for (row, x) in ((xa - r)..=(xb + r)).enumerate() {
        // add `weight * a_y` to the equation in `row`
        let mut add = |y: i64, weight: Complex<T>| {
            if (xa..=xb).contains(&y) {
                matrix[(row, (y - xa) as usize)] += weight;
            } else if y < xa {
                // incident wave moves to the right-hand side
                rhs[row] -= weight * pow(incident.q, y);
                for (col, m) in &left {
                    matrix[(row, *col)] += weight * pow(m.q, y - m.reference);
                }
            } else {
                for (col, m) in &right {
                    matrix[(row, *col)] += weight * pow(m.q, y - m.reference);
                }
            }
        };
        add(x, Complex::new(params.delta, T::zero()) - potential(x));
        for (d, hd) in h.iter().enumerate() {
            let d = d as i64 + 1;
            add(x + d, Complex::new(-*hd, T::zero()));
            add(x - d, Complex::new(-*hd, T::zero()));
        }
    }
    Ok(System {
        matrix,
        rhs,
        left,
        right,
        incident_channel,
    })
}

fn condition_estimate<T: Real>(m: &DMatrix<Complex<T>>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(T::zero(), |a, b| a.max(*b));
    let min = sv.iter().fold(max, |a, b| a.min(*b));
    to_f64(max) / to_f64(min)
}

struct Solved<T: Real> {
    solution: ScatteringSolution<T>,
    determinant: Complex<T>,
}

fn solve_system<T: Real>(params: &ScatterParams<T>, half_length: usize) -> Result<Solved<T>> {
    let sys = build_system(params, half_length)?;
    let lu = sys.matrix.clone().lu();
    let determinant = lu.determinant();
    let x = lu.solve(&sys.rhs).ok_or_else(|| Error::Singular {
        condition: condition_estimate(&sys.matrix),
    })?;
    let resid = &sys.matrix * &x - &sys.rhs;
    let residual = resid.iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    let scale = x.iter().fold(T::one(), |a, z| a.max(z.modulus()));
    if !(residual <= lit::<T>(1e-6) * scale) {
        return Err(Error::Singular {
            condition: condition_estimate(&sys.matrix),
        });
    }
    let pick = |side: &[(usize, Outgoing<T>)], same: bool| {
        side.iter()
            .find(|(_, m)| match m.channel {
                Some(c) => (c == sys.incident_channel) == same,
                None => false,
            })
            .map(|(col, _)| x[*col])
    };
    let beta = pick(&sys.left, true).expect("incident channel has a reflected partner");
    let transmission = pick(&sys.right, true).expect("incident channel has a transmitted partner");
    Ok(Solved {
        solution: ScatteringSolution {
            delta: params.delta,
            gamma_rate: params.gamma_rate,
            direction: params.direction,
            beta,
            transmission,
            beta_cross: pick(&sys.left, false),
            transmission_cross: pick(&sys.right, false),
            residual,
        },
        determinant,
    })
}

/// Default explicit window half length for [`scatter_numeric`].
pub const DEFAULT_HALF_LENGTH: usize = 20;

/// Solves the site equations with the exact outside ansatz.
///
/// Sites `x in [1 - half_length, 2 + half_length]` are explicit unknowns.
/// Outside them the wave is the incident mode plus every outgoing bulk
/// solution: reflected and transmitted propagating modes and the decaying
/// evanescent ones. Equations are imposed at every site whose equation touches
/// an explicit amplitude, which gives a square system for any window.
pub fn scatter_numeric<T: Real>(
    params: &ScatterParams<T>,
    half_length: usize,
) -> Result<ScatteringSolution<T>> {
    solve_system(params, half_length).map(|s| s.solution)
}

/// Closed-form nearest-neighbour coefficients for either direction.
///
/// ```text
/// s    = sqrt(4 - delta^2)
/// den  = 16i - 2i G^2 - 20i delta^2 + i G^2 delta^2 + 4i delta^4
///        - 12 delta s + G^2 delta s + 4 delta^3 s
/// beta = -2i (G^2 + 2 G s) / den,   gamma = 8 s / den
/// ```
///
/// with `G = Gamma` for loss-to-gain incidence and `G = -Gamma` otherwise.
pub fn scatter_closed_form<T: Real>(
    delta: T,
    gamma_rate: T,
    direction: Direction,
) -> Result<ScatteringSolution<T>> {
    Hopping::Nearest.check_energy(delta)?;
    let g = direction.effective_rate(gamma_rate);
    let d = delta;
    let s = (lit::<T>(4.0) - d * d).sqrt();
    let (g2, d2) = (g * g, d * d);
    let im = lit::<T>(16.0) - lit::<T>(2.0) * g2 - lit::<T>(20.0) * d2
        + g2 * d2
        + lit::<T>(4.0) * d2 * d2;
    let re = -lit::<T>(12.0) * d * s + g2 * d * s + lit::<T>(4.0) * d2 * d * s;
    let den = Complex::new(re, im);
    if den.modulus() == T::zero() {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let num = Complex::new(T::zero(), -lit::<T>(2.0) * (g2 + lit::<T>(2.0) * g * s));
    Ok(ScatteringSolution {
        delta,
        gamma_rate,
        direction,
        beta: num / den,
        transmission: Complex::new(lit::<T>(8.0) * s, T::zero()) / den,
        beta_cross: None,
        transmission_cross: None,
        residual: T::zero(),
    })
}

/// Zero-reflection rate for gain-to-loss incidence with nearest hopping,
/// `Gamma = 2 sqrt(4 - delta^2)`.
pub fn nearest_zero_reflection_rate<T: Real>(delta: T) -> T {
    lit::<T>(2.0) * (lit::<T>(4.0) - delta * delta).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Numeric,
}

/// `beta` in both directions and the (direction-independent) transmission.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionPair<T: Real> {
    pub loss_to_gain: ScatteringSolution<T>,
    pub gain_to_loss: ScatteringSolution<T>,
}

pub fn reflection_pair<T: Real>(
    delta: T,
    gamma_rate: T,
    hopping: Hopping,
    method: Method,
) -> Result<ReflectionPair<T>> {
    let run = |direction| match method {
        Method::ClosedForm => {
            if hopping != Hopping::Nearest {
                return Err(Error::invalid(
                    "the closed form covers nearest hopping only",
                ));
            }
            scatter_closed_form(delta, gamma_rate, direction)
        }
        Method::Numeric => scatter_numeric(
            &ScatterParams::new(delta, gamma_rate, hopping, direction),
            2,
        ),
    };
    Ok(ReflectionPair {
        loss_to_gain: run(Direction::LossToGain)?,
        gain_to_loss: run(Direction::GainToLoss)?,
    })
}

/// `eta = ln(|beta_gl|^2 / |beta_lg|^2)` clamped to `[-eta_max, eta_max]`.
/// `None` when both reflections vanish (below `1e-12`).
pub fn eta<T: Real>(beta_lg: Complex<T>, beta_gl: Complex<T>, eta_max: T) -> Option<T> {
    let (a, b) = (beta_gl.modulus(), beta_lg.modulus());
    let tiny = lit::<T>(1e-12);
    if a < tiny && b < tiny {
        return None;
    }
    let raw = lit::<T>(2.0) * (a.ln() - b.ln());
    Some(if raw.is_finite() {
        raw.max(-eta_max).min(eta_max)
    } else if a > b {
        eta_max
    } else {
        -eta_max
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapPoint<T: Real> {
    pub delta: T,
    pub gamma_rate: T,
    pub eta: T,
    /// Both reflections vanish; `eta` is reported as zero.
    pub indeterminate: bool,
    pub beta_lg: Complex<T>,
    pub beta_gl: Complex<T>,
    pub transmission: Complex<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymmetryMap<T: Real> {
    pub hopping: Hopping,
    pub eta_max: T,
    /// Row-major over `(delta, Gamma)`, delta outermost; out-of-band deltas
    /// are left out.
    pub points: Vec<MapPoint<T>>,
    /// Grid points dropped because `delta` is outside the band or on a threshold.
    pub skipped: usize,
}

/// Evaluates `eta` on the `deltas x gammas` grid in parallel.
pub fn asymmetry_map<T: Real>(
    deltas: &[T],
    gammas: &[T],
    hopping: Hopping,
    method: Method,
    eta_max: T,
) -> Result<AsymmetryMap<T>> {
    if !(eta_max > T::zero()) {
        return Err(Error::invalid("eta_max must be > 0"));
    }
    let usable: Vec<T> = deltas
        .iter()
        .copied()
        .filter(|d| hopping.check_energy(*d).is_ok())
        .collect();
    let skipped = (deltas.len() - usable.len()) * gammas.len();
    let points = usable
        .par_iter()
        .flat_map_iter(|&d| gammas.iter().map(move |&g| (d, g)))
        .map(|(d, g)| {
            let pair = reflection_pair(d, g, hopping, method)?;
            let (blg, bgl) = (pair.loss_to_gain.beta, pair.gain_to_loss.beta);
            let e = eta(blg, bgl, eta_max);
            Ok(MapPoint {
                delta: d,
                gamma_rate: g,
                eta: e.unwrap_or(T::zero()),
                indeterminate: e.is_none(),
                beta_lg: blg,
                beta_gl: bgl,
                transmission: pair.loss_to_gain.transmission,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AsymmetryMap {
        hopping,
        eta_max,
        points,
        skipped,
    })
}

/// One zero of the gain-to-loss reflection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocusRoot<T> {
    pub gamma_rate: T,
    /// `|beta_gl|` at the root.
    pub beta_gl: T,
    /// Residual `|beta_lg|^2` at the root.
    pub beta2_lg: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocusPoint<T> {
    pub delta: T,
    /// `[Gamma_1, Gamma_2]`: zeros for incidence in the primary and the
    /// secondary channel. `None` where the channel is closed or no root lies
    /// in the search bracket.
    pub branches: [Option<LocusRoot<T>>; 2],
}

/// `beta_gl(Gamma) * det A(Gamma)`. The gain-loss rate enters two rows of
/// `A`, so this is a polynomial of degree two in `Gamma` that vanishes at
/// `Gamma = 0`.
fn reflection_numerator<T: Real>(
    delta: T,
    gamma_rate: T,
    hopping: Hopping,
    channel: IncidentChannel,
) -> Result<Complex<T>> {
    let p =
        ScatterParams::new(delta, gamma_rate, hopping, Direction::GainToLoss).with_channel(channel);
    let solved = solve_system(&p, 1)?;
    Ok(solved.solution.beta * solved.determinant)
}

fn find_root<T: Real>(
    delta: T,
    hopping: Hopping,
    channel: IncidentChannel,
    gamma_max: T,
    scan: usize,
) -> Result<Option<LocusRoot<T>>> {
    let reduced =
        |g: T| -> Result<Complex<T>> { Ok(reflection_numerator(delta, g, hopping, channel)? / g) };
    // N / Gamma is linear in Gamma; its slope fixes the real reduction
    let lo = gamma_max / lit::<T>(scan as f64);
    let slope = (reduced(gamma_max)? - reduced(lo)?) / (gamma_max - lo);
    let f = |g: T| -> Result<T> { Ok((reduced(g)? * slope.conj()).re) };
    let mut prev_g = lo;
    let mut prev_f = f(lo)?;
    let mut bracket = None;
    for j in 2..=scan {
        let g = gamma_max * lit::<T>(j as f64) / lit::<T>(scan as f64);
        let fg = f(g)?;
        if prev_f == T::zero() {
            bracket = Some((prev_g, prev_g));
            break;
        }
        if prev_f * fg <= T::zero() {
            bracket = Some((prev_g, g));
            break;
        }
        prev_g = g;
        prev_f = fg;
    }
    let Some((mut a, mut b)) = bracket else {
        return Ok(None);
    };
    let mut fa = f(a)?;
    let tol = lit::<T>(1e-12);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = (a + b) * lit(0.5);
        let fm = f(m)?;
        if fm == T::zero() {
            a = m;
            b = m;
            break;
        }
        if fa * fm < T::zero() {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    let root = (a + b) * lit(0.5);
    let p = ScatterParams::new(delta, root, hopping, Direction::GainToLoss).with_channel(channel);
    let gl = scatter_numeric(&p, 2)?;
    let lg = scatter_numeric(&p.reversed(), 2)?;
    let beta_gl = gl.beta.modulus();
    // a complex zero of N would leave a real minimum of |beta| that is not a zero
    if beta_gl > lit::<T>(1e-8) {
        return Ok(None);
    }
    Ok(Some(LocusRoot {
        gamma_rate: root,
        beta_gl,
        beta2_lg: lg.beta.modulus_squared(),
    }))
}

/// Zero-reflection rates `Gamma_1(delta)`, `Gamma_2(delta)` for gain-to-loss
/// incidence, searched on `(0, gamma_max]` by a sign scan of a real reduction
/// of `beta_gl` followed by bisection to `1e-12`.
pub fn zero_reflection_locus<T: Real>(
    deltas: &[T],
    hopping: Hopping,
    gamma_max: T,
) -> Result<Vec<LocusPoint<T>>> {
    if !(gamma_max > T::zero()) {
        return Err(Error::invalid("gamma_max must be > 0"));
    }
    deltas
        .par_iter()
        .map(|&delta| {
            let mut branches = [None, None];
            if hopping.check_energy(delta).is_ok() {
                for channel in [IncidentChannel::Primary, IncidentChannel::Secondary] {
                    if channel_wavevector(delta, hopping, channel)?.is_some() {
                        branches[channel.index()] =
                            find_root(delta, hopping, channel, gamma_max, 400)?;
                    }
                }
            }
            Ok(LocusPoint { delta, branches })
        })
        .collect()
}
