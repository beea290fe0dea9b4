//! Prethermalization observables.
//!
//! `A(t) = sum_i f_i n_i(t) / sum_i n_i(0)` with `f_i = (2i - N - 1)/(N - 1)`
//! measures where the phonons sit (`-1` all on the left site, `+1` all on the
//! right). `Abar(t)` is its running time average. For a closed model the
//! long-time populations follow from the conserved mode occupations
//! (generalized Gibbs ensemble):
//!
//! ```text
//! <n_i>_GGE = sum_k U_ik^2 <c_k^dag c_k>_0
//! ```

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::{SpectralPropagator, TrajectorySample};
use crate::error::{Error, Result};
use crate::lattice::{CorrelationState, CouplingModel};
use crate::scalar::{lit, to_f64, Complex, Real};

/// Position weights `f_i = (2i - N - 1)/(N - 1)`, `i = 1..N`.
pub fn position_weights<T: Real>(n: usize) -> Vec<T> {
    let denom = lit::<T>((n.max(2) - 1) as f64);
    (1..=n)
        .map(|i| lit::<T>(2.0 * i as f64 - n as f64 - 1.0) / denom)
        .collect()
}

/// `A` for one population vector, normalized by `total0`.
pub fn asymmetry_of<T: Real>(populations: &[T], total0: T) -> T {
    let f = position_weights::<T>(populations.len());
    populations
        .iter()
        .zip(&f)
        .fold(T::zero(), |a, (n, w)| a + *n * *w)
        / total0
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymmetrySeries<T> {
    pub time: Vec<T>,
    pub a: Vec<T>,
    pub abar: Vec<T>,
}

impl<T: Real> AsymmetrySeries<T> {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

fn initial_total<T: Real>(populations: &[T]) -> Result<T> {
    if populations.len() < 2 {
        return Err(Error::invalid("asymmetry needs at least 2 sites"));
    }
    let total = populations.iter().fold(T::zero(), |a, n| a + *n);
    if !(total > T::zero()) {
        return Err(Error::invalid(
            "initial population is zero; A(t) is undefined",
        ));
    }
    Ok(total)
}

/// `A(t)` per sample and `Abar(t)` by cumulative trapezoidal quadrature over
/// the recorded grid, measured from the first sample.
pub fn asymmetry<T: Real>(samples: &[TrajectorySample<T>]) -> Result<AsymmetrySeries<T>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("empty trajectory"))?;
    let total0 = initial_total(&first.populations)?;
    let time: Vec<T> = samples.iter().map(|s| s.time).collect();
    let a: Vec<T> = samples
        .iter()
        .map(|s| asymmetry_of(&s.populations, total0))
        .collect();
    let t0 = time[0];
    let mut abar = Vec::with_capacity(a.len());
    let mut integral = T::zero();
    abar.push(a[0]);
    for k in 1..a.len() {
        integral += (time[k] - time[k - 1]) * (a[k] + a[k - 1]) * lit(0.5);
        let span = time[k] - t0;
        abar.push(if span > T::zero() {
            integral / span
        } else {
            a[k]
        });
    }
    Ok(AsymmetrySeries { time, a, abar })
}

/// `A` and the exact `Abar` at each of `times` for a closed model.
pub fn spectral_asymmetry<T: Real>(
    prop: &SpectralPropagator<T>,
    c0: &CorrelationState<T>,
    times: &[T],
) -> Result<AsymmetrySeries<T>> {
    let total0 = initial_total(&c0.populations())?;
    let a = times
        .iter()
        .map(|t| asymmetry_of(&prop.populations(*t), total0))
        .collect();
    let abar = times
        .iter()
        .map(|t| asymmetry_of(&prop.running_mean_populations(*t), total0))
        .collect();
    Ok(AsymmetrySeries {
        time: times.to_vec(),
        a,
        abar,
    })
}

/// GGE prediction for the quasi-stationary site populations.
#[derive(Clone, Debug, PartialEq)]
pub struct GgePrediction<T> {
    /// Mode frequencies `epsilon_k`, ascending.
    pub mode_frequencies: Vec<T>,
    /// Conserved `<c_k^dag c_k>_0`.
    pub mode_occupations: Vec<T>,
    /// `<b_i^dag b_i>_GGE`.
    pub site_populations: Vec<T>,
    /// Orthogonal `U` with `U W U^T` diagonal (rows are modes).
    pub modes: DMatrix<T>,
    /// Smallest gap between consecutive mode frequencies.
    pub min_gap: T,
    /// Set when `min_gap < 1e-9 * max |epsilon_k|`; the prediction need not
    /// match the time average then.
    pub degenerate: bool,
}

/// Diagonalizes `W` and projects `C0` onto its modes.
pub fn gge_predict<T: Real>(
    model: &CouplingModel<T>,
    c0: &CorrelationState<T>,
) -> Result<GgePrediction<T>> {
    if !model.is_closed() {
        return Err(Error::invalid(
            "GGE prediction needs a closed model (L = M = 0)",
        ));
    }
    if !model.is_symmetric() {
        return Err(Error::invalid(format!(
            "GGE prediction needs a symmetric W (asymmetry {:e})",
            to_f64(model.asymmetry())
        )));
    }
    if c0.sites() != model.sites() {
        return Err(Error::DimensionMismatch {
            expected: model.sites(),
            got: c0.sites(),
        });
    }
    let n = model.sites();
    let eig = SymmetricEigen::new(model.hopping().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| to_f64(eig.eigenvalues[*a]).total_cmp(&to_f64(eig.eigenvalues[*b])));
    let u = DMatrix::from_fn(n, n, |k, l| eig.eigenvectors[(l, order[k])]);
    let eps: Vec<T> = order.iter().map(|k| eig.eigenvalues[*k]).collect();

    // <c_k^dag c_k> = sum_lm U_kl U_km C0_ml
    let occupations: Vec<T> = (0..n)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for l in 0..n {
                for m in 0..n {
                    acc += c0.matrix[(m, l)].scale(u[(k, l)] * u[(k, m)]);
                }
            }
            acc.re
        })
        .collect();
    let sites = (0..n)
        .map(|i| (0..n).fold(T::zero(), |a, k| a + u[(k, i)] * u[(k, i)] * occupations[k]))
        .collect();
    let scale = eps.iter().fold(T::zero(), |a, e| a.max(e.abs()));
    let min_gap = eps
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b));
    let min_gap = if n < 2 { T::zero() } else { min_gap };
    Ok(GgePrediction {
        mode_frequencies: eps,
        mode_occupations: occupations,
        site_populations: sites,
        modes: u,
        min_gap,
        degenerate: n >= 2 && min_gap < lit::<T>(1e-9) * scale,
    })
}

/// Axis along which plateau windows are laid out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAxis {
    Linear,
    /// `log10 t`; samples at `t <= 0` are ignored.
    #[default]
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauSettings {
    /// Window length on the chosen axis; `None` means 10% of the covered span.
    pub window: Option<f64>,
    pub epsilon: f64,
    pub axis: TimeAxis,
}

impl Default for PlateauSettings {
    fn default() -> Self {
        PlateauSettings {
            window: None,
            epsilon: 0.02,
            axis: TimeAxis::Log,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    pub present: bool,
    pub t_start: f64,
    pub t_end: f64,
    pub level: f64,
}

impl PlateauReport {
    fn absent() -> Self {
        PlateauReport {
            present: false,
            t_start: f64::NAN,
            t_end: f64::NAN,
            level: f64::NAN,
        }
    }

    /// Length of the plateau on the given axis; zero when absent.
    pub fn span(&self, axis: TimeAxis) -> f64 {
        if !self.present {
            return 0.0;
        }
        match axis {
            TimeAxis::Linear => self.t_end - self.t_start,
            TimeAxis::Log => self.t_end.log10() - self.t_start.log10(),
        }
    }
}

/// Longest stretch where `Abar` stays within `epsilon` of its window mean and
/// that mean is clearly away from both zero and the initial value
/// (`|mean| > 3 epsilon`, `|mean - Abar(t_0)| > 3 epsilon`). The second
/// condition keeps the short-time stretch before any transport from counting.
///
/// Every sample starts a window of the given length. Windows that qualify and
/// start at consecutive samples are merged; the longest merged run is
/// reported with the mean of `Abar` over it.
pub fn detect_plateau<T: Real>(
    series: &AsymmetrySeries<T>,
    settings: &PlateauSettings,
) -> Result<PlateauReport> {
    if !(settings.epsilon > 0.0) {
        return Err(Error::invalid("plateau flatness epsilon must be > 0"));
    }
    let points: Vec<(f64, f64)> = series
        .time
        .iter()
        .zip(&series.abar)
        .filter_map(|(t, a)| {
            let t = to_f64(*t);
            let x = match settings.axis {
                TimeAxis::Linear => Some(t),
                TimeAxis::Log => (t > 0.0).then(|| t.log10()),
            };
            x.map(|x| (x, to_f64(*a)))
        })
        .collect();
    if points.len() < 2 {
        return Ok(PlateauReport::absent());
    }
    let span = points[points.len() - 1].0 - points[0].0;
    let window = settings.window.unwrap_or(0.1 * span);
    if !(window > 0.0) {
        return Err(Error::invalid("plateau window must be > 0"));
    }
    if span < 10.0 * window * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "series spans {span} but needs at least 10 windows of {window}"
        )));
    }
    let eps = settings.epsilon;
    let initial = points[0].1;
    // qualifying window per start index: end index (inclusive)
    let mut qualifying: Vec<Option<usize>> = vec![None; points.len()];
    let mut end = 0;
    for s in 0..points.len() {
        end = end.max(s);
        while end + 1 < points.len() && points[end + 1].0 <= points[s].0 + window * (1.0 + 1e-12) {
            end += 1;
        }
        // stop once the window runs past the last sample
        if end + 1 == points.len() && points[end].0 < points[s].0 + window * (1.0 - 1e-9) {
            break;
        }
        let seg = &points[s..=end];
        let mean = seg.iter().map(|p| p.1).sum::<f64>() / seg.len() as f64;
        let flat = seg.iter().all(|p| (p.1 - mean).abs() < eps);
        if flat && mean.abs() > 3.0 * eps && (mean - initial).abs() > 3.0 * eps {
            qualifying[s] = Some(end);
        }
    }
    let mut best: Option<(usize, usize)> = None;
    let mut s = 0;
    while s < qualifying.len() {
        if qualifying[s].is_none() {
            s += 1;
            continue;
        }
        let start = s;
        let mut stop = qualifying[s].unwrap();
        while s + 1 < qualifying.len() {
            match qualifying[s + 1] {
                Some(e) => {
                    stop = stop.max(e);
                    s += 1;
                }
                None => break,
            }
        }
        let len = points[stop].0 - points[start].0;
        if best.is_none_or(|(a, b)| len > points[b].0 - points[a].0) {
            best = Some((start, stop));
        }
        s += 1;
    }
    Ok(match best {
        None => PlateauReport::absent(),
        Some((a, b)) => {
            let seg = &points[a..=b];
            let level = seg.iter().map(|p| p.1).sum::<f64>() / seg.len() as f64;
            let back = |x: f64| match settings.axis {
                TimeAxis::Linear => x,
                TimeAxis::Log => 10f64.powf(x),
            };
            PlateauReport {
                present: true,
                t_start: back(points[a].0),
                t_end: back(points[b].0),
                level,
            }
        }
    })
}

/// Parabolic trap-frequency profiles across the array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyProfile {
    MiddleLower,
    Uniform,
    MiddleHigher,
}

impl FrequencyProfile {
    pub const ALL: [FrequencyProfile; 3] = [
        FrequencyProfile::MiddleLower,
        FrequencyProfile::Uniform,
        FrequencyProfile::MiddleHigher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrequencyProfile::MiddleLower => "middle-lower",
            FrequencyProfile::Uniform => "uniform",
            FrequencyProfile::MiddleHigher => "middle-higher",
        }
    }

    /// `edge * (1 -/+ depth * (1 - x^2))` with `x` running from -1 to 1
    /// across the array: the edges sit at `edge`, the centre is lowered or
    /// raised by `depth * edge`.
    pub fn frequencies<T: Real>(self, n: usize, edge: T, depth: T) -> Vec<T> {
        let sign = match self {
            FrequencyProfile::MiddleLower => -T::one(),
            FrequencyProfile::Uniform => T::zero(),
            FrequencyProfile::MiddleHigher => T::one(),
        };
        let c = lit::<T>((n.max(2) - 1) as f64 / 2.0);
        (0..n)
            .map(|i| {
                let x = (lit::<T>(i as f64) - c) / c;
                edge * (T::one() + sign * depth * (T::one() - x * x))
            })
            .collect()
    }
}

impl fmt::Display for FrequencyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrequencyProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "middle-lower" => Ok(FrequencyProfile::MiddleLower),
            "uniform" => Ok(FrequencyProfile::Uniform),
            "middle-higher" => Ok(FrequencyProfile::MiddleHigher),
            other => Err(Error::invalid(format!(
                "unknown frequency profile '{other}' (expected middle-lower, uniform or middle-higher)"
            ))),
        }
    }
}

/// Dimensionless model for prethermalization runs: couplings divided by
/// `max |g_ij|`, diagonal replaced by `profile` with edge frequency `edge`
/// and relative depth `depth` (both in units of `max |g_ij|`).
pub fn prethermal_model<T: Real>(
    couplings: &DMatrix<T>,
    profile: FrequencyProfile,
    edge: T,
    depth: T,
) -> Result<CouplingModel<T>> {
    let n = couplings.nrows();
    let mut g = couplings.clone();
    g.fill_diagonal(T::zero());
    let scale = g.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    if !(scale > T::zero()) {
        return Err(Error::invalid("coupling matrix is zero; cannot normalize"));
    }
    let g = g / scale;
    CouplingModel::closed(g)?.with_frequencies(&profile.frequencies(n, edge, depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::thermal_state;
    use approx::assert_relative_eq;

    fn sample(t: f64, pops: Vec<f64>) -> TrajectorySample<f64> {
        TrajectorySample {
            time: t,
            populations: pops,
            snapshot: None,
        }
    }

    fn constant_series(level: f64) -> AsymmetrySeries<f64> {
        let time: Vec<f64> = (0..200)
            .map(|i| 10f64.powf(-1.0 + 0.035 * i as f64))
            .collect();
        AsymmetrySeries {
            a: vec![level; time.len()],
            abar: vec![level; time.len()],
            time,
        }
    }

    #[test]
    fn weights_span_minus_one_to_one() {
        let f = position_weights::<f64>(5);
        assert_eq!(f, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn endpoints_and_symmetric_profile() {
        let left = asymmetry(&[sample(0.0, vec![1.0, 0.0, 0.0, 0.0])]).unwrap();
        assert_eq!(left.a[0], -1.0);
        let right = asymmetry(&[sample(0.0, vec![0.0, 0.0, 0.0, 2.0])]).unwrap();
        assert_eq!(right.a[0], 1.0);
        let sym = asymmetry(&[sample(0.0, vec![1.0, 3.0, 3.0, 1.0])]).unwrap();
        assert_eq!(sym.a[0], 0.0);
        assert!(asymmetry(&[sample(0.0, vec![0.0, 0.0])]).is_err());
    }

    #[test]
    fn trapezoid_running_mean() {
        // A(t) = t on [0, 2] linearly: Abar(t) = t/2
        let samples: Vec<_> = (0..=20)
            .map(|i| {
                let t = i as f64 * 0.1;
                // f = [-1, 1], total 1: A = n2 - n1
                sample(t, vec![0.5 - t / 2.0 + 0.5 * (1.0 - 1.0), 0.5 + t / 2.0])
            })
            .collect();
        let s = asymmetry(&samples).unwrap();
        for (t, ab) in s.time.iter().zip(&s.abar).skip(1) {
            assert_relative_eq!(*ab, t / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn gge_trivial_without_coupling() {
        let model =
            CouplingModel::closed(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                1.0, 2.0, 3.0,
            ])))
            .unwrap();
        let c0 = thermal_state(&[4.0, 5.0, 6.0]).unwrap();
        let p = gge_predict(&model, &c0).unwrap();
        assert_eq!(p.site_populations, vec![4.0, 5.0, 6.0]);
        assert!(!p.degenerate);
    }

    #[test]
    fn gge_rejects_open_or_asymmetric() {
        let mut w = DMatrix::from_element(2, 2, 1.0);
        let c0 = thermal_state(&[1.0, 0.0]).unwrap();
        let open = CouplingModel::new(
            w.clone(),
            &crate::lattice::DissipationSpec::uniform_loss(2, 0.1, 0.0),
        )
        .unwrap();
        assert!(gge_predict(&open, &c0).is_err());
        w[(0, 1)] = 2.0;
        assert!(gge_predict(&CouplingModel::closed(w).unwrap(), &c0).is_err());
    }

    #[test]
    fn gge_flags_degeneracy() {
        let w = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let p = gge_predict(
            &CouplingModel::closed(w).unwrap(),
            &thermal_state(&[1.0, 0.0, 0.0]).unwrap(),
        )
        .unwrap();
        assert!(p.degenerate);
    }

    #[test]
    fn plateau_trivial_cases() {
        let s = PlateauSettings::default();
        assert!(!detect_plateau(&constant_series(0.0), &s).unwrap().present);
        // never leaves its initial value
        assert!(!detect_plateau(&constant_series(-0.4), &s).unwrap().present);
        let mut stepped = constant_series(-0.4);
        for (t, a) in stepped.time.iter().zip(stepped.abar.iter_mut()) {
            if *t < 1.0 {
                *a = -1.0;
            }
        }
        let r = detect_plateau(&stepped, &s).unwrap();
        assert!(r.present);
        assert_relative_eq!(r.level, -0.4, max_relative = 1e-12);
        assert!(r.t_start >= 1.0 && r.t_start < 1.1, "{}", r.t_start);
    }

    #[test]
    fn plateau_picks_longest_flat_stretch() {
        // log axis from 0 to 10: ramp, plateau at 0.5 over [2, 6], ramp, short plateau at 0.3
        let time: Vec<f64> = (0..=1000).map(|i| 10f64.powf(i as f64 * 0.01)).collect();
        let abar: Vec<f64> = time
            .iter()
            .map(|t| {
                let x = t.log10();
                if x < 2.0 {
                    x / 4.0
                } else if x < 6.0 {
                    0.5
                } else if x < 8.0 {
                    0.5 - (x - 6.0) * 0.1
                } else {
                    0.3
                }
            })
            .collect();
        let series = AsymmetrySeries {
            a: abar.clone(),
            abar,
            time,
        };
        let r = detect_plateau(
            &series,
            &PlateauSettings {
                window: Some(1.0),
                epsilon: 0.02,
                axis: TimeAxis::Log,
            },
        )
        .unwrap();
        assert!(r.present);
        assert_relative_eq!(r.level, 0.5, epsilon = 0.01);
        assert!(r.t_start.log10() < 2.2 && r.t_end.log10() > 5.8, "{r:?}");
    }

    #[test]
    fn plateau_requires_ten_windows() {
        let s = PlateauSettings {
            window: Some(2.0),
            ..Default::default()
        };
        assert!(detect_plateau(&constant_series(0.5), &s).is_err());
    }

    #[test]
    fn profiles() {
        let lower = FrequencyProfile::MiddleLower.frequencies(5, 20.0f64, 0.1);
        assert_eq!(lower[0], 20.0);
        assert_eq!(lower[4], 20.0);
        assert_relative_eq!(lower[2], 18.0, max_relative = 1e-15);
        let higher = FrequencyProfile::MiddleHigher.frequencies(5, 20.0f64, 0.1);
        assert_relative_eq!(higher[2], 22.0, max_relative = 1e-15);
        assert!(FrequencyProfile::Uniform
            .frequencies(5, 20.0f64, 0.1)
            .iter()
            .all(|w| *w == 20.0));
        assert_eq!(
            "middle_lower".parse::<FrequencyProfile>().unwrap(),
            FrequencyProfile::MiddleLower
        );
    }
}
