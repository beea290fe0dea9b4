//! Time evolution of the correlation matrix.
//!
//! The second moments `C_ij = <b_i^dag b_j>` obey the closed linear equation
//!
//! ```text
//! dC/dt = i [W, C] + {L, C} + M
//! ```
//!
//! Two paths are provided. [`evolve`] integrates it with fixed-step RK4 and
//! handles any model. [`SpectralPropagator`] diagonalizes `W` once and gives
//! `C(t) = e^{iWt} C0 e^{-iWt}` and its exact running time average for closed
//! models; [`evolve_auto`] picks it whenever `L = M = 0`.
//!
//! [`ClassicalChain`] integrates the Newtonian equations of the same array and
//! serves as an independent check of the quantum populations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lattice::{
    hermitize, ArrayConfig, CorrelationState, CouplingModel, CouplingSpec, FrequencyMode,
};
use crate::scalar::{lit, to_f64, Complex, Real};

/// Integrator and sampling controls. Times are in the inverse units of `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionSettings<T> {
    pub t_end: T,
    /// Fixed step; `None` picks `1e-3 * 2 pi / omega_scale` (see [`default_step`]).
    pub dt: Option<T>,
    /// Steps between recorded samples.
    pub sample_stride: usize,
    /// Steps between Hermitian re-projections.
    pub hermitize_every: usize,
    /// Keep the full matrix at each sample.
    pub keep_snapshots: bool,
}

impl<T: Real> EvolutionSettings<T> {
    pub fn new(t_end: T) -> Self {
        EvolutionSettings {
            t_end,
            dt: None,
            sample_stride: 1,
            hermitize_every: 100,
            keep_snapshots: false,
        }
    }

    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_snapshots(mut self, keep: bool) -> Self {
        self.keep_snapshots = keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > T::zero()) || !self.t_end.is_finite() {
            return Err(Error::invalid(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > T::zero()) || !dt.is_finite() {
                return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
            }
        }
        if self.sample_stride == 0 {
            return Err(Error::invalid("sample stride must be >= 1"));
        }
        if self.hermitize_every == 0 {
            return Err(Error::invalid("hermitize_every must be >= 1"));
        }
        Ok(())
    }

    /// Step count and the step actually used, chosen so the last step lands
    /// exactly on `t_end`.
    pub fn step_grid(&self, model: &CouplingModel<T>) -> (usize, T) {
        let dt = self.dt.unwrap_or_else(|| default_step(model, self.t_end));
        let steps = to_f64(self.t_end / dt).ceil().max(1.0) as usize;
        (steps, self.t_end / lit::<T>(steps as f64))
    }

    /// Times at which [`evolve`] records samples, relative to the start.
    pub fn sample_times(&self, model: &CouplingModel<T>) -> Vec<T> {
        let (steps, h) = self.step_grid(model);
        sample_steps(steps, self.sample_stride)
            .map(|s| {
                if s == steps {
                    self.t_end
                } else {
                    h * lit::<T>(s as f64)
                }
            })
            .collect()
    }
}

fn sample_steps(steps: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..=steps).filter(move |s| s % stride == 0 || *s == steps)
}

/// One recorded point of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample<T: Real> {
    pub time: T,
    pub populations: Vec<T>,
    pub snapshot: Option<DMatrix<Complex<T>>>,
}

impl<T: Real> TrajectorySample<T> {
    fn from_matrix(time: T, c: &DMatrix<Complex<T>>, keep: bool) -> Self {
        TrajectorySample {
            time,
            populations: c.diagonal().iter().map(|z| z.re).collect(),
            snapshot: keep.then(|| c.clone()),
        }
    }
}

/// Shifts `W` by the mean trap frequency. The commutator is unchanged, but
/// products no longer carry the large common frequency.
fn shifted_hopping<T: Real>(model: &CouplingModel<T>) -> DMatrix<T> {
    let n = model.sites();
    let w = model.hopping();
    let mean = w.diagonal().sum() / lit::<T>(n as f64);
    let mut shifted = w.clone();
    for i in 0..n {
        shifted[(i, i)] -= mean;
    }
    shifted
}

/// `1e-3 * 2 pi / omega_scale`, with `omega_scale` a Gershgorin bound on the
/// spectral radius of the generator in the shifted frame.
pub fn default_step<T: Real>(model: &CouplingModel<T>, t_end: T) -> T {
    let w = shifted_hopping(model);
    let radius = w
        .row_iter()
        .map(|r| r.iter().fold(T::zero(), |a, x| a + x.abs()))
        .fold(T::zero(), |a, b| a.max(b));
    let damping = model
        .gain_loss()
        .iter()
        .fold(T::zero(), |a, x| a.max(x.abs()));
    let scale = lit::<T>(2.0) * radius + lit::<T>(2.0) * damping;
    if scale > T::zero() {
        lit::<T>(1e-3 * 2.0 * std::f64::consts::PI) / scale
    } else {
        t_end / lit::<T>(1000.0)
    }
}

struct Generator<T: Real> {
    w: DMatrix<Complex<T>>,
    pair_damping: DMatrix<T>,
    injection: DVector<T>,
}

impl<T: Real> Generator<T> {
    fn new(model: &CouplingModel<T>) -> Self {
        let n = model.sites();
        let l = model.gain_loss();
        Generator {
            w: shifted_hopping(model).map(|x| Complex::new(x, T::zero())),
            pair_damping: DMatrix::from_fn(n, n, |i, j| l[i] + l[j]),
            injection: model.injection().clone(),
        }
    }

    /// `out = i (W C - C W) + {L, C} + M`
    fn apply(&self, c: &DMatrix<Complex<T>>, out: &mut DMatrix<Complex<T>>) {
        let i = Complex::new(T::zero(), T::one());
        out.gemm(i, &self.w, c, Complex::new(T::zero(), T::zero()));
        out.gemm(-i, c, &self.w, Complex::new(T::one(), T::zero()));
        for ((o, x), l) in out.iter_mut().zip(c.iter()).zip(self.pair_damping.iter()) {
            *o += x.scale(*l);
        }
        for (k, m) in self.injection.iter().enumerate() {
            out[(k, k)].re += *m;
        }
    }
}

/// `y += a x`
fn axpy<T: Real>(y: &mut DMatrix<Complex<T>>, a: Complex<T>, x: &DMatrix<Complex<T>>) {
    y.zip_apply(x, |yi, xi| *yi += xi * a);
}

fn check_finite<T: Real>(c: &DMatrix<Complex<T>>, step: usize, time: T) -> Result<()> {
    let limit: T = lit(1e12);
    for (idx, z) in c.iter().enumerate() {
        let bad = if !z.re.is_finite() || !z.im.is_finite() {
            Some("non-finite entry")
        } else if z.re.abs() > limit || z.im.abs() > limit {
            Some("entry exceeds 1e12")
        } else {
            None
        };
        if let Some(what) = bad {
            let n = c.nrows();
            return Err(Error::Unstable {
                step,
                time: to_f64(time),
                reason: format!("{what} at C[{}, {}]", idx % n + 1, idx / n + 1),
            });
        }
    }
    Ok(())
}

fn check_dims<T: Real>(c0: &CorrelationState<T>, model: &CouplingModel<T>) -> Result<()> {
    if c0.sites() != model.sites() {
        return Err(Error::DimensionMismatch {
            expected: model.sites(),
            got: c0.sites(),
        });
    }
    Ok(())
}

/// Fixed-step RK4 integration of the correlation-matrix equation.
///
/// Samples are taken at step 0, every `sample_stride` steps and at the final
/// step, which lands on `t_end` exactly. Each sample is Hermitian-projected.
pub fn evolve<T: Real>(
    c0: &CorrelationState<T>,
    model: &CouplingModel<T>,
    settings: &EvolutionSettings<T>,
) -> Result<Vec<TrajectorySample<T>>> {
    settings.validate()?;
    check_dims(c0, model)?;
    c0.validate()?;
    let (steps, h) = settings.step_grid(model);
    let gen = Generator::new(model);
    let n = model.sites();
    let zero = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero);
    let half_h = Complex::new(h * lit(0.5), T::zero());
    let full_h = Complex::new(h, T::zero());
    let sixth_h = Complex::new(h / lit(6.0), T::zero());
    let two = Complex::new(lit(2.0), T::zero());

    let mut c = c0.matrix.clone();
    let t0 = c0.time;
    let mut out = Vec::with_capacity(steps / settings.sample_stride + 2);
    out.push(TrajectorySample::from_matrix(
        t0,
        &c,
        settings.keep_snapshots,
    ));
    for step in 1..=steps {
        gen.apply(&c, &mut k1);
        tmp.copy_from(&c);
        axpy(&mut tmp, half_h, &k1);
        gen.apply(&tmp, &mut k2);
        tmp.copy_from(&c);
        axpy(&mut tmp, half_h, &k2);
        gen.apply(&tmp, &mut k3);
        tmp.copy_from(&c);
        axpy(&mut tmp, full_h, &k3);
        gen.apply(&tmp, &mut k4);
        k1 += &k4;
        axpy(&mut k1, two, &k2);
        axpy(&mut k1, two, &k3);
        axpy(&mut c, sixth_h, &k1);

        let t = if step == steps {
            t0 + settings.t_end
        } else {
            t0 + h * lit::<T>(step as f64)
        };
        check_finite(&c, step, t)?;
        let sampled = step % settings.sample_stride == 0 || step == steps;
        if sampled || step % settings.hermitize_every == 0 {
            hermitize(&mut c);
        }
        if sampled {
            out.push(TrajectorySample::from_matrix(
                t,
                &c,
                settings.keep_snapshots,
            ));
        }
    }
    Ok(out)
}

/// Uses [`SpectralPropagator`] for closed symmetric models and [`evolve`]
/// otherwise. Both paths record the same sample times.
pub fn evolve_auto<T: Real>(
    c0: &CorrelationState<T>,
    model: &CouplingModel<T>,
    settings: &EvolutionSettings<T>,
) -> Result<Vec<TrajectorySample<T>>> {
    if model.is_closed() && model.is_symmetric() {
        settings.validate()?;
        let prop = SpectralPropagator::new(model, c0)?;
        let times: Vec<T> = settings
            .sample_times(model)
            .into_iter()
            .map(|t| c0.time + t)
            .collect();
        Ok(prop.samples(&times, settings.keep_snapshots))
    } else {
        evolve(c0, model, settings)
    }
}

/// `(e^{ix} - 1) / (ix)`, the running average of `e^{ix'}` over `[0, x]`.
fn phase_average<T: Real>(x: T) -> Complex<T> {
    if x.abs() < lit(1e-4) {
        let x2 = x * x;
        Complex::new(T::one() - x2 / lit(6.0), x * lit(0.5) - x * x2 / lit(24.0))
    } else {
        let (s, c) = x.sin_cos();
        // (cos x - 1 + i sin x) / (i x) = sin x / x - i (cos x - 1) / x
        Complex::new(s / x, (T::one() - c) / x)
    }
}

/// Exact closed-system propagator built from one diagonalization of `W`.
#[derive(Clone, Debug)]
pub struct SpectralPropagator<T: Real> {
    eigenvalues: DVector<T>,
    /// Eigenvectors as columns.
    modes: DMatrix<T>,
    /// `C0` in the eigenbasis.
    c0_modes: DMatrix<Complex<T>>,
    t0: T,
}

impl<T: Real> SpectralPropagator<T> {
    pub fn new(model: &CouplingModel<T>, c0: &CorrelationState<T>) -> Result<Self> {
        check_dims(c0, model)?;
        if !model.is_closed() {
            return Err(Error::invalid(
                "spectral propagation needs a closed model (L = M = 0)",
            ));
        }
        if !model.is_symmetric() {
            return Err(Error::invalid("spectral propagation needs a symmetric W"));
        }
        let eig = SymmetricEigen::new(model.hopping().clone());
        let v = eig.eigenvectors.map(|x| Complex::new(x, T::zero()));
        let c0_modes = v.transpose() * &c0.matrix * &v;
        Ok(SpectralPropagator {
            eigenvalues: eig.eigenvalues,
            modes: eig.eigenvectors,
            c0_modes,
            t0: c0.time,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &DMatrix<T> {
        &self.modes
    }

    /// Conserved mode occupations `<c_k^dag c_k>`.
    pub fn mode_occupations(&self) -> Vec<T> {
        self.c0_modes.diagonal().iter().map(|z| z.re).collect()
    }

    fn weighted_modes(&self, t: T, weight: impl Fn(T) -> Complex<T>) -> DMatrix<Complex<T>> {
        let dt = t - self.t0;
        let lam = &self.eigenvalues;
        DMatrix::from_fn(self.c0_modes.nrows(), self.c0_modes.ncols(), |k, l| {
            self.c0_modes[(k, l)] * weight((lam[k] - lam[l]) * dt)
        })
    }

    fn to_sites(&self, m: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
        let v = self.modes.map(|x| Complex::new(x, T::zero()));
        &v * m * v.transpose()
    }

    fn site_diagonal(&self, m: &DMatrix<Complex<T>>) -> Vec<T> {
        // n_i = sum_k V_ik (m V^T)_ki
        let v = &self.modes;
        let n = v.nrows();
        (0..n)
            .map(|i| {
                let mut acc = T::zero();
                for k in 0..n {
                    let mut row = Complex::new(T::zero(), T::zero());
                    for l in 0..n {
                        row += m[(k, l)].scale(v[(i, l)]);
                    }
                    acc += v[(i, k)] * row.re;
                }
                acc
            })
            .collect()
    }

    pub fn state_at(&self, t: T) -> CorrelationState<T> {
        let mut c = self.to_sites(&self.weighted_modes(t, crate::scalar::expi));
        hermitize(&mut c);
        CorrelationState { matrix: c, time: t }
    }

    pub fn populations(&self, t: T) -> Vec<T> {
        self.site_diagonal(&self.weighted_modes(t, crate::scalar::expi))
    }

    /// `(1/(t - t0)) int_{t0}^{t} n_i(t') dt'`, exact.
    pub fn running_mean_populations(&self, t: T) -> Vec<T> {
        self.site_diagonal(&self.weighted_modes(t, phase_average))
    }

    /// Infinite-time average of the populations (dephased modes).
    pub fn dephased_populations(&self) -> Vec<T> {
        let v = &self.modes;
        let occ = self.mode_occupations();
        (0..v.nrows())
            .map(|i| (0..v.ncols()).fold(T::zero(), |a, k| a + v[(i, k)] * v[(i, k)] * occ[k]))
            .collect()
    }

    pub fn samples(&self, times: &[T], keep_snapshots: bool) -> Vec<TrajectorySample<T>> {
        times
            .iter()
            .map(|&t| {
                if keep_snapshots {
                    let state = self.state_at(t);
                    TrajectorySample::from_matrix(t, &state.matrix, true)
                } else {
                    TrajectorySample {
                        time: t,
                        populations: self.populations(t),
                        snapshot: None,
                    }
                }
            })
            .collect()
    }
}

/// Newtonian chain `m x_i'' = -k0_i x_i - sum_j kappa_ij (x_i - x_j)` with
/// open ends. SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalChain {
    pub mass: f64,
    /// Bare trap stiffness per site, N/m.
    pub onsite: Vec<f64>,
    /// Pair stiffness `kappa_ij`, N/m (diagonal ignored).
    pub stiffness: DMatrix<f64>,
}

impl ClassicalChain {
    pub fn new(mass: f64, onsite: Vec<f64>, stiffness: DMatrix<f64>) -> Result<Self> {
        let n = onsite.len();
        if !(mass > 0.0) {
            return Err(Error::invalid("mass must be > 0"));
        }
        if stiffness.nrows() != n || stiffness.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: stiffness.nrows(),
            });
        }
        let mut stiffness = stiffness;
        stiffness.fill_diagonal(0.0);
        Ok(ClassicalChain {
            mass,
            onsite,
            stiffness,
        })
    }

    /// Chain with the same frequencies and couplings as the lattice model of
    /// `config`. In fixed-frequency mode (or with an explicit coupling) the
    /// bare stiffness is chosen so that the dressed frequency equals the
    /// configured one.
    pub fn from_config(config: &ArrayConfig) -> Result<Self> {
        config.validate()?;
        let m = config.mass();
        let omega = config.dressed_frequencies()?;
        let kappa = match config.stiffness_matrix()? {
            Some(k) => k * config.hopping_scale,
            None => {
                let g = match &config.coupling {
                    CouplingSpec::Explicit(g) => g,
                    CouplingSpec::Topology(_) => unreachable!("topology always yields stiffness"),
                };
                DMatrix::from_fn(config.sites, config.sites, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        -2.0 * m * (omega[i] * omega[j]).sqrt() * g[(i, j)]
                    }
                })
            }
        };
        let dressed = matches!(
            (&config.coupling, config.frequency_mode),
            (CouplingSpec::Topology(_), FrequencyMode::Bare)
        );
        let onsite = (0..config.sites)
            .map(|i| {
                let w0 = config.trap_frequencies[i];
                if dressed {
                    m * w0 * w0
                } else {
                    m * omega[i] * omega[i] - kappa.row(i).sum()
                }
            })
            .collect();
        ClassicalChain::new(m, onsite, kappa)
    }

    pub fn sites(&self) -> usize {
        self.onsite.len()
    }

    /// Local stiffness `k0_i + sum_j kappa_ij`.
    pub fn local_stiffness(&self) -> Vec<f64> {
        (0..self.sites())
            .map(|i| self.onsite[i] + self.stiffness.row(i).sum())
            .collect()
    }

    /// Normal-mode angular frequencies, ascending. `NaN` marks an unstable mode.
    pub fn normal_frequencies(&self) -> Vec<f64> {
        let n = self.sites();
        let local = self.local_stiffness();
        let k = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                local[i]
            } else {
                -self.stiffness[(i, j)]
            }
        });
        let mut w: Vec<f64> = (k / self.mass)
            .symmetric_eigenvalues()
            .iter()
            .map(|x| x.sqrt())
            .collect();
        w.sort_by(f64::total_cmp);
        w
    }

    fn acceleration(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let mut f = -self.onsite[i] * x[i];
            for j in 0..n {
                if j != i {
                    f -= self.stiffness[(i, j)] * (x[i] - x[j]);
                }
            }
            out[i] = f / self.mass;
        }
    }

    /// Kinetic plus trap plus spring energy, J.
    pub fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let n = x.len();
        let mut e = 0.0;
        for i in 0..n {
            e += 0.5 * self.mass * v[i] * v[i] + 0.5 * self.onsite[i] * x[i] * x[i];
            for j in (i + 1)..n {
                let dx = x[i] - x[j];
                e += 0.5 * self.stiffness[(i, j)] * dx * dx;
            }
        }
        e
    }

    /// Energy of each local oscillator, `m v_i^2 / 2 + (k0_i + sum_j kappa_ij) x_i^2 / 2`.
    /// This is the classical counterpart of `hbar Omega_i n_i`.
    pub fn site_energies(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.local_stiffness()
            .iter()
            .enumerate()
            .map(|(i, k)| 0.5 * self.mass * v[i] * v[i] + 0.5 * k * x[i] * x[i])
            .collect()
    }
}

/// Sampled classical trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

/// RK4 integration of the classical chain. Samples every `stride` steps and
/// at `t_end`.
pub fn classical_evolve(
    chain: &ClassicalChain,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<ClassicalTrajectory> {
    let n = chain.sites();
    if x0.len() != n || v0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len().min(v0.len()),
        });
    }
    if x0.iter().chain(v0).any(|x| !x.is_finite()) {
        return Err(Error::invalid("initial conditions must be finite"));
    }
    if !(t_end > 0.0 && dt > 0.0) || stride == 0 {
        return Err(Error::invalid("need t_end > 0, dt > 0 and stride >= 1"));
    }
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut traj = ClassicalTrajectory {
        times: vec![0.0],
        positions: vec![x.clone()],
        velocities: vec![v.clone()],
    };
    let mut a = vec![0.0; n];
    let (mut kx, mut kv) = (
        [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
    );
    let mut xs = vec![0.0; n];
    let scale = x0
        .iter()
        .chain(v0)
        .fold(0.0f64, |m, y| m.max(y.abs()))
        .max(1e-300);
    for step in 1..=steps {
        for stage in 0..4 {
            let c = match stage {
                0 => 0.0,
                3 => h,
                _ => 0.5 * h,
            };
            for i in 0..n {
                let (px, pv) = if stage == 0 {
                    (0.0, 0.0)
                } else {
                    (kx[stage - 1][i], kv[stage - 1][i])
                };
                xs[i] = x[i] + c * px;
                a[i] = v[i] + c * pv;
            }
            kx[stage].copy_from_slice(&a);
            chain.acceleration(&xs, &mut kv[stage]);
        }
        for i in 0..n {
            x[i] += h / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            v[i] += h / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
        }
        let t = if step == steps {
            t_end
        } else {
            h * step as f64
        };
        if x.iter()
            .chain(&v)
            .any(|y| !y.is_finite() || y.abs() > 1e12 * scale)
        {
            return Err(Error::Unstable {
                step,
                time: t,
                reason: "classical state diverged".into(),
            });
        }
        if step % stride == 0 || step == steps {
            traj.times.push(t);
            traj.positions.push(x.clone());
            traj.velocities.push(v.clone());
        }
    }
    Ok(traj)
}
