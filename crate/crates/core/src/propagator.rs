//! The free Schrödinger group `S(t) = e^{−itΔ}`, i.e. frequency-side
//! multiplication by `e^{it|2πξ|²}`, plus the dispersive-decay and Duhamel
//! machinery built on it.

use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;
// float math comes from libm on targets without std
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::estimators::{fit_power_law, FitReport};
use crate::replica::ReplicaRunner;
use crate::spectral::{
    lebesgue_norm, Exponent, GridSpec, Representation, SpectralField, TimeGrid, Trajectory,
};

/// Mass fraction allowed in the edge band before periodic images are
/// considered to pollute the evolution.
pub const WRAP_TOLERANCE: f64 = 1e-6;

/// Width of the edge band as a fraction of the box side.
pub const EDGE_BAND: f64 = 1.0 / 8.0;

/// `S(t) f`, returned in frequency representation.
pub fn evolve(f: &SpectralField, t: f64) -> SpectralField {
    if t == 0.0 {
        return f.to_frequency();
    }
    f.apply_radial_symbol(|w| Complex64::from_polar(1.0, t * w))
}

/// Cached multiplier of `S(dt)` for repeated stepping on one grid.
#[derive(Debug, Clone)]
pub struct StepPropagator {
    grid: GridSpec,
    dt: f64,
    phases: Vec<Complex64>,
}

impl StepPropagator {
    pub fn new(grid: &GridSpec, dt: f64) -> Self {
        let phases = grid
            .omega()
            .iter()
            .map(|&w| Complex64::from_polar(1.0, dt * w))
            .collect();
        Self {
            grid: grid.clone(),
            dt,
            phases,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Applies `S(dt)` in place; the field must be in frequency representation.
    pub fn apply_in_place(&self, f: &mut SpectralField) {
        debug_assert_eq!(f.representation(), Representation::Frequency);
        debug_assert!(f.grid() == &self.grid);
        for (v, p) in f.values_mut().iter_mut().zip(&self.phases) {
            *v *= p;
        }
    }

    pub fn apply(&self, f: &SpectralField) -> SpectralField {
        let mut out = f.to_frequency();
        self.apply_in_place(&mut out);
        out
    }
}

/// `‖S(t₁+t₂)f − S(t₁)S(t₂)f‖_{L²}`.
pub fn group_property_check(f: &SpectralField, t1: f64, t2: f64) -> f64 {
    let joint = evolve(f, t1 + t2);
    let composed = evolve(&evolve(f, t2), t1);
    joint
        .sub(&composed)
        .expect("both fields live on the same grid")
        .l2_norm()
}

/// Schrödinger admissibility: `2/q + d/r = d/2` with `(q, r, d) ≠ (2, ∞, 2)`.
pub fn is_admissible(q: Exponent, r: Exponent, dim: usize) -> bool {
    let d = dim as f64;
    if q == Exponent::Finite(2.0) && r == Exponent::Infinity && dim == 2 {
        return false;
    }
    if let Exponent::Finite(v) = q {
        if v < 2.0 {
            return false;
        }
    }
    if let Exponent::Finite(v) = r {
        if v < 2.0 {
            return false;
        }
    }
    (2.0 * q.reciprocal() + d * r.reciprocal() - d / 2.0).abs() <= 1e-12
}

/// Fraction of the L² mass within `EDGE_BAND·L` of the box boundary.
pub fn edge_mass_fraction(f: &SpectralField) -> f64 {
    let phys = f.to_physical();
    let grid = phys.grid();
    let band = EDGE_BAND * grid.length();
    let l = grid.length();
    let d = grid.dim();
    let mut edge = 0.0;
    let mut total = 0.0;
    for (i, v) in phys.values().iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        let x = grid.position(i);
        if x[..d].iter().any(|&xi| xi < band || xi > l - band) {
            edge += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        edge / total
    }
}

/// Geometric ladder from `t_min` to `t_max` with at least `per_decade`
/// points per decade (endpoints included).
pub fn geometric_ladder(t_min: f64, t_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::param("times", format!("need 0 < {t_min} < {t_max}")));
    }
    let decades = (t_max / t_min).log10();
    let intervals = ((decades * per_decade as f64).ceil() as usize).max(1);
    let ratio = (t_max / t_min).powf(1.0 / intervals as f64);
    Ok((0..=intervals)
        .map(|i| {
            if i == intervals {
                t_max
            } else {
                t_min * ratio.powi(i as i32)
            }
        })
        .collect())
}

/// One measurement of the decay experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecaySample {
    pub t: f64,
    pub norm: f64,
    pub edge_fraction: f64,
}

/// Measures `‖S(t)f‖_{L^r}` and the wrap-around diagnostic at time `t`.
pub fn decay_sample(f: &SpectralField, r: Exponent, t: f64) -> Result<DecaySample> {
    if !(t > 0.0) {
        return Err(Error::param("times", format!("{t} must be positive")));
    }
    let evolved = evolve(f, t).into_physical();
    let edge_fraction = edge_mass_fraction(&evolved);
    if edge_fraction > WRAP_TOLERANCE {
        return Err(Error::OutsideFidelityWindow { t, edge_fraction });
    }
    Ok(DecaySample {
        t,
        norm: lebesgue_norm(&evolved, r),
        edge_fraction,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispersiveReport {
    pub dim: usize,
    pub r: Exponent,
    pub fit: FitReport,
    /// RMS of the log-log residuals.
    pub residual: f64,
    pub t_window: (f64, f64),
    pub samples: Vec<DecaySample>,
    /// `‖S(t)f‖_{L^r} · t^{d/2 − d/r} / ‖f‖_{L^{r'}}` per sample.
    pub ratios: Vec<f64>,
}

impl DispersiveReport {
    pub fn predicted_exponent(&self) -> f64 {
        predicted_decay_exponent(self.dim, self.r)
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// `−(d/2 − d/r)`.
pub fn predicted_decay_exponent(dim: usize, r: Exponent) -> f64 {
    let d = dim as f64;
    -(d / 2.0 - d * r.reciprocal())
}

/// Least-squares fit of `log ‖S(t)f‖_{L^r}` against `log t`.
///
/// Every time must lie inside the wrap-around fidelity window; the first
/// violation is returned as an error.
pub fn dispersive_decay_fit<R: ReplicaRunner>(
    runner: &R,
    f: &SpectralField,
    r: Exponent,
    times: &[f64],
) -> Result<DispersiveReport> {
    if times.len() < 4 {
        return Err(Error::NotEnoughData {
            needed: 4,
            got: times.len(),
        });
    }
    let initial_edge = edge_mass_fraction(f);
    if initial_edge > WRAP_TOLERANCE {
        return Err(Error::OutsideFidelityWindow {
            t: 0.0,
            edge_fraction: initial_edge,
        });
    }
    let samples = runner
        .map(times.len(), |i| decay_sample(f, r, times[i as usize]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.norm).collect();
    let predicted = predicted_decay_exponent(f.grid().dim(), r);
    let mut fit = fit_power_law(&xs, &ys)?;
    fit.exponent_predicted = Some(predicted);
    let residual = {
        let n = xs.len() as f64;
        let ss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y.ln() - (fit.intercept + fit.exponent_hat * x.ln());
                e * e
            })
            .sum();
        (ss / n).sqrt()
    };
    let dual = lebesgue_norm(f, r.conjugate());
    let ratios = samples
        .iter()
        .map(|s| s.norm * s.t.powf(-predicted) / dual)
        .collect();
    let t_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = xs.iter().copied().fold(0.0, f64::max);
    Ok(DispersiveReport {
        dim: f.grid().dim(),
        r,
        fit,
        residual,
        t_window: (t_min, t_max),
        samples,
        ratios,
    })
}

fn grid_index(time: &TimeGrid, t: f64) -> Result<usize> {
    if t < 0.0 || t > time.horizon * (1.0 + 1e-12) {
        return Err(Error::BeyondHorizon {
            t,
            horizon: time.horizon,
        });
    }
    let x = t / time.dt();
    let j = x.round();
    if (x - j).abs() > 1e-9 * x.max(1.0) {
        return Err(Error::param("t", format!("{t} is not a stored grid time")));
    }
    Ok(j as usize)
}

/// `∫₀^t S(t−t')F(t')dt'` by the composite trapezoid rule over the stored
/// slices; `t` must be one of the grid times.
pub fn duhamel_integral(forcing: &Trajectory, t: f64) -> Result<SpectralField> {
    let j = grid_index(&forcing.time, t)?;
    let grid = forcing.grid().clone();
    let mut acc = SpectralField::zeros(&grid, Representation::Frequency);
    if j == 0 {
        return Ok(acc);
    }
    let dt = forcing.time.dt();
    for (i, slice) in forcing.slices[..=j].iter().enumerate() {
        let w = if i == 0 || i == j { 0.5 * dt } else { dt };
        let lag = forcing.time.time(j) - forcing.time.time(i);
        acc.add_scaled(Complex64::new(w, 0.0), &evolve(slice, lag))?;
    }
    Ok(acc)
}

/// The trapezoid Duhamel integral at every grid time, via the recursion
/// `I_{j+1} = S(dt)(I_j + dt/2·F_j) + dt/2·F_{j+1}`.
pub fn duhamel_trajectory(forcing: &Trajectory) -> Trajectory {
    let grid = forcing.grid().clone();
    let step = StepPropagator::new(&grid, forcing.time.dt());
    duhamel_with_step(&step, forcing.time, forcing.slices.iter().map(|f| f.to_frequency()))
}

pub(crate) fn duhamel_with_step(
    step: &StepPropagator,
    time: TimeGrid,
    forcing: impl Iterator<Item = SpectralField>,
) -> Trajectory {
    let half = Complex64::new(0.5 * time.dt(), 0.0);
    let mut slices = Vec::with_capacity(time.len());
    let mut acc = SpectralField::zeros(&step.grid, Representation::Frequency);
    let mut prev: Option<SpectralField> = None;
    for f in forcing {
        if let Some(p) = prev.take() {
            acc.add_scaled(half, &p).expect("same grid");
            step.apply_in_place(&mut acc);
            acc.add_scaled(half, &f).expect("same grid");
        }
        slices.push(acc.clone());
        prev = Some(f);
    }
    Trajectory { time, slices }
}
