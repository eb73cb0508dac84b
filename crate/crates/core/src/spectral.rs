//! Periodic-box discretization, dual-representation fields and Sobolev /
//! Lebesgue norms.
//!
//! The box `[0, L)^d` replaces ℝ^d; every spatial integral becomes lattice
//! quadrature with weight `(L/N)^d`. Grid maxima (`r = ∞`, `q = ∞`) are lower
//! bounds on the continuum supremum.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;
use num_complex::Complex64;
// float math comes from libm on targets without std
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::FftPlan;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug)]
struct GridInner {
    dim: usize,
    length: f64,
    n: usize,
    plan: FftPlan,
    /// |2πξ_k|² in flat frequency order.
    omega: Vec<f64>,
}

/// Uniform periodic grid: `d` dimensions, side `L`, `N` points per axis.
///
/// Cloning is cheap; the FFT plan and the symbol table are shared.
#[derive(Clone)]
pub struct GridSpec {
    inner: Arc<GridInner>,
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("d", &self.inner.dim)
            .field("L", &self.inner.length)
            .field("N", &self.inner.n)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.length.to_bits() == other.inner.length.to_bits())
    }
}

impl GridSpec {
    pub fn new(dim: usize, length: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!("box length {length} must be positive")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per dimension {n} must be a power of two ≥ 4"
            )));
        }
        let total = n.pow(dim as u32);
        let mut omega = Vec::with_capacity(total);
        for flat in 0..total {
            let mut sum = 0.0;
            let mut rest = flat;
            for _ in 0..dim {
                let k = signed_index(rest % n, n) as f64;
                rest /= n;
                let w = 2.0 * PI * k / length;
                sum += w * w;
            }
            omega.push(sum);
        }
        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                length,
                n,
                plan: FftPlan::new(dim, n),
                omega,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Total number of lattice points, `N^d`.
    pub fn len(&self) -> usize {
        self.inner.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    /// Quadrature weight `(L/N)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.inner.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.inner.length.powi(self.inner.dim as i32)
    }

    /// Largest representable frequency magnitude per axis, `N / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.inner.n as f64 / (2.0 * self.inner.length)
    }

    /// |2πξ_k|² for every lattice frequency, in storage order.
    pub fn omega(&self) -> &[f64] {
        &self.inner.omega
    }

    /// Signed lattice indices `k ∈ [−N/2, N/2)^d` of a flat frequency slot;
    /// unused axes are zero. Axis 0 is the slowest-varying one.
    pub fn wavenumbers(&self, flat: usize) -> [i64; 3] {
        let n = self.inner.n;
        let d = self.inner.dim;
        let mut out = [0i64; 3];
        let mut rest = flat;
        for axis in (0..d).rev() {
            out[axis] = signed_index(rest % n, n);
            rest /= n;
        }
        out
    }

    /// Frequency ξ_k = k/L of a flat slot.
    pub fn frequency(&self, flat: usize) -> [f64; 3] {
        let k = self.wavenumbers(flat);
        let l = self.inner.length;
        [k[0] as f64 / l, k[1] as f64 / l, k[2] as f64 / l]
    }

    /// Physical position x_j = j·L/N of a flat slot.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let n = self.inner.n;
        let h = self.spacing();
        let mut out = [0.0; 3];
        let mut rest = flat;
        for axis in (0..self.inner.dim).rev() {
            out[axis] = (rest % n) as f64 * h;
            rest /= n;
        }
        out
    }

    /// Centre of the box, `(L/2, …, L/2)` on the used axes.
    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for v in c.iter_mut().take(self.inner.dim) {
            *v = self.inner.length / 2.0;
        }
        c
    }

    pub(crate) fn plan(&self) -> &FftPlan {
        &self.inner.plan
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Representation {
    Physical,
    Frequency,
}

/// A complex field on a [`GridSpec`] in one of its two representations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    values: Vec<Complex64>,
    repr: Representation,
}

impl SpectralField {
    pub fn zeros(grid: &GridSpec, repr: Representation) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![ZERO; grid.len()],
            repr,
        }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<Complex64>, repr: Representation) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            repr,
        })
    }

    /// Samples `f` at the physical lattice points.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut([f64; 3]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self {
            grid: grid.clone(),
            values,
            repr: Representation::Physical,
        }
    }

    /// Builds a field from its frequency-side coefficients `c(ξ_k)`.
    pub fn from_spectrum(grid: &GridSpec, c: impl Fn([f64; 3]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| c(grid.frequency(i))).collect();
        Self {
            grid: grid.clone(),
            values,
            repr: Representation::Frequency,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn into_frequency(mut self) -> Self {
        if self.repr == Representation::Physical {
            self.grid.plan().forward(&mut self.values);
            let d = self.grid.dim() as i32;
            let scale = self.grid.length().powf(d as f64 / 2.0) / (self.grid.n() as f64).powi(d);
            for v in &mut self.values {
                *v *= scale;
            }
            self.repr = Representation::Frequency;
        }
        self
    }

    pub fn into_physical(mut self) -> Self {
        if self.repr == Representation::Frequency {
            self.grid.plan().inverse(&mut self.values);
            let scale = self.grid.length().powf(-(self.grid.dim() as f64) / 2.0);
            for v in &mut self.values {
                *v *= scale;
            }
            self.repr = Representation::Physical;
        }
        self
    }

    pub fn to_frequency(&self) -> Self {
        self.clone().into_frequency()
    }

    pub fn to_physical(&self) -> Self {
        self.clone().into_physical()
    }

    pub fn into_representation(self, repr: Representation) -> Self {
        match repr {
            Representation::Physical => self.into_physical(),
            Representation::Frequency => self.into_frequency(),
        }
    }

    /// Continuum L² norm; identical in both representations.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        match self.repr {
            Representation::Physical => (sum * self.grid.cell_volume()).sqrt(),
            Representation::Frequency => sum.sqrt(),
        }
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        for v in &mut self.values {
            *v *= c;
        }
        self
    }

    /// `self += a · other`, converting `other` to this field's representation.
    pub fn add_scaled(&mut self, a: Complex64, other: &SpectralField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if other.repr == self.repr {
            for (x, y) in self.values.iter_mut().zip(&other.values) {
                *x += a * y;
            }
        } else {
            let o = other.clone().into_representation(self.repr);
            for (x, y) in self.values.iter_mut().zip(&o.values) {
                *x += a * y;
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// Frequency-side multiplication by `m(|2πξ_k|²)`.
    pub fn apply_radial_symbol(&self, m: impl Fn(f64) -> Complex64) -> SpectralField {
        let mut out = self.to_frequency();
        for (v, &w) in out.values.iter_mut().zip(self.grid.omega()) {
            *v *= m(w);
        }
        out
    }

    /// Frequency-side multiplication by an arbitrary symbol `m(ξ_k)`.
    pub fn apply_symbol(&self, m: impl Fn([f64; 3]) -> Complex64) -> SpectralField {
        let mut out = self.to_frequency();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v *= m(self.grid.frequency(i));
        }
        out
    }
}

/// A spatial or temporal Lebesgue exponent in `[1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_infinite() && value > 0.0 {
            Ok(Exponent::Infinity)
        } else if value >= 1.0 {
            Ok(Exponent::Finite(value))
        } else {
            Err(Error::param("exponent", format!("{value} is below 1")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(v) => v,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// `1/r`, zero for `r = ∞`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(v) => 1.0 / v,
            Exponent::Infinity => 0.0,
        }
    }

    /// Hölder conjugate `r'` with `1/r + 1/r' = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinity,
            Exponent::Finite(v) => Exponent::Finite(v / (v - 1.0)),
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Exponent::Finite(_))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::param("exponent", format!("cannot parse `{other}`")))?;
                Exponent::new(v)
            }
        }
    }
}

/// Request for the norm of `L^q([0, T]; W^{s, r})`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormSpec {
    pub s: f64,
    pub r: Exponent,
    pub q: Exponent,
    pub horizon: f64,
}

impl NormSpec {
    pub fn new(s: f64, r: Exponent, q: Exponent, horizon: f64) -> Result<Self> {
        if let Exponent::Finite(v) = r {
            if v < 2.0 {
                return Err(Error::param("r", format!("{v} below 2")));
            }
        }
        if !(horizon > 0.0) {
            return Err(Error::param("T", format!("{horizon} must be positive")));
        }
        Ok(Self { s, r, q, horizon })
    }
}

/// ⟨∇⟩^s f: multiplication by `(1 + |2πξ|²)^{s/2}`.
pub fn japanese_bracket_multiplier(f: &SpectralField, s: f64) -> SpectralField {
    if s == 0.0 {
        return f.to_frequency();
    }
    f.apply_radial_symbol(|w| Complex64::new((1.0 + w).powf(s / 2.0), 0.0))
}

/// |∇|^s f: multiplication by `|2πξ|^s` (zero mode dropped for `s > 0`).
pub fn homogeneous_multiplier(f: &SpectralField, s: f64) -> SpectralField {
    f.apply_radial_symbol(|w| {
        if w == 0.0 {
            Complex64::new(if s == 0.0 { 1.0 } else { 0.0 }, 0.0)
        } else {
            Complex64::new(w.powf(s / 2.0), 0.0)
        }
    })
}

/// `‖f‖_{L^r}` by lattice quadrature; `r = ∞` is the grid maximum.
pub fn lebesgue_norm(f: &SpectralField, r: Exponent) -> f64 {
    let phys;
    let values = match f.representation() {
        Representation::Physical => f.values(),
        Representation::Frequency => {
            phys = f.to_physical();
            phys.values()
        }
    };
    lebesgue_norm_of_values(values, f.grid().cell_volume(), r)
}

pub(crate) fn lebesgue_norm_of_values(values: &[Complex64], weight: f64, r: Exponent) -> f64 {
    match r {
        Exponent::Infinity => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        Exponent::Finite(2.0) => {
            (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * weight).sqrt()
        }
        Exponent::Finite(p) => {
            let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if max == 0.0 {
                return 0.0;
            }
            // scale by the max so large r cannot overflow
            let sum: f64 = values.iter().map(|v| (v.norm() / max).powf(p)).sum();
            max * (sum * weight).powf(1.0 / p)
        }
    }
}

/// `‖⟨∇⟩^s f‖_{L^r}`.
pub fn sobolev_norm(f: &SpectralField, s: f64, r: Exponent) -> f64 {
    if r == Exponent::Finite(2.0) {
        let g = japanese_bracket_multiplier(f, s);
        return g.l2_norm();
    }
    if s == 0.0 {
        return lebesgue_norm(f, r);
    }
    lebesgue_norm(&japanese_bracket_multiplier(f, s).into_physical(), r)
}

/// Uniform time grid `t_j = j·T/M`, `j = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("T", format!("{horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::param("M", "at least one time step is required"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |j| self.time(j))
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Fields at the points of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub time: TimeGrid,
    pub slices: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(time: TimeGrid, slices: Vec<SpectralField>) -> Result<Self> {
        if slices.len() != time.len() {
            return Err(Error::GridMismatch(format!(
                "{} slices for {} time points",
                slices.len(),
                time.len()
            )));
        }
        if let Some(first) = slices.first() {
            for s in &slices[1..] {
                first.grid().check_same(s.grid())?;
            }
        }
        Ok(Self { time, slices })
    }

    pub fn zeros(grid: &GridSpec, time: TimeGrid) -> Self {
        let z = SpectralField::zeros(grid, Representation::Frequency);
        Self {
            time,
            slices: vec![z; time.len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.slices[0].grid()
    }

    pub fn last(&self) -> &SpectralField {
        self.slices.last().expect("trajectory has at least one slice")
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.time != other.time {
            return Err(Error::GridMismatch("time grids differ".into()));
        }
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            time: self.time,
            slices,
        })
    }

    pub fn add(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.time != other.time {
            return Err(Error::GridMismatch("time grids differ".into()));
        }
        let mut slices = self.slices.clone();
        for (a, b) in slices.iter_mut().zip(&other.slices) {
            a.add_scaled(Complex64::new(1.0, 0.0), b)?;
        }
        Ok(Trajectory {
            time: self.time,
            slices,
        })
    }
}

/// `(∫₀^T g(t)^q dt)^{1/q}` by the composite trapezoid rule on a uniform grid;
/// `q = ∞` returns the grid maximum.
pub fn time_norm(dt: f64, values: &[f64], q: Exponent) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            got: values.len(),
        });
    }
    Ok(match q {
        Exponent::Infinity => values.iter().copied().fold(0.0, f64::max),
        Exponent::Finite(q) => {
            let max = values.iter().copied().fold(0.0, f64::max);
            if max == 0.0 {
                return Ok(0.0);
            }
            let last = values.len() - 1;
            let sum: f64 = values
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let w = if j == 0 || j == last { 0.5 } else { 1.0 };
                    w * (v / max).powf(q)
                })
                .sum();
            max * (sum * dt).powf(1.0 / q)
        }
    })
}

/// `‖u‖_{L^q([0,T]; W^{s,r})}` of a trajectory.
pub fn spacetime_norm(traj: &Trajectory, spec: &NormSpec) -> Result<f64> {
    if traj.slices.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            got: traj.slices.len(),
        });
    }
    let tol = 1e-9 * spec.horizon.max(1.0);
    if (traj.time.horizon - spec.horizon).abs() > tol {
        return Err(Error::param(
            "T",
            format!("trajectory horizon {} differs from requested {}", traj.time.horizon, spec.horizon),
        ));
    }
    let norms: Vec<f64> = traj
        .slices
        .iter()
        .map(|f| sobolev_norm(f, spec.s, spec.r))
        .collect();
    time_norm(traj.time.dt(), &norms, spec.q)
}

/// `s_crit(r) = d/r − 2/(p−1)`; `r = 2` gives the L²-scaling critical index.
pub fn scaling_critical_regularity(dim: usize, p: f64, r: Exponent) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::param("p", format!("{p} must exceed 1")));
    }
    Ok(dim as f64 * r.reciprocal() - 2.0 / (p - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(grid: &GridSpec, width: f64) -> SpectralField {
        let c = grid.center();
        SpectralField::from_fn(grid, |x| {
            let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
            Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
        })
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0, 1.0, 8).is_err());
        assert!(GridSpec::new(4, 1.0, 8).is_err());
        assert!(GridSpec::new(1, 0.0, 8).is_err());
        assert!(GridSpec::new(1, 1.0, 2).is_err());
        assert!(GridSpec::new(1, 1.0, 12).is_err());
        let g = GridSpec::new(2, 3.0, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.wavenumbers(0), [0, 0, 0]);
        // last slot is (−1, −1)
        assert_eq!(g.wavenumbers(63), [-1, -1, 0]);
        // Nyquist index −N/2 is present, +N/2 is not
        assert_eq!(g.wavenumbers(4 * 8), [-4, 0, 0]);
    }

    #[test]
    fn constant_field_norm() {
        for d in 1..=3 {
            let g = GridSpec::new(d, 2.5, 8).unwrap();
            let c = Complex64::new(0.6, -0.8) * 3.0;
            let f = SpectralField::from_fn(&g, |_| c);
            let expected = 3.0 * 2.5f64.powf(d as f64 / 2.0);
            let got = sobolev_norm(&f, 0.0, Exponent::Finite(2.0));
            assert!((got - expected).abs() < 1e-12 * expected);
            // constant is the k = 0 mode so every s gives the same value
            let got1 = sobolev_norm(&f, 1.3, Exponent::Finite(2.0));
            assert!((got1 - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn zero_field_norms() {
        let g = GridSpec::new(2, 1.0, 8).unwrap();
        let f = SpectralField::zeros(&g, Representation::Physical);
        for r in [Exponent::Finite(2.0), Exponent::Finite(5.0), Exponent::Infinity] {
            assert_eq!(sobolev_norm(&f, 0.7, r), 0.0);
        }
    }

    #[test]
    fn bracket_identity_and_plane_wave() {
        let g = GridSpec::new(2, 4.0, 16).unwrap();
        let f = gaussian(&g, 0.5);
        let same = japanese_bracket_multiplier(&f, 0.0).into_physical();
        for (a, b) in same.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-13);
        }
        let k = [3.0, -2.0];
        let wave = SpectralField::from_fn(&g, |x| {
            let ph = 2.0 * PI * (k[0] * x[0] + k[1] * x[1]) / 4.0;
            Complex64::new(ph.cos(), ph.sin())
        });
        let s = 1.7;
        let factor = (1.0 + (2.0 * PI / 4.0).powi(2) * (k[0] * k[0] + k[1] * k[1])).powf(s / 2.0);
        let out = japanese_bracket_multiplier(&wave, s).into_physical();
        for (a, b) in out.values().iter().zip(wave.values()) {
            assert!((a - b * factor).norm() < 1e-11 * factor);
        }
    }

    #[test]
    fn bracket_matches_finer_grid() {
        // oracle: the same Gaussian on a 4× finer lattice of the same box
        let coarse = GridSpec::new(1, 20.0, 128).unwrap();
        let fine = GridSpec::new(1, 20.0, 512).unwrap();
        let a = japanese_bracket_multiplier(&gaussian(&coarse, 1.0), 1.0).into_physical();
        let b = japanese_bracket_multiplier(&gaussian(&fine, 1.0), 1.0).into_physical();
        for (j, v) in a.values().iter().enumerate() {
            assert!((v - b.values()[4 * j]).norm() < 1e-8);
        }
    }

    fn trig_poly(grid: &GridSpec, seed: u64) -> SpectralField {
        // deterministic pseudo-random coefficients on |k| ≤ 3
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut f = SpectralField::zeros(grid, Representation::Frequency);
        for i in 0..grid.len() {
            let k = grid.wavenumbers(i);
            if k.iter().all(|k| k.abs() <= 3) {
                f.values_mut()[i] = Complex64::new(next(), next());
            }
        }
        f
    }

    #[test]
    fn sobolev_norm_matches_direct_summation() {
        // oracle: evaluate ⟨∇⟩^s f pointwise by summing the Fourier series
        let grid = GridSpec::new(2, 3.0, 16).unwrap();
        let f = trig_poly(&grid, 11);
        let s = 0.5;
        let r = 4.0;
        let l = grid.length();
        let mut acc = 0.0;
        for j in 0..grid.len() {
            let x = grid.position(j);
            let mut v = Complex64::new(0.0, 0.0);
            for (i, c) in f.values().iter().enumerate() {
                let xi = grid.frequency(i);
                let w = (2.0 * PI).powi(2) * (xi[0] * xi[0] + xi[1] * xi[1]);
                let ph = 2.0 * PI * (xi[0] * x[0] + xi[1] * x[1]);
                v += c * (1.0 + w).powf(s / 2.0) * Complex64::new(ph.cos(), ph.sin()) / l;
            }
            acc += v.norm().powf(r);
        }
        let oracle = (acc * grid.cell_volume()).powf(1.0 / r);
        let got = sobolev_norm(&f, s, Exponent::Finite(r));
        assert!((got - oracle).abs() < 1e-10 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn spacetime_norm_cases() {
        let g = GridSpec::new(1, 8.0, 32).unwrap();
        let time = TimeGrid::new(2.0, 10).unwrap();
        let z = Trajectory::zeros(&g, time);
        let spec = NormSpec::new(0.5, Exponent::Finite(4.0), Exponent::Finite(3.0), 2.0).unwrap();
        assert_eq!(spacetime_norm(&z, &spec).unwrap(), 0.0);

        let f = gaussian(&g, 1.0);
        let constant = Trajectory::new(time, vec![f.clone(); 11]).unwrap();
        let expected = 2.0f64.powf(1.0 / 3.0) * sobolev_norm(&f, 0.5, Exponent::Finite(4.0));
        let got = spacetime_norm(&constant, &spec).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);

        let sup = NormSpec { q: Exponent::Infinity, ..spec };
        let got = spacetime_norm(&constant, &sup).unwrap();
        assert!((got - sobolev_norm(&f, 0.5, Exponent::Finite(4.0))).abs() < 1e-12);

        assert!(time_norm(0.1, &[1.0], Exponent::Finite(2.0)).is_err());
        let wrong = NormSpec { horizon: 1.0, ..spec };
        assert!(spacetime_norm(&constant, &wrong).is_err());
    }

    #[test]
    fn scaling_critical_values() {
        let two = Exponent::Finite(2.0);
        assert!((scaling_critical_regularity(3, 5.0, two).unwrap() - 1.0).abs() < 1e-15);
        for d in 1..=3 {
            let p = 1.0 + 4.0 / d as f64;
            assert!(scaling_critical_regularity(d, p, two).unwrap().abs() < 1e-15);
        }
        let six = Exponent::Finite(6.0);
        assert!(scaling_critical_regularity(3, 5.0, six).unwrap().abs() < 1e-15);
        assert!(scaling_critical_regularity(3, 1.0, two).is_err());
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert_eq!("4".parse::<Exponent>().unwrap(), Exponent::Finite(4.0));
        assert!("0.5".parse::<Exponent>().is_err());
        assert_eq!(Exponent::Finite(4.0).conjugate(), Exponent::Finite(4.0 / 3.0));
        assert_eq!(Exponent::Infinity.conjugate(), Exponent::Finite(1.0));
    }

    #[test]
    fn dilation_preserves_critical_norm() {
        // u^λ(x) = λ^{−2/(p−1)} u(x/λ) on (L, N) → (λL, λN)
        let p = 5.0;
        let d = 2;
        let s_crit = scaling_critical_regularity(d, p, Exponent::Finite(2.0)).unwrap();
        let lambda = 2.0;
        let g1 = GridSpec::new(d, 12.0, 64).unwrap();
        let g2 = GridSpec::new(d, 24.0, 128).unwrap();
        let profile = |grid: &GridSpec, scale: f64| {
            let c = grid.center();
            SpectralField::from_fn(grid, move |x| {
                let r2: f64 = (0..2).map(|i| ((x[i] - c[i]) / scale).powi(2)).sum();
                Complex64::new(scale.powf(-2.0 / (p - 1.0)) * (-r2).exp(), 0.0)
            })
        };
        let a = homogeneous_multiplier(&profile(&g1, 1.0), s_crit).l2_norm();
        let b = homogeneous_multiplier(&profile(&g2, lambda), s_crit).l2_norm();
        assert!((a - b).abs() <= 0.01 * a, "{a} vs {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn plancherel_and_round_trip(seed in any::<u64>(), d in 1usize..=3) {
            let n = [64, 16, 8][d - 1];
            let grid = GridSpec::new(d, 5.0, n).unwrap();
            let f = trig_poly(&grid, seed).into_physical();
            let back = f.to_frequency().into_physical();
            let norm = f.l2_norm();
            let diff = back.sub(&f).unwrap().l2_norm();
            prop_assert!(diff <= 1e-12 * norm);
            let fr = f.to_frequency().l2_norm();
            prop_assert!((fr - norm).abs() <= 1e-12 * norm);
        }

        #[test]
        fn norm_is_homogeneous(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0, s in -1.0f64..2.0) {
            let grid = GridSpec::new(2, 3.0, 16).unwrap();
            let f = trig_poly(&grid, seed);
            let c = Complex64::new(re, im);
            for r in [Exponent::Finite(2.0), Exponent::Finite(3.5), Exponent::Infinity] {
                let a = sobolev_norm(&f.clone().scaled(c), s, r);
                let b = c.norm() * sobolev_norm(&f, s, r);
                prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
            }
        }

        #[test]
        fn norm_monotone_in_s(seed in any::<u64>(), s1 in -2.0f64..2.0, ds in 0.0f64..2.0) {
            let grid = GridSpec::new(1, 4.0, 32).unwrap();
            let f = trig_poly(&grid, seed);
            let two = Exponent::Finite(2.0);
            prop_assert!(sobolev_norm(&f, s1, two) <= sobolev_norm(&f, s1 + ds, two) * (1.0 + 1e-14));
        }
    }
}
