//! Wiener (unit-scale) randomization of initial data,
//! `u₀^ω = Σ_n g_n ψ(D − n) u₀`, where `ψ(D − n)` localizes the spectrum to
//! the unit cube around `n ∈ ℤ^d`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
// float math comes from libm on targets without std
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::replica::{Purpose, ReplicaRunner, SeedRecord};
use crate::spectral::{
    lebesgue_norm_of_values, time_norm, GridSpec, NormSpec, SpectralField, TimeGrid,
};

/// Frequency window ψ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Window {
    /// `ψ(ξ) = Π_i cos²(πξ_i/2)` on `[−1, 1]^d`; its integer translates sum
    /// to one exactly.
    RaisedCosine,
    /// `ψ ≡ 1`; a test window for single-cube projections only.
    Constant,
}

impl Window {
    fn axis(self, x: f64) -> f64 {
        match self {
            Window::RaisedCosine => {
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    let c = (PI * x / 2.0).cos();
                    c * c
                }
            }
            Window::Constant => 1.0,
        }
    }

    pub fn eval(self, xi: [f64; 3], dim: usize) -> f64 {
        xi[..dim].iter().map(|&x| self.axis(x)).product()
    }
}

/// Law of the coefficients `g_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CoefficientLaw {
    /// Independent real and imaginary parts, each `N(0, σ²/2)`.
    ComplexGaussian,
    /// `±σ` with equal probability on the real part, zero imaginary part.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomizationSpec {
    pub window: Window,
    pub law: CoefficientLaw,
    /// `E|g_n|² = σ²`.
    pub variance: f64,
}

impl RandomizationSpec {
    pub fn new(law: CoefficientLaw, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::param("sigma", format!("variance {variance} must be positive")));
        }
        Ok(Self {
            window: Window::RaisedCosine,
            law,
            variance,
        })
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Complex64 {
        match self.law {
            CoefficientLaw::ComplexGaussian => {
                let sd = (self.variance / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(sd * re, sd * im)
            }
            CoefficientLaw::Bernoulli => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                Complex64::new(sign * self.variance.sqrt(), 0.0)
            }
        }
    }
}

/// `ψ(D − n) u₀`.
pub fn cube_project(u0: &SpectralField, n: [i64; 3], spec: &RandomizationSpec) -> SpectralField {
    let d = u0.grid().dim();
    u0.apply_symbol(|xi| {
        let shifted = [xi[0] - n[0] as f64, xi[1] - n[1] as f64, xi[2] - n[2] as f64];
        Complex64::new(spec.window.eval(shifted, d), 0.0)
    })
}

/// The box of cube centres whose cubes meet the grid's frequency range,
/// enumerated lexicographically (axis 0 slowest).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeLattice {
    dim: usize,
    lo: [i64; 3],
    extent: [usize; 3],
}

impl CubeLattice {
    pub fn for_grid(grid: &GridSpec) -> Self {
        let n = grid.n() as f64;
        let l = grid.length();
        let xi_min = -n / (2.0 * l);
        let xi_max = (n / 2.0 - 1.0) / l;
        let lo_v = xi_min.floor() as i64;
        let hi_v = xi_max.ceil() as i64;
        let mut lo = [0; 3];
        let mut extent = [1; 3];
        for axis in 0..grid.dim() {
            lo[axis] = lo_v;
            extent[axis] = (hi_v - lo_v + 1) as usize;
        }
        Self {
            dim: grid.dim(),
            lo,
            extent,
        }
    }

    pub fn len(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, index: usize) -> [i64; 3] {
        let mut out = [0; 3];
        let mut rest = index;
        for axis in (0..self.dim).rev() {
            out[axis] = self.lo[axis] + (rest % self.extent[axis]) as i64;
            rest /= self.extent[axis];
        }
        out
    }

    fn index(&self, n: [i64; 3]) -> Option<usize> {
        let mut idx = 0;
        for ((&k, &lo), &extent) in n.iter().zip(&self.lo).zip(&self.extent).take(self.dim) {
            let off = k - lo;
            if off < 0 || off as usize >= extent {
                return None;
            }
            idx = idx * extent + off as usize;
        }
        Some(idx)
    }

    pub fn centers(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        (0..self.len()).map(move |i| self.center(i))
    }
}

/// Draws one coefficient per cube of `lattice`, in lattice order.
pub fn draw_coefficients(spec: &RandomizationSpec, count: usize, seed: SeedRecord) -> Vec<Complex64> {
    let mut rng = seed.rng();
    (0..count).map(|_| spec.draw(&mut rng)).collect()
}

/// `Σ_n g_n ψ(D − n) u₀` for given coefficients (indexed like
/// [`CubeLattice::for_grid`]); the result is in frequency representation.
pub fn randomize_with(
    u0: &SpectralField,
    spec: &RandomizationSpec,
    coefficients: &[Complex64],
) -> Result<SpectralField> {
    if spec.window != Window::RaisedCosine {
        return Err(Error::param(
            "window",
            "only the raised-cosine window forms a partition of unity",
        ));
    }
    let grid = u0.grid().clone();
    let lattice = CubeLattice::for_grid(&grid);
    if coefficients.len() != lattice.len() {
        return Err(Error::param(
            "coefficients",
            format!("{} given for {} cubes", coefficients.len(), lattice.len()),
        ));
    }
    let d = grid.dim();
    let mut out = u0.to_frequency();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let xi = grid.frequency(i);
        // at most two cubes per axis overlap a frequency: floor(ξ) and floor(ξ)+1
        let mut base = [0i64; 3];
        let mut w = [[0.0f64; 2]; 3];
        for axis in 0..3 {
            if axis < d {
                base[axis] = xi[axis].floor() as i64;
                w[axis][0] = spec.window.axis(xi[axis] - base[axis] as f64);
                w[axis][1] = spec.window.axis(xi[axis] - (base[axis] + 1) as f64);
            } else {
                w[axis] = [1.0, 0.0];
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut n = [0i64; 3];
            for axis in 0..d {
                let bit = (corner >> axis) & 1;
                weight *= w[axis][bit];
                n[axis] = base[axis] + bit as i64;
            }
            if weight != 0.0 {
                let idx = lattice
                    .index(n)
                    .expect("overlapping cube lies inside the lattice");
                acc += coefficients[idx] * weight;
            }
        }
        *v *= acc;
    }
    Ok(out)
}

/// A randomized field together with the lineage of its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedField {
    pub field: SpectralField,
    pub seed: SeedRecord,
    pub n_coefficients: usize,
}

/// Wiener randomization with i.i.d. coefficients drawn from `seed`.
pub fn wiener_randomize(
    u0: &SpectralField,
    spec: &RandomizationSpec,
    seed: SeedRecord,
) -> Result<RandomizedField> {
    let lattice = CubeLattice::for_grid(u0.grid());
    let coefficients = draw_coefficients(spec, lattice.len(), seed);
    Ok(RandomizedField {
        field: randomize_with(u0, spec, &coefficients)?,
        seed,
        n_coefficients: coefficients.len(),
    })
}

/// `σ² Σ_n ‖ψ(D − n)u₀‖²_{H^s}`, the mean square `H^s` norm of `u₀^ω`.
pub fn expected_sobolev_square(u0: &SpectralField, spec: &RandomizationSpec, s: f64) -> f64 {
    let lattice = CubeLattice::for_grid(u0.grid());
    let weighted = crate::spectral::japanese_bracket_multiplier(u0, s);
    let total: f64 = lattice
        .centers()
        .map(|n| cube_project(&weighted, n, spec).l2_norm().powi(2))
        .sum();
    spec.variance * total
}

/// `‖S(t)f‖_{L^q_T W^{s,r}}` on `steps` uniform steps.
pub fn linear_flow_norm(f: &SpectralField, norm: &NormSpec, steps: usize) -> Result<f64> {
    let time = TimeGrid::new(norm.horizon, steps)?;
    let grid = f.grid();
    let base = crate::spectral::japanese_bracket_multiplier(f, norm.s);
    let weight = grid.cell_volume();
    let mut slice_norms = Vec::with_capacity(time.len());
    for t in time.times() {
        let evolved = crate::propagator::evolve(&base, t).into_physical();
        slice_norms.push(lebesgue_norm_of_values(evolved.values(), weight, norm.r));
    }
    time_norm(time.dt(), &slice_norms, norm.q)
}

/// Monte Carlo sample of `‖S(t)u₀^ω‖_{L^q_T W^{s,r}}`, one value per replica.
pub fn randomized_norm_samples<R: ReplicaRunner>(
    runner: &R,
    u0: &SpectralField,
    spec: &RandomizationSpec,
    norm: &NormSpec,
    steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let base = SeedRecord::new(master_seed, Purpose::Randomization, 0);
    runner
        .map(n_samples, |i| {
            let r = wiener_randomize(u0, spec, base.with_replica(i))?;
            linear_flow_norm(&r.field, norm, steps)
        })
        .into_iter()
        .collect()
}

/// Quantiles and tail fit of the randomized linear-flow norm.
pub fn randomized_strichartz_probe<R: ReplicaRunner>(
    runner: &R,
    u0: &SpectralField,
    spec: &RandomizationSpec,
    norm: &NormSpec,
    steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> Result<crate::estimators::TailSummary> {
    if !(norm.q.is_finite() && norm.r.is_finite()) {
        return Err(Error::Hypothesis("q and r must be finite".into()));
    }
    let xs = randomized_norm_samples(runner, u0, spec, norm, steps, n_samples, master_seed)?;
    Ok(crate::estimators::TailSummary::from_samples(&xs))
}
