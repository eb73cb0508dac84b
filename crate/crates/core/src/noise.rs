//! Diagonal Hilbert–Schmidt smoothing operators and exact sampling of the
//! stochastic convolution `Ψ(t) = −i ∫₀^t S(t−t')φ dW(t')`.
//!
//! The cylindrical Wiener process is expanded in the lattice exponentials
//! `e_k = L^{−d/2} e^{2πi ξ_k·x}`, which diagonalize every operator here, so
//! each Fourier mode of Ψ is an independent complex Ornstein–Uhlenbeck-like
//! rotation driven by its own Brownian motion:
//!
//! ```text
//! Ψ̂_k(t + h) = e^{ih|2πξ_k|²} Ψ̂_k(t) + λ_k g,   g ~ CN(0, h).
//! ```
//!
//! The recursion is exact in law for any step h. The constant phase −i is
//! dropped because the complex Gaussian law is rotation invariant.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;
// float math comes from libm on targets without std
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimators::{mean, variance};
use crate::propagator::{evolve, StepPropagator};
use crate::replica::{SeedRecord, StreamRng};
use crate::spectral::{GridSpec, Representation, SpectralField, TimeGrid, Trajectory};

/// How a [`SmoothingOperator`] was built; recorded in manifests.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "kebab-case"))]
pub enum PhiFamily {
    Zero,
    /// `λ_k = 1` for `|ξ_k| ≤ k_max`.
    Cutoff { k_max: f64 },
    /// `λ_k = (1 + |2πξ_k|²)^{−α/2}`.
    PowerLaw { alpha: f64 },
    /// Power law restricted to `|ξ_k| ≤ k_max`.
    TruncatedPowerLaw { alpha: f64, k_max: f64 },
    SingleMode { wavenumber: [i64; 3], amplitude: f64 },
    Custom,
}

/// φ as a nonnegative Fourier multiplier family `{λ_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingOperator {
    grid: GridSpec,
    multipliers: Vec<f64>,
    family: PhiFamily,
    scale: f64,
}

impl SmoothingOperator {
    pub fn zero(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            multipliers: alloc::vec![0.0; grid.len()],
            family: PhiFamily::Zero,
            scale: 1.0,
        }
    }

    pub fn cutoff(grid: &GridSpec, k_max: f64) -> Result<Self> {
        if !(k_max >= 0.0) {
            return Err(Error::param("K", format!("{k_max} must be nonnegative")));
        }
        let multipliers = (0..grid.len())
            .map(|i| if freq_norm(grid, i) <= k_max { 1.0 } else { 0.0 })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            multipliers,
            family: PhiFamily::Cutoff { k_max },
            scale: 1.0,
        })
    }

    /// Power-law family; `declared_s` is the regularity the operator must be
    /// Hilbert–Schmidt into, which requires `α > s + d/2`.
    pub fn power_law(grid: &GridSpec, alpha: f64, declared_s: f64) -> Result<Self> {
        let bound = declared_s + grid.dim() as f64 / 2.0;
        if !(alpha > bound) {
            return Err(Error::Hypothesis(format!(
                "power-law φ with α = {alpha} is not Hilbert–Schmidt into H^{declared_s}: need α > {bound}"
            )));
        }
        let multipliers = grid
            .omega()
            .iter()
            .map(|w| (1.0 + w).powf(-alpha / 2.0))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            multipliers,
            family: PhiFamily::PowerLaw { alpha },
            scale: 1.0,
        })
    }

    /// Power law with a sharp frequency cutoff; the lattice sum is finite for
    /// every α, so no HS condition is imposed.
    pub fn truncated_power_law(grid: &GridSpec, alpha: f64, k_max: f64) -> Result<Self> {
        if !(k_max >= 0.0) {
            return Err(Error::param("K", format!("{k_max} must be nonnegative")));
        }
        let multipliers = (0..grid.len())
            .map(|i| {
                if freq_norm(grid, i) <= k_max {
                    (1.0 + grid.omega()[i]).powf(-alpha / 2.0)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            multipliers,
            family: PhiFamily::TruncatedPowerLaw { alpha, k_max },
            scale: 1.0,
        })
    }

    pub fn single_mode(grid: &GridSpec, wavenumber: [i64; 3], amplitude: f64) -> Result<Self> {
        if !(amplitude >= 0.0) {
            return Err(Error::param("amplitude", "must be nonnegative"));
        }
        let slot = (0..grid.len())
            .find(|&i| grid.wavenumbers(i) == wavenumber)
            .ok_or_else(|| Error::param("wavenumber", format!("{wavenumber:?} not on the lattice")))?;
        let mut multipliers = alloc::vec![0.0; grid.len()];
        multipliers[slot] = amplitude;
        Ok(Self {
            grid: grid.clone(),
            multipliers,
            family: PhiFamily::SingleMode {
                wavenumber,
                amplitude,
            },
            scale: 1.0,
        })
    }

    pub fn from_multipliers(grid: &GridSpec, multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} multipliers for {} modes",
                multipliers.len(),
                grid.len()
            )));
        }
        if let Some(i) = multipliers.iter().position(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::param("multipliers", format!("λ at slot {i} is not a finite nonnegative number")));
        }
        Ok(Self {
            grid: grid.clone(),
            multipliers,
            family: PhiFamily::Custom,
            scale: 1.0,
        })
    }

    /// `c·φ` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c >= 0.0, "multipliers must stay nonnegative");
        Self {
            grid: self.grid.clone(),
            multipliers: self.multipliers.iter().map(|l| l * c).collect(),
            family: self.family.clone(),
            scale: self.scale * c,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn family(&self) -> &PhiFamily {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.multipliers.iter().all(|l| *l == 0.0)
    }

    pub fn label(&self) -> String {
        let base = match &self.family {
            PhiFamily::Zero => String::from("zero"),
            PhiFamily::Cutoff { k_max } => format!("cutoff:K={k_max}"),
            PhiFamily::PowerLaw { alpha } => format!("power:alpha={alpha}"),
            PhiFamily::TruncatedPowerLaw { alpha, k_max } => {
                format!("power:alpha={alpha},K={k_max}")
            }
            PhiFamily::SingleMode {
                wavenumber,
                amplitude,
            } => format!(
                "mode:k={},{},{};lambda={amplitude}",
                wavenumber[0], wavenumber[1], wavenumber[2]
            ),
            PhiFamily::Custom => String::from("custom"),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{}x{base}", self.scale)
        }
    }

    /// `‖φ‖_{HS(L²; H^s)} = (Σ_k (1+|2πξ_k|²)^s λ_k²)^{1/2}`.
    pub fn hs_norm(&self, s: f64) -> f64 {
        self.multipliers
            .iter()
            .zip(self.grid.omega())
            .map(|(l, w)| {
                if *l == 0.0 {
                    0.0
                } else {
                    (1.0 + w).powf(s) * l * l
                }
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn freq_norm(grid: &GridSpec, i: usize) -> f64 {
    let xi = grid.frequency(i);
    (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt()
}

/// `‖φ‖_{HS(L²; H^s)}`.
pub fn hs_norm(phi: &SmoothingOperator, s: f64) -> f64 {
    phi.hs_norm(s)
}

/// A sampled trajectory `{Ψ(t_j)}` with its RNG lineage.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub trajectory: Trajectory,
    pub seed: SeedRecord,
}

impl NoisePath {
    pub fn grid(&self) -> &GridSpec {
        self.trajectory.grid()
    }

    pub fn time(&self) -> TimeGrid {
        self.trajectory.time
    }

    /// The Duhamel increment over step `j`: `Ψ(t_{j+1}) − S(dt)Ψ(t_j)`.
    pub fn increment(&self, step: &StepPropagator, j: usize) -> SpectralField {
        let mut out = self.trajectory.slices[j + 1].to_frequency();
        let prev = step.apply(&self.trajectory.slices[j]);
        out.add_scaled(Complex64::new(-1.0, 0.0), &prev)
            .expect("slices share a grid");
        out
    }

    /// The first `steps` steps as a path on `[0, t_steps]`.
    pub fn truncate(&self, steps: usize) -> Result<NoisePath> {
        if steps == 0 || steps > self.time().steps {
            return Err(Error::param("steps", format!("{steps} outside 1..={}", self.time().steps)));
        }
        let time = TimeGrid::new(self.time().time(steps), steps)?;
        Ok(NoisePath {
            trajectory: Trajectory::new(time, self.trajectory.slices[..=steps].to_vec())?,
            seed: self.seed,
        })
    }
}

fn complex_gaussian(rng: &mut StreamRng, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sd * re, sd * im)
}

/// Exact samples of Ψ at increasing times `0 = τ_0 < τ_1 < …`.
///
/// Two Gaussians are drawn per mode and step, for every mode including those
/// with `λ_k = 0`, so operators that differ only in their multipliers consume
/// identical random numbers.
pub fn sample_convolution_at(
    phi: &SmoothingOperator,
    times: &[f64],
    seed: SeedRecord,
) -> Result<Vec<SpectralField>> {
    if times.first() != Some(&0.0) {
        return Err(Error::param("times", "must start at 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("times", "must be strictly increasing"));
    }
    let grid = phi.grid();
    let mut rng = seed.rng();
    let mut current = SpectralField::zeros(grid, Representation::Frequency);
    let mut out = Vec::with_capacity(times.len());
    out.push(current.clone());
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let values = current.values_mut();
        for ((v, &omega), &lambda) in values.iter_mut().zip(grid.omega()).zip(phi.multipliers()) {
            let g = complex_gaussian(&mut rng, h);
            *v = *v * Complex64::from_polar(1.0, h * omega) + g * lambda;
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Samples Ψ on a uniform grid. Replaying the same `seed` reproduces the path
/// bit for bit.
pub fn sample_convolution(phi: &SmoothingOperator, time: TimeGrid, seed: SeedRecord) -> NoisePath {
    let grid = phi.grid();
    let step = StepPropagator::new(grid, time.dt());
    let sd = (time.dt() / 2.0).sqrt();
    let mut rng = seed.rng();
    let mut current = SpectralField::zeros(grid, Representation::Frequency);
    let mut slices = Vec::with_capacity(time.len());
    slices.push(current.clone());
    for _ in 0..time.steps {
        step.apply_in_place(&mut current);
        for (v, &lambda) in current.values_mut().iter_mut().zip(phi.multipliers()) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sd * re, sd * im) * lambda;
        }
        slices.push(current.clone());
    }
    NoisePath {
        trajectory: Trajectory { time, slices },
        seed,
    }
}

/// One realization of Ψ observed on several uniform grids `[0, T_k]` that
/// share a step count, so the path for each horizon is a restriction of the
/// same sample rather than an independent draw.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedPaths {
    times: Vec<f64>,
    fields: Vec<SpectralField>,
    steps: usize,
    seed: SeedRecord,
}

impl NestedPaths {
    pub fn sample(
        phi: &SmoothingOperator,
        horizons: &[f64],
        steps: usize,
        seed: SeedRecord,
    ) -> Result<Self> {
        if horizons.is_empty() {
            return Err(Error::param("horizons", "at least one horizon is required"));
        }
        let mut times = Vec::new();
        for &h in horizons {
            let grid = TimeGrid::new(h, steps)?;
            times.extend(grid.times());
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
        let fields = sample_convolution_at(phi, &times, seed)?;
        Ok(Self {
            times,
            fields,
            steps,
            seed,
        })
    }

    pub fn seed(&self) -> SeedRecord {
        self.seed
    }

    /// The sampled path on `[0, horizon]`; `horizon` must be one of the
    /// horizons passed to [`NestedPaths::sample`].
    pub fn path(&self, horizon: f64) -> Result<NoisePath> {
        let time = TimeGrid::new(horizon, self.steps)?;
        let mut slices = Vec::with_capacity(time.len());
        for t in time.times() {
            let tol = 1e-12 * t.abs().max(1e-300);
            let i = self.times.partition_point(|&x| x < t - tol);
            match self.times.get(i) {
                Some(&x) if (x - t).abs() <= tol => slices.push(self.fields[i].clone()),
                _ => {
                    return Err(Error::param(
                        "horizon",
                        format!("{horizon} was not sampled"),
                    ))
                }
            }
        }
        Ok(NoisePath {
            trajectory: Trajectory::new(time, slices)?,
            seed: self.seed,
        })
    }
}

/// `Ψ̃(t) = S(t)u₀^ω + Ψ(t)`, the convolution started from random data.
pub fn shifted_convolution(
    phi: &SmoothingOperator,
    u0: &SpectralField,
    time: TimeGrid,
    seed: SeedRecord,
) -> Result<NoisePath> {
    phi.grid().check_same(u0.grid())?;
    let mut path = sample_convolution(phi, time, seed);
    for (j, slice) in path.trajectory.slices.iter_mut().enumerate() {
        slice.add_scaled(Complex64::new(1.0, 0.0), &evolve(u0, time.time(j)))?;
    }
    Ok(path)
}

/// Comparison of an empirical `2j`-th absolute moment with `j!·σ^j`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentCheck {
    pub j: u32,
    pub n_samples: usize,
    pub empirical: f64,
    /// Empirical variance `σ̂ = mean |g|²`.
    pub sigma_hat: f64,
    /// `j!·σ̂^j`.
    pub expected: f64,
    pub stderr: f64,
    /// `(empirical − expected)/stderr`, with the delta-method error that
    /// accounts for σ̂ being estimated from the same sample.
    pub z_score: f64,
    /// Standard deviation of `|g|^{2j}` over √n.
    pub moment_stderr: f64,
}

impl MomentCheck {
    /// z-score of the empirical moment against `j!·σ^j` for a known σ.
    pub fn z_against(&self, sigma: f64) -> f64 {
        (self.empirical - factorial(self.j) * sigma.powi(self.j as i32)) / self.moment_stderr
    }
}

fn factorial(j: u32) -> f64 {
    (1..=j).map(|i| i as f64).product()
}

/// `E|g|^{2j} = j!·σ^j` for mean-zero complex Gaussians of variance σ.
pub fn gaussian_moment_check(samples: &[Complex64], j: u32) -> Result<MomentCheck> {
    if j == 0 {
        return Err(Error::param("j", "must be at least 1"));
    }
    if samples.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples.len();
    let sq: Vec<f64> = samples.iter().map(|g| g.norm_sqr()).collect();
    let pw: Vec<f64> = sq.iter().map(|a| a.powi(j as i32)).collect();
    let sigma_hat = mean(&sq);
    let empirical = mean(&pw);
    let fact = factorial(j);
    let expected = fact * sigma_hat.powi(j as i32);
    // influence function of m_j − j!·m_1^j
    let slope = j as f64 * fact * sigma_hat.powi(j as i32 - 1);
    let infl: Vec<f64> = pw.iter().zip(&sq).map(|(p, a)| p - slope * a).collect();
    let stderr = (variance(&infl) / n as f64).sqrt();
    let z_score = if stderr > 0.0 {
        (empirical - expected) / stderr
    } else {
        0.0
    };
    Ok(MomentCheck {
        j,
        n_samples: n,
        empirical,
        sigma_hat,
        expected,
        stderr,
        z_score,
        moment_stderr: (variance(&pw) / n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::Purpose;
    use core::f64::consts::PI;

    fn grid1() -> GridSpec {
        GridSpec::new(1, 2.0 * PI, 16).unwrap()
    }

    #[test]
    fn hs_norm_simple_cases() {
        let g = grid1();
        let one = SmoothingOperator::single_mode(&g, [0, 0, 0], 1.0).unwrap();
        for s in [-1.0, 0.0, 2.5] {
            assert!((one.hs_norm(s) - 1.0).abs() < 1e-15);
        }
        let mut lam = alloc::vec![0.0; g.len()];
        for l in lam.iter_mut().take(5) {
            *l = 1.0;
        }
        let five = SmoothingOperator::from_multipliers(&g, lam).unwrap();
        assert!((five.hs_norm(0.0) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hs_norm_power_law_matches_naive_loop() {
        let g = GridSpec::new(2, 3.0, 16).unwrap();
        let alpha = 2.2;
        let s = 0.7;
        let phi = SmoothingOperator::power_law(&g, alpha, s).unwrap();
        let mut acc = 0.0;
        for k0 in -8i64..8 {
            for k1 in -8i64..8 {
                let w = (2.0 * PI / 3.0).powi(2) * ((k0 * k0 + k1 * k1) as f64);
                let lam = (1.0 + w).powf(-alpha / 2.0);
                acc += (1.0 + w).powf(s) * lam * lam;
            }
        }
        assert!((phi.hs_norm(s) - acc.sqrt()).abs() < 1e-12 * acc.sqrt());
    }

    #[test]
    fn power_law_requires_hs_condition() {
        let g = GridSpec::new(2, 3.0, 16).unwrap();
        assert!(matches!(
            SmoothingOperator::power_law(&g, 1.5, 0.5),
            Err(Error::Hypothesis(_))
        ));
        assert!(SmoothingOperator::power_law(&g, 1.6, 0.5).is_ok());
    }

    #[test]
    fn zero_operator_gives_zero_path() {
        let g = grid1();
        let path = sample_convolution(
            &SmoothingOperator::zero(&g),
            TimeGrid::new(1.0, 10).unwrap(),
            SeedRecord::new(1, Purpose::Noise, 0),
        );
        assert!(path.trajectory.slices.iter().all(|s| s.l2_norm() == 0.0));
    }

    #[test]
    fn path_starts_at_zero_and_replays() {
        let g = grid1();
        let phi = SmoothingOperator::cutoff(&g, 3.0).unwrap();
        let time = TimeGrid::new(0.5, 8).unwrap();
        let seed = SeedRecord::new(42, Purpose::Noise, 3);
        let a = sample_convolution(&phi, time, seed);
        let b = sample_convolution(&phi, time, seed);
        assert_eq!(a, b);
        assert!(a.trajectory.slices[0].values().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        assert!(a.trajectory.last().l2_norm() > 0.0);
    }

    #[test]
    fn uniform_and_general_samplers_agree() {
        let g = grid1();
        let phi = SmoothingOperator::cutoff(&g, 2.0).unwrap();
        let time = TimeGrid::new(0.4, 4).unwrap();
        let seed = SeedRecord::new(9, Purpose::Noise, 1);
        let a = sample_convolution(&phi, time, seed);
        let times: Vec<f64> = time.times().collect();
        let b = sample_convolution_at(&phi, &times, seed).unwrap();
        for (x, y) in a.trajectory.slices.iter().zip(&b) {
            assert!(x.sub(y).unwrap().l2_norm() < 1e-14);
        }
    }

    #[test]
    fn increments_recover_the_gaussian_kicks() {
        let g = grid1();
        let phi = SmoothingOperator::single_mode(&g, [1, 0, 0], 2.0).unwrap();
        let time = TimeGrid::new(1.0, 5).unwrap();
        let path = sample_convolution(&phi, time, SeedRecord::new(3, Purpose::Noise, 0));
        let step = StepPropagator::new(&g, time.dt());
        for j in 0..5 {
            let inc = path.increment(&step, j);
            // only the forced mode moves
            let nonzero = inc.values().iter().filter(|v| v.norm() > 1e-14).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn shifted_convolution_cases() {
        let g = grid1();
        let time = TimeGrid::new(0.3, 6).unwrap();
        let seed = SeedRecord::new(5, Purpose::Noise, 0);
        let u0 = SpectralField::from_fn(&g, |x| Complex64::new((x[0] - PI).cos().exp(), 0.0));
        let zero = SmoothingOperator::zero(&g);
        let phi = SmoothingOperator::cutoff(&g, 2.0).unwrap();

        let pure = shifted_convolution(&zero, &u0, time, seed).unwrap();
        for (j, s) in pure.trajectory.slices.iter().enumerate() {
            assert!(s.sub(&evolve(&u0, time.time(j))).unwrap().l2_norm() < 1e-14);
        }
        assert!(pure.trajectory.slices[0].sub(&u0).unwrap().l2_norm() < 1e-13);

        let z = SpectralField::zeros(&g, Representation::Physical);
        let only_noise = shifted_convolution(&phi, &z, time, seed).unwrap();
        assert_eq!(only_noise, sample_convolution(&phi, time, seed));

        let both = shifted_convolution(&phi, &u0, time, seed).unwrap();
        for j in 0..time.len() {
            let sum = {
                let mut a = pure.trajectory.slices[j].clone();
                a.add_scaled(Complex64::new(1.0, 0.0), &only_noise.trajectory.slices[j]).unwrap();
                a
            };
            assert!(both.trajectory.slices[j].sub(&sum).unwrap().l2_norm() < 1e-12);
        }
    }

    #[test]
    fn moment_check_j1_is_identity() {
        let mut rng = SeedRecord::new(1, Purpose::Data, 0).rng();
        let xs: Vec<Complex64> = (0..1000).map(|_| complex_gaussian(&mut rng, 2.0)).collect();
        let m = gaussian_moment_check(&xs, 1).unwrap();
        assert!((m.empirical - m.expected).abs() < 1e-12 * m.expected);
        assert_eq!(m.z_score, 0.0);
        assert!(gaussian_moment_check(&xs, 0).is_err());
    }

    #[test]
    fn truncate_keeps_prefix() {
        let g = grid1();
        let phi = SmoothingOperator::cutoff(&g, 2.0).unwrap();
        let path = sample_convolution(&phi, TimeGrid::new(1.0, 8).unwrap(), SeedRecord::new(2, Purpose::Noise, 0));
        let short = path.truncate(2).unwrap();
        assert!((short.time().horizon - 0.25).abs() < 1e-15);
        assert_eq!(short.trajectory.slices[2], path.trajectory.slices[2]);
        assert!(path.truncate(9).is_err());
    }
}
