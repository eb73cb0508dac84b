//! Monte Carlo moments, power-law fits and the verification reports for the
//! stochastic-convolution and randomized-data estimates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
// float math comes from libm on targets without std
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::{sample_convolution, SmoothingOperator};
use crate::replica::{Purpose, ReplicaRunner, SeedRecord};
use crate::propagator::is_admissible;
use crate::randomization::{linear_flow_norm, randomized_norm_samples, RandomizationSpec};
use crate::spectral::{spacetime_norm, Exponent, NormSpec, SpectralField, TimeGrid, Trajectory};

/// Bootstrap resamples used for standard errors and confidence intervals.
pub const BOOTSTRAP_RESAMPLES: usize = 400;

/// Result of a log-log least-squares fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitReport {
    pub exponent_hat: f64,
    pub exponent_predicted: Option<f64>,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub ci_95: (f64, f64),
    pub metadata: Vec<(String, String)>,
    pub seed: Option<u64>,
}

impl FitReport {
    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn ci_excludes_zero(&self) -> bool {
        self.ci_95.0 > 0.0 || self.ci_95.1 < 0.0
    }
}

/// Sum in a fixed binary-tree order; the result depends only on the order of
/// `xs`, never on how it was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&dev) / (n - 1) as f64
}

/// Standard error of the mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(xs: &[f64], prob: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&sorted, prob)
}

pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r²)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else if ss_res <= 1e-30 {
        1.0
    } else {
        0.0
    };
    (slope, intercept, r2)
}

/// Power-law fit `y ≈ C x^b` by least squares on logarithms, with a
/// residual-bootstrap 95% interval for `b`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<FitReport> {
    fit_power_law_seeded(xs, ys, SeedRecord::new(0, Purpose::Bootstrap, 0))
}

pub fn fit_power_law_seeded(xs: &[f64], ys: &[f64], seed: SeedRecord) -> Result<FitReport> {
    if xs.len() != ys.len() {
        return Err(Error::param("ys", "length differs from xs"));
    }
    if xs.len() < 4 {
        return Err(Error::NotEnoughData {
            needed: 4,
            got: xs.len(),
        });
    }
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        if !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::NonPositiveData(i));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept, r2) = least_squares(&lx, &ly);
    let fitted: Vec<f64> = lx.iter().map(|x| intercept + slope * x).collect();
    let resid: Vec<f64> = ly.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mut rng = seed.rng();
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut y_star = vec![0.0; ly.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for (y, f) in y_star.iter_mut().zip(&fitted) {
            *y = f + resid[rng.random_range(0..resid.len())];
        }
        boot.push(least_squares(&lx, &y_star).0);
    }
    boot.sort_by(|a, b| a.total_cmp(b));
    let lo = quantile_sorted(&boot, 0.025).min(slope);
    let hi = quantile_sorted(&boot, 0.975).max(slope);
    Ok(FitReport {
        exponent_hat: slope,
        exponent_predicted: None,
        intercept,
        r_squared: r2,
        n_points: xs.len(),
        ci_95: (lo, hi),
        metadata: Vec::new(),
        seed: Some(seed.master),
    })
}

/// `(E X^ρ)^{1/ρ}` with its bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub rho: f64,
    pub n_samples: usize,
}

/// Empirical `L^ρ(Ω)` norm, `(1/n Σ X_i^ρ)^{1/ρ}`.
pub fn lp_moment(samples: &[f64], rho: f64) -> f64 {
    let max = samples.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let scaled: Vec<f64> = samples.iter().map(|x| (x / max).powf(rho)).collect();
    max * mean(&scaled).powf(1.0 / rho)
}

/// Moment plus bootstrap standard error, resampling from `bootstrap` so the
/// point estimate never depends on the resampling stream.
pub fn moment_with_stderr(samples: &[f64], rho: f64, bootstrap: SeedRecord) -> MomentEstimate {
    let estimate = lp_moment(samples, rho);
    let n = samples.len();
    let mut rng = bootstrap.rng();
    let mut resample = vec![0.0; n];
    let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for r in resample.iter_mut() {
                *r = samples[rng.random_range(0..n)];
            }
            lp_moment(&resample, rho)
        })
        .collect();
    MomentEstimate {
        estimate,
        stderr: variance(&stats).sqrt(),
        rho,
        n_samples: n,
    }
}

/// Monte Carlo `‖ ‖X‖_{L^q_T W^{s,r}} ‖_{L^ρ(Ω)}` for trajectories drawn by
/// `sampler`, which receives the replica's seed lineage.
pub fn mc_norm_moment<R, F>(
    runner: &R,
    sampler: F,
    norm: &NormSpec,
    rho: f64,
    n_samples: usize,
    master_seed: u64,
) -> Result<MomentEstimate>
where
    R: ReplicaRunner,
    F: Fn(SeedRecord) -> Result<Trajectory> + Sync + Send,
{
    if !(rho >= 1.0) {
        return Err(Error::param("rho", format!("{rho} below 1")));
    }
    if n_samples < 30 {
        return Err(Error::param("n_samples", format!("{n_samples} below 30")));
    }
    let base = SeedRecord::new(master_seed, Purpose::Noise, 0);
    let xs = runner
        .map(n_samples, |i| {
            sampler(base.with_replica(i)).and_then(|t| spacetime_norm(&t, norm))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(moment_with_stderr(
        &xs,
        rho,
        SeedRecord::new(master_seed, Purpose::Bootstrap, 0),
    ))
}

/// Per-horizon entry of a stochastic-convolution scaling study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LadderPoint {
    pub horizon: f64,
    pub moment: MomentEstimate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingReport {
    /// Fit of the moment against T; `ci_95` comes from bootstrapping paths.
    pub fit: FitReport,
    pub points: Vec<LadderPoint>,
    /// Moment with 2φ divided by the moment with φ at the largest horizon.
    pub homogeneity_ratio: f64,
    pub hs_norm: f64,
    /// Whether ρ ≥ max(q, r), the regime used in the Minkowski step.
    pub rho_meets_minkowski: bool,
}

/// Parameters of [`verify_convolution_scaling`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingParams {
    pub s: f64,
    pub q: Exponent,
    pub r: Exponent,
    pub horizons: Vec<f64>,
    pub rho: f64,
    pub n_samples: usize,
    pub steps: usize,
    pub master_seed: u64,
}

/// Checks the hypotheses of the stochastic-convolution integrability bound.
pub fn check_scaling_hypotheses(dim: usize, q: Exponent, r: Exponent) -> Result<()> {
    let q = match q {
        Exponent::Finite(q) => q,
        Exponent::Infinity => return Err(Error::Hypothesis("q must be finite".into())),
    };
    let r = match r {
        Exponent::Finite(r) => r,
        Exponent::Infinity => return Err(Error::Hypothesis("r must be finite".into())),
    };
    if q < 1.0 {
        return Err(Error::Hypothesis(format!("q = {q} below 1")));
    }
    if r < 2.0 {
        return Err(Error::Hypothesis(format!("r = {r} below 2")));
    }
    if dim >= 3 {
        let bound = 2.0 * dim as f64 / (dim as f64 - 2.0);
        if r > bound + 1e-12 {
            return Err(Error::Hypothesis(format!(
                "r = {r} exceeds 2d/(d−2) = {bound} in dimension {dim}"
            )));
        }
    }
    Ok(())
}

/// Measures `‖ ‖Ψ‖_{L^q_T W^{s,r}} ‖_{L^ρ(Ω)}` over a ladder of horizons, fits
/// the growth exponent in T and checks homogeneity in φ.
pub fn verify_convolution_scaling<R: ReplicaRunner>(
    runner: &R,
    phi: &SmoothingOperator,
    params: &ScalingParams,
) -> Result<ScalingReport> {
    let grid = phi.grid();
    check_scaling_hypotheses(grid.dim(), params.q, params.r)?;
    if phi.is_zero() {
        return Err(Error::Degenerate(
            "φ = 0: every moment vanishes, no power law to fit".into(),
        ));
    }
    if params.horizons.len() < 4 {
        return Err(Error::NotEnoughData {
            needed: 4,
            got: params.horizons.len(),
        });
    }
    let n = params.n_samples;
    let base = SeedRecord::new(params.master_seed, Purpose::Noise, 0);
    let mut per_horizon: Vec<Vec<f64>> = Vec::with_capacity(params.horizons.len());
    for (h, &t) in params.horizons.iter().enumerate() {
        let spec = NormSpec::new(params.s, params.r, params.q, t)?;
        let time = TimeGrid::new(t, params.steps)?;
        let offset = (h * n) as u64;
        let xs = runner
            .map(n, |i| {
                let path = sample_convolution(phi, time, base.with_replica(offset + i));
                spacetime_norm(&path.trajectory, &spec)
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        per_horizon.push(xs);
    }
    let points: Vec<LadderPoint> = params
        .horizons
        .iter()
        .zip(&per_horizon)
        .enumerate()
        .map(|(h, (&t, xs))| LadderPoint {
            horizon: t,
            moment: moment_with_stderr(
                xs,
                params.rho,
                SeedRecord::new(params.master_seed, Purpose::Bootstrap, h as u64),
            ),
        })
        .collect();
    let ys: Vec<f64> = points.iter().map(|p| p.moment.estimate).collect();
    let mut fit = fit_power_law_seeded(
        &params.horizons,
        &ys,
        SeedRecord::new(params.master_seed, Purpose::Bootstrap, u64::MAX),
    )?;

    // path bootstrap: resample each horizon's replicas, refit the slope
    let mut rng = SeedRecord::new(params.master_seed, Purpose::Bootstrap, u64::MAX - 1).rng();
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut buf = vec![0.0; n];
    let mut boot_ys = vec![0.0; ys.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for (y, xs) in boot_ys.iter_mut().zip(&per_horizon) {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..n)];
            }
            *y = lp_moment(&buf, params.rho);
        }
        if boot_ys.iter().all(|y| *y > 0.0) {
            let lx: Vec<f64> = params.horizons.iter().map(|t| t.ln()).collect();
            let ly: Vec<f64> = boot_ys.iter().map(|y| y.ln()).collect();
            slopes.push(least_squares(&lx, &ly).0);
        }
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    fit.ci_95 = (
        quantile_sorted(&slopes, 0.025).min(fit.exponent_hat),
        quantile_sorted(&slopes, 0.975).max(fit.exponent_hat),
    );
    fit = fit
        .with_meta("s", params.s)
        .with_meta("q", params.q)
        .with_meta("r", params.r)
        .with_meta("rho", params.rho)
        .with_meta("n_samples", n)
        .with_meta("phi", phi.label());

    // homogeneity: same replicas, doubled multipliers, largest horizon
    let last = params.horizons.len() - 1;
    let t = params.horizons[last];
    let spec = NormSpec::new(params.s, params.r, params.q, t)?;
    let time = TimeGrid::new(t, params.steps)?;
    let doubled = phi.scaled(2.0);
    let offset = (last * n) as u64;
    let xs2 = runner
        .map(n, |i| {
            let path = sample_convolution(&doubled, time, base.with_replica(offset + i));
            spacetime_norm(&path.trajectory, &spec)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let homogeneity_ratio = lp_moment(&xs2, params.rho) / points[last].moment.estimate;

    let rho_meets_minkowski = params.rho >= params.q.value().max(params.r.value());
    Ok(ScalingReport {
        fit,
        points,
        homogeneity_ratio,
        hs_norm: phi.hs_norm(params.s),
        rho_meets_minkowski,
    })
}

/// Quantiles and sub-Gaussian tail fit of a sample of nonnegative norms.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailSummary {
    pub n_samples: usize,
    pub mean: f64,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
    /// `c` in `log P(X > κ) ≈ a − c κ²`, fitted over the top decile.
    pub tail_c: f64,
    pub tail_intercept: f64,
    pub tail_r_squared: f64,
}

impl TailSummary {
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        // survival estimate (n − i)/(n + 1) at order statistic i, top decile
        let start = n - (n / 10).max(1);
        let mut k2 = Vec::new();
        let mut lp = Vec::new();
        for (i, &x) in sorted.iter().enumerate().skip(start) {
            if x > 0.0 {
                k2.push(x * x);
                lp.push(((n - i) as f64 / (n + 1) as f64).ln());
            }
        }
        let (slope, intercept, r2) = if k2.len() >= 2 {
            least_squares(&k2, &lp)
        } else {
            (0.0, 0.0, 0.0)
        };
        Self {
            n_samples: n,
            mean: mean(&sorted),
            median: quantile_sorted(&sorted, 0.5),
            q90: quantile_sorted(&sorted, 0.9),
            q99: quantile_sorted(&sorted, 0.99),
            max: sorted.last().copied().unwrap_or(0.0),
            tail_c: -slope,
            tail_intercept: intercept,
            tail_r_squared: r2,
        }
    }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_survival(lambda))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Randomized-data probe for one space-time norm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrichartzEntry {
    pub norm: NormSpec,
    pub admissible: bool,
    pub coarse: TailSummary,
    pub fine: Option<TailSummary>,
    /// `q90(fine)/q90(coarse) − 1`; zero when both quantiles vanish.
    pub q90_change: Option<f64>,
    /// Set when the upper decile moved by more than [`QUANTILE_DRIFT_LIMIT`].
    pub drift_flag: bool,
    /// The same norm of the unrandomized profile on the coarse grid.
    pub profile_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrichartzReport {
    pub entries: Vec<StrichartzEntry>,
    pub n_samples: usize,
    pub steps: usize,
    pub master_seed: u64,
}

/// Relative movement of the upper decile tolerated under grid refinement.
pub const QUANTILE_DRIFT_LIMIT: f64 = 0.10;

/// Quantiles of `‖S(t)u₀^ω‖_{L^q_T W^{s,r}}` for each norm, on the grid of
/// `u0` and optionally on a refined discretization of the same profile.
#[allow(clippy::too_many_arguments)]
pub fn verify_probabilistic_strichartz<R: ReplicaRunner>(
    runner: &R,
    u0: &SpectralField,
    refined: Option<&SpectralField>,
    spec: &RandomizationSpec,
    norms: &[NormSpec],
    steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> Result<StrichartzReport> {
    if norms.iter().any(|n| !(n.q.is_finite() && n.r.is_finite())) {
        return Err(Error::Hypothesis("q and r must be finite".into()));
    }
    let dim = u0.grid().dim();
    let mut entries = Vec::with_capacity(norms.len());
    for norm in norms {
        let coarse = TailSummary::from_samples(&randomized_norm_samples(
            runner,
            u0,
            spec,
            norm,
            steps,
            n_samples,
            master_seed,
        )?);
        let fine = match refined {
            Some(f) => Some(TailSummary::from_samples(&randomized_norm_samples(
                runner,
                f,
                spec,
                norm,
                steps,
                n_samples,
                master_seed,
            )?)),
            None => None,
        };
        let q90_change = fine.as_ref().map(|f| {
            if coarse.q90 == 0.0 {
                if f.q90 == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                f.q90 / coarse.q90 - 1.0
            }
        });
        entries.push(StrichartzEntry {
            norm: *norm,
            admissible: is_admissible(norm.q, norm.r, dim),
            drift_flag: q90_change.is_some_and(|c| c.abs() > QUANTILE_DRIFT_LIMIT),
            q90_change,
            profile_norm: linear_flow_norm(u0, norm, steps)?,
            coarse,
            fine,
        });
    }
    Ok(StrichartzReport {
        entries,
        n_samples,
        steps,
        master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn power_law_identity_and_constant() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let fit = fit_power_law(&xs, &xs).unwrap();
        assert!((fit.exponent_hat - 1.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
        assert!(fit.ci_95.0 <= fit.exponent_hat && fit.exponent_hat <= fit.ci_95.1);
        let ys = [3.0; 5];
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!(fit.exponent_hat.abs() < 1e-14);
    }

    #[test]
    fn power_law_noisy_synthetic() {
        let mut rng = SeedRecord::new(5, Purpose::Data, 0).rng();
        let xs: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x.powf(1.5) * (1.0 + 0.01 * z)
            })
            .collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.exponent_hat - 1.5).abs() < 0.05);
        assert!(fit.ci_95.0 < 1.5 && 1.5 < fit.ci_95.1);
    }

    #[test]
    fn power_law_errors() {
        assert!(matches!(
            fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::NotEnoughData { .. })
        ));
        assert!(matches!(
            fit_power_law(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 3.0, 4.0]),
            Err(Error::NonPositiveData(1))
        ));
    }

    #[test]
    fn moments_degenerate_cases() {
        let zeros = [0.0; 40];
        assert_eq!(lp_moment(&zeros, 2.0), 0.0);
        let c = [1.7; 40];
        for rho in [1.0, 2.0, 7.5] {
            assert!((lp_moment(&c, rho) - 1.7).abs() < 1e-14);
        }
    }

    #[test]
    fn moment_monotone_in_rho() {
        let mut rng = SeedRecord::new(1, Purpose::Data, 0).rng();
        let xs: Vec<f64> = (0..500)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.abs()
            })
            .collect();
        let mut prev = 0.0;
        for rho in [1.0, 1.5, 2.0, 3.0, 4.0, 8.0] {
            let m = lp_moment(&xs, rho);
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn stderr_shrinks_with_samples() {
        let mut rng = SeedRecord::new(2, Purpose::Data, 0).rng();
        let xs: Vec<f64> = (0..4000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.abs()
            })
            .collect();
        let boot = SeedRecord::new(2, Purpose::Bootstrap, 0);
        let small = moment_with_stderr(&xs[..1000], 2.0, boot);
        let large = moment_with_stderr(&xs, 2.0, boot);
        let ratio = large.stderr / small.stderr;
        assert!((0.35..=0.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn quantiles() {
        let xs = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert!((quantile(&xs, 0.9) - 4.6).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = SeedRecord::new(3, Purpose::Data, 0).rng();
        let mut draw = |shift: f64| -> Vec<f64> {
            (0..800)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z + shift
                })
                .collect()
        };
        let a = draw(0.0);
        let b = draw(0.0);
        let c = draw(0.5);
        assert!(ks_two_sample(&a, &b).1 > 0.01);
        assert!(ks_two_sample(&a, &c).1 < 1e-6);
    }

    #[test]
    fn gaussian_tail_fit() {
        let mut rng = SeedRecord::new(4, Purpose::Data, 0).rng();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.abs()
            })
            .collect();
        let t = TailSummary::from_samples(&xs);
        // log P(|Z| > κ) ≈ const − κ²/2 in the tail
        assert!(t.tail_c > 0.3 && t.tail_c < 0.7, "c = {}", t.tail_c);
        assert!(t.tail_r_squared > 0.95);
    }

    #[test]
    fn scaling_hypotheses() {
        use Exponent::{Finite, Infinity};
        assert!(check_scaling_hypotheses(2, Finite(8.0), Finite(4.0)).is_ok());
        assert!(check_scaling_hypotheses(2, Infinity, Finite(4.0)).is_err());
        assert!(check_scaling_hypotheses(2, Finite(8.0), Infinity).is_err());
        assert!(check_scaling_hypotheses(3, Finite(8.0), Finite(6.0)).is_ok());
        assert!(check_scaling_hypotheses(3, Finite(8.0), Finite(6.5)).is_err());
        assert!(check_scaling_hypotheses(1, Finite(8.0), Finite(1.5)).is_err());
    }

    #[test]
    fn strichartz_probe_of_zero_data() {
        use crate::randomization::CoefficientLaw;
        use crate::spectral::{GridSpec, Representation};
        let grid = GridSpec::new(2, 8.0, 16).unwrap();
        let zero = SpectralField::zeros(&grid, Representation::Physical);
        let spec = RandomizationSpec::new(CoefficientLaw::ComplexGaussian, 1.0).unwrap();
        let norm = NormSpec::new(0.0, Exponent::Finite(20.0), Exponent::Finite(20.0), 0.1).unwrap();
        let rep = verify_probabilistic_strichartz(
            &crate::replica::Sequential,
            &zero,
            Some(&zero),
            &spec,
            &[norm],
            4,
            30,
            1,
        )
        .unwrap();
        let e = &rep.entries[0];
        assert!(!e.admissible);
        assert_eq!((e.coarse.q90, e.coarse.max, e.profile_norm), (0.0, 0.0, 0.0));
        assert_eq!(e.q90_change, Some(0.0));
        assert!(!e.drift_flag);
        let infinite = NormSpec::new(0.0, Exponent::Infinity, Exponent::Finite(4.0), 0.1).unwrap();
        assert!(verify_probabilistic_strichartz(
            &crate::replica::Sequential,
            &zero,
            None,
            &spec,
            &[infinite],
            4,
            30,
            1
        )
        .is_err());
    }
}
