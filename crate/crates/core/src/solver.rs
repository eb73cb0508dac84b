//! The residual equation for `v = u − Ψ`,
//!
//! ```text
//! v(t) = Γv(t) := S(t)u₀ + ∫₀^t S(t−t')N(v + Ψ)(t') dt',   N(u) = i|u|^{p−1}u,
//! ```
//!
//! solved by Picard iteration on a uniform time grid, together with an
//! independent Strang split-step integrator used as an oracle and a bisection
//! probe for the local existence time of a sample path.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use num_complex::Complex64;
// float math comes from libm on targets without std
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::noise::{NestedPaths, NoisePath, SmoothingOperator};
use crate::propagator::{duhamel_integral, duhamel_with_step, evolve, StepPropagator};
use crate::replica::{Purpose, ReplicaRunner, SeedRecord};
use crate::spectral::{
    japanese_bracket_multiplier, lebesgue_norm_of_values, scaling_critical_regularity, time_norm,
    Exponent, GridSpec, Representation, SpectralField, TimeGrid, Trajectory,
};

/// Defocusing power nonlinearity `N(u) = i|u|^{p−1}u`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NonlinearitySpec {
    pub p: f64,
    /// When false, `N ≡ 0` and every solver reduces to the linear flow.
    pub enabled: bool,
}

impl NonlinearitySpec {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::param("p", format!("{p} must be a finite power ≥ 1")));
        }
        Ok(Self { p, enabled: true })
    }

    pub fn disabled(self) -> Self {
        Self {
            enabled: false,
            ..self
        }
    }

    pub fn is_odd_integer(&self) -> bool {
        self.p.fract() == 0.0 && (self.p as i64) % 2 == 1
    }

    /// `|z|^{p−1}`, using integer powers of `|z|²` for odd p.
    #[inline]
    fn modulus_power(&self, z: Complex64) -> f64 {
        let m2 = z.norm_sqr();
        if self.is_odd_integer() {
            m2.powi(((self.p as i64 - 1) / 2) as i32)
        } else if m2 == 0.0 {
            if self.p == 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            m2.powf((self.p - 1.0) / 2.0)
        }
    }

    #[inline]
    pub fn pointwise(&self, z: Complex64) -> Complex64 {
        if !self.enabled {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, self.modulus_power(z)) * z
    }
}

/// `1` on modes with every `|k_i| ≤ N/3`, `0` elsewhere.
pub fn dealias_mask(grid: &GridSpec) -> Vec<f64> {
    let cut = grid.n() as f64 / 3.0;
    let d = grid.dim();
    (0..grid.len())
        .map(|i| {
            let k = grid.wavenumbers(i);
            if k[..d].iter().all(|&ki| (ki.abs() as f64) <= cut) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// `N(u)` evaluated pointwise in physical space and returned in frequency
/// representation, optionally truncated by the 2/3 rule.
pub fn nonlinearity(u: &SpectralField, spec: &NonlinearitySpec, dealias: bool) -> SpectralField {
    let mask = if dealias { Some(dealias_mask(u.grid())) } else { None };
    nonlinearity_masked(u.to_physical(), spec, mask.as_deref())
}

fn nonlinearity_masked(
    mut phys: SpectralField,
    spec: &NonlinearitySpec,
    mask: Option<&[f64]>,
) -> SpectralField {
    if !spec.enabled {
        return SpectralField::zeros(phys.grid(), Representation::Frequency);
    }
    for z in phys.values_mut() {
        *z = spec.pointwise(*z);
    }
    let mut out = phys.into_frequency();
    if let Some(mask) = mask {
        for (v, m) in out.values_mut().iter_mut().zip(mask) {
            *v *= m;
        }
    }
    out
}

/// The three parameter regimes of the local theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Case {
    /// Energy-subcritical, `s₀ ≥ d/2 − d/(p+1)`; contraction in `C_T L^{p+1}`.
    Ia,
    /// Energy-subcritical, `s₀ > s_crit`; contraction in `L^q_T L^{p+1}`.
    Ib,
    /// Energy-(super)critical with odd p; contraction in `C_T W^{s₁,r}`.
    Ii,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Ia => "ia",
            Case::Ib => "ib",
            Case::Ii => "ii",
        })
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ia" | "i.a" => Ok(Case::Ia),
            "ib" | "i.b" => Ok(Case::Ib),
            "ii" => Ok(Case::Ii),
            other => Err(Error::param("case", format!("unknown case {other:?}"))),
        }
    }
}

/// `L^q_T W^{s₁,r}`, the space in which Picard updates are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorkingNorm {
    pub s1: f64,
    pub r: Exponent,
    pub q: Exponent,
}

impl WorkingNorm {
    /// `C_T L²`.
    pub fn mass() -> Self {
        Self {
            s1: 0.0,
            r: Exponent::Finite(2.0),
            q: Exponent::Infinity,
        }
    }
}

/// Parameters selecting one regime; `epsilon` and `delta` are the small
/// slack constants the theory leaves unspecified.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseParams {
    pub case: Case,
    pub dim: usize,
    pub p: f64,
    pub s0: f64,
    pub s: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl CaseParams {
    pub const DEFAULT_EPSILON: f64 = 0.05;
    pub const DEFAULT_DELTA: f64 = 0.1;

    pub fn new(case: Case, dim: usize, p: f64, s0: f64, s: f64) -> Self {
        Self {
            case,
            dim,
            p,
            s0,
            s,
            epsilon: Self::DEFAULT_EPSILON,
            delta: Self::DEFAULT_DELTA,
        }
    }

    /// Named bundles: (i.a) and (i.b) with `d = 2, p = 4`, (ii) with
    /// `d = 3, p = 5` and `s = s_crit − 1 + 0.1`.
    pub fn preset(case: Case) -> Self {
        match case {
            Case::Ia => Self::new(Case::Ia, 2, 4.0, 1.0, 0.0),
            Case::Ib => Self::new(Case::Ib, 2, 4.0, 1.0 / 3.0 + 0.1, 0.0),
            Case::Ii => Self::new(Case::Ii, 3, 5.0, 1.1, 0.1),
        }
    }

    /// `d/2 − 2/(p−1)`.
    pub fn s_crit(&self) -> Result<f64> {
        scaling_critical_regularity(self.dim, self.p, Exponent::Finite(2.0))
    }

    fn hypothesis(msg: String) -> Error {
        Error::Hypothesis(msg)
    }

    /// Checks the regime's hypotheses on `(d, p, s₀, s)`.
    pub fn check(&self) -> Result<()> {
        let d = self.dim as f64;
        let p = self.p;
        if !(1..=3).contains(&self.dim) {
            return Err(Error::param("d", format!("{} not in 1..=3", self.dim)));
        }
        let s_crit = self.s_crit()?;
        match self.case {
            Case::Ia | Case::Ib => {
                if !(p > 1.0 + 4.0 / d) {
                    return Err(Self::hypothesis(format!(
                        "mass-supercritical case needs p > 1 + 4/d = {}, got p = {p}",
                        1.0 + 4.0 / d
                    )));
                }
                if self.dim >= 3 && !(p < 1.0 + 4.0 / (d - 2.0)) {
                    return Err(Self::hypothesis(format!(
                        "energy-subcritical case needs p < 1 + 4/(d−2) = {}, got p = {p}",
                        1.0 + 4.0 / (d - 2.0)
                    )));
                }
                if self.case == Case::Ia {
                    let need = d / 2.0 - d / (p + 1.0);
                    if self.s0 < need {
                        return Err(Self::hypothesis(format!(
                            "case ia needs s0 ≥ d/2 − d/(p+1) = {need}, got s0 = {}",
                            self.s0
                        )));
                    }
                } else {
                    if !(self.s0 > s_crit) {
                        return Err(Self::hypothesis(format!(
                            "case ib needs s0 > s_crit = {s_crit}, got s0 = {}",
                            self.s0
                        )));
                    }
                    self.time_exponent_ib()?;
                }
            }
            Case::Ii => {
                if self.dim < 3 {
                    return Err(Self::hypothesis(format!(
                        "case ii needs d ≥ 3, got d = {}",
                        self.dim
                    )));
                }
                let nonlin = NonlinearitySpec::new(p)?;
                if !nonlin.is_odd_integer() || p < 1.0 + 4.0 / (d - 2.0) {
                    return Err(Self::hypothesis(format!(
                        "case ii needs an odd integer p ≥ 1 + 4/(d−2) = {}, got p = {p}",
                        1.0 + 4.0 / (d - 2.0)
                    )));
                }
                if !(self.s0 > s_crit) {
                    return Err(Self::hypothesis(format!(
                        "case ii needs s0 > s_crit = {s_crit}, got s0 = {}",
                        self.s0
                    )));
                }
                if !(self.s > s_crit - 1.0) {
                    return Err(Self::hypothesis(format!(
                        "case ii needs s > s_crit − 1 = {}, got s = {}",
                        s_crit - 1.0,
                        self.s
                    )));
                }
                let r = 2.0 * d / (d - 2.0) - self.delta;
                if !(self.delta > 0.0 && r >= 2.0) {
                    return Err(Error::param(
                        "delta",
                        format!("{} must be positive with r = {r} ≥ 2", self.delta),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The time exponent of case (i.b): `(p−1)/q = 1 − d/2 + d/(p+1) − ε`.
    fn time_exponent_ib(&self) -> Result<f64> {
        let d = self.dim as f64;
        let denom = 1.0 - d / 2.0 + d / (self.p + 1.0) - self.epsilon;
        if !(self.epsilon > 0.0 && denom > 0.0) {
            return Err(Error::param(
                "epsilon",
                format!("{} leaves no admissible time exponent", self.epsilon),
            ));
        }
        let q = (self.p - 1.0) / denom;
        if q < 2.0 {
            return Err(Error::param("epsilon", format!("time exponent q = {q} below 2")));
        }
        Ok(q)
    }

    pub fn working_norm(&self) -> Result<WorkingNorm> {
        self.check()?;
        let d = self.dim as f64;
        Ok(match self.case {
            Case::Ia => WorkingNorm {
                s1: 0.0,
                r: Exponent::Finite(self.p + 1.0),
                q: Exponent::Infinity,
            },
            Case::Ib => WorkingNorm {
                s1: 0.0,
                r: Exponent::Finite(self.p + 1.0),
                q: Exponent::Finite(self.time_exponent_ib()?),
            },
            Case::Ii => WorkingNorm {
                s1: (self.s0 - 1.0).min(self.s),
                r: Exponent::Finite(2.0 * d / (d - 2.0) - self.delta),
                q: Exponent::Infinity,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    pub horizon: f64,
    pub steps: usize,
    pub max_iters: usize,
    /// Relative fixed-point tolerance in the working norm.
    pub tol: f64,
    pub dealias: bool,
    pub nonlinearity: NonlinearitySpec,
    pub norm: WorkingNorm,
}

impl SolverConfig {
    pub const DEFAULT_MAX_ITERS: usize = 200;
    pub const DEFAULT_TOL: f64 = 1e-10;

    /// Defaults: 200 iterations, tolerance 1e-10, dealiasing for `p ≤ 5`.
    pub fn new(
        horizon: f64,
        steps: usize,
        nonlinearity: NonlinearitySpec,
        norm: WorkingNorm,
    ) -> Result<Self> {
        let cfg = Self {
            horizon,
            steps,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
            dealias: nonlinearity.p <= 5.0,
            nonlinearity,
            norm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn for_case(params: &CaseParams, horizon: f64, steps: usize) -> Result<Self> {
        let norm = params.working_norm()?;
        Self::new(horizon, steps, NonlinearitySpec::new(params.p)?, norm)
    }

    pub fn validate(&self) -> Result<()> {
        TimeGrid::new(self.horizon, self.steps)?;
        if self.steps < 2 {
            return Err(Error::param("M", format!("{} steps, need at least 2", self.steps)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", format!("{} must be positive", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        Ok(())
    }

    pub fn time(&self) -> TimeGrid {
        TimeGrid {
            horizon: self.horizon,
            steps: self.steps,
        }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self { horizon, ..*self }
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self { steps, ..*self }
    }
}

fn check_time(cfg: &SolverConfig, time: TimeGrid) -> Result<()> {
    if cfg.steps != time.steps || (cfg.horizon - time.horizon).abs() > 1e-12 * cfg.horizon {
        return Err(Error::GridMismatch(format!(
            "solver grid (T = {}, M = {}) differs from noise grid (T = {}, M = {})",
            cfg.horizon, cfg.steps, time.horizon, time.steps
        )));
    }
    Ok(())
}

/// Everything one Γ evaluation needs, computed once per solve.
struct Workspace<'a> {
    cfg: SolverConfig,
    grid: GridSpec,
    time: TimeGrid,
    step: StepPropagator,
    mask: Option<Vec<f64>>,
    linear: Vec<SpectralField>,
    psi: &'a [SpectralField],
}

impl<'a> Workspace<'a> {
    fn new(u0: &SpectralField, psi: &'a NoisePath, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = psi.grid().clone();
        grid.check_same(u0.grid())?;
        let time = psi.time();
        check_time(cfg, time)?;
        let step = StepPropagator::new(&grid, time.dt());
        let mut linear = Vec::with_capacity(time.len());
        let mut current = u0.to_frequency();
        for j in 0..time.len() {
            if j > 0 {
                step.apply_in_place(&mut current);
            }
            linear.push(current.clone());
        }
        let mask = if cfg.dealias { Some(dealias_mask(&grid)) } else { None };
        Ok(Self {
            cfg: *cfg,
            grid,
            time,
            step,
            mask,
            linear,
            psi: &psi.trajectory.slices,
        })
    }

    fn forcing(&self, v: &SpectralField, j: usize) -> SpectralField {
        if !self.cfg.nonlinearity.enabled {
            return SpectralField::zeros(&self.grid, Representation::Frequency);
        }
        let mut w = v.to_frequency();
        w.add_scaled(Complex64::new(1.0, 0.0), &self.psi[j])
            .expect("noise shares the grid");
        nonlinearity_masked(w.into_physical(), &self.cfg.nonlinearity, self.mask.as_deref())
    }

    fn gamma(&self, v: &[SpectralField]) -> Vec<SpectralField> {
        let integral = duhamel_with_step(
            &self.step,
            self.time,
            v.iter().enumerate().map(|(j, vj)| self.forcing(vj, j)),
        );
        let mut out = integral.slices;
        for (o, lin) in out.iter_mut().zip(&self.linear) {
            o.add_scaled(Complex64::new(1.0, 0.0), lin).expect("same grid");
        }
        out
    }

    /// `⟨∇⟩^{s₁} f` sampled in physical space.
    fn working_values(&self, f: &SpectralField) -> Vec<Complex64> {
        japanese_bracket_multiplier(f, self.cfg.norm.s1)
            .into_physical()
            .into_values()
    }

    fn time_norm_of<F: Fn(usize) -> f64>(&self, per_slice: F) -> f64 {
        let values: Vec<f64> = (0..self.time.len()).map(per_slice).collect();
        time_norm(self.time.dt(), &values, self.cfg.norm.q).expect("at least two slices")
    }

    fn norm(&self, w: &[Vec<Complex64>]) -> f64 {
        let weight = self.grid.cell_volume();
        self.time_norm_of(|j| lebesgue_norm_of_values(&w[j], weight, self.cfg.norm.r))
    }

    fn norm_diff(&self, a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
        let weight = self.grid.cell_volume();
        self.time_norm_of(|j| {
            let diff: Vec<Complex64> = a[j].iter().zip(&b[j]).map(|(x, y)| x - y).collect();
            lebesgue_norm_of_values(&diff, weight, self.cfg.norm.r)
        })
    }
}

/// `Γv` on the noise path's time grid.
pub fn gamma_map(
    v: &Trajectory,
    psi: &NoisePath,
    u0: &SpectralField,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    if v.time != psi.time() {
        return Err(Error::GridMismatch("v and Ψ use different time grids".into()));
    }
    v.grid().check_same(psi.grid())?;
    let ws = Workspace::new(u0, psi, cfg)?;
    Ok(Trajectory {
        time: ws.time,
        slices: ws.gamma(&v.slices),
    })
}

/// Output of a converged Picard iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub v: Trajectory,
    pub iterations: usize,
    /// `‖v^{k+1} − v^k‖ / ‖v^k − v^{k−1}‖` for `k = 1, 2, …`.
    pub contraction_history: Vec<f64>,
    /// `‖v^k − v^{k−1}‖` per iteration, in the working norm.
    pub updates: Vec<f64>,
    /// Working norm of the returned iterate.
    pub v_norm: f64,
}

impl PicardSolution {
    /// `u = v + Ψ`.
    pub fn solution(&self, psi: &NoisePath) -> Result<Trajectory> {
        self.v.add(&psi.trajectory)
    }
}

/// Consecutive non-contracting iterations tolerated before giving up.
const NON_CONTRACTION_LIMIT: usize = 3;

/// Iterates `v ← Γv` from `v⁰ = 0` until the relative update in the working
/// norm drops below `cfg.tol`.
pub fn picard_solve(u0: &SpectralField, psi: &NoisePath, cfg: &SolverConfig) -> Result<PicardSolution> {
    let ws = Workspace::new(u0, psi, cfg)?;
    let zeros = SpectralField::zeros(&ws.grid, Representation::Frequency);
    let mut v = vec![zeros; ws.time.len()];
    let mut v_w = vec![vec![Complex64::new(0.0, 0.0); ws.grid.len()]; ws.time.len()];
    let mut history = Vec::new();
    let mut updates = Vec::new();
    let mut streak = 0;
    let mut last_ratio = f64::NAN;
    for k in 1..=cfg.max_iters {
        let next = ws.gamma(&v);
        if !next.iter().all(SpectralField::is_finite) {
            return Err(Error::ExistenceHorizonExceeded {
                iterations: k,
                last_ratio: f64::INFINITY,
            });
        }
        let next_w: Vec<Vec<Complex64>> = next.iter().map(|f| ws.working_values(f)).collect();
        let update = ws.norm_diff(&next_w, &v_w);
        let size = ws.norm(&next_w);
        if let Some(&prev) = updates.last() {
            let ratio = if prev == 0.0 { 0.0 } else { update / prev };
            history.push(ratio);
            last_ratio = ratio;
            streak = if ratio >= 1.0 { streak + 1 } else { 0 };
            if streak >= NON_CONTRACTION_LIMIT {
                return Err(Error::ExistenceHorizonExceeded {
                    iterations: k,
                    last_ratio,
                });
            }
        }
        updates.push(update);
        v = next;
        v_w = next_w;
        if update <= cfg.tol * size {
            return Ok(PicardSolution {
                v: Trajectory {
                    time: ws.time,
                    slices: v,
                },
                iterations: k,
                contraction_history: history,
                updates,
                v_norm: size,
            });
        }
        if !(size.is_finite() && update.is_finite()) {
            return Err(Error::ExistenceHorizonExceeded {
                iterations: k,
                last_ratio: f64::INFINITY,
            });
        }
    }
    Err(Error::ExistenceHorizonExceeded {
        iterations: cfg.max_iters,
        last_ratio,
    })
}

/// `‖Γv¹ − Γv⁰‖ / ‖v¹ − v⁰‖` with `v⁰ = 0`, `v¹ = Γ0`: the contraction
/// factor of the first Picard step. Zero when `Γ0 = 0`.
pub fn first_contraction_ratio(u0: &SpectralField, psi: &NoisePath, cfg: &SolverConfig) -> Result<f64> {
    let ws = Workspace::new(u0, psi, cfg)?;
    let zeros = vec![SpectralField::zeros(&ws.grid, Representation::Frequency); ws.time.len()];
    let v1 = ws.gamma(&zeros);
    let v2 = ws.gamma(&v1);
    let w1: Vec<_> = v1.iter().map(|f| ws.working_values(f)).collect();
    let w2: Vec<_> = v2.iter().map(|f| ws.working_values(f)).collect();
    let first = ws.norm(&w1);
    if first == 0.0 {
        return Ok(0.0);
    }
    Ok(ws.norm_diff(&w2, &w1) / first)
}

/// `‖Γv₁ − Γv₂‖ / ‖v₁ − v₂‖` in the working norm.
pub fn difference_ratio(
    v1: &Trajectory,
    v2: &Trajectory,
    psi: &NoisePath,
    u0: &SpectralField,
    cfg: &SolverConfig,
) -> Result<f64> {
    if v1.time != psi.time() || v2.time != psi.time() {
        return Err(Error::GridMismatch("v and Ψ use different time grids".into()));
    }
    let ws = Workspace::new(u0, psi, cfg)?;
    let g1: Vec<_> = ws.gamma(&v1.slices).iter().map(|f| ws.working_values(f)).collect();
    let g2: Vec<_> = ws.gamma(&v2.slices).iter().map(|f| ws.working_values(f)).collect();
    let a: Vec<_> = v1.slices.iter().map(|f| ws.working_values(f)).collect();
    let b: Vec<_> = v2.slices.iter().map(|f| ws.working_values(f)).collect();
    let denom = ws.norm_diff(&a, &b);
    if denom == 0.0 {
        return Err(Error::Degenerate("v₁ = v₂".into()));
    }
    Ok(ws.norm_diff(&g1, &g2) / denom)
}

/// Per-time L² residual of the mild equation,
/// `‖u(t) − S(t)u₀ − ∫₀^t S(t−t')N(u)dt' − Ψ(t)‖`, with the integral by
/// the trapezoid rule on the stored slices.
pub fn mild_residual(
    u: &Trajectory,
    u0: &SpectralField,
    psi: &NoisePath,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if u.time != psi.time() {
        return Err(Error::GridMismatch("u and Ψ use different time grids".into()));
    }
    let mask = if cfg.dealias { Some(dealias_mask(u.grid())) } else { None };
    let forcing = Trajectory {
        time: u.time,
        slices: u
            .slices
            .iter()
            .map(|f| nonlinearity_masked(f.to_physical(), &cfg.nonlinearity, mask.as_deref()))
            .collect(),
    };
    u.time
        .times()
        .enumerate()
        .map(|(j, t)| {
            let mut r = u.slices[j].to_frequency();
            r.add_scaled(Complex64::new(-1.0, 0.0), &evolve(u0, t))?;
            r.add_scaled(Complex64::new(-1.0, 0.0), &duhamel_integral(&forcing, t)?)?;
            r.add_scaled(Complex64::new(-1.0, 0.0), &psi.trajectory.slices[j])?;
            Ok(r.l2_norm())
        })
        .collect()
}

fn nonlinear_phase(u: &mut SpectralField, spec: &NonlinearitySpec, tau: f64) {
    if !spec.enabled {
        return;
    }
    for z in u.values_mut() {
        let phase = tau * spec.modulus_power(*z);
        *z *= Complex64::from_polar(1.0, phase);
    }
}

/// Strang splitting: half nonlinear phase, full linear step, half nonlinear
/// phase, then the exact noise increment `Ψ(t_{j+1}) − S(dt)Ψ(t_j)`.
///
/// The nonlinear substep is the exact flow `u·e^{iτ|u|^{p−1}}` and is not
/// dealiased. Slices are returned in frequency representation.
pub fn splitstep_solve(
    u0: &SpectralField,
    noise: Option<&NoisePath>,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let time = cfg.time();
    if let Some(psi) = noise {
        psi.grid().check_same(u0.grid())?;
        check_time(cfg, psi.time())?;
    }
    let dt = time.dt();
    let step = StepPropagator::new(u0.grid(), dt);
    let spec = cfg.nonlinearity;
    let mut u = u0.to_physical();
    let mut slices = Vec::with_capacity(time.len());
    slices.push(u.to_frequency());
    for j in 0..time.steps {
        nonlinear_phase(&mut u, &spec, 0.5 * dt);
        let mut f = u.into_frequency();
        step.apply_in_place(&mut f);
        u = f.into_physical();
        nonlinear_phase(&mut u, &spec, 0.5 * dt);
        if let Some(psi) = noise {
            u.add_scaled(Complex64::new(1.0, 0.0), &psi.increment(&step, j))?;
        }
        slices.push(u.to_frequency());
    }
    Trajectory::new(time, slices)
}

/// One Picard attempt of the existence probe.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeAttempt {
    pub horizon: f64,
    pub converged: bool,
    pub iterations: usize,
    pub last_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExistenceEstimate {
    /// Largest ladder horizon on which Picard converged; 0 if none did.
    pub t_est: f64,
    pub rung: Option<usize>,
    pub attempts: Vec<ProbeAttempt>,
    pub seed: SeedRecord,
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() || !(ladder[0] > 0.0) {
        return Err(Error::param("ladder", "needs at least one positive horizon"));
    }
    if ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("ladder", "horizons must increase"));
    }
    Ok(())
}

/// Bisection over `ladder` for the largest horizon on which Picard converges
/// for one sample path of Ψ.
///
/// Every rung uses `cfg.steps` uniform steps; all rungs are restrictions of
/// one path sampled at the union of their grid times. `cfg.horizon` is
/// ignored.
pub fn local_existence_probe(
    u0: &SpectralField,
    phi: &SmoothingOperator,
    cfg: &SolverConfig,
    ladder: &[f64],
    seed: SeedRecord,
) -> Result<ExistenceEstimate> {
    check_ladder(ladder)?;
    phi.grid().check_same(u0.grid())?;
    let paths = NestedPaths::sample(phi, ladder, cfg.steps, seed)?;
    let mut attempts = Vec::new();
    let mut attempt = |rung: usize| -> Result<bool> {
        let horizon = ladder[rung];
        let psi = paths.path(horizon)?;
        let rung_cfg = cfg.with_horizon(horizon);
        let outcome = match picard_solve(u0, &psi, &rung_cfg) {
            Ok(sol) => ProbeAttempt {
                horizon,
                converged: true,
                iterations: sol.iterations,
                last_ratio: sol.contraction_history.last().copied().unwrap_or(0.0),
            },
            Err(Error::ExistenceHorizonExceeded {
                iterations,
                last_ratio,
            }) => ProbeAttempt {
                horizon,
                converged: false,
                iterations,
                last_ratio,
            },
            Err(e) => return Err(e),
        };
        attempts.push(outcome);
        Ok(outcome.converged)
    };
    if !attempt(0)? {
        return Ok(ExistenceEstimate {
            t_est: 0.0,
            rung: None,
            attempts,
            seed,
        });
    }
    let (mut lo, mut hi) = (0, ladder.len());
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if attempt(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ExistenceEstimate {
        t_est: ladder[lo],
        rung: Some(lo),
        attempts,
        seed,
    })
}

/// Runs [`local_existence_probe`] on `n_paths` independent noise replicas.
pub fn existence_distribution<R: ReplicaRunner>(
    runner: &R,
    u0: &SpectralField,
    phi: &SmoothingOperator,
    cfg: &SolverConfig,
    ladder: &[f64],
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<ExistenceEstimate>> {
    check_ladder(ladder)?;
    let base = SeedRecord::new(master_seed, Purpose::Noise, 0);
    runner
        .map(n_paths, |i| {
            local_existence_probe(u0, phi, cfg, ladder, base.with_replica(i))
        })
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sample_convolution;

    fn gaussian(grid: &GridSpec, sigma: f64, amp: f64) -> SpectralField {
        let c = grid.center();
        let d = grid.dim();
        SpectralField::from_fn(grid, |x| {
            let r2: f64 = (0..d).map(|i| (x[i] - c[i]).powi(2)).sum();
            Complex64::new(amp * (-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
        })
    }

    fn zero_path(grid: &GridSpec, time: TimeGrid) -> NoisePath {
        NoisePath {
            trajectory: Trajectory::zeros(grid, time),
            seed: SeedRecord::new(0, Purpose::Noise, 0),
        }
    }

    fn cubic_cfg(horizon: f64, steps: usize) -> SolverConfig {
        let mut cfg =
            SolverConfig::new(horizon, steps, NonlinearitySpec::new(3.0).unwrap(), WorkingNorm::mass())
                .unwrap();
        cfg.tol = 1e-13;
        cfg
    }

    #[test]
    fn nonlinearity_trivial_cases() {
        let grid = GridSpec::new(1, 10.0, 32).unwrap();
        let spec = NonlinearitySpec::new(3.0).unwrap();
        let zero = SpectralField::zeros(&grid, Representation::Physical);
        assert_eq!(nonlinearity(&zero, &spec, true).l2_norm(), 0.0);
        let c = Complex64::new(0.3, -0.7);
        let constant = SpectralField::from_fn(&grid, |_| c);
        let out = nonlinearity(&constant, &spec, false).into_physical();
        let expect = Complex64::new(0.0, c.norm_sqr()) * c;
        for v in out.values() {
            assert!((v - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn cubic_matches_product_form() {
        let grid = GridSpec::new(2, 6.0, 16).unwrap();
        let u = SpectralField::from_fn(&grid, |x| Complex64::new(x[0].sin(), x[1].cos() * 0.5));
        let spec = NonlinearitySpec::new(3.0).unwrap();
        let fast = nonlinearity(&u, &spec, false).into_physical();
        for (a, z) in fast.values().iter().zip(u.values()) {
            let product = Complex64::i() * z * z * z.conj();
            assert!((a - product).norm() <= 1e-12);
        }
    }

    #[test]
    fn general_power_matches_powf() {
        let spec = NonlinearitySpec::new(2.5).unwrap();
        let z = Complex64::new(0.4, 1.1);
        let expect = Complex64::i() * z * z.norm().powf(1.5);
        assert!((spec.pointwise(z) - expect).norm() < 1e-14);
        assert_eq!(spec.pointwise(Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn dealias_keeps_low_third() {
        let grid = GridSpec::new(1, 1.0, 16).unwrap();
        let kept: Vec<i64> = dealias_mask(&grid)
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == 1.0)
            .map(|(i, _)| grid.wavenumbers(i)[0])
            .collect();
        assert_eq!(kept.len(), 11);
        assert!(kept.iter().all(|k| k.abs() <= 5));
    }

    #[test]
    fn gamma_without_nonlinearity_is_linear_flow() {
        let grid = GridSpec::new(1, 20.0, 64).unwrap();
        let u0 = gaussian(&grid, 1.0, 1.0);
        let cfg = cubic_cfg(0.5, 8);
        let mut linear = cfg;
        linear.nonlinearity = linear.nonlinearity.disabled();
        let psi = zero_path(&grid, cfg.time());
        let v = Trajectory::zeros(&grid, cfg.time());
        let out = gamma_map(&v, &psi, &u0, &linear).unwrap();
        for (j, t) in cfg.time().times().enumerate() {
            assert!(out.slices[j].sub(&evolve(&u0, t)).unwrap().l2_norm() < 1e-13);
        }
        let zero = SpectralField::zeros(&grid, Representation::Frequency);
        let out = gamma_map(&v, &psi, &zero, &cfg).unwrap();
        assert!(out.slices.iter().all(|f| f.l2_norm() == 0.0));
    }

    #[test]
    fn gamma_rejects_mismatched_grids() {
        let grid = GridSpec::new(1, 20.0, 64).unwrap();
        let cfg = cubic_cfg(0.5, 8);
        let psi = zero_path(&grid, cfg.time());
        let v = Trajectory::zeros(&grid, TimeGrid::new(0.5, 4).unwrap());
        let u0 = gaussian(&grid, 1.0, 1.0);
        assert!(matches!(gamma_map(&v, &psi, &u0, &cfg), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn trivial_problem_converges_at_once() {
        let grid = GridSpec::new(2, 8.0, 16).unwrap();
        let cfg = cubic_cfg(0.1, 4);
        let psi = zero_path(&grid, cfg.time());
        let zero = SpectralField::zeros(&grid, Representation::Frequency);
        let sol = picard_solve(&zero, &psi, &cfg).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.v.slices.iter().all(|f| f.l2_norm() == 0.0));
    }

    #[test]
    fn picard_fixed_point_and_contraction() {
        let grid = GridSpec::new(1, 40.0, 128).unwrap();
        let u0 = gaussian(&grid, 1.0, 0.5);
        let cfg = cubic_cfg(0.2, 32);
        let psi = zero_path(&grid, cfg.time());
        let sol = picard_solve(&u0, &psi, &cfg).unwrap();
        assert!(sol.iterations > 2);
        assert!(sol.contraction_history.iter().all(|&r| r < 0.5));
        let again = gamma_map(&sol.v, &psi, &u0, &cfg).unwrap();
        let defect = again.sub(&sol.v).unwrap();
        let worst = defect.slices.iter().map(|f| f.l2_norm()).fold(0.0, f64::max);
        assert!(worst < 1e-11, "{worst}");
    }

    #[test]
    fn large_data_signals_horizon() {
        let grid = GridSpec::new(1, 40.0, 128).unwrap();
        let u0 = gaussian(&grid, 1.0, 6.0);
        let cfg = cubic_cfg(2.0, 16);
        let psi = zero_path(&grid, cfg.time());
        match picard_solve(&u0, &psi, &cfg) {
            Err(Error::ExistenceHorizonExceeded { .. }) => {}
            other => panic!("expected a horizon signal, got {other:?}"),
        }
    }

    #[test]
    fn splitstep_conserves_mass_and_reduces_to_linear_flow() {
        let grid = GridSpec::new(1, 40.0, 256).unwrap();
        let u0 = gaussian(&grid, 1.0, 1.0);
        let cfg = cubic_cfg(1.0, 1000);
        let out = splitstep_solve(&u0, None, &cfg).unwrap();
        let m0 = u0.l2_norm();
        let drift = out
            .slices
            .iter()
            .map(|f| (f.l2_norm() - m0).abs() / m0)
            .fold(0.0, f64::max);
        assert!(drift <= 1e-10, "{drift}");

        let mut linear = cfg.with_steps(50);
        linear.nonlinearity = linear.nonlinearity.disabled();
        let out = splitstep_solve(&u0, None, &linear).unwrap();
        let err = out.last().sub(&evolve(&u0, 1.0)).unwrap().l2_norm();
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn splitstep_is_second_order() {
        let grid = GridSpec::new(1, 40.0, 256).unwrap();
        let u0 = gaussian(&grid, 1.0, 1.0);
        let run = |m| splitstep_solve(&u0, None, &cubic_cfg(0.5, m)).unwrap().last().clone();
        let reference = run(1024);
        let e1 = run(32).sub(&reference).unwrap().l2_norm();
        let e2 = run(64).sub(&reference).unwrap().l2_norm();
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn splitstep_replays_the_noise_path() {
        let grid = GridSpec::new(1, 20.0, 64).unwrap();
        let phi = SmoothingOperator::cutoff(&grid, 1.0).unwrap();
        let mut cfg = cubic_cfg(0.4, 40);
        cfg.nonlinearity = cfg.nonlinearity.disabled();
        let psi = sample_convolution(&phi, cfg.time(), SeedRecord::new(3, Purpose::Noise, 0));
        let zero = SpectralField::zeros(&grid, Representation::Frequency);
        let out = splitstep_solve(&zero, Some(&psi), &cfg).unwrap();
        for (a, b) in out.slices.iter().zip(&psi.trajectory.slices) {
            assert!(a.sub(b).unwrap().l2_norm() < 1e-12);
        }
    }

    #[test]
    fn picard_agrees_with_splitstep() {
        let grid = GridSpec::new(1, 40.0, 256).unwrap();
        let u0 = gaussian(&grid, 1.0, 0.5);
        let cfg = cubic_cfg(0.2, 128);
        let psi = zero_path(&grid, cfg.time());
        let picard = picard_solve(&u0, &psi, &cfg).unwrap();
        let split = splitstep_solve(&u0, None, &cfg).unwrap();
        let rel = picard.v.last().sub(split.last()).unwrap().l2_norm() / split.last().l2_norm();
        assert!(rel < 1e-4, "{rel}");
        let residual = mild_residual(&picard.v, &u0, &psi, &cfg).unwrap();
        assert!(residual.iter().all(|&r| r < 1e-10));
    }

    #[test]
    fn case_hypotheses() {
        assert!(CaseParams::preset(Case::Ia).check().is_ok());
        assert!(CaseParams::preset(Case::Ib).check().is_ok());
        assert!(CaseParams::preset(Case::Ii).check().is_ok());
        let mass_critical = CaseParams::new(Case::Ia, 2, 3.0, 1.0, 0.0);
        assert!(matches!(mass_critical.check(), Err(Error::Hypothesis(_))));
        let even = CaseParams::new(Case::Ii, 3, 6.0, 2.0, 1.0);
        assert!(matches!(even.check(), Err(Error::Hypothesis(_))));
        let rough = CaseParams::new(Case::Ii, 3, 5.0, 1.1, -0.05);
        assert!(matches!(rough.check(), Err(Error::Hypothesis(_))));
        let low = CaseParams::new(Case::Ib, 2, 4.0, 0.3, 0.0);
        assert!(matches!(low.check(), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn working_norms() {
        let ia = CaseParams::preset(Case::Ia).working_norm().unwrap();
        assert_eq!(ia.r, Exponent::Finite(5.0));
        assert_eq!(ia.q, Exponent::Infinity);
        let ib = CaseParams::preset(Case::Ib).working_norm().unwrap();
        // (p−1)/q = 1 − 1 + 2/5 − 0.05
        assert!((ib.q.value() - 3.0 / 0.35).abs() < 1e-12);
        let ii = CaseParams::preset(Case::Ii).working_norm().unwrap();
        assert!((ii.s1 - 0.1).abs() < 1e-15);
        assert!((ii.r.value() - 5.9).abs() < 1e-12);
        assert_eq!("ii".parse::<Case>().unwrap(), Case::Ii);
    }

    #[test]
    fn probe_without_data_reaches_ladder_top() {
        let grid = GridSpec::new(1, 10.0, 32).unwrap();
        let zero = SpectralField::zeros(&grid, Representation::Frequency);
        let phi = SmoothingOperator::zero(&grid);
        let cfg = cubic_cfg(1.0, 8);
        let ladder = [0.1, 0.2, 0.4, 0.8];
        let est =
            local_existence_probe(&zero, &phi, &cfg, &ladder, SeedRecord::new(1, Purpose::Noise, 0))
                .unwrap();
        assert_eq!(est.t_est, 0.8);
        assert_eq!(est.rung, Some(3));
    }
}
