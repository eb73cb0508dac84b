//! Subcommand implementations. Each takes a configuration, fills in its
//! defaults, computes, writes artifacts into a run directory and returns a
//! few human-readable summary lines.

use std::path::Path;

use serde::Serialize;
use snls_core::estimators::{
    fit_power_law_seeded, verify_convolution_scaling, verify_probabilistic_strichartz, ScalingParams,
    TailSummary,
};
use snls_core::noise::{sample_convolution, NestedPaths, PhiFamily};
use snls_core::propagator::dispersive_decay_fit;
use snls_core::randomization::{
    expected_sobolev_square, wiener_randomize, CoefficientLaw, RandomizationSpec,
};
use snls_core::replica::{Purpose, SeedRecord};
use snls_core::solver::{
    existence_distribution, first_contraction_ratio, picard_solve, Case, CaseParams, SolverConfig,
};
use snls_core::spectral::{sobolev_norm, Exponent, GridSpec, NormSpec, TimeGrid};

use crate::artifacts::{read_manifest, verify_manifest, RunDir, MANIFEST};
use crate::config::{Config, Real};
use crate::error::{LabError, LabResult};
use crate::fieldio::{encode, field_csv};
use crate::presets::{self, real_or};
use crate::runner::Pool;
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SampleNoise,
    Randomize,
    Solve,
    ProbeExistence,
    VerifyDispersive,
    VerifyScaling,
    VerifyPstrichartz,
    VerifyContraction,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SampleNoise => "sample-noise",
            Command::Randomize => "randomize",
            Command::Solve => "solve",
            Command::ProbeExistence => "probe-existence",
            Command::VerifyDispersive => "verify-dispersive",
            Command::VerifyScaling => "verify-lemma21",
            Command::VerifyPstrichartz => "verify-pstrichartz",
            Command::VerifyContraction => "verify-contraction",
        }
    }

    /// Commands that draw random numbers and therefore need a seed.
    pub fn samples(self) -> bool {
        !matches!(self, Command::VerifyDispersive)
    }
}

pub fn run(cmd: Command, cfg: Config, pool: &Pool, out: &Path) -> LabResult<Vec<String>> {
    let mut cfg = cfg;
    let seed = if cmd.samples() {
        Some(cfg.run.seed.ok_or_else(|| {
            LabError::config("run.seed", format!("--seed is required for {}", cmd.name()))
        })?)
    } else {
        cfg.run.seed
    };
    let mut dir = RunDir::create(out)?;
    let result = match cmd {
        Command::SampleNoise => sample_noise(&mut cfg, seed.unwrap_or(0), &mut dir),
        Command::Randomize => randomize(&mut cfg, seed.unwrap_or(0), &mut dir),
        Command::Solve => solve(&mut cfg, seed.unwrap_or(0), &mut dir),
        Command::ProbeExistence => probe_existence(&mut cfg, seed.unwrap_or(0), pool, &mut dir),
        Command::VerifyDispersive => verify_dispersive(&mut cfg, pool, &mut dir),
        Command::VerifyScaling => scaling(&mut cfg, seed.unwrap_or(0), pool, &mut dir),
        Command::VerifyPstrichartz => pstrichartz(&mut cfg, seed.unwrap_or(0), pool, &mut dir),
        Command::VerifyContraction => contraction(&mut cfg, seed.unwrap_or(0), &mut dir),
    };
    // the manifest is written even when the computation signals failure, so
    // the directory always documents what was attempted
    let resolved = serde_json::to_value(&cfg).expect("configuration serializes");
    dir.finish(cmd.name(), seed, resolved)?;
    result
}

fn time_grid(cfg: &mut Config, horizon: f64, steps: usize) -> LabResult<TimeGrid> {
    let t = real_or(&mut cfg.time.horizon, horizon);
    let m = *cfg.time.steps.get_or_insert(steps);
    TimeGrid::new(t, m).map_err(|e| LabError::config("time", e.to_string()))
}

fn norm_exponent(slot: &mut Option<Real>, default: f64, key: &str) -> LabResult<Exponent> {
    slot.get_or_insert(Real(default)).exponent(key)
}

/// `t_min · (t_max/t_min)^{i/(n−1)}`, or the explicit `ladder.horizons`.
fn ladder(cfg: &mut Config, t_min: f64, t_max: f64, points: usize) -> LabResult<Vec<f64>> {
    if let Some(h) = &cfg.ladder.horizons {
        let hs: Vec<f64> = h.iter().map(|r| r.0).collect();
        if hs.is_empty() || hs.iter().any(|t| !(*t > 0.0)) {
            return Err(LabError::config("ladder.horizons", "horizons must be positive"));
        }
        return Ok(hs);
    }
    let lo = real_or(&mut cfg.ladder.t_min, t_min);
    let hi = real_or(&mut cfg.ladder.t_max, t_max);
    let n = *cfg.ladder.points.get_or_insert(points);
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(LabError::config(
            "ladder",
            format!("need 0 < t_min < t_max and at least 2 points, got {lo}, {hi}, {n}"),
        ));
    }
    Ok((0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect())
}

fn case_params(cfg: &mut Config, default: Case) -> LabResult<CaseParams> {
    let case = match &cfg.solver.case {
        Some(c) => c
            .parse::<Case>()
            .map_err(|e| LabError::config("solver.case", e.to_string()))?,
        None => default,
    };
    cfg.solver.case = Some(case.to_string());
    let preset = CaseParams::preset(case);
    let dim = *cfg.grid.d.get_or_insert(preset.dim);
    let mut params = CaseParams::new(
        case,
        dim,
        real_or(&mut cfg.solver.p, preset.p),
        real_or(&mut cfg.solver.s0, preset.s0),
        real_or(&mut cfg.solver.s, preset.s),
    );
    params.epsilon = real_or(&mut cfg.solver.epsilon, CaseParams::DEFAULT_EPSILON);
    params.delta = real_or(&mut cfg.solver.delta, CaseParams::DEFAULT_DELTA);
    Ok(params)
}

fn solver_config(cfg: &mut Config, params: &CaseParams, time: TimeGrid) -> LabResult<SolverConfig> {
    let mut sc = SolverConfig::for_case(params, time.horizon, time.steps)?;
    sc.tol = real_or(&mut cfg.solver.tol, SolverConfig::DEFAULT_TOL);
    sc.max_iters = *cfg.solver.max_iters.get_or_insert(SolverConfig::DEFAULT_MAX_ITERS);
    sc.dealias = *cfg.solver.dealias.get_or_insert(sc.dealias);
    sc.validate().map_err(|e| LabError::config("solver", e.to_string()))?;
    Ok(sc)
}

#[derive(Serialize)]
struct GridInfo {
    d: usize,
    n: usize,
    length: f64,
}

impl From<&GridSpec> for GridInfo {
    fn from(g: &GridSpec) -> Self {
        Self {
            d: g.dim(),
            n: g.n(),
            length: g.length(),
        }
    }
}

#[derive(Serialize)]
struct NoiseManifest {
    grid: GridInfo,
    horizon: f64,
    steps: usize,
    phi_label: String,
    phi: PhiFamily,
    phi_scale: f64,
    master_seed: u64,
    replica: u64,
    records: Vec<String>,
}

#[derive(Serialize)]
struct NoiseNormRow {
    t: f64,
    l2: f64,
    h_s: f64,
}

fn sample_noise(cfg: &mut Config, seed: u64, dir: &mut RunDir) -> LabResult<Vec<String>> {
    let grid = presets::grid(cfg, 1, None)?;
    let phi = presets::phi(cfg, &grid, "cutoff")?;
    let s = real_or(&mut cfg.norm.s, 0.0);
    let time = time_grid(cfg, 1.0, 16)?;
    let replica = *cfg.run.replica.get_or_insert(0);
    let path = sample_convolution(&phi, time, SeedRecord::new(seed, Purpose::Noise, replica));
    let mut records = Vec::with_capacity(time.len());
    let mut rows = Vec::with_capacity(time.len());
    for (j, slice) in path.trajectory.slices.iter().enumerate() {
        let rel = format!("fields/psi_{j:05}.bin");
        dir.write_bytes(&rel, &encode(slice))?;
        records.push(rel);
        rows.push(NoiseNormRow {
            t: time.time(j),
            l2: slice.l2_norm(),
            h_s: sobolev_norm(slice, s, Exponent::Finite(2.0)),
        });
    }
    dir.write_csv("norms.csv", &rows)?;
    dir.write_json(
        "noise.json",
        &NoiseManifest {
            grid: (&grid).into(),
            horizon: time.horizon,
            steps: time.steps,
            phi_label: phi.label(),
            phi: phi.family().clone(),
            phi_scale: phi.scale(),
            master_seed: seed,
            replica,
            records,
        },
    )?;
    let last = rows.last().expect("at least two slices");
    Ok(vec![
        format!("sampled Ψ for φ = {} on {} time points", phi.label(), time.len()),
        format!(
            "‖Ψ(T)‖²_H^{s} = {:.6e}, T‖φ‖²_HS = {:.6e}",
            last.h_s * last.h_s,
            time.horizon * phi.hs_norm(s).powi(2)
        ),
    ])
}

fn randomization_spec(cfg: &mut Config) -> LabResult<RandomizationSpec> {
    let law = match cfg.randomize.law.get_or_insert_with(|| "gaussian".into()).as_str() {
        "gaussian" => CoefficientLaw::ComplexGaussian,
        "bernoulli" => CoefficientLaw::Bernoulli,
        other => {
            return Err(LabError::config(
                "randomize.law",
                format!("unknown law {other:?}; expected gaussian or bernoulli"),
            ))
        }
    };
    let variance = real_or(&mut cfg.randomize.variance, 1.0);
    RandomizationSpec::new(law, variance).map_err(|e| LabError::config("randomize.variance", e.to_string()))
}

#[derive(Serialize)]
struct RandomizeSummary {
    grid: GridInfo,
    seed: SeedRecord,
    n_coefficients: usize,
    s: f64,
    profile_h_s: f64,
    randomized_h_s: f64,
    expected_h_s_square: f64,
}

fn randomize(cfg: &mut Config, seed: u64, dir: &mut RunDir) -> LabResult<Vec<String>> {
    let grid = presets::grid(cfg, 2, None)?;
    let u0 = presets::u0(cfg, &grid, "rough")?;
    let spec = randomization_spec(cfg)?;
    let s = real_or(&mut cfg.norm.s, 0.0);
    let replica = *cfg.run.replica.get_or_insert(0);
    let r = wiener_randomize(&u0, &spec, SeedRecord::new(seed, Purpose::Randomization, replica))?;
    dir.write_bytes("u0.bin", &encode(&u0))?;
    dir.write_bytes("u0_omega.bin", &encode(&r.field))?;
    dir.write_bytes("u0_omega.csv", &field_csv(&r.field)?)?;
    let summary = RandomizeSummary {
        grid: (&grid).into(),
        seed: r.seed,
        n_coefficients: r.n_coefficients,
        s,
        profile_h_s: sobolev_norm(&u0, s, Exponent::Finite(2.0)),
        randomized_h_s: sobolev_norm(&r.field, s, Exponent::Finite(2.0)),
        expected_h_s_square: expected_sobolev_square(&u0, &spec, s),
    };
    dir.write_json("randomize.json", &summary)?;
    Ok(vec![format!(
        "randomized over {} cubes: ‖u0^ω‖_H^{s} = {:.6e} (E‖u0^ω‖² = {:.6e})",
        summary.n_coefficients, summary.randomized_h_s, summary.expected_h_s_square
    )])
}

#[derive(Serialize)]
struct SolveNormRow {
    t: f64,
    l2: f64,
    h_s1: f64,
    w_s1_r: f64,
    contraction_ratio: Option<f64>,
}

#[derive(Serialize)]
struct ContractionRow {
    iteration: usize,
    update: f64,
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct SolveSummary {
    case: String,
    params: CaseParams,
    solver: SolverConfig,
    phi_label: String,
    noise_seed: SeedRecord,
    converged: bool,
    iterations: usize,
    last_ratio: Option<f64>,
    v_norm: Option<f64>,
}

fn solve(cfg: &mut Config, seed: u64, dir: &mut RunDir) -> LabResult<Vec<String>> {
    let params = case_params(cfg, Case::Ia)?;
    let grid = presets::grid(cfg, params.dim, None)?;
    let u0 = presets::u0(cfg, &grid, "gaussian")?;
    let phi = presets::phi(cfg, &grid, "zero")?;
    let time = time_grid(cfg, 0.1, 32)?;
    let sc = solver_config(cfg, &params, time)?;
    let replica = *cfg.run.replica.get_or_insert(0);
    let noise_seed = SeedRecord::new(seed, Purpose::Noise, replica);
    let psi = sample_convolution(&phi, time, noise_seed);
    let mut summary = SolveSummary {
        case: params.case.to_string(),
        params,
        solver: sc,
        phi_label: phi.label(),
        noise_seed,
        converged: false,
        iterations: 0,
        last_ratio: None,
        v_norm: None,
    };
    let sol = match picard_solve(&u0, &psi, &sc) {
        Ok(sol) => sol,
        Err(e @ snls_core::Error::ExistenceHorizonExceeded { iterations, last_ratio }) => {
            summary.iterations = iterations;
            summary.last_ratio = Some(last_ratio);
            dir.write_json("solution.json", &summary)?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let u = sol.solution(&psi)?;
    let rows: Vec<SolveNormRow> = u
        .slices
        .iter()
        .enumerate()
        .map(|(j, f)| SolveNormRow {
            t: time.time(j),
            l2: f.l2_norm(),
            h_s1: sobolev_norm(f, sc.norm.s1, Exponent::Finite(2.0)),
            w_s1_r: sobolev_norm(f, sc.norm.s1, sc.norm.r),
            contraction_ratio: sol.contraction_history.get(j).copied(),
        })
        .collect();
    dir.write_csv("norms.csv", &rows)?;
    let iters: Vec<ContractionRow> = sol
        .updates
        .iter()
        .enumerate()
        .map(|(k, &update)| ContractionRow {
            iteration: k + 1,
            update,
            ratio: if k == 0 { None } else { sol.contraction_history.get(k - 1).copied() },
        })
        .collect();
    dir.write_csv("contraction.csv", &iters)?;
    dir.write_bytes("u_final.bin", &encode(u.last()))?;
    dir.write_bytes("v_final.bin", &encode(sol.v.last()))?;
    summary.converged = true;
    summary.iterations = sol.iterations;
    summary.last_ratio = sol.contraction_history.last().copied();
    summary.v_norm = Some(sol.v_norm);
    dir.write_json("solution.json", &summary)?;
    Ok(vec![
        format!(
            "case {} converged in {} iterations (last contraction ratio {:?})",
            summary.case, sol.iterations, summary.last_ratio
        ),
        format!("‖u(T)‖_L2 = {:.10e}", u.last().l2_norm()),
    ])
}

#[derive(Serialize)]
struct ProbeRow {
    replica: u64,
    t_est: f64,
    rung: Option<usize>,
    attempts: usize,
}

#[derive(Serialize)]
struct ProbeSummary {
    params: CaseParams,
    solver: SolverConfig,
    phi_label: String,
    ladder: Vec<f64>,
    n_paths: usize,
    above_ladder_minimum: usize,
    positive: usize,
    t_est: TailSummary,
}

fn probe_existence(cfg: &mut Config, seed: u64, pool: &Pool, dir: &mut RunDir) -> LabResult<Vec<String>> {
    let params = case_params(cfg, Case::Ii)?;
    let grid = presets::grid(cfg, params.dim, None)?;
    let u0 = presets::u0(cfg, &grid, "gaussian")?;
    let default_phi = if params.case == Case::Ii { "power-law" } else { "cutoff" };
    if params.case == Case::Ii && cfg.phi.family.is_none() {
        cfg.phi.s.get_or_insert(Real(params.s));
        cfg.phi.alpha.get_or_insert(Real(2.0));
    }
    let phi = presets::phi(cfg, &grid, default_phi)?;
    let rungs = ladder(cfg, 0.005, 0.64, 8)?;
    let steps = *cfg.time.steps.get_or_insert(16);
    let sc = solver_config(cfg, &params, TimeGrid::new(rungs[0], steps).map_err(|e| LabError::config("time.steps", e.to_string()))?)?;
    let n = *cfg.mc.n_samples.get_or_insert(100);
    let estimates = existence_distribution(pool, &u0, &phi, &sc, &rungs, n, seed)?;
    let rows: Vec<ProbeRow> = estimates
        .iter()
        .map(|e| ProbeRow {
            replica: e.seed.replica,
            t_est: e.t_est,
            rung: e.rung,
            attempts: e.attempts.len(),
        })
        .collect();
    dir.write_csv("existence.csv", &rows)?;
    dir.write_json("attempts.json", &estimates)?;
    let ts: Vec<f64> = estimates.iter().map(|e| e.t_est).collect();
    let summary = ProbeSummary {
        params,
        solver: sc,
        phi_label: phi.label(),
        ladder: rungs.clone(),
        n_paths: n,
        above_ladder_minimum: ts.iter().filter(|&&t| t > rungs[0]).count(),
        positive: ts.iter().filter(|&&t| t > 0.0).count(),
        t_est: TailSummary::from_samples(&ts),
    };
    dir.write_json("existence.json", &summary)?;
    Ok(vec![format!(
        "{}/{} paths exceed the ladder minimum {}; median T_est = {}",
        summary.above_ladder_minimum, n, rungs[0], summary.t_est.median
    )])
}

#[derive(Serialize)]
struct DecayRow {
    t: f64,
    norm: f64,
    edge_fraction: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct FitRow {
    quantity: String,
    exponent_hat: f64,
    exponent_predicted: Option<f64>,
    ci_lo: f64,
    ci_hi: f64,
    r_squared: f64,
    n_points: usize,
}

fn verify_dispersive(cfg: &mut Config, pool: &Pool, dir: &mut RunDir) -> LabResult<Vec<String>> {
    let d = *cfg.grid.d.get_or_insert(1);
    let shape = match d {
        1 => (4096, 200.0),
        2 => (512, 128.0),
        _ => (128, 64.0),
    };
    let grid = presets::grid(cfg, d, Some(shape))?;
    if matches!(cfg.u0.preset.as_deref(), None | Some("gaussian")) {
        cfg.u0.sigma.get_or_insert(Real(0.5));
    }
    let f = presets::u0(cfg, &grid, "gaussian")?;
    let r = norm_exponent(&mut cfg.norm.r, f64::INFINITY, "norm.r")?;
    let t_max = if d == 1 { 5.0 } else { 3.0 };
    let times = ladder(cfg, 0.5, t_max, 9)?;
    let report = dispersive_decay_fit(pool, &f, r, &times)?;
    let rows: Vec<DecayRow> = report
        .samples
        .iter()
        .zip(&report.ratios)
        .map(|(s, &ratio)| DecayRow {
            t: s.t,
            norm: s.norm,
            edge_fraction: s.edge_fraction,
            ratio,
        })
        .collect();
    dir.write_csv("decay.csv", &rows)?;
    dir.write_csv(
        "fit.csv",
        &[FitRow {
            quantity: format!("‖S(t)f‖_L^{r}"),
            exponent_hat: report.fit.exponent_hat,
            exponent_predicted: report.fit.exponent_predicted,
            ci_lo: report.fit.ci_95.0,
            ci_hi: report.fit.ci_95.1,
            r_squared: report.fit.r_squared,
            n_points: report.fit.n_points,
        }],
    )?;
    dir.write_json("fit.json", &report)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    dir.write_bytes(
        "decay.svg",
        svg::loglog(
            &format!("dispersive decay, d = {d}, r = {r}"),
            "t",
            &format!("‖S(t)f‖ in L^{r}"),
            &svg::Series { xs: &xs, ys: &ys, errors: None },
            Some(&svg::FitLine {
                slope: report.fit.exponent_hat,
                intercept: report.fit.intercept,
            }),
        )
        .as_bytes(),
    )?;
    Ok(vec![format!(
        "fitted exponent {:.5} (predicted {:.5}), R² = {:.6}",
        report.fit.exponent_hat,
        report.predicted_exponent(),
        report.fit.r_squared
    )])
}

#[derive(Serialize)]
struct ScalingRow {
    horizon: f64,
    s: f64,
    q: String,
    r: String,
    rho: f64,
    estimate: f64,
    stderr: f64,
    theta_hat: f64,
    ci_lo: f64,
    ci_hi: f64,
}

fn scaling(cfg: &mut Config, seed: u64, pool: &Pool, dir: &mut RunDir) -> LabResult<Vec<String>> {
    let grid = presets::grid(cfg, 2, Some((32, 16.0)))?;
    let phi = presets::phi(cfg, &grid, "power-law")?;
    let s = real_or(&mut cfg.norm.s, 0.0);
    let q = norm_exponent(&mut cfg.norm.q, 8.0, "norm.q")?;
    let r = norm_exponent(&mut cfg.norm.r, 4.0, "norm.r")?;
    let rho = real_or(&mut cfg.norm.rho, 2.0);
    let horizons = ladder(cfg, 0.1, 1.0, 8)?;
    let steps = *cfg.time.steps.get_or_insert(16);
    let n_samples = *cfg.mc.n_samples.get_or_insert(200);
    let params = ScalingParams {
        s,
        q,
        r,
        horizons,
        rho,
        n_samples,
        steps,
        master_seed: seed,
    };
    let report = verify_convolution_scaling(pool, &phi, &params)?;
    let rows: Vec<ScalingRow> = report
        .points
        .iter()
        .map(|p| ScalingRow {
            horizon: p.horizon,
            s,
            q: q.to_string(),
            r: r.to_string(),
            rho,
            estimate: p.moment.estimate,
            stderr: p.moment.stderr,
            theta_hat: report.fit.exponent_hat,
            ci_lo: report.fit.ci_95.0,
            ci_hi: report.fit.ci_95.1,
        })
        .collect();
    dir.write_csv("scaling.csv", &rows)?;
    dir.write_json("scaling.json", &report)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.horizon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
    let es: Vec<f64> = rows.iter().map(|r| 2.0 * r.stderr).collect();
    dir.write_bytes(
        "scaling.svg",
        svg::loglog(
            "stochastic convolution moment against T",
            "T",
            "L^rho(Ω) moment of the space-time norm",
            &svg::Series { xs: &xs, ys: &ys, errors: Some(&es) },
            Some(&svg::FitLine {
                slope: report.fit.exponent_hat,
                intercept: report.fit.intercept,
            }),
        )
        .as_bytes(),
    )?;
    Ok(vec![
        format!(
            "θ̂ = {:.4}, 95% CI [{:.4}, {:.4}]",
            report.fit.exponent_hat, report.fit.ci_95.0, report.fit.ci_95.1
        ),
        format!("homogeneity ratio for 2φ: {:.6}", report.homogeneity_ratio),
    ])
}

#[derive(Serialize)]
struct StrichartzRow {
    s: f64,
    q: String,
    r: String,
    horizon: f64,
    admissible: bool,
    coarse_median: f64,
    coarse_q90: f64,
    coarse_q99: f64,
    coarse_tail_c: f64,
    fine_q90: Option<f64>,
    q90_change: Option<f64>,
    drift_flag: bool,
    profile_norm: f64,
}

fn pstrichartz(cfg: &mut Config, seed: u64, pool: &Pool, dir: &mut RunDir) -> LabResult<Vec<String>> {
    let grid = presets::grid(cfg, 2, Some((64, 16.0)))?;
    let u0 = presets::u0(cfg, &grid, "rough")?;
    let refine = *cfg.randomize.refine.get_or_insert(true);
    let fine = if refine {
        let fine_grid = GridSpec::new(grid.dim(), grid.length(), 2 * grid.n())
            .map_err(|e| LabError::config("grid.n", e.to_string()))?;
        if cfg.u0.preset.as_deref() == Some("file") {
            return Err(LabError::config("randomize.refine", "file data cannot be refined"));
        }
        Some(presets::u0(cfg, &fine_grid, "rough")?)
    } else {
        None
    };
    let spec = randomization_spec(cfg)?;
    let s = real_or(&mut cfg.norm.s, 0.0);
    let q = norm_exponent(&mut cfg.norm.q, 20.0, "norm.q")?;
    let r = norm_exponent(&mut cfg.norm.r, 20.0, "norm.r")?;
    let time = time_grid(cfg, 0.1, 8)?;
    let n = *cfg.mc.n_samples.get_or_insert(500);
    let norm = NormSpec::new(s, r, q, time.horizon).map_err(|e| LabError::config("norm", e.to_string()))?;
    let report = verify_probabilistic_strichartz(pool, &u0, fine.as_ref(), &spec, &[norm], time.steps, n, seed)?;
    let rows: Vec<StrichartzRow> = report
        .entries
        .iter()
        .map(|e| StrichartzRow {
            s: e.norm.s,
            q: e.norm.q.to_string(),
            r: e.norm.r.to_string(),
            horizon: e.norm.horizon,
            admissible: e.admissible,
            coarse_median: e.coarse.median,
            coarse_q90: e.coarse.q90,
            coarse_q99: e.coarse.q99,
            coarse_tail_c: e.coarse.tail_c,
            fine_q90: e.fine.as_ref().map(|f| f.q90),
            q90_change: e.q90_change,
            drift_flag: e.drift_flag,
            profile_norm: e.profile_norm,
        })
        .collect();
    dir.write_csv("pstrichartz.csv", &rows)?;
    dir.write_json("pstrichartz.json", &report)?;
    let e = &rows[0];
    Ok(vec![format!(
        "L^{}_T W^{},{}: upper decile {:.5e} → {:?} (change {:?}); unrandomized profile {:.5e}",
        e.q, e.s, e.r, e.coarse_q90, e.fine_q90, e.q90_change, e.profile_norm
    )])
}

#[derive(Serialize)]
struct ContractionScalingRow {
    horizon: f64,
    first_ratio: f64,
}

#[derive(Serialize)]
struct ContractionSummary {
    params: CaseParams,
    phi_label: String,
    noise_seed: SeedRecord,
    strictly_decreasing: bool,
    fit: snls_core::estimators::FitReport,
}

fn contraction(cfg: &mut Config, seed: u64, dir: &mut RunDir) -> LabResult<Vec<String>> {
    let params = case_params(cfg, Case::Ia)?;
    let grid = presets::grid(cfg, params.dim, None)?;
    let u0 = presets::u0(cfg, &grid, "gaussian")?;
    let phi = presets::phi(cfg, &grid, "power-law")?;
    if cfg.ladder.horizons.is_none() {
        cfg.ladder.horizons = Some([0.2, 0.1, 0.05, 0.025].map(Real).to_vec());
    }
    let mut horizons = ladder(cfg, 0.025, 0.2, 4)?;
    horizons.sort_by(f64::total_cmp);
    let steps = *cfg.time.steps.get_or_insert(16);
    let replica = *cfg.run.replica.get_or_insert(0);
    let noise_seed = SeedRecord::new(seed, Purpose::Noise, replica);
    let paths = NestedPaths::sample(&phi, &horizons, steps, noise_seed)?;
    let mut rows = Vec::with_capacity(horizons.len());
    for &t in &horizons {
        let sc = solver_config(cfg, &params, TimeGrid::new(t, steps)?)?;
        let psi = paths.path(t)?;
        rows.push(ContractionScalingRow {
            horizon: t,
            first_ratio: first_contraction_ratio(&u0, &psi, &sc)?,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.horizon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.first_ratio).collect();
    let fit = fit_power_law_seeded(&xs, &ys, SeedRecord::new(seed, Purpose::Bootstrap, 0))?;
    let strictly_decreasing = ys.windows(2).all(|w| w[0] < w[1]);
    dir.write_csv("contraction.csv", &rows)?;
    dir.write_bytes(
        "contraction.svg",
        svg::loglog(
            "first Picard contraction ratio against T",
            "T",
            "ratio",
            &svg::Series { xs: &xs, ys: &ys, errors: None },
            Some(&svg::FitLine {
                slope: fit.exponent_hat,
                intercept: fit.intercept,
            }),
        )
        .as_bytes(),
    )?;
    let summary = ContractionSummary {
        params,
        phi_label: phi.label(),
        noise_seed,
        strictly_decreasing,
        fit,
    };
    dir.write_json("contraction.json", &summary)?;
    Ok(vec![format!(
        "θ̂ = {:.4} (CI [{:.4}, {:.4}]); ratio decreases as T shrinks: {}",
        summary.fit.exponent_hat, summary.fit.ci_95.0, summary.fit.ci_95.1, strictly_decreasing
    )])
}

#[derive(Serialize)]
struct ReportEntry {
    run: String,
    command: String,
    master_seed: Option<u64>,
    artifacts: usize,
    mismatched: Vec<String>,
}

/// Collects every run manifest under `root` (the directory itself and its
/// immediate subdirectories), re-hashes the artifacts and writes
/// `report.json` and `report.md` into `root`.
pub fn report(root: &Path) -> LabResult<(Vec<String>, bool)> {
    let mut dirs = vec![root.to_path_buf()];
    let mut subdirs: Vec<_> = std::fs::read_dir(root)
        .map_err(|e| LabError::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    dirs.extend(subdirs);
    let mut entries = Vec::new();
    for dir in dirs {
        if !dir.join(MANIFEST).exists() {
            continue;
        }
        let manifest = read_manifest(&dir)?;
        entries.push(ReportEntry {
            run: dir
                .strip_prefix(root)
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            command: manifest.command.clone(),
            master_seed: manifest.master_seed,
            artifacts: manifest.artifacts.len(),
            mismatched: verify_manifest(&dir, &manifest),
        });
    }
    let ok = entries.iter().all(|e| e.mismatched.is_empty());
    let mut md = String::from("| run | command | seed | artifacts | status |\n|---|---|---|---|---|\n");
    for e in &entries {
        let run = if e.run.is_empty() { "." } else { &e.run };
        let status = if e.mismatched.is_empty() {
            "verified".to_string()
        } else {
            format!("changed: {}", e.mismatched.join(", "))
        };
        let seed = e.master_seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        md.push_str(&format!("| {run} | {} | {seed} | {} | {status} |\n", e.command, e.artifacts));
    }
    let json = serde_json::to_vec_pretty(&entries).expect("report serializes");
    let write = |name: &str, bytes: &[u8]| {
        let p = root.join(name);
        std::fs::write(&p, bytes).map_err(|e| LabError::io(&p, e))
    };
    write("report.json", &json)?;
    write("report.md", md.as_bytes())?;
    let lines = vec![format!(
        "{} runs, {} with changed artifacts",
        entries.len(),
        entries.iter().filter(|e| !e.mismatched.is_empty()).count()
    )];
    Ok((lines, ok))
}
