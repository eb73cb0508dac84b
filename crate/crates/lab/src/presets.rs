//! Named parameter bundles and the builders that turn configuration
//! sections into core objects. Builders write the defaults they apply back
//! into the configuration, so the run manifest records every value used.

use std::path::Path;

use num_complex::Complex64;
use snls_core::noise::SmoothingOperator;
use snls_core::spectral::{GridSpec, SpectralField};

use crate::config::{Config, Real};
use crate::error::{LabError, LabResult};
use crate::fieldio::read_field;

fn core_err(key: &str) -> impl Fn(snls_core::Error) -> LabError + '_ {
    move |e| LabError::config(key, e.to_string())
}

pub fn real_or(slot: &mut Option<Real>, default: f64) -> f64 {
    slot.get_or_insert(Real(default)).0
}

/// Grid sizes used when `[grid]` leaves `n` or `length` unset.
pub fn default_grid_shape(d: usize) -> (usize, f64) {
    match d {
        1 => (256, 40.0),
        2 => (64, 20.0),
        _ => (32, 8.0),
    }
}

pub fn grid(cfg: &mut Config, d_default: usize, shape: Option<(usize, f64)>) -> LabResult<GridSpec> {
    let d = *cfg.grid.d.get_or_insert(d_default);
    let (n_def, l_def) = shape.unwrap_or_else(|| default_grid_shape(d));
    let n = *cfg.grid.n.get_or_insert(n_def);
    let l = real_or(&mut cfg.grid.length, l_def);
    GridSpec::new(d, l, n).map_err(core_err("grid"))
}

pub fn phi(cfg: &mut Config, grid: &GridSpec, family_default: &str) -> LabResult<SmoothingOperator> {
    let family = cfg
        .phi
        .family
        .get_or_insert_with(|| family_default.to_string())
        .clone();
    let p = &mut cfg.phi;
    let op = match family.as_str() {
        "zero" => Ok(SmoothingOperator::zero(grid)),
        "cutoff" => SmoothingOperator::cutoff(grid, real_or(&mut p.k_max, 1.0)),
        "power-law" | "power" => {
            let alpha = real_or(&mut p.alpha, 1.5);
            let s = real_or(&mut p.s, 0.0);
            SmoothingOperator::power_law(grid, alpha, s)
        }
        "truncated-power-law" => {
            let alpha = real_or(&mut p.alpha, 1.5);
            let k_max = real_or(&mut p.k_max, 1.0);
            SmoothingOperator::truncated_power_law(grid, alpha, k_max)
        }
        "single-mode" | "mode" => {
            let k = [
                *p.kx.get_or_insert(1),
                *p.ky.get_or_insert(0),
                *p.kz.get_or_insert(0),
            ];
            let amp = real_or(&mut p.amplitude, 1.0);
            SmoothingOperator::single_mode(grid, k, amp)
        }
        other => {
            return Err(LabError::config(
                "phi.family",
                format!("unknown family {other:?}; expected zero, cutoff, power-law, truncated-power-law or single-mode"),
            ))
        }
    };
    // an unreachable regularity is a hypothesis violation, anything else is
    // a malformed parameter
    op.map_err(|e| match e {
        snls_core::Error::Hypothesis(_) => LabError::Core(e),
        other => LabError::config("phi", other.to_string()),
    })
}

/// `a·exp(−|x − c|²/(2σ²))` centred in the box.
pub fn gaussian_profile(grid: &GridSpec, amplitude: f64, sigma: f64) -> SpectralField {
    let c = grid.center();
    let d = grid.dim();
    SpectralField::from_fn(grid, |x| {
        let r2: f64 = (0..d).map(|i| (x[i] - c[i]).powi(2)).sum();
        Complex64::new(amplitude * (-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
    })
}

/// Coefficients `a·⟨2πξ⟩^{−decay}` with the phase that centres the profile;
/// it lies in `H^s` exactly for `s < decay − d/2`. Refining `N` at fixed `L`
/// only adds modes, so the same profile is described on every grid.
pub fn rough_profile(grid: &GridSpec, amplitude: f64, decay: f64) -> SpectralField {
    let c = grid.center();
    SpectralField::from_spectrum(grid, |xi| {
        let w = 4.0 * std::f64::consts::PI.powi(2) * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        let phase = -2.0 * std::f64::consts::PI * (xi[0] * c[0] + xi[1] * c[1] + xi[2] * c[2]);
        Complex64::from_polar(amplitude * (1.0 + w).powf(-decay / 2.0), phase)
    })
}

pub fn u0(cfg: &mut Config, grid: &GridSpec, preset_default: &str) -> LabResult<SpectralField> {
    let preset = cfg
        .u0
        .preset
        .get_or_insert_with(|| preset_default.to_string())
        .clone();
    let u = &mut cfg.u0;
    match preset.as_str() {
        "zero" => Ok(SpectralField::zeros(grid, snls_core::spectral::Representation::Physical)),
        "gaussian" => {
            let a = real_or(&mut u.amplitude, 1.0);
            let sigma = real_or(&mut u.sigma, 1.0);
            if !(sigma > 0.0) {
                return Err(LabError::config("u0.sigma", "must be positive"));
            }
            Ok(gaussian_profile(grid, a, sigma))
        }
        "rough" => {
            let a = real_or(&mut u.amplitude, 1.0);
            let decay = real_or(&mut u.decay, grid.dim() as f64 / 2.0 + 0.5);
            Ok(rough_profile(grid, a, decay))
        }
        "file" => {
            let path = u
                .file
                .clone()
                .ok_or_else(|| LabError::config("u0.file", "required when u0.preset = \"file\""))?;
            let field = read_field(Path::new(&path))?;
            if field.grid() != grid {
                return Err(LabError::config(
                    "u0.file",
                    format!("{path} does not live on the configured grid"),
                ));
            }
            Ok(field)
        }
        other => Err(LabError::config(
            "u0.preset",
            format!("unknown preset {other:?}; expected gaussian, rough, zero or file"),
        )),
    }
}

/// Interprets `--u0`: a preset name or a path to a field file.
pub fn u0_flag(value: &str) -> Vec<(String, String)> {
    match value {
        "gaussian" | "rough" | "zero" => vec![("u0.preset".into(), format!("{value:?}"))],
        path => vec![
            ("u0.preset".into(), "\"file\"".into()),
            ("u0.file".into(), format!("{path:?}")),
        ],
    }
}
