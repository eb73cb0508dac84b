//! Statistical and structural checks on the noise and randomization layers.

use num_complex::Complex64;
use snls_core::estimators::{mean, standard_error};
use snls_core::noise::{hs_norm, sample_convolution, NestedPaths, SmoothingOperator};
use snls_core::randomization::{
    draw_coefficients, expected_sobolev_square, randomize_with, wiener_randomize, CoefficientLaw,
    CubeLattice, RandomizationSpec,
};
use snls_core::replica::{Purpose, ReplicaRunner, SeedRecord, Sequential};
use snls_core::spectral::{sobolev_norm, Exponent, GridSpec, SpectralField, TimeGrid};

fn bump(grid: &GridSpec, width: f64) -> SpectralField {
    let c = grid.center();
    SpectralField::from_fn(grid, |x| {
        let r2: f64 = (0..grid.dim()).map(|i| (x[i] - c[i]).powi(2)).sum();
        Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.3 * x[0].sin())
    })
}

#[test]
fn mean_square_of_convolution_grows_linearly_in_two_dimensions() {
    let grid = GridSpec::new(2, 8.0, 16).unwrap();
    let phi = SmoothingOperator::cutoff(&grid, 1.0).unwrap();
    let time = TimeGrid::new(0.5, 4).unwrap();
    let s = 0.25;
    let norms = Sequential.map(3000, |i| {
        let path = sample_convolution(&phi, time, SeedRecord::new(11, Purpose::Noise, i));
        path.trajectory
            .slices
            .iter()
            .map(|f| sobolev_norm(f, s, Exponent::Finite(2.0)).powi(2))
            .collect::<Vec<_>>()
    });
    for j in 1..time.len() {
        let xs: Vec<f64> = norms.iter().map(|n| n[j]).collect();
        let expected = time.time(j) * hs_norm(&phi, s).powi(2);
        let z = (mean(&xs) - expected) / standard_error(&xs);
        assert!(z.abs() < 4.0, "t = {}: z = {z}", time.time(j));
    }
}

#[test]
fn convolution_is_linear_in_the_smoothing_operator() {
    let grid = GridSpec::new(1, 10.0, 32).unwrap();
    let phi = SmoothingOperator::power_law(&grid, 1.0, 0.0).unwrap();
    let time = TimeGrid::new(1.0, 8).unwrap();
    let seed = SeedRecord::new(5, Purpose::Noise, 2);
    let a = sample_convolution(&phi, time, seed);
    let b = sample_convolution(&phi.scaled(3.0), time, seed);
    for (x, y) in a.trajectory.slices.iter().zip(&b.trajectory.slices) {
        let diff = y.sub(&x.clone().scaled(Complex64::new(3.0, 0.0))).unwrap();
        assert!(diff.l2_norm() <= 1e-13 * (1.0 + y.l2_norm()));
    }
}

#[test]
fn nested_paths_share_one_realization() {
    let grid = GridSpec::new(1, 10.0, 32).unwrap();
    let phi = SmoothingOperator::cutoff(&grid, 2.0).unwrap();
    let paths = NestedPaths::sample(&phi, &[0.1, 0.2, 0.4], 4, SeedRecord::new(9, Purpose::Noise, 0)).unwrap();
    let short = paths.path(0.1).unwrap();
    let mid = paths.path(0.2).unwrap();
    let long = paths.path(0.4).unwrap();
    // t = 0.1 is the last point of the short grid and the midpoint of the next
    assert_eq!(short.trajectory.slices[4], mid.trajectory.slices[2]);
    assert_eq!(mid.trajectory.slices[4], long.trajectory.slices[2]);
    assert!(paths.path(0.3).is_err());
}

#[test]
fn randomized_mean_square_matches_closed_form() {
    let grid = GridSpec::new(1, 16.0, 64).unwrap();
    let u0 = bump(&grid, 1.5);
    let spec = RandomizationSpec::new(CoefficientLaw::ComplexGaussian, 1.0).unwrap();
    let s = 0.5;
    let xs = Sequential.map(4000, |i| {
        let r = wiener_randomize(&u0, &spec, SeedRecord::new(3, Purpose::Randomization, i)).unwrap();
        sobolev_norm(&r.field, s, Exponent::Finite(2.0)).powi(2)
    });
    let expected = expected_sobolev_square(&u0, &spec, s);
    let z = (mean(&xs) - expected) / standard_error(&xs);
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn randomization_is_linear_in_the_data_for_fixed_coefficients() {
    let grid = GridSpec::new(2, 6.0, 16).unwrap();
    let spec = RandomizationSpec::new(CoefficientLaw::Bernoulli, 1.0).unwrap();
    let coeffs = draw_coefficients(&spec, CubeLattice::for_grid(&grid).len(), SeedRecord::new(1, Purpose::Randomization, 0));
    assert!(coeffs.iter().all(|g| (g.norm() - 1.0).abs() < 1e-15));
    let f = bump(&grid, 1.0);
    let g = bump(&grid, 0.4);
    let a = Complex64::new(0.5, -2.0);
    let mut combo = f.to_frequency();
    combo.add_scaled(a, &g.to_frequency()).unwrap();
    let lhs = randomize_with(&combo, &spec, &coeffs).unwrap();
    let mut rhs = randomize_with(&f, &spec, &coeffs).unwrap();
    rhs.add_scaled(a, &randomize_with(&g, &spec, &coeffs).unwrap()).unwrap();
    assert!(lhs.sub(&rhs).unwrap().l2_norm() <= 1e-13 * lhs.l2_norm());
}

#[test]
fn randomization_preserves_frequency_support() {
    let grid = GridSpec::new(1, 8.0, 64).unwrap();
    let u0 = SpectralField::from_spectrum(&grid, |xi| {
        if xi[0].abs() <= 1.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let spec = RandomizationSpec::new(CoefficientLaw::ComplexGaussian, 1.0).unwrap();
    let r = wiener_randomize(&u0, &spec, SeedRecord::new(2, Purpose::Randomization, 0)).unwrap();
    for (i, v) in r.field.values().iter().enumerate() {
        if grid.frequency(i)[0].abs() > 1.0 {
            assert_eq!(v.norm(), 0.0);
        }
    }
}
