use alphamod::bapu::{BapuSystem, Profile};
use alphamod::covering::CoveringParams;
use alphamod::frame::Frame;
use alphamod::grid::{inverse_ft, random_wave_packets, Grid};
use alphamod::multiplier::{apply_multiplier, Symbol};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn setup(alpha: f64, kmax: i64) -> (Frame, Grid) {
    let grid = Grid::new(1, 64.0 * PI, 2048).unwrap();
    let sys = BapuSystem::new(
        CoveringParams::new(alpha, 1, kmax).unwrap(),
        Profile::default(),
    );
    (Frame::new(sys, grid).unwrap(), grid)
}

#[test]
fn vector_signal_round_trip() {
    let (frame, grid) = setup(0.5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let band = frame.params().xi(alphamod::covering::Ix::d1(3))[0];
    let f = inverse_ft(&random_wave_packets(grid, 2, band, 4, &mut rng).unwrap()).unwrap();
    let c = frame.analyze(&f).unwrap();
    let back = frame.synthesize(&c).unwrap();
    let err = back.axpy(Complex64::new(-1.0, 0.0), &f).unwrap().max_abs();
    assert!(err <= 1e-8 * f.max_abs(), "{err}");
    // Parseval: sum |c|^2 equals ||f||^2.
    let ratio = c.sum_sq() / f.l2_norm().powi(2);
    assert!((ratio - 1.0).abs() < 1e-8, "{ratio}");
}

#[test]
fn multipliers_compose() {
    let (_, grid) = setup(0.5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = inverse_ft(&random_wave_packets(grid, 1, 10.0, 3, &mut rng).unwrap()).unwrap();
    let up = Symbol::parse("bracket_power:1").unwrap();
    let down = Symbol::parse("bracket_power:-1").unwrap();
    let g = apply_multiplier(&down, &apply_multiplier(&up, &f).unwrap()).unwrap();
    let err = g.axpy(Complex64::new(-1.0, 0.0), &f).unwrap().max_abs();
    assert!(err <= 1e-12 * f.max_abs(), "{err}");
}
