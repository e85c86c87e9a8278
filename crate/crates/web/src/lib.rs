//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export returns a flat `Float64Array`; layouts are documented per function.

use std::f64::consts::PI;

use alphamod::bapu::{BapuSystem, Profile};
use alphamod::covering::{CoveringParams, Ix};
use alphamod::frame::Frame;
use alphamod::grid::{inverse_ft, random_wave_packets, Grid};
use alphamod::weights::{ap_constant_estimate, dyadic_lattice_families, MatrixWeight};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js(e: alphamod::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Rows of length `samples`: `xi`, then `psi_k` for `k = -kmax..=kmax`, then
/// `sum_k theta_k^2`.
pub fn windows(alpha: f64, kmax: i64, samples: usize) -> alphamod::Result<Vec<f64>> {
    let sys = BapuSystem::new(CoveringParams::new(alpha, 1, kmax)?, Profile::default());
    let s = sys.renorm_halfwidth();
    let xs: Vec<f64> = (0..samples)
        .map(|i| -s + 2.0 * s * i as f64 / (samples - 1) as f64)
        .collect();
    let mut out = xs.clone();
    for k in -kmax..=kmax {
        for &x in &xs {
            out.push(sys.psi(Ix::d1(k), [x, 0.0])?);
        }
    }
    for &x in &xs {
        let mut sq = 0.0;
        for k in sys.active([x, 0.0]) {
            sq += sys.theta(k, [x, 0.0])?.powi(2);
        }
        out.push(sq);
    }
    Ok(out)
}

/// `[residual, parseval_defect, M, signal re (M), reconstruction re (M), band energies (2 kmax + 1)]`.
pub fn roundtrip(alpha: f64, kmax: i64, packets: usize, seed: u64) -> alphamod::Result<Vec<f64>> {
    let grid = Grid::new(1, 128.0 * PI, 4096)?;
    let sys = BapuSystem::new(CoveringParams::new(alpha, 1, kmax)?, Profile::default());
    let band = sys.renorm_halfwidth().min(grid.guard());
    let frame = Frame::new(sys, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = inverse_ft(&random_wave_packets(grid, 1, band, packets, &mut rng)?)?;
    let t = frame.tight_frame_residual(&f)?;
    let c = frame.analyze(&f)?;
    let back = frame.synthesize(&c)?;
    let m = grid.len();
    let mut out = vec![t.residual, t.parseval_defect, m as f64];
    out.extend(f.components[0].iter().map(|z| z.re));
    out.extend(back.components[0].iter().map(|z| z.re));
    for k in -kmax..=kmax {
        let e: f64 = c
            .band(Ix::d1(k))
            .flat_map(|(_, v)| v.iter())
            .map(Complex64::norm_sqr)
            .sum();
        out.push(e);
    }
    Ok(out)
}

/// `[divergent (0/1), level_0, level_1, ...]` for `|x|^gamma` on nested dyadic lattices.
pub fn ap_levels(gamma: f64, p: f64, levels: usize) -> alphamod::Result<Vec<f64>> {
    let w = MatrixWeight::scalar(1, &format!("abs_pow:{gamma}"))?;
    let side0 = 0.25;
    let fams = dyadic_lattice_families(1, side0 * 2f64.powi(levels as i32), side0, levels);
    let rep = ap_constant_estimate(&w, p, &fams, side0 / 16.0)?;
    let mut out = vec![rep.divergent as u8 as f64];
    out.extend(rep.levels);
    Ok(out)
}

#[wasm_bindgen(js_name = bapuWindows)]
pub fn bapu_windows(alpha: f64, kmax: i32, samples: usize) -> Result<Vec<f64>, JsError> {
    windows(alpha, kmax as i64, samples.max(2)).map_err(js)
}

#[wasm_bindgen(js_name = frameRoundtrip)]
pub fn frame_roundtrip(
    alpha: f64,
    kmax: i32,
    packets: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    roundtrip(alpha, kmax as i64, packets.max(1), seed as u64).map_err(js)
}

#[wasm_bindgen(js_name = apLevels)]
pub fn ap_levels_js(gamma: f64, p: f64, levels: usize) -> Result<Vec<f64>, JsError> {
    ap_levels(gamma, p, levels.clamp(1, 6)).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_sum_to_one() {
        let n = 101;
        let w = windows(0.5, 3, n).unwrap();
        assert_eq!(w.len(), n * (7 + 2));
        for i in 0..n {
            let s: f64 = (0..7).map(|r| w[(1 + r) * n + i]).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!((w[8 * n + i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_is_tight() {
        let r = roundtrip(0.5, 3, 3, 7).unwrap();
        assert!(r[0] < 1e-8 && r[1] < 1e-8, "{:?}", &r[..2]);
        let m = r[2] as usize;
        assert_eq!(r.len(), 3 + 2 * m + 7);
    }

    #[test]
    fn ap_flags() {
        assert_eq!(ap_levels(0.5, 2.0, 4).unwrap()[0], 0.0);
        assert_eq!(ap_levels(1.0, 2.0, 4).unwrap()[0], 1.0);
    }
}
