//! Weighted Lebesgue, continuous and discrete alpha-modulation norms and the
//! harnesses comparing them.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::bapu::{BandTable, BapuSystem};
use crate::covering::{CoveringParams, Ix};
use crate::error::{param, Error, Result};
use crate::frame::CoeffSeq;
use crate::grid::{
    band_sum, forward_ft, inverse_factor, inverse_ft, Grid, Point, SpectralSignal, VectorSignal,
};
use crate::linalg::{self, CMat};
use crate::quad::{cells_per_axis, CubeRule};
use crate::sum::Neumaier;
use crate::weights::{Cube, MatrixWeight, ReducingFamily};

/// Summability exponent; `Infinity` aggregates by supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Q {
    Finite(f64),
    Infinity,
}

impl Q {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" => Ok(Self::Infinity),
            t => match t.parse::<f64>() {
                Ok(v) if v > 0.0 => Ok(Self::Finite(v)),
                _ => param(format!("q must be positive or `inf`, got `{t}`")),
            },
        }
    }

    pub fn min_one(&self) -> f64 {
        match *self {
            Self::Finite(q) => q.min(1.0),
            Self::Infinity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessParams {
    pub alpha: f64,
    pub s: f64,
    pub p: f64,
    pub q: Q,
}

impl SmoothnessParams {
    pub fn new(alpha: f64, s: f64, p: f64, q: Q) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return if alpha == 1.0 {
                Err(Error::UnsupportedEndpoint)
            } else {
                param("alpha must lie in [0, 1)")
            };
        }
        if !(p >= 1.0) || !p.is_finite() {
            return param(format!("p must lie in [1, inf), got {p}"));
        }
        if let Q::Finite(q) = q {
            if !(q > 0.0) {
                return param(format!("q must be positive, got {q}"));
            }
        }
        Ok(Self { alpha, s, p, q })
    }

    pub fn with_s(&self, s: f64) -> Self {
        Self { s, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub value: f64,
    /// `r_k^s * (band norm)` per band, reduction order.
    pub contributions: Vec<(Ix, f64)>,
    pub kind: String,
}

/// `l_q` aggregation in the given order, compensated; a single nonzero
/// term is returned exactly.
pub fn lq_aggregate(values: &[f64], q: Q) -> f64 {
    let nonzero: Vec<f64> = values.iter().copied().filter(|v| *v != 0.0).collect();
    match nonzero.len() {
        0 => return 0.0,
        1 => return nonzero[0].abs(),
        _ => {}
    }
    match q {
        Q::Infinity => nonzero.iter().fold(0.0, |a, v| a.max(v.abs())),
        Q::Finite(q) => {
            let mut acc = Neumaier::default();
            for v in &nonzero {
                acc.add(v.abs().powf(q));
            }
            acc.value().powf(1.0 / q)
        }
    }
}

/// `L^p(W)` norm on a grid with `W^{1/p}` cached at the nodes.
#[derive(Debug, Clone)]
pub struct LpWeightedNorm {
    pub p: f64,
    pub grid: Grid,
    pub n: usize,
    /// `None` for the identity weight.
    mats: Option<Vec<CMat>>,
}

impl LpWeightedNorm {
    pub fn new(w: &MatrixWeight, p: f64, grid: Grid) -> Result<Self> {
        if !(p >= 1.0) {
            return param(format!("p must be >= 1, got {p}"));
        }
        if w.dim != grid.dim {
            return param("weight and grid dimensions differ");
        }
        let identity = matches!(&w.spec, crate::weights::WeightSpec::Constant(m) if *m == linalg::identity(w.n));
        let mats = if identity {
            None
        } else {
            Some(
                (0..grid.len())
                    .map(|j| w.power_at(grid.node(j), 1.0 / p))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        Ok(Self {
            p,
            grid,
            n: w.n,
            mats,
        })
    }

    pub fn unweighted(p: f64, grid: Grid, n: usize) -> Result<Self> {
        Self::new(&MatrixWeight::identity(grid.dim, n), p, grid)
    }

    pub fn norm(&self, f: &VectorSignal) -> Result<f64> {
        if f.grid != self.grid || f.n() != self.n {
            return Err(Error::Structural(
                "signal does not match the norm's grid or vector size".into(),
            ));
        }
        let mut acc = Neumaier::default();
        let mut v = vec![Complex64::new(0.0, 0.0); self.n];
        for j in 0..self.grid.len() {
            for c in 0..self.n {
                v[c] = f.components[c][j];
            }
            let a = match &self.mats {
                None => linalg::vec_norm(&v),
                Some(m) => linalg::vec_norm(&linalg::mat_vec(&m[j], &v)),
            };
            if a != 0.0 {
                acc.add(a.powf(self.p));
            }
        }
        Ok((acc.value() * self.grid.cell_volume()).powf(1.0 / self.p))
    }
}

pub fn lp_w_norm(w: &MatrixWeight, p: f64, f: &VectorSignal) -> Result<f64> {
    LpWeightedNorm::new(w, p, f.grid)?.norm(f)
}

/// `|| { r_k^s ||w_k(D) f||_{L^p(W)} }_k ||_{l_q}` with the tabulated window
/// family (`psi` or `theta`).
pub fn m_continuous_norm(
    system: &BapuSystem,
    table: &BandTable,
    lpw: &LpWeightedNorm,
    sp: &SmoothnessParams,
    f: &SpectralSignal,
) -> Result<NormReport> {
    if (sp.p - lpw.p).abs() > 0.0 {
        return param("smoothness p differs from the L^p(W) norm's p");
    }
    let mut contributions = Vec::with_capacity(table.bands.len());
    for band in &table.bands {
        let piece = table.band_pass(band, f);
        let v = if piece.max_abs() == 0.0 {
            0.0
        } else {
            lpw.norm(&inverse_ft(&piece)?)?
        };
        contributions.push((band.k, system.params.r(band.k).powf(sp.s) * v));
    }
    let vals: Vec<f64> = contributions.iter().map(|c| c.1).collect();
    Ok(NormReport {
        value: lq_aggregate(&vals, sp.q),
        contributions,
        kind: format!(
            "M(alpha={}, s={}) {:?} window {}",
            sp.alpha,
            sp.s,
            table.window,
            system.profile.name()
        ),
    })
}

fn check_cube(side: f64, h: f64) -> Result<()> {
    if side < 2.0 * h {
        return Err(Error::Quadrature(format!(
            "quadrature under-resolved: cube side {side:.4e} < 2 h = {:.4e}",
            2.0 * h
        )));
    }
    Ok(())
}

/// `int_Q |W^{1/p}(t) v|^p dt` with the fixed cube rule.
pub fn cube_mass(w: &MatrixWeight, p: f64, cube: &Cube, v: &[Complex64], h: f64) -> Result<f64> {
    check_cube(cube.side, h)?;
    if w.is_constant() && w.eval([0.0, 0.0]) == linalg::identity(w.n) {
        return Ok(cube.volume() * linalg::vec_norm(v).powf(p));
    }
    let rule = CubeRule::new(
        cube.dim,
        cube.lower,
        cube.side,
        cells_per_axis(cube.side, h),
    )?;
    let mut acc = Neumaier::default();
    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
        let m = w.power_at(*x, 1.0 / p)?;
        acc.add(wt * linalg::vec_norm(&linalg::mat_vec(&m, v)).powf(p));
    }
    Ok(acc.value())
}

/// Discrete `m^{alpha,s}_{p,q}(W)` norm; the cubes tile, so the inner `L^p`
/// norm is `(sum_l |Q|^{-p/2} int_Q |W^{1/p} s_Q|^p)^{1/p}`.
pub fn m_discrete_norm(
    cover: &CoveringParams,
    w: &MatrixWeight,
    sp: &SmoothnessParams,
    c: &CoeffSeq,
    h: f64,
) -> Result<NormReport> {
    let p = sp.p;
    let mut contributions = Vec::new();
    for k in c.bands() {
        let mut acc = Neumaier::default();
        for (l, v) in c.band(k) {
            let q = Cube::from(cover.cube(k, l));
            if v.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                continue;
            }
            acc.add(q.volume().powf(-p / 2.0) * cube_mass(w, p, &q, v, h)?);
        }
        contributions.push((k, cover.r(k).powf(sp.s) * acc.value().powf(1.0 / p)));
    }
    let vals: Vec<f64> = contributions.iter().map(|c| c.1).collect();
    Ok(NormReport {
        value: lq_aggregate(&vals, sp.q),
        contributions,
        kind: "m(W)".into(),
    })
}

/// Scalar discrete norm of `t_{k,l} >= 0`:
/// `(sum_l |Q|^{1 - p/2} t^p)^{1/p}` per band, then `l_q`.
pub fn scalar_m_norm(
    cover: &CoveringParams,
    sp: &SmoothnessParams,
    t: &BTreeMap<(Ix, Ix), f64>,
) -> NormReport {
    let p = sp.p;
    let mut bands: Vec<Ix> = t.keys().map(|(k, _)| *k).collect();
    bands.dedup();
    bands.sort_by_key(Ix::order_key);
    let mut contributions = Vec::with_capacity(bands.len());
    for k in bands {
        let vol = cover.cube_side(k).powi(cover.dim as i32);
        let mut acc = Neumaier::default();
        for ((_, _), v) in t.range((k, Ix([i64::MIN, i64::MIN]))..=(k, Ix([i64::MAX, i64::MAX]))) {
            if *v != 0.0 {
                acc.add(vol.powf(1.0 - p / 2.0) * v.abs().powf(p));
            }
        }
        contributions.push((k, cover.r(k).powf(sp.s) * acc.value().powf(1.0 / p)));
    }
    let vals: Vec<f64> = contributions.iter().map(|c| c.1).collect();
    NormReport {
        value: lq_aggregate(&vals, sp.q),
        contributions,
        kind: "m scalar".into(),
    }
}

/// `t_{k,l} = |A_{Q(k,l)} s_{k,l}|`.
pub fn reduce_sequence(family: &ReducingFamily, c: &CoeffSeq) -> Result<BTreeMap<(Ix, Ix), f64>> {
    c.entries
        .iter()
        .map(|(&(k, l), v)| {
            Ok((
                (k, l),
                linalg::vec_norm(&linalg::mat_vec(family.get(k, l)?, v)),
            ))
        })
        .collect()
}

/// Reducing-operator norm: the scalar norm of `|A_Q s_Q|`.
pub fn m_reducing_norm(
    family: &ReducingFamily,
    cover: &CoveringParams,
    sp: &SmoothnessParams,
    c: &CoeffSeq,
) -> Result<NormReport> {
    let t = reduce_sequence(family, c)?;
    let mut rep = scalar_m_norm(cover, sp, &t);
    rep.kind = "m({A_Q})".into();
    Ok(rep)
}

/// `sum_l int_{Q(k,l)} |W^{1/p}(x) g(x_{k,l})|^p dx / ||g||^p_{L^p(W)}` for a
/// band-limited `g` given by its spectrum.
pub fn sampling_inequality_check(
    cover: &CoveringParams,
    w: &MatrixWeight,
    lpw: &LpWeightedNorm,
    k: Ix,
    g: &SpectralSignal,
    h: f64,
) -> Result<f64> {
    let p = lpw.p;
    let grid = g.grid;
    let rhs = lpw.norm(&inverse_ft(g)?)?.powf(p);
    if rhs == 0.0 {
        return Ok(0.0);
    }
    let (center, radius) = spectral_box(g);
    let room = grid.guard() - center[0].abs().max(center[1].abs());
    let bb = grid.band_box(center, radius.min(room))?;
    let coeffs: Vec<Vec<Complex64>> = (0..g.n()).map(|c| g.extract(c, &bb)).collect();
    let fac = inverse_factor(&grid);
    let mut lhs = Neumaier::default();
    for l in cover.l_range(k, grid.halfwidth) {
        let x = cover.x_kl(k, l);
        let v: Vec<Complex64> = coeffs
            .iter()
            .map(|cf| band_sum(&bb, cf, grid.dxi(), x) * fac)
            .collect();
        if linalg::vec_norm(&v) == 0.0 {
            continue;
        }
        lhs.add(cube_mass(w, p, &Cube::from(cover.cube(k, l)), &v, h)?);
    }
    Ok(lhs.value() / rhs)
}

/// Centre and half-width of the smallest cube holding the spectral support.
pub fn spectral_box(g: &SpectralSignal) -> (Point, f64) {
    let grid = g.grid;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for j in 0..grid.len() {
        if g.components
            .iter()
            .any(|c| c[j] != Complex64::new(0.0, 0.0))
        {
            let xi = grid.freq(j);
            for a in 0..grid.dim {
                lo[a] = lo[a].min(xi[a]);
                hi[a] = hi[a].max(xi[a]);
            }
        }
    }
    if lo[0] > hi[0] {
        return ([0.0, 0.0], grid.dxi());
    }
    let mut c = [0.0; 2];
    let mut r: f64 = 0.0;
    for a in 0..grid.dim {
        c[a] = 0.5 * (lo[a] + hi[a]);
        r = r.max(0.5 * (hi[a] - lo[a]));
    }
    (c, r + grid.dxi())
}

/// Smallest `R` with the spectrum supported in `|xi|_inf <= R`.
pub fn spectral_reach(g: &SpectralSignal) -> f64 {
    let grid = g.grid;
    let mut r: f64 = 0.0;
    for j in 0..grid.len() {
        if g.components
            .iter()
            .any(|c| c[j] != Complex64::new(0.0, 0.0))
        {
            let xi = grid.freq(j);
            r = r.max(xi[0].abs().max(xi[1].abs()));
        }
    }
    r + grid.dxi()
}

/// Largest derivative order accepted by [`schwartz_seminorm`].
pub const MAX_SEMINORM_ORDER: usize = 4;

/// `p_d(f) = max_{|beta| <= d} sup_x (1 + |x|)^d |d^beta f(x)|` over the grid,
/// derivatives by spectral differentiation.
pub fn schwartz_seminorm(f: &VectorSignal, d: usize) -> Result<f64> {
    if d > MAX_SEMINORM_ORDER {
        return Err(Error::Resolution(format!(
            "derivative order {d} exceeds {MAX_SEMINORM_ORDER}"
        )));
    }
    let grid = f.grid;
    let spec = forward_ft(f)?;
    if d > 0 {
        let peak = spec.max_abs();
        let g = grid.guard();
        let mut tail: f64 = 0.0;
        for j in 0..grid.len() {
            let xi = grid.freq(j);
            if xi[0].abs() > g || xi[1].abs() > g {
                for c in &spec.components {
                    tail = tail.max(c[j].norm());
                }
            }
        }
        if tail > 1e-10 * peak {
            return Err(Error::Resolution(format!(
                "spectrum not resolved for derivatives: tail/peak = {:.2e}",
                tail / peak
            )));
        }
    }
    let mut multi = Vec::new();
    for a in 0..=d {
        for b in 0..=(if grid.dim == 2 { d - a } else { 0 }) {
            multi.push([a as i32, b as i32]);
        }
    }
    let mut best: f64 = 0.0;
    for beta in multi {
        let deriv = spec.multiply(|xi| {
            Complex64::new(0.0, xi[0]).powi(beta[0]) * Complex64::new(0.0, xi[1]).powi(beta[1])
        });
        let df = if beta == [0, 0] {
            f.clone()
        } else {
            inverse_ft(&deriv)?
        };
        for j in 0..grid.len() {
            let x = grid.node(j);
            let wgt = (1.0 + (x[0] * x[0] + x[1] * x[1]).sqrt()).powi(d as i32);
            let v: Vec<Complex64> = df.components.iter().map(|c| c[j]).collect();
            best = best.max(wgt * linalg::vec_norm(&v));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// `(|k|, <k>, ||theta_k(D) f||_{L^p(W)})` used in the fit.
    pub samples: Vec<(f64, f64, f64)>,
    pub c: f64,
    pub exponent: f64,
    /// `L / (1 - alpha)`.
    pub target: f64,
}

/// Fit `||theta_k(D) f||_{L^p(W)} ~ c <k>^{-e}` over bands with `|k| in [kmin, kmax]`.
pub fn embedding_decay_check(
    system: &BapuSystem,
    table: &BandTable,
    lpw: &LpWeightedNorm,
    f: &SpectralSignal,
    l: f64,
    kmin: f64,
) -> Result<DecayFit> {
    let mut samples = Vec::new();
    for band in &table.bands {
        let kn = band.k.norm();
        if kn < kmin {
            continue;
        }
        let piece = table.band_pass(band, f);
        let v = lpw.norm(&inverse_ft(&piece)?)?;
        samples.push((kn, crate::covering::bracket(band.k.as_point()), v));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.2 > 0.0)
        .map(|s| (s.1.ln(), s.2.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit(
            "fewer than two nonzero band norms in the fit range".into(),
        ));
    }
    let (slope, icpt) = least_squares_line(&pts);
    Ok(DecayFit {
        samples,
        c: icpt.exp(),
        exponent: -slope,
        target: l / (1.0 - system.params.alpha),
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b)`.
pub fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// `[min, max]` of a set of ratios.
pub fn bracket_of(ratios: &[f64]) -> (f64, f64) {
    ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| {
        (lo.min(r), hi.max(r))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bapu::{Profile, Window};
    use crate::grid::{closed_form_spectrum, random_wave_packets, sample_closed_form, SignalSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn gauss_grid() -> Grid {
        Grid::new(1, 16.0 * PI, 1024).unwrap()
    }

    #[test]
    fn lp_examples() {
        let g = gauss_grid();
        let f = sample_closed_form(
            &SignalSpec::Gaussian {
                sigma: 1.0,
                center: [0.0; 2],
            },
            g,
            1,
        )
        .unwrap();
        let v = lp_w_norm(&MatrixWeight::identity(1, 1), 2.0, &f).unwrap();
        assert!((v - PI.powf(0.25)).abs() < 1e-6, "{v}");
        assert_eq!(
            lp_w_norm(
                &MatrixWeight::identity(1, 1),
                2.0,
                &VectorSignal::zeros(g, 1)
            )
            .unwrap(),
            0.0
        );
        assert!(LpWeightedNorm::unweighted(0.5, g, 1).is_err());

        // Constant weight: ||D^{1/2} f|| after the change of basis.
        let d = linalg::from_real(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let w = MatrixWeight::constant(1, d.clone()).unwrap();
        let f2 = sample_closed_form(
            &SignalSpec::WhiteNoise { seed: 5 },
            Grid::new(1, 4.0, 64).unwrap(),
            2,
        )
        .unwrap();
        let root = linalg::hermitian_power(&d, 0.5).unwrap();
        let mapped = VectorSignal::from_fn(f2.grid, 2, |c, _| Complex64::new(0.0, 0.0) * c as f64);
        let mut mapped = mapped;
        for j in 0..f2.grid.len() {
            let v = linalg::mat_vec(&root, &[f2.components[0][j], f2.components[1][j]]);
            mapped.components[0][j] = v[0];
            mapped.components[1][j] = v[1];
        }
        let a = lp_w_norm(&w, 2.0, &f2).unwrap();
        let b = mapped.l2_norm();
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn discrete_single_entry_examples() {
        let cover = CoveringParams::with_constants(0.0, 1, 1.0, PI, 4).unwrap();
        let id = MatrixWeight::identity(1, 1);
        for (s, p) in [(0.0, 1.0), (1.5, 2.0), (-2.0, 3.0)] {
            let sp = SmoothnessParams::new(0.0, s, p, Q::Finite(2.0)).unwrap();
            let mut c = CoeffSeq::new(1);
            c.insert(Ix::d1(2), Ix::d1(-3), vec![Complex64::new(1.0, 0.0)]);
            let v = m_discrete_norm(&cover, &id, &sp, &c, 0.1).unwrap().value;
            assert!((v - 1.0).abs() < 1e-12);
        }
        let w = MatrixWeight::bracket_power(1, vec![0.0, 2.0]).unwrap();
        let sp = SmoothnessParams::new(0.0, 0.0, 2.0, Q::Finite(1.0)).unwrap();
        let mut c = CoeffSeq::new(2);
        c.insert(
            Ix::ZERO,
            Ix::ZERO,
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        );
        let v = m_discrete_norm(&cover, &w, &sp, &c, 0.05).unwrap().value;
        assert!((v - 2.0 / 3f64.sqrt()).abs() < 1e-6, "{v}");
        assert_eq!(
            m_discrete_norm(&cover, &w, &sp, &CoeffSeq::new(2), 0.05)
                .unwrap()
                .value,
            0.0
        );
        assert!(matches!(
            m_discrete_norm(&cover, &w, &sp, &c, 0.6),
            Err(Error::Quadrature(_))
        ));
    }

    #[test]
    fn single_band_identity() {
        // alpha = 3/4: only phi_2 is nonzero on (7.1, 39.2).
        let g = Grid::new(1, 10.0 * PI, 1024).unwrap();
        let sys = BapuSystem::new(CoveringParams::new(0.75, 1, 2).unwrap(), Profile::default());
        let k0 = Ix::d1(2);
        assert_eq!(sys.psi(k0, [20.0, 0.0]).unwrap(), 1.0);
        let table = sys.table(g, Window::Psi).unwrap();
        let spec = SignalSpec::ModulatedGaussian {
            sigma: 1.0,
            xi0: [23.0, 0.0],
            center: [0.5, 0.0],
        };
        let f = closed_form_spectrum(&spec, g, 1).unwrap().multiply(|xi| {
            Complex64::new(
                if (8.0..38.0).contains(&xi[0]) {
                    1.0
                } else {
                    0.0
                },
                0.0,
            )
        });
        let lpw = LpWeightedNorm::unweighted(2.0, g, 1).unwrap();
        let sp = SmoothnessParams::new(0.75, 1.3, 2.0, Q::Finite(1.5)).unwrap();
        let m = m_continuous_norm(&sys, &table, &lpw, &sp, &f)
            .unwrap()
            .value;
        let direct = sys.params.r(k0).powf(1.3) * lpw.norm(&inverse_ft(&f).unwrap()).unwrap();
        assert!((m - direct).abs() <= 1e-12 * direct, "{m} {direct}");
        let zero = SpectralSignal::zeros(g, 1);
        assert_eq!(
            m_continuous_norm(&sys, &table, &lpw, &sp, &zero)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn connect_identity_and_independent_scalar_norm() {
        let cover = CoveringParams::new(0.5, 1, 3).unwrap();
        let w = MatrixWeight::rotated_power(1, 0.3, vec![0.5, 0.2], 0.1).unwrap();
        let sp = SmoothnessParams::new(0.5, 0.7, 2.0, Q::Finite(1.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = CoeffSeq::new(2);
        for k in -2..=2 {
            for l in -3..=3 {
                c.insert(
                    Ix::d1(k),
                    Ix::d1(l),
                    (0..2)
                        .map(|_| Complex64::new(rng.gen(), rng.gen()))
                        .collect(),
                );
            }
        }
        let fam = ReducingFamily::build(
            &w,
            2.0,
            &cover,
            c.entries.keys().copied(),
            crate::weights::ReducingMethod::ExactP2,
            0.01,
        )
        .unwrap();
        let a = m_reducing_norm(&fam, &cover, &sp, &c).unwrap().value;
        let t = reduce_sequence(&fam, &c).unwrap();
        let b = scalar_m_norm(&cover, &sp, &t).value;
        assert!((a - b).abs() <= 1e-14 * a);
        // Independent evaluation of the scalar norm by integrating the step function.
        let mut per_k = Vec::new();
        for k in -2..=2 {
            let k = Ix::d1(k);
            let side = cover.cube_side(k);
            let mut integral = 0.0;
            for l in -3..=3 {
                let tv = t[&(k, Ix::d1(l))];
                integral += side * (side.powf(-0.5) * tv).powf(2.0);
            }
            per_k.push(cover.r(k).powf(0.7) * integral.sqrt());
        }
        let direct = per_k
            .iter()
            .map(|v| v.powf(1.5))
            .sum::<f64>()
            .powf(1.0 / 1.5);
        assert!((direct - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn seminorm_examples() {
        let g = gauss_grid();
        let f = sample_closed_form(
            &SignalSpec::Gaussian {
                sigma: 1.0,
                center: [0.0; 2],
            },
            g,
            1,
        )
        .unwrap();
        assert!((schwartz_seminorm(&f, 0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            schwartz_seminorm(&VectorSignal::zeros(g, 1), 2).unwrap(),
            0.0
        );
        assert!(schwartz_seminorm(&f, 5).is_err());
        // p_1 = max(sup (1+|x|) e^{-x^2/2}, sup (1+|x|) |x| e^{-x^2/2}).
        let p1 = schwartz_seminorm(&f, 1).unwrap();
        let oracle = (0..200000)
            .map(|i| i as f64 * 1e-4)
            .map(|x| (1.0 + x) * (-x * x / 2.0f64).exp() * x.max(1.0))
            .fold(0.0, f64::max);
        assert!((p1 - oracle).abs() < 1e-3 * oracle, "{p1} {oracle}");
    }

    #[test]
    fn gaussian_embedding_decay() {
        let g = Grid::new(1, 16.0 * PI, 4096).unwrap();
        let sys = BapuSystem::new(CoveringParams::new(0.5, 1, 8).unwrap(), Profile::default());
        let table = sys.table(g, Window::Theta).unwrap();
        let f = closed_form_spectrum(
            &SignalSpec::Gaussian {
                sigma: 0.25,
                center: [0.0; 2],
            },
            g,
            1,
        )
        .unwrap();
        let lpw = LpWeightedNorm::unweighted(2.0, g, 1).unwrap();
        let fit = embedding_decay_check(&sys, &table, &lpw, &f, 4.0, 4.0).unwrap();
        assert!(fit.exponent >= 0.9 * fit.target, "{fit:?}");
    }

    proptest! {
        #[test]
        fn homogeneity(lambda in -5.0f64..5.0, seed in 0u64..100) {
            let g = Grid::new(1, 30.0, 256).unwrap();
            let sys = BapuSystem::new(CoveringParams::new(0.0, 1, 4).unwrap(), Profile::default());
            let table = sys.table(g, Window::Psi).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_wave_packets(g, 1, 3.0, 2, &mut rng).unwrap();
            let w = MatrixWeight::scalar(1, "bracket_pow:0.5").unwrap();
            let lpw = LpWeightedNorm::new(&w, 2.0, g).unwrap();
            let sp = SmoothnessParams::new(0.0, 0.5, 2.0, Q::Finite(1.0)).unwrap();
            let a = m_continuous_norm(&sys, &table, &lpw, &sp, &f).unwrap().value;
            let b = m_continuous_norm(&sys, &table, &lpw, &sp, &f.scale(Complex64::new(lambda, 0.0))).unwrap().value;
            prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * (1.0 + b));
        }

        #[test]
        fn lq_monotone(vals in proptest::collection::vec(0.0f64..10.0, 1..20), q1 in 0.3f64..4.0, dq in 0.0f64..4.0) {
            let a = lq_aggregate(&vals, Q::Finite(q1));
            let b = lq_aggregate(&vals, Q::Finite(q1 + dq));
            let c = lq_aggregate(&vals, Q::Infinity);
            prop_assert!(a >= b * (1.0 - 1e-12));
            prop_assert!(b >= c * (1.0 - 1e-12));
        }

        #[test]
        fn sampling_ratio_homogeneous(lambda in 0.1f64..10.0, seed in 0u64..50) {
            let g = Grid::new(1, 40.0, 512).unwrap();
            let cover = CoveringParams::new(0.0, 1, 4).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_wave_packets(g, 1, 1.4, 1, &mut rng).unwrap();
            let lpw = LpWeightedNorm::unweighted(2.0, g, 1).unwrap();
            let id = MatrixWeight::identity(1, 1);
            let a = sampling_inequality_check(&cover, &id, &lpw, Ix::ZERO, &f, 0.1).unwrap();
            let b = sampling_inequality_check(&cover, &id, &lpw, Ix::ZERO, &f.scale(Complex64::new(lambda, 0.0)), 0.1).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a);
        }
    }
}
