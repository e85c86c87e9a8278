//! Periodic sampling grid on `[-T, T)^n` with a unitary discrete Fourier
//! transform.
//!
//! Nodes are `x_j = -T + j h` with `h = 2T/M`; frequency nodes are `m dxi`
//! with `dxi = pi/T` and `m` in `[-M/2, M/2)`. Spectra are stored in FFT order
//! (index `i` holds `m = i` for `i < M/2`, `m = i - M` otherwise). Flat
//! indices are axis-major: `i = i0 * M + i1` in two dimensions.
//!
//! The forward transform is the Riemann sum
//! `(2 pi)^{-n/2} h^n sum_j f(x_j) exp(-i x_j . xi_m)`, the inverse is the
//! matching sum over frequency nodes with weight `dxi^n`. Together they are
//! exact inverses and preserve the grid L^2 norms.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{param, Error, Result};

pub type Point = [f64; 2];

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub halfwidth: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(dim: usize, halfwidth: f64, points: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return param(format!("dimension must be 1 or 2, got {dim}"));
        }
        if !(halfwidth > 0.0) || !halfwidth.is_finite() {
            return param(format!("halfwidth must be positive, got {halfwidth}"));
        }
        if points < 2 || !points.is_multiple_of(2) {
            return param(format!(
                "points per axis must be even and >= 2, got {points}"
            ));
        }
        Ok(Self {
            dim,
            halfwidth,
            points,
        })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.halfwidth / self.points as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.halfwidth
    }

    /// Nyquist bound `pi / h`.
    pub fn xi_max(&self) -> f64 {
        PI / self.h()
    }

    /// Frequency objects must stay inside `|xi|_inf <= guard()`.
    pub fn guard(&self) -> f64 {
        0.9 * self.xi_max()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn dual_cell_volume(&self) -> f64 {
        self.dxi().powi(self.dim as i32)
    }

    fn split(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.points, flat % self.points]
        }
    }

    pub fn node(&self, flat: usize) -> Point {
        let [i0, i1] = self.split(flat);
        let h = self.h();
        let x0 = -self.halfwidth + i0 as f64 * h;
        if self.dim == 1 {
            [x0, 0.0]
        } else {
            [x0, -self.halfwidth + i1 as f64 * h]
        }
    }

    /// Signed frequency integer for an FFT-order axis index.
    pub fn axis_freq(&self, i: usize) -> i64 {
        let m = self.points as i64;
        let i = i as i64;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    /// FFT-order axis index of a signed frequency integer.
    pub fn axis_index(&self, m: i64) -> Option<usize> {
        let half = self.points as i64 / 2;
        if m < -half || m >= half {
            return None;
        }
        Some(if m >= 0 {
            m as usize
        } else {
            (m + self.points as i64) as usize
        })
    }

    pub fn freq_int(&self, flat: usize) -> [i64; 2] {
        let [i0, i1] = self.split(flat);
        if self.dim == 1 {
            [self.axis_freq(i0), 0]
        } else {
            [self.axis_freq(i0), self.axis_freq(i1)]
        }
    }

    pub fn freq(&self, flat: usize) -> Point {
        let [m0, m1] = self.freq_int(flat);
        let d = self.dxi();
        [m0 as f64 * d, m1 as f64 * d]
    }

    pub fn freq_flat(&self, m: [i64; 2]) -> Option<usize> {
        let i0 = self.axis_index(m[0])?;
        if self.dim == 1 {
            return (m[1] == 0).then_some(i0);
        }
        let i1 = self.axis_index(m[1])?;
        Some(i0 * self.points + i1)
    }

    /// Smallest box of frequency integers containing `|xi - center|_inf <= radius`,
    /// or a resolution error if it leaves the guard band.
    pub fn band_box(&self, center: Point, radius: f64) -> Result<BandBox> {
        let g = self.guard();
        for a in 0..self.dim {
            if (center[a] - radius) < -g || (center[a] + radius) > g {
                return Err(Error::Resolution(format!(
                    "band exceeds guard band: centre {:.4}, radius {:.4}, guard {:.4}",
                    center[a], radius, g
                )));
            }
        }
        let d = self.dxi();
        let mut lo = [0i64; 2];
        let mut hi = [0i64; 2];
        for a in 0..self.dim {
            lo[a] = ((center[a] - radius) / d).floor() as i64;
            hi[a] = ((center[a] + radius) / d).ceil() as i64;
        }
        Ok(BandBox {
            dim: self.dim,
            lo,
            hi,
        })
    }
}

/// Inclusive box `lo..=hi` of frequency integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandBox {
    pub dim: usize,
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl BandBox {
    pub fn extent(&self, axis: usize) -> usize {
        if axis >= self.dim {
            1
        } else {
            (self.hi[axis] - self.lo[axis] + 1) as usize
        }
    }

    pub fn len(&self) -> usize {
        self.extent(0) * self.extent(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frequency integers in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        let e1 = self.extent(1);
        (0..self.len()).map(move |i| {
            let m0 = self.lo[0] + (i / e1) as i64;
            let m1 = if self.dim == 1 {
                0
            } else {
                self.lo[1] + (i % e1) as i64
            };
            [m0, m1]
        })
    }
}

/// Evaluate `sum_m c_m exp(i x . m dxi)` over a band box by nested Horner
/// recursion. `coeffs` follows `BandBox::iter` order.
pub fn band_sum(bb: &BandBox, coeffs: &[Complex64], dxi: f64, x: Point) -> Complex64 {
    let z0 = Complex64::from_polar(1.0, x[0] * dxi);
    let shift0 = Complex64::from_polar(1.0, x[0] * dxi * bb.lo[0] as f64);
    if bb.dim == 1 {
        let mut acc = ZERO;
        for c in coeffs.iter().rev() {
            acc = acc * z0 + c;
        }
        return acc * shift0;
    }
    let e1 = bb.extent(1);
    let z1 = Complex64::from_polar(1.0, x[1] * dxi);
    let shift1 = Complex64::from_polar(1.0, x[1] * dxi * bb.lo[1] as f64);
    let mut acc = ZERO;
    for row in coeffs.chunks(e1).rev() {
        let mut inner = ZERO;
        for c in row.iter().rev() {
            inner = inner * z1 + c;
        }
        acc = acc * z0 + inner;
    }
    acc * shift0 * shift1
}

/// `N` complex components sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSignal {
    pub grid: Grid,
    pub components: Vec<Vec<Complex64>>,
}

/// `N` complex components sampled at the frequency nodes, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignal {
    pub grid: Grid,
    pub components: Vec<Vec<Complex64>>,
}

fn check_shape(grid: &Grid, comps: &[Vec<Complex64>]) -> Result<()> {
    if comps.is_empty() {
        return Err(Error::Structural(
            "signal needs at least one component".into(),
        ));
    }
    let len = grid.len();
    if let Some(bad) = comps.iter().position(|c| c.len() != len) {
        return Err(Error::Structural(format!(
            "component {bad} has {} samples, grid has {len}",
            comps[bad].len()
        )));
    }
    Ok(())
}

macro_rules! signal_common {
    ($t:ty) => {
        impl $t {
            pub fn new(grid: Grid, components: Vec<Vec<Complex64>>) -> Result<Self> {
                check_shape(&grid, &components)?;
                Ok(Self { grid, components })
            }

            pub fn zeros(grid: Grid, n: usize) -> Self {
                Self {
                    grid,
                    components: vec![vec![ZERO; grid.len()]; n.max(1)],
                }
            }

            pub fn n(&self) -> usize {
                self.components.len()
            }

            pub fn scale(&self, s: Complex64) -> Self {
                let components = self
                    .components
                    .iter()
                    .map(|c| c.iter().map(|z| z * s).collect())
                    .collect();
                Self {
                    grid: self.grid,
                    components,
                }
            }

            pub fn axpy(&self, a: Complex64, other: &Self) -> Result<Self> {
                if other.grid != self.grid || other.n() != self.n() {
                    return Err(Error::Structural("signal shapes differ".into()));
                }
                let components = self
                    .components
                    .iter()
                    .zip(&other.components)
                    .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + a * v).collect())
                    .collect();
                Ok(Self {
                    grid: self.grid,
                    components,
                })
            }

            pub fn max_abs(&self) -> f64 {
                self.components
                    .iter()
                    .flat_map(|c| c.iter().map(|z| z.norm()))
                    .fold(0.0, f64::max)
            }
        }
    };
}

signal_common!(VectorSignal);
signal_common!(SpectralSignal);

impl VectorSignal {
    pub fn from_fn(grid: Grid, n: usize, mut f: impl FnMut(usize, Point) -> Complex64) -> Self {
        let components = (0..n.max(1))
            .map(|c| (0..grid.len()).map(|j| f(c, grid.node(j))).collect())
            .collect();
        Self { grid, components }
    }

    /// Grid L^2 norm `(h^n sum |f|^2)^{1/2}` over all components.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = crate::sum::Neumaier::default();
        for c in &self.components {
            for z in c {
                acc.add(z.norm_sqr());
            }
        }
        (acc.value() * self.grid.cell_volume()).sqrt()
    }

    /// `h^n sum_j <f(x_j), g(x_j)>` (linear in `self`).
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if other.grid != self.grid || other.n() != self.n() {
            return Err(Error::Structural("signal shapes differ".into()));
        }
        let mut re = crate::sum::Neumaier::default();
        let mut im = crate::sum::Neumaier::default();
        for (a, b) in self.components.iter().zip(&other.components) {
            for (u, v) in a.iter().zip(b) {
                let w = u * v.conj();
                re.add(w.re);
                im.add(w.im);
            }
        }
        Ok(Complex64::new(re.value(), im.value()) * self.grid.cell_volume())
    }
}

impl SpectralSignal {
    /// Frequency-side L^2 norm `(dxi^n sum |F|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = crate::sum::Neumaier::default();
        for c in &self.components {
            for z in c {
                acc.add(z.norm_sqr());
            }
        }
        (acc.value() * self.grid.dual_cell_volume()).sqrt()
    }

    pub fn from_fn(grid: Grid, n: usize, mut f: impl FnMut(usize, Point) -> Complex64) -> Self {
        let components = (0..n.max(1))
            .map(|c| (0..grid.len()).map(|j| f(c, grid.freq(j))).collect())
            .collect();
        Self { grid, components }
    }

    /// Pointwise multiplication by a scalar symbol of the frequency node.
    pub fn multiply(&self, mut m: impl FnMut(Point) -> Complex64) -> Self {
        let sym: Vec<Complex64> = (0..self.grid.len()).map(|j| m(self.grid.freq(j))).collect();
        let components = self
            .components
            .iter()
            .map(|c| c.iter().zip(&sym).map(|(z, s)| z * s).collect())
            .collect();
        Self {
            grid: self.grid,
            components,
        }
    }

    /// Trigonometric interpolant of the inverse transform at an arbitrary point.
    pub fn eval_at(&self, comp: usize, x: Point) -> Complex64 {
        let g = &self.grid;
        let d = g.dxi();
        let mut re = crate::sum::Neumaier::default();
        let mut im = crate::sum::Neumaier::default();
        for (j, z) in self.components[comp].iter().enumerate() {
            if *z == ZERO {
                continue;
            }
            let m = g.freq_int(j);
            let ph = Complex64::from_polar(1.0, d * (x[0] * m[0] as f64 + x[1] * m[1] as f64));
            let w = z * ph;
            re.add(w.re);
            im.add(w.im);
        }
        Complex64::new(re.value(), im.value()) * inverse_factor(g)
    }

    /// Coefficients of one component restricted to a band box, `BandBox::iter` order.
    pub fn extract(&self, comp: usize, bb: &BandBox) -> Vec<Complex64> {
        bb.iter()
            .map(|m| match self.grid.freq_flat(m) {
                Some(j) => self.components[comp][j],
                None => ZERO,
            })
            .collect()
    }
}

fn forward_factor(g: &Grid) -> f64 {
    (g.h() / (2.0 * PI).sqrt()).powi(g.dim as i32)
}

pub(crate) fn inverse_factor(g: &Grid) -> f64 {
    (g.dxi() / (2.0 * PI).sqrt()).powi(g.dim as i32)
}

fn alternating_sign(g: &Grid, flat: usize) -> f64 {
    let [m0, m1] = g.freq_int(flat);
    if (m0 + m1).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn fft_in_place(g: &Grid, data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let m = g.points;
    let fft = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    if g.dim == 1 {
        fft.process(data);
        return;
    }
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![ZERO; m];
    for c in 0..m {
        for r in 0..m {
            col[r] = data[r * m + c];
        }
        fft.process(&mut col);
        for r in 0..m {
            data[r * m + c] = col[r];
        }
    }
}

pub fn forward_ft(f: &VectorSignal) -> Result<SpectralSignal> {
    check_shape(&f.grid, &f.components)?;
    let g = f.grid;
    let c = forward_factor(&g);
    let components = f
        .components
        .iter()
        .map(|comp| {
            let mut data = comp.clone();
            fft_in_place(&g, &mut data, false);
            for (j, z) in data.iter_mut().enumerate() {
                *z *= c * alternating_sign(&g, j);
            }
            data
        })
        .collect();
    Ok(SpectralSignal {
        grid: g,
        components,
    })
}

pub fn inverse_ft(s: &SpectralSignal) -> Result<VectorSignal> {
    check_shape(&s.grid, &s.components)?;
    let g = s.grid;
    let c = inverse_factor(&g);
    let components = s
        .components
        .iter()
        .map(|comp| {
            let mut data: Vec<Complex64> = comp
                .iter()
                .enumerate()
                .map(|(j, z)| z * alternating_sign(&g, j))
                .collect();
            fft_in_place(&g, &mut data, true);
            for z in data.iter_mut() {
                *z *= c;
            }
            data
        })
        .collect();
    Ok(VectorSignal {
        grid: g,
        components,
    })
}

/// Test-signal registry.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    Zero,
    Gaussian {
        sigma: f64,
        center: Point,
    },
    ModulatedGaussian {
        sigma: f64,
        xi0: Point,
        center: Point,
    },
    /// `exp(-|x|^2 / 2 sigma^2) exp(i rate |x|^2)`.
    Chirp {
        sigma: f64,
        rate: f64,
    },
    /// Compactly supported `exp(1 - 1/(1 - |x/R|^2))`.
    Bump {
        radius: f64,
    },
    WhiteNoise {
        seed: u64,
    },
}

impl SignalSpec {
    pub const NAMES: [&'static str; 6] = [
        "zero",
        "gaussian",
        "modulated_gaussian",
        "chirp",
        "bump",
        "white_noise",
    ];

    /// Build from a registry name and a parameter map. Missing parameters
    /// take defaults (`sigma = 1`, `xi0 = 0`, `rate = 0.1`, `radius = 1`, `seed = 0`).
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
        let center = [get("x0", 0.0), get("x1", 0.0)];
        let spec = match name {
            "zero" => Self::Zero,
            "gaussian" => Self::Gaussian {
                sigma: get("sigma", 1.0),
                center,
            },
            "modulated_gaussian" => Self::ModulatedGaussian {
                sigma: get("sigma", 1.0),
                xi0: [get("xi0", 0.0), get("xi1", 0.0)],
                center,
            },
            "chirp" => Self::Chirp {
                sigma: get("sigma", 1.0),
                rate: get("rate", 0.1),
            },
            "bump" => Self::Bump {
                radius: get("radius", 1.0),
            },
            "white_noise" => Self::WhiteNoise {
                seed: get("seed", 0.0) as u64,
            },
            other => return Err(Error::Registry(other.to_string())),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { sigma, .. }
            | Self::ModulatedGaussian { sigma, .. }
            | Self::Chirp { sigma, .. }
                if !(sigma > 0.0) =>
            {
                param(format!("sigma must be positive, got {sigma}"))
            }
            Self::Bump { radius } if !(radius > 0.0) => {
                param(format!("radius must be positive, got {radius}"))
            }
            _ => Ok(()),
        }
    }

    /// Pointwise value; `None` for white noise.
    pub fn eval(&self, x: Point) -> Option<Complex64> {
        let gauss = |sigma: f64, c: Point| {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            (-d2 / (2.0 * sigma * sigma)).exp()
        };
        Some(match *self {
            Self::Zero => ZERO,
            Self::Gaussian { sigma, center } => Complex64::new(gauss(sigma, center), 0.0),
            Self::ModulatedGaussian { sigma, xi0, center } => {
                Complex64::from_polar(gauss(sigma, center), xi0[0] * x[0] + xi0[1] * x[1])
            }
            Self::Chirp { sigma, rate } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                Complex64::from_polar(gauss(sigma, [0.0, 0.0]), rate * r2)
            }
            Self::Bump { radius } => {
                let u2 = (x[0] * x[0] + x[1] * x[1]) / (radius * radius);
                if u2 < 1.0 {
                    Complex64::new((1.0 - 1.0 / (1.0 - u2)).exp(), 0.0)
                } else {
                    ZERO
                }
            }
            Self::WhiteNoise { .. } => return None,
        })
    }

    /// Closed-form continuous transform for the Gaussian family, used where
    /// FFT round-off would mask super-polynomial decay.
    pub fn closed_form_spectrum(&self, dim: usize, xi: Point) -> Option<Complex64> {
        let g = |sigma: f64, shift: Point, center: Point| {
            let d2 = (xi[0] - shift[0]).powi(2) + (xi[1] - shift[1]).powi(2);
            let amp = sigma.powi(dim as i32) * (-sigma * sigma * d2 / 2.0).exp();
            Complex64::from_polar(
                amp,
                -(center[0] * (xi[0] - shift[0]) + center[1] * (xi[1] - shift[1])),
            )
        };
        match *self {
            Self::Zero => Some(ZERO),
            Self::Gaussian { sigma, center } => Some(g(sigma, [0.0, 0.0], center)),
            Self::ModulatedGaussian { sigma, xi0, center } => Some(g(sigma, xi0, center)),
            _ => None,
        }
    }
}

/// Sample a registry signal on the grid. Every component receives the same
/// deterministic samples, except white noise which draws each component
/// independently from the seeded stream.
pub fn sample_closed_form(spec: &SignalSpec, grid: Grid, n: usize) -> Result<VectorSignal> {
    if n == 0 {
        return param("vector size N must be >= 1");
    }
    if let SignalSpec::WhiteNoise { seed } = *spec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let components = (0..n)
            .map(|_| {
                (0..grid.len())
                    .map(|_| {
                        Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
                    })
                    .collect()
            })
            .collect();
        return Ok(VectorSignal { grid, components });
    }
    Ok(VectorSignal::from_fn(grid, n, |_, x| {
        spec.eval(x).unwrap_or(ZERO)
    }))
}

/// Spectrum of a registry signal from its closed form (Gaussian family only).
pub fn closed_form_spectrum(spec: &SignalSpec, grid: Grid, n: usize) -> Result<SpectralSignal> {
    if spec.closed_form_spectrum(grid.dim, [0.0, 0.0]).is_none() {
        return Err(Error::Registry(format!(
            "{spec:?} has no closed-form spectrum"
        )));
    }
    Ok(SpectralSignal::from_fn(grid, n, |_, xi| {
        spec.closed_form_spectrum(grid.dim, xi).unwrap_or(ZERO)
    }))
}

/// Random sums of Gaussian wave packets whose spectra sit inside
/// `|xi|_inf <= band` (the spectral tail at the band edge is below e^-32) and
/// whose time centres lie in `|x|_inf <= T/8`. Spectra are built in closed
/// form and zeroed outside the band, so the result is exactly band-limited
/// on the grid.
pub fn random_wave_packets(
    grid: Grid,
    n: usize,
    band: f64,
    packets: usize,
    rng: &mut impl Rng,
) -> Result<SpectralSignal> {
    random_wave_packets_at(grid, n, [0.0, 0.0], band, packets, rng)
}

/// As [`random_wave_packets`] with the spectra inside `|xi - center|_inf <= band`.
pub fn random_wave_packets_at(
    grid: Grid,
    n: usize,
    center: Point,
    band: f64,
    packets: usize,
    rng: &mut impl Rng,
) -> Result<SpectralSignal> {
    let reach_inf = (0..grid.dim).map(|a| center[a].abs()).fold(0.0, f64::max) + band;
    if !(band > 0.0) || reach_inf > grid.guard() {
        return Err(Error::Resolution(format!(
            "band exceeds guard band: reach {reach_inf:.4}, guard {:.4}",
            grid.guard()
        )));
    }
    let t8 = grid.halfwidth / 8.0;
    let mut out = SpectralSignal::zeros(grid, n);
    for comp in 0..n.max(1) {
        for _ in 0..packets.max(1) {
            // Spectral width 1/sigma with an 8/sigma margin from the band edge.
            let sigma_min = (16.0 / band).max(0.5);
            let sigma = rng.gen_range(sigma_min..sigma_min * 4.0);
            let reach = band - 8.0 / sigma;
            let mut xi0 = [0.0; 2];
            let mut c = [0.0; 2];
            for a in 0..grid.dim {
                xi0[a] = center[a]
                    + if reach > 0.0 {
                        rng.gen_range(-reach..reach)
                    } else {
                        0.0
                    };
                c[a] = rng.gen_range(-t8..t8);
            }
            let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let spec = SignalSpec::ModulatedGaussian {
                sigma,
                xi0,
                center: c,
            };
            for j in 0..grid.len() {
                let xi = grid.freq(j);
                if (xi[0] - center[0]).abs() > band || (xi[1] - center[1]).abs() > band {
                    continue;
                }
                out.components[comp][j] +=
                    amp * spec.closed_form_spectrum(grid.dim, xi).unwrap_or(ZERO);
            }
        }
    }
    Ok(out)
}
