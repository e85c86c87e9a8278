//! Smooth windows `phi_k`, the partition of unity `psi_k` and its square-root
//! system `theta_k`.
//!
//! Normalising sums run over every patch whose window reaches `xi` (the
//! family is locally finite), so `sum psi_k = 1` and `sum theta_k^2 = 1` hold
//! wherever all contributing indices lie in the truncated set. That region is
//! the renormalization domain; `renorm_halfwidth` gives an inscribed box.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::covering::{dist, patches_within, CoveringParams, Ix};
use crate::error::{param, Error, Result};
use crate::grid::{inverse_ft, BandBox, Grid, Point, SpectralSignal, VectorSignal};

/// Window support radius in units of `c1 r_k`.
pub const SUPPORT: f64 = 1.5;

const DENOM_FLOOR: f64 = 1e-14;

/// Radial cutoff equal to 1 on `[0, 1]` and 0 on `[1.5, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// `e(1-u) / (e(1-u) + e(u))` with `e(t) = exp(-1/t)`; C-infinity.
    #[default]
    SmoothStep,
    /// `exp(1 - 1/(1 - u^2))` on the transition; only C^1 at the inner edge.
    Bump,
    /// Quintic smoothstep `1 - (10u^3 - 15u^4 + 6u^5)`; C^2.
    Polynomial,
}

impl Profile {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "smooth_step" => Ok(Self::SmoothStep),
            "bump" => Ok(Self::Bump),
            "polynomial" => Ok(Self::Polynomial),
            other => Err(Error::Registry(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SmoothStep => "smooth_step",
            Self::Bump => "bump",
            Self::Polynomial => "polynomial",
        }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        if rho <= 1.0 {
            return 1.0;
        }
        if rho >= SUPPORT {
            return 0.0;
        }
        let u = (rho - 1.0) / (SUPPORT - 1.0);
        match self {
            Self::SmoothStep => {
                let e = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
                let (a, b) = (e(1.0 - u), e(u));
                a / (a + b)
            }
            Self::Bump => (1.0 - 1.0 / (1.0 - u * u)).exp(),
            Self::Polynomial => 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Phi,
    Psi,
    Theta,
}

impl Window {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "phi" => Ok(Self::Phi),
            "psi" => Ok(Self::Psi),
            "theta" => Ok(Self::Theta),
            other => Err(Error::Registry(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BapuSystem {
    pub params: CoveringParams,
    pub profile: Profile,
}

#[derive(Debug, Clone, Copy)]
struct Sums {
    lin: f64,
    sq: f64,
}

impl BapuSystem {
    pub fn new(params: CoveringParams, profile: Profile) -> Self {
        Self { params, profile }
    }

    pub fn phi(&self, k: Ix, xi: Point) -> f64 {
        let p = self.params.patch(k);
        self.profile.eval(dist(xi, p.xi) / p.radius)
    }

    fn sums(&self, xi: Point) -> Sums {
        let mut lin = 0.0;
        let mut sq = 0.0;
        for j in patches_within(&self.params, xi, SUPPORT, false) {
            let v = self.phi(j, xi);
            lin += v;
            sq += v * v;
        }
        Sums { lin, sq }
    }

    pub fn psi(&self, k: Ix, xi: Point) -> Result<f64> {
        let s = self.sums(xi);
        if s.lin < DENOM_FLOOR {
            return Err(Error::CoverageViolation { xi, sum: s.lin });
        }
        Ok(self.phi(k, xi) / s.lin)
    }

    pub fn theta(&self, k: Ix, xi: Point) -> Result<f64> {
        let s = self.sums(xi);
        if s.sq.sqrt() < DENOM_FLOOR {
            return Err(Error::CoverageViolation {
                xi,
                sum: s.sq.sqrt(),
            });
        }
        Ok(self.phi(k, xi) / s.sq.sqrt())
    }

    pub fn eval(&self, w: Window, k: Ix, xi: Point) -> Result<f64> {
        match w {
            Window::Phi => Ok(self.phi(k, xi)),
            Window::Psi => self.psi(k, xi),
            Window::Theta => self.theta(k, xi),
        }
    }

    /// Truncated indices whose window reaches `xi`.
    pub fn active(&self, xi: Point) -> Vec<Ix> {
        patches_within(&self.params, xi, SUPPORT, true)
    }

    pub fn in_renorm_domain(&self, xi: Point) -> bool {
        patches_within(&self.params, xi, SUPPORT, false)
            .iter()
            .all(|k| self.params.in_range(*k))
    }

    /// Half-width `s` with `[-s, s]^n` inside the renormalization domain.
    pub fn renorm_halfwidth(&self) -> f64 {
        let p = &self.params;
        let k = Ix::d1(p.kmax + 1);
        ((p.kmax + 1) as f64 - SUPPORT * p.c1) * p.r(k)
    }

    /// Largest `|xi|_inf` reached by a truncated window.
    pub fn band_reach(&self) -> f64 {
        let p = &self.params;
        p.indices()
            .iter()
            .map(|&k| {
                let q = p.patch(k);
                q.xi[0].abs().max(q.xi[1].abs()) + SUPPORT * q.radius
            })
            .fold(0.0, f64::max)
    }

    /// Tabulate a window family on the frequency nodes of a grid.
    pub fn table(&self, grid: Grid, window: Window) -> Result<BandTable> {
        if grid.dim != self.params.dim {
            return param(format!(
                "grid dimension {} != covering dimension {}",
                grid.dim, self.params.dim
            ));
        }
        let d = grid.dxi();
        let mut cache: HashMap<[i64; 2], Sums> = HashMap::new();
        let mut bands = Vec::new();
        for k in self.params.indices() {
            let p = self.params.patch(k);
            let bb = grid.band_box(p.xi, SUPPORT * p.radius)?;
            let values = bb
                .iter()
                .map(|m| {
                    let xi = [m[0] as f64 * d, m[1] as f64 * d];
                    let v = self.phi(k, xi);
                    if v == 0.0 || window == Window::Phi {
                        return v;
                    }
                    let s = *cache.entry(m).or_insert_with(|| self.sums(xi));
                    match window {
                        Window::Psi => v / s.lin,
                        _ => v / s.sq.sqrt(),
                    }
                })
                .collect();
            bands.push(Band { k, bb, values });
        }
        Ok(BandTable {
            grid,
            window,
            bands,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub k: Ix,
    pub bb: BandBox,
    /// Window values at the box nodes, `BandBox::iter` order.
    pub values: Vec<f64>,
}

/// Window values of every truncated band on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub grid: Grid,
    pub window: Window,
    pub bands: Vec<Band>,
}

impl BandTable {
    pub fn band(&self, k: Ix) -> Option<&Band> {
        self.bands.iter().find(|b| b.k == k)
    }

    /// Spectrum of `w_k(D) f` for one band (zero outside the band box).
    pub fn band_pass(&self, band: &Band, f: &SpectralSignal) -> SpectralSignal {
        let g = self.grid;
        let mut out = SpectralSignal::zeros(g, f.n());
        for (m, v) in band.bb.iter().zip(&band.values) {
            if *v == 0.0 {
                continue;
            }
            if let Some(j) = g.freq_flat(m) {
                for c in 0..f.n() {
                    out.components[c][j] = f.components[c][j] * *v;
                }
            }
        }
        out
    }

    /// `sum_k w_k(xi)` (or of squares) at every frequency node.
    pub fn coverage(&self, squared: bool) -> Vec<f64> {
        let g = self.grid;
        let mut acc = vec![0.0; g.len()];
        for b in &self.bands {
            for (m, v) in b.bb.iter().zip(&b.values) {
                if let Some(j) = g.freq_flat(m) {
                    acc[j] += if squared { v * v } else { *v };
                }
            }
        }
        acc
    }
}

/// Result of fitting `|F^{-1} psi_k(x)| <= C r_k^n (1 + r_k |x|)^{-n-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub k: Ix,
    pub c: f64,
    pub within_cap: bool,
}

/// Smallest envelope constant for `F^{-1}(w_k)` over the grid nodes, where
/// `w_k` is the tabulated window (normally `psi_k`).
pub fn check_bapu_decay(
    system: &BapuSystem,
    table: &BandTable,
    k: Ix,
    cap: f64,
) -> Result<DecayFit> {
    let band = table
        .band(k)
        .ok_or_else(|| Error::Structural(format!("band {k} not in table")))?;
    let g = table.grid;
    let mut spec = SpectralSignal::zeros(g, 1);
    for (m, v) in band.bb.iter().zip(&band.values) {
        if let Some(j) = g.freq_flat(m) {
            spec.components[0][j] = Complex64::new(*v, 0.0);
        }
    }
    let f: VectorSignal = inverse_ft(&spec)?;
    let n = g.dim as i32;
    let r = system.params.r(k);
    let mut c: f64 = 0.0;
    for (j, z) in f.components[0].iter().enumerate() {
        let x = g.node(j);
        let env = r.powi(n) * (1.0 + r * dist(x, [0.0, 0.0])).powi(-n - 1);
        c = c.max(z.norm() / env);
    }
    Ok(DecayFit {
        k,
        c,
        within_cap: c <= cap,
    })
}
