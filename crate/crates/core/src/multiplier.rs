//! Fourier multipliers `m(D)`: symbols, application, Gram matrices and the
//! Bessel-potential experiment.

use num_complex::Complex64;

use crate::almostdiag::{ad_membership_weighted, AdParams, DecayMatrix, Membership};
use crate::bapu::{BandTable, BapuSystem};
use crate::covering::{bracket, CoveringParams, Ix};
use crate::error::{Error, Result};
use crate::frame::{Frame, IndexWindow, Molecule};
use crate::grid::{forward_ft, inverse_ft, Point, SpectralSignal, VectorSignal};
use crate::norms::{least_squares_line, m_continuous_norm, LpWeightedNorm, SmoothnessParams};

/// Highest derivative order evaluated by [`Symbol::derivatives`].
pub const MAX_ORDER: usize = 8;

/// Registry symbols; all real-valued and smooth.
#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    Constant(f64),
    /// `<xi>^b`.
    BracketPower(f64),
    /// `exp(1 - 1/(1 - |xi|^2/R^2))` inside `|xi| < R`, zero outside.
    SmoothCompact(f64),
    Product(Box<Symbol>, Box<Symbol>),
}

impl Symbol {
    /// `constant:c`, `bracket_power:b`, `smooth_compact:R`, factors joined by `*`.
    pub fn parse(id: &str) -> Result<Self> {
        let mut parts = id.split('*').map(str::trim);
        let first = Self::parse_one(parts.next().unwrap_or(""))?;
        parts.try_fold(first, |acc, p| {
            Ok(Self::Product(Box::new(acc), Box::new(Self::parse_one(p)?)))
        })
    }

    fn parse_one(id: &str) -> Result<Self> {
        let (name, arg) = id.split_once(':').unwrap_or((id, ""));
        let num = |default: Option<f64>| -> Result<f64> {
            if arg.is_empty() {
                return default
                    .ok_or_else(|| Error::Registry(format!("symbol `{id}` needs an argument")));
            }
            arg.parse::<f64>()
                .map_err(|_| Error::Registry(format!("bad symbol argument in `{id}`")))
        };
        match name {
            "one" => Ok(Self::Constant(1.0)),
            "constant" => Ok(Self::Constant(num(Some(1.0))?)),
            "bracket_power" => Ok(Self::BracketPower(num(None)?)),
            "smooth_compact" => {
                let r = num(Some(1.0))?;
                if !(r > 0.0) {
                    return Err(Error::Registry(format!(
                        "smooth_compact radius must be positive in `{id}`"
                    )));
                }
                Ok(Self::SmoothCompact(r))
            }
            _ => Err(Error::Registry(id.to_string())),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Self::Constant(c) => format!("constant:{c}"),
            Self::BracketPower(b) => format!("bracket_power:{b}"),
            Self::SmoothCompact(r) => format!("smooth_compact:{r}"),
            Self::Product(a, b) => format!("{}*{}", a.id(), b.id()),
        }
    }

    pub fn eval(&self, xi: Point) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::BracketPower(b) => bracket(xi).powf(*b),
            Self::SmoothCompact(r) => {
                let u = (xi[0] * xi[0] + xi[1] * xi[1]) / (r * r);
                if u >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - u)).exp()
                }
            }
            Self::Product(a, b) => a.eval(xi) * b.eval(xi),
        }
    }

    fn jet(&self, xi: Point, order: usize) -> Jet {
        match self {
            Self::Constant(c) => Jet::constant(order, *c),
            Self::BracketPower(b) => {
                let q = Jet::variable(order, 0, xi[0])
                    .square()
                    .add(&Jet::variable(order, 1, xi[1]).square());
                q.add_const(1.0).powf(b / 2.0)
            }
            Self::SmoothCompact(r) => {
                let q = Jet::variable(order, 0, xi[0])
                    .square()
                    .add(&Jet::variable(order, 1, xi[1]).square());
                let v = q.scale(-1.0 / (r * r)).add_const(1.0);
                if v.c[0][0] <= 0.0 {
                    return Jet::constant(order, 0.0);
                }
                v.powf(-1.0).scale(-1.0).add_const(1.0).exp()
            }
            Self::Product(a, b) => a.jet(xi, order).mul(&b.jet(xi, order)),
        }
    }

    /// All partial derivatives `d^eta m(xi)` with `|eta| <= order`, as
    /// `(eta, value)`; `eta[1] = 0` in dimension 1.
    pub fn derivatives(
        &self,
        dim: usize,
        xi: Point,
        order: usize,
    ) -> Result<Vec<([usize; 2], f64)>> {
        if order > MAX_ORDER {
            return Err(Error::Symbol(format!(
                "derivative order {order} exceeds {MAX_ORDER}"
            )));
        }
        let j = self.jet(xi, order);
        let mut out = Vec::new();
        for a in 0..=order {
            for b in 0..=(if dim == 2 { order - a } else { 0 }) {
                let v = j.c[a][b] * factorial(a) * factorial(b);
                if !v.is_finite() {
                    return Err(Error::Symbol(format!(
                        "non-finite derivative {:?} of {} at {xi:?}",
                        [a, b],
                        self.id()
                    )));
                }
                out.push(([a, b], v));
            }
        }
        Ok(out)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Truncated bivariate Taylor series `sum c[a][b] dx^a dy^b`, `a + b <= order`.
#[derive(Debug, Clone)]
struct Jet {
    order: usize,
    c: Vec<Vec<f64>>,
}

impl Jet {
    fn zeros(order: usize) -> Self {
        Self {
            order,
            c: vec![vec![0.0; order + 1]; order + 1],
        }
    }

    fn constant(order: usize, v: f64) -> Self {
        let mut j = Self::zeros(order);
        j.c[0][0] = v;
        j
    }

    fn variable(order: usize, axis: usize, v: f64) -> Self {
        let mut j = Self::constant(order, v);
        if order >= 1 {
            if axis == 0 {
                j.c[1][0] = 1.0;
            } else {
                j.c[0][1] = 1.0;
            }
        }
        j
    }

    fn add(&self, o: &Self) -> Self {
        let mut j = self.clone();
        for a in 0..=self.order {
            for b in 0..=self.order - a {
                j.c[a][b] += o.c[a][b];
            }
        }
        j
    }

    fn add_const(&self, v: f64) -> Self {
        let mut j = self.clone();
        j.c[0][0] += v;
        j
    }

    fn scale(&self, s: f64) -> Self {
        let mut j = self.clone();
        for row in &mut j.c {
            for v in row {
                *v *= s;
            }
        }
        j
    }

    fn mul(&self, o: &Self) -> Self {
        let n = self.order;
        let mut j = Self::zeros(n);
        for a in 0..=n {
            for b in 0..=n - a {
                if self.c[a][b] == 0.0 {
                    continue;
                }
                for c in 0..=n - a - b {
                    for d in 0..=n - a - b - c {
                        j.c[a + c][b + d] += self.c[a][b] * o.c[c][d];
                    }
                }
            }
        }
        j
    }

    fn square(&self) -> Self {
        self.mul(self)
    }

    /// `sum_i coef[i] g^i` for the nilpotent part `g`.
    fn series(&self, coef: &[f64]) -> Self {
        let mut g = self.clone();
        g.c[0][0] = 0.0;
        let mut out = Self::constant(self.order, coef[0]);
        let mut pw = Self::constant(self.order, 1.0);
        for cf in coef.iter().skip(1) {
            pw = pw.mul(&g);
            out = out.add(&pw.scale(*cf));
        }
        out
    }

    fn powf(&self, e: f64) -> Self {
        let f0 = self.c[0][0];
        let mut coef = vec![f0.powf(e)];
        let mut binom = 1.0;
        for i in 1..=self.order {
            binom *= (e - (i - 1) as f64) / i as f64;
            coef.push(binom * f0.powf(e - i as f64));
        }
        self.series(&coef)
    }

    fn exp(&self) -> Self {
        let e0 = self.c[0][0].exp();
        let coef: Vec<f64> = (0..=self.order).map(|i| e0 / factorial(i)).collect();
        self.series(&coef)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSup {
    pub order: usize,
    /// `sup <xi>^{alpha |eta| - b} |d^eta m|` over all samples.
    pub sup: f64,
    /// The same restricted to `|xi| <= xi_max / 2`.
    pub sup_half: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolClassReport {
    pub orders: Vec<OrderSup>,
    pub samples: usize,
    pub pass: bool,
}

/// Log-spaced radii in `[0, xi_max]` along several directions.
pub fn symbol_samples(dim: usize, xi_max: f64, per_ray: usize) -> Vec<Point> {
    let mut radii = vec![0.0];
    let lo: f64 = 1e-3;
    for i in 0..per_ray {
        radii.push(lo * (xi_max / lo).powf(i as f64 / (per_ray - 1) as f64));
    }
    let dirs: Vec<Point> = if dim == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..8)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / 4.0 + 0.1;
                [t.cos(), t.sin()]
            })
            .collect()
    };
    let mut pts = Vec::new();
    for r in &radii {
        for d in &dirs {
            pts.push([r * d[0], r * d[1]]);
        }
    }
    pts
}

/// Sampled suprema per derivative order; `pass` needs every order finite and
/// growing by at most 10% from half range to full range.
pub fn symbol_class_check(
    m: &Symbol,
    dim: usize,
    alpha: f64,
    b: f64,
    order: usize,
    xi_max: f64,
) -> Result<SymbolClassReport> {
    let pts = symbol_samples(dim, xi_max, 200);
    let mut sup = vec![0.0f64; order + 1];
    let mut half = vec![0.0f64; order + 1];
    for xi in &pts {
        let br = bracket(*xi);
        let inner = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt() <= xi_max / 2.0;
        for (eta, v) in m.derivatives(dim, *xi, order)? {
            let o = eta[0] + eta[1];
            let val = br.powf(alpha * o as f64 - b) * v.abs();
            sup[o] = sup[o].max(val);
            if inner {
                half[o] = half[o].max(val);
            }
        }
    }
    let orders: Vec<OrderSup> = (0..=order)
        .map(|o| OrderSup {
            order: o,
            sup: sup[o],
            sup_half: half[o],
            stable: sup[o].is_finite() && sup[o] <= 1.1 * half[o] + 1e-300,
        })
        .collect();
    let pass = orders.iter().all(|o| o.stable);
    Ok(SymbolClassReport {
        orders,
        samples: pts.len(),
        pass,
    })
}

/// `m(D) f`, componentwise.
pub fn apply_multiplier(m: &Symbol, f: &VectorSignal) -> Result<VectorSignal> {
    inverse_ft(&multiply_spectrum(m, &forward_ft(f)?))
}

pub fn multiply_spectrum(m: &Symbol, f: &SpectralSignal) -> SpectralSignal {
    f.multiply(|xi| Complex64::new(m.eval(xi), 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierGram {
    pub matrix: DecayMatrix,
    pub membership: Option<Membership>,
}

/// Entries `<<xi_k>^{-b} m(D) phi_{k,l}, phi_{j,m}>` and, when `pr` is given,
/// the weighted-class fit.
pub fn multiplier_gram(
    frame: &Frame,
    m: &Symbol,
    b: f64,
    window: &IndexWindow,
    pr: Option<&AdParams>,
) -> Result<MultiplierGram> {
    let mol = Molecule::Multiplied {
        symbol: m.clone(),
        b,
    };
    let mut matrix = frame.cross_gram(&mol, &Molecule::Frame, window)?;
    let membership = match pr {
        Some(pr) => Some(ad_membership_weighted(&mut matrix, pr, frame.params())?),
        None => None,
    };
    Ok(MultiplierGram { matrix, membership })
}

/// Fitted `N` in `max_{|l - m| = d} |a| ~ (1 + d)^{-N}` for the block `(j, k)`,
/// over distances with nonzero maxima.
pub fn lattice_decay_exponent(
    a: &DecayMatrix,
    cover: &CoveringParams,
    j: Ix,
    k: Ix,
    dmin: i64,
) -> Result<f64> {
    let mut by_d: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    for (&((rj, l), (ck, m)), v) in &a.entries {
        if rj == j && ck == k {
            let d = l.sub(&m).sup_norm();
            let e = by_d.entry(d).or_insert(0.0);
            *e = e.max(v.norm());
        }
    }
    let _ = cover;
    let pts: Vec<(f64, f64)> = by_d
        .iter()
        .filter(|(d, v)| **d >= dmin && **v > 0.0)
        .map(|(d, v)| ((1.0 + *d as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!(
            "block ({j}, {k}) has fewer than two distances to fit"
        )));
    }
    Ok(-least_squares_line(&pts).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BesselReport {
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

/// `||<D>^b g||_{M(alpha,s)} / ||g||_{M(alpha,s+b)}` over a corpus of spectra.
pub fn bessel_equivalence_experiment(
    system: &BapuSystem,
    table: &BandTable,
    lpw: &LpWeightedNorm,
    sp: &SmoothnessParams,
    b: f64,
    corpus: &[SpectralSignal],
) -> Result<BesselReport> {
    let bessel = Symbol::BracketPower(b);
    let shifted = sp.with_s(sp.s + b);
    let mut ratios = Vec::with_capacity(corpus.len());
    for g in corpus {
        let den = m_continuous_norm(system, table, lpw, &shifted, g)?.value;
        if den == 0.0 {
            continue;
        }
        let num = m_continuous_norm(system, table, lpw, sp, &multiply_spectrum(&bessel, g))?.value;
        ratios.push(num / den);
    }
    let (min, max) = crate::norms::bracket_of(&ratios);
    Ok(BesselReport { ratios, min, max })
}
