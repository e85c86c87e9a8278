//! Almost-diagonal matrices on the `(k, l)` lattice.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covering::{dist, CoveringParams, Ix};
use crate::error::{param, Error, Result};
use crate::frame::{CoeffSeq, IndexWindow};
use crate::grid::Point;
use crate::norms::{m_discrete_norm, m_reducing_norm, scalar_m_norm, SmoothnessParams, Q};
use crate::quad::{interval_rule, CubeRule};
use crate::sum::Neumaier;
use crate::weights::{MatrixWeight, ReducingFamily};

pub type Node = (Ix, Ix);

/// `(J, delta, M, beta, s, p, q, n)`; `K = max(beta/p, (beta - n)/p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdParams {
    pub j: f64,
    pub delta: f64,
    pub m: f64,
    pub beta: f64,
    pub s: f64,
    pub p: f64,
    pub q: Q,
    pub n: usize,
}

impl AdParams {
    pub fn k(&self) -> f64 {
        let n = self.n as f64;
        (self.beta / self.p).max((self.beta - n) / self.p)
    }

    fn j_floor(&self) -> f64 {
        self.n as f64 / self.q.min_one()
    }

    /// `J >= n/min(1,q)`, `delta > 0`.
    pub fn validate_scalar(&self) -> Result<()> {
        if !(self.j >= self.j_floor()) {
            return param(format!(
                "J = {} must be >= n/min(1,q) = {}",
                self.j,
                self.j_floor()
            ));
        }
        if !(self.delta > 0.0) {
            return param(format!("delta must be positive, got {}", self.delta));
        }
        Ok(())
    }

    /// `J > n/min(1,q)`, `M > max(2J, |s| + n/2)`.
    pub fn validate_weighted(&self) -> Result<()> {
        if !(self.j > self.j_floor()) {
            return param(format!(
                "J = {} must exceed n/min(1,q) = {}",
                self.j,
                self.j_floor()
            ));
        }
        let floor = (2.0 * self.j).max(self.s.abs() + self.n as f64 / 2.0);
        if !(self.m > floor) {
            return param(format!(
                "M = {} must exceed max(2J, |s| + n/2) = {floor}",
                self.m
            ));
        }
        if !(self.p >= 1.0) {
            return param(format!("p must be >= 1, got {}", self.p));
        }
        Ok(())
    }
}

struct Geometry {
    rj: f64,
    rk: f64,
    xi_term: f64,
    x_term: f64,
}

fn geometry(cover: &CoveringParams, row: Node, col: Node) -> Geometry {
    let (j, l) = row;
    let (k, m) = col;
    let (rj, rk) = (cover.r(j), cover.r(k));
    Geometry {
        rj,
        rk,
        xi_term: 1.0 + dist(cover.xi(k), cover.xi(j)) / rj.max(rk),
        x_term: 1.0 + rj.min(rk) * dist(cover.x_kl(k, m), cover.x_kl(j, l)),
    }
}

/// `omega^s_{(j,l)(k,m)}(J)`.
pub fn omega_weight(pr: &AdParams, cover: &CoveringParams, row: Node, col: Node) -> f64 {
    let g = geometry(cover, row, col);
    let n = cover.dim as f64;
    let (jj, d) = (pr.j, pr.delta);
    let c = (g.rj / g.rk).powf(jj + d).min((g.rk / g.rj).powf(d)) * g.xi_term.powf(-jj - d);
    (g.rk / g.rj).powf(pr.s + n / 2.0)
        * (g.rj / g.rk)
            .powf(jj + d / 2.0)
            .min((g.rk / g.rj).powf(d / 2.0))
        * c
        * g.x_term.powf(-jj - d)
}

/// `min((r_j/r_k)^M, (r_k/r_j)^M) (1 + ..|x|)^{-J} (1 + ..|xi|)^{-J}`.
pub fn symmetric_bound(pr: &AdParams, cover: &CoveringParams, row: Node, col: Node) -> f64 {
    let g = geometry(cover, row, col);
    (g.rj / g.rk).powf(pr.m).min((g.rk / g.rj).powf(pr.m))
        * g.x_term.powf(-pr.j)
        * g.xi_term.powf(-pr.j)
}

/// The weighted-class bound: exponents `M + K` in scale and `J + beta/p` in space.
pub fn weighted_bound(pr: &AdParams, cover: &CoveringParams, row: Node, col: Node) -> f64 {
    let g = geometry(cover, row, col);
    let e = pr.m + pr.k();
    (g.rj / g.rk).powf(e).min((g.rk / g.rj).powf(e))
        * g.x_term.powf(-pr.j - pr.beta / pr.p)
        * g.xi_term.powf(-pr.j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Omega,
    Symmetric,
    Weighted,
}

impl BoundKind {
    pub fn eval(&self, pr: &AdParams, cover: &CoveringParams, row: Node, col: Node) -> f64 {
        match self {
            Self::Omega => omega_weight(pr, cover, row, col),
            Self::Symmetric => symmetric_bound(pr, cover, row, col),
            Self::Weighted => weighted_bound(pr, cover, row, col),
        }
    }
}

/// Sparse matrix over a lattice window, rows `(j,l)`, columns `(k,m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayMatrix {
    pub dim: usize,
    pub rows: Vec<Node>,
    pub cols: Vec<Node>,
    pub entries: BTreeMap<(Node, Node), Complex64>,
    /// Last fitted envelope constant, if any.
    pub fit: Option<f64>,
}

impl DecayMatrix {
    pub fn new(dim: usize, rows: Vec<Node>, cols: Vec<Node>) -> Self {
        Self {
            dim,
            rows,
            cols,
            entries: BTreeMap::new(),
            fit: None,
        }
    }

    pub fn identity(dim: usize, nodes: Vec<Node>) -> Self {
        let mut a = Self::new(dim, nodes.clone(), nodes.clone());
        for x in nodes {
            a.set(x, x, Complex64::new(1.0, 0.0));
        }
        a
    }

    pub fn set(&mut self, row: Node, col: Node, v: Complex64) {
        self.entries.insert((row, col), v);
    }

    pub fn get(&self, row: Node, col: Node) -> Complex64 {
        self.entries.get(&(row, col)).copied().unwrap_or_default()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v *= s;
        }
        out
    }

    /// Matrix product over the shared index window.
    pub fn compose(&self, other: &Self) -> Self {
        let mut by_row: BTreeMap<Node, Vec<(Node, Complex64)>> = BTreeMap::new();
        for (&(r, c), v) in &other.entries {
            by_row.entry(r).or_default().push((c, *v));
        }
        let mut out = Self::new(self.dim, self.rows.clone(), other.cols.clone());
        let mut acc: BTreeMap<(Node, Node), Complex64> = BTreeMap::new();
        for (&(r, mid), a) in &self.entries {
            if let Some(list) = by_row.get(&mid) {
                for (c, b) in list {
                    *acc.entry((r, *c)).or_default() += a * b;
                }
            }
        }
        out.entries = acc;
        out
    }
}

/// The `omega` matrix on a window.
pub fn omega_matrix(pr: &AdParams, cover: &CoveringParams, window: &IndexWindow) -> DecayMatrix {
    let nodes = window.nodes(cover.dim);
    let mut a = DecayMatrix::new(cover.dim, nodes.clone(), nodes.clone());
    for &r in &nodes {
        for &c in &nodes {
            a.set(r, c, Complex64::new(omega_weight(pr, cover, r, c), 0.0));
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    /// `max |a| / bound` over the whole window.
    pub c: f64,
    /// The same over entries with both `|l|_inf <= lrad/2`.
    pub c_inner: f64,
    pub entries: usize,
    pub pass: bool,
}

/// Fitted constant against a bound; `pass` needs a finite `C` that grows by at
/// most `drift` from the inner half-window to the full window.
pub fn ad_membership(
    a: &mut DecayMatrix,
    pr: &AdParams,
    cover: &CoveringParams,
    kind: BoundKind,
    drift: f64,
) -> Result<Membership> {
    match kind {
        BoundKind::Weighted => pr.validate_weighted()?,
        _ => pr.validate_scalar()?,
    }
    if a.entries.is_empty() && a.rows.is_empty() {
        return Err(Error::Window("empty window".into()));
    }
    let lrad = a
        .rows
        .iter()
        .chain(&a.cols)
        .map(|(_, l)| l.sup_norm())
        .max()
        .unwrap_or(0);
    let mut c: f64 = 0.0;
    let mut c_inner: f64 = 0.0;
    for (&(row, col), v) in &a.entries {
        let ratio = v.norm() / kind.eval(pr, cover, row, col);
        c = c.max(ratio);
        if 2 * row.1.sup_norm() <= lrad && 2 * col.1.sup_norm() <= lrad {
            c_inner = c_inner.max(ratio);
        }
    }
    a.fit = Some(c);
    let pass = c.is_finite() && c <= (1.0 + drift) * c_inner.max(f64::MIN_POSITIVE);
    Ok(Membership {
        c,
        c_inner,
        entries: a.entries.len(),
        pass,
    })
}

pub fn ad_membership_scalar(
    a: &mut DecayMatrix,
    pr: &AdParams,
    cover: &CoveringParams,
) -> Result<Membership> {
    ad_membership(a, pr, cover, BoundKind::Symmetric, 0.1)
}

pub fn ad_membership_weighted(
    a: &mut DecayMatrix,
    pr: &AdParams,
    cover: &CoveringParams,
) -> Result<Membership> {
    ad_membership(a, pr, cover, BoundKind::Weighted, 0.1)
}

/// `t_{(j,l)} = sum a_{(j,l)(k,m)} s_{(k,m)}` over every row of the window.
pub fn apply(a: &DecayMatrix, c: &CoeffSeq) -> Result<CoeffSeq> {
    let cols: BTreeSet<Node> = a.cols.iter().copied().collect();
    if let Some(bad) = c.entries.keys().find(|key| !cols.contains(key)) {
        return Err(Error::Window(format!(
            "coefficient ({}, {}) outside the matrix window",
            bad.0, bad.1
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut out = CoeffSeq::new(c.n);
    let mut acc: BTreeMap<Node, Vec<Complex64>> =
        a.rows.iter().map(|r| (*r, vec![zero; c.n])).collect();
    for (&(row, col), v) in &a.entries {
        if let Some(s) = c.entries.get(&col) {
            let t = acc.entry(row).or_insert_with(|| vec![zero; c.n]);
            for (ti, si) in t.iter_mut().zip(s) {
                *ti += v * si;
            }
        }
    }
    for ((k, l), v) in acc {
        out.insert(k, l, v);
    }
    Ok(out)
}

/// Sequence norm used by [`boundedness_probe`].
#[derive(Debug, Clone, Copy)]
pub enum ProbeNorm<'a> {
    Scalar,
    Reducing(&'a ReducingFamily),
    Discrete { weight: &'a MatrixWeight, h: f64 },
}

impl ProbeNorm<'_> {
    pub fn norm(&self, cover: &CoveringParams, sp: &SmoothnessParams, c: &CoeffSeq) -> Result<f64> {
        match self {
            Self::Scalar => {
                let t = c
                    .entries
                    .iter()
                    .map(|(key, v)| (*key, crate::linalg::vec_norm(v)))
                    .collect();
                Ok(scalar_m_norm(cover, sp, &t).value)
            }
            Self::Reducing(f) => Ok(m_reducing_norm(f, cover, sp, c)?.value),
            Self::Discrete { weight, h } => Ok(m_discrete_norm(cover, weight, sp, c, *h)?.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub trials: usize,
}

/// Random finite sequence on the given nodes, each kept with probability `density`.
pub fn random_sequence(nodes: &[Node], n: usize, density: f64, rng: &mut impl Rng) -> CoeffSeq {
    let mut c = CoeffSeq::new(n);
    for &(k, l) in nodes {
        if rng.gen::<f64>() < density {
            let v = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            c.insert(k, l, v);
        }
    }
    if c.is_empty() {
        let (k, l) = nodes[rng.gen_range(0..nodes.len())];
        c.insert(k, l, vec![Complex64::new(1.0, 0.0); n]);
    }
    c
}

/// `max ||A c|| / ||c||` over random sequences supported on the column window.
pub fn boundedness_probe(
    a: &DecayMatrix,
    cover: &CoveringParams,
    norm: ProbeNorm<'_>,
    sp: &SmoothnessParams,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if a.cols.is_empty() {
        return Err(Error::Window("empty column window".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    for t in 0..trials {
        let density = [1.0, 0.3, 0.05][t % 3];
        let c = random_sequence(&a.cols, n, density, &mut rng);
        let den = norm.norm(cover, sp, &c)?;
        if den == 0.0 {
            continue;
        }
        let r = norm.norm(cover, sp, &apply(a, &c)?)? / den;
        max_ratio = max_ratio.max(r);
        min_ratio = min_ratio.min(r);
    }
    Ok(ProbeReport {
        max_ratio,
        min_ratio,
        trials,
    })
}

/// Cells per axis of the tangent-mapped rule in [`le_sq_check`].
const TAIL_CELLS: [usize; 2] = [2000, 160];

/// `int w(x) (1 + r_j |x - x_{j,l}|)^{-L} dx / int_{Q(j,l)} w` with the whole
/// space mapped onto `(-1, 1)^n` by `x = x_0 + tan(pi t / 2) / r_j`.
pub fn le_sq_check(
    w: &dyn Fn(Point) -> f64,
    beta: f64,
    cover: &CoveringParams,
    j: Ix,
    l: Ix,
    big_l: f64,
) -> Result<f64> {
    if !(big_l > beta) {
        return param(format!(
            "L = {big_l} must exceed the doubling exponent {beta}"
        ));
    }
    let dim = cover.dim;
    let r = cover.r(j);
    let x0 = cover.x_kl(j, l);
    let (t, tw) = interval_rule(-1.0, 1.0, TAIL_CELLS[dim - 1]);
    let map: Vec<(f64, f64)> = t
        .iter()
        .zip(&tw)
        .map(|(t, w)| {
            let a = PI * t / 2.0;
            (a.tan() / r, w * PI / 2.0 / (a.cos() * a.cos()) / r)
        })
        .collect();
    let mut lhs = Neumaier::default();
    if dim == 1 {
        for &(u, wu) in &map {
            lhs.add(wu * w([x0[0] + u, 0.0]) * (1.0 + r * u.abs()).powf(-big_l));
        }
    } else {
        for &(u, wu) in &map {
            for &(v, wv) in &map {
                let d = (u * u + v * v).sqrt();
                lhs.add(wu * wv * w([x0[0] + u, x0[1] + v]) * (1.0 + r * d).powf(-big_l));
            }
        }
    }
    let q = cover.cube(j, l);
    let rule = CubeRule::new(dim, q.anchor, q.side, 64)?;
    let rhs = rule.integrate(w);
    if !(rhs > 0.0) {
        return Err(Error::DegenerateWeight(format!(
            "weight has zero mass on Q({j}, {l})"
        )));
    }
    Ok(lhs.value() / rhs)
}
