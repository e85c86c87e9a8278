//! Matrix weights and their Muckenhoupt / doubling diagnostics.
//!
//! All suprema are taken over finite cube families and are therefore lower
//! bounds of the true constants. The matrix norm is the spectral norm.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covering::{CoveringParams, Ix, TimeCube};
use crate::error::{param, Error, Result};
use crate::grid::{Grid, Point, VectorSignal};
use crate::linalg::{self, CMat};
use crate::quad::{cells_per_axis, CubeRule};

/// Weight generators.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// Constant Hermitian positive definite matrix.
    Constant(CMat),
    /// `diag((|x| + eps)^gamma_i)`.
    Power { gammas: Vec<f64>, eps: f64 },
    /// `diag(<x>^gamma_i)`.
    BracketPower { gammas: Vec<f64> },
    /// `R diag((|x| + eps)^gamma_i) R^T`, `R` a rotation in the first two coordinates.
    RotatedPower {
        angle: f64,
        gammas: Vec<f64>,
        eps: f64,
    },
    /// `D + diag((|x| + eps)^gamma_i)`.
    ConstantPlusPower {
        base: CMat,
        gammas: Vec<f64>,
        eps: f64,
    },
    /// `W(x)^t` of another weight.
    Pow(Box<WeightSpec>, f64),
}

/// Scalar (`N = 1`) expression ids accepted by [`MatrixWeight::scalar`].
pub const SCALAR_IDS: [&str; 3] = ["one", "abs_pow:<gamma>[:<eps>]", "bracket_pow:<gamma>"];

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixWeight {
    pub dim: usize,
    pub n: usize,
    pub spec: WeightSpec,
}

fn abs_x(x: Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1]).sqrt()
}

fn rotation(n: usize, angle: f64) -> CMat {
    let mut r = linalg::identity(n);
    if n >= 2 {
        let (s, c) = angle.sin_cos();
        r[(0, 0)] = Complex64::new(c, 0.0);
        r[(0, 1)] = Complex64::new(-s, 0.0);
        r[(1, 0)] = Complex64::new(s, 0.0);
        r[(1, 1)] = Complex64::new(c, 0.0);
    }
    r
}

impl MatrixWeight {
    pub fn new(dim: usize, spec: WeightSpec) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return param(format!("dimension must be 1 or 2, got {dim}"));
        }
        let n = Self::size_of(&spec)?;
        if !(1..=3).contains(&n) {
            return param(format!("vector size must be 1..=3, got {n}"));
        }
        let w = Self { dim, n, spec };
        w.validate()?;
        Ok(w)
    }

    fn size_of(spec: &WeightSpec) -> Result<usize> {
        Ok(match spec {
            WeightSpec::Constant(m) => m.nrows(),
            WeightSpec::Power { gammas, .. } | WeightSpec::BracketPower { gammas } => gammas.len(),
            WeightSpec::RotatedPower { gammas, .. } => {
                if gammas.len() < 2 {
                    return param("rotated_power needs at least two exponents");
                }
                gammas.len()
            }
            WeightSpec::ConstantPlusPower { base, gammas, .. } => {
                if base.nrows() != gammas.len() {
                    return Err(Error::Structural(
                        "base matrix and exponent list differ in size".into(),
                    ));
                }
                gammas.len()
            }
            WeightSpec::Pow(inner, _) => Self::size_of(inner)?,
        })
    }

    fn validate(&self) -> Result<()> {
        let check_spd = |m: &CMat| -> Result<()> {
            if m.nrows() != m.ncols() || !linalg::is_hermitian(m, 1e-12) {
                return Err(Error::Structural(
                    "constant weight must be Hermitian".into(),
                ));
            }
            if linalg::hermitian_eigenvalues(m)[0] <= 0.0 {
                return Err(Error::DegenerateWeight(
                    "constant weight is not positive definite".into(),
                ));
            }
            Ok(())
        };
        match &self.spec {
            WeightSpec::Constant(m) => check_spd(m),
            WeightSpec::ConstantPlusPower { base, eps, .. } => {
                check_spd(base)?;
                if *eps < 0.0 {
                    return param("eps must be >= 0");
                }
                Ok(())
            }
            WeightSpec::Power { eps, .. } | WeightSpec::RotatedPower { eps, .. } if *eps < 0.0 => {
                param("eps must be >= 0")
            }
            _ => Ok(()),
        }
    }

    pub fn identity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            n,
            spec: WeightSpec::Constant(linalg::identity(n)),
        }
    }

    pub fn constant(dim: usize, m: CMat) -> Result<Self> {
        Self::new(dim, WeightSpec::Constant(m))
    }

    pub fn power(dim: usize, gammas: Vec<f64>, eps: f64) -> Result<Self> {
        Self::new(dim, WeightSpec::Power { gammas, eps })
    }

    pub fn bracket_power(dim: usize, gammas: Vec<f64>) -> Result<Self> {
        Self::new(dim, WeightSpec::BracketPower { gammas })
    }

    pub fn rotated_power(dim: usize, angle: f64, gammas: Vec<f64>, eps: f64) -> Result<Self> {
        Self::new(dim, WeightSpec::RotatedPower { angle, gammas, eps })
    }

    /// Scalar weight from an expression id: `one`, `abs_pow:g`, `abs_pow:g:eps`, `bracket_pow:g`.
    pub fn scalar(dim: usize, id: &str) -> Result<Self> {
        let parts: Vec<&str> = id.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Registry(id.to_string()))
        };
        match parts.as_slice() {
            ["one"] => Ok(Self::identity(dim, 1)),
            ["abs_pow", g] => Self::power(dim, vec![num(g)?], 0.0),
            ["abs_pow", g, e] => Self::power(dim, vec![num(g)?], num(e)?),
            ["bracket_pow", g] => Self::bracket_power(dim, vec![num(g)?]),
            _ => Err(Error::Registry(id.to_string())),
        }
    }

    /// `W^t`; with `t = -p'/p` this is the dual weight.
    pub fn pow(&self, t: f64) -> Self {
        Self {
            dim: self.dim,
            n: self.n,
            spec: WeightSpec::Pow(Box::new(self.spec.clone()), t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.spec, WeightSpec::Constant(_))
    }

    pub fn eval(&self, x: Point) -> CMat {
        eval_spec(&self.spec, self.n, x)
    }

    /// `W(x)^t` by spectral calculus.
    pub fn power_at(&self, x: Point, t: f64) -> Result<CMat> {
        match &self.spec {
            WeightSpec::Power { gammas, eps } => {
                let r = abs_x(x) + eps;
                diag_power(gammas, r, t)
            }
            WeightSpec::BracketPower { gammas } => {
                let r = (1.0 + x[0] * x[0] + x[1] * x[1]).sqrt();
                diag_power(gammas, r, t)
            }
            WeightSpec::RotatedPower { angle, gammas, eps } => {
                let d = diag_power(gammas, abs_x(x) + eps, t)?;
                let r = rotation(self.n, *angle);
                Ok(&r * d * r.transpose())
            }
            WeightSpec::Pow(inner, t0) => MatrixWeight {
                dim: self.dim,
                n: self.n,
                spec: (**inner).clone(),
            }
            .power_at(x, t0 * t),
            _ => linalg::hermitian_power(&self.eval(x), t),
        }
    }
}

fn diag_power(gammas: &[f64], r: f64, t: f64) -> Result<CMat> {
    let vals: Vec<f64> = gammas.iter().map(|g| r.powf(g * t)).collect();
    if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::DegenerateWeight(format!(
            "power weight singular at |x| = {r:e}"
        )));
    }
    Ok(linalg::diag(&vals))
}

fn eval_spec(spec: &WeightSpec, n: usize, x: Point) -> CMat {
    match spec {
        WeightSpec::Constant(m) => m.clone(),
        WeightSpec::Power { gammas, eps } => {
            let r = abs_x(x) + eps;
            linalg::diag(&gammas.iter().map(|g| r.powf(*g)).collect::<Vec<_>>())
        }
        WeightSpec::BracketPower { gammas } => {
            let r = (1.0 + x[0] * x[0] + x[1] * x[1]).sqrt();
            linalg::diag(&gammas.iter().map(|g| r.powf(*g)).collect::<Vec<_>>())
        }
        WeightSpec::RotatedPower { angle, gammas, eps } => {
            let r = abs_x(x) + eps;
            let d = linalg::diag(&gammas.iter().map(|g| r.powf(*g)).collect::<Vec<_>>());
            let rot = rotation(n, *angle);
            &rot * d * rot.transpose()
        }
        WeightSpec::ConstantPlusPower { base, gammas, eps } => {
            let r = abs_x(x) + eps;
            base + linalg::diag(&gammas.iter().map(|g| r.powf(*g)).collect::<Vec<_>>())
        }
        WeightSpec::Pow(inner, t) => {
            let m = eval_spec(inner, n, x);
            linalg::hermitian_power(&m, *t)
                .unwrap_or_else(|_| CMat::from_element(n, n, Complex64::new(f64::NAN, 0.0)))
        }
    }
}

/// Axis-aligned cube `lower + [0, side)^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub dim: usize,
    pub lower: Point,
    pub side: f64,
}

impl Cube {
    pub fn centered(dim: usize, c: Point, side: f64) -> Self {
        let lower = [
            c[0] - side / 2.0,
            if dim == 2 { c[1] - side / 2.0 } else { 0.0 },
        ];
        Self { dim, lower, side }
    }

    pub fn center(&self) -> Point {
        [
            self.lower[0] + self.side / 2.0,
            if self.dim == 2 {
                self.lower[1] + self.side / 2.0
            } else {
                0.0
            },
        ]
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }
}

impl From<TimeCube> for Cube {
    fn from(q: TimeCube) -> Self {
        Self {
            dim: q.dim,
            lower: q.anchor,
            side: q.side,
        }
    }
}

/// Nested cube families: level `j` holds every cube of side `side0 2^i`,
/// `i <= j`, centred at each of `centers`.
pub fn dyadic_families(dim: usize, centers: &[Point], side0: f64, levels: usize) -> Vec<Vec<Cube>> {
    let mut out = Vec::with_capacity(levels);
    let mut acc = Vec::new();
    for j in 0..levels {
        let side = side0 * 2f64.powi(j as i32);
        for c in centers {
            acc.push(Cube::centered(dim, *c, side));
        }
        out.push(acc.clone());
    }
    out
}

/// Nested dyadic lattices: level `j` adds every cube `side0 2^j (m + [0,1)^n)`
/// inside `[-extent, extent]^n`.
pub fn dyadic_lattice_families(
    dim: usize,
    extent: f64,
    side0: f64,
    levels: usize,
) -> Vec<Vec<Cube>> {
    let mut out = Vec::with_capacity(levels);
    let mut acc = Vec::new();
    for j in 0..levels {
        let side = side0 * 2f64.powi(j as i32);
        let m = (extent / side).floor() as i64;
        let axis: Vec<f64> = (-m..m).map(|i| i as f64 * side).collect();
        let axis1: Vec<f64> = if dim == 2 { axis.clone() } else { vec![0.0] };
        for &a in &axis {
            for &b in &axis1 {
                acc.push(Cube {
                    dim,
                    lower: [a, b],
                    side,
                });
            }
        }
        out.push(acc.clone());
    }
    out
}

/// Midpoint nodes of a cube (all weights `|Q| / count`); `shifted` moves
/// every node by half a cell so no node sits at a cell centre.
fn midpoint_nodes(cube: &Cube, h: f64, shifted: bool) -> Vec<Point> {
    let m = cells_per_axis(cube.side, h);
    let d = cube.side / m as f64;
    let off = if shifted { 1.0 } else { 0.5 };
    let axis0: Vec<f64> = (0..m)
        .map(|i| cube.lower[0] + (i as f64 + off) * d)
        .collect();
    if cube.dim == 1 {
        return axis0.into_iter().map(|x| [x, 0.0]).collect();
    }
    let axis1: Vec<f64> = (0..m)
        .map(|i| cube.lower[1] + (i as f64 + off) * d)
        .collect();
    axis0
        .iter()
        .flat_map(|&a| axis1.iter().map(move |&b| [a, b]))
        .collect()
}

/// `W^{t}` at each midpoint node; on singular nodes retry once with shifted nodes.
fn node_powers(w: &MatrixWeight, cube: &Cube, h: f64, powers: &[f64]) -> Result<Vec<Vec<CMat>>> {
    for shifted in [false, true] {
        let nodes = midpoint_nodes(cube, h, shifted);
        let mut out = vec![Vec::with_capacity(nodes.len()); powers.len()];
        let mut ok = true;
        'nodes: for x in &nodes {
            for (slot, &t) in powers.iter().enumerate() {
                match w.power_at(*x, t) {
                    Ok(m) if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                        out[slot].push(m)
                    }
                    _ => {
                        ok = false;
                        break 'nodes;
                    }
                }
            }
        }
        if ok {
            return Ok(out);
        }
    }
    Err(Error::Quadrature(format!(
        "weight singular at quadrature nodes of cube at {:?}, side {}",
        cube.lower, cube.side
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightClassReport {
    pub p: f64,
    /// Supremum over the largest family.
    pub estimate: f64,
    /// Supremum over each nested family level.
    pub levels: Vec<f64>,
    pub divergent: bool,
    pub family: String,
}

/// Growth above this factor between the last two nested levels flags divergence.
pub const DIVERGENCE_GROWTH: f64 = 1.05;

/// Single-cube value of the matrix A_p functional.
pub fn ap_cube_value(w: &MatrixWeight, p: f64, cube: &Cube, h: f64) -> Result<f64> {
    if !(p > 1.0) {
        return param(format!("A_p functional needs p > 1, got {p}"));
    }
    let pp = p / (p - 1.0);
    let mats = node_powers(w, cube, h, &[1.0 / p, -1.0 / p])?;
    let (plus, minus) = (&mats[0], &mats[1]);
    let cnt = plus.len() as f64;
    let mut outer = crate::sum::Neumaier::default();
    for a in plus {
        let mut inner = crate::sum::Neumaier::default();
        for b in minus {
            inner.add(linalg::spectral_norm(&(a * b)).powf(pp));
        }
        outer.add((inner.value() / cnt).powf(p / pp));
    }
    Ok(outer.value() / cnt)
}

/// Single-cube value of the A_1 functional (esssup by node maximum).
pub fn a1_cube_value(w: &MatrixWeight, cube: &Cube, h: f64) -> Result<f64> {
    let mats = node_powers(w, cube, h, &[1.0, -1.0])?;
    let (wt, winv) = (&mats[0], &mats[1]);
    let cnt = wt.len() as f64;
    let mut best: f64 = 0.0;
    for y in winv {
        let mut acc = crate::sum::Neumaier::default();
        for t in wt {
            acc.add(linalg::spectral_norm(&(t * y)));
        }
        best = best.max(acc.value() / cnt);
    }
    Ok(best)
}

fn scan(
    families: &[Vec<Cube>],
    mut value: impl FnMut(&Cube) -> Result<f64>,
    p: f64,
) -> Result<WeightClassReport> {
    if families.is_empty() {
        return param("cube family is empty");
    }
    let mut levels = Vec::with_capacity(families.len());
    let mut best: f64 = 0.0;
    let mut seen = 0;
    for fam in families {
        for c in &fam[seen.min(fam.len())..] {
            best = best.max(value(c)?);
        }
        seen = fam.len();
        levels.push(best);
    }
    let divergent = levels.len() >= 2
        && levels[levels.len() - 1] > DIVERGENCE_GROWTH * levels[levels.len() - 2];
    let last = families.last().unwrap();
    Ok(WeightClassReport {
        p,
        estimate: best,
        levels,
        divergent,
        family: format!("{} nested levels, {} cubes", families.len(), last.len()),
    })
}

/// `[W]_{A_p}` lower bound over nested families; `p = 1` routes to the A_1 functional.
pub fn ap_constant_estimate(
    w: &MatrixWeight,
    p: f64,
    families: &[Vec<Cube>],
    h: f64,
) -> Result<WeightClassReport> {
    if p == 1.0 {
        return a1_constant_estimate(w, families, h);
    }
    scan(families, |c| ap_cube_value(w, p, c, h), p)
}

pub fn a1_constant_estimate(
    w: &MatrixWeight,
    families: &[Vec<Cube>],
    h: f64,
) -> Result<WeightClassReport> {
    scan(families, |c| a1_cube_value(w, c, h), 1.0)
}

/// `int_Q |W^{1/p}(t) y|^p dt` by composite Gauss-Legendre.
pub fn scalarized_mass(
    w: &MatrixWeight,
    p: f64,
    y: &[Complex64],
    cube: &Cube,
    h: f64,
) -> Result<f64> {
    let rule = CubeRule::new(
        cube.dim,
        cube.lower,
        cube.side,
        cells_per_axis(cube.side, h),
    )?;
    let mut acc = crate::sum::Neumaier::default();
    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
        let m = w.power_at(*x, 1.0 / p)?;
        acc.add(wt * linalg::vec_norm(&linalg::mat_vec(&m, y)).powf(p));
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingPlan {
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<Complex64>>,
}

impl DoublingPlan {
    /// Centres on a line through the origin, dyadic radii, coordinate and
    /// seeded random unit directions.
    pub fn standard(dim: usize, n: usize, extent: f64, seed: u64) -> Self {
        let mut centers = vec![[0.0, 0.0]];
        for i in 1..=4 {
            let t = extent * i as f64 / 4.0;
            centers.push([t, if dim == 2 { t / 2.0 } else { 0.0 }]);
            centers.push([-t / 3.0, 0.0]);
        }
        let radii = (0..6).map(|j| extent / 64.0 * 2f64.powi(j)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut directions: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect();
        for _ in 0..if n > 1 { 4 } else { 0 } {
            directions.push(random_unit(n, &mut rng));
        }
        Self {
            centers,
            radii,
            directions,
        }
    }
}

fn random_unit(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let r = linalg::vec_norm(&v);
        if r > 1e-3 {
            return v.into_iter().map(|z| z / r).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingReport {
    pub beta: f64,
    pub c: f64,
    /// Per-direction exponents; their spread probes the independence of `y`.
    pub beta_by_direction: Vec<f64>,
}

/// Largest observed `int_{R[x,2r]} / int_{R[x,r]}` of `|W^{1/p} y|^p`, with
/// `R[x, r] = x + [-r, r]^n`.
pub fn doubling_exponent_estimate(
    w: &MatrixWeight,
    p: f64,
    plan: &DoublingPlan,
    h: f64,
) -> Result<DoublingReport> {
    if !(p > 0.0) {
        return param("p must be positive");
    }
    let mut by_dir = Vec::with_capacity(plan.directions.len());
    for y in &plan.directions {
        if y.len() != w.n {
            return Err(Error::Structural(
                "direction length differs from weight size".into(),
            ));
        }
        let mut best: f64 = 0.0;
        for x in &plan.centers {
            for &r in &plan.radii {
                let small = scalarized_mass(w, p, y, &Cube::centered(w.dim, *x, 2.0 * r), h)?;
                let big = scalarized_mass(w, p, y, &Cube::centered(w.dim, *x, 4.0 * r), h)?;
                if !(small > 0.0) {
                    return Err(Error::DegenerateWeight(format!(
                        "zero mass on R[{x:?}, {r}]"
                    )));
                }
                best = best.max(big / small);
            }
        }
        by_dir.push(best.log2());
    }
    let beta = by_dir.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DoublingReport {
        beta,
        c: 2f64.powf(beta),
        beta_by_direction: by_dir,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducingMethod {
    ExactP2,
    EllipsoidFit,
}

impl ReducingMethod {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "exact-p2" => Ok(Self::ExactP2),
            "ellipsoid-fit" => Ok(Self::EllipsoidFit),
            other => Err(Error::Registry(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducingOperator {
    pub matrix: CMat,
    /// Fitted condition factor (1 for the exact construction).
    pub kappa: f64,
    pub directions: usize,
}

/// `rho_{p,Q}(u) = (|Q|^{-1} int_Q |W^{1/p}(t) u|^p dt)^{1/p}`.
pub fn rho(w: &MatrixWeight, p: f64, cube: &Cube, u: &[Complex64], h: f64) -> Result<f64> {
    Ok((scalarized_mass(w, p, u, cube, h)? / cube.volume()).powf(1.0 / p))
}

/// `|Q|^{-1} int_Q W`.
pub fn cube_average(w: &MatrixWeight, cube: &Cube, h: f64) -> Result<CMat> {
    let rule = CubeRule::new(
        cube.dim,
        cube.lower,
        cube.side,
        cells_per_axis(cube.side, h),
    )?;
    let mut acc = CMat::zeros(w.n, w.n);
    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
        acc += w.eval(*x) * Complex64::new(*wt, 0.0);
    }
    Ok(acc / Complex64::new(cube.volume(), 0.0))
}

fn fit_directions(n: usize, count: usize) -> Vec<Vec<Complex64>> {
    let e = |i: usize| -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::new((i == j) as u8 as f64, 0.0))
            .collect()
    };
    let mut dirs: Vec<Vec<Complex64>> = (0..n).map(e).collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            let mut a = vec![Complex64::new(0.0, 0.0); n];
            a[i] = Complex64::new(s, 0.0);
            a[j] = Complex64::new(s, 0.0);
            dirs.push(a.clone());
            a[j] = Complex64::new(0.0, s);
            dirs.push(a);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    while dirs.len() < count {
        dirs.push(random_unit(n, &mut rng));
    }
    dirs
}

/// Least-squares Hermitian `G` with `u_i^* G u_i ~ target_i`.
fn fit_quadratic_form(n: usize, dirs: &[Vec<Complex64>], target: &[f64]) -> Result<(CMat, f64)> {
    // Real parameters: G_ii, Re G_ij, Im G_ij (i < j).
    let np = n * n;
    let row = |u: &[Complex64]| -> Vec<f64> {
        let mut r = Vec::with_capacity(np);
        for i in 0..n {
            r.push(u[i].norm_sqr());
        }
        for i in 0..n {
            for j in i + 1..n {
                let z = u[i].conj() * u[j];
                r.push(2.0 * z.re);
                r.push(-2.0 * z.im);
            }
        }
        r
    };
    let a = nalgebra::DMatrix::from_fn(dirs.len(), np, |i, j| row(&dirs[i])[j]);
    let b = nalgebra::DVector::from_column_slice(target);
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let resid = (&a * &x - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
    let mut g = CMat::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = Complex64::new(x[i], 0.0);
    }
    let mut idx = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex64::new(x[idx], x[idx + 1]);
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
            idx += 2;
        }
    }
    Ok((g, resid))
}

/// Relative least-squares residual above which the fit retries with more directions.
pub const FIT_TOLERANCE: f64 = 0.25;

pub fn reducing_operator(
    w: &MatrixWeight,
    p: f64,
    cube: &Cube,
    method: ReducingMethod,
    h: f64,
) -> Result<ReducingOperator> {
    if !(p >= 1.0) {
        return param(format!("p must be >= 1, got {p}"));
    }
    match method {
        ReducingMethod::ExactP2 => {
            if p != 2.0 {
                return param("exact-p2 reducing operators need p = 2");
            }
            let avg = cube_average(w, cube, h)?;
            Ok(ReducingOperator {
                matrix: linalg::hermitian_power(&avg, 0.5)?,
                kappa: 1.0,
                directions: 0,
            })
        }
        ReducingMethod::EllipsoidFit => {
            let n = w.n;
            let mut count = 2 * n * n + 8;
            for _attempt in 0..3 {
                let dirs = fit_directions(n, count);
                let rhos: Vec<f64> = dirs
                    .iter()
                    .map(|u| rho(w, p, cube, u, h))
                    .collect::<Result<_>>()?;
                let target: Vec<f64> = rhos.iter().map(|r| r * r).collect();
                let (g, resid) = fit_quadratic_form(n, &dirs, &target)?;
                let eig = linalg::hermitian_eigenvalues(&g);
                if resid <= FIT_TOLERANCE && eig[0] > 0.0 {
                    let a = linalg::hermitian_power(&g, 0.5)?;
                    let ratios: Vec<f64> = dirs
                        .iter()
                        .zip(&rhos)
                        .map(|(u, r)| linalg::vec_norm(&linalg::mat_vec(&a, u)) / r)
                        .collect();
                    let hi = ratios.iter().copied().fold(0.0, f64::max);
                    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                    return Ok(ReducingOperator {
                        matrix: a,
                        kappa: (hi / lo).sqrt(),
                        directions: count,
                    });
                }
                count *= 4;
            }
            Err(Error::Fit(format!(
                "ellipsoid fit failed on cube at {:?}",
                cube.lower
            )))
        }
    }
}

/// Reducing operators `A_{Q(k,l)}` over a set of lattice cubes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducingFamily {
    pub p: f64,
    pub method: ReducingMethod,
    pub entries: std::collections::BTreeMap<(Ix, Ix), CMat>,
}

impl ReducingFamily {
    pub fn build(
        w: &MatrixWeight,
        p: f64,
        cover: &CoveringParams,
        cubes: impl IntoIterator<Item = (Ix, Ix)>,
        method: ReducingMethod,
        h: f64,
    ) -> Result<Self> {
        let mut entries = std::collections::BTreeMap::new();
        for (k, l) in cubes {
            let q = Cube::from(cover.cube(k, l));
            entries.insert((k, l), reducing_operator(w, p, &q, method, h)?.matrix);
        }
        Ok(Self { p, method, entries })
    }

    pub fn get(&self, k: Ix, l: Ix) -> Result<&CMat> {
        self.entries
            .get(&(k, l))
            .ok_or_else(|| Error::Structural(format!("no reducing operator for Q({k}, {l})")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongDoublingReport {
    pub c: f64,
    pub pairs: usize,
    pub worst: Option<((Ix, Ix), (Ix, Ix))>,
}

/// Right-hand side of the strong doubling bound for `Q = Q(j,l)`, `P = Q(k,m)`.
pub fn strong_doubling_rhs(
    cover: &CoveringParams,
    beta: f64,
    p: f64,
    q: (Ix, Ix),
    pc: (Ix, Ix),
) -> f64 {
    let n = cover.dim as f64;
    let (rj, rk) = (cover.r(q.0), cover.r(pc.0));
    let scale = (rj / rk).powf(n / p).max((rk / rj).powf((beta - n) / p));
    let d = crate::covering::dist(cover.x_kl(q.0, q.1), cover.x_kl(pc.0, pc.1));
    scale * (1.0 + rj.min(rk) * d).powf(beta / p)
}

/// Fitted constant `max ||A_Q A_P^{-1}|| / RHS` over the listed pairs.
pub fn strong_doubling_check(
    family: &ReducingFamily,
    cover: &CoveringParams,
    beta: f64,
    pairs: &[((Ix, Ix), (Ix, Ix))],
) -> Result<StrongDoublingReport> {
    let mut c: f64 = 0.0;
    let mut worst = None;
    for &(q, pc) in pairs {
        let aq = family.get(q.0, q.1)?;
        let ap_inv = linalg::inverse(family.get(pc.0, pc.1)?)?;
        let v = linalg::spectral_norm(&(aq * ap_inv))
            / strong_doubling_rhs(cover, beta, family.p, q, pc);
        if v > c {
            c = v;
            worst = Some((q, pc));
        }
    }
    Ok(StrongDoublingReport {
        c,
        pairs: pairs.len(),
        worst,
    })
}

/// Cell averages `h^{-n} int_cell g_delta` of `g_delta(x) = delta^n (1 + delta |x|)^{-n-1}`
/// on the zero-padded convolution grid (length `2M` per axis, FFT order).
fn kernel_cells(grid: &Grid, delta: f64) -> Vec<f64> {
    let m2 = 2 * grid.points;
    let h = grid.h();
    let off = |i: usize| -> f64 {
        let i = i as i64;
        (if i < m2 as i64 / 2 { i } else { i - m2 as i64 }) as f64 * h
    };
    if grid.dim == 1 {
        // Antiderivative of delta (1 + delta |x|)^{-2} is sign(x) (1 - 1/(1 + delta |x|)).
        let prim = |x: f64| x.signum() * (1.0 - 1.0 / (1.0 + delta * x.abs()));
        return (0..m2)
            .map(|i| (prim(off(i) + h / 2.0) - prim(off(i) - h / 2.0)) / h)
            .collect();
    }
    let g = |x: Point| delta * delta * (1.0 + delta * abs_x(x)).powi(-3);
    let mut out = Vec::with_capacity(m2 * m2);
    for i in 0..m2 {
        for j in 0..m2 {
            let c = [off(i), off(j)];
            // Resolve the spike only in the cells next to the origin.
            let sub = if abs_x(c) < 4.0 * h {
                (8.0 * (1.0 + delta * h)).min(64.0) as usize
            } else {
                4
            };
            let rule =
                CubeRule::new(2, [c[0] - h / 2.0, c[1] - h / 2.0], h, sub).expect("positive cell");
            out.push(rule.integrate(g) / (h * h));
        }
    }
    out
}

fn linear_convolve(grid: &Grid, kernel: &[f64], f: &[Complex64]) -> Vec<Complex64> {
    use rustfft::FftPlanner;
    let m = grid.points;
    let m2 = 2 * m;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m2);
    let inv = planner.plan_fft_inverse(m2);
    let run = |data: &mut Vec<Complex64>, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>| {
        if grid.dim == 1 {
            plan.process(data);
            return;
        }
        for row in data.chunks_mut(m2) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); m2];
        for c in 0..m2 {
            for r in 0..m2 {
                col[r] = data[r * m2 + c];
            }
            plan.process(&mut col);
            for r in 0..m2 {
                data[r * m2 + c] = col[r];
            }
        }
    };
    let total = m2.pow(grid.dim as u32);
    let mut a = vec![Complex64::new(0.0, 0.0); total];
    for (j, z) in f.iter().enumerate() {
        let idx = if grid.dim == 1 {
            j
        } else {
            (j / m) * m2 + j % m
        };
        a[idx] = *z;
    }
    let mut k: Vec<Complex64> = kernel.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    run(&mut a, &fwd);
    run(&mut k, &fwd);
    for (x, y) in a.iter_mut().zip(&k) {
        *x *= y;
    }
    run(&mut a, &inv);
    let scale = grid.cell_volume() / total as f64;
    (0..grid.len())
        .map(|j| {
            let idx = if grid.dim == 1 {
                j
            } else {
                (j / m) * m2 + j % m
            };
            a[idx] * scale
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionProbe {
    pub deltas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// `||g_delta * f||_{L^p(W)} / ||f||_{L^p(W)}` over a set of dilations.
/// The convolution is linear (zero padded), not periodic.
pub fn convolution_bound_probe(
    w: &MatrixWeight,
    p: f64,
    f: &VectorSignal,
    deltas: &[f64],
) -> Result<ConvolutionProbe> {
    let norm = crate::norms::LpWeightedNorm::new(w, p, f.grid)?;
    let base = norm.norm(f)?;
    let mut ratios = Vec::with_capacity(deltas.len());
    for &d in deltas {
        if !(d > 0.0) {
            return param("dilations must be positive");
        }
        if base == 0.0 {
            ratios.push(0.0);
            continue;
        }
        let kern = kernel_cells(&f.grid, d);
        let comps = f
            .components
            .iter()
            .map(|c| linear_convolve(&f.grid, &kern, c))
            .collect();
        let g = VectorSignal::new(f.grid, comps)?;
        ratios.push(norm.norm(&g)? / base);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ConvolutionProbe {
        deltas: deltas.to_vec(),
        ratios,
        max_ratio,
    })
}

/// `int_{[-R,R]^n} ||W^{1/p}(x)||^p <x>^{-n(p+eps)} dx` for the given radii;
/// convergence as `R` grows indicates moderate average growth.
pub fn growth_integral(
    w: &MatrixWeight,
    p: f64,
    eps: f64,
    radii: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let n = w.dim as f64;
    radii
        .iter()
        .map(|&r| {
            let cube = Cube::centered(w.dim, [0.0, 0.0], 2.0 * r);
            let rule = CubeRule::new(w.dim, cube.lower, cube.side, cells_per_axis(cube.side, h))?;
            let mut acc = crate::sum::Neumaier::default();
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                let m = w.power_at(*x, 1.0 / p)?;
                let b = (1.0 + x[0] * x[0] + x[1] * x[1]).sqrt();
                acc.add(wt * linalg::spectral_norm(&m).powf(p) * b.powf(-n * (p + eps)));
            }
            Ok(acc.value())
        })
        .collect()
}

/// `int_R (1 + |x|)^{-n-1} dx`: 2 for `n = 1`, `2 pi` for `n = 2`.
pub fn kernel_l1(dim: usize) -> f64 {
    if dim == 1 {
        2.0
    } else {
        // 2 pi int_0^inf r (1 + r)^{-3} dr = 2 pi * 1/2
        PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weight_is_ap_one() {
        let m = linalg::from_real(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let w = MatrixWeight::constant(1, m).unwrap();
        let fams = dyadic_families(1, &[[0.0, 0.0], [3.0, 0.0]], 0.5, 3);
        for p in [1.5, 2.0, 3.0] {
            let r = ap_constant_estimate(&w, p, &fams, 0.1).unwrap();
            assert!((r.estimate - 1.0).abs() < 1e-10, "{}", r.estimate);
            assert!(!r.divergent);
        }
        let r = a1_constant_estimate(&w, &fams, 0.1).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scalar_agrees_with_independent_quadrature() {
        // Oracle: classical scalar A_2 functional with the same midpoint nodes.
        let w = MatrixWeight::scalar(1, "abs_pow:0.5").unwrap();
        let cube = Cube::centered(1, [0.3, 0.0], 2.0);
        let h = 0.05;
        let m = cells_per_axis(2.0, h);
        let d = 2.0 / m as f64;
        let xs: Vec<f64> = (0..m).map(|i| -0.7 + (i as f64 + 0.5) * d).collect();
        let a: f64 = xs.iter().map(|x| x.abs().sqrt()).sum::<f64>() / m as f64;
        let b: f64 = xs.iter().map(|x| 1.0 / x.abs().sqrt()).sum::<f64>() / m as f64;
        let got = ap_cube_value(&w, 2.0, &cube, h).unwrap();
        assert!((got - a * b).abs() <= 1e-8 * a * b);
        // A_1 oracle: max_y avg(w) / w(y).
        let wmin = xs
            .iter()
            .map(|x| x.abs().sqrt())
            .fold(f64::INFINITY, f64::min);
        let got = a1_cube_value(&w, &cube, h).unwrap();
        assert!((got - a / wmin).abs() <= 1e-8 * got);
    }

    #[test]
    fn power_weights_classified() {
        let fams = dyadic_families(1, &[[0.0, 0.0]], 1.0, 4);
        let h = 0.05;
        let good = ap_constant_estimate(
            &MatrixWeight::scalar(1, "abs_pow:0.5").unwrap(),
            2.0,
            &fams,
            h,
        )
        .unwrap();
        assert!(!good.divergent, "{:?}", good.levels);
        assert!(good.estimate < 4.0 / 3.0 + 1e-9);
        let bad = ap_constant_estimate(
            &MatrixWeight::scalar(1, "abs_pow:1").unwrap(),
            2.0,
            &fams,
            h,
        )
        .unwrap();
        assert!(bad.divergent, "{:?}", bad.levels);
        assert!(bad.levels.windows(2).all(|v| v[1] > v[0]));
        let a1_good =
            a1_constant_estimate(&MatrixWeight::scalar(1, "abs_pow:-0.5").unwrap(), &fams, h)
                .unwrap();
        assert!(!a1_good.divergent && a1_good.estimate.is_finite());
        let a1_bad =
            a1_constant_estimate(&MatrixWeight::scalar(1, "abs_pow:0.5").unwrap(), &fams, h)
                .unwrap();
        assert!(a1_bad.divergent, "{:?}", a1_bad.levels);
    }

    #[test]
    fn lattice_families_scale_stable() {
        let fams = dyadic_lattice_families(1, 4.0, 0.25, 4);
        assert_eq!(fams[0].len(), 32);
        assert_eq!(fams[3].len(), 32 + 16 + 8 + 4);
        let h = 0.25 / 16.0;
        let good = ap_constant_estimate(
            &MatrixWeight::scalar(1, "abs_pow:0.5").unwrap(),
            2.0,
            &fams,
            h,
        )
        .unwrap();
        // [0, s] gives (2/3)(2) = 4/3 at every scale.
        assert!(
            !good.divergent && (good.estimate - 4.0 / 3.0).abs() < 0.03,
            "{:?}",
            good.levels
        );
        let bad = ap_constant_estimate(
            &MatrixWeight::scalar(1, "abs_pow:1").unwrap(),
            2.0,
            &fams,
            h,
        )
        .unwrap();
        assert!(bad.divergent, "{:?}", bad.levels);
    }

    #[test]
    fn doubling_examples() {
        let h = 0.01;
        for dim in [1, 2] {
            let w = MatrixWeight::identity(dim, 1);
            let plan = DoublingPlan::standard(dim, 1, 4.0, 1);
            let plan = DoublingPlan {
                radii: plan.radii[..3].to_vec(),
                centers: plan.centers[..3].to_vec(),
                ..plan
            };
            let r =
                doubling_exponent_estimate(&w, 2.0, &plan, if dim == 1 { h } else { 0.2 }).unwrap();
            assert!((r.c - 2f64.powi(dim as i32)).abs() < 1e-10, "{}", r.c);
        }
        let w = MatrixWeight::scalar(1, "abs_pow:1").unwrap();
        let plan = DoublingPlan::standard(1, 1, 8.0, 1);
        let r = doubling_exponent_estimate(&w, 1.0, &plan, h).unwrap();
        assert!((r.beta - 2.0).abs() < 0.05, "{}", r.beta);
    }

    #[test]
    fn reducing_examples() {
        let h = 0.01;
        let cube = Cube {
            dim: 1,
            lower: [0.0, 0.0],
            side: 1.0,
        };
        let w = MatrixWeight::bracket_power(1, vec![0.0, 2.0]).unwrap();
        let a = reducing_operator(&w, 2.0, &cube, ReducingMethod::ExactP2, h)
            .unwrap()
            .matrix;
        assert!((a[(0, 0)].re - 1.0).abs() < 1e-8);
        assert!((a[(1, 1)].re - 2.0 / 3f64.sqrt()).abs() < 1e-8);
        assert!(a[(0, 1)].norm() < 1e-12);

        let id = MatrixWeight::identity(1, 2);
        for p in [1.0, 2.0, 3.5] {
            let a = reducing_operator(&id, p, &cube, ReducingMethod::EllipsoidFit, h)
                .unwrap()
                .matrix;
            assert!((a - linalg::identity(2)).norm() < 1e-10);
        }
        let d = linalg::from_real(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let wd = MatrixWeight::constant(1, d.clone()).unwrap();
        let a = reducing_operator(&wd, 2.0, &cube, ReducingMethod::ExactP2, h)
            .unwrap()
            .matrix;
        assert!((&a * &a - d).norm() < 1e-12);
    }

    #[test]
    fn ellipsoid_fit_matches_exact_at_p2() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cube = Cube {
            dim: 1,
            lower: [-0.4, 0.0],
            side: 1.3,
        };
        for _ in 0..5 {
            let a = rng.gen_range(0.5..2.0);
            let b = rng.gen_range(0.5..2.0);
            let c = rng.gen_range(-0.4..0.4);
            let base = linalg::from_real(&[vec![a, c], vec![c, b]]).unwrap();
            let w = MatrixWeight::new(
                1,
                WeightSpec::ConstantPlusPower {
                    base,
                    gammas: vec![0.5, 0.3],
                    eps: 0.0,
                },
            )
            .unwrap();
            let ex = reducing_operator(&w, 2.0, &cube, ReducingMethod::ExactP2, 0.01).unwrap();
            let fit =
                reducing_operator(&w, 2.0, &cube, ReducingMethod::EllipsoidFit, 0.01).unwrap();
            assert!((ex.matrix - fit.matrix).norm() < 1e-8);
            assert!(fit.kappa < 1.0 + 1e-8);
        }
    }

    #[test]
    fn strong_doubling_identity() {
        let cover = CoveringParams::new(0.5, 1, 3).unwrap();
        let cubes: Vec<(Ix, Ix)> = (-2..=2)
            .flat_map(|k| (-3..=3).map(move |l| (Ix::d1(k), Ix::d1(l))))
            .collect();
        let fam = ReducingFamily::build(
            &MatrixWeight::identity(1, 2),
            2.0,
            &cover,
            cubes.clone(),
            ReducingMethod::ExactP2,
            0.05,
        )
        .unwrap();
        let pairs: Vec<_> = cubes
            .iter()
            .flat_map(|a| cubes.iter().map(move |b| (*a, *b)))
            .collect();
        let rep = strong_doubling_check(&fam, &cover, 1.0, &pairs).unwrap();
        assert!(rep.c <= 1.0 + 1e-12);
        let same = strong_doubling_check(&fam, &cover, 1.0, &[(cubes[3], cubes[3])]).unwrap();
        assert!((same.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn young_bound_for_unweighted_convolution() {
        let g = Grid::new(1, 40.0, 1024).unwrap();
        let f = crate::grid::sample_closed_form(
            &crate::grid::SignalSpec::Gaussian {
                sigma: 1.0,
                center: [0.0; 2],
            },
            g,
            1,
        )
        .unwrap();
        let probe = convolution_bound_probe(
            &MatrixWeight::identity(1, 1),
            2.0,
            &f,
            &[0.01, 0.1, 1.0, 10.0, 100.0],
        )
        .unwrap();
        assert!(probe.max_ratio <= kernel_l1(1) + 1e-9, "{:?}", probe.ratios);
        let zero = VectorSignal::zeros(g, 1);
        assert_eq!(
            convolution_bound_probe(&MatrixWeight::identity(1, 1), 2.0, &zero, &[1.0])
                .unwrap()
                .max_ratio,
            0.0
        );
    }

    #[test]
    fn dual_weight_is_ap_prime() {
        let fams = dyadic_families(1, &[[0.0, 0.0], [2.0, 0.0]], 1.0, 3);
        let p: f64 = 3.0;
        let pp = p / (p - 1.0);
        let w = MatrixWeight::rotated_power(1, 0.4, vec![0.5, -0.3], 0.0).unwrap();
        let a = ap_constant_estimate(&w, p, &fams, 0.05).unwrap();
        let d = ap_constant_estimate(&w.pow(-pp / p), pp, &fams, 0.05).unwrap();
        assert!(a.estimate.is_finite() && d.estimate.is_finite());
        assert!(!a.divergent && !d.divergent);
    }
}
