//! Alpha-covering geometry: frequency patches `B(xi_k, c1 r_k)` with
//! `r_k = <k>^{alpha/(1-alpha)}`, `xi_k = k r_k`, and the time cubes
//! `Q(k, l) = (pi/a) r_k^{-1} (l + [0,1)^n)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{param, Error, Result};
use crate::grid::Point;

/// Lattice index in `Z^n`, zero-padded when `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ix(pub [i64; 2]);

impl Ix {
    pub const ZERO: Ix = Ix([0, 0]);

    pub fn d1(k: i64) -> Self {
        Ix([k, 0])
    }

    pub fn norm_sq(&self) -> i64 {
        self.0[0] * self.0[0] + self.0[1] * self.0[1]
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn sup_norm(&self) -> i64 {
        self.0[0].abs().max(self.0[1].abs())
    }

    pub fn neg(&self) -> Self {
        Ix([-self.0[0], -self.0[1]])
    }

    pub fn sub(&self, o: &Ix) -> Self {
        Ix([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }

    pub fn as_point(&self) -> Point {
        [self.0[0] as f64, self.0[1] as f64]
    }

    /// Reduction order: increasing `|k|`, lexicographic ties.
    pub fn order_key(&self) -> (i64, [i64; 2]) {
        (self.norm_sq(), self.0)
    }
}

impl std::fmt::Display for Ix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.0[0], self.0[1])
    }
}

/// All indices with `|k|_inf <= radius` in reduction order.
pub fn lattice_ball(dim: usize, radius: i64) -> Vec<Ix> {
    let r1 = if dim == 2 { radius } else { 0 };
    let mut out: Vec<Ix> = (-radius..=radius)
        .flat_map(|a| (-r1..=r1).map(move |b| Ix([a, b])))
        .collect();
    out.sort_by_key(Ix::order_key);
    out
}

pub fn bracket(v: Point) -> f64 {
    (1.0 + v[0] * v[0] + v[1] * v[1]).sqrt()
}

pub fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha == 1.0 {
        return Err(Error::UnsupportedEndpoint);
    }
    if !(0.0..1.0).contains(&alpha) {
        return param(format!("alpha must lie in [0, 1), got {alpha}"));
    }
    Ok(())
}

pub fn r_of_k(alpha: f64, k: Ix) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(bracket(k.as_point()).powf(alpha / (1.0 - alpha)))
}

pub fn xi_of_k(alpha: f64, k: Ix) -> Result<Point> {
    let r = r_of_k(alpha, k)?;
    Ok([k.0[0] as f64 * r, k.0[1] as f64 * r])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveringParams {
    pub alpha: f64,
    pub dim: usize,
    pub c1: f64,
    pub a: f64,
    pub kmax: i64,
}

impl CoveringParams {
    /// Defaults `c1 = sqrt(n)` and `a = max(2 c1, pi sqrt(n)/2) + 0.25`.
    pub fn new(alpha: f64, dim: usize, kmax: i64) -> Result<Self> {
        let c1 = (dim as f64).sqrt();
        let a = Self::a_floor(dim, c1) + 0.25;
        Self::with_constants(alpha, dim, c1, a, kmax)
    }

    pub fn a_floor(dim: usize, c1: f64) -> f64 {
        (2.0 * c1).max(PI * (dim as f64).sqrt() / 2.0)
    }

    pub fn with_constants(alpha: f64, dim: usize, c1: f64, a: f64, kmax: i64) -> Result<Self> {
        check_alpha(alpha)?;
        if dim != 1 && dim != 2 {
            return param(format!("dimension must be 1 or 2, got {dim}"));
        }
        if !(c1 > 0.0) {
            return param(format!("c1 must be positive, got {c1}"));
        }
        if !(a >= Self::a_floor(dim, c1)) {
            return param(format!(
                "a = {a} is below max(2 c1, pi sqrt(n)/2) = {}",
                Self::a_floor(dim, c1)
            ));
        }
        if kmax < 1 {
            return param(format!("kmax must be >= 1, got {kmax}"));
        }
        Ok(Self {
            alpha,
            dim,
            c1,
            a,
            kmax,
        })
    }

    pub fn r(&self, k: Ix) -> f64 {
        bracket(k.as_point()).powf(self.alpha / (1.0 - self.alpha))
    }

    pub fn xi(&self, k: Ix) -> Point {
        let r = self.r(k);
        [k.0[0] as f64 * r, k.0[1] as f64 * r]
    }

    pub fn patch(&self, k: Ix) -> FreqPatch {
        let r = self.r(k);
        FreqPatch {
            k,
            r,
            xi: [k.0[0] as f64 * r, k.0[1] as f64 * r],
            radius: self.c1 * r,
        }
    }

    /// Truncated index set `|k|_inf <= kmax`, reduction order.
    pub fn indices(&self) -> Vec<Ix> {
        lattice_ball(self.dim, self.kmax)
    }

    pub fn in_range(&self, k: Ix) -> bool {
        k.sup_norm() <= self.kmax && (self.dim == 2 || k.0[1] == 0)
    }

    pub fn with_kmax(&self, kmax: i64) -> Self {
        Self { kmax, ..*self }
    }

    pub fn cube_side(&self, k: Ix) -> f64 {
        PI / self.a / self.r(k)
    }

    pub fn cube(&self, k: Ix, l: Ix) -> TimeCube {
        let side = self.cube_side(k);
        let anchor = [
            side * l.0[0] as f64,
            if self.dim == 2 {
                side * l.0[1] as f64
            } else {
                0.0
            },
        ];
        TimeCube {
            dim: self.dim,
            k,
            l,
            anchor,
            side,
            volume: side.powi(self.dim as i32),
        }
    }

    /// Point `x_{k,l} = (pi/a) r_k^{-1} l`.
    pub fn x_kl(&self, k: Ix, l: Ix) -> Point {
        self.cube(k, l).anchor
    }

    /// The `l` with `x_{k,l}` in `[-T, T)^n`, lexicographic.
    pub fn l_range(&self, k: Ix, halfwidth: f64) -> Vec<Ix> {
        let side = self.cube_side(k);
        let lo = (-halfwidth / side).ceil() as i64;
        let hi = (halfwidth / side).ceil() as i64 - 1;
        let (lo1, hi1) = if self.dim == 2 { (lo, hi) } else { (0, 0) };
        (lo..=hi)
            .flat_map(|a| (lo1..=hi1).map(move |b| Ix([a, b])))
            .collect()
    }

    /// Index of the cube `Q(k, .)` containing `x`.
    pub fn locate(&self, k: Ix, x: Point) -> Ix {
        let side = self.cube_side(k);
        let l0 = (x[0] / side).floor() as i64;
        let l1 = if self.dim == 2 {
            (x[1] / side).floor() as i64
        } else {
            0
        };
        Ix([l0, l1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqPatch {
    pub k: Ix,
    pub r: f64,
    pub xi: Point,
    pub radius: f64,
}

impl FreqPatch {
    pub fn contains(&self, xi: Point) -> bool {
        dist(xi, self.xi) < self.radius
    }

    pub fn volume(&self, dim: usize) -> f64 {
        if dim == 1 {
            2.0 * self.radius
        } else {
            PI * self.radius * self.radius
        }
    }
}

/// Half-open cube `anchor + [0, side)^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCube {
    pub dim: usize,
    pub k: Ix,
    pub l: Ix,
    pub anchor: Point,
    pub side: f64,
    pub volume: f64,
}

impl TimeCube {
    pub fn contains(&self, x: Point) -> bool {
        (0..self.dim).all(|a| x[a] >= self.anchor[a] && x[a] < self.anchor[a] + self.side)
    }

    pub fn center(&self) -> Point {
        self.anchor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub covers_domain: bool,
    pub first_gap: Option<Point>,
    pub samples: usize,
    pub n0: usize,
    pub size_ratio_min: f64,
    pub size_ratio_max: f64,
    pub eccentricity: f64,
    /// Max of `r_k / r_j` over intersecting pairs.
    pub max_scale_ratio: f64,
}

fn intersects(p: &FreqPatch, q: &FreqPatch, stretch: f64) -> bool {
    dist(p.xi, q.xi) < stretch * (p.radius + q.radius)
}

/// Continuous index `t >= 0` with `t <t>^{alpha/(1-alpha)} = s`.
fn invert_scale(alpha: f64, s: f64) -> f64 {
    let f = |t: f64| t * (1.0 + t * t).sqrt().powf(alpha / (1.0 - alpha));
    let (mut lo, mut hi) = (0.0, s.max(1.0));
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Truncated patches whose ball contains `xi`.
pub fn patches_containing(params: &CoveringParams, xi: Point) -> Vec<Ix> {
    patches_within(params, xi, 1.0, true)
}

/// Patches with `|xi - xi_k| < stretch c1 r_k`, optionally restricted to the
/// truncated index set.
pub fn patches_within(
    params: &CoveringParams,
    xi: Point,
    stretch: f64,
    truncated: bool,
) -> Vec<Ix> {
    let s = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
    let t = invert_scale(params.alpha, s);
    let rt = bracket([t, 0.0]).powf(params.alpha / (1.0 - params.alpha));
    let guess = [(xi[0] / rt).round() as i64, (xi[1] / rt).round() as i64];
    let reach = (stretch * params.c1).ceil() as i64 + 2;
    let r1 = if params.dim == 2 { reach } else { 0 };
    let mut out = Vec::new();
    for a in -reach..=reach {
        for b in -r1..=r1 {
            let k = Ix([guess[0] + a, if params.dim == 2 { guess[1] + b } else { 0 }]);
            if truncated && !params.in_range(k) {
                continue;
            }
            let p = params.patch(k);
            if dist(xi, p.xi) < stretch * p.radius {
                out.push(k);
            }
        }
    }
    out.sort_by_key(Ix::order_key);
    out
}

fn neighbors_stretched(params: &CoveringParams, k: Ix, stretch: f64) -> Vec<Ix> {
    let pk = params.patch(k);
    let mut out = vec![k];
    let mut shell = 1i64;
    let mut empty_shells = 0;
    while empty_shells < 2 {
        let mut hit = false;
        for j in lattice_ball(params.dim, shell) {
            if j.sup_norm() != shell {
                continue;
            }
            let cand = Ix([k.0[0] + j.0[0], k.0[1] + j.0[1]]);
            if intersects(&pk, &params.patch(cand), stretch) {
                out.push(cand);
                hit = true;
            }
        }
        empty_shells = if hit { 0 } else { empty_shells + 1 };
        shell += 1;
    }
    out.sort_by_key(Ix::order_key);
    out
}

/// `N(k) = {m : B_m meets B_k}` over the full family.
pub fn patch_neighbors(params: &CoveringParams, k: Ix) -> Vec<Ix> {
    neighbors_stretched(params, k, 1.0)
}

/// Indices whose window supports `B(xi_m, 1.5 c1 r_m)` meet that of `k`.
pub fn window_neighbors(params: &CoveringParams, k: Ix) -> Vec<Ix> {
    neighbors_stretched(params, k, 1.5)
}

/// Validate the truncated covering on `[-domain, domain]^n`, sampling at `step`.
pub fn check_admissible(
    params: &CoveringParams,
    domain: f64,
    step: f64,
) -> Result<AdmissibilityReport> {
    if !(step > 0.0) || !(domain > 0.0) {
        return param("domain and step must be positive");
    }
    let per_axis = (2.0 * domain / step).floor() as usize + 1;
    let axis: Vec<f64> = (0..per_axis).map(|i| -domain + i as f64 * step).collect();
    let mut covers = true;
    let mut first_gap = None;
    let mut samples = 0usize;
    let axis1: Vec<f64> = if params.dim == 2 {
        axis.clone()
    } else {
        vec![0.0]
    };
    'outer: for &u in &axis {
        for &v in &axis1 {
            samples += 1;
            if patches_containing(params, [u, v]).is_empty() {
                covers = false;
                first_gap = Some([u, v]);
                break 'outer;
            }
        }
    }

    let idx = params.indices();
    let patches: Vec<FreqPatch> = idx.iter().map(|&k| params.patch(k)).collect();
    let mut n0 = 0;
    let mut max_ratio: f64 = 1.0;
    for p in &patches {
        let mut count = 0;
        for q in &patches {
            if intersects(p, q, 1.0) {
                count += 1;
                max_ratio = max_ratio.max(p.r / q.r);
            }
        }
        n0 = n0.max(count);
    }

    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in &patches {
        let vol = p.volume(params.dim);
        let mut probe = vec![p.xi];
        let dirs: &[Point] = if params.dim == 1 {
            &[[1.0, 0.0], [-1.0, 0.0]]
        } else {
            &[
                [1.0, 0.0],
                [-1.0, 0.0],
                [0.0, 1.0],
                [0.0, -1.0],
                [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
                [-FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
            ]
        };
        for d in dirs {
            for t in [0.5, 0.999] {
                probe.push([p.xi[0] + t * p.radius * d[0], p.xi[1] + t * p.radius * d[1]]);
            }
        }
        for xi in probe {
            let ratio = vol / bracket(xi).powf(params.alpha * params.dim as f64);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }

    Ok(AdmissibilityReport {
        covers_domain: covers,
        first_gap,
        samples,
        n0,
        size_ratio_min: lo,
        size_ratio_max: hi,
        eccentricity: 1.0,
        max_scale_ratio: max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scale_examples() {
        assert_eq!(r_of_k(0.0, Ix::d1(7)).unwrap(), 1.0);
        assert_eq!(r_of_k(0.6, Ix::ZERO).unwrap(), 1.0);
        assert!((r_of_k(0.5, Ix::d1(2)).unwrap() - 2.2360680).abs() < 1e-7);
        assert_eq!(xi_of_k(0.0, Ix::d1(-3)).unwrap(), [-3.0, 0.0]);
        assert_eq!(xi_of_k(0.3, Ix::ZERO).unwrap(), [0.0, 0.0]);
        assert!((xi_of_k(0.5, Ix::d1(2)).unwrap()[0] - 4.4721360).abs() < 1e-7);
        assert_eq!(r_of_k(1.0, Ix::d1(1)), Err(Error::UnsupportedEndpoint));
    }

    #[test]
    fn cube_examples() {
        let p = CoveringParams::with_constants(0.0, 1, 1.0, PI, 4).unwrap();
        let q = p.cube(Ix::ZERO, Ix::d1(3));
        assert!((q.anchor[0] - 3.0).abs() < 1e-15 && (q.side - 1.0).abs() < 1e-15);
        assert!((q.volume - 1.0).abs() < 1e-15);
        let p2 = CoveringParams::with_constants(0.0, 1, 1.0, 2.0 * PI, 4).unwrap();
        let q = p2.cube(Ix::d1(5), Ix::d1(3));
        assert!((q.anchor[0] - 1.5).abs() < 1e-15 && (q.anchor[0] + q.side - 2.0).abs() < 1e-15);
        let p3 = CoveringParams::with_constants(0.5, 1, 1.0, PI, 4).unwrap();
        let q = p3.cube(Ix::d1(2), Ix::ZERO);
        assert_eq!(q.anchor[0], 0.0);
        assert!((q.side - 5f64.powf(-0.5)).abs() < 1e-15);
        assert!((q.volume - 5f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn rejects_small_a() {
        assert!(CoveringParams::with_constants(0.0, 1, 1.0, 1.5, 4).is_err());
        let d = CoveringParams::new(0.3, 2, 3).unwrap();
        assert!((d.c1 - 2f64.sqrt()).abs() < 1e-15);
        assert!((d.a - (2.0 * 2f64.sqrt() + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn admissibility_examples() {
        let p = CoveringParams::with_constants(0.0, 1, 1.0, 2.25, 12).unwrap();
        let rep = check_admissible(&p, 10.0, 0.01).unwrap();
        assert!(rep.covers_domain);
        assert!(rep.n0 <= 3);
        assert_eq!(rep.eccentricity, 1.0);
        assert!(rep.size_ratio_min > 0.0 && rep.size_ratio_max.is_finite());

        let p = CoveringParams::with_constants(0.0, 1, 0.4, 2.25, 12).unwrap();
        let rep = check_admissible(&p, 10.0, 0.01).unwrap();
        assert!(!rep.covers_domain);
        assert!(patches_containing(&p, [0.5, 0.0]).is_empty());
    }

    #[test]
    fn size_ratio_at_centres() {
        // |B_k| / <xi_k>^{alpha n} = 2 c1 r_k / <xi_k>^alpha for n = 1.
        let p = CoveringParams::new(0.5, 1, 8).unwrap();
        for k in p.indices() {
            let pk = p.patch(k);
            let v = 2.0 * p.c1 * pk.r / bracket(pk.xi).powf(p.alpha);
            assert!(v.is_finite() && v > 0.0);
        }
        let rep = check_admissible(&p, 20.0, 0.05).unwrap();
        assert!(rep.covers_domain);
        assert!(rep.max_scale_ratio <= 4.0);
    }

    #[test]
    fn neighbor_examples() {
        let p = CoveringParams::with_constants(0.0, 1, 1.0, 2.25, 12).unwrap();
        assert_eq!(
            patch_neighbors(&p, Ix::d1(5)),
            vec![Ix::d1(4), Ix::d1(5), Ix::d1(6)]
        );
        let p = CoveringParams::with_constants(0.0, 1, 0.4, 2.25, 12).unwrap();
        assert_eq!(patch_neighbors(&p, Ix::d1(5)), vec![Ix::d1(5)]);
    }

    #[test]
    fn cubes_partition_the_line() {
        let p = CoveringParams::new(0.5, 1, 4).unwrap();
        let k = Ix::d1(3);
        for i in 0..200 {
            let x = -7.3 + i as f64 * 0.0731;
            let hits = (-60..60)
                .filter(|&l| p.cube(k, Ix::d1(l)).contains([x, 0.0]))
                .count();
            assert_eq!(hits, 1);
            assert!(p.cube(k, p.locate(k, [x, 0.0])).contains([x, 0.0]));
        }
    }

    #[test]
    fn l_range_is_one_period() {
        let p = CoveringParams::new(0.0, 1, 4).unwrap();
        let t = 10.0;
        let ls = p.l_range(Ix::ZERO, t);
        for l in &ls {
            let x = p.x_kl(Ix::ZERO, *l)[0];
            assert!((-t..t).contains(&x));
        }
        let side = p.cube_side(Ix::ZERO);
        assert!(p.x_kl(Ix::ZERO, Ix::d1(ls[0].0[0] - 1))[0] < -t);
        assert!(p.x_kl(Ix::ZERO, Ix::d1(ls.last().unwrap().0[0] + 1))[0] >= t - 1e-12 * side);
    }

    proptest! {
        #[test]
        fn self_is_neighbor(alpha in 0.0f64..0.9, k0 in -20i64..20, k1 in -20i64..20, two in proptest::bool::ANY) {
            let dim = if two { 2 } else { 1 };
            let p = CoveringParams::new(alpha, dim, 4).unwrap();
            let k = Ix([k0, if two { k1 } else { 0 }]);
            prop_assert!(patch_neighbors(&p, k).contains(&k));
        }

        #[test]
        fn scale_monotone(alpha in 0.0f64..0.95, a in 0i64..50, b in 0i64..50) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(r_of_k(alpha, Ix::d1(lo)).unwrap() <= r_of_k(alpha, Ix::d1(hi)).unwrap());
            prop_assert!(r_of_k(alpha, Ix::d1(lo)).unwrap() >= 1.0);
        }

        #[test]
        fn intersecting_scales_comparable(alpha in 0.0f64..0.75, k in -30i64..30) {
            let p = CoveringParams::new(alpha, 1, 4).unwrap();
            for j in patch_neighbors(&p, Ix::d1(k)) {
                let ratio = p.r(j) / p.r(Ix::d1(k));
                prop_assert!((0.25..=4.0).contains(&ratio));
            }
        }
    }
}
