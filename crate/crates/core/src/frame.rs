//! Band-limited tight frame `phi_{k,l}` with spectrum `theta_k(xi) e_{k,l}(xi)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::almostdiag::DecayMatrix;
use crate::bapu::{Band, BandTable, BapuSystem, Window};
use crate::covering::{bracket, dist, lattice_ball, CoveringParams, Ix};
use crate::error::{Error, Result};
use crate::grid::{
    band_sum, forward_ft, inverse_factor, inverse_ft, BandBox, Grid, Point, SpectralSignal,
    VectorSignal,
};
use crate::multiplier::Symbol;
use crate::sum::Neumaier;

/// Finitely supported map `(k, l) -> C^N`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoeffSeq {
    pub n: usize,
    pub entries: BTreeMap<(Ix, Ix), Vec<Complex64>>,
}

impl CoeffSeq {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, k: Ix, l: Ix, v: Vec<Complex64>) {
        assert_eq!(v.len(), self.n, "coefficient vector length");
        self.entries.insert((k, l), v);
    }

    pub fn get(&self, k: Ix, l: Ix) -> Option<&Vec<Complex64>> {
        self.entries.get(&(k, l))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct band indices in reduction order (increasing `|k|`, lexicographic).
    pub fn bands(&self) -> Vec<Ix> {
        let mut ks: Vec<Ix> = self.entries.keys().map(|(k, _)| *k).collect();
        ks.dedup();
        ks.sort_by_key(Ix::order_key);
        ks
    }

    pub fn band(&self, k: Ix) -> impl Iterator<Item = (Ix, &Vec<Complex64>)> + '_ {
        self.entries
            .range((k, Ix([i64::MIN, i64::MIN]))..=(k, Ix([i64::MAX, i64::MAX])))
            .map(|((_, l), v)| (*l, v))
    }

    pub fn sum_sq(&self) -> f64 {
        crate::sum::sum(
            self.entries
                .values()
                .flat_map(|v| v.iter().map(|z| z.norm_sqr())),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|v| v.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(key, v)| (*key, v.iter().map(|z| z * s).collect()))
            .collect();
        Self { n: self.n, entries }
    }
}

/// One atom or molecule: spectral values on its band box.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAtom {
    pub k: Ix,
    pub l: Ix,
    pub r: f64,
    /// Nominal centre `x_{k,l}`.
    pub center: Point,
    pub bb: BandBox,
    /// Spectral samples at the box nodes, `BandBox::iter` order.
    pub spectrum: Vec<Complex64>,
}

impl FrameAtom {
    pub fn to_spectral(&self, grid: Grid) -> SpectralSignal {
        let mut s = SpectralSignal::zeros(grid, 1);
        for (m, v) in self.bb.iter().zip(&self.spectrum) {
            if let Some(j) = grid.freq_flat(m) {
                s.components[0][j] = *v;
            }
        }
        s
    }

    pub fn time(&self, grid: Grid) -> Result<VectorSignal> {
        inverse_ft(&self.to_spectral(grid))
    }

    /// `||phi||_2^2` from the spectral samples.
    pub fn norm_sq(&self, grid: &Grid) -> f64 {
        crate::sum::sum(self.spectrum.iter().map(|z| z.norm_sqr())) * grid.dual_cell_volume()
    }
}

/// Atom families compared against the frame: the frame itself, shifted copies
/// `phi_{k,l}(x - shift / r_k)`, or `<xi_k>^{-b} m(D) phi_{k,l}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Molecule {
    Frame,
    Shifted { shift: f64 },
    Multiplied { symbol: Symbol, b: f64 },
}

impl Molecule {
    /// Band-dependent spectral factor.
    pub fn modifier(&self, params: &CoveringParams, k: Ix, xi: Point) -> Complex64 {
        match self {
            Self::Frame => Complex64::new(1.0, 0.0),
            Self::Shifted { shift } => {
                let s = shift / params.r(k);
                Complex64::from_polar(1.0, -(xi[0] + xi[1]) * s)
            }
            Self::Multiplied { symbol, b } => {
                Complex64::new(bracket(params.xi(k)).powf(-b) * symbol.eval(xi), 0.0)
            }
        }
    }
}

/// Phases `exp(sign i (pi/a) l.(xi/r_k - k))` at the box nodes, split per axis.
fn axis_phases(
    bb: &BandBox,
    dxi: f64,
    a: f64,
    r: f64,
    k: Ix,
    l: Ix,
    sign: f64,
) -> [Vec<Complex64>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (ax, v) in out.iter_mut().enumerate() {
        let e = bb.extent(ax);
        let lo = if ax < bb.dim { bb.lo[ax] } else { 0 };
        let lf = l.0[ax] as f64;
        *v = (0..e)
            .map(|i| {
                let xi = (lo + i as i64) as f64 * dxi;
                Complex64::from_polar(1.0, sign * PI / a * lf * (xi / r - k.0[ax] as f64))
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tightness {
    /// `||f - S A f||_2 / ||f||_2`.
    pub residual: f64,
    /// `|sum |c|^2 - ||f||^2| / ||f||^2`.
    pub parseval_defect: f64,
}

/// Smallest `C` with `|phi(x)| <= C r_k^{n/2} (1 + r_k |x - x_{k,l}|)^{-N}`
/// (time side) or `|phi^(xi)| <= C r_k^{-n/2} (1 + |xi - xi_k| / r_k)^{-N}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub k: Ix,
    pub l: Ix,
    pub order: f64,
    pub time_c: f64,
    pub freq_c: f64,
}

/// The tight frame on a grid: the covering, its `theta` table and `e_{k,l}`.
#[derive(Debug, Clone)]
pub struct Frame {
    pub system: BapuSystem,
    pub grid: Grid,
    pub table: BandTable,
}

impl Frame {
    pub fn new(system: BapuSystem, grid: Grid) -> Result<Self> {
        let table = system.table(grid, Window::Theta)?;
        Ok(Self {
            system,
            grid,
            table,
        })
    }

    pub fn params(&self) -> &CoveringParams {
        &self.system.params
    }

    fn band(&self, k: Ix) -> Result<&Band> {
        self.table
            .band(k)
            .ok_or_else(|| Error::Resolution(format!("band {k} outside the truncated lattice")))
    }

    /// `(2 a r_k)^{-n/2}`.
    fn norm_const(&self, k: Ix) -> f64 {
        let p = self.params();
        (2.0 * p.a * p.r(k)).powf(-(p.dim as f64) / 2.0)
    }

    /// `l` indices whose point `x_{k,l}` lies in the periodic domain.
    pub fn l_range(&self, k: Ix) -> Vec<Ix> {
        self.params().l_range(k, self.grid.halfwidth)
    }

    fn check_l(&self, k: Ix, l: Ix) -> Result<()> {
        let x = self.params().x_kl(k, l);
        let t = self.grid.halfwidth;
        if x.iter().take(self.grid.dim).any(|c| *c < -t || *c >= t) {
            return Err(Error::Domain(format!(
                "x_({k},{l}) = {x:?} outside [-{t}, {t})"
            )));
        }
        Ok(())
    }

    pub fn atom(&self, k: Ix, l: Ix) -> Result<FrameAtom> {
        self.molecule(&Molecule::Frame, k, l)
    }

    pub fn molecule(&self, mol: &Molecule, k: Ix, l: Ix) -> Result<FrameAtom> {
        let band = self.band(k)?;
        let p = self.params();
        let r = p.r(k);
        let c = self.norm_const(k);
        let d = self.grid.dxi();
        let ph = axis_phases(&band.bb, d, p.a, r, k, l, -1.0);
        let e1 = band.bb.extent(1);
        let spectrum = band
            .bb
            .iter()
            .zip(&band.values)
            .enumerate()
            .map(|(i, (m, v))| {
                if *v == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let xi = [m[0] as f64 * d, m[1] as f64 * d];
                ph[0][i / e1] * ph[1][i % e1] * (c * v) * mol.modifier(p, k, xi)
            })
            .collect();
        Ok(FrameAtom {
            k,
            l,
            r,
            center: p.x_kl(k, l),
            bb: band.bb,
            spectrum,
        })
    }

    /// Frame coefficients through the sampling identity
    /// `<f, phi_{k,l}> = e^{-i (pi/a) l.k} |Q(k,l)|^{1/2} theta_k(D) f(x_{k,l})`.
    pub fn analyze(&self, f: &VectorSignal) -> Result<CoeffSeq> {
        self.analyze_spectrum(&forward_ft(f)?)
    }

    pub fn analyze_spectrum(&self, f: &SpectralSignal) -> Result<CoeffSeq> {
        if f.grid != self.grid {
            return Err(Error::Structural(
                "signal grid differs from the frame grid".into(),
            ));
        }
        let p = self.params();
        let g = self.grid;
        let fac = inverse_factor(&g);
        let mut out = CoeffSeq::new(f.n());
        for band in &self.table.bands {
            let k = band.k;
            let pieces: Vec<Vec<Complex64>> = (0..f.n())
                .map(|c| {
                    f.extract(c, &band.bb)
                        .iter()
                        .zip(&band.values)
                        .map(|(z, v)| z * v)
                        .collect()
                })
                .collect();
            if pieces
                .iter()
                .all(|pc| pc.iter().all(|z| *z == Complex64::new(0.0, 0.0)))
            {
                continue;
            }
            let vol = p.cube_side(k).powi(p.dim as i32).sqrt();
            for l in self.l_range(k) {
                let x = p.x_kl(k, l);
                let lk = (l.0[0] * k.0[0] + l.0[1] * k.0[1]) as f64;
                let phase = Complex64::from_polar(vol * fac, -PI / p.a * lk);
                let v = pieces
                    .iter()
                    .map(|pc| band_sum(&band.bb, pc, g.dxi(), x) * phase)
                    .collect();
                out.insert(k, l, v);
            }
        }
        Ok(out)
    }

    /// Direct grid inner product `<f, phi_{k,l}>` per component.
    pub fn inner_direct(&self, f: &VectorSignal, k: Ix, l: Ix) -> Result<Vec<Complex64>> {
        let phi = self.atom(k, l)?.time(self.grid)?;
        (0..f.n())
            .map(|c| {
                let comp = VectorSignal::new(self.grid, vec![f.components[c].clone()])?;
                comp.inner(&phi)
            })
            .collect()
    }

    /// Spectrum of `sum c_{k,l} eta_{k,l}`, summed band by band (`k` major, `l` minor).
    pub fn synthesize_molecules(&self, mol: &Molecule, c: &CoeffSeq) -> Result<SpectralSignal> {
        let p = self.params();
        let g = self.grid;
        let d = g.dxi();
        let zero = Complex64::new(0.0, 0.0);
        let mut out = SpectralSignal::zeros(g, c.n.max(1));
        for k in c.bands() {
            let band = self.band(k)?;
            let r = p.r(k);
            let e1 = band.bb.extent(1);
            let mut acc = vec![vec![zero; band.bb.len()]; c.n];
            for (l, v) in c.band(k) {
                self.check_l(k, l)?;
                if v.iter().all(|z| *z == zero) {
                    continue;
                }
                let ph = axis_phases(&band.bb, d, p.a, r, k, l, -1.0);
                for (i, val) in band.values.iter().enumerate() {
                    if *val == 0.0 {
                        continue;
                    }
                    let e = ph[0][i / e1] * ph[1][i % e1];
                    for (a, z) in acc.iter_mut().zip(v) {
                        a[i] += z * e;
                    }
                }
            }
            let cst = self.norm_const(k);
            for (i, (m, val)) in band.bb.iter().zip(&band.values).enumerate() {
                if *val == 0.0 {
                    continue;
                }
                let j = g
                    .freq_flat(m)
                    .ok_or_else(|| Error::Resolution(format!("band {k} leaves the grid")))?;
                let xi = [m[0] as f64 * d, m[1] as f64 * d];
                let s = cst * val * mol.modifier(p, k, xi);
                for (comp, a) in out.components.iter_mut().zip(&acc) {
                    comp[j] += a[i] * s;
                }
            }
        }
        Ok(out)
    }

    pub fn synthesize(&self, c: &CoeffSeq) -> Result<VectorSignal> {
        inverse_ft(&self.synthesize_molecules(&Molecule::Frame, c)?)
    }

    pub fn tight_frame_residual(&self, f: &VectorSignal) -> Result<Tightness> {
        let norm = f.l2_norm();
        if norm == 0.0 {
            return Ok(Tightness {
                residual: 0.0,
                parseval_defect: 0.0,
            });
        }
        let c = self.analyze(f)?;
        let back = self.synthesize(&c)?;
        let diff = f.axpy(Complex64::new(-1.0, 0.0), &back)?;
        Ok(Tightness {
            residual: diff.l2_norm() / norm,
            parseval_defect: (c.sum_sq() - norm * norm).abs() / (norm * norm),
        })
    }

    /// Envelope constants of a molecule; distances are periodic on the grid.
    pub fn envelope(&self, mol: &Molecule, k: Ix, l: Ix, order: f64) -> Result<EnvelopeFit> {
        let atom = self.molecule(mol, k, l)?;
        let g = self.grid;
        let n = g.dim as f64;
        let r = atom.r;
        let time = atom.time(g)?;
        let mut time_c: f64 = 0.0;
        for (j, z) in time.components[0].iter().enumerate() {
            let x = g.node(j);
            let mut d2 = 0.0;
            for a in 0..g.dim {
                let period = 2.0 * g.halfwidth;
                let mut dx = (x[a] - atom.center[a]).rem_euclid(period);
                if dx > g.halfwidth {
                    dx -= period;
                }
                d2 += dx * dx;
            }
            let env = r.powf(n / 2.0) * (1.0 + r * d2.sqrt()).powf(-order);
            time_c = time_c.max(z.norm() / env);
        }
        let xk = self.params().xi(k);
        let d = g.dxi();
        let freq_c = atom
            .bb
            .iter()
            .zip(&atom.spectrum)
            .map(|(m, z)| {
                let xi = [m[0] as f64 * d, m[1] as f64 * d];
                z.norm() * r.powf(n / 2.0) * (1.0 + dist(xi, xk) / r).powf(order)
            })
            .fold(0.0, f64::max);
        Ok(EnvelopeFit {
            k,
            l,
            order,
            time_c,
            freq_c,
        })
    }

    /// `<eta_{k,n}, psi_{j,m}>` at row `(j,m)`, column `(k,n)`, over all window
    /// pairs; pairs with disjoint band boxes are exact zeros and not stored.
    pub fn cross_gram(
        &self,
        eta: &Molecule,
        psi: &Molecule,
        window: &IndexWindow,
    ) -> Result<DecayMatrix> {
        let g = self.grid;
        let p = self.params();
        let nodes = window.nodes(p.dim);
        let mut mat = DecayMatrix::new(p.dim, nodes.clone(), nodes);
        let dv = g.dual_cell_volume();
        for &k in &window.bands {
            for &j in &window.bands {
                let bk = self.band(k)?.bb;
                let bj = self.band(j)?.bb;
                let lo = [bk.lo[0].max(bj.lo[0]), bk.lo[1].max(bj.lo[1])];
                let hi = [bk.hi[0].min(bj.hi[0]), bk.hi[1].min(bj.hi[1])];
                if (0..p.dim).any(|a| lo[a] > hi[a]) {
                    continue;
                }
                let common = BandBox { dim: p.dim, lo, hi };
                let row_atoms: Vec<FrameAtom> = window
                    .ls(p.dim)
                    .iter()
                    .map(|&m| self.molecule(psi, j, m))
                    .collect::<Result<_>>()?;
                let col_atoms: Vec<FrameAtom> = window
                    .ls(p.dim)
                    .iter()
                    .map(|&n| self.molecule(eta, k, n))
                    .collect::<Result<_>>()?;
                let restrict = |a: &FrameAtom| -> Vec<Complex64> {
                    let e1 = a.bb.extent(1);
                    common
                        .iter()
                        .map(|m| {
                            let i0 = (m[0] - a.bb.lo[0]) as usize;
                            let i1 = if p.dim == 2 {
                                (m[1] - a.bb.lo[1]) as usize
                            } else {
                                0
                            };
                            a.spectrum[i0 * e1 + i1]
                        })
                        .collect()
                };
                let rows: Vec<Vec<Complex64>> = row_atoms.iter().map(restrict).collect();
                let cols: Vec<Vec<Complex64>> = col_atoms.iter().map(restrict).collect();
                for (ra, rv) in row_atoms.iter().zip(&rows) {
                    for (ca, cv) in col_atoms.iter().zip(&cols) {
                        let mut re = Neumaier::default();
                        let mut im = Neumaier::default();
                        for (x, y) in cv.iter().zip(rv) {
                            let z = x * y.conj();
                            re.add(z.re);
                            im.add(z.im);
                        }
                        let v = Complex64::new(re.value(), im.value()) * dv;
                        mat.set((j, ra.l), (k, ca.l), v);
                    }
                }
            }
        }
        Ok(mat)
    }
}

/// Lattice window: the listed bands with `|l|_inf <= lrad`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexWindow {
    pub bands: Vec<Ix>,
    pub lrad: i64,
}

impl IndexWindow {
    pub fn new(bands: Vec<Ix>, lrad: i64) -> Self {
        Self { bands, lrad }
    }

    pub fn ls(&self, dim: usize) -> Vec<Ix> {
        lattice_ball(dim, self.lrad)
    }

    pub fn nodes(&self, dim: usize) -> Vec<(Ix, Ix)> {
        let ls = self.ls(dim);
        self.bands
            .iter()
            .flat_map(|&k| ls.iter().map(move |&l| (k, l)))
            .collect()
    }
}

/// Bubble-boy bound `min(r_k/r_j, r_j/r_k)^P (1 + |xi_k - xi_j| / max r)^{-L}
/// (1 + min r |x_{k,n} - x_{j,m}|)^{-N}`.
pub fn cross_gram_bound(
    p: &CoveringParams,
    row: (Ix, Ix),
    col: (Ix, Ix),
    pp: f64,
    ll: f64,
    nn: f64,
) -> f64 {
    let (j, m) = row;
    let (k, n) = col;
    let (rj, rk) = (p.r(j), p.r(k));
    let ratio = (rk / rj).min(rj / rk);
    ratio.powf(pp)
        * (1.0 + dist(p.xi(k), p.xi(j)) / rj.max(rk)).powf(-ll)
        * (1.0 + rj.min(rk) * dist(p.x_kl(k, n), p.x_kl(j, m))).powf(-nn)
}

/// Smallest `C` dominating the matrix by the cross-Gram bound.
pub fn fit_cross_gram(p: &CoveringParams, a: &DecayMatrix, pp: f64, ll: f64, nn: f64) -> f64 {
    a.entries
        .iter()
        .map(|(&(row, col), v)| v.norm() / cross_gram_bound(p, row, col, pp, ll, nn))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bapu::Profile;
    use crate::grid::{random_wave_packets, sample_closed_form, SignalSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame(alpha: f64, kmax: i64, t: f64, m: usize) -> Frame {
        let sys = BapuSystem::new(
            CoveringParams::new(alpha, 1, kmax).unwrap(),
            Profile::default(),
        );
        Frame::new(sys, Grid::new(1, t, m).unwrap()).unwrap()
    }

    #[test]
    fn atom_examples() {
        let fr = frame(0.5, 3, 32.0 * PI, 1024);
        let p = *fr.params();
        let k = Ix::d1(2);
        let a0 = fr.atom(k, Ix::ZERO).unwrap();
        let band = fr.table.band(k).unwrap();
        let c = (2.0 * p.a * p.r(k)).powf(-0.5);
        for (z, v) in a0.spectrum.iter().zip(&band.values) {
            assert!((z - Complex64::new(c * v, 0.0)).norm() < 1e-16);
        }
        let want = (2.0 * p.a * p.r(k)).recip()
            * crate::sum::sum(band.values.iter().map(|v| v * v))
            * fr.grid.dxi();
        for l in [-7, 0, 3, 40] {
            let n = fr.atom(k, Ix::d1(l)).unwrap().norm_sq(&fr.grid);
            assert!((n - want).abs() < 1e-14 * want);
            assert!(n <= 1.0);
        }
        let time = a0.time(fr.grid).unwrap();
        assert!((time.l2_norm().powi(2) - want).abs() < 1e-12);
    }

    #[test]
    fn analysis_zero_and_disjoint() {
        let fr = frame(0.0, 2, 16.0 * PI, 512);
        let zero = VectorSignal::zeros(fr.grid, 2);
        assert!(fr.analyze(&zero).unwrap().is_empty());
        // Spectrum beyond every truncated window (reach 3.5).
        let spec = SignalSpec::ModulatedGaussian {
            sigma: 2.0,
            xi0: [9.0, 0.0],
            center: [0.0; 2],
        };
        let f = crate::grid::closed_form_spectrum(&spec, fr.grid, 1)
            .unwrap()
            .multiply(|xi| Complex64::new(if xi[0].abs() > 4.0 { 1.0 } else { 0.0 }, 0.0));
        let c = fr.analyze_spectrum(&f).unwrap();
        assert!(c.max_abs() <= 1e-12);
    }

    #[test]
    fn sampling_identity_matches_inner_products() {
        let fr = frame(0.5, 3, 8.0 * PI, 512);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let band = fr.system.renorm_halfwidth();
        for _ in 0..4 {
            let f =
                inverse_ft(&random_wave_packets(fr.grid, 2, band, 3, &mut rng).unwrap()).unwrap();
            let c = fr.analyze(&f).unwrap();
            for (k, l) in [(0, 0), (1, 3), (-2, -5), (3, 11)] {
                let (k, l) = (Ix::d1(k), Ix::d1(l));
                let direct = fr.inner_direct(&f, k, l).unwrap();
                let via = c.get(k, l).unwrap();
                for (a, b) in direct.iter().zip(via) {
                    assert!(
                        (a - b).norm() <= 1e-9 * a.norm().max(1e-3 * c.max_abs()),
                        "{a} {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn synthesis_examples() {
        let fr = frame(0.5, 3, 16.0 * PI, 1024);
        assert_eq!(fr.synthesize(&CoeffSeq::new(1)).unwrap().max_abs(), 0.0);
        let (k, l) = (Ix::d1(-1), Ix::d1(4));
        let mut c = CoeffSeq::new(2);
        c.insert(
            k,
            l,
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        );
        let s = fr.synthesize(&c).unwrap();
        let phi = fr.atom(k, l).unwrap().time(fr.grid).unwrap();
        assert_eq!(s.components[0], phi.components[0]);
        assert!(s.components[1].iter().all(|z| z.norm() == 0.0));
        let mut far = CoeffSeq::new(1);
        far.insert(k, Ix::d1(10_000), vec![Complex64::new(1.0, 0.0)]);
        assert!(matches!(fr.synthesize(&far), Err(Error::Domain(_))));
    }

    #[test]
    fn tight_frame_gaussian_and_atom() {
        for alpha in [0.0, 0.5] {
            let kmax = if alpha == 0.0 { 10 } else { 3 };
            let fr = frame(alpha, kmax, 128.0 * PI, 4096);
            let f = sample_closed_form(
                &SignalSpec::Gaussian {
                    sigma: 1.0,
                    center: [3.0, 0.0],
                },
                fr.grid,
                1,
            )
            .unwrap();
            let t = fr.tight_frame_residual(&f).unwrap();
            assert!(
                t.residual <= 1e-8 && t.parseval_defect <= 1e-8,
                "{alpha} {t:?}"
            );
            let phi = fr
                .atom(Ix::d1(1), Ix::d1(5))
                .unwrap()
                .time(fr.grid)
                .unwrap();
            let t = fr.tight_frame_residual(&phi).unwrap();
            assert!(
                t.residual <= 1e-8 && t.parseval_defect <= 1e-8,
                "{alpha} {t:?}"
            );
        }
        let fr = frame(0.0, 2, 8.0, 64);
        let z = fr
            .tight_frame_residual(&VectorSignal::zeros(fr.grid, 1))
            .unwrap();
        assert_eq!(z.residual, 0.0);
    }

    #[test]
    fn envelope_uniform() {
        let fr = frame(0.5, 3, 32.0 * PI, 2048);
        let mut cs = Vec::new();
        for k in fr.params().indices() {
            for l in [-9, 0, 4] {
                let e = fr.envelope(&Molecule::Frame, k, Ix::d1(l), 3.0).unwrap();
                assert!(e.time_c.is_finite() && e.freq_c.is_finite());
                cs.push(e.time_c);
            }
        }
        let (lo, hi) = crate::norms::bracket_of(&cs);
        assert!(hi / lo <= 10.0, "{lo} {hi}");
    }

    #[test]
    fn cross_gram_examples() {
        let fr = frame(0.5, 3, 32.0 * PI, 1024);
        let w = IndexWindow::new(fr.params().indices(), 3);
        let g = fr
            .cross_gram(&Molecule::Frame, &Molecule::Frame, &w)
            .unwrap();
        for &(k, l) in &w.nodes(1) {
            let d = g.get((k, l), (k, l));
            let n = fr.atom(k, l).unwrap().norm_sq(&fr.grid);
            assert!((d.re - n).abs() < 1e-14 && d.re > 0.0);
        }
        for (&((j, _), (k, _)), v) in &g.entries {
            if !crate::covering::window_neighbors(fr.params(), k).contains(&j) {
                assert!(v.norm() <= 1e-12);
            }
        }
        let sh = fr
            .cross_gram(&Molecule::Frame, &Molecule::Shifted { shift: 0.3 }, &w)
            .unwrap();
        let c = fit_cross_gram(fr.params(), &sh, 2.0, 2.0, 2.0);
        assert!(c.is_finite() && c > 0.0);
    }

    proptest! {
        #[test]
        fn analysis_linear(lambda in -3.0f64..3.0, seed in 0u64..30) {
            let fr = frame(0.5, 2, 4.0 * PI, 256);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = inverse_ft(&random_wave_packets(fr.grid, 1, 4.0, 2, &mut rng).unwrap()).unwrap();
            let a = fr.analyze(&f).unwrap();
            let b = fr.analyze(&f.scale(Complex64::new(lambda, 0.0))).unwrap();
            prop_assert!((b.max_abs() - lambda.abs() * a.max_abs()).abs() <= 1e-12 * (1.0 + b.max_abs()));
        }
    }
}
