//! One harness per experiment id.

use std::collections::BTreeMap;

use alphamod::almostdiag::{
    ad_membership, ad_membership_scalar, boundedness_probe, le_sq_check, omega_matrix,
    random_sequence, AdParams, BoundKind, ProbeNorm,
};
use alphamod::bapu::{check_bapu_decay, BapuSystem, Profile, Window, SUPPORT};
use alphamod::covering::{check_admissible, window_neighbors, Ix};
use alphamod::frame::{CoeffSeq, Frame, IndexWindow, Molecule};
use alphamod::grid::{
    closed_form_spectrum, inverse_ft, random_wave_packets, random_wave_packets_at,
    sample_closed_form, Grid, SignalSpec, SpectralSignal,
};
use alphamod::linalg::{self, CMat};
use alphamod::multiplier::{
    apply_multiplier, bessel_equivalence_experiment, lattice_decay_exponent, multiplier_gram,
    symbol_class_check, Symbol,
};
use alphamod::norms::{
    bracket_of, embedding_decay_check, m_continuous_norm, m_discrete_norm, m_reducing_norm,
    sampling_inequality_check, LpWeightedNorm,
};
use alphamod::weights::{
    a1_constant_estimate, ap_constant_estimate, convolution_bound_probe,
    doubling_exponent_estimate, dyadic_families, dyadic_lattice_families, kernel_l1,
    reducing_operator, Cube, DoublingPlan, MatrixWeight, ReducingFamily, ReducingMethod,
    WeightSpec,
};
use alphamod::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Resolved, EXPERIMENTS};
use crate::report::{coeff_table, matrix_table, Cell, Check, Outcome, Report, Table};
use crate::CliError;

#[derive(Default)]
struct Acc {
    scalars: BTreeMap<String, Value>,
    checks: Vec<Check>,
    tables: Vec<Table>,
}

impl Acc {
    fn s(&mut self, name: &str, v: impl Into<Value>) {
        self.scalars.insert(name.into(), v.into());
    }

    fn c(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn t(&mut self, t: Table) {
        self.tables.push(t);
    }
}

type Harness = fn(&ExperimentConfig, &Resolved, &mut Acc) -> Result<()>;

fn harness(id: &str) -> Option<Harness> {
    Some(match id {
        "covering-check" => covering_check,
        "bapu-check" => bapu_check,
        "frame-tightness" => frame_tightness,
        "norm-equivalence" => norm_equivalence,
        "ap-diagnostics" => ap_diagnostics,
        "doubling" => doubling,
        "reducing" => reducing,
        "ad-membership" => ad_membership_exp,
        "ad-boundedness" => ad_boundedness,
        "sampling-ineq" => sampling_ineq,
        "conv-probe" => conv_probe,
        "multiplier" => multiplier,
        "bessel" => bessel,
        "embedding-decay" => embedding_decay,
        _ => return None,
    })
}

/// True for every id in [`EXPERIMENTS`].
pub fn has_harness(id: &str) -> bool {
    harness(id).is_some()
}

/// Dispatch to the harness named by `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> std::result::Result<Outcome, CliError> {
    let id = cfg.experiment.as_str();
    let h = harness(id).ok_or_else(|| {
        CliError::Config(format!(
            "experiment: unknown id `{id}` (expected one of {})",
            EXPERIMENTS.join(", ")
        ))
    })?;
    let r = cfg.resolve()?;
    let mut acc = Acc::default();
    h(cfg, &r, &mut acc).map_err(|source| CliError::Run {
        experiment: id.to_string(),
        source,
    })?;
    let pass = !acc.checks.is_empty() && acc.checks.iter().all(|c| c.pass);
    let report = Report {
        experiment: id.to_string(),
        seed: cfg.seed,
        inputs: cfg.clone(),
        scalars: acc.scalars,
        checks: acc.checks,
        tables: acc
            .tables
            .iter()
            .map(|t| format!("tables/{}.csv", t.name))
            .collect(),
        pass,
    };
    Ok(Outcome {
        report,
        tables: acc.tables,
    })
}

fn rng(cfg: &ExperimentConfig, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    r.set_stream(stream);
    r
}

fn f(v: f64) -> Value {
    Value::from(v)
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = bracket_of(v);
    hi / lo
}

fn method(cfg: &ExperimentConfig, p: f64) -> Result<ReducingMethod> {
    match &cfg.run.method {
        Some(m) => ReducingMethod::from_name(m),
        None if p == 2.0 => Ok(ReducingMethod::ExactP2),
        None => Ok(ReducingMethod::EllipsoidFit),
    }
}

/// In-band half-width: inside the renormalization box and the guard band.
fn in_band(cfg: &ExperimentConfig, r: &Resolved) -> f64 {
    cfg.run
        .band
        .unwrap_or(r.system.renorm_halfwidth().min(r.grid.guard()))
}

fn packet_corpus(
    grid: Grid,
    n: usize,
    band: f64,
    count: usize,
    packets: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SpectralSignal>> {
    (0..count)
        .map(|_| random_wave_packets(grid, n, band, packets, rng))
        .collect()
}

fn ad_params(cfg: &ExperimentConfig, r: &Resolved) -> AdParams {
    let n = r.cover.dim as f64;
    let j = cfg.run.j.unwrap_or(n / r.smooth.q.min_one() + 1.0);
    let s = r.smooth.s;
    AdParams {
        j,
        delta: cfg.run.delta.unwrap_or(1.0),
        m: cfg.run.m.unwrap_or((2.0 * j).max(s.abs() + n / 2.0) + 1.0),
        beta: cfg.run.beta.unwrap_or(n),
        s,
        p: r.smooth.p,
        q: r.smooth.q,
        n: r.cover.dim,
    }
}

fn ix_pair(k: Ix) -> Vec<Cell> {
    vec![Cell::Int(k.0[0]), Cell::Int(k.0[1])]
}

fn covering_check(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let cover = r.cover;
    let far = Ix::d1(cover.kmax);
    let domain = cfg.run.domain.unwrap_or(cover.xi(far)[0]);
    let step = cfg
        .run
        .step
        .unwrap_or(domain / if cover.dim == 1 { 20000.0 } else { 200.0 });
    let rep = check_admissible(&cover, domain, step)?;
    acc.s("domain", f(domain));
    acc.s("step", f(step));
    acc.s("samples", rep.samples);
    acc.s("covers_domain", rep.covers_domain);
    acc.s(
        "first_gap",
        rep.first_gap.map(|g| json!(g)).unwrap_or(Value::Null),
    );
    acc.s("n0", rep.n0);
    acc.s("size_ratio_min", f(rep.size_ratio_min));
    acc.s("size_ratio_max", f(rep.size_ratio_max));
    acc.s("max_scale_ratio", f(rep.max_scale_ratio));
    acc.c(Check::flag("covers_domain", rep.covers_domain));
    acc.c(Check::le(
        "max_scale_ratio",
        rep.max_scale_ratio,
        cfg.tol("scale_ratio", 4.0),
    ));
    let n = cover.dim as f64;
    if cover.alpha == 0.0 && (cover.c1 - n.sqrt()).abs() < 1e-12 {
        acc.c(Check::le("n0", rep.n0 as f64, 2.0 * n + 1.0));
    }
    let mut t = Table::new(
        "patches",
        &["k0", "k1", "r", "xi0", "xi1", "radius", "window_neighbors"],
    );
    for k in cover.indices() {
        let p = cover.patch(k);
        let mut row = ix_pair(k);
        row.extend([p.r.into(), p.xi[0].into(), p.xi[1].into(), p.radius.into()]);
        row.push(window_neighbors(&cover, k).len().into());
        t.push(row);
    }
    acc.t(t);
    Ok(())
}

fn bapu_check(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let sys = &r.system;
    let s = sys.renorm_halfwidth();
    let samples = cfg.run.samples.unwrap_or(10_000);
    let mut rng = rng(cfg, 1);
    let (mut lin_err, mut sq_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let mut xi = [rng.gen_range(-s..s), 0.0];
        if r.cover.dim == 2 {
            xi[1] = rng.gen_range(-s..s);
        }
        let (mut lin, mut sq) = (0.0, 0.0);
        for k in sys.active(xi) {
            lin += sys.psi(k, xi)?;
            sq += sys.theta(k, xi)?.powi(2);
        }
        lin_err = lin_err.max((lin - 1.0).abs());
        sq_err = sq_err.max((sq - 1.0).abs());
    }
    acc.s("renorm_halfwidth", f(s));
    acc.s("samples", samples);
    acc.s("psi_defect", f(lin_err));
    acc.s("theta_defect", f(sq_err));
    let tol = cfg.tol("partition", 1e-12);
    acc.c(Check::le("psi_defect", lin_err, tol));
    acc.c(Check::le("theta_defect", sq_err, tol));
    if cfg.run.decay.unwrap_or(true) {
        let table = sys.table(r.grid, Window::Psi)?;
        let mut t = Table::new("decay", &["k0", "k1", "r", "c"]);
        let mut cs = Vec::new();
        for k in r.cover.indices() {
            let fit = check_bapu_decay(sys, &table, k, f64::INFINITY)?;
            let mut row = ix_pair(k);
            row.extend([r.cover.r(k).into(), fit.c.into()]);
            t.push(row);
            cs.push(fit.c);
        }
        let (lo, hi) = bracket_of(&cs);
        acc.s("decay_c_min", f(lo));
        acc.s("decay_c_max", f(hi));
        acc.c(Check::le(
            "decay_spread",
            hi / lo,
            cfg.tol("decay_spread", 10.0),
        ));
        acc.t(t);
    }
    Ok(())
}

fn frame_tightness(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let frame = Frame::new(r.system, r.grid)?;
    let band = in_band(cfg, r);
    let count = cfg.run.corpus.unwrap_or(20);
    let per = cfg.run.direct.unwrap_or(4);
    let n = r.weight.n;
    let mut rng = rng(cfg, 2);
    let mut t = Table::new(
        "tightness",
        &["signal", "residual", "parseval_defect", "coef_rel_err"],
    );
    let (mut res, mut pars, mut coef): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut first = None;
    for i in 0..count {
        let g = random_wave_packets(r.grid, n, band, cfg.run.packets.unwrap_or(3), &mut rng)?;
        let sig = inverse_ft(&g)?;
        let tight = frame.tight_frame_residual(&sig)?;
        let c = frame.analyze(&sig)?;
        let keys: Vec<(Ix, Ix)> = c.entries.keys().copied().collect();
        let scale = c.max_abs().max(f64::MIN_POSITIVE);
        let mut err: f64 = 0.0;
        for _ in 0..per.min(keys.len()) {
            let (k, l) = keys[rng.gen_range(0..keys.len())];
            let d = frame.inner_direct(&sig, k, l)?;
            for (a, b) in c.entries[&(k, l)].iter().zip(&d) {
                err = err.max((a - b).norm() / scale);
            }
        }
        res = res.max(tight.residual);
        pars = pars.max(tight.parseval_defect);
        coef = coef.max(err);
        t.push(vec![
            i.into(),
            tight.residual.into(),
            tight.parseval_defect.into(),
            err.into(),
        ]);
        if first.is_none() {
            first = Some(c);
        }
    }
    acc.s("band", f(band));
    acc.s("signals", count);
    acc.s("max_residual", f(res));
    acc.s("max_parseval_defect", f(pars));
    acc.s("max_coef_rel_err", f(coef));
    acc.c(Check::le("residual", res, cfg.tol("residual", 1e-8)));
    acc.c(Check::le(
        "parseval_defect",
        pars,
        cfg.tol("parseval", 1e-8),
    ));
    acc.c(Check::le("coef_identity", coef, cfg.tol("coef", 1e-9)));
    acc.t(t);
    if let Some(c) = first {
        acc.t(coeff_table("coefficients_signal0", &c));
    }
    Ok(())
}

/// `(max/min)` over all ratios against the same over the first half.
fn bracket_drift(ratios: &[f64]) -> f64 {
    let half = &ratios[..ratios.len().div_ceil(2)];
    (spread(ratios) / spread(half) - 1.0).abs()
}

fn norm_equivalence(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let cover = r.cover;
    let sp = r.smooth;
    let w = &r.weight;
    let n = w.n;
    let lrad = cfg.run.lrad.unwrap_or(4);
    let trials = cfg.run.trials.unwrap_or(200);
    let m = method(cfg, sp.p)?;
    let big = IndexWindow::new(cover.indices(), 2 * lrad);
    let family = ReducingFamily::build(w, sp.p, &cover, big.nodes(cover.dim), m, r.h_q)?;
    let ident = MatrixWeight::identity(cover.dim, n);

    // (a) discrete W-norm against the reducing-operator norm, window and doubled window.
    let mut widths = Vec::new();
    let mut connect: f64 = 0.0;
    let mut t = Table::new("eqi", &["lrad", "lo", "hi", "width"]);
    for (pass, lr) in [lrad, 2 * lrad].into_iter().enumerate() {
        let nodes = IndexWindow::new(cover.indices(), lr).nodes(cover.dim);
        let mut rng = rng(cfg, 10 + pass as u64);
        let mut ratios = Vec::with_capacity(trials);
        for i in 0..trials {
            let c = random_sequence(&nodes, n, [1.0, 0.3, 0.05][i % 3], &mut rng);
            let red = m_reducing_norm(&family, &cover, &sp, &c)?.value;
            ratios.push(m_discrete_norm(&cover, w, &sp, &c, r.h_q)?.value / red);
            if pass == 0 {
                // (b) the reducing norm equals the identity-weight norm of {A_Q s_Q}.
                let mut ac = CoeffSeq::new(n);
                for (&(k, l), v) in &c.entries {
                    ac.insert(k, l, linalg::mat_vec(family.get(k, l)?, v));
                }
                let via = m_discrete_norm(&cover, &ident, &sp, &ac, r.h_q)?.value;
                connect = connect.max((via - red).abs() / red);
            }
        }
        let (lo, hi) = bracket_of(&ratios);
        t.push(vec![lr.into(), lo.into(), hi.into(), (hi / lo).into()]);
        widths.push(hi / lo);
    }
    acc.t(t);
    let width_drift = (widths[1] / widths[0] - 1.0).abs();
    acc.s("eqi_width", f(widths[0]));
    acc.s("eqi_width_doubled", f(widths[1]));
    acc.s("connect_rel_err", f(connect));
    acc.c(Check::le(
        "eqi_width_drift",
        width_drift,
        cfg.tol("width_drift", 0.1),
    ));
    acc.c(Check::le("connect", connect, cfg.tol("connect", 1e-14)));

    // (c) profile independence and (d) psi against theta on in-band signals.
    let grid = r.grid;
    let lpw = LpWeightedNorm::new(w, sp.p, grid)?;
    let profile_b = Profile::from_name(cfg.run.profile_b.as_deref().unwrap_or("polynomial"))?;
    let sys_b = BapuSystem::new(cover, profile_b);
    let psi_a = r.system.table(grid, Window::Psi)?;
    let psi_b = sys_b.table(grid, Window::Psi)?;
    let theta = r.system.table(grid, Window::Theta)?;
    let band = in_band(cfg, r);
    let mut rng = rng(cfg, 12);
    let corpus = packet_corpus(
        grid,
        n,
        band,
        cfg.run.corpus.unwrap_or(50),
        cfg.run.packets.unwrap_or(3),
        &mut rng,
    )?;
    let mut t = Table::new("profiles", &["signal", "profile_ratio", "psi_theta_ratio"]);
    let (mut prof, mut pt) = (Vec::new(), Vec::new());
    for (i, g) in corpus.iter().enumerate() {
        let a = m_continuous_norm(&r.system, &psi_a, &lpw, &sp, g)?.value;
        let b = m_continuous_norm(&sys_b, &psi_b, &lpw, &sp, g)?.value;
        let th = m_continuous_norm(&r.system, &theta, &lpw, &sp, g)?.value;
        prof.push(a / b);
        pt.push(a / th);
        t.push(vec![i.into(), (a / b).into(), (a / th).into()]);
    }
    acc.t(t);
    let drift = cfg.tol("bracket_drift", 0.1);
    for (name, v) in [("profile", &prof), ("psi_theta", &pt)] {
        let (lo, hi) = bracket_of(v);
        acc.s(&format!("{name}_min"), f(lo));
        acc.s(&format!("{name}_max"), f(hi));
        acc.c(Check::flag(
            &format!("{name}_bounded"),
            lo > 0.0 && hi.is_finite(),
        ));
        acc.c(Check::le(
            &format!("{name}_bracket_drift"),
            bracket_drift(v),
            drift,
        ));
    }
    Ok(())
}

fn expect_checks(
    acc: &mut Acc,
    prefix: &str,
    expect: &str,
    est: f64,
    divergent: bool,
    levels: &[f64],
    tol: f64,
) {
    match expect {
        "divergent" => acc.c(Check::flag(&format!("{prefix}_divergent"), divergent)),
        "one" => acc.c(Check::le(
            &format!("{prefix}_minus_one"),
            (est - 1.0).abs(),
            1e-10,
        )),
        _ => {
            acc.c(Check::flag(
                &format!("{prefix}_finite"),
                !divergent && est.is_finite(),
            ));
            let tail = &levels[levels.len().saturating_sub(3)..];
            acc.c(Check::le(
                &format!("{prefix}_level_spread"),
                spread(tail) - 1.0,
                tol,
            ));
        }
    }
}

fn ap_diagnostics(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let dim = r.cover.dim;
    let side0 = cfg.run.side0.unwrap_or(0.25);
    let levels = cfg.run.levels.unwrap_or(4);
    let h = cfg.run.h_q.unwrap_or(side0 / 16.0);
    // Explicit centres, else the dyadic lattice on [-extent, extent]^n.
    let fams = match &cfg.run.centers {
        Some(cs) => {
            let centers: Vec<[f64; 2]> = cs
                .iter()
                .map(|c| {
                    [
                        c.first().copied().unwrap_or(0.0),
                        c.get(1).copied().unwrap_or(0.0),
                    ]
                })
                .collect();
            dyadic_families(dim, &centers, side0, levels)
        }
        None => {
            let extent = cfg.run.extent.unwrap_or(side0 * 2f64.powi(levels as i32));
            dyadic_lattice_families(dim, extent, side0, levels)
        }
    };
    let ap = ap_constant_estimate(&r.weight, r.smooth.p, &fams, h)?;
    let a1 = a1_constant_estimate(&r.weight, &fams, h);
    acc.s("p", f(r.smooth.p));
    acc.s("ap_estimate", f(ap.estimate));
    acc.s("ap_levels", json!(ap.levels));
    acc.s("ap_divergent", ap.divergent);
    let mut t = Table::new("levels", &["level", "ap", "a1"]);
    let a1_levels = a1.as_ref().map(|a| a.levels.clone()).unwrap_or_default();
    for (i, v) in ap.levels.iter().enumerate() {
        t.push(vec![
            i.into(),
            (*v).into(),
            a1_levels.get(i).copied().unwrap_or(f64::NAN).into(),
        ]);
    }
    acc.t(t);
    let tol = cfg.tol("level_spread", 0.05);
    expect_checks(
        acc,
        "ap",
        cfg.run.expect.as_deref().unwrap_or("finite"),
        ap.estimate,
        ap.divergent,
        &ap.levels,
        tol,
    );
    match a1 {
        Ok(a1) => {
            acc.s("a1_estimate", f(a1.estimate));
            acc.s("a1_levels", json!(a1.levels));
            acc.s("a1_divergent", a1.divergent);
            if let Some(e) = &cfg.run.expect_a1 {
                expect_checks(acc, "a1", e, a1.estimate, a1.divergent, &a1.levels, tol);
            }
        }
        Err(e) => {
            acc.s("a1_error", e.to_string());
            if let Some(e) = &cfg.run.expect_a1 {
                acc.c(Check::flag("a1_divergent", e == "divergent"));
            }
        }
    }
    Ok(())
}

fn doubling(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let dim = r.cover.dim;
    let extent = cfg.run.extent.unwrap_or(8.0);
    let h = cfg
        .run
        .h_q
        .unwrap_or(extent / if dim == 1 { 800.0 } else { 50.0 });
    let plan = DoublingPlan::standard(dim, r.weight.n, extent, cfg.seed);
    let rep = doubling_exponent_estimate(&r.weight, r.smooth.p, &plan, h)?;
    acc.s("beta", f(rep.beta));
    acc.s("ratio", f(rep.c));
    acc.s("h", f(h));
    let mut t = Table::new("directions", &["direction", "beta"]);
    for (i, b) in rep.beta_by_direction.iter().enumerate() {
        t.push(vec![i.into(), (*b).into()]);
    }
    acc.t(t);
    acc.c(Check::flag("beta_finite", rep.beta.is_finite()));
    if let Some(e) = cfg.run.expect_beta {
        acc.c(Check::le(
            "beta_error",
            (rep.beta - e).abs(),
            cfg.tol("beta", 0.05),
        ));
        if let Some(tol) = cfg.tolerances.get("ratio") {
            acc.c(Check::le("ratio_error", (rep.c - 2f64.powf(e)).abs(), *tol));
        }
    }
    Ok(())
}

/// `max(||A B^{-1}||, ||B A^{-1}||)`.
fn equivalence_factor(a: &CMat, b: &CMat) -> Result<f64> {
    let ab = linalg::spectral_norm(&(a * linalg::inverse(b)?));
    let ba = linalg::spectral_norm(&(b * linalg::inverse(a)?));
    Ok(ab.max(ba))
}

fn reducing(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let h = cfg.run.h_q.unwrap_or(0.01);
    let unit = Cube {
        dim: 1,
        lower: [0.0, 0.0],
        side: 1.0,
    };
    let w = MatrixWeight::bracket_power(1, vec![0.0, 2.0])?;
    let a = reducing_operator(&w, 2.0, &unit, ReducingMethod::ExactP2, h)?.matrix;
    let target = linalg::diag(&[1.0, 2.0 / 3f64.sqrt()]);
    let err = (a - target).iter().map(|z| z.norm()).fold(0.0, f64::max);
    acc.s("exact_example_error", f(err));
    acc.c(Check::le("exact_example", err, cfg.tol("exact", 1e-8)));

    let p = r.smooth.p;
    let n = r.weight.n.max(2);
    let trials = cfg.run.trials.unwrap_or(50);
    let mut rng = rng(cfg, 3);
    let mut t = Table::new("fit_vs_exact", &["trial", "factor", "kappa"]);
    let mut worst: f64 = 1.0;
    for i in 0..trials {
        let mut rows = vec![vec![0.0; n]; n];
        let g: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        for (a, row) in rows.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = (0..n).map(|c| g[a][c] * g[b][c]).sum::<f64>()
                    + if a == b { 0.25 } else { 0.0 };
            }
        }
        let base = linalg::from_real(&rows)?;
        let gammas: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let w = MatrixWeight::new(
            r.cover.dim,
            WeightSpec::ConstantPlusPower {
                base,
                gammas,
                eps: 0.05,
            },
        )?;
        let mut c = [rng.gen_range(-3.0..3.0), 0.0];
        if r.cover.dim == 2 {
            c[1] = rng.gen_range(-3.0..3.0);
        }
        let cube = Cube::centered(r.cover.dim, c, rng.gen_range(0.25..2.0));
        let exact = reducing_operator(&w, 2.0, &cube, ReducingMethod::ExactP2, h)?;
        let fit = reducing_operator(&w, p, &cube, ReducingMethod::EllipsoidFit, h)?;
        let fac = equivalence_factor(&exact.matrix, &fit.matrix)?;
        worst = worst.max(fac);
        t.push(vec![i.into(), fac.into(), fit.kappa.into()]);
    }
    acc.t(t);
    acc.s("worst_factor", f(worst));
    acc.c(Check::le("fit_factor", worst, cfg.tol("factor", 1.5)));
    Ok(())
}

fn ad_membership_exp(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let cover = r.cover;
    let pr = ad_params(cfg, r);
    let window = IndexWindow::new(cover.indices(), cfg.run.lrad.unwrap_or(6));
    let mut om = omega_matrix(&pr, &cover, &window);
    let mo = ad_membership(&mut om, &pr, &cover, BoundKind::Omega, 0.1)?;
    acc.s("J", f(pr.j));
    acc.s("M", f(pr.m));
    acc.s("omega_c", f(mo.c));
    acc.c(Check::le(
        "omega_self",
        (mo.c - 1.0).abs(),
        cfg.tol("omega", 1e-12),
    ));

    let frame = Frame::new(r.system, r.grid)?;
    let mut gram = frame.cross_gram(&Molecule::Frame, &Molecule::Frame, &window)?;
    let mg = ad_membership_scalar(&mut gram, &pr, &cover)?;
    acc.s("gram_c", f(mg.c));
    acc.s("gram_c_inner", f(mg.c_inner));
    acc.s("gram_entries", mg.entries);
    acc.s("gram_window_stable", mg.pass);
    acc.c(Check::flag("gram_c_finite", mg.c.is_finite() && mg.c > 0.0));
    acc.t(matrix_table("gram", &gram));
    Ok(())
}

fn ad_boundedness(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let cover = r.cover;
    let pr = ad_params(cfg, r);
    let lrad = cfg.run.lrad.unwrap_or(4);
    let trials = cfg.run.trials.unwrap_or(200);
    let w = &r.weight;
    let family = if w.is_constant() && w.eval([0.0, 0.0]) == linalg::identity(w.n) {
        None
    } else {
        let nodes = IndexWindow::new(cover.indices(), 2 * lrad).nodes(cover.dim);
        Some(ReducingFamily::build(
            w,
            r.smooth.p,
            &cover,
            nodes,
            method(cfg, r.smooth.p)?,
            r.h_q,
        )?)
    };
    let norm = match &family {
        None => ProbeNorm::Scalar,
        Some(fam) => ProbeNorm::Reducing(fam),
    };
    let mut t = Table::new("probe", &["lrad", "max_ratio", "min_ratio"]);
    let mut maxes = Vec::new();
    for lr in [lrad, 2 * lrad] {
        let a = omega_matrix(&pr, &cover, &IndexWindow::new(cover.indices(), lr));
        let rep = boundedness_probe(&a, &cover, norm, &r.smooth, w.n, trials, cfg.seed)?;
        t.push(vec![lr.into(), rep.max_ratio.into(), rep.min_ratio.into()]);
        maxes.push(rep.max_ratio);
    }
    acc.t(t);
    let drift = (maxes[1] / maxes[0] - 1.0).abs();
    acc.s("J", f(pr.j));
    acc.s("max_ratio", f(maxes[0]));
    acc.s("max_ratio_doubled", f(maxes[1]));
    acc.c(Check::flag(
        "probe_finite",
        maxes.iter().all(|m| m.is_finite()),
    ));
    acc.c(Check::le("probe_drift", drift, cfg.tol("probe_drift", 0.1)));

    let id = cfg.run.le_sq_weight.as_deref().unwrap_or("one");
    let sw = MatrixWeight::scalar(cover.dim, id)?;
    let wf = |x: alphamod::grid::Point| sw.eval(x)[(0, 0)].re;
    let big_l = cfg.run.big_l.unwrap_or(2.0);
    let ratio = le_sq_check(
        &wf,
        cfg.run.beta.unwrap_or(cover.dim as f64),
        &cover,
        Ix::ZERO,
        Ix::ZERO,
        big_l,
    )?;
    acc.s("le_sq_ratio", f(ratio));
    acc.c(Check::flag(
        "le_sq_finite",
        ratio.is_finite() && ratio > 0.0,
    ));
    if let Some(e) = cfg.run.expect_le_sq {
        acc.c(Check::le(
            "le_sq_error",
            (ratio - e).abs(),
            cfg.tol("le_sq", 0.05),
        ));
    }
    Ok(())
}

fn sampling_ineq(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let cover = r.cover;
    let refine = cfg.run.refine.unwrap_or(2);
    let count = cfg.run.corpus.unwrap_or(50);
    let packets = cfg.run.packets.unwrap_or(2);
    let grids = [
        r.grid,
        Grid::new(r.grid.dim, r.grid.halfwidth, r.grid.points * refine)?,
    ];
    let hs = [r.h_q, r.h_q / refine as f64];
    let mut cks = [Vec::new(), Vec::new()];
    for (gi, grid) in grids.iter().enumerate() {
        let lpw = LpWeightedNorm::new(&r.weight, r.smooth.p, *grid)?;
        for kk in 0..=cover.kmax {
            let k = Ix::d1(kk);
            let radius = SUPPORT * cover.c1 * cover.r(k);
            let mut rng = rng(cfg, 100 + kk as u64);
            let mut c: f64 = 0.0;
            for _ in 0..count {
                let g = random_wave_packets_at(
                    *grid,
                    r.weight.n,
                    cover.xi(k),
                    radius,
                    packets,
                    &mut rng,
                )?;
                c = c.max(sampling_inequality_check(
                    &cover, &r.weight, &lpw, k, &g, hs[gi],
                )?);
            }
            cks[gi].push(c);
        }
    }
    let mut t = Table::new("constants", &["k", "c", "c_refined"]);
    for (kk, (a, b)) in cks[0].iter().zip(&cks[1]).enumerate() {
        t.push(vec![kk.into(), (*a).into(), (*b).into()]);
    }
    acc.t(t);
    let c = cks[0].iter().copied().fold(0.0, f64::max);
    let c_ref = cks[1].iter().copied().fold(0.0, f64::max);
    acc.s("c", f(c));
    acc.s("c_refined", f(c_ref));
    acc.s("k_spread", f(spread(&cks[0])));
    acc.c(Check::flag("c_finite", c.is_finite() && c > 0.0));
    acc.c(Check::le(
        "refinement_drift",
        (c_ref / c - 1.0).abs(),
        cfg.tol("refine", 0.1),
    ));
    acc.c(Check::le(
        "k_spread",
        spread(&cks[0]),
        cfg.tol("k_spread", 10.0),
    ));
    Ok(())
}

fn conv_probe(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let n = r.weight.n;
    let sig = match cfg.run.signal.as_deref().unwrap_or("gaussian") {
        "packets" => {
            let mut rng = rng(cfg, 4);
            inverse_ft(&random_wave_packets(
                r.grid,
                n,
                in_band(cfg, r),
                cfg.run.packets.unwrap_or(3),
                &mut rng,
            )?)?
        }
        _ => {
            let spec = SignalSpec::Gaussian {
                sigma: cfg.run.sigma.unwrap_or(1.0),
                center: [0.0; 2],
            };
            sample_closed_form(&spec, r.grid, n)?
        }
    };
    let deltas = cfg
        .run
        .deltas
        .clone()
        .unwrap_or_else(|| vec![0.01, 0.1, 1.0, 10.0, 100.0]);
    let probe = convolution_bound_probe(&r.weight, r.smooth.p, &sig, &deltas)?;
    let mut t = Table::new("dilations", &["delta", "ratio"]);
    for (d, v) in probe.deltas.iter().zip(&probe.ratios) {
        t.push(vec![(*d).into(), (*v).into()]);
    }
    acc.t(t);
    acc.s("max_ratio", f(probe.max_ratio));
    acc.s("kernel_l1", f(kernel_l1(r.cover.dim)));
    let unweighted = r.weight.is_constant() && r.weight.eval([0.0, 0.0]) == linalg::identity(n);
    let limit = match cfg.tolerances.get("conv_max") {
        Some(v) => *v,
        None if unweighted => kernel_l1(r.cover.dim) + 1e-9,
        None => f64::INFINITY,
    };
    acc.c(Check::le("max_ratio", probe.max_ratio, limit));
    Ok(())
}

fn multiplier(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let cover = r.cover;
    let frame = Frame::new(r.system, r.grid)?;
    let sym = Symbol::parse(cfg.run.symbol.as_deref().unwrap_or("bracket_power:1"))?;
    let b = cfg.smoothness.b;
    let window = IndexWindow::new(cover.indices(), cfg.run.lrad.unwrap_or(4));
    let exact = cfg.tol("identity", 1e-13);

    let one = Symbol::Constant(1.0);
    let mut rng = rng(cfg, 5);
    let sig = inverse_ft(&random_wave_packets(
        r.grid,
        r.weight.n,
        in_band(cfg, r),
        3,
        &mut rng,
    )?)?;
    let back = apply_multiplier(&one, &sig)?;
    let scale = sig.max_abs().max(f64::MIN_POSITIVE);
    let id_err = back.axpy(Complex64::new(-1.0, 0.0), &sig)?.max_abs() / scale;
    let plain = frame.cross_gram(&Molecule::Frame, &Molecule::Frame, &window)?;
    let g1 = multiplier_gram(&frame, &one, 0.0, &window, None)?.matrix;
    let gram_err = plain
        .entries
        .iter()
        .map(|(key, v)| (g1.entries.get(key).copied().unwrap_or_default() - v).norm())
        .fold(0.0, f64::max);
    acc.s("identity_apply_err", f(id_err));
    acc.s("identity_gram_err", f(gram_err));
    acc.c(Check::le("identity_apply", id_err, exact));
    acc.c(Check::le("identity_gram", gram_err, exact));

    let order = cfg.run.order.unwrap_or(3);
    let class = symbol_class_check(&sym, cover.dim, cover.alpha, b, order, r.grid.guard())?;
    let mut t = Table::new("symbol_class", &["order", "sup", "sup_half", "stable"]);
    for o in &class.orders {
        t.push(vec![
            o.order.into(),
            o.sup.into(),
            o.sup_half.into(),
            (o.stable as i64).into(),
        ]);
    }
    acc.t(t);
    acc.s("symbol", sym.id());
    acc.s("class_stable", class.pass);
    acc.c(Check::flag(
        "class_finite",
        class.orders.iter().all(|o| o.sup.is_finite()),
    ));

    let pr = ad_params(cfg, r);
    let mg = multiplier_gram(&frame, &sym, b, &window, Some(&pr))?;
    let mut off: f64 = 0.0;
    for (&((j, _), (k, _)), v) in &mg.matrix.entries {
        if j != k && !window_neighbors(&cover, j).contains(&k) {
            off = off.max(v.norm());
        }
    }
    acc.s("off_neighbor_max", f(off));
    acc.c(Check::le("off_neighbor", off, cfg.tol("vanish", 1e-12)));
    if let Some(m) = mg.membership {
        acc.s("weighted_c", f(m.c));
        acc.s("weighted_c_inner", f(m.c_inner));
        acc.s("weighted_window_stable", m.pass);
    }
    let decay = lattice_decay_exponent(&mg.matrix, &cover, Ix::ZERO, Ix::ZERO, 1)?;
    acc.s("lattice_decay", f(decay));
    acc.c(Check::ge(
        "lattice_decay",
        decay,
        cfg.tol("lattice_decay", 3.0),
    ));
    acc.t(matrix_table("gram", &mg.matrix));
    Ok(())
}

fn bessel(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let b = cfg.smoothness.b;
    let refine = cfg.run.refine.unwrap_or(2);
    let grids = [
        r.grid,
        Grid::new(r.grid.dim, r.grid.halfwidth, r.grid.points * refine)?,
    ];
    let band = in_band(cfg, r);
    let mut reps = Vec::new();
    for grid in grids {
        let mut rng = rng(cfg, 6);
        let corpus = packet_corpus(
            grid,
            r.weight.n,
            band,
            cfg.run.corpus.unwrap_or(50),
            cfg.run.packets.unwrap_or(3),
            &mut rng,
        )?;
        let table = r.system.table(grid, Window::Psi)?;
        let lpw = LpWeightedNorm::new(&r.weight, r.smooth.p, grid)?;
        reps.push(bessel_equivalence_experiment(
            &r.system, &table, &lpw, &r.smooth, b, &corpus,
        )?);
    }
    let mut t = Table::new("ratios", &["signal", "ratio", "ratio_refined"]);
    for (i, (a, c)) in reps[0].ratios.iter().zip(&reps[1].ratios).enumerate() {
        t.push(vec![i.into(), (*a).into(), (*c).into()]);
    }
    acc.t(t);
    acc.s("min", f(reps[0].min));
    acc.s("max", f(reps[0].max));
    acc.s("min_refined", f(reps[1].min));
    acc.s("max_refined", f(reps[1].max));
    acc.c(Check::flag(
        "bracket_bounded",
        reps[0].min > 0.0 && reps[0].max.is_finite(),
    ));
    if b == 0.0 {
        let dev = reps
            .iter()
            .flat_map(|r| r.ratios.iter())
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        acc.c(Check::le("unit_ratio", dev, cfg.tol("unit", 0.0)));
    }
    let drift = (reps[1].min / reps[0].min - 1.0)
        .abs()
        .max((reps[1].max / reps[0].max - 1.0).abs());
    acc.s("refinement_drift", f(drift));
    acc.c(Check::le("refinement_drift", drift, cfg.tol("refine", 0.1)));
    Ok(())
}

fn embedding_decay(cfg: &ExperimentConfig, r: &Resolved, acc: &mut Acc) -> Result<()> {
    let spec = SignalSpec::Gaussian {
        sigma: cfg.run.sigma.unwrap_or(0.25),
        center: [0.0; 2],
    };
    let g = closed_form_spectrum(&spec, r.grid, r.weight.n)?;
    let table = r.system.table(r.grid, Window::Theta)?;
    let lpw = LpWeightedNorm::new(&r.weight, r.smooth.p, r.grid)?;
    let big_l = cfg.run.big_l.unwrap_or(4.0);
    let fit = embedding_decay_check(
        &r.system,
        &table,
        &lpw,
        &g,
        big_l,
        cfg.run.kmin.unwrap_or(4.0),
    )?;
    let mut t = Table::new("band_norms", &["abs_k", "bracket_k", "norm"]);
    for s in &fit.samples {
        t.push(vec![s.0.into(), s.1.into(), s.2.into()]);
    }
    acc.t(t);
    acc.s("exponent", f(fit.exponent));
    acc.s("target", f(fit.target));
    acc.s("c", f(fit.c));
    acc.c(Check::ge(
        "exponent",
        fit.exponent,
        (1.0 - cfg.tol("decay", 0.1)) * fit.target,
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_has_a_harness() {
        for id in EXPERIMENTS {
            assert!(has_harness(id), "{id}");
        }
        assert!(!has_harness("nope"));
        let cfg = ExperimentConfig {
            experiment: "nope".into(),
            ..Default::default()
        };
        assert!(matches!(run(&cfg), Err(CliError::Config(_))));
    }

    #[test]
    fn covering_alpha0_c1_one() {
        let mut cfg = ExperimentConfig {
            experiment: "covering-check".into(),
            ..Default::default()
        };
        cfg.covering.alpha = 0.0;
        cfg.covering.c1 = Some(1.0);
        cfg.covering.kmax = 6;
        let out = run(&cfg).unwrap();
        assert!(out.report.pass, "{:?}", out.report.checks);
        assert!(out.report.scalars["n0"].as_u64().unwrap() <= 3);
    }

    #[test]
    fn bessel_b0_is_exactly_one() {
        let mut cfg = ExperimentConfig {
            experiment: "bessel".into(),
            ..Default::default()
        };
        cfg.run.corpus = Some(4);
        let out = run(&cfg).unwrap();
        assert_eq!(out.report.check("unit_ratio").unwrap().value, 0.0);
        assert!(out.report.pass, "{:?}", out.report.checks);
    }

    #[test]
    fn runtime_errors_carry_context() {
        let mut cfg = ExperimentConfig {
            experiment: "frame-tightness".into(),
            ..Default::default()
        };
        cfg.covering.kmax = 12;
        let err = run(&cfg).unwrap_err();
        assert!(matches!(err, CliError::Run { .. }));
        assert!(err.to_string().starts_with("frame-tightness:"), "{err}");
    }
}
