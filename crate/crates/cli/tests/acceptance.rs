//! Acceptance suite: one line per criterion, then a single assertion.
//!
//! Runs without the libtest harness so the lines always reach stdout.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use alphamod::covering::{CoveringParams, Ix};
use alphamod::frame::CoeffSeq;
use alphamod::grid::{sample_closed_form, Grid, SignalSpec};
use alphamod::norms::{lp_w_norm, m_discrete_norm, SmoothnessParams, Q};
use alphamod::weights::MatrixWeight;
use alphamod_cli::{run, ExperimentConfig, Report};
use num_complex::Complex64;

type Verdict = (bool, String);

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(format!("{name}.toml"));
    ExperimentConfig::from_toml(&fs::read_to_string(&path).unwrap()).unwrap()
}

fn report(cfg: &ExperimentConfig) -> Report {
    match run(cfg) {
        Ok(out) => out.report,
        Err(e) => panic!("{e}"),
    }
}

/// Pass iff every named check passes; detail lists their values.
fn require(r: &Report, names: &[&str]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in names {
        match r.check(n) {
            Some(c) => {
                ok &= c.pass;
                parts.push(format!("{n}={:.3e}", c.value));
            }
            None => {
                ok = false;
                parts.push(format!("{n}=missing"));
            }
        }
    }
    (ok, parts.join(" "))
}

fn all(vs: Vec<Verdict>) -> Verdict {
    let ok = vs.iter().all(|v| v.0);
    (
        ok,
        vs.into_iter().map(|v| v.1).collect::<Vec<_>>().join("; "),
    )
}

fn partition() -> Verdict {
    let mut out = Vec::new();
    for alpha in [0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0] {
        let mut cfg = config("bapu-check");
        cfg.covering.alpha = alpha;
        cfg.grid.points = 4096;
        cfg.run.decay = Some(false);
        let (ok, d) = require(&report(&cfg), &["psi_defect", "theta_defect"]);
        out.push((ok, format!("alpha={alpha:.3} {d}")));
    }
    all(out)
}

fn covering() -> Verdict {
    let mut out = vec![require(
        &report(&config("covering-check")),
        &["covers_domain", "n0", "max_scale_ratio"],
    )];
    let mut cfg = config("covering-check");
    cfg.covering.dim = 2;
    cfg.covering.c1 = None;
    cfg.covering.kmax = 4;
    // Balls of radius sqrt(2) around Z^2 meet 21 neighbours, so n0 is only asserted for n = 1.
    let r2 = report(&cfg);
    let (ok, d) = require(&r2, &["covers_domain", "max_scale_ratio"]);
    out.push((ok, format!("n=2 {d} n0={}", r2.scalars["n0"])));
    let mut cfg = config("covering-check");
    cfg.covering.alpha = 0.5;
    cfg.covering.c1 = None;
    cfg.covering.kmax = 6;
    out.push(require(
        &report(&cfg),
        &["covers_domain", "max_scale_ratio"],
    ));
    all(out)
}

fn tightness() -> Verdict {
    let mut out = Vec::new();
    for (alpha, kmax) in [(0.0, 10), (0.5, 3)] {
        let mut cfg = config("frame-tightness");
        cfg.covering.alpha = alpha;
        cfg.covering.kmax = kmax;
        let (ok, d) = require(&report(&cfg), &["residual", "parseval_defect"]);
        out.push((ok, format!("alpha={alpha} K={kmax} {d}")));
    }
    all(out)
}

fn coefficient_identity() -> Verdict {
    let mut cfg = config("frame-tightness");
    cfg.run.corpus = Some(100);
    require(&report(&cfg), &["coef_identity"])
}

fn norm_oracles() -> Verdict {
    let g = Grid::new(1, 16.0 * PI, 1024).unwrap();
    let f = sample_closed_form(
        &SignalSpec::Gaussian {
            sigma: 1.0,
            center: [0.0; 2],
        },
        g,
        1,
    )
    .unwrap();
    let gauss = lp_w_norm(&MatrixWeight::identity(1, 1), 2.0, &f).unwrap();
    let e1 = (gauss - PI.powf(0.25)).abs();

    let cover = CoveringParams::with_constants(0.0, 1, 1.0, PI, 4).unwrap();
    let sp = SmoothnessParams::new(0.0, 1.5, 2.0, Q::Finite(2.0)).unwrap();
    let mut c = CoeffSeq::new(1);
    c.insert(Ix::d1(2), Ix::d1(-3), vec![Complex64::new(1.0, 0.0)]);
    let one = m_discrete_norm(&cover, &MatrixWeight::identity(1, 1), &sp, &c, 0.1)
        .unwrap()
        .value;
    let e2 = (one - 1.0).abs();

    let w = MatrixWeight::bracket_power(1, vec![0.0, 2.0]).unwrap();
    let sp = SmoothnessParams::new(0.0, 0.0, 2.0, Q::Finite(1.0)).unwrap();
    let mut c = CoeffSeq::new(2);
    c.insert(
        Ix::ZERO,
        Ix::ZERO,
        vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    );
    let v = m_discrete_norm(&cover, &w, &sp, &c, 0.05).unwrap().value;
    let e3 = (v - 2.0 / 3f64.sqrt()).abs();
    let ok = e1 <= 1e-6 && e2 <= 1e-6 && e3 <= 1e-6;
    (
        ok,
        format!("gaussian_err={e1:.3e} unit_err={e2:.3e} bracket_err={e3:.3e}"),
    )
}

fn ap() -> Verdict {
    let mut out = Vec::new();
    let mut cfg = config("ap-diagnostics");
    cfg.weight.kind = "constant".into();
    cfg.weight.n = 2;
    cfg.weight.base = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
    cfg.run.expect = Some("one".into());
    cfg.run.expect_a1 = Some("one".into());
    out.push(require(&report(&cfg), &["ap_minus_one", "a1_minus_one"]));
    out.push(require(
        &report(&config("ap-diagnostics")),
        &["ap_finite", "ap_level_spread", "a1_divergent"],
    ));
    let mut cfg = config("ap-diagnostics");
    cfg.weight.id = "abs_pow:1".into();
    cfg.run.expect = Some("divergent".into());
    cfg.run.expect_a1 = None;
    out.push(require(&report(&cfg), &["ap_divergent"]));
    let mut cfg = config("ap-diagnostics");
    cfg.weight.id = "abs_pow:-0.5".into();
    cfg.run.expect_a1 = Some("finite".into());
    out.push(require(&report(&cfg), &["a1_finite", "a1_level_spread"]));
    all(out)
}

fn doubling() -> Verdict {
    let mut out = Vec::new();
    for dim in [1usize, 2] {
        let mut cfg = config("doubling");
        cfg.covering.dim = dim;
        cfg.weight.kind = "identity".into();
        cfg.smoothness.p = 2.0;
        cfg.run.expect_beta = Some(dim as f64);
        cfg.tolerances.insert("ratio".into(), 1e-10);
        let (ok, d) = require(&report(&cfg), &["beta_error", "ratio_error"]);
        out.push((ok, format!("lebesgue n={dim} {d}")));
    }
    let (ok, d) = require(&report(&config("doubling")), &["beta_error"]);
    out.push((ok, format!("|t| p=1 {d}")));
    all(out)
}

fn reducing() -> Verdict {
    require(
        &report(&config("reducing")),
        &["exact_example", "fit_factor"],
    )
}

fn norm_equivalence() -> Verdict {
    require(
        &report(&config("norm-equivalence")),
        &[
            "eqi_width_drift",
            "connect",
            "profile_bounded",
            "profile_bracket_drift",
            "psi_theta_bounded",
            "psi_theta_bracket_drift",
        ],
    )
}

fn sampling() -> Verdict {
    require(
        &report(&config("sampling-ineq")),
        &["c_finite", "refinement_drift", "k_spread"],
    )
}

fn almost_diagonal() -> Verdict {
    all(vec![
        require(
            &report(&config("ad-membership")),
            &["omega_self", "gram_c_finite"],
        ),
        require(
            &report(&config("ad-boundedness")),
            &["probe_drift", "le_sq_error"],
        ),
    ])
}

fn multiplier() -> Verdict {
    let mut b0 = config("bessel");
    b0.smoothness.b = 0.0;
    all(vec![
        require(
            &report(&config("multiplier")),
            &[
                "identity_apply",
                "identity_gram",
                "class_finite",
                "off_neighbor",
            ],
        ),
        require(&report(&b0), &["unit_ratio"]),
        require(
            &report(&config("bessel")),
            &["bracket_bounded", "refinement_drift"],
        ),
    ])
}

fn embedding() -> Verdict {
    require(&report(&config("embedding-decay")), &["exponent"])
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    for id in ["frame-tightness", "ap-diagnostics", "norm-equivalence"] {
        let cfg = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("configs")
            .join(format!("{id}.toml"));
        let mut files = Vec::new();
        for rep in 0..2 {
            let o = dir.path().join(format!("{id}-{rep}"));
            let st = Command::new(env!("CARGO_BIN_EXE_alphamod"))
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(&o)
                .output()
                .unwrap();
            assert!(st.status.code().is_some(), "{id}: killed");
            let mut names: Vec<_> = fs::read_dir(o.join("tables"))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            let mut bytes = fs::read(o.join("report.json")).unwrap();
            for n in names {
                bytes.extend(fs::read(n).unwrap());
            }
            files.push(bytes);
        }
        out.push((files[0] == files[1], format!("{id}:{}B", files[0].len())));
    }
    all(out)
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 14] = [
        ("partition of unity", partition),
        ("covering admissibility", covering),
        ("tight frame", tightness),
        ("coefficient identity", coefficient_identity),
        ("weighted norm oracles", norm_oracles),
        ("muckenhoupt diagnostics", ap),
        ("doubling", doubling),
        ("reducing operators", reducing),
        ("norm equivalences", norm_equivalence),
        ("sampling inequality", sampling),
        ("almost-diagonal calculus", almost_diagonal),
        ("multiplier", multiplier),
        ("embedding decay", embedding),
        ("determinism", determinism),
    ];
    let results: Vec<Verdict> = std::thread::scope(|s| {
        let hs: Vec<_> = criteria.iter().map(|(_, f)| s.spawn(f)).collect();
        hs.into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|e| {
                    (false, format!("panicked: {:?}", e.downcast_ref::<String>()))
                })
            })
            .collect()
    });
    let mut failed = Vec::new();
    for (i, ((name, _), (ok, detail))) in criteria.iter().zip(&results).enumerate() {
        println!(
            "[{}] {:>2} {name}: {detail}",
            if *ok { "PASS" } else { "FAIL" },
            i + 1
        );
        if !ok {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
