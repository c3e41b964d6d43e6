//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lbmlift::experiment::{self, ExperimentConfig, LifterKind};
use lbmlift::hybrid::{centred_gaussian, compare_to_reference, HybridSpec, Lifter};
use lbmlift::lattice::{
    from_moments, moments, DensityField, DistributionField, LbmParams, SetId, Shape,
};
use lbmlift::lift_analytic::{analytic_coefficients, Term};
use lbmlift::lift_nce::{
    augment_time_derivative, extract_pde, train_coefficients, ExtractMode, NceTrainConfig,
};
use lbmlift::macro_pde::analytic_pde;
use lbmlift::stencil::DerivSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

struct Checks {
    lines: Vec<String>,
    ok: bool,
}

impl Checks {
    fn check(&mut self, cond: bool, msg: String) {
        self.ok &= cond;
        self.lines
            .push(format!("{} {msg}", if cond { "ok  " } else { "FAIL" }));
    }

    fn finish(self) -> Outcome {
        let body = self.lines.join("\n      ");
        if self.ok {
            Ok(body)
        } else {
            Err(body)
        }
    }
}

fn checks() -> Checks {
    Checks {
        lines: Vec::new(),
        ok: true,
    }
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn d1q3() -> LbmParams {
    LbmParams::diffusive(SetId::D1Q3, 0.05, 0.001, 0.9091).unwrap()
}

fn base_cfg() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn moment_roundtrip() -> Outcome {
    let start = Instant::now();
    let set = SetId::D1Q3.velocity_set();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = 64;
        let mut f = DistributionField::zeros(Shape::d1(n), 3);
        for v in f.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-3..3));
        }
        let back = from_moments(&moments(&f, &set).unwrap(), &set).unwrap();
        for j in 0..n {
            let scale = (0..3).map(|i| f.get(i, j).abs()).fold(0.0, f64::max);
            let ulp = scale * f64::EPSILON;
            for i in 0..3 {
                worst = worst.max((back.get(i, j) - f.get(i, j)).abs() / ulp);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let mut c = checks();
    c.check(
        worst <= 4.0,
        format!("worst deviation {worst:.2} ulps of the node's largest population (limit 4)"),
    );
    c.check(secs < 1.0, format!("runtime {secs:.3} s (limit 1 s)"));
    c.finish()
}

fn bench(cfg: ExperimentConfig) -> f64 {
    experiment::lift_bench(&cfg).unwrap()
}

fn analytic_benchmark() -> Outcome {
    let mut c = checks();
    let eq = bench(ExperimentConfig {
        lifter: LifterKind::Equilibrium,
        ..base_cfg()
    });
    c.check(
        rel(eq, 0.0388) <= 0.05,
        format!("f = f_eq: {eq:.4e} vs 0.0388 (5%)"),
    );
    for (order, want, tol) in [
        (1, 5.2341e-4, 0.05),
        (2, 2.7570e-5, 0.05),
        (3, 1.2439e-5, 0.25),
    ] {
        let e = bench(ExperimentConfig {
            lifter: LifterKind::Analytic,
            order,
            ..base_cfg()
        });
        c.check(
            rel(e, want) <= tol,
            format!("order {order}: {e:.4e} vs {want:.4e} ({}%)", tol * 100.0),
        );
    }
    c.finish()
}

fn cr_benchmark() -> Outcome {
    let mut c = checks();
    let cr = |m: usize, adv: Vec<f64>| {
        bench(ExperimentConfig {
            lifter: LifterKind::ConstrainedRuns,
            m,
            advection: adv,
            ..base_cfg()
        })
    };
    for (m, want) in [(0, 0.0010), (1, 1.3578e-6), (2, 2.9359e-9)] {
        let e = cr(m, vec![]);
        c.check(
            rel(e, want) <= 0.1,
            format!("m = {m}: {e:.4e} vs {want:.4e} (10%)"),
        );
    }
    let e = cr(3, vec![]);
    c.check(e <= 5e-11, format!("m = 3: {e:.4e} <= 5e-11"));
    for (m, want) in [(0, 0.0014), (1, 1.7927e-6)] {
        let e = cr(m, vec![0.66]);
        c.check(
            rel(e, want) <= 0.1,
            format!("a = 0.66, m = {m}: {e:.4e} vs {want:.4e} (10%)"),
        );
    }
    c.finish()
}

fn trained_expansion() -> Outcome {
    let p = d1q3();
    let mut c = checks();
    let exact = analytic_coefficients(&p, 2).unwrap();
    let get = |co: &lbmlift::lift_analytic::LiftCoefficients, k: u8| {
        co.get(Term::Space(DerivSpec::x(k))).unwrap().to_vec()
    };
    for m in 1..=3 {
        let t = train_coefficients(&NceTrainConfig::new(2, m), &p).unwrap();
        let (da, db) = (
            dist(&get(&t.coeffs, 1), &get(&exact, 1)),
            dist(&get(&t.coeffs, 2), &get(&exact, 2)),
        );
        c.check(
            da <= 1e-12 && db <= 1e-12,
            format!("(a) R = 2, m = {m}: |da| = {da:.2e}, |db| = {db:.2e} (<= 1e-12)"),
        );
    }
    let err = |r: usize, m: usize| {
        bench(ExperimentConfig {
            lifter: LifterKind::Nce,
            nce_order: r,
            m,
            ..base_cfg()
        })
    };
    let e = err(2, 1);
    c.check(
        rel(e, 2.7570e-5) <= 0.05,
        format!("(b) R = 2, m = 1: {e:.4e} vs 2.7570e-5 (5%)"),
    );
    let table: Vec<Vec<f64>> = (0..=3)
        .map(|m| (1..=6).map(|r| err(r, m)).collect())
        .collect();
    for m in 1..=3 {
        let row = &table[m];
        let ok = row.windows(2).all(|w| w[1] <= w[0]);
        let txt: Vec<String> = row.iter().map(|v| format!("{v:.4e}")).collect();
        c.check(
            ok,
            format!("(c) m = {m}, R = 1..6 non-increasing: [{}]", txt.join(", ")),
        );
    }
    for r in 4..=6 {
        let col: Vec<f64> = (0..=3).map(|m| table[m][r - 1]).collect();
        let ok = col.windows(2).all(|w| w[1] < w[0]);
        let txt: Vec<String> = col.iter().map(|v| format!("{v:.4e}")).collect();
        c.check(
            ok,
            format!(
                "(c) R = {r}, m = 0..3 strictly decreasing: [{}]",
                txt.join(", ")
            ),
        );
    }
    let e = table[3][5];
    c.check(e <= 1e-9, format!("(d) R = 6, m = 3: {e:.4e} <= 1e-9"));
    c.finish()
}

fn extracted(
    p: &LbmParams,
    r: usize,
    m: usize,
) -> (lbmlift::macro_pde::MacroPde, lbmlift::macro_pde::MacroPde) {
    let cfg = NceTrainConfig::new(r, m);
    let t = train_coefficients(&cfg, p).unwrap();
    let aug = augment_time_derivative(&t.coeffs, &cfg, p).unwrap();
    (
        extract_pde(&aug.coeffs, ExtractMode::Summation, None).unwrap(),
        extract_pde(&aug.coeffs, ExtractMode::Nullspace, Some(&aug.system)).unwrap(),
    )
}

fn pde_extraction() -> Outcome {
    let mut c = checks();
    let p = d1q3();
    let target = analytic_pde(&p).diffusion;
    for m in 1..=3 {
        let (s, n) = extracted(&p, 4, m);
        c.check(
            (s.diffusion - target).abs() <= 1e-6,
            format!(
                "D1Q3 omega = 0.9091, m = {m}: D_hat = {:.10} vs {target:.10} (1e-6)",
                s.diffusion
            ),
        );
        c.check(
            (s.diffusion - n.diffusion).abs() <= 1e-8,
            format!(
                "m = {m}: summation and nullspace differ by {:.2e} (1e-8)",
                (s.diffusion - n.diffusion).abs()
            ),
        );
    }
    let exact = LbmParams::diffusive(SetId::D1Q3, 0.05, 0.001, 10.0 / 11.0).unwrap();
    let (s, _) = extracted(&exact, 4, 1);
    c.check(
        (s.diffusion - 1.0).abs() <= 1e-6,
        format!("omega = 10/11: D_hat = {:.10} vs 1.0 (1e-6)", s.diffusion),
    );
    let adv = LbmParams::new(SetId::D1Q3.velocity_set(), 0.05, 0.001, 0.9091, vec![0.66]).unwrap();
    let (s, n) = extracted(&adv, 4, 1);
    c.check(
        (s.advection[0] - 0.66).abs() <= 1e-4,
        format!("a = 0.66: a_hat = {:.8} (1e-4)", s.advection[0]),
    );
    c.check(
        (s.diffusion - n.diffusion).abs() <= 1e-8,
        format!(
            "a = 0.66: modes differ by {:.2e} on D_hat (1e-8)",
            (s.diffusion - n.diffusion).abs()
        ),
    );
    let p2 = LbmParams::diffusive(SetId::D2Q5, 0.05, 1e-4, 1.6129).unwrap();
    let (s, _) = extracted(&p2, 4, 1);
    c.check(
        (s.diffusion - 1.0).abs() <= 1e-4,
        format!("D2Q5: D_hat = {:.8} vs 1.0 (1e-4)", s.diffusion),
    );
    c.finish()
}

fn run_hybrid(
    p: &LbmParams,
    lifter: Lifter,
    pde: lbmlift::macro_pde::MacroPde,
    initial: DensityField,
) -> f64 {
    let n = initial.shape.nx;
    let spec = HybridSpec {
        split: HybridSpec::default_split(n),
        params: p.clone(),
        pde,
        lifter,
        initial,
    };
    compare_to_reference(&spec, 200).unwrap().final_max()
}

fn hybrid_properties() -> Outcome {
    let mut c = checks();
    let p = d1q3();
    let g = centred_gaussian(SetId::D1Q3, 200, 0.05);
    let pde = analytic_pde(&p);
    let errs: Vec<f64> = [0, 1, 2]
        .iter()
        .map(|&o| {
            let l = if o == 0 {
                Lifter::equilibrium(&p)
            } else {
                Lifter::Coefficients(analytic_coefficients(&p, o).unwrap())
            };
            run_hybrid(&p, l, pde.clone(), g.clone())
        })
        .collect();
    c.check(
        errs[0] > errs[1] && errs[1] > errs[2],
        format!(
            "(a) equilibrium {:.4e} > order 1 {:.4e} > order 2 {:.4e}",
            errs[0], errs[1], errs[2]
        ),
    );

    let cfg = NceTrainConfig::new(6, 3);
    let t = train_coefficients(&cfg, &p).unwrap();
    let aug = augment_time_derivative(&t.coeffs, &cfg, &p).unwrap();
    let ext = extract_pde(&aug.coeffs, ExtractMode::Summation, None).unwrap();
    let with_ext = run_hybrid(
        &p,
        Lifter::Coefficients(t.coeffs.clone()),
        ext.clone(),
        g.clone(),
    );
    let with_an = run_hybrid(
        &p,
        Lifter::Coefficients(t.coeffs.clone()),
        pde.clone(),
        g.clone(),
    );
    c.check(
        with_ext <= with_an,
        format!(
            "(b) R = 6, m = 3: extracted PDE (D = {:.12}) {with_ext:.6e} <= analytic PDE (D = {:.12}) {with_an:.6e}",
            ext.diffusion, pde.diffusion
        ),
    );

    let uniform = DensityField::uniform(Shape::d1(200), 0.7);
    let mut worst: f64 = 0.0;
    for l in [
        Lifter::equilibrium(&p),
        Lifter::Coefficients(analytic_coefficients(&p, 3).unwrap()),
        Lifter::Coefficients(t.coeffs.clone()),
        Lifter::ConstrainedRuns(lbmlift::lift_cr::CrConfig::new(1)),
    ] {
        let spec = HybridSpec {
            split: 60,
            params: p.clone(),
            pde: pde.clone(),
            lifter: l,
            initial: uniform.clone(),
        };
        let mut st = lbmlift::hybrid::init_hybrid(&spec).unwrap();
        for _ in 0..200 {
            st = lbmlift::hybrid::hybrid_step(&st, &spec).unwrap();
        }
        let d = st.density();
        worst = worst.max(d.values.iter().map(|v| (v - 0.7).abs()).fold(0.0, f64::max));
    }
    c.check(
        worst == 0.0,
        format!("(c) uniform density after 200 steps, 4 lifters: max deviation {worst:e}"),
    );

    for n in [100, 200] {
        for (name, set, omega, dt, a) in [
            ("D2Q5", SetId::D2Q5, 1.6129, 1e-4, vec![0.0, 0.0]),
            ("D2Q9", SetId::D2Q9, 1.9531, 1e-5, vec![0.0, 0.0]),
            (
                "D2Q9 a = (1, 0.5)",
                SetId::D2Q9,
                1.9531,
                1e-5,
                vec![1.0, 0.5],
            ),
        ] {
            let p2 = LbmParams::new(set.velocity_set(), 0.05, dt, omega, a).unwrap();
            let co = train_coefficients(&NceTrainConfig::new(4, 1), &p2)
                .unwrap()
                .coeffs;
            let g2 = centred_gaussian(set, n, 0.05);
            let pde2 = analytic_pde(&p2);
            let eq = run_hybrid(&p2, Lifter::equilibrium(&p2), pde2.clone(), g2.clone());
            let nce = run_hybrid(&p2, Lifter::Coefficients(co), pde2, g2);
            c.check(
                nce <= eq / 10.0,
                format!("(d) {name}, n = {n}: NCE {nce:.4e} <= equilibrium {eq:.4e} / 10"),
            );
        }
    }
    c.finish()
}

fn cost_accounting() -> Outcome {
    let mut c = checks();
    let base = ExperimentConfig {
        nce_order: 6,
        m: 3,
        write_fields: false,
        ..base_cfg()
    };
    let mut nce_steps = Vec::new();
    for (n, steps) in [(100, 50), (200, 200), (300, 400)] {
        let cnt = experiment::cost(&ExperimentConfig {
            lifter: LifterKind::Nce,
            n,
            steps,
            ..base.clone()
        })
        .unwrap();
        nce_steps.push(cnt.total());
        c.check(
            cnt.lbm_steps_lifting == 0,
            format!("NCE, n = {n}, {steps} steps: no lifting steps after training"),
        );
    }
    c.check(
        nce_steps.iter().all(|s| *s == nce_steps[0] && *s <= 500),
        format!("NCE training steps {nce_steps:?}: constant and <= 500"),
    );
    let mut totals = vec![("NCE".to_string(), nce_steps[1])];
    for m in 0..=3 {
        let cfg = ExperimentConfig {
            lifter: LifterKind::ConstrainedRuns,
            m,
            ..base.clone()
        };
        let cnt = experiment::cost(&cfg).unwrap();
        let per = cnt.lbm_steps_lifting as f64 / (cfg.steps as f64 * 2.0);
        c.check(
            cnt.lbm_steps_lifting >= (m as u64 + 1) * cnt.lift_iterations && per >= (m + 1) as f64,
            format!(
                "CR m = {m}: {} steps for {} iterations, {per:.1} per ghost point per step (>= {} per iteration)",
                cnt.lbm_steps_lifting,
                cnt.lift_iterations,
                m + 1
            ),
        );
        totals.push((format!("CR m={m}"), cnt.total()));
    }
    let ok = totals.windows(2).all(|w| w[0].1 < w[1].1);
    let txt: Vec<String> = totals.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    c.check(
        ok,
        format!("200-step totals increasing: {}", txt.join(" < ")),
    );
    c.finish()
}

fn run_cli(cmd: &str, cfg: &Path, out: &Path) -> Result<(), String> {
    let st = Command::new(env!("CARGO_BIN_EXE_lbmlift"))
        .args([cmd, "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if st.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&st.stderr).into_owned())
    }
}

fn determinism() -> Outcome {
    let mut c = checks();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [
        ("train", "nce_order = 4\nm = 2\n"),
        ("lift-bench", "lifter = cr\nm = 1\n"),
        ("hybrid", "lifter = nce\nnce_order = 6\nm = 3\npde = extracted\nsteps = 50\n"),
        ("hybrid", "set = D2Q9\nomega = 1.9531\ndt = 1e-5\nadvection = 1, 0.5\nn = 40\nsteps = 20\nlifter = nce\n"),
        ("cost", "lifter = cr\nm = 2\nsteps = 20\n"),
    ];
    for (k, (cmd, text)) in runs.iter().enumerate() {
        let cfg = dir.path().join(format!("run{k}.cfg"));
        std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let (a, b) = (
            dir.path().join(format!("a{k}")),
            dir.path().join(format!("b{k}")),
        );
        run_cli(cmd, &cfg, &a)?;
        run_cli(cmd, &cfg, &b)?;
        let mut names: Vec<_> = std::fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            let same =
                std::fs::read(a.join(&name)).unwrap() == std::fs::read(b.join(&name)).unwrap();
            c.check(
                same,
                format!("{cmd}: {} byte-identical", name.to_string_lossy()),
            );
        }
    }
    c.finish()
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 moment roundtrip", moment_roundtrip),
        ("2 analytic lift benchmark", analytic_benchmark),
        ("3 constrained runs benchmark", cr_benchmark),
        ("4 trained expansion", trained_expansion),
        ("5 PDE extraction", pde_extraction),
        ("6 hybrid properties", hybrid_properties),
        ("7 cost accounting", cost_accounting),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1} s)\n      {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1} s)\n      {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
