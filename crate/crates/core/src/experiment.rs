//! Experiment configuration, runners and CSV output.
//!
//! Configs are flat `key = value` files with `#` comments. Every run is
//! deterministic; floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hybrid::{
    centred_gaussian, compare_to_reference, ErrorSeries, HybridSpec, Lifter, StepCounter,
};
use crate::lattice::{equilibrium, restrict, run_periodic, LbmParams, SetId};
use crate::lift_analytic::{analytic_coefficients, LiftCoefficients};
use crate::lift_cr::{CrConfig, CrSolver};
use crate::lift_nce::{
    augment_time_derivative, extract_pde, train_coefficients, ExtractMode, NceTrainConfig,
};
use crate::macro_pde::{analytic_pde, MacroPde};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LifterKind {
    Equilibrium,
    Analytic,
    ConstrainedRuns,
    Nce,
    /// Returns the reference state itself; only meaningful for `lift-bench`.
    Exact,
}

impl LifterKind {
    pub fn name(self) -> &'static str {
        match self {
            LifterKind::Equilibrium => "equilibrium",
            LifterKind::Analytic => "analytic",
            LifterKind::ConstrainedRuns => "cr",
            LifterKind::Nce => "nce",
            LifterKind::Exact => "exact",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "equilibrium" | "eq" => LifterKind::Equilibrium,
            "analytic" => LifterKind::Analytic,
            "cr" => LifterKind::ConstrainedRuns,
            "nce" => LifterKind::Nce,
            "exact" => LifterKind::Exact,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdeChoice {
    Analytic,
    Extracted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub set: SetId,
    pub omega: f64,
    pub dx: f64,
    pub dt: f64,
    /// Cells per axis.
    pub n: usize,
    /// Empty means zero advection.
    pub advection: Vec<f64>,
    pub lifter: LifterKind,
    /// Analytic expansion order.
    pub order: usize,
    /// Smoothness order for constrained runs and NCE.
    pub m: usize,
    /// Highest spatial derivative of the NCE expansion.
    pub nce_order: usize,
    pub test_cells: usize,
    pub probes: Option<Vec<usize>>,
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    pub nce_jacobian_eps: f64,
    pub cr_tol: f64,
    pub cr_max_iter: usize,
    pub cr_jacobian_eps: f64,
    pub cr_locality: Option<usize>,
    pub cr_solver: CrSolver,
    /// LBM steps for the `lift-bench` reference state.
    pub reference_steps: usize,
    /// Hybrid and cost steps.
    pub steps: usize,
    pub split: Option<usize>,
    pub pde: PdeChoice,
    pub extract: ExtractMode,
    /// Cached coefficient file for the `nce` lifter.
    pub coefficients: Option<PathBuf>,
    pub write_fields: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            set: SetId::D1Q3,
            omega: 0.9091,
            dx: 0.05,
            dt: 0.001,
            n: 200,
            advection: Vec::new(),
            lifter: LifterKind::Nce,
            order: 2,
            m: 1,
            nce_order: 4,
            test_cells: 60,
            probes: None,
            newton_tol: 1e-10,
            max_newton_iter: 20,
            nce_jacobian_eps: 1e-8,
            cr_tol: 1e-13,
            cr_max_iter: 100,
            cr_jacobian_eps: 1e-7,
            cr_locality: None,
            cr_solver: CrSolver::Auto,
            reference_steps: 1000,
            steps: 200,
            split: None,
            pde: PdeChoice::Analytic,
            extract: ExtractMode::Summation,
            coefficients: None,
            write_fields: true,
        }
    }
}

fn list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    v.split(',').map(|s| s.trim().parse().ok()).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config {
                line,
                msg: format!("`{key}` expects {what}, got `{value}`"),
            };
            macro_rules! num {
                () => {
                    value.parse().map_err(|_| bad("a number"))?
                };
            }
            match key {
                "set" => c.set = SetId::parse(value).map_err(|_| bad("D1Q3, D2Q5 or D2Q9"))?,
                "omega" => c.omega = num!(),
                "dx" => c.dx = num!(),
                "dt" => c.dt = num!(),
                "n" => c.n = num!(),
                "advection" => {
                    c.advection = list(value).ok_or_else(|| bad("comma-separated numbers"))?
                }
                "lifter" => {
                    c.lifter = LifterKind::parse(value)
                        .ok_or_else(|| bad("equilibrium, analytic, cr, nce or exact"))?
                }
                "order" => c.order = num!(),
                "m" => c.m = num!(),
                "nce_order" => c.nce_order = num!(),
                "test_cells" => c.test_cells = num!(),
                "probes" => {
                    c.probes = Some(list(value).ok_or_else(|| bad("comma-separated indices"))?)
                }
                "newton_tol" => c.newton_tol = num!(),
                "max_newton_iter" => c.max_newton_iter = num!(),
                "nce_jacobian_eps" => c.nce_jacobian_eps = num!(),
                "cr_tol" => c.cr_tol = num!(),
                "cr_max_iter" => c.cr_max_iter = num!(),
                "cr_jacobian_eps" => c.cr_jacobian_eps = num!(),
                "cr_locality" => c.cr_locality = Some(num!()),
                "cr_solver" => {
                    c.cr_solver = match value {
                        "auto" => CrSolver::Auto,
                        "picard" => CrSolver::Picard,
                        "newton" => CrSolver::Newton,
                        _ => return Err(bad("auto, picard or newton")),
                    }
                }
                "reference_steps" => c.reference_steps = num!(),
                "steps" => c.steps = num!(),
                "split" => c.split = Some(num!()),
                "pde" => {
                    c.pde = match value {
                        "analytic" => PdeChoice::Analytic,
                        "extracted" => PdeChoice::Extracted,
                        _ => return Err(bad("analytic or extracted")),
                    }
                }
                "extract" => {
                    c.extract = match value {
                        "summation" => ExtractMode::Summation,
                        "nullspace" => ExtractMode::Nullspace,
                        _ => return Err(bad("summation or nullspace")),
                    }
                }
                "coefficients" => c.coefficients = Some(PathBuf::from(value)),
                "write_fields" => {
                    c.write_fields = value.parse().map_err(|_| bad("true or false"))?
                }
                _ => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        c.params()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut c = Self::parse(&text)?;
        if let Some(p) = &c.coefficients {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    c.coefficients = Some(dir.join(p));
                }
            }
        }
        Ok(c)
    }

    pub fn params(&self) -> Result<LbmParams> {
        let vs = self.set.velocity_set();
        let adv = if self.advection.is_empty() {
            vec![0.0; vs.dim]
        } else {
            self.advection.clone()
        };
        LbmParams::new(vs, self.dx, self.dt, self.omega, adv)
    }

    pub fn cr_config(&self) -> CrConfig {
        CrConfig {
            m: self.m,
            tol: self.cr_tol,
            max_iter: self.cr_max_iter,
            jacobian_eps: self.cr_jacobian_eps,
            locality: self.cr_locality,
            solver: self.cr_solver,
        }
    }

    pub fn nce_config(&self) -> NceTrainConfig {
        NceTrainConfig {
            spatial_order: self.nce_order,
            m: self.m,
            test_cells: self.test_cells,
            probes: self.probes.clone(),
            newton_tol: self.newton_tol,
            max_newton_iter: self.max_newton_iter,
            jacobian_eps: self.nce_jacobian_eps,
            ..NceTrainConfig::new(self.nce_order, self.m)
        }
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

/// Training output with the extracted PDE.
#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Spatial terms plus the `t` term.
    pub coeffs: LiftCoefficients,
    pub iterations: usize,
    pub lbm_steps: u64,
    pub condition: f64,
    pub sigma_ratio: f64,
    pub summation: MacroPde,
    pub nullspace: Option<MacroPde>,
}

impl TrainReport {
    pub fn pde(&self, mode: ExtractMode) -> Result<MacroPde> {
        match mode {
            ExtractMode::Summation => Ok(self.summation.clone()),
            ExtractMode::Nullspace => self.nullspace.clone().ok_or_else(|| {
                Error::Nullspace("nullspace extraction failed during training".into())
            }),
        }
    }
}

pub fn train(cfg: &ExperimentConfig) -> Result<TrainReport> {
    let params = cfg.params()?;
    let nce = cfg.nce_config();
    let tr = train_coefficients(&nce, &params)?;
    let aug = augment_time_derivative(&tr.coeffs, &nce, &params)?;
    let summation = extract_pde(&aug.coeffs, ExtractMode::Summation, None)?;
    let nullspace = match extract_pde(&aug.coeffs, ExtractMode::Nullspace, Some(&aug.system)) {
        Ok(p) => Some(p),
        Err(e) => {
            log::warn!("nullspace extraction: {e}");
            None
        }
    };
    let mut coeffs = tr.coeffs;
    coeffs.terms.extend(
        aug.coeffs
            .terms
            .into_iter()
            .filter(|(t, _)| *t == crate::lift_analytic::Term::Time),
    );
    Ok(TrainReport {
        coeffs,
        iterations: tr.iterations,
        lbm_steps: tr.lbm_steps + aug.lbm_steps,
        condition: tr.condition,
        sigma_ratio: aug.system.sigma_ratio(),
        summation,
        nullspace,
    })
}

/// Build the configured lifter; returns it with the LBM steps spent on training.
pub fn build_lifter(cfg: &ExperimentConfig) -> Result<(Lifter, u64)> {
    let params = cfg.params()?;
    Ok(match cfg.lifter {
        LifterKind::Equilibrium => (Lifter::equilibrium(&params), 0),
        LifterKind::Analytic => (
            Lifter::Coefficients(analytic_coefficients(&params, cfg.order)?),
            0,
        ),
        LifterKind::ConstrainedRuns => (Lifter::ConstrainedRuns(cfg.cr_config()), 0),
        LifterKind::Nce => match &cfg.coefficients {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                let c = LiftCoefficients::from_text(&text)?;
                c.check_params(&params)?;
                (Lifter::Coefficients(c.spatial_part()), 0)
            }
            None => {
                let tr = train_coefficients(&cfg.nce_config(), &params)?;
                (Lifter::Coefficients(tr.coeffs), tr.lbm_steps)
            }
        },
        LifterKind::Exact => {
            return Err(Error::InvalidParams(
                "the exact lifter exists only for lift-bench".into(),
            ))
        }
    })
}

/// The restrict-then-lift benchmark: `|f - f_c|` over all nodes and velocities,
/// where `f_c` is the LBM state after `reference_steps` steps from equilibrium.
pub fn lift_bench(cfg: &ExperimentConfig) -> Result<f64> {
    let params = cfg.params()?;
    let rho0 = centred_gaussian(cfg.set, cfg.n, cfg.dx);
    let mut fc = equilibrium(&rho0, &params)?;
    run_periodic(&mut fc, &params, cfg.reference_steps);
    if cfg.lifter == LifterKind::Exact {
        let copy = fc.clone();
        return Ok(copy.distance(&fc));
    }
    let rho = restrict(&fc);
    let (lifter, _) = build_lifter(cfg)?;
    let (f, _) = lifter.lift_field(&rho, &params)?;
    Ok(f.distance(&fc))
}

pub fn hybrid_spec(cfg: &ExperimentConfig) -> Result<(HybridSpec, u64)> {
    let params = cfg.params()?;
    let (lifter, pde, training) = match cfg.pde {
        PdeChoice::Analytic => {
            let (lifter, training) = build_lifter(cfg)?;
            (lifter, analytic_pde(&params), training)
        }
        PdeChoice::Extracted => {
            let r = train(cfg)?;
            let pde = r.pde(cfg.extract)?;
            if cfg.lifter == LifterKind::Nce && cfg.coefficients.is_none() {
                (
                    Lifter::Coefficients(r.coeffs.spatial_part()),
                    pde,
                    r.lbm_steps,
                )
            } else {
                let (lifter, training) = build_lifter(cfg)?;
                (lifter, pde, r.lbm_steps + training)
            }
        }
    };
    let spec = HybridSpec {
        split: cfg
            .split
            .unwrap_or_else(|| HybridSpec::default_split(cfg.n)),
        params,
        pde,
        lifter,
        initial: centred_gaussian(cfg.set, cfg.n, cfg.dx),
    };
    spec.validate()?;
    Ok((spec, training))
}

pub fn hybrid(cfg: &ExperimentConfig) -> Result<ErrorSeries> {
    let (spec, training) = hybrid_spec(cfg)?;
    let mut e = compare_to_reference(&spec, cfg.steps)?;
    e.counter.lbm_steps_training = training;
    Ok(e)
}

pub fn cost(cfg: &ExperimentConfig) -> Result<StepCounter> {
    Ok(hybrid(cfg)?.counter)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

pub fn write_train(dir: &Path, r: &TrainReport) -> Result<Vec<PathBuf>> {
    let mut csv = String::from("iterations,lbm_steps,condition,sigma_ratio,advection_summation,diffusion_summation,advection_nullspace,diffusion_nullspace\n");
    let (na, nd) = match &r.nullspace {
        Some(p) => (fmt_list(&p.advection), fmt_f64(p.diffusion)),
        None => (String::new(), String::new()),
    };
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{}",
        r.iterations,
        r.lbm_steps,
        fmt_f64(r.condition),
        fmt_f64(r.sigma_ratio),
        fmt_list(&r.summation.advection),
        fmt_f64(r.summation.diffusion),
        na,
        nd
    );
    Ok(vec![
        write(dir, "coefficients.txt", &r.coeffs.to_text())?,
        write(dir, "train.csv", &csv)?,
    ])
}

pub fn write_lift_bench(dir: &Path, cfg: &ExperimentConfig, error: f64) -> Result<PathBuf> {
    let order = match cfg.lifter {
        LifterKind::Analytic => cfg.order.to_string(),
        LifterKind::Nce => cfg.nce_order.to_string(),
        _ => String::new(),
    };
    let m = match cfg.lifter {
        LifterKind::ConstrainedRuns | LifterKind::Nce => cfg.m.to_string(),
        _ => String::new(),
    };
    let params = cfg.params()?;
    let body = format!(
        "lifter,set,omega,dx,dt,n,advection,order,m,error\n{},{},{},{},{},{},{},{},{},{}\n",
        cfg.lifter.name(),
        cfg.set,
        fmt_f64(cfg.omega),
        fmt_f64(cfg.dx),
        fmt_f64(cfg.dt),
        cfg.n,
        fmt_list(&params.advection),
        order,
        m,
        fmt_f64(error)
    );
    write(dir, "lift_bench.csv", &body)
}

pub fn write_hybrid(dir: &Path, e: &ErrorSeries, fields: bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut s = String::from("step,max_error,l2_error\n");
    for (k, (mx, l2)) in e.max.iter().zip(&e.l2).enumerate() {
        let _ = writeln!(s, "{},{},{}", k + 1, fmt_f64(*mx), fmt_f64(*l2));
    }
    out.push(write(dir, "hybrid_summary.csv", &s)?);
    if fields {
        let ny = e.shape.ny;
        let mut s = String::from("step,x,y,abs_error\n");
        for (k, field) in e.fields.iter().enumerate() {
            for (i, v) in field.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{}", k + 1, i / ny, i % ny, fmt_f64(*v));
            }
        }
        out.push(write(dir, "hybrid_errors.csv", &s)?);
    }
    Ok(out)
}

pub fn write_cost(dir: &Path, cfg: &ExperimentConfig, c: &StepCounter) -> Result<PathBuf> {
    let ghosts = if cfg.set == SetId::D1Q3 { 2 } else { 2 * cfg.n };
    let body = format!(
        "lifter,m,steps,ghost_points,lbm_steps_training,lbm_steps_init,lbm_steps_lifting,lifts_performed,lift_iterations,lbm_steps_per_lift,total\n{},{},{},{},{},{},{},{},{},{},{}\n",
        cfg.lifter.name(),
        cfg.m,
        cfg.steps,
        ghosts,
        c.lbm_steps_training,
        c.lbm_steps_init,
        c.lbm_steps_lifting,
        c.lifts_performed,
        c.lift_iterations,
        fmt_f64(c.lbm_steps_per_lift()),
        c.total()
    );
    write(dir, "cost.csv", &body)
}
