//! Split-domain coupling of an FTCS solver and an LBM.
//!
//! Columns `0..=p` carry the macroscopic PDE, columns `p + 1..n` the LBM; the
//! domain is periodic, so each subdomain has two interfaces. Every step the PDE
//! ghosts are read off the restricted LBM density and the LBM ghost columns are
//! lifted from the concatenated density, then both sides advance from the same
//! time level.

use crate::error::{Error, Result};
use crate::lattice::{
    equilibrium, restrict, stream_collide, Boundary, DensityField, DistributionField, LbmParams,
    SetId, Shape,
};
use crate::lift_analytic::{apply_lift, lift_column, LiftCoefficients};
use crate::lift_cr::{cr_lift, CrConfig};
use crate::macro_pde::{ftcs_step, MacroPde, PdeBoundary};

/// LBM steps and solver iterations spent by one lift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LiftCost {
    pub lbm_steps: u64,
    pub iterations: u64,
}

/// How densities are turned into distributions.
#[derive(Clone, Debug)]
pub enum Lifter {
    /// `f = f_eq + sum_k c_k D_k rho`; an empty term list is the equilibrium lift.
    Coefficients(LiftCoefficients),
    /// Constrained runs on a periodic patch around each lifted node.
    ConstrainedRuns(CrConfig),
}

impl Lifter {
    pub fn equilibrium(params: &LbmParams) -> Self {
        Lifter::Coefficients(LiftCoefficients::empty(params))
    }

    /// Half-width of the patch a constrained-run ghost lift sees.
    pub fn patch_radius(cfg: &CrConfig) -> usize {
        4 + 3 * cfg.m
    }

    /// Lift a whole periodic field.
    pub fn lift_field(
        &self,
        rho: &DensityField,
        params: &LbmParams,
    ) -> Result<(DistributionField, LiftCost)> {
        match self {
            Lifter::Coefficients(c) if c.terms.is_empty() => {
                c.check_params(params)?;
                Ok((equilibrium(rho, params)?, LiftCost::default()))
            }
            Lifter::Coefficients(c) => Ok((apply_lift(rho, c, params)?, LiftCost::default())),
            Lifter::ConstrainedRuns(cfg) => {
                let out = cr_lift(rho, cfg, params)?;
                Ok((
                    out.f,
                    LiftCost {
                        lbm_steps: out.lbm_steps,
                        iterations: out.iterations as u64,
                    },
                ))
            }
        }
    }

    /// Lift column `x` of a periodic field into structure-of-arrays order.
    pub fn lift_column(
        &self,
        rho: &DensityField,
        params: &LbmParams,
        x: usize,
    ) -> Result<(Vec<f64>, LiftCost)> {
        match self {
            Lifter::Coefficients(c) => Ok((lift_column(rho, c, params, x)?, LiftCost::default())),
            Lifter::ConstrainedRuns(cfg) => {
                if rho.shape.dim() != 1 {
                    return Err(Error::UnsupportedSet {
                        required: "D1Q3",
                        got: params.velocity_set.id.name(),
                    });
                }
                let r = Self::patch_radius(cfg);
                let n = rho.shape.nx;
                let values = (0..2 * r + 1)
                    .map(|k| rho.values[(x + n * (r + 1) + k - r) % n])
                    .collect();
                let patch = DensityField::new(Shape::d1(2 * r + 1), values)?;
                let out = cr_lift(&patch, cfg, params)?;
                Ok((
                    out.f.node(r),
                    LiftCost {
                        lbm_steps: out.lbm_steps,
                        iterations: out.iterations as u64,
                    },
                ))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct HybridSpec {
    /// Split index `p`: the PDE owns columns `0..=p`.
    pub split: usize,
    pub params: LbmParams,
    pub pde: MacroPde,
    pub lifter: Lifter,
    /// Density over the full domain.
    pub initial: DensityField,
}

impl HybridSpec {
    pub fn n(&self) -> usize {
        self.initial.shape.nx
    }

    /// `p = floor(3n / 10)`.
    pub fn default_split(n: usize) -> usize {
        3 * n / 10
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.split < 1 || self.split + 3 > n {
            return Err(Error::InvalidParams(format!(
                "split index {} outside 1..={}",
                self.split,
                n.saturating_sub(3)
            )));
        }
        let dim = self.params.dim();
        if self.initial.shape.dim() != dim && !(dim == 2 && self.initial.shape.ny > 1) {
            return Err(Error::Shape(format!(
                "{dim}D model on a {}D field",
                self.initial.shape.dim()
            )));
        }
        if self.pde.advection.len() != dim {
            return Err(Error::Shape("PDE and LBM dimensions differ".into()));
        }
        if let Lifter::Coefficients(c) = &self.lifter {
            c.check_params(&self.params)?;
        }
        Ok(())
    }
}

/// Extra LBM steps spent on lifting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCounter {
    pub lbm_steps_training: u64,
    /// Steps spent lifting the initial condition.
    pub lbm_steps_init: u64,
    /// Steps spent lifting ghost columns.
    pub lbm_steps_lifting: u64,
    pub lifts_performed: u64,
    /// Solver iterations summed over ghost lifts.
    pub lift_iterations: u64,
}

impl StepCounter {
    pub fn lbm_steps_per_lift(&self) -> f64 {
        if self.lifts_performed == 0 {
            0.0
        } else {
            self.lbm_steps_lifting as f64 / self.lifts_performed as f64
        }
    }

    pub fn total(&self) -> u64 {
        self.lbm_steps_training + self.lbm_steps_init + self.lbm_steps_lifting
    }
}

#[derive(Clone, Debug)]
pub struct HybridState {
    pub rho_pde: DensityField,
    pub f_lbm: DistributionField,
    pub t: usize,
    pub counter: StepCounter,
}

impl HybridState {
    /// PDE density followed by the restricted LBM density.
    pub fn density(&self) -> DensityField {
        let ny = self.rho_pde.shape.ny;
        let lbm = restrict(&self.f_lbm);
        let mut values = self.rho_pde.values.clone();
        values.extend_from_slice(&lbm.values);
        let nx = self.rho_pde.shape.nx + lbm.shape.nx;
        DensityField {
            shape: Shape { nx, ny },
            values,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.rho_pde.total() + self.f_lbm.total_mass()
    }
}

fn columns(rho: &DensityField, from: usize, to: usize) -> DensityField {
    let ny = rho.shape.ny;
    DensityField {
        shape: Shape { nx: to - from, ny },
        values: rho.values[from * ny..to * ny].to_vec(),
    }
}

fn lbm_columns(f: &DistributionField, from: usize, to: usize) -> DistributionField {
    let ny = f.shape.ny;
    let mut out = DistributionField::zeros(Shape { nx: to - from, ny }, f.q);
    for i in 0..f.q {
        out.pop_mut(i)
            .copy_from_slice(&f.pop(i)[from * ny..to * ny]);
    }
    out
}

pub fn init_hybrid(spec: &HybridSpec) -> Result<HybridState> {
    spec.validate()?;
    let (n, p) = (spec.n(), spec.split);
    let (f, steps) = spec.lifter.lift_field(&spec.initial, &spec.params)?;
    Ok(HybridState {
        rho_pde: columns(&spec.initial, 0, p + 1),
        f_lbm: lbm_columns(&f, p + 1, n),
        t: 0,
        counter: StepCounter {
            lbm_steps_init: steps.lbm_steps,
            ..StepCounter::default()
        },
    })
}

/// Advance both subdomains by one time step.
pub fn hybrid_step(state: &HybridState, spec: &HybridSpec) -> Result<HybridState> {
    let (n, p) = (spec.n(), spec.split);
    let full = state.density();
    let ny = full.shape.ny;
    let col = |x: usize| full.values[x * ny..(x + 1) * ny].to_vec();
    let (pde_left, pde_right) = (col(n - 1), col(p + 1));
    let (lift_l, sl) = spec.lifter.lift_column(&full, &spec.params, p)?;
    let (lift_r, sr) = spec.lifter.lift_column(&full, &spec.params, 0)?;
    let rho_pde = ftcs_step(
        &state.rho_pde,
        &spec.pde,
        spec.params.dx,
        spec.params.dt,
        PdeBoundary::GhostFed {
            left: &pde_left,
            right: &pde_right,
        },
    )?;
    let f_lbm = stream_collide(
        &state.f_lbm,
        &spec.params,
        Boundary::GhostFed {
            left: &lift_l,
            right: &lift_r,
        },
    )?;
    let mut counter = state.counter;
    counter.lbm_steps_lifting += sl.lbm_steps + sr.lbm_steps;
    counter.lift_iterations += sl.iterations + sr.iterations;
    counter.lifts_performed += 2 * ny as u64;
    Ok(HybridState {
        rho_pde,
        f_lbm,
        t: state.t + 1,
        counter,
    })
}

/// Per-step discrepancy between a hybrid run and the full LBM.
#[derive(Clone, Debug)]
pub struct ErrorSeries {
    pub shape: Shape,
    /// `|rho_hybrid - rho_lbm|` after each step.
    pub fields: Vec<Vec<f64>>,
    pub max: Vec<f64>,
    pub l2: Vec<f64>,
    pub counter: StepCounter,
    pub final_mass_drift: f64,
}

impl ErrorSeries {
    pub fn final_max(&self) -> f64 {
        self.max.last().copied().unwrap_or(0.0)
    }
}

/// Run the hybrid model next to a full periodic LBM started from the same lift.
pub fn compare_to_reference(spec: &HybridSpec, steps: usize) -> Result<ErrorSeries> {
    if steps == 0 {
        return Err(Error::InvalidParams("need at least one step".into()));
    }
    let mut state = init_hybrid(spec)?;
    let (mut f_ref, _) = spec.lifter.lift_field(&spec.initial, &spec.params)?;
    let mass0 = state.total_mass();
    let mut out = ErrorSeries {
        shape: spec.initial.shape,
        fields: Vec::with_capacity(steps),
        max: Vec::with_capacity(steps),
        l2: Vec::with_capacity(steps),
        counter: state.counter,
        final_mass_drift: 0.0,
    };
    for _ in 0..steps {
        state = hybrid_step(&state, spec)?;
        crate::lattice::run_periodic(&mut f_ref, &spec.params, 1);
        let h = state.density();
        let r = restrict(&f_ref);
        let e: Vec<f64> = h
            .values
            .iter()
            .zip(&r.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        out.max.push(e.iter().copied().fold(0.0, f64::max));
        out.l2.push(e.iter().map(|v| v * v).sum::<f64>().sqrt());
        out.fields.push(e);
    }
    out.counter = state.counter;
    out.final_mass_drift = (state.total_mass() - mass0) / mass0;
    Ok(out)
}

/// The Gaussian `exp(-|x - L/2|^2)` on an `n`-cell periodic grid of side `L = n dx`.
pub fn centred_gaussian(set: SetId, n: usize, dx: f64) -> DensityField {
    let c = n as f64 * dx / 2.0;
    match set {
        SetId::D1Q3 => DensityField::from_fn_1d(n, dx, |x| (-(x - c) * (x - c)).exp()),
        _ => DensityField::from_fn_2d(n, n, dx, |x, y| {
            (-((x - c) * (x - c) + (y - c) * (y - c))).exp()
        }),
    }
}
