//! Constrained Runs lifting for D1Q3.
//!
//! The missing moments `v = (phi, xi)` are the fixed point of the map that
//! assembles `f` from `(rho0, v)`, runs `m + 1` lattice Boltzmann steps and
//! extrapolates the moment history back to `t = 0` with the order-`m`
//! backward formula `v' = sum_{j=1}^{m+1} (-1)^{j+1} C(m+1, j) v(j dt)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{
    equilibrium, from_moments, moments, run_periodic, DensityField, DistributionField, LbmParams,
    MomentField, SetId,
};
use crate::linalg::lu_solve_vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrSolver {
    /// Picard for `m = 0`, Newton otherwise.
    Auto,
    Picard,
    Newton,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrConfig {
    /// Extrapolation order: 0 constant, 1 linear, 2 quadratic, 3 cubic.
    pub m: usize,
    /// Absolute tolerance on the 2-norm of the moment increment.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step, scaled by `max(1, |v|_inf)`.
    pub jacobian_eps: f64,
    /// Jacobian half-bandwidth in cells; `None` builds the dense Jacobian column by column.
    pub locality: Option<usize>,
    pub solver: CrSolver,
}

impl CrConfig {
    pub fn new(m: usize) -> Self {
        CrConfig {
            m,
            tol: 1e-13,
            max_iter: 100,
            jacobian_eps: 1e-7,
            locality: None,
            solver: CrSolver::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m > 3 {
            return Err(Error::UnsupportedOrder(self.m));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.jacobian_eps > 0.0) {
            return Err(Error::InvalidParams(
                "CR needs tol > 0, max_iter >= 1 and jacobian_eps > 0".into(),
            ));
        }
        Ok(())
    }

    fn uses_newton(&self) -> bool {
        match self.solver {
            CrSolver::Auto => self.m > 0,
            CrSolver::Picard => false,
            CrSolver::Newton => true,
        }
    }
}

/// Momentum and energy moments, the unknowns of a constrained run.
#[derive(Clone, Debug, PartialEq)]
pub struct MissingMoments {
    pub phi: Vec<f64>,
    pub xi: Vec<f64>,
}

impl MissingMoments {
    fn to_vec(&self) -> DVector<f64> {
        DVector::from_iterator(self.phi.len() * 2, self.phi.iter().chain(&self.xi).copied())
    }

    fn from_slice(u: &[f64]) -> Self {
        let n = u.len() / 2;
        MissingMoments {
            phi: u[..n].to_vec(),
            xi: u[n..].to_vec(),
        }
    }
}

/// Signed binomial weights `(-1)^{j+1} C(m+1, j)`, `j = 1..=m+1`.
pub fn extrapolation_weights(m: usize) -> Vec<f64> {
    let n = m + 1;
    let mut c = 1.0;
    (1..=n)
        .map(|j| {
            c = c * (n + 1 - j) as f64 / j as f64;
            if j % 2 == 1 {
                c
            } else {
                -c
            }
        })
        .collect()
}

fn check(rho0: &DensityField, params: &LbmParams) -> Result<()> {
    if params.velocity_set.id != SetId::D1Q3 {
        return Err(Error::UnsupportedSet {
            required: "D1Q3",
            got: params.velocity_set.id.name(),
        });
    }
    if rho0.shape.ny != 1 {
        return Err(Error::Shape("constrained runs need a 1D grid".into()));
    }
    Ok(())
}

fn assemble(
    rho0: &DensityField,
    phi: &[f64],
    xi: &[f64],
    params: &LbmParams,
) -> Result<DistributionField> {
    let m = MomentField {
        rho: rho0.clone(),
        phi: phi.to_vec(),
        xi: xi.to_vec(),
    };
    from_moments(&m, &params.velocity_set)
}

fn map_raw(rho0: &DensityField, u: &[f64], m: usize, params: &LbmParams) -> Result<Vec<f64>> {
    let n = rho0.shape.len();
    let mut f = assemble(rho0, &u[..n], &u[n..], params)?;
    let w = extrapolation_weights(m);
    let mut out = vec![0.0; 2 * n];
    for wj in &w {
        run_periodic(&mut f, params, 1);
        let mo = moments(&f, &params.velocity_set)?;
        for k in 0..n {
            out[k] += wj * mo.phi[k];
            out[n + k] += wj * mo.xi[k];
        }
    }
    Ok(out)
}

/// One application of the constrained-run map; costs `m + 1` LBM steps.
pub fn cr_map(
    rho0: &DensityField,
    v: &MissingMoments,
    cfg: &CrConfig,
    params: &LbmParams,
) -> Result<MissingMoments> {
    check(rho0, params)?;
    cfg.validate()?;
    if v.phi.len() != rho0.shape.len() || v.xi.len() != rho0.shape.len() {
        return Err(Error::Shape(
            "moment vectors do not match the density".into(),
        ));
    }
    let u = v.to_vec();
    Ok(MissingMoments::from_slice(&map_raw(
        rho0,
        u.as_slice(),
        cfg.m,
        params,
    )?))
}

/// Equilibrium moments of `rho0`, the initial guess of [`cr_lift`].
pub fn equilibrium_moments(rho0: &DensityField, params: &LbmParams) -> Result<MissingMoments> {
    let mo = moments(&equilibrium(rho0, params)?, &params.velocity_set)?;
    Ok(MissingMoments {
        phi: mo.phi,
        xi: mo.xi,
    })
}

#[derive(Clone, Debug)]
pub struct CrLift {
    pub f: DistributionField,
    pub moments: MissingMoments,
    pub iterations: usize,
    pub lbm_steps: u64,
    pub converged: bool,
    /// Norm of the last moment increment.
    pub last_step: f64,
}

/// Colour classes for a banded Jacobian on a periodic grid: nodes sharing a
/// colour are more than `2h` cells apart.
fn colours(n: usize, h: usize) -> Vec<Vec<usize>> {
    let g = 2 * h + 1;
    let blocks = n / g;
    if blocks < 2 {
        return (0..n).map(|j| vec![j]).collect();
    }
    let mut out: Vec<Vec<usize>> = (0..g)
        .map(|c| (0..blocks).map(|b| b * g + c).collect())
        .collect();
    out.extend((blocks * g..n).map(|j| vec![j]));
    out
}

fn periodic_dist(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Fixed point of [`cr_map`] from the equilibrium moments.
pub fn cr_lift(rho0: &DensityField, cfg: &CrConfig, params: &LbmParams) -> Result<CrLift> {
    check(rho0, params)?;
    cfg.validate()?;
    let n = rho0.shape.len();
    let per_map = (cfg.m + 1) as u64;
    let mut u = equilibrium_moments(rho0, params)?.to_vec();
    let mut steps = 0u64;
    let mut last = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let base = DVector::from_vec(map_raw(rho0, u.as_slice(), cfg.m, params)?);
        steps += per_map;
        let delta = if cfg.uses_newton() {
            let dim = 2 * n;
            let h = cfg.jacobian_eps * u.amax().max(1.0);
            // A = I - dC/du.
            let mut a = DMatrix::<f64>::identity(dim, dim);
            match cfg.locality {
                None => {
                    for k in 0..dim {
                        let mut up = u.clone();
                        up[k] += h;
                        let col = map_raw(rho0, up.as_slice(), cfg.m, params)?;
                        steps += per_map;
                        for i in 0..dim {
                            a[(i, k)] -= (col[i] - base[i]) / h;
                        }
                    }
                }
                Some(bw) => {
                    for group in colours(n, bw) {
                        for comp in 0..2 {
                            let mut up = u.clone();
                            for &j in &group {
                                up[comp * n + j] += h;
                            }
                            let col = map_raw(rho0, up.as_slice(), cfg.m, params)?;
                            steps += per_map;
                            for i in 0..dim {
                                let node = i % n;
                                if let Some(&j) =
                                    group.iter().find(|&&j| periodic_dist(j, node, n) <= bw)
                                {
                                    a[(i, comp * n + j)] -= (col[i] - base[i]) / h;
                                }
                            }
                        }
                    }
                }
            }
            let r = &u - &base;
            lu_solve_vec(a, &(-r))?
        } else {
            &base - &u
        };
        u += &delta;
        last = delta.norm();
        if last <= cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("constrained runs stopped after {iterations} iterations, last step {last:e}");
    }
    let mm = MissingMoments::from_slice(u.as_slice());
    let f = assemble(rho0, &mm.phi, &mm.xi, params)?;
    Ok(CrLift {
        f,
        moments: mm,
        iterations,
        lbm_steps: steps,
        converged,
        last_step: last,
    })
}
