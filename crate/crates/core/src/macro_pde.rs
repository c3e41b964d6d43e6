//! Macroscopic advection-diffusion model and its explicit FTCS solver.

use crate::error::{Error, Result};
use crate::lattice::{DensityField, LbmParams};

/// `rho_t + a . grad(rho) = D lap(rho)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroPde {
    pub advection: Vec<f64>,
    pub diffusion: f64,
}

impl MacroPde {
    /// Diffusion number `D dt / dx^2`.
    pub fn diffusion_number(&self, dx: f64, dt: f64) -> f64 {
        self.diffusion * dt / (dx * dx)
    }
}

/// Macroscopic limit of the BGK model: `D = c_s^2 (1/omega - 1/2) dt`.
pub fn analytic_pde(params: &LbmParams) -> MacroPde {
    let f = params.velocity_set.sound_speed_sq_factor;
    let w = params.omega;
    MacroPde {
        advection: params.advection.clone(),
        diffusion: f * (2.0 - w) / (2.0 * w) * params.dx * params.dx / params.dt,
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PdeBoundary<'a> {
    Periodic,
    /// Ghost densities at `x = -1` and `x = nx`, one per y-row; y stays periodic.
    GhostFed {
        left: &'a [f64],
        right: &'a [f64],
    },
}

fn warn_unstable(pde: &MacroPde, dx: f64, dt: f64) {
    let nu = pde.diffusion_number(dx, dt);
    let dim = pde.advection.len().max(1) as f64;
    if nu * dim > 0.5 {
        log::warn!("FTCS diffusion number {nu} exceeds the stability bound");
    }
    for a in &pde.advection {
        if a.abs() * dt / dx > 1.0 {
            log::warn!("FTCS Courant number {} exceeds 1", a.abs() * dt / dx);
        }
    }
}

/// One forward-Euler step with central differences.
pub fn ftcs_step(
    rho: &DensityField,
    pde: &MacroPde,
    dx: f64,
    dt: f64,
    boundary: PdeBoundary<'_>,
) -> Result<DensityField> {
    let sh = rho.shape;
    let dim = sh.dim();
    if pde.advection.len() != dim {
        return Err(Error::Shape(format!(
            "PDE advection has {} components for a {dim}D field",
            pde.advection.len()
        )));
    }
    warn_unstable(pde, dx, dt);
    let (nx, ny) = (sh.nx, sh.ny);
    let (left, right) = match boundary {
        PdeBoundary::Periodic => (None, None),
        PdeBoundary::GhostFed { left, right } => {
            if left.len() != ny || right.len() != ny {
                return Err(Error::MissingGhosts {
                    expected: ny,
                    got: left.len().min(right.len()),
                });
            }
            (Some(left), Some(right))
        }
    };
    let v = &rho.values;
    let at_x = |x: isize, y: usize| -> f64 {
        if x < 0 {
            match left {
                Some(g) => g[y],
                None => v[sh.idx(nx - 1, y)],
            }
        } else if x as usize >= nx {
            match right {
                Some(g) => g[y],
                None => v[sh.idx(0, y)],
            }
        } else {
            v[sh.idx(x as usize, y)]
        }
    };
    let nu = pde.diffusion_number(dx, dt);
    let cx = pde.advection[0] * dt / (2.0 * dx);
    let cy = if dim == 2 {
        pde.advection[1] * dt / (2.0 * dx)
    } else {
        0.0
    };
    let mut out = vec![0.0; sh.len()];
    for x in 0..nx {
        for y in 0..ny {
            let c = v[sh.idx(x, y)];
            let (w, e) = (at_x(x as isize - 1, y), at_x(x as isize + 1, y));
            let mut lap = (w - c) + (e - c);
            let mut adv = cx * (e - w);
            if dim == 2 {
                let s = v[sh.idx(x, (y + ny - 1) % ny)];
                let n = v[sh.idx(x, (y + 1) % ny)];
                lap += (s - c) + (n - c);
                adv += cy * (n - s);
            }
            out[sh.idx(x, y)] = c + (nu * lap - adv);
        }
    }
    Ok(DensityField {
        shape: sh,
        values: out,
    })
}
