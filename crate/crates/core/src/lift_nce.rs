//! Numerical Chapman-Enskog expansion.
//!
//! The coefficient vectors of `f = f_eq + sum_k c_k D_k rho` are found as the
//! fixed point of a constrained run carried out in coefficient space: lift a
//! polynomial test density with the current coefficients, take `m + 1` lattice
//! Boltzmann steps, extrapolate the non-rest populations back to `t = 0`, pin
//! the rest population to the test density and refit the coefficients at a few
//! probe nodes. Trained coefficients apply to any density on any grid with the
//! same `(omega, dx, dt, velocity set, a)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{run_periodic, DensityField, DistributionField, LbmParams, Shape};
use crate::lift_analytic::{Fingerprint, LiftCoefficients, Term};
use crate::lift_cr::extrapolation_weights;
use crate::linalg::{least_squares, lu_solve_vec, null_vector};
use crate::macro_pde::MacroPde;
use crate::stencil::{fd_point, terms_up_to, DerivSpec};

/// Polynomial test profile `P(s)`; 2D training uses `P(x cos t + y sin t)`
/// along `R + 1` directions `t = k pi / (R + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum TestDensity {
    /// `sum_{k=1}^{R} s^k / k!`.
    Standard,
    /// Coefficients `c_0, c_1, ...` of `sum_k c_k s^k`.
    Polynomial(Vec<f64>),
}

impl TestDensity {
    fn coefficients(&self, order: usize) -> Vec<f64> {
        match self {
            TestDensity::Standard => {
                let mut c = vec![0.0; order + 1];
                let mut fact = 1.0;
                for (k, ck) in c.iter_mut().enumerate().skip(1) {
                    fact *= k as f64;
                    *ck = 1.0 / fact;
                }
                c
            }
            TestDensity::Polynomial(c) => c.clone(),
        }
    }
}

fn poly(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * s + ck)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NceTrainConfig {
    /// Highest spatial derivative order `R` in the expansion (1 to 6).
    pub spatial_order: usize,
    /// Smoothness order of the backward extrapolation (0 to 3).
    pub m: usize,
    /// Cells of the test domain per axis; its length is `test_cells * dx`.
    pub test_cells: usize,
    /// Probe indices along x inside the test domain; evenly spaced when `None`.
    pub probes: Option<Vec<usize>>,
    /// Relative tolerance: stop once `|da| <= newton_tol * |a|`.
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// Finite-difference step, scaled by `max(1, |a_k|)`.
    pub jacobian_eps: f64,
    pub test_density: TestDensity,
    /// Largest accepted condition number of the probe system.
    pub max_condition: f64,
}

impl NceTrainConfig {
    pub fn new(spatial_order: usize, m: usize) -> Self {
        NceTrainConfig {
            spatial_order,
            m,
            test_cells: 60,
            probes: None,
            newton_tol: 1e-10,
            max_newton_iter: 20,
            jacobian_eps: 1e-8,
            test_density: TestDensity::Standard,
            max_condition: 1e12,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(1..=6).contains(&self.spatial_order) {
            return Err(Error::UnsupportedOrder(self.spatial_order));
        }
        if self.m > 3 {
            return Err(Error::UnsupportedOrder(self.m));
        }
        if !(self.newton_tol > 0.0) || self.max_newton_iter == 0 || !(self.jacobian_eps > 0.0) {
            return Err(Error::InvalidParams(
                "NCE needs positive tolerances and at least one iteration".into(),
            ));
        }
        let n_terms = terms_up_to(dim, self.spatial_order).len();
        if let Some(p) = &self.probes {
            let rows = if dim == 1 {
                p.len()
            } else {
                p.len() * 2 * (self.spatial_order + 1)
            };
            if rows < n_terms {
                return Err(Error::InvalidParams(format!(
                    "{rows} probe rows for {n_terms} unknown vectors"
                )));
            }
            if p.iter().any(|&j| j >= self.test_cells) {
                return Err(Error::InvalidParams("probe outside the test domain".into()));
            }
        }
        let c = self.test_density.coefficients(self.spatial_order);
        let degree = c.iter().rposition(|v| *v != 0.0);
        if degree.map_or(true, |d| d < self.spatial_order) {
            return Err(Error::DegenerateDensity(format!(
                "test density needs degree >= {} so that every derivative column is nonzero",
                self.spatial_order
            )));
        }
        Ok(())
    }

    fn buffer(&self) -> usize {
        self.m + 3
    }
}

fn even_probes(n: usize, k: usize) -> Vec<usize> {
    (0..k)
        .map(|j| ((n * (j + 1)) as f64 / (k + 1) as f64).round() as usize)
        .collect()
}

/// One buffered test grid with its density, derivative columns and probes.
struct TestGrid {
    rho: DensityField,
    /// `ders[t][node]`.
    ders: Vec<Vec<f64>>,
    probes: Vec<usize>,
}

/// The fixed data of a training run.
struct TestProblem {
    params: LbmParams,
    terms: Vec<DerivSpec>,
    grids: Vec<TestGrid>,
    m: usize,
}

impl TestProblem {
    fn build(cfg: &NceTrainConfig, params: &LbmParams, probes_x: Vec<usize>) -> Self {
        let dim = params.dim();
        let terms = terms_up_to(dim, cfg.spatial_order);
        let c = cfg.test_density.coefficients(cfg.spatial_order);
        let buf = cfg.buffer();
        let n = cfg.test_cells + 2 * buf;
        let dx = params.dx;
        let dirs: Vec<(f64, f64)> = if dim == 1 {
            vec![(1.0, 0.0)]
        } else {
            let k = cfg.spatial_order + 1;
            (0..k)
                .map(|j| {
                    let t = std::f64::consts::PI * j as f64 / k as f64;
                    (t.cos(), t.sin())
                })
                .collect()
        };
        let shape = if dim == 1 {
            Shape::d1(n)
        } else {
            Shape::d2(n, n)
        };
        let probes_y: Vec<usize> = if dim == 1 {
            vec![0]
        } else {
            even_probes(cfg.test_cells, 2)
                .iter()
                .map(|p| p + buf)
                .collect()
        };
        let mut probes = Vec::new();
        for px in &probes_x {
            for py in &probes_y {
                probes.push(shape.idx(px + buf, *py));
            }
        }
        let grids = dirs
            .iter()
            .map(|&(cx, cy)| {
                let at = |x: f64, y: f64| poly(&c, x * cx + y * cy);
                let coord = |j: usize| (j as f64 - buf as f64) * dx;
                let mut rho = vec![0.0; shape.len()];
                let mut ders = vec![vec![0.0; shape.len()]; terms.len()];
                for i in 0..shape.nx {
                    for j in 0..shape.ny {
                        let (x, y) = (coord(i), if dim == 1 { 0.0 } else { coord(j) });
                        let k = shape.idx(i, j);
                        rho[k] = at(x, y);
                        for (t, d) in terms.iter().enumerate() {
                            ders[t][k] =
                                fd_point(*d, dx, |s, r| at(x + s as f64 * dx, y + r as f64 * dx));
                        }
                    }
                }
                TestGrid {
                    rho: DensityField { shape, values: rho },
                    ders,
                    probes: probes.clone(),
                }
            })
            .collect();
        TestProblem {
            params: params.clone(),
            terms,
            grids,
            m: cfg.m,
        }
    }

    fn rows(&self) -> usize {
        self.grids.iter().map(|g| g.probes.len()).sum()
    }

    /// Derivative values at the probes, one row per probe.
    fn design(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows(), self.terms.len());
        let mut r = 0;
        for g in &self.grids {
            for &p in &g.probes {
                for t in 0..self.terms.len() {
                    a[(r, t)] = g.ders[t][p];
                }
                r += 1;
            }
        }
        a
    }

    fn lift(&self, g: &TestGrid, u: &[f64]) -> DistributionField {
        let q = self.params.q();
        let kappa = self.params.equilibrium_factors();
        let mut f = DistributionField::zeros(g.rho.shape, q);
        for i in 0..q {
            let pop = f.pop_mut(i);
            for (k, v) in pop.iter_mut().enumerate() {
                *v = kappa[i] * g.rho.values[k];
            }
            for (t, d) in g.ders.iter().enumerate() {
                let c = u[t * q + i];
                if c != 0.0 {
                    for (v, dv) in pop.iter_mut().zip(d) {
                        *v += c * dv;
                    }
                }
            }
        }
        f
    }

    /// Non-equilibrium part at the probes after the constrained run, `rows x q`.
    fn constrained_rhs(&self, u: &[f64]) -> DMatrix<f64> {
        let q = self.params.q();
        let rest = self.params.velocity_set.rest_index();
        let kappa = self.params.equilibrium_factors();
        let w = extrapolation_weights(self.m);
        let mut b = DMatrix::zeros(self.rows(), q);
        let mut r0 = 0;
        for g in &self.grids {
            let mut f = self.lift(g, u);
            let mut ext = vec![0.0; g.probes.len() * q];
            for wj in &w {
                run_periodic(&mut f, &self.params, 1);
                for (pi, &p) in g.probes.iter().enumerate() {
                    for i in 0..q {
                        ext[pi * q + i] += wj * f.get(i, p);
                    }
                }
            }
            for (pi, &p) in g.probes.iter().enumerate() {
                let rho = g.rho.values[p];
                let node = &mut ext[pi * q..(pi + 1) * q];
                let others: f64 = (0..q).filter(|&i| i != rest).map(|i| node[i]).sum();
                node[rest] = rho - others;
                for i in 0..q {
                    b[(r0 + pi, i)] = node[i] - kappa[i] * rho;
                }
            }
            r0 += g.probes.len();
        }
        b
    }

    fn steps_per_map(&self) -> u64 {
        ((self.m + 1) * self.grids.len()) as u64
    }
}

/// Unknown-vector layout `u[t * q + i]` to coefficient terms.
fn to_coefficients(u: &[f64], terms: &[DerivSpec], params: &LbmParams) -> LiftCoefficients {
    let q = params.q();
    LiftCoefficients {
        fingerprint: Fingerprint::of(params),
        terms: terms
            .iter()
            .enumerate()
            .map(|(t, d)| (Term::Space(*d), u[t * q..(t + 1) * q].to_vec()))
            .collect(),
    }
}

fn from_coefficients(c: &LiftCoefficients, terms: &[DerivSpec], q: usize) -> Result<Vec<f64>> {
    let mut u = vec![0.0; terms.len() * q];
    for (t, d) in terms.iter().enumerate() {
        let v = c
            .get(Term::Space(*d))
            .ok_or_else(|| Error::InvalidParams(format!("coefficients lack term {d}")))?;
        u[t * q..(t + 1) * q].copy_from_slice(v);
    }
    Ok(u)
}

/// Reusable coefficient-space map for one configuration.
pub struct HMap {
    problem: TestProblem,
    /// Maps probe right-hand sides to coefficients.
    solve_op: DMatrix<f64>,
    condition: f64,
}

impl HMap {
    pub fn new(cfg: &NceTrainConfig, params: &LbmParams) -> Result<Self> {
        cfg.validate(params.dim())?;
        let n_terms = terms_up_to(params.dim(), cfg.spatial_order).len();
        let probes = match &cfg.probes {
            Some(p) => p.clone(),
            None if params.dim() == 1 => even_probes(cfg.test_cells, n_terms),
            None => even_probes(cfg.test_cells, cfg.spatial_order),
        };
        let problem = TestProblem::build(cfg, params, probes);
        let a = problem.design();
        let condition = crate::linalg::condition(&a);
        let eye = DMatrix::identity(a.nrows(), a.nrows());
        let solve_op = least_squares(&a, &eye, cfg.max_condition)?;
        Ok(HMap {
            problem,
            solve_op,
            condition,
        })
    }

    pub fn terms(&self) -> &[DerivSpec] {
        &self.problem.terms
    }

    /// Condition number of the probe system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// LBM steps spent by one application.
    pub fn steps_per_application(&self) -> u64 {
        self.problem.steps_per_map()
    }

    fn apply_raw(&self, u: &[f64]) -> Vec<f64> {
        let b = self.problem.constrained_rhs(u);
        let x = &self.solve_op * b;
        let q = self.problem.params.q();
        let mut out = vec![0.0; u.len()];
        for t in 0..self.problem.terms.len() {
            for i in 0..q {
                out[t * q + i] = x[(t, i)];
            }
        }
        out
    }

    pub fn apply(&self, coeffs: &LiftCoefficients) -> Result<LiftCoefficients> {
        coeffs.check_params(&self.problem.params)?;
        let u = from_coefficients(coeffs, &self.problem.terms, self.problem.params.q())?;
        Ok(to_coefficients(
            &self.apply_raw(&u),
            &self.problem.terms,
            &self.problem.params,
        ))
    }
}

/// One application of the coefficient-space map.
pub fn h_map(
    coeffs: &LiftCoefficients,
    cfg: &NceTrainConfig,
    params: &LbmParams,
) -> Result<LiftCoefficients> {
    HMap::new(cfg, params)?.apply(coeffs)
}

#[derive(Clone, Debug)]
pub struct NceTrained {
    pub coeffs: LiftCoefficients,
    pub iterations: usize,
    pub lbm_steps: u64,
    pub last_step: f64,
    /// Condition number of the probe system.
    pub condition: f64,
}

/// Relative step size below which a non-shrinking Newton step counts as stagnation.
const STAGNATION: f64 = 1e-7;

/// Newton iteration on `a - h(a) = 0` from `a = 0`.
pub fn train_coefficients(cfg: &NceTrainConfig, params: &LbmParams) -> Result<NceTrained> {
    let h = HMap::new(cfg, params)?;
    let per = h.steps_per_application();
    let n = h.problem.terms.len() * params.q();
    let mut u = vec![0.0; n];
    let mut steps = 0u64;
    let mut prev = f64::INFINITY;
    for it in 1..=cfg.max_newton_iter {
        let base = h.apply_raw(&u);
        steps += per;
        let mut jac = DMatrix::<f64>::identity(n, n);
        for k in 0..n {
            let eps = cfg.jacobian_eps * u[k].abs().max(1.0);
            let mut up = u.clone();
            up[k] += eps;
            let col = h.apply_raw(&up);
            steps += per;
            for i in 0..n {
                jac[(i, k)] -= (col[i] - base[i]) / eps;
            }
        }
        let r = DVector::from_iterator(n, u.iter().zip(&base).map(|(a, b)| b - a));
        let delta = lu_solve_vec(jac, &r)?;
        let step = delta.norm();
        let size = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        // The map is affine in the coefficients, so a step that fails to shrink
        // is rounding noise: keep the current iterate.
        if it > 1 && step >= prev && step <= STAGNATION * size {
            return Ok(NceTrained {
                coeffs: to_coefficients(&u, &h.problem.terms, params),
                iterations: it,
                lbm_steps: steps,
                last_step: step,
                condition: h.condition,
            });
        }
        for (a, d) in u.iter_mut().zip(delta.iter()) {
            *a += d;
        }
        let size = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step <= cfg.newton_tol * size {
            return Ok(NceTrained {
                coeffs: to_coefficients(&u, &h.problem.terms, params),
                iterations: it,
                lbm_steps: steps,
                last_step: step,
                condition: h.condition,
            });
        }
        if it == cfg.max_newton_iter {
            return Err(Error::NoConvergence {
                iterations: it,
                last_step: step,
            });
        }
        prev = step;
    }
    unreachable!("max_newton_iter >= 1 is validated")
}

/// The enlarged probe system including the time-derivative column.
#[derive(Clone, Debug)]
pub struct LinearLiftSystem {
    /// Columns: spatial terms in `terms` order, then `drho/dt`.
    pub matrix: DMatrix<f64>,
    /// Non-equilibrium populations at the probes, `rows x q`.
    pub rhs: DMatrix<f64>,
    pub terms: Vec<Term>,
    /// Singular values of `matrix`, decreasing.
    pub singular_values: Vec<f64>,
}

impl LinearLiftSystem {
    pub fn sigma_ratio(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(hi), Some(lo)) if *hi > 0.0 => lo / hi,
            _ => f64::NAN,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Augmented {
    /// Spatial coefficients re-solved with the time column, plus the `t` term.
    pub coeffs: LiftCoefficients,
    pub system: LinearLiftSystem,
    pub lbm_steps: u64,
}

/// Add a `drho/dt` column to the trained expansion.
///
/// Two more LBM steps give `drho/dt` at the probes by a three-point forward
/// difference. On polynomial test data the enlarged system is singular: the
/// time column is a combination of the spatial ones (the macroscopic PDE), so
/// the time coefficients are fixed to `gamma_i = -(dt / omega) kappa_i` and the
/// spatial coefficients are re-solved by least squares.
pub fn augment_time_derivative(
    coeffs: &LiftCoefficients,
    cfg: &NceTrainConfig,
    params: &LbmParams,
) -> Result<Augmented> {
    coeffs.check_params(params)?;
    cfg.validate(params.dim())?;
    let probes = match &cfg.probes {
        Some(p) => p.clone(),
        None => even_probes(cfg.test_cells, cfg.spatial_order + 1),
    };
    let problem = TestProblem::build(cfg, params, probes);
    let terms = problem.terms.clone();
    let q = params.q();
    let u = from_coefficients(&coeffs.spatial_part(), &terms, q)?;
    let rows = problem.rows();
    let nt = terms.len();
    let mut matrix = DMatrix::zeros(rows, nt + 1);
    let mut rhs = DMatrix::zeros(rows, q);
    let tw = crate::stencil::forward_weights(3, 1);
    let kappa = params.equilibrium_factors();
    let mut r0 = 0;
    let mut steps = 0u64;
    for g in &problem.grids {
        let mut f = problem.lift(g, &u);
        let f0 = f.clone();
        let mut dens = vec![vec![0.0; g.probes.len()]; 2];
        for snap in dens.iter_mut() {
            run_periodic(&mut f, params, 1);
            steps += 1;
            let rho = crate::lattice::restrict(&f);
            for (pi, &p) in g.probes.iter().enumerate() {
                snap[pi] = rho.values[p];
            }
        }
        for (pi, &p) in g.probes.iter().enumerate() {
            let r = g.rho.values[p];
            let rt = (tw[1] * (dens[0][pi] - r) + tw[2] * (dens[1][pi] - r)) / params.dt;
            for t in 0..nt {
                matrix[(r0 + pi, t)] = g.ders[t][p];
            }
            matrix[(r0 + pi, nt)] = rt;
            for i in 0..q {
                rhs[(r0 + pi, i)] = f0.get(i, p) - kappa[i] * r;
            }
        }
        r0 += g.probes.len();
    }
    let (_, singular_values) = null_vector(&matrix);
    if singular_values.first().map_or(true, |s| *s == 0.0) {
        return Err(Error::DegenerateDensity("all probe columns vanish".into()));
    }
    let gamma: Vec<f64> = kappa
        .iter()
        .map(|k| -params.dt / params.omega * k)
        .collect();
    let spatial = matrix.columns(0, nt).into_owned();
    let mut shifted = rhs.clone();
    for r in 0..rows {
        for i in 0..q {
            shifted[(r, i)] -= gamma[i] * matrix[(r, nt)];
        }
    }
    let x = least_squares(&spatial, &shifted, cfg.max_condition)?;
    let mut out = LiftCoefficients {
        fingerprint: Fingerprint::of(params),
        terms: Vec::new(),
    };
    for (t, d) in terms.iter().enumerate() {
        out.terms
            .push((Term::Space(*d), (0..q).map(|i| x[(t, i)]).collect()));
    }
    out.terms.push((Term::Time, gamma));
    let mut sys_terms: Vec<Term> = terms.iter().map(|d| Term::Space(*d)).collect();
    sys_terms.push(Term::Time);
    Ok(Augmented {
        coeffs: out,
        system: LinearLiftSystem {
            matrix,
            rhs,
            terms: sys_terms,
            singular_values,
        },
        lbm_steps: steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractMode {
    Summation,
    Nullspace,
}

/// Threshold on `sigma_min / sigma_max` for accepting a null vector.
pub const NULLSPACE_RATIO: f64 = 1e-8;

/// Read off `a` and `D` of `rho_t + a . grad rho = D lap rho`.
///
/// Summation: the spatial coefficients sum to `sum(alpha)` and `sum(beta)` and
/// the density constraint `sum_i f_i = rho` gives
/// `rho_t = -(sum alpha / sum gamma) rho_x - (sum beta / sum gamma) rho_xx`.
/// Nullspace: the null vector `n` of the enlarged system encodes
/// `sum_k n_k D_k rho + n_t rho_t = 0`.
pub fn extract_pde(
    coeffs: &LiftCoefficients,
    mode: ExtractMode,
    system: Option<&LinearLiftSystem>,
) -> Result<MacroPde> {
    let dim = coeffs.fingerprint.advection.len();
    let xx = DerivSpec::x(2);
    let firsts: Vec<DerivSpec> = (0..dim)
        .map(|k| {
            if k == 0 {
                DerivSpec::x(1)
            } else {
                DerivSpec::y(1)
            }
        })
        .collect();
    match mode {
        ExtractMode::Summation => {
            let gamma = coeffs
                .get(Term::Time)
                .ok_or_else(|| Error::InvalidParams("no time term".into()))?;
            let sg: f64 = gamma.iter().sum();
            if sg == 0.0 {
                return Err(Error::ZeroGammaSum);
            }
            let sum = |d: DerivSpec| -> Result<f64> {
                Ok(coeffs
                    .get(Term::Space(d))
                    .ok_or_else(|| Error::InvalidParams(format!("no {d} term")))?
                    .iter()
                    .sum())
            };
            let advection = firsts
                .iter()
                .map(|d| Ok(sum(*d)? / sg))
                .collect::<Result<Vec<_>>>()?;
            Ok(MacroPde {
                advection,
                diffusion: -sum(xx)? / sg,
            })
        }
        ExtractMode::Nullspace => {
            let sys = system.ok_or_else(|| {
                Error::Nullspace("nullspace mode needs the enlarged system".into())
            })?;
            let (v, s) = null_vector(&sys.matrix);
            let n = s.len();
            if n < 2 || !(s[n - 1] < NULLSPACE_RATIO * s[0]) {
                return Err(Error::Nullspace(format!(
                    "smallest singular value ratio {:e} is not below {NULLSPACE_RATIO:e}",
                    s[n - 1] / s[0]
                )));
            }
            if s[n - 2] < NULLSPACE_RATIO * s[0] {
                return Err(Error::Nullspace("nullspace has dimension above one".into()));
            }
            let pos = |t: Term| {
                sys.terms
                    .iter()
                    .position(|u| *u == t)
                    .ok_or_else(|| Error::Nullspace(format!("system lacks {t}")))
            };
            let nt = v[pos(Term::Time)?];
            let advection = firsts
                .iter()
                .map(|d| Ok(v[pos(Term::Space(*d))?] / nt))
                .collect::<Result<Vec<_>>>()?;
            Ok(MacroPde {
                advection,
                diffusion: -v[pos(Term::Space(xx))?] / nt,
            })
        }
    }
}
