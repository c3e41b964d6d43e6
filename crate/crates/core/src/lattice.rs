//! Velocity sets, BGK stream-collide stepping and the D1Q3 moment transform.
//!
//! Distribution fields are stored as structure-of-arrays: population `i`
//! occupies one contiguous slice of `nx * ny` values, indexed `x * ny + y`.
//! One-dimensional grids use `ny = 1`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SetId {
    D1Q3,
    D2Q5,
    D2Q9,
}

impl SetId {
    pub fn name(self) -> &'static str {
        match self {
            SetId::D1Q3 => "D1Q3",
            SetId::D2Q5 => "D2Q5",
            SetId::D2Q9 => "D2Q9",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "D1Q3" => Ok(SetId::D1Q3),
            "D2Q5" => Ok(SetId::D2Q5),
            "D2Q9" => Ok(SetId::D2Q9),
            other => Err(Error::Parse(format!("unknown velocity set `{other}`"))),
        }
    }

    pub fn velocity_set(self) -> VelocitySet {
        match self {
            SetId::D1Q3 => VelocitySet::d1q3(),
            SetId::D2Q5 => VelocitySet::d2q5(),
            SetId::D2Q9 => VelocitySet::d2q9(),
        }
    }
}

impl std::fmt::Display for SetId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Discrete velocities, weights and the squared sound speed of a DdQq model.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocitySet {
    pub id: SetId,
    pub dim: usize,
    /// Lattice vectors; the second component is zero in 1D.
    pub directions: Vec<[i32; 2]>,
    pub weights: Vec<f64>,
    /// `c_s^2 / (dx/dt)^2`.
    pub sound_speed_sq_factor: f64,
}

impl VelocitySet {
    /// Directions ordered `+1, 0, -1`, matching the columns of the moment matrix.
    pub fn d1q3() -> Self {
        VelocitySet {
            id: SetId::D1Q3,
            dim: 1,
            directions: vec![[1, 0], [0, 0], [-1, 0]],
            weights: vec![1.0 / 3.0; 3],
            sound_speed_sq_factor: 2.0 / 3.0,
        }
    }

    pub fn d2q5() -> Self {
        VelocitySet {
            id: SetId::D2Q5,
            dim: 2,
            directions: vec![[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]],
            weights: vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0],
            sound_speed_sq_factor: 1.0 / 3.0,
        }
    }

    pub fn d2q9() -> Self {
        let (a, b, c) = (4.0 / 9.0, 1.0 / 9.0, 1.0 / 36.0);
        VelocitySet {
            id: SetId::D2Q9,
            dim: 2,
            directions: vec![
                [0, 0],
                [1, 0],
                [0, 1],
                [-1, 0],
                [0, -1],
                [1, 1],
                [-1, 1],
                [-1, -1],
                [1, -1],
            ],
            weights: vec![a, b, b, b, b, c, c, c, c],
            sound_speed_sq_factor: 1.0 / 3.0,
        }
    }

    pub fn q(&self) -> usize {
        self.directions.len()
    }

    /// Index of the zero velocity.
    pub fn rest_index(&self) -> usize {
        self.directions
            .iter()
            .position(|c| *c == [0, 0])
            .expect("every supported set has a rest velocity")
    }

    pub fn check(&self) -> Result<()> {
        if self.weights.len() != self.directions.len() {
            return Err(Error::InvalidParams(format!(
                "{} weights for {} directions",
                self.weights.len(),
                self.directions.len()
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParams(format!("weights sum to {sum}")));
        }
        for axis in 0..2 {
            let m: f64 = self
                .weights
                .iter()
                .zip(&self.directions)
                .map(|(w, c)| w * c[axis] as f64)
                .sum();
            if m.abs() > 1e-14 {
                return Err(Error::InvalidParams(format!(
                    "first weight moment {m} along axis {axis}"
                )));
            }
        }
        for (i, a) in self.directions.iter().enumerate() {
            if self.directions[..i].contains(a) {
                return Err(Error::InvalidParams(format!("duplicate direction {a:?}")));
            }
            if self.dim == 1 && a[1] != 0 {
                return Err(Error::InvalidParams("1D set with a y component".into()));
            }
        }
        Ok(())
    }
}

/// Model parameters of one BGK lattice Boltzmann run.
#[derive(Clone, Debug, PartialEq)]
pub struct LbmParams {
    pub velocity_set: VelocitySet,
    pub dx: f64,
    pub dt: f64,
    pub omega: f64,
    /// Uniform advection velocity, one entry per dimension.
    pub advection: Vec<f64>,
}

impl LbmParams {
    pub fn new(
        velocity_set: VelocitySet,
        dx: f64,
        dt: f64,
        omega: f64,
        advection: Vec<f64>,
    ) -> Result<Self> {
        velocity_set.check()?;
        if !(dx > 0.0 && dx.is_finite()) || !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "dx = {dx}, dt = {dt} must be positive"
            )));
        }
        if !(0.0..=2.0).contains(&omega) {
            return Err(Error::InvalidParams(format!(
                "omega = {omega} outside [0, 2]"
            )));
        }
        if advection.len() != velocity_set.dim || advection.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "advection needs {} finite entries, got {:?}",
                velocity_set.dim, advection
            )));
        }
        Ok(LbmParams {
            velocity_set,
            dx,
            dt,
            omega,
            advection,
        })
    }

    /// Pure diffusion with the given set.
    pub fn diffusive(set: SetId, dx: f64, dt: f64, omega: f64) -> Result<Self> {
        let vs = set.velocity_set();
        let a = vec![0.0; vs.dim];
        LbmParams::new(vs, dx, dt, omega, a)
    }

    pub fn q(&self) -> usize {
        self.velocity_set.q()
    }

    pub fn dim(&self) -> usize {
        self.velocity_set.dim
    }

    /// `dx / dt`.
    pub fn lattice_speed(&self) -> f64 {
        self.dx / self.dt
    }

    pub fn sound_speed_sq(&self) -> f64 {
        let c = self.lattice_speed();
        self.velocity_set.sound_speed_sq_factor * c * c
    }

    /// Per-velocity factors `kappa_i` with `f_i^eq = kappa_i * rho`.
    pub fn equilibrium_factors(&self) -> Vec<f64> {
        let vs = &self.velocity_set;
        if self.advection.iter().all(|a| *a == 0.0) {
            return vs.weights.clone();
        }
        let c = self.lattice_speed();
        let cs2 = self.sound_speed_sq();
        let a2: f64 = self.advection.iter().map(|a| a * a).sum();
        vs.directions
            .iter()
            .zip(&vs.weights)
            .map(|(ci, w)| {
                let va: f64 = (0..vs.dim)
                    .map(|k| ci[k] as f64 * c * self.advection[k])
                    .sum();
                w * (1.0 + va / cs2 + va * va / (2.0 * cs2 * cs2) - a2 / (2.0 * cs2))
            })
            .collect()
    }
}

/// Grid extent; `ny == 1` for one-dimensional fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub nx: usize,
    pub ny: usize,
}

impl Shape {
    pub fn d1(n: usize) -> Self {
        Shape { nx: n, ny: 1 }
    }

    pub fn d2(nx: usize, ny: usize) -> Self {
        Shape { nx, ny }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        x * self.ny + y
    }

    /// Index with periodic wrap of signed coordinates.
    #[inline]
    pub fn wrap(&self, x: isize, y: isize) -> usize {
        let xx = x.rem_euclid(self.nx as isize) as usize;
        let yy = y.rem_euclid(self.ny as isize) as usize;
        self.idx(xx, yy)
    }
}

fn check_shape_dim(shape: Shape, set: &VelocitySet) -> Result<()> {
    if set.dim == 1 && shape.ny != 1 {
        return Err(Error::Shape(format!(
            "{} needs a 1D grid, got {}x{}",
            set.id, shape.nx, shape.ny
        )));
    }
    if shape.is_empty() {
        return Err(Error::Shape("empty grid".into()));
    }
    Ok(())
}

/// Macroscopic density per node.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub shape: Shape,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values for {} nodes",
                values.len(),
                shape.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite density".into()));
        }
        Ok(DensityField { shape, values })
    }

    pub fn uniform(shape: Shape, rho: f64) -> Self {
        DensityField {
            shape,
            values: vec![rho; shape.len()],
        }
    }

    /// `rho(x_j)` with `x_j = j * dx`.
    pub fn from_fn_1d(n: usize, dx: f64, f: impl Fn(f64) -> f64) -> Self {
        DensityField {
            shape: Shape::d1(n),
            values: (0..n).map(|j| f(j as f64 * dx)).collect(),
        }
    }

    pub fn from_fn_2d(nx: usize, ny: usize, dx: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let shape = Shape::d2(nx, ny);
        let mut values = Vec::with_capacity(shape.len());
        for x in 0..nx {
            for y in 0..ny {
                values.push(f(x as f64 * dx, y as f64 * dx));
            }
        }
        DensityField { shape, values }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[self.shape.idx(x, y)]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Per-node populations in structure-of-arrays layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField {
    pub shape: Shape,
    pub q: usize,
    pub data: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(shape: Shape, q: usize) -> Self {
        DistributionField {
            shape,
            q,
            data: vec![0.0; shape.len() * q],
        }
    }

    /// Build from node-major values `[node][i]`.
    pub fn from_nodes(shape: Shape, q: usize, nodes: &[Vec<f64>]) -> Result<Self> {
        if nodes.len() != shape.len() || nodes.iter().any(|n| n.len() != q) {
            return Err(Error::Shape("node list does not match shape and q".into()));
        }
        let mut f = DistributionField::zeros(shape, q);
        for (k, node) in nodes.iter().enumerate() {
            for (i, v) in node.iter().enumerate() {
                f.data[i * shape.len() + k] = *v;
            }
        }
        Ok(f)
    }

    #[inline]
    pub fn pop(&self, i: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn pop_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.shape.len();
        &mut self.data[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn get(&self, i: usize, node: usize) -> f64 {
        self.data[i * self.shape.len() + node]
    }

    #[inline]
    pub fn set(&mut self, i: usize, node: usize, v: f64) {
        let n = self.shape.len();
        self.data[i * n + node] = v;
    }

    pub fn node(&self, node: usize) -> Vec<f64> {
        (0..self.q).map(|i| self.get(i, node)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn total_mass(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Flat 2-norm of the difference over all nodes and velocities.
    pub fn distance(&self, other: &DistributionField) -> f64 {
        assert_eq!(self.shape, other.shape);
        assert_eq!(self.q, other.q);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// D1Q3 moments: density, momentum `phi = f_1 - f_-1` and energy `xi = (f_1 + f_-1) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentField {
    pub rho: DensityField,
    pub phi: Vec<f64>,
    pub xi: Vec<f64>,
}

pub fn equilibrium(rho: &DensityField, params: &LbmParams) -> Result<DistributionField> {
    check_shape_dim(rho.shape, &params.velocity_set)?;
    let kappa = params.equilibrium_factors();
    let mut f = DistributionField::zeros(rho.shape, kappa.len());
    for (i, k) in kappa.iter().enumerate() {
        for (out, r) in f.pop_mut(i).iter_mut().zip(&rho.values) {
            *out = k * r;
        }
    }
    Ok(f)
}

pub fn restrict(f: &DistributionField) -> DensityField {
    let n = f.shape.len();
    let mut values = vec![0.0; n];
    for i in 0..f.q {
        for (acc, v) in values.iter_mut().zip(f.pop(i)) {
            *acc += v;
        }
    }
    DensityField {
        shape: f.shape,
        values,
    }
}

/// How populations enter the grid at its x-boundaries.
#[derive(Clone, Copy, Debug)]
pub enum Boundary<'a> {
    Periodic,
    /// Post-collision-free ghost columns at `x = -1` and `x = nx`, each given as
    /// `q * ny` values in structure-of-arrays order. They are collided with the
    /// interior and streamed in; y stays periodic.
    GhostFed {
        left: &'a [f64],
        right: &'a [f64],
    },
}

/// BGK relaxation in place: `f <- f + omega (f_eq - f)`.
pub fn collide(f: &mut DistributionField, params: &LbmParams) {
    let kappa = params.equilibrium_factors();
    let rho = restrict(f);
    let omega = params.omega;
    for (i, k) in kappa.iter().enumerate() {
        for (v, r) in f.pop_mut(i).iter_mut().zip(&rho.values) {
            *v += omega * (k * r - *v);
        }
    }
}

/// Periodic streaming `dst_i(x + c_i) = src_i(x)`.
pub fn stream_periodic(src: &DistributionField, dst: &mut DistributionField, set: &VelocitySet) {
    let shape = src.shape;
    let (nx, ny) = (shape.nx, shape.ny);
    for (i, c) in set.directions.iter().enumerate() {
        let s = src.pop(i);
        let d = dst.pop_mut(i);
        let sx = c[0].rem_euclid(nx as i32) as usize;
        let sy = c[1].rem_euclid(ny as i32) as usize;
        for x in 0..nx {
            let tx = (x + sx) % nx;
            if sy == 0 {
                d[tx * ny..(tx + 1) * ny].copy_from_slice(&s[x * ny..(x + 1) * ny]);
            } else {
                for y in 0..ny {
                    d[tx * ny + (y + sy) % ny] = s[x * ny + y];
                }
            }
        }
    }
}

/// One stream-collide step.
pub fn stream_collide(
    f: &DistributionField,
    params: &LbmParams,
    boundary: Boundary<'_>,
) -> Result<DistributionField> {
    check_shape_dim(f.shape, &params.velocity_set)?;
    if f.q != params.q() {
        return Err(Error::Shape(format!(
            "field has q = {}, set has {}",
            f.q,
            params.q()
        )));
    }
    match boundary {
        Boundary::Periodic => {
            let mut post = f.clone();
            collide(&mut post, params);
            let mut out = DistributionField::zeros(f.shape, f.q);
            stream_periodic(&post, &mut out, &params.velocity_set);
            Ok(out)
        }
        Boundary::GhostFed { left, right } => {
            let ny = f.shape.ny;
            let expected = f.q * ny;
            for g in [left, right] {
                if g.len() != expected {
                    return Err(Error::MissingGhosts {
                        expected,
                        got: g.len(),
                    });
                }
            }
            let nx = f.shape.nx;
            let ext_shape = Shape::d2(nx + 2, ny);
            let mut ext = DistributionField::zeros(ext_shape, f.q);
            for i in 0..f.q {
                let dst = ext.pop_mut(i);
                dst[..ny].copy_from_slice(&left[i * ny..(i + 1) * ny]);
                dst[ny..(nx + 1) * ny].copy_from_slice(f.pop(i));
                dst[(nx + 1) * ny..].copy_from_slice(&right[i * ny..(i + 1) * ny]);
            }
            collide(&mut ext, params);
            let mut out = DistributionField::zeros(f.shape, f.q);
            for (i, c) in params.velocity_set.directions.iter().enumerate() {
                let src = ext.pop(i);
                let dst = out.pop_mut(i);
                for x in 0..nx {
                    let sx = (x + 1) as isize - c[0] as isize;
                    for y in 0..ny {
                        let sy = (y as isize - c[1] as isize).rem_euclid(ny as isize) as usize;
                        dst[x * ny + y] = src[sx as usize * ny + sy];
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Advance a periodic field by `steps` stream-collide steps, reusing one scratch buffer.
pub fn run_periodic(f: &mut DistributionField, params: &LbmParams, steps: usize) {
    let mut scratch = DistributionField::zeros(f.shape, f.q);
    for _ in 0..steps {
        collide(f, params);
        stream_periodic(f, &mut scratch, &params.velocity_set);
        std::mem::swap(f, &mut scratch);
    }
}

fn require_d1q3(id: SetId) -> Result<()> {
    if id != SetId::D1Q3 {
        return Err(Error::UnsupportedSet {
            required: "D1Q3",
            got: id.name(),
        });
    }
    Ok(())
}

/// Apply the moment matrix `[[1,1,1],[1,0,-1],[1/2,0,1/2]]` per node.
pub fn moments(f: &DistributionField, set: &VelocitySet) -> Result<MomentField> {
    require_d1q3(set.id)?;
    let n = f.shape.len();
    let (fp, f0, fm) = (f.pop(0), f.pop(1), f.pop(2));
    let mut rho = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let mut xi = Vec::with_capacity(n);
    for k in 0..n {
        let s = fp[k] + fm[k];
        rho.push(f0[k] + s);
        phi.push(fp[k] - fm[k]);
        xi.push(0.5 * s);
    }
    Ok(MomentField {
        rho: DensityField {
            shape: f.shape,
            values: rho,
        },
        phi,
        xi,
    })
}

/// Inverse of [`moments`].
pub fn from_moments(m: &MomentField, set: &VelocitySet) -> Result<DistributionField> {
    require_d1q3(set.id)?;
    let shape = m.rho.shape;
    let n = shape.len();
    if m.phi.len() != n || m.xi.len() != n {
        return Err(Error::Shape("moment arrays differ in length".into()));
    }
    let mut f = DistributionField::zeros(shape, 3);
    for k in 0..n {
        let half = 0.5 * m.phi[k];
        f.data[k] = m.xi[k] + half;
        f.data[n + k] = m.rho.values[k] - 2.0 * m.xi[k];
        f.data[2 * n + k] = m.xi[k] - half;
    }
    Ok(f)
}
