//! Finite-difference derivatives of density fields.
//!
//! Spatial derivatives use the narrowest second-order central stencil for each
//! order (widths 3, 3, 5, 5, 7, 7). Stencils are evaluated in difference form,
//! `sum_s w_s (rho_{j+s} - rho_{j-s})` for odd orders and
//! `sum_s w_s ((rho_{j+s} - rho_j) + (rho_{j-s} - rho_j))` for even orders, so a
//! constant field differentiates to exactly zero.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::lattice::DensityField;

pub const MAX_ORDER: usize = 6;

/// Derivative `d^(x+y) / dx^x dy^y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DerivSpec {
    pub x: u8,
    pub y: u8,
}

impl DerivSpec {
    pub const fn x(k: u8) -> Self {
        DerivSpec { x: k, y: 0 }
    }

    pub const fn y(k: u8) -> Self {
        DerivSpec { x: 0, y: k }
    }

    pub const fn mixed(kx: u8, ky: u8) -> Self {
        DerivSpec { x: kx, y: ky }
    }

    pub fn order(&self) -> usize {
        self.x as usize + self.y as usize
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.order();
        if k == 0 || k > MAX_ORDER {
            return Err(Error::UnsupportedOrder(k));
        }
        Ok(())
    }

    /// Half-widths of the stencil along x and y.
    pub fn reach(&self) -> [usize; 2] {
        [half_width(self.x as usize), half_width(self.y as usize)]
    }
}

impl fmt::Display for DerivSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.x, self.y) {
            (a, 0) => write!(f, "x{a}"),
            (0, b) => write!(f, "y{b}"),
            (a, b) => write!(f, "x{a}y{b}"),
        }
    }
}

impl std::str::FromStr for DerivSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad derivative spec `{s}`"));
        let s = s.trim();
        let (xs, ys) = match (s.find('x'), s.find('y')) {
            (Some(0), Some(j)) => (&s[1..j], &s[j + 1..]),
            (Some(0), None) => (&s[1..], "0"),
            (None, Some(0)) => ("0", &s[1..]),
            _ => return Err(bad()),
        };
        let x: u8 = xs.parse().map_err(|_| bad())?;
        let y: u8 = ys.parse().map_err(|_| bad())?;
        let d = DerivSpec { x, y };
        d.validate()?;
        Ok(d)
    }
}

/// Every derivative of total order `1..=order`, grouped by total order and
/// ordered by decreasing x-order within a group.
pub fn terms_up_to(dim: usize, order: usize) -> Vec<DerivSpec> {
    let mut out = Vec::new();
    for s in 1..=order as u8 {
        if dim == 1 {
            out.push(DerivSpec::x(s));
        } else {
            for b in 0..=s {
                out.push(DerivSpec::mixed(s - b, b));
            }
        }
    }
    out
}

/// Finite-difference weights for derivative `order` at `z` from the nodes `x`.
pub fn fornberg(z: f64, x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

pub fn half_width(order: usize) -> usize {
    order.div_ceil(2)
}

/// Full central stencil `w_{-h..=h}` for derivative `order`, unscaled by `dx`.
pub fn central_weights(order: usize) -> Vec<f64> {
    let h = half_width(order) as isize;
    let nodes: Vec<f64> = (-h..=h).map(|s| s as f64).collect();
    fornberg(0.0, &nodes, order)
}

fn half_weights(order: usize) -> &'static [f64] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..=MAX_ORDER)
            .map(|k| {
                if k == 0 {
                    return Vec::new();
                }
                let w = central_weights(k);
                let h = half_width(k);
                w[h + 1..].to_vec()
            })
            .collect()
    });
    &table[order]
}

/// Unscaled 1D stencil applied to samples `g(s)` at offsets `s`.
#[inline]
pub fn fd1(order: usize, g: impl Fn(isize) -> f64) -> f64 {
    if order == 0 {
        return g(0);
    }
    let w = half_weights(order);
    let mut acc = 0.0;
    if order % 2 == 1 {
        for (s, ws) in w.iter().enumerate() {
            let s = s as isize + 1;
            acc += ws * (g(s) - g(-s));
        }
    } else {
        let g0 = g(0);
        for (s, ws) in w.iter().enumerate() {
            let s = s as isize + 1;
            acc += ws * ((g(s) - g0) + (g(-s) - g0));
        }
    }
    acc
}

/// Derivative at one point from samples `g(sx, sy)` at integer offsets.
#[inline]
pub fn fd_point(spec: DerivSpec, dx: f64, g: impl Fn(isize, isize) -> f64) -> f64 {
    let (kx, ky) = (spec.x as usize, spec.y as usize);
    let raw = fd1(kx, |s| fd1(ky, |t| g(s, t)));
    raw / dx.powi((kx + ky) as i32)
}

/// Derivative of a field at node `(x, y)` with periodic wrap.
pub fn derivative_at(rho: &DensityField, spec: DerivSpec, dx: f64, x: usize, y: usize) -> f64 {
    let sh = rho.shape;
    let (x, y) = (x as isize, y as isize);
    fd_point(spec, dx, |s, t| rho.values[sh.wrap(x + s, y + t)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilMode {
    Periodic,
    /// Nodes whose stencil would leave the grid are not computed.
    InteriorOnly,
}

/// A derivative field; in interior-only mode the outer `rim` nodes along each
/// axis are invalid and hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivative {
    pub field: DensityField,
    pub rim: [usize; 2],
}

impl Derivative {
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        let sh = self.field.shape;
        x >= self.rim[0] && x + self.rim[0] < sh.nx && y >= self.rim[1] && y + self.rim[1] < sh.ny
    }
}

pub fn spatial_derivative(
    rho: &DensityField,
    spec: DerivSpec,
    dx: f64,
    mode: StencilMode,
) -> Result<Derivative> {
    spec.validate()?;
    let sh = rho.shape;
    if spec.y > 0 && sh.ny == 1 {
        return Err(Error::Shape("y-derivative of a 1D field".into()));
    }
    for (k, n) in [(spec.x as usize, sh.nx), (spec.y as usize, sh.ny)] {
        if k > 0 && n < k + 2 {
            return Err(Error::GridTooSmall {
                need: k + 2,
                have: n,
            });
        }
    }
    let mut values = vec![0.0; sh.len()];
    let rim = match mode {
        StencilMode::Periodic => {
            for x in 0..sh.nx {
                for y in 0..sh.ny {
                    values[sh.idx(x, y)] = derivative_at(rho, spec, dx, x, y);
                }
            }
            [0, 0]
        }
        StencilMode::InteriorOnly => {
            let [hx, hy] = spec.reach();
            for x in hx..sh.nx.saturating_sub(hx) {
                for y in hy..sh.ny.saturating_sub(hy) {
                    let (xi, yi) = (x as isize, y as isize);
                    values[sh.idx(x, y)] = fd_point(spec, dx, |s, t| {
                        rho.values[sh.idx((xi + s) as usize, (yi + t) as usize)]
                    });
                }
            }
            [hx, hy]
        }
    };
    Ok(Derivative {
        field: DensityField { shape: sh, values },
        rim,
    })
}

/// Forward-difference weights for derivative `order` at the first of `count`
/// equally spaced samples, unscaled by `dt`.
pub fn forward_weights(count: usize, order: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (0..count).map(|j| j as f64).collect();
    fornberg(0.0, &nodes, order)
}

/// Estimate of the `order`-th time derivative at the first snapshot, using all
/// snapshots (spaced `dt`).
pub fn time_derivative_forward(
    snapshots: &[DensityField],
    order: usize,
    dt: f64,
) -> Result<DensityField> {
    if order == 0 {
        return Err(Error::UnsupportedOrder(0));
    }
    if snapshots.len() < order + 1 {
        return Err(Error::Snapshots {
            need: order + 1,
            got: snapshots.len(),
        });
    }
    let shape = snapshots[0].shape;
    if snapshots.iter().any(|s| s.shape != shape) {
        return Err(Error::Shape("snapshots differ in shape".into()));
    }
    let w = forward_weights(snapshots.len(), order);
    let scale = dt.powi(order as i32);
    let base = &snapshots[0].values;
    let values = (0..shape.len())
        .map(|k| {
            let mut acc = 0.0;
            for (wj, s) in w.iter().zip(snapshots).skip(1) {
                acc += wj * (s.values[k] - base[k]);
            }
            acc / scale
        })
        .collect();
    Ok(DensityField { shape, values })
}
