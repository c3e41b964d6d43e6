//! Chapman-Enskog lifting: `f_i = f_i^eq + sum_k c_{k,i} D_k rho`.
//!
//! [`LiftCoefficients`] is shared by the closed-form coefficients produced here
//! and the numerically trained ones from [`crate::lift_nce`].

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{equilibrium, DensityField, DistributionField, LbmParams, SetId};
use crate::stencil::{derivative_at, spatial_derivative, DerivSpec, StencilMode};

/// A term of the expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Space(DerivSpec),
    /// First time derivative of the density.
    Time,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Space(d) => d.fmt(f),
            Term::Time => f.write_str("t"),
        }
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "t" {
            Ok(Term::Time)
        } else {
            Ok(Term::Space(s.parse()?))
        }
    }
}

/// The model parameters a coefficient set was derived for.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub set: SetId,
    pub omega: f64,
    pub dx: f64,
    pub dt: f64,
    pub advection: Vec<f64>,
}

impl Fingerprint {
    pub fn of(params: &LbmParams) -> Self {
        Fingerprint {
            set: params.velocity_set.id,
            omega: params.omega,
            dx: params.dx,
            dt: params.dt,
            advection: params.advection.clone(),
        }
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} omega={} dx={} dt={} a={:?}",
            self.set, self.omega, self.dx, self.dt, self.advection
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftCoefficients {
    pub fingerprint: Fingerprint,
    /// One coefficient per velocity for each term.
    pub terms: Vec<(Term, Vec<f64>)>,
}

impl LiftCoefficients {
    pub fn empty(params: &LbmParams) -> Self {
        LiftCoefficients {
            fingerprint: Fingerprint::of(params),
            terms: Vec::new(),
        }
    }

    pub fn get(&self, term: Term) -> Option<&[f64]> {
        self.terms
            .iter()
            .find(|(t, _)| *t == term)
            .map(|(_, v)| v.as_slice())
    }

    pub fn spatial_part(&self) -> LiftCoefficients {
        LiftCoefficients {
            fingerprint: self.fingerprint.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(t, _)| *t != Term::Time)
                .cloned()
                .collect(),
        }
    }

    pub fn check_params(&self, params: &LbmParams) -> Result<()> {
        let want = Fingerprint::of(params);
        if want != self.fingerprint {
            return Err(Error::Fingerprint {
                stored: self.fingerprint.to_string(),
                requested: want.to_string(),
            });
        }
        let q = params.q();
        for (i, (t, v)) in self.terms.iter().enumerate() {
            if v.len() != q || v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "term {t}: need {q} finite coefficients"
                )));
            }
            if self.terms[..i].iter().any(|(u, _)| u == t) {
                return Err(Error::InvalidParams(format!("term {t} listed twice")));
            }
            if let Term::Space(d) = t {
                if d.y > 0 && params.dim() == 1 {
                    return Err(Error::Shape(format!("term {t} needs a 2D set")));
                }
            }
        }
        Ok(())
    }

    /// Plain-text form: `key = value` lines, coefficients as shortest
    /// round-trip decimals separated by commas.
    pub fn to_text(&self) -> String {
        let fp = &self.fingerprint;
        let mut s = String::new();
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(s, "set = {}", fp.set).unwrap();
        writeln!(s, "omega = {:?}", fp.omega).unwrap();
        writeln!(s, "dx = {:?}", fp.dx).unwrap();
        writeln!(s, "dt = {:?}", fp.dt).unwrap();
        writeln!(s, "advection = {}", join(&fp.advection)).unwrap();
        for (t, v) in &self.terms {
            writeln!(s, "{t} = {}", join(v)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut set = None;
        let (mut omega, mut dx, mut dt, mut adv) = (None, None, None, None);
        let mut terms = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: ln + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("{s}: {e}")))
            };
            let list = |s: &str| -> Result<Vec<f64>> { s.split(',').map(num).collect() };
            match k {
                "set" => set = Some(SetId::parse(v).map_err(|e| err(e.to_string()))?),
                "omega" => omega = Some(num(v)?),
                "dx" => dx = Some(num(v)?),
                "dt" => dt = Some(num(v)?),
                "advection" => adv = Some(list(v)?),
                other => {
                    let t: Term = other.parse().map_err(|e: Error| err(e.to_string()))?;
                    terms.push((t, list(v)?));
                }
            }
        }
        let missing = |k: &str| Error::Parse(format!("coefficient file lacks `{k}`"));
        Ok(LiftCoefficients {
            fingerprint: Fingerprint {
                set: set.ok_or_else(|| missing("set"))?,
                omega: omega.ok_or_else(|| missing("omega"))?,
                dx: dx.ok_or_else(|| missing("dx"))?,
                dt: dt.ok_or_else(|| missing("dt"))?,
                advection: adv.ok_or_else(|| missing("advection"))?,
            },
            terms,
        })
    }
}

/// Closed-form D1Q3 diffusive coefficients up to `order` (0 to 3).
pub fn analytic_coefficients(params: &LbmParams, order: usize) -> Result<LiftCoefficients> {
    if params.velocity_set.id != SetId::D1Q3 {
        return Err(Error::UnsupportedSet {
            required: "D1Q3",
            got: params.velocity_set.id.name(),
        });
    }
    if order > 3 {
        return Err(Error::UnsupportedOrder(order));
    }
    if order > 0 && params.advection.iter().any(|a| *a != 0.0) {
        return Err(Error::InvalidParams(
            "closed-form coefficients exist only without advection".into(),
        ));
    }
    let (w, h) = (params.omega, params.dx);
    let c: Vec<f64> = params
        .velocity_set
        .directions
        .iter()
        .map(|d| d[0] as f64)
        .collect();
    let mut out = LiftCoefficients::empty(params);
    if order >= 1 {
        out.terms.push((
            Term::Space(DerivSpec::x(1)),
            c.iter().map(|ci| -ci * h / (3.0 * w)).collect(),
        ));
    }
    if order >= 2 {
        let beta = c
            .iter()
            .map(|ci| -h * h * (w - 2.0) * (3.0 * ci * ci - 2.0) / (18.0 * w * w))
            .collect();
        out.terms.push((Term::Space(DerivSpec::x(2)), beta));
    }
    if order >= 3 {
        let k = h * h * h * (w * w - 2.0 * w + 2.0) / (18.0 * w * w * w);
        out.terms.push((
            Term::Space(DerivSpec::x(3)),
            c.iter().map(|ci| ci * k).collect(),
        ));
    }
    Ok(out)
}

fn check_lift(rho: &DensityField, coeffs: &LiftCoefficients, params: &LbmParams) -> Result<()> {
    coeffs.check_params(params)?;
    if coeffs.get(Term::Time).is_some() {
        return Err(Error::TimeTerm);
    }
    if params.dim() == 1 && rho.shape.ny != 1 {
        return Err(Error::Shape("1D set on a 2D grid".into()));
    }
    Ok(())
}

/// Lift a periodic density field.
pub fn apply_lift(
    rho: &DensityField,
    coeffs: &LiftCoefficients,
    params: &LbmParams,
) -> Result<DistributionField> {
    check_lift(rho, coeffs, params)?;
    let mut f = equilibrium(rho, params)?;
    for (t, c) in &coeffs.terms {
        let Term::Space(d) = t else { unreachable!() };
        let der = spatial_derivative(rho, *d, params.dx, StencilMode::Periodic)?;
        for (i, ci) in c.iter().enumerate() {
            for (v, dv) in f.pop_mut(i).iter_mut().zip(&der.field.values) {
                *v += ci * dv;
            }
        }
    }
    Ok(f)
}

/// Lift the single node `(x, y)` of a periodic density field into `out`.
pub fn lift_node(
    rho: &DensityField,
    coeffs: &LiftCoefficients,
    params: &LbmParams,
    kappa: &[f64],
    x: usize,
    y: usize,
    out: &mut [f64],
) {
    let r = rho.at(x, y);
    for (o, k) in out.iter_mut().zip(kappa) {
        *o = k * r;
    }
    for (t, c) in &coeffs.terms {
        if let Term::Space(d) = t {
            let dv = derivative_at(rho, *d, params.dx, x, y);
            for (o, ci) in out.iter_mut().zip(c) {
                *o += ci * dv;
            }
        }
    }
}

/// Lift one full-height column `x`; the result is in structure-of-arrays order
/// (`q` blocks of `ny` values).
pub fn lift_column(
    rho: &DensityField,
    coeffs: &LiftCoefficients,
    params: &LbmParams,
    x: usize,
) -> Result<Vec<f64>> {
    check_lift(rho, coeffs, params)?;
    let (ny, q) = (rho.shape.ny, params.q());
    let kappa = params.equilibrium_factors();
    let mut col = vec![0.0; q * ny];
    let mut node = vec![0.0; q];
    for y in 0..ny {
        lift_node(rho, coeffs, params, &kappa, x, y, &mut node);
        for i in 0..q {
            col[i * ny + y] = node[i];
        }
    }
    Ok(col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{restrict, Shape};

    fn d1q3() -> LbmParams {
        LbmParams::diffusive(SetId::D1Q3, 0.05, 0.001, 0.9091).unwrap()
    }

    #[test]
    fn second_order_vectors_at_ten_elevenths() {
        let c = analytic_coefficients(&d1q3(), 2).unwrap();
        let a = c.get(Term::Space(DerivSpec::x(1))).unwrap();
        for (g, w) in a.iter().zip([-1.8333e-2, 0.0, 1.8333e-2]) {
            assert!((g - w).abs() < 1e-6);
        }
        let p = LbmParams::diffusive(SetId::D1Q3, 0.05, 0.001, 10.0 / 11.0).unwrap();
        let c = analytic_coefficients(&p, 2).unwrap();
        let b = c.get(Term::Space(DerivSpec::x(2))).unwrap();
        for (g, w) in b.iter().zip([1.8333e-4, -3.6667e-4, 1.8333e-4]) {
            assert!((g - w).abs() < 1e-8);
        }
    }

    #[test]
    fn second_order_vectors_at_rounded_omega() {
        let c = analytic_coefficients(&d1q3(), 2).unwrap();
        let b = c.get(Term::Space(DerivSpec::x(2))).unwrap();
        for (g, w) in b
            .iter()
            .zip([1.8332813897e-4, -3.6665627795e-4, 1.8332813897e-4])
        {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_sum_vectors() {
        for w in [0.3, 0.9091, 1.5, 1.99] {
            let p = LbmParams::diffusive(SetId::D1Q3, 0.05, 0.001, w).unwrap();
            for (_, v) in analytic_coefficients(&p, 3).unwrap().terms {
                assert!(v.iter().sum::<f64>().abs() < 1e-17);
            }
        }
    }

    #[test]
    fn rejects_unsupported_requests() {
        assert!(analytic_coefficients(&d1q3(), 4).is_err());
        let p = LbmParams::diffusive(SetId::D2Q9, 0.05, 1e-5, 1.9531).unwrap();
        assert!(analytic_coefficients(&p, 1).is_err());
        let adv = LbmParams::new(
            crate::lattice::VelocitySet::d1q3(),
            0.05,
            0.001,
            0.9091,
            vec![0.66],
        )
        .unwrap();
        assert!(analytic_coefficients(&adv, 0).is_ok());
        assert!(analytic_coefficients(&adv, 1).is_err());
    }

    #[test]
    fn uniform_density_lifts_to_equilibrium() {
        let p = d1q3();
        let rho = DensityField::uniform(Shape::d1(12), 0.7);
        let f = apply_lift(&rho, &analytic_coefficients(&p, 3).unwrap(), &p).unwrap();
        assert_eq!(f, equilibrium(&rho, &p).unwrap());
    }

    #[test]
    fn fingerprint_mismatch_is_rejected() {
        let c = analytic_coefficients(&d1q3(), 2).unwrap();
        let other = LbmParams::diffusive(SetId::D1Q3, 0.05, 0.001, 1.0).unwrap();
        let rho = DensityField::uniform(Shape::d1(8), 1.0);
        assert!(matches!(
            apply_lift(&rho, &c, &other),
            Err(Error::Fingerprint { .. })
        ));
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let c = analytic_coefficients(&d1q3(), 3).unwrap();
        let back = LiftCoefficients::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn lift_preserves_density() {
        let p = d1q3();
        let rho = DensityField::from_fn_1d(200, 0.05, |x| (-(x - 5.0) * (x - 5.0)).exp());
        let f = apply_lift(&rho, &analytic_coefficients(&p, 3).unwrap(), &p).unwrap();
        let back = restrict(&f);
        for (a, b) in back.values.iter().zip(&rho.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn column_lift_matches_full_lift() {
        let p = LbmParams::diffusive(SetId::D1Q3, 0.05, 0.001, 0.9091).unwrap();
        let rho = DensityField::from_fn_1d(30, 0.05, |x| (x * 2.0).sin() + 2.0);
        let c = analytic_coefficients(&p, 3).unwrap();
        let full = apply_lift(&rho, &c, &p).unwrap();
        let col = lift_column(&rho, &c, &p, 4).unwrap();
        for i in 0..3 {
            assert_eq!(col[i], full.get(i, 4));
        }
    }
}
