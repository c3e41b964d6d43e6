use lbmlift::hybrid::{centred_gaussian, compare_to_reference, HybridSpec, Lifter};
use lbmlift::lattice::{DensityField, LbmParams, SetId, Shape};
use lbmlift::lift_analytic::analytic_coefficients;
use lbmlift::lift_cr::CrConfig;
use lbmlift::lift_nce::{train_coefficients, NceTrainConfig};
use lbmlift::macro_pde::analytic_pde;

fn d1q3() -> LbmParams {
    LbmParams::diffusive(SetId::D1Q3, 0.05, 0.001, 0.9091).unwrap()
}

fn spec(params: LbmParams, lifter: Lifter, n: usize) -> HybridSpec {
    HybridSpec {
        split: HybridSpec::default_split(n),
        pde: analytic_pde(&params),
        initial: centred_gaussian(params.velocity_set.id, n, params.dx),
        params,
        lifter,
    }
}

#[test]
fn better_lifts_give_smaller_errors() {
    let p = d1q3();
    let errs: Vec<f64> = [
        Lifter::equilibrium(&p),
        Lifter::Coefficients(analytic_coefficients(&p, 1).unwrap()),
        Lifter::Coefficients(analytic_coefficients(&p, 2).unwrap()),
    ]
    .into_iter()
    .map(|l| {
        compare_to_reference(&spec(p.clone(), l, 200), 200)
            .unwrap()
            .final_max()
    })
    .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn error_is_generated_at_the_interfaces() {
    let p = d1q3();
    let s = spec(
        p.clone(),
        Lifter::Coefficients(analytic_coefficients(&p, 2).unwrap()),
        200,
    );
    let e = compare_to_reference(&s, 200).unwrap();
    let last = e.fields.last().unwrap();
    let (pl, pr) = (s.split as isize, 0isize);
    let dist = |j: isize, c: isize| {
        let d = (j - c).rem_euclid(200);
        d.min(200 - d)
    };
    let mut near: f64 = 0.0;
    let mut far: f64 = 0.0;
    for (j, v) in last.iter().enumerate() {
        let d = dist(j as isize, pl)
            .min(dist(j as isize, pr))
            .min(dist(j as isize, pl + 1))
            .min(dist(j as isize, 199));
        if d == 0 {
            near = near.max(*v);
        } else if d >= 10 {
            far = far.max(*v);
        }
    }
    assert!(far <= near, "far {far:e} near {near:e}");
}

#[test]
fn uniform_density_is_steady() {
    let p = d1q3();
    let mut s = spec(p.clone(), Lifter::ConstrainedRuns(CrConfig::new(1)), 40);
    s.initial = DensityField::uniform(Shape::d1(40), 1.25);
    let e = compare_to_reference(&s, 20).unwrap();
    assert!(e.final_max() <= 1e-15);
}

#[test]
fn mass_drift_is_small_with_a_trained_lift() {
    let p = d1q3();
    let c = train_coefficients(&NceTrainConfig::new(6, 3), &p)
        .unwrap()
        .coeffs;
    let e = compare_to_reference(&spec(p, Lifter::Coefficients(c), 200), 200).unwrap();
    // The coupling is not conservative; this records the scale.
    assert!(e.final_mass_drift.abs() < 1e-5, "{}", e.final_mass_drift);
}

#[test]
fn two_dimensional_trained_lift_beats_equilibrium() {
    let p = LbmParams::diffusive(SetId::D2Q5, 0.05, 1e-4, 1.6129).unwrap();
    let c = train_coefficients(&NceTrainConfig::new(4, 1), &p)
        .unwrap()
        .coeffs;
    let eq = compare_to_reference(&spec(p.clone(), Lifter::equilibrium(&p), 100), 50)
        .unwrap()
        .final_max();
    let nce = compare_to_reference(&spec(p, Lifter::Coefficients(c), 100), 50)
        .unwrap()
        .final_max();
    assert!(nce * 10.0 <= eq, "nce {nce:e} eq {eq:e}");
}

#[test]
fn degenerate_split_is_rejected() {
    let p = d1q3();
    let mut s = spec(p.clone(), Lifter::equilibrium(&p), 20);
    s.split = 18;
    assert!(compare_to_reference(&s, 1).is_err());
}
