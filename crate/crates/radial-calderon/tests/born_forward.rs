use radial_calderon::born::{
    a_amplitude_closed, born_closed_form, born_forward, born_from_a, BornMethod, BornParams, LegendreParams, Provenance, RadialGrid,
};
use radial_calderon::forward::ForwardOptions;
use radial_calderon::potentials::{to_halfline, RadialPotential};

fn sup_on(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> f64 {
    (0..=700).map(|i| 0.3 + 0.001 * i as f64).map(|r| (a(r) - b(r)).abs()).fold(0.0, f64::max)
}

#[test]
fn zero_potential_gives_zero_profile() {
    let out = born_forward(&RadialPotential::zero(3), 40, &BornParams::default(), &ForwardOptions::default()).unwrap();
    assert!(out.profile.values.iter().all(|v| v.abs() <= 1e-12));
    assert!(matches!(out.profile.provenance, Provenance::FromSpectrum(_)));
}

#[test]
fn bargmann_matches_the_amplitude_route() {
    let v = RadialPotential::bargmann(3, 1.0, 2.0);
    let out = born_forward(&v, 40, &BornParams::default(), &ForwardOptions::default()).unwrap();
    let a = a_amplitude_closed(&to_halfline(&v)).unwrap();
    let direct = born_from_a(&a, 3, &RadialGrid::default());
    let err = sup_on(|r| out.profile.eval(r), |r| direct.eval(r));
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn inverse_square_matches_the_closed_form() {
    // The oscillating, non square-integrable profile defeats the Fourier
    // route; a short unregularized Legendre expansion with k0 = 2 resolves it.
    let v = RadialPotential::inverse_square(3, 0.25);
    let params = BornParams {
        method: BornMethod::LegendreMoments,
        ridge: 0.0,
        legendre: LegendreParams { k0: 2, n_moments: 12 },
        ..Default::default()
    };
    let out = born_forward(&v, 40, &params, &ForwardOptions::default()).unwrap();
    let exact = born_closed_form(&v, &RadialGrid::default()).unwrap();
    let err = sup_on(|r| out.profile.eval(r), |r| exact.eval(r));
    assert!(err <= 1e-3, "{err}");
}
