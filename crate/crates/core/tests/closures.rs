use std::f64::consts::PI;

use ccmsim::ccm::{
    f_ex_from_weight, reduced_latent_heat, shape_f, u_eq_power, u_eq_temperature, u_equilibrium, u_transient,
    u_transient_power, u_transient_temperature, CcmParams, SourceMode,
};
use ccmsim::roots::solve_scalar;
use proptest::prelude::*;

fn ice(mode: SourceMode) -> CcmParams {
    CcmParams {
        rho_s: 921.3,
        rho_l: 1000.0,
        cp_s: 1877.2,
        cp_l: 4200.0,
        kappa_l: 0.6,
        mu_l: 0.0013,
        h_m: 333_700.0,
        t_m: 273.0,
        t_s: 210.0,
        r: 0.08,
        f_ex: 92.5,
        mode,
    }
}

fn watts(w: f64) -> SourceMode {
    SourceMode::Power { q_h: w / (PI * 0.08 * 0.08) }
}

/// Plain bisection to 1e-14 relative; `f(lo)` and `f(hi)` must differ in sign.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo).signum();
    assert_ne!(flo, f(hi).signum(), "bracket");
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

// Closure residuals written out from the model, independent of the crate.
fn film(p: &CcmParams, u: f64) -> f64 {
    let alpha = p.kappa_l / (p.rho_l * p.cp_l);
    (p.rho_s * p.r * u / p.rho_l).powf(4.0 / 3.0) * (1.5 * PI * p.mu_l / p.f_ex).cbrt() / (20.0 * alpha)
}

fn power_balance(p: &CcmParams, q_h: f64, melt: f64, u: f64) -> f64 {
    let f = film(p, u);
    melt / q_h * (7.0 * f + 1.0) + 3.0 * f - 1.0
}

fn oracle_eq_power(p: &CcmParams) -> f64 {
    let SourceMode::Power { q_h } = p.mode else { panic!() };
    let hs = p.h_m + p.cp_s * (p.t_m - p.t_s);
    bisect(|u| power_balance(p, q_h, p.rho_s * u * hs, u), 0.0, q_h / (p.rho_s * hs))
}

fn oracle_transient_power(p: &CcmParams, q_s: f64) -> f64 {
    let SourceMode::Power { q_h } = p.mode else { panic!() };
    bisect(|u| power_balance(p, q_h, p.rho_s * p.h_m * u + q_s, u), 0.0, q_h / (p.rho_s * p.h_m))
}

fn oracle_transient_temperature(p: &CcmParams, q_s: f64) -> f64 {
    let SourceMode::Temperature { t_w } = p.mode else { panic!() };
    let k = ((t_w - p.t_m) * p.kappa_l).powi(3);
    let g = |u: f64| p.f_ex - 8.0 * p.mu_l * u * (p.rho_s * u * p.h_m + q_s).powi(3) * p.r.powi(3) / k;
    let mut hi = 1e-6;
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    bisect(g, 0.0, hi)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn reduced_latent_heat_examples() {
    let p = ice(watts(1000.0));
    assert!((reduced_latent_heat(&p) - 451_963.6).abs() < 1e-6);
    let wax = CcmParams { rho_s: 775.0, cp_s: 2674.0, h_m: 221_000.0, t_m: 325.0, t_s: 298.8, ..p };
    assert!((reduced_latent_heat(&wax) - 291_058.8).abs() < 1e-6);
    assert_eq!(reduced_latent_heat(&CcmParams { t_s: 273.0, ..p }), p.h_m);
}

#[test]
fn temperature_closed_form() {
    let p = ice(SourceMode::Temperature { t_w: 353.0 });
    let hs = 451_963.6;
    let want = ((80.0f64 * 0.6).powi(3) * 92.5 / (8.0 * 0.0013 * (921.3 * hs * 0.08f64).powi(3))).powf(0.25);
    assert!(rel(u_eq_temperature(&p).unwrap(), want) < 1e-13);
    let cold = ice(SourceMode::Temperature { t_w: 273.0 });
    assert_eq!(u_eq_temperature(&cold).unwrap(), 0.0);
    let heavy = CcmParams { f_ex: 16.0 * p.f_ex, ..p };
    assert!(rel(u_eq_temperature(&heavy).unwrap(), 2.0 * u_eq_temperature(&p).unwrap()) < 1e-14);
}

#[test]
fn shape_function_examples() {
    let p = ice(watts(1000.0));
    assert_eq!(shape_f(&p, 0.0), 0.0);
    assert!(rel(shape_f(&p, 8e-5), 16.0 * shape_f(&p, 1e-5)) < 1e-13);
    // Spot value at U = 1e-4 from the printed expression, term by term.
    let a = (921.3f64 / 1000.0 * 0.08 * 1e-4).powf(4.0 / 3.0);
    let b = (3.0 * PI * 0.0013 / (2.0 * 92.5)).powf(1.0 / 3.0);
    assert!(rel(shape_f(&p, 1e-4), a * b) < 1e-13);
}

#[test]
fn power_equilibrium_examples() {
    let p1 = ice(watts(1000.0));
    let p3 = ice(watts(3000.0));
    let u1 = u_eq_power(&p1).unwrap().velocity;
    let u3 = u_eq_power(&p3).unwrap().velocity;
    assert!(rel(u1, oracle_eq_power(&p1)) < 1e-10);
    assert!(rel(u3, oracle_eq_power(&p3)) < 1e-10);
    assert!(u1 < u3);
    // Vanishing film term: all power goes into the Stefan flux.
    let thin = CcmParams { f_ex: 1e30, ..p1 };
    let SourceMode::Power { q_h } = p1.mode else { unreachable!() };
    let want = q_h / (p1.rho_s * reduced_latent_heat(&p1));
    assert!(rel(u_eq_power(&thin).unwrap().velocity, want) < 1e-7);
}

#[test]
fn transient_temperature_examples() {
    let p = ice(SourceMode::Temperature { t_w: 353.0 });
    let u_eq = u_eq_temperature(&p).unwrap();
    // Supplying the sensible flux at the equilibrium root recovers it.
    let q_s = p.rho_s * u_eq * p.cp_s * (p.t_m - p.t_s);
    assert!(rel(u_transient_temperature(&p, q_s).unwrap().velocity, u_eq) < 1e-10);
    let us: Vec<f64> = [0.0, 1e4, 5e4].iter().map(|&q| u_transient_temperature(&p, q).unwrap().velocity).collect();
    assert!(us[0] > us[1] && us[1] > us[2], "{us:?}");
    for (&q, u) in [0.0, 1e4, 5e4].iter().zip(&us) {
        assert!(rel(*u, oracle_transient_temperature(&p, q)) < 1e-10);
    }
    assert!(u_transient_temperature(&p, -1.0).is_err());
}

#[test]
fn transient_power_examples() {
    let p = ice(watts(1000.0));
    let u_eq = u_eq_power(&p).unwrap().velocity;
    let q_s = p.sensible_flux(u_eq);
    assert!(rel(u_transient_power(&p, q_s).unwrap().velocity, u_eq) < 1e-10);
    assert!(u_transient_power(&p, 0.0).unwrap().velocity > u_eq);
    assert!(rel(u_transient_power(&p, 2e4).unwrap().velocity, oracle_transient_power(&p, 2e4)) < 1e-10);
    let SourceMode::Power { q_h } = p.mode else { unreachable!() };
    let stalled = u_transient_power(&p, q_h).unwrap();
    assert!(stalled.stalled && stalled.velocity == 0.0);
}

#[test]
fn mode_dispatch() {
    let t = ice(SourceMode::Temperature { t_w: 353.0 });
    let w = ice(watts(3000.0));
    assert_eq!(u_equilibrium(&t).unwrap(), u_eq_temperature(&t).unwrap());
    assert_eq!(u_equilibrium(&w).unwrap(), u_eq_power(&w).unwrap().velocity);
    assert_eq!(u_transient(&w, 100.0).unwrap(), u_transient_power(&w, 100.0).unwrap());
    assert!(u_eq_power(&t).is_err());
    assert!(u_eq_temperature(&w).is_err());
    assert!((f_ex_from_weight(25.0, 3.7) - 92.5).abs() < 1e-12);
}

#[test]
fn scalar_solver_examples() {
    assert!((solve_scalar(|x| x - 1.0, 0.0, 2.0, 1e-14).unwrap().x - 1.0).abs() < 1e-12);
    assert!((solve_scalar(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap().x - 2f64.sqrt()).abs() < 1e-12);
}

fn physical() -> impl Strategy<Value = CcmParams> {
    (
        (500.0f64..1500.0, 800.0f64..1200.0, 1000.0..3000.0, 2000.0..5000.0),
        (0.1f64..1.0, 5e-4..5e-3, 1e5..5e5),
        (250.0f64..350.0, 5.0..80.0, 0.005..0.2, 1.0..500.0),
    )
        .prop_map(|((rho_s, rho_l, cp_s, cp_l), (kappa_l, mu_l, h_m), (t_m, sub, r, f_ex))| CcmParams {
            rho_s,
            rho_l,
            cp_s,
            cp_l,
            kappa_l,
            mu_l,
            h_m,
            t_m,
            t_s: t_m - sub,
            r,
            f_ex,
            mode: SourceMode::Temperature { t_w: t_m + 10.0 },
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn quartic_root_scale_law(p in physical(), over in 1.0f64..100.0, k in 0.1f64..10.0) {
        let p = CcmParams { mode: SourceMode::Temperature { t_w: p.t_m + over }, ..p };
        let scaled = CcmParams { f_ex: p.f_ex * k.powi(4), ..p };
        prop_assert!(rel(u_eq_temperature(&scaled).unwrap(), k * u_eq_temperature(&p).unwrap()) < 1e-12);
    }

    #[test]
    fn power_roots_match_bisection(p in p_power()) {
        let u = u_eq_power(&p).unwrap().velocity;
        prop_assert!(u > 0.0);
        prop_assert!(rel(u, oracle_eq_power(&p)) < 1e-9);
        // Self-consistent sensible flux gives back the equilibrium root, and
        // anything larger cannot exceed it.
        let q = p.sensible_flux(u);
        let back = u_transient_power(&p, q).unwrap().velocity;
        prop_assert!(rel(back, u) < 1e-9);
        prop_assert!(u_transient_power(&p, 1.5 * q).unwrap().velocity <= u * (1.0 + 1e-9));
    }

    #[test]
    fn temperature_roots_match_bisection(p in physical(), over in 1.0f64..100.0, frac in 0.0f64..3.0) {
        let p = CcmParams { mode: SourceMode::Temperature { t_w: p.t_m + over }, ..p };
        let u_eq = u_eq_temperature(&p).unwrap();
        let q = frac * p.sensible_flux(u_eq);
        let u = u_transient_temperature(&p, q).unwrap().velocity;
        prop_assert!(u >= 0.0);
        prop_assert!(rel(u, oracle_transient_temperature(&p, q)) < 1e-9);
        if frac >= 1.0 {
            prop_assert!(u <= u_eq * (1.0 + 1e-9));
        }
    }

    #[test]
    fn equilibrium_power_grows_with_supply(p in p_power(), factor in 1.01f64..5.0) {
        let SourceMode::Power { q_h } = p.mode else { unreachable!() };
        let more = CcmParams { mode: SourceMode::Power { q_h: q_h * factor }, ..p };
        prop_assert!(u_eq_power(&more).unwrap().velocity > u_eq_power(&p).unwrap().velocity);
    }
}

fn p_power() -> impl Strategy<Value = CcmParams> {
    (physical(), 1e3f64..1e6).prop_map(|(p, q_h)| CcmParams { mode: SourceMode::Power { q_h }, ..p })
}
