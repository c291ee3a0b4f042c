use gpwave::dynamics::{charge, energy, evolve, nonlinearity_f, rhs_v, u_time_derivative, GpState, Scheme, Solver, SolverConfig};
use gpwave::operators::linear::{propagate, v_inverse_map, v_map};
use gpwave::testing::random_smooth_field;
use gpwave::{Field, Grid, Representation};
use num_complex::Complex;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn rel_l2(a: &Field<f64>, b: &Field<f64>) -> f64 {
    let a = a.in_representation(Representation::Spectral);
    let b = b.in_representation(Representation::Spectral);
    let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.values().iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn small_v(g: &Grid<f64>, amp: f64, seed: u64) -> Field<f64> {
    let v = random_smooth_field(g, seed, 1.0).scale_real(amp).into_spectral();
    // zero mode of v₁ is invisible to u; keep the datum in the range of V⁻¹
    let mut v = v;
    v.values_mut()[0] = c(0.0, 0.0);
    v
}

#[test]
fn nonlinearity_examples() {
    let g = Grid::<f64>::new(2, 16, 10.0).unwrap();
    let zero = Field::zeros(&g, Representation::Physical);
    assert_eq!(nonlinearity_f(&zero, false).unwrap().max_abs(), 0.0);
    let k = 0.3;
    let f = nonlinearity_f(&Field::from_fn(&g, |_| c(k, 0.0)), false).unwrap();
    for v in f.values() {
        assert!((v - c(3.0 * k * k + k * k * k, 0.0)).norm() < 1e-15);
    }
    assert!(nonlinearity_f(&zero.clone().into_spectral(), false).is_err());
    // F(λu) = λ²A + λ³B: recover A, B from λ = 1, 2 and predict λ = 4
    let u = random_smooth_field(&g, 3, 0.5);
    let at = |l: f64| nonlinearity_f(&u.scale_real(l), false).unwrap();
    let (f1, f2, f4) = (at(1.0), at(2.0), at(4.0));
    for i in 0..g.len() {
        let b = (f2.values()[i] - f1.values()[i] * 4.0) / 4.0;
        let a = f1.values()[i] - b;
        let pred = a * 16.0 + b * 64.0;
        assert!((pred - f4.values()[i]).norm() <= 1e-12 * f4.values()[i].norm().max(1.0));
    }
}

#[test]
fn rhs_linear_regime_and_u_form() {
    let g = Grid::<f64>::new(2, 32, 16.0).unwrap();
    assert_eq!(rhs_v(&Field::zeros(&g, Representation::Spectral), true).max_abs(), 0.0);
    let v = small_v(&g, 1e-8, 1);
    let lin = v.zip_map(&v.multiply(&gpwave::operators::symbols::SymbolId::H), |_, hv| hv * c(0.0, -1.0));
    let diff = rhs_v(&v, true).zip_map(&lin, |a, b| a - b);
    // the remainder is quadratic: relative size ~ ‖v‖
    assert!(diff.max_abs() <= 1e-7 * lin.max_abs(), "{} {}", diff.max_abs(), lin.max_abs());

    let v = small_v(&g, 0.1, 2);
    let u = v_map(&v).into_physical();
    let dv_from_u = v_inverse_map(&u_time_derivative(&u, false).unwrap()).field.into_spectral();
    let dv = rhs_v(&v, false);
    let mut a = dv_from_u.values().to_vec();
    let mut b = dv.values().to_vec();
    // the mean of u₁ is carried outside v
    a[0] = c(0.0, 0.0);
    b[0] = c(0.0, 0.0);
    let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    assert!((num / den).sqrt() < 1e-10, "{}", (num / den).sqrt());
}

#[test]
fn linear_step_is_propagation() {
    let g = Grid::<f64>::new(2, 32, 16.0).unwrap();
    let v = small_v(&g, 1.0, 4);
    for scheme in [Scheme::StrangRk4, Scheme::EtdRk2] {
        let mut cfg = SolverConfig::new(0.05).with_scheme(scheme);
        cfg.nonlinear = false;
        let mut solver = Solver::new(&g, cfg).unwrap();
        let out = solver.step(&GpState::from_v(&v), 0.0, 0.05).unwrap();
        assert!(rel_l2(&out.v, &propagate(&v, 0.05)) < 1e-12);
    }
}

#[test]
fn zero_datum_stays_zero() {
    let g = Grid::<f64>::new(2, 16, 10.0).unwrap();
    let ev = evolve(&Field::zeros(&g, Representation::Spectral), 1.0, SolverConfig::new(0.1)).unwrap();
    assert!(ev.u.fields().iter().all(|f| f.max_abs() == 0.0));
}

fn final_v(v: &Field<f64>, t: f64, dt: f64, scheme: Scheme) -> Field<f64> {
    evolve(v, t, SolverConfig::new(dt).with_scheme(scheme)).unwrap().final_state().v.clone()
}

fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn global_order_and_cross_scheme() {
    let g = Grid::<f64>::new(2, 32, 16.0).unwrap();
    let v = small_v(&g, 0.3, 5);
    for scheme in [Scheme::StrangRk4, Scheme::EtdRk2] {
        let reference = final_v(&v, 1.0, 2f64.powi(-9), scheme);
        let dts: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).collect();
        let errs: Vec<f64> = dts.iter().map(|&dt| rel_l2(&final_v(&v, 1.0, dt, scheme), &reference)).collect();
        let slope = log_slope(&dts, &errs);
        assert!(slope >= 2.0, "{scheme:?} slope {slope} errors {errs:?}");
    }
    let a = final_v(&v, 1.0, 1e-3, Scheme::StrangRk4);
    let b = final_v(&v, 1.0, 1e-3, Scheme::EtdRk2);
    assert!(rel_l2(&b, &a) < 1e-6, "{}", rel_l2(&b, &a));
}

#[test]
fn energy_and_charge_of_constants() {
    let g = Grid::<f64>::new(2, 16, 10.0).unwrap();
    let vol = g.volume();
    let zero = Field::zeros(&g, Representation::Physical);
    assert_eq!((energy(&zero), charge(&zero)), (0.0, 0.0));
    let k = 0.2;
    let u = Field::from_fn(&g, |_| c(k, 0.0));
    let w = k * k + 2.0 * k;
    assert!((energy(&u) - vol * w * w / 2.0).abs() < 1e-12 * vol);
    assert!((charge(&u) - vol * w).abs() < 1e-12 * vol);
    let u = Field::from_fn(&g, |_| c(0.0, 0.7));
    assert!((charge(&u) - vol * 0.49).abs() < 1e-12 * vol);
}

#[test]
fn small_gaussian_conserves() {
    let g = Grid::<f64>::new(2, 64, 40.0).unwrap();
    let u0 = Field::from_fn(&g, |x: [f64; 3]| c(0.05 * (-(x[0] * x[0] + x[1] * x[1]) / 8.0).exp(), 0.0));
    let mut solver = Solver::new(&g, SolverConfig::new(1e-2).with_samples((1..10).map(|k| k as f64).collect())).unwrap();
    let ev = solver.evolve(&GpState::from_u(&u0), 0.0, 10.0).unwrap();
    assert!(ev.energy_drift() < 1e-8, "{}", ev.energy_drift());
    assert!(ev.charge_drift() < 1e-8, "{}", ev.charge_drift());
    assert!(rel_l2(&ev.u.get(0).1.clone(), &u0) < 1e-12);
}

#[test]
fn invalid_config_rejected() {
    let g = Grid::<f64>::new(2, 16, 10.0).unwrap();
    assert!(Solver::new(&g, SolverConfig::new(0.0)).is_err());
    assert!(Solver::new(&g, SolverConfig::new(0.1).with_samples(vec![1.0, 0.5])).is_err());
    let mut s = Solver::new(&g, SolverConfig::new(0.1)).unwrap();
    let st = GpState::from_v(&Field::zeros(&g, Representation::Spectral));
    assert!(s.evolve(&st, 1.0, 1.0).is_err());
}

#[test]
fn blow_up_is_reported() {
    let g = Grid::<f64>::new(2, 16, 10.0).unwrap();
    let u0 = Field::from_fn(&g, |_| c(50.0, 0.0));
    let mut s = Solver::new(&g, SolverConfig::new(0.01)).unwrap();
    let err = s.evolve(&GpState::from_u(&u0), 0.0, 5.0).unwrap_err();
    assert!(matches!(err, gpwave::Error::NumericalAbort { .. }), "{err:?}");
}
