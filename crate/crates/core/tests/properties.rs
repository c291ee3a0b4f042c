use gpwave::analysis::{decay_fit, Region, RegionId};
use gpwave::datum::gaussian_datum;
use gpwave::io::{decode_snapshot, encode_snapshot};
use gpwave::norms::{besov_norm, lp_norm, sobolev_norm};
use gpwave::operators::linear::{propagate, v_inverse_map, v_map};
use gpwave::operators::phase::{angle_identity, h_addition_identity, norm, sub};
use gpwave::operators::symbols::{dispersion, SymbolId};
use gpwave::testing::random_field;
use gpwave::verify::{check, Status, TOLERANCES};
use gpwave::{Field64, Grid64, Representation};
use proptest::prelude::*;

fn rel_err(a: &Field64, b: &Field64) -> f64 {
    let a = a.in_representation(Representation::Spectral);
    let b = b.in_representation(Representation::Spectral);
    let d = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    d / b.max_abs()
}

fn grid(dim: usize) -> Grid64 {
    if dim == 2 {
        Grid64::new(2, 32, 12.0).unwrap()
    } else {
        Grid64::new(3, 16, 8.0).unwrap()
    }
}

fn vec3(r: f64, th: f64, z: f64) -> [f64; 3] {
    let s = (1.0 - z * z).sqrt();
    [r * s * th.cos(), r * s * th.sin(), r * z]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projections_and_diagonalization(seed in any::<u64>(), dim in 2usize..=3) {
        let g = grid(dim);
        let f = random_field(&g, seed).into_spectral();
        let q = f.multiply(&SymbolId::Q);
        prop_assert!(rel_err(&(&f.multiply(&SymbolId::P) + &q), &f) < 1e-12);
        prop_assert!(rel_err(&f.multiply(&SymbolId::U).multiply(&SymbolId::U), &q) < 1e-12);
        let m = v_inverse_map(&f);
        // the dropped mean is the mean of Re f
        let mean = f.values()[0].re / g.volume();
        prop_assert!((m.dropped_mean - mean).abs() <= 1e-12 * f.max_abs() / g.volume());
        let mut back = v_map(&m.field);
        back.values_mut()[0].re += m.dropped_mean * g.volume();
        prop_assert!(rel_err(&back, &f) < 1e-12);
    }

    #[test]
    fn free_flow_is_a_unitary_group(seed in any::<u64>(), s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let f = random_field(&grid(2), seed).into_spectral();
        let two_steps = propagate(&propagate(&f, s), t);
        prop_assert!(rel_err(&two_steps, &propagate(&f, s + t)) < 1e-10);
        let l2 = sobolev_norm(&f, 0.0, false);
        prop_assert!((sobolev_norm(&propagate(&f, t), 0.0, false) - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn dispersion_addition_identity(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let (lhs, rhs) = h_addition_identity(a, b);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (dispersion(a + b) + dispersion(a) + dispersion(b)));
        // superadditive: the right side is positive
        prop_assert!(rhs > 0.0);
    }

    #[test]
    fn angle_identity_holds(
        r1 in 1e-2f64..1e2, t1 in 0.0f64..6.28, z1 in -1.0f64..1.0,
        r2 in 1e-2f64..1e2, t2 in 0.0f64..6.28, z2 in -1.0f64..1.0,
    ) {
        let (xi, eta) = (vec3(r1, t1, z1), vec3(r2, t2, z2));
        prop_assume!(norm(&sub(&eta, &xi)) > 1e-6 * r1.max(r2));
        let (lhs, rhs) = angle_identity(&xi, &eta);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (r1 * r1 + r2 * r2));
    }

    #[test]
    fn vector_difference_bounds(
        r in 1e-3f64..1e3, u in 0.0f64..1.0,
        t1 in 0.0f64..6.28, z1 in -1.0f64..1.0, t2 in 0.0f64..6.28, z2 in -1.0f64..1.0,
    ) {
        let s = r * u;
        let (a, b) = (vec3(1.0, t1, z1), vec3(1.0, t2, z2));
        let lhs = norm(&[r * a[0] - s * b[0], r * a[1] - s * b[1], r * a[2] - s * b[2]]);
        let rhs = (r - s) + s * norm(&sub(&a, &b));
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        prop_assert!(lhs >= rhs * std::f64::consts::FRAC_1_SQRT_2 * (1.0 - 1e-12));
    }

    #[test]
    fn resonant_split_refines_sign_regions(
        c in 1e-2f64..1e2, r in 1e-2f64..1e2, th in 0.0f64..6.28, delta in 0.01f64..0.1,
    ) {
        let xi = [c, 0.0, 0.0];
        let eta = [r * th.cos(), r * th.sin(), 0.0];
        let inside = |id| Region::new(id, delta).unwrap().contains(&xi, &eta);
        prop_assert!(inside(RegionId::Dplus) || inside(RegionId::Dzero) || inside(RegionId::Dminus));
        let far = inside(RegionId::DF) || inside(RegionId::DX);
        if inside(RegionId::Dplus) {
            prop_assert!(far || inside(RegionId::DTplus));
        }
        let lambda = norm(&eta) + norm(&sub(&eta, &xi)) - c;
        if inside(RegionId::Dzero) && lambda >= delta * c.powi(3) / (1.0 + c * c) {
            prop_assert!(far || inside(RegionId::DTzero));
        }
    }

    #[test]
    fn power_laws_are_fitted_exactly(e in -3.0f64..1.0, amp in 1e-6f64..1e6, t0 in 0.5f64..5.0) {
        let times: Vec<f64> = (0..12).map(|k| t0 * 1.2f64.powi(k)).collect();
        let values: Vec<f64> = times.iter().map(|t| amp * t.powf(e)).collect();
        let fit = decay_fit(&times, &values).unwrap();
        prop_assert!((fit.exponent - e).abs() < 1e-9);
        prop_assert!((fit.intercept - amp.ln()).abs() < 1e-8);
    }

    #[test]
    fn snapshots_roundtrip(seed in any::<u64>(), dim in 2usize..=3, t in -1e3f64..1e3) {
        let f = random_field(&grid(dim), seed);
        let (back, t_back) = decode_snapshot::<f64>(&encode_snapshot(&f, t)).unwrap();
        prop_assert_eq!(t_back, t);
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn norms_are_homogeneous(seed in any::<u64>(), k in 0.01f64..100.0) {
        let f = random_field(&grid(2), seed);
        let g = f.scale_real(k);
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            let (a, b) = (lp_norm(&f, p).unwrap(), lp_norm(&g, p).unwrap());
            prop_assert!((b - k * a).abs() <= 1e-12 * b);
        }
        let (a, b) = (besov_norm(&f, 1.0, 1.0, 1.0).unwrap(), besov_norm(&g, 1.0, 1.0, 1.0).unwrap());
        prop_assert!((b - k * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn gaussian_mass(a in 0.01f64..10.0, w in 1.5f64..3.0) {
        let g = Grid64::new(2, 64, 40.0).unwrap();
        let f = gaussian_datum(&g, a, w, [0.0; 3], [0.3, 0.0, 0.0]).unwrap();
        let exact = a * (std::f64::consts::PI * w * w).sqrt();
        prop_assert!((sobolev_norm(&f, 0.0, false) - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn check_status_matches_its_bound(idx in 0usize..TOLERANCES.len(), m in -10.0f64..10.0) {
        let t = &TOLERANCES[idx];
        let r = check(t.id, m, "");
        prop_assert_eq!(r.status == Status::Pass, t.expected.admits(m, t.tolerance));
    }
}
