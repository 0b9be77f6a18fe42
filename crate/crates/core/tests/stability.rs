use std::f64::consts::PI;

use expstab::integrators::{
    step_epbm5, EpbmPhis, EpbmTableau, MethodFamily, MethodSpec, Stepper, StepperState,
};
use expstab::stability::*;
use expstab::{Complex64, ScalarSplitProblem};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn point(k1: f64, k2: f64) -> DahlquistPoint {
    DahlquistPoint::new(k1, k2).unwrap()
}

fn scalar(family: MethodFamily, k1: f64, k2: f64, rho: f64) -> Complex64 {
    let rep = RepartitionAngle::new(rho).unwrap();
    stability_scalar(&MethodSpec::new(family), point(k1, k2), rep).unwrap()
}

const ONE_STEP: [MethodFamily; 5] = [
    MethodFamily::Erk4,
    MethodFamily::Esdc6,
    MethodFamily::Imrk4,
    MethodFamily::Rk4,
    MethodFamily::ExpEuler,
];

#[test]
fn erk4_stability_function_examples() {
    let r = scalar(MethodFamily::Erk4, 7.3, 0.0, 0.0);
    assert!((r - c(0.0, 7.3).exp()).norm() < 1e-13);
    assert!((r.norm() - 1.0).abs() < 1e-13);

    let z = c(0.0, 0.5);
    let taylor = (0..=4).fold((c(0.0, 0.0), c(1.0, 0.0)), |(sum, term), j| {
        (sum + term, term * z / (j + 1) as f64)
    });
    let r = scalar(MethodFamily::Erk4, 0.0, 0.5, 0.0);
    assert!((r - taylor.0).norm() < 1e-15);

    assert!(scalar(MethodFamily::Erk4, 1.0, 0.0, 0.1).norm() < 1.0);
    // At rho = pi/4 the region has already separated along k2 = 0;
    // extended-precision evaluation of the step gives 1.00266594460668.
    let r = scalar(MethodFamily::Erk4, 1.0, 0.0, PI / 4.0);
    assert!((r - c(0.546123751071049, 0.840885155648553)).norm() < 1e-13);
}

#[test]
fn block_methods_have_no_scalar_stability_function() {
    let m = MethodSpec::new(MethodFamily::Epbm5);
    assert!(stability_scalar(&m, point(1.0, 0.0), RepartitionAngle::NONE).is_err());
}

#[test]
fn repartition_angle_domain() {
    assert!(RepartitionAngle::new(-0.1).is_err());
    assert!(RepartitionAngle::new(PI / 2.0).is_err());
    assert!(RepartitionAngle::new(f64::NAN).is_err());
    let r = RepartitionAngle::new(0.0).unwrap();
    assert_eq!(r, RepartitionAngle::NONE);
    assert_eq!(r.epsilon(), 0.0);
    assert!((RepartitionAngle::new(PI / 4.0).unwrap().epsilon() - 1.0).abs() < 1e-15);
}

#[test]
fn repartitioned_eigenvalue_is_rotated_by_rho() {
    for rho in [PI / 2048.0, PI / 64.0, PI / 6.0, 1.2] {
        let rep = RepartitionAngle::new(rho).unwrap();
        for k1 in [0.3, 5.0, 42.0] {
            let (linear, coupling) = rep.split(point(k1, 0.0));
            assert!((linear.arg() - (PI / 2.0 + rho)).abs() < 1e-12);
            assert!(linear.re < 0.0 && coupling.re > 0.0);
            assert!((linear + coupling - c(0.0, k1)).norm() < 1e-12 * k1);
        }
    }
}

#[test]
fn zero_angle_is_bitwise_unmodified() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for family in ONE_STEP {
        let method = MethodSpec::new(family);
        for _ in 0..20 {
            let (k1, k2) = (rng.gen_range(0.0..60.0), rng.gen_range(-5.0..5.0));
            let repartitioned =
                stability_scalar(&method, point(k1, k2), RepartitionAngle::NONE).unwrap();
            let problem = ScalarSplitProblem::new(c(0.0, k1), c(0.0, k2));
            let stepper = Stepper::new(&method, &[c(0.0, k1)], 1.0).unwrap();
            let direct = stepper
                .step(&problem, &StepperState::single(0.0, vec![c(1.0, 0.0)]))
                .unwrap()
                .solution()[0];
            assert_eq!(repartitioned.re.to_bits(), direct.re.to_bits());
            assert_eq!(repartitioned.im.to_bits(), direct.im.to_bits());
        }
    }
}

#[test]
fn exponential_methods_are_neutral_on_the_k2_zero_line() {
    let k1: Vec<f64> = (0..200).map(|i| 60.0 * i as f64 / 199.0).collect();
    for family in [
        MethodFamily::Erk4,
        MethodFamily::Esdc6,
        MethodFamily::ExpEuler,
        MethodFamily::Epbm5,
    ] {
        let grid = grid_from_samples(
            &MethodSpec::new(family),
            k1.clone(),
            vec![0.0],
            RepartitionAngle::NONE,
        )
        .unwrap();
        for row in &grid.abs_r {
            assert!((row[0] - 1.0).abs() < 1e-12, "{family}: {}", row[0]);
        }
        assert_eq!(grid.count(StabilityClass::Stable), 200);
    }
}

#[test]
fn reflection_symmetry() {
    for family in [
        MethodFamily::Erk4,
        MethodFamily::Esdc6,
        MethodFamily::Imrk4,
        MethodFamily::Epbm5,
    ] {
        let method = MethodSpec::new(family);
        for i in 0..20 {
            for j in 0..20 {
                let (k1, k2) = (0.3 + 1.7 * i as f64, -3.0 + 0.31 * j as f64);
                let (a, _) = amplification(&method, point(k1, k2), RepartitionAngle::NONE).unwrap();
                let (b, _) =
                    amplification(&method, point(-k1, -k2), RepartitionAngle::NONE).unwrap();
                assert!(
                    (a - b).abs() <= 1e-12 * a.max(1.0),
                    "{family} ({k1},{k2}): {a} vs {b}"
                );
            }
        }
    }
}

fn power_iteration_radius(m: &DMatrix<Complex64>) -> f64 {
    // ||M^n||^(1/n) converges to the spectral radius.
    let n = 4096;
    let mut power = DMatrix::<Complex64>::identity(m.nrows(), m.ncols());
    let mut log_scale = 0.0;
    for _ in 0..n {
        power = &power * m;
        let norm = power.iter().map(|z| z.norm()).fold(0.0, f64::max);
        log_scale += norm.ln();
        power /= c(norm, 0.0);
    }
    (log_scale / n as f64).exp()
}

#[test]
fn epbm_transfer_matrix_examples() {
    let m = epbm_transfer_matrix(point(0.0, 0.0), RepartitionAngle::NONE).unwrap();
    let ones = vec![c(1.0, 0.0); 5];
    for z in m.apply(&ones) {
        assert!((z - c(1.0, 0.0)).norm() < 1e-14);
    }

    let m = epbm_transfer_matrix(point(0.1, 0.05), RepartitionAngle::NONE).unwrap();
    let radius = m.spectral_radius().unwrap();
    assert!(radius <= 1.0 + 1e-10, "{radius}");
    assert!((radius - power_iteration_radius(m.matrix())).abs() < 1e-3);

    // Inside the unstable band just above k2 = 0.
    let m = epbm_transfer_matrix(point(7.5, 0.02), RepartitionAngle::NONE).unwrap();
    let radius = m.spectral_radius().unwrap();
    assert!(radius > 1.0, "{radius}");
    assert!((radius - power_iteration_radius(m.matrix())).abs() < 1e-3);
}

#[test]
fn epbm_transfer_matrix_reproduces_the_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tableau = EpbmTableau::new();
    for _ in 0..20 {
        let (k1, k2) = (rng.gen_range(0.0..30.0), rng.gen_range(-2.0..2.0));
        let rep = RepartitionAngle::new(rng.gen_range(0.0..0.5)).unwrap();
        let m = epbm_transfer_matrix(point(k1, k2), rep).unwrap();
        let block: Vec<Complex64> = (0..5)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let (linear, coupling) = rep.split(point(k1, k2));
        let problem = ScalarSplitProblem::new(linear, coupling);
        let phis = EpbmPhis::new(tableau.clone(), &[linear], 1.0).unwrap();
        let state = StepperState::Block {
            t: 0.0,
            r: 1.0,
            values: block.iter().map(|z| vec![*z]).collect(),
        };
        let StepperState::Block { values, .. } = step_epbm5(&problem, &state, &phis).unwrap()
        else {
            panic!()
        };
        let predicted = m.apply(&block);
        let scale = values.iter().map(|v| v[0].norm()).fold(0.0, f64::max);
        for (v, p) in values.iter().zip(&predicted) {
            assert!((v[0] - p).norm() <= 1e-12 * scale);
        }
    }
}

#[test]
fn one_by_one_block_reproduces_scalar_function() {
    let method = MethodSpec::new(MethodFamily::Erk4);
    for (k1, k2) in [(3.0, 0.4), (17.0, -1.0), (0.0, 2.0)] {
        let r = stability_scalar(&method, point(k1, k2), RepartitionAngle::NONE).unwrap();
        let m = TransferMatrix::from_rows(&[vec![r]]).unwrap();
        assert_eq!(m.apply(&[c(1.0, 0.0)])[0], r);
        assert_eq!(m.spectral_radius().unwrap(), r.norm());
    }
}

#[test]
fn power_bounded_examples() {
    let id = TransferMatrix::from_matrix(DMatrix::identity(5, 5)).unwrap();
    assert_eq!(
        power_bounded_classification(&id, 1e-10).unwrap().class,
        StabilityClass::Stable
    );

    let mut d = DMatrix::zeros(5, 5);
    d[(0, 0)] = c(2.0, 0.0);
    let d = TransferMatrix::from_matrix(d).unwrap();
    let pb = power_bounded_classification(&d, 1e-10).unwrap();
    assert_eq!(pb.class, StabilityClass::Unstable);
    assert_eq!(pb.spectral_radius, Some(2.0));

    let jordan = DMatrix::from_fn(5, 5, |i, j| {
        if i == j || j == i + 1 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    // Explicit powering: the superdiagonal of J^n grows like n.
    let mut p = jordan.clone();
    for _ in 0..99 {
        p = &p * &jordan;
    }
    assert!((p[(0, 1)].re - 100.0).abs() < 1e-9);
    let jordan = TransferMatrix::from_matrix(jordan).unwrap();
    let pb = power_bounded_classification(&jordan, 1e-10).unwrap();
    assert_eq!(pb.class, StabilityClass::Unstable);

    assert!(power_bounded_classification(&id, 0.0).is_err());

    let bad = TransferMatrix::from_matrix(DMatrix::from_element(2, 2, c(f64::NAN, 0.0))).unwrap();
    let pb = power_bounded_classification(&bad, 1e-10).unwrap();
    assert_eq!(pb.class, StabilityClass::Marginal);
    assert!(pb.spectral_radius.is_none());
}

#[test]
fn classification_bands() {
    assert_eq!(StabilityClass::from_abs(0.5), StabilityClass::Stable);
    assert_eq!(
        StabilityClass::from_abs(1.0 + 5e-11),
        StabilityClass::Stable
    );
    assert_eq!(
        StabilityClass::from_abs(1.0 + 1e-9),
        StabilityClass::Marginal
    );
    assert_eq!(StabilityClass::from_abs(1.01), StabilityClass::Marginal);
    assert_eq!(StabilityClass::from_abs(1.02), StabilityClass::Unstable);
}

#[test]
fn region_grid_shape_and_csv_round_trip() {
    let method = MethodSpec::new(MethodFamily::Erk4);
    assert!(region_grid(
        &method,
        (0.0, 1.0),
        (0.0, 1.0),
        (0, 3),
        RepartitionAngle::NONE
    )
    .is_err());
    assert!(region_grid(
        &method,
        (-1.0, 1.0),
        (0.0, 1.0),
        (3, 3),
        RepartitionAngle::NONE
    )
    .is_err());

    let grid = region_grid(
        &method,
        (0.0, 60.0),
        (0.0, 12.0),
        (31, 7),
        RepartitionAngle::NONE,
    )
    .unwrap();
    assert_eq!(grid.k1.len(), 31);
    assert_eq!(grid.k2.len(), 7);
    assert_eq!(*grid.k1.last().unwrap(), 60.0);
    assert!(grid.k1.windows(2).all(|w| w[0] < w[1]));
    assert!(grid.abs_r.iter().flatten().all(|&r| r >= 0.0));
    for (i, row) in grid.abs_r.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            assert_eq!(grid.class[i][j], StabilityClass::from_abs(r));
        }
    }

    let csv = grid.to_csv();
    assert!(csv.starts_with("k1,k2,absR,class\n"));
    assert_eq!(csv.lines().count(), 1 + 31 * 7);
    let back = StabilityGrid::from_csv(&csv).unwrap();
    assert_eq!(back, grid);
    assert!(StabilityGrid::from_csv("k1,k2\n").is_err());
}

#[test]
fn small_angle_damps_the_k2_zero_line() {
    let rep = RepartitionAngle::new(PI / 2048.0).unwrap();
    let k1: Vec<f64> = (1..=120).map(|i| 0.5 * i as f64).collect();
    for family in [MethodFamily::Erk4, MethodFamily::Esdc6] {
        let grid = grid_from_samples(&MethodSpec::new(family), k1.clone(), vec![0.0], rep).unwrap();
        assert!(grid.abs_r.iter().all(|r| r[0] < 1.0), "{family}");
    }
}

#[test]
fn repartitioned_imex_loses_the_k2_zero_line() {
    let rep = RepartitionAngle::new(PI / 64.0).unwrap();
    let imrk4 = MethodSpec::new(MethodFamily::Imrk4);
    assert!(k2_zero_line_unstable(&imrk4, 5.0, 100, rep).unwrap());
    assert!(!k2_zero_line_unstable(&MethodSpec::new(MethodFamily::Erk4), 5.0, 100, rep).unwrap());
}

#[test]
fn split_angle_orders_methods_by_robustness() {
    let scan = |family| {
        critical_split_angle(&MethodSpec::new(family), PI / 64.0, 60.0, 120)
            .unwrap()
            .unwrap()
    };
    let (erk4, esdc6, epbm5) = (
        scan(MethodFamily::Erk4),
        scan(MethodFamily::Esdc6),
        scan(MethodFamily::Epbm5),
    );
    assert!(epbm5 < erk4 && erk4 < esdc6, "{epbm5} {erk4} {esdc6}");
}

/// Adaptive Simpson on a complex integrand.
fn adaptive_simpson(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn simpson(
        f: &dyn Fn(f64) -> Complex64,
        a: f64,
        fa: Complex64,
        b: f64,
        fb: Complex64,
    ) -> (f64, Complex64, Complex64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (fa + fm * 4.0 + fb) * ((b - a) / 6.0))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> Complex64,
        a: f64,
        fa: Complex64,
        b: f64,
        fb: Complex64,
        m: f64,
        fm: Complex64,
        whole: Complex64,
        tol: f64,
        depth: usize,
    ) -> Complex64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.norm() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

#[test]
fn asymptotic_decay_examples() {
    assert!(asymptotic_decay(&[], &[1.0]).is_err());
    assert!(asymptotic_decay(&[1.0], &[0.0]).is_err());

    let v = asymptotic_decay(&[1.0], &[2.0 * PI, -4.0 * PI]).unwrap();
    assert!(v.iter().all(|x| x.abs() < 1e-15));
    let v = asymptotic_decay(&[1.0], &[PI]).unwrap();
    assert!((v[0] - 2.0 / PI).abs() < 1e-15);

    let ks = [1e2, 1e3, 1e4];
    let closed = asymptotic_decay(&[0.0, 1.0], &ks).unwrap();
    for (&k, &value) in ks.iter().zip(&closed) {
        let f = move |s: f64| c(0.0, k * (s - 1.0)).exp() * s;
        let numeric = adaptive_simpson(&f, 0.0, 1.0, 1e-13).norm();
        assert!(
            (numeric - value).abs() < 1e-10,
            "k={k}: {numeric} vs {value}"
        );
        assert!(k * value <= 2.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_step_symmetry_holds(k1 in -40.0f64..40.0, k2 in -4.0f64..4.0, pick in 0usize..5) {
        let family = ONE_STEP[pick];
        let a = scalar(family, k1, k2, 0.0).norm();
        let b = scalar(family, -k1, -k2, 0.0).norm();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn decay_is_bounded_by_inverse_wavenumber(k in 100.0f64..1e5, deg in 0usize..3) {
        let mut coeffs = vec![0.0; deg + 1];
        coeffs[deg] = 1.0;
        let v = asymptotic_decay(&coeffs, &[k]).unwrap()[0];
        prop_assert!(k * v <= 3.0);
    }

    #[test]
    fn positive_angles_damp_exponential_euler_and_erk4(k1 in 0.01f64..60.0, rho in 0.001f64..0.3) {
        for family in [MethodFamily::Erk4, MethodFamily::ExpEuler] {
            prop_assert!(scalar(family, k1, 0.0, rho).norm() < 1.0);
        }
    }
}
