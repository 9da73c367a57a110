use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use weaklg_core::budget::{
    strong_subensemble, strong_subensemble_from_budget, strong_subensemble_real, target_error, wastage_report,
    BudgetInput,
};
use weaklg_core::invasiveness::{measure_invasiveness, predicted_strong, predicted_weak};
use weaklg_core::measurement::{strong_channel, weak_channel_exact, weak_channel_perturbative, PointerModel};
use weaklg_core::quantum::{
    born_weights, evolve, expectation, expectation_direct, max_abs_diff, max_asymmetry, overlap_fidelity, purity,
    spectral_decompose, variance, CMatrix, DensityMatrix, Observable,
};
use weaklg_core::{random, Complex64};

fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn plus() -> DensityMatrix {
    DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap()
}

fn sigma_z() -> Observable {
    Observable::diagonal(&[1.0, -1.0]).unwrap()
}

/// Least-squares slope of log(y) against log(x).
fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_is_orthogonal_complete_and_exact(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = rng_from(seed);
        let h = random::hermitian(dim, &mut rng);
        let obs = spectral_decompose(&h).unwrap();
        let id = CMatrix::identity(dim, dim);
        let mut sum = CMatrix::zeros(dim, dim);
        for (i, p) in obs.projectors().iter().enumerate() {
            for (j, q) in obs.projectors().iter().enumerate() {
                let expected = if i == j { p.clone() } else { CMatrix::zeros(dim, dim) };
                prop_assert!(max_abs_diff(&(p * q), &expected) < 1e-10);
            }
            sum += p;
        }
        prop_assert!(max_abs_diff(&sum, &id) < 1e-10);
        prop_assert!(max_abs_diff(&obs.matrix(), &h) < 1e-9);
        prop_assert!(max_asymmetry(&obs.matrix()) < 1e-12);
        prop_assert!(obs.eigenvalues().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn expectation_two_routes_agree(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = rng_from(seed);
        let obs = random::observable(dim, &mut rng);
        let rho = random::density_matrix(dim, &mut rng);
        let a = expectation(&rho, &obs).unwrap();
        let b = expectation_direct(&rho, &obs).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        prop_assert!(variance(&rho, &obs).unwrap() >= 0.0);
    }

    #[test]
    fn overlap_with_itself_is_purity(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = rng_from(seed);
        let rho = random::density_matrix(dim, &mut rng);
        prop_assert!((overlap_fidelity(&rho, &rho).unwrap() - purity(&rho)).abs() <= 1e-12);
        let p = purity(&rho);
        prop_assert!(p >= 1.0 / dim as f64 - 1e-9 && p <= 1.0 + 1e-9);
        let sigma = random::density_matrix(dim, &mut rng);
        let fwd = overlap_fidelity(&rho, &sigma).unwrap();
        let back = overlap_fidelity(&sigma, &rho).unwrap();
        prop_assert!((fwd - back).abs() < 1e-14);
    }

    #[test]
    fn channels_preserve_trace_and_hermiticity(seed in any::<u64>(), dim in 2usize..5, width in 0.5f64..50.0) {
        let mut rng = rng_from(seed);
        let obs = random::observable(dim, &mut rng);
        let rho = random::density_matrix(dim, &mut rng);
        let pm = PointerModel::new(width).unwrap();
        for out in [
            strong_channel(&rho, &obs).unwrap(),
            weak_channel_exact(&rho, &obs, &pm).unwrap(),
            weak_channel_perturbative(&rho, &obs, &pm).unwrap(),
        ] {
            prop_assert!((out.trace() - 1.0).abs() < 1e-12);
            prop_assert!(max_asymmetry(out.matrix()) < 1e-12);
        }
        let strong = strong_channel(&rho, &obs).unwrap().into_matrix();
        let a = obs.matrix();
        let comm = &a * &strong - &strong * &a;
        prop_assert!(comm.iter().all(|x| x.norm() < 1e-10));
    }

    #[test]
    fn budget_forms_agree(
        m in 1_000u64..100_000_000,
        k in 3u32..40,
        delta_p in 1.0f64..200.0,
        var_a in 0.0f64..4.0,
    ) {
        let eps = target_error(m, k, delta_p);
        let via_eps = strong_subensemble_real(var_a, eps).unwrap();
        let direct = strong_subensemble_from_budget(m, k, delta_p, var_a);
        prop_assert!((via_eps - direct).abs() <= 1e-9 * direct.max(1.0));
        let rounded = strong_subensemble(var_a, eps).unwrap();
        prop_assert!((rounded as f64 - direct).abs() <= 1.0);

        let r = wastage_report(&BudgetInput { m, k, delta_p, var_a, order_unity_threshold: 0.1 }).unwrap();
        prop_assert_eq!(r.m_tot, 2 * u64::from(k) * r.m_s);
        prop_assert!((r.m_tot_real - 2.0 * f64::from(k) * r.m_s_real).abs() <= 1e-9 * r.m_tot_real.max(1.0));
        prop_assert_eq!(r.strong_dominates, delta_p > 2.0 * var_a.sqrt());
    }
}

#[test]
fn purity_preserved_under_random_unitaries() {
    let mut rng = rng_from(17);
    for i in 0..100 {
        let dim = 2 + i % 4;
        let rho = random::density_matrix(dim, &mut rng);
        let u = random::unitary(dim, &mut rng);
        let out = evolve(&rho, &u).unwrap();
        assert!((purity(&out) - purity(&rho)).abs() < 1e-10);
        assert!((out.trace() - 1.0).abs() < 1e-10);
        let before = spectral_decompose(rho.matrix()).unwrap();
        let after = spectral_decompose(out.matrix()).unwrap();
        let spec = |o: &Observable| -> Vec<f64> {
            o.eigenvalues()
                .iter()
                .zip(o.projectors())
                .flat_map(|(a, p)| std::iter::repeat_n(*a, p.trace().re.round() as usize))
                .collect()
        };
        for (x, y) in spec(&before).iter().zip(spec(&after)) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn strong_measurement_reproduces_closed_form() {
    let mut rng = rng_from(23);
    for dim in [2, 3, 5] {
        for _ in 0..100 {
            let obs = random::observable(dim, &mut rng);
            let rho = random::pure_state(dim, &mut rng);
            let measured = measure_invasiveness(&rho, &strong_channel(&rho, &obs).unwrap()).unwrap();
            let predicted = predicted_strong(&rho, &obs).unwrap();
            assert!((measured.i1 - predicted.i1).abs() <= 1e-12);
            assert!((measured.i2 - predicted.i2).abs() <= 1e-12);
            let collision = born_weights(&rho, &obs).unwrap().collision_probability();
            assert!((measured.purity_post - collision).abs() <= 1e-12);
            assert!((measured.fidelity - collision).abs() <= 1e-12);
        }
    }
}

#[test]
fn expansion_gap_scales_as_inverse_fourth_power() {
    let widths = [10.0, 20.0, 40.0, 80.0];
    let gaps: Vec<f64> = widths
        .iter()
        .map(|&w| {
            let pm = PointerModel::new(w).unwrap();
            let e = weak_channel_exact(&plus(), &sigma_z(), &pm).unwrap();
            let p = weak_channel_perturbative(&plus(), &sigma_z(), &pm).unwrap();
            max_abs_diff(e.matrix(), p.matrix())
        })
        .collect();
    let slope = log_log_slope(&widths, &gaps);
    assert!((slope + 4.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn weak_invasiveness_converges_to_leading_order() {
    let mut rng = rng_from(29);
    for _ in 0..20 {
        let obs = random::observable(3, &mut rng);
        let rho = random::pure_state(3, &mut rng);
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        for w in [10.0, 20.0, 40.0] {
            let pm = PointerModel::new(w).unwrap();
            let measured = measure_invasiveness(&rho, &weak_channel_exact(&rho, &obs, &pm).unwrap()).unwrap();
            let predicted = predicted_weak(&rho, &obs, &pm).unwrap();
            c1.push((measured.i1 - predicted.i1).abs() * w.powi(4));
            c2.push((measured.i2 - predicted.i2).abs() * w.powi(4));
        }
        // The Delta_p^-4 coefficient settles as the pointer widens.
        for c in [&c1, &c2] {
            let drift = (c[2] - c[1]).abs() / c[2].max(1e-300);
            assert!(drift < 0.05, "{c:?}");
        }
    }
}

#[test]
fn invasiveness_ratio_approaches_two() {
    let pm = PointerModel::new(100.0).unwrap();
    let rho = plus();
    let r = measure_invasiveness(&rho, &weak_channel_exact(&rho, &sigma_z(), &pm).unwrap()).unwrap();
    assert!((r.i1 / r.i2 - 2.0).abs() <= 0.02);
    assert!((r.i1 / 1e-4 - 1.0).abs() <= 0.01);
}

#[test]
fn pairwise_spread_identity() {
    let mut rng = rng_from(31);
    for dim in 2..7 {
        for _ in 0..20 {
            let obs = random::observable(dim, &mut rng);
            let rho = random::density_matrix(dim, &mut rng);
            let w = born_weights(&rho, &obs).unwrap();
            let lhs = w.pairwise_spread(obs.eigenvalues());
            let rhs = 2.0 * variance(&rho, &obs).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }
}
