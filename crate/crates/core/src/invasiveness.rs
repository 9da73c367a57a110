//! Invasiveness of a measurement, measured from state pairs or predicted in
//! closed form for pure initial states.
//!
//! `I1` is the purity drop and `I2` the deficit of the trace overlap with the
//! initial state. For a projective measurement the two coincide. For a weak
//! measurement at leading order `I1 = Var(A) / Delta_p^2` and `I2 = I1 / 2`;
//! the fidelity is then `1 - I1 / 2`, which differs from the purity `1 - I1`
//! beyond zeroth order.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measurement::PointerModel;
use crate::quantum::{born_weights, check_dims, overlap_fidelity, purity, DensityMatrix, Observable};

/// Default invasiveness above which a whole measured ensemble counts as wasted.
pub const DEFAULT_ORDER_UNITY_THRESHOLD: f64 = 0.1;

/// Purity below `1 - PURE_TOL` is treated as mixed.
const PURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvasivenessReport {
    pub purity_ini: f64,
    pub purity_post: f64,
    pub fidelity: f64,
    pub i1: f64,
    pub i2: f64,
}

impl InvasivenessReport {
    fn from_parts(purity_ini: f64, purity_post: f64, fidelity: f64) -> Self {
        Self {
            purity_ini,
            purity_post,
            fidelity,
            i1: purity_ini - purity_post,
            i2: 1.0 - fidelity,
        }
    }
}

/// `I1 = tr rho_ini^2 - tr rho_post^2`, `I2 = 1 - tr(rho_ini rho_post)`.
pub fn measure_invasiveness(rho_ini: &DensityMatrix, rho_post: &DensityMatrix) -> Result<InvasivenessReport> {
    check_dims(rho_ini.dim(), rho_post.dim())?;
    Ok(InvasivenessReport::from_parts(
        purity(rho_ini),
        purity(rho_post),
        overlap_fidelity(rho_ini, rho_post)?,
    ))
}

fn require_pure(rho: &DensityMatrix) -> Result<()> {
    let p = purity(rho);
    if p < 1.0 - PURE_TOL {
        return Err(Error::MixedStateUnsupported { purity: p });
    }
    Ok(())
}

/// Projective measurement: purity and fidelity both equal `sum_i p_i^2`.
pub fn predicted_strong(rho_ini: &DensityMatrix, obs: &Observable) -> Result<InvasivenessReport> {
    require_pure(rho_ini)?;
    let collision = born_weights(rho_ini, obs)?.collision_probability();
    let i = 1.0 - collision;
    Ok(InvasivenessReport {
        purity_ini: 1.0,
        purity_post: collision,
        fidelity: collision,
        i1: i,
        i2: i,
    })
}

/// Weak measurement at leading order in `Delta_p^-2`.
///
/// `I1 = (1 / 2 Delta_p^2) sum_ij p_i p_j (a_i - a_j)^2 = Var(A) / Delta_p^2`
/// and `I2 = I1 / 2`.
pub fn predicted_weak(rho_ini: &DensityMatrix, obs: &Observable, pm: &PointerModel) -> Result<InvasivenessReport> {
    require_pure(rho_ini)?;
    let w = born_weights(rho_ini, obs)?;
    let spread = w.pairwise_spread(obs.eigenvalues());
    let width2 = pm.width() * pm.width();
    let i1 = spread / (2.0 * width2);
    let i2 = spread / (4.0 * width2);
    Ok(InvasivenessReport {
        purity_ini: 1.0,
        purity_post: 1.0 - i1,
        fidelity: 1.0 - i2,
        i1,
        i2,
    })
}

/// Members of a measured ensemble that count as wasted: all of them when the
/// invasiveness is at least `order_unity_threshold`, otherwise the fraction
/// `invasiveness` of them (rounded to the nearest member).
pub fn wasted_resource(ensemble_size: u64, invasiveness: f64, order_unity_threshold: f64) -> Result<u64> {
    if !(0.0..=1.0).contains(&invasiveness) {
        return Err(invalid("invasiveness", format!("{invasiveness} is outside [0, 1]")));
    }
    if !(order_unity_threshold > 0.0 && order_unity_threshold <= 1.0) {
        return Err(invalid(
            "order_unity_threshold",
            format!("{order_unity_threshold} is outside (0, 1]"),
        ));
    }
    if invasiveness >= order_unity_threshold {
        return Ok(ensemble_size);
    }
    Ok((invasiveness * ensemble_size as f64).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{strong_channel, weak_channel_exact};
    use crate::quantum::variance;
    use crate::random;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }
    fn z() -> Observable {
        Observable::diagonal(&[1.0, -1.0]).unwrap()
    }
    fn pure_with(p0: f64) -> DensityMatrix {
        DensityMatrix::pure(&[c(p0.sqrt()), c((1.0 - p0).sqrt())]).unwrap()
    }

    #[test]
    fn no_measurement_no_invasion() {
        let rho = pure_with(0.3);
        let r = measure_invasiveness(&rho, &rho).unwrap();
        assert!(r.i1.abs() < 1e-15 && r.i2.abs() < 1e-15);
    }

    #[test]
    fn plus_to_maximally_mixed() {
        let r = measure_invasiveness(&pure_with(0.5), &DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        assert!((r.i1 - 0.5).abs() < 1e-12);
        assert!((r.i2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plus_through_exact_weak_channel() {
        let rho = pure_with(0.5);
        let post = weak_channel_exact(&rho, &z(), &PointerModel::new(10.0).unwrap()).unwrap();
        let r = measure_invasiveness(&rho, &post).unwrap();
        assert!((r.i1 - (1.0 - (-0.02f64).exp()) / 2.0).abs() < 1e-13);
        assert!((r.i2 - (1.0 - (-0.01f64).exp()) / 2.0).abs() < 1e-13);
        assert!((r.i1 - 0.0099007).abs() < 1e-7);
        assert!((r.i2 - 0.004_975_1).abs() < 1e-7);
    }

    #[test]
    fn predicted_strong_examples() {
        for (p0, expected) in [(1.0, 0.0), (0.5, 0.5), (0.8, 0.32)] {
            let r = predicted_strong(&pure_with(p0), &z()).unwrap();
            assert!((r.i1 - expected).abs() < 1e-12, "{p0}");
            assert_eq!(r.i1, r.i2);
        }
    }

    #[test]
    fn predicted_weak_examples() {
        let pm = PointerModel::new(10.0).unwrap();
        let r = predicted_weak(&pure_with(0.5), &z(), &pm).unwrap();
        assert!((r.i1 - 0.01).abs() < 1e-15);
        assert!((r.i2 - 0.005).abs() < 1e-15);
        let r = predicted_weak(&pure_with(1.0), &z(), &pm).unwrap();
        assert_eq!((r.i1, r.i2), (0.0, 0.0));
    }

    #[test]
    fn pairwise_spread_is_twice_variance() {
        let rho = pure_with(0.8);
        let w = born_weights(&rho, &z()).unwrap();
        assert!((w.pairwise_spread(z().eigenvalues()) - 1.28).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for dim in [2, 3, 5] {
            for _ in 0..20 {
                let obs = random::observable(dim, &mut rng);
                let rho = random::pure_state(dim, &mut rng);
                let w = born_weights(&rho, &obs).unwrap();
                let lhs = w.pairwise_spread(obs.eigenvalues());
                let rhs = 2.0 * variance(&rho, &obs).unwrap();
                assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0));
            }
        }
    }

    #[test]
    fn strong_measurement_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for dim in [2, 3] {
            for _ in 0..100 {
                let obs = random::observable(dim, &mut rng);
                let rho = random::pure_state(dim, &mut rng);
                let measured = measure_invasiveness(&rho, &strong_channel(&rho, &obs).unwrap()).unwrap();
                let predicted = predicted_strong(&rho, &obs).unwrap();
                assert!((measured.i1 - predicted.i1).abs() < 1e-12);
                assert!((measured.i2 - predicted.i2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_input_rejected_by_closed_forms() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(
            predicted_strong(&mixed, &z()),
            Err(Error::MixedStateUnsupported { .. })
        ));
        let pm = PointerModel::new(10.0).unwrap();
        assert!(matches!(
            predicted_weak(&mixed, &z(), &pm),
            Err(Error::MixedStateUnsupported { .. })
        ));
        // The empirical route still accepts mixed states.
        assert!(measure_invasiveness(&mixed, &mixed).is_ok());
    }

    #[test]
    fn wasted_resource_rule() {
        assert_eq!(wasted_resource(5000, 0.5, 0.1).unwrap(), 5000);
        assert_eq!(wasted_resource(250_000, 0.01, 0.1).unwrap(), 2500);
        assert_eq!(wasted_resource(12345, 0.0, 0.1).unwrap(), 0);
        assert_eq!(wasted_resource(1000, 0.1, 0.1).unwrap(), 1000);
        assert!(wasted_resource(10, 1.5, 0.1).is_err());
        assert!(wasted_resource(10, -0.1, 0.1).is_err());
        assert!(wasted_resource(10, 0.5, 0.0).is_err());
    }
}
