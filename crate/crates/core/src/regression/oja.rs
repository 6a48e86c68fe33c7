//! Oja's update for streaming subspace tracking: the qf retraction applied
//! to the projected sample direction. With lambda = 1 and rank-one inputs the
//! polar subspace update reduces to this rule.

use nalgebra::DVector;

use crate::error::Result;
use crate::geometry::{qf, StiefelPoint};

/// One Oja step: qf(U + s (I - U U') x x' U). A zero direction (x orthogonal
/// to nothing to correct, or s = 0) returns U unchanged.
pub fn oja_update(u: &StiefelPoint, x: &DVector<f64>, s: f64) -> Result<StiefelPoint> {
    let z = u.matrix().tr_mul(x);
    let projected = x - u.matrix() * &z;
    if s == 0.0 || (projected.iter().all(|v| *v == 0.0) || z.iter().all(|v| *v == 0.0)) {
        return Ok(u.clone());
    }
    let mut stepped = u.matrix().clone();
    stepped.ger(s, &projected, &z, 1.0);
    qf(&stepped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::principal_angles;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_stiefel(d: usize, r: usize, rng: &mut ChaCha8Rng) -> StiefelPoint {
        let a = DMatrix::from_fn(d, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        qf(&a).unwrap()
    }

    #[test]
    fn zero_step_and_zero_sample_leave_u_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let u = random_stiefel(6, 2, &mut rng);
        let x = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let same = oja_update(&u, &x, 0.0).unwrap();
        assert_eq!(u.matrix(), same.matrix());
        let zero = DVector::zeros(6);
        let same2 = oja_update(&u, &zero, 0.3).unwrap();
        assert_eq!(u.matrix(), same2.matrix());
    }

    #[test]
    fn in_range_sample_changes_nothing_measurable() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let u = random_stiefel(7, 3, &mut rng);
        let coeffs = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let x = u.matrix() * coeffs;
        let next = oja_update(&u, &x, 0.2).unwrap();
        let angles = principal_angles(&u, &next).unwrap();
        assert!(angles.iter().all(|a| a.abs() < 1e-10));
    }

    #[test]
    fn tracks_a_dominant_two_dimensional_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let d = 8;
        let truth = random_stiefel(d, 2, &mut rng);
        let mut u = random_stiefel(d, 2, &mut rng);
        for t in 0..5000u32 {
            let coeffs = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = DVector::from_fn(d, |_, _| {
                rng.sample::<f64, _>(StandardNormal) * 0.01
            });
            let x = truth.matrix() * coeffs + noise;
            let s = 1.0 / (10.0 + f64::from(t));
            u = oja_update(&u, &x, s).unwrap();
        }
        // A random start sits near pi/2 from the target; with a 1/t schedule
        // the residual noise floor is a few hundredths of a radian.
        let angles = principal_angles(&truth, &u).unwrap();
        let max_angle = angles.iter().cloned().fold(0.0f64, f64::max);
        assert!(max_angle <= 0.1, "max principal angle {max_angle}");
    }
}
