//! Weighted least squares via column-pivoted Householder QR of `W^½·H`.

use nalgebra::{DMatrix, DVector};

use super::linear::LinearModel;
use crate::error::{Error, Result};
use crate::power::StateVector;

/// Diagonal entries of R below this fraction of the largest one count as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Minimizer of the weighted residual sum of squares.
pub fn wls_solve(lm: &LinearModel) -> Result<StateVector> {
    let m = lm.len();
    let n = lm.columns;
    if m < n {
        return Err(Error::Unobservable {
            deficient: n - m,
            columns: n,
        });
    }
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut b = DVector::<f64>::zeros(m);
    for (i, row) in lm.rows.iter().enumerate() {
        let w = lm.variances[i].sqrt().recip();
        for &(j, c) in row {
            a[(i, j)] = c * w;
        }
        b[i] = lm.observations[i] * w;
    }

    let qr = a.col_piv_qr();
    let r = qr.r();
    let diag_max = (0..n).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    let deficient = (0..n)
        .filter(|&k| !(r[(k, k)].abs() > RANK_TOLERANCE * diag_max))
        .count();
    if deficient > 0 {
        return Err(Error::Unobservable { deficient, columns: n });
    }

    // x = P · R⁻¹ · Qᵀ b
    let mut qtb = qr.q().tr_mul(&b);
    let r_sq = r.rows(0, n).into_owned();
    if !r_sq.solve_upper_triangular_mut(&mut qtb.rows_mut(0, n)) {
        return Err(Error::Unobservable { deficient: 1, columns: n });
    }
    let mut x = qtb.rows(0, n).into_owned();
    qr.p().inv_permute_rows(&mut x);
    Ok(StateVector::from_values(x.iter().copied().collect()))
}

/// `Hᵀ·W·(z - H·x)`, the gradient of the WRSS up to a factor -2.
pub fn weighted_gradient(lm: &LinearModel, x: &StateVector) -> Vec<f64> {
    let mut g = vec![0.0; lm.columns];
    for i in 0..lm.len() {
        let r = (lm.observations[i] - lm.predict_row(i, x.values())) / lm.variances[i];
        for &(j, c) in &lm.rows[i] {
            g[j] += c * r;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::linear::{build_linear_model, compute_wrss};
    use crate::measurement::{synthesize_measurements, PmuPlacement};
    use crate::power::{solve_power_flow, AdmittanceModel, PowerSystem};

    #[test]
    fn identity_model_returns_observations() {
        let rows = (0..4).map(|j| vec![(j, 1.0)]).collect();
        let z = vec![0.3, -1.2, 2.0, 0.0];
        let lm = LinearModel::new(rows, z.clone(), vec![1e-5, 2.0, 3e-3, 1.0], 4).unwrap();
        let x = wls_solve(&lm).unwrap();
        for (a, b) in x.values().iter().zip(&z) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn toy_model_matches_hand_solved_normal_equations() {
        // H = [[1,0],[0,1],[1,1]], v = [1,1,0.5], z = [1,2,4]
        // G = HᵀWH = [[3,2],[2,3]], HᵀWz = [9,10] → x = (7/5, 12/5)
        let lm = LinearModel::new(
            vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(0, 1.0), (1, 1.0)]],
            vec![1.0, 2.0, 4.0],
            vec![1.0, 1.0, 0.5],
            2,
        )
        .unwrap();
        let x = wls_solve(&lm).unwrap();
        assert!((x.values()[0] - 1.4).abs() < 1e-12);
        assert!((x.values()[1] - 2.4).abs() < 1e-12);
    }

    #[test]
    fn noiseless_readings_recover_power_flow_state() {
        let sys = PowerSystem::ieee118();
        let ybus = AdmittanceModel::build(&sys);
        let exact = solve_power_flow(&sys, 1e-10, 20).unwrap().state;
        let p = PmuPlacement::bundled("ieee118", &sys).unwrap();
        let ms = synthesize_measurements(&sys, std::slice::from_ref(&exact), &p, 0.0, 0)
            .unwrap()
            .with_declared_variance(1e-5);
        let lm = build_linear_model(&ms.instances[0], &ybus).unwrap();
        let x = wls_solve(&lm).unwrap();
        assert!(x.max_abs_diff(&exact) < 1e-10);
        assert!(compute_wrss(&lm, &x) < 1e-12);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(1000))]
        #[test]
        fn perturbations_never_lower_wrss(
            delta in proptest::collection::vec(-1.0f64..1.0, 60),
            scale in -8i32..-1,
        ) {
            let (lm, x) = &*IEEE30_SOLUTION;
            let base = compute_wrss(lm, x);
            let s = 10f64.powi(scale);
            let moved = StateVector::from_values(x.values().iter().zip(&delta).map(|(a, d)| a + s * d).collect());
            proptest::prop_assert!(compute_wrss(lm, &moved) >= base - 1e-12);
        }
    }

    static IEEE30_SOLUTION: std::sync::LazyLock<(LinearModel, StateVector)> = std::sync::LazyLock::new(|| {
        let sys = PowerSystem::ieee30();
        let exact = solve_power_flow(&sys, 1e-10, 20).unwrap().state;
        let p = PmuPlacement::bundled("ieee30", &sys).unwrap();
        let ms = synthesize_measurements(&sys, &[exact], &p, 1e-5, 8).unwrap();
        let lm = build_linear_model(&ms.instances[0], &AdmittanceModel::build(&sys)).unwrap();
        let x = wls_solve(&lm).unwrap();
        (lm, x)
    });

    #[test]
    fn rank_deficiency_is_reported() {
        let lm = LinearModel::new(
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)], vec![(2, 1.0)]],
            vec![1.0, 2.0, 3.0],
            vec![1.0; 3],
            3,
        )
        .unwrap();
        assert!(matches!(wls_solve(&lm), Err(Error::Unobservable { deficient: 1, columns: 3 })));
        let short = LinearModel::new(vec![vec![(0, 1.0)]], vec![1.0], vec![1.0], 4).unwrap();
        assert!(matches!(wls_solve(&short), Err(Error::Unobservable { deficient: 3, .. })));
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let sys = PowerSystem::ieee30();
        let ybus = AdmittanceModel::build(&sys);
        let exact = solve_power_flow(&sys, 1e-10, 20).unwrap().state;
        let p = PmuPlacement::bundled("ieee30", &sys).unwrap();
        let ms = synthesize_measurements(&sys, &[exact], &p, 1e-5, 3).unwrap();
        let lm = build_linear_model(&ms.instances[0], &ybus).unwrap();
        let x = wls_solve(&lm).unwrap();
        let scale = lm
            .rows
            .iter()
            .zip(&lm.variances)
            .flat_map(|(r, v)| r.iter().map(move |&(_, c)| c.abs() / v))
            .fold(0.0, f64::max);
        let g = weighted_gradient(&lm, &x);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(gmax <= 1e-8 * scale, "gradient {gmax} vs scale {scale}");
    }
}
