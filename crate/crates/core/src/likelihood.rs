//! Wrapped-residual Gaussian log-likelihood and its derivatives.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{PathKind, PathSet, Scenario};
use crate::measurement::{forward, wrap, Observation, ParamVector};

/// `[m(alpha' - alpha); m(beta' - beta); d' - d]` where `m` wraps into `[-pi, pi)`.
pub fn residual(z: &Observation, theta: &ParamVector, scenario: &Scenario) -> Result<Vec<f64>> {
    let h = forward(theta, &z.paths, scenario)?;
    Ok(residual_from(z, &h))
}

pub(crate) fn residual_from(z: &Observation, h: &[f64]) -> Vec<f64> {
    let n = z.n_paths();
    let mut r = Vec::with_capacity(3 * n);
    r.extend(z.alpha.iter().zip(&h[..n]).map(|(m, p)| wrap(m - p)));
    r.extend(z.beta.iter().zip(&h[n..2 * n]).map(|(m, p)| wrap(m - p)));
    r.extend(z.dist.iter().zip(&h[2 * n..]).map(|(m, p)| m - p));
    r
}

fn check_covariance(cov: &[f64]) -> Result<()> {
    match cov.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        Some(index) => Err(Error::SingularCovariance { index, value: cov[index] }),
        None => Ok(()),
    }
}

/// `-1/2 ln((2 pi)^M |R|)`, the log-likelihood of a zero residual.
pub fn log_normalizer(cov: &[f64]) -> Result<f64> {
    check_covariance(cov)?;
    let m = cov.len() as f64;
    Ok(-0.5 * (m * (2.0 * PI).ln() + cov.iter().map(|v| v.ln()).sum::<f64>()))
}

/// `r^T R^-1 r` for diagonal `R`.
pub fn quadratic_form(r: &[f64], cov: &[f64]) -> f64 {
    r.iter().zip(cov).map(|(ri, v)| ri * ri / v).sum()
}

pub fn log_likelihood(z: &Observation, theta: &ParamVector, scenario: &Scenario) -> Result<f64> {
    let norm = log_normalizer(&z.covariance_diag)?;
    let r = residual(z, theta, scenario)?;
    Ok(norm - 0.5 * quadratic_form(&r, &z.covariance_diag))
}

/// `J^T R^-1 r`, the gradient of the log-likelihood.
pub fn gradient(z: &Observation, theta: &ParamVector, scenario: &Scenario) -> Result<DVector<f64>> {
    check_covariance(&z.covariance_diag)?;
    let r = residual(z, theta, scenario)?;
    let j = jacobian(theta, &z.paths, scenario)?;
    let w = DVector::from_iterator(r.len(), r.iter().zip(&z.covariance_diag).map(|(ri, v)| ri / v));
    Ok(j.transpose() * w)
}

fn degenerate(what: &str, j: usize) -> Error {
    Error::DegenerateGeometry(format!("{what} of path {j} has zero length"))
}

/// Analytic `dh/dtheta`, rows `[alpha; beta; d]`, columns `[p_x, p_y, s_x(1..N), s_y(1..N)]`.
///
/// NLOS AOD does not depend on the UE, so that block is zero.
pub fn jacobian(theta: &ParamVector, paths: &PathSet, scenario: &Scenario) -> Result<DMatrix<f64>> {
    theta.check_consistent(paths)?;
    let n = paths.len();
    let n_s = theta.scatterers.len();
    let mut jac = DMatrix::zeros(3 * n, theta.dim());
    let p = theta.ue;
    for (j, path) in paths.paths().iter().enumerate() {
        let q = scenario.fes[path.fe_index];
        let (ra, rb) = (j, n + j);
        let rd = 2 * n + j;
        match path.kind {
            PathKind::Los => {
                let (dx, dy) = (p.x - q.x, p.y - q.y);
                let r2 = dx * dx + dy * dy;
                if r2 == 0.0 {
                    return Err(degenerate("UE-FE leg", j));
                }
                let r = r2.sqrt();
                jac[(ra, 0)] = dy / r2;
                jac[(ra, 1)] = -dx / r2;
                jac[(rb, 0)] = dy / r2;
                jac[(rb, 1)] = -dx / r2;
                jac[(rd, 0)] = dx / r;
                jac[(rd, 1)] = dy / r;
            }
            PathKind::Nlos => {
                let s = theta.scatterer_for(path)?;
                let (ax, ay) = (s.x - p.x, s.y - p.y);
                let (bx, by) = (s.x - q.x, s.y - q.y);
                let a2 = ax * ax + ay * ay;
                let b2 = bx * bx + by * by;
                if a2 == 0.0 {
                    return Err(degenerate("UE-scatterer leg", j));
                }
                if b2 == 0.0 {
                    return Err(degenerate("FE-scatterer leg", j));
                }
                let (a, b) = (a2.sqrt(), b2.sqrt());
                jac[(ra, 0)] = -ay / a2;
                jac[(ra, 1)] = ax / a2;
                jac[(rd, 0)] = -ax / a;
                jac[(rd, 1)] = -ay / a;
                if n_s > 0 {
                    let i = path.scatterer_index.expect("NLOS path carries a scatterer index");
                    let (cx, cy) = (2 + i, 2 + n_s + i);
                    jac[(ra, cx)] = ay / a2;
                    jac[(ra, cy)] = -ax / a2;
                    jac[(rb, cx)] = by / b2;
                    jac[(rb, cy)] = -bx / b2;
                    jac[(rd, cx)] = ax / a + bx / b;
                    jac[(rd, cy)] = ay / a + by / b;
                }
            }
        }
    }
    Ok(jac)
}

/// Central-difference Jacobian of `forward`; angle rows are differenced through `wrap`.
pub fn jacobian_fd(theta: &ParamVector, paths: &PathSet, scenario: &Scenario, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be > 0, got {h}")));
    }
    // the analytic path also rejects coincident points; mirror that here
    jacobian(theta, paths, scenario)?;
    let n_ang = 2 * paths.len();
    let base = theta.to_vec();
    let mut jac = DMatrix::zeros(3 * paths.len(), base.len());
    for c in 0..base.len() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[c] += h;
        minus[c] -= h;
        let hp = forward(&ParamVector::from_slice(theta.mode, &plus), paths, scenario)?;
        let hm = forward(&ParamVector::from_slice(theta.mode, &minus), paths, scenario)?;
        for row in 0..hp.len() {
            let diff = hp[row] - hm[row];
            let diff = if row < n_ang { wrap(diff) } else { diff };
            jac[(row, c)] = diff / (2.0 * h);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{enumerate_paths, PathDescriptor, Point2, Rect};
    use crate::measurement::{noiseless, synthesize, Mode, NoiseProfile};
    use crate::scenarios;
    use approx::assert_abs_diff_eq;

    fn one_fe(fe: Point2) -> Scenario {
        Scenario { walls: vec![], fes: vec![fe], noise_profile: NoiseProfile::ghz73(), region: Rect::new(-50.0, 50.0, -50.0, 50.0) }
    }

    fn fig4() -> (Scenario, PathSet, Point2) {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = scenarios::SWEEP_UE;
        let ps = enumerate_paths(&sc, ue).unwrap();
        (sc, ps, ue)
    }

    #[test]
    fn residual_zero_at_truth_and_wraps() {
        let (sc, ps, ue) = fig4();
        let th = ParamVector::truth(ue, &ps, Mode::NoRem);
        let z = noiseless(&th, &ps, &sc).unwrap();
        assert!(residual(&z, &th, &sc).unwrap().iter().all(|v| *v == 0.0));

        let mut shifted = z.clone();
        shifted.alpha[0] += 2.0 * PI;
        assert_abs_diff_eq!(residual(&shifted, &th, &sc).unwrap()[0], 0.0, epsilon = 1e-12);

        let mut far = z.clone();
        far.alpha[0] += PI + 0.1;
        assert_abs_diff_eq!(residual(&far, &th, &sc).unwrap()[0], -PI + 0.1, epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_peak_value() {
        let sc = one_fe(Point2::new(0.0, 10.0));
        let ps = PathSet::new(vec![PathDescriptor::los(0)]);
        let th = ParamVector::rem(Point2::new(0.0, 0.0));
        let z = noiseless(&th, &ps, &sc).unwrap();
        let det: f64 = z.covariance_diag.iter().product();
        let want = -0.5 * ((2.0 * PI).powi(3) * det).ln();
        assert_abs_diff_eq!(log_likelihood(&z, &th, &sc).unwrap(), want, epsilon = 1e-12);
        let off = ParamVector::rem(Point2::new(1.0, -2.0));
        assert!(log_likelihood(&z, &off, &sc).unwrap() < want);
    }

    #[test]
    fn log_likelihood_decreases_with_whitened_residual() {
        let (sc, ps, ue) = fig4();
        let th = ParamVector::truth(ue, &ps, Mode::Rem);
        let z = noiseless(&th, &ps, &sc).unwrap();
        // same direction, scaled: residual grows linearly in t for small offsets of d'
        let ll = |t: f64| {
            let mut zz = z.clone();
            zz.dist.iter_mut().for_each(|d| *d += t);
            log_likelihood(&zz, &th, &sc).unwrap()
        };
        assert!(ll(0.1) > ll(0.2));
        assert!(ll(0.2) > ll(0.5));
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let (sc, ps, ue) = fig4();
        let th = ParamVector::truth(ue, &ps, Mode::Rem);
        let mut z = noiseless(&th, &ps, &sc).unwrap();
        z.covariance_diag[4] = 0.0;
        assert_eq!(log_likelihood(&z, &th, &sc), Err(Error::SingularCovariance { index: 4, value: 0.0 }));
    }

    #[test]
    fn los_jacobian_hand_values() {
        let sc = one_fe(Point2::new(0.0, 0.0));
        let ps = PathSet::new(vec![PathDescriptor::los(0)]);
        let j = jacobian(&ParamVector::rem(Point2::new(10.0, 0.0)), &ps, &sc).unwrap();
        assert_eq!(j.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, -0.1]);
        assert_eq!(j.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, -0.1]);
        assert_eq!(j.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
    }

    #[test]
    fn nlos_distance_scatterer_derivative() {
        let sc = one_fe(Point2::new(0.0, 0.0));
        let s = Point2::new(5.0, 0.0);
        let ps = PathSet::new(vec![PathDescriptor::nlos(0, 0, s, None)]);
        let j = jacobian(&ParamVector::no_rem(Point2::new(5.0, 5.0), vec![s]), &ps, &sc).unwrap();
        assert_eq!((j[(2, 2)], j[(2, 3)]), (1.0, -1.0));
        // AOD rows do not depend on the UE
        assert_eq!((j[(1, 0)], j[(1, 1)]), (0.0, 0.0));
    }

    #[test]
    fn rem_jacobian_has_position_columns_only() {
        let (sc, ps, ue) = fig4();
        let rem = jacobian(&ParamVector::truth(ue, &ps, Mode::Rem), &ps, &sc).unwrap();
        let norem = jacobian(&ParamVector::truth(ue, &ps, Mode::NoRem), &ps, &sc).unwrap();
        assert_eq!(rem.ncols(), 2);
        assert_eq!(norem.ncols(), 6);
        assert_eq!(rem.columns(0, 2), norem.columns(0, 2));
        let rem_fd = jacobian_fd(&ParamVector::truth(ue, &ps, Mode::Rem), &ps, &sc, 1e-6).unwrap();
        let norem_fd = jacobian_fd(&ParamVector::truth(ue, &ps, Mode::NoRem), &ps, &sc, 1e-6).unwrap();
        assert_eq!(rem_fd.columns(0, 2), norem_fd.columns(0, 2));
    }

    #[test]
    fn degenerate_points_error() {
        let (sc, ps, ue) = fig4();
        let mut th = ParamVector::truth(ue, &ps, Mode::NoRem);
        th.scatterers[0] = ue;
        assert!(matches!(jacobian(&th, &ps, &sc), Err(Error::DegenerateGeometry(_))));
        assert!(jacobian_fd(&th, &ps, &sc, 1e-6).is_err());
        assert!(jacobian_fd(&ParamVector::truth(ue, &ps, Mode::NoRem), &ps, &sc, 0.0).is_err());
    }

    #[test]
    fn gradient_vanishes_at_truth() {
        let sc = scenarios::corner(2, NoiseProfile::ghz28());
        let ue = Point2::new(11.0, 22.0);
        let ps = enumerate_paths(&sc, ue).unwrap();
        let th = ParamVector::truth(ue, &ps, Mode::NoRem);
        let z = noiseless(&th, &ps, &sc).unwrap();
        assert!(gradient(&z, &th, &sc).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn log_likelihood_ignores_full_turns_in_measured_angles() {
        let (sc, ps, ue) = fig4();
        let th = ParamVector::truth(ue, &ps, Mode::NoRem);
        let z = synthesize(&th, &ps, &sc, 5).unwrap();
        let probe = ParamVector::no_rem(Point2::new(9.0, 33.0), th.scatterers.clone());
        let base = log_likelihood(&z, &probe, &sc).unwrap();
        let mut turned = z.clone();
        turned.alpha[1] -= 4.0 * PI;
        turned.beta[2] += 2.0 * PI;
        assert_abs_diff_eq!(log_likelihood(&turned, &probe, &sc).unwrap(), base, epsilon = 1e-9);
    }
}
