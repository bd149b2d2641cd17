//! Damped least-squares refinement on whitened, wrapped residuals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::likelihood::{jacobian, quadratic_form, residual};
use crate::measurement::{Observation, ParamVector};

use super::GapfConfig;

/// Candidate steps that land on a singular configuration before giving up.
const DEGENERATE_RETRIES: usize = 12;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e12;

/// `(residual, r^T R^-1 r)` at `x`.
fn evaluate(z: &Observation, x: &[f64], mode: crate::measurement::Mode, scenario: &Scenario) -> Result<(Vec<f64>, f64)> {
    let theta = ParamVector::from_slice(mode, x);
    let r = residual(z, &theta, scenario)?;
    let c = quadratic_form(&r, &z.covariance_diag);
    if !c.is_finite() {
        return Err(Error::DegenerateGeometry("non-finite residual".into()));
    }
    Ok((r, c))
}

/// Local likelihood ascent from `theta0`. Never returns a point with a lower
/// log-likelihood than `theta0`.
pub fn lm_refine(z: &Observation, theta0: &ParamVector, scenario: &Scenario, cfg: &GapfConfig) -> Result<ParamVector> {
    theta0.check_consistent(&z.paths)?;
    let mode = theta0.mode;
    let mut x = theta0.to_vec();
    let (mut r, mut cost) = evaluate(z, &x, mode, scenario)?;
    let inv_sigma: Vec<f64> = z.covariance_diag.iter().map(|v| 1.0 / v.sqrt()).collect();
    let n = x.len();
    let mut lambda = LAMBDA_INIT;
    let mut degenerate_hits = 0;

    for _ in 0..cfg.lm_max_iters {
        let mut jw = jacobian(&ParamVector::from_slice(mode, &x), &z.paths, scenario)?;
        for (mut row, s) in jw.row_iter_mut().zip(&inv_sigma) {
            row *= *s;
        }
        let rw = DVector::from_iterator(r.len(), r.iter().zip(&inv_sigma).map(|(ri, s)| ri * s));
        let a = jw.transpose() * &jw;
        let g = jw.transpose() * rw;

        let mut step_norm = None;
        while lambda <= LAMBDA_MAX {
            let mut damped: DMatrix<f64> = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-9);
            }
            let Some(delta) = damped.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let cand: Vec<f64> = x.iter().zip(delta.iter()).map(|(xi, di)| xi + di).collect();
            match evaluate(z, &cand, mode, scenario) {
                Ok((r_new, c_new)) if c_new < cost => {
                    x = cand;
                    r = r_new;
                    cost = c_new;
                    lambda = (lambda * 0.1).max(1e-12);
                    step_norm = Some(delta.norm());
                    break;
                }
                Ok(_) => lambda *= 10.0,
                Err(_) => {
                    degenerate_hits += 1;
                    if degenerate_hits > DEGENERATE_RETRIES {
                        return Err(Error::DegenerateGeometry(
                            "refinement kept stepping onto singular configurations".into(),
                        ));
                    }
                    lambda *= 10.0;
                }
            }
        }
        match step_norm {
            // no damping level improves the fit: local optimum
            None => break,
            Some(s) if s < cfg.lm_tolerance => break,
            Some(_) => {}
        }
    }
    Ok(ParamVector::from_slice(mode, &x))
}
