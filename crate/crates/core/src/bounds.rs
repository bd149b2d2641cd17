//! Fisher information and Cramer-Rao bounds on UE position error.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::grid_nodes;
use crate::geometry::{enumerate_paths, PathSet, Point2, Rect, Scenario};
use crate::likelihood::jacobian;
use crate::measurement::{covariance, Mode, NoiseProfile, ParamVector};
use crate::parallel::map_indexed;

/// Condition number above which the Fisher matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    pub fisher: DMatrix<f64>,
    pub rmse_crb: f64,
    pub mode: Mode,
    /// `(var_x, var_y)` bound for each scatterer, empty in REM mode.
    pub scatterer_variances: Vec<(f64, f64)>,
}

/// `J^T R^-1 J` with the analytic Jacobian.
pub fn fisher(theta: &ParamVector, paths: &PathSet, scenario: &Scenario, profile: &NoiseProfile) -> Result<DMatrix<f64>> {
    let j = jacobian(theta, paths, scenario)?;
    let cov = covariance(profile, paths.n_los(), paths.n_nlos());
    Ok(weighted_gram(&j, &cov))
}

fn weighted_gram(j: &DMatrix<f64>, cov: &[f64]) -> DMatrix<f64> {
    let mut w = j.clone();
    for (mut row, var) in w.row_iter_mut().zip(cov) {
        row /= *var;
    }
    let f = j.transpose() * w;
    // exact symmetry regardless of summation order
    (&f + f.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix through its eigendecomposition.
pub fn invert_fisher(f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(f.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || !(max / min <= MAX_CONDITION) {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::SingularFisher { condition });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())
}

pub fn crb(theta: &ParamVector, paths: &PathSet, scenario: &Scenario, profile: &NoiseProfile) -> Result<CrbReport> {
    let f = fisher(theta, paths, scenario, profile)?;
    let inv = invert_fisher(&f)?;
    let n = theta.scatterers.len();
    let scatterer_variances = (0..n).map(|k| (inv[(2 + k, 2 + k)], inv[(2 + n + k, 2 + n + k)])).collect();
    Ok(CrbReport {
        rmse_crb: (inv[(0, 0)] + inv[(1, 1)]).max(0.0).sqrt(),
        fisher: f,
        mode: theta.mode,
        scatterer_variances,
    })
}

/// Lower bound on UE position RMSE, `sqrt([I^-1]_11 + [I^-1]_22)`.
pub fn rmse_crb(theta: &ParamVector, paths: &PathSet, scenario: &Scenario, profile: &NoiseProfile) -> Result<f64> {
    crb(theta, paths, scenario, profile).map(|r| r.rmse_crb)
}

/// Bound at a UE position with every path the scenario produces there.
pub fn rmse_crb_at(ue: Point2, scenario: &Scenario, profile: &NoiseProfile, mode: Mode) -> Result<f64> {
    let paths = enumerate_paths(scenario, ue)?;
    rmse_crb(&ParamVector::truth(ue, &paths, mode), &paths, scenario, profile)
}

/// Bound from the distance measurements alone with all scatterers known.
pub fn distance_only_bound(ue: Point2, paths: &PathSet, scenario: &Scenario, profile: &NoiseProfile) -> Result<f64> {
    let theta = ParamVector::truth(ue, paths, Mode::Rem);
    let j = jacobian(&theta, paths, scenario)?;
    let n = paths.len();
    let cov = covariance(profile, paths.n_los(), paths.n_nlos());
    let f = weighted_gram(&j.rows(2 * n, n).into_owned(), &cov[2 * n..]);
    let inv = invert_fisher(&f)?;
    Ok((inv[(0, 0)] + inv[(1, 1)]).sqrt())
}

/// UE grid for bound fields: nodes every `spacing` meters over `rect`,
/// skipping nodes closer than `margin` to a wall line or an FE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rect: Rect,
    pub spacing: f64,
    pub margin: f64,
}

impl GridSpec {
    pub fn over(rect: Rect) -> Self {
        Self { rect, spacing: 1.0, margin: 0.5 }
    }

    pub fn nodes(&self) -> Vec<Point2> {
        grid_nodes(&self.rect, self.spacing)
    }

    pub fn excludes(&self, p: &Point2, scenario: &Scenario) -> bool {
        scenario.walls.iter().any(|w| w.signed_distance(p).abs() < self.margin)
            || scenario.fes.iter().any(|q| q.distance(p) < self.margin)
    }
}

/// Values on grid nodes; NaN marks nodes that were excluded or failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub points: Vec<Point2>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn valid_values(&self) -> Vec<f64> {
        self.values.iter().copied().filter(|v| v.is_finite()).collect()
    }

    pub fn value_at(&self, p: &Point2) -> Option<f64> {
        self.points.iter().position(|q| q == p).map(|i| self.values[i])
    }
}

pub fn crb_grid(scenario: &Scenario, grid: &GridSpec, profile: &NoiseProfile, mode: Mode) -> Field {
    let points = grid.nodes();
    let values = map_indexed(&points, |_, p| {
        if grid.excludes(p, scenario) {
            return f64::NAN;
        }
        rmse_crb_at(*p, scenario, profile, mode).unwrap_or(f64::NAN)
    });
    Field { points, values }
}
