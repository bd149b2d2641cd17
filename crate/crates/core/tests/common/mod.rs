//! Test-side reference implementations, written independently of the library
//! internals: a direct forward model, a finite-difference Levenberg-Marquardt
//! solver and an exhaustive grid search for the global likelihood maximum.

#![allow(dead_code)]

use std::f64::consts::PI;

use mmloc::geometry::PathKind;
use mmloc::{Observation, Point2, Rect, Scenario};

pub fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Bearing from +y towards +x.
pub fn bearing(from: Point2, to: Point2) -> f64 {
    (to.x - from.x).atan2(to.y - from.y)
}

struct PathMeas {
    los: bool,
    q: Point2,
    scatterer: Option<usize>,
    alpha: f64,
    beta: f64,
    d: f64,
    w: [f64; 3],
}

/// Negative log-likelihood of an observation in NoREM parameterization
/// `[px, py, s1x, .., sNx, s1y, .., sNy]`.
pub struct Problem {
    paths: Vec<PathMeas>,
    pub n_scatterers: usize,
    log_norm: f64,
}

impl Problem {
    pub fn new(z: &Observation, scenario: &Scenario) -> Self {
        let n = z.n_paths();
        let cov = &z.covariance_diag;
        let paths = z
            .paths
            .paths()
            .iter()
            .enumerate()
            .map(|(j, p)| PathMeas {
                los: p.kind == PathKind::Los,
                q: scenario.fes[p.fe_index],
                scatterer: p.scatterer_index,
                alpha: z.alpha[j],
                beta: z.beta[j],
                d: z.dist[j],
                w: [1.0 / cov[j], 1.0 / cov[n + j], 1.0 / cov[2 * n + j]],
            })
            .collect();
        let log_norm = -0.5 * cov.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>();
        Self { paths, n_scatterers: z.paths.n_nlos(), log_norm }
    }

    fn path_cost(m: &PathMeas, p: Point2, s: Option<Point2>) -> f64 {
        let (a, b, d) = if m.los {
            (bearing(p, m.q), bearing(m.q, p), p.distance(&m.q))
        } else {
            let s = s.unwrap();
            (bearing(p, s), bearing(m.q, s), p.distance(&s) + s.distance(&m.q))
        };
        wrap(m.alpha - a).powi(2) * m.w[0] + wrap(m.beta - b).powi(2) * m.w[1] + (m.d - d).powi(2) * m.w[2]
    }

    fn scatterer(x: &[f64], k: usize) -> Point2 {
        let n = (x.len() - 2) / 2;
        Point2::new(x[2 + k], x[2 + n + k])
    }

    /// Whitened squared residual norm.
    pub fn cost(&self, x: &[f64]) -> f64 {
        let p = Point2::new(x[0], x[1]);
        self.paths.iter().map(|m| Self::path_cost(m, p, m.scatterer.map(|k| Self::scatterer(x, k)))).sum()
    }

    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.cost(x)
    }

    /// Whitened residual vector, for the least-squares solver.
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let p = Point2::new(x[0], x[1]);
        let mut r = Vec::with_capacity(3 * self.paths.len());
        for m in &self.paths {
            let (a, b, d) = if m.los {
                (bearing(p, m.q), bearing(m.q, p), p.distance(&m.q))
            } else {
                let s = Self::scatterer(x, m.scatterer.unwrap());
                (bearing(p, s), bearing(m.q, s), p.distance(&s) + s.distance(&m.q))
            };
            r.push(wrap(m.alpha - a) * m.w[0].sqrt());
            r.push(wrap(m.beta - b) * m.w[1].sqrt());
            r.push((m.d - d) * m.w[2].sqrt());
        }
        r
    }

    /// Scatterer guess for NLOS path `m` with the UE at `p`: where the
    /// measured AOA ray from the UE meets the measured AOD ray from the FE.
    fn seed_scatterer(m: &PathMeas, p: Point2) -> Point2 {
        let (ua, ub) = ((m.alpha.sin(), m.alpha.cos()), (m.beta.sin(), m.beta.cos()));
        // p + t ua = q + u ub
        let det = -ua.0 * ub.1 + ua.1 * ub.0;
        if det.abs() > 1e-9 {
            let (rx, ry) = (m.q.x - p.x, m.q.y - p.y);
            let t = (-rx * ub.1 + ry * ub.0) / det;
            let u = (ua.0 * ry - ua.1 * rx) / det;
            if t > 0.0 && u > 0.0 {
                return Point2::new(p.x + t * ua.0, p.y + t * ua.1);
            }
        }
        let t = 0.5 * m.d.max(1.0);
        Point2::new(p.x + t * ua.0, p.y + t * ua.1)
    }

    pub fn seeded(&self, p: Point2) -> Vec<f64> {
        let mut x = vec![0.0; 2 + 2 * self.n_scatterers];
        x[0] = p.x;
        x[1] = p.y;
        for m in &self.paths {
            if let Some(k) = m.scatterer {
                let s = Self::seed_scatterer(m, p);
                x[2 + k] = s.x;
                x[2 + self.n_scatterers + k] = s.y;
            }
        }
        x
    }
}

/// Levenberg-Marquardt with a central-difference Jacobian.
pub fn refine(problem: &Problem, x0: &[f64]) -> Vec<f64> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut cost = problem.cost(&x);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let r = problem.residuals(&x);
        let m = r.len();
        let h = 1e-6;
        let mut jac = vec![vec![0.0; n]; m];
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let (rp, rm) = (problem.residuals(&xp), problem.residuals(&xm));
            for i in 0..m {
                // residual angles may wrap across the branch cut
                let diff = if i % 3 == 2 { rp[i] - rm[i] } else { wrap_scaled(rp[i] - rm[i], problem, i) };
                jac[i][c] = diff / (2.0 * h);
            }
        }
        let mut a = vec![vec![0.0; n]; n];
        let mut g = vec![0.0; n];
        for i in 0..m {
            for p in 0..n {
                g[p] += jac[i][p] * r[i];
                for q in 0..n {
                    a[p][q] += jac[i][p] * jac[i][q];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = a.clone();
            for (p, row) in damped.iter_mut().enumerate() {
                row[p] += lambda * a[p][p].max(1e-9);
            }
            let Some(step) = solve(damped, g.iter().map(|v| -v).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let cand: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi + si).collect();
            let c = problem.cost(&cand);
            if c.is_finite() && c < cost {
                let norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
                x = cand;
                cost = c;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                if norm < 1e-10 {
                    return x;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    x
}

fn wrap_scaled(v: f64, problem: &Problem, i: usize) -> f64 {
    let m = &problem.paths[i / 3];
    let s = m.w[i % 3].sqrt();
    wrap(v / s) * s
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Global maximum of the NoREM log-likelihood: fine UE grid with scatterers
/// seeded from the measured rays, refinement from every local minimum of the
/// seeded cost map and from the best nodes overall.
pub fn global_max(problem: &Problem, rect: Rect, spacing: f64) -> (Vec<f64>, f64) {
    let nx = ((rect.x_max - rect.x_min) / spacing).round() as usize + 1;
    let ny = ((rect.y_max - rect.y_min) / spacing).round() as usize + 1;
    let mut costs = vec![f64::INFINITY; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let p = Point2::new(rect.x_min + ix as f64 * spacing, rect.y_min + iy as f64 * spacing);
            let c = problem.cost(&problem.seeded(p));
            if c.is_finite() {
                costs[iy * nx + ix] = c;
            }
        }
    }
    let mut starts: Vec<usize> = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let c = costs[iy * nx + ix];
            let is_min = (-1i64..=1).all(|dy| {
                (-1i64..=1).all(|dx| {
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                        return true;
                    }
                    costs[jy as usize * nx + jx as usize] >= c
                })
            });
            if is_min && c.is_finite() {
                starts.push(iy * nx + ix);
            }
        }
    }
    starts.sort_by(|a, b| costs[*a].total_cmp(&costs[*b]));
    starts.truncate(30);
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|a, b| costs[*a].total_cmp(&costs[*b]));
    starts.extend(order.into_iter().take(10));
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for k in starts {
        let p = Point2::new(rect.x_min + (k % nx) as f64 * spacing, rect.y_min + (k / nx) as f64 * spacing);
        let x = refine(problem, &problem.seeded(p));
        let ll = problem.log_likelihood(&x);
        if ll > best.1 {
            best = (x, ll);
        }
    }
    best
}
