//! Staged grid initialization: a sequence of 2D grid searches instead of one
//! exhaustive search over every unknown.

use crate::error::Result;
use crate::geometry::{PathKind, Point2, Rect, Scenario};
use crate::measurement::{atan2q, wrap, Mode, Observation, ParamVector};

use super::GapfConfig;

/// Grid nodes `x_min + i * spacing` covering `rect`, row-major in y then x.
pub fn grid_nodes(rect: &Rect, spacing: f64) -> Vec<Point2> {
    let nx = ((rect.x_max - rect.x_min) / spacing).floor() as usize;
    let ny = ((rect.y_max - rect.y_min) / spacing).floor() as usize;
    let mut out = Vec::with_capacity((nx + 1) * (ny + 1));
    for iy in 0..=ny {
        for ix in 0..=nx {
            out.push(Point2::new(rect.x_min + ix as f64 * spacing, rect.y_min + iy as f64 * spacing));
        }
    }
    out
}

/// Whitened squared residual of path `j` alone; `None` when an angle is undefined.
fn path_cost(z: &Observation, j: usize, ue: Point2, scatterer: Option<Point2>, scenario: &Scenario) -> Option<f64> {
    let n = z.n_paths();
    let path = &z.paths.paths()[j];
    let q = scenario.fes[path.fe_index];
    let (alpha, beta, d) = match path.kind {
        PathKind::Los => (
            atan2q(q.x - ue.x, q.y - ue.y).ok()?,
            atan2q(ue.x - q.x, ue.y - q.y).ok()?,
            ue.distance(&q),
        ),
        PathKind::Nlos => {
            let s = scatterer?;
            (
                atan2q(s.x - ue.x, s.y - ue.y).ok()?,
                atan2q(s.x - q.x, s.y - q.y).ok()?,
                s.distance(&ue) + s.distance(&q),
            )
        }
    };
    let cov = &z.covariance_diag;
    let ra = wrap(z.alpha[j] - alpha);
    let rb = wrap(z.beta[j] - beta);
    let rd = z.dist[j] - d;
    Some(ra * ra / cov[j] + rb * rb / cov[n + j] + rd * rd / cov[2 * n + j])
}

/// Lowest-cost candidate; ties go to the first one.
fn argmin<T: Copy>(candidates: impl Iterator<Item = (T, Option<f64>)>) -> Option<(T, f64)> {
    let mut best: Option<(T, f64)> = None;
    for (c, cost) in candidates {
        if let Some(v) = cost {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((c, v));
            }
        }
    }
    best
}

/// Per-node terms of an NLOS path that depend on the scatterer only.
struct ScattererTable {
    nodes: Vec<Point2>,
    /// AOD residual term, `|s - q|`; `None` when `s` coincides with the FE.
    fixed: Vec<Option<(f64, f64)>>,
}

impl ScattererTable {
    fn new(z: &Observation, j: usize, nodes: &[Point2], scenario: &Scenario) -> Self {
        let n = z.n_paths();
        let q = scenario.fes[z.paths.paths()[j].fe_index];
        let fixed = nodes
            .iter()
            .map(|s| {
                let beta = atan2q(s.x - q.x, s.y - q.y).ok()?;
                let rb = wrap(z.beta[j] - beta);
                Some((rb * rb / z.covariance_diag[n + j], s.distance(&q)))
            })
            .collect();
        Self { nodes: nodes.to_vec(), fixed }
    }

    /// Best scatterer node for path `j` with the UE held at `ue`.
    fn best(&self, z: &Observation, j: usize, ue: Point2) -> Option<(Point2, f64)> {
        let n = z.n_paths();
        let (va, vd) = (z.covariance_diag[j], z.covariance_diag[2 * n + j]);
        argmin(self.nodes.iter().zip(&self.fixed).map(|(s, f)| {
            let cost = f.and_then(|(beta_term, dq)| {
                let alpha = atan2q(s.x - ue.x, s.y - ue.y).ok()?;
                let ra = wrap(z.alpha[j] - alpha);
                let rd = z.dist[j] - (s.distance(&ue) + dq);
                Some(beta_term + ra * ra / va + rd * rd / vd)
            });
            (*s, cost)
        }))
    }
}

/// The two NLOS paths with the smallest measured distance, ties by path index.
pub fn anchor_pair(z: &Observation) -> (usize, usize) {
    let mut nlos: Vec<usize> = (0..z.n_paths()).filter(|&j| !z.paths.paths()[j].is_los()).collect();
    nlos.sort_by(|&a, &b| z.dist[a].total_cmp(&z.dist[b]).then(a.cmp(&b)));
    let (m, n) = (nlos[0], nlos[1]);
    (m.min(n), m.max(n))
}

/// Initial parameter vector from grid searches over the configured search box.
///
/// With a map, only the UE is unknown and one 2D grid over all paths is used.
/// Without a map: if LOS paths exist, the UE is located from them alone and
/// each scatterer is then searched with the UE held fixed. Otherwise the UE
/// and the scatterers of two anchor NLOS paths are searched jointly, then the
/// remaining scatterers one at a time.
pub fn grid_init(z: &Observation, scenario: &Scenario, mode: Mode, cfg: &GapfConfig) -> Result<ParamVector> {
    z.paths.check_sufficient()?;
    let rect = cfg.search_box.unwrap_or_else(|| scenario.bounding_box(cfg.box_padding));
    let nodes = grid_nodes(&rect, cfg.grid_spacing);
    let n_paths = z.n_paths();
    let los: Vec<usize> = (0..n_paths).filter(|&j| z.paths.paths()[j].is_los()).collect();
    let nlos: Vec<usize> = (0..n_paths).filter(|&j| !z.paths.paths()[j].is_los()).collect();
    let degenerate = || crate::error::Error::DegenerateGeometry("no grid node has a defined likelihood".into());

    if mode == Mode::Rem {
        let ue = argmin(nodes.iter().map(|&p| {
            let cost = (0..n_paths).try_fold(0.0, |acc, j| {
                Some(acc + path_cost(z, j, p, z.paths.paths()[j].true_scatterer, scenario)?)
            });
            (p, cost)
        }))
        .ok_or_else(degenerate)?
        .0;
        return Ok(ParamVector::rem(ue));
    }

    let mut scatterers = vec![Point2::default(); nlos.len()];
    let ue;
    if !los.is_empty() {
        ue = argmin(nodes.iter().map(|&p| {
            let cost = los.iter().try_fold(0.0, |acc, &j| Some(acc + path_cost(z, j, p, None, scenario)?));
            (p, cost)
        }))
        .ok_or_else(degenerate)?
        .0;
        for (i, &j) in nlos.iter().enumerate() {
            scatterers[i] = ScattererTable::new(z, j, &nodes, scenario).best(z, j, ue).ok_or_else(degenerate)?.0;
        }
    } else {
        let (m, n) = anchor_pair(z);
        let (tm, tn) = (ScattererTable::new(z, m, &nodes, scenario), ScattererTable::new(z, n, &nodes, scenario));
        // with the UE fixed the two anchor terms are independent, so the joint
        // minimum over (p, s_m, s_n) is the minimum over p of two 2D minima
        let best = argmin(nodes.iter().map(|&p| {
            let pair = tm.best(z, m, p).zip(tn.best(z, n, p));
            ((p, pair), pair.map(|((_, a), (_, b))| a + b))
        }))
        .ok_or_else(degenerate)?;
        let (p, pair) = best.0;
        let ((sm, _), (sn, _)) = pair.expect("argmin only returns scored nodes");
        ue = p;
        let idx = |j: usize| nlos.iter().position(|&k| k == j).expect("anchor is an NLOS path");
        scatterers[idx(m)] = sm;
        scatterers[idx(n)] = sn;
        for (i, &j) in nlos.iter().enumerate() {
            if j == m || j == n {
                continue;
            }
            scatterers[i] = ScattererTable::new(z, j, &nodes, scenario).best(z, j, ue).ok_or_else(degenerate)?.0;
        }
    }
    Ok(ParamVector::no_rem(ue, scatterers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::geometry::{enumerate_paths, PathSet};
    use crate::measurement::{noiseless, synthesize, NoiseProfile};
    use crate::likelihood::log_likelihood;
    use crate::scenarios;

    #[test]
    fn nodes_cover_box_inclusive() {
        let n = grid_nodes(&Rect::new(0.0, 2.0, -1.0, 0.0), 1.0);
        assert_eq!(n.len(), 6);
        assert_eq!(n[0], Point2::new(0.0, -1.0));
        assert_eq!(n[5], Point2::new(2.0, 0.0));
    }

    #[test]
    fn los_only_grid_hits_truth_cell() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = Point2::new(8.0, 35.0);
        let ps = enumerate_paths(&sc, ue).unwrap().subset(&[0]);
        let z = noiseless(&ParamVector::rem(ue), &ps, &sc).unwrap();
        let th = grid_init(&z, &sc, Mode::NoRem, &GapfConfig::default()).unwrap();
        // the UE sits on a grid node, which then has zero residual
        assert_eq!(th.ue, ue);
    }

    #[test]
    fn single_nlos_is_insufficient() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = Point2::new(8.0, 35.0);
        let ps: PathSet = enumerate_paths(&sc, ue).unwrap().subset(&[1]);
        let z = noiseless(&ParamVector::truth(ue, &ps, Mode::NoRem), &ps, &sc).unwrap();
        assert_eq!(
            grid_init(&z, &sc, Mode::NoRem, &GapfConfig::default()),
            Err(Error::InsufficientPaths { n_los: 0, n_nlos: 1 })
        );
    }

    #[test]
    fn fig4_low_noise_init_is_within_one_cell() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = Point2::new(8.0, 35.0);
        let ps = enumerate_paths(&sc, ue).unwrap();
        let truth = ParamVector::truth(ue, &ps, Mode::NoRem);
        let z = crate::measurement::synthesize_scaled(&truth, &ps, &sc, 1, 0.05).unwrap();
        let th = grid_init(&z, &sc, Mode::NoRem, &GapfConfig::default()).unwrap();
        assert!(th.ue.distance(&ue) <= 2f64.sqrt());
        for (a, b) in th.scatterers.iter().zip(&truth.scatterers) {
            assert!(a.distance(b) <= 2f64.sqrt(), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn nlos_only_joint_branch_matches_brute_force() {
        // brute-force 6D search on a coarse box around the truth
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = Point2::new(8.0, 35.0);
        let ps = enumerate_paths(&sc, ue).unwrap().subset(&[1, 2]);
        let truth = ParamVector::truth(ue, &ps, Mode::NoRem);
        let z = synthesize(&truth, &ps, &sc, 11).unwrap();
        let cfg = GapfConfig { search_box: Some(Rect::new(-2.0, 18.0, -2.0, 38.0)), grid_spacing: 4.0, ..GapfConfig::default() };
        let got = grid_init(&z, &sc, Mode::NoRem, &cfg).unwrap();

        let nodes = grid_nodes(&cfg.search_box.unwrap(), 4.0);
        let mut best = f64::NEG_INFINITY;
        for &p in &nodes {
            for &s1 in &nodes {
                for &s2 in &nodes {
                    if let Ok(ll) = log_likelihood(&z, &ParamVector::no_rem(p, vec![s1, s2]), &sc) {
                        best = best.max(ll);
                    }
                }
            }
        }
        let ll = log_likelihood(&z, &got, &sc).unwrap();
        assert!((ll - best).abs() < 1e-9, "{ll} vs {best}");
    }

    #[test]
    fn anchors_are_the_two_shortest_nlos() {
        let sc = scenarios::corner(2, NoiseProfile::ghz73());
        let ue = Point2::new(10.0, 30.0);
        let ps = enumerate_paths(&sc, ue).unwrap();
        let nl: Vec<usize> = (2..6).collect();
        let z = noiseless(&ParamVector::truth(ue, &ps, Mode::NoRem), &ps, &sc).unwrap().subset(&nl);
        let (m, n) = anchor_pair(&z);
        let mut d: Vec<(f64, usize)> = z.dist.iter().copied().zip(0..).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut want = [d[0].1, d[1].1];
        want.sort();
        assert_eq!([m, n], want);
    }
}
