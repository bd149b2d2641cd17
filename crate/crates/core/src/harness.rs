//! Experiment drivers: Monte-Carlo RMSE against the bound, beamwidth sweeps,
//! CDFs and fields of the bound over UE grids, and scatterer maps built
//! along a UE trajectory. All results are ordered by input index, so output
//! does not depend on scheduling.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::{crb_grid, distance_only_bound, rmse_crb, Field, GridSpec};
use crate::error::{Error, Result};
use crate::estimator::{estimate, GapfConfig};
use crate::geometry::{enumerate_paths, PathSet, Point2, Scenario};
use crate::measurement::{synthesize_scaled, Mode, NoiseProfile, ParamVector};
use crate::parallel::map_indexed;
use crate::rng;

/// `sqrt(sum |p - p_hat|^2 / N)` over the given estimates.
pub fn rmse(truth: Point2, estimates: &[Point2]) -> f64 {
    let n = estimates.len() as f64;
    (estimates.iter().map(|e| squared_error(truth, *e)).sum::<f64>() / n).sqrt()
}

pub fn squared_error(truth: Point2, estimate: Point2) -> f64 {
    let d = estimate.sub(&truth);
    d.x * d.x + d.y * d.y
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    /// `None` when the trial failed.
    pub estimate: Option<Point2>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub rmse_est: f64,
    pub rmse_crb: f64,
    pub n_trials: usize,
    pub failures: usize,
    pub seed: u64,
    pub mean_estimate: Point2,
    pub trials: Vec<TrialOutcome>,
}

impl McResult {
    pub fn successful_estimates(&self) -> Vec<Point2> {
        self.trials.iter().filter_map(|t| t.estimate).collect()
    }
}

/// Monte-Carlo RMSE setup. `paths` defaults to every path at `ue`;
/// `noise_scale` multiplies the noise draws (0 gives noiseless trials).
#[derive(Debug, Clone)]
pub struct McSetup<'a> {
    pub scenario: &'a Scenario,
    pub ue: Point2,
    pub paths: Option<PathSet>,
    pub mode: Mode,
    pub cfg: &'a GapfConfig,
    pub n_trials: usize,
    pub seed: u64,
    pub noise_scale: f64,
}

impl<'a> McSetup<'a> {
    pub fn new(scenario: &'a Scenario, ue: Point2, mode: Mode, cfg: &'a GapfConfig, n_trials: usize, seed: u64) -> Self {
        Self { scenario, ue, paths: None, mode, cfg, n_trials, seed, noise_scale: 1.0 }
    }

    pub fn run(&self) -> Result<McResult> {
        let paths = match &self.paths {
            Some(p) => p.clone(),
            None => enumerate_paths(self.scenario, self.ue)?,
        };
        paths.check_sufficient()?;
        let truth_noise = ParamVector::truth(self.ue, &paths, Mode::NoRem);
        let truth_mode = ParamVector::truth(self.ue, &paths, self.mode);
        let bound = rmse_crb(&truth_mode, &paths, self.scenario, &self.scenario.noise_profile)?;
        let idx: Vec<usize> = (0..self.n_trials).collect();
        let trials = map_indexed(&idx, |_, &t| {
            let run = || -> Result<Point2> {
                let noise_seed = rng::derive(self.seed, &[rng::tag::TRIAL_NOISE, t as u64]);
                let z = synthesize_scaled(&truth_noise, &paths, self.scenario, noise_seed, self.noise_scale)?;
                let cfg = GapfConfig {
                    rng_seed: rng::derive(self.seed, &[rng::tag::TRIAL_ESTIMATOR, t as u64]),
                    ..self.cfg.clone()
                };
                Ok(estimate(&z, self.scenario, self.mode, &cfg)?.theta_hat.ue)
            };
            match run() {
                Ok(p) => TrialOutcome { trial: t, estimate: Some(p), error: None },
                Err(e) => TrialOutcome { trial: t, estimate: None, error: Some(e.to_string()) },
            }
        });
        let ok: Vec<Point2> = trials.iter().filter_map(|t| t.estimate).collect();
        if ok.is_empty() {
            return Err(Error::AllTrialsFailed { n_trials: self.n_trials });
        }
        let n = ok.len() as f64;
        let mean_estimate = Point2::new(ok.iter().map(|p| p.x).sum::<f64>() / n, ok.iter().map(|p| p.y).sum::<f64>() / n);
        Ok(McResult {
            rmse_est: rmse(self.ue, &ok),
            rmse_crb: bound,
            n_trials: self.n_trials,
            failures: self.n_trials - ok.len(),
            seed: self.seed,
            mean_estimate,
            trials,
        })
    }
}

pub fn mc_rmse(scenario: &Scenario, ue: Point2, mode: Mode, cfg: &GapfConfig, n_trials: usize, seed: u64) -> Result<McResult> {
    McSetup::new(scenario, ue, mode, cfg, n_trials, seed).run()
}

/// Every non-empty subset of `0..n`, smallest first, then lexicographic.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

/// Label such as `LOS1+NLOS2` for a subset of a path set.
pub fn subset_label(paths: &PathSet, subset: &[usize]) -> String {
    let mut parts = Vec::new();
    for &j in subset {
        let p = &paths.paths()[j];
        parts.push(match p.scatterer_index {
            None => format!("LOS{}", p.fe_index + 1),
            Some(s) => format!("NLOS{}", s + 1),
        });
    }
    parts.join("+")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub id: String,
    pub subset: Vec<usize>,
    pub mode: Mode,
    /// Bound per sigma value; NaN where the subset is unidentifiable.
    pub rmse_crb: Vec<f64>,
    /// Estimator RMSE per sigma value when Monte-Carlo trials were requested.
    pub rmse_mc: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sigma_angle_values: Vec<f64>,
    pub sigma_d: f64,
    pub curves: Vec<SweepCurve>,
    /// Known-scatterer distance-only bound for every subset, in `curves` order of first appearance.
    pub distance_only: Vec<(String, f64)>,
}

impl SweepResult {
    pub fn curve(&self, id: &str) -> Option<&SweepCurve> {
        self.curves.iter().find(|c| c.id == id)
    }
}

/// Optional Monte-Carlo companion to a sweep.
#[derive(Debug, Clone)]
pub struct SweepMc {
    pub cfg: GapfConfig,
    pub n_trials: usize,
    pub seed: u64,
}

/// Bound (and optionally estimator RMSE) versus tied angular noise for each
/// path subset and mode. `sigma_values` in radians, `sigma_d` in meters.
pub fn beamwidth_sweep(
    scenario: &Scenario,
    ue: Point2,
    sigma_values: &[f64],
    sigma_d: f64,
    subsets: &[Vec<usize>],
    modes: &[Mode],
    mc: Option<&SweepMc>,
) -> Result<SweepResult> {
    let paths = enumerate_paths(scenario, ue)?;
    if let Some(bad) = subsets.iter().flatten().find(|&&j| j >= paths.len()) {
        return Err(Error::InvalidParameter(format!("path index {bad} out of range ({} paths)", paths.len())));
    }
    let mut curves = Vec::new();
    let mut distance_only = Vec::new();
    for subset in subsets {
        let sub = paths.subset(subset);
        let label = subset_label(&paths, subset);
        let d_only = distance_only_bound(ue, &sub, scenario, &NoiseProfile::tied(1.0, sigma_d)).unwrap_or(f64::NAN);
        distance_only.push((label.clone(), d_only));
        for &mode in modes {
            let theta = ParamVector::truth(ue, &sub, mode);
            let cells: Vec<(f64, Option<f64>)> = map_indexed(sigma_values, |k, &sigma| {
                let profile = NoiseProfile::tied(sigma, sigma_d);
                let bound = rmse_crb(&theta, &sub, scenario, &profile).unwrap_or(f64::NAN);
                let est = mc.filter(|_| bound.is_finite()).map(|m| {
                    let sc = Scenario { noise_profile: profile.clone(), ..scenario.clone() };
                    let setup = McSetup {
                        paths: Some(sub.clone()),
                        ..McSetup::new(&sc, ue, mode, &m.cfg, m.n_trials, rng::derive(m.seed, &[k as u64]))
                    };
                    setup.run().map(|r| r.rmse_est).unwrap_or(f64::NAN)
                });
                (bound, est)
            });
            curves.push(SweepCurve {
                id: format!("{label}/{mode}"),
                subset: subset.clone(),
                mode,
                rmse_crb: cells.iter().map(|c| c.0).collect(),
                rmse_mc: mc.map(|_| cells.iter().map(|c| c.1.unwrap_or(f64::NAN)).collect()),
            });
        }
    }
    Ok(SweepResult { sigma_angle_values: sigma_values.to_vec(), sigma_d, curves, distance_only })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfCurve {
    pub id: String,
    pub profile: String,
    pub mode: Mode,
    /// Sorted `(rmse, cumulative probability)` pairs.
    pub points: Vec<(f64, f64)>,
    pub median: f64,
}

impl CdfCurve {
    pub fn from_values(id: String, profile: String, mode: Mode, mut values: Vec<f64>) -> Self {
        values.retain(|v| v.is_finite());
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let points = values.iter().enumerate().map(|(i, v)| (*v, (i + 1) as f64 / n as f64)).collect();
        Self { id, profile, mode, points, median: median_sorted(&values) }
    }

    /// Empirical CDF evaluated at `x`.
    pub fn prob_at(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|(v, _)| *v <= x);
        k as f64 / self.points.len() as f64
    }

    /// True when this CDF is at least `other`'s everywhere (lower RMSE values).
    pub fn dominates(&self, other: &CdfCurve) -> bool {
        self.points.iter().chain(&other.points).all(|(x, _)| self.prob_at(*x) >= other.prob_at(*x))
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// One empirical CDF of the bound over the grid per (profile, mode).
pub fn cdf_curve(scenario: &Scenario, grid: &GridSpec, profiles: &[NoiseProfile], modes: &[Mode]) -> Vec<CdfCurve> {
    let mut out = Vec::new();
    for profile in profiles {
        for &mode in modes {
            let field = crb_grid(scenario, grid, profile, mode);
            out.push(CdfCurve::from_values(format!("{}/{mode}", profile.label), profile.label.clone(), mode, field.values));
        }
    }
    out
}

/// Bound without the map minus bound with it, per grid node.
pub fn delta_field(scenario: &Scenario, grid: &GridSpec, profile: &NoiseProfile) -> Field {
    let no_rem = crb_grid(scenario, grid, profile, Mode::NoRem);
    let rem = crb_grid(scenario, grid, profile, Mode::Rem);
    Field {
        values: no_rem.values.iter().zip(&rem.values).map(|(a, b)| a - b).collect(),
        points: no_rem.points,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemEntry {
    pub scatterer: Point2,
    pub ue: Point2,
    pub point_index: usize,
    /// Index of the path within the point's path set.
    pub path_id: usize,
    pub fe_index: usize,
    pub wall_index: Option<usize>,
    pub true_scatterer: Point2,
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemMap {
    pub entries: Vec<RemEntry>,
    /// `(trajectory index, reason)` for points whose estimate failed.
    pub failures: Vec<(usize, String)>,
}

/// Estimates scatterers without a map at each trajectory point and stores
/// them with the measured parameters of their path.
pub fn build_rem_map(scenario: &Scenario, trajectory: &[Point2], cfg: &GapfConfig, seed: u64) -> RemMap {
    let per_point = map_indexed(trajectory, |i, &ue| -> Result<Vec<RemEntry>> {
        let paths = enumerate_paths(scenario, ue)?;
        paths.check_sufficient()?;
        let truth = ParamVector::truth(ue, &paths, Mode::NoRem);
        let z = synthesize_scaled(&truth, &paths, scenario, rng::derive(seed, &[rng::tag::REM_POINT, i as u64, 0]), 1.0)?;
        let cfg = GapfConfig { rng_seed: rng::derive(seed, &[rng::tag::REM_POINT, i as u64, 1]), ..cfg.clone() };
        let rep = estimate(&z, scenario, Mode::NoRem, &cfg)?;
        Ok(paths
            .paths()
            .iter()
            .enumerate()
            .filter_map(|(j, p)| {
                let k = p.scatterer_index?;
                Some(RemEntry {
                    scatterer: rep.theta_hat.scatterers[k],
                    ue,
                    point_index: i,
                    path_id: j,
                    fe_index: p.fe_index,
                    wall_index: p.wall_index,
                    true_scatterer: p.true_scatterer.expect("NLOS path has a scatterer"),
                    alpha: z.alpha[j],
                    beta: z.beta[j],
                    d: z.dist[j],
                })
            })
            .collect())
    });
    let mut map = RemMap { entries: Vec::new(), failures: Vec::new() };
    for (i, r) in per_point.into_iter().enumerate() {
        match r {
            Ok(e) => map.entries.extend(e),
            Err(e) => map.failures.push((i, e.to_string())),
        }
    }
    map
}

/// `n` evenly spaced points on the segment from `a` to `b`, both ends included.
pub fn line_trajectory(a: Point2, b: Point2, n: usize) -> Vec<Point2> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
        })
        .collect()
}

#[derive(Serialize)]
struct SweepRow<'a> {
    sigma_deg: f64,
    curve: &'a str,
    rmse: f64,
}

#[derive(Serialize)]
struct CdfRow<'a> {
    curve: &'a str,
    rmse: f64,
    prob: f64,
}

#[derive(Serialize, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Serialize, Deserialize)]
pub struct RemRow {
    pub x: f64,
    pub y: f64,
    pub ue_x: f64,
    pub ue_y: f64,
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub d: f64,
}

#[derive(Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub ok: bool,
    pub x_hat: f64,
    pub y_hat: f64,
    pub sq_error: f64,
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Rows `sigma_deg, curve, rmse`. Monte-Carlo values, when present,
/// appear as curve `<id>/mc`.
pub fn write_sweep_csv<W: Write>(w: W, s: &SweepResult) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (k, sigma) in s.sigma_angle_values.iter().enumerate() {
        for c in &s.curves {
            out.serialize(SweepRow { sigma_deg: sigma.to_degrees(), curve: &c.id, rmse: c.rmse_crb[k] }).map_err(csv_err)?;
            if let Some(mc) = &c.rmse_mc {
                let id = format!("{}/mc", c.id);
                out.serialize(SweepRow { sigma_deg: sigma.to_degrees(), curve: &id, rmse: mc[k] }).map_err(csv_err)?;
            }
        }
    }
    out.flush()
}

pub fn write_cdf_csv<W: Write>(w: W, curves: &[CdfCurve]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in curves {
        for (rmse, prob) in &c.points {
            out.serialize(CdfRow { curve: &c.id, rmse: *rmse, prob: *prob }).map_err(csv_err)?;
        }
    }
    out.flush()
}

pub fn write_field_csv<W: Write>(w: W, f: &Field) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (p, v) in f.points.iter().zip(&f.values) {
        out.serialize(FieldRow { x: p.x, y: p.y, value: *v }).map_err(csv_err)?;
    }
    out.flush()
}

/// Rows `x, y, ue_x, ue_y, alpha_deg, beta_deg, d`; angles in degrees.
pub fn write_remmap_csv<W: Write>(w: W, m: &RemMap) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for e in &m.entries {
        out.serialize(RemRow {
            x: e.scatterer.x,
            y: e.scatterer.y,
            ue_x: e.ue.x,
            ue_y: e.ue.y,
            alpha_deg: e.alpha.to_degrees(),
            beta_deg: e.beta.to_degrees(),
            d: e.d,
        })
        .map_err(csv_err)?;
    }
    out.flush()
}

/// Per-trial rows; failed trials have `ok = false` and NaN values.
pub fn write_trials_csv<W: Write>(w: W, truth: Point2, r: &McResult) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for t in &r.trials {
        let row = match t.estimate {
            Some(p) => TrialRow { trial: t.trial, ok: true, x_hat: p.x, y_hat: p.y, sq_error: squared_error(truth, p) },
            None => TrialRow { trial: t.trial, ok: false, x_hat: f64::NAN, y_hat: f64::NAN, sq_error: f64::NAN },
        };
        out.serialize(row).map_err(csv_err)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn rmse_matches_closed_form() {
        let truth = Point2::new(1.0, 2.0);
        let est = [Point2::new(4.0, 6.0), Point2::new(1.0, 2.0), Point2::new(1.0, -1.0), Point2::new(0.0, 2.0)];
        // squared errors 25, 0, 9, 1
        assert_eq!(rmse(truth, &est), (35.0f64 / 4.0).sqrt());
    }

    #[test]
    fn subsets_of_three() {
        let s = all_subsets(3);
        assert_eq!(s.len(), 7);
        assert_eq!(s[0], vec![0]);
        assert_eq!(s[6], vec![0, 1, 2]);
    }

    #[test]
    fn cdf_dominance_and_median() {
        let a = CdfCurve::from_values("a".into(), "p".into(), Mode::Rem, vec![1.0, 2.0, 3.0, f64::NAN]);
        let b = CdfCurve::from_values("b".into(), "p".into(), Mode::Rem, vec![1.5, 2.0, 4.0, 5.0]);
        assert_eq!(a.median, 2.0);
        assert_eq!(b.median, 3.0);
        assert!(a.dominates(&b));
        assert!(!b.dominates(&a));
        assert_eq!(a.points.last().unwrap().1, 1.0);
    }

    #[test]
    fn zero_noise_mc_is_exact() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let cfg = GapfConfig { n_particles: 5, n_iterations: 3, ..GapfConfig::default() };
        let setup = McSetup { noise_scale: 0.0, ..McSetup::new(&sc, scenarios::SWEEP_UE, Mode::NoRem, &cfg, 4, 3) };
        let r = setup.run().unwrap();
        assert_eq!(r.failures, 0);
        assert!(r.rmse_est < 1e-6, "{}", r.rmse_est);
    }

    #[test]
    fn sweep_shapes() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let sig: Vec<f64> = [2.0f64, 10.0, 30.0].iter().map(|d| d.to_radians()).collect();
        let s = beamwidth_sweep(&sc, scenarios::SWEEP_UE, &sig, 0.75, &all_subsets(3), &[Mode::Rem, Mode::NoRem], None).unwrap();
        assert_eq!(s.curves.len(), 14);
        assert!(s.curve("NLOS1/NoREM").unwrap().rmse_crb.iter().all(|v| v.is_nan()));
        assert!(s.curve("LOS1/NoREM").unwrap().rmse_crb.iter().all(|v| v.is_finite()));
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &s).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 3 * 14);
    }

    #[test]
    fn rem_map_entry_per_nlos_path() {
        let sc = scenarios::canyon(2, NoiseProfile::ghz73());
        let traj = line_trajectory(Point2::new(10.0, 10.0), Point2::new(10.0, 30.0), 2);
        let cfg = GapfConfig { n_particles: 5, n_iterations: 3, ..GapfConfig::default() };
        let m = build_rem_map(&sc, &traj, &cfg, 1);
        let expected: usize = traj.iter().map(|p| enumerate_paths(&sc, *p).unwrap().n_nlos()).sum();
        assert_eq!(m.entries.len(), expected);
        assert!(m.failures.is_empty());
    }
}
