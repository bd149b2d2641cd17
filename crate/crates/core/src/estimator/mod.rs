//! Maximum-likelihood localization with the gradient-assisted particle filter
//! (GAPF): staged grid initialization followed by repeated
//! resample / perturb / refine / reweight iterations.

mod gapf;
mod init;
mod lm;
mod resample;

use serde::{Deserialize, Serialize};

pub use gapf::{gapf_iterate, normalized_weights, process_std, resample_systematic, ParticleSet};
pub use init::{anchor_pair, grid_init, grid_nodes};
pub use lm::lm_refine;
pub use resample::systematic_indices;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect, Scenario};
use crate::likelihood::log_likelihood;
use crate::measurement::{Mode, Observation, ParamVector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// One estimate over all paths jointly.
    #[default]
    Joint,
    /// Estimate small path groups separately and average their UE positions.
    SubsetAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapfConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    /// Per-coordinate standard deviation of the particle spread, meters.
    pub process_std_position: f64,
    /// Multiplier applied to the spread after every iteration.
    pub anneal_factor: f64,
    pub lm_max_iters: usize,
    /// Step norm (meters) below which refinement stops.
    pub lm_tolerance: f64,
    pub grid_spacing: f64,
    /// Search region for initialization; defaults to the scenario bounding box.
    pub search_box: Option<Rect>,
    pub box_padding: f64,
    pub rng_seed: u64,
    pub strategy: Strategy,
}

impl Default for GapfConfig {
    fn default() -> Self {
        Self {
            n_particles: 50,
            n_iterations: 20,
            process_std_position: 2.0,
            anneal_factor: 0.9,
            lm_max_iters: 50,
            lm_tolerance: 1e-9,
            grid_spacing: 1.0,
            search_box: None,
            box_padding: 5.0,
            rng_seed: 0,
            strategy: Strategy::Joint,
        }
    }
}

impl GapfConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_particles < 1 {
            out.push("estimator.n_particles must be >= 1".into());
        }
        if !(self.process_std_position >= 0.0 && self.process_std_position.is_finite()) {
            out.push(format!("estimator.process_std_position = {} must be finite and >= 0", self.process_std_position));
        }
        if !(self.anneal_factor > 0.0 && self.anneal_factor <= 1.0) {
            out.push(format!("estimator.anneal_factor = {} must be in (0, 1]", self.anneal_factor));
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            out.push(format!("estimator.grid_spacing = {} must be > 0", self.grid_spacing));
        }
        if !(self.lm_tolerance > 0.0) {
            out.push(format!("estimator.lm_tolerance = {} must be > 0", self.lm_tolerance));
        }
        if !(self.box_padding >= 0.0 && self.box_padding.is_finite()) {
            out.push(format!("estimator.box_padding = {} must be finite and >= 0", self.box_padding));
        }
        if let Some(b) = &self.search_box {
            if !b.is_valid() {
                out.push("estimator.search_box must have finite bounds with min < max".into());
            } else if (b.x_max - b.x_min) / self.grid_spacing > 1e4 || (b.y_max - b.y_min) / self.grid_spacing > 1e4 {
                out.push("estimator.search_box has more than 1e4 grid nodes per side".into());
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        match self.problems().into_iter().next() {
            Some(p) => Err(Error::InvalidParameter(p)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub process_std: f64,
    pub max_log_likelihood: f64,
    pub best_log_likelihood: f64,
    pub effective_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub theta_hat: ParamVector,
    /// Log-likelihood of `theta_hat` under the full observation.
    pub log_likelihood: f64,
    pub iterations_run: usize,
    pub seed: u64,
    pub mode: Mode,
    pub initial: ParamVector,
    pub diagnostics: Vec<IterationDiagnostics>,
}

/// Runs initialization and the configured number of GAPF iterations.
pub fn run_gapf(z: &Observation, scenario: &Scenario, mode: Mode, cfg: &GapfConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let theta0 = grid_init(z, scenario, mode, cfg)?;
    let expected_dim = match mode {
        Mode::Rem => 2,
        Mode::NoRem => 2 + 2 * z.paths.n_nlos(),
    };
    assert_eq!(theta0.dim(), expected_dim, "search space dimension");
    let mut set = ParticleSet::from_initial(theta0.clone(), cfg.n_particles, z, scenario)?;
    let mut diagnostics = Vec::with_capacity(cfg.n_iterations);
    for k in 0..cfg.n_iterations {
        let prev = set.best_log_likelihood;
        set = gapf_iterate(&set, z, scenario, cfg, k)?;
        debug_assert!(set.best_log_likelihood >= prev);
        debug_assert!((set.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        diagnostics.push(IterationDiagnostics {
            iteration: k,
            process_std: process_std(cfg, k),
            max_log_likelihood: set.log_likelihoods.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            best_log_likelihood: set.best_log_likelihood,
            effective_size: set.effective_size(),
        });
    }
    Ok(EstimateReport {
        theta_hat: set.best,
        log_likelihood: set.best_log_likelihood,
        iterations_run: cfg.n_iterations,
        seed: cfg.rng_seed,
        mode,
        initial: theta0,
        diagnostics,
    })
}

/// Path groups for [`Strategy::SubsetAverage`]: all LOS paths together, NLOS
/// paths in pairs (a trailing odd one joins the LOS group, or the last pair
/// when there is no LOS path).
pub fn subset_groups(z: &Observation) -> Result<Vec<Vec<usize>>> {
    z.paths.check_sufficient()?;
    let los: Vec<usize> = (0..z.n_paths()).filter(|&j| z.paths.paths()[j].is_los()).collect();
    let nlos: Vec<usize> = (0..z.n_paths()).filter(|&j| !z.paths.paths()[j].is_los()).collect();
    let mut groups: Vec<Vec<usize>> = nlos.chunks(2).map(|c| c.to_vec()).collect();
    if groups.last().is_some_and(|g| g.len() == 1) {
        let odd = groups.pop().unwrap();
        match groups.last_mut() {
            Some(last) if los.is_empty() => last.extend(odd),
            _ => {
                let mut g = los.clone();
                g.extend(odd);
                groups.insert(0, g);
                return Ok(groups);
            }
        }
    }
    if !los.is_empty() {
        groups.insert(0, los);
    }
    Ok(groups)
}

/// Maximum-likelihood estimate of the UE position (and, without a map, the scatterers).
pub fn estimate(z: &Observation, scenario: &Scenario, mode: Mode, cfg: &GapfConfig) -> Result<EstimateReport> {
    z.paths.check_sufficient()?;
    match cfg.strategy {
        Strategy::Joint => run_gapf(z, scenario, mode, cfg),
        Strategy::SubsetAverage => {
            let groups = subset_groups(z)?;
            if groups.len() == 1 {
                return run_gapf(z, scenario, mode, cfg);
            }
            let mut ue = Point2::default();
            let mut scatterers = vec![Point2::default(); z.paths.n_nlos()];
            let mut diagnostics = Vec::new();
            let mut initial_ue = Point2::default();
            for (g, idx) in groups.iter().enumerate() {
                let sub = z.subset(idx);
                let sub_cfg = GapfConfig { rng_seed: rng::derive(cfg.rng_seed, &[g as u64]), ..cfg.clone() };
                let rep = run_gapf(&sub, scenario, mode, &sub_cfg)?;
                ue.x += rep.theta_hat.ue.x / groups.len() as f64;
                ue.y += rep.theta_hat.ue.y / groups.len() as f64;
                initial_ue.x += rep.initial.ue.x / groups.len() as f64;
                initial_ue.y += rep.initial.ue.y / groups.len() as f64;
                if mode == Mode::NoRem {
                    for (k, &j) in idx.iter().filter(|&&j| !z.paths.paths()[j].is_los()).enumerate() {
                        let si = z.paths.paths()[j].scatterer_index.expect("NLOS path");
                        scatterers[si] = rep.theta_hat.scatterers[k];
                    }
                }
                diagnostics.extend(rep.diagnostics);
            }
            let (theta_hat, initial) = match mode {
                Mode::Rem => (ParamVector::rem(ue), ParamVector::rem(initial_ue)),
                Mode::NoRem => (ParamVector::no_rem(ue, scatterers.clone()), ParamVector::no_rem(initial_ue, scatterers)),
            };
            Ok(EstimateReport {
                log_likelihood: log_likelihood(z, &theta_hat, scenario)?,
                theta_hat,
                iterations_run: cfg.n_iterations,
                seed: cfg.rng_seed,
                mode,
                initial,
                diagnostics,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::enumerate_paths;
    use crate::measurement::{noiseless, synthesize, NoiseProfile};
    use crate::scenarios;

    #[test]
    fn subset_groups_shapes() {
        let sc = scenarios::corner(2, NoiseProfile::ghz73());
        let ue = Point2::new(10.0, 30.0);
        let ps = enumerate_paths(&sc, ue).unwrap();
        let z = noiseless(&ParamVector::truth(ue, &ps, Mode::NoRem), &ps, &sc).unwrap();
        assert_eq!(subset_groups(&z).unwrap(), vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        assert_eq!(subset_groups(&z.subset(&[0, 2, 3, 4])).unwrap(), vec![vec![0, 3], vec![1, 2]]);
        assert_eq!(subset_groups(&z.subset(&[2, 3, 4])).unwrap(), vec![vec![0, 1, 2]]);
        assert!(subset_groups(&z.subset(&[2])).is_err());
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = scenarios::SWEEP_UE;
        let ps = enumerate_paths(&sc, ue).unwrap();
        let z = synthesize(&ParamVector::truth(ue, &ps, Mode::NoRem), &ps, &sc, 8).unwrap();
        let cfg = GapfConfig { n_particles: 10, n_iterations: 5, rng_seed: 77, ..GapfConfig::default() };
        let a = estimate(&z, &sc, Mode::NoRem, &cfg).unwrap();
        let b = estimate(&z, &sc, Mode::NoRem, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log_likelihood, log_likelihood(&z, &a.theta_hat, &sc).unwrap());
        assert_eq!(a.theta_hat.dim(), 6);
        let r = estimate(&z, &sc, Mode::Rem, &cfg).unwrap();
        assert_eq!(r.theta_hat.dim(), 2);
    }

    #[test]
    fn subset_average_reports_full_likelihood() {
        let sc = scenarios::corner(2, NoiseProfile::ghz73());
        let ue = Point2::new(10.0, 30.0);
        let ps = enumerate_paths(&sc, ue).unwrap();
        let z = synthesize(&ParamVector::truth(ue, &ps, Mode::NoRem), &ps, &sc, 1).unwrap();
        let cfg = GapfConfig { n_particles: 8, n_iterations: 4, strategy: Strategy::SubsetAverage, ..GapfConfig::default() };
        let rep = estimate(&z, &sc, Mode::NoRem, &cfg).unwrap();
        assert_eq!(rep.theta_hat.scatterers.len(), 4);
        assert_eq!(rep.log_likelihood, log_likelihood(&z, &rep.theta_hat, &sc).unwrap());
        assert!(rep.theta_hat.ue.distance(&ue) < 5.0);
    }

    #[test]
    fn bad_config_is_rejected() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = scenarios::SWEEP_UE;
        let ps = enumerate_paths(&sc, ue).unwrap();
        let z = noiseless(&ParamVector::truth(ue, &ps, Mode::Rem), &ps, &sc).unwrap();
        let cfg = GapfConfig { anneal_factor: 0.0, ..GapfConfig::default() };
        assert!(matches!(estimate(&z, &sc, Mode::Rem, &cfg), Err(Error::InvalidParameter(_))));
    }
}
