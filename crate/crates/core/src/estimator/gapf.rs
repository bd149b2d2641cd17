//! Gradient-assisted particle filter iteration.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::likelihood::log_likelihood;
use crate::measurement::{Observation, ParamVector};
use crate::parallel::map_indexed;
use crate::rng;

use super::lm::lm_refine;
use super::resample::systematic_indices;
use super::GapfConfig;

/// Perturbation attempts per particle before it falls back to its parent.
const REDRAW_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<ParamVector>,
    pub weights: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
    /// Highest-likelihood particle seen in any iteration so far.
    pub best: ParamVector,
    pub best_log_likelihood: f64,
    /// `(iteration, particle)` of `best`; `None` while it is still the initial point.
    pub best_at: Option<(usize, usize)>,
}

impl ParticleSet {
    /// `n` copies of `theta0` with uniform weights.
    pub fn from_initial(theta0: ParamVector, n: usize, z: &Observation, scenario: &Scenario) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n_particles must be >= 1".into()));
        }
        let ll = log_likelihood(z, &theta0, scenario)?;
        Ok(Self {
            particles: vec![theta0.clone(); n],
            weights: vec![1.0 / n as f64; n],
            log_likelihoods: vec![ll; n],
            best: theta0,
            best_log_likelihood: ll,
            best_at: None,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / sum w^2`.
    pub fn effective_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Weights proportional to `exp(ll)`, computed with the maximum subtracted.
pub fn normalized_weights(log_likelihoods: &[f64]) -> Vec<f64> {
    let max = log_likelihoods.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / log_likelihoods.len() as f64; log_likelihoods.len()];
    }
    let raw: Vec<f64> = log_likelihoods.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Systematic resampling of a particle set; output weights are uniform.
pub fn resample_systematic<R: rand::Rng + ?Sized>(ps: &ParticleSet, rng: &mut R) -> ParticleSet {
    let idx = systematic_indices(&ps.weights, rng);
    let n = idx.len();
    ParticleSet {
        particles: idx.iter().map(|&i| ps.particles[i].clone()).collect(),
        weights: vec![1.0 / n as f64; n],
        log_likelihoods: idx.iter().map(|&i| ps.log_likelihoods[i]).collect(),
        best: ps.best.clone(),
        best_log_likelihood: ps.best_log_likelihood,
        best_at: ps.best_at,
    }
}

/// Process-noise standard deviation used in `iteration`.
pub fn process_std(cfg: &GapfConfig, iteration: usize) -> f64 {
    cfg.process_std_position * cfg.anneal_factor.powi(iteration as i32)
}

/// One iteration: resample, perturb, refine each particle locally, reweight
/// by likelihood and keep the running best.
pub fn gapf_iterate(
    ps: &ParticleSet,
    z: &Observation,
    scenario: &Scenario,
    cfg: &GapfConfig,
    iteration: usize,
) -> Result<ParticleSet> {
    let resampled = resample_systematic(ps, &mut rng::stream(cfg.rng_seed, &[rng::tag::RESAMPLE, iteration as u64]));
    let sd = process_std(cfg, iteration);
    let spread = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(format!("process std {sd}: {e}")))?;

    let moved: Vec<(ParamVector, f64)> = map_indexed(&resampled.particles, |i, parent| {
        let mut r = rng::stream(cfg.rng_seed, &[rng::tag::PARTICLE, iteration as u64, i as u64]);
        for _ in 0..REDRAW_LIMIT {
            let drawn: Vec<f64> = parent.to_vec().iter().map(|x| x + spread.sample(&mut r)).collect();
            let drawn = ParamVector::from_slice(parent.mode, &drawn);
            let Ok(refined) = lm_refine(z, &drawn, scenario, cfg) else { continue };
            if let Ok(ll) = log_likelihood(z, &refined, scenario) {
                return (refined, ll);
            }
        }
        (parent.clone(), resampled.log_likelihoods[i])
    });

    let (particles, log_likelihoods): (Vec<_>, Vec<_>) = moved.into_iter().unzip();
    let weights = normalized_weights(&log_likelihoods);
    let mut next = ParticleSet {
        particles,
        weights,
        log_likelihoods,
        best: resampled.best,
        best_log_likelihood: resampled.best_log_likelihood,
        best_at: resampled.best_at,
    };
    // strict comparison keeps the earliest iteration / lowest index on ties
    for (i, ll) in next.log_likelihoods.iter().enumerate() {
        if *ll > next.best_log_likelihood {
            next.best_log_likelihood = *ll;
            next.best = next.particles[i].clone();
            next.best_at = Some((iteration, i));
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::enumerate_paths;
    use crate::measurement::{synthesize, Mode, NoiseProfile};
    use crate::scenarios;

    #[test]
    fn weights_survive_large_negative_log_likelihoods() {
        let w = normalized_weights(&[-1e6, -1e6 - 1.0, -2e6]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[0] > w[1] && w[2] == 0.0);
        let u = normalized_weights(&[f64::NEG_INFINITY; 4]);
        assert_eq!(u, vec![0.25; 4]);
    }

    #[test]
    fn iterations_keep_invariants() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = scenarios::SWEEP_UE;
        let ps = enumerate_paths(&sc, ue).unwrap();
        let truth = ParamVector::truth(ue, &ps, Mode::NoRem);
        let z = synthesize(&truth, &ps, &sc, 21).unwrap();
        let cfg = GapfConfig { n_particles: 12, rng_seed: 4, ..GapfConfig::default() };
        let theta0 = super::super::grid_init(&z, &sc, Mode::NoRem, &cfg).unwrap();
        let mut set = ParticleSet::from_initial(theta0, cfg.n_particles, &z, &sc).unwrap();
        let mut prev = set.best_log_likelihood;
        for k in 0..6 {
            set = gapf_iterate(&set, &z, &sc, &cfg, k).unwrap();
            assert_eq!(set.len(), 12);
            assert!((set.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(set.weights.iter().all(|w| *w >= 0.0));
            assert!(set.best_log_likelihood >= prev);
            prev = set.best_log_likelihood;
        }
        let recomputed = log_likelihood(&z, &set.best, &sc).unwrap();
        assert_eq!(recomputed, set.best_log_likelihood);
    }

    #[test]
    fn zero_spread_collapses_onto_refined_parents() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = scenarios::SWEEP_UE;
        let ps = enumerate_paths(&sc, ue).unwrap();
        let truth = ParamVector::truth(ue, &ps, Mode::NoRem);
        let z = synthesize(&truth, &ps, &sc, 2).unwrap();
        let cfg = GapfConfig { n_particles: 6, process_std_position: 0.0, ..GapfConfig::default() };
        let theta0 = super::super::grid_init(&z, &sc, Mode::NoRem, &cfg).unwrap();
        let refined = lm_refine(&z, &theta0, &sc, &cfg).unwrap();
        let set = ParticleSet::from_initial(theta0, cfg.n_particles, &z, &sc).unwrap();
        let next = gapf_iterate(&set, &z, &sc, &cfg, 0).unwrap();
        assert!(next.particles.iter().all(|p| *p == refined));
    }

    #[test]
    fn resampling_keeps_count_and_uniform_weights() {
        let sc = scenarios::corner(1, NoiseProfile::ghz73());
        let ue = scenarios::SWEEP_UE;
        let ps = enumerate_paths(&sc, ue).unwrap();
        let truth = ParamVector::truth(ue, &ps, Mode::Rem);
        let z = synthesize(&truth, &ps, &sc, 2).unwrap();
        let mut set = ParticleSet::from_initial(truth, 4, &z, &sc).unwrap();
        set.particles = (0..4).map(|i| ParamVector::rem(crate::geometry::Point2::new(i as f64, 1.0))).collect();
        set.weights = vec![0.0, 0.0, 1.0, 0.0];
        let out = resample_systematic(&set, &mut rng::stream(0, &[]));
        assert_eq!(out.weights, vec![0.25; 4]);
        assert!(out.particles.iter().all(|p| p.ue.x == 2.0));
    }
}
