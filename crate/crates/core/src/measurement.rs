//! Forward measurement model `h(theta)`, noise statistics, observation
//! synthesis and angle utilities.
//!
//! Angles follow the bearing convention `atan2q(dx, dy)`: zero points along
//! +y and the angle grows towards +x. AOA is measured at the UE looking back
//! along the arriving ray, AOD at the FE looking along the departing ray.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PathDescriptor, PathKind, PathSet, Point2, Scenario};
use crate::rng;

const TWO_PI: f64 = 2.0 * PI;

/// Per-path-type noise standard deviations. Angles in radians, distances in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub sigma_alpha_los: f64,
    pub sigma_beta_los: f64,
    pub sigma_alpha_nlos: f64,
    pub sigma_beta_nlos: f64,
    pub sigma_d_los: f64,
    pub sigma_d_nlos: f64,
    pub label: String,
}

impl NoiseProfile {
    /// Angles given in degrees, distances in meters.
    #[allow(clippy::too_many_arguments)]
    pub fn from_degrees(
        label: &str,
        alpha_los: f64,
        beta_los: f64,
        d_los: f64,
        alpha_nlos: f64,
        beta_nlos: f64,
        d_nlos: f64,
    ) -> Self {
        Self {
            sigma_alpha_los: alpha_los.to_radians(),
            sigma_beta_los: beta_los.to_radians(),
            sigma_alpha_nlos: alpha_nlos.to_radians(),
            sigma_beta_nlos: beta_nlos.to_radians(),
            sigma_d_los: d_los,
            sigma_d_nlos: d_nlos,
            label: label.to_string(),
        }
    }

    pub fn ghz28() -> Self {
        Self::from_degrees("28GHz", 10.5, 8.5, 0.75, 10.1, 9.0, 0.75)
    }

    pub fn ghz73() -> Self {
        Self::from_degrees("73GHz", 8.5, 5.5, 0.75, 6.0, 7.0, 0.75)
    }

    pub fn preset(label: &str) -> Option<Self> {
        match label {
            "28GHz" => Some(Self::ghz28()),
            "73GHz" => Some(Self::ghz73()),
            _ => None,
        }
    }

    /// All four angular deviations tied to `sigma_angle` (radians), distance
    /// deviations set to `sigma_d`.
    pub fn tied(sigma_angle: f64, sigma_d: f64) -> Self {
        Self {
            sigma_alpha_los: sigma_angle,
            sigma_beta_los: sigma_angle,
            sigma_alpha_nlos: sigma_angle,
            sigma_beta_nlos: sigma_angle,
            sigma_d_los: sigma_d,
            sigma_d_nlos: sigma_d,
            label: format!("tied-{:.3}deg", sigma_angle.to_degrees()),
        }
    }

    pub fn sigmas(&self, kind: PathKind) -> [f64; 3] {
        match kind {
            PathKind::Los => [self.sigma_alpha_los, self.sigma_beta_los, self.sigma_d_los],
            PathKind::Nlos => [self.sigma_alpha_nlos, self.sigma_beta_nlos, self.sigma_d_nlos],
        }
    }

    pub fn problems(&self) -> Vec<String> {
        [
            ("sigma_alpha_los", self.sigma_alpha_los),
            ("sigma_beta_los", self.sigma_beta_los),
            ("sigma_alpha_nlos", self.sigma_alpha_nlos),
            ("sigma_beta_nlos", self.sigma_beta_nlos),
            ("sigma_d_los", self.sigma_d_los),
            ("sigma_d_nlos", self.sigma_d_nlos),
        ]
        .into_iter()
        .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
        .map(|(name, v)| format!("noise_profile.{name} = {v} must be finite and > 0"))
        .collect()
    }

    /// LOS/NLOS classifier threshold: three times the larger LOS angular deviation.
    pub fn default_los_threshold(&self) -> f64 {
        3.0 * self.sigma_alpha_los.max(self.sigma_beta_los)
    }
}

/// Whether scatterer positions are known (perfect radio-environment map) or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "REM")]
    Rem,
    #[serde(rename = "NoREM")]
    NoRem,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Rem => "REM",
            Mode::NoRem => "NoREM",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "REM" | "rem" => Ok(Mode::Rem),
            "NoREM" | "norem" | "NOREM" => Ok(Mode::NoRem),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

/// Unknown parameters: UE position plus, without a map, one scatterer per NLOS path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub ue: Point2,
    pub scatterers: Vec<Point2>,
    pub mode: Mode,
}

impl ParamVector {
    pub fn rem(ue: Point2) -> Self {
        Self { ue, scatterers: Vec::new(), mode: Mode::Rem }
    }

    pub fn no_rem(ue: Point2, scatterers: Vec<Point2>) -> Self {
        Self { ue, scatterers, mode: Mode::NoRem }
    }

    /// Ground truth for a path set in the given mode.
    pub fn truth(ue: Point2, paths: &PathSet, mode: Mode) -> Self {
        match mode {
            Mode::Rem => Self::rem(ue),
            Mode::NoRem => Self::no_rem(ue, paths.true_scatterers()),
        }
    }

    pub fn dim(&self) -> usize {
        2 + 2 * self.scatterers.len()
    }

    /// `[p_x, p_y, s_x(1..N), s_y(1..N)]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.ue.x);
        v.push(self.ue.y);
        v.extend(self.scatterers.iter().map(|s| s.x));
        v.extend(self.scatterers.iter().map(|s| s.y));
        v
    }

    pub fn from_slice(mode: Mode, v: &[f64]) -> Self {
        let n = (v.len() - 2) / 2;
        let scatterers = (0..n).map(|i| Point2::new(v[2 + i], v[2 + n + i])).collect();
        Self { ue: Point2::new(v[0], v[1]), scatterers, mode }
    }

    pub fn check_consistent(&self, paths: &PathSet) -> Result<()> {
        let expected = match self.mode {
            Mode::Rem => 0,
            Mode::NoRem => paths.n_nlos(),
        };
        if self.scatterers.len() != expected {
            return Err(Error::Inconsistent(format!(
                "{} mode with {} NLOS paths needs {expected} scatterers, got {}",
                self.mode,
                paths.n_nlos(),
                self.scatterers.len()
            )));
        }
        Ok(())
    }

    /// Scatterer used for an NLOS path: the estimate in NoREM mode, the map
    /// (ground truth) in REM mode.
    pub fn scatterer_for(&self, path: &PathDescriptor) -> Result<Point2> {
        let idx = path
            .scatterer_index
            .ok_or_else(|| Error::Inconsistent("NLOS path without scatterer index".into()))?;
        match self.mode {
            Mode::NoRem => self
                .scatterers
                .get(idx)
                .copied()
                .ok_or_else(|| Error::Inconsistent(format!("scatterer {idx} missing"))),
            Mode::Rem => path
                .true_scatterer
                .ok_or_else(|| Error::Inconsistent("REM mode needs a mapped scatterer".into())),
        }
    }
}

/// Stacked measurement `z = [alpha'; beta'; d']` with its diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub dist: Vec<f64>,
    /// `[alpha block; beta block; d block]`, LOS entries first in each block.
    pub covariance_diag: Vec<f64>,
    pub paths: PathSet,
}

impl Observation {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Number of scalar measurements `M = 3 (N_L + N_N)`.
    pub fn dim(&self) -> usize {
        3 * self.n_paths()
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.dist);
        v
    }

    /// Observation restricted to the paths at `indices` (ascending, LOS before NLOS).
    pub fn subset(&self, indices: &[usize]) -> Observation {
        let n = self.n_paths();
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let cov = &self.covariance_diag;
        let mut covariance_diag = pick(&cov[..n]);
        covariance_diag.extend(pick(&cov[n..2 * n]));
        covariance_diag.extend(pick(&cov[2 * n..]));
        Observation {
            alpha: pick(&self.alpha),
            beta: pick(&self.beta),
            dist: pick(&self.dist),
            covariance_diag,
            paths: self.paths.subset(indices),
        }
    }

    /// Replaces the measured values with a stacked vector in the same ordering.
    pub fn with_stacked(&self, z: &[f64]) -> Observation {
        let n = self.n_paths();
        Observation {
            alpha: z[..n].to_vec(),
            beta: z[n..2 * n].to_vec(),
            dist: z[2 * n..].to_vec(),
            covariance_diag: self.covariance_diag.clone(),
            paths: self.paths.clone(),
        }
    }
}

/// Four-quadrant arctangent of `y/x`, in `(-pi, pi]`.
pub fn atan2q(y: f64, x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok((y / x).atan())
    } else if x < 0.0 {
        if y >= 0.0 {
            Ok((y / x).atan() + PI)
        } else {
            Ok((y / x).atan() - PI)
        }
    } else if y > 0.0 {
        Ok(PI / 2.0)
    } else if y < 0.0 {
        Ok(-PI / 2.0)
    } else {
        Err(Error::UndefinedAngle)
    }
}

/// Maps an angle into `[-pi, pi)`.
pub fn wrap(x: f64) -> f64 {
    let r = x - TWO_PI * ((x + PI) / TWO_PI).floor();
    // rounding can land exactly on +pi
    if r >= PI {
        r - TWO_PI
    } else if r < -PI {
        r + TWO_PI
    } else {
        r
    }
}

/// `(alpha, beta, d)` of one path.
pub fn path_params(path: &PathDescriptor, theta: &ParamVector, scenario: &Scenario) -> Result<(f64, f64, f64)> {
    let q = scenario
        .fes
        .get(path.fe_index)
        .ok_or_else(|| Error::Inconsistent(format!("FE index {} out of range", path.fe_index)))?;
    let p = theta.ue;
    match path.kind {
        PathKind::Los => {
            let alpha = atan2q(q.x - p.x, q.y - p.y)?;
            let beta = atan2q(p.x - q.x, p.y - q.y)?;
            Ok((alpha, beta, p.distance(q)))
        }
        PathKind::Nlos => {
            let s = theta.scatterer_for(path)?;
            let alpha = atan2q(s.x - p.x, s.y - p.y)?;
            let beta = atan2q(s.x - q.x, s.y - q.y)?;
            Ok((alpha, beta, s.distance(&p) + s.distance(q)))
        }
    }
}

/// Stacked `h(theta) = [alpha; beta; d]`.
pub fn forward(theta: &ParamVector, paths: &PathSet, scenario: &Scenario) -> Result<Vec<f64>> {
    theta.check_consistent(paths)?;
    let n = paths.len();
    let mut h = vec![0.0; 3 * n];
    for (j, path) in paths.paths().iter().enumerate() {
        let (a, b, d) = path_params(path, theta, scenario)?;
        h[j] = a;
        h[n + j] = b;
        h[2 * n + j] = d;
    }
    Ok(h)
}

/// Diagonal of `R` for `n_los` LOS paths followed by `n_nlos` NLOS paths.
pub fn covariance(profile: &NoiseProfile, n_los: usize, n_nlos: usize) -> Vec<f64> {
    let block = |l: f64, nl: f64| {
        std::iter::repeat_n(l * l, n_los).chain(std::iter::repeat_n(nl * nl, n_nlos))
    };
    block(profile.sigma_alpha_los, profile.sigma_alpha_nlos)
        .chain(block(profile.sigma_beta_los, profile.sigma_beta_nlos))
        .chain(block(profile.sigma_d_los, profile.sigma_d_nlos))
        .collect()
}

/// `h(theta_true)` without noise, carrying the covariance of the scenario's profile.
pub fn noiseless(theta_true: &ParamVector, paths: &PathSet, scenario: &Scenario) -> Result<Observation> {
    synthesize_scaled(theta_true, paths, scenario, 0, 0.0)
}

/// Noisy observation drawn with the scenario's noise profile.
pub fn synthesize(theta_true: &ParamVector, paths: &PathSet, scenario: &Scenario, rng_seed: u64) -> Result<Observation> {
    synthesize_scaled(theta_true, paths, scenario, rng_seed, 1.0)
}

/// Like [`synthesize`] with every noise draw multiplied by `noise_scale`; the
/// recorded covariance is always the nominal one.
pub fn synthesize_scaled(
    theta_true: &ParamVector,
    paths: &PathSet,
    scenario: &Scenario,
    rng_seed: u64,
    noise_scale: f64,
) -> Result<Observation> {
    let h = forward(theta_true, paths, scenario)?;
    let cov = covariance(&scenario.noise_profile, paths.n_los(), paths.n_nlos());
    let n = paths.len();
    let mut r = rng::stream(rng_seed, &[rng::tag::SYNTHESIZE]);
    let z: Vec<f64> = h
        .iter()
        .zip(&cov)
        .enumerate()
        .map(|(i, (hi, var))| {
            let e: f64 = r.sample(StandardNormal);
            let v = hi + noise_scale * var.sqrt() * e;
            if i < 2 * n {
                wrap(v)
            } else {
                v
            }
        })
        .collect();
    Ok(Observation {
        alpha: z[..n].to_vec(),
        beta: z[n..2 * n].to_vec(),
        dist: z[2 * n..].to_vec(),
        covariance_diag: cov,
        paths: paths.clone(),
    })
}

/// Angle-difference test: a LOS path has AOA and AOD pointing in opposite directions.
pub fn classify_los(alpha_meas: f64, beta_meas: f64, xi: f64) -> bool {
    (wrap(alpha_meas - beta_meas).abs() - PI).abs() <= xi
}
