//! Run configuration file (TOML). Angles are in degrees and distances in
//! meters here; everything is converted to radians once, in [`RunConfig::resolve`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mmloc::bounds::GridSpec;
use mmloc::geometry::Wall;
use mmloc::harness::all_subsets;
use mmloc::{enumerate_paths, scenarios, GapfConfig, Mode, NoiseProfile, Point2, Rect, Scenario};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub mode: Option<ModeChoice>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub estimator: GapfConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeChoice {
    #[serde(rename = "REM")]
    Rem,
    #[serde(rename = "NoREM")]
    NoRem,
    #[serde(rename = "both")]
    Both,
}

impl ModeChoice {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeChoice::Rem => vec![Mode::Rem],
            ModeChoice::NoRem => vec![Mode::NoRem],
            ModeChoice::Both => vec![Mode::NoRem, Mode::Rem],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// One of `canyon-1fe`, `canyon-2fe`, `corner-1fe`, `corner-2fe`.
    pub preset: Option<String>,
    pub walls: Option<Vec<Wall>>,
    pub fes: Option<Vec<[f64; 2]>>,
    /// `[x_min, x_max, y_min, y_max]`
    pub region: Option<[f64; 4]>,
    pub ue: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// `28GHz` or `73GHz`; inline sigmas override individual entries.
    pub preset: Option<String>,
    pub sigma_alpha_los: Option<f64>,
    pub sigma_beta_los: Option<f64>,
    pub sigma_d_los: Option<f64>,
    pub sigma_alpha_nlos: Option<f64>,
    pub sigma_beta_nlos: Option<f64>,
    pub sigma_d_nlos: Option<f64>,
    /// Multiplies every noise draw; 0 gives noiseless observations.
    pub noise_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_trials: Option<usize>,
    pub sigma_angle_deg: Option<Vec<f64>>,
    pub sigma_d: Option<f64>,
    pub subsets: Option<Vec<Vec<usize>>>,
    /// Monte-Carlo trials per sweep cell; 0 computes bounds only.
    pub mc_trials: Option<usize>,
    pub grid: Option<GridSection>,
    pub profiles: Option<Vec<String>>,
    pub trajectory: Option<TrajectorySection>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// `[x_min, x_max, y_min, y_max]`, defaults to the scenario region.
    pub rect: Option<[f64; 4]>,
    pub spacing: Option<f64>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub n: usize,
}

/// Profile as written in outputs: angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileDeg {
    pub label: String,
    pub sigma_alpha_los: f64,
    pub sigma_beta_los: f64,
    pub sigma_d_los: f64,
    pub sigma_alpha_nlos: f64,
    pub sigma_beta_nlos: f64,
    pub sigma_d_nlos: f64,
}

impl From<&NoiseProfile> for ProfileDeg {
    fn from(p: &NoiseProfile) -> Self {
        Self {
            label: p.label.clone(),
            sigma_alpha_los: p.sigma_alpha_los.to_degrees(),
            sigma_beta_los: p.sigma_beta_los.to_degrees(),
            sigma_d_los: p.sigma_d_los,
            sigma_alpha_nlos: p.sigma_alpha_nlos.to_degrees(),
            sigma_beta_nlos: p.sigma_beta_nlos.to_degrees(),
            sigma_d_nlos: p.sigma_d_nlos,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedScenario {
    pub preset: Option<String>,
    pub walls: Vec<Wall>,
    pub fes: Vec<Point2>,
    pub region: Rect,
    pub ue: Point2,
}

/// Fully expanded configuration, echoed into every summary.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub modes: Vec<Mode>,
    pub scenario: ResolvedScenario,
    pub profile: ProfileDeg,
    pub noise_scale: f64,
    pub estimator: GapfConfig,
    pub n_trials: usize,
    pub sigma_angle_deg: Vec<f64>,
    pub sigma_d: f64,
    pub subsets: Vec<Vec<usize>>,
    pub mc_trials: usize,
    pub grid: GridSpec,
    pub profiles: Vec<ProfileDeg>,
    pub trajectory: TrajectorySection,
    #[serde(skip)]
    pub noise_profile: NoiseProfile,
    #[serde(skip)]
    pub extra_profiles: Vec<NoiseProfile>,
}

impl Resolved {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            walls: self.scenario.walls.clone(),
            fes: self.scenario.fes.clone(),
            noise_profile: self.noise_profile.clone(),
            region: self.scenario.region,
        }
    }
}

fn rect(a: [f64; 4]) -> Rect {
    Rect::new(a[0], a[1], a[2], a[3])
}

fn point(a: [f64; 2]) -> Point2 {
    Point2::new(a[0], a[1])
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

impl RunConfig {
    /// Every violated constraint, without running anything.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.scenario;
        if let Some(name) = &s.preset {
            if !scenarios::PRESET_NAMES.contains(&name.as_str()) {
                out.push(format!("scenario.preset = {name:?} is not one of {:?}", scenarios::PRESET_NAMES));
            }
        } else if s.fes.is_none() {
            out.push("scenario needs either preset or fes".into());
        }
        if let Some(fes) = &s.fes {
            if fes.is_empty() {
                out.push("scenario.fes is empty: no LOS or NLOS path can exist, so the sufficiency condition (>= 1 LOS or >= 2 NLOS paths) cannot hold".into());
            }
        }
        if s.preset.is_none() && s.region.is_none() && s.fes.as_ref().is_some_and(|f| !f.is_empty()) {
            out.push("scenario.region is required without a preset".into());
        }
        if let Some(r) = s.region {
            if !rect(r).is_valid() {
                out.push(format!("scenario.region = {r:?} must be finite with min < max"));
            }
        }

        let p = &self.profile;
        if let Some(name) = &p.preset {
            if NoiseProfile::preset(name).is_none() {
                out.push(format!("profile.preset = {name:?} is not one of [\"28GHz\", \"73GHz\"]"));
            }
        }
        let inline = [
            ("sigma_alpha_los", p.sigma_alpha_los, 180.0),
            ("sigma_beta_los", p.sigma_beta_los, 180.0),
            ("sigma_alpha_nlos", p.sigma_alpha_nlos, 180.0),
            ("sigma_beta_nlos", p.sigma_beta_nlos, 180.0),
            ("sigma_d_los", p.sigma_d_los, f64::INFINITY),
            ("sigma_d_nlos", p.sigma_d_nlos, f64::INFINITY),
        ];
        for (name, v, max) in inline {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    out.push(format!("profile.{name} = {v} must be > 0"));
                } else if v > max {
                    out.push(format!("profile.{name} = {v} degrees must be <= {max}"));
                }
            }
        }
        let given = inline.iter().filter(|(_, v, _)| v.is_some()).count();
        if p.preset.is_none() && given > 0 && given < inline.len() {
            out.push("profile needs a preset or all six sigma_* values".into());
        }
        if let Some(k) = p.noise_scale {
            if !(k >= 0.0 && k.is_finite()) {
                out.push(format!("profile.noise_scale = {k} must be >= 0"));
            }
        }

        out.extend(self.estimator.problems());

        let e = &self.experiment;
        if e.n_trials == Some(0) {
            out.push("experiment.n_trials = 0 must be >= 1".into());
        }
        if let Some(list) = &e.sigma_angle_deg {
            if list.is_empty() {
                out.push("experiment.sigma_angle_deg is empty".into());
            }
            for v in list.iter().filter(|v| !(**v > 0.0 && v.is_finite())) {
                out.push(format!("experiment.sigma_angle_deg entry {v} must be > 0"));
            }
        }
        if let Some(v) = e.sigma_d {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("experiment.sigma_d = {v} must be > 0"));
            }
        }
        if let Some(names) = &e.profiles {
            for n in names.iter().filter(|n| NoiseProfile::preset(n).is_none()) {
                out.push(format!("experiment.profiles entry {n:?} is not a known profile"));
            }
        }
        if let Some(g) = &e.grid {
            if let Some(r) = g.rect {
                if !rect(r).is_valid() {
                    out.push(format!("experiment.grid.rect = {r:?} must be finite with min < max"));
                }
            }
            if let Some(sp) = g.spacing {
                if !(sp > 0.0 && sp.is_finite()) {
                    out.push(format!("experiment.grid.spacing = {sp} must be > 0"));
                }
            }
            if let Some(m) = g.margin {
                if !(m >= 0.0 && m.is_finite()) {
                    out.push(format!("experiment.grid.margin = {m} must be >= 0"));
                }
            }
        }
        if let Some(t) = &e.trajectory {
            if t.n == 0 {
                out.push("experiment.trajectory.n must be >= 1".into());
            }
        }

        // geometric checks need a fully valid scene
        if out.is_empty() {
            match self.resolve(None, None) {
                Ok(r) => out.extend(geometric_problems(&r)),
                Err(e) => out.push(e.to_string()),
            }
        }
        out
    }

    /// Expands presets and applies command-line overrides. Assumes [`Self::problems`] is empty.
    pub fn resolve(&self, seed: Option<u64>, output_dir: Option<PathBuf>) -> Result<Resolved, CliError> {
        let preset = self.scenario.preset.as_deref().map(|n| {
            scenarios::preset(n, NoiseProfile::ghz73()).ok_or_else(|| CliError::Config(format!("unknown scenario preset {n:?}")))
        });
        let preset = preset.transpose()?;
        let walls = match (&self.scenario.walls, &preset) {
            (Some(w), _) => w.clone(),
            (None, Some((s, _))) => s.walls.clone(),
            (None, None) => Vec::new(),
        };
        let fes = match (&self.scenario.fes, &preset) {
            (Some(f), _) => f.iter().map(|a| point(*a)).collect(),
            (None, Some((s, _))) => s.fes.clone(),
            (None, None) => return Err(CliError::Config("scenario needs either preset or fes".into())),
        };
        let region = match (self.scenario.region, &preset) {
            (Some(r), _) => rect(r),
            (None, Some((s, _))) => s.region,
            (None, None) => return Err(CliError::Config("scenario.region is required without a preset".into())),
        };
        let ue = match (self.scenario.ue, &preset) {
            (Some(u), _) => point(u),
            (None, Some((_, u))) => *u,
            (None, None) => Point2::new(0.5 * (region.x_min + region.x_max), 0.5 * (region.y_min + region.y_max)),
        };

        let p = &self.profile;
        let overridden = [p.sigma_alpha_los, p.sigma_beta_los, p.sigma_alpha_nlos, p.sigma_beta_nlos, p.sigma_d_los, p.sigma_d_nlos]
            .iter()
            .any(|v| v.is_some());
        let base = match &p.preset {
            Some(n) => NoiseProfile::preset(n).ok_or_else(|| CliError::Config(format!("unknown profile preset {n:?}")))?,
            None if overridden => NoiseProfile { label: "custom".into(), ..NoiseProfile::ghz28() },
            None => NoiseProfile::ghz28(),
        };
        let noise_profile = NoiseProfile {
            sigma_alpha_los: p.sigma_alpha_los.map_or(base.sigma_alpha_los, f64::to_radians),
            sigma_beta_los: p.sigma_beta_los.map_or(base.sigma_beta_los, f64::to_radians),
            sigma_alpha_nlos: p.sigma_alpha_nlos.map_or(base.sigma_alpha_nlos, f64::to_radians),
            sigma_beta_nlos: p.sigma_beta_nlos.map_or(base.sigma_beta_nlos, f64::to_radians),
            sigma_d_los: p.sigma_d_los.unwrap_or(base.sigma_d_los),
            sigma_d_nlos: p.sigma_d_nlos.unwrap_or(base.sigma_d_nlos),
            label: if overridden && p.preset.is_some() { format!("{}-custom", base.label) } else { base.label.clone() },
        };

        let e = &self.experiment;
        let g = e.grid.unwrap_or(GridSection { rect: None, spacing: None, margin: None });
        let grid = GridSpec { rect: g.rect.map_or(region, rect), spacing: g.spacing.unwrap_or(1.0), margin: g.margin.unwrap_or(0.5) };
        let extra_profiles: Vec<NoiseProfile> = match &e.profiles {
            Some(names) => names
                .iter()
                .map(|n| NoiseProfile::preset(n).ok_or_else(|| CliError::Config(format!("unknown profile {n:?}"))))
                .collect::<Result<_, _>>()?,
            None => vec![NoiseProfile::ghz28(), NoiseProfile::ghz73()],
        };
        let trajectory = e.trajectory.unwrap_or(TrajectorySection {
            from: [ue.x, region.y_min + 0.05 * (region.y_max - region.y_min)],
            to: [ue.x, region.y_max - 0.05 * (region.y_max - region.y_min)],
            n: 20,
        });
        let n_paths = enumerate_paths(
            &Scenario { walls: walls.clone(), fes: fes.clone(), noise_profile: noise_profile.clone(), region },
            ue,
        )
        .map(|p| p.len())
        .unwrap_or(0);
        let seed = seed.or(self.seed).unwrap_or(0);
        Ok(Resolved {
            seed,
            output_dir: output_dir.or_else(|| self.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out")),
            modes: self.mode.unwrap_or(ModeChoice::NoRem).modes(),
            scenario: ResolvedScenario { preset: self.scenario.preset.clone(), walls, fes, region, ue },
            profile: ProfileDeg::from(&noise_profile),
            noise_scale: p.noise_scale.unwrap_or(1.0),
            estimator: GapfConfig { rng_seed: seed, ..self.estimator.clone() },
            n_trials: e.n_trials.unwrap_or(500),
            sigma_angle_deg: e.sigma_angle_deg.clone().unwrap_or_else(|| (1..=40).map(f64::from).collect()),
            sigma_d: e.sigma_d.unwrap_or(0.75),
            subsets: e.subsets.clone().unwrap_or_else(|| all_subsets(n_paths)),
            mc_trials: e.mc_trials.unwrap_or(0),
            grid,
            profiles: extra_profiles.iter().map(ProfileDeg::from).collect(),
            trajectory,
            noise_profile,
            extra_profiles,
        })
    }
}

fn geometric_problems(r: &Resolved) -> Vec<String> {
    let mut out = Vec::new();
    let scenario = r.scenario();
    out.extend(scenario.problems().into_iter().map(|p| format!("scenario: {p}")));
    if !out.is_empty() {
        return out;
    }
    match enumerate_paths(&scenario, r.scenario.ue) {
        Ok(paths) => {
            if !paths.is_sufficient() {
                out.push(format!(
                    "scenario.ue {:?}: {} LOS and {} NLOS paths fail the sufficiency condition (>= 1 LOS or >= 2 NLOS)",
                    r.scenario.ue,
                    paths.n_los(),
                    paths.n_nlos()
                ));
            }
            for s in &r.subsets {
                if s.is_empty() || s.iter().any(|&j| j >= paths.len()) {
                    out.push(format!("experiment.subsets entry {s:?} must be non-empty with indices < {}", paths.len()));
                }
            }
        }
        Err(e) => out.push(format!("scenario.ue {:?}: {e}", r.scenario.ue)),
    }
    let g = &r.grid;
    if (g.rect.x_max - g.rect.x_min) / g.spacing > 1e4 || (g.rect.y_max - g.rect.y_min) / g.spacing > 1e4 {
        out.push("experiment.grid has more than 1e4 nodes per side".into());
    }
    out
}
