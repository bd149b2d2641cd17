//! Browser bindings. Every entry point returns a JSON string so the page
//! needs no generated type definitions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mmloc::bounds::{crb_grid, GridSpec};
use mmloc::measurement::synthesize_scaled;
use mmloc::{enumerate_paths, estimate, rng, scenarios, GapfConfig, Mode, NoiseProfile, ParamVector, Point2, Rect, Scenario, Wall};

#[derive(Serialize)]
pub struct SceneJson {
    pub walls: Vec<Wall>,
    pub fes: Vec<Point2>,
    pub region: Rect,
    pub default_ue: Point2,
}

#[derive(Serialize)]
pub struct PathJson {
    pub los: bool,
    pub fe: Point2,
    pub scatterer: Option<Point2>,
}

#[derive(Serialize)]
pub struct PathsJson {
    pub scene: SceneJson,
    pub ue: Point2,
    pub paths: Vec<PathJson>,
    pub sufficient: bool,
}

#[derive(Serialize)]
pub struct FieldJson {
    pub scene: SceneJson,
    pub mode: Mode,
    pub spacing: f64,
    pub points: Vec<Point2>,
    /// Position bound in meters, `null` where the node is excluded or unidentifiable.
    pub values: Vec<f64>,
}

#[derive(Serialize)]
pub struct EstimateJson {
    pub ue: Point2,
    pub ue_hat: Point2,
    pub error: f64,
    pub scatterers: Vec<Point2>,
    pub scatterers_hat: Vec<Point2>,
    pub log_likelihood: f64,
}

fn load(preset: &str, profile: &str) -> Result<(Scenario, Point2), String> {
    let p = NoiseProfile::preset(profile).ok_or_else(|| format!("unknown profile {profile:?}"))?;
    scenarios::preset(preset, p).ok_or_else(|| format!("unknown scenario {preset:?}"))
}

fn scene(sc: &Scenario, ue: Point2) -> SceneJson {
    SceneJson { walls: sc.walls.clone(), fes: sc.fes.clone(), region: sc.region, default_ue: ue }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn paths_json(preset: &str, ue_x: f64, ue_y: f64) -> Result<String, String> {
    let (sc, default_ue) = load(preset, "28GHz")?;
    let ue = Point2::new(ue_x, ue_y);
    let paths = enumerate_paths(&sc, ue).map_err(|e| e.to_string())?;
    let list = paths
        .paths()
        .iter()
        .map(|p| PathJson { los: p.is_los(), fe: sc.fes[p.fe_index], scatterer: p.true_scatterer })
        .collect();
    to_json(&PathsJson { scene: scene(&sc, default_ue), ue, paths: list, sufficient: paths.is_sufficient() })
}

pub fn field_json(preset: &str, profile: &str, mode: &str, spacing: f64) -> Result<String, String> {
    let (sc, default_ue) = load(preset, profile)?;
    let mode: Mode = mode.parse().map_err(|e: mmloc::Error| e.to_string())?;
    if !(spacing >= 0.25 && spacing.is_finite()) {
        return Err(format!("spacing {spacing} must be >= 0.25"));
    }
    let grid = GridSpec { spacing, ..GridSpec::over(sc.region) };
    let f = crb_grid(&sc, &grid, &sc.noise_profile, mode);
    to_json(&FieldJson { scene: scene(&sc, default_ue), mode, spacing, points: f.points, values: f.values })
}

pub fn estimate_json(preset: &str, profile: &str, mode: &str, ue_x: f64, ue_y: f64, seed: u64, n_particles: usize) -> Result<String, String> {
    let (sc, _) = load(preset, profile)?;
    let mode: Mode = mode.parse().map_err(|e: mmloc::Error| e.to_string())?;
    let ue = Point2::new(ue_x, ue_y);
    let paths = enumerate_paths(&sc, ue).map_err(|e| e.to_string())?;
    let truth = ParamVector::truth(ue, &paths, Mode::NoRem);
    let z = synthesize_scaled(&truth, &paths, &sc, rng::derive(seed, &[rng::tag::TRIAL_NOISE, 0]), 1.0).map_err(|e| e.to_string())?;
    let cfg = GapfConfig { n_particles, rng_seed: rng::derive(seed, &[rng::tag::TRIAL_ESTIMATOR, 0]), ..GapfConfig::default() };
    let rep = estimate(&z, &sc, mode, &cfg).map_err(|e| e.to_string())?;
    to_json(&EstimateJson {
        ue,
        ue_hat: rep.theta_hat.ue,
        error: rep.theta_hat.ue.distance(&ue),
        scatterers: truth.scatterers,
        scatterers_hat: rep.theta_hat.scatterers,
        log_likelihood: rep.log_likelihood,
    })
}

/// Walls, FEs and propagation paths for a UE position.
#[wasm_bindgen(js_name = paths)]
pub fn paths_js(preset: &str, ue_x: f64, ue_y: f64) -> Result<String, JsValue> {
    paths_json(preset, ue_x, ue_y).map_err(|e| JsValue::from_str(&e))
}

/// Position bound over the scenario region.
#[wasm_bindgen(js_name = crbField)]
pub fn field_js(preset: &str, profile: &str, mode: &str, spacing: f64) -> Result<String, JsValue> {
    field_json(preset, profile, mode, spacing).map_err(|e| JsValue::from_str(&e))
}

/// One noisy observation at the UE followed by a GAPF estimate.
#[wasm_bindgen(js_name = estimateOnce)]
pub fn estimate_js(preset: &str, profile: &str, mode: &str, ue_x: f64, ue_y: f64, seed: u32, n_particles: u32) -> Result<String, JsValue> {
    estimate_json(preset, profile, mode, ue_x, ue_y, seed as u64, n_particles as usize).map_err(|e| JsValue::from_str(&e))
}
