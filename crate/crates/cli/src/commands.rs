use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use mmloc::bounds::{crb_grid, Field};
use mmloc::estimator::IterationDiagnostics;
use mmloc::harness::{
    beamwidth_sweep, build_rem_map, cdf_curve, delta_field, line_trajectory, write_cdf_csv, write_field_csv, write_remmap_csv,
    write_sweep_csv, write_trials_csv, McSetup, SweepMc,
};
use mmloc::measurement::synthesize_scaled;
use mmloc::{enumerate_paths, estimate, rng, Mode, ParamVector, Point2};

use crate::config::Resolved;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    status: &'a str,
    seed: u64,
    files: Vec<String>,
    config: &'a Resolved,
    result: T,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        f(BufWriter::new(file)).map_err(|source| CliError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish<T: Serialize>(mut self, command: &str, cfg: &Resolved, result: T) -> Result<(), CliError> {
        self.files.push("summary.json".into());
        let summary = Summary { schema_version: SCHEMA_VERSION, command, status: "ok", seed: cfg.seed, files: self.files.clone(), config: cfg, result };
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        let path = self.dir.join("summary.json");
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }
}

#[derive(Serialize)]
struct ObservationDeg {
    alpha_deg: Vec<f64>,
    beta_deg: Vec<f64>,
    d: Vec<f64>,
}

#[derive(Serialize)]
struct EstimateResult {
    mode: Mode,
    ue_hat: Point2,
    scatterers_hat: Vec<Point2>,
    /// Distance between estimated and true UE, meters.
    rmse: f64,
    log_likelihood: f64,
    iterations_run: usize,
    estimator_seed: u64,
    initial_ue: Point2,
    diagnostics: Vec<IterationDiagnostics>,
}

#[derive(Serialize)]
struct EstimateRow {
    mode: Mode,
    parameter: String,
    x: f64,
    y: f64,
    true_x: f64,
    true_y: f64,
}

pub fn estimate_cmd(cfg: &Resolved) -> Result<(), CliError> {
    let sc = cfg.scenario();
    let ue = cfg.scenario.ue;
    let paths = enumerate_paths(&sc, ue).map_err(CliError::experiment("enumerating paths"))?;
    let truth = ParamVector::truth(ue, &paths, Mode::NoRem);
    let noise_seed = rng::derive(cfg.seed, &[rng::tag::TRIAL_NOISE, 0]);
    let z = synthesize_scaled(&truth, &paths, &sc, noise_seed, cfg.noise_scale).map_err(CliError::experiment("synthesizing observation"))?;
    let est_cfg = mmloc::GapfConfig { rng_seed: rng::derive(cfg.seed, &[rng::tag::TRIAL_ESTIMATOR, 0]), ..cfg.estimator.clone() };

    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        let rep = estimate(&z, &sc, mode, &est_cfg).map_err(CliError::experiment(format!("estimating ({mode})")))?;
        rows.push(EstimateRow { mode, parameter: "ue".into(), x: rep.theta_hat.ue.x, y: rep.theta_hat.ue.y, true_x: ue.x, true_y: ue.y });
        for (k, (s, t)) in rep.theta_hat.scatterers.iter().zip(&truth.scatterers).enumerate() {
            rows.push(EstimateRow { mode, parameter: format!("scatterer{}", k + 1), x: s.x, y: s.y, true_x: t.x, true_y: t.y });
        }
        results.push(EstimateResult {
            mode,
            rmse: rep.theta_hat.ue.distance(&ue),
            ue_hat: rep.theta_hat.ue,
            scatterers_hat: rep.theta_hat.scatterers.clone(),
            log_likelihood: rep.log_likelihood,
            iterations_run: rep.iterations_run,
            estimator_seed: rep.seed,
            initial_ue: rep.initial.ue,
            diagnostics: rep.diagnostics,
        });
    }

    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("estimate.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in &rows {
            c.serialize(r).map_err(std::io::Error::other)?;
        }
        c.flush()
    })?;
    #[derive(Serialize)]
    struct R {
        n_los: usize,
        n_nlos: usize,
        true_scatterers: Vec<Point2>,
        observation: ObservationDeg,
        estimates: Vec<EstimateResult>,
    }
    let obs = ObservationDeg {
        alpha_deg: z.alpha.iter().map(|a| a.to_degrees()).collect(),
        beta_deg: z.beta.iter().map(|a| a.to_degrees()).collect(),
        d: z.dist.clone(),
    };
    out.finish(
        "estimate",
        cfg,
        R { n_los: paths.n_los(), n_nlos: paths.n_nlos(), true_scatterers: truth.scatterers.clone(), observation: obs, estimates: results },
    )
}

#[derive(Serialize)]
pub struct McSummary {
    pub mode: Mode,
    pub file: String,
    pub rmse_est: f64,
    pub rmse_crb: f64,
    pub ratio: f64,
    pub n_trials: usize,
    pub failures: usize,
    pub mean_estimate: Point2,
}

pub fn mc_cmd(cfg: &Resolved) -> Result<(), CliError> {
    let sc = cfg.scenario();
    let ue = cfg.scenario.ue;
    let mut out = Outputs::new(&cfg.output_dir)?;
    let mut results = Vec::new();
    for &mode in &cfg.modes {
        let setup = McSetup { noise_scale: cfg.noise_scale, ..McSetup::new(&sc, ue, mode, &cfg.estimator, cfg.n_trials, cfg.seed) };
        let r = setup.run().map_err(CliError::experiment(format!("Monte-Carlo ({mode})")))?;
        let file = format!("trials_{mode}.csv");
        out.write(&file, |w| write_trials_csv(w, ue, &r))?;
        results.push(McSummary {
            mode,
            file,
            ratio: r.rmse_est / r.rmse_crb,
            rmse_est: r.rmse_est,
            rmse_crb: r.rmse_crb,
            n_trials: r.n_trials,
            failures: r.failures,
            mean_estimate: r.mean_estimate,
        });
    }
    out.finish("mc", cfg, results)
}

pub fn sweep_cmd(cfg: &Resolved) -> Result<(), CliError> {
    let sc = cfg.scenario();
    let sigmas: Vec<f64> = cfg.sigma_angle_deg.iter().map(|d| d.to_radians()).collect();
    let mc = (cfg.mc_trials > 0).then(|| SweepMc { cfg: cfg.estimator.clone(), n_trials: cfg.mc_trials, seed: cfg.seed });
    let s = beamwidth_sweep(&sc, cfg.scenario.ue, &sigmas, cfg.sigma_d, &cfg.subsets, &cfg.modes, mc.as_ref())
        .map_err(CliError::experiment("beamwidth sweep"))?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("sweep.csv", |w| write_sweep_csv(w, &s))?;
    #[derive(Serialize)]
    struct Curve<'a> {
        id: &'a str,
        subset: &'a [usize],
        mode: Mode,
        rmse_crb: &'a [f64],
        rmse_mc: Option<&'a [f64]>,
    }
    #[derive(Serialize)]
    struct R<'a> {
        sigma_angle_deg: &'a [f64],
        sigma_d: f64,
        curves: Vec<Curve<'a>>,
        distance_only: &'a [(String, f64)],
    }
    let curves = s
        .curves
        .iter()
        .map(|c| Curve { id: &c.id, subset: &c.subset, mode: c.mode, rmse_crb: &c.rmse_crb, rmse_mc: c.rmse_mc.as_deref() })
        .collect();
    out.finish("sweep", cfg, R { sigma_angle_deg: &cfg.sigma_angle_deg, sigma_d: s.sigma_d, curves, distance_only: &s.distance_only })
}

#[derive(Serialize)]
pub struct CdfSummary {
    pub id: String,
    pub n: usize,
    pub median: f64,
}

pub fn cdf_cmd(cfg: &Resolved) -> Result<(), CliError> {
    let sc = cfg.scenario();
    let curves = cdf_curve(&sc, &cfg.grid, &cfg.extra_profiles, &cfg.modes);
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("cdf.csv", |w| write_cdf_csv(w, &curves))?;
    let result: Vec<CdfSummary> = curves.iter().map(|c| CdfSummary { id: c.id.clone(), n: c.points.len(), median: c.median }).collect();
    out.finish("cdf", cfg, result)
}

#[derive(Serialize)]
pub struct FieldSummary {
    pub file: String,
    pub n_nodes: usize,
    pub n_valid: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn field_stats(file: &str, f: &Field) -> FieldSummary {
    let v = f.valid_values();
    FieldSummary {
        file: file.to_string(),
        n_nodes: f.values.len(),
        n_valid: v.len(),
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: v.iter().sum::<f64>() / v.len() as f64,
    }
}

pub fn field_cmd(cfg: &Resolved) -> Result<(), CliError> {
    let sc = cfg.scenario();
    let mut out = Outputs::new(&cfg.output_dir)?;
    let mut result = Vec::new();
    for &mode in &cfg.modes {
        let f = crb_grid(&sc, &cfg.grid, &cfg.noise_profile, mode);
        let file = format!("field_{mode}.csv");
        out.write(&file, |w| write_field_csv(w, &f))?;
        result.push(field_stats(&file, &f));
    }
    let d = delta_field(&sc, &cfg.grid, &cfg.noise_profile);
    out.write("delta.csv", |w| write_field_csv(w, &d))?;
    result.push(field_stats("delta.csv", &d));
    out.finish("field", cfg, result)
}

pub fn remmap_cmd(cfg: &Resolved) -> Result<(), CliError> {
    let sc = cfg.scenario();
    let t = &cfg.trajectory;
    let traj = line_trajectory(Point2::new(t.from[0], t.from[1]), Point2::new(t.to[0], t.to[1]), t.n);
    let map = build_rem_map(&sc, &traj, &cfg.estimator, cfg.seed);
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("remmap.csv", |w| write_remmap_csv(w, &map))?;
    #[derive(Serialize)]
    struct R<'a> {
        n_points: usize,
        n_entries: usize,
        failures: &'a [(usize, String)],
        /// Mean distance from each estimated scatterer to its true reflection point, meters.
        mean_scatterer_error: f64,
    }
    let err = map.entries.iter().map(|e| e.scatterer.distance(&e.true_scatterer)).sum::<f64>() / map.entries.len() as f64;
    out.finish("remmap", cfg, R { n_points: traj.len(), n_entries: map.entries.len(), failures: &map.failures, mean_scatterer_error: err })
}
