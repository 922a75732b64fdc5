//! Reproducible experiment runs driven by a JSON config.
//!
//! Every run derives one [`RngStream`] per trajectory from `(seed, id)`, so
//! results do not depend on the number of worker threads. CSV outputs carry
//! no timestamps; JSON summaries put `generated_at_unix` first so that it can
//! be stripped before comparing runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::GammaPosterior;
use crate::error::{Error, Result};
use crate::mixed::{default_ratio_grid, density_ratio_profile, DensityRatioProfile, MixedGammaPosterior, MixingMeasure};
use crate::model::{sample_initial, simulate, ModelParams, Trajectory};
use crate::reference::{bayes_filter, grid_from_mixture, GridDensity};
use crate::sampling::RngStream;
use crate::stability::{
    admissible_p_max, critical_delta, ew_beta_moment, fit_rate, lp_rate, thm4_bound, thm4_constants, tv_mixed_pair,
    tv_series, BoundConstants, StabilityReport,
};
use crate::stats::{ks_two_sample, quantile, RunningMoments};
use crate::VERSION;

/// Slack added to predicted log-rates in pass/fail lines.
pub const RATE_SLACK: f64 = 0.05;
/// L¹ threshold for oracle agreement.
pub const VALIDATION_TOL: f64 = 1e-3;

fn default_delta_fraction() -> f64 {
    crate::stability::DEFAULT_DELTA_FRACTION
}

fn default_grid_nodes() -> usize {
    2048
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub mix0_assumed: MixingMeasure,
    pub mix0_true: MixingMeasure,
    pub horizon: usize,
    pub n_trajectories: usize,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default = "default_delta_fraction")]
    pub delta_fraction: f64,
    pub seed: u64,
    #[serde(default = "default_grid_nodes")]
    pub grid_nodes: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses and validates a config; errors name the offending field path.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "<root>".to_string() } else { path };
            Error::config(field, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 8 {
            return Err(Error::config("horizon", format!("must be at least 8, got {}", self.horizon)));
        }
        if self.n_trajectories < 1 {
            return Err(Error::config("n_trajectories", "must be at least 1"));
        }
        if !(self.delta_fraction > 0.0 && self.delta_fraction < 1.0) {
            return Err(Error::config(
                "delta_fraction",
                format!("must lie in (0, 1), got {}", self.delta_fraction),
            ));
        }
        if self.grid_nodes < 64 {
            return Err(Error::config("grid_nodes", format!("must be at least 64, got {}", self.grid_nodes)));
        }
        if let Some(p) = self.p {
            let (u0, o0) = self.support();
            let p_max = admissible_p_max(&self.params, u0, o0).map_err(|e| Error::config("p", e.to_string()))?;
            if !(p > 0.0 && p < p_max) {
                return Err(Error::config("p", format!("{p} is outside the admissible interval (0, {p_max})")));
            }
        }
        Ok(())
    }

    /// Common support `[u0, o0]` of both initial mixing measures.
    pub fn support(&self) -> (f64, f64) {
        (
            self.mix0_true.support_lo().min(self.mix0_assumed.support_lo()),
            self.mix0_true.support_hi().max(self.mix0_assumed.support_hi()),
        )
    }

    /// Default rate-fit burn-in, a quarter of the horizon.
    pub fn burn_in(&self) -> usize {
        self.horizon / 4
    }

    fn stream(&self, id: usize) -> RngStream {
        RngStream::new(self.seed, id as u64)
    }

    /// Trajectory `id`: `X_0` drawn from the true initial law.
    pub fn trajectory(&self, id: usize) -> Result<Trajectory> {
        let mut rng = self.stream(id);
        let x0 = sample_initial(&mut rng, &self.mix0_true, self.params.q())?;
        simulate(&mut rng, &self.params, x0, self.horizon)
    }
}

/// Everything derived from a config before simulating.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConstants {
    pub u0: f64,
    pub o0: f64,
    pub density_ratio: DensityRatioProfile,
    pub h_certified: bool,
    /// Present only when `H > 0` was certified.
    pub bound: Option<BoundConstants>,
    pub critical_delta: f64,
    pub delta: f64,
    pub predicted_log_rate: f64,
    pub ew_beta: f64,
    pub p_max: f64,
    pub p: Option<f64>,
    pub rho: Option<f64>,
    /// `E(W^p)`, the pure-Gamma `L^p` rate.
    pub ew_p: Option<f64>,
}

pub fn resolve_constants(config: &ExperimentConfig) -> Result<ResolvedConstants> {
    let params = &config.params;
    let q = params.q();
    let (u0, o0) = config.support();
    let grid = default_ratio_grid(&config.mix0_true, &config.mix0_assumed, q);
    let profile = density_ratio_profile(&config.mix0_true, &config.mix0_assumed, q, &grid)?;
    let critical = critical_delta(params);
    let delta = config.delta_fraction * critical;
    let h_certified = profile.h_inf > 0.0 && profile.lip.is_finite();
    let bound = if h_certified {
        let c = thm4_constants(params, u0, o0, profile.h_inf, profile.lip)?.with_delta_fraction(config.delta_fraction)?;
        Some(match config.p {
            Some(p) => c.with_p(params, p)?,
            None => c,
        })
    } else {
        None
    };
    let rho = config.p.map(|p| lp_rate(params, u0, o0, p)).transpose()?;
    let ew_p = config.p.map(|p| ew_beta_moment(params, p)).transpose()?;
    Ok(ResolvedConstants {
        u0,
        o0,
        density_ratio: profile,
        h_certified,
        bound,
        critical_delta: critical,
        delta,
        predicted_log_rate: -delta.ln(),
        ew_beta: ew_beta_moment(params, params.beta())?,
        p_max: admissible_p_max(params, u0, o0)?,
        p: config.p,
        rho,
        ew_p,
    })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    generated_at_unix: u64,
    version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(path: &Path, command: &'static str, config: &ExperimentConfig, body: &T) -> Result<()> {
    let generated_at_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let envelope = Envelope {
        generated_at_unix,
        version: VERSION,
        command,
        config,
        body,
    };
    let text = serde_json::to_string_pretty(&envelope).map_err(|e| Error::numerical(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Five-number style summary of a sample of fitted rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSummary {
    pub count: usize,
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl RateSummary {
    pub fn of(rates: &[f64]) -> Self {
        let mut sorted = rates.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m: RunningMoments = rates.iter().copied().collect();
        Self {
            count: rates.len(),
            mean: m.mean(),
            q25: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
        }
    }
}

/// Whether two samples of fitted rates are compatible: interquartile ranges
/// intersect and a two-sample KS test does not reject at the 1% level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overlap {
    pub iqr_intersect: bool,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
}

impl Overlap {
    pub fn between(a: &[f64], b: &[f64]) -> Self {
        let (sa, sb) = (RateSummary::of(a), RateSummary::of(b));
        let (d, p) = ks_two_sample(a, b);
        Self {
            iqr_intersect: sa.q25 <= sb.q75 && sb.q25 <= sa.q75,
            ks_statistic: d,
            ks_pvalue: p,
        }
    }

    pub fn overlaps(&self) -> bool {
        self.iqr_intersect && self.ks_pvalue > 0.01
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySummary {
    pub constants: ResolvedConstants,
    pub burn_in: usize,
    pub rate_threshold: f64,
    /// `"ok"`, or `"degenerate"` when every TV series is identically zero.
    pub fit_status: String,
    pub fitted_rates: Vec<Option<f64>>,
    pub rate_summary: Option<RateSummary>,
    pub fraction_below_threshold: f64,
    pub truncated_fits: usize,
    pub violations_half_integral: usize,
    pub violations_full_integral: usize,
    pub trajectories_with_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRun {
    pub reports: Vec<StabilityReport>,
    pub summary: StabilitySummary,
}

impl StabilityRun {
    pub fn fitted_rates(&self) -> Vec<f64> {
        self.summary.fitted_rates.iter().flatten().copied().collect()
    }

    /// `trajectory,n,tv,bound,log_tv`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("trajectory,n,tv,bound,log_tv\n");
        for (id, r) in self.reports.iter().enumerate() {
            for (n, (tv, bound)) in r.tv.iter().zip(&r.bound).enumerate() {
                let _ = writeln!(out, "{id},{n},{tv},{bound},{}", tv.ln());
            }
        }
        out
    }
}

/// Simulates every trajectory, runs both filters and the pathwise bound.
pub fn stability_experiment(config: &ExperimentConfig) -> Result<StabilityRun> {
    config.validate()?;
    let constants = resolve_constants(config)?;
    let burn_in = config.burn_in();
    let reports: Vec<StabilityReport> = (0..config.n_trajectories)
        .into_par_iter()
        .map(|id| {
            let path = config.trajectory(id)?;
            let tv = tv_series(&config.params, &config.mix0_true, &config.mix0_assumed, &path.y)?;
            let bound = match &constants.bound {
                Some(c) => thm4_bound(c, config.params.b(), &path.y),
                None => vec![f64::INFINITY; tv.len()],
            };
            StabilityReport::new(tv, bound, burn_in, constants.delta)
        })
        .collect::<Result<_>>()?;
    let fitted_rates: Vec<Option<f64>> = reports.iter().map(|r| r.fitted_rate).collect();
    let rates: Vec<f64> = fitted_rates.iter().flatten().copied().collect();
    let threshold = constants.predicted_log_rate + RATE_SLACK;
    let below = rates.iter().filter(|&&r| r <= threshold).count();
    let summary = StabilitySummary {
        burn_in,
        rate_threshold: threshold,
        fit_status: if rates.is_empty() { "degenerate" } else { "ok" }.to_string(),
        rate_summary: (!rates.is_empty()).then(|| RateSummary::of(&rates)),
        fraction_below_threshold: below as f64 / reports.len() as f64,
        truncated_fits: reports.iter().filter(|r| r.fit_truncated_at.is_some()).count(),
        violations_half_integral: reports.iter().map(|r| r.violations).sum(),
        violations_full_integral: reports.iter().map(|r| r.violations_full).sum(),
        trajectories_with_violations: reports.iter().filter(|r| r.violations + r.violations_full > 0).count(),
        fitted_rates,
        constants,
    };
    Ok(StabilityRun { reports, summary })
}

/// [`stability_experiment`] plus `stability.csv` and `stability_summary.json`
/// in the output directory.
pub fn run_stability(config: &ExperimentConfig) -> Result<StabilityRun> {
    let run = stability_experiment(config)?;
    for r in &run.reports {
        if let Some(end) = r.fit_truncated_at {
            eprintln!("warning: TV underflow, rate fit truncated at n = {end}");
        }
    }
    prepare_dir(&config.output_dir)?;
    fs::write(config.output_dir.join("stability.csv"), run.to_csv_string())?;
    write_json(&config.output_dir.join("stability_summary.json"), "stability", config, &run.summary)?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpRow {
    pub n: usize,
    pub mean_tv_p: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSummary {
    pub constants: ResolvedConstants,
    pub p: f64,
    pub rho: f64,
    pub ln_rho: f64,
    pub ew_p: f64,
    pub ln_ew_p: f64,
    pub rho_at_least_ew_p: bool,
    pub burn_in: usize,
    pub fitted_rate: Option<f64>,
    pub rate_threshold: f64,
    pub passes: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRun {
    pub rows: Vec<LpRow>,
    pub summary: LpSummary,
}

impl LpRun {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("n,mean_tv_p,std_error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.n, r.mean_tv_p, r.std_error);
        }
        out
    }
}

/// Monte-Carlo `E(TV_n^p)` with its fitted log-rate against `ln ρ`.
pub fn lp_experiment(config: &ExperimentConfig) -> Result<LpRun> {
    config.validate()?;
    let p = config
        .p
        .ok_or_else(|| Error::config("p", "required for the L^p experiment"))?;
    let constants = resolve_constants(config)?;
    let series: Vec<Vec<f64>> = (0..config.n_trajectories)
        .into_par_iter()
        .map(|id| {
            let path = config.trajectory(id)?;
            tv_series(&config.params, &config.mix0_true, &config.mix0_assumed, &path.y)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<LpRow> = (0..=config.horizon)
        .map(|n| {
            let m: RunningMoments = series.iter().map(|s| s[n].powf(p)).collect();
            LpRow {
                n,
                mean_tv_p: m.mean(),
                std_error: m.std_error(),
            }
        })
        .collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_tv_p).collect();
    let burn_in = config.burn_in();
    let fitted_rate = fit_rate(&means, burn_in).ok();
    let rho = constants.rho.expect("rho resolved when p is set");
    let ew_p = constants.ew_p.expect("E(W^p) resolved when p is set");
    let threshold = rho.ln() + RATE_SLACK;
    let summary = LpSummary {
        p,
        rho,
        ln_rho: rho.ln(),
        ew_p,
        ln_ew_p: ew_p.ln(),
        rho_at_least_ew_p: rho >= ew_p,
        burn_in,
        fitted_rate,
        rate_threshold: threshold,
        passes: fitted_rate.map(|r| r <= threshold),
        constants,
    };
    Ok(LpRun { rows, summary })
}

pub fn run_lp(config: &ExperimentConfig) -> Result<LpRun> {
    let run = lp_experiment(config)?;
    prepare_dir(&config.output_dir)?;
    fs::write(config.output_dir.join("lp.csv"), run.to_csv_string())?;
    write_json(&config.output_dir.join("lp_summary.json"), "lp", config, &run.summary)?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateRow {
    pub trajectory: usize,
    pub n: usize,
    pub l1_mixed_grid: f64,
    /// Present when the assumed initial law is a single Gamma.
    pub l1_conjugate_grid: Option<f64>,
    pub l1_conjugate_mixed: Option<f64>,
    /// Mixed filter against a grid with half the nodes.
    pub l1_mixed_grid_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateSummary {
    pub grid_nodes: usize,
    pub tolerance: f64,
    pub max_l1_mixed_grid: f64,
    pub max_l1_conjugate_grid: Option<f64>,
    pub max_l1_conjugate_mixed: Option<f64>,
    pub total_l1_full: f64,
    pub total_l1_half: f64,
    /// Halving the grid increases the summed discrepancy.
    pub refinement_monotone: bool,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateRun {
    pub rows: Vec<ValidateRow>,
    pub summary: ValidateSummary,
}

impl ValidateRun {
    pub fn to_csv_string(&self) -> String {
        let mut out =
            String::from("trajectory,n,l1_mixed_grid,l1_conjugate_grid,l1_conjugate_mixed,l1_mixed_grid_half\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.trajectory,
                r.n,
                r.l1_mixed_grid,
                opt(r.l1_conjugate_grid),
                opt(r.l1_conjugate_mixed),
                r.l1_mixed_grid_half
            );
        }
        out
    }
}

fn single_gamma(post: &GammaPosterior) -> Result<MixedGammaPosterior> {
    MixedGammaPosterior::new(post.shape, MixingMeasure::dirac(post.rate)?)
}

/// Closed-form filters against the grid recursion, step by step, on the
/// first `n_trajectories` simulated paths.
pub fn validate_experiment(config: &ExperimentConfig) -> Result<ValidateRun> {
    config.validate()?;
    let params = &config.params;
    let q = params.q();
    let mixed0 = MixedGammaPosterior::new(q, config.mix0_assumed.clone())?;
    let conj0 = (config.mix0_assumed.len() == 1)
        .then(|| GammaPosterior::new(config.mix0_assumed.rate(0), q))
        .transpose()?;
    let grid0 = grid_from_mixture(&mixed0, config.grid_nodes)?;
    let half0 = grid_from_mixture(&mixed0, (config.grid_nodes / 2).max(64))?;
    let per_path: Vec<Vec<ValidateRow>> = (0..config.n_trajectories)
        .into_par_iter()
        .map(|id| {
            let path = config.trajectory(id)?;
            let grids = bayes_filter(&grid0, params, &path.y)?;
            let halves = bayes_filter(&half0, params, &path.y)?;
            let mut mixed = mixed0.clone();
            let mut conj = conj0;
            let mut rows = Vec::with_capacity(path.y.len());
            for (k, &y) in path.y.iter().enumerate() {
                mixed = mixed.update(params, y)?;
                conj = conj.map(|c| c.update(params.b(), y)).transpose()?;
                let (l1_cg, l1_cm) = match &conj {
                    Some(c) => {
                        let as_mix = single_gamma(c)?;
                        (
                            Some(grids[k].l1_to_mixture(&as_mix)),
                            Some(2.0 * tv_mixed_pair(&as_mix, &mixed)?),
                        )
                    }
                    None => (None, None),
                };
                rows.push(ValidateRow {
                    trajectory: id,
                    n: k + 1,
                    l1_mixed_grid: grids[k].l1_to_mixture(&mixed),
                    l1_conjugate_grid: l1_cg,
                    l1_conjugate_mixed: l1_cm,
                    l1_mixed_grid_half: halves[k].l1_to_mixture(&mixed),
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ValidateRow> = per_path.into_iter().flatten().collect();
    let max_of = |f: &dyn Fn(&ValidateRow) -> Option<f64>| rows.iter().filter_map(f).reduce(f64::max);
    let max_mg = max_of(&|r| Some(r.l1_mixed_grid)).unwrap_or(0.0);
    let max_cg = max_of(&|r| r.l1_conjugate_grid);
    let max_cm = max_of(&|r| r.l1_conjugate_mixed);
    let total_full: f64 = rows.iter().map(|r| r.l1_mixed_grid).sum();
    let total_half: f64 = rows.iter().map(|r| r.l1_mixed_grid_half).sum();
    let passes = max_mg <= VALIDATION_TOL && max_cg.is_none_or(|v| v <= VALIDATION_TOL);
    let summary = ValidateSummary {
        grid_nodes: config.grid_nodes,
        tolerance: VALIDATION_TOL,
        max_l1_mixed_grid: max_mg,
        max_l1_conjugate_grid: max_cg,
        max_l1_conjugate_mixed: max_cm,
        total_l1_full: total_full,
        total_l1_half: total_half,
        refinement_monotone: total_half > total_full,
        passes,
    };
    Ok(ValidateRun { rows, summary })
}

pub fn run_validate(config: &ExperimentConfig) -> Result<ValidateRun> {
    let run = validate_experiment(config)?;
    prepare_dir(&config.output_dir)?;
    fs::write(config.output_dir.join("validate.csv"), run.to_csv_string())?;
    write_json(&config.output_dir.join("validate_summary.json"), "validate", config, &run.summary)?;
    Ok(run)
}

/// Writes `trajectory_{id:04}.csv` for every trajectory.
pub fn run_simulate(config: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let paths: Vec<Trajectory> = (0..config.n_trajectories)
        .into_par_iter()
        .map(|id| config.trajectory(id))
        .collect::<Result<_>>()?;
    prepare_dir(&config.output_dir)?;
    for (id, path) in paths.iter().enumerate() {
        path.write_csv(config.output_dir.join(format!("trajectory_{id:04}.csv")))?;
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub trajectory: Trajectory,
    pub posteriors: Vec<MixedGammaPosterior>,
    pub grid_final: GridDensity,
}

impl FilterRun {
    /// `n,y,posterior_mean,posterior_sd,support_lo,support_hi,predictive_mean`;
    /// the predictive mean is that of `Y_{n+1}` and empty when undefined.
    pub fn to_csv_string(&self, params: &ModelParams) -> String {
        let mut out = String::from("n,y,posterior_mean,posterior_sd,support_lo,support_hi,predictive_mean\n");
        for (n, post) in self.posteriors.iter().enumerate() {
            let y = if n == 0 { String::new() } else { self.trajectory.y[n - 1].to_string() };
            let _ = writeln!(
                out,
                "{n},{y},{},{},{},{},{}",
                post.mean(),
                post.variance().sqrt(),
                post.mix.support_lo(),
                post.mix.support_hi(),
                opt(post.predictive_mean(params))
            );
        }
        out
    }
}

/// Runs the mixed filter from the assumed initial law on one trajectory,
/// read from `trajectory` or else simulated as trajectory 0, with the grid
/// filter alongside.
pub fn run_filter(config: &ExperimentConfig, trajectory: Option<&Path>) -> Result<FilterRun> {
    config.validate()?;
    let path = match trajectory {
        Some(p) => Trajectory::read_csv(p)?,
        None => config.trajectory(0)?,
    };
    let params = &config.params;
    let mut post = MixedGammaPosterior::new(params.q(), config.mix0_assumed.clone())?;
    let grid0 = grid_from_mixture(&post, config.grid_nodes)?;
    let grid_final = bayes_filter(&grid0, params, &path.y)?.pop().unwrap_or(grid0);
    let mut posteriors = vec![post.clone()];
    for &y in &path.y {
        post = post.update(params, y)?;
        posteriors.push(post.clone());
    }
    let run = FilterRun {
        trajectory: path,
        posteriors,
        grid_final,
    };
    prepare_dir(&config.output_dir)?;
    fs::write(config.output_dir.join("filter.csv"), run.to_csv_string(params))?;
    run.posteriors
        .last()
        .expect("initial posterior present")
        .write_csv(config.output_dir.join("posterior_final.csv"))?;
    run.grid_final.write_csv(config.output_dir.join("grid_final.csv"))?;
    Ok(run)
}

/// Resolves and writes `constants.json` without simulating.
pub fn run_constants(config: &ExperimentConfig) -> Result<ResolvedConstants> {
    config.validate()?;
    let constants = resolve_constants(config)?;
    prepare_dir(&config.output_dir)?;
    write_json(&config.output_dir.join("constants.json"), "constants", config, &constants)?;
    Ok(constants)
}
