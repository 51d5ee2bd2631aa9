use std::fmt::Write as _;
use std::path::Path;

use cavity::energy::{energy_profile, growth_fit, static_density, total_energy};
use cavity::exec::{par_map, parallel_available};
use cavity::photons::spectrum;
use cavity::{CavityConfig, FieldSolution};
use serde_json::{json, Value};

use crate::args::{BackendArg, Command, Common, TimeGrid};
use crate::compare;
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, RunWriter};
use crate::num;
use crate::sweep::{self, SweepSpec};

/// Load and validate a configuration file.
pub fn load_config(path: &Path) -> CliResult<CavityConfig> {
    Ok(CavityConfig::load(path)?.validated()?)
}

/// Solver for `cfg`, continued past `cfg.stop_time` when one is set.
pub fn build_solution(cfg: &CavityConfig, backend: BackendArg) -> cavity::Result<FieldSolution> {
    let running = CavityConfig { stop_time: None, ..*cfg };
    let sol = match backend {
        BackendArg::Exact => FieldSolution::exact(running)?,
        BackendArg::Pert => FieldSolution::perturbative(running)?,
        BackendArg::Rg => FieldSolution::auto_rg(running)?,
        BackendArg::Series => FieldSolution::series(running, None)?,
    };
    match cfg.stop_time {
        Some(stop) => sol.extend_post_stop(stop),
        None => Ok(sol),
    }
}

fn config_value(cfg: &CavityConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn grid_value(grid: &TimeGrid, lambda: f64) -> Value {
    json!({ "t0": grid.t0, "t1": grid.t1.unwrap_or(10.0 * lambda), "steps": grid.steps })
}

/// Run `f` on a pool of `jobs` threads (all cores for 0).
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce(bool) -> T + Send) -> CliResult<T> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(|| f(jobs != 1)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        Ok(f(false))
    }
}

pub fn run(command: Command) -> CliResult<RunManifest> {
    match command {
        Command::Solve { common, grid, backend } => solve(&common, &grid, backend),
        Command::Energy { common, grid, points, backend } => energy(&common, &grid, points, backend),
        Command::Spectrum { common, stop_time, m_max, cutoff, backend } => run_spectrum(&common, stop_time, m_max, cutoff, backend),
        Command::Compare { common, grid } => run_compare(&common, &grid),
        Command::Sweep { common, backend } => run_sweep(&common, backend),
    }
}

pub fn solve(common: &Common, grid: &TimeGrid, backend: BackendArg) -> CliResult<RunManifest> {
    let cfg = load_config(&common.config)?;
    let sol = build_solution(&cfg, backend)?;
    let times = grid.points(cfg.lambda);
    let rows = with_pool(common.jobs, |par| par_map(&times, par, |&t| sol.eval_gf(t)))?;
    let mut csv = String::from("t,g,f\n");
    for (t, r) in times.iter().zip(rows) {
        let (g, f) = r?;
        writeln!(csv, "{},{},{}", num(*t), num(g), num(f)).expect("write to string");
    }
    let mut w = RunWriter::create(&common.out, "solve")?;
    w.write("gf.csv", &csv)?;
    w.finish(
        config_value(&cfg),
        sol.backend().as_str(),
        json!({ "guard": cavity::moore::DEFAULT_GUARD }),
        json!({ "grid": grid_value(grid, cfg.lambda) }),
    )
}

pub fn energy(common: &Common, grid: &TimeGrid, points: usize, backend: BackendArg) -> CliResult<RunManifest> {
    let cfg = load_config(&common.config)?;
    let sol = build_solution(&cfg, backend)?;
    let times = grid.points(cfg.lambda);
    let t_profile = *times.last().expect("grid has a point");
    let (profile, totals) = with_pool(common.jobs, |par| {
        let profile = energy_profile(&sol, t_profile, points, par);
        let totals = par_map(&times, par, |&t| total_energy(&sol, t));
        (profile, totals)
    })?;
    let profile = profile?;
    let mut csv = String::from("t,total_energy\n");
    let mut series = Vec::with_capacity(times.len());
    for (t, e) in times.iter().zip(totals) {
        let e = e?;
        writeln!(csv, "{},{}", num(*t), num(e.value)).expect("write to string");
        series.push((*t, e.value));
    }
    let static_energy = static_density(cfg.lambda) * cfg.lambda;
    let fit = match growth_fit(&series, static_energy) {
        Ok(f) => json!({ "model": f.model, "rate": f.rate, "r_squared": f.r_squared }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let mut w = RunWriter::create(&common.out, "energy")?;
    w.write("profile.csv", &profile.to_csv())?;
    w.write("energy.csv", &csv)?;
    w.finish(
        config_value(&cfg),
        sol.backend().as_str(),
        json!({ "quadrature_abs": 1e-10 / cfg.lambda, "quadrature_rel": 1e-9 }),
        json!({
            "grid": grid_value(grid, cfg.lambda),
            "profile_time": t_profile,
            "profile_points": points,
            "static_energy": static_energy,
            "growth_fit": fit,
        }),
    )
}

pub fn run_spectrum(common: &Common, stop_time: Option<f64>, m_max: u32, cutoff: u32, backend: BackendArg) -> CliResult<RunManifest> {
    let mut cfg = load_config(&common.config)?;
    cfg.stop_time = stop_time.or(cfg.stop_time);
    if cfg.stop_time.is_none() {
        return Err(CliError::Config("spectrum needs --stop-time or stop_time in the config".into()));
    }
    let sol = build_solution(&cfg, backend)?;
    let table = with_pool(common.jobs, |par| spectrum(&sol, m_max, cutoff, par))??;
    let mut w = RunWriter::create(&common.out, "spectrum")?;
    w.write("spectrum.csv", &table.to_csv())?;
    w.finish(
        config_value(&cfg),
        sol.backend().as_str(),
        json!({ "validity_m_delta": cavity::photons::VALIDITY, "cutoff": cutoff }),
        json!({ "stop_time": table.stop, "delta": table.delta, "m_max": m_max }),
    )
}

pub fn run_compare(common: &Common, grid: &TimeGrid) -> CliResult<RunManifest> {
    let cfg = load_config(&common.config)?;
    let sols = [
        build_solution(&cfg, BackendArg::Exact)?,
        build_solution(&cfg, BackendArg::Pert)?,
        build_solution(&cfg, BackendArg::Rg)?,
    ];
    let times = grid.points(cfg.lambda);
    let rows = with_pool(common.jobs, |par| compare::compare_rows(&sols, &times, par))??;
    let report = compare::bands(&cfg, &rows);
    let mut w = RunWriter::create(&common.out, "compare")?;
    w.write("compare.csv", &compare::to_csv(&rows))?;
    let backends = sols.iter().map(|s| s.backend().as_str()).collect::<Vec<_>>().join(",");
    let manifest = w.finish(
        config_value(&cfg),
        &backends,
        json!({
            "short_window_qat": compare::SHORT_WINDOW_QAT,
            "short_band_eps2": compare::SHORT_BAND_EPS2,
            "track_band_steps": compare::TRACK_BAND_STEPS,
            "rounding_floor": compare::ROUNDING_FLOOR,
        }),
        json!({ "grid": grid_value(grid, cfg.lambda), "bands": report }),
    )?;
    if !report.ok() {
        return Err(CliError::Band(format!(
            "short-window max |dG| {:e} (band {:e}), mean |G_rg - G_exact| {:?} (band {:e})",
            report.short_max_deviation, report.short_band, report.track_mean_rg, report.track_band
        )));
    }
    Ok(manifest)
}

pub fn run_sweep(common: &Common, backend: BackendArg) -> CliResult<RunManifest> {
    let spec = SweepSpec::load(&common.config)?;
    let points = spec.points();
    // rows run concurrently; each one is sequential inside
    let rows = with_pool(common.jobs, |par| par_map(&points, par, |p| sweep::evaluate(p, &spec.run, backend, false)))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let mut w = RunWriter::create(&common.out, "sweep")?;
    w.write("sweep.csv", &sweep::to_csv(&rows))?;
    let manifest = w.finish(
        serde_json::to_value(&spec).expect("sweep spec serializes"),
        backend.as_str(),
        json!({ "cutoff": spec.run.cutoff }),
        json!({ "rows": rows.len(), "failed": failed, "parallel": parallel_available() && common.jobs != 1 }),
    )?;
    if failed > 0 {
        return Err(CliError::PartialSweep { failed, total: rows.len() });
    }
    Ok(manifest)
}
