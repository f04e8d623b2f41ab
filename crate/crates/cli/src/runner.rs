//! Per-system runners and the dispatch entry point.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use euler_lab::euler2d::{couette_linear_evolve, weber_residual, CouetteMode, DiagnosticsRecord};
use euler_lab::fit::{linear_fit, loglog_slope};
use euler_lab::ipm::{ipm_run, IpmSettings};
use euler_lab::lagrangian::{
    jacobian_det, passive_scalar_evolve, twisting_series, FnVelocity, Interpolation, PassiveOptions,
};
use euler_lab::models1d::{
    clm_blowup_time, clm_exact, clm_limit_profile, model_run, selfsim_extract, BlowupTime, Model,
    ModelRunConfig, ModelState,
};
use euler_lab::presets::{init_library, Domain, InitialField};
use euler_lab::selfsim::{
    clm_profile, lemma_decomposition_check, linearized_operator, newton_solve, outgoing_check,
    profile_residual, sup_norm, ProfileGrid, ProfileProblem, WeightedSpaceParams,
};
use euler_lab::snapshot::Snapshot;
use euler_lab::{
    biot_savart, Error, EulerRun, EulerState, Grid1, Grid2, ParticleSet, Result, RunSettings,
    SpectralField1, SpectralField2, VectorField2,
};

use crate::config::{ExperimentConfig, System};
use crate::output::{unix_now, Csv, Manifest, OutputDir, Report};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    BlowupDetected,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub report: Report,
    /// `(file name, sha256)` of every artifact except the manifest.
    pub files: Vec<(String, String)>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;

pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::Precondition(_)
        | Error::UnknownPreset(_)
        | Error::InvalidGrid(_)
        | Error::NonzeroMean(_)
        | Error::GridMismatch(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

pub fn exit_code(result: &Result<RunSummary>) -> i32 {
    match result {
        Ok(s) if s.outcome == Outcome::BlowupDetected => EXIT_BLOWUP,
        Ok(_) => EXIT_OK,
        Err(e) => error_exit_code(e),
    }
}

/// Runs the configured experiment, writing artifacts and a manifest into `out_dir`.
/// On failure a manifest listing the artifacts written so far is still emitted.
pub fn dispatch(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let start_unix = unix_now();
    let mut out = OutputDir::create(out_dir)?;
    let result = run_system(cfg, &mut out);
    let status = match &result {
        Ok((Outcome::Completed, _)) => "completed".to_string(),
        Ok((Outcome::BlowupDetected, _)) => "completed: blow-up detected".to_string(),
        Err(e) => format!("failed: {e}"),
    };
    let manifest = Manifest {
        version: VERSION.to_string(),
        system: cfg.system.name().to_string(),
        start_unix,
        end_unix: unix_now(),
        status,
        config_echo: cfg.echo(),
    };
    out.manifest(&manifest)?;
    let (outcome, report) = result?;
    Ok(RunSummary {
        outcome,
        report,
        files: out.files().to_vec(),
    })
}

fn run_system(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(Outcome, Report)> {
    let mut report = Report::default();
    report.text("system", cfg.system).text("version", VERSION);
    let outcome = match cfg.system {
        System::Euler2d => run_euler(cfg, out, &mut report)?,
        System::CouetteLinear => run_couette(cfg, out, &mut report)?,
        System::PassiveScalar => run_passive(cfg, out, &mut report)?,
        System::Clm => run_model(cfg, Model::Clm, out, &mut report)?,
        System::DeGregorio => run_model(cfg, Model::DeGregorio, out, &mut report)?,
        System::Selfsim => run_selfsim(cfg, out, &mut report)?,
        System::LemmaCheck => run_lemma(cfg, &mut report)?,
        System::Ipm => run_ipm(cfg, out, &mut report)?,
    };
    out.report("report.txt", &report)?;
    Ok((outcome, report))
}

fn plane_grid(cfg: &ExperimentConfig) -> Result<Grid2> {
    let nx = cfg.usize("nx");
    let ny = if cfg.has("ny") { cfg.usize("ny") } else { nx };
    Grid2::new(nx, ny)
}

fn plane_init(cfg: &ExperimentConfig, grid: Grid2) -> Result<SpectralField2> {
    match init_library(
        cfg.str("init"),
        &cfg.init_params,
        Domain::Plane(grid),
        cfg.seed,
    )? {
        InitialField::Plane(f) => Ok(f),
        _ => Err(Error::Precondition(format!(
            "preset {} does not define a planar field",
            cfg.str("init")
        ))),
    }
}

fn max_rel_drift(series: &[f64]) -> f64 {
    let first = series[0];
    let scale = first.abs().max(f64::MIN_POSITIVE);
    series
        .iter()
        .fold(0.0f64, |m, v| m.max((v - first).abs() / scale))
}

fn euler_csv(diags: &[DiagnosticsRecord], powers: &[u32]) -> Csv {
    let mut header = vec!["t".to_string(), "energy".into(), "enstrophy".into()];
    header.extend(powers.iter().map(|p| format!("casimir_{p}")));
    header.extend([
        "omega_max".into(),
        "bkm_integral".into(),
        "palinstrophy".into(),
    ]);
    let mut csv = Csv::new(&header);
    for d in diags {
        let mut row = vec![d.t, d.energy, d.enstrophy];
        row.extend(&d.casimirs);
        row.extend([d.omega_max, d.bkm_integral, d.palinstrophy]);
        csv.row(&row);
    }
    csv
}

fn run_euler(cfg: &ExperimentConfig, out: &mut OutputDir, report: &mut Report) -> Result<Outcome> {
    let grid = plane_grid(cfg)?;
    let omega0 = plane_init(cfg, grid)?;
    let powers = cfg.u32_list("casimirs");
    let interpolation = Interpolation::parse(cfg.str("interpolation")).expect("validated choice");
    let settings = RunSettings {
        cfl: cfg.f64("cfl"),
        t_end: cfg.f64("t_end"),
        diag_every: cfg.usize("diag_every"),
        casimir_powers: powers.clone(),
        dt_max: cfg.f64("dt_max"),
        interpolation,
    };
    let state = EulerState::new(omega0.clone(), 0.0)?;
    let u0 = biot_savart(&state.omega.dealias())?;
    let mut run = EulerRun::new(state, settings)?;
    let markers = cfg.usize("markers");
    if markers > 0 {
        run = run.with_markers(ParticleSet::lattice(markers, markers, grid.lx, grid.ly)?);
    }
    run.run()?;
    out.csv("diagnostics.csv", &euler_csv(&run.diagnostics, &powers))?;

    let series =
        |f: &dyn Fn(&DiagnosticsRecord) -> f64| run.diagnostics.iter().map(f).collect::<Vec<f64>>();
    report
        .text("grid", format!("{}x{}", grid.nx, grid.ny))
        .text("steps", run.steps)
        .num("t_final", run.state.t)
        .num("drift_energy", max_rel_drift(&series(&|d| d.energy)))
        .num("drift_enstrophy", max_rel_drift(&series(&|d| d.enstrophy)));
    for (k, p) in powers.iter().enumerate() {
        report.num(
            &format!("drift_casimir_{p}"),
            max_rel_drift(&series(&|d| d.casimirs[k])),
        );
    }
    report
        .num(
            "omega_change_sup",
            (&run.state.omega - &omega0.dealias()).max_abs(),
        )
        .num("bkm_integral", run.bkm);

    let mut blocks = vec![Snapshot::new(
        grid.nx,
        grid.ny,
        run.state.t,
        vec![run.state.omega.to_physical()],
    )?];
    if let Some(m) = &run.markers {
        let fm = run.flow_map()?;
        let jac = jacobian_det(&fm)?;
        report
            .text("markers", format!("{markers}x{markers}"))
            .text("interpolation", interpolation.resolve(&grid).name())
            .num("weber_residual", weber_residual(&run.state, &fm, &u0)?)
            .num("jacobian_max_dev", jac.max_abs_dev_from_1)
            .num("flow_gradient_max", jac.grad_norm_inf);
        blocks.push(Snapshot::particles(m.t, &m.positions, &m.lifts)?);
    }
    if cfg.bool("snapshot") {
        out.snapshots("final.eulb", &blocks)?;
    }
    Ok(Outcome::Completed)
}

/// Sample times `0, dt, 2dt, ...` up to and including `t_end`.
fn sample_times(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Precondition(format!(
            "need dt_out > 0 and t_end >= 0, got {dt} and {t_end}"
        )));
    }
    let count = (t_end / dt + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=count).map(|k| k as f64 * dt).collect();
    if t_end - ts[count] > 1e-9 * dt {
        ts.push(t_end);
    }
    Ok(ts)
}

fn run_couette(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
    report: &mut Report,
) -> Result<Outcome> {
    let modes: Vec<CouetteMode> = if cfg.has("modes") {
        cfg.modes("modes")
            .into_iter()
            .map(|[kx, eta0, amplitude]| CouetteMode {
                kx,
                eta0,
                amplitude,
            })
            .collect()
    } else {
        match init_library(cfg.str("init"), &cfg.init_params, Domain::Fourier, cfg.seed)? {
            InitialField::Modes(m) => m,
            _ => {
                return Err(Error::Precondition(format!(
                    "preset {} does not define Fourier modes",
                    cfg.str("init")
                )))
            }
        }
    };
    let ts = sample_times(cfg.f64("t_end"), cfg.f64("dt_out"))?;
    let mut csv = Csv::new(&[
        "t",
        "u1_l2",
        "u2_l2",
        "omega_h1",
        "shear_u1_l2",
        "shear_omega_h1",
    ]);
    let norms: Vec<_> = ts
        .iter()
        .map(|&t| couette_linear_evolve(&modes, t))
        .collect();
    for n in &norms {
        csv.row(&[
            n.t,
            n.u1_l2,
            n.u2_l2,
            n.omega_h1,
            n.shear_u1_l2,
            n.shear_omega_h1,
        ]);
    }
    out.csv("couette.csv", &csv)?;
    let (t0, t1) = (cfg.f64("fit_t0"), cfg.f64("fit_t1"));
    let u1: Vec<f64> = norms.iter().map(|n| n.u1_l2).collect();
    let u2: Vec<f64> = norms.iter().map(|n| n.u2_l2).collect();
    report
        .text("modes", modes.len())
        .num("fit_t0", t0)
        .num("fit_t1", t1)
        .num("u1_exponent", loglog_slope(&ts, &u1, t0, t1))
        .num("u2_exponent", loglog_slope(&ts, &u2, t0, t1));

    let m = cfg.usize("twist_markers");
    if m > 0 {
        twisting(cfg, m, out, report)?;
    }
    Ok(Outcome::Completed)
}

/// Winding spread of a marker block in the strip `ymin <= y <= ymax` under Couette flow,
/// optionally perturbed by the stream function `ε cos x sin²(y/2)`, which keeps the
/// strip `0 < y < 2π` invariant.
fn twisting(
    cfg: &ExperimentConfig,
    m: usize,
    out: &mut OutputDir,
    report: &mut Report,
) -> Result<()> {
    let (ymin, ymax) = (cfg.f64("twist_ymin"), cfg.f64("twist_ymax"));
    if !(0.0 < ymin && ymin < ymax && ymax < 2.0 * PI) || m < 2 {
        return Err(Error::Precondition(format!(
            "twisting strip [{ymin}, {ymax}] must lie inside (0, 2π) with at least 2 markers"
        )));
    }
    let eps = cfg.f64("twist_eps");
    let t_end = if cfg.has("twist_t_end") {
        cfg.f64("twist_t_end")
    } else {
        cfg.f64("t_end")
    };
    let lx = 2.0 * PI;
    let mut pts = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            pts.push([
                lx * i as f64 / m as f64,
                ymin + (ymax - ymin) * j as f64 / (m - 1) as f64,
            ]);
        }
    }
    let particles = ParticleSet::from_points(&pts, lx, 2.0 * PI)?;
    let source = FnVelocity(move |p: [f64; 2], _t: f64| {
        let (x, y) = (p[0], p[1]);
        let (s, c) = (0.5 * y).sin_cos();
        [y - eps * x.cos() * s * c, -eps * x.sin() * s * s]
    });
    let (records, _) = twisting_series(
        &particles,
        &source,
        cfg.f64("twist_dt"),
        t_end,
        cfg.f64("twist_every"),
    );
    let mut csv = Csv::new(&["t", "spread", "spread_couette"]);
    let (mut max_err, mut ratio_min, mut ratio_max) = (0.0f64, f64::INFINITY, 0.0f64);
    for r in &records {
        let expected = r.t * (ymax - ymin) / lx;
        csv.row(&[r.t, r.spread, expected]);
        max_err = max_err.max((r.spread - expected).abs());
        if r.t > 0.0 {
            ratio_min = ratio_min.min(r.spread / expected);
            ratio_max = ratio_max.max(r.spread / expected);
        }
    }
    out.csv("twisting.csv", &csv)?;
    report
        .num("twist_eps", eps)
        .num("twist_t_end", t_end)
        .num("twist_max_abs_error", max_err)
        .num("twist_ratio_min", ratio_min)
        .num("twist_ratio_max", ratio_max);
    Ok(())
}

fn run_passive(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
    report: &mut Report,
) -> Result<Outcome> {
    let grid = plane_grid(cfg)?;
    let f0 = plane_init(cfg, grid)?;
    let amp = cfg.f64("velocity_amp");
    let u1 = match cfg.str("velocity") {
        "shear" => SpectralField2::from_fn(grid, |_, y| amp * y.sin()),
        _ => SpectralField2::from_fn(grid, |_, _| amp),
    };
    let u = VectorField2::new(u1, SpectralField2::zeros(grid))?;
    let w = cfg.f64("ramp_halfwidth");
    if !(w > 0.0 && w < 0.5 * grid.ly) {
        return Err(Error::Precondition(format!(
            "ramp_halfwidth = {w} must lie in (0, ly/2)"
        )));
    }
    let ramp = move |y: f64| {
        let yc = if y >= PI { y - 2.0 * PI } else { y };
        if yc.abs() <= w {
            1.0 - yc / w
        } else {
            0.0
        }
    };
    let tests = vec![
        grid.sample(|x, y| x.cos() * ramp(y)),
        grid.sample(|x, y| x.sin() * ramp(y)),
    ];
    let t_end = cfg.f64("t_end");
    let opts = PassiveOptions {
        cfl: cfg.f64("cfl"),
        sample_every: cfg.f64("sample_every"),
        tests,
        ..Default::default()
    };
    let run = passive_scalar_evolve(&u, &f0, t_end, &opts)?;
    let mut csv = Csv::new(&["t", "pairing_cos", "pairing_sin", "amplitude"]);
    let amps: Vec<f64> = run.pairings.iter().map(|p| p[0].hypot(p[1])).collect();
    for ((t, p), a) in run.times.iter().zip(&run.pairings).zip(&amps) {
        csv.row(&[*t, p[0], p[1], *a]);
    }
    out.csv("pairings.csv", &csv)?;
    let t0 = cfg.f64("fit_t0");
    let t1 = if cfg.has("fit_t1") {
        cfg.f64("fit_t1")
    } else {
        t_end
    };
    let window: Vec<f64> = run
        .times
        .iter()
        .zip(&amps)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(_, a)| *a)
        .collect();
    let (lo, hi) = window.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), a| {
        (lo.min(*a), hi.max(*a))
    });
    report
        .text("velocity", cfg.str("velocity"))
        .num("decay_exponent", loglog_slope(&run.times, &amps, t0, t1))
        .num("amplitude_window_min_over_max", lo / hi)
        .num("amplitude_initial", amps[0])
        .num("amplitude_final", *amps.last().expect("initial sample"));
    Ok(Outcome::Completed)
}

fn run_model(
    cfg: &ExperimentConfig,
    model: Model,
    out: &mut OutputDir,
    report: &mut Report,
) -> Result<Outcome> {
    let grid = Grid1::new(cfg.usize("n"))?;
    let omega0: SpectralField1 = match init_library(
        cfg.str("init"),
        &cfg.init_params,
        Domain::Line(grid),
        cfg.seed,
    )? {
        InitialField::Line(f) => f,
        _ => {
            return Err(Error::Precondition(format!(
                "preset {} does not define a field on the line",
                cfg.str("init")
            )))
        }
    };
    let exact = (model == Model::Clm).then(|| clm_blowup_time(&omega0));
    let oracle_times = cfg.f64_list("oracle_times");
    let taus = cfg.f64_list("rescale_taus");
    if model != Model::Clm && !oracle_times.is_empty() {
        return Err(Error::Precondition(
            "oracle_times needs the CLM model".into(),
        ));
    }
    let exact_finite = match exact {
        Some(BlowupTime::Finite { t_star, x_star }) => Some((t_star, x_star)),
        _ => None,
    };
    if !taus.is_empty() && exact_finite.is_none() {
        return Err(Error::Precondition(
            "rescale_taus needs CLM data with a finite exact blow-up time".into(),
        ));
    }
    let mut snapshot_times = oracle_times.clone();
    if let Some((t_star, _)) = exact_finite {
        snapshot_times.extend(taus.iter().map(|tau| t_star - tau));
    }
    let max_n = cfg.usize("max_n");
    let run_cfg = ModelRunConfig {
        cfl: cfg.f64("cfl"),
        t_end: cfg.f64("t_end"),
        omega_cap: cfg.f64("omega_cap"),
        tail_tol: cfg.f64("tail_tol"),
        snapshot_times,
        max_n: (max_n > 0).then_some(max_n),
    };
    let rep = model_run(ModelState::new(omega0.clone(), model), &run_cfg)?;

    let mut csv = Csv::new(&["t", "omega_max", "bkm_integral"]);
    for i in 0..rep.times.len() {
        csv.row(&[rep.times[i], rep.omega_max_series[i], rep.bkm_series[i]]);
    }
    out.csv("series.csv", &csv)?;

    report
        .text("model", model.name())
        .text("n", grid.n)
        .text("final_n", rep.final_n)
        .text("steps", rep.steps)
        .num("t_final", rep.final_state.t)
        .num(
            "omega_max_final",
            *rep.omega_max_series.last().expect("initial sample"),
        )
        .text("detected", rep.detected)
        .opt("t_star_estimate", rep.t_star_estimate)
        .text("under_resolved", rep.under_resolved)
        .opt("under_resolved_at", rep.under_resolved_at);
    if let Some(bt) = exact {
        report.opt("t_star_exact", bt.t_star());
        if let (Some(est), Some(ex)) = (rep.t_star_estimate, bt.t_star()) {
            report.num("t_star_rel_error", (est - ex).abs() / ex);
        }
    }
    let mut level = 10.0;
    let mut prev = rep.bkm_at_level(1.0);
    let mut min_increment = f64::INFINITY;
    while level <= run_cfg.omega_cap * (1.0 + 1e-12) {
        let b = rep.bkm_at_level(level);
        report.opt(&format!("bkm_at_{level:e}"), b);
        if let (Some(p), Some(b)) = (prev, b) {
            let inc = b - p;
            report.num(&format!("bkm_increment_to_{level:e}"), inc);
            if level > 10.0 {
                min_increment = min_increment.min(inc);
            }
        }
        prev = b;
        level *= 10.0;
    }
    if min_increment.is_finite() {
        report.num("bkm_min_decade_increment", min_increment);
    }

    if !oracle_times.is_empty() {
        let level = cfg.f64("oracle_level");
        let (mut err, mut count) = (0.0f64, 0usize);
        for s in rep.snapshots.iter().filter(|s| {
            oracle_times
                .iter()
                .any(|t| (t - s.t).abs() <= 1e-12 * t.abs().max(1.0))
        }) {
            let reference = match clm_exact(&omega0.resample(*s.omega.grid()), s.t) {
                Ok(r) => r,
                Err(Error::PastBlowup { .. }) => continue,
                Err(e) => return Err(e),
            };
            if reference.max_abs() > level {
                continue;
            }
            let (a, b) = (s.omega.to_physical(), reference.to_physical());
            err = a.iter().zip(&b).fold(err, |m, (x, y)| m.max((x - y).abs()));
            count += 1;
        }
        report
            .num("oracle_level", level)
            .text("oracle_samples", count)
            .num("oracle_error", err);
    }

    if let (Some((t_star, x_star)), false, true) = (exact_finite, taus.is_empty(), rep.detected) {
        let points = cfg.usize("rescale_points").max(2);
        let extent = cfg.f64("rescale_extent");
        let xs: Vec<f64> = (0..points)
            .map(|k| -extent + 2.0 * extent * k as f64 / (points - 1) as f64)
            .collect();
        let resc = selfsim_extract(&rep, x_star, None, &xs)?;
        let mut header = vec!["X".to_string(), "limit".into()];
        header.extend(resc.taus.iter().map(|tau| format!("tau_{tau:e}")));
        let mut csv = Csv::new(&header);
        for (k, x) in xs.iter().enumerate() {
            let mut row = vec![*x, clm_limit_profile(*x)];
            row.extend(resc.profiles.iter().map(|p| p[k]));
            csv.row(&row);
        }
        out.csv("rescaled.csv", &csv)?;
        report.num("rescale_t_star_exact", t_star);
        for (k, (tau, p)) in resc.taus.iter().zip(&resc.profiles).enumerate() {
            let e = xs
                .iter()
                .zip(p)
                .fold(0.0f64, |m, (x, v)| m.max((v - clm_limit_profile(*x)).abs()));
            report
                .num(&format!("rescale_tau_{k}"), *tau)
                .num(&format!("rescale_error_{k}"), e);
        }
        for (k, c) in resc.cauchy.iter().enumerate() {
            report.num(&format!("rescale_cauchy_{k}"), *c);
        }
    }

    let final_values = rep.final_state.omega.to_physical();
    out.snapshots(
        "final.eulb",
        &[Snapshot::new(
            final_values.len(),
            1,
            rep.final_state.t,
            vec![final_values],
        )?],
    )?;
    Ok(if rep.detected {
        Outcome::BlowupDetected
    } else {
        Outcome::Completed
    })
}

fn run_selfsim(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
    report: &mut Report,
) -> Result<Outcome> {
    let grid = ProfileGrid::new(cfg.usize("n"), cfg.f64("scale"))?;
    let mut problem = ProfileProblem::new(grid);
    problem.slope = cfg.f64("slope");
    problem.tol = cfg.f64("tol");
    problem.max_iters = cfg.usize("max_iters");
    let p = cfg.f64("perturbation");
    let omega0 = match cfg.str("guess") {
        "perturbed_profile" => problem
            .grid
            .sample(|x| clm_profile(x) + p * x * (-x * x).exp()),
        _ => problem.grid.sample(|x| problem.slope * x * (-x * x).exp()),
    };
    let sol = newton_solve(&problem, &omega0, cfg.f64("lambda0"))?;
    let g = &problem.grid;
    let mut csv = Csv::new(&["X", "Omega"]);
    for (x, w) in g.xs.iter().zip(&sol.omega) {
        csv.row(&[*x, *w]);
    }
    out.csv("profile.csv", &csv)?;

    let lin = linearized_operator(g, &sol.omega, sol.lambda);
    let scaling = g.x_dx(&sol.omega);
    let kernel_norm = sup_norm(&lin.apply(&scaling, 0.0)) / sup_norm(&scaling);

    let delta = g.sample(|x| (x - 0.3) * (-(x - 0.3) * (x - 0.3)).exp());
    let d_lambda = 0.4;
    let r0 = profile_residual(g, &sol.omega, sol.lambda)?;
    let dr = lin.apply(&delta, d_lambda);
    let fd_error = |eps: f64| -> Result<f64> {
        let pert: Vec<f64> = sol
            .omega
            .iter()
            .zip(&delta)
            .map(|(w, d)| w + eps * d)
            .collect();
        let r1 = profile_residual(g, &pert, sol.lambda + eps * d_lambda)?;
        Ok(sup_norm(
            &(0..g.n)
                .map(|i| (r1[i] - r0[i]) / eps - dr[i])
                .collect::<Vec<f64>>(),
        ))
    };
    let (e1, e2) = (fd_error(1e-4)?, fd_error(1e-5)?);
    // CLM profiles carry no transport, so the outgoing velocity is zero.
    let outgoing = outgoing_check(&g.xs, &vec![0.0; g.n], sol.lambda, cfg.f64("c_floor"));
    let exact = g.sample(clm_profile);
    report
        .num("lambda", sol.lambda)
        .num("lambda_error", (sol.lambda - 1.0).abs())
        .num("residual", sol.residual_norm)
        .text("iters", sol.newton_iters)
        .text("converged", sol.converged)
        .num(
            "profile_error",
            sol.omega
                .iter()
                .zip(&exact)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        )
        .num("kernel_norm", kernel_norm)
        .num("frechet_error_1e-4", e1)
        .num("frechet_error_1e-5", e2)
        .num("frechet_ratio", e1 / e2)
        .num("outgoing_c", outgoing.c_estimate)
        .text("outgoing_certified", outgoing.certified);
    Ok(Outcome::Completed)
}

fn polynomial(coeffs: Vec<f64>) -> impl Fn(f64) -> f64 {
    move |x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn run_lemma(cfg: &ExperimentConfig, report: &mut Report) -> Result<Outcome> {
    let params = WeightedSpaceParams::new(cfg.f64("n_weight"), cfg.f64("delta"))?;
    let u = polynomial(cfg.f64_list("u_coeffs"));
    let g = polynomial(cfg.f64_list("g_coeffs"));
    let d = lemma_decomposition_check(&u, &g, &params)?;
    report
        .num("n_weight", params.n_weight)
        .num("delta", params.delta)
        .text("certified", d.certified)
        .num("inner_estimate", d.inner_ratio)
        .num("c_coercivity", d.c_coercivity)
        .num("full_min_eig", d.full_min_eig)
        .text("rank", d.rank)
        .text("boundary_nodes", d.boundary_nodes)
        .text("nodes", d.nodes.len());
    Ok(Outcome::Completed)
}

fn run_ipm(cfg: &ExperimentConfig, out: &mut OutputDir, report: &mut Report) -> Result<Outcome> {
    let grid = plane_grid(cfg)?;
    let rho0 = plane_init(cfg, grid)?;
    let powers = cfg.u32_list("casimirs");
    let settings = IpmSettings {
        cfl: cfg.f64("cfl"),
        t_end: cfg.f64("t_end"),
        diag_every: cfg.usize("diag_every"),
        casimir_powers: powers.clone(),
        dt_max: cfg.f64("dt_max"),
        tail_tol: cfg.f64("tail_tol"),
        stop_when_under_resolved: cfg.bool("stop_when_under_resolved"),
    };
    let run = ipm_run(rho0.clone(), &settings)?;
    let mut header = vec![
        "t".to_string(),
        "grad_rho_max".into(),
        "potential_energy".into(),
        "mass".into(),
    ];
    header.extend(powers.iter().map(|p| format!("casimir_{p}")));
    header.push("tail".into());
    let mut csv = Csv::new(&header);
    for d in &run.diagnostics {
        let mut row = vec![d.t, d.grad_rho_max, d.potential_energy, d.mass];
        row.extend(&d.casimirs);
        row.push(d.tail);
        csv.row(&row);
    }
    out.csv("diagnostics.csv", &csv)?;

    let resolved: Vec<_> = run
        .diagnostics
        .iter()
        .filter(|d| run.under_resolved_at.is_none_or(|t| d.t < t))
        .collect();
    let grad_monotone = resolved
        .windows(2)
        .all(|w| w[1].grad_rho_max > w[0].grad_rho_max);
    let ts: Vec<f64> = resolved.iter().map(|d| d.t).collect();
    let pot: Vec<f64> = resolved.iter().map(|d| d.potential_energy).collect();
    let (pot_slope, _) = linear_fit(&ts, &pot);
    let (first, last) = (resolved[0], resolved[resolved.len() - 1]);
    report
        .text("steps", run.steps)
        .num("t_final", run.state.t)
        .opt("under_resolved_at", run.under_resolved_at)
        .text("resolved_samples", resolved.len())
        .text("grad_rho_monotone", grad_monotone)
        .num("grad_rho_initial", first.grad_rho_max)
        .num("grad_rho_resolved_final", last.grad_rho_max)
        .num(
            "potential_energy_change",
            last.potential_energy - first.potential_energy,
        )
        .num("potential_energy_slope", pot_slope)
        .num(
            "rho_change_sup",
            (&run.state.rho - &rho0.dealias()).max_abs(),
        );
    let casimir_drift: BTreeMap<u32, f64> = powers
        .iter()
        .enumerate()
        .map(|(k, p)| {
            (
                *p,
                max_rel_drift(&resolved.iter().map(|d| d.casimirs[k]).collect::<Vec<f64>>()),
            )
        })
        .collect();
    for (p, d) in casimir_drift {
        report.num(&format!("drift_casimir_{p}"), d);
    }
    if cfg.bool("snapshot") {
        out.snapshots(
            "final.eulb",
            &[Snapshot::new(
                grid.nx,
                grid.ny,
                run.state.t,
                vec![run.state.rho.to_physical()],
            )?],
        )?;
    }
    Ok(Outcome::Completed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::output::parse_report;

    fn run(text: &str) -> (Result<RunSummary>, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(text).unwrap();
        (dispatch(&cfg, dir.path()), dir)
    }

    #[test]
    fn zero_length_run_emits_initial_diagnostics_only() {
        let (res, dir) = run("system = euler2d\nnx = 16\nt_end = 0\n");
        assert_eq!(exit_code(&res), EXIT_OK);
        let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(dir.path().join("manifest.txt").exists());
    }

    #[test]
    fn failures_still_write_a_manifest() {
        let (res, dir) = run("system = lemma_check\nu_coeffs = 0,1\n");
        assert_eq!(exit_code(&res), EXIT_CONFIG);
        let m = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        let status = parse_report(&m)
            .into_iter()
            .find(|(k, _)| k == "status")
            .unwrap()
            .1;
        assert!(status.starts_with("failed"));
    }

    #[test]
    fn blowup_is_reported_with_its_own_exit_code() {
        let (res, _dir) = run("system = clm\nn = 256\nt_end = 3\nomega_cap = 20\ntail_tol = 1\n");
        assert_eq!(exit_code(&res), EXIT_BLOWUP);
        let (res, _dir) = run("system = clm\nn = 64\nt_end = 1\ninit.shift = 2\n");
        assert_eq!(exit_code(&res), EXIT_OK);
    }

    #[test]
    fn repeated_runs_are_byte_identical() {
        let text = "system = clm\nn = 128\nt_end = 1.5\nseed = 3\n";
        let (a, _da) = run(text);
        let (b, _db) = run(text);
        assert_eq!(a.unwrap().files, b.unwrap().files);
    }

    #[test]
    fn sample_times_hit_the_end() {
        assert_eq!(sample_times(1.0, 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(sample_times(1.2, 0.5).unwrap(), vec![0.0, 0.5, 1.0, 1.2]);
        assert_eq!(sample_times(0.0, 1.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn polynomial_evaluates_ascending_coefficients() {
        let p = polynomial(vec![0.0, 1.0, -1.0]);
        assert_eq!(p(0.5), 0.25);
    }
}
