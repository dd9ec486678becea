//! Task execution and run-directory assembly.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use flatlab_core::bergman::{SpaceDomain, TruncatedSpace};
use flatlab_core::density::{
    cover_density_with, raw_density, surface_density_with, upper_density_euclidean_with, CenterSampler,
    DensityReport, EndData,
};
use flatlab_core::divisors::{jensen_residual, Polynomial};
use flatlab_core::sequences::{random_offsets, PointSequence, Rect};
use flatlab_core::weights::{WeightKind, WeightModel};
use flatlab_core::Exec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{
    sequence_window, surface_model, Context, DensityMode, DensitySpec, Scenario, SequenceSpec, SweepVariable,
    TaskKind,
};
use crate::output::{self, num, to_pretty, ManifestInput};
use crate::CliError;

/// What a task hands back: the report body, flat metrics for sweeps, extra
/// files, and diagnostics for the manifest.
pub struct TaskOutput {
    pub result: Value,
    pub metrics: Vec<(String, f64)>,
    pub files: Vec<(String, Vec<u8>)>,
    pub diagnostics: Value,
}

fn missing(what: &str) -> CliError {
    CliError::Input(format!("scenario is missing {what}"))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run(config: &Path, sweep: bool, exec: Exec, jobs: usize) -> Result<PathBuf, CliError> {
    let scenario = Scenario::load(config)?;
    let started_at = chrono::Utc::now();
    let ctx = Context {
        base_dir: config.parent().map(Path::to_path_buf).unwrap_or_default(),
        seed: scenario.seed,
    };
    let task = if sweep { TaskKind::Sweep } else { scenario.task };
    let out = run_task(&scenario, task, &ctx, exec)?;

    let dir = output::create_run_dir(
        &scenario.output_dir,
        &scenario.name,
        scenario.seed,
        &started_at.format("%Y%m%dT%H%M%SZ").to_string(),
    )?;
    let report = json!({
        "name": scenario.name,
        "task": task,
        "seed": scenario.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "result": out.result,
    });
    let mut inventory = Vec::new();
    let report_bytes = to_pretty(&report);
    output::write_file(&dir, "report.json", &report_bytes)?;
    inventory.push(("report.json".to_string(), report_bytes.len()));
    for (name, bytes) in &out.files {
        output::write_file(&dir, name, bytes)?;
        inventory.push((name.clone(), bytes.len()));
    }
    let manifest = output::manifest(ManifestInput {
        scenario: serde_json::to_value(&scenario).map_err(|e| CliError::Input(e.to_string()))?,
        config_path: config,
        started_at: started_at.to_rfc3339(),
        seed: scenario.seed,
        backend: match exec {
            Exec::Parallel if Exec::parallel_available() => "parallel",
            _ => "sequential",
        },
        jobs,
        files: &inventory,
        diagnostics: out.diagnostics,
    });
    output::write_atomic(&dir, "manifest.json", &to_pretty(&manifest))?;
    Ok(dir)
}

fn run_task(scenario: &Scenario, task: TaskKind, ctx: &Context, exec: Exec) -> Result<TaskOutput, CliError> {
    match task {
        TaskKind::Density => density(scenario, ctx, exec),
        TaskKind::Interp => interp(scenario, ctx, exec),
        TaskKind::Kernel => kernel(scenario, ctx, exec),
        TaskKind::Jensen => jensen(scenario, ctx),
        TaskKind::Sweep => sweep(scenario, ctx, exec),
    }
}

fn weight_and_sequence(scenario: &Scenario, ctx: &Context) -> Result<(WeightModel, PointSequence), CliError> {
    let w = ctx.weight(scenario.weight.as_ref().ok_or_else(|| missing("a [weight] table"))?)?;
    let spec = scenario.sequence.as_ref().ok_or_else(|| missing("a [sequence] table"))?;
    let g = ctx.sequence(spec, &mut rng_for(ctx.seed, 0))?;
    Ok((w, g))
}

fn density_json(rep: &DensityReport) -> Value {
    json!({
        "ladder": rep.ladder,
        "extrapolated": num(rep.extrapolated),
        "per_radius": rep.per_radius.iter().map(|t| json!({
            "r": t.r,
            "sup_ratio": num(t.sup_ratio),
            "argmax": t.argmax,
            "admissible": t.admissible,
            "skipped": t.skipped,
        })).collect::<Vec<_>>(),
        "centers_flagged": rep.centers_flagged.len(),
        "samples": rep.samples.len(),
    })
}

fn density_metrics(rep: &DensityReport) -> Vec<(String, f64)> {
    let mut m = vec![("extrapolated".to_string(), rep.extrapolated)];
    m.extend(rep.per_radius.iter().map(|t| (format!("sup_ratio_r{}", t.r), t.sup_ratio)));
    m
}

fn csv_bytes(rep: &DensityReport) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    rep.write_csv(&mut buf)?;
    Ok(buf)
}

fn density_window(spec: &DensitySpec, scenario: &Scenario) -> Result<Rect, CliError> {
    spec.window
        .or_else(|| scenario.sequence.as_ref().and_then(sequence_window))
        .ok_or_else(|| missing("density.window (the sequence kind has no window of its own)"))
}

fn density(scenario: &Scenario, ctx: &Context, exec: Exec) -> Result<TaskOutput, CliError> {
    let spec = scenario.density.as_ref().ok_or_else(|| missing("a [density] table"))?;
    let sampler = || spec.sampler.as_ref().ok_or_else(|| missing("density.sampler"));
    match spec.mode {
        DensityMode::Euclidean | DensityMode::Cover => {
            let (w, g) = weight_and_sequence(scenario, ctx)?;
            let window = density_window(spec, scenario)?;
            let rep = if spec.mode == DensityMode::Euclidean {
                upper_density_euclidean_with(&g, &w, window, &spec.ladder, sampler()?, exec)?
            } else {
                cover_density_with(&g, &w, window, &spec.ladder, sampler()?, exec)?
            };
            let mut result = density_json(&rep);
            result["mode"] = json!(spec.mode);
            result["points"] = json!(g.len());
            Ok(TaskOutput {
                metrics: density_metrics(&rep),
                files: vec![("ratios.csv".into(), csv_bytes(&rep)?)],
                diagnostics: json!({ "skipped_centers": rep.per_radius.iter().map(|t| t.skipped).sum::<usize>() }),
                result,
            })
        }
        DensityMode::Raw => {
            let (w, g) = weight_and_sequence(scenario, ctx)?;
            let window = density_window(spec, scenario)?;
            let r = *spec.ladder.last().ok_or_else(|| missing("a nonempty density.ladder"))?;
            let raw = raw_density(&g, &w, window, r, sampler()?)?;
            Ok(TaskOutput {
                result: json!({ "mode": "raw", "r": r, "raw_density": num(raw), "points": g.len() }),
                metrics: vec![("raw_density".into(), raw)],
                files: Vec::new(),
                diagnostics: json!({}),
            })
        }
        DensityMode::Surface => {
            let model = surface_model(&scenario.geometry)?
                .ok_or_else(|| CliError::Input("surface density needs geometry.kind = \"surface\"".into()))?;
            let ends = spec
                .ends
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    Ok(EndData {
                        gamma: ctx.sequence(&e.sequence, &mut rng_for(ctx.seed, 1 + i as u64))?,
                        weight: ctx.weight(&e.weight)?,
                        window: e.window,
                        sampler: e.sampler.clone(),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let rep = surface_density_with(&model, &ends, &spec.ladder, exec)?;
            let mut files = Vec::new();
            let mut metrics = vec![("extrapolated".to_string(), rep.extrapolated)];
            for (i, end) in rep.per_end.iter().enumerate() {
                files.push((format!("ratios_end{i}.csv"), csv_bytes(end)?));
                metrics.push((format!("end{i}_extrapolated"), end.extrapolated));
            }
            Ok(TaskOutput {
                result: json!({
                    "mode": "surface",
                    "extrapolated": num(rep.extrapolated),
                    "argmax_end": rep.argmax_end,
                    "per_end": rep.per_end.iter().map(density_json).collect::<Vec<_>>(),
                }),
                metrics,
                files,
                diagnostics: json!({}),
            })
        }
    }
}

fn section_domain(radius: Option<f64>, annulus: Option<(f64, f64)>, w: &WeightModel, n: usize) -> Result<SpaceDomain, CliError> {
    if let Some((inner, outer)) = annulus {
        return Ok(SpaceDomain::Annulus { inner, outer });
    }
    match (radius, w.kind()) {
        (Some(r), _) => Ok(SpaceDomain::Disk { radius: r }),
        (None, WeightKind::Quadratic { a }) if *a > 0.0 => Ok(SpaceDomain::Disk {
            radius: TruncatedSpace::fock_radius(*a, n),
        }),
        _ => Err(missing("a section radius (only quadratic weights have a default)")),
    }
}

fn interp(scenario: &Scenario, ctx: &Context, exec: Exec) -> Result<TaskOutput, CliError> {
    let spec = scenario.interp.as_ref().ok_or_else(|| missing("an [interp] table"))?;
    let (w, g) = weight_and_sequence(scenario, ctx)?;
    let annulus = spec.annulus.as_ref().map(|a| (a.inner, a.outer));
    let build = |n: usize| -> Result<TruncatedSpace, CliError> {
        let domain = section_domain(spec.radius, annulus, &w, n)?;
        Ok(TruncatedSpace::build_with(domain, w.clone(), n, spec.quadrature, exec)?)
    };
    let space = build(spec.n)?;
    let rep = space.interpolation_constant_report(&g)?;
    let restriction = space.restriction_norm(&g)?;
    let mut metrics = vec![
        ("constant".to_string(), rep.constant),
        ("restriction_norm".to_string(), restriction),
        ("sigma_min".to_string(), rep.sigma_min),
    ];
    let mut table = vec![(spec.n, space.dimension(), rep.clone(), restriction)];
    let mut result = json!({
        "n": spec.n,
        "domain": space.domain(),
        "points": g.len(),
        "dimension": space.dimension(),
        "constant": num(rep.constant),
        "sigma_min": num(rep.sigma_min),
        "sigma_max": num(rep.sigma_max),
        "rank_deficient": rep.rank_deficient,
        "restriction_norm": num(restriction),
    });
    if spec.stability_step > 0 {
        let n2 = spec.n + spec.stability_step;
        let bigger = build(n2)?;
        let rep2 = bigger.interpolation_constant_report(&g)?;
        let restriction2 = bigger.restriction_norm(&g)?;
        result["stability"] = json!({
            "n": n2,
            "constant": num(rep2.constant),
            "relative_drift": num((rep2.constant - rep.constant).abs() / rep.constant),
        });
        metrics.push((format!("constant_n{n2}"), rep2.constant));
        table.push((n2, bigger.dimension(), rep2, restriction2));
    }
    if spec.unit_targets {
        let ones = vec![Complex64::new(1.0, 0.0); g.len()];
        let sol = space.min_norm_interpolant(&g, &ones)?;
        result["unit_targets"] = json!({ "space_norm": num(sol.space_norm), "residual": num(sol.residual) });
        metrics.push(("unit_target_norm".into(), sol.space_norm));
    }
    if let Some(j) = &spec.jiggle {
        let mut ratios = Vec::with_capacity(j.trials);
        for t in 0..j.trials {
            let offsets = random_offsets(&mut rng_for(ctx.seed, 100 + t as u64), g.len(), j.delta * j.delta);
            ratios.push(space.jiggle_experiment(&g, &offsets, j.delta)?);
        }
        let worst = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
        result["jiggle"] = json!({
            "delta": j.delta,
            "ratios": ratios.iter().map(|r| num(r.ratio)).collect::<Vec<_>>(),
            "max_ratio": num(worst),
        });
        metrics.push(("jiggle_max_ratio".into(), worst));
    }
    if let Some(a) = &spec.add_point {
        let z = Complex64::new(a.z[0], a.z[1]);
        let mut rows = Vec::new();
        for &eps in &a.eps {
            let k = space.add_point_experiment(&g, z, eps)?;
            rows.push(json!({ "eps": eps, "constant": num(k) }));
            metrics.push((format!("add_point_eps{eps}"), k));
        }
        result["add_point"] = Value::Array(rows);
    }

    let mut buf = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    buf.write_record(["n", "dimension", "constant", "restriction_norm", "sigma_min", "sigma_max", "rank_deficient"])
        .map_err(csv_err)?;
    for (n, dim, r, rn) in &table {
        buf.serialize((n, dim, r.constant, rn, r.sigma_min, r.sigma_max, r.rank_deficient))
            .map_err(csv_err)?;
    }
    let bytes = buf.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(TaskOutput {
        result,
        metrics,
        files: vec![("interp.csv".into(), bytes)],
        diagnostics: json!({ "space": space.diagnostics(), "closest_pair": rep.closest_pair }),
    })
}

fn kernel(scenario: &Scenario, ctx: &Context, exec: Exec) -> Result<TaskOutput, CliError> {
    let spec = scenario.kernel.as_ref().ok_or_else(|| missing("a [kernel] table"))?;
    let w = ctx.weight(scenario.weight.as_ref().ok_or_else(|| missing("a [weight] table"))?)?;
    if !(spec.grid_step > 0.0) || !(spec.grid_half >= 0.0) {
        return Err(CliError::Input("kernel grid needs grid_step > 0 and grid_half >= 0".into()));
    }
    let domain = section_domain(spec.radius, None, &w, spec.n)?;
    let space = TruncatedSpace::build_with(domain, w, spec.n, spec.quadrature, exec)?;
    let m = (spec.grid_half / spec.grid_step).floor() as i64;
    let mut grid = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            let z = Complex64::new(spec.grid_step * i as f64, spec.grid_step * j as f64);
            if z.norm() <= spec.grid_half {
                grid.push(z);
            }
        }
    }
    let (lo, hi) = space.kernel_bound_check(&grid)?;
    let values = exec.map(&grid, |z| space.weighted_kernel_diag(*z));
    let mut buf = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    buf.write_record(["x", "y", "weighted_kernel"]).map_err(csv_err)?;
    for (z, v) in grid.iter().zip(values) {
        buf.serialize((z.re, z.im, v?)).map_err(csv_err)?;
    }
    let bytes = buf.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(TaskOutput {
        result: json!({
            "n": spec.n,
            "domain": space.domain(),
            "grid_points": grid.len(),
            "min": num(lo),
            "max": num(hi),
            "ratio": num(hi / lo),
            "min_times_pi": num(lo * PI),
            "max_times_pi": num(hi * PI),
        }),
        metrics: vec![("kernel_min".into(), lo), ("kernel_max".into(), hi), ("kernel_ratio".into(), hi / lo)],
        files: vec![("kernel.csv".into(), bytes)],
        diagnostics: json!({ "space": space.diagnostics() }),
    })
}

fn jensen(scenario: &Scenario, ctx: &Context) -> Result<TaskOutput, CliError> {
    let spec = scenario.jensen.clone().unwrap_or(crate::config::JensenSpec { cases: 20, degree: 3 });
    let w = match &scenario.weight {
        Some(ws) => ctx.weight(ws)?,
        None => WeightModel::quadratic(0.5),
    };
    let mut rng = rng_for(ctx.seed, 200);
    let mut buf = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    buf.write_record(["case", "center_re", "center_im", "radius", "roots_inside", "residual"])
        .map_err(csv_err)?;
    let mut worst: f64 = 0.0;
    for case in 0..spec.cases {
        let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let r = rng.gen_range(1.0..3.0);
        let mut inside = 0;
        let roots = (0..spec.degree)
            .map(|_| {
                let rho = if rng.gen_bool(0.5) {
                    inside += 1;
                    rng.gen_range(0.1..0.9) * r
                } else {
                    rng.gen_range(1.1..2.0) * r
                };
                z + Complex64::from_polar(rho, rng.gen_range(0.0..TAU))
            })
            .collect();
        let lead = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..TAU));
        let f = Polynomial::new(lead, roots)?;
        let res = jensen_residual(&f, &w, z, r)?;
        worst = worst.max(res.abs());
        buf.serialize((case, z.re, z.im, r, inside, res)).map_err(csv_err)?;
    }
    let bytes = buf.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(TaskOutput {
        result: json!({ "cases": spec.cases, "degree": spec.degree, "max_abs_residual": num(worst) }),
        metrics: vec![("max_abs_residual".into(), worst)],
        files: vec![("jensen.csv".into(), bytes)],
        diagnostics: json!({}),
    })
}

/// The scenario with one sweep value substituted.
fn apply(scenario: &Scenario, variable: SweepVariable, v: f64) -> Result<Scenario, CliError> {
    let mut s = scenario.clone();
    match variable {
        SweepVariable::S => {
            match s.sequence.as_mut() {
                Some(SequenceSpec::Lattice { spacing, .. }) => *spacing = v,
                _ => return Err(CliError::Input("sweeping s needs a lattice sequence".into())),
            }
            // a cell sampler follows the lattice's fundamental cell
            if let Some(d) = s.density.as_mut() {
                if let Some(CenterSampler::Cell { side_x, side_y, step, .. }) = d.sampler.as_mut() {
                    *side_x = v;
                    *side_y = v;
                    *step = step.min(v / 2.0);
                }
            }
        }
        SweepVariable::Eps => {
            let a = s.interp.as_mut().and_then(|i| i.add_point.as_mut());
            a.ok_or_else(|| missing("interp.add_point for an eps sweep"))?.eps = vec![v];
        }
        SweepVariable::Delta => {
            let j = s.interp.as_mut().and_then(|i| i.jiggle.as_mut());
            j.ok_or_else(|| missing("interp.jiggle for a delta sweep"))?.delta = v;
        }
        SweepVariable::Degree => {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(CliError::Input(format!("degree values must be nonnegative integers, got {v}")));
            }
            let mut hit = false;
            if let Some(i) = s.interp.as_mut() {
                i.n = v as usize;
                hit = true;
            }
            if let Some(k) = s.kernel.as_mut() {
                k.n = v as usize;
                hit = true;
            }
            if !hit {
                return Err(missing("an [interp] or [kernel] table for a degree sweep"));
            }
        }
        SweepVariable::R => {
            s.density.as_mut().ok_or_else(|| missing("a [density] table for an r sweep"))?.ladder = vec![v];
        }
    }
    Ok(s)
}

fn sweep(scenario: &Scenario, ctx: &Context, exec: Exec) -> Result<TaskOutput, CliError> {
    let spec = scenario.sweep.as_ref().ok_or_else(|| missing("a [sweep] table"))?;
    if spec.values.is_empty() {
        return Err(CliError::Input("sweep range is empty".into()));
    }
    if spec.task == TaskKind::Sweep {
        return Err(CliError::Input("sweep.task must name a single task".into()));
    }
    let rows = exec.map(&spec.values, |&v| {
        apply(scenario, spec.variable, v).and_then(|s| run_task(&s, spec.task, ctx, Exec::Sequential))
    });
    let mut buf = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    buf.write_record(["variable", "value", "status", "series", "y", "message"])
        .map_err(csv_err)?;
    let var = serde_json::to_value(spec.variable).unwrap_or(Value::Null);
    let var_name = var.as_str().unwrap_or("?").to_string();
    let mut json_rows = Vec::new();
    let mut failed = 0;
    for (v, row) in spec.values.iter().zip(rows) {
        match row {
            Ok(out) => {
                for (series, y) in &out.metrics {
                    buf.serialize((&var_name, v, "ok", series, y, "")).map_err(csv_err)?;
                }
                json_rows.push(json!({ "value": v, "status": "ok", "result": out.result }));
            }
            Err(e) => {
                failed += 1;
                let msg = e.to_string();
                buf.serialize((&var_name, v, "failed", "", "", &msg)).map_err(csv_err)?;
                json_rows.push(json!({ "value": v, "status": "failed", "error": msg }));
            }
        }
    }
    let bytes = buf.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(TaskOutput {
        result: json!({ "variable": var, "task": spec.task, "rows": json_rows }),
        metrics: Vec::new(),
        files: vec![("sweep.csv".into(), bytes)],
        diagnostics: json!({ "failed_rows": failed }),
    })
}
