//! Subcommand drivers. Each returns the artifacts it wrote.

use std::path::{Path, PathBuf};

use coliseum::affine::{self, StaircaseMode};
use coliseum::field;
use coliseum::reference;
use coliseum::semigroup::GeneratorSystem;
use coliseum::symbolic::{self, LevelSet};
use coliseum::{RegionMask, ScalarField};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::checks::{Context, CHECK_NAMES};
use crate::config::{RunConfig, StaircaseModeName, StaircaseSystem};
use crate::error::CliError;
use crate::output::{self, Artifact};

/// Runs `f` on a pool sized by `output.threads`, or on the global pool.
pub fn with_threads<T: Send>(
    config: &RunConfig,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match config.output.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Config(format!("output.threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn analysis_err(e: impl std::fmt::Display) -> CliError {
    CliError::Analysis(e.to_string())
}

fn write(config: &RunConfig, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    output::write_all(Path::new(&config.output.dir), artifacts)
}

fn undecided_stats(t: &ScalarField) -> Value {
    let n = t.undecided.len().max(1) as f64;
    json!({
        "max": t.undecided.iter().copied().fold(0.0, f64::max),
        "mean": t.undecided.iter().sum::<f64>() / n,
        "pixels_at_or_above_0.01": t.undecided.iter().filter(|&&u| u >= 0.01).count(),
    })
}

/// Escape field, Julia raster, backward cloud and metadata, in memory.
pub fn render_artifacts(config: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let sys = config.system()?;
    let grid = config.grid()?;
    let hash = config.hash();
    let t = field::render_t(&sys, grid, config.sampling());
    let julia = field::classify_julia(&t, config.analysis.julia_window);
    let seed_point = Complex64::new(sys.escape_radius(), 0.0);
    let cloud = field::julia_backward_cloud(
        &sys,
        seed_point,
        config.analysis.cloud_points,
        config.sampling.seed,
    )
    .map_err(analysis_err)?;

    let mut artifacts = vec![output::field_pgm("t_field.pgm", &t, &hash)];
    if config.output.png {
        artifacts.push(output::field_png("t_field.png", &t, &hash)?);
    }
    artifacts.push(output::mask_pgm("julia_mask.pgm", &julia, &hash));
    let rows = cloud
        .iter()
        .map(|z| vec![format!("{:.17e}", z.re), format!("{:.17e}", z.im)]);
    artifacts.push(output::csv("julia_cloud.csv", &["re", "im"], rows, &hash));
    let meta = json!({
        "config_hash": hash,
        "config": config,
        "seed": config.sampling.seed,
        "samples": config.sampling.samples,
        "n_max": config.sampling.n_max,
        "system_hash": sys.hash_hex(),
        "escape_radius": sys.escape_radius(),
        "trap_certified": sys.trap().is_some(),
        "undecided": undecided_stats(&t),
        "julia_pixels": julia.count(),
        "artifacts": output::manifest(&artifacts),
    });
    artifacts.push(output::json("render_meta.json", &meta));
    Ok(artifacts)
}

pub fn cmd_render(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let artifacts = with_threads(config, || render_artifacts(config))??;
    write(config, &artifacts)
}

fn level_set_entry(t: f64, level: Result<LevelSet, symbolic::SymbolicError>) -> Value {
    match level {
        Ok(LevelSet::Unique { word, exact }) => {
            json!({"t": t, "kind": "component", "word": word, "exact": exact})
        }
        Ok(LevelSet::GapPair(a, b)) => json!({"t": t, "kind": "gap_pair", "words": [a, b]}),
        Err(e) => json!({"t": t, "error": e.to_string()}),
    }
}

fn gap_audit(config: &RunConfig, sys: &GeneratorSystem, t: &ScalarField) -> Value {
    let grid = t.grid;
    let outer = reference::filled_julia_mask(&sys.generators()[1], grid, config.sampling.n_max);
    let hole = RegionMask::from_fn(grid, |z| z.norm() <= config.analysis.hole_radius);
    let annulus = outer.and_not(&hole).expect("same grid");
    let masks: Result<Vec<RegionMask>, _> = config
        .analysis
        .gap_prefixes
        .iter()
        .map(|p| {
            symbolic::fatou_gap_mask(
                sys,
                &annulus,
                &p.bytes().map(|c| c.wrapping_sub(b'0')).collect::<Vec<_>>(),
            )
        })
        .collect();
    match masks.and_then(|m| symbolic::monotonicity_audit(t, &m)) {
        Ok(report) => {
            json!({"prefixes": config.analysis.gap_prefixes, "passed": true, "report": report})
        }
        Err(e) => {
            json!({"prefixes": config.analysis.gap_prefixes, "passed": false, "error": e.to_string()})
        }
    }
}

/// Exponents, level sets, audits, Hölder estimates, kernel probe and, for
/// three generators, the trichotomy verdict.
pub fn analyze_report(config: &RunConfig) -> Result<Value, CliError> {
    let sys = config.system()?;
    let grid = config.grid()?;
    let a = &config.analysis;
    let degs = sys.degrees();
    let mut report = serde_json::Map::new();
    report.insert("config_hash".into(), json!(config.hash()));
    report.insert("config".into(), json!(config));
    report.insert("degrees".into(), json!(degs));
    report.insert("weights".into(), json!(sys.weights()));
    report.insert(
        "u_exponent".into(),
        symbolic::u_exponent(&degs, sys.weights())
            .map_or_else(|e| json!({"error": e.to_string()}), |u| json!(u)),
    );
    report.insert(
        "dim_lower_bound".into(),
        symbolic::dim_lower_bound(&degs, sys.weights())
            .map_or_else(|e| json!({"error": e.to_string()}), |d| json!(d)),
    );
    let attractor = affine::mpsi_attractor(&sys, a.attractor_depth);
    report.insert(
        "attractor".into(),
        json!({"hull": attractor.hull, "gaps": attractor.gaps, "sum_inv_deg": attractor.sum_inv_deg, "cantor_verdict": attractor.cantor_verdict}),
    );

    let t = field::render_t(&sys, grid, config.sampling());
    report.insert("undecided".into(), undecided_stats(&t));
    if sys.len() == 2 {
        let (oriented, swapped) =
            symbolic::canonical_orientation(&sys, grid).map_err(analysis_err)?;
        report.insert("orientation_swapped".into(), json!(swapped));
        let table: Vec<Value> = a
            .t_values
            .iter()
            .map(|&v| level_set_entry(v, symbolic::invert_t(oriented.weights(), v, a.invert_depth)))
            .collect();
        report.insert("invert_t".into(), json!(table));
        let oriented_t = if swapped {
            field::render_t(&oriented, grid, config.sampling())
        } else {
            t.clone()
        };
        report.insert(
            "monotonicity_audit".into(),
            gap_audit(config, &oriented, &oriented_t),
        );
    }

    let points = symbolic::sample_lambda_typical(&sys, a.holder_points, 40, config.sampling.seed)
        .map_err(analysis_err)?;
    let radii = symbolic::default_radii(&grid);
    let floor = 4.0 * 0.5 / (config.sampling.samples as f64).sqrt();
    let estimates: Vec<_> = points
        .iter()
        .map(|&z| symbolic::empirical_holder(&t, z, &radii, floor))
        .collect();
    let mut reliable: Vec<f64> = estimates
        .iter()
        .filter(|e| e.reliable)
        .map(|e| e.exponent)
        .collect();
    reliable.sort_by(f64::total_cmp);
    report.insert(
        "holder".into(),
        json!({
            "estimates": estimates,
            "median_reliable_exponent": reliable.get(reliable.len() / 2),
            "noise_floor": floor,
            "lambda_sampling": "uniform root choice along random words, an approximation of the natural measure",
        }),
    );

    let seed_point = Complex64::new(sys.escape_radius(), 0.0);
    let cloud =
        field::julia_backward_cloud(&sys, seed_point, a.kernel_points, config.sampling.seed)
            .map_err(analysis_err)?;
    let probe = symbolic::kernel_julia_probe(
        &sys,
        &cloud,
        a.kernel_depth,
        coliseum::semigroup::DEFAULT_BUDGET,
    );
    report.insert(
        "kernel_probe".into(),
        json!({"fraction": probe.fraction, "points": cloud.len(), "depth": a.kernel_depth}),
    );

    if sys.len() == 3 {
        let verdict =
            symbolic::julia_proxy_mask(&sys, grid, a.proxy_points.max(1), config.sampling.seed)
                .and_then(|proxy| symbolic::classify_3gen(&sys, &proxy));
        report.insert(
            "trichotomy".into(),
            verdict.map_or_else(|e| json!({"error": e.to_string()}), |r| json!(r)),
        );
    }
    Ok(Value::Object(report))
}

pub fn cmd_analyze(config: &RunConfig) -> Result<(Value, Vec<PathBuf>), CliError> {
    let report = with_threads(config, || analyze_report(config))??;
    let paths = write(config, &[output::json("analysis.json", &report)])?;
    Ok((report, paths))
}

/// Runs the configured checks. The report is written before a failure is
/// returned, so it is always available.
pub fn cmd_verify(
    config: &RunConfig,
    progress: impl Fn(&str) + Sync,
) -> Result<(Value, Vec<PathBuf>), CliError> {
    let names: Vec<String> = if config.verify.checks.is_empty() {
        CHECK_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        config.verify.checks.clone()
    };
    if let Some(bad) = names.iter().find(|n| !CHECK_NAMES.contains(&n.as_str())) {
        return Err(CliError::Config(format!(
            "verify.checks: unknown check `{bad}` (known: {})",
            CHECK_NAMES.join(", ")
        )));
    }
    let results = with_threads(config, || {
        let ctx = Context::new(config.verify.clone());
        names
            .iter()
            .map(|n| {
                let r = ctx.run(n).expect("name validated");
                progress(&r.line());
                r
            })
            .collect::<Vec<_>>()
    })?;
    let passed = results.iter().all(|r| r.passed);
    let report = json!({"config_hash": config.hash(), "config": config, "passed": passed, "checks": results});
    let paths = write(config, &[output::json("verify_report.json", &report)])?;
    if !passed {
        let failed: Vec<&str> = results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect();
        return Err(CliError::Verification(failed.join(", ")));
    }
    Ok((report, paths))
}

/// Sweep of the 1-D singular function on `[0, 1]` as `x,value,stderr` CSV.
pub fn cmd_staircase(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let s = &config.staircase;
    let maps = match s.system {
        StaircaseSystem::Cantor => affine::cantor_maps(),
        StaircaseSystem::Lebesgue => affine::lebesgue_maps(),
    };
    let probs = [s.a, 1.0 - s.a];
    let mode = match s.mode {
        StaircaseModeName::Exact => StaircaseMode::Exact { depth: s.depth },
        StaircaseModeName::MonteCarlo => StaircaseMode::MonteCarlo {
            samples: s.samples,
            max_steps: s.max_steps,
            seed: s.seed,
        },
    };
    let n = s.points.max(2);
    let xs: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let values = xs
        .iter()
        .map(|&x| affine::staircase_t(&maps, &probs, x, mode))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("staircase: {e}")))?;
    let hash = config.hash();
    let rows = xs.iter().zip(&values).map(|(x, v)| {
        vec![
            format!("{x}"),
            format!("{}", v.value),
            format!("{}", v.stderr),
        ]
    });
    let csv = output::csv("staircase.csv", &["x", "value", "stderr"], rows, &hash);
    let meta = output::json(
        "staircase_meta.json",
        &json!({"config_hash": hash, "staircase": s, "artifacts": output::manifest(std::slice::from_ref(&csv))}),
    );
    write(config, &[csv, meta])
}

/// Three-generator classification on the run grid.
pub fn cmd_classify3(config: &RunConfig) -> Result<(Value, Vec<PathBuf>), CliError> {
    let sys = config.system()?;
    if sys.len() != 3 {
        return Err(CliError::Config(format!(
            "classify3 needs 3 generators, system has {}",
            sys.len()
        )));
    }
    let grid = config.grid()?;
    let hash = config.hash();
    let (proxy, verdict) = with_threads(config, || {
        let proxy = symbolic::julia_proxy_mask(
            &sys,
            grid,
            config.analysis.proxy_points.max(1),
            config.sampling.seed,
        );
        let verdict = proxy
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|p| symbolic::classify_3gen(&sys, p));
        (proxy, verdict)
    })?;
    let proxy = proxy.map_err(analysis_err)?;
    let report = match &verdict {
        Ok(r) => json!({"config_hash": hash, "config": config, "verdict": r}),
        Err(e) => json!({"config_hash": hash, "config": config, "error": e.to_string()}),
    };
    let paths = write(
        config,
        &[
            output::json("trichotomy.json", &report),
            output::mask_pgm("julia_proxy.pgm", &proxy, &hash),
        ],
    )?;
    verdict.map_err(analysis_err)?;
    Ok((report, paths))
}
