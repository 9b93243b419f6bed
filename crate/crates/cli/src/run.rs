use std::time::Instant;

use log::{debug, info};
use optconn::connection::{christoffel_conformal, christoffel_sigma1, ChristoffelTable, TablePath};
use optconn::curvature::{compare_with_coordinates, ricci, riemann, CurvatureOptions};
use optconn::fields::Point;
use optconn::oracle::{christoffel_oracle, subject_table, verify, KoszulContext, OracleDerivative};
use optconn::Error;
use rayon::prelude::*;

use crate::config::{CurvatureSpec, Mode, ScenarioConfig};
use crate::report::{CurvatureSummary, PointTable, RunReport, ScenarioEcho};

fn context(config: &ScenarioConfig) -> optconn::Result<KoszulContext> {
    let derivative = match config.mode {
        Mode::Exact => OracleDerivative::Jet,
        Mode::Fd => OracleDerivative::Displacement {
            step: config.fd_step,
            richardson: config.richardson,
        },
    };
    Ok(
        KoszulContext::new(config.base.clone(), config.params.clone(), derivative)?
            .with_fault(config.fault),
    )
}

fn at_point<T, F>(points: &[Point], f: F) -> optconn::Result<Vec<T>>
where
    T: Send,
    F: Fn(&Point) -> optconn::Result<T> + Sync,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            f(p).map_err(|e| Error::PointFailure {
                point: i,
                source: Box::new(e),
            })
        })
        .collect()
}

fn table(ctx: &KoszulContext, path: TablePath, p: &Point) -> optconn::Result<ChristoffelTable> {
    match path {
        TablePath::Sigma1 => christoffel_sigma1(&ctx.params, &ctx.base, p),
        TablePath::Theorem => subject_table(ctx, p),
        TablePath::Conformal => christoffel_conformal(&ctx.params, &ctx.base, p),
        TablePath::Oracle => christoffel_oracle(ctx, p),
    }
}

fn curvature(
    ctx: &KoszulContext,
    spec: &CurvatureSpec,
    p: &Point,
) -> optconn::Result<(f64, f64, f64, Option<f64>)> {
    let options = CurvatureOptions {
        step: spec.step,
        ..Default::default()
    };
    let r = riemann(&ctx.params, &ctx.base, p, &options)?;
    let ric = ricci(&r, &r.metric);
    let gap = if spec.coordinate_check {
        let cmp = compare_with_coordinates(&ctx.params, &ctx.base, p, &options, spec.step)?;
        Some(cmp.riemann.max(cmp.scalar()))
    } else {
        None
    };
    Ok((ric.scalar, r.symmetries().max(), ric.symmetry_residual, gap))
}

pub fn run(config: &ScenarioConfig) -> optconn::Result<RunReport> {
    let start = Instant::now();
    info!(
        "scenario {} with {} points, seed {}",
        config.name,
        config.points.len(),
        config.seed
    );
    let ctx = context(config)?;

    let tables = match config.table {
        Some(path) => {
            debug!("evaluating {path} tables");
            at_point(&config.points, |p| table(&ctx, path, p))?
                .into_iter()
                .enumerate()
                .map(|(i, t)| PointTable {
                    point: i,
                    path,
                    entries: t.records(),
                })
                .collect()
        }
        None => Vec::new(),
    };

    let curvature = match &config.curvature {
        Some(spec) => {
            debug!("evaluating curvature with step {}", spec.step);
            at_point(&config.points, |p| curvature(&ctx, spec, p))?
                .into_iter()
                .enumerate()
                .map(|(i, (scalar, rs, rics, gap))| CurvatureSummary {
                    point: i,
                    scalar,
                    riemann_symmetry: rs,
                    ricci_symmetry: rics,
                    coordinate_gap: gap,
                })
                .collect()
        }
        None => Vec::new(),
    };

    debug!("running {} checks", config.checks.len());
    let report = verify(&ctx, &config.checks, &config.points, &config.tolerances)?;
    for o in &report.outcomes {
        debug!(
            "{} residual {:e} tolerance {:e}",
            o.check, o.residual, o.tolerance
        );
    }
    let passed = report.passed();

    Ok(RunReport {
        scenario: ScenarioEcho {
            name: config.name.clone(),
            family: config.family.clone(),
            dim: config.dim,
            mode: config.mode,
            fd_step: config.fd_step,
            seed: config.seed,
            params: config.expressions.clone(),
            fault: config.fault.map(|f| f.to_string()),
        },
        points: config.points.iter().map(|p| p.coords().to_vec()).collect(),
        tables,
        checks: report.outcomes,
        curvature,
        passed,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
