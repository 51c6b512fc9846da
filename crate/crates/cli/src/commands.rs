use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use assouad_core::analysis::{
    binom_bound_check, blowup_check, check_key_estimate, dimension_continuity_check, ivp_solve, sweep, write_sweep_csv,
    BinomMode, SolveKind,
};
use assouad_core::cubes::{
    build_cube_tree, natural_levels, unfold_spec, validate_tree, CheckStatus, CubeTree, TreeSource, TreeValidation,
};
use assouad_core::dimension::{
    exact_dimension_spec, measure_ball_estimate, measure_chain_estimate, set_assouad_estimate, set_lower_estimate,
    DimensionKind, DimensionReport, Extremum,
};
use assouad_core::generators::{
    boundary_rich_spec, cantor_points, grid_points, random_points, triadic_grid, triadic_spec, uniform_spec, TreeSpec,
};
use assouad_core::measures::{build_mu_p, build_mu_p_eta, select_central_all, MassAssignment};
use assouad_core::metric::{FiniteMetricSpace, Norm, ScaleWindow};
use assouad_core::rational::{parse_rational, ratio};
use assouad_core::Rational;

use crate::args::{
    CheckCommand, Cli, Command, DimCommand, Format, GenCommand, KindArg, MeasureCommand, MeasureMethod, PointsArg,
    TreeCommand, WindowArgs,
};
use crate::output::{emit, format_value, versioned_json, versioned_json_text};

pub enum Outcome {
    Success,
    CheckFailed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Success
        } else {
            Outcome::CheckFailed
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Gen { what, out } => gen(cli, what, out.as_deref()),
        Command::Tree { action } => tree(cli, action),
        Command::Measure { action } => measure(action),
        Command::Dim { action } => dim(cli, action),
        Command::Check { action } => check(cli, action),
        Command::Sweep(a) => {
            let spec = read_spec(a.spec.spec.as_deref())?;
            let grid = parse_list(&a.p)?;
            let eta = a.eta.as_deref().map(parse_list).transpose()?;
            let rows = sweep(&spec, &grid, eta.as_deref())?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => emit(&versioned_json(&json!({ "rows": rows }))?, None)?,
                _ => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&rows, &mut buf)?;
                    emit(&String::from_utf8(buf)?, None)?;
                }
            }
            Ok(Outcome::Success)
        }
        Command::Solve(a) => {
            let spec = read_spec(a.spec.spec.as_deref())?;
            let kind = match a.kind {
                KindArg::Assouad => SolveKind::Assouad,
                KindArg::Lower => SolveKind::Lower,
                other => bail!("solve targets measure dimensions, not {other:?}"),
            };
            let result = ivp_solve(&spec, a.target, kind, a.tol)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Text => emit(&format!("{}\n", result.p), None)?,
                _ => emit(&versioned_json(&result)?, None)?,
            }
            Ok(Outcome::Success)
        }
    }
}

fn parse_q(text: &str) -> Result<Rational> {
    let parsed = parse_rational(text)?;
    if !parsed.exact {
        eprintln!("warning: {text} is not exactly representable; using {}", parsed.value);
    }
    Ok(parsed.value)
}

fn parse_list(text: &str) -> Result<Vec<Rational>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(parse_q).collect()
}

fn parse_norm(text: &str) -> Result<Norm> {
    Ok(text.parse()?)
}

fn read_text(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(s)
        }
    }
}

fn read_spec(path: Option<&Path>) -> Result<TreeSpec> {
    Ok(TreeSpec::from_json(&read_text(path)?)?)
}

fn read_tree(path: &Path) -> Result<CubeTree> {
    Ok(CubeTree::from_json(&read_text(Some(path))?)?)
}

fn read_mass(path: &Path) -> Result<MassAssignment> {
    Ok(MassAssignment::from_json(&read_text(Some(path))?)?)
}

fn read_points(arg: &PointsArg) -> Result<Option<FiniteMetricSpace>> {
    let Some(path) = &arg.points else { return Ok(None) };
    let norm = parse_norm(&arg.metric)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Some(FiniteMetricSpace::read_csv(BufReader::new(file), norm)?))
}

fn require_points(arg: &PointsArg) -> Result<FiniteMetricSpace> {
    read_points(arg)?.ok_or_else(|| anyhow!("--points is required"))
}

fn spec_output(cli: &Cli, spec: &TreeSpec) -> Result<String> {
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => versioned_json_text(&spec.to_json()),
        other => bail!("specs are emitted as JSON, not {other:?}"),
    }
}

fn points_output(cli: &Cli, space: &FiniteMetricSpace) -> Result<String> {
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(space.to_csv_string()),
        other => bail!("point sets are emitted as CSV, not {other:?}"),
    }
}

fn gen(cli: &Cli, what: &GenCommand, out: Option<&Path>) -> Result<Outcome> {
    let text = match what {
        GenCommand::Triadic => spec_output(cli, &triadic_spec())?,
        GenCommand::Uniform { m, delta, j } => spec_output(cli, &uniform_spec(*m, &parse_q(delta)?, *j)?)?,
        GenCommand::BoundaryRich { beta_num, beta_den, m, delta } => {
            spec_output(cli, &boundary_rich_spec(*beta_num, *beta_den, *m, &parse_q(delta)?)?)?
        }
        GenCommand::Cantor { depth } => points_output(cli, &cantor_points(*depth)?)?,
        GenCommand::Grid { dim, n, metric } => points_output(cli, &grid_points(*dim, *n, parse_norm(metric)?)?)?,
        GenCommand::Random { dim, n, metric } => {
            points_output(cli, &random_points(*dim, *n, cli.seed, parse_norm(metric)?)?)?
        }
        GenCommand::TriadicGrid { depth, tree } => {
            let (space, cubes) = triadic_grid(*depth)?;
            if let Some(path) = tree {
                emit(&versioned_json_text(&cubes.to_json())?, Some(path))?;
            }
            points_output(cli, &space)?
        }
    };
    emit(&text, out)?;
    Ok(Outcome::Success)
}

fn tree(cli: &Cli, action: &TreeCommand) -> Result<Outcome> {
    match action {
        TreeCommand::Build { points, spec, delta, levels, depth, origin, out } => {
            let built = match spec {
                Some(path) => {
                    let spec = read_spec(Some(path))?;
                    let depth = depth.ok_or_else(|| anyhow!("--depth is required with --spec"))?;
                    unfold_spec(&spec, depth)?
                }
                None => {
                    let space = require_points(points)?;
                    let delta = parse_q(delta.as_deref().ok_or_else(|| anyhow!("--delta is required with --points"))?)?;
                    let levels = levels.unwrap_or_else(|| natural_levels(&space, &delta));
                    let origin = match origin {
                        Some(id) => space.index_of(id)?,
                        None => 0,
                    };
                    build_cube_tree(&space, &delta, levels, origin)?
                }
            };
            emit(&versioned_json_text(&built.to_json())?, out.as_deref())?;
            Ok(Outcome::Success)
        }
        TreeCommand::Validate { tree, points } => {
            let cubes = read_tree(tree)?;
            let space = match cubes.source {
                TreeSource::Metric => Some(require_points(points)?),
                TreeSource::Spec => None,
            };
            let report = validate_tree(&cubes, space.as_ref())?;
            match cli.format.unwrap_or(Format::Text) {
                Format::Json => emit(&versioned_json(&json!({ "pass": report.pass(), "properties": report.properties }))?, None)?,
                _ => emit(&validation_text(&report), None)?,
            }
            Ok(Outcome::from_pass(report.pass()))
        }
    }
}

fn validation_text(report: &TreeValidation) -> String {
    let mut s = String::new();
    for check in &report.properties {
        let status = match check.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "skipped",
        };
        s.push_str(&format!("{}: {status}\n", check.property.label()));
        if check.status == CheckStatus::Fail {
            for w in &check.witnesses {
                s.push_str(&format!("  witness: {w}\n"));
            }
        }
    }
    s.push_str(if report.pass() { "tree valid\n" } else { "tree invalid\n" });
    s
}

fn measure(action: &MeasureCommand) -> Result<Outcome> {
    let MeasureCommand::Build { tree, p, eta, select_central, tree_out, points, out } = action;
    let mut cubes = read_tree(tree)?;
    if let Some(j) = select_central {
        let space = require_points(points)?;
        select_central_all(&mut cubes, &space, *j)?;
        let path = tree_out.as_deref().ok_or_else(|| anyhow!("--tree-out is required with --select-central"))?;
        emit(&versioned_json_text(&cubes.to_json())?, Some(path))?;
    }
    let p = parse_q(p)?;
    let mu = match eta {
        Some(list) => build_mu_p_eta(&cubes, &p, &parse_list(list)?)?,
        None => build_mu_p(&cubes, &p)?,
    };
    emit(&versioned_json_text(&mu.to_json())?, out.as_deref())?;
    Ok(Outcome::Success)
}

fn default_window(space: &FiniteMetricSpace, w: &WindowArgs) -> Result<ScaleWindow> {
    let r_min = match w.r_min {
        Some(r) => r,
        None => space.min_positive_distance().ok_or_else(|| anyhow!("point set has no positive distance"))?,
    };
    let r_max = w.r_max.unwrap_or_else(|| space.diameter());
    Ok(ScaleWindow::new(r_min, r_max)?)
}

fn emit_report(cli: &Cli, mut report: DimensionReport) -> Result<()> {
    if !cli.emit_evidence {
        report.evidence.truncate(1);
    }
    match cli.format.unwrap_or(Format::Text) {
        Format::Json => emit(&versioned_json(&report)?, None),
        Format::Csv => emit(&format!("kind,method,value\n{},{},{}\n", report.kind, method_name(&report), format_value(report.value)), None),
        Format::Text => emit(&format!("{}\n", format_value(report.value)), None),
    }
}

fn method_name(report: &DimensionReport) -> String {
    serde_json::to_value(report.method).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn extremum(kind: KindArg) -> Extremum {
    match kind {
        KindArg::Assouad | KindArg::SetAssouad => Extremum::Assouad,
        KindArg::Lower | KindArg::SetLower => Extremum::Lower,
    }
}

fn dim(cli: &Cli, action: &DimCommand) -> Result<Outcome> {
    match action {
        DimCommand::Set { points, kind, window } => {
            let space = require_points(points)?;
            let w = default_window(&space, window)?;
            let report = match extremum(*kind) {
                Extremum::Assouad => set_assouad_estimate(&space, &w, window.budget)?,
                Extremum::Lower => set_lower_estimate(&space, &w, window.budget)?,
            };
            emit_report(cli, report)?;
        }
        DimCommand::Measure { tree, mass, method, kind, m_min, points, window } => {
            let cubes = read_tree(tree)?;
            let mu = read_mass(mass)?;
            let report = match method {
                MeasureMethod::Chain => measure_chain_estimate(&cubes, &mu, *m_min, extremum(*kind))?,
                MeasureMethod::Ball => {
                    let space = require_points(points)?;
                    let w = default_window(&space, window)?;
                    measure_ball_estimate(&space, &cubes, &mu, &w, window.budget, extremum(*kind))?
                }
            };
            emit_report(cli, report)?;
        }
        DimCommand::Exact { spec, p, eta, kind } => {
            let spec = read_spec(spec.as_deref())?;
            let p = parse_q(p)?;
            let eta = match eta {
                Some(list) => parse_list(list)?,
                None => vec![ratio(1, spec.central_slots as i64); spec.central_slots],
            };
            let kind = match kind {
                KindArg::Assouad => DimensionKind::MeasureAssouad,
                KindArg::Lower => DimensionKind::MeasureLower,
                KindArg::SetAssouad => DimensionKind::SetAssouad,
                KindArg::SetLower => DimensionKind::SetLower,
            };
            let exact = exact_dimension_spec(&spec, &p, &eta, kind)?;
            let value = exact.value();
            match cli.format.unwrap_or(Format::Text) {
                Format::Json => emit(
                    &versioned_json(&json!({
                        "kind": kind.to_string(),
                        "value": value,
                        "exact": exact,
                    }))?,
                    None,
                )?,
                Format::Csv => emit(&format!("kind,value\n{kind},{}\n", format_value(value)), None)?,
                Format::Text => emit(&format!("{}\n", format_value(value)), None)?,
            }
        }
    }
    Ok(Outcome::Success)
}

fn report_outcome<T: serde::Serialize>(cli: &Cli, report: &T, pass: bool) -> Result<Outcome> {
    match cli.format.unwrap_or(Format::Json) {
        Format::Text => emit(if pass { "pass\n" } else { "FAIL\n" }, None)?,
        _ => emit(&versioned_json(report)?, None)?,
    }
    Ok(Outcome::from_pass(pass))
}

fn parse_pairs(text: &str) -> Result<Vec<(Rational, Rational)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (a, b) = pair.split_once(':').ok_or_else(|| anyhow!("pair {pair:?} is not of the form p:p2"))?;
            Ok((parse_q(a)?, parse_q(b)?))
        })
        .collect()
}

/// Seeded pairs `k/(1000 M)` with `k` in `1..=1000`.
fn random_pairs(spec: &TreeSpec, count: usize, seed: u64) -> Vec<(Rational, Rational)> {
    let m = spec.max_branching() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = rng.gen_range(1..=1000i64);
            let b = rng.gen_range(1..=1000i64);
            (ratio(a, 1000 * m), ratio(b, 1000 * m))
        })
        .collect()
}

fn check(cli: &Cli, action: &CheckCommand) -> Result<Outcome> {
    match action {
        CheckCommand::KeyEstimate { tree, spec, depth, p, p2 } => {
            let cubes = match (tree, spec) {
                (Some(path), _) => read_tree(path)?,
                (None, spec) => {
                    let spec = read_spec(spec.as_deref())?;
                    unfold_spec(&spec, depth.ok_or_else(|| anyhow!("--depth is required with a spec"))?)?
                }
            };
            let report = check_key_estimate(&cubes, &parse_q(p)?, &parse_q(p2)?)?;
            report_outcome(cli, &report, report.pass)
        }
        CheckCommand::Continuity { spec, pairs, random } => {
            let spec = read_spec(spec.spec.as_deref())?;
            let mut all = match pairs {
                Some(text) => parse_pairs(text)?,
                None => Vec::new(),
            };
            all.extend(random_pairs(&spec, *random, cli.seed));
            if all.is_empty() {
                bail!("give --pairs or --random");
            }
            let report = dimension_continuity_check(&spec, &all)?;
            report_outcome(cli, &report, report.pass)
        }
        CheckCommand::Binom { spec, beta, n, strict } => {
            let spec = read_spec(spec.spec.as_deref())?;
            let mode = if *strict { BinomMode::Strict } else { BinomMode::Restrict };
            let report = binom_bound_check(&spec, &parse_q(beta)?, *n, mode)?;
            report_outcome(cli, &report, report.pass)
        }
        CheckCommand::Blowup { spec, p } => {
            let spec = read_spec(spec.spec.as_deref())?;
            let report = blowup_check(&spec, &parse_list(p)?)?;
            report_outcome(cli, &report, report.pass)
        }
    }
}
