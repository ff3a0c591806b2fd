use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use gencoll::{
    is_on_outer_boundary, membership, nonsync_throughput, observed_submatrix, project_to_boundary,
    solve_op2, sweep_nonsync_worstcase, sweep_sync_worstcase, sync_throughput, throughput_point,
    throughput_point_f64, BoundaryVerdict, CollisionGraph, DutyFactorSpec, KktResiduals,
    Membership, OffsetAssignment, ProtocolMatrix, Rat, SweepOptions, DEFAULT_KKT_TOL,
    DEFAULT_MAX_SPACE, DEFAULT_RHO_TOL,
};
use num::ToPrimitive;
use serde_json::{json, Value};

use crate::args::{
    BoundaryArgs, Command, ConstructArgs, MemberArgs, Mode, PointArgs, ProjectArgs, RegionCommand,
    SimulateArgs, SolveArgs, SweepArgs,
};
use crate::report::{float_value, float_vec, rat_vec, sha256_hex, InputSet, RunReport};

/// Failure after successful argument parsing; exits with code 1.
#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

fn domain<E: fmt::Display>(e: E) -> CliError {
    CliError(e.to_string())
}

/// Runs one parsed command. `echo` is the raw command line recorded in the
/// report; it does not influence the results payload.
pub fn run(command: &Command, echo: &str) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let (inputs, results) = match command {
        Command::Construct(args) => construct(args)?,
        Command::Simulate(args) => simulate(args)?,
        Command::Sweep(args) => sweep(args)?,
        Command::Region(cmd) => region(cmd)?,
    };
    Ok(RunReport {
        command: echo.to_string(),
        inputs,
        results,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

// ------------------------------------------------------------- file loading

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))
}

fn load_profile(path: &Path, inputs: &mut InputSet) -> Result<CollisionGraph, CliError> {
    let text = read_text(path)?;
    inputs.record("profile", path, text.as_bytes());
    CollisionGraph::parse_profile(&text, false).map_err(domain)
}

fn load_matrix(path: &Path, inputs: &mut InputSet) -> Result<ProtocolMatrix, CliError> {
    let text = read_text(path)?;
    inputs.record("matrix", path, text.as_bytes());
    ProtocolMatrix::parse_text(&text).map_err(domain)
}

fn load_offsets(
    path: &Path,
    graph: &CollisionGraph,
    inputs: &mut InputSet,
) -> Result<OffsetAssignment, CliError> {
    let text = read_text(path)?;
    inputs.record("offsets", path, text.as_bytes());
    OffsetAssignment::parse(&text, graph).map_err(domain)
}

/// Enumeration bound: explicit flag, then GENCOLL_MAX_SPACE, then built-in.
fn max_space_bound(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match std::env::var("GENCOLL_MAX_SPACE") {
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| CliError(format!("GENCOLL_MAX_SPACE must be an integer, got {raw:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MAX_SPACE),
        Err(e) => Err(CliError(format!("GENCOLL_MAX_SPACE: {e}"))),
    }
}

// ----------------------------------------------------------------- construct

fn construct(args: &ConstructArgs) -> Result<(Value, Value), CliError> {
    if args.duty.len() != args.links {
        return Err(CliError(format!(
            "--duty lists {} numerators but --links is {}",
            args.duty.len(),
            args.links
        )));
    }
    let spec = DutyFactorSpec::new(args.duty.clone(), args.q).map_err(domain)?;
    let bound = max_space_bound(None)?;
    let mut matrix = ProtocolMatrix::from_duty_spec_with_bound(&spec, bound).map_err(domain)?;
    if let Some(k) = args.expand {
        if k < 2 {
            return Err(CliError("--expand must be at least 2".to_string()));
        }
        matrix = matrix.k_expand(k).map_err(domain)?;
    }
    let text = matrix.to_text();
    fs::write(&args.out, &text)
        .map_err(|e| CliError(format!("cannot write {}: {e}", args.out.display())))?;

    let mut inputs = InputSet::default();
    let mut results = json!({
        "duty": rat_vec(&matrix.duty_factors()),
        "links": matrix.num_links(),
        "matrix_sha256": sha256_hex(text.as_bytes()),
        "out": args.out.display().to_string(),
        "period": matrix.period(),
    });
    if let Some(k) = args.expand {
        results["expansion"] = json!(k);
    }
    if let Some(profile) = &args.profile {
        let graph = load_profile(profile, &mut inputs)?;
        let predicted = throughput_point(&matrix.duty_factors(), &graph).map_err(domain)?;
        results["predicted_T"] = rat_vec(&predicted);
    }
    Ok((inputs.into_value(), results))
}

// ------------------------------------------------------------------ simulate

fn simulate(args: &SimulateArgs) -> Result<(Value, Value), CliError> {
    let mut inputs = InputSet::default();
    let matrix = load_matrix(&args.matrix, &mut inputs)?;
    let graph = load_profile(&args.profile, &mut inputs)?;
    let offsets = load_offsets(&args.offsets, &graph, &mut inputs)?;
    let mode = args.mode.unwrap_or(if offsets.is_synchronized() {
        Mode::Sync
    } else {
        Mode::Nonsync
    });
    let throughput = match mode {
        Mode::Sync => sync_throughput(&matrix, &graph, &offsets),
        Mode::Nonsync => nonsync_throughput(&matrix, &graph, &offsets),
    }
    .map_err(domain)?;
    let mut results = json!({
        "T": rat_vec(&throughput),
        "mode": mode.name(),
    });
    if mode == Mode::Sync {
        // Under integer offsets every receiver sees a well-defined binary
        // submatrix; echo it so a run is checkable by eye.
        let mut observed = Vec::with_capacity(graph.num_links());
        for receiver in 0..graph.num_links() {
            let rows = observed_submatrix(&matrix, &graph, receiver, &offsets).map_err(domain)?;
            let transmitters: Vec<usize> = graph
                .index_set(receiver)
                .map_err(domain)?
                .into_iter()
                .map(|j| j + 1)
                .collect();
            let row_strings: Vec<String> = rows
                .iter()
                .map(|row| row.iter().map(|&v| if v == 1 { '1' } else { '0' }).collect())
                .collect();
            observed.push(json!({
                "receiver": receiver + 1,
                "rows": row_strings,
                "transmitters": transmitters,
            }));
        }
        results["observed"] = Value::Array(observed);
    }
    Ok((inputs.into_value(), results))
}

// --------------------------------------------------------------------- sweep

fn sweep(args: &SweepArgs) -> Result<(Value, Value), CliError> {
    let mut inputs = InputSet::default();
    let matrix = load_matrix(&args.matrix, &mut inputs)?;
    let graph = load_profile(&args.profile, &mut inputs)?;
    let options = SweepOptions {
        max_space: max_space_bound(args.max_space)?,
    };
    let mode = args.mode.unwrap_or(Mode::Sync);
    let run_sweep = || match mode {
        Mode::Sync => sweep_sync_worstcase(&matrix, &graph, &options),
        Mode::Nonsync => sweep_nonsync_worstcase(&matrix, &graph, &options),
    };
    let outcome = match args.jobs {
        Some(0) => return Err(CliError("--jobs must be positive".to_string())),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError(format!("cannot build worker pool: {e}")))?
            .install(run_sweep),
        None => run_sweep(),
    }
    .map_err(domain)?;
    let witnesses: Vec<Value> = outcome
        .witnesses
        .iter()
        .map(|w| {
            let offsets: Vec<Value> = w
                .offsets
                .iter()
                .map(|(j, v)| {
                    json!({
                        "transmitter": j + 1,
                        "value": gencoll::format_rational(v),
                    })
                })
                .collect();
            json!({ "link": w.link + 1, "offsets": offsets })
        })
        .collect();
    let results = json!({
        "mode": mode.name(),
        "offsets_examined": outcome.offsets_examined,
        "witnesses": witnesses,
        "worst_case": rat_vec(&outcome.worst_case),
    });
    Ok((inputs.into_value(), results))
}

// -------------------------------------------------------------------- region

fn region(cmd: &RegionCommand) -> Result<(Value, Value), CliError> {
    match cmd {
        RegionCommand::Point(args) => region_point(args),
        RegionCommand::Member(args) => region_member(args),
        RegionCommand::Boundary(args) => region_boundary(args),
        RegionCommand::Project(args) => region_project(args),
        RegionCommand::Solve(args) => region_solve(args),
    }
}

fn parse_values(raw: &[String], what: &str) -> Result<Vec<Rat>, CliError> {
    raw.iter()
        .map(|tok| {
            gencoll::parse_rational(tok.trim())
                .map_err(|e| CliError(format!("invalid {what} {tok:?}: {e}")))
        })
        .collect()
}

fn to_f64s(values: &[Rat]) -> Vec<f64> {
    values.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect()
}

fn residuals_value(r: &KktResiduals) -> Value {
    json!({
        "complementary": float_value(r.complementary),
        "interior": float_value(r.interior),
        "nonnegativity": float_value(r.nonnegativity),
        "primal": float_value(r.primal),
        "stationarity": float_value(r.stationarity),
    })
}

fn region_point(args: &PointArgs) -> Result<(Value, Value), CliError> {
    let mut inputs = InputSet::default();
    let graph = load_profile(&args.profile, &mut inputs)?;
    let duty = parse_values(&args.duty, "duty factor")?;
    let point = throughput_point(&duty, &graph).map_err(domain)?;
    let results = json!({
        "C": rat_vec(&point),
        "f": rat_vec(&duty),
    });
    Ok((inputs.into_value(), results))
}

fn region_member(args: &MemberArgs) -> Result<(Value, Value), CliError> {
    let mut inputs = InputSet::default();
    let graph = load_profile(&args.profile, &mut inputs)?;
    let target = to_f64s(&parse_values(&args.target, "target")?);
    let outcome = membership(&target, &graph, DEFAULT_KKT_TOL).map_err(domain)?;
    let results = match outcome {
        Membership::Feasible { duty, achieved } => json!({
            "C": float_vec(&achieved),
            "f": float_vec(&duty),
            "target": float_vec(&target),
            "verdict": BoundaryVerdict::Interior.to_string(),
        }),
        Membership::Infeasible { violation, best_duty } => {
            let achieved = throughput_point_f64(&best_duty, &graph).map_err(domain)?;
            json!({
                "C": float_vec(&achieved),
                "f": float_vec(&best_duty),
                "target": float_vec(&target),
                "verdict": BoundaryVerdict::ExteriorOfClaim.to_string(),
                "violation": float_value(violation),
            })
        }
    };
    Ok((inputs.into_value(), results))
}

fn region_boundary(args: &BoundaryArgs) -> Result<(Value, Value), CliError> {
    let mut inputs = InputSet::default();
    let graph = load_profile(&args.profile, &mut inputs)?;
    let duty = parse_values(&args.duty, "duty factor")?;
    let certificate =
        is_on_outer_boundary(&to_f64s(&duty), &graph, DEFAULT_RHO_TOL).map_err(domain)?;
    let point = throughput_point(&duty, &graph).map_err(domain)?;
    let mut results = json!({
        "C": rat_vec(&point),
        "f": rat_vec(&duty),
        "lambda": float_vec(&certificate.lambda),
        "rho": float_value(certificate.rho),
        "rho_error_bound": float_value(certificate.rho_error_bound),
        "verdict": certificate.verdict.to_string(),
    });
    if let Some(residuals) = &certificate.residuals {
        results["residuals"] = residuals_value(residuals);
    }
    Ok((inputs.into_value(), results))
}

fn region_project(args: &ProjectArgs) -> Result<(Value, Value), CliError> {
    let mut inputs = InputSet::default();
    let graph = load_profile(&args.profile, &mut inputs)?;
    let duty = parse_values(&args.duty, "duty factor")?;
    let projection =
        project_to_boundary(&to_f64s(&duty), &graph, DEFAULT_RHO_TOL).map_err(domain)?;
    let achieved = throughput_point_f64(&projection.duty, &graph).map_err(domain)?;
    let degenerate: Vec<usize> = projection.degenerate_links.iter().map(|&i| i + 1).collect();
    let results = json!({
        "C": float_vec(&achieved),
        "degenerate_links": degenerate,
        "f": rat_vec(&duty),
        "projected_f": float_vec(&projection.duty),
        "rho": float_value(projection.rho_input),
        "rho_projected": float_value(projection.rho_projected),
    });
    Ok((inputs.into_value(), results))
}

fn region_solve(args: &SolveArgs) -> Result<(Value, Value), CliError> {
    let mut inputs = InputSet::default();
    let graph = load_profile(&args.profile, &mut inputs)?;
    let targets = to_f64s(&parse_values(&args.targets, "target")?);
    let solution = solve_op2(&targets, &graph, DEFAULT_KKT_TOL).map_err(domain)?;
    let achieved = throughput_point_f64(&solution.duty, &graph).map_err(domain)?;
    let results = json!({
        "C": float_vec(&achieved),
        "converged": solution.converged,
        "f": float_vec(&solution.duty),
        "lambda": float_vec(&solution.lambda),
        "objective": float_value(solution.objective),
        "residuals": residuals_value(&solution.residuals),
        "targets": float_vec(&targets),
    });
    Ok((inputs.into_value(), results))
}
