//! Command-line driver: static checks, sparsity tables, kernel emission,
//! evaluation, directional derivatives, placement, and saturation traces
//! over the textual program format.

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use phg_core::algebra::{Algebra, ProductKind, Signature};
use phg_core::autodiff;
use phg_core::grade::GradeSet;
use phg_core::kernel;
use phg_core::mesh;
use phg_core::phg::{information_quality, EdgeKind, TraceStep};
use phg_core::place;
use phg_core::program::{self, CompiledProgram};
use phg_core::scalar::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Float,
    Exact,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Float => Mode::Float64,
            ModeArg::Exact => Mode::ExactRational,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "phg",
    about = "Grade-aware geometric algebra program checks, kernels, and placement"
)]
struct Cli {
    /// Numeric mode for evaluation commands.
    #[arg(long, global = true, value_enum, default_value = "float")]
    mode: ModeArg,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and run saturation, grade, dimension, mesh, and
    /// co-location checks. Exit status 1 when any error is found.
    Check(CheckArgs),
    /// Print the sparsity profile of one operation at a grade restriction.
    Sparsity(SparsityArgs),
    /// Emit the specialized kernel for the edge producing a named node.
    Emit(EmitArgs),
    /// Evaluate a program against bound input values.
    Eval(EvalArgs),
    /// Forward-mode directional derivative of a program.
    Diff(DiffArgs),
    /// Check co-location feasibility and compute a tile placement.
    Place(PlaceArgs),
    /// Print the saturation firing trace with information measurements.
    Trace(TraceArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Program file (or an indexed mesh file with --mesh).
    file: String,
    /// Treat the file as a flat vertex/face list (`v x y z` / `f i j k`)
    /// and check the generated boundary structure, including exact
    /// degeneracy and duplicate-edge scans.
    #[arg(long)]
    mesh: bool,
}

#[derive(Args)]
struct SparsityArgs {
    /// Algebra signature p,q,r.
    #[arg(long)]
    algebra: String,
    /// Operation kind: gp | outer | inner | regressive.
    #[arg(long)]
    kind: String,
    /// Input grades as p,q.
    #[arg(long)]
    grades: String,
}

#[derive(Args)]
struct EmitArgs {
    file: String,
    /// Name of the node whose producing edge is emitted.
    #[arg(long)]
    edge: String,
    /// Fuse accumulations into muladd instructions.
    #[arg(long)]
    fused: bool,
}

#[derive(Args)]
struct EvalArgs {
    file: String,
    /// JSON value file binding node names to coefficient lists.
    #[arg(long)]
    inputs: String,
    /// Comma-separated node names to report (default: sinks).
    #[arg(long)]
    outputs: Option<String>,
    /// Evaluate through emitted kernels instead of dense products.
    #[arg(long)]
    kernels: bool,
}

#[derive(Args)]
struct DiffArgs {
    file: String,
    #[arg(long)]
    inputs: String,
    /// JSON value file binding tangents for differentiated inputs.
    #[arg(long)]
    direction: String,
    #[arg(long)]
    outputs: Option<String>,
}

#[derive(Args)]
struct PlaceArgs {
    file: String,
    /// JSON target model {"name","rows","cols","tile_kb","dma_channels"};
    /// defaults to the program's declared targets.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args)]
struct TraceArgs {
    file: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(args) => cmd_check(&cli, args),
        Command::Sparsity(args) => cmd_sparsity(&cli, args),
        Command::Emit(args) => cmd_emit(&cli, args),
        Command::Eval(args) => cmd_eval(&cli, args),
        Command::Diff(args) => cmd_diff(&cli, args),
        Command::Place(args) => cmd_place(&cli, args),
        Command::Trace(args) => cmd_trace(&cli, args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &str) -> Result<CompiledProgram, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    program::load_program(&text).map_err(|e| format!("{path}:{e}"))
}

fn parse_signature(s: &str) -> Result<Signature, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("signature must be p,q,r, got `{s}`"));
    }
    let nums: Result<Vec<usize>, _> = parts.iter().map(|p| p.trim().parse()).collect();
    let nums = nums.map_err(|e| format!("bad signature `{s}`: {e}"))?;
    Ok(Signature::new(nums[0], nums[1], nums[2]))
}

fn cmd_check(cli: &Cli, args: &CheckArgs) -> Result<ExitCode, String> {
    if args.mesh {
        return cmd_check_mesh(cli, args);
    }
    let program = load(&args.file)?;
    let out = program::check(&program);
    match cli.format {
        FormatArg::Text => print!("{}", out.report),
        FormatArg::Json => println!(
            "{}",
            serde_json::to_string_pretty(&out.report).map_err(|e| e.to_string())?
        ),
    }
    Ok(if out.report.has_errors() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_check_mesh(cli: &Cli, args: &CheckArgs) -> Result<ExitCode, String> {
    let text = fs::read_to_string(&args.file).map_err(|e| format!("{}: {e}", args.file))?;
    let parsed = mesh::parse_indexed_mesh(&text)?;
    let alg = Algebra::new(Signature::new(3, 0, 1)).map_err(|e| e.to_string())?;
    let (phg, simplices, vertex_values) =
        mesh::import_indexed_mesh(&alg, &parsed).map_err(|e| e.to_string())?;
    // evaluate joins exactly so degenerate and duplicate scans can run
    let mut values = vertex_values.clone();
    for s in &simplices {
        let pts: Vec<_> = s.vertices.iter().map(|v| values[v].clone()).collect();
        let joined =
            phg_core::algebra::Multivector::outer_join(&pts).map_err(|e| e.to_string())?;
        values.insert(s.node, joined);
    }
    let diags = mesh::check_boundary_consistency(&phg, &simplices, &values);
    match cli.format {
        FormatArg::Text => {
            println!(
                "mesh: {} vertices, {} faces, {} simplex nodes",
                parsed.vertices.len(),
                parsed.faces.len(),
                simplices.len()
            );
            if diags.is_empty() {
                println!("ok: boundary structure consistent");
            }
            for d in &diags {
                println!("{:?}: {}", d.kind, d.message);
            }
        }
        FormatArg::Json => println!(
            "{}",
            serde_json::to_string_pretty(&diags).map_err(|e| e.to_string())?
        ),
    }
    Ok(if diags.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_sparsity(cli: &Cli, args: &SparsityArgs) -> Result<ExitCode, String> {
    let sig = parse_signature(&args.algebra)?;
    let alg = Algebra::new(sig).map_err(|e| e.to_string())?;
    let kind = ProductKind::from_name(&args.kind)
        .ok_or_else(|| format!("unknown kind `{}`; use gp|outer|inner|regressive", args.kind))?;
    let grades: Vec<&str> = args.grades.split(',').collect();
    if grades.len() != 2 {
        return Err(format!("grades must be p,q, got `{}`", args.grades));
    }
    let p: usize = grades[0].trim().parse().map_err(|e| format!("bad grade: {e}"))?;
    let q: usize = grades[1].trim().parse().map_err(|e| format!("bad grade: {e}"))?;
    let profile = kernel::sparsity_profile(&alg, kind, p, q).map_err(|e| e.to_string())?;
    let tensor = kernel::tensor_sparsity(&alg, kind);
    match cli.format {
        FormatArg::Text => {
            println!("algebra            {}", sig);
            println!("kind               {}", kind);
            println!("grades             {p} x {q}");
            println!("nonzero entries    {}", profile.nonzero);
            println!("restricted dense   {}", profile.restricted_dense);
            println!("multiplies         {}", profile.multiplies);
            println!("adds               {}", profile.adds);
            println!("dense multiplies   {}", profile.dense_multiplies);
            println!("dense adds         {}", profile.dense_adds);
            println!("reduction          {:.1}%", profile.reduction_pct);
            println!("tensor sparsity    {:.3}%", tensor * 100.0);
        }
        FormatArg::Json => {
            let mut v = serde_json::to_value(&profile).map_err(|e| e.to_string())?;
            v["tensor_sparsity"] = serde_json::json!(tensor);
            println!("{}", serde_json::to_string_pretty(&v).map_err(|e| e.to_string())?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_emit(cli: &Cli, args: &EmitArgs) -> Result<ExitCode, String> {
    let program = load(&args.file)?;
    let target = program
        .node_id(&args.edge)
        .ok_or_else(|| format!("unknown node `{}`", args.edge))?;
    let phg = &program.phg;
    let edge = phg
        .producers(target)
        .next()
        .ok_or_else(|| format!("`{}` is an input node; no edge produces it", args.edge))?;
    let alg = program
        .algebra
        .as_ref()
        .ok_or("program declares no algebra")?;
    let report = phg.saturate();
    let opts = kernel::KernelOptions { fuse_muladd: args.fused };
    let kir = match &edge.kind {
        EdgeKind::Product(kind) => {
            let p = report.grades(edge.sources[0]);
            let q = report.grades(edge.sources[1]);
            kernel::emit_kernel_with(alg, *kind, &p, &q, opts).map_err(|e| e.to_string())?
        }
        EdgeKind::Join => {
            let all_points = edge
                .sources
                .iter()
                .all(|s| report.grades(*s) == GradeSet::singleton(1));
            if !all_points {
                return Err("join kernels require grade-1 sources".to_string());
            }
            kernel::emit_join_kernel(alg, edge.sources.len() - 1).map_err(|e| e.to_string())?
        }
        other => {
            return Err(format!(
                "edge kind {} has no specialized kernel emitter",
                other.name()
            ))
        }
    };
    match cli.format {
        FormatArg::Text => print!("{kir}"),
        FormatArg::Json => println!(
            "{}",
            serde_json::to_string_pretty(&kir).map_err(|e| e.to_string())?
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_outputs(
    program: &CompiledProgram,
    arg: &Option<String>,
) -> Result<Option<Vec<phg_core::phg::NodeId>>, String> {
    match arg {
        None => Ok(None),
        Some(s) => {
            let mut out = Vec::new();
            for name in s.split(',') {
                let name = name.trim();
                out.push(
                    program
                        .node_id(name)
                        .ok_or_else(|| format!("unknown output node `{name}`"))?,
                );
            }
            Ok(Some(out))
        }
    }
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> Result<ExitCode, String> {
    let program = load(&args.file)?;
    let text = fs::read_to_string(&args.inputs).map_err(|e| format!("{}: {e}", args.inputs))?;
    let inputs = program::parse_value_file(&program, &text, cli.mode.into())?;
    let outputs = parse_outputs(&program, &args.outputs)?;
    let report = program.phg.saturate();
    let opts = autodiff::EvalOptions {
        backend: if args.kernels {
            autodiff::Backend::Kernels
        } else {
            autodiff::Backend::Dense
        },
    };
    let (values, _) = autodiff::eval_with_stats(
        &program.phg,
        &report,
        &inputs,
        outputs.as_deref(),
        opts,
    )
    .map_err(|e| e.to_string())?;
    print_values(cli, &program, &values)
}

fn cmd_diff(cli: &Cli, args: &DiffArgs) -> Result<ExitCode, String> {
    let program = load(&args.file)?;
    let itext = fs::read_to_string(&args.inputs).map_err(|e| format!("{}: {e}", args.inputs))?;
    let dtext =
        fs::read_to_string(&args.direction).map_err(|e| format!("{}: {e}", args.direction))?;
    let inputs = program::parse_value_file(&program, &itext, cli.mode.into())?;
    let direction = program::parse_value_file(&program, &dtext, cli.mode.into())?;
    let outputs = parse_outputs(&program, &args.outputs)?;
    let report = program.phg.saturate();
    let tangents = autodiff::directional_derivative(
        &program.phg,
        &report,
        &inputs,
        &direction,
        outputs.as_deref(),
    )
    .map_err(|e| e.to_string())?;
    print_values(cli, &program, &tangents)
}

fn print_values(
    cli: &Cli,
    program: &CompiledProgram,
    values: &BTreeMap<phg_core::phg::NodeId, phg_core::algebra::Multivector>,
) -> Result<ExitCode, String> {
    match cli.format {
        FormatArg::Text => {
            for (id, mv) in values {
                println!("{} = {}", program.node_name(*id), mv);
            }
        }
        FormatArg::Json => {
            let json = program::values_to_json(program, values);
            println!("{}", serde_json::to_string_pretty(&json).map_err(|e| e.to_string())?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_place(cli: &Cli, args: &PlaceArgs) -> Result<ExitCode, String> {
    let program = load(&args.file)?;
    let targets: Vec<place::TargetModel> = match &args.target {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            vec![serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?]
        }
        None => program.file.targets.iter().map(|t| t.model.clone()).collect(),
    };
    if targets.is_empty() {
        return Err("no targets: declare `target` rows or pass --target".to_string());
    }
    let matrix = place::check_feasibility(&program.phg, &targets);
    let plan = if matrix.all_feasible() {
        Some(place::assign(&program.phg, &targets[0]).map_err(|e| e.to_string())?)
    } else {
        None
    };
    match cli.format {
        FormatArg::Text => {
            println!("feasibility:");
            for (gi, group) in matrix.groups.iter().enumerate() {
                let name = program.node_name(program.phg.edge(*group).target);
                for (ti, tname) in matrix.targets.iter().enumerate() {
                    match matrix.cell(gi, ti) {
                        place::Feasibility::Feasible => {
                            println!("  group[{name}] on {tname}: feasible")
                        }
                        place::Feasibility::Infeasible(r) => {
                            println!("  group[{name}] on {tname}: infeasible ({r})")
                        }
                    }
                }
            }
            if let Some(plan) = &plan {
                println!("plan on {}:", plan.target);
                for (member, (r, c)) in &plan.assignments {
                    println!("  {} -> tile ({r},{c})", program.node_name(*member));
                }
                for (a, b, ch) in &plan.dma_channels {
                    println!(
                        "  dma {}:{} channel {ch}",
                        program.node_name(*a),
                        program.node_name(*b)
                    );
                }
                let order: Vec<String> = plan
                    .barrier_schedule
                    .iter()
                    .map(|n| program.node_name(*n))
                    .collect();
                println!("  schedule: {}", order.join(" -> "));
            }
        }
        FormatArg::Json => {
            let plan_json = plan
                .as_ref()
                .map(|p| program::plan_to_json(&program, p))
                .unwrap_or(serde_json::Value::Null);
            let v = serde_json::json!({
                "feasibility": program::matrix_to_json(&program, &matrix),
                "plan": plan_json,
            });
            println!("{}", serde_json::to_string_pretty(&v).map_err(|e| e.to_string())?);
        }
    }
    Ok(if plan.is_some() || matrix.all_feasible() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_trace(cli: &Cli, args: &TraceArgs) -> Result<ExitCode, String> {
    let program = load(&args.file)?;
    let report = program.phg.saturate();
    let quality = information_quality(&report);
    match cli.format {
        FormatArg::Text => {
            println!("step 0: start (saturated {}, known {})", quality[0].0, quality[0].1);
            for (i, step) in report.trace.iter().enumerate() {
                let (sat, known) = quality[i + 1];
                match step {
                    TraceStep::InputSaturated { node } => println!(
                        "step {}: input `{}` saturated (saturated {sat}, known {known})",
                        i + 1,
                        program.node_name(*node)
                    ),
                    TraceStep::EdgeFired { edge, target, inferred, .. } => {
                        let kind = program.phg.edge(*edge).kind.name();
                        println!(
                            "step {}: {} fired -> `{}` grades {} (saturated {sat}, known {known})",
                            i + 1,
                            kind,
                            program.node_name(*target),
                            inferred
                        );
                    }
                }
            }
            println!("iterations: {}", report.iterations);
            if !report.stalled.is_empty() {
                for s in &report.stalled {
                    println!("stalled `{}`: {}", program.node_name(s.node), s.reason);
                }
            }
        }
        FormatArg::Json => {
            let steps: Vec<serde_json::Value> = report
                .trace
                .iter()
                .enumerate()
                .map(|(i, step)| {
                    let (sat, known) = quality[i + 1];
                    match step {
                        TraceStep::InputSaturated { node } => serde_json::json!({
                            "step": i + 1,
                            "kind": "input",
                            "node": program.node_name(*node),
                            "saturated": sat,
                            "known": known,
                        }),
                        TraceStep::EdgeFired { edge, target, inferred, .. } => serde_json::json!({
                            "step": i + 1,
                            "kind": program.phg.edge(*edge).kind.name(),
                            "target": program.node_name(*target),
                            "grades": inferred.to_string(),
                            "saturated": sat,
                            "known": known,
                        }),
                    }
                })
                .collect();
            let v = serde_json::json!({
                "steps": steps,
                "iterations": report.iterations,
                "stalled": report.stalled.iter().map(|s| program.node_name(s.node)).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&v).map_err(|e| e.to_string())?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
