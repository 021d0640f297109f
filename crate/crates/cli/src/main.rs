use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixdim::diagnostics::diagnose;
use mixdim::field::{pressure_svg, write_pressure_csv, FieldEvaluator};
use mixdim::harness::{emit, run_study, BenchmarkConfig, OutputFormat, StudyConfig};
use mixdim::mesh::build_mesh;
use mixdim::solver::{conservation_residual, interface_pressure_jump, solve_method};
use mixdim::spaces::{canonical_assignment, check_compatibility, Method};

/// Mixed-dimensional finite elements for flow in fractured porous media.
#[derive(Parser, Debug)]
#[command(name = "mixdim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a convergence study and write the error report.
    Study(StudyArgs),
    /// Solve the benchmark once and export the pressure field.
    Solve(SolveArgs),
    /// Check the discrete complex (exactness, cohomology, adjointness, Helmholtz, stability).
    Diagnose(DiagnoseArgs),
    /// Print the space assignment of each method and its compatibility report.
    CheckSpaces(CheckSpacesArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Plain-text `key = value` file overriding the benchmark parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn benchmark(&self) -> Result<BenchmarkConfig, String> {
        match &self.config {
            None => Ok(BenchmarkConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                BenchmarkConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Comma-separated methods (primal, mixed1, mixed2) or `all`.
    #[arg(long, default_value = "all")]
    method: String,
    /// Comma-separated refinement levels.
    #[arg(long, default_value = "2,3,4,5,6", value_delimiter = ',')]
    levels: Vec<u32>,
    #[arg(long, default_value_t = 7)]
    ref_level: u32,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated output formats (csv, text, svg).
    #[arg(long, default_value = "csv,text,svg", value_delimiter = ',')]
    format: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, default_value = "mixed1")]
    method: String,
    #[arg(long, default_value_t = 4)]
    level: u32,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long, default_value = "all")]
    method: String,
    #[arg(long, default_value_t = 2)]
    level: u32,
    /// Random cochains per degree for the Helmholtz check.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CheckSpacesArgs {
    #[arg(long, default_value = "all")]
    method: String,
    #[command(flatten)]
    common: Common,
}

fn parse_methods(s: &str) -> Result<Vec<Method>, String> {
    if s.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    s.split(',').map(|m| m.parse::<Method>()).collect()
}

fn study(args: StudyArgs) -> Result<bool, String> {
    let formats = args
        .format
        .iter()
        .map(|f| f.parse::<OutputFormat>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = StudyConfig {
        methods: parse_methods(&args.method)?,
        levels: args.levels,
        reference_level: args.ref_level,
        benchmark: args.common.benchmark()?,
        out_dir: Some(args.out.clone()),
    };
    let report = run_study(&cfg).map_err(|e| e.to_string())?;
    print!("{report}");
    for f in formats {
        let path = emit(&report, f, &args.out).map_err(|e| e.to_string())?;
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn write(path: &Path, contents: &[u8]) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn solve(args: SolveArgs) -> Result<bool, String> {
    let method: Method = args.method.parse()?;
    let bench = args.common.benchmark()?;
    let g = bench.geometry().map_err(|e| e.to_string())?;
    let coeffs = bench.coefficients(&g);
    let mesh = build_mesh(&g, args.level).map_err(|e| e.to_string())?;
    let sol = solve_method(&mesh, &coeffs, method).map_err(|e| e.to_string())?;
    let eval = FieldEvaluator::new(&mesh, &sol).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    for s in &g.subdomains {
        let mut buf = Vec::new();
        write_pressure_csv(&eval, s.id, &mut buf).map_err(|e| e.to_string())?;
        write(&args.out.join(format!("pressure_{}.csv", s.id)), &buf)?;
    }
    write(&args.out.join("pressure.svg"), pressure_svg(&eval).as_bytes())?;
    let p = sol.pressure();
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("method {method}, level {}, {} unknowns", args.level, sol.values.len());
    println!("relative residual {:.3e}", sol.residual);
    println!("pressure range [{lo:.6}, {hi:.6}]");
    println!(
        "interface pressure jump {:.3e}",
        interface_pressure_jump(&sol, &mesh, &coeffs).map_err(|e| e.to_string())?
    );
    if method.is_mixed() {
        println!(
            "conservation residual {:.3e}",
            conservation_residual(&sol, &mesh, &coeffs).map_err(|e| e.to_string())?
        );
    }
    println!("wrote {}", args.out.display());
    Ok(true)
}

fn run_diagnose(args: DiagnoseArgs) -> Result<bool, String> {
    let g = args.common.benchmark()?.geometry().map_err(|e| e.to_string())?;
    let mut ok = true;
    for m in parse_methods(&args.method)? {
        println!("{m} (level {})", args.level);
        for c in diagnose(&g, args.level, m, args.samples).map_err(|e| e.to_string())? {
            ok &= c.passed();
            println!("  {c}");
        }
    }
    println!("{}", if ok { "all checks passed" } else { "some checks FAILED" });
    Ok(ok)
}

fn check_spaces(args: CheckSpacesArgs) -> Result<bool, String> {
    let g = args.common.benchmark()?.geometry().map_err(|e| e.to_string())?;
    let mut ok = true;
    for m in parse_methods(&args.method)? {
        let a = canonical_assignment(m, &g, g.n).map_err(|e| e.to_string())?;
        println!("{m}");
        print!("{a}");
        let violations = check_compatibility(&a, &g);
        if violations.is_empty() {
            println!("compatible\n");
        } else {
            ok = false;
            for v in violations {
                println!("  {v}");
            }
            println!();
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Study(a) => study(a),
        Command::Solve(a) => solve(a),
        Command::Diagnose(a) => run_diagnose(a),
        Command::CheckSpaces(a) => check_spaces(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
