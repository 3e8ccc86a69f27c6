use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varpx::experiment::{
    convergence_csv, emit_convergence, infsup_csv, run_convergence, run_infsup, run_solve, run_verification, to_json, write_file, ExperimentConfig,
    ExperimentError,
};

#[derive(Parser)]
#[command(name = "varpx", version, about = "p(x)-Stokes finite elements: convergence studies and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on every mesh level and compare observed rates with the theory.
    Converge(Common),
    /// Run the property and assumption suites.
    Verify(Common),
    /// Scan the discrete inf-sup constant of MINI, Taylor-Hood and P1/P1.
    Infsup(Common),
    /// Solve once on the finest level and export the mesh and vertex values.
    Solve(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 gives bit-identical output.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn setup(c: &Common) -> Result<(ExperimentConfig, PathBuf), ExperimentError> {
    if let Some(t) = c.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global().map_err(|e| ExperimentError::Config(e.to_string()))?;
        let par = if t <= 1 { faer::Par::Seq } else { faer::Par::rayon(t) };
        faer::set_global_parallelism(par);
    }
    let mut config = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        config.seed = s;
    }
    let dir = c.out_dir.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    Ok((config, dir))
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn converge(c: &Common) -> Result<ExitCode, ExperimentError> {
    let (config, dir) = setup(c)?;
    let report = run_convergence(&config)?;
    emit_convergence(&report, &dir)?;
    print!("{}", convergence_csv(&report));
    for v in &report.verdicts {
        println!("{}: observed {:.4}, theoretical {:.4} -> {}", v.name, v.observed, v.expected, if v.pass { "PASS" } else { "FAIL" });
    }
    if let Some(msg) = &report.aborted {
        eprintln!("aborted: {msg}");
        return Ok(ExitCode::from(1));
    }
    Ok(verdict(report.pass))
}

fn print_verdicts(verdicts: &[varpx::experiment::Verdict]) {
    for v in verdicts {
        println!("{:<40} {:>12.4e} vs {:>12.4e}  {}", v.name, v.observed, v.expected, if v.pass { "PASS" } else { "FAIL" });
    }
}

fn verify(c: &Common) -> Result<ExitCode, ExperimentError> {
    let (config, dir) = setup(c)?;
    let report = run_verification(&config)?;
    write_file(&dir.join(&config.output.json), &to_json(&report)?)?;
    print_verdicts(&report.verdicts);
    Ok(verdict(report.pass))
}

fn infsup(c: &Common) -> Result<ExitCode, ExperimentError> {
    let (config, dir) = setup(c)?;
    let report = run_infsup(&config)?;
    write_file(&dir.join(&config.output.json), &to_json(&report)?)?;
    write_file(&dir.join("infsup.csv"), &infsup_csv(&report))?;
    print!("{}", infsup_csv(&report));
    print_verdicts(&report.verdicts);
    Ok(verdict(report.pass))
}

fn solve(c: &Common) -> Result<ExitCode, ExperimentError> {
    let (config, dir) = setup(c)?;
    let r = run_solve(&config, &dir)?;
    println!(
        "n = {}: {} Newton iterations, residual {:.3e}, velocity error {:.4e}, pressure error {:.4e}; wrote {}",
        r.n,
        r.newton_iterations,
        r.final_residual,
        r.errors.velocity_quasinorm_error,
        r.errors.pressure_luxemburg_error,
        Path::new(&dir).display()
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Converge(c) => converge(c),
        Command::Verify(c) => verify(c),
        Command::Infsup(c) => infsup(c),
        Command::Solve(c) => solve(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
