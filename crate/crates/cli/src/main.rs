use std::path::PathBuf;
use std::process::ExitCode;

use bzdos_cli::config::{Coords, MethodKind, StudySpec};
use bzdos_cli::plot::{load_series, render_svg};
use bzdos_cli::study::{self, write_file};
use bzdos_cli::system::LoadedSystem;
use bzdos_cli::StudyError;
use clap::{Args, Parser, Subcommand};

/// Density-of-states studies on reference systems and Wannier models.
#[derive(Parser)]
#[command(name = "bzdos", version, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// DOS at each energy with one method.
    Dos(StudyArgs),
    /// Error against the reference along an N (or tolerance) schedule.
    Converge(StudyArgs),
    /// Best smearing width per evaluation budget.
    EtaSweep(StudyArgs),
    /// Cheapest run reaching a target error, per smearing width.
    Cost(StudyArgs),
    /// Check that the deformation pushes the spectrum down; exit 2 on failure.
    Diagnose(StudyArgs),
    /// Log-log SVG of CSV columns.
    Plot(PlotArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// TOML study file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// chain, graphene, free-gas-1d, free-gas-2d, free-gas-3d or two-block.
    #[arg(long)]
    system: Option<String>,
    /// Wannier90 hr.dat file instead of a named system.
    #[arg(long)]
    hr: Option<PathBuf>,
    /// Fermi energy subtracted from the hr.dat on-site terms.
    #[arg(long, allow_hyphen_values = true)]
    fermi: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodKind>,
    /// Energies, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    energy: Vec<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta_e: Option<f64>,
    /// Coordinates the BCD amplitude refers to.
    #[arg(long, value_enum)]
    coords: Option<Coords>,
    /// Smearing widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// IAI absolute tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Strictly increasing grid sizes, or tolerances for iai.
    #[arg(long, value_delimiter = ',')]
    schedule: Vec<f64>,
    /// Strictly increasing evaluation budgets for eta-sweep.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<u64>,
    /// Target absolute error for cost.
    #[arg(long)]
    target: Option<f64>,
    /// "analytic" or a CSV with a value column.
    #[arg(long)]
    reference: Option<String>,
    /// Directory for CSV output; without it tables go to stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where cached tetrahedron references live (default: <out>/.bzdos-cache).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write 0 as wall time so reruns give identical bytes.
    #[arg(long)]
    fixed_wall_time: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV files, one series each.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "nevals")]
    x: String,
    #[arg(long, default_value = "rel_error")]
    y: String,
    #[arg(long, default_value = "plot.svg")]
    out: PathBuf,
}

impl StudyArgs {
    fn into_spec(self) -> Result<StudySpec, StudyError> {
        let base = match &self.config {
            Some(path) => StudySpec::load(path)?,
            None => StudySpec::default(),
        };
        let over = StudySpec {
            system: self.system,
            hr: self.hr,
            fermi: 0.0,
            method: self.method,
            energies: self.energy,
            alpha: self.alpha,
            delta_e: self.delta_e,
            coords: self.coords,
            eta: self.eta,
            n: self.n,
            tol: self.tol,
            schedule: self.schedule,
            budgets: self.budgets,
            target: self.target,
            reference: self.reference,
            out: self.out,
            cache_dir: self.cache_dir,
            threads: self.threads,
            fixed_wall_time: self.fixed_wall_time,
        };
        let mut spec = base.merge(over);
        if let Some(f) = self.fermi {
            spec.fermi = f;
        }
        spec.validate()?;
        Ok(spec)
    }
}

enum Outcome {
    Done,
    DiagnosticFailed,
}

fn emit(spec: &StudySpec, file: &str, text: &str) -> Result<(), StudyError> {
    print!("{text}");
    if let Some(dir) = &spec.out {
        write_file(&dir.join(file), text)?;
    }
    Ok(())
}

fn prepare(args: StudyArgs) -> Result<(StudySpec, LoadedSystem), StudyError> {
    let spec = args.into_spec()?;
    if let Some(t) = spec.threads {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let sys = LoadedSystem::load(&spec)?;
    Ok((spec, sys))
}

fn run(cli: Cli) -> Result<Outcome, StudyError> {
    match cli.cmd {
        Command::Dos(a) => {
            let (spec, sys) = prepare(a)?;
            let rows = study::run_dos(&spec, &sys)?;
            emit(&spec, "dos.csv", &study::dos_csv(&spec, &rows))?;
        }
        Command::Converge(a) => {
            let (spec, sys) = prepare(a)?;
            let rows = study::run_convergence(&spec, &sys)?;
            emit(&spec, "converge.csv", &study::convergence_csv(&rows))?;
        }
        Command::EtaSweep(a) => {
            let (spec, sys) = prepare(a)?;
            let (rows, best) = study::run_eta_sweep(&spec, &sys)?;
            if let Some(dir) = &spec.out {
                write_file(&dir.join("eta-sweep.csv"), &study::sweep_csv(&rows))?;
            }
            emit(&spec, "best-eta.csv", &study::best_eta_csv(&best))?;
        }
        Command::Cost(a) => {
            let (spec, sys) = prepare(a)?;
            let rows = study::run_cost(&spec, &sys)?;
            emit(&spec, "cost.csv", &study::cost_csv(&rows))?;
            match study::fit_cost_exponent(&rows) {
                Some(p) => eprintln!("fitted n_evals ~ eta^-p with p = {p:.3}"),
                None => eprintln!("too few rows reached the target to fit an exponent"),
            }
        }
        Command::Diagnose(a) => {
            let (spec, sys) = prepare(a)?;
            let d = study::run_diagnose(&spec, &sys)?;
            print!("{}", d.report);
            if d.failed {
                return Ok(Outcome::DiagnosticFailed);
            }
        }
        Command::Plot(a) => {
            let series = a
                .inputs
                .iter()
                .map(|p| load_series(p, &a.x, &a.y))
                .collect::<Result<Vec<_>, _>>()?;
            write_file(&a.out, &render_svg(&series, &a.x, &a.y))?;
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::DiagnosticFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
