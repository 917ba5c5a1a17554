use clap::{Args, Parser, Subcommand};
use oblique_grating_cli::error::{EXIT_OK, EXIT_FAILURE};
use oblique_grating_cli::output::render;
use oblique_grating_cli::spec::{Format, MethodName, PolarizationName};
use oblique_grating_cli::{CliError, Command, ConfigDocument, parse_run_spec, run};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "grating", version, about = "Multiple scattering by a grating of dielectric cylinders at oblique incidence")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Normalized and dimensional multiple-scattering coefficients.
    Coeffs(Flags),
    /// Lattice sums for the coupling orders of the truncation.
    Lattice(Flags),
    /// Exterior E_z / H_z on a polar grid around one cylinder.
    Fields(Flags),
    /// Grating and single-cylinder amplitude matrices on a uniform angle grid.
    Amplitude(Flags),
    /// Invariant checks for this configuration.
    Validate(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat TOML config document.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    eps_r: Option<f64>,
    #[arg(long)]
    mu_r: Option<f64>,
    #[arg(long, conflicts_with = "wavelength")]
    k0: Option<f64>,
    #[arg(long)]
    wavelength: Option<f64>,
    #[arg(long)]
    theta_deg: Option<f64>,
    #[arg(long)]
    phi_deg: Option<f64>,
    #[arg(long)]
    e0v: Option<f64>,
    #[arg(long)]
    h0v: Option<f64>,
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    /// Neumann order K.
    #[arg(long)]
    order: Option<usize>,
    /// Lattice-sum tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Field-series tolerance.
    #[arg(long)]
    field_tol: Option<f64>,
    #[arg(long, value_enum)]
    pol: Option<PolarizationName>,
    /// Cylinder index of the field grid frame.
    #[arg(long)]
    cylinder: Option<i64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    r_count: Option<usize>,
    #[arg(long)]
    phi_min_deg: Option<f64>,
    #[arg(long)]
    phi_max_deg: Option<f64>,
    #[arg(long)]
    phi_count: Option<usize>,
    #[arg(long)]
    z: Option<f64>,
    /// Angle samples for `amplitude`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Flags {
    fn overrides(&self) -> ConfigDocument {
        ConfigDocument {
            radius: self.radius,
            spacing: self.spacing,
            eps_r: self.eps_r,
            mu_r: self.mu_r,
            k0: self.k0,
            wavelength: self.wavelength,
            theta_deg: self.theta_deg,
            phi_deg: self.phi_deg,
            e0v: self.e0v,
            h0v: self.h0v,
            truncation: self.truncation,
            method: self.method,
            order: self.order,
            tol: self.tol,
            field_tol: self.field_tol,
            polarization: self.pol,
            cylinder: self.cylinder,
            r_min: self.r_min,
            r_max: self.r_max,
            r_count: self.r_count,
            phi_min_deg: self.phi_min_deg,
            phi_max_deg: self.phi_max_deg,
            phi_count: self.phi_count,
            z: self.z,
            samples: self.samples,
            out: self.out.clone(),
            format: self.format,
        }
    }
}

fn execute(command: Command, flags: &Flags) -> Result<i32, CliError> {
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Some((path.display().to_string(), text))
        }
        None => None,
    };
    let spec = parse_run_spec(file.as_ref().map(|(p, t)| (p.as_str(), t.as_str())), &flags.overrides())?;
    let result = run(command, &spec)?;
    let text = render(&result.envelope, &result.payload, spec.output.format);
    match &spec.output.path {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => print!("{text}"),
    }
    if result.failed > 0 {
        let err = CliError::Validation { failed: result.failed };
        eprintln!("grating: {err}");
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Coeffs(f) => (Command::Coeffs, f),
        Sub::Lattice(f) => (Command::Lattice, f),
        Sub::Fields(f) => (Command::Fields, f),
        Sub::Amplitude(f) => (Command::Amplitude, f),
        Sub::Validate(f) => (Command::Validate, f),
    };
    let code = execute(command, flags).unwrap_or_else(|e| {
        eprintln!("grating: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
