//! Subcommand pipelines: wavenumbers, single-scatter table, lattice table,
//! solve, then the selected payload.

use crate::error::CliError;
use crate::output::{Cell, Payload, ResultEnvelope, SolveSummary, coefficient_rows};
use crate::spec::RunSpec;
use crate::validate;
use num_complex::Complex64;
use oblique_grating::cylinder::{Mat2, derive_wavenumbers};
use oblique_grating::fields::{self, FieldError, implied_e0h};
use oblique_grating::lattice::{self, LatticeOptions};
use oblique_grating::solver::{GratingSolution, SolveOptions, solve_grating};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Coeffs,
    Lattice,
    Fields,
    Amplitude,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Coeffs => "coeffs",
            Self::Lattice => "lattice",
            Self::Fields => "fields",
            Self::Amplitude => "amplitude",
            Self::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub envelope: ResultEnvelope,
    pub payload: Payload,
    /// Failed checks, for `validate`.
    pub failed: usize,
}

pub fn lattice_options(spec: &RunSpec) -> LatticeOptions {
    LatticeOptions {
        tol: spec.lattice_tol,
        ..LatticeOptions::default()
    }
}

pub fn solve(spec: &RunSpec) -> Result<GratingSolution, CliError> {
    let opts = SolveOptions {
        truncation: Some(spec.truncation),
        method: spec.method,
        lattice: lattice_options(spec),
    };
    Ok(solve_grating(&spec.config, &opts)?)
}

fn summary(sol: &GratingSolution) -> SolveSummary {
    SolveSummary {
        truncation: sol.coeffs.truncation,
        method: sol.coeffs.method.to_string(),
        residual: sol.coeffs.residual,
        neumann_ratio: sol.coeffs.neumann_ratio,
    }
}

fn complex_cells(v: Complex64) -> [Cell; 2] {
    [v.re.into(), v.im.into()]
}

fn error_kind(e: &FieldError) -> &'static str {
    match e {
        FieldError::Domain { .. } | FieldError::Point => "domain",
        FieldError::Tail { .. } => "tail",
        _ => "error",
    }
}

pub fn run(command: Command, spec: &RunSpec) -> Result<RunOutput, CliError> {
    let wavenumbers = derive_wavenumbers(&spec.config)?;
    let wood_margin = lattice::wood_margin(&spec.config)?;
    let (solve_summary, payload, failed) = match command {
        Command::Coeffs => {
            let sol = solve(spec)?;
            let payload = coefficient_rows(&sol.coeffs.coefficients, &sol.coeffs.dimensional(&spec.config));
            (Some(summary(&sol)), payload, 0)
        }
        Command::Lattice => {
            let table = lattice::lattice_table(spec.truncation, &spec.config, &lattice_options(spec))?;
            let rows = table
                .orders()
                .map(|n| {
                    let i = table.index(n);
                    let [re, im] = complex_cells(table.values[i]);
                    vec![
                        Cell::Int(n),
                        re,
                        im,
                        table.est_error[i].into(),
                        Cell::Int(table.terms_used[i] as i64),
                    ]
                })
                .collect();
            let payload = Payload {
                columns: vec!["n", "re", "im", "est_error", "terms"],
                rows,
            };
            (None, payload, 0)
        }
        Command::Fields => {
            let sol = solve(spec)?;
            let scan = fields::grid_scan(&sol, &spec.grid, spec.polarization, spec.field_tol, None)?;
            let rows = scan
                .into_iter()
                .map(|(p, sample)| {
                    let mut row = vec![
                        Cell::Int(p.s),
                        p.r.into(),
                        p.phi.into(),
                        p.z.into(),
                        Cell::from(spec.polarization.to_string()),
                    ];
                    match sample {
                        Ok(s) => {
                            row.extend(complex_cells(s.ez));
                            row.extend(complex_cells(s.hz));
                            row.push(s.meta.tail_estimate.into());
                            row.push(Cell::Int(s.meta.regular_orders as i64));
                            row.push("ok".into());
                        }
                        Err(e) => {
                            row.extend([f64::NAN; 5].map(Cell::from));
                            row.push(Cell::Int(0));
                            row.push(error_kind(&e).into());
                        }
                    }
                    row
                })
                .collect();
            let payload = Payload {
                columns: vec![
                    "s", "r", "phi", "z", "pol", "ez_re", "ez_im", "hz_re", "hz_im", "tail",
                    "orders", "status",
                ],
                rows,
            };
            (Some(summary(&sol)), payload, 0)
        }
        Command::Amplitude => {
            let sol = solve(spec)?;
            let table = fields::single_amplitude_table(&spec.config)?;
            let psi = spec.config.psi_i();
            let count = spec.amplitude_samples;
            let mut rows = Vec::with_capacity(4 * count);
            for k in 0..count {
                let phi = TAU * k as f64 / count as f64;
                let big: Mat2 = fields::grating_amplitude(phi, &sol.coeffs, psi).matrix;
                let small: Mat2 = fields::single_amplitude_from(phi, psi, &table).matrix;
                for (name, r, c) in crate::output::ENTRIES {
                    let mut row = vec![phi.into(), Cell::from(name)];
                    row.extend(complex_cells(big[(r, c)]));
                    row.extend(complex_cells(small[(r, c)]));
                    rows.push(row);
                }
            }
            let payload = Payload {
                columns: vec!["phi", "entry", "grating_re", "grating_im", "single_re", "single_im"],
                rows,
            };
            (Some(summary(&sol)), payload, 0)
        }
        Command::Validate => {
            let sol = solve(spec)?;
            let checks = validate::run_checks(spec, &sol);
            let failed = checks.iter().filter(|c| c.status == validate::Status::Fail).count();
            let rows = checks
                .into_iter()
                .map(|c| {
                    vec![
                        Cell::from(c.name),
                        Cell::from(c.status.as_str()),
                        c.value.into(),
                        c.threshold.into(),
                        Cell::from(c.note),
                    ]
                })
                .collect();
            let payload = Payload {
                columns: vec!["check", "status", "value", "threshold", "note"],
                rows,
            };
            (Some(summary(&sol)), payload, failed)
        }
    };
    let envelope = ResultEnvelope {
        command: command.name().to_string(),
        spec: spec.clone(),
        wavenumbers,
        wood_margin,
        implied_e0h: implied_e0h(&spec.config),
        solve: solve_summary,
        columns: payload.columns.clone(),
        rows: payload.rows.len(),
    };
    Ok(RunOutput { envelope, payload, failed })
}
