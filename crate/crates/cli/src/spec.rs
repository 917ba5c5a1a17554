//! Run settings: a flat TOML document merged with command-line
//! overrides, validated into a `RunSpec`.

use crate::error::CliError;
use oblique_grating::cylinder::GratingConfig;
use oblique_grating::fields::{Axis, GridSpec, Polarization};
use oblique_grating::lattice::MIN_TOL;
use oblique_grating::solver::{MAX_TRUNCATION, Method, default_truncation};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::PathBuf;

pub const MAX_NEUMANN_ORDER: usize = 16;
pub const DEFAULT_FIELD_TOL: f64 = 1e-8;
pub const DEFAULT_AMPLITUDE_SAMPLES: usize = 72;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Direct,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationName {
    Tm,
    Te,
}

impl From<PolarizationName> for Polarization {
    fn from(p: PolarizationName) -> Self {
        match p {
            PolarizationName::Tm => Polarization::TM,
            PolarizationName::Te => Polarization::TE,
        }
    }
}

/// Every key a config document or flag set may carry. Angles in degrees.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub radius: Option<f64>,
    pub spacing: Option<f64>,
    pub eps_r: Option<f64>,
    pub mu_r: Option<f64>,
    pub k0: Option<f64>,
    pub wavelength: Option<f64>,
    pub theta_deg: Option<f64>,
    pub phi_deg: Option<f64>,
    pub e0v: Option<f64>,
    pub h0v: Option<f64>,
    pub truncation: Option<usize>,
    pub method: Option<MethodName>,
    pub order: Option<usize>,
    pub tol: Option<f64>,
    pub field_tol: Option<f64>,
    pub polarization: Option<PolarizationName>,
    pub cylinder: Option<i64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_count: Option<usize>,
    pub phi_min_deg: Option<f64>,
    pub phi_max_deg: Option<f64>,
    pub phi_count: Option<usize>,
    pub z: Option<f64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl ConfigDocument {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse {
            source_name: source.to_string(),
            message: e.to_string(),
        })
    }

    /// Field-by-field override; a wavenumber given on top replaces either
    /// wavenumber form below.
    pub fn merged(mut self, top: &ConfigDocument) -> Self {
        if top.k0.is_some() || top.wavelength.is_some() {
            self.k0 = None;
            self.wavelength = None;
        }
        overlay!(self, top; radius, spacing, eps_r, mu_r, k0, wavelength, theta_deg, phi_deg,
            e0v, h0v, truncation, method, order, tol, field_tol, polarization, cylinder,
            r_min, r_max, r_count, phi_min_deg, phi_max_deg, phi_count, z, samples, out, format);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub config: GratingConfig,
    pub truncation: usize,
    pub truncation_override: bool,
    pub method: Method,
    pub lattice_tol: f64,
    pub field_tol: f64,
    pub polarization: Polarization,
    pub grid: GridSpec,
    pub amplitude_samples: usize,
    pub output: OutputSpec,
}

fn required(v: Option<f64>, key: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Spec(format!("missing required field `{key}`")))
}

impl RunSpec {
    pub fn from_document(doc: &ConfigDocument) -> Result<Self, CliError> {
        let k0 = match (doc.k0, doc.wavelength) {
            (Some(_), Some(_)) => {
                return Err(CliError::Spec("give either `k0` or `wavelength`, not both".into()));
            }
            (Some(k), None) => k,
            (None, Some(l)) => {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(CliError::Spec(format!("`wavelength` must be positive, got {l}")));
                }
                TAU / l
            }
            (None, None) => {
                return Err(CliError::Spec("missing required field `k0` (or `wavelength`)".into()));
            }
        };
        let config = GratingConfig {
            radius_a: required(doc.radius, "radius")?,
            spacing_d: required(doc.spacing, "spacing")?,
            eps_r: required(doc.eps_r, "eps_r")?,
            mu_r: required(doc.mu_r, "mu_r")?,
            k0,
            theta_i: required(doc.theta_deg, "theta_deg")?.to_radians(),
            phi_i: required(doc.phi_deg, "phi_deg")?.to_radians(),
            e0v: doc.e0v.unwrap_or(1.0),
            h0v: doc.h0v.unwrap_or(1.0),
        };
        config.validate()?;

        let truncation = match doc.truncation {
            Some(0) => return Err(CliError::Spec("`truncation` must be at least 1".into())),
            Some(n) if n > MAX_TRUNCATION => {
                return Err(CliError::Spec(format!(
                    "`truncation` {n} exceeds the supported maximum {MAX_TRUNCATION}"
                )));
            }
            Some(n) => n,
            None => default_truncation(&config)?,
        };
        let method = match (doc.method.unwrap_or(MethodName::Direct), doc.order) {
            (MethodName::Direct, None) => Method::Direct,
            (MethodName::Direct, Some(_)) => {
                return Err(CliError::Spec("`order` applies only to method `neumann`".into()));
            }
            (MethodName::Neumann, order) => {
                let k = order.unwrap_or(4);
                if !(1..=MAX_NEUMANN_ORDER).contains(&k) {
                    return Err(CliError::Spec(format!(
                        "Neumann `order` must be in [1, {MAX_NEUMANN_ORDER}], got {k}"
                    )));
                }
                Method::Neumann { order: k }
            }
        };
        let lattice_tol = doc.tol.unwrap_or(MIN_TOL);
        let field_tol = doc.field_tol.unwrap_or(DEFAULT_FIELD_TOL);
        for (key, v) in [("tol", lattice_tol), ("field_tol", field_tol)] {
            if !(v >= MIN_TOL && v.is_finite()) {
                return Err(CliError::Spec(format!("`{key}` must be at least {MIN_TOL:e}, got {v}")));
            }
        }

        let (a, d) = (config.radius_a, config.spacing_d);
        let r_min = doc.r_min.unwrap_or((1.25 * a).min(0.5 * (a + d)));
        let r_max = doc.r_max.unwrap_or(0.5 * (a + d));
        let grid = GridSpec {
            s: doc.cylinder.unwrap_or(0),
            r: Axis {
                start: r_min,
                stop: r_max,
                count: doc.r_count.unwrap_or(5),
            },
            phi: Axis {
                start: doc.phi_min_deg.unwrap_or(0.0).to_radians(),
                stop: doc.phi_max_deg.unwrap_or(330.0).to_radians(),
                count: doc.phi_count.unwrap_or(12),
            },
            z: doc.z.unwrap_or(0.0),
        };
        let finite = [grid.r.start, grid.r.stop, grid.phi.start, grid.phi.stop, grid.z];
        if finite.iter().any(|v| !v.is_finite()) || grid.r.count == 0 || grid.phi.count == 0 {
            return Err(CliError::Spec("field grid needs finite bounds and counts >= 1".into()));
        }
        let amplitude_samples = doc.samples.unwrap_or(DEFAULT_AMPLITUDE_SAMPLES);
        if amplitude_samples == 0 {
            return Err(CliError::Spec("`samples` must be at least 1".into()));
        }

        Ok(Self {
            config,
            truncation,
            truncation_override: doc.truncation.is_some(),
            method,
            lattice_tol,
            field_tol,
            polarization: doc.polarization.unwrap_or(PolarizationName::Tm).into(),
            grid,
            amplitude_samples,
            output: OutputSpec {
                path: doc.out.clone(),
                format: doc.format.unwrap_or(Format::Csv),
            },
        })
    }
}

/// Reads the optional config file and applies the overrides on top.
pub fn parse_run_spec(
    file: Option<(&str, &str)>,
    overrides: &ConfigDocument,
) -> Result<RunSpec, CliError> {
    let base = match file {
        Some((source, text)) => ConfigDocument::parse(text, source)?,
        None => ConfigDocument::default(),
    };
    RunSpec::from_document(&base.merged(overrides))
}
