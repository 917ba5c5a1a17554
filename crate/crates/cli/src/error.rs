use oblique_grating::cylinder::{ConfigError, CylinderError};
use oblique_grating::fields::FieldError;
use oblique_grating::lattice::LatticeError;
use oblique_grating::solver::SolverError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_WOOD: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_CONVERGENCE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}: {message}")]
    Parse { source_name: String, message: String },
    #[error("invalid run settings: {0}")]
    Spec(String),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cylinder(#[from] CylinderError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed coefficient file: {0}")]
    Coefficients(String),
    #[error("{failed} validation check(s) failed")]
    Validation { failed: usize },
}

fn cylinder_code(e: &CylinderError) -> i32 {
    match e {
        CylinderError::Config(_) => EXIT_CONFIG,
        CylinderError::SpecFun(_) => EXIT_CONVERGENCE,
        CylinderError::Singular { .. } => EXIT_SOLVER,
    }
}

fn lattice_code(e: &LatticeError) -> i32 {
    match e {
        LatticeError::WoodAnomaly { .. } => EXIT_WOOD,
        LatticeError::Config(_) | LatticeError::Tolerance(_) | LatticeError::Argument(_) => EXIT_CONFIG,
        LatticeError::SpecFun(_) | LatticeError::NonConvergence { .. } | LatticeError::Table(_) => {
            EXIT_CONVERGENCE
        }
    }
}

fn solver_code(e: &SolverError) -> i32 {
    match e {
        SolverError::Cylinder(c) => cylinder_code(c),
        SolverError::Lattice(l) => lattice_code(l),
        SolverError::Singular { .. } | SolverError::Inaccurate { .. } | SolverError::Divergence { .. } => {
            EXIT_SOLVER
        }
        SolverError::Order | SolverError::Truncation(_) => EXIT_CONFIG,
        SolverError::Dimension { .. } => EXIT_FAILURE,
    }
}

fn field_code(e: &FieldError) -> i32 {
    match e {
        FieldError::Cylinder(c) => cylinder_code(c),
        FieldError::Lattice(l) => lattice_code(l),
        FieldError::SpecFun(_) | FieldError::Tail { .. } => EXIT_CONVERGENCE,
        FieldError::Point | FieldError::Domain { .. } | FieldError::Tolerance => EXIT_CONFIG,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Spec(_) | Self::Config(_) => EXIT_CONFIG,
            Self::Cylinder(e) => cylinder_code(e),
            Self::Lattice(e) => lattice_code(e),
            Self::Solver(e) => solver_code(e),
            Self::Field(e) => field_code(e),
            Self::Io { .. } | Self::Coefficients(_) | Self::Validation { .. } => EXIT_FAILURE,
        }
    }
}
