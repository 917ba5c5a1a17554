//! Truncated grating equation for the normalized multiple-scattering
//! coefficients:
//!
//! `X_n = a_n [e^{-i n psi} + sum_m X_m I_{n-m}]`, `|n|, |m| <= N`,
//!
//! where each `X_n` is 2x2 with columns (TM, TE). Both polarizations share
//! one operator and are solved as two right-hand-side columns.

use crate::cylinder::{
    self, CylinderError, GratingConfig, Mat2, Wavenumbers, derive_wavenumbers, polarization_scale,
};
use crate::lattice::{self, LatticeError, LatticeOptions, LatticeTable};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reciprocal condition estimate below which the direct solve is refused.
pub const RCOND_MIN: f64 = 1e-14;
/// Largest residual accepted from a direct solve.
pub const DIRECT_RESIDUAL_TOL: f64 = 1e-9;
/// Harmonics this close to the truncation edge (beyond `k_r a`) are left
/// out of the residual.
pub const EDGE_BUFFER: usize = 2;
/// Largest supported truncation.
pub const MAX_TRUNCATION: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Cylinder(#[from] CylinderError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("single-scatter table covers |n| <= {single}, lattice covers |n| <= {lattice}; need {needed} and {}", 2 * .needed)]
    Dimension {
        single: usize,
        lattice: usize,
        needed: usize,
    },
    #[error("grating operator is singular (reciprocal condition estimate {rcond:e})")]
    Singular { rcond: f64 },
    #[error("direct solution residual {residual:e} exceeds {tol:e}")]
    Inaccurate { residual: f64, tol: f64 },
    #[error("Neumann iteration diverges: contraction ratio {ratio} at order {order}")]
    Divergence { ratio: f64, order: usize },
    #[error("Neumann order must be at least 1")]
    Order,
    #[error("truncation {0} exceeds the supported maximum {MAX_TRUNCATION}")]
    Truncation(usize),
}

/// `a_n` for `n = -n_max ..= n_max` with the incidence direction it is used
/// with.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleScatterTable {
    pub n_max: usize,
    pub psi_i: f64,
    pub kr_a: f64,
    pub matrices: Vec<Mat2>,
}

impl SingleScatterTable {
    pub fn new(n_max: usize, config: &GratingConfig) -> Result<Self, CylinderError> {
        let w = derive_wavenumbers(config)?;
        Ok(Self {
            n_max,
            psi_i: config.psi_i(),
            kr_a: w.kr * config.radius_a,
            matrices: cylinder::scatter_table(n_max, config)?,
        })
    }

    pub fn get(&self, n: i64) -> Mat2 {
        self.matrices[(n + self.n_max as i64) as usize]
    }

    /// `e^{-i n psi_i}`.
    pub fn incident_phase(&self, n: i64) -> Complex64 {
        Complex64::from_polar(1.0, -(n as f64) * self.psi_i)
    }
}

/// `(I - C) X = B` over the unknowns `X_n`, `|n| <= N`, stacked as
/// `[E_{-N}, H_{-N}, E_{-N+1}, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemAssembly {
    pub truncation: usize,
    pub matrix: DMatrix<Complex64>,
    /// Two columns: TM and TE right-hand sides.
    pub rhs: DMatrix<Complex64>,
    single: Vec<Mat2>,
    coupling: Vec<Complex64>,
    psi_i: f64,
    kr_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Direct,
    Neumann { order: usize },
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Direct => f.write_str("direct"),
            Method::Neumann { order } => write!(f, "neumann({order})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub truncation: usize,
    /// `X_n` for `n = -N ..= N`.
    pub coefficients: Vec<Mat2>,
    pub method: Method,
    pub residual: f64,
    pub neumann_ratio: Option<f64>,
}

impl CoefficientSet {
    pub fn get(&self, n: i64) -> Mat2 {
        self.coefficients[(n + self.truncation as i64) as usize]
    }

    pub fn orders(&self) -> std::ops::RangeInclusive<i64> {
        -(self.truncation as i64)..=self.truncation as i64
    }

    /// Dimensional coefficients: columns scaled by `E0v sin(theta)` and
    /// `H0v sin(theta)`.
    pub fn dimensional(&self, config: &GratingConfig) -> Vec<Mat2> {
        self.coefficients
            .iter()
            .map(|m| polarization_scale(m, config))
            .collect()
    }

    /// Frobenius norm over all harmonics.
    pub fn norm(&self) -> f64 {
        frobenius(&self.coefficients)
    }
}

fn frobenius(ms: &[Mat2]) -> f64 {
    ms.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// `N = ceil(k_r a) + 8`, clamped to `[4, 64]`.
pub fn default_truncation(config: &GratingConfig) -> Result<usize, CylinderError> {
    let w = derive_wavenumbers(config)?;
    Ok(((w.kr * config.radius_a).ceil() as usize + 8).clamp(4, MAX_TRUNCATION))
}

fn check_tables(
    n: usize,
    single: &SingleScatterTable,
    lattice: &LatticeTable,
) -> Result<(), SolverError> {
    if single.n_max < n || lattice.order_max < 2 * n {
        return Err(SolverError::Dimension {
            single: single.n_max,
            lattice: lattice.order_max,
            needed: n,
        });
    }
    Ok(())
}

fn slice_tables(
    n: usize,
    single: &SingleScatterTable,
    lattice: &LatticeTable,
) -> (Vec<Mat2>, Vec<Complex64>) {
    let top = n as i64;
    let a = (-top..=top).map(|k| single.get(k)).collect();
    let c = (-2 * top..=2 * top).map(|k| lattice.get(k)).collect();
    (a, c)
}

pub fn assemble(
    n: usize,
    single: &SingleScatterTable,
    lattice: &LatticeTable,
) -> Result<SystemAssembly, SolverError> {
    check_tables(n, single, lattice)?;
    let (a, coupling) = slice_tables(n, single, lattice);
    let size = 2 * (2 * n + 1);
    let top = n as i64;
    let mut matrix = DMatrix::<Complex64>::identity(size, size);
    let mut rhs = DMatrix::<Complex64>::zeros(size, 2);
    for (i, &an) in a.iter().enumerate() {
        let nn = i as i64 - top;
        for j in 0..a.len() {
            let mm = j as i64 - top;
            let block = an * coupling[(nn - mm + 2 * top) as usize];
            for r in 0..2 {
                for c in 0..2 {
                    matrix[(2 * i + r, 2 * j + c)] -= block[(r, c)];
                }
            }
        }
        let b = an * single.incident_phase(nn);
        for r in 0..2 {
            for c in 0..2 {
                rhs[(2 * i + r, c)] = b[(r, c)];
            }
        }
    }
    Ok(SystemAssembly {
        truncation: n,
        matrix,
        rhs,
        single: a,
        coupling,
        psi_i: single.psi_i,
        kr_a: single.kr_a,
    })
}

/// Dense LU solve of the assembled system.
///
/// The operator is rescaled as `T^{-1} (I - C) T` with `T = diag(sqrt|a_n|)`,
/// which keeps entries bounded even though `a_n` decays and `I_{n-m}` grows
/// factorially with order.
pub fn solve_direct(assembly: &SystemAssembly) -> Result<CoefficientSet, SolverError> {
    let n = assembly.truncation;
    let size = assembly.matrix.nrows();
    let t: Vec<f64> = assembly
        .single
        .iter()
        .map(|a| {
            let s = a.norm().sqrt();
            if s > 0.0 && s.is_finite() { s } else { 1.0 }
        })
        .collect();
    let mut scaled = assembly.matrix.clone();
    for i in 0..size {
        for j in 0..size {
            scaled[(i, j)] *= t[j / 2] / t[i / 2];
        }
    }
    let mut rhs = assembly.rhs.clone();
    for i in 0..size {
        for c in 0..2 {
            rhs[(i, c)] /= t[i / 2];
        }
    }
    let norm1 = one_norm(&scaled);
    let lu = scaled.lu();
    let inverse = lu.try_inverse().ok_or(SolverError::Singular { rcond: 0.0 })?;
    let rcond = 1.0 / (norm1 * one_norm(&inverse));
    if !(rcond >= RCOND_MIN) {
        return Err(SolverError::Singular { rcond });
    }
    let y = &inverse * rhs;
    let coefficients: Vec<Mat2> = (0..2 * n + 1)
        .map(|k| {
            Mat2::new(y[(2 * k, 0)], y[(2 * k, 1)], y[(2 * k + 1, 0)], y[(2 * k + 1, 1)])
                * Complex64::new(t[k], 0.0)
        })
        .collect();
    let residual = residual_of(&coefficients, &assembly.single, &assembly.coupling, assembly.psi_i, assembly.kr_a);
    if !(residual <= DIRECT_RESIDUAL_TOL) {
        return Err(SolverError::Inaccurate {
            residual,
            tol: DIRECT_RESIDUAL_TOL,
        });
    }
    Ok(CoefficientSet {
        truncation: n,
        coefficients,
        method: Method::Direct,
        residual,
        neumann_ratio: None,
    })
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `a_n [e^{-i n psi} + sum_m X_m I_{n-m}]` for every `n`.
fn apply(x: &[Mat2], a: &[Mat2], coupling: &[Complex64], psi_i: f64) -> Vec<Mat2> {
    let top = (a.len() / 2) as i64;
    (0..a.len())
        .into_par_iter()
        .map(|i| {
            let nn = i as i64 - top;
            let mut acc = Mat2::identity() * Complex64::from_polar(1.0, -(nn as f64) * psi_i);
            for (j, xm) in x.iter().enumerate() {
                acc += xm * coupling[(i as i64 - j as i64 + 2 * top) as usize];
            }
            a[i] * acc
        })
        .collect()
}

/// Neumann (orders-of-scattering) iteration truncated after `order` terms.
pub fn solve_neumann(
    order: usize,
    n: usize,
    single: &SingleScatterTable,
    lattice: &LatticeTable,
) -> Result<CoefficientSet, SolverError> {
    if order == 0 {
        return Err(SolverError::Order);
    }
    check_tables(n, single, lattice)?;
    let (a, coupling) = slice_tables(n, single, lattice);
    let top = n as i64;
    let mut current: Vec<Mat2> = a
        .iter()
        .enumerate()
        .map(|(i, an)| an * single.incident_phase(i as i64 - top))
        .collect();
    let mut steps = Vec::new();
    for _ in 1..order {
        let next = apply(&current, &a, &coupling, single.psi_i);
        let diff: Vec<Mat2> = next.iter().zip(&current).map(|(x, y)| x - y).collect();
        steps.push(frobenius(&diff));
        current = next;
    }
    let neumann_ratio = match steps.as_slice() {
        [.., prev, last] => Some(if *prev == 0.0 { 0.0 } else { last / prev }),
        _ => None,
    };
    if let Some(ratio) = neumann_ratio {
        if !(ratio < 1.0) {
            return Err(SolverError::Divergence { ratio, order });
        }
    }
    let residual = residual_of(&current, &a, &coupling, single.psi_i, single.kr_a);
    Ok(CoefficientSet {
        truncation: n,
        coefficients: current,
        method: Method::Neumann { order },
        residual,
        neumann_ratio,
    })
}

/// Relative defect of the grating equation over interior harmonics.
pub fn residual(coeffs: &CoefficientSet, single: &SingleScatterTable, lattice: &LatticeTable) -> f64 {
    let n = coeffs.truncation;
    if check_tables(n, single, lattice).is_err() {
        return f64::INFINITY;
    }
    let (a, coupling) = slice_tables(n, single, lattice);
    residual_of(&coeffs.coefficients, &a, &coupling, single.psi_i, single.kr_a)
}

fn residual_of(x: &[Mat2], a: &[Mat2], coupling: &[Complex64], psi_i: f64, kr_a: f64) -> f64 {
    let top = (a.len() / 2) as i64;
    let edge = kr_a.ceil() as i64 + EDGE_BUFFER as i64;
    let interior = (top - edge).max(0);
    let image = apply(x, a, coupling, psi_i);
    let scale = x.iter().map(|m| m.norm()).fold(1.0, f64::max);
    x.iter()
        .zip(&image)
        .enumerate()
        .filter(|(i, _)| (*i as i64 - top).abs() <= interior)
        .map(|(_, (xn, yn))| (xn - yn).norm())
        .fold(0.0, f64::max)
        / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub truncation: Option<usize>,
    pub method: Method,
    pub lattice: LatticeOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            truncation: None,
            method: Method::Direct,
            lattice: LatticeOptions::default(),
        }
    }
}

/// Everything computed for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GratingSolution {
    pub config: GratingConfig,
    pub wavenumbers: Wavenumbers,
    pub single: SingleScatterTable,
    pub lattice: LatticeTable,
    pub coeffs: CoefficientSet,
}

pub fn solve_grating(
    config: &GratingConfig,
    opts: &SolveOptions,
) -> Result<GratingSolution, SolverError> {
    let wavenumbers = derive_wavenumbers(config).map_err(CylinderError::from)?;
    let n = match opts.truncation {
        Some(n) => n,
        None => default_truncation(config)?,
    };
    if n > MAX_TRUNCATION {
        return Err(SolverError::Truncation(n));
    }
    let single = SingleScatterTable::new(n, config)?;
    let lattice = lattice::lattice_table(n, config, &opts.lattice)?;
    let coeffs = match opts.method {
        Method::Direct => solve_direct(&assemble(n, &single, &lattice)?)?,
        Method::Neumann { order } => solve_neumann(order, n, &single, &lattice)?,
    };
    Ok(GratingSolution {
        config: *config,
        wavenumbers,
        single,
        lattice,
        coeffs,
    })
}
