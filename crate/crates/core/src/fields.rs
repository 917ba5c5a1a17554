//! Incident and exterior `z`-fields in a cylinder's local frame, and the
//! single-cylinder and grating scattering-amplitude matrices.
//!
//! In the frame of cylinder `s` (axis at `y = s d`), every field is a sum
//! `sum_n c_n Z_n(k_r R) e^{i n (phi + pi/2)}` times the Floquet factor
//! `e^{i k_r s d sin psi}` and the axial factor `e^{-i k_z z}`.

use crate::cylinder::{
    CylinderError, GratingConfig, Mat2, Wavenumbers, XI0, derive_wavenumbers, scatter_matrix,
};
use crate::lattice::{self, LatticeError, LatticeOptions, LatticeTable};
use crate::solver::{CoefficientSet, GratingSolution};
use crate::specfun::{self, MAX_ORDER, SpecFunError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Relative floor below which `||a_n||` terms are dropped from the
/// single-cylinder amplitude.
pub const AMPLITUDE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    TM,
    TE,
}

impl Polarization {
    /// Column of the coefficient matrices driven by this polarization.
    pub fn column(self) -> usize {
        match self {
            Self::TM => 0,
            Self::TE => 1,
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::TM => "TM",
            Self::TE => "TE",
        })
    }
}

/// Point in the frame of cylinder `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPoint {
    pub s: i64,
    pub r: f64,
    pub phi: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    /// Solver truncation of the scattered (Hankel) part.
    pub truncation: usize,
    /// Orders kept in the regular (Bessel) part.
    pub regular_orders: usize,
    /// Estimated relative size of the neglected terms.
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub ez: Complex64,
    pub hz: Complex64,
    pub polarization: Polarization,
    pub meta: FieldMeta,
}

/// 2x2 amplitude matrix, rows (E, H), columns (TM, TE).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeMatrix {
    pub matrix: Mat2,
    pub phi: f64,
    pub psi_i: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Cylinder(#[from] CylinderError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("point coordinates must be finite with R >= 0")]
    Point,
    #[error("R = {r} outside the exterior expansion annulus ({lower}, {upper})")]
    Domain { r: f64, lower: f64, upper: f64 },
    #[error("field tolerance must be positive and finite")]
    Tolerance,
    #[error("series tail {estimate:e} exceeds tolerance {tol:e} within {orders} orders")]
    Tail { estimate: f64, tol: f64, orders: usize },
}

/// `e^{i k_r s d sin psi}`.
pub fn floquet_phase(config: &GratingConfig, s: i64) -> Result<Complex64, FieldError> {
    let w = derive_wavenumbers(config).map_err(CylinderError::from)?;
    Ok(floquet(&w, config, s))
}

fn floquet(w: &Wavenumbers, config: &GratingConfig, s: i64) -> Complex64 {
    Complex64::from_polar(1.0, s as f64 * w.kr * config.spacing_d * config.sin_psi())
}

fn axial(w: &Wavenumbers, z: f64) -> Complex64 {
    Complex64::from_polar(1.0, -w.kz * z)
}

/// `sum_n c_n e^{i n (phi + pi/2)}` for `n = -top ..= top`, with
/// `c(n)` supplied by the caller.
fn angular_sum(top: usize, phi: f64, c: impl Fn(i64) -> Complex64) -> Complex64 {
    let top = top as i64;
    (-top..=top)
        .map(|n| c(n) * Complex64::from_polar(1.0, n as f64 * (phi + FRAC_PI_2)))
        .sum()
}

fn check_point(p: &LocalPoint) -> Result<(), FieldError> {
    if !(p.r.is_finite() && p.phi.is_finite() && p.z.is_finite()) || p.r < 0.0 {
        return Err(FieldError::Point);
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<(), FieldError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(FieldError::Tolerance);
    }
    Ok(())
}

/// Smallest `M` with `2 sum_{n > M} (x/2)^n / n! <= tol`, a bound on the
/// two-sided tail of `sum_n |J_n(x)|`.
fn bessel_tail_orders(x: f64, tol: f64) -> Option<(usize, f64)> {
    let ln_half = (0.5 * x).ln();
    let mut ln_term = 0.0;
    for m in 0..MAX_ORDER as usize {
        ln_term += ln_half - ((m + 1) as f64).ln();
        let ratio = 0.5 * x / (m + 2) as f64;
        if ratio < 1.0 {
            let bound = 2.0 * ln_term.exp() / (1.0 - ratio);
            if bound <= tol {
                return Some((m, bound));
            }
        }
    }
    None
}

fn j_signed(j: &[f64], n: i64) -> f64 {
    let v = j[n.unsigned_abs() as usize];
    if n < 0 && n % 2 != 0 { -v } else { v }
}

fn h_signed(h: &[Complex64], n: i64) -> Complex64 {
    let v = h[n.unsigned_abs() as usize];
    if n < 0 && n % 2 != 0 { -v } else { v }
}

fn incident_z(
    config: &GratingConfig,
    p: &LocalPoint,
    amplitude: f64,
    tol: f64,
) -> Result<Complex64, FieldError> {
    check_point(p)?;
    check_tol(tol)?;
    let w = derive_wavenumbers(config).map_err(CylinderError::from)?;
    let x = w.kr * p.r;
    let (top, estimate) = bessel_tail_orders(x, tol).ok_or(FieldError::Tail {
        estimate: f64::INFINITY,
        tol,
        orders: MAX_ORDER as usize,
    })?;
    let j = specfun::bessel_j_orders(top, x)?;
    let psi = config.psi_i();
    let sum = angular_sum(top, p.phi, |n| {
        Complex64::from_polar(j_signed(&j, n), -(n as f64) * psi)
    });
    debug_assert!(estimate <= tol);
    let s = config.obliquity_sin_cos().0;
    Ok(sum * (s * amplitude) * axial(&w, p.z) * floquet(&w, config, p.s))
}

/// Incident `E_z` of the TM (vertically polarized) plane wave.
pub fn incident_ez(config: &GratingConfig, p: &LocalPoint, tol: f64) -> Result<Complex64, FieldError> {
    incident_z(config, p, config.e0v, tol)
}

/// Incident `H_z` of the TE (horizontally polarized) plane wave.
pub fn incident_hz(config: &GratingConfig, p: &LocalPoint, tol: f64) -> Result<Complex64, FieldError> {
    incident_z(config, p, config.h0v, tol)
}

/// `E_0h = H_0v / eta0` implied by the TE amplitude.
pub fn implied_e0h(config: &GratingConfig) -> f64 {
    config.h0v * XI0
}

/// Exterior field synthesis for one solved grating, valid for
/// `a < R <= r_max < d`.
#[derive(Debug, Clone)]
pub struct FieldEvaluator {
    config: GratingConfig,
    wavenumbers: Wavenumbers,
    truncation: usize,
    /// Normalized scattered coefficients `A_n`, `|n| <= N`.
    scattered: Vec<Mat2>,
    /// Normalized regular coefficients `e^{-i n psi} + sum_m A_m I_{n-m}`,
    /// `|n| <= regular_orders`.
    regular: Vec<Mat2>,
    regular_orders: usize,
    r_max: f64,
    tol: f64,
}

impl FieldEvaluator {
    /// Chooses the regular-part order so the estimated tail at `r_max` is
    /// below `tol` relative to the incident amplitude, extending the
    /// lattice table when the solver's orders do not suffice. When the
    /// order budget runs out first, the deepest evaluator is returned and
    /// points it cannot resolve fail individually in `sample`.
    pub fn new(
        solution: &GratingSolution,
        r_max: f64,
        tol: f64,
        lattice_opts: &LatticeOptions,
    ) -> Result<Self, FieldError> {
        check_tol(tol)?;
        let config = solution.config;
        check_annulus(&config, r_max)?;
        let w = solution.wavenumbers;
        let n = solution.coeffs.truncation;
        let kr_d = w.kr * config.spacing_d;
        let mut m = n.max((w.kr * r_max).ceil() as usize + 10);
        let mut previous: Option<Self> = None;
        loop {
            let needed = n + m;
            let extended;
            let table = if needed <= solution.lattice.order_max {
                &solution.lattice
            } else {
                match lattice::lattice_table_at(needed, kr_d, config.sin_psi(), lattice_opts) {
                    Ok(t) => {
                        extended = t;
                        &extended
                    }
                    Err(e) => return previous.ok_or(e.into()),
                }
            };
            let eval = Self {
                config,
                wavenumbers: w,
                truncation: n,
                scattered: solution.coeffs.coefficients.clone(),
                regular: regular_coefficients(&solution.coeffs, table, config.psi_i(), m),
                regular_orders: m,
                r_max,
                tol,
            };
            let finite = eval.regular.iter().all(|b| b.iter().all(|v| v.is_finite()));
            if !finite {
                return previous.ok_or(FieldError::Tail { estimate: f64::INFINITY, tol, orders: m });
            }
            let next = (m * 3).div_ceil(2);
            if eval.tail_estimate(r_max)? <= tol || n + next > MAX_ORDER as usize {
                return Ok(eval);
            }
            previous = Some(eval);
            m = next;
        }
    }

    pub fn regular_orders(&self) -> usize {
        self.regular_orders
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    fn regular(&self, n: i64) -> Mat2 {
        self.regular[(n + self.regular_orders as i64) as usize]
    }

    fn scattered(&self, n: i64) -> Mat2 {
        self.scattered[(n + self.truncation as i64) as usize]
    }

    /// Magnitude of the outermost kept terms relative to the incident
    /// amplitude.
    fn tail_estimate(&self, r: f64) -> Result<f64, FieldError> {
        let x = self.wavenumbers.kr * r;
        let m = self.regular_orders;
        let j = specfun::bessel_j_orders(m, x)?;
        let h = specfun::hankel1_orders(self.truncation, x)?;
        let edge = |k: usize| -> f64 {
            let k = k as i64;
            [k, -k]
                .iter()
                .map(|&n| max_entry(&self.regular(n)) * j_signed(&j, n).abs())
                .sum()
        };
        let top = self.truncation as i64;
        let scattered_edge: f64 = [top, -top]
            .iter()
            .map(|&n| max_entry(&self.scattered(n)) * h_signed(&h, n).norm())
            .sum();
        Ok(2.0 * edge(m).max(edge(m - 1)) + scattered_edge)
    }

    /// `E_z` and `H_z` at `p` for the given incident polarization.
    pub fn sample(&self, p: &LocalPoint, pol: Polarization) -> Result<FieldSample, FieldError> {
        check_point(p)?;
        check_annulus(&self.config, p.r)?;
        if p.r > self.r_max {
            return Err(FieldError::Domain {
                r: p.r,
                lower: self.config.radius_a,
                upper: self.r_max,
            });
        }
        let x = self.wavenumbers.kr * p.r;
        let j = specfun::bessel_j_orders(self.regular_orders, x)?;
        let h = specfun::hankel1_orders(self.truncation, x)?;
        let col = pol.column();
        let top = self.truncation as i64;
        let row = |r: usize| {
            angular_sum(self.regular_orders, p.phi, |n| {
                let reg = self.regular(n)[(r, col)] * j_signed(&j, n);
                if n.abs() <= top {
                    reg + self.scattered(n)[(r, col)] * h_signed(&h, n)
                } else {
                    reg
                }
            })
        };
        let (e_norm, h_norm) = (row(0), row(1));
        let tail = self.tail_estimate(p.r)?;
        let scale = 1.0f64.max(e_norm.norm()).max(h_norm.norm());
        let estimate = tail / scale;
        if !(estimate <= self.tol) {
            return Err(FieldError::Tail {
                estimate,
                tol: self.tol,
                orders: self.regular_orders,
            });
        }
        let amplitude = match pol {
            Polarization::TM => self.config.e0v,
            Polarization::TE => self.config.h0v,
        } * self.config.obliquity_sin_cos().0;
        let factor = axial(&self.wavenumbers, p.z) * amplitude;
        let phase = floquet(&self.wavenumbers, &self.config, p.s);
        Ok(FieldSample {
            ez: e_norm * factor * phase,
            hz: h_norm * factor * phase,
            polarization: pol,
            meta: FieldMeta {
                truncation: self.truncation,
                regular_orders: self.regular_orders,
                tail_estimate: estimate,
            },
        })
    }
}

/// Largest entry modulus; unlike the Frobenius norm it cannot overflow
/// for finite entries.
fn max_entry(m: &Mat2) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn check_annulus(config: &GratingConfig, r: f64) -> Result<(), FieldError> {
    if !(r > config.radius_a && r < config.spacing_d) {
        return Err(FieldError::Domain {
            r,
            lower: config.radius_a,
            upper: config.spacing_d,
        });
    }
    Ok(())
}

fn regular_coefficients(
    coeffs: &CoefficientSet,
    lattice: &LatticeTable,
    psi_i: f64,
    orders: usize,
) -> Vec<Mat2> {
    let top = orders as i64;
    (-top..=top)
        .into_par_iter()
        .map(|n| {
            let mut acc = Mat2::identity() * Complex64::from_polar(1.0, -(n as f64) * psi_i);
            for m in coeffs.orders() {
                acc += coeffs.get(m) * lattice.get(n - m);
            }
            acc
        })
        .collect()
}

/// Exterior `E_z`, `H_z` at one point, using the solver's coefficients.
pub fn exterior_fields(
    solution: &GratingSolution,
    p: &LocalPoint,
    pol: Polarization,
    tol: f64,
) -> Result<FieldSample, FieldError> {
    check_point(p)?;
    let eval = FieldEvaluator::new(solution, p.r, tol, &LatticeOptions::default())?;
    eval.sample(p, pol)
}

/// `a_n` for `|n| <= n_max`, `n_max` the first order beyond `k_r a` where
/// `||a_n|| < AMPLITUDE_FLOOR max ||a||` on both signs.
pub fn single_amplitude_table(config: &GratingConfig) -> Result<Vec<Mat2>, CylinderError> {
    let w = derive_wavenumbers(config)?;
    let kr_a = w.kr * config.radius_a;
    let mut pos = vec![scatter_matrix(0, config)?];
    let mut neg = Vec::new();
    let mut peak = pos[0].norm();
    for n in 1..=MAX_ORDER as i32 {
        let p = scatter_matrix(n, config)?;
        let q = scatter_matrix(-n, config)?;
        peak = peak.max(p.norm()).max(q.norm());
        pos.push(p);
        neg.push(q);
        let below = p.norm().max(q.norm()) < AMPLITUDE_FLOOR * peak;
        if (below && n as f64 > kr_a) || peak == 0.0 {
            break;
        }
    }
    neg.reverse();
    neg.extend(pos);
    Ok(neg)
}

/// `g(phi, psi) = sum_n a_n e^{i n (phi - psi)}` over a table centred on
/// `n = 0`.
pub fn single_amplitude_from(phi: f64, psi_i: f64, table: &[Mat2]) -> AmplitudeMatrix {
    let top = (table.len() / 2) as i64;
    let matrix = table
        .iter()
        .zip(-top..=top)
        .map(|(a, n)| a * Complex64::from_polar(1.0, n as f64 * (phi - psi_i)))
        .sum();
    AmplitudeMatrix { matrix, phi, psi_i }
}

pub fn single_amplitude(phi: f64, config: &GratingConfig) -> Result<AmplitudeMatrix, CylinderError> {
    let table = single_amplitude_table(config)?;
    Ok(single_amplitude_from(phi, config.psi_i(), &table))
}

/// `G(phi, psi) = sum_n A_n e^{i n phi}` over `|n| <= N`.
pub fn grating_amplitude(phi: f64, coeffs: &CoefficientSet, psi_i: f64) -> AmplitudeMatrix {
    let matrix = coeffs
        .orders()
        .map(|n| coeffs.get(n) * Complex64::from_polar(1.0, n as f64 * phi))
        .sum();
    AmplitudeMatrix { matrix, phi, psi_i }
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            c => (0..c)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (c - 1) as f64)
                .collect(),
        }
    }
}

/// Polar grid in the frame of cylinder `s`, radius-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub s: i64,
    pub r: Axis,
    pub phi: Axis,
    pub z: f64,
}

impl GridSpec {
    pub fn points(&self) -> Vec<LocalPoint> {
        let phis = self.phi.values();
        self.r
            .values()
            .into_iter()
            .flat_map(|r| {
                phis.iter().map(move |&phi| LocalPoint {
                    s: self.s,
                    r,
                    phi,
                    z: self.z,
                })
            })
            .collect()
    }
}

pub type GridRow = (LocalPoint, Result<FieldSample, FieldError>);

/// Samples every grid point, in order. Out-of-annulus or tail failures are
/// reported per point. `workers = None` uses the global thread pool.
pub fn grid_scan(
    solution: &GratingSolution,
    grid: &GridSpec,
    pol: Polarization,
    tol: f64,
    workers: Option<usize>,
) -> Result<Vec<GridRow>, FieldError> {
    let points = grid.points();
    let config = &solution.config;
    let r_max = points
        .iter()
        .map(|p| p.r)
        .filter(|&r| r > config.radius_a && r < config.spacing_d)
        .fold(f64::NAN, f64::max);
    let eval = if r_max.is_nan() {
        None
    } else {
        Some(FieldEvaluator::new(solution, r_max, tol, &LatticeOptions::default())?)
    };
    let run = || -> Vec<GridRow> {
        points
            .par_iter()
            .map(|p| {
                let sample = match &eval {
                    Some(e) => e.sample(p, pol),
                    None => Err(check_point(p)
                        .and_then(|_| check_annulus(config, p.r))
                        .err()
                        .unwrap_or(FieldError::Point)),
                };
                (*p, sample)
            })
            .collect()
    };
    match workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .expect("thread pool construction");
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}
