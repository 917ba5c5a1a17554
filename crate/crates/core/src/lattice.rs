//! Lattice sums of outgoing Hankel waves along a row of cylinders:
//!
//! `I_n = sum_{p >= 1} H_n(p x) [(-1)^n e^{i p x s} + e^{-i p x s}]`
//!
//! with `x = k_r d` and `s = sin(psi_i)`. The two phase-modulated sub-series
//! `S+-` are summed separately and recombined as `(-1)^n S+ + S-`.
//!
//! Terms decay only like `p^{-1/2}` with phase step `x (1 +- s)`, so partial
//! sums are accelerated with iterated Aitken extrapolation. Near a grazing
//! order the phase step is small; partial sums are then sampled with a
//! stride that turns the step into roughly a quarter period.

use crate::cylinder::{ConfigError, GratingConfig, derive_wavenumbers};
use crate::specfun::{self, SpecFunError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Number of sampled partial sums fed to the extrapolation.
const WINDOW: usize = 21;
/// Sample count at the first checkpoint; later checkpoints double it.
const FIRST_CHECKPOINT: usize = 32;
/// Terms evaluated per parallel batch.
const CHUNK: usize = 2048;
/// Orders of Euler differences used by the brute-force tail.
const EULER_TERMS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Summation {
    Accelerated,
    /// Direct partial sum over the whole budget plus an Euler tail.
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeOptions {
    /// Relative tolerance on each order, measured against `|S+| + |S-|`.
    pub tol: f64,
    /// Term budget per sub-series.
    pub max_terms: usize,
    /// Smallest accepted distance to a Wood anomaly.
    pub wood_guard: f64,
    pub summation: Summation,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_terms: 200_000,
            wood_guard: 1e-3,
            summation: Summation::Accelerated,
        }
    }
}

/// Smallest tolerance the engine accepts.
pub const MIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("tolerance {0:e} is below the supported floor {MIN_TOL:e}")]
    Tolerance(f64),
    #[error("invalid lattice argument k_r d = {0}")]
    Argument(f64),
    #[error("Wood anomaly: margin {margin:e} is within the guard {guard:e}")]
    WoodAnomaly { margin: f64, guard: f64 },
    #[error(
        "lattice sum of order {order} did not converge: est_error {est_error:e} after {terms} terms"
    )]
    NonConvergence {
        order: i64,
        est_error: f64,
        terms: usize,
    },
    #[error("lattice table failed for orders {}", list_orders(.0))]
    Table(Vec<LatticeError>),
}

fn list_orders(errors: &[LatticeError]) -> String {
    errors
        .iter()
        .map(|e| match e {
            LatticeError::NonConvergence { order, .. } => order.to_string(),
            other => other.to_string(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSum {
    pub value: Complex64,
    pub est_error: f64,
    pub terms_used: usize,
}

/// Lattice sums for orders `-order_max ..= order_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeTable {
    pub order_max: usize,
    pub kr_d: f64,
    pub sin_psi: f64,
    pub values: Vec<Complex64>,
    pub terms_used: Vec<usize>,
    pub est_error: Vec<f64>,
    pub wood_margin: f64,
}

impl LatticeTable {
    /// `I_n`. Panics when `|n| > order_max`.
    pub fn get(&self, n: i64) -> Complex64 {
        self.values[self.index(n)]
    }

    pub fn index(&self, n: i64) -> usize {
        let i = n + self.order_max as i64;
        assert!(
            i >= 0 && (i as usize) < self.values.len(),
            "order {n} outside lattice table of half-width {}",
            self.order_max
        );
        i as usize
    }

    pub fn orders(&self) -> std::ops::RangeInclusive<i64> {
        -(self.order_max as i64)..=self.order_max as i64
    }

    /// Table with every sum zero, i.e. a single isolated cylinder.
    pub fn uncoupled(order_max: usize) -> Self {
        let len = 2 * order_max + 1;
        Self {
            order_max,
            kr_d: f64::INFINITY,
            sin_psi: 0.0,
            values: vec![Complex64::new(0.0, 0.0); len],
            terms_used: vec![0; len],
            est_error: vec![0.0; len],
            wood_margin: 0.5,
        }
    }
}

/// Distance of `k_r d (1 +- sin psi) / 2 pi` to the nearest integer,
/// minimised over both signs.
pub fn wood_margin_at(kr_d: f64, sin_psi: f64) -> f64 {
    [1.0 + sin_psi, 1.0 - sin_psi]
        .iter()
        .map(|f| {
            let v = kr_d * f / TAU;
            (v - v.round()).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn wood_margin(config: &GratingConfig) -> Result<f64, ConfigError> {
    let w = derive_wavenumbers(config)?;
    Ok(wood_margin_at(w.kr * config.spacing_d, config.sin_psi()))
}

pub fn schlomilch(
    n: i64,
    config: &GratingConfig,
    opts: &LatticeOptions,
) -> Result<LatticeSum, LatticeError> {
    let w = derive_wavenumbers(config)?;
    schlomilch_at(n, w.kr * config.spacing_d, config.sin_psi(), opts)
}

pub fn schlomilch_at(
    n: i64,
    kr_d: f64,
    sin_psi: f64,
    opts: &LatticeOptions,
) -> Result<LatticeSum, LatticeError> {
    let m = n.unsigned_abs() as usize;
    let sums = evaluate_orders(m, kr_d, sin_psi, opts)?;
    let r = sums[m];
    let sign = if n < 0 && m % 2 == 1 { -1.0 } else { 1.0 };
    match r.converged {
        true => Ok(LatticeSum {
            value: r.value * sign,
            est_error: r.est_error,
            terms_used: r.terms_used,
        }),
        false => Err(LatticeError::NonConvergence {
            order: n,
            est_error: r.est_error,
            terms: r.terms_used,
        }),
    }
}

/// Table covering the coupling orders `|n - m| <= 2 N` of a truncation `N`.
pub fn lattice_table(
    truncation: usize,
    config: &GratingConfig,
    opts: &LatticeOptions,
) -> Result<LatticeTable, LatticeError> {
    let w = derive_wavenumbers(config)?;
    lattice_table_at(2 * truncation, w.kr * config.spacing_d, config.sin_psi(), opts)
}

pub fn lattice_table_at(
    order_max: usize,
    kr_d: f64,
    sin_psi: f64,
    opts: &LatticeOptions,
) -> Result<LatticeTable, LatticeError> {
    let sums = evaluate_orders(order_max, kr_d, sin_psi, opts)?;
    let failures: Vec<LatticeError> = sums
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.converged)
        .map(|(n, r)| LatticeError::NonConvergence {
            order: n as i64,
            est_error: r.est_error,
            terms: r.terms_used,
        })
        .collect();
    if !failures.is_empty() {
        return Err(LatticeError::Table(failures));
    }
    let len = 2 * order_max + 1;
    let mut table = LatticeTable {
        order_max,
        kr_d,
        sin_psi,
        values: vec![Complex64::new(0.0, 0.0); len],
        terms_used: vec![0; len],
        est_error: vec![0.0; len],
        wood_margin: wood_margin_at(kr_d, sin_psi),
    };
    for (m, r) in sums.iter().enumerate() {
        let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
        for (n, s) in [(order_max + m, 1.0), (order_max - m, sign)] {
            table.values[n] = r.value * s;
            table.terms_used[n] = r.terms_used;
            table.est_error[n] = r.est_error;
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy)]
struct OrderResult {
    value: Complex64,
    est_error: f64,
    terms_used: usize,
    converged: bool,
}

fn evaluate_orders(
    order_max: usize,
    kr_d: f64,
    sin_psi: f64,
    opts: &LatticeOptions,
) -> Result<Vec<OrderResult>, LatticeError> {
    if !(opts.tol >= MIN_TOL) {
        return Err(LatticeError::Tolerance(opts.tol));
    }
    if !(kr_d.is_finite() && kr_d > 0.0) || !(sin_psi.abs() <= 1.0) {
        return Err(LatticeError::Argument(kr_d));
    }
    let margin = wood_margin_at(kr_d, sin_psi);
    if !(margin > opts.wood_guard) {
        return Err(LatticeError::WoodAnomaly {
            margin,
            guard: opts.wood_guard,
        });
    }
    match opts.summation {
        Summation::Accelerated => accelerated(order_max, kr_d, sin_psi, opts),
        Summation::BruteForce => brute_force(order_max, kr_d, sin_psi, opts),
    }
}

/// `H_0 .. H_{order_max}` at `p * kr_d` for `p = first .. first + count`.
fn hankel_batch(
    order_max: usize,
    kr_d: f64,
    first: usize,
    count: usize,
) -> Result<Vec<Vec<Complex64>>, SpecFunError> {
    (first..first + count)
        .into_par_iter()
        .map(|p| specfun::hankel1_orders(order_max, p as f64 * kr_d))
        .collect()
}

/// `e^{i sign p x s}`. Reduced phases keep large `p` accurate.
fn lattice_phase(p: usize, kr_d: f64, sin_psi: f64, sign: f64) -> Complex64 {
    Complex64::from_polar(1.0, sign * (p as f64 * kr_d * sin_psi))
}

/// One phase-modulated sub-series, tracked for every order.
struct SubSeries {
    sign: f64,
    stride: usize,
    ratio: Complex64,
    sums: Vec<Complex64>,
    /// Ring of sampled partial sums per order, `WINDOW` long.
    samples: Vec<Vec<Complex64>>,
    filled: usize,
    checkpoints: Vec<usize>,
    next: usize,
    previous: Vec<Option<Complex64>>,
    best: Vec<Option<(Complex64, f64, usize)>>,
}

impl SubSeries {
    fn new(sign: f64, order_max: usize, kr_d: f64, sin_psi: f64, max_terms: usize) -> Self {
        // Phase step of the summand, reduced to (-pi, pi].
        let raw = kr_d * (1.0 + sign * sin_psi);
        let step = (raw + PI).rem_euclid(TAU) - PI;
        let stride = ((PI / (2.0 * step.abs())).floor() as usize).max(1);
        let mut checkpoints = Vec::new();
        let mut m = FIRST_CHECKPOINT;
        while m * stride <= max_terms {
            checkpoints.push(m * stride);
            m *= 2;
        }
        let last = (max_terms / stride) * stride;
        if last >= WINDOW * stride && checkpoints.last() != Some(&last) {
            checkpoints.push(last);
        }
        let len = order_max + 1;
        Self {
            sign,
            stride,
            ratio: Complex64::from_polar(1.0, step),
            sums: vec![Complex64::new(0.0, 0.0); len],
            samples: vec![vec![Complex64::new(0.0, 0.0); WINDOW]; len],
            filled: 0,
            checkpoints,
            next: 0,
            previous: vec![None; len],
            best: vec![None; len],
        }
    }

    fn horizon(&self) -> usize {
        self.checkpoints.last().copied().unwrap_or(0)
    }

    fn finished(&self, p: usize) -> bool {
        self.next >= self.checkpoints.len() || p > self.horizon()
    }

    fn add(&mut self, p: usize, h: &[Complex64], phase: Complex64, active: &[bool]) {
        for (n, (s, &hv)) in self.sums.iter_mut().zip(h).enumerate() {
            if active[n] {
                *s += hv * phase;
            }
        }
        if p % self.stride == 0 {
            let slot = (p / self.stride) % WINDOW;
            for (n, s) in self.sums.iter().enumerate() {
                self.samples[n][slot] = *s;
            }
            self.filled += 1;
        }
    }

    /// Extrapolate every active order at checkpoint `p`.
    fn checkpoint(&mut self, p: usize, h: &[Complex64], active: &[bool], kr_d: f64) {
        if self.next >= self.checkpoints.len() || self.checkpoints[self.next] != p {
            return;
        }
        self.next += 1;
        let slot_newest = (p / self.stride) % WINDOW;
        let gap = (Complex64::new(1.0, 0.0) - self.ratio).norm();
        let mut window = [Complex64::new(0.0, 0.0); WINDOW];
        for n in 0..self.sums.len() {
            if !active[n] {
                continue;
            }
            for (k, w) in window.iter_mut().enumerate() {
                *w = self.samples[n][(slot_newest + 1 + k) % WINDOW];
            }
            let acc = iterated_aitken(&mut window);
            // Outside the asymptotic regime the summand magnitude bound
            // below is meaningless.
            if (p as f64) * kr_d <= n as f64 + 5.0 {
                continue;
            }
            let raw = self.sums[n];
            let bound = 4.0 * h[n].norm() / gap + 1e-14 * raw.norm();
            if (acc - raw).norm() > bound {
                continue;
            }
            if let Some(prev) = self.previous[n] {
                let est = (acc - prev).norm();
                if self.best[n].is_none_or(|(_, e, _)| est < e) {
                    self.best[n] = Some((acc, est, p));
                }
            }
            self.previous[n] = Some(acc);
        }
    }
}

/// Iterated Aitken delta-squared over the whole window; returns the final
/// extrapolant. Levels with a vanishing second difference pass the newest
/// value through.
fn iterated_aitken(s: &mut [Complex64]) -> Complex64 {
    let mut len = s.len();
    while len >= 3 {
        for k in 0..len - 2 {
            let (a, b, c) = (s[k], s[k + 1], s[k + 2]);
            let d2 = c - b * 2.0 + a;
            let next = if d2.norm() == 0.0 {
                c
            } else {
                let v = c - (c - b) * (c - b) / d2;
                if v.re.is_finite() && v.im.is_finite() { v } else { c }
            };
            s[k] = next;
        }
        len -= 2;
    }
    s[len - 1]
}

fn accelerated(
    order_max: usize,
    kr_d: f64,
    sin_psi: f64,
    opts: &LatticeOptions,
) -> Result<Vec<OrderResult>, LatticeError> {
    let len = order_max + 1;
    let mut series = [
        SubSeries::new(1.0, order_max, kr_d, sin_psi, opts.max_terms),
        SubSeries::new(-1.0, order_max, kr_d, sin_psi, opts.max_terms),
    ];
    let horizon = series[0].horizon().max(series[1].horizon());
    let mut active = vec![true; len];
    let mut results: Vec<Option<OrderResult>> = vec![None; len];
    let mut p = 1;
    'outer: while p <= horizon {
        let count = CHUNK.min(horizon + 1 - p);
        let batch = hankel_batch(order_max, kr_d, p, count)?;
        for h in &batch {
            for s in series.iter_mut() {
                if s.finished(p) {
                    continue;
                }
                let phase = lattice_phase(p, kr_d, sin_psi, s.sign);
                s.add(p, h, phase, &active);
                s.checkpoint(p, h, &active, kr_d);
            }
            settle(&series, &mut active, &mut results, opts.tol);
            if active.iter().all(|a| !a) {
                break 'outer;
            }
            p += 1;
        }
    }
    Ok((0..len)
        .map(|n| {
            results[n].unwrap_or_else(|| {
                let (value, est_error, terms_used) = combine(&series, n);
                OrderResult {
                    value,
                    est_error,
                    terms_used,
                    converged: false,
                }
            })
        })
        .collect())
}

/// Combined value and relative error estimate of order `n` from the best
/// extrapolants of both sub-series.
fn combine(series: &[SubSeries; 2], n: usize) -> (Complex64, f64, usize) {
    match (series[0].best[n], series[1].best[n]) {
        (Some((a, ea, pa)), Some((b, eb, pb))) => {
            let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
            let scale = a.norm() + b.norm();
            let rel = if scale > 0.0 { (ea + eb) / scale } else { 0.0 };
            (a * sign + b, rel, pa.max(pb))
        }
        _ => {
            let terms = series[0].horizon().max(series[1].horizon());
            (Complex64::new(f64::NAN, f64::NAN), f64::INFINITY, terms)
        }
    }
}

fn settle(
    series: &[SubSeries; 2],
    active: &mut [bool],
    results: &mut [Option<OrderResult>],
    tol: f64,
) {
    for n in 0..active.len() {
        if !active[n] {
            continue;
        }
        let (value, est_error, terms_used) = combine(series, n);
        if est_error <= tol {
            active[n] = false;
            results[n] = Some(OrderResult {
                value,
                est_error,
                terms_used,
                converged: true,
            });
        }
    }
}

fn brute_force(
    order_max: usize,
    kr_d: f64,
    sin_psi: f64,
    opts: &LatticeOptions,
) -> Result<Vec<OrderResult>, LatticeError> {
    let len = order_max + 1;
    let total = opts.max_terms.max(1);
    let mut sums = [
        vec![Complex64::new(0.0, 0.0); len],
        vec![Complex64::new(0.0, 0.0); len],
    ];
    let signs = [1.0, -1.0];
    let mut p = 1;
    while p <= total {
        let count = CHUNK.min(total + 1 - p);
        let batch = hankel_batch(order_max, kr_d, p, count)?;
        for h in &batch {
            for (sums, &sign) in sums.iter_mut().zip(&signs) {
                let phase = lattice_phase(p, kr_d, sin_psi, sign);
                for (s, &hv) in sums.iter_mut().zip(h) {
                    *s += hv * phase;
                }
            }
            p += 1;
        }
    }

    // Tail: summand = g_p z^p with smooth g_p = H_n(p x) e^{-i p x}.
    let tail_points = hankel_batch(order_max, kr_d, total + 1, EULER_TERMS)?;
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let g: Vec<Complex64> = tail_points
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let q = (total + 1 + k) as f64;
                h[n] * Complex64::from_polar(1.0, -q * kr_d)
            })
            .collect();
        let mut parts = [Complex64::new(0.0, 0.0); 2];
        let mut last_term = 0.0;
        for (i, &sign) in signs.iter().enumerate() {
            let z = Complex64::from_polar(1.0, kr_d * (1.0 + sign * sin_psi));
            let q = (total + 1) as f64;
            let lead = Complex64::from_polar(1.0, q * kr_d)
                * Complex64::from_polar(1.0, sign * q * kr_d * sin_psi);
            let tail = euler_tail(&g, z);
            parts[i] = sums[i][n] + lead * tail.0;
            last_term += tail.1;
        }
        let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
        let scale = parts[0].norm() + parts[1].norm();
        out.push(OrderResult {
            value: parts[0] * sign + parts[1],
            est_error: if scale > 0.0 { last_term / scale } else { 0.0 },
            terms_used: total,
            converged: true,
        });
    }
    Ok(out)
}

/// `sum_{j >= 0} g_j z^j` for smooth `g` via forward differences,
/// returning the sum and the magnitude of its last retained term.
fn euler_tail(g: &[Complex64], z: Complex64) -> (Complex64, f64) {
    let one = Complex64::new(1.0, 0.0);
    let w = one / (one - z);
    let mut diff = g.to_vec();
    let mut total = Complex64::new(0.0, 0.0);
    let mut factor = w;
    let mut last = 0.0;
    for _ in 0..g.len() {
        let term = diff[0] * factor;
        total += term;
        last = term.norm();
        factor *= z * w;
        for k in 0..diff.len() - 1 {
            diff[k] = diff[k + 1] - diff[k];
        }
        diff.pop();
    }
    (total, last)
}
