//! Cylindrical Bessel functions of integer order and real argument.
//!
//! `J_n` is evaluated by upward recurrence from accurate `J_0`, `J_1` while
//! `n <= x`, and by normalized downward (Miller) recurrence above that.
//! `Y_n` always comes from upward recurrence seeded with `Y_0`, `Y_1`.
//! The seeds use a Neumann-series evaluation for `x <= 25` and the Hankel
//! asymptotic expansion beyond.
//!
//! Negative orders follow `f_{-n}(x) = (-1)^n f_n(x)`.

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

/// Largest supported `|n|` for the scalar entry points.
pub const MAX_ORDER: u32 = 256;
/// Largest supported argument for the scalar entry points.
pub const MAX_ARG: f64 = 1e4;
/// Largest argument accepted by [`hankel1_orders`], which lattice sums call
/// with `p * k_r * d` for large `p`.
pub const MAX_SEQUENCE_ARG: f64 = 1e10;

const ASYMPTOTIC_SWITCH: f64 = 25.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RESCALE_THRESHOLD: f64 = 1e250;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("argument x = {x} is outside the supported domain {domain}")]
    Domain { x: f64, domain: &'static str },
    #[error("order {n} exceeds the supported envelope |n| <= {max}")]
    Order { n: i64, max: u32 },
    #[error("Y_{n}({x}) overflows double precision")]
    Overflow { n: i64, x: f64 },
}

/// Values and first derivatives of `J_n` and `Y_n` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylPair {
    pub j: f64,
    pub y: f64,
    pub jp: f64,
    pub yp: f64,
}

impl CylPair {
    /// `H_n^{(1)}(x) = J_n(x) + i Y_n(x)`.
    pub fn h(&self) -> Complex64 {
        Complex64::new(self.j, self.y)
    }

    /// Derivative of the Hankel function.
    pub fn hp(&self) -> Complex64 {
        Complex64::new(self.jp, self.yp)
    }

    /// `J Y' - J' Y`, equal to `2 / (pi x)` analytically.
    pub fn wronskian(&self) -> f64 {
        self.j * self.yp - self.jp * self.y
    }
}

/// Sign applied to order `|n|` values to obtain order `n`.
fn order_sign(n: i64) -> f64 {
    if n < 0 {
        parity(n)
    } else {
        1.0
    }
}

fn parity(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_order(n: i64) -> Result<usize, SpecFunError> {
    let m = n.unsigned_abs();
    if m > MAX_ORDER as u64 {
        return Err(SpecFunError::Order { n, max: MAX_ORDER });
    }
    Ok(m as usize)
}

fn check_positive_arg(x: f64, max: f64) -> Result<(), SpecFunError> {
    if !(x > 0.0 && x <= max) {
        return Err(SpecFunError::Domain {
            x,
            domain: if max == MAX_ARG { "(0, 1e4]" } else { "(0, 1e10]" },
        });
    }
    Ok(())
}

/// `J_n(x)`. Accepts `x = 0`, where `J_n(0)` is `1` for `n = 0` and `0`
/// otherwise.
pub fn bessel_j(n: i32, x: f64) -> Result<f64, SpecFunError> {
    let m = check_order(n as i64)?;
    if x == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    check_positive_arg(x, MAX_ARG)?;
    let j = j_sequence(m, x);
    Ok(order_sign(n as i64) * j[m])
}

/// `Y_n(x)` for `x > 0`.
pub fn bessel_y(n: i32, x: f64) -> Result<f64, SpecFunError> {
    let m = check_order(n as i64)?;
    check_positive_arg(x, MAX_ARG)?;
    let y = y_sequence(m, x, &j_seeds(x));
    let v = y[m];
    if !v.is_finite() {
        return Err(SpecFunError::Overflow { n: n as i64, x });
    }
    Ok(order_sign(n as i64) * v)
}

/// `H_n^{(1)}(x) = J_n(x) + i Y_n(x)` for `x > 0`.
pub fn hankel1(n: i32, x: f64) -> Result<Complex64, SpecFunError> {
    Ok(cyl_pair(n, x)?.h())
}

/// `J_n`, `Y_n` and their derivatives, using `f_n' = (f_{n-1} - f_{n+1}) / 2`.
pub fn cyl_pair(n: i32, x: f64) -> Result<CylPair, SpecFunError> {
    let m = check_order(n as i64)?;
    check_positive_arg(x, MAX_ARG)?;
    let (j, y) = jy_sequences(m + 1, x);
    let at = |v: &[f64], k: i64| -> f64 {
        if k < 0 {
            parity(k) * v[k.unsigned_abs() as usize]
        } else {
            v[k as usize]
        }
    };
    let k = m as i64;
    let pair = CylPair {
        j: j[m],
        y: y[m],
        jp: 0.5 * (at(&j, k - 1) - at(&j, k + 1)),
        yp: 0.5 * (at(&y, k - 1) - at(&y, k + 1)),
    };
    if !(pair.y.is_finite() && pair.yp.is_finite()) {
        return Err(SpecFunError::Overflow { n: n as i64, x });
    }
    let s = order_sign(n as i64);
    Ok(CylPair {
        j: s * pair.j,
        y: s * pair.y,
        jp: s * pair.jp,
        yp: s * pair.yp,
    })
}

/// `J_0(x) .. J_{n_max}(x)` in one pass. `x = 0` is accepted.
pub fn bessel_j_orders(n_max: usize, x: f64) -> Result<Vec<f64>, SpecFunError> {
    check_order(n_max as i64)?;
    if x == 0.0 {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 1.0;
        return Ok(v);
    }
    check_positive_arg(x, MAX_ARG)?;
    let mut j = j_sequence(n_max, x);
    j.truncate(n_max + 1);
    Ok(j)
}

/// `H_0^{(1)}(x) .. H_{n_max}^{(1)}(x)` in one pass, on the extended argument
/// range `(0, 1e10]`.
pub fn hankel1_orders(n_max: usize, x: f64) -> Result<Vec<Complex64>, SpecFunError> {
    check_order(n_max as i64)?;
    check_positive_arg(x, MAX_SEQUENCE_ARG)?;
    let (j, y) = jy_sequences(n_max, x);
    if let Some(k) = y.iter().position(|v| !v.is_finite()) {
        return Err(SpecFunError::Overflow { n: k as i64, x });
    }
    Ok(j.iter().zip(&y).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// Seeds `(J_0, J_1, Y_0, Y_1)` plus, in the series regime, the full Miller
/// array of `J` values it was derived from.
struct Seeds {
    j0: f64,
    j1: f64,
    y0: f64,
    y1: f64,
    miller: Option<Vec<f64>>,
}

fn j_seeds(x: f64) -> Seeds {
    if x <= ASYMPTOTIC_SWITCH {
        let j = miller_normalized(0, x);
        let (y0, y1) = neumann_y01(&j, x);
        Seeds {
            j0: j[0],
            j1: j[1],
            y0,
            y1,
            miller: Some(j),
        }
    } else {
        let (j0, y0) = hankel_asymptotic(0.0, x, false);
        let (j1, y1) = hankel_asymptotic(1.0, x, true);
        Seeds {
            j0,
            j1,
            y0,
            y1,
            miller: None,
        }
    }
}

fn jy_sequences(n_max: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let seeds = j_seeds(x);
    let y = y_sequence(n_max, x, &seeds);
    let j = j_from_seeds(n_max, x, seeds);
    (j, y)
}

fn j_sequence(n_max: usize, x: f64) -> Vec<f64> {
    j_from_seeds(n_max, x, j_seeds(x))
}

fn j_from_seeds(n_max: usize, x: f64, seeds: Seeds) -> Vec<f64> {
    if let Some(mut j) = seeds.miller {
        // Only orders up to the recurrence target are accurate.
        if n_max <= miller_target(0, x) {
            j.truncate(n_max + 1);
            return j;
        }
        let mut j = miller_normalized(n_max, x);
        j.truncate(n_max + 1);
        return j;
    }
    let mut j = vec![0.0; n_max.max(1) + 1];
    j[0] = seeds.j0;
    j[1] = seeds.j1;
    let n_up = (x.floor() as usize).min(n_max).max(1);
    for k in 1..n_up {
        j[k + 1] = 2.0 * k as f64 / x * j[k] - j[k - 1];
    }
    if n_up < n_max {
        // Minimal-solution regime: recur downward and match the overlap pair.
        let lo = n_up - 1;
        let down = Downward::run(miller_start(n_max, x), lo, n_max, x);
        let (d1, d0) = (down.value(n_up, 1.0), down.value(n_up - 1, 1.0));
        let (u1, u0) = (j[n_up], j[n_up - 1]);
        let r = d0 / d1;
        let scale = (u1 + u0 * r) / (d1 * (1.0 + r * r));
        for k in n_up + 1..=n_max {
            j[k] = down.value(k, scale);
        }
    }
    j.truncate(n_max + 1);
    j
}

fn miller_target(n_top: usize, x: f64) -> usize {
    n_top.max(x.ceil() as usize) + 2
}

fn miller_start(n_top: usize, x: f64) -> usize {
    let top = miller_target(n_top, x) as f64;
    let m = top + (160.0 * top).sqrt() + 10.0;
    2 * ((m as usize) / 2 + 1)
}

/// Unnormalized downward recurrence from `start`, keeping orders `lo..=hi`.
/// Each stored entry remembers how many rescalings it missed.
struct Downward {
    lo: usize,
    values: Vec<f64>,
    rescales: Vec<u32>,
    total: u32,
    even_sum: f64,
}

impl Downward {
    fn run(start: usize, lo: usize, hi: usize, x: f64) -> Self {
        let mut out = Downward {
            lo,
            values: vec![0.0; hi + 1 - lo],
            rescales: vec![0; hi + 1 - lo],
            total: 0,
            even_sum: 0.0,
        };
        let mut next = 0.0;
        let mut cur = 1.0;
        if start <= hi {
            out.values[start - lo] = cur;
        }
        for k in (lo + 1..=start).rev() {
            let prev = 2.0 * k as f64 / x * cur - next;
            next = cur;
            cur = prev;
            let order = k - 1;
            if order % 2 == 0 && order > 0 {
                out.even_sum += 2.0 * cur;
            }
            if cur.abs() > RESCALE_THRESHOLD {
                cur /= RESCALE_THRESHOLD;
                next /= RESCALE_THRESHOLD;
                out.even_sum /= RESCALE_THRESHOLD;
                out.total += 1;
            }
            if order <= hi {
                out.values[order - lo] = cur;
                out.rescales[order - lo] = out.total;
            }
        }
        out
    }

    /// Entry `k` brought to the final scale and multiplied by `factor`.
    fn value(&self, k: usize, factor: f64) -> f64 {
        let i = k - self.lo;
        let mut v = self.values[i] * factor;
        for _ in self.rescales[i]..self.total {
            v /= RESCALE_THRESHOLD;
            if v == 0.0 {
                break;
            }
        }
        v
    }
}

/// Miller downward recurrence normalized by `J_0 + 2 sum J_{2k} = 1`.
/// Returns every order from 0 through the (even) starting index.
fn miller_normalized(n_max: usize, x: f64) -> Vec<f64> {
    let start = miller_start(n_max, x);
    let down = Downward::run(start, 0, start, x);
    let norm = 1.0 / (down.even_sum + down.values[0]);
    (0..=start).map(|k| down.value(k, norm)).collect()
}

/// `Y_0`, `Y_1` from the Neumann expansions in even/odd `J` orders.
fn neumann_y01(j: &[f64], x: f64) -> (f64, f64) {
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let kmax = (j.len() - 2) / 2;
    for k in (1..=kmax).rev() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
    }
    let y0 = 2.0 / PI * log_term * j[0] - 4.0 / PI * s0;
    let y1 = -2.0 / PI * j[0] / x + 2.0 / PI * log_term * j[1] + 2.0 / PI * s1;
    (y0, y1)
}

/// Hankel asymptotic expansion for orders 0 and 1.
fn hankel_asymptotic(nu: f64, x: f64, order_one: bool) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    let inv8x = 1.0 / (8.0 * x);
    let mut k = 1usize;
    loop {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) * inv8x / k as f64;
        let mag = term.abs();
        if mag > last || k > 200 {
            break;
        }
        // terms alternate between Q (odd k) and P (even k) with sign (-1)^floor(k/2)
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        if mag < 1e-17 {
            break;
        }
        last = mag;
        k += 1;
    }
    let (s, c) = x.sin_cos();
    // omega = x - nu pi/2 - pi/4
    let (cos_w, sin_w) = if order_one {
        (FRAC_1_SQRT_2 * (s - c), -FRAC_1_SQRT_2 * (s + c))
    } else {
        (FRAC_1_SQRT_2 * (c + s), FRAC_1_SQRT_2 * (s - c))
    };
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p * cos_w - q * sin_w), amp * (p * sin_w + q * cos_w))
}

fn y_sequence(n_max: usize, x: f64, seeds: &Seeds) -> Vec<f64> {
    let mut y = vec![0.0; n_max.max(1) + 1];
    y[0] = seeds.y0;
    y[1] = seeds.y1;
    for k in 1..n_max {
        y[k + 1] = 2.0 * k as f64 / x * y[k] - y[k - 1];
    }
    y.truncate(n_max + 1);
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series for `J_n`, used as an independent small-argument oracle.
    fn j_series(n: u32, x: f64) -> f64 {
        let h = 0.5 * x;
        let mut term = h.powi(n as i32);
        for k in 1..=n {
            term /= k as f64;
        }
        let mut sum = term;
        for k in 1..200 {
            term *= -h * h / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let mut flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn origin_conventions() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert!(bessel_y(0, 0.0).is_err());
        assert!(hankel1(2, 0.0).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bessel_j(0, -1.0), Err(SpecFunError::Domain { .. })));
        assert!(matches!(bessel_j(0, f64::NAN), Err(SpecFunError::Domain { .. })));
        assert!(matches!(bessel_j(0, 2e4), Err(SpecFunError::Domain { .. })));
        assert!(matches!(bessel_j(257, 1.0), Err(SpecFunError::Order { .. })));
        assert!(matches!(bessel_y(-300, 1.0), Err(SpecFunError::Order { .. })));
        assert!(matches!(bessel_y(200, 0.01), Err(SpecFunError::Overflow { .. })));
    }

    #[test]
    fn first_zero_of_j0() {
        let x0 = bisect(|x| j_series(0, x), 2.0, 3.0);
        assert!(bessel_j(0, x0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn large_argument_y0_matches_asymptotic() {
        // The bare leading term is only good to O(1/(8x)) ~ 2.5e-4 here, so the
        // comparison carries the first Hankel correction as well.
        let x = 500.0;
        let amp = (2.0 / (PI * x)).sqrt();
        let w = x - PI / 4.0;
        let two_term = amp * (w.sin() - w.cos() / (8.0 * x));
        let y = bessel_y(0, x).unwrap();
        assert!(((y - two_term) / y).abs() < 1e-6);
        assert!((y - amp * w.sin()).abs() < 3e-4 * amp);
    }

    #[test]
    fn hankel_parity_and_magnitude() {
        let x = 7.3;
        let h3 = hankel1(3, x).unwrap();
        let hm3 = hankel1(-3, x).unwrap();
        assert_eq!(hm3, -h3);
        assert_eq!(hankel1(4, x).unwrap().im, bessel_y(4, x).unwrap());
        let x = 1000.0;
        let m = hankel1(0, x).unwrap().norm() * x.sqrt();
        assert!(((m - (2.0 / PI).sqrt()) / (2.0 / PI).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn derivative_of_j0_is_minus_j1() {
        for &x in &[0.3, 2.0, 17.0, 60.0] {
            let p = cyl_pair(0, x).unwrap();
            assert_eq!(p.jp, -bessel_j(1, x).unwrap());
        }
    }

    #[test]
    fn recurrence_residual_at_reference_point() {
        let (n, x) = (5, 12.0);
        let fm = cyl_pair(n - 1, x).unwrap();
        let f0 = cyl_pair(n, x).unwrap();
        let fp = cyl_pair(n + 1, x).unwrap();
        let rj = (fm.j + fp.j - 2.0 * n as f64 / x * f0.j).abs();
        let ry = (fm.y + fp.y - 2.0 * n as f64 / x * f0.y).abs();
        let scale_j = fm.j.abs().max(f0.j.abs()).max(fp.j.abs());
        let scale_y = fm.y.abs().max(f0.y.abs()).max(fp.y.abs());
        assert!(rj <= 1e-10 * scale_j);
        assert!(ry <= 1e-10 * scale_y);
    }

    #[test]
    fn sequence_matches_scalar_calls() {
        for &x in &[0.5, 10.0, 30.0, 80.0] {
            let hs = hankel1_orders(40, x).unwrap();
            for (n, h) in hs.iter().enumerate() {
                let s = hankel1(n as i32, x).unwrap();
                assert!((h - s).norm() <= 1e-13 * s.norm(), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn sequence_accepts_large_arguments() {
        let x = 4.0e6;
        let h = hankel1_orders(3, x).unwrap();
        let lead = (2.0 / (PI * x)).sqrt();
        for v in h {
            assert!((v.norm() - lead).abs() < 1e-6 * lead);
        }
        assert!(hankel1(0, x).is_err());
    }
}
