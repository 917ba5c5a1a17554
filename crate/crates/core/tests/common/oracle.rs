//! Independent reference evaluations used only by tests.
#![allow(dead_code)]

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn digamma_int(m: u32) -> f64 {
    -EULER_GAMMA + (1..m).map(|j| 1.0 / j as f64).sum::<f64>()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Ascending power series for `J_n`, `n >= 0`.
pub fn j_series(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = h.powi(n as i32) / factorial(n);
    let mut sum = term;
    for k in 1..400 {
        term *= -h * h / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Ascending series for `Y_n`, `n >= 0`, with the digamma sum.
pub fn y_series(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut finite = 0.0;
    for k in 0..n {
        finite += factorial(n - k - 1) / factorial(k) * (h * h).powi(k as i32);
    }
    finite *= -h.powi(-(n as i32)) / PI;
    let mut series = 0.0;
    let mut term = h.powi(n as i32) / factorial(n);
    for k in 0..400u32 {
        if k > 0 {
            term *= -h * h / (k as f64 * (k + n) as f64);
        }
        let w = digamma_int(k + 1) + digamma_int(n + k + 1);
        series += w * term;
        if k > 5 && term.abs() < 1e-20 {
            break;
        }
    }
    finite + 2.0 / PI * h.ln() * j_series(n, x) - series / PI
}

/// Hankel asymptotic expansion for general integer order, large `x`.
pub fn jy_asymptotic(n: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..500usize {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * x * k as f64);
        if term.abs() > last && k > n as usize {
            break;
        }
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        last = term.abs();
        if last < 1e-18 {
            break;
        }
    }
    let w = x - (n as f64) * PI / 2.0 - PI / 4.0;
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p * w.cos() - q * w.sin()), amp * (p * w.sin() + q * w.cos()))
}

/// Bisection on a sign change of `f` in `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo < 1e-16 * mid.abs() {
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

/// `sum_{p > p0} p^{-1/2} w^p` for `|w| = 1`, `w != 1`, from Euler's
/// transformation with exact forward differences of `p^{-1/2}`.
pub fn inverse_sqrt_tail(p0: usize, w: num_complex::Complex64) -> num_complex::Complex64 {
    use num_complex::Complex64;
    let one = Complex64::new(1.0, 0.0);
    let f: Vec<f64> = (1..=8).map(|k| ((p0 + k) as f64).powf(-0.5)).collect();
    let mut diff = f.clone();
    let mut total = Complex64::new(0.0, 0.0);
    let mut factor = w.powu(p0 as u32 + 1) / (one - w);
    for _ in 0..f.len() {
        total += factor * diff[0];
        factor *= w / (one - w);
        for k in 0..diff.len() - 1 {
            diff[k] = diff[k + 1] - diff[k];
        }
        diff.pop();
    }
    total
}

/// Real part of the order-zero lattice sum from its plane-wave form:
/// `-1 + (2 / x) sum_q 1 / sqrt(1 - (s + 2 pi q / x)^2)` over propagating `q`.
pub fn lattice_re_i0(x: f64, s: f64) -> f64 {
    let mut total = -1.0;
    let q_max = (x / (2.0 * PI)).ceil() as i64 + 2;
    for q in -q_max..=q_max {
        let sq = s + 2.0 * PI * q as f64 / x;
        if sq.abs() < 1.0 {
            total += 2.0 / x / (1.0 - sq * sq).sqrt();
        }
    }
    total
}
