#[path = "../../core/tests/common/mod.rs"]
mod common;

use common::oracle;
use num_complex::Complex64;
use oblique_grating::cylinder::{GratingConfig, Mat2, derive_wavenumbers, scatter_matrix, wait_matrix};
use oblique_grating::fields::{LocalPoint, Polarization, exterior_fields, floquet_phase, incident_ez, incident_hz};
use oblique_grating::lattice::{
    LatticeError, LatticeOptions, lattice_table, schlomilch_at, wood_margin, wood_margin_at,
};
use oblique_grating::solver::{
    CoefficientSet, Method, SingleScatterTable, SolveOptions, SolverError, assemble, default_truncation,
    residual, solve_direct, solve_grating, solve_neumann,
};
use oblique_grating::specfun::{bessel_j, bessel_y, cyl_pair, hankel1, hankel1_orders};
use oblique_grating_cli::output::parse_coefficients;
use oblique_grating_cli::{ConfigDocument, parse_run_spec};
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn entrywise_rel(a: &Mat2, b: &Mat2) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = (x - y).norm();
            if d == 0.0 { 0.0 } else { d / y.norm().max(x.norm()) }
        })
        .fold(0.0, f64::max)
}

fn distance(a: &CoefficientSet, b: &CoefficientSet) -> f64 {
    a.coefficients
        .iter()
        .zip(&b.coefficients)
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        .sqrt()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn dual_path() -> Outcome {
    let mut rng = common::rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = common::random_config(&mut rng);
        for n in -10..=10 {
            let a = scatter_matrix(n, &c).map_err(err)?;
            let b = wait_matrix(n, &c).map_err(err)?;
            worst = worst.max(entrywise_rel(&a, &b));
        }
    }
    ensure(worst <= 1e-10, || format!("worst entrywise gap {worst:e}"))?;
    Ok(format!("worst entrywise gap {worst:.2e}"))
}

fn off_diagonal(m: &Mat2) -> f64 {
    m[(0, 1)].norm().max(m[(1, 0)].norm())
}

fn normal_incidence() -> Outcome {
    let mut rng = common::rng(5);
    let mut worst: f64 = 0.0;
    let mut solved = 0;
    while solved < 5 {
        let mut c = common::random_config(&mut rng);
        c.theta_i = FRAC_PI_2;
        if wood_margin(&c).map_err(err)? < 0.05 {
            continue;
        }
        solved += 1;
        for n in -10..=10 {
            let m = scatter_matrix(n, &c).map_err(err)?;
            if m.norm() > 0.0 {
                worst = worst.max(off_diagonal(&m) / m.norm());
            }
        }
        let sol = solve_grating(&c, &SolveOptions::default()).map_err(err)?;
        let global = sol.coeffs.norm();
        for m in &sol.coeffs.coefficients {
            let scale = if m.norm() > 0.0 { m.norm() } else { global };
            worst = worst.max(off_diagonal(m) / scale);
        }
    }
    ensure(worst <= 1e-12, || format!("cross-polar ratio {worst:e}"))?;
    Ok(format!("worst cross-polar ratio {worst:.2e}"))
}

fn isolated_limit() -> Outcome {
    let base = GratingConfig {
        radius_a: 0.3,
        spacing_d: 1.0,
        eps_r: 3.0,
        mu_r: 1.2,
        k0: 2.0,
        theta_i: 1.1,
        phi_i: 0.0,
        e0v: 1.0,
        h0v: 1.0,
    };
    let kr = base.k0 * base.theta_i.sin();
    let d0 = TAU / 3.0 / kr;
    let mut deltas = Vec::new();
    for f in [1.0, 2.0, 4.0] {
        let c = GratingConfig { spacing_d: d0 * f, ..base };
        let margin = wood_margin(&c).map_err(err)?;
        ensure(margin > 0.1, || format!("d = {} too close to a Wood anomaly", c.spacing_d))?;
        let sol = solve_grating(&c, &SolveOptions::default()).map_err(err)?;
        let dev = sol
            .coeffs
            .orders()
            .map(|k| (sol.coeffs.get(k) - sol.single.get(k) * sol.single.incident_phase(k)).norm())
            .fold(0.0, f64::max);
        deltas.push(dev);
    }
    ensure(deltas[0] > deltas[1] && deltas[1] > deltas[2], || format!("deviations {deltas:?}"))?;
    Ok(format!("deviations {:.3e} > {:.3e} > {:.3e}", deltas[0], deltas[1], deltas[2]))
}

/// Partial sums of both sub-series to `terms`, plus the large-argument tail.
fn brute_with_asymptotic_tail(n_max: usize, x: f64, s: f64, terms: usize) -> Result<Vec<Complex64>, String> {
    let mut plus = vec![Complex64::new(0.0, 0.0); n_max + 1];
    let mut minus = plus.clone();
    for p in 1..=terms {
        let h = hankel1_orders(n_max, p as f64 * x).map_err(err)?;
        let e = Complex64::from_polar(1.0, p as f64 * x * s);
        for n in 0..=n_max {
            plus[n] += h[n] * e;
            minus[n] += h[n] * e.conj();
        }
    }
    Ok((0..=n_max)
        .map(|n| {
            let lead = (2.0 / (PI * x)).sqrt() * Complex64::from_polar(1.0, -(n as f64) * PI / 2.0 - FRAC_PI_4);
            let tp = lead * oracle::inverse_sqrt_tail(terms, Complex64::from_polar(1.0, x * (1.0 + s)));
            let tm = lead * oracle::inverse_sqrt_tail(terms, Complex64::from_polar(1.0, x * (1.0 - s)));
            let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
            (plus[n] + tp) * sign + minus[n] + tm
        })
        .collect())
}

fn schlomilch_oracle() -> Outcome {
    let opts = LatticeOptions::default();
    let mut worst: f64 = 0.0;
    for &(x, s) in &[(4.0, -0.5), (2.0, 0.3), (7.5, 0.1)] {
        let reference = brute_with_asymptotic_tail(5, x, s, 1_000_000)?;
        for n in [0usize, 1, 2, 5] {
            let got = schlomilch_at(n as i64, x, s, &opts).map_err(err)?;
            let r = rel(got.value, reference[n]);
            ensure(r <= 1e-6, || format!("n={n} x={x} s={s}: rel {r:e}"))?;
            worst = worst.max(r);
        }
    }
    let mut rng = common::rng(41);
    let mut parity: f64 = 0.0;
    let mut cases = 0;
    while cases < 50 {
        let n: i64 = rng.random_range(1..=12);
        let x: f64 = rng.random_range(0.5..12.0);
        let s: f64 = rng.random_range(-0.95..0.95);
        if wood_margin_at(x, s) <= 2e-3 {
            continue;
        }
        let a = schlomilch_at(n, x, s, &opts).map_err(err)?.value;
        let b = schlomilch_at(-n, x, s, &opts).map_err(err)?.value;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let r = (b - a * sign).norm() / a.norm().max(1e-300);
        ensure(r <= 1e-10, || format!("parity n={n} x={x} s={s}: {r:e}"))?;
        parity = parity.max(r);
        cases += 1;
    }
    Ok(format!("oracle gap {worst:.2e}, parity gap {parity:.2e}"))
}

fn contraction(iterates: &[CoefficientSet]) -> f64 {
    let mut steps = vec![iterates[0].norm()];
    steps.extend(iterates.windows(2).map(|w| distance(&w[1], &w[0])));
    steps.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
}

fn tables(c: &GratingConfig) -> Result<(usize, SingleScatterTable, oblique_grating::lattice::LatticeTable), String> {
    let n = default_truncation(c).map_err(err)?;
    let single = SingleScatterTable::new(n, c).map_err(err)?;
    let lat = lattice_table(n, c, &LatticeOptions::default()).map_err(err)?;
    Ok((n, single, lat))
}

fn neumann_vs_direct() -> Outcome {
    let c = common::weak_config();
    let (n, single, lat) = tables(&c)?;
    let direct = solve_direct(&assemble(n, &single, &lat).map_err(err)?).map_err(err)?;
    let iterates: Vec<CoefficientSet> = (1..=4)
        .map(|k| solve_neumann(k, n, &single, &lat))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let rho = contraction(&iterates);
    ensure(rho < 0.5, || format!("contraction ratio {rho}"))?;
    let x1 = iterates[0].norm();
    for (k, x) in (1..).zip(&iterates) {
        let gap = distance(x, &direct);
        let bound = 2.0 * rho.powi(k) * x1;
        ensure(gap <= bound, || format!("K={k}: gap {gap:e} > {bound:e}"))?;
    }
    let scale = direct.coefficients.iter().flat_map(|m| m.iter()).map(|v| v.norm()).fold(0.0, f64::max);
    let worst = direct
        .coefficients
        .iter()
        .zip(&iterates[3].coefficients)
        .flat_map(|(d, x)| (d - x).iter().map(|v| v.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
        / scale;
    ensure(worst <= 1e-4, || format!("K=4 relative gap {worst:e}"))?;
    Ok(format!("rho {rho:.3e}, K=4 relative gap {worst:.2e}"))
}

fn grating_residual() -> Outcome {
    let mut worst: f64 = 0.0;
    for c in [common::weak_config(), common::strong_config()] {
        let (n, single, lat) = tables(&c)?;
        let direct = solve_direct(&assemble(n, &single, &lat).map_err(err)?).map_err(err)?;
        let r = residual(&direct, &single, &lat);
        ensure(r <= 1e-10, || format!("direct residual {r:e}"))?;
        worst = worst.max(r);
    }
    let c = common::strong_config();
    let (n, single, lat) = tables(&c)?;
    let direct = solve_direct(&assemble(n, &single, &lat).map_err(err)?).map_err(err)?;
    let x1 = solve_neumann(1, n, &single, &lat).map_err(err)?;
    let r1 = residual(&x1, &single, &lat);
    let rd = residual(&direct, &single, &lat);
    ensure(r1 > rd, || format!("single-scattering residual {r1:e} <= direct {rd:e}"))?;
    Ok(format!("direct residual {worst:.2e}, single-scattering {r1:.2e}"))
}

fn plane_wave(c: &GratingConfig, p: &LocalPoint, amplitude: f64) -> Result<Complex64, String> {
    let w = derive_wavenumbers(c).map_err(err)?;
    let x = p.r * p.phi.cos();
    let y = p.r * p.phi.sin() + p.s as f64 * c.spacing_d;
    let phase = w.kr * (x * c.cos_psi() + y * c.sin_psi()) - w.kz * p.z;
    Ok(Complex64::from_polar(c.theta_i.sin() * amplitude, phase))
}

fn field_checks() -> Outcome {
    let mut rng = common::rng(71);
    let mut incident: f64 = 0.0;
    for _ in 0..100 {
        let mut c = common::random_config(&mut rng);
        c.e0v = rng.random_range(0.5..2.0);
        c.h0v = rng.random_range(0.5..2.0);
        let kr = derive_wavenumbers(&c).map_err(err)?.kr;
        let p = LocalPoint {
            s: rng.random_range(-3..=3),
            r: rng.random_range(0.0..20.0 / kr),
            phi: rng.random_range(-TAU..TAU),
            z: rng.random_range(-2.0..2.0),
        };
        let e = rel(incident_ez(&c, &p, 1e-14).map_err(err)?, plane_wave(&c, &p, c.e0v)?);
        let h = rel(incident_hz(&c, &p, 1e-14).map_err(err)?, plane_wave(&c, &p, c.h0v)?);
        incident = incident.max(e).max(h);
    }
    ensure(incident <= 1e-10, || format!("Jacobi-Anger gap {incident:e}"))?;

    let c = common::weak_config();
    let sol = solve_grating(&c, &SolveOptions::default()).map_err(err)?;
    let phase = floquet_phase(&c, 1).map_err(err)?;
    for pol in [Polarization::TM, Polarization::TE] {
        for (r, phi, z) in [(0.5, 0.2, 0.0), (0.7, 2.5, 1.3), (0.35, -1.0, -0.4)] {
            let p0 = LocalPoint { s: 0, r: r * c.spacing_d, phi, z };
            let p1 = LocalPoint { s: 1, ..p0 };
            let f0 = exterior_fields(&sol, &p0, pol, 1e-10).map_err(err)?;
            let f1 = exterior_fields(&sol, &p1, pol, 1e-10).map_err(err)?;
            ensure(f1.ez == f0.ez * phase && f1.hz == f0.hz * phase, || format!("Floquet mismatch at {p0:?}"))?;
        }
    }

    let mut clear = common::weak_config();
    clear.eps_r = 1.0;
    clear.h0v = 0.7;
    let sol = solve_grating(&clear, &SolveOptions::default()).map_err(err)?;
    let mut transparency: f64 = 0.0;
    for (r, phi) in [(0.15, 0.1), (0.5, 1.9), (0.9, -2.2)] {
        let p = LocalPoint { s: 0, r: r * clear.spacing_d, phi, z: 0.3 };
        let tm = exterior_fields(&sol, &p, Polarization::TM, 1e-11).map_err(err)?;
        let te = exterior_fields(&sol, &p, Polarization::TE, 1e-11).map_err(err)?;
        ensure(tm.hz == Complex64::new(0.0, 0.0) && te.ez == Complex64::new(0.0, 0.0), || {
            "cross field at zero contrast".into()
        })?;
        transparency = transparency
            .max(rel(tm.ez, incident_ez(&clear, &p, 1e-14).map_err(err)?))
            .max(rel(te.hz, incident_hz(&clear, &p, 1e-14).map_err(err)?));
    }
    ensure(transparency <= 1e-10, || format!("zero-contrast gap {transparency:e}"))?;
    Ok(format!("Jacobi-Anger {incident:.2e}, Floquet exact, transparency {transparency:.2e}"))
}

fn special_functions() -> Outcome {
    for &x in &[0.1, 1.0, 5.0, 20.0, 100.0, 1000.0] {
        for n in 0..=50 {
            let p = cyl_pair(n, x).map_err(err)?;
            let expected = 2.0 / (PI * x);
            let r = ((p.wronskian() - expected) / expected).abs();
            ensure(r < 1e-12, || format!("Wronskian n={n} x={x}: {r:e}"))?;
        }
    }
    for &x in &[0.7, 3.0, 24.0, 26.0, 95.0, 333.0, 1000.0] {
        for n in 1..100 {
            let lo = cyl_pair(n - 1, x).map_err(err)?;
            let mid = cyl_pair(n, x).map_err(err)?;
            let hi = cyl_pair(n + 1, x).map_err(err)?;
            let k = 2.0 * n as f64 / x;
            let sj = lo.j.abs().max(mid.j.abs()).max(hi.j.abs());
            let sy = lo.y.abs().max(mid.y.abs()).max(hi.y.abs());
            ensure((lo.j + hi.j - k * mid.j).abs() <= 1e-10 * sj, || format!("J recurrence n={n} x={x}"))?;
            ensure((lo.y + hi.y - k * mid.y).abs() <= 1e-10 * sy, || format!("Y recurrence n={n} x={x}"))?;
        }
    }
    let mut rng = common::rng(13);
    for _ in 0..500 {
        let n: i32 = rng.random_range(0..=120);
        let x: f64 = rng.random_range(0.05..2000.0);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        ensure(bessel_j(-n, x).map_err(err)? == sign * bessel_j(n, x).map_err(err)?, || {
            format!("J parity n={n} x={x}")
        })?;
        if let Ok(h) = hankel1(n, x) {
            ensure(hankel1(-n, x).map_err(err)? == h * sign, || format!("H parity n={n} x={x}"))?;
        }
    }
    let mut worst: f64 = 0.0;
    let mut compare = |n: u32, x: f64, oj: f64, oy: f64| -> Result<(), String> {
        let env = oj.hypot(oy);
        for (got, want) in [(bessel_j(n as i32, x), oj), (bessel_y(n as i32, x), oy)] {
            if want.abs() > 1e-6 * env {
                let r = ((got.map_err(err)? - want) / want).abs();
                ensure(r < 1e-9, || format!("oracle n={n} x={x}: {r:e}"))?;
                worst = worst.max(r);
            }
        }
        Ok(())
    };
    for &x in &[0.1, 0.3, 0.7, 1.5, 3.0, 4.5] {
        for n in 0..=20 {
            compare(n, x, oracle::j_series(n, x), oracle::y_series(n, x))?;
        }
    }
    for &x in &[100.0, 250.0, 600.0, 1000.0, 9000.0] {
        for n in 0..=10 {
            let (j, y) = oracle::jy_asymptotic(n, x);
            compare(n, x, j, y)?;
        }
    }
    Ok(format!("oracle gap {worst:.2e}"))
}

const WEAK: &str = "radius = 0.42916655108395896
spacing = 4.291665510839589
eps_r = 1.2
mu_r = 1.0
k0 = 1.0
theta_deg = 68.75493541569878
phi_deg = 22.918311805232932
";

const WOOD: &str = "radius = 0.5
spacing = 6.283185307179586
eps_r = 2.0
mu_r = 1.0
k0 = 1.0
theta_deg = 90.0
phi_deg = 0.0
";

fn grating(dir: &Path, args: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let out = Process::new(env!("CARGO_BIN_EXE_grating"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(err)?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn guards() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    std::fs::write(dir.path().join("wood.toml"), WOOD).map_err(err)?;
    let (code, _) = grating(dir.path(), &["coeffs", "--config", "wood.toml"])?;
    ensure(code == 3, || format!("Wood config exited {code}"))?;
    let spec = parse_run_spec(Some(("wood", WOOD)), &ConfigDocument::default()).map_err(err)?;
    match solve_grating(&spec.config, &SolveOptions::default()) {
        Err(SolverError::Lattice(LatticeError::WoodAnomaly { .. })) => {}
        other => return Err(format!("Wood config gave {other:?}")),
    }
    let opts = SolveOptions {
        method: Method::Neumann { order: 4 },
        ..SolveOptions::default()
    };
    match solve_grating(&common::strong_config(), &opts) {
        Err(SolverError::Divergence { ratio, order }) if ratio >= 1.0 => {
            Ok(format!("Wood exit 3, divergence ratio {ratio:.3} at order {order}"))
        }
        other => Err(format!("strong config gave {other:?}")),
    }
}

fn cli_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    std::fs::write(dir.path().join("cfg.toml"), WEAK).map_err(err)?;
    let args = ["coeffs", "--config", "cfg.toml", "--out", "out.csv"];
    let mut files = Vec::new();
    for _ in 0..2 {
        let (code, _) = grating(dir.path(), &args)?;
        ensure(code == 0, || format!("coeffs exited {code}"))?;
        files.push(std::fs::read(dir.path().join("out.csv")).map_err(err)?);
    }
    ensure(files[0] == files[1], || "repeated runs differ".into())?;
    let (code, stdout) = grating(dir.path(), &["coeffs", "--config", "cfg.toml", "--out", "out.csv"])?;
    ensure(code == 0 && stdout.is_empty(), || "unexpected stdout".into())?;
    let text = String::from_utf8(files.remove(0)).map_err(err)?;
    let parsed = parse_coefficients(&text).map_err(err)?;
    let spec = parse_run_spec(Some(("cfg", WEAK)), &ConfigDocument::default()).map_err(err)?;
    let sol = solve_grating(&spec.config, &SolveOptions::default()).map_err(err)?;
    ensure(parsed.normalized == sol.coeffs.coefficients, || "normalized coefficients differ".into())?;
    ensure(parsed.dimensional == sol.coeffs.dimensional(&spec.config), || "dimensional coefficients differ".into())?;
    Ok(format!("{} bytes identical, {} harmonics exact", text.len(), parsed.normalized.len()))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("dual-path single-cylinder equivalence", Duration::from_secs(1), dual_path),
        ("normal-incidence decoupling", Duration::from_secs(5), normal_incidence),
        ("isolated-cylinder limit", Duration::from_secs(30), isolated_limit),
        ("lattice-sum oracle agreement", Duration::from_secs(120), schlomilch_oracle),
        ("Neumann-vs-direct convergence", Duration::from_secs(10), neumann_vs_direct),
        ("grating-equation residual", Duration::from_secs(5), grating_residual),
        ("field-level checks", Duration::from_secs(10), field_checks),
        ("special-function suite", Duration::from_secs(5), special_functions),
        ("guard behaviours", Duration::from_secs(5), guards),
        ("CLI determinism and round trip", Duration::from_secs(5), cli_round_trip),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("{status} {} {name} ({:.3}s): {detail}", i + 1, elapsed.as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
