//! Invariant checks run against one configuration.

use crate::commands::lattice_options;
use crate::spec::RunSpec;
use num_complex::Complex64;
use oblique_grating::cylinder::{Mat2, derive_wavenumbers, scatter_matrix, wait_matrix};
use oblique_grating::fields::{
    LocalPoint, Polarization, exterior_fields, floquet_phase, grating_amplitude, incident_ez,
    single_amplitude_from,
};
use oblique_grating::lattice::{LatticeOptions, Summation, schlomilch};
use oblique_grating::solver::{
    CoefficientSet, GratingSolution, SolveOptions, assemble, residual, solve_direct, solve_grating,
    solve_neumann,
};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Skip => "skip",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub value: f64,
    pub threshold: f64,
    pub note: String,
}

fn bounded(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        status: if value <= threshold { Status::Pass } else { Status::Fail },
        value,
        threshold,
        note: String::new(),
    }
}

fn skipped(name: &'static str, note: impl Into<String>) -> Check {
    Check {
        name,
        status: Status::Skip,
        value: f64::NAN,
        threshold: f64::NAN,
        note: note.into(),
    }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> Check {
    Check {
        name,
        status: Status::Fail,
        value: f64::NAN,
        threshold: f64::NAN,
        note: err.to_string(),
    }
}

fn attempt(name: &'static str, f: impl FnOnce() -> Result<Check, String>) -> Check {
    f().unwrap_or_else(|e| failed(name, e))
}

fn distance(a: &[Mat2], b: &[Mat2]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt()
}

fn max_entry(ms: &[Mat2]) -> f64 {
    ms.iter().flat_map(|m| m.iter()).map(|v| v.norm()).fold(0.0, f64::max)
}

/// Largest successive-difference ratio of the Neumann iterates from zero.
pub fn contraction(iterates: &[CoefficientSet]) -> f64 {
    let mut steps = vec![iterates[0].norm()];
    steps.extend(
        iterates
            .windows(2)
            .map(|w| distance(&w[1].coefficients, &w[0].coefficients)),
    );
    steps
        .windows(2)
        .map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] })
        .fold(0.0, f64::max)
}

pub fn run_checks(spec: &RunSpec, sol: &GratingSolution) -> Vec<Check> {
    let c = &spec.config;
    let n = sol.coeffs.truncation;
    let top = n as i64;
    let mut out = Vec::new();

    out.push(attempt("dual_path_single_cylinder", || {
        let mut worst: f64 = 0.0;
        for k in -top..=top {
            let a = scatter_matrix(k as i32, c).map_err(|e| e.to_string())?;
            let b = wait_matrix(k as i32, c).map_err(|e| e.to_string())?;
            let scale = a.norm();
            if scale > 0.0 {
                worst = worst.max((a - b).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale);
            }
        }
        Ok(bounded("dual_path_single_cylinder", worst, 1e-10))
    }));

    out.push(attempt("lattice_brute_force", || {
        let brute = LatticeOptions {
            summation: Summation::BruteForce,
            tol: 1e-6,
            ..lattice_options(spec)
        };
        let mut worst: f64 = 0.0;
        for k in 0..=2 {
            let fast = sol.lattice.get(k);
            let slow = schlomilch(k, c, &brute).map_err(|e| e.to_string())?.value;
            worst = worst.max((fast - slow).norm() / slow.norm());
        }
        Ok(bounded("lattice_brute_force", worst, 1e-6))
    }));

    let direct = match sol.coeffs.method {
        oblique_grating::solver::Method::Direct => Ok(sol.coeffs.clone()),
        _ => assemble(n, &sol.single, &sol.lattice).and_then(|s| solve_direct(&s)),
    };
    out.push(match &direct {
        Ok(d) => bounded("direct_residual", residual(d, &sol.single, &sol.lattice), 1e-10),
        Err(e) => failed("direct_residual", e),
    });

    out.push(attempt("neumann_envelope", || {
        let d = direct.as_ref().map_err(|e| e.to_string())?;
        let iterates: Vec<CoefficientSet> = (1..=4)
            .map(|k| solve_neumann(k, n, &sol.single, &sol.lattice))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let rho = contraction(&iterates);
        if rho >= 0.5 {
            return Ok(skipped("neumann_envelope", format!("contraction ratio {rho:.3} >= 0.5")));
        }
        let x1 = iterates[0].norm();
        let worst = iterates
            .iter()
            .zip(1..)
            .map(|(x, k)| {
                let gap = distance(&x.coefficients, &d.coefficients);
                let bound = 2.0 * rho.powi(k) * x1;
                if bound > 0.0 { gap / bound } else if gap == 0.0 { 0.0 } else { f64::INFINITY }
            })
            .fold(0.0, f64::max);
        let mut check = bounded("neumann_envelope", worst, 1.0);
        check.note = format!("gap / (2 rho^K |X1|), rho = {rho:e}");
        Ok(check)
    }));

    out.push(attempt("truncation_stability", || {
        let opts = SolveOptions {
            truncation: Some(n + 4),
            method: oblique_grating::solver::Method::Direct,
            lattice: lattice_options(spec),
        };
        let wider = solve_grating(c, &opts).map_err(|e| e.to_string())?;
        let d = direct.as_ref().map_err(|e| e.to_string())?;
        let kr_a = sol.single.kr_a;
        let inner = (top - kr_a.ceil() as i64 - 2).max(0);
        let scale = max_entry(&d.coefficients).max(f64::MIN_POSITIVE);
        let worst = (-inner..=inner)
            .map(|k| (d.get(k) - wider.coeffs.get(k)).iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
            / scale;
        Ok(bounded("truncation_stability", worst, 1e-8))
    }));

    let (_, cos_theta) = c.obliquity_sin_cos();
    out.push(if cos_theta == 0.0 {
        let scale = sol.coeffs.norm();
        let worst = sol
            .coeffs
            .coefficients
            .iter()
            .map(|m| m[(0, 1)].norm().max(m[(1, 0)].norm()))
            .fold(0.0, f64::max);
        bounded("normal_incidence_decoupling", worst / scale.max(f64::MIN_POSITIVE), 1e-12)
    } else {
        skipped("normal_incidence_decoupling", "oblique incidence")
    });

    out.push(attempt("incident_plane_wave", || {
        let w = derive_wavenumbers(c).map_err(|e| e.to_string())?;
        let r_top = (20.0 / w.kr).min(4.0 * c.spacing_d);
        let mut worst: f64 = 0.0;
        for i in 0..12 {
            let t = i as f64 / 11.0;
            let p = LocalPoint {
                s: i - 6,
                r: r_top * t,
                phi: TAU * t * 1.37,
                z: 0.3 * t,
            };
            let got = incident_ez(c, &p, 1e-14).map_err(|e| e.to_string())?;
            let x = p.r * p.phi.cos();
            let y = p.r * p.phi.sin() + p.s as f64 * c.spacing_d;
            let phase = w.kr * (x * c.cos_psi() + y * c.sin_psi()) - w.kz * p.z;
            let want = Complex64::from_polar(c.obliquity_sin_cos().0 * c.e0v, phase);
            worst = worst.max((got - want).norm() / want.norm());
        }
        Ok(bounded("incident_plane_wave", worst, 1e-10))
    }));

    out.push(attempt("floquet_phase", || {
        let phase = floquet_phase(c, 1).map_err(|e| e.to_string())?;
        let r = 0.5 * (c.radius_a + c.spacing_d);
        let mut worst: f64 = 0.0;
        for pol in [Polarization::TM, Polarization::TE] {
            let p0 = LocalPoint { s: 0, r, phi: 0.7, z: 0.1 };
            let p1 = LocalPoint { s: 1, ..p0 };
            let f0 = exterior_fields(sol, &p0, pol, spec.field_tol).map_err(|e| e.to_string())?;
            let f1 = exterior_fields(sol, &p1, pol, spec.field_tol).map_err(|e| e.to_string())?;
            worst = worst
                .max((f1.ez - f0.ez * phase).norm())
                .max((f1.hz - f0.hz * phase).norm());
        }
        Ok(bounded("floquet_phase", worst, 0.0))
    }));

    let psi = c.psi_i();
    out.push({
        let count = 4 * n + 1;
        let samples: Vec<(f64, Mat2)> = (0..count)
            .map(|k| {
                let phi = TAU * k as f64 / count as f64;
                (phi, grating_amplitude(phi, &sol.coeffs, psi).matrix)
            })
            .collect();
        let scale = max_entry(&sol.coeffs.coefficients).max(f64::MIN_POSITIVE);
        let worst = (-top..=top)
            .map(|m| {
                let rec: Mat2 = samples
                    .iter()
                    .map(|(phi, g)| g * Complex64::from_polar(1.0 / count as f64, -(m as f64) * phi))
                    .sum();
                (rec - sol.coeffs.get(m)).norm()
            })
            .fold(0.0, f64::max)
            / scale;
        bounded("amplitude_fourier_round_trip", worst, 1e-10)
    });

    out.push(attempt("amplitude_decomposition", || {
        let d = direct.as_ref().map_err(|e| e.to_string())?;
        let table: Vec<Mat2> = (-top..=top).map(|k| sol.single.get(k)).collect();
        let mut worst: f64 = 0.0;
        for phi in [0.0, 1.1, 2.9, 4.6] {
            let big = grating_amplitude(phi, d, psi).matrix;
            let small = single_amplitude_from(phi, psi, &table).matrix;
            let coupling: Mat2 = (-top..=top)
                .map(|k| {
                    let inner: Mat2 = (-top..=top)
                        .map(|m| d.get(m) * sol.lattice.get(k - m))
                        .sum();
                    sol.single.get(k) * inner * Complex64::from_polar(1.0, k as f64 * phi)
                })
                .sum();
            let scale = big.norm().max(small.norm()).max(f64::MIN_POSITIVE);
            worst = worst.max((big - small - coupling).norm() / scale);
        }
        Ok(bounded("amplitude_decomposition", worst, 1e-9))
    }));

    out
}
