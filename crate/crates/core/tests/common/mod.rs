#![allow(dead_code)]

pub mod oracle;

use oblique_grating::cylinder::GratingConfig;
use rand::{Rng, SeedableRng, rngs::StdRng};
use std::f64::consts::FRAC_PI_2;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A random config with moderate contrast and size.
pub fn random_config(rng: &mut StdRng) -> GratingConfig {
    let radius_a = rng.random_range(0.05..0.5);
    GratingConfig {
        radius_a,
        spacing_d: 2.0 * radius_a * rng.random_range(1.2..4.0),
        eps_r: rng.random_range(1.1..6.0),
        mu_r: rng.random_range(1.0..2.0),
        k0: rng.random_range(0.5..6.0),
        theta_i: rng.random_range(0.3..FRAC_PI_2),
        phi_i: rng.random_range(0.0..FRAC_PI_2),
        e0v: 1.0,
        h0v: 1.0,
    }
}

/// The weak-scattering reference used across solver and field tests.
pub fn weak_config() -> GratingConfig {
    let theta_i: f64 = 1.2;
    let k0 = 1.0;
    let kr = k0 * theta_i.sin();
    let spacing_d = 4.0 / kr;
    GratingConfig {
        radius_a: 0.1 * spacing_d,
        spacing_d,
        eps_r: 1.2,
        mu_r: 1.0,
        k0,
        theta_i,
        phi_i: 0.4,
        e0v: 1.0,
        h0v: 1.0,
    }
}

/// Large, high-contrast cylinders where the orders-of-scattering series
/// diverges.
pub fn strong_config() -> GratingConfig {
    GratingConfig {
        radius_a: 0.45,
        spacing_d: 1.0,
        eps_r: 8.0,
        mu_r: 1.0,
        k0: 1.0,
        theta_i: 1.3,
        phi_i: 0.3,
        e0v: 1.0,
        h0v: 1.0,
    }
}
