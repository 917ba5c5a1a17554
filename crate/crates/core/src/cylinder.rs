//! Isolated dielectric cylinder at oblique incidence.
//!
//! Time dependence is `exp(-i omega t)` throughout. Signs of every
//! coefficient below follow from that choice; results written for the
//! opposite convention differ by complex conjugation.

use crate::specfun::{self, SpecFunError};
use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// 2x2 complex block. Rows are (E, H), columns are (TM, TE).
pub type Mat2 = Matrix2<Complex64>;

/// Free-space wave impedance `xi_0 = sqrt(mu_0 / eps_0)` in ohms.
pub const XI0: f64 = 376.730_313_668;
/// Free-space wave admittance `eta_0 = 1 / xi_0` in siemens.
pub const ETA0: f64 = 1.0 / XI0;

/// Relative size below which a denominator is treated as singular.
pub const SINGULARITY_RTOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingConfig {
    /// Cylinder radius in metres.
    pub radius_a: f64,
    /// Centre-to-centre spacing in metres.
    pub spacing_d: f64,
    pub eps_r: f64,
    pub mu_r: f64,
    /// Free-space wavenumber in rad/m.
    pub k0: f64,
    /// Angle between the incident wavevector and the cylinder axis.
    pub theta_i: f64,
    /// In-plane incidence angle measured from the x axis.
    pub phi_i: f64,
    /// TM incident amplitude in V/m.
    pub e0v: f64,
    /// TE incident amplitude in A/m.
    pub h0v: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("field `{0}` is not a finite number")]
    NotFinite(&'static str),
    #[error("radius_a must be positive, got {0}")]
    Radius(f64),
    #[error("cylinders overlap: spacing_d = {spacing} must exceed 2 * radius_a = {diameter}")]
    Overlap { spacing: f64, diameter: f64 },
    #[error("k0 must be positive, got {0}")]
    Wavenumber(f64),
    #[error("theta_i = {0} rad lies outside (0, pi/2]")]
    Obliquity(f64),
    #[error("eps_r and mu_r must be positive, got eps_r = {eps_r}, mu_r = {mu_r}")]
    Material { eps_r: f64, mu_r: f64 },
    #[error(
        "evanescent interior: eps_r * mu_r = {product} does not exceed cos^2(theta_i) = {cos2}"
    )]
    EvanescentInterior { product: f64, cos2: f64 },
}

impl GratingConfig {
    /// `psi_i = pi + phi_i`, the propagation direction of the incident wave.
    pub fn psi_i(&self) -> f64 {
        PI + self.phi_i
    }

    /// `sin(psi_i) = -sin(phi_i)`, exact zero at `phi_i = 0`.
    pub fn sin_psi(&self) -> f64 {
        -self.phi_i.sin()
    }

    /// `cos(psi_i) = -cos(phi_i)`.
    pub fn cos_psi(&self) -> f64 {
        -self.phi_i.cos()
    }

    /// `(sin, cos)` of the obliquity, with the cosine exactly zero at
    /// normal incidence.
    pub fn obliquity_sin_cos(&self) -> (f64, f64) {
        if (self.theta_i - FRAC_PI_2).abs() <= 1e-15 {
            (1.0, 0.0)
        } else {
            self.theta_i.sin_cos()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let named = [
            ("radius_a", self.radius_a),
            ("spacing_d", self.spacing_d),
            ("eps_r", self.eps_r),
            ("mu_r", self.mu_r),
            ("k0", self.k0),
            ("theta_i", self.theta_i),
            ("phi_i", self.phi_i),
            ("e0v", self.e0v),
            ("h0v", self.h0v),
        ];
        if let Some((name, _)) = named.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ConfigError::NotFinite(name));
        }
        if self.radius_a <= 0.0 {
            return Err(ConfigError::Radius(self.radius_a));
        }
        if self.spacing_d <= 2.0 * self.radius_a {
            return Err(ConfigError::Overlap {
                spacing: self.spacing_d,
                diameter: 2.0 * self.radius_a,
            });
        }
        if self.k0 <= 0.0 {
            return Err(ConfigError::Wavenumber(self.k0));
        }
        if !(self.theta_i > 0.0 && self.theta_i <= FRAC_PI_2 + 1e-15) {
            return Err(ConfigError::Obliquity(self.theta_i));
        }
        if self.eps_r <= 0.0 || self.mu_r <= 0.0 {
            return Err(ConfigError::Material {
                eps_r: self.eps_r,
                mu_r: self.mu_r,
            });
        }
        let cos2 = self.obliquity_sin_cos().1.powi(2);
        let product = self.eps_r * self.mu_r;
        if product <= cos2 {
            return Err(ConfigError::EvanescentInterior { product, cos2 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wavenumbers {
    pub k0: f64,
    pub kr: f64,
    pub kz: f64,
    pub k1: f64,
}

pub fn derive_wavenumbers(config: &GratingConfig) -> Result<Wavenumbers, ConfigError> {
    config.validate()?;
    let (s, c) = config.obliquity_sin_cos();
    let kr = config.k0 * s;
    let product = config.eps_r * config.mu_r;
    // Matched media: keep k1 and kr bitwise equal so the contrast terms cancel.
    let k1 = if product == 1.0 {
        kr
    } else {
        config.k0 * (product - c * c).sqrt()
    };
    Ok(Wavenumbers {
        k0: config.k0,
        kr,
        kz: config.k0 * c,
        k1,
    })
}

/// Coupling constant `F = (mu eps - 1) cos(theta) / (mu eps - cos^2 theta)`.
pub fn coupling_f(config: &GratingConfig) -> Result<f64, ConfigError> {
    config.validate()?;
    let c = config.obliquity_sin_cos().1;
    let me = config.mu_r * config.eps_r;
    Ok((me - 1.0) * c / (me - c * c))
}

/// Which denominator vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominator {
    /// `W^{JH}` with `eps_r`.
    WjhEps,
    /// `W^{JH}` with `mu_r`.
    WjhMu,
    /// `1 + b_eps b_mu`.
    Coupling,
    /// The closed-form resonance parameter `T`.
    Resonance,
}

impl std::fmt::Display for Denominator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Denominator::WjhEps => "W^JH(eps_r)",
            Denominator::WjhMu => "W^JH(mu_r)",
            Denominator::Coupling => "1 + b_eps*b_mu",
            Denominator::Resonance => "T",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CylinderError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("singular denominator {which} at n = {n}: |value| = {magnitude:e}, scale = {scale:e}")]
    Singular {
        n: i32,
        which: Denominator,
        magnitude: f64,
        scale: f64,
    },
}

/// Per-harmonic ingredients of the single-cylinder matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderBlocks {
    pub n: i32,
    pub c: Complex64,
    pub a_eps: Complex64,
    pub a_mu: Complex64,
    pub b_eps: Complex64,
    pub b_mu: Complex64,
    pub w_jh_eps: Complex64,
    pub w_jh_mu: Complex64,
    pub f: f64,
    pub eta0: f64,
    pub xi0: f64,
}

/// Bessel values entering one harmonic: exterior at `k_r a`, interior at
/// `k_1 a`.
struct Radial {
    x: f64,
    x1: f64,
    j: f64,
    jp: f64,
    h: Complex64,
    hp: Complex64,
    j1: f64,
    j1p: f64,
}

fn radial(n: i32, w: &Wavenumbers, a: f64) -> Result<Radial, SpecFunError> {
    let x = w.kr * a;
    let x1 = w.k1 * a;
    let out = specfun::cyl_pair(n, x)?;
    let inn = specfun::cyl_pair(n, x1)?;
    Ok(Radial {
        x,
        x1,
        j: out.j,
        jp: out.jp,
        h: out.h(),
        hp: out.hp(),
        j1: inn.j,
        j1p: inn.jp,
    })
}

fn check(n: i32, which: Denominator, value: Complex64, scale: f64) -> Result<(), CylinderError> {
    let magnitude = value.norm();
    if !(magnitude > SINGULARITY_RTOL * scale) {
        return Err(CylinderError::Singular {
            n,
            which,
            magnitude,
            scale,
        });
    }
    Ok(())
}

pub fn blocks(n: i32, config: &GratingConfig) -> Result<CylinderBlocks, CylinderError> {
    let w = derive_wavenumbers(config)?;
    let f = coupling_f(config)?;
    let r = radial(n, &w, config.radius_a)?;
    let ratio = w.kr / w.k1;
    let wjj = |zeta: f64| r.j1 * r.jp - zeta * ratio * r.j1p * r.j;
    let wjh = |zeta: f64| -> (Complex64, f64) {
        let lhs = r.hp * r.j1;
        let rhs = r.h * (zeta * ratio * r.j1p);
        (lhs - rhs, lhs.norm() + rhs.norm())
    };
    let (w_jh_eps, s_eps) = wjh(config.eps_r);
    let (w_jh_mu, s_mu) = wjh(config.mu_r);
    check(n, Denominator::WjhEps, w_jh_eps, s_eps)?;
    check(n, Denominator::WjhMu, w_jh_mu, s_mu)?;

    let common = Complex64::i() * (n as f64 * f / r.x) * r.j1 * r.h;
    let (b_eps, b_mu) = if n == 0 || f == 0.0 {
        (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    } else {
        (common * XI0 / w_jh_eps, common * ETA0 / w_jh_mu)
    };
    Ok(CylinderBlocks {
        n,
        c: r.j / r.h,
        a_eps: wjj(config.eps_r) / w_jh_eps,
        a_mu: wjj(config.mu_r) / w_jh_mu,
        b_eps,
        b_mu,
        w_jh_eps,
        w_jh_mu,
        f,
        eta0: ETA0,
        xi0: XI0,
    })
}

/// Assemble the normalized single-scattering matrix from its blocks.
pub fn matrix_from_blocks(b: &CylinderBlocks) -> Result<Mat2, CylinderError> {
    let bb = b.b_eps * b.b_mu;
    let den = bb + 1.0;
    check(b.n, Denominator::Coupling, den, 1.0 + bb.norm())?;
    let gamma_em = -(b.a_eps + bb * b.c) / den;
    let gamma_me = -(b.a_mu + bb * b.c) / den;
    let small_em = b.b_mu * (b.a_eps - b.c) / den;
    let small_me = b.b_eps * (b.a_mu - b.c) / den;
    Ok(Mat2::new(gamma_em, -small_me, small_em, gamma_me))
}

/// Normalized single-scattering matrix of harmonic `n`.
pub fn scatter_matrix(n: i32, config: &GratingConfig) -> Result<Mat2, CylinderError> {
    matrix_from_blocks(&blocks(n, config)?)
}

/// The same matrix from the classical closed forms for an isolated cylinder.
/// Kept as an independent cross-check of [`scatter_matrix`].
pub fn wait_matrix(n: i32, config: &GratingConfig) -> Result<Mat2, CylinderError> {
    let w = derive_wavenumbers(config)?;
    let r = radial(n, &w, config.radius_a)?;
    if r.j1 == 0.0 {
        return Err(CylinderError::Singular {
            n,
            which: Denominator::Resonance,
            magnitude: f64::INFINITY,
            scale: 0.0,
        });
    }
    let ext = r.hp / (r.h * r.x);
    let int = r.j1p / (r.x1 * r.j1);
    let m_eps = ext - config.eps_r * int;
    let m_mu = ext - config.mu_r * int;
    let q = n as f64 * config.obliquity_sin_cos().1 * (1.0 / (r.x1 * r.x1) - 1.0 / (r.x * r.x));
    let t = m_eps * m_mu - q * q;
    check(n, Denominator::Resonance, t, (m_eps * m_mu).norm() + q * q)?;

    let xh = r.h * r.x;
    let lead = Complex64::new(0.0, 2.0) / (PI * t * xh * xh);
    let c = r.j / r.h;
    Ok(Mat2::new(
        -c + lead * m_mu,
        lead * Complex64::i() * (-XI0 * q),
        lead * Complex64::i() * (ETA0 * q),
        -c + lead * m_eps,
    ))
}

/// Dimensional single-scattering coefficients: columns scaled by the
/// incident amplitudes times `sin(theta_i)`.
pub fn dimensional_scatter(n: i32, config: &GratingConfig) -> Result<Mat2, CylinderError> {
    Ok(polarization_scale(&scatter_matrix(n, config)?, config))
}

/// Right-multiply by `diag(E0v sin(theta), H0v sin(theta))`.
pub fn polarization_scale(m: &Mat2, config: &GratingConfig) -> Mat2 {
    let s = config.obliquity_sin_cos().0;
    let mut out = *m;
    out.column_mut(0).scale_mut(config.e0v * s);
    out.column_mut(1).scale_mut(config.h0v * s);
    out
}

/// Table of `scatter_matrix` for `n = -n_max ..= n_max`, index `n + n_max`.
pub fn scatter_table(n_max: usize, config: &GratingConfig) -> Result<Vec<Mat2>, CylinderError> {
    let top = n_max as i32;
    (-top..=top).map(|n| scatter_matrix(n, config)).collect()
}
