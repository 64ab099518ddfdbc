//! Melt-film closures for the close-contact melting velocity.
//!
//! The equilibrium closures assume the solid ahead of the source is already in
//! a steady sensible-heat balance and use the reduced latent heat. The
//! transient closures instead take the measured solid-side flux q_s and the
//! bare latent heat.

use thiserror::Error;

use crate::roots::{self, RootError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CcmError {
    #[error("invalid closure parameter {name} = {value}: {reason}")]
    Param { name: &'static str, value: f64, reason: &'static str },
    #[error("closure requires {0} mode")]
    Mode(&'static str),
    #[error(transparent)]
    Root(#[from] RootError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceMode {
    /// Prescribed source surface temperature T_w (K).
    Temperature { t_w: f64 },
    /// Prescribed heat-flow rate per unit area q_h (W/m²).
    Power { q_h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcmParams {
    pub rho_s: f64,
    pub rho_l: f64,
    pub cp_s: f64,
    pub cp_l: f64,
    pub kappa_l: f64,
    pub mu_l: f64,
    pub h_m: f64,
    pub t_m: f64,
    pub t_s: f64,
    pub r: f64,
    pub f_ex: f64,
    pub mode: SourceMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityRoot {
    pub velocity: f64,
    pub iterations: usize,
    /// Set when no positive velocity satisfies the closure.
    pub stalled: bool,
}

/// Residual tolerance for the nondimensional closure equations.
pub const CLOSURE_TOL: f64 = 1e-12;

pub fn f_ex_from_weight(mass: f64, gravity: f64) -> f64 {
    mass * gravity
}

impl CcmParams {
    pub fn validate(&self) -> Result<(), CcmError> {
        let positive = [
            ("rho_s", self.rho_s),
            ("rho_l", self.rho_l),
            ("cp_s", self.cp_s),
            ("cp_l", self.cp_l),
            ("kappa_l", self.kappa_l),
            ("mu_l", self.mu_l),
            ("h_m", self.h_m),
            ("T_m", self.t_m),
            ("T_s", self.t_s),
            ("R", self.r),
            ("F_ex", self.f_ex),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(CcmError::Param { name, value, reason: "must be positive" });
            }
        }
        if !(self.t_m > self.t_s) {
            return Err(CcmError::Param { name: "T_s", value: self.t_s, reason: "must be below T_m" });
        }
        match self.mode {
            SourceMode::Temperature { t_w } if !(t_w >= self.t_m) => {
                Err(CcmError::Param { name: "T_w", value: t_w, reason: "must not be below T_m" })
            }
            SourceMode::Power { q_h } if !(q_h > 0.0) || !q_h.is_finite() => {
                Err(CcmError::Param { name: "q_h", value: q_h, reason: "must be positive" })
            }
            _ => Ok(()),
        }
    }

    pub fn alpha_l(&self) -> f64 {
        self.kappa_l / (self.rho_l * self.cp_l)
    }

    /// Equilibrium sensible-heat flux into the solid at velocity `u`.
    pub fn sensible_flux(&self, u: f64) -> f64 {
        self.rho_s * u * self.cp_s * (self.t_m - self.t_s)
    }

    fn t_w(&self) -> Result<f64, CcmError> {
        match self.mode {
            SourceMode::Temperature { t_w } => Ok(t_w),
            SourceMode::Power { .. } => Err(CcmError::Mode("temperature")),
        }
    }

    fn q_h(&self) -> Result<f64, CcmError> {
        match self.mode {
            SourceMode::Power { q_h } => Ok(q_h),
            SourceMode::Temperature { .. } => Err(CcmError::Mode("power")),
        }
    }
}

pub fn reduced_latent_heat(p: &CcmParams) -> f64 {
    p.h_m + p.cp_s * (p.t_m - p.t_s)
}

/// Closed-form equilibrium velocity of a temperature-controlled source.
pub fn u_eq_temperature(p: &CcmParams) -> Result<f64, CcmError> {
    let dt = p.t_w()? - p.t_m;
    let num = (dt * p.kappa_l).powi(3) * p.f_ex;
    let den = 8.0 * p.mu_l * (p.rho_s * reduced_latent_heat(p) * p.r).powi(3);
    Ok((num / den).powf(0.25))
}

/// Force that makes the temperature-controlled equilibrium velocity equal `u`.
pub fn calibrate_f_ex(p: &CcmParams, u: f64) -> Result<f64, CcmError> {
    let dt = p.t_w()? - p.t_m;
    Ok(8.0 * p.mu_l * (p.rho_s * reduced_latent_heat(p) * p.r).powi(3) * u.powi(4) / (dt * p.kappa_l).powi(3))
}

pub fn shape_f(p: &CcmParams, u: f64) -> f64 {
    (p.rho_s / p.rho_l * p.r * u).powf(4.0 / 3.0) * (3.0 * std::f64::consts::PI * p.mu_l / (2.0 * p.f_ex)).powf(1.0 / 3.0)
}

/// Nondimensional power balance with melting sink `melt(u)` in W/m².
fn power_residual(p: &CcmParams, q_h: f64, u: f64, melt: f64) -> f64 {
    let f = shape_f(p, u) / (20.0 * p.alpha_l());
    melt / q_h * (7.0 * f + 1.0) + 3.0 * f - 1.0
}

fn power_bracket(p: &CcmParams, q_h: f64) -> f64 {
    10.0 * q_h / (p.rho_s * p.h_m)
}

pub fn u_eq_power(p: &CcmParams) -> Result<VelocityRoot, CcmError> {
    u_eq_power_with(p, CLOSURE_TOL)
}

fn u_eq_power_with(p: &CcmParams, tol: f64) -> Result<VelocityRoot, CcmError> {
    let q_h = p.q_h()?;
    let hs = reduced_latent_heat(p);
    let r = roots::solve_scalar(
        |u| power_residual(p, q_h, u, p.rho_s * u * hs),
        0.0,
        power_bracket(p, q_h),
        tol,
    )?;
    Ok(VelocityRoot { velocity: r.x.max(0.0), iterations: r.iterations, stalled: false })
}

/// Transient velocity of a temperature-controlled source given the
/// solid-side flux q_s.
pub fn u_transient_temperature(p: &CcmParams, q_s: f64) -> Result<VelocityRoot, CcmError> {
    u_transient_temperature_with(p, q_s, CLOSURE_TOL)
}

fn u_transient_temperature_with(p: &CcmParams, q_s: f64, tol: f64) -> Result<VelocityRoot, CcmError> {
    let dt = p.t_w()? - p.t_m;
    if !(q_s >= 0.0) {
        return Err(CcmError::Param { name: "q_s", value: q_s, reason: "must be non-negative" });
    }
    if dt == 0.0 {
        return Ok(VelocityRoot { velocity: 0.0, iterations: 0, stalled: true });
    }
    let c = 8.0 * p.mu_l * p.r.powi(3) / ((dt * p.kappa_l).powi(3) * p.f_ex);
    let g = |u: f64| 1.0 - c * u * (p.rho_s * u * p.h_m + q_s).powi(3);
    let r = roots::solve_scalar(g, 0.0, 10.0 * u_eq_temperature(p)?, tol)?;
    Ok(VelocityRoot { velocity: r.x.max(0.0), iterations: r.iterations, stalled: false })
}

/// Transient velocity of a power-controlled source given the solid-side flux
/// q_s. When q_s absorbs all supplied power the source stalls at U = 0.
pub fn u_transient_power(p: &CcmParams, q_s: f64) -> Result<VelocityRoot, CcmError> {
    u_transient_power_with(p, q_s, CLOSURE_TOL)
}

fn u_transient_power_with(p: &CcmParams, q_s: f64, tol: f64) -> Result<VelocityRoot, CcmError> {
    let q_h = p.q_h()?;
    if !(q_s >= 0.0) {
        return Err(CcmError::Param { name: "q_s", value: q_s, reason: "must be non-negative" });
    }
    if q_s >= q_h {
        return Ok(VelocityRoot { velocity: 0.0, iterations: 0, stalled: true });
    }
    let r = roots::solve_scalar(
        |u| power_residual(p, q_h, u, p.rho_s * p.h_m * u + q_s),
        0.0,
        power_bracket(p, q_h),
        tol,
    )?;
    Ok(VelocityRoot { velocity: r.x.max(0.0), iterations: r.iterations, stalled: false })
}

/// Equilibrium velocity for either source mode.
pub fn u_equilibrium(p: &CcmParams) -> Result<f64, CcmError> {
    u_equilibrium_with(p, CLOSURE_TOL)
}

/// As [`u_equilibrium`] with an explicit closure residual tolerance.
pub fn u_equilibrium_with(p: &CcmParams, tol: f64) -> Result<f64, CcmError> {
    match p.mode {
        SourceMode::Temperature { .. } => u_eq_temperature(p),
        SourceMode::Power { .. } => Ok(u_eq_power_with(p, tol)?.velocity),
    }
}

/// Transient velocity for either source mode.
pub fn u_transient(p: &CcmParams, q_s: f64) -> Result<VelocityRoot, CcmError> {
    u_transient_with(p, q_s, CLOSURE_TOL)
}

pub fn u_transient_with(p: &CcmParams, q_s: f64, tol: f64) -> Result<VelocityRoot, CcmError> {
    match p.mode {
        SourceMode::Temperature { .. } => u_transient_temperature_with(p, q_s, tol),
        SourceMode::Power { .. } => u_transient_power_with(p, q_s, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn mars(mode: SourceMode) -> CcmParams {
        CcmParams {
            rho_s: 921.3,
            rho_l: 1000.0,
            cp_s: 1877.2,
            cp_l: 4200.0,
            kappa_l: 0.6,
            mu_l: 0.0013,
            h_m: 333700.0,
            t_m: 273.0,
            t_s: 210.0,
            r: 0.08,
            f_ex: 25.0 * 3.7,
            mode,
        }
    }

    #[test]
    fn reduced_latent_heat_limits() {
        let mut p = mars(SourceMode::Temperature { t_w: 353.0 });
        assert!((reduced_latent_heat(&p) - 451963.6).abs() < 1e-6);
        p.t_s = p.t_m;
        assert_eq!(reduced_latent_heat(&p), p.h_m);
    }

    #[test]
    fn temperature_velocity_scaling() {
        let mut p = mars(SourceMode::Temperature { t_w: 353.0 });
        let u = u_eq_temperature(&p).unwrap();
        p.f_ex *= 16.0;
        let u16 = u_eq_temperature(&p).unwrap();
        assert!((u16 / u - 2.0).abs() < 1e-14);
        p.mode = SourceMode::Temperature { t_w: p.t_m };
        assert_eq!(u_eq_temperature(&p).unwrap(), 0.0);
    }

    #[test]
    fn calibration_inverts_closed_form() {
        let mut p = mars(SourceMode::Temperature { t_w: 353.0 });
        p.f_ex = calibrate_f_ex(&p, 2.6872e-4).unwrap();
        assert!((u_eq_temperature(&p).unwrap() / 2.6872e-4 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn shape_scaling() {
        let p = mars(SourceMode::Power { q_h: 5e4 });
        assert_eq!(shape_f(&p, 0.0), 0.0);
        let r = shape_f(&p, 8e-4) / shape_f(&p, 1e-4);
        assert!((r - 16.0).abs() < 1e-12);
    }

    #[test]
    fn power_stalls_when_flux_exceeds_supply() {
        let p = mars(SourceMode::Power { q_h: 5e4 });
        let r = u_transient_power(&p, 5e4).unwrap();
        assert!(r.stalled && r.velocity == 0.0);
    }

    #[test]
    fn mode_mismatch_is_an_error() {
        let p = mars(SourceMode::Power { q_h: 5e4 });
        assert!(matches!(u_eq_temperature(&p), Err(CcmError::Mode(_))));
    }
}
