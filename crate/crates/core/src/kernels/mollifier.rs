//! Space-time mollifiers ρ_ε(t, x) = ε^{-(d+2)} η(t/ε²) θ(x/ε).
//!
//! Both profiles share the temporal bump η(s) ∝ (1 - (s/τ₀)²)⁴ on |s| ≤ τ₀
//! with τ₀ = 1/4. The spatial factor is either the radial bump
//! θ(x) ∝ (1 - |x|²/R²)⁴ with R = 1/2, so that the support lies in the
//! parabolic unit ball, or a Gaussian of standard deviation 1/4 per axis.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::quad::{gauss_legendre, peaked_nodes};
use crate::error::KernelError;

pub const TAU0: f64 = 0.25;
pub const RADIUS: f64 = 0.5;
pub const GAUSS_SIGMA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    CompactBump,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub profile: Profile,
    pub eps: f64,
}

/// Surface area of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("dimension {d} not supported"),
    }
}

/// Radial Fourier factor: sin(x)/x in d = 3, J₀(x) in d = 2.
pub fn radial_wave(d: usize, x: f64) -> f64 {
    match d {
        3 => {
            if x.abs() < 1e-4 {
                1.0 - x * x / 6.0
            } else {
                x.sin() / x
            }
        }
        2 => libm::j0(x),
        _ => panic!("dimension {d} not supported"),
    }
}

fn bump_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(48))
}

fn small_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(12))
}

const ETA_NORM: f64 = 315.0 / 256.0 / TAU0;

/// Unscaled temporal profile.
pub fn eta(s: f64) -> f64 {
    let u = s / TAU0;
    if u.abs() >= 1.0 {
        0.0
    } else {
        ETA_NORM * (1.0 - u * u).powi(4)
    }
}

/// Autocorrelation H(v) = ∫η(u)η(u+v)du, supported on |v| ≤ 2τ₀.
pub fn eta_autocorr(v: f64) -> f64 {
    let v = v.abs();
    if v >= 2.0 * TAU0 {
        return 0.0;
    }
    let (a, b) = (-TAU0, TAU0 - v);
    let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
    let (x, w) = small_rule();
    x.iter().zip(w).map(|(x, w)| w * h * eta(c + h * x) * eta(c + h * x + v)).sum()
}

/// ln ∫η(u) e^{a u} du, evaluated without overflow for large |a|.
pub fn eta_log_mgf(a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    // η is even, so the transform is even in a
    let a = a.abs();
    let nodes = peaked_nodes(-TAU0, TAU0, TAU0, (1.0 / a).min(TAU0), TAU0 / 2.0);
    let s: f64 = nodes.iter().map(|(u, w)| w * eta(*u) * (a * (u - TAU0)).exp()).sum();
    a * TAU0 + s.ln()
}

fn spatial_norm(d: usize) -> f64 {
    static N: OnceLock<[f64; 4]> = OnceLock::new();
    let n = N.get_or_init(|| {
        let mut out = [0.0; 4];
        for (dd, slot) in out.iter_mut().enumerate().skip(1) {
            let (x, w) = bump_rule();
            let s: f64 = x
                .iter()
                .zip(w)
                .map(|(x, w)| {
                    let r = 0.5 * RADIUS * (x + 1.0);
                    0.5 * RADIUS * w * r.powi(dd as i32 - 1) * (1.0 - r * r / (RADIUS * RADIUS)).powi(4)
                })
                .sum();
            *slot = 1.0 / (sphere_area(dd) * s);
        }
        out
    });
    n[d]
}

impl MollifierSpec {
    pub fn new(profile: Profile, eps: f64) -> Result<Self, KernelError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(KernelError::Parameter(format!("mollifier scale must be positive, got {eps}")));
        }
        Ok(MollifierSpec { profile, eps })
    }

    pub fn bump(eps: f64) -> Self {
        MollifierSpec { profile: Profile::CompactBump, eps }
    }

    /// Unscaled spatial profile at radius r.
    pub fn theta(&self, d: usize, r: f64) -> f64 {
        match self.profile {
            Profile::CompactBump => {
                if r >= RADIUS {
                    0.0
                } else {
                    spatial_norm(d) * (1.0 - r * r / (RADIUS * RADIUS)).powi(4)
                }
            }
            Profile::Gaussian => {
                let s2 = GAUSS_SIGMA * GAUSS_SIGMA;
                (2.0 * PI * s2).powf(-(d as f64) / 2.0) * (-r * r / (2.0 * s2)).exp()
            }
        }
    }

    /// Spatial support radius of the unscaled profile (Gaussian: 8σ).
    pub fn theta_radius(&self) -> f64 {
        match self.profile {
            Profile::CompactBump => RADIUS,
            Profile::Gaussian => 8.0 * GAUSS_SIGMA,
        }
    }

    /// Fourier transform of the unscaled spatial profile at |k| = q.
    pub fn theta_hat(&self, d: usize, q: f64) -> f64 {
        match self.profile {
            Profile::Gaussian => (-0.5 * GAUSS_SIGMA * GAUSS_SIGMA * q * q).exp(),
            Profile::CompactBump => {
                let (x, w) = bump_rule();
                let c = spatial_norm(d) * sphere_area(d);
                x.iter()
                    .zip(w)
                    .map(|(x, w)| {
                        let r = 0.5 * RADIUS * (x + 1.0);
                        let p = (1.0 - r * r / (RADIUS * RADIUS)).powi(4);
                        0.5 * RADIUS * w * r.powi(d as i32 - 1) * p * radial_wave(d, q * r)
                    })
                    .sum::<f64>()
                    * c
            }
        }
    }

    /// Scaled mollifier ρ_ε(t, x) with |x| = r.
    pub fn rho(&self, d: usize, t: f64, r: f64) -> f64 {
        let e = self.eps;
        eta(t / (e * e)) * self.theta(d, r / e) / e.powi(d as i32 + 2)
    }

    /// Temporal support half-width of ρ_ε.
    pub fn time_radius(&self) -> f64 {
        TAU0 * self.eps * self.eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::quad::adaptive;

    #[test]
    fn profiles_are_normalised() {
        let (v, _) = adaptive(eta, -TAU0, TAU0, 1e-14, 1e-14, 200);
        assert!((v - 1.0).abs() < 1e-12);
        for d in [2, 3] {
            for p in [Profile::CompactBump, Profile::Gaussian] {
                let m = MollifierSpec { profile: p, eps: 1.0 };
                assert!((m.theta_hat(d, 0.0) - 1.0).abs() < 1e-10, "{p:?} d={d}");
                let (v, _) = adaptive(
                    |r| sphere_area(d) * r.powi(d as i32 - 1) * m.theta(d, r),
                    0.0,
                    m.theta_radius(),
                    1e-14,
                    1e-13,
                    400,
                );
                assert!((v - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn autocorrelation_and_mgf() {
        let (v, _) = adaptive(eta_autocorr, -2.0 * TAU0, 2.0 * TAU0, 1e-14, 1e-13, 400);
        assert!((v - 1.0).abs() < 1e-10);
        for a in [0.5, 3.0, 40.0, 900.0] {
            let (m, _) = adaptive(|u| eta(u) * (a * (u - TAU0)).exp(), -TAU0, TAU0, 1e-300, 1e-13, 2000);
            let want = a * TAU0 + m.ln();
            assert!((eta_log_mgf(a) - want).abs() < 1e-9, "a = {a}");
        }
    }

    #[test]
    fn bump_transform_matches_quadrature_in_three_dimensions() {
        let m = MollifierSpec::bump(1.0);
        for q in [1.0, 7.0, 20.0] {
            let (v, _) = adaptive(
                |r| 4.0 * PI * r * r * m.theta(3, r) * radial_wave(3, q * r),
                0.0,
                RADIUS,
                1e-14,
                1e-12,
                400,
            );
            assert!((m.theta_hat(3, q) - v).abs() < 1e-10);
        }
    }
}
