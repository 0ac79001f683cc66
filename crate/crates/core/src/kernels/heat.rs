//! Heat kernel and its compactly supported truncation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::mollifier::sphere_area;
use super::quad::{gl16, push_panel};
use crate::error::KernelError;

/// G(t, x) = (4πt)^{-d/2} exp(-|x|²/4t) for t > 0, zero otherwise.
pub fn heat_kernel(d: usize, t: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().take(d).map(|v| v * v).sum();
    heat_kernel_r2(d, t, r2)
}

/// Heat kernel as a function of |x|².
pub fn heat_kernel_r2(d: usize, t: f64, r2: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r2 / (4.0 * t)).exp()
}

fn smooth_step_raw(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Smooth cutoff in s = |x|² + t: 1 for s ≤ 1/2, 0 for s ≥ 1.
pub fn cutoff(s: f64) -> f64 {
    let a = smooth_step_raw(1.0 - s);
    let b = smooth_step_raw(s - 0.5);
    if a + b == 0.0 {
        return 0.0;
    }
    a / (a + b)
}

/// Smooth bump supported in 1/2 < s < 1, peak value 1 at s = 3/4.
pub fn annulus_bump(s: f64) -> f64 {
    if s <= 0.5 || s >= 1.0 {
        return 0.0;
    }
    (16.0 - 1.0 / ((s - 0.5) * (1.0 - s))).exp()
}

/// Which kernel a [`KernelSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Heat,
    Truncated,
    Mollified,
    Convolved,
    MollifiedConvolved,
    Remainder,
}

/// The truncated kernel K = G·(χ + b·Σ c_j t^{a_j}|x|^{2b_j}).
///
/// Supported in {t > 0, |x|² + t < 1}, equal to G on |x|² + t ≤ 1/2, and
/// with vanishing moments up to parabolic degree ζ.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub dim: usize,
    pub zeta: u32,
    /// exponents (a, b) of the radial correction monomials t^a |x|^{2b}
    pub basis: Vec<(u32, u32)>,
    pub coeffs: Vec<f64>,
    /// largest relative moment residual after the solve
    pub residual: f64,
}

/// Quadrature of ∫_0^1 dt ∫ dx G(t, x) f(t, |x|²) using r = √t ρ, which
/// removes the singularity at the origin.
pub fn heat_weighted_integral<F: Fn(f64, f64) -> f64>(d: usize, f: F) -> f64 {
    let mut tn = Vec::new();
    let tb: Vec<f64> = (0..=40).map(|j| j as f64 / 40.0).collect();
    for w in tb.windows(2) {
        push_panel(gl16(), w[0], w[1], &mut tn);
    }
    let norm = sphere_area(d) * (4.0 * PI).powf(-(d as f64) / 2.0);
    let mut total = 0.0;
    for &(t, wt) in &tn {
        let rho_max = ((1.0 - t) / t).sqrt().min(14.0);
        let mut rn = Vec::new();
        let m = 24;
        for j in 0..m {
            push_panel(gl16(), rho_max * j as f64 / m as f64, rho_max * (j + 1) as f64 / m as f64, &mut rn);
        }
        let mut inner = 0.0;
        for &(rho, wr) in &rn {
            let r2 = t * rho * rho;
            inner += wr * rho.powi(d as i32 - 1) * (-rho * rho / 4.0).exp() * f(t, r2);
        }
        total += wt * norm * inner;
    }
    total
}

/// Radial monomials t^a |x|^{2b} of parabolic degree 2a + 2b ≤ ζ.
fn radial_monomials(zeta: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for a in 0..=zeta / 2 {
        for b in 0..=(zeta / 2 - a) {
            out.push((a, b));
        }
    }
    out
}

/// Builds the truncated kernel with vanishing moments to degree ζ.
pub fn build_truncated_kernel(d: usize, zeta: u32) -> Result<KernelSpec, KernelError> {
    if zeta < 2 {
        return Err(KernelError::Parameter(format!("moment order must be at least 2, got {zeta}")));
    }
    if d != 2 && d != 3 {
        return Err(KernelError::Parameter(format!("dimension {d} not supported")));
    }
    // Odd moments in x vanish by symmetry, and even ones reduce to the
    // radial monomials below.
    let mons = radial_monomials(zeta);
    let m = mons.len();
    let mono = |(a, b): (u32, u32), t: f64, r2: f64| t.powi(a as i32) * r2.powi(b as i32);
    let mut mat = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut scale = vec![0.0; m];
    for (i, &p) in mons.iter().enumerate() {
        rhs[i] = -heat_weighted_integral(d, |t, r2| cutoff(t + r2) * mono(p, t, r2));
        scale[i] = heat_weighted_integral(d, |t, r2| (cutoff(t + r2) * mono(p, t, r2)).abs());
        for (j, &q) in mons.iter().enumerate() {
            mat[(i, j)] =
                heat_weighted_integral(d, |t, r2| annulus_bump(t + r2) * mono(q, t, r2) * mono(p, t, r2));
        }
    }
    let svd = mat.clone().svd(true, true);
    let c = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| KernelError::Parameter(format!("moment solve failed: {e}")))?;
    let mut spec = KernelSpec {
        kind: KernelKind::Truncated,
        dim: d,
        zeta,
        basis: mons.clone(),
        coeffs: c.iter().copied().collect(),
        residual: 0.0,
    };
    let mut worst: f64 = 0.0;
    for (i, &p) in mons.iter().enumerate() {
        let v = heat_weighted_integral(d, |t, r2| spec.multiplier(t, r2) * mono(p, t, r2));
        worst = worst.max(v.abs() / scale[i]);
    }
    spec.residual = worst;
    if worst > 1e-6 {
        return Err(KernelError::Construction { residual: worst, tol: 1e-6 });
    }
    Ok(spec)
}

impl KernelSpec {
    /// The untruncated heat kernel.
    pub fn heat(d: usize) -> Self {
        KernelSpec { kind: KernelKind::Heat, dim: d, zeta: 0, basis: vec![], coeffs: vec![], residual: 0.0 }
    }

    /// K / G as a function of (t, |x|²); meaningful for t > 0.
    pub fn multiplier(&self, t: f64, r2: f64) -> f64 {
        let s = t + r2;
        let b = annulus_bump(s);
        let corr: f64 = if b == 0.0 {
            0.0
        } else {
            self.basis
                .iter()
                .zip(&self.coeffs)
                .map(|(&(a, bb), c)| c * t.powi(a as i32) * r2.powi(bb as i32))
                .sum()
        };
        cutoff(s) + b * corr
    }

    /// Kernel value at (t, x) with |x|² = r2.
    pub fn eval_r2(&self, t: f64, r2: f64) -> f64 {
        let g = heat_kernel_r2(self.dim, t, r2);
        match self.kind {
            KernelKind::Heat => g,
            KernelKind::Remainder => {
                if t <= 0.0 {
                    0.0
                } else {
                    g * (1.0 - self.multiplier(t, r2))
                }
            }
            _ => {
                if t <= 0.0 || t + r2 >= 1.0 {
                    0.0
                } else {
                    g * self.multiplier(t, r2)
                }
            }
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.eval_r2(t, x.iter().take(self.dim).map(|v| v * v).sum())
    }

    /// The smooth remainder R = G - K.
    pub fn remainder(&self) -> KernelSpec {
        KernelSpec { kind: KernelKind::Remainder, ..self.clone() }
    }

    /// ∫ K(z) t^a |x|^{2b} dz.
    pub fn radial_moment(&self, a: u32, b: u32) -> f64 {
        heat_weighted_integral(self.dim, |t, r2| self.multiplier(t, r2) * t.powi(a as i32) * r2.powi(b as i32))
    }
}
