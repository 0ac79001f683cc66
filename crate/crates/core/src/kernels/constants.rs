//! Renormalisation constants and the integrals I_ij = ∫K Qᵢ Qⱼ.

use std::f64::consts::PI;

use super::heat::{build_truncated_kernel, KernelSpec};
use super::mollifier::{radial_wave, sphere_area, MollifierSpec};
use super::qfun::QSpec;
use super::quad::{gauss_legendre, gl16, push_panel};
use super::spectral::{SpectralEngine, Q_CUT};
use crate::cubic::CubicPolynomial;
use crate::error::KernelError;

/// Outer kernel used in the constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// heat kernel restricted to 0 < t < 1
    G,
    /// compactly supported kernel with vanishing moments
    K,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsRecord {
    pub eps: f64,
    pub dim: usize,
    pub c1: f64,
    pub c2: f64,
    /// symmetric, indices 0..3
    pub i: [[f64; 3]; 3],
    pub err_c1: f64,
    pub err_c2: f64,
    pub err_i: [[f64; 3]; 3],
}

/// Time nodes on (0, 1) refined logarithmically towards t = 0.
fn time_nodes(eps: f64, per_octave: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(per_octave);
    let t_min = 1e-3 * eps * eps;
    let mut br = vec![0.0];
    let mut t = t_min;
    while t < 0.5 {
        br.push(t);
        t *= 2.0;
    }
    br.push(0.5);
    br.push(0.75);
    br.push(1.0);
    let mut nodes = Vec::new();
    for w in br.windows(2) {
        push_panel(&rule, w[0], w[1], &mut nodes);
    }
    nodes
}

fn rho_nodes() -> Vec<(f64, f64)> {
    let mut nodes = Vec::new();
    for j in 0..7 {
        push_panel(gl16(), 2.0 * j as f64, 2.0 * (j + 1) as f64, &mut nodes);
    }
    nodes
}

/// Integrates ∫ K(z) Qᵢ(z) Qⱼ(z) dz for all pairs; `outer` is K/G.
fn i_matrix(
    eng: &SpectralEngine,
    with_q: bool,
    tn: &[(f64, f64)],
    outer: &dyn Fn(f64, f64) -> f64,
) -> [[f64; 3]; 3] {
    let d = eng.d;
    let rn = rho_nodes();
    let norm = sphere_area(d) * (4.0 * PI).powf(-(d as f64) / 2.0);
    let nq = if with_q { 3 } else { 1 };
    let mut out = [[0.0; 3]; 3];
    for &(t, wt) in tn {
        let rs: Vec<f64> = rn.iter().map(|(rho, _)| t.sqrt() * rho).collect();
        let profiles: Vec<Vec<f64>> = (0..nq).map(|i| eng.q_profile(i, t, &rs)).collect();
        for (b, &(rho, wr)) in rn.iter().enumerate() {
            let w = wt * wr * norm * rho.powi(d as i32 - 1) * (-rho * rho / 4.0).exp() * outer(t, rs[b] * rs[b]);
            if w == 0.0 {
                continue;
            }
            for i in 0..nq {
                for j in i..nq {
                    out[i][j] += w * profiles[i][b] * profiles[j][b];
                }
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            out[i][j] = out[j][i];
        }
    }
    out
}

/// Correction ∫K_ε² - ∫G_ε² for the truncated kernel, from the spatial
/// transform of D = G·1_{t<1} - K. Time mollification of the bounded D is
/// neglected, an O(ε²) effect.
fn c1_k_correction(eng: &SpectralEngine, k: &KernelSpec) -> f64 {
    let d = eng.d;
    let mut tn = Vec::new();
    for j in 0..40 {
        push_panel(gl16(), j as f64 / 40.0, (j + 1) as f64 / 40.0, &mut tn);
    }
    let kmax = (Q_CUT / eng.mollifier.eps).min(60.0);
    let mut kn = Vec::new();
    for j in 0..60 {
        push_panel(gl16(), kmax * j as f64 / 60.0, kmax * (j + 1) as f64 / 60.0, &mut kn);
    }
    let sd = sphere_area(d);
    // D̂(t, k) on the grid
    let mut cross = vec![0.0; kn.len()];
    let mut sq = vec![0.0; kn.len()];
    for &(t, wt) in &tn {
        let r_lo = (0.5 - t).max(0.0).sqrt();
        let r_hi = r_lo + 14.0 * t.sqrt() + 1.0;
        let mut rn = Vec::new();
        for j in 0..12 {
            let a = r_lo + (r_hi - r_lo) * j as f64 / 12.0;
            let b = r_lo + (r_hi - r_lo) * (j + 1) as f64 / 12.0;
            push_panel(gl16(), a, b, &mut rn);
        }
        let dvals: Vec<f64> = rn
            .iter()
            .map(|(r, w)| {
                let g = super::heat::heat_kernel_r2(d, t, r * r);
                w * sd * r.powi(d as i32 - 1) * (g - k.eval_r2(t, r * r))
            })
            .collect();
        for (m, (kk, _)) in kn.iter().enumerate() {
            let dh: f64 = rn.iter().zip(&dvals).map(|((r, _), v)| v * radial_wave(d, kk * r)).sum();
            cross[m] += wt * (-kk * kk * t).exp() * dh;
            sq[m] += wt * dh * dh;
        }
    }
    let pref = sd / (2.0 * PI).powi(d as i32);
    kn.iter()
        .enumerate()
        .map(|(m, (kk, w))| w * pref * kk.powi(d as i32 - 1) * eng.theta2(*kk) * (sq[m] - 2.0 * cross[m]))
        .sum()
}

/// C₁(ε), C₂(ε) = 2I₀₀ and I_ij(ε) for one scale.
pub fn constants(
    eps: f64,
    d: usize,
    q: Option<&QSpec>,
    basis: Basis,
    mollifier: Option<MollifierSpec>,
) -> Result<ConstantsRecord, KernelError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(KernelError::Parameter(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    if d != 2 && d != 3 {
        return Err(KernelError::Parameter(format!("dimension {d} not supported")));
    }
    let m = mollifier.map(|m| MollifierSpec { eps, ..m }).unwrap_or(MollifierSpec::bump(eps));
    let eng = SpectralEngine::new(d, m, q);
    let (mut c1, err_c1) = eng.c1();
    let kspec = match basis {
        Basis::G => None,
        Basis::K => Some(build_truncated_kernel(d, 2)?),
    };
    if let Some(k) = &kspec {
        c1 += c1_k_correction(&eng, k);
    }
    let outer = |t: f64, r2: f64| match &kspec {
        None => 1.0,
        Some(k) => {
            if t + r2 >= 1.0 {
                0.0
            } else {
                k.multiplier(t, r2)
            }
        }
    };
    let fine = i_matrix(&eng, q.is_some(), &time_nodes(eps, 6), &outer);
    let coarse = i_matrix(&eng, q.is_some(), &time_nodes(eps, 4), &outer);
    let mut err_i = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            err_i[i][j] = (fine[i][j] - coarse[i][j]).abs();
        }
    }
    Ok(ConstantsRecord {
        eps,
        dim: d,
        c1,
        c2: 2.0 * fine[0][0],
        i: fine,
        err_c1,
        err_c2: 2.0 * err_i[0][0],
        err_i,
    })
}

/// Only C₁(ε) (cheap; no Q-functions).
pub fn c1_only(eps: f64, d: usize, mollifier: Option<MollifierSpec>) -> (f64, f64) {
    let m = mollifier.map(|m| MollifierSpec { eps, ..m }).unwrap_or(MollifierSpec::bump(eps));
    SpectralEngine::new(d, m, None).c1()
}

/// Least-squares fit y ≈ a + b·x.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub max_residual: f64,
    /// max(y) - min(y)
    pub range: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let max_residual = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).abs()).fold(0.0, f64::max);
    let range = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
    LinearFit { intercept, slope, max_residual, range }
}

/// Fit of values against ln(1/ε).
pub fn log_fit(eps: &[f64], y: &[f64]) -> LinearFit {
    let x: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    linear_fit(&x, y)
}

/// The constants entering the renormalised equation.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledC {
    /// C(ε)
    pub c: f64,
    /// constant counterterm
    pub c0: f64,
    /// coefficient of u
    pub c1: f64,
    /// coefficients of v_i
    pub c2: Vec<f64>,
}

fn num(p: &crate::poly::Poly) -> Result<f64, KernelError> {
    use num_traits::ToPrimitive;
    if p.is_zero() {
        return Ok(0.0);
    }
    p.as_constant()
        .and_then(|c| c.to_f64())
        .ok_or_else(|| KernelError::Parameter(format!("coefficient {p} is not numeric")))
}

/// C(ε) = 3C₁ + 9γ₁C₂ (d = 3) or 3C₁ (d = 2), and
/// (C₀, C₁, C₂ᵢ) = (-β₁/3, -γ₁, -γ₂ᵢ/3)·C(ε).
pub fn assemble_c(f: &CubicPolynomial, d: usize, k: &ConstantsRecord) -> Result<AssembledC, KernelError> {
    let b1 = num(&f.beta1())?;
    let g1 = num(&f.gamma1())?;
    let c = match d {
        3 => 3.0 * k.c1 + 9.0 * g1 * k.c2,
        2 => 3.0 * k.c1,
        _ => return Err(KernelError::Parameter(format!("dimension {d} not supported"))),
    };
    let mut c2 = Vec::with_capacity(f.n);
    for i in 1..=f.n {
        c2.push(-num(&f.gamma2(i))? / 3.0 * c);
    }
    Ok(AssembledC { c, c0: -b1 / 3.0 * c, c1: -g1 * c, c2 })
}
