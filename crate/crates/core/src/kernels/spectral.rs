//! Fourier-in-space, exact-in-time evaluation of the Q-functions.
//!
//! All kernels here are built from the time-truncated heat kernel
//! G(t, x)·1_{0<t<1}, whose spatial transform is e^{-λt}, λ = |k|².
//! For a spatial mode the time autocorrelation of the truncated kernel is
//!
//! A_k(w) = (e^{-λ|w|} - e^{-λ(2-|w|)}) / (2λ),   |w| < 1,
//!
//! and with a separable mollifier the transform of Q₀ᵋ(τ, ·) is
//! θ̂(εk)² (H_ε ∗ A_k)(τ), H being the autocorrelation of the time profile.
//! Q₁ and Q₂ follow by convolving A_k with Q and with its autocorrelation W.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::mollifier::{eta_autocorr, eta_log_mgf, radial_wave, sphere_area, MollifierSpec, Profile, TAU0};
use super::qfun::{QSpec, QTable};
use super::quad::{gl16, gl8, peaked_nodes, push_panel};

/// θ̂(q)² is below 1e-16 of its peak beyond this argument.
pub const Q_CUT: f64 = 40.0;

const THETA_STEP: f64 = 0.004;
const MGF_STEP: f64 = 0.02;
const MGF_MAX: f64 = Q_CUT * Q_CUT * 1.05;

/// Cubic interpolation of an even function tabulated on x ≥ 0.
fn catmull_rom(tab: &[f64], x: f64) -> f64 {
    let n = tab.len();
    let j = (x.floor() as isize).clamp(0, n as isize - 2) as usize;
    let u = x - j as f64;
    let p1 = tab[j];
    let p2 = tab[j + 1];
    let p0 = if j == 0 { tab[1] } else { tab[j - 1] };
    let p3 = if j + 2 >= n { 2.0 * p2 - p1 } else { tab[j + 2] };
    p1 + 0.5
        * u
        * (p2 - p0 + u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + u * (3.0 * (p1 - p2) + p3 - p0)))
}

fn theta_table(d: usize, profile: Profile) -> &'static [f64] {
    static T: [OnceLock<Vec<f64>>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let idx = (d - 2) * 2 + usize::from(profile == Profile::Gaussian);
    T[idx].get_or_init(|| {
        let m = MollifierSpec { profile, eps: 1.0 };
        let n = (1.2 * Q_CUT / THETA_STEP) as usize + 4;
        (0..n).map(|j| m.theta_hat(d, j as f64 * THETA_STEP)).collect()
    })
}

fn mgf_table() -> &'static [f64] {
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    T.get_or_init(|| {
        let n = (MGF_MAX / MGF_STEP) as usize + 4;
        (0..n).map(|j| eta_log_mgf(j as f64 * MGF_STEP)).collect()
    })
}

/// ln of the Laplace transform of the unscaled H at a = λε².
pub fn log_h_hat(a: f64) -> f64 {
    if a > MGF_MAX {
        return 2.0 * eta_log_mgf(a);
    }
    2.0 * catmull_rom(mgf_table(), a / MGF_STEP)
}

/// Time autocorrelation of the truncated heat kernel for one mode.
pub fn a_k(lam: f64, w: f64) -> f64 {
    let w = w.abs();
    if w >= 1.0 {
        return 0.0;
    }
    let tail = 2.0 * (1.0 - w);
    if lam < 1e-12 {
        return 0.5 * tail * (1.0 - 0.5 * lam * tail) * (-lam * w).exp();
    }
    (-lam * w).exp() * -(-lam * tail).exp_m1() / (2.0 * lam)
}

struct QData {
    table: QTable,
    ch: usize,
    /// W(u) = ∫Q(s)Q(s+u)ds on u = j·h, j ≥ 0 (W is even)
    w: Vec<f64>,
    wh: f64,
    end: f64,
}

impl QData {
    fn new(q: &QSpec) -> Self {
        let table = q.table();
        let ch = q.channel;
        let end = table.support_end();
        let wh = 2e-3;
        let n = (end / wh).ceil() as usize + 1;
        let w = (0..n)
            .map(|j| {
                let u = j as f64 * wh;
                let mut nodes = Vec::new();
                let m = (((end - u) / 0.02).ceil() as usize).max(1);
                for p in 0..m {
                    let a = u + (end - u) * p as f64 / m as f64;
                    let b = u + (end - u) * (p + 1) as f64 / m as f64;
                    push_panel(gl8(), a, b, &mut nodes);
                }
                nodes.iter().map(|(s, wt)| wt * table.eval(ch, *s) * table.eval(ch, s - u)).sum()
            })
            .collect();
        QData { table, ch, w, wh, end }
    }

    fn w_at(&self, u: f64) -> f64 {
        let u = u.abs();
        if u >= self.end {
            return 0.0;
        }
        catmull_rom(&self.w, u / self.wh)
    }
}

/// Evaluates Q₀ᵋ, Q₁ᵋ, Q₂ᵋ for one mollifier scale.
pub struct SpectralEngine {
    pub d: usize,
    pub mollifier: MollifierSpec,
    q: Option<QData>,
}

impl SpectralEngine {
    pub fn new(d: usize, mollifier: MollifierSpec, q: Option<&QSpec>) -> Self {
        SpectralEngine { d, mollifier, q: q.map(QData::new) }
    }

    fn eps(&self) -> f64 {
        self.mollifier.eps
    }

    /// θ̂(εk)².
    pub fn theta2(&self, k: f64) -> f64 {
        let q = self.eps() * k;
        if q > 1.2 * Q_CUT {
            return 0.0;
        }
        let v = catmull_rom(theta_table(self.d, self.mollifier.profile), q / THETA_STEP);
        v * v
    }

    /// Half-width of the support of H_ε.
    fn h_radius(&self) -> f64 {
        2.0 * TAU0 * self.eps() * self.eps()
    }

    /// (H_ε ∗ A_k)(τ).
    pub fn r_k(&self, lam: f64, tau: f64) -> f64 {
        let tau = tau.abs();
        let hr = self.h_radius();
        let e2 = self.eps() * self.eps();
        if tau >= hr && tau <= 1.0 - hr {
            let lh = log_h_hat(lam * e2);
            let tail = 2.0 * (1.0 - tau);
            if lam < 1e-12 {
                return a_k(lam, tau) * lh.exp();
            }
            return (lh - lam * tau).exp() * -(-lam * tail).exp_m1() / (2.0 * lam);
        }
        if tau > 1.0 + hr {
            return 0.0;
        }
        let scale = (1.0 / lam.max(1e-300)).min(hr / 4.0);
        let mut s = 0.0;
        for (v, w) in peaked_nodes(-hr, hr, tau, scale, hr / 8.0) {
            s += w * eta_autocorr(v / e2) / e2 * a_k(lam, tau - v);
        }
        // the kink of A at |w| = 1 sits inside the window near τ = 1
        s
    }

    /// ∫ Q(s) A_k(t + s) ds.
    fn b_k(&self, lam: f64, t: f64) -> f64 {
        let qd = self.q.as_ref().expect("Q data");
        let lo = (-1.0 - t).max(0.0);
        let hi = (1.0 - t).min(qd.end);
        if hi <= lo {
            return 0.0;
        }
        let scale = (1.0 / lam.max(1e-300)).clamp(1e-14, 0.05);
        peaked_nodes(lo, hi, -t, scale, 0.05)
            .iter()
            .map(|(s, w)| w * qd.table.eval(qd.ch, *s) * a_k(lam, t + s))
            .sum()
    }

    /// ∫ W(u) A_k(t + u) du.
    fn d_k(&self, lam: f64, t: f64) -> f64 {
        let qd = self.q.as_ref().expect("Q data");
        let lo = (-1.0 - t).max(-qd.end);
        let hi = (1.0 - t).min(qd.end);
        if hi <= lo {
            return 0.0;
        }
        let scale = (1.0 / lam.max(1e-300)).clamp(1e-14, 0.05);
        let mut s = 0.0;
        // split at the kink of W at u = 0
        for (a, b) in [(lo, hi.min(0.0)), (lo.max(0.0), hi)] {
            if b > a {
                for (u, w) in peaked_nodes(a, b, -t, scale, 0.05) {
                    s += w * qd.w_at(u) * a_k(lam, t + u);
                }
            }
        }
        s
    }

    fn k_max(&self, i: usize, t: f64) -> f64 {
        let kt = Q_CUT / self.eps();
        let t = t.abs();
        match i {
            0 => {
                let eff = t - self.h_radius();
                if eff > 0.0 {
                    kt.min((40.0 / eff).sqrt())
                } else {
                    kt
                }
            }
            1 => {
                if t > 0.0 {
                    kt.min((40.0 / t).sqrt().max(60.0))
                } else {
                    kt.min(60.0)
                }
            }
            _ => kt.min(60.0),
        }
    }

    /// Quadrature nodes in k adapted to r ≤ r_max: geometric panels from
    /// k = 1/4 up to the oscillation scale, uniform beyond.
    fn k_nodes(&self, kmax: f64, r_max: f64) -> Vec<(f64, f64)> {
        let width = (2.0 / r_max.max(1e-12)).min(0.5 / self.eps());
        k_panels(kmax, width)
    }

    /// Mode coefficients C_k(t) (without θ̂²) at the given k nodes.
    fn mode_values(&self, i: usize, t: f64, ks: &[(f64, f64)]) -> Vec<f64> {
        match i {
            0 => ks.iter().map(|(k, _)| self.r_k(k * k, t)).collect(),
            _ => {
                if self.q.is_none() {
                    return vec![0.0; ks.len()];
                }
                // smooth in k after removing the e^{-λ|t|} decay and the
                // λ^{-2} tail; sample sparsely and interpolate
                let kmax = ks.last().map(|x| x.0).unwrap_or(0.0);
                let m = 160;
                let smax = (1.0 + kmax).ln();
                let damp = |lam: f64| if i == 1 { (lam * t.max(0.0)).min(600.0) } else { 0.0 };
                let samples: Vec<f64> = (0..=m)
                    .map(|j| {
                        let k = (smax * j as f64 / m as f64).exp() - 1.0;
                        let lam = k * k;
                        let v = if i == 1 { self.b_k(lam, t) } else { self.d_k(lam, t) };
                        v * (1.0 + lam).powi(2) * damp(lam).exp()
                    })
                    .collect();
                ks.iter()
                    .map(|(k, _)| {
                        let lam = k * k;
                        let x = (1.0 + k).ln() / smax * m as f64;
                        catmull_rom(&samples, x) / (1.0 + lam).powi(2) * (-damp(lam)).exp()
                    })
                    .collect()
            }
        }
    }

    /// Qᵢᵋ(t, r) at several radii for one time.
    pub fn q_profile(&self, i: usize, t: f64, rs: &[f64]) -> Vec<f64> {
        let r_max = rs.iter().cloned().fold(0.0, f64::max);
        let kmax = self.k_max(i, t);
        let ks = self.k_nodes(kmax, r_max);
        let vals = self.mode_values(i, t, &ks);
        let pref = sphere_area(self.d) / (2.0 * PI).powi(self.d as i32);
        let weights: Vec<f64> = ks
            .iter()
            .zip(&vals)
            .map(|((k, w), v)| w * k.powi(self.d as i32 - 1) * self.theta2(*k) * v * pref)
            .collect();
        rs.iter()
            .map(|&r| ks.iter().zip(&weights).map(|((k, _), w)| w * radial_wave(self.d, k * r)).sum())
            .collect()
    }

    pub fn q_value(&self, i: usize, t: f64, r: f64) -> f64 {
        self.q_profile(i, t, &[r])[0]
    }

    /// C₁(ε) = ∫K_ε² = Q₀ᵋ(0); returns (value, error estimate).
    pub fn c1(&self) -> (f64, f64) {
        let kmax = Q_CUT / self.eps();
        let pref = sphere_area(self.d) / (2.0 * PI).powi(self.d as i32);
        let run = |width: f64| -> f64 {
            k_panels(kmax, width)
                .iter()
                .map(|(k, w)| w * pref * k.powi(self.d as i32 - 1) * self.theta2(*k) * self.r_k(k * k, 0.0))
                .sum()
        };
        let fine = run(0.25 / self.eps());
        let coarse = run(0.5 / self.eps());
        (fine, (fine - coarse).abs())
    }
}

/// GL16 panels on [0, kmax] with geometric refinement towards k = 0 and
/// maximal width `width`.
fn k_panels(kmax: f64, width: f64) -> Vec<(f64, f64)> {
    let mut br = vec![0.0];
    let mut k = 0.25f64.min(width);
    while k < kmax && k < width {
        br.push(k);
        k *= 2.0;
    }
    let start = *br.last().unwrap();
    let n = (((kmax - start) / width).ceil() as usize).max(1);
    for j in 1..=n {
        br.push(start + (kmax - start) * j as f64 / n as f64);
    }
    let mut nodes = Vec::with_capacity(16 * br.len());
    for w in br.windows(2) {
        push_panel(gl16(), w[0], w[1], &mut nodes);
    }
    nodes
}
