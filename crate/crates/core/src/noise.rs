//! Space-time white noise on the periodic lattice, its mollification, the
//! stochastic convolutions χ_ε and χ^Q_ε, and Wick powers.
//!
//! Noise values are never stored by default: every cell is a pure function
//! of (seed, time slice, site), so any slice can be regenerated on demand and
//! fields shared across an ε-sweep cost nothing to keep around.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::NoiseError;
use crate::kernels::mollifier::{eta, TAU0};
use crate::kernels::{MollifierSpec, QSpec, SpectralEngine};
use crate::lattice::Lattice;

pub const GENERATOR_ID: &str = "chacha8-boxmuller-v1";
pub const FORMAT_VERSION: u32 = 1;

/// Space-time lattice: `nt` time cells of width `dt` over 𝕋^d with `n`
/// nodes per axis, plus `pad` extra slices before and after for temporal
/// mollification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    pub nt: usize,
    pub dt: f64,
    pub pad: usize,
}

impl Grid {
    pub fn new(d: usize, n: usize, nt: usize, dt: f64, pad: usize) -> Result<Self, NoiseError> {
        if d == 0 || d > 3 {
            return Err(NoiseError::Grid(format!("dimension {d} not supported")));
        }
        if n < 2 || nt == 0 {
            return Err(NoiseError::Grid(format!("need n >= 2 and nt >= 1, got n = {n}, nt = {nt}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(NoiseError::Grid(format!("time step must be positive, got {dt}")));
        }
        Ok(Grid { d, n, nt, dt, pad })
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Stored slices including padding.
    pub fn slices(&self) -> usize {
        self.nt + 2 * self.pad
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.d, self.n)
    }

    /// Padding needed by a mollifier of scale ε.
    pub fn padding_for(eps: f64, dt: f64) -> usize {
        (TAU0 * eps * eps / dt).floor() as usize
    }
}

/// White noise ξ on a grid; cell averages are N(0, 1/(Δt·Δx^d)).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub grid: Grid,
    pub seed: u64,
    pub generator_id: String,
}

pub fn sample_white_noise(grid: &Grid, seed: u64) -> NoiseField {
    NoiseField { grid: grid.clone(), seed, generator_id: GENERATOR_ID.to_string() }
}

fn gaussian(a: u64, b: u64) -> f64 {
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Standard normal for (seed, stream, index); the stream is the time slice.
fn cell_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

impl NoiseField {
    /// Cell standard deviation 1/√(Δt·Δx^d).
    pub fn sigma(&self) -> f64 {
        (self.grid.dt * self.grid.dx().powi(self.grid.d as i32)).powf(-0.5)
    }

    /// Storage slice `s`; time cell s - pad, so s = pad covers [0, Δt).
    pub fn slice(&self, s: usize) -> Vec<f64> {
        let mut r = cell_rng(self.seed, s as u64);
        let sig = self.sigma();
        (0..self.grid.cells()).map(|_| sig * gaussian(r.next_u64(), r.next_u64())).collect()
    }

    /// One cell, generated without touching any other.
    pub fn cell(&self, s: usize, site: usize) -> f64 {
        let mut r = cell_rng(self.seed, s as u64);
        r.set_word_pos(4 * site as u128);
        self.sigma() * gaussian(r.next_u64(), r.next_u64())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.grid.slices()).flat_map(|s| self.slice(s)).collect()
    }

    /// SHA-256 of all values in file order.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for s in 0..self.grid.slices() {
            for v in self.slice(s) {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn to_field(&self) -> Field {
        let g = &self.grid;
        Field {
            meta: FieldMeta {
                format_version: FORMAT_VERSION,
                d: g.d,
                n: g.n,
                nt: g.slices(),
                components: 1,
                dt: g.dt,
                dx: g.dx(),
                seed: Some(self.seed),
                eps: None,
                generator_id: self.generator_id.clone(),
            },
            values: self.values(),
        }
    }
}

/// Discrete form of ρ_ε: normalised temporal taps w_o, |o| ≤ m, and the
/// spatial Fourier multiplier θ̂(2π|k|ε) per lattice mode.
#[derive(Debug, Clone)]
pub struct Mollification {
    pub eps: Option<f64>,
    taps: Vec<f64>,
    multiplier: Vec<f64>,
}

impl Mollification {
    pub fn new(grid: &Grid, spec: &MollifierSpec) -> Result<Self, NoiseError> {
        let eps = spec.eps;
        let guard = 2.0 * grid.dx();
        if eps < guard * (1.0 - 1e-12) {
            return Err(NoiseError::Resolution { eps, guard });
        }
        let m = Grid::padding_for(eps, grid.dt);
        if m > grid.pad {
            return Err(NoiseError::Grid(format!("epsilon {eps} needs {m} padding slices, grid has {}", grid.pad)));
        }
        let e2 = eps * eps;
        let mut taps: Vec<f64> = (-(m as i64)..=m as i64).map(|o| eta(o as f64 * grid.dt / e2)).collect();
        let s: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|w| *w /= s);
        let lat = grid.lattice();
        let mut cache: HashMap<u64, f64> = HashMap::new();
        let multiplier = (0..lat.len())
            .map(|i| {
                let k2 = lat.k2(i);
                *cache.entry(k2 as u64).or_insert_with(|| spec.theta_hat(grid.d, 2.0 * PI * k2.sqrt() * eps))
            })
            .collect();
        Ok(Mollification { eps: Some(eps), taps, multiplier })
    }

    /// No mollification: the raw lattice noise.
    pub fn identity(grid: &Grid) -> Self {
        Mollification { eps: None, taps: vec![1.0], multiplier: vec![1.0; grid.cells()] }
    }

    pub fn half_width(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }
}

/// Sliding window of transformed noise slices, shared by any number of
/// mollifications advancing together in time.
pub struct NoiseStream<'a> {
    field: &'a NoiseField,
    lattice: Lattice,
    first: usize,
    hats: VecDeque<Vec<Complex64>>,
}

impl<'a> NoiseStream<'a> {
    pub fn new(field: &'a NoiseField) -> Self {
        NoiseStream { field, lattice: field.grid.lattice(), first: 0, hats: VecDeque::new() }
    }

    fn raw_hat(&mut self, s: usize) -> &[Complex64] {
        assert!(s >= self.first, "noise slice {s} already released");
        while self.first + self.hats.len() <= s {
            let next = self.first + self.hats.len();
            let h = self.lattice.forward_real(&self.field.slice(next));
            self.hats.push_back(h);
        }
        &self.hats[s - self.first]
    }

    /// Fourier coefficients of ξ^ε on time cell j (0-based). Calls must
    /// not go back in time; slices no longer reachable are dropped.
    pub fn mollified_hat(&mut self, m: &Mollification, j: usize) -> Vec<Complex64> {
        let pad = self.field.grid.pad;
        while self.first < j && !self.hats.is_empty() {
            self.hats.pop_front();
            self.first += 1;
        }
        if self.hats.is_empty() {
            self.first = self.first.max(j);
        }
        let hw = m.half_width();
        let mut out = vec![Complex64::new(0.0, 0.0); self.lattice.len()];
        for (i, w) in m.taps.iter().enumerate() {
            // ρ is even in time, so tap o multiplies ξ at j - o
            let s = pad + j + hw - i;
            let h = self.raw_hat(s);
            out.iter_mut().zip(h).for_each(|(o, x)| *o += *w * x);
        }
        out.iter_mut().zip(&m.multiplier).for_each(|(o, k)| *o *= *k);
        out
    }
}

/// Metadata stored beside every field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub format_version: u32,
    pub d: usize,
    pub n: usize,
    /// number of time slices
    pub nt: usize,
    pub components: usize,
    pub dt: f64,
    pub dx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub generator_id: String,
}

/// Lattice values, time slowest, component fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub meta: FieldMeta,
    pub values: Vec<f64>,
}

impl Field {
    pub fn cells(&self) -> usize {
        self.meta.n.pow(self.meta.d as u32)
    }

    pub fn slice_len(&self) -> usize {
        self.cells() * self.meta.components
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        let l = self.slice_len();
        &self.values[t * l..(t + 1) * l]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes `<stem>.bin` (little-endian f64) and `<stem>.toml`.
    pub fn write(&self, stem: &Path) -> Result<(), NoiseError> {
        let io = |e: std::io::Error| NoiseError::Io(e.to_string());
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(stem.with_extension("bin"), bytes).map_err(io)?;
        let meta = toml::to_string(&self.meta).map_err(|e| NoiseError::Io(e.to_string()))?;
        std::fs::write(stem.with_extension("toml"), meta).map_err(io)
    }

    pub fn read(stem: &Path) -> Result<Field, NoiseError> {
        let io = |e: std::io::Error| NoiseError::Io(e.to_string());
        let meta: FieldMeta = toml::from_str(&std::fs::read_to_string(stem.with_extension("toml")).map_err(io)?)
            .map_err(|e| NoiseError::Io(e.to_string()))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(NoiseError::Io(format!("unsupported format version {}", meta.format_version)));
        }
        let bytes = std::fs::read(stem.with_extension("bin")).map_err(io)?;
        let expect = meta.nt * meta.n.pow(meta.d as u32) * meta.components * 8;
        if bytes.len() != expect {
            return Err(NoiseError::Io(format!("expected {expect} bytes, found {}", bytes.len())));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Field { meta, values })
    }
}

/// ξ^ε = ρ_ε ∗ ξ on the `nt` unpadded time cells.
pub fn mollify_noise(xi: &NoiseField, spec: &MollifierSpec) -> Result<Field, NoiseError> {
    let m = Mollification::new(&xi.grid, spec)?;
    Ok(apply_mollification(xi, &m))
}

pub fn apply_mollification(xi: &NoiseField, m: &Mollification) -> Field {
    let g = &xi.grid;
    let lat = g.lattice();
    let mut stream = NoiseStream::new(xi);
    let mut values = Vec::with_capacity(g.nt * g.cells());
    for j in 0..g.nt {
        values.extend(lat.inverse_real(stream.mollified_hat(m, j)));
    }
    Field {
        meta: FieldMeta {
            format_version: FORMAT_VERSION,
            d: g.d,
            n: g.n,
            nt: g.nt,
            components: 1,
            dt: g.dt,
            dx: g.dx(),
            seed: Some(xi.seed),
            eps: m.eps,
            generator_id: xi.generator_id.clone(),
        },
        values,
    }
}

/// One exponential step per mode: χ̂ ← aχ̂ + bξ̂ with a = e^{-λΔt},
/// b = (1 - a)/λ (b = Δt on the zero mode).
pub fn ou_coefficients(lam: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = lam.iter().map(|l| (-l * dt).exp()).collect();
    let b = lam.iter().map(|&l| if l == 0.0 { dt } else { -(-l * dt).exp_m1() / l }).collect();
    (a, b)
}

pub enum ConvolutionKernel<'a> {
    Heat,
    /// K^Q = Q ∗ K in time
    Kq(&'a QSpec),
}

/// χ = K ∗ ξ^ε from zero data at t = 0. The result holds `nt + 1` slices,
/// slice j being the value at t = jΔt.
pub fn stochastic_convolution(xi: &Field, kernel: ConvolutionKernel) -> Result<Field, NoiseError> {
    let meta = &xi.meta;
    if meta.components != 1 {
        return Err(NoiseError::Grid("noise must be scalar".into()));
    }
    let lat = Lattice::new(meta.d, meta.n);
    let (a, b) = ou_coefficients(&lat.eigenvalues(), meta.dt);
    let cells = lat.len();
    let mut chi = vec![Complex64::new(0.0, 0.0); cells];
    let mut values = vec![0.0; cells];
    for j in 0..meta.nt {
        let x = lat.forward_real(xi.slice(j));
        for i in 0..cells {
            chi[i] = a[i] * chi[i] + b[i] * x[i];
        }
        values.extend(lat.inverse_real(chi.clone()));
    }
    let mut out = Field {
        meta: FieldMeta { nt: meta.nt + 1, ..meta.clone() },
        values,
    };
    if let ConvolutionKernel::Kq(q) = kernel {
        out = time_convolve_q(&out, q);
    }
    Ok(out)
}

/// (Q ∗ χ)(t_J) = ∫Q(s)χ(t_J - s)ds by the trapezoid rule on the nodes.
fn time_convolve_q(chi: &Field, q: &QSpec) -> Field {
    let table = q.table();
    let n = q.n();
    let dt = chi.meta.dt;
    let cells = chi.cells();
    let nt = chi.meta.nt;
    let qs: Vec<Vec<f64>> = (0..nt).map(|m| (0..n).map(|c| table.eval(c, m as f64 * dt)).collect()).collect();
    let mut values = vec![0.0; nt * cells * n];
    for jj in 0..nt {
        for m in 0..=jj {
            let w = if m == 0 || m == jj { 0.5 * dt } else { dt };
            let src = chi.slice(jj - m);
            let dst = &mut values[jj * cells * n..(jj + 1) * cells * n];
            for (site, &x) in src.iter().enumerate() {
                for c in 0..n {
                    dst[site * n + c] += w * qs[m][c] * x;
                }
            }
        }
    }
    Field { meta: FieldMeta { components: n, ..chi.meta.clone() }, values }
}

/// :χ²: = χ² - c.
pub fn wick_square(chi: &Field, c: f64) -> Field {
    Field { meta: chi.meta.clone(), values: chi.values.iter().map(|x| x * x - c).collect() }
}

/// :χ³: = χ³ - 3cχ.
pub fn wick_cube(chi: &Field, c: f64) -> Field {
    Field { meta: chi.meta.clone(), values: chi.values.iter().map(|x| x * x * x - 3.0 * c * x).collect() }
}

/// Exact covariance E[χ(t_J, x)χ(t_J, x + z)] of the discrete heat
/// convolution of the mollified lattice noise after `steps` steps, at
/// lattice lags z. This is the torus-and-lattice counterpart of Q₀ᵋ.
pub fn lattice_covariance(grid: &Grid, m: &Mollification, steps: usize, lags: &[Vec<i64>]) -> Vec<f64> {
    let lat = grid.lattice();
    let lam = lat.eigenvalues();
    let (a, b) = ou_coefficients(&lam, grid.dt);
    let sig2 = 1.0 / (grid.dt * grid.dx().powi(grid.d as i32));
    let big_n = lat.len() as f64;
    let hw = m.half_width() as i64;
    let mut by_lambda: HashMap<u64, f64> = HashMap::new();
    let mut spec = vec![0.0; lat.len()];
    for i in 0..lat.len() {
        let key = lam[i].to_bits();
        let s = *by_lambda.entry(key).or_insert_with(|| {
            // c_r = b Σ_j a^{J-1-j} w_{j-r} over raw slices r
            let lo = -hw;
            let hi = steps as i64 - 1 + hw;
            let mut total = 0.0;
            for r in lo..=hi {
                let mut c = 0.0;
                for (ti, w) in m.taps.iter().enumerate() {
                    let j = r + ti as i64 - hw;
                    if j >= 0 && j < steps as i64 {
                        c += w * a[i].powi((steps as i64 - 1 - j) as i32);
                    }
                }
                total += (b[i] * c).powi(2);
            }
            total
        });
        spec[i] = big_n * sig2 * m.multiplier[i].powi(2) * s;
    }
    lags.iter()
        .map(|z| {
            (0..lat.len())
                .map(|i| {
                    let k = lat.wavevector(i);
                    let phase: f64 = k.iter().zip(z).map(|(k, z)| (k * z) as f64).sum::<f64>() / grid.n as f64;
                    spec[i] * (2.0 * PI * phase).cos()
                })
                .sum::<f64>()
                / (big_n * big_n)
        })
        .collect()
}

/// Q₀ᵋ(0) periodised over the torus: Σ_k θ̂(2π|k|ε)² R_k(0) on the integer
/// lattice, with the heat kernel truncated to 0 < t < 1 as in the constants.
pub fn periodised_c1(d: usize, spec: &MollifierSpec) -> f64 {
    let eng = SpectralEngine::new(d, *spec, None);
    let kmax = (crate::kernels::spectral::Q_CUT / (2.0 * PI * spec.eps)).ceil() as i64;
    let mut shells: HashMap<i64, u64> = HashMap::new();
    let range = -kmax..=kmax;
    let mut push = |k2: i64| *shells.entry(k2).or_insert(0) += 1;
    match d {
        2 => {
            for a in range.clone() {
                for b in range.clone() {
                    push(a * a + b * b);
                }
            }
        }
        3 => {
            for a in range.clone() {
                for b in range.clone() {
                    for c in range.clone() {
                        push(a * a + b * b + c * c);
                    }
                }
            }
        }
        _ => panic!("dimension {d} not supported"),
    }
    shells
        .into_iter()
        .map(|(k2, count)| {
            let k = 2.0 * PI * (k2 as f64).sqrt();
            count as f64 * eng.theta2(k) * eng.r_k(k * k, 0.0)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_order_independent() {
        let g = Grid::new(2, 8, 3, 0.01, 1).unwrap();
        let xi = sample_white_noise(&g, 7);
        let s = xi.slice(2);
        for site in [0, 5, 63] {
            assert_eq!(xi.cell(2, site), s[site]);
        }
        assert_ne!(xi.slice(1), s);
    }

    #[test]
    fn identity_mollification_reproduces_noise() {
        let g = Grid::new(2, 8, 4, 0.01, 0).unwrap();
        let xi = sample_white_noise(&g, 1);
        let f = apply_mollification(&xi, &Mollification::identity(&g));
        for j in 0..4 {
            let raw = xi.slice(j);
            assert!(f.slice(j).iter().zip(&raw).all(|(a, b)| (a - b).abs() < 1e-9 * xi.sigma()));
        }
    }

    #[test]
    fn resolution_guard() {
        let g = Grid::new(2, 16, 4, 1e-4, 100).unwrap();
        let e = Mollification::new(&g, &MollifierSpec::bump(0.1)).unwrap_err();
        assert!(matches!(e, NoiseError::Resolution { .. }));
        let g = Grid::new(2, 16, 4, 1e-4, 0).unwrap();
        assert!(matches!(Mollification::new(&g, &MollifierSpec::bump(0.25)), Err(NoiseError::Grid(_))));
    }

    #[test]
    fn covariance_of_single_step_is_white() {
        // one step, no mollification: χ = Δt ξ̂ per mode, so Var χ = Δt² σ²
        // on the zero mode mixture; check against direct formula at lag 0
        let g = Grid::new(1, 4, 1, 0.5, 0).unwrap();
        let m = Mollification::identity(&g);
        let c = lattice_covariance(&g, &m, 1, &[vec![0]])[0];
        let lat = g.lattice();
        let sig2 = 1.0 / (g.dt * g.dx());
        let want: f64 = lat
            .eigenvalues()
            .iter()
            .map(|&l| {
                let b = if l == 0.0 { g.dt } else { -(-l * g.dt).exp_m1() / l };
                b * b * sig2 / 4.0
            })
            .sum();
        assert!((c - want).abs() < 1e-12 * want);
    }
}
