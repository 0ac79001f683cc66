//! Periodic lattice on the unit torus [0, 1)^d and its discrete Fourier
//! transform. Arrays are row-major with the last axis fastest; axis 0 is x₁.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Lattice {
    pub d: usize,
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Clone for Lattice {
    fn clone(&self) -> Self {
        Lattice { d: self.d, n: self.n, fwd: self.fwd.clone(), inv: self.inv.clone() }
    }
}

impl std::fmt::Debug for Lattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Lattice({}^{})", self.n, self.d)
    }
}

impl Lattice {
    pub fn new(d: usize, n: usize) -> Self {
        let mut p = FftPlanner::new();
        Lattice { d, n, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Multi-index of a flat position.
    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for a in (0..self.d).rev() {
            c[a] = idx % self.n;
            idx /= self.n;
        }
        c
    }

    /// Signed integer wavenumber along one axis.
    pub fn freq(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn wavevector(&self, idx: usize) -> Vec<i64> {
        self.coords(idx).into_iter().map(|i| self.freq(i)).collect()
    }

    /// |k|² for the integer wavevector at `idx`.
    pub fn k2(&self, idx: usize) -> f64 {
        self.wavevector(idx).iter().map(|k| (k * k) as f64).sum()
    }

    /// λ_k = (2π|k|)² for every mode.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.len()).map(|i| 4.0 * PI * PI * self.k2(i)).collect()
    }

    /// Mask of modes kept by the 2/3 rule.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cut = self.n as i64 / 3;
        (0..self.len()).map(|i| self.wavevector(i).iter().all(|k| k.abs() <= cut)).collect()
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        let n = self.n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for a in 0..self.d {
            let stride = n.pow((self.d - 1 - a) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for j in 0..n {
                        line[j] = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..n {
                        data[start + j * stride] = line[j];
                    }
                }
            }
        }
    }

    /// Unnormalised forward transform Σ_x f(x) e^{-2πik·x}.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse transform including the 1/N^d factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn forward_real(&self, f: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut c);
        c
    }

    pub fn inverse_real(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut c);
        c.into_iter().map(|z| z.re).collect()
    }

    /// Grid values of a function of the node coordinates.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        let h = self.dx();
        (0..self.len())
            .map(|i| {
                let x: Vec<f64> = self.coords(i).into_iter().map(|c| c as f64 * h).collect();
                f(&x)
            })
            .collect()
    }

    /// Flat index of the node shifted by `lag` lattice steps.
    pub fn shift(&self, idx: usize, lag: &[i64]) -> usize {
        let c = self.coords(idx);
        let n = self.n as i64;
        c.iter().zip(lag).fold(0, |acc, (&ci, &l)| acc * self.n + (ci as i64 + l).rem_euclid(n) as usize)
    }
}

pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Discrete L² norm on the unit torus.
pub fn l2_norm(f: &[f64]) -> f64 {
    (f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64).sqrt()
}
