//! The ODE response Q(t) = e^{tA₂}A₁, smoothly truncated to [0, 2T].

use nalgebra::{DMatrix, DVector};

use crate::error::KernelError;

#[derive(Debug, Clone, PartialEq)]
pub struct QSpec {
    pub a1: Vec<f64>,
    /// row-major n×n
    pub a2: Vec<Vec<f64>>,
    pub horizon: f64,
    /// zero-based component of Q used by scalar quantities
    pub channel: usize,
}

impl QSpec {
    pub fn new(a1: Vec<f64>, a2: Vec<Vec<f64>>, horizon: f64, channel: usize) -> Result<Self, KernelError> {
        let n = a1.len();
        if n == 0 || a2.len() != n || a2.iter().any(|r| r.len() != n) {
            return Err(KernelError::Parameter(format!("A1 has length {n} but A2 is not {n}x{n}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(KernelError::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        if channel >= n {
            return Err(KernelError::Parameter(format!("channel {channel} out of range for n = {n}")));
        }
        Ok(QSpec { a1, a2, horizon, channel })
    }

    /// Scalar system v' = a1 u + a2 v.
    pub fn scalar(a1: f64, a2: f64, horizon: f64) -> Self {
        QSpec { a1: vec![a1], a2: vec![vec![a2]], horizon, channel: 0 }
    }

    pub fn n(&self) -> usize {
        self.a1.len()
    }

    pub fn a1_vec(&self) -> DVector<f64> {
        DVector::from_vec(self.a1.clone())
    }

    pub fn a2_mat(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.a2[i][j])
    }

    /// Taper w(s): 1 on [0, T], smoothstep down to 0 on [T, 2T]; returns (w, w').
    pub fn taper(&self, s: f64) -> (f64, f64) {
        let t = self.horizon;
        if !(0.0..2.0 * t).contains(&s) {
            return (0.0, 0.0);
        }
        if s <= t {
            return (1.0, 0.0);
        }
        let x = (s - t) / t;
        (1.0 - x * x * (3.0 - 2.0 * x), -6.0 * x * (1.0 - x) / t)
    }

    /// Tabulates Q on [0, 2T] for fast evaluation.
    pub fn table(&self) -> QTable {
        let steps = ((2.0 * self.horizon) / 2e-3).ceil().max(64.0) as usize;
        let h = 2.0 * self.horizon / steps as f64;
        let a2 = self.a2_mat();
        let step = (&a2 * h).exp();
        let mut y = self.a1_vec();
        let mut val = Vec::with_capacity(steps + 1);
        let mut der = Vec::with_capacity(steps + 1);
        for j in 0..=steps {
            let s = j as f64 * h;
            let (w, dw) = self.taper(s.min(2.0 * self.horizon * (1.0 - 1e-15)));
            let dy = &a2 * &y;
            val.push((&y * w).iter().copied().collect::<Vec<_>>());
            der.push((&dy * w + &y * dw).iter().copied().collect::<Vec<_>>());
            y = &step * y;
        }
        QTable { h, end: 2.0 * self.horizon, val, der }
    }
}

/// Piecewise cubic Hermite table of the truncated Q.
#[derive(Debug, Clone)]
pub struct QTable {
    h: f64,
    end: f64,
    val: Vec<Vec<f64>>,
    der: Vec<Vec<f64>>,
}

impl QTable {
    pub fn support_end(&self) -> f64 {
        self.end
    }

    /// Component `c` of Q(s); zero outside [0, 2T).
    pub fn eval(&self, c: usize, s: f64) -> f64 {
        if s < 0.0 || s >= self.end {
            return 0.0;
        }
        let x = s / self.h;
        let j = (x.floor() as usize).min(self.val.len() - 2);
        let u = x - j as f64;
        let (p0, p1) = (self.val[j][c], self.val[j + 1][c]);
        let (m0, m1) = (self.der[j][c] * self.h, self.der[j + 1][c] * self.h);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * p0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * p1 + (u3 - u2) * m1
    }

    /// Euclidean norm of the vector Q(s).
    pub fn norm(&self, s: f64) -> f64 {
        (0..self.val[0].len()).map(|c| self.eval(c, s).powi(2)).sum::<f64>().sqrt()
    }

    /// ∫_0^t |Q(s)| ds.
    pub fn l1_norm(&self, t: f64) -> f64 {
        let t = t.min(self.end);
        let n = ((t / self.h).ceil() as usize).max(1) * 2;
        let h = t / n as f64;
        // Simpson
        let mut s = self.norm(0.0) + self.norm(t * (1.0 - 1e-15));
        for j in 1..n {
            s += if j % 2 == 1 { 4.0 } else { 2.0 } * self.norm(j as f64 * h);
        }
        s * h / 3.0
    }
}
