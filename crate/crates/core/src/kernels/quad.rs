//! Quadrature helpers shared by the kernel and constant computations.

use std::sync::OnceLock;

/// Gauss-Legendre rule on [-1, 1] computed by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Cached 8- and 16-point rules.
pub fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(8))
}

pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

/// Appends the nodes/weights of `rule` mapped onto [a, b].
pub fn push_panel(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, nodes: &mut Vec<(f64, f64)>) {
    if b <= a {
        return;
    }
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    for (x, w) in rule.0.iter().zip(&rule.1) {
        nodes.push((c + h * x, h * w));
    }
}

/// Panel breakpoints on [a, b] that refine geometrically towards `peak`,
/// down to width `scale`, and are at most `max_width` wide elsewhere.
pub fn peaked_breaks(a: f64, b: f64, peak: f64, scale: f64, max_width: f64) -> Vec<f64> {
    let mut pts = vec![a, b];
    let p = peak.clamp(a, b);
    pts.push(p);
    for dir in [-1.0, 1.0] {
        let mut h = scale.max(1e-300);
        loop {
            let q = p + dir * h;
            if q <= a || q >= b {
                break;
            }
            pts.push(q);
            h *= 2.0;
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        for j in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / n as f64);
        }
    }
    out
}

/// Quadrature nodes for an integrand on [a, b] with a cusp or sharp decay at `peak`.
pub fn peaked_nodes(a: f64, b: f64, peak: f64, scale: f64, max_width: f64) -> Vec<(f64, f64)> {
    let br = peaked_breaks(a, b, peak, scale, max_width);
    let mut nodes = Vec::with_capacity(8 * br.len());
    for w in br.windows(2) {
        push_panel(gl8(), w[0], w[1], &mut nodes);
    }
    nodes
}

// Kronrod 15 / Gauss 7 abscissae and weights.
#[allow(clippy::excessive_precision)]
const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature: returns (value, error estimate).
///
/// Subdivides the worst interval until the summed error falls below
/// `max(abs_tol, rel_tol*|value|)` or `max_intervals` is reached.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> (f64, f64) {
    if b <= a {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut ivs = vec![(a, b, v, e)];
    loop {
        let total: f64 = ivs.iter().map(|x| x.2).sum();
        let err: f64 = ivs.iter().map(|x| x.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || ivs.len() >= max_intervals {
            return (total, err);
        }
        let (i, _) = ivs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = ivs.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        ivs.push((lo, mid, v1, e1));
        ivs.push((mid, hi, v2, e2));
    }
}

/// Adaptive quadrature over breakpoints, summing values and errors.
pub fn adaptive_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> (f64, f64) {
    let mut v = 0.0;
    let mut e = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = adaptive(&mut f, w[0], w[1], abs_tol, rel_tol, max_intervals);
        v += a;
        e += b;
    }
    (v, e)
}
