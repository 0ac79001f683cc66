//! Exponential integrator for the renormalised SPDE-ODE system
//!
//! ∂_t u = Δu + F(u, v) + C₀ + C₁u + Σᵢ C₂ᵢvᵢ + ξ^ε,   ∂_t v = uA₁ + A₂v
//!
//! on 𝕋^d, either directly or for the remainder φ = u - χ_ε.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cubic::CubicPolynomial;
use crate::error::SolverError;
use crate::kernels::{assemble_c, c1_only, constants, Basis, ConstantsRecord, MollifierSpec, Profile, QSpec};
use crate::lattice::{l2_norm, sup_norm, Lattice};
use crate::noise::{ou_coefficients, sample_white_noise, Grid, Mollification, NoiseField, NoiseStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Direct,
    Remainder,
}

/// Counterterm values (C₀, C₁, C₂ᵢ)(ε) and the scalar C(ε) they derive from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterterms {
    pub c: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: Vec<f64>,
}

impl Counterterms {
    pub fn zero(n: usize) -> Self {
        Counterterms { c: 0.0, c0: 0.0, c1: 0.0, c2: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RenormSetting {
    Off,
    /// constants computed by the kernels module at the run's ε
    Auto,
    Fixed(Counterterms),
}

#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub d: usize,
    pub f: CubicPolynomial,
    pub a1: Vec<f64>,
    /// row-major n×n
    pub a2: Vec<Vec<f64>>,
    pub renorm: RenormSetting,
    pub formulation: Formulation,
}

fn is_zero_coeff(p: &crate::poly::Poly) -> bool {
    p.is_zero()
}

impl SystemSpec {
    pub fn new(
        d: usize,
        f: CubicPolynomial,
        a1: Vec<f64>,
        a2: Vec<Vec<f64>>,
        renorm: RenormSetting,
        formulation: Formulation,
    ) -> Result<Self, SolverError> {
        if d != 2 && d != 3 {
            return Err(SolverError::Config(format!("dimension {d} not supported")));
        }
        let n = f.n;
        if a1.len() != n || a2.len() != n || a2.iter().any(|r| r.len() != n) {
            return Err(SolverError::Config(format!("F has {n} gating variables but A1/A2 do not match")));
        }
        if f.numeric().is_none() {
            return Err(SolverError::Config("F must have numeric coefficients".into()));
        }
        if d == 3 && renorm != RenormSetting::Off && (1..=n).any(|i| !is_zero_coeff(&f.gamma2(i))) {
            return Err(SolverError::Hypothesis(
                "d = 3 with renormalisation requires the u^2 v_i coefficients to vanish".into(),
            ));
        }
        Ok(SystemSpec { d, f, a1, a2, renorm, formulation })
    }

    /// F = u - u³ + v with v' = a1 u + a2 v, a1 = a2 = -1.
    pub fn standard_fhn(d: usize, renorm: RenormSetting) -> Result<Self, SolverError> {
        Self::new(d, CubicPolynomial::standard_fhn(), vec![-1.0], vec![vec![-1.0]], renorm, Formulation::Direct)
    }

    /// F = 3u + v₁ - u³, A₁ = (ε₁k, 0), A₂ = [[-2ε₁, ε₁], [ε₁, -ε₁]].
    pub fn koper(d: usize, eps1: f64, k: f64, renorm: RenormSetting) -> Result<Self, SolverError> {
        Self::new(
            d,
            CubicPolynomial::koper(),
            vec![eps1 * k, 0.0],
            vec![vec![-2.0 * eps1, eps1], vec![eps1, -eps1]],
            renorm,
            Formulation::Direct,
        )
    }

    pub fn n(&self) -> usize {
        self.a1.len()
    }

    pub fn with_formulation(mut self, f: Formulation) -> Self {
        self.formulation = f;
        self
    }

    pub fn with_renorm(mut self, r: RenormSetting) -> Self {
        self.renorm = r;
        self
    }

    /// Q(t) = e^{tA₂}A₁, left untapered on [0, horizon].
    pub fn qspec(&self, horizon: f64) -> QSpec {
        QSpec { a1: self.a1.clone(), a2: self.a2.clone(), horizon, channel: 0 }
    }

    /// Constants record at scale ε: C₁ in d = 2, C₁ and C₂ = 2∫G Q₀² in d = 3.
    pub fn constants_record(&self, m: MollifierSpec) -> Result<ConstantsRecord, SolverError> {
        if self.d == 2 {
            let (c1, err) = c1_only(m.eps, 2, Some(m));
            return Ok(ConstantsRecord {
                eps: m.eps,
                dim: 2,
                c1,
                c2: 0.0,
                i: [[0.0; 3]; 3],
                err_c1: err,
                err_c2: 0.0,
                err_i: [[0.0; 3]; 3],
            });
        }
        Ok(constants(m.eps, self.d, None, Basis::G, Some(m))?)
    }

    pub fn counterterms(&self, m: MollifierSpec) -> Result<Counterterms, SolverError> {
        match &self.renorm {
            RenormSetting::Off => Ok(Counterterms::zero(self.n())),
            RenormSetting::Fixed(c) => Ok(c.clone()),
            RenormSetting::Auto => {
                let k = self.constants_record(m)?;
                let a = assemble_c(&self.f, self.d, &k)?;
                Ok(Counterterms { c: a.c, c0: a.c0, c1: a.c1, c2: a.c2 })
            }
        }
    }
}

/// Initial data: explicit fields or random Fourier series
/// Σ c_k e^{2πik·x} with c_k ~ N(0, (1 + |k|)^{-d-2s}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitSpec {
    Zero,
    Constant { value: f64 },
    /// amplitude·cos(2π mode·x)
    Cosine { amplitude: f64, mode: Vec<i64> },
    /// regularity exponent s (η for u, γ for v)
    Random { exponent: f64, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub eps: f64,
    pub profile: Profile,
    pub seed: u64,
    /// multiplies ξ^ε; 0 switches the noise off
    pub amplitude: f64,
    pub u0: InitSpec,
    pub v0: InitSpec,
    /// sup-norm level at which the local solution is stopped
    pub cutoff: f64,
    /// steps between recorded norms
    pub cadence: usize,
    /// steps between stored field snapshots (0 = final state only)
    pub snapshot_every: usize,
}

impl RunConfig {
    /// Δt = 10⁻⁴, N = 128 (d = 2) or 32 (d = 3), ε = 4Δx.
    pub fn defaults(d: usize) -> Self {
        let n = if d == 3 { 32 } else { 128 };
        RunConfig {
            n,
            dt: 1e-4,
            t_end: 0.1,
            eps: 4.0 / n as f64,
            profile: Profile::CompactBump,
            seed: 0,
            amplitude: 1.0,
            u0: InitSpec::Zero,
            v0: InitSpec::Zero,
            cutoff: 1e3,
            cadence: 100,
            snapshot_every: 0,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn mollifier(&self) -> MollifierSpec {
        MollifierSpec { profile: self.profile, eps: self.eps }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.n < 4 {
            return Err(SolverError::Config(format!("grid size {} too small", self.n)));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.cutoff > 0.0) {
            return Err(SolverError::Config("dt, t_end and cutoff must be positive".into()));
        }
        let guard = 2.0 / self.n as f64;
        if self.eps < guard * (1.0 - 1e-12) {
            return Err(SolverError::Config(format!("epsilon {} below 2*dx = {guard}", self.eps)));
        }
        Ok(())
    }
}

fn random_series(lat: &Lattice, seed: u64, tag: u64, s: f64, amplitude: f64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    // streams from the top so they never meet the noise slices
    r.set_stream(u64::MAX - tag);
    let w: Vec<f64> = (0..lat.len())
        .map(|_| {
            let (a, b) = (r.next_u64(), r.next_u64());
            let u1 = ((a >> 11) + 1) as f64 / (1u64 << 53) as f64;
            let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let mut c = lat.forward_real(&w);
    let root = (lat.len() as f64).sqrt();
    let p = -(lat.d as f64) / 2.0 - s;
    for (i, z) in c.iter_mut().enumerate() {
        *z *= amplitude * root * (1.0 + lat.k2(i).sqrt()).powf(p);
    }
    lat.inverse_real(c)
}

fn explicit(lat: &Lattice, spec: &InitSpec) -> Vec<f64> {
    match spec {
        InitSpec::Zero => vec![0.0; lat.len()],
        InitSpec::Constant { value } => vec![*value; lat.len()],
        InitSpec::Cosine { amplitude, mode } => lat.sample(|x| {
            let ph: f64 = x.iter().zip(mode).map(|(x, k)| x * *k as f64).sum();
            amplitude * (2.0 * std::f64::consts::PI * ph).cos()
        }),
        InitSpec::Random { .. } => unreachable!(),
    }
}

/// (u₀, v₀) on the grid; v₀ is stored site-major with n components per site.
pub fn initial_data(
    u0: &InitSpec,
    v0: &InitSpec,
    lat: &Lattice,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    let u = match u0 {
        InitSpec::Random { exponent, amplitude } => {
            if *exponent <= -2.0 / 3.0 {
                return Err(SolverError::Hypothesis(format!("u0 regularity {exponent} must exceed -2/3")));
            }
            random_series(lat, seed, 0, *exponent, *amplitude)
        }
        s => explicit(lat, s),
    };
    let comps: Vec<Vec<f64>> = (0..n)
        .map(|c| match v0 {
            InitSpec::Random { exponent, amplitude } => {
                if *exponent <= 1.0 {
                    return Err(SolverError::Hypothesis(format!("v0 regularity {exponent} must exceed 1")));
                }
                Ok(random_series(lat, seed, 1 + c as u64, *exponent, *amplitude))
            }
            s => Ok(explicit(lat, s)),
        })
        .collect::<Result<_, _>>()?;
    let mut v = vec![0.0; lat.len() * n];
    for (c, f) in comps.iter().enumerate() {
        for (site, x) in f.iter().enumerate() {
            v[site * n + c] = *x;
        }
    }
    Ok((u, v))
}

/// Φ(h, A) = Σ_{m≥0} h^{m+1}A^m/(m+1)!, summed until the relative term
/// size drops below 1e-16; valid for singular A.
pub fn phi_series(h: f64, a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n) * h;
    let mut sum = term.clone();
    for m in 1..200 {
        term = a * &term * (h / (m as f64 + 1.0));
        sum += &term;
        if term.norm() <= 1e-16 * sum.norm() {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "t", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    CutoffHit(f64),
    Nonfinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    pub sup_u: f64,
    pub l2_u: f64,
    pub sup_v: f64,
    pub l2_v: f64,
    pub sup_phi: f64,
}

pub const CSV_HEADER: &str = "t,sup_u,l2_u,sup_v,l2_v,sup_phi";

impl NormRow {
    pub fn csv(&self) -> String {
        format!("{},{},{},{},{},{}", self.t, self.sup_u, self.l2_u, self.sup_v, self.l2_v, self.sup_phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    /// site-major, n components
    pub v: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Integrator state. `main` holds û (direct) or φ̂ (remainder); χ̂ is
/// always advanced so that φ = u - χ_ε is available in both forms.
#[derive(Debug, Clone)]
pub struct State {
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    main: Vec<Complex64>,
    chi: Vec<Complex64>,
}

pub struct Solver {
    pub spec: SystemSpec,
    pub cfg: RunConfig,
    pub lattice: Lattice,
    pub counterterms: Counterterms,
    pub constants: Option<ConstantsRecord>,
    a: Vec<f64>,
    b: Vec<f64>,
    mask: Vec<bool>,
    exp_a2: Vec<f64>,
    phi_a1: Vec<f64>,
    terms: Vec<(Vec<u32>, f64)>,
    moll: Option<Mollification>,
}

impl Solver {
    pub fn new(spec: &SystemSpec, cfg: &RunConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let d = spec.d;
        let lattice = Lattice::new(d, cfg.n);
        let (a, b) = ou_coefficients(&lattice.eigenvalues(), cfg.dt);
        let n = spec.n();
        let a2 = DMatrix::from_fn(n, n, |i, j| spec.a2[i][j]);
        let phi = phi_series(cfg.dt, &a2);
        let exp_a2 = DMatrix::identity(n, n) + &a2 * &phi;
        let a1 = nalgebra::DVector::from_vec(spec.a1.clone());
        let pa1 = &phi * a1;
        let constants = match spec.renorm {
            RenormSetting::Auto => Some(spec.constants_record(cfg.mollifier())?),
            _ => None,
        };
        let counterterms = match &constants {
            Some(k) => {
                let c = assemble_c(&spec.f, d, k)?;
                Counterterms { c: c.c, c0: c.c0, c1: c.c1, c2: c.c2 }
            }
            None => spec.counterterms(cfg.mollifier())?,
        };
        if counterterms.c2.len() != n {
            return Err(SolverError::Config(format!("expected {n} C2 coefficients")));
        }
        let grid = Grid::new(d, cfg.n, cfg.steps().max(1), cfg.dt, Grid::padding_for(cfg.eps, cfg.dt))?;
        let moll = if cfg.amplitude != 0.0 { Some(Mollification::new(&grid, &cfg.mollifier())?) } else { None };
        Ok(Solver {
            spec: spec.clone(),
            cfg: cfg.clone(),
            mask: lattice.dealias_mask(),
            lattice,
            counterterms,
            constants,
            a,
            b,
            exp_a2: exp_a2.transpose().iter().copied().collect(),
            phi_a1: pa1.iter().copied().collect(),
            terms: spec.f.numeric().expect("validated"),
            moll,
        })
    }

    /// The noise grid this run needs; sweeps may share a more padded one.
    pub fn noise_grid(&self) -> Grid {
        Grid::new(self.spec.d, self.cfg.n, self.cfg.steps().max(1), self.cfg.dt, Grid::padding_for(self.cfg.eps, self.cfg.dt))
            .expect("validated")
    }

    /// Rebuilds the discrete mollifier for a shared, possibly larger grid.
    pub fn attach_grid(&mut self, grid: &Grid) -> Result<(), SolverError> {
        if self.cfg.amplitude != 0.0 {
            self.moll = Some(Mollification::new(grid, &self.cfg.mollifier())?);
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<State, SolverError> {
        let (u, v) = initial_data(&self.cfg.u0, &self.cfg.v0, &self.lattice, self.spec.n(), self.cfg.seed)?;
        let main = self.lattice.forward_real(&u);
        Ok(State { step: 0, t: 0.0, u, v, main, chi: vec![Complex64::new(0.0, 0.0); self.lattice.len()] })
    }

    /// Noise forcing for step j, already scaled by the amplitude.
    pub fn noise_hat(&self, stream: &mut NoiseStream, j: usize) -> Option<Vec<Complex64>> {
        let m = self.moll.as_ref()?;
        let mut h = stream.mollified_hat(m, j);
        if self.cfg.amplitude != 1.0 {
            h.iter_mut().for_each(|z| *z *= self.cfg.amplitude);
        }
        Some(h)
    }

    fn nonlinearity(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.spec.n();
        let ct = &self.counterterms;
        u.iter()
            .enumerate()
            .map(|(site, &x)| {
                let vs = &v[site * n..(site + 1) * n];
                let mut s = ct.c0 + ct.c1 * x;
                for (c, y) in ct.c2.iter().zip(vs) {
                    s += c * y;
                }
                for (k, c) in &self.terms {
                    let mut t = c * x.powi(k[0] as i32);
                    for (e, y) in k[1..].iter().zip(vs) {
                        t *= y.powi(*e as i32);
                    }
                    s += t;
                }
                s
            })
            .collect()
    }

    /// One ETD1 step with the noise slice `xi` (Fourier coefficients).
    pub fn step(&self, st: &mut State, xi: Option<&[Complex64]>) {
        let lat = &self.lattice;
        let nl = self.nonlinearity(&st.u, &st.v);
        let mut nh = lat.forward_real(&nl);
        for (z, keep) in nh.iter_mut().zip(&self.mask) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        let direct = self.spec.formulation == Formulation::Direct;
        for i in 0..lat.len() {
            let x = xi.map_or(Complex64::new(0.0, 0.0), |x| x[i]);
            st.chi[i] = self.a[i] * st.chi[i] + self.b[i] * x;
            let forcing = if direct { nh[i] + x } else { nh[i] };
            st.main[i] = self.a[i] * st.main[i] + self.b[i] * forcing;
        }
        // v ← e^{ΔtA₂}v + Φ(Δt, A₂)A₁u with u frozen at the old value
        let n = self.spec.n();
        let mut buf = vec![0.0; n];
        for (site, &uu) in st.u.iter().enumerate() {
            let vs = &mut st.v[site * n..(site + 1) * n];
            for r in 0..n {
                buf[r] = self.phi_a1[r] * uu + (0..n).map(|c| self.exp_a2[r * n + c] * vs[c]).sum::<f64>();
            }
            vs.copy_from_slice(&buf);
        }
        st.u = if direct {
            lat.inverse_real(st.main.clone())
        } else {
            let s: Vec<Complex64> = st.main.iter().zip(&st.chi).map(|(a, b)| a + b).collect();
            lat.inverse_real(s)
        };
        st.step += 1;
        st.t = st.step as f64 * self.cfg.dt;
    }

    /// Remainder φ = u - χ_ε.
    pub fn phi(&self, st: &State) -> Vec<f64> {
        let h: Vec<Complex64> = match self.spec.formulation {
            Formulation::Direct => st.main.iter().zip(&st.chi).map(|(a, b)| a - b).collect(),
            Formulation::Remainder => st.main.clone(),
        };
        self.lattice.inverse_real(h)
    }

    pub fn chi(&self, st: &State) -> Vec<f64> {
        self.lattice.inverse_real(st.chi.clone())
    }

    pub fn norms(&self, st: &State) -> NormRow {
        NormRow {
            t: st.t,
            sup_u: sup_norm(&st.u),
            l2_u: l2_norm(&st.u),
            sup_v: sup_norm(&st.v),
            l2_v: l2_norm(&st.v) * (self.spec.n() as f64).sqrt(),
            sup_phi: sup_norm(&self.phi(st)),
        }
    }

    pub fn snapshot(&self, st: &State) -> Snapshot {
        Snapshot { t: st.t, u: st.u.clone(), v: st.v.clone(), phi: self.phi(st) }
    }

    /// Termination test after a step: non-finite values, then the cutoff.
    pub fn check(&self, st: &State) -> Option<Termination> {
        if st.u.iter().chain(&st.v).any(|x| !x.is_finite()) {
            return Some(Termination::Nonfinite(st.t));
        }
        if sup_norm(&st.u) > self.cfg.cutoff {
            return Some(Termination::CutoffHit(st.t));
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub series: Vec<NormRow>,
    pub termination: Termination,
    pub final_state: Snapshot,
    pub snapshots: Vec<Snapshot>,
    pub counterterms: Counterterms,
    pub constants: Option<ConstantsRecord>,
    pub noise: Option<NoiseField>,
}

pub fn run(cfg: &RunConfig, spec: &SystemSpec) -> Result<RunResult, SolverError> {
    let solver = Solver::new(spec, cfg)?;
    let field = sample_white_noise(&solver.noise_grid(), cfg.seed);
    run_with_noise(&solver, &field)
}

pub fn run_with_noise(solver: &Solver, field: &NoiseField) -> Result<RunResult, SolverError> {
    let cfg = &solver.cfg;
    let mut stream = NoiseStream::new(field);
    let mut st = solver.initial_state()?;
    let mut series = vec![solver.norms(&st)];
    let mut snapshots = Vec::new();
    let mut termination = Termination::Completed;
    for j in 0..cfg.steps() {
        let xi = solver.noise_hat(&mut stream, j);
        solver.step(&mut st, xi.as_deref());
        if let Some(t) = solver.check(&st) {
            termination = t;
            series.push(solver.norms(&st));
            break;
        }
        if st.step % cfg.cadence.max(1) == 0 || st.step == cfg.steps() {
            series.push(solver.norms(&st));
        }
        if cfg.snapshot_every > 0 && st.step % cfg.snapshot_every == 0 {
            snapshots.push(solver.snapshot(&st));
        }
    }
    Ok(RunResult {
        series,
        termination,
        final_state: solver.snapshot(&st),
        snapshots,
        counterterms: solver.counterterms.clone(),
        constants: solver.constants.clone(),
        noise: solver.moll.as_ref().map(|_| field.clone()),
    })
}

/// Differences between consecutive scales ε and ε/2 at t_end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub renormalised: bool,
    pub eps: f64,
    pub eps_half: f64,
    pub d_u_sup: f64,
    pub d_u_l2: f64,
    pub d_v_sup: f64,
    pub d_v_l2: f64,
    pub d_phi_sup: f64,
    pub d_phi_l2: f64,
    /// max over steps of ‖u^ε - u^{ε/2}‖_{L²}
    pub max_d_u_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// ∫₀^{t_end} |e^{sA₂}A₁| ds
    pub q_l1: f64,
    pub noise_checksum: String,
    pub terminations: Vec<(bool, f64, Termination)>,
    pub counterterms: Vec<(f64, Counterterms)>,
}

impl SweepReport {
    pub fn d_l2(&self, renormalised: bool) -> Vec<f64> {
        self.rows.iter().filter(|r| r.renormalised == renormalised).map(|r| r.d_u_l2).collect()
    }

    /// ‖Δv‖_{L²} ≤ (1 + slack)·‖Q‖_{L¹}·max_s ‖Δu(s)‖_{L²} for every row.
    pub fn contraction_holds(&self, slack: f64) -> bool {
        self.rows.iter().all(|r| r.d_v_l2 <= (1.0 + slack) * self.q_l1 * r.max_d_u_l2)
    }
}

fn diff_norms(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (sup_norm(&d), l2_norm(&d))
}

/// Runs every ε in `eps` (decreasing) on one shared noise field, with the
/// spec's renormalisation and, unless that is already off, without it.
/// All runs advance in lockstep so differences are tracked at every step.
pub fn epsilon_sweep(cfg: &RunConfig, spec: &SystemSpec, eps: &[f64]) -> Result<SweepReport, SolverError> {
    if eps.len() < 2 || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SolverError::Config("epsilon list must be decreasing with at least two entries".into()));
    }
    let mut variants = vec![(true, spec.clone())];
    if spec.renorm != RenormSetting::Off {
        variants.push((false, spec.clone().with_renorm(RenormSetting::Off)));
    } else {
        variants[0].0 = false;
    }
    let grid = Grid::new(spec.d, cfg.n, cfg.steps().max(1), cfg.dt, Grid::padding_for(eps[0], cfg.dt))?;
    let field = sample_white_noise(&grid, cfg.seed);
    let mut runs = Vec::new();
    let mut counterterms = Vec::new();
    for (ren, sp) in &variants {
        for &e in eps {
            let c = RunConfig { eps: e, ..cfg.clone() };
            let mut s = Solver::new(sp, &c)?;
            s.attach_grid(&grid)?;
            if *ren {
                counterterms.push((e, s.counterterms.clone()));
            }
            let st = s.initial_state()?;
            runs.push((*ren, s, st, None::<Termination>));
        }
    }
    let ne = eps.len();
    let mut max_du = vec![0.0f64; variants.len() * (ne - 1)];
    let mut stream = NoiseStream::new(&field);
    for j in 0..cfg.steps() {
        for (_, s, st, term) in runs.iter_mut() {
            if term.is_some() {
                continue;
            }
            let xi = s.noise_hat(&mut stream, j);
            s.step(st, xi.as_deref());
            *term = s.check(st);
        }
        for v in 0..variants.len() {
            for p in 0..ne - 1 {
                let (a, b) = (&runs[v * ne + p].2, &runs[v * ne + p + 1].2);
                let m = &mut max_du[v * (ne - 1) + p];
                *m = m.max(diff_norms(&a.u, &b.u).1);
            }
        }
    }
    let mut rows = Vec::new();
    for (v, (ren, _)) in variants.iter().enumerate() {
        for p in 0..ne - 1 {
            let (ra, rb) = (&runs[v * ne + p], &runs[v * ne + p + 1]);
            let (su, lu) = diff_norms(&ra.2.u, &rb.2.u);
            let (sv, lv) = diff_norms(&ra.2.v, &rb.2.v);
            let (sp, lp) = diff_norms(&ra.1.phi(&ra.2), &rb.1.phi(&rb.2));
            rows.push(SweepRow {
                renormalised: *ren,
                eps: eps[p],
                eps_half: eps[p + 1],
                d_u_sup: su,
                d_u_l2: lu,
                d_v_sup: sv,
                d_v_l2: lv * (spec.n() as f64).sqrt(),
                d_phi_sup: sp,
                d_phi_l2: lp,
                max_d_u_l2: max_du[v * (ne - 1) + p],
            });
        }
    }
    let t_end = cfg.steps() as f64 * cfg.dt;
    let q_l1 = spec.qspec(t_end * 1.01).table().l1_norm(t_end);
    Ok(SweepReport {
        eps: eps.to_vec(),
        rows,
        q_l1,
        noise_checksum: field.checksum(),
        terminations: runs.iter().map(|(r, s, _, t)| (*r, s.cfg.eps, t.unwrap_or(Termination::Completed))).collect(),
        counterterms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_series_matches_closed_form() {
        let a = DMatrix::from_row_slice(1, 1, &[-2.0]);
        let p = phi_series(0.3, &a);
        assert!((p[(0, 0)] - (1.0 - (-0.6f64).exp()) / 2.0).abs() < 1e-15);
        let z = DMatrix::zeros(2, 2);
        assert_eq!(phi_series(0.5, &z), DMatrix::identity(2, 2) * 0.5);
    }

    #[test]
    fn gamma2_blocks_renormalised_3d() {
        let f = crate::parse_nonlinearity("u - u^3 + u^2*v", 1).unwrap();
        let e = SystemSpec::new(3, f.clone(), vec![1.0], vec![vec![-1.0]], RenormSetting::Auto, Formulation::Direct);
        assert!(matches!(e, Err(SolverError::Hypothesis(_))));
        assert!(SystemSpec::new(2, f, vec![1.0], vec![vec![-1.0]], RenormSetting::Auto, Formulation::Direct).is_ok());
    }

    #[test]
    fn rough_initial_data_rejected() {
        let lat = Lattice::new(2, 8);
        let r = initial_data(&InitSpec::Random { exponent: -0.7, amplitude: 1.0 }, &InitSpec::Zero, &lat, 1, 0);
        assert!(matches!(r, Err(SolverError::Hypothesis(_))));
        let r = initial_data(&InitSpec::Zero, &InitSpec::Random { exponent: 1.0, amplitude: 1.0 }, &lat, 1, 0);
        assert!(matches!(r, Err(SolverError::Hypothesis(_))));
    }
}
