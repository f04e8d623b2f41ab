//! One-dimensional vorticity models on the circle: the Constantin–Lax–Majda (CLM)
//! equation `∂tω = ωHω` and its transported variant, the De Gregorio model
//! `∂tω + u∂xω = ω∂xu` with `∂xu = Hω`.

use crate::error::{Error, Result};
use crate::fit::{golden_min, linear_fit};
use crate::spectral::{Grid1, SpectralField1, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Clm,
    DeGregorio,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Clm => "clm",
            Model::DeGregorio => "degregorio",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub omega: SpectralField1,
    pub t: f64,
    pub model: Model,
}

impl ModelState {
    pub fn new(omega: SpectralField1, model: Model) -> Self {
        Self { omega, t: 0.0, model }
    }

    pub fn rhs(&self) -> SpectralField1 {
        match self.model {
            Model::Clm => clm_rhs(&self.omega),
            Model::DeGregorio => degregorio_rhs(&self.omega),
        }
    }
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn from_values(grid: Grid1, values: &[f64]) -> SpectralField1 {
    SpectralField1::from_physical(grid, values).expect("grid-sized buffer")
}

/// `ωHω`, formed pointwise and truncated by the 2/3 rule.
pub fn clm_rhs(omega: &SpectralField1) -> SpectralField1 {
    let w = omega.to_physical();
    let h = omega.hilbert().to_physical();
    from_values(*omega.grid(), &product(&w, &h)).dealias()
}

/// Zero-mean velocity with `∂xu = Hω`, i.e. `û(k) = -ω̂(k)/|k|`.
pub fn degregorio_velocity(omega: &SpectralField1) -> SpectralField1 {
    let n = omega.grid().n as i64;
    omega.map_modes(|m| {
        if m == 0 || 2 * m.abs() == n {
            C64::new(0.0, 0.0)
        } else {
            C64::new(-1.0 / m.abs() as f64, 0.0)
        }
    })
}

/// `-u∂xω + ω∂xu`, dealiased.
pub fn degregorio_rhs(omega: &SpectralField1) -> SpectralField1 {
    let u = degregorio_velocity(omega).to_physical();
    let ux = omega.hilbert().to_physical();
    let w = omega.to_physical();
    let wx = omega.dx().to_physical();
    let values: Vec<f64> = (0..w.len()).map(|i| -u[i] * wx[i] + w[i] * ux[i]).collect();
    from_values(*omega.grid(), &values).dealias()
}

/// Blow-up time of CLM data, or `Global` when the exact solution stays bounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlowupTime {
    Finite { t_star: f64, x_star: f64 },
    Global,
}

impl BlowupTime {
    pub fn t_star(self) -> Option<f64> {
        match self {
            BlowupTime::Finite { t_star, .. } => Some(t_star),
            BlowupTime::Global => None,
        }
    }
}

/// Zeros of the trigonometric interpolant, bracketed on a four-times refined grid and
/// polished by bisection.
fn zeros(f: &SpectralField1) -> Vec<f64> {
    let fine = Grid1 { n: 4 * f.grid().n };
    let vals = f.resample(fine).to_physical();
    let n = fine.n;
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (vals[i], vals[(i + 1) % n]);
        if a == 0.0 {
            out.push(fine.x(i));
            continue;
        }
        if a * b >= 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (fine.x(i), fine.x(i) + fine.dx());
        let mut flo = a;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let fm = f.eval_at(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

/// First time at which the CLM solution issued from `omega0` becomes singular.
///
/// A zero `x₀` of `ω₀` with `h = Hω₀(x₀)` and mean `μ` blows up at
/// `t = 2 atan2(|μ|, h)/|μ|`, which is `2/h` for mean-free data with `h > 0`.
pub fn clm_blowup_time(omega0: &SpectralField1) -> BlowupTime {
    let mu = omega0.mean().abs();
    let h = omega0.hilbert();
    let mut best = BlowupTime::Global;
    for x in zeros(omega0) {
        let hx = h.eval_at(x);
        let t = if mu == 0.0 {
            if hx <= 0.0 {
                continue;
            }
            2.0 / hx
        } else {
            2.0 * mu.atan2(hx) / mu
        };
        if best.t_star().is_none_or(|b| t < b) {
            best = BlowupTime::Finite { t_star: t, x_star: x };
        }
    }
    best
}

/// Pointwise exact CLM solution. With `z = Hω + iω` and mean `μ`, `z` solves the
/// Riccati equation `ż = (z² + μ²)/2`; for `μ = 0` this gives
/// `ω(t) = 4ω₀/((2 - tHω₀)² + t²ω₀²)`.
pub fn clm_exact(omega0: &SpectralField1, t: f64) -> Result<SpectralField1> {
    if let BlowupTime::Finite { t_star, .. } = clm_blowup_time(omega0) {
        if t >= t_star {
            return Err(Error::PastBlowup { t, t_star });
        }
    }
    let mu = omega0.mean();
    let theta = 0.5 * mu * t;
    let (c, s) = if theta.abs() < 1e-8 { (1.0 - 0.5 * theta * theta, 0.5 * t) } else { (theta.cos(), theta.sin() / mu) };
    let w = omega0.to_physical();
    let h = omega0.hilbert().to_physical();
    let values: Vec<f64> = w
        .iter()
        .zip(&h)
        .map(|(&wi, &hi)| {
            let z0 = C64::new(hi, wi);
            let z = (z0 * c + mu * mu * s) / (c - z0 * s);
            z.im
        })
        .collect();
    Ok(from_values(*omega0.grid(), &values))
}

#[derive(Clone, Debug)]
pub struct ModelRunConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub omega_cap: f64,
    /// Spectral tail ratio above which the run is flagged under-resolved.
    pub tail_tol: f64,
    /// Times at which the state is stored; steps are shortened to land on them.
    pub snapshot_times: Vec<f64>,
    /// When set, the grid is doubled (up to this size) instead of flagging
    /// under-resolution.
    pub max_n: Option<usize>,
}

impl Default for ModelRunConfig {
    fn default() -> Self {
        Self { cfl: 0.05, t_end: 10.0, omega_cap: 1e3, tail_tol: 1e-8, snapshot_times: Vec::new(), max_n: None }
    }
}

#[derive(Clone, Debug)]
pub struct BlowupReport {
    pub detected: bool,
    pub t_star_estimate: Option<f64>,
    pub times: Vec<f64>,
    pub omega_max_series: Vec<f64>,
    pub bkm_series: Vec<f64>,
    pub under_resolved: bool,
    pub under_resolved_at: Option<f64>,
    pub final_n: usize,
    pub steps: usize,
    pub final_state: ModelState,
    pub snapshots: Vec<ModelState>,
}

fn rk4(state: &ModelState, dt: f64) -> ModelState {
    let stage = |w: &SpectralField1, k: &SpectralField1, a: f64| {
        let mut out = w.clone();
        out.axpy(a, k);
        ModelState { omega: out, ..state.clone() }
    };
    let k1 = state.rhs();
    let k2 = stage(&state.omega, &k1, 0.5 * dt).rhs();
    let k3 = stage(&state.omega, &k2, 0.5 * dt).rhs();
    let k4 = stage(&state.omega, &k3, dt).rhs();
    let mut omega = state.omega.clone();
    omega.axpy(dt / 6.0, &k1);
    omega.axpy(dt / 3.0, &k2);
    omega.axpy(dt / 3.0, &k3);
    omega.axpy(dt / 6.0, &k4);
    ModelState { omega, t: state.t + dt, model: state.model }
}

/// Fits `‖ω‖∞ ≈ c/(T - t)` on the last 30% of the samples in log variables and
/// returns `T`.
pub fn fit_blowup_time(times: &[f64], omega_max: &[f64]) -> Option<f64> {
    let n = times.len();
    if n < 5 {
        return None;
    }
    let start = n - (3 * n / 10).max(4);
    let (ts, ms) = (&times[start..], &omega_max[start..]);
    let inv: Vec<f64> = ms.iter().map(|m| 1.0 / m).collect();
    let (b, a) = linear_fit(ts, &inv);
    if b >= 0.0 {
        return None;
    }
    let t_last = ts[n - start - 1];
    let guess = -a / b;
    let misfit = |tt: f64| {
        let lx: Vec<f64> = ts.iter().map(|t| -(tt - t).ln()).collect();
        let lc = ms.iter().zip(&lx).map(|(m, l)| m.ln() - l).sum::<f64>() / ts.len() as f64;
        ms.iter().zip(&lx).map(|(m, l)| (m.ln() - l - lc).powi(2)).sum::<f64>()
    };
    let span = (guess - t_last).abs().max(1e-12);
    let lo = t_last + 1e-3 * span;
    let hi = guess.max(t_last) + 2.0 * span;
    Some(golden_min(misfit, lo, hi, 1e-14 * hi.abs().max(1.0)))
}

/// Adaptive RK4 with `dt = cfl/‖ω‖∞` (and a transport limit for De Gregorio), stopping
/// at `t_end` or once `‖ω‖∞` reaches the cap.
pub fn model_run(initial: ModelState, cfg: &ModelRunConfig) -> Result<BlowupReport> {
    if !(cfg.cfl > 0.0 && cfg.cfl <= 0.5) {
        return Err(Error::Precondition(format!("cfl = {} must lie in (0, 0.5]", cfg.cfl)));
    }
    let mut state = initial;
    let mut snaps: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|&s| s >= state.t).collect();
    snaps.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let mut m = state.omega.max_abs();
    let (mut times, mut maxes, mut bkm) = (vec![state.t], vec![m], vec![0.0]);
    let mut under_resolved_at = None;
    let mut steps = 0;
    let mut next_snap = 0;
    let mut dx = 2.0 * std::f64::consts::PI / state.omega.grid().n as f64;
    while next_snap < snaps.len() && snaps[next_snap] <= state.t {
        snapshots.push(state.clone());
        next_snap += 1;
    }
    while state.t < cfg.t_end && m < cfg.omega_cap {
        let mut dt = if m > 0.0 { cfg.cfl / m } else { cfg.t_end - state.t };
        if state.model == Model::DeGregorio {
            let umax = degregorio_velocity(&state.omega).max_abs();
            if umax > 0.0 {
                dt = dt.min(cfg.cfl * dx / umax);
            }
        }
        dt = dt.min(cfg.t_end - state.t);
        if let Some(&s) = snaps.get(next_snap) {
            dt = dt.min(s - state.t);
        }
        let next = rk4(&state, dt);
        let m_next = next.omega.max_abs();
        if !m_next.is_finite() {
            return Err(Error::NumericalBlowup { t: next.t });
        }
        let total = bkm.last().unwrap() + 0.5 * dt * (m + m_next);
        state = next;
        m = m_next;
        steps += 1;
        times.push(state.t);
        maxes.push(m);
        bkm.push(total);
        while state.omega.tail_ratio() > cfg.tail_tol {
            let n = state.omega.grid().n;
            if cfg.max_n.is_some_and(|max| 2 * n <= max) {
                state.omega = state.omega.resample(Grid1 { n: 2 * n });
                dx *= 0.5;
            } else {
                under_resolved_at.get_or_insert(state.t);
                break;
            }
        }
        while next_snap < snaps.len() && snaps[next_snap] <= state.t + 1e-15 * state.t.abs().max(1.0) {
            snapshots.push(state.clone());
            next_snap += 1;
        }
    }
    let crossed = m >= cfg.omega_cap;
    let below: Vec<usize> = (0..maxes.len()).filter(|&i| maxes[i] < cfg.omega_cap).collect();
    let (bt, bm): (Vec<f64>, Vec<f64>) = below.iter().map(|&i| (times[i], maxes[i])).unzip();
    let t_star_estimate = if crossed { fit_blowup_time(&bt, &bm) } else { None };
    Ok(BlowupReport {
        detected: crossed && t_star_estimate.is_some(),
        t_star_estimate,
        times,
        omega_max_series: maxes,
        bkm_series: bkm,
        under_resolved: under_resolved_at.is_some(),
        under_resolved_at,
        final_n: state.omega.grid().n,
        steps,
        final_state: state,
        snapshots,
    })
}

impl BlowupReport {
    /// BKM integral at the first time `‖ω‖∞` reaches `level`, with the crossing located
    /// by linear interpolation of `1/‖ω‖∞` inside the step that straddles it.
    pub fn bkm_at_level(&self, level: f64) -> Option<f64> {
        let i = self.omega_max_series.iter().position(|&m| m >= level)?;
        if i == 0 {
            return Some(0.0);
        }
        let (m0, m1) = (self.omega_max_series[i - 1], self.omega_max_series[i]);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let s = (1.0 / m0 - 1.0 / level) / (1.0 / m0 - 1.0 / m1);
        let tc = t0 + s * (t1 - t0);
        Some(self.bkm_series[i - 1] + 0.5 * (tc - t0) * (m0 + level))
    }
}

#[derive(Clone, Debug)]
pub struct SelfSimilarRescaling {
    pub xs: Vec<f64>,
    pub taus: Vec<f64>,
    /// `(T - t) ω(x* + (T - t) X, t)` for each stored snapshot.
    pub profiles: Vec<Vec<f64>>,
    /// Sup-norm differences between consecutive profiles.
    pub cauchy: Vec<f64>,
}

/// Rescales the stored snapshots of a detected blow-up around `x_star` with `λ = 1`,
/// using `t_star` when given and the fitted estimate otherwise.
pub fn selfsim_extract(report: &BlowupReport, x_star: f64, t_star: Option<f64>, xs: &[f64]) -> Result<SelfSimilarRescaling> {
    if !report.detected {
        return Err(Error::Precondition("rescaling needs a run with detected blow-up".into()));
    }
    let big_t = t_star.or(report.t_star_estimate).expect("detected runs carry an estimate");
    let mut taus = Vec::new();
    let mut profiles = Vec::new();
    for s in report.snapshots.iter().filter(|s| s.t < big_t) {
        let tau = big_t - s.t;
        taus.push(tau);
        profiles.push(xs.iter().map(|x| tau * s.omega.eval_at(x_star + tau * x)).collect::<Vec<f64>>());
    }
    let cauchy = profiles
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        .collect();
    Ok(SelfSimilarRescaling { xs: xs.to_vec(), taus, profiles, cauchy })
}

/// Limit profile `Ω(X) = -4X/(1 + 4X²)` of CLM blow-up from cosine data.
pub fn clm_limit_profile(x: f64) -> f64 {
    -4.0 * x / (1.0 + 4.0 * x * x)
}
