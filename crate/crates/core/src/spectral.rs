//! Periodic grids, Fourier transforms and spectral calculus on the torus and the circle.
//!
//! Coefficients use the normalization `c_k = (1/N) Σ_j f_j e^{-i k·x_j}`, so that
//! `f(x) = Σ_k c_k e^{i k·x}` and the L² norm over the cell is `sqrt(|cell| Σ |c_k|²)`.
//! Two-dimensional arrays are row-major with rows of constant `y`: entry `(i, j)` lives
//! at `j * nx + i`, both for physical samples and for coefficients.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative size below which a (0,0) coefficient counts as round-off.
pub const MEAN_TOLERANCE: f64 = 1e-12;

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

fn transpose_into(src: &[C64], out: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    out[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

thread_local! {
    static FFT_SCRATCH: std::cell::RefCell<(Vec<C64>, Vec<C64>)> = const { std::cell::RefCell::new((Vec::new(), Vec::new())) };
}

fn fft2(data: &mut [C64], nx: usize, ny: usize, forward: bool) {
    let (px, py) = (plan(nx, forward), plan(ny, forward));
    FFT_SCRATCH.with(|cell| {
        let (buf, scratch) = &mut *cell.borrow_mut();
        buf.resize(data.len(), ZERO);
        let need = px.get_inplace_scratch_len().max(py.get_inplace_scratch_len());
        if scratch.len() < need {
            scratch.resize(need, ZERO);
        }
        px.process_with_scratch(data, scratch);
        transpose_into(data, buf, ny, nx);
        py.process_with_scratch(buf, scratch);
        transpose_into(buf, data, nx, ny);
    });
}

/// Signed integer wavenumber of storage index `i` on an `n`-point grid, in `[-n/2, n/2)`.
#[inline]
pub fn mode_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Storage index of the signed wavenumber `m`.
#[inline]
pub fn storage_index(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

#[inline]
fn is_nyquist(m: i64, n: usize) -> bool {
    m == -(n as i64) / 2
}

#[inline]
fn dealias_keeps(m: i64, n: usize) -> bool {
    3 * m.unsigned_abs() as usize <= n
}

fn check_count(n: usize, what: &str) -> Result<()> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!("{what} = {n} must be even and at least 8")));
    }
    Ok(())
}

fn check_length(l: f64, what: &str) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidGrid(format!("{what} = {l} must be positive")));
    }
    Ok(())
}

/// Uniform collocation grid on the doubly periodic cell `[0, lx) x [0, ly)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2 {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2 {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        Self::with_lengths(nx, ny, 2.0 * PI, 2.0 * PI)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn with_lengths(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        check_count(nx, "nx")?;
        check_count(ny, "ny")?;
        check_length(lx, "lx")?;
        check_length(ly, "ly")?;
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    /// Physical wavenumber in x for storage column `i`.
    pub fn kx(&self, i: usize) -> f64 {
        2.0 * PI * mode_index(i, self.nx) as f64 / self.lx
    }

    pub fn ky(&self, j: usize) -> f64 {
        2.0 * PI * mode_index(j, self.ny) as f64 / self.ly
    }

    /// Wavenumbers used by odd-order derivatives: the Nyquist mode is dropped.
    pub fn kx_odd(&self, i: usize) -> f64 {
        if is_nyquist(mode_index(i, self.nx), self.nx) {
            0.0
        } else {
            self.kx(i)
        }
    }

    pub fn ky_odd(&self, j: usize) -> f64 {
        if is_nyquist(mode_index(j, self.ny), self.ny) {
            0.0
        } else {
            self.ky(j)
        }
    }

    /// Samples `f(x, y)` on the collocation points.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            let y = self.y(j);
            for i in 0..self.nx {
                out.push(f(self.x(i), y));
            }
        }
        out
    }
}

/// Real doubly periodic scalar field stored by its Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField2 {
    grid: Grid2,
    coeffs: Vec<C64>,
    mean_free: bool,
}

impl SpectralField2 {
    pub fn zeros(grid: Grid2) -> Self {
        Self { grid, coeffs: vec![ZERO; grid.len()], mean_free: true }
    }

    /// Wraps raw coefficients. A (0,0) entry at round-off level is cleared and the
    /// field is flagged mean-free.
    pub fn from_coeffs(grid: Grid2, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a {}x{} grid",
                coeffs.len(),
                grid.nx,
                grid.ny
            )));
        }
        let mut f = Self { grid, coeffs, mean_free: false };
        f.refresh_mean_flag();
        Ok(f)
    }

    pub fn from_physical(grid: Grid2, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        let mut data: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        fft2(&mut data, grid.nx, grid.ny, true);
        let scale = 1.0 / grid.len() as f64;
        for c in &mut data {
            *c *= scale;
        }
        Self::from_coeffs(grid, data)
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_physical(grid, &grid.sample(f)).expect("sample length matches grid")
    }

    fn refresh_mean_flag(&mut self) {
        let scale_sqr = self.coeffs.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        if self.coeffs[0].norm_sqr() <= MEAN_TOLERANCE * MEAN_TOLERANCE * scale_sqr {
            self.coeffs[0] = ZERO;
            self.mean_free = true;
        } else {
            self.mean_free = false;
        }
    }

    pub fn to_physical(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        fft2(&mut data, self.grid.nx, self.grid.ny, false);
        data.into_iter().map(|c| c.re).collect()
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Mutable access to the coefficients; the caller is responsible for keeping
    /// Hermitian symmetry. The mean flag is recomputed by [`Self::normalize`].
    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn normalize(&mut self) {
        self.refresh_mean_flag();
    }

    /// Coefficient of the signed mode `(mx, my)`.
    pub fn coeff(&self, mx: i64, my: i64) -> C64 {
        let i = storage_index(mx, self.grid.nx);
        let j = storage_index(my, self.grid.ny);
        self.coeffs[j * self.grid.nx + i]
    }

    pub fn is_mean_free(&self) -> bool {
        self.mean_free
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Copy with the (0,0) coefficient removed.
    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = ZERO;
        out.mean_free = true;
        out
    }

    /// Applies a Fourier multiplier `m(i, j)` given in storage indices.
    pub fn map_modes(&self, mut m: impl FnMut(usize, usize) -> C64) -> Self {
        let nx = self.grid.nx;
        let mut coeffs = self.coeffs.clone();
        for j in 0..self.grid.ny {
            for i in 0..nx {
                coeffs[j * nx + i] *= m(i, j);
            }
        }
        let mut out = Self { grid: self.grid, coeffs, mean_free: false };
        out.refresh_mean_flag();
        out
    }

    pub fn dx(&self) -> Self {
        let g = self.grid;
        self.map_modes(|i, _| C64::new(0.0, g.kx_odd(i)))
    }

    pub fn dy(&self) -> Self {
        let g = self.grid;
        self.map_modes(|_, j| C64::new(0.0, g.ky_odd(j)))
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid;
        self.map_modes(|i, j| {
            let (kx, ky) = (g.kx(i), g.ky(j));
            C64::new(-(kx * kx + ky * ky), 0.0)
        })
    }

    pub fn inv_laplacian(&self) -> Result<Self> {
        self.require_mean_free()?;
        let g = self.grid;
        Ok(self.map_modes(|i, j| {
            let (kx, ky) = (g.kx(i), g.ky(j));
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                ZERO
            } else {
                C64::new(-1.0 / k2, 0.0)
            }
        }))
    }

    /// `(-∂y f, ∂x f)`.
    pub fn perp_gradient(&self) -> VectorField2 {
        VectorField2 { u1: -&self.dy(), u2: self.dx() }
    }

    pub fn gradient(&self) -> VectorField2 {
        VectorField2 { u1: self.dx(), u2: self.dy() }
    }

    pub fn require_mean_free(&self) -> Result<()> {
        if self.mean_free {
            Ok(())
        } else {
            Err(Error::NonzeroMean(self.coeffs[0].norm()))
        }
    }

    /// Two-thirds truncation: modes with `3|m| > n` in either direction are zeroed.
    pub fn dealias(&self) -> Self {
        let g = self.grid;
        self.map_modes(|i, j| {
            if dealias_keeps(mode_index(i, g.nx), g.nx) && dealias_keeps(mode_index(j, g.ny), g.ny) {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        })
    }

    /// L² norm over the periodic cell via Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_area() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Sobolev-type norm `(|cell| Σ (1+|k|²)^s |c_k|²)^½`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let g = self.grid;
        let mut acc = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k2 = g.kx(i).powi(2) + g.ky(j).powi(2);
                acc += (1.0 + k2).powf(s) * self.coeffs[j * g.nx + i].norm_sqr();
            }
        }
        (g.cell_area() * acc).sqrt()
    }

    /// Maximum of `|f|` over the collocation points.
    pub fn max_abs(&self) -> f64 {
        self.to_physical().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest violation of `c(-k) = conj(c(k))` over all modes.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        let mut worst: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mi = storage_index(-mode_index(i, g.nx), g.nx);
                let mj = storage_index(-mode_index(j, g.ny), g.ny);
                let d = self.coeffs[j * g.nx + i] - self.coeffs[mj * g.nx + mi].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Evaluates the trigonometric interpolant at an arbitrary point by direct summation.
    pub fn eval_at(&self, x: f64, y: f64) -> f64 {
        let g = self.grid;
        let ex = phase_table(g.nx, 2.0 * PI * x / g.lx);
        let ey = phase_table(g.ny, 2.0 * PI * y / g.ly);
        let mut acc = ZERO;
        for j in 0..g.ny {
            let row = &self.coeffs[j * g.nx..(j + 1) * g.nx];
            let mut racc = ZERO;
            for (c, e) in row.iter().zip(&ex) {
                racc += c * e;
            }
            acc += racc * ey[j];
        }
        acc.re
    }

    /// Fourier interpolation onto another grid with the same cell: modes resolvable
    /// on both grids (Nyquist excluded) are copied, the rest dropped.
    pub fn resample(&self, target: Grid2) -> Result<Self> {
        if target.lx != self.grid.lx || target.ly != self.grid.ly {
            return Err(Error::GridMismatch("resampling requires the same periodic cell".into()));
        }
        let cx = (self.grid.nx.min(target.nx) / 2) as i64;
        let cy = (self.grid.ny.min(target.ny) / 2) as i64;
        let mut coeffs = vec![ZERO; target.len()];
        for my in (1 - cy)..cy {
            for mx in (1 - cx)..cx {
                let dst = storage_index(my, target.ny) * target.nx + storage_index(mx, target.nx);
                coeffs[dst] = self.coeff(mx, my);
            }
        }
        Self::from_coeffs(target, coeffs)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= a;
        }
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "axpy on mismatched grids");
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o * a;
        }
        self.mean_free = self.mean_free && other.mean_free;
        if !self.mean_free {
            self.refresh_mean_flag();
        }
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }
}

/// `e^{i m θ}` for the signed modes of an `n`-point grid, in storage order.
fn phase_table(n: usize, theta: f64) -> Vec<C64> {
    let mut out = vec![ZERO; n];
    for (i, e) in out.iter_mut().enumerate() {
        let m = mode_index(i, n) as f64;
        *e = C64::from_polar(1.0, m * theta);
    }
    out
}

impl std::ops::Add<&SpectralField2> for &SpectralField2 {
    type Output = SpectralField2;
    fn add(self, rhs: &SpectralField2) -> SpectralField2 {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl std::ops::Sub<&SpectralField2> for &SpectralField2 {
    type Output = SpectralField2;
    fn sub(self, rhs: &SpectralField2) -> SpectralField2 {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl std::ops::Neg for &SpectralField2 {
    type Output = SpectralField2;
    fn neg(self) -> SpectralField2 {
        self.scaled(-1.0)
    }
}

/// Vector field with two spectral components on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField2 {
    pub u1: SpectralField2,
    pub u2: SpectralField2,
}

impl VectorField2 {
    pub fn new(u1: SpectralField2, u2: SpectralField2) -> Result<Self> {
        u1.same_grid(&u2)?;
        Ok(Self { u1, u2 })
    }

    pub fn zeros(grid: Grid2) -> Self {
        Self { u1: SpectralField2::zeros(grid), u2: SpectralField2::zeros(grid) }
    }

    pub fn grid(&self) -> &Grid2 {
        self.u1.grid()
    }

    pub fn divergence(&self) -> SpectralField2 {
        &self.u1.dx() + &self.u2.dy()
    }

    /// `∂x u2 - ∂y u1`.
    pub fn curl(&self) -> SpectralField2 {
        &self.u2.dx() - &self.u1.dy()
    }

    /// Largest `|i kx û1 + i ky û2|` over all modes.
    pub fn max_divergence_symbol(&self) -> f64 {
        self.divergence().coeffs().iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn to_physical(&self) -> (Vec<f64>, Vec<f64>) {
        to_physical_pair(&self.u1, &self.u2)
    }

    pub fn l2_norm(&self) -> f64 {
        self.u1.l2_norm().hypot(self.u2.l2_norm())
    }

    pub fn eval_at(&self, x: f64, y: f64) -> [f64; 2] {
        [self.u1.eval_at(x, y), self.u2.eval_at(x, y)]
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { u1: self.u1.scaled(a), u2: self.u2.scaled(a) }
    }

    pub fn dealias(&self) -> Self {
        Self { u1: self.u1.dealias(), u2: self.u2.dealias() }
    }
}

impl std::ops::Sub<&VectorField2> for &VectorField2 {
    type Output = VectorField2;
    fn sub(self, rhs: &VectorField2) -> VectorField2 {
        VectorField2 { u1: &self.u1 - &rhs.u1, u2: &self.u2 - &rhs.u2 }
    }
}

impl std::ops::Add<&VectorField2> for &VectorField2 {
    type Output = VectorField2;
    fn add(self, rhs: &VectorField2) -> VectorField2 {
        VectorField2 { u1: &self.u1 + &rhs.u1, u2: &self.u2 + &rhs.u2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralOp {
    Dx,
    Dy,
    Laplacian,
    InvLaplacian,
    PerpGradient,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Derived {
    Scalar(SpectralField2),
    Vector(VectorField2),
}

impl Derived {
    pub fn into_scalar(self) -> Option<SpectralField2> {
        match self {
            Derived::Scalar(f) => Some(f),
            Derived::Vector(_) => None,
        }
    }

    pub fn into_vector(self) -> Option<VectorField2> {
        match self {
            Derived::Vector(v) => Some(v),
            Derived::Scalar(_) => None,
        }
    }
}

pub fn spectral_calculus(f: &SpectralField2, op: SpectralOp) -> Result<Derived> {
    Ok(match op {
        SpectralOp::Dx => Derived::Scalar(f.dx()),
        SpectralOp::Dy => Derived::Scalar(f.dy()),
        SpectralOp::Laplacian => Derived::Scalar(f.laplacian()),
        SpectralOp::InvLaplacian => Derived::Scalar(f.inv_laplacian()?),
        SpectralOp::PerpGradient => Derived::Vector(f.perp_gradient()),
    })
}

/// Velocity `∇⊥ Δ⁻¹ ω` of a mean-free vorticity.
///
/// Modes on the Nyquist row or column carry no real velocity and are discarded, so
/// `curl(u)` reproduces `ω` away from them.
pub fn biot_savart(omega: &SpectralField2) -> Result<VectorField2> {
    omega.require_mean_free()?;
    let g = *omega.grid();
    let kxs: Vec<f64> = (0..g.nx).map(|i| g.kx_odd(i)).collect();
    let mut c1 = vec![ZERO; g.len()];
    let mut c2 = vec![ZERO; g.len()];
    for j in 0..g.ny {
        let ky = g.ky_odd(j);
        for (i, &kx) in kxs.iter().enumerate() {
            let k2 = kx * kx + ky * ky;
            if kx == 0.0 && g.kx(i) != 0.0 || ky == 0.0 && g.ky(j) != 0.0 || k2 == 0.0 {
                continue;
            }
            let idx = j * g.nx + i;
            let psi = omega.coeffs[idx] * (-1.0 / k2);
            c1[idx] = C64::new(ky * psi.im, -ky * psi.re);
            c2[idx] = C64::new(-kx * psi.im, kx * psi.re);
        }
    }
    Ok(VectorField2 {
        u1: SpectralField2 { grid: g, coeffs: c1, mean_free: true },
        u2: SpectralField2 { grid: g, coeffs: c2, mean_free: true },
    })
}

/// Grid values of `(∂x f, ∂y f)` from a single complex transform.
pub fn gradient_to_physical(f: &SpectralField2) -> (Vec<f64>, Vec<f64>) {
    let g = *f.grid();
    let kxs: Vec<f64> = (0..g.nx).map(|i| g.kx_odd(i)).collect();
    let mut data = vec![ZERO; g.len()];
    for j in 0..g.ny {
        let ky = g.ky_odd(j);
        for (i, &kx) in kxs.iter().enumerate() {
            let idx = j * g.nx + i;
            let c = f.coeffs[idx];
            data[idx] = C64::new(-kx * c.im - ky * c.re, kx * c.re - ky * c.im);
        }
    }
    fft2(&mut data, g.nx, g.ny, false);
    data.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Grid values of two real fields from a single complex transform of `â + i b̂`.
pub fn to_physical_pair(a: &SpectralField2, b: &SpectralField2) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.grid, b.grid, "fields must share a grid");
    let mut data: Vec<C64> = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + C64::new(-y.im, y.re)).collect();
    fft2(&mut data, a.grid.nx, a.grid.ny, false);
    data.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Leray projection onto discretely divergence-free fields.
pub fn leray_project(v: &VectorField2) -> VectorField2 {
    let g = *v.grid();
    let nx = g.nx;
    let mut c1 = v.u1.coeffs().to_vec();
    let mut c2 = v.u2.coeffs().to_vec();
    for j in 0..g.ny {
        let ky = g.ky_odd(j);
        for i in 0..nx {
            let kx = g.kx_odd(i);
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                continue;
            }
            let idx = j * nx + i;
            let dot = (c1[idx] * kx + c2[idx] * ky) / k2;
            c1[idx] -= dot * kx;
            c2[idx] -= dot * ky;
        }
    }
    VectorField2 {
        u1: SpectralField2::from_coeffs(g, c1).expect("same grid"),
        u2: SpectralField2::from_coeffs(g, c2).expect("same grid"),
    }
}

pub fn dealias(f: &SpectralField2) -> SpectralField2 {
    f.dealias()
}

/// Uniform grid of `n` points on the circle of length `2π`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid1 {
    pub n: usize,
}

impl Grid1 {
    pub fn new(n: usize) -> Result<Self> {
        check_count(n, "n")?;
        Ok(Self { n })
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn k(&self, i: usize) -> f64 {
        mode_index(i, self.n) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }
}

/// Real periodic function on the circle stored by its Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField1 {
    grid: Grid1,
    coeffs: Vec<C64>,
}

impl SpectralField1 {
    pub fn zeros(grid: Grid1) -> Self {
        Self { grid, coeffs: vec![ZERO; grid.n] }
    }

    pub fn from_coeffs(grid: Grid1, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.n {
            return Err(Error::GridMismatch(format!("{} coefficients for n = {}", coeffs.len(), grid.n)));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn from_physical(grid: Grid1, values: &[f64]) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!("{} samples for n = {}", values.len(), grid.n)));
        }
        let mut data: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        plan(grid.n, true).process(&mut data);
        let scale = 1.0 / grid.n as f64;
        for c in &mut data {
            *c *= scale;
        }
        Ok(Self { grid, coeffs: data })
    }

    pub fn from_fn(grid: Grid1, f: impl Fn(f64) -> f64) -> Self {
        Self::from_physical(grid, &grid.sample(f)).expect("sample length matches grid")
    }

    pub fn to_physical(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        plan(self.grid.n, false).process(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    pub fn grid(&self) -> &Grid1 {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, m: i64) -> C64 {
        self.coeffs[storage_index(m, self.grid.n)]
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = ZERO;
        out
    }

    pub fn map_modes(&self, mut m: impl FnMut(i64) -> C64) -> Self {
        let n = self.grid.n;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * m(mode_index(i, n)))
            .collect();
        Self { grid: self.grid, coeffs }
    }

    pub fn dx(&self) -> Self {
        let n = self.grid.n;
        self.map_modes(|m| if is_nyquist(m, n) { ZERO } else { C64::new(0.0, m as f64) })
    }

    /// Hilbert transform with multiplier `-i sgn(k)`, so that `H cos = sin`.
    pub fn hilbert(&self) -> Self {
        let n = self.grid.n;
        self.map_modes(|m| {
            if m == 0 || is_nyquist(m, n) {
                ZERO
            } else {
                C64::new(0.0, -(m.signum() as f64))
            }
        })
    }

    pub fn dealias(&self) -> Self {
        let n = self.grid.n;
        self.map_modes(|m| if dealias_keeps(m, n) { C64::new(1.0, 0.0) } else { ZERO })
    }

    pub fn max_abs(&self) -> f64 {
        self.to_physical().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        (2.0 * PI * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Trigonometric interpolant at an arbitrary point.
    pub fn eval_at(&self, x: f64) -> f64 {
        let e = phase_table(self.grid.n, x);
        self.coeffs.iter().zip(&e).map(|(c, e)| c * e).sum::<C64>().re
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// Fourier interpolation (or truncation) onto another grid; Nyquist modes are dropped.
    pub fn resample(&self, target: Grid1) -> Self {
        let c = (self.grid.n.min(target.n) / 2) as i64;
        let mut coeffs = vec![ZERO; target.n];
        for m in (1 - c)..c {
            coeffs[storage_index(m, target.n)] = self.coeff(m);
        }
        Self { grid: target, coeffs }
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "axpy on mismatched grids");
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o * a;
        }
    }

    /// Largest coefficient magnitude among the outer third of the retained band,
    /// relative to the largest coefficient overall.
    pub fn tail_ratio(&self) -> f64 {
        let n = self.grid.n as i64;
        let keep = n / 3;
        let lower = 2 * keep / 3;
        let mut peak: f64 = 0.0;
        let mut tail: f64 = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let m = mode_index(i, self.grid.n).abs();
            peak = peak.max(c.norm_sqr());
            if m > lower && m <= keep {
                tail = tail.max(c.norm_sqr());
            }
        }
        if peak == 0.0 {
            0.0
        } else {
            (tail / peak).sqrt()
        }
    }
}

pub fn hilbert_transform(f: &SpectralField1) -> SpectralField1 {
    f.hilbert()
}

/// Two-dimensional analogue of [`SpectralField1::tail_ratio`], using the larger of
/// the two directional band indices.
pub fn tail_ratio2(f: &SpectralField2) -> f64 {
    let g = *f.grid();
    let mut peak: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for j in 0..g.ny {
        let my = mode_index(j, g.ny).unsigned_abs() as f64 / (g.ny / 3) as f64;
        for i in 0..g.nx {
            let mx = mode_index(i, g.nx).unsigned_abs() as f64 / (g.nx / 3) as f64;
            let r = mx.max(my);
            let c = f.coeffs()[j * g.nx + i].norm_sqr();
            peak = peak.max(c);
            if r > 2.0 / 3.0 && r <= 1.0 {
                tail = tail.max(c);
            }
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        (tail / peak).sqrt()
    }
}

/// Product of two real fields computed on the grid and truncated by the 2/3 rule.
pub fn dealiased_product(grid: Grid2, a: &[f64], b: &[f64]) -> SpectralField2 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    SpectralField2::from_physical(grid, &prod).expect("grid-sized buffers").dealias()
}
