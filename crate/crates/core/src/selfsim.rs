//! Self-similar profiles of the CLM model and the perturbative toolkit around them:
//! profile residual, bordered Newton solve, outgoing check and the weighted
//! coercive-plus-finite-rank verifier for transport operators on `[0, 1]`.
//!
//! Profiles live on the whole line. The grid is the image of a uniform grid on the
//! circle under `X = s tan(θ/2)`, so the line Hilbert transform becomes the periodic
//! one minus its value at `θ = π`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spectral::{Grid1, SpectralField1};

/// `n` points `X_j = s tan(θ_j/2)` with `θ_j = -π + 2π(j + ½)/n`, symmetric about 0.
#[derive(Clone, Debug)]
pub struct ProfileGrid {
    pub n: usize,
    pub scale: f64,
    pub xs: Vec<f64>,
    sin_theta: Vec<f64>,
    /// Periodic derivative `d/dθ`.
    d: DMatrix<f64>,
    /// Line Hilbert transform.
    h: DMatrix<f64>,
    /// Row evaluating `Ω′(0)`.
    slope_row: DVector<f64>,
}

impl ProfileGrid {
    pub fn new(n: usize, scale: f64) -> Result<Self> {
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("profile grid needs an even n >= 16, got {n}")));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidGrid(format!("profile grid scale {scale} must be positive")));
        }
        let g = Grid1::new(n)?;
        let theta = |j: usize| -PI + 2.0 * PI * (j as f64 + 0.5) / n as f64;
        let xs: Vec<f64> = (0..n).map(|j| scale * (0.5 * theta(j)).tan()).collect();
        let sin_theta = (0..n).map(|j| theta(j).sin()).collect();
        // Sample j sits at φ = 2πj/n of the periodic grid, i.e. φ = θ + π - π/n.
        let phi_zero = PI - PI / n as f64;
        let phi_inf = 2.0 * PI - PI / n as f64;
        let mut d = DMatrix::zeros(n, n);
        let mut hp = DMatrix::zeros(n, n);
        let mut slope_row = DVector::zeros(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let f = SpectralField1::from_physical(g, &e)?;
            let df = f.dx();
            let hf = f.hilbert();
            d.set_column(j, &DVector::from_vec(df.to_physical()));
            hp.set_column(j, &DVector::from_vec(hf.to_physical()));
            slope_row[j] = 2.0 / scale * df.eval_at(phi_zero);
            let h_inf = hf.eval_at(phi_inf);
            for i in 0..n {
                hp[(i, j)] -= h_inf;
            }
        }
        Ok(Self { n, scale, xs, sin_theta, d, h: hp, slope_row })
    }

    /// Grid whose outermost points sit at `±l`.
    pub fn with_extent(n: usize, l: f64) -> Result<Self> {
        Self::new(n, l * (0.5 * PI / n as f64).tan())
    }

    pub fn extent(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.xs.iter().map(|&x| f(x)).collect()
    }

    /// `XΩ′` at the grid points.
    pub fn x_dx(&self, omega: &[f64]) -> Vec<f64> {
        let d = &self.d * DVector::from_column_slice(omega);
        d.iter().zip(&self.sin_theta).map(|(a, s)| a * s).collect()
    }

    pub fn hilbert(&self, omega: &[f64]) -> Vec<f64> {
        (&self.h * DVector::from_column_slice(omega)).iter().copied().collect()
    }

    pub fn slope_at_zero(&self, omega: &[f64]) -> f64 {
        self.slope_row.dot(&DVector::from_column_slice(omega))
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `Ω(X) = -4X/(1 + 4X²)`, the `λ = 1` profile with `Ω′(0) = -4`.
pub fn clm_profile(x: f64) -> f64 {
    -4.0 * x / (1.0 + 4.0 * x * x)
}

#[derive(Clone, Debug)]
pub struct ProfileProblem {
    pub grid: ProfileGrid,
    /// Prescribed `Ω′(0)`.
    pub slope: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Largest admissible `|Ω|` at the outermost grid points relative to `max |Ω|`.
    pub tail_tol: f64,
}

impl ProfileProblem {
    pub fn new(grid: ProfileGrid) -> Self {
        Self { grid, slope: -4.0, tol: 1e-10, max_iters: 30, tail_tol: 0.1 }
    }
}

fn check_tail(grid: &ProfileGrid, omega: &[f64], tail_tol: f64) -> Result<()> {
    let tail = omega[0].abs().max(omega[grid.n - 1].abs());
    if tail > tail_tol * sup_norm(omega).max(f64::MIN_POSITIVE) {
        return Err(Error::TailTooLarge(tail));
    }
    Ok(())
}

/// `R(Ω, λ) = Ω + λXΩ′ - ΩHΩ` at the grid points.
pub fn profile_residual(grid: &ProfileGrid, omega: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_tail(grid, omega, 0.1)?;
    Ok(residual_unchecked(grid, omega, lambda))
}

fn residual_unchecked(grid: &ProfileGrid, omega: &[f64], lambda: f64) -> Vec<f64> {
    let xd = grid.x_dx(omega);
    let h = grid.hilbert(omega);
    (0..grid.n).map(|i| omega[i] + lambda * xd[i] - omega[i] * h[i]).collect()
}

/// Discrete Fréchet derivative of the profile residual in `(Ω, λ)`.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    /// `δΩ ↦ δΩ + λ*XδΩ′ - δΩ HΩ* - Ω* HδΩ`.
    pub matrix: DMatrix<f64>,
    /// `XΩ*′`, the image of `δλ = 1`.
    pub lambda_column: Vec<f64>,
}

impl LinearizedOperator {
    pub fn apply(&self, d_omega: &[f64], d_lambda: f64) -> Vec<f64> {
        let v = &self.matrix * DVector::from_column_slice(d_omega);
        v.iter().zip(&self.lambda_column).map(|(a, c)| a + d_lambda * c).collect()
    }
}

pub fn linearized_operator(grid: &ProfileGrid, omega: &[f64], lambda: f64) -> LinearizedOperator {
    let n = grid.n;
    let h_omega = grid.hilbert(omega);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = lambda * grid.sin_theta[i] * grid.d[(i, j)] - omega[i] * grid.h[(i, j)];
        }
        m[(i, i)] += 1.0 - h_omega[i];
    }
    LinearizedOperator { matrix: m, lambda_column: grid.x_dx(omega) }
}

#[derive(Clone, Debug)]
pub struct ProfileSolution {
    pub omega: Vec<f64>,
    pub lambda: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub converged: bool,
}

/// Newton iteration on `(Ω, λ)` for `R(Ω, λ) = 0`, `Ω′(0) = slope`. Each step solves
/// the bordered system `[dR | XΩ′; slope row | 0]` by LU.
pub fn newton_solve(problem: &ProfileProblem, omega0: &[f64], lambda0: f64) -> Result<ProfileSolution> {
    let grid = &problem.grid;
    let n = grid.n;
    if omega0.len() != n {
        return Err(Error::GridMismatch(format!("{} profile values for n = {n}", omega0.len())));
    }
    check_tail(grid, omega0, problem.tail_tol)?;
    let mut omega = omega0.to_vec();
    let mut lambda = lambda0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for iter in 0..=problem.max_iters {
        let r = residual_unchecked(grid, &omega, lambda);
        let norm_gap = grid.slope_at_zero(&omega) - problem.slope;
        let res = sup_norm(&r).max(norm_gap.abs());
        if !res.is_finite() {
            return Err(Error::Divergence { iterations: iter, residual: res });
        }
        if res < problem.tol {
            return Ok(ProfileSolution { omega, lambda, residual_norm: res, newton_iters: iter, converged: true });
        }
        if iter == problem.max_iters {
            return Err(Error::Divergence { iterations: iter, residual: res });
        }
        if res < 0.5 * best {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 {
                return Err(Error::Divergence { iterations: iter, residual: res });
            }
        }
        best = best.min(res);
        let lin = linearized_operator(grid, &omega, lambda);
        let mut a = DMatrix::zeros(n + 1, n + 1);
        a.view_mut((0, 0), (n, n)).copy_from(&lin.matrix);
        for i in 0..n {
            a[(i, n)] = lin.lambda_column[i];
            a[(n, i)] = grid.slope_row[i];
        }
        let mut b = DVector::zeros(n + 1);
        for i in 0..n {
            b[i] = -r[i];
        }
        b[n] = -norm_gap;
        let lu = a.full_piv_lu();
        let u = lu.u();
        let diag: Vec<f64> = (0..=n).map(|i| u[(i, i)].abs()).collect();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if !(lo > 1e-13 * hi) {
            return Err(Error::SingularBorderedSystem { iterate: iter });
        }
        let step = lu.solve(&b).ok_or(Error::SingularBorderedSystem { iterate: iter })?;
        for i in 0..n {
            omega[i] += step[i];
        }
        lambda += step[n];
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutgoingReport {
    pub certified: bool,
    pub c_estimate: f64,
}

/// `min (λX + U(X))·X / X²` over the nonzero grid points; certified iff it reaches `c_floor`.
pub fn outgoing_check(xs: &[f64], u_star: &[f64], lambda: f64, c_floor: f64) -> OutgoingReport {
    let c = xs
        .iter()
        .zip(u_star)
        .filter(|(x, _)| **x != 0.0)
        .map(|(x, u)| (lambda * x + u) * x / (x * x))
        .fold(f64::INFINITY, f64::min);
    OutgoingReport { certified: c >= c_floor && c.is_finite(), c_estimate: c }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSpaceParams {
    /// Exponent of the weight `x^{-N}`.
    pub n_weight: f64,
    pub delta: f64,
}

impl WeightedSpaceParams {
    pub fn new(n_weight: f64, delta: f64) -> Result<Self> {
        if !(n_weight >= 4.0) {
            return Err(Error::Precondition(format!("weight exponent N = {n_weight} must be at least 4")));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::Precondition(format!("inner radius delta = {delta} must lie in (0, 1/2)")));
        }
        Ok(Self { n_weight, delta })
    }
}

#[derive(Clone, Debug)]
pub struct OperatorDecomposition {
    pub nodes: Vec<f64>,
    pub operator: DMatrix<f64>,
    pub coercive_part: DMatrix<f64>,
    pub finite_rank_part: DMatrix<f64>,
    /// Numerical rank of the finite-rank part and its factors `U diag(σ) Vᵀ`.
    pub rank: usize,
    pub factors: (DMatrix<f64>, Vec<f64>, DMatrix<f64>),
    /// Nodes next to `x = 0` whose rows and columns are replaced in the coercive part.
    pub boundary_nodes: usize,
    /// Smallest eigenvalue of the symmetrized, weighted coercive part.
    pub c_coercivity: f64,
    /// Smallest eigenvalue of the symmetrized, weighted full operator.
    pub full_min_eig: f64,
    /// Worst ratio of the inner weighted estimate over the test family.
    pub inner_ratio: f64,
    pub certified: bool,
}

/// `x_0 = 0`, geometric nodes `x_min · 1.1^k` until the step reaches `h`, then uniform
/// to `1`.
pub fn weighted_nodes(x_min: f64, h: f64) -> Vec<f64> {
    let mut xs = vec![0.0, x_min];
    let mut x = x_min;
    while 0.1 * x < h {
        x *= 1.1;
        xs.push(x);
    }
    let remaining = 1.0 - x;
    let steps = (remaining / h).ceil().max(1.0) as usize;
    for k in 1..=steps {
        xs.push(x + remaining * k as f64 / steps as f64);
    }
    xs
}

fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> =
        (0..m).map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn derivative(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5;
    if x < 2.0 * h {
        (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h)
    } else {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }
}

fn check_hypotheses(u: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64) -> Result<()> {
    let fail = |m: String| Err(Error::Precondition(m));
    if u(0.0).abs() > 1e-12 || u(1.0).abs() > 1e-12 {
        return fail(format!("u must vanish at both ends, got u(0) = {:e}, u(1) = {:e}", u(0.0), u(1.0)));
    }
    let du0 = derivative(u, 0.0);
    if !(du0 > 0.0) {
        return fail(format!("u'(0) = {du0:e} must be positive"));
    }
    if let Some(x) = (1..1000).map(|k| k as f64 / 1000.0).find(|&x| !(u(x) > 0.0)) {
        return fail(format!("u must be positive on (0, 1), fails at x = {x}"));
    }
    if !(g(1.0) > 0.0) {
        return fail(format!("g(1) = {:e} must be positive", g(1.0)));
    }
    Ok(())
}

/// Worst value of `∫₀^δ (u f′ + g f) f x^{-N} / ∫₀^δ f² x^{-N}` over `f = x^m φ` with
/// `m ≥ N/2` and a few smooth `φ`.
pub fn inner_estimate(u: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, params: &WeightedSpaceParams) -> f64 {
    let (nodes, weights) = gauss_legendre(80);
    let d = params.delta;
    let big_n = params.n_weight;
    let phis: [(&dyn Fn(f64) -> f64, &dyn Fn(f64) -> f64); 4] = [
        (&|_| 1.0, &|_| 0.0),
        (&|x| 1.0 - x / d, &|_| -1.0 / d),
        (&|x| (1.0 - x / d).powi(2), &|x| -2.0 * (1.0 - x / d) / d),
        (&|x| (PI * x / d).cos(), &|x| -PI / d * (PI * x / d).sin()),
    ];
    let m0 = (0.5 * big_n).ceil();
    let mut worst = f64::INFINITY;
    for dm in 0..4 {
        let m = m0 + dm as f64;
        for (phi, dphi) in &phis {
            let (mut num, mut den) = (0.0, 0.0);
            for (t, w) in nodes.iter().zip(&weights) {
                let x = 0.5 * d * (t + 1.0);
                let wx = 0.5 * d * w * x.powf(-big_n);
                let f = x.powf(m) * phi(x);
                let df = m * x.powf(m - 1.0) * phi(x) + x.powf(m) * dphi(x);
                num += wx * (u(x) * df + g(x) * f) * f;
                den += wx * f * f;
            }
            if den > 0.0 {
                worst = worst.min(num / den);
            }
        }
    }
    worst
}

fn weighted_sym_min_eig(a: &DMatrix<f64>, log_w: &[f64]) -> f64 {
    let n = a.nrows();
    let s = DMatrix::from_fn(n, n, |i, j| {
        let l = |p: usize, q: usize| a[(p, q)] * (0.5 * (log_w[p] - log_w[q])).exp();
        if a[(i, j)] == 0.0 && a[(j, i)] == 0.0 {
            0.0
        } else {
            0.5 * (l(i, j) + l(j, i))
        }
    });
    SymmetricEigen::new(s).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Assembles `𝓛f = u f′ + g f` with upwind differences on a grid clustered at `x = 0`,
/// splits `𝓛 = A_c + K` where `K` is supported on the first boundary nodes, and
/// certifies coercivity of `A_c` in the weighted norm `Σ f_i² (x_i² + x_min²)^{-N/2} q_i`.
pub fn lemma_decomposition_check(
    u: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    params: &WeightedSpaceParams,
) -> Result<OperatorDecomposition> {
    WeightedSpaceParams::new(params.n_weight, params.delta)?;
    check_hypotheses(u, g)?;
    let x_min = 1e-6;
    let xs = weighted_nodes(x_min, 1.0 / 200.0);
    let n = xs.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = g(xs[i]);
        if i > 0 {
            let c = u(xs[i]) / (xs[i] - xs[i - 1]);
            a[(i, i)] += c;
            a[(i, i - 1)] -= c;
        }
    }
    let log_w: Vec<f64> = (0..n)
        .map(|i| {
            let q = if i == 0 { 0.5 * (xs[1] - xs[0]) } else if i == n - 1 { 0.5 * (xs[i] - xs[i - 1]) } else { 0.5 * (xs[i + 1] - xs[i - 1]) };
            -0.5 * params.n_weight * (xs[i] * xs[i] + x_min * x_min).ln() + q.ln()
        })
        .collect();
    let full_min_eig = weighted_sym_min_eig(&a, &log_w);
    let split = |rb: usize| {
        let mut ac = a.clone();
        for k in 0..rb {
            for j in 0..n {
                ac[(k, j)] = 0.0;
                ac[(j, k)] = 0.0;
            }
            ac[(k, k)] = 1.0;
        }
        ac
    };
    let max_boundary = 8.min(n - 1);
    let mut chosen = None;
    for rb in 0..=max_boundary {
        let ac = split(rb);
        let c = weighted_sym_min_eig(&ac, &log_w);
        if c > 0.0 {
            chosen = Some((rb, ac, c));
            break;
        }
    }
    let (boundary_nodes, coercive_part, c_coercivity) = match chosen {
        Some(found) => found,
        None => {
            let ac = split(max_boundary);
            let c = weighted_sym_min_eig(&ac, &log_w);
            (max_boundary, ac, c)
        }
    };
    let finite_rank_part = &a - &coercive_part;
    let svd = finite_rank_part.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-12 * smax.max(1.0)).collect();
    let rank = keep.len();
    let uu = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let factors = (
        DMatrix::from_fn(n, rank, |i, k| uu[(i, keep[k])]),
        keep.iter().map(|&k| svd.singular_values[k]).collect(),
        DMatrix::from_fn(rank, n, |k, j| vt[(keep[k], j)]),
    );
    let inner_ratio = inner_estimate(u, g, params);
    Ok(OperatorDecomposition {
        nodes: xs,
        operator: a,
        coercive_part,
        finite_rank_part,
        rank,
        factors,
        boundary_nodes,
        c_coercivity,
        full_min_eig,
        inner_ratio,
        certified: c_coercivity > 0.0 && inner_ratio > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> ProfileGrid {
        ProfileGrid::new(128, 1.0).unwrap()
    }

    #[test]
    fn grid_is_symmetric_and_reaches_far() {
        let g = ProfileGrid::with_extent(128, 50.0).unwrap();
        assert!((g.extent() - 50.0).abs() < 1e-9);
        for j in 0..g.n {
            assert!((g.xs[j] + g.xs[g.n - 1 - j]).abs() < 1e-9 * g.xs[j].abs().max(1.0));
        }
    }

    #[test]
    fn line_hilbert_of_lorentzians() {
        let g = grid();
        let f = g.sample(|x| 1.0 / (1.0 + x * x));
        let hf = g.hilbert(&f);
        for (x, h) in g.xs.iter().zip(&hf) {
            assert!((h - x / (1.0 + x * x)).abs() < 1e-12);
        }
        let omega = g.sample(clm_profile);
        let h = g.hilbert(&omega);
        for (x, v) in g.xs.iter().zip(&h) {
            assert!((v - 2.0 / (1.0 + 4.0 * x * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_residual_examples() {
        let g = grid();
        assert!(sup_norm(&profile_residual(&g, &vec![0.0; g.n], 0.7).unwrap()) == 0.0);
        let omega = g.sample(clm_profile);
        assert!(sup_norm(&profile_residual(&g, &omega, 1.0).unwrap()) < 1e-11);
        assert!(sup_norm(&profile_residual(&g, &omega, 1.1).unwrap()) > 1e-2);
        assert!((g.slope_at_zero(&omega) + 4.0).abs() < 1e-10);
    }

    #[test]
    fn non_decaying_profiles_are_rejected() {
        let g = grid();
        let omega = g.sample(|x| x.atan());
        assert!(matches!(profile_residual(&g, &omega, 1.0), Err(Error::TailTooLarge(_))));
    }

    #[test]
    fn residual_is_quadratic_in_amplitude() {
        let g = grid();
        let omega = g.sample(|x| -x * (-x * x).exp());
        let lambda = 0.8;
        let xd = g.x_dx(&omega);
        let h = g.hilbert(&omega);
        for &a in &[0.5, 2.0] {
            let scaled: Vec<f64> = omega.iter().map(|w| a * w).collect();
            let r = profile_residual(&g, &scaled, lambda).unwrap();
            for i in 0..g.n {
                let expect = a * omega[i] + lambda * a * xd[i] - a * a * omega[i] * h[i];
                assert!((r[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linearization_examples() {
        let g = grid();
        let omega = g.sample(clm_profile);
        let lin = linearized_operator(&g, &omega, 1.0);
        let out = lin.apply(&vec![0.0; g.n], 1.0);
        assert_eq!(out, g.x_dx(&omega));
        let kernel = lin.apply(&g.x_dx(&omega), 0.0);
        assert!(sup_norm(&kernel) < 1e-9, "{}", sup_norm(&kernel));
    }

    #[test]
    fn frechet_derivative_is_first_order_accurate() {
        let g = grid();
        let omega = g.sample(|x| -2.0 * x / (1.0 + x * x));
        let delta = g.sample(|x| (x - 0.3) * (-(x - 0.3) * (x - 0.3)).exp());
        let lin = linearized_operator(&g, &omega, 0.9);
        let r0 = residual_unchecked(&g, &omega, 0.9);
        let dr = lin.apply(&delta, 0.4);
        let err = |eps: f64| {
            let pert: Vec<f64> = omega.iter().zip(&delta).map(|(w, d)| w + eps * d).collect();
            let r1 = residual_unchecked(&g, &pert, 0.9 + 0.4 * eps);
            let diff: Vec<f64> = (0..g.n).map(|i| (r1[i] - r0[i]) / eps - dr[i]).collect();
            sup_norm(&diff)
        };
        let ratio = err(1e-4) / err(1e-5);
        assert!((ratio - 10.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn newton_recovers_the_profile() {
        let problem = ProfileProblem::new(grid());
        let init = problem.grid.sample(|x| clm_profile(x) + 0.05 * x * (-x * x).exp());
        let sol = newton_solve(&problem, &init, 1.05).unwrap();
        assert!(sol.converged && sol.residual_norm < 1e-8);
        assert!((sol.lambda - 1.0).abs() < 1e-6, "lambda {}", sol.lambda);
        let exact = problem.grid.sample(clm_profile);
        let err = sol.omega.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn newton_at_exact_profile_takes_no_steps() {
        let problem = ProfileProblem::new(grid());
        let sol = newton_solve(&problem, &problem.grid.sample(clm_profile), 1.0).unwrap();
        assert_eq!(sol.newton_iters, 0);
    }

    #[test]
    fn outgoing_examples() {
        let g = grid();
        let zero = vec![0.0; g.n];
        let r = outgoing_check(&g.xs, &zero, 1.0, 0.5);
        assert!(r.certified && (r.c_estimate - 1.0).abs() < 1e-15);
        assert!(!outgoing_check(&g.xs, &zero, -0.5, 0.0).certified);
        let u = g.sample(|x| -0.3 * x / (1.0 + x * x));
        let r = outgoing_check(&g.xs, &u, 1.0, 0.5);
        assert!(r.certified && (r.c_estimate - 0.7).abs() < 1e-3);
    }

    fn logistic(x: f64) -> f64 {
        x * (1.0 - x)
    }

    #[test]
    fn lemma_certifies_logistic_transport() {
        let p = WeightedSpaceParams::new(8.0, 0.1).unwrap();
        let d = lemma_decomposition_check(&logistic, &|_| 1.0, &p).unwrap();
        assert!(d.certified && d.c_coercivity > 0.0 && d.inner_ratio > 0.0);
        assert!(d.nodes.len() <= 400);
        let sum = &d.coercive_part + &d.finite_rank_part;
        assert!((sum - &d.operator).amax() < 1e-12);
        let p2 = WeightedSpaceParams::new(16.0, 0.1).unwrap();
        assert!(lemma_decomposition_check(&logistic, &|_| 1.0, &p2).unwrap().certified);
    }

    #[test]
    fn lemma_hypotheses_are_enforced() {
        let p = WeightedSpaceParams::new(8.0, 0.1).unwrap();
        assert!(matches!(lemma_decomposition_check(&logistic, &|_| -1.0, &p), Err(Error::Precondition(_))));
        assert!(lemma_decomposition_check(&|x| -logistic(x), &|_| 1.0, &p).is_err());
        assert!(lemma_decomposition_check(&|x| x, &|_| 1.0, &p).is_err());
        assert!(WeightedSpaceParams::new(2.0, 0.1).is_err());
        assert!(WeightedSpaceParams::new(8.0, 0.7).is_err());
    }

    #[test]
    fn finite_rank_part_carries_a_negative_boundary_coefficient() {
        let p = WeightedSpaceParams::new(8.0, 0.1).unwrap();
        let g = |x: f64| 1.0 - 6.0 * (-(x / 1e-6).powi(2)).exp();
        let d = lemma_decomposition_check(&logistic, &g, &p).unwrap();
        assert!(d.full_min_eig < 0.0);
        assert!(d.boundary_nodes > 0 && d.rank > 0 && d.rank <= 2 * d.boundary_nodes);
        assert!(d.c_coercivity > 0.0);
        let (u, s, vt) = &d.factors;
        let rebuilt = u * DMatrix::from_diagonal(&DVector::from_column_slice(s)) * vt;
        assert!((rebuilt - &d.finite_rank_part).amax() < 1e-10);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((integral - 2.0 / 19.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn outgoing_constant_for_pure_scaling(lambda in -2.0f64..2.0) {
            let xs = [-3.0, -0.5, 0.0, 0.25, 4.0];
            let r = outgoing_check(&xs, &[0.0; 5], lambda, 0.0);
            prop_assert!((r.c_estimate - lambda).abs() < 1e-15);
        }
    }
}
