//! Restarted GMRES for the elliptic Newton solves.

pub struct KrylovOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` with right preconditioning `A M⁻¹ z = b`, `x = M⁻¹ z`, starting
/// from `x = 0`.
pub fn gmres(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_m_inv: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rtol: f64,
    restart: usize,
    max_iters: usize,
) -> KrylovOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return KrylovOutcome { solution: x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut total = 0;
    while total < max_iters {
        let ax = apply_a(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= rtol {
            return KrylovOutcome { solution: x, iterations: total, relative_residual: rel, converged: true };
        }
        let m = restart.min(max_iters - total);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for k in 0..m {
            let mut w = apply_a(&apply_m_inv(&v[k]));
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            let hk1 = h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            used = k + 1;
            total += 1;
            if g[k + 1].abs() / bnorm <= rtol || hk1 == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hk1).collect());
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for j in i + 1..used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut z = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (zj, vj) in z.iter_mut().zip(vi) {
                *zj += yi * vj;
            }
        }
        let dx = apply_m_inv(&z);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        if used == 0 {
            break;
        }
    }
    let ax = apply_a(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let final_rel = norm(&r) / bnorm;
    KrylovOutcome { solution: x, iterations: total, relative_residual: final_rel, converged: final_rel <= rtol }
}
