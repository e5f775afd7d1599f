//! Restarted GMRES with optional right preconditioning, real arithmetic.

/// Matrix-free linear operator on flat real vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct GmresConfig {
    /// Krylov dimension before restart.
    pub restart: usize,
    /// Cap on total matrix applications.
    pub max_iter: usize,
    /// Relative residual target.
    pub tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig { restart: 80, max_iter: 600, tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Solve A x = b with x0 = 0. When a preconditioner is supplied the system
/// solved is A M^{-1} y = b with x = M^{-1} y (right preconditioning), so the
/// reported residual is the true one.
pub fn gmres(
    a: &dyn LinearOperator,
    m_inv: Option<&dyn LinearOperator>,
    b: &[f64],
    config: &GmresConfig,
) -> GmresResult {
    let n = a.dim();
    assert_eq!(b.len(), n, "rhs dimension mismatch");
    let b_norm = norm(b);
    if b_norm < 1e-300 {
        return GmresResult { x: vec![0.0; n], iterations: 0, residual: 0.0, converged: true };
    }

    let apply_op = |x: &[f64], y: &mut [f64], tmp: &mut Vec<f64>| match m_inv {
        Some(m) => {
            tmp.resize(n, 0.0);
            m.apply(x, tmp);
            a.apply(tmp, y);
        }
        None => a.apply(x, y),
    };

    let mut y_acc = vec![0.0; n];
    let mut total_iter = 0usize;
    let mut tmp = Vec::new();
    let mut residual = 1.0;

    while total_iter < config.max_iter {
        // r = b - A M^{-1} y_acc
        let mut r = vec![0.0; n];
        if total_iter == 0 {
            r.copy_from_slice(b);
        } else {
            apply_op(&y_acc, &mut r, &mut tmp);
            for (ri, bi) in r.iter_mut().zip(b.iter()) {
                *ri = bi - *ri;
            }
        }
        let r_norm = norm(&r);
        residual = r_norm / b_norm;
        if residual < config.tol {
            break;
        }

        let m_dim = config.restart.min(n);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_dim + 1);
        let inv = 1.0 / r_norm;
        basis.push(r.iter().map(|v| v * inv).collect());

        // Hessenberg columns, Givens rotations, residual vector g.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m_dim);
        let mut cs = vec![0.0; m_dim];
        let mut sn = vec![0.0; m_dim];
        let mut g = vec![0.0; m_dim + 1];
        g[0] = r_norm;

        let mut k_used = 0;
        for k in 0..m_dim {
            if total_iter >= config.max_iter {
                break;
            }
            total_iter += 1;
            let mut w = vec![0.0; n];
            apply_op(&basis[k], &mut w, &mut tmp);
            let mut hk = vec![0.0; k + 2];
            for (j, vj) in basis.iter().enumerate().take(k + 1) {
                let hjk = dot(vj, &w);
                hk[j] = hjk;
                for (wi, vji) in w.iter_mut().zip(vj.iter()) {
                    *wi -= hjk * vji;
                }
            }
            let w_norm = norm(&w);
            hk[k + 1] = w_norm;

            // Apply accumulated rotations, then form the new one.
            for j in 0..k {
                let t = cs[j] * hk[j] + sn[j] * hk[j + 1];
                hk[j + 1] = -sn[j] * hk[j] + cs[j] * hk[j + 1];
                hk[j] = t;
            }
            let denom = hk[k].hypot(hk[k + 1]);
            if denom < 1e-300 {
                h.push(hk);
                k_used = k + 1;
                break;
            }
            cs[k] = hk[k] / denom;
            sn[k] = hk[k + 1] / denom;
            hk[k] = denom;
            hk[k + 1] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            h.push(hk);
            k_used = k + 1;

            residual = g[k + 1].abs() / b_norm;
            if residual < config.tol {
                break;
            }
            if w_norm < 1e-300 {
                break; // lucky breakdown
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }

        // Back-substitute H y = g and accumulate the correction.
        let mut yk = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut sum = g[i];
            for (j, hj) in h.iter().enumerate().skip(i + 1).take(k_used - i - 1) {
                sum -= hj[i] * yk[j];
            }
            if h[i][i].abs() > 1e-300 {
                yk[i] = sum / h[i][i];
            }
        }
        for (i, &yi) in yk.iter().enumerate() {
            for (acc, vi) in y_acc.iter_mut().zip(basis[i].iter()) {
                *acc += yi * vi;
            }
        }
        if residual < config.tol {
            break;
        }
    }

    // Undo the right preconditioning.
    let x = match m_inv {
        Some(m) => {
            let mut out = vec![0.0; n];
            m.apply(&y_acc, &mut out);
            out
        }
        None => y_acc,
    };
    GmresResult { x, iterations: total_iter, residual, converged: residual < config.tol }
}
