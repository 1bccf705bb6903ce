//! Finite-dimensional convex geometry used by the eigenvalue and cone
//! solvers: Wolfe's minimum-norm-point algorithm, Euclidean projections
//! onto the simplex and the ℓ1 ball, nonnegative least squares, and a
//! projected Newton method for bound-constrained smooth problems.

use nalgebra::{DMatrix, DVector};

use crate::numeric;

/// A point set given implicitly, for Wolfe's algorithm.
pub trait PointSet {
    fn dim(&self) -> usize;
    fn point(&self, id: usize) -> Vec<f64>;
    /// `argmin_q ⟨x, q⟩` over the set, with the minimal value.
    fn linear_minimizer(&self, x: &[f64]) -> (usize, f64);
    fn initial(&self) -> usize;
}

#[derive(Clone, Debug)]
pub struct MinNormPoint {
    pub x: Vec<f64>,
    /// Convex weights on point ids; positive, summing to one.
    pub weights: Vec<(usize, f64)>,
    pub norm: f64,
    pub iterations: usize,
}

/// Minimum norm point of the convex hull of a point set (Wolfe, 1976).
///
/// Terminates finitely in exact arithmetic; the tolerances below only
/// guard against cycling on round-off.
pub fn min_norm_point<P: PointSet>(set: &P, max_major: usize) -> MinNormPoint {
    let first = set.initial();
    let mut ids = vec![first];
    let mut pts = vec![set.point(first)];
    let mut w = vec![1.0];
    let mut x = pts[0].clone();
    let mut scale = numeric::sum_sq(&x).max(f64::MIN_POSITIVE);
    let mut iterations = 0;

    for _ in 0..max_major {
        iterations += 1;
        let xx = numeric::sum_sq(&x);
        let (j, v) = set.linear_minimizer(&x);
        let qj = set.point(j);
        scale = scale.max(numeric::sum_sq(&qj));
        if xx - v <= 1e-13 * scale || xx <= 1e-30 * scale {
            break;
        }
        if ids.contains(&j) {
            break;
        }
        ids.push(j);
        pts.push(qj);
        w.push(0.0);

        for _minor in 0..(4 * pts.len() + 8) {
            let alpha = affine_minimizer(&pts);
            if alpha.iter().all(|&a| a > 1e-14) {
                w = alpha;
                break;
            }
            let mut theta = 1.0_f64;
            for (wi, ai) in w.iter().zip(&alpha) {
                if *ai <= 1e-14 && wi - ai > 0.0 {
                    theta = theta.min(wi / (wi - ai));
                }
            }
            for (wi, ai) in w.iter_mut().zip(&alpha) {
                *wi = theta * ai + (1.0 - theta) * *wi;
            }
            let mut k = 0;
            while k < w.len() {
                if w[k] <= 1e-14 {
                    w.remove(k);
                    pts.remove(k);
                    ids.remove(k);
                } else {
                    k += 1;
                }
            }
            let total = numeric::sum(w.iter().copied());
            w.iter_mut().for_each(|wi| *wi /= total);
            if pts.len() == 1 {
                break;
            }
        }
        x = combination(&pts, &w, set.dim());
    }

    let norm = numeric::norm2(&x);
    MinNormPoint {
        x,
        weights: ids.into_iter().zip(w).collect(),
        norm,
        iterations,
    }
}

fn combination(pts: &[Vec<f64>], w: &[f64], dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|r| numeric::sum(pts.iter().zip(w).map(|(q, wi)| q[r] * wi)))
        .collect()
}

/// Weights `α` (summing to one) minimizing `‖Σ α_i q_i‖` over the affine hull.
fn affine_minimizer(pts: &[Vec<f64>]) -> Vec<f64> {
    let k = pts.len();
    if k == 1 {
        return vec![1.0];
    }
    let dim = pts[0].len();
    let d = DMatrix::from_fn(dim, k - 1, |r, c| pts[c + 1][r] - pts[0][r]);
    let rhs = DVector::from_iterator(dim, pts[0].iter().map(|v| -v));
    let svd = d.svd(true, true);
    let tol = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let c = svd
        .solve(&rhs, tol)
        .unwrap_or_else(|_| DVector::zeros(k - 1));
    let mut alpha = Vec::with_capacity(k);
    alpha.push(1.0 - numeric::sum(c.iter().copied()));
    alpha.extend(c.iter().copied());
    alpha
}

/// Euclidean projection onto `{x ≥ 0, Σx = z}`.
pub fn project_simplex(v: &[f64], z: f64) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut tau = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - z) / (k + 1) as f64;
        if uk - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Euclidean projection onto `{x : ‖x‖₁ ≤ r}`.
pub fn project_l1_ball(v: &[f64], r: f64) -> Vec<f64> {
    if numeric::norm1(v) <= r {
        return v.to_vec();
    }
    if r <= 0.0 {
        return vec![0.0; v.len()];
    }
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let p = project_simplex(&abs, r);
    p.iter().zip(v).map(|(a, x)| a * x.signum()).collect()
}

/// Nonnegative least squares `min_{θ ≥ 0} ‖Σ_k θ_k c_k − v‖₂` (Lawson–Hanson).
/// Returns the weights and the residual norm.
pub fn nnls_columns(cols: &[Vec<f64>], v: &[f64]) -> (Vec<f64>, f64) {
    let m = v.len();
    let k = cols.len();
    let a = DMatrix::from_fn(m, k, |r, c| cols[c][r]);
    let b = DVector::from_column_slice(v);
    let mut x = DVector::<f64>::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * (1.0 + b.norm()) * (1.0 + a.norm());
    for _outer in 0..(3 * k + 10) {
        let w = a.transpose() * (&b - &a * &x);
        let cand = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = cand else { break };
        passive[j] = true;
        for _inner in 0..(3 * k + 10) {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let ap = DMatrix::from_fn(m, idx.len(), |r, c| a[(r, idx[c])]);
            let z = ap
                .clone()
                .svd(true, true)
                .solve(&b, 1e-14)
                .unwrap_or_else(|_| DVector::zeros(idx.len()));
            if z.iter().all(|&zi| zi > 0.0) {
                x.fill(0.0);
                for (c, &i) in idx.iter().enumerate() {
                    x[i] = z[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &i) in idx.iter().enumerate() {
                if z[c] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[c]));
                }
            }
            for (c, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[c] - x[i]);
                if x[i] <= 1e-15 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    let resid = (&a * &x - &b).norm();
    (x.iter().copied().collect(), resid)
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Projected Newton for `min f(x)` over `x ≥ 0` (Bertsekas, 1982).
///
/// `f` returns value, gradient and Hessian, or `None` outside its domain.
/// Converged when the projected gradient `‖x − [x − ∇f]₊‖_∞ ≤ tol`, or when
/// neither a Newton nor a gradient step decreases the objective and the
/// projected gradient is below `√tol`.
pub fn projected_newton<F>(f: F, x0: Vec<f64>, tol: f64, max_iter: usize) -> NewtonOutcome
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>, Vec<Vec<f64>>)>,
{
    let k = x0.len();
    let mut x = x0;
    let (mut fx, mut g, mut h) = f(&x).expect("projected Newton started outside the domain");
    for it in 0..max_iter {
        let pg = x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| (xi - (xi - gi).max(0.0)).abs())
            .fold(0.0, f64::max);
        if pg <= tol {
            return NewtonOutcome {
                x,
                value: fx,
                converged: true,
                iterations: it,
            };
        }
        let eps = pg.min(1e-6);
        let active: Vec<bool> = (0..k).map(|i| x[i] <= eps && g[i] > 0.0).collect();
        let free: Vec<usize> = (0..k).filter(|&i| !active[i]).collect();

        let mut d = vec![0.0; k];
        for i in 0..k {
            if active[i] {
                d[i] = -g[i] / h[i][i].max(1e-12);
            }
        }
        if !free.is_empty() {
            let nf = free.len();
            let diag_max = free.iter().map(|&i| h[i][i].abs()).fold(0.0, f64::max);
            let mut mu = 0.0;
            loop {
                let m = DMatrix::from_fn(nf, nf, |r, c| {
                    h[free[r]][free[c]] + if r == c { mu } else { 0.0 }
                });
                if let Some(ch) = m.cholesky() {
                    let rhs = DVector::from_iterator(nf, free.iter().map(|&i| -g[i]));
                    let sol = ch.solve(&rhs);
                    for (c, &i) in free.iter().enumerate() {
                        d[i] = sol[c];
                    }
                    break;
                }
                mu = if mu == 0.0 {
                    1e-12 * (1.0 + diag_max)
                } else {
                    mu * 10.0
                };
            }
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let xn: Vec<f64> = x
                .iter()
                .zip(&d)
                .map(|(xi, di)| (xi + alpha * di).max(0.0))
                .collect();
            if let Some((fnew, gn, hn)) = f(&xn) {
                let pred = numeric::sum((0..k).map(|i| {
                    if active[i] {
                        g[i] * (x[i] - xn[i])
                    } else {
                        -alpha * g[i] * d[i]
                    }
                }));
                if fnew <= fx - 1e-4 * pred.max(0.0) && fnew <= fx {
                    accepted = fnew < fx || xn != x;
                    x = xn;
                    fx = fnew;
                    g = gn;
                    h = hn;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Newton stalls on singular curvature; fall back to a projected
            // gradient step before giving up.
            let mut beta = 1.0;
            for _ in 0..100 {
                let xn: Vec<f64> = x
                    .iter()
                    .zip(&g)
                    .map(|(xi, gi)| (xi - beta * gi).max(0.0))
                    .collect();
                if let Some((fnew, gn, hn)) = f(&xn) {
                    let pred = numeric::sum((0..k).map(|i| g[i] * (x[i] - xn[i])));
                    if fnew < fx && fnew <= fx - 1e-4 * pred.max(0.0) {
                        accepted = true;
                        x = xn;
                        fx = fnew;
                        g = gn;
                        h = hn;
                        break;
                    }
                }
                beta *= 0.5;
            }
        }
        if !accepted {
            return NewtonOutcome {
                x,
                value: fx,
                converged: pg <= tol.sqrt(),
                iterations: it + 1,
            };
        }
    }
    NewtonOutcome {
        x,
        value: fx,
        converged: false,
        iterations: max_iter,
    }
}
