//! Penalized least squares
//!
//! ```text
//! β̂ = argmin_β ‖Y − Xβ‖_n² + 2λΩ(β)
//! ```
//!
//! by monotone FISTA with backtracking and adaptive restart, certified by
//! the optimality conditions `Ω_*(r) ≤ λ`, `⟨r, β̂⟩ = λΩ(β̂)` for
//! `r = Xᵀ(Y − Xβ̂)/n`. Overlapping groups are handled through the
//! augmented design.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DesignMatrix;
use crate::norms::{NormSpec, Penalty};
use crate::numeric;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Stop once the KKT residual is at most this.
    pub tolerance: f64,
    pub record_history: bool,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            tolerance: 1e-8,
            record_history: false,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every iteration, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

fn residual(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    numeric::sub(y, &x.mul(beta))
}

fn loss(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> f64 {
    numeric::sum_sq(&residual(x, y, beta)) / x.n() as f64
}

/// `‖Y − Xβ‖_n² + 2λΩ(β)`
pub fn objective<P: Penalty + ?Sized>(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    pen: &P,
    beta: &[f64],
) -> f64 {
    loss(x, y, beta) + 2.0 * lambda * pen.value(beta)
}

/// `r = Xᵀ(Y − Xβ)/n`
pub fn score(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    numeric::scale(&x.tmul(&residual(x, y, beta)), 1.0 / x.n() as f64)
}

/// `max(0, Ω_*(r) − λ) + |λΩ(β) − ⟨r, β⟩|`; zero exactly at the optimum.
pub fn kkt_residual<P: Penalty + ?Sized>(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    pen: &P,
    beta: &[f64],
) -> f64 {
    let r = score(x, y, beta);
    (pen.dual(&r) - lambda).max(0.0) + (lambda * pen.value(beta) - numeric::dot(&r, beta)).abs()
}

fn check_problem(x: &DesignMatrix, y: &[f64], lambda: f64, opts: &SolveOptions) -> Result<()> {
    if y.len() != x.n() {
        return Err(Error::Dimension(format!(
            "response has {} entries, design has {} rows",
            y.len(),
            x.n()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if let Some(w) = &opts.warm_start {
        if w.len() != x.p() {
            return Err(Error::Dimension("warm start length differs from p".into()));
        }
    }
    Ok(())
}

/// Minimum-norm least squares through the pseudo-inverse.
fn least_squares(x: &DesignMatrix, y: &[f64]) -> Vec<f64> {
    let m = x.to_nalgebra();
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-12 * smax * x.n().max(x.p()) as f64;
    let sol = svd
        .solve(&DVector::from_column_slice(y), eps)
        .expect("both factors were computed");
    sol.iter().copied().collect()
}

/// Generic solver over any [`Penalty`].
pub fn solve_with<P: Penalty + ?Sized>(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    pen: &P,
    opts: &SolveOptions,
) -> Result<FitResult> {
    check_problem(x, y, lambda, opts)?;
    pen.check_dim(x.p())?;
    let p = x.p();
    let n = x.n() as f64;
    let finish = |beta: Vec<f64>, iterations: usize, history: Vec<f64>| {
        let kkt = kkt_residual(x, y, lambda, pen, &beta);
        FitResult {
            objective: objective(x, y, lambda, pen, &beta),
            kkt_residual: kkt,
            iterations,
            converged: kkt <= opts.tolerance,
            beta,
            history,
        }
    };

    if lambda == 0.0 {
        return Ok(finish(least_squares(x, y), 0, Vec::new()));
    }
    if pen.dual(&numeric::scale(&x.tmul(y), 1.0 / n)) <= lambda {
        return Ok(finish(vec![0.0; p], 0, Vec::new()));
    }

    let op = x.op_norm_estimate(20);
    let mut step = if op > 0.0 { n / (op * op) } else { 1.0 };
    let mut beta = opts.warm_start.clone().unwrap_or_else(|| vec![0.0; p]);
    let mut f_beta = objective(x, y, lambda, pen, &beta);
    let mut y_pt = beta.clone();
    let mut t = 1.0_f64;
    let mut history = Vec::new();

    for it in 1..=opts.max_iterations {
        let r_y = residual(x, y, &y_pt);
        let f_y = numeric::sum_sq(&r_y) / n;
        let grad = numeric::scale(&x.tmul(&r_y), -2.0 / n);
        let z = loop {
            let z = pen.prox(&numeric::axpy(&y_pt, -step, &grad), 2.0 * lambda * step);
            let d = numeric::sub(&z, &y_pt);
            let bound = f_y + numeric::dot(&grad, &d) + numeric::sum_sq(&d) / (2.0 * step);
            if loss(x, y, &z) <= bound + 1e-14 * f_y.abs().max(1e-300) || step < 1e-300 {
                break z;
            }
            step *= 0.5;
        };
        let f_z = objective(x, y, lambda, pen, &z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // Near the optimum objective differences drop below rounding, so
        // ties within a few ulps count as descent.
        if f_z <= f_beta + 1e-14 * f_beta.abs().max(1e-300) {
            let mom = (t - 1.0) / t_next;
            y_pt = numeric::axpy(&z, mom, &numeric::sub(&z, &beta));
            beta = z;
            f_beta = f_z;
            t = t_next;
        } else {
            // restart the momentum from the last accepted point
            y_pt = beta.clone();
            t = 1.0;
        }
        if opts.record_history {
            history.push(f_beta);
        }
        if kkt_residual(x, y, lambda, pen, &beta) <= opts.tolerance {
            return Ok(finish(beta, it, history));
        }
    }
    Ok(finish(beta, opts.max_iterations, history))
}

/// `β̂ = argmin ‖Y − Xβ‖_n² + 2λΩ(β)` for a [`NormSpec`].
pub fn solve_penalized_ls(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    spec: &NormSpec,
    opts: &SolveOptions,
) -> Result<FitResult> {
    solve_with(x, y, lambda, spec, opts)
}

/// `max_β (Y − Xβ̂)ᵀX(β − β̂)/n + λΩ(β̂) − λΩ(β)` over the probes; at most
/// zero (up to round-off) when `β̂` is optimal.
pub fn variational_inequality_check<P: Penalty + ?Sized>(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    pen: &P,
    beta_hat: &[f64],
    probes: &[Vec<f64>],
) -> Result<f64> {
    pen.check_dim(x.p())?;
    if beta_hat.len() != x.p() || y.len() != x.n() {
        return Err(Error::Dimension("candidate or response has the wrong length".into()));
    }
    let r = score(x, y, beta_hat);
    let at_hat = lambda * pen.value(beta_hat);
    let mut worst = f64::NEG_INFINITY;
    for b in probes {
        if b.len() != x.p() {
            return Err(Error::Dimension("probe length differs from p".into()));
        }
        let v = numeric::dot(&r, &numeric::sub(b, beta_hat)) + at_hat - lambda * pen.value(b);
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Probes `0`, `β̂ ± h e_j` and `count` random points around `β̂`.
pub fn default_probes(beta_hat: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let p = beta_hat.len();
    let h = 0.1 * numeric::norm_inf(beta_hat).max(1.0);
    let mut out = vec![vec![0.0; p]];
    for j in 0..p {
        for s in [h, -h] {
            let mut b = beta_hat.to_vec();
            b[j] += s;
            out.push(b);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..count {
        let scale = h * 10f64.powi((k % 5) as i32 - 2);
        let g: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        out.push(numeric::axpy(beta_hat, scale, &g));
    }
    out
}

/// Possibly overlapping groups covering `{0, …, p-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapGroups {
    p: usize,
    groups: Vec<Vec<usize>>,
}

impl OverlapGroups {
    pub fn new(p: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; p];
        let mut groups = groups;
        for (t, g) in groups.iter_mut().enumerate() {
            g.sort_unstable();
            g.dedup();
            if g.is_empty() {
                return Err(Error::InvalidArgument(format!("group {} is empty", t + 1)));
            }
            for &j in g.iter() {
                if j >= p {
                    return Err(Error::IndexOutOfRange { index: j + 1, p });
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "groups do not cover index {}",
                j + 1
            )));
        }
        Ok(Self { p, groups })
    }

    pub fn from_one_based(p: usize, groups: &[Vec<usize>]) -> Result<Self> {
        let mut out = Vec::with_capacity(groups.len());
        for g in groups {
            if g.contains(&0) {
                return Err(Error::InvalidArgument("group indices are 1-based".into()));
            }
            out.push(g.iter().map(|j| j - 1).collect());
        }
        Self::new(p, out)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// `N_j`, the number of groups containing `j`.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.p];
        for g in &self.groups {
            for &j in g {
                c[j] += 1;
            }
        }
        c
    }

    /// `p̃ = Σ_t |G_t|`
    pub fn augmented_dim(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// `X̃`, with the columns of `G_1`, then `G_2`, … side by side.
    pub fn augmented_design(&self, x: &DesignMatrix) -> Result<DesignMatrix> {
        if x.p() != self.p {
            return Err(Error::Dimension(format!(
                "groups cover {} coordinates, design has {} columns",
                self.p,
                x.p()
            )));
        }
        let cols: Vec<usize> = self.groups.iter().flatten().copied().collect();
        Ok(x.select_columns(&cols))
    }

    fn block_penalty(&self, weighted: bool) -> WeightedGroups {
        let mut start = 0;
        let mut blocks = Vec::with_capacity(self.groups.len());
        let mut weights = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            blocks.push((start..start + g.len()).collect());
            weights.push(if weighted { (g.len() as f64).sqrt() } else { 1.0 });
            start += g.len();
        }
        WeightedGroups { blocks, weights }
    }

    /// Splits an augmented vector into full-length parts `b_t`.
    fn parts(&self, b: &[f64]) -> Vec<Vec<f64>> {
        let mut start = 0;
        self.groups
            .iter()
            .map(|g| {
                let mut part = vec![0.0; self.p];
                for (k, &j) in g.iter().enumerate() {
                    part[j] = b[start + k];
                }
                start += g.len();
                part
            })
            .collect()
    }

    /// `Σ_t b_t`, summed left to right in group order.
    pub fn sum_parts(&self, parts: &[Vec<f64>]) -> Vec<f64> {
        (0..self.p)
            .map(|j| parts.iter().fold(0.0, |acc, b| acc + b[j]))
            .collect()
    }
}

/// `Σ_t w_t ‖b_{B_t}‖₂` over disjoint blocks `B_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGroups {
    pub blocks: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl WeightedGroups {
    pub fn unit(blocks: Vec<Vec<usize>>) -> Self {
        let weights = vec![1.0; blocks.len()];
        Self { blocks, weights }
    }

    fn dim(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    fn block_norm(&self, t: usize, v: &[f64]) -> f64 {
        numeric::norm2(&self.blocks[t].iter().map(|&j| v[j]).collect::<Vec<_>>())
    }
}

impl Penalty for WeightedGroups {
    fn value(&self, beta: &[f64]) -> f64 {
        numeric::sum((0..self.blocks.len()).map(|t| self.weights[t] * self.block_norm(t, beta)))
    }

    fn dual(&self, w: &[f64]) -> f64 {
        (0..self.blocks.len())
            .map(|t| self.block_norm(t, w) / self.weights[t])
            .fold(0.0, f64::max)
    }

    fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        let mut z = vec![0.0; v.len()];
        for (k, g) in self.blocks.iter().enumerate() {
            let nrm = self.block_norm(k, v);
            let thr = t * self.weights[k];
            if nrm > thr {
                let f = 1.0 - thr / nrm;
                for &j in g {
                    z[j] = v[j] * f;
                }
            }
        }
        z
    }

    fn check_dim(&self, p: usize) -> Result<()> {
        if self.dim() != p {
            return Err(Error::Dimension(format!(
                "blocks cover {} coordinates, vector has {p}",
                self.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapFit {
    /// `β̂ = Σ_t b̂_t`; `objective` is `‖Y − Xβ̂‖_n² + 2λ Σ_t w_t‖b̂_t‖₂`.
    pub fit: FitResult,
    pub parts: Vec<Vec<f64>>,
}

/// Overlapping group lasso through the augmented design; unit group
/// weights unless `weighted`, which uses `√|G_t|`.
pub fn solve_overlap(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    groups: &OverlapGroups,
    weighted: bool,
    opts: &SolveOptions,
) -> Result<OverlapFit> {
    let xa = groups.augmented_design(x)?;
    let pen = groups.block_penalty(weighted);
    let mut aug_opts = opts.clone();
    aug_opts.warm_start = None;
    let fit = solve_with(&xa, y, lambda, &pen, &aug_opts)?;
    let parts = groups.parts(&fit.beta);
    let beta = groups.sum_parts(&parts);
    Ok(OverlapFit {
        fit: FitResult { beta, ..fit },
        parts,
    })
}

/// `min { Σ_t ‖b_t‖₂ : supp(b_t) ⊆ G_t, Σ_t b_t = β }` by Douglas–Rachford
/// splitting between the block norms and the affine constraint. Returns the
/// value and the parts.
pub fn omega_overlap_eval(beta: &[f64], groups: &OverlapGroups) -> Result<(f64, Vec<Vec<f64>>)> {
    if beta.len() != groups.p() {
        return Err(Error::Dimension(format!(
            "vector has {} entries, groups cover {}",
            beta.len(),
            groups.p()
        )));
    }
    let pen = groups.block_penalty(false);
    let counts = groups.counts();
    let index: Vec<usize> = groups.groups().iter().flatten().copied().collect();
    let project = |b: &[f64]| -> Vec<f64> {
        let mut excess = beta.iter().map(|v| -v).collect::<Vec<f64>>();
        for (k, &j) in index.iter().enumerate() {
            excess[j] += b[k];
        }
        b.iter()
            .zip(&index)
            .map(|(v, &j)| v - excess[j] / counts[j] as f64)
            .collect()
    };
    // start from the even split, which is feasible
    let mut z: Vec<f64> = index.iter().map(|&j| beta[j] / counts[j] as f64).collect();
    let mut best = project(&z);
    let mut best_val = pen.value(&best);
    let gamma = 1.0;
    for _ in 0..200_000 {
        let a = project(&z);
        let refl: Vec<f64> = a.iter().zip(&z).map(|(ai, zi)| 2.0 * ai - zi).collect();
        let b = pen.prox(&refl, gamma);
        let step: Vec<f64> = b.iter().zip(&a).map(|(bi, ai)| bi - ai).collect();
        z = numeric::add(&z, &step);
        let val = pen.value(&a);
        if val < best_val {
            best_val = val;
            best = a;
        }
        if numeric::norm_inf(&step) <= 1e-14 * (1.0 + numeric::norm_inf(&z)) {
            break;
        }
    }
    Ok((best_val, groups.parts(&best)))
}
