//! Structured sparsity norms induced by a convex cone `𝒜 ⊂ [0,∞)^p`:
//!
//! ```text
//! Ω(β; 𝒜) = min_{a ∈ 𝒜} ½ Σ_j (β_j² / a_j + a_j),     0/0 = 0
//! ```
//!
//! Four cone families are supported. The full orthant gives `‖·‖₁`, the
//! group-constant cone gives the group norm `Σ_t √|G_t| ‖β_{G_t}‖₂`, and the
//! monotone cone `{a₁ ≥ … ≥ a_p ≥ 0}` is evaluated in closed form through a
//! contiguous partition found by pool-adjacent-violators. A cone given by a
//! finite list of generating rays is handled by projected Newton on the
//! ray weights.
//!
//! # Extreme points of the monotone section
//!
//! The section `𝒜(1) = {a ∈ 𝒜 : ‖a‖₁ = 1}` of the monotone cone is the
//! simplex with vertices `v_k = (1/k, …, 1/k, 0, …, 0)` (`k` leading
//! entries), `k = 1..p`. Any nonincreasing `a ≥ 0` is
//! `a = Σ_k (a_k − a_{k+1}) · k · v_k` with `a_{p+1} = 0`: the weights are
//! nonnegative by monotonicity and sum to `Σ_k (a_k − a_{k+1}) k = ‖a‖₁ = 1`.
//! The `v_k` are affinely independent, so there are exactly `p` extreme
//! points. The dual norm `max_{a ∈ 𝒜(1)} √(Σ a_j w_j²)` maximizes a linear
//! function of `a` and is attained at a vertex, which gives
//! `max_k √(Σ_{j≤k} w_j² / k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DesignMatrix, IndexSet};
use crate::norms::Partition;
use crate::numeric;
use crate::polytope;

/// Stationarity tolerance for the iterative ray-cone solves.
pub const RAY_TOLERANCE: f64 = 1e-10;
/// Iteration cap for the iterative ray-cone solves.
pub const RAY_MAX_ITERATIONS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub enum ConeSpec {
    /// `[0, ∞)^p`
    FullOrthant,
    /// `{a₁ ≥ a₂ ≥ … ≥ a_p ≥ 0}`
    Monotone,
    /// Nonnegative vectors constant on each group of a partition.
    GroupConstant(Partition),
    /// Conic hull of finitely many nonnegative, nonzero rays.
    PolyhedralRays(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "cone", rename_all = "snake_case")]
pub(crate) enum ConeSpecJson {
    FullOrthant,
    Monotone,
    GroupConstant { groups: Vec<Vec<usize>> },
    Rays { rays: Vec<Vec<f64>> },
}

impl TryFrom<ConeSpecJson> for ConeSpec {
    type Error = Error;

    fn try_from(j: ConeSpecJson) -> Result<Self> {
        let cone = match j {
            ConeSpecJson::FullOrthant => ConeSpec::FullOrthant,
            ConeSpecJson::Monotone => ConeSpec::Monotone,
            ConeSpecJson::GroupConstant { groups } => {
                ConeSpec::GroupConstant(Partition::from_one_based(&groups)?)
            }
            ConeSpecJson::Rays { rays } => ConeSpec::PolyhedralRays(rays),
        };
        cone.validate(cone.dim())?;
        Ok(cone)
    }
}

impl From<ConeSpec> for ConeSpecJson {
    fn from(c: ConeSpec) -> Self {
        match c {
            ConeSpec::FullOrthant => ConeSpecJson::FullOrthant,
            ConeSpec::Monotone => ConeSpecJson::Monotone,
            ConeSpec::GroupConstant(part) => ConeSpecJson::GroupConstant {
                groups: part.to_one_based(),
            },
            ConeSpec::PolyhedralRays(rays) => ConeSpecJson::Rays { rays },
        }
    }
}

impl Serialize for ConeSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConeSpecJson::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ConeSpecJson::deserialize(d)?;
        ConeSpec::try_from(j).map_err(serde::de::Error::custom)
    }
}

impl ConeSpec {
    /// Fixed dimension, if the cone carries one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConeSpec::FullOrthant | ConeSpec::Monotone => None,
            ConeSpec::GroupConstant(part) => Some(part.p()),
            ConeSpec::PolyhedralRays(rays) => rays.first().map(Vec::len),
        }
    }

    /// Checks the cone is well formed in dimension `p` and contains a
    /// strictly positive vector.
    pub fn validate(&self, p: Option<usize>) -> Result<()> {
        match self {
            ConeSpec::FullOrthant | ConeSpec::Monotone => Ok(()),
            ConeSpec::GroupConstant(part) => match p {
                Some(p) if p != part.p() => Err(Error::Dimension(format!(
                    "group-constant cone over {} coordinates used in dimension {p}",
                    part.p()
                ))),
                _ => Ok(()),
            },
            ConeSpec::PolyhedralRays(rays) => {
                let Some(first) = rays.first() else {
                    return Err(Error::InvalidCone("no generating rays".into()));
                };
                let d = first.len();
                if let Some(p) = p {
                    if p != d {
                        return Err(Error::Dimension(format!(
                            "rays of length {d} used in dimension {p}"
                        )));
                    }
                }
                for (k, r) in rays.iter().enumerate() {
                    if r.len() != d {
                        return Err(Error::InvalidCone(format!(
                            "ray {} has length {}, expected {d}",
                            k + 1,
                            r.len()
                        )));
                    }
                    if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
                        return Err(Error::InvalidCone(format!(
                            "ray {} has a negative or non-finite entry",
                            k + 1
                        )));
                    }
                    if r.iter().all(|x| *x == 0.0) {
                        return Err(Error::InvalidCone(format!("ray {} is zero", k + 1)));
                    }
                }
                if let Some(j) = (0..d).find(|&j| rays.iter().all(|r| r[j] == 0.0)) {
                    return Err(Error::InvalidCone(format!(
                        "no element of the cone is strictly positive (coordinate {} is zero on every ray)",
                        j + 1
                    )));
                }
                Ok(())
            }
        }
    }

    /// Number of extreme points of the section `𝒜(1)` in dimension `p`.
    pub fn extreme_point_count(&self, p: usize) -> usize {
        match self {
            ConeSpec::FullOrthant | ConeSpec::Monotone => p,
            ConeSpec::GroupConstant(part) => part.len(),
            ConeSpec::PolyhedralRays(rays) => rays.len(),
        }
    }

    /// Whether `a` lies in the cone.
    pub fn contains(&self, a: &[f64], tol: f64) -> bool {
        if a.iter().any(|x| *x < -tol) {
            return false;
        }
        match self {
            ConeSpec::FullOrthant => true,
            ConeSpec::Monotone => a.windows(2).all(|w| w[0] >= w[1] - tol),
            ConeSpec::GroupConstant(part) => part.groups().iter().all(|g| {
                let v = a[g[0]];
                g.iter().all(|&j| (a[j] - v).abs() <= tol)
            }),
            ConeSpec::PolyhedralRays(rays) => {
                let scale = numeric::norm2(a);
                if scale == 0.0 {
                    return true;
                }
                let (_, resid) = polytope::nnls_columns(rays, a);
                resid <= tol.max(1e-10) * scale.max(1.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeNormResult {
    pub value: f64,
    /// The minimizing `a(β)`.
    pub minimizer: Vec<f64>,
    /// Contiguous blocks (1-based) for the monotone cone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<usize>>>,
    /// False only when an iterative solve hit its iteration cap.
    pub certified: bool,
}

/// `½ Σ (β_j²/a_j + a_j)` with `0/0 = 0` and `β_j²/0 = ∞` for `β_j ≠ 0`.
pub fn cone_objective(beta: &[f64], a: &[f64]) -> f64 {
    let mut acc = numeric::Accumulator::default();
    for (&b, &aj) in beta.iter().zip(a) {
        if b == 0.0 {
            acc.add(0.5 * aj);
        } else if aj <= 0.0 {
            return f64::INFINITY;
        } else {
            acc.add(0.5 * (b * b / aj + aj));
        }
    }
    acc.value()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonePartition {
    /// Half-open 0-based ranges, in order.
    pub blocks: Vec<std::ops::Range<usize>>,
    /// `‖β_G‖₂ / √|G|` per block; the minimizer's constant value.
    pub levels: Vec<f64>,
    pub value: f64,
}

impl MonotonePartition {
    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|r| (r.start + 1..=r.end).collect()).collect()
    }

    pub fn minimizer(&self, p: usize) -> Vec<f64> {
        let mut a = vec![0.0; p];
        for (r, &lvl) in self.blocks.iter().zip(&self.levels) {
            a[r.clone()].fill(lvl);
        }
        a
    }
}

/// Pool-adjacent-violators with root-mean-square pooling.
///
/// The objective restricted to "a constant on block G" is
/// `½ Σ_{j∈G} (β_j²/c + c)`, minimized at `c = √(Σ_G β_j² / |G|)`. Adjacent
/// blocks are pooled while their levels fail to strictly decrease, so the
/// result is the coarsest optimal partition; zero blocks all end up in one
/// trailing block.
pub fn monotone_contiguous_partition(beta: &[f64]) -> MonotonePartition {
    struct Block {
        start: usize,
        len: usize,
        sumsq: f64,
    }
    let mut stack: Vec<Block> = Vec::with_capacity(beta.len());
    for (j, &b) in beta.iter().enumerate() {
        stack.push(Block {
            start: j,
            len: 1,
            sumsq: b * b,
        });
        while stack.len() >= 2 {
            let last = &stack[stack.len() - 1];
            let prev = &stack[stack.len() - 2];
            // prev level <= last level, compared without division
            if prev.sumsq * last.len as f64 <= last.sumsq * prev.len as f64 {
                let last = stack.pop().unwrap();
                let prev = stack.last_mut().unwrap();
                prev.len += last.len;
                prev.sumsq += last.sumsq;
            } else {
                break;
            }
        }
    }
    if stack.is_empty() {
        return MonotonePartition {
            blocks: vec![],
            levels: vec![],
            value: 0.0,
        };
    }
    let blocks: Vec<_> = stack.iter().map(|b| b.start..b.start + b.len).collect();
    let norms: Vec<f64> = blocks.iter().map(|r| numeric::norm2(&beta[r.clone()])).collect();
    let levels = blocks
        .iter()
        .zip(&norms)
        .map(|(r, nrm)| nrm / (r.len() as f64).sqrt())
        .collect();
    let value = numeric::sum(
        blocks
            .iter()
            .zip(&norms)
            .map(|(r, nrm)| (r.len() as f64).sqrt() * nrm),
    );
    MonotonePartition {
        blocks,
        levels,
        value,
    }
}

pub fn cone_norm_eval(cone: &ConeSpec, beta: &[f64]) -> Result<ConeNormResult> {
    cone.validate(Some(beta.len()))?;
    let p = beta.len();
    Ok(match cone {
        ConeSpec::FullOrthant => ConeNormResult {
            value: numeric::norm1(beta),
            minimizer: beta.iter().map(|b| b.abs()).collect(),
            partition: None,
            certified: true,
        },
        ConeSpec::Monotone => {
            let part = monotone_contiguous_partition(beta);
            ConeNormResult {
                value: part.value,
                minimizer: part.minimizer(p),
                partition: Some(part.to_one_based()),
                certified: true,
            }
        }
        ConeSpec::GroupConstant(groups) => {
            let mut a = vec![0.0; p];
            let mut acc = numeric::Accumulator::default();
            for g in groups.groups() {
                let vals: Vec<f64> = g.iter().map(|&j| beta[j]).collect();
                let nrm = numeric::norm2(&vals);
                let k = (g.len() as f64).sqrt();
                acc.add(k * nrm);
                for &j in g {
                    a[j] = nrm / k;
                }
            }
            ConeNormResult {
                value: acc.value(),
                minimizer: a,
                partition: None,
                certified: true,
            }
        }
        ConeSpec::PolyhedralRays(rays) => rays_norm(rays, beta),
    })
}

pub fn cone_dual_eval(cone: &ConeSpec, w: &[f64]) -> Result<f64> {
    cone.validate(Some(w.len()))?;
    Ok(match cone {
        ConeSpec::FullOrthant => numeric::norm_inf(w),
        ConeSpec::Monotone => {
            let mut acc = numeric::Accumulator::default();
            let mut best = 0.0_f64;
            for (k, x) in w.iter().enumerate() {
                acc.add(x * x);
                best = best.max(acc.value() / (k + 1) as f64);
            }
            best.sqrt()
        }
        ConeSpec::GroupConstant(groups) => groups
            .groups()
            .iter()
            .map(|g| {
                let vals: Vec<f64> = g.iter().map(|&j| w[j]).collect();
                numeric::norm2(&vals) / (g.len() as f64).sqrt()
            })
            .fold(0.0, f64::max),
        ConeSpec::PolyhedralRays(rays) => rays
            .iter()
            .map(|r| {
                let total = numeric::norm1(r);
                numeric::sum(r.iter().zip(w).map(|(a, x)| a / total * x * x)).sqrt()
            })
            .fold(0.0, f64::max),
    })
}

/// Reason `S` is not allowed, with an element `a ∈ 𝒜` whose restriction
/// `a_S` leaves the cone, when one is easy to exhibit.
pub fn allowed_violation(cone: &ConeSpec, set: &IndexSet) -> Option<(String, Option<Vec<f64>>)> {
    let p = set.p();
    match cone {
        ConeSpec::FullOrthant => None,
        ConeSpec::Monotone => {
            let s = set.len();
            if set.indices().iter().enumerate().all(|(k, &j)| k == j) {
                None
            } else {
                let top = *set.indices().last().unwrap();
                let mut a = vec![0.0; p];
                a[..=top].fill(1.0);
                Some((
                    format!(
                        "monotone cone: S must be a prefix {{1..{s}}}, got {set}; a_S leaves the cone for a = 1 on {{1..{}}}",
                        top + 1
                    ),
                    Some(a),
                ))
            }
        }
        ConeSpec::GroupConstant(groups) => {
            if groups.is_union_of_groups(set) {
                None
            } else {
                Some((
                    format!("group-constant cone: S = {set} is not a union of groups"),
                    Some(vec![1.0; p]),
                ))
            }
        }
        ConeSpec::PolyhedralRays(rays) => {
            for (k, r) in rays.iter().enumerate() {
                let mut rs = vec![0.0; p];
                for &j in set.indices() {
                    rs[j] = r[j];
                }
                if !cone.contains(&rs, 1e-10) {
                    return Some((
                        format!(
                            "ray cone: the restriction to S = {set} of ray {} is not in the cone",
                            k + 1
                        ),
                        Some(r.clone()),
                    ));
                }
            }
            None
        }
    }
}

/// The projected cone `𝒜_{S^c} = {a_{S^c} : a ∈ 𝒜}` on `p − |S|` coordinates,
/// provided `𝒜_S ⊆ 𝒜`.
pub fn residual_cone(cone: &ConeSpec, set: &IndexSet) -> Result<ConeSpec> {
    cone.validate(Some(set.p()))?;
    if let Some((reason, counterexample)) = allowed_violation(cone, set) {
        return Err(Error::NotAllowed {
            reason,
            counterexample,
        });
    }
    let comp = set.complement();
    Ok(match cone {
        ConeSpec::FullOrthant => ConeSpec::FullOrthant,
        ConeSpec::Monotone => ConeSpec::Monotone,
        ConeSpec::GroupConstant(groups) => ConeSpec::GroupConstant(groups.restricted_to(&comp)),
        ConeSpec::PolyhedralRays(rays) => {
            let projected: Vec<Vec<f64>> = rays
                .iter()
                .map(|r| comp.gather(r))
                .filter(|r| r.iter().any(|x| *x != 0.0))
                .collect();
            if projected.is_empty() {
                // S^c is empty; keep a placeholder over zero coordinates.
                ConeSpec::FullOrthant
            } else {
                ConeSpec::PolyhedralRays(projected)
            }
        }
    })
}

/// `argmin_z ½‖z − v‖² + t Ω(z; 𝒜)`.
///
/// Uses `min_z ½(z−v)² + t z²/(2a) = ½ v² t/(a+t)` at `z = v a/(a+t)`, which
/// turns the prox into a smooth problem over `a ∈ 𝒜`.
pub fn cone_prox(cone: &ConeSpec, v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "prox step must be positive, got {t}"
        )));
    }
    cone.validate(Some(v.len()))?;
    if cone_dual_eval(cone, v)? <= t {
        return Ok(vec![0.0; v.len()]);
    }
    let shrink = |a: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(a)
            .map(|(&x, &aj)| if aj > 0.0 { x * aj / (aj + t) } else { 0.0 })
            .collect()
    };
    Ok(match cone {
        ConeSpec::FullOrthant => v.iter().map(|&x| soft(x, t)).collect(),
        ConeSpec::Monotone => {
            // Block optimum of Σ_G ½v²t/(c+t) + ½tc is c = rms(v_G) − t, a
            // monotone function of the pooled rms, so the pooling of the
            // norm evaluation applies; clipping at zero commutes with it.
            let part = monotone_contiguous_partition(v);
            let mut a = vec![0.0; v.len()];
            for (r, &lvl) in part.blocks.iter().zip(&part.levels) {
                a[r.clone()].fill((lvl - t).max(0.0));
            }
            shrink(&a)
        }
        ConeSpec::GroupConstant(groups) => {
            let mut z = vec![0.0; v.len()];
            for g in groups.groups() {
                let vals: Vec<f64> = g.iter().map(|&j| v[j]).collect();
                let nrm = numeric::norm2(&vals);
                let thr = t * (g.len() as f64).sqrt();
                if nrm > thr {
                    let f = 1.0 - thr / nrm;
                    for &j in g {
                        z[j] = v[j] * f;
                    }
                }
            }
            z
        }
        ConeSpec::PolyhedralRays(rays) => {
            let a = rays_prox_weights(rays, v, t);
            shrink(&a)
        }
    })
}

/// A subgradient of `Ω(·; 𝒜)` at `β`: `w = β / a(β)`, with `Ω_*(w) ≤ 1`
/// and `⟨w, β⟩ = Ω(β)`.
pub fn cone_subgradient(cone: &ConeSpec, beta: &[f64]) -> Result<Vec<f64>> {
    let res = cone_norm_eval(cone, beta)?;
    Ok(beta
        .iter()
        .zip(&res.minimizer)
        .map(|(&b, &a)| if a > 0.0 { b / a } else { 0.0 })
        .collect())
}

/// `λ_ε = √(8/n) (2 + √log K) √(Σ_i Ω_*²(x_i; 𝒜) / n)` with `K` the number of
/// extreme points of `𝒜(1)` and `x_i` the rows of `X`.
pub fn pontil_maurer_bound(x: &DesignMatrix, cone: &ConeSpec) -> Result<f64> {
    cone.validate(Some(x.p()))?;
    let k = cone.extreme_point_count(x.p());
    if k == 0 {
        return Err(Error::InvalidCone("section has no extreme points".into()));
    }
    let n = x.n() as f64;
    let mut acc = numeric::Accumulator::default();
    for i in 0..x.n() {
        let d = cone_dual_eval(cone, &x.row(i))?;
        acc.add(d * d);
    }
    Ok((8.0 / n).sqrt() * (2.0 + (k as f64).ln().sqrt()) * (acc.value() / n).sqrt())
}

pub(crate) fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn combine(rays: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    let p = rays[0].len();
    (0..p)
        .map(|j| numeric::sum(rays.iter().zip(theta).map(|(r, &t)| r[j] * t)))
        .collect()
}

fn rays_norm(rays: &[Vec<f64>], beta: &[f64]) -> ConeNormResult {
    let p = beta.len();
    if beta.iter().all(|b| *b == 0.0) {
        return ConeNormResult {
            value: 0.0,
            minimizer: vec![0.0; p],
            partition: None,
            certified: true,
        };
    }
    // Start on the ray sum, scaled optimally along that direction.
    let d = combine(rays, &vec![1.0; rays.len()]);
    let num = numeric::sum(beta.iter().zip(&d).map(|(b, dj)| b * b / dj));
    let c = (num / numeric::sum(d.iter().copied())).sqrt();
    let theta0 = vec![c; rays.len()];
    let objective = |theta: &[f64]| {
        let a = combine(rays, theta);
        let f = cone_objective(beta, &a);
        if !f.is_finite() {
            return None;
        }
        let grad: Vec<f64> = rays
            .iter()
            .map(|r| {
                numeric::sum(
                    r.iter()
                        .zip(beta.iter().zip(&a))
                        .filter(|(rj, _)| **rj != 0.0)
                        .map(|(rj, (b, aj))| {
                            let ratio = if *b == 0.0 { 0.0 } else { b * b / (aj * aj) };
                            0.5 * rj * (1.0 - ratio)
                        }),
                )
            })
            .collect();
        let curv: Vec<f64> = beta
            .iter()
            .zip(&a)
            .map(|(b, aj)| if *b == 0.0 { 0.0 } else { b * b / (aj * aj * aj) })
            .collect();
        Some((f, grad, hessian(rays, &curv)))
    };
    let out = polytope::projected_newton(objective, theta0, RAY_TOLERANCE, RAY_MAX_ITERATIONS);
    let a = combine(rays, &out.x);
    ConeNormResult {
        value: cone_objective(beta, &a),
        minimizer: a,
        partition: None,
        certified: out.converged,
    }
}

fn rays_prox_weights(rays: &[Vec<f64>], v: &[f64], t: f64) -> Vec<f64> {
    let theta0 = vec![1.0; rays.len()];
    let objective = |theta: &[f64]| {
        let a = combine(rays, theta);
        let f = numeric::sum(
            v.iter()
                .zip(&a)
                .map(|(x, aj)| 0.5 * x * x * t / (aj + t) + 0.5 * t * aj),
        ) / t;
        let grad: Vec<f64> = rays
            .iter()
            .map(|r| {
                numeric::sum(r.iter().zip(v.iter().zip(&a)).map(|(rj, (x, aj))| {
                    rj * (0.5 - 0.5 * x * x / ((aj + t) * (aj + t)))
                }))
            })
            .collect();
        let curv: Vec<f64> = v
            .iter()
            .zip(&a)
            .map(|(x, aj)| x * x / ((aj + t) * (aj + t) * (aj + t)))
            .collect();
        Some((f, grad, hessian(rays, &curv)))
    };
    let out = polytope::projected_newton(objective, theta0, RAY_TOLERANCE, RAY_MAX_ITERATIONS);
    combine(rays, &out.x)
}

fn hessian(rays: &[Vec<f64>], curv: &[f64]) -> Vec<Vec<f64>> {
    let k = rays.len();
    let mut h = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let v = numeric::sum(
                rays[a]
                    .iter()
                    .zip(&rays[b])
                    .zip(curv)
                    .map(|((x, y), c)| x * y * c),
            );
            h[a][b] = v;
            h[b][a] = v;
        }
    }
    h
}
