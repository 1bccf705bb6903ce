//! Eigenvalue constants of a design for an index set `S` and a constant `L`:
//!
//! ```text
//! δ(L,S)       = min { ‖Xβ_S − Xβ_{S^c}‖_n : ‖β_S‖₁ = 1,  ‖β_{S^c}‖₁ ≤ L }
//! δ_Ω(L,S)     = min { ‖Xβ_S − Xβ_{S^c}‖_n : Ω(β_S) = 1,  Ω^{S^c}(β_{S^c}) ≤ L }
//! δ_{Ω_S}(L,S) = min { ‖Xβ_S − Xβ_{S^c}‖_n : √|S|‖β_S‖₂ = 1, ‖β_{S^c}‖₁ ≤ L }
//! φ²(L,S) = |S| δ²(L,S),   Γ²_Ω(L,S) = 1 / δ²_Ω(L,S)
//! ```
//!
//! On a fixed sign orthant of `β_S` the ℓ1 problem is the distance between
//! two polytopes, which Wolfe's algorithm solves exactly on their Minkowski
//! difference; enumerating orthants gives a certified value. For other
//! norms the upper bound comes from multistart convex-concave iterations
//! (every iterate is a feasible witness) and the lower bound from the norm
//! comparison
//!
//! ```text
//! δ_Ω(L,S) ≥ δ(c_S c_R L, S) / c_S,   c_S = max_{j∈S} Ω(e_j),  c_R = Ω^{S^c}_*(1, …, 1),
//! ```
//!
//! which holds because `Ω(β_S) ≤ c_S ‖β_S‖₁`, `‖β_{S^c}‖₁ ≤ c_R Ω^{S^c}(β_{S^c})`
//! for sign-invariant norms, and `δ(·,S)` is nonincreasing.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::model::{normalized_norm, DesignMatrix, IndexSet};
use crate::norms::{self, NormSpec, ResidualNorm};
use crate::numeric;
use crate::polytope::{self, PointSet};

/// Eigenvalues below this are reported as exactly zero.
pub const ZERO_TOLERANCE: f64 = 1e-10;

/// Largest number of samples `brute_force_eigenvalue` accepts.
pub const BRUTE_FORCE_BUDGET: usize = 20_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Largest `|S|` for which all sign orthants are enumerated.
    pub orthant_cap: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            orthant_cap: 12,
            restarts: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueResult {
    pub value: f64,
    /// Full-length `β`; the objective is `‖Xβ_S − Xβ_{S^c}‖_n`.
    pub witness: Vec<f64>,
    pub certified: bool,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl EigenvalueResult {
    /// `Γ² = 1/δ²` from the lower bound, hence an upper bound on `Γ²`.
    pub fn effective_sparsity(&self) -> f64 {
        effective_sparsity_of(self.lower_bound)
    }

    fn finish(mut self) -> Self {
        if self.upper_bound < ZERO_TOLERANCE {
            self.upper_bound = 0.0;
            self.lower_bound = 0.0;
            self.certified = true;
        }
        self.lower_bound = self.lower_bound.clamp(0.0, self.upper_bound);
        if self.upper_bound - self.lower_bound <= 1e-9 * self.upper_bound.max(1.0) {
            self.certified = true;
        }
        if self.certified {
            self.lower_bound = self.upper_bound;
        }
        self.value = self.upper_bound;
        self
    }
}

/// `1/δ²`, or `+∞` when `δ` is below [`ZERO_TOLERANCE`].
pub fn effective_sparsity_of(delta: f64) -> f64 {
    if delta < ZERO_TOLERANCE {
        f64::INFINITY
    } else {
        1.0 / (delta * delta)
    }
}

fn check_query(x: &DesignMatrix, set: &IndexSet, l: f64) -> Result<()> {
    if set.p() != x.p() {
        return Err(Error::Dimension(format!(
            "index set over {} coordinates, design has {} columns",
            set.p(),
            x.p()
        )));
    }
    if set.is_empty() {
        return Err(Error::InvalidArgument("S must be nonempty".into()));
    }
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "L must be finite and nonnegative, got {l}"
        )));
    }
    Ok(())
}

/// `‖Xβ_S − Xβ_{S^c}‖_n` for a full-length `β`.
pub fn eigen_objective(x: &DesignMatrix, set: &IndexSet, beta: &[f64]) -> Result<f64> {
    if beta.len() != x.p() || set.p() != x.p() {
        return Err(Error::Dimension("witness length differs from p".into()));
    }
    let signed: Vec<f64> = beta
        .iter()
        .enumerate()
        .map(|(j, &b)| if set.contains(j) { b } else { -b })
        .collect();
    normalized_norm(&x.mul(&signed))
}

struct OrthantDifference<'a> {
    heads: Vec<Vec<f64>>,
    tails: &'a [Vec<f64>],
}

impl PointSet for OrthantDifference<'_> {
    fn dim(&self) -> usize {
        self.tails[0].len()
    }

    fn point(&self, id: usize) -> Vec<f64> {
        let nt = self.tails.len();
        numeric::sub(&self.heads[id / nt], &self.tails[id % nt])
    }

    fn linear_minimizer(&self, x: &[f64]) -> (usize, f64) {
        let (i, a) = self
            .heads
            .iter()
            .map(|h| numeric::dot(x, h))
            .enumerate()
            .fold((0, f64::INFINITY), |m, (i, v)| if v < m.1 { (i, v) } else { m });
        let (k, b) = self
            .tails
            .iter()
            .map(|t| numeric::dot(x, t))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |m, (k, v)| if v > m.1 { (k, v) } else { m });
        (i * self.tails.len() + k, a - b)
    }

    fn initial(&self) -> usize {
        0
    }
}

struct OrthantOutcome {
    upper: f64,
    lower: f64,
    witness: Vec<f64>,
}

fn signs_of(pattern: usize, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| {
            if i == 0 || (pattern >> (i - 1)) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

fn solve_orthant(
    x: &DesignMatrix,
    set: &IndexSet,
    comp: &IndexSet,
    l: f64,
    tails: &[Vec<f64>],
    signs: &[f64],
) -> OrthantOutcome {
    let rn = (x.n() as f64).sqrt();
    let heads = set
        .indices()
        .iter()
        .zip(signs)
        .map(|(&j, s)| x.column(j).iter().map(|v| s * v / rn).collect())
        .collect();
    let diff = OrthantDifference { heads, tails };
    let mnp = polytope::min_norm_point(&diff, 100_000);

    let nt = tails.len();
    let mut witness = vec![0.0; x.p()];
    for &(id, w) in &mnp.weights {
        let (i, t) = (id / nt, id % nt);
        witness[set.indices()[i]] += signs[i] * w;
        if !comp.is_empty() && l > 0.0 {
            let k = comp.indices()[t / 2];
            witness[k] += if t % 2 == 0 { l * w } else { -l * w };
        }
    }
    let upper = eigen_objective(x, set, &witness).expect("dimensions agree");
    let lower = if mnp.norm > 0.0 {
        (diff.linear_minimizer(&mnp.x).1 / mnp.norm).max(0.0)
    } else {
        0.0
    };
    OrthantOutcome {
        upper,
        lower: lower.min(upper),
        witness,
    }
}

/// `δ(L,S)`, exact for `|S| ≤ orthant_cap`.
pub fn l1_eigenvalue(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    opts: &EigenOptions,
) -> Result<EigenvalueResult> {
    check_query(x, set, l)?;
    let comp = set.complement();
    let rn = (x.n() as f64).sqrt();
    let tails: Vec<Vec<f64>> = if comp.is_empty() || l == 0.0 {
        vec![vec![0.0; x.n()]]
    } else {
        comp.indices()
            .iter()
            .flat_map(|&k| {
                let col: Vec<f64> = x.column(k).iter().map(|v| l * v / rn).collect();
                let neg = numeric::scale(&col, -1.0);
                [col, neg]
            })
            .collect()
    };

    let k = set.len();
    let exhaustive = k <= opts.orthant_cap;
    let patterns: Vec<usize> = if exhaustive {
        (0..1usize << (k - 1)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut pats = vec![0usize];
        let bits = (k - 1).min(63);
        for _ in 0..opts.restarts {
            let r: u64 = rng.random();
            pats.push((r & ((1u64 << bits) - 1)) as usize);
        }
        pats.sort_unstable();
        pats.dedup();
        pats
    };

    let outcomes: Vec<OrthantOutcome> = patterns
        .par_iter()
        .map(|&m| solve_orthant(x, set, &comp, l, &tails, &signs_of(m, k)))
        .collect();

    // first strictly smaller value wins, so ties go to the smallest pattern
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.upper < outcomes[best].upper {
            best = i;
        }
    }
    let lower = if exhaustive {
        outcomes.iter().map(|o| o.lower).fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let upper = outcomes[best].upper;
    Ok(EigenvalueResult {
        value: upper,
        witness: outcomes[best].witness.clone(),
        certified: exhaustive && upper - lower <= 1e-9 * upper.max(1.0),
        lower_bound: lower,
        upper_bound: upper,
    }
    .finish())
}

/// `φ²(L,S) = |S| δ²(L,S)`
pub fn compatibility(x: &DesignMatrix, set: &IndexSet, l: f64, opts: &EigenOptions) -> Result<f64> {
    let d = l1_eigenvalue(x, set, l, opts)?.value;
    Ok(set.len() as f64 * d * d)
}

/// `Γ²_Ω(L,S)`, or an upper bound on it when `δ_Ω` is not certified.
pub fn effective_sparsity(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    norm: &NormSpec,
    opts: &EigenOptions,
) -> Result<f64> {
    Ok(effective_sparsity_of(omega_lower_bound(x, set, l, norm, opts)?))
}

fn is_l1_like(norm: &NormSpec) -> bool {
    matches!(norm, NormSpec::L1 | NormSpec::Cone(ConeSpec::FullOrthant))
}

fn comparison_constants(norm: &NormSpec, set: &IndexSet, res: &ResidualNorm) -> Result<(f64, f64)> {
    let mut c_s: f64 = 0.0;
    for &j in set.indices() {
        c_s = c_s.max(norm.unit_value(set.p(), j)?);
    }
    let c_r = if res.dim() == 0 {
        0.0
    } else {
        res.dual(&vec![1.0; res.dim()])?
    };
    Ok((c_s, c_r))
}

/// Lower bound on `δ_Ω(L,S)` by comparison with the exact ℓ1 eigenvalue.
pub fn omega_lower_bound(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    norm: &NormSpec,
    opts: &EigenOptions,
) -> Result<f64> {
    check_query(x, set, l)?;
    let res = norms::residual_norm(norm, set)?;
    if is_l1_like(norm) {
        return Ok(l1_eigenvalue(x, set, l, opts)?.lower_bound);
    }
    let (c_s, c_r) = comparison_constants(norm, set, &res)?;
    Ok(l1_eigenvalue(x, set, l * c_s * c_r, opts)?.lower_bound / c_s)
}

/// Gram blocks `X_AᵀX_B / n`.
fn gram(x: &DesignMatrix, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let n = x.n() as f64;
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        numeric::dot(x.column(rows[r]), x.column(cols[c])) / n
    })
}

fn quad(m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    numeric::sum(
        (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| u[r] * m[(r, c)] * v[c])),
    )
}

fn matvec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| numeric::sum((0..m.ncols()).map(|c| m[(r, c)] * v[c])))
        .collect()
}

fn tmatvec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|c| numeric::sum((0..m.nrows()).map(|r| m[(r, c)] * v[r])))
        .collect()
}

struct Blocks {
    gss: DMatrix<f64>,
    gsc: DMatrix<f64>,
    gcc: DMatrix<f64>,
}

impl Blocks {
    fn new(x: &DesignMatrix, set: &IndexSet, comp: &IndexSet) -> Self {
        Self {
            gss: gram(x, set.indices(), set.indices()),
            gsc: gram(x, set.indices(), comp.indices()),
            gcc: gram(x, comp.indices(), comp.indices()),
        }
    }

    /// `‖X_S b − X_{S^c} γ‖_n²`
    fn value(&self, b: &[f64], g: &[f64]) -> f64 {
        (quad(&self.gss, b, b) - 2.0 * quad(&self.gsc, b, g) + quad(&self.gcc, g, g)).max(0.0)
    }

    fn gradient(&self, b: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let gb = numeric::sub(&matvec(&self.gss, b), &matvec(&self.gsc, g));
        let gg = numeric::sub(&matvec(&self.gcc, g), &tmatvec(&self.gsc, b));
        (numeric::scale(&gb, 2.0), numeric::scale(&gg, 2.0))
    }

    fn lipschitz(&self) -> f64 {
        let (s, c) = (self.gss.nrows(), self.gcc.nrows());
        let full = DMatrix::from_fn(s + c, s + c, |r, k| match (r < s, k < s) {
            (true, true) => self.gss[(r, k)],
            (true, false) => -self.gsc[(r, k - s)],
            (false, true) => -self.gsc[(k, r - s)],
            (false, false) => self.gcc[(r - s, k - s)],
        });
        let top = SymmetricEigen::new(full).eigenvalues.max();
        2.0 * top.max(f64::MIN_POSITIVE) * (1.0 + 1e-12)
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

struct OmegaProblem<'a> {
    blocks: Blocks,
    lip: f64,
    set: &'a IndexSet,
    norm: &'a NormSpec,
    res: &'a ResidualNorm,
    l: f64,
}

impl OmegaProblem<'_> {
    fn omega_s(&self, b: &[f64]) -> f64 {
        norms::norm_eval(self.norm, &self.set.scatter(b)).expect("dimension checked")
    }

    fn subgradient(&self, b: &[f64]) -> Vec<f64> {
        let w = norms::subgradient(self.norm, &self.set.scatter(b)).expect("dimension checked");
        self.set.gather(&w)
    }

    fn project_tail(&self, g: &[f64]) -> Vec<f64> {
        if g.is_empty() {
            return Vec::new();
        }
        self.res.project_ball(g, self.l).expect("residual norm dimension")
    }

    /// FISTA on `{⟨w,b⟩ ≥ 1} × {Ω^{S^c}(γ) ≤ L}`, keeping the best iterate.
    fn convex_step(&self, w: &[f64], b0: &[f64], g0: &[f64], iters: usize) -> (Vec<f64>, Vec<f64>) {
        let ww = numeric::sum_sq(w);
        let half = |v: Vec<f64>| {
            let d = numeric::dot(w, &v);
            if d >= 1.0 {
                v
            } else {
                numeric::axpy(&v, (1.0 - d) / ww, w)
            }
        };
        let step = 1.0 / self.lip;
        let (mut zb, mut zg) = (b0.to_vec(), g0.to_vec());
        let (mut yb, mut yg) = (zb.clone(), zg.clone());
        let mut best = (self.blocks.value(&zb, &zg), zb.clone(), zg.clone());
        let mut t = 1.0_f64;
        for _ in 0..iters {
            let (gb, gg) = self.blocks.gradient(&yb, &yg);
            let nb = half(numeric::axpy(&yb, -step, &gb));
            let ng = self.project_tail(&numeric::axpy(&yg, -step, &gg));
            let moved = numeric::norm_inf(&numeric::sub(&nb, &zb))
                .max(numeric::norm_inf(&numeric::sub(&ng, &zg)));
            let scale = 1.0 + numeric::norm_inf(&zb).max(numeric::norm_inf(&zg));
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / tn;
            yb = numeric::axpy(&nb, mom, &numeric::sub(&nb, &zb));
            yg = numeric::axpy(&ng, mom, &numeric::sub(&ng, &zg));
            zb = nb;
            zg = ng;
            t = tn;
            let v = self.blocks.value(&zb, &zg);
            if v < best.0 {
                best = (v, zb.clone(), zg.clone());
            }
            if moved <= 1e-12 * scale {
                break;
            }
        }
        (best.1, best.2)
    }

    /// Convex-concave iterations from a feasible start; returns the squared
    /// objective and the final feasible pair.
    fn descend(&self, b0: Vec<f64>, g0: Vec<f64>) -> (f64, Vec<f64>, Vec<f64>) {
        let (mut b, mut g) = (b0, g0);
        let mut val = self.blocks.value(&b, &g);
        for _ in 0..30 {
            let w = self.subgradient(&b);
            if numeric::sum_sq(&w) == 0.0 {
                break;
            }
            let (nb, ng) = self.convex_step(&w, &b, &g, 150);
            let om = self.omega_s(&nb);
            if !(om > 0.0) {
                break;
            }
            let nb = numeric::scale(&nb, 1.0 / om);
            let ng = numeric::scale(&ng, 1.0 / om);
            let nv = self.blocks.value(&nb, &ng);
            if nv < val {
                let gain = val - nv;
                b = nb;
                g = ng;
                val = nv;
                if gain <= 1e-12 * (1e-12 + val) {
                    break;
                }
            } else {
                break;
            }
        }
        (val, b, g)
    }
}

/// `δ_Ω(L,S)`: exact for ℓ1-type norms, otherwise a witness-backed upper
/// bound with the comparison lower bound. `starts` are extra full-length
/// initial points (rescaled onto the feasible set).
pub fn omega_eigenvalue_with_starts(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    norm: &NormSpec,
    opts: &EigenOptions,
    starts: &[Vec<f64>],
) -> Result<EigenvalueResult> {
    check_query(x, set, l)?;
    norm.check_dim(x.p())?;
    let res = norms::residual_norm(norm, set)?;
    if is_l1_like(norm) {
        return l1_eigenvalue(x, set, l, opts);
    }
    let comp = set.complement();
    let lower = omega_lower_bound(x, set, l, norm, opts)?;
    let blocks = Blocks::new(x, set, &comp);
    let lip = blocks.lipschitz();
    let prob = OmegaProblem {
        blocks,
        lip,
        set,
        norm,
        res: &res,
        l,
    };

    let k = set.len();
    let mut inits: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let zero_tail = vec![0.0; comp.len()];
    for i in 0..k {
        let mut b = vec![0.0; k];
        b[i] = 1.0;
        inits.push((b, zero_tail.clone()));
    }
    for s in starts {
        if s.len() == x.p() {
            inits.push((set.gather(s), comp.gather(s)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for r in 0..opts.restarts {
        let b = gaussian_vec(&mut rng, k);
        let g = if r % 2 == 0 {
            zero_tail.clone()
        } else {
            gaussian_vec(&mut rng, comp.len())
        };
        inits.push((b, g));
    }

    let runs: Vec<(f64, Vec<f64>, Vec<f64>)> = inits
        .into_par_iter()
        .filter_map(|(b, g)| {
            let om = prob.omega_s(&b);
            if !(om > 0.0) {
                return None;
            }
            let b = numeric::scale(&b, 1.0 / om);
            let g = prob.project_tail(&numeric::scale(&g, 1.0 / om));
            Some(prob.descend(b, g))
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .fold(0, |m, (i, r)| if r.0 < runs[m].0 { i } else { m });
    let (_, b, g) = &runs[best];
    let mut witness = set.scatter(b);
    for (&j, v) in comp.indices().iter().zip(g) {
        witness[j] = *v;
    }
    let upper = eigen_objective(x, set, &witness)?;
    Ok(EigenvalueResult {
        value: upper,
        witness,
        certified: false,
        lower_bound: lower,
        upper_bound: upper,
    }
    .finish())
}

pub fn omega_eigenvalue(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    norm: &NormSpec,
    opts: &EigenOptions,
) -> Result<EigenvalueResult> {
    omega_eigenvalue_with_starts(x, set, l, norm, opts, &[])
}

/// `ℛ²(γ) = min_{‖b‖₂² = r²} ‖X_S b − X_{S^c} γ‖_n²`, solved through the
/// eigen-decomposition of `X_SᵀX_S/n` and the secular equation.
struct Adaptive {
    blocks: Blocks,
    lam: Vec<f64>,
    q: DMatrix<f64>,
    r2: f64,
}

impl Adaptive {
    fn new(blocks: Blocks, k: usize) -> Self {
        let eig = SymmetricEigen::new(blocks.gss.clone());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let lam = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let q = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
        Self {
            blocks,
            lam,
            q,
            r2: 1.0 / k as f64,
        }
    }

    fn inner(&self, g: &[f64]) -> (f64, Vec<f64>) {
        let k = self.lam.len();
        let c = matvec(&self.blocks.gsc, g);
        let ct = tmatvec(&self.q, &c);
        let cn = numeric::norm2(&c);
        let lam1 = self.lam[0];
        let spread = self.lam[k - 1].abs().max(lam1.abs()).max(1.0);
        let deg: Vec<bool> = self.lam.iter().map(|l| l - lam1 <= 1e-12 * spread).collect();
        let r = self.r2.sqrt();

        let mut bt = vec![0.0; k];
        let degenerate_free = (0..k).all(|i| !deg[i] || ct[i].abs() <= 1e-13 * (1.0 + cn));
        let mut hard = false;
        if degenerate_free {
            let phi: f64 = numeric::sum(
                (0..k)
                    .filter(|&i| !deg[i])
                    .map(|i| (ct[i] / (self.lam[i] - lam1)).powi(2)),
            );
            if phi <= self.r2 {
                hard = true;
                for i in 0..k {
                    if !deg[i] {
                        bt[i] = ct[i] / (self.lam[i] - lam1);
                    }
                }
                let first = deg.iter().position(|&d| d).unwrap();
                bt[first] = (self.r2 - phi).max(0.0).sqrt();
            }
        }
        if !hard {
            let phi = |mu: f64| numeric::sum((0..k).map(|i| (ct[i] / (self.lam[i] - mu)).powi(2)));
            let mut lo = lam1 - cn / r - 1e-300;
            let mut hi = lam1;
            for _ in 0..2000 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if phi(mid) < self.r2 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            for i in 0..k {
                bt[i] = ct[i] / (self.lam[i] - lo);
            }
            let nb = numeric::norm2(&bt);
            if nb > 0.0 {
                bt.iter_mut().for_each(|v| *v *= r / nb);
            }
        }
        let b = matvec(&self.q, &bt);
        (self.blocks.value(&b, g), b)
    }

    fn descend(&self, g0: &[f64], l: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let mut g = polytope::project_l1_ball(g0, l);
        let (mut v, mut b) = self.inner(&g);
        let top = SymmetricEigen::new(self.blocks.gcc.clone())
            .eigenvalues
            .max()
            .max(1e-12);
        let mut step = 0.5 / top;
        for _ in 0..3000 {
            let grad = numeric::scale(
                &numeric::sub(&matvec(&self.blocks.gcc, &g), &tmatvec(&self.blocks.gsc, &b)),
                2.0,
            );
            let mut accepted = None;
            for _ in 0..60 {
                let gn = polytope::project_l1_ball(&numeric::axpy(&g, -step, &grad), l);
                let d = numeric::sub(&gn, &g);
                let (vn, bn) = self.inner(&gn);
                if vn <= v + numeric::dot(&grad, &d) + numeric::sum_sq(&d) / (2.0 * step)
                    && vn <= v
                {
                    accepted = Some((gn, vn, bn, d));
                    break;
                }
                step *= 0.5;
            }
            let Some((gn, vn, bn, d)) = accepted else { break };
            let gain = v - vn;
            let moved = numeric::norm_inf(&d);
            g = gn;
            v = vn;
            b = bn;
            step *= 2.0;
            if moved <= 1e-13 * (1.0 + numeric::norm_inf(&g)) || gain <= 1e-16 * (1e-16 + v) {
                break;
            }
        }
        (v, b, g)
    }
}

/// `δ_{Ω_S}(L,S)`, the eigenvalue of `Ω_S(β) = √|S|‖β_S‖₂ + ‖β_{S^c}‖₁`.
pub fn adaptive_restricted_eigenvalue(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    opts: &EigenOptions,
) -> Result<EigenvalueResult> {
    adaptive_restricted_eigenvalue_with_starts(x, set, l, opts, &[])
}

/// As [`adaptive_restricted_eigenvalue`], also descending from the `S^c`
/// parts of the given full-length points (scaled into the ℓ1 ball).
pub fn adaptive_restricted_eigenvalue_with_starts(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    opts: &EigenOptions,
    starts: &[Vec<f64>],
) -> Result<EigenvalueResult> {
    check_query(x, set, l)?;
    let comp = set.complement();
    let k = set.len();
    let prob = Adaptive::new(Blocks::new(x, set, &comp), k);
    let m = comp.len();

    let mut inits: Vec<Vec<f64>> = vec![vec![0.0; m]];
    let exact = m == 0 || l == 0.0;
    if !exact {
        for j in 0..m {
            for s in [1.0, -1.0] {
                let mut g = vec![0.0; m];
                g[j] = s * l;
                inits.push(g);
            }
        }
        for s in starts {
            if s.len() == x.p() {
                inits.push(comp.gather(s));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.restarts {
            let h = gaussian_vec(&mut rng, m);
            let u: f64 = rng.random();
            let rad = l * u.powf(1.0 / m as f64);
            let nh = numeric::norm1(&h);
            inits.push(numeric::scale(&h, if nh > 0.0 { rad / nh } else { 0.0 }));
        }
    }
    let runs: Vec<(f64, Vec<f64>, Vec<f64>)> =
        inits.par_iter().map(|g| prob.descend(g, l)).collect();
    let best = runs
        .iter()
        .enumerate()
        .fold(0, |m, (i, r)| if r.0 < runs[m].0 { i } else { m });
    let (_, b, g) = &runs[best];
    let mut witness = set.scatter(b);
    for (&j, v) in comp.indices().iter().zip(g) {
        witness[j] = *v;
    }
    let upper = eigen_objective(x, set, &witness)?;
    let lower = if exact {
        upper
    } else {
        let rk = (k as f64).sqrt();
        l1_eigenvalue(x, set, l * rk, opts)?.lower_bound / rk
    };
    Ok(EigenvalueResult {
        value: upper,
        witness,
        certified: exact,
        lower_bound: lower,
        upper_bound: upper,
    }
    .finish())
}

/// Sampling upper bound on `δ_Ω(L,S)` for `p ≤ 4`: `resolution` random
/// points on `{Ω(β_S) = 1} × {Ω^{S^c}(β_{S^c}) ≤ L}`, half of them with the
/// tail on the boundary.
pub fn brute_force_eigenvalue(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    norm: &NormSpec,
    resolution: usize,
    seed: u64,
) -> Result<f64> {
    check_query(x, set, l)?;
    if x.p() > 4 {
        return Err(Error::InvalidArgument(format!(
            "brute force sampling needs p <= 4, got {}",
            x.p()
        )));
    }
    if resolution > BRUTE_FORCE_BUDGET {
        return Err(Error::Budget(format!(
            "resolution {resolution} exceeds {BRUTE_FORCE_BUDGET} samples"
        )));
    }
    let res = norms::residual_norm(norm, set)?;
    let comp = set.complement();
    let (k, m) = (set.len(), comp.len());
    let xs = DMatrix::from_fn(x.n(), x.p(), |i, j| x.get(i, j));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut beta = DVector::<f64>::zeros(x.p());
    for _ in 0..resolution {
        let b = gaussian_vec(&mut rng, k);
        let om = norms::norm_eval(norm, &set.scatter(&b))?;
        if !(om > 0.0) {
            continue;
        }
        for (&j, v) in set.indices().iter().zip(&b) {
            beta[j] = v / om;
        }
        if m > 0 {
            let h = gaussian_vec(&mut rng, m);
            let nh = res.eval(&h)?;
            let rad = if rng.random_bool(0.5) {
                l
            } else {
                l * rng.random::<f64>().powf(1.0 / m as f64)
            };
            for (&j, v) in comp.indices().iter().zip(&h) {
                beta[j] = -v * rad / nh;
            }
        }
        let v = (&xs * &beta).norm() / (x.n() as f64).sqrt();
        best = best.min(v);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::Partition;

    fn example2(first: bool) -> DesignMatrix {
        let n = 2.0_f64;
        let rn = n.sqrt();
        let (a, b) = if first { (5.0, 12.0) } else { (12.0, 5.0) };
        DesignMatrix::from_rows(&[
            vec![rn * a / 13.0, 0.0, rn],
            vec![rn * b / 13.0, rn, 0.0],
        ])
        .unwrap()
    }

    fn s3() -> IndexSet {
        IndexSet::from_one_based(3, &[3]).unwrap()
    }

    #[test]
    fn worked_example_first_matrix() {
        let opts = EigenOptions::default();
        let r = l1_eigenvalue(&example2(true), &s3(), 3.0, &opts).unwrap();
        assert!(r.certified);
        assert!((r.value - 2.0 / 26f64.sqrt()).abs() < 1e-9, "{r:?}");
        assert!((compatibility(&example2(true), &s3(), 3.0, &opts).unwrap() - 2.0 / 13.0).abs() < 1e-9);
        assert!((r.effective_sparsity() - 6.5).abs() < 1e-7);
        let r5 = l1_eigenvalue(&example2(true), &s3(), 5.0, &opts).unwrap();
        assert_eq!(r5.value, 0.0);
    }

    #[test]
    fn worked_example_second_matrix() {
        let r = l1_eigenvalue(&example2(false), &s3(), 3.0, &EigenOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.effective_sparsity(), f64::INFINITY);
        assert!(r.witness[0].abs() + r.witness[1].abs() <= 3.0 + 1e-12);
    }

    #[test]
    fn witness_is_feasible_and_attains_value() {
        let x = crate::model::gaussian_design(12, 6, 0.3, 7).unwrap();
        let s = IndexSet::from_one_based(6, &[1, 4]).unwrap();
        let r = l1_eigenvalue(&x, &s, 1.5, &EigenOptions::default()).unwrap();
        let ws: f64 = s.indices().iter().map(|&j| r.witness[j].abs()).sum();
        let wc: f64 = s.complement().indices().iter().map(|&j| r.witness[j].abs()).sum();
        assert!((ws - 1.0).abs() < 1e-12);
        assert!(wc <= 1.5 + 1e-12);
        assert!((eigen_objective(&x, &s, &r.witness).unwrap() - r.value).abs() < 1e-12);
    }

    #[test]
    fn duplicate_column_in_s_gives_zero() {
        let base = crate::model::gaussian_design(10, 4, 0.0, 3).unwrap();
        let mut cols: Vec<Vec<f64>> = (0..4).map(|j| base.column(j).to_vec()).collect();
        cols.push(cols[0].clone());
        let x = DesignMatrix::from_columns(&cols).unwrap();
        let s = IndexSet::from_one_based(5, &[1, 5]).unwrap();
        let r = l1_eigenvalue(&x, &s, 1.0, &EigenOptions::default()).unwrap();
        assert!(r.value <= 1e-8);
    }

    #[test]
    fn orthonormal_design_gives_inverse_cardinality() {
        let x = crate::model::orthonormal_design(8, 5, 11).unwrap();
        for set in [vec![2], vec![1, 3], vec![1, 2, 5]] {
            let s = IndexSet::from_one_based(5, &set).unwrap();
            for l in [0.5, 2.0, 10.0] {
                let r = l1_eigenvalue(&x, &s, l, &EigenOptions::default()).unwrap();
                assert!((r.value.powi(2) - 1.0 / set.len() as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn omega_matches_l1_for_l1() {
        let x = crate::model::gaussian_design(10, 5, 0.2, 1).unwrap();
        let s = IndexSet::from_one_based(5, &[2, 3]).unwrap();
        let a = omega_eigenvalue(&x, &s, 2.0, &NormSpec::L1, &EigenOptions::default()).unwrap();
        let b = l1_eigenvalue(&x, &s, 2.0, &EigenOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn group_norm_single_group_orthonormal() {
        let x = crate::model::orthonormal_design(9, 5, 4).unwrap();
        let part = Partition::from_one_based(&[vec![1, 2, 3], vec![4], vec![5]]).unwrap();
        let norm = NormSpec::Group(part);
        let s = IndexSet::from_one_based(5, &[1, 2, 3]).unwrap();
        let r = omega_eigenvalue(&x, &s, 0.0, &norm, &EigenOptions::default()).unwrap();
        assert!((r.value - 1.0 / 3f64.sqrt()).abs() < 1e-7, "{r:?}");
        assert!(r.lower_bound <= r.value + 1e-12);
    }

    #[test]
    fn omega_bounds_bracket_brute_force() {
        let x = crate::model::gaussian_design(6, 4, 0.4, 9).unwrap();
        let s = IndexSet::from_one_based(4, &[1, 2]).unwrap();
        let norm = NormSpec::Cone(ConeSpec::Monotone);
        let r = omega_eigenvalue(&x, &s, 1.0, &norm, &EigenOptions::default()).unwrap();
        let bf = brute_force_eigenvalue(&x, &s, 1.0, &norm, 200_000, 5).unwrap();
        assert!(r.lower_bound <= r.upper_bound);
        assert!(r.upper_bound <= bf + 1e-9, "{} vs {bf}", r.upper_bound);
        assert!(bf - r.upper_bound < 2e-2, "{} vs {bf}", r.upper_bound);
    }

    #[test]
    fn adaptive_at_zero_is_min_rayleigh_quotient() {
        let x = crate::model::gaussian_design(15, 6, 0.5, 2).unwrap();
        let s = IndexSet::from_one_based(6, &[1, 2, 3]).unwrap();
        let r = adaptive_restricted_eigenvalue(&x, &s, 0.0, &EigenOptions::default()).unwrap();
        let g = gram(&x, s.indices(), s.indices());
        let lmin = SymmetricEigen::new(g).eigenvalues.min();
        assert!(r.certified);
        assert!((r.value.powi(2) - lmin / 3.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_is_below_l1() {
        let x = crate::model::gaussian_design(15, 6, 0.2, 8).unwrap();
        let s = IndexSet::from_one_based(6, &[2, 5]).unwrap();
        let opts = EigenOptions::default();
        let d = l1_eigenvalue(&x, &s, 2.0, &opts).unwrap();
        let a = adaptive_restricted_eigenvalue_with_starts(&x, &s, 2.0, &opts, std::slice::from_ref(&d.witness))
            .unwrap();
        assert!(a.value <= d.value + 1e-7);
    }

    #[test]
    fn brute_force_respects_budget_and_dimension() {
        let x = example2(true);
        assert!(matches!(
            brute_force_eigenvalue(&x, &s3(), 3.0, &NormSpec::L1, BRUTE_FORCE_BUDGET + 1, 0),
            Err(Error::Budget(_))
        ));
        let big = crate::model::gaussian_design(5, 5, 0.0, 0).unwrap();
        let s = IndexSet::from_one_based(5, &[1]).unwrap();
        assert!(brute_force_eigenvalue(&big, &s, 1.0, &NormSpec::L1, 10, 0).is_err());
    }

    #[test]
    fn invalid_queries() {
        let x = example2(true);
        let opts = EigenOptions::default();
        assert!(l1_eigenvalue(&x, &IndexSet::empty(3), 1.0, &opts).is_err());
        assert!(l1_eigenvalue(&x, &s3(), -1.0, &opts).is_err());
        assert!(l1_eigenvalue(&x, &IndexSet::full(4), 1.0, &opts).is_err());
    }
}
