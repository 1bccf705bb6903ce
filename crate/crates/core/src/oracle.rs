//! Monte Carlo verification of the sharp oracle inequality
//!
//! ```text
//! ‖X(β̂ − β⁰)‖_n² + δ(λ − λ^{S^c}) Ω^{S^c}(β̂_{S^c}) + δ(λ + λ^S) Ω(β̂_S − β)
//!     ≤ ‖X(β − β⁰)‖_n² + [(1 + δ)(λ + λ^S)]² Γ²_Ω(L_S, S)
//! ```
//!
//! with `λ^S = Ω_*((εᵀX)_S/n)`, `λ^{S^c} = Ω^{S^c}_*((εᵀX)_{S^c}/n)`,
//! `L_S = ((λ + λ^S)/(λ − λ^{S^c})) ((1 + δ)/(1 − δ))`, for every `λ > λ^{S^c}`,
//! `0 ≤ δ < 1` and allowed `S ⊇ supp(β)`. Here `δ` is the slack parameter
//! (`delta_slack`), not an eigenvalue. `Γ²_Ω` is replaced by the upper
//! bound `1/δ_Ω²` from a lower bound on `δ_Ω`, which keeps every verdict
//! valid.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{self, ConeSpec};
use crate::eigen::{self, EigenOptions, EigenvalueResult};
use crate::error::{Error, Result};
use crate::model::{self, normalized_norm, restrict, DesignMatrix, IndexSet, NoiseModel};
use crate::norms::{self, NormSpec, ResidualNorm};
use crate::numeric;
use crate::solve::{self, SolveOptions};

/// Slack below this counts as a violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignSource {
    /// CSV file, relative paths resolved against the config file.
    File { path: PathBuf },
    /// Gaussian rows with Toeplitz correlation `rho^|j-k|`.
    Gaussian {
        n: usize,
        p: usize,
        #[serde(default)]
        rho: f64,
        seed: u64,
    },
    Inline { rows: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed { value: f64 },
    /// `λ = c λ^{S^c} + offset`
    Multiplier {
        c: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Multiplier {
            c: 1.5,
            offset: 1e-6,
        }
    }
}

impl LambdaRule {
    pub fn lambda(&self, lambda_sc: f64) -> f64 {
        match self {
            LambdaRule::Fixed { value } => *value,
            LambdaRule::Multiplier { c, offset } => c * lambda_sc + offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: DesignSource,
    pub beta0: Vec<f64>,
    /// Oracle candidate; defaults to `β⁰`.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    /// 1-based allowed set containing `supp(β)`; defaults to the smallest one.
    #[serde(default)]
    pub set: Option<Vec<usize>>,
    pub norm: NormSpec,
    pub sigma: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub lambda: LambdaRule,
    #[serde(default)]
    pub delta_slack: f64,
    #[serde(default)]
    pub eigen: EigenOptions,
    /// Also compute a witness-backed upper bound on `δ_Ω` (slower).
    #[serde(default)]
    pub eigen_upper: bool,
    #[serde(default)]
    pub solver: SolveOptions,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        if let DesignSource::File { path: p } = &mut cfg.design {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct Instance {
    pub x: DesignMatrix,
    pub beta0: Vec<f64>,
    pub beta: Vec<f64>,
    pub set: IndexSet,
    pub residual: ResidualNorm,
    pub config: ExperimentConfig,
}

impl Instance {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let x = match &config.design {
            DesignSource::File { path } => model::load_matrix(path, model::MatrixFormat::Csv)?,
            DesignSource::Gaussian { n, p, rho, seed } => model::gaussian_design(*n, *p, *rho, *seed)?,
            DesignSource::Inline { rows } => DesignMatrix::from_rows(rows)?,
        };
        let p = x.p();
        if config.beta0.len() != p {
            return Err(Error::Dimension(format!(
                "beta0 has {} entries, design has {p} columns",
                config.beta0.len()
            )));
        }
        if config.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&config.delta_slack) {
            return Err(Error::InvalidArgument(format!(
                "delta_slack must lie in [0, 1), got {}",
                config.delta_slack
            )));
        }
        if let LambdaRule::Multiplier { c, offset } = config.lambda {
            if !(c > 1.0) || !(offset >= 0.0) {
                return Err(Error::InvalidArgument(
                    "lambda multiplier must exceed 1 with a nonnegative offset".into(),
                ));
            }
        }
        config.norm.check_dim(p)?;
        let beta = config.beta.clone().unwrap_or_else(|| config.beta0.clone());
        if beta.len() != p {
            return Err(Error::Dimension("beta has the wrong length".into()));
        }
        let supp = model::support(&beta);
        let set = match &config.set {
            Some(s) => IndexSet::from_one_based(p, s)?,
            None => smallest_allowed_superset(&config.norm, &supp)?,
        };
        if !set.is_superset_of(&supp) {
            return Err(Error::InvalidArgument(format!(
                "S = {set} does not contain the support {supp} of beta"
            )));
        }
        let residual = norms::residual_norm(&config.norm, &set)?;
        Ok(Self {
            x,
            beta0: config.beta0.clone(),
            beta,
            set,
            residual,
            config: config.clone(),
        })
    }
}

/// The smallest allowed `S ⊇ support`; ties among equal sizes go to the
/// lexicographically first set.
pub fn smallest_allowed_superset(norm: &NormSpec, support: &IndexSet) -> Result<IndexSet> {
    let p = support.p();
    norm.check_dim(p)?;
    let set = match norm {
        NormSpec::L1 | NormSpec::Cone(ConeSpec::FullOrthant) => support.clone(),
        NormSpec::Group(part) | NormSpec::Cone(ConeSpec::GroupConstant(part)) => part.closure(support),
        NormSpec::TrivialG(g) => {
            if g.iter().any(|&j| support.contains(j)) {
                support.union(&IndexSet::new(p, g.iter().copied())?)
            } else {
                support.clone()
            }
        }
        NormSpec::Cone(ConeSpec::Monotone) => match support.indices().last() {
            Some(&m) => IndexSet::new(p, 0..=m)?,
            None => support.clone(),
        },
        NormSpec::Cone(ConeSpec::PolyhedralRays(_)) => {
            let rest: Vec<usize> = support.complement().indices().to_vec();
            for extra in 0..=rest.len() {
                if let Some(s) = first_allowed_combination(norm, support, &rest, extra) {
                    return Ok(s);
                }
            }
            IndexSet::full(p)
        }
    };
    debug_assert!(norms::is_allowed_set(norm, &set).allowed);
    Ok(set)
}

fn first_allowed_combination(
    norm: &NormSpec,
    base: &IndexSet,
    rest: &[usize],
    k: usize,
) -> Option<IndexSet> {
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let add = pick.iter().map(|&i| rest[i]);
        let cand = base.union(&IndexSet::new(base.p(), add).expect("in range"));
        if norms::is_allowed_set(norm, &cand).allowed {
            return Some(cand);
        }
        // next k-combination of 0..rest.len()
        let mut i = k;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if pick[i] < rest.len() - k + i {
                pick[i] += 1;
                for j in i + 1..k {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `(λ^S, λ^{S^c}) = (Ω_*((εᵀX)_S/n), Ω^{S^c}_*((εᵀX)_{S^c}/n))`.
pub fn empirical_lambdas(
    x: &DesignMatrix,
    eps: &[f64],
    set: &IndexSet,
    norm: &NormSpec,
) -> Result<(f64, f64)> {
    if eps.len() != x.n() {
        return Err(Error::Dimension("noise length differs from n".into()));
    }
    let res = norms::residual_norm(norm, set)?;
    let z = numeric::scale(&x.tmul(eps), 1.0 / x.n() as f64);
    let ls = if set.is_empty() {
        0.0
    } else {
        norms::dual_norm_eval(norm, &restrict(&z, set)?)?
    };
    Ok((ls, res.dual_full(&z)?))
}

/// `L_S = ((λ + λ^S)/(λ − λ^{S^c})) ((1 + δ)/(1 − δ))`.
pub fn stretch_factor(lambda: f64, lambda_s: f64, lambda_sc: f64, delta_slack: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta_slack) {
        return Err(Error::InvalidArgument(format!(
            "delta_slack must lie in [0, 1), got {delta_slack}"
        )));
    }
    if !(lambda > lambda_sc) {
        return Err(Error::Inapplicable { lambda, lambda_sc });
    }
    Ok((lambda + lambda_s) / (lambda - lambda_sc) * ((1.0 + delta_slack) / (1.0 - delta_slack)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Unverifiable,
    Inapplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub replicate: usize,
    pub seed: u64,
    pub status: Status,
    pub lambda: f64,
    pub lambda_s: f64,
    pub lambda_sc: f64,
    #[serde(with = "numeric::extended_option")]
    pub stretch: Option<f64>,
    /// Lower bound on `δ_Ω(L_S, S)` used for the verdict.
    #[serde(with = "numeric::extended_option")]
    pub eigen_lower: Option<f64>,
    /// Witness-backed upper bound, when requested.
    #[serde(default, with = "numeric::extended_option")]
    pub eigen_upper: Option<f64>,
    /// Upper bound on `Γ²_Ω(L_S, S)`; exact when `gamma_certified`.
    #[serde(with = "numeric::extended_option")]
    pub gamma2: Option<f64>,
    pub gamma_certified: bool,
    #[serde(with = "numeric::extended_option")]
    pub prediction_error: Option<f64>,
    /// `δ(λ − λ^{S^c}) Ω^{S^c}(β̂_{S^c})`
    #[serde(with = "numeric::extended_option")]
    pub residual_term: Option<f64>,
    /// `δ(λ + λ^S) Ω(β̂_S − β)`
    #[serde(with = "numeric::extended_option")]
    pub support_term: Option<f64>,
    #[serde(with = "numeric::extended_option")]
    pub lhs: Option<f64>,
    #[serde(with = "numeric::extended_option")]
    pub approximation_error: Option<f64>,
    #[serde(with = "numeric::extended_option")]
    pub estimation_term: Option<f64>,
    #[serde(with = "numeric::extended_option")]
    pub rhs: Option<f64>,
    #[serde(with = "numeric::extended_option")]
    pub slack: Option<f64>,
    #[serde(with = "numeric::extended_option")]
    pub kkt_residual: Option<f64>,
    pub converged: Option<bool>,
    pub reason: Option<String>,
}

impl ReplicateReport {
    fn empty(replicate: usize, seed: u64) -> Self {
        Self {
            replicate,
            seed,
            status: Status::Inapplicable,
            lambda: 0.0,
            lambda_s: 0.0,
            lambda_sc: 0.0,
            stretch: None,
            eigen_lower: None,
            eigen_upper: None,
            gamma2: None,
            gamma_certified: false,
            prediction_error: None,
            residual_term: None,
            support_term: None,
            lhs: None,
            approximation_error: None,
            estimation_term: None,
            rhs: None,
            slack: None,
            kkt_residual: None,
            converged: None,
            reason: None,
        }
    }
}

/// Lower bound on `δ_Ω(L,S)` and whether it is exact, or `None` when no
/// valid bound is available.
fn eigen_lower_bound(inst: &Instance, l: f64) -> Result<Option<(f64, bool)>> {
    if inst.set.is_empty() {
        return Ok(Some((f64::INFINITY, true)));
    }
    let opts = &inst.config.eigen;
    if inst.set.len() > opts.orthant_cap {
        return Ok(None);
    }
    let exact = matches!(
        inst.config.norm,
        NormSpec::L1 | NormSpec::Cone(ConeSpec::FullOrthant)
    );
    let lb = eigen::omega_lower_bound(&inst.x, &inst.set, l, &inst.config.norm, opts)?;
    Ok(Some((lb, exact)))
}

/// One replicate with noise seed `seed`.
pub fn run_replicate(inst: &Instance, replicate: usize, seed: u64) -> Result<ReplicateReport> {
    let cfg = &inst.config;
    let x = &inst.x;
    let mut rep = ReplicateReport::empty(replicate, seed);
    let eps = model::draw_noise(&NoiseModel::gaussian(cfg.sigma, seed), x.n())?;
    let y = numeric::add(&x.mul(&inst.beta0), &eps);
    let (ls, lsc) = empirical_lambdas(x, &eps, &inst.set, &cfg.norm)?;
    let lambda = cfg.lambda.lambda(lsc);
    rep.lambda = lambda;
    rep.lambda_s = ls;
    rep.lambda_sc = lsc;
    let d = cfg.delta_slack;
    let l_s = match stretch_factor(lambda, ls, lsc, d) {
        Ok(v) => v,
        Err(Error::Inapplicable { .. }) => {
            rep.reason = Some("lambda does not exceed lambda^(S^c)".into());
            return Ok(rep);
        }
        Err(e) => return Err(e),
    };
    rep.stretch = Some(l_s);

    let fit = solve::solve_penalized_ls(x, &y, lambda, &cfg.norm, &cfg.solver)?;
    rep.kkt_residual = Some(fit.kkt_residual);
    rep.converged = Some(fit.converged);
    let pred = normalized_norm(&x.mul(&numeric::sub(&fit.beta, &inst.beta0)))?.powi(2);
    let res_term = d * (lambda - lsc) * inst.residual.eval_full(&fit.beta)?;
    let diff = numeric::sub(&restrict(&fit.beta, &inst.set)?, &inst.beta);
    let sup_term = d * (lambda + ls) * norms::norm_eval(&cfg.norm, &diff)?;
    let lhs = pred + res_term + sup_term;
    let approx = normalized_norm(&x.mul(&numeric::sub(&inst.beta, &inst.beta0)))?.powi(2);
    rep.prediction_error = Some(pred);
    rep.residual_term = Some(res_term);
    rep.support_term = Some(sup_term);
    rep.lhs = Some(lhs);
    rep.approximation_error = Some(approx);

    if cfg.eigen_upper && !inst.set.is_empty() {
        let up = eigen::omega_eigenvalue(x, &inst.set, l_s, &cfg.norm, &cfg.eigen)?;
        rep.eigen_upper = Some(up.upper_bound);
    }
    let Some((lb, exact)) = eigen_lower_bound(inst, l_s)? else {
        rep.status = Status::Unverifiable;
        rep.reason = Some("no valid lower bound on the eigenvalue".into());
        return Ok(rep);
    };
    let gamma2 = if inst.set.is_empty() {
        0.0
    } else {
        eigen::effective_sparsity_of(lb)
    };
    rep.eigen_lower = Some(lb);
    rep.gamma2 = Some(gamma2);
    rep.gamma_certified = exact;
    let factor = ((1.0 + d) * (lambda + ls)).powi(2);
    let est = if gamma2 == 0.0 { 0.0 } else { factor * gamma2 };
    let rhs = approx + est;
    rep.estimation_term = Some(est);
    rep.rhs = Some(rhs);
    rep.slack = Some(rhs - lhs);

    if !fit.converged {
        rep.status = Status::Unverifiable;
        rep.reason = Some("solver did not reach the KKT tolerance".into());
    } else if rhs - lhs >= -VIOLATION_TOLERANCE {
        rep.status = Status::Pass;
    } else {
        rep.status = Status::Fail;
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub replicates: usize,
    pub applicable: usize,
    pub passed: usize,
    pub failed: usize,
    pub unverifiable: usize,
    pub inapplicable: usize,
    /// Passes whose Γ² bound is infinite.
    pub vacuous: usize,
    pub applicability_rate: f64,
    #[serde(with = "numeric::extended_option")]
    pub min_slack: Option<f64>,
    #[serde(with = "numeric::extended_option")]
    pub median_slack: Option<f64>,
}

impl OracleSummary {
    pub fn from_reports(reports: &[ReplicateReport]) -> Self {
        let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
        let inapplicable = count(Status::Inapplicable);
        let mut slacks: Vec<f64> = reports
            .iter()
            .filter(|r| matches!(r.status, Status::Pass | Status::Fail))
            .filter_map(|r| r.slack)
            .collect();
        slacks.sort_by(f64::total_cmp);
        let median = if slacks.is_empty() {
            None
        } else {
            let m = slacks.len() / 2;
            Some(if slacks.len() % 2 == 1 {
                slacks[m]
            } else if slacks[m - 1].is_infinite() || slacks[m].is_infinite() {
                if slacks[m - 1] == slacks[m] { slacks[m] } else { 0.5 * slacks[m - 1] + 0.5 * slacks[m] }
            } else {
                0.5 * (slacks[m - 1] + slacks[m])
            })
        };
        Self {
            replicates: reports.len(),
            applicable: reports.len() - inapplicable,
            passed: count(Status::Pass),
            failed: count(Status::Fail),
            unverifiable: count(Status::Unverifiable),
            inapplicable,
            vacuous: reports
                .iter()
                .filter(|r| r.status == Status::Pass && r.gamma2 == Some(f64::INFINITY))
                .count(),
            applicability_rate: (reports.len() - inapplicable) as f64 / reports.len().max(1) as f64,
            min_slack: slacks.first().copied(),
            median_slack: median,
        }
    }

    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| match v {
            None => String::new(),
            Some(x) if x.is_nan() => "nan".into(),
            Some(x) if x.is_infinite() => if x > 0.0 { "inf".into() } else { "-inf".into() },
            Some(x) => format!("{x:.16e}"),
        };
        format!(
            "replicates,applicable,passed,failed,unverifiable,inapplicable,vacuous,applicability_rate,min_slack,median_slack\n{},{},{},{},{},{},{},{},{},{}\n",
            self.replicates,
            self.applicable,
            self.passed,
            self.failed,
            self.unverifiable,
            self.inapplicable,
            self.vacuous,
            f(Some(self.applicability_rate)),
            f(self.min_slack),
            f(self.median_slack),
        )
    }
}

/// All replicates (noise seed `seed + r`), merged in replicate order.
pub fn oracle_check(config: &ExperimentConfig) -> Result<Vec<ReplicateReport>> {
    let inst = Instance::new(config)?;
    (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(&inst, r, config.seed.wrapping_add(r as u64)))
        .collect()
}

/// `<dir>/<stem>.summary.csv` next to the report.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.summary.csv"))
}

/// Runs the experiment, writing JSON lines to `out` and the summary CSV
/// beside it.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<OracleSummary> {
    let reports = oracle_check(config)?;
    let summary = OracleSummary::from_reports(&reports);
    let mut text = Vec::new();
    for r in &reports {
        serde_json::to_writer(&mut text, r)?;
        text.push(b'\n');
    }
    let mut f = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    f.write_all(&text).map_err(|e| Error::io(out, e))?;
    let sp = summary_path(out);
    std::fs::write(&sp, summary.to_csv()).map_err(|e| Error::io(&sp, e))?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub adaptive: EigenvalueResult,
    pub l1: EigenvalueResult,
    pub omega: Option<EigenvalueResult>,
    /// `δ_{Ω_S} ≤ δ + 1e-7` on the computed values.
    pub l1_holds: bool,
    pub omega_holds: Option<bool>,
    /// A lower bound on `δ_{Ω_S}` exceeds an upper bound on the other
    /// eigenvalue: a genuine violation.
    pub l1_violated: bool,
    pub omega_violated: Option<bool>,
    pub skipped: Option<String>,
}

/// Computes `δ_{Ω_S}(L,S)`, `δ(L,S)` and `δ_Ω(L,S)` for a cone norm and
/// checks `δ_{Ω_S} ≤ δ` and `δ_{Ω_S} ≤ δ_Ω`. The cone comparison needs `S`
/// allowed and `1_S ∈ 𝒜`; otherwise it is skipped with a reason.
pub fn comparison_check(
    x: &DesignMatrix,
    set: &IndexSet,
    l: f64,
    cone_spec: &ConeSpec,
    opts: &EigenOptions,
) -> Result<ComparisonRecord> {
    let l1 = eigen::l1_eigenvalue(x, set, l, opts)?;
    let norm = NormSpec::Cone(cone_spec.clone());
    let indicator: Vec<f64> = (0..x.p()).map(|j| if set.contains(j) { 1.0 } else { 0.0 }).collect();
    let skipped = if let Some((reason, _)) = cone::allowed_violation(cone_spec, set) {
        Some(format!("S is not allowed: {reason}"))
    } else if !cone_spec.contains(&indicator, 1e-9) {
        Some("the indicator of S is not in the cone".into())
    } else {
        None
    };
    let omega = match skipped {
        None => Some(eigen::omega_eigenvalue_with_starts(
            x,
            set,
            l,
            &norm,
            opts,
            std::slice::from_ref(&l1.witness),
        )?),
        Some(_) => None,
    };
    let mut starts = vec![l1.witness.clone()];
    if let Some(o) = &omega {
        starts.push(o.witness.clone());
    }
    let adaptive = eigen::adaptive_restricted_eigenvalue_with_starts(x, set, l, opts, &rescale_for_adaptive(set, &starts))?;
    let tol = VIOLATION_TOLERANCE;
    Ok(ComparisonRecord {
        l1_holds: adaptive.value <= l1.value + tol,
        l1_violated: adaptive.lower_bound > l1.upper_bound + tol,
        omega_holds: omega.as_ref().map(|o| adaptive.value <= o.value + tol),
        omega_violated: omega.as_ref().map(|o| adaptive.lower_bound > o.upper_bound + tol),
        adaptive,
        l1,
        omega,
        skipped,
    })
}

/// Maps a witness `(b, γ)` to `(b, γ)/t` with `t = √|S|‖b‖₂`; when
/// `‖γ‖₁ ≤ L t`, the result is feasible for `δ_{Ω_S}` with no larger value.
fn rescale_for_adaptive(set: &IndexSet, starts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    starts
        .iter()
        .filter_map(|w| {
            let t = (set.len() as f64).sqrt() * numeric::norm2(&set.gather(w));
            (t > 0.0).then(|| numeric::scale(w, 1.0 / t))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PontilMaurerRecord {
    pub draws: usize,
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `mean − 3 · std_error ≤ bound`
    pub holds: bool,
}

/// Empirical `E Ω_*(εᵀX; 𝒜)/n` for `ε ~ N(0, I)` against `λ_ε`.
pub fn pontil_maurer_check(
    x: &DesignMatrix,
    cone_spec: &ConeSpec,
    draws: usize,
    seed: u64,
) -> Result<PontilMaurerRecord> {
    if draws < 100 {
        return Err(Error::InvalidArgument(format!(
            "at least 100 draws are required, got {draws}"
        )));
    }
    let bound = cone::pontil_maurer_bound(x, cone_spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.n() as f64;
    let mut vals = Vec::with_capacity(draws);
    for _ in 0..draws {
        let eps: Vec<f64> = (0..x.n()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        vals.push(cone::cone_dual_eval(cone_spec, &x.tmul(&eps))? / n);
    }
    let mean = numeric::sum(vals.iter().copied()) / draws as f64;
    let var = numeric::sum(vals.iter().map(|v| (v - mean) * (v - mean))) / (draws - 1) as f64;
    let std_error = (var / draws as f64).sqrt();
    Ok(PontilMaurerRecord {
        draws,
        mean,
        std_error,
        bound,
        holds: mean - 3.0 * std_error <= bound,
    })
}
