//! Penalty norms Ω: evaluation, dual norms, proximal maps, allowed sets and
//! the residual norms `Ω^{S^c}` of weak decomposability
//!
//! ```text
//! Ω(β) ≥ Ω(β_S) + Ω^{S^c}(β_{S^c})   for all β.
//! ```
//!
//! `Ω^{S^c}` is always the largest natural choice: the restriction for the
//! ℓ1 and group norms, `ℓ1` on `S^c` for the trivial norm with `S ⊇ G`, and
//! `Ω(·; 𝒜_{S^c})` for cone norms.
//!
//! # JSON
//!
//! Group indices are 1-based.
//!
//! ```json
//! {"family": "l1"}
//! {"family": "group", "groups": [[1, 2], [3, 4]]}
//! {"family": "trivial_g", "g": [1, 2]}
//! {"family": "cone", "cone": "full_orthant"}
//! {"family": "cone", "cone": "monotone"}
//! {"family": "cone", "cone": "group_constant", "groups": [[1, 2], [3]]}
//! {"family": "cone", "cone": "rays", "rays": [[1, 0, 0], [1, 1, 0], [1, 1, 1]]}
//! ```

use serde::{Deserialize, Serialize};

use crate::cone::{self, ConeSpec, ConeSpecJson};
use crate::error::{Error, Result};
use crate::model::{restrict, IndexSet};
use crate::numeric;
use crate::polytope;

/// A partition of `{0, …, p-1}` into disjoint, nonempty groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    p: usize,
    groups: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        let p: usize = groups.iter().map(Vec::len).sum();
        let mut owner = vec![usize::MAX; p];
        let mut groups = groups;
        for (t, g) in groups.iter_mut().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidArgument(format!("group {} is empty", t + 1)));
            }
            g.sort_unstable();
            for &j in g.iter() {
                if j >= p {
                    return Err(Error::InvalidArgument(format!(
                        "groups must partition {{1..{p}}}: index {} out of range",
                        j + 1
                    )));
                }
                if owner[j] != usize::MAX {
                    return Err(Error::InvalidArgument(format!(
                        "groups must be disjoint: index {} appears twice",
                        j + 1
                    )));
                }
                owner[j] = t;
            }
        }
        Ok(Self { p, groups, owner })
    }

    pub fn from_one_based(groups: &[Vec<usize>]) -> Result<Self> {
        let mut out = Vec::with_capacity(groups.len());
        for g in groups {
            if g.contains(&0) {
                return Err(Error::InvalidArgument("group indices are 1-based".into()));
            }
            out.push(g.iter().map(|j| j - 1).collect());
        }
        Self::new(out)
    }

    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|j| j + 1).collect())
            .collect()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, j: usize) -> usize {
        self.owner[j]
    }

    pub fn is_union_of_groups(&self, set: &IndexSet) -> bool {
        set.indices().iter().all(|&j| {
            self.groups[self.owner[j]]
                .iter()
                .all(|&k| set.contains(k))
        })
    }

    /// Smallest union of groups containing `set`.
    pub fn closure(&self, set: &IndexSet) -> IndexSet {
        let mut idx = Vec::new();
        for &j in set.indices() {
            idx.extend_from_slice(&self.groups[self.owner[j]]);
        }
        IndexSet::new(self.p, idx).expect("closure stays in range")
    }

    /// The groups lying inside `sub`, re-indexed by position within `sub`.
    pub fn restricted_to(&self, sub: &IndexSet) -> Partition {
        let pos: std::collections::HashMap<usize, usize> = sub
            .indices()
            .iter()
            .enumerate()
            .map(|(k, &j)| (j, k))
            .collect();
        let groups: Vec<Vec<usize>> = self
            .groups
            .iter()
            .filter(|g| g.iter().all(|j| pos.contains_key(j)))
            .map(|g| g.iter().map(|j| pos[j]).collect())
            .collect();
        Partition::new(groups).expect("restriction of a partition is a partition")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NormSpec {
    /// `‖β‖₁`
    L1,
    /// `Σ_t √|G_t| ‖β_{G_t}‖₂`
    Group(Partition),
    /// `Ω(β; 𝒜)`
    Cone(ConeSpec),
    /// `√|G| ‖β_G‖₂ + ‖β_{G^c}‖₁`, with 0-based `G`.
    TrivialG(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum NormSpecJson {
    L1,
    Group { groups: Vec<Vec<usize>> },
    TrivialG { g: Vec<usize> },
    Cone(ConeSpecJson),
}

impl Serialize for NormSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let j = match self {
            NormSpec::L1 => NormSpecJson::L1,
            NormSpec::Group(part) => NormSpecJson::Group {
                groups: part.to_one_based(),
            },
            NormSpec::TrivialG(g) => NormSpecJson::TrivialG {
                g: g.iter().map(|j| j + 1).collect(),
            },
            NormSpec::Cone(c) => NormSpecJson::Cone(c.clone().into()),
        };
        j.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NormSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        Ok(match NormSpecJson::deserialize(d)? {
            NormSpecJson::L1 => NormSpec::L1,
            NormSpecJson::Group { groups } => {
                NormSpec::Group(Partition::from_one_based(&groups).map_err(D::Error::custom)?)
            }
            NormSpecJson::TrivialG { g } => {
                if g.contains(&0) {
                    return Err(D::Error::custom("indices of G are 1-based"));
                }
                NormSpec::trivial_g(g.iter().map(|j| j - 1).collect())
            }
            NormSpecJson::Cone(c) => NormSpec::Cone(ConeSpec::try_from(c).map_err(D::Error::custom)?),
        })
    }
}

impl NormSpec {
    pub fn trivial_g(mut g: Vec<usize>) -> Self {
        g.sort_unstable();
        g.dedup();
        NormSpec::TrivialG(g)
    }

    pub fn group(groups: Vec<Vec<usize>>) -> Result<Self> {
        Ok(NormSpec::Group(Partition::new(groups)?))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("norm specs always serialize")
    }

    /// Fixed dimension, if the spec carries one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            NormSpec::L1 | NormSpec::TrivialG(_) => None,
            NormSpec::Group(part) => Some(part.p()),
            NormSpec::Cone(c) => c.dim(),
        }
    }

    pub fn check_dim(&self, p: usize) -> Result<()> {
        match self {
            NormSpec::L1 => Ok(()),
            NormSpec::Group(part) if part.p() != p => Err(Error::Dimension(format!(
                "group partition covers {} coordinates, vector has {p}",
                part.p()
            ))),
            NormSpec::Group(_) => Ok(()),
            NormSpec::TrivialG(g) => match g.last() {
                Some(&j) if j >= p => Err(Error::Dimension(format!(
                    "G contains index {} but the vector has {p} entries",
                    j + 1
                ))),
                _ => Ok(()),
            },
            NormSpec::Cone(c) => c.validate(Some(p)),
        }
    }

    /// `Ω(e_j)`
    pub fn unit_value(&self, p: usize, j: usize) -> Result<f64> {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        norm_eval(self, &e)
    }
}

fn gather(idx: &[usize], v: &[f64]) -> Vec<f64> {
    idx.iter().map(|&j| v[j]).collect()
}

fn complement_of(g: &[usize], p: usize) -> Vec<usize> {
    (0..p).filter(|j| g.binary_search(j).is_err()).collect()
}

pub fn norm_eval(spec: &NormSpec, beta: &[f64]) -> Result<f64> {
    spec.check_dim(beta.len())?;
    Ok(match spec {
        NormSpec::L1 => numeric::norm1(beta),
        NormSpec::Group(part) => numeric::sum(
            part.groups()
                .iter()
                .map(|g| (g.len() as f64).sqrt() * numeric::norm2(&gather(g, beta))),
        ),
        NormSpec::TrivialG(g) => {
            let gc = complement_of(g, beta.len());
            (g.len() as f64).sqrt() * numeric::norm2(&gather(g, beta))
                + numeric::norm1(&gather(&gc, beta))
        }
        NormSpec::Cone(c) => cone::cone_norm_eval(c, beta)?.value,
    })
}

/// `Ω_*(w) = sup_{Ω(β) ≤ 1} |wᵀβ|`
pub fn dual_norm_eval(spec: &NormSpec, w: &[f64]) -> Result<f64> {
    spec.check_dim(w.len())?;
    Ok(match spec {
        NormSpec::L1 => numeric::norm_inf(w),
        NormSpec::Group(part) => part
            .groups()
            .iter()
            .map(|g| numeric::norm2(&gather(g, w)) / (g.len() as f64).sqrt())
            .fold(0.0, f64::max),
        NormSpec::TrivialG(g) => {
            let gc = complement_of(g, w.len());
            let head = if g.is_empty() {
                0.0
            } else {
                numeric::norm2(&gather(g, w)) / (g.len() as f64).sqrt()
            };
            head.max(numeric::norm_inf(&gather(&gc, w)))
        }
        NormSpec::Cone(c) => cone::cone_dual_eval(c, w)?,
    })
}

/// `argmin_z ½‖z − v‖₂² + t Ω(z)`
pub fn prox(spec: &NormSpec, v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "prox step must be positive, got {t}"
        )));
    }
    spec.check_dim(v.len())?;
    Ok(match spec {
        NormSpec::L1 => v.iter().map(|&x| cone::soft(x, t)).collect(),
        NormSpec::Group(part) => {
            let mut z = vec![0.0; v.len()];
            for g in part.groups() {
                block_shrink(g, v, t * (g.len() as f64).sqrt(), &mut z);
            }
            z
        }
        NormSpec::TrivialG(g) => {
            let mut z: Vec<f64> = v.iter().map(|&x| cone::soft(x, t)).collect();
            if !g.is_empty() {
                for &j in g {
                    z[j] = 0.0;
                }
                block_shrink(g, v, t * (g.len() as f64).sqrt(), &mut z);
            }
            z
        }
        NormSpec::Cone(c) => cone::cone_prox(c, v, t)?,
    })
}

fn block_shrink(g: &[usize], v: &[f64], thr: f64, z: &mut [f64]) {
    let nrm = numeric::norm2(&gather(g, v));
    if nrm > thr {
        let f = 1.0 - thr / nrm;
        for &j in g {
            z[j] = v[j] * f;
        }
    }
}

/// A subgradient `w ∈ ∂Ω(β)`: `Ω_*(w) ≤ 1` and `⟨w, β⟩ = Ω(β)`.
pub fn subgradient(spec: &NormSpec, beta: &[f64]) -> Result<Vec<f64>> {
    spec.check_dim(beta.len())?;
    let sign = |x: f64| if x == 0.0 { 0.0 } else { x.signum() };
    let block = |g: &[usize], out: &mut [f64]| {
        let nrm = numeric::norm2(&gather(g, beta));
        if nrm > 0.0 {
            let k = (g.len() as f64).sqrt();
            for &j in g {
                out[j] = k * beta[j] / nrm;
            }
        }
    };
    Ok(match spec {
        NormSpec::L1 => beta.iter().map(|&x| sign(x)).collect(),
        NormSpec::Group(part) => {
            let mut w = vec![0.0; beta.len()];
            for g in part.groups() {
                block(g, &mut w);
            }
            w
        }
        NormSpec::TrivialG(g) => {
            let mut w: Vec<f64> = beta.iter().map(|&x| sign(x)).collect();
            for &j in g {
                w[j] = 0.0;
            }
            block(g, &mut w);
            w
        }
        NormSpec::Cone(c) => cone::cone_subgradient(c, beta)?,
    })
}

/// Euclidean projection onto `{γ : Ω(γ) ≤ radius}`.
///
/// For any norm the projection is `prox_{τΩ}(v)` for the `τ ≥ 0` at which
/// the result lands on the sphere. `τ ↦ Ω(prox_{τΩ}(v))` is continuous and
/// nonincreasing on `[0, Ω_*(v)]`; the root is found by the Illinois
/// variant of regula falsi, keeping the feasible end.
pub fn project_ball(spec: &NormSpec, v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative radius {radius}")));
    }
    let nv = if v.is_empty() { 0.0 } else { norm_eval(spec, v)? };
    if nv <= radius {
        return Ok(v.to_vec());
    }
    if radius == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    if matches!(spec, NormSpec::L1) {
        return Ok(polytope::project_l1_ball(v, radius));
    }
    let (mut a, mut fa) = (0.0, nv - radius);
    let (mut b, mut fb) = (dual_norm_eval(spec, v)?, -radius);
    let mut best = vec![0.0; v.len()];
    let mut side = 0;
    for _ in 0..300 {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        if c <= a || c >= b {
            break;
        }
        let z = prox(spec, v, c)?;
        let fc = norm_eval(spec, &z)? - radius;
        if fc <= 0.0 {
            best = z;
            if fc >= -1e-13 * radius {
                break;
            }
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(best)
}

/// `Ω^{S^c}`: a norm on the `p − |S|` coordinates of `S^c` (in increasing
/// order of index).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualNorm {
    #[serde(serialize_with = "ser_set")]
    pub complement: IndexSet,
    pub norm: NormSpec,
}

fn ser_set<S: serde::Serializer>(s: &IndexSet, ser: S) -> std::result::Result<S::Ok, S::Error> {
    s.to_one_based().serialize(ser)
}

impl ResidualNorm {
    pub fn dim(&self) -> usize {
        self.complement.len()
    }

    /// `Ω^{S^c}(β_{S^c})` for a full-length `β`.
    pub fn eval_full(&self, beta: &[f64]) -> Result<f64> {
        self.eval(&self.complement.gather(beta))
    }

    /// `Ω^{S^c}(v)` for `v` of length `p − |S|`.
    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        if v.is_empty() {
            return Ok(0.0);
        }
        norm_eval(&self.norm, v)
    }

    pub fn dual(&self, w: &[f64]) -> Result<f64> {
        if w.is_empty() {
            return Ok(0.0);
        }
        dual_norm_eval(&self.norm, w)
    }

    pub fn dual_full(&self, w: &[f64]) -> Result<f64> {
        self.dual(&self.complement.gather(w))
    }

    pub fn project_ball(&self, v: &[f64], radius: f64) -> Result<Vec<f64>> {
        project_ball(&self.norm, v, radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllowedCertificate {
    pub allowed: bool,
    pub reason: String,
    /// β with `Ω(β) < Ω(β_S) + Ω^{S^c}(β_{S^c})` for the natural candidate
    /// restriction norm, or an element `a ∈ 𝒜` with `a_S ∉ 𝒜` for cones.
    pub counterexample: Option<Vec<f64>>,
}

/// Structural allowed-set test.
pub fn is_allowed_set(spec: &NormSpec, set: &IndexSet) -> AllowedCertificate {
    let p = set.p();
    let yes = |reason: &str| AllowedCertificate {
        allowed: true,
        reason: reason.to_string(),
        counterexample: None,
    };
    if let Err(e) = spec.check_dim(p) {
        return AllowedCertificate {
            allowed: false,
            reason: e.to_string(),
            counterexample: None,
        };
    }
    if set.is_empty() || set.len() == p {
        return yes("every norm is decomposable for the empty and the complete set");
    }
    match spec {
        NormSpec::L1 => yes("l1 is decomposable for every set"),
        NormSpec::Group(part) => {
            if part.is_union_of_groups(set) {
                yes("S is a union of groups")
            } else {
                // j ∈ G ∩ S and k ∈ G \ S for some group G
                let j = *set
                    .indices()
                    .iter()
                    .find(|&&j| part.groups()[part.group_of(j)].iter().any(|&k| !set.contains(k)))
                    .unwrap();
                let k = *part.groups()[part.group_of(j)]
                    .iter()
                    .find(|&&k| !set.contains(k))
                    .unwrap();
                let mut beta = vec![0.0; p];
                beta[j] = 1.0;
                beta[k] = 0.1;
                AllowedCertificate {
                    allowed: false,
                    reason: format!(
                        "S = {set} splits group {}",
                        part.group_of(j) + 1
                    ),
                    counterexample: Some(beta),
                }
            }
        }
        NormSpec::TrivialG(g) => {
            let inside = g.iter().filter(|&&j| set.contains(j)).count();
            if inside == g.len() || inside == 0 {
                yes("S contains G or is disjoint from it")
            } else {
                let j = *g.iter().find(|&&j| set.contains(j)).unwrap();
                let k = *g.iter().find(|&&k| !set.contains(k)).unwrap();
                let mut beta = vec![0.0; p];
                beta[j] = 1.0;
                beta[k] = 0.1;
                AllowedCertificate {
                    allowed: false,
                    reason: format!("S = {set} splits G"),
                    counterexample: Some(beta),
                }
            }
        }
        NormSpec::Cone(c) => match cone::allowed_violation(c, set) {
            None => yes("A_S is contained in A"),
            Some((reason, a)) => AllowedCertificate {
                allowed: false,
                reason,
                counterexample: a,
            },
        },
    }
}

pub fn residual_norm(spec: &NormSpec, set: &IndexSet) -> Result<ResidualNorm> {
    let cert = is_allowed_set(spec, set);
    if !cert.allowed {
        return Err(Error::NotAllowed {
            reason: cert.reason,
            counterexample: cert.counterexample,
        });
    }
    let complement = set.complement();
    let norm = if set.is_empty() {
        spec.clone()
    } else {
        match spec {
            NormSpec::L1 => NormSpec::L1,
            NormSpec::Group(part) => NormSpec::Group(part.restricted_to(&complement)),
            NormSpec::TrivialG(g) => {
                if g.iter().all(|&j| set.contains(j)) {
                    NormSpec::L1
                } else {
                    let g_set = IndexSet::new(set.p(), g.iter().copied())?;
                    let pos: Vec<usize> = complement
                        .indices()
                        .iter()
                        .enumerate()
                        .filter(|(_, j)| g_set.contains(**j))
                        .map(|(k, _)| k)
                        .collect();
                    NormSpec::TrivialG(pos)
                }
            }
            NormSpec::Cone(c) => NormSpec::Cone(cone::residual_cone(c, set)?),
        }
    };
    Ok(ResidualNorm { complement, norm })
}

/// `Ω(β) − Ω(β_S) − Ω^{S^c}(β_{S^c})`; nonnegative for allowed `S`.
pub fn weak_decomposability_slack(spec: &NormSpec, set: &IndexSet, beta: &[f64]) -> Result<f64> {
    let res = residual_norm(spec, set)?;
    let whole = norm_eval(spec, beta)?;
    let head = norm_eval(spec, &restrict(beta, set)?)?;
    let tail = res.eval_full(beta)?;
    Ok(whole - head - tail)
}

/// The penalty interface the estimators need.
pub trait Penalty: Sync {
    fn value(&self, beta: &[f64]) -> f64;
    fn dual(&self, w: &[f64]) -> f64;
    fn prox(&self, v: &[f64], t: f64) -> Vec<f64>;
    fn check_dim(&self, p: usize) -> Result<()>;
}

impl Penalty for NormSpec {
    fn value(&self, beta: &[f64]) -> f64 {
        norm_eval(self, beta).expect("dimension checked by caller")
    }

    fn dual(&self, w: &[f64]) -> f64 {
        dual_norm_eval(self, w).expect("dimension checked by caller")
    }

    fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        prox(self, v, t).expect("dimension checked by caller")
    }

    fn check_dim(&self, p: usize) -> Result<()> {
        NormSpec::check_dim(self, p)
    }
}
