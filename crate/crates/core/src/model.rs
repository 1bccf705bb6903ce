//! Basic data model: design matrices, index sets, the normalized norm
//! `‖v‖_n = √(vᵀv/n)`, CSV ingestion and seeded Gaussian noise.
//!
//! Index sets are 0-based internally. Everything user facing (JSON, CLI,
//! `Display`) is 1-based.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// Dense `n × p` design matrix stored column major.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Builds from column-major storage.
    pub fn from_col_major(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!(
                "design matrix must be at least 1x1, got {n}x{p}"
            )));
        }
        if data.len() != n * p {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {n}x{p} matrix, got {}",
                n * p,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at row {}, column {}",
                k % n + 1,
                k / n + 1
            )));
        }
        Ok(Self { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Parse {
                    row: i + 1,
                    col: r.len().min(p) + 1,
                    msg: format!("ragged row: expected {p} cells, found {}", r.len()),
                });
            }
        }
        let mut data = vec![0.0; n * p];
        for (i, r) in rows.iter().enumerate() {
            for (j, &x) in r.iter().enumerate() {
                data[j * n + i] = x;
            }
        }
        Self::from_col_major(n, p, data)
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("columns of unequal length".into()));
        }
        Self::from_col_major(n, p, cols.concat())
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        Self::from_col_major(m.nrows(), m.ncols(), m.as_slice().to_vec())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.p, &self.data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    /// `Xβ`
    pub fn mul(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.p, "coefficient length");
        let mut acc = vec![numeric::Accumulator::default(); self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            for (a, x) in acc.iter_mut().zip(self.column(j)) {
                a.add(x * b);
            }
        }
        acc.iter().map(numeric::Accumulator::value).collect()
    }

    /// `Xᵀv`
    pub fn tmul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length");
        (0..self.p).map(|j| numeric::dot(self.column(j), v)).collect()
    }

    /// Submatrix with the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DesignMatrix {
        let mut data = Vec::with_capacity(self.n * cols.len());
        for &j in cols {
            data.extend_from_slice(self.column(j));
        }
        DesignMatrix {
            n: self.n,
            p: cols.len(),
            data,
        }
    }

    pub fn scaled(&self, c: f64) -> DesignMatrix {
        DesignMatrix {
            n: self.n,
            p: self.p,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// Largest singular value, by power iteration on `XᵀX`.
    pub fn op_norm_estimate(&self, iterations: usize) -> f64 {
        let mut v = vec![1.0 / (self.p as f64).sqrt(); self.p];
        let mut sigma2 = 0.0;
        for _ in 0..iterations.max(1) {
            let w = self.tmul(&self.mul(&v));
            let nw = numeric::norm2(&w);
            if nw == 0.0 {
                return 0.0;
            }
            sigma2 = nw;
            v = numeric::scale(&w, 1.0 / nw);
        }
        sigma2.sqrt()
    }
}

/// Sorted, duplicate-free subset of `{0, …, p-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexSet {
    p: usize,
    idx: Vec<usize>,
}

impl IndexSet {
    pub fn new(p: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut idx: Vec<usize> = indices.into_iter().collect();
        if let Some(&bad) = idx.iter().find(|&&j| j >= p) {
            return Err(Error::IndexOutOfRange { index: bad + 1, p });
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(Self { p, idx })
    }

    /// From 1-based user indices.
    pub fn from_one_based(p: usize, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j == 0 || j > p) {
            return Err(Error::IndexOutOfRange { index: bad, p });
        }
        Self::new(p, indices.iter().map(|j| j - 1))
    }

    pub fn empty(p: usize) -> Self {
        Self { p, idx: Vec::new() }
    }

    pub fn full(p: usize) -> Self {
        Self {
            p,
            idx: (0..p).collect(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.idx.iter().map(|j| j + 1).collect()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.idx.binary_search(&j).is_ok()
    }

    pub fn is_superset_of(&self, other: &IndexSet) -> bool {
        other.idx.iter().all(|&j| self.contains(j))
    }

    pub fn complement(&self) -> IndexSet {
        IndexSet {
            p: self.p,
            idx: (0..self.p).filter(|&j| !self.contains(j)).collect(),
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut idx = self.idx.clone();
        idx.extend_from_slice(&other.idx);
        idx.sort_unstable();
        idx.dedup();
        IndexSet { p: self.p, idx }
    }

    /// `β_j` for `j` in the set, as a vector of length `|S|`.
    pub fn gather(&self, beta: &[f64]) -> Vec<f64> {
        self.idx.iter().map(|&j| beta[j]).collect()
    }

    /// Embeds a vector of length `|S|` into `ℝ^p`, zero elsewhere.
    pub fn scatter(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.idx.len());
        let mut out = vec![0.0; self.p];
        for (&j, &v) in self.idx.iter().zip(values) {
            out[j] = v;
        }
        out
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.idx.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "}}")
    }
}

/// `‖v‖_n = √(vᵀv/n)`.
pub fn normalized_norm(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Dimension("normalized norm of an empty vector".into()));
    }
    Ok(numeric::norm2(v) / (v.len() as f64).sqrt())
}

/// `β_S`: keeps the entries in `S`, zeroes the rest.
pub fn restrict(beta: &[f64], set: &IndexSet) -> Result<Vec<f64>> {
    if beta.len() != set.p() {
        return Err(Error::Dimension(format!(
            "vector of length {} restricted by a set over {} indices",
            beta.len(),
            set.p()
        )));
    }
    let mut out = vec![0.0; beta.len()];
    for &j in set.indices() {
        out[j] = beta[j];
    }
    Ok(out)
}

/// Exact support `{j : β_j ≠ 0}`.
pub fn support(beta: &[f64]) -> IndexSet {
    support_above(beta, 0.0)
}

/// `{j : |β_j| > threshold}`.
pub fn support_above(beta: &[f64], threshold: f64) -> IndexSet {
    IndexSet {
        p: beta.len(),
        idx: (0..beta.len())
            .filter(|&j| beta[j].abs() > threshold)
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
}

/// Headerless, comma separated, one observation per row.
pub fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            col: 1,
            msg: e.to_string(),
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, cell) in rec.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| Error::Parse {
                row: i + 1,
                col: j + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    row: i + 1,
                    col: j + 1,
                    msg: format!("non-finite value: {cell:?}"),
                });
            }
            row.push(x);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_matrix(text: &str) -> Result<DesignMatrix> {
    let rows = parse_csv_rows(text)?;
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: "empty matrix".into(),
        });
    }
    DesignMatrix::from_rows(&rows)
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DesignMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        MatrixFormat::Csv => parse_matrix(&text),
    }
}

/// Reads a response vector: either one value per row or a single row.
pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = parse_csv_rows(&text)?;
    if rows.len() == 1 {
        return Ok(rows.into_iter().next().unwrap());
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() == 1 {
                Ok(r[0])
            } else {
                Err(Error::Parse {
                    row: i + 1,
                    col: 2,
                    msg: "vector file must have one value per row".into(),
                })
            }
        })
        .collect()
}

/// Writes a matrix in the same CSV dialect `load_matrix` reads.
pub fn matrix_to_csv(x: &DesignMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.n() {
        let row: Vec<String> = (0..x.p()).map(|j| format!("{:e}", x.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default = "default_distribution")]
    pub distribution: NoiseDistribution,
    pub sigma: f64,
    pub seed: u64,
}

fn default_distribution() -> NoiseDistribution {
    NoiseDistribution::Gaussian
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            distribution: NoiseDistribution::Gaussian,
            sigma,
            seed,
        }
    }
}

pub fn draw_noise(model: &NoiseModel, n: usize) -> Result<Vec<f64>> {
    if !(model.sigma >= 0.0) || !model.sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be finite and nonnegative, got {}",
            model.sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    Ok(match model.distribution {
        NoiseDistribution::Gaussian => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                model.sigma * z
            })
            .collect(),
    })
}

/// Gaussian design whose rows have Toeplitz covariance `ρ^|j-k|`.
pub fn gaussian_design(n: usize, p: usize, rho: f64, seed: u64) -> Result<DesignMatrix> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "correlation must lie in (-1, 1), got {rho}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innov = (1.0 - rho * rho).sqrt();
    let mut data = vec![0.0; n * p];
    for i in 0..n {
        // AR(1) across columns gives the Toeplitz correlation exactly.
        let mut prev = 0.0;
        for j in 0..p {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = if j == 0 { z } else { rho * prev + innov * z };
            data[j * n + i] = x;
            prev = x;
        }
    }
    DesignMatrix::from_col_major(n, p, data)
}

/// Design with orthogonal columns and `‖X_j‖_n = 1` (requires `n ≥ p`).
pub fn orthonormal_design(n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    if n < p {
        return Err(Error::Dimension(format!(
            "orthonormal design needs n >= p, got n={n}, p={p}"
        )));
    }
    let g = gaussian_design(n, p, 0.0, seed)?.to_nalgebra();
    let q = g.qr().q();
    let q = q.columns(0, p).into_owned() * (n as f64).sqrt();
    DesignMatrix::from_nalgebra(&q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_norm_examples() {
        assert_eq!(normalized_norm(&[0.0; 5]).unwrap(), 0.0);
        assert_eq!(normalized_norm(&[1.0; 4]).unwrap(), 1.0);
        let n = 2.0_f64;
        assert!((normalized_norm(&[n.sqrt(), 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(normalized_norm(&[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn restrict_examples() {
        let s = IndexSet::from_one_based(3, &[1, 3]).unwrap();
        assert_eq!(restrict(&[1.0, 2.0, 3.0], &s).unwrap(), vec![1.0, 0.0, 3.0]);
        let b = [0.5, -2.0, 7.0];
        assert_eq!(restrict(&b, &IndexSet::full(3)).unwrap(), b.to_vec());
        assert_eq!(restrict(&b, &IndexSet::empty(3)).unwrap(), vec![0.0; 3]);
        assert!(restrict(&b, &IndexSet::empty(4)).is_err());
        assert!(matches!(
            IndexSet::from_one_based(3, &[4]),
            Err(Error::IndexOutOfRange { index: 4, p: 3 })
        ));
    }

    #[test]
    fn support_examples() {
        assert_eq!(support(&[0.0, 5.0, 0.0]).to_one_based(), vec![2]);
        assert!(support(&[0.0; 3]).is_empty());
        assert_eq!(support(&[1e-300, 0.0, 1.0]).to_one_based(), vec![1, 3]);
        assert_eq!(support_above(&[1e-300, 0.0, 1.0], 1e-12).to_one_based(), vec![3]);
    }

    #[test]
    fn csv_parse_errors_carry_location() {
        match parse_matrix("1,2\n3,x\n") {
            Err(Error::Parse { row: 2, col: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_matrix("1,2\n3\n") {
            Err(Error::Parse { row: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let x = parse_matrix("1, 2.5\n-3e-2,4\n").unwrap();
        assert_eq!((x.n(), x.p()), (2, 2));
        assert_eq!(x.get(1, 0), -3e-2);
        assert_eq!(x.column(1), &[2.5, 4.0]);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let x = gaussian_design(4, 3, 0.3, 9).unwrap();
        let y = parse_matrix(&matrix_to_csv(&x)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn orthonormal_design_is_orthonormal() {
        let x = orthonormal_design(7, 4, 1).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let g = numeric::dot(x.column(j), x.column(k)) / 7.0;
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let m = NoiseModel::gaussian(2.0, 42);
        let a = draw_noise(&m, 100).unwrap();
        let b = draw_noise(&m, 100).unwrap();
        assert_eq!(a, b);
        let c = draw_noise(&NoiseModel::gaussian(2.0, 43), 100).unwrap();
        assert_ne!(a, c);
        assert!(draw_noise(&NoiseModel::gaussian(-1.0, 0), 3).is_err());
    }
}
