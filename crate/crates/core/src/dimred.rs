//! Dimension-by-dimension gradient factorization that maps every row of a
//! u × v dataset to a dense j-dimensional feature vector.
//!
//! Dimension `d` is trained on the residual left by dimensions `0..d`.
//! Each iteration takes one gradient step on all row features followed by
//! one on all column features. Steps are scaled by the inverse diagonal
//! curvature of the (regularized) squared loss, so `learning_rate == 1`
//! is an exact coordinate minimization and any rate in `(0, 2)` is stable.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ColKey, Missing, NumericDataset, PointId};
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SvdConfig<T> {
    /// Target dimensionality `j`.
    pub dims: usize,
    pub iters_per_dim: usize,
    pub learning_rate: T,
    pub regularization: T,
    pub seed: u64,
}

impl<T: Scalar> Default for SvdConfig<T> {
    fn default() -> Self {
        SvdConfig {
            dims: 3,
            iters_per_dim: 100,
            learning_rate: T::one(),
            regularization: T::of(0.02),
            seed: 0,
        }
    }
}

impl<T: Scalar> SvdConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Invalid("dims must be >= 1".into()));
        }
        if self.iters_per_dim == 0 {
            return Err(Error::Invalid("iters_per_dim must be >= 1".into()));
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::Invalid("learning_rate must be positive".into()));
        }
        if !(self.regularization >= T::zero()) || !self.regularization.is_finite() {
            return Err(Error::Invalid("regularization must be non-negative".into()));
        }
        Ok(())
    }
}

/// Row and column factors of a reduced dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    dims: usize,
    missing: Missing,
    regularization: T,
    rows: BTreeMap<PointId, Vec<T>>,
    cols: Vec<ColKey>,
    // v × j, row-major
    col_features: Vec<T>,
    // j × j Gram matrix of the column factors
    gram: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    fn new(
        dims: usize,
        missing: Missing,
        regularization: T,
        rows: BTreeMap<PointId, Vec<T>>,
        cols: Vec<ColKey>,
        col_features: Vec<T>,
    ) -> Self {
        let mut gram = vec![T::zero(); dims * dims];
        for c in 0..cols.len() {
            let f = &col_features[c * dims..(c + 1) * dims];
            for a in 0..dims {
                for b in 0..dims {
                    gram[a * dims + b] += f[a] * f[b];
                }
            }
        }
        FeatureMatrix {
            dims,
            missing,
            regularization,
            rows,
            cols,
            col_features,
            gram,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn missing(&self) -> Missing {
        self.missing
    }

    pub fn row(&self, id: PointId) -> Option<&[T]> {
        self.rows.get(&id).map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = (PointId, &[T])> + '_ {
        self.rows.iter().map(|(id, f)| (*id, f.as_slice()))
    }

    pub fn cols(&self) -> &[ColKey] {
        &self.cols
    }

    pub fn col(&self, c: usize) -> &[T] {
        &self.col_features[c * self.dims..(c + 1) * self.dims]
    }

    pub fn col_index(&self) -> BTreeMap<&ColKey, usize> {
        self.cols.iter().enumerate().map(|(i, c)| (c, i)).collect()
    }

    /// Reconstructed value of cell (row, col) from the factors.
    pub fn reconstruct(&self, id: PointId, c: usize) -> Option<T> {
        let row = self.row(id)?;
        Some(row.iter().zip(self.col(c)).map(|(a, b)| *a * *b).sum())
    }

    /// Projects a new row into the reduced space with the column factors
    /// held fixed, solving the per-dimension least-squares problem on the
    /// residual of the preceding dimensions.
    pub fn project(&self, entries: &[(usize, T)]) -> Vec<T> {
        let j = self.dims;
        let mut f = vec![T::zero(); j];
        for d in 0..j {
            let (num, den) = match self.missing {
                Missing::Unobserved => {
                    let mut num = T::zero();
                    let mut den = self.regularization;
                    for &(c, x) in entries {
                        let col = self.col(c);
                        let prev: T = (0..d).map(|k| f[k] * col[k]).sum();
                        num += (x - prev) * col[d];
                        den += col[d] * col[d];
                    }
                    (num, den)
                }
                Missing::Zero => {
                    let mut num = T::zero();
                    for &(c, x) in entries {
                        num += x * self.col(c)[d];
                    }
                    for (k, fk) in f.iter().enumerate().take(d) {
                        num -= *fk * self.gram[k * j + d];
                    }
                    (num, self.gram[d * j + d] + self.regularization)
                }
            };
            f[d] = if den > T::zero() { num / den } else { T::zero() };
        }
        f
    }

    pub fn set_row(&mut self, id: PointId, features: Vec<T>) {
        debug_assert_eq!(features.len(), self.dims);
        self.rows.insert(id, features);
    }

    pub fn remove_row(&mut self, id: PointId) -> Option<Vec<T>> {
        self.rows.remove(&id)
    }

    /// `point_id,f1,...,fj` inspection sidecar.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("point_id");
        for d in 1..=self.dims {
            let _ = write!(out, ",f{d}");
        }
        out.push('\n');
        for (id, f) in &self.rows {
            let _ = write!(out, "{id}");
            for v in f {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Lossless text persistence of the full factor state.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let missing = match self.missing {
            Missing::Unobserved => "unobserved",
            Missing::Zero => "zero",
        };
        let _ = writeln!(out, "features v1");
        let _ = writeln!(
            out,
            "dims {} missing {} reg {} rows {} cols {}",
            self.dims,
            missing,
            self.regularization,
            self.rows.len(),
            self.cols.len()
        );
        for (id, f) in &self.rows {
            let _ = write!(out, "r\t{id}");
            for v in f {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        for (c, key) in self.cols.iter().enumerate() {
            match key {
                ColKey::Item(i) => {
                    let _ = write!(out, "i\t{i}");
                }
                ColKey::Term(t) => {
                    let _ = write!(out, "t\t{t}");
                }
            }
            for v in self.col(c) {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::Invalid(format!("features line {line}: {why}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, "features v1")) => {}
            _ => return Err(bad(1, "missing `features v1` header")),
        }
        let (_, header) = lines.next().ok_or_else(|| bad(2, "missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 10 || h[0] != "dims" || h[2] != "missing" || h[4] != "reg" {
            return Err(bad(2, "malformed header"));
        }
        let dims: usize = h[1].parse().map_err(|_| bad(2, "dims"))?;
        let missing = match h[3] {
            "unobserved" => Missing::Unobserved,
            "zero" => Missing::Zero,
            _ => return Err(bad(2, "missing policy")),
        };
        let reg: T = h[5].parse().map_err(|_| bad(2, "reg"))?;
        let n_rows: usize = h[7].parse().map_err(|_| bad(2, "rows"))?;
        let n_cols: usize = h[9].parse().map_err(|_| bad(2, "cols"))?;
        let mut rows = BTreeMap::new();
        let mut cols = Vec::with_capacity(n_cols);
        let mut col_features = Vec::with_capacity(n_cols * dims);
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != dims + 2 {
                return Err(bad(lineno, "wrong field count"));
            }
            let values = fields[2..]
                .iter()
                .map(|v| v.parse::<T>().map_err(|_| bad(lineno, "feature value")))
                .collect::<Result<Vec<T>>>()?;
            match fields[0] {
                "r" => {
                    let id: PointId = fields[1].parse().map_err(|_| bad(lineno, "row id"))?;
                    rows.insert(id, values);
                }
                "i" => {
                    cols.push(ColKey::Item(fields[1].parse().map_err(|_| bad(lineno, "item"))?));
                    col_features.extend(values);
                }
                "t" => {
                    cols.push(ColKey::Term(fields[1].to_owned()));
                    col_features.extend(values);
                }
                _ => return Err(bad(lineno, "unknown record kind")),
            }
        }
        if rows.len() != n_rows || cols.len() != n_cols {
            return Err(Error::Invalid("features: record counts do not match header".into()));
        }
        Ok(FeatureMatrix::new(dims, missing, reg, rows, cols, col_features))
    }
}

/// Reduces `data` to `cfg.dims` dimensions.
pub fn reduce<T: Scalar>(data: &NumericDataset<T>, cfg: &SvdConfig<T>) -> Result<FeatureMatrix<T>> {
    cfg.validate()?;
    let (u, v) = data.shape();
    if data.entries.iter().flatten().all(|(_, x)| x.is_zero()) {
        return Err(Error::Invalid("cannot reduce an empty or all-zero dataset".into()));
    }
    if data.entries.iter().flatten().any(|(_, x)| !x.is_finite()) {
        return Err(Error::Invalid("dataset contains non-finite values".into()));
    }
    let j = cfg.dims;
    let lr = cfg.learning_rate;
    let reg = cfg.regularization;

    // CSR over rows plus a column-major view referencing the same entries.
    let mut row_start = Vec::with_capacity(u + 1);
    let mut col_of = Vec::new();
    let mut vals = Vec::new();
    row_start.push(0);
    for row in &data.entries {
        for &(c, x) in row {
            col_of.push(c);
            vals.push(x);
        }
        row_start.push(col_of.len());
    }
    let nnz = vals.len();
    let mut row_of = vec![0usize; nnz];
    for r in 0..u {
        row_of[row_start[r]..row_start[r + 1]].fill(r);
    }
    let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); v];
    for e in 0..nnz {
        by_col[col_of[e]].push(e);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = |rng: &mut ChaCha8Rng| T::of(0.1 + rng.random_range(-0.01..0.01));

    // Dimension-major factor storage: rf[d][r], cf[d][c].
    let mut rf: Vec<Vec<T>> = Vec::with_capacity(j);
    let mut cf: Vec<Vec<T>> = Vec::with_capacity(j);
    // Prediction of dimensions < d on each observed entry.
    let mut prev = vec![T::zero(); nnz];

    for d in 0..j {
        let mut row_d: Vec<T> = (0..u).map(|_| init(&mut rng)).collect();
        let mut col_d: Vec<T> = (0..v).map(|_| init(&mut rng)).collect();

        for _ in 0..cfg.iters_per_dim {
            match data.missing {
                Missing::Unobserved => {
                    for r in 0..u {
                        let mut num = T::zero();
                        let mut curv = reg;
                        for e in row_start[r]..row_start[r + 1] {
                            let c = col_of[e];
                            num += (vals[e] - prev[e]) * col_d[c];
                            curv += col_d[c] * col_d[c];
                        }
                        if curv > T::zero() {
                            let grad = num - curv * row_d[r];
                            row_d[r] += lr * grad / curv;
                        }
                    }
                    for c in 0..v {
                        let mut num = T::zero();
                        let mut curv = reg;
                        for &e in &by_col[c] {
                            let r = row_of[e];
                            num += (vals[e] - prev[e]) * row_d[r];
                            curv += row_d[r] * row_d[r];
                        }
                        if curv > T::zero() {
                            let grad = num - curv * col_d[c];
                            col_d[c] += lr * grad / curv;
                        }
                    }
                }
                Missing::Zero => {
                    // Residual products expand into sparse data terms minus
                    // the cross terms of earlier dimensions.
                    let col_cross: Vec<T> = (0..d)
                        .map(|k| cf[k].iter().zip(&col_d).map(|(a, b)| *a * *b).sum())
                        .collect();
                    let curv = col_d.iter().map(|x| *x * *x).sum::<T>() + reg;
                    if curv > T::zero() {
                        for r in 0..u {
                            let mut num = T::zero();
                            for e in row_start[r]..row_start[r + 1] {
                                num += vals[e] * col_d[col_of[e]];
                            }
                            for k in 0..d {
                                num -= rf[k][r] * col_cross[k];
                            }
                            let grad = num - curv * row_d[r];
                            row_d[r] += lr * grad / curv;
                        }
                    }
                    let row_cross: Vec<T> = (0..d)
                        .map(|k| rf[k].iter().zip(&row_d).map(|(a, b)| *a * *b).sum())
                        .collect();
                    let curv = row_d.iter().map(|x| *x * *x).sum::<T>() + reg;
                    if curv > T::zero() {
                        for c in 0..v {
                            let mut num = T::zero();
                            for &e in &by_col[c] {
                                num += vals[e] * row_d[row_of[e]];
                            }
                            for k in 0..d {
                                num -= cf[k][c] * row_cross[k];
                            }
                            let grad = num - curv * col_d[c];
                            col_d[c] += lr * grad / curv;
                        }
                    }
                }
            }
            if row_d.iter().chain(&col_d).any(|x| !x.is_finite()) {
                return Err(Error::Diverged { dim: d });
            }
        }

        if data.missing == Missing::Unobserved {
            for e in 0..nnz {
                prev[e] += row_d[row_of[e]] * col_d[col_of[e]];
            }
        }
        rf.push(row_d);
        cf.push(col_d);
    }

    let rows = data
        .rows
        .iter()
        .enumerate()
        .map(|(r, id)| (*id, (0..j).map(|d| rf[d][r]).collect()))
        .collect();
    let mut col_features = Vec::with_capacity(v * j);
    for c in 0..v {
        col_features.extend(cf.iter().map(|col| col[c]));
    }
    Ok(FeatureMatrix::new(
        j,
        data.missing,
        reg,
        rows,
        data.cols.clone(),
        col_features,
    ))
}
