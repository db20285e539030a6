use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::features::{fit_minmax_scaler, FeatureScaler};
use crate::scalar::{parse_scalar, Scalar};

/// k-nearest-neighbors classifier over min-max scaled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel<T> {
    k: usize,
    n_classes: usize,
    rows: Vec<Vec<T>>,
    labels: Vec<usize>,
    scaler: FeatureScaler<T>,
}

/// Fits the scaler on `rows` and stores the scaled rows.
pub fn knn_fit<T: Scalar>(
    rows: &[Vec<T>],
    labels: &[usize],
    n_classes: usize,
    k: usize,
) -> Result<KnnModel<T>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput(
            "kNN needs at least one training row".into(),
        ));
    }
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            found: labels.len(),
        });
    }
    if k == 0 || k > rows.len() {
        return Err(Error::Config(format!(
            "k = {k} must be in 1..={}",
            rows.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Config(format!(
            "label index {bad} outside {n_classes} classes"
        )));
    }
    let scaler = fit_minmax_scaler(rows)?;
    Ok(KnnModel {
        k,
        n_classes,
        rows: scaler.apply_all(rows)?,
        labels: labels.to_vec(),
        scaler,
    })
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, v| acc + v)
        .sqrt()
}

impl<T: Scalar> KnnModel<T> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn scaler(&self) -> &FeatureScaler<T> {
        &self.scaler
    }

    /// Training-row indices of the k nearest rows, nearest first. Equal
    /// distances are ordered by training-row index.
    pub fn neighbors(&self, row: &[T]) -> Result<Vec<usize>> {
        let query = self.scaler.apply(row)?;
        let mut best: Vec<(T, usize)> = Vec::with_capacity(self.k + 1);
        for (i, r) in self.rows.iter().enumerate() {
            let d = euclidean(&query, r);
            if best.len() == self.k {
                let worst = best[self.k - 1].0;
                if d.partial_cmp(&worst) != Some(Ordering::Less) {
                    continue;
                }
                best.pop();
            }
            // Rows arrive in index order, so placing after equal distances
            // keeps the lower index first.
            let at = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(at, (d, i));
        }
        Ok(best.into_iter().map(|(_, i)| i).collect())
    }

    /// Fraction of the k neighbors carrying each class.
    pub fn predict_proba(&self, row: &[T]) -> Result<Vec<T>> {
        let mut probs = vec![T::zero(); self.n_classes];
        let share = T::one() / T::of(self.k as f64);
        for i in self.neighbors(row)? {
            probs[self.labels[i]] = probs[self.labels[i]] + share;
        }
        Ok(probs)
    }

    /// Text form: header, scaler, then `label<TAB>values` per stored row.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "egoact-knn 1\nk {}\nclasses {}\nrows {}\n{}",
            self.k,
            self.n_classes,
            self.rows.len(),
            self.scaler.to_text()
        );
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let _ = write!(out, "{label}");
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("knn model: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some("egoact-knn 1") {
            return Err(bad("unsupported header"));
        }
        let mut field = |name: &str| -> Result<usize> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(name))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(&format!("missing `{name}`")))
        };
        let k = field("k ")?;
        let n_classes = field("classes ")?;
        let n = field("rows ")?;
        let scaler_text: String = lines.by_ref().take(2).map(|l| format!("{l}\n")).collect();
        let scaler = FeatureScaler::from_text(&scaler_text)?;
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for line in lines.filter(|l| !l.is_empty()) {
            let mut parts = line.split('\t');
            let label: usize = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| bad("bad label"))?;
            let row: Vec<T> = parts
                .map(parse_scalar)
                .collect::<Option<_>>()
                .ok_or_else(|| bad("bad value"))?;
            if row.len() != scaler.dim() || label >= n_classes {
                return Err(bad("row does not match header"));
            }
            rows.push(row);
            labels.push(label);
        }
        if rows.len() != n || k == 0 || k > n {
            return Err(bad("row count does not match header"));
        }
        Ok(Self {
            k,
            n_classes,
            rows,
            labels,
            scaler,
        })
    }
}
