use crate::error::{Error, Result};
use crate::scalar::{parse_scalar, Scalar};

/// Per-dimension min/max learned from training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler<T> {
    mins: Vec<T>,
    maxs: Vec<T>,
}

pub fn fit_minmax_scaler<T: Scalar, R: AsRef<[T]>>(rows: &[R]) -> Result<FeatureScaler<T>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::EmptyInput("cannot fit a scaler on zero rows".into()))?
        .as_ref();
    let mut mins = first.to_vec();
    let mut maxs = first.to_vec();
    for row in rows {
        let row = row.as_ref();
        if row.len() != mins.len() {
            return Err(Error::Dimension {
                expected: mins.len(),
                found: row.len(),
            });
        }
        for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row) {
            if v < *lo {
                *lo = v;
            }
            if v > *hi {
                *hi = v;
            }
        }
    }
    Ok(FeatureScaler { mins, maxs })
}

impl<T: Scalar> FeatureScaler<T> {
    pub fn from_bounds(mins: Vec<T>, maxs: Vec<T>) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::Dimension {
                expected: mins.len(),
                found: maxs.len(),
            });
        }
        if mins.iter().zip(&maxs).any(|(lo, hi)| !(hi >= lo)) {
            return Err(Error::Config("scaler max below min".into()));
        }
        Ok(Self { mins, maxs })
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[T] {
        &self.mins
    }

    pub fn maxs(&self) -> &[T] {
        &self.maxs
    }

    /// Maps each value to `(v - min) / (max - min)` clipped to `[0, 1]`;
    /// constant dimensions map to 0.
    pub fn apply(&self, row: &[T]) -> Result<Vec<T>> {
        if row.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).max(T::zero()).min(T::one())
                } else {
                    T::zero()
                }
            })
            .collect())
    }

    pub fn apply_all<R: AsRef<[T]>>(&self, rows: &[R]) -> Result<Vec<Vec<T>>> {
        rows.iter().map(|r| self.apply(r.as_ref())).collect()
    }

    /// Two lines, `min` and `max`, each followed by tab-separated values.
    pub fn to_text(&self) -> String {
        let join = |v: &[T]| v.iter().map(|x| format!("\t{x}")).collect::<String>();
        format!("min{}\nmax{}\n", join(&self.mins), join(&self.maxs))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut mins = None;
        let mut maxs = None;
        for line in text.lines().filter(|l| !l.is_empty()) {
            let mut parts = line.split('\t');
            let tag = parts.next().unwrap_or_default();
            let values = parts
                .map(|p| {
                    parse_scalar::<T>(p)
                        .ok_or_else(|| Error::Config(format!("bad scaler value `{p}`")))
                })
                .collect::<Result<Vec<T>>>()?;
            match tag {
                "min" => mins = Some(values),
                "max" => maxs = Some(values),
                other => return Err(Error::Config(format!("unexpected scaler line `{other}`"))),
            }
        }
        match (mins, maxs) {
            (Some(lo), Some(hi)) => Self::from_bounds(lo, hi),
            _ => Err(Error::Config("scaler needs `min` and `max` lines".into())),
        }
    }
}
