//! Classic equal-weight ensembles, late fusion and label alignment.

mod late;

pub use late::{late_fusion_fit, LateFusionModel};

use crate::dataset::ActivityLabelSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Elementwise mean of two distributions.
pub fn classic_combine<T: Scalar>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    let half = T::of(0.5);
    Ok(a.iter().zip(b).map(|(&x, &y)| (x + y) * half).collect())
}

/// Name-based mapping from a source label set into a target label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlignment {
    /// For each source class, its index in the target set if the name exists there.
    pub source_to_target: Vec<Option<usize>>,
    /// Target classes with no source counterpart.
    pub novel: Vec<usize>,
}

pub fn align_labels(source: &ActivityLabelSet, target: &ActivityLabelSet) -> LabelAlignment {
    LabelAlignment {
        source_to_target: source.names().iter().map(|n| target.index_of(n)).collect(),
        novel: (0..target.len())
            .filter(|&i| !source.contains(target.name(i)))
            .collect(),
    }
}

/// Source labels followed by the target's novel labels, in target order.
/// A model trained on `source` keeps its class indices in this set.
pub fn union_label_set(source: &ActivityLabelSet, target: &ActivityLabelSet) -> ActivityLabelSet {
    let names = source
        .names()
        .iter()
        .chain(target.names().iter().filter(|n| !source.contains(n)))
        .cloned();
    ActivityLabelSet::new(names).expect("names of two valid label sets, deduplicated")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_examples() {
        assert_eq!(
            classic_combine(&[0.8, 0.2], &[0.4, 0.6]).unwrap(),
            vec![0.6000000000000001, 0.4]
        );
        let p = [0.1, 0.3, 0.6];
        assert_eq!(classic_combine(&p, &p).unwrap(), p.to_vec());
        assert_eq!(
            classic_combine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(classic_combine(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn walking_is_novel() {
        let base = ActivityLabelSet::daily_activities();
        let volunteer = ActivityLabelSet::new(["Working", "Eating", "Walking"]).unwrap();
        let a = align_labels(&base, &volunteer);
        assert_eq!(a.novel, vec![2]);
        assert_eq!(
            a.source_to_target[base.index_of("Working").unwrap()],
            Some(0)
        );
        assert_eq!(a.source_to_target[base.index_of("Chores").unwrap()], None);
        let union = union_label_set(&base, &volunteer);
        assert_eq!(union.len(), 20);
        assert_eq!(union.name(19), "Walking");
        assert_eq!(union.name(0), base.name(0));
    }

    #[test]
    fn identical_and_disjoint_sets() {
        let s = ActivityLabelSet::new(["A", "B"]).unwrap();
        let a = align_labels(&s, &s);
        assert_eq!(a.source_to_target, vec![Some(0), Some(1)]);
        assert!(a.novel.is_empty());
        let t = ActivityLabelSet::new(["C", "D"]).unwrap();
        let a = align_labels(&s, &t);
        assert_eq!(a.source_to_target, vec![None, None]);
        assert_eq!(a.novel, vec![0, 1]);
    }
}
