//! From-scratch tabular classifiers that emit class-probability vectors.

mod forest;
mod knn;

pub use forest::{argmax, forest_fit, gini, ForestConfig, RandomForest, Tree, TreeNode};
pub use knn::{knn_fit, KnnModel};
