use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Bijection between the labels of one categorical variable and `0..D`.
///
/// Labels are kept in lexicographic order, so the index of a label does not
/// depend on the order in which observations were seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMap {
    variable: String,
    categories: Vec<String>,
}

impl CategoryMap {
    pub fn from_labels<I, S>(variable: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut categories: Vec<String> = labels.into_iter().map(Into::into).collect();
        categories.sort();
        categories.dedup();
        Self {
            variable: variable.into(),
            categories,
        }
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.categories
            .binary_search_by(|c| c.as_str().cmp(label))
            .ok()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.categories[index]
    }
}
