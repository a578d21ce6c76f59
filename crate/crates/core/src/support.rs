//! Index sets over coefficient positions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sorted set of distinct zero-based coefficient indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Support(Vec<usize>);

impl Support {
    pub fn empty() -> Self {
        Support(Vec::new())
    }

    /// Builds a support from arbitrary indices; duplicates are collapsed.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Support(indices)
    }

    pub fn range(start: usize, end: usize) -> Self {
        Support((start..end).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Position of `j` inside the support, if present.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.0.binary_search(&j).ok()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// `{0..p} \ self`.
    pub fn complement(&self, p: usize) -> Support {
        let mut out = Vec::with_capacity(p.saturating_sub(self.len()));
        let mut it = self.0.iter().peekable();
        for j in 0..p {
            if it.peek() == Some(&&j) {
                it.next();
            } else {
                out.push(j);
            }
        }
        Support(out)
    }

    pub fn union(&self, other: &Support) -> Support {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Support::new(v)
    }

    pub fn intersection(&self, other: &Support) -> Support {
        Support(self.iter().filter(|&j| other.contains(j)).collect())
    }

    pub fn is_disjoint(&self, other: &Support) -> bool {
        self.iter().all(|j| !other.contains(j))
    }

    pub fn is_subset(&self, other: &Support) -> bool {
        self.iter().all(|j| other.contains(j))
    }

    pub(crate) fn check_within(&self, p: usize, what: &str) -> Result<()> {
        match self.max() {
            Some(m) if m >= p => Err(Error::InvalidArgument(format!(
                "{what} contains index {m} but only {p} coefficients exist"
            ))),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for Support {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Support::new(iter.into_iter().collect())
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

/// Strong (`s1`), weak (`s2`) and sparse (`s3`) index sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetPartition {
    pub s1: Support,
    pub s2: Support,
    pub s3: Support,
}

impl SubsetPartition {
    pub fn new(s1: Support, s2: Support, s3: Support) -> Result<Self> {
        let part = SubsetPartition { s1, s2, s3 };
        if !part.is_disjoint() {
            return Err(Error::InvalidArgument(
                "subset partition blocks overlap".into(),
            ));
        }
        Ok(part)
    }

    pub fn is_disjoint(&self) -> bool {
        self.s1.is_disjoint(&self.s2) && self.s1.is_disjoint(&self.s3) && self.s2.is_disjoint(&self.s3)
    }

    /// True when the three blocks are disjoint and cover `{0..p}` exactly.
    pub fn covers(&self, p: usize) -> bool {
        self.is_disjoint()
            && self.s1.len() + self.s2.len() + self.s3.len() == p
            && [&self.s1, &self.s2, &self.s3]
                .iter()
                .all(|s| s.max().is_none_or(|m| m < p))
    }

    /// `Ŝ₃ᶜ = Ŝ₁ ∪ Ŝ₂`.
    pub fn non_sparse(&self) -> Support {
        self.s1.union(&self.s2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_and_union() {
        let s = Support::new(vec![3, 1, 1]);
        assert_eq!(s.indices(), &[1, 3]);
        assert_eq!(s.complement(5).indices(), &[0, 2, 4]);
        assert_eq!(s.union(&s.complement(5)), Support::range(0, 5));
        assert!(s.is_disjoint(&s.complement(5)));
        assert_eq!(s.position(3), Some(1));
        assert_eq!(s.to_string(), "{1,3}");
    }

    #[test]
    fn partition_rejects_overlap() {
        let err = SubsetPartition::new(Support::new(vec![0]), Support::new(vec![0, 1]), Support::empty());
        assert!(err.is_err());
        let ok = SubsetPartition::new(Support::new(vec![0]), Support::new(vec![1]), Support::new(vec![2]))
            .unwrap();
        assert!(ok.covers(3));
        assert!(!ok.covers(4));
    }
}
