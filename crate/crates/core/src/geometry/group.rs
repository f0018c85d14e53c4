use std::ops::{Add, AddAssign, Neg, Sub};

use serde::{Deserialize, Serialize};

/// An element of the abelian structure group (ℝⁿ, +): a fiber displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(Vec<f64>);

impl GroupElement {
    pub fn identity(n: usize) -> Self {
        GroupElement(vec![0.0; n])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        GroupElement(v)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute component difference.
    pub fn max_diff(&self, other: &GroupElement) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> GroupElement {
        GroupElement(self.0.iter().map(|x| x * s).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

impl From<Vec<f64>> for GroupElement {
    fn from(v: Vec<f64>) -> Self {
        GroupElement(v)
    }
}

impl std::ops::Index<usize> for GroupElement {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AddAssign<&GroupElement> for GroupElement {
    fn add_assign(&mut self, rhs: &GroupElement) {
        assert_eq!(self.0.len(), rhs.0.len(), "group dimension mismatch");
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl Add for &GroupElement {
    type Output = GroupElement;
    fn add(self, rhs: &GroupElement) -> GroupElement {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for GroupElement {
    type Output = GroupElement;
    fn add(mut self, rhs: GroupElement) -> GroupElement {
        self += &rhs;
        self
    }
}

impl Sub for &GroupElement {
    type Output = GroupElement;
    fn sub(self, rhs: &GroupElement) -> GroupElement {
        assert_eq!(self.0.len(), rhs.0.len(), "group dimension mismatch");
        GroupElement(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Sub for GroupElement {
    type Output = GroupElement;
    fn sub(self, rhs: GroupElement) -> GroupElement {
        &self - &rhs
    }
}

impl Neg for GroupElement {
    type Output = GroupElement;
    fn neg(self) -> GroupElement {
        GroupElement(self.0.into_iter().map(|x| -x).collect())
    }
}
