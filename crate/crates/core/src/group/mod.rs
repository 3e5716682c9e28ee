//! Arithmetic for the supported group families.
//!
//! Every element is kept in a canonical form so that structural equality,
//! hashing and ordering agree with group equality:
//!
//! * lattice `Z^d`: an integer vector;
//! * free group `F_s`: a freely reduced word, letter `k` is `a_k` and `-k` is `a_k^{-1}`;
//! * lamplighter over `Z^d`: walker position plus the ordered set of lit lamps;
//! * direct product: a pair of components (nested products are not flattened).

mod ball;
mod text;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ball::Ball;

/// Maximum nesting depth accepted for product descriptors.
pub const MAX_PRODUCT_DEPTH: usize = 4;

/// Hard cap on letters for free groups (the text grammar has 25 letters).
pub const MAX_FREE_RANK: usize = 25;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GroupDescriptor {
    Trivial,
    Lattice {
        dim: usize,
    },
    Free {
        rank: usize,
    },
    Lamplighter {
        dim: usize,
    },
    Product {
        left: Box<GroupDescriptor>,
        right: Box<GroupDescriptor>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupElement {
    Trivial,
    Lattice(Vec<i64>),
    Free(Vec<i32>),
    Lamplighter {
        position: Vec<i64>,
        lamps: BTreeSet<Vec<i64>>,
    },
    Product(Box<GroupElement>, Box<GroupElement>),
}

impl GroupDescriptor {
    pub fn lattice(dim: usize) -> Self {
        GroupDescriptor::Lattice { dim }
    }

    pub fn free(rank: usize) -> Self {
        GroupDescriptor::Free { rank }
    }

    pub fn lamplighter(dim: usize) -> Self {
        GroupDescriptor::Lamplighter { dim }
    }

    pub fn product(left: GroupDescriptor, right: GroupDescriptor) -> Self {
        GroupDescriptor::Product {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(0)
    }

    fn validate_at(&self, depth: usize) -> Result<()> {
        match self {
            GroupDescriptor::Trivial => Ok(()),
            GroupDescriptor::Lattice { dim } | GroupDescriptor::Lamplighter { dim } => {
                if *dim == 0 {
                    Err(Error::InvalidDescriptor("dimension must be at least 1".into()))
                } else {
                    Ok(())
                }
            }
            GroupDescriptor::Free { rank } => {
                if *rank == 0 || *rank > MAX_FREE_RANK {
                    Err(Error::InvalidDescriptor(format!(
                        "free rank must be in 1..={MAX_FREE_RANK}, got {rank}"
                    )))
                } else {
                    Ok(())
                }
            }
            GroupDescriptor::Product { left, right } => {
                if depth + 1 > MAX_PRODUCT_DEPTH {
                    return Err(Error::InvalidDescriptor(format!(
                        "product nesting deeper than {MAX_PRODUCT_DEPTH}"
                    )));
                }
                left.validate_at(depth + 1)?;
                right.validate_at(depth + 1)
            }
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupDescriptor::Trivial => GroupElement::Trivial,
            GroupDescriptor::Lattice { dim } => GroupElement::Lattice(vec![0; *dim]),
            GroupDescriptor::Free { .. } => GroupElement::Free(Vec::new()),
            GroupDescriptor::Lamplighter { dim } => GroupElement::Lamplighter {
                position: vec![0; *dim],
                lamps: BTreeSet::new(),
            },
            GroupDescriptor::Product { left, right } => {
                GroupElement::Product(Box::new(left.identity()), Box::new(right.identity()))
            }
        }
    }

    /// Standard symmetric generating set in its fixed order.
    ///
    /// Lattice: `+e_1..+e_d, -e_1..-e_d`. Free: `a_1..a_s, a_1^{-1}..a_s^{-1}`.
    /// Lamplighter: the lattice moves followed by the lamp toggle at the walker.
    /// Product: left generators (paired with `e`) then right generators.
    pub fn generators(&self) -> Vec<GroupElement> {
        match self {
            GroupDescriptor::Trivial => Vec::new(),
            GroupDescriptor::Lattice { dim } => unit_vectors(*dim)
                .into_iter()
                .map(GroupElement::Lattice)
                .collect(),
            GroupDescriptor::Free { rank } => {
                let r = *rank as i32;
                (1..=r)
                    .chain((1..=r).map(|k| -k))
                    .map(|k| GroupElement::Free(vec![k]))
                    .collect()
            }
            GroupDescriptor::Lamplighter { dim } => {
                let mut gens: Vec<GroupElement> = unit_vectors(*dim)
                    .into_iter()
                    .map(|position| GroupElement::Lamplighter {
                        position,
                        lamps: BTreeSet::new(),
                    })
                    .collect();
                gens.push(GroupElement::Lamplighter {
                    position: vec![0; *dim],
                    lamps: BTreeSet::from([vec![0; *dim]]),
                });
                gens
            }
            GroupDescriptor::Product { left, right } => {
                let le = left.identity();
                let re = right.identity();
                left.generators()
                    .into_iter()
                    .map(|g| GroupElement::Product(Box::new(g), Box::new(re.clone())))
                    .chain(
                        right
                            .generators()
                            .into_iter()
                            .map(|g| GroupElement::Product(Box::new(le.clone()), Box::new(g))),
                    )
                    .collect()
            }
        }
    }

    /// Whether `g` has the shape of an element of this group.
    pub fn contains(&self, g: &GroupElement) -> bool {
        match (self, g) {
            (GroupDescriptor::Trivial, GroupElement::Trivial) => true,
            (GroupDescriptor::Lattice { dim }, GroupElement::Lattice(v)) => v.len() == *dim,
            (GroupDescriptor::Free { rank }, GroupElement::Free(w)) => {
                let r = *rank as i32;
                w.iter().all(|&k| k != 0 && k.abs() <= r)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (GroupDescriptor::Lamplighter { dim }, GroupElement::Lamplighter { position, lamps }) => {
                position.len() == *dim && lamps.iter().all(|l| l.len() == *dim)
            }
            (GroupDescriptor::Product { left, right }, GroupElement::Product(a, b)) => {
                left.contains(a) && right.contains(b)
            }
            _ => false,
        }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(Error::DescriptorMismatch {
                expected: self.to_string(),
            })
        }
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check(a)?;
        self.check(b)?;
        Ok(a.mul(b))
    }

    pub fn inverse(&self, a: &GroupElement) -> Result<GroupElement> {
        self.check(a)?;
        Ok(a.inv())
    }

    /// `x^{-1} y`, the element that carries the transition `x -> y`.
    pub fn left_quotient(&self, x: &GroupElement, y: &GroupElement) -> Result<GroupElement> {
        self.check(x)?;
        self.check(y)?;
        Ok(x.inv().mul(y))
    }

    pub fn is_identity(&self, g: &GroupElement) -> bool {
        *g == self.identity()
    }

    /// Whether word lengths are available in closed form (no search).
    pub fn has_native_length(&self) -> bool {
        match self {
            GroupDescriptor::Lamplighter { .. } => false,
            GroupDescriptor::Product { left, right } => {
                left.has_native_length() && right.has_native_length()
            }
            _ => true,
        }
    }
}

fn unit_vectors(dim: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::with_capacity(2 * dim);
    for sign in [1i64, -1] {
        for i in 0..dim {
            let mut v = vec![0; dim];
            v[i] = sign;
            out.push(v);
        }
    }
    out
}

fn reduce_into(buffer: &mut Vec<i32>, letters: impl IntoIterator<Item = i32>) {
    for x in letters {
        if buffer.last() == Some(&-x) {
            buffer.pop();
        } else {
            buffer.push(x);
        }
    }
}

impl GroupElement {
    /// Free word from signed letters, reduced.
    pub fn free_word(letters: impl IntoIterator<Item = i32>) -> Self {
        let mut w = Vec::new();
        reduce_into(&mut w, letters.into_iter().filter(|&k| k != 0));
        GroupElement::Free(w)
    }

    pub fn lattice(coords: impl Into<Vec<i64>>) -> Self {
        GroupElement::Lattice(coords.into())
    }

    pub fn pair(a: GroupElement, b: GroupElement) -> Self {
        GroupElement::Product(Box::new(a), Box::new(b))
    }

    /// Group product. Callers must ensure both factors come from the same family;
    /// use [`GroupDescriptor::multiply`] for a checked version.
    pub(crate) fn mul(&self, other: &GroupElement) -> GroupElement {
        match (self, other) {
            (GroupElement::Trivial, GroupElement::Trivial) => GroupElement::Trivial,
            (GroupElement::Lattice(a), GroupElement::Lattice(b)) => {
                GroupElement::Lattice(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (GroupElement::Free(a), GroupElement::Free(b)) => {
                let mut w = a.clone();
                reduce_into(&mut w, b.iter().copied());
                GroupElement::Free(w)
            }
            (
                GroupElement::Lamplighter {
                    position: x,
                    lamps: w,
                },
                GroupElement::Lamplighter {
                    position: y,
                    lamps: u,
                },
            ) => {
                let mut lamps = w.clone();
                for lamp in u {
                    let shifted: Vec<i64> = lamp.iter().zip(x).map(|(l, s)| l + s).collect();
                    if !lamps.remove(&shifted) {
                        lamps.insert(shifted);
                    }
                }
                GroupElement::Lamplighter {
                    position: x.iter().zip(y).map(|(a, b)| a + b).collect(),
                    lamps,
                }
            }
            (GroupElement::Product(a1, b1), GroupElement::Product(a2, b2)) => {
                GroupElement::Product(Box::new(a1.mul(a2)), Box::new(b1.mul(b2)))
            }
            _ => panic!("multiplying elements of different group families"),
        }
    }

    pub(crate) fn inv(&self) -> GroupElement {
        match self {
            GroupElement::Trivial => GroupElement::Trivial,
            GroupElement::Lattice(a) => GroupElement::Lattice(a.iter().map(|x| -x).collect()),
            GroupElement::Free(w) => GroupElement::Free(w.iter().rev().map(|k| -k).collect()),
            GroupElement::Lamplighter { position, lamps } => GroupElement::Lamplighter {
                position: position.iter().map(|x| -x).collect(),
                lamps: lamps
                    .iter()
                    .map(|l| l.iter().zip(position).map(|(a, s)| a - s).collect())
                    .collect(),
            },
            GroupElement::Product(a, b) => GroupElement::Product(Box::new(a.inv()), Box::new(b.inv())),
        }
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupDescriptor::Trivial => write!(f, "trivial"),
            GroupDescriptor::Lattice { dim } => write!(f, "Z^{dim}"),
            GroupDescriptor::Free { rank } => write!(f, "F_{rank}"),
            GroupDescriptor::Lamplighter { dim } => write!(f, "L(Z^{dim})"),
            GroupDescriptor::Product { left, right } => write!(f, "({left} x {right})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lamp(pos: i64, lit: &[i64]) -> GroupElement {
        GroupElement::Lamplighter {
            position: vec![pos],
            lamps: lit.iter().map(|&l| vec![l]).collect(),
        }
    }

    #[test]
    fn free_cancellation() {
        let g = GroupDescriptor::free(2);
        let a = GroupElement::free_word([1]);
        let a_inv = g.inverse(&a).unwrap();
        assert_eq!(g.multiply(&a, &a_inv).unwrap(), g.identity());
    }

    #[test]
    fn lattice_addition() {
        let g = GroupDescriptor::lattice(2);
        let p = g
            .multiply(&GroupElement::lattice([1, 2]), &GroupElement::lattice([-1, 0]))
            .unwrap();
        assert_eq!(p, GroupElement::lattice([0, 2]));
    }

    #[test]
    fn lamplighter_product_rule() {
        let g = GroupDescriptor::lamplighter(1);
        let p = g.multiply(&lamp(1, &[0]), &lamp(1, &[0])).unwrap();
        assert_eq!(p, lamp(2, &[0, 1]));
    }

    #[test]
    fn inverse_examples() {
        let f = GroupDescriptor::free(2);
        assert_eq!(f.inverse(&f.identity()).unwrap(), f.identity());
        let ab = GroupElement::free_word([1, 2]);
        assert_eq!(f.inverse(&ab).unwrap(), GroupElement::free_word([-2, -1]));
    }

    #[test]
    fn lamplighter_inverse_matches_brute_force() {
        // Search short products of generators for the element that cancels (1,{0}).
        let g = GroupDescriptor::lamplighter(1);
        let target = lamp(1, &[0]);
        let ball = g.ball(6).unwrap();
        let found: Vec<_> = ball
            .elements()
            .iter()
            .filter(|h| g.multiply(&target, h).unwrap() == g.identity())
            .cloned()
            .collect();
        assert_eq!(found, vec![lamp(-1, &[-1])]);
        assert_eq!(g.inverse(&target).unwrap(), lamp(-1, &[-1]));
    }

    #[test]
    fn mismatch_is_rejected() {
        let g = GroupDescriptor::free(2);
        let err = g.multiply(&GroupElement::lattice([1]), &g.identity());
        assert!(matches!(err, Err(Error::DescriptorMismatch { .. })));
        // letter outside the rank
        assert!(!g.contains(&GroupElement::Free(vec![3])));
        // unreduced word is not canonical
        assert!(!g.contains(&GroupElement::Free(vec![1, -1])));
    }

    #[test]
    fn descriptor_validation() {
        assert!(GroupDescriptor::lattice(0).validate().is_err());
        assert!(GroupDescriptor::free(0).validate().is_err());
        let mut d = GroupDescriptor::lattice(1);
        for _ in 0..MAX_PRODUCT_DEPTH {
            d = GroupDescriptor::product(d, GroupDescriptor::lattice(1));
        }
        assert!(d.validate().is_ok());
        d = GroupDescriptor::product(d, GroupDescriptor::lattice(1));
        assert!(d.validate().is_err());
    }

    #[test]
    fn generator_order_is_fixed() {
        let g = GroupDescriptor::free(2);
        let names: Vec<String> = g.generators().iter().map(|x| g.format(x)).collect();
        assert_eq!(names, ["a", "b", "A", "B"]);
        let z = GroupDescriptor::lattice(1);
        assert_eq!(
            z.generators(),
            vec![GroupElement::lattice([1]), GroupElement::lattice([-1])]
        );
    }
}
