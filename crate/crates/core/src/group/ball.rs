use std::collections::HashMap;

use super::{GroupDescriptor, GroupElement};
use crate::error::{Error, Result};

/// Default cap on the number of elements a ball may hold.
pub const DEFAULT_BALL_CAP: usize = 4_000_000;

/// Default search radius for word lengths without a closed form.
pub const DEFAULT_LENGTH_RADIUS: usize = 12;

/// A word-metric ball listed in enumeration order.
///
/// Position in [`Ball::elements`] is the enumeration index `φ`. Elements appear
/// in breadth-first discovery order: by length, then by the discovery order of
/// their parent, then by generator order. Growing the radius only appends.
#[derive(Clone, Debug)]
pub struct Ball {
    radius: usize,
    elements: Vec<GroupElement>,
    lengths: Vec<usize>,
    index: HashMap<GroupElement, usize>,
}

impl Ball {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Enumeration index of `g`, if it lies in the ball.
    pub fn phi(&self, g: &GroupElement) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    pub fn length_at(&self, i: usize) -> usize {
        self.lengths[i]
    }

    pub fn length_of(&self, g: &GroupElement) -> Option<usize> {
        self.phi(g).map(|i| self.lengths[i])
    }

    /// Elements of word length exactly `r`.
    pub fn sphere(&self, r: usize) -> &[GroupElement] {
        let lo = self.lengths.partition_point(|&l| l < r);
        let hi = self.lengths.partition_point(|&l| l <= r);
        &self.elements[lo..hi]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &GroupElement)> {
        self.elements.iter().enumerate()
    }
}

impl GroupDescriptor {
    pub fn ball(&self, radius: usize) -> Result<Ball> {
        self.ball_capped(radius, DEFAULT_BALL_CAP)
    }

    pub fn ball_capped(&self, radius: usize, cap: usize) -> Result<Ball> {
        self.validate()?;
        let gens = self.generators();
        let e = self.identity();
        let mut ball = Ball {
            radius,
            elements: vec![e.clone()],
            lengths: vec![0],
            index: HashMap::from([(e, 0)]),
        };
        let mut frontier = 0..1;
        for r in 1..=radius {
            let start = ball.elements.len();
            for i in frontier.clone() {
                for s in &gens {
                    let h = ball.elements[i].mul(s);
                    if ball.index.contains_key(&h) {
                        continue;
                    }
                    if ball.elements.len() >= cap {
                        return Err(Error::Budget {
                            what: "ball",
                            needed: ball.elements.len() + 1,
                            cap,
                        });
                    }
                    ball.index.insert(h.clone(), ball.elements.len());
                    ball.elements.push(h);
                    ball.lengths.push(r);
                }
            }
            frontier = start..ball.elements.len();
            if frontier.is_empty() {
                break;
            }
        }
        Ok(ball)
    }

    /// Word length with respect to the standard generators.
    pub fn word_length(&self, g: &GroupElement) -> Result<usize> {
        self.word_length_within(g, DEFAULT_LENGTH_RADIUS)
    }

    /// Word length, searching at most `radius` for families without a formula.
    pub fn word_length_within(&self, g: &GroupElement, radius: usize) -> Result<usize> {
        if !self.contains(g) {
            return Err(Error::DescriptorMismatch {
                expected: self.to_string(),
            });
        }
        match (self, g) {
            (GroupDescriptor::Trivial, _) => Ok(0),
            (GroupDescriptor::Lattice { .. }, GroupElement::Lattice(v)) => {
                Ok(v.iter().map(|x| x.unsigned_abs() as usize).sum())
            }
            (GroupDescriptor::Free { .. }, GroupElement::Free(w)) => Ok(w.len()),
            (GroupDescriptor::Lamplighter { .. }, _) => self.bfs_length(g, radius),
            (GroupDescriptor::Product { left, right }, GroupElement::Product(a, b)) => {
                Ok(left.word_length_within(a, radius)? + right.word_length_within(b, radius)?)
            }
            _ => unreachable!("shape checked above"),
        }
    }

    fn bfs_length(&self, g: &GroupElement, radius: usize) -> Result<usize> {
        if self.is_identity(g) {
            return Ok(0);
        }
        let gens = self.generators();
        let mut seen = std::collections::HashSet::from([self.identity()]);
        let mut frontier = vec![self.identity()];
        for r in 1..=radius {
            let mut next = Vec::new();
            for x in &frontier {
                for s in &gens {
                    let h = x.mul(s);
                    if h == *g {
                        return Ok(r);
                    }
                    if seen.insert(h.clone()) {
                        next.push(h);
                    }
                }
            }
            frontier = next;
        }
        Err(Error::RadiusExhausted { radius })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn reduced_words(s: i32, max_len: usize) -> usize {
        // Brute force over all letter strings, counting distinct reductions.
        let letters: Vec<i32> = (1..=s).chain((1..=s).map(|k| -k)).collect();
        let mut out = BTreeSet::new();
        let mut words: Vec<Vec<i32>> = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &words {
                for &l in &letters {
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
            words.extend(next.clone());
            words.sort();
            words.dedup();
        }
        for w in words {
            if let GroupElement::Free(r) = GroupElement::free_word(w) {
                out.insert(r);
            }
        }
        out.len()
    }

    #[test]
    fn free_ball_sizes() {
        let g = GroupDescriptor::free(2);
        assert_eq!(g.ball(1).unwrap().len(), 5);
        assert_eq!(g.ball(2).unwrap().len(), 17);
        assert_eq!(reduced_words(2, 2), 17);
    }

    #[test]
    fn lattice_ball_order() {
        let g = GroupDescriptor::lattice(1);
        let b = g.ball(3).unwrap();
        let coords: Vec<i64> = b
            .elements()
            .iter()
            .map(|x| match x {
                GroupElement::Lattice(v) => v[0],
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(coords, [0, 1, -1, 2, -2, 3, -3]);
    }

    #[test]
    fn ball_is_prefix_stable() {
        let g = GroupDescriptor::lamplighter(1);
        let small = g.ball(3).unwrap();
        let big = g.ball(5).unwrap();
        assert_eq!(small.elements(), &big.elements()[..small.len()]);
    }

    #[test]
    fn word_lengths() {
        let f = GroupDescriptor::free(2);
        assert_eq!(f.word_length(&GroupElement::free_word([1, -2, 1])).unwrap(), 3);
        let z = GroupDescriptor::lattice(2);
        assert_eq!(z.word_length(&GroupElement::lattice([2, -1])).unwrap(), 3);
        let l = GroupDescriptor::lamplighter(1);
        let g = GroupElement::Lamplighter {
            position: vec![0],
            lamps: BTreeSet::from([vec![1]]),
        };
        assert_eq!(l.word_length_within(&g, 4).unwrap(), 3);
        assert!(matches!(
            l.word_length_within(&g, 2),
            Err(Error::RadiusExhausted { radius: 2 })
        ));
    }

    #[test]
    fn ball_budget() {
        let g = GroupDescriptor::free(3);
        assert!(matches!(g.ball_capped(4, 100), Err(Error::Budget { .. })));
    }

    #[test]
    fn sphere_slices() {
        let b = GroupDescriptor::free(2).ball(3).unwrap();
        assert_eq!(b.sphere(0).len(), 1);
        assert_eq!(b.sphere(1).len(), 4);
        assert_eq!(b.sphere(2).len(), 12);
        assert_eq!(b.sphere(3).len(), 36);
    }
}
