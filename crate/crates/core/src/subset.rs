//! Bitmask subsets of a ground set with at most 64 elements.
//!
//! "Lexicographic" order throughout the crate compares the sorted element
//! lists, so `{0,3} < {1,2}` and every set precedes its extensions.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Subset(pub u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(n: usize) -> Self {
        assert!(n <= 64);
        if n == 64 {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        Subset(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        Subset(it.into_iter().fold(0, |m, i| m | (1 << i)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        Subset(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Self {
        Subset(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: Subset) -> Self {
        Subset(self.0 | other.0)
    }

    pub fn intersection(self, other: Subset) -> Self {
        Subset(self.0 & other.0)
    }

    pub fn difference(self, other: Subset) -> Self {
        Subset(self.0 & !other.0)
    }

    pub fn max_element(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            (m != 0).then(|| {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                i
            })
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Lexicographic comparison of the sorted element lists.
    pub fn lex_cmp(self, other: Subset) -> Ordering {
        let (mut a, mut b) = (self.0, other.0);
        loop {
            match (a == 0, b == 0) {
                (true, true) => return Ordering::Equal,
                (true, false) => return Ordering::Less,
                (false, true) => return Ordering::Greater,
                _ => {}
            }
            let (x, y) = (a.trailing_zeros(), b.trailing_zeros());
            if x != y {
                return x.cmp(&y);
            }
            a &= a - 1;
            b &= b - 1;
        }
    }

    /// Successor in lexicographic order over subsets of `{0..n}`.
    pub fn lex_next(self, n: usize) -> Option<Subset> {
        let last = self.max_element();
        let next = last.map_or(0, |l| l + 1);
        if next < n {
            return Some(self.with(next));
        }
        let rest = self.without(last?);
        let m = rest.max_element()?;
        Some(rest.without(m).with(m + 1))
    }
}

/// All subsets of `{0..n}` in lexicographic order, starting at the empty set.
pub fn lex_subsets(n: usize) -> impl Iterator<Item = Subset> {
    let mut cur = Some(Subset::EMPTY);
    std::iter::from_fn(move || {
        let s = cur?;
        cur = s.lex_next(n);
        Some(s)
    })
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Subset {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        if let Some(&i) = v.iter().find(|&&i| i >= 64) {
            return Err(serde::de::Error::custom(format!("element {i} out of range")));
        }
        Ok(Subset::from_indices(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lex_order_enumerates_everything_once() {
        let all: Vec<Subset> = lex_subsets(4).collect();
        assert_eq!(all.len(), 16);
        for w in all.windows(2) {
            assert_eq!(w[0].lex_cmp(w[1]), Ordering::Less, "{} {}", w[0], w[1]);
        }
        assert_eq!(all[1], Subset::from_indices([0]));
        assert_eq!(all[2], Subset::from_indices([0, 1]));
        assert_eq!(all[15], Subset::from_indices([3]));
    }

    #[test]
    fn lex_cmp_prefers_smaller_first_difference() {
        let a = Subset::from_indices([0, 3]);
        let b = Subset::from_indices([1, 2]);
        assert_eq!(a.lex_cmp(b), Ordering::Less);
        assert!(a.0 > b.0);
    }

    #[test]
    fn serde_round_trip() {
        let s = Subset::from_indices([1, 4]);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, "[1,4]");
        assert_eq!(serde_json::from_str::<Subset>(&j).unwrap(), s);
    }
}
