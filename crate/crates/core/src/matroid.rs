//! Matroid oracles, base enumeration, fractional base packing and membership
//! in `P(M)`, `B(M)`, `P_t(M)`, `B_t(M)`.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LpOutcome};
use crate::point::Point;
use crate::scalar::{format_rational, serde_rational, Rational, Scalar};
use crate::subset::{lex_subsets, Subset};

/// Base enumeration, packing LP and explicit validation.
pub const ENUM_CAP: usize = 16;
/// Rank tables (`2^n` bytes).
pub const RANK_TABLE_CAP: usize = 22;

#[derive(Clone, Debug, PartialEq)]
pub enum MatroidKind {
    Free,
    Uniform { k: usize },
    Partition { parts: Vec<Subset>, caps: Vec<usize> },
    Explicit { bases: Vec<Subset> },
}

impl MatroidKind {
    pub fn name(&self) -> &'static str {
        match self {
            MatroidKind::Free => "free",
            MatroidKind::Uniform { .. } => "uniform",
            MatroidKind::Partition { .. } => "partition",
            MatroidKind::Explicit { .. } => "explicit",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Matroid {
    n: usize,
    kind: MatroidKind,
    /// Elements outside the mask are deleted (behave as loops).
    active: Subset,
    independent: Option<Arc<Vec<bool>>>,
    ranks: OnceLock<Arc<Vec<u8>>>,
}

impl PartialEq for Matroid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.kind == other.kind && self.active == other.active
    }
}

impl Matroid {
    fn build(n: usize, kind: MatroidKind) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::invalid(format!("matroid ground size {n} not in 1..=64")));
        }
        Ok(Matroid { n, kind, active: Subset::full(n), independent: None, ranks: OnceLock::new() })
    }

    pub fn free(n: usize) -> Result<Self> {
        Self::build(n, MatroidKind::Free)
    }

    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        Self::build(n, MatroidKind::Uniform { k: k.min(n) })
    }

    pub fn partition(n: usize, parts: Vec<Vec<usize>>, caps: Vec<usize>) -> Result<Self> {
        if parts.len() != caps.len() {
            return Err(Error::invalid("partition needs one cap per part"));
        }
        let mut seen = Subset::EMPTY;
        let mut masks = Vec::with_capacity(parts.len());
        for p in &parts {
            let m = Subset::from_indices(p.iter().copied());
            if p.iter().any(|&i| i >= n) || m.len() != p.len() || !m.intersection(seen).is_empty() {
                return Err(Error::invalid("partition parts must be disjoint element lists within the ground set"));
            }
            seen = seen.union(m);
            masks.push(m);
        }
        if seen != Subset::full(n) {
            return Err(Error::invalid("partition parts must cover the ground set"));
        }
        let caps = caps.iter().zip(&masks).map(|(&c, m)| c.min(m.len())).collect();
        Self::build(n, MatroidKind::Partition { parts: masks, caps })
    }

    /// Validates the base exchange axiom exhaustively.
    pub fn explicit(n: usize, bases: Vec<Subset>) -> Result<Self> {
        Error::check_size("explicit matroid", n, ENUM_CAP)?;
        let mut bases = bases;
        bases.sort_by(|a, b| a.lex_cmp(*b));
        bases.dedup();
        let Some(first) = bases.first() else {
            return Err(Error::invalid("explicit matroid needs at least one base"));
        };
        let r = first.len();
        if bases.iter().any(|b| b.len() != r || !b.is_subset_of(Subset::full(n))) {
            return Err(Error::invalid("bases must be equicardinal subsets of the ground set"));
        }
        let set: std::collections::HashSet<Subset> = bases.iter().copied().collect();
        for &b1 in &bases {
            for &b2 in &bases {
                for x in b1.difference(b2).iter() {
                    let ok = b2.difference(b1).iter().any(|y| set.contains(&b1.without(x).with(y)));
                    if !ok {
                        return Err(Error::invalid(format!(
                            "exchange axiom fails for bases {b1} and {b2} at element {x}"
                        )));
                    }
                }
            }
        }
        let mut indep = vec![false; 1 << n];
        for &b in &bases {
            let mut sub = b.0;
            loop {
                indep[sub as usize] = true;
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & b.0;
            }
        }
        let mut m = Self::build(n, MatroidKind::Explicit { bases })?;
        m.independent = Some(Arc::new(indep));
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &MatroidKind {
        &self.kind
    }

    pub fn active(&self) -> Subset {
        self.active
    }

    /// Deletes the elements outside `keep`, preserving original indices.
    pub fn restrict(&self, keep: Subset) -> Matroid {
        Matroid {
            n: self.n,
            kind: self.kind.clone(),
            active: self.active.intersection(keep),
            independent: self.independent.clone(),
            ranks: OnceLock::new(),
        }
    }

    pub fn delete(&self, i: usize) -> Matroid {
        self.restrict(self.active.without(i))
    }

    pub fn is_independent(&self, s: Subset) -> bool {
        if !s.is_subset_of(self.active) {
            return false;
        }
        match &self.kind {
            MatroidKind::Free => true,
            MatroidKind::Uniform { k } => s.len() <= *k,
            MatroidKind::Partition { parts, caps } => {
                parts.iter().zip(caps).all(|(p, &c)| s.intersection(*p).len() <= c)
            }
            MatroidKind::Explicit { .. } => self.independent.as_ref().expect("explicit table")[s.0 as usize],
        }
    }

    pub fn rank(&self, s: Subset) -> usize {
        let s = s.intersection(self.active);
        match &self.kind {
            MatroidKind::Free => s.len(),
            MatroidKind::Uniform { k } => s.len().min(*k),
            MatroidKind::Partition { parts, caps } => {
                parts.iter().zip(caps).map(|(p, &c)| s.intersection(*p).len().min(c)).sum()
            }
            MatroidKind::Explicit { .. } => {
                let mut acc = Subset::EMPTY;
                for i in s.iter() {
                    if self.is_independent(acc.with(i)) {
                        acc = acc.with(i);
                    }
                }
                acc.len()
            }
        }
    }

    pub fn full_rank(&self) -> usize {
        self.rank(Subset::full(self.n))
    }

    /// Ranks of all `2^n` subsets, computed once.
    pub fn rank_table(&self) -> Result<Arc<Vec<u8>>> {
        Error::check_size("rank table", self.n, RANK_TABLE_CAP)?;
        Ok(self
            .ranks
            .get_or_init(|| Arc::new((0..1u64 << self.n).map(|m| self.rank(Subset(m)) as u8).collect()))
            .clone())
    }

    /// All bases in lexicographic order.
    pub fn enumerate_bases(&self) -> Result<Vec<Subset>> {
        Error::check_size("base enumeration", self.n, ENUM_CAP)?;
        let r = self.full_rank();
        Ok(lex_subsets(self.n).filter(|s| s.len() == r && self.is_independent(*s)).collect())
    }

    /// The dual matroid on the active ground set.
    pub fn dual(&self) -> Result<Matroid> {
        let kind = match &self.kind {
            MatroidKind::Free => MatroidKind::Uniform { k: 0 },
            MatroidKind::Uniform { k } => MatroidKind::Uniform { k: self.active.len() - (*k).min(self.active.len()) },
            MatroidKind::Partition { parts, .. } => {
                let caps = parts
                    .iter()
                    .zip(self.partition_caps())
                    .map(|(p, c)| p.intersection(self.active).len() - c)
                    .collect();
                return Ok(Matroid {
                    kind: MatroidKind::Partition { parts: parts.clone(), caps },
                    ..self.without_caches()
                });
            }
            MatroidKind::Explicit { .. } => {
                let comps = self.enumerate_bases()?.iter().map(|b| self.active.difference(*b)).collect();
                let m = Matroid::explicit(self.n, comps)?;
                return Ok(m.restrict(self.active));
            }
        };
        let mut m = Self::build(self.n, kind)?;
        m.active = self.active;
        Ok(m)
    }

    fn without_caches(&self) -> Matroid {
        Matroid {
            n: self.n,
            kind: self.kind.clone(),
            active: self.active,
            independent: self.independent.clone(),
            ranks: OnceLock::new(),
        }
    }

    /// Effective partition capacities on the active elements.
    fn partition_caps(&self) -> Vec<usize> {
        match &self.kind {
            MatroidKind::Partition { parts, caps } => parts
                .iter()
                .zip(caps)
                .map(|(p, &c)| c.min(p.intersection(self.active).len()))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Exact fractional base packing number with a certificate.
    pub fn fractional_base_packing(&self) -> Result<PackingCertificate> {
        if self.full_rank() == 0 {
            return Err(Error::invalid("packing is unbounded: the only base is empty"));
        }
        match &self.kind {
            MatroidKind::Free => Ok(self.cyclic_certificate(&[(self.active, self.active.len())])),
            MatroidKind::Uniform { k } => Ok(self.cyclic_certificate(&[(self.active, (*k).min(self.active.len()))])),
            MatroidKind::Partition { parts, .. } => {
                let blocks: Vec<(Subset, usize)> = parts
                    .iter()
                    .map(|p| p.intersection(self.active))
                    .zip(self.partition_caps())
                    .collect();
                Ok(self.cyclic_certificate(&blocks))
            }
            MatroidKind::Explicit { .. } => self.fractional_base_packing_lp(),
        }
    }

    /// `ν` for a disjoint union of uniform blocks: `min |P|/c` over blocks with
    /// `c > 0`, certified by cyclic windows of each block.
    fn cyclic_certificate(&self, blocks: &[(Subset, usize)]) -> PackingCertificate {
        let used: Vec<(Vec<usize>, usize)> =
            blocks.iter().filter(|b| b.1 > 0).map(|(p, c)| (p.to_vec(), *c)).collect();
        let nu = used
            .iter()
            .map(|(p, c)| Rational::new(p.len() as i128, *c as i128))
            .min()
            .expect("positive rank");
        let period = used.iter().fold(1usize, |l, (p, _)| l.lcm(&p.len()));
        let w = nu / Rational::from_integer(period as i128);
        let mut weights: BTreeMap<Subset, Rational> = BTreeMap::new();
        for s in 0..period {
            let base = Subset::from_indices(
                used.iter().flat_map(|(p, c)| (0..*c).map(move |t| p[(s * c + t) % p.len()])),
            );
            *weights.entry(base).or_insert_with(Rational::zero) += w;
        }
        PackingCertificate::from_map(nu, weights)
    }

    /// Solves the packing LP over all enumerated bases.
    pub fn fractional_base_packing_lp(&self) -> Result<PackingCertificate> {
        let bases = self.enumerate_bases()?;
        if bases.iter().all(|b| b.is_empty()) {
            return Err(Error::invalid("packing is unbounded: the only base is empty"));
        }
        let elems: Vec<usize> = (0..self.n).filter(|&j| bases.iter().any(|b| b.contains(j))).collect();
        let nb = bases.len();
        let ne = elems.len();
        let mut a = vec![vec![Rational::zero(); nb + ne]; ne];
        for (r, &j) in elems.iter().enumerate() {
            for (c, b) in bases.iter().enumerate() {
                if b.contains(j) {
                    a[r][c] = Rational::one();
                }
            }
            a[r][nb + r] = Rational::one();
        }
        let b = vec![Rational::one(); ne];
        let mut c = vec![Rational::one(); nb];
        c.extend(std::iter::repeat_n(Rational::zero(), ne));
        match lp::maximize(&a, &b, &c) {
            LpOutcome::Optimal { value, x } => {
                let weights = bases
                    .iter()
                    .zip(&x)
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(b, w)| (*b, *w))
                    .collect();
                Ok(PackingCertificate::from_map(value, weights))
            }
            LpOutcome::Unbounded => Err(Error::Unbounded),
            LpOutcome::Infeasible => Err(Error::Contract("packing LP reported infeasible".into())),
        }
    }

    /// `x ∈ P_t(M)` (or `B_t(M)` with `base_mode`): box `0 ≤ x ≤ t`, rank
    /// inequalities over all subsets, and `x(X) = r(X)` for bases.
    pub fn in_polytope<T: Scalar>(&self, x: &Point<T>, t: &T, base_mode: bool) -> bool {
        assert_eq!(x.len(), self.n, "point dimension differs from the ground set");
        let zero = T::zero();
        if x.coords().iter().any(|c| !zero.le_tol(c) || !c.le_tol(t)) {
            return false;
        }
        if (0..self.n).any(|i| !self.active.contains(i) && !x[i].eq_tol(&zero)) {
            return false;
        }
        let Ok(ranks) = self.rank_table() else {
            panic!("membership scan needs n ≤ {RANK_TABLE_CAP}");
        };
        let sums = subset_sums(x.coords());
        for (m, s) in sums.iter().enumerate() {
            if !s.le_tol(&T::from_i64(ranks[m] as i64)) {
                return false;
            }
        }
        !base_mode || sums[sums.len() - 1].eq_tol(&T::from_i64(self.full_rank() as i64))
    }

    /// Loops (rank-0 elements) and coloops (in every base) of the active part.
    pub fn strip_loops_and_coloops(&self) -> Stripped {
        let r = self.full_rank();
        let full = Subset::full(self.n);
        let loops: Vec<usize> = self.active.iter().filter(|&i| self.rank(Subset::singleton(i)) == 0).collect();
        let coloops: Vec<usize> = self
            .active
            .iter()
            .filter(|&i| !loops.contains(&i) && self.rank(full.without(i)) < r)
            .collect();
        let removed = Subset::from_indices(loops.iter().chain(&coloops).copied());
        Stripped { matroid: self.restrict(full.difference(removed)), loops, coloops }
    }

    pub fn to_spec(&self) -> MatroidSpec {
        match &self.kind {
            MatroidKind::Free => MatroidSpec::Free { n: self.n },
            MatroidKind::Uniform { k } => MatroidSpec::Uniform { n: self.n, k: *k },
            MatroidKind::Partition { parts, caps } => MatroidSpec::Partition {
                n: Some(self.n),
                parts: parts.iter().map(|p| p.to_vec()).collect(),
                caps: caps.clone(),
            },
            MatroidKind::Explicit { bases } => MatroidSpec::Explicit { n: self.n, bases: bases.clone() },
        }
    }
}

/// `x(S)` for every mask, by peeling the lowest bit.
pub fn subset_sums<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let mut sums = vec![T::zero(); 1 << n];
    for m in 1..1usize << n {
        let low = m.trailing_zeros() as usize;
        sums[m] = sums[m & (m - 1)].clone() + x[low].clone();
    }
    sums
}

#[derive(Clone, Debug)]
pub struct Stripped {
    /// The matroid with loops deleted and coloops contracted (equivalently
    /// deleted, since coloops lie in every base).
    pub matroid: Matroid,
    pub loops: Vec<usize>,
    pub coloops: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PackingCertificate {
    #[serde(with = "serde_rational")]
    pub nu: Rational,
    pub weights: Vec<BaseWeight>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaseWeight {
    pub base: Subset,
    #[serde(with = "serde_rational")]
    pub weight: Rational,
}

impl PackingCertificate {
    fn from_map(nu: Rational, weights: BTreeMap<Subset, Rational>) -> Self {
        let mut weights: Vec<BaseWeight> =
            weights.into_iter().map(|(base, weight)| BaseWeight { base, weight }).collect();
        weights.sort_by(|a, b| a.base.lex_cmp(b.base));
        PackingCertificate { nu, weights }
    }

    /// Re-checks `Σ weights = ν`, per-element load `≤ 1`, nonnegativity and
    /// that every listed set is a base of `m`.
    pub fn validate(&self, m: &Matroid) -> Result<()> {
        let total: Rational = self.weights.iter().map(|w| w.weight).sum();
        if total != self.nu {
            return Err(Error::Contract(format!("weights sum to {} not {}", format_rational(&total), format_rational(&self.nu))));
        }
        let r = m.full_rank();
        for w in &self.weights {
            if w.weight < Rational::zero() || w.base.len() != r || !m.is_independent(w.base) {
                return Err(Error::Contract(format!("bad certificate entry {}", w.base)));
            }
        }
        for j in 0..m.n() {
            let load: Rational = self.weights.iter().filter(|w| w.base.contains(j)).map(|w| w.weight).sum();
            if load > Rational::one() {
                return Err(Error::Contract(format!("element {j} has load {}", format_rational(&load))));
            }
        }
        Ok(())
    }
}

/// JSON constraint description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MatroidSpec {
    Free { n: usize },
    Uniform { n: usize, k: usize },
    Partition {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        parts: Vec<Vec<usize>>,
        caps: Vec<usize>,
    },
    Explicit { n: usize, bases: Vec<Subset> },
}

impl MatroidSpec {
    pub fn build(self) -> Result<Matroid> {
        match self {
            MatroidSpec::Free { n } => Matroid::free(n),
            MatroidSpec::Uniform { n, k } => Matroid::uniform(n, k),
            MatroidSpec::Partition { n, parts, caps } => {
                let n = n.unwrap_or_else(|| parts.iter().map(Vec::len).sum());
                Matroid::partition(n, parts, caps)
            }
            MatroidSpec::Explicit { n, bases } => Matroid::explicit(n, bases),
        }
    }
}

pub fn parse_matroid(json: &str) -> Result<Matroid> {
    serde_json::from_str::<MatroidSpec>(json)?.build()
}

/// `B_t(M) ≠ ∅` via `min_S r(S) + t|X∖S| ≥ r(X)`: the largest `x(X)` over
/// `P(M) ∩ [0,t]^X` reaches the rank exactly when a base point fits the box.
pub fn box_meets_base_polytope(m: &Matroid, t: Rational) -> Result<bool> {
    let ranks = m.rank_table()?;
    let n = m.n();
    let r = Rational::from_integer(m.full_rank() as i128);
    Ok((0..1usize << n).all(|s| {
        let outside = (Subset::full(n).0 & !(s as u64)).count_ones() as i128;
        Rational::from_integer(ranks[s] as i128) + t * Rational::from_integer(outside) >= r
    }))
}
