//! Value oracles for nonnegative set functions, the bundled submodular
//! families, and exhaustive structural checkers.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::subset::{lex_subsets, Subset};

/// Tables and exhaustive scans stop here (16M entries).
pub const TABLE_CAP: usize = 24;
/// Exhaustive structural checks.
pub const CHECK_CAP: usize = 20;

/// Anything answering `f(S)` for subsets of a small ground set.
pub trait ValueOracle: Sync {
    fn ground_size(&self) -> usize;
    fn value(&self, s: Subset) -> f64;
}

impl<O: ValueOracle + ?Sized> ValueOracle for &O {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }
    fn value(&self, s: Subset) -> f64 {
        (**self).value(s)
    }
}

/// Closure-backed oracle.
pub struct FnOracle<F> {
    n: usize,
    f: F,
}

impl<F: Fn(Subset) -> f64 + Sync> FnOracle<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnOracle { n, f }
    }
}

impl<F: Fn(Subset) -> f64 + Sync> ValueOracle for FnOracle<F> {
    fn ground_size(&self) -> usize {
        self.n
    }
    fn value(&self, s: Subset) -> f64 {
        (self.f)(s)
    }
}

/// All `2^n` values in mask order.
#[derive(Clone, Debug)]
pub struct Table {
    n: usize,
    values: Vec<f64>,
}

impl Table {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl ValueOracle for Table {
    fn ground_size(&self) -> usize {
        self.n
    }
    fn value(&self, s: Subset) -> f64 {
        self.values[s.0 as usize]
    }
}

pub fn tabulate<O: ValueOracle>(f: &O) -> Result<Table> {
    let n = f.ground_size();
    Error::check_size("tabulated ground set", n, TABLE_CAP)?;
    let values = (0..1u64 << n).map(|m| f.value(Subset(m))).collect();
    Ok(Table { n, values })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundSet {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl GroundSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::invalid(format!("ground set size {n} not in 1..=64")));
        }
        Ok(GroundSet { n, labels: None })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FunctionKind {
    Cut { edges: Vec<(usize, usize, f64)> },
    DirectedCut { arcs: Vec<(usize, usize, f64)> },
    /// Element `i` covers the universe items in `covers[i]` (bitsets).
    Coverage { covers: Vec<Vec<u64>>, weights: Vec<f64> },
    Threshold { r: usize },
    Table { values: Vec<f64> },
    /// Nonnegative combination of functions on the same ground set.
    Composed { parts: Vec<(f64, SetFunction)> },
}

impl FunctionKind {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionKind::Cut { .. } => "cut",
            FunctionKind::DirectedCut { .. } => "directed-cut",
            FunctionKind::Coverage { .. } => "coverage",
            FunctionKind::Threshold { .. } => "min-card-threshold",
            FunctionKind::Table { .. } => "explicit-table",
            FunctionKind::Composed { .. } => "composed",
        }
    }
}

/// A value oracle with a known bound `M ≥ max f`.
#[derive(Clone, Debug, PartialEq)]
pub struct SetFunction {
    ground: GroundSet,
    kind: FunctionKind,
    bound: f64,
    bound_exact: bool,
}

fn weight_sum(edges: &[(usize, usize, f64)]) -> f64 {
    edges.iter().fold(0.0, |acc, e| acc + e.2)
}

impl SetFunction {
    fn finish(n: usize, kind: FunctionKind) -> Result<Self> {
        let ground = GroundSet::new(n)?;
        let mut f = SetFunction { ground, kind, bound: 0.0, bound_exact: false };
        let (bound, exact) = match &f.kind {
            FunctionKind::Threshold { r } => ((*r).min(n) as f64, true),
            FunctionKind::Coverage { .. } => (f.value(Subset::full(n)), true),
            FunctionKind::Table { values } => (values.iter().copied().fold(0.0, f64::max), true),
            FunctionKind::Cut { edges } | FunctionKind::DirectedCut { arcs: edges }
                if n > TABLE_CAP =>
            {
                (weight_sum(edges), false)
            }
            FunctionKind::Composed { parts } if n > TABLE_CAP => {
                (parts.iter().map(|(w, g)| w * g.bound).sum(), false)
            }
            _ => (tabulate(&f)?.max().max(0.0), true),
        };
        f.bound = bound;
        f.bound_exact = exact;
        Ok(f)
    }

    fn check_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<()> {
        for &(u, v, w) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::invalid(format!("bad edge ({u},{v}) for n = {n}")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("edge weight {w} must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn cut(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        Self::check_edges(n, &edges)?;
        Self::finish(n, FunctionKind::Cut { edges })
    }

    pub fn directed_cut(n: usize, arcs: Vec<(usize, usize, f64)>) -> Result<Self> {
        Self::check_edges(n, &arcs)?;
        Self::finish(n, FunctionKind::DirectedCut { arcs })
    }

    /// `sets[i]` lists the universe items covered by element `i`.
    pub fn coverage(sets: &[Vec<usize>], weights: Option<Vec<f64>>) -> Result<Self> {
        let n = sets.len();
        let universe = sets.iter().flatten().map(|&u| u + 1).max().unwrap_or(0);
        let weights = weights.unwrap_or_else(|| vec![1.0; universe]);
        if weights.len() < universe {
            return Err(Error::invalid("coverage weights shorter than the universe"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("coverage weights must be nonnegative"));
        }
        let words = weights.len().div_ceil(64).max(1);
        let covers = sets
            .iter()
            .map(|s| {
                let mut b = vec![0u64; words];
                for &u in s {
                    b[u / 64] |= 1 << (u % 64);
                }
                b
            })
            .collect();
        Self::finish(n, FunctionKind::Coverage { covers, weights })
    }

    /// `f(S) = min{|S|, r}`.
    pub fn threshold(n: usize, r: usize) -> Result<Self> {
        Self::finish(n, FunctionKind::Threshold { r })
    }

    pub fn table(n: usize, values: Vec<f64>) -> Result<Self> {
        Error::check_size("explicit table", n, TABLE_CAP)?;
        if values.len() != 1 << n {
            return Err(Error::invalid(format!(
                "table for n = {n} needs {} entries, got {}",
                1u64 << n,
                values.len()
            )));
        }
        if let Some((m, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("table entry {} = {v} is not a nonnegative number", Subset(m as u64))));
        }
        Self::finish(n, FunctionKind::Table { values })
    }

    pub fn composed(parts: Vec<(f64, SetFunction)>) -> Result<Self> {
        let n = parts
            .first()
            .map(|p| p.1.n())
            .ok_or_else(|| Error::invalid("composed function needs at least one part"))?;
        if parts.iter().any(|(w, g)| g.n() != n || !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("composed parts need equal ground sets and nonnegative weights"));
        }
        Self::finish(n, FunctionKind::Composed { parts })
    }

    pub fn n(&self) -> usize {
        self.ground.n
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    /// `M`: exact maximum unless [`SetFunction::bound_is_exact`] says otherwise.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn bound_is_exact(&self) -> bool {
        self.bound_exact
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::invalid("label count differs from n"));
        }
        self.ground.labels = Some(labels);
        Ok(self)
    }

    pub fn eval(&self, s: Subset) -> f64 {
        match &self.kind {
            FunctionKind::Cut { edges } => edges
                .iter()
                .filter(|(u, v, _)| s.contains(*u) != s.contains(*v))
                .fold(0.0, |acc, e| acc + e.2),
            FunctionKind::DirectedCut { arcs } => arcs
                .iter()
                .filter(|(u, v, _)| s.contains(*u) && !s.contains(*v))
                .fold(0.0, |acc, e| acc + e.2),
            FunctionKind::Coverage { covers, weights } => {
                let mut acc = vec![0u64; covers.first().map_or(0, Vec::len)];
                for i in s.iter() {
                    for (a, b) in acc.iter_mut().zip(&covers[i]) {
                        *a |= b;
                    }
                }
                let mut total = 0.0;
                for (w, word) in acc.iter().enumerate() {
                    let mut m = *word;
                    while m != 0 {
                        total += weights[w * 64 + m.trailing_zeros() as usize];
                        m &= m - 1;
                    }
                }
                total
            }
            FunctionKind::Threshold { r } => s.len().min(*r) as f64,
            FunctionKind::Table { values } => values[s.0 as usize],
            FunctionKind::Composed { parts } => parts.iter().map(|(w, g)| w * g.eval(s)).sum(),
        }
    }

    pub fn to_descriptor(&self) -> FamilyDescriptor {
        let edges = |e: &[(usize, usize, f64)]| {
            serde_json::json!({ "edges": e.iter().map(|&(u, v, w)| serde_json::json!([u, v, w])).collect::<Vec<_>>() })
        };
        let payload = match &self.kind {
            FunctionKind::Cut { edges: e } => edges(e),
            FunctionKind::DirectedCut { arcs } => {
                serde_json::json!({ "arcs": arcs.iter().map(|&(u, v, w)| serde_json::json!([u, v, w])).collect::<Vec<_>>() })
            }
            FunctionKind::Coverage { covers, weights } => {
                let sets: Vec<Vec<usize>> = covers
                    .iter()
                    .map(|b| {
                        (0..weights.len()).filter(|u| b[u / 64] >> (u % 64) & 1 == 1).collect()
                    })
                    .collect();
                serde_json::json!({ "sets": sets, "weights": weights })
            }
            FunctionKind::Threshold { r } => serde_json::json!({ "r": r }),
            FunctionKind::Table { values } => serde_json::json!({ "values": values }),
            FunctionKind::Composed { parts } => serde_json::json!({
                "parts": parts.iter().map(|(w, g)| serde_json::json!({"weight": w, "function": g.to_descriptor()})).collect::<Vec<_>>()
            }),
        };
        FamilyDescriptor { n: self.n(), kind: self.kind.name().to_string(), payload }
    }
}

impl ValueOracle for SetFunction {
    fn ground_size(&self) -> usize {
        self.n()
    }
    fn value(&self, s: Subset) -> f64 {
        self.eval(s)
    }
}

/// JSON instance: `{"n": 4, "kind": "cut", "payload": {...}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    pub n: usize,
    pub kind: String,
    #[serde(default)]
    pub payload: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EdgeSpec {
    Weighted(usize, usize, f64),
    Plain(usize, usize),
}

impl EdgeSpec {
    fn triple(self) -> (usize, usize, f64) {
        match self {
            EdgeSpec::Weighted(u, v, w) => (u, v, w),
            EdgeSpec::Plain(u, v) => (u, v, 1.0),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphPayload {
    #[serde(alias = "arcs")]
    edges: Vec<EdgeSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoveragePayload {
    sets: Vec<Vec<usize>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdPayload {
    r: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TablePayload {
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct ComposedPart {
    weight: f64,
    function: FamilyDescriptor,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComposedPayload {
    parts: Vec<ComposedPart>,
}

fn payload<T: for<'de> Deserialize<'de>>(v: &serde_json::Value) -> Result<T> {
    Ok(serde_json::from_value(v.clone())?)
}

pub fn build_family(desc: &FamilyDescriptor) -> Result<SetFunction> {
    let n = desc.n;
    let f = match desc.kind.as_str() {
        "cut" => {
            let p: GraphPayload = payload(&desc.payload)?;
            SetFunction::cut(n, p.edges.into_iter().map(EdgeSpec::triple).collect())?
        }
        "directed-cut" => {
            let p: GraphPayload = payload(&desc.payload)?;
            SetFunction::directed_cut(n, p.edges.into_iter().map(EdgeSpec::triple).collect())?
        }
        "coverage" => {
            let p: CoveragePayload = payload(&desc.payload)?;
            if p.sets.len() != n {
                return Err(Error::invalid(format!("coverage needs {n} sets, got {}", p.sets.len())));
            }
            SetFunction::coverage(&p.sets, p.weights)?
        }
        "min-card-threshold" => {
            let p: ThresholdPayload = payload(&desc.payload)?;
            SetFunction::threshold(n, p.r)?
        }
        "explicit-table" => {
            let p: TablePayload = payload(&desc.payload)?;
            SetFunction::table(n, p.values)?
        }
        "composed" => {
            let p: ComposedPayload = payload(&desc.payload)?;
            let parts = p
                .parts
                .into_iter()
                .map(|c| Ok((c.weight, build_family(&c.function)?)))
                .collect::<Result<Vec<_>>>()?;
            let f = SetFunction::composed(parts)?;
            if f.n() != n {
                return Err(Error::invalid("composed parts disagree with n"));
            }
            f
        }
        other => return Err(Error::invalid(format!("unknown function kind {other:?}"))),
    };
    Ok(f)
}

pub fn parse_family(json: &str) -> Result<SetFunction> {
    build_family(&serde_json::from_str(json)?)
}

/// Sets violating a property together with the two sides of the inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub sets: Vec<Subset>,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sets: Vec<String> = self.sets.iter().map(Subset::to_string).collect();
        write!(f, "sets [{}], lhs {} vs rhs {}", sets.join(", "), self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "witness", rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail(Witness),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Pass => None,
            Verdict::Fail(w) => Some(w),
        }
    }
}

fn default_tol(t: &Table) -> f64 {
    1e-12 * t.values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

pub fn check_submodular<O: ValueOracle>(f: &O) -> Result<Verdict> {
    Error::check_size("submodularity check", f.ground_size(), CHECK_CAP)?;
    let t = tabulate(f)?;
    let tol = default_tol(&t);
    Ok(submodular_scan(&t, tol))
}

pub fn check_submodular_tol<O: ValueOracle>(f: &O, tol: f64) -> Result<Verdict> {
    Error::check_size("submodularity check", f.ground_size(), CHECK_CAP)?;
    Ok(submodular_scan(&tabulate(f)?, tol))
}

/// Diminishing returns `f(T+j) − f(T) ≤ f(S+j) − f(S)` checked for
/// `T = S + i`, which is equivalent to the full `S ⊆ T` family by telescoping.
/// Scan order: `S` lexicographic, then `j`, then `i`.
fn submodular_scan(t: &Table, tol: f64) -> Verdict {
    let n = t.n;
    let v = |s: Subset| t.values[s.0 as usize];
    for s in lex_subsets(n) {
        for j in (0..n).filter(|&j| !s.contains(j)) {
            let rhs = v(s.with(j)) - v(s);
            for i in (0..n).filter(|&i| i != j && !s.contains(i)) {
                let tt = s.with(i);
                let lhs = v(tt.with(j)) - v(tt);
                if lhs > rhs + tol {
                    return Verdict::Fail(Witness { sets: vec![s, tt, Subset::singleton(j)], lhs, rhs });
                }
            }
        }
    }
    Verdict::Pass
}

pub fn check_monotone<O: ValueOracle>(f: &O) -> Result<Verdict> {
    let n = f.ground_size();
    Error::check_size("monotonicity check", n, CHECK_CAP)?;
    let t = tabulate(f)?;
    let tol = default_tol(&t);
    let v = |s: Subset| t.values[s.0 as usize];
    for s in lex_subsets(n) {
        for j in (0..n).filter(|&j| !s.contains(j)) {
            if v(s.with(j)) < v(s) - tol {
                return Ok(Verdict::Fail(Witness {
                    sets: vec![s, s.with(j)],
                    lhs: v(s.with(j)),
                    rhs: v(s),
                }));
            }
        }
    }
    Ok(Verdict::Pass)
}

/// Random local checks for ground sets beyond the exhaustive cap.
pub fn spot_check_submodular<O: ValueOracle>(f: &O, samples: u64, seed: u64) -> Result<Verdict> {
    let n = f.ground_size();
    if n < 2 {
        return Ok(Verdict::Pass);
    }
    for k in 0..samples {
        let mut r = rng::stream(seed, k);
        let mut s = Subset(r.random::<u64>() & Subset::full(n).0);
        let i = r.random_range(0..n);
        let mut j = r.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        s = s.without(i).without(j);
        let rhs = f.value(s.with(j)) - f.value(s);
        let lhs = f.value(s.with(i).with(j)) - f.value(s.with(i));
        if lhs > rhs + 1e-12 * (1.0 + rhs.abs()) {
            return Ok(Verdict::Fail(Witness { sets: vec![s, s.with(i), Subset::singleton(j)], lhs, rhs }));
        }
    }
    Ok(Verdict::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn k2() -> SetFunction {
        SetFunction::cut(2, vec![(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn directed_cut_optimum_from_the_hard_instance() {
        let k = 4;
        let f = SetFunction::directed_cut(2 * k, (0..k).map(|i| (i, k + i, 1.0)).collect()).unwrap();
        let s = Subset::from_indices(std::iter::once(0).chain(k + 1..2 * k));
        assert_eq!(f.eval(s), 1.0);
        assert_eq!(f.bound(), k as f64);
    }

    #[test]
    fn small_values() {
        assert_eq!(k2().eval(Subset::EMPTY), 0.0);
        assert_eq!(k2().bound(), 1.0);
        let c = SetFunction::coverage(&[vec![1, 2], vec![2, 3]], None).unwrap();
        assert_eq!(c.eval(Subset::full(2)), 3.0);
        assert_eq!(c.bound(), 3.0);
    }

    #[test]
    fn table_witness_matches_hand_computation() {
        let f = SetFunction::table(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let w = check_submodular(&f).unwrap();
        let w = w.witness().expect("supermodular table");
        assert_eq!(w.sets, vec![Subset::EMPTY, Subset::from_indices([1]), Subset::from_indices([0])]);
        assert_eq!((w.lhs, w.rhs), (1.0, 0.0));
    }

    #[test]
    fn monotonicity() {
        let w = check_monotone(&k2()).unwrap();
        assert_eq!(w.witness().unwrap().sets, vec![Subset::from_indices([0]), Subset::full(2)]);
        assert!(check_monotone(&SetFunction::threshold(3, 1).unwrap()).unwrap().is_pass());
        let zero = SetFunction::table(3, vec![0.0; 8]).unwrap();
        assert!(check_monotone(&zero).unwrap().is_pass());
        assert!(check_submodular(&SetFunction::threshold(3, 1).unwrap()).unwrap().is_pass());
    }

    #[test]
    fn construction_errors() {
        assert!(SetFunction::table(1, vec![0.0, -1.0]).is_err());
        assert!(matches!(SetFunction::table(25, vec![]), Err(Error::SizeCap { .. })));
        assert!(SetFunction::cut(2, vec![(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let j = r#"{"n":3,"kind":"coverage","payload":{"sets":[[0],[0,1],[2]]}}"#;
        let f = parse_family(j).unwrap();
        assert_eq!(f.eval(Subset::full(3)), 3.0);
        let back = build_family(&f.to_descriptor()).unwrap();
        assert_eq!(back, f);
        let k = parse_family(r#"{"n":2,"kind":"cut","payload":{"edges":[[0,1]]}}"#).unwrap();
        assert_eq!(k, k2());
        assert!(parse_family(r#"{"n":2,"kind":"nope"}"#).is_err());
    }
}
