//! Permutation groups, symmetrization, strong symmetry and the symmetry gap.

use std::collections::{HashMap, HashSet, VecDeque};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::brute::{brute_opt, Feasibility};
use crate::error::{Error, Result};
use crate::extension::multilinear_exact;
use crate::lp::convex_combination;
use crate::matroid::{Matroid, MatroidSpec};
use crate::point::Point;
use crate::scalar::{format_rational, Rational, Scalar};
use crate::setfn::{build_family, FamilyDescriptor, SetFunction, ValueOracle, Verdict, Witness, CHECK_CAP};
use crate::subset::{lex_subsets, Subset};

pub const GROUP_CAP: usize = 10_000;
/// Strong symmetry scans all `2^n` sets.
pub const STRONG_CAP: usize = 12;

pub type Perm = Vec<usize>;

/// A finite permutation group on `0..n`, enumerated by closure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PermGroup {
    n: usize,
    generators: Vec<Perm>,
    elements: Vec<Perm>,
    orbits: Vec<Subset>,
}

impl PermGroup {
    pub fn new(n: usize, generators: Vec<Perm>) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::invalid(format!("group degree {n} not in 1..=64")));
        }
        for g in &generators {
            let mut seen = vec![false; n];
            if g.len() != n || g.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::invalid(format!("{g:?} is not a permutation of 0..{n}")));
            }
        }
        let id: Perm = (0..n).collect();
        let mut elements = vec![id.clone()];
        let mut seen: HashSet<Perm> = HashSet::from([id.clone()]);
        let mut queue = VecDeque::from([id]);
        while let Some(p) = queue.pop_front() {
            for g in &generators {
                let c: Perm = p.iter().map(|&i| g[i]).collect();
                if seen.insert(c.clone()) {
                    if elements.len() == GROUP_CAP {
                        return Err(Error::SizeCap { what: "group closure (supply orbits directly)", size: GROUP_CAP + 1, cap: GROUP_CAP });
                    }
                    elements.push(c.clone());
                    queue.push_back(c);
                }
            }
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for g in &generators {
            for (i, &j) in g.iter().enumerate() {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut by_root: Vec<(usize, Subset)> = Vec::new();
        for i in 0..n {
            let r = root(&mut parent, i);
            match by_root.iter_mut().find(|(k, _)| *k == r) {
                Some((_, s)) => *s = s.with(i),
                None => by_root.push((r, Subset::singleton(i))),
            }
        }
        Ok(PermGroup { n, generators, elements, orbits: by_root.into_iter().map(|(_, s)| s).collect() })
    }

    pub fn trivial(n: usize) -> Result<Self> {
        Self::new(n, vec![])
    }

    /// All permutations of `0..n`, from a transposition and an `n`-cycle.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n <= 1 {
            return Self::trivial(n);
        }
        let mut swap: Perm = (0..n).collect();
        swap.swap(0, 1);
        Self::new(n, vec![swap, cycle(n)])
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        Self::new(n, vec![cycle(n)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[Perm] {
        &self.generators
    }

    pub fn elements(&self) -> &[Perm] {
        &self.elements
    }

    /// Orbits ordered by smallest element.
    pub fn orbits(&self) -> &[Subset] {
        &self.orbits
    }

    pub fn orbit_of(&self, i: usize) -> Subset {
        *self.orbits.iter().find(|o| o.contains(i)).expect("every element has an orbit")
    }

    pub fn is_transitive(&self) -> bool {
        self.orbits.len() == 1
    }

    pub fn to_spec(&self) -> GroupSpec {
        GroupSpec { generators: self.generators.clone() }
    }
}

fn cycle(n: usize) -> Perm {
    (0..n).map(|i| (i + 1) % n).collect()
}

/// `σ(S) = {σ(i) : i ∈ S}`.
pub fn apply_set(sigma: &[usize], s: Subset) -> Subset {
    Subset::from_indices(s.iter().map(|i| sigma[i]))
}

/// `σ(x)` with `σ(x)_{σ(i)} = x_i`.
pub fn apply_point<T: Clone>(sigma: &[usize], x: &[T]) -> Vec<T> {
    let mut out = x.to_vec();
    for (i, v) in x.iter().enumerate() {
        out[sigma[i]] = v.clone();
    }
    out
}

/// `x̄ = E_σ[σ(x)]`, averaged over every group element.
pub fn symmetrize<T: Scalar>(x: &Point<T>, g: &PermGroup) -> Point<T> {
    assert_eq!(x.len(), g.n(), "point dimension differs from the group degree");
    let mut acc = vec![T::zero(); g.n()];
    for sigma in g.elements() {
        for (i, v) in x.coords().iter().enumerate() {
            acc[sigma[i]] = acc[sigma[i]].clone() + v.clone();
        }
    }
    let k = T::from_i64(g.order() as i64);
    Point::from_vec_unchecked(acc.into_iter().map(|v| v / k.clone()).collect())
}

/// `|S ∩ O|` for every orbit `O`. Two sets have the same symmetrized
/// indicator exactly when these counts agree, since `1̄_S` is constant
/// `|S ∩ O|/|O|` on each orbit.
pub fn orbit_counts(s: Subset, g: &PermGroup) -> Vec<usize> {
    g.orbits().iter().map(|o| s.intersection(*o).len()).collect()
}

pub fn symmetrized_indicator(s: Subset, g: &PermGroup) -> Point<Rational> {
    let mut x = vec![Rational::zero(); g.n()];
    for o in g.orbits() {
        let v = Rational::new(s.intersection(*o).len() as i128, o.len() as i128);
        o.iter().for_each(|i| x[i] = v);
    }
    Point::from_vec_unchecked(x)
}

/// `f(σ(S)) = f(S)` for every generator and set.
pub fn check_invariance<O: ValueOracle>(f: &O, g: &PermGroup) -> Result<Verdict> {
    let n = f.ground_size();
    if n != g.n() {
        return Err(Error::invalid("function and group have different ground sets"));
    }
    Error::check_size("invariance check", n, CHECK_CAP)?;
    for sigma in g.generators() {
        for s in lex_subsets(n) {
            let t = apply_set(sigma, s);
            let (a, b) = (f.value(s), f.value(t));
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Ok(Verdict::Fail(Witness { sets: vec![s, t], lhs: a, rhs: b }));
            }
        }
    }
    Ok(Verdict::Pass)
}

pub fn check_feasibility_invariance(feas: &Feasibility, g: &PermGroup) -> Result<Verdict> {
    if feas.n() != g.n() {
        return Err(Error::invalid("feasibility and group have different ground sets"));
    }
    let sets = feas.feasible_sets()?;
    for sigma in g.generators() {
        for &s in &sets {
            let t = apply_set(sigma, s);
            if !feas.contains(t) {
                return Ok(Verdict::Fail(Witness { sets: vec![s, t], lhs: 1.0, rhs: 0.0 }));
            }
        }
    }
    Ok(Verdict::Pass)
}

/// Feasibility depends only on the symmetrized indicator. Sets are scanned
/// in lexicographic order; the witness is the first set of a class followed
/// by the first later set of that class whose feasibility differs, with
/// `lhs`/`rhs` their membership as 1/0.
pub fn check_strong_symmetry(feas: &Feasibility, g: &PermGroup) -> Result<Verdict> {
    let n = feas.n();
    if n != g.n() {
        return Err(Error::invalid("feasibility and group have different ground sets"));
    }
    Error::check_size("strong symmetry check", n, STRONG_CAP)?;
    let mut first: HashMap<Vec<usize>, (Subset, bool)> = HashMap::new();
    for s in lex_subsets(n) {
        let inside = feas.contains(s);
        let (rep, rep_in) = *first.entry(orbit_counts(s, g)).or_insert((s, inside));
        if rep_in != inside {
            return Ok(Verdict::Fail(Witness {
                sets: vec![rep, s],
                lhs: rep_in as u8 as f64,
                rhs: inside as u8 as f64,
            }));
        }
    }
    Ok(Verdict::Pass)
}

/// Exact gap values known in closed form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactGap {
    #[serde(with = "crate::scalar::serde_rational")]
    pub opt: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub opt_bar: Rational,
}

#[derive(Clone, Debug)]
pub struct SymmetricInstance {
    pub name: String,
    pub f: SetFunction,
    pub feasibility: Feasibility,
    pub group: PermGroup,
    pub exact: Option<ExactGap>,
}

impl SymmetricInstance {
    /// Checks that `f` and `𝓕` are invariant under the generators.
    pub fn new(name: impl Into<String>, f: SetFunction, feasibility: Feasibility, group: PermGroup) -> Result<Self> {
        if f.n() != feasibility.n() || f.n() != group.n() {
            return Err(Error::invalid("function, feasibility and group must share the ground set"));
        }
        if let Verdict::Fail(w) = check_invariance(&f, &group)? {
            return Err(Error::NotInvariant(w));
        }
        if let Verdict::Fail(w) = check_feasibility_invariance(&feasibility, &group)? {
            return Err(Error::NotInvariant(w));
        }
        Ok(SymmetricInstance { name: name.into(), f, feasibility, group, exact: None })
    }

    pub fn n(&self) -> usize {
        self.f.n()
    }
}

pub const BUNDLED: &[&str] = &["k2cut", "cardinality:K", "dircut-bases:K", "cyclic4"];

fn rpow(x: Rational, k: u32) -> Rational {
    (0..k).fold(Rational::one(), |acc, _| acc * x)
}

/// The worked instances: Max Cut on `K₂`; `min{|S|,1}` under `|S| ≤ 1` on
/// `k` elements; directed cut on `k` arcs `aᵢ → bᵢ` over the bases of the
/// partition matroid taking one `a` and `k − 1` of the `b`s; and the
/// non-strongly-symmetric 4-cycle family.
pub fn bundled(name: &str) -> Result<SymmetricInstance> {
    let (kind, k) = match name.split_once(':') {
        Some((kind, k)) => (kind, Some(k.parse::<usize>().map_err(|_| Error::invalid(format!("bad size in {name}")))?)),
        None => (name, None),
    };
    let need_k = |lo: usize| match k {
        Some(k) if (lo..=7).contains(&k) => Ok(k),
        _ => Err(Error::invalid(format!("{kind} needs a size between {lo} and 7, e.g. {kind}:3"))),
    };
    match kind {
        "k2cut" => {
            let f = SetFunction::cut(2, vec![(0, 1, 1.0)])?;
            let mut inst = SymmetricInstance::new(name, f, Feasibility::Unconstrained { n: 2 }, PermGroup::symmetric(2)?)?;
            inst.exact = Some(ExactGap { opt: Rational::one(), opt_bar: Rational::new(1, 2) });
            Ok(inst)
        }
        "cardinality" => {
            let k = need_k(1)?;
            let f = SetFunction::threshold(k, 1)?;
            let mut inst =
                SymmetricInstance::new(name, f, Feasibility::Independence(Matroid::uniform(k, 1)?), PermGroup::symmetric(k)?)?;
            let opt_bar = Rational::one() - rpow(Rational::one() - Rational::new(1, k as i128), k as u32);
            inst.exact = Some(ExactGap { opt: Rational::one(), opt_bar });
            Ok(inst)
        }
        "dircut-bases" => {
            let k = need_k(2)?;
            let f = SetFunction::directed_cut(2 * k, (0..k).map(|i| (i, k + i, 1.0)).collect())?;
            let m = Matroid::partition(2 * k, vec![(0..k).collect(), (k..2 * k).collect()], vec![1, k - 1])?;
            let mut gens = Vec::new();
            if k >= 2 {
                let mut swap: Perm = (0..2 * k).collect();
                swap.swap(0, 1);
                swap.swap(k, k + 1);
                let rot: Perm = (0..2 * k).map(|i| if i < k { (i + 1) % k } else { k + (i - k + 1) % k }).collect();
                gens = vec![swap, rot];
            }
            let mut inst = SymmetricInstance::new(name, f, Feasibility::Bases(m), PermGroup::new(2 * k, gens)?)?;
            inst.exact = Some(ExactGap { opt: Rational::one(), opt_bar: Rational::new(1, k as i128) });
            Ok(inst)
        }
        "cyclic4" => {
            let f = SetFunction::cut(4, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])?;
            let sets = [[0, 1], [1, 2], [2, 3], [3, 0]].iter().map(|p| Subset::from_indices(*p)).collect();
            SymmetricInstance::new(name, f, Feasibility::family(4, sets)?, PermGroup::cyclic(4)?)
        }
        _ => Err(Error::invalid(format!("unknown bundled instance {name}; known: {}", BUNDLED.join(", ")))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupSpec {
    pub generators: Vec<Perm>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FeasibilitySpec {
    Unconstrained,
    Independence { matroid: MatroidSpec },
    Bases { matroid: MatroidSpec },
    Family { sets: Vec<Subset> },
}

/// JSON instance file: `{"function": {...}, "feasibility": {...}, "group": {"generators": [...]}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub function: FamilyDescriptor,
    pub feasibility: FeasibilitySpec,
    #[serde(default)]
    pub group: Option<GroupSpec>,
}

impl InstanceSpec {
    pub fn build(self) -> Result<SymmetricInstance> {
        let f = build_family(&self.function)?;
        let n = f.n();
        let feas = match self.feasibility {
            FeasibilitySpec::Unconstrained => Feasibility::Unconstrained { n },
            FeasibilitySpec::Independence { matroid } => Feasibility::Independence(matroid.build()?),
            FeasibilitySpec::Bases { matroid } => Feasibility::Bases(matroid.build()?),
            FeasibilitySpec::Family { sets } => Feasibility::family(n, sets)?,
        };
        let group = match self.group {
            Some(g) => PermGroup::new(n, g.generators)?,
            None => PermGroup::trivial(n)?,
        };
        SymmetricInstance::new(self.name.unwrap_or_else(|| "instance".into()), f, feas, group)
    }
}

pub fn parse_instance(json: &str) -> Result<SymmetricInstance> {
    serde_json::from_str::<InstanceSpec>(json)?.build()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapOptions {
    pub grid_tol: f64,
    /// Grid points per search (split across axes).
    pub grid_points: usize,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions { grid_tol: 1e-9, grid_points: 1001 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethod {
    ClosedForm,
    /// Every feasible set has the same symmetrization.
    UniquePoint,
    Grid,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapResult {
    pub opt: f64,
    pub opt_set: Subset,
    pub opt_bar: f64,
    pub gamma: f64,
    pub opt_bar_point: Vec<f64>,
    pub method: GapMethod,
    /// The grid or unique-point value, also reported when a closed form wins.
    pub numeric_opt_bar: f64,
    /// Dimension of the symmetrized polytope.
    pub dimension: usize,
    /// Continuous optimum over `P(𝓕)` for explicit families, where it may
    /// exceed the discrete one.
    pub opt_continuous: Option<f64>,
    pub discrepancy: bool,
    pub exact: Option<ExactGap>,
}

/// `(OPT, OPT_bar, γ)`. `OPT` is the discrete optimum; `OPT_bar` maximizes
/// `F` over the symmetrized polytope `conv{1̄_S : S ∈ 𝓕}`.
pub fn symmetry_gap(inst: &SymmetricInstance, opts: &GapOptions) -> Result<GapResult> {
    if let Verdict::Fail(w) = check_strong_symmetry(&inst.feasibility, &inst.group)? {
        return Err(Error::NotStronglySymmetric(w));
    }
    let f = &inst.f;
    let best = brute_opt(f, &inst.feasibility)?;
    let mut seen = HashSet::new();
    let mut verts: Vec<Vec<Rational>> = Vec::new();
    for s in inst.feasibility.feasible_sets()? {
        if seen.insert(orbit_counts(s, &inst.group)) {
            verts.push(symmetrized_indicator(s, &inst.group).into_coords());
        }
    }
    let (numeric, point, dimension) = optimize_over_hull(f, &verts, opts)?;
    let (opt_bar, method) = match &inst.exact {
        Some(e) => (e.opt_bar.to_f64(), GapMethod::ClosedForm),
        None if dimension == 0 => (numeric, GapMethod::UniquePoint),
        None => (numeric, GapMethod::Grid),
    };
    let opt_continuous = match &inst.feasibility {
        Feasibility::Family { n, sets } => {
            let pts: Vec<Vec<f64>> = sets.iter().map(|s| Point::<f64>::indicator(*n, *s).into_coords()).collect();
            Some(vertex_line_search(f, &pts, opts)?)
        }
        _ => None,
    };
    let discrepancy = opt_continuous.is_some_and(|c| c > best.best_value + 1e-9 * best.best_value.abs().max(1.0));
    let opt = best.best_value;
    Ok(GapResult {
        opt,
        opt_set: best.best_set,
        opt_bar,
        gamma: if opt > 0.0 { opt_bar / opt } else { 1.0 },
        opt_bar_point: point,
        method,
        numeric_opt_bar: numeric,
        dimension,
        opt_continuous,
        discrepancy,
        exact: inst.exact.clone(),
    })
}

fn eval_f64<O: ValueOracle>(f: &O, x: &[f64]) -> Result<f64> {
    let clamped = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    multilinear_exact(f, &Point::from_vec_unchecked(clamped))
}

/// Affine coordinates of the hull: base point, RREF basis rows and pivots.
struct Affine {
    origin: Vec<Rational>,
    basis: Vec<Vec<Rational>>,
    pivots: Vec<usize>,
}

impl Affine {
    fn new(points: &[Vec<Rational>]) -> Self {
        let origin = points[0].clone();
        let n = origin.len();
        let mut rows: Vec<Vec<Rational>> =
            points[1..].iter().map(|p| p.iter().zip(&origin).map(|(a, b)| a - b).collect()).collect();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..n {
            let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
            rows.swap(r, p);
            let lead = rows[r][c];
            rows[r].iter_mut().for_each(|v| *v /= lead);
            for i in 0..rows.len() {
                if i != r && !rows[i][c].is_zero() {
                    let factor = rows[i][c];
                    let pivot_row = rows[r].clone();
                    rows[i].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= factor * p);
                }
            }
            pivots.push(c);
            r += 1;
        }
        rows.truncate(r);
        Affine { origin, basis: rows, pivots }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn coords(&self, p: &[Rational]) -> Vec<Rational> {
        self.pivots.iter().map(|&c| p[c] - self.origin[c]).collect()
    }

    fn point(&self, lambda: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.origin.iter().map(Scalar::to_f64).collect();
        for (l, row) in lambda.iter().zip(&self.basis) {
            x.iter_mut().zip(row).for_each(|(v, b)| *v += l * b.to_f64());
        }
        x
    }
}

fn golden<F: FnMut(f64) -> Result<f64>>(mut g: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (g(a)?, g(b)?);
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            (b, fb) = (a, fa);
            a = hi - r * (hi - lo);
            fa = g(a)?;
        } else {
            lo = a;
            (a, fa) = (b, fb);
            b = lo + r * (hi - lo);
            fb = g(b)?;
        }
    }
    let m = (lo + hi) / 2.0;
    Ok((m, g(m)?))
}

/// Grid point with the best value among an evenly spaced sample of
/// `[lo, hi]`, then golden-section on its neighbouring cells.
fn line_max<F: FnMut(f64) -> Result<f64>>(mut g: F, lo: f64, hi: f64, points: usize, tol: f64) -> Result<(f64, f64)> {
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, g(lo)?);
    for k in 1..points {
        let s = if k == points - 1 { hi } else { lo + step * k as f64 };
        let v = g(s)?;
        if v > best.1 {
            best = (s, v);
        }
    }
    if step <= 0.0 {
        return Ok(best);
    }
    let refined = golden(&mut g, (best.0 - step).max(lo), (best.0 + step).min(hi), tol)?;
    Ok(if refined.1 > best.1 { refined } else { best })
}

const LP_DENOM: i128 = 1 << 24;

fn to_grid_rational(v: f64) -> Rational {
    Rational::new((v * LP_DENOM as f64).round() as i128, LP_DENOM)
}

/// `max F` over `conv(points)`; returns the value, maximizer and dimension.
fn optimize_over_hull<O: ValueOracle>(f: &O, points: &[Vec<Rational>], opts: &GapOptions) -> Result<(f64, Vec<f64>, usize)> {
    let aff = Affine::new(points);
    let d = aff.dim();
    if d == 0 {
        let x: Vec<f64> = points[0].iter().map(Scalar::to_f64).collect();
        return Ok((eval_f64(f, &x)?, x, 0));
    }
    let lams: Vec<Vec<Rational>> = points.iter().map(|p| aff.coords(p)).collect();
    let lo: Vec<f64> = (0..d).map(|k| lams.iter().map(|l| l[k].to_f64()).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|k| lams.iter().map(|l| l[k].to_f64()).fold(f64::NEG_INFINITY, f64::max)).collect();
    if d == 1 {
        let (l, v) = line_max(|s| eval_f64(f, &aff.point(&[s])), lo[0], hi[0], opts.grid_points, opts.grid_tol)?;
        return Ok((v, aff.point(&[l]), 1));
    }
    let member = |lam: &[f64]| {
        let z: Vec<Rational> = lam.iter().map(|&v| to_grid_rational(v)).collect();
        convex_combination(&lams, &z).is_some()
    };
    let per_axis = ((opts.grid_points as f64).powf(1.0 / d as f64).ceil() as usize).max(3);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut idx = vec![0usize; d];
    loop {
        let lam: Vec<f64> = (0..d).map(|k| lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / (per_axis - 1) as f64).collect();
        if member(&lam) {
            let v = eval_f64(f, &aff.point(&lam))?;
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((lam, v));
            }
        }
        let Some(k) = (0..d).find(|&k| idx[k] + 1 < per_axis) else { break };
        idx[k] += 1;
        idx[..k].iter_mut().for_each(|v| *v = 0);
    }
    // Vertices are always members; seed with them if the grid missed all.
    for l in &lams {
        let lam: Vec<f64> = l.iter().map(Scalar::to_f64).collect();
        let v = eval_f64(f, &aff.point(&lam))?;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((lam, v));
        }
    }
    let (mut cur, mut val) = best.expect("hull has vertices");
    let tol = opts.grid_tol.max(1.0 / LP_DENOM as f64);
    for _ in 0..50 {
        let before = val;
        for k in 0..d {
            let edge = |target: f64, cur: &[f64]| {
                // Furthest member between cur and target along axis k.
                let (mut inside, mut outside) = (cur[k], target);
                let mut probe = cur.to_vec();
                probe[k] = target;
                if member(&probe) {
                    return target;
                }
                while (outside - inside).abs() > tol {
                    let mid = (inside + outside) / 2.0;
                    probe[k] = mid;
                    if member(&probe) {
                        inside = mid;
                    } else {
                        outside = mid;
                    }
                }
                inside
            };
            let (a, b) = (edge(lo[k], &cur), edge(hi[k], &cur));
            let mut probe = cur.clone();
            let (s, v) = line_max(
                |s| {
                    probe[k] = s;
                    eval_f64(f, &aff.point(&probe))
                },
                a,
                b,
                33,
                tol,
            )?;
            if v > val {
                cur[k] = s;
                val = v;
            }
        }
        if val - before <= opts.grid_tol {
            break;
        }
    }
    Ok((val, aff.point(&cur), d))
}

/// Local ascent on `conv(points)` by line searches towards each vertex,
/// starting from the best vertex.
fn vertex_line_search<O: ValueOracle>(f: &O, points: &[Vec<f64>], opts: &GapOptions) -> Result<f64> {
    let mut cur = points[0].clone();
    let mut val = eval_f64(f, &cur)?;
    for p in points {
        let v = eval_f64(f, p)?;
        if v > val {
            (cur, val) = (p.clone(), v);
        }
    }
    for _ in 0..100 {
        let before = val;
        for p in points {
            let seg = |s: f64| -> Vec<f64> { cur.iter().zip(p).map(|(a, b)| a + s * (b - a)).collect() };
            let (s, v) = line_max(|s| eval_f64(f, &seg(s)), 0.0, 1.0, 101, opts.grid_tol)?;
            if v > val {
                cur = seg(s);
                val = v;
            }
        }
        if val - before <= opts.grid_tol {
            break;
        }
    }
    Ok(val)
}

/// Human-readable `OPT_bar` for bundled instances.
pub fn describe_exact(e: &ExactGap) -> String {
    format!("OPT = {}, OPT_bar = {}, gamma = {}", format_rational(&e.opt), format_rational(&e.opt_bar), format_rational(&(e.opt_bar / e.opt)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    #[test]
    fn closure_sizes() {
        assert_eq!(PermGroup::symmetric(4).unwrap().order(), 24);
        assert_eq!(PermGroup::cyclic(5).unwrap().order(), 5);
        assert_eq!(PermGroup::trivial(3).unwrap().order(), 1);
        assert_eq!(bundled("dircut-bases:3").unwrap().group.order(), 6);
        assert!(matches!(PermGroup::symmetric(8), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn symmetrize_examples() {
        let g = PermGroup::symmetric(2).unwrap();
        let x = Point::from_vec_unchecked(vec![q(1, 1), q(0, 1)]);
        assert_eq!(symmetrize(&x, &g), Point::constant(2, q(1, 2)));
        let c = Point::constant(2, q(1, 3));
        assert_eq!(symmetrize(&c, &g), c);
        for k in 2..=4 {
            let inst = bundled(&format!("dircut-bases:{k}")).unwrap();
            let mut s = Subset::singleton(0);
            for b in k + 1..2 * k {
                s = s.with(b);
            }
            let xbar = symmetrize(&Point::<Rational>::indicator(2 * k, s), &inst.group);
            let mut expect = vec![q(1, k as i128); k];
            expect.extend(vec![q(k as i128 - 1, k as i128); k]);
            assert_eq!(xbar.into_coords(), expect);
        }
    }

    #[test]
    fn strong_symmetry_examples() {
        let card = Feasibility::Independence(Matroid::uniform(4, 2).unwrap());
        assert!(check_strong_symmetry(&card, &PermGroup::symmetric(4).unwrap()).unwrap().is_pass());
        let inst = bundled("cyclic4").unwrap();
        let w = check_strong_symmetry(&inst.feasibility, &inst.group).unwrap();
        assert_eq!(w.witness().unwrap().sets, vec![Subset::from_indices([0, 1]), Subset::from_indices([0, 2])]);
        assert!(check_strong_symmetry(&inst.feasibility, &PermGroup::trivial(4).unwrap()).unwrap().is_pass());
        assert!(matches!(symmetry_gap(&inst, &GapOptions::default()), Err(Error::NotStronglySymmetric(_))));
    }

    #[test]
    fn bundled_gaps() {
        let r = symmetry_gap(&bundled("k2cut").unwrap(), &GapOptions::default()).unwrap();
        assert_eq!((r.opt, r.opt_bar, r.gamma), (1.0, 0.5, 0.5));
        assert!((r.numeric_opt_bar - 0.5).abs() < 1e-9);
        let r = symmetry_gap(&bundled("cardinality:3").unwrap(), &GapOptions::default()).unwrap();
        assert_eq!(r.exact.as_ref().unwrap().opt_bar, q(19, 27));
        assert!((r.gamma - 19.0 / 27.0).abs() < 1e-12);
        assert!((r.numeric_opt_bar - 19.0 / 27.0).abs() < 1e-9);
        let r = symmetry_gap(&bundled("dircut-bases:2").unwrap(), &GapOptions::default()).unwrap();
        assert_eq!((r.opt, r.opt_bar, r.gamma), (1.0, 0.5, 0.5));
        assert_eq!(r.dimension, 0);
        assert!((r.numeric_opt_bar - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_grid() {
        // Two orbits {0,1} and {2,3}; cut across them.
        let f = SetFunction::cut(4, vec![(0, 2, 1.0), (1, 3, 1.0), (0, 3, 1.0), (1, 2, 1.0)]).unwrap();
        let g = PermGroup::new(4, vec![vec![1, 0, 2, 3], vec![0, 1, 3, 2]]).unwrap();
        let inst = SymmetricInstance::new("bip", f, Feasibility::Unconstrained { n: 4 }, g).unwrap();
        let r = symmetry_gap(&inst, &GapOptions::default()).unwrap();
        assert_eq!(r.dimension, 2);
        assert_eq!(r.opt, 4.0);
        assert!((r.opt_bar - 4.0).abs() < 1e-6, "{}", r.opt_bar);
    }

    #[test]
    fn instance_json() {
        let json = r#"{"function": {"n": 2, "kind": "cut", "payload": {"edges": [[0, 1]]}},
                       "feasibility": {"kind": "unconstrained"},
                       "group": {"generators": [[1, 0]]}}"#;
        let inst = parse_instance(json).unwrap();
        let r = symmetry_gap(&inst, &GapOptions::default()).unwrap();
        assert_eq!(r.method, GapMethod::Grid);
        assert!((r.opt_bar - 0.5).abs() < 1e-9);
        let bad = r#"{"function": {"n": 2, "kind": "directed-cut", "payload": {"arcs": [[0, 1]]}},
                      "feasibility": {"kind": "unconstrained"}, "group": {"generators": [[1, 0]]}}"#;
        assert!(matches!(parse_instance(bad), Err(Error::NotInvariant(_))));
    }
}
