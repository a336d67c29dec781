//! The small instances with known answers, each checked against the
//! published number or an independent computation.

use subgap::brute::{brute_opt, Feasibility};
use subgap::extension::{lovasz_eval, multilinear_exact, multilinear_sample, partial_derivative_exact, threshold_set};
use subgap::localsearch::{find_base_start, local_search_bases, local_search_independence, SearchConfig};
use subgap::matroid::Matroid;
use subgap::pipage::{adjust, hit_constraint, pipage_round};
use subgap::setfn::{check_monotone, check_submodular};
use subgap::symmetry::{bundled, check_strong_symmetry, symmetrize, symmetry_gap, GapOptions, PermGroup};
use subgap::{Point, Rational, SetFunction, Subset, ValueOracle};

fn r(p: i128, q: i128) -> Rational {
    Rational::new(p, q)
}

fn set(ix: &[usize]) -> Subset {
    Subset::from_indices(ix.iter().copied())
}

fn rpoint(c: &[(i128, i128)]) -> Point<Rational> {
    Point::new(c.iter().map(|&(p, q)| r(p, q)).collect()).unwrap()
}

/// `Σ_S f(S) Π_{i∈S} x_i Π_{i∉S} (1 − x_i)`, summed mask by mask.
fn multilinear_by_masks(f: &SetFunction, x: &[f64]) -> f64 {
    let n = x.len();
    (0..1u64 << n)
        .map(|mask| {
            let p: f64 = (0..n).map(|i| if mask >> i & 1 == 1 { x[i] } else { 1.0 - x[i] }).product();
            p * f.eval(Subset(mask))
        })
        .sum()
}

/// `∫₀¹ f({i: x_i > λ}) dλ`, one midpoint per interval between breakpoints.
fn lovasz_by_intervals(f: &SetFunction, x: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = x.iter().copied().chain([0.0, 1.0]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0]) * f.eval(Subset::from_indices((0..x.len()).filter(|&i| x[i] > mid)))
        })
        .sum()
}

fn k2() -> SetFunction {
    SetFunction::cut(2, vec![(0, 1, 1.0)]).unwrap()
}

// ---- set functions -------------------------------------------------------

#[test]
fn directed_cut_of_disjoint_arcs_has_value_one_on_the_optimal_set() {
    for k in 2..=6 {
        let f = SetFunction::directed_cut(2 * k, (0..k).map(|i| (i, k + i, 1.0)).collect()).unwrap();
        let s = Subset::from_indices(std::iter::once(0).chain(k + 1..2 * k));
        assert_eq!(f.eval(s), 1.0);
    }
}

#[test]
fn coverage_counts_the_union() {
    let f = SetFunction::coverage(&[vec![1, 2], vec![2, 3]], None).unwrap();
    assert_eq!(f.eval(set(&[0, 1])), 3.0);
    assert_eq!(k2().eval(Subset::EMPTY), 0.0);
}

#[test]
fn submodularity_witness_on_a_supermodular_table() {
    let f = SetFunction::table(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
    let w = check_submodular(&f).unwrap();
    let w = w.witness().expect("not submodular");
    assert_eq!(w.sets[0], Subset::EMPTY);
    assert_eq!(w.sets[1], set(&[1]));
    assert!(check_submodular(&SetFunction::threshold(3, 1).unwrap()).unwrap().is_pass());
}

#[test]
fn k2_cut_is_not_monotone() {
    let v = check_monotone(&k2()).unwrap();
    let w = v.witness().expect("the cut drops from {1} to X");
    assert_eq!(k2().eval(w.sets[0]), 1.0);
    assert_eq!(k2().eval(w.sets[1]), 0.0);
    assert!(check_monotone(&SetFunction::threshold(4, 1).unwrap()).unwrap().is_pass());
}

// ---- matroids ------------------------------------------------------------

#[test]
fn ranks_and_bases() {
    assert_eq!(Matroid::uniform(4, 2).unwrap().rank(set(&[0, 1, 2])), 2);
    let p = Matroid::partition(4, vec![vec![0, 1], vec![2, 3]], vec![1, 1]).unwrap();
    assert_eq!(p.rank(set(&[0, 1])), 1);
    assert_eq!(Matroid::uniform(4, 2).unwrap().enumerate_bases().unwrap().len(), 6);
    // 2 choices in each block.
    assert_eq!(p.enumerate_bases().unwrap().len(), 4);
    assert_eq!(Matroid::free(3).unwrap().enumerate_bases().unwrap(), vec![set(&[0, 1, 2])]);
}

#[test]
fn packing_numbers() {
    let u = Matroid::uniform(4, 2).unwrap();
    let cert = u.fractional_base_packing().unwrap();
    assert_eq!(cert.nu, r(2, 1));
    cert.validate(&u).unwrap();
    for k in 2..=5i128 {
        let inst = bundled(&format!("dircut-bases:{k}")).unwrap();
        let Feasibility::Bases(m) = &inst.feasibility else { panic!("base instance") };
        assert_eq!(m.fractional_base_packing().unwrap().nu, r(k, k - 1));
        assert_eq!(m.fractional_base_packing_lp().unwrap().nu, r(k, k - 1));
    }
    assert_eq!(Matroid::free(3).unwrap().fractional_base_packing().unwrap().nu, r(1, 1));
}

#[test]
fn truncated_polytope_membership() {
    let half = rpoint(&[(1, 2); 4]);
    assert!(Matroid::uniform(4, 2).unwrap().in_polytope(&half, &r(1, 2), true));
    let x = rpoint(&[(3, 5), (0, 1)]);
    assert!(!Matroid::free(2).unwrap().in_polytope(&x, &r(1, 2), false));
    let inst = bundled("dircut-bases:2").unwrap();
    let Feasibility::Bases(m) = &inst.feasibility else { panic!("base instance") };
    assert!(m.in_polytope(&half, &r(1, 2), true));
}

// ---- extensions ----------------------------------------------------------

#[test]
fn multilinear_values() {
    let half = Point::constant(2, 0.5);
    assert_eq!(multilinear_exact(&k2(), &half).unwrap(), 0.5);
    assert_eq!(multilinear_exact(&k2(), &rpoint(&[(1, 2), (1, 2)])).unwrap(), r(1, 2));
    let f = bundled("dircut-bases:2").unwrap().f;
    let x = [0.5; 4];
    assert_eq!(multilinear_exact(&f, &Point::constant(4, 0.5)).unwrap(), 0.5);
    assert_eq!(multilinear_by_masks(&f, &x), 0.5);
}

#[test]
fn sampled_multilinear_brackets_the_exact_value() {
    let est = multilinear_sample(&k2(), &Point::constant(2, 0.5), 100_000, 7).unwrap();
    assert!((est.mean - 0.5).abs() <= 5.0 * est.stderr);
    let vertex = multilinear_sample(&k2(), &Point::new(vec![1.0, 0.0]).unwrap(), 1000, 7).unwrap();
    assert_eq!((vertex.mean, vertex.stderr), (1.0, 0.0));
    let constant = SetFunction::table(2, vec![2.5; 4]).unwrap();
    assert_eq!(multilinear_sample(&constant, &Point::constant(2, 0.3), 1000, 1).unwrap().mean, 2.5);
}

#[test]
fn k2_partials() {
    // F = x₁(1 − x₂) + x₂(1 − x₁), so ∂F/∂x₁ = 1 − 2x₂.
    for (x2, want) in [(r(1, 2), r(0, 1)), (r(0, 1), r(1, 1)), (r(1, 3), r(1, 3))] {
        let x = Point::new(vec![r(1, 5), x2]).unwrap();
        assert_eq!(partial_derivative_exact(&k2(), &x, 0).unwrap(), want);
    }
}

#[test]
fn lovasz_values() {
    assert_eq!(lovasz_eval(&k2(), &Point::constant(2, 0.5)), 0.0);
    let f = SetFunction::threshold(2, 1).unwrap();
    let x = Point::new(vec![0.25, 0.75]).unwrap();
    assert_eq!(lovasz_eval(&f, &x), 0.75);
    assert_eq!(lovasz_by_intervals(&f, x.coords()), 0.75);
    assert_eq!(threshold_set(&Point::new(vec![1.0, 1.0, 0.0]).unwrap(), 0.37), set(&[0, 1]));
}

// ---- local search --------------------------------------------------------

#[test]
fn k2_search_over_the_free_matroid() {
    let sol = local_search_independence(&k2(), &Matroid::free(2).unwrap(), &SearchConfig::new(r(1, 2)).unwrap()).unwrap();
    assert_eq!(sol.value, 0.5);
    assert!(sol.x == rpoint(&[(1, 2), (0, 1)]) || sol.x == rpoint(&[(0, 1), (1, 2)]));
    assert!(sol.converged);
}

#[test]
fn bases_search_on_two_arcs() {
    let inst = bundled("dircut-bases:2").unwrap();
    let Feasibility::Bases(m) = &inst.feasibility else { panic!("base instance") };
    let opt = brute_opt(&inst.f, &inst.feasibility).unwrap().best_value;
    assert_eq!(opt, 1.0);
    let sol = local_search_bases(&inst.f, m, &SearchConfig::new(r(1, 2)).unwrap()).unwrap();
    assert!(sol.value >= 0.25 * opt);
    let start = find_base_start(m, r(1, 2)).unwrap();
    assert_eq!(start.x, rpoint(&[(1, 2); 4]));
    assert_eq!(start.bases.len(), 2);
}

#[test]
fn base_start_on_uniform_and_at_t_one() {
    let u = Matroid::uniform(4, 2).unwrap();
    let start = find_base_start(&u, r(1, 2)).unwrap();
    assert_eq!(start.x, rpoint(&[(1, 2); 4]));
    assert_eq!(start.bases[0].intersection(start.bases[1]), Subset::EMPTY);
    let one = find_base_start(&u, r(1, 1)).unwrap();
    assert!(one.x.is_integral());
    assert_eq!(one.x.support_of_ones().len(), 2);
}

// ---- pipage --------------------------------------------------------------

#[test]
fn hit_constraint_examples() {
    let u = Matroid::uniform(2, 1).unwrap();
    let (y, a) = hit_constraint(&u, &[r(1, 2), r(1, 2)], 0, 1).unwrap();
    assert_eq!(y, vec![r(1, 1), r(0, 1)]);
    assert_eq!(a, set(&[0]));
    let (y, a) = hit_constraint(&u, &[r(1, 1), r(0, 1)], 0, 1).unwrap();
    assert_eq!((y, a), (vec![r(1, 1), r(0, 1)], set(&[1])));
    let p = Matroid::partition(3, vec![vec![0, 1], vec![2]], vec![1, 1]).unwrap();
    let (y, a) = hit_constraint(&p, &[r(1, 2), r(1, 2), r(1, 1)], 0, 1).unwrap();
    assert_eq!(y, vec![r(1, 1), r(0, 1), r(1, 1)]);
    assert_eq!(a, set(&[0]));
}

#[test]
fn pipage_on_uniform_two_one_is_a_fair_coin() {
    let u = Matroid::uniform(2, 1).unwrap();
    let y = rpoint(&[(1, 2), (1, 2)]);
    let firsts = (0..2000).filter(|&s| pipage_round(&u, &y, s).unwrap().set == set(&[0])).count();
    assert!((firsts as f64 / 2000.0 - 0.5).abs() < 4.0 * (0.25f64 / 2000.0).sqrt());
    let int = rpoint(&[(1, 1), (0, 1)]);
    assert_eq!(pipage_round(&u, &int, 3).unwrap().set, set(&[0]));
}

#[test]
fn adjust_on_a_single_free_element() {
    let m = Matroid::free(1).unwrap();
    let x = rpoint(&[(1, 2)]);
    let mut kept = 0;
    for s in 0..2000 {
        let (_, y, branches) = adjust(&m, &x, s).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].p, r(1, 2));
        if y[0] == r(1, 1) {
            kept += 1;
        }
    }
    assert!((kept as f64 / 2000.0 - 0.5).abs() < 0.05);
    let base = rpoint(&[(1, 1)]);
    assert!(adjust(&m, &base, 0).unwrap().2.is_empty());
}

// ---- symmetry ------------------------------------------------------------

#[test]
fn symmetrization_examples() {
    let swap = PermGroup::symmetric(2).unwrap();
    assert_eq!(symmetrize(&rpoint(&[(1, 1), (0, 1)]), &swap), rpoint(&[(1, 2), (1, 2)]));
    let c = rpoint(&[(1, 3); 4]);
    assert_eq!(symmetrize(&c, &PermGroup::cyclic(4).unwrap()), c);
    for k in 2..=5usize {
        let inst = bundled(&format!("dircut-bases:{k}")).unwrap();
        let s = Subset::from_indices(std::iter::once(0).chain(k + 1..2 * k));
        let xbar = symmetrize(&Point::<Rational>::indicator(2 * k, s), &inst.group);
        let want: Vec<Rational> = (0..2 * k).map(|i| if i < k { r(1, k as i128) } else { r(k as i128 - 1, k as i128) }).collect();
        assert_eq!(xbar.coords(), &want[..]);
    }
}

#[test]
fn strong_symmetry_examples() {
    let card = bundled("cardinality:4").unwrap();
    assert!(check_strong_symmetry(&card.feasibility, &card.group).unwrap().is_pass());
    let cyc = bundled("cyclic4").unwrap();
    let w = check_strong_symmetry(&cyc.feasibility, &cyc.group).unwrap();
    let w = w.witness().expect("the 4-cycle family is not strongly symmetric");
    assert_eq!(w.sets, vec![set(&[0, 1]), set(&[0, 2])]);
    let trivial = PermGroup::trivial(4).unwrap();
    assert!(check_strong_symmetry(&cyc.feasibility, &trivial).unwrap().is_pass());
}

#[test]
fn gaps_match_the_closed_forms() {
    let opts = GapOptions::default();
    let k2 = symmetry_gap(&bundled("k2cut").unwrap(), &opts).unwrap();
    assert_eq!((k2.opt, k2.opt_bar, k2.gamma), (1.0, 0.5, 0.5));
    for k in 1..=6 {
        let g = symmetry_gap(&bundled(&format!("cardinality:{k}")).unwrap(), &opts).unwrap();
        let want = 1.0 - (1.0 - 1.0 / k as f64).powi(k);
        assert!((g.gamma - want).abs() < 1e-12, "k = {k}: {} vs {want}", g.gamma);
        // Independent check: F at the uniform point.
        let f = SetFunction::threshold(k as usize, 1).unwrap();
        assert!((multilinear_by_masks(&f, &vec![1.0 / k as f64; k as usize]) - want).abs() < 1e-12);
    }
    for k in 2..=5 {
        let inst = bundled(&format!("dircut-bases:{k}")).unwrap();
        let g = symmetry_gap(&inst, &opts).unwrap();
        assert!((g.gamma - 1.0 / k as f64).abs() < 1e-12);
        let x: Vec<f64> = (0..2 * k).map(|i| if i < k { 1.0 / k as f64 } else { 1.0 - 1.0 / k as f64 }).collect();
        assert!((multilinear_by_masks(&inst.f, &x) - 1.0 / k as f64).abs() < 1e-12);
    }
}

#[test]
fn brute_optimum_of_k2_is_one() {
    let b = brute_opt(&k2(), &Feasibility::Unconstrained { n: 2 }).unwrap();
    assert_eq!(b.best_value, 1.0);
    assert_eq!(b.best_set, set(&[0]));
    assert_eq!(k2().ground_size(), 2);
}
