mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use bnmap::fptas::{bucket_coords, reduce_group, reduce_pareto, Lattice};
use bnmap::io::{parse_network, parse_query, serialize_network, serialize_query};
use bnmap::map_exact::{dominates, prune, Candidate};
use bnmap::oracle::brute_force_map;
use bnmap::treedecomp::{binarize, build_decomposition, moralize, reroot, UndirectedGraph};
use bnmap::{
    annotate, decompose, solve_map_approx, Deadline, Error, Heuristic, LatticeMode, Network, RootChoice,
};
use common::{random_query, random_rational_net};

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    // a coarse grid makes equal coordinates common
    prop::collection::vec((0u32..6).prop_map(|x| x as f64 / 5.0), dim)
}

fn cands(dim: usize, max: usize) -> impl Strategy<Value = Vec<Candidate<f64>>> {
    prop::collection::vec(vec_strategy(dim), 1..max)
        .prop_map(|vs| vs.into_iter().enumerate().map(|(i, v)| Candidate::new(vec![], vec![i], v)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dominance_is_a_strict_partial_order(a in vec_strategy(3), b in vec_strategy(3), c in vec_strategy(3)) {
        let (a, b, c) = (Candidate::new(vec![], vec![0], a), Candidate::new(vec![], vec![1], b), Candidate::new(vec![], vec![2], c));
        prop_assert!(!dominates(&a, &a).unwrap());
        prop_assert!(!(dominates(&a, &b).unwrap() && dominates(&b, &a).unwrap()));
        if dominates(&a, &b).unwrap() && dominates(&b, &c).unwrap() {
            prop_assert!(dominates(&a, &c).unwrap());
        }
    }

    #[test]
    fn pruned_sets_are_antichains_covering_the_input(cs in cands(3, 40)) {
        let set = prune(cs.clone());
        let kept: Vec<&Candidate<f64>> = set.iter().collect();
        for x in &kept {
            for y in &kept {
                prop_assert!(!dominates(x, y).unwrap());
            }
        }
        for c in &cs {
            prop_assert!(kept.iter().any(|k| k.vector == c.vector || dominates(k, c).unwrap()));
        }
        // insertion order does not matter for the kept vectors
        let mut rev = cs.clone();
        rev.reverse();
        let mut a: Vec<Vec<u64>> = kept.iter().map(|k| k.vector.iter().map(|x| x.to_bits()).collect()).collect();
        let mut b: Vec<Vec<u64>> = prune(rev).iter().map(|k| k.vector.iter().map(|x| x.to_bits()).collect()).collect();
        a.sort();
        a.dedup();
        b.sort();
        b.dedup();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn reduction_never_grows_and_keeps_one_per_cell(
        cs in cands(2, 60),
        eps in prop::sample::select(vec![0.01, 0.1, 0.5]),
        add in any::<bool>(),
    ) {
        let mode = if add { LatticeMode::Additive } else { LatticeMode::Multiplicative };
        let lat = Lattice::new(eps, mode, 3, 4, 2, 1e-6).unwrap();
        let mut group = cs.clone();
        reduce_group(&mut group, &lat);
        prop_assert!(group.len() <= cs.len());
        let cells: HashSet<Vec<i64>> = group.iter().map(|c| bucket_coords(c.approx(), &lat)).collect();
        prop_assert_eq!(cells.len(), group.len());
        let all: HashSet<Vec<i64>> = cs.iter().map(|c| bucket_coords(c.approx(), &lat)).collect();
        prop_assert_eq!(all, cells);

        let mut set = prune(cs);
        let before = set.len();
        reduce_pareto(&mut set, &lat);
        prop_assert!(set.len() <= before);
    }

    #[test]
    fn approximation_guarantees_hold(
        seed in any::<u64>(),
        eps in prop::sample::select(vec![0.01, 0.1, 0.5]),
        add in any::<bool>(),
    ) {
        let net = random_rational_net(seed, 7, 3).to_float();
        let q = random_query(seed, &net);
        let ad = decompose(&net, &q, Heuristic::MinFill).unwrap();
        let mode = if add { LatticeMode::Additive } else { LatticeMode::Multiplicative };
        match (brute_force_map(&net, &q), solve_map_approx(&net, &q, &ad, eps, mode, Deadline::none())) {
            (Ok(opt), Ok((sol, g))) => {
                let opt = opt.value.to_f64();
                let v = sol.value.to_f64();
                prop_assert!(g.holds_against(opt * (1.0 - 1e-12)), "opt {opt} value {v}");
                prop_assert!(v <= opt * (1.0 + 1e-12));
                prop_assert!(g.lower_bound_claimed <= v && v <= g.opt_upper_bound);
            }
            (Err(Error::AllAssignmentsZero), Err(Error::AllAssignmentsZero | Error::ZeroProbabilityEvidence)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.map(|s| s.value), b.map(|s| s.0.value)),
        }
    }

    #[test]
    fn decompositions_are_valid(seed in any::<u64>(), min_fill in any::<bool>()) {
        let net = random_rational_net(seed, 9, 3);
        let g = moralize(&net);
        let h = if min_fill { Heuristic::MinFill } else { Heuristic::MinDegree };
        let d = build_decomposition(&g, h);
        prop_assert!(d.check(&g).is_ok());
        let b = binarize(&d);
        prop_assert!(b.check(&g).is_ok());
        prop_assert_eq!(b.width(), d.width());
        prop_assert!(b.children().iter().all(|c| c.len() <= 2));
        prop_assert!(b.len() < 2 * d.len().max(1));
        let r = reroot(&d, d.len() - 1).unwrap();
        prop_assert_eq!(r.root(), d.len() - 1);
        prop_assert!(r.check(&g).is_ok());

        let ad = annotate(&d, &net, RootChoice::ContainingVar(0)).unwrap();
        prop_assert!(ad.cluster(ad.root()).vars.contains(&0));
        check_annotation(&net, &ad)?;
    }

    #[test]
    fn text_formats_round_trip(seed in any::<u64>()) {
        for net in [random_rational_net(seed, 6, 4), random_rational_net(seed, 6, 4).to_float()] {
            let back = parse_network(&serialize_network(&net)).unwrap();
            prop_assert_eq!(&back, &net);
            let q = random_query(seed, &net);
            prop_assert_eq!(parse_query(&serialize_query(&q, &net), &net).unwrap(), q);
        }
    }
}

fn check_annotation(net: &Network, ad: &bnmap::AnnotatedDecomposition) -> Result<(), TestCaseError> {
    let n = net.len();
    let mut last = vec![0; n];
    let mut proc_ = vec![0; n];
    for (j, c) in ad.clusters().iter().enumerate() {
        for &v in &c.x_last {
            last[v] += 1;
            prop_assert!(c.vars.contains(&v));
        }
        for &v in &c.x_proc {
            proc_[v] += 1;
            prop_assert!(c.vars.contains(&v));
            for &p in net.parents(v) {
                prop_assert!(c.vars.contains(&p), "family of {v} not in cluster {j}");
            }
        }
        let sep = c.separator();
        for v in c.u_set.iter().chain(&c.v_set) {
            prop_assert!(sep.contains(v));
        }
        prop_assert_eq!(c.u_set.len() + c.v_set.len(), sep.len());
        if c.parent.is_none() {
            prop_assert!(sep.is_empty());
        }
    }
    prop_assert!(last.iter().all(|&k| k == 1));
    prop_assert!(proc_.iter().all(|&k| k == 1));
    Ok(())
}

#[test]
fn binarize_examples() {
    // star with five leaves around cluster {0,1}
    let mut g = UndirectedGraph::new(7);
    for v in 1..7 {
        g.add_edge(0, v);
    }
    let d = build_decomposition(&g, Heuristic::MinFill);
    let b = binarize(&d);
    assert!(b.children().iter().all(|c| c.len() <= 2));
    assert_eq!(b.width(), 1);
    assert!(b.check(&g).is_ok());
}
