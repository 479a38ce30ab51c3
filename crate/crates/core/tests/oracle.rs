mod common;

use proptest::prelude::*;

use bnmap::bu::marginal;
use bnmap::oracle::{brute_force_joint, brute_force_map};
use bnmap::{
    decompose, joint_probability, solve_map, solve_map_with, Backend, Error, Heuristic, Instantiation, ProbValue,
    SolveOptions,
};
use common::{random_query, random_rational_net, rel_err};

fn optimum_or_zero(r: &Result<bnmap::MapSolution, Error>) -> Option<ProbValue> {
    match r {
        Ok(s) => Some(s.value.clone()),
        Err(Error::AllAssignmentsZero | Error::ZeroProbabilityEvidence) => None,
        Err(e) => panic!("unexpected error {e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn joint_sums_to_one(seed in any::<u64>()) {
        let net = random_rational_net(seed, 6, 3);
        let total = brute_force_joint(&net, &Instantiation::new()).unwrap();
        prop_assert_eq!(total, ProbValue::Rational(num_rational::BigRational::from_integer(1.into())));
    }

    #[test]
    fn belief_updating_matches_enumeration(seed in any::<u64>(), heuristic_bit in any::<bool>()) {
        let net = random_rational_net(seed, 7, 3);
        let q = random_query(seed, &net);
        let h = if heuristic_bit { Heuristic::MinFill } else { Heuristic::MinDegree };
        let ad = decompose(&net, &q, h).unwrap();
        let mut target = q.evidence.clone();
        for &v in &q.map_vars {
            target.set(v, (seed as usize) % net.card(v));
        }
        prop_assert_eq!(marginal(&net, &ad, &target).unwrap(), brute_force_joint(&net, &target).unwrap());
        let fnet = net.to_float();
        let a = marginal(&fnet, &ad, &target).unwrap().to_f64();
        let b = brute_force_joint(&fnet, &target).unwrap().to_f64();
        prop_assert!(rel_err(a, b) <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn exact_map_matches_oracle_in_rationals(seed in any::<u64>()) {
        let net = random_rational_net(seed, 7, 3);
        let q = random_query(seed, &net);
        let ad = decompose(&net, &q, Heuristic::MinFill).unwrap();
        let got = solve_map(&net, &q, &ad, Backend::Rational);
        let want = brute_force_map(&net, &q);
        prop_assert_eq!(optimum_or_zero(&got), optimum_or_zero(&want));
        if let Ok(sol) = got {
            // the returned assignment attains the optimum
            let full = sol.assignment.merged(&q.evidence).unwrap();
            prop_assert_eq!(brute_force_joint(&net, &full).unwrap(), sol.value);
        }
    }

    #[test]
    fn exact_map_matches_oracle_in_floats(seed in any::<u64>()) {
        let net = random_rational_net(seed, 7, 3).to_float();
        let q = random_query(seed, &net);
        let ad = decompose(&net, &q, Heuristic::MinDegree).unwrap();
        let got = optimum_or_zero(&solve_map(&net, &q, &ad, Backend::Float));
        let want = optimum_or_zero(&brute_force_map(&net, &q));
        match (got, want) {
            (Some(a), Some(b)) => prop_assert!(rel_err(a.to_f64(), b.to_f64()) <= 1e-12),
            (None, None) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn pruning_never_changes_the_value(seed in any::<u64>()) {
        let net = random_rational_net(seed, 6, 3);
        let q = random_query(seed, &net);
        let ad = decompose(&net, &q, Heuristic::MinFill).unwrap();
        let pruned = solve_map_with(&net, &q, &ad, Backend::Rational, &SolveOptions::default());
        let full = solve_map_with(&net, &q, &ad, Backend::Rational, &SolveOptions { prune: false, ..SolveOptions::default() });
        prop_assert_eq!(optimum_or_zero(&pruned), optimum_or_zero(&full));
        if let (Ok(p), Ok(f)) = (&pruned, &full) {
            prop_assert!(p.stats.max_pareto <= f.stats.max_pareto);
        }
    }
}

/// With strictly positive parameters there are no zero-entry ties, so pruning
/// keeps the same winner as the unpruned search.
#[test]
fn pruning_keeps_the_assignment_on_positive_networks() {
    use bnmap::NetworkBuilder;
    use num_rational::BigRational;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    for seed in 0..150u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=6);
        let mut b = NetworkBuilder::new();
        let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=3)).collect();
        for (i, &c) in cards.iter().enumerate() {
            b.var(format!("V{i}"), c);
        }
        let mut tables = Vec::new();
        for v in 0..n {
            let ps: Vec<usize> = (0..v).filter(|_| rng.gen_bool(0.4)).take(2).collect();
            b.parents(v, &ps);
            let rows: usize = ps.iter().map(|&p| cards[p]).product();
            let mut t = Vec::new();
            for _ in 0..rows {
                let w: Vec<i64> = (0..cards[v]).map(|_| rng.gen_range(1..=1000)).collect();
                let s: i64 = w.iter().sum();
                t.extend(w.into_iter().map(|x| BigRational::new(x.into(), s.into())));
            }
            tables.push(t);
        }
        let net = b.build_rational(tables).unwrap();
        let q = random_query(seed, &net);
        let ad = decompose(&net, &q, Heuristic::MinFill).unwrap();
        let p = solve_map_with(&net, &q, &ad, Backend::Rational, &SolveOptions::default()).unwrap();
        let f = solve_map_with(&net, &q, &ad, Backend::Rational, &SolveOptions { prune: false, ..Default::default() })
            .unwrap();
        let o = brute_force_map(&net, &q).unwrap();
        assert_eq!(p.value, f.value, "seed {seed}");
        assert_eq!(p.value, o.value, "seed {seed}");
        assert_eq!(p.assignment, f.assignment, "seed {seed}");
        assert_eq!(p.assignment, o.assignment, "seed {seed}");
    }
}

#[test]
fn full_instantiation_marginal_is_the_joint() {
    for seed in 0..50u64 {
        let net = random_rational_net(seed, 6, 3);
        let full = Instantiation::from_pairs((0..net.len()).map(|v| (v, seed as usize % net.card(v))));
        let q = bnmap::Query::new(vec![0], Instantiation::new());
        let ad = decompose(&net, &q, Heuristic::MinFill).unwrap();
        assert_eq!(marginal(&net, &ad, &full).unwrap(), joint_probability(&net, &full).unwrap());
    }
}
