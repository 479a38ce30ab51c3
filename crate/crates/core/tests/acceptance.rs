//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bnmap::bench::{gen_random_instance, run_suite, Bucket, SolverSpec, Status, SuiteSpec};
use bnmap::gadgets::dyadic::{log_sum_bound_holds, rounding_window_holds};
use bnmap::gadgets::{
    amplify, max2sat_to_naivebayes, partition_to_hmm, partition_to_polytree, GadgetArtifact, Literal, Max2SatInstance,
    PartitionInstance,
};
use bnmap::oracle::{brute_force_map, map_enumeration_size};
use bnmap::treedecomp::{binarize, build_decomposition, moralize};
use bnmap::{
    decompose, solve_map, solve_map_approx, solve_map_with, Backend, Deadline, Error, Heuristic, LatticeMode, Network,
    ProbValue, Query, SolveOptions,
};
use common::{random_rational_net, rel_err};

const FLOAT_TOL: f64 = 1e-12;
const EPSILONS: [f64; 3] = [0.01, 0.1, 0.5];
const EXACT_BUDGET: Duration = Duration::from_secs(60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rational(v: ProbValue) -> BigRational {
    match v {
        ProbValue::Rational(r) => r,
        ProbValue::Float(f) => panic!("expected an exact value, got {f}"),
    }
}

fn exact_rational(g: &GadgetArtifact) -> BigRational {
    let ad = decompose(&g.network, &g.query, Heuristic::MinFill).unwrap();
    rational(solve_map(&g.network, &g.query, &ad, Backend::Rational).unwrap().value)
}

/// Small instances from the benchmark families whose oracle enumeration
/// stays cheap.
fn small_instances(count: usize) -> Vec<(String, Network, Query)> {
    let families = ["poly", "rand", "rand-tw2", "rand-tw3"];
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut index = 0;
    while out.len() < count {
        let fam = families[index % families.len()];
        let spec = SuiteSpec {
            name: fam.into(),
            family: fam.parse().unwrap(),
            base_size: rng.gen_range(4..=8),
            max_card: 3,
            seed: rng.gen(),
            queries: 1,
            bucket: if index % 2 == 0 { "0-6" } else { "6-12" }.parse().unwrap(),
            evidence: 0.5,
        };
        index += 1;
        let (net, q) = gen_random_instance(&spec, 0).unwrap();
        if q.search_space_log2(&net) <= 12.0 && map_enumeration_size(&net, &q) <= 1 << 16 {
            out.push((fam.to_string(), net, q));
        }
    }
    out
}

fn oracle_equivalence(instances: &[(String, Network, Query)]) -> (Outcome, Vec<f64>) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut rational_checks = 0;
    let mut opts = Vec::new();
    for (_, net, q) in instances {
        let ad = decompose(net, q, Heuristic::MinFill).unwrap();
        let got = solve_map(net, q, &ad, Backend::Float).unwrap().value.to_f64();
        let want = brute_force_map(net, q).unwrap().value.to_f64();
        let e = rel_err(got, want);
        worst = worst.max(e);
        if e > FLOAT_TOL {
            failures += 1;
        }
        opts.push(want);
        if map_enumeration_size(net, q) <= 1 << 12 {
            let rnet = net.to_rational_quantized(12);
            let a = solve_map(&rnet, q, &ad, Backend::Rational);
            let b = brute_force_map(&rnet, q);
            rational_checks += 1;
            match (a, b) {
                (Ok(a), Ok(b)) if a.value == b.value => {}
                (Err(Error::AllAssignmentsZero | Error::ZeroProbabilityEvidence), Err(Error::AllAssignmentsZero)) => {}
                _ => failures += 1,
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && instances.len() >= 500 && secs <= 600.0;
    let detail = format!(
        "{} instances, {rational_checks} also in exact rationals, max float rel err {worst:.1e} (tol {FLOAT_TOL:.0e}), {failures} mismatches, {secs:.1}s",
        instances.len()
    );
    (outcome(pass, detail), opts)
}

fn approximation_guarantees(instances: &[(String, Network, Query)], opts: &[f64]) -> Outcome {
    let mut runs = 0;
    let mut violations = 0;
    for ((_, net, q), &opt) in instances.iter().zip(opts) {
        let ad = decompose(net, q, Heuristic::MinFill).unwrap();
        for eps in EPSILONS {
            for mode in [LatticeMode::Multiplicative, LatticeMode::Additive] {
                runs += 1;
                let (sol, _) = solve_map_approx(net, q, &ad, eps, mode, Deadline::none()).unwrap();
                let v = sol.value.to_f64();
                // relative slack only for float rounding in the two computations
                let ok = match mode {
                    LatticeMode::Multiplicative => v * (1.0 + eps) >= opt * (1.0 - FLOAT_TOL),
                    LatticeMode::Additive => v + eps >= opt * (1.0 - FLOAT_TOL),
                } && v <= opt * (1.0 + FLOAT_TOL);
                if !ok {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{runs} runs over eps in {EPSILONS:?} x {{mult, add}}, {violations} violations"))
}

fn brute_max2sat(m: usize, clauses: &[(i64, i64)]) -> u64 {
    let sat = |a: u32, l: i64| ((a >> (l.unsigned_abs() - 1)) & 1 == 1) == (l > 0);
    (0..1u32 << m).map(|a| clauses.iter().filter(|&&(x, y)| sat(a, x) || sat(a, y)).count() as u64).max().unwrap()
}

fn max2sat_certificate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    let count = 120;
    for _ in 0..count {
        let m = rng.gen_range(2..=8usize);
        let mc = rng.gen_range(1..=10usize);
        let clauses: Vec<(i64, i64)> = (0..mc)
            .map(|_| {
                let a = rng.gen_range(1..=m as i64);
                let mut b = rng.gen_range(1..=m as i64);
                while b == a {
                    b = rng.gen_range(1..=m as i64);
                }
                let sa = if rng.gen_bool(0.5) { 1 } else { -1 };
                let sb = if rng.gen_bool(0.5) { 1 } else { -1 };
                (sa * a, sb * b)
            })
            .collect();
        let lit = |v: i64| Literal { var: (v.unsigned_abs() - 1) as usize, positive: v > 0 };
        let inst = Max2SatInstance::new(m, clauses.iter().map(|&(a, b)| (lit(a), lit(b))).collect()).unwrap();
        let k = brute_max2sat(m, &clauses);
        let want = BigRational::new(BigInt::from(k), (BigInt::from(1) << m) * BigInt::from(mc));
        if exact_rational(&max2sat_to_naivebayes(&inst).unwrap()) != want {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{count} random 2CNF (m <= 8, clauses <= 10), {mismatches} mismatches"))
}

fn brute_even_partition(s: &[u64]) -> bool {
    let total: u64 = s.iter().sum();
    total % 2 == 0
        && (0..1u32 << s.len())
            .any(|mask| 2 * s.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x).sum::<u64>() == total)
}

fn multisets(m: usize, max: u64) -> Vec<Vec<u64>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in multisets(m - 1, max) {
        let lo = rest.last().copied().unwrap_or(1);
        for x in lo..=max {
            let mut v = rest.clone();
            v.push(x);
            out.push(v);
        }
    }
    out
}

fn partition_round_trips() -> Outcome {
    let start = Instant::now();
    let mut cases: Vec<Vec<u64>> = Vec::new();
    for (m, max) in [(1, 8), (2, 8), (3, 8), (4, 5)] {
        cases.extend(multisets(m, max));
    }
    let exhaustive = cases.len();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (m, n) in [(5, 10), (6, 10), (7, 10), (8, 8), (9, 6), (10, 4), (11, 2), (12, 2)] {
        for i in 0..n {
            let mut s: Vec<u64> = (0..m).map(|_| rng.gen_range(1..=64)).collect();
            if i % 2 == 0 {
                // force a YES instance: make the last entry balance a random split
                let split: u64 = s[..m - 1].iter().filter(|_| rng.gen_bool(0.5)).sum();
                let rest: u64 = s[..m - 1].iter().sum::<u64>() - split;
                let gap = split.abs_diff(rest);
                if (1..=64).contains(&gap) {
                    s[m - 1] = gap;
                }
            }
            cases.push(s);
        }
    }
    let (mut polytree, mut hmm, mut yes, mut disagreements) = (0, 0, 0, 0);
    for s in &cases {
        let truth = brute_even_partition(s);
        yes += truth as usize;
        let inst = PartitionInstance::new(s.clone()).unwrap();
        let g = partition_to_polytree(&inst).unwrap();
        polytree += 1;
        if (exact_rational(&g) > *g.query.threshold.as_ref().unwrap()) != truth {
            disagreements += 1;
        }
        let total: u64 = s.iter().sum();
        if total % 2 == 0 && total / 2 >= 2 {
            let g = partition_to_hmm(&inst).unwrap();
            hmm += 1;
            if (exact_rational(&g) > *g.query.threshold.as_ref().unwrap()) != truth {
                disagreements += 1;
            }
        }
    }
    outcome(
        disagreements == 0,
        format!(
            "{} instances ({exhaustive} exhaustive with m <= 4, rest sampled up to m = 12, entries <= 64; {yes} even), {polytree} polytree + {hmm} chain decisions, {disagreements} disagreements, {:.1}s",
            cases.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn amplification() -> Outcome {
    let lit = |v: i64| Literal { var: (v.unsigned_abs() - 1) as usize, positive: v > 0 };
    let bases = [
        max2sat_to_naivebayes(&Max2SatInstance::new(2, vec![(lit(1), lit(-2)), (lit(-1), lit(2))]).unwrap()).unwrap(),
        max2sat_to_naivebayes(&Max2SatInstance::new(3, vec![(lit(1), lit(2)), (lit(-2), lit(-3))]).unwrap()).unwrap(),
        partition_to_polytree(&PartitionInstance::new(vec![1, 2]).unwrap()).unwrap(),
    ];
    let mut checks = 0;
    let mut mismatches = 0;
    for base in &bases {
        let v = rational(brute_force_map(&base.network, &base.query).unwrap().value);
        for q in 1..=3u32 {
            let g = amplify(base, q).unwrap();
            let amp = rational(brute_force_map(&g.network, &g.query).unwrap().value);
            checks += 1;
            if amp != num_traits::pow(v.clone(), q as usize) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{checks} oracle checks over 3 bases and q = 1, 2, 3, {mismatches} mismatches"))
}

fn structure() -> Outcome {
    let mut bad = 0;
    for seed in 0..1000u64 {
        let net = random_rational_net(seed, 14, 3);
        let g = moralize(&net);
        let h = if seed % 2 == 0 { Heuristic::MinFill } else { Heuristic::MinDegree };
        let d = build_decomposition(&g, h);
        let b = binarize(&d);
        let ok = b.width() == d.width()
            && b.len() < 2 * d.len()
            && b.len() < 2 * net.len()
            && b.children().iter().all(|c| c.len() <= 2)
            && b.check(&g).is_ok();
        bad += !ok as usize;
    }
    let lit = |v: i64| Literal { var: (v.unsigned_abs() - 1) as usize, positive: v > 0 };
    let width = |g: &GadgetArtifact| decompose(&g.network, &g.query, Heuristic::MinFill).unwrap().width();
    let mut widths = BTreeMap::new();
    for m in 2..=8u64 {
        let s: Vec<u64> = (1..=m).map(|i| 2 * i).collect();
        let inst = PartitionInstance::new(s).unwrap();
        widths.entry("polytree").or_insert_with(Vec::new).push(width(&partition_to_polytree(&inst).unwrap()));
        widths.entry("chain").or_insert_with(Vec::new).push(width(&partition_to_hmm(&inst).unwrap()));
        let clauses = (1..m as i64).map(|j| (lit(j), lit(-(j + 1)))).collect();
        let nb = max2sat_to_naivebayes(&Max2SatInstance::new(m as usize, clauses).unwrap()).unwrap();
        widths.entry("naive-bayes").or_insert_with(Vec::new).push(width(&nb));
    }
    let all = |k: &str, w: usize| widths[k].iter().all(|&x| x == w);
    let pass = bad == 0 && all("polytree", 2) && all("chain", 1) && all("naive-bayes", 1);
    outcome(
        pass,
        format!(
            "1000 binarizations, {bad} bad; gadget widths polytree {:?}, chain {:?}, naive-bayes {:?}",
            widths["polytree"], widths["chain"], widths["naive-bayes"]
        ),
    )
}

fn numeric_inequalities() -> Outcome {
    let mut window_fail = 0;
    let mut window_checks = 0;
    for i in 0..=512i64 {
        let v = BigRational::new(i.into(), 256.into());
        for k in 1..=20 {
            window_checks += 1;
            window_fail += !rounding_window_holds(&v, k) as usize;
        }
    }
    let mut log_fail = 0;
    for i in 0..=512i64 {
        log_fail += !log_sum_bound_holds(&BigRational::new(i.into(), 1024.into())) as usize;
    }
    outcome(
        window_fail == 0 && log_fail == 0,
        format!(
            "rounding window: {window_checks} points (v = i/256 in [0,2], k = 1..20), {window_fail} violations; log-sum bound: 513 points (x = i/1024 in [0,1/2]), {log_fail} violations"
        ),
    )
}

fn benchmark_statistics() -> Outcome {
    let buckets = ["0-10", "10-20", "20-40"];
    let specs: Vec<SuiteSpec> = buckets
        .iter()
        .map(|b| SuiteSpec {
            name: format!("rand-tw3.{b}"),
            family: "rand-tw3".parse().unwrap(),
            base_size: 30,
            max_card: 3,
            seed: 5,
            queries: 6,
            bucket: b.parse().unwrap(),
            evidence: 0.5,
        })
        .collect();
    let solvers = [SolverSpec::Exact, SolverSpec::Approx { epsilon: 0.01, mode: LatticeMode::Additive }];
    let recs = run_suite(&specs, &solvers, Duration::from_secs(20)).unwrap();

    let mut pareto: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut exact_vals = BTreeMap::new();
    for r in recs.iter().filter(|r| r.solver == "exact" && r.status == Status::Ok) {
        pareto.entry(Bucket::standard_for(r.ss_log2).lo as u64).or_default().push(r.avg_pareto.unwrap());
        exact_vals.insert((r.suite.clone(), r.instance), r.value.unwrap());
    }
    let means: Vec<(u64, f64)> =
        pareto.iter().map(|(b, v)| (*b, v.iter().sum::<f64>() / v.len() as f64)).collect();
    let growing = means.len() >= 2 && means.windows(2).all(|w| w[1].1 > w[0].1);

    let (mut same, mut close, mut compared) = (0, 0, 0);
    for r in recs.iter().filter(|r| r.solver != "exact" && r.status == Status::Ok) {
        if let Some(&e) = exact_vals.get(&(r.suite.clone(), r.instance)) {
            compared += 1;
            let v = r.value.unwrap();
            same += (rel_err(v, e) <= 1e-9) as usize;
            close += (rel_err(v, e) <= 0.01) as usize;
        }
    }

    // take the first instance where exact ran out of time in the suite but the
    // additive approximation finished, and give exact the full budget on it
    let candidate = recs.iter().find(|r| {
        r.solver == "exact"
            && r.status == Status::Timeout
            && recs.iter().any(|a| {
                a.suite == r.suite && a.instance == r.instance && a.solver != "exact" && a.status == Status::Ok
            })
    });
    let (timeout_pattern, pattern_detail) = match candidate {
        None => (false, "no suite instance where exact timed out and approx finished".to_string()),
        Some(r) => {
            let spec = specs.iter().find(|s| s.name == r.suite).unwrap();
            let (net, q) = gen_random_instance(spec, r.instance).unwrap();
            let ad = decompose(&net, &q, Heuristic::MinFill).unwrap();
            let t = Instant::now();
            let exact = solve_map_with(
                &net,
                &q,
                &ad,
                Backend::Float,
                &SolveOptions { prune: true, deadline: Deadline::after(EXACT_BUDGET) },
            );
            let exact_secs = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let approx = solve_map_approx(&net, &q, &ad, 0.01, LatticeMode::Additive, Deadline::after(EXACT_BUDGET));
            let approx_secs = t.elapsed().as_secs_f64();
            (
                matches!(exact, Err(Error::Timeout)) && approx.is_ok(),
                format!(
                    "{} #{} (ss 2^{:.1}): exact {} after {exact_secs:.1}s, approx {} in {approx_secs:.2}s",
                    r.suite,
                    r.instance,
                    r.ss_log2,
                    if exact.is_ok() { "finished" } else { "timed out" },
                    if approx.is_ok() { "finished" } else { "failed" },
                ),
            )
        }
    };

    let mean_str: Vec<String> = means.iter().map(|(b, m)| format!("{}: {m:.1}", Bucket::standard_for(*b as f64))).collect();
    let timeouts = recs.iter().filter(|r| r.status == Status::Timeout).count();
    outcome(
        growing && timeout_pattern,
        format!(
            "mean pareto size by bucket [{}]; {timeouts} suite timeouts; exactness of approx:0.01:add {same}/{compared} exact, {close}/{compared} within 1%; {pattern_detail}",
            mean_str.join(", "),
        ),
    )
}

fn report(n: usize, name: &str, o: &Outcome) {
    println!("criterion {n} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() {
    let instances = small_instances(500);
    let (c1, opts) = oracle_equivalence(&instances);
    report(1, "exact solver matches enumeration", &c1);
    let mut passed = vec![c1.pass];
    let rest: [(&str, &dyn Fn() -> Outcome); 7] = [
        ("approximation guarantees", &|| approximation_guarantees(&instances, &opts)),
        ("max2sat certificate", &max2sat_certificate),
        ("partition decisions", &partition_round_trips),
        ("amplification", &amplification),
        ("structural claims", &structure),
        ("numeric inequalities", &numeric_inequalities),
        ("benchmark statistics", &benchmark_statistics),
    ];
    for (i, (name, run)) in rest.iter().enumerate() {
        let o = run();
        report(i + 2, name, &o);
        passed.push(o.pass);
    }
    let failed = passed.iter().filter(|p| !**p).count();
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
