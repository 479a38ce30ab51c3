#![allow(dead_code)]

use num_rational::BigRational;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bnmap::{Instantiation, Network, NetworkBuilder, Query};

/// Small random network with exact parameters built from integer weights in
/// `0..=4`, so zeros and ties are common. Parents come from earlier ids.
pub fn random_rational_net(seed: u64, max_vars: usize, max_card: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_vars);
    let mut b = NetworkBuilder::new();
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=max_card)).collect();
    for (i, &c) in cards.iter().enumerate() {
        b.var(format!("V{i}"), c);
    }
    let mut tables = Vec::with_capacity(n);
    for v in 0..n {
        let mut ps: Vec<usize> = (0..v).filter(|_| rng.gen_bool(0.35)).collect();
        ps.truncate(3);
        b.parents(v, &ps);
        let rows: usize = ps.iter().map(|&p| cards[p]).product();
        let mut table = Vec::with_capacity(rows * cards[v]);
        for _ in 0..rows {
            let mut w: Vec<i64> = (0..cards[v]).map(|_| rng.gen_range(0..=4)).collect();
            if w.iter().all(|&x| x == 0) {
                let i = rng.gen_range(0..cards[v]);
                w[i] = 1;
            }
            let total: i64 = w.iter().sum();
            table.extend(w.into_iter().map(|x| BigRational::new(x.into(), total.into())));
        }
        tables.push(table);
    }
    b.build_rational(tables).expect("generated network is valid")
}

/// Random query: at least one MAP variable, some evidence among the rest.
pub fn random_query(seed: u64, net: &Network) -> Query {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151);
    let n = net.len();
    let mut map = Vec::new();
    let mut ev = Instantiation::new();
    for v in 0..n {
        let r: f64 = rng.gen();
        if r < 0.4 {
            map.push(v);
        } else if r < 0.65 {
            ev.set(v, rng.gen_range(0..net.card(v)));
        }
    }
    if map.is_empty() {
        let v = rng.gen_range(0..n);
        ev = Instantiation::from_pairs(ev.iter().filter(|&(u, _)| u != v));
        map.push(v);
    }
    Query::new(map, ev)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
