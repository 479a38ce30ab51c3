//! Text formats.
//!
//! Networks (`.bnm`):
//!
//! ```text
//! bnm 1
//! var A 2
//! var B 2
//! parents B A
//! cpt A
//! 0.3 0.7
//! cpt B
//! 1/5 4/5
//! 1/2 1/2
//! ```
//!
//! One row per parent configuration, row-major over the parent list as
//! declared. A file containing any `num/den` token is loaded with exact
//! rational parameters (decimal tokens are then read exactly as well);
//! otherwise parameters are `f64`.
//!
//! Queries (`.qry`): `map <name>...`, `evidence <name>=<state>...` and an
//! optional `threshold <num/den>`.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::network::{Instantiation, Network, Params, Query, Variable};
use crate::numeric::{parse_exact, Backend};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_network(text: &str) -> Result<Network> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty())
        .collect();

    let mut it = lines.iter().peekable();
    match it.next() {
        Some((_, toks)) if toks.as_slice() == ["bnm", "1"] => {}
        Some((line, _)) => return Err(perr(*line, "expected header `bnm 1`")),
        None => return Err(perr(0, "empty input")),
    }

    let exact = lines.iter().skip(1).any(|(_, toks)| {
        !matches!(toks[0], "var" | "parents" | "cpt") && toks.iter().any(|t| t.contains('/'))
    });

    let mut variables: Vec<Variable> = Vec::new();
    let mut by_name: HashMap<String, usize> = HashMap::new();
    let mut parents: Vec<Option<Vec<usize>>> = Vec::new();
    let mut raw_tables: Vec<Option<Vec<(usize, Vec<&str>)>>> = Vec::new();

    while let Some((line, toks)) = it.next() {
        let line = *line;
        match toks[0] {
            "var" => {
                if toks.len() != 3 {
                    return Err(perr(line, "expected `var <name> <cardinality>`"));
                }
                let name = toks[1].to_string();
                if by_name.contains_key(&name) {
                    return Err(perr(line, format!("duplicate variable {name}")));
                }
                let card: usize = toks[2]
                    .parse()
                    .map_err(|_| perr(line, format!("bad cardinality `{}`", toks[2])))?;
                if card == 0 {
                    return Err(perr(line, "cardinality must be at least 1"));
                }
                let id = variables.len();
                by_name.insert(name.clone(), id);
                variables.push(Variable { id, name, cardinality: card });
                parents.push(None);
                raw_tables.push(None);
            }
            "parents" => {
                if toks.len() < 2 {
                    return Err(perr(line, "expected `parents <name> <parent>...`"));
                }
                let v = lookup(&by_name, toks[1], line)?;
                if parents[v].is_some() {
                    return Err(perr(line, format!("parents of {} declared twice", toks[1])));
                }
                let ps = toks[2..].iter().map(|p| lookup(&by_name, p, line)).collect::<Result<Vec<_>>>()?;
                parents[v] = Some(ps);
            }
            "cpt" => {
                if toks.len() != 2 {
                    return Err(perr(line, "expected `cpt <name>`"));
                }
                let v = lookup(&by_name, toks[1], line)?;
                if raw_tables[v].is_some() {
                    return Err(perr(line, format!("cpt of {} given twice", toks[1])));
                }
                let mut rows = Vec::new();
                while let Some((l, row)) = it.peek() {
                    if matches!(row[0], "var" | "parents" | "cpt") {
                        break;
                    }
                    rows.push((*l, row.clone()));
                    it.next();
                }
                raw_tables[v] = Some(rows);
            }
            other => return Err(perr(line, format!("unexpected `{other}`"))),
        }
    }

    let parents: Vec<Vec<usize>> = parents.into_iter().map(Option::unwrap_or_default).collect();
    let mut float_tables = Vec::new();
    let mut exact_tables = Vec::new();
    for (v, raw) in raw_tables.into_iter().enumerate() {
        let name = &variables[v].name;
        let rows = raw.ok_or_else(|| perr(0, format!("missing cpt for {name}")))?;
        let z = variables[v].cardinality;
        let configs: usize = parents[v].iter().map(|&p| variables[p].cardinality).product();
        if rows.len() != configs {
            let line = rows.last().map(|r| r.0).unwrap_or(0);
            return Err(perr(line, format!("cpt {name}: expected {configs} rows, found {}", rows.len())));
        }
        let mut ft = Vec::with_capacity(z * configs);
        let mut et = Vec::with_capacity(z * configs);
        for (line, row) in rows {
            if row.len() != z {
                return Err(perr(line, format!("cpt {name}: expected {z} entries per row, found {}", row.len())));
            }
            for tok in row {
                if exact {
                    et.push(parse_exact(tok).ok_or_else(|| perr(line, format!("bad probability `{tok}`")))?);
                } else {
                    ft.push(tok.parse::<f64>().map_err(|_| perr(line, format!("bad probability `{tok}`")))?);
                }
            }
        }
        float_tables.push(ft);
        exact_tables.push(et);
    }

    let params = if exact { Params::Rational(exact_tables) } else { Params::Float(float_tables) };
    Ok(Network::from_parts(variables, parents, params))
}

fn lookup(by_name: &HashMap<String, usize>, name: &str, line: usize) -> Result<usize> {
    by_name.get(name).copied().ok_or_else(|| perr(line, format!("unknown variable `{name}`")))
}

pub fn serialize_network(net: &Network) -> String {
    let mut out = String::from("bnm 1\n");
    for v in net.variables() {
        let _ = writeln!(out, "var {} {}", v.name, v.cardinality);
    }
    for v in net.variables() {
        let ps = net.parents(v.id);
        if !ps.is_empty() {
            let names: Vec<&str> = ps.iter().map(|&p| net.variable(p).name.as_str()).collect();
            let _ = writeln!(out, "parents {} {}", v.name, names.join(" "));
        }
    }
    for v in net.variables() {
        let _ = writeln!(out, "cpt {}", v.name);
        let z = v.cardinality;
        match net.params() {
            Params::Float(t) => {
                for row in t[v.id].chunks(z) {
                    let toks: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
                    let _ = writeln!(out, "{}", toks.join(" "));
                }
            }
            Params::Rational(t) => {
                for row in t[v.id].chunks(z) {
                    let toks: Vec<String> = row.iter().map(fmt_rational).collect();
                    let _ = writeln!(out, "{}", toks.join(" "));
                }
            }
        }
    }
    out
}

/// Always `num/den`, so exactness survives a round trip.
pub fn fmt_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_query(text: &str, net: &Network) -> Result<Query> {
    let mut map_vars = Vec::new();
    let mut evidence = Instantiation::new();
    let mut threshold = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        let Some(&head) = toks.first() else { continue };
        match head {
            "map" => {
                for name in &toks[1..] {
                    let v = net.id_of(name).ok_or_else(|| perr(line, format!("unknown variable `{name}`")))?;
                    map_vars.push(v);
                }
            }
            "evidence" => {
                for tok in &toks[1..] {
                    let (name, state) = tok
                        .split_once('=')
                        .ok_or_else(|| perr(line, format!("expected <name>=<state>, got `{tok}`")))?;
                    let v = net.id_of(name).ok_or_else(|| perr(line, format!("unknown variable `{name}`")))?;
                    let s: usize = state.parse().map_err(|_| perr(line, format!("bad state `{state}`")))?;
                    if s >= net.card(v) {
                        return Err(perr(line, format!("state {s} out of range for {name}")));
                    }
                    if evidence.get(v).is_some_and(|t| t != s) {
                        return Err(perr(line, format!("conflicting evidence for {name}")));
                    }
                    evidence.set(v, s);
                }
            }
            "threshold" => {
                if toks.len() != 2 {
                    return Err(perr(line, "expected `threshold <num/den>`"));
                }
                threshold = Some(parse_exact(toks[1]).ok_or_else(|| perr(line, format!("bad threshold `{}`", toks[1])))?);
            }
            other => return Err(perr(line, format!("unexpected `{other}`"))),
        }
    }
    let mut q = Query::new(map_vars, evidence);
    q.threshold = threshold;
    q.validate(net)?;
    Ok(q)
}

pub fn serialize_query(q: &Query, net: &Network) -> String {
    let mut out = String::new();
    let names: Vec<&str> = q.map_vars.iter().map(|&v| net.variable(v).name.as_str()).collect();
    let _ = writeln!(out, "map {}", names.join(" "));
    if !q.evidence.is_empty() {
        let ev: Vec<String> = q.evidence.iter().map(|(v, s)| format!("{}={s}", net.variable(v).name)).collect();
        let _ = writeln!(out, "evidence {}", ev.join(" "));
    }
    if let Some(t) = &q.threshold {
        let _ = writeln!(out, "threshold {}", fmt_rational(t));
    }
    out
}

/// Backend a parsed file will load into, without building the network.
pub fn sniff_backend(text: &str) -> Backend {
    match parse_network(text) {
        Ok(n) => n.backend(),
        Err(_) => Backend::Float,
    }
}
