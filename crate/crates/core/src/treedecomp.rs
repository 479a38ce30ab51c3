//! Moral graphs, heuristic tree decompositions, binarization and the
//! per-cluster bookkeeping used by bottom-up propagation.
//!
//! For a rooted decomposition, cluster `j` with parent `p` gets
//!
//! * `x_last = C_j \ C_p` (the root keeps all of its variables): the
//!   variables summed or maximised out when `j` is processed;
//! * `x_proc`: the variables whose CPT is multiplied in at `j`, namely those
//!   whose family reaches `j` as the deepest cluster where some family member
//!   leaves the tree;
//! * `u_set`, `v_set`: the separator split into variables whose CPTs are
//!   already accounted for below `j` and the conditioning rest.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::{Network, Query, VarId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        UndirectedGraph { adj: vec![BTreeSet::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    /// Each edge once, as `(lo, hi)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.adj.iter().enumerate() {
            out.extend(ns.range(a + 1..).map(|&b| (a, b)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }
}

pub fn moralize(net: &Network) -> UndirectedGraph {
    let mut g = UndirectedGraph::new(net.len());
    for v in 0..net.len() {
        let ps = net.parents(v);
        for (i, &p) in ps.iter().enumerate() {
            g.add_edge(v, p);
            for &q in &ps[i + 1..] {
                g.add_edge(p, q);
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Heuristic {
    #[default]
    MinFill,
    MinDegree,
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-fill" => Ok(Heuristic::MinFill),
            "min-degree" => Ok(Heuristic::MinDegree),
            _ => Err(Error::InvalidArgument(format!("unknown heuristic `{s}`"))),
        }
    }
}

/// A rooted tree of clusters. Cluster variable lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    clusters: Vec<Vec<VarId>>,
    parent: Vec<Option<usize>>,
    order: Vec<usize>,
}

impl Decomposition {
    /// Checks that the parent pointers form a single rooted tree.
    pub fn new(mut clusters: Vec<Vec<VarId>>, parent: Vec<Option<usize>>) -> Result<Self> {
        if clusters.is_empty() || clusters.len() != parent.len() {
            return Err(Error::InvalidDecomposition("cluster and parent lists disagree".into()));
        }
        for c in &mut clusters {
            c.sort_unstable();
            c.dedup();
        }
        let roots: Vec<usize> = (0..parent.len()).filter(|&j| parent[j].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidDecomposition(format!("expected one root, found {}", roots.len())));
        }
        if parent.iter().flatten().any(|&p| p >= clusters.len()) {
            return Err(Error::InvalidDecomposition("parent index out of range".into()));
        }
        let order = bfs_order(roots[0], &children_of(&parent));
        if order.len() != clusters.len() {
            return Err(Error::InvalidDecomposition("parent pointers contain a cycle".into()));
        }
        Ok(Decomposition { clusters, parent, order })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn clusters(&self) -> &[Vec<VarId>] {
        &self.clusters
    }

    pub fn cluster(&self, j: usize) -> &[VarId] {
        &self.clusters[j]
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.parent[j]
    }

    /// Root first; every cluster after its parent.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn root(&self) -> usize {
        self.order[0]
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        children_of(&self.parent)
    }

    pub fn width(&self) -> usize {
        treewidth(self)
    }

    /// Cover, edge-cover and running-intersection checks against `g`.
    pub fn check(&self, g: &UndirectedGraph) -> Result<()> {
        let n = g.len();
        let mut containing = vec![Vec::new(); n];
        for (j, c) in self.clusters.iter().enumerate() {
            for &v in c {
                if v >= n {
                    return Err(Error::InvalidDecomposition(format!("cluster {j} names unknown variable {v}")));
                }
                containing[v].push(j);
            }
        }
        for (v, cs) in containing.iter().enumerate() {
            if cs.is_empty() {
                return Err(Error::InvalidDecomposition(format!("variable {v} is in no cluster")));
            }
            let tops = cs
                .iter()
                .filter(|&&j| self.parent[j].map_or(true, |p| self.clusters[p].binary_search(&v).is_err()))
                .count();
            if tops != 1 {
                return Err(Error::InvalidDecomposition(format!(
                    "clusters containing variable {v} are not connected"
                )));
            }
        }
        for (a, b) in g.edges() {
            if !containing[a].iter().any(|&j| self.clusters[j].binary_search(&b).is_ok()) {
                return Err(Error::InvalidDecomposition(format!("edge {a}-{b} is in no cluster")));
            }
        }
        Ok(())
    }

    /// One `cluster <id>: <vars> parent=<id>` line per cluster, in order.
    pub fn dump(&self, net: Option<&Network>) -> String {
        let mut out = String::new();
        for &j in &self.order {
            let vars: Vec<String> = self.clusters[j]
                .iter()
                .map(|&v| net.map_or_else(|| v.to_string(), |n| n.variable(v).name.clone()))
                .collect();
            let parent = self.parent[j].map_or_else(|| "-".to_string(), |p| p.to_string());
            let _ = writeln!(out, "cluster {j}: {} parent={parent}", vars.join(" "));
        }
        out
    }
}

fn children_of(parent: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut ch = vec![Vec::new(); parent.len()];
    for (j, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            if p < parent.len() {
                ch[p].push(j);
            }
        }
    }
    ch
}

fn bfs_order(root: usize, children: &[Vec<usize>]) -> Vec<usize> {
    let mut order = Vec::with_capacity(children.len());
    let mut seen = vec![false; children.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(j) = queue.pop_front() {
        order.push(j);
        for &c in &children[j] {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    order
}

/// Largest cluster size minus one.
pub fn treewidth(d: &Decomposition) -> usize {
    d.clusters.iter().map(Vec::len).max().unwrap_or(0).saturating_sub(1)
}

/// Elimination-order decomposition. Each eliminated variable contributes the
/// clique it forms with its remaining neighbours; clusters contained in an
/// adjacent one are merged away and disconnected components are chained
/// through empty separators.
pub fn build_decomposition(g: &UndirectedGraph, heuristic: Heuristic) -> Decomposition {
    let n = g.len();
    if n == 0 {
        return Decomposition { clusters: vec![Vec::new()], parent: vec![None], order: vec![0] };
    }
    let mut adj = g.adj.clone();
    let mut alive = vec![true; n];
    let mut pos = vec![0usize; n];
    let mut cliques: Vec<(VarId, Vec<VarId>)> = Vec::with_capacity(n);

    for step in 0..n {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (score(&adj, v, heuristic), v))
            .expect("a live vertex remains");
        let ns: Vec<usize> = adj[v].iter().copied().collect();
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
            adj[a].remove(&v);
        }
        alive[v] = false;
        pos[v] = step;
        cliques.push((v, ns));
    }

    let mut clusters: Vec<Vec<VarId>> = Vec::with_capacity(n);
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(n);
    for (v, ns) in &cliques {
        let mut c = ns.clone();
        c.push(*v);
        c.sort_unstable();
        clusters.push(c);
        parent.push(ns.iter().map(|&u| pos[u]).min());
    }

    let mut live = vec![true; n];
    let is_subset = |a: &[VarId], b: &[VarId]| a.iter().all(|x| b.binary_search(x).is_ok());
    loop {
        let mut changed = false;
        for j in 0..n {
            if !live[j] {
                continue;
            }
            let Some(p) = parent[j] else { continue };
            if is_subset(&clusters[j], &clusters[p]) {
                for k in 0..n {
                    if live[k] && parent[k] == Some(j) {
                        parent[k] = Some(p);
                    }
                }
                live[j] = false;
                changed = true;
            } else if is_subset(&clusters[p], &clusters[j]) {
                parent[j] = parent[p];
                for k in 0..n {
                    if live[k] && k != j && parent[k] == Some(p) {
                        parent[k] = Some(j);
                    }
                }
                live[p] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let ids: Vec<usize> = (0..n).filter(|&j| live[j]).collect();
    let mut new_id = vec![usize::MAX; n];
    for (i, &j) in ids.iter().enumerate() {
        new_id[j] = i;
    }
    let mut out_clusters: Vec<Vec<VarId>> = ids.iter().map(|&j| clusters[j].clone()).collect();
    let mut out_parent: Vec<Option<usize>> = ids.iter().map(|&j| parent[j].map(|p| new_id[p])).collect();
    // chain component roots; the last root (latest elimination) stays the root
    let roots: Vec<usize> = (0..ids.len()).filter(|&i| out_parent[i].is_none()).collect();
    for w in roots.windows(2) {
        out_parent[w[0]] = Some(w[1]);
    }
    for c in &mut out_clusters {
        c.sort_unstable();
    }
    Decomposition::new(out_clusters, out_parent).expect("elimination yields a tree")
}

fn score(adj: &[BTreeSet<usize>], v: usize, h: Heuristic) -> usize {
    match h {
        Heuristic::MinDegree => adj[v].len(),
        Heuristic::MinFill => {
            let ns: Vec<usize> = adj[v].iter().copied().collect();
            let mut fill = 0;
            for (i, &a) in ns.iter().enumerate() {
                for &b in &ns[i + 1..] {
                    if !adj[a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            fill
        }
    }
}

/// Same tree, re-hung from `root`.
pub fn reroot(d: &Decomposition, root: usize) -> Result<Decomposition> {
    if root >= d.len() {
        return Err(Error::InvalidDecomposition(format!("root {root} out of range")));
    }
    let mut nbrs = vec![Vec::new(); d.len()];
    for (j, p) in d.parent.iter().enumerate() {
        if let Some(p) = *p {
            nbrs[j].push(p);
            nbrs[p].push(j);
        }
    }
    for ns in &mut nbrs {
        ns.sort_unstable();
    }
    let mut parent = vec![None; d.len()];
    let mut seen = vec![false; d.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(j) = queue.pop_front() {
        for &k in &nbrs[j] {
            if !seen[k] {
                seen[k] = true;
                parent[k] = Some(j);
                queue.push_back(k);
            }
        }
    }
    Decomposition::new(d.clusters.clone(), parent)
}

/// Splits every node with `k > 2` children into a chain of `k - 2` replicas
/// of its cluster, so each node keeps at most two children. Cluster contents,
/// and hence the width, are unchanged.
pub fn binarize(d: &Decomposition) -> Decomposition {
    let children = d.children();
    let mut clusters = d.clusters.clone();
    let mut parent = d.parent.clone();
    for &j in &d.order {
        let ch = &children[j];
        if ch.len() <= 2 {
            continue;
        }
        let mut cur = j;
        for (i, &c) in ch.iter().enumerate() {
            let remaining = ch.len() - i;
            if remaining <= 2 {
                parent[c] = Some(cur);
                continue;
            }
            parent[c] = Some(cur);
            let replica = clusters.len();
            clusters.push(d.clusters[j].clone());
            parent.push(Some(cur));
            cur = replica;
        }
    }
    Decomposition::new(clusters, parent).expect("binarization keeps a tree")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RootChoice {
    /// Keep the decomposition's own root.
    #[default]
    Keep,
    Cluster(usize),
    /// Lowest-index cluster containing the variable.
    ContainingVar(VarId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterInfo {
    pub vars: Vec<VarId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub x_last: Vec<VarId>,
    pub x_proc: Vec<VarId>,
    pub u_set: Vec<VarId>,
    pub v_set: Vec<VarId>,
}

impl ClusterInfo {
    /// `C_j ∩ C_parent`, i.e. `u_set ∪ v_set`, sorted.
    pub fn separator(&self) -> Vec<VarId> {
        self.vars.iter().copied().filter(|v| self.x_last.binary_search(v).is_err()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDecomposition {
    base: Decomposition,
    info: Vec<ClusterInfo>,
}

impl AnnotatedDecomposition {
    pub fn base(&self) -> &Decomposition {
        &self.base
    }

    pub fn clusters(&self) -> &[ClusterInfo] {
        &self.info
    }

    pub fn cluster(&self, j: usize) -> &ClusterInfo {
        &self.info[j]
    }

    pub fn len(&self) -> usize {
        self.info.len()
    }

    pub fn is_empty(&self) -> bool {
        self.info.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        self.base.order()
    }

    pub fn root(&self) -> usize {
        self.base.root()
    }

    pub fn width(&self) -> usize {
        self.base.width()
    }

    /// Largest cluster size, `w + 1`.
    pub fn max_cluster_size(&self) -> usize {
        self.info.iter().map(|c| c.vars.len()).max().unwrap_or(0)
    }
}

/// Reroots, binarizes and computes the per-cluster sets.
pub fn annotate(d: &Decomposition, net: &Network, root: RootChoice) -> Result<AnnotatedDecomposition> {
    d.check(&moralize(net))?;
    let rerooted = match root {
        RootChoice::Keep => d.clone(),
        RootChoice::Cluster(j) => reroot(d, j)?,
        RootChoice::ContainingVar(v) => {
            let j = d
                .clusters
                .iter()
                .position(|c| c.binary_search(&v).is_ok())
                .ok_or_else(|| Error::InvalidDecomposition(format!("no cluster contains variable {v}")))?;
            reroot(d, j)?
        }
    };
    let base = binarize(&rerooted);
    let children = base.children();
    let k = base.len();

    let mut depth = vec![0usize; k];
    for &j in base.order() {
        if let Some(p) = base.parent[j] {
            depth[j] = depth[p] + 1;
        }
    }
    let mut x_last = vec![Vec::new(); k];
    let mut top = vec![usize::MAX; net.len()];
    for j in 0..k {
        let parent = base.parent[j].map(|p| &base.clusters[p]);
        for &v in &base.clusters[j] {
            if parent.map_or(true, |pc| pc.binary_search(&v).is_err()) {
                x_last[j].push(v);
                top[v] = j;
            }
        }
    }
    let mut x_proc = vec![Vec::new(); k];
    for v in 0..net.len() {
        let home = std::iter::once(v)
            .chain(net.parents(v).iter().copied())
            .map(|u| top[u])
            .max_by_key(|&j| depth[j])
            .expect("family is non-empty");
        let cluster = &base.clusters[home];
        if std::iter::once(&v).chain(net.parents(v)).any(|u| cluster.binary_search(u).is_err()) {
            return Err(Error::InvalidDecomposition(format!("no cluster holds the family of variable {v}")));
        }
        x_proc[home].push(v);
    }

    let mut u_set = vec![Vec::new(); k];
    let mut v_set = vec![Vec::new(); k];
    for &j in base.order().iter().rev() {
        let mut u: BTreeSet<VarId> = x_proc[j].iter().copied().collect();
        for &c in &children[j] {
            u.extend(u_set[c].iter().copied());
        }
        for v in &x_last[j] {
            u.remove(v);
        }
        let sep: Vec<VarId> =
            base.clusters[j].iter().copied().filter(|v| x_last[j].binary_search(v).is_err()).collect();
        v_set[j] = sep.iter().copied().filter(|v| !u.contains(v)).collect();
        u_set[j] = u.into_iter().collect();
    }

    let info = (0..k)
        .map(|j| ClusterInfo {
            vars: base.clusters[j].clone(),
            parent: base.parent[j],
            children: children[j].clone(),
            x_last: std::mem::take(&mut x_last[j]),
            x_proc: std::mem::take(&mut x_proc[j]),
            u_set: std::mem::take(&mut u_set[j]),
            v_set: std::mem::take(&mut v_set[j]),
        })
        .collect();
    Ok(AnnotatedDecomposition { base, info })
}

/// Moralize, decompose and annotate, rooting at the cluster of the
/// lowest-id MAP variable when there is one.
pub fn decompose(net: &Network, query: &Query, heuristic: Heuristic) -> Result<AnnotatedDecomposition> {
    let d = build_decomposition(&moralize(net), heuristic);
    let root = match query.map_vars.first() {
        Some(&v) => RootChoice::ContainingVar(v),
        None => RootChoice::Keep,
    };
    annotate(&d, net, root)
}
