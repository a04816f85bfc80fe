//! Candidate path enumeration.
//!
//! Paths are enumerated in order of length (miles) with a deviation-based
//! k-shortest loopless path search. Ties are broken by the lexicographic
//! sequence of link ids so results do not depend on hash order or platform.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::netmodel::{IntermodalNetwork, LinkIx, NodeIx, NodeKind, OdPair, TerminalIx};

pub const DEFAULT_CUTOFF_FACTOR: f64 = 5.0;
pub const DEFAULT_MAX_PATHS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    pub od: String,
    pub links: Vec<LinkIx>,
    pub nodes: Vec<NodeIx>,
    /// Terminals where the path changes mode.
    pub terminals: Vec<TerminalIx>,
    /// Miles.
    pub length: f64,
    /// Hours, link travel times plus processing at mode-change terminals.
    pub base_travel_time: f64,
}

impl CandidatePath {
    /// Builds a path from a link sequence starting at `origin`.
    pub fn from_links(net: &IntermodalNetwork, od: &str, origin: NodeIx, links: Vec<LinkIx>) -> Self {
        let mut nodes = vec![origin];
        let mut length = 0.0;
        let mut time = 0.0;
        for &l in &links {
            let rec = net.link(l);
            nodes.push(rec.to);
            length += rec.length;
            time += rec.travel_time;
        }
        let terminals = mode_change_terminals(net, &links);
        for &t in &terminals {
            time += net.terminal(t).processing_time;
        }
        CandidatePath {
            od: od.to_string(),
            links,
            nodes,
            terminals,
            length,
            base_travel_time: time,
        }
    }

    pub fn node_sequence(&self, net: &IntermodalNetwork) -> String {
        self.nodes
            .iter()
            .map(|&n| net.node(n).id.as_str())
            .collect::<Vec<_>>()
            .join(">")
    }
}

fn mode_change_terminals(net: &IntermodalNetwork, links: &[LinkIx]) -> Vec<TerminalIx> {
    links
        .windows(2)
        .filter(|w| net.link(w[0]).mode != net.link(w[1]).mode)
        .filter_map(|w| net.terminal_at(net.link(w[0]).to))
        .collect()
}

/// Lists every way `path` breaks the candidate-path rules. Empty iff valid.
pub fn path_violations(net: &IntermodalNetwork, od: &OdPair, path: &CandidatePath) -> Vec<String> {
    let mut out = Vec::new();
    if path.links.is_empty() {
        out.push("empty path".to_string());
        return out;
    }
    let first = net.link(path.links[0]);
    let last = net.link(*path.links.last().unwrap());
    if first.from != od.origin {
        out.push("does not start at the origin".into());
    }
    if last.to != od.destination {
        out.push("does not end at the destination".into());
    }
    if first.mode != crate::netmodel::Mode::Road || last.mode != crate::netmodel::Mode::Road {
        out.push("first and last links must be road links".into());
    }
    for w in path.links.windows(2) {
        let (a, b) = (net.link(w[0]), net.link(w[1]));
        if a.to != b.from {
            out.push(format!("links {} and {} are not consecutive", a.id, b.id));
        }
        if a.mode != b.mode && net.node(a.to).kind != NodeKind::IntermodalTerminal {
            out.push(format!("mode change at non-terminal {}", net.node(a.to).id));
        }
    }
    let mut seen = HashSet::new();
    if !path.nodes.iter().all(|n| seen.insert(*n)) {
        out.push("repeats a node".into());
    }
    let uses_rail = path
        .links
        .iter()
        .any(|&l| net.link(l).mode == crate::netmodel::Mode::Rail);
    if uses_rail && path.terminals.len() < 2 {
        out.push("rail leg without two transfer terminals".into());
    }
    let len: f64 = path.links.iter().map(|&l| net.link(l).length).sum();
    if (len - path.length).abs() > 1e-9 * len.max(1.0) {
        out.push(format!("length {} differs from link sum {}", path.length, len));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub od: String,
    pub min_length: f64,
    pub paths: Vec<CandidatePath>,
    pub cutoff_factor: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: NodeIx,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path by miles avoiding banned nodes and links.
fn dijkstra(
    net: &IntermodalNetwork,
    from: NodeIx,
    to: NodeIx,
    banned_nodes: &[bool],
    banned_links: &HashSet<LinkIx>,
) -> Option<Vec<LinkIx>> {
    let n = net.nodes().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<LinkIx>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[from.0] = 0.0;
    heap.push(HeapItem { dist: 0.0, node: from });
    while let Some(HeapItem { dist: d, node }) = heap.pop() {
        if d > dist[node.0] {
            continue;
        }
        if node == to {
            break;
        }
        for &l in net.out_links(node) {
            if banned_links.contains(&l) {
                continue;
            }
            let rec = net.link(l);
            if banned_nodes[rec.to.0] {
                continue;
            }
            let nd = d + rec.length;
            if nd < dist[rec.to.0] {
                dist[rec.to.0] = nd;
                pred[rec.to.0] = Some(l);
                heap.push(HeapItem { dist: nd, node: rec.to });
            }
        }
    }
    if !dist[to.0].is_finite() {
        return None;
    }
    let mut links = Vec::new();
    let mut cur = to;
    while cur != from {
        let l = pred[cur.0]?;
        links.push(l);
        cur = net.link(l).from;
    }
    links.reverse();
    Some(links)
}

fn unreachable(net: &IntermodalNetwork, od: &OdPair) -> Error {
    Error::Unreachable {
        od: od.id.clone(),
        origin: net.node(od.origin).id.clone(),
        destination: net.node(od.destination).id.clone(),
    }
}

/// Length in miles of the shortest valid path for `od`.
pub fn shortest_path_length(net: &IntermodalNetwork, od: &OdPair) -> Result<f64> {
    let banned = vec![false; net.nodes().len()];
    let links = dijkstra(net, od.origin, od.destination, &banned, &HashSet::new())
        .filter(|l| !l.is_empty())
        .ok_or_else(|| unreachable(net, od))?;
    Ok(links.iter().map(|&l| net.link(l).length).sum())
}

/// Orders paths by length, then by link-id sequence.
struct Ranked {
    length: f64,
    key: Vec<usize>,
    links: Vec<LinkIx>,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then_with(|| self.key.cmp(&other.key))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Loopless paths no longer than `cutoff_factor` times the shortest one,
/// ordered by length then link ids, at most `max_paths` of them.
pub fn enumerate_candidate_paths(
    net: &IntermodalNetwork,
    od: &OdPair,
    cutoff_factor: f64,
    max_paths: usize,
) -> Result<PathSet> {
    if !(cutoff_factor >= 1.0) {
        return Err(Error::Config(format!(
            "cutoff factor {cutoff_factor} must be at least 1"
        )));
    }
    if max_paths == 0 {
        return Err(Error::Config("max_paths must be at least 1".into()));
    }
    let n = net.nodes().len();
    let no_nodes = vec![false; n];
    let first = dijkstra(net, od.origin, od.destination, &no_nodes, &HashSet::new())
        .filter(|l| !l.is_empty())
        .ok_or_else(|| unreachable(net, od))?;

    // Rank of each link id in sorted order, so link sequences compare like id sequences.
    let mut by_id: Vec<usize> = (0..net.links().len()).collect();
    by_id.sort_by(|&a, &b| net.links()[a].id.cmp(&net.links()[b].id));
    let mut id_rank = vec![0usize; by_id.len()];
    for (rank, &l) in by_id.iter().enumerate() {
        id_rank[l] = rank;
    }
    let ranked = |links: Vec<LinkIx>| Ranked {
        length: links.iter().map(|&l| net.link(l).length).sum(),
        key: links.iter().map(|l| id_rank[l.0]).collect(),
        links,
    };

    let first = ranked(first);
    let min_length = first.length;
    let limit = cutoff_factor * min_length;
    let mut accepted: Vec<Ranked> = Vec::new();
    let mut known: HashSet<Vec<LinkIx>> = HashSet::new();
    let mut candidates: BTreeSet<Ranked> = BTreeSet::new();
    known.insert(first.links.clone());
    candidates.insert(first);

    while let Some(next) = candidates.pop_first() {
        if next.length > limit {
            break;
        }
        if accepted.len() >= max_paths && next.length > accepted[max_paths - 1].length {
            break;
        }
        let path = next.links.clone();
        accepted.push(next);

        let mut nodes = vec![od.origin];
        nodes.extend(path.iter().map(|&l| net.link(l).to));
        for i in 0..path.len() {
            let spur = nodes[i];
            let root = &path[..i];
            let mut banned_links = HashSet::new();
            for p in &accepted {
                if p.links.len() > i && p.links[..i] == *root {
                    banned_links.insert(p.links[i]);
                }
            }
            let mut banned_nodes = no_nodes.clone();
            for &v in &nodes[..i] {
                banned_nodes[v.0] = true;
            }
            let Some(tail) = dijkstra(net, spur, od.destination, &banned_nodes, &banned_links) else {
                continue;
            };
            let mut full = root.to_vec();
            full.extend(tail);
            if known.insert(full.clone()) {
                candidates.insert(ranked(full));
            }
        }
    }

    accepted.sort();
    accepted.truncate(max_paths);
    let paths = accepted
        .into_iter()
        .map(|r| CandidatePath::from_links(net, &od.id, od.origin, r.links))
        .collect();
    Ok(PathSet {
        od: od.id.clone(),
        min_length,
        paths,
        cutoff_factor,
    })
}
