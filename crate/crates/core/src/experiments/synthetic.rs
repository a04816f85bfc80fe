//! Seeded synthetic road-rail networks.
//!
//! Nodes are scattered over a 1000 × 800 mile box. Highway nodes are joined to
//! their three nearest highway neighbours plus a spanning tree, terminals get
//! road access to their two nearest highway nodes, and rail junctions and
//! terminals share a spanning tree plus a few chords. Every link is mirrored.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixtures::Fixture;
use crate::netmodel::{
    derive_link, CommodityDemand, IntermodalNetwork, LinkRecord, Mode, NodeIx, NodeKind, NodeRecord, OdPair,
    RateConfig, TerminalRecord, REVERSE_SUFFIX,
};

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 800.0;
const ROAD_CIRCUITY: f64 = 1.2;
const RAIL_CIRCUITY: f64 = 1.1;
const ROAD_NEIGHBOURS: usize = 3;
const TERMINAL_ACCESS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_highway: usize,
    pub n_rail: usize,
    pub n_terminals: usize,
    pub n_od: usize,
    /// Number of (OD, commodity) demand rows.
    pub n_pairs: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n_highway: usize, n_rail: usize, n_terminals: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_highway,
            n_rail,
            n_terminals,
            n_od: 5,
            n_pairs: 9,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_highway < 2 {
            return Err(Error::Config(
                "a synthetic network needs at least 2 highway nodes".into(),
            ));
        }
        if self.n_terminals == 1 {
            return Err(Error::Config(
                "a rail corridor needs at least 2 terminals, got 1".into(),
            ));
        }
        if self.n_rail > 0 && self.n_terminals < 2 {
            return Err(Error::Config(
                "rail junctions need at least 2 terminals to connect to the road network".into(),
            ));
        }
        let max_od = self.n_highway * (self.n_highway - 1);
        if self.n_od == 0 || self.n_od > max_od {
            return Err(Error::Config(format!(
                "cannot place {} ODs on {} highway nodes",
                self.n_od, self.n_highway
            )));
        }
        if self.n_pairs < self.n_od {
            return Err(Error::Config("every OD needs at least one commodity".into()));
        }
        Ok(())
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Edges of a Euclidean minimum spanning tree (Prim) over `members`.
fn spanning_tree(points: &[(f64, f64)], members: &[usize]) -> Vec<(usize, usize)> {
    if members.len() < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; members.len()];
    let mut best = vec![(f64::INFINITY, 0usize); members.len()];
    in_tree[0] = true;
    for (k, &m) in members.iter().enumerate().skip(1) {
        best[k] = (dist(points[members[0]], points[m]), 0);
    }
    let mut edges = Vec::new();
    for _ in 1..members.len() {
        let (k, _) = best
            .iter()
            .enumerate()
            .filter(|(k, _)| !in_tree[*k])
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
            .expect("a node remains outside the tree");
        in_tree[k] = true;
        edges.push((members[best[k].1], members[k]));
        for (j, &m) in members.iter().enumerate() {
            if !in_tree[j] {
                let d = dist(points[members[k]], points[m]);
                if d < best[j].0 {
                    best[j] = (d, k);
                }
            }
        }
    }
    edges
}

fn nearest(points: &[(f64, f64)], from: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut c: Vec<usize> = candidates.iter().copied().filter(|&j| j != from).collect();
    c.sort_by(|&a, &b| {
        dist(points[from], points[a])
            .total_cmp(&dist(points[from], points[b]))
            .then(a.cmp(&b))
    });
    c.truncate(k);
    c
}

/// Generates a network and demand set. Identical configs give identical output.
pub fn generate_synthetic_network(cfg: &SyntheticConfig) -> Result<Fixture> {
    cfg.validate()?;
    let rates = RateConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_highway + cfg.n_rail + cfg.n_terminals;
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..WIDTH), rng.random_range(0.0..HEIGHT)))
        .collect();
    let highway: Vec<usize> = (0..cfg.n_highway).collect();
    let rail: Vec<usize> = (cfg.n_highway..cfg.n_highway + cfg.n_rail).collect();
    let terminals: Vec<usize> = (cfg.n_highway + cfg.n_rail..n).collect();

    let mut nodes = Vec::with_capacity(n);
    for (i, &(x, y)) in points.iter().enumerate() {
        let (kind, id) = if i < cfg.n_highway {
            (NodeKind::HighwayIntersection, format!("H{:02}", i + 1))
        } else if i < cfg.n_highway + cfg.n_rail {
            (NodeKind::RailJunction, format!("R{:02}", i - cfg.n_highway + 1))
        } else {
            (
                NodeKind::IntermodalTerminal,
                format!("S{:02}", i - cfg.n_highway - cfg.n_rail + 1),
            )
        };
        nodes.push(NodeRecord {
            id,
            kind,
            latitude: Some(y),
            longitude: Some(x),
        });
    }

    let mut road: Vec<(usize, usize)> = spanning_tree(&points, &highway);
    for &h in &highway {
        for j in nearest(&points, h, &highway, ROAD_NEIGHBOURS) {
            road.push((h, j));
        }
    }
    for &s in &terminals {
        for j in nearest(&points, s, &highway, TERMINAL_ACCESS) {
            road.push((s, j));
        }
    }
    let rail_members: Vec<usize> = rail.iter().chain(&terminals).copied().collect();
    let mut rail_edges: Vec<(usize, usize)> = spanning_tree(&points, &rail_members);
    for &s in &terminals {
        for j in nearest(&points, s, &rail_members, 2) {
            rail_edges.push((s, j));
        }
    }

    let normalize = |edges: Vec<(usize, usize)>| {
        let mut e: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    };
    let road = normalize(road);
    let rail_edges = normalize(rail_edges);

    let mut links: Vec<LinkRecord> = Vec::new();
    let mut add = |prefix: &str, k: usize, a: usize, b: usize, mode: Mode, cap: f64, circuity: f64| {
        let length = (dist(points[a], points[b]) * circuity).max(1.0).round();
        let id = format!("{prefix}{k:03}");
        let speed = rates.speed(mode);
        links.push(derive_link(
            id.clone(),
            NodeIx(a),
            NodeIx(b),
            mode,
            length,
            cap,
            speed,
            &rates,
        ));
        links.push(derive_link(
            format!("{id}{REVERSE_SUFFIX}"),
            NodeIx(b),
            NodeIx(a),
            mode,
            length,
            cap,
            speed,
            &rates,
        ));
    };
    for (k, &(a, b)) in road.iter().enumerate() {
        let cap = rng.random_range(40..=120) as f64;
        add("rd", k + 1, a, b, Mode::Road, cap, ROAD_CIRCUITY);
    }
    for (k, &(a, b)) in rail_edges.iter().enumerate() {
        let cap = rng.random_range(60..=200) as f64;
        add("rl", k + 1, a, b, Mode::Rail, cap, RAIL_CIRCUITY);
    }

    let terminal_records: Vec<TerminalRecord> = terminals
        .iter()
        .map(|&s| TerminalRecord {
            node: NodeIx(s),
            capacity: rng.random_range(30..=100) as f64,
            transfer_cost: rates.default_transfer_cost_usd,
            processing_time: rng.random_range(4..=12) as f64,
        })
        .collect();

    let network = IntermodalNetwork::from_parts(nodes, links, terminal_records)?;

    // Far-apart OD pairs: the longest of a handful of random candidates each time.
    let mut ods: Vec<(usize, usize)> = Vec::new();
    while ods.len() < cfg.n_od {
        let mut best: Option<(f64, (usize, usize))> = None;
        for _ in 0..24 {
            let mut pick = highway.clone();
            pick.shuffle(&mut rng);
            let (o, d) = (pick[0], pick[1]);
            if ods.contains(&(o, d)) {
                continue;
            }
            let len = dist(points[o], points[d]);
            if best.is_none_or(|(b, _)| len > b) {
                best = Some((len, (o, d)));
            }
        }
        if let Some((_, od)) = best {
            ods.push(od);
        }
    }
    let mut demands = Vec::with_capacity(cfg.n_pairs);
    for k in 0..cfg.n_pairs {
        let c = k % cfg.n_od;
        let (o, d) = ods[c];
        demands.push(CommodityDemand {
            od: OdPair {
                id: format!("{}", c + 1),
                origin: NodeIx(o),
                destination: NodeIx(d),
            },
            commodity: format!("k{}", k / cfg.n_od + 1),
            containers: rng.random_range(5..=30),
            deadline: rates.default_deadline_hours,
        });
    }
    Ok(Fixture { network, demands })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{validate_demands, validate_network};

    #[test]
    fn deterministic() {
        let a = generate_synthetic_network(&SyntheticConfig::new(8, 4, 2, 1)).unwrap();
        let b = generate_synthetic_network(&SyntheticConfig::new(8, 4, 2, 1)).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.demands, b.demands);
        let c = generate_synthetic_network(&SyntheticConfig::new(8, 4, 2, 2)).unwrap();
        assert_ne!(a.network, c.network);
    }

    #[test]
    fn valid_and_reachable() {
        for seed in 0..10 {
            let f = generate_synthetic_network(&SyntheticConfig::new(40, 15, 6, seed)).unwrap();
            assert!(validate_network(&f.network).is_empty());
            assert!(validate_demands(&f.network, &f.demands).is_empty());
            assert_eq!(f.demands.len(), 9);
            let ods: std::collections::HashSet<_> = f.demands.iter().map(|d| d.od.id.clone()).collect();
            assert_eq!(ods.len(), 5);
        }
    }

    #[test]
    fn road_only() {
        let f = generate_synthetic_network(&SyntheticConfig::new(10, 0, 0, 3)).unwrap();
        assert!(f.network.links().iter().all(|l| l.mode == Mode::Road));
        assert!(f.network.terminals().is_empty());
        assert!(validate_demands(&f.network, &f.demands).is_empty());
    }

    #[test]
    fn impossible_counts() {
        for (h, r, s) in [(1, 0, 0), (10, 3, 0), (10, 3, 1), (10, 0, 1)] {
            let e = generate_synthetic_network(&SyntheticConfig::new(h, r, s, 1));
            assert!(matches!(e, Err(Error::Config(_))), "({h},{r},{s})");
        }
    }
}
