//! Intermodal network and demand data model.
//!
//! A network is a directed graph whose nodes are highway intersections (`H`),
//! rail junctions (`R`) or intermodal terminals (`S`). Road links may only
//! touch `H ∪ S`, rail links only `R ∪ S`, so a mode change can only happen at
//! a terminal. Link travel times and unit costs are derived from speeds and
//! per-mile rates at load time.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pounds per intermodal container used when demand is given by weight.
pub const POUNDS_PER_CONTAINER: f64 = 40_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TerminalIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "H")]
    HighwayIntersection,
    #[serde(rename = "R")]
    RailJunction,
    #[serde(rename = "S")]
    IntermodalTerminal,
}

impl NodeKind {
    pub fn code(self) -> &'static str {
        match self {
            NodeKind::HighwayIntersection => "H",
            NodeKind::RailJunction => "R",
            NodeKind::IntermodalTerminal => "S",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "H" | "h" => Some(NodeKind::HighwayIntersection),
            "R" | "r" => Some(NodeKind::RailJunction),
            "S" | "s" => Some(NodeKind::IntermodalTerminal),
            _ => None,
        }
    }

    /// Whether a link of `mode` may touch a node of this kind.
    pub fn admits(self, mode: Mode) -> bool {
        matches!(
            (self, mode),
            (NodeKind::IntermodalTerminal, _)
                | (NodeKind::HighwayIntersection, Mode::Road)
                | (NodeKind::RailJunction, Mode::Rail)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Road,
    Rail,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Road => "road",
            Mode::Rail => "rail",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "road" => Some(Mode::Road),
            "rail" => Some(Mode::Rail),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub kind: NodeKind,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub id: String,
    pub from: NodeIx,
    pub to: NodeIx,
    pub mode: Mode,
    /// Miles.
    pub length: f64,
    /// Containers per planning horizon.
    pub capacity: f64,
    /// Miles per hour.
    pub speed: f64,
    /// Hours, `length / speed`.
    pub travel_time: f64,
    /// Dollars per container, `rate(mode) * length`.
    pub unit_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalRecord {
    pub node: NodeIx,
    pub capacity: f64,
    pub transfer_cost: f64,
    pub processing_time: f64,
}

/// Per-mile rates, default speeds and deadline used to derive link attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub road_rate_usd_per_mile: f64,
    pub rail_rate_usd_per_mile: f64,
    pub default_transfer_cost_usd: f64,
    pub road_speed_mph: f64,
    pub rail_speed_mph: f64,
    pub default_deadline_hours: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            road_rate_usd_per_mile: 1.67,
            rail_rate_usd_per_mile: 0.60,
            default_transfer_cost_usd: 70.0,
            road_speed_mph: 65.0,
            rail_speed_mph: 30.0,
            default_deadline_hours: 168.0,
        }
    }
}

impl RateConfig {
    /// Parses a `key = value` text file. Missing keys keep their defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|msg| Error::schema(path, 0, msg))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: RateConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn rate(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Road => self.road_rate_usd_per_mile,
            Mode::Rail => self.rail_rate_usd_per_mile,
        }
    }

    pub fn speed(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Road => self.road_speed_mph,
            Mode::Rail => self.rail_speed_mph,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        let positive = [
            ("road_speed_mph", self.road_speed_mph),
            ("rail_speed_mph", self.rail_speed_mph),
            ("default_deadline_hours", self.default_deadline_hours),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{key} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("road_rate_usd_per_mile", self.road_rate_usd_per_mile),
            ("rail_rate_usd_per_mile", self.rail_rate_usd_per_mile),
            ("default_transfer_cost_usd", self.default_transfer_cost_usd),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{key} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// A directed road-rail network. Immutable once assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermodalNetwork {
    nodes: Vec<NodeRecord>,
    links: Vec<LinkRecord>,
    terminals: Vec<TerminalRecord>,
    node_index: HashMap<String, NodeIx>,
    link_index: HashMap<String, LinkIx>,
    terminal_at: Vec<Option<TerminalIx>>,
    out_links: Vec<Vec<LinkIx>>,
    in_links: Vec<Vec<LinkIx>>,
    link_costs: BTreeMap<(LinkIx, String), f64>,
    transfer_costs: BTreeMap<(TerminalIx, String), f64>,
}

impl IntermodalNetwork {
    /// Assembles a network without checking invariants; see [`validate_network`].
    ///
    /// Link endpoints are indices, so they always exist. When ids collide the
    /// first occurrence wins the lookup and the duplicate is reported by
    /// validation. When several terminal records point at one node the first
    /// one is used.
    pub fn from_parts(nodes: Vec<NodeRecord>, links: Vec<LinkRecord>, terminals: Vec<TerminalRecord>) -> Result<Self> {
        let n = nodes.len();
        for link in &links {
            if link.from.0 >= n || link.to.0 >= n {
                return Err(Error::Reference(format!(
                    "link {} references a node index outside the network",
                    link.id
                )));
            }
        }
        let mut node_index = HashMap::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            node_index.entry(node.id.clone()).or_insert(NodeIx(i));
        }
        let mut link_index = HashMap::with_capacity(links.len());
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (i, link) in links.iter().enumerate() {
            link_index.entry(link.id.clone()).or_insert(LinkIx(i));
            out_links[link.from.0].push(LinkIx(i));
            in_links[link.to.0].push(LinkIx(i));
        }
        let mut terminal_at = vec![None; n];
        for (i, t) in terminals.iter().enumerate() {
            if t.node.0 >= n {
                return Err(Error::Reference(format!(
                    "terminal record {i} references a node index outside the network"
                )));
            }
            if terminal_at[t.node.0].is_none() {
                terminal_at[t.node.0] = Some(TerminalIx(i));
            }
        }
        Ok(IntermodalNetwork {
            nodes,
            links,
            terminals,
            node_index,
            link_index,
            terminal_at,
            out_links,
            in_links,
            link_costs: BTreeMap::new(),
            transfer_costs: BTreeMap::new(),
        })
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkRecord] {
        &self.links
    }

    pub fn terminals(&self) -> &[TerminalRecord] {
        &self.terminals
    }

    pub fn node(&self, ix: NodeIx) -> &NodeRecord {
        &self.nodes[ix.0]
    }

    pub fn link(&self, ix: LinkIx) -> &LinkRecord {
        &self.links[ix.0]
    }

    pub fn terminal(&self, ix: TerminalIx) -> &TerminalRecord {
        &self.terminals[ix.0]
    }

    pub fn node_ix(&self, id: &str) -> Option<NodeIx> {
        self.node_index.get(id).copied()
    }

    pub fn link_ix(&self, id: &str) -> Option<LinkIx> {
        self.link_index.get(id).copied()
    }

    pub fn terminal_at(&self, node: NodeIx) -> Option<TerminalIx> {
        self.terminal_at[node.0]
    }

    pub fn terminal_ix(&self, node_id: &str) -> Option<TerminalIx> {
        self.node_ix(node_id).and_then(|n| self.terminal_at(n))
    }

    pub fn out_links(&self, node: NodeIx) -> &[LinkIx] {
        &self.out_links[node.0]
    }

    pub fn in_links(&self, node: NodeIx) -> &[LinkIx] {
        &self.in_links[node.0]
    }

    pub fn link_ixs(&self) -> impl Iterator<Item = LinkIx> + '_ {
        (0..self.links.len()).map(LinkIx)
    }

    pub fn links_of_mode(&self, mode: Mode) -> impl Iterator<Item = LinkIx> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.mode == mode)
            .map(|(i, _)| LinkIx(i))
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = NodeIx> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.kind == kind)
            .map(|(i, _)| NodeIx(i))
    }

    /// Unit cost of moving one container of `commodity` over `link`.
    pub fn link_cost(&self, link: LinkIx, commodity: &str) -> f64 {
        self.link_costs
            .get(&(link, commodity.to_string()))
            .copied()
            .unwrap_or(self.links[link.0].unit_cost)
    }

    /// Unit cost of transferring one container of `commodity` at `terminal`.
    pub fn transfer_cost(&self, terminal: TerminalIx, commodity: &str) -> f64 {
        self.transfer_costs
            .get(&(terminal, commodity.to_string()))
            .copied()
            .unwrap_or(self.terminals[terminal.0].transfer_cost)
    }

    /// Overrides the per-container cost of one commodity on one link.
    pub fn set_commodity_link_cost(&mut self, link: LinkIx, commodity: &str, cost: f64) {
        self.link_costs.insert((link, commodity.to_string()), cost);
    }

    /// Overrides the per-container transfer cost of one commodity at one terminal.
    pub fn set_commodity_transfer_cost(&mut self, terminal: TerminalIx, commodity: &str, cost: f64) {
        self.transfer_costs.insert((terminal, commodity.to_string()), cost);
    }

    /// Returns a copy with every link scaled to the new capacity given by `f`.
    pub fn with_link_capacities(&self, mut f: impl FnMut(LinkIx, &LinkRecord) -> f64) -> Self {
        let mut net = self.clone();
        for (i, link) in net.links.iter_mut().enumerate() {
            link.capacity = f(LinkIx(i), &self.links[i]);
        }
        net
    }

    /// Id of the reverse road/rail link `to -> from` of the same mode, if any.
    pub fn reverse_links(&self, link: LinkIx) -> impl Iterator<Item = LinkIx> + '_ {
        let l = &self.links[link.0];
        self.out_links[l.to.0]
            .iter()
            .copied()
            .filter(move |&r| self.links[r.0].to == l.from && self.links[r.0].mode == l.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticKind {
    Duplicate,
    Topology,
    Completeness,
    Value,
    Connectivity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub element: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] {}: {}", self.kind, self.element, self.message)
    }
}

/// Lists every invariant violation of `net`. Empty iff all invariants hold.
pub fn validate_network(net: &IntermodalNetwork) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |kind, element: &str, message: String| {
        out.push(Diagnostic {
            kind,
            element: element.to_string(),
            message,
        })
    };

    let mut seen = HashSet::new();
    for node in &net.nodes {
        if !seen.insert(node.id.as_str()) {
            push(DiagnosticKind::Duplicate, &node.id, "duplicate node id".into());
        }
    }
    let mut seen = HashSet::new();
    for link in &net.links {
        if !seen.insert(link.id.as_str()) {
            push(DiagnosticKind::Duplicate, &link.id, "duplicate link id".into());
        }
    }

    for link in &net.links {
        if !(link.length > 0.0) {
            push(
                DiagnosticKind::Value,
                &link.id,
                format!("length {} is not positive", link.length),
            );
        }
        if !(link.capacity >= 0.0) {
            push(
                DiagnosticKind::Value,
                &link.id,
                format!("capacity {} is negative", link.capacity),
            );
        }
        if !(link.speed > 0.0) {
            push(
                DiagnosticKind::Value,
                &link.id,
                format!("speed {} is not positive", link.speed),
            );
        } else {
            let expect = link.length / link.speed;
            if (link.travel_time - expect).abs() > 1e-9 * expect.abs().max(1.0) {
                push(
                    DiagnosticKind::Value,
                    &link.id,
                    format!("travel time {} differs from length/speed {}", link.travel_time, expect),
                );
            }
        }
        if link.from == link.to {
            push(DiagnosticKind::Topology, &link.id, "self loop".into());
        }
        for end in [link.from, link.to] {
            let node = &net.nodes[end.0];
            if !node.kind.admits(link.mode) {
                push(
                    DiagnosticKind::Topology,
                    &link.id,
                    format!("{} link touches {} node {}", link.mode, node.kind.code(), node.id),
                );
            }
        }
    }

    let mut records_per_node = vec![0usize; net.nodes.len()];
    for t in &net.terminals {
        records_per_node[t.node.0] += 1;
        let node = &net.nodes[t.node.0];
        if node.kind != NodeKind::IntermodalTerminal {
            push(
                DiagnosticKind::Topology,
                &node.id,
                format!("terminal record on {} node", node.kind.code()),
            );
        }
        for (name, v) in [
            ("capacity", t.capacity),
            ("transfer cost", t.transfer_cost),
            ("processing time", t.processing_time),
        ] {
            if !(v >= 0.0) {
                push(
                    DiagnosticKind::Value,
                    &node.id,
                    format!("terminal {name} {v} is negative"),
                );
            }
        }
    }
    for (i, node) in net.nodes.iter().enumerate() {
        if node.kind == NodeKind::IntermodalTerminal {
            match records_per_node[i] {
                1 => {}
                0 => push(
                    DiagnosticKind::Completeness,
                    &node.id,
                    "terminal node without terminal record".into(),
                ),
                k => push(
                    DiagnosticKind::Completeness,
                    &node.id,
                    format!("{k} terminal records for one terminal node"),
                ),
            }
        }
    }
    out
}

/// Origin-destination relation `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdPair {
    pub id: String,
    pub origin: NodeIx,
    pub destination: NodeIx,
}

/// Demand `d` of one commodity between one OD pair, with its delivery deadline `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommodityDemand {
    pub od: OdPair,
    pub commodity: String,
    pub containers: u64,
    /// Hours.
    pub deadline: f64,
}

/// Diagnostics for demands: OD endpoints and road connectivity.
pub fn validate_demands(net: &IntermodalNetwork, demands: &[CommodityDemand]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut checked = HashSet::new();
    for d in demands {
        if !checked.insert(d.od.id.clone()) {
            continue;
        }
        let (o, t) = (d.od.origin, d.od.destination);
        if o == t {
            out.push(Diagnostic {
                kind: DiagnosticKind::Topology,
                element: d.od.id.clone(),
                message: "origin equals destination".into(),
            });
            continue;
        }
        for end in [o, t] {
            if net.node(end).kind != NodeKind::HighwayIntersection {
                out.push(Diagnostic {
                    kind: DiagnosticKind::Topology,
                    element: d.od.id.clone(),
                    message: format!("endpoint {} is not a highway node", net.node(end).id),
                });
            }
        }
        if !road_reachable(net, o, t) {
            out.push(Diagnostic {
                kind: DiagnosticKind::Connectivity,
                element: d.od.id.clone(),
                message: format!("no road-only route from {} to {}", net.node(o).id, net.node(t).id),
            });
        }
    }
    out
}

fn road_reachable(net: &IntermodalNetwork, from: NodeIx, to: NodeIx) -> bool {
    let mut seen = vec![false; net.nodes.len()];
    let mut stack = vec![from];
    seen[from.0] = true;
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        for &l in net.out_links(n) {
            let link = net.link(l);
            if link.mode == Mode::Road && !seen[link.to.0] {
                seen[link.to.0] = true;
                stack.push(link.to);
            }
        }
    }
    false
}

#[derive(Debug, Deserialize)]
struct NodeRow {
    node_id: String,
    kind: String,
    #[serde(default)]
    lat: Option<f64>,
    #[serde(default)]
    lon: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct LinkRow {
    link_id: String,
    from: String,
    to: String,
    mode: String,
    length_miles: f64,
    capacity: f64,
    #[serde(default)]
    speed_mph: Option<f64>,
    #[serde(default)]
    bidirectional: Option<u8>,
}

#[derive(Debug, Deserialize)]
struct TerminalRow {
    node_id: String,
    capacity: f64,
    #[serde(default)]
    transfer_cost_usd: Option<f64>,
    #[serde(default)]
    processing_hours: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct DemandRow {
    od_id: String,
    origin: String,
    destination: String,
    commodity: String,
    #[serde(default)]
    containers: Option<f64>,
    #[serde(default)]
    pounds: Option<f64>,
    #[serde(default)]
    deadline_hours: Option<f64>,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut reader = csv_reader(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<T>().enumerate() {
        match record {
            Ok(row) => rows.push((i + 1, row)),
            Err(e) => {
                let row = e.position().map(|p| p.record() as usize).unwrap_or(i + 1);
                return Err(Error::schema(path, row, e.to_string()));
            }
        }
    }
    Ok(rows)
}

/// The suffix given to the reverse copy of a `bidirectional=1` link row.
pub const REVERSE_SUFFIX: &str = "_rev";

/// Loads and validates a network from the three CSV files.
pub fn load_network(
    nodes_file: &Path,
    links_file: &Path,
    terminals_file: &Path,
    rates: &RateConfig,
) -> Result<IntermodalNetwork> {
    let mut nodes = Vec::new();
    let mut node_index: HashMap<String, NodeIx> = HashMap::new();
    for (row, r) in read_rows::<NodeRow>(nodes_file)? {
        let kind = NodeKind::parse(&r.kind).ok_or_else(|| {
            Error::schema(
                nodes_file,
                row,
                format!("unknown node kind {:?} (expected H, R or S)", r.kind),
            )
        })?;
        if node_index.insert(r.node_id.clone(), NodeIx(nodes.len())).is_some() {
            return Err(Error::schema(
                nodes_file,
                row,
                format!("duplicate node id {}", r.node_id),
            ));
        }
        nodes.push(NodeRecord {
            id: r.node_id,
            kind,
            latitude: r.lat,
            longitude: r.lon,
        });
    }

    let mut links = Vec::new();
    let mut link_ids = HashSet::new();
    for (row, r) in read_rows::<LinkRow>(links_file)? {
        let mode = Mode::parse(&r.mode).ok_or_else(|| {
            Error::schema(
                links_file,
                row,
                format!("unknown mode {:?} (expected road or rail)", r.mode),
            )
        })?;
        let endpoint = |id: &str| {
            node_index.get(id).copied().ok_or_else(|| {
                Error::schema(
                    links_file,
                    row,
                    format!("link {} references missing node {id}", r.link_id),
                )
            })
        };
        let (from, to) = (endpoint(&r.from)?, endpoint(&r.to)?);
        if !(r.length_miles > 0.0) {
            return Err(Error::schema(
                links_file,
                row,
                format!("length {} must be positive", r.length_miles),
            ));
        }
        if !(r.capacity >= 0.0) {
            return Err(Error::schema(
                links_file,
                row,
                format!("capacity {} must be non-negative", r.capacity),
            ));
        }
        let speed = r.speed_mph.unwrap_or_else(|| rates.speed(mode));
        if !(speed > 0.0) {
            return Err(Error::schema(
                links_file,
                row,
                format!("speed {speed} must be positive"),
            ));
        }
        let bidirectional = match r.bidirectional {
            None | Some(0) => false,
            Some(1) => true,
            Some(v) => {
                return Err(Error::schema(
                    links_file,
                    row,
                    format!("bidirectional must be 0 or 1, got {v}"),
                ))
            }
        };
        let mut push = |id: String, from: NodeIx, to: NodeIx| -> Result<()> {
            if !link_ids.insert(id.clone()) {
                return Err(Error::schema(links_file, row, format!("duplicate link id {id}")));
            }
            links.push(derive_link(
                id,
                from,
                to,
                mode,
                r.length_miles,
                r.capacity,
                speed,
                rates,
            ));
            Ok(())
        };
        push(r.link_id.clone(), from, to)?;
        if bidirectional {
            push(format!("{}{REVERSE_SUFFIX}", r.link_id), to, from)?;
        }
    }

    let mut terminals = Vec::new();
    for (row, r) in read_rows::<TerminalRow>(terminals_file)? {
        let node = *node_index.get(&r.node_id).ok_or_else(|| {
            Error::schema(
                terminals_file,
                row,
                format!("terminal references missing node {}", r.node_id),
            )
        })?;
        let transfer_cost = r.transfer_cost_usd.unwrap_or(rates.default_transfer_cost_usd);
        let processing_time = r.processing_hours.unwrap_or(0.0);
        for (name, v) in [
            ("capacity", r.capacity),
            ("transfer_cost_usd", transfer_cost),
            ("processing_hours", processing_time),
        ] {
            if !(v >= 0.0) {
                return Err(Error::schema(
                    terminals_file,
                    row,
                    format!("{name} {v} must be non-negative"),
                ));
            }
        }
        terminals.push(TerminalRecord {
            node,
            capacity: r.capacity,
            transfer_cost,
            processing_time,
        });
    }

    let net = IntermodalNetwork::from_parts(nodes, links, terminals)?;
    let diagnostics = validate_network(&net);
    if let Some(d) = diagnostics.iter().find(|d| d.kind == DiagnosticKind::Topology) {
        return Err(Error::Topology(d.to_string()));
    }
    if let Some(d) = diagnostics.first() {
        return Err(Error::schema(terminals_file, 0, d.to_string()));
    }
    Ok(net)
}

/// Builds a link record with derived travel time and unit cost.
#[allow(clippy::too_many_arguments)]
pub fn derive_link(
    id: String,
    from: NodeIx,
    to: NodeIx,
    mode: Mode,
    length: f64,
    capacity: f64,
    speed: f64,
    rates: &RateConfig,
) -> LinkRecord {
    LinkRecord {
        id,
        from,
        to,
        mode,
        length,
        capacity,
        speed,
        travel_time: length / speed,
        unit_cost: rates.rate(mode) * length,
    }
}

/// Loads demand rows. Blank deadlines receive `default_deadline` hours;
/// weights in pounds are converted to containers, rounding up.
pub fn load_demands(
    demands_file: &Path,
    net: &IntermodalNetwork,
    default_deadline: f64,
) -> Result<Vec<CommodityDemand>> {
    let mut out = Vec::new();
    let mut ods: HashMap<String, OdPair> = HashMap::new();
    for (row, r) in read_rows::<DemandRow>(demands_file)? {
        let resolve = |id: &str| {
            net.node_ix(id).ok_or_else(|| {
                Error::Reference(format!(
                    "{}: row {row}: OD {} references unknown node {id}",
                    demands_file.display(),
                    r.od_id
                ))
            })
        };
        let od = OdPair {
            id: r.od_id.clone(),
            origin: resolve(&r.origin)?,
            destination: resolve(&r.destination)?,
        };
        if od.origin == od.destination {
            return Err(Error::schema(
                demands_file,
                row,
                format!("OD {} has origin = destination", od.id),
            ));
        }
        for end in [od.origin, od.destination] {
            if net.node(end).kind != NodeKind::HighwayIntersection {
                return Err(Error::schema(
                    demands_file,
                    row,
                    format!("OD {} endpoint {} is not a highway node", od.id, net.node(end).id),
                ));
            }
        }
        if let Some(prev) = ods.get(&od.id) {
            if prev != &od {
                return Err(Error::schema(
                    demands_file,
                    row,
                    format!("OD {} is declared with different endpoints", od.id),
                ));
            }
        } else {
            ods.insert(od.id.clone(), od.clone());
        }

        let containers = match (r.containers, r.pounds) {
            (Some(c), _) => {
                if c < 0.0 || c.fract() != 0.0 || !c.is_finite() {
                    return Err(Error::schema(
                        demands_file,
                        row,
                        format!("containers must be a non-negative integer, got {c}"),
                    ));
                }
                c as u64
            }
            (None, Some(lbs)) => pounds_to_containers(lbs)
                .ok_or_else(|| Error::schema(demands_file, row, format!("pounds must be non-negative, got {lbs}")))?,
            (None, None) => {
                return Err(Error::schema(
                    demands_file,
                    row,
                    "row has neither containers nor pounds",
                ))
            }
        };
        let deadline = r.deadline_hours.unwrap_or(default_deadline);
        if !(deadline > 0.0) {
            return Err(Error::schema(
                demands_file,
                row,
                format!("deadline {deadline} must be positive"),
            ));
        }
        out.push(CommodityDemand {
            od,
            commodity: r.commodity,
            containers,
            deadline,
        });
    }
    for d in validate_demands(net, &out) {
        log::warn!("{d}");
    }
    Ok(out)
}

/// Converts a shipment weight to whole containers, rounding up.
pub fn pounds_to_containers(pounds: f64) -> Option<u64> {
    if !(pounds >= 0.0) || !pounds.is_finite() {
        return None;
    }
    Some((pounds / POUNDS_PER_CONTAINER).ceil() as u64)
}

/// Writes the network as three CSV files (`nodes.csv`, `links.csv`,
/// `terminals.csv`) using directed rows with explicit speeds.
pub fn write_network(net: &IntermodalNetwork, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = csv::Writer::from_path(dir.join("nodes.csv"))?;
    w.write_record(["node_id", "kind", "lat", "lon"])?;
    for n in &net.nodes {
        w.write_record([
            n.id.clone(),
            n.kind.code().to_string(),
            n.latitude.map(|v| v.to_string()).unwrap_or_default(),
            n.longitude.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = csv::Writer::from_path(dir.join("links.csv"))?;
    w.write_record([
        "link_id",
        "from",
        "to",
        "mode",
        "length_miles",
        "capacity",
        "speed_mph",
        "bidirectional",
    ])?;
    for l in &net.links {
        w.write_record([
            l.id.clone(),
            net.nodes[l.from.0].id.clone(),
            net.nodes[l.to.0].id.clone(),
            l.mode.to_string(),
            l.length.to_string(),
            l.capacity.to_string(),
            l.speed.to_string(),
            "0".to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = csv::Writer::from_path(dir.join("terminals.csv"))?;
    w.write_record(["node_id", "capacity", "transfer_cost_usd", "processing_hours"])?;
    for t in &net.terminals {
        w.write_record([
            net.nodes[t.node.0].id.clone(),
            t.capacity.to_string(),
            t.transfer_cost.to_string(),
            t.processing_time.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;
    Ok(())
}

/// Writes demands in the `demands.csv` schema.
pub fn write_demands(net: &IntermodalNetwork, demands: &[CommodityDemand], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "od_id",
        "origin",
        "destination",
        "commodity",
        "containers",
        "deadline_hours",
    ])?;
    for d in demands {
        w.write_record([
            d.od.id.clone(),
            net.node(d.od.origin).id.clone(),
            net.node(d.od.destination).id.clone(),
            d.commodity.clone(),
            d.containers.to_string(),
            d.deadline.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    fn three_node(dir: &Path, links: &str) -> Result<IntermodalNetwork> {
        let n = write(
            dir,
            "nodes.csv",
            "node_id,kind,lat,lon\n# comment\nO,H,,\nT,S,,\nD,H,,\n",
        );
        let l = write(dir, "links.csv", links);
        let t = write(
            dir,
            "terminals.csv",
            "node_id,capacity,transfer_cost_usd,processing_hours\nT,100,,4\n",
        );
        load_network(&n, &l, &t, &RateConfig::default())
    }

    #[test]
    fn minimal_directed_network() {
        let dir = tempfile::tempdir().unwrap();
        let net = three_node(
            dir.path(),
            "link_id,from,to,mode,length_miles,capacity,speed_mph,bidirectional\n\
             a,O,T,road,100,50,,0\nb,T,D,road,50,50,50,0\n",
        )
        .unwrap();
        assert_eq!(net.links().len(), 2);
        let a = net.link(net.link_ix("a").unwrap());
        assert!((a.unit_cost - 167.0).abs() < 1e-9);
        assert!((a.travel_time - 100.0 / 65.0).abs() < 1e-12);
        let b = net.link(net.link_ix("b").unwrap());
        assert_eq!(b.travel_time, 1.0);
        let t = net.terminal(net.terminal_ix("T").unwrap());
        assert_eq!(t.transfer_cost, 70.0);
        assert!(validate_network(&net).is_empty());
    }

    #[test]
    fn bidirectional_rows_expand() {
        let dir = tempfile::tempdir().unwrap();
        let net = three_node(
            dir.path(),
            "link_id,from,to,mode,length_miles,capacity,speed_mph,bidirectional\n\
             a,O,T,road,100,50,,1\nb,T,D,road,50,50,50,0\n",
        )
        .unwrap();
        assert_eq!(net.links().len(), 3);
        let r = net.link(net.link_ix("a_rev").unwrap());
        assert_eq!(net.node(r.from).id, "T");
        assert_eq!(r.length, 100.0);
        assert_eq!(net.reverse_links(net.link_ix("a").unwrap()).count(), 1);
    }

    #[test]
    fn rail_rate_applies_per_mile() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(dir.path(), "nodes.csv", "node_id,kind\nS1,S\nS2,S\n");
        let l = write(
            dir.path(),
            "links.csv",
            "link_id,from,to,mode,length_miles,capacity\nr,S1,S2,rail,500,10\n",
        );
        let t = write(dir.path(), "terminals.csv", "node_id,capacity\nS1,1\nS2,1\n");
        let net = load_network(&n, &l, &t, &RateConfig::default()).unwrap();
        let r = net.link(LinkIx(0));
        assert!((r.unit_cost - 300.0).abs() < 1e-9);
        assert!((r.travel_time - 500.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn missing_endpoint_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let err = three_node(
            dir.path(),
            "link_id,from,to,mode,length_miles,capacity,speed_mph,bidirectional\n\
             a,O,T,road,100,50,,0\nb,T,X,road,50,50,50,0\n",
        )
        .unwrap_err();
        match err {
            Error::Schema { row, message, .. } => {
                assert_eq!(row, 2);
                assert!(message.contains("missing node X"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_link_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = three_node(
            dir.path(),
            "link_id,from,to,mode,length_miles,capacity\na,O,T,road,1,1\na,T,D,road,1,1\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "{err}");
    }

    #[test]
    fn rail_on_highway_node_is_topology_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = three_node(
            dir.path(),
            "link_id,from,to,mode,length_miles,capacity\na,O,T,rail,1,1\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Topology(_)), "{err}");
    }

    fn toy_parts() -> (Vec<NodeRecord>, Vec<LinkRecord>, Vec<TerminalRecord>) {
        let rates = RateConfig::default();
        let node = |id: &str, kind| NodeRecord {
            id: id.into(),
            kind,
            latitude: None,
            longitude: None,
        };
        let nodes = vec![
            node("O", NodeKind::HighwayIntersection),
            node("S", NodeKind::IntermodalTerminal),
            node("R", NodeKind::RailJunction),
        ];
        let links = vec![
            derive_link("a".into(), NodeIx(0), NodeIx(1), Mode::Road, 10.0, 5.0, 65.0, &rates),
            derive_link("b".into(), NodeIx(1), NodeIx(2), Mode::Rail, 10.0, 5.0, 30.0, &rates),
        ];
        let terminals = vec![TerminalRecord {
            node: NodeIx(1),
            capacity: 1.0,
            transfer_cost: 70.0,
            processing_time: 1.0,
        }];
        (nodes, links, terminals)
    }

    #[test]
    fn diagnostics_for_broken_networks() {
        let (nodes, links, terminals) = toy_parts();
        let ok = IntermodalNetwork::from_parts(nodes.clone(), links.clone(), terminals.clone()).unwrap();
        assert!(validate_network(&ok).is_empty());

        let rates = RateConfig::default();
        let mut bad_links = links.clone();
        bad_links.push(derive_link(
            "c".into(),
            NodeIx(2),
            NodeIx(0),
            Mode::Rail,
            5.0,
            1.0,
            30.0,
            &rates,
        ));
        let net = IntermodalNetwork::from_parts(nodes.clone(), bad_links, terminals).unwrap();
        let d = validate_network(&net);
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].kind, DiagnosticKind::Topology);

        let net = IntermodalNetwork::from_parts(nodes, links, vec![]).unwrap();
        let d = validate_network(&net);
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].kind, DiagnosticKind::Completeness);
    }

    #[test]
    fn kind_partition_covers_nodes() {
        let (nodes, links, terminals) = toy_parts();
        let net = IntermodalNetwork::from_parts(nodes, links, terminals).unwrap();
        let total: usize = [
            NodeKind::HighwayIntersection,
            NodeKind::RailJunction,
            NodeKind::IntermodalTerminal,
        ]
        .iter()
        .map(|&k| net.nodes_of_kind(k).count())
        .sum();
        assert_eq!(total, net.nodes().len());
    }

    #[test]
    fn demands_default_deadline_and_pounds() {
        let dir = tempfile::tempdir().unwrap();
        let net = three_node(
            dir.path(),
            "link_id,from,to,mode,length_miles,capacity\na,O,T,road,1,1\nb,T,D,road,1,1\n",
        )
        .unwrap();
        let p = write(
            dir.path(),
            "demands.csv",
            "od_id,origin,destination,commodity,containers,deadline_hours\n\
             1,O,D,coal,10,\n1,O,D,grain,0,48\n",
        );
        let d = load_demands(&p, &net, 168.0).unwrap();
        assert_eq!(d[0].deadline, 168.0);
        assert_eq!(d[0].containers, 10);
        assert_eq!(d[1].containers, 0);
        assert_eq!(d[1].deadline, 48.0);

        let p = write(
            dir.path(),
            "demands2.csv",
            "od_id,origin,destination,commodity,pounds,deadline_hours\n1,O,D,coal,200000,\n2,O,D,coal,40001,\n",
        );
        let d = load_demands(&p, &net, 168.0).unwrap();
        assert_eq!(d[0].containers, 5);
        assert_eq!(d[1].containers, 2);
    }

    #[test]
    fn demand_errors() {
        let dir = tempfile::tempdir().unwrap();
        let net = three_node(
            dir.path(),
            "link_id,from,to,mode,length_miles,capacity\na,O,T,road,1,1\nb,T,D,road,1,1\n",
        )
        .unwrap();
        let p = write(
            dir.path(),
            "neg.csv",
            "od_id,origin,destination,commodity,containers,deadline_hours\n1,O,D,coal,-3,\n",
        );
        assert!(matches!(load_demands(&p, &net, 168.0), Err(Error::Schema { .. })));
        let p = write(
            dir.path(),
            "unk.csv",
            "od_id,origin,destination,commodity,containers,deadline_hours\n1,O,Z,coal,3,\n",
        );
        assert!(matches!(load_demands(&p, &net, 168.0), Err(Error::Reference(_))));
    }

    #[test]
    fn rate_config_parses_key_values() {
        let cfg = RateConfig::parse("road_rate_usd_per_mile = 2.0\n# note\nrail_speed_mph = 40\n").unwrap();
        assert_eq!(cfg.road_rate_usd_per_mile, 2.0);
        assert_eq!(cfg.rail_speed_mph, 40.0);
        assert_eq!(cfg.rail_rate_usd_per_mile, 0.60);
        assert!(RateConfig::parse("road_speed_mph = 0").is_err());
        assert!(RateConfig::parse("bogus = 1").is_err());
    }
}
