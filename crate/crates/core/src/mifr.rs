//! The mixed-integer intermodal freight routing model.
//!
//! For every (OD pair, commodity) with positive demand the instance holds one
//! block of variables laid out as
//!
//! ```text
//! X[road links] X̃[rail links] F[terminals] U Y[terminals] δ[road links] δ̃[rail links]
//! ```
//!
//! Flow variables are fractions of the pair's demand. Rows are emitted pair by
//! pair in a fixed family order, followed by one capacity row per road link,
//! rail link and terminal.

use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::netmodel::{CommodityDemand, IntermodalNetwork, LinkIx, Mode, NodeIx, NodeKind, OdPair, TerminalIx};
use crate::paths::{enumerate_candidate_paths, CandidatePath, PathSet, DEFAULT_CUTOFF_FACTOR, DEFAULT_MAX_PATHS};
use crate::robust::ReductionTable;

/// Multiplier applied to the most expensive OD's road-only cost to obtain the default Ψ.
pub const PSI_MULTIPLIER: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Dollars per unsatisfied container. `None` derives it from the network.
    pub psi: Option<f64>,
    pub big_m: f64,
    pub epsilon: f64,
    pub cutoff_factor: f64,
    pub max_paths: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            psi: None,
            big_m: 1e6,
            epsilon: 1e-6,
            cutoff_factor: DEFAULT_CUTOFF_FACTOR,
            max_paths: DEFAULT_MAX_PATHS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(psi) = self.psi {
            if !(psi > 0.0 && psi.is_finite()) {
                return Err(Error::Config(format!("psi must be positive, got {psi}")));
            }
        }
        if !(self.big_m >= 1.0) {
            return Err(Error::Config(format!("big_m must be at least 1, got {}", self.big_m)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1e-3], got {}",
                self.epsilon
            )));
        }
        if !(self.cutoff_factor >= 1.0) {
            return Err(Error::Config(format!(
                "cutoff_factor must be at least 1, got {}",
                self.cutoff_factor
            )));
        }
        if self.max_paths == 0 {
            return Err(Error::Config("max_paths must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    RoadFlow,
    RailFlow,
    Transfer,
    Unsatisfied,
    TerminalSelect,
    RoadActive,
    RailActive,
}

impl VarKind {
    pub fn name(self) -> &'static str {
        match self {
            VarKind::RoadFlow => "X",
            VarKind::RailFlow => "Xr",
            VarKind::Transfer => "F",
            VarKind::Unsatisfied => "U",
            VarKind::TerminalSelect => "Y",
            VarKind::RoadActive => "delta",
            VarKind::RailActive => "delta_r",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(
            self,
            VarKind::TerminalSelect | VarKind::RoadActive | VarKind::RailActive
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarInfo {
    pub kind: VarKind,
    pub pair: usize,
    /// Link index for link families, terminal index for terminal families, 0 for `U`.
    pub element: usize,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowFamily {
    HighwayBalance,
    OriginDestination,
    RoadActivation,
    AntiParallel,
    OriginInflow,
    RailBalance,
    TerminalBalance,
    RailGate,
    TransferLink,
    Deadline,
    Unsatisfied,
    RoadEpsilon,
    RailEpsilon,
    TransferEpsilon,
    RoadCapacity,
    RailCapacity,
    TerminalCapacity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub family: RowFamily,
    pub pair: Option<usize>,
    /// Sorted by variable index, no duplicates, no zeros.
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    fn new(family: RowFamily, pair: Option<usize>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, a) in terms {
            *merged.entry(j).or_insert(0.0) += a;
        }
        let coefs = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        Row {
            family,
            pair,
            coefs,
            sense,
            rhs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row, 0 if satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Magnitude used to scale feasibility tolerances.
    pub fn scale(&self) -> f64 {
        self.coefs
            .iter()
            .fold(self.rhs.abs().max(1.0), |m, &(_, a)| m.max(a.abs()))
    }
}

/// One (OD pair, commodity) block.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBlock {
    pub od: OdPair,
    pub commodity: String,
    /// Containers.
    pub demand: f64,
    /// Hours.
    pub deadline: f64,
    pub paths: Vec<CandidatePath>,
    /// Index of this block's first variable.
    pub offset: usize,
}

/// Row counts per family together with the closed-form expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct Census {
    pub by_family: BTreeMap<RowFamily, usize>,
    pub total_rows: usize,
    pub expected_rows: usize,
    pub total_vars: usize,
    pub expected_vars: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMetadata {
    pub psi: f64,
    pub psi_derived: bool,
    pub epsilon: f64,
    pub big_m: f64,
    pub census: Census,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MifrInstance {
    pub network: Arc<IntermodalNetwork>,
    pub pairs: Vec<PairBlock>,
    pub road_links: Vec<LinkIx>,
    pub rail_links: Vec<LinkIx>,
    pub terminals: Vec<TerminalIx>,
    pub vars: Vec<VarInfo>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub reductions: ReductionTable,
    pub metadata: InstanceMetadata,
    road_pos: Vec<Option<usize>>,
    rail_pos: Vec<Option<usize>>,
}

/// Layout of a pair block given the family sizes.
#[derive(Debug, Clone, Copy)]
struct Layout {
    nh: usize,
    nr: usize,
    ns: usize,
}

impl Layout {
    fn width(self) -> usize {
        2 * self.nh + 2 * self.nr + 2 * self.ns + 1
    }
    fn x(self, o: usize, pos: usize) -> usize {
        o + pos
    }
    fn xr(self, o: usize, pos: usize) -> usize {
        o + self.nh + pos
    }
    fn f(self, o: usize, s: usize) -> usize {
        o + self.nh + self.nr + s
    }
    fn u(self, o: usize) -> usize {
        o + self.nh + self.nr + self.ns
    }
    fn y(self, o: usize, s: usize) -> usize {
        self.u(o) + 1 + s
    }
    fn delta(self, o: usize, pos: usize) -> usize {
        self.u(o) + 1 + self.ns + pos
    }
    fn delta_r(self, o: usize, pos: usize) -> usize {
        self.u(o) + 1 + self.ns + self.nh + pos
    }
}

impl MifrInstance {
    fn layout(&self) -> Layout {
        Layout {
            nh: self.road_links.len(),
            nr: self.rail_links.len(),
            ns: self.terminals.len(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn psi(&self) -> f64 {
        self.metadata.psi
    }

    /// Variable index of `X` for a road link in `pair`.
    pub fn x(&self, pair: usize, link: LinkIx) -> Option<usize> {
        self.road_pos[link.0].map(|p| self.layout().x(self.pairs[pair].offset, p))
    }

    pub fn x_rail(&self, pair: usize, link: LinkIx) -> Option<usize> {
        self.rail_pos[link.0].map(|p| self.layout().xr(self.pairs[pair].offset, p))
    }

    /// Flow variable of either mode on `link`.
    pub fn flow(&self, pair: usize, link: LinkIx) -> usize {
        match self.network.link(link).mode {
            Mode::Road => self.x(pair, link),
            Mode::Rail => self.x_rail(pair, link),
        }
        .expect("every link has a flow variable")
    }

    pub fn activity_var(&self, pair: usize, link: LinkIx) -> usize {
        let o = self.pairs[pair].offset;
        match self.network.link(link).mode {
            Mode::Road => self.layout().delta(o, self.road_pos[link.0].unwrap()),
            Mode::Rail => self.layout().delta_r(o, self.rail_pos[link.0].unwrap()),
        }
    }

    pub fn transfer(&self, pair: usize, t: TerminalIx) -> usize {
        self.layout().f(self.pairs[pair].offset, t.0)
    }

    pub fn select(&self, pair: usize, t: TerminalIx) -> usize {
        self.layout().y(self.pairs[pair].offset, t.0)
    }

    pub fn unsatisfied(&self, pair: usize) -> usize {
        self.layout().u(self.pairs[pair].offset)
    }

    /// Stable identifier of a variable, e.g. `X[1/coal/OM]`.
    pub fn var_label(&self, j: usize) -> (String, String) {
        let v = &self.vars[j];
        let p = &self.pairs[v.pair];
        let element = match v.kind {
            VarKind::RoadFlow | VarKind::RailFlow | VarKind::RoadActive | VarKind::RailActive => {
                self.network.link(LinkIx(v.element)).id.clone()
            }
            VarKind::Transfer | VarKind::TerminalSelect => {
                let t = self.network.terminal(TerminalIx(v.element));
                self.network.node(t.node).id.clone()
            }
            VarKind::Unsatisfied => String::new(),
        };
        let index = if element.is_empty() {
            format!("{}/{}", p.od.id, p.commodity)
        } else {
            format!("{}/{}/{}", p.od.id, p.commodity, element)
        };
        (v.kind.name().to_string(), index)
    }

    /// The all-unsatisfied point: no flow anywhere, `U = d`.
    pub fn all_unsatisfied(&self) -> SolutionVector {
        let mut values = vec![0.0; self.vars.len()];
        for p in 0..self.pairs.len() {
            values[self.unsatisfied(p)] = self.pairs[p].demand;
        }
        SolutionVector::new(self, values)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Sets every indicator to the smallest value the flows allow and rounds
    /// `U` to the nearest integer when it is within `int_tol` of one.
    ///
    /// Indicators carry no cost, so the completed point has the same objective.
    pub fn complete_indicators(&self, x: &[f64], flow_tol: f64, int_tol: f64) -> Vec<f64> {
        let mut out = x.to_vec();
        let net = &self.network;
        for p in 0..self.pairs.len() {
            for &l in self.road_links.iter().chain(&self.rail_links) {
                let on = x[self.flow(p, l)] > flow_tol;
                out[self.activity_var(p, l)] = if on { 1.0 } else { 0.0 };
            }
            for (s, &t) in self.terminals.iter().enumerate() {
                let node = net.terminal(t).node;
                let mut rail = 0.0;
                for &l in net.out_links(node) {
                    if net.link(l).mode == Mode::Rail {
                        rail += x[self.flow(p, l)];
                    }
                }
                for &l in net.in_links(node) {
                    if net.link(l).mode == Mode::Rail {
                        rail -= x[self.flow(p, l)];
                    }
                }
                let on = x[self.transfer(p, TerminalIx(s))] > flow_tol || rail.abs() > flow_tol;
                out[self.select(p, t)] = if on { 1.0 } else { 0.0 };
            }
            let u = self.unsatisfied(p);
            let r = x[u].round();
            if (x[u] - r).abs() <= int_tol {
                out[u] = r.max(0.0);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionVector {
    pub values: Vec<f64>,
    pub objective: f64,
}

impl SolutionVector {
    pub fn new(inst: &MifrInstance, values: Vec<f64>) -> Self {
        let objective = inst.objective_value(&values);
        SolutionVector { values, objective }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Row index, or `None` for a variable domain violation.
    pub row: Option<usize>,
    pub what: String,
    pub amount: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(r) => write!(f, "row {r} ({}): violated by {:.3e}", self.what, self.amount),
            None => write!(f, "{}: violated by {:.3e}", self.what, self.amount),
        }
    }
}

/// Every row and domain violation of `sol` larger than `tol` (scaled by row magnitude).
pub fn check_feasibility(inst: &MifrInstance, sol: &SolutionVector, tol: f64) -> Result<Vec<Violation>> {
    let x = &sol.values;
    if x.len() != inst.vars.len() {
        return Err(Error::Dimension {
            expected: inst.vars.len(),
            got: x.len(),
        });
    }
    let mut out = Vec::new();
    for (j, v) in inst.vars.iter().enumerate() {
        let val = x[j];
        let scale = v.upper.abs().max(1.0);
        let amount = if !val.is_finite() {
            f64::INFINITY
        } else {
            (v.lower - val).max(val - v.upper).max(0.0)
        };
        let frac = if v.integer { (val - val.round()).abs() } else { 0.0 };
        if amount > tol * scale || frac > tol {
            let (name, index) = inst.var_label(j);
            out.push(Violation {
                row: None,
                what: format!("domain of {name}[{index}]"),
                amount: amount.max(frac),
            });
        }
    }
    for (i, row) in inst.rows.iter().enumerate() {
        let amount = row.violation(x);
        if amount > tol * row.scale() {
            out.push(Violation {
                row: Some(i),
                what: format!("{:?}", row.family),
                amount,
            });
        }
    }
    Ok(out)
}

/// Closed-form row count for the given family sizes.
pub fn expected_row_count(
    n_highway: usize,
    n_rail: usize,
    n_terminals: usize,
    n_road: usize,
    n_rail_links: usize,
    antiparallel: usize,
    paths_per_pair: &[usize],
) -> usize {
    let per_pair_fixed = n_highway + n_rail + 7 * n_terminals + 2 * n_road + 2 * n_rail_links + antiparallel + 3;
    paths_per_pair.iter().map(|p| per_pair_fixed + p).sum::<usize>() + n_road + n_rail_links + n_terminals
}

fn cheapest_cost(net: &IntermodalNetwork, from: NodeIx, to: NodeIx, commodity: &str, road_only: bool) -> Option<f64> {
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    let mut dist = vec![f64::INFINITY; net.nodes().len()];
    dist[from.0] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, from.0)]);
    while let Some(Item(d, n)) = heap.pop() {
        if d > dist[n] {
            continue;
        }
        if n == to.0 {
            return Some(d);
        }
        for &l in net.out_links(NodeIx(n)) {
            let rec = net.link(l);
            if road_only && rec.mode != Mode::Road {
                continue;
            }
            let nd = d + net.link_cost(l, commodity);
            if nd < dist[rec.to.0] {
                dist[rec.to.0] = nd;
                heap.push(Item(nd, rec.to.0));
            }
        }
    }
    None
}

/// Ten times the largest per-container cost of the cheapest road-only route over all demanded pairs.
pub fn default_psi(net: &IntermodalNetwork, demands: &[CommodityDemand]) -> f64 {
    let mut worst: f64 = 0.0;
    for d in demands.iter().filter(|d| d.containers > 0) {
        let (o, t) = (d.od.origin, d.od.destination);
        let cost =
            cheapest_cost(net, o, t, &d.commodity, true).or_else(|| cheapest_cost(net, o, t, &d.commodity, false));
        if let Some(c) = cost {
            worst = worst.max(c);
        }
    }
    if worst > 0.0 {
        PSI_MULTIPLIER * worst
    } else {
        1.0
    }
}

/// Enumerates candidate paths for every distinct OD with positive demand.
pub fn pathsets_for(net: &IntermodalNetwork, demands: &[CommodityDemand], cfg: &ModelConfig) -> Result<Vec<PathSet>> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for d in demands.iter().filter(|d| d.containers > 0) {
        if seen.insert(d.od.id.clone(), ()).is_none() {
            out.push(enumerate_candidate_paths(net, &d.od, cfg.cutoff_factor, cfg.max_paths)?);
        }
    }
    Ok(out)
}

/// Assembles the model. Pairs with zero demand contribute nothing and are left out.
pub fn build_instance(
    net: Arc<IntermodalNetwork>,
    demands: &[CommodityDemand],
    reductions: &ReductionTable,
    pathsets: &[PathSet],
    cfg: &ModelConfig,
) -> Result<MifrInstance> {
    cfg.validate()?;
    if reductions.links.len() != net.links().len() || reductions.terminals.len() != net.terminals().len() {
        return Err(Error::Reference(format!(
            "reduction table covers {} links and {} terminals, network has {} and {}",
            reductions.links.len(),
            reductions.terminals.len(),
            net.links().len(),
            net.terminals().len()
        )));
    }
    for s in net.nodes_of_kind(NodeKind::IntermodalTerminal) {
        if net.terminal_at(s).is_none() {
            return Err(Error::Topology(format!(
                "terminal node {} has no terminal record",
                net.node(s).id
            )));
        }
    }

    let road_links: Vec<LinkIx> = net.links_of_mode(Mode::Road).collect();
    let rail_links: Vec<LinkIx> = net.links_of_mode(Mode::Rail).collect();
    let terminals: Vec<TerminalIx> = (0..net.terminals().len()).map(TerminalIx).collect();
    let mut road_pos = vec![None; net.links().len()];
    let mut rail_pos = vec![None; net.links().len()];
    for (i, &l) in road_links.iter().enumerate() {
        road_pos[l.0] = Some(i);
    }
    for (i, &l) in rail_links.iter().enumerate() {
        rail_pos[l.0] = Some(i);
    }
    let lay = Layout {
        nh: road_links.len(),
        nr: rail_links.len(),
        ns: terminals.len(),
    };

    let (psi, psi_derived) = match cfg.psi {
        Some(p) => (p, false),
        None => (default_psi(&net, demands), true),
    };

    let mut pairs = Vec::new();
    for d in demands.iter().filter(|d| d.containers > 0) {
        let set = pathsets
            .iter()
            .find(|s| s.od == d.od.id)
            .ok_or_else(|| Error::Config(format!("no candidate path set for OD {}", d.od.id)))?;
        pairs.push(PairBlock {
            od: d.od.clone(),
            commodity: d.commodity.clone(),
            demand: d.containers as f64,
            deadline: d.deadline,
            paths: set.paths.clone(),
            offset: pairs.len() * lay.width(),
        });
    }

    let mut vars = Vec::with_capacity(pairs.len() * lay.width());
    let mut objective = Vec::with_capacity(pairs.len() * lay.width());
    for (p, pair) in pairs.iter().enumerate() {
        let var = |kind: VarKind, element: usize, upper: f64, integer: bool| VarInfo {
            kind,
            pair: p,
            element,
            lower: 0.0,
            upper,
            integer,
        };
        for &l in &road_links {
            vars.push(var(VarKind::RoadFlow, l.0, 1.0, false));
            objective.push(pair.demand * net.link_cost(l, &pair.commodity));
        }
        for &l in &rail_links {
            vars.push(var(VarKind::RailFlow, l.0, 1.0, false));
            objective.push(pair.demand * net.link_cost(l, &pair.commodity));
        }
        for &t in &terminals {
            vars.push(var(VarKind::Transfer, t.0, 1.0, false));
            objective.push(pair.demand * net.transfer_cost(t, &pair.commodity));
        }
        vars.push(var(VarKind::Unsatisfied, 0, pair.demand, true));
        objective.push(psi);
        for &t in &terminals {
            vars.push(var(VarKind::TerminalSelect, t.0, 1.0, true));
            objective.push(0.0);
        }
        for &l in &road_links {
            vars.push(var(VarKind::RoadActive, l.0, 1.0, true));
            objective.push(0.0);
        }
        for &l in &rail_links {
            vars.push(var(VarKind::RailActive, l.0, 1.0, true));
            objective.push(0.0);
        }
    }

    let flow_of = |o: usize, l: LinkIx| match net.link(l).mode {
        Mode::Road => lay.x(o, road_pos[l.0].unwrap()),
        Mode::Rail => lay.xr(o, rail_pos[l.0].unwrap()),
    };
    let act_of = |o: usize, l: LinkIx| match net.link(l).mode {
        Mode::Road => lay.delta(o, road_pos[l.0].unwrap()),
        Mode::Rail => lay.delta_r(o, rail_pos[l.0].unwrap()),
    };
    // Net outflow of one mode at a node.
    let imbalance = |o: usize, node: NodeIx, mode: Mode| -> Vec<(usize, f64)> {
        let mut t = Vec::new();
        for &l in net.out_links(node) {
            if net.link(l).mode == mode {
                t.push((flow_of(o, l), 1.0));
            }
        }
        for &l in net.in_links(node) {
            if net.link(l).mode == mode {
                t.push((flow_of(o, l), -1.0));
            }
        }
        t
    };

    let mut rows = Vec::new();
    let mut antiparallel = 0usize;
    for &l in &road_links {
        if net.reverse_links(l).next().is_some() {
            antiparallel += 1;
        }
    }
    let highway: Vec<NodeIx> = net.nodes_of_kind(NodeKind::HighwayIntersection).collect();
    let rail_nodes: Vec<NodeIx> = net.nodes_of_kind(NodeKind::RailJunction).collect();

    for (p, pair) in pairs.iter().enumerate() {
        let o = pair.offset;
        let (ori, des) = (pair.od.origin, pair.od.destination);
        let pp = Some(p);

        for &i in &highway {
            let (sense, rhs) = if i == ori {
                (Sense::Le, 1.0)
            } else if i == des {
                (Sense::Ge, -1.0)
            } else {
                (Sense::Eq, 0.0)
            };
            rows.push(Row::new(
                RowFamily::HighwayBalance,
                pp,
                imbalance(o, i, Mode::Road),
                sense,
                rhs,
            ));
        }

        let mut t = Vec::new();
        for &l in net.out_links(ori) {
            if net.link(l).mode == Mode::Road {
                t.push((flow_of(o, l), 1.0));
            }
        }
        for &l in net.in_links(des) {
            if net.link(l).mode == Mode::Road {
                t.push((flow_of(o, l), -1.0));
            }
        }
        rows.push(Row::new(RowFamily::OriginDestination, pp, t, Sense::Eq, 0.0));

        for &l in &road_links {
            rows.push(Row::new(
                RowFamily::RoadActivation,
                pp,
                vec![(flow_of(o, l), 1.0), (act_of(o, l), -1.0)],
                Sense::Le,
                0.0,
            ));
        }

        // X on (m,i) excludes using its reverse (i,m).
        for &l in &road_links {
            if let Some(rev) = net.reverse_links(l).next() {
                rows.push(Row::new(
                    RowFamily::AntiParallel,
                    pp,
                    vec![(flow_of(o, l), 1.0), (act_of(o, rev), 1.0)],
                    Sense::Le,
                    1.0,
                ));
            }
        }

        let inflow: Vec<(usize, f64)> = net
            .in_links(ori)
            .iter()
            .filter(|&&l| net.link(l).mode == Mode::Road)
            .map(|&l| (flow_of(o, l), 1.0))
            .collect();
        rows.push(Row::new(RowFamily::OriginInflow, pp, inflow, Sense::Eq, 0.0));

        for &i in &rail_nodes {
            rows.push(Row::new(
                RowFamily::RailBalance,
                pp,
                imbalance(o, i, Mode::Rail),
                Sense::Eq,
                0.0,
            ));
        }

        for &s in &terminals {
            let node = net.terminal(s).node;
            let road = imbalance(o, node, Mode::Road);
            let rail = imbalance(o, node, Mode::Rail);
            let both = road.iter().chain(&rail).copied().collect();
            rows.push(Row::new(RowFamily::TerminalBalance, pp, both, Sense::Eq, 0.0));

            let y = lay.y(o, s.0);
            let mut lo = rail.clone();
            lo.push((y, 1.0));
            rows.push(Row::new(RowFamily::RailGate, pp, lo, Sense::Ge, 0.0));
            let mut hi = rail;
            hi.push((y, -1.0));
            rows.push(Row::new(RowFamily::RailGate, pp, hi, Sense::Le, 0.0));

            let f = lay.f(o, s.0);
            let mut lo = road.clone();
            lo.push((f, 1.0));
            rows.push(Row::new(RowFamily::TransferLink, pp, lo, Sense::Ge, 0.0));
            let mut hi = road;
            hi.push((f, -1.0));
            rows.push(Row::new(RowFamily::TransferLink, pp, hi, Sense::Le, 0.0));
        }

        for path in &pair.paths {
            let mut t: Vec<(usize, f64)> = path
                .links
                .iter()
                .map(|&l| (act_of(o, l), net.link(l).travel_time))
                .collect();
            for &s in &path.terminals {
                t.push((lay.y(o, s.0), net.terminal(s).processing_time));
            }
            rows.push(Row::new(RowFamily::Deadline, pp, t, Sense::Le, pair.deadline));
        }

        let mut t = vec![(lay.u(o), 1.0)];
        for &l in net.in_links(des) {
            if net.link(l).mode == Mode::Road {
                t.push((flow_of(o, l), pair.demand));
            }
        }
        rows.push(Row::new(RowFamily::Unsatisfied, pp, t, Sense::Eq, pair.demand));

        let eps = cfg.epsilon;
        for &l in &road_links {
            rows.push(Row::new(
                RowFamily::RoadEpsilon,
                pp,
                vec![(flow_of(o, l), 1.0), (act_of(o, l), -eps)],
                Sense::Ge,
                0.0,
            ));
        }
        for &l in &rail_links {
            let (x, d) = (flow_of(o, l), act_of(o, l));
            rows.push(Row::new(
                RowFamily::RailEpsilon,
                pp,
                vec![(x, 1.0), (d, -eps)],
                Sense::Ge,
                0.0,
            ));
            rows.push(Row::new(
                RowFamily::RailEpsilon,
                pp,
                vec![(x, 1.0), (d, -1.0)],
                Sense::Le,
                0.0,
            ));
        }
        for &s in &terminals {
            let (f, y) = (lay.f(o, s.0), lay.y(o, s.0));
            rows.push(Row::new(
                RowFamily::TransferEpsilon,
                pp,
                vec![(f, 1.0), (y, -1.0)],
                Sense::Le,
                0.0,
            ));
            rows.push(Row::new(
                RowFamily::TransferEpsilon,
                pp,
                vec![(f, 1.0), (y, -eps)],
                Sense::Ge,
                0.0,
            ));
        }
    }

    for (family, links) in [
        (RowFamily::RoadCapacity, &road_links),
        (RowFamily::RailCapacity, &rail_links),
    ] {
        for &l in links {
            let t = pairs
                .iter()
                .map(|pair| (flow_of(pair.offset, l), pair.demand))
                .collect();
            rows.push(Row::new(family, None, t, Sense::Le, reductions.links[l.0].effective));
        }
    }
    for &s in &terminals {
        let t = pairs
            .iter()
            .map(|pair| (lay.f(pair.offset, s.0), pair.demand))
            .collect();
        rows.push(Row::new(
            RowFamily::TerminalCapacity,
            None,
            t,
            Sense::Le,
            reductions.terminals[s.0].effective,
        ));
    }

    let mut by_family = BTreeMap::new();
    for r in &rows {
        *by_family.entry(r.family).or_insert(0) += 1;
    }
    let paths_per_pair: Vec<usize> = pairs.iter().map(|p| p.paths.len()).collect();
    let census = Census {
        by_family,
        total_rows: rows.len(),
        expected_rows: expected_row_count(
            highway.len(),
            rail_nodes.len(),
            terminals.len(),
            road_links.len(),
            rail_links.len(),
            antiparallel,
            &paths_per_pair,
        ),
        total_vars: vars.len(),
        expected_vars: pairs.len() * lay.width(),
    };
    debug_assert_eq!(census.total_rows, census.expected_rows);

    let metadata = InstanceMetadata {
        psi,
        psi_derived,
        epsilon: cfg.epsilon,
        big_m: cfg.big_m,
        census,
        notes: vec![
            "origin inflow is fixed to zero by an equality instead of a big-M inequality".into(),
            "rail imbalance at terminals is gated with M = 1".into(),
            "unsatisfied demand counts inflow over every road link into the destination".into(),
            "anti-parallel exclusion rows exist only for road links whose reverse link exists".into(),
            "upper relational bound on road flow coincides with the activation row and is not repeated".into(),
        ],
    };

    Ok(MifrInstance {
        network: net,
        pairs,
        road_links,
        rail_links,
        terminals,
        vars,
        objective,
        rows,
        reductions: reductions.clone(),
        metadata,
        road_pos,
        rail_pos,
    })
}

/// Enumerates paths and assembles the model in one step.
pub fn build_with_paths(
    net: Arc<IntermodalNetwork>,
    demands: &[CommodityDemand],
    reductions: &ReductionTable,
    cfg: &ModelConfig,
) -> Result<MifrInstance> {
    let sets = pathsets_for(&net, demands, cfg)?;
    build_instance(net, demands, reductions, &sets, cfg)
}

/// Formats `v` in fixed-point notation with 12 significant digits.
pub fn fixed12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { format!("{v}") };
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (11 - mag).clamp(0, 40) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Writes the instance in CPLEX LP text format.
pub fn export_lp(inst: &MifrInstance) -> String {
    let name = |j: usize| {
        let (family, _) = inst.var_label(j);
        format!("{family}_{j}")
    };
    let mut out = String::new();
    let terms = |out: &mut String, coefs: &mut dyn Iterator<Item = (usize, f64)>| {
        let mut n = 0;
        for (j, a) in coefs {
            if a == 0.0 {
                continue;
            }
            let sign = if a < 0.0 { "-" } else { "+" };
            if n > 0 && n % 6 == 0 {
                out.push_str("\n   ");
            }
            let _ = write!(out, " {sign} {} {}", fixed12(a.abs()), name(j));
            n += 1;
        }
        if n == 0 {
            out.push_str(" 0 U_0");
        }
    };
    out.push_str("\\ intermodal freight routing model\nMinimize\n obj:");
    terms(&mut out, &mut inst.objective.iter().copied().enumerate());
    out.push_str("\nSubject To\n");
    for (i, row) in inst.rows.iter().enumerate() {
        if row.coefs.is_empty() {
            continue;
        }
        let _ = write!(out, " r{i}:");
        terms(&mut out, &mut row.coefs.iter().copied());
        let _ = writeln!(out, " {} {}", row.sense.symbol(), fixed12(row.rhs));
    }
    out.push_str("Bounds\n");
    for (j, v) in inst.vars.iter().enumerate() {
        let _ = writeln!(out, " {} <= {} <= {}", fixed12(v.lower), name(j), fixed12(v.upper));
    }
    out.push_str("General\n");
    for (j, v) in inst.vars.iter().enumerate() {
        if v.integer && !v.kind.is_binary() {
            let _ = writeln!(out, " {}", name(j));
        }
    }
    out.push_str("Binary\n");
    for (j, v) in inst.vars.iter().enumerate() {
        if v.kind.is_binary() {
            let _ = writeln!(out, " {}", name(j));
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::netmodel::{derive_link, NodeRecord, RateConfig, TerminalRecord};
    use crate::robust::{reduction_table, ElementRef, UncertaintySpec};

    fn corridor(d: u64) -> MifrInstance {
        let f = fixtures::six_node(d);
        let net = Arc::new(f.network);
        let red = ReductionTable::deterministic(&net);
        build_with_paths(net, &f.demands, &red, &ModelConfig::default()).unwrap()
    }

    /// |A_h| = 4, |A_r| = 1, |S| = 2.
    fn toy() -> MifrInstance {
        let rates = RateConfig::default();
        let node = |id: &str, kind| NodeRecord {
            id: id.into(),
            kind,
            latitude: None,
            longitude: None,
        };
        let nodes = vec![
            node("O", NodeKind::HighwayIntersection),
            node("M", NodeKind::HighwayIntersection),
            node("D", NodeKind::HighwayIntersection),
            node("S1", NodeKind::IntermodalTerminal),
            node("S2", NodeKind::IntermodalTerminal),
        ];
        let l = |id: &str, a: usize, b: usize, mode: Mode, len: f64| {
            derive_link(
                id.into(),
                NodeIx(a),
                NodeIx(b),
                mode,
                len,
                100.0,
                rates.speed(mode),
                &rates,
            )
        };
        let links = vec![
            l("a", 0, 1, Mode::Road, 100.0),
            l("b", 1, 2, Mode::Road, 100.0),
            l("c", 0, 3, Mode::Road, 10.0),
            l("r", 3, 4, Mode::Rail, 150.0),
            l("e", 4, 2, Mode::Road, 10.0),
        ];
        let term = |n: usize| TerminalRecord {
            node: NodeIx(n),
            capacity: 100.0,
            transfer_cost: 70.0,
            processing_time: 2.0,
        };
        let net = IntermodalNetwork::from_parts(nodes, links, vec![term(3), term(4)]).unwrap();
        let demands = vec![CommodityDemand {
            od: OdPair {
                id: "1".into(),
                origin: NodeIx(0),
                destination: NodeIx(2),
            },
            commodity: "k".into(),
            containers: 10,
            deadline: 168.0,
        }];
        let net = Arc::new(net);
        let red = ReductionTable::deterministic(&net);
        build_with_paths(net, &demands, &red, &ModelConfig::default()).unwrap()
    }

    #[test]
    fn toy_variable_count() {
        let inst = toy();
        assert_eq!(inst.num_vars(), 15);
        let count = |k| inst.vars.iter().filter(|v| v.kind == k).count();
        assert_eq!(count(VarKind::RoadFlow), 4);
        assert_eq!(count(VarKind::RailFlow), 1);
        assert_eq!(count(VarKind::Transfer), 2);
        assert_eq!(count(VarKind::Unsatisfied), 1);
        assert_eq!(count(VarKind::TerminalSelect), 2);
        assert_eq!(count(VarKind::RoadActive), 4);
        assert_eq!(count(VarKind::RailActive), 1);
    }

    #[test]
    fn census_matches_closed_form() {
        for inst in [toy(), corridor(10)] {
            let c = &inst.metadata.census;
            assert_eq!(c.total_rows, c.expected_rows);
            assert_eq!(c.total_vars, c.expected_vars);
            assert_eq!(c.by_family[&RowFamily::Deadline], 2);
        }
        // Corridor: |H|=3, |R|=1, |S|=2, |A_h|=4, |A_r|=2, no reverse links, 2 paths.
        let inst = corridor(10);
        assert_eq!(inst.rows.len(), 43);
    }

    #[test]
    fn objective_coefficient_is_demand_times_rate() {
        let rates = RateConfig::default();
        let nodes = vec![
            NodeRecord {
                id: "A".into(),
                kind: NodeKind::HighwayIntersection,
                latitude: None,
                longitude: None,
            },
            NodeRecord {
                id: "B".into(),
                kind: NodeKind::HighwayIntersection,
                latitude: None,
                longitude: None,
            },
        ];
        let links = vec![derive_link(
            "ab".into(),
            NodeIx(0),
            NodeIx(1),
            Mode::Road,
            100.0,
            50.0,
            65.0,
            &rates,
        )];
        let net = Arc::new(IntermodalNetwork::from_parts(nodes, links, vec![]).unwrap());
        let demands = vec![CommodityDemand {
            od: OdPair {
                id: "1".into(),
                origin: NodeIx(0),
                destination: NodeIx(1),
            },
            commodity: "k".into(),
            containers: 10,
            deadline: 168.0,
        }];
        let red = ReductionTable::deterministic(&net);
        let inst = build_with_paths(net, &demands, &red, &ModelConfig::default()).unwrap();
        let x = inst.x(0, LinkIx(0)).unwrap();
        assert!((inst.objective[x] - 1670.0).abs() < 1e-9);
        assert!((inst.psi() - 1670.0).abs() < 1e-9);
    }

    #[test]
    fn zero_theta_is_identical_to_deterministic() {
        let f = fixtures::six_node(10);
        let net = Arc::new(f.network);
        let det = build_with_paths(
            net.clone(),
            &f.demands,
            &ReductionTable::deterministic(&net),
            &ModelConfig::default(),
        )
        .unwrap();
        for q in [0.05, 0.1, 0.15, 0.2] {
            let specs: Vec<_> = net
                .link_ixs()
                .map(|l| UncertaintySpec {
                    element: ElementRef::Link(l),
                    lambda: 0.0,
                    q,
                })
                .collect();
            let red = reduction_table(&net, &specs).unwrap();
            let rob = build_with_paths(net.clone(), &f.demands, &red, &ModelConfig::default()).unwrap();
            assert_eq!(rob.rows, det.rows);
            assert_eq!(rob.objective, det.objective);
            assert_eq!(export_lp(&rob), export_lp(&det));
        }
    }

    #[test]
    fn all_unsatisfied_is_feasible() {
        for inst in [toy(), corridor(10)] {
            let sol = inst.all_unsatisfied();
            assert!(check_feasibility(&inst, &sol, 1e-9).unwrap().is_empty());
        }
    }

    #[test]
    fn capacity_violation_is_reported() {
        let f = fixtures::six_node(10);
        let net = Arc::new(f.network);
        let mut red = ReductionTable::deterministic(&net);
        let om = net.link_ix("OM").unwrap();
        let md = net.link_ix("MD").unwrap();
        // Effective capacity 0.5·d on both road links.
        for l in [om, md] {
            red.links[l.0].effective = 5.0;
        }
        let inst = build_with_paths(net.clone(), &f.demands, &red, &ModelConfig::default()).unwrap();
        let mut x = inst.all_unsatisfied().values;
        for l in [om, md] {
            x[inst.flow(0, l)] = 0.6;
            x[inst.activity_var(0, l)] = 1.0;
        }
        x[inst.unsatisfied(0)] = 4.0;
        let v = check_feasibility(&inst, &SolutionVector::new(&inst, x), 1e-9).unwrap();
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(v.iter().all(|v| v.what == "RoadCapacity"));
    }

    #[test]
    fn completed_intermodal_route_is_feasible() {
        let inst = corridor(10);
        let net = inst.network.clone();
        let mut x = vec![0.0; inst.num_vars()];
        for id in ["OS1", "S1R1", "R1S2", "S2D"] {
            x[inst.flow(0, net.link_ix(id).unwrap())] = 1.0;
        }
        for t in &inst.terminals {
            x[inst.transfer(0, *t)] = 1.0;
        }
        let x = inst.complete_indicators(&x, 1e-9, 1e-6);
        let sol = SolutionVector::new(&inst, x);
        assert!(check_feasibility(&inst, &sol, 1e-9).unwrap().is_empty());
        assert!((sol.objective - 4734.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let inst = toy();
        let sol = SolutionVector {
            values: vec![0.0; 3],
            objective: 0.0,
        };
        assert!(matches!(
            check_feasibility(&inst, &sol, 1e-9),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn missing_pathset_is_config_error() {
        let f = fixtures::six_node(10);
        let net = Arc::new(f.network);
        let red = ReductionTable::deterministic(&net);
        let r = build_instance(net, &f.demands, &red, &[], &ModelConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn fixed_point_formatting() {
        assert_eq!(fixed12(0.0), "0");
        assert_eq!(fixed12(1670.0), "1670");
        assert_eq!(fixed12(1e-6), "0.000001");
        assert_eq!(fixed12(-2.5), "-2.5");
        assert_eq!(fixed12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fixed12(86840.0), "86840");
    }

    #[test]
    fn lp_export_is_reproducible() {
        let a = export_lp(&corridor(10));
        let b = export_lp(&corridor(10));
        assert_eq!(a, b);
        assert!(a.starts_with("\\"));
        assert!(a.contains("Binary\n"));
        assert!(a.trim_end().ends_with("End"));
    }
}
