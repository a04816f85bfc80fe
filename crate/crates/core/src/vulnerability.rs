//! Importance indices for links, nodes and terminals, element ranking and
//! checks of the node/link/terminal importance ordering.
//!
//! Weights are the baseline container flows `d·X` held fixed; a disruption
//! only changes travel times. Terminals get a transient dummy link whose
//! baseline time is the terminal processing time (at least one hour) and whose
//! disrupted time is `dummy_link_time`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mifr::{MifrInstance, SolutionVector};
use crate::netmodel::{CommodityDemand, IntermodalNetwork, LinkIx, NodeIx, TerminalIx};

pub const DEFAULT_MULTIPLIER: f64 = 2.0;
pub const DUMMY_TIME_FACTOR: f64 = 10.0;
/// Floor on the baseline dummy-link time, in hours.
pub const DUMMY_BASE_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DisruptionKind {
    Link,
    Node,
    Terminal,
}

impl DisruptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DisruptionKind::Link => "link",
            DisruptionKind::Node => "node",
            DisruptionKind::Terminal => "terminal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "link" | "links" => Some(DisruptionKind::Link),
            "node" | "nodes" => Some(DisruptionKind::Node),
            "terminal" | "terminals" => Some(DisruptionKind::Terminal),
            _ => None,
        }
    }
}

impl fmt::Display for DisruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisruptionScenario {
    pub kind: DisruptionKind,
    /// Link ids, node ids or terminal node ids depending on `kind`.
    pub elements: Vec<String>,
    /// `α` in `t̂ = α·t`.
    pub travel_time_multiplier: f64,
    /// Per-link overrides of `α`; any entry different from `α` makes the event non-uniform.
    pub link_multipliers: BTreeMap<String, f64>,
    /// Disrupted travel time of a terminal's dummy link, hours.
    pub dummy_link_time: f64,
}

impl DisruptionScenario {
    /// Uniform event with `α = 2` and `t_d = 10 ×` the largest deadline.
    pub fn uniform(kind: DisruptionKind, elements: Vec<String>, demands: &[CommodityDemand]) -> Self {
        let max_deadline = demands.iter().map(|d| d.deadline).fold(0.0, f64::max);
        DisruptionScenario {
            kind,
            elements,
            travel_time_multiplier: DEFAULT_MULTIPLIER,
            link_multipliers: BTreeMap::new(),
            dummy_link_time: DUMMY_TIME_FACTOR * max_deadline,
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: f64| !(m.is_finite() && m > 1.0);
        if bad(self.travel_time_multiplier) {
            return Err(Error::Domain(format!(
                "travel time multiplier must exceed 1, got {}",
                self.travel_time_multiplier
            )));
        }
        if let Some((id, m)) = self.link_multipliers.iter().find(|(_, &m)| bad(m)) {
            return Err(Error::Domain(format!("multiplier {m} for link {id} must exceed 1")));
        }
        if !(self.dummy_link_time.is_finite() && self.dummy_link_time > 0.0) {
            return Err(Error::Domain(format!(
                "dummy link time must be positive, got {}",
                self.dummy_link_time
            )));
        }
        Ok(())
    }

    /// Rejects dummy-link times below `10 ×` the largest deadline.
    pub fn validate(&self, demands: &[CommodityDemand]) -> Result<()> {
        self.check()?;
        let max_deadline = demands.iter().map(|d| d.deadline).fold(0.0, f64::max);
        if self.dummy_link_time < DUMMY_TIME_FACTOR * max_deadline {
            return Err(Error::Config(format!(
                "dummy link time {} is below {} × the largest deadline {}",
                self.dummy_link_time, DUMMY_TIME_FACTOR, max_deadline
            )));
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        self.link_multipliers
            .values()
            .all(|&m| m == self.travel_time_multiplier)
    }

    fn multiplier(&self, net: &IntermodalNetwork, link: LinkIx) -> f64 {
        self.link_multipliers
            .get(&net.link(link).id)
            .copied()
            .unwrap_or(self.travel_time_multiplier)
    }

    fn retarget(&self, kind: DisruptionKind, id: &str) -> Self {
        DisruptionScenario {
            kind,
            elements: vec![id.to_string()],
            ..self.clone()
        }
    }

    /// Links whose travel time the scenario multiplies.
    pub fn affected_links(&self, net: &IntermodalNetwork) -> Result<BTreeSet<LinkIx>> {
        let mut out = BTreeSet::new();
        for id in &self.elements {
            match self.kind {
                DisruptionKind::Link => {
                    out.insert(
                        net.link_ix(id)
                            .ok_or_else(|| Error::Reference(format!("unknown link {id}")))?,
                    );
                }
                DisruptionKind::Node => {
                    let n = net
                        .node_ix(id)
                        .ok_or_else(|| Error::Reference(format!("unknown node {id}")))?;
                    out.extend(net.out_links(n).iter().copied());
                }
                DisruptionKind::Terminal => {
                    let t = net
                        .terminal_ix(id)
                        .ok_or_else(|| Error::Reference(format!("unknown terminal {id}")))?;
                    out.extend(net.out_links(net.terminal(t).node).iter().copied());
                }
            }
        }
        Ok(out)
    }

    fn disrupted_terminals(&self, net: &IntermodalNetwork) -> BTreeSet<TerminalIx> {
        if self.kind != DisruptionKind::Terminal {
            return BTreeSet::new();
        }
        self.elements.iter().filter_map(|id| net.terminal_ix(id)).collect()
    }
}

/// Baseline container flows `Σ d·X` per link and `Σ d·F` per terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowWeights {
    pub link: Vec<f64>,
    pub transfer: Vec<f64>,
}

/// Flows below this many containers count as zero.
const WEIGHT_ZERO: f64 = 1e-9;

impl FlowWeights {
    pub fn from_solution(inst: &MifrInstance, sol: &SolutionVector) -> Self {
        let net = &inst.network;
        let mut link = vec![0.0; net.links().len()];
        let mut transfer = vec![0.0; net.terminals().len()];
        for (p, pair) in inst.pairs.iter().enumerate() {
            for l in net.link_ixs() {
                link[l.0] += pair.demand * sol.values[inst.flow(p, l)];
            }
            for &t in &inst.terminals {
                transfer[t.0] += pair.demand * sol.values[inst.transfer(p, t)];
            }
        }
        FlowWeights { link, transfer }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        FlowWeights {
            link: self.link.iter().map(|w| w * factor).collect(),
            transfer: self.transfer.iter().map(|w| w * factor).collect(),
        }
    }

    fn flowing(&self, l: LinkIx) -> bool {
        self.link[l.0] > WEIGHT_ZERO
    }
}

fn relative_increase(weight: f64, base: f64, disrupted: f64) -> f64 {
    let denominator = weight * base;
    if weight <= WEIGHT_ZERO || denominator <= 0.0 {
        return 0.0;
    }
    weight * (disrupted - base) / denominator
}

fn dummy_base_time(net: &IntermodalNetwork, t: TerminalIx) -> f64 {
    net.terminal(t).processing_time.max(DUMMY_BASE_FLOOR)
}

fn check_dims(net: &IntermodalNetwork, w: &FlowWeights) -> Result<()> {
    if w.link.len() != net.links().len() {
        return Err(Error::Dimension {
            expected: net.links().len(),
            got: w.link.len(),
        });
    }
    if w.transfer.len() != net.terminals().len() {
        return Err(Error::Dimension {
            expected: net.terminals().len(),
            got: w.transfer.len(),
        });
    }
    Ok(())
}

fn link_score(net: &IntermodalNetwork, w: &FlowWeights, sc: &DisruptionScenario, l: LinkIx) -> f64 {
    let t = net.link(l).travel_time;
    relative_increase(w.link[l.0], t, sc.multiplier(net, l) * t)
}

fn node_score(net: &IntermodalNetwork, w: &FlowWeights, sc: &DisruptionScenario, n: NodeIx) -> f64 {
    net.out_links(n).iter().map(|&l| link_score(net, w, sc, l)).sum()
}

fn dummy_score(net: &IntermodalNetwork, w: &FlowWeights, sc: &DisruptionScenario, t: TerminalIx) -> f64 {
    relative_increase(w.transfer[t.0], dummy_base_time(net, t), sc.dummy_link_time)
}

/// Link importance under `scenario`; links the scenario leaves alone score 0.
pub fn link_importance(
    net: &IntermodalNetwork,
    weights: &FlowWeights,
    scenario: &DisruptionScenario,
    link_id: &str,
) -> Result<f64> {
    scenario.check()?;
    check_dims(net, weights)?;
    let l = net
        .link_ix(link_id)
        .ok_or_else(|| Error::Reference(format!("unknown link {link_id}")))?;
    if !scenario.affected_links(net)?.contains(&l) {
        return Ok(0.0);
    }
    Ok(link_score(net, weights, scenario, l))
}

/// Sum of outgoing link importances with every outgoing link of `node_id` disrupted.
pub fn node_importance(
    net: &IntermodalNetwork,
    weights: &FlowWeights,
    scenario: &DisruptionScenario,
    node_id: &str,
) -> Result<f64> {
    scenario.check()?;
    check_dims(net, weights)?;
    let n = net
        .node_ix(node_id)
        .ok_or_else(|| Error::Reference(format!("unknown node {node_id}")))?;
    let sc = scenario.retarget(DisruptionKind::Node, node_id);
    Ok(node_score(net, weights, &sc, n))
}

/// Node-style sum over the terminal's real links plus its dummy-link term.
pub fn terminal_importance(
    net: &IntermodalNetwork,
    weights: &FlowWeights,
    scenario: &DisruptionScenario,
    terminal_id: &str,
) -> Result<f64> {
    scenario.check()?;
    check_dims(net, weights)?;
    let t = net
        .terminal_ix(terminal_id)
        .ok_or_else(|| Error::Reference(format!("unknown terminal {terminal_id}")))?;
    let sc = scenario.retarget(DisruptionKind::Terminal, terminal_id);
    Ok(node_score(net, weights, &sc, net.terminal(t).node) + dummy_score(net, weights, &sc, t))
}

/// Scores of every element under `scenario`'s own disruption set.
pub fn scenario_scores(
    net: &IntermodalNetwork,
    weights: &FlowWeights,
    scenario: &DisruptionScenario,
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>)> {
    scenario.check()?;
    check_dims(net, weights)?;
    let affected = scenario.affected_links(net)?;
    let links = affected
        .iter()
        .map(|&l| (net.link(l).id.clone(), link_score(net, weights, scenario, l)))
        .collect();
    let dummies = scenario
        .disrupted_terminals(net)
        .into_iter()
        .map(|t| {
            (
                net.node(net.terminal(t).node).id.clone(),
                dummy_score(net, weights, scenario, t),
            )
        })
        .collect();
    Ok((links, dummies))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementScore {
    pub kind: DisruptionKind,
    pub id: String,
    pub score: f64,
    pub premise_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub links: Vec<ElementScore>,
    pub nodes: Vec<ElementScore>,
    pub terminals: Vec<ElementScore>,
    /// `Σ d·X` per link id.
    pub link_weights: BTreeMap<String, f64>,
    /// `Σ d·F` per terminal id.
    pub transfer_weights: BTreeMap<String, f64>,
    /// Head nodes of each node's outgoing links.
    pub neighbors: BTreeMap<String, Vec<String>>,
    pub travel_time_multiplier: f64,
    pub dummy_link_time: f64,
    pub uniform: bool,
    pub weight_source: String,
}

impl ImportanceReport {
    pub fn all(&self) -> impl Iterator<Item = &ElementScore> {
        self.links.iter().chain(&self.nodes).chain(&self.terminals)
    }

    pub fn of_kind(&self, kind: DisruptionKind) -> &[ElementScore] {
        match kind {
            DisruptionKind::Link => &self.links,
            DisruptionKind::Node => &self.nodes,
            DisruptionKind::Terminal => &self.terminals,
        }
    }
}

fn flowing_out(net: &IntermodalNetwork, w: &FlowWeights, n: NodeIx) -> usize {
    net.out_links(n).iter().filter(|&&l| w.flowing(l)).count()
}

/// Scores every link, node and terminal as if it alone were disrupted by `event`.
/// The event's `kind` and `elements` are ignored.
pub fn importance_report(
    net: &IntermodalNetwork,
    weights: &FlowWeights,
    event: &DisruptionScenario,
    weight_source: &str,
) -> Result<ImportanceReport> {
    event.check()?;
    check_dims(net, weights)?;
    let uniform = event.is_uniform();
    let links = net
        .link_ixs()
        .map(|l| ElementScore {
            kind: DisruptionKind::Link,
            id: net.link(l).id.clone(),
            score: link_score(net, weights, event, l),
            premise_ok: uniform,
        })
        .collect();
    let nodes = (0..net.nodes().len())
        .map(NodeIx)
        .map(|n| ElementScore {
            kind: DisruptionKind::Node,
            id: net.node(n).id.clone(),
            score: node_score(net, weights, event, n),
            premise_ok: uniform && flowing_out(net, weights, n) >= 2,
        })
        .collect();
    let terminals = (0..net.terminals().len())
        .map(TerminalIx)
        .map(|t| {
            let n = net.terminal(t).node;
            ElementScore {
                kind: DisruptionKind::Terminal,
                id: net.node(n).id.clone(),
                score: node_score(net, weights, event, n) + dummy_score(net, weights, event, t),
                premise_ok: uniform
                    && weights.transfer[t.0] > WEIGHT_ZERO
                    && event.dummy_link_time > dummy_base_time(net, t),
            }
        })
        .collect();
    let neighbors = (0..net.nodes().len())
        .map(NodeIx)
        .map(|n| {
            let heads = net
                .out_links(n)
                .iter()
                .map(|&l| net.node(net.link(l).to).id.clone())
                .collect();
            (net.node(n).id.clone(), heads)
        })
        .collect();
    Ok(ImportanceReport {
        links,
        nodes,
        terminals,
        link_weights: net
            .link_ixs()
            .map(|l| (net.link(l).id.clone(), weights.link[l.0]))
            .collect(),
        transfer_weights: (0..net.terminals().len())
            .map(|t| {
                (
                    net.node(net.terminal(TerminalIx(t)).node).id.clone(),
                    weights.transfer[t],
                )
            })
            .collect(),
        neighbors,
        travel_time_multiplier: event.travel_time_multiplier,
        dummy_link_time: event.dummy_link_time,
        uniform,
        weight_source: weight_source.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Relation {
    /// A node outranks each of its outgoing links.
    NodeOverLink,
    /// A terminal outranks every other node.
    TerminalOverNode,
    /// A terminal outranks its own node-style score.
    TerminalOverOwnNode,
    /// A terminal outranks every link.
    TerminalOverLink,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::NodeOverLink => "node>link",
            Relation::TerminalOverNode => "terminal>node",
            Relation::TerminalOverOwnNode => "terminal>own-node",
            Relation::TerminalOverLink => "terminal>link",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass,
    Fail { greater: f64, lesser: f64 },
    PremiseNotMet(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub relation: Relation,
    pub greater: String,
    pub lesser: String,
    pub outcome: Outcome,
}

impl Verdict {
    pub fn failed(&self) -> bool {
        matches!(self.outcome, Outcome::Fail { .. })
    }
}

fn compare(relation: Relation, hi: &ElementScore, lo: &ElementScore, premise: Option<String>) -> Verdict {
    let outcome = match premise {
        Some(why) => Outcome::PremiseNotMet(why),
        None if hi.score > lo.score => Outcome::Pass,
        None => Outcome::Fail {
            greater: hi.score,
            lesser: lo.score,
        },
    };
    Verdict {
        relation,
        greater: hi.id.clone(),
        lesser: lo.id.clone(),
        outcome,
    }
}

fn node_premise(report: &ImportanceReport, node: &ElementScore) -> Option<String> {
    if !report.uniform {
        return Some("event is not a uniform relative increase".into());
    }
    if !node.premise_ok {
        return Some(format!(
            "node {} has fewer than 2 outgoing links carrying flow",
            node.id
        ));
    }
    None
}

fn terminal_premise(report: &ImportanceReport, terminal: &ElementScore) -> Option<String> {
    if !report.uniform {
        return Some("event is not a uniform relative increase".into());
    }
    if !terminal.premise_ok {
        return Some(format!(
            "terminal {} transfers no flow or its dummy link is not slowed",
            terminal.id
        ));
    }
    None
}

/// Checks the node/link/terminal ordering pairwise. Pairs whose premise fails
/// are reported as such and never asserted.
pub fn verify_ordering(net: &IntermodalNetwork, report: &ImportanceReport) -> Vec<Verdict> {
    let link_of: BTreeMap<&str, &ElementScore> = report.links.iter().map(|s| (s.id.as_str(), s)).collect();
    let node_of: BTreeMap<&str, &ElementScore> = report.nodes.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut out = Vec::new();
    for node in &report.nodes {
        let Some(n) = net.node_ix(&node.id) else { continue };
        let premise = node_premise(report, node);
        for &l in net.out_links(n) {
            let link = link_of[net.link(l).id.as_str()];
            out.push(compare(Relation::NodeOverLink, node, link, premise.clone()));
        }
    }
    for term in &report.terminals {
        let premise = terminal_premise(report, term);
        if let Some(own) = node_of.get(term.id.as_str()) {
            out.push(compare(Relation::TerminalOverOwnNode, term, own, premise.clone()));
        }
        for node in report.nodes.iter().filter(|n| n.id != term.id) {
            let p = premise.clone().or_else(|| node_premise(report, node));
            out.push(compare(Relation::TerminalOverNode, term, node, p));
        }
        for link in &report.links {
            out.push(compare(Relation::TerminalOverLink, term, link, premise.clone()));
        }
    }
    out
}

/// Descending by score, ties by id ascending.
pub fn rank_elements(scores: &[ElementScore]) -> Vec<ElementScore> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    v
}

/// Writes `element_type,element_id,score,rank,premise_ok`; ranks are per element type.
pub fn write_importance_csv(report: &ImportanceReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["element_type", "element_id", "score", "rank", "premise_ok"])?;
    for kind in [DisruptionKind::Link, DisruptionKind::Node, DisruptionKind::Terminal] {
        for (rank, s) in rank_elements(report.of_kind(kind)).iter().enumerate() {
            w.write_record([
                kind.as_str(),
                &s.id,
                &s.score.to_string(),
                &(rank + 1).to_string(),
                if s.premise_ok { "true" } else { "false" },
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `relation,greater,lesser,verdict,greater_score,lesser_score,note`.
pub fn write_verdicts_csv(verdicts: &[Verdict], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "relation",
        "greater",
        "lesser",
        "verdict",
        "greater_score",
        "lesser_score",
        "note",
    ])?;
    for v in verdicts {
        let (verdict, hi, lo, note) = match &v.outcome {
            Outcome::Pass => ("pass", String::new(), String::new(), ""),
            Outcome::Fail { greater, lesser } => ("fail", greater.to_string(), lesser.to_string(), ""),
            Outcome::PremiseNotMet(why) => ("premise-not-met", String::new(), String::new(), why.as_str()),
        };
        w.write_record([v.relation.as_str(), &v.greater, &v.lesser, verdict, &hi, &lo, note])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
