//! Exact solution of [`MifrInstance`]s.
//!
//! LP relaxations are solved by `microlp`; branching, bounding and incumbent
//! handling live here. Every relaxation point is first *completed*: activity
//! and selection binaries are set from the flows they gate and `U` is rounded.
//! Those binaries cost nothing, so a feasible completion is an incumbent whose
//! objective equals the node bound and the node needs no further branching.
//!
//! A binary is branched on only when the completed point breaks a row it
//! appears in. Otherwise `U` is branched on through integral sums: all pairs
//! first, then pairs sharing an OD, then single pairs. Rounding `U` up and
//! shrinking the pair's flows gives a capacity-feasible incumbent at every node.

mod oracle;
mod routes;

pub use oracle::{brute_force_oracle, ORACLE_GUARD};
pub use routes::{extract_routes, write_route_report, write_solution_dump, PairRoutes, RouteDecomposition, RouteFlow};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, SolveOutcome, Variable};

use crate::error::{Error, Result};
use crate::mifr::{check_feasibility, MifrInstance, Sense, SolutionVector, VarKind};

/// Flows at or below this value count as zero when completing indicators.
pub const FLOW_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub optimality_gap: f64,
    /// Seconds.
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    /// Seeds the hash used to break ties between equally fractional variables.
    /// `None` breaks ties by variable index.
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            optimality_gap: 1e-6,
            time_limit: None,
            node_limit: None,
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.optimality_gap) {
            return Err(Error::Config(format!(
                "optimality gap {} must lie in [0, 1)",
                self.optimality_gap
            )));
        }
        if !(self.feasibility_tol > 0.0) || !(self.integrality_tol > 0.0 && self.integrality_tol < 0.5) {
            return Err(Error::Config(
                "tolerances must be positive (integrality below 0.5)".into(),
            ));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Error::Config(format!("time limit {t} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    TimeLimit,
    NodeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NodeLimit => "node_limit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SolveStatus::Optimal,
            SolveStatus::GapLimit,
            SolveStatus::TimeLimit,
            SolveStatus::NodeLimit,
        ]
        .into_iter()
        .find(|st| st.as_str() == s.trim())
    }

    /// Whether the result carries an optimality proof up to the configured gap.
    pub fn is_proven(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapLimit)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub best: SolutionVector,
    pub bound: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl SolveResult {
    pub fn objective(&self) -> f64 {
        self.best.objective
    }
}

pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

/// `AtMost`/`AtLeast` bound the sum of the listed variables.
#[derive(Debug, Clone)]
enum Decision {
    Fix(usize, f64),
    AtMost(Arc<[usize]>, f64),
    AtLeast(Arc<[usize]>, f64),
}

struct Node {
    lp: Solution,
    bound: f64,
    depth: usize,
    id: usize,
    decisions: Vec<Decision>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl Ord for Node {
    /// Max-heap order: lowest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Relaxation {
    problem: Problem,
    vars: Vec<Variable>,
}

impl Relaxation {
    fn new(inst: &MifrInstance, tol: f64) -> Result<Self> {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<Variable> = inst
            .vars
            .iter()
            .zip(&inst.objective)
            .map(|(v, &c)| problem.add_var(c, (v.lower, v.upper)))
            .collect();
        let zeros = vec![0.0; inst.vars.len()];
        for (i, row) in inst.rows.iter().enumerate() {
            if row.coefs.is_empty() {
                if row.violation(&zeros) > tol * row.scale() {
                    return Err(Error::Lp(format!("row {i} has no terms and cannot be satisfied")));
                }
                continue;
            }
            let mut expr = LinearExpr::empty();
            for &(j, a) in &row.coefs {
                expr.add(vars[j], a);
            }
            let op = match row.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(expr, op, row.rhs);
        }
        Ok(Relaxation { problem, vars })
    }

    /// Solves from scratch with the given branching decisions applied as bounds or rows.
    fn solve_fresh(&self, decisions: &[Decision]) -> std::result::Result<SolveOutcome, microlp::Error> {
        let mut p = self.problem.clone();
        for d in decisions {
            match d {
                Decision::Fix(j, v) => p.add_constraint(self.sum(&[*j]), ComparisonOp::Eq, *v),
                Decision::AtMost(js, v) => p.add_constraint(self.sum(js), ComparisonOp::Le, *v),
                Decision::AtLeast(js, v) => p.add_constraint(self.sum(js), ComparisonOp::Ge, *v),
            }
        }
        p.solve()
    }

    fn apply(&self, lp: Solution, d: &Decision) -> std::result::Result<SolveOutcome, microlp::Error> {
        match d {
            Decision::Fix(j, v) => lp.fix_var(self.vars[*j], *v),
            Decision::AtMost(js, v) => lp.add_constraint(self.sum(js), ComparisonOp::Le, *v),
            Decision::AtLeast(js, v) => lp.add_constraint(self.sum(js), ComparisonOp::Ge, *v),
        }
    }

    fn sum(&self, js: &[usize]) -> LinearExpr {
        let mut e = LinearExpr::empty();
        for &j in js {
            e.add(self.vars[j], 1.0);
        }
        e
    }

    fn values(&self, lp: &Solution) -> Vec<f64> {
        self.vars.iter().map(|&v| lp.var_value_raw(v)).collect()
    }
}

/// Moves values within `tol` of a bound or integer onto it.
fn snap(inst: &MifrInstance, x: &mut [f64], tol: f64) {
    for (v, info) in x.iter_mut().zip(&inst.vars) {
        if (*v - info.lower).abs() <= tol {
            *v = info.lower;
        } else if (*v - info.upper).abs() <= tol {
            *v = info.upper;
        } else if info.integer && (*v - v.round()).abs() <= tol {
            *v = v.round();
        }
        *v = v.clamp(info.lower, info.upper);
    }
}

/// Rounds every fractional `U` up and shrinks that pair's flows so the
/// delivered amount matches. Capacity use can only fall.
fn round_up_unsatisfied(inst: &MifrInstance, x: &[f64], int_tol: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    let mut scale = vec![1.0; inst.pairs.len()];
    for (p, pair) in inst.pairs.iter().enumerate() {
        let u = inst.unsatisfied(p);
        let up = (x[u] - int_tol).ceil().clamp(0.0, pair.demand);
        if up > x[u] {
            let delivered = pair.demand - x[u];
            scale[p] = if delivered > 0.0 {
                (pair.demand - up) / delivered
            } else {
                0.0
            };
            out[u] = up;
        }
    }
    for (j, v) in inst.vars.iter().enumerate() {
        if matches!(v.kind, VarKind::RoadFlow | VarKind::RailFlow | VarKind::Transfer) {
            out[j] *= scale[v.pair];
        }
    }
    out
}

/// Sets of `U` variables whose sums must be integral, coarsest tier first:
/// all pairs, then pairs sharing an OD, then single pairs.
fn unsatisfied_groups(inst: &MifrInstance) -> Vec<Vec<Arc<[usize]>>> {
    let all: Vec<usize> = (0..inst.pairs.len()).map(|p| inst.unsatisfied(p)).collect();
    let mut by_od: Vec<(String, Vec<usize>)> = Vec::new();
    for (p, pair) in inst.pairs.iter().enumerate() {
        match by_od.iter_mut().find(|(od, _)| *od == pair.od.id) {
            Some((_, v)) => v.push(inst.unsatisfied(p)),
            None => by_od.push((pair.od.id.clone(), vec![inst.unsatisfied(p)])),
        }
    }
    let mut tiers = Vec::new();
    if all.len() > 1 {
        tiers.push(vec![Arc::from(all.clone())]);
    }
    let shared: Vec<Arc<[usize]>> = by_od
        .into_iter()
        .filter(|(_, v)| v.len() > 1 && v.len() < all.len())
        .map(|(_, v)| Arc::from(v))
        .collect();
    if !shared.is_empty() {
        tiers.push(shared);
    }
    tiers.push(all.into_iter().map(|j| Arc::from(vec![j])).collect());
    tiers
}

/// Most fractional group sum in the first tier that has one.
fn pick_group(tiers: &[Vec<Arc<[usize]>>], x: &[f64], int_tol: f64) -> Option<(Arc<[usize]>, f64)> {
    for tier in tiers {
        let mut best: Option<(f64, &Arc<[usize]>, f64)> = None;
        for g in tier {
            let v: f64 = g.iter().map(|&j| x[j]).sum();
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > int_tol && best.is_none_or(|(bf, _, _)| frac > bf) {
                best = Some((frac, g, v));
            }
        }
        if let Some((_, g, v)) = best {
            return Some((g.clone(), v));
        }
    }
    None
}

enum ChildOutcome {
    Solved(Solution),
    Infeasible,
    Interrupted,
}

/// Branch-and-bound to the configured gap.
pub fn solve(inst: &MifrInstance, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = cfg.time_limit.map(|t| start + Duration::from_secs_f64(t));
    let out_of_time = || deadline.is_some_and(|d| Instant::now() >= d);

    let mut incumbent = inst.all_unsatisfied();
    let mut nodes = 0usize;
    let mut relax = Relaxation::new(inst, cfg.feasibility_tol)?;
    if let Some(t) = cfg.time_limit {
        relax.problem.set_time_limit(Duration::from_secs_f64(t));
    }

    let finish = |status: SolveStatus, best: SolutionVector, bound: f64, nodes: usize| {
        let bound = bound.min(best.objective);
        SolveResult {
            status,
            gap: relative_gap(best.objective, bound),
            best,
            bound,
            nodes_explored: nodes,
            wall_time: start.elapsed().as_secs_f64(),
        }
    };

    if inst.vars.is_empty() {
        return Ok(finish(SolveStatus::Optimal, incumbent, 0.0, 0));
    }

    nodes += 1;
    let root = match relax.problem.solve().map_err(|e| Error::Lp(e.to_string()))? {
        SolveOutcome::Solution(s) => s,
        SolveOutcome::Interrupted(_) => {
            return Ok(finish(SolveStatus::TimeLimit, incumbent, f64::NEG_INFINITY, nodes));
        }
    };

    let mut open = BinaryHeap::new();
    let mut next_id = 0usize;
    let root_bound = root.objective();
    open.push(Node {
        lp: root,
        bound: root_bound,
        depth: 0,
        id: next_id,
        decisions: Vec::new(),
    });
    next_id += 1;

    let u_groups = unsatisfied_groups(inst);
    let prune_tol = |inc: f64| 1e-9 * inc.abs().max(1.0);

    let status = loop {
        let Some(best_open) = open.peek().map(|n| n.bound) else {
            break SolveStatus::Optimal;
        };
        let inc = incumbent.objective;
        if best_open >= inc - prune_tol(inc) {
            open.clear();
            break SolveStatus::Optimal;
        }
        if best_open >= inc - cfg.optimality_gap * inc.abs().max(1.0) {
            break SolveStatus::GapLimit;
        }
        if out_of_time() {
            break SolveStatus::TimeLimit;
        }
        if cfg.node_limit.is_some_and(|n| nodes >= n) {
            break SolveStatus::NodeLimit;
        }

        let node = open.pop().expect("peeked");
        let mut x = relax.values(&node.lp);
        snap(inst, &mut x, cfg.integrality_tol.min(1e-9));

        let int_tol = cfg.integrality_tol;
        let lp_integral = inst
            .vars
            .iter()
            .zip(&x)
            .all(|(v, &val)| !v.integer || (val - val.round()).abs() <= int_tol);
        let candidate = if lp_integral {
            let mut y = x.clone();
            snap(inst, &mut y, int_tol);
            y
        } else {
            inst.complete_indicators(&x, FLOW_ZERO, int_tol)
        };
        let violations = check_feasibility(inst, &SolutionVector::new(inst, candidate.clone()), cfg.feasibility_tol)?;
        if violations.is_empty() {
            let sol = SolutionVector::new(inst, candidate);
            if sol.objective < incumbent.objective {
                incumbent = sol;
            }
            continue;
        }

        let repaired = inst.complete_indicators(&round_up_unsatisfied(inst, &x, int_tol), FLOW_ZERO, int_tol);
        let repaired = SolutionVector::new(inst, repaired);
        if repaired.objective < incumbent.objective
            && check_feasibility(inst, &repaired, cfg.feasibility_tol)?.is_empty()
        {
            incumbent = repaired;
        }

        // Binaries count as unresolved only where the completed point breaks a
        // row; otherwise the completion already supplies integral values and
        // the remaining fractionality is in U.
        let pick = |filter: &dyn Fn(usize) -> bool| -> Option<usize> {
            let mut best: Option<(f64, u64, usize)> = None;
            for (j, v) in inst.vars.iter().enumerate() {
                if !v.integer || !filter(j) {
                    continue;
                }
                let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
                if frac <= int_tol {
                    continue;
                }
                let tie = cfg.seed.map_or(j as u64, |s| splitmix(s ^ j as u64));
                let better = match best {
                    None => true,
                    Some((bf, bt, _)) => frac > bf || (frac == bf && tie < bt),
                };
                if better {
                    best = Some((frac, tie, j));
                }
            }
            best.map(|(_, _, j)| j)
        };
        let is_binary = |j: usize| inst.vars[j].kind.is_binary();
        let mut in_broken_row = vec![false; inst.vars.len()];
        let mut broken_rows = false;
        for v in &violations {
            if let Some(i) = v.row {
                broken_rows = true;
                for &(j, _) in &inst.rows[i].coefs {
                    in_broken_row[j] = true;
                }
            }
        }
        let binary = if broken_rows {
            pick(&|j| is_binary(j) && in_broken_row[j]).or_else(|| pick(&is_binary))
        } else {
            None
        };
        let children: Vec<Decision> = if let Some(j) = binary {
            vec![Decision::Fix(j, 0.0), Decision::Fix(j, 1.0)]
        } else if let Some((js, v)) = pick_group(&u_groups, &x, int_tol) {
            vec![Decision::AtMost(js.clone(), v.floor()), Decision::AtLeast(js, v.ceil())]
        } else if let Some(j) = pick(&is_binary) {
            vec![Decision::Fix(j, 0.0), Decision::Fix(j, 1.0)]
        } else {
            // Integral but rejected: only possible through numerical trouble.
            log::warn!(
                "node {} is integral but fails the feasibility check; dropping it",
                node.id
            );
            continue;
        };

        let mut interrupted = false;
        for d in children {
            nodes += 1;
            let outcome = match relax.apply(node.lp.clone(), &d) {
                Ok(SolveOutcome::Solution(s)) => ChildOutcome::Solved(s),
                Ok(SolveOutcome::Interrupted(_)) => ChildOutcome::Interrupted,
                Err(microlp::Error::Infeasible) => ChildOutcome::Infeasible,
                Err(e) => {
                    log::debug!("warm-started child failed ({e}); solving from scratch");
                    let mut ds = node.decisions.clone();
                    ds.push(d.clone());
                    match relax.solve_fresh(&ds) {
                        Ok(SolveOutcome::Solution(s)) => ChildOutcome::Solved(s),
                        Ok(SolveOutcome::Interrupted(_)) => ChildOutcome::Interrupted,
                        Err(microlp::Error::Infeasible) => ChildOutcome::Infeasible,
                        Err(e) => return Err(Error::Lp(e.to_string())),
                    }
                }
            };
            match outcome {
                ChildOutcome::Solved(s) => {
                    let bound = s.objective();
                    if bound < incumbent.objective - prune_tol(incumbent.objective) {
                        let mut decisions = node.decisions.clone();
                        decisions.push(d);
                        open.push(Node {
                            lp: s,
                            bound: bound.max(node.bound),
                            depth: node.depth + 1,
                            id: next_id,
                            decisions,
                        });
                        next_id += 1;
                    }
                }
                ChildOutcome::Infeasible => {}
                ChildOutcome::Interrupted => interrupted = true,
            }
        }
        if interrupted {
            open.push(node);
            break SolveStatus::TimeLimit;
        }
    };

    let bound = match status {
        SolveStatus::Optimal => incumbent.objective,
        _ => open.iter().map(|n| n.bound).fold(incumbent.objective, f64::min),
    };
    Ok(finish(status, incumbent, bound, nodes))
}

/// Objective of the LP relaxation at the root.
pub fn relaxation_bound(inst: &MifrInstance) -> Result<f64> {
    let relax = Relaxation::new(inst, 1e-7)?;
    match relax.problem.solve().map_err(|e| Error::Lp(e.to_string()))? {
        SolveOutcome::Solution(s) => Ok(s.objective()),
        SolveOutcome::Interrupted(_) => Err(Error::Lp("relaxation interrupted".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mifr::{build_with_paths, ModelConfig};
    use crate::netmodel::{
        derive_link, CommodityDemand, IntermodalNetwork, Mode, NodeIx, NodeKind, NodeRecord, OdPair, RateConfig,
    };
    use crate::robust::{ElementRef, ReductionTable};
    use std::sync::Arc;

    fn corridor_with(d: u64, tweak: impl Fn(&IntermodalNetwork, &mut ReductionTable)) -> MifrInstance {
        let f = fixtures::six_node(d);
        let net = Arc::new(f.network);
        let mut red = ReductionTable::deterministic(&net);
        tweak(&net, &mut red);
        build_with_paths(net, &f.demands, &red, &ModelConfig::default()).unwrap()
    }

    fn assert_sound(inst: &MifrInstance, r: &SolveResult) {
        assert!(check_feasibility(inst, &r.best, 1e-7).unwrap().is_empty());
        assert!(r.bound <= r.best.objective + 1e-9);
    }

    #[test]
    fn single_road_link() {
        let rates = RateConfig::default();
        let node = |id: &str| NodeRecord {
            id: id.into(),
            kind: NodeKind::HighwayIntersection,
            latitude: None,
            longitude: None,
        };
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
        let net = Arc::new(IntermodalNetwork::from_parts(vec![node("A"), node("B")], links, vec![]).unwrap());
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
        let inst = build_with_paths(
            net.clone(),
            &demands,
            &ReductionTable::deterministic(&net),
            &ModelConfig::default(),
        )
        .unwrap();
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective() - 1670.0).abs() < 1e-6);
        assert_sound(&inst, &r);
    }

    #[test]
    fn corridor_prefers_intermodal() {
        let inst = corridor_with(10, |_, _| {});
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective() - 4734.0).abs() < 1e-6, "{}", r.objective());
        assert_sound(&inst, &r);
    }

    #[test]
    fn terminal_knockout_forces_road() {
        let inst = corridor_with(10, |net, red| {
            for t in 0..net.terminals().len() {
                red.knock_out(ElementRef::Terminal(crate::netmodel::TerminalIx(t)));
            }
        });
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert!((r.objective() - 8684.0).abs() < 1e-6, "{}", r.objective());
        let rail: f64 = inst.rail_links.iter().map(|&l| r.best.values[inst.flow(0, l)]).sum();
        assert_eq!(rail, 0.0);
        assert_sound(&inst, &r);
    }

    #[test]
    fn no_capacity_leaves_all_unsatisfied() {
        let inst = corridor_with(10, |net, red| {
            for l in net.link_ixs() {
                red.knock_out(ElementRef::Link(l));
            }
            for t in 0..net.terminals().len() {
                red.knock_out(ElementRef::Terminal(crate::netmodel::TerminalIx(t)));
            }
        });
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert!((r.objective() - inst.psi() * 10.0).abs() < 1e-6);
        assert_eq!(r.best.values[inst.unsatisfied(0)], 10.0);
    }

    #[test]
    fn split_when_terminals_are_tight() {
        let f = fixtures::six_node_with(10, 5.0);
        let net = Arc::new(f.network);
        let inst = build_with_paths(
            net.clone(),
            &f.demands,
            &ReductionTable::deterministic(&net),
            &ModelConfig::default(),
        )
        .unwrap();
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert!((r.objective() - 6709.0).abs() < 1e-6, "{}", r.objective());
        assert_sound(&inst, &r);
    }

    #[test]
    fn relaxation_is_a_lower_bound() {
        let inst = corridor_with(10, |_, _| {});
        let lb = relaxation_bound(&inst).unwrap();
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert!(lb <= r.objective() + 1e-6);
    }

    #[test]
    fn deterministic_results() {
        let inst = corridor_with(7, |_, _| {});
        let a = solve(&inst, &SolverConfig::default()).unwrap();
        let b = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.nodes_explored, b.nodes_explored);
        assert_eq!(a.status, b.status);
    }

    #[test]
    fn node_limit_returns_incumbent() {
        let inst = corridor_with(10, |_, _| {});
        let cfg = SolverConfig {
            node_limit: Some(1),
            ..Default::default()
        };
        let r = solve(&inst, &cfg).unwrap();
        assert!(r.status == SolveStatus::NodeLimit || r.status == SolveStatus::Optimal);
        assert_sound(&inst, &r);
    }
}
