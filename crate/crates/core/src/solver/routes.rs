//! Path decomposition of solved flows and solution files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mifr::{check_feasibility, MifrInstance, SolutionVector};
use crate::netmodel::{IntermodalNetwork, LinkIx, NodeIx};

/// Residual flow fractions below this are ignored.
const RESIDUAL_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RouteFlow {
    pub links: Vec<LinkIx>,
    pub nodes: Vec<NodeIx>,
    pub fraction: f64,
    /// Dollars per container, including transfers where the route changes mode.
    pub cost_per_container: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRoutes {
    pub od: String,
    pub commodity: String,
    pub routes: Vec<RouteFlow>,
    /// `U / d`.
    pub unsatisfied_fraction: f64,
    /// `1 - Σ fractions - unsatisfied_fraction`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteDecomposition {
    pub pairs: Vec<PairRoutes>,
}

fn find_path(net: &IntermodalNetwork, from: NodeIx, to: NodeIx, residual: &[f64]) -> Option<Vec<LinkIx>> {
    let mut seen = vec![false; net.nodes().len()];
    let mut stack: Vec<(NodeIx, usize)> = vec![(from, 0)];
    let mut links: Vec<LinkIx> = Vec::new();
    seen[from.0] = true;
    while let Some((node, next)) = stack.last_mut() {
        if *node == to {
            return Some(links);
        }
        let out = net.out_links(*node);
        let mut advanced = false;
        while *next < out.len() {
            let l = out[*next];
            *next += 1;
            let head = net.link(l).to;
            if residual[l.0] > RESIDUAL_ZERO && !seen[head.0] {
                seen[head.0] = true;
                links.push(l);
                stack.push((head, 0));
                advanced = true;
                break;
            }
        }
        if !advanced {
            stack.pop();
            links.pop();
        }
    }
    None
}

fn route_cost(net: &IntermodalNetwork, links: &[LinkIx], commodity: &str) -> f64 {
    let mut cost: f64 = links.iter().map(|&l| net.link_cost(l, commodity)).sum();
    for w in links.windows(2) {
        let (a, b) = (net.link(w[0]), net.link(w[1]));
        if a.mode != b.mode {
            if let Some(t) = net.terminal_at(a.to) {
                cost += net.transfer_cost(t, commodity);
            }
        }
    }
    cost
}

/// Decomposes each pair's link flows into origin-destination routes.
pub fn extract_routes(inst: &MifrInstance, sol: &SolutionVector) -> Result<RouteDecomposition> {
    let violations = check_feasibility(inst, sol, 1e-6)?;
    if let Some(v) = violations.first() {
        return Err(Error::InfeasibleSolution(format!(
            "{} violation(s), first: {v}",
            violations.len()
        )));
    }
    let net = &inst.network;
    let mut pairs = Vec::with_capacity(inst.pairs.len());
    for (p, pair) in inst.pairs.iter().enumerate() {
        let mut residual = vec![0.0; net.links().len()];
        for l in net.link_ixs() {
            residual[l.0] = sol.values[inst.flow(p, l)];
        }
        let mut routes = Vec::new();
        while let Some(links) = find_path(net, pair.od.origin, pair.od.destination, &residual) {
            let (bottleneck_link, fraction) = links
                .iter()
                .map(|&l| (l, residual[l.0]))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("path has links");
            for &l in &links {
                residual[l.0] -= fraction;
            }
            residual[bottleneck_link.0] = 0.0;
            let mut nodes = vec![pair.od.origin];
            nodes.extend(links.iter().map(|&l| net.link(l).to));
            routes.push(RouteFlow {
                cost_per_container: route_cost(net, &links, &pair.commodity),
                links,
                nodes,
                fraction,
            });
        }
        let unsatisfied_fraction = sol.values[inst.unsatisfied(p)] / pair.demand;
        let used: f64 = routes.iter().map(|r| r.fraction).sum();
        pairs.push(PairRoutes {
            od: pair.od.id.clone(),
            commodity: pair.commodity.clone(),
            routes,
            unsatisfied_fraction,
            slack: 1.0 - used - unsatisfied_fraction,
        });
    }
    Ok(RouteDecomposition { pairs })
}

/// Writes `variable,index,value` for every variable.
pub fn write_solution_dump(inst: &MifrInstance, sol: &SolutionVector, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variable", "index", "value"])?;
    for (j, v) in sol.values.iter().enumerate() {
        let (name, index) = inst.var_label(j);
        w.write_record([name, index, v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `od,commodity,fraction,route_nodes,cost,unsatisfied`, one row per route.
/// A pair without routes gets one row with an empty route.
pub fn write_route_report(inst: &MifrInstance, routes: &RouteDecomposition, path: &Path) -> Result<()> {
    let net = &inst.network;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["od", "commodity", "fraction", "route_nodes", "cost", "unsatisfied"])?;
    for (pair, block) in routes.pairs.iter().zip(&inst.pairs) {
        let unsatisfied = (pair.unsatisfied_fraction * block.demand).to_string();
        if pair.routes.is_empty() {
            w.write_record([pair.od.as_str(), &pair.commodity, "0", "", "0", &unsatisfied])?;
        }
        for r in &pair.routes {
            let nodes: Vec<&str> = r.nodes.iter().map(|&n| net.node(n).id.as_str()).collect();
            w.write_record([
                pair.od.clone(),
                pair.commodity.clone(),
                r.fraction.to_string(),
                nodes.join(">"),
                r.cost_per_container.to_string(),
                unsatisfied.clone(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
