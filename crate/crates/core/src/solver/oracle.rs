//! Exhaustive reference solver for tiny instances.
//!
//! Each (OD, commodity) pair distributes its containers, in whole-container
//! units, over its candidate paths and the unsatisfied pool. Every combination
//! across pairs is checked against capacities, deadlines and the anti-parallel
//! rule directly on the network, without the LP engine.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::mifr::{build_instance, MifrInstance, ModelConfig, SolutionVector};
use crate::netmodel::{CommodityDemand, IntermodalNetwork, LinkIx, Mode, TerminalIx};
use crate::paths::PathSet;
use crate::robust::ReductionTable;

use super::{SolveResult, SolveStatus};

/// Largest number of combinations the oracle will enumerate.
pub const ORACLE_GUARD: f64 = 1e7;

const TOL: f64 = 1e-9;

/// One way of routing a single pair.
#[derive(Debug, Clone)]
struct Allocation {
    counts: Vec<u64>,
    unsatisfied: u64,
    cost: f64,
    /// Containers on each link.
    link_load: Vec<(usize, f64)>,
    /// |net road flow| at each terminal, in containers.
    transfer: Vec<(usize, f64)>,
}

fn compositions(total: u64, parts: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn pair_allocations(net: &IntermodalNetwork, inst: &MifrInstance, p: usize) -> Vec<Allocation> {
    let pair = &inst.pairs[p];
    let d = pair.demand as u64;
    let paths = &pair.paths;
    let mut combos = Vec::new();
    compositions(d, paths.len() + 1, &mut Vec::new(), &mut combos);
    let mut out = Vec::new();
    'combo: for c in combos {
        let mut load = vec![0.0; net.links().len()];
        for (path, &n) in paths.iter().zip(&c) {
            for &l in &path.links {
                load[l.0] += n as f64;
            }
        }
        for l in net.link_ixs() {
            if net.link(l).mode == Mode::Road && load[l.0] > 0.0 && net.reverse_links(l).any(|r| load[r.0] > 0.0) {
                continue 'combo;
            }
        }
        let mut transfer = Vec::new();
        let mut selected = vec![false; net.terminals().len()];
        for (s, t) in net.terminals().iter().enumerate() {
            let mut imb = 0.0;
            for &l in net.out_links(t.node) {
                if net.link(l).mode == Mode::Road {
                    imb += load[l.0];
                }
            }
            for &l in net.in_links(t.node) {
                if net.link(l).mode == Mode::Road {
                    imb -= load[l.0];
                }
            }
            if imb != 0.0 {
                selected[s] = true;
                transfer.push((s, imb.abs()));
            }
        }
        for q in paths {
            let mut time: f64 = q
                .links
                .iter()
                .filter(|l| load[l.0] > 0.0)
                .map(|&l| net.link(l).travel_time)
                .sum();
            for &s in &q.terminals {
                if selected[s.0] {
                    time += net.terminal(s).processing_time;
                }
            }
            if time > pair.deadline * (1.0 + TOL) {
                continue 'combo;
            }
        }
        let unsatisfied = c[paths.len()];
        let mut cost = inst.psi() * unsatisfied as f64;
        for l in net.link_ixs() {
            cost += load[l.0] * net.link_cost(l, &pair.commodity);
        }
        for &(s, v) in &transfer {
            cost += v * net.transfer_cost(TerminalIx(s), &pair.commodity);
        }
        let link_load = load
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        out.push(Allocation {
            counts: c[..paths.len()].to_vec(),
            unsatisfied,
            cost,
            link_load,
            transfer,
        });
    }
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    out
}

struct Search<'a> {
    options: &'a [Vec<Allocation>],
    link_cap: Vec<f64>,
    term_cap: Vec<f64>,
    link_used: Vec<f64>,
    term_used: Vec<f64>,
    /// Cheapest allocation cost of pairs `p..`, ignoring capacities.
    tail_bound: Vec<f64>,
    choice: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    visited: usize,
}

impl Search<'_> {
    fn run(&mut self, p: usize, cost: f64) {
        self.visited += 1;
        if let Some((best, _)) = &self.best {
            if cost + self.tail_bound[p] >= *best {
                return;
            }
        }
        if p == self.options.len() {
            self.best = Some((cost, self.choice.clone()));
            return;
        }
        for (k, a) in self.options[p].iter().enumerate() {
            let fits = a
                .link_load
                .iter()
                .all(|&(l, v)| self.link_used[l] + v <= self.link_cap[l] + TOL * self.link_cap[l].max(1.0))
                && a.transfer
                    .iter()
                    .all(|&(s, v)| self.term_used[s] + v <= self.term_cap[s] + TOL * self.term_cap[s].max(1.0));
            if !fits {
                continue;
            }
            for &(l, v) in &a.link_load {
                self.link_used[l] += v;
            }
            for &(s, v) in &a.transfer {
                self.term_used[s] += v;
            }
            self.choice.push(k);
            self.run(p + 1, cost + a.cost);
            self.choice.pop();
            for &(l, v) in &a.link_load {
                self.link_used[l] -= v;
            }
            for &(s, v) in &a.transfer {
                self.term_used[s] -= v;
            }
        }
    }
}

/// Best whole-container routing over the candidate paths.
pub fn brute_force_oracle(
    net: Arc<IntermodalNetwork>,
    demands: &[CommodityDemand],
    reductions: &ReductionTable,
    pathsets: &[PathSet],
    cfg: &ModelConfig,
) -> Result<SolveResult> {
    let start = Instant::now();
    let inst = build_instance(net.clone(), demands, reductions, pathsets, cfg)?;
    let mut combos = 1.0;
    for pair in &inst.pairs {
        combos *= binomial(pair.demand as u64 + pair.paths.len() as u64, pair.paths.len() as u64);
        if combos > ORACLE_GUARD {
            return Err(Error::OracleRefusal(format!(
                "more than {ORACLE_GUARD:e} routing combinations"
            )));
        }
    }
    let options: Vec<Vec<Allocation>> = (0..inst.pairs.len())
        .map(|p| pair_allocations(&net, &inst, p))
        .collect();
    let mut tail_bound = vec![0.0; options.len() + 1];
    for p in (0..options.len()).rev() {
        let cheapest = options[p].first().map_or(f64::INFINITY, |a| a.cost);
        tail_bound[p] = tail_bound[p + 1] + cheapest;
    }
    let mut search = Search {
        options: &options,
        link_cap: reductions.links.iter().map(|r| r.effective).collect(),
        term_cap: reductions.terminals.iter().map(|r| r.effective).collect(),
        link_used: vec![0.0; net.links().len()],
        term_used: vec![0.0; net.terminals().len()],
        tail_bound,
        choice: Vec::new(),
        best: None,
        visited: 0,
    };
    search.run(0, 0.0);
    let (cost, choice) = search
        .best
        .ok_or_else(|| Error::OracleRefusal("no combination satisfies the constraints".into()))?;

    let mut x = vec![0.0; inst.num_vars()];
    for (p, &k) in choice.iter().enumerate() {
        let a = &options[p][k];
        let d = inst.pairs[p].demand;
        for &(l, v) in &a.link_load {
            x[inst.flow(p, LinkIx(l))] = v / d;
            x[inst.activity_var(p, LinkIx(l))] = 1.0;
        }
        for &(s, v) in &a.transfer {
            x[inst.transfer(p, TerminalIx(s))] = v / d;
            x[inst.select(p, TerminalIx(s))] = 1.0;
        }
        x[inst.unsatisfied(p)] = a.unsatisfied as f64;
        debug_assert_eq!(a.counts.iter().sum::<u64>() + a.unsatisfied, d as u64);
    }
    let best = SolutionVector::new(&inst, x);
    debug_assert!((best.objective - cost).abs() <= 1e-6 * cost.abs().max(1.0));
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        bound: best.objective,
        gap: 0.0,
        best,
        nodes_explored: search.visited,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
