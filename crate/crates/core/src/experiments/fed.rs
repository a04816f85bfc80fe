//! Factorial sweep over disruption kind × element count × q × λ.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mifr::{build_instance, pathsets_for, MifrInstance, ModelConfig, SolutionVector};
use crate::netmodel::{CommodityDemand, IntermodalNetwork, TerminalIx};
use crate::paths::PathSet;
use crate::robust::{capacity_reduction, reduction_table, ElementRef, ReductionTable, UncertaintySpec};
use crate::solver::{solve, SolveStatus, SolverConfig};
use crate::vulnerability::{importance_report, rank_elements, DisruptionKind, DisruptionScenario, FlowWeights};

pub const LINK_LEVELS: [usize; 4] = [30, 60, 100, 200];
pub const NODE_LEVELS: [usize; 4] = [5, 10, 20, 40];
pub const TERMINAL_LEVELS: [usize; 3] = [15, 30, 44];
pub const Q_LEVELS: [f64; 4] = [0.05, 0.1, 0.15, 0.2];
pub const LAMBDA_LEVELS: [f64; 7] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisruptionMode {
    /// Disrupted elements keep `Q − θ`.
    #[default]
    RobustReduce,
    /// Disrupted elements lose all capacity.
    Knockout,
}

impl DisruptionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DisruptionMode::RobustReduce => "robust-reduce",
            DisruptionMode::Knockout => "knockout",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "robust-reduce" => Some(DisruptionMode::RobustReduce),
            "knockout" => Some(DisruptionMode::Knockout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedConfig {
    /// Element-count levels per disruption kind; kinds absent here are not run.
    pub levels: BTreeMap<DisruptionKind, Vec<usize>>,
    pub q_levels: Vec<f64>,
    pub lambda_levels: Vec<f64>,
    /// Keep only demands of the first `n` distinct ODs.
    pub od_subset: Option<usize>,
    pub mode: DisruptionMode,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            levels: BTreeMap::from([
                (DisruptionKind::Link, LINK_LEVELS.to_vec()),
                (DisruptionKind::Node, NODE_LEVELS.to_vec()),
                (DisruptionKind::Terminal, TERMINAL_LEVELS.to_vec()),
            ]),
            q_levels: Q_LEVELS.to_vec(),
            lambda_levels: LAMBDA_LEVELS.to_vec(),
            od_subset: None,
            mode: DisruptionMode::RobustReduce,
            jobs: 1,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("no disruption kinds selected".into()));
        }
        for (kind, levels) in &self.levels {
            if levels.is_empty() {
                return Err(Error::Config(format!("empty level list for {kind} disruptions")));
            }
        }
        if self.q_levels.is_empty() || self.lambda_levels.is_empty() {
            return Err(Error::Config("q and λ level lists must be non-empty".into()));
        }
        for &q in &self.q_levels {
            capacity_reduction(1.0, 0.0, q).map_err(|e| Error::Config(e.to_string()))?;
        }
        for &l in &self.lambda_levels {
            capacity_reduction(1.0, l, 1.0).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.od_subset == Some(0) {
            return Err(Error::Config("OD subset size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedCase {
    pub kind: DisruptionKind,
    pub n_elements: usize,
    pub q: f64,
    pub lambda: f64,
}

fn case_order(a: &FedCase, b: &FedCase) -> std::cmp::Ordering {
    a.kind
        .cmp(&b.kind)
        .then(a.n_elements.cmp(&b.n_elements))
        .then(a.q.total_cmp(&b.q))
        .then(a.lambda.total_cmp(&b.lambda))
}

/// Every instance of the design, sorted by (kind, n, q, λ).
pub fn fed_cases(cfg: &FedConfig) -> Vec<FedCase> {
    let mut out = Vec::new();
    for (&kind, levels) in &cfg.levels {
        for &n_elements in levels {
            for &q in &cfg.q_levels {
                for &lambda in &cfg.lambda_levels {
                    out.push(FedCase {
                        kind,
                        n_elements,
                        q,
                        lambda,
                    });
                }
            }
        }
    }
    out.sort_by(case_order);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedRow {
    pub kind: DisruptionKind,
    pub n_elements: usize,
    pub q: f64,
    pub lambda: f64,
    pub objective: f64,
    pub status: SolveStatus,
    /// Total unsatisfied containers.
    pub unsatisfied: f64,
    /// Seconds.
    pub wall_time: f64,
}

impl FedRow {
    fn case(&self) -> FedCase {
        FedCase {
            kind: self.kind,
            n_elements: self.n_elements,
            q: self.q,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedResult {
    pub rows: Vec<FedRow>,
    /// Element ids per kind, most important first.
    pub ranking: BTreeMap<DisruptionKind, Vec<String>>,
    pub baseline_objective: f64,
    pub psi: f64,
}

impl FedResult {
    pub fn count(&self, kind: DisruptionKind) -> usize {
        self.rows.iter().filter(|r| r.kind == kind).count()
    }
}

/// Demands of the first `n` distinct ODs, in input order.
pub fn od_subset(demands: &[CommodityDemand], n: Option<usize>) -> Vec<CommodityDemand> {
    let Some(n) = n else { return demands.to_vec() };
    let mut keep = BTreeSet::new();
    for d in demands {
        if keep.len() < n {
            keep.insert(d.od.id.clone());
        }
    }
    demands.iter().filter(|d| keep.contains(&d.od.id)).cloned().collect()
}

pub fn total_unsatisfied(inst: &MifrInstance, sol: &SolutionVector) -> f64 {
    (0..inst.pairs.len()).map(|p| sol.values[inst.unsatisfied(p)]).sum()
}

/// Capacitated elements hit by disrupting `ids` of `kind`. A node disruption
/// covers every link entering or leaving the node.
pub fn disrupted_elements(net: &IntermodalNetwork, kind: DisruptionKind, ids: &[String]) -> Result<Vec<ElementRef>> {
    let mut set = BTreeSet::new();
    for id in ids {
        match kind {
            DisruptionKind::Link => {
                let l = net
                    .link_ix(id)
                    .ok_or_else(|| Error::Reference(format!("unknown link {id}")))?;
                set.insert(ElementRef::Link(l));
            }
            DisruptionKind::Node => {
                let n = net
                    .node_ix(id)
                    .ok_or_else(|| Error::Reference(format!("unknown node {id}")))?;
                for &l in net.out_links(n).iter().chain(net.in_links(n)) {
                    set.insert(ElementRef::Link(l));
                }
            }
            DisruptionKind::Terminal => {
                let t = net
                    .terminal_ix(id)
                    .ok_or_else(|| Error::Reference(format!("unknown terminal {id}")))?;
                set.insert(ElementRef::Terminal(t));
            }
        }
    }
    Ok(set.into_iter().collect())
}

/// Reductions for one design point.
pub fn case_reductions(
    net: &IntermodalNetwork,
    elements: &[ElementRef],
    q: f64,
    lambda: f64,
    mode: DisruptionMode,
) -> Result<ReductionTable> {
    match mode {
        DisruptionMode::RobustReduce => {
            let specs: Vec<UncertaintySpec> = elements
                .iter()
                .map(|&element| UncertaintySpec { element, lambda, q })
                .collect();
            reduction_table(net, &specs)
        }
        DisruptionMode::Knockout => {
            let mut table = ReductionTable::deterministic(net);
            for &e in elements {
                table.knock_out(e);
            }
            Ok(table)
        }
    }
}

/// Zero capacity at every terminal.
pub fn knock_out_all_terminals(net: &IntermodalNetwork) -> ReductionTable {
    let mut table = ReductionTable::deterministic(net);
    for t in 0..net.terminals().len() {
        table.knock_out(ElementRef::Terminal(TerminalIx(t)));
    }
    table
}

/// Baseline (θ = 0) solve and per-kind importance ranking.
pub fn baseline_ranking(
    net: &Arc<IntermodalNetwork>,
    demands: &[CommodityDemand],
    pathsets: &[PathSet],
    model: &ModelConfig,
    solver: &SolverConfig,
) -> Result<(f64, MifrInstance, BTreeMap<DisruptionKind, Vec<String>>)> {
    let inst = build_instance(
        net.clone(),
        demands,
        &ReductionTable::deterministic(net),
        pathsets,
        model,
    )?;
    let base = solve(&inst, solver)?;
    let weights = FlowWeights::from_solution(&inst, &base.best);
    let event = DisruptionScenario::uniform(DisruptionKind::Link, Vec::new(), demands);
    let report = importance_report(net, &weights, &event, "deterministic baseline")?;
    let mut ranking = BTreeMap::new();
    for kind in [DisruptionKind::Link, DisruptionKind::Node, DisruptionKind::Terminal] {
        let ids = rank_elements(report.of_kind(kind)).into_iter().map(|s| s.id).collect();
        ranking.insert(kind, ids);
    }
    Ok((base.objective(), inst, ranking))
}

/// Solves every design point; the top-`n` ranked elements of the given kind
/// are disrupted (all of them when fewer exist).
pub fn run_fed(
    net: Arc<IntermodalNetwork>,
    demands: &[CommodityDemand],
    cfg: &FedConfig,
    model: &ModelConfig,
    solver: &SolverConfig,
) -> Result<FedResult> {
    cfg.validate()?;
    let demands = od_subset(demands, cfg.od_subset);
    let pathsets = pathsets_for(&net, &demands, model)?;
    let (baseline_objective, base_inst, ranking) = baseline_ranking(&net, &demands, &pathsets, model, solver)?;
    let psi = base_inst.psi();
    let model = ModelConfig {
        psi: Some(psi),
        ..model.clone()
    };
    let cases = fed_cases(cfg);
    log::info!("running {} design points", cases.len());

    let run_case = |case: &FedCase| -> Result<FedRow> {
        let ids = &ranking[&case.kind];
        let chosen = &ids[..case.n_elements.min(ids.len())];
        let elements = disrupted_elements(&net, case.kind, chosen)?;
        let reductions = case_reductions(&net, &elements, case.q, case.lambda, cfg.mode)?;
        let inst = build_instance(net.clone(), &demands, &reductions, &pathsets, &model)?;
        let r = solve(&inst, solver)?;
        log::debug!(
            "{} n={} q={} λ={}: {} ({})",
            case.kind,
            case.n_elements,
            case.q,
            case.lambda,
            r.objective(),
            r.status
        );
        Ok(FedRow {
            kind: case.kind,
            n_elements: case.n_elements,
            q: case.q,
            lambda: case.lambda,
            objective: r.objective(),
            status: r.status,
            unsatisfied: total_unsatisfied(&inst, &r.best),
            wall_time: r.wall_time,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut rows = pool.install(|| cases.par_iter().map(run_case).collect::<Result<Vec<_>>>())?;
    rows.sort_by(|a, b| case_order(&a.case(), &b.case()));
    Ok(FedResult {
        rows,
        ranking,
        baseline_objective,
        psi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendViolation {
    pub along: &'static str,
    pub before: FedRow,
    pub after: FedRow,
}

/// Objective must not fall as λ rises (fixed kind, n, q) nor rise as q rises
/// (fixed kind, n, λ > 0). `tol` is relative.
pub fn check_trends(rows: &[FedRow], tol: f64) -> Vec<TrendViolation> {
    let drop = |hi: f64, lo: f64| lo < hi - tol * hi.abs().max(1.0);
    let mut out = Vec::new();
    let mut by_q: BTreeMap<(DisruptionKind, usize, u64), Vec<&FedRow>> = BTreeMap::new();
    let mut by_lambda: BTreeMap<(DisruptionKind, usize, u64), Vec<&FedRow>> = BTreeMap::new();
    for r in rows {
        by_q.entry((r.kind, r.n_elements, r.q.to_bits())).or_default().push(r);
        if r.lambda > 0.0 {
            by_lambda
                .entry((r.kind, r.n_elements, r.lambda.to_bits()))
                .or_default()
                .push(r);
        }
    }
    for mut series in by_q.into_values() {
        series.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        for w in series.windows(2) {
            if drop(w[0].objective, w[1].objective) {
                out.push(TrendViolation {
                    along: "lambda",
                    before: w[0].clone(),
                    after: w[1].clone(),
                });
            }
        }
    }
    for mut series in by_lambda.into_values() {
        series.sort_by(|a, b| a.q.total_cmp(&b.q));
        for w in series.windows(2) {
            if drop(w[1].objective, w[0].objective) {
                out.push(TrendViolation {
                    along: "q",
                    before: w[0].clone(),
                    after: w[1].clone(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn census_matches_design() {
        let cases = fed_cases(&FedConfig::default());
        let count = |k| cases.iter().filter(|c| c.kind == k).count();
        assert_eq!(count(DisruptionKind::Link), 112);
        assert_eq!(count(DisruptionKind::Node), 112);
        assert_eq!(count(DisruptionKind::Terminal), 84);
    }

    #[test]
    fn config_validation() {
        let c = FedConfig {
            q_levels: vec![0.0],
            ..FedConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = FedConfig {
            lambda_levels: vec![1.5],
            ..FedConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = FedConfig::default();
        c.levels.insert(DisruptionKind::Node, vec![]);
        assert!(c.validate().is_err());
    }

    fn small_cfg(kind: DisruptionKind, levels: Vec<usize>) -> FedConfig {
        FedConfig {
            levels: BTreeMap::from([(kind, levels)]),
            ..FedConfig::default()
        }
    }

    #[test]
    fn fixture_terminal_sweep() {
        let f = fixtures::six_node(10);
        let net = Arc::new(f.network);
        let cfg = small_cfg(DisruptionKind::Terminal, vec![1, 2]);
        let r = run_fed(net, &f.demands, &cfg, &ModelConfig::default(), &SolverConfig::default()).unwrap();
        assert_eq!(r.rows.len(), 2 * 4 * 7);
        assert_eq!(r.baseline_objective, 4734.0);
        assert!(check_trends(&r.rows, 1e-6).is_empty());
        for row in r.rows.iter().filter(|r| r.lambda == 0.0) {
            assert_eq!(row.objective, 4734.0);
        }
        // Ten containers through a terminal of capacity 1000 fit under any reduction here.
        assert!(r.rows.iter().all(|row| row.status == SolveStatus::Optimal));
    }

    #[test]
    fn knockout_mode_forces_road() {
        let f = fixtures::six_node(10);
        let net = Arc::new(f.network);
        let cfg = FedConfig {
            mode: DisruptionMode::Knockout,
            q_levels: vec![0.1],
            lambda_levels: vec![0.1],
            ..small_cfg(DisruptionKind::Terminal, vec![2])
        };
        let r = run_fed(net, &f.demands, &cfg, &ModelConfig::default(), &SolverConfig::default()).unwrap();
        assert_eq!(r.rows[0].objective, 8684.0);
    }

    #[test]
    fn node_disruption_covers_both_directions() {
        let f = fixtures::six_node(10);
        let e = disrupted_elements(&f.network, DisruptionKind::Node, &["M".into()]).unwrap();
        assert_eq!(e.len(), 2);
        assert!(disrupted_elements(&f.network, DisruptionKind::Link, &["zz".into()]).is_err());
    }

    #[test]
    fn trend_checker_flags_drops() {
        let row = |q, lambda, objective| FedRow {
            kind: DisruptionKind::Link,
            n_elements: 1,
            q,
            lambda,
            objective,
            status: SolveStatus::Optimal,
            unsatisfied: 0.0,
            wall_time: 0.0,
        };
        let good = vec![
            row(0.1, 0.0, 1.0),
            row(0.1, 0.1, 2.0),
            row(0.2, 0.0, 1.0),
            row(0.2, 0.1, 1.5),
        ];
        assert!(check_trends(&good, 1e-9).is_empty());
        let bad = vec![row(0.1, 0.0, 3.0), row(0.1, 0.1, 2.0), row(0.2, 0.1, 2.5)];
        let v = check_trends(&bad, 1e-9);
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].along, "lambda");
        assert_eq!(v[1].along, "q");
    }

    #[test]
    fn subset_keeps_first_ods() {
        let f = crate::experiments::synthetic::generate_synthetic_network(
            &crate::experiments::synthetic::SyntheticConfig::new(12, 4, 2, 5),
        )
        .unwrap();
        let d = od_subset(&f.demands, Some(2));
        let ods: BTreeSet<_> = d.iter().map(|d| d.od.id.as_str()).collect();
        assert_eq!(ods, BTreeSet::from(["1", "2"]));
        assert_eq!(od_subset(&f.demands, None).len(), f.demands.len());
    }
}
