//! `intermodal` command-line front end.

mod config;
mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use intermodal::experiments::fed::{check_trends, run_fed};
use intermodal::experiments::mc::{mc_validate, write_mc_report};
use intermodal::experiments::report::emit_results;
use intermodal::experiments::synthetic::{generate_synthetic_network, SyntheticConfig};
use intermodal::mifr::{build_with_paths, export_lp, ModelConfig};
use intermodal::netmodel::{
    load_demands, load_network, validate_demands, validate_network, write_demands, write_network, CommodityDemand,
    IntermodalNetwork, TerminalIx,
};
use intermodal::paths::enumerate_candidate_paths;
use intermodal::robust::{load_scenario, reduction_table, ElementRef, ReductionTable, UncertaintySpec};
use intermodal::solver::{extract_routes, solve, write_route_report, write_solution_dump, SolveStatus};
use intermodal::vulnerability::{
    importance_report, verify_ordering, write_importance_csv, write_verdicts_csv, DisruptionKind, DisruptionScenario,
    FlowWeights, Outcome,
};

use config::FileConfig;
use manifest::{digests, now_unix, RunManifest};

const AFTER_HELP: &str = "\
Exit codes:
  0  finished; solves proven optimal (or within the optimality gap)
  1  input, configuration or I/O error, or a failed validation check
  2  finished, but at least one solve stopped at a time or node limit

Every run writes manifest.json to --out with SHA-256 digests of its inputs,
the effective configuration, the tool version, the seed and timestamps.";

#[derive(Debug, Parser)]
#[command(name = "intermodal", version, about = "Reliable road-rail intermodal freight routing under capacity uncertainty", after_help = AFTER_HELP)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for tie-breaking, Monte Carlo draws and synthetic networks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for factorial runs; 0 uses every core.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// TOML file with [rates], [model], [solver], [fed], [mc] and [vulnerability] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and write the solution and routes.
    Solve {
        #[command(flatten)]
        input: InputArgs,
        /// Uncertainty CSV: element_type,element_id,lambda,q.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Also write the model in LP format.
        #[arg(long)]
        export_lp: bool,
    },
    /// Run the factorial disruption experiment.
    Fed {
        #[command(flatten)]
        input: InputArgs,
        /// Disruption kinds, comma separated: links,nodes,terminals.
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        /// Element-count levels per kind, e.g. `--levels links=30,60 --levels nodes=5`.
        #[arg(long)]
        levels: Vec<String>,
        /// λ levels, comma separated.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        /// q levels, comma separated.
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        /// robust-reduce or knockout.
        #[arg(long)]
        mode: Option<String>,
        /// Keep only the first N ODs.
        #[arg(long)]
        od_subset: Option<usize>,
        /// Write zero wall times so reruns produce identical files.
        #[arg(long)]
        omit_timing: bool,
    },
    /// Monte Carlo check of capacity-violation rates on a robust solution.
    Validate {
        #[command(flatten)]
        input: InputArgs,
        /// Uncertainty CSV; without it every element gets the [mc] q and λ.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// uniform, two-point or triangular.
        #[arg(long)]
        distribution: Option<String>,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Importance indices, ranking and ordering checks from a deterministic solve.
    Importance {
        #[command(flatten)]
        input: InputArgs,
        /// Travel-time multiplier α for disrupted links.
        #[arg(long)]
        alpha: Option<f64>,
        /// Disrupted dummy-link time in hours.
        #[arg(long)]
        dummy_time: Option<f64>,
    },
    /// Enumerate candidate paths per OD.
    Paths {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        max_paths: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long, requires_all = ["links", "terminals", "demands"], conflicts_with = "synthetic")]
    nodes: Option<PathBuf>,
    #[arg(long)]
    links: Option<PathBuf>,
    #[arg(long)]
    terminals: Option<PathBuf>,
    #[arg(long)]
    demands: Option<PathBuf>,
    /// Generate a network instead: highway,rail,terminal node counts.
    #[arg(long, value_delimiter = ',')]
    synthetic: Option<Vec<usize>>,
}

struct Loaded {
    net: Arc<IntermodalNetwork>,
    demands: Vec<CommodityDemand>,
    inputs: Vec<PathBuf>,
}

struct Ctx {
    out: PathBuf,
    seed: Option<u64>,
    jobs: usize,
    cfg: FileConfig,
    cfg_path: Option<PathBuf>,
    started: f64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    fn model(&self) -> ModelConfig {
        self.cfg.model.build()
    }

    fn load(&mut self, input: &InputArgs) -> Result<Loaded> {
        let loaded = load_inputs(input, &self.cfg, self.seed, &self.out)?;
        self.inputs.extend(loaded.inputs.iter().cloned());
        Ok(loaded)
    }

    fn finish(self, command: &str) -> Result<()> {
        let mut inputs = self.inputs;
        if let Some(c) = self.cfg_path {
            inputs.push(c);
        }
        let m = RunManifest {
            command: command.to_string(),
            arguments: std::env::args().collect(),
            input_digests: digests(&inputs)?,
            config: serde_json::to_value(&self.cfg)?,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            started_unix_s: self.started,
            finished_unix_s: now_unix(),
            outputs: self
                .outputs
                .iter()
                .map(|p| {
                    p.file_name()
                        .map(|f| f.to_string_lossy().into_owned())
                        .unwrap_or_default()
                })
                .collect(),
        };
        m.write(&self.out)?;
        Ok(())
    }
}

fn load_inputs(input: &InputArgs, cfg: &FileConfig, seed: Option<u64>, out: &Path) -> Result<Loaded> {
    if let Some(counts) = &input.synthetic {
        if counts.len() != 3 {
            bail!("--synthetic takes three counts: highway,rail,terminal");
        }
        let synth = SyntheticConfig::new(counts[0], counts[1], counts[2], seed.unwrap_or(1));
        let f = generate_synthetic_network(&synth)?;
        let dir = out.join("inputs");
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_network(&f.network, &dir)?;
        let demands_path = dir.join("demands.csv");
        write_demands(&f.network, &f.demands, &demands_path)?;
        let inputs = ["nodes.csv", "links.csv", "terminals.csv", "demands.csv"]
            .iter()
            .map(|n| dir.join(n))
            .collect();
        return Ok(Loaded {
            net: Arc::new(f.network),
            demands: f.demands,
            inputs,
        });
    }
    let (Some(nodes), Some(links), Some(terminals), Some(demands)) =
        (&input.nodes, &input.links, &input.terminals, &input.demands)
    else {
        bail!("give --nodes, --links, --terminals and --demands, or --synthetic H,R,S");
    };
    let net = load_network(nodes, links, terminals, &cfg.rates)?;
    let diagnostics = validate_network(&net);
    for d in &diagnostics {
        log::warn!("{d}");
    }
    let demand_rows = load_demands(demands, &net, cfg.rates.default_deadline_hours)?;
    let problems = validate_demands(&net, &demand_rows);
    if let Some(first) = problems.first() {
        bail!("{} demand problem(s), first: {first}", problems.len());
    }
    Ok(Loaded {
        net: Arc::new(net),
        demands: demand_rows,
        inputs: vec![nodes.clone(), links.clone(), terminals.clone(), demands.clone()],
    })
}

fn uniform_specs(net: &IntermodalNetwork, lambda: f64, q: f64) -> Vec<UncertaintySpec> {
    net.link_ixs()
        .map(ElementRef::Link)
        .chain((0..net.terminals().len()).map(|t| ElementRef::Terminal(TerminalIx(t))))
        .map(|element| UncertaintySpec { element, lambda, q })
        .collect()
}

fn exit_for(status: SolveStatus) -> u8 {
    if status.is_proven() {
        0
    } else {
        2
    }
}

fn cmd_solve(ctx: &mut Ctx, input: &InputArgs, scenario: Option<&Path>, export: bool) -> Result<u8> {
    let data = ctx.load(input)?;
    let reductions = match scenario {
        Some(p) => {
            ctx.inputs.push(p.to_path_buf());
            reduction_table(&data.net, &load_scenario(p, &data.net)?)?
        }
        None => ReductionTable::deterministic(&data.net),
    };
    let inst = build_with_paths(data.net.clone(), &data.demands, &reductions, &ctx.model())?;
    let r = solve(&inst, &ctx.cfg.solver.build(ctx.seed))?;
    let sol_path = ctx.out.join("solution.csv");
    write_solution_dump(&inst, &r.best, &sol_path)?;
    let routes_path = ctx.out.join("routes.csv");
    write_route_report(&inst, &extract_routes(&inst, &r.best)?, &routes_path)?;
    ctx.outputs.extend([sol_path, routes_path]);
    if export {
        let lp = ctx.out.join("model.lp");
        std::fs::write(&lp, export_lp(&inst)).with_context(|| format!("writing {}", lp.display()))?;
        ctx.outputs.push(lp);
    }
    println!("status {}", r.status);
    println!("objective {:.1}", r.objective());
    println!("bound {:.1} gap {:.3e} nodes {}", r.bound, r.gap, r.nodes_explored);
    Ok(exit_for(r.status))
}

fn parse_levels(specs: &[String]) -> Result<BTreeMap<DisruptionKind, Vec<usize>>> {
    let mut out = BTreeMap::new();
    for s in specs {
        let Some((kind, list)) = s.split_once('=') else {
            bail!("level spec {s:?} must look like links=30,60");
        };
        let kind = DisruptionKind::parse(kind).with_context(|| format!("unknown disruption kind {kind:?}"))?;
        let levels = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .with_context(|| format!("bad level {v:?} in {s:?}"))
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(kind, levels);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_fed(
    ctx: &mut Ctx,
    input: &InputArgs,
    kinds: Option<&[String]>,
    levels: &[String],
    lambda: Option<&[f64]>,
    q: Option<&[f64]>,
    mode: Option<&str>,
    od_subset: Option<usize>,
    omit_timing: bool,
) -> Result<u8> {
    if let Some(k) = kinds {
        ctx.cfg.fed.kinds = k.to_vec();
    }
    for (kind, l) in parse_levels(levels)? {
        match kind {
            DisruptionKind::Link => ctx.cfg.fed.links = l,
            DisruptionKind::Node => ctx.cfg.fed.nodes = l,
            DisruptionKind::Terminal => ctx.cfg.fed.terminals = l,
        }
    }
    if let Some(l) = lambda {
        ctx.cfg.fed.lambda = l.to_vec();
    }
    if let Some(q) = q {
        ctx.cfg.fed.q = q.to_vec();
    }
    if let Some(m) = mode {
        ctx.cfg.fed.mode = m.to_string();
    }
    if od_subset.is_some() {
        ctx.cfg.fed.od_subset = od_subset;
    }
    let fed_cfg = ctx.cfg.fed.build(ctx.jobs)?;
    let data = ctx.load(input)?;
    let solver = ctx.cfg.solver.build(ctx.seed);
    let result = run_fed(data.net.clone(), &data.demands, &fed_cfg, &ctx.model(), &solver)?;
    ctx.outputs.extend(emit_results(&result.rows, &ctx.out, omit_timing)?);

    for kind in fed_cfg.levels.keys() {
        println!("{kind}: {} instances", result.count(*kind));
    }
    let violations = check_trends(&result.rows, solver.optimality_gap);
    println!("trend violations {}", violations.len());
    for v in &violations {
        log::warn!(
            "{} n={}: objective {} -> {} along {}",
            v.before.kind,
            v.before.n_elements,
            v.before.objective,
            v.after.objective,
            v.along
        );
    }
    let unproven = result.rows.iter().filter(|r| !r.status.is_proven()).count();
    if unproven > 0 {
        println!("{unproven} instance(s) stopped at a limit");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_validate(
    ctx: &mut Ctx,
    input: &InputArgs,
    scenario: Option<&Path>,
    distribution: Option<&str>,
    samples: Option<u64>,
) -> Result<u8> {
    if let Some(d) = distribution {
        ctx.cfg.mc.distribution = d.to_string();
    }
    if let Some(s) = samples {
        ctx.cfg.mc.samples = s;
    }
    let mc = ctx.cfg.mc.build(ctx.seed.unwrap_or(0))?;
    mc.validate()?;
    let data = ctx.load(input)?;
    let specs = match scenario {
        Some(p) => {
            ctx.inputs.push(p.to_path_buf());
            load_scenario(p, &data.net)?
        }
        None => uniform_specs(&data.net, ctx.cfg.mc.lambda, ctx.cfg.mc.q),
    };
    let reductions = reduction_table(&data.net, &specs)?;
    let inst = build_with_paths(data.net.clone(), &data.demands, &reductions, &ctx.model())?;
    let r = solve(&inst, &ctx.cfg.solver.build(ctx.seed))?;
    let report = mc_validate(&inst, &r.best, &mc)?;
    let path = ctx.out.join("mc_report.csv");
    write_mc_report(&report, &path)?;
    ctx.outputs.push(path);
    let fails = report.failures();
    println!(
        "{} elements, {} samples each ({}), {} failed",
        report.rows.len(),
        mc.samples,
        mc.distribution,
        fails
    );
    if fails > 0 {
        return Ok(1);
    }
    Ok(exit_for(r.status))
}

fn cmd_importance(ctx: &mut Ctx, input: &InputArgs, alpha: Option<f64>, dummy: Option<f64>) -> Result<u8> {
    if let Some(a) = alpha {
        ctx.cfg.vulnerability.multiplier = a;
    }
    if dummy.is_some() {
        ctx.cfg.vulnerability.dummy_link_time = dummy;
    }
    let data = ctx.load(input)?;
    let inst = build_with_paths(
        data.net.clone(),
        &data.demands,
        &ReductionTable::deterministic(&data.net),
        &ctx.model(),
    )?;
    let r = solve(&inst, &ctx.cfg.solver.build(ctx.seed))?;
    let weights = FlowWeights::from_solution(&inst, &r.best);
    let mut event = DisruptionScenario::uniform(DisruptionKind::Link, Vec::new(), &data.demands);
    event.travel_time_multiplier = ctx.cfg.vulnerability.multiplier;
    if let Some(t) = ctx.cfg.vulnerability.dummy_link_time {
        event.dummy_link_time = t;
    }
    event.validate(&data.demands)?;
    let report = importance_report(&data.net, &weights, &event, "deterministic baseline solve")?;
    let verdicts = verify_ordering(&data.net, &report);
    let imp = ctx.out.join("importance.csv");
    write_importance_csv(&report, &imp)?;
    let ord = ctx.out.join("ordering.csv");
    write_verdicts_csv(&verdicts, &ord)?;
    ctx.outputs.extend([imp, ord]);
    let pass = verdicts.iter().filter(|v| v.outcome == Outcome::Pass).count();
    let fail = verdicts.iter().filter(|v| v.failed()).count();
    println!(
        "ordering checks: {pass} pass, {fail} fail, {} premise-not-met",
        verdicts.len() - pass - fail
    );
    if fail > 0 {
        return Ok(1);
    }
    Ok(exit_for(r.status))
}

fn cmd_paths(ctx: &mut Ctx, input: &InputArgs, cutoff: Option<f64>, max_paths: Option<usize>) -> Result<u8> {
    if let Some(c) = cutoff {
        ctx.cfg.model.cutoff_factor = c;
    }
    if let Some(m) = max_paths {
        ctx.cfg.model.max_paths = m;
    }
    let model = ctx.model();
    model.validate()?;
    let data = ctx.load(input)?;
    let net = &data.net;
    let path = ctx.out.join("paths.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["od", "rank", "length_miles", "travel_time_h", "terminals", "nodes"])?;
    let mut seen = BTreeSet::new();
    let mut total = 0;
    for d in &data.demands {
        if !seen.insert(d.od.id.clone()) {
            continue;
        }
        let set = enumerate_candidate_paths(net, &d.od, model.cutoff_factor, model.max_paths)?;
        for (rank, p) in set.paths.iter().enumerate() {
            let terminals: Vec<&str> = p
                .terminals
                .iter()
                .map(|&t| net.node(net.terminal(t).node).id.as_str())
                .collect();
            w.write_record([
                d.od.id.clone(),
                (rank + 1).to_string(),
                p.length.to_string(),
                p.base_travel_time.to_string(),
                terminals.join(">"),
                p.node_sequence(net),
            ])?;
        }
        total += set.paths.len();
    }
    w.flush()?;
    ctx.outputs.push(path);
    println!("{} ODs, {total} candidate paths", seen.len());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let cfg = config::load(cli.config.as_deref())?;
    let mut ctx = Ctx {
        out: cli.out.clone(),
        seed: cli.seed,
        jobs: cli.jobs,
        cfg,
        cfg_path: cli.config.clone(),
        started: now_unix(),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let (name, code) = match &cli.command {
        Command::Solve {
            input,
            scenario,
            export_lp,
        } => ("solve", cmd_solve(&mut ctx, input, scenario.as_deref(), *export_lp)?),
        Command::Fed {
            input,
            kinds,
            levels,
            lambda,
            q,
            mode,
            od_subset,
            omit_timing,
        } => (
            "fed",
            cmd_fed(
                &mut ctx,
                input,
                kinds.as_deref(),
                levels,
                lambda.as_deref(),
                q.as_deref(),
                mode.as_deref(),
                *od_subset,
                *omit_timing,
            )?,
        ),
        Command::Validate {
            input,
            scenario,
            distribution,
            samples,
        } => (
            "validate",
            cmd_validate(&mut ctx, input, scenario.as_deref(), distribution.as_deref(), *samples)?,
        ),
        Command::Importance {
            input,
            alpha,
            dummy_time,
        } => ("importance", cmd_importance(&mut ctx, input, *alpha, *dummy_time)?),
        Command::Paths {
            input,
            cutoff,
            max_paths,
        } => ("paths", cmd_paths(&mut ctx, input, *cutoff, *max_paths)?),
    };
    ctx.finish(name)?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
