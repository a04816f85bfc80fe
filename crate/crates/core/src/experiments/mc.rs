//! Monte Carlo check of the capacity-violation guarantee.
//!
//! Each capacitated element draws `ξ` from a symmetric law, realizes
//! `Q̂ = Q(1 + λξ)` and counts how often the assigned flow exceeds it. An
//! element fails only when a one-sided binomial test rejects `rate ≤ q` at the
//! 1% level.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Triangular, Uniform};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::mifr::{MifrInstance, SolutionVector};
use crate::robust::{CapacityReduction, ElementRef};
use crate::vulnerability::FlowWeights;

pub const DEFAULT_SAMPLES: u64 = 10_000;
pub const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseDistribution {
    Uniform,
    /// `±1` with equal probability.
    TwoPoint,
    /// Symmetric triangle with mode 0.
    Triangular,
}

impl NoiseDistribution {
    pub const ALL: [NoiseDistribution; 3] = [
        NoiseDistribution::Uniform,
        NoiseDistribution::TwoPoint,
        NoiseDistribution::Triangular,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseDistribution::Uniform => "uniform",
            NoiseDistribution::TwoPoint => "two-point",
            NoiseDistribution::Triangular => "triangular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str() == s.trim())
    }
}

impl fmt::Display for NoiseDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub distribution: NoiseDistribution,
    /// Draws are scaled to `[-half_width, half_width]`; must lie in (0, 1].
    pub half_width: f64,
    pub samples: u64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            distribution: NoiseDistribution::Uniform,
            half_width: 1.0,
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("Monte Carlo needs at least one sample".into()));
        }
        if !(self.half_width > 0.0 && self.half_width <= 1.0) {
            return Err(Error::Config(format!(
                "noise support [-{0}, {0}] is not within [-1, 1]",
                self.half_width
            )));
        }
        Ok(())
    }
}

enum Sampler {
    Uniform(Uniform<f64>),
    TwoPoint,
    Triangular(Triangular<f64>),
}

impl Sampler {
    fn new(d: NoiseDistribution) -> Self {
        match d {
            NoiseDistribution::Uniform => Sampler::Uniform(Uniform::new_inclusive(-1.0, 1.0).expect("valid range")),
            NoiseDistribution::TwoPoint => Sampler::TwoPoint,
            NoiseDistribution::Triangular => {
                Sampler::Triangular(Triangular::new(-1.0, 1.0, 0.0).expect("valid triangle"))
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::TwoPoint => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            Sampler::Triangular(t) => t.sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McVerdict {
    Pass,
    Fail,
}

impl McVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            McVerdict::Pass => "pass",
            McVerdict::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub element_type: String,
    pub element_id: String,
    pub flow: f64,
    pub nominal: f64,
    pub q: f64,
    pub lambda: f64,
    pub samples: u64,
    pub violations: u64,
    pub empirical_rate: f64,
    pub verdict: McVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub distribution: NoiseDistribution,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.verdict == McVerdict::Fail).count()
    }
}

/// Whether `violations` out of `samples` is evidence, at `SIGNIFICANCE`, of a rate above `q`.
pub fn exceeds_bound(violations: u64, samples: u64, q: f64) -> bool {
    if violations == 0 || q >= 1.0 {
        return false;
    }
    let b = Binomial::new(q, samples).expect("q in (0,1) and samples > 0");
    b.sf(violations - 1) < SIGNIFICANCE
}

/// Counts draws with `flow > Q(1 + λξ)`.
pub fn count_violations(flow: f64, nominal: f64, lambda: f64, cfg: &McConfig, rng: &mut ChaCha8Rng) -> u64 {
    let sampler = Sampler::new(cfg.distribution);
    let slack = 1e-9 * nominal.abs().max(1.0);
    let mut hits = 0;
    for _ in 0..cfg.samples {
        let xi = cfg.half_width * sampler.draw(rng);
        if flow > nominal * (1.0 + lambda * xi) + slack {
            hits += 1;
        }
    }
    hits
}

fn element_flow(weights: &FlowWeights, e: ElementRef) -> f64 {
    match e {
        ElementRef::Link(l) => weights.link[l.0],
        ElementRef::Terminal(t) => weights.transfer[t.0],
    }
}

/// Samples every capacitated element of `inst` against the flows in `best`.
pub fn mc_validate(inst: &MifrInstance, best: &SolutionVector, mc: &McConfig) -> Result<McReport> {
    mc.validate()?;
    if best.values.len() != inst.num_vars() {
        return Err(Error::Dimension {
            expected: inst.num_vars(),
            got: best.values.len(),
        });
    }
    let net = &inst.network;
    let weights = FlowWeights::from_solution(inst, best);
    let reductions: Vec<&CapacityReduction> = inst.reductions.iter().collect();
    let mut rows = Vec::with_capacity(reductions.len());
    for (k, r) in reductions.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(k as u64);
        let flow = element_flow(&weights, r.element);
        let violations = count_violations(flow, r.nominal, r.lambda, mc, &mut rng);
        let verdict = if exceeds_bound(violations, mc.samples, r.q) {
            McVerdict::Fail
        } else {
            McVerdict::Pass
        };
        rows.push(McRow {
            element_type: r.element.element_type(net).as_str().to_string(),
            element_id: r.element.id(net).to_string(),
            flow,
            nominal: r.nominal,
            q: r.q,
            lambda: r.lambda,
            samples: mc.samples,
            violations,
            empirical_rate: violations as f64 / mc.samples as f64,
            verdict,
        });
    }
    Ok(McReport {
        distribution: mc.distribution,
        rows,
    })
}

/// Writes `element_type,element_id,q,lambda,samples,violations,empirical_rate,verdict`.
pub fn write_mc_report(report: &McReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "element_type",
        "element_id",
        "q",
        "lambda",
        "samples",
        "violations",
        "empirical_rate",
        "verdict",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.element_type.clone(),
            r.element_id.clone(),
            r.q.to_string(),
            r.lambda.to_string(),
            r.samples.to_string(),
            r.violations.to_string(),
            r.empirical_rate.to_string(),
            r.verdict.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
