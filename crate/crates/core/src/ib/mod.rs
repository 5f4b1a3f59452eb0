//! Quantizer design trading compression rate `I(y;z)` against relevant
//! information `I(x;z)`.
//!
//! Four designers share the [`IbDesign`] result type:
//!
//! * [`iterative_ib`]: the self-consistent stationary-point iteration over
//!   stochastic mappings, driven by the multiplier `beta`;
//! * [`agglomerative_ib`]: greedy bottom-up merging, initialization free;
//! * [`kl_means_ib`]: Lloyd-style alternation with KL distortion and an
//!   optional code-length penalty `lambda`;
//! * [`dp_optimal_quantizer`]: the exact optimum for binary relevance
//!   variables, by dynamic programming over LLR-sorted observations.

mod agg;
pub(crate) mod dp;
mod itib;
mod klmeans;

use std::fmt::Write as _;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::{check_dim, invalid, Error, Result};
use crate::info::{
    mutual_information, push_through_quantizer, ConditionalDist, JointXY, Pmf,
};
use crate::quantizer::Quantizer;

pub use agg::agglomerative_ib;
pub use dp::{contiguous_dp_quantizer, dp_optimal_quantizer};
pub use itib::{eq2_residual, iterative_ib, iterative_ib_with_rng, ItIbInit, ItIbParams};
pub use klmeans::{kl_means_ib, kl_means_with_rng, KlMeansParams};

/// Clusters whose probability falls below this are considered dead.
pub const DEAD_CLUSTER: f64 = 1e-12;

/// A designed quantizer together with its information-theoretic summary.
#[derive(Debug, Clone, PartialEq)]
pub struct IbDesign {
    pub quantizer: Quantizer,
    /// Multiplier the objective is reported at; `+inf` for the designers
    /// that maximize `I(x;z)` outright.
    pub beta: f64,
    pub cluster_prior: Pmf,
    /// `p(x|z)`, one row per cluster.
    pub cluster_posteriors: ConditionalDist,
    /// `I(y;z)` in bits.
    pub compression_rate: f64,
    /// `I(x;z)` in bits.
    pub relevant_info: f64,
    pub objective: f64,
    /// `I(x;y) - I(x;z)` in bits.
    pub info_loss: f64,
    pub occupied_clusters: usize,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective (or Lloyd cost) after every sweep, for iterative designers.
    pub objective_trace: Vec<f64>,
}

impl IbDesign {
    /// Summarizes an arbitrary quantizer on `j`. Posteriors of empty
    /// clusters are reported as uniform.
    pub fn evaluate(j: &JointXY, quantizer: Quantizer, beta: f64) -> Result<Self> {
        let xz = push_through_quantizer(j, &quantizer)?;
        let relevant_info = mutual_information(&xz);
        let compression_rate = compression_rate(j, &quantizer)?;
        let pz = xz.y_marginal();
        let nx = j.nx();
        let posts: Vec<f64> = xz
            .posteriors()
            .into_iter()
            .flat_map(|p| p.unwrap_or_else(|| vec![1.0 / nx as f64; nx]))
            .collect();
        let occupied = pz.probs().iter().filter(|&&p| p >= DEAD_CLUSTER).count();
        Ok(Self {
            cluster_posteriors: ConditionalDist::from_flat(quantizer.output_size(), nx, posts),
            quantizer,
            beta,
            cluster_prior: pz,
            compression_rate,
            relevant_info,
            objective: objective_value(compression_rate, relevant_info, beta),
            info_loss: mutual_information(j) - relevant_info,
            occupied_clusters: occupied,
            sweeps: 0,
            converged: true,
            objective_trace: Vec::new(),
        })
    }

    /// Re-reports the objective at a different multiplier.
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self.objective = objective_value(self.compression_rate, self.relevant_info, beta);
        self
    }
}

/// `[I(y;z) - beta I(x;z)] / (beta + 1)`; the `beta -> inf` limit is `-I(x;z)`.
pub(crate) fn objective_value(rate: f64, relevant: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        -relevant
    } else {
        (rate - beta * relevant) / (beta + 1.0)
    }
}

/// `I(y;z)` in bits.
pub fn compression_rate(j: &JointXY, q: &Quantizer) -> Result<f64> {
    let yz = push_through_quantizer(&j.y_self_joint(), q)?;
    Ok(mutual_information(&yz))
}

/// The bottleneck Lagrangian `[I(y;z) - beta I(x;z)] / (beta + 1)`.
pub fn ib_objective(j: &JointXY, q: &Quantizer, beta: f64) -> Result<f64> {
    check_dim(j.ny(), q.input_size())?;
    if !(beta >= 0.0) {
        return Err(invalid(format!("beta must be non-negative, got {beta}")));
    }
    let relevant = mutual_information(&push_through_quantizer(j, q)?);
    Ok(objective_value(compression_rate(j, q)?, relevant, beta))
}

/// Observation symbols with non-zero probability, and the joint restricted
/// to them.
pub(crate) struct Support {
    pub kept: Vec<usize>,
    pub reduced: JointXY,
    ny: usize,
}

impl Support {
    pub fn of(j: &JointXY) -> Result<Self> {
        let py = j.y_marginal();
        let kept: Vec<usize> = (0..j.ny()).filter(|&y| py.probs()[y] > 0.0).collect();
        if kept.is_empty() {
            return Err(Error::InvalidDistribution("joint has no mass".into()));
        }
        let mut data = Vec::with_capacity(j.nx() * kept.len());
        for x in 0..j.nx() {
            data.extend(kept.iter().map(|&y| j.get(x, y)));
        }
        Ok(Self {
            reduced: JointXY::from_flat(j.nx(), kept.len(), data),
            kept,
            ny: j.ny(),
        })
    }

    /// For every original symbol, the reduced index of the nearest kept
    /// symbol (lower index on ties).
    fn nearest(&self) -> Vec<usize> {
        (0..self.ny)
            .map(|y| {
                let pos = self.kept.partition_point(|&k| k < y);
                if pos < self.kept.len() && self.kept[pos] == y {
                    return pos;
                }
                match (pos.checked_sub(1), (pos < self.kept.len()).then_some(pos)) {
                    (Some(l), Some(r)) => {
                        if y - self.kept[l] <= self.kept[r] - y {
                            l
                        } else {
                            r
                        }
                    }
                    (Some(l), None) => l,
                    (None, Some(r)) => r,
                    (None, None) => unreachable!("support is non-empty"),
                }
            })
            .collect()
    }

    pub fn expand_labels(&self, reduced: &[usize]) -> Vec<usize> {
        self.nearest().into_iter().map(|r| reduced[r]).collect()
    }

    pub fn expand_rows(&self, reduced: &ConditionalDist) -> ConditionalDist {
        let cols = reduced.num_cols();
        let data = self
            .nearest()
            .into_iter()
            .flat_map(|r| reduced.row(r).to_vec())
            .collect();
        ConditionalDist::from_flat(self.ny, cols, data)
    }

    /// Restricts a full-alphabet quantizer to the kept rows.
    pub fn reduce_rows(&self, q: &Quantizer) -> ConditionalDist {
        let cols = q.output_size();
        let data = self
            .kept
            .iter()
            .flat_map(|&y| q.mapping().row(y).to_vec())
            .collect();
        ConditionalDist::from_flat(self.kept.len(), cols, data)
    }
}

/// Generator for restart `index` of a run keyed by `key` (e.g. cluster count).
pub fn stream_rng(seed: u64, key: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Runs `restarts` independent designs in parallel and keeps the one with
/// the lowest information loss (lowest restart index on ties).
pub fn best_of_restarts<F>(restarts: usize, seed: u64, key: u64, run: F) -> Result<IbDesign>
where
    F: Fn(&mut ChaCha8Rng) -> Result<IbDesign> + Sync,
{
    if restarts == 0 {
        return Err(invalid("at least one restart is required"));
    }
    let designs: Vec<IbDesign> = (0..restarts)
        .into_par_iter()
        .map(|i| run(&mut stream_rng(seed, key, i as u64)))
        .collect::<Result<_>>()?;
    Ok(designs
        .into_iter()
        .reduce(|best, d| if d.info_loss < best.info_loss { d } else { best })
        .expect("restarts > 0"))
}

/// Designer selector for [`ib_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    ItIb,
    AggIb,
    KlMeans,
    Dp,
}

impl Algorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::ItIb => "it-ib",
            Algorithm::AggIb => "agg-ib",
            Algorithm::KlMeans => "kl-means",
            Algorithm::Dp => "dp",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "it-ib" => Ok(Algorithm::ItIb),
            "agg-ib" => Ok(Algorithm::AggIb),
            "kl-means" => Ok(Algorithm::KlMeans),
            "dp" => Ok(Algorithm::Dp),
            other => Err(invalid(format!(
                "unknown algorithm `{other}` (expected it-ib, agg-ib, kl-means or dp)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveConfig {
    pub algorithm: Algorithm,
    pub beta: f64,
    pub lambda: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl CurveConfig {
    pub fn new(algorithm: Algorithm, beta: f64) -> Self {
        Self {
            algorithm,
            beta,
            lambda: 0.0,
            restarts: 100,
            seed: 0,
            max_sweeps: itib::DEFAULT_MAX_SWEEPS,
            tol: itib::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub n: usize,
    pub design: IbDesign,
}

/// One design per cluster count, each the best of `restarts` initializations
/// for the designers that depend on one.
pub fn design_one(j: &JointXY, cfg: &CurveConfig, n: usize) -> Result<IbDesign> {
    let design = match cfg.algorithm {
        Algorithm::ItIb => {
            let params = ItIbParams {
                beta: cfg.beta,
                max_sweeps: cfg.max_sweeps,
                tol: cfg.tol,
            };
            best_of_restarts(cfg.restarts, cfg.seed, n as u64, |rng| {
                iterative_ib_with_rng(j, n, &params, rng)
            })?
        }
        Algorithm::KlMeans => {
            let params = KlMeansParams {
                lambda: cfg.lambda,
                max_sweeps: cfg.max_sweeps,
                tol: cfg.tol,
            };
            best_of_restarts(cfg.restarts, cfg.seed, n as u64, |rng| {
                kl_means_with_rng(j, n, &params, rng)
            })?
        }
        Algorithm::AggIb => agglomerative_ib(j, n.min(j.ny()))?,
        Algorithm::Dp => dp_optimal_quantizer(j, n)?,
    };
    Ok(design.with_beta(cfg.beta))
}

pub fn ib_curve(j: &JointXY, cfg: &CurveConfig, n_values: &[usize]) -> Result<Vec<CurvePoint>> {
    if n_values.is_empty() {
        return Err(invalid("no cluster counts requested"));
    }
    if let Some(bad) = n_values.iter().find(|&&n| n == 0) {
        return Err(invalid(format!("cluster count must be >= 1, got {bad}")));
    }
    n_values
        .iter()
        .map(|&n| {
            Ok(CurvePoint {
                n,
                design: design_one(j, cfg, n)?,
            })
        })
        .collect()
}

pub const CURVE_CSV_HEADER: &str =
    "algorithm,beta,n,restarts,info_loss_bits,compression_rate_bits,objective";

/// CSV rows (with header) for a finished curve.
pub fn curve_csv(cfg: &CurveConfig, points: &[CurvePoint]) -> String {
    let mut s = String::new();
    s.push_str(CURVE_CSV_HEADER);
    s.push('\n');
    for p in points {
        writeln!(
            s,
            "{},{},{},{},{:.12},{:.12},{:.12}",
            cfg.algorithm.tag(),
            cfg.beta,
            p.n,
            cfg.restarts,
            p.design.info_loss,
            p.design.compression_rate,
            p.design.objective
        )
        .unwrap();
    }
    s
}
