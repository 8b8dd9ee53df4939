use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::build_graph;

/// Where the class signal lives in the features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    /// Every node carries a noisy copy of its class mean.
    Direct,
    /// Each class is split into targets, relays and carriers. Edges only join
    /// targets to relays and relays to carriers, and only carriers hold signal,
    /// so a target sees its class through 2-hop neighbors alone. Splits are
    /// drawn from targets.
    TwoHop,
}

impl std::str::FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Signal::Direct),
            "two-hop" | "two_hop" => Ok(Signal::TwoHop),
            other => Err(Error::InvalidArgument(format!("unknown signal `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub signal: Signal,
    /// Offset added to feature `class` of a signal-carrying node.
    pub signal_strength: f64,
    pub noise_std: f64,
    /// Fractions of each class's split candidates used for training and validation;
    /// the rest is the test split.
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl SbmConfig {
    pub fn new(block_sizes: Vec<usize>, p_in: f64, p_out: f64, feature_dim: usize, signal: Signal, seed: u64) -> Self {
        SbmConfig {
            block_sizes,
            p_in,
            p_out,
            feature_dim,
            signal,
            signal_strength: 1.0,
            noise_std: 1.0,
            train_fraction: 0.1,
            val_fraction: 0.2,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Target,
    Relay,
    Carrier,
}

struct Layout {
    class: Vec<usize>,
    role: Vec<Role>,
}

fn layout(cfg: &SbmConfig) -> Result<Layout> {
    if cfg.block_sizes.is_empty() {
        return Err(Error::InvalidArgument("at least one block is required".into()));
    }
    let min_block = match cfg.signal {
        Signal::Direct => 2,
        Signal::TwoHop => 4,
    };
    if let Some(&b) = cfg.block_sizes.iter().find(|&&b| b < min_block) {
        return Err(Error::InvalidArgument(format!(
            "block of size {b} is too small (minimum {min_block})"
        )));
    }
    let mut class = Vec::new();
    let mut role = Vec::new();
    for (c, &size) in cfg.block_sizes.iter().enumerate() {
        let targets = size / 2;
        let relays = (size - targets) / 2;
        for i in 0..size {
            class.push(c);
            role.push(match cfg.signal {
                Signal::Direct => Role::Target,
                Signal::TwoHop if i < targets => Role::Target,
                Signal::TwoHop if i < targets + relays => Role::Relay,
                Signal::TwoHop => Role::Carrier,
            });
        }
    }
    Ok(Layout { class, role })
}

fn compatible(signal: Signal, a: Role, b: Role) -> bool {
    match signal {
        Signal::Direct => true,
        Signal::TwoHop => matches!(
            (a, b),
            (Role::Target, Role::Relay) | (Role::Relay, Role::Target) | (Role::Relay, Role::Carrier) | (Role::Carrier, Role::Relay)
        ),
    }
}

/// Mean and variance of the number of sampled undirected edges, before the
/// isolated-vertex repair.
pub fn expected_edge_stats(cfg: &SbmConfig) -> Result<(f64, f64)> {
    let l = layout(cfg)?;
    let n = l.class.len();
    let (mut mean, mut var) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            if compatible(cfg.signal, l.role[i], l.role[j]) {
                let p = if l.class[i] == l.class[j] { cfg.p_in } else { cfg.p_out };
                mean += p;
                var += p * (1.0 - p);
            }
        }
    }
    Ok((mean, var))
}

pub fn generate_sbm(block_sizes: &[usize], p_in: f64, p_out: f64, feature_dim: usize, signal: Signal, seed: u64) -> Result<Dataset> {
    generate_sbm_with(&SbmConfig::new(block_sizes.to_vec(), p_in, p_out, feature_dim, signal, seed))
}

/// Planted-partition graph with unit weights. Any vertex left without an edge
/// gets one to a random compatible vertex of its own class.
pub fn generate_sbm_with(cfg: &SbmConfig) -> Result<Dataset> {
    for p in [cfg.p_in, cfg.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
    }
    let classes = cfg.block_sizes.len();
    if cfg.feature_dim < classes {
        return Err(Error::InvalidArgument(format!(
            "feature_dim {} must be at least the class count {classes}",
            cfg.feature_dim
        )));
    }
    let fractions_ok = (0.0..1.0).contains(&cfg.train_fraction)
        && (0.0..1.0).contains(&cfg.val_fraction)
        && cfg.train_fraction + cfg.val_fraction < 1.0;
    if !fractions_ok || cfg.noise_std.is_nan() || cfg.noise_std < 0.0 || !cfg.signal_strength.is_finite() {
        return Err(Error::InvalidArgument("invalid split fractions or feature scales".into()));
    }
    let l = layout(cfg)?;
    let n = l.class.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if !compatible(cfg.signal, l.role[i], l.role[j]) {
                continue;
            }
            let p = if l.class[i] == l.class[j] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    for i in 0..n {
        if degree[i] > 0 {
            continue;
        }
        let partners: Vec<usize> = (0..n)
            .filter(|&j| j != i && l.class[j] == l.class[i] && compatible(cfg.signal, l.role[i], l.role[j]))
            .collect();
        let &j = partners
            .choose(&mut rng)
            .ok_or_else(|| Error::InvalidArgument(format!("vertex {i} has no possible neighbor")))?;
        edges.push((i.min(j), i.max(j), 1.0));
        degree[i] += 1;
        degree[j] += 1;
    }
    let graph = build_graph(&edges, n, false)?;

    let mut features = Array2::zeros((n, cfg.feature_dim));
    for i in 0..n {
        for d in 0..cfg.feature_dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[[i, d]] = cfg.noise_std * z;
        }
        let carries = match cfg.signal {
            Signal::Direct => true,
            Signal::TwoHop => l.role[i] == Role::Carrier,
        };
        if carries {
            features[[i, l.class[i]]] += cfg.signal_strength;
        }
    }

    let labels: Vec<i64> = l.class.iter().map(|&c| c as i64).collect();
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..classes {
        let mut candidates: Vec<usize> = (0..n).filter(|&i| l.class[i] == c && l.role[i] == Role::Target).collect();
        candidates.shuffle(&mut rng);
        let m = candidates.len();
        let n_train = ((m as f64 * cfg.train_fraction).round() as usize).max(1);
        let n_val = ((m as f64 * cfg.val_fraction).round() as usize).max(1);
        if n_train + n_val >= m {
            return Err(Error::InvalidArgument(format!("class {c} is too small to split")));
        }
        train.extend_from_slice(&candidates[..n_train]);
        val.extend_from_slice(&candidates[n_train..n_train + n_val]);
        test.extend_from_slice(&candidates[n_train + n_val..]);
    }
    for s in [&mut train, &mut val, &mut test] {
        s.sort_unstable();
    }
    Dataset::new(graph, features, labels, train, val, test, classes)
}
