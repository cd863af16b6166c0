//! Multiresolution scan: a binary tree over the coordinate span whose nodes
//! are tested coarsely and expanded only where the evidence demands it.
//!
//! Each node runs the sampler on its own data and asks whether the joint
//! probability that every tested slot is null falls below what the prune
//! threshold would allow; if not, the whole subtree is discarded. Interior
//! nodes wider than [`NODE_MAX_BINS`] positions pool their members into that
//! many equal sub-bins first, so the cost of testing a node is bounded no
//! matter how much data it covers, while leaves always see raw positions.
//! Nodes within a level run in parallel; every node's RNG seed is derived
//! from the run seed and the node's tree address, so results do not depend
//! on thread scheduling.

use rayon::prelude::*;

use crate::decision::{global_null_log, prune_decision, PruneDecision};
use crate::ebayes::estimate_gamma_hyperparams;
use crate::error::{Error, Result};
use crate::math::mix64;
use crate::model::{CountTrack, Hyperparams, PosteriorSummary};
use crate::sampler::{run_chain, SamplerConfig};

/// Nodes with at most this many positions become leaves.
pub const MIN_NODE_SIZE: usize = 2;
/// Interior nodes pool their members into at most this many sub-bins.
pub const NODE_MAX_BINS: usize = 64;
/// Nodes with at least this many tested slots re-fit the Gamma base measure
/// to their own data; smaller nodes fall back to the caller's values.
pub const EBAYES_MIN_SLOTS: usize = 10;

/// Outcome of testing one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    /// Subtree discarded: the tested slots are jointly compatible with the null.
    Pruned,
    /// Evidence of signal somewhere inside; children were tested.
    Expanded,
    /// Finest resolution reached; slot posteriors are the final ones.
    Leaf,
}

/// One tested node of the scan tree.
#[derive(Debug, Clone)]
pub struct IntervalNode {
    pub level: usize,
    /// Position of the node within its level, root-relative.
    pub index: usize,
    /// Coordinate span [lo, hi) the node covers.
    pub span: (f64, f64),
    /// Indices into the scanned track, in increasing position order.
    pub members: Vec<usize>,
    /// Whether members were pooled into sub-bins before sampling.
    pub aggregated: bool,
    pub status: NodeStatus,
    /// Sampler output on the node's (possibly pooled) data.
    pub summary: PosteriorSummary,
    /// RNG seed the node's chain ran with.
    pub seed: u64,
}

impl IntervalNode {
    /// Number of slots the node's chain actually tested.
    pub fn n_tested(&self) -> usize {
        self.summary.omegas.len()
    }
}

/// Work accounting for one scan.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub sampler_invocations: usize,
    /// Per level: how many nodes were pruned / expanded / left as leaves.
    pub pruned_per_level: Vec<usize>,
    pub expanded_per_level: Vec<usize>,
    pub leaves_per_level: Vec<usize>,
}

/// Everything a scan produces.
#[derive(Debug, Clone)]
pub struct MultiresResult {
    /// Tested nodes in level order, then by index within the level.
    pub nodes: Vec<IntervalNode>,
    /// Final posterior per position: leaf slots carry their own value, and
    /// positions inside pruned subtrees inherit their tested bin's value.
    pub position_omegas: Vec<(i64, f64)>,
    /// Positions whose leaf posterior exceeds the rejection threshold.
    pub flagged: Vec<(i64, f64)>,
    pub stats: ScanStats,
}

struct ProtoNode {
    level: usize,
    index: usize,
    span: (f64, f64),
    members: Vec<usize>,
}

/// Scan the track down to `max_depth` levels, pruning subtrees whose tested
/// slots look jointly null at threshold `hp.threshold`.
///
/// `hp.alpha` and `hp.beta` act as fallbacks: any node with at least
/// [`EBAYES_MIN_SLOTS`] tested slots re-fits them to its own data by moment
/// matching, so coarse pooled bins and raw leaves each get a base measure on
/// their own count scale.
pub fn run_multiscale(
    track: &CountTrack,
    hp: &Hyperparams,
    cfg: &SamplerConfig,
    max_depth: usize,
) -> Result<MultiresResult> {
    cfg.validate()?;
    let positions = track.positions();
    let root_span = (positions[0] as f64, *positions.last().unwrap() as f64 + 1.0);
    let mut frontier = vec![ProtoNode {
        level: 0,
        index: 0,
        span: root_span,
        members: (0..track.len()).collect(),
    }];
    let mut nodes: Vec<IntervalNode> = Vec::new();
    let mut stats = ScanStats {
        sampler_invocations: 0,
        pruned_per_level: vec![0; max_depth + 1],
        expanded_per_level: vec![0; max_depth + 1],
        leaves_per_level: vec![0; max_depth + 1],
    };
    while !frontier.is_empty() {
        let level_nodes: Vec<IntervalNode> = frontier
            .par_iter()
            .map(|proto| process_node(track, hp, cfg, max_depth, proto))
            .collect::<Result<_>>()?;
        stats.sampler_invocations += level_nodes.len();
        let mut next = Vec::new();
        for node in level_nodes {
            match node.status {
                NodeStatus::Pruned => stats.pruned_per_level[node.level] += 1,
                NodeStatus::Expanded => {
                    stats.expanded_per_level[node.level] += 1;
                    let mid = 0.5 * (node.span.0 + node.span.1);
                    let (left, right): (Vec<usize>, Vec<usize>) = node
                        .members
                        .iter()
                        .partition(|&&i| (positions[i] as f64) < mid);
                    for (side, members) in [(0, left), (1, right)] {
                        if members.is_empty() {
                            continue; // nothing to test in this half
                        }
                        let span = if side == 0 { (node.span.0, mid) } else { (mid, node.span.1) };
                        next.push(ProtoNode {
                            level: node.level + 1,
                            index: 2 * node.index + side,
                            span,
                            members,
                        });
                    }
                }
                NodeStatus::Leaf => stats.leaves_per_level[node.level] += 1,
            }
            nodes.push(node);
        }
        frontier = next;
    }
    let (position_omegas, flagged) = collect_outputs(track, &nodes, hp.threshold);
    Ok(MultiresResult { nodes, position_omegas, flagged, stats })
}

/// Exhaustive per-position test: the whole track as a single leaf.
pub fn full_scan(track: &CountTrack, hp: &Hyperparams, cfg: &SamplerConfig) -> Result<MultiresResult> {
    run_multiscale(track, hp, cfg, 0)
}

fn process_node(
    track: &CountTrack,
    hp: &Hyperparams,
    cfg: &SamplerConfig,
    max_depth: usize,
    proto: &ProtoNode,
) -> Result<IntervalNode> {
    let is_leaf = proto.level == max_depth || proto.members.len() <= MIN_NODE_SIZE;
    let (node_track, aggregated) = if !is_leaf && proto.members.len() > NODE_MAX_BINS {
        (aggregate_members(track, &proto.members, proto.span)?, true)
    } else {
        (track.subset(&proto.members)?, false)
    };
    let node_hp = if node_track.len() >= EBAYES_MIN_SLOTS {
        let (alpha, beta) = estimate_gamma_hyperparams(&node_track);
        Hyperparams { alpha, beta, ..*hp }
    } else {
        *hp
    };
    let seed = node_seed(cfg.seed, proto.level, proto.index);
    let summary = run_chain(&node_track, &node_hp, &SamplerConfig { seed, ..*cfg })?;
    let status = if is_leaf {
        NodeStatus::Leaf
    } else {
        match prune_decision(&summary.omegas, hp.threshold)? {
            PruneDecision::Prune => NodeStatus::Pruned,
            PruneDecision::Expand => NodeStatus::Expanded,
        }
    };
    Ok(IntervalNode {
        level: proto.level,
        index: proto.index,
        span: proto.span,
        members: proto.members.clone(),
        aggregated,
        status,
        summary,
        seed,
    })
}

/// Pool a node's members into equal sub-bins of its span; counts and
/// exposures add, empty sub-bins vanish, and positions become bin indices.
fn aggregate_members(track: &CountTrack, members: &[usize], span: (f64, f64)) -> Result<CountTrack> {
    let nbins = NODE_MAX_BINS.min(members.len());
    let width = (span.1 - span.0) / nbins as f64;
    let mut c1 = vec![0u64; nbins];
    let mut c2 = vec![0u64; nbins];
    let mut e1 = vec![0.0f64; nbins];
    let mut e2 = vec![0.0f64; nbins];
    for &i in members {
        let p = track.positions()[i] as f64;
        if p < span.0 || p >= span.1 {
            return Err(Error::InvalidState(format!(
                "position {p} escaped its node span [{}, {})",
                span.0, span.1
            )));
        }
        let b = (((p - span.0) / width) as usize).min(nbins - 1);
        c1[b] += track.counts(0)[i];
        c2[b] += track.counts(1)[i];
        e1[b] += track.exposures(0)[i];
        e2[b] += track.exposures(1)[i];
    }
    let keep: Vec<usize> = (0..nbins).filter(|&b| e1[b] > 0.0).collect();
    CountTrack::with_exposures(
        keep.iter().map(|&b| b as i64).collect(),
        keep.iter().map(|&b| c1[b]).collect(),
        keep.iter().map(|&b| c2[b]).collect(),
        keep.iter().map(|&b| e1[b]).collect(),
        keep.iter().map(|&b| e2[b]).collect(),
    )
}

/// Sub-bin index a member falls into when its node is aggregated; must match
/// [`aggregate_members`] so pruned-bin posteriors map back onto positions.
fn member_bin(position: i64, span: (f64, f64), n_members: usize) -> usize {
    let nbins = NODE_MAX_BINS.min(n_members);
    let width = (span.1 - span.0) / nbins as f64;
    (((position as f64 - span.0) / width) as usize).min(nbins - 1)
}

/// (position, posterior) pairs in track order.
type Scored = Vec<(i64, f64)>;

fn collect_outputs(track: &CountTrack, nodes: &[IntervalNode], xi: f64) -> (Scored, Scored) {
    let mut omega = vec![f64::NAN; track.len()];
    let mut is_leaf_slot = vec![false; track.len()];
    for node in nodes {
        match node.status {
            NodeStatus::Expanded => {}
            NodeStatus::Leaf => {
                for (slot, &mem) in node.members.iter().enumerate() {
                    omega[mem] = node.summary.omegas[slot];
                    is_leaf_slot[mem] = true;
                }
            }
            NodeStatus::Pruned => {
                if node.aggregated {
                    // bin index -> slot index among the non-empty bins
                    let mut slot_of_bin =
                        std::collections::HashMap::with_capacity(node.n_tested());
                    let mut next = 0usize;
                    for &mem in &node.members {
                        let b = member_bin(track.positions()[mem], node.span, node.members.len());
                        let slot = *slot_of_bin.entry(b).or_insert_with(|| {
                            let s = next;
                            next += 1;
                            s
                        });
                        omega[mem] = node.summary.omegas[slot];
                    }
                } else {
                    for (slot, &mem) in node.members.iter().enumerate() {
                        omega[mem] = node.summary.omegas[slot];
                    }
                }
            }
        }
    }
    let position_omegas: Vec<(i64, f64)> = track
        .positions()
        .iter()
        .zip(&omega)
        .map(|(&p, &w)| (p, w))
        .collect();
    let flagged = position_omegas
        .iter()
        .zip(&is_leaf_slot)
        .filter(|((_, w), &leaf)| leaf && *w > xi)
        .map(|(&pw, _)| pw)
        .collect();
    (position_omegas, flagged)
}

/// Seed for a node's chain: a mix of the run seed and the tree address,
/// stable across platforms and thread counts.
fn node_seed(master: u64, level: usize, index: usize) -> u64 {
    mix64(mix64(master ^ mix64(level as u64 + 1)) ^ index as u64)
}

/// Probability that every tested slot of a node is null; convenience for
/// reporting.
pub fn node_null_probability(node: &IntervalNode) -> Result<f64> {
    Ok(global_null_log(&node.summary.omegas)?.exp())
}
