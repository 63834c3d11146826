//! Deterministic discrete-event simulation of one transfer end to end:
//! split, combine, encrypt, shuffle, select disjoint paths, transmit hop by
//! hop through carrier-sensed media, intercept, reassemble, report.
//!
//! Time is integer units with no wall-clock meaning. One run is strictly
//! single-threaded and fully determined by the seed: events are processed
//! in `(time, sequence)` order and every random draw comes from a
//! substream of the transfer seed.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, chain_coefficient_rows, CipherKey, CodecError};
use crate::leakage::{
    self, AdversaryMode, AdversaryModel, ComboAssignment, InterceptRecord, LeakageResult,
    McEstimate,
};
use crate::mac::{BackoffPolicy, MacError, MediumState};
use crate::rng::Keystream;
use crate::routing::{self, RoutingError};
use crate::topology::{NodeId, Topology};

/// Substream tags carving per-purpose generators out of one transfer seed.
const STREAM_SHUFFLE: u64 = 1;
const STREAM_ADVERSARY: u64 = 2;
const STREAM_MAC: u64 = 3;
const STREAM_TRIAL_BASE: u64 = 1 << 32;

/// How combinations are spread over the discovered paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchMode {
    /// Every combination rides the single cheapest path.
    Unipath,
    /// Round-robin over the `m` cheapest disjoint paths (clamped to the
    /// number that exist).
    Multipath(usize),
}

impl DispatchMode {
    pub fn label(self) -> &'static str {
        match self {
            DispatchMode::Unipath => "unipath",
            DispatchMode::Multipath(_) => "multipath",
        }
    }

    fn path_budget(self) -> usize {
        match self {
            DispatchMode::Unipath => 1,
            DispatchMode::Multipath(m) => m.max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferConfig {
    pub part_count: u16,
    pub mode: DispatchMode,
    pub key: CipherKey,
    pub seed: u64,
    pub msg_id: u32,
    pub adversary: AdversaryModel,
    pub mac: BackoffPolicy,
    /// Collect per-hop trace events.
    pub record_trace: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            part_count: 4,
            mode: DispatchMode::Multipath(usize::MAX),
            key: CipherKey(0),
            seed: 0,
            msg_id: 1,
            adversary: AdversaryModel::none(),
            mac: BackoffPolicy::default(),
            record_trace: false,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// One path of the dispatch set with its security cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub nodes: Vec<String>,
    pub cost: f64,
}

/// Everything observable about one simulated transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: String,
    pub seed: String,
    pub msg_id: u32,
    pub part_count: u16,
    pub delivered: bool,
    pub reconstructed_ok: bool,
    pub completion_time: u64,
    pub frames_sent: u16,
    pub frames_delivered: u16,
    pub frames_intercepted: u16,
    pub intercepted: InterceptRecord,
    pub leakage: LeakageResult,
    pub paths: Vec<PathReport>,
    /// 1-based path number carrying each combination, position 0 = combo 1.
    pub combo_assignment: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceKind {
    HopStart,
    HopEnd,
    Arrival,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::HopStart => "HOP_START",
            TraceKind::HopEnd => "HOP_END",
            TraceKind::Arrival => "ARRIVAL",
        }
    }
}

/// One line of the event trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: u64,
    pub kind: TraceKind,
    pub msg_id: u32,
    pub combo_index: u16,
    pub from: NodeId,
    pub to: NodeId,
    pub medium: String,
}

impl TraceEvent {
    /// Tab-separated line: time, kind, msg_id, combo_index, hop, medium.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}->{}\t{}",
            self.time,
            self.kind.as_str(),
            self.msg_id,
            self.combo_index,
            self.from,
            self.to,
            self.medium
        )
    }
}

/// Report plus the (optionally empty) event trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRun {
    pub report: SimReport,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    TryHop,
    HopStart,
    HopEnd,
    Arrival,
}

/// Heap entries order by `(time, seq)`; `seq` is unique per event.
#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    seq: u64,
    phase: Phase,
    frame: usize,
    hop: usize,
}

/// Run one transfer and report delivery, interception and leakage.
///
/// Channel exhaustion (`ChannelBusy`) is a delivery failure in the report,
/// not an error; errors are reserved for impossible requests (no path, bad
/// part count).
pub fn run_transfer(
    topo: &Topology,
    src: &NodeId,
    dst: &NodeId,
    msg: &[u8],
    cfg: &TransferConfig,
) -> Result<TransferRun, EngineError> {
    // Sender pipeline.
    let parts = codec::pad_and_split(msg, cfg.part_count)?;
    let combos = codec::chain_combine(&parts);
    let rows = chain_coefficient_rows(combos.part_count());
    let frames = codec::encrypt_combos(&combos, cfg.key, cfg.msg_id)?;
    let shuffle_seed = Keystream::new(cfg.seed, STREAM_SHUFFLE).next_u64();
    let frames = codec::shuffle_frames(frames, shuffle_seed);

    // Path selection and round-robin assignment in selection order.
    let discovered = routing::max_disjoint_paths(topo, src, dst, usize::MAX)?;
    let probs = topo.compromise_probs();
    let selected = routing::select_paths(&discovered, cfg.mode.path_budget(), &probs)?;
    let path_reports: Vec<PathReport> = selected
        .paths
        .iter()
        .map(|p| {
            Ok(PathReport {
                nodes: p.nodes().iter().map(|n| n.as_str().to_owned()).collect(),
                cost: routing::security_cost(p, &probs)?,
            })
        })
        .collect::<Result<_, RoutingError>>()?;
    let assignment = ComboAssignment::round_robin(selected.paths.clone(), combos.part_count());

    // The adversary is static for the whole transfer: fixed set as given,
    // independent model sampled once from the seed.
    let compromised: BTreeSet<NodeId> = match &cfg.adversary.mode {
        AdversaryMode::Fixed(set) => set.clone(),
        AdversaryMode::Independent(node_probs) => {
            leakage::sample_compromised(node_probs, &mut Keystream::new(cfg.seed, STREAM_ADVERSARY))
        }
    };
    let endpoints_trusted = cfg.adversary.endpoints_trusted;

    // Event loop state.
    let mut media: BTreeMap<String, MediumState> = BTreeMap::new();
    let mut mac_rng = Keystream::new(cfg.seed, STREAM_MAC);
    let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
    let mut next_seq = 0u64;
    let mut trace = Vec::new();
    let mut intercept = InterceptRecord::default();
    let mut arrived = vec![false; frames.len()];
    let mut failed = vec![false; frames.len()];
    let mut completion_time = 0u64;

    // Frames leave the source in shuffled order; the source itself only
    // leaks when endpoints are untrusted.
    for (i, frame) in frames.iter().enumerate() {
        if !endpoints_trusted && compromised.contains(src) {
            intercept.insert(frame.combo_index);
        }
        heap.push(Reverse(Event {
            time: 0,
            seq: next_seq,
            phase: Phase::TryHop,
            frame: i,
            hop: 0,
        }));
        next_seq += 1;
    }

    while let Some(Reverse(event)) = heap.pop() {
        completion_time = completion_time.max(event.time);
        let frame = &frames[event.frame];
        let path = assignment.path_of(frame.combo_index);
        let (from, to) = (&path.nodes()[event.hop], &path.nodes()[event.hop + 1]);
        let link = topo
            .link_between(from, to)
            .expect("paths follow topology links");
        match event.phase {
            Phase::TryHop => {
                let medium = media
                    .entry(link.medium.clone())
                    .or_insert_with(|| MediumState::new(link.medium.clone()));
                match medium.acquire(&cfg.mac, event.time, link.latency, &mut mac_rng) {
                    Ok(start) => {
                        heap.push(Reverse(Event {
                            time: start,
                            seq: next_seq,
                            phase: Phase::HopStart,
                            frame: event.frame,
                            hop: event.hop,
                        }));
                        next_seq += 1;
                    }
                    Err(MacError::ChannelBusy { .. }) => failed[event.frame] = true,
                }
            }
            Phase::HopStart => {
                if cfg.record_trace {
                    trace.push(TraceEvent {
                        time: event.time,
                        kind: TraceKind::HopStart,
                        msg_id: frame.msg_id,
                        combo_index: frame.combo_index,
                        from: from.clone(),
                        to: to.clone(),
                        medium: link.medium.clone(),
                    });
                }
                heap.push(Reverse(Event {
                    time: event.time + link.latency,
                    seq: next_seq,
                    phase: Phase::HopEnd,
                    frame: event.frame,
                    hop: event.hop,
                }));
                next_seq += 1;
            }
            Phase::HopEnd => {
                if cfg.record_trace {
                    trace.push(TraceEvent {
                        time: event.time,
                        kind: TraceKind::HopEnd,
                        msg_id: frame.msg_id,
                        combo_index: frame.combo_index,
                        from: from.clone(),
                        to: to.clone(),
                        medium: link.medium.clone(),
                    });
                }
                let is_last = event.hop + 2 == path.nodes().len();
                // The receiving node now holds the frame.
                if compromised.contains(to) && (!is_last || !endpoints_trusted) {
                    intercept.insert(frame.combo_index);
                }
                let phase = if is_last { Phase::Arrival } else { Phase::TryHop };
                if is_last {
                    arrived[event.frame] = true;
                }
                heap.push(Reverse(Event {
                    time: event.time,
                    seq: next_seq,
                    phase,
                    frame: event.frame,
                    hop: if is_last { event.hop } else { event.hop + 1 },
                }));
                next_seq += 1;
            }
            Phase::Arrival => {
                if cfg.record_trace {
                    trace.push(TraceEvent {
                        time: event.time,
                        kind: TraceKind::Arrival,
                        msg_id: frame.msg_id,
                        combo_index: frame.combo_index,
                        from: from.clone(),
                        to: to.clone(),
                        medium: link.medium.clone(),
                    });
                }
            }
        }
    }

    // Receiver pipeline: reorder by combination index, decrypt, unchain.
    let mut received: Vec<codec::Frame> = frames
        .iter()
        .zip(&arrived)
        .filter(|(_, &ok)| ok)
        .map(|(f, _)| f.clone())
        .collect();
    received.sort_by_key(|f| f.combo_index);
    let reconstructed_ok = codec::decrypt_frames(&received, cfg.key)
        .and_then(|set| codec::chain_reconstruct(&set))
        .and_then(|parts| codec::unsplit(&parts))
        .map(|bytes| bytes == msg)
        .unwrap_or(false);

    let delivered = arrived.iter().all(|&ok| ok);
    let leakage_result = if cfg.adversary.cipher_broken {
        leakage::recoverable_parts(&intercept, &rows)
    } else {
        LeakageResult::nothing()
    };

    let report = SimReport {
        mode: cfg.mode.label().to_owned(),
        seed: format_seed(cfg.seed),
        msg_id: cfg.msg_id,
        part_count: cfg.part_count,
        delivered,
        reconstructed_ok,
        completion_time,
        frames_sent: frames.len() as u16,
        frames_delivered: arrived.iter().filter(|&&ok| ok).count() as u16,
        frames_intercepted: intercept.len() as u16,
        intercepted: intercept,
        leakage: leakage_result,
        paths: path_reports,
        combo_assignment: (1..=assignment.combo_count())
            .map(|c| assignment.path_index_of(c) as u16 + 1)
            .collect(),
    };
    Ok(TransferRun { report, trace })
}

pub fn format_seed(seed: u64) -> String {
    format!("{seed:#018x}")
}

/// Seed of batch trial `trial`, derived so trials are independent and may
/// be evaluated in any order.
pub fn derive_trial_seed(seed: u64, trial: u64) -> u64 {
    Keystream::new(seed, STREAM_TRIAL_BASE | trial).next_u64()
}

/// Aggregate outcome of repeated transfers under re-derived seeds.
///
/// `reconstruction_rate` is the fraction of trials in which the adversary
/// could rebuild the whole message; under an independent adversary it
/// converges to [`leakage::exact_reconstruction_prob`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub trials: u64,
    pub mode: String,
    pub seed: String,
    pub delivered_trials: u64,
    pub intercepted_trials: u64,
    pub adversary_reconstructions: u64,
    pub delivery_rate: f64,
    pub interception_rate: f64,
    pub reconstruction_rate: f64,
    pub mean_completion_time: f64,
}

/// Run `trials` transfers with per-trial derived seeds and message ids
/// `1..=trials`, aggregating delivery, interception and adversary
/// reconstruction rates.
pub fn run_batch(
    topo: &Topology,
    src: &NodeId,
    dst: &NodeId,
    msg: &[u8],
    cfg: &TransferConfig,
    trials: u64,
    seed: u64,
) -> Result<BatchReport, EngineError> {
    assert!(trials >= 1, "at least one trial required");
    let mut delivered = 0u64;
    let mut intercepted = 0u64;
    let mut reconstructions = 0u64;
    let mut completion_sum = 0u128;
    for trial in 0..trials {
        let trial_cfg = TransferConfig {
            seed: derive_trial_seed(seed, trial),
            msg_id: (trial as u32).wrapping_add(1),
            record_trace: false,
            ..cfg.clone()
        };
        let run = run_transfer(topo, src, dst, msg, &trial_cfg)?;
        delivered += run.report.delivered as u64;
        intercepted += !run.report.intercepted.is_empty() as u64;
        reconstructions += run.report.leakage.full_reconstruction as u64;
        completion_sum += run.report.completion_time as u128;
    }
    Ok(BatchReport {
        trials,
        mode: cfg.mode.label().to_owned(),
        seed: format_seed(seed),
        delivered_trials: delivered,
        intercepted_trials: intercepted,
        adversary_reconstructions: reconstructions,
        delivery_rate: delivered as f64 / trials as f64,
        interception_rate: intercepted as f64 / trials as f64,
        reconstruction_rate: reconstructions as f64 / trials as f64,
        mean_completion_time: (completion_sum / trials as u128) as f64
            + (completion_sum % trials as u128) as f64 / trials as f64,
    })
}

/// Reconstruction-probability analysis of a dispatch, exact when the
/// relevant relay count permits enumeration, Monte Carlo otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub method: String,
    pub mode: String,
    pub part_count: u16,
    pub seed: String,
    pub reconstruction_prob: f64,
    /// Monte Carlo only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    pub paths: Vec<PathReport>,
}

/// Analyze the reconstruction probability of a transfer under the
/// independent adversary given by the topology's per-node probabilities.
///
/// Uses the same path selection and assignment as [`run_transfer`], then
/// exact subset enumeration when at most [`leakage::MAX_EXACT_RELAYS`]
/// relevant relays exist, otherwise seeded Monte Carlo with `trials`
/// samples.
pub fn run_analysis(
    topo: &Topology,
    src: &NodeId,
    dst: &NodeId,
    cfg: &TransferConfig,
    trials: u64,
) -> Result<AnalyzeReport, EngineError> {
    let discovered = routing::max_disjoint_paths(topo, src, dst, usize::MAX)?;
    let probs = topo.compromise_probs();
    let selected = routing::select_paths(&discovered, cfg.mode.path_budget(), &probs)?;
    let path_reports: Vec<PathReport> = selected
        .paths
        .iter()
        .map(|p| {
            Ok(PathReport {
                nodes: p.nodes().iter().map(|n| n.as_str().to_owned()).collect(),
                cost: routing::security_cost(p, &probs)?,
            })
        })
        .collect::<Result<_, RoutingError>>()?;
    let assignment = ComboAssignment::round_robin(selected.paths.clone(), cfg.part_count);
    let rows = chain_coefficient_rows(cfg.part_count);
    let endpoints_trusted = cfg.adversary.endpoints_trusted;

    let exact = match leakage::exact_reconstruction_prob(&assignment, &probs, &rows, endpoints_trusted) {
        Ok(p) => Some(p),
        Err(leakage::LeakageError::TooManyRelays(_)) => None,
        Err(other) => panic!("topology probabilities cover all nodes: {other}"),
    };
    let report = match exact {
        Some(p) => AnalyzeReport {
            method: "exact".to_owned(),
            mode: cfg.mode.label().to_owned(),
            part_count: cfg.part_count,
            seed: format_seed(cfg.seed),
            reconstruction_prob: p,
            stderr: None,
            trials: None,
            paths: path_reports,
        },
        None => {
            let mc: McEstimate = leakage::monte_carlo_reconstruction_prob(
                &assignment,
                &probs,
                &rows,
                endpoints_trusted,
                trials,
                cfg.seed,
            );
            AnalyzeReport {
                method: "monte_carlo".to_owned(),
                mode: cfg.mode.label().to_owned(),
                part_count: cfg.part_count,
                seed: format_seed(cfg.seed),
                reconstruction_prob: mc.estimate,
                stderr: Some(mc.stderr),
                trials: Some(mc.trials),
                paths: path_reports,
            }
        }
    };
    Ok(report)
}
