//! Eavesdropper analysis: what intercepted combinations reveal, and how
//! likely full message reconstruction is.
//!
//! A compromised interior node observes every combination routed through
//! it. With the cipher assumed broken (the conservative default), the
//! adversary holds a set of GF(2) linear combinations of the message parts;
//! part `j` is recoverable exactly when the unit vector `e_j` lies in the
//! row span of the intercepted coefficient rows. Reconstruction probability
//! under independent per-node compromise is computed exactly by enumerating
//! compromise subsets of the nodes that matter, or estimated by seeded
//! Monte Carlo when there are too many.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{Basis, BitRow};
use crate::routing::Path;
use crate::rng::Keystream;
use crate::topology::NodeId;

/// Which nodes the adversary controls.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryMode {
    /// A known compromised set.
    Fixed(BTreeSet<NodeId>),
    /// Each node independently compromised with its own probability.
    Independent(BTreeMap<NodeId, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryModel {
    pub mode: AdversaryMode,
    /// Assume intercepted payloads are readable. The confidentiality claim
    /// rests on path diversity, not cipher strength, so this defaults on.
    pub cipher_broken: bool,
    /// Source and destination are never compromised (default), so only
    /// path interiors leak.
    pub endpoints_trusted: bool,
}

impl AdversaryModel {
    pub fn fixed(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        Self {
            mode: AdversaryMode::Fixed(nodes.into_iter().collect()),
            cipher_broken: true,
            endpoints_trusted: true,
        }
    }

    /// No adversary at all.
    pub fn none() -> Self {
        Self::fixed([])
    }

    pub fn independent(probs: BTreeMap<NodeId, f64>) -> Self {
        Self {
            mode: AdversaryMode::Independent(probs),
            cipher_broken: true,
            endpoints_trusted: true,
        }
    }
}

/// Which combination indices (1-based) the adversary observed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterceptRecord {
    intercepted: BTreeSet<u16>,
}

impl InterceptRecord {
    pub fn new(intercepted: impl IntoIterator<Item = u16>) -> Self {
        Self {
            intercepted: intercepted.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, index: u16) {
        self.intercepted.insert(index);
    }

    pub fn contains(&self, index: u16) -> bool {
        self.intercepted.contains(&index)
    }

    pub fn indices(&self) -> impl Iterator<Item = u16> + '_ {
        self.intercepted.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.intercepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intercepted.is_empty()
    }
}

/// Outcome of the span analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageResult {
    /// 1-based part indices the adversary can compute.
    pub recoverable_parts: BTreeSet<u16>,
    /// True exactly when every part is recoverable.
    pub full_reconstruction: bool,
}

impl LeakageResult {
    /// The empty result: nothing recoverable (e.g. cipher not broken).
    pub fn nothing() -> Self {
        Self {
            recoverable_parts: BTreeSet::new(),
            full_reconstruction: false,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LeakageError {
    #[error("{0} relevant relays exceed the exact enumeration limit of {MAX_EXACT_RELAYS}")]
    TooManyRelays(usize),
    #[error("no compromise probability for {0}")]
    MissingProbability(NodeId),
}

/// Largest relevant-node count enumerated exactly (2^20 subsets).
pub const MAX_EXACT_RELAYS: usize = 20;

/// Which parts the intercepted rows determine, by Gaussian elimination
/// over GF(2).
pub fn recoverable_parts(record: &InterceptRecord, rows: &[BitRow]) -> LeakageResult {
    let n = rows.len();
    let mut basis = Basis::new();
    for index in record.indices() {
        debug_assert!(1 <= index && index as usize <= n);
        basis.insert(rows[index as usize - 1].clone());
    }
    let recoverable: BTreeSet<u16> = (0..n)
        .filter(|&j| basis.contains(&BitRow::unit(n, j)))
        .map(|j| j as u16 + 1)
        .collect();
    LeakageResult {
        full_reconstruction: recoverable.len() == n,
        recoverable_parts: recoverable,
    }
}

/// Assignment of combination indices to dispatch paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComboAssignment {
    paths: Vec<Path>,
    /// Index into `paths` for each combination, position 0 = combo 1.
    combo_path: Vec<usize>,
}

impl ComboAssignment {
    /// Spread `combos` over the paths round-robin in order: combination `i`
    /// rides path `(i - 1) mod |paths|`. With a single path this is the
    /// all-on-one-path dispatch.
    pub fn round_robin(paths: Vec<Path>, combos: u16) -> Self {
        assert!(!paths.is_empty(), "assignment needs at least one path");
        assert!(combos >= 1);
        let count = paths.len();
        Self {
            paths,
            combo_path: (0..combos as usize).map(|i| i % count).collect(),
        }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn combo_count(&self) -> u16 {
        self.combo_path.len() as u16
    }

    pub fn path_index_of(&self, combo: u16) -> usize {
        self.combo_path[combo as usize - 1]
    }

    pub fn path_of(&self, combo: u16) -> &Path {
        &self.paths[self.path_index_of(combo)]
    }

    /// Nodes of the path of `combo` that can observe it: the interior, or
    /// the whole path when endpoints are not trusted.
    fn observers(&self, combo: u16, endpoints_trusted: bool) -> &[NodeId] {
        let path = self.path_of(combo);
        if endpoints_trusted {
            path.interior()
        } else {
            path.nodes()
        }
    }
}

/// Which combinations a fixed compromised set observes: combination `i` is
/// intercepted when its path's interior (endpoints included only when
/// untrusted) meets the set.
pub fn interception_of(
    assignment: &ComboAssignment,
    compromised: &BTreeSet<NodeId>,
    endpoints_trusted: bool,
) -> InterceptRecord {
    let mut record = InterceptRecord::default();
    for combo in 1..=assignment.combo_count() {
        if assignment
            .observers(combo, endpoints_trusted)
            .iter()
            .any(|v| compromised.contains(v))
        {
            record.insert(combo);
        }
    }
    record
}

/// Exact probability that an independent adversary reconstructs every part.
///
/// Sums over all `2^R` compromise subsets of the relevant nodes (those
/// sitting on an assigned path where they can observe traffic), weighting
/// each subset by its probability and counting it when the intercepted
/// rows span every unit vector. Compensated summation keeps the
/// accumulation error below 1e-12 at this scale.
pub fn exact_reconstruction_prob(
    assignment: &ComboAssignment,
    probs: &BTreeMap<NodeId, f64>,
    rows: &[BitRow],
    endpoints_trusted: bool,
) -> Result<f64, LeakageError> {
    let analysis = InterceptionAnalysis::new(assignment, rows, endpoints_trusted);
    let relevant = analysis.relevant_count();
    if relevant > MAX_EXACT_RELAYS {
        return Err(LeakageError::TooManyRelays(relevant));
    }
    let node_probs = analysis.relevant_probs(probs)?;

    let mut memo = HashMap::new();
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for subset in 0u64..1 << relevant {
        if !analysis.full_reconstruction(subset, &mut memo) {
            continue;
        }
        let mut weight = 1.0;
        for (bit, p) in node_probs.iter().enumerate() {
            weight *= if subset >> bit & 1 == 1 { *p } else { 1.0 - p };
        }
        // Kahan step.
        let y = weight - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    Ok(sum)
}

/// A seeded Monte Carlo estimate of the reconstruction probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub successes: u64,
}

/// Estimate the reconstruction probability by sampling node compromise.
///
/// Trial `i` draws one uniform per entry of `probs` (in key order) from
/// `Keystream::new(seed, i)`, so the estimate is reproducible and trials
/// could be evaluated in any order.
pub fn monte_carlo_reconstruction_prob(
    assignment: &ComboAssignment,
    probs: &BTreeMap<NodeId, f64>,
    rows: &[BitRow],
    endpoints_trusted: bool,
    trials: u64,
    seed: u64,
) -> McEstimate {
    assert!(trials >= 1, "at least one trial required");
    let analysis = InterceptionAnalysis::new(assignment, rows, endpoints_trusted);
    // Bit position of each probs entry among the relevant nodes, when the
    // node can observe traffic at all.
    let bit_of: Vec<Option<usize>> = probs
        .keys()
        .map(|id| analysis.relevant_bit(id))
        .collect();

    let mut memo = HashMap::new();
    let mut successes = 0u64;
    for trial in 0..trials {
        let mut gen = Keystream::new(seed, trial);
        let mut subset = 0u64;
        for (&bit, p) in bit_of.iter().zip(probs.values()) {
            let hit = gen.next_f64() < *p;
            if let (true, Some(bit)) = (hit, bit) {
                subset |= 1 << bit;
            }
        }
        if analysis.full_reconstruction(subset, &mut memo) {
            successes += 1;
        }
    }
    let estimate = successes as f64 / trials as f64;
    McEstimate {
        estimate,
        stderr: (estimate * (1.0 - estimate) / trials as f64).sqrt(),
        trials,
        successes,
    }
}

/// Sample a compromised set: one uniform per entry in key order.
pub fn sample_compromised(
    probs: &BTreeMap<NodeId, f64>,
    gen: &mut Keystream,
) -> BTreeSet<NodeId> {
    probs
        .iter()
        .filter(|(_, &p)| gen.next_f64() < p)
        .map(|(id, _)| id.clone())
        .collect()
}

/// Shared precomputation: the relevant nodes (deduplicated observers across
/// all combos, in id order) and one bitmask per combination marking which
/// relevant nodes see it.
struct InterceptionAnalysis<'a> {
    rows: &'a [BitRow],
    relevant: Vec<NodeId>,
    combo_masks: Vec<u64>,
}

impl<'a> InterceptionAnalysis<'a> {
    fn new(assignment: &ComboAssignment, rows: &'a [BitRow], endpoints_trusted: bool) -> Self {
        let relevant_set: BTreeSet<NodeId> = (1..=assignment.combo_count())
            .flat_map(|c| assignment.observers(c, endpoints_trusted).iter().cloned())
            .collect();
        let relevant: Vec<NodeId> = relevant_set.into_iter().collect();
        assert!(
            relevant.len() <= 64,
            "more than 64 distinct relay nodes on assigned paths"
        );
        let combo_masks = (1..=assignment.combo_count())
            .map(|c| {
                assignment
                    .observers(c, endpoints_trusted)
                    .iter()
                    .map(|v| 1u64 << relevant.binary_search(v).expect("observer is relevant"))
                    .fold(0, |acc, bit| acc | bit)
            })
            .collect();
        Self {
            rows,
            relevant,
            combo_masks,
        }
    }

    fn relevant_count(&self) -> usize {
        self.relevant.len()
    }

    fn relevant_bit(&self, id: &NodeId) -> Option<usize> {
        self.relevant.binary_search(id).ok()
    }

    fn relevant_probs(&self, probs: &BTreeMap<NodeId, f64>) -> Result<Vec<f64>, LeakageError> {
        self.relevant
            .iter()
            .map(|id| {
                probs
                    .get(id)
                    .copied()
                    .ok_or_else(|| LeakageError::MissingProbability(id.clone()))
            })
            .collect()
    }

    /// Does the compromise subset (bitmask over relevant nodes) yield full
    /// reconstruction? Memoized on the intercepted-combination set.
    fn full_reconstruction(&self, subset: u64, memo: &mut HashMap<Vec<u64>, bool>) -> bool {
        let mut intercepted_words = vec![0u64; self.combo_masks.len().div_ceil(64)];
        for (i, mask) in self.combo_masks.iter().enumerate() {
            if mask & subset != 0 {
                intercepted_words[i / 64] |= 1 << (i % 64);
            }
        }
        if let Some(&known) = memo.get(&intercepted_words) {
            return known;
        }
        let record = InterceptRecord::new(
            (0..self.combo_masks.len())
                .filter(|i| intercepted_words[i / 64] >> (i % 64) & 1 == 1)
                .map(|i| i as u16 + 1),
        );
        let full = recoverable_parts(&record, self.rows).full_reconstruction;
        memo.insert(intercepted_words, full);
        full
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::chain_coefficient_rows;

    fn chain_record(n: u16, intercepted: &[u16]) -> LeakageResult {
        recoverable_parts(
            &InterceptRecord::new(intercepted.iter().copied()),
            &chain_coefficient_rows(n),
        )
    }

    #[test]
    fn first_combination_reveals_first_part() {
        let result = chain_record(3, &[1]);
        assert_eq!(result.recoverable_parts, BTreeSet::from([1]));
        assert!(!result.full_reconstruction);
    }

    #[test]
    fn middle_combination_alone_reveals_nothing() {
        assert!(chain_record(3, &[2]).recoverable_parts.is_empty());
    }

    // The span of rows 2 and 3 is {0, e1^e2, e2^e3, e1^e3}: no unit vector,
    // so neither part is determined despite holding two of three rows.
    #[test]
    fn tail_pair_reveals_nothing() {
        assert!(chain_record(3, &[2, 3]).recoverable_parts.is_empty());
    }

    #[test]
    fn all_combinations_reveal_everything() {
        let result = chain_record(5, &[1, 2, 3, 4, 5]);
        assert!(result.full_reconstruction);
        assert_eq!(result.recoverable_parts.len(), 5);
    }

    #[test]
    fn interception_is_monotone_in_the_intercept_set() {
        for n in 2..=6u16 {
            let rows = chain_coefficient_rows(n);
            for small in 0u32..1 << n {
                let small_parts = recoverable_parts(&record_from_mask(small, n), &rows);
                for extra in 0..n {
                    let bigger = small | (1 << extra);
                    let big_parts = recoverable_parts(&record_from_mask(bigger, n), &rows);
                    assert!(
                        big_parts
                            .recoverable_parts
                            .is_superset(&small_parts.recoverable_parts),
                        "n={n} small={small:b} bigger={bigger:b}"
                    );
                }
            }
        }
    }

    fn record_from_mask(mask: u32, n: u16) -> InterceptRecord {
        InterceptRecord::new((1..=n).filter(|i| mask >> (i - 1) & 1 == 1))
    }

    fn two_disjoint_paths() -> ComboAssignment {
        ComboAssignment::round_robin(
            vec![
                Path::new(vec!["s".into(), "a".into(), "t".into()]),
                Path::new(vec!["s".into(), "b".into(), "t".into()]),
            ],
            2,
        )
    }

    #[test]
    fn interception_of_fixed_sets() {
        let assignment = two_disjoint_paths();
        let holding_a = interception_of(&assignment, &BTreeSet::from(["a".into()]), true);
        assert_eq!(holding_a, InterceptRecord::new([1]));

        let nothing = interception_of(&assignment, &BTreeSet::new(), true);
        assert!(nothing.is_empty());

        let unipath = ComboAssignment::round_robin(
            vec![Path::new(vec!["s".into(), "a".into(), "t".into()])],
            4,
        );
        let all = interception_of(&unipath, &BTreeSet::from(["a".into()]), true);
        assert_eq!(all, InterceptRecord::new([1, 2, 3, 4]));
    }

    #[test]
    fn trusted_endpoints_do_not_leak() {
        let assignment = two_disjoint_paths();
        let holding_src = interception_of(&assignment, &BTreeSet::from(["s".into()]), true);
        assert!(holding_src.is_empty());
        let untrusted = interception_of(&assignment, &BTreeSet::from(["s".into()]), false);
        assert_eq!(untrusted, InterceptRecord::new([1, 2]));
    }

    fn probs(entries: &[(&str, f64)]) -> BTreeMap<NodeId, f64> {
        entries
            .iter()
            .map(|(id, p)| (NodeId::from(*id), *p))
            .collect()
    }

    #[test]
    fn exact_probability_fixtures() {
        let rows = chain_coefficient_rows(2);

        // all combos through one relay: reconstruction iff that relay falls
        let unipath = ComboAssignment::round_robin(
            vec![Path::new(vec!["s".into(), "a".into(), "t".into()])],
            2,
        );
        let p = exact_reconstruction_prob(
            &unipath,
            &probs(&[("a", 0.5), ("s", 0.0), ("t", 0.0)]),
            &rows,
            true,
        )
        .unwrap();
        assert!((p - 0.5).abs() < 1e-12);

        // one combo per disjoint relay: both must fall
        let spread = two_disjoint_paths();
        let p = exact_reconstruction_prob(
            &spread,
            &probs(&[("a", 0.5), ("b", 0.5)]),
            &rows,
            true,
        )
        .unwrap();
        assert!((p - 0.25).abs() < 1e-12);

        let p = exact_reconstruction_prob(
            &spread,
            &probs(&[("a", 0.3), ("b", 0.2)]),
            &rows,
            true,
        )
        .unwrap();
        assert!((p - 0.06).abs() < 1e-12);
    }

    #[test]
    fn untrusted_endpoints_raise_the_exact_probability() {
        let rows = chain_coefficient_rows(2);
        let assignment = two_disjoint_paths();
        let node_probs = probs(&[("a", 0.0), ("b", 0.0), ("s", 0.25), ("t", 0.0)]);
        let trusted =
            exact_reconstruction_prob(&assignment, &node_probs, &rows, true).unwrap();
        assert_eq!(trusted, 0.0);
        let untrusted =
            exact_reconstruction_prob(&assignment, &node_probs, &rows, false).unwrap();
        assert!((untrusted - 0.25).abs() < 1e-12);
    }

    #[test]
    fn relay_limit_enforced() {
        let interior: Vec<NodeId> = (0..21).map(|i| NodeId::new(format!("r{i:02}"))).collect();
        let mut nodes = vec![NodeId::from("s")];
        nodes.extend(interior);
        nodes.push("t".into());
        let assignment = ComboAssignment::round_robin(vec![Path::new(nodes)], 2);
        let result = exact_reconstruction_prob(
            &assignment,
            &BTreeMap::new(),
            &chain_coefficient_rows(2),
            true,
        );
        assert_eq!(result, Err(LeakageError::TooManyRelays(21)));
    }

    #[test]
    fn monte_carlo_degenerate_probabilities() {
        let rows = chain_coefficient_rows(2);
        let assignment = two_disjoint_paths();
        let zero = monte_carlo_reconstruction_prob(
            &assignment,
            &probs(&[("a", 0.0), ("b", 0.0)]),
            &rows,
            true,
            2000,
            9,
        );
        assert_eq!(zero.estimate, 0.0);

        let unipath = ComboAssignment::round_robin(
            vec![Path::new(vec!["s".into(), "a".into(), "t".into()])],
            2,
        );
        let one = monte_carlo_reconstruction_prob(
            &unipath,
            &probs(&[("a", 1.0)]),
            &rows,
            true,
            2000,
            9,
        );
        assert_eq!(one.estimate, 1.0);
        assert_eq!(one.stderr, 0.0);
    }

    #[test]
    fn monte_carlo_tracks_the_exact_value() {
        let rows = chain_coefficient_rows(2);
        let assignment = two_disjoint_paths();
        let node_probs = probs(&[("a", 0.5), ("b", 0.5)]);
        let exact =
            exact_reconstruction_prob(&assignment, &node_probs, &rows, true).unwrap();
        let mc = monte_carlo_reconstruction_prob(
            &assignment,
            &node_probs,
            &rows,
            true,
            100_000,
            0xFACE,
        );
        assert!(
            (mc.estimate - exact).abs() <= 3.0 * mc.stderr,
            "estimate {} vs exact {exact} (stderr {})",
            mc.estimate,
            mc.stderr
        );
    }

    #[test]
    fn sampling_respects_probabilities() {
        let node_probs = probs(&[("never", 0.0), ("always", 1.0)]);
        let mut gen = Keystream::new(5, 0);
        for _ in 0..100 {
            let set = sample_compromised(&node_probs, &mut gen);
            assert_eq!(set, BTreeSet::from(["always".into()]));
        }
    }
}
