//! Carrier-sense medium access with bounded exponential backoff.
//!
//! Collisions over a wireless link cannot be reliably detected (a faded
//! station may never hear them), so the medium is modelled as a reservation
//! schedule and collisions are prevented rather than detected: a sender
//! checks whether the medium is idle for its whole transmission, and when it
//! is not, waits for the busy run to end and defers a random backoff before
//! trying again, doubling the contention window on every retry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Keystream;

/// Backoff parameters. Overridable from the scenario file under `"mac"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackoffPolicy {
    /// Length of one backoff slot in time units.
    #[serde(skip, default = "default_slot")]
    pub slot: u64,
    #[serde(default = "default_cw_min")]
    pub cw_min: u64,
    #[serde(default = "default_cw_max")]
    pub cw_max: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

fn default_slot() -> u64 {
    1
}
fn default_cw_min() -> u64 {
    4
}
fn default_cw_max() -> u64 {
    64
}
fn default_max_retries() -> u32 {
    7
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        Self {
            slot: default_slot(),
            cw_min: default_cw_min(),
            cw_max: default_cw_max(),
            max_retries: default_max_retries(),
        }
    }
}

impl BackoffPolicy {
    /// Check the policy invariants, returning an explanation per breach.
    pub fn validate(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.slot == 0 || self.cw_min == 0 || self.cw_max == 0 {
            out.push((
                "mac-policy",
                "slot, cw_min and cw_max must be positive".to_owned(),
            ));
        }
        if self.cw_min > self.cw_max {
            out.push((
                "mac-policy",
                format!("cw_min {} exceeds cw_max {}", self.cw_min, self.cw_max),
            ));
        }
        out
    }

    /// Contention window for retry `r` (1-based): `cw_min * 2^(r-1)`,
    /// capped at `cw_max`.
    fn window(&self, retry: u32) -> u64 {
        let factor = 1u64.checked_shl(retry - 1).unwrap_or(u64::MAX);
        self.cw_min.saturating_mul(factor).min(self.cw_max)
    }
}

/// A reserved transmission interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reservation {
    pub start: u64,
    pub end: u64,
}

/// Reservation ledger for one shared medium.
#[derive(Debug, Clone)]
pub struct MediumState {
    medium: String,
    /// Sorted, pairwise disjoint.
    schedule: Vec<Reservation>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MacError {
    #[error("medium {medium} still busy after {retries} retries")]
    ChannelBusy { medium: String, retries: u32 },
}

impl MediumState {
    pub fn new(medium: impl Into<String>) -> Self {
        Self {
            medium: medium.into(),
            schedule: Vec::new(),
        }
    }

    pub fn medium(&self) -> &str {
        &self.medium
    }

    pub fn schedule(&self) -> &[Reservation] {
        &self.schedule
    }

    /// End of the last reservation; the medium is permanently idle from here.
    pub fn busy_until(&self) -> u64 {
        self.schedule.last().map_or(0, |r| r.end)
    }

    fn fits(&self, start: u64, duration: u64) -> bool {
        let end = start + duration;
        self.schedule
            .iter()
            .all(|r| r.end <= start || r.start >= end)
    }

    /// First instant at or after `t` outside every reservation, skipping
    /// contiguous busy runs.
    fn next_idle_at(&self, mut t: u64) -> u64 {
        for r in &self.schedule {
            if r.start <= t && t < r.end {
                t = r.end;
            }
        }
        t
    }

    fn reserve(&mut self, start: u64, duration: u64) {
        debug_assert!(self.fits(start, duration));
        let at = self.schedule.partition_point(|r| r.start < start);
        self.schedule.insert(
            at,
            Reservation {
                start,
                end: start + duration,
            },
        );
    }

    /// Claim the medium for `duration` units at the earliest permitted time.
    ///
    /// If the medium is idle at `ready_at` the transmission starts there.
    /// Otherwise each retry waits for the current busy run to end, defers a
    /// backoff drawn uniformly from `[0, cw_min * 2^(r-1))` slots (capped at
    /// `cw_max`) and senses again. The reserved interval never overlaps an
    /// existing reservation.
    pub fn acquire(
        &mut self,
        policy: &BackoffPolicy,
        ready_at: u64,
        duration: u64,
        rng: &mut Keystream,
    ) -> Result<u64, MacError> {
        assert!(duration >= 1, "transmission duration must be positive");
        let mut candidate = ready_at;
        if self.fits(candidate, duration) {
            self.reserve(candidate, duration);
            return Ok(candidate);
        }
        for retry in 1..=policy.max_retries {
            let idle = self.next_idle_at(candidate);
            let backoff = rng.next_below(policy.window(retry)) * policy.slot;
            candidate = idle + backoff;
            if self.fits(candidate, duration) {
                self.reserve(candidate, duration);
                return Ok(candidate);
            }
        }
        Err(MacError::ChannelBusy {
            medium: self.medium.clone(),
            retries: policy.max_retries,
        })
    }
}
