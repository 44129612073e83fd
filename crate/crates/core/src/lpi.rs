//! Low-power-idle link state machine.
//!
//! An enabled link cycles Active -> Sleep -> Quiet, periodically waking the
//! transmitter for a short Refresh to keep the peer synchronized, and
//! returns to Active on pending traffic:
//!
//! ```text
//!   Active --idle--> Sleep --timer--> Quiet <--timer--> Refresh
//!                                       |                 |
//!                                       +---traffic-------+--> Wake --timer--> Active
//! ```
//!
//! Arrivals during Sleep set a pending flag; the wake starts only once the
//! sleep sequence completes, which makes `t_s + t_w` the worst-case added
//! delay for any arrival.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Nanos;

#[derive(Debug, Error)]
pub enum LpiError {
    #[error("invalid LPI parameters: {0}")]
    Parameter(String),
    #[error("protocol error: stimulus {stimulus:?} illegal in phase {phase:?} (simulator bug)")]
    Protocol { phase: LpiPhase, stimulus: Stimulus },
}

/// Link low-power-idle timing and draw parameters.
///
/// Durations are nanoseconds: `t_s` sleep-entry sequence, `t_q` quiet
/// interval between refreshes, `t_r` refresh duration, `t_w` wake duration.
/// Power fractions are relative to the owning PHY's Active draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpiParams {
    pub t_s_ns: Nanos,
    pub t_q_ns: Nanos,
    pub t_r_ns: Nanos,
    pub t_w_ns: Nanos,
    pub quiet_power_fraction: f64,
    pub refresh_power_fraction: f64,
}

/// Wake bound for Ethernet-like defaults.
pub const DEFAULT_MAX_WAKE_NS: Nanos = 30_000;

impl Default for LpiParams {
    /// Shipped Ethernet-like defaults: t_s 200 us, t_q 40 us, t_r 1.3 us,
    /// t_w 30 us, quiet at 10% of Active draw, refresh at full draw.
    fn default() -> Self {
        LpiParams {
            t_s_ns: 200_000,
            t_q_ns: 40_000,
            t_r_ns: 1_300,
            t_w_ns: 30_000,
            quiet_power_fraction: 0.1,
            refresh_power_fraction: 1.0,
        }
    }
}

impl LpiParams {
    pub fn validate(&self) -> Result<(), LpiError> {
        if self.t_s_ns == 0 || self.t_q_ns == 0 || self.t_r_ns == 0 || self.t_w_ns == 0 {
            return Err(LpiError::Parameter("all durations must be > 0".into()));
        }
        if !(self.quiet_power_fraction >= 0.0
            && self.quiet_power_fraction < self.refresh_power_fraction
            && self.refresh_power_fraction <= 1.0)
        {
            return Err(LpiError::Parameter(format!(
                "power fractions must satisfy 0 <= quiet ({}) < refresh ({}) <= 1",
                self.quiet_power_fraction, self.refresh_power_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpiPhase {
    Active,
    Sleep,
    Quiet,
    Refresh,
    Wake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stimulus {
    IdleDetected,
    TrafficPending,
    Timer,
}

/// Runtime state of one link's LPI machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpiState {
    pub phase: LpiPhase,
    pub phase_entered_at: Nanos,
    /// Traffic arrived during Sleep; wake as soon as the sleep completes.
    pub pending_wake: bool,
}

impl LpiState {
    pub fn new_active(now: Nanos) -> Self {
        LpiState {
            phase: LpiPhase::Active,
            phase_entered_at: now,
            pending_wake: false,
        }
    }
}

/// Result of advancing the state machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpiAdvance {
    pub state: LpiState,
    /// When the next timer stimulus is due, if any phase timer is running.
    pub next_timer_at: Option<Nanos>,
    /// Draw over the phase just left, as a fraction of Active PHY power.
    pub elapsed_power_fraction: f64,
}

/// Fraction of Active draw consumed while in a phase. Sleep and Wake are
/// transitions and draw the max of their endpoints (full Active power), so
/// savings are never overstated.
pub fn phase_power_fraction(phase: LpiPhase, params: &LpiParams) -> f64 {
    match phase {
        LpiPhase::Active | LpiPhase::Sleep | LpiPhase::Wake => 1.0,
        LpiPhase::Quiet => params.quiet_power_fraction,
        LpiPhase::Refresh => params.refresh_power_fraction,
    }
}

/// Advance the machine on a stimulus at time `now`.
///
/// Legal pairs follow the phase graph: idle detection only in Active, timers
/// in the timed phases (Sleep, Quiet, Refresh, Wake), pending traffic in
/// Sleep (sets the flag), Quiet, or Refresh (starts the wake). Anything else
/// is a protocol error, which signals a simulator bug rather than a modeled
/// condition.
pub fn lpi_advance(
    state: &LpiState,
    params: &LpiParams,
    now: Nanos,
    stimulus: Stimulus,
) -> Result<LpiAdvance, LpiError> {
    debug_assert!(now >= state.phase_entered_at);
    let fraction = phase_power_fraction(state.phase, params);
    let enter = |phase: LpiPhase, pending: bool| LpiState {
        phase,
        phase_entered_at: now,
        pending_wake: pending,
    };
    let advance = |state: LpiState, deadline: Option<Nanos>| {
        Ok(LpiAdvance {
            state,
            next_timer_at: deadline,
            elapsed_power_fraction: fraction,
        })
    };
    match (state.phase, stimulus) {
        (LpiPhase::Active, Stimulus::IdleDetected) => {
            advance(enter(LpiPhase::Sleep, false), Some(now + params.t_s_ns))
        }
        (LpiPhase::Sleep, Stimulus::TrafficPending) => {
            // Complete the sleep sequence first; remember the wake.
            let deadline = state.phase_entered_at + params.t_s_ns;
            advance(
                LpiState {
                    pending_wake: true,
                    ..*state
                },
                Some(deadline),
            )
        }
        (LpiPhase::Sleep, Stimulus::Timer) => {
            if state.pending_wake {
                advance(enter(LpiPhase::Wake, false), Some(now + params.t_w_ns))
            } else {
                advance(enter(LpiPhase::Quiet, false), Some(now + params.t_q_ns))
            }
        }
        (LpiPhase::Quiet, Stimulus::Timer) => {
            advance(enter(LpiPhase::Refresh, false), Some(now + params.t_r_ns))
        }
        (LpiPhase::Refresh, Stimulus::Timer) => {
            advance(enter(LpiPhase::Quiet, false), Some(now + params.t_q_ns))
        }
        (LpiPhase::Quiet, Stimulus::TrafficPending)
        | (LpiPhase::Refresh, Stimulus::TrafficPending) => {
            advance(enter(LpiPhase::Wake, false), Some(now + params.t_w_ns))
        }
        (LpiPhase::Wake, Stimulus::Timer) => advance(enter(LpiPhase::Active, false), None),
        (phase, stimulus) => Err(LpiError::Protocol { phase, stimulus }),
    }
}

/// Side that supplies the advertised refresh parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advertiser {
    Local,
    Peer,
}

/// One side's capability announcement.
#[derive(Debug, Clone)]
pub struct LpiCapability {
    pub supported: bool,
    pub params: LpiParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Negotiation {
    Disabled,
    Enabled(LpiParams),
}

/// Resolve link LPI capability with a partner.
///
/// Either side may opt out entirely. Otherwise the slowest waker governs
/// (resolved t_w is the max of both), refresh timing comes from the
/// configured advertising side, and draw fractions stay local because the
/// power is drawn locally.
pub fn negotiate(
    local: &LpiCapability,
    peer: &LpiCapability,
    advertiser: Advertiser,
) -> Negotiation {
    if !local.supported || !peer.supported {
        return Negotiation::Disabled;
    }
    let adv = match advertiser {
        Advertiser::Local => &local.params,
        Advertiser::Peer => &peer.params,
    };
    Negotiation::Enabled(LpiParams {
        t_s_ns: local.params.t_s_ns,
        t_q_ns: adv.t_q_ns,
        t_r_ns: adv.t_r_ns,
        t_w_ns: local.params.t_w_ns.max(peer.params.t_w_ns),
        quiet_power_fraction: local.params.quiet_power_fraction,
        refresh_power_fraction: local.params.refresh_power_fraction,
    })
}

/// Worst-case delay the link can add to a packet: an arrival the instant a
/// sleep sequence begins waits out the whole sleep, then the wake.
pub fn added_delay_bound(params: &LpiParams) -> Nanos {
    params.t_s_ns + params.t_w_ns
}

/// Average power fraction during sustained idle: the quiet/refresh duty
/// cycle mean (the initial sleep transient washes out over a long idle).
pub fn duty_cycle_power(params: &LpiParams) -> f64 {
    let t_q = params.t_q_ns as f64;
    let t_r = params.t_r_ns as f64;
    (t_q * params.quiet_power_fraction + t_r * params.refresh_power_fraction) / (t_q + t_r)
}

/// Added delay for a single arrival at `offset` ns after a sleep sequence
/// begins on an otherwise idle link. Walks the refresh cycle to find the
/// phase at arrival, then accounts the residual sleep (if any) plus wake.
///
/// Delivery wait = time from arrival until the link is Active again.
pub fn added_delay_for_arrival(params: &LpiParams, offset: Nanos) -> Nanos {
    if offset < params.t_s_ns {
        // arrival during Sleep: finish sleeping, then wake
        (params.t_s_ns - offset) + params.t_w_ns
    } else {
        // in the quiet/refresh cycle: wake starts immediately
        params.t_w_ns
    }
}
