//! Application jitter budgets and the component wake-time tolerance matrix.
//!
//! Every sleep decision is gated here. Budgets and the shipped matrix are
//! data: the matrix entries override pure delay-threshold reasoning because
//! tolerance is not purely delay-based (a 90 ns NPU context switch is marked
//! questionable for mission-critical use while a 100 us serdes bringup is
//! fine), so the shipped table is authoritative where it has an entry and
//! thresholds apply only to unlisted components.

use serde::{Deserialize, Serialize};

use crate::power::ComponentKind;
use crate::traffic::AppClass;
use crate::Nanos;

/// One application class and its jitter budget. `None` means unconstrained
/// (best-effort traffic imposes no gating).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppClassSpec {
    pub class: AppClass,
    pub jitter_budget_ns: Option<Nanos>,
}

/// Cell verdict: may the component sleep under this class?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Marginal,
}

impl Verdict {
    pub fn symbol(&self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Marginal => "marginal",
        }
    }
}

/// How a Marginal verdict resolves when a boolean answer is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalPolicy {
    TreatAsYes,
    #[default]
    TreatAsNo,
}

/// One row key of the tolerance matrix: a component kind at a wake time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToleranceRow {
    pub kind: ComponentKind,
    pub wake_ns: Nanos,
}

/// A (component, class) tolerance entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToleranceEntry {
    pub row: ToleranceRow,
    pub class: AppClass,
    pub verdict: Verdict,
}

/// Budgets plus the shipped matrix; immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlaPolicy {
    pub classes: Vec<AppClassSpec>,
    pub entries: Vec<ToleranceEntry>,
}

/// Column order of the shipped matrix.
pub const MATRIX_CLASSES: [AppClass; 4] =
    [AppClass::Mc, AppClass::Bfd, AppClass::Video, AppClass::Voice];

/// Default mission-critical budget: the shipped matrix tolerates 100 us
/// events and rejects 30 ms ones, so any value between is consistent; 1 ms
/// is the shipped round conservative point.
pub const DEFAULT_MC_BUDGET_NS: Nanos = 1_000_000;

impl Default for SlaPolicy {
    fn default() -> Self {
        SlaPolicy::shipped(DEFAULT_MC_BUDGET_NS)
    }
}

impl SlaPolicy {
    /// The shipped budgets (video 10 ms, voice 30 ms, BFD 50 ms) and the
    /// six-row tolerance matrix, with questionable cells kept as Marginal.
    pub fn shipped(mc_budget_ns: Nanos) -> Self {
        use AppClass::*;
        use Verdict::*;
        let rows = [
            (ComponentKind::PhyLink, 10_000u64, [Yes, Yes, Yes, Yes]),
            (ComponentKind::Serdes, 100_000, [Yes, Yes, Yes, Yes]),
            (ComponentKind::NpuCore, 90, [Marginal, Yes, Yes, Yes]),
            (ComponentKind::SramBank, 30_000_000, [No, Marginal, Marginal, No]),
            (ComponentKind::EmbeddedCpu, 2_000_000_000, [No, No, No, No]),
            (ComponentKind::CentralCpu, 100_000_000_000, [No, No, No, No]),
        ];
        let mut entries = Vec::new();
        for (kind, wake_ns, verdicts) in rows {
            for (class, verdict) in MATRIX_CLASSES.iter().zip(verdicts) {
                entries.push(ToleranceEntry {
                    row: ToleranceRow { kind, wake_ns },
                    class: *class,
                    verdict,
                });
            }
        }
        SlaPolicy {
            classes: vec![
                AppClassSpec {
                    class: Mc,
                    jitter_budget_ns: Some(mc_budget_ns),
                },
                AppClassSpec {
                    class: Bfd,
                    jitter_budget_ns: Some(50_000_000),
                },
                AppClassSpec {
                    class: Video,
                    jitter_budget_ns: Some(10_000_000),
                },
                AppClassSpec {
                    class: Voice,
                    jitter_budget_ns: Some(30_000_000),
                },
                AppClassSpec {
                    class: BestEffort,
                    jitter_budget_ns: None,
                },
            ],
            entries,
        }
    }

    pub fn budget_ns(&self, class: AppClass) -> Option<Nanos> {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .and_then(|c| c.jitter_budget_ns)
    }

    fn matrix_verdict(&self, kind: ComponentKind, wake_ns: Nanos, class: AppClass) -> Option<Verdict> {
        self.entries
            .iter()
            .find(|e| e.row.kind == kind && e.row.wake_ns == wake_ns && e.class == class)
            .map(|e| e.verdict)
    }

    /// Threshold verdict with a marginal band for components the matrix does
    /// not list: clearly tolerable below a third of the budget, clearly not
    /// above three times it, marginal in between. The band is a documented
    /// heuristic.
    fn threshold_verdict(&self, wake_ns: Nanos, class: AppClass) -> Verdict {
        match self.budget_ns(class) {
            None => Verdict::Yes,
            Some(budget) => {
                if wake_ns < budget / 3 {
                    Verdict::Yes
                } else if wake_ns > budget.saturating_mul(3) {
                    Verdict::No
                } else {
                    Verdict::Marginal
                }
            }
        }
    }

    /// May a component carrying `class` traffic sleep, given the total wake
    /// delay along its wake chain?
    ///
    /// A shipped matrix entry for this exact (kind, wake) row overrides the
    /// computation; otherwise tolerable means strictly under the budget
    /// (a wake delay equal to the budget already breaches it).
    pub fn may_sleep(
        &self,
        component: Option<(ComponentKind, Nanos)>,
        total_wake_delay_ns: Nanos,
        class: AppClass,
        marginal_policy: MarginalPolicy,
    ) -> bool {
        if let Some((kind, wake_ns)) = component {
            if let Some(verdict) = self.matrix_verdict(kind, wake_ns, class) {
                return match verdict {
                    Verdict::Yes => true,
                    Verdict::No => false,
                    Verdict::Marginal => marginal_policy == MarginalPolicy::TreatAsYes,
                };
            }
        }
        match self.budget_ns(class) {
            None => true,
            Some(budget) => total_wake_delay_ns < budget,
        }
    }

    /// Build the verdict matrix for a set of components and classes:
    /// shipped rows verbatim, banded thresholds for everything else.
    pub fn tolerance_matrix(
        &self,
        components: &[(ComponentKind, Nanos)],
        classes: &[AppClass],
    ) -> Vec<Vec<Verdict>> {
        components
            .iter()
            .map(|&(kind, wake_ns)| {
                classes
                    .iter()
                    .map(|&class| {
                        self.matrix_verdict(kind, wake_ns, class)
                            .unwrap_or_else(|| self.threshold_verdict(wake_ns, class))
                    })
                    .collect()
            })
            .collect()
    }

    /// The shipped matrix rows in table order.
    pub fn shipped_rows(&self) -> Vec<ToleranceRow> {
        let mut rows = Vec::new();
        for e in &self.entries {
            if !rows.contains(&e.row) {
                rows.push(e.row);
            }
        }
        rows
    }
}

/// Human-readable row label used by the matrix printers.
pub fn row_label(row: &ToleranceRow) -> String {
    let wake = if row.wake_ns >= 1_000_000_000 {
        format!("{} s", row.wake_ns / 1_000_000_000)
    } else if row.wake_ns >= 1_000_000 {
        format!("{} ms", row.wake_ns / 1_000_000)
    } else if row.wake_ns >= 1_000 {
        format!("{} us", row.wake_ns / 1_000)
    } else {
        format!("{} ns", row.wake_ns)
    };
    format!("{} ({wake})", row.kind)
}
