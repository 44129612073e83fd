//! Event log digest and optional newline-delimited JSON log.
//!
//! The digest is always computed so two runs can be compared without
//! writing logs; FNV-1a keeps it stable across builds and platforms.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::Nanos;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// Codes identifying logged event kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogEvent {
    Arrival,
    ServiceStart,
    Departure,
    Drop,
    StateChange,
    LpiPhase,
    ActionExec,
}

impl LogEvent {
    fn code(&self) -> u64 {
        match self {
            LogEvent::Arrival => 1,
            LogEvent::ServiceStart => 2,
            LogEvent::Departure => 3,
            LogEvent::Drop => 4,
            LogEvent::StateChange => 5,
            LogEvent::LpiPhase => 6,
            LogEvent::ActionExec => 7,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            LogEvent::Arrival => "arrival",
            LogEvent::ServiceStart => "service_start",
            LogEvent::Departure => "departure",
            LogEvent::Drop => "drop",
            LogEvent::StateChange => "state_change",
            LogEvent::LpiPhase => "lpi_phase",
            LogEvent::ActionExec => "action_exec",
        }
    }
}

pub struct EventLog {
    digest: u64,
    writer: Option<BufWriter<File>>,
}

impl EventLog {
    pub fn new(path: Option<&Path>) -> std::io::Result<Self> {
        let writer = match path {
            Some(p) => Some(BufWriter::new(File::create(p)?)),
            None => None,
        };
        Ok(EventLog {
            digest: FNV_OFFSET,
            writer,
        })
    }

    fn fold(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.digest ^= byte as u64;
            self.digest = self.digest.wrapping_mul(FNV_PRIME);
        }
    }

    /// Record an event: always folded into the digest, written as a JSON
    /// line when a log file was requested. `detail` is a kind-specific
    /// (component-or-port, value) pair.
    pub fn record(&mut self, time: Nanos, kind: LogEvent, subject: u64, detail: u64) {
        self.fold(time);
        self.fold(kind.code());
        self.fold(subject);
        self.fold(detail);
        if let Some(w) = self.writer.as_mut() {
            // manual json line; fields are all numeric except the kind name
            let _ = writeln!(
                w,
                "{{\"t\":{time},\"kind\":\"{}\",\"subject\":{subject},\"detail\":{detail}}}",
                kind.name()
            );
        }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn finish(mut self) -> u64 {
        if let Some(w) = self.writer.as_mut() {
            let _ = w.flush();
        }
        self.digest
    }
}
