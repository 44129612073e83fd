//! Trace file replay and export.
//!
//! Format: CSV with the header `timestamp_ns,size_bytes,app_class`, one
//! arrival per line, UTF-8, LF line endings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{AppClass, ArrivalStream, PacketArrival, TrafficError, DEFAULT_MAX_PACKET_BYTES};
use crate::Nanos;

pub const TRACE_HEADER: &str = "timestamp_ns,size_bytes,app_class";

/// Parse a trace file into a stream; the horizon is the last timestamp + 1.
pub fn load_trace(path: &Path) -> Result<ArrivalStream, TrafficError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut arrivals: Vec<PacketArrival> = Vec::new();
    let mut prev: Nanos = 0;
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != TRACE_HEADER {
                return Err(TrafficError::Parse {
                    line: line_no,
                    reason: format!("expected header `{TRACE_HEADER}`, got `{line}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let mut fields = line.split(',');
        let ts: Nanos = parse_field(fields.next(), line_no, "timestamp_ns")?;
        let size: u32 = parse_field(fields.next(), line_no, "size_bytes")?;
        let class_str = fields.next().ok_or_else(|| TrafficError::Parse {
            line: line_no,
            reason: "missing app_class field".into(),
        })?;
        if fields.next().is_some() {
            return Err(TrafficError::Parse {
                line: line_no,
                reason: "too many fields".into(),
            });
        }
        let app_class = AppClass::parse(class_str.trim()).ok_or_else(|| TrafficError::Parse {
            line: line_no,
            reason: format!("unknown app_class `{class_str}`"),
        })?;
        if ts < prev {
            return Err(TrafficError::Ordering {
                line: line_no,
                ts,
                prev,
            });
        }
        if size < super::MIN_PACKET_BYTES || size > DEFAULT_MAX_PACKET_BYTES {
            return Err(TrafficError::Parse {
                line: line_no,
                reason: format!(
                    "size_bytes {size} outside [{}, {}]",
                    super::MIN_PACKET_BYTES,
                    DEFAULT_MAX_PACKET_BYTES
                ),
            });
        }
        prev = ts;
        arrivals.push(PacketArrival {
            timestamp_ns: ts,
            size_bytes: size,
            app_class,
        });
    }
    let duration = arrivals.last().map(|a| a.timestamp_ns + 1).unwrap_or(0);
    Ok(ArrivalStream::from_sorted_unchecked(arrivals, duration))
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    line: usize,
    name: &str,
) -> Result<T, TrafficError> {
    let raw = field.ok_or_else(|| TrafficError::Parse {
        line,
        reason: format!("missing {name} field"),
    })?;
    raw.trim().parse().map_err(|_| TrafficError::Parse {
        line,
        reason: format!("bad {name}: `{raw}`"),
    })
}

/// Write a stream in the trace format.
pub fn write_trace(stream: &ArrivalStream, path: &Path) -> Result<(), TrafficError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for a in stream.arrivals() {
        writeln!(w, "{},{},{}", a.timestamp_ns, a.size_bytes, a.app_class)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir();
        let path = dir.join(format!(
            "chronowatt-trace-{}-{:x}.csv",
            std::process::id(),
            content.len() as u64 * 31 + content.bytes().map(u64::from).sum::<u64>()
        ));
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_three_valid_lines() {
        let p = tmp("timestamp_ns,size_bytes,app_class\n0,64,Voice\n5,1500,Video\n5,9216,BFD\n");
        let s = load_trace(&p).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.arrivals()[0].app_class, AppClass::Voice);
        assert_eq!(s.duration_ns(), 6);
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn empty_file_is_empty_stream() {
        let p = tmp("");
        let s = load_trace(&p).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.duration_ns(), 0);
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn backwards_timestamp_names_the_line() {
        let p = tmp("timestamp_ns,size_bytes,app_class\n100,64,MC\n50,64,MC\n");
        let err = load_trace(&p).unwrap_err();
        match err {
            TrafficError::Ordering { line, ts, prev } => {
                assert_eq!(line, 3);
                assert_eq!(ts, 50);
                assert_eq!(prev, 100);
            }
            other => panic!("expected ordering error, got {other}"),
        }
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn malformed_line_names_the_line() {
        let p = tmp("timestamp_ns,size_bytes,app_class\nnot-a-number,64,MC\n");
        let err = load_trace(&p).unwrap_err();
        assert!(matches!(err, TrafficError::Parse { line: 2, .. }));
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn missing_header_rejected() {
        let p = tmp("0,64,MC\n");
        let err = load_trace(&p).unwrap_err();
        assert!(matches!(err, TrafficError::Parse { line: 1, .. }));
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn round_trip() {
        let arrivals = vec![
            PacketArrival {
                timestamp_ns: 10,
                size_bytes: 700,
                app_class: AppClass::Mc,
            },
            PacketArrival {
                timestamp_ns: 20,
                size_bytes: 64,
                app_class: AppClass::BestEffort,
            },
        ];
        let s = ArrivalStream::from_sorted_unchecked(arrivals, 21);
        let p = std::env::temp_dir().join(format!("chronowatt-rt-{}.csv", std::process::id()));
        write_trace(&s, &p).unwrap();
        let back = load_trace(&p).unwrap();
        assert_eq!(back, s);
        std::fs::remove_file(p).ok();
    }
}
