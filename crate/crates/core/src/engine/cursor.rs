//! Arrival cursors: time-ordered packet feed without materializing
//! full-rate traffic.

use crate::traffic::{AppClass, ArrivalStream, PacketArrival};
use crate::Nanos;

/// What drives the run: a materialized stream (generated or replayed) or a
/// lazily produced constant-rate feed.
#[derive(Debug, Clone)]
pub enum TrafficSource {
    Stream(ArrivalStream),
    /// Constant bit rate at a fraction of device capacity, spread uniformly
    /// over the active ports.
    Constant {
        load: f64,
        packet_size_bytes: u32,
        app_class: AppClass,
    },
}

/// A packet headed for a specific port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutedArrival {
    pub arrival: PacketArrival,
    pub port: u32,
}

pub(crate) enum Cursor<'a> {
    Stream {
        arrivals: &'a [PacketArrival],
        idx: usize,
        n_ports: u32,
        horizon_ns: Nanos,
    },
    Constant {
        /// Per-port emission interval; rounded up so offered never exceeds
        /// the requested rate.
        interval_ns: Nanos,
        packet_size_bytes: u32,
        app_class: AppClass,
        n_ports: u32,
        horizon_ns: Nanos,
        next_idx: u64,
        peeked: Option<RoutedArrival>,
    },
    Empty,
}

impl<'a> Cursor<'a> {
    /// Build a cursor over the active ports. Constant traffic computes a
    /// per-port interval from the aggregate rate `load x port capacity`.
    pub fn new(
        source: &'a TrafficSource,
        n_ports: u32,
        port_rate_bps: u64,
        horizon_ns: Nanos,
    ) -> Self {
        match source {
            TrafficSource::Stream(stream) => Cursor::Stream {
                arrivals: stream.arrivals(),
                idx: 0,
                n_ports,
                horizon_ns,
            },
            TrafficSource::Constant {
                load,
                packet_size_bytes,
                app_class,
            } => {
                if *load <= 0.0 || n_ports == 0 {
                    return Cursor::Empty;
                }
                let bits = *packet_size_bytes as f64 * 8.0;
                let per_port_rate = port_rate_bps as f64 * load;
                let interval_ns = (bits * 1e9 / per_port_rate).ceil() as Nanos;
                Cursor::Constant {
                    interval_ns: interval_ns.max(1),
                    packet_size_bytes: *packet_size_bytes,
                    app_class: *app_class,
                    n_ports,
                    horizon_ns,
                    next_idx: 0,
                    peeked: None,
                }
            }
        }
    }

    pub fn peek_time(&mut self) -> Option<Nanos> {
        self.fill_peek();
        match self {
            Cursor::Stream {
                arrivals,
                idx,
                horizon_ns,
                ..
            } => arrivals
                .get(*idx)
                .map(|a| a.timestamp_ns)
                .filter(|t| *t < *horizon_ns),
            Cursor::Constant { peeked, .. } => peeked.map(|p| p.arrival.timestamp_ns),
            Cursor::Empty => None,
        }
    }

    pub fn next(&mut self) -> Option<RoutedArrival> {
        self.fill_peek();
        match self {
            Cursor::Stream {
                arrivals,
                idx,
                n_ports,
                horizon_ns,
            } => {
                let a = arrivals.get(*idx).filter(|a| a.timestamp_ns < *horizon_ns)?;
                // round-robin by arrival index over the active ports
                let port = (*idx as u64 % *n_ports as u64) as u32;
                *idx += 1;
                Some(RoutedArrival { arrival: *a, port })
            }
            Cursor::Constant { peeked, .. } => peeked.take(),
            Cursor::Empty => None,
        }
    }

    fn fill_peek(&mut self) {
        if let Cursor::Constant {
            interval_ns,
            packet_size_bytes,
            app_class,
            n_ports,
            horizon_ns,
            next_idx,
            peeked,
        } = self
        {
            if peeked.is_some() {
                return;
            }
            let round = *next_idx / *n_ports as u64;
            let port = (*next_idx % *n_ports as u64) as u32;
            // stagger port phases so arrivals interleave smoothly
            let phase = port as u64 * *interval_ns / *n_ports as u64;
            let t = round
                .checked_mul(*interval_ns)
                .and_then(|v| v.checked_add(phase));
            match t {
                Some(t) if t < *horizon_ns => {
                    *peeked = Some(RoutedArrival {
                        arrival: PacketArrival {
                            timestamp_ns: t,
                            size_bytes: *packet_size_bytes,
                            app_class: *app_class,
                        },
                        port,
                    });
                    *next_idx += 1;
                }
                _ => *peeked = None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_cursor_is_monotone_and_uniform() {
        let src = TrafficSource::Constant {
            load: 1.0,
            packet_size_bytes: 1500,
            app_class: AppClass::BestEffort,
        };
        // 4 ports at 10G: per-port interval 1200 ns
        let mut c = Cursor::new(&src, 4, 10_000_000_000, 12_000);
        let mut prev = 0;
        let mut count = 0u64;
        let mut per_port = [0u64; 4];
        while let Some(r) = c.next() {
            assert!(r.arrival.timestamp_ns >= prev);
            prev = r.arrival.timestamp_ns;
            per_port[r.port as usize] += 1;
            count += 1;
        }
        // 12 us horizon / 1.2 us per packet per port = 10 rounds x 4 ports
        assert_eq!(count, 40);
        assert!(per_port.iter().all(|&n| n == 10));
    }

    #[test]
    fn constant_interval_rounds_up() {
        let src = TrafficSource::Constant {
            load: 1.0,
            packet_size_bytes: 64,
            app_class: AppClass::BestEffort,
        };
        // 512 bits at 10G = 51.2 ns; interval must round to 52
        let mut c = Cursor::new(&src, 1, 10_000_000_000, 520);
        let mut times = Vec::new();
        while let Some(r) = c.next() {
            times.push(r.arrival.timestamp_ns);
        }
        assert_eq!(times, vec![0, 52, 104, 156, 208, 260, 312, 364, 416, 468]);
    }

    #[test]
    fn zero_load_is_empty() {
        let src = TrafficSource::Constant {
            load: 0.0,
            packet_size_bytes: 1500,
            app_class: AppClass::BestEffort,
        };
        let mut c = Cursor::new(&src, 4, 10_000_000_000, 1_000_000);
        assert!(c.next().is_none());
    }

    #[test]
    fn stream_cursor_round_robins_ports() {
        let arrivals = (0..6)
            .map(|i| PacketArrival {
                timestamp_ns: i * 100,
                size_bytes: 64,
                app_class: AppClass::Voice,
            })
            .collect();
        let stream = ArrivalStream::new(arrivals, 1_000, 9216).unwrap();
        let src = TrafficSource::Stream(stream);
        let mut c = Cursor::new(&src, 3, 10_000_000_000, 1_000);
        let ports: Vec<u32> = std::iter::from_fn(|| c.next()).map(|r| r.port).collect();
        assert_eq!(ports, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn stream_cursor_respects_horizon() {
        let arrivals = vec![
            PacketArrival {
                timestamp_ns: 10,
                size_bytes: 64,
                app_class: AppClass::Voice,
            },
            PacketArrival {
                timestamp_ns: 2_000,
                size_bytes: 64,
                app_class: AppClass::Voice,
            },
        ];
        let stream = ArrivalStream::new(arrivals, 3_000, 9216).unwrap();
        let src = TrafficSource::Stream(stream);
        let mut c = Cursor::new(&src, 1, 10_000_000_000, 1_000);
        assert!(c.next().is_some());
        assert!(c.next().is_none());
    }
}
