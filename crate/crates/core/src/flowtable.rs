//! Per-device flow rules with priority matching and per-minute counter export.
//!
//! Eight proactive rules meter each device's traffic: DNS/NTP up and down,
//! SSDP up (priority 100), remote up/down through the gateway (priority 10),
//! and a catch-all for local traffic toward the device (priority 1). There is
//! deliberately no incoming-SSDP rule and no outgoing-local rule, so local
//! traffic is counted once, at the receiver.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::PacketRecord;
use crate::{Error, Mac, Result};

/// The eight metered traffic slices, in fixed rule order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    DnsOut,
    DnsIn,
    NtpOut,
    NtpIn,
    SsdpOut,
    RemoteOut,
    RemoteIn,
    LocalIn,
}

impl FlowKind {
    pub const ALL: [FlowKind; 8] = [
        FlowKind::DnsOut,
        FlowKind::DnsIn,
        FlowKind::NtpOut,
        FlowKind::NtpIn,
        FlowKind::SsdpOut,
        FlowKind::RemoteOut,
        FlowKind::RemoteIn,
        FlowKind::LocalIn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::DnsOut => "dns_out",
            FlowKind::DnsIn => "dns_in",
            FlowKind::NtpOut => "ntp_out",
            FlowKind::NtpIn => "ntp_in",
            FlowKind::SsdpOut => "ssdp_out",
            FlowKind::RemoteOut => "remote_out",
            FlowKind::RemoteIn => "remote_in",
            FlowKind::LocalIn => "local_in",
        }
    }

    pub fn from_name(name: &str) -> Option<FlowKind> {
        FlowKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for FlowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A match rule: constrained fields must equal the packet's, absent fields
/// are wildcards. `action` is recorded but has no telemetry effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRuleSpec {
    pub device: Mac,
    pub kind: FlowKind,
    pub src_mac: Option<Mac>,
    pub dst_mac: Option<Mac>,
    pub proto: Option<u8>,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub priority: u32,
    pub action: String,
}

impl FlowRuleSpec {
    pub fn matches(&self, pkt: &PacketRecord) -> bool {
        fn ok<T: PartialEq>(constraint: &Option<T>, field: &T) -> bool {
            constraint.as_ref().map_or(true, |c| c == field)
        }
        ok(&self.src_mac, &pkt.src_mac)
            && ok(&self.dst_mac, &pkt.dst_mac)
            && ok(&self.proto, &pkt.proto)
            && match self.src_port {
                Some(p) => pkt.src_port == Some(p),
                None => true,
            }
            && match self.dst_port {
                Some(p) => pkt.dst_port == Some(p),
                None => true,
            }
    }
}

/// Builds the eight telemetry rules for one device behind one gateway.
pub fn install_device_rules(dev_mac: Mac, gw_mac: Mac) -> Result<Vec<FlowRuleSpec>> {
    if dev_mac == gw_mac {
        return Err(Error::invalid(format!(
            "device and gateway MAC are both {dev_mac}"
        )));
    }
    let rule = |kind, src_mac, dst_mac, proto, src_port, dst_port, priority| FlowRuleSpec {
        device: dev_mac,
        kind,
        src_mac,
        dst_mac,
        proto,
        src_port,
        dst_port,
        priority,
        action: "forward".into(),
    };
    Ok(vec![
        rule(FlowKind::DnsOut, Some(dev_mac), None, Some(17), None, Some(53), 100),
        rule(FlowKind::DnsIn, None, Some(dev_mac), Some(17), Some(53), None, 100),
        rule(FlowKind::NtpOut, Some(dev_mac), None, Some(17), None, Some(123), 100),
        rule(FlowKind::NtpIn, None, Some(dev_mac), Some(17), Some(123), None, 100),
        rule(FlowKind::SsdpOut, Some(dev_mac), None, Some(17), None, Some(1900), 100),
        rule(FlowKind::RemoteOut, Some(dev_mac), Some(gw_mac), None, None, None, 10),
        rule(FlowKind::RemoteIn, Some(gw_mac), Some(dev_mac), None, None, None, 10),
        rule(FlowKind::LocalIn, None, Some(dev_mac), None, None, None, 1),
    ])
}

/// Highest-priority match wins; ties fall to the earlier rule in the list.
/// Returns `None` when the packet belongs to no monitored slice.
pub fn match_packet<'a>(pkt: &PacketRecord, rules: &'a [FlowRuleSpec]) -> Option<&'a FlowRuleSpec> {
    rules
        .iter()
        .filter(|r| r.matches(pkt))
        .max_by(|a, b| a.priority.cmp(&b.priority)) // max_by keeps the last max; reverse below
        .map(|best| {
            // recover first-in-order among equal priorities
            rules
                .iter()
                .find(|r| r.matches(pkt) && r.priority == best.priority)
                .unwrap()
        })
}

/// One per-minute counter delta for a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSample {
    pub minute: i64,
    pub bytes: u64,
    pub packets: u64,
}

/// A flow's counter time series. Samples are interval deltas, strictly
/// increasing in minute index, zero-filled over the observation range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCounterSeries {
    pub device: Mac,
    pub flow: FlowKind,
    pub samples: Vec<CounterSample>,
}

/// Result of replaying a packet stream through the flow table.
#[derive(Debug, Clone)]
pub struct TelemetryExport {
    pub series: Vec<FlowCounterSeries>,
    pub matched: u64,
    pub unmatched: u64,
}

/// Replays packets against the rule set, accumulating per-minute byte and
/// packet counts per (device, flow). Every packet lands in at most one cell.
/// Minutes with no traffic are materialized as explicit zeros between the
/// first and last observed minute, so downstream averages see idle time.
pub fn export_counters(
    packets: impl IntoIterator<Item = PacketRecord>,
    rules: &[FlowRuleSpec],
    interval_secs: f64,
    mut on_unmatched: impl FnMut(&PacketRecord),
) -> Result<TelemetryExport> {
    if interval_secs <= 0.0 {
        return Err(Error::invalid("interval must be positive"));
    }
    let mut cells: BTreeMap<(Mac, FlowKind), BTreeMap<i64, (u64, u64)>> = BTreeMap::new();
    for rule in rules {
        cells.entry((rule.device, rule.kind)).or_default();
    }
    let mut matched = 0u64;
    let mut unmatched = 0u64;
    let mut min_minute = i64::MAX;
    let mut max_minute = i64::MIN;
    for pkt in packets {
        let minute = (pkt.ts / interval_secs).floor() as i64;
        min_minute = min_minute.min(minute);
        max_minute = max_minute.max(minute);
        match match_packet(&pkt, rules) {
            Some(rule) => {
                matched += 1;
                let cell = cells
                    .get_mut(&(rule.device, rule.kind))
                    .expect("rule key preinserted")
                    .entry(minute)
                    .or_insert((0, 0));
                cell.0 += pkt.length;
                cell.1 += 1;
            }
            None => {
                unmatched += 1;
                on_unmatched(&pkt);
            }
        }
    }
    let series = cells
        .into_iter()
        .map(|((device, flow), minutes)| {
            let samples = if min_minute > max_minute {
                Vec::new()
            } else {
                (min_minute..=max_minute)
                    .map(|minute| {
                        let (bytes, packets) = minutes.get(&minute).copied().unwrap_or((0, 0));
                        CounterSample {
                            minute,
                            bytes,
                            packets,
                        }
                    })
                    .collect()
            };
            FlowCounterSeries {
                device,
                flow,
                samples,
            }
        })
        .collect();
    Ok(TelemetryExport {
        series,
        matched,
        unmatched,
    })
}

/// Writes counter series as `.flows.tsv`: `device flow minute bytes packets`.
pub fn write_counters(series: &[FlowCounterSeries], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "device\tflow\tminute\tbytes\tpackets").map_err(|e| Error::io(path, e))?;
    for s in series {
        for sample in &s.samples {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                s.device, s.flow, sample.minute, sample.bytes, sample.packets
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `.flows.tsv` file back into series, grouped by (device, flow).
pub fn read_counters(path: impl AsRef<Path>) -> Result<Vec<FlowCounterSeries>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == "device\tflow\tminute\tbytes\tpackets" => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                reason: "bad or missing .flows.tsv header".into(),
            })
        }
    }
    let mut grouped: BTreeMap<(Mac, FlowKind), Vec<CounterSample>> = BTreeMap::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 2;
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(format!("expected 5 fields, got {}", fields.len())));
        }
        let device: Mac = fields[0].parse().map_err(parse_err)?;
        let flow = FlowKind::from_name(fields[1])
            .ok_or_else(|| parse_err(format!("unknown flow {:?}", fields[1])))?;
        let minute: i64 = fields[2]
            .parse()
            .map_err(|e| parse_err(format!("bad minute: {e}")))?;
        let bytes: u64 = fields[3]
            .parse()
            .map_err(|e| parse_err(format!("bad bytes: {e}")))?;
        let packets: u64 = fields[4]
            .parse()
            .map_err(|e| parse_err(format!("bad packets: {e}")))?;
        grouped.entry((device, flow)).or_default().push(CounterSample {
            minute,
            bytes,
            packets,
        });
    }
    Ok(grouped
        .into_iter()
        .map(|((device, flow), samples)| FlowCounterSeries {
            device,
            flow,
            samples,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev() -> Mac {
        "d0:73:d5:01:83:08".parse().unwrap()
    }
    fn gw() -> Mac {
        "14:cc:20:51:33:ea".parse().unwrap()
    }
    fn other() -> Mac {
        "aa:bb:cc:dd:ee:ff".parse().unwrap()
    }

    fn pkt(src: Mac, dst: Mac, proto: u8, sp: Option<u16>, dp: Option<u16>, len: u64) -> PacketRecord {
        PacketRecord {
            ts: 0.0,
            src_mac: src,
            dst_mac: dst,
            src_ip: None,
            dst_ip: None,
            proto,
            src_port: sp,
            dst_port: dp,
            length: len,
        }
    }

    #[test]
    fn installs_eight_rules_with_table_priorities() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        assert_eq!(rules.len(), 8);
        let priorities: Vec<u32> = rules.iter().map(|r| r.priority).collect();
        assert_eq!(priorities, vec![100, 100, 100, 100, 100, 10, 10, 1]);
        // no rule matches SSDP toward the device
        let ssdp_in = pkt(other(), dev(), 17, Some(1900), Some(40000), 120);
        let hit = match_packet(&ssdp_in, &rules).unwrap();
        assert_eq!(hit.kind, FlowKind::LocalIn); // falls to the catch-all, not an SSDP slice
        assert!(!rules
            .iter()
            .any(|r| r.kind == FlowKind::SsdpOut && r.dst_mac == Some(dev())));
    }

    #[test]
    fn equal_macs_rejected() {
        assert!(install_device_rules(dev(), dev()).is_err());
    }

    #[test]
    fn two_devices_disjoint_rules() {
        let mut rules = install_device_rules(dev(), gw()).unwrap();
        rules.extend(install_device_rules(other(), gw()).unwrap());
        assert_eq!(rules.len(), 16);
        assert!(rules.iter().take(8).all(|r| r.device == dev()));
        assert!(rules.iter().skip(8).all(|r| r.device == other()));
    }

    #[test]
    fn dns_beats_remote() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let p = pkt(dev(), gw(), 17, Some(5000), Some(53), 72);
        assert_eq!(match_packet(&p, &rules).unwrap().kind, FlowKind::DnsOut);
    }

    #[test]
    fn remote_in_beats_local_in() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let p = pkt(gw(), dev(), 6, Some(443), Some(40000), 1500);
        assert_eq!(match_packet(&p, &rules).unwrap().kind, FlowKind::RemoteIn);
    }

    #[test]
    fn local_host_to_device_is_local_in() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let p = pkt(other(), dev(), 17, Some(9), Some(9), 60);
        assert_eq!(match_packet(&p, &rules).unwrap().kind, FlowKind::LocalIn);
    }

    #[test]
    fn unmonitored_packet_matches_nothing() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let p = pkt(other(), gw(), 6, Some(1234), Some(80), 60);
        assert!(match_packet(&p, &rules).is_none());
    }

    #[test]
    fn counters_sum_dns_queries() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let packets = vec![
            pkt(dev(), gw(), 17, Some(5000), Some(53), 72),
            pkt(dev(), gw(), 17, Some(5001), Some(53), 72),
            pkt(dev(), gw(), 17, Some(5002), Some(53), 72),
        ];
        let export = export_counters(packets, &rules, 60.0, |_| {}).unwrap();
        let dns = export
            .series
            .iter()
            .find(|s| s.flow == FlowKind::DnsOut)
            .unwrap();
        assert_eq!(dns.samples, vec![CounterSample { minute: 0, bytes: 216, packets: 3 }]);
        assert_eq!(export.matched, 3);
        assert_eq!(export.unmatched, 0);
    }

    #[test]
    fn single_match_leaves_other_flows_untouched() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let packets = vec![pkt(dev(), gw(), 6, Some(40000), Some(443), 500)];
        let export = export_counters(packets, &rules, 60.0, |_| {}).unwrap();
        for s in &export.series {
            let total: u64 = s.samples.iter().map(|c| c.packets).sum();
            if s.flow == FlowKind::RemoteOut {
                assert_eq!(total, 1);
            } else {
                assert_eq!(total, 0);
            }
        }
    }

    #[test]
    fn zero_fill_spans_observed_range() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let mut p0 = pkt(dev(), gw(), 17, Some(5000), Some(53), 72);
        p0.ts = 30.0; // minute 0
        let mut p9 = pkt(dev(), gw(), 17, Some(5000), Some(53), 72);
        p9.ts = 9.0 * 60.0 + 5.0; // minute 9
        let export = export_counters(vec![p0, p9], &rules, 60.0, |_| {}).unwrap();
        for s in &export.series {
            assert_eq!(s.samples.len(), 10);
            for (i, c) in s.samples.iter().enumerate() {
                assert_eq!(c.minute, i as i64);
            }
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let packets: Vec<PacketRecord> = (0..600)
            .map(|i| {
                let mut p = pkt(dev(), gw(), 6, Some(40000), Some(443), 100 + (i % 7) * 10);
                p.ts = i as f64;
                p
            })
            .collect();
        let a = export_counters(packets.clone(), &rules, 60.0, |_| {}).unwrap();
        let b = export_counters(packets, &rules, 60.0, |_| {}).unwrap();
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn counters_tsv_round_trip() {
        let rules = install_device_rules(dev(), gw()).unwrap();
        let packets = vec![pkt(dev(), gw(), 17, Some(5000), Some(53), 72)];
        let export = export_counters(packets, &rules, 60.0, |_| {}).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.flows.tsv");
        write_counters(&export.series, &path).unwrap();
        let back = read_counters(&path).unwrap();
        assert_eq!(back, export.series);
    }
}
