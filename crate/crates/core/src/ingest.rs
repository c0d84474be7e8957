//! Canonical on-disk record formats and their readers/writers.
//!
//! Three text formats carry everything between pipeline stages:
//! `.pkts.jsonl` (one packet summary per line), `.events.jsonl` (bag-of-words
//! events), and `.inst.tsv` (attribute instances, tab-separated with a header
//! row). Binary capture parsing is out of scope; converters feed these files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Mac, Result};

/// Fraction of malformed lines above which a read is rejected outright.
const MALFORMED_LIMIT: f64 = 0.01;

/// Out-of-order timestamps are tolerated within this window (seconds).
const REORDER_TOLERANCE: f64 = 60.0;

/// One observed packet's header summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub ts: f64,
    pub src_mac: Mac,
    pub dst_mac: Mac,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_ip: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_ip: Option<String>,
    pub proto: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_port: Option<u16>,
    pub length: u64,
}

impl PacketRecord {
    /// Ports only make sense for TCP (6) and UDP (17).
    fn ports_valid(&self) -> bool {
        matches!(self.proto, 6 | 17) || (self.src_port.is_none() && self.dst_port.is_none())
    }
}

/// Token kind for bag-of-words event streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Domain,
    RemotePort,
    CipherSuite,
}

/// One bag-of-words observation: a token seen `count` times for a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub ts: f64,
    pub device: Mac,
    pub kind: EventKind,
    pub value: String,
    pub count: u64,
}

/// Outcome of a line-oriented read: the records plus a malformed-line tally.
#[derive(Debug)]
pub struct ReadReport {
    pub total_lines: usize,
    pub malformed: usize,
    /// Line numbers (1-based) of the first few malformed lines.
    pub offender_lines: Vec<usize>,
}

fn open_lines(path: &Path) -> Result<std::io::Lines<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines())
}

fn finish_report(path: &Path, report: ReadReport) -> Result<ReadReport> {
    if report.total_lines > 0
        && report.malformed as f64 > MALFORMED_LIMIT * report.total_lines as f64
    {
        return Err(Error::TooManyMalformed {
            path: path.to_path_buf(),
            malformed: report.malformed,
            total: report.total_lines,
            offenders: report.offender_lines,
        });
    }
    Ok(report)
}

/// Reads a `.pkts.jsonl` file. Malformed lines (bad JSON, invalid field
/// combinations, timestamps skewed more than 60 s behind the high-water mark)
/// are skipped and counted; more than 1% malformed is fatal.
pub fn read_packets(path: impl AsRef<Path>) -> Result<(Vec<PacketRecord>, ReadReport)> {
    let path = path.as_ref();
    let mut records = Vec::new();
    let mut report = ReadReport {
        total_lines: 0,
        malformed: 0,
        offender_lines: Vec::new(),
    };
    let mut max_ts = f64::NEG_INFINITY;
    for (idx, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.total_lines += 1;
        let parsed: Option<PacketRecord> = serde_json::from_str(&line).ok();
        let accepted = parsed.filter(|r| {
            r.ports_valid() && r.length < u64::MAX && r.ts.is_finite() && r.ts >= max_ts - REORDER_TOLERANCE
        });
        match accepted {
            Some(rec) => {
                max_ts = max_ts.max(rec.ts);
                records.push(rec);
            }
            None => {
                report.malformed += 1;
                if report.offender_lines.len() < 10 {
                    report.offender_lines.push(idx + 1);
                }
            }
        }
    }
    let report = finish_report(path, report)?;
    Ok((records, report))
}

pub fn write_packets(records: &[PacketRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::Model(e.to_string()))?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `.events.jsonl` file, under the same malformed-line policy as
/// [`read_packets`].
pub fn read_events(path: impl AsRef<Path>) -> Result<(Vec<EventRecord>, ReadReport)> {
    let path = path.as_ref();
    let mut records = Vec::new();
    let mut report = ReadReport {
        total_lines: 0,
        malformed: 0,
        offender_lines: Vec::new(),
    };
    for (idx, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.total_lines += 1;
        match serde_json::from_str::<EventRecord>(&line).ok().filter(|r| r.count >= 1) {
            Some(rec) => records.push(rec),
            None => {
                report.malformed += 1;
                if report.offender_lines.len() < 10 {
                    report.offender_lines.push(idx + 1);
                }
            }
        }
    }
    let report = finish_report(path, report)?;
    Ok((records, report))
}

pub fn write_events(records: &[EventRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::Model(e.to_string()))?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One device-window attribute vector. Values are positional against the
/// owning [`Dataset`]'s attribute list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub device: Mac,
    pub window_start: f64,
    pub label: Option<String>,
    pub values: Vec<f64>,
}

/// An instance with its own attribute names, before assembly into a dataset.
#[derive(Debug, Clone)]
pub struct NamedInstance {
    pub device: Mac,
    pub window_start: f64,
    pub label: Option<String>,
    pub values: Vec<(String, f64)>,
}

/// A homogeneous set of attribute instances sharing one attribute-name list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub attributes: Vec<String>,
    pub rows: Vec<InstanceRow>,
}

impl Dataset {
    pub fn new(attributes: Vec<String>) -> Self {
        Dataset {
            attributes,
            rows: Vec::new(),
        }
    }

    /// Assembles named instances into a dataset, requiring every instance to
    /// carry the same attribute-name set (in the same order).
    pub fn assemble(instances: Vec<NamedInstance>) -> Result<Dataset> {
        let first = match instances.first() {
            Some(f) => f,
            None => return Ok(Dataset::new(Vec::new())),
        };
        let attributes: Vec<String> = first.values.iter().map(|(n, _)| n.clone()).collect();
        let mut rows = Vec::with_capacity(instances.len());
        for inst in &instances {
            let names: Vec<&String> = inst.values.iter().map(|(n, _)| n).collect();
            if names.len() != attributes.len()
                || names.iter().zip(&attributes).any(|(a, b)| *a != b)
            {
                let mine: std::collections::BTreeSet<&String> = names.into_iter().collect();
                let theirs: std::collections::BTreeSet<&String> = attributes.iter().collect();
                let difference: Vec<String> = mine
                    .symmetric_difference(&theirs)
                    .map(|s| s.to_string())
                    .collect();
                return Err(Error::HeterogeneousAttributes { difference });
            }
            rows.push(InstanceRow {
                device: inst.device,
                window_start: inst.window_start,
                label: inst.label.clone(),
                values: inst.values.iter().map(|(_, v)| *v).collect(),
            });
        }
        Ok(Dataset { attributes, rows })
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows restricted to one label (exact match).
    pub fn filter_label(&self, label: &str) -> Dataset {
        Dataset {
            attributes: self.attributes.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| r.label.as_deref() == Some(label))
                .cloned()
                .collect(),
        }
    }
}

/// Writes an `.inst.tsv` file. Values are serialized with 17 significant
/// digits so a read-back is bit-identical.
pub fn write_instances(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for row in &dataset.rows {
        if row.values.len() != dataset.attributes.len() {
            return Err(Error::invalid(format!(
                "row for {} has {} values, expected {}",
                row.device,
                row.values.len(),
                dataset.attributes.len()
            )));
        }
        if let Some(v) = row.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite attribute value {v} for {}",
                row.device
            )));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write!(w, "device\twindow_start\tlabel").map_err(|e| Error::io(path, e))?;
    for name in &dataset.attributes {
        write!(w, "\t{name}").map_err(|e| Error::io(path, e))?;
    }
    writeln!(w).map_err(|e| Error::io(path, e))?;
    for row in &dataset.rows {
        write!(
            w,
            "{}\t{}\t{}",
            row.device,
            row.window_start,
            row.label.as_deref().unwrap_or("")
        )
        .map_err(|e| Error::io(path, e))?;
        for v in &row.values {
            write!(w, "\t{v:.16e}").map_err(|e| Error::io(path, e))?;
        }
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an `.inst.tsv` file. Any malformed row is fatal (instances are
/// machine-written, unlike packet captures).
pub fn read_instances(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut lines = open_lines(path)?;
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                reason: "missing header row".into(),
            })
        }
    };
    let mut cols = header.split('\t');
    for expected in ["device", "window_start", "label"] {
        if cols.next() != Some(expected) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("header must start with device/window_start/label, got {header:?}"),
            });
        }
    }
    let attributes: Vec<String> = cols.map(str::to_string).collect();
    let mut rows = Vec::new();
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
        if fields.len() != attributes.len() + 3 {
            return Err(parse_err(format!(
                "expected {} fields, got {}",
                attributes.len() + 3,
                fields.len()
            )));
        }
        let device: Mac = fields[0].parse().map_err(parse_err)?;
        let window_start: f64 = fields[1]
            .parse()
            .map_err(|e| parse_err(format!("bad window_start: {e}")))?;
        let label = if fields[2].is_empty() {
            None
        } else {
            Some(fields[2].to_string())
        };
        let mut values = Vec::with_capacity(attributes.len());
        for f in &fields[3..] {
            let v: f64 = f
                .parse()
                .map_err(|e| parse_err(format!("bad value {f:?}: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value {f:?}")));
            }
            values.push(v);
        }
        rows.push(InstanceRow {
            device,
            window_start,
            label,
            values,
        });
    }
    Ok(Dataset { attributes, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mac(n: u8) -> Mac {
        Mac::new([0xaa, 0, 0, 0, 0, n])
    }

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::mem::forget(dir); // keep alive for the test process
        path
    }

    #[test]
    fn packet_line_maps_fields() {
        let path = tmp("a.pkts.jsonl");
        std::fs::write(
            &path,
            r#"{"ts":0.0,"src_mac":"aa:00:00:00:00:01","dst_mac":"bb:00:00:00:00:01","proto":17,"src_port":5000,"dst_port":53,"length":72}"#,
        )
        .unwrap();
        let (records, report) = read_packets(&path).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(report.malformed, 0);
        let r = &records[0];
        assert_eq!(r.proto, 17);
        assert_eq!(r.dst_port, Some(53));
        assert_eq!(r.length, 72);
        assert_eq!(r.src_ip, None);
    }

    #[test]
    fn missing_length_is_malformed() {
        let path = tmp("b.pkts.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        for _ in 0..100 {
            writeln!(f, r#"{{"ts":1.0,"src_mac":"aa:00:00:00:00:01","dst_mac":"bb:00:00:00:00:01","proto":6,"length":40}}"#).unwrap();
        }
        writeln!(f, r#"{{"ts":1.0,"src_mac":"aa:00:00:00:00:01","dst_mac":"bb:00:00:00:00:01","proto":6}}"#).unwrap();
        let (records, report) = read_packets(&path).unwrap();
        assert_eq!(records.len(), 100);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.offender_lines, vec![101]);
    }

    #[test]
    fn thousand_valid_lines() {
        let path = tmp("c.pkts.jsonl");
        let records: Vec<PacketRecord> = (0..1000)
            .map(|i| PacketRecord {
                ts: i as f64,
                src_mac: mac(1),
                dst_mac: mac(2),
                src_ip: Some("10.0.0.2".into()),
                dst_ip: Some("8.8.8.8".into()),
                proto: 17,
                src_port: Some(5000),
                dst_port: Some(53),
                length: 72,
            })
            .collect();
        write_packets(&records, &path).unwrap();
        let (back, report) = read_packets(&path).unwrap();
        assert_eq!(back.len(), 1000);
        assert_eq!(report.malformed, 0);
        assert_eq!(back, records);
    }

    #[test]
    fn too_many_malformed_is_fatal() {
        let path = tmp("d.pkts.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        for i in 0..50 {
            if i % 10 == 0 {
                writeln!(f, "not json").unwrap();
            } else {
                writeln!(f, r#"{{"ts":1.0,"src_mac":"aa:00:00:00:00:01","dst_mac":"bb:00:00:00:00:01","proto":6,"length":40}}"#).unwrap();
            }
        }
        let err = read_packets(&path).unwrap_err();
        match err {
            Error::TooManyMalformed { malformed, offenders, .. } => {
                assert_eq!(malformed, 5);
                assert_eq!(offenders, vec![1, 11, 21, 31, 41]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reorder_within_window_tolerated_beyond_rejected() {
        let path = tmp("e.pkts.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        let line = |ts: f64| format!(r#"{{"ts":{ts},"src_mac":"aa:00:00:00:00:01","dst_mac":"bb:00:00:00:00:01","proto":6,"length":40}}"#);
        for _ in 0..200 {
            writeln!(f, "{}", line(1000.0)).unwrap();
        }
        writeln!(f, "{}", line(950.0)).unwrap(); // within 60 s
        writeln!(f, "{}", line(100.0)).unwrap(); // too far back
        let (records, report) = read_packets(&path).unwrap();
        assert_eq!(records.len(), 201);
        assert_eq!(report.malformed, 1);
    }

    #[test]
    fn ports_on_icmp_are_malformed() {
        let path = tmp("f.pkts.jsonl");
        std::fs::write(
            &path,
            r#"{"ts":0.0,"src_mac":"aa:00:00:00:00:01","dst_mac":"bb:00:00:00:00:01","proto":1,"src_port":7,"length":64}"#,
        )
        .unwrap();
        let err = read_packets(&path).unwrap_err();
        assert!(matches!(err, Error::TooManyMalformed { .. }));
    }

    #[test]
    fn events_round_trip() {
        let path = tmp("g.events.jsonl");
        let events = vec![EventRecord {
            ts: 5.0,
            device: mac(1),
            kind: EventKind::Domain,
            value: "pool.ntp.org".into(),
            count: 3,
        }];
        write_events(&events, &path).unwrap();
        let (back, report) = read_events(&path).unwrap();
        assert_eq!(back, events);
        assert_eq!(report.malformed, 0);
    }

    #[test]
    fn instance_round_trip_small() {
        let path = tmp("h.inst.tsv");
        let attributes: Vec<String> = (0..64).map(|i| format!("attr{i}")).collect();
        let dataset = Dataset {
            attributes: attributes.clone(),
            rows: vec![InstanceRow {
                device: mac(1),
                window_start: 60.0,
                label: Some("cam".into()),
                values: (0..64).map(|i| i as f64 * 0.1).collect(),
            }],
        };
        write_instances(&dataset, &path).unwrap();
        let back = read_instances(&path).unwrap();
        assert_eq!(back, dataset);
    }

    #[test]
    fn empty_dataset_round_trip() {
        let path = tmp("i.inst.tsv");
        let dataset = Dataset::new(vec!["a".into(), "b".into()]);
        write_instances(&dataset, &path).unwrap();
        let back = read_instances(&path).unwrap();
        assert_eq!(back, dataset);
    }

    #[test]
    fn heterogeneous_assembly_lists_difference() {
        let a = NamedInstance {
            device: mac(1),
            window_start: 0.0,
            label: None,
            values: vec![("x".into(), 1.0), ("y".into(), 2.0)],
        };
        let b = NamedInstance {
            device: mac(1),
            window_start: 60.0,
            label: None,
            values: vec![("x".into(), 1.0), ("z".into(), 2.0)],
        };
        let err = Dataset::assemble(vec![a, b]).unwrap_err();
        match err {
            Error::HeterogeneousAttributes { difference } => {
                assert_eq!(difference, vec!["y".to_string(), "z".to_string()]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn instance_round_trip_random(rows in proptest::collection::vec(
            proptest::collection::vec(-1e12f64..1e12, 8), 0..40)) {
            let path = tmp("prop.inst.tsv");
            let dataset = Dataset {
                attributes: (0..8).map(|i| format!("a{i}")).collect(),
                rows: rows.into_iter().enumerate().map(|(i, values)| InstanceRow {
                    device: mac(3),
                    window_start: i as f64 * 60.0,
                    label: if i % 2 == 0 { Some("lbl".into()) } else { None },
                    values,
                }).collect(),
            };
            write_instances(&dataset, &path).unwrap();
            let back = read_instances(&path).unwrap();
            // bit-for-bit on values
            prop_assert_eq!(back, dataset);
        }
    }
}
