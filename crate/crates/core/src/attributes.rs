//! Attribute synthesis: per-minute instances at multiple timescales from
//! flow counter series, plus hourly session attributes from raw packets.
//!
//! Each (flow, scale) pair contributes two attributes per instance: average
//! packet size over the trailing window and average rate in bytes per minute.
//! Attribute names follow `<flow>:<metric>@<scale>m`, e.g.
//! `remote_in:avg_rate@8m`; model files reference these names, so the
//! convention is stable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::flowtable::{FlowCounterSeries, FlowKind};
use crate::ingest::{Dataset, InstanceRow, PacketRecord};
use crate::{Error, Mac, Result};

/// Window lengths, in minutes, over which attributes are computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimescaleSet {
    scales: Vec<u32>,
}

impl TimescaleSet {
    const ALLOWED: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

    /// Four scales (1/2/4/8 min): 64 attributes over the eight flows.
    pub fn four_scale() -> Self {
        TimescaleSet {
            scales: vec![1, 2, 4, 8],
        }
    }

    /// All seven power-of-two scales up to 64 min: 112 attributes.
    pub fn seven_scale() -> Self {
        TimescaleSet {
            scales: Self::ALLOWED.to_vec(),
        }
    }

    pub fn custom(mut scales: Vec<u32>) -> Result<Self> {
        scales.sort_unstable();
        scales.dedup();
        if scales.is_empty() {
            return Err(Error::invalid("timescale set must be non-empty"));
        }
        if let Some(bad) = scales.iter().find(|s| !Self::ALLOWED.contains(s)) {
            return Err(Error::invalid(format!(
                "timescale {bad} not in {:?}",
                Self::ALLOWED
            )));
        }
        Ok(TimescaleSet { scales })
    }

    pub fn scales(&self) -> &[u32] {
        &self.scales
    }
}

/// Attribute names in the canonical order for a flow set and timescales.
pub fn attribute_names(flows: &[FlowKind], timescales: &TimescaleSet) -> Vec<String> {
    let mut names = Vec::with_capacity(flows.len() * 2 * timescales.scales().len());
    for flow in flows {
        for metric in ["avg_pkt_size", "avg_rate"] {
            for scale in timescales.scales() {
                names.push(format!("{flow}:{metric}@{scale}m"));
            }
        }
    }
    names
}

/// Turns zero-filled counter series into one instance per device per minute.
///
/// For flow `f` and scale `s` at minute `t`, attributes cover the trailing
/// window `[t-s+1, t]`, truncated at the start of the series:
/// `avg_pkt_size = sum(bytes)/sum(packets)` (0 when no packets) and
/// `avg_rate = sum(bytes)/window_len` in bytes per minute.
pub fn synthesize(series: &[FlowCounterSeries], timescales: &TimescaleSet) -> Result<Dataset> {
    let mut per_device: BTreeMap<Mac, BTreeMap<FlowKind, &FlowCounterSeries>> = BTreeMap::new();
    for s in series {
        if per_device
            .entry(s.device)
            .or_default()
            .insert(s.flow, s)
            .is_some()
        {
            return Err(Error::invalid(format!(
                "duplicate series for {} {}",
                s.device, s.flow
            )));
        }
    }
    let flows: Vec<FlowKind> = FlowKind::ALL
        .iter()
        .copied()
        .filter(|k| per_device.values().next().map_or(false, |m| m.contains_key(k)))
        .collect();
    for (device, m) in &per_device {
        let mine: Vec<FlowKind> = FlowKind::ALL
            .iter()
            .copied()
            .filter(|k| m.contains_key(k))
            .collect();
        if mine != flows {
            return Err(Error::invalid(format!(
                "device {device} has flow set {mine:?}, expected {flows:?}"
            )));
        }
    }
    let attributes = attribute_names(&flows, timescales);
    let mut dataset = Dataset::new(attributes);
    for (device, flow_map) in &per_device {
        // counters per flow, aligned to the zero-filled minute range
        let any = match flow_map.values().next() {
            Some(s) => s,
            None => continue,
        };
        let n = any.samples.len();
        if n == 0 {
            continue;
        }
        let start_minute = any.samples[0].minute;
        for s in flow_map.values() {
            if s.samples.len() != n || s.samples.first().map(|c| c.minute) != Some(start_minute) {
                return Err(Error::invalid(format!(
                    "series for {device} are not aligned; zero-fill them first"
                )));
            }
        }
        for t in 0..n {
            let mut values = Vec::with_capacity(dataset.attributes.len());
            for flow in &flows {
                let samples = &flow_map[flow].samples;
                for metric in 0..2 {
                    for &scale in timescales.scales() {
                        let lo = t.saturating_sub(scale as usize - 1);
                        let window = &samples[lo..=t];
                        let bytes: u64 = window.iter().map(|c| c.bytes).sum();
                        let packets: u64 = window.iter().map(|c| c.packets).sum();
                        let v = if metric == 0 {
                            if packets == 0 {
                                0.0
                            } else {
                                bytes as f64 / packets as f64
                            }
                        } else {
                            bytes as f64 / window.len() as f64
                        };
                        values.push(v);
                    }
                }
            }
            dataset.rows.push(InstanceRow {
                device: *device,
                window_start: (start_minute + t as i64) as f64 * 60.0,
                label: None,
                values,
            });
        }
    }
    Ok(dataset)
}

/// Keeps every `factor`-th instance per device, ordered by window start,
/// beginning with the first.
pub fn downsample(dataset: &Dataset, factor: usize) -> Result<Dataset> {
    if factor < 1 {
        return Err(Error::invalid("downsample factor must be >= 1"));
    }
    let mut order: BTreeMap<Mac, Vec<&InstanceRow>> = BTreeMap::new();
    for row in &dataset.rows {
        order.entry(row.device).or_default().push(row);
    }
    let mut rows = Vec::new();
    for (_, mut device_rows) in order {
        device_rows.sort_by(|a, b| a.window_start.total_cmp(&b.window_start));
        rows.extend(device_rows.into_iter().step_by(factor).cloned());
    }
    Ok(Dataset {
        attributes: dataset.attributes.clone(),
        rows,
    })
}

/// Hourly activity/volume summary for one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionAttributes {
    /// Bytes, both directions.
    pub flow_volume: u64,
    /// Seconds spanned by the busiest 5-tuple flow.
    pub flow_duration: f64,
    /// Bits per second: 8 * volume / duration, 0 for zero duration.
    pub mean_rate: f64,
    /// Longest packet-free gap in the hour, seconds.
    pub sleep_time: f64,
    /// Median gap between successive outgoing DNS queries, seconds.
    pub dns_interval: f64,
    /// Median gap between successive outgoing NTP queries, seconds.
    pub ntp_interval: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn median_query_interval(times: &mut Vec<f64>) -> f64 {
    if times.len() < 2 {
        return 0.0;
    }
    times.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    median(&gaps)
}

/// Computes session attributes for one device over the hour starting at
/// `hour_start` (seconds). Packets must already be filtered to the device;
/// packets outside the hour are ignored.
pub fn session_attributes(
    packets: &[PacketRecord],
    device: Mac,
    hour_start: f64,
) -> SessionAttributes {
    let hour_end = hour_start + 3600.0;
    let mut in_hour: Vec<&PacketRecord> = packets
        .iter()
        .filter(|p| p.ts >= hour_start && p.ts < hour_end)
        .collect();
    if in_hour.is_empty() {
        return SessionAttributes {
            flow_volume: 0,
            flow_duration: 0.0,
            mean_rate: 0.0,
            sleep_time: 0.0,
            dns_interval: 0.0,
            ntp_interval: 0.0,
        };
    }
    in_hour.sort_by(|a, b| a.ts.total_cmp(&b.ts));

    let flow_volume: u64 = in_hour.iter().map(|p| p.length).sum();

    // busiest 5-tuple by bytes determines flow duration
    type FiveTuple = (Option<String>, Option<String>, u8, Option<u16>, Option<u16>);
    let mut tuples: BTreeMap<FiveTuple, (u64, f64, f64)> = BTreeMap::new();
    for p in &in_hour {
        let key = (
            p.src_ip.clone(),
            p.dst_ip.clone(),
            p.proto,
            p.src_port,
            p.dst_port,
        );
        let entry = tuples.entry(key).or_insert((0, p.ts, p.ts));
        entry.0 += p.length;
        entry.1 = entry.1.min(p.ts);
        entry.2 = entry.2.max(p.ts);
    }
    let (_, first, last) = tuples
        .values()
        .max_by(|a, b| a.0.cmp(&b.0))
        .copied()
        .expect("non-empty hour");
    let flow_duration = last - first;
    let mean_rate = if flow_duration > 0.0 {
        8.0 * flow_volume as f64 / flow_duration
    } else {
        0.0
    };

    // longest packet-free gap, including the hour boundaries
    let mut sleep_time = in_hour[0].ts - hour_start;
    for w in in_hour.windows(2) {
        sleep_time = sleep_time.max(w[1].ts - w[0].ts);
    }
    sleep_time = sleep_time.max(hour_end - in_hour.last().unwrap().ts);

    let mut dns_times: Vec<f64> = Vec::new();
    let mut ntp_times: Vec<f64> = Vec::new();
    for p in &in_hour {
        if p.src_mac == device && p.proto == 17 {
            match p.dst_port {
                Some(53) => dns_times.push(p.ts),
                Some(123) => ntp_times.push(p.ts),
                _ => {}
            }
        }
    }

    SessionAttributes {
        flow_volume,
        flow_duration,
        mean_rate,
        sleep_time,
        dns_interval: median_query_interval(&mut dns_times),
        ntp_interval: median_query_interval(&mut ntp_times),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowtable::CounterSample;

    fn mac(n: u8) -> Mac {
        Mac::new([0xaa, 0, 0, 0, 0, n])
    }

    fn series_for(device: Mac, flow: FlowKind, bytes: &[u64], packets: &[u64]) -> FlowCounterSeries {
        FlowCounterSeries {
            device,
            flow,
            samples: bytes
                .iter()
                .zip(packets)
                .enumerate()
                .map(|(i, (&b, &p))| CounterSample {
                    minute: i as i64,
                    bytes: b,
                    packets: p,
                })
                .collect(),
        }
    }

    fn full_series(device: Mac, minutes: usize) -> Vec<FlowCounterSeries> {
        FlowKind::ALL
            .iter()
            .map(|&flow| series_for(device, flow, &vec![0; minutes], &vec![0; minutes]))
            .collect()
    }

    #[test]
    fn window_arithmetic_matches_definition() {
        let mut series = full_series(mac(1), 4);
        series[0] = series_for(mac(1), FlowKind::DnsOut, &[72, 0, 72, 0], &[1, 0, 1, 0]);
        let ds = synthesize(&series, &TimescaleSet::four_scale()).unwrap();
        assert_eq!(ds.rows.len(), 4);
        let t3 = &ds.rows[3];
        let idx = |name: &str| ds.attributes.iter().position(|a| a == name).unwrap();
        assert_eq!(t3.values[idx("dns_out:avg_rate@4m")], 144.0 / 4.0);
        assert_eq!(t3.values[idx("dns_out:avg_pkt_size@4m")], 144.0 / 2.0);
    }

    #[test]
    fn all_zero_window_gives_zero_attributes() {
        let series = full_series(mac(1), 3);
        let ds = synthesize(&series, &TimescaleSet::four_scale()).unwrap();
        for row in &ds.rows {
            assert!(row.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn four_scale_preset_yields_64_attributes() {
        let series = full_series(mac(1), 2);
        let ds = synthesize(&series, &TimescaleSet::four_scale()).unwrap();
        assert_eq!(ds.attributes.len(), 64);
        let ds7 = synthesize(&series, &TimescaleSet::seven_scale()).unwrap();
        assert_eq!(ds7.attributes.len(), 112);
    }

    #[test]
    fn scale_one_rate_equals_raw_sample() {
        let mut series = full_series(mac(1), 6);
        let bytes = [10, 200, 0, 55, 7, 99];
        series[5] = series_for(mac(1), FlowKind::RemoteOut, &bytes, &[1, 2, 0, 1, 1, 3]);
        let ds = synthesize(&series, &TimescaleSet::four_scale()).unwrap();
        let idx = ds
            .attributes
            .iter()
            .position(|a| a == "remote_out:avg_rate@1m")
            .unwrap();
        for (t, row) in ds.rows.iter().enumerate() {
            assert_eq!(row.values[idx], bytes[t] as f64);
        }
    }

    #[test]
    fn truncated_prefix_uses_actual_window_length() {
        let mut series = full_series(mac(1), 2);
        series[0] = series_for(mac(1), FlowKind::DnsOut, &[80, 40], &[1, 1]);
        let ds = synthesize(&series, &TimescaleSet::four_scale()).unwrap();
        let idx = ds
            .attributes
            .iter()
            .position(|a| a == "dns_out:avg_rate@8m")
            .unwrap();
        // at t=0 only one minute exists
        assert_eq!(ds.rows[0].values[idx], 80.0);
        assert_eq!(ds.rows[1].values[idx], 60.0);
    }

    #[test]
    fn downsample_by_15() {
        let mut ds = Dataset::new(vec!["a".into()]);
        for i in 0..45 {
            ds.rows.push(InstanceRow {
                device: mac(1),
                window_start: i as f64 * 60.0,
                label: None,
                values: vec![i as f64],
            });
        }
        let out = downsample(&ds, 15).unwrap();
        let kept: Vec<f64> = out.rows.iter().map(|r| r.values[0]).collect();
        assert_eq!(kept, vec![0.0, 15.0, 30.0]);

        let identity = downsample(&ds, 1).unwrap();
        assert_eq!(identity.rows.len(), 45);

        ds.rows.truncate(45);
        for i in 45..100 {
            ds.rows.push(InstanceRow {
                device: mac(1),
                window_start: i as f64 * 60.0,
                label: None,
                values: vec![i as f64],
            });
        }
        let out = downsample(&ds, 15).unwrap();
        assert_eq!(out.rows.len(), 7); // ceil(100/15)
    }

    fn dns_query(device: Mac, ts: f64) -> PacketRecord {
        PacketRecord {
            ts,
            src_mac: device,
            dst_mac: mac(9),
            src_ip: Some("10.0.0.2".into()),
            dst_ip: Some("8.8.8.8".into()),
            proto: 17,
            src_port: Some(5000),
            dst_port: Some(53),
            length: 72,
        }
    }

    #[test]
    fn dns_interval_from_two_queries() {
        let device = mac(1);
        let packets = vec![dns_query(device, 100.0), dns_query(device, 400.0)];
        let s = session_attributes(&packets, device, 0.0);
        assert_eq!(s.dns_interval, 300.0);
        assert_eq!(s.ntp_interval, 0.0);
    }

    #[test]
    fn empty_hour_is_all_zero() {
        let s = session_attributes(&[], mac(1), 0.0);
        assert_eq!(s.flow_volume, 0);
        assert_eq!(s.flow_duration, 0.0);
        assert_eq!(s.mean_rate, 0.0);
        assert_eq!(s.sleep_time, 0.0);
    }

    #[test]
    fn flow_volume_sums_lengths() {
        let device = mac(1);
        let packets: Vec<PacketRecord> = (0..10)
            .map(|i| {
                let mut p = dns_query(device, i as f64 * 10.0);
                p.length = 100;
                p
            })
            .collect();
        let s = session_attributes(&packets, device, 0.0);
        assert_eq!(s.flow_volume, 1000);
        assert_eq!(s.flow_duration, 90.0);
        assert!((s.mean_rate - 8.0 * 1000.0 / 90.0).abs() < 1e-12);
        // longest gap is from last packet (t=90) to hour end
        assert_eq!(s.sleep_time, 3600.0 - 90.0);
    }

    #[test]
    fn monotone_aggregation_full_windows() {
        // for full windows, window_len * avg_rate == sum of bytes exactly
        let mut series = full_series(mac(1), 16);
        let bytes: Vec<u64> = (0..16).map(|i| (i * i * 37 + 11) as u64).collect();
        let pkts: Vec<u64> = (0..16).map(|i| (i % 3 + 1) as u64).collect();
        series[6] = series_for(mac(1), FlowKind::RemoteIn, &bytes, &pkts);
        let ds = synthesize(&series, &TimescaleSet::four_scale()).unwrap();
        for &scale in TimescaleSet::four_scale().scales() {
            let idx = ds
                .attributes
                .iter()
                .position(|a| *a == format!("remote_in:avg_rate@{scale}m"))
                .unwrap();
            for t in (scale as usize - 1)..16 {
                let sum: u64 = bytes[t + 1 - scale as usize..=t].iter().sum();
                let rate = ds.rows[t].values[idx];
                assert_eq!(rate * scale as f64, sum as f64);
            }
        }
    }

    #[test]
    fn custom_scales_validated() {
        assert!(TimescaleSet::custom(vec![3]).is_err());
        assert!(TimescaleSet::custom(vec![]).is_err());
        let ts = TimescaleSet::custom(vec![8, 1, 1]).unwrap();
        assert_eq!(ts.scales(), &[1, 8]);
    }
}
