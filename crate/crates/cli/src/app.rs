//! Command surface: argument definitions and per-subcommand drivers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use iotmon_core::attributes::{downsample, synthesize};
use iotmon_core::entropy::{chunk_verdicts, classify_stream, Thresholds};
use iotmon_core::flowtable::{export_counters, install_device_rules, read_counters, write_counters};
use iotmon_core::ingest::{read_instances, read_packets, write_instances, Dataset};
use iotmon_core::ingest::{read_events, EventKind};
use iotmon_core::monitor::{run_monitor, write_monitor_log};
use iotmon_core::oneclass::{train_device_model, DeviceModel};
use iotmon_core::supervised::{
    forest_train, nbm_train, rank_attributes, two_stage_train, BagOfWords, ConfusionMatrix,
    ForestModel, TwoStageInstance,
};
use iotmon_core::{Error, Mac, Result};

use crate::config::Config;
use crate::fixture::{self, FixtureManifest, FixtureSpec, FloodSpec};

/// Process exit codes: `OK` also means "no alarms" for `monitor`.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ALARM: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "iotmon",
    version,
    about = "Flow-telemetry behavioral monitoring for IoT devices",
    after_help = "Config file keys (all overridable via --set KEY=VALUE):\n\
      attributes.preset        ch5 | ch4 | custom (default ch5)\n\
      attributes.scales        minute list for the custom preset\n\
      attributes.downsample    keep every Nth instance (default 1)\n\
      oneclass.cumvar_target   PCA variance target in (0,1] (default 0.95)\n\
      oneclass.k_candidates    K sweep list (default powers of two up to 1024)\n\
      oneclass.deriv_threshold elbow derivative cutoff (default -0.01)\n\
      oneclass.boundary_rule   percentile | iqr (default percentile)\n\
      oneclass.seed            clustering seed (default 0)\n\
      oneclass.fixed_k         skip the sweep and use this K\n\
      monitor.rise_target/rise_minutes   sigmoid rise policy (0.99 / 720)\n\
      monitor.fall_target/fall_minutes   sigmoid fall policy (0.01 / 90)\n\
      monitor.accept_threshold score accepting an identity (default 0.90)\n\
      monitor.confidence_floor minimum confidence in conflicts (default 0.025)\n\
      monitor.alarm_level      stable-phase alarm score (default 0.50)\n\
      forest.trees/min_leaf/features_per_split/seed  forest knobs"
)]
pub struct Cli {
    /// TOML config file; defaults apply when absent.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. --set oneclass.seed=7 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a packet capture through per-device flow rules into counters.
    Telemetry(TelemetryArgs),
    /// Turn flow counters into multi-timescale attribute instances.
    Synthesize(SynthesizeArgs),
    /// Train a one-class clustering model for one device class.
    TrainOneclass(TrainOneclassArgs),
    /// Train a supervised baseline classifier.
    #[command(subcommand)]
    TrainSupervised(TrainSupervisedCmd),
    /// Predict labels for instances with a trained forest model.
    Classify(ClassifyArgs),
    /// Run the identity/anomaly phase machine over instances.
    Monitor(MonitorArgs),
    /// Compare predicted labels against ground truth.
    Evaluate(EvaluateArgs),
    /// Byte-entropy analysis of a payload file.
    Entropy(EntropyArgs),
    /// Rank instance attributes by information gain.
    RankAttributes(RankAttributesArgs),
    /// Generate a synthetic multi-device traffic fixture.
    GenFixture(GenFixtureArgs),
}

#[derive(Debug, Args)]
pub struct TelemetryArgs {
    /// Packet capture in .pkts.jsonl form.
    #[arg(long)]
    pub packets: PathBuf,
    /// Comma-separated device MACs to install rules for.
    #[arg(long, value_delimiter = ',', required = true)]
    pub devices: Vec<Mac>,
    /// Gateway MAC distinguishing remote from local traffic.
    #[arg(long)]
    pub gw: Mac,
    #[arg(short, long, value_name = "FLOWS_TSV")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Flow counters (.flows.tsv) from `telemetry`.
    #[arg(long)]
    pub flows: PathBuf,
    /// Timescale preset; overrides the config value.
    #[arg(long)]
    pub preset: Option<String>,
    /// Label instances per device, e.g. 02:00:00:00:00:00=camera.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(short, long, value_name = "INST_TSV")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainOneclassArgs {
    /// Labeled or unlabeled instances (.inst.tsv).
    #[arg(long)]
    pub instances: PathBuf,
    /// Device class to model; selects rows by label when labels exist.
    #[arg(long)]
    pub class: String,
    #[arg(short, long, value_name = "MODEL_JSON")]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum TrainSupervisedCmd {
    /// Naive Bayes Multinomial over a nominal event stream.
    Nbm(TrainNbmArgs),
    /// Random forest over quantitative instances.
    Forest(TrainForestArgs),
    /// Stage-0 NBMs (ports/domains/ciphers) feeding a stage-1 forest.
    TwoStage(TrainTwoStageArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EventKindArg {
    Domain,
    RemotePort,
    CipherSuite,
}

impl From<EventKindArg> for EventKind {
    fn from(k: EventKindArg) -> EventKind {
        match k {
            EventKindArg::Domain => EventKind::Domain,
            EventKindArg::RemotePort => EventKind::RemotePort,
            EventKindArg::CipherSuite => EventKind::CipherSuite,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainNbmArgs {
    /// Nominal events (.events.jsonl).
    #[arg(long)]
    pub events: PathBuf,
    /// Which event kind to learn from.
    #[arg(long, value_enum)]
    pub kind: EventKindArg,
    /// Per-device class labels, e.g. 02:00:00:00:00:00=camera.
    #[arg(long, value_delimiter = ',', required = true)]
    pub labels: Vec<String>,
    #[arg(short, long, value_name = "MODEL_JSON")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainForestArgs {
    /// Labeled instances (.inst.tsv).
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(short, long, value_name = "MODEL_JSON")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainTwoStageArgs {
    /// Labeled instances (.inst.tsv) providing quantitative attributes.
    #[arg(long)]
    pub instances: PathBuf,
    /// Nominal events (.events.jsonl) providing the three bags per device.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(short, long, value_name = "MODEL_JSON")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Forest model from `train-supervised forest`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(short, long, value_name = "PRED_TSV")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[arg(long)]
    pub instances: PathBuf,
    /// Directory of one-class model JSON files.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(short, long, value_name = "MONITOR_TSV")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions: TSV with device, window start, label columns.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground truth in the same layout (an .inst.tsv works directly).
    #[arg(long)]
    pub truth: PathBuf,
    /// Optional confusion-matrix TSV (row percentages).
    #[arg(long, value_name = "TSV")]
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    /// File whose bytes are analyzed.
    pub file: PathBuf,
    /// Also classify fixed-size chunks and report the verdict tallies.
    #[arg(long, value_name = "BYTES")]
    pub chunk: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RankAttributesArgs {
    /// Labeled instances (.inst.tsv).
    #[arg(long)]
    pub instances: PathBuf,
    /// Print only the best N attributes.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenFixtureArgs {
    /// Output directory (created if missing); writes fixture.pkts.jsonl and
    /// fixture.json.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub devices: usize,
    /// Simulated duration in minutes.
    #[arg(long, default_value_t = 20160)]
    pub minutes: i64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inject a flood into this device index's inbound remote flow.
    #[arg(long)]
    pub flood_device: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub flood_start: i64,
    #[arg(long, default_value_t = 0)]
    pub flood_minutes: i64,
    #[arg(long, default_value_t = 100)]
    pub flood_rate: u32,
    #[arg(long, default_value_t = 1200)]
    pub flood_length: u64,
}

/// Runs a parsed invocation; the return value is the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let config = Config::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Telemetry(a) => cmd_telemetry(a),
        Command::Synthesize(a) => cmd_synthesize(a, &config),
        Command::TrainOneclass(a) => cmd_train_oneclass(a, &config),
        Command::TrainSupervised(a) => cmd_train_supervised(a, &config),
        Command::Classify(a) => cmd_classify(a),
        Command::Monitor(a) => cmd_monitor(a, &config),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Entropy(a) => cmd_entropy(a),
        Command::RankAttributes(a) => cmd_rank_attributes(a),
        Command::GenFixture(a) => cmd_gen_fixture(a),
    }
}

fn cmd_telemetry(args: TelemetryArgs) -> Result<i32> {
    let (packets, report) = read_packets(&args.packets)?;
    if report.malformed > 0 {
        eprintln!(
            "warning: skipped {} of {} malformed lines",
            report.malformed, report.total_lines
        );
    }
    let mut rules = Vec::new();
    for dev in &args.devices {
        rules.extend(install_device_rules(*dev, args.gw)?);
    }
    let mut unmatched_sample = None;
    let export = export_counters(packets, &rules, 60.0, |p| {
        unmatched_sample.get_or_insert_with(|| format!("{} -> {}", p.src_mac, p.dst_mac));
    })?;
    write_counters(&export.series, &args.output)?;
    println!(
        "matched={} unmatched={} series={}",
        export.matched,
        export.unmatched,
        export.series.len()
    );
    if let Some(sample) = unmatched_sample {
        eprintln!("note: unmatched traffic present, e.g. {sample}");
    }
    Ok(EXIT_OK)
}

fn parse_label_map(entries: &[String]) -> Result<BTreeMap<Mac, String>> {
    let mut map = BTreeMap::new();
    for e in entries {
        let (mac, class) = e
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("label {e:?} is not MAC=CLASS")))?;
        let mac: Mac = mac
            .parse()
            .map_err(|_| Error::invalid(format!("bad MAC in label {e:?}")))?;
        map.insert(mac, class.to_string());
    }
    Ok(map)
}

fn cmd_synthesize(args: SynthesizeArgs, config: &Config) -> Result<i32> {
    let mut attrs = config.attributes.clone();
    if let Some(p) = args.preset {
        attrs.preset = p;
    }
    let series = read_counters(&args.flows)?;
    let mut dataset = synthesize(&series, &attrs.timescales()?)?;
    if attrs.downsample > 1 {
        dataset = downsample(&dataset, attrs.downsample)?;
    }
    let labels = parse_label_map(&args.labels)?;
    if !labels.is_empty() {
        for row in dataset.rows.iter_mut() {
            row.label = labels.get(&row.device).cloned();
        }
    }
    write_instances(&dataset, &args.output)?;
    println!(
        "instances={} attributes={}",
        dataset.rows.len(),
        dataset.attributes.len()
    );
    Ok(EXIT_OK)
}

fn cmd_train_oneclass(args: TrainOneclassArgs, config: &Config) -> Result<i32> {
    let dataset = read_instances(&args.instances)?;
    let has_labels = dataset.rows.iter().any(|r| r.label.is_some());
    let training = if has_labels {
        dataset.filter_label(&args.class)
    } else {
        dataset
    };
    if training.rows.is_empty() {
        return Err(Error::invalid(format!(
            "no instances labeled {:?} in {}",
            args.class,
            args.instances.display()
        )));
    }
    let model = train_device_model(&args.class, &training, &config.oneclass.to_core()?)?;
    model.save(&args.output)?;
    println!(
        "class={} instances={} k={} retained={}",
        model.device_class,
        training.rows.len(),
        model.k,
        model.projector.retained
    );
    Ok(EXIT_OK)
}

/// Aggregates one bag of words per device for a given event kind.
fn bags_per_device(path: &Path, kind: EventKind) -> Result<BTreeMap<Mac, BagOfWords>> {
    let (events, report) = read_events(path)?;
    if report.malformed > 0 {
        eprintln!(
            "warning: skipped {} of {} malformed lines",
            report.malformed, report.total_lines
        );
    }
    let mut bags: BTreeMap<Mac, BagOfWords> = BTreeMap::new();
    for e in events.into_iter().filter(|e| e.kind == kind) {
        bags.entry(e.device).or_default().add(e.value, e.count);
    }
    Ok(bags)
}

fn cmd_train_supervised(cmd: TrainSupervisedCmd, config: &Config) -> Result<i32> {
    match cmd {
        TrainSupervisedCmd::Nbm(args) => {
            let labels = parse_label_map(&args.labels)?;
            let bags = bags_per_device(&args.events, args.kind.into())?;
            let examples: Vec<(String, BagOfWords)> = bags
                .into_iter()
                .map(|(mac, bag)| {
                    labels
                        .get(&mac)
                        .map(|c| (c.clone(), bag))
                        .ok_or_else(|| Error::invalid(format!("device {mac} has no label")))
                })
                .collect::<Result<_>>()?;
            let model = nbm_train(&examples, None)?;
            write_json(&model, &args.output)?;
            println!(
                "classes={} vocabulary={}",
                model.classes.len(),
                model.vocabulary.len()
            );
        }
        TrainSupervisedCmd::Forest(args) => {
            let dataset = read_instances(&args.instances)?;
            let (features, labels) = labeled_features(&dataset)?;
            let model = forest_train(&features, &labels, &config.forest.to_core())?;
            write_json(&model, &args.output)?;
            println!("classes={} trees={}", model.classes.len(), model.config.trees);
        }
        TrainSupervisedCmd::TwoStage(args) => {
            let dataset = read_instances(&args.instances)?;
            let ports = bags_per_device(&args.events, EventKind::RemotePort)?;
            let domains = bags_per_device(&args.events, EventKind::Domain)?;
            let ciphers = bags_per_device(&args.events, EventKind::CipherSuite)?;
            let mut examples = Vec::with_capacity(dataset.rows.len());
            for row in &dataset.rows {
                let label = row.label.clone().ok_or_else(|| {
                    Error::invalid(format!("unlabeled instance for {}", row.device))
                })?;
                examples.push((
                    label,
                    TwoStageInstance {
                        ports: ports.get(&row.device).cloned().unwrap_or_default(),
                        domains: domains.get(&row.device).cloned().unwrap_or_default(),
                        ciphers: ciphers.get(&row.device).cloned().unwrap_or_default(),
                        quantitative: row.values.clone(),
                    },
                ));
            }
            let model = two_stage_train(&examples, &config.forest.to_core())?;
            write_json(&model, &args.output)?;
            println!("classes={}", model.classes.len());
        }
    }
    Ok(EXIT_OK)
}

fn labeled_features(dataset: &Dataset) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut features = Vec::with_capacity(dataset.rows.len());
    let mut labels = Vec::with_capacity(dataset.rows.len());
    for row in &dataset.rows {
        let label = row
            .label
            .clone()
            .ok_or_else(|| Error::invalid(format!("unlabeled instance for {}", row.device)))?;
        features.push(row.values.clone());
        labels.push(label);
    }
    Ok((features, labels))
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Model(format!("serialize failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Model(format!("{}: {e}", path.display())))
}

fn cmd_classify(args: ClassifyArgs) -> Result<i32> {
    let model: ForestModel = read_json(&args.model)?;
    let dataset = read_instances(&args.instances)?;
    let mut out = String::from("device\twindow_start\tpredicted\tconfidence\n");
    for row in &dataset.rows {
        let pred = model.predict(&row.values);
        out.push_str(&format!(
            "{}\t{:.16e}\t{}\t{:.4}\n",
            row.device, row.window_start, pred.class, pred.confidence
        ));
    }
    std::fs::write(&args.output, out).map_err(|e| Error::io(&args.output, e))?;
    println!("predicted={}", dataset.rows.len());
    Ok(EXIT_OK)
}

fn cmd_monitor(args: MonitorArgs, config: &Config) -> Result<i32> {
    let dataset = read_instances(&args.instances)?;
    let mut models = BTreeMap::new();
    let dir = std::fs::read_dir(&args.models).map_err(|e| Error::io(&args.models, e))?;
    for entry in dir {
        let entry = entry.map_err(|e| Error::io(&args.models, e))?;
        let path = entry.path();
        if path.extension().map_or(false, |e| e == "json") {
            let model = DeviceModel::load(&path)?;
            models.insert(model.device_class.clone(), model);
        }
    }
    if models.is_empty() {
        return Err(Error::invalid(format!(
            "no model .json files in {}",
            args.models.display()
        )));
    }
    let (rows, events) = run_monitor(&dataset, &models, config.monitor.to_policy()?)?;
    write_monitor_log(&rows, &args.output)?;
    println!("rows={} alarms={}", rows.len(), events.len());
    for e in &events {
        eprintln!(
            "alarm minute={} device={} intended={} score={:.4}",
            e.minute, e.device, e.intended_model, e.score
        );
    }
    Ok(if events.is_empty() { EXIT_OK } else { EXIT_ALARM })
}

/// Reads a label file: TSV whose first two columns key an instance (device,
/// window start) and whose third column is the label. A header line whose
/// first field is "device" is skipped, so `.inst.tsv` files work directly.
fn read_labels(path: &Path) -> Result<BTreeMap<(String, String), String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || (i == 0 && line.starts_with("device\t")) {
            continue;
        }
        let mut fields = line.split('\t');
        let (device, window, label) = match (fields.next(), fields.next(), fields.next()) {
            (Some(d), Some(w), Some(l)) if !l.is_empty() => (d, w, l),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: "expected device, window start, label columns".into(),
                })
            }
        };
        // normalize the window column so 0 and 0.0e0 compare equal
        let window = window
            .parse::<f64>()
            .map(|v| format!("{v}"))
            .unwrap_or_else(|_| window.to_string());
        map.insert((device.to_string(), window), label.to_string());
    }
    Ok(map)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<i32> {
    let pred = read_labels(&args.pred)?;
    let truth = read_labels(&args.truth)?;
    let mut pairs = Vec::new();
    for (key, actual) in &truth {
        if let Some(predicted) = pred.get(key) {
            pairs.push((actual.as_str(), predicted.as_str()));
        }
    }
    if pairs.is_empty() {
        return Err(Error::invalid(
            "no overlapping (device, window) keys between pred and truth",
        ));
    }
    let matrix = ConfusionMatrix::from_pairs(pairs.iter().copied());
    let per_class = matrix.per_class();
    for (class, m) in matrix.classes.iter().zip(&per_class) {
        println!(
            "class={class} precision={:.4} recall={:.4} f1={:.4}{}",
            m.precision,
            m.recall,
            m.f1,
            if m.zero_denominator { " zero_denominator" } else { "" }
        );
    }
    let w = matrix.weighted();
    println!(
        "weighted precision={:.4} recall={:.4} f1={:.4} accuracy={:.4} instances={}",
        w.precision,
        w.recall,
        w.f1,
        w.accuracy,
        pairs.len()
    );
    if let Some(path) = &args.confusion {
        matrix.write_tsv(path)?;
    }
    Ok(EXIT_OK)
}

fn cmd_entropy(args: EntropyArgs) -> Result<i32> {
    let data = std::fs::read(&args.file).map_err(|e| Error::io(&args.file, e))?;
    let report = classify_stream(&data, Thresholds::default())?;
    println!(
        "bytes={} entropy={:.4} printable={:.4} verdict={}",
        report.total_bytes, report.entropy, report.printable_fraction, report.verdict
    );
    if report.low_sample {
        eprintln!("warning: sample under 100 KB; entropy estimate is rough");
    }
    if let Some(note) = &report.note {
        eprintln!("note: {note}");
    }
    if let Some(chunk) = args.chunk {
        let (plain, encoded, encrypted) = chunk_verdicts(&data, chunk, Thresholds::default())?;
        println!(
            "chunks size={chunk} plaintext={plain} encoded={encoded} encrypted={encrypted}"
        );
    }
    Ok(EXIT_OK)
}

fn cmd_rank_attributes(args: RankAttributesArgs) -> Result<i32> {
    let dataset = read_instances(&args.instances)?;
    let ranked = rank_attributes(&dataset)?;
    let limit = args.top.unwrap_or(ranked.len());
    for (name, ig) in ranked.iter().take(limit) {
        println!("{name}\t{ig:.6}");
    }
    Ok(EXIT_OK)
}

fn cmd_gen_fixture(args: GenFixtureArgs) -> Result<i32> {
    let flood = match args.flood_device {
        Some(device_index) => {
            if args.flood_minutes <= 0 {
                return Err(Error::invalid(
                    "--flood-minutes must be positive when a flood device is set",
                ));
            }
            Some(FloodSpec {
                device_index,
                start_minute: args.flood_start,
                minutes: args.flood_minutes,
                packets_per_minute: args.flood_rate,
                packet_length: args.flood_length,
            })
        }
        None => None,
    };
    let spec = FixtureSpec {
        devices: args.devices,
        minutes: args.minutes,
        seed: args.seed,
        flood,
    };
    let fixture = fixture::generate(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let pkts_path = args.out.join("fixture.pkts.jsonl");
    iotmon_core::ingest::write_packets(&fixture.packets, &pkts_path)?;
    let manifest = FixtureManifest {
        gateway: fixture.gateway,
        devices: fixture.devices.clone(),
        spec,
    };
    write_json(&manifest, &args.out.join("fixture.json"))?;
    println!(
        "devices={} minutes={} packets={}",
        fixture.devices.len(),
        spec.minutes,
        fixture.packets.len()
    );
    Ok(EXIT_OK)
}
