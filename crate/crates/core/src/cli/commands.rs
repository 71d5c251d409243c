use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::datasets::{load_splits, synthetic_spec};
use crate::augment::{unpack_channels, AugmentBatch};
use crate::data::{gen_synthetic, pnm, write_image_dir, Dataset};
use crate::engine::{checkpoint, Mode, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::models::{LayerGraph, NetworkA};
use crate::trainer::{augmenter_name, parse_metrics_csv, run_training, MetricsRecord, TrainState, CSV_HEADER, NETWORK_B_NAME};

/// Record of one `train` invocation, written as `manifest.json` in the run
/// directory whether or not the run succeeded.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub run_dir: PathBuf,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub metrics_csv: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub image_dumps: Vec<PathBuf>,
    pub best_epoch: Option<usize>,
    pub best_validation_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub error: Option<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.txt";

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// `<out>/exp<id>_seed<seed>`
pub fn run_dir(out: &Path, config: &ExperimentConfig) -> PathBuf {
    out.join(format!("exp{}_seed{}", config.exp_id, config.seed))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

enum CsvLine {
    Epoch(String),
    Test(f64),
}

/// Streams metrics rows to disk on a separate thread as epochs finish.
struct MetricsWriter {
    tx: Option<mpsc::Sender<CsvLine>>,
    handle: Option<thread::JoinHandle<std::io::Result<()>>>,
    path: PathBuf,
}

impl MetricsWriter {
    fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let (tx, rx) = mpsc::channel::<CsvLine>();
        let handle = thread::spawn(move || {
            let mut w = BufWriter::new(file);
            writeln!(w, "{CSV_HEADER}")?;
            w.flush()?;
            for line in rx {
                match line {
                    CsvLine::Epoch(row) => writeln!(w, "{row}")?,
                    CsvLine::Test(acc) => writeln!(w, "test_accuracy,{acc}")?,
                }
                w.flush()?;
            }
            Ok(())
        });
        Ok(Self {
            tx: Some(tx),
            handle: Some(handle),
            path: path.to_path_buf(),
        })
    }

    fn send(&self, line: CsvLine) {
        if let Some(tx) = &self.tx {
            // A dead writer surfaces its error from `finish`.
            let _ = tx.send(line);
        }
    }

    fn finish(mut self) -> Result<()> {
        self.tx.take();
        let handle = self.handle.take().expect("joined once");
        match handle.join() {
            Ok(r) => r.map_err(|e| Error::io(&self.path, e)),
            Err(_) => Err(Error::InvalidArgument("metrics writer thread panicked".into())),
        }
    }
}

fn save_network(dir: &Path, name: &str, graph: &LayerGraph, store: &ParamStore, entries: Option<&[checkpoint::NamedTensor]>) -> Result<PathBuf> {
    let ckpt = dir.join(format!("{name}.saug"));
    let state;
    let entries = match entries {
        Some(e) => e,
        None => {
            state = graph.state(store);
            &state
        }
    };
    checkpoint::save(&ckpt, entries)?;
    write_file(&dir.join(format!("{name}.arch")), graph.descriptor())?;
    Ok(ckpt)
}

fn train_into(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join(CONFIG_FILE), config.serialize())?;
    let splits = load_splits(config)?;
    let csv = dir.join(METRICS_FILE);
    let writer = MetricsWriter::create(&csv)?;
    manifest.metrics_csv = Some(csv);
    let result = run_training(config, &splits, &mut |r: &MetricsRecord| writer.send(CsvLine::Epoch(r.csv_row())));
    if let Ok(state) = &result {
        writer.send(CsvLine::Test(state.test_accuracy));
    }
    writer.finish()?;
    let state: TrainState = result?;

    manifest.checkpoints.push(save_network(
        dir,
        NETWORK_B_NAME,
        &state.network_b.graph,
        &state.store,
        Some(&state.best_checkpoint),
    )?);
    let count = state.augmenters.len();
    for (i, a) in state.augmenters.iter().enumerate() {
        manifest
            .checkpoints
            .push(save_network(dir, &augmenter_name(i, count), &a.graph, &state.store, None)?);
    }
    manifest.best_epoch = state.best_epoch;
    manifest.best_validation_loss = state.best_epoch.map(|_| state.best_validation_loss);
    manifest.test_accuracy = Some(state.test_accuracy);
    Ok(())
}

/// Runs one experiment into `run_dir(out, config)`: `config.txt`,
/// `metrics.csv`, `network_b.saug` (best validation state), final augmenter
/// checkpoints and `manifest.json`. The manifest is written on failure too.
pub fn cmd_train(config: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let dir = run_dir(out, config);
    let mut manifest = RunManifest {
        config: config.clone(),
        run_dir: dir.clone(),
        started_at: now(),
        finished_at: 0.0,
        metrics_csv: None,
        checkpoints: Vec::new(),
        image_dumps: Vec::new(),
        best_epoch: None,
        best_validation_loss: None,
        test_accuracy: None,
        error: None,
    };
    let result = train_into(config, &dir, &mut manifest);
    if let Err(e) = &result {
        manifest.error = Some(e.to_string());
        manifest.test_accuracy = None;
    }
    manifest.finished_at = now();
    create_dir(&dir)?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST_FILE), json + "\n")?;
    result.map(|_| manifest)
}

/// Config files of a grid directory, in name order.
pub fn grid_configs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no config files in {}", dir.display())));
    }
    Ok(paths)
}

/// Checkpoint of a run's (first) augmenter.
pub fn default_augmenter_checkpoint(out: &Path, config: &ExperimentConfig) -> PathBuf {
    run_dir(out, config).join(format!("{}.saug", augmenter_name(0, config.num_net_a.max(1))))
}

fn class_of_augmenter(name: &str) -> Option<usize> {
    name.strip_prefix("network_a").and_then(|s| s.parse().ok())
}

/// Loads an augmenter from `<name>.saug` and the `<name>.arch` next to it.
pub fn load_augmenter(checkpoint_path: &Path, store: &mut ParamStore) -> Result<NetworkA> {
    if !checkpoint_path.is_file() {
        return Err(Error::InvalidArgument(format!(
            "augmenter checkpoint {} does not exist",
            checkpoint_path.display()
        )));
    }
    let arch_path = checkpoint_path.with_extension("arch");
    let text = std::fs::read_to_string(&arch_path).map_err(|e| Error::io(&arch_path, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut graph = LayerGraph::from_descriptor(&text, store, &mut rng)?;
    graph.load_state(store, &checkpoint::load(checkpoint_path)?)?;
    NetworkA::from_graph(graph)
}

fn dump_name(i: usize, source: Option<usize>, channels: usize) -> String {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    match source {
        None => format!("aug_0_0_{i}.{ext}"),
        Some(j) => format!("aug_0_0_{i}_src{j}.{ext}"),
    }
}

/// Writes `count` augmenter outputs with their `k` sources, drawn from the
/// training split: `aug_0_0_<i>` is the blend, `aug_0_0_<i>_src<j>` the
/// sources. A per-class augmenter (`network_a<c>`) only sees class `c`.
pub fn cmd_dump_aug(config: &ExperimentConfig, checkpoint_path: &Path, count: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut store = ParamStore::new();
    let mut net = load_augmenter(checkpoint_path, &mut store)?;
    let train = load_splits(config)?.train;
    let c = train.shape().channels;
    if net.in_channels() % c != 0 || net.out_channels() != c {
        return Err(Error::shape(
            "dump-aug",
            format!("augmenter maps {} channels to {}, images have {c}", net.in_channels(), net.out_channels()),
        ));
    }
    let k = net.in_channels() / c;
    let by_class = train.indices_by_class();
    let eligible: Vec<usize> = match class_of_augmenter(net.graph.name()) {
        Some(class) => vec![class],
        None => (0..by_class.len()).filter(|&c| by_class[c].len() > k).collect(),
    };
    if eligible.is_empty() {
        return Err(Error::Data(format!("no class has the {} samples a dump needs", k + 1)));
    }
    create_dir(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let classes: Vec<usize> = (0..count).map(|i| eligible[i % eligible.len()]).collect();
    let mut written = Vec::new();
    if classes.is_empty() {
        return Ok(written);
    }
    let batch = AugmentBatch::assemble(&train, &by_class, &classes, k, &mut rng)?;
    let mut tape = Tape::new(&store);
    let x = tape.input(batch.packed_input.clone());
    let y = net.forward(&mut tape, x, Mode::Infer, &mut rng)?;
    let blends = tape.value(y).clone();
    for i in 0..count {
        let path = out_dir.join(dump_name(i, None, c));
        pnm::write(&path, &blends.sample(i)?)?;
        written.push(path);
        let sources = unpack_channels(&batch.packed_input.sample(i)?, k)?;
        for (j, src) in sources.iter().enumerate() {
            let path = out_dir.join(dump_name(i, Some(j), c));
            pnm::write(&path, src)?;
            written.push(path);
        }
    }
    Ok(written)
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Line chart of training vs validation loss of Network B per epoch.
pub fn curves_svg(records: &[MetricsRecord]) -> String {
    let epochs: Vec<f64> = records.iter().map(|r| r.epoch as f64).collect();
    let train: Vec<f64> = records.iter().map(|r| r.train_loss_b).collect();
    let val: Vec<f64> = records.iter().map(|r| r.val_loss_b).collect();
    let (x0, x1) = min_max(&epochs);
    let (y0, y1) = min_max(train.iter().chain(&val).copied().collect::<Vec<_>>().as_slice());
    let sx = |x: f64| MARGIN + (x - x0) / span(x0, x1) * (SVG_W - 2.0 * MARGIN);
    let sy = |y: f64| SVG_H - MARGIN - (y - y0) / span(y0, y1) * (SVG_H - 2.0 * MARGIN);
    let points = |ys: &[f64]| {
        epochs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.3},{:.3}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let (left, right, top, bottom) = (MARGIN, SVG_W - MARGIN, MARGIN, SVG_H - MARGIN);
    let mut s = String::new();
    s += &format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n");
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += &format!("<line x1=\"{left}\" y1=\"{bottom}\" x2=\"{right}\" y2=\"{bottom}\" stroke=\"black\"/>\n");
    s += &format!("<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{bottom}\" stroke=\"black\"/>\n");
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">epoch</text>\n", SVG_W / 2.0, SVG_H - 12.0);
    s += &format!("<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">loss</text>\n", SVG_H / 2.0, SVG_H / 2.0);
    for (value, x, y, anchor) in [
        (x0, left, bottom + 16.0, "middle"),
        (x1, right, bottom + 16.0, "middle"),
        (y0, left - 4.0, bottom, "end"),
        (y1, left - 4.0, top + 4.0, "end"),
    ] {
        s += &format!("<text x=\"{x}\" y=\"{y}\" font-size=\"10\" text-anchor=\"{anchor}\">{value:.4}</text>\n");
    }
    s += &format!("<polyline id=\"train\" fill=\"none\" stroke=\"steelblue\" points=\"{}\"/>\n", points(&train));
    s += &format!("<polyline id=\"validation\" fill=\"none\" stroke=\"darkorange\" points=\"{}\"/>\n", points(&val));
    for (i, (label, colour)) in [("training loss", "steelblue"), ("validation loss", "darkorange")].iter().enumerate() {
        let y = top + 14.0 * i as f64;
        s += &format!("<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{colour}\"/>\n", right - 130.0, right - 110.0);
        s += &format!("<text x=\"{}\" y=\"{}\" font-size=\"11\">{label}</text>\n", right - 105.0, y + 4.0);
    }
    s += "</svg>\n";
    s
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn span(lo: f64, hi: f64) -> f64 {
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

/// Reads a metrics CSV and writes its loss curves as SVG to `out`.
pub fn cmd_export_curves(csv_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let (records, _) = parse_metrics_csv(&text).map_err(|e| match e {
        Error::Format { what, detail } => Error::Format {
            what,
            detail: format!("{}: {detail}", csv_path.display()),
        },
        other => other,
    })?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(out, curves_svg(&records))
}

/// Generates `per_class` synthetic images per class at the config's size and
/// noise level and writes them as a class-per-directory image tree.
pub fn cmd_gen_synthetic(config: &ExperimentConfig, per_class: usize, out: &Path) -> Result<Dataset> {
    let ds = gen_synthetic(per_class, &synthetic_spec(config), config.seed)?;
    write_image_dir(out, &ds)?;
    Ok(ds)
}
