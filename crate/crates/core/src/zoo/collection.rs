use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::checkpoint::{canonical_json, layer_entries, read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
use super::hyper::sample_hyperparams;
use super::record::{model_id, GenerationConfig, Status, ZooMeta, ZooRecord, ZOO_FORMAT_VERSION};
use super::train::{train_one, DEFAULT_BATCH_SIZE};
use crate::data::Dataset;
use crate::engine::{NetworkSpec, ParameterSet};
use crate::error::{Error, Result};
use crate::rng;

pub const META_FILE: &str = "zoo.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// A zoo directory: metadata plus an ordered list of records.
#[derive(Debug, Clone, PartialEq)]
pub struct ZooCollection {
    pub dir: PathBuf,
    pub meta: ZooMeta,
    pub records: Vec<ZooRecord>,
}

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub count: u64,
    pub sweep_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl BuildConfig {
    pub fn new(count: u64, sweep_seed: u64, epochs: usize) -> Self {
        BuildConfig {
            count,
            sweep_seed,
            epochs,
            batch_size: DEFAULT_BATCH_SIZE,
            threads: None,
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(format!("{}: {e}", path.display())))
}

/// Write via a temporary sibling so readers never see a half-written file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn manifest_text(records: &[ZooRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&canonical_json(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ZooRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Records from an interrupted run. A torn final line is dropped.
fn read_partial_manifest(path: &Path) -> Result<Vec<ZooRecord>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        match serde_json::from_str::<ZooRecord>(&line) {
            Ok(r) => out.push(r),
            Err(_) if line.trim().is_empty() => {}
            Err(_) => break,
        }
    }
    Ok(out)
}

/// No two records may share a configuration: each one was trained with a single seed.
pub fn check_one_seed_per_config(records: &[ZooRecord]) -> Result<()> {
    let mut seen: HashMap<[u64; 8], &str> = HashMap::new();
    for r in records {
        if let Some(other) = seen.insert(r.hyperparams.config_key(), &r.model_id) {
            return Err(Error::validation(format!(
                "{other} and {} share every hyperparameter except the seed",
                r.model_id
            )));
        }
    }
    Ok(())
}

fn check_records(records: &[ZooRecord]) -> Result<()> {
    let mut ids = std::collections::HashSet::new();
    for r in records {
        if !ids.insert(r.model_id.as_str()) {
            return Err(Error::validation(format!("duplicate model id {}", r.model_id)));
        }
        r.validate()?;
    }
    check_one_seed_per_config(records)
}

impl ZooCollection {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        Self::load_records(dir, MANIFEST_FILE)
    }

    /// Load a split written by [`ZooCollection::write_split`].
    pub fn load_split(dir: impl AsRef<Path>, name: &str) -> Result<Self> {
        Self::load_records(dir, &split_file(name))
    }

    fn load_records(dir: impl AsRef<Path>, file: &str) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let meta: ZooMeta = read_json(&dir.join(META_FILE))?;
        if meta.generation.format_version != ZOO_FORMAT_VERSION {
            return Err(Error::Version(format!(
                "zoo format {} (supported: {ZOO_FORMAT_VERSION})",
                meta.generation.format_version
            )));
        }
        let records = read_records(dir.join(file))?;
        check_records(&records)?;
        Ok(ZooCollection { dir, meta, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ok_records(&self) -> impl Iterator<Item = &ZooRecord> {
        self.records.iter().filter(|r| r.is_ok())
    }

    pub fn record(&self, model_id: &str) -> Option<&ZooRecord> {
        self.records.iter().find(|r| r.model_id == model_id)
    }

    pub fn checkpoint(&self, record: &ZooRecord) -> Result<Checkpoint> {
        let rel = record
            .checkpoint_path
            .as_ref()
            .ok_or_else(|| Error::validation(format!("{} has no checkpoint", record.model_id)))?;
        read_checkpoint(self.dir.join(rel))
    }

    pub fn params(&self, record: &ZooRecord) -> Result<ParameterSet<f32>> {
        Ok(self.checkpoint(record)?.params)
    }

    /// Keep only the given records (same metadata and directory).
    pub fn with_records(&self, records: Vec<ZooRecord>) -> Self {
        ZooCollection {
            dir: self.dir.clone(),
            meta: self.meta.clone(),
            records,
        }
    }

    /// Write the records as `split_<name>.jsonl` in the zoo directory.
    pub fn write_split(&self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(split_file(name));
        write_atomic(&path, manifest_text(&self.records)?.as_bytes())?;
        Ok(path)
    }
}

pub fn split_file(name: &str) -> String {
    format!("split_{name}.jsonl")
}

/// Partition the ok records into `train_count` training networks and the rest.
///
/// Both halves are sorted by model id; discarded records go to neither.
pub fn split_zoo(zoo: &ZooCollection, train_count: usize, split_seed: u64) -> Result<(ZooCollection, ZooCollection)> {
    let mut ok: Vec<ZooRecord> = zoo.ok_records().cloned().collect();
    if train_count >= ok.len() {
        return Err(Error::validation(format!(
            "train count {train_count} must be below the {} ok records",
            ok.len()
        )));
    }
    ok.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    ok.shuffle(&mut rng::stream(split_seed, &[rng::tag::SPLIT]));
    let mut test = ok.split_off(train_count);
    let mut train = ok;
    train.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    test.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    Ok((zoo.with_records(train), zoo.with_records(test)))
}

/// Sample `count` configurations, train them, and write the zoo to `out_dir`.
///
/// Reruns into the same directory skip models already in the manifest, so an
/// interrupted build can be resumed. The final manifest is ordered by model id
/// whatever the thread count.
pub fn build_zoo(
    base: &NetworkSpec,
    train: &Dataset,
    test: &Dataset,
    config: &BuildConfig,
    out_dir: impl AsRef<Path>,
) -> Result<ZooCollection> {
    if config.count == 0 {
        return Err(Error::validation("count must be at least 1"));
    }
    if config.epochs == 0 {
        return Err(Error::validation("epochs must be at least 1"));
    }
    base.plan()?;
    let dir = out_dir.as_ref().to_path_buf();
    let ckpt_dir = dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;

    let meta_path = dir.join(META_FILE);
    let mut meta = ZooMeta {
        dataset: train.name().to_string(),
        num_classes: train.num_classes(),
        architecture: base.clone(),
        generation: GenerationConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            count: config.count,
            sweep_seed: config.sweep_seed,
            format_version: ZOO_FORMAT_VERSION,
        },
    };
    if meta_path.exists() {
        let old: ZooMeta = read_json(&meta_path)?;
        let mut cmp = old.clone();
        cmp.generation.count = meta.generation.count;
        if cmp != meta {
            return Err(Error::validation(format!(
                "{} holds a zoo generated with different settings",
                dir.display()
            )));
        }
        meta.generation.count = meta.generation.count.max(old.generation.count);
    }
    write_atomic(&meta_path, serde_json::to_string_pretty(&meta)?.as_bytes())?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let mut done: BTreeMap<u64, ZooRecord> = BTreeMap::new();
    for r in read_partial_manifest(&manifest_path)? {
        let usable = match &r.checkpoint_path {
            Some(p) => dir.join(p).is_file(),
            None => r.status == Status::DiscardedInstability,
        };
        if usable {
            done.insert(r.index, r);
        }
    }
    // Rewrite so the append log starts from a clean set of lines.
    let existing: Vec<ZooRecord> = done.values().cloned().collect();
    write_atomic(&manifest_path, manifest_text(&existing)?.as_bytes())?;

    let pending: Vec<u64> = (0..config.count).filter(|k| !done.contains_key(k)).collect();
    let log = OpenOptions::new()
        .append(true)
        .open(&manifest_path)
        .map_err(|e| Error::io(&manifest_path, e))?;
    let log = Mutex::new(log);

    let run_one = |k: u64| -> Result<ZooRecord> {
        let hp = sample_hyperparams(config.sweep_seed, k);
        let id = model_id(k);
        let outcome = train_one(base, &hp, train, test, config.epochs, config.batch_size)?;
        let checkpoint_path = match &outcome.params {
            Some(params) => {
                let rel = format!("{CHECKPOINT_DIR}/{id}.wzoo");
                let header = CheckpointHeader {
                    model_id: id.clone(),
                    architecture: outcome.spec.clone(),
                    hyperparams: hp.clone(),
                    metrics: outcome.metrics,
                    seed: hp.seed,
                    layers: layer_entries(params),
                };
                let path = dir.join(&rel);
                let tmp = path.with_extension("tmp");
                write_checkpoint(&tmp, &header, params)?;
                fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
                Some(rel)
            }
            None => None,
        };
        let record = ZooRecord {
            model_id: id,
            index: k,
            checkpoint_path,
            hyperparams: hp,
            metrics: outcome.metrics,
            epochs_run: outcome.epochs_run,
            status: outcome.status,
        };
        let line = canonical_json(&record)? + "\n";
        let mut f = log.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(record)
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    let fresh: Vec<ZooRecord> = pool.install(|| pending.par_iter().map(|&k| run_one(k)).collect::<Result<_>>())?;
    drop(log);

    for r in fresh {
        done.insert(r.index, r);
    }
    let records: Vec<ZooRecord> = done.into_values().collect();
    check_records(&records)?;
    write_atomic(&manifest_path, manifest_text(&records)?.as_bytes())?;
    Ok(ZooCollection { dir, meta, records })
}
