use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use weightzoo::data::{gen_synthetic, load_idx_dir, Dataset, SyntheticSpec};
use weightzoo::engine::{Activation, InitKind, NetworkSpec, OptimizerKind};
use weightzoo::estimators::{
    feature_importance, fit, random_search, EstimatorConfig, EstimatorKind, EstimatorModel, ForestConfig, GbmConfig,
    NnConfig, DEFAULT_FOREST_TREES, DEFAULT_NN_EPOCHS,
};
use weightzoo::features::{encode_hyperparams, featurize_zoo, stat_block, FeatureKind, FeatureTable, HYPERPARAM_NAMES};
use weightzoo::metrics::{evaluate, invariance_probe, transfer_matrix, ProbeKind, ProbeModification};
use weightzoo::zoo::{build_zoo, split_zoo, BuildConfig, ZooCollection};
use weightzoo::{Error, Result};

use crate::{
    Arch, Command, EvalArgs, FeaturizeArgs, FitArgs, ImportanceArgs, ProbeArgs, ReportArgs, RunConfig, SearchArgs,
    TransferArgs, ZooCommand, ZooGenArgs, ZooSplitArgs,
};

/// File written next to a zoo's manifest with the generating command.
const ZOO_RUN_FILE: &str = "run.json";

pub fn dispatch(command: &Command, run: &RunConfig, threads: Option<usize>) -> Result<()> {
    match command {
        Command::Zoo(ZooCommand::Gen(a)) => zoo_gen(a, run, threads),
        Command::Zoo(ZooCommand::Split(a)) => zoo_split(a),
        Command::Featurize(a) => featurize(a, run),
        Command::Fit(a) => fit_cmd(a, run),
        Command::Search(a) => search(a, run),
        Command::Eval(a) => eval(a, run),
        Command::Transfer(a) => transfer(a, run),
        Command::Probe(a) => probe(a, run),
        Command::Importance(a) => importance(a, run),
        Command::Report(a) => report(a, run),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    // Round-tripping through `Value` sorts object keys.
    let v = serde_json::to_value(value)?;
    write_file(path, &(serde_json::to_string_pretty(&v)? + "\n"))
}

/// `DIR` or `DIR#SPLIT`.
fn load_zoo(spec: &str) -> Result<ZooCollection> {
    match spec.rsplit_once('#') {
        Some((dir, split)) => ZooCollection::load_split(dir, split),
        None => ZooCollection::load(spec),
    }
}

fn ok_only(zoo: ZooCollection) -> ZooCollection {
    let ok = zoo.ok_records().cloned().collect();
    zoo.with_records(ok)
}

fn load_datasets(a: &ZooGenArgs) -> Result<(Dataset, Dataset)> {
    let (train, test) = if let Some(seed) = a.dataset.strip_prefix("synthetic") {
        let seed: u64 = match seed.strip_prefix(':') {
            Some(s) => s.parse().map_err(|_| invalid(format!("bad synthetic seed {s:?}")))?,
            None if seed.is_empty() => 0,
            None => return Err(invalid(format!("unknown dataset {:?}", a.dataset))),
        };
        let per_class = |n: usize| (n / a.classes).max(1);
        let mut spec = SyntheticSpec::new(a.classes, per_class(a.train_images.unwrap_or(5000)), a.image_size, seed);
        spec.test_per_class = per_class(a.test_images.unwrap_or(2000));
        if let Some(noise) = a.noise {
            spec.noise = noise;
        }
        return gen_synthetic(&spec);
    } else {
        load_idx_dir(&a.dataset, a.classes)?
    };
    let train = match a.train_images {
        Some(n) => train.head(n)?,
        None => train,
    };
    let test = match a.test_images {
        Some(n) => test.head(n)?,
        None => test,
    };
    Ok((train, test))
}

fn zoo_gen(a: &ZooGenArgs, run: &RunConfig, threads: Option<usize>) -> Result<()> {
    let (train, test) = load_datasets(a)?;
    let (h, w) = (train.height(), train.width());
    let base = match a.arch {
        Arch::Cnn => NetworkSpec::small_cnn((h, w, 1), train.num_classes(), Activation::Relu, 0.0),
        Arch::Mlp => NetworkSpec::mlp(h * w, &[8, 8], train.num_classes(), Activation::Relu, 0.0),
    };
    let mut cfg = BuildConfig::new(
        a.count.unwrap_or(a.preset.count()),
        a.sweep_seed,
        a.epochs.unwrap_or(a.preset.epochs()),
    );
    cfg.batch_size = a.batch_size;
    cfg.threads = threads;
    let zoo = build_zoo(&base, &train, &test, &cfg, &a.out)?;
    write_json(&a.out.join(ZOO_RUN_FILE), &run.to_value())?;
    let ok = zoo.ok_records().count();
    println!(
        "zoo {}: {} networks ({ok} ok, {} discarded) on {}",
        a.out.display(),
        zoo.len(),
        zoo.len() - ok,
        zoo.meta.dataset
    );
    Ok(())
}

fn zoo_split(a: &ZooSplitArgs) -> Result<()> {
    let [first, second] = a.names.as_slice() else {
        return Err(invalid("--names takes exactly two split names"));
    };
    if first == second {
        return Err(invalid("split names must differ"));
    }
    let zoo = ZooCollection::load(&a.zoo)?;
    let (x, y) = split_zoo(&zoo, a.train_count, a.seed)?;
    let px = x.write_split(first)?;
    let py = y.write_split(second)?;
    println!("{}: {} networks; {}: {} networks", px.display(), x.len(), py.display(), y.len());
    Ok(())
}

fn featurize(a: &FeaturizeArgs, run: &RunConfig) -> Result<()> {
    let kind: FeatureKind = a.kind.parse()?;
    let zoo = ok_only(load_zoo(&a.zoo)?);
    let mut table = featurize_zoo(&zoo, &kind)?;
    table.set_meta("zoo", &a.zoo);
    table.set_meta("run", run.to_line());
    table.write_csv(&a.out)?;
    println!(
        "{}: {} rows, {} features ({kind})",
        a.out.display(),
        table.n_rows(),
        table.n_features()
    );
    Ok(())
}

fn default_nn(hidden_layers: usize, seed: u64) -> NnConfig {
    NnConfig {
        hidden_layers,
        units: if hidden_layers > 0 { 256 } else { 0 },
        dropout: 0.0,
        l2: 1e-6,
        learning_rate: 1e-2,
        optimizer: OptimizerKind::Adam,
        batch_size: 64,
        init_type: InitKind::XavierNormal,
        init_variance: 1e-2,
        epochs: DEFAULT_NN_EPOCHS,
        seed,
    }
}

fn default_config(kind: EstimatorKind, seed: u64) -> EstimatorConfig {
    match kind {
        EstimatorKind::Gbm => EstimatorConfig::Gbm(GbmConfig {
            seed,
            ..GbmConfig::default()
        }),
        EstimatorKind::RandomForest => EstimatorConfig::RandomForest(ForestConfig::new(DEFAULT_FOREST_TREES, seed)),
        EstimatorKind::LogitLinear => EstimatorConfig::LogitLinear(default_nn(0, seed)),
        EstimatorKind::Dnn => EstimatorConfig::Dnn(default_nn(3, seed)),
    }
}

fn annotate(model: &mut EstimatorModel, table: &FeatureTable, run: &RunConfig) {
    if let Some(d) = table.meta("dataset") {
        model.provenance.insert("dataset".into(), d.to_string());
    }
    model.provenance.insert("run".into(), run.to_line());
}

fn fit_cmd(a: &FitArgs, run: &RunConfig) -> Result<()> {
    let kind: EstimatorKind = a.estimator.parse()?;
    let table = FeatureTable::read_csv(&a.features)?;
    let config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let params: serde_json::Value = serde_json::from_str(&text)?;
            let c: EstimatorConfig = serde_json::from_value(json!({ "kind": kind.name(), "params": params }))?;
            c
        }
        None => default_config(kind, a.seed),
    };
    let mut model = fit(&table, &config)?;
    annotate(&mut model, &table, run);
    model.save(&a.out)?;
    println!("{}: {kind} on {} rows", a.out.display(), table.n_rows());
    Ok(())
}

fn search(a: &SearchArgs, run: &RunConfig) -> Result<()> {
    let kind: EstimatorKind = a.estimator.parse()?;
    let table = FeatureTable::read_csv(&a.features)?;
    let budget = a.budget.unwrap_or(a.preset.budget());
    let (mut model, report) = random_search(&table, kind, budget, a.folds, a.seed)?;
    annotate(&mut model, &table, run);
    model.save(&a.out)?;
    let report_path = a.report.clone().unwrap_or_else(|| a.out.with_extension("cv.json"));
    write_json(&report_path, &json!({ "run": run.to_value(), "report": report }))?;
    let best = report.best.score.as_ref().map_or(f64::NAN, |s| s.mean_mse);
    let failed = report.evaluated.iter().filter(|o| o.score.is_none()).count();
    println!(
        "{}: {kind}, best of {} configurations is #{} (cv mse {best:.6}, {failed} unstable)",
        a.out.display(),
        report.evaluated.len(),
        report.best_index
    );
    Ok(())
}

fn eval(a: &EvalArgs, run: &RunConfig) -> Result<()> {
    let model = EstimatorModel::load(&a.model)?;
    let table = FeatureTable::read_csv(&a.features)?;
    let mut report = evaluate(&model, &table)?;
    report.provenance.insert("run".into(), run.to_line());
    report.write_json(&a.out)?;
    if let Some(path) = &a.scatter {
        report.write_scatter_csv(path)?;
    }
    println!(
        "{}: n={} mse={:.6} mad={:.6} r2={:.4} tau={:.4}",
        a.out.display(),
        report.n,
        report.mse,
        report.mad,
        report.r2,
        report.kendall_tau
    );
    Ok(())
}

fn transfer(a: &TransferArgs, run: &RunConfig) -> Result<()> {
    let models = a.models.iter().map(EstimatorModel::load).collect::<Result<Vec<_>>>()?;
    let tables: Vec<FeatureTable> = if a.zoos.is_empty() {
        a.features.iter().map(FeatureTable::read_csv).collect::<Result<_>>()?
    } else {
        let kind = &models[0].feature_kind;
        a.zoos
            .iter()
            .map(|z| {
                let mut t = featurize_zoo(&ok_only(load_zoo(z)?), kind)?;
                // Label by the argument so two splits of one dataset stay apart.
                t.set_meta("dataset", z.as_str());
                Ok(t)
            })
            .collect::<Result<_>>()?
    };
    let matrix = transfer_matrix(&models, &tables)?;
    let model_files: Vec<String> = a.models.iter().map(|p| p.display().to_string()).collect();
    write_json(
        &a.out,
        &json!({ "run": run.to_value(), "model_files": model_files, "matrix": matrix }),
    )?;
    println!("{}: tau", a.out.display());
    for (name, row) in model_files.iter().zip(&matrix.tau) {
        let cells: Vec<String> = row.iter().map(|t| format!("{t:+.4}")).collect();
        println!("  {name}: {}", cells.join(" "));
    }
    Ok(())
}

/// The permutation variants of the probe table, then identity and scalings.
fn probe_set(factors: &[f64], seed: u64) -> Vec<ProbeModification> {
    let kinds = [
        ProbeKind::PermuteConvLayers,
        ProbeKind::PermuteFinalLayer,
        ProbeKind::PermuteAllLayers,
        ProbeKind::GlobalPermute,
    ];
    let mut mods = Vec::new();
    for (i, k) in kinds.into_iter().enumerate() {
        for (j, mix) in [false, true].into_iter().enumerate() {
            let s = weightzoo::rng::derive_seed(seed, &[i as u64, j as u64]);
            mods.push(ProbeModification::permute(k, mix, s));
        }
    }
    mods.push(ProbeModification::identity());
    mods.extend(factors.iter().map(|&f| ProbeModification::scale(f)));
    mods
}

fn probe(a: &ProbeArgs, run: &RunConfig) -> Result<()> {
    let model = EstimatorModel::load(&a.model)?;
    let zoo = load_zoo(&a.zoo)?;
    let mods = probe_set(&a.factors, a.seed);
    let results = invariance_probe(&model, &zoo, &mods, a.samples, a.seed)?;
    write_json(&a.out, &json!({ "run": run.to_value(), "results": results }))?;
    println!("{}:", a.out.display());
    for r in &results {
        println!("  {:<36} mad={:.6}", r.label, r.mad);
    }
    Ok(())
}

fn importance(a: &ImportanceArgs, run: &RunConfig) -> Result<()> {
    let model = EstimatorModel::load(&a.model)?;
    let mut counts = feature_importance(&model)?;
    // Most used first; ties keep column order.
    counts.sort_by_key(|c| std::cmp::Reverse(c.1));
    let mut out = String::new();
    let _ = writeln!(out, "# run: {}", run.to_line());
    out.push_str("feature,splits\n");
    for (name, c) in &counts {
        let _ = writeln!(out, "{name},{c}");
    }
    write_file(&a.out, &out)?;
    println!("{}: {} features", a.out.display(), counts.len());
    for (name, c) in counts.iter().take(a.top) {
        println!("  {name:<24} {c}");
    }
    Ok(())
}

fn report(a: &ReportArgs, run: &RunConfig) -> Result<()> {
    let zoo = load_zoo(&a.zoo)?;
    let ok = ok_only(zoo.clone());
    let out: PathBuf = a.out.clone();

    let mut acc = String::from("model_id,status");
    for n in HYPERPARAM_NAMES {
        acc.push(',');
        acc.push_str(n);
    }
    acc.push_str(",train_accuracy,test_accuracy\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in &zoo.records {
        let status = serde_json::to_value(r.status)?;
        let _ = write!(acc, "{},{}", r.model_id, status.as_str().unwrap_or(""));
        for v in encode_hyperparams(&r.hyperparams) {
            let _ = write!(acc, ",{v:e}");
        }
        let _ = writeln!(acc, ",{},{}", opt(r.metrics.train_accuracy), opt(r.metrics.test_accuracy));
    }
    write_file(&out.join("accuracies.csv"), &acc)?;

    let accuracies: Vec<f64> = ok.records.iter().filter_map(|r| r.test_accuracy()).collect();
    let stats = if accuracies.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::to_value(stat_block(&accuracies)?)?
    };
    let summary = json!({
        "run": run.to_value(),
        "dataset": zoo.meta.dataset,
        "networks": zoo.len(),
        "ok": ok.len(),
        "discarded": zoo.len() - ok.len(),
        "test_accuracy": stats,
    });
    write_json(&out.join("summary.json"), &summary)?;

    if !ok.is_empty() {
        let mut bias = featurize_zoo(&ok, &FeatureKind::BiasRange)?;
        bias.set_meta("run", run.to_line());
        bias.write_csv(out.join("bias_range.csv"))?;
    }
    println!(
        "{}: {} networks, {} ok, {} discarded",
        out.display(),
        zoo.len(),
        ok.len(),
        zoo.len() - ok.len()
    );
    Ok(())
}
