use std::collections::{BTreeMap, HashSet};
use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use thiserror::Error;

use pvdefect::augment::{augment_dataset, file_stem_for, AugmentConfig};
use pvdefect::classifiers::{load_model, save_model, TrainParams, TrainedModel};
use pvdefect::deepfeat::{synthetic_embeddings, EmbeddingSet};
use pvdefect::eval::{
    parse_json_report, render_report, run_experiment_grid, stratified_split, ConfusionMatrix, DatasetEntry, GridConfig,
    LabeledDataset, MetricsRow, ReportFormat, Split,
};
use pvdefect::fusion::{decode_store, fuse_blocks, write_store, BlockKind, FeatureCombo, FeatureMatrix};
use pvdefect::handcrafted::{extract_with_bank, GaborBank, HandcraftedConfig};
use pvdefect::imagecore::{load_image, save_png};
use pvdefect::preprocess::{preprocess_pipeline, PreprocessConfig};
use pvdefect::synth::write_synthetic_corpus;
use pvdefect::ClassLabel;

use crate::args::*;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "ppm", "pgm"];

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or missing input paths.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

trait Context<T> {
    fn context(self, what: impl Display) -> Result<T>;
}

impl<T, E: Display> Context<T> for Result<T, E> {
    fn context(self, what: impl Display) -> Result<T> {
        self.map_err(|e| CliError::Runtime(format!("{what}: {e}")))
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Settings shared by every subcommand.
pub struct Globals {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Globals {
    fn jobs(&self) -> usize {
        self.jobs.unwrap_or(1)
    }
}

pub fn run(command: &Command, g: &Globals) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, g),
        Command::SynthImages(a) => synth_images(a, g),
        Command::Augment(a) => augment(a, g),
        Command::Preprocess(a) => preprocess(a, g),
        Command::Extract(a) => extract(a, g),
        Command::SynthEmbed(a) => synth_embed(a, g),
        Command::Fuse(a) => fuse(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a, g),
        Command::Evaluate(a) => evaluate(a, g),
        Command::Grid(a) => grid(a, g),
        Command::Report(a) => report(a),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("no such file: {}", path.display())))
    }
}

fn require_files<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    paths.into_iter().try_for_each(|p| require_file(p))
}

fn require_images(entries: &[DatasetEntry]) -> Result<()> {
    match entries.iter().find(|e| !e.path.is_file()) {
        Some(e) => Err(usage(format!("sample {}: no such file: {}", e.id, e.path.display()))),
        None => Ok(()),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    require_file(path)?;
    let bytes = fs::read(path).context(path.display())?;
    serde_json::from_slice(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_optional_json<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), |p| read_json(p))
}

fn read_manifest(path: &Path) -> Result<LabeledDataset> {
    require_file(path)?;
    LabeledDataset::read_manifest(path).context(path.display())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).context(dir.display()),
        _ => Ok(()),
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).context(path.display())
}

fn write_manifest(ds: &LabeledDataset, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    ds.write_manifest(path).context(path.display())
}

/// Runs `f` over `items` on `jobs` workers. Results keep input order and the
/// first failure in that order is reported, whatever the scheduling.
fn par_map<I: Sync, R: Send>(jobs: usize, items: &[I], f: impl Fn(&I) -> Result<R> + Sync) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("thread pool")?;
    let results: Vec<Result<R>> = pool.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

fn entries_in(ds: &LabeledDataset, split: SplitChoice) -> Vec<DatasetEntry> {
    ds.entries()
        .iter()
        .filter(|e| match split {
            SplitChoice::All => true,
            SplitChoice::Train => e.split == Split::Train,
            SplitChoice::Test => e.split == Split::Test,
        })
        .cloned()
        .collect()
}

fn ingest(a: &IngestArgs, g: &Globals) -> Result<()> {
    if !a.root.is_dir() {
        return Err(usage(format!("no such directory: {}", a.root.display())));
    }
    let mut class_dirs: Vec<PathBuf> = fs::read_dir(&a.root)
        .context(a.root.display())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    let mut entries = Vec::new();
    for dir in class_dirs {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let Some(label) = ClassLabel::from_dir_name(&name) else {
            warn!("skipping {}: not a known class directory", dir.display());
            continue;
        };
        let mut files: Vec<PathBuf> =
            fs::read_dir(&dir).context(dir.display())?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
        files.sort();
        for path in files {
            let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
            if !IMAGE_EXTENSIONS.contains(&ext.as_str()) {
                if matches!(ext.as_str(), "jpg" | "jpeg") {
                    warn!("skipping {}: convert JPEG files to PNG first", path.display());
                }
                continue;
            }
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            entries.push(DatasetEntry::new(format!("{}/{stem}", label.name()), path, label));
        }
    }
    if entries.is_empty() {
        return Err(CliError::Runtime(format!("no images found under {}", a.root.display())));
    }
    let mut ds = LabeledDataset::new(entries).context("ingest")?;
    if let Some(frac) = a.test_frac {
        ds = stratified_split(&ds, frac, g.seed.unwrap_or(0)).context("split")?;
    }
    for (label, n) in ds.class_counts() {
        info!("{label}: {n}");
    }
    write_manifest(&ds, &a.out)
}

fn synth_images(a: &SynthImagesArgs, g: &Globals) -> Result<()> {
    if a.per_class == 0 || a.size < 8 {
        return Err(usage("--per-class must be positive and --size at least 8"));
    }
    let ds = write_synthetic_corpus(&a.out_dir, a.per_class, a.size, g.seed.unwrap_or(0)).context(a.out_dir.display())?;
    write_manifest(&ds, &a.manifest)
}

fn augment(a: &AugmentArgs, g: &Globals) -> Result<()> {
    let mut cfg: AugmentConfig = read_optional_json(a.config.as_ref())?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let ds = read_manifest(&a.manifest)?;
    require_images(ds.entries())?;
    let plan = augment_dataset(&ds, &cfg, &a.out_dir).context("augment")?;
    fs::create_dir_all(&a.out_dir).context(a.out_dir.display())?;
    par_map(g.jobs(), &plan.variants, |v| {
        let img = load_image(&v.source).context(format_args!("sample {}", v.parent_id))?;
        let out = v.transform.apply(&img).context(format_args!("sample {}", v.id))?;
        save_png(&out, &v.target).context(format_args!("sample {}", v.id))
    })?;
    info!("{} -> {} images", ds.len(), plan.dataset.len());
    write_manifest(&plan.dataset, &a.out)
}

fn preprocess(a: &PreprocessArgs, g: &Globals) -> Result<()> {
    let mut cfg: PreprocessConfig = read_optional_json(a.config.as_ref())?;
    if let Some(size) = a.size {
        cfg.target_size = size;
    }
    cfg.enable_clahe &= !a.no_clahe;
    cfg.enable_gamma &= !a.no_gamma;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let ds = read_manifest(&a.manifest)?;
    require_images(ds.entries())?;
    let targets: Vec<PathBuf> = ds.entries().iter().map(|e| a.out_dir.join(format!("{}.png", file_stem_for(&e.id)))).collect();
    let mut seen = HashSet::new();
    if let Some(t) = targets.iter().find(|t| !seen.insert(*t)) {
        return Err(CliError::Runtime(format!("two samples map to the same output file {}", t.display())));
    }
    fs::create_dir_all(&a.out_dir).context(a.out_dir.display())?;
    let work: Vec<(&DatasetEntry, &PathBuf)> = ds.entries().iter().zip(&targets).collect();
    par_map(g.jobs(), &work, |(e, target)| {
        let img = load_image(&e.path).context(format_args!("sample {}", e.id))?;
        let out = preprocess_pipeline(&img, &cfg).context(format_args!("sample {}", e.id))?;
        save_png(&out, target).context(format_args!("sample {}", e.id))
    })?;
    let entries = ds.entries().iter().zip(targets).map(|(e, path)| DatasetEntry { path, ..e.clone() }).collect();
    let out = LabeledDataset::new(entries).context("preprocess")?;
    let cfg_json = serde_json::to_vec_pretty(&cfg).context("preprocess config")?;
    write_bytes(&a.out_dir.join("preprocess.json"), &cfg_json)?;
    write_manifest(&out, &a.out)
}

/// Handcrafted blocks for each `(id, path)`, optionally preprocessing first.
fn extract_matrix(
    items: &[(String, PathBuf)],
    kinds: &[BlockKind],
    cfg: &HandcraftedConfig,
    pre: Option<&PreprocessConfig>,
    jobs: usize,
) -> Result<FeatureMatrix<f64>> {
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if let Some((id, path)) = items.iter().find(|(_, p)| !p.is_file()) {
        return Err(usage(format!("sample {id}: no such file: {}", path.display())));
    }
    let bank = if kinds.contains(&BlockKind::Gabor) { Some(GaborBank::new(cfg).context("Gabor bank")?) } else { None };
    let vectors = par_map(jobs, items, |(id, path)| {
        let ctx = || format!("sample {id}");
        let mut img = load_image(path).context(ctx())?;
        if let Some(pre) = pre {
            img = preprocess_pipeline(&img, pre).context(ctx())?;
        }
        let blocks = extract_with_bank::<f64>(&img, kinds, cfg, bank.as_ref()).context(ctx())?;
        fuse_blocks(id.clone(), &blocks).context(ctx())
    })?;
    FeatureMatrix::from_vectors(vectors).context("feature matrix")
}

fn extract(a: &ExtractArgs, g: &Globals) -> Result<()> {
    let kinds = a.blocks.canonical();
    if kinds.contains(&BlockKind::Deep) {
        return Err(usage("DEEP features come from an embedding file, not from extract"));
    }
    let cfg: HandcraftedConfig = read_optional_json(a.config.as_ref())?;
    let ds = read_manifest(&a.manifest)?;
    let items: Vec<(String, PathBuf)> = ds.entries().iter().map(|e| (e.id.clone(), e.path.clone())).collect();
    let m = extract_matrix(&items, &kinds, &cfg, None, g.jobs())?;
    info!("{} samples x {} features", m.len(), m.dim());
    ensure_parent(&a.out)?;
    write_store(&m, &a.out).context(a.out.display())
}

fn synth_embed(a: &SynthEmbedArgs, g: &Globals) -> Result<()> {
    let ds = read_manifest(&a.manifest)?;
    let labels = ds.entries().iter().map(|e| (e.id.as_str(), e.label));
    let set: EmbeddingSet<f64> =
        synthetic_embeddings(labels, a.dim, g.seed.unwrap_or(0), a.separation).map_err(|e| usage(e.to_string()))?;
    ensure_parent(&a.out)?;
    set.write(&a.out).context(a.out.display())
}

enum Artifact {
    Store(FeatureMatrix<f64>),
    Embeddings(EmbeddingSet<f64>),
}

fn read_artifact(path: &Path) -> Result<Artifact> {
    let bytes = fs::read(path).context(path.display())?;
    match bytes.get(..4) {
        Some(b"PVFS") => decode_store(&bytes).map(Artifact::Store).context(path.display()),
        Some(b"PVEM") => EmbeddingSet::decode(&bytes).map(Artifact::Embeddings).context(path.display()),
        _ => Err(CliError::Runtime(format!("{}: neither a feature store nor an embedding file", path.display()))),
    }
}

/// Joins every input over `ids`, in that row order, with blocks in canonical order.
fn load_features(paths: &[PathBuf], ids: &[String]) -> Result<FeatureMatrix<f64>> {
    let mut by_kind: BTreeMap<BlockKind, (FeatureMatrix<f64>, &Path)> = BTreeMap::new();
    for p in paths {
        let m = match read_artifact(p)? {
            Artifact::Store(m) => m.subset(ids).context(p.display())?,
            Artifact::Embeddings(e) => e.to_matrix(ids).context(p.display())?,
        };
        for k in m.signature().kinds() {
            if let Some((_, first)) = by_kind.get(&k) {
                return Err(usage(format!("{k} features appear in both {} and {}", first.display(), p.display())));
            }
            by_kind.insert(k, (m.select(&[k]).context(p.display())?, p));
        }
    }
    let mut acc: Option<FeatureMatrix<f64>> = None;
    for (m, p) in by_kind.into_values() {
        acc = Some(match acc {
            None => m,
            Some(a) => a.join(&m).context(p.display())?,
        });
    }
    acc.ok_or_else(|| usage("no feature inputs given"))
}

fn fuse(a: &FuseArgs) -> Result<()> {
    require_files(&a.inputs)?;
    let ids: Vec<String> = match read_artifact(&a.inputs[0])? {
        Artifact::Store(m) => m.ids().to_vec(),
        Artifact::Embeddings(e) => e.iter().map(|(id, _)| id.to_string()).collect(),
    };
    let m = load_features(&a.inputs, &ids)?;
    ensure_parent(&a.out)?;
    write_store(&m, &a.out).context(a.out.display())
}

fn train(a: &TrainArgs) -> Result<()> {
    if a.inputs.features.is_empty() {
        return Err(usage("train needs --features"));
    }
    require_files(&a.inputs.features)?;
    let params: TrainParams = read_optional_json(a.params.as_ref())?;
    params.validate().map_err(|e| usage(e.to_string()))?;
    let ds = read_manifest(&a.manifest)?;
    let entries = if ds.entries().iter().any(|e| e.split != Split::Unassigned) {
        entries_in(&ds, SplitChoice::Train)
    } else {
        ds.entries().to_vec()
    };
    if entries.is_empty() {
        return Err(CliError::Runtime("no training entries in the manifest".into()));
    }
    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    let labels: Vec<ClassLabel> = entries.iter().map(|e| e.label).collect();
    let all = load_features(&a.inputs.features, &ids)?;
    let kinds = match &a.blocks {
        Some(c) => c.canonical(),
        None => all.signature().kinds().collect(),
    };
    let x = all.select(&kinds).context("features")?;

    let handcrafted = if kinds.iter().any(|k| k.is_handcrafted()) {
        let cfg: HandcraftedConfig = read_optional_json(a.handcrafted.as_ref())?;
        for &(k, dim) in x.signature().parts() {
            if let Some(expected) = cfg.dim(k) {
                if expected != dim {
                    return Err(usage(format!(
                        "{k} block has {dim} values but the handcrafted config yields {expected}; pass the config used by extract via --handcrafted"
                    )));
                }
            }
        }
        Some(cfg)
    } else {
        None
    };
    let preprocess = a.preprocess.as_ref().map(|p| read_json::<PreprocessConfig>(p)).transpose()?;

    let mut model = TrainedModel::fit(a.classifier, &x, &labels, &params, !a.no_standardize).context(format_args!(
        "training {} on {}",
        a.classifier,
        FeatureCombo::new(kinds.clone()).map(|c| c.to_string()).unwrap_or_default()
    ))?;
    model.meta.handcrafted = handcrafted;
    model.meta.preprocess = preprocess;
    info!("trained {} on {} samples x {} features", a.classifier, x.len(), x.dim());
    ensure_parent(&a.out)?;
    save_model(&model, &a.out).context(a.out.display())
}

/// Features for `items` in the layout `model` expects. Blocks missing from
/// `inputs` are extracted from the images when they are handcrafted.
fn model_features(
    model: &TrainedModel<f64>,
    items: &[(String, PathBuf)],
    inputs: &[PathBuf],
    jobs: usize,
) -> Result<FeatureMatrix<f64>> {
    let ids: Vec<String> = items.iter().map(|(id, _)| id.clone()).collect();
    let given = if inputs.is_empty() { None } else { Some(load_features(inputs, &ids)?) };
    let missing: Vec<BlockKind> =
        model.signature.kinds().filter(|k| given.as_ref().is_none_or(|m| !m.signature().contains(*k))).collect();
    if missing.contains(&BlockKind::Deep) {
        return Err(usage("the model uses DEEP features; pass an embedding file via --features"));
    }
    let extracted = if missing.is_empty() {
        None
    } else {
        let default_cfg;
        let cfg = match &model.meta.handcrafted {
            Some(c) => c,
            None => {
                default_cfg = HandcraftedConfig::default();
                &default_cfg
            }
        };
        Some(extract_matrix(items, &missing, cfg, model.meta.preprocess.as_ref(), jobs)?)
    };
    let joined = match (given, extracted) {
        (Some(a), Some(b)) => a.join(&b).context("features")?,
        (Some(m), None) | (None, Some(m)) => m,
        (None, None) => unreachable!("model signature is never empty"),
    };
    let kinds: Vec<BlockKind> = model.signature.kinds().collect();
    joined.select(&kinds).context("features")
}

fn load_trained(path: &Path) -> Result<TrainedModel<f64>> {
    require_file(path)?;
    load_model(path).context(path.display())
}

fn predict(a: &PredictArgs, g: &Globals) -> Result<()> {
    let model = load_trained(&a.model)?;
    require_files(&a.inputs.features)?;
    let (items, names): (Vec<(String, PathBuf)>, Vec<String>) = if let Some(image) = &a.image {
        require_file(image)?;
        let id = match &a.id {
            Some(id) => id.clone(),
            None => image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        (vec![(id, image.clone())], vec![image.display().to_string()])
    } else {
        let ds = read_manifest(a.manifest.as_ref().expect("clap requires --image or --manifest"))?;
        let items: Vec<(String, PathBuf)> = ds.entries().iter().map(|e| (e.id.clone(), e.path.clone())).collect();
        let names = items.iter().map(|(id, _)| id.clone()).collect();
        (items, names)
    };
    let x = model_features(&model, &items, &a.inputs.features, g.jobs())?;
    let preds = model.predict_matrix(&x).context("predict")?;
    let mut out = String::new();
    for (name, p) in names.iter().zip(&preds) {
        out.push_str(&format!("{name},{},{:.4}\n", p.label, p.score));
    }
    match &a.out {
        Some(path) => write_bytes(path, out.as_bytes()),
        None => std::io::stdout().write_all(out.as_bytes()).context("stdout"),
    }
}

fn resolve_format(format: Option<ReportFormat>, out: Option<&Path>) -> Result<ReportFormat> {
    if let Some(f) = format {
        return Ok(f);
    }
    match out.and_then(|p| p.extension()) {
        None => Ok(ReportFormat::Csv),
        Some(ext) => ReportFormat::from_extension(&ext.to_string_lossy())
            .ok_or_else(|| usage(format!("cannot tell the report format from {:?}; pass --format", ext))),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_bytes(path, bytes),
        None => std::io::stdout().write_all(bytes).context("stdout"),
    }
}

fn evaluate(a: &EvaluateArgs, g: &Globals) -> Result<()> {
    let format = resolve_format(a.format, a.out.as_deref())?;
    let model = load_trained(&a.model)?;
    require_files(&a.inputs.features)?;
    let ds = read_manifest(&a.manifest)?;
    let split =
        a.split.unwrap_or(if ds.entries().iter().any(|e| e.split == Split::Test) { SplitChoice::Test } else { SplitChoice::All });
    let entries = entries_in(&ds, split);
    if entries.is_empty() {
        return Err(CliError::Runtime(format!("no {split:?} entries in the manifest").to_lowercase()));
    }
    let items: Vec<(String, PathBuf)> = entries.iter().map(|e| (e.id.clone(), e.path.clone())).collect();
    let x = model_features(&model, &items, &a.inputs.features, g.jobs())?;
    let truth: Vec<ClassLabel> = entries.iter().map(|e| e.label).collect();
    let pred: Vec<ClassLabel> = model.predict_matrix(&x).context("predict")?.into_iter().map(|p| p.label).collect();
    let cm = ConfusionMatrix::from_labels(&truth, &pred).context("confusion matrix")?;
    let combo = FeatureCombo::new(model.signature.kinds().collect()).context("model signature")?;
    let row = MetricsRow::from_confusion(combo, model.kind, cm, a.averaging.into()).context("metrics")?;
    let bytes = render_report(&[row], format, a.averaging.into()).context("report")?;
    emit(a.out.as_deref(), &bytes)
}

fn grid(a: &GridArgs, g: &Globals) -> Result<()> {
    let format = resolve_format(a.format, Some(&a.out))?;
    let mut cfg: GridConfig = read_json(&a.config)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = g.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let base = a.config.parent().unwrap_or(Path::new(""));
    let manifest = match (&a.manifest, &cfg.paths.manifest) {
        (Some(m), _) => m.clone(),
        (None, Some(m)) => base.join(m),
        (None, None) => return Err(usage("grid needs a manifest (--manifest or paths.manifest)")),
    };
    let features: Vec<PathBuf> = if a.features.is_empty() {
        cfg.paths.features.iter().chain(&cfg.paths.embeddings).map(|p| base.join(p)).collect()
    } else {
        a.features.clone()
    };
    if features.is_empty() {
        return Err(usage("grid needs features (--features or paths.features / paths.embeddings)"));
    }
    require_files(&features)?;
    let ds = read_manifest(&manifest)?;
    let ids: Vec<String> = ds.entries().iter().map(|e| e.id.clone()).collect();
    let x = load_features(&features, &ids)?;
    info!("grid: {} cells over {} samples x {} features", cfg.cells().len(), x.len(), x.dim());
    let rows = run_experiment_grid(&cfg, &ds, &x).context("grid")?;
    let bytes = render_report(&rows, format, cfg.averaging).context("report")?;
    write_bytes(&a.out, &bytes)?;
    let failed: BTreeMap<String, &str> = rows
        .iter()
        .filter_map(|r| r.failed.as_deref().map(|why| (format!("{} / {}", r.feature_combo, r.classifier), why)))
        .collect();
    if failed.is_empty() {
        return Ok(());
    }
    for (cell, why) in &failed {
        eprintln!("cell {cell} failed: {why}");
    }
    Err(CliError::Runtime(format!("{} of {} cells failed", failed.len(), rows.len())))
}

fn report(a: &ReportArgs) -> Result<()> {
    let format = resolve_format(a.format, a.out.as_deref())?;
    require_file(&a.input)?;
    let bytes = fs::read(&a.input).context(a.input.display())?;
    let (averaging, rows) = parse_json_report(&bytes).context(a.input.display())?;
    let out = render_report(&rows, format, averaging).context("report")?;
    emit(a.out.as_deref(), &out)
}
