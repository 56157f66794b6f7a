use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use log::{info, warn};
use racecrt::domain::{load_manifest, save_manifest, DatasetManifest, Observation};
use racecrt::evaluation::{
    fit_final_model, gen_synthetic, report_table, run_cv, write_synthetic_footage, CvDataset, CvOptions,
    EvalReport, FootageSpec, ReportFormat,
};
use racecrt::inference::{
    check_golden, embed_footage_single, load_backend, FootageEmbedding, Fusion, InstanceName, InstanceSpec,
    ModelBackend, ModelManifest, StubBackend, StubFunction,
};
use racecrt::preprocess::{
    build_background_plate, context_constrain, crop_to_tracks, fill_track_gaps, read_box_file, read_frame_dir,
    validate_tracks, write_frame_dir, PreprocessSpec,
};
use racecrt::regression::save_model;
use racecrt::store::{store_file_name, EmbeddingStore};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::{
    Cli, Command, Common, EvaluateArgs, ExtractArgs, FuseArgs, PreprocessArgs, ReportArgs, StubArg, SynthArgs,
};

const GOLDEN_TOLERANCE: f64 = 1e-4;
const DEFAULT_STUB_RESOLUTION: u32 = 32;

/// Flags layered over the config file.
struct Settings {
    common: Common,
    config: PipelineConfig,
}

impl Settings {
    fn out(&self) -> PathBuf {
        self.common
            .out
            .clone()
            .or_else(|| self.config.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn out_explicit(&self) -> bool {
        self.common.out.is_some() || self.config.out.is_some()
    }

    fn manifest_path(&self) -> Result<PathBuf, CliError> {
        if let Some(p) = self.common.manifest.clone().or_else(|| self.config.manifest.clone()) {
            return Ok(p);
        }
        let fallback = self.out().join("manifest.json");
        if fallback.is_file() {
            return Ok(fallback);
        }
        Err(CliError::Usage("no manifest: pass --manifest or set `manifest` in the config".into()))
    }

    fn instances(&self) -> Vec<InstanceName> {
        let mut names = self
            .common
            .instances
            .clone()
            .or_else(|| self.config.instances.clone())
            .unwrap_or_else(|| vec![InstanceName::XS]);
        names.sort();
        names.dedup();
        names
    }

    fn fusion(&self) -> Fusion {
        self.common.fusion.or(self.config.fusion).unwrap_or_default()
    }

    fn seed(&self) -> Option<u64> {
        self.common.seed.or(self.config.seed)
    }

    fn format(&self) -> ReportFormat {
        self.common.format.or(self.config.format).unwrap_or_default()
    }

    fn stub_backend(&self) -> bool {
        self.common.stub_backend || self.config.stub_backend.unwrap_or(false)
    }

    fn models(&self) -> Vec<PathBuf> {
        if self.common.models.is_empty() {
            self.config.models.clone()
        } else {
            self.common.models.clone()
        }
    }

    fn ensure_out(&self) -> Result<PathBuf, CliError> {
        let out = self.out();
        std::fs::create_dir_all(&out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
        Ok(out)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(jobs) = cli.common.jobs.or(config.jobs) {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let settings = Settings {
        common: cli.common,
        config,
    };
    match cli.command {
        Command::Preprocess(args) => cmd_preprocess(&settings, &args),
        Command::Extract(args) => cmd_extract(&settings, &args),
        Command::Fuse(args) => cmd_fuse(&settings, &args),
        Command::Evaluate(args) => cmd_evaluate(&settings, &args),
        Command::Report(args) => cmd_report(&settings, &args),
        Command::Synth(args) => cmd_synth(&settings, &args),
    }
}

fn read_manifest(path: &Path) -> Result<DatasetManifest, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("manifest {}: {e}", path.display())))?;
    load_manifest(BufReader::new(file)).map_err(|e| CliError::Input(format!("manifest {}: {e}", path.display())))
}

fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    save_manifest(manifest, BufWriter::new(file))?;
    Ok(())
}

fn base_dir(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn obs_label(obs: &Observation) -> String {
    format!("runner {} at recording point {}", obs.runner, obs.rp)
}

fn obs_stem(obs: &Observation) -> String {
    format!("{}_rp{}", obs.runner, obs.rp.index())
}

/// First error in manifest order, so diagnostics do not depend on scheduling.
fn first_error<T>(results: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    results.into_iter().collect()
}

fn cmd_preprocess(settings: &Settings, args: &PreprocessArgs) -> Result<(), CliError> {
    let manifest_path = settings.manifest_path()?;
    let manifest = read_manifest(&manifest_path)?;
    let base = base_dir(&manifest_path);
    let mut spec = settings.config.preprocess.unwrap_or_default();
    if let Some(tau) = args.tau {
        spec.tau = tau;
    }
    if let Some(plate) = args.plate {
        spec.plate_statistic = plate.into();
    }
    spec.validate()?;
    let out = settings.ensure_out()?.join("stilled");
    std::fs::create_dir_all(&out)?;

    let results: Vec<Result<Observation, CliError>> = manifest
        .observations
        .par_iter()
        .map(|obs| {
            preprocess_one(obs, &base, &out, &spec, args).map_err(|e| e.context(obs_label(obs)))
        })
        .collect();
    let observations = first_error(results)?;
    let stilled = DatasetManifest::new(manifest.race_start, manifest.recording_points.clone(), observations)?;
    write_manifest(&out.join("manifest.json"), &stilled)?;
    info!(
        "preprocessed {} observations, {} frames each, into {}",
        stilled.observations.len(),
        spec.tau,
        out.display()
    );
    Ok(())
}

fn preprocess_one(
    obs: &Observation,
    base: &Path,
    out: &Path,
    spec: &PreprocessSpec,
    args: &PreprocessArgs,
) -> Result<Observation, CliError> {
    let footage_dir = base.join(&obs.footage.path);
    let frames = read_frame_dir(&footage_dir).map_err(|e| CliError::from(e).context(footage_dir.display()))?;
    let tracks_path = base.join(&obs.tracks);
    if !tracks_path.is_file() {
        return Err(CliError::Input(format!("box file {} not found", tracks_path.display())));
    }
    let boxes = read_box_file(&tracks_path).map_err(|e| CliError::from(e).context(tracks_path.display()))?;
    let (w, h) = frames
        .first()
        .map(|f| f.dimensions())
        .ok_or_else(|| CliError::Input(format!("{}: no frames", footage_dir.display())))?;
    validate_tracks(&boxes, frames.len(), w, h).map_err(|e| CliError::from(e).context(tracks_path.display()))?;
    let boxes = if args.no_fill_gaps { boxes } else { fill_track_gaps(&boxes, frames.len()) };
    let plate = build_background_plate(&frames, &boxes, spec)?;
    let mut stilled = context_constrain(&frames, &boxes, &plate, spec)?;
    if args.crop {
        stilled = crop_to_tracks(&stilled, &boxes);
    }
    let stem = obs_stem(obs);
    let dir = out.join(&stem);
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    write_frame_dir(&dir, &stilled)?;
    let mut next = obs.clone();
    next.footage.path = PathBuf::from(stem);
    next.footage.frames = stilled.len() as u32;
    next.tracks = if tracks_path.is_absolute() {
        tracks_path
    } else {
        std::env::current_dir()?.join(tracks_path)
    };
    Ok(next)
}

fn backends(settings: &Settings, args: &ExtractArgs) -> Result<Vec<Box<dyn ModelBackend>>, CliError> {
    let wanted = settings.instances();
    if settings.stub_backend() {
        let function = match args.stub_function {
            Some(StubArg::MeanIntensity) => StubFunction::MeanIntensity,
            Some(StubArg::ChannelMeans) => StubFunction::ChannelMeans,
            None => settings.config.stub_function.unwrap_or(StubFunction::ChannelMeans),
        };
        let side = args
            .stub_resolution
            .or(settings.config.stub_resolution)
            .unwrap_or(DEFAULT_STUB_RESOLUTION);
        return Ok(wanted
            .into_iter()
            .map(|name| Box::new(StubBackend::new(InstanceSpec::new(name, side), function)) as Box<dyn ModelBackend>)
            .collect());
    }
    let paths = settings.models();
    if paths.is_empty() {
        return Err(CliError::Usage("pass --stub-backend or --models".into()));
    }
    let explicit = settings.common.instances.is_some() || settings.config.instances.is_some();
    let mut loaded = Vec::new();
    for path in paths {
        let manifest = ModelManifest::from_path(&path).map_err(|e| CliError::from(e).context(path.display()))?;
        if explicit && !wanted.contains(&manifest.instance) {
            continue;
        }
        let backend = load_backend(&manifest).map_err(|e| CliError::from(e).context(path.display()))?;
        if args.check_golden {
            match manifest.golden_paths() {
                Some((inputs, outputs)) => {
                    let report = check_golden(backend.as_ref(), &inputs, &outputs, GOLDEN_TOLERANCE)?;
                    if !report.passed() {
                        return Err(CliError::Pipeline(format!(
                            "{}: golden parity failed, max abs error {:.3e} over {} probes",
                            path.display(),
                            report.max_abs_error,
                            report.probes
                        )));
                    }
                    info!("{}: golden parity ok ({:.3e})", manifest.instance, report.max_abs_error);
                }
                None => warn!("{}: no golden vectors listed", path.display()),
            }
        }
        loaded.push(backend);
    }
    loaded.sort_by_key(|b| b.instance().name);
    let names: Vec<InstanceName> = loaded.iter().map(|b| b.instance().name).collect();
    if let Some(dup) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Usage(format!("instance {} given twice", dup[0])));
    }
    if loaded.is_empty() {
        return Err(CliError::Usage("no model matches --instances".into()));
    }
    Ok(loaded)
}

fn cmd_extract(settings: &Settings, args: &ExtractArgs) -> Result<(), CliError> {
    let manifest_path = settings.manifest_path()?;
    let manifest = read_manifest(&manifest_path)?;
    let base = base_dir(&manifest_path);
    let backends = backends(settings, args)?;
    let out = settings.ensure_out()?;

    let results: Vec<Result<Vec<(FootageEmbedding, usize)>, CliError>> = manifest
        .observations
        .par_iter()
        .map(|obs| {
            let dir = base.join(&obs.footage.path);
            let frames = read_frame_dir(&dir).map_err(|e| CliError::from(e).context(dir.display()))?;
            backends
                .iter()
                .map(|b| embed_footage_single(b.as_ref(), &frames).map_err(CliError::from))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.context(obs_label(obs)))
        })
        .collect();
    let per_obs = first_error(results)?;

    let mut stores = Vec::with_capacity(backends.len());
    for (b, backend) in backends.iter().enumerate() {
        let spec = *backend.instance();
        let mut store = EmbeddingStore::new(vec![spec], vec![backend.param_count()], Fusion::Single)?;
        let mut clip_counts = BTreeSet::new();
        for (obs, embeddings) in manifest.observations.iter().zip(&per_obs) {
            let (embedding, clips) = &embeddings[b];
            clip_counts.insert(*clips);
            store.insert(obs.runner.clone(), obs.rp, embedding, &[*clips as u32])?;
        }
        let path = out.join(store_file_name(&[spec.name], Fusion::Single));
        store.save(&path)?;
        let counts: Vec<String> = clip_counts.iter().map(|c| c.to_string()).collect();
        info!(
            "{}: {} clips per footage ({} frames, sampling rate {}), {} observations -> {}",
            spec.name,
            counts.join("/"),
            spec.frames_per_clip,
            spec.sampling_rate,
            store.len(),
            path.display()
        );
        stores.push(store);
    }
    write_fused(settings, &out, &stores)?;
    Ok(())
}

/// Writes the fused store when `--fusion` asks for one and several instances are present.
fn write_fused(settings: &Settings, out: &Path, stores: &[EmbeddingStore]) -> Result<(), CliError> {
    let fusion = settings.fusion();
    if fusion == Fusion::Single || stores.len() < 2 {
        return Ok(());
    }
    let refs: Vec<&EmbeddingStore> = stores.iter().collect();
    let fused = EmbeddingStore::fuse(&refs, fusion)?;
    let path = out.join(store_file_name(&fused.instance_names(), fusion));
    fused.save(&path)?;
    info!("{} store, dimension {} -> {}", fusion, fused.dim(), path.display());
    Ok(())
}

fn load_store(path: &Path) -> Result<EmbeddingStore, CliError> {
    EmbeddingStore::load(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn cmd_fuse(settings: &Settings, args: &FuseArgs) -> Result<(), CliError> {
    let fusion = settings.fusion();
    if fusion == Fusion::Single {
        return Err(CliError::Usage("fuse needs --fusion average or --fusion concat".into()));
    }
    let out = settings.ensure_out()?;
    let paths: Vec<PathBuf> = if args.stores.is_empty() {
        settings
            .instances()
            .into_iter()
            .map(|n| out.join(store_file_name(&[n], Fusion::Single)))
            .collect()
    } else {
        args.stores.clone()
    };
    if paths.len() < 2 {
        return Err(CliError::Input(format!(
            "{fusion} fusion needs at least two instance stores, got {}",
            paths.len()
        )));
    }
    let stores = paths.iter().map(|p| load_store(p)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&EmbeddingStore> = stores.iter().collect();
    let fused = EmbeddingStore::fuse(&refs, fusion)?;
    let path = out.join(store_file_name(&fused.instance_names(), fusion));
    fused.save(&path)?;
    info!("{} store of {} rows, dimension {} -> {}", fusion, fused.len(), fused.dim(), path.display());
    Ok(())
}

fn cv_options(settings: &Settings, args: &EvaluateArgs, seed: u64) -> CvOptions {
    let mut options = settings.config.cv.clone().unwrap_or_default();
    options.seed = seed;
    if let Some(r) = args.repetitions {
        options.repetitions = r;
    }
    if let Some(f) = args.folds {
        options.folds = f;
    }
    if let Some(f) = args.inner_folds {
        options.grid.inner_folds = f;
    }
    if let Some(n) = args.normalization {
        options.normalization = n.into();
    }
    if let Some(s) = args.scope {
        options.scope = s.into();
    }
    if args.no_stratify {
        options.stratify = false;
    }
    options
}

fn report_stem(store_path: &Path) -> String {
    let stem = store_path.file_stem().and_then(|s| s.to_str()).unwrap_or("store");
    stem.strip_prefix("embeddings_").unwrap_or(stem).to_string()
}

fn cmd_evaluate(settings: &Settings, args: &EvaluateArgs) -> Result<(), CliError> {
    let seed = settings
        .seed()
        .ok_or_else(|| CliError::Usage("evaluate needs --seed (or `seed` in the config)".into()))?;
    let manifest_path = settings.manifest_path()?;
    let manifest = read_manifest(&manifest_path)?;
    let out = settings.ensure_out()?;
    let store_path = match &args.store {
        Some(p) => p.clone(),
        None => out.join(store_file_name(&settings.instances(), settings.fusion())),
    };
    let store = load_store(&store_path)?;
    let options = cv_options(settings, args, seed);
    let dataset = CvDataset::assemble(&manifest, &store)?;
    let dropped = manifest.observations.len() - dataset.len();
    if dropped > 0 {
        warn!("{dropped} observations of runners missing a recording point are left out");
    }
    info!(
        "{}: {} observations, {} x {}-fold cross-validation",
        dataset.label(),
        dataset.len(),
        options.repetitions,
        options.folds
    );
    let report = run_cv(&dataset, &options)?;
    let report_path = out.join(format!("report_{}.json", report_stem(&store_path)));
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Pipeline(e.to_string()))?;
    json.push('\n');
    std::fs::write(&report_path, json)?;
    info!("report -> {}", report_path.display());

    if let Some(model_path) = &args.save_model {
        let (model, params, selection) = fit_final_model(&dataset, &options)?;
        save_model(model_path, &model, Some(params))?;
        info!(
            "model k={} {} {} on {} rows -> {}",
            selection.best.k,
            selection.best.metric,
            selection.best.weighting,
            model.len(),
            model_path.display()
        );
    }
    print!("{}", report_table(&[report], settings.format())?);
    Ok(())
}

fn cmd_report(settings: &Settings, args: &ReportArgs) -> Result<(), CliError> {
    let mut reports: Vec<EvalReport> = Vec::new();
    for path in &args.reports {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let parsed = if value.is_array() {
            serde_json::from_value::<Vec<EvalReport>>(value)
        } else {
            serde_json::from_value::<EvalReport>(value).map(|r| vec![r])
        };
        reports.extend(parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?);
    }
    let format = settings.format();
    let table = report_table(&reports, format)?;
    if settings.out_explicit() {
        let out = settings.ensure_out()?;
        let ext = match format {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        };
        let path = out.join(format!("table.{ext}"));
        std::fs::write(&path, &table)?;
        info!("table -> {}", path.display());
    }
    print!("{table}");
    Ok(())
}

fn cmd_synth(settings: &Settings, args: &SynthArgs) -> Result<(), CliError> {
    let mut spec = settings.config.synthetic.clone().unwrap_or_default();
    if let Some(seed) = settings.seed() {
        spec.seed = seed;
    }
    if settings.common.instances.is_some() || settings.config.instances.is_some() {
        spec.instances = settings.instances();
    }
    if let Some(r) = args.runners {
        spec.runners = r;
    }
    if let Some(p) = args.recording_points {
        spec.recording_points = p;
    }
    if let Some(f) = args.family {
        spec.family = f.into();
    }
    if let Some(s) = args.sigma {
        spec.noise_sigma = s;
    }
    if let Some(lo) = args.crt_low {
        spec.crt_range.0 = lo;
    }
    if let Some(hi) = args.crt_high {
        spec.crt_range.1 = hi;
    }
    if let Some(frames) = args.frames {
        spec.footage_frames = frames;
    }
    let (manifest, stores) = gen_synthetic(&spec)?;
    let out = settings.ensure_out()?;
    write_manifest(&out.join("manifest.json"), &manifest)?;
    for store in &stores {
        let path = out.join(store_file_name(&store.instance_names(), Fusion::Single));
        store.save(&path)?;
    }
    write_fused(settings, &out, &stores)?;
    if args.footage {
        let layout = FootageSpec {
            width: args.width,
            height: args.height,
            drop_every: args.drop_every,
        };
        write_synthetic_footage(&manifest, &out, &layout, spec.seed)?;
    }
    info!(
        "synthetic {:?} dataset: {} runners x {} recording points = {} observations, sigma {} -> {}",
        spec.family,
        spec.runners,
        spec.recording_points,
        manifest.observations.len(),
        spec.noise_sigma,
        out.display()
    );
    Ok(())
}

