use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use sponsorscope_core::agreement::{ReportManifest, SponsoredRate};
use sponsorscope_core::corpus::{
    build_annotation_batch, ingest_posts, read_id_list, read_weak_labeled, strip_disclosures, temporal_split,
    undersample, weak_label, write_posts, write_split_manifests, write_weak_labeled, AnnotationBatch, Corpus,
    Post, SplitSpec, WeakLabeledPost,
};
use sponsorscope_core::detector::{evaluate, export_predictions, Prediction, TrainedDetector, TruthRecord};
use sponsorscope_core::explainer::{
    explain_all, ChatClient, CompletionCache, Explanation, ExplanationSource, API_KEY_ENV,
};
use sponsorscope_core::service::{
    batch_from_corpus, replay_report, AnnotationService, ExportFilter, ExportManifest, Expertise, Setup,
};
use sponsorscope_core::Label;

use crate::config::Config;
use crate::layout::{Layout, DISCLOSED_FILE, LABELS_FILE, MANIFEST_FILE, MODEL_LABELS_FILE};

pub struct Ctx {
    pub layout: Layout,
    pub config: Config,
    pub seed: u64,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {} (run the earlier pipeline step?)", path.display()))?,
    ))
}

fn load_corpus(ctx: &Ctx) -> anyhow::Result<Corpus> {
    Ok(ingest_posts(open(&ctx.layout.corpus())?)?)
}

fn load_weak(ctx: &Ctx) -> anyhow::Result<Vec<WeakLabeledPost>> {
    Ok(read_weak_labeled(open(&ctx.layout.weak_labeled())?)?)
}

fn load_part(ctx: &Ctx, part: &str) -> anyhow::Result<Vec<WeakLabeledPost>> {
    let path = ctx.layout.split_dir().join(format!("{part}.ids"));
    let ids = read_id_list(&fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?);
    let by_id: HashMap<String, WeakLabeledPost> =
        load_weak(ctx)?.into_iter().map(|w| (w.post.post_id.clone(), w)).collect();
    ids.iter()
        .map(|id| by_id.get(id).cloned().with_context(|| format!("{part} split names unknown post {id:?}")))
        .collect()
}

pub fn ingest(ctx: &Ctx, inputs: &[PathBuf]) -> anyhow::Result<()> {
    let mut posts = Vec::new();
    for input in inputs {
        let corpus = ingest_posts(open(input)?).with_context(|| format!("reading {}", input.display()))?;
        posts.extend(corpus.posts().iter().cloned());
    }
    let corpus = Corpus::from_posts(posts)?;
    let mut out = create(&ctx.layout.corpus())?;
    write_posts(&mut out, corpus.posts())?;
    out.flush()?;
    println!("ingested {} posts into {}", corpus.len(), ctx.layout.corpus().display());
    Ok(())
}

pub fn weak_label_cmd(ctx: &Ctx) -> anyhow::Result<()> {
    let labeled = weak_label(&load_corpus(ctx)?);
    let sponsored = labeled.iter().filter(|w| w.weak_label.is_sponsored()).count();
    let mut out = create(&ctx.layout.weak_labeled())?;
    write_weak_labeled(&mut out, &labeled)?;
    out.flush()?;
    println!(
        "{} posts: {sponsored} disclosed (sponsored), {} non-sponsored",
        labeled.len(),
        labeled.len() - sponsored
    );
    Ok(())
}

pub fn split(ctx: &Ctx, cutoff_year: i32, balance: bool) -> anyhow::Result<()> {
    let labeled = load_weak(ctx)?;
    let pool = if balance { undersample(&labeled, ctx.seed) } else { labeled };
    let split = temporal_split(
        &pool,
        SplitSpec {
            cutoff_year,
            seed: ctx.seed,
        },
    )?;
    write_split_manifests(&ctx.layout.split_dir(), &split)?;
    println!(
        "train {} / validation {} / test {} ({} after {cutoff_year} left out)",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.excluded_after_cutoff.len()
    );
    Ok(())
}

fn truth(posts: &[WeakLabeledPost]) -> Vec<TruthRecord> {
    posts
        .iter()
        .map(|w| TruthRecord {
            post_id: w.post.post_id.clone(),
            sponsored: w.weak_label.is_sponsored(),
            disclosed: w.weak_label.is_sponsored(),
        })
        .collect()
}

fn print_eval(name: &str, preds: &[Prediction], posts: &[WeakLabeledPost]) -> anyhow::Result<()> {
    if posts.is_empty() {
        return Ok(());
    }
    let r = evaluate(preds, &truth(posts))?;
    println!(
        "{name}: {} posts, F1 pos {:.2} neg {:.2} macro {:.2}",
        r.n_items, r.pos_f1, r.neg_f1, r.macro_f1
    );
    Ok(())
}

pub fn train(ctx: &Ctx, model_id: &str) -> anyhow::Result<()> {
    let train = load_part(ctx, "train")?;
    if train.is_empty() {
        bail!("the training split is empty");
    }
    let captions: Vec<&str> = train.iter().map(|w| w.stripped_caption.as_str()).collect();
    let labels: Vec<Label> = train.iter().map(|w| w.weak_label).collect();
    let c = &ctx.config;
    let detector = TrainedDetector::fit(
        model_id,
        &captions,
        &labels,
        c.tokenizer.clone(),
        c.vectorizer,
        c.train,
    )?;
    detector.save(&ctx.layout.model())?;
    println!(
        "trained {model_id} on {} posts, {} features -> {}",
        train.len(),
        detector.vectorizer.dim(),
        ctx.layout.model().display()
    );
    let validation = load_part(ctx, "validation")?;
    let preds: Vec<Prediction> = validation
        .iter()
        .map(|w| detector.predict(&w.post.post_id, &w.stripped_caption))
        .collect();
    print_eval("validation", &preds, &validation)
}

pub fn predict(ctx: &Ctx, input: Option<&Path>, output: Option<&Path>) -> anyhow::Result<()> {
    let detector = TrainedDetector::load(&ctx.layout.model())
        .with_context(|| format!("loading {}", ctx.layout.model().display()))?;
    let preds: Vec<Prediction> = match input {
        Some(path) => ingest_posts(open(path)?)?
            .posts()
            .iter()
            .map(|p| detector.predict(&p.post_id, &strip_disclosures(&p.caption)))
            .collect(),
        None => {
            let test = load_part(ctx, "test")?;
            let preds: Vec<Prediction> = test
                .iter()
                .map(|w| detector.predict(&w.post.post_id, &w.stripped_caption))
                .collect();
            print_eval("test", &preds, &test)?;
            preds
        }
    };
    let path = output.map_or_else(|| ctx.layout.predictions(), Path::to_path_buf);
    let mut out = create(&path)?;
    export_predictions(&mut out, &preds)?;
    out.flush()?;
    println!("{} predictions -> {}", preds.len(), path.display());
    Ok(())
}

fn load_explanations(path: &Path) -> anyhow::Result<BTreeMap<String, Explanation>> {
    let mut out = BTreeMap::new();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e.into()),
    };
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let e: Explanation =
            serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        out.insert(e.post_id.clone(), e);
    }
    Ok(out)
}

fn load_batch(ctx: &Ctx, batch_id: &str) -> anyhow::Result<AnnotationBatch> {
    let path = ctx.layout.batch(batch_id);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

pub async fn explain(ctx: &Ctx, batch_id: Option<&str>, ids: Option<&Path>, local_only: bool) -> anyhow::Result<()> {
    let corpus = load_corpus(ctx)?;
    let wanted: Vec<String> = match (batch_id, ids) {
        (Some(b), None) => load_batch(ctx, b)?.items,
        (None, Some(p)) => read_id_list(&fs::read_to_string(p)?),
        (None, None) => corpus.posts().iter().map(|p| p.post_id.clone()).collect(),
        (Some(_), Some(_)) => bail!("pass either --batch or --ids, not both"),
    };
    let mut known = load_explanations(&ctx.layout.explanations())?;
    let posts: Vec<Post> = wanted
        .iter()
        .filter(|id| !known.contains_key(*id))
        .map(|id| corpus.get(id).cloned().with_context(|| format!("unknown post {id:?}")))
        .collect::<anyhow::Result<_>>()?;

    let client = if local_only {
        None
    } else {
        match std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()) {
            Some(key) => {
                let cache_dir = ctx.config.cache_dir.clone().unwrap_or_else(|| ctx.layout.cache());
                let cache = CompletionCache::new(cache_dir)?;
                Some(Arc::new(ChatClient::new(ctx.config.endpoint.clone(), Some(key), Some(cache))?))
            }
            None => {
                tracing::warn!("{API_KEY_ENV} is not set; using the local model only");
                None
            }
        }
    };
    let local = match TrainedDetector::load(&ctx.layout.model()) {
        Ok(d) => Some(Arc::new(d)),
        Err(e) => {
            tracing::warn!(error = %e, "no local model; failed remote calls will not fall back");
            None
        }
    };
    if client.is_none() && local.is_none() {
        bail!("nothing to explain with: set {API_KEY_ENV} or train a model first");
    }

    let recipe = Arc::new(ctx.config.recipe()?);
    let n = posts.len();
    let results = explain_all(posts, recipe, client, local).await;
    let (mut remote, mut fallback, mut failed) = (0, 0, 0);
    for r in results {
        match r {
            Ok(e) => {
                match e.source {
                    ExplanationSource::Remote => remote += 1,
                    ExplanationSource::LocalFallback => fallback += 1,
                }
                known.insert(e.post_id.clone(), e);
            }
            Err(e) => {
                failed += 1;
                tracing::error!(error = %e, "explanation failed");
            }
        }
    }
    let mut out = create(&ctx.layout.explanations())?;
    for e in known.values() {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    println!(
        "explained {n} posts: {remote} remote, {fallback} local fallback, {failed} failed ({} already cached)",
        wanted.len() - n
    );
    if failed > 0 {
        bail!("{failed} posts could not be explained");
    }
    Ok(())
}

/// Samples the batch and saves it. The service only receives it once every
/// post has an explanation (or `allow_unexplained` is set), because a
/// registered batch is immutable.
pub fn batch(ctx: &Ctx, size: usize, disclosed_share: f64, allow_unexplained: bool) -> anyhow::Result<()> {
    let corpus = load_corpus(ctx)?;
    let batch = build_annotation_batch(&corpus, size, disclosed_share, ctx.seed)?;
    let mut out = create(&ctx.layout.batch(&batch.batch_id))?;
    serde_json::to_writer_pretty(&mut out, &batch)?;
    out.flush()?;
    let explanations: HashMap<String, Explanation> = load_explanations(&ctx.layout.explanations())?
        .into_iter()
        .filter(|(id, _)| batch.contains(id))
        .collect();
    println!(
        "batch {}: {} posts ({} disclosed), {} with explanations",
        batch.batch_id,
        batch.items.len(),
        batch.disclosed_items.len(),
        explanations.len()
    );
    if explanations.len() < batch.items.len() && !allow_unexplained {
        println!(
            "not registered yet: run `explain --batch {}` and then `batch` again (or pass --allow-unexplained)",
            batch.batch_id
        );
        return Ok(());
    }
    let stored = batch_from_corpus(&batch, &corpus, &explanations)?;
    AnnotationService::open(&ctx.layout.service())?.register_batch(stored)?;
    println!("registered {} with the annotation service", batch.batch_id);
    Ok(())
}

pub async fn serve(ctx: &Ctx, addr: &str) -> anyhow::Result<()> {
    let service = Arc::new(AnnotationService::open(&ctx.layout.service())?);
    sponsorscope_server::serve(service, addr).await?;
    Ok(())
}

pub fn export(
    ctx: &Ctx,
    batch_id: &str,
    setup: Option<Setup>,
    expertise: Option<Expertise>,
    out_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let service = AnnotationService::open(&ctx.layout.service())?;
    let export = service.export_labels(batch_id, ExportFilter { setup, expertise })?;
    let dir = out_dir.map_or_else(|| ctx.layout.export_dir(batch_id), Path::to_path_buf);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(LABELS_FILE), export.to_csv())?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&export.manifest)?)?;
    let mut disclosed = create(&dir.join(DISCLOSED_FILE))?;
    for id in &export.manifest.disclosed_items {
        writeln!(disclosed, "{id}")?;
    }
    disclosed.flush()?;
    if let Some(model) = service.model_labels(batch_id)? {
        let mut preds: Vec<Prediction> = model
            .into_iter()
            .map(|(post_id, label)| Prediction {
                post_id,
                label,
                probability: None,
                model_id: "explainer".into(),
            })
            .collect();
        preds.sort_by(|a, b| a.post_id.cmp(&b.post_id));
        let mut out = create(&dir.join(MODEL_LABELS_FILE))?;
        export_predictions(&mut out, &preds)?;
        out.flush()?;
    }
    println!(
        "{} label rows from {} raters -> {}",
        export.rows.len(),
        export.manifest.raters.len(),
        dir.display()
    );
    Ok(())
}

/// Files feeding `report`; unset paths default to an export directory.
pub struct ReportInputs {
    pub dir: Option<PathBuf>,
    pub batch: Option<String>,
    pub labels: Option<PathBuf>,
    pub disclosed: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub model_id: Option<String>,
    pub rate: SponsoredRate,
    pub out: Option<PathBuf>,
}

fn read_manifest(path: &Path) -> anyhow::Result<ReportManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(m) = serde_json::from_str::<ExportManifest>(&text) {
        return Ok(m.report);
    }
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn report(ctx: &Ctx, inputs: ReportInputs) -> anyhow::Result<()> {
    let dir = match (&inputs.dir, &inputs.batch) {
        (Some(d), _) => Some(d.clone()),
        (None, Some(b)) => Some(ctx.layout.export_dir(b)),
        (None, None) => None,
    };
    let pick = |explicit: &Option<PathBuf>, name: &str| -> anyhow::Result<PathBuf> {
        explicit
            .clone()
            .or_else(|| dir.as_ref().map(|d| d.join(name)))
            .with_context(|| format!("no {name}: pass --batch, --dir or the file itself"))
    };
    let labels = pick(&inputs.labels, LABELS_FILE)?;
    let manifest = read_manifest(&pick(&inputs.manifest, MANIFEST_FILE)?)?;
    let disclosed_path = pick(&inputs.disclosed, DISCLOSED_FILE)?;
    let disclosed = read_id_list(
        &fs::read_to_string(&disclosed_path).with_context(|| format!("reading {}", disclosed_path.display()))?,
    );
    let predictions = match &inputs.predictions {
        Some(p) => Some(p.clone()),
        None => dir.as_ref().map(|d| d.join(MODEL_LABELS_FILE)).filter(|p| p.exists()),
    };
    let out = replay_report(
        open(&labels)?,
        &disclosed,
        &manifest,
        predictions.as_deref().map(open).transpose()?,
        inputs.model_id.as_deref(),
        inputs.rate,
    )?;
    if let Some(out_dir) = inputs.out.clone().or(dir) {
        fs::create_dir_all(&out_dir)?;
        fs::write(out_dir.join("report.json"), &out.json)?;
        fs::write(out_dir.join("report.txt"), &out.text)?;
        tracing::info!(dir = %out_dir.display(), "report written");
    }
    print!("{}", out.text);
    Ok(())
}
