//! Command-line front end, shared by the `facegame` binary.

use std::error::Error;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::detector::{load_training_manifest, train, AuModel, TrainConfig, TrainingManifestLine};
use crate::explain::AuDictionary;
use crate::features::FeatureConfig;
use crate::ferlab::{
    build_model, evaluate, load_dataset, run_enrichment_experiment, save_dataset, train_cnn,
    CnnConfig, CnnTrainConfig, ExperimentConfig,
};
use crate::forge::{cooccurrence, export_dataset, render_heatmap};
use crate::game::{
    append_catalog_line, read_records, CatalogLine, GameConfig, GameService, Mode, Store,
    TargetCatalog, CATALOG_FILE,
};
use crate::model::{ActionUnit, Emotion};
use crate::statlab::analysis_report;
use crate::synth::{
    au_training_set, emotion_dataset, emotion_signature, random_au_set, render_face,
    render_jittered, FaceParams,
};

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(
    name = "facegame",
    version,
    about = "Facial-expression imitation game, data tools and analyses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the Action Unit detector.
    TrainAu(TrainAuArgs),
    /// Run the game server.
    Serve(ServeArgs),
    /// Export records at or above a score threshold as a labeled dataset.
    Export(ExportArgs),
    /// Count Action Unit occurrences per target emotion.
    Cooccur(CooccurArgs),
    /// Train the emotion CNN on a dataset directory.
    TrainFer(TrainFerArgs),
    /// Compare CNN accuracy with and without extra training data.
    Experiment(ExperimentArgs),
    /// First-versus-remaining score analysis of a record log.
    Stats(StatsArgs),
    /// Generate synthetic fixtures.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args)]
pub struct TrainAuArgs {
    /// JSON-lines manifest of {image, landmarks, aus}.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub manifest: Option<PathBuf>,
    /// Train on this many generated faces instead of a manifest.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// 0 picks a free port; the bound address is printed on startup.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory holding catalog.jsonl and the target images.
    #[arg(long)]
    pub targets: PathBuf,
    /// AU model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Record store directory.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub attempts: u32,
    #[arg(long, default_value = "experiment")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CooccurArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub threshold: f64,
    /// Text table; a PNG raster is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct CnnArgs {
    /// Network input side (multiple of 8).
    #[arg(long, default_value_t = 48)]
    pub size: usize,
    /// Filters of the four conv layers, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [32, 32, 64, 64])]
    pub filters: Vec<usize>,
    #[arg(long, default_value_t = 96)]
    pub hidden: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
}

impl CnnArgs {
    fn config(&self) -> Result<CnnConfig, Box<dyn Error>> {
        let filters: [usize; 4] = self
            .filters
            .clone()
            .try_into()
            .map_err(|_| "--filters takes exactly four values")?;
        Ok(CnnConfig {
            input_size: self.size,
            filters,
            hidden: self.hidden,
        })
    }

    fn train(&self, seed: u64) -> CnnTrainConfig {
        CnnTrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainFerArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cnn: CnnArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub base: PathBuf,
    /// Extra training data; omit for an empty set.
    #[arg(long)]
    pub extra: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// One seed per repetition; defaults to 1..=k.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 200)]
    pub n_train: usize,
    #[arg(long, default_value_t = 50)]
    pub n_test: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cnn: CnnArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// A target catalog with one face per emotion.
    Targets {
        #[arg(long)]
        out: PathBuf,
        /// Store each face's AU set in the catalog instead of letting the
        /// server detect it.
        #[arg(long)]
        labeled: bool,
    },
    /// A labels.csv emotion dataset.
    Emotions {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        per_class: usize,
        #[arg(long, default_value_t = 48)]
        size: usize,
        /// Probability of each non-signature unit appearing.
        #[arg(long, default_value_t = 0.1)]
        confusion: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// An AU training manifest with images.
    AuManifest {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `std::env::args` and runs the command.
pub fn main() -> CliResult {
    run(Cli::parse())
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::TrainAu(a) => train_au(a),
        Command::Serve(a) => serve(a),
        Command::Export(a) => export(a),
        Command::Cooccur(a) => cooccur(a),
        Command::TrainFer(a) => train_fer(a),
        Command::Experiment(a) => experiment(a),
        Command::Stats(a) => stats(a),
        Command::Synth(c) => synth(c),
    }
}

fn train_au(a: TrainAuArgs) -> CliResult {
    let features = FeatureConfig::default();
    let set = match (&a.manifest, a.synthetic) {
        (Some(path), _) => load_training_manifest(path, &features)?,
        (None, Some(n)) => au_training_set(n, a.seed, &FaceParams::default(), &features)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let config = TrainConfig {
        l2: a.l2,
        lr: a.lr,
        epochs: a.epochs,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let (model, report) = train(&set, &config)?;
    let exact = set
        .features()
        .iter()
        .zip(set.labels())
        .filter(|(f, l)| model.detect_aus(f).map(|p| p == **l).unwrap_or(false))
        .count();
    let final_loss = report.final_loss();
    println!(
        "examples: {}  active features: {}",
        set.len(),
        report.active_features
    );
    println!(
        "mean final loss: {:.6}  exact-set training accuracy: {:.2}%",
        final_loss.iter().sum::<f64>() / final_loss.len() as f64,
        100.0 * exact as f64 / set.len() as f64
    );
    model.save(&a.out)?;
    println!("model written to {}", a.out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    let model = AuModel::load(&a.model)?;
    let config = GameConfig {
        attempts_per_round: a.attempts,
        mode: a.mode,
        seed: a.seed,
        ..GameConfig::default()
    };
    std::fs::create_dir_all(&a.targets)?;
    let catalog_path = a.targets.join(CATALOG_FILE);
    if !catalog_path.exists() {
        std::fs::write(&catalog_path, "")?;
    }
    let catalog = TargetCatalog::load(&a.targets, &model, &config.features)?;
    let store = Store::open(&a.store)?;
    let service = Arc::new(GameService::new(
        config,
        Arc::new(model),
        AuDictionary::builtin(),
        catalog,
        store,
    )?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port)).await?;
        println!("listening on http://{}", listener.local_addr()?);
        use std::io::Write;
        std::io::stdout().flush()?;
        crate::game::serve(listener, service, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    Ok(())
}

fn export(a: ExportArgs) -> CliResult {
    let records = read_records(&a.store)?;
    let m = export_dataset(&records, a.threshold, &a.store, &a.out)?;
    println!(
        "exported {} of {} records (score >= {}) to {}",
        m.entries.len(),
        records.len(),
        a.threshold,
        a.out.display()
    );
    for e in Emotion::ALL {
        println!("  {:<10} {}", e.label(), m.histogram.get(e));
    }
    if !m.missing_frames.is_empty() {
        println!("  missing frames: {}", m.missing_frames.len());
    }
    Ok(())
}

fn cooccur(a: CooccurArgs) -> CliResult {
    let records = read_records(&a.store)?;
    let m = cooccurrence(&records, a.threshold)?;
    let png = render_heatmap(&m, &a.out)?;
    print!("{}", crate::forge::heatmap_text(&m));
    println!("written {} and {}", a.out.display(), png.display());
    Ok(())
}

fn train_fer(a: TrainFerArgs) -> CliResult {
    let data = load_dataset(&a.data, a.cnn.size)?;
    let model = build_model(a.cnn.config()?, a.seed)?;
    let (model, history) = train_cnn(model, &data, &a.cnn.train(a.seed))?;
    for (i, s) in history.iter().enumerate() {
        println!(
            "epoch {:>4}  loss {:.6}  accuracy {:.2}%",
            i + 1,
            s.loss,
            100.0 * s.accuracy
        );
    }
    println!(
        "final training accuracy: {:.2}%",
        100.0 * evaluate(&model, &data)?
    );
    model.save(&a.out)?;
    println!("model written to {}", a.out.display());
    Ok(())
}

fn experiment(a: ExperimentArgs) -> CliResult {
    let seeds = a
        .seeds
        .clone()
        .unwrap_or_else(|| (1..=a.k as u64).collect());
    if seeds.len() != a.k {
        return Err(format!("--k {} but {} seeds given", a.k, seeds.len()).into());
    }
    let base = load_dataset(&a.base, a.cnn.size)?;
    let extra = match &a.extra {
        Some(dir) => load_dataset(dir, a.cnn.size)?,
        None => crate::ferlab::LabeledImageSet::new("none"),
    };
    let config = ExperimentConfig {
        seeds,
        n_train: a.n_train,
        n_test: a.n_test,
        cnn: a.cnn.config()?,
        train: a.cnn.train(0),
    };
    let report = run_enrichment_experiment(&base, &extra, &config)?;
    let text = report.to_string();
    std::fs::write(&a.out, &text)?;
    print!("{text}");
    Ok(())
}

fn stats(a: StatsArgs) -> CliResult {
    let records = read_records(&a.store)?;
    let text = analysis_report(&records).to_string();
    if let Some(out) = &a.out {
        std::fs::write(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn synth(c: SynthCommand) -> CliResult {
    match c {
        SynthCommand::Targets { out, labeled } => synth_targets(&out, labeled),
        SynthCommand::Emotions {
            out,
            per_class,
            size,
            confusion,
            seed,
        } => {
            let set = emotion_dataset("synthetic", per_class, size, confusion, seed);
            save_dataset(&set, &out)?;
            println!("{} images written to {}", set.len(), out.display());
            Ok(())
        }
        SynthCommand::AuManifest { out, count, seed } => synth_au_manifest(&out, count, seed),
    }
}

fn synth_targets(out: &Path, labeled: bool) -> CliResult {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(CATALOG_FILE), "")?;
    for e in Emotion::ALL {
        let face = render_face(&FaceParams::default().with_aus(emotion_signature(e)));
        let file = format!("{e}-01.png");
        std::fs::write(out.join(&file), face.image.to_png())?;
        append_catalog_line(
            out,
            &CatalogLine {
                target_id: format!("{e}-01"),
                image: file,
                emotion: e,
                landmarks: face.landmarks,
                aus: labeled.then_some(face.aus),
            },
        )?;
    }
    println!("6 targets written to {}", out.display());
    Ok(())
}

fn synth_au_manifest(out: &Path, count: usize, seed: u64) -> CliResult {
    use rand::SeedableRng;
    std::fs::create_dir_all(out)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut lines = String::new();
    for i in 0..count {
        let aus = random_au_set(&mut rng, 0.35);
        let face = render_jittered(&FaceParams::default(), aus, &mut rng);
        let file = format!("{i:06}.png");
        std::fs::write(out.join(&file), face.image.to_png())?;
        let line = TrainingManifestLine {
            image: file,
            landmarks: face.landmarks,
            aus,
        };
        lines.push_str(&serde_json::to_string(&line)?);
        lines.push('\n');
    }
    std::fs::write(out.join("manifest.jsonl"), lines)?;
    println!(
        "{count} faces written to {} ({} action units)",
        out.display(),
        ActionUnit::ALL.len()
    );
    Ok(())
}
