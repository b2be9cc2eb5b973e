//! The `lformer` command line.
//!
//! Settings come from a TOML [`RunConfig`] (path from `--config` or the
//! `LFORMER_CONFIG` environment variable) and are then overridden by flags.
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{describe, AttentionMask, PaddedLayout};
use crate::complexity::{bench_decode, compare, render_table, verify_identity, OpCountReport};
use crate::corpus::{generate, load_grids, save_grids, write_pgm, DatasetSpec, Example, GridFile};
use crate::editing::{inpaint, repaint, PixelBBox};
use crate::error::{Error, Result};
use crate::lgrid::GridShape;
use crate::net::{
    load_ckpt, save_ckpt, Checkpoint, EpochMetrics, ModelConfig, Network, TrainConfig, Trainer,
};
use crate::sampler::{choose_latent, sample_traced, LatentMode, SampleConfig};
use crate::TokenGrid;

pub const CONFIG_ENV: &str = "LFORMER_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a subcommand may read. Missing sections and keys take their
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub sample: SampleConfig,
    pub train: TrainConfig,
    pub paths: Paths,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    /// Hex SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Hash of the settings that determine generated grids: the sampling
    /// section, the checkpoint path and the checkpoint's model config.
    pub fn generation_hash(&self, net: &Network) -> String {
        let mut c = self.clone();
        c.model = net.config().clone();
        c.train = TrainConfig::default();
        c.paths = Paths {
            checkpoint: c.paths.checkpoint,
            ..Paths::default()
        };
        c.hash()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.sample.validate(self.model.k, self.model.latent_dim)
    }
}

/// Provenance written next to every generated grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub command: String,
    pub config_hash: String,
    pub class: usize,
    pub samples: Vec<SampleMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub z: Vec<f64>,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn pgm_path(out: &Path, i: usize) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(format!(".{i}.pgm"));
    PathBuf::from(p)
}

#[derive(Debug, Parser)]
#[command(
    name = "lformer",
    version,
    about = "L-shape semi-autoregressive token-grid generation"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a TOML dataset spec.
    GenData(GenDataArgs),
    /// Train (or resume training) a model.
    Train(TrainArgs),
    /// Sample grids for a class.
    Sample(SampleArgs),
    /// Keep the top-left t x t square and regenerate the rest.
    Repaint(RepaintArgs),
    /// Regenerate tokens under a pixel bounding box.
    Inpaint(InpaintArgs),
    /// Time cached against uncached decoding.
    Bench(BenchArgs),
    /// Check attention multiplication counts against their closed forms.
    VerifyComplexity(VerifyArgs),
    /// Print the block-causal attention mask.
    MaskDump(MaskArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub h: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_classes: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub n_cond: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p_drop_cond: Option<f64>,
}

impl ModelFlags {
    fn apply(&self, m: &mut ModelConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { m.$f = v; })* };
        }
        set!(
            h,
            k,
            n_classes,
            layers,
            heads,
            dim,
            latent_dim,
            n_cond,
            beta,
            p_drop_cond
        );
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SampleFlags {
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub cfg_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Argmax decoding with z at the prior mean.
    #[arg(long)]
    pub greedy: bool,
}

impl SampleFlags {
    fn apply(&self, s: &mut SampleConfig) {
        if self.greedy {
            s.top_k = Some(1);
            s.latent = LatentMode::PriorMean;
        }
        if let Some(v) = self.temperature {
            s.temperature = v;
        }
        if let Some(v) = self.top_k {
            s.top_k = Some(v);
        }
        if let Some(v) = self.top_p {
            s.top_p = v;
        }
        if let Some(v) = self.cfg_scale {
            s.cfg_scale = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write every grid as `<dir>/<index>.pgm`.
    #[arg(long)]
    pub pgm_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub pgm_scale: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Total epochs; a resumed run stops once this many are complete.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Continue from the checkpoint if it exists.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub sample: SampleFlags,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub class: usize,
    /// Grids to draw; grid `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write `<out>.<i>.pgm` renderings.
    #[arg(long)]
    pub pgm: bool,
    /// Print grids as CSV rows.
    #[arg(long)]
    pub print: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EditArgs {
    #[command(flatten)]
    pub sample: SampleFlags,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Grid file holding the source grid.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Defaults to the class stored with the source grid.
    #[arg(long)]
    pub class: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pgm: bool,
    #[arg(long)]
    pub print: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RepaintArgs {
    #[command(flatten)]
    pub edit: EditArgs,
    #[arg(long)]
    pub keep: usize,
}

#[derive(Debug, Clone, Args)]
pub struct InpaintArgs {
    #[command(flatten)]
    pub edit: EditArgs,
    /// Pixel box `x1,y1,x2,y2`, half-open, x along columns.
    #[arg(long)]
    pub bbox: PixelBBox,
    /// Pixels per token side.
    #[arg(long, default_value_t = 8)]
    pub factor: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub sample: SampleFlags,
    /// Trained model; a freshly initialized one is used otherwise.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Every perfect square up to this bound is checked.
    #[arg(long, default_value_t = 4096)]
    pub max_n: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,7,1024")]
    pub dims: Vec<u64>,
    /// Sequence lengths shown in the table.
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024,4096")]
    pub table_n: Vec<u64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MaskArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    /// Condition positions before BOS; defaults to the model prefix length.
    #[arg(long)]
    pub prefix: Option<usize>,
    /// Also list what each position holds and predicts.
    #[arg(long)]
    pub describe: bool,
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidClass { .. }
        | Error::InvalidBBox(_)
        | Error::EmptyRegion
        | Error::BlockOutOfRange { .. }
        | Error::NotSquare(_)
        | Error::EmptyGrid => 1,
        _ => 2,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Base config from `--config` or the environment, with flags applied.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::GenData(a) => set_path(&mut cfg.paths.data, &a.out),
        Command::Train(a) => {
            a.model.apply(&mut cfg.model);
            if let Some(v) = a.lr {
                cfg.train.lr = v;
            }
            if let Some(v) = a.batch_size {
                cfg.train.batch_size = v;
            }
            if let Some(v) = a.epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = a.seed {
                cfg.train.seed = v;
            }
            set_path(&mut cfg.paths.data, &a.data);
            set_path(&mut cfg.paths.checkpoint, &a.ckpt);
            set_path(&mut cfg.paths.metrics, &a.metrics);
        }
        Command::Sample(a) => {
            a.sample.apply(&mut cfg.sample);
            set_path(&mut cfg.paths.checkpoint, &a.ckpt);
            set_path(&mut cfg.paths.out, &a.out);
        }
        Command::Repaint(RepaintArgs { edit, .. }) | Command::Inpaint(InpaintArgs { edit, .. }) => {
            edit.sample.apply(&mut cfg.sample);
            set_path(&mut cfg.paths.checkpoint, &edit.ckpt);
            set_path(&mut cfg.paths.out, &edit.out);
        }
        Command::Bench(a) => {
            a.model.apply(&mut cfg.model);
            a.sample.apply(&mut cfg.sample);
            set_path(&mut cfg.paths.checkpoint, &a.ckpt);
        }
        Command::VerifyComplexity(_) => {}
        Command::MaskDump(a) => a.model.apply(&mut cfg.model),
    }
    Ok(cfg)
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if let Some(p) = flag {
        *slot = Some(p.clone());
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("no {what} path given")))
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = effective_config(cli)?;
    if cli.dump_config {
        write!(out, "{}", cfg.to_toml())?;
        return Ok(());
    }
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(a, &cfg, out),
        Command::Train(a) => cmd_train(a, &cfg, out),
        Command::Sample(a) => cmd_sample(a, &cfg, out),
        Command::Repaint(a) => cmd_edit(&a.edit, Edit::Repaint(a.keep), &cfg, out),
        Command::Inpaint(a) => cmd_edit(&a.edit, Edit::Inpaint(a.bbox, a.factor), &cfg, out),
        Command::Bench(a) => cmd_bench(a, &cfg, out),
        Command::VerifyComplexity(a) => cmd_verify_complexity(a, out),
        Command::MaskDump(a) => cmd_mask_dump(a, &cfg, out),
    }
}

fn cmd_gen_data(a: &GenDataArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.spec)
        .map_err(|e| Error::Config(format!("{}: {e}", a.spec.display())))?;
    let spec: DatasetSpec =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", a.spec.display())))?;
    let path = required(&cfg.paths.data, "output")?;
    let examples = generate(&spec)?;
    save_grids(path, &GridFile::from_examples(spec.k, &examples))?;
    if let Some(dir) = &a.pgm_dir {
        fs::create_dir_all(dir)?;
        for (i, ex) in examples.iter().enumerate() {
            write_pgm(&dir.join(format!("{i}.pgm")), &ex.grid, spec.k, a.pgm_scale)?;
        }
    }
    writeln!(out, "wrote {} grids to {}", examples.len(), path.display())?;
    Ok(())
}

fn load_examples(path: &Path, model: &ModelConfig) -> Result<Vec<Example>> {
    let file = load_grids(path)?;
    if file.k > model.k {
        return Err(Error::Config(format!(
            "dataset codebook {} exceeds model codebook {}",
            file.k, model.k
        )));
    }
    file.entries
        .into_iter()
        .map(|(class, grid)| {
            if grid.side() != model.h {
                return Err(Error::Config(format!(
                    "dataset grids are {0}x{0}, model expects {1}x{1}",
                    grid.side(),
                    model.h
                )));
            }
            Ok(Example {
                class: class.unwrap_or(model.null_class()),
                grid,
            })
        })
        .collect()
}

fn cmd_train(a: &TrainArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let data_path = required(&cfg.paths.data, "data")?;
    let ckpt_path = required(&cfg.paths.checkpoint, "checkpoint")?;
    let resumed = a.resume && ckpt_path.exists();
    let mut trainer = if resumed {
        let mut tr = load_ckpt(ckpt_path)?.into_trainer(cfg.train.clone())?;
        tr.config.epochs = cfg.train.epochs;
        tr
    } else {
        cfg.validate()?;
        Trainer::new(
            Network::init(&cfg.model, cfg.train.seed)?,
            cfg.train.clone(),
        )?
    };
    let data = load_examples(data_path, trainer.net.config())?;
    if data.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut metrics = match &cfg.paths.metrics {
        Some(p) => {
            let fresh = !resumed || !p.exists();
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(!fresh)
                .write(true)
                .truncate(fresh)
                .open(p)?;
            if fresh {
                writeln!(f, "{}", EpochMetrics::CSV_HEADER)?;
            }
            Some(f)
        }
        None => None,
    };
    if resumed {
        writeln!(out, "resuming at epoch {}", trainer.epoch)?;
    }
    writeln!(out, "{}", EpochMetrics::CSV_HEADER)?;
    while trainer.epoch < trainer.config.epochs {
        let m = trainer.train_epoch(&data)?;
        if !m.loss.is_finite() || !trainer.net.params.all_finite() {
            return Err(Error::Verification(format!(
                "non-finite loss or parameters at epoch {}",
                m.epoch
            )));
        }
        writeln!(out, "{}", m.csv_line())?;
        if let Some(f) = metrics.as_mut() {
            writeln!(f, "{}", m.csv_line())?;
            f.flush()?;
        }
        save_ckpt(ckpt_path, &Checkpoint::from_trainer(&trainer))?;
    }
    Ok(())
}

fn load_net(cfg: &RunConfig) -> Result<Network> {
    Ok(load_ckpt(required(&cfg.paths.checkpoint, "checkpoint")?)?.net)
}

fn write_outputs(
    grids: &[(usize, TokenGrid)],
    k: usize,
    sidecar: &Sidecar,
    cfg: &RunConfig,
    pgm: bool,
    print: bool,
    out: &mut dyn Write,
) -> Result<()> {
    if print {
        for (_, g) in grids {
            writeln!(out, "{}", g.to_text())?;
        }
    }
    let Some(path) = &cfg.paths.out else {
        if !print {
            return Err(Error::Config(
                "no output path given (use --out or --print)".into(),
            ));
        }
        return Ok(());
    };
    let file = GridFile {
        k,
        entries: grids.iter().map(|(c, g)| (Some(*c), g.clone())).collect(),
    };
    save_grids(path, &file)?;
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    crate::corpus::files::write_atomic(&sidecar_path(path), json.as_bytes())?;
    if pgm {
        for (i, (_, g)) in grids.iter().enumerate() {
            write_pgm(&pgm_path(path, i), g, k, 8)?;
        }
    }
    writeln!(out, "wrote {} grid(s) to {}", grids.len(), path.display())?;
    Ok(())
}

fn cmd_sample(a: &SampleArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let net = load_net(cfg)?;
    let mc = net.config().clone();
    cfg.sample.validate(mc.k, mc.latent_dim)?;
    net.check_class(a.class)?;
    let mut grids = Vec::with_capacity(a.count);
    let mut samples = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let sc = SampleConfig {
            seed: cfg.sample.seed.wrapping_add(i as u64),
            ..cfg.sample.clone()
        };
        let gen = sample_traced(&net, a.class, &sc, true)?;
        grids.push((a.class, gen.grid));
        samples.push(SampleMeta {
            seed: sc.seed,
            z: gen.z,
        });
    }
    let sidecar = Sidecar {
        command: "sample".into(),
        config_hash: cfg.generation_hash(&net),
        class: a.class,
        samples,
    };
    write_outputs(&grids, mc.k, &sidecar, cfg, a.pgm, a.print, out)
}

enum Edit {
    Repaint(usize),
    Inpaint(PixelBBox, usize),
}

fn cmd_edit(a: &EditArgs, edit: Edit, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let net = load_net(cfg)?;
    let mc = net.config().clone();
    cfg.sample.validate(mc.k, mc.latent_dim)?;
    let mut file = load_grids(&a.input)?;
    if a.index >= file.entries.len() {
        return Err(Error::Config(format!(
            "index {} outside {} grid(s) in {}",
            a.index,
            file.entries.len(),
            a.input.display()
        )));
    }
    let (stored, source) = file.entries.swap_remove(a.index);
    let class = a
        .class
        .or(stored)
        .ok_or_else(|| Error::Config("source grid has no class; pass --class".into()))?;
    net.check_class(class)?;
    let (name, grid) = match edit {
        Edit::Repaint(t) => ("repaint", repaint(&net, &source, t, class, &cfg.sample)?),
        Edit::Inpaint(bbox, f) => (
            "inpaint",
            inpaint(&net, &source, &bbox, f, class, &cfg.sample)?,
        ),
    };
    // the editors draw z first from a generator seeded with `seed`
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.sample.seed);
    let z = choose_latent(&net, class, &cfg.sample, &mut rng)?;
    let sidecar = Sidecar {
        command: name.into(),
        config_hash: cfg.generation_hash(&net),
        class,
        samples: vec![SampleMeta {
            seed: cfg.sample.seed,
            z,
        }],
    };
    write_outputs(&[(class, grid)], mc.k, &sidecar, cfg, a.pgm, a.print, out)
}

fn cmd_bench(a: &BenchArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let net = match &cfg.paths.checkpoint {
        Some(p) if a.ckpt.is_some() || p.exists() => load_ckpt(p)?.net,
        _ => {
            cfg.model.validate()?;
            Network::init(&cfg.model, cfg.train.seed)?
        }
    };
    let r = bench_decode(&net, a.repeats, &cfg.sample)?;
    writeln!(
        out,
        "{:>4} {:>8} {:>12} {:>12} {:>8}",
        "h", "repeats", "cached_ms", "uncached_ms", "speedup"
    )?;
    writeln!(
        out,
        "{:>4} {:>8} {:>12.3} {:>12.3} {:>8.2}",
        r.h, r.repeats, r.cached_ms, r.uncached_ms, r.speedup
    )?;
    if let Some(p) = &a.csv {
        let text = format!(
            "h,repeats,cached_ms,uncached_ms,speedup\n{},{},{},{},{}\n",
            r.h, r.repeats, r.cached_ms, r.uncached_ms, r.speedup
        );
        crate::corpus::files::write_atomic(p, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_verify_complexity(a: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    if a.dims.is_empty() || a.dims.contains(&0) {
        return Err(Error::Config("dims must be positive".into()));
    }
    let mut rows: Vec<OpCountReport> = Vec::new();
    for &n in &a.table_n {
        for &d in &a.dims {
            rows.extend(compare(n, d)?);
        }
    }
    write!(out, "{}", render_table(&rows))?;
    let bad = verify_identity(a.max_n, &a.dims);
    let mismatched: Vec<_> = rows.iter().filter(|r| !r.matches_closed_form()).collect();
    if let Some(p) = &a.csv {
        let mut text = String::from(OpCountReport::CSV_HEADER);
        text.push('\n');
        for r in &rows {
            text.push_str(&r.csv_line());
            text.push('\n');
        }
        crate::corpus::files::write_atomic(p, text.as_bytes())?;
    }
    if !bad.is_empty() || !mismatched.is_empty() {
        return Err(Error::Verification(format!(
            "summation differs from closed form at (N, D) = {bad:?}"
        )));
    }
    writeln!(
        out,
        "identity holds for every square N <= {} and D in {:?}",
        a.max_n, a.dims
    )?;
    Ok(())
}

fn cmd_mask_dump(a: &MaskArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let prefix = a.prefix.unwrap_or_else(|| cfg.model.prefix_len());
    let layout = PaddedLayout::new(GridShape::new(cfg.model.h)?, prefix)?;
    if a.describe {
        write!(out, "{}", describe(&layout))?;
    }
    write!(out, "{}", AttentionMask::block_causal(&layout).render())?;
    Ok(())
}
