use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wcgan::data::{build_subband_store, read_manifest, Domain, ManifestEntry, Mode};
use wcgan::flows::{dewave_scene, destripe_scene, moment_match_destripe, Denoiser};
use wcgan::metrics::{psnr, ssim, SsimConfig, DEFAULT_PEAK};
use wcgan::noise::{synth_tiles, SynthSpec};
use wcgan::raster::{atomic_write, read_raster, write_raster, RasterFormat};
use wcgan::train::{history_csv, train, TrainConfig};
use wcgan::wavelet::{dwt2_multilevel, subband_project, SubbandSelection};
use wcgan::{Error, Raster, Result};

#[derive(Parser)]
#[command(name = "wcgan", version, about = "Wavelet-subband CycleGAN denoising for multi-band rasters")]
struct Cli {
    /// Seed for every stochastic step; overrides the config file seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for tile inference (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Stripe,
    Wave,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Stripe => Mode::Stripe,
            ModeArg::Wave => Mode::Wave,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic clean/noisy tiles and dataset manifests.
    Synth(SynthArgs),
    /// Train a CycleGAN on unpaired clean and noisy manifests.
    Train(TrainArgs),
    /// Remove stripe or wave noise from a scene.
    Denoise(DenoiseArgs),
    /// PSNR and SSIM of a test raster against ground truth.
    Eval(EvalArgs),
    /// Subband projection or pyramid mosaic of one band.
    Wavelet(WaveletArgs),
    /// Column moment-matching destriping.
    BaselineDestripe(BaselineArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    tiles: usize,
    /// Leading tiles listed in the training manifests; the rest are held out.
    #[arg(long, default_value_t = 8)]
    train_tiles: usize,
    #[arg(long, default_value_t = 512)]
    size: usize,
    /// Stripe offset standard deviation, DN.
    #[arg(long)]
    sigma: Option<f64>,
    /// Relative vertical modulation of stripes.
    #[arg(long)]
    drift: Option<f64>,
    /// Wave amplitude, DN.
    #[arg(long)]
    amplitude: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    clean_manifest: PathBuf,
    #[arg(long)]
    noisy_manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Loss history CSV; defaults to the checkpoint path with a .csv extension.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    noise_out: Option<PathBuf>,
    /// Stripe window width over the downsampled scene (0 = whole scene).
    #[arg(long)]
    window: Option<usize>,
    /// Keep samples outside the DN range.
    #[arg(long)]
    no_clip: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PEAK)]
    peak: f64,
    #[arg(long, default_value_t = 0)]
    band: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WaveletOp {
    Project,
    Decompose,
}

#[derive(Args)]
struct WaveletArgs {
    #[arg(long, value_enum)]
    op: WaveletOp,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 9)]
    levels: usize,
    /// Subbands to keep, e.g. `HL:1-9` or `LH:1-6,LL:6`.
    #[arg(long, default_value = "HL:1-9")]
    select: String,
    #[arg(long, default_value_t = 0)]
    band: usize,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn write(raster: &Raster, path: &Path) -> Result<()> {
    write_raster(raster, path, RasterFormat::from_path(path))
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let mode = Mode::from(a.mode);
    let mut spec = SynthSpec::for_mode(mode);
    spec.tiles = a.tiles;
    spec.size = a.size;
    spec.seed = cli.seed.unwrap_or(0);
    if let Some(s) = a.sigma {
        spec.stripe.sigma = s;
    }
    if let Some(d) = a.drift {
        spec.stripe.drift = d;
    }
    if let Some(v) = a.amplitude {
        spec.wave.amplitude = v;
    }
    spec.stripe.validate()?;
    spec.wave.validate()?;
    eprintln!(
        "config: mode={mode} tiles={} size={} seed={} stripe={:?} wave={:?}",
        spec.tiles, spec.size, spec.seed, spec.stripe, spec.wave
    );
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut clean_m = String::new();
    let mut noisy_m = String::new();
    let mut held_m = String::new();
    for (t, (noisy, clean)) in synth_tiles::<f32>(&spec)?.into_iter().enumerate() {
        let cn = format!("clean_{t:02}.wcr");
        let nn = format!("noisy_{t:02}.wcr");
        write(&clean, &a.out.join(&cn))?;
        write(&noisy, &a.out.join(&nn))?;
        let lines = format!("clean {mode} {cn}\n");
        let nlines = format!("noisy {mode} {nn}\n");
        if t < a.train_tiles {
            clean_m += &lines;
            noisy_m += &nlines;
        } else {
            held_m += &lines;
            held_m += &nlines;
        }
    }
    for (name, text) in [("clean.txt", clean_m), ("noisy.txt", noisy_m), ("heldout.txt", held_m)] {
        atomic_write(&a.out.join(name), text.as_bytes())?;
    }
    Ok(())
}

fn load_scenes(path: &Path, domain: Domain, mode: Mode) -> Result<Vec<(String, Raster)>> {
    let entries: Vec<ManifestEntry> = read_manifest(path)?;
    let mut out = Vec::new();
    for e in entries.into_iter().filter(|e| e.domain == domain) {
        if e.mode != mode {
            return Err(Error::Mode(format!(
                "{} is tagged {}, training mode is {mode}",
                e.path.display(),
                e.mode
            )));
        }
        out.push((e.path.display().to_string(), read_raster(&e.path)?));
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{} lists no {domain} scenes", path.display())));
    }
    Ok(out)
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_json(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    eprintln!("config: {}", serde_json::to_string(&cfg).expect("config serializes"));
    let plan = cfg.plan()?;
    let clean = build_subband_store(&load_scenes(&a.clean_manifest, Domain::Clean, cfg.mode)?, Domain::Clean, &plan)?;
    let noisy = build_subband_store(&load_scenes(&a.noisy_manifest, Domain::Noisy, cfg.mode)?, Domain::Noisy, &plan)?;
    let verbose = cli.verbose;
    let outcome = train(&cfg, &clean, &noisy, &mut |r| {
        if verbose {
            eprintln!(
                "iter {} gan_G {:.4} gan_F {:.4} D_x {:.4} D_y {:.4} cycle {:.5} identity {:.5} lr {:.3e}",
                r.iteration, r.gan_g, r.gan_f, r.d_x, r.d_y, r.cycle, r.identity, r.lr
            );
        }
    })?;
    outcome.checkpoint().save(&a.out)?;
    let csv = a.loss_csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    atomic_write(&csv, history_csv(&outcome.history).as_bytes())?;
    Ok(())
}

fn denoise(a: &DenoiseArgs) -> Result<()> {
    let mode = Mode::from(a.mode);
    let model = Denoiser::load(&a.ckpt)?;
    if model.echo.mode != mode {
        return Err(Error::Mode(format!(
            "checkpoint was trained in {} mode, asked for {mode}",
            model.echo.mode
        )));
    }
    let mut settings = model.settings()?;
    if let Some(w) = a.window {
        settings.tile_w = w;
    }
    settings.clip = !a.no_clip;
    eprintln!(
        "config: mode={mode} levels={} selection={} factor={} scale={} tile={}x{} clip={}",
        settings.plan.levels,
        settings.plan.selection,
        settings.plan.downsample_factor,
        settings.data_scale,
        settings.tile_w,
        settings.tile_h,
        settings.clip
    );
    let scene = read_raster::<f32>(&a.input)?;
    let out = match mode {
        Mode::Stripe => destripe_scene(&scene, &model, &settings)?,
        Mode::Wave => dewave_scene(&scene, &model, &settings)?,
    };
    write(&out.clean, &a.out)?;
    if let Some(p) = &a.noise_out {
        let noise = Raster::from_bands(vec![out.noise])?.with_range(f64::MIN, f64::MAX);
        write_raster(&noise, p, RasterFormat::Wcr)?;
    }
    Ok(())
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn eval(a: &EvalArgs) -> Result<()> {
    eprintln!("config: peak={} band={} window=11 sigma=1.5", a.peak, a.band);
    let truth = read_raster::<f64>(&a.truth)?;
    let test = read_raster::<f64>(&a.test)?;
    for r in [&truth, &test] {
        if a.band >= r.bands() {
            return Err(Error::Dimension(format!("band {} of {}-band raster", a.band, r.bands())));
        }
    }
    let (t, x) = (truth.band(a.band), test.band(a.band));
    let p = psnr(&t, &x, a.peak)?;
    let s = ssim(&t, &x, &SsimConfig { range: a.peak, ..Default::default() })?;
    println!("PSNR {} SSIM {s:.6}", fmt_db(p));
    println!("{},{},{},{s:.8}", a.truth.display(), a.test.display(), fmt_db(p));
    Ok(())
}

fn wavelet(a: &WaveletArgs) -> Result<()> {
    eprintln!("config: op={:?} levels={} selection={} band={}", a.op, a.levels, a.select, a.band);
    let r = read_raster::<f32>(&a.input)?;
    if a.band >= r.bands() {
        return Err(Error::Dimension(format!("band {} of {}-band raster", a.band, r.bands())));
    }
    let plane = r.band(a.band);
    let out = match a.op {
        WaveletOp::Project => {
            let sel: SubbandSelection = a.select.parse()?;
            subband_project(&plane, a.levels, &sel)?
        }
        WaveletOp::Decompose => dwt2_multilevel(&plane, a.levels)?.mosaic(),
    };
    let raster = Raster::from_bands(vec![out])?.with_range(f64::MIN, f64::MAX);
    write_raster(&raster, &a.out, RasterFormat::Wcr)
}

fn baseline(a: &BaselineArgs) -> Result<()> {
    eprintln!("config: baseline=moment-matching");
    let r = read_raster::<f64>(&a.input)?;
    if r.bands() != 1 {
        return Err(Error::Mode(format!("baseline destriping takes 1 band, got {}", r.bands())));
    }
    let out = moment_match_destripe(&r.band(0))?.cast::<f32>();
    let (lo, hi) = r.range();
    let raster = Raster::from_bands(vec![out])?.with_range(lo, hi).clip_to_range();
    write(&raster, &a.out)
}

fn run(cli: &Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    match &cli.cmd {
        Command::Synth(a) => synth(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Denoise(a) => denoise(a),
        Command::Eval(a) => eval(a),
        Command::Wavelet(a) => wavelet(a),
        Command::BaselineDestripe(a) => baseline(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
