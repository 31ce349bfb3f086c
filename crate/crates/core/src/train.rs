//! Adversarial and consistency losses, Adam, and the alternating
//! CycleGAN training loop.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{sample_patch, DomainStore, Mode, PatchSpec, SubbandPlan};
use crate::error::{Error, Result};
use crate::nn::{
    discriminator_forward, generator_forward, Checkpoint, DiscriminatorConfig, Gradients,
    GeneratorConfig, Graph, ModelParams, Tensor, Var,
};
use crate::raster::atomic_write;
use crate::scalar::Scalar;
use crate::wavelet::SubbandSelection;

pub const G_PREFIX: &str = "G.";
pub const F_PREFIX: &str = "F.";
pub const DX_PREFIX: &str = "Dx.";
pub const DY_PREFIX: &str = "Dy.";

/// 2^16: maps the DN range onto roughly unit scale. A power of two keeps
/// the normalization exact in floating point.
pub const DEFAULT_DATA_SCALE: f64 = 65536.0;

/// `mean (s - 1)^2`.
pub fn lsgan_g_loss(fake_scores: &[f64]) -> f64 {
    fake_scores.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>() / fake_scores.len() as f64
}

/// `0.5 mean (s_real - 1)^2 + 0.5 mean s_fake^2`.
pub fn lsgan_d_loss(real_scores: &[f64], fake_scores: &[f64]) -> f64 {
    let r = real_scores.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>() / real_scores.len() as f64;
    let f = fake_scores.iter().map(|s| s * s).sum::<f64>() / fake_scores.len() as f64;
    0.5 * r + 0.5 * f
}

pub fn mean_abs_diff<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x.as_f64() - y.as_f64()).abs())
        .sum();
    Ok(s / a.numel() as f64)
}

/// `mean|F(G(y)) - y| + mean|G(F(x)) - x|`.
pub fn cycle_loss<T: Scalar>(y: &Tensor<T>, fgy: &Tensor<T>, x: &Tensor<T>, gfx: &Tensor<T>) -> Result<f64> {
    Ok(mean_abs_diff(fgy, y)? + mean_abs_diff(gfx, x)?)
}

/// `mean|G(x) - x| + mean|F(y) - y|`.
pub fn identity_loss<T: Scalar>(x: &Tensor<T>, gx: &Tensor<T>, y: &Tensor<T>, fy: &Tensor<T>) -> Result<f64> {
    Ok(mean_abs_diff(gx, x)? + mean_abs_diff(fy, y)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub gan_g: f64,
    pub gan_f: f64,
    pub cycle: f64,
    pub identity: f64,
}

pub fn total_objective(p: &LossParts, lambda: f64, gamma: f64) -> f64 {
    p.gan_g + p.gan_f + lambda * p.cycle + gamma * p.identity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub lr0: f64,
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// 0 selects the patch capacity of the noisy store.
    pub iters_per_epoch: usize,
    pub seed: u64,
    pub mode: Mode,
    /// 0 selects the mode default.
    pub patch_width: usize,
    pub patch_height: usize,
    pub gen_depth: usize,
    pub gen_width: usize,
    pub disc_width: usize,
    /// 0 selects the mode default.
    pub levels: usize,
    /// Empty selects the mode default.
    pub selection: String,
    pub downsample_factor: usize,
    /// Divisor applied to subband values before they enter the networks;
    /// 0 selects [`DEFAULT_DATA_SCALE`].
    pub data_scale: f64,
    pub flips: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 10.0,
            gamma: 5.0,
            epochs: 200,
            lr0: 2e-3,
            batch: 1,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            iters_per_epoch: 0,
            seed: 0,
            mode: Mode::Stripe,
            patch_width: 0,
            patch_height: 0,
            gen_depth: 4,
            gen_width: 64,
            disc_width: 64,
            levels: 0,
            selection: String::new(),
            downsample_factor: 32,
            data_scale: 0.0,
            flips: true,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("training config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn patch_spec(&self) -> PatchSpec {
        let (dw, dh) = self.mode.default_patch();
        PatchSpec {
            width: if self.patch_width == 0 { dw } else { self.patch_width },
            height: if self.patch_height == 0 { dh } else { self.patch_height },
            hflip: self.flips,
            vflip: self.flips,
        }
    }

    pub fn plan(&self) -> Result<SubbandPlan> {
        let mut plan = SubbandPlan::for_mode(self.mode);
        if self.levels != 0 {
            plan.levels = self.levels;
        }
        if !self.selection.is_empty() {
            plan.selection = self.selection.parse::<SubbandSelection>()?;
        }
        plan.downsample_factor = self.downsample_factor;
        plan.selection.validate(plan.levels)?;
        Ok(plan)
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            in_channels: self.mode.channels(),
            depth: self.gen_depth,
            base_width: self.gen_width,
        }
    }

    pub fn discriminator(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            in_channels: self.mode.channels(),
            base_width: self.disc_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) {
            return bad("lambda and gamma must be non-negative");
        }
        if !(self.lr0 > 0.0) {
            return bad("lr0 must be positive");
        }
        if self.epochs == 0 || self.batch == 0 {
            return bad("epochs and batch must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("adam hyperparameters out of range");
        }
        if !(self.data_scale >= 0.0) || !self.data_scale.is_finite() {
            return bad("data_scale must be finite and non-negative");
        }
        if self.downsample_factor == 0 {
            return bad("downsample_factor must be positive");
        }
        self.generator().validate()?;
        self.discriminator().validate()?;
        let p = self.patch_spec();
        let m = self.generator().multiple();
        if !p.width.is_multiple_of(m) || !p.height.is_multiple_of(m) {
            return Err(Error::Config(format!(
                "patch {}x{} not divisible by 2^{}",
                p.width, p.height, self.gen_depth
            )));
        }
        if p.width < DiscriminatorConfig::MIN_INPUT || p.height < DiscriminatorConfig::MIN_INPUT {
            return Err(Error::Config(format!(
                "patch {}x{} below the discriminator minimum {}",
                p.width,
                p.height,
                DiscriminatorConfig::MIN_INPUT
            )));
        }
        self.plan()?;
        Ok(())
    }
}

/// Learning rate at epoch index `epoch`: constant for the first half, then
/// linear to zero at the last epoch.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let total = cfg.epochs;
    let flat = total / 2;
    if epoch <= flat {
        cfg.lr0
    } else if epoch >= total {
        0.0
    } else {
        cfg.lr0 * (total - epoch) as f64 / (total - flat) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl From<&TrainConfig> for AdamHyper {
    fn from(c: &TrainConfig) -> Self {
        AdamHyper {
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.eps,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OptimState {
    pub m: BTreeMap<String, Vec<f64>>,
    pub v: BTreeMap<String, Vec<f64>>,
    pub step: u64,
}

/// Bias-corrected Adam update. Parameters without a gradient entry are
/// treated as having a zero gradient.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &BTreeMap<String, Tensor<T>>,
    state: &mut OptimState,
    lr: f64,
    hp: &AdamHyper,
) -> Result<()> {
    for (name, g) in grads {
        let p = params.get(name)?;
        if p.shape() != g.shape() {
            return Err(Error::Dimension(format!(
                "gradient {name} has shape {:?}, parameter {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if let Some(i) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("gradient {name}[{i}] = {}", g.data()[i])));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    for (name, p) in params.tensors.iter_mut() {
        let n = p.numel();
        let m = state.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
        let v = state.v.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
        let g = grads.get(name).map(Tensor::data);
        for i in 0..n {
            let gi = g.map_or(0.0, |g| g[i].as_f64());
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * gi;
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * gi * gi;
            let upd = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + hp.eps);
            let pi = &mut p.data_mut()[i];
            *pi = T::lit(pi.as_f64() - upd);
        }
    }
    Ok(())
}

/// `mean (s - 1)^2` on the graph.
pub fn lsgan_g_var<T: Scalar>(g: &mut Graph<T>, score: Var) -> Var {
    let d = g.add_scalar(score, -1.0);
    let sq = g.square(d);
    g.mean(sq)
}

/// `0.5 mean (s_real - 1)^2 + 0.5 mean s_fake^2` on the graph.
pub fn lsgan_d_var<T: Scalar>(g: &mut Graph<T>, real: Var, fake: Var) -> Result<Var> {
    let r = lsgan_g_var(g, real);
    let f = g.square(fake);
    let f = g.mean(f);
    let s = g.add(r, f)?;
    Ok(g.scale(s, 0.5))
}

/// The four networks of the translation model.
#[derive(Debug, Clone)]
pub struct CycleGan<T> {
    pub gen: GeneratorConfig,
    pub disc: DiscriminatorConfig,
    /// Noisy to clean.
    pub g: ModelParams<T>,
    /// Clean to noisy.
    pub f: ModelParams<T>,
    pub dx: ModelParams<T>,
    pub dy: ModelParams<T>,
}

impl<T: Scalar> CycleGan<T> {
    pub fn init(gen: GeneratorConfig, disc: DiscriminatorConfig, seed: u64) -> Result<Self> {
        let s = seed.wrapping_mul(4);
        Ok(CycleGan {
            gen,
            disc,
            g: gen.init_params(s)?,
            f: gen.init_params(s.wrapping_add(1))?,
            dx: disc.init_params(s.wrapping_add(2))?,
            dy: disc.init_params(s.wrapping_add(3))?,
        })
    }
}

/// Generator-side values of one sample pair.
pub struct GeneratorStep<T> {
    pub parts: LossParts,
    pub total: f64,
    pub fake_x: Tensor<T>,
    pub fake_y: Tensor<T>,
    pub grads: Gradients<T>,
}

/// Graph handles of the full objective.
pub struct ObjectiveVars {
    pub total: Var,
    pub gan_g: Var,
    pub gan_f: Var,
    pub cycle: Var,
    pub identity: Var,
    pub fake_x: Var,
    pub fake_y: Var,
}

/// Records `gan_G + gan_F + lambda * cycle + gamma * identity` for one
/// (clean `x`, noisy `y`) pair on `g`.
pub fn build_objective<T: Scalar>(
    g: &mut Graph<T>,
    m: &CycleGan<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    lambda: f64,
    gamma: f64,
) -> Result<ObjectiveVars> {
    let (gen, disc) = (&m.gen, &m.disc);
    let xv = g.input(x.clone());
    let yv = g.input(y.clone());
    let fake_x = generator_forward(g, gen, &m.g, G_PREFIX, yv)?;
    let fake_y = generator_forward(g, gen, &m.f, F_PREFIX, xv)?;
    let sx = discriminator_forward(g, disc, &m.dx, DX_PREFIX, fake_x)?;
    let sy = discriminator_forward(g, disc, &m.dy, DY_PREFIX, fake_y)?;
    let gan_g = lsgan_g_var(g, sx);
    let gan_f = lsgan_g_var(g, sy);
    let fgy = generator_forward(g, gen, &m.f, F_PREFIX, fake_x)?;
    let gfx = generator_forward(g, gen, &m.g, G_PREFIX, fake_y)?;
    let c1 = g.l1(fgy, yv)?;
    let c2 = g.l1(gfx, xv)?;
    let cycle = g.add(c1, c2)?;
    let gx = generator_forward(g, gen, &m.g, G_PREFIX, xv)?;
    let fy = generator_forward(g, gen, &m.f, F_PREFIX, yv)?;
    let i1 = g.l1(gx, xv)?;
    let i2 = g.l1(fy, yv)?;
    let identity = g.add(i1, i2)?;
    let adv = g.add(gan_g, gan_f)?;
    let wc = g.scale(cycle, lambda);
    let wi = g.scale(identity, gamma);
    let reg = g.add(wc, wi)?;
    let total = g.add(adv, reg)?;
    Ok(ObjectiveVars {
        total,
        gan_g,
        gan_f,
        cycle,
        identity,
        fake_x,
        fake_y,
    })
}

/// The full objective for one pair, differentiated with respect to both
/// generators only.
pub fn generator_objective<T: Scalar>(
    m: &CycleGan<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    lambda: f64,
    gamma: f64,
) -> Result<GeneratorStep<T>> {
    let mut g = Graph::new();
    g.freeze(DX_PREFIX);
    g.freeze(DY_PREFIX);
    let o = build_objective(&mut g, m, x, y, lambda, gamma)?;
    let item = |v: Var| g.value(v).item().as_f64();
    let parts = LossParts {
        gan_g: item(o.gan_g),
        gan_f: item(o.gan_f),
        cycle: item(o.cycle),
        identity: item(o.identity),
    };
    let total = item(o.total);
    guard_finite("generator objective", total)?;
    let grads = g.backward(o.total)?;
    Ok(GeneratorStep {
        parts,
        total,
        fake_x: g.value(o.fake_x).clone(),
        fake_y: g.value(o.fake_y).clone(),
        grads,
    })
}

pub struct DiscriminatorStep<T> {
    pub d_x: f64,
    pub d_y: f64,
    pub grads: Gradients<T>,
}

/// Discriminator objective on real samples and detached fakes.
pub fn discriminator_objective<T: Scalar>(
    m: &CycleGan<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    fake_x: &Tensor<T>,
    fake_y: &Tensor<T>,
) -> Result<DiscriminatorStep<T>> {
    let mut g = Graph::new();
    let disc = &m.disc;
    let inputs = [x, y, fake_x, fake_y].map(|t| g.input(t.clone()));
    let rx = discriminator_forward(&mut g, disc, &m.dx, DX_PREFIX, inputs[0])?;
    let fx = discriminator_forward(&mut g, disc, &m.dx, DX_PREFIX, inputs[2])?;
    let ry = discriminator_forward(&mut g, disc, &m.dy, DY_PREFIX, inputs[1])?;
    let fy = discriminator_forward(&mut g, disc, &m.dy, DY_PREFIX, inputs[3])?;
    let d_x = lsgan_d_var(&mut g, rx, fx)?;
    let d_y = lsgan_d_var(&mut g, ry, fy)?;
    let total = g.add(d_x, d_y)?;
    let (lx, ly) = (g.value(d_x).item().as_f64(), g.value(d_y).item().as_f64());
    guard_finite("discriminator objective", lx + ly)?;
    let grads = g.backward(total)?;
    Ok(DiscriminatorStep { d_x: lx, d_y: ly, grads })
}

fn guard_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!("{what} is {v}")))
    }
}

/// Entries of `grads` under `prefix`, with the prefix removed.
pub fn split_grads<T: Scalar>(grads: &Gradients<T>, prefix: &str) -> BTreeMap<String, Tensor<T>> {
    grads
        .iter()
        .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
        .collect()
}

fn accumulate<T: Scalar>(acc: &mut Gradients<T>, add: Gradients<T>, w: f64) {
    let w = T::lit(w);
    for (k, g) in add {
        match acc.get_mut(&k) {
            Some(a) => a.data_mut().iter_mut().zip(g.data()).for_each(|(a, &b)| *a += b * w),
            None => {
                acc.insert(k, g.map(|v| v * w));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub gan_g: f64,
    pub gan_f: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub cycle: f64,
    pub identity: f64,
    pub lr: f64,
}

pub fn history_csv(records: &[LossRecord]) -> String {
    let mut s = String::from("iteration,gan_G,gan_F,D_x,D_y,cycle,identity,lr\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.iteration, r.gan_g, r.gan_f, r.d_x, r.d_y, r.cycle, r.identity, r.lr
        );
    }
    s
}

pub fn write_history_csv(records: &[LossRecord], path: &Path) -> Result<()> {
    atomic_write(path, history_csv(records).as_bytes())
}

/// Configuration echo stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEcho {
    pub mode: Mode,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub levels: usize,
    pub selection: String,
    pub downsample_factor: usize,
    pub data_scale: f64,
    pub iterations: usize,
    pub train: TrainConfig,
}

impl ModelEcho {
    pub fn plan(&self) -> Result<SubbandPlan> {
        Ok(SubbandPlan {
            mode: self.mode,
            levels: self.levels,
            selection: self.selection.parse()?,
            downsample_factor: self.downsample_factor,
        })
    }
}

pub struct TrainOutcome {
    pub model: CycleGan<f32>,
    pub history: Vec<LossRecord>,
    pub echo: ModelEcho,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint {
            config: serde_json::to_string(&self.echo).expect("echo serializes"),
            ..Default::default()
        };
        c.insert_group(G_PREFIX, &self.model.g.tensors);
        c.insert_group(F_PREFIX, &self.model.f.tensors);
        c.insert_group(DX_PREFIX, &self.model.dx.tensors);
        c.insert_group(DY_PREFIX, &self.model.dy.tensors);
        c
    }
}

/// Alternating generator/discriminator optimization over unpaired stores.
/// `observe` sees every iteration's record as it is produced.
pub fn train(
    cfg: &TrainConfig,
    clean: &DomainStore<f32>,
    noisy: &DomainStore<f32>,
    observe: &mut dyn FnMut(&LossRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    for s in [clean, noisy] {
        if s.mode != cfg.mode {
            return Err(Error::Mode(format!("{} store used for {} training", s.mode, cfg.mode)));
        }
        if s.is_empty() {
            return Err(Error::Config(format!("{} store is empty", s.domain)));
        }
    }
    let spec = cfg.patch_spec();
    let plan = cfg.plan()?;
    let scale = if cfg.data_scale > 0.0 {
        cfg.data_scale
    } else {
        DEFAULT_DATA_SCALE
    };
    let inv = (1.0 / scale) as f32;
    let ipe = if cfg.iters_per_epoch > 0 {
        cfg.iters_per_epoch
    } else {
        noisy.capacity(&spec).max(1)
    };
    let total_iters = cfg.epochs * ipe;

    let mut model = CycleGan::<f32>::init(cfg.generator(), cfg.discriminator(), cfg.seed)?;
    let mut rng_x = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_x.set_stream(1);
    let mut rng_y = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_y.set_stream(2);
    let hp = AdamHyper::from(cfg);
    let mut opt: [OptimState; 4] = Default::default();
    let mut history = Vec::with_capacity(total_iters);
    let w = 1.0 / cfg.batch as f64;

    for it in 0..total_iters {
        let lr = lr_at(it / ipe, cfg);
        let mut gen_grads = Gradients::new();
        let mut disc_grads = Gradients::new();
        let mut rec = LossRecord {
            iteration: it + 1,
            gan_g: 0.0,
            gan_f: 0.0,
            d_x: 0.0,
            d_y: 0.0,
            cycle: 0.0,
            identity: 0.0,
            lr,
        };
        let mut pairs = Vec::with_capacity(cfg.batch);
        for _ in 0..cfg.batch {
            let x = sample_patch(clean, &spec, &mut rng_x)?.map(|v| v * inv);
            let y = sample_patch(noisy, &spec, &mut rng_y)?.map(|v| v * inv);
            let step = generator_objective(&model, &x, &y, cfg.lambda, cfg.gamma)?;
            rec.gan_g += w * step.parts.gan_g;
            rec.gan_f += w * step.parts.gan_f;
            rec.cycle += w * step.parts.cycle;
            rec.identity += w * step.parts.identity;
            accumulate(&mut gen_grads, step.grads, w);
            pairs.push((x, y, step.fake_x, step.fake_y));
        }
        adam_step(&mut model.g, &split_grads(&gen_grads, G_PREFIX), &mut opt[0], lr, &hp)?;
        adam_step(&mut model.f, &split_grads(&gen_grads, F_PREFIX), &mut opt[1], lr, &hp)?;

        for (x, y, fx, fy) in &pairs {
            let step = discriminator_objective(&model, x, y, fx, fy)?;
            rec.d_x += w * step.d_x;
            rec.d_y += w * step.d_y;
            accumulate(&mut disc_grads, step.grads, w);
        }
        adam_step(&mut model.dx, &split_grads(&disc_grads, DX_PREFIX), &mut opt[2], lr, &hp)?;
        adam_step(&mut model.dy, &split_grads(&disc_grads, DY_PREFIX), &mut opt[3], lr, &hp)?;

        for (name, v) in [
            ("gan_G", rec.gan_g),
            ("gan_F", rec.gan_f),
            ("D_x", rec.d_x),
            ("D_y", rec.d_y),
            ("cycle", rec.cycle),
            ("identity", rec.identity),
        ] {
            if !v.is_finite() {
                return Err(Error::Divergence(format!("{name} = {v} at iteration {}", it + 1)));
            }
        }
        observe(&rec);
        history.push(rec);
    }

    let echo = ModelEcho {
        mode: cfg.mode,
        generator: model.gen,
        discriminator: model.disc,
        levels: plan.levels,
        selection: plan.selection.to_string(),
        downsample_factor: plan.downsample_factor,
        data_scale: scale,
        iterations: total_iters,
        train: cfg.clone(),
    };
    Ok(TrainOutcome { model, history, echo })
}
