//! Scene-level reconstruction: subband construction, tiled generator
//! inference, noise estimation and subtraction.

use std::path::Path;

use rayon::prelude::*;

use crate::data::{downsample_vertical, upsample_vertical, Mode, SubbandPlan};
use crate::error::{Error, Result};
use crate::nn::{generate, Checkpoint, GeneratorConfig, ModelParams, Tensor};
use crate::plane::{mirror_index, Plane};
use crate::raster::MultiBandRaster;
use crate::scalar::Scalar;
use crate::train::{ModelEcho, TrainConfig, DEFAULT_DATA_SCALE, G_PREFIX};

/// Index of the green band in RGBN rasters.
pub const GREEN: usize = 1;

/// `sub_noisy - sub_denoised`.
pub fn estimate_noise<T: Scalar>(sub_noisy: &Plane<T>, sub_denoised: &Plane<T>) -> Result<Plane<T>> {
    sub_noisy.sub(sub_denoised)
}

/// Overlapping tiles whose centered cores partition the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileLayout {
    pub tile_w: usize,
    pub tile_h: usize,
    pub core_w: usize,
    pub core_h: usize,
}

impl Default for TileLayout {
    fn default() -> Self {
        TileLayout {
            tile_w: 128,
            tile_h: 128,
            core_w: 64,
            core_h: 64,
        }
    }
}

impl TileLayout {
    pub fn new(tile_w: usize, tile_h: usize, core_w: usize, core_h: usize) -> Result<Self> {
        let ok = |t: usize, c: usize| c > 0 && c <= t && (t - c).is_multiple_of(2);
        if !ok(tile_w, core_w) || !ok(tile_h, core_h) {
            return Err(Error::Layout(format!(
                "core {core_w}x{core_h} cannot be centered in tile {tile_w}x{tile_h}"
            )));
        }
        Ok(TileLayout {
            tile_w,
            tile_h,
            core_w,
            core_h,
        })
    }

    /// Tile with a half-size core, i.e. stride equal to half the tile.
    pub fn half_overlap(tile_w: usize, tile_h: usize) -> Result<Self> {
        Self::new(tile_w, tile_h, tile_w / 2, tile_h / 2)
    }

    fn margins(&self) -> (usize, usize) {
        ((self.tile_w - self.core_w) / 2, (self.tile_h - self.core_h) / 2)
    }

    /// Tiles across and down for a `w x h` scene.
    pub fn grid(&self, w: usize, h: usize) -> (usize, usize) {
        (w.div_ceil(self.core_w), h.div_ceil(self.core_h))
    }

    /// Scene coordinates (row, col) of every tile's top-left corner, row-major.
    pub fn origins(&self, w: usize, h: usize) -> Vec<(isize, isize)> {
        let (nx, ny) = self.grid(w, h);
        let (mx, my) = self.margins();
        (0..ny)
            .flat_map(|ty| {
                (0..nx).map(move |tx| {
                    (
                        (ty * self.core_h) as isize - my as isize,
                        (tx * self.core_w) as isize - mx as isize,
                    )
                })
            })
            .collect()
    }

    /// Cuts tiles from every channel; out-of-scene samples are mirrored.
    pub fn extract<T: Scalar>(&self, t: &Tensor<T>) -> Vec<Tensor<T>> {
        let (c, h, w) = t.chw();
        self.origins(w, h)
            .into_iter()
            .map(|(r0, c0)| {
                let mut data = Vec::with_capacity(c * self.tile_w * self.tile_h);
                let rows: Vec<usize> = (0..self.tile_h).map(|i| mirror_index(r0 + i as isize, h)).collect();
                let cols: Vec<usize> = (0..self.tile_w).map(|j| mirror_index(c0 + j as isize, w)).collect();
                for k in 0..c {
                    let chan = &t.data()[k * h * w..(k + 1) * h * w];
                    for &r in &rows {
                        data.extend(cols.iter().map(|&q| chan[r * w + q]));
                    }
                }
                Tensor::new(vec![c, self.tile_h, self.tile_w], data).expect("tile size")
            })
            .collect()
    }

    pub fn extract_plane<T: Scalar>(&self, p: &Plane<T>) -> Vec<Plane<T>> {
        let t = Tensor::from_planes(std::slice::from_ref(p)).expect("single plane");
        self.extract(&t).into_iter().map(|t| t.channel(0)).collect()
    }
}

/// Writes each tile's core into the scene; every pixel comes from exactly
/// one tile.
pub fn assemble_tiles<T: Scalar>(tiles: &[Plane<T>], layout: &TileLayout, w: usize, h: usize) -> Result<Plane<T>> {
    let (nx, ny) = layout.grid(w, h);
    if tiles.len() != nx * ny {
        return Err(Error::Layout(format!(
            "{} tiles for a {nx}x{ny} grid",
            tiles.len()
        )));
    }
    let (mx, my) = layout.margins();
    let mut out = Plane::zeros(w, h);
    for (k, tile) in tiles.iter().enumerate() {
        if tile.dims() != (layout.tile_w, layout.tile_h) {
            return Err(Error::Layout(format!(
                "tile {k} is {}x{}, layout wants {}x{}",
                tile.width(),
                tile.height(),
                layout.tile_w,
                layout.tile_h
            )));
        }
        let (ty, tx) = (k / nx, k % nx);
        let (r0, c0) = (ty * layout.core_h, tx * layout.core_w);
        let cw = layout.core_w.min(w - c0);
        for r in 0..layout.core_h.min(h - r0) {
            out.row_mut(r0 + r)[c0..c0 + cw].copy_from_slice(&tile.row(my + r)[mx..mx + cw]);
        }
    }
    Ok(out)
}

/// Anything that maps a normalized subband tile to its denoised version.
pub trait TileModel: Sync {
    fn denoise_tile(&self, x: &Tensor<f32>) -> Result<Tensor<f32>>;
    /// Spatial multiple every tile dimension must honor.
    fn multiple(&self) -> usize {
        1
    }
}

/// A trained noisy-to-clean generator with its subband settings.
#[derive(Debug, Clone)]
pub struct Denoiser {
    pub echo: ModelEcho,
    pub params: ModelParams<f32>,
}

impl Denoiser {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let echo: ModelEcho = serde_json::from_str(&ckpt.config)
            .map_err(|e| Error::Config(format!("checkpoint config: {e}")))?;
        let params = ModelParams {
            tensors: ckpt.group(G_PREFIX),
        };
        params.check_shapes(&echo.generator.param_shapes())?;
        if !params.is_finite() {
            return Err(Error::Divergence("checkpoint holds non-finite weights".into()));
        }
        Ok(Denoiser { echo, params })
    }

    /// Randomly initialized generator with a zeroed output layer; the
    /// flows become exact identities with it.
    pub fn identity(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let gen = cfg.generator();
        let mut params = gen.init_params::<f32>(cfg.seed)?;
        params.zero_output_layer();
        let plan = cfg.plan()?;
        let echo = ModelEcho {
            mode: cfg.mode,
            generator: gen,
            discriminator: cfg.discriminator(),
            levels: plan.levels,
            selection: plan.selection.to_string(),
            downsample_factor: plan.downsample_factor,
            data_scale: if cfg.data_scale > 0.0 { cfg.data_scale } else { DEFAULT_DATA_SCALE },
            iterations: 0,
            train: cfg.clone(),
        };
        Ok(Denoiser { echo, params })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.echo.generator
    }

    /// Flow settings recorded at training time.
    pub fn settings(&self) -> Result<FlowSettings> {
        let patch = self.echo.train.patch_spec();
        Ok(FlowSettings {
            plan: self.echo.plan()?,
            data_scale: self.echo.data_scale,
            tile_w: match self.echo.mode {
                Mode::Stripe => patch.width,
                Mode::Wave => 128,
            },
            tile_h: 128,
            clip: true,
        })
    }
}

impl TileModel for Denoiser {
    fn denoise_tile(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        generate(&self.echo.generator, &self.params, x)
    }

    fn multiple(&self) -> usize {
        self.echo.generator.multiple()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSettings {
    pub plan: SubbandPlan,
    /// Subband values are divided by this before entering the model.
    pub data_scale: f64,
    /// Stripe mode: window width over the downsampled scene, 0 for the
    /// whole scene at once. Wave mode: tile width.
    pub tile_w: usize,
    /// Wave mode tile height; stripe mode always processes full columns.
    pub tile_h: usize,
    pub clip: bool,
}

impl FlowSettings {
    pub fn for_mode(mode: Mode) -> Self {
        FlowSettings {
            plan: SubbandPlan::for_mode(mode),
            data_scale: 1.0,
            tile_w: match mode {
                Mode::Stripe => 2048,
                Mode::Wave => 128,
            },
            tile_h: 128,
            clip: true,
        }
    }
}

/// A reconstructed raster and the noise that was removed from it.
#[derive(Debug, Clone)]
pub struct FlowOutput {
    pub clean: MultiBandRaster<f32>,
    pub noise: Plane<f32>,
}

fn round_up(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Runs `model` over the tiles of a normalized subband stack and returns
/// the assembled noise of channel `chan`, rescaled to DN.
fn tiled_noise(
    model: &dyn TileModel,
    sub: &Tensor<f32>,
    layout: &TileLayout,
    chan: usize,
    scale: f32,
) -> Result<Plane<f32>> {
    let (_, h, w) = sub.chw();
    let tiles = layout.extract(sub);
    let noise: Result<Vec<Plane<f32>>> = tiles
        .par_iter()
        .map(|t| {
            let out = model.denoise_tile(t)?;
            if out.shape() != t.shape() {
                return Err(Error::Size(format!("model returned {:?} for {:?}", out.shape(), t.shape())));
            }
            let n = estimate_noise(&t.channel(chan), &out.channel(chan))?;
            Ok(n.map(|v| v * scale))
        })
        .collect();
    assemble_tiles(&noise?, layout, w, h)
}

fn check_scale(s: f64) -> Result<(f32, f32)> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Config(format!("data scale must be positive, got {s}")));
    }
    Ok(((1.0 / s) as f32, s as f32))
}

/// Vertical-stripe removal on a single-band raster.
pub fn destripe_scene(
    raster: &MultiBandRaster<f32>,
    model: &dyn TileModel,
    settings: &FlowSettings,
) -> Result<FlowOutput> {
    let plan = &settings.plan;
    if plan.mode != Mode::Stripe || raster.bands() != 1 {
        return Err(Error::Mode(format!(
            "stripe flow needs a stripe model and a 1-band raster, got {} model and {} bands",
            plan.mode,
            raster.bands()
        )));
    }
    let (inv, scale) = check_scale(settings.data_scale)?;
    let input = raster.band(0);
    let (w, h) = input.dims();
    let sub = plan.project(raster)?.remove(0);
    let ds = downsample_vertical(&sub, plan.downsample_factor)?;
    let m = model.multiple().max(1);
    let rows = round_up(ds.height(), m);
    let layout = if settings.tile_w == 0 {
        let cols = round_up(w, m);
        TileLayout::new(cols, rows, cols, rows)?
    } else {
        if !settings.tile_w.is_multiple_of(2 * m) || !settings.tile_w.is_multiple_of(4) {
            return Err(Error::Layout(format!(
                "stripe window {} must be a multiple of {} and 4",
                settings.tile_w,
                2 * m
            )));
        }
        TileLayout::new(settings.tile_w, rows, settings.tile_w / 2, rows)?
    };
    let norm = Tensor::from_planes(&[ds.map(|v| v * inv)])?;
    let noise_ds = tiled_noise(model, &norm, &layout, 0, scale)?;
    let noise = upsample_vertical(&noise_ds, plan.downsample_factor, h);
    let mut clean = MultiBandRaster::from_bands(vec![input.sub(&noise)?])?.with_range(raster.range().0, raster.range().1);
    if settings.clip {
        clean = clean.clip_to_range();
    }
    Ok(FlowOutput { clean, noise })
}

/// Green-band wave removal on a 4-band raster; other bands are copied.
pub fn dewave_scene(
    raster: &MultiBandRaster<f32>,
    model: &dyn TileModel,
    settings: &FlowSettings,
) -> Result<FlowOutput> {
    let plan = &settings.plan;
    if plan.mode != Mode::Wave || raster.bands() != 4 {
        return Err(Error::Mode(format!(
            "wave flow needs a wave model and a 4-band raster, got {} model and {} bands",
            plan.mode,
            raster.bands()
        )));
    }
    let (inv, scale) = check_scale(settings.data_scale)?;
    let m = model.multiple().max(1);
    if !settings.tile_w.is_multiple_of(m) || !settings.tile_h.is_multiple_of(m) {
        return Err(Error::Layout(format!(
            "tile {}x{} not divisible by {m}",
            settings.tile_w, settings.tile_h
        )));
    }
    let layout = TileLayout::half_overlap(settings.tile_w, settings.tile_h)?;
    let subs = plan.project(raster)?;
    let norm: Vec<Plane<f32>> = subs.iter().map(|p| p.map(|v| v * inv)).collect();
    let noise = tiled_noise(model, &Tensor::from_planes(&norm)?, &layout, GREEN, scale)?;
    let mut green = raster.band(GREEN).sub(&noise)?;
    if settings.clip {
        let (lo, hi) = raster.range();
        let (lo, hi) = (lo as f32, hi as f32);
        green = green.map(|v| v.max(lo).min(hi));
    }
    let mut clean = raster.clone();
    clean.set_band(GREEN, &green)?;
    Ok(FlowOutput { clean, noise })
}

/// Per-column mean/std alignment to the global image statistics.
pub fn moment_match_destripe<T: Scalar>(p: &Plane<T>) -> Result<Plane<T>> {
    let (w, h) = p.dims();
    if h < 2 {
        return Err(Error::Size(format!("moment matching needs 2 rows, got {h}")));
    }
    let n = (w * h) as f64;
    let mu_ref = p.data().iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let sd_ref = (p.data().iter().map(|v| (v.as_f64() - mu_ref).powi(2)).sum::<f64>() / n).sqrt();
    let mut gain = vec![1.0; w];
    let mut mean = vec![0.0; w];
    for j in 0..w {
        let mu = (0..h).map(|i| p.get(i, j).as_f64()).sum::<f64>() / h as f64;
        let sd = ((0..h).map(|i| (p.get(i, j).as_f64() - mu).powi(2)).sum::<f64>() / h as f64).sqrt();
        mean[j] = mu;
        if sd > 0.0 {
            gain[j] = sd_ref / sd;
        }
    }
    Ok(Plane::from_fn(w, h, |i, j| {
        T::lit((p.get(i, j).as_f64() - mean[j]) * gain[j] + mu_ref)
    }))
}

/// Largest deviation of a column mean from the global mean.
pub fn max_column_mean_deviation<T: Scalar>(p: &Plane<T>) -> f64 {
    let (w, h) = p.dims();
    let mu = p.mean();
    (0..w)
        .map(|j| ((0..h).map(|i| p.get(i, j).as_f64()).sum::<f64>() / h as f64 - mu).abs())
        .fold(0.0, f64::max)
}
