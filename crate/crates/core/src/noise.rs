//! Parametric structured-noise generators and synthetic clean scenes.
//!
//! Stripe noise is a per-column offset profile with an optional smooth
//! vertical gain drift; wave noise is a sum of vertical sinusoids whose phase
//! random-walks across columns. Both are deterministic in their seed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::data::Mode;
use crate::plane::Plane;
use crate::raster::MultiBandRaster;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeNoiseParams {
    /// Per-column offset standard deviation before smoothing, in DN.
    pub sigma: f64,
    /// Width of the circular moving average applied across columns.
    pub corr_len: usize,
    /// Maximum relative vertical modulation of the stripe amplitude.
    pub drift: f64,
    pub seed: u64,
}

impl Default for StripeNoiseParams {
    fn default() -> Self {
        StripeNoiseParams {
            sigma: 1300.0,
            corr_len: 1,
            drift: 0.0,
            seed: 0,
        }
    }
}

impl StripeNoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || self.corr_len == 0 || !(0.0..=1.0).contains(&self.drift) {
            return Err(Error::Config(format!("invalid stripe noise params {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveNoiseParams {
    pub amplitude: f64,
    /// Vertical periods in pixels, one sinusoid each.
    pub periods: Vec<f64>,
    /// Standard deviation of the per-column phase step, radians.
    pub phase_jitter: f64,
    pub seed: u64,
}

impl Default for WaveNoiseParams {
    fn default() -> Self {
        WaveNoiseParams {
            amplitude: 600.0,
            periods: vec![6.0, 17.0],
            phase_jitter: 0.05,
            seed: 0,
        }
    }
}

impl WaveNoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0)
            || !(self.phase_jitter >= 0.0)
            || self.periods.iter().any(|&t| !(t >= 2.0))
        {
            return Err(Error::Config(format!("invalid wave noise params {self:?}")));
        }
        Ok(())
    }
}

fn circular_box(values: &[f64], width: usize) -> Vec<f64> {
    let n = values.len();
    let half = width as isize / 2;
    (0..n)
        .map(|j| {
            let mut s = 0.0;
            for t in 0..width as isize {
                s += values[(j as isize + t - half).rem_euclid(n as isize) as usize];
            }
            s / width as f64
        })
        .collect()
}

/// `n(i, j) = m(i) * c(j)`: `c` is iid Gaussian per column smoothed over
/// `corr_len` columns, `m(i) = 1 + drift * s(i)` with `s` a smooth profile
/// normalized to `[-1, 1]`.
pub fn gen_stripe_noise<T: Scalar>(
    width: usize,
    height: usize,
    p: &StripeNoiseParams,
) -> Result<Plane<T>> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let raw: Vec<f64> = (0..width)
        .map(|_| p.sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let cols = circular_box(&raw, p.corr_len);

    // drift profile: random walk, smoothed, centred, scaled to max |s| = 1
    let mut walk = Vec::with_capacity(height);
    let mut acc = 0.0;
    for _ in 0..height {
        acc += rng.sample::<f64, _>(StandardNormal);
        walk.push(acc);
    }
    let mut profile = circular_box(&walk, (height / 8).max(1));
    let mean = profile.iter().sum::<f64>() / height.max(1) as f64;
    profile.iter_mut().for_each(|v| *v -= mean);
    let peak = profile.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        profile.iter_mut().for_each(|v| *v /= peak);
    }

    Ok(Plane::from_fn(width, height, |i, j| {
        T::lit((1.0 + p.drift * profile[i]) * cols[j])
    }))
}

/// `n(i, j) = amplitude * sum_k sin(2 pi i / T_k + phi_k(j))`.
pub fn gen_wave_noise<T: Scalar>(
    width: usize,
    height: usize,
    p: &WaveNoiseParams,
) -> Result<Plane<T>> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let step = Normal::new(0.0, p.phase_jitter).expect("validated jitter");
    let phases: Vec<Vec<f64>> = p
        .periods
        .iter()
        .map(|_| {
            let mut phi = rng.random_range(0.0..2.0 * PI);
            (0..width)
                .map(|j| {
                    if j > 0 {
                        phi += step.sample(&mut rng);
                    }
                    phi
                })
                .collect()
        })
        .collect();
    Ok(Plane::from_fn(width, height, |i, j| {
        let s: f64 = p
            .periods
            .iter()
            .zip(&phases)
            .map(|(&t, phi)| (2.0 * PI * i as f64 / t + phi[j]).sin())
            .sum();
        T::lit(p.amplitude * s)
    }))
}

/// Adds `noise` to one band of `clean` and clips. Returns `(noisy, clean)`.
pub fn make_synthetic_pair<T: Scalar>(
    clean: &MultiBandRaster<T>,
    noise: &Plane<T>,
    band: usize,
) -> Result<(MultiBandRaster<T>, MultiBandRaster<T>)> {
    if noise.dims() != (clean.width(), clean.height()) {
        return Err(Error::Dimension(format!(
            "noise {}x{} vs raster {}x{}",
            noise.width(),
            noise.height(),
            clean.width(),
            clean.height()
        )));
    }
    if band >= clean.bands() {
        return Err(Error::Dimension(format!(
            "band {band} of {}-band raster",
            clean.bands()
        )));
    }
    let mut noisy = clean.clone();
    let summed = clean.band(band).add(noise)?;
    noisy.set_band(band, &summed)?;
    Ok((noisy.clip_to_range(), clean.clone()))
}

/// Parameters of the synthetic "relatively clean" scene generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    /// Mean level in DN.
    pub mean: f64,
    /// Standard deviation of the common texture, DN.
    pub texture_std: f64,
    /// Number of flat rectangular patches (fields, roofs).
    pub patches: usize,
    /// Weight of the per-band independent texture relative to the common one.
    pub band_independence: f64,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            mean: 22000.0,
            texture_std: 2500.0,
            patches: 12,
            band_independence: 0.15,
            seed: 0,
        }
    }
}

fn box_blur_axis(data: &mut [f64], w: usize, h: usize, r: usize, horizontal: bool) {
    let (outer, inner) = if horizontal { (h, w) } else { (w, h) };
    let idx = |o: usize, t: usize| if horizontal { o * w + t } else { t * w + o };
    let mut line = vec![0.0; inner];
    let mut prefix = vec![0.0; inner + 1];
    for o in 0..outer {
        for t in 0..inner {
            line[t] = data[idx(o, t)];
        }
        for t in 0..inner {
            prefix[t + 1] = prefix[t] + line[t];
        }
        for t in 0..inner {
            let a = t.saturating_sub(r);
            let b = (t + r + 1).min(inner);
            data[idx(o, t)] = (prefix[b] - prefix[a]) / (b - a) as f64;
        }
    }
}

/// Zero-mean, unit-std random field with correlation length ~`scale` px.
fn smooth_field(w: usize, h: usize, scale: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut f: Vec<f64> = (0..w * h).map(|_| rng.sample(StandardNormal)).collect();
    let r = scale / 2;
    if r > 0 {
        for _ in 0..3 {
            box_blur_axis(&mut f, w, h, r, true);
            box_blur_axis(&mut f, w, h, r, false);
        }
    }
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / f.len() as f64;
    let sd = var.sqrt().max(1e-12);
    f.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    f
}

/// Multi-scale texture with flat patches, shared across bands with
/// per-band gain, offset and a small independent component. Clipped to
/// `[0, 65535]`.
pub fn gen_clean_scene<T: Scalar>(
    width: usize,
    height: usize,
    bands: usize,
    p: &SceneParams,
) -> Result<MultiBandRaster<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = width * height;
    let mut common = vec![0.0; n];
    for (scale, weight) in [(2usize, 0.35), (8, 0.55), (32, 0.75)] {
        let f = smooth_field(width, height, scale, &mut rng);
        common.iter_mut().zip(&f).for_each(|(c, v)| *c += weight * v);
    }
    for _ in 0..p.patches {
        let pw = rng.random_range(width / 16 + 1..width / 4 + 2);
        let ph = rng.random_range(height / 16 + 1..height / 4 + 2);
        let c0 = rng.random_range(0..width);
        let r0 = rng.random_range(0..height);
        let level: f64 = rng.sample(StandardNormal);
        for i in r0..(r0 + ph).min(height) {
            for j in c0..(c0 + pw).min(width) {
                common[i * width + j] = 0.4 * common[i * width + j] + 1.2 * level;
            }
        }
    }
    let mut samples = Vec::with_capacity(n * bands);
    for _ in 0..bands {
        let gain = rng.random_range(0.8..1.2);
        let offset = rng.random_range(-0.1..0.1) * p.mean;
        let own = smooth_field(width, height, 4, &mut rng);
        for (c, o) in common.iter().zip(&own) {
            let v = p.mean + offset + p.texture_std * gain * (c + p.band_independence * o);
            samples.push(T::lit(v.clamp(0.0, 65535.0)));
        }
    }
    MultiBandRaster::new(width, height, bands, samples)
}

/// A set of synthetic (noisy, clean) tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub mode: Mode,
    pub tiles: usize,
    pub size: usize,
    pub stripe: StripeNoiseParams,
    pub wave: WaveNoiseParams,
    pub scene: SceneParams,
    pub seed: u64,
}

impl SynthSpec {
    /// Noise at about 2% of the DN range.
    pub fn for_mode(mode: Mode) -> Self {
        SynthSpec {
            mode,
            tiles: 16,
            size: 512,
            stripe: StripeNoiseParams::default(),
            wave: WaveNoiseParams {
                amplitude: 1300.0,
                ..Default::default()
            },
            scene: SceneParams::default(),
            seed: 0,
        }
    }
}

/// Stripe mode yields 1-band tiles, wave mode 4-band tiles with noise on
/// the green band. Tile `t` depends only on `seed` and `t`.
pub fn synth_tiles<T: Scalar>(spec: &SynthSpec) -> Result<Vec<(MultiBandRaster<T>, MultiBandRaster<T>)>> {
    (0..spec.tiles as u64)
        .map(|t| {
            let base = spec.seed.wrapping_mul(1 << 20).wrapping_add(2 * t);
            let scene = SceneParams {
                seed: base,
                ..spec.scene.clone()
            };
            let (bands, band) = match spec.mode {
                Mode::Stripe => (1, 0),
                Mode::Wave => (4, 1),
            };
            let clean = gen_clean_scene(spec.size, spec.size, bands, &scene)?;
            let noise = match spec.mode {
                Mode::Stripe => gen_stripe_noise(
                    spec.size,
                    spec.size,
                    &StripeNoiseParams {
                        seed: base + 1,
                        ..spec.stripe.clone()
                    },
                )?,
                Mode::Wave => gen_wave_noise(
                    spec.size,
                    spec.size,
                    &WaveNoiseParams {
                        seed: base + 1,
                        ..spec.wave.clone()
                    },
                )?,
            };
            make_synthetic_pair(&clean, &noise, band)
        })
        .collect()
}
