//! PSNR and SSIM.

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::scalar::Scalar;

pub const DEFAULT_PEAK: f64 = 65535.0;

fn same_dims<T: Scalar>(a: &Plane<T>, b: &Plane<T>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean squared error, accumulated in f64.
pub fn mse<T: Scalar>(a: &Plane<T>, b: &Plane<T>) -> Result<f64> {
    same_dims(a, b)?;
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
        .sum();
    Ok(s / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical planes.
pub fn psnr<T: Scalar>(a: &Plane<T>, b: &Plane<T>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Config(format!("peak must be positive, got {peak}")));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            range: DEFAULT_PEAK,
        }
    }
}

impl SsimConfig {
    /// Normalized 1-D Gaussian taps; the window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let c = (self.window as f64 - 1.0) / 2.0;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

/// Separable 'valid' filtering of an f64 image.
fn filter_valid(x: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut tmp = vec![0.0; ow * h];
    for i in 0..h {
        let row = &x[i * w..(i + 1) * w];
        for j in 0..ow {
            tmp[i * ow + j] = taps.iter().zip(&row[j..j + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for i in 0..oh {
        for (t, tap) in taps.iter().enumerate() {
            let src = &tmp[(i + t) * ow..(i + t + 1) * ow];
            for (o, v) in out[i * ow..(i + 1) * ow].iter_mut().zip(src) {
                *o += tap * v;
            }
        }
    }
    out
}

/// Mean of the local SSIM map over every full window position.
pub fn ssim<T: Scalar>(a: &Plane<T>, b: &Plane<T>, cfg: &SsimConfig) -> Result<f64> {
    same_dims(a, b)?;
    let (w, h) = a.dims();
    if w < cfg.window || h < cfg.window {
        return Err(Error::Size(format!(
            "ssim window {} exceeds {w}x{h}",
            cfg.window
        )));
    }
    if !(cfg.k1 > 0.0 && cfg.k2 > 0.0 && cfg.range > 0.0) {
        return Err(Error::Config("ssim constants must be positive".into()));
    }
    let taps = cfg.taps();
    let av: Vec<f64> = a.data().iter().map(|v| v.as_f64()).collect();
    let bv: Vec<f64> = b.data().iter().map(|v| v.as_f64()).collect();
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = filter_valid(&av, w, h, &taps);
    let mu_b = filter_valid(&bv, w, h, &taps);
    let e_aa = filter_valid(&prod(&av, &av), w, h, &taps);
    let e_bb = filter_valid(&prod(&bv, &bv), w, h, &taps);
    let e_ab = filter_valid(&prod(&av, &bv), w, h, &taps);
    let c1 = (cfg.k1 * cfg.range).powi(2);
    let c2 = (cfg.k2 * cfg.range).powi(2);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / n as f64)
}
