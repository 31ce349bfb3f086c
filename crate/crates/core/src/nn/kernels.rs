//! Raw numeric kernels behind the graph ops. All buffers are `[C,H,W]`
//! row-major slices.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn valid(&self) -> bool {
        self.in_h + 2 * self.pad >= self.kernel && self.in_w + 2 * self.pad >= self.kernel
    }

    /// `in_c * k * k`, the im2col row count.
    pub fn patch_len(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    pub fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad == 0
    }

    /// Output columns `ox` whose input column `ox*s + kj - p` is in bounds.
    fn valid_cols(&self, kj: usize) -> (usize, usize) {
        let (s, p, w) = (self.stride, self.pad as isize, self.in_w as isize);
        let off = kj as isize - p;
        let lo = if off >= 0 { 0 } else { ((-off) as usize).div_ceil(s) };
        let hi_excl = if w - off <= 0 {
            0
        } else {
            ((w - off) as usize).div_ceil(s)
        };
        (lo.min(self.out_w()), hi_excl.min(self.out_w()))
    }
}

/// Unfolds `x` into `col` of shape `[patch_len, out_h*out_w]`.
pub fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, col: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let plane = oh * ow;
    let k = g.kernel;
    for c in 0..g.in_c {
        let xc = &x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * plane;
                let dst = &mut col[row..row + plane];
                let (lo, hi) = g.valid_cols(kj);
                for oy in 0..oh {
                    let seg = &mut dst[oy * ow..(oy + 1) * ow];
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize || lo >= hi {
                        seg.fill(T::zero());
                        continue;
                    }
                    let src = &xc[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    seg[..lo].fill(T::zero());
                    seg[hi..].fill(T::zero());
                    let ix0 = lo * g.stride + kj - g.pad;
                    if g.stride == 1 {
                        seg[lo..hi].copy_from_slice(&src[ix0..ix0 + (hi - lo)]);
                    } else {
                        for (t, v) in seg[lo..hi].iter_mut().enumerate() {
                            *v = src[ix0 + t * g.stride];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `col` back into `dx`.
pub fn col2im<T: Scalar>(col: &[T], g: &ConvGeom, dx: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let plane = oh * ow;
    let k = g.kernel;
    for c in 0..g.in_c {
        let dxc = &mut dx[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * plane;
                let src = &col[row..row + plane];
                let (lo, hi) = g.valid_cols(kj);
                if lo >= hi {
                    continue;
                }
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let seg = &src[oy * ow..(oy + 1) * ow];
                    let dst = &mut dxc[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    let ix0 = lo * g.stride + kj - g.pad;
                    if g.stride == 1 {
                        for (d, &v) in dst[ix0..ix0 + (hi - lo)].iter_mut().zip(&seg[lo..hi]) {
                            *d += v;
                        }
                    } else {
                        for (t, &v) in seg[lo..hi].iter().enumerate() {
                            dst[ix0 + t * g.stride] += v;
                        }
                    }
                }
            }
        }
    }
}

/// `[C,H,W] -> [4C,H/2,W/2]`, channel blocks ordered LL, LH, HL, HH.
/// Orthonormal, so its adjoint is [`haar_up`].
pub fn haar_down<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, out: &mut [T]) {
    let (h2, w2) = (h / 2, w / 2);
    let block = c * h2 * w2;
    let half = T::lit(0.5);
    for ch in 0..c {
        let xc = &x[ch * h * w..(ch + 1) * h * w];
        for i in 0..h2 {
            let top = &xc[2 * i * w..(2 * i + 1) * w];
            let bot = &xc[(2 * i + 1) * w..(2 * i + 2) * w];
            for j in 0..w2 {
                let (a, b, cc, d) = (top[2 * j], top[2 * j + 1], bot[2 * j], bot[2 * j + 1]);
                let o = ch * h2 * w2 + i * w2 + j;
                out[o] = (a + b + cc + d) * half;
                out[block + o] = (a + b - cc - d) * half;
                out[2 * block + o] = (a - b + cc - d) * half;
                out[3 * block + o] = (a - b - cc + d) * half;
            }
        }
    }
}

/// Inverse of [`haar_down`]: `[4C,h,w] -> [C,2h,2w]`.
pub fn haar_up<T: Scalar>(x: &[T], c: usize, h2: usize, w2: usize, out: &mut [T]) {
    let (h, w) = (2 * h2, 2 * w2);
    let block = c * h2 * w2;
    let half = T::lit(0.5);
    for ch in 0..c {
        for i in 0..h2 {
            for j in 0..w2 {
                let o = ch * h2 * w2 + i * w2 + j;
                let (ll, lh, hl, hh) = (x[o], x[block + o], x[2 * block + o], x[3 * block + o]);
                let base = ch * h * w;
                out[base + 2 * i * w + 2 * j] = (ll + lh + hl + hh) * half;
                out[base + 2 * i * w + 2 * j + 1] = (ll + lh - hl - hh) * half;
                out[base + (2 * i + 1) * w + 2 * j] = (ll - lh + hl - hh) * half;
                out[base + (2 * i + 1) * w + 2 * j + 1] = (ll - lh - hl + hh) * half;
            }
        }
    }
}

/// Per-channel normalization statistics; writes `xhat` and returns `1/std`
/// per channel. Moments accumulate in f64.
pub fn instance_stats<T: Scalar>(x: &[T], c: usize, n: usize, eps: f64, xhat: &mut [T]) -> Vec<T> {
    let mut inv = Vec::with_capacity(c);
    for ch in 0..c {
        let xs = &x[ch * n..(ch + 1) * n];
        let mean = xs.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
        let var = xs.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n as f64;
        let is = 1.0 / (var + eps).sqrt();
        for (o, v) in xhat[ch * n..(ch + 1) * n].iter_mut().zip(xs) {
            *o = T::lit((v.as_f64() - mean) * is);
        }
        inv.push(T::lit(is));
    }
    inv
}
