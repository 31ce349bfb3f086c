//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every op applied during a forward pass. Parameters
//! enter through [`Graph::param`] under a unique key and are shared when
//! the same key is requested again, so a network applied several times in
//! one objective accumulates a single gradient per parameter.

use std::collections::{BTreeMap, HashMap};

use super::kernels::{col2im, haar_down, haar_up, im2col, instance_stats, ConvGeom};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Input,
    Param,
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    InstanceNorm {
        x: Var,
        scale: Var,
        shift: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    Relu(Var),
    LeakyRelu(Var, T),
    HaarDown(Var),
    HaarUp(Var),
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
        len: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Square(Var),
    Mean(Var),
    MeanAbs(Var),
    GlobalAvgPool(Var),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Gradients keyed by parameter key.
pub type Gradients<T> = BTreeMap<String, Tensor<T>>;

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    params: HashMap<String, Var>,
    track: bool,
    frozen: Vec<String>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: HashMap::new(),
            track: true,
            frozen: Vec::new(),
        }
    }

    /// A graph whose parameters never require gradients.
    pub fn inference() -> Self {
        Graph {
            track: false,
            ..Self::new()
        }
    }

    /// Parameters whose key starts with `prefix` are treated as constants.
    pub fn freeze(&mut self, prefix: &str) {
        self.frozen.push(prefix.to_string());
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Input, false)
    }

    /// Trainable leaf, shared by key.
    pub fn param(&mut self, key: &str, t: &Tensor<T>) -> Var {
        if let Some(&v) = self.params.get(key) {
            return v;
        }
        let track = self.track && !self.frozen.iter().any(|p| key.starts_with(p.as_str()));
        let v = self.push(t.clone(), Op::Param, track);
        self.params.insert(key.to_string(), v);
        v
    }

    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 3 || ws.len() != 4 || ws[2] != ws[3] || ws[1] != xs[0] {
            return Err(Error::Size(format!(
                "conv weight {ws:?} incompatible with input {xs:?}"
            )));
        }
        let geom = ConvGeom {
            in_c: xs[0],
            in_h: xs[1],
            in_w: xs[2],
            kernel: ws[2],
            stride,
            pad,
        };
        if !geom.valid() {
            return Err(Error::Size(format!(
                "input {}x{} smaller than kernel {}",
                geom.in_w, geom.in_h, geom.kernel
            )));
        }
        let out_c = ws[0];
        let (oh, ow) = (geom.out_h(), geom.out_w());
        let mut out = Tensor::zeros(&[out_c, oh, ow]);
        {
            let xv = self.value(x).data();
            let wv = self.value(w).data();
            if geom.is_pointwise() {
                T::gemm(false, false, out_c, oh * ow, geom.patch_len(), T::one(), wv, xv, T::zero(), out.data_mut());
            } else {
                let mut col = vec![T::zero(); geom.patch_len() * oh * ow];
                im2col(xv, &geom, &mut col);
                T::gemm(false, false, out_c, oh * ow, geom.patch_len(), T::one(), wv, &col, T::zero(), out.data_mut());
            }
        }
        if let Some(b) = b {
            let bv = self.value(b).data().to_vec();
            if bv.len() != out_c {
                return Err(Error::Size(format!("conv bias {} vs {out_c} channels", bv.len())));
            }
            for (chunk, &bias) in out.data_mut().chunks_mut(oh * ow).zip(&bv) {
                chunk.iter_mut().for_each(|v| *v += bias);
            }
        }
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        Ok(self.push(out, Op::Conv { x, w, b, geom }, ng))
    }

    pub fn instance_norm(&mut self, x: Var, scale: Var, shift: Var, eps: f64) -> Result<Var> {
        let (c, h, w) = self.value(x).chw();
        if self.value(scale).numel() != c || self.value(shift).numel() != c {
            return Err(Error::Size("instance norm affine size".into()));
        }
        let n = h * w;
        let mut xhat = vec![T::zero(); c * n];
        let inv_std = instance_stats(self.value(x).data(), c, n, eps, &mut xhat);
        let sc = self.value(scale).data();
        let sh = self.value(shift).data();
        let mut out = Tensor::zeros(&[c, h, w]);
        for ch in 0..c {
            for (o, &v) in out.data_mut()[ch * n..(ch + 1) * n]
                .iter_mut()
                .zip(&xhat[ch * n..(ch + 1) * n])
            {
                *o = sc[ch] * v + sh[ch];
            }
        }
        let ng = self.ng(x) || self.ng(scale) || self.ng(shift);
        Ok(self.push(
            out,
            Op::InstanceNorm {
                x,
                scale,
                shift,
                xhat,
                inv_std,
            },
            ng,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(T::zero()));
        let ng = self.ng(x);
        self.push(out, Op::Relu(x), ng)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::lit(slope);
        let out = self
            .value(x)
            .map(|v| if v > T::zero() { v } else { v * s });
        let ng = self.ng(x);
        self.push(out, Op::LeakyRelu(x, s), ng)
    }

    pub fn haar_down(&mut self, x: Var) -> Result<Var> {
        let (c, h, w) = self.value(x).chw();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::Size(format!("haar pooling needs even dims, got {w}x{h}")));
        }
        let mut out = Tensor::zeros(&[4 * c, h / 2, w / 2]);
        haar_down(self.value(x).data(), c, h, w, out.data_mut());
        let ng = self.ng(x);
        Ok(self.push(out, Op::HaarDown(x), ng))
    }

    pub fn haar_up(&mut self, x: Var) -> Result<Var> {
        let (c4, h, w) = self.value(x).chw();
        if c4 % 4 != 0 {
            return Err(Error::Size(format!("haar unpooling needs 4k channels, got {c4}")));
        }
        let mut out = Tensor::zeros(&[c4 / 4, 2 * h, 2 * w]);
        haar_up(self.value(x).data(), c4 / 4, h, w, out.data_mut());
        let ng = self.ng(x);
        Ok(self.push(out, Op::HaarUp(x), ng))
    }

    /// Channel-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let (_, h, w) = self.value(parts[0]).chw();
        let mut c = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (pc, ph, pw) = self.value(p).chw();
            if (ph, pw) != (h, w) {
                return Err(Error::Size(format!("concat {pw}x{ph} with {w}x{h}")));
            }
            c += pc;
            data.extend_from_slice(self.value(p).data());
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        let out = Tensor::new(vec![c, h, w], data)?;
        Ok(self.push(out, Op::Concat(parts.to_vec()), ng))
    }

    /// Channels `start..start+len`.
    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (c, h, w) = self.value(x).chw();
        if start + len > c {
            return Err(Error::Size(format!("slice {start}+{len} of {c} channels")));
        }
        let n = h * w;
        let data = self.value(x).data()[start * n..(start + len) * n].to_vec();
        let out = Tensor::new(vec![len, h, w], data)?;
        let ng = self.ng(x);
        Ok(self.push(out, Op::Slice { x, start, len }, ng))
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Dimension(format!(
                "shapes {:?} and {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let mut out = self.value(a).clone();
        for (o, &v) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o += v;
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let mut out = self.value(a).clone();
        for (o, &v) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o -= v;
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Sub(a, b), ng))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let c = T::lit(c);
        let out = self.value(x).map(|v| v * c);
        let ng = self.ng(x);
        self.push(out, Op::Scale(x, c), ng)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let c = T::lit(c);
        let out = self.value(x).map(|v| v + c);
        let ng = self.ng(x);
        self.push(out, Op::AddScalar(x), ng)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v * v);
        let ng = self.ng(x);
        self.push(out, Op::Square(x), ng)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let m = v.data().iter().map(|t| t.as_f64()).sum::<f64>() / v.numel() as f64;
        let ng = self.ng(x);
        self.push(Tensor::scalar(T::lit(m)), Op::Mean(x), ng)
    }

    pub fn mean_abs(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let m = v.data().iter().map(|t| t.as_f64().abs()).sum::<f64>() / v.numel() as f64;
        let ng = self.ng(x);
        self.push(Tensor::scalar(T::lit(m)), Op::MeanAbs(x), ng)
    }

    /// `mean |a - b|`.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        Ok(self.mean_abs(d))
    }

    /// `[C,H,W] -> [C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let (c, h, w) = self.value(x).chw();
        let n = h * w;
        let data: Vec<T> = self
            .value(x)
            .data()
            .chunks(n)
            .map(|ch| T::lit(ch.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64))
            .collect();
        let ng = self.ng(x);
        self.push(Tensor::new(vec![c], data).unwrap(), Op::GlobalAvgPool(x), ng)
    }

    /// Fully connected layer over the flattened input: `w` is `[out, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let n = self.value(x).numel();
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 2 || ws[1] != n || self.value(b).numel() != ws[0] {
            return Err(Error::Size(format!("linear weight {ws:?} for input of {n} values")));
        }
        let mut out = self.value(b).clone();
        T::gemm(false, false, ws[0], 1, n, T::one(), self.value(w).data(), self.value(x).data(), T::one(), out.data_mut());
        let out = Tensor::new(vec![ws[0]], out.into_data())?;
        let ng = self.ng(x) || self.ng(w) || self.ng(b);
        Ok(self.push(out, Op::Linear { x, w, b }, ng))
    }

    /// Reverse pass from the scalar `loss`; returns gradients of every
    /// tracked parameter that the loss depends on.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(Error::Gradient(format!("loss has shape {:?}", lv.shape())));
        }
        if !lv.item().is_finite() {
            return Err(Error::Gradient(format!("loss is {}", lv.item())));
        }
        if !self.ng(loss) {
            return Err(Error::Gradient("loss is detached from every parameter".into()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        fn acc<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, n: usize) -> &mut Vec<T> {
            grads[v.0].get_or_insert_with(|| vec![T::zero(); n])
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Input => {}
                Op::Param => {
                    grads[idx] = Some(gy);
                }
                Op::Conv { x, w, b, geom } => {
                    let out_c = self.value(*w).shape()[0];
                    let p = geom.out_h() * geom.out_w();
                    let k = geom.patch_len();
                    let xv = self.value(*x).data();
                    let col_owned;
                    let col: &[T] = if geom.is_pointwise() {
                        xv
                    } else {
                        let mut c = vec![T::zero(); k * p];
                        im2col(xv, geom, &mut c);
                        col_owned = c;
                        &col_owned
                    };
                    if self.ng(*w) {
                        let gw = acc(&mut grads, *w, out_c * k);
                        T::gemm(false, true, out_c, k, p, T::one(), &gy, col, T::one(), gw);
                    }
                    if let Some(b) = b {
                        if self.ng(*b) {
                            let gb = acc(&mut grads, *b, out_c);
                            for (g, chunk) in gb.iter_mut().zip(gy.chunks(p)) {
                                *g += chunk.iter().copied().sum();
                            }
                        }
                    }
                    if self.ng(*x) {
                        let wv = self.value(*w).data();
                        let nx = self.value(*x).numel();
                        if geom.is_pointwise() {
                            let gx = acc(&mut grads, *x, nx);
                            T::gemm(true, false, k, p, out_c, T::one(), wv, &gy, T::one(), gx);
                        } else {
                            let mut dcol = vec![T::zero(); k * p];
                            T::gemm(true, false, k, p, out_c, T::one(), wv, &gy, T::zero(), &mut dcol);
                            let gx = acc(&mut grads, *x, nx);
                            col2im(&dcol, geom, gx);
                        }
                    }
                }
                Op::InstanceNorm {
                    x,
                    scale,
                    shift,
                    xhat,
                    inv_std,
                } => {
                    let (c, h, w) = self.value(*x).chw();
                    let n = h * w;
                    let sc = self.value(*scale).data();
                    if self.ng(*scale) {
                        let gs = acc(&mut grads, *scale, c);
                        for ch in 0..c {
                            gs[ch] += gy[ch * n..(ch + 1) * n]
                                .iter()
                                .zip(&xhat[ch * n..(ch + 1) * n])
                                .map(|(&g, &xh)| g * xh)
                                .sum();
                        }
                    }
                    if self.ng(*shift) {
                        let gb = acc(&mut grads, *shift, c);
                        for ch in 0..c {
                            gb[ch] += gy[ch * n..(ch + 1) * n].iter().copied().sum();
                        }
                    }
                    if self.ng(*x) {
                        let gx = acc(&mut grads, *x, c * n);
                        let nf = T::lit(n as f64);
                        for ch in 0..c {
                            let gys = &gy[ch * n..(ch + 1) * n];
                            let xs = &xhat[ch * n..(ch + 1) * n];
                            let mut sum_d = 0.0f64;
                            let mut sum_dx = 0.0f64;
                            for (&g, &xh) in gys.iter().zip(xs) {
                                let d = (g * sc[ch]).as_f64();
                                sum_d += d;
                                sum_dx += d * xh.as_f64();
                            }
                            let (sum_d, sum_dx) = (T::lit(sum_d), T::lit(sum_dx));
                            let k = inv_std[ch] / nf;
                            for ((o, &g), &xh) in gx[ch * n..(ch + 1) * n].iter_mut().zip(gys).zip(xs) {
                                *o += k * (nf * g * sc[ch] - sum_d - xh * sum_dx);
                            }
                        }
                    }
                }
                Op::Relu(x) => {
                    let xv = self.value(*x).data();
                    let gx = acc(&mut grads, *x, xv.len());
                    for ((o, &g), &v) in gx.iter_mut().zip(&gy).zip(xv) {
                        if v > T::zero() {
                            *o += g;
                        }
                    }
                }
                Op::LeakyRelu(x, s) => {
                    let xv = self.value(*x).data();
                    let gx = acc(&mut grads, *x, xv.len());
                    for ((o, &g), &v) in gx.iter_mut().zip(&gy).zip(xv) {
                        *o += if v > T::zero() { g } else { g * *s };
                    }
                }
                Op::HaarDown(x) => {
                    let (c, h, w) = self.value(*x).chw();
                    let mut up = vec![T::zero(); c * h * w];
                    haar_up(&gy, c, h / 2, w / 2, &mut up);
                    let gx = acc(&mut grads, *x, up.len());
                    gx.iter_mut().zip(&up).for_each(|(o, &v)| *o += v);
                }
                Op::HaarUp(x) => {
                    let (c, h, w) = node.value.chw();
                    let mut down = vec![T::zero(); c * h * w];
                    haar_down(&gy, c, h, w, &mut down);
                    let gx = acc(&mut grads, *x, down.len());
                    gx.iter_mut().zip(&down).for_each(|(o, &v)| *o += v);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.value(p).numel();
                        if self.ng(p) {
                            let gp = acc(&mut grads, p, n);
                            gp.iter_mut().zip(&gy[off..off + n]).for_each(|(o, &v)| *o += v);
                        }
                        off += n;
                    }
                }
                Op::Slice { x, start, len } => {
                    let (_, h, w) = self.value(*x).chw();
                    let n = h * w;
                    let nx = self.value(*x).numel();
                    let gx = acc(&mut grads, *x, nx);
                    gx[start * n..(start + len) * n]
                        .iter_mut()
                        .zip(&gy)
                        .for_each(|(o, &v)| *o += v);
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let neg = matches!(node.op, Op::Sub(..));
                    if self.ng(*a) {
                        let ga = acc(&mut grads, *a, gy.len());
                        ga.iter_mut().zip(&gy).for_each(|(o, &v)| *o += v);
                    }
                    if self.ng(*b) {
                        let gb = acc(&mut grads, *b, gy.len());
                        if neg {
                            gb.iter_mut().zip(&gy).for_each(|(o, &v)| *o -= v);
                        } else {
                            gb.iter_mut().zip(&gy).for_each(|(o, &v)| *o += v);
                        }
                    }
                }
                Op::Scale(x, c) => {
                    let gx = acc(&mut grads, *x, gy.len());
                    gx.iter_mut().zip(&gy).for_each(|(o, &v)| *o += v * *c);
                }
                Op::AddScalar(x) => {
                    let gx = acc(&mut grads, *x, gy.len());
                    gx.iter_mut().zip(&gy).for_each(|(o, &v)| *o += v);
                }
                Op::Square(x) => {
                    let xv = self.value(*x).data();
                    let two = T::lit(2.0);
                    let gx = acc(&mut grads, *x, xv.len());
                    for ((o, &g), &v) in gx.iter_mut().zip(&gy).zip(xv) {
                        *o += two * v * g;
                    }
                }
                Op::Mean(x) => {
                    let n = self.value(*x).numel();
                    let g = gy[0] / T::lit(n as f64);
                    let gx = acc(&mut grads, *x, n);
                    gx.iter_mut().for_each(|o| *o += g);
                }
                Op::MeanAbs(x) => {
                    let xv = self.value(*x).data();
                    let g = gy[0] / T::lit(xv.len() as f64);
                    let gx = acc(&mut grads, *x, xv.len());
                    for (o, &v) in gx.iter_mut().zip(xv) {
                        if v > T::zero() {
                            *o += g;
                        } else if v < T::zero() {
                            *o -= g;
                        }
                    }
                }
                Op::GlobalAvgPool(x) => {
                    let (c, h, w) = self.value(*x).chw();
                    let n = h * w;
                    let gx = acc(&mut grads, *x, c * n);
                    let inv = T::lit(1.0 / n as f64);
                    for ch in 0..c {
                        let g = gy[ch] * inv;
                        gx[ch * n..(ch + 1) * n].iter_mut().for_each(|o| *o += g);
                    }
                }
                Op::Linear { x, w, b } => {
                    let n = self.value(*x).numel();
                    let out = gy.len();
                    if self.ng(*w) {
                        let gw = acc(&mut grads, *w, out * n);
                        T::gemm(false, false, out, n, 1, T::one(), &gy, self.value(*x).data(), T::one(), gw);
                    }
                    if self.ng(*b) {
                        let gb = acc(&mut grads, *b, out);
                        gb.iter_mut().zip(&gy).for_each(|(o, &v)| *o += v);
                    }
                    if self.ng(*x) {
                        let wv = self.value(*w).data();
                        let gx = acc(&mut grads, *x, n);
                        T::gemm(true, false, n, 1, out, T::one(), wv, &gy, T::one(), gx);
                    }
                }
            }
        }

        let mut out = Gradients::new();
        for (key, &v) in &self.params {
            if let Some(g) = grads.get_mut(v.0).and_then(Option::take) {
                let shape = self.value(v).shape().to_vec();
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Gradient(format!("non-finite gradient for {key}")));
                }
                out.insert(key.clone(), Tensor::new(shape, g)?);
            }
        }
        Ok(out)
    }
}
