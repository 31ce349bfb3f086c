//! Tight-frame U-Net generator and patch discriminator.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const INIT_STD: f64 = 0.02;
pub const NORM_EPS: f64 = 1e-5;
const MAX_WIDTH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub in_channels: usize,
    /// Number of Haar pooling levels.
    pub depth: usize,
    pub base_width: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            in_channels: 1,
            depth: 4,
            base_width: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub in_channels: usize,
    pub base_width: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            in_channels: 1,
            base_width: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Gaussian,
    One,
    Zero,
}

/// Name, shape and initializer of one trainable tensor.
#[derive(Debug, Clone)]
struct ParamDecl {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn conv_decl(out: &mut Vec<ParamDecl>, name: &str, cout: usize, cin: usize, k: usize, bias: bool) {
    out.push(ParamDecl {
        name: format!("{name}.weight"),
        shape: vec![cout, cin, k, k],
        init: Init::Gaussian,
    });
    if bias {
        out.push(ParamDecl {
            name: format!("{name}.bias"),
            shape: vec![cout],
            init: Init::Zero,
        });
    }
}

fn norm_decl(out: &mut Vec<ParamDecl>, name: &str, c: usize) {
    out.push(ParamDecl {
        name: format!("{name}.scale"),
        shape: vec![c],
        init: Init::One,
    });
    out.push(ParamDecl {
        name: format!("{name}.shift"),
        shape: vec![c],
        init: Init::Zero,
    });
}

fn block_decl(out: &mut Vec<ParamDecl>, name: &str, cin: usize, c: usize) {
    conv_decl(out, &format!("{name}.conv1"), c, cin, 3, false);
    norm_decl(out, &format!("{name}.norm1"), c);
    conv_decl(out, &format!("{name}.conv2"), c, c, 3, false);
    norm_decl(out, &format!("{name}.norm2"), c);
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.in_channels == 0 || self.base_width == 0 {
            return Err(Error::Config(format!("degenerate generator config {self:?}")));
        }
        Ok(())
    }

    /// Channel count at pooling level `l` (0 = full resolution).
    pub fn width(&self, l: usize) -> usize {
        (self.base_width << l.min(16)).min(MAX_WIDTH)
    }

    /// Spatial dims must be multiples of this.
    pub fn multiple(&self) -> usize {
        1 << self.depth
    }

    fn decls(&self) -> Vec<ParamDecl> {
        let mut d = Vec::new();
        let mut cin = self.in_channels;
        for l in 0..self.depth {
            block_decl(&mut d, &format!("enc{l}"), cin, self.width(l));
            cin = self.width(l);
        }
        block_decl(&mut d, "mid", cin, self.width(self.depth));
        for l in (0..self.depth).rev() {
            conv_decl(&mut d, &format!("dec{l}.proj"), self.width(l), self.width(l + 1), 1, true);
            block_decl(&mut d, &format!("dec{l}"), 2 * self.width(l), self.width(l));
        }
        conv_decl(&mut d, "out", self.in_channels, self.width(0), 1, true);
        d
    }

    pub fn param_shapes(&self) -> BTreeMap<String, Vec<usize>> {
        self.decls().into_iter().map(|p| (p.name, p.shape)).collect()
    }

    pub fn init_params<T: Scalar>(&self, seed: u64) -> Result<ModelParams<T>> {
        self.validate()?;
        Ok(init_from_decls(&self.decls(), seed))
    }
}

impl DiscriminatorConfig {
    pub const STRIDES: [usize; 5] = [2, 2, 2, 1, 1];
    pub const KERNEL: usize = 4;
    pub const SLOPE: f64 = 0.2;
    /// Smallest accepted input height and width.
    pub const MIN_INPUT: usize = 32;

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_width == 0 {
            return Err(Error::Config(format!("degenerate discriminator config {self:?}")));
        }
        Ok(())
    }

    pub fn widths(&self) -> [usize; 5] {
        let b = self.base_width;
        [b, 2 * b, 4 * b, 8 * b, 8 * b].map(|w| w.min(MAX_WIDTH))
    }

    fn decls(&self) -> Vec<ParamDecl> {
        let mut d = Vec::new();
        let mut cin = self.in_channels;
        for (i, &w) in self.widths().iter().enumerate() {
            let normed = (1..4).contains(&i);
            conv_decl(&mut d, &format!("conv{}", i + 1), w, cin, Self::KERNEL, !normed);
            if normed {
                norm_decl(&mut d, &format!("norm{}", i + 1), w);
            }
            cin = w;
        }
        d.push(ParamDecl {
            name: "fc.weight".into(),
            shape: vec![1, cin],
            init: Init::Gaussian,
        });
        d.push(ParamDecl {
            name: "fc.bias".into(),
            shape: vec![1],
            init: Init::Zero,
        });
        d
    }

    pub fn param_shapes(&self) -> BTreeMap<String, Vec<usize>> {
        self.decls().into_iter().map(|p| (p.name, p.shape)).collect()
    }

    pub fn init_params<T: Scalar>(&self, seed: u64) -> Result<ModelParams<T>> {
        self.validate()?;
        Ok(init_from_decls(&self.decls(), seed))
    }
}

fn init_from_decls<T: Scalar>(decls: &[ParamDecl], seed: u64) -> ModelParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut tensors = BTreeMap::new();
    for d in decls {
        let t = match d.init {
            Init::Zero => Tensor::zeros(&d.shape),
            Init::One => Tensor::filled(&d.shape, T::one()),
            Init::Gaussian => {
                let mut t = Tensor::zeros(&d.shape);
                t.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = T::lit(normal.sample(&mut rng)));
                t
            }
        };
        tensors.insert(d.name.clone(), t);
    }
    ModelParams { tensors }
}

/// Named parameter tensors of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Verifies names and shapes against a declaration.
    pub fn check_shapes(&self, expected: &BTreeMap<String, Vec<usize>>) -> Result<()> {
        for (name, shape) in expected {
            let t = self.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        if self.tensors.len() != expected.len() {
            return Err(Error::Config(format!(
                "{} parameters, expected {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        Ok(())
    }

    /// Zeroes the final projection of a generator, making it the identity map.
    pub fn zero_output_layer(&mut self) {
        for name in ["out.weight", "out.bias"] {
            if let Some(t) = self.tensors.get_mut(name) {
                t.data_mut().iter_mut().for_each(|v| *v = T::zero());
            }
        }
    }
}

/// Registers the parameters of a network on a graph under `prefix`.
struct Bound<'a, T> {
    params: &'a ModelParams<T>,
    prefix: &'a str,
}

impl<T: Scalar> Bound<'_, T> {
    fn var(&self, g: &mut Graph<T>, name: &str) -> Result<Var> {
        let t = self.params.get(name)?;
        Ok(g.param(&format!("{}{name}", self.prefix), t))
    }

    fn conv(&self, g: &mut Graph<T>, x: Var, name: &str, stride: usize, pad: usize, bias: bool) -> Result<Var> {
        let w = self.var(g, &format!("{name}.weight"))?;
        let b = if bias {
            Some(self.var(g, &format!("{name}.bias"))?)
        } else {
            None
        };
        g.conv2d(x, w, b, stride, pad)
    }

    fn norm(&self, g: &mut Graph<T>, x: Var, name: &str) -> Result<Var> {
        let s = self.var(g, &format!("{name}.scale"))?;
        let b = self.var(g, &format!("{name}.shift"))?;
        g.instance_norm(x, s, b, NORM_EPS)
    }

    fn block(&self, g: &mut Graph<T>, x: Var, name: &str) -> Result<Var> {
        let mut h = x;
        for i in 1..=2 {
            h = self.conv(g, h, &format!("{name}.conv{i}"), 1, 1, false)?;
            h = self.norm(g, h, &format!("{name}.norm{i}"))?;
            h = g.relu(h);
        }
        Ok(h)
    }
}

/// Generator on a `[C,H,W]` input; parameters are keyed `prefix + name`.
pub fn generator_forward<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &GeneratorConfig,
    params: &ModelParams<T>,
    prefix: &str,
    x: Var,
) -> Result<Var> {
    let (c, h, w) = g.value(x).chw();
    if c != cfg.in_channels {
        return Err(Error::Size(format!("generator expects {} channels, got {c}", cfg.in_channels)));
    }
    let m = cfg.multiple();
    if h % m != 0 || w % m != 0 {
        return Err(Error::Size(format!(
            "generator input {w}x{h} not divisible by {m}"
        )));
    }
    let net = Bound { params, prefix };
    let mut skips = Vec::with_capacity(cfg.depth);
    let mut cur = x;
    for l in 0..cfg.depth {
        let e = net.block(g, cur, &format!("enc{l}"))?;
        let cl = cfg.width(l);
        let sub = g.haar_down(e)?;
        cur = g.slice_channels(sub, 0, cl)?;
        let highs = g.slice_channels(sub, cl, 3 * cl)?;
        skips.push((e, highs));
    }
    let mut d = net.block(g, cur, "mid")?;
    for l in (0..cfg.depth).rev() {
        let (e, highs) = skips[l];
        let p = net.conv(g, d, &format!("dec{l}.proj"), 1, 0, true)?;
        let cat = g.concat(&[p, highs])?;
        let u = g.haar_up(cat)?;
        let cat = g.concat(&[u, e])?;
        d = net.block(g, cat, &format!("dec{l}"))?;
    }
    let r = net.conv(g, d, "out", 1, 0, true)?;
    g.add(x, r)
}

/// Discriminator score (shape `[1]`) of a `[C,H,W]` input.
pub fn discriminator_forward<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &DiscriminatorConfig,
    params: &ModelParams<T>,
    prefix: &str,
    x: Var,
) -> Result<Var> {
    let (c, h, w) = g.value(x).chw();
    if c != cfg.in_channels {
        return Err(Error::Size(format!(
            "discriminator expects {} channels, got {c}",
            cfg.in_channels
        )));
    }
    if h < DiscriminatorConfig::MIN_INPUT || w < DiscriminatorConfig::MIN_INPUT {
        return Err(Error::Size(format!(
            "discriminator input {w}x{h} below {0}x{0}",
            DiscriminatorConfig::MIN_INPUT
        )));
    }
    let net = Bound { params, prefix };
    let mut cur = x;
    for (i, &s) in DiscriminatorConfig::STRIDES.iter().enumerate() {
        let normed = (1..4).contains(&i);
        cur = net.conv(g, cur, &format!("conv{}", i + 1), s, 1, !normed)?;
        if normed {
            cur = net.norm(g, cur, &format!("norm{}", i + 1))?;
        }
        cur = g.leaky_relu(cur, DiscriminatorConfig::SLOPE);
    }
    let pooled = g.global_avg_pool(cur);
    let fw = net.var(g, "fc.weight")?;
    let fb = net.var(g, "fc.bias")?;
    g.linear(pooled, fw, fb)
}

/// Forward pass without recording gradients.
pub fn generate<T: Scalar>(cfg: &GeneratorConfig, params: &ModelParams<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut g = Graph::inference();
    let xv = g.input(x.clone());
    let y = generator_forward(&mut g, cfg, params, "", xv)?;
    Ok(g.value(y).clone())
}

pub fn score<T: Scalar>(cfg: &DiscriminatorConfig, params: &ModelParams<T>, x: &Tensor<T>) -> Result<T> {
    let mut g = Graph::inference();
    let xv = g.input(x.clone());
    let s = discriminator_forward(&mut g, cfg, params, "", xv)?;
    Ok(g.value(s).item())
}
