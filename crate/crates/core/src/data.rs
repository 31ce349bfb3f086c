//! Unpaired subband stores and random patch sampling.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::plane::Plane;
use crate::raster::MultiBandRaster;
use crate::scalar::Scalar;
use crate::wavelet::{subband_project, SubbandSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Stripe,
    Wave,
}

impl Mode {
    pub fn channels(self) -> usize {
        match self {
            Mode::Stripe => 1,
            Mode::Wave => 4,
        }
    }

    pub fn default_levels(self) -> usize {
        match self {
            Mode::Stripe => 9,
            Mode::Wave => 6,
        }
    }

    pub fn default_selection(self) -> SubbandSelection {
        match self {
            Mode::Stripe => SubbandSelection::stripe_default(),
            Mode::Wave => SubbandSelection::wave_default(),
        }
    }

    /// Default (width, height) of training patches.
    pub fn default_patch(self) -> (usize, usize) {
        match self {
            Mode::Stripe => (2048, 32),
            Mode::Wave => (128, 128),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Stripe => "stripe",
            Mode::Wave => "wave",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stripe" => Ok(Mode::Stripe),
            "wave" => Ok(Mode::Wave),
            _ => Err(Error::Mode(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Clean,
    Noisy,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Clean => "clean",
            Domain::Noisy => "noisy",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(Domain::Clean),
            "noisy" => Ok(Domain::Noisy),
            _ => Err(Error::Config(format!("unknown domain {s:?}"))),
        }
    }
}

/// Block mean over groups of `factor` rows; a partial last block is dropped.
pub fn downsample_vertical<T: Scalar>(p: &Plane<T>, factor: usize) -> Result<Plane<T>> {
    if factor == 0 || p.height() < factor {
        return Err(Error::Size(format!(
            "height {} below downsample factor {factor}",
            p.height()
        )));
    }
    let w = p.width();
    let oh = p.height() / factor;
    let mut acc = vec![0.0f64; w * oh];
    for r in 0..oh * factor {
        let dst = &mut acc[(r / factor) * w..(r / factor + 1) * w];
        for (a, v) in dst.iter_mut().zip(p.row(r)) {
            *a += v.as_f64();
        }
    }
    let inv = 1.0 / factor as f64;
    Plane::new(w, oh, acc.into_iter().map(|v| T::lit(v * inv)).collect())
}

/// Row replication by `factor`, cropped or edge-extended to `target_height`.
pub fn upsample_vertical<T: Scalar>(p: &Plane<T>, factor: usize, target_height: usize) -> Plane<T> {
    let last = p.height().saturating_sub(1);
    let mut out = Plane::zeros(p.width(), target_height);
    for i in 0..target_height {
        out.row_mut(i).copy_from_slice(p.row((i / factor.max(1)).min(last)));
    }
    out
}

/// How scenes become subband images.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandPlan {
    pub mode: Mode,
    pub levels: usize,
    pub selection: SubbandSelection,
    /// Vertical block size in stripe mode; ignored in wave mode.
    pub downsample_factor: usize,
}

impl SubbandPlan {
    pub fn for_mode(mode: Mode) -> Self {
        SubbandPlan {
            mode,
            levels: mode.default_levels(),
            selection: mode.default_selection(),
            downsample_factor: 32,
        }
    }

    fn check_bands(&self, bands: usize) -> Result<()> {
        let ok = match self.mode {
            Mode::Stripe => bands == 1,
            Mode::Wave => bands == 4,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Mode(format!("{} mode cannot take a {bands}-band raster", self.mode)))
        }
    }

    /// Full-resolution subband planes of every band.
    pub fn project<T: Scalar>(&self, scene: &MultiBandRaster<T>) -> Result<Vec<Plane<T>>> {
        self.check_bands(scene.bands())?;
        scene
            .planes()
            .iter()
            .map(|p| subband_project(p, self.levels, &self.selection))
            .collect()
    }

    /// The network-domain item of one scene: `[C,H,W]`.
    pub fn item<T: Scalar>(&self, scene: &MultiBandRaster<T>) -> Result<Tensor<T>> {
        let planes = self.project(scene)?;
        match self.mode {
            Mode::Stripe => Tensor::from_planes(&[downsample_vertical(&planes[0], self.downsample_factor)?]),
            Mode::Wave => Tensor::from_planes(&planes),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DomainStore<T> {
    pub domain: Domain,
    pub mode: Mode,
    pub items: Vec<Tensor<T>>,
    pub scene_ids: Vec<String>,
}

pub fn build_subband_store<T: Scalar>(
    scenes: &[(String, MultiBandRaster<T>)],
    domain: Domain,
    plan: &SubbandPlan,
) -> Result<DomainStore<T>> {
    if scenes.is_empty() {
        return Err(Error::Config(format!("no {domain} scenes")));
    }
    let mut items = Vec::with_capacity(scenes.len());
    for (_, s) in scenes {
        items.push(plan.item(s)?);
    }
    Ok(DomainStore {
        domain,
        mode: plan.mode,
        items,
        scene_ids: scenes.iter().map(|(id, _)| id.clone()).collect(),
    })
}

impl<T: Scalar> DomainStore<T> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Root mean square over every stored value.
    pub fn rms(&self) -> f64 {
        let (mut s, mut n) = (0.0f64, 0usize);
        for t in &self.items {
            s += t.data().iter().map(|v| v.as_f64().powi(2)).sum::<f64>();
            n += t.numel();
        }
        if n == 0 {
            0.0
        } else {
            (s / n as f64).sqrt()
        }
    }

    /// Number of non-overlapping patches the store holds.
    pub fn capacity(&self, spec: &PatchSpec) -> usize {
        self.items
            .iter()
            .map(|t| {
                let (_, h, w) = t.chw();
                (h / spec.height.max(1)) * (w / spec.width.max(1))
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    pub width: usize,
    pub height: usize,
    pub hflip: bool,
    pub vflip: bool,
}

impl PatchSpec {
    pub fn for_mode(mode: Mode) -> Self {
        let (width, height) = mode.default_patch();
        PatchSpec {
            width,
            height,
            hflip: true,
            vflip: true,
        }
    }
}

/// Index, offset and flips drawn for one patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchDraw {
    pub item: usize,
    pub row0: usize,
    pub col0: usize,
    pub hflip: bool,
    pub vflip: bool,
}

pub fn draw_patch<R: Rng>(dims: &[(usize, usize)], spec: &PatchSpec, rng: &mut R) -> Result<PatchDraw> {
    if dims.is_empty() {
        return Err(Error::Config("empty store".into()));
    }
    let item = rng.random_range(0..dims.len());
    let (h, w) = dims[item];
    if spec.height > h || spec.width > w {
        return Err(Error::Size(format!(
            "patch {}x{} larger than item {w}x{h}",
            spec.width, spec.height
        )));
    }
    let row0 = rng.random_range(0..=h - spec.height);
    let col0 = rng.random_range(0..=w - spec.width);
    let hflip = rng.random_bool(0.5) && spec.hflip;
    let vflip = rng.random_bool(0.5) && spec.vflip;
    Ok(PatchDraw {
        item,
        row0,
        col0,
        hflip,
        vflip,
    })
}

pub fn sample_patch<T: Scalar, R: Rng>(
    store: &DomainStore<T>,
    spec: &PatchSpec,
    rng: &mut R,
) -> Result<Tensor<T>> {
    let dims: Vec<(usize, usize)> = store
        .items
        .iter()
        .map(|t| {
            let (_, h, w) = t.chw();
            (h, w)
        })
        .collect();
    let d = draw_patch(&dims, spec, rng)?;
    let mut p = store.items[d.item].crop(d.row0, d.col0, spec.width, spec.height)?;
    if d.hflip {
        p = p.flip_horizontal();
    }
    if d.vflip {
        p = p.flip_vertical();
    }
    Ok(p)
}

/// One line of a dataset manifest: `<domain> <mode> <path>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub domain: Domain,
    pub mode: Mode,
    pub path: PathBuf,
}

impl fmt::Display for ManifestEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.domain, self.mode, self.path.display())
    }
}

/// Parses a manifest; blank lines and `#` comments are skipped and
/// relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, char::is_whitespace);
        let (Some(d), Some(m), Some(p)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Config(format!("manifest line {}: expected `domain mode path`", n + 1)));
        };
        let path = PathBuf::from(p.trim());
        out.push(ManifestEntry {
            domain: d.parse()?,
            mode: m.parse()?,
            path: if path.is_absolute() { path } else { base.join(path) },
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{gen_stripe_noise, StripeNoiseParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn downsample_examples() {
        let c = Plane::<f32>::filled(7, 3072, 5.0);
        let d = downsample_vertical(&c, 32).unwrap();
        assert_eq!(d.dims(), (7, 96));
        assert!(d.data().iter().all(|&v| v == 5.0));
        assert!(matches!(downsample_vertical(&Plane::<f32>::zeros(4, 31), 32), Err(Error::Size(_))));
    }

    #[test]
    fn downsample_preserves_column_means() {
        let p = Plane::<f64>::from_fn(9, 70, |i, j| ((i * 7 + j * 13) % 17) as f64);
        let d = downsample_vertical(&p, 32).unwrap();
        for j in 0..9 {
            let full: f64 = (0..64).map(|i| p.get(i, j)).sum::<f64>() / 64.0;
            let got: f64 = (0..2).map(|i| d.get(i, j)).sum::<f64>() / 2.0;
            assert!((full - got).abs() <= 1e-6 * full.abs().max(1.0));
        }
    }

    #[test]
    fn replication_inverts_block_mean_on_column_constant_planes() {
        let params = StripeNoiseParams {
            drift: 0.0,
            ..Default::default()
        };
        let n = gen_stripe_noise::<f32>(64, 3000, &params).unwrap();
        let d = downsample_vertical(&n, 32).unwrap();
        assert_eq!(d.height(), 93);
        for i in 0..d.height() {
            assert_eq!(d.row(i), n.row(0));
        }
        let u = upsample_vertical(&d, 32, 3000);
        assert_eq!(u, n);

        let one = Plane::<f32>::from_fn(3, 1, |_, j| j as f32);
        let u = upsample_vertical(&one, 32, 50);
        assert_eq!(u.height(), 50);
        assert!((0..50).all(|i| u.row(i) == one.row(0)));
        assert_eq!(upsample_vertical(&Plane::<f32>::zeros(2, 96), 32, 3000).height(), 3000);
    }

    #[test]
    fn stores_of_flat_scenes_are_zero() {
        let flat = MultiBandRaster::new(64, 64, 1, vec![1234.0f32; 4096]).unwrap();
        let mut plan = SubbandPlan::for_mode(Mode::Stripe);
        plan.levels = 6;
        plan.selection = SubbandSelection::detail_range(crate::wavelet::Orientation::HL, 1, 6);
        plan.downsample_factor = 8;
        let s = build_subband_store(&[("a".into(), flat)], Domain::Clean, &plan).unwrap();
        assert!(s.items[0].data().iter().all(|v| v.abs() < 1e-3));

        let four = MultiBandRaster::new(64, 64, 4, vec![900.0f32; 4 * 4096]).unwrap();
        let s = build_subband_store(&[("b".into(), four.clone())], Domain::Noisy, &SubbandPlan::for_mode(Mode::Wave)).unwrap();
        assert_eq!(s.items[0].shape(), &[4, 64, 64]);
        assert!(matches!(
            build_subband_store(&[("b".into(), four)], Domain::Noisy, &plan),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn sampling_contract() {
        let t = Tensor::new(vec![1, 4, 6], (0..24).map(|v| v as f32).collect()).unwrap();
        let store = DomainStore {
            domain: Domain::Clean,
            mode: Mode::Stripe,
            items: vec![t.clone()],
            scene_ids: vec!["x".into()],
        };
        let full = PatchSpec {
            width: 6,
            height: 4,
            hflip: true,
            vflip: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..8 {
            let p = sample_patch(&store, &full, &mut rng).unwrap();
            let ok = [t.clone(), t.flip_horizontal(), t.flip_vertical(), t.flip_horizontal().flip_vertical()];
            assert!(ok.contains(&p));
        }
        assert_eq!(t.flip_vertical().flip_vertical(), t);

        let small = PatchSpec { width: 3, height: 2, ..full };
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..20).map(|_| sample_patch(&store, &small, &mut r).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..20).map(|_| sample_patch(&store, &small, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
        let big = PatchSpec { width: 7, ..full };
        assert!(matches!(sample_patch(&store, &big, &mut rng), Err(Error::Size(_))));
    }

    #[test]
    fn independent_seeds_draw_different_sequences() {
        let dims = vec![(64, 64); 10];
        let spec = PatchSpec { width: 16, height: 16, hflip: true, vflip: true };
        let seq = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| draw_patch(&dims, &spec, &mut r).unwrap()).collect::<Vec<_>>()
        };
        assert_ne!(seq(1), seq(2));
        for d in seq(3) {
            assert!(d.row0 + 16 <= 64 && d.col0 + 16 <= 64);
        }
    }

    #[test]
    fn manifest_round_trip() {
        let text = "# tiles\nclean stripe a.wcr\n\nnoisy wave /abs/b.wcr\n";
        let e = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].path, PathBuf::from("/data/a.wcr"));
        assert_eq!(e[1].to_string(), "noisy wave /abs/b.wcr");
        assert!(parse_manifest("clean stripe", Path::new(".")).is_err());
        assert!(matches!(parse_manifest("clean blur x", Path::new(".")), Err(Error::Mode(_))));
    }
}
