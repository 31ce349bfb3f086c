//! Separable multilevel 2D Daubechies-3 transform with periodic boundaries,
//! plus subband selection and projection.
//!
//! Each level filters rows (horizontal axis) and then columns (vertical
//! axis) of the current approximation. Orientation names follow the
//! horizontal/vertical filter pair:
//!
//! | name | horizontal | vertical | captures |
//! |------|------------|----------|----------|
//! | LL   | low        | low      | approximation |
//! | LH   | low        | high     | horizontal structures (row-wise banding) |
//! | HL   | high       | low      | vertical structures (column stripes) |
//! | HH   | high       | high     | diagonal detail |
//!
//! Planes whose size is not a multiple of `2^K` are mirror-padded at the
//! bottom/right before analysis and cropped back after synthesis.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::scalar::Scalar;

/// Orthonormal db3 scaling (low-pass analysis) filter.
pub const DB3_LOW: [f64; 6] = [
    0.332_670_552_950_082_63,
    0.806_891_509_311_092_5,
    0.459_877_502_118_491_54,
    -0.135_011_020_010_254_58,
    -0.085_441_273_882_026_66,
    0.035_226_291_885_709_53,
];

/// Quadrature mirror high-pass: `g[n] = (-1)^n h[5-n]`.
pub const DB3_HIGH: [f64; 6] = [
    DB3_LOW[5],
    -DB3_LOW[4],
    DB3_LOW[3],
    -DB3_LOW[2],
    DB3_LOW[1],
    -DB3_LOW[0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    LL,
    LH,
    HL,
    HH,
}

impl Orientation {
    pub const DETAILS: [Orientation; 3] = [Orientation::LH, Orientation::HL, Orientation::HH];
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::LL => "LL",
            Orientation::LH => "LH",
            Orientation::HL => "HL",
            Orientation::HH => "HH",
        })
    }
}

impl FromStr for Orientation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LL" => Ok(Orientation::LL),
            "LH" => Ok(Orientation::LH),
            "HL" => Ok(Orientation::HL),
            "HH" => Ok(Orientation::HH),
            other => Err(Error::Selection(format!("unknown orientation {other:?}"))),
        }
    }
}

/// Detail planes of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands<T> {
    pub lh: Plane<T>,
    pub hl: Plane<T>,
    pub hh: Plane<T>,
}

impl<T: Scalar> DetailBands<T> {
    pub fn get(&self, o: Orientation) -> Option<&Plane<T>> {
        match o {
            Orientation::LH => Some(&self.lh),
            Orientation::HL => Some(&self.hl),
            Orientation::HH => Some(&self.hh),
            Orientation::LL => None,
        }
    }

    fn get_mut(&mut self, o: Orientation) -> Option<&mut Plane<T>> {
        match o {
            Orientation::LH => Some(&mut self.lh),
            Orientation::HL => Some(&mut self.hl),
            Orientation::HH => Some(&mut self.hh),
            Orientation::LL => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid<T> {
    /// `LL_K`.
    pub approx: Plane<T>,
    /// `details[i]` holds level `i + 1`.
    pub details: Vec<DetailBands<T>>,
    pub original_size: (usize, usize),
}

impl<T: Scalar> WaveletPyramid<T> {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn band(&self, level: usize, o: Orientation) -> Option<&Plane<T>> {
        if level == 0 || level > self.levels() {
            return None;
        }
        match o {
            Orientation::LL if level == self.levels() => Some(&self.approx),
            Orientation::LL => None,
            _ => self.details[level - 1].get(o),
        }
    }

    /// Sum of squared coefficients over every band.
    pub fn energy(&self) -> f64 {
        self.approx.energy()
            + self
                .details
                .iter()
                .map(|d| d.lh.energy() + d.hl.energy() + d.hh.energy())
                .sum::<f64>()
    }

    /// Zeroes every band not in `sel`.
    pub fn retain(&mut self, sel: &SubbandSelection) {
        let k = self.levels();
        if !sel.contains(k, Orientation::LL) {
            self.approx.data_mut().fill(T::zero());
        }
        for (i, d) in self.details.iter_mut().enumerate() {
            for o in Orientation::DETAILS {
                if !sel.contains(i + 1, o) {
                    d.get_mut(o).unwrap().data_mut().fill(T::zero());
                }
            }
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        WaveletPyramid {
            approx: self.approx.scaled(alpha),
            details: self
                .details
                .iter()
                .map(|d| DetailBands {
                    lh: d.lh.scaled(alpha),
                    hl: d.hl.scaled(alpha),
                    hh: d.hh.scaled(alpha),
                })
                .collect(),
            original_size: self.original_size,
        }
    }

    /// Coefficients in the usual in-place layout: `LL_K` top-left, level-`i`
    /// HL to its right, LH below, HH diagonal.
    pub fn mosaic(&self) -> Plane<T> {
        let w = self.approx.width() << self.levels();
        let h = self.approx.height() << self.levels();
        let mut out = Plane::zeros(w, h);
        let mut paste = |p: &Plane<T>, r0: usize, c0: usize| {
            for i in 0..p.height() {
                out.row_mut(r0 + i)[c0..c0 + p.width()].copy_from_slice(p.row(i));
            }
        };
        paste(&self.approx, 0, 0);
        for d in &self.details {
            let (bw, bh) = d.hl.dims();
            paste(&d.hl, 0, bw);
            paste(&d.lh, bh, 0);
            paste(&d.hh, bh, bw);
        }
        out
    }
}

/// Set of `(level, orientation)` bands kept during recomposition.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubbandSelection {
    kept: BTreeSet<(usize, Orientation)>,
}

impl SubbandSelection {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(levels: usize) -> Self {
        let mut s = Self::detail_range(Orientation::LH, 1, levels);
        s.extend(&Self::detail_range(Orientation::HL, 1, levels));
        s.extend(&Self::detail_range(Orientation::HH, 1, levels));
        s.kept.insert((levels, Orientation::LL));
        s
    }

    /// `{o_i : i in first..=last}`.
    pub fn detail_range(o: Orientation, first: usize, last: usize) -> Self {
        SubbandSelection {
            kept: (first..=last).map(|l| (l, o)).collect(),
        }
    }

    /// Vertical stripe default: `HL_1 .. HL_9`.
    pub fn stripe_default() -> Self {
        Self::detail_range(Orientation::HL, 1, 9)
    }

    /// Wave default: `LH_1 .. LH_6`.
    pub fn wave_default() -> Self {
        Self::detail_range(Orientation::LH, 1, 6)
    }

    pub fn insert(&mut self, level: usize, o: Orientation) {
        self.kept.insert((level, o));
    }

    pub fn extend(&mut self, other: &SubbandSelection) {
        self.kept.extend(other.kept.iter().copied());
    }

    pub fn contains(&self, level: usize, o: Orientation) -> bool {
        self.kept.contains(&(level, o))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, Orientation)> {
        self.kept.iter()
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn max_level(&self) -> usize {
        self.kept.iter().map(|&(l, _)| l).max().unwrap_or(0)
    }

    /// Every band of a `levels`-deep pyramid not in `self`.
    pub fn complement(&self, levels: usize) -> Self {
        SubbandSelection {
            kept: Self::all(levels)
                .kept
                .difference(&self.kept)
                .copied()
                .collect(),
        }
    }

    pub fn validate(&self, levels: usize) -> Result<()> {
        for &(l, o) in &self.kept {
            if l == 0 || l > levels {
                return Err(Error::Selection(format!(
                    "{o}_{l} outside levels 1..={levels}"
                )));
            }
            if o == Orientation::LL && l != levels {
                return Err(Error::Selection(format!(
                    "LL only exists at the coarsest level {levels}, got LL_{l}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SubbandSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for o in [
            Orientation::LL,
            Orientation::LH,
            Orientation::HL,
            Orientation::HH,
        ] {
            let levels: Vec<usize> = self
                .kept
                .iter()
                .filter(|&&(_, oo)| oo == o)
                .map(|&(l, _)| l)
                .collect();
            let mut i = 0;
            while i < levels.len() {
                let mut j = i;
                while j + 1 < levels.len() && levels[j + 1] == levels[j] + 1 {
                    j += 1;
                }
                if !first {
                    f.write_str(",")?;
                }
                first = false;
                if i == j {
                    write!(f, "{o}:{}", levels[i])?;
                } else {
                    write!(f, "{o}:{}-{}", levels[i], levels[j])?;
                }
                i = j + 1;
            }
        }
        Ok(())
    }
}

/// Parses comma-separated items such as `HL:1-9`, `LH:2`, `LL:9`.
impl FromStr for SubbandSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut sel = SubbandSelection::empty();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (o, range) = item
                .split_once(':')
                .ok_or_else(|| Error::Selection(format!("{item:?} lacks ORIENT:LEVELS")))?;
            let o: Orientation = o.parse()?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Selection(format!("bad level {t:?} in {item:?}")))
            };
            let (a, b) = match range.split_once('-') {
                Some((a, b)) => (parse(a)?, parse(b)?),
                None => {
                    let l = parse(range)?;
                    (l, l)
                }
            };
            if a == 0 || b < a {
                return Err(Error::Selection(format!("bad level range in {item:?}")));
            }
            for l in a..=b {
                sel.insert(l, o);
            }
        }
        Ok(sel)
    }
}

fn analyze_line<T: Scalar>(input: &[T], lo: &mut [T], hi: &mut [T]) {
    let n = input.len();
    debug_assert_eq!(lo.len() * 2, n);
    for k in 0..n / 2 {
        let mut a = 0.0f64;
        let mut d = 0.0f64;
        for t in 0..6 {
            let x = input[(2 * k + t) % n].as_f64();
            a += DB3_LOW[t] * x;
            d += DB3_HIGH[t] * x;
        }
        lo[k] = T::lit(a);
        hi[k] = T::lit(d);
    }
}

fn synthesize_line<T: Scalar>(lo: &[T], hi: &[T], out: &mut [T]) {
    let half = lo.len();
    let n = 2 * half;
    let mut acc = vec![0.0f64; n];
    for k in 0..half {
        let (a, d) = (lo[k].as_f64(), hi[k].as_f64());
        for t in 0..6 {
            acc[(2 * k + t) % n] += DB3_LOW[t] * a + DB3_HIGH[t] * d;
        }
    }
    for (o, v) in out.iter_mut().zip(acc) {
        *o = T::lit(v);
    }
}

/// One 2D analysis level on an even-sized plane: returns (LL, LH, HL, HH).
fn analyze_level<T: Scalar>(p: &Plane<T>) -> (Plane<T>, DetailBands<T>) {
    let (w, h) = p.dims();
    let (hw, hh) = (w / 2, h / 2);
    // rows: L | H halves side by side
    let mut rows = Plane::zeros(w, h);
    let (mut lo, mut hi) = (vec![T::zero(); hw], vec![T::zero(); hw]);
    for i in 0..h {
        analyze_line(p.row(i), &mut lo, &mut hi);
        let r = rows.row_mut(i);
        r[..hw].copy_from_slice(&lo);
        r[hw..].copy_from_slice(&hi);
    }
    // columns
    let mut ll = Plane::zeros(hw, hh);
    let mut lh = Plane::zeros(hw, hh);
    let mut hl = Plane::zeros(hw, hh);
    let mut hhp = Plane::zeros(hw, hh);
    let mut col = vec![T::zero(); h];
    let (mut clo, mut chi) = (vec![T::zero(); hh], vec![T::zero(); hh]);
    for j in 0..w {
        for (i, c) in col.iter_mut().enumerate() {
            *c = rows.get(i, j);
        }
        analyze_line(&col, &mut clo, &mut chi);
        for k in 0..hh {
            if j < hw {
                ll.set(k, j, clo[k]);
                lh.set(k, j, chi[k]);
            } else {
                hl.set(k, j - hw, clo[k]);
                hhp.set(k, j - hw, chi[k]);
            }
        }
    }
    (
        ll,
        DetailBands {
            lh,
            hl,
            hh: hhp,
        },
    )
}

fn synthesize_level<T: Scalar>(ll: &Plane<T>, d: &DetailBands<T>) -> Plane<T> {
    let (hw, hh) = ll.dims();
    let (w, h) = (hw * 2, hh * 2);
    let mut rows = Plane::zeros(w, h);
    let mut col = vec![T::zero(); h];
    let (mut clo, mut chi) = (vec![T::zero(); hh], vec![T::zero(); hh]);
    for j in 0..w {
        let (lo_src, hi_src, jj) = if j < hw {
            (ll, &d.lh, j)
        } else {
            (&d.hl, &d.hh, j - hw)
        };
        for k in 0..hh {
            clo[k] = lo_src.get(k, jj);
            chi[k] = hi_src.get(k, jj);
        }
        synthesize_line(&clo, &chi, &mut col);
        for (i, &c) in col.iter().enumerate() {
            rows.set(i, j, c);
        }
    }
    let mut out = Plane::zeros(w, h);
    for i in 0..h {
        let r = rows.row(i);
        synthesize_line(&r[..hw], &r[hw..], out.row_mut(i));
    }
    out
}

/// Size after padding `n` up to a multiple of `2^levels`.
pub fn padded_len(n: usize, levels: usize) -> usize {
    let m = 1usize << levels;
    n.div_ceil(m) * m
}

fn check_levels(width: usize, height: usize, levels: usize) -> Result<()> {
    if levels == 0 || levels > 24 {
        return Err(Error::Level(format!("level count {levels} outside 1..=24")));
    }
    for (name, n) in [("width", width), ("height", height)] {
        if n == 0 || padded_len(n, levels) > 2 * n {
            return Err(Error::Level(format!(
                "{name} {n} too small for {levels} levels (needs at least {})",
                (1usize << levels) / 2
            )));
        }
    }
    Ok(())
}

/// K-level decomposition of `p`.
pub fn dwt2_multilevel<T: Scalar>(p: &Plane<T>, levels: usize) -> Result<WaveletPyramid<T>> {
    let (w, h) = p.dims();
    check_levels(w, h, levels)?;
    let (pw, ph) = (padded_len(w, levels), padded_len(h, levels));
    let mut current = if (pw, ph) == (w, h) {
        p.clone()
    } else {
        p.pad_reflect(0, 0, pw, ph)
    };
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (ll, d) = analyze_level(&current);
        details.push(d);
        current = ll;
    }
    Ok(WaveletPyramid {
        approx: current,
        details,
        original_size: (w, h),
    })
}

/// Inverse of [`dwt2_multilevel`], cropped to the original size.
pub fn idwt2_multilevel<T: Scalar>(pyr: &WaveletPyramid<T>) -> Result<Plane<T>> {
    let k = pyr.levels();
    if k == 0 {
        return Err(Error::Structure("pyramid has no levels".into()));
    }
    let mut current = pyr.approx.clone();
    for level in (1..=k).rev() {
        let d = &pyr.details[level - 1];
        let dims = current.dims();
        if d.lh.dims() != dims || d.hl.dims() != dims || d.hh.dims() != dims {
            return Err(Error::Structure(format!(
                "level {level} details are not {}x{}",
                dims.0, dims.1
            )));
        }
        current = synthesize_level(&current, d);
    }
    let (w, h) = pyr.original_size;
    if w > current.width() || h > current.height() {
        return Err(Error::Structure(format!(
            "original size {w}x{h} exceeds reconstructed {}x{}",
            current.width(),
            current.height()
        )));
    }
    if current.dims() == (w, h) {
        Ok(current)
    } else {
        current.crop(0, 0, w, h)
    }
}

/// The wavelet subband image: reconstruction from the bands in `sel` only.
pub fn subband_project<T: Scalar>(
    p: &Plane<T>,
    levels: usize,
    sel: &SubbandSelection,
) -> Result<Plane<T>> {
    sel.validate(levels)?;
    let mut pyr = dwt2_multilevel(p, levels)?;
    pyr.retain(sel);
    idwt2_multilevel(&pyr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(w: usize, h: usize, seed: u64) -> Plane<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Plane::from_fn(w, h, |_, _| rng.random_range(-1000.0..1000.0))
    }

    fn max_err(a: &Plane<f32>, b: &Plane<f32>) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs() as f64)
            .fold(0.0, f64::max)
    }

    #[test]
    fn filter_is_orthonormal() {
        let s: f64 = DB3_LOW.iter().sum();
        assert!((s - std::f64::consts::SQRT_2).abs() < 1e-12);
        for shift in [0usize, 2, 4] {
            let dot: f64 = (0..6 - shift).map(|n| DB3_LOW[n] * DB3_LOW[n + shift]).sum();
            let want = if shift == 0 { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-12, "shift {shift}: {dot}");
        }
        let hs: f64 = DB3_HIGH.iter().sum();
        assert!(hs.abs() < 1e-12);
    }

    #[test]
    fn constant_plane_has_no_detail() {
        let c = 1234.5f64;
        let p = Plane::filled(64, 64, c);
        let pyr = dwt2_multilevel(&p, 4).unwrap();
        for d in &pyr.details {
            for b in [&d.lh, &d.hl, &d.hh] {
                assert!(b.max_abs() < 1e-4 * c);
            }
        }
        for v in pyr.approx.data() {
            assert!((v - 16.0 * c).abs() < 1e-6 * c);
        }
    }

    #[test]
    fn dyadic_sizes() {
        let p = random_plane(512, 512, 1);
        let pyr = dwt2_multilevel(&p, 9).unwrap();
        assert_eq!(pyr.approx.dims(), (1, 1));
        assert_eq!(pyr.details[0].hl.dims(), (256, 256));
        assert_eq!(pyr.details[8].hh.dims(), (1, 1));
    }

    #[test]
    fn column_constant_plane_lives_in_ll_and_hl() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cols: Vec<f64> = (0..128).map(|_| rng.random_range(-50.0..50.0)).collect();
        let p = Plane::from_fn(128, 64, |_, j| cols[j]);
        let pyr = dwt2_multilevel(&p, 5).unwrap();
        let total = p.energy();
        let stray: f64 = pyr.details.iter().map(|d| d.lh.energy() + d.hh.energy()).sum();
        assert!(stray < 1e-8 * total, "{stray} vs {total}");
    }

    #[test]
    fn perfect_reconstruction_non_dyadic() {
        let p = random_plane(100, 37, 5);
        let pyr = dwt2_multilevel(&p, 5).unwrap();
        assert_eq!(pyr.original_size, (100, 37));
        let back = idwt2_multilevel(&pyr).unwrap();
        assert_eq!(back.dims(), (100, 37));
        assert!(max_err(&back, &p) < 1e-4 * p.max_abs());
    }

    #[test]
    fn zero_and_scaled_pyramids() {
        let p = random_plane(64, 64, 9);
        let pyr = dwt2_multilevel(&p, 3).unwrap();
        let zero = pyr.scaled(0.0);
        assert!(idwt2_multilevel(&zero).unwrap().data().iter().all(|&v| v == 0.0));
        let base = idwt2_multilevel(&pyr).unwrap();
        let scaled = idwt2_multilevel(&pyr.scaled(2.5)).unwrap();
        let tol = 1e-6 * 2.5 * base.max_abs();
        for (s, o) in scaled.data().iter().zip(base.data()) {
            assert!(((s - 2.5 * o).abs() as f64) < tol);
        }
    }

    #[test]
    fn level_errors() {
        let p = random_plane(16, 16, 0);
        assert!(matches!(dwt2_multilevel(&p, 0), Err(Error::Level(_))));
        assert!(dwt2_multilevel(&p, 5).is_ok());
        assert!(matches!(dwt2_multilevel(&p, 6), Err(Error::Level(_))));
    }

    #[test]
    fn structure_error_on_mismatched_details() {
        let p = random_plane(32, 32, 0);
        let mut pyr = dwt2_multilevel(&p, 2).unwrap();
        pyr.details[1].hl = Plane::zeros(3, 3);
        assert!(matches!(idwt2_multilevel(&pyr), Err(Error::Structure(_))));
    }

    #[test]
    fn parseval_holds_on_dyadic_planes() {
        let p = random_plane(128, 64, 11).cast::<f64>();
        let pyr = dwt2_multilevel(&p, 6).unwrap();
        let rel = (pyr.energy() - p.energy()).abs() / p.energy();
        assert!(rel < 1e-3);
    }

    #[test]
    fn selection_parsing_and_display() {
        let s: SubbandSelection = "HL:1-9".parse().unwrap();
        assert_eq!(s, SubbandSelection::stripe_default());
        let s: SubbandSelection = "LH:1-6, LL:6".parse().unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.to_string(), "LL:6,LH:1-6");
        assert!(s.validate(6).is_ok());
        assert!(s.validate(7).is_err());
        assert!("XX:1".parse::<SubbandSelection>().is_err());
        assert!("HL:3-1".parse::<SubbandSelection>().is_err());
        assert_eq!(SubbandSelection::all(3).complement(3), SubbandSelection::empty());
    }

    #[test]
    fn projection_all_is_identity_and_complement_adds_up() {
        let p = random_plane(96, 80, 21);
        let all = subband_project(&p, 4, &SubbandSelection::all(4)).unwrap();
        assert!(max_err(&all, &p) < 1e-4 * p.max_abs());
        let s: SubbandSelection = "HL:1-2,HH:4,LL:4".parse().unwrap();
        let a = subband_project(&p, 4, &s).unwrap();
        let b = subband_project(&p, 4, &s.complement(4)).unwrap();
        assert!(max_err(&a.add(&b).unwrap(), &p) < 1e-4 * p.max_abs());
    }

    #[test]
    fn mosaic_layout() {
        let p = random_plane(8, 8, 2);
        let pyr = dwt2_multilevel(&p, 2).unwrap();
        let m = pyr.mosaic();
        assert_eq!(m.dims(), (8, 8));
        assert_eq!(m.get(0, 0), pyr.approx.get(0, 0));
        assert_eq!(m.get(0, 4), pyr.details[0].hl.get(0, 0));
        assert_eq!(m.get(4, 0), pyr.details[0].lh.get(0, 0));
    }
}
