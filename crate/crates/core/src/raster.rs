//! Multi-band raster container and its two on-disk formats.
//!
//! WCR is the native, bit-exact format: the magic `WCR1`, then little-endian
//! `u32` width, height, bands and a reserved zero word, then
//! `width * height * bands` little-endian `f32` samples, band-sequential and
//! row-major within each band.
//!
//! PGM16 is binary P5 with maxval 65535 and big-endian samples, single band
//! only. It exists for eyeballing results in an ordinary viewer.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::scalar::Scalar;

pub const WCR_MAGIC: &[u8; 4] = b"WCR1";
const WCR_HEADER_LEN: usize = 20;
pub const DEFAULT_RANGE: (f64, f64) = (0.0, 65535.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Wcr,
    Pgm16,
}

impl RasterFormat {
    /// Picks the format from a file extension; anything but `.pgm` is WCR.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pgm") => RasterFormat::Pgm16,
            _ => RasterFormat::Wcr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiBandRaster<T> {
    width: usize,
    height: usize,
    bands: usize,
    samples: Vec<T>,
    range: (f64, f64),
}

impl<T: Scalar> MultiBandRaster<T> {
    pub fn new(width: usize, height: usize, bands: usize, samples: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty raster {width}x{height}")));
        }
        if !matches!(bands, 1 | 3 | 4) {
            return Err(Error::Dimension(format!("band count {bands} not in {{1,3,4}}")));
        }
        if samples.len() != width * height * bands {
            return Err(Error::Dimension(format!(
                "{width}x{height}x{bands} raster needs {} samples, got {}",
                width * height * bands,
                samples.len()
            )));
        }
        Ok(MultiBandRaster {
            width,
            height,
            bands,
            samples,
            range: DEFAULT_RANGE,
        })
    }

    pub fn from_bands(planes: Vec<Plane<T>>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Dimension("no bands".into()))?;
        let (w, h) = first.dims();
        let bands = planes.len();
        let mut samples = Vec::with_capacity(w * h * bands);
        for p in &planes {
            if p.dims() != (w, h) {
                return Err(Error::Dimension("bands differ in size".into()));
            }
            samples.extend_from_slice(p.data());
        }
        Self::new(w, h, bands, samples)
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = (lo, hi);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn band_slice(&self, band: usize) -> &[T] {
        let n = self.width * self.height;
        &self.samples[band * n..(band + 1) * n]
    }

    pub fn band(&self, band: usize) -> Plane<T> {
        Plane::new(self.width, self.height, self.band_slice(band).to_vec())
            .expect("band slice has plane size")
    }

    pub fn set_band(&mut self, band: usize, plane: &Plane<T>) -> Result<()> {
        if plane.dims() != (self.width, self.height) {
            return Err(Error::Dimension(format!(
                "band {}x{} into raster {}x{}",
                plane.width(),
                plane.height(),
                self.width,
                self.height
            )));
        }
        if band >= self.bands {
            return Err(Error::Dimension(format!(
                "band {band} of {}-band raster",
                self.bands
            )));
        }
        let n = self.width * self.height;
        self.samples[band * n..(band + 1) * n].copy_from_slice(plane.data());
        Ok(())
    }

    pub fn planes(&self) -> Vec<Plane<T>> {
        (0..self.bands).map(|b| self.band(b)).collect()
    }

    /// Clamps every sample into the declared range.
    pub fn clip_to_range(&self) -> Self {
        let (lo, hi) = (T::lit(self.range.0), T::lit(self.range.1));
        let mut out = self.clone();
        for s in &mut out.samples {
            *s = s.max(lo).min(hi);
        }
        out
    }
}

pub fn clip_to_range<T: Scalar>(raster: &MultiBandRaster<T>) -> MultiBandRaster<T> {
    raster.clip_to_range()
}

/// Writes `bytes` through a sibling temp file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    res.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn encode_wcr<T: Scalar>(raster: &MultiBandRaster<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(WCR_HEADER_LEN + raster.samples.len() * 4);
    out.extend_from_slice(WCR_MAGIC);
    for v in [raster.width, raster.height, raster.bands, 0] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for s in &raster.samples {
        out.extend_from_slice(&(s.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode_wcr<T: Scalar>(bytes: &[u8]) -> Result<MultiBandRaster<T>> {
    if bytes.len() < WCR_HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            msg: "truncated WCR header".into(),
        });
    }
    if &bytes[..4] != WCR_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: "bad magic, expected WCR1".into(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (w, h, b, reserved) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3));
    if reserved != 0 {
        return Err(Error::Format {
            offset: 16,
            msg: format!("reserved word is {reserved}, expected 0"),
        });
    }
    let n = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(b))
        .ok_or_else(|| Error::Dimension("raster size overflows".into()))?;
    let payload = &bytes[WCR_HEADER_LEN..];
    if payload.len() != n * 4 {
        return Err(Error::Dimension(format!(
            "{w}x{h}x{b} needs {} payload bytes, file has {}",
            n * 4,
            payload.len()
        )));
    }
    let samples = payload
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    MultiBandRaster::new(w, h, b, samples)
}

pub fn encode_pgm16<T: Scalar>(raster: &MultiBandRaster<T>) -> Result<Vec<u8>> {
    if raster.bands != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "PGM16 holds one band, raster has {}",
            raster.bands
        )));
    }
    let mut out = format!("P5\n{} {}\n65535\n", raster.width, raster.height).into_bytes();
    out.reserve(raster.samples.len() * 2);
    for (idx, s) in raster.samples.iter().enumerate() {
        let v = s.as_f64();
        if !(0.0..=65535.0).contains(&v) {
            return Err(Error::Range(format!(
                "sample {idx} = {v} outside [0, 65535]; clip before writing PGM16"
            )));
        }
        out.extend_from_slice(&(v.round() as u16).to_be_bytes());
    }
    Ok(out)
}

pub fn decode_pgm<T: Scalar>(bytes: &[u8]) -> Result<MultiBandRaster<T>> {
    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format {
            offset: 0,
            msg: "bad magic, expected P5".into(),
        });
    }
    pos += 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| c.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format {
                offset: pos as u64,
                msg: "expected decimal header field".into(),
            });
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Format {
                offset: start as u64,
                msg: "header field does not fit".into(),
            })?;
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::Format {
                offset: pos as u64,
                msg: "missing whitespace after maxval".into(),
            })
        }
    }
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format {
            offset: pos as u64,
            msg: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let payload = &bytes[pos..];
    if payload.len() != w * h * bytes_per {
        return Err(Error::Dimension(format!(
            "{w}x{h} PGM needs {} payload bytes, file has {}",
            w * h * bytes_per,
            payload.len()
        )));
    }
    let samples = if bytes_per == 2 {
        payload
            .chunks_exact(2)
            .map(|c| T::lit(u16::from_be_bytes([c[0], c[1]]) as f64))
            .collect()
    } else {
        payload.iter().map(|&c| T::lit(c as f64)).collect()
    };
    MultiBandRaster::new(w, h, 1, samples)
}

/// Reads a WCR or PGM file, sniffing the magic bytes.
pub fn read_raster<T: Scalar>(path: &Path) -> Result<MultiBandRaster<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else {
        decode_wcr(&bytes)
    }
}

pub fn write_raster<T: Scalar>(
    raster: &MultiBandRaster<T>,
    path: &Path,
    format: RasterFormat,
) -> Result<()> {
    let bytes = match format {
        RasterFormat::Wcr => encode_wcr(raster),
        RasterFormat::Pgm16 => encode_pgm16(raster)?,
    };
    atomic_write(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wcr_of_zeros_is_header_plus_zero_payload() {
        let r = MultiBandRaster::<f32>::new(3, 2, 1, vec![0.0; 6]).unwrap();
        let bytes = encode_wcr(&r);
        assert_eq!(&bytes[..4], b"WCR1");
        assert_eq!(bytes.len(), 20 + 24);
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &[0, 0, 0, 0]);
        assert!(bytes[20..].iter().all(|&b| b == 0));
    }

    #[test]
    fn reads_2x2_wcr() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wcr");
        let mut bytes = b"WCR1".to_vec();
        for v in [2u32, 2, 1, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for v in [0f32, 1.0, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        let r: MultiBandRaster<f32> = read_raster(&path).unwrap();
        assert_eq!((r.width(), r.height(), r.bands()), (2, 2, 1));
        assert_eq!(r.samples(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn pgm_samples_are_big_endian() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x01, 0x00]);
        let r: MultiBandRaster<f32> = decode_pgm(&bytes).unwrap();
        assert_eq!(r.samples(), &[256.0]);
    }

    #[test]
    fn pgm_header_with_comment() {
        let mut bytes = b"P5 # made by hand\n2 1 # dims\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 7, 255, 255]);
        let r: MultiBandRaster<f32> = decode_pgm(&bytes).unwrap();
        assert_eq!(r.samples(), &[7.0, 65535.0]);
    }

    #[test]
    fn pgm16_rejects_multiband_and_out_of_range() {
        let r = MultiBandRaster::<f32>::new(1, 1, 4, vec![0.0; 4]).unwrap();
        assert!(matches!(encode_pgm16(&r), Err(Error::UnsupportedFormat(_))));
        let r = MultiBandRaster::<f32>::new(1, 1, 1, vec![70000.0]).unwrap();
        assert!(matches!(encode_pgm16(&r), Err(Error::Range(_))));
    }

    #[test]
    fn malformed_headers_report_offsets() {
        match decode_wcr::<f32>(b"WCR2aaaaaaaaaaaaaaaa") {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
        match decode_pgm::<f32>(b"P5\n12 x\n") {
            Err(Error::Format { offset: 6, .. }) => {}
            other => panic!("{other:?}"),
        }
        let mut bytes = b"WCR1".to_vec();
        for v in [2u32, 2, 1, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[0; 12]);
        assert!(matches!(decode_wcr::<f32>(&bytes), Err(Error::Dimension(_))));
    }

    #[test]
    fn clip_examples() {
        let r = MultiBandRaster::<f32>::new(3, 1, 1, vec![-5.0, 100.0, 70000.0]).unwrap();
        assert_eq!(r.clip_to_range().samples(), &[0.0, 100.0, 65535.0]);
        let inside = MultiBandRaster::<f32>::new(2, 1, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(inside.clip_to_range(), inside);
        let degenerate = r.with_range(0.0, 0.0).clip_to_range();
        assert!(degenerate.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pgm_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let r = MultiBandRaster::<f32>::new(3, 2, 1, vec![0.0, 1.0, 255.0, 256.0, 40000.0, 65535.0]).unwrap();
        write_raster(&r, &path, RasterFormat::Pgm16).unwrap();
        let back: MultiBandRaster<f32> = read_raster(&path).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn wcr_round_trip_is_bit_exact(
            w in 1usize..9, h in 1usize..9, band_idx in 0usize..3,
            seed in any::<u32>()
        ) {
            let bands = [1, 3, 4][band_idx];
            let mut state = seed as u64 | 1;
            let samples: Vec<f32> = (0..w * h * bands).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f32::from_bits((state >> 32) as u32 & 0x7f7f_ffff)
            }).collect();
            let r = MultiBandRaster::new(w, h, bands, samples).unwrap();
            let back: MultiBandRaster<f32> = decode_wcr(&encode_wcr(&r)).unwrap();
            for (a, b) in back.samples().iter().zip(r.samples()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn clip_is_idempotent(v in proptest::collection::vec(-1e6f32..1e6, 1..40)) {
            let n = v.len();
            let r = MultiBandRaster::new(n, 1, 1, v).unwrap();
            let once = r.clip_to_range();
            prop_assert_eq!(once.clip_to_range(), once);
        }
    }
}
