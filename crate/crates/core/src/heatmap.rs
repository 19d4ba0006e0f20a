//! Approximate detection heatmaps.
//!
//! Each box contributes an anisotropic Gaussian
//! `T(x, y) = exp(-2 [(x - x0)^2 / w^2 + (y - y0)^2 / h^2]) / (pi * sqrt(w h))`
//! in pixel units, centred on the box and evaluated at every integer pixel
//! coordinate of the whole image. Its integral over the plane is `sqrt(w h) / 2`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scene::SceneRecord;

/// Row-major scalar grid the size of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatField<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> HeatField<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![T::zero(); width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// Sum of all cells times the unit pixel area.
    pub fn mass(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// `(x, y)` of the first maximal cell in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

/// Gaussian heatmap of one pixel-space box `(x, y, w, h)` on a `width x height` grid.
pub fn box_heatmap<T: Scalar>(pixel_box: (f64, f64, f64, f64), width: usize, height: usize) -> Result<HeatField<T>> {
    let (bx, by, bw, bh) = pixel_box;
    if !(bw > 0.0 && bh > 0.0) {
        return Err(Error::ZeroArea { w: bw, h: bh });
    }
    if width == 0 || height == 0 {
        return Err(Error::DimensionMismatch(format!("empty grid {width}x{height}")));
    }
    let (x0, y0) = (T::of(bx + bw / 2.0), T::of(by + bh / 2.0));
    let (w, h) = (T::of(bw), T::of(bh));
    let two = T::of(2.0);
    let peak = T::one() / (T::of(std::f64::consts::PI) * (w * h).sqrt());
    // The exponent separates, so precompute one factor per column and row.
    let fx: Vec<T> = (0..width)
        .map(|x| {
            let d = (T::of(x as f64) - x0) / w;
            (-two * d * d).exp()
        })
        .collect();
    let fy: Vec<T> = (0..height)
        .map(|y| {
            let d = (T::of(y as f64) - y0) / h;
            (-two * d * d).exp()
        })
        .collect();
    let mut field = HeatField::zeros(width, height);
    for (y, &ry) in fy.iter().enumerate() {
        for (x, &rx) in fx.iter().enumerate() {
            field.values[y * width + x] = peak * rx * ry;
        }
    }
    Ok(field)
}

/// Sums the fields in order and scales the result to a maximum of 1.
pub fn overlay_normalize<T: Scalar>(fields: &[HeatField<T>]) -> Result<HeatField<T>> {
    let Some(first) = fields.first() else {
        return Err(Error::DimensionMismatch("no fields to overlay".into()));
    };
    let mut out = HeatField::zeros(first.width, first.height);
    for f in fields {
        if (f.width, f.height) != (out.width, out.height) {
            return Err(Error::DimensionMismatch(format!(
                "field {}x{} vs {}x{}",
                f.width, f.height, out.width, out.height
            )));
        }
        for (o, v) in out.values.iter_mut().zip(&f.values) {
            *o += *v;
        }
    }
    let max = out.max();
    if max > T::zero() {
        for v in &mut out.values {
            *v /= max;
        }
    }
    Ok(out)
}

/// Overlaid, max-normalized heatmap of every box of a scene at image resolution.
pub fn scene_heatmap<T: Scalar>(record: &SceneRecord) -> Result<HeatField<T>> {
    let (w, h) = (record.width as usize, record.height as usize);
    if record.boxes.is_empty() {
        return Ok(HeatField::zeros(w, h));
    }
    let fields = record
        .boxes
        .iter()
        .map(|b| box_heatmap(b.to_pixels(record.width, record.height), w, h))
        .collect::<Result<Vec<_>>>()?;
    overlay_normalize(&fields)
}

/// Binary 8-bit PGM bytes; values are clamped to [0, 1] and quantized as `round(255 v)`.
pub fn encode_pgm<T: Scalar>(field: &HeatField<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", field.width, field.height).into_bytes();
    out.extend(field.values.iter().map(|v| {
        let v = v.to_f64_lossy().clamp(0.0, 1.0);
        (255.0 * v).round() as u8
    }));
    out
}

pub fn write_pgm<T: Scalar>(field: &HeatField<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_pgm(field))?;
    w.flush()?;
    Ok(())
}

/// Reads a binary 8-bit PGM back into `[0, 1]` values.
pub fn read_pgm<T: Scalar, R: Read>(mut reader: R) -> Result<HeatField<T>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Parse { line: 0, message: format!("pgm: {m}") };
    // Header: magic, width, height, maxval separated by whitespace, then one byte.
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("only 8-bit P5 is supported"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let data = bytes.get(pos..pos + width * height).ok_or_else(|| bad("truncated pixel data"))?;
    Ok(HeatField { width, height, values: data.iter().map(|&b| T::of(b as f64 / 255.0)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn center_value() {
        let f: HeatField<f64> = box_heatmap((150.0, 150.0, 100.0, 100.0), 400, 400).unwrap();
        assert!((f.get(200, 200) - 1.0 / (100.0 * PI)).abs() < 1e-15);
        assert!((f.get(200, 200) - 3.1831e-3).abs() < 1e-7);
        assert_eq!(f.argmax(), (200, 200));
    }

    #[test]
    fn one_scale_offset_is_e_inverse() {
        // Box 2*sqrt(2)*10 wide so that w/sqrt(2) = 20 px lands on a pixel.
        let w = 20.0 * 2f64.sqrt();
        let f: HeatField<f64> = box_heatmap((100.0 - w / 2.0, 90.0, w, 20.0), 200, 200).unwrap();
        let c = f.get(100, 100);
        assert!((f.get(120, 100) - c * (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mass_matches_closed_form() {
        let f: HeatField<f64> = box_heatmap((200.0, 150.0, 100.0, 100.0), 500, 400).unwrap();
        assert!((f.mass() - 50.0).abs() / 50.0 < 0.01);
    }

    #[test]
    fn zero_area_errors() {
        assert!(matches!(box_heatmap::<f64>((1.0, 1.0, 0.0, 5.0), 10, 10), Err(Error::ZeroArea { .. })));
    }

    #[test]
    fn overlay_rules() {
        let a: HeatField<f64> = box_heatmap((10.0, 10.0, 20.0, 20.0), 64, 48).unwrap();
        let one = overlay_normalize(&[a.clone()]).unwrap();
        assert_eq!(one.max(), 1.0);
        let two = overlay_normalize(&[a.clone(), a.clone()]).unwrap();
        for (x, y) in one.values.iter().zip(&two.values) {
            assert!((x - y).abs() < 1e-15);
        }
        let zeros = overlay_normalize(&[HeatField::<f64>::zeros(3, 2)]).unwrap();
        assert!(zeros.values.iter().all(|&v| v == 0.0));
        assert!(overlay_normalize(&[a, HeatField::zeros(3, 2)]).is_err());
    }

    #[test]
    fn smaller_box_has_higher_peak() {
        let small: HeatField<f64> = box_heatmap((20.0, 20.0, 20.0, 20.0), 400, 200).unwrap();
        let large: HeatField<f64> = box_heatmap((250.0, 50.0, 100.0, 100.0), 400, 200).unwrap();
        assert_eq!(overlay_normalize(&[small, large]).unwrap().argmax(), (30, 30));
    }

    #[test]
    fn pgm_bytes() {
        let f = HeatField { width: 2, height: 2, values: vec![0.0, 1.0, 0.5, 0.25] };
        let bytes = encode_pgm(&f);
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 255, 128, 64]);
        let back: HeatField<f64> = read_pgm(&bytes[..]).unwrap();
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn single_precision_field() {
        let f: HeatField<f32> = box_heatmap((150.0, 150.0, 100.0, 100.0), 400, 400).unwrap();
        assert!((f.get(200, 200) - 1.0 / (100.0 * std::f32::consts::PI)).abs() < 1e-9);
    }
}
