//! Distribution drift: parameterized image transforms that generate the
//! sequence of drifted datasets an evolving model is fine-tuned on.
//!
//! Drift is always applied to the ORIGINAL data with magnitude scaled by the
//! update index (angle = i * p, brightness factor = 1 + i * p, and so on),
//! never compounded on previously transformed copies. Compounding would
//! accumulate interpolation error and change the meaning of the step size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{bilinear_sample, Image, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Angle,
    Brightness,
    Hue,
    Saturation,
}

/// One drift family with its per-update step size `p`.
///
/// Units: degrees for `Angle`; a hue-cycle fraction for `Hue`; unitless
/// factor increments for `Brightness` and `Saturation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub step: f64,
}

impl DriftSpec {
    pub fn new(kind: DriftKind, step: f64) -> Result<Self> {
        let spec = DriftSpec { kind, step };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.step.is_finite() || self.step < 0.0 {
            return Err(Error::invalid(format!(
                "drift step must be finite and >= 0, got {}",
                self.step
            )));
        }
        // Hue is cyclic mod 1; steps above half a cycle alias backwards.
        if self.kind == DriftKind::Hue && self.step > 0.5 {
            return Err(Error::invalid(format!(
                "hue drift step must be <= 0.5 per update, got {}",
                self.step
            )));
        }
        Ok(())
    }
}

/// Labeled image dataset. All images share one (channels, height, width)
/// shape so batches can be assembled without per-sample checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<Image>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(images: Vec<Image>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::IdxCountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes must be >= 1"));
        }
        for &l in &labels {
            if l >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    num_classes,
                });
            }
        }
        if let Some(first) = images.first() {
            let dims = (first.channels(), first.height(), first.width());
            for img in &images[1..] {
                if (img.channels(), img.height(), img.width()) != dims {
                    return Err(Error::shape(
                        format!("{dims:?} for all images"),
                        format!(
                            "({}, {}, {})",
                            img.channels(),
                            img.height(),
                            img.width()
                        ),
                    ));
                }
            }
        }
        Ok(Dataset {
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn image(&self, i: usize) -> &Image {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// (channels, height, width) of the images, or None when empty.
    pub fn image_dims(&self) -> Option<(usize, usize, usize)> {
        self.images
            .first()
            .map(|img| (img.channels(), img.height(), img.width()))
    }

    /// Flattened feature length of one image; 0 for an empty dataset.
    pub fn feature_len(&self) -> usize {
        self.image_dims().map_or(0, |(c, h, w)| c * h * w)
    }

    /// Assembles the selected samples into a (n, feature_len) design matrix
    /// plus their labels, rows in index order.
    pub fn batch(&self, idxs: &[usize]) -> (Tensor, Vec<usize>) {
        let f = self.feature_len();
        let mut data = Vec::with_capacity(idxs.len() * f);
        let mut labels = Vec::with_capacity(idxs.len());
        for &i in idxs {
            data.extend_from_slice(self.images[i].flat());
            labels.push(self.labels[i]);
        }
        let x = Tensor::new(vec![idxs.len(), f], data).expect("batch assembly");
        (x, labels)
    }

    /// New dataset keeping only the selected indices, in order.
    pub fn select(&self, idxs: &[usize]) -> Dataset {
        Dataset {
            images: idxs.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idxs.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Replaces one sample. Internal to poisoning; keeps invariants by
    /// construction (caller supplies a same-shape image and valid label).
    pub(crate) fn replace(&mut self, i: usize, img: Image, label: usize) {
        self.images[i] = img;
        self.labels[i] = label;
    }
}

/// Drifts every image of `base` to update index `i`. Labels and order are
/// preserved; `i = 0` returns a pixel-identical copy.
pub fn apply_drift(base: &Dataset, spec: &DriftSpec, i: usize) -> Result<Dataset> {
    spec.validate()?;
    if i == 0 {
        return Ok(base.clone());
    }
    let t = i as f64;
    let images: Result<Vec<Image>> = base
        .images
        .iter()
        .map(|img| match spec.kind {
            DriftKind::Angle => Ok(rotate(img, t * spec.step)),
            DriftKind::Brightness => adjust_brightness(img, 1.0 + t * spec.step),
            DriftKind::Hue => adjust_hue(img, t * spec.step),
            DriftKind::Saturation => adjust_saturation(img, 1.0 + t * spec.step),
        })
        .collect();
    Ok(Dataset {
        images: images?,
        labels: base.labels.clone(),
        num_classes: base.num_classes,
    })
}

/// Rotates image content by `degrees` counterclockwise (row 0 at top) about
/// the pixel-grid center ((h-1)/2, (w-1)/2), bilinear sampling, zero fill.
pub fn rotate(img: &Image, degrees: f64) -> Image {
    if degrees == 0.0 {
        return img.clone();
    }
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cy = (h - 1) as f64 / 2.0;
    let cx = (w - 1) as f64 / 2.0;
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let plane = img.channel(ch);
        for y in 0..h {
            let dy = y as f64 - cy;
            for x in 0..w {
                let dx = x as f64 - cx;
                let sx = cx + cos * dx - sin * dy;
                let sy = cy + sin * dx + cos * dy;
                out.push(bilinear_sample(plane, h, w, sy, sx));
            }
        }
    }
    Image::from_raw(c, h, w, out).expect("rotation preserves finiteness")
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = max;
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        (((g - b) / delta).rem_euclid(6.0)) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (h, s, v)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    // h < 1 guarantees h6 < 6 mathematically, but rounding can yield 6.0.
    let sector = (h6.floor() as usize).min(5);
    let f = h6 - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

fn map_hsv(img: &Image, f: impl Fn(f64, f64, f64) -> (f64, f64, f64)) -> Result<Image> {
    if img.channels() != 3 {
        return Err(Error::shape(
            "3-channel image for HSV transform",
            format!("{} channel(s)", img.channels()),
        ));
    }
    let (h, w) = (img.height(), img.width());
    let hw = h * w;
    let mut out = vec![0.0; 3 * hw];
    let (rp, gp, bp) = (img.channel(0), img.channel(1), img.channel(2));
    for i in 0..hw {
        let (hh, ss, vv) = rgb_to_hsv(rp[i], gp[i], bp[i]);
        let (r, g, b) = f(hh, ss, vv);
        out[i] = r;
        out[hw + i] = g;
        out[2 * hw + i] = b;
    }
    Image::from_raw(3, h, w, out)
}

/// Shifts hue by `shift` cycles (mod 1) through an RGB->HSV->RGB round trip.
pub fn adjust_hue(img: &Image, shift: f64) -> Result<Image> {
    if !shift.is_finite() {
        return Err(Error::invalid("hue shift must be finite"));
    }
    if img.channels() != 3 {
        return Err(Error::shape(
            "3-channel image for hue adjustment",
            format!("{} channel(s)", img.channels()),
        ));
    }
    if shift == 0.0 {
        return Ok(img.clone());
    }
    map_hsv(img, |h, s, v| hsv_to_rgb(h + shift, s, v))
}

/// Scales saturation by `factor` (clamped into [0, 1]) in HSV space.
pub fn adjust_saturation(img: &Image, factor: f64) -> Result<Image> {
    if !factor.is_finite() || factor < 0.0 {
        return Err(Error::invalid(format!(
            "saturation factor must be >= 0, got {factor}"
        )));
    }
    if img.channels() != 3 {
        return Err(Error::shape(
            "3-channel image for saturation adjustment",
            format!("{} channel(s)", img.channels()),
        ));
    }
    if factor == 1.0 {
        return Ok(img.clone());
    }
    map_hsv(img, |h, s, v| hsv_to_rgb(h, (s * factor).min(1.0), v))
}

/// Scales every pixel by `factor` and clamps to [0, 1]. Equivalent to HSV
/// value scaling below saturation, but clamping is per pixel channel (a
/// 0.95 pixel under factor 1.1 becomes 1.0, not rescaled hue-preserving).
pub fn adjust_brightness(img: &Image, factor: f64) -> Result<Image> {
    if !factor.is_finite() || factor < 0.0 {
        return Err(Error::invalid(format!(
            "brightness factor must be >= 0, got {factor}"
        )));
    }
    if factor == 1.0 {
        return Ok(img.clone());
    }
    let raw: Vec<f64> = img.flat().iter().map(|v| v * factor).collect();
    Image::from_raw(img.channels(), img.height(), img.width(), raw)
}
