use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// A (channels, height, width) image with pixel values in [0, 1].
///
/// The range invariant is enforced at construction and re-established by
/// every transform (they clamp before rebuilding), so downstream code can
/// rely on it without checking.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    pixels: Tensor,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, pixels: Tensor) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.shape() != [channels, height, width] {
            return Err(Error::shape(
                format!("[{channels}, {height}, {width}]"),
                format!("{:?}", pixels.shape()),
            ));
        }
        for &v in pixels.data() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "pixel value {v} outside [0, 1]"
                )));
            }
        }
        Ok(Image {
            channels,
            height,
            width,
            pixels,
        })
    }

    /// Builds an image from raw values, clamping each into [0, 1].
    /// Non-finite values are an error rather than silently clamped.
    pub fn from_raw(channels: usize, height: usize, width: usize, raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image pixel data".into()));
        }
        let clamped: Vec<f64> = raw.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let pixels = Tensor::new(vec![channels, height, width], clamped)?;
        Image::new(channels, height, width, pixels)
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Image::new(
            channels,
            height,
            width,
            Tensor::zeros(vec![channels, height, width]),
        )
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &Tensor {
        &self.pixels
    }

    pub fn flat(&self) -> &[f64] {
        self.pixels.data()
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.pixels.data()[(c * self.height + y) * self.width + x]
    }

    /// Plane of one channel as a slice of length height * width.
    pub fn channel(&self, c: usize) -> &[f64] {
        let hw = self.height * self.width;
        &self.pixels.data()[c * hw..(c + 1) * hw]
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.flat()
            .iter()
            .zip(other.flat().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Bilinear sample of a single channel plane at fractional coordinates,
/// with zero fill outside the [0, h) x [0, w) grid.
pub fn bilinear_sample(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let y0 = y0 as i64;
    let x0 = x0 as i64;
    let at = |yy: i64, xx: i64| -> f64 {
        if yy < 0 || xx < 0 || yy >= h as i64 || xx >= w as i64 {
            0.0
        } else {
            plane[yy as usize * w + xx as usize]
        }
    };
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
    let bot = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
    top * (1.0 - fy) + bot * fy
}

/// Stretches a g x g control grid to an h x w plane by bilinear
/// interpolation, mapping grid corners onto plane corners.
pub fn bilinear_upsample(grid: &[f64], g: usize, h: usize, w: usize) -> Vec<f64> {
    assert!(g >= 2, "control grid needs at least 2 points per axis");
    assert_eq!(grid.len(), g * g);
    let mut out = vec![0.0; h * w];
    let sy = (g - 1) as f64 / (h.max(2) - 1) as f64;
    let sx = (g - 1) as f64 / (w.max(2) - 1) as f64;
    for y in 0..h {
        let gy = y as f64 * sy;
        let y0 = (gy.floor() as usize).min(g - 2);
        let fy = gy - y0 as f64;
        for x in 0..w {
            let gx = x as f64 * sx;
            let x0 = (gx.floor() as usize).min(g - 2);
            let fx = gx - x0 as f64;
            let top = grid[y0 * g + x0] * (1.0 - fx) + grid[y0 * g + x0 + 1] * fx;
            let bot = grid[(y0 + 1) * g + x0] * (1.0 - fx) + grid[(y0 + 1) * g + x0 + 1] * fx;
            out[y * w + x] = top * (1.0 - fy) + bot * fy;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_validates_shape_and_range() {
        let ok = Image::new(1, 2, 2, Tensor::new(vec![1, 2, 2], vec![0.0, 0.5, 1.0, 0.25]).unwrap());
        assert!(ok.is_ok());
        let bad_shape = Image::new(1, 2, 2, Tensor::zeros(vec![2, 2]));
        assert!(bad_shape.is_err());
        let bad_range = Image::new(1, 1, 2, Tensor::new(vec![1, 1, 2], vec![0.0, 1.5]).unwrap());
        assert!(bad_range.is_err());
    }

    #[test]
    fn from_raw_clamps_but_rejects_nan() {
        let img = Image::from_raw(1, 1, 3, vec![-0.5, 0.5, 2.0]).unwrap();
        assert_eq!(img.flat(), &[0.0, 0.5, 1.0]);
        assert!(Image::from_raw(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn get_indexes_row_major_chw() {
        let data: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let img = Image::from_raw(2, 2, 3, data).unwrap();
        assert_eq!(img.get(0, 0, 0), 0.0);
        assert_eq!(img.get(0, 1, 2), 5.0 / 11.0);
        assert_eq!(img.get(1, 0, 0), 6.0 / 11.0);
        assert_eq!(img.channel(1).len(), 6);
    }

    #[test]
    fn bilinear_sample_interpolates_and_zero_fills() {
        // 2x2 plane: 0 1 / 2 3
        let plane = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(bilinear_sample(&plane, 2, 2, 0.0, 0.0), 0.0);
        assert_eq!(bilinear_sample(&plane, 2, 2, 1.0, 1.0), 3.0);
        let mid = bilinear_sample(&plane, 2, 2, 0.5, 0.5);
        assert!((mid - 1.5).abs() < 1e-12);
        assert_eq!(bilinear_sample(&plane, 2, 2, -5.0, 0.0), 0.0);
        assert_eq!(bilinear_sample(&plane, 2, 2, 0.0, 7.0), 0.0);
    }

    #[test]
    fn upsample_preserves_corners_and_constants() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        let out = bilinear_upsample(&grid, 2, 5, 5);
        assert!((out[0] - 0.0).abs() < 1e-12);
        assert!((out[4] - 1.0).abs() < 1e-12);
        assert!((out[20] - 2.0).abs() < 1e-12);
        assert!((out[24] - 3.0).abs() < 1e-12);
        let flat = bilinear_upsample(&[0.7; 9], 3, 8, 6);
        assert!(flat.iter().all(|v| (v - 0.7).abs() < 1e-12));
    }
}
