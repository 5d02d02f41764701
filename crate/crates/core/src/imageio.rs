//! Decoding PNG/JPEG files into a canonical 8-bit RGB raster, and the
//! grayscale intensity used by the exposure features.

use std::io::ErrorKind;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    /// Builds an image from row-major pixels. Returns `None` when the pixel
    /// count does not match `width * height` or either dimension is zero.
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Option<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return None;
        }
        Some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Option<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// Interleaved `RGBRGB...` bytes, the layout PNG encoders expect.
    pub fn to_interleaved(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }
}

/// Row-major 8-bit intensity raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return None;
        }
        Some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Replicates each intensity across the three channels.
    pub fn to_rgb(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| [v, v, v]).collect(),
        }
    }
}

/// Decodes a PNG or JPEG file.
///
/// 16-bit samples are reduced to 8 bits by integer division by 257, single
/// channel sources are replicated to RGB and alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::FileNotFound {
            path: path.to_path_buf(),
        },
        _ => Error::io(path, e),
    })?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        _ => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
            })
        }
    }
    let decoded = reader.decode().map_err(|e| Error::CorruptImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    from_dynamic(decoded).ok_or_else(|| Error::CorruptImage {
        path: path.to_path_buf(),
        reason: "image has zero width or height".to_string(),
    })
}

fn from_dynamic(img: DynamicImage) -> Option<RgbImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let narrow = |v: u16| (v / 257) as u8;
    let pixels: Vec<[u8; 3]> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| [p[0]; 3]).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| [p[0]; 3]).collect(),
        DynamicImage::ImageRgb8(b) => b.pixels().map(|p| p.0).collect(),
        DynamicImage::ImageRgba8(b) => b.pixels().map(|p| [p[0], p[1], p[2]]).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| [narrow(p[0]); 3]).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| [narrow(p[0]); 3]).collect(),
        DynamicImage::ImageRgb16(b) => b
            .pixels()
            .map(|p| [narrow(p[0]), narrow(p[1]), narrow(p[2])])
            .collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| [narrow(p[0]), narrow(p[1]), narrow(p[2])])
            .collect(),
        other => other.to_rgb8().pixels().map(|p| p.0).collect(),
    };
    RgbImage::new(w, h, pixels)
}

/// BT.601 luma, rounded half away from zero.
///
/// Computed in integer thousandths so that every result is exact.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
            ((weighted + 500) / 1000).min(255) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Luma, Rgb, Rgba};
    use proptest::prelude::*;

    fn gray_of(rgb: [u8; 3]) -> u8 {
        to_gray(&RgbImage::filled(1, 1, rgb).unwrap()).pixels()[0]
    }

    #[test]
    fn luma_examples() {
        assert_eq!(gray_of([255, 255, 255]), 255);
        assert_eq!(gray_of([100, 100, 100]), 100);
        assert_eq!(gray_of([255, 0, 0]), 76);
        assert_eq!(gray_of([0, 0, 0]), 0);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        assert!(RgbImage::new(2, 2, vec![[0; 3]; 3]).is_none());
        assert!(RgbImage::new(0, 0, vec![]).is_none());
        assert!(GrayImage::new(3, 1, vec![0; 2]).is_none());
    }

    #[test]
    fn decodes_png_variants() {
        let dir = tempfile::tempdir().unwrap();

        let white = dir.path().join("white.png");
        ImageBuffer::from_pixel(2, 2, Rgb([255u8, 255, 255]))
            .save(&white)
            .unwrap();
        assert_eq!(
            load_image(&white).unwrap(),
            RgbImage::filled(2, 2, [255, 255, 255]).unwrap()
        );

        let red = dir.path().join("red.png");
        ImageBuffer::from_pixel(1, 1, Rgb([255u8, 0, 0]))
            .save(&red)
            .unwrap();
        assert_eq!(load_image(&red).unwrap().pixels(), &[[255, 0, 0]]);

        let gray = dir.path().join("gray.png");
        ImageBuffer::from_pixel(1, 1, Luma([77u8])).save(&gray).unwrap();
        assert_eq!(load_image(&gray).unwrap().pixels(), &[[77, 77, 77]]);

        let alpha = dir.path().join("alpha.png");
        ImageBuffer::from_pixel(1, 1, Rgba([10u8, 20, 30, 0]))
            .save(&alpha)
            .unwrap();
        assert_eq!(load_image(&alpha).unwrap().pixels(), &[[10, 20, 30]]);

        let deep = dir.path().join("deep.png");
        ImageBuffer::from_pixel(1, 1, Rgb([65535u16, 256, 514]))
            .save(&deep)
            .unwrap();
        assert_eq!(load_image(&deep).unwrap().pixels(), &[[255, 0, 2]]);
    }

    #[test]
    fn decodes_jpeg() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.jpg");
        ImageBuffer::from_pixel(8, 8, Rgb([128u8, 128, 128]))
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height()), (8, 8));
        for p in img.pixels() {
            for &c in p {
                assert!((c as i32 - 128).abs() <= 2);
            }
        }
    }

    #[test]
    fn error_paths_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();

        let missing = dir.path().join("missing.png");
        match load_image(&missing) {
            Err(Error::FileNotFound { path }) => assert_eq!(path, missing),
            other => panic!("unexpected {other:?}"),
        }

        let text = dir.path().join("notes.txt");
        std::fs::write(&text, b"definitely not an image").unwrap();
        assert!(matches!(load_image(&text), Err(Error::UnsupportedFormat { .. })));

        // valid image data, but not PNG/JPEG
        let gif = dir.path().join("tiny.gif");
        std::fs::write(&gif, b"GIF89a\x01\x00\x01\x00\x00\x00\x00;").unwrap();
        assert!(matches!(load_image(&gif), Err(Error::UnsupportedFormat { .. })));

        let garbage = dir.path().join("garbage.png");
        std::fs::write(&garbage, b"definitely not an image").unwrap();
        assert!(matches!(load_image(&garbage), Err(Error::CorruptImage { .. })));

        let full = dir.path().join("full.png");
        ImageBuffer::from_fn(32, 32, |x, y| Rgb([x as u8, y as u8, 7u8]))
            .save(&full)
            .unwrap();
        let bytes = std::fs::read(&full).unwrap();
        let truncated = dir.path().join("truncated.png");
        std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        match load_image(&truncated) {
            Err(Error::CorruptImage { path, .. }) => assert_eq!(path, truncated),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decoding_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.png");
        ImageBuffer::from_fn(16, 9, |x, y| Rgb([x as u8 * 9, y as u8 * 20, 3u8]))
            .save(&path)
            .unwrap();
        assert_eq!(load_image(&path).unwrap(), load_image(&path).unwrap());
    }

    proptest! {
        #[test]
        fn gray_is_identity_on_replicated_gray(g in 0u8..=255) {
            prop_assert_eq!(gray_of([g, g, g]), g);
        }

        #[test]
        fn gray_lies_between_channel_extremes(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let v = gray_of([r, g, b]);
            prop_assert!(v >= r.min(g).min(b));
            prop_assert!(v <= r.max(g).max(b));
        }
    }
}
