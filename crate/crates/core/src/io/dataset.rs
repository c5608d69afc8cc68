use super::container::{into_f32, into_f64, ArrayData, Container};
use crate::error::{Error, Result};
use crate::projection::pixel::PIXEL_CONVENTION;
use crate::projection::rotation::Rotation;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const DATASET_KIND: &str = "dataset";

/// Acquisition parameters stored alongside the pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_images: usize,
    /// Image side length `N`.
    pub n_pix: usize,
    pub n_res: usize,
    pub k_max: usize,
    pub omega_max: f64,
    /// Pixel noise variance when known (simulated data).
    pub sigma2: Option<f64>,
    pub pixel_convention: String,
}

/// Stack of `N × N` images with their rotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub rotations: Vec<Rotation>,
    /// Row-major images, `n · N²` values.
    pub images: Vec<f32>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, rotations: Vec<Rotation>, images: Vec<f32>) -> Result<Self> {
        let d = Self { meta, rotations, images };
        d.check()?;
        Ok(d)
    }

    fn check(&self) -> Result<()> {
        let m = &self.meta;
        if self.rotations.len() != m.n_images {
            return Err(Error::Dimension {
                expected: m.n_images,
                got: self.rotations.len(),
                context: "dataset rotations",
            });
        }
        if self.images.len() != m.n_images * m.n_pix * m.n_pix {
            return Err(Error::Dimension {
                expected: m.n_images * m.n_pix * m.n_pix,
                got: self.images.len(),
                context: "dataset pixels",
            });
        }
        if m.pixel_convention != PIXEL_CONVENTION {
            return Err(Error::Format(format!("pixel convention `{}` is not `{PIXEL_CONVENTION}`", m.pixel_convention)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.meta.n_images
    }

    pub fn is_empty(&self) -> bool {
        self.meta.n_images == 0
    }

    pub fn image(&self, s: usize) -> &[f32] {
        let npix = self.meta.n_pix * self.meta.n_pix;
        &self.images[s * npix..(s + 1) * npix]
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let quats: Vec<f64> = self.rotations.iter().flat_map(|r| r.quaternion()).collect();
        Container::new(DATASET_KIND, serde_json::to_value(&self.meta)?)
            .with("rotations", ArrayData::F64(quats))
            .with("images", ArrayData::F32(self.images.clone()))
            .write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut c = Container::read(path)?;
        if c.kind != DATASET_KIND {
            return Err(Error::Format(format!("{} holds a `{}`, not a dataset", path.display(), c.kind)));
        }
        let meta: DatasetMeta = serde_json::from_value(c.meta.clone())?;
        let quats = into_f64(c.take("rotations")?)?;
        if quats.len() % 4 != 0 {
            return Err(Error::Format("rotation array is not a list of quaternions".into()));
        }
        let rotations = quats.chunks(4).map(|q| Rotation::from_quaternion([q[0], q[1], q[2], q[3]])).collect();
        let images = into_f32(c.take("images")?)?;
        Self::new(meta, rotations, images)
    }

    /// Fingerprint embedded in derived files: shape metadata plus a SHA-256
    /// of the rotations and pixels.
    pub fn fingerprint(&self) -> serde_json::Value {
        let mut h = Sha256::new();
        for r in &self.rotations {
            r.quaternion().iter().for_each(|v| h.update(v.to_le_bytes()));
        }
        self.images.iter().for_each(|v| h.update(v.to_le_bytes()));
        let digest: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        json!({ "n_images": self.meta.n_images, "n_pix": self.meta.n_pix, "n_res": self.meta.n_res, "k_max": self.meta.k_max, "digest": digest })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::rotation::sample_uniform_rotations;

    #[test]
    fn round_trip() {
        let meta = DatasetMeta {
            n_images: 3,
            n_pix: 4,
            n_res: 3,
            k_max: 1,
            omega_max: 1.5 * std::f64::consts::PI,
            sigma2: Some(0.5),
            pixel_convention: PIXEL_CONVENTION.into(),
        };
        let d = Dataset::new(meta, sample_uniform_rotations(3, 1), (0..48).map(|i| i as f32).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tmcv");
        d.write(&path).unwrap();
        let back = Dataset::read(&path).unwrap();
        assert_eq!(back.images, d.images);
        assert_eq!(back.meta, d.meta);
        for (a, b) in back.rotations.iter().zip(&d.rotations) {
            assert!(a.quaternion().iter().zip(b.quaternion()).all(|(x, y)| (x - y).abs() < 1e-15));
        }
    }
}
