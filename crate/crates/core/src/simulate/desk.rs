//! Small reference populations used by the tests, the acceptance suite and
//! the CLI presets.

use super::{ClassSpec, Heterogeneity, SimConfig};
use super::phantom::{Blob, Phantom};

/// Shared body of every desk phantom.
pub fn base_phantom() -> Phantom {
    Phantom::new(vec![
        Blob::new([0.0, 0.0, 0.0], 1.0, 0.28),
        Blob::new([0.38, 0.12, -0.1], 0.8, 0.2),
        Blob::new([-0.3, 0.33, 0.12], 0.7, 0.2),
        Blob::new([0.06, -0.38, 0.28], 0.6, 0.18),
    ])
}

fn with(extra: &[Blob]) -> Phantom {
    let mut p = base_phantom();
    p.blobs.extend_from_slice(extra);
    p
}

pub const BLOB_A: Blob = Blob { center: [0.18, 0.25, 0.3], amplitude: 0.9, sigma: 0.25 };
pub const BLOB_B: Blob = Blob { center: [-0.35, -0.25, -0.3], amplitude: 0.9, sigma: 0.17 };
pub const BLOB_C: Blob = Blob { center: [0.1, -0.05, -0.5], amplitude: 0.9, sigma: 0.17 };
/// Weaker second feature of the three-class population.
pub const BLOB_D: Blob = Blob { center: [-0.3, -0.2, -0.25], amplitude: 0.45, sigma: 0.25 };

fn config(n: usize, snr_het: Option<f64>, seed: u64, heterogeneity: Heterogeneity) -> SimConfig {
    SimConfig {
        n,
        n_pix: 65,
        n_res: 17,
        k_max: 15,
        snr_het,
        seed,
        heterogeneity,
    }
}

/// Base phantom with and without one extra blob, equiprobable.
pub fn two_class(n: usize, snr_het: Option<f64>, seed: u64) -> SimConfig {
    let classes = vec![
        ClassSpec { phantom: base_phantom(), probability: 0.5 },
        ClassSpec { phantom: with(&[BLOB_A]), probability: 0.5 },
    ];
    config(n, snr_het, seed, Heterogeneity::Discrete { classes })
}

/// Three equiprobable classes whose differences have one dominant and one
/// weaker direction.
pub fn three_class(n: usize, snr_het: Option<f64>, seed: u64) -> SimConfig {
    let classes = vec![
        ClassSpec { phantom: base_phantom(), probability: 1.0 / 3.0 },
        ClassSpec { phantom: with(&[BLOB_A]), probability: 1.0 / 3.0 },
        ClassSpec { phantom: with(&[BLOB_A, BLOB_D]), probability: 1.0 / 3.0 },
    ];
    config(n, snr_het, seed, Heterogeneity::Discrete { classes })
}

/// Continuous population on the perimeter of a triangle of volumes.
pub fn triangle(n: usize, snr_het: Option<f64>, seed: u64) -> SimConfig {
    let vertices = vec![with(&[BLOB_A]), with(&[BLOB_B]), with(&[BLOB_C])];
    config(n, snr_het, seed, Heterogeneity::Triangle { vertices })
}

/// Preset by name, as used by the CLI.
pub fn preset(name: &str, n: usize, snr_het: Option<f64>, seed: u64) -> Option<SimConfig> {
    match name {
        "two-class" => Some(two_class(n, snr_het, seed)),
        "three-class" => Some(three_class(n, snr_het, seed)),
        "triangle" => Some(triangle(n, snr_het, seed)),
        _ => None,
    }
}
