//! Shoebox-room scene simulation.
//!
//! Scenes are sampled with the room, reverberation and placement ranges used for
//! the 4-microphone desk-scale corpus, impulse responses come from the image
//! source method, and [`synth_source`] stands in for a labeled sound-event corpus.

pub mod dataset;
pub mod ism;
pub mod render;
pub mod source;

pub use dataset::{
    build_dataset, build_dataset_with, load_manifest, DatasetOptions, Manifest, ManifestRow, RoomRecord, SourceProvider, Split,
};
pub use ism::{
    decay_time, rt60_to_absorption, rt60_to_absorption_eyring, rt60_to_absorption_image_decay, schroeder_curve_db, simulate_rir,
    simulate_rir_with, AbsorptionModel, IsmOptions, MaxOrder, Rir,
};
pub use render::{fft_convolve, render_scene, render_scene_with, RENDER_PEAK};
pub use source::{synth_source, ClassTemplate, MAX_CLASSES};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Omnidirectional microphones at fixed offsets from the array center, in the array frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub mic_offsets: Vec<[f64; 3]>,
}

impl ArrayGeometry {
    /// `n` microphones evenly spaced on a horizontal circle; mic `k` sits at azimuth `360·k/n`.
    pub fn circular(n: usize, diameter: f64) -> Self {
        let r = diameter / 2.0;
        let mic_offsets = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                [r * a.cos(), r * a.sin(), 0.0]
            })
            .collect();
        Self { mic_offsets }
    }

    /// The 4-mic, 0.1 m diameter circular array.
    pub fn default_tetra_circle() -> Self {
        Self::circular(4, 0.1)
    }

    pub fn n_mics(&self) -> usize {
        self.mic_offsets.len()
    }

    /// Absolute mic positions for an array centered at `center` rotated by `yaw_deg`.
    pub fn positions(&self, center: [f64; 3], yaw_deg: f64) -> Vec<[f64; 3]> {
        let (s, c) = yaw_deg.to_radians().sin_cos();
        self.mic_offsets
            .iter()
            .map(|o| {
                [
                    center[0] + c * o[0] - s * o[1],
                    center[1] + s * o[0] + c * o[1],
                    center[2] + o[2],
                ]
            })
            .collect()
    }
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::default_tetra_circle()
    }
}

/// Sampling ranges for [`sample_scene`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneRanges {
    pub width: (f64, f64),
    pub length: (f64, f64),
    pub height: (f64, f64),
    pub rt60: (f64, f64),
    pub placement_height: (f64, f64),
    pub wall_clearance: f64,
    pub min_separation: f64,
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            width: (3.0, 10.0),
            length: (3.0, 10.0),
            height: (2.5, 4.0),
            rt60: (0.1, 1.0),
            placement_height: (0.5, 2.0),
            wall_clearance: 0.5,
            min_separation: 0.5,
        }
    }
}

/// Room geometry, reverberation time, array pose and source position.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RoomScene {
    pub room_dims: [f64; 3],
    pub rt60: f64,
    pub array_center: [f64; 3],
    pub array_yaw_deg: f64,
    pub source_position: [f64; 3],
    pub azimuth_deg: f64,
}

impl RoomScene {
    pub fn new(
        room_dims: [f64; 3],
        rt60: f64,
        array_center: [f64; 3],
        array_yaw_deg: f64,
        source_position: [f64; 3],
    ) -> Self {
        let dx = source_position[0] - array_center[0];
        let dy = source_position[1] - array_center[1];
        let azimuth_deg = wrap_deg(dy.atan2(dx).to_degrees() - array_yaw_deg);
        Self {
            room_dims,
            rt60,
            array_center,
            array_yaw_deg,
            source_position,
            azimuth_deg,
        }
    }

    /// A source at `azimuth_deg` in the array frame, `distance` meters away
    /// horizontally and `height_offset` above the array, placed in a room large
    /// enough that only the direct path matters when simulated with order 0.
    pub fn free_field(azimuth_deg: f64, distance: f64, height_offset: f64) -> Self {
        let dims = [40.0, 40.0, 20.0];
        let center = [20.0, 20.0, 10.0];
        let (s, c) = azimuth_deg.to_radians().sin_cos();
        let src = [
            center[0] + distance * c,
            center[1] + distance * s,
            center[2] + height_offset,
        ];
        let mut scene = Self::new(dims, 0.1, center, 0.0, src);
        scene.azimuth_deg = wrap_deg(azimuth_deg);
        scene
    }

    pub fn volume(&self) -> f64 {
        self.room_dims.iter().product()
    }

    pub fn surface_area(&self) -> f64 {
        let [w, l, h] = self.room_dims;
        2.0 * (w * l + w * h + l * h)
    }

    fn clearance_ok(p: [f64; 3], dims: [f64; 3], clearance: f64) -> bool {
        (0..3).all(|a| p[a] >= clearance && p[a] <= dims[a] - clearance)
    }

    /// Checks the placement invariants against `ranges`.
    pub fn satisfies(&self, ranges: &SceneRanges) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        let [w, l, h] = self.room_dims;
        let sep = dist(self.array_center, self.source_position);
        within(w, ranges.width)
            && within(l, ranges.length)
            && within(h, ranges.height)
            && within(self.rt60, ranges.rt60)
            && within(self.array_center[2], ranges.placement_height)
            && within(self.source_position[2], ranges.placement_height)
            && Self::clearance_ok(self.array_center, self.room_dims, ranges.wall_clearance)
            && Self::clearance_ok(self.source_position, self.room_dims, ranges.wall_clearance)
            && sep >= ranges.min_separation
            && self.azimuth_deg > -180.0
            && self.azimuth_deg <= 180.0
    }
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Maximum rejection-sampling attempts for placements.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Draws a room, reverberation time, array pose and source position.
pub fn sample_scene(rng: &mut RngStream) -> Result<RoomScene> {
    sample_scene_in(&SceneRanges::default(), rng)
}

pub fn sample_scene_in(ranges: &SceneRanges, rng: &mut RngStream) -> Result<RoomScene> {
    let dims = [
        rng.uniform(ranges.width.0, ranges.width.1),
        rng.uniform(ranges.length.0, ranges.length.1),
        rng.uniform(ranges.height.0, ranges.height.1),
    ];
    let rt60 = rng.uniform(ranges.rt60.0, ranges.rt60.1);
    let yaw = rng.uniform(0.0, 360.0);
    let c = ranges.wall_clearance;
    let z_hi = ranges.placement_height.1.min(dims[2] - c);
    let z_lo = ranges.placement_height.0.max(c);
    if z_hi < z_lo || dims[0] < 2.0 * c || dims[1] < 2.0 * c {
        return Err(Error::Sampling { attempts: 0 });
    }
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut place = || {
            [
                rng.uniform(c, dims[0] - c),
                rng.uniform(c, dims[1] - c),
                rng.uniform(z_lo, z_hi),
            ]
        };
        let array = place();
        let source = place();
        if dist(array, source) >= ranges.min_separation {
            return Ok(RoomScene::new(dims, rt60, array, yaw, source));
        }
    }
    Err(Error::Sampling {
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}
