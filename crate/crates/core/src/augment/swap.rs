//! Channel rearrangements of the 4-mic circular array.
//!
//! Mic `k` sits at array-frame azimuth `90°·k`, counterclockwise. Permuting the
//! channels is then equivalent to rotating (and possibly mirroring) the scene.
//! An arrangement is written as the azimuth map `θ ↦ sign·θ + offset`; the
//! permutation that realizes it is `π(k) = k − offset/90` for `sign = +1` and
//! `π(k) = offset/90 − k` for `sign = −1`, both mod 4, with output channel `k`
//! taken from input channel `π(k)`.

use crate::audio::MultiChannelWaveform;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::roomsim::wrap_deg;

pub const N_ARRANGEMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelSwapArrangement {
    sign: i8,
    /// Quarter turns, 0..4.
    quarters: u8,
}

impl ChannelSwapArrangement {
    pub const IDENTITY: Self = Self { sign: 1, quarters: 0 };

    /// Arrangement with azimuth map `θ ↦ sign·θ + offset_deg`. `offset_deg` must be a
    /// multiple of 90.
    pub fn new(sign: i8, offset_deg: i32) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::Config(format!("azimuth sign must be ±1, got {sign}")));
        }
        if offset_deg % 90 != 0 {
            return Err(Error::Config(format!("offset {offset_deg}° is not a multiple of 90°")));
        }
        Ok(Self {
            sign,
            quarters: (offset_deg / 90).rem_euclid(4) as u8,
        })
    }

    /// All 8 arrangements: the 4 rotations, then the 4 reflections.
    pub fn all() -> [Self; N_ARRANGEMENTS] {
        std::array::from_fn(|i| Self {
            sign: if i < 4 { 1 } else { -1 },
            quarters: (i % 4) as u8,
        })
    }

    pub fn index(&self) -> usize {
        self.quarters as usize + if self.sign < 0 { 4 } else { 0 }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < N_ARRANGEMENTS).then(|| Self::all()[i])
    }

    pub fn azimuth_sign(&self) -> i8 {
        self.sign
    }

    /// Offset in degrees, one of −90, 0, 90, 180.
    pub fn azimuth_offset_deg(&self) -> i32 {
        match self.quarters {
            0 => 0,
            1 => 90,
            2 => 180,
            _ => -90,
        }
    }

    /// `permutation()[k]` is the input channel that becomes output channel `k`.
    pub fn permutation(&self) -> [usize; 4] {
        let q = self.quarters as i32;
        std::array::from_fn(|k| {
            let k = k as i32;
            let src = if self.sign > 0 { k - q } else { q - k };
            src.rem_euclid(4) as usize
        })
    }

    /// Recovers the arrangement realized by a channel permutation, if it is one of the 8.
    pub fn from_permutation(perm: [usize; 4]) -> Option<Self> {
        Self::all().into_iter().find(|a| a.permutation() == perm)
    }

    pub fn transform_azimuth(&self, deg: f64) -> f64 {
        wrap_deg(self.sign as f64 * deg + self.azimuth_offset_deg() as f64)
    }

    /// Arrangement equivalent to applying `other` first and then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        // s_a (s_b θ + φ_b) + φ_a
        let q = self.sign as i32 * other.quarters as i32 + self.quarters as i32;
        Self {
            sign: self.sign * other.sign,
            quarters: q.rem_euclid(4) as u8,
        }
    }

    pub fn inverse(&self) -> Self {
        // θ = s (θ' − φ)
        let q = -(self.sign as i32) * self.quarters as i32;
        Self {
            sign: self.sign,
            quarters: q.rem_euclid(4) as u8,
        }
    }
}

impl Default for ChannelSwapArrangement {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Reorders the four channels of `w` by `arr`.
pub fn channel_swap(w: &MultiChannelWaveform, arr: &ChannelSwapArrangement) -> Result<MultiChannelWaveform> {
    if w.n_channels() != 4 {
        return Err(Error::Unsupported(format!(
            "channel swap needs 4 channels, got {}",
            w.n_channels()
        )));
    }
    let channels = arr.permutation().iter().map(|&p| w.channel(p).to_vec()).collect();
    Ok(MultiChannelWaveform::from_parts_unchecked(channels, w.sample_rate()))
}

/// Uniform draw over the 8 arrangements.
pub fn sample_arrangement(rng: &mut RngStream) -> ChannelSwapArrangement {
    ChannelSwapArrangement::all()[rng.below(N_ARRANGEMENTS)]
}
