//! Geometric augmentation for the Aug-BC baseline: random crop, random
//! horizontal/vertical translation, and random zoom, applied sequentially
//! to the maze state image. The wall channel is resampled nearest-neighbor;
//! the goal and agent one-hot channels are re-placed at the transformed
//! cell, clamped into the grid, so each keeps exactly one active cell.

use crate::grid::{StateTensor, STATE_CHANNELS};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Crop padding as a fraction of the side length.
    pub crop: f32,
    /// Max translation as a fraction of the side length.
    pub translate: f32,
    /// Max zoom deviation from 1.
    pub zoom: f32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            crop: 0.1,
            translate: 0.1,
            zoom: 0.1,
        }
    }
}

impl AugmentConfig {
    pub const OFF: AugmentConfig = AugmentConfig {
        crop: 0.0,
        translate: 0.0,
        zoom: 0.0,
    };

    pub fn validate(&self) -> bool {
        let ok = |v: f32| (0.0..=0.5).contains(&v);
        ok(self.crop) && ok(self.translate) && ok(self.zoom)
    }
}

/// One sampled transform: integer crop/translate shifts plus per-axis zoom
/// about the image center. Six draws per sample regardless of magnitudes,
/// so toggling magnitudes never desynchronizes other streams.
struct SampledTransform {
    shift_y: f32,
    shift_x: f32,
    scale_y: f32,
    scale_x: f32,
}

fn sample_transform(config: &AugmentConfig, size: usize, rng: &mut Rng) -> SampledTransform {
    let c = libm::roundf(config.crop * size as f32);
    let crop_y = libm::roundf(rng.uniform(-c, c));
    let crop_x = libm::roundf(rng.uniform(-c, c));
    let t = config.translate * size as f32;
    let trans_y = rng.uniform(-t, t);
    let trans_x = rng.uniform(-t, t);
    let scale_y = 1.0 + rng.uniform(-config.zoom, config.zoom);
    let scale_x = 1.0 + rng.uniform(-config.zoom, config.zoom);
    SampledTransform {
        shift_y: crop_y + trans_y,
        shift_x: crop_x + trans_x,
        scale_y,
        scale_x,
    }
}

/// Apply a sampled transform to a flat (3, H, W) state image in place.
pub fn augment_state(
    config: &AugmentConfig,
    data: &mut [f32],
    height: usize,
    width: usize,
    rng: &mut Rng,
) {
    let tf = sample_transform(config, height.max(width), rng);
    let hw = height * width;
    debug_assert_eq!(data.len(), STATE_CHANNELS * hw);
    let cy = (height as f32 - 1.0) / 2.0;
    let cx = (width as f32 - 1.0) / 2.0;

    // Wall channel: inverse-map each output cell, nearest neighbor,
    // out-of-range reads as wall-free border padding (zero).
    let walls: alloc::vec::Vec<f32> = data[..hw].to_vec();
    for y in 0..height {
        for x in 0..width {
            let sy = (y as f32 - cy) / tf.scale_y + cy - tf.shift_y;
            let sx = (x as f32 - cx) / tf.scale_x + cx - tf.shift_x;
            let (ry, rx) = (libm::roundf(sy), libm::roundf(sx));
            data[y * width + x] = if ry < 0.0 || rx < 0.0 || ry >= height as f32 || rx >= width as f32
            {
                0.0
            } else {
                walls[ry as usize * width + rx as usize]
            };
        }
    }

    // One-hot channels: forward-map the active cell and clamp to the grid.
    for ch in 1..STATE_CHANNELS {
        let plane = &mut data[ch * hw..(ch + 1) * hw];
        let idx = plane
            .iter()
            .position(|&v| v == 1.0)
            .expect("one-hot channel must have an active cell");
        let (py, px) = ((idx / width) as f32, (idx % width) as f32);
        let oy = (py + tf.shift_y - cy) * tf.scale_y + cy;
        let ox = (px + tf.shift_x - cx) * tf.scale_x + cx;
        let ny = libm::roundf(oy).clamp(0.0, height as f32 - 1.0) as usize;
        let nx = libm::roundf(ox).clamp(0.0, width as f32 - 1.0) as usize;
        plane.iter_mut().for_each(|v| *v = 0.0);
        plane[ny * width + nx] = 1.0;
    }
}

/// Convenience wrapper over an owned [`StateTensor`].
pub fn augment_tensor(config: &AugmentConfig, tensor: &StateTensor, rng: &mut Rng) -> StateTensor {
    let mut data = tensor.data().to_vec();
    augment_state(config, &mut data, tensor.height(), tensor.width(), rng);
    StateTensor::from_data(tensor.height(), tensor.width(), data).unwrap()
}
