//! Max Running distance: the largest perceptual jump between consecutive
//! per-second keyframes of a clip. Lower means more semantically consistent.

use crate::ingest::FrameSource;
use crate::model::RgbFrame;

use super::SplitError;

/// A perceptual distance between two frames (an LPIPS-style backend).
pub trait PerceptualDistance: Sync {
    fn distance(&self, a: &RgbFrame, b: &RgbFrame) -> Result<f64, String>;
}

/// Deterministic stand-in for a learned perceptual metric: total variation
/// distance between the 4x4x4 RGB color histograms of the two frames, in [0, 1].
#[derive(Debug, Default, Clone, Copy)]
pub struct HistogramDistance;

fn color_distribution(f: &RgbFrame) -> [f64; 64] {
    let mut h = [0f64; 64];
    for [r, g, b] in f.pixels() {
        h[(r as usize / 64) * 16 + (g as usize / 64) * 4 + b as usize / 64] += 1.0;
    }
    let n = f.pixel_count().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

impl PerceptualDistance for HistogramDistance {
    fn distance(&self, a: &RgbFrame, b: &RgbFrame) -> Result<f64, String> {
        let (ha, hb) = (color_distribution(a), color_distribution(b));
        Ok(0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>())
    }
}

/// Maximum of `dist(f_i, f_{i+1})` over consecutive keyframes; 0 for one keyframe.
pub fn max_running_distance(keyframes: &[RgbFrame], dist: &dyn PerceptualDistance) -> Result<f64, SplitError> {
    if keyframes.is_empty() {
        return Err(SplitError::NoKeyframes);
    }
    let mut best = 0.0f64;
    for pair in keyframes.windows(2) {
        let d = dist.distance(&pair[0], &pair[1]).map_err(SplitError::Metric)?;
        best = best.max(d);
    }
    Ok(best)
}

/// Max Running LPIPS of the clip `[start, end)` of `src`.
pub fn max_running_lpips(
    src: &FrameSource,
    start: u32,
    end: u32,
    dist: &dyn PerceptualDistance,
) -> Result<f64, SplitError> {
    let frames: Vec<RgbFrame> = src.per_second_keyframes(start, end)?.into_iter().map(|k| k.frame).collect();
    max_running_distance(&frames, dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Looks distances up by the first byte of each frame.
    struct Scripted(Vec<f64>);

    impl PerceptualDistance for Scripted {
        fn distance(&self, a: &RgbFrame, _b: &RgbFrame) -> Result<f64, String> {
            Ok(self.0[a.data[0] as usize])
        }
    }

    fn frames(n: u8) -> Vec<RgbFrame> {
        (0..n).map(|i| RgbFrame::filled(1, 1, [i, 0, 0])).collect()
    }

    #[test]
    fn picks_the_largest_jump() {
        assert_eq!(max_running_distance(&frames(4), &Scripted(vec![0.1, 0.5, 0.3])).unwrap(), 0.5);
    }

    #[test]
    fn single_keyframe_is_zero() {
        assert_eq!(max_running_distance(&frames(1), &Scripted(vec![])).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_is_its_distance() {
        assert_eq!(max_running_distance(&frames(2), &Scripted(vec![0.7])).unwrap(), 0.7);
    }

    #[test]
    fn no_keyframes_is_an_error() {
        assert!(max_running_distance(&[], &HistogramDistance).is_err());
    }

    #[test]
    fn histogram_distance_range() {
        let black = RgbFrame::filled(4, 4, [0; 3]);
        let white = RgbFrame::filled(4, 4, [255; 3]);
        assert_eq!(HistogramDistance.distance(&black, &white).unwrap(), 1.0);
        assert_eq!(HistogramDistance.distance(&black, &black).unwrap(), 0.0);
    }
}
