//! HSV content score and threshold-based shot boundary detection.

use crate::ingest::FrameSource;
use crate::model::{ClipRecord, ClipState, RgbFrame};

use super::{SplitError, SplitterConfig};

/// Per-pixel (H, S, V), each scaled to [0, 255].
fn hsv_planes(frame: &RgbFrame) -> Vec<[f64; 3]> {
    frame
        .pixels()
        .map(|[r, g, b]| {
            let (r, g, b) = (r as f64, g as f64, b as f64);
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            let delta = max - min;
            let s = if max > 0.0 { delta / max * 255.0 } else { 0.0 };
            let h_deg = if delta == 0.0 {
                0.0
            } else if max == r {
                (60.0 * (g - b) / delta).rem_euclid(360.0)
            } else if max == g {
                60.0 * (b - r) / delta + 120.0
            } else {
                60.0 * (r - g) / delta + 240.0
            };
            [h_deg * 255.0 / 360.0, s, max]
        })
        .collect()
}

fn score_planes(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sum: f64 =
        a.iter().zip(b).map(|(p, q)| ((p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs()) / 3.0).sum();
    sum / a.len() as f64
}

/// Mean over pixels of the average absolute H, S, V difference; in [0, 255].
pub fn content_score(prev: &RgbFrame, next: &RgbFrame) -> Result<f64, SplitError> {
    if prev.width != next.width || prev.height != next.height {
        return Err(SplitError::DimensionMismatch {
            left: (prev.width, prev.height),
            right: (next.width, next.height),
        });
    }
    Ok(score_planes(&hsv_planes(prev), &hsv_planes(next)))
}

/// Cut positions over a frame sequence. A cut lands on frame `i` when the
/// score against frame `i-1` exceeds the threshold and the running shot is
/// at least `min_scene_len_frames` long.
type HsvFrame = Vec<[f64; 3]>;

pub fn shot_boundaries<I>(frames: I, cfg: &SplitterConfig) -> Result<Vec<u32>, SplitError>
where
    I: IntoIterator<Item = Result<RgbFrame, SplitError>>,
{
    let mut cuts = Vec::new();
    let mut prev: Option<(HsvFrame, (u32, u32))> = None;
    let mut shot_start = 0u32;
    for (i, frame) in frames.into_iter().enumerate() {
        let frame = frame?;
        let i = i as u32;
        let planes = hsv_planes(&frame);
        let dims = (frame.width, frame.height);
        if let Some((prev_planes, prev_dims)) = &prev {
            if *prev_dims != dims {
                return Err(SplitError::DimensionMismatch { left: *prev_dims, right: dims });
            }
            let score = score_planes(prev_planes, &planes);
            if score > cfg.cutscene_threshold && i - shot_start >= cfg.min_scene_len_frames {
                cuts.push(i);
                shot_start = i;
            }
        }
        prev = Some((planes, dims));
    }
    Ok(cuts)
}

/// Shots partitioning `[0, frame_count)` of the source.
pub fn detect_shots(src: &FrameSource, cfg: &SplitterConfig) -> Result<Vec<ClipRecord>, SplitError> {
    let frames = (0..src.frame_count).map(|i| src.frame_at(i).map(|k| k.frame).map_err(SplitError::from));
    let cuts = shot_boundaries(frames, cfg)?;
    Ok(partition(src, &cuts, ClipState::Shot))
}

pub(crate) fn partition(src: &FrameSource, cuts: &[u32], state: ClipState) -> Vec<ClipRecord> {
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(cuts);
    bounds.push(src.frame_count);
    bounds.windows(2).map(|w| ClipRecord::new(src.source_id.clone(), w[0], w[1], src.fps, state)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(rgb: [u8; 3]) -> RgbFrame {
        RgbFrame::filled(4, 4, rgb)
    }

    #[test]
    fn identical_frames_score_zero() {
        assert_eq!(content_score(&f([12, 200, 7]), &f([12, 200, 7])).unwrap(), 0.0);
    }

    #[test]
    fn black_to_white_is_85() {
        assert_eq!(content_score(&f([0; 3]), &f([255; 3])).unwrap(), 85.0);
    }

    #[test]
    fn black_to_mid_gray() {
        let s = content_score(&f([0; 3]), &f([128; 3])).unwrap();
        assert!((s - 128.0 / 3.0).abs() < 1e-12);
        assert!((s - 42.67).abs() < 0.005);
    }

    #[test]
    fn hue_oracle_red_to_blue() {
        // red: H 0, S 255, V 255; blue: H 240deg -> 170, S 255, V 255
        let s = content_score(&f([255, 0, 0]), &f([0, 0, 255])).unwrap();
        assert!((s - 170.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(content_score(&RgbFrame::filled(2, 2, [0; 3]), &f([0; 3])).is_err());
    }

    #[test]
    fn constant_video_has_no_cuts() {
        let cfg = SplitterConfig::default();
        let frames = (0..300).map(|_| Ok(f([40, 40, 40])));
        assert!(shot_boundaries(frames, &cfg).unwrap().is_empty());
    }

    #[test]
    fn min_scene_len_suppresses_early_cuts() {
        let cfg = SplitterConfig::default();
        let frames = (0..40).map(|i| Ok(if (i / 5) % 2 == 0 { f([0; 3]) } else { f([255; 3]) }));
        let cuts = shot_boundaries(frames, &cfg).unwrap();
        // color flips every 5 frames; 5 and 10 are too close to the start
        assert_eq!(cuts, vec![15, 30]);
    }
}
