//! Artificial cuts, endpoint features, consistency filtering, stitching
//! and the final post-processing pass.

use crate::model::{ClipRecord, ClipState, DropReason, Embedding};

use super::{EndpointProbe, SplitError, SplitterConfig};

/// Splits every clip longer than `artificial_cut_seconds` into fixed-length
/// head clips plus a shorter remainder.
pub fn artificial_cuts(clips: Vec<ClipRecord>, cfg: &SplitterConfig) -> Vec<ClipRecord> {
    let mut out = Vec::with_capacity(clips.len());
    for clip in clips {
        let head = clip.fps.frames_within(cfg.artificial_cut_seconds).max(1) as u32;
        let mut start = clip.start_frame;
        while clip.fps.seconds((clip.end_frame - start) as u64) > cfg.artificial_cut_seconds + 1e-9 {
            out.push(ClipRecord::new(clip.source_id.clone(), start, start + head, clip.fps, ClipState::Cut5s));
            start += head;
        }
        out.push(ClipRecord::new(clip.source_id.clone(), start, clip.end_frame, clip.fps, ClipState::Cut5s));
    }
    out
}

/// Clip-relative frame offsets of the two endpoint features of an
/// `n`-frame clip: `floor(0.1 n)` and `floor(0.9 n)`, clamped to `n - 1`.
pub fn endpoint_offsets(n: u32) -> (u32, u32) {
    assert!(n > 0, "empty clip has no endpoints");
    let a = (n as u64 / 10) as u32;
    let b = ((n as u64 * 9) / 10) as u32;
    (a.min(n - 1), b.min(n - 1))
}

pub fn endpoint_embeddings(clip: &ClipRecord, probe: &dyn EndpointProbe) -> Result<(Embedding, Embedding), SplitError> {
    let n = clip.frame_span();
    if n == 0 {
        return Err(SplitError::EmptyClip(clip.clip_id.clone()));
    }
    let (a, b) = endpoint_offsets(n);
    let context = |e| SplitError::Backend { clip: clip.clip_id.clone(), message: e };
    let e_a = probe.embed_at(clip.start_frame + a).map_err(context)?;
    let e_b = if a == b { e_a.clone() } else { probe.embed_at(clip.start_frame + b).map_err(context)? };
    Ok((e_a, e_b))
}

/// Keeps clips whose endpoint distance is at most `consistency_max`.
pub fn consistency_filter(mut clips: Vec<ClipRecord>, cfg: &SplitterConfig) -> Result<Vec<ClipRecord>, SplitError> {
    for clip in clips.iter_mut().filter(|c| !c.state.is_dropped()) {
        let d = clip.endpoint_distance().ok_or_else(|| SplitError::MissingEmbeddings(clip.clip_id.clone()))?;
        let next =
            if d <= cfg.consistency_max { ClipState::Filtered } else { ClipState::Dropped(DropReason::Transition) };
        clip.advance(next)?;
    }
    Ok(clips)
}

fn with_mean(mut clip: ClipRecord) -> ClipRecord {
    clip.mean_embedding = clip.endpoint_embeddings.as_ref().map(|(a, b)| a.midpoint(b));
    clip
}

/// Greedy left-to-right chain merge of contiguous surviving clips whose
/// boundary features are within `stitch_max`. The merged clip keeps the
/// leftmost `e_A` and re-extracts `e_B` over the merged span; a merge that
/// would push the merged endpoint distance past `consistency_max` is refused.
pub fn stitch(
    clips: Vec<ClipRecord>,
    cfg: &SplitterConfig,
    probe: &dyn EndpointProbe,
) -> Result<Vec<ClipRecord>, SplitError> {
    let mut out = Vec::with_capacity(clips.len());
    let mut open: Option<ClipRecord> = None;
    for clip in clips {
        if clip.state.is_dropped() {
            out.push(clip);
            continue;
        }
        let next_a =
            &clip.endpoint_embeddings.as_ref().ok_or_else(|| SplitError::MissingEmbeddings(clip.clip_id.clone()))?.0;
        let Some(cur) = open.take() else {
            open = Some(clip);
            continue;
        };
        let (cur_a, cur_b) =
            cur.endpoint_embeddings.clone().ok_or_else(|| SplitError::MissingEmbeddings(cur.clip_id.clone()))?;
        let adjacent = cur.source_id == clip.source_id && cur.end_frame == clip.start_frame;
        let mut merged = None;
        if adjacent && cur_b.distance(next_a) <= cfg.stitch_max {
            let candidate = cur.clone().with_interval(cur.start_frame, clip.end_frame);
            let (_, b_off) = endpoint_offsets(candidate.frame_span());
            let e_b = probe
                .embed_at(candidate.start_frame + b_off)
                .map_err(|message| SplitError::Backend { clip: candidate.clip_id.clone(), message })?;
            if cur_a.distance(&e_b) <= cfg.consistency_max {
                let mut candidate = candidate;
                candidate.endpoint_embeddings = Some((cur_a, e_b));
                merged = Some(candidate);
            }
        }
        match merged {
            Some(m) => open = Some(m),
            None => {
                out.push(finish_stitch(cur)?);
                open = Some(clip);
            }
        }
    }
    if let Some(cur) = open {
        out.push(finish_stitch(cur)?);
    }
    out.sort_by_key(|c| (c.start_frame, c.end_frame));
    Ok(out)
}

fn finish_stitch(mut clip: ClipRecord) -> Result<ClipRecord, SplitError> {
    clip.advance(ClipState::Stitched)?;
    Ok(with_mean(clip))
}

/// Final pass, in order: duration floor, motion floor, truncation to the
/// first `max_clip_seconds`, near-duplicate removal against earlier kept
/// clips of the same source, and symmetric trimming.
pub fn postprocess(clips: Vec<ClipRecord>, cfg: &SplitterConfig) -> Result<Vec<ClipRecord>, SplitError> {
    let mut kept_means: Vec<(crate::model::SourceId, Embedding)> = Vec::new();
    let mut out = Vec::with_capacity(clips.len());
    for mut clip in clips {
        if clip.state.is_dropped() {
            out.push(clip);
            continue;
        }
        if clip.duration_seconds() < cfg.min_clip_seconds - 1e-9 {
            clip.advance(ClipState::Dropped(DropReason::TooShort))?;
            out.push(clip);
            continue;
        }
        let motion = clip.endpoint_distance().ok_or_else(|| SplitError::MissingEmbeddings(clip.clip_id.clone()))?;
        if motion <= cfg.motion_min {
            clip.advance(ClipState::Dropped(DropReason::Motionless))?;
            out.push(clip);
            continue;
        }
        let max_frames = clip.fps.frames_within(cfg.max_clip_seconds) as u32;
        if clip.frame_span() > max_frames {
            let start = clip.start_frame;
            clip = clip.with_interval(start, start + max_frames);
        }
        if clip.mean_embedding.is_none() {
            clip = with_mean(clip);
        }
        let mean = clip.mean_embedding.clone().expect("endpoint embeddings present");
        let duplicate = kept_means.iter().any(|(src, m)| *src == clip.source_id && m.distance(&mean) <= cfg.dedup_min);
        if duplicate {
            clip.advance(ClipState::Dropped(DropReason::Duplicate))?;
            out.push(clip);
            continue;
        }
        kept_means.push((clip.source_id.clone(), mean));
        let (start, end) = trimmed_interval(clip.start_frame, clip.end_frame, clip.fps, cfg);
        if start >= end {
            clip.advance(ClipState::Dropped(DropReason::TooShort))?;
            out.push(clip);
            continue;
        }
        clip = clip.with_interval(start, end);
        clip.advance(ClipState::Kept)?;
        out.push(clip);
    }
    Ok(out)
}

/// Drops `floor(trim_fraction * n)` frames from each end. The result is
/// capped at `(1 - 2 trim_fraction) * max_clip_seconds` so rounding never
/// lets a maximal clip exceed the trimmed ceiling.
pub fn trimmed_interval(start: u32, end: u32, fps: crate::model::Fps, cfg: &SplitterConfig) -> (u32, u32) {
    let n = end - start;
    let cut = (cfg.trim_fraction * n as f64 + 1e-9).floor() as u32;
    let ceiling = fps.frames_within((1.0 - 2.0 * cfg.trim_fraction) * cfg.max_clip_seconds) as u32;
    let len = n.saturating_sub(2 * cut).min(ceiling);
    (start + cut, start + cut + len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Fps, SourceId};
    use std::collections::HashMap;

    fn clip(start: u32, end: u32, state: ClipState) -> ClipRecord {
        ClipRecord::new(SourceId("s".into()), start, end, Fps::integer(30), state)
    }

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new("t", v.to_vec())
    }

    fn with_ends(mut c: ClipRecord, a: &[f32], b: &[f32]) -> ClipRecord {
        c.endpoint_embeddings = Some((emb(a), emb(b)));
        c
    }

    struct Table(HashMap<u32, Vec<f32>>);

    impl EndpointProbe for Table {
        fn embed_at(&self, frame: u32) -> Result<Embedding, String> {
            self.0.get(&frame).map(|v| emb(v)).ok_or_else(|| format!("no embedding for frame {frame}"))
        }
    }

    fn secs(c: &ClipRecord) -> f64 {
        c.duration_seconds()
    }

    #[test]
    fn artificial_cut_unrolling() {
        let cfg = SplitterConfig::default();
        let out = artificial_cuts(vec![clip(0, 360, ClipState::Shot)], &cfg);
        assert_eq!(out.iter().map(secs).collect::<Vec<_>>(), vec![5.0, 5.0, 2.0]);
        let out = artificial_cuts(vec![clip(0, 150, ClipState::Shot)], &cfg);
        assert_eq!(out.len(), 1);
        let out = artificial_cuts(vec![clip(30, 210, ClipState::Shot)], &cfg);
        assert_eq!(out.iter().map(|c| (c.start_frame, c.end_frame)).collect::<Vec<_>>(), vec![(30, 180), (180, 210)]);
        assert!(out.iter().all(|c| c.state == ClipState::Cut5s));
    }

    #[test]
    fn endpoint_offset_arithmetic() {
        assert_eq!(endpoint_offsets(150), (15, 135));
        assert_eq!(endpoint_offsets(5), (0, 4));
        assert_eq!(endpoint_offsets(1), (0, 0));
        assert_eq!(endpoint_offsets(10), (1, 9));
    }

    #[test]
    fn single_frame_endpoints_coincide() {
        let probe = Table([(7, vec![0.5, 0.5])].into());
        let (a, b) = endpoint_embeddings(&clip(7, 8, ClipState::Cut5s), &probe).unwrap();
        assert_eq!(a.distance(&b), 0.0);
    }

    #[test]
    fn consistency_threshold_is_inclusive() {
        let cfg = SplitterConfig::default();
        let clips = vec![
            with_ends(clip(0, 30, ClipState::Cut5s), &[0.0, 0.0], &[0.0, 0.0]),
            with_ends(clip(30, 60, ClipState::Cut5s), &[0.0, 0.0], &[1.0, 0.0]),
            with_ends(clip(60, 90, ClipState::Cut5s), &[0.0, 0.0], &[1.2, 0.0]),
        ];
        let out = consistency_filter(clips, &cfg).unwrap();
        assert_eq!(out[0].state, ClipState::Filtered);
        assert_eq!(out[1].state, ClipState::Filtered);
        assert_eq!(out[2].state, ClipState::Dropped(DropReason::Transition));
        assert!(consistency_filter(vec![clip(0, 3, ClipState::Cut5s)], &cfg).is_err());
    }

    fn filtered(start: u32, end: u32, a: &[f32], b: &[f32]) -> ClipRecord {
        with_ends(clip(start, end, ClipState::Filtered), a, b)
    }

    #[test]
    fn identical_boundaries_merge() {
        let cfg = SplitterConfig::default();
        let probe = Table([(54, vec![0.0, 0.1])].into());
        let out = stitch(
            vec![filtered(0, 30, &[0.0, 0.0], &[0.0, 0.1]), filtered(30, 60, &[0.0, 0.1], &[0.0, 0.1])],
            &cfg,
            &probe,
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].start_frame, out[0].end_frame), (0, 60));
        assert_eq!(out[0].state, ClipState::Stitched);
        let (a, b) = out[0].endpoint_embeddings.clone().unwrap();
        assert_eq!(a.vector, vec![0.0, 0.0]);
        assert_eq!(b.vector, vec![0.0, 0.1]);
        assert!(out[0].mean_embedding.is_some());
    }

    #[test]
    fn far_boundaries_do_not_merge() {
        let cfg = SplitterConfig::default();
        let probe = Table(HashMap::new());
        let out = stitch(
            vec![filtered(0, 30, &[0.0, 0.0], &[0.0, 0.0]), filtered(30, 60, &[0.7, 0.0], &[0.7, 0.0])],
            &cfg,
            &probe,
        )
        .unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn gaps_break_adjacency() {
        let cfg = SplitterConfig::default();
        let probe = Table(HashMap::new());
        let clips = vec![
            filtered(0, 30, &[0.0], &[0.0]),
            with_ends(clip(30, 60, ClipState::Dropped(DropReason::Transition)), &[0.0], &[2.0]),
            filtered(60, 90, &[0.0], &[0.0]),
        ];
        let out = stitch(clips, &cfg, &probe).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[1].state, ClipState::Dropped(DropReason::Transition));
    }

    #[test]
    fn chain_merge_of_three() {
        // boundary distances 0.5 and 0.5 (simulated by hand below)
        let cfg = SplitterConfig::default();
        let probe = Table([(54, vec![0.5, 0.0]), (81, vec![0.5, 0.0])].into());
        let clips = vec![
            filtered(0, 30, &[0.0, 0.0], &[0.0, 0.0]),
            filtered(30, 60, &[0.5, 0.0], &[0.5, 0.0]),
            filtered(60, 90, &[0.5, 0.5], &[0.5, 0.5]),
        ];
        // step 1: |e_B(c1) - e_A(c2)| = 0.5 -> merge [0,60), e_B <- frame 54 = (0.5, 0)
        // step 2: |(0.5, 0) - (0.5, 0.5)| = 0.5 -> merge [0,90), e_B <- frame 81
        let out = stitch(clips, &cfg, &probe).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].start_frame, out[0].end_frame), (0, 90));
    }

    #[test]
    fn merge_refused_when_it_breaks_consistency() {
        let cfg = SplitterConfig::default();
        let probe = Table([(54, vec![1.5, 0.0])].into());
        let clips = vec![filtered(0, 30, &[0.0, 0.0], &[0.5, 0.0]), filtered(30, 60, &[0.6, 0.0], &[1.5, 0.0])];
        let out = stitch(clips, &cfg, &probe).unwrap();
        assert_eq!(out.len(), 2);
    }

    fn stitched(start: u32, end: u32, a: &[f32], b: &[f32]) -> ClipRecord {
        with_mean(with_ends(clip(start, end, ClipState::Stitched), a, b))
    }

    #[test]
    fn too_short_dropped() {
        let cfg = SplitterConfig::default();
        let out = postprocess(vec![stitched(0, 57, &[0.0], &[0.5])], &cfg).unwrap();
        assert_eq!(out[0].state, ClipState::Dropped(DropReason::TooShort));
    }

    #[test]
    fn motionless_dropped_inclusive() {
        let cfg = SplitterConfig::default();
        let out = postprocess(vec![stitched(0, 90, &[0.0], &[0.1])], &cfg).unwrap();
        assert_eq!(out[0].state, ClipState::Dropped(DropReason::Motionless));
        // exactly at the bound (0.25 is exact in f32)
        let at = SplitterConfig { motion_min: 0.25, ..SplitterConfig::default() };
        let out = postprocess(vec![stitched(0, 90, &[0.0], &[0.25])], &at).unwrap();
        assert_eq!(out[0].state, ClipState::Dropped(DropReason::Motionless));
        let out = postprocess(vec![stitched(0, 90, &[0.0], &[0.16])], &cfg).unwrap();
        assert_eq!(out[0].state, ClipState::Kept);
    }

    #[test]
    fn long_clip_truncated_then_trimmed() {
        let cfg = SplitterConfig::default();
        let out = postprocess(vec![stitched(0, 75 * 30, &[0.0], &[0.5])], &cfg).unwrap();
        assert_eq!(out[0].state, ClipState::Kept);
        assert_eq!((out[0].start_frame, out[0].end_frame), (6 * 30, 54 * 30));
    }

    #[test]
    fn duplicates_dropped() {
        let cfg = SplitterConfig::default();
        let out = postprocess(vec![stitched(0, 90, &[0.0], &[0.5]), stitched(90, 180, &[0.0], &[0.5])], &cfg).unwrap();
        assert_eq!(out[0].state, ClipState::Kept);
        assert_eq!(out[1].state, ClipState::Dropped(DropReason::Duplicate));
    }

    #[test]
    fn two_second_clip_trims_to_1_6() {
        let cfg = SplitterConfig::default();
        let out = postprocess(vec![stitched(0, 60, &[0.0], &[0.5])], &cfg).unwrap();
        assert_eq!(out[0].state, ClipState::Kept);
        assert!((out[0].duration_seconds() - 1.6).abs() < 1e-12);
    }

    #[test]
    fn trim_ceiling_holds_for_every_length() {
        let cfg = SplitterConfig::default();
        for fps in [Fps::integer(24), Fps::integer(30), Fps::new(30000, 1001), Fps::integer(25)] {
            let lo = fps.frames_within(2.0) as u32;
            let hi = fps.frames_within(60.0) as u32;
            for n in lo.max(1)..=hi {
                let (s, e) = trimmed_interval(0, n, fps, &cfg);
                let d = fps.seconds((e - s) as u64);
                let pre = fps.seconds(n as u64);
                if pre < 2.0 {
                    continue;
                }
                assert!(d <= 48.0 + 1e-9, "fps {fps} n {n} -> {d}");
                assert!(d >= 1.6 - 1e-9, "fps {fps} n {n} -> {d}");
            }
        }
    }
}
