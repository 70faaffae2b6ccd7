use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CatalogError, ManifestRecord};
use crate::select::{selective_rates, Gate};

pub const STOPWORDS_V1: &str = include_str!("../../resources/stopwords_v1.txt");

/// Reference values for a full-scale corpus, printed as anchors.
pub const REFERENCE_MEAN_DURATION_S: f64 = 8.477;
pub const REFERENCE_MEAN_CAPTION_WORDS: f64 = 13.2;

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_V1.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect())
}

pub fn caption_words(caption: &str) -> usize {
    caption.split_whitespace().count()
}

fn tokens(caption: &str) -> impl Iterator<Item = String> + '_ {
    caption
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub clips: usize,
    pub mean_duration_s: f64,
    /// Whole seconds -> clip count.
    pub duration_histogram: BTreeMap<u64, usize>,
    pub mean_caption_words: f64,
    /// Word count -> caption count.
    pub caption_length_histogram: BTreeMap<usize, usize>,
    /// Most frequent non-stop-words, by count then alphabetically.
    pub top_words: Vec<(String, usize)>,
    pub strong_fraction: f64,
    pub weak_fraction: f64,
    pub selective_rates: Vec<(String, f64)>,
}

/// Dataset statistics over manifest records. `roster` fixes the order of
/// the selective-rate table; teachers outside it are appended.
pub fn stats(records: &[ManifestRecord], top_k: usize, roster: &[String]) -> Result<StatsReport, CatalogError> {
    if records.is_empty() {
        return Err(CatalogError::EmptyManifest);
    }
    let n = records.len() as f64;
    let mut duration_histogram = BTreeMap::new();
    let mut caption_length_histogram = BTreeMap::new();
    let mut freq: HashMap<String, usize> = HashMap::new();
    let mut total_s = 0.0;
    let mut total_words = 0usize;
    let mut strong = 0usize;
    for r in records {
        let frames = r.end_frame.saturating_sub(r.start_frame) as u64;
        total_s += r.fps.seconds(frames);
        *duration_histogram.entry(r.fps.whole_seconds(frames)).or_default() += 1;
        let w = caption_words(&r.caption);
        total_words += w;
        *caption_length_histogram.entry(w).or_default() += 1;
        for t in tokens(&r.caption) {
            if !stopwords().contains(t.as_str()) {
                *freq.entry(t).or_default() += 1;
            }
        }
        if r.gate == Gate::Strong {
            strong += 1;
        }
    }
    let mut top_words: Vec<(String, usize)> = freq.into_iter().collect();
    top_words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top_words.truncate(top_k);
    let strong_fraction = strong as f64 / n;
    let rates = selective_rates(records.iter().map(|r| r.teacher_id.as_str()), roster)
        .map_err(|_| CatalogError::EmptyManifest)?;
    Ok(StatsReport {
        clips: records.len(),
        mean_duration_s: total_s / n,
        duration_histogram,
        mean_caption_words: total_words as f64 / n,
        caption_length_histogram,
        top_words,
        strong_fraction,
        weak_fraction: 1.0 - strong_fraction,
        selective_rates: rates,
    })
}

impl StatsReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "clips: {}", self.clips);
        let _ = writeln!(s, "mean duration: {:.3} s", self.mean_duration_s);
        let _ = writeln!(s, "duration histogram (1 s bins):");
        for (sec, c) in &self.duration_histogram {
            let _ = writeln!(s, "  [{sec:>3}, {:>3}) {c:>6}", sec + 1);
        }
        let _ = writeln!(s, "mean caption length: {:.2} words", self.mean_caption_words);
        let _ = writeln!(s, "caption length histogram (words):");
        for (w, c) in &self.caption_length_histogram {
            let _ = writeln!(s, "  {w:>4} {c:>6}");
        }
        let _ = writeln!(s, "top words:");
        for (w, c) in &self.top_words {
            let _ = writeln!(s, "  {w:<20} {c}");
        }
        let _ = writeln!(s, "gate: strong {:.4}, weak {:.4}", self.strong_fraction, self.weak_fraction);
        let _ = writeln!(s, "selective rates:");
        for (t, r) in &self.selective_rates {
            let _ = writeln!(s, "  {t:<20} {r:.4}");
        }
        let _ = writeln!(
            s,
            "-- reference at full scale: mean duration {REFERENCE_MEAN_DURATION_S} s, mean caption {REFERENCE_MEAN_CAPTION_WORDS} words"
        );
        s
    }

    /// One JSON object per line: `{"metric": .., ...}`.
    pub fn machine_lines(&self) -> Vec<String> {
        let mut out = vec![
            json!({"metric": "clips", "value": self.clips}),
            json!({"metric": "mean_duration_s", "value": self.mean_duration_s}),
        ];
        out.extend(
            self.duration_histogram.iter().map(|(b, c)| json!({"metric": "duration_bin", "second": b, "count": c})),
        );
        out.push(json!({"metric": "mean_caption_words", "value": self.mean_caption_words}));
        out.extend(
            self.caption_length_histogram
                .iter()
                .map(|(w, c)| json!({"metric": "caption_length_bin", "words": w, "count": c})),
        );
        out.extend(self.top_words.iter().map(|(w, c)| json!({"metric": "word", "word": w, "count": c})));
        out.push(json!({"metric": "strong_fraction", "value": self.strong_fraction}));
        out.push(json!({"metric": "weak_fraction", "value": self.weak_fraction}));
        out.extend(
            self.selective_rates.iter().map(|(t, r)| json!({"metric": "selective_rate", "teacher_id": t, "value": r})),
        );
        out.push(json!({"metric": "reference_mean_duration_s", "value": REFERENCE_MEAN_DURATION_S}));
        out.push(json!({"metric": "reference_mean_caption_words", "value": REFERENCE_MEAN_CAPTION_WORDS}));
        out.into_iter().map(|v| v.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClipId, Fps, SourceId};
    use std::collections::BTreeSet;

    fn rec(frames: u32, caption: &str, teacher: &str, gate: Gate) -> ManifestRecord {
        let src = SourceId("src".into());
        ManifestRecord {
            clip_id: ClipId::derive(&src, 0, frames),
            source_id: src,
            start_frame: 0,
            end_frame: frames,
            fps: Fps::integer(30),
            caption: caption.into(),
            teacher_id: teacher.into(),
            matching_score: 0.5,
            gate,
            inputs_used: BTreeSet::new(),
        }
    }

    #[test]
    fn durations_and_lengths() {
        let r = stats(
            &[rec(90, "a b c", "t1", Gate::Strong), rec(150, "a b", "t2", Gate::Weak), rec(300, "x", "t1", Gate::Weak)],
            5,
            &["t1".into(), "t2".into(), "t3".into()],
        )
        .unwrap();
        assert_eq!(r.mean_duration_s, 6.0);
        assert_eq!(r.duration_histogram, BTreeMap::from([(3, 1), (5, 1), (10, 1)]));
        assert_eq!(r.mean_caption_words, 2.0);
        assert!((r.strong_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.selective_rates[2], ("t3".into(), 0.0));
    }

    #[test]
    fn mean_words_two_and_a_half() {
        let r = stats(&[rec(90, "a b c", "t", Gate::Weak), rec(90, "a b", "t", Gate::Weak)], 5, &[]).unwrap();
        assert_eq!(r.mean_caption_words, 2.5);
    }

    #[test]
    fn stop_words_removed() {
        let r = stats(
            &[rec(90, "A man is riding a red bike", "t", Gate::Weak), rec(90, "The man and the dog", "t", Gate::Weak)],
            3,
            &[],
        )
        .unwrap();
        assert_eq!(r.top_words[0], ("man".into(), 2));
        assert!(r.top_words.iter().all(|(w, _)| !["a", "the", "is", "and"].contains(&w.as_str())));
        assert_eq!(r.top_words.len(), 3);
    }

    #[test]
    fn empty_is_error_and_footer_present() {
        assert!(matches!(stats(&[], 5, &[]), Err(CatalogError::EmptyManifest)));
        let r = stats(&[rec(90, "x", "t", Gate::Weak)], 5, &[]).unwrap();
        assert!(r.render_text().contains("8.477"));
        assert!(r.render_text().contains("13.2"));
        for l in r.machine_lines() {
            serde_json::from_str::<serde_json::Value>(&l).unwrap();
        }
    }
}
