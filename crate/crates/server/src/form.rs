//! Form rules the annotation page follows. Any payload these rules emit is
//! one the service accepts; the contract tests hold both sides to that.

use std::collections::BTreeSet;

use clipcurate::annotation::Submission;
use clipcurate::model::AnnotationMode;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormState {
    pub mode: AnnotationMode,
    /// Number of captions on the page.
    pub shown: usize,
    pub checked: BTreeSet<usize>,
    pub all_bad: bool,
}

impl FormState {
    pub fn new(mode: AnnotationMode, shown: usize) -> Self {
        Self { mode, shown, checked: BTreeSet::new(), all_bad: false }
    }

    /// Clicks the caption at display `position`. Checkboxes toggle in
    /// every_good; best_caption is a radio group. Either way All-Bad clears.
    pub fn click(&mut self, position: usize) {
        if position >= self.shown {
            return;
        }
        self.all_bad = false;
        match self.mode {
            AnnotationMode::EveryGood => {
                if !self.checked.remove(&position) {
                    self.checked.insert(position);
                }
            }
            AnnotationMode::BestCaption => {
                self.checked.clear();
                self.checked.insert(position);
            }
        }
    }

    pub fn click_all_bad(&mut self) {
        self.all_bad = !self.all_bad;
        if self.all_bad {
            self.checked.clear();
        }
    }

    /// Keyboard shortcuts: `1`..`9` click a caption, `0` toggles All-Bad.
    pub fn key(&mut self, key: char) {
        match key {
            '0' => self.click_all_bad(),
            '1'..='9' => self.click(key as usize - '1' as usize),
            _ => {}
        }
    }

    pub fn can_submit(&self) -> bool {
        self.all_bad || !self.checked.is_empty()
    }

    /// The request body, or None while submit is blocked.
    pub fn payload(&self, annotator_id: &str) -> Option<Submission> {
        self.can_submit().then(|| Submission {
            annotator_id: annotator_id.to_owned(),
            positions: self.checked.iter().copied().collect(),
            all_bad: self.all_bad,
        })
    }
}
