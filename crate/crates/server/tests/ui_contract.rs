mod common;

use clipcurate::annotation::resolve;
use clipcurate::model::{AnnotationMode, AnnotationTask, ClipId};
use clipcurate_server::form::FormState;
use clipcurate_server::{ServiceOptions, TaskView};
use common::{call, start};
use proptest::prelude::*;

fn task(mode: AnnotationMode, n: usize, order: Vec<usize>) -> AnnotationTask {
    AnnotationTask {
        task_id: "t".into(),
        clip_id: ClipId("c".into()),
        mode,
        candidate_count: n,
        page_size: 11,
        caption_order: order,
        lease: None,
    }
}

fn keys() -> impl Strategy<Value = Vec<char>> {
    prop::collection::vec(prop::sample::select(vec!['0', '1', '2', '3', '4', '5', '6', '7', '8', '9', 'x']), 0..20)
}

proptest! {
    #[test]
    fn form_payloads_are_always_accepted(
        best in any::<bool>(),
        order in (1usize..=9).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle()),
        keys in keys(),
    ) {
        let mode = if best { AnnotationMode::BestCaption } else { AnnotationMode::EveryGood };
        let t = task(mode, order.len(), order.clone());
        let mut form = FormState::new(mode, order.len());
        for k in keys {
            form.key(k);
            prop_assert!(!(form.all_bad && !form.checked.is_empty()));
            match form.payload("a") {
                Some(sub) => { prop_assert!(resolve(&t, &sub).is_ok(), "{sub:?}"); }
                None => prop_assert!(!form.all_bad && form.checked.is_empty()),
            }
        }
    }
}

#[test]
fn form_driven_session_over_http() {
    for mode in [AnnotationMode::EveryGood, AnnotationMode::BestCaption] {
        let h = start(ServiceOptions { mode, ..Default::default() }, 1);
        let mut stored = 0;
        for round in 0.. {
            let (status, body) = call(ureq::get(&h.url("/tasks/lease?annotator=ui")), None);
            if status == 404 {
                break;
            }
            let view: TaskView = serde_json::from_value(body).unwrap();
            let mut form = FormState::new(view.mode, view.captions.len());
            assert!(form.payload("ui").is_none());
            match round % 3 {
                0 => form.key('0'),
                1 => form.key('1'),
                _ => {
                    form.key('1');
                    form.key(char::from_digit(view.captions.len().min(9) as u32, 10).unwrap());
                }
            }
            let body = serde_json::to_value(form.payload("ui").unwrap()).unwrap();
            let (status, reply) =
                call(ureq::post(&h.url(&format!("/tasks/{}/result", view.task_id))), Some(body.clone()));
            assert_eq!(status, 200, "{reply}");
            stored += 1;
            let (status, reply) = call(ureq::post(&h.url(&format!("/tasks/{}/result", view.task_id))), Some(body));
            assert_eq!((status, reply["outcome"].as_str()), (200, Some("duplicate")));
        }
        assert_eq!(stored, h.state.store.tasks().len());
        assert_eq!(h.state.store.results().len(), stored);
    }
}
