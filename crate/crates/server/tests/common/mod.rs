#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use clipcurate::corpus::write_corpus;
use clipcurate::pipeline::{run_all, PipelineConfig, RunOptions};
use clipcurate_server::{router, ServiceOptions, ServiceState};

pub struct Harness {
    pub base: String,
    pub state: Arc<ServiceState>,
    pub now: Arc<AtomicU64>,
    _tmp: tempfile::TempDir,
}

impl Harness {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn advance(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }
}

pub fn job(dir: &Path, sources: usize) -> (PathBuf, Vec<PathBuf>, PipelineConfig) {
    let inputs = write_corpus(&dir.join("src"), sources, 5).unwrap();
    let cfg = PipelineConfig::mock();
    let job = dir.join("job");
    run_all(&cfg, &inputs, &job, &RunOptions::default()).unwrap();
    (job, inputs, cfg)
}

pub fn start(opts: ServiceOptions, sources: usize) -> Harness {
    let tmp = tempfile::tempdir().unwrap();
    let (job, inputs, cfg) = job(tmp.path(), sources);
    let now = Arc::new(AtomicU64::new(1_000_000));
    let clock_now = now.clone();
    let roster = cfg.roster.iter().map(|t| t.backend_id.clone()).collect();
    let state = Arc::new(
        ServiceState::from_job(&job, &inputs, roster, opts, Arc::new(move || clock_now.load(Ordering::SeqCst)))
            .unwrap(),
    );
    let app = router(state.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    Harness { base: format!("http://{addr}"), state, now, _tmp: tmp }
}

/// Status and JSON body, treating 4xx/5xx as ordinary responses.
pub fn call(req: ureq::Request, body: Option<serde_json::Value>) -> (u16, serde_json::Value) {
    let resp = match body {
        Some(b) => req.send_json(b),
        None => req.call(),
    };
    let resp = match resp {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => panic!("transport error: {e}"),
    };
    let status = resp.status();
    let text = resp.into_string().unwrap();
    (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text)))
}
