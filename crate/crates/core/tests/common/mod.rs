//! Helpers shared by the integration tests: direct-formula oracles and a
//! scripted HTTP server.
#![allow(dead_code)]

pub mod checks;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use num_complex::Complex64;

/// Textbook statistics from raw power sums, written independently of the
/// library's two-pass code.
#[derive(Debug, Clone)]
pub struct NaiveStats {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub moments: [f64; 8],
    pub kstats: [f64; 4],
    pub kstatvars: [f64; 2],
}

pub fn naive_stats(x: &[f64]) -> NaiveStats {
    let n = x.len();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let mut moments = [0.0; 8];
    for (k, m) in moments.iter_mut().enumerate() {
        *m = x.iter().map(|v| (v - mean).powi(k as i32)).sum::<f64>() / nf;
    }
    moments[0] = 1.0;
    let m2 = moments[2];
    // Raw power sums, deliberately not mean-centred.
    let s = |p: i32| x.iter().map(|v| v.powi(p)).sum::<f64>();
    let (s1, s2, s3, s4) = (s(1), s(2), s(3), s(4));
    let k1 = s1 / nf;
    let k2 = (nf * s2 - s1 * s1) / (nf * (nf - 1.0));
    let k3 = (2.0 * s1.powi(3) - 3.0 * nf * s1 * s2 + nf * nf * s3) / (nf * (nf - 1.0) * (nf - 2.0));
    let k4 = (-6.0 * s1.powi(4) + 12.0 * nf * s1 * s1 * s2 - 3.0 * nf * (nf - 1.0) * s2 * s2
        - 4.0 * nf * (nf + 1.0) * s1 * s3
        + nf * nf * (nf + 1.0) * s4)
        / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    NaiveStats {
        n,
        min: x.iter().cloned().fold(f64::INFINITY, f64::min),
        max: x.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean,
        variance: m2 * nf / (nf - 1.0),
        skewness: moments[3] / m2.powf(1.5),
        kurtosis: moments[4] / (m2 * m2) - 3.0,
        moments,
        kstats: [k1, k2, k3, k4],
        kstatvars: [k2 / nf, (2.0 * nf * k2 * k2 + (nf - 1.0) * k4) / (nf * (nf + 1.0))],
    }
}

/// `|a - b| <= rel * max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

/// Mixed moment over equiprobable points: mean of x^(p-q) conj(x)^q.
pub fn point_moment(points: &[Complex64], p: u32, q: u32) -> Complex64 {
    let sum: Complex64 = points
        .iter()
        .map(|x| x.powu(p - q) * x.conj().powu(q))
        .sum();
    sum / points.len() as f64
}

/// Fourth-order cumulants of an equiprobable constellation.
pub fn point_c4(points: &[Complex64]) -> (Complex64, Complex64, Complex64) {
    let m = |p, q| point_moment(points, p, q);
    let (m20, m21) = (m(2, 0), m(2, 1));
    let c40 = m(4, 0) - 3.0 * m20 * m20;
    let c41 = m(4, 1) - 3.0 * m20 * m21;
    let c42 = m(4, 2) - m20.norm_sqr() - 2.0 * m21 * m21;
    (c40, c41, c42)
}

/// One request as seen by [`MockServer`].
#[derive(Debug, Clone)]
pub struct SeenRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl SeenRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Canned {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Canned {
    pub fn ok_content(content: &str) -> Self {
        let body = serde_json::json!({
            "id": "x",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
        });
        Self {
            status: 200,
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: body.to_string(),
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            headers: vec![],
            body: format!("{{\"error\":\"status {status}\"}}"),
        }
    }
}

/// Serves canned responses in order, then repeats `fallback` (or the last
/// canned response). Records every request.
pub struct MockServer {
    pub url: String,
    pub seen: Arc<Mutex<Vec<SeenRequest>>>,
    _handle: JoinHandle<()>,
}

type Responder = dyn Fn(&SeenRequest, usize) -> Canned + Send + Sync;

impl MockServer {
    pub fn scripted(script: Vec<Canned>) -> Self {
        let script = Arc::new(script);
        Self::with(move |_, i| script[i.min(script.len() - 1)].clone())
    }

    pub fn with(responder: impl Fn(&SeenRequest, usize) -> Canned + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let seen2 = Arc::clone(&seen);
        let responder: Arc<Responder> = Arc::new(responder);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let seen = Arc::clone(&seen2);
                let responder = Arc::clone(&responder);
                std::thread::spawn(move || serve(stream, &seen, responder.as_ref()));
            }
        });
        Self {
            url: format!("http://{addr}/v1/chat/completions"),
            seen,
            _handle: handle,
        }
    }

    pub fn requests(&self) -> Vec<SeenRequest> {
        self.seen.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, seen: &Mutex<Vec<SeenRequest>>, responder: &Responder) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut headers = Vec::new();
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap_or(0) == 0 {
            return;
        }
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let len: usize = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0u8; len];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let req = SeenRequest {
        method,
        path,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    let index = {
        let mut s = seen.lock().unwrap();
        s.push(req.clone());
        s.len() - 1
    };
    let canned = responder(&req, index);
    let mut out = stream;
    let mut resp = format!(
        "HTTP/1.1 {} X\r\nContent-Length: {}\r\nConnection: close\r\n",
        canned.status,
        canned.body.len()
    );
    for (k, v) in &canned.headers {
        resp.push_str(&format!("{k}: {v}\r\n"));
    }
    resp.push_str("\r\n");
    resp.push_str(&canned.body);
    let _ = out.write_all(resp.as_bytes());
    let _ = out.flush();
}

/// The fixed-seed mini protocol behind the golden prompt files.
pub fn mini_protocol() -> amc_core::modgen::DatasetProtocol {
    amc_core::modgen::DatasetProtocol {
        test_count: 10,
        exemplars_per_class: 1,
        master_seed: 7,
        ..Default::default()
    }
}

/// Renders the prompt for test record 0 of [`mini_protocol`].
pub fn mini_prompt(mode: amc_core::promptkit::PromptMode) -> String {
    use amc_core::cli::pipeline::{exemplars_of, summarize_records};
    use amc_core::modgen::{make_dataset, Split};
    use amc_core::promptkit::{build_prompt, PromptConfig};

    let records = make_dataset(&mini_protocol()).unwrap();
    let summaries = summarize_records(&records, &Default::default()).unwrap();
    let exemplars = exemplars_of(&records, &summaries);
    let pos = records.iter().position(|r| r.split == Split::Test && r.index == 0).unwrap();
    build_prompt(&summaries[pos], &exemplars, mode, &PromptConfig::default())
        .unwrap()
        .render()
}

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares `actual` with a checked-in file; with `AMC_BLESS=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var("AMC_BLESS").is_ok_and(|v| v == "1") {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .map_or_else(|| "length".to_string(), |i| format!("line {}", i + 1));
        Err(format!("{name} differs from golden file at {line}"))
    }
}

/// Runs the `amc` binary and returns (exit code, stdout, stderr).
pub fn run_amc(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_amc"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("amc binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Frozen noiseless baseline result: 1400 of 2000 correct.
pub const FROZEN_BASELINE_CORRECT: u64 = 1400;
pub const FROZEN_BASELINE_REPORT: &str = "baseline_noiseless.report.json";

/// `run-eval` with the baseline backend on the default protocol in `dir`.
pub fn baseline_run(dir: &std::path::Path, noisy: bool) -> (i32, std::path::PathBuf) {
    let mut args = vec![
        "run-eval",
        "--backend",
        "baseline",
        "--mode",
        "icst",
        "--run-id",
        "frozen",
        "--fresh",
        "--output-dir",
        dir.to_str().unwrap(),
    ];
    if noisy {
        args.extend(["--snr", "noisy"]);
    }
    let (code, _, stderr) = run_amc(&args);
    assert!(code == 0 || code == 2, "run-eval failed: {stderr}");
    (code, dir.join("run-frozen.report.json"))
}
