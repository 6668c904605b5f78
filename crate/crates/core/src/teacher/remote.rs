//! HTTP client for a completion-style teacher.
//!
//! Wire format: `POST {endpoint}/score` with
//! `{"prompt": ..., "min_score": 1, "max_score": 6}`, answered by
//! `{"completion": ...}`. Prompt rendering and completion parsing stay on
//! this side.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::{parse_score, render_prompt};
use super::TeacherError;
use crate::corpus::ScoreLabel;
use crate::{Error, Result};

pub const ENDPOINT_ENV: &str = "CYBORG_TEACHER_ENDPOINT";
pub const TOKEN_ENV: &str = "CYBORG_TEACHER_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteScorerConfig {
    /// Base address, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub timeout_secs: f64,
    pub max_concurrency: usize,
    /// Extra attempts after the first one.
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_ms: u64,
    pub rubric: String,
    pub min_score: u8,
    pub max_score: u8,
    /// Sent as a bearer token. Never serialized.
    #[serde(skip)]
    pub token: Option<String>,
}

impl Default for RemoteScorerConfig {
    fn default() -> Self {
        RemoteScorerConfig {
            endpoint: "http://127.0.0.1:8080".into(),
            timeout_secs: 60.0,
            max_concurrency: 4,
            retries: 3,
            backoff_ms: 500,
            rubric: String::new(),
            min_score: ScoreLabel::MIN,
            max_score: ScoreLabel::MAX,
            token: None,
        }
    }
}

impl RemoteScorerConfig {
    /// Apply `CYBORG_TEACHER_ENDPOINT` / `CYBORG_TEACHER_TOKEN` if set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(e) = std::env::var(ENDPOINT_ENV) {
            if !e.trim().is_empty() {
                self.endpoint = e.trim().to_string();
            }
        }
        if let Ok(t) = std::env::var(TOKEN_ENV) {
            if !t.trim().is_empty() {
                self.token = Some(t.trim().to_string());
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_concurrency == 0 {
            return Err(Error::Config("max_concurrency must be at least 1".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::Config("timeout_secs must be positive".into()));
        }
        if self.rubric.trim().is_empty() {
            return Err(Error::Config("remote teacher needs rubric text".into()));
        }
        if self.min_score < ScoreLabel::MIN || self.max_score > ScoreLabel::MAX || self.min_score >= self.max_score {
            return Err(Error::Config(format!("bad score range {}..={}", self.min_score, self.max_score)));
        }
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(Error::Config(format!("endpoint `{}` is not an http(s) address", self.endpoint)));
        }
        Ok(())
    }

    fn url(&self) -> String {
        format!("{}/score", self.endpoint.trim_end_matches('/'))
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    prompt: &'a str,
    min_score: u8,
    max_score: u8,
}

#[derive(Deserialize)]
struct ScoreResponse {
    completion: String,
}

enum Attempt {
    Done(Result<ScoreLabel, TeacherError>),
    Retry(TeacherError),
}

fn attempt(agent: &ureq::Agent, cfg: &RemoteScorerConfig, url: &str, prompt: &str) -> Attempt {
    let mut req = agent.post(url);
    if let Some(t) = &cfg.token {
        req = req.set("Authorization", &format!("Bearer {t}"));
    }
    let body = ScoreRequest {
        prompt,
        min_score: cfg.min_score,
        max_score: cfg.max_score,
    };
    match req.send_json(&body) {
        Ok(resp) => match resp.into_json::<ScoreResponse>() {
            Ok(r) => Attempt::Done(parse_score(&r.completion, cfg.min_score, cfg.max_score).map_err(TeacherError::from)),
            Err(e) => Attempt::Retry(TeacherError::Response(e.to_string())),
        },
        Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => Attempt::Retry(TeacherError::Status(code)),
        Err(ureq::Error::Status(code, _)) => Attempt::Done(Err(TeacherError::Status(code))),
        Err(ureq::Error::Transport(t)) => Attempt::Retry(TeacherError::Transport(t.to_string())),
    }
}

fn score_one(agent: &ureq::Agent, cfg: &RemoteScorerConfig, url: &str, prompt: &str) -> Result<ScoreLabel, TeacherError> {
    let mut last = TeacherError::Transport("no attempt made".into());
    for k in 0..=cfg.retries {
        if k > 0 {
            let delay = cfg.backoff_ms.saturating_mul(1u64 << (k - 1).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        match attempt(agent, cfg, url, prompt) {
            Attempt::Done(r) => return r,
            Attempt::Retry(e) => last = e,
        }
    }
    Err(last)
}

/// Score each essay text through the endpoint. Outcomes are returned in input
/// order; failures (after retries) are reported per essay.
pub fn score_remote(config: &RemoteScorerConfig, essays: &[&str]) -> Result<Vec<Result<ScoreLabel, TeacherError>>> {
    config.validate()?;
    let prompts = essays
        .iter()
        .map(|e| render_prompt(e, &config.rubric, config.min_score, config.max_score))
        .collect::<Result<Vec<_>>>()?;
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs_f64(config.timeout_secs))
        .build();
    let url = config.url();
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ScoreLabel, TeacherError>>>> = prompts.iter().map(|_| Mutex::new(None)).collect();
    let workers = config.max_concurrency.min(prompts.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= prompts.len() {
                    break;
                }
                let r = score_one(&agent, config, &url, &prompts[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::prompt::ParseError;
    use std::sync::Arc;
    use tiny_http::{Response, Server};

    /// Serve exactly `n` requests, answering each via `reply(k, body)` with
    /// `(status, completion)`.
    fn stub(n: usize, reply: impl Fn(usize, &str) -> (u16, String) + Send + 'static) -> (String, std::thread::JoinHandle<()>) {
        let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let handle = std::thread::spawn(move || {
            for k in 0..n {
                let mut req = server.recv().unwrap();
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                assert_eq!(req.url(), "/score");
                let (status, completion) = reply(k, &body);
                let json = serde_json::json!({ "completion": completion }).to_string();
                req.respond(Response::from_string(json).with_status_code(status)).unwrap();
            }
        });
        (format!("http://127.0.0.1:{port}"), handle)
    }

    fn config(endpoint: String) -> RemoteScorerConfig {
        RemoteScorerConfig {
            endpoint,
            timeout_secs: 5.0,
            max_concurrency: 3,
            retries: 3,
            backoff_ms: 1,
            rubric: "Score the essay.".into(),
            ..RemoteScorerConfig::default()
        }
    }

    #[test]
    fn echo_stub_scores_everything() {
        let (url, h) = stub(5, |_, body| {
            let v: serde_json::Value = serde_json::from_str(body).unwrap();
            assert!(v["prompt"].as_str().unwrap().ends_with("- Score:"));
            assert_eq!(v["min_score"], 1);
            assert_eq!(v["max_score"], 6);
            (200, "- Score: 3".into())
        });
        let out = score_remote(&config(url), &["a", "b", "c", "d", "e"]).unwrap();
        h.join().unwrap();
        assert!(out.iter().all(|r| r.as_ref().unwrap().get() == 3));
    }

    #[test]
    fn retries_after_failures() {
        let (url, h) = stub(3, |k, _| if k < 2 { (503, String::new()) } else { (200, "- Score: 5".into()) });
        let out = score_remote(&config(url), &["only"]).unwrap();
        h.join().unwrap();
        assert_eq!(out[0].as_ref().unwrap().get(), 5);
    }

    #[test]
    fn gives_up_after_retry_budget() {
        let (url, h) = stub(2, |_, _| (500, String::new()));
        let cfg = RemoteScorerConfig {
            retries: 1,
            ..config(url)
        };
        let out = score_remote(&cfg, &["only"]).unwrap();
        h.join().unwrap();
        assert_eq!(out[0], Err(TeacherError::Status(500)));
    }

    #[test]
    fn range_error_is_per_essay_and_order_kept() {
        let (url, h) = stub(6, |_, body| {
            let v: serde_json::Value = serde_json::from_str(body).unwrap();
            let prompt = v["prompt"].as_str().unwrap();
            let k = (1..=6).find(|k| prompt.contains(&format!("essay number {k}."))).unwrap();
            if k == 4 {
                (200, "- Score: 0".into())
            } else {
                (200, format!("- Score: {}", (k % 6) + 1))
            }
        });
        let texts: Vec<String> = (1..=6).map(|k| format!("essay number {k}.")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let out = score_remote(&config(url), &refs).unwrap();
        h.join().unwrap();
        for (k, r) in (1..=6).zip(&out) {
            if k == 4 {
                assert_eq!(r, &Err(TeacherError::Parse(ParseError::OutOfRange(0, 1, 6))));
            } else {
                assert_eq!(r.as_ref().unwrap().get() as usize, (k % 6) + 1);
            }
        }
    }

    #[test]
    fn unreachable_endpoint_fails_per_essay() {
        let cfg = RemoteScorerConfig {
            retries: 1,
            timeout_secs: 0.5,
            ..config("http://127.0.0.1:9".into())
        };
        let out = score_remote(&cfg, &["x", "y"]).unwrap();
        assert!(out.iter().all(|r| matches!(r, Err(TeacherError::Transport(_)))));
    }

    #[test]
    fn config_checks() {
        assert!(config("http://h".into()).validate().is_ok());
        assert!(RemoteScorerConfig { max_concurrency: 0, ..config("http://h".into()) }.validate().is_err());
        assert!(RemoteScorerConfig { rubric: "".into(), ..config("http://h".into()) }.validate().is_err());
        assert!(config("ftp://h".into()).validate().is_err());
    }
}
