//! Loopback chat-completion server for tests and offline demos.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

/// How the mock answers.
#[derive(Debug, Clone, PartialEq)]
pub enum MockBehavior {
    /// the same assistant text every time
    Fixed(String),
    /// replies in order, cycling
    Script(Vec<String>),
    /// `reply` after sleeping `delay`
    Delay { delay: Duration, reply: String },
    /// HTTP `status` for the first `failures` requests, then `reply`
    FailThenOk {
        failures: usize,
        status: u16,
        reply: String,
    },
    /// asks for `propose_avoidance`, then answers with its observation
    ToolFollower,
}

struct Shared {
    behavior: MockBehavior,
    requests: AtomicUsize,
}

/// A running mock server; stops when dropped.
pub struct MockServer {
    server: Arc<Server>,
    shared: Arc<Shared>,
    url: String,
    handle: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for MockServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockServer").field("url", &self.url).finish()
    }
}

impl MockServer {
    /// Binds an ephemeral loopback port.
    pub fn start(behavior: MockBehavior) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", behavior)
    }

    pub fn bind(addr: &str, behavior: MockBehavior) -> std::io::Result<Self> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let server = Arc::new(server);
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| std::io::Error::other("mock server has no IP address"))?;
        let host = addr.rsplit_once(':').map_or("127.0.0.1", |(h, _)| h);
        let url = format!("http://{host}:{port}/v1/chat/completions");
        let shared = Arc::new(Shared {
            behavior,
            requests: AtomicUsize::new(0),
        });
        let handle = {
            let server = Arc::clone(&server);
            let shared = Arc::clone(&shared);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    let shared = Arc::clone(&shared);
                    std::thread::spawn(move || handle(request, &shared));
                }
            })
        };
        Ok(Self {
            server,
            shared,
            url,
            handle: Some(handle),
        })
    }

    /// Chat-completions endpoint URL.
    pub fn url(&self) -> &str {
        &self.url
    }

    /// Requests received so far.
    pub fn requests(&self) -> usize {
        self.shared.requests.load(Ordering::SeqCst)
    }

    /// Serves until the process is killed.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn completion_body(text: &str) -> String {
    json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]
    })
    .to_string()
}

fn last_user_message(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v["messages"]
        .as_array()?
        .iter()
        .rev()
        .find(|m| m["role"] == "user")
        .and_then(|m| m["content"].as_str())
        .map(str::to_string)
}

/// Final answer built from a `propose_avoidance` observation, or the request for one.
pub fn tool_follower_reply(user_message: &str) -> String {
    let mut lines = user_message.lines();
    while let Some(line) = lines.next() {
        if line.starts_with("Action: propose_avoidance(") {
            if let Some(obs) = lines.next().and_then(|l| l.strip_prefix("Observation: ")) {
                return format!("Thought: adopting the proposed maneuver.\nFinal Answer: {obs}");
            }
        }
    }
    "Thought: I need a rule-compliant proposal.\nAction: propose_avoidance({})".to_string()
}

fn handle(mut request: tiny_http::Request, shared: &Shared) {
    let n = shared.requests.fetch_add(1, Ordering::SeqCst);
    let mut body = String::new();
    let _ = request.as_reader().read_to_string(&mut body);

    let (status, text) = match &shared.behavior {
        MockBehavior::Fixed(t) => (200, t.clone()),
        MockBehavior::Script(ts) if ts.is_empty() => (200, String::new()),
        MockBehavior::Script(ts) => (200, ts[n % ts.len()].clone()),
        MockBehavior::Delay { delay, reply } => {
            std::thread::sleep(*delay);
            (200, reply.clone())
        }
        MockBehavior::FailThenOk {
            failures,
            status,
            reply,
        } => {
            if n < *failures {
                (*status, String::new())
            } else {
                (200, reply.clone())
            }
        }
        MockBehavior::ToolFollower => (
            200,
            tool_follower_reply(&last_user_message(&body).unwrap_or_default()),
        ),
    };
    let payload = if status == 200 {
        completion_body(&text)
    } else {
        json!({"error": {"message": "injected failure"}}).to_string()
    };
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let _ = request.respond(
        Response::from_string(payload)
            .with_status_code(status)
            .with_header(header),
    );
}
