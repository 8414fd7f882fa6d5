//! Local HTTP service for a [`FixtureNetwork`].
//!
//! Routes:
//!
//! | method | path                              | notes                              |
//! |--------|-----------------------------------|------------------------------------|
//! | POST   | `/login`                          | form `login=..&secret=..` → `{"token": ..}` |
//! | POST   | `/logout`                         | ends the bearer's session          |
//! | GET    | `/profile/{id}/about`             | needs `Authorization: Bearer`      |
//! | GET    | `/profile/{id}/friends?page=k`    | needs a session                    |
//! | GET    | `/profile/{id}/timeline?page=k`   | needs a session                    |
//! | GET    | `/truth/{id}`                     | ground-truth JSON, unless disabled |
//!
//! The network is immutable once served; the session table is the only
//! shared mutable state.

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;
use tiny_http::{Header, Method, Request, Response, Server};
use url::Url;

use super::render::{self, PageKind, PageSizes};
use super::FixtureNetwork;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {reason}")]
    BindFailure { addr: String, reason: String },
}

/// Deterministic faults for exercising the crawler's error handling.
#[derive(Clone, Debug, Default)]
pub struct FaultPlan {
    /// About pages served cut in half on their first request only.
    pub truncate_about_once: HashSet<String>,
    /// About requests answered `503` this many times before succeeding.
    pub fail_about_times: HashMap<String, u32>,
    /// After this many authenticated profile requests all sessions expire.
    pub expire_sessions_after: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct ServerOptions {
    pub page_sizes: PageSizes,
    pub truth_enabled: bool,
    pub workers: usize,
    pub faults: FaultPlan,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            page_sizes: PageSizes::default(),
            truth_enabled: true,
            workers: 8,
            faults: FaultPlan::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SessionCounters {
    pub logins: u64,
    pub failed_logins: u64,
    pub logouts: u64,
    pub active: usize,
}

struct State {
    network: Arc<FixtureNetwork>,
    options: ServerOptions,
    /// login name → (secret, profile id)
    accounts: HashMap<String, (String, String)>,
    sessions: Mutex<HashMap<String, String>>,
    session_counters: Mutex<SessionCounters>,
    faults: Mutex<FaultPlan>,
    served: Mutex<HashMap<(String, PageKind), u64>>,
    authed_requests: AtomicU64,
    token_seq: AtomicU64,
}

/// Listener whose accepted sockets inherit `TCP_NODELAY`.
fn nodelay_listener(bind: &str) -> std::io::Result<std::net::TcpListener> {
    use socket2::{Domain, Socket, Type};
    let addr = std::net::ToSocketAddrs::to_socket_addrs(bind)?
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "no address"))?;
    let socket = Socket::new(Domain::for_address(addr), Type::STREAM, None)?;
    socket.set_reuse_address(true)?;
    socket.set_nodelay(true)?;
    socket.bind(&addr.into())?;
    socket.listen(1024)?;
    Ok(socket.into())
}

pub struct FixtureServer {
    state: Arc<State>,
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
}

impl FixtureServer {
    /// Starts serving `network` on `bind` (`host:port`, port 0 for any).
    pub fn serve(
        network: Arc<FixtureNetwork>,
        bind: &str,
        options: ServerOptions,
    ) -> Result<Self, ServeError> {
        let bind_failure = |reason: String| ServeError::BindFailure {
            addr: bind.to_string(),
            reason,
        };
        let listener = nodelay_listener(bind).map_err(|e| bind_failure(e.to_string()))?;
        let server = Server::from_listener(listener, None).map_err(|e| bind_failure(e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| ServeError::BindFailure {
                addr: bind.to_string(),
                reason: "not an IP listener".into(),
            })?;
        let accounts = network
            .accounts
            .iter()
            .map(|a| (a.login.clone(), (a.secret.clone(), a.profile_id.clone())))
            .collect();
        let state = Arc::new(State {
            network,
            faults: Mutex::new(options.faults.clone()),
            options,
            accounts,
            sessions: Mutex::new(HashMap::new()),
            session_counters: Mutex::new(SessionCounters::default()),
            served: Mutex::new(HashMap::new()),
            authed_requests: AtomicU64::new(0),
            token_seq: AtomicU64::new(0),
        });
        let server = Arc::new(server);
        let workers = (0..state.options.workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let state = Arc::clone(&state);
                std::thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        handle(&state, request);
                    }
                })
            })
            .collect();
        log::info!("fixture server listening on {addr}");
        Ok(FixtureServer {
            state,
            server,
            workers,
            addr,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> Url {
        Url::parse(&format!("http://{}", self.addr)).expect("socket address forms a URL")
    }

    pub fn network(&self) -> &FixtureNetwork {
        &self.state.network
    }

    /// Successful responses served for one profile page kind.
    pub fn served_count(&self, profile_id: &str, kind: PageKind) -> u64 {
        self.state
            .served
            .lock()
            .expect("served lock")
            .get(&(profile_id.to_string(), kind))
            .copied()
            .unwrap_or(0)
    }

    pub fn total_served(&self, kind: PageKind) -> u64 {
        self.state
            .served
            .lock()
            .expect("served lock")
            .iter()
            .filter(|((_, k), _)| *k == kind)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn reset_counters(&self) {
        self.state.served.lock().expect("served lock").clear();
        self.state.authed_requests.store(0, Ordering::SeqCst);
    }

    pub fn session_counters(&self) -> SessionCounters {
        let mut c = self.state.session_counters.lock().expect("counter lock").clone();
        c.active = self.state.sessions.lock().expect("session lock").len();
        c
    }

    pub fn revoke_all_sessions(&self) {
        self.state.sessions.lock().expect("session lock").clear();
    }

    pub fn set_faults(&self, faults: FaultPlan) {
        *self.state.faults.lock().expect("fault lock") = faults;
        self.state.authed_requests.store(0, Ordering::SeqCst);
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn header(name: &str, value: &str) -> Header {
    Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("static header")
}

fn html(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body)
        .with_status_code(status)
        .with_header(header("Content-Type", "text/html; charset=utf-8"))
}

fn json(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body)
        .with_status_code(status)
        .with_header(header("Content-Type", "application/json"))
}

fn bearer(request: &Request) -> Option<String> {
    request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Authorization"))
        .and_then(|h| h.value.as_str().strip_prefix("Bearer ").map(str::to_string))
}

fn handle(state: &State, mut request: Request) {
    let url = request.url().to_string();
    let (path, query) = url.split_once('?').unwrap_or((url.as_str(), ""));
    let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    let method = request.method().clone();
    let response = match (method, segments.as_slice()) {
        (Method::Post, ["login"]) => {
            let mut body = String::new();
            let _ = request.as_reader().read_to_string(&mut body);
            login(state, &body)
        }
        (Method::Post, ["logout"]) => logout(state, bearer(&request)),
        (Method::Get, ["truth", id]) => truth(state, id),
        (Method::Get, ["profile", id, kind]) => {
            let kind = match *kind {
                "about" => Some(PageKind::About),
                "friends" => Some(PageKind::Friends),
                "timeline" => Some(PageKind::Timeline),
                _ => None,
            };
            match kind {
                Some(kind) => profile_page(state, bearer(&request), id, kind, query),
                None => html(404, "not found".into()),
            }
        }
        _ => html(404, "not found".into()),
    };
    let _ = request.respond(response);
}

fn login(state: &State, body: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    let form: HashMap<String, String> = url::form_urlencoded::parse(body.as_bytes())
        .into_owned()
        .collect();
    let ok = match (form.get("login"), form.get("secret")) {
        (Some(login), Some(secret)) => state
            .accounts
            .get(login)
            .filter(|(expected, _)| expected == secret)
            .map(|(_, profile_id)| profile_id.clone()),
        _ => None,
    };
    let mut counters = state.session_counters.lock().expect("counter lock");
    match ok {
        Some(profile_id) => {
            counters.logins += 1;
            let seq = state.token_seq.fetch_add(1, Ordering::SeqCst);
            let token = format!("{seq:08x}{:016x}", rand::thread_rng().gen::<u64>());
            state
                .sessions
                .lock()
                .expect("session lock")
                .insert(token.clone(), profile_id);
            json(200, serde_json::json!({ "token": token }).to_string())
        }
        None => {
            counters.failed_logins += 1;
            json(401, r#"{"error":"bad credentials"}"#.into())
        }
    }
}

fn logout(state: &State, token: Option<String>) -> Response<std::io::Cursor<Vec<u8>>> {
    let removed = token
        .map(|t| state.sessions.lock().expect("session lock").remove(&t).is_some())
        .unwrap_or(false);
    // Logging out of an already expired session still closes the bracket.
    state.session_counters.lock().expect("counter lock").logouts += 1;
    json(if removed { 200 } else { 401 }, "{}".into())
}

fn truth(state: &State, id: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    if !state.options.truth_enabled {
        return html(404, "not found".into());
    }
    match state.network.profile(id) {
        Ok(p) => json(200, serde_json::to_string(p).expect("profile serializes")),
        Err(_) => html(404, "unknown profile".into()),
    }
}

fn page_param(query: &str) -> Option<usize> {
    if query.is_empty() {
        return Some(1);
    }
    url::form_urlencoded::parse(query.as_bytes())
        .find(|(k, _)| k == "page")
        .map(|(_, v)| v.parse().ok())
        .unwrap_or(Some(1))
}

fn profile_page(
    state: &State,
    token: Option<String>,
    id: &str,
    kind: PageKind,
    query: &str,
) -> Response<std::io::Cursor<Vec<u8>>> {
    let authorized = token
        .map(|t| state.sessions.lock().expect("session lock").contains_key(&t))
        .unwrap_or(false);
    if !authorized {
        return html(401, render::login_wall());
    }
    let limit = state.faults.lock().expect("fault lock").expire_sessions_after;
    let served_so_far = state.authed_requests.fetch_add(1, Ordering::SeqCst);
    if matches!(limit, Some(n) if served_so_far >= n) {
        state.sessions.lock().expect("session lock").clear();
        return html(401, render::login_wall());
    }
    let network = &state.network;
    if network.index_of(id).is_err() {
        return html(404, "unknown profile".into());
    }
    let Some(page_no) = page_param(query) else {
        return html(400, "bad page".into());
    };
    let sizes = state.options.page_sizes;
    let page = match kind {
        PageKind::About => {
            let mut faults = state.faults.lock().expect("fault lock");
            if let Some(n) = faults.fail_about_times.get_mut(id).filter(|n| **n > 0) {
                *n -= 1;
                return html(503, "temporarily unavailable".into());
            }
            let truncate = faults.truncate_about_once.remove(id);
            drop(faults);
            render::about_page(network, id).ok().map(|html| {
                if truncate {
                    render::truncate_page(&html)
                } else {
                    html
                }
            })
        }
        PageKind::Friends => render::friends_page(network, id, page_no, sizes.friends)
            .ok()
            .flatten(),
        PageKind::Timeline => render::timeline_page(network, id, page_no, sizes.timeline)
            .ok()
            .flatten(),
    };
    match page {
        Some(body) => {
            *state
                .served
                .lock()
                .expect("served lock")
                .entry((id.to_string(), kind))
                .or_insert(0) += 1;
            html(200, body)
        }
        None => html(404, "no such page".into()),
    }
}
