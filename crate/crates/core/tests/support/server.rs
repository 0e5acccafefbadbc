//! Minimal HTTP/1.1 fixture server that records every request.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

#[derive(Clone)]
pub struct Route {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
    /// Serve 503 for this many requests before the real response.
    pub fail_first: usize,
    pub delay: Duration,
}

impl Route {
    pub fn ok(content_type: &'static str, body: impl Into<Vec<u8>>) -> Self {
        Route {
            status: 200,
            content_type,
            body: body.into(),
            fail_first: 0,
            delay: Duration::ZERO,
        }
    }
}

#[derive(Default)]
struct State {
    routes: HashMap<String, Route>,
    served: HashMap<String, usize>,
    hits: Vec<(String, Instant, Option<String>)>,
}

pub struct FixtureServer {
    pub base: String,
    state: Arc<Mutex<State>>,
}

impl FixtureServer {
    pub fn start(routes: Vec<(&str, Route)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let state = Arc::new(Mutex::new(State {
            routes: routes.into_iter().map(|(p, r)| (p.to_string(), r)).collect(),
            ..Default::default()
        }));
        let shared = state.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let st = shared.clone();
                std::thread::spawn(move || handle(stream, st));
            }
        });
        FixtureServer { base, state }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub fn hit_count(&self) -> usize {
        self.state.lock().unwrap().hits.len()
    }

    pub fn hit_times(&self) -> Vec<Instant> {
        self.state.lock().unwrap().hits.iter().map(|h| h.1).collect()
    }

    pub fn user_agents(&self) -> Vec<Option<String>> {
        self.state.lock().unwrap().hits.iter().map(|h| h.2.clone()).collect()
    }
}

fn handle(stream: TcpStream, state: Arc<Mutex<State>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let mut user_agent = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("user-agent") {
                user_agent = Some(v.trim().to_string());
            }
        }
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let route = {
        let mut st = state.lock().unwrap();
        st.hits.push((path.clone(), Instant::now(), user_agent));
        let route = st.routes.get(&path).cloned();
        let served = st.served.entry(path.clone()).or_insert(0);
        *served += 1;
        let n = *served;
        route.map(|r| {
            if n <= r.fail_first {
                Route { status: 503, content_type: "text/plain", body: b"busy".to_vec(), ..r }
            } else {
                r
            }
        })
    };
    let route = route.unwrap_or(Route {
        status: 404,
        content_type: "text/html",
        body: b"<html>not found</html>".to_vec(),
        fail_first: 0,
        delay: Duration::ZERO,
    });
    std::thread::sleep(route.delay);
    let mut out = stream;
    let head = format!(
        "HTTP/1.1 {} X\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        route.status,
        route.content_type,
        route.body.len()
    );
    let _ = out.write_all(head.as_bytes());
    let _ = out.write_all(&route.body);
    let _ = out.flush();
}
