//! `send_email` over HTTP for out-of-process agents and tools.
//!
//! `POST /send_email` with a JSON [`SendRequest`]. Success returns the
//! receipt; an active fault returns 503 with `{"error", "retryable": true}`.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Response, Server};

use super::{EnvError, Environment, SendRequest};

pub struct EmailServer {
    server: Arc<Server>,
    addr: SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl EmailServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and serves until
    /// dropped or [`EmailServer::shutdown`] is called.
    pub fn start(env: Arc<Mutex<Environment>>, addr: &str) -> std::io::Result<Self> {
        let server = Arc::new(Server::http(addr).map_err(std::io::Error::other)?);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("not an ip listener"))?;
        let s = Arc::clone(&server);
        let handle = std::thread::spawn(move || {
            for req in s.incoming_requests() {
                handle(&env, req);
            }
        });
        Ok(EmailServer { server, addr, handle: Some(handle) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}/send_email", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Blocks until the server stops.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for EmailServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn json(status: u16, body: serde_json::Value) -> Response<std::io::Cursor<Vec<u8>>> {
    let ct = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_data(body.to_string().into_bytes()).with_status_code(status).with_header(ct)
}

fn handle(env: &Mutex<Environment>, mut req: tiny_http::Request) {
    let resp = if req.method() != &Method::Post || req.url() != "/send_email" {
        json(404, serde_json::json!({"error": "not found"}))
    } else {
        let mut body = String::new();
        match req.as_reader().read_to_string(&mut body) {
            Err(e) => json(400, serde_json::json!({"error": e.to_string()})),
            Ok(_) => match serde_json::from_str::<SendRequest>(&body) {
                Err(e) => json(400, serde_json::json!({"error": e.to_string()})),
                Ok(r) => {
                    let mut env = env.lock().unwrap_or_else(|p| p.into_inner());
                    match env.send_email(&r) {
                        Ok(receipt) => json(200, serde_json::to_value(receipt).unwrap_or_default()),
                        Err(e @ EnvError::Fault(_)) => {
                            json(503, serde_json::json!({"error": e.to_string(), "retryable": true}))
                        }
                        Err(e) => json(400, serde_json::json!({"error": e.to_string(), "retryable": false})),
                    }
                }
            },
        }
    };
    let _ = req.respond(resp);
}
