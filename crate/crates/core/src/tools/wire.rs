//! Newline-delimited JSON framing for out-of-process tool servers.
//!
//! Each request line is a [`ToolCall`]; each response line the matching
//! [`ToolResult`].

use std::io::{BufRead, BufReader, Read, Write};

use super::{dispatch, FatalKind, Registry, ToolCall, ToolHost, ToolOutcome, ToolResult, ToolStatus};

/// Serves calls from `input` until EOF. Malformed lines get a `BadArgs`
/// result with an empty `call_id`.
pub fn serve<R: Read, W: Write>(registry: &Registry, host: &mut dyn ToolHost, input: R, mut output: W) -> std::io::Result<usize> {
    let mut served = 0;
    for line in BufReader::new(input).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result = match serde_json::from_str::<ToolCall>(&line) {
            Ok(call) => dispatch(registry, host, &call),
            Err(e) => ToolResult {
                call_id: String::new(),
                status: ToolStatus::FatalError(FatalKind::BadArgs),
                observation: format!("malformed request: {e}"),
                payload: serde_json::Value::Null,
            },
        };
        serde_json::to_writer(&mut output, &result)?;
        output.write_all(b"\n")?;
        output.flush()?;
        served += 1;
    }
    Ok(served)
}

/// Host that forwards calls to a remote tool server.
pub struct WireClient<R: BufRead, W: Write> {
    reader: R,
    writer: W,
}

impl<R: BufRead, W: Write> WireClient<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        WireClient { reader, writer }
    }

    pub fn call(&mut self, call: &ToolCall) -> std::io::Result<ToolResult> {
        serde_json::to_writer(&mut self.writer, call)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "tool server closed"));
        }
        let r: ToolResult = serde_json::from_str(&line)?;
        if r.call_id != call.call_id {
            return Err(std::io::Error::other(format!("response for `{}` while waiting on `{}`", r.call_id, call.call_id)));
        }
        Ok(r)
    }
}

impl<R: BufRead, W: Write> ToolHost for WireClient<R, W> {
    fn invoke(&mut self, call: &ToolCall) -> ToolOutcome {
        match self.call(call) {
            Ok(r) => match r.status {
                ToolStatus::Ok => ToolOutcome::Ok { observation: r.observation, payload: r.payload },
                ToolStatus::RetryableError => ToolOutcome::Retryable { feedback: r.observation, payload: r.payload },
                ToolStatus::FatalError(kind) => ToolOutcome::Fatal { kind, message: r.observation },
            },
            Err(e) => ToolOutcome::Fatal { kind: FatalKind::HostError, message: e.to_string() },
        }
    }
}
