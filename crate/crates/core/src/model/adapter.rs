//! External backends speaking newline-delimited JSON over a child
//! process's stdin/stdout.
//!
//! Each request is one JSON object with a `verb` field
//! (`list_matrices`, `matrix_stats`, `apply_mutation`, `clear_mutation`,
//! `generate`). Each response is one line
//! `{"ok":true,"result":...}` or `{"ok":false,"error":{"kind":..,"message":..}}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Backend, GenParams, MatrixDescriptor, MatrixId, MatrixStats};
use crate::error::{Error, Result};
use crate::mutation::Mutation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "snake_case")]
pub enum AdapterRequest {
    ListMatrices,
    MatrixStats { matrix: MatrixId },
    ApplyMutation { mutation: Mutation },
    ClearMutation,
    Generate { prompt: String, params: GenParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterFault {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<AdapterFault>,
}

impl AdapterResponse {
    fn success(result: Value) -> Self {
        Self {
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    fn failure(kind: &str, message: String) -> Self {
        Self {
            ok: false,
            result: None,
            error: Some(AdapterFault {
                kind: kind.into(),
                message,
            }),
        }
    }
}

fn dispatch<B: Backend + ?Sized>(backend: &mut B, request: AdapterRequest) -> Result<Value> {
    Ok(match request {
        AdapterRequest::ListMatrices => serde_json::to_value(backend.list_matrices()?)?,
        AdapterRequest::MatrixStats { matrix } => serde_json::to_value(backend.matrix_stats(matrix)?)?,
        AdapterRequest::ApplyMutation { mutation } => {
            backend.apply_mutation(&mutation)?;
            Value::Null
        }
        AdapterRequest::ClearMutation => {
            backend.clear_mutation()?;
            Value::Null
        }
        AdapterRequest::Generate { prompt, params } => Value::String(backend.generate(&prompt, &params)?),
    })
}

/// Serves `backend` until `input` reaches end of file.
pub fn serve_adapter<B, R, W>(backend: &mut B, input: R, mut output: W) -> Result<()>
where
    B: Backend + ?Sized,
    R: BufRead,
    W: Write,
{
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<AdapterRequest>(&line) {
            Ok(request) => match dispatch(backend, request) {
                Ok(v) => AdapterResponse::success(v),
                Err(e) => AdapterResponse::failure(e.kind(), e.to_string()),
            },
            Err(e) => AdapterResponse::failure("protocol", format!("bad request: {e}")),
        };
        serde_json::to_writer(&mut output, &response)?;
        output
            .write_all(b"\n")
            .and_then(|_| output.flush())
            .map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

/// Client side of the adapter protocol, driving a spawned child process.
pub struct AdapterBackend {
    command: Vec<String>,
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl std::fmt::Debug for AdapterBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdapterBackend").field("command", &self.command).finish()
    }
}

impl AdapterBackend {
    pub fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("adapter command is empty".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io(program, e))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("stdout piped"));
        Ok(Self {
            command: command.to_vec(),
            child,
            stdin,
            stdout,
        })
    }

    fn call<T: DeserializeOwned>(&mut self, request: &AdapterRequest) -> Result<T> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Adapter("adapter stdin closed".into()))?;
        let mut line = serde_json::to_string(request)?;
        line.push('\n');
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Adapter(format!("write failed: {e}")))?;

        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| Error::Adapter(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(Error::Adapter("adapter closed its output".into()));
        }
        let response: AdapterResponse = serde_json::from_str(&reply)
            .map_err(|e| Error::Adapter(format!("malformed response: {e}")))?;
        match (response.ok, response.result, response.error) {
            (true, result, _) => serde_json::from_value(result.unwrap_or(Value::Null))
                .map_err(|e| Error::Adapter(format!("unexpected result shape: {e}"))),
            (false, _, Some(fault)) => Err(match fault.kind.as_str() {
                "addressing" => Error::Addressing(fault.message),
                "state" => Error::State(fault.message),
                "input" => Error::Input(fault.message),
                _ => Error::Adapter(format!("{}: {}", fault.kind, fault.message)),
            }),
            (false, _, None) => Err(Error::Adapter("failure without error body".into())),
        }
    }
}

impl Drop for AdapterBackend {
    fn drop(&mut self) {
        self.stdin.take();
        let _ = self.child.wait();
    }
}

impl Backend for AdapterBackend {
    fn list_matrices(&mut self) -> Result<Vec<MatrixDescriptor>> {
        self.call(&AdapterRequest::ListMatrices)
    }

    fn matrix_stats(&mut self, id: MatrixId) -> Result<MatrixStats> {
        self.call(&AdapterRequest::MatrixStats { matrix: id })
    }

    fn apply_mutation(&mut self, mutation: &Mutation) -> Result<()> {
        self.call::<Value>(&AdapterRequest::ApplyMutation {
            mutation: *mutation,
        })
        .map(drop)
    }

    fn clear_mutation(&mut self) -> Result<()> {
        self.call::<Value>(&AdapterRequest::ClearMutation).map(drop)
    }

    fn generate(&mut self, prompt: &str, params: &GenParams) -> Result<String> {
        self.call(&AdapterRequest::Generate {
            prompt: prompt.to_string(),
            params: *params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatrixKind, ToyModel, ToyModelConfig};

    fn serve(lines: &str) -> Vec<AdapterResponse> {
        let mut model = ToyModel::new(ToyModelConfig::default()).unwrap();
        let mut out = Vec::new();
        serve_adapter(&mut model, lines.as_bytes(), &mut out).unwrap();
        String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }

    #[test]
    fn request_wire_format() {
        let req = AdapterRequest::MatrixStats {
            matrix: MatrixId::new(1, MatrixKind::Gate),
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"verb":"matrix_stats","matrix":{"layer":1,"kind":"Gate"}}"#
        );
        assert_eq!(
            serde_json::to_string(&AdapterRequest::ClearMutation).unwrap(),
            r#"{"verb":"clear_mutation"}"#
        );
    }

    #[test]
    fn server_answers_each_line() {
        let replies = serve(
            "{\"verb\":\"list_matrices\"}\n\
             {\"verb\":\"matrix_stats\",\"matrix\":{\"layer\":9,\"kind\":\"K\"}}\n\
             not json\n",
        );
        assert_eq!(replies.len(), 3);
        assert!(replies[0].ok);
        assert_eq!(replies[0].result.as_ref().unwrap().as_array().unwrap().len(), 14);
        assert_eq!(replies[1].error.as_ref().unwrap().kind, "addressing");
        assert_eq!(replies[2].error.as_ref().unwrap().kind, "protocol");
    }

    #[test]
    fn empty_command_rejected() {
        assert!(matches!(AdapterBackend::spawn(&[]), Err(Error::Config(_))));
    }
}
