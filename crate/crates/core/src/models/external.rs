use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use super::{ModelError, SteeringModel};
use crate::dataset::FrameRecord;

struct Session {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Black-box model in a child process, driven over stdin/stdout:
///
/// ```text
/// > PREDICT /abs/path/frame.png      < 12.5
/// > RESET                            < OK
/// ```
///
/// The command runs under `sh -c`. It is started on first use and restarted
/// after a failure. Frames without a source file are written to a private
/// temporary directory as PNG first.
pub struct ExternalModel {
    id: String,
    command: String,
    session: Option<Session>,
    stderr: File,
    scratch: tempfile::TempDir,
    scratch_seq: u64,
}

impl ExternalModel {
    pub fn new(command: &str) -> Result<Self, ModelError> {
        if command.trim().is_empty() {
            return Err(ModelError::Config("external model command is empty".into()));
        }
        Ok(Self {
            id: format!("external:{command}"),
            command: command.to_string(),
            session: None,
            stderr: tempfile::tempfile()?,
            scratch: tempfile::tempdir()?,
            scratch_seq: 0,
        })
    }

    fn captured_stderr(&mut self) -> String {
        let mut text = String::new();
        if self.stderr.seek(SeekFrom::Start(0)).is_ok() {
            let _ = self.stderr.read_to_string(&mut text);
        }
        let _ = self.stderr.seek(SeekFrom::End(0));
        let trimmed = text.trim_end();
        // keep the tail, where the failure usually is
        let start = trimmed.char_indices().rev().nth(2000).map_or(0, |(i, _)| i);
        trimmed[start..].to_string()
    }

    fn process_error(&mut self, message: impl Into<String>) -> ModelError {
        if let Some(mut s) = self.session.take() {
            let _ = s.child.kill();
            let _ = s.child.wait();
        }
        ModelError::Process {
            command: self.command.clone(),
            message: message.into(),
            stderr: self.captured_stderr(),
        }
    }

    fn session(&mut self) -> Result<&mut Session, ModelError> {
        if self.session.is_none() {
            let spawned = Command::new("sh")
                .arg("-c")
                .arg(&self.command)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(self.stderr.try_clone()?)
                .spawn();
            let mut child = match spawned {
                Ok(c) => c,
                Err(e) => return Err(self.process_error(format!("cannot start: {e}"))),
            };
            let stdin = child.stdin.take().expect("piped");
            let stdout = BufReader::new(child.stdout.take().expect("piped"));
            self.session = Some(Session { child, stdin, stdout });
        }
        Ok(self.session.as_mut().expect("just set"))
    }

    /// Sends one request line and returns the trimmed response line.
    fn exchange(&mut self, request: &str) -> Result<String, ModelError> {
        let session = self.session()?;
        let sent = session.stdin.write_all(request.as_bytes()).and_then(|_| session.stdin.flush());
        if let Err(e) = sent {
            return Err(self.process_error(format!("write failed: {e}")));
        }
        let mut line = String::new();
        match session.stdout.read_line(&mut line) {
            Ok(0) => {
                let status = session.child.wait().map(|s| s.to_string()).unwrap_or_default();
                Err(self.process_error(format!("process exited ({status})")))
            }
            Ok(_) => Ok(line.trim_end_matches(['\r', '\n']).to_string()),
            Err(e) => Err(self.process_error(format!("read failed: {e}"))),
        }
    }

    fn protocol_error(&mut self, line: String) -> ModelError {
        ModelError::Protocol {
            command: self.command.clone(),
            line,
            stderr: self.captured_stderr(),
        }
    }

    /// Returns the path to send and whether it is a scratch file to delete afterwards.
    fn image_path(&mut self, frame: &FrameRecord) -> Result<(PathBuf, bool), ModelError> {
        if let Some(p) = &frame.source_path {
            return Ok((std::path::absolute(p)?, false));
        }
        self.scratch_seq += 1;
        let path = self.scratch.path().join(format!("frame_{}.png", self.scratch_seq));
        frame.image.save_png(&path).map_err(|e| ModelError::Io(std::io::Error::other(e)))?;
        Ok((path, true))
    }
}

impl SteeringModel for ExternalModel {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn predict(&mut self, frame: &FrameRecord) -> Result<f64, ModelError> {
        let (path, scratch) = self.image_path(frame)?;
        let reply = self.exchange(&format!("PREDICT {}\n", path.display()));
        if scratch {
            let _ = std::fs::remove_file(&path);
        }
        let line = reply?;
        match line.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.protocol_error(line)),
        }
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        if self.session.is_none() {
            return Ok(());
        }
        let line = self.exchange("RESET\n")?;
        if line.trim() == "OK" {
            Ok(())
        } else {
            Err(self.protocol_error(line))
        }
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        if let Some(mut s) = self.session.take() {
            drop(s.stdin);
            let _ = s.child.kill();
            let _ = s.child.wait();
        }
    }
}
