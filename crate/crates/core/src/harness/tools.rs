//! External tool discovery and subprocess plumbing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment override for the ffmpeg binary.
pub const FFMPEG_ENV: &str = "RDBENCH_FFMPEG";

/// A resolved ffmpeg binary and the first line of its `-version` output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toolchain {
    pub ffmpeg: PathBuf,
    pub version: String,
}

impl Toolchain {
    /// Resolution order: `explicit`, then `$RDBENCH_FFMPEG`, then `PATH`.
    pub fn discover(explicit: Option<&Path>) -> Result<Self> {
        let ffmpeg = match explicit {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(FFMPEG_ENV) {
                Some(p) if !p.is_empty() => PathBuf::from(p),
                _ => find_on_path("ffmpeg").ok_or_else(|| Error::Tool {
                    tool: "ffmpeg".into(),
                    command: String::new(),
                    message: format!("not found on PATH and {FFMPEG_ENV} is unset"),
                    output: String::new(),
                })?,
            },
        };
        Self::at(ffmpeg)
    }

    pub fn at(ffmpeg: PathBuf) -> Result<Self> {
        let out = run(Command::new(&ffmpeg).arg("-version"), "ffmpeg")?;
        let version = String::from_utf8_lossy(&out.stdout)
            .lines()
            .next()
            .unwrap_or_default()
            .trim()
            .to_string();
        if version.is_empty() {
            return Err(Error::Tool {
                tool: "ffmpeg".into(),
                command: format!("{} -version", ffmpeg.display()),
                message: "empty version string".into(),
                output: String::new(),
            });
        }
        Ok(Toolchain { ffmpeg, version })
    }

    /// True when the binary lists every named encoder and filter.
    pub fn supports(&self, encoders: &[&str], filters: &[&str]) -> bool {
        let listing = |flag: &str| {
            Command::new(&self.ffmpeg)
                .args(["-hide_banner", flag])
                .output()
                .map(|o| String::from_utf8_lossy(&o.stdout).into_owned())
                .unwrap_or_default()
        };
        let has = |text: &str, name: &str| {
            text.lines()
                .any(|l| l.split_whitespace().nth(1) == Some(name))
        };
        let enc = listing("-encoders");
        let fil = listing("-filters");
        encoders.iter().all(|e| has(&enc, e)) && filters.iter().all(|f| has(&fil, f))
    }
}

fn find_on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(name))
        .find(|p| p.is_file())
}

/// Runs `cmd` to completion; a spawn failure or nonzero exit becomes a tool
/// error carrying the command line and captured stderr.
pub fn run(cmd: &mut Command, tool: &str) -> Result<Output> {
    let shown = render(cmd);
    let out = cmd.output().map_err(|e| Error::Tool {
        tool: tool.into(),
        command: shown.clone(),
        message: format!("could not start: {e}"),
        output: String::new(),
    })?;
    if !out.status.success() {
        return Err(Error::Tool {
            tool: tool.into(),
            command: shown,
            message: format!("exited with {}", out.status),
            output: String::from_utf8_lossy(&out.stderr).trim_end().to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn render(cmd: &Command) -> String {
    let mut parts = vec![cmd.get_program().to_string_lossy().into_owned()];
    parts.extend(cmd.get_args().map(|a| a.to_string_lossy().into_owned()));
    shlex::try_join(parts.iter().map(String::as_str)).unwrap_or_else(|_| parts.join(" "))
}
