//! Corpus manifests: one line per raw sequence.
//!
//! ```text
//! sequence,path,width,height,fps,frames,pix_fmt
//! Beauty,Beauty_1920x1080_120fps_420_8bit.yuv,1920,1080,120,600,yuv420p
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::yuv::Geometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub id: String,
    pub path: PathBuf,
    pub geometry: Geometry,
    pub fps: f64,
    pub frames: u64,
    pub pix_fmt: String,
}

impl SequenceSpec {
    /// Confirms the file exists and its size matches the declared geometry
    /// and frame count.
    pub fn verify(&self) -> Result<()> {
        if self.pix_fmt != "yuv420p" {
            return Err(Error::Geometry {
                path: self.path.clone(),
                message: format!("unsupported pixel format {}", self.pix_fmt),
            });
        }
        if !(self.fps.is_finite() && self.fps > 0.0) || self.frames == 0 {
            return Err(Error::Geometry {
                path: self.path.clone(),
                message: format!("invalid fps {} / frame count {}", self.fps, self.frames),
            });
        }
        let len = std::fs::metadata(&self.path)
            .map_err(|e| Error::io(format!("stat {}", self.path.display()), e))?
            .len();
        let expected = self.frames * self.geometry.frame_len() as u64;
        if len != expected {
            return Err(Error::Geometry {
                path: self.path.clone(),
                message: format!(
                    "{len} bytes on disk, expected {expected} for {} frames of {}",
                    self.frames, self.geometry
                ),
            });
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct Row {
    sequence: String,
    path: PathBuf,
    width: u32,
    height: u32,
    fps: f64,
    frames: u64,
    #[serde(default = "default_pix_fmt")]
    pix_fmt: String,
}

fn default_pix_fmt() -> String {
    "yuv420p".into()
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<SequenceSpec>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out: Vec<SequenceSpec> = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if out.iter().any(|s| s.id == row.sequence) {
            return Err(Error::Config(format!(
                "duplicate sequence '{}' in manifest",
                row.sequence
            )));
        }
        let path = if row.path.is_absolute() {
            row.path
        } else {
            base_dir.join(row.path)
        };
        out.push(SequenceSpec {
            id: row.sequence,
            path,
            geometry: Geometry::new(row.width, row.height)?,
            fps: row.fps,
            frames: row.frames,
            pix_fmt: row.pix_fmt,
        });
    }
    if out.is_empty() {
        return Err(Error::Config("manifest lists no sequences".into()));
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<SequenceSpec>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("read manifest {}", path.display()), e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}
