//! Raw planar 4:2:0 8-bit frames and files.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame dimensions of a raw yuv420p stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub width: u32,
    pub height: u32,
}

impl Geometry {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
            return Err(Error::invalid(format!(
                "yuv420p needs even, non-zero dimensions, got {width}x{height}"
            )));
        }
        Ok(Geometry { width, height })
    }

    pub fn luma_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn chroma_len(&self) -> usize {
        (self.width as usize / 2) * (self.height as usize / 2)
    }

    pub fn frame_len(&self) -> usize {
        self.luma_len() + 2 * self.chroma_len()
    }

    /// Number of whole frames in a file of `bytes` bytes.
    pub fn frames_in(&self, bytes: u64) -> Result<u64> {
        let fl = self.frame_len() as u64;
        if bytes == 0 || bytes % fl != 0 {
            return Err(Error::invalid(format!(
                "{bytes} bytes is not a whole number of {}x{} yuv420p frames",
                self.width, self.height
            )));
        }
        Ok(bytes / fl)
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// One 4:2:0 frame or patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YuvPatch {
    pub width: u32,
    pub height: u32,
    pub y: Vec<u8>,
    pub cb: Vec<u8>,
    pub cr: Vec<u8>,
}

impl YuvPatch {
    pub fn new(width: u32, height: u32, y: Vec<u8>, cb: Vec<u8>, cr: Vec<u8>) -> Result<Self> {
        let g = Geometry::new(width, height)?;
        if y.len() != g.luma_len() || cb.len() != g.chroma_len() || cr.len() != g.chroma_len() {
            return Err(Error::invalid(format!(
                "plane sizes {}/{}/{} do not match {g}",
                y.len(),
                cb.len(),
                cr.len()
            )));
        }
        Ok(YuvPatch {
            width,
            height,
            y,
            cb,
            cr,
        })
    }

    /// Every sample set to `value`.
    pub fn uniform(width: u32, height: u32, value: u8) -> Result<Self> {
        let g = Geometry::new(width, height)?;
        Ok(YuvPatch {
            width,
            height,
            y: vec![value; g.luma_len()],
            cb: vec![value; g.chroma_len()],
            cr: vec![value; g.chroma_len()],
        })
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            width: self.width,
            height: self.height,
        }
    }

    pub fn from_bytes(geometry: Geometry, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != geometry.frame_len() {
            return Err(Error::invalid(format!(
                "expected {} bytes for a {geometry} frame, got {}",
                geometry.frame_len(),
                bytes.len()
            )));
        }
        let (l, c) = (geometry.luma_len(), geometry.chroma_len());
        Ok(YuvPatch {
            width: geometry.width,
            height: geometry.height,
            y: bytes[..l].to_vec(),
            cb: bytes[l..l + c].to_vec(),
            cr: bytes[l + c..].to_vec(),
        })
    }

    /// Planar serialization: Y, then Cb, then Cr.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.y.len() + self.cb.len() + self.cr.len());
        out.extend_from_slice(&self.y);
        out.extend_from_slice(&self.cb);
        out.extend_from_slice(&self.cr);
        out
    }

    /// Crops a sub-patch. `x`, `y`, `width` and `height` must be even.
    pub fn crop(&self, x: u32, y: u32, width: u32, height: u32) -> Result<Self> {
        if x % 2 != 0 || y % 2 != 0 {
            return Err(Error::invalid("crop offsets must be even for 4:2:0"));
        }
        if x + width > self.width || y + height > self.height {
            return Err(Error::invalid(format!(
                "crop {width}x{height}+{x}+{y} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let g = Geometry::new(width, height)?;
        let copy = |plane: &[u8], stride: u32, x: u32, y: u32, w: u32, h: u32| {
            let mut out = Vec::with_capacity((w * h) as usize);
            for row in y..y + h {
                let start = (row * stride + x) as usize;
                out.extend_from_slice(&plane[start..start + w as usize]);
            }
            out
        };
        Ok(YuvPatch {
            width: g.width,
            height: g.height,
            y: copy(&self.y, self.width, x, y, width, height),
            cb: copy(
                &self.cb,
                self.width / 2,
                x / 2,
                y / 2,
                width / 2,
                height / 2,
            ),
            cr: copy(
                &self.cr,
                self.width / 2,
                x / 2,
                y / 2,
                width / 2,
                height / 2,
            ),
        })
    }
}

/// Random-access reader over a raw yuv420p file.
#[derive(Debug)]
pub struct RawVideo {
    path: PathBuf,
    geometry: Geometry,
    frames: u64,
}

impl RawVideo {
    pub fn open(path: impl Into<PathBuf>, geometry: Geometry) -> Result<Self> {
        let path = path.into();
        let len = std::fs::metadata(&path)
            .map_err(|e| Error::io(format!("stat {}", path.display()), e))?
            .len();
        let frames = geometry.frames_in(len).map_err(|e| Error::Geometry {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok(RawVideo {
            path,
            geometry,
            frames,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn frame_count(&self) -> u64 {
        self.frames
    }

    pub fn read_frame(&self, index: u64) -> Result<YuvPatch> {
        if index >= self.frames {
            return Err(Error::invalid(format!(
                "frame {index} out of range (file has {})",
                self.frames
            )));
        }
        let fl = self.geometry.frame_len();
        let ctx = || format!("read frame {index} of {}", self.path.display());
        let mut f = File::open(&self.path).map_err(|e| Error::io(ctx(), e))?;
        f.seek(SeekFrom::Start(index * fl as u64))
            .map_err(|e| Error::io(ctx(), e))?;
        let mut buf = vec![0u8; fl];
        f.read_exact(&mut buf).map_err(|e| Error::io(ctx(), e))?;
        YuvPatch::from_bytes(self.geometry, &buf)
    }
}

/// Parses `..._<W>x<H>...` out of a file name.
pub fn geometry_from_name(path: &Path) -> Option<Geometry> {
    let stem = path.file_stem()?.to_str()?;
    stem.split(['_', '-', '.'])
        .rev()
        .find_map(|tok| {
            let (w, h) = tok.split_once('x')?;
            Some((w.parse::<u32>().ok()?, h.parse::<u32>().ok()?))
        })
        .and_then(|(w, h)| Geometry::new(w, h).ok())
}

#[derive(Deserialize)]
struct Sidecar {
    width: u32,
    height: u32,
}

/// Geometry for a raw file: a `<file>.json` sidecar wins, otherwise the
/// `WxH` token in the file name.
pub fn resolve_geometry(path: &Path) -> Result<Geometry> {
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    let sidecar = PathBuf::from(sidecar);
    if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)
            .map_err(|e| Error::io(format!("read {}", sidecar.display()), e))?;
        let s: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", sidecar.display())))?;
        return Geometry::new(s.width, s.height);
    }
    geometry_from_name(path).ok_or_else(|| {
        Error::invalid(format!(
            "cannot determine dimensions of {}: no sidecar and no WxH in the name",
            path.display()
        ))
    })
}

/// Reads the first frame of a raw patch file.
pub fn read_patch_file(path: &Path) -> Result<YuvPatch> {
    let g = resolve_geometry(path)?;
    RawVideo::open(path, g)?.read_frame(0)
}
