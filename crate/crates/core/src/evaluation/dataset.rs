//! OTB-style sequence directories: `img/` frames plus a 1-based
//! `groundtruth_rect.txt`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::imaging::BoundingBox;

pub const GROUNDTRUTH_FILE: &str = "groundtruth_rect.txt";

const FRAME_EXTENSIONS: [&str; 5] = ["jpg", "jpeg", "png", "ppm", "pgm"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing {0}")]
    Missing(PathBuf),
    #[error("no frames found in {0}")]
    NoFrames(PathBuf),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<PathBuf>,
    /// 0-based boxes, when the annotation file exists.
    pub ground_truth: Option<Vec<BoundingBox>>,
}

impl Sequence {
    /// Ground truth, or an error naming the missing annotation file.
    pub fn require_ground_truth(&self, dir: &Path) -> Result<&[BoundingBox], DatasetError> {
        self.ground_truth
            .as_deref()
            .ok_or_else(|| DatasetError::Missing(dir.join(GROUNDTRUTH_FILE)))
    }
}

/// Parse 1-based `x,y,w,h` lines (comma, tab or space separated) into
/// 0-based boxes. Blank lines are skipped.
pub fn parse_groundtruth(text: &str) -> Result<Vec<BoundingBox>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<BoundingBox>()
                .map(|b| b.translate(-1, -1))
                .map_err(|e| (i + 1, e))
        })
        .collect()
}

/// 1-based annotation text for 0-based boxes.
pub fn format_groundtruth(boxes: &[BoundingBox]) -> String {
    boxes
        .iter()
        .map(|b| format!("{},{},{},{}\n", b.x + 1, b.y + 1, b.w, b.h))
        .collect()
}

pub fn load_sequence(dir: impl AsRef<Path>) -> Result<Sequence, DatasetError> {
    let dir = dir.as_ref();
    let img_dir = dir.join("img");
    let entries = fs::read_dir(&img_dir).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            DatasetError::Missing(img_dir.clone())
        } else {
            DatasetError::Io {
                path: img_dir.clone(),
                source,
            }
        }
    })?;
    let mut frames: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(DatasetError::NoFrames(img_dir));
    }

    let gt_path = dir.join(GROUNDTRUTH_FILE);
    let ground_truth = match fs::read_to_string(&gt_path) {
        Ok(text) => Some(parse_groundtruth(&text).map_err(|(line, message)| {
            DatasetError::Parse {
                path: gt_path.clone(),
                line,
                message,
            }
        })?),
        Err(e) if e.kind() == io::ErrorKind::NotFound => None,
        Err(source) => {
            return Err(DatasetError::Io {
                path: gt_path,
                source,
            })
        }
    };
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    Ok(Sequence {
        name,
        frames,
        ground_truth,
    })
}

/// Attribute file: one `sequence: attr1, attr2` line per sequence.
pub fn parse_attributes(text: &str) -> BTreeMap<String, Vec<String>> {
    text.lines()
        .filter_map(|l| {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                return None;
            }
            let (name, attrs) = l.split_once(':')?;
            let attrs = attrs
                .split([',', ' ', '\t'])
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(String::from)
                .collect();
            Some((name.trim().to_string(), attrs))
        })
        .collect()
}
