//! CSV rows, proposal CSV parsing and debug image helpers.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use topg_core::imaging::{BoundingBox, ImageBuffer};
use topg_core::proposals::{Proposal, Source};

pub const PROPOSAL_HEADER: &str = "frame_id,x,y,w,h,rho,source";
pub const RANKED_HEADER: &str = "frame_id,x,y,w,h,rho,source,s,c,z,a";

pub fn proposal_row(out: &mut String, frame_id: usize, p: &Proposal) {
    let b = p.bbox;
    let _ = write!(out, "{frame_id},{},{},{},{},{},{}", b.x, b.y, b.w, b.h, p.rho, p.source);
}

pub fn proposals_csv(frames: &[(usize, Vec<Proposal>)]) -> String {
    let mut out = format!("{PROPOSAL_HEADER}\n");
    for (id, list) in frames {
        for p in list {
            proposal_row(&mut out, *id, p);
            out.push('\n');
        }
    }
    out
}

pub fn ranked_csv(frames: &[(usize, Vec<Proposal>)]) -> String {
    let mut out = format!("{RANKED_HEADER}\n");
    for (id, list) in frames {
        for p in list {
            proposal_row(&mut out, *id, p);
            let _ = writeln!(out, ",{},{},{},{}", p.s, p.c, p.z, p.a);
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct ProposalRecord {
    frame_id: usize,
    x: i32,
    y: i32,
    w: i32,
    h: i32,
    rho: f64,
    source: String,
}

/// Proposals grouped by frame id, in file order.
pub fn read_proposals(path: &Path) -> Result<Vec<(usize, Vec<Proposal>)>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read proposals {}", path.display()))?;
    let mut frames: Vec<(usize, Vec<Proposal>)> = Vec::new();
    for (i, row) in reader.deserialize::<ProposalRecord>().enumerate() {
        let r = row.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        let source: Source = r
            .source
            .parse()
            .map_err(anyhow::Error::msg)
            .with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        let p = Proposal::new(BoundingBox::new(r.x, r.y, r.w, r.h), r.rho, source);
        match frames.last_mut() {
            Some((id, list)) if *id == r.frame_id => list.push(p),
            _ => frames.push((r.frame_id, vec![p])),
        }
    }
    Ok(frames)
}

/// Write to `path`, or to standard output when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// RGB copy of `frame` with a `thickness`-pixel red border along the
/// inside of `bbox`.
pub fn overlay(frame: &ImageBuffer, bbox: &BoundingBox, thickness: i32) -> ImageBuffer {
    let mut img = frame.to_rgb();
    let Some(b) = bbox.clip(img.width(), img.height()) else {
        return img;
    };
    for y in b.y..b.bottom() {
        for x in b.x..b.right() {
            let edge = x < b.x + thickness
                || x >= b.right() - thickness
                || y < b.y + thickness
                || y >= b.bottom() - thickness;
            if edge {
                img.pixel_mut(x as usize, y as usize).copy_from_slice(&[255, 0, 0]);
            }
        }
    }
    img
}
