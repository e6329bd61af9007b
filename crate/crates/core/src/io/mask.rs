//! Mask arguments: `paper4`, a comma-separated list of parameter names, or
//! a file holding names separated by commas or whitespace (`#` starts a
//! comment).

use std::path::Path;

use crate::error::{Error, Result};
use crate::repair::RepairMask;

pub fn parse_mask_names(text: &str) -> Result<RepairMask> {
    let names: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(Error::InvalidInput("mask names no parameters".into()));
    }
    RepairMask::from_names(&names)
}

pub fn parse_mask_arg(arg: &str) -> Result<RepairMask> {
    if arg == "paper4" {
        return Ok(RepairMask::paper4());
    }
    let path = Path::new(arg);
    if !arg.starts_with('L') && path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read mask file {arg}: {e}")))?;
        return parse_mask_names(&text);
    }
    parse_mask_names(arg)
}
