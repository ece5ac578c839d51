//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments run to the end of the line
//! input_size = 640          # or 640x480 (height x width), or input_h / input_w
//! batch = 1
//! levels = 3,4,5
//! level.3.c_rgb = 128
//! level.3.c_ir = 512
//! groups.msfd_shuffle = 4   # defaults for every level
//! groups.msfd = 4
//! groups.ccsg_shuffle = 2
//! groups.ccsg = 2
//! groups.tail_shuffle = 2
//! groups.tail = 2
//! level.5.groups.ccsg = 4   # per-level override
//! ```
//!
//! Every key is optional; omitted values take the defaults. Unknown and
//! repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::config::{DEFAULT_IR_WIDTHS, DEFAULT_RGB_WIDTHS};
use crate::fusion::{FusionConfig, GroupConfig, LevelConfig};

const GROUP_KEYS: [&str; 6] = ["msfd_shuffle", "msfd", "ccsg_shuffle", "ccsg", "tail_shuffle", "tail"];

fn group_slot<'a>(g: &'a mut GroupConfig, key: &str) -> Option<&'a mut usize> {
    Some(match key {
        "msfd_shuffle" => &mut g.msfd_shuffle,
        "msfd" => &mut g.msfd_groups,
        "ccsg_shuffle" => &mut g.ccsg_shuffle,
        "ccsg" => &mut g.ccsg_groups,
        "tail_shuffle" => &mut g.tail_shuffle,
        "tail" => &mut g.tail_groups,
        _ => return None,
    })
}

fn group_value(g: &GroupConfig, key: &str) -> usize {
    let mut g = *g;
    *group_slot(&mut g, key).unwrap()
}

fn default_widths(id: u8) -> (usize, usize) {
    match id {
        3..=5 => {
            let i = (id - 3) as usize;
            (DEFAULT_RGB_WIDTHS[i], DEFAULT_IR_WIDTHS[i])
        }
        _ => (0, 0),
    }
}

pub fn parse_config(text: &str) -> Result<FusionConfig> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            msg: "expected key = value".into(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config {
                line,
                msg: "empty key or value".into(),
            });
        }
        if let Some((first, _)) = entries.get(k) {
            return Err(Error::Config {
                line,
                msg: format!("duplicate key {k} (first set on line {first})"),
            });
        }
        entries.insert(k.to_string(), (line, v.to_string()));
    }

    let num = |line: usize, v: &str| -> Result<usize> {
        v.parse().map_err(|_| Error::Config {
            line,
            msg: format!("expected a non-negative integer, found {v:?}"),
        })
    };

    let mut cfg = FusionConfig::default();
    let mut ids: Vec<u8> = vec![3, 4, 5];
    if let Some((line, v)) = entries.get("levels") {
        ids = v
            .split(',')
            .map(|s| {
                let n = num(*line, s.trim())?;
                u8::try_from(n).map_err(|_| Error::Config {
                    line: *line,
                    msg: format!("level id {n} out of range"),
                })
            })
            .collect::<Result<_>>()?;
    }
    let mut groups = GroupConfig::default();
    let mut levels: Vec<LevelConfig> = ids
        .iter()
        .map(|&id| {
            let (r, c) = default_widths(id);
            LevelConfig::new(id, r, c)
        })
        .collect();
    let mut overrides: Vec<(u8, &str, usize)> = Vec::new();

    for (key, (line, v)) in &entries {
        let line = *line;
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["levels"] => {}
            ["input_size"] => {
                let (h, w) = match v.split_once('x') {
                    Some((h, w)) => (num(line, h.trim())?, num(line, w.trim())?),
                    None => {
                        let s = num(line, v)?;
                        (s, s)
                    }
                };
                if entries.contains_key("input_h") || entries.contains_key("input_w") {
                    return Err(Error::Config {
                        line,
                        msg: "input_size conflicts with input_h/input_w".into(),
                    });
                }
                cfg.input_h = h;
                cfg.input_w = w;
            }
            ["input_h"] => cfg.input_h = num(line, v)?,
            ["input_w"] => cfg.input_w = num(line, v)?,
            ["batch"] => cfg.batch = num(line, v)?,
            ["groups", g] => {
                let slot = group_slot(&mut groups, g).ok_or_else(|| Error::Config {
                    line,
                    msg: format!("unknown key {key}"),
                })?;
                *slot = num(line, v)?;
            }
            ["level", id, rest @ ..] => {
                let id: u8 = id.parse().map_err(|_| Error::Config {
                    line,
                    msg: format!("bad level id in {key}"),
                })?;
                let level = levels.iter_mut().find(|l| l.id == id).ok_or_else(|| Error::Config {
                    line,
                    msg: format!("level {id} is not listed in levels"),
                })?;
                match rest {
                    ["c_rgb"] => level.c_rgb = num(line, v)?,
                    ["c_ir"] => level.c_ir = num(line, v)?,
                    ["groups", g] if GROUP_KEYS.contains(g) => overrides.push((id, g, num(line, v)?)),
                    _ => {
                        return Err(Error::Config {
                            line,
                            msg: format!("unknown key {key}"),
                        })
                    }
                }
            }
            _ => {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key {key}"),
                })
            }
        }
    }
    for l in &mut levels {
        l.groups = groups;
    }
    for (id, g, v) in overrides {
        let l = levels.iter_mut().find(|l| l.id == id).unwrap();
        *group_slot(&mut l.groups, g).unwrap() = v;
    }
    cfg.levels = levels;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<FusionConfig> {
    let path = path.as_ref();
    parse_config(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Canonical text form; `parse_config(&render_config(c)) == c`.
pub fn render_config(cfg: &FusionConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "input_h = {}", cfg.input_h);
    let _ = writeln!(s, "input_w = {}", cfg.input_w);
    let _ = writeln!(s, "batch = {}", cfg.batch);
    let ids: Vec<String> = cfg.levels.iter().map(|l| l.id.to_string()).collect();
    let _ = writeln!(s, "levels = {}", ids.join(","));
    for l in &cfg.levels {
        let _ = writeln!(s, "level.{}.c_rgb = {}", l.id, l.c_rgb);
        let _ = writeln!(s, "level.{}.c_ir = {}", l.id, l.c_ir);
        for g in GROUP_KEYS {
            let _ = writeln!(s, "level.{}.groups.{g} = {}", l.id, group_value(&l.groups, g));
        }
    }
    s
}
