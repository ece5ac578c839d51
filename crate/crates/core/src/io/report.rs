//! Plain-text report documents.
//!
//! One `key = value` pair per line, in the order the producer pushed them.
//! The first two lines are always `schema` and `tool`. Floats are written in
//! the shortest form that parses back to the same value, so identical runs
//! produce identical bytes.

use std::fmt::{self, Display};
use std::fs;
use std::path::Path;

use crate::complexity::CostReport;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::nn::GradCheck;
use crate::wavelet::{EnergyReport, PairReport};

pub const SCHEMA: &str = "ic-fusion.report.v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportDoc {
    entries: Vec<(String, String)>,
}

/// Shortest round-trip representation in exponent form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

impl ReportDoc {
    pub fn new(tool: &str) -> Self {
        let mut d = ReportDoc { entries: Vec::new() };
        d.push("schema", SCHEMA);
        d.push("tool", tool);
        d
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, fmt_f64(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn config(&mut self, cfg: &FusionConfig) -> &mut Self {
        self.push("config.input_h", cfg.input_h);
        self.push("config.input_w", cfg.input_w);
        self.push("config.batch", cfg.batch);
        for l in &cfg.levels {
            let p = format!("config.level{}", l.id);
            let g = &l.groups;
            self.push(format!("{p}.c_rgb"), l.c_rgb);
            self.push(format!("{p}.c_ir"), l.c_ir);
            self.push(
                format!("{p}.groups"),
                format!(
                    "msfd {}/{} ccsg {}/{} tail {}/{}",
                    g.msfd_shuffle, g.msfd_groups, g.ccsg_shuffle, g.ccsg_groups, g.tail_shuffle, g.tail_groups
                ),
            );
        }
        self
    }

    pub fn energy(&mut self, prefix: &str, e: &EnergyReport) -> &mut Self {
        self.push_f64(format!("{prefix}.e_ll"), e.e_ll);
        self.push_f64(format!("{prefix}.e_lh"), e.e_lh);
        self.push_f64(format!("{prefix}.e_hl"), e.e_hl);
        self.push_f64(format!("{prefix}.e_hh"), e.e_hh);
        self.push_f64(format!("{prefix}.hf_ratio"), e.hf_ratio);
        self.push_f64(format!("{prefix}.edge_ratio"), e.edge_ratio())
    }

    pub fn from_pair(r: &PairReport) -> Self {
        let mut d = ReportDoc::new("wavelet");
        d.push("image.h", r.h).push("image.w", r.w).push("levels", r.rgb.len());
        for (i, (a, b)) in r.rgb.iter().zip(&r.ir).enumerate() {
            let l = i + 1;
            d.energy(&format!("level{l}.rgb"), a);
            d.energy(&format!("level{l}.ir"), b);
            d.push_f64(
                format!("level{l}.edge_ratio_ir_minus_rgb"),
                b.edge_ratio() - a.edge_ratio(),
            );
        }
        d
    }

    pub fn from_costs(r: &CostReport) -> Self {
        let mut d = ReportDoc::new("count");
        d.config(&r.config);
        d.push(
            "scope",
            "fusion module only, per image; backbones and detector excluded",
        );
        for l in &r.layers {
            let s = &l.spec;
            d.push(
                format!("layer.{}", l.name),
                format!(
                    "c_in {} c_out {} k {} groups {} dilation {} at {}x{}: params {} macs {}",
                    s.c_in, s.c_out, s.k, s.groups, s.dilation, l.h, l.w, l.params, l.macs
                ),
            );
        }
        for lc in &r.config.levels {
            let (p, m) = r.level_totals(lc.id);
            d.push(format!("level{}.params", lc.id), p);
            d.push(format!("level{}.macs", lc.id), m);
        }
        d.push("total.params", r.total_params);
        d.push("total.macs", r.total_macs);
        d
    }

    pub fn gradchecks(&mut self, checks: &[GradCheck], tol: f64) -> &mut Self {
        self.push_f64("tolerance", tol);
        for c in checks {
            self.push(format!("{}.coords", c.name), c.checked);
            self.push_f64(format!("{}.max_rel_err", c.name), c.max_rel_err);
            self.push(
                format!("{}.status", c.name),
                if c.passes(tol) { "pass" } else { "FAIL" },
            );
        }
        self
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

impl Display for ReportDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
