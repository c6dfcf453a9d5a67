//! Plain-text parameter checkpoints.
//!
//! ```text
//! lifeline-ckpt v1
//! layer_widths: 5 32 32 1
//! 1.2345678901234567e-1
//! ...
//! ```
//!
//! One value per line in parameter-vector order, written with 17 significant
//! digits so every `f64` reloads to the identical value.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: &str = "lifeline-ckpt v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub layer_widths: Vec<usize>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(24 * (self.params.len() + 2));
        out.push_str(HEADER);
        out.push('\n');
        let widths: Vec<String> = self.layer_widths.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(out, "layer_widths: {}", widths.join(" "));
        for p in &self.params {
            let _ = writeln!(out, "{p:.16e}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(HEADER) {
            return Err(Error::Parse(format!("checkpoint must start with '{HEADER}'")));
        }
        let widths_line = lines
            .next()
            .and_then(|l| l.trim().strip_prefix("layer_widths:"))
            .ok_or_else(|| Error::Parse("missing 'layer_widths:' line".into()))?;
        let layer_widths = widths_line
            .split_whitespace()
            .map(|w| w.parse::<usize>().map_err(|e| Error::Parse(format!("layer width: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let params = lines
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| l.parse::<f64>().map_err(|e| Error::Parse(format!("parameter '{l}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layer_widths,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn text_round_trip_is_exact(params in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 0..64)) {
            let ckpt = Checkpoint { layer_widths: vec![3, 4, 1], params };
            let back = Checkpoint::parse(&ckpt.to_text()).unwrap();
            prop_assert_eq!(back.layer_widths, ckpt.layer_widths);
            for (a, b) in back.params.iter().zip(&ckpt.params) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(Checkpoint::parse("hello\n").is_err());
        assert!(Checkpoint::parse("lifeline-ckpt v1\n1 2\n").is_err());
        assert!(Checkpoint::parse("lifeline-ckpt v1\nlayer_widths: 1 1\nnope\n").is_err());
    }
}
