//! Built-in baselines: a static lower bound, exhaustive NCC template
//! matching and a MOSSE correlation filter.

pub mod fft;
mod mosse;
pub mod ncc;
mod static_box;

use std::fmt;
use std::str::FromStr;

pub use mosse::{MosseConfig, MosseTracker};
pub use ncc::{NccConfig, NccTracker};
pub use static_box::StaticTracker;

use crate::ope::Tracker;
use crate::{Error, Result};

/// Tracker selection plus its parameters, as chosen on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackerKind {
    Static,
    Ncc(NccConfig),
    Mosse(MosseConfig),
}

impl TrackerKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrackerKind::Static => "static",
            TrackerKind::Ncc(_) => "ncc",
            TrackerKind::Mosse(_) => "mosse",
        }
    }

    /// Fresh tracker instance; one per sequence.
    pub fn build(&self) -> Box<dyn Tracker> {
        match self {
            TrackerKind::Static => Box::new(StaticTracker::default()),
            TrackerKind::Ncc(cfg) => Box::new(NccTracker::new(cfg.clone())),
            TrackerKind::Mosse(cfg) => Box::new(MosseTracker::new(cfg.clone())),
        }
    }

    /// Applies `key=value` options.
    pub fn with_options<'a, I>(mut self, opts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        for opt in opts {
            let (key, value) = opt.split_once('=').ok_or_else(|| {
                Error::invalid(format!("tracker option {opt:?} is not key=value"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let num = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("option {key}: bad number {value:?}")))
            };
            match (&mut self, key) {
                (TrackerKind::Ncc(c), "search_radius") => {
                    let r = num()?;
                    if r < 0.0 || r.fract() != 0.0 {
                        return Err(Error::invalid(
                            "search_radius must be a non-negative integer",
                        ));
                    }
                    c.search_radius = r as i64;
                }
                (TrackerKind::Mosse(c), "learning_rate") => c.learning_rate = num()?,
                (TrackerKind::Mosse(c), "sigma") => c.sigma = num()?,
                (TrackerKind::Mosse(c), "epsilon") => c.epsilon = num()?,
                (TrackerKind::Mosse(c), "padding") => c.padding = num()?,
                (TrackerKind::Mosse(c), "window") => {
                    let n = num()?;
                    if n < 2.0 || n.fract() != 0.0 || !(n as usize).is_power_of_two() {
                        return Err(Error::invalid("window must be a power of two >= 2"));
                    }
                    c.window = n as usize;
                }
                (kind, key) => {
                    return Err(Error::invalid(format!(
                        "tracker {} has no option {key:?}",
                        kind.name()
                    )))
                }
            }
        }
        if let TrackerKind::Mosse(c) = &self {
            c.check()?;
        }
        Ok(self)
    }
}

impl FromStr for TrackerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(TrackerKind::Static),
            "ncc" => Ok(TrackerKind::Ncc(NccConfig::default())),
            "mosse" => Ok(TrackerKind::Mosse(MosseConfig::default())),
            other => Err(Error::invalid(format!(
                "unknown tracker {other:?} (expected static, ncc or mosse)"
            ))),
        }
    }
}

impl fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
