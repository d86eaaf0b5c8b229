use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::operators::Axis;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Initial,
    PostX,
    PostKick,
}

impl SampleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleKind::Initial => "initial",
            SampleKind::PostX => "post_x",
            SampleKind::PostKick => "post_kick",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "initial" => Some(SampleKind::Initial),
            "post_x" => Some(SampleKind::PostX),
            "post_kick" => Some(SampleKind::PostKick),
            _ => None,
        }
    }
}

/// Normalised magnetisation at one readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Sample<T> {
    pub time: T,
    /// Number of `y` kicks applied so far.
    pub parity: u32,
    pub kind: SampleKind,
    pub ix: T,
    pub iy: T,
    pub iz: T,
}

impl<T: Real> Sample<T> {
    pub fn component(&self, axis: Axis) -> T {
        match axis {
            Axis::X => self.ix,
            Axis::Y => self.iy,
            Axis::Z => self.iz,
        }
    }

    /// Transverse length.
    pub fn s(&self) -> T {
        (self.ix * self.ix + self.iy * self.iy).sqrt()
    }

    /// Transverse phase in `(-pi, pi]`.
    pub fn phi(&self) -> T {
        self.iy.atan2(self.ix)
    }

    /// `(-1)^parity`.
    pub fn toggle(&self) -> T {
        if self.parity % 2 == 0 {
            T::one()
        } else {
            -T::one()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct TimeTrace<T> {
    pub n_spins: usize,
    pub samples: Vec<Sample<T>>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub const CSV_COLUMNS: [&str; 8] = ["time", "parity", "Ix", "Iy", "Iz", "S", "phi", "kind"];

impl<T: Real> TimeTrace<T> {
    pub fn new(n_spins: usize) -> Self {
        Self {
            n_spins,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn initial(&self) -> Option<&Sample<T>> {
        self.samples.first()
    }

    pub fn kicks(&self) -> impl Iterator<Item = &Sample<T>> {
        self.samples.iter().filter(|s| s.kind == SampleKind::PostKick)
    }

    pub fn of_kind(&self, kind: SampleKind) -> impl Iterator<Item = &Sample<T>> {
        self.samples.iter().filter(move |s| s.kind == kind)
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn series(&self, axis: Axis) -> Vec<T> {
        self.samples.iter().map(|s| s.component(axis)).collect()
    }

    /// Multiply every magnetisation by `a` (used for linearity checks).
    pub fn scaled(&self, a: T) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                ix: s.ix * a,
                iy: s.iy * a,
                iz: s.iz * a,
                ..*s
            })
            .collect();
        Self {
            n_spins: self.n_spins,
            samples,
        }
    }

    /// CSV with a `#`-prefixed `key: value` header block.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[(String, String)]) -> io::Result<()> {
        writeln!(w, "# n_spins: {}", self.n_spins)?;
        for (k, v) in header {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.time,
                s.parity,
                s.ix,
                s.iy,
                s.iz,
                s.s(),
                s.phi(),
                s.kind.as_str()
            )?;
        }
        Ok(())
    }

    /// Inverse of [`TimeTrace::write_csv`]; returns the header pairs too.
    pub fn read_csv<R: BufRead>(r: R) -> Result<(Self, Vec<(String, String)>), TraceIoError> {
        let mut header = Vec::new();
        let mut trace = Self::new(0);
        let mut seen_columns = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once(':') {
                    let (k, v) = (k.trim().to_string(), v.trim().to_string());
                    if k == "n_spins" {
                        trace.n_spins = v.parse().map_err(|_| TraceIoError::Parse {
                            line: lineno,
                            reason: format!("bad n_spins `{v}`"),
                        })?;
                    } else {
                        header.push((k, v));
                    }
                }
                continue;
            }
            if !seen_columns {
                let cols: Vec<&str> = line.split(',').collect();
                for want in CSV_COLUMNS {
                    if !cols.contains(&want) {
                        return Err(TraceIoError::Parse {
                            line: lineno,
                            reason: format!("missing column `{want}`"),
                        });
                    }
                }
                seen_columns = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != CSV_COLUMNS.len() {
                return Err(TraceIoError::Parse {
                    line: lineno,
                    reason: format!("expected {} fields, got {}", CSV_COLUMNS.len(), f.len()),
                });
            }
            let num = |j: usize| -> Result<T, TraceIoError> {
                f[j].parse::<f64>().map(T::lit).map_err(|_| TraceIoError::Parse {
                    line: lineno,
                    reason: format!("bad number `{}` in column {}", f[j], CSV_COLUMNS[j]),
                })
            };
            let parity = f[1].parse().map_err(|_| TraceIoError::Parse {
                line: lineno,
                reason: format!("bad parity `{}`", f[1]),
            })?;
            let kind = SampleKind::parse(f[7]).ok_or_else(|| TraceIoError::Parse {
                line: lineno,
                reason: format!("bad kind `{}`", f[7]),
            })?;
            trace.samples.push(Sample {
                time: num(0)?,
                parity,
                kind,
                ix: num(2)?,
                iy: num(3)?,
                iz: num(4)?,
            });
        }
        Ok((trace, header))
    }
}
