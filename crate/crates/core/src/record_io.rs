//! Plain-text storage for Wiener realizations and measurement records.
//!
//! ```text
//! # dt=0.01
//! # steps=3
//! # seed=7
//! # b_true=none
//! # kind=dW
//! 4.1e-2
//! -9.7e-2
//! 1.3e-1
//! ```
//!
//! Increments are written in shortest round-trip form, so a save/load cycle
//! is bit-exact.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::trajectory::{MeasurementRecord, WienerRealization};

/// Relative tolerance when comparing a stored dt against a configured one.
const DT_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    /// Wiener increments dW.
    Noise,
    /// Measurement increments dY.
    Measurement,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Noise => "dW",
            RecordKind::Measurement => "dY",
        })
    }
}

impl FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dW" => Ok(RecordKind::Noise),
            "dY" => Ok(RecordKind::Measurement),
            other => Err(format!("unknown record kind '{other}' (expected dW or dY)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile {
    pub dt: f64,
    pub seed: Option<u64>,
    pub b_true: Option<f64>,
    pub kind: RecordKind,
    pub increments: Vec<f64>,
}

impl From<&WienerRealization> for RecordFile {
    fn from(w: &WienerRealization) -> Self {
        Self {
            dt: w.dt,
            seed: w.seed,
            b_true: None,
            kind: RecordKind::Noise,
            increments: w.increments.clone(),
        }
    }
}

impl From<&MeasurementRecord> for RecordFile {
    fn from(r: &MeasurementRecord) -> Self {
        Self {
            dt: r.dt,
            seed: r.seed,
            b_true: r.b_true,
            kind: RecordKind::Measurement,
            increments: r.increments.clone(),
        }
    }
}

impl RecordFile {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Hard error unless the stored dt equals `dt`; increments are never resampled.
    pub fn expect_dt(&self, dt: f64) -> Result<()> {
        if (self.dt - dt).abs() > DT_MATCH_TOL * dt.abs().max(self.dt.abs()) {
            return Err(Error::InvalidArgument(format!(
                "record has dt = {} but the run is configured with dt = {dt}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn into_realization(self) -> Result<WienerRealization> {
        if self.kind != RecordKind::Noise {
            return Err(Error::InvalidArgument(format!("expected a dW file, found kind={}", self.kind)));
        }
        Ok(WienerRealization {
            dt: self.dt,
            increments: self.increments,
            seed: self.seed,
        })
    }

    /// A dY record for replay. `b_true` may be absent.
    pub fn into_record(self) -> Result<MeasurementRecord> {
        if self.kind != RecordKind::Measurement {
            return Err(Error::InvalidArgument(format!("expected a dY file, found kind={}", self.kind)));
        }
        Ok(MeasurementRecord {
            dt: self.dt,
            increments: self.increments,
            b_true: self.b_true,
            seed: self.seed,
        })
    }

    /// The field that generated a dY record. Runs that regenerate or score
    /// against the truth need it; pure replay does not.
    pub fn generating_field(&self) -> Result<f64> {
        match (self.kind, self.b_true) {
            (RecordKind::Measurement, Some(b)) => Ok(b),
            (RecordKind::Measurement, None) => Err(Error::InvalidArgument(
                "dY record has b_true=none; it can be replayed but not used to generate".into(),
            )),
            (RecordKind::Noise, _) => Err(Error::InvalidArgument("a dW file carries no field".into())),
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# dt={}", self.dt)?;
        writeln!(out, "# steps={}", self.increments.len())?;
        match self.seed {
            Some(s) => writeln!(out, "# seed={s}")?,
            None => writeln!(out, "# seed=none")?,
        }
        match self.b_true {
            Some(b) => writeln!(out, "# b_true={b}")?,
            None => writeln!(out, "# b_true=none")?,
        }
        writeln!(out, "# kind={}", self.kind)?;
        for x in &self.increments {
            writeln!(out, "{x:e}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut dt = None;
        let mut steps = None;
        let mut seed = None;
        let mut b_true = None;
        let mut kind = None;
        let mut increments = Vec::new();
        let mut last_line = 0;

        for (k, line) in input.lines().enumerate() {
            let n = k + 1;
            last_line = n;
            let line = line?;
            let text = line.trim();
            let err = |message: String| Error::Parse { line: n, message };

            if let Some(header) = text.strip_prefix('#') {
                if !increments.is_empty() {
                    return Err(err("header line after the first increment".into()));
                }
                let (key, value) = header
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected '# key=value', got '{text}'")))?;
                let (key, value) = (key.trim(), value.trim());
                let slot_taken = match key {
                    "dt" => dt.replace(parse_dt(value).map_err(err)?).is_some(),
                    "steps" => steps
                        .replace(value.parse::<usize>().map_err(|e| err(format!("steps: {e}")))?)
                        .is_some(),
                    "seed" => seed
                        .replace(parse_optional(value, "seed", |v| v.parse::<u64>().map_err(|e| e.to_string())).map_err(err)?)
                        .is_some(),
                    "b_true" => b_true
                        .replace(parse_optional(value, "b_true", parse_finite).map_err(err)?)
                        .is_some(),
                    "kind" => kind.replace(value.parse::<RecordKind>().map_err(err)?).is_some(),
                    other => return Err(err(format!("unknown header key '{other}'"))),
                };
                if slot_taken {
                    return Err(err(format!("duplicate header key '{key}'")));
                }
                continue;
            }

            if text.is_empty() {
                return Err(err("blank line".into()));
            }
            if dt.is_none() || steps.is_none() || seed.is_none() || b_true.is_none() || kind.is_none() {
                return Err(err("increment before the header is complete".into()));
            }
            increments.push(parse_finite(text).map_err(err)?);
        }

        let missing = |key: &str| Error::Parse {
            line: last_line,
            message: format!("missing header key '{key}'"),
        };
        let steps = steps.ok_or_else(|| missing("steps"))?;
        if steps != increments.len() {
            return Err(Error::Parse {
                line: last_line,
                message: format!("header announces {steps} steps but {} increments follow", increments.len()),
            });
        }
        Ok(Self {
            dt: dt.ok_or_else(|| missing("dt"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            b_true: b_true.ok_or_else(|| missing("b_true"))?,
            kind: kind.ok_or_else(|| missing("kind"))?,
            increments,
        })
    }
}

fn parse_finite(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("'{s}': {e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("non-finite value '{s}'"))
    }
}

fn parse_dt(s: &str) -> std::result::Result<f64, String> {
    let dt = parse_finite(s)?;
    if dt > 0.0 {
        Ok(dt)
    } else {
        Err(format!("dt must be positive, got {dt}"))
    }
}

fn parse_optional<T>(
    s: &str,
    key: &str,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Option<T>, String> {
    if s == "none" {
        Ok(None)
    } else {
        parse(s).map(Some).map_err(|e| format!("{key}: {e}"))
    }
}

pub fn save(path: impl AsRef<Path>, file: &RecordFile) -> Result<()> {
    file.write_to(BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<RecordFile> {
    RecordFile::read_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::generate_wiener;

    fn parse(text: &str) -> Result<RecordFile> {
        RecordFile::read_from(text.as_bytes())
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let w = generate_wiener(0.01, 500, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noise.txt");
        save(&path, &RecordFile::from(&w)).unwrap();
        let back = load(&path).unwrap().into_realization().unwrap();
        assert_eq!(back.seed, Some(11));
        assert_eq!(back.dt.to_bits(), w.dt.to_bits());
        assert!(back.increments.iter().zip(&w.increments).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn measurement_header() {
        let rec = MeasurementRecord {
            dt: 1e-3,
            increments: vec![0.1, -2.5e-300, 3.0],
            b_true: Some(-0.75),
            seed: None,
        };
        let mut buf = Vec::new();
        RecordFile::from(&rec).write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# dt=0.001\n# steps=3\n# seed=none\n# b_true=-0.75\n# kind=dY\n"));
        assert_eq!(parse(&text).unwrap().into_record().unwrap(), rec);
    }

    #[test]
    fn dt_mismatch_is_an_error() {
        let f = RecordFile::from(&generate_wiener(0.01, 3, 1).unwrap());
        assert!(f.expect_dt(0.01).is_ok());
        assert!(matches!(f.expect_dt(0.005), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn record_without_field_replays_only() {
        let f = parse("# dt=0.01\n# steps=1\n# seed=none\n# b_true=none\n# kind=dY\n0.5\n").unwrap();
        assert!(f.generating_field().is_err());
        assert!(f.clone().into_record().is_ok());
        assert!(f.into_realization().is_err());
    }

    #[test]
    fn errors_name_the_line() {
        let head = "# dt=0.01\n# steps=2\n# seed=1\n# b_true=none\n# kind=dW\n";
        assert_eq!(line_of(parse(&format!("{head}0.1\nabc\n")).unwrap_err()), 7);
        assert_eq!(line_of(parse(&format!("{head}0.1\n")).unwrap_err()), 6);
        assert_eq!(line_of(parse(&format!("{head}0.1\nNaN\n")).unwrap_err()), 7);
        assert_eq!(line_of(parse("# dt=-1\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("# dt=0.1\n# dt=0.1\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("# dt=0.1\n# colour=red\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("# dt=0.1\n0.3\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("# dt=0.1\n# kind=dX\n").unwrap_err()), 2);
        assert_eq!(line_of(parse(&format!("{head}0.1\n\n0.2\n")).unwrap_err()), 7);
    }
}
