use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAGIC: &str = "# expstab-spectrum v1";

/// A spectrum written to or read from a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub problem: String,
    pub t: f64,
    /// Set when the run diverged; the spectrum is then the last finite one.
    pub blowup_step: Option<usize>,
    pub spectrum: Vec<Complex64>,
}

impl Snapshot {
    pub fn header(&self) -> String {
        let mut h = format!(
            "{MAGIC} problem={} Nx={} t={:.16e}",
            self.problem,
            self.spectrum.len(),
            self.t
        );
        if let Some(step) = self.blowup_step {
            h.push_str(&format!(" status=blowup step={step}"));
        }
        h
    }

    pub fn to_text(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for z in &self.spectrum {
            s.push_str(&format!("{:.16e},{:.16e}\n", z.re, z.im));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty snapshot".into()))?;
        let rest = header
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::Format(format!("bad snapshot header {header:?}")))?;
        let mut problem = None;
        let mut n = None;
        let mut t = None;
        let mut blowup = false;
        let mut step = None;
        for field in rest.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header field {field:?}")))?;
            let bad =
                |e: &dyn std::fmt::Display| Error::Format(format!("header field {field:?}: {e}"));
            match key {
                "problem" => problem = Some(value.to_string()),
                "Nx" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "t" => t = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "status" => blowup = value == "blowup",
                "step" => step = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                _ => return Err(Error::Format(format!("unknown header field {key:?}"))),
            }
        }
        let (Some(problem), Some(n), Some(t)) = (problem, n, t) else {
            return Err(Error::Format(
                "snapshot header needs problem, Nx and t".into(),
            ));
        };
        let spectrum = lines
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let (re, im) = line
                    .split_once(',')
                    .ok_or_else(|| Error::Format(format!("bad spectrum line {line:?}")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("{s:?}: {e}")))
                };
                Ok(Complex64::new(parse(re)?, parse(im)?))
            })
            .collect::<Result<Vec<_>>>()?;
        if spectrum.len() != n {
            return Err(Error::Format(format!(
                "snapshot declares Nx={n} but holds {} values",
                spectrum.len()
            )));
        }
        Ok(Self {
            problem,
            t,
            blowup_step: if blowup { step } else { None },
            spectrum,
        })
    }
}

/// Write atomically: a temporary file in the target directory, then rename.
pub fn write_snapshot(path: &Path, snapshot: &Snapshot) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(snapshot.to_text().as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    Snapshot::parse(&fs::read_to_string(path)?)
}
