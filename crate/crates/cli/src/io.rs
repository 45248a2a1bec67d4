use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use lipmix::curve::{CurveFile, SampledCurve};
use lipmix::metric::{MetricSpace, MetricSpaceFile};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    /// unreadable or malformed input (exit 2)
    Parse(String),
    /// a module rejected the input (exit 3)
    Domain(String),
    /// a check ran and failed (exit 1)
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Domain(m) => write!(f, "domain error: {m}"),
            CliError::Failed(m) => write!(f, "verification failed: {m}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn domain<E: fmt::Display>(e: E) -> CliError {
    CliError::Domain(e.to_string())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes to `out`, or stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// A curve file or a bare metric-space file.
pub enum Loaded {
    Curve(SampledCurve),
    Space(MetricSpace),
}

impl Loaded {
    pub fn space(&self) -> &MetricSpace {
        match self {
            Loaded::Curve(c) => c.space(),
            Loaded::Space(s) => s,
        }
    }

    pub fn curve(&self) -> CliResult<&SampledCurve> {
        match self {
            Loaded::Curve(c) => Ok(c),
            Loaded::Space(_) => Err(CliError::Domain("this operation needs a curve, not a point set".into())),
        }
    }
}

pub fn load(path: &Path) -> CliResult<Loaded> {
    let value: serde_json::Value = read_json(path)?;
    let bad = |e: serde_json::Error| CliError::Parse(format!("{}: {e}", path.display()));
    if value.get("topology").is_some() {
        let file: CurveFile = serde_json::from_value(value).map_err(bad)?;
        Ok(Loaded::Curve(SampledCurve::from_file(file).map_err(domain)?))
    } else {
        let file: MetricSpaceFile = serde_json::from_value(value).map_err(bad)?;
        Ok(Loaded::Space(MetricSpace::from_file(file).map_err(domain)?))
    }
}

/// Resolves `reference` against the directory holding `from`.
pub fn relative_to(from: &Path, reference: &str) -> PathBuf {
    let r = Path::new(reference);
    if r.is_absolute() {
        r.to_path_buf()
    } else {
        from.parent().unwrap_or(Path::new(".")).join(r)
    }
}

pub fn parse_ids(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| CliError::Parse(format!("bad id {t:?}"))))
        .collect()
}

pub fn parse_floats(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| CliError::Parse(format!("bad number {t:?}"))))
        .collect()
}

/// `x,y;x,y;...`
pub fn parse_plane_points(s: &str) -> CliResult<Vec<[f64; 2]>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| match parse_floats(t)?.as_slice() {
            &[x, y] => Ok([x, y]),
            _ => Err(CliError::Parse(format!("base point {t:?} needs two coordinates"))),
        })
        .collect()
}
