//! Tables, report envelopes and curve files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use varspline::{ChartCurve, ManifoldModel, TimeGrid};

use crate::error::{CliError, Location};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Structured,
}

/// Tab-separated table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn curve_table(curve: &ChartCurve) -> Table {
    let d = curve.dim();
    let mut t = Table::new(std::iter::once("t".to_string()).chain((0..d).map(|q| format!("x{q}"))));
    for (i, time) in curve.grid().times().into_iter().enumerate() {
        t.push(std::iter::once(num(time)).chain(curve.node(i).iter().map(|&x| num(x))).collect());
    }
    t
}

/// Reads a curve table written by [`curve_table`]; times must form a uniform grid on `[0, 1]`.
pub fn read_curve(path: &Path, manifold: &ManifoldModel) -> Result<ChartCurve, CliError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read curve: {e}")).in_file(&name))?;
    let d = manifold.dim();
    let mut times = Vec::new();
    let mut coords = Vec::new();
    let mut offset = 0;
    for (lineno, line) in text.lines().enumerate() {
        let here = offset;
        offset += line.len() + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with('t')) {
            continue;
        }
        let loc = Some(Location::of(&text, here));
        let vals = line
            .split('\t')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::parse(format!("bad number: {e}"), None, loc).in_file(&name))?;
        if vals.len() != d + 1 {
            return Err(CliError::parse(
                format!("expected {} columns (t and {d} coordinates), got {}", d + 1, vals.len()),
                None,
                loc,
            )
            .in_file(&name));
        }
        times.push(vals[0]);
        coords.extend_from_slice(&vals[1..]);
    }
    if times.len() < 2 {
        return Err(CliError::input("curve needs at least two rows").in_file(&name));
    }
    let m = times.len() - 1;
    let grid = TimeGrid::unit(m).map_err(CliError::from)?;
    for (i, &t) in times.iter().enumerate() {
        if (t - grid.time(i)).abs() > 1e-12 {
            return Err(CliError::input(format!("row {i}: time {t} is not node {i} of a uniform grid with M = {m}")).in_file(&name));
        }
    }
    ChartCurve::new(grid, manifold.clone(), coords).map_err(|e| CliError::from(e).in_file(&name))
}

/// Report body wrapped with the schema tag and command name.
pub fn envelope(command: &str, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    map.insert("command".into(), json!(command));
    if let Value::Object(b) = body {
        map.extend(b);
    }
    Value::Object(map)
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the table to `out` and the report beside it, or one of them to stdout.
pub fn emit(out: Option<&Path>, format: Format, table: &Table, report: &Value) -> Result<(), CliError> {
    let pretty = serde_json::to_string_pretty(report).map_err(|e| CliError::runtime(e.to_string()))?;
    match out {
        Some(path) => {
            fs::write(path, table.render())?;
            fs::write(meta_path(path), pretty + "\n")?;
            eprintln!("wrote {} and {}", path.display(), meta_path(path).display());
        }
        None => {
            let text = match format {
                Format::Table => table.render(),
                Format::Structured => pretty + "\n",
            };
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

/// Machine-readable error document for stdout.
pub fn error_document(err: &CliError) -> String {
    let mut s = String::new();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "exit_code": err.exit_code(),
        "error": err,
    });
    let _ = write!(s, "{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
    s
}
