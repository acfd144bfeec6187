//! Score ingestion and output framing.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const CSV_VERSION: u32 = 1;

fn data_err(path: &Path, line: Option<u64>, msg: impl std::fmt::Display) -> CliError {
    match line {
        Some(l) => CliError::Data(format!("{}:{l}: {msg}", path.display())),
        None => CliError::Data(format!("{}: {msg}", path.display())),
    }
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| data_err(path, None, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_score(path: &Path, line: u64, field: &str) -> CliResult<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| data_err(path, Some(line), format!("cannot parse score {field:?}")))?;
    if !v.is_finite() {
        return Err(data_err(
            path,
            Some(line),
            format!("score {field} is not finite"),
        ));
    }
    Ok(v)
}

/// Scores from `score,role` rows; roles `calibration`/`cal` and `test`.
pub fn read_scored_roles(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| data_err(path, e.position().map(|p| p.line()), e))?,
        None => return Err(data_err(path, None, "empty file")),
    };
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(score_col), Some(role_col)) = (col("score"), col("role")) else {
        return Err(data_err(
            path,
            Some(1),
            "header must contain `score` and `role` columns",
        ));
    };
    let (mut cal, mut test) = (Vec::new(), Vec::new());
    for rec in records {
        let rec = rec.map_err(|e| data_err(path, e.position().map(|p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(score), Some(role)) = (rec.get(score_col), rec.get(role_col)) else {
            return Err(data_err(path, Some(line), "missing field"));
        };
        let score = parse_score(path, line, score)?;
        match role.to_ascii_lowercase().as_str() {
            "calibration" | "cal" => cal.push(score),
            "test" => test.push(score),
            other => {
                return Err(data_err(
                    path,
                    Some(line),
                    format!("unknown role {other:?}"),
                ))
            }
        }
    }
    Ok((cal, test))
}

/// One score per line, optionally under a `score` header.
pub fn read_score_column(path: &Path) -> CliResult<Vec<f64>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data_err(path, e.position().map(|p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = rec.get(0).unwrap_or("");
        if i == 0 && field.eq_ignore_ascii_case("score") {
            continue;
        }
        if rec.len() != 1 {
            return Err(data_err(
                path,
                Some(line),
                format!("expected one column, found {}", rec.len()),
            ));
        }
        out.push(parse_score(path, line, field)?);
    }
    Ok(out)
}

/// Where a command's output goes.
pub fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// Writes the versioned header and the config echo as `#` comment lines.
pub fn csv_preamble<C: Serialize>(out: &mut dyn Write, command: &str, config: &C) -> CliResult<()> {
    writeln!(out, "# conformal-urn {command} csv v{CSV_VERSION}")?;
    writeln!(out, "# config {}", serde_json::to_string(config)?)?;
    Ok(())
}

/// Emits a CSV body after the preamble.
pub fn write_csv<C: Serialize, R: Serialize>(
    out: &mut dyn Write,
    command: &str,
    config: &C,
    rows: &[R],
) -> CliResult<()> {
    csv_preamble(out, command, config)?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    schema: String,
    version: &'a str,
    config: &'a C,
    result: &'a R,
}

pub fn write_json<C: Serialize, R: Serialize>(
    out: &mut dyn Write,
    command: &str,
    config: &C,
    result: &R,
) -> CliResult<()> {
    let doc = Envelope {
        schema: format!("conformal-urn/{command}/v{CSV_VERSION}"),
        version: env!("CARGO_PKG_VERSION"),
        config,
        result,
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// `PREFIX.ext`, keeping any extension already on the prefix.
pub fn with_suffix(prefix: &Path, ext: &str) -> std::path::PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    s.into()
}
