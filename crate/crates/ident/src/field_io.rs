//! Field and system CSV files.
//!
//! A field file starts with
//! `# nx=<int> nt=<int> x0=<f> dx=<f> t0=<f> dt=<f> boundary=<periodic|dirichlet>`
//! followed by `nt` lines of `nx` comma-separated values, one time slice per
//! line.

use ident_core::grid::{Boundary, Field, Grid};
use ident_core::system::LinearSystem;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}")]
    Core {
        path: PathBuf,
        #[source]
        source: ident_core::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |source| FileError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Header line describing `grid`.
pub fn header(grid: &Grid) -> String {
    let b = match grid.boundary {
        Boundary::Periodic => "periodic",
        Boundary::Dirichlet => "dirichlet",
    };
    format!(
        "# nx={} nt={} x0={:e} dx={:e} t0={:e} dt={:e} boundary={b}",
        grid.nx, grid.nt, grid.x0, grid.dx, grid.t0, grid.dt
    )
}

/// Parses a header line into a grid.
pub fn parse_header(line: &str) -> Result<Grid, String> {
    let body = line.strip_prefix('#').ok_or("header must start with '#'")?;
    let fields: BTreeMap<&str, &str> = body
        .split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| format!("malformed header entry {kv:?}"))
        })
        .collect::<Result<_, _>>()?;
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("header lacks {k}"));
    let int = |k: &str| get(k)?.parse::<usize>().map_err(|e| format!("{k}: {e}"));
    let real = |k: &str| get(k)?.parse::<f64>().map_err(|e| format!("{k}: {e}"));
    let boundary = match get("boundary")? {
        "periodic" => Boundary::Periodic,
        "dirichlet" => Boundary::Dirichlet,
        other => return Err(format!("unknown boundary {other:?}")),
    };
    Grid::new(
        real("x0")?,
        real("dx")?,
        int("nx")?,
        real("t0")?,
        real("dt")?,
        int("nt")?,
        boundary,
    )
    .map_err(|e| e.to_string())
}

/// The whole file as a string; values use the shortest round-trip form.
pub fn format_field(field: &Field) -> String {
    let g = field.grid();
    let mut out = header(g);
    out.push('\n');
    for n in 0..g.nt {
        let row: Vec<String> = field.slice(n).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_field(text: &str, path: &Path) -> Result<Field, FileError> {
    let parse_err = |line: usize, msg: String| FileError::Parse {
        path: path.to_owned(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let grid = parse_header(first).map_err(|m| parse_err(1, m))?;
    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(i + 1, format!("{s:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != grid.nx {
            return Err(parse_err(
                i + 1,
                format!("expected {} values, found {}", grid.nx, row.len()),
            ));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != grid.nt {
        return Err(parse_err(
            0,
            format!("header declares nt={} but the file has {rows} rows", grid.nt),
        ));
    }
    Field::new(grid, values).map_err(|source| FileError::Core {
        path: path.to_owned(),
        source,
    })
}

pub fn read_field(path: &Path) -> Result<Field, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_field(&text, path)
}

pub fn write_field(field: &Field, path: &Path) -> Result<(), FileError> {
    fs::write(path, format_field(field)).map_err(io_err(path))
}

/// Debug dump of an assembled system: one header row of column labels then
/// `x,t,<features...>,rhs` per row.
pub fn format_system(sys: &LinearSystem) -> String {
    let mut out = String::from("x,t");
    for l in sys.labels() {
        let _ = write!(out, ",{l}");
    }
    out.push_str(",rhs\n");
    for (r, meta) in sys.rows.iter().enumerate() {
        let _ = write!(out, "{:?},{:?}", meta.x, meta.t);
        for v in sys.matrix.row(r).iter() {
            let _ = write!(out, ",{v:?}");
        }
        let _ = writeln!(out, ",{:?}", sys.rhs[r]);
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FileError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> Field {
        let g = Grid::on_interval(0.0, 1.0, 8, 0.3, 4, Boundary::Periodic).unwrap();
        Field::from_fn(g, |x, t| (x - t).sin() / 3.0).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let f = field();
        let back = parse_field(&format_field(&f), Path::new("mem")).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn header_has_every_key() {
        let h = header(field().grid());
        for k in ["nx=8", "nt=4", "x0=", "dx=", "t0=", "dt=", "boundary=periodic"] {
            assert!(h.contains(k), "{h}");
        }
    }

    #[test]
    fn short_row_is_reported_with_line() {
        let mut text = format_field(&field());
        text = text.replacen("\n", "\n1.0,2.0\n", 1);
        match parse_field(&text, Path::new("f.csv")) {
            Err(FileError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_key_rejected() {
        assert!(parse_header("# nx=8 nt=4 x0=0 dx=0.1 t0=0 dt=0.1").is_err());
        assert!(parse_header("nx=8").is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let e = read_field(Path::new("/nonexistent/u.csv")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/u.csv"));
    }
}
