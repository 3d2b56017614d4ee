//! CSV helpers with transparent gzip on `.gz` paths.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::{Compression, GzBuilder};

use crate::error::{Error, Result};

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Buffered reader that inflates `.gz` files.
pub fn open(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let inner: Box<dyn Read + Send> = if is_gz(path) {
        Box::new(MultiGzDecoder::new(BufReader::with_capacity(1 << 16, f)))
    } else {
        Box::new(f)
    };
    Ok(Box::new(BufReader::with_capacity(1 << 16, inner)))
}

/// Output file, deflated for `.gz` paths with a timestamp-free header so
/// identical content yields identical bytes.
pub enum Sink {
    Plain(BufWriter<File>),
    Gz(GzEncoder<BufWriter<File>>),
}

impl Sink {
    /// Flushes everything and writes the gzip trailer.
    pub fn finish(self) -> std::io::Result<()> {
        match self {
            Sink::Plain(mut w) => w.flush(),
            Sink::Gz(enc) => enc.finish()?.flush(),
        }
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match self {
            Sink::Plain(w) => w.write(buf),
            Sink::Gz(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match self {
            Sink::Plain(w) => w.flush(),
            Sink::Gz(w) => w.flush(),
        }
    }
}

pub fn create(path: &Path) -> Result<Sink> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let buf = BufWriter::with_capacity(1 << 16, f);
    Ok(if is_gz(path) {
        Sink::Gz(GzBuilder::new().mtime(0).write(buf, Compression::default()))
    } else {
        Sink::Plain(buf)
    })
}

pub fn csv_reader(path: &Path) -> Result<csv::Reader<Box<dyn BufRead + Send>>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<Sink>> {
    Ok(csv::WriterBuilder::new().from_writer(create(path)?))
}

/// Flushes a CSV writer and finalizes its file.
pub fn finish_csv(path: &Path, w: csv::Writer<Sink>) -> Result<()> {
    let sink = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    sink.finish().map_err(|e| Error::io(path, e))
}

/// Positions of `required` columns in a header row.
pub fn columns(path: &Path, headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>> {
    required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.to_string(),
                })
        })
        .collect()
}

pub fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn parse_field<T>(path: &Path, line: u64, raw: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| parse_error(path, line, format!("cannot parse `{raw}`: {e}")))
}

/// Formats a float with the shortest representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
