//! File formats: session and metadata TSVs, embedding text files, JSON.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mp2v_core::corpus::{parse_metadata, parse_sessions, MetadataMap, Session};
use mp2v_core::model::{EmbeddingModel, Real};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{io_err, Error, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Reads `user_id<TAB>item1 item2 ...` lines.
pub fn load_sessions(path: &Path) -> Result<Vec<Session>> {
    parse_sessions(&read_to_string(path)?).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `item_id<TAB>value` lines into the attribute `name`.
pub fn load_metadata(name: &str, path: &Path) -> Result<MetadataMap> {
    parse_metadata(name, &read_to_string(path)?).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    let mut w = create(path)?;
    for s in sessions {
        writeln!(w, "{}\t{}", s.user, s.items.join(" ")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `item<TAB>value` pairs; values are written without their attribute prefix.
pub fn write_metadata<'a>(path: &Path, rows: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
    let mut w = create(path)?;
    for (item, value) in rows {
        writeln!(w, "{item}\t{value}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Which table(s) to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Input,
    Output,
    /// Input table at `path`, output table at [`output_path`]`(path)`.
    Both,
}

/// Sibling file holding the output (context) vectors.
pub fn output_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".ctx");
    path.with_file_name(name)
}

fn write_table<F: Real>(path: &Path, tokens: &[String], dim: usize, row: impl Fn(usize) -> Vec<F>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{} {}", tokens.len(), dim).map_err(io_err(path))?;
    for (i, token) in tokens.iter().enumerate() {
        let mut line = String::with_capacity(token.len() + dim * 16);
        line.push_str(token);
        for x in row(i) {
            line.push(' ');
            line.push_str(&format!("{:.9e}", x.to_f64()));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `V D` followed by `token v1 ... vD` lines, one per vocabulary row.
pub fn save_embeddings<F: Real>(model: &EmbeddingModel<F>, tokens: &[String], path: &Path, which: Which) -> Result<()> {
    if tokens.len() != model.rows() {
        return Err(Error::Config(format!(
            "{} tokens for a model with {} rows",
            tokens.len(),
            model.rows()
        )));
    }
    if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.contains(char::is_whitespace)) {
        return Err(Error::Config(format!(
            "token `{bad}` cannot be written: contains whitespace"
        )));
    }
    let dim = model.dim();
    match which {
        Which::Input => write_table(path, tokens, dim, |i| model.input_row(i).to_vec()),
        Which::Output => write_table(path, tokens, dim, |i| model.output_row(i).to_vec()),
        Which::Both => {
            write_table(path, tokens, dim, |i| model.input_row(i).to_vec())?;
            write_table(&output_path(path), tokens, dim, |i| model.output_row(i).to_vec())
        }
    }
}

fn read_table(path: &Path) -> Result<(Vec<String>, usize, Vec<f32>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let header = lines
        .next()
        .ok_or_else(|| bad(1, "empty file".into()))?
        .map_err(io_err(path))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|x| x.parse().map_err(|_| bad(1, format!("bad header `{header}`"))))
        .collect::<Result<_>>()?;
    let [rows, dim] = dims[..] else {
        return Err(bad(1, format!("header must be `V D`, got `{header}`")));
    };
    let mut tokens = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows * dim);
    for (n, line) in lines.enumerate() {
        let lineno = n + 2;
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        if tokens.len() == rows {
            return Err(bad(lineno, format!("more rows than the {rows} declared in the header")));
        }
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default().to_string();
        let before = values.len();
        for f in fields {
            values.push(f.parse::<f32>().map_err(|_| bad(lineno, format!("bad number `{f}`")))?);
        }
        if values.len() - before != dim {
            return Err(bad(
                lineno,
                format!("expected {dim} values for `{token}`, found {}", values.len() - before),
            ));
        }
        tokens.push(token);
    }
    if tokens.len() != rows {
        return Err(bad(
            tokens.len() + 2,
            format!("header declares {rows} rows but the file has {}", tokens.len()),
        ));
    }
    Ok((tokens, dim, values))
}

/// Loads one table into the input vectors of a model (output vectors zero).
pub fn load_embeddings(path: &Path) -> Result<(Vec<String>, EmbeddingModel<f32>)> {
    let (tokens, dim, values) = read_table(path)?;
    let rows = tokens.len();
    let model = EmbeddingModel::from_tables(rows, dim, values, vec![0.0; rows * dim])?;
    Ok((tokens, model))
}

/// Loads input and output tables written with [`Which::Both`].
pub fn load_model(path: &Path) -> Result<(Vec<String>, EmbeddingModel<f32>)> {
    let (tokens, dim, input) = read_table(path)?;
    let ctx = output_path(path);
    let (ctx_tokens, ctx_dim, output) = read_table(&ctx)?;
    if ctx_tokens != tokens || ctx_dim != dim {
        return Err(Error::Config(format!(
            "{} does not match {}",
            ctx.display(),
            path.display()
        )));
    }
    let model = EmbeddingModel::from_tables(tokens.len(), dim, input, output)?;
    Ok((tokens, model))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_to_string(path)?).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
