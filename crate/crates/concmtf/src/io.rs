//! Text formats for tensors, matrices, vocabularies and model directories.
//!
//! Tensor files start with `#tensor3 I J K` followed by one
//! `i<TAB>j<TAB>k<TAB>value` line per stored entry (0-based). Matrix files
//! start with `#matrix R C` followed by `R` tab-separated rows. Values are
//! written in the shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use concmtf_core::corpus::Vocabulary;
use concmtf_core::{CooTensor, FactorModel, Matrix, ModelKind, Tensor3};

pub fn format_tensor_entries(dims: (usize, usize, usize), entries: impl Iterator<Item = (usize, usize, usize, f64)>) -> String {
    let mut out = format!("#tensor3 {} {} {}\n", dims.0, dims.1, dims.2);
    for (i, j, k, v) in entries {
        writeln!(out, "{i}\t{j}\t{k}\t{v}").unwrap();
    }
    out
}

pub fn format_coo(t: &CooTensor) -> String {
    format_tensor_entries(t.dims(), t.entries().iter().copied())
}

/// Nonzero entries of a dense tensor in storage order.
pub fn format_dense_tensor(t: &Tensor3) -> String {
    let (ni, nj, nk) = t.dims();
    let entries = (0..nk)
        .flat_map(move |k| (0..nj).flat_map(move |j| (0..ni).map(move |i| (i, j, k))))
        .map(|(i, j, k)| (i, j, k, t.get(i, j, k)))
        .filter(|e| e.3 != 0.0);
    format_tensor_entries(t.dims(), entries)
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("#matrix {} {}\n", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|c| m.get(r, c).to_string()).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

fn parse_header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, tag: &str, n: usize) -> Result<Vec<usize>> {
    let (_, first) = lines.next().with_context(|| format!("missing `{tag}` header"))?;
    let mut parts = first.split_whitespace();
    if parts.next() != Some(tag) {
        bail!("line 1: expected `{tag}` header, found {first:?}");
    }
    let dims: Vec<usize> = parts
        .map(|p| p.parse::<usize>().with_context(|| format!("line 1: bad dimension {p:?}")))
        .collect::<Result<_>>()?;
    if dims.len() != n {
        bail!("line 1: `{tag}` header needs {n} dimensions, found {}", dims.len());
    }
    Ok(dims)
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().with_context(|| format!("line {line}: bad value {s:?}"))?;
    if !v.is_finite() {
        bail!("line {line}: non-finite value {s:?}");
    }
    Ok(v)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(n, l)| (n + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

type Entries = ((usize, usize, usize), Vec<(usize, usize, usize, f64)>);

fn parse_tensor_entries(text: &str) -> Result<Entries> {
    let mut lines = content_lines(text);
    let d = parse_header(&mut lines, "#tensor3", 3)?;
    let dims = (d[0], d[1], d[2]);
    let mut entries = Vec::new();
    for (n, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            bail!("line {n}: expected 4 tab-separated fields, found {}", f.len());
        }
        let idx = |s: &str| s.trim().parse::<usize>().with_context(|| format!("line {n}: bad index {s:?}"));
        let (i, j, k) = (idx(f[0])?, idx(f[1])?, idx(f[2])?);
        if i >= dims.0 || j >= dims.1 || k >= dims.2 {
            bail!("line {n}: index ({i}, {j}, {k}) outside {dims:?}");
        }
        entries.push((i, j, k, parse_value(f[3], n)?));
    }
    Ok((dims, entries))
}

pub fn parse_coo(text: &str) -> Result<CooTensor> {
    let (dims, entries) = parse_tensor_entries(text)?;
    Ok(CooTensor::new(dims, entries)?)
}

/// Dense tensor from a tensor file; repeated indices keep the last value.
pub fn parse_dense_tensor(text: &str) -> Result<Tensor3> {
    let (dims, entries) = parse_tensor_entries(text)?;
    let mut t = Tensor3::zeros(dims);
    for (i, j, k, v) in entries {
        t.set(i, j, k, v);
    }
    Ok(t)
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = content_lines(text);
    let d = parse_header(&mut lines, "#matrix", 2)?;
    let (rows, cols) = (d[0], d[1]);
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (n, line) in lines {
        let f: Vec<&str> = if cols == 0 { Vec::new() } else { line.split('\t').collect() };
        if f.len() != cols {
            bail!("line {n}: expected {cols} columns, found {}", f.len());
        }
        for s in f {
            values.push(parse_value(s, n)?);
        }
        seen += 1;
    }
    // rows of a zero-width matrix are blank and therefore skipped
    if cols > 0 && seen != rows {
        bail!("matrix header declares {rows} rows, found {seen}");
    }
    Ok(Matrix::new(rows, cols, values)?)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_dense_tensor(path: &Path) -> Result<Tensor3> {
    parse_dense_tensor(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn format_vocab(v: &Vocabulary) -> String {
    let mut out = String::new();
    for (i, (w, c)) in v.words().iter().zip(v.counts()).enumerate() {
        writeln!(out, "{i}\t{w}\t{c}").unwrap();
    }
    out
}

/// Tag list as `index<TAB>tag<TAB>in-vocabulary token count`.
pub fn format_tags(tags: &[(String, u64)]) -> String {
    let mut out = String::new();
    for (i, (t, c)) in tags.iter().enumerate() {
        writeln!(out, "{i}\t{t}\t{c}").unwrap();
    }
    out
}

/// Second column of an `index<TAB>name<TAB>count` listing, checked to be
/// numbered 0, 1, 2, ...
pub fn parse_names(text: &str) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 {
            bail!("line {n}: expected index and name");
        }
        let idx: usize = f[0].trim().parse().with_context(|| format!("line {n}: bad index {:?}", f[0]))?;
        if idx != names.len() {
            bail!("line {n}: expected index {}, found {idx}", names.len());
        }
        names.push(f[1].to_string());
    }
    Ok(names)
}

pub const FACTOR_FILES: [&str; 4] = ["A.tsv", "B.tsv", "C.tsv", "D.tsv"];
pub const CORE_FILE: &str = "core.tsv";

pub fn write_model(dir: &Path, m: &FactorModel) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, f) in FACTOR_FILES.iter().zip([&m.a, &m.b, &m.c, &m.d]) {
        write_text(&dir.join(name), &format_matrix(f))?;
    }
    write_text(&dir.join(CORE_FILE), &format_dense_tensor(&m.core))
}

pub fn read_model(dir: &Path, kind: ModelKind) -> Result<FactorModel> {
    if !dir.is_dir() {
        bail!("model directory {} does not exist", dir.display());
    }
    let [a, b, c, d] = FACTOR_FILES.map(|f| read_matrix(&dir.join(f)));
    let m = FactorModel { a: a?, b: b?, c: c?, d: d?, core: read_dense_tensor(&dir.join(CORE_FILE))?, kind };
    m.validate().with_context(|| format!("model in {}", dir.display()))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_roundtrip() {
        let m = Matrix::from_rows(&[&[0.1, -2.5e-300], &[1.0 / 3.0, 7.0]]);
        let text = format_matrix(&m);
        assert!(text.starts_with("#matrix 2 2\n"));
        assert_eq!(parse_matrix(&text).unwrap(), m);
        let empty = Matrix::zeros(3, 0);
        assert_eq!(parse_matrix(&format_matrix(&empty)).unwrap(), empty);
    }

    #[test]
    fn tensor_roundtrip() {
        let coo = CooTensor::new((2, 3, 1), vec![(1, 2, 0, 2.0), (0, 0, 0, 0.5)]).unwrap();
        let text = format_coo(&coo);
        assert_eq!(text, "#tensor3 2 3 1\n0\t0\t0\t0.5\n1\t2\t0\t2\n");
        assert_eq!(parse_coo(&text).unwrap(), coo);
        let mut t = Tensor3::zeros((2, 2, 2));
        t.set(1, 0, 1, -0.25);
        assert_eq!(parse_dense_tensor(&format_dense_tensor(&t)).unwrap(), t);
    }

    #[test]
    fn malformed_files() {
        assert!(parse_matrix("#matrix 2 2\n1\t2\n").is_err());
        assert!(parse_matrix("#matrix 1 2\n1\tx\n").is_err());
        assert!(parse_coo("#tensor3 1 1 1\n1\t0\t0\t1\n").is_err());
        assert!(parse_coo("#tensor 1 1 1\n").is_err());
        assert!(parse_coo("#tensor3 1 1\n").is_err());
        assert!(parse_names("0\ta\t1\n2\tb\t1\n").is_err());
        assert_eq!(parse_names("0\ta\t3\n1\tb\t1\n").unwrap(), vec!["a", "b"]);
    }
}
