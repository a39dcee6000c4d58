//! Minimal TSV plumbing shared by all file formats: header check, line
//! iteration with 1-based numbers, and the `\t` / `\n` / `\\` field escapes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.peek() {
                Some('t') => {
                    out.push('\t');
                    chars.next();
                }
                Some('n') => {
                    out.push('\n');
                    chars.next();
                }
                Some('\\') => {
                    out.push('\\');
                    chars.next();
                }
                _ => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Splits `contents` into data lines after verifying the header. Yields
/// `(line_number, fields)`; a trailing empty line is ignored.
pub(crate) fn data_lines<'a>(
    path: &Path,
    contents: &'a str,
    header: &[&str],
) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = contents.split('\n');
    let first = lines.next().unwrap_or("");
    let expected = header.join("\t");
    if first.trim_end_matches('\r') != expected {
        return Err(Error::format(
            path,
            1,
            format!("expected header `{}`", expected.replace('\t', "\\t")),
        ));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(Error::format(
                path,
                i + 2,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        out.push((i + 2, fields));
    }
    Ok(out)
}

pub(crate) fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}
