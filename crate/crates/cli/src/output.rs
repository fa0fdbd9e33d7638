//! CSV tables and the `key=value` summary, written atomically.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Shortest form that still round-trips: 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column-major table with a header row.
pub struct Table<'a> {
    header: Vec<&'a str>,
    columns: Vec<&'a [f64]>,
}

impl<'a> Table<'a> {
    pub fn new() -> Self {
        Self { header: Vec::new(), columns: Vec::new() }
    }

    pub fn column(mut self, name: &'a str, values: &'a [f64]) -> Self {
        if let Some(first) = self.columns.first() {
            assert_eq!(first.len(), values.len(), "column {name} has the wrong length");
        }
        self.header.push(name);
        self.columns.push(values);
        self
    }

    pub fn render(&self) -> String {
        let rows = self.columns.first().map_or(0, |c| c.len());
        let mut s = self.header.join(",");
        s.push('\n');
        for i in 0..rows {
            let row: Vec<String> = self.columns.iter().map(|c| fmt_num(c[i])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

impl Default for Table<'_> {
    fn default() -> Self {
        Self::new()
    }
}

/// Parses a table written by [`Table`]: header names and columns.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or("empty table")?.split(',').map(str::to_string).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", n + 1, cells.len(), header.len()));
        }
        for (col, cell) in columns.iter_mut().zip(cells) {
            col.push(cell.parse().map_err(|_| format!("row {}: bad number `{cell}`", n + 1))?);
        }
    }
    Ok((header, columns))
}

/// Ordered `key=value` lines.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.text(key, fmt_num(value))
    }

    /// `none` when absent.
    pub fn opt(&mut self, key: impl Into<String>, value: Option<f64>) -> &mut Self {
        match value {
            Some(v) => self.num(key, v),
            None => self.text(key, "none"),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        write_atomic(&dir.join("summary.txt"), self.render().as_bytes())
    }
}

/// Parses `key=value` lines back into pairs.
pub fn read_summary(text: &str) -> Vec<(String, String)> {
    text.lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
