//! Atomic file output: everything is rendered first, then each file is
//! written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;

use crate::exit::{data, Exit};

pub type Files = Vec<(String, Vec<u8>)>;

pub fn write_all(dir: &Path, files: &Files) -> Result<(), Exit> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(data)?;
    for (name, bytes) in files {
        let target = dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(dir)
            .with_context(|| format!("creating temporary file in {}", dir.display()))
            .map_err(data)?;
        tmp.write_all(bytes).and_then(|_| tmp.flush()).context("writing output").map_err(data)?;
        tmp.persist(&target).with_context(|| format!("writing {}", target.display())).map_err(data)?;
    }
    Ok(())
}

/// Small CSV builder with LF line endings.
pub struct Csv(csv::Writer<Vec<u8>>);

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self(w)
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.0.write_record(fields).expect("in-memory write");
    }

    pub fn finish(self) -> Vec<u8> {
        self.0.into_inner().expect("in-memory flush")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
