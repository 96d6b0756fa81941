use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::stability::{AxisUnit, StabilityDiagram, StabilityGrid};

pub const DIAGRAM_HEADER: [&str; 3] = ["deps_i_ueV", "deps_j_ueV", "signal"];

/// Nine significant digits in scientific notation, independent of locale.
pub fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// CSV table assembled in memory.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    rows: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).map_err(csv_error)?;
        Ok(Self { writer, rows: 0 })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(csv_error)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer
            .into_inner()
            .map_err(|e| Error::InvalidInput(format!("csv: {}", e.error())))
    }
}

/// Diagram as `deps_i_ueV,deps_j_ueV,signal` rows, i fastest. Voltage axes are
/// converted with the lever arms first.
pub fn diagram_csv(diagram: &StabilityDiagram) -> Result<Vec<u8>> {
    let d = diagram.to_energy()?;
    let mut table = Table::new(&DIAGRAM_HEADER)?;
    for (j, y) in d.grid.axis_j.iter().enumerate() {
        for (i, x) in d.grid.axis_i.iter().enumerate() {
            table.row([sci(*x), sci(*y), sci(d.at(i, j))])?;
        }
    }
    table.into_bytes()
}

/// Parses a diagram CSV written row by row with the i axis varying fastest.
pub fn read_diagram_csv<R: Read>(reader: R) -> Result<StabilityDiagram> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != DIAGRAM_HEADER {
        return Err(Error::InvalidInput(format!(
            "diagram header must be `{}`, got `{}`",
            DIAGRAM_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut triples = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = k + 2;
        if record.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "line {line}: expected 3 fields, got {}",
                record.len()
            )));
        }
        let mut v = [0.0; 3];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field.parse().map_err(|_| {
                Error::InvalidInput(format!("line {line}: `{field}` is not a number"))
            })?;
        }
        triples.push(v);
    }
    let Some(first) = triples.first() else {
        return Err(Error::InvalidInput("diagram CSV has no rows".into()));
    };
    let ni = triples.iter().take_while(|v| v[1] == first[1]).count();
    if triples.len() % ni != 0 {
        return Err(Error::InvalidInput(format!(
            "{} rows do not form a grid with {ni} points per row",
            triples.len()
        )));
    }
    let axis_i: Vec<f64> = triples[..ni].iter().map(|v| v[0]).collect();
    let axis_j: Vec<f64> = triples.iter().step_by(ni).map(|v| v[1]).collect();
    for (k, v) in triples.iter().enumerate() {
        if v[0] != axis_i[k % ni] || v[1] != axis_j[k / ni] {
            return Err(Error::InvalidInput(format!(
                "line {}: point is off the rectangular grid",
                k + 2
            )));
        }
    }
    let signal = triples.iter().map(|v| v[2]).collect();
    let grid = StabilityGrid::new(axis_i, axis_j, AxisUnit::MicroElectronVolt)?;
    StabilityDiagram::new(grid, [1.0, 1.0], signal, None)
}

/// Writes files through a temporary sibling and a rename. Files already
/// written are removed again if the writer is dropped before `commit`.
#[derive(Default)]
pub struct ArtifactWriter {
    written: Vec<PathBuf>,
    committed: bool,
}

impl ArtifactWriter {
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_has_nine_significant_digits() {
        assert_eq!(sci(1234.5678912), "1.23456789e3");
        assert_eq!(sci(-0.0001), "-1.00000000e-4");
        assert_eq!(sci(0.0), "0.00000000e0");
    }

    #[test]
    fn uncommitted_artifacts_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        {
            let mut w = ArtifactWriter::default();
            w.write(&path, b"x\n").unwrap();
            assert!(path.exists());
        }
        assert!(!path.exists());
        let mut w = ArtifactWriter::default();
        w.write(&path, b"x\n").unwrap();
        assert_eq!(w.commit(), vec![path.clone()]);
        assert_eq!(std::fs::read(&path).unwrap(), b"x\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn ragged_diagram_is_rejected() {
        let text = "deps_i_ueV,deps_j_ueV,signal\n0,0,1\n1,0,1\n0,1,1\n";
        assert!(read_diagram_csv(text.as_bytes()).is_err());
        let text = "x,y,z\n0,0,1\n";
        assert!(read_diagram_csv(text.as_bytes()).is_err());
    }
}
