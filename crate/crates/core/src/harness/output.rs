use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::mesh::{sig17, Grid};
use crate::stepper::Snapshot;

/// Ordered `key=value` lines for `metadata.txt`.
#[derive(Debug, Clone, Default)]
pub struct MetadataWriter {
    entries: Vec<(String, String)>,
}

impl MetadataWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn extend(&mut self, pairs: impl IntoIterator<Item = (String, String)>) -> &mut Self {
        for (k, v) in pairs {
            self.set(k, v);
        }
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_metadata(dir, &self.entries)
    }
}

pub fn write_metadata(dir: &Path, entries: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("metadata.txt"))?);
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format snapshot table: `t,x,pre,post` in 1D, `t,x,y,pre,post` in 2D.
pub fn write_field_series<W: Write>(mut w: W, snapshots: &[Snapshot]) -> Result<()> {
    let two_d = snapshots.first().is_some_and(|s| s.post.grid().dim() == 2);
    if two_d {
        writeln!(w, "t,x,y,pre,post")?;
    } else {
        writeln!(w, "t,x,pre,post")?;
    }
    for s in snapshots {
        let g: Grid = s.post.grid();
        let t = sig17(s.t);
        for (k, (p, q)) in s.pre.values().iter().zip(s.post.values()).enumerate() {
            let (x, y) = g.coords(k);
            if two_d {
                writeln!(
                    w,
                    "{t},{},{},{},{}",
                    sig17(x),
                    sig17(y),
                    sig17(*p),
                    sig17(*q)
                )?;
            } else {
                writeln!(w, "{t},{},{},{}", sig17(x), sig17(*p), sig17(*q))?;
            }
        }
    }
    Ok(())
}
