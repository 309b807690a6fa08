//! Output files that only appear once complete.
//!
//! Data goes to a temporary file beside the destination and is renamed into
//! place on commit; dropping an uncommitted output deletes the temporary, so a
//! failed run leaves nothing behind.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use tempfile::NamedTempFile;

enum Sink {
    Stdout(BufWriter<std::io::Stdout>),
    File {
        dest: PathBuf,
        tmp: BufWriter<NamedTempFile>,
    },
}

pub struct AtomicOutput {
    sink: Sink,
}

/// `<out>.meta.json`
pub fn meta_path(dest: &Path) -> PathBuf {
    let mut name = dest.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn temp_beside(dest: &Path) -> anyhow::Result<NamedTempFile> {
    let dir = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    builder.prefix(".sarsim-partial-");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    builder
        .tempfile_in(dir)
        .with_context(|| format!("creating output in {}", dir.display()))
}

impl AtomicOutput {
    /// `-` writes to stdout.
    pub fn create(dest: &Path) -> anyhow::Result<Self> {
        let sink = if dest == Path::new("-") {
            Sink::Stdout(BufWriter::new(std::io::stdout()))
        } else {
            Sink::File {
                dest: dest.to_path_buf(),
                tmp: BufWriter::with_capacity(1 << 20, temp_beside(dest)?),
            }
        };
        Ok(Self { sink })
    }

    pub fn commit(self) -> anyhow::Result<()> {
        self.finish().map(|_| ())
    }

    /// Commits the data, then writes the metadata sidecar. Stdout runs have
    /// no sidecar.
    pub fn commit_with_meta(self, meta: &[u8]) -> anyhow::Result<()> {
        let Some(dest) = self.finish()? else {
            return Ok(());
        };
        let meta_dest = meta_path(&dest);
        let mut tmp = temp_beside(&meta_dest)?;
        let written = tmp.write_all(meta).and_then(|()| tmp.flush());
        if let Err(e) = written.map_err(anyhow::Error::from).and_then(|()| {
            tmp.persist(&meta_dest)
                .map(|_| ())
                .map_err(|e| anyhow::Error::from(e.error))
        }) {
            // the data file alone would be unaccounted for
            let _ = std::fs::remove_file(&dest);
            return Err(e.context(format!("writing {}", meta_dest.display())));
        }
        Ok(())
    }

    fn finish(self) -> anyhow::Result<Option<PathBuf>> {
        match self.sink {
            Sink::Stdout(mut w) => {
                w.flush()?;
                Ok(None)
            }
            Sink::File { dest, tmp } => {
                let tmp = tmp.into_inner().map_err(|e| e.into_error())?;
                tmp.as_file().sync_data().ok();
                tmp.persist(&dest)
                    .map_err(|e| anyhow::Error::from(e.error))
                    .with_context(|| format!("writing {}", dest.display()))?;
                Ok(Some(dest))
            }
        }
    }
}

impl Write for AtomicOutput {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match &mut self.sink {
            Sink::Stdout(w) => w.write(buf),
            Sink::File { tmp, .. } => tmp.write(buf),
        }
    }

    fn write_all(&mut self, buf: &[u8]) -> std::io::Result<()> {
        match &mut self.sink {
            Sink::Stdout(w) => w.write_all(buf),
            Sink::File { tmp, .. } => tmp.write_all(buf),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match &mut self.sink {
            Sink::Stdout(w) => w.flush(),
            Sink::File { tmp, .. } => tmp.flush(),
        }
    }
}
