//! Gzip-aware file helpers shared by corpus, embedding, and report I/O.
//! Compression is keyed purely on the `.gz` extension.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

pub(crate) fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

pub(crate) fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if is_gz(path) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

enum Sink {
    Plain(BufWriter<File>),
    Gz(BufWriter<GzEncoder<File>>),
}

/// Buffered output file; gzip-compressed when the path ends in `.gz`.
/// Must be closed with [`OutFile::finish`] so the gzip trailer is written
/// and errors surface instead of being swallowed by `Drop`.
pub(crate) struct OutFile {
    sink: Sink,
    path: PathBuf,
}

impl OutFile {
    pub(crate) fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let sink = if is_gz(path) {
            Sink::Gz(BufWriter::new(GzEncoder::new(file, Compression::default())))
        } else {
            Sink::Plain(BufWriter::new(file))
        };
        Ok(OutFile {
            sink,
            path: path.to_path_buf(),
        })
    }

    pub(crate) fn finish(self) -> Result<()> {
        let OutFile { sink, path } = self;
        let io = |e| Error::io(&path, e);
        match sink {
            Sink::Plain(mut w) => w.flush().map_err(io),
            Sink::Gz(w) => w
                .into_inner()
                .map_err(|e| Error::io(&path, e.into_error()))?
                .finish()
                .map(drop)
                .map_err(io),
        }
    }

}

impl Write for OutFile {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match &mut self.sink {
            Sink::Plain(w) => w.write(buf),
            Sink::Gz(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match &mut self.sink {
            Sink::Plain(w) => w.flush(),
            Sink::Gz(w) => w.flush(),
        }
    }
}
