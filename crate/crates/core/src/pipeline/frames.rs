//! Frame sources: a directory of `.pgm` files or a concatenated PGM byte stream.

use std::io::Read;
use std::path::{Path, PathBuf};

use crate::data::{decode_gray_image, decode_pgm_prefix, GrayImage};
use crate::error::{Error, PgmError, Result};

/// Bytes to buffer before a header error is taken as final.
const MAX_HEADER_PROBE: usize = 4096;

#[derive(Debug)]
pub struct Frame {
    pub id: String,
    pub image: Result<GrayImage>,
}

/// `.pgm` files of a directory in lexicographic file-name order.
pub struct DirectoryFrames {
    files: std::vec::IntoIter<PathBuf>,
}

impl DirectoryFrames {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let is_pgm = path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
            if is_pgm && path.is_file() {
                files.push(path);
            }
        }
        files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        Ok(DirectoryFrames {
            files: files.into_iter(),
        })
    }
}

impl Iterator for DirectoryFrames {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        let path = self.files.next()?;
        let id = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let image = std::fs::read(&path)
            .map_err(|e| Error::io(&path, e))
            .and_then(|bytes| decode_gray_image(&bytes).map_err(Error::from));
        Some(Frame { id, image })
    }
}

/// Back-to-back binary PGM images read incrementally from a byte stream.
///
/// Frame ids are 1-based sequence numbers. A frame whose header cannot be
/// parsed ends the stream, since the next frame boundary is unknown.
pub struct StreamFrames<R> {
    reader: R,
    buf: Vec<u8>,
    eof: bool,
    done: bool,
    count: usize,
}

impl<R: Read> StreamFrames<R> {
    pub fn new(reader: R) -> Self {
        StreamFrames {
            reader,
            buf: Vec::new(),
            eof: false,
            done: false,
            count: 0,
        }
    }

    fn fill(&mut self) -> std::io::Result<()> {
        let mut chunk = [0u8; 64 * 1024];
        loop {
            match self.reader.read(&mut chunk) {
                Ok(0) => {
                    self.eof = true;
                    return Ok(());
                }
                Ok(n) => {
                    self.buf.extend_from_slice(&chunk[..n]);
                    return Ok(());
                }
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
    }
}

impl<R: Read> Iterator for StreamFrames<R> {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        if self.done {
            return None;
        }
        loop {
            let start = self
                .buf
                .iter()
                .position(|b| !b.is_ascii_whitespace())
                .unwrap_or(self.buf.len());
            self.buf.drain(..start);
            if self.buf.is_empty() && self.eof {
                self.done = true;
                return None;
            }
            let id = format!("{:06}", self.count + 1);
            let outcome = if self.buf.len() < 2 {
                Err(PgmError::BadMagic)
            } else {
                decode_pgm_prefix(&self.buf)
            };
            match outcome {
                Ok((image, used)) => {
                    self.buf.drain(..used);
                    self.count += 1;
                    return Some(Frame { id, image: Ok(image) });
                }
                Err(e) => {
                    // A header cut mid-token can parse as something else
                    // entirely, so short buffers are never judged final.
                    let incomplete = self.buf.len() < MAX_HEADER_PROBE
                        || matches!(e, PgmError::Truncated { .. });
                    if incomplete && !self.eof {
                        if let Err(io) = self.fill() {
                            self.done = true;
                            self.count += 1;
                            return Some(Frame {
                                id,
                                image: Err(Error::io("<stdin>", io)),
                            });
                        }
                        continue;
                    }
                    self.done = true;
                    self.count += 1;
                    return Some(Frame { id, image: Err(e.into()) });
                }
            }
        }
    }
}
