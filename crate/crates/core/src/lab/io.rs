//! Shot files.
//!
//! Two layouts carry the same content, a header with the run configuration
//! followed by the records in shot order.
//!
//! JSON lines: the first line is the header object
//! `{"format": "photosub-shots", "version": 1, "config": {...}}`, then one
//! record object per line.
//!
//! Binary, little-endian throughout:
//!
//! | offset      | size | field                         |
//! |-------------|------|-------------------------------|
//! | 0           | 8    | magic `PSUBSHOT`              |
//! | 8           | 4    | version, u32                  |
//! | 12          | 4    | header length `h`, u32        |
//! | 16          | h    | header JSON, UTF-8            |
//! | 16 + h      | 8    | record count, u64             |
//! | 24 + h      | 36 n | records                       |
//!
//! Each 36-byte record holds `n_true, s_r, s_t, m_r, m_t` as u32 followed by
//! `v_r, v_t` as f64.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ShotRecord};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "photosub-shots";
pub const FORMAT_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 8] = b"PSUBSHOT";
pub const RECORD_BYTES: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShotFormat {
    JsonLines,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotFileHeader {
    pub format: String,
    pub version: u32,
    pub config: ExperimentConfig,
}

impl ShotFileHeader {
    pub fn new(config: ExperimentConfig) -> Self {
        Self { format: FORMAT_NAME.into(), version: FORMAT_VERSION, config }
    }

    fn check(&self, location: impl Fn() -> String) -> Result<()> {
        if self.format != FORMAT_NAME {
            return Err(parse_error(location(), format!("unknown format tag {:?}", self.format)));
        }
        if self.version != FORMAT_VERSION {
            return Err(parse_error(location(), format!("unsupported version {}", self.version)));
        }
        self.config.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotFile {
    pub header: ShotFileHeader,
    pub records: Vec<ShotRecord>,
}

fn parse_error(location: String, message: impl Into<String>) -> Error {
    Error::Parse { location, message: message.into() }
}

impl ShotFile {
    pub fn new(config: ExperimentConfig, records: Vec<ShotRecord>) -> Self {
        Self { header: ShotFileHeader::new(config), records }
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.header.config
    }

    pub fn write<W: Write>(&self, out: W, format: ShotFormat) -> Result<()> {
        match format {
            ShotFormat::JsonLines => self.write_json_lines(out),
            ShotFormat::Binary => self.write_binary(out),
        }
    }

    fn write_json_lines<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::domain("shot file header exceeds 4 GiB"))?;
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&header_len.to_le_bytes())?;
        out.write_all(&header)?;
        out.write_all(&(self.records.len() as u64).to_le_bytes())?;
        let mut buf = [0u8; RECORD_BYTES];
        for r in &self.records {
            for (i, x) in [r.n_true, r.s_r, r.s_t, r.m_r, r.m_t].iter().enumerate() {
                buf[4 * i..4 * i + 4].copy_from_slice(&x.to_le_bytes());
            }
            buf[20..28].copy_from_slice(&r.v_r.to_le_bytes());
            buf[28..36].copy_from_slice(&r.v_t.to_le_bytes());
            out.write_all(&buf)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses either layout, chosen by the leading magic bytes.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(BINARY_MAGIC) {
            Self::parse_binary(bytes)
        } else {
            Self::parse_json_lines(bytes)
        }
    }

    fn parse_json_lines(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| {
            parse_error(format!("byte {}", e.valid_up_to()), "file is neither binary nor UTF-8 text")
        })?;
        let mut lines = text.split_inclusive('\n').enumerate();
        let (_, first) = lines.next().ok_or_else(|| parse_error("line 1".into(), "empty file"))?;
        let header: ShotFileHeader = serde_json::from_str(first)
            .map_err(|e| parse_error("line 1".into(), format!("bad header: {e}")))?;
        header.check(|| "line 1".into())?;

        let expected = header.config.shots;
        let mut records = Vec::with_capacity(expected.min(1 << 24) as usize);
        for (i, line) in lines {
            let location = || format!("line {}", i + 1);
            if !line.ends_with('\n') {
                return Err(parse_error(location(), "truncated record (missing newline)"));
            }
            let r: ShotRecord = serde_json::from_str(line)
                .map_err(|e| parse_error(location(), format!("bad record: {e}")))?;
            records.push(r);
        }
        if records.len() as u64 != expected {
            return Err(parse_error(
                format!("line {}", records.len() + 2),
                format!("expected {expected} records, found {}", records.len()),
            ));
        }
        Ok(Self { header, records })
    }

    fn parse_binary(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: BINARY_MAGIC.len() };
        let version = u32::from_le_bytes(cursor.take::<4>("version")?);
        if version != FORMAT_VERSION {
            return Err(parse_error("byte 8".into(), format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(cursor.take::<4>("header length")?) as usize;
        let header_bytes = cursor.slice(header_len, "header")?;
        let header: ShotFileHeader = serde_json::from_slice(header_bytes)
            .map_err(|e| parse_error("byte 16".into(), format!("bad header: {e}")))?;
        header.check(|| "byte 16".into())?;

        let count_at = cursor.pos;
        let count = u64::from_le_bytes(cursor.take::<8>("record count")?);
        if count != header.config.shots {
            return Err(parse_error(
                format!("byte {count_at}"),
                format!("record count {count} disagrees with configured shots {}", header.config.shots),
            ));
        }
        let body = bytes.len() - cursor.pos;
        let full = body / RECORD_BYTES;
        if (full as u64) < count {
            return Err(parse_error(
                format!("byte {}", cursor.pos + full * RECORD_BYTES),
                format!("truncated after {full} of {count} records"),
            ));
        }
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut u = [0u32; 5];
            for x in &mut u {
                *x = u32::from_le_bytes(cursor.take::<4>("record")?);
            }
            let v_r = f64::from_le_bytes(cursor.take::<8>("record")?);
            let v_t = f64::from_le_bytes(cursor.take::<8>("record")?);
            records.push(ShotRecord { n_true: u[0], s_r: u[1], s_t: u[2], m_r: u[3], m_t: u[4], v_r, v_t });
        }
        if cursor.pos != bytes.len() {
            return Err(parse_error(
                format!("byte {}", cursor.pos),
                format!("{} trailing bytes after the last record", bytes.len() - cursor.pos),
            ));
        }
        Ok(Self { header, records })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn slice(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|end| *end <= self.bytes.len()).ok_or_else(|| {
            parse_error(format!("byte {}", self.pos), format!("unexpected end of file reading {what}"))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.slice(N, what)?);
        Ok(out)
    }
}

pub fn write_shot_file(path: &Path, file: &ShotFile, format: ShotFormat) -> Result<()> {
    let out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write(std::io::BufWriter::new(out), format).map_err(|e| match e {
        Error::Stream(source) => Error::io(path, source),
        other => other,
    })
}

pub fn read_shot_file(path: &Path) -> Result<ShotFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ShotFile::parse(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::run_experiment;

    fn sample() -> ShotFile {
        let cfg = ExperimentConfig { shots: 50, ..ExperimentConfig::default() };
        let mut records = run_experiment(&cfg).unwrap();
        records[3].v_t = 0.1 + 0.2;
        ShotFile::new(cfg, records)
    }

    fn encode(file: &ShotFile, format: ShotFormat) -> Vec<u8> {
        let mut buf = Vec::new();
        file.write(&mut buf, format).unwrap();
        buf
    }

    #[test]
    fn both_layouts_round_trip_exactly() {
        let file = sample();
        for format in [ShotFormat::JsonLines, ShotFormat::Binary] {
            assert_eq!(ShotFile::parse(&encode(&file, format)).unwrap(), file);
        }
    }

    #[test]
    fn binary_size_matches_layout() {
        let file = sample();
        let header = serde_json::to_vec(&file.header).unwrap();
        assert_eq!(encode(&file, ShotFormat::Binary).len(), 24 + header.len() + 50 * RECORD_BYTES);
    }

    #[test]
    fn truncated_binary_names_offset() {
        let bytes = encode(&sample(), ShotFormat::Binary);
        let cut = bytes.len() - 10;
        match ShotFile::parse(&bytes[..cut]) {
            Err(Error::Parse { location, .. }) => {
                assert_eq!(location, format!("byte {}", bytes.len() - RECORD_BYTES));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(ShotFile::parse(&bytes[..12]), Err(Error::Parse { .. })));
    }

    #[test]
    fn truncated_json_lines_names_line() {
        let bytes = encode(&sample(), ShotFormat::JsonLines);
        let text = String::from_utf8(bytes).unwrap();
        let cut = &text[..text.len() - 5];
        match ShotFile::parse(cut.as_bytes()) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 51"),
            other => panic!("{other:?}"),
        }
        let lines: Vec<&str> = text.split_inclusive('\n').take(40).collect();
        match ShotFile::parse(lines.concat().as_bytes()) {
            Err(Error::Parse { location, message }) => {
                assert_eq!(location, "line 41");
                assert!(message.contains("expected 50"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(ShotFile::parse(b""), Err(Error::Parse { .. })));
        assert!(matches!(ShotFile::parse(b"{\"format\": 3}\n"), Err(Error::Parse { .. })));
        let mut bytes = encode(&sample(), ShotFormat::JsonLines);
        let pos = bytes.iter().position(|b| *b == b'\n').unwrap() + 3;
        bytes[pos] = b'#';
        match ShotFile::parse(&bytes) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.bin");
        let file = sample();
        write_shot_file(&path, &file, ShotFormat::Binary).unwrap();
        assert_eq!(read_shot_file(&path).unwrap(), file);
        let missing = dir.path().join("nope.jsonl");
        assert!(matches!(read_shot_file(&missing), Err(Error::Io { .. })));
    }
}
