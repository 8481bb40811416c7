//! Time-tag file formats.
//!
//! Binary format `TTG1`, little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TTG1"
//! 4       2     version (= 1)
//! 6       2     channel_count
//! 8       4     resolution_ps (= 1)
//! 12      4     reserved (written 0, ignored on read)
//! 16      9*n   records: channel u8, time_ps u64
//! ```
//!
//! Records are sorted by time. The CSV alternative has the header line
//! `channel,time_ps` followed by one record per line; its channel count
//! is inferred as `max(channel) + 1`.

use super::{Hist1D, Hist2D, TagStream, TimeTagRecord};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const TTG1_MAGIC: &[u8; 4] = b"TTG1";
pub const TTG1_VERSION: u16 = 1;
pub const TTG1_HEADER_LEN: usize = 16;
pub const TTG1_RECORD_LEN: usize = 9;

/// On-disk representation of a tag stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagFormat {
    Binary,
    Csv,
}

impl TagFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bin" | "binary" => Ok(TagFormat::Binary),
            "csv" => Ok(TagFormat::Csv),
            other => Err(Error::config(format!(
                "unknown tag format {other:?}; expected \"bin\" or \"csv\""
            ))),
        }
    }
}

/// Reads a tag file in the given format.
pub fn read_tags(path: &Path, format: TagFormat) -> Result<TagStream> {
    let file = File::open(path)?;
    read_tags_from(BufReader::new(file), format)
}

/// Reads tags from any byte source.
pub fn read_tags_from<R: Read>(reader: R, format: TagFormat) -> Result<TagStream> {
    match format {
        TagFormat::Binary => read_binary(reader),
        TagFormat::Csv => read_csv(reader),
    }
}

/// Writes a tag file in the given format.
pub fn write_tags(stream: &TagStream, path: &Path, format: TagFormat) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_tags_to(stream, &mut w, format)?;
    w.flush()?;
    Ok(())
}

/// Writes tags to any byte sink.
pub fn write_tags_to<W: Write>(stream: &TagStream, writer: &mut W, format: TagFormat) -> Result<()> {
    match format {
        TagFormat::Binary => write_binary(stream, writer),
        TagFormat::Csv => write_csv(stream, writer),
    }
}

fn read_binary<R: Read>(mut reader: R) -> Result<TagStream> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() < TTG1_HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated header: {} of {TTG1_HEADER_LEN} bytes", bytes.len()),
        });
    }
    if &bytes[0..4] != TTG1_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {:?}, expected \"TTG1\"", &bytes[0..4]),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TTG1_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}, expected {TTG1_VERSION}"),
        });
    }
    let channel_count = u16::from_le_bytes([bytes[6], bytes[7]]);
    if channel_count == 0 {
        return Err(Error::Format {
            offset: 6,
            message: "channel_count must be at least 1".to_string(),
        });
    }
    let resolution = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
    if resolution != 1 {
        return Err(Error::Format {
            offset: 8,
            message: format!("unsupported resolution {resolution} ps, expected 1"),
        });
    }
    let body = &bytes[TTG1_HEADER_LEN..];
    if body.len() % TTG1_RECORD_LEN != 0 {
        let full = body.len() / TTG1_RECORD_LEN;
        return Err(Error::Format {
            offset: (TTG1_HEADER_LEN + full * TTG1_RECORD_LEN) as u64,
            message: format!(
                "trailing partial record of {} bytes",
                body.len() % TTG1_RECORD_LEN
            ),
        });
    }

    let mut records = Vec::with_capacity(body.len() / TTG1_RECORD_LEN);
    let mut prev: u64 = 0;
    for (i, rec) in body.chunks_exact(TTG1_RECORD_LEN).enumerate() {
        let offset = (TTG1_HEADER_LEN + i * TTG1_RECORD_LEN) as u64;
        let channel = rec[0];
        let time_ps = u64::from_le_bytes(rec[1..9].try_into().expect("9-byte record"));
        if (channel as u16) >= channel_count {
            return Err(Error::data(
                format!("byte {offset}"),
                format!("channel {channel} out of range (< {channel_count})"),
            ));
        }
        if time_ps < prev {
            return Err(Error::data(
                format!("byte {offset}"),
                format!("time regression: {time_ps} ps after {prev} ps"),
            ));
        }
        prev = time_ps;
        records.push(TimeTagRecord { channel, time_ps });
    }
    TagStream::new(channel_count, records)
}

fn write_binary<W: Write>(stream: &TagStream, w: &mut W) -> Result<()> {
    w.write_all(TTG1_MAGIC)?;
    w.write_all(&TTG1_VERSION.to_le_bytes())?;
    w.write_all(&stream.channel_count().to_le_bytes())?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for r in stream.records() {
        w.write_all(&[r.channel])?;
        w.write_all(&r.time_ps.to_le_bytes())?;
    }
    Ok(())
}

fn read_csv<R: Read>(reader: R) -> Result<TagStream> {
    let reader = BufReader::new(reader);
    let mut records = Vec::new();
    let mut max_channel: u16 = 0;
    let mut prev: u64 = 0;
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(Error::Format {
                offset: 0,
                message: "empty file: expected header \"channel,time_ps\"".to_string(),
            })
        }
    };
    if header.trim() != "channel,time_ps" {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad header {:?}, expected \"channel,time_ps\"", header.trim()),
        });
    }

    for (idx, line) in lines {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let (Some(ch), Some(t), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::data(
                format!("line {line_no}"),
                "expected exactly two fields: channel,time_ps".to_string(),
            ));
        };
        let channel: u8 = ch.trim().parse().map_err(|_| {
            Error::data(format!("line {line_no}"), format!("bad channel {ch:?}"))
        })?;
        let time_ps: u64 = t.trim().parse().map_err(|_| {
            Error::data(format!("line {line_no}"), format!("bad time {t:?}"))
        })?;
        if time_ps < prev {
            return Err(Error::data(
                format!("line {line_no}"),
                format!("time regression: {time_ps} ps after {prev} ps"),
            ));
        }
        prev = time_ps;
        max_channel = max_channel.max(channel as u16);
        records.push(TimeTagRecord { channel, time_ps });
    }
    TagStream::new(max_channel + 1, records)
}

fn write_csv<W: Write>(stream: &TagStream, w: &mut W) -> Result<()> {
    writeln!(w, "channel,time_ps")?;
    for r in stream.records() {
        writeln!(w, "{},{}", r.channel, r.time_ps)?;
    }
    Ok(())
}

/// Writes a g2 histogram as CSV: `tau_ps,raw,norm,g,err`, one row per
/// bin, `tau_ps` at the bin center.
pub fn write_hist1d_csv<W: Write>(h: &Hist1D, w: &mut W) -> Result<()> {
    writeln!(w, "tau_ps,raw,norm,g,err")?;
    for k in 0..h.raw_counts.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            h.axis.bin_center(k),
            h.raw_counts[k],
            h.normalization[k],
            h.g2[k],
            h.poisson_err[k]
        )?;
    }
    Ok(())
}

/// Writes a g3 histogram as CSV: `tau1_ps,tau2_ps,raw,norm,g,err`, cells
/// in row-major order.
pub fn write_hist2d_csv<W: Write>(h: &Hist2D, w: &mut W) -> Result<()> {
    writeln!(w, "tau1_ps,tau2_ps,raw,norm,g,err")?;
    let (n1, n2) = h.shape();
    for i in 0..n1 {
        for j in 0..n2 {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                h.axis1.bin_center(i),
                h.axis2.bin_center(j),
                h.raw(i, j),
                h.normalization,
                h.g3_at(i, j),
                h.poisson_err(i, j)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stream() -> TagStream {
        TagStream::new(
            3,
            vec![
                TimeTagRecord {
                    channel: 0,
                    time_ps: 100,
                },
                TimeTagRecord {
                    channel: 2,
                    time_ps: 250,
                },
                TimeTagRecord {
                    channel: 1,
                    time_ps: 250,
                },
                TimeTagRecord {
                    channel: 0,
                    time_ps: 90_000_000_000,
                },
            ],
        )
        .unwrap()
    }

    fn to_bytes(stream: &TagStream, format: TagFormat) -> Vec<u8> {
        let mut buf = Vec::new();
        write_tags_to(stream, &mut buf, format).unwrap();
        buf
    }

    #[test]
    fn binary_roundtrip_preserves_records() {
        let original = sample_stream();
        let bytes = to_bytes(&original, TagFormat::Binary);
        assert_eq!(bytes.len(), TTG1_HEADER_LEN + 4 * TTG1_RECORD_LEN);
        let back = read_tags_from(&bytes[..], TagFormat::Binary).unwrap();
        assert_eq!(back.records(), original.records());
        assert_eq!(back.channel_count(), 3);
    }

    #[test]
    fn csv_roundtrip_preserves_records() {
        let original = sample_stream();
        let bytes = to_bytes(&original, TagFormat::Csv);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("channel,time_ps\n"), "got: {text}");
        let back = read_tags_from(&bytes[..], TagFormat::Csv).unwrap();
        assert_eq!(back.records(), original.records());
    }

    #[test]
    fn empty_binary_stream_is_valid() {
        let empty = TagStream::new(2, Vec::new()).unwrap();
        let bytes = to_bytes(&empty, TagFormat::Binary);
        assert_eq!(bytes.len(), TTG1_HEADER_LEN);
        let back = read_tags_from(&bytes[..], TagFormat::Binary).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.channel_count(), 2);
    }

    #[test]
    fn bad_magic_is_a_format_error_at_offset_zero() {
        let mut bytes = to_bytes(&sample_stream(), TagFormat::Binary);
        bytes[0] = b'X';
        let err = read_tags_from(&bytes[..], TagFormat::Binary).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let mut bytes = to_bytes(&sample_stream(), TagFormat::Binary);
        bytes[4] = 9;
        let err = read_tags_from(&bytes[..], TagFormat::Binary).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 4),
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn out_of_range_channel_reports_byte_offset() {
        let mut bytes = to_bytes(&sample_stream(), TagFormat::Binary);
        // Second record's channel byte.
        let offset = TTG1_HEADER_LEN + TTG1_RECORD_LEN;
        bytes[offset] = 7;
        let err = read_tags_from(&bytes[..], TagFormat::Binary).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(&format!("byte {offset}")), "got: {msg}");
        assert!(msg.contains("channel 7"), "got: {msg}");
    }

    #[test]
    fn time_regression_reports_byte_offset() {
        let mut bytes = to_bytes(&sample_stream(), TagFormat::Binary);
        let offset = TTG1_HEADER_LEN + TTG1_RECORD_LEN;
        bytes[offset + 1..offset + 9].copy_from_slice(&5u64.to_le_bytes());
        let err = read_tags_from(&bytes[..], TagFormat::Binary).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(&format!("byte {offset}")), "got: {msg}");
        assert!(msg.contains("regression"), "got: {msg}");
    }

    #[test]
    fn partial_trailing_record_is_a_format_error() {
        let mut bytes = to_bytes(&sample_stream(), TagFormat::Binary);
        bytes.truncate(bytes.len() - 3);
        let err = read_tags_from(&bytes[..], TagFormat::Binary).unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert_eq!(offset as usize, TTG1_HEADER_LEN + 3 * TTG1_RECORD_LEN);
                assert!(message.contains("partial record"), "got: {message}");
            }
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn csv_reports_physical_line_numbers() {
        // The header is line 1, so the offending third line is line 3.
        let text = "channel,time_ps\n0,100\n1,50\n";
        let err = read_tags_from(text.as_bytes(), TagFormat::Csv).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "got: {msg}");
        assert!(msg.contains("regression"), "got: {msg}");
    }

    #[test]
    fn csv_rejects_garbage_fields() {
        let text = "channel,time_ps\n0,abc\n";
        let err = read_tags_from(text.as_bytes(), TagFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("line 2"), "got: {err}");
    }

    #[test]
    fn hist_csv_headers_match_schema() {
        use crate::correlator::{g2, g3, BinningSpec};
        let tags = TagStream::new(
            3,
            vec![
                TimeTagRecord { channel: 0, time_ps: 0 },
                TimeTagRecord { channel: 1, time_ps: 10 },
                TimeTagRecord { channel: 2, time_ps: 20 },
                TimeTagRecord { channel: 0, time_ps: 1_000 },
                TimeTagRecord { channel: 1, time_ps: 1_010 },
                TimeTagRecord { channel: 2, time_ps: 1_030 },
            ],
        )
        .unwrap();
        let spec = BinningSpec::new(-40, 40, 20).unwrap();
        let h1 = g2(&tags, 0, 1, &spec).unwrap();
        let mut buf = Vec::new();
        write_hist1d_csv(&h1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tau_ps,raw,norm,g,err\n"), "got: {text}");
        assert_eq!(text.lines().count(), 1 + spec.bin_count());

        let h2 = g3(&tags, (0, 1, 2), &spec, &spec).unwrap();
        let mut buf = Vec::new();
        write_hist2d_csv(&h2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tau1_ps,tau2_ps,raw,norm,g,err\n"), "got: {text}");
        assert_eq!(text.lines().count(), 1 + spec.bin_count() * spec.bin_count());
    }
}
