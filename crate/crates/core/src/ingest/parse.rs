//! Line-oriented NDJSON and CSV event readers.
//!
//! Malformed lines never abort a stream; they are counted and the first
//! [`MAX_LOGGED_ERRORS`] are kept with their line numbers.

use std::borrow::Cow;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{IngestError, TweetRecord};

pub const MAX_LOGGED_ERRORS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamFormat {
    Ndjson,
    Csv,
}

impl FromStr for StreamFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ndjson" | "jsonl" => Ok(Self::Ndjson),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown stream format `{other}` (expected ndjson or csv)")),
        }
    }
}

impl fmt::Display for StreamFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ndjson => "ndjson",
            Self::Csv => "csv",
        })
    }
}

/// Why a single line was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("line is not valid UTF-8")]
    Encoding,
    #[error("expected 4 fields, found {0}")]
    FieldCount(usize),
    #[error("invalid number in field `{field}`: {value}")]
    BadNumber { field: &'static str, value: String },
    #[error("latitude out of range: {0}")]
    LatitudeOutOfRange(f64),
    #[error("longitude out of range: {0}")]
    LongitudeOutOfRange(f64),
    #[error("invalid timestamp `{0}`")]
    BadTimestamp(String),
    #[error("empty user id")]
    EmptyUser,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {error}")]
pub struct LineError {
    pub line: u64,
    pub error: RecordError,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedStream {
    pub records: Vec<TweetRecord>,
    /// First [`MAX_LOGGED_ERRORS`] rejections.
    pub errors: Vec<LineError>,
    pub error_count: u64,
}

impl ParsedStream {
    fn reject(&mut self, line: u64, error: RecordError) {
        self.error_count += 1;
        if self.errors.len() < MAX_LOGGED_ERRORS {
            self.errors.push(LineError { line, error });
        }
    }
}

impl TweetRecord {
    /// Validates raw field values. Sub-second precision is truncated.
    pub fn from_fields(user: &str, lon: f64, lat: f64, ts: &str) -> Result<Self, RecordError> {
        if user.is_empty() {
            return Err(RecordError::EmptyUser);
        }
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(RecordError::LatitudeOutOfRange(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(RecordError::LongitudeOutOfRange(lon));
        }
        let t_utc = DateTime::parse_from_rfc3339(ts.trim())
            .map_err(|_| RecordError::BadTimestamp(ts.to_string()))?
            .with_timezone(&Utc)
            .trunc_subsecs(0);
        Ok(Self { user_id: user.to_string(), lon, lat, t_utc })
    }
}

#[derive(Deserialize)]
struct JsonLine<'a> {
    #[serde(borrow)]
    user: Cow<'a, str>,
    lon: f64,
    lat: f64,
    #[serde(borrow)]
    ts: Cow<'a, str>,
}

fn parse_json_line(line: &str) -> Result<TweetRecord, RecordError> {
    let raw: JsonLine<'_> =
        serde_json::from_str(line).map_err(|e| RecordError::Malformed(e.to_string()))?;
    TweetRecord::from_fields(&raw.user, raw.lon, raw.lat, &raw.ts)
}

fn parse_number(field: &'static str, value: &str) -> Result<f64, RecordError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| RecordError::BadNumber { field, value: value.to_string() })
}

fn parse_csv_fields(fields: &[&str]) -> Result<TweetRecord, RecordError> {
    if fields.len() != 4 {
        return Err(RecordError::FieldCount(fields.len()));
    }
    let lon = parse_number("lon", fields[1])?;
    let lat = parse_number("lat", fields[2])?;
    TweetRecord::from_fields(fields[0], lon, lat, fields[3])
}

/// Parses a line-delimited event stream.
///
/// Returns `Err` only when the source itself cannot be read (or, for CSV, when the
/// header is missing or wrong). Blank lines are skipped without being counted.
pub fn parse_stream<R: Read>(input: R, format: StreamFormat) -> Result<ParsedStream, IngestError> {
    let mut reader = BufReader::with_capacity(1 << 16, input);
    let mut out = ParsedStream::default();
    let mut buf = Vec::with_capacity(256);
    let mut line_no = 0u64;
    let mut header_seen = format == StreamFormat::Ndjson;

    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(IngestError::Io)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let Ok(text) = std::str::from_utf8(&buf) else {
            out.reject(line_no, RecordError::Encoding);
            continue;
        };
        let text = text.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            continue;
        }
        if !header_seen {
            let header: Vec<&str> = text.trim_start_matches('\u{feff}').split(',').map(str::trim).collect();
            if header != ["user", "lon", "lat", "ts"] {
                return Err(IngestError::BadHeader(text.to_string()));
            }
            header_seen = true;
            continue;
        }
        let parsed = match format {
            StreamFormat::Ndjson => parse_json_line(text),
            StreamFormat::Csv => parse_csv_fields(&text.split(',').collect::<Vec<_>>()),
        };
        match parsed {
            Ok(record) => out.records.push(record),
            Err(error) => out.reject(line_no, error),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ndjson(text: &str) -> ParsedStream {
        parse_stream(text.as_bytes(), StreamFormat::Ndjson).unwrap()
    }

    #[test]
    fn maps_fields_directly() {
        let out = ndjson(r#"{"user":"u1","lon":-87.6,"lat":41.9,"ts":"2014-06-01T12:00:00Z"}"#);
        assert_eq!(out.error_count, 0);
        let r = &out.records[0];
        assert_eq!(r.user_id, "u1");
        assert_eq!(r.lon, -87.6);
        assert_eq!(r.lat, 41.9);
        assert_eq!(r.t_utc.to_rfc3339(), "2014-06-01T12:00:00+00:00");
    }

    #[test]
    fn latitude_out_of_range_is_recoverable() {
        let out = ndjson(
            "{\"user\":\"u1\",\"lon\":-87.6,\"lat\":95,\"ts\":\"2014-06-01T12:00:00Z\"}\n\
             {\"user\":\"u2\",\"lon\":-87.6,\"lat\":41.0,\"ts\":\"2014-06-01T12:00:00Z\"}\n",
        );
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.error_count, 1);
        assert_eq!(out.errors[0].line, 1);
        assert!(out.errors[0].to_string().contains("latitude out of range"));
    }

    #[test]
    fn truncated_line_counts_one_error() {
        let text = "\
{\"user\":\"a\",\"lon\":-87.6,\"lat\":41.9,\"ts\":\"2014-06-01T12:00:00Z\"}
{\"user\":\"b\",\"lon\":-87.6,\"lat\":41.9,\"ts\":\"2014-06-01T12:00:00Z\"}
{\"user\":\"c\",\"lon\":-87.6,\"lat\":41.9,\"ts\":\"2014-06-01T12:00:00Z\"}
{\"user\":\"d\",\"lon\":-87.6,\"la";
        let out = ndjson(text);
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.error_count, 1);
        assert_eq!(out.errors[0].line, 4);
    }

    #[test]
    fn offsets_are_normalized_and_subseconds_dropped() {
        let out = ndjson(r#"{"user":"u","lon":0,"lat":0,"ts":"2014-06-01T07:00:00.750-05:00"}"#);
        assert_eq!(out.records[0].t_utc.to_rfc3339(), "2014-06-01T12:00:00+00:00");
    }

    #[test]
    fn bad_utf8_and_blank_lines() {
        let mut bytes = b"\n{\"user\":\"u\",\"lon\":0,\"lat\":0,\"ts\":\"2014-06-01T12:00:00Z\"}\n".to_vec();
        bytes.extend_from_slice(b"\xff\xfe\n\n");
        let out = parse_stream(bytes.as_slice(), StreamFormat::Ndjson).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.error_count, 1);
        assert_eq!(out.errors[0], LineError { line: 3, error: RecordError::Encoding });
    }

    #[test]
    fn csv_with_header() {
        let text = "user,lon,lat,ts\r\nu1,-87.6,41.9,2014-06-01T12:00:00Z\r\nu2,-87.6,abc,2014-06-01T12:00:00Z\r\nu3,-87.6\r\n";
        let out = parse_stream(text.as_bytes(), StreamFormat::Csv).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.error_count, 2);
        assert!(matches!(out.errors[0].error, RecordError::BadNumber { field: "lat", .. }));
        assert_eq!(out.errors[1].error, RecordError::FieldCount(2));
        assert_eq!(out.errors[1].line, 4);
    }

    #[test]
    fn csv_requires_header() {
        let text = "u1,-87.6,41.9,2014-06-01T12:00:00Z\n";
        assert!(matches!(
            parse_stream(text.as_bytes(), StreamFormat::Csv),
            Err(IngestError::BadHeader(_))
        ));
    }

    #[test]
    fn unreadable_source_is_fatal() {
        struct Broken;
        impl Read for Broken {
            fn read(&mut self, _: &mut [u8]) -> std::io::Result<usize> {
                Err(std::io::Error::other("device gone"))
            }
        }
        assert!(matches!(parse_stream(Broken, StreamFormat::Ndjson), Err(IngestError::Io(_))));
    }

    #[test]
    fn error_log_is_capped_but_count_is_not() {
        let text = "garbage\n".repeat(MAX_LOGGED_ERRORS + 5);
        let out = ndjson(&text);
        assert_eq!(out.errors.len(), MAX_LOGGED_ERRORS);
        assert_eq!(out.error_count, (MAX_LOGGED_ERRORS + 5) as u64);
    }
}
