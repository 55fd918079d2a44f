use thiserror::Error;

use super::{Warning, WarningKind};
use crate::format::{ParsedRecord, TelemetryRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("no valid JSON record in payload")]
    NoValidJson,
}

/// Records recovered from one payload. Warning offsets are byte positions
/// within the text.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRecords {
    pub records: Vec<TelemetryRecord>,
    pub warnings: Vec<Warning>,
}

/// Finds the end (exclusive) of the JSON object or array starting at `start`.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == b'\\' {
                escaped = true;
            } else if c == b'"' {
                in_string = false;
            }
            continue;
        }
        match c {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Splits concatenated JSON values (back-to-back or whitespace separated)
/// into telemetry records. Damaged stretches are skipped with a warning and
/// scanning resumes at the next `{`.
pub fn split_records(text: &str, expected_count: u32) -> Result<SplitRecords, SplitError> {
    let bytes = text.as_bytes();
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() || bytes[i] == 0 {
            i += 1;
            continue;
        }
        if bytes[i] != b'{' && bytes[i] != b'[' {
            let next = memchr::memchr(b'{', &bytes[i..]).map_or(bytes.len(), |p| i + p);
            warnings.push(Warning::new(
                i as u64,
                WarningKind::NonJsonBytes,
                format!("skipped {} bytes of non-JSON data", next - i),
            ));
            i = next;
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<ParsedRecord>();
        match stream.next() {
            Some(Ok(ParsedRecord(parsed))) => {
                let end = i + stream.byte_offset();
                match parsed {
                    Ok(rec) => records.push(rec),
                    Err(e) => warnings.push(Warning::new(i as u64, WarningKind::RecordRejected, e.to_string())),
                }
                i = end;
            }
            Some(Err(e)) => match balanced_end(bytes, i) {
                Some(end) => {
                    warnings.push(Warning::new(i as u64, WarningKind::MalformedRecord, e.to_string()));
                    i = end;
                }
                None => {
                    warnings.push(Warning::new(i as u64, WarningKind::MalformedRecord, "unterminated JSON value"));
                    i += 1;
                }
            },
            None => break,
        }
    }
    if records.is_empty() {
        return Err(SplitError::NoValidJson);
    }
    if records.len() != expected_count as usize {
        warnings.push(Warning::new(
            0,
            WarningKind::CountMismatch,
            format!("chunk declares {expected_count} records, recovered {}", records.len()),
        ));
    }
    Ok(SplitRecords { records, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn back_to_back() {
        let out = split_records(r#"{"name":"A"}{"name":"B"}"#, 2).unwrap();
        let names: Vec<_> = out.records.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["A", "B"]);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn single_and_whitespace() {
        let out = split_records("{\"name\":\"A\"}", 1).unwrap();
        assert_eq!(out.records.len(), 1);
        assert!(out.warnings.is_empty());
        let out = split_records("\n {\"name\":\"A\"}\r\n\t{\"name\":\"B\"}\n", 2).unwrap();
        assert_eq!(out.records.len(), 2);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn count_mismatch() {
        let out = split_records(r#"{"name":"A"}{"name":"B"}{"name":"C"}"#, 2).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.warnings[0].kind, WarningKind::CountMismatch);
    }

    #[test]
    fn braces_inside_strings() {
        let text = r#"{"name":"A","data":{"s":"}{\"\\"}}{"name":"B","data":{"t":"[["}}"#;
        let out = split_records(text, 2).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].data_field("s").unwrap(), "}{\"\\");
    }

    #[test]
    fn damaged_stretches() {
        let text = r#"garbage{"name":"A"}{"name":1}{"name":"B",,}{"name":"C"}{"name":"D""#;
        let out = split_records(text, 4).unwrap();
        let names: Vec<_> = out.records.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["A", "C"]);
        let kinds: Vec<_> = out.warnings.iter().map(|w| w.kind).collect();
        assert!(kinds.contains(&WarningKind::NonJsonBytes));
        assert!(kinds.contains(&WarningKind::RecordRejected));
        assert!(kinds.contains(&WarningKind::MalformedRecord));
        assert!(kinds.contains(&WarningKind::CountMismatch));
    }

    #[test]
    fn nothing_valid() {
        assert_eq!(split_records("xyz", 1), Err(SplitError::NoValidJson));
        assert_eq!(split_records("[1,2]", 1), Err(SplitError::NoValidJson));
        assert_eq!(split_records("", 0), Err(SplitError::NoValidJson));
    }
}
