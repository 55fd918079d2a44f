use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeDelta, Timelike, Utc};

/// FILETIME of 1970-01-01T00:00:00Z.
pub const FILETIME_UNIX_EPOCH: u64 = 116_444_736_000_000_000;

const TICKS_PER_SECOND: u64 = 10_000_000;

fn filetime_origin() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(1601, 1, 1).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid origin")
}

/// Converts a FILETIME to a UTC instant. Every `u64` maps to a date chrono
/// can represent (the maximum lands in year 60056).
pub fn filetime_to_datetime(ticks: u64) -> DateTime<Utc> {
    let secs = (ticks / TICKS_PER_SECOND) as i64;
    let nanos = ((ticks % TICKS_PER_SECOND) * 100) as u32;
    let delta = TimeDelta::new(secs, nanos).expect("in range");
    (filetime_origin() + delta).and_utc()
}

/// Converts a UTC instant to FILETIME. `None` before 1601 or past `u64::MAX` ticks.
pub fn datetime_to_filetime(instant: &DateTime<Utc>) -> Option<u64> {
    let delta = instant.naive_utc() - filetime_origin();
    let secs = u64::try_from(delta.num_seconds()).ok()?;
    let sub = delta.subsec_nanos();
    if sub < 0 {
        return None;
    }
    secs.checked_mul(TICKS_PER_SECOND)?.checked_add(sub as u64 / 100)
}

/// Renders a FILETIME as ISO-8601 UTC, e.g. `1970-01-01T00:00:00Z`. A
/// nonzero sub-second part is written with all 7 tick digits.
pub fn filetime_to_iso(ticks: u64) -> String {
    format_utc(&filetime_to_datetime(ticks))
}

/// Year of a FILETIME instant.
pub fn filetime_year(ticks: u64) -> i32 {
    filetime_to_datetime(ticks).year()
}

/// FILETIMEs beyond year 9999 are representable but never written by Windows.
pub fn is_plausible_filetime(ticks: u64) -> bool {
    filetime_year(ticks) <= 9999
}

/// Shared UTC formatter: `YYYY-MM-DDTHH:MM:SS[.fffffff]Z`. Fractions that are
/// not whole 100 ns ticks fall back to 9 digits. Years past 9999 keep all
/// their digits.
pub fn format_utc(instant: &DateTime<Utc>) -> String {
    let mut out = format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}",
        instant.year(),
        instant.month(),
        instant.day(),
        instant.hour(),
        instant.minute(),
        instant.second()
    );
    let nanos = instant.nanosecond() % 1_000_000_000;
    if nanos != 0 {
        if nanos.is_multiple_of(100) {
            out.push_str(&format!(".{:07}", nanos / 100));
        } else {
            out.push_str(&format!(".{nanos:09}"));
        }
    }
    out.push('Z');
    out
}

/// Parses a record `time` value. Accepts RFC 3339 with any offset, and
/// zone-less ISO-8601 which is taken as UTC.
pub fn parse_record_time(text: &str) -> Option<DateTime<Utc>> {
    let t = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(t, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}
