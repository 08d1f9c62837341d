//! Calendar arithmetic shared by windowing, cohort extraction, and the
//! synthetic generator. Everything is UTC; date-only values are midnight.

use chrono::{DateTime, Datelike, Months, NaiveDate, NaiveDateTime, TimeZone, Utc};

/// Parses an ISO-8601 date or date-time. Date-only values become midnight UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Some(Utc.from_utc_datetime(&dt));
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap()));
    }
    None
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    parse_timestamp(s).map(|t| t.date_naive())
}

pub fn midnight(d: NaiveDate) -> DateTime<Utc> {
    Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap())
}

/// `date` shifted forward by whole years, clamping Feb 29 to Feb 28 when needed.
pub fn add_years(date: NaiveDate, years: u32) -> NaiveDate {
    date.checked_add_months(Months::new(years * 12))
        .expect("date arithmetic overflow")
}

/// Completed calendar years between `birth` and `at`.
pub fn age_years(birth: NaiveDate, at: NaiveDate) -> i64 {
    let mut age = i64::from(at.year()) - i64::from(birth.year());
    if (at.month(), at.day()) < (birth.month(), birth.day()) {
        age -= 1;
    }
    age.max(0)
}
