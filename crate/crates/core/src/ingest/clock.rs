//! Local civil time under the United States daylight saving statute in force since 2007.
//!
//! Daylight time starts on the second Sunday of March at 02:00 local standard time and
//! ends on the first Sunday of November at 02:00 local daylight time.

use std::fmt;
use std::ops::RangeInclusive;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// First calendar year governed by the current statutory rule.
pub const FIRST_RULE_YEAR: i32 = 2007;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("instant {instant} lies outside the supported years {first}..={last}")]
    OutOfRange { instant: DateTime<Utc>, first: i32, last: i32 },
    #[error("year range {first}..={last} is not covered by the post-2007 daylight saving rule")]
    UnsupportedYears { first: i32, last: i32 },
}

/// A zone following the US daylight saving statute, restricted to a range of study years.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsZone {
    /// Standard-time offset from UTC in seconds (negative west of Greenwich).
    pub standard_offset_secs: i32,
    pub first_year: i32,
    pub last_year: i32,
}

impl UsZone {
    pub fn new(standard_offset_secs: i32, years: RangeInclusive<i32>) -> Result<Self, ClockError> {
        let (first, last) = (*years.start(), *years.end());
        if first < FIRST_RULE_YEAR || last < first || last > 9998 {
            return Err(ClockError::UnsupportedYears { first, last });
        }
        Ok(Self { standard_offset_secs, first_year: first, last_year: last })
    }

    /// US Central time (CST = UTC−6, CDT = UTC−5).
    pub fn central(years: RangeInclusive<i32>) -> Result<Self, ClockError> {
        Self::new(-6 * 3600, years)
    }

    /// Daylight saving interval `[start, end)` of `year`, as UTC instants.
    pub fn dst_interval(&self, year: i32) -> (DateTime<Utc>, DateTime<Utc>) {
        let start_local = nth_sunday(year, 3, 2).and_hms_opt(2, 0, 0).unwrap();
        let end_local = nth_sunday(year, 11, 1).and_hms_opt(2, 0, 0).unwrap();
        let start = start_local - Duration::seconds(self.standard_offset_secs as i64);
        let end = end_local - Duration::seconds(self.standard_offset_secs as i64 + 3600);
        (Utc.from_utc_datetime(&start), Utc.from_utc_datetime(&end))
    }

    pub fn is_dst(&self, t_utc: DateTime<Utc>) -> bool {
        let standard = t_utc.naive_utc() + Duration::seconds(self.standard_offset_secs as i64);
        let (start, end) = self.dst_interval(standard.year());
        start <= t_utc && t_utc < end
    }

    /// Converts a UTC instant within the supported years to local civil time.
    pub fn to_local(&self, t_utc: DateTime<Utc>) -> Result<LocalTime, ClockError> {
        let standard = t_utc.naive_utc() + Duration::seconds(self.standard_offset_secs as i64);
        if standard.year() < self.first_year || standard.year() > self.last_year {
            return Err(ClockError::OutOfRange {
                instant: t_utc,
                first: self.first_year,
                last: self.last_year,
            });
        }
        let offset_secs = self.standard_offset_secs + if self.is_dst(t_utc) { 3600 } else { 0 };
        Ok(LocalTime {
            civil: t_utc.naive_utc() + Duration::seconds(offset_secs as i64),
            offset_secs,
        })
    }

    /// Earliest UTC instant whose local civil time is `civil`; `None` inside the
    /// spring-forward gap or outside the supported years.
    pub fn from_local(&self, civil: NaiveDateTime) -> Option<DateTime<Utc>> {
        [self.standard_offset_secs + 3600, self.standard_offset_secs].into_iter().find_map(|offset| {
            let t = Utc.from_utc_datetime(&(civil - Duration::seconds(offset as i64)));
            self.to_local(t).ok().filter(|l| l.civil == civil).map(|_| t)
        })
    }
}

fn nth_sunday(year: i32, month: u32, n: u32) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, Weekday::Sun, n as u8)
        .expect("every month has at least four Sundays")
}

/// Local civil time together with the UTC offset that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalTime {
    pub civil: NaiveDateTime,
    pub offset_secs: i32,
}

impl LocalTime {
    pub fn hour(&self) -> u32 {
        self.civil.hour()
    }

    pub fn to_utc(&self) -> DateTime<Utc> {
        Utc.from_utc_datetime(&(self.civil - Duration::seconds(self.offset_secs as i64)))
    }
}

impl fmt::Display for LocalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.offset_secs < 0 { '-' } else { '+' };
        let abs = self.offset_secs.unsigned_abs();
        write!(
            f,
            "{}{}{:02}:{:02}",
            self.civil.format("%Y-%m-%dT%H:%M:%S"),
            sign,
            abs / 3600,
            (abs % 3600) / 60
        )
    }
}
