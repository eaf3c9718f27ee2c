use chrono::{Datelike, Duration, NaiveDate, Offset, TimeZone, Timelike, Utc};
use chrono_tz::America::Chicago;
use toploc_core::ingest::UsZone;

#[test]
fn hourly_offsets_match_tz_database() {
    let zone = UsZone::central(2007..=2020).unwrap();
    let mut t = Utc.with_ymd_and_hms(2007, 1, 1, 6, 0, 0).unwrap();
    let end = Utc.with_ymd_and_hms(2021, 1, 1, 5, 59, 59).unwrap();
    let mut checked = 0;
    while t <= end {
        // quarter-hour steps hit both sides of every 07:00Z/08:00Z transition
        let ours = zone.to_local(t).unwrap();
        let theirs = t.with_timezone(&Chicago);
        assert_eq!(ours.offset_secs, theirs.offset().fix().local_minus_utc(), "{t}");
        assert_eq!(ours.civil, theirs.naive_local(), "{t}");
        assert_eq!(ours.hour(), theirs.hour());
        t += Duration::minutes(15);
        checked += 1;
    }
    assert!(checked > 490_000);
}

#[test]
fn local_to_utc_matches_tz_database() {
    let zone = UsZone::central(2014..=2014).unwrap();
    let mut day = NaiveDate::from_ymd_opt(2014, 1, 1).unwrap();
    while day.year() == 2014 {
        for hour in 0..24 {
            let civil = day.and_hms_opt(hour, 30, 0).unwrap();
            let theirs = Chicago.from_local_datetime(&civil).earliest().map(|t| t.with_timezone(&Utc));
            assert_eq!(zone.from_local(civil), theirs, "{civil}");
        }
        day = day.succ_opt().unwrap();
    }
}
