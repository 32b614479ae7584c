use super::{IngestError, WindRecord, WindSeries, CALM_THRESHOLD};
use crate::circular::Angle;
use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedUnit {
    MetersPerSecond,
    Knots,
    MilesPerHour,
    KilometersPerHour,
}

impl SpeedUnit {
    fn to_ms(self, v: f64) -> f64 {
        match self {
            SpeedUnit::MetersPerSecond => v,
            SpeedUnit::Knots => v * 1852.0 / 3600.0,
            SpeedUnit::MilesPerHour => v * 0.44704,
            SpeedUnit::KilometersPerHour => v / 3.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionUnit {
    /// Bearing the wind blows from, degrees clockwise from north.
    MetDegrees,
    /// The crate's internal radians.
    Radians,
}

/// Column names and units of an input file. The default is the canonical
/// schema: `timestamp` (ISO-8601, UTC), `speed_ms`, `direction_deg`, and
/// optional `member`, `location`, `height_m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp: String,
    pub speed: String,
    pub direction: String,
    pub member: String,
    pub location: String,
    pub height: String,
    pub speed_unit: SpeedUnit,
    pub direction_unit: DirectionUnit,
    pub calm_threshold: f64,
    /// Used when the file has no location column.
    pub default_location: String,
    pub default_height: Option<f64>,
    /// Ingestion fails when more than this fraction of rows is rejected.
    pub max_reject_fraction: f64,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp: "timestamp".into(),
            speed: "speed_ms".into(),
            direction: "direction_deg".into(),
            member: "member".into(),
            location: "location".into(),
            height: "height_m".into(),
            speed_unit: SpeedUnit::MetersPerSecond,
            direction_unit: DirectionUnit::MetDegrees,
            calm_threshold: CALM_THRESHOLD,
            default_location: "site".into(),
            default_height: None,
            max_reject_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the file, header included.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub accepted: usize,
    pub calm: usize,
    pub rejected: Vec<Rejection>,
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s.trim_end_matches('Z'), fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)).map(|t| t.and_utc())
}

struct Row {
    line: usize,
    key: (String, Option<String>),
    height: Option<f64>,
    record: WindRecord,
}

/// Reads every (location, member) series in the file.
pub fn read_csv_multi<R: Read>(
    reader: R,
    schema: &CsvSchema,
) -> Result<(Vec<WindSeries>, IngestReport), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()));
    let ts_col = need(&schema.timestamp)?;
    let sp_col = need(&schema.speed)?;
    let dir_col = need(&schema.direction)?;
    let mem_col = col(&schema.member);
    let loc_col = col(&schema.location);
    let h_col = col(&schema.height);

    let mut report = IngestReport::default();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        report.rows += 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(Rejection { line, reason: e.to_string() });
                continue;
            }
        };
        let field = |c: usize| rec.get(c).unwrap_or("");
        let Some(timestamp) = parse_timestamp(field(ts_col)) else {
            report.rejected.push(Rejection { line, reason: format!("unparseable timestamp `{}`", field(ts_col)) });
            continue;
        };
        let speed = match field(sp_col).parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => schema.speed_unit.to_ms(v),
            _ => {
                report.rejected.push(Rejection { line, reason: format!("invalid speed `{}`", field(sp_col)) });
                continue;
            }
        };
        let raw_dir = field(dir_col);
        let direction = if raw_dir.is_empty() {
            None
        } else {
            let parsed = raw_dir.parse::<f64>().ok().and_then(|v| match schema.direction_unit {
                DirectionUnit::MetDegrees => Angle::from_met_deg(v).ok(),
                DirectionUnit::Radians => Angle::new(v).ok(),
            });
            match parsed {
                Some(a) => Some(a),
                None => {
                    report.rejected.push(Rejection { line, reason: format!("invalid direction `{raw_dir}`") });
                    continue;
                }
            }
        };
        let location = loc_col
            .map(field)
            .filter(|s| !s.is_empty())
            .unwrap_or(&schema.default_location)
            .to_string();
        let member = mem_col.map(field).filter(|s| !s.is_empty()).map(str::to_string);
        let height = h_col.and_then(|c| field(c).parse::<f64>().ok()).or(schema.default_height);
        rows.push(Row {
            line,
            key: (location, member),
            height,
            record: WindRecord::new(timestamp, speed, direction, schema.calm_threshold),
        });
    }

    let mut groups: BTreeMap<(String, Option<String>), Vec<Row>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.key.clone()).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((location, member), mut rows) in groups {
        rows.sort_by(|a, b| a.record.timestamp.cmp(&b.record.timestamp).then(a.line.cmp(&b.line)));
        let height = rows.iter().find_map(|r| r.height);
        let mut records: Vec<WindRecord> = Vec::with_capacity(rows.len());
        for r in rows {
            if records.last().is_some_and(|l| l.timestamp == r.record.timestamp) {
                report.rejected.push(Rejection {
                    line: r.line,
                    reason: format!("duplicate timestamp {}", r.record.timestamp),
                });
                continue;
            }
            records.push(r.record);
        }
        report.accepted += records.len();
        report.calm += records.iter().filter(|r| r.flags.calm).count();
        let mut s = WindSeries::new(location, records)?;
        s.member = member;
        s.height_m = height;
        out.push(s);
    }
    report.rejected.sort_by_key(|r| r.line);
    if report.rows > 0 && report.rejected.len() as f64 > schema.max_reject_fraction * report.rows as f64 {
        let first = &report.rejected[0];
        return Err(IngestError::TooManyRejected {
            rejected: report.rejected.len(),
            total: report.rows,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }
    if report.accepted == 0 {
        return Err(IngestError::Empty);
    }
    Ok((out, report))
}

/// Reads a file holding exactly one series.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<(WindSeries, IngestReport), IngestError> {
    let (mut all, report) = read_csv_multi(reader, schema)?;
    if all.len() != 1 {
        return Err(IngestError::MultipleSeries(all.len()));
    }
    Ok((all.remove(0), report))
}

fn format_direction(a: Angle) -> String {
    let s = format!("{:.9}", a.to_met_deg());
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "360" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Writes series in the canonical schema. Speeds use the shortest
/// representation that reads back to the same `f64`; directions are
/// written to nine decimal places.
pub fn write_csv<W: Write>(series: &[WindSeries], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "speed_ms", "direction_deg", "member", "location", "height_m"])?;
    for s in series {
        let height = s.height_m.map(|h| h.to_string()).unwrap_or_default();
        let member = s.member.clone().unwrap_or_default();
        for r in s.records() {
            w.write_record([
                r.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                r.speed.to_string(),
                r.direction.map(format_direction).unwrap_or_default(),
                member.clone(),
                s.location.clone(),
                height.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<(WindSeries, IngestReport), IngestError> {
        read_csv(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn reads_and_sorts() {
        let text = "timestamp,speed_ms,direction_deg\n\
                    2000-01-01T06:00:00Z,3.5,270\n\
                    2000-01-01T00:00:00Z,4.0,90\n\
                    2000-01-01T03:00:00Z,0.05,10\n";
        let (s, rep) = read(text).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.records().windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        assert_eq!(s.records()[0].speed, 4.0);
        assert!(s.records()[1].flags.calm);
        assert_eq!(rep.calm, 1);
        assert_eq!(s.location, "site");
    }

    #[test]
    fn duplicates_and_bad_rows_are_reported() {
        let text = "timestamp,speed_ms,direction_deg\n\
                    2000-01-01T00:00:00Z,4.0,90\n\
                    2000-01-01T00:00:00Z,5.0,91\n\
                    nonsense,5.0,91\n\
                    2000-01-01T03:00:00Z,NaN,91\n\
                    2000-01-01T06:00:00Z,2.0,\n\
                    2000-01-01T09:00:00Z,2.0,12\n";
        let (s, rep) = read(text).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.records()[0].speed, 4.0);
        let lines: Vec<usize> = rep.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
        assert!(rep.rejected[0].reason.contains("duplicate"));
        assert!(s.records()[1].flags.direction_missing);
    }

    #[test]
    fn fails_on_missing_columns_or_mostly_bad_rows() {
        assert!(matches!(read("time,speed_ms,direction_deg\n"), Err(IngestError::MissingColumn(c)) if c == "timestamp"));
        let text = "timestamp,speed_ms,direction_deg\nx,1,1\ny,1,1\n2000-01-01,1,1\n";
        assert!(matches!(read(text), Err(IngestError::TooManyRejected { .. })));
    }

    #[test]
    fn direction_round_trip_and_units() {
        let mut text = String::from("timestamp,speed_ms,direction_deg\n");
        for i in 0..360 {
            text.push_str(&format!("2000-01-{:02}T{:02}:00:00Z,5,{}\n", 1 + i / 24, i % 24, i as f64 + 0.25));
        }
        let (s, _) = read(&text).unwrap();
        for (i, r) in s.records().iter().enumerate() {
            let d = r.direction.unwrap().to_met_deg();
            assert!((d - (i as f64 + 0.25)).abs() < 1e-9);
        }
        let schema = CsvSchema { speed_unit: SpeedUnit::Knots, speed: "wspd".into(), ..Default::default() };
        let (s, _) =
            read_csv("timestamp,wspd,direction_deg\n2000-01-01 00:00,10,0\n".as_bytes(), &schema).unwrap();
        assert!((s.records()[0].speed - 5.144_444_444).abs() < 1e-8);
    }

    #[test]
    fn groups_members_and_locations() {
        let text = "timestamp,speed_ms,direction_deg,member,location,height_m\n\
                    2000-01-01T00:00:00Z,4,90,m1,A,10\n\
                    2000-01-01T00:00:00Z,5,90,m2,A,10\n\
                    2000-01-01T00:00:00Z,6,90,m1,B,10\n";
        let (all, _) = read_csv_multi(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all[0].member.as_deref(), Some("m1"));
        assert_eq!(all[0].height_m, Some(10.0));
        assert!(matches!(read(text), Err(IngestError::MultipleSeries(3))));
    }

    #[test]
    fn canonical_write_is_a_fixed_point() {
        let text = "timestamp,speed_ms,direction_deg,member,location,height_m\n\
                    2000-01-01T00:00:00Z,4.123456789,90.5,,A,10\n\
                    2000-01-01T03:00:00Z,0.05,,,A,10\n\
                    2000-01-01T06:00:00Z,7,359.999,,A,10\n\
                    2000-01-01T09:00:00Z,7,180,,A,10\n";
        let (all, _) = read_csv_multi(text.as_bytes(), &CsvSchema::default()).unwrap();
        let mut out = Vec::new();
        write_csv(&all, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), text);
        let (again, _) = read_csv_multi(out.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(again, all);
    }
}
