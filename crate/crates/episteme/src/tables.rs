//! CSV exports: the per-sample series table and the marker events table.
//!
//! Numbers are fixed-point with 6 decimals, LF line endings, header first.
//!
//! Events columns are `kind,start_s,end_s,attr1,attr2,attr3` with:
//!
//! | kind  | attr1        | attr2           | attr3             |
//! |-------|--------------|-----------------|-------------------|
//! | HOLD  | median notch | non_neutral     | micro_oscillation |
//! | NOD   | cycles       | crosses_neutral | peak_speed_deg_s  |
//! | SPEED | band         | stat_deg_s      |                   |

use episteme_core::calibration::Notch;
use episteme_core::kinematics::{AngleSeries, Quality, VelocitySeries};
use episteme_core::markers::{Family, MarkerEvent, MarkerKind, SpeedBandKind};
use thiserror::Error;

pub const SERIES_HEADER: [&str; 4] = ["t_s", "theta_deg", "v_deg_s", "quality"];
pub const EVENTS_HEADER: [&str; 6] = ["kind", "start_s", "end_s", "attr1", "attr2", "attr3"];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("series and velocity differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("header must be {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// `{:.6}` without a sign on zero.
pub fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t_s: f64,
    pub theta_deg: f64,
    pub v_deg_s: f64,
    pub quality: Quality,
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().unwrap_or_default();
    String::from_utf8(bytes).unwrap_or_default()
}

pub fn series_rows(theta: &AngleSeries, vel: &VelocitySeries) -> Result<Vec<SeriesRow>, TableError> {
    if theta.len() != vel.len() {
        return Err(TableError::Length(theta.len(), vel.len()));
    }
    Ok(theta
        .samples
        .iter()
        .zip(&vel.samples)
        .map(|(a, v)| SeriesRow { t_s: a.t_s, theta_deg: a.theta_deg, v_deg_s: v.v_deg_s, quality: a.quality })
        .collect())
}

pub fn write_series(rows: &[SeriesRow]) -> String {
    let mut w = writer();
    let _ = w.write_record(SERIES_HEADER);
    for r in rows {
        let _ = w.write_record([fixed6(r.t_s), fixed6(r.theta_deg), fixed6(r.v_deg_s), r.quality.as_str().to_string()]);
    }
    finish(w)
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), TableError> {
    let found = reader.headers()?.clone();
    if found.iter().ne(expected.iter().copied()) {
        return Err(TableError::Header { expected: expected.join(","), found: found.iter().collect::<Vec<_>>().join(",") });
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn number(record: &csv::StringRecord, i: usize, name: &str) -> Result<f64, TableError> {
    let field = record.get(i).unwrap_or("");
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| TableError::Row { line: line_of(record), message: format!("{name} {field:?} is not a number") })
}

fn flag(record: &csv::StringRecord, i: usize, name: &str) -> Result<bool, TableError> {
    match record.get(i).unwrap_or("") {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(TableError::Row { line: line_of(record), message: format!("{name} must be true or false, found {other:?}") }),
    }
}

pub fn read_series(text: &str) -> Result<Vec<SeriesRow>, TableError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &SERIES_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let quality = record.get(3).unwrap_or("").parse::<Quality>().map_err(|_| TableError::Row {
            line: line_of(&record),
            message: format!("unknown quality {:?}", record.get(3).unwrap_or("")),
        })?;
        rows.push(SeriesRow {
            t_s: number(&record, 0, "t_s")?,
            theta_deg: number(&record, 1, "theta_deg")?,
            v_deg_s: number(&record, 2, "v_deg_s")?,
            quality,
        });
    }
    Ok(rows)
}

pub fn write_events(events: &[MarkerEvent]) -> String {
    let mut w = writer();
    let _ = w.write_record(EVENTS_HEADER);
    for e in events {
        let (a1, a2, a3) = match e.kind {
            MarkerKind::Hold { median_notch, non_neutral, micro_oscillation, .. } => {
                (median_notch.as_str().to_string(), non_neutral.to_string(), micro_oscillation.to_string())
            }
            MarkerKind::NodBurst { cycles, crosses_neutral, peak_speed_deg_s, .. } => {
                (cycles.to_string(), crosses_neutral.to_string(), fixed6(peak_speed_deg_s))
            }
            MarkerKind::SpeedBand { band, stat_deg_s } => (band.as_str().to_string(), fixed6(stat_deg_s), String::new()),
        };
        let _ = w.write_record([e.family().as_str().to_string(), fixed6(e.start_s), fixed6(e.end_s), a1, a2, a3]);
    }
    finish(w)
}

/// Reads an events table. Fields the table does not carry come back as zero:
/// a burst's peak-to-peak amplitude, and a hold's duration is its interval.
pub fn read_events(text: &str) -> Result<Vec<MarkerEvent>, TableError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &EVENTS_HEADER)?;
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let bad = |message: String| TableError::Row { line, message };
        let start_s = number(&record, 1, "start_s")?;
        let end_s = number(&record, 2, "end_s")?;
        let kind_name = record.get(0).unwrap_or("");
        let family = Family::ALL.into_iter().find(|f| f.as_str() == kind_name).ok_or_else(|| bad(format!("unknown kind {kind_name:?}")))?;
        let kind = match family {
            Family::Hold => {
                let notch: Notch = record.get(3).unwrap_or("").parse().map_err(|_| bad("attr1 is not a notch".into()))?;
                MarkerKind::Hold {
                    duration_s: end_s - start_s,
                    median_notch: notch,
                    non_neutral: flag(&record, 4, "non_neutral")?,
                    micro_oscillation: flag(&record, 5, "micro_oscillation")?,
                }
            }
            Family::NodBurst => MarkerKind::NodBurst {
                cycles: record.get(3).unwrap_or("").parse().map_err(|_| bad("attr1 is not a cycle count".into()))?,
                crosses_neutral: flag(&record, 4, "crosses_neutral")?,
                max_peak_to_peak_p: 0.0,
                peak_speed_deg_s: number(&record, 5, "peak_speed")?,
            },
            Family::SpeedBand => {
                let band = match record.get(3).unwrap_or("") {
                    "HIGH" => SpeedBandKind::High,
                    "MID" => SpeedBandKind::Mid,
                    "LOW" => SpeedBandKind::Low,
                    other => return Err(bad(format!("unknown band {other:?}"))),
                };
                MarkerKind::SpeedBand { band, stat_deg_s: number(&record, 4, "stat")? }
            }
        };
        events.push(MarkerEvent { kind, start_s, end_s });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_layout() {
        let rows = vec![
            SeriesRow { t_s: 0.0, theta_deg: 104.0, v_deg_s: -0.0, quality: Quality::Good },
            SeriesRow { t_s: 0.04, theta_deg: 104.1234567, v_deg_s: 2.5, quality: Quality::LowConfidence },
        ];
        let text = write_series(&rows);
        assert_eq!(
            text,
            "t_s,theta_deg,v_deg_s,quality\n0.000000,104.000000,0.000000,GOOD\n0.040000,104.123457,2.500000,LOW_CONFIDENCE\n"
        );
        let back = read_series(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].quality, Quality::LowConfidence);
        assert_eq!(back[1].theta_deg, 104.123457);
    }

    #[test]
    fn series_read_errors() {
        assert!(matches!(read_series("t,theta\n"), Err(TableError::Header { .. })));
        let bad = "t_s,theta_deg,v_deg_s,quality\n0.0,x,0.0,GOOD\n";
        assert!(matches!(read_series(bad), Err(TableError::Row { line: 2, .. })));
        let bad = "t_s,theta_deg,v_deg_s,quality\n0.0,1.0,0.0,FINE\n";
        assert!(matches!(read_series(bad), Err(TableError::Row { .. })));
    }

    #[test]
    fn events_round_trip() {
        let events = vec![
            MarkerEvent {
                kind: MarkerKind::Hold { duration_s: 2.5, median_notch: Notch::FlxMoyen, non_neutral: true, micro_oscillation: false },
                start_s: 0.0,
                end_s: 2.5,
            },
            MarkerEvent {
                kind: MarkerKind::NodBurst { cycles: 4, crosses_neutral: true, max_peak_to_peak_p: 0.0, peak_speed_deg_s: 52.3 },
                start_s: 2.5,
                end_s: 5.0,
            },
            MarkerEvent { kind: MarkerKind::SpeedBand { band: SpeedBandKind::Mid, stat_deg_s: 40.0 }, start_s: 0.0, end_s: 5.0 },
        ];
        let text = write_events(&events);
        assert!(text.contains("HOLD,0.000000,2.500000,FLX_MOYEN,true,false\n"));
        assert!(text.contains("NOD,2.500000,5.000000,4,true,52.300000\n"));
        assert!(text.contains("SPEED,0.000000,5.000000,MID,40.000000,\n"));
        assert_eq!(read_events(&text).unwrap(), events);
    }
}
