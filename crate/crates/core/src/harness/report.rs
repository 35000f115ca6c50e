use std::io::{Read, Write};

use super::{sweep_bounds, ErrorBound, HarnessError, Prediction, PredictionPair};

const REPORT_HEADER: [&str; 5] = ["model_id", "scene_id", "epsilon_degrees", "count", "total_frames"];
const FLAGS_HEADER: [&str; 3] = ["frame_id", "epsilon_degrees", "violated"];
const PREDICTIONS_HEADER: [&str; 2] = ["frame_id", "angle_degrees"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub epsilon: f64,
    pub count: usize,
    pub total_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFlag {
    pub frame_id: String,
    pub epsilon: f64,
    pub violated: bool,
}

/// Inconsistency counts of one model on one scene across bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct InconsistencyReport {
    pub model_id: String,
    pub scene_id: String,
    pub rows: Vec<ReportRow>,
    pub per_frame_flags: Option<Vec<FrameFlag>>,
}

/// Adjacent rows whose counts increase with the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub model_id: String,
    pub scene_id: String,
    pub lower: ReportRow,
    pub higher: ReportRow,
}

impl InconsistencyReport {
    pub fn build(
        model_id: impl Into<String>,
        scene_id: impl Into<String>,
        pairs: &[PredictionPair<'_>],
        bounds: &[ErrorBound],
        with_flags: bool,
    ) -> Result<Self, HarnessError> {
        let rows = sweep_bounds(pairs, bounds)?;
        let per_frame_flags = with_flags.then(|| {
            pairs
                .iter()
                .flat_map(|p| {
                    bounds.iter().map(move |&b| FrameFlag {
                        frame_id: p.frame_id.to_string(),
                        epsilon: b.degrees(),
                        violated: b.violated_by(p),
                    })
                })
                .collect()
        });
        Ok(Self {
            model_id: model_id.into(),
            scene_id: scene_id.into(),
            rows,
            per_frame_flags,
        })
    }
}

/// Violations across all reports; rows are compared in ascending bound order.
pub fn check_monotone(reports: &[InconsistencyReport]) -> Vec<MonotonicityViolation> {
    let mut out = Vec::new();
    for r in reports {
        let mut rows = r.rows.clone();
        rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
        for w in rows.windows(2) {
            if w[1].count > w[0].count {
                out.push(MonotonicityViolation {
                    model_id: r.model_id.clone(),
                    scene_id: r.scene_id.clone(),
                    lower: w[0],
                    higher: w[1],
                });
            }
        }
    }
    out
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str], what: &str) -> Result<(), HarnessError> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(HarnessError::Schema {
            what: what.into(),
            line: 1,
            message: format!("expected header {:?}, got {:?}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, what: &str) -> Result<T, HarnessError> {
    let line = record.position().map_or(0, |p| p.line() as usize);
    let raw = record.get(i).ok_or_else(|| HarnessError::Schema {
        what: what.into(),
        line,
        message: format!("missing column {}", i + 1),
    })?;
    raw.trim().parse().map_err(|_| HarnessError::Schema {
        what: what.into(),
        line,
        message: format!("cannot parse {raw:?}"),
    })
}

/// Writes `model_id,scene_id,epsilon_degrees,count,total_frames`.
pub fn write_reports<W: Write>(out: W, reports: &[InconsistencyReport]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        for row in &r.rows {
            w.write_record([
                r.model_id.as_str(),
                r.scene_id.as_str(),
                &row.epsilon.to_string(),
                &row.count.to_string(),
                &row.total_frames.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a report CSV, grouping rows by `(model_id, scene_id)` in order of
/// first appearance. Rows with `count > total_frames` are schema errors.
pub fn read_reports<R: Read>(input: R) -> Result<Vec<InconsistencyReport>, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &REPORT_HEADER, "report")?;
    let mut reports: Vec<InconsistencyReport> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let (model_id, scene_id) = (&record[0], &record[1]);
        let row = ReportRow {
            epsilon: field(&record, 2, "report")?,
            count: field(&record, 3, "report")?,
            total_frames: field(&record, 4, "report")?,
        };
        if row.count > row.total_frames || !(row.epsilon > 0.0) {
            return Err(HarnessError::Schema {
                what: "report".into(),
                line: record.position().map_or(0, |p| p.line() as usize),
                message: format!("row out of range: {row:?}"),
            });
        }
        match reports.iter_mut().find(|r| r.model_id == model_id && r.scene_id == scene_id) {
            Some(r) => r.rows.push(row),
            None => reports.push(InconsistencyReport {
                model_id: model_id.to_string(),
                scene_id: scene_id.to_string(),
                rows: vec![row],
                per_frame_flags: None,
            }),
        }
    }
    Ok(reports)
}

/// Writes `frame_id,epsilon_degrees,violated` (violated as 0/1).
pub fn write_flags<W: Write>(out: W, flags: &[FrameFlag]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FLAGS_HEADER)?;
    for f in flags {
        w.write_record([f.frame_id.as_str(), &f.epsilon.to_string(), if f.violated { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `frame_id,angle_degrees`.
pub fn write_predictions<W: Write>(out: W, predictions: &[Prediction]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDICTIONS_HEADER)?;
    for p in predictions {
        w.write_record([p.frame_id.as_str(), &p.degrees.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<Prediction>, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &PREDICTIONS_HEADER, "predictions")?;
    reader
        .records()
        .map(|r| {
            let r = r?;
            Ok(Prediction {
                frame_id: r[0].to_string(),
                degrees: field(&r, 1, "predictions")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> InconsistencyReport {
        InconsistencyReport {
            model_id: "Rwightman".into(),
            scene_id: "snowy".into(),
            rows: [(10.0, 334), (20.0, 115), (30.0, 45), (40.0, 14)]
                .iter()
                .map(|&(epsilon, count)| ReportRow {
                    epsilon,
                    count,
                    total_frames: 5614,
                })
                .collect(),
            per_frame_flags: None,
        }
    }

    #[test]
    fn fixture_round_trips_and_is_monotone() {
        let mut buf = Vec::new();
        write_reports(&mut buf, &[fixture()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("model_id,scene_id,epsilon_degrees,count,total_frames\nRwightman,snowy,10,334,5614\n"));
        let back = read_reports(&buf[..]).unwrap();
        assert_eq!(back, vec![fixture()]);
        assert!(check_monotone(&back).is_empty());
    }

    #[test]
    fn increasing_counts_are_flagged() {
        let mut r = fixture();
        r.rows[2].count = 200;
        let v = check_monotone(&[r]);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].lower.epsilon, v[0].higher.epsilon), (20.0, 30.0));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(read_reports("a,b\n1,2\n".as_bytes()), Err(HarnessError::Schema { .. })));
        let bad_count = "model_id,scene_id,epsilon_degrees,count,total_frames\nm,s,10,5,4\n";
        assert!(matches!(read_reports(bad_count.as_bytes()), Err(HarnessError::Schema { .. })));
        let bad_number = "model_id,scene_id,epsilon_degrees,count,total_frames\nm,s,ten,1,4\n";
        assert!(matches!(read_reports(bad_number.as_bytes()), Err(HarnessError::Schema { line: 2, .. })));
    }

    #[test]
    fn predictions_round_trip() {
        let p = vec![
            Prediction {
                frame_id: "a".into(),
                degrees: -1.25,
            },
            Prediction {
                frame_id: "b,c".into(),
                degrees: 0.1 + 0.2,
            },
        ];
        let mut buf = Vec::new();
        write_predictions(&mut buf, &p).unwrap();
        assert_eq!(read_predictions(&buf[..]).unwrap(), p);
    }

    #[test]
    fn flags_mark_strict_violations() {
        let a = [Prediction {
            frame_id: "f".into(),
            degrees: 0.0,
        }];
        let b = [Prediction {
            frame_id: "f".into(),
            degrees: 20.0,
        }];
        let pairs = super::super::pair_predictions(&a, &b).unwrap();
        let r = InconsistencyReport::build("m", "s", &pairs, &ErrorBound::defaults(), true).unwrap();
        let flags = r.per_frame_flags.unwrap();
        assert_eq!(flags.iter().map(|f| f.violated).collect::<Vec<_>>(), vec![true, false, false, false]);
        let mut buf = Vec::new();
        write_flags(&mut buf, &flags).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("frame_id,epsilon_degrees,violated\nf,10,1\nf,20,0\n"));
    }
}
