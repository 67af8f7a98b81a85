use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::display_name;
use crate::model::IdentityLabel;

pub const MANIFEST_COLUMNS: [&str; 12] = [
    "label",
    "im_name",
    "frame_num",
    "x1",
    "y1",
    "x2",
    "y2",
    "conf",
    "vid_name",
    "track_id",
    "crop_id",
    "invalid",
];

/// One person crop with its spatial and temporal metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CropRecord {
    pub label: Option<IdentityLabel>,
    pub im_name: String,
    pub frame_num: u64,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    /// Person detector confidence.
    pub conf: f64,
    pub vid_name: String,
    pub track_id: i64,
    /// Position of the crop within its track.
    pub crop_id: i64,
    /// The crop does not show a clear person.
    pub invalid: bool,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    label: String,
    im_name: String,
    frame_num: u64,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    conf: f64,
    vid_name: String,
    track_id: i64,
    crop_id: i64,
    invalid: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CropManifest {
    records: Vec<CropRecord>,
}

impl CropManifest {
    /// Validate in-memory records. Errors report record `i` as line `i + 2`,
    /// where it would sit in a written file.
    pub fn new(records: Vec<CropRecord>) -> Result<Self> {
        validate(&records, "<memory>", |i| i as u64 + 2)?;
        Ok(CropManifest { records })
    }

    pub fn records(&self) -> &[CropRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CropRecord> {
        self.records.iter()
    }

    pub fn by_name(&self) -> HashMap<&str, &CropRecord> {
        self.records
            .iter()
            .map(|r| (r.im_name.as_str(), r))
            .collect()
    }
}

fn validate(records: &[CropRecord], file: &str, line_of: impl Fn(usize) -> u64) -> Result<()> {
    let mut names = HashSet::new();
    let mut keys = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        let line = line_of(i);
        if r.im_name.is_empty() {
            return Err(Error::validation(file, line, "empty im_name"));
        }
        if !(r.x1 < r.x2 && r.y1 < r.y2) {
            return Err(Error::validation(
                file,
                line,
                format!(
                    "crop `{}` box is not well-ordered (need x1 < x2 and y1 < y2)",
                    r.im_name
                ),
            ));
        }
        if !(0.0..=1.0).contains(&r.conf) {
            return Err(Error::validation(
                file,
                line,
                format!("crop `{}` conf {} outside [0,1]", r.im_name, r.conf),
            ));
        }
        if !names.insert(r.im_name.as_str()) {
            return Err(Error::validation(
                file,
                line,
                format!("duplicate im_name `{}`", r.im_name),
            ));
        }
        if !keys.insert((r.vid_name.as_str(), r.track_id, r.crop_id)) {
            return Err(Error::validation(
                file,
                line,
                format!(
                    "duplicate (vid_name, track_id, crop_id) = ({}, {}, {})",
                    r.vid_name, r.track_id, r.crop_id
                ),
            ));
        }
    }
    Ok(())
}

pub fn parse_crop_manifest<R: Read>(reader: R, file: &str) -> Result<CropManifest> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(file, 1, e.to_string()))?
        .clone();
    if headers.iter().ne(MANIFEST_COLUMNS.iter().copied()) {
        return Err(Error::parse(
            file,
            1,
            format!("header must be `{}`", MANIFEST_COLUMNS.join(",")),
        ));
    }

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(file, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let raw: RawRow = row
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(file, line, e.to_string()))?;
        let label = if raw.label.is_empty() {
            None
        } else {
            Some(
                raw.label
                    .parse()
                    .map_err(|e: Error| Error::validation(file, line, e.to_string()))?,
            )
        };
        let invalid = match raw.invalid.as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::parse(
                    file,
                    line,
                    format!("invalid must be `true` or `false`, got `{other}`"),
                ))
            }
        };
        records.push(CropRecord {
            label,
            im_name: raw.im_name,
            frame_num: raw.frame_num,
            x1: raw.x1,
            y1: raw.y1,
            x2: raw.x2,
            y2: raw.y2,
            conf: raw.conf,
            vid_name: raw.vid_name,
            track_id: raw.track_id,
            crop_id: raw.crop_id,
            invalid,
        });
        lines.push(line);
    }
    validate(&records, file, |i| lines[i])?;
    Ok(CropManifest { records })
}

pub fn load_crop_manifest(path: &Path) -> Result<CropManifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_crop_manifest(std::io::BufReader::new(file), &display_name(path))
}

pub fn write_crop_manifest<W: Write>(manifest: &CropManifest, writer: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Integrity(format!("manifest write failed: {e}"));
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    wtr.write_record(MANIFEST_COLUMNS).map_err(to_err)?;
    for r in &manifest.records {
        wtr.write_record([
            r.label.as_ref().map_or("", |l| l.as_str()),
            &r.im_name,
            &r.frame_num.to_string(),
            &r.x1.to_string(),
            &r.y1.to_string(),
            &r.x2.to_string(),
            &r.y2.to_string(),
            &r.conf.to_string(),
            &r.vid_name,
            &r.track_id.to_string(),
            &r.crop_id.to_string(),
            if r.invalid { "true" } else { "false" },
        ])
        .map_err(to_err)?;
    }
    wtr.flush()
        .map_err(|e| Error::Integrity(format!("manifest write failed: {e}")))
}

pub fn save_crop_manifest(manifest: &CropManifest, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_crop_manifest(manifest, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str =
        "label,im_name,frame_num,x1,y1,x2,y2,conf,vid_name,track_id,crop_id,invalid\n";

    fn parse(body: &str) -> Result<CropManifest> {
        parse_crop_manifest(format!("{HEADER}{body}").as_bytes(), "m.csv")
    }

    #[test]
    fn parses_three_rows() {
        let m = parse(concat!(
            "alice,a0.jpg,0,1,2,30,80,0.9,v1,1,0,false\n",
            ",a1.jpg,1,1,2,30,80,0.8,v1,1,1,true\n",
            "Unknown,b0.jpg,1,5,5,40,90,0.7,v1,2,0,false\n",
        ))
        .unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(
            m.records()[0].label,
            Some(IdentityLabel::known("alice").unwrap())
        );
        assert_eq!(m.records()[1].label, None);
        assert!(m.records()[1].invalid);
        assert_eq!(m.records()[2].label, Some(IdentityLabel::Unknown));
    }

    #[test]
    fn rejects_inverted_box_with_line() {
        let err = parse(
            "a,a0.jpg,0,1,2,30,80,0.9,v1,1,0,false\na,a1.jpg,0,30,2,30,80,0.9,v1,1,1,false\n",
        )
        .unwrap_err();
        match err {
            Error::Validation { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("a1.jpg"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_duplicate_name() {
        let err =
            parse("a,x.jpg,0,1,2,30,80,0.9,v1,1,0,false\na,x.jpg,1,1,2,30,80,0.9,v1,1,1,false\n")
                .unwrap_err();
        assert!(err.to_string().contains("duplicate im_name"));
    }

    #[test]
    fn rejects_duplicate_track_position() {
        let err =
            parse("a,x.jpg,0,1,2,30,80,0.9,v1,1,0,false\na,y.jpg,1,1,2,30,80,0.9,v1,1,0,false\n")
                .unwrap_err();
        assert!(err.to_string().contains("duplicate (vid_name"));
    }

    #[test]
    fn malformed_rows_are_parse_errors() {
        let err = parse("a,x.jpg,zero,1,2,30,80,0.9,v1,1,0,false\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("a,x.jpg,0,1,2,30,80,0.9,v1,1,0,yes\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_crop_manifest("label,im_name\n".as_bytes(), "m").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    fn arb_record(i: usize) -> impl Strategy<Value = CropRecord> {
        (
            prop::option::of(prop_oneof![
                Just("alice".to_string()),
                Just("bob".to_string()),
                Just("Unknown".to_string())
            ]),
            0u64..10_000,
            (
                -500.0..500.0f64,
                -500.0..500.0f64,
                0.5..200.0f64,
                0.5..200.0f64,
            ),
            0.0..=1.0f64,
            0usize..3,
            any::<bool>(),
        )
            .prop_map(
                move |(label, frame, (x, y, w, h), conf, vid, invalid)| CropRecord {
                    label: label.map(|l| l.parse().unwrap()),
                    im_name: format!("crop_{i}.jpg"),
                    frame_num: frame,
                    x1: x,
                    y1: y,
                    x2: x + w,
                    y2: y + h,
                    conf,
                    vid_name: format!("vid{vid}"),
                    track_id: (i / 4) as i64,
                    crop_id: i as i64,
                    invalid,
                },
            )
    }

    fn arb_manifest() -> impl Strategy<Value = CropManifest> {
        (0usize..12)
            .prop_flat_map(|n| (0..n).map(arb_record).collect::<Vec<_>>())
            .prop_map(|records| CropManifest::new(records).unwrap())
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(m in arb_manifest()) {
            let mut buf = Vec::new();
            write_crop_manifest(&m, &mut buf).unwrap();
            let back = parse_crop_manifest(buf.as_slice(), "rt").unwrap();
            prop_assert_eq!(&back, &m);
            let mut buf2 = Vec::new();
            write_crop_manifest(&back, &mut buf2).unwrap();
            prop_assert_eq!(buf, buf2);
        }
    }
}
