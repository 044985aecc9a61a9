//! ELAN annotation files, restricted to time-alignable tiers.
//!
//! The reader resolves every `ALIGNABLE_ANNOTATION` to absolute milliseconds
//! through the document's `TIME_ORDER` and skips elements it does not know.
//! The writer is hand-rolled so that identical tiers always give identical
//! bytes: tiers sorted by id, one time slot per distinct time, slots sorted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use episteme_core::agreement::{Annotation, Tier, TierError};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

pub const LINGUISTIC_TYPE: &str = "default-lt";
/// DATE written when the caller supplies none, keeping output reproducible.
pub const DEFAULT_DATE: &str = "1970-01-01T00:00:00+00:00";
pub const DEFAULT_AUTHOR: &str = "episteme";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MediaDescriptor {
    pub url: String,
    pub mime_type: String,
}

impl MediaDescriptor {
    /// Guesses the MIME type from the file extension.
    pub fn for_path(url: impl Into<String>) -> Self {
        let url = url.into();
        let ext = url.rsplit('.').next().unwrap_or("").to_ascii_lowercase();
        let mime_type = match ext.as_str() {
            "mp4" | "m4v" => "video/mp4",
            "mov" => "video/quicktime",
            "mpg" | "mpeg" => "video/mpeg",
            "wav" => "audio/x-wav",
            _ => "unknown",
        };
        MediaDescriptor { url, mime_type: mime_type.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EafDocument {
    pub author: String,
    pub date: String,
    pub media: Option<MediaDescriptor>,
    /// In document order.
    pub tiers: Vec<Tier>,
}

impl EafDocument {
    pub fn new(tiers: Vec<Tier>) -> Self {
        EafDocument { author: DEFAULT_AUTHOR.into(), date: DEFAULT_DATE.into(), media: None, tiers }
    }

    pub fn tier(&self, id: &str) -> Option<&Tier> {
        self.tiers.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Error)]
pub enum EafError {
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: u64, message: String },
    #[error("not an EAF document: {0}")]
    Structure(String),
    #[error("<{element}> lacks attribute {attribute}")]
    MissingAttribute { element: &'static str, attribute: &'static str },
    #[error("time slot {slot}: bad TIME_VALUE {value:?}")]
    BadTime { slot: String, value: String },
    #[error("annotation {annotation} references undefined time slot {slot}")]
    DanglingSlot { annotation: String, slot: String },
    #[error("annotation {annotation} references time slot {slot}, which has no time value")]
    UnalignedSlot { annotation: String, slot: String },
    #[error("tier id {0} appears twice")]
    DuplicateTier(String),
    #[error(transparent)]
    Tier(#[from] TierError),
}

struct PendingAnnotation {
    id: String,
    ref1: String,
    ref2: String,
    value: String,
}

fn attr(e: &BytesStart<'_>, name: &[u8]) -> Result<Option<String>, EafError> {
    for a in e.attributes() {
        let a = a.map_err(|err| EafError::Structure(format!("bad attribute: {err}")))?;
        if a.key.as_ref() == name {
            let v = a.unescape_value().map_err(|err| EafError::Structure(format!("bad attribute value: {err}")))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn required(e: &BytesStart<'_>, element: &'static str, name: &'static str) -> Result<String, EafError> {
    attr(e, name.as_bytes())?.ok_or(EafError::MissingAttribute { element, attribute: name })
}

pub fn read_eaf(bytes: &[u8]) -> Result<EafDocument, EafError> {
    let mut reader = Reader::from_reader(bytes);
    let mut buf = Vec::new();

    let mut doc = EafDocument { author: String::new(), date: String::new(), media: None, tiers: Vec::new() };
    let mut seen_root = false;
    let mut slots: BTreeMap<String, Option<u64>> = BTreeMap::new();
    let mut tiers: Vec<(String, Vec<PendingAnnotation>)> = Vec::new();
    let mut depth = 0usize;
    let mut in_tier = false;
    let mut current: Option<PendingAnnotation> = None;
    let mut in_value = false;

    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| EafError::Xml {
            position: reader.error_position(),
            message: e.to_string(),
        })?;
        let (start, empty) = match &event {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            _ => (None, false),
        };
        if let Some(e) = start {
            if depth == 0 {
                if e.name().as_ref() != b"ANNOTATION_DOCUMENT" {
                    return Err(EafError::Structure(format!(
                        "root element is <{}>",
                        String::from_utf8_lossy(e.name().as_ref())
                    )));
                }
                seen_root = true;
                doc.author = attr(&e, b"AUTHOR")?.unwrap_or_default();
                doc.date = attr(&e, b"DATE")?.unwrap_or_default();
            }
            match e.name().as_ref() {
                b"MEDIA_DESCRIPTOR" if doc.media.is_none() => {
                    doc.media = Some(MediaDescriptor {
                        url: attr(&e, b"MEDIA_URL")?.unwrap_or_default(),
                        mime_type: attr(&e, b"MIME_TYPE")?.unwrap_or_default(),
                    });
                }
                b"TIME_SLOT" => {
                    let id = required(&e, "TIME_SLOT", "TIME_SLOT_ID")?;
                    let value = match attr(&e, b"TIME_VALUE")? {
                        None => None,
                        Some(v) => Some(v.trim().parse::<u64>().map_err(|_| EafError::BadTime { slot: id.clone(), value: v })?),
                    };
                    slots.insert(id, value);
                }
                b"TIER" => {
                    tiers.push((required(&e, "TIER", "TIER_ID")?, Vec::new()));
                    in_tier = !empty;
                }
                b"ALIGNABLE_ANNOTATION" if in_tier => {
                    current = Some(PendingAnnotation {
                        id: required(&e, "ALIGNABLE_ANNOTATION", "ANNOTATION_ID")?,
                        ref1: required(&e, "ALIGNABLE_ANNOTATION", "TIME_SLOT_REF1")?,
                        ref2: required(&e, "ALIGNABLE_ANNOTATION", "TIME_SLOT_REF2")?,
                        value: String::new(),
                    });
                    if empty {
                        finish(&mut current, &mut tiers);
                    }
                }
                b"ANNOTATION_VALUE" => in_value = !empty && current.is_some(),
                _ => {}
            }
            if !empty {
                depth += 1;
            }
            buf.clear();
            continue;
        }
        match event {
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                match e.name().as_ref() {
                    b"ANNOTATION_VALUE" => in_value = false,
                    b"ALIGNABLE_ANNOTATION" => finish(&mut current, &mut tiers),
                    b"TIER" => in_tier = false,
                    _ => {}
                }
            }
            Event::Text(t) if in_value => {
                let text = t.unescape().map_err(|e| EafError::Xml {
                    position: reader.buffer_position(),
                    message: e.to_string(),
                })?;
                if let Some(a) = current.as_mut() {
                    a.value.push_str(&text);
                }
            }
            Event::CData(t) if in_value => {
                if let Some(a) = current.as_mut() {
                    a.value.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !seen_root {
        return Err(EafError::Structure("no ANNOTATION_DOCUMENT element".into()));
    }
    if depth != 0 {
        return Err(EafError::Xml { position: bytes.len() as u64, message: "unexpected end of document".into() });
    }

    let resolve = |annotation: &str, slot: &str| -> Result<u64, EafError> {
        match slots.get(slot) {
            None => Err(EafError::DanglingSlot { annotation: annotation.into(), slot: slot.into() }),
            Some(None) => Err(EafError::UnalignedSlot { annotation: annotation.into(), slot: slot.into() }),
            Some(Some(ms)) => Ok(*ms),
        }
    };
    for (id, pending) in tiers {
        let mut annotations = Vec::with_capacity(pending.len());
        for a in pending {
            annotations.push(Annotation::new(resolve(&a.id, &a.ref1)?, resolve(&a.id, &a.ref2)?, a.value));
        }
        doc.tiers.push(Tier { id, annotations });
    }
    Ok(doc)
}

fn finish(current: &mut Option<PendingAnnotation>, tiers: &mut [(String, Vec<PendingAnnotation>)]) {
    if let (Some(a), Some(tier)) = (current.take(), tiers.last_mut()) {
        tier.1.push(a);
    }
}

fn escape(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    escape(s, &mut out);
    out
}

/// Writes `tiers` with the default author and date.
pub fn write_eaf(tiers: &[Tier], media: Option<&MediaDescriptor>) -> Result<String, EafError> {
    let mut doc = EafDocument::new(tiers.to_vec());
    doc.media = media.cloned();
    write_document(&doc)
}

pub fn write_document(doc: &EafDocument) -> Result<String, EafError> {
    let mut ids = BTreeSet::new();
    for tier in &doc.tiers {
        tier.validate()?;
        if !ids.insert(tier.id.as_str()) {
            return Err(EafError::DuplicateTier(tier.id.clone()));
        }
    }
    let mut tiers: Vec<&Tier> = doc.tiers.iter().collect();
    tiers.sort_by(|a, b| a.id.cmp(&b.id));

    let times: BTreeSet<u64> =
        doc.tiers.iter().flat_map(|t| t.annotations.iter().flat_map(|a| [a.start_ms, a.end_ms])).collect();
    let slot_of: BTreeMap<u64, usize> = times.iter().enumerate().map(|(i, &t)| (t, i + 1)).collect();

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<ANNOTATION_DOCUMENT AUTHOR=\"{}\" DATE=\"{}\" FORMAT=\"3.0\" VERSION=\"3.0\">",
        esc(&doc.author),
        esc(&doc.date)
    );
    match &doc.media {
        Some(m) => {
            out.push_str("    <HEADER MEDIA_FILE=\"\" TIME_UNITS=\"milliseconds\">\n");
            let _ = writeln!(out, "        <MEDIA_DESCRIPTOR MEDIA_URL=\"{}\" MIME_TYPE=\"{}\"/>", esc(&m.url), esc(&m.mime_type));
            out.push_str("    </HEADER>\n");
        }
        None => out.push_str("    <HEADER MEDIA_FILE=\"\" TIME_UNITS=\"milliseconds\"/>\n"),
    }
    if times.is_empty() {
        out.push_str("    <TIME_ORDER/>\n");
    } else {
        out.push_str("    <TIME_ORDER>\n");
        for (&t, &i) in &slot_of {
            let _ = writeln!(out, "        <TIME_SLOT TIME_SLOT_ID=\"ts{i}\" TIME_VALUE=\"{t}\"/>");
        }
        out.push_str("    </TIME_ORDER>\n");
    }
    let mut next_id = 1;
    for tier in tiers {
        let mut annotations: Vec<&Annotation> = tier.annotations.iter().collect();
        annotations.sort_by_key(|a| (a.start_ms, a.end_ms));
        let open = format!("    <TIER LINGUISTIC_TYPE_REF=\"{LINGUISTIC_TYPE}\" TIER_ID=\"{}\"", esc(&tier.id));
        if annotations.is_empty() {
            let _ = writeln!(out, "{open}/>");
            continue;
        }
        let _ = writeln!(out, "{open}>");
        for a in annotations {
            out.push_str("        <ANNOTATION>\n");
            let _ = writeln!(
                out,
                "            <ALIGNABLE_ANNOTATION ANNOTATION_ID=\"a{next_id}\" TIME_SLOT_REF1=\"ts{}\" TIME_SLOT_REF2=\"ts{}\">",
                slot_of[&a.start_ms], slot_of[&a.end_ms]
            );
            out.push_str("                <ANNOTATION_VALUE>");
            escape(&a.value, &mut out);
            out.push_str("</ANNOTATION_VALUE>\n");
            out.push_str("            </ALIGNABLE_ANNOTATION>\n");
            out.push_str("        </ANNOTATION>\n");
            next_id += 1;
        }
        out.push_str("    </TIER>\n");
    }
    let _ = writeln!(
        out,
        "    <LINGUISTIC_TYPE GRAPHIC_REFERENCES=\"false\" LINGUISTIC_TYPE_ID=\"{LINGUISTIC_TYPE}\" TIME_ALIGNABLE=\"true\"/>"
    );
    out.push_str("</ANNOTATION_DOCUMENT>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<ANNOTATION_DOCUMENT AUTHOR="" DATE="2010-05-01T10:00:00+01:00" FORMAT="3.0" VERSION="3.0">
  <HEADER MEDIA_FILE="" TIME_UNITS="milliseconds">
    <MEDIA_DESCRIPTOR MEDIA_URL="file:///clip.mp4" MIME_TYPE="video/mp4"/>
    <PROPERTY NAME="lastUsedAnnotationId">1</PROPERTY>
  </HEADER>
  <TIME_ORDER>
    <TIME_SLOT TIME_SLOT_ID="ts1" TIME_VALUE="0"/>
    <TIME_SLOT TIME_SLOT_ID="ts2" TIME_VALUE="1000"/>
  </TIME_ORDER>
  <TIER LINGUISTIC_TYPE_REF="default-lt" TIER_ID="EPISTEME">
    <ANNOTATION>
      <ALIGNABLE_ANNOTATION ANNOTATION_ID="a1" TIME_SLOT_REF1="ts1" TIME_SLOT_REF2="ts2">
        <ANNOTATION_VALUE>CERT</ANNOTATION_VALUE>
      </ALIGNABLE_ANNOTATION>
    </ANNOTATION>
  </TIER>
  <LINGUISTIC_TYPE GRAPHIC_REFERENCES="false" LINGUISTIC_TYPE_ID="default-lt" TIME_ALIGNABLE="true"/>
  <CONSTRAINT DESCRIPTION="Time subdivision" STEREOTYPE="Time_Subdivision"/>
</ANNOTATION_DOCUMENT>
"#;

    #[test]
    fn minimal_document() {
        let doc = read_eaf(MINIMAL.as_bytes()).unwrap();
        assert_eq!(doc.tiers.len(), 1);
        assert_eq!(doc.tiers[0].id, "EPISTEME");
        assert_eq!(doc.tiers[0].annotations, vec![Annotation::new(0, 1000, "CERT")]);
        assert_eq!(doc.media.as_ref().unwrap().mime_type, "video/mp4");
        assert_eq!(doc.date, "2010-05-01T10:00:00+01:00");
    }

    #[test]
    fn shared_slots_resolve_identically() {
        let text = MINIMAL.replace(
            "  <LINGUISTIC_TYPE",
            r#"  <TIER LINGUISTIC_TYPE_REF="default-lt" TIER_ID="OTHER">
    <ANNOTATION>
      <ALIGNABLE_ANNOTATION ANNOTATION_ID="a2" TIME_SLOT_REF1="ts1" TIME_SLOT_REF2="ts2">
        <ANNOTATION_VALUE>INCERT</ANNOTATION_VALUE>
      </ALIGNABLE_ANNOTATION>
    </ANNOTATION>
  </TIER>
  <LINGUISTIC_TYPE"#,
        );
        let doc = read_eaf(text.as_bytes()).unwrap();
        let a = &doc.tier("EPISTEME").unwrap().annotations[0];
        let b = &doc.tier("OTHER").unwrap().annotations[0];
        assert_eq!((a.start_ms, a.end_ms), (b.start_ms, b.end_ms));
    }

    #[test]
    fn dangling_slot_is_named() {
        let text = MINIMAL.replace("TIME_SLOT_REF2=\"ts2\"", "TIME_SLOT_REF2=\"ts9\"");
        match read_eaf(text.as_bytes()) {
            Err(EafError::DanglingSlot { slot, annotation }) => {
                assert_eq!(slot, "ts9");
                assert_eq!(annotation, "a1");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_xml() {
        let text = MINIMAL.replace("</TIER>", "</TIERS>");
        assert!(matches!(read_eaf(text.as_bytes()), Err(EafError::Xml { .. })));
        let cut = &MINIMAL[..MINIMAL.len() / 2];
        assert!(read_eaf(cut.as_bytes()).is_err());
        assert!(matches!(read_eaf(b"<html/>"), Err(EafError::Structure(_))));
        assert!(matches!(read_eaf(b""), Err(EafError::Structure(_))));
    }

    #[test]
    fn minimal_round_trip() {
        let doc = read_eaf(MINIMAL.as_bytes()).unwrap();
        let written = write_document(&doc).unwrap();
        assert_eq!(read_eaf(written.as_bytes()).unwrap(), doc);
    }

    #[test]
    fn writer_layout() {
        let tiers = vec![
            Tier::new("B", vec![Annotation::new(500, 1000, "x & <y>")]).unwrap(),
            Tier::new("A", vec![Annotation::new(0, 500, "CERT"), Annotation::new(1000, 1500, "")]).unwrap(),
            Tier::new("C", vec![]).unwrap(),
        ];
        let out = write_eaf(&tiers, None).unwrap();
        let a = out.find("TIER_ID=\"A\"").unwrap();
        let b = out.find("TIER_ID=\"B\"").unwrap();
        assert!(a < b);
        assert!(out.contains("TIME_SLOT_ID=\"ts1\" TIME_VALUE=\"0\""));
        assert!(out.contains("TIME_SLOT_ID=\"ts4\" TIME_VALUE=\"1500\""));
        assert!(!out.contains("ts5"));
        assert!(out.contains("x &amp; &lt;y&gt;"));
        assert!(out.contains("<TIER LINGUISTIC_TYPE_REF=\"default-lt\" TIER_ID=\"C\"/>"));
        let back = read_eaf(out.as_bytes()).unwrap();
        let mut sorted = tiers.clone();
        sorted.sort_by(|x, y| x.id.cmp(&y.id));
        assert_eq!(back.tiers, sorted);
        assert_eq!(out, write_document(&back).unwrap());
    }

    #[test]
    fn writer_rejects_invalid_tiers() {
        let overlapping = Tier {
            id: "X".into(),
            annotations: vec![Annotation::new(0, 1000, "a"), Annotation::new(500, 1500, "b")],
        };
        assert!(matches!(write_eaf(&[overlapping], None), Err(EafError::Tier(TierError::Overlap { .. }))));
        let t = Tier::new("X", vec![]).unwrap();
        assert!(matches!(write_eaf(&[t.clone(), t], None), Err(EafError::DuplicateTier(_))));
    }
}
