//! Calibration profile files.
//!
//! ```json
//! {"subject_id": "fr01", "segment": "COU", "dof": "FLXEXT",
//!  "rest_deg": 104.0, "flx_limit_deg": 140.0, "ext_limit_deg": 88.0}
//! ```
//!
//! A file holds one such object, or an array of them for several subjects.

use episteme_core::calibration::{CalibrationError, CalibrationProfile};
use episteme_core::dof::{DofId, SegmentId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("malformed profile JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown segment {0:?}")]
    Segment(String),
    #[error("unknown degree of freedom {0:?}")]
    Dof(String),
    #[error("file holds no profile for subject {subject:?}")]
    NotFound { subject: String },
    #[error("file holds {0} profiles; name the subject to pick one")]
    Ambiguous(usize),
    #[error(transparent)]
    Invalid(#[from] CalibrationError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProfileRecord {
    subject_id: String,
    segment: String,
    dof: String,
    rest_deg: f64,
    flx_limit_deg: f64,
    ext_limit_deg: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(ProfileRecord),
    Many(Vec<ProfileRecord>),
}

impl TryFrom<ProfileRecord> for CalibrationProfile {
    type Error = ProfileError;

    fn try_from(r: ProfileRecord) -> Result<Self, ProfileError> {
        let segment: SegmentId = r.segment.parse().map_err(|_| ProfileError::Segment(r.segment.clone()))?;
        let dof: DofId = r.dof.parse().map_err(|_| ProfileError::Dof(r.dof.clone()))?;
        Ok(CalibrationProfile::new(r.subject_id, segment, dof, r.rest_deg, r.flx_limit_deg, r.ext_limit_deg)?)
    }
}

pub fn read_profiles(text: &str) -> Result<Vec<CalibrationProfile>, ProfileError> {
    let records = match serde_json::from_str::<OneOrMany>(text)? {
        OneOrMany::One(r) => vec![r],
        OneOrMany::Many(v) => v,
    };
    records.into_iter().map(CalibrationProfile::try_from).collect()
}

/// The profile for `subject`, or the only profile when no subject is named.
pub fn read_profile(text: &str, subject: Option<&str>) -> Result<CalibrationProfile, ProfileError> {
    let mut profiles = read_profiles(text)?;
    match subject {
        Some(s) => profiles
            .into_iter()
            .find(|p| p.subject_id == s)
            .ok_or_else(|| ProfileError::NotFound { subject: s.to_string() }),
        None if profiles.len() == 1 => Ok(profiles.remove(0)),
        None => Err(ProfileError::Ambiguous(profiles.len())),
    }
}

pub fn write_profile(profile: &CalibrationProfile) -> String {
    let record = ProfileRecord {
        subject_id: profile.subject_id.clone(),
        segment: profile.segment.as_str().to_string(),
        dof: profile.dof.to_string(),
        rest_deg: profile.rest_deg,
        flx_limit_deg: profile.flx_limit_deg,
        ext_limit_deg: profile.ext_limit_deg,
    };
    let mut out = serde_json::to_string_pretty(&record).unwrap_or_default();
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = CalibrationProfile::neck("fr01", 104.0, 140.0, 88.0).unwrap();
        let text = write_profile(&p);
        assert!(text.contains("\"segment\": \"COU\""));
        assert!(text.contains("\"dof\": \"FLXEXT\""));
        assert_eq!(read_profile(&text, None).unwrap(), p);
        assert_eq!(read_profile(&text, Some("fr01")).unwrap(), p);
        assert!(matches!(read_profile(&text, Some("lsf01")), Err(ProfileError::NotFound { .. })));
    }

    #[test]
    fn arrays_and_errors() {
        let text = r#"[
            {"subject_id":"fr01","segment":"COU","dof":"FLXEXT","rest_deg":104,"flx_limit_deg":140,"ext_limit_deg":88},
            {"subject_id":"lsf01","segment":"COU","dof":"FLXEXT","rest_deg":97,"flx_limit_deg":137,"ext_limit_deg":53}
        ]"#;
        assert_eq!(read_profiles(text).unwrap().len(), 2);
        assert_eq!(read_profile(text, Some("lsf01")).unwrap().ext_limit_deg, 53.0);
        assert!(matches!(read_profile(text, None), Err(ProfileError::Ambiguous(2))));
        let bad_order = r#"{"subject_id":"x","segment":"COU","dof":"FLXEXT","rest_deg":150,"flx_limit_deg":140,"ext_limit_deg":88}"#;
        assert!(matches!(read_profile(bad_order, None), Err(ProfileError::Invalid(_))));
        let bad_dof = bad_order.replace("FLXEXT", "TWIST");
        assert!(matches!(read_profile(&bad_dof, None), Err(ProfileError::Dof(_))));
    }
}
