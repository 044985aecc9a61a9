//! The `episteme` command line.
//!
//! Every command reads files, writes files atomically under `--out`, and
//! prints a short report. Failures carry the pipeline stage that raised them
//! and map to exit codes: 2 input or parse error, 3 calibration error,
//! 4 internal invariant violation.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use episteme_core::agreement::{agreement, Annotation, AgreementReport, Tier};
use episteme_core::calibration::{
    build_profile, normalize_series, notch_of, CalibrationProfile, LandmarkLabel, Landmarks, NormalizedSeries, Notch,
};
use episteme_core::classify::{
    score_segment, summarize_corpus, ClassifyConfig, CorpusEntry, CorpusSummary, EpistemicLabel, EpistemicSegment,
};
use episteme_core::kinematics::{angle_series, smooth, velocity, AngleSeries, Estimator, VelocitySeries};
use episteme_core::markers::{
    detect_all, detect_holds, detect_nods, sort_events, speed_profile, DetectorConfig, Family, MarkerError, MarkerEvent,
    MarkerKind,
};
use episteme_core::pose::{fill_gaps, select_subject, DetectionRegion, KeypointSchema, PoseTrack};
use episteme_core::synth::{self, Evaluation, TrajectorySpec};
use episteme_core::typannot::{encode_records, series_to_records};
use thiserror::Error;

use crate::eaf::{read_eaf, write_document, EafDocument, MediaDescriptor};
use crate::plot::{plot_svg, PlotOptions};
use crate::pose_json::parse_pose_file;
use crate::profile::{read_profiles, write_profile};
use crate::tables::{read_events, read_series, series_rows, write_events, write_series};

/// Shortest notch run kept in the transcription export, seconds.
pub const NOTCH_MIN_RUN_S: f64 = 0.2;
/// IoU needed for a detection to match a planted event in `synth-test`.
pub const SYNTH_IOU_MIN: f64 = 0.5;

pub const PREDICTED_TIER: &str = "PREDICTED";
pub const EVIDENCE_TIER: &str = "EVIDENCE";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {message}")]
    Input { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Calibration { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Internal { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => 2,
            CliError::Calibration { .. } => 3,
            CliError::Internal { .. } => 4,
        }
    }
}

fn input(stage: &'static str, e: impl Display) -> CliError {
    CliError::Input { stage, message: e.to_string() }
}

fn calibration(stage: &'static str, e: impl Display) -> CliError {
    CliError::Calibration { stage, message: e.to_string() }
}

fn internal(stage: &'static str, e: impl Display) -> CliError {
    CliError::Internal { stage, message: e.to_string() }
}

#[derive(Debug, Parser)]
#[command(name = "episteme", version, about = "Neck flexion/extension markers of certainty and uncertainty from pose keypoints")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemaArg {
    Coco17,
    Halpe26,
}

impl From<SchemaArg> for KeypointSchema {
    fn from(s: SchemaArg) -> Self {
        match s {
            SchemaArg::Coco17 => KeypointSchema::Coco17,
            SchemaArg::Halpe26 => KeypointSchema::Halpe26,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    /// Vertical head-neck offset over shoulder width (frontal video).
    Proxy,
    /// Head-neck-hip interior angle (profile video).
    Interior,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Proxy => Estimator::SagittalProxy,
            EstimatorArg::Interior => Estimator::InteriorAngle,
        }
    }
}

fn parse_region(s: &str) -> Result<DetectionRegion, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("{x:?} is not a number")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        &[x, y, w, h] => DetectionRegion::new(x, y, w, h).map_err(|e| e.to_string()),
        _ => Err("expected x,y,w,h".into()),
    }
}

/// Options shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Keypoint layout; inferred from the first record when omitted.
    #[arg(long, global = true, value_enum)]
    pub schema: Option<SchemaArg>,
    /// Video frame rate.
    #[arg(long, global = true, default_value_t = 25.0)]
    pub fps: f64,
    #[arg(long, global = true, value_enum, default_value_t = EstimatorArg::Proxy)]
    pub estimator: EstimatorArg,
    /// Detection region around the speaker, pixels: x,y,w,h.
    #[arg(long, global = true, value_parser = parse_region, allow_hyphen_values = true)]
    pub region: Option<DetectionRegion>,
    /// Minimum hold duration, seconds.
    #[arg(long, global = true)]
    pub hold_min_s: Option<f64>,
    /// Speed under which the neck counts as still, deg/s.
    #[arg(long = "hold-vmax", global = true)]
    pub hold_vmax: Option<f64>,
    /// Speed statistic above which a segment is HIGH, deg/s
    #[arg(long, global = true)]
    pub speed_high: Option<f64>,
    /// Speed statistic below which a segment is LOW, deg/s
    #[arg(long, global = true)]
    pub speed_low: Option<f64>,
    /// Longest run of missing frames filled by interpolation.
    #[arg(long, global = true, default_value_t = 5)]
    pub max_gap: u64,
    /// Moving-average window, frames (odd).
    #[arg(long, global = true, default_value_t = 5)]
    pub smooth: usize,
    /// Tier holding manual CERT/INCERT segments
    #[arg(long, global = true, default_value = "EPISTEME")]
    pub tier_episteme: String,
    /// Tier holding REST, FLX_LIMIT and EXT_LIMIT landmarks
    #[arg(long, global = true, default_value = "CALIB")]
    pub tier_calib: String,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: None,
            fps: 25.0,
            estimator: EstimatorArg::Proxy,
            region: None,
            hold_min_s: None,
            hold_vmax: None,
            speed_high: None,
            speed_low: None,
            max_gap: 5,
            smooth: 5,
            tier_episteme: "EPISTEME".into(),
            tier_calib: "CALIB".into(),
            out: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn detector(&self) -> Result<DetectorConfig, CliError> {
        let mut cfg = DetectorConfig::default();
        if let Some(v) = self.hold_min_s {
            cfg.hold_min_s = v;
        }
        if let Some(v) = self.hold_vmax {
            cfg.hold_v_max = v;
        }
        if let Some(v) = self.speed_high {
            cfg.speed_high = v;
        }
        if let Some(v) = self.speed_low {
            cfg.speed_low = v;
        }
        cfg.validate().map_err(|e| input("config", e))?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(input("config", format!("--fps must be positive, got {}", self.fps)));
        }
        if self.smooth == 0 || self.smooth.is_multiple_of(2) {
            return Err(input("config", format!("--smooth must be odd and positive, got {}", self.smooth)));
        }
        Ok(())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a calibration profile from annotated landmark instants.
    Calibrate(CalibrateArgs),
    /// Detect markers and label epistemic segments.
    Analyze(AnalyzeArgs),
    /// Draw position and velocity charts as SVG.
    Plot(PlotArgs),
    /// Inter-annotator agreement between two EAF files.
    Agree(AgreeArgs),
    /// Score the detectors against the bundled synthetic trajectories.
    SynthTest(SynthTestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub pose: PathBuf,
    #[arg(long)]
    pub eaf: PathBuf,
    /// Subject id stored in the profile; defaults to the pose file stem.
    #[arg(long)]
    pub subject: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub pose: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    /// Manual segments; without it the whole file is one segment.
    #[arg(long)]
    pub eaf: Option<PathBuf>,
    /// Language tag for the summary rows.
    #[arg(long, default_value = "UND")]
    pub lang: String,
    /// Subject to analyze; must match the profile.
    #[arg(long)]
    pub subject: Option<String>,
    /// Media URL recorded in the predictions EAF.
    #[arg(long)]
    pub media: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Draw position on the normalized scale with notch gridlines.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AgreeArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Tier compared in both files; defaults to --tier-episteme.
    #[arg(long)]
    pub tier: Option<String>,
    /// Tier read from the second file when it differs.
    #[arg(long)]
    pub tier_b: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthTestArgs {
    /// A trajectory spec (JSON) to score instead of the bundled suite.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Noise level of the noisy pass, in normalized units.
    #[arg(long, default_value_t = 0.02)]
    pub sigma: f64,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let to_err = e.use_stderr();
            let _ = if to_err { write!(stderr, "{}", e.render()) } else { write!(stdout, "{}", e.render()) };
            return if to_err { 2 } else { 0 };
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Calibrate(a) => cmd_calibrate(&cli.run, a, stdout, stderr).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(&cli.run, a, stdout).map(|_| ()),
        Command::Plot(a) => cmd_plot(&cli.run, a, stdout).map(|_| ()),
        Command::Agree(a) => cmd_agree(&cli.run, a, stdout).map(|_| ()),
        Command::SynthTest(a) => cmd_synth_test(&cli.run, a, stdout).map(|_| ()),
    }
}

fn read_bytes(stage: &'static str, path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| input(stage, format!("cannot read {}: {e}", path.display())))
}

fn read_text(stage: &'static str, path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_bytes(stage, path)?).map_err(|_| input(stage, format!("{} is not UTF-8", path.display())))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| input("output", format!("cannot create {}: {e}", dir.display())))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| input("output", format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| input("output", format!("cannot rename onto {}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "subject".into())
}

/// The subject's track: chosen by region when one is given, otherwise the
/// longest track (lower person id on ties).
fn subject_track(run: &RunConfig, path: &Path) -> Result<PoseTrack, CliError> {
    let bytes = read_bytes("pose", path)?;
    let tracks = parse_pose_file(&bytes, run.schema.map(Into::into), run.fps).map_err(|e| input("pose", e))?;
    if tracks.is_empty() {
        return Err(input("pose", format!("{} holds no detections", path.display())));
    }
    let track = match &run.region {
        Some(region) => select_subject(&tracks, region).map_err(|e| input("pose", e))?,
        None => tracks.iter().max_by(|a, b| a.len().cmp(&b.len()).then(b.person_id.cmp(&a.person_id))).unwrap_or(&tracks[0]),
    };
    Ok(fill_gaps(track, run.max_gap))
}

/// Smoothed raw angle and its velocity.
fn kinematics(run: &RunConfig, track: &PoseTrack, subject: &str) -> Result<(AngleSeries, VelocitySeries), CliError> {
    let raw = angle_series(track, run.estimator.into(), subject).map_err(|e| input("kinematics", e))?;
    let smoothed = smooth(&raw, run.smooth).map_err(|e| input("kinematics", e))?;
    let vel = velocity(&smoothed).map_err(|e| input("kinematics", e))?;
    Ok((smoothed, vel))
}

fn fmt_deg(x: f64) -> String {
    format!("{x:.3}")
}

fn fmt_p(x: f64) -> String {
    let s = format!("{x:+.6}");
    if s == "-0.000000" {
        "+0.000000".into()
    } else {
        s
    }
}

/// Aligned columns separated by two spaces.
fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Raw angles of the landmarks and of every notch boundary.
pub fn correspondence_table(profile: &CalibrationProfile) -> String {
    let mut rows = vec![vec!["landmark".to_string(), "raw_deg".into(), "p".into(), "notch".into()]];
    for (label, deg) in [
        (LandmarkLabel::FlxLimit, profile.flx_limit_deg),
        (LandmarkLabel::Rest, profile.rest_deg),
        (LandmarkLabel::ExtLimit, profile.ext_limit_deg),
    ] {
        let p = profile.normalize(deg);
        let notch = notch_of(p).map_or("?", Notch::as_str);
        rows.push(vec![label.as_str().into(), fmt_deg(deg), fmt_p(p), notch.into()]);
    }
    let mut out = table(&rows);
    out.push('\n');
    let mut rows = vec![vec!["notch".to_string(), "from_deg".into(), "to_deg".into()]];
    for notch in Notch::ALL.iter().rev() {
        let (lo, hi) = notch.interval();
        rows.push(vec![notch.as_str().into(), fmt_deg(profile.denormalize(hi)), fmt_deg(profile.denormalize(lo))]);
    }
    out.push_str(&table(&rows));
    out
}

pub fn cmd_calibrate(
    run: &RunConfig,
    args: &CalibrateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<CalibrationProfile, CliError> {
    run.check()?;
    let doc = read_eaf(&read_bytes("eaf", &args.eaf)?).map_err(|e| input("eaf", e))?;
    let tier = doc.tier(&run.tier_calib).ok_or_else(|| {
        calibration("calibration", format!("{} has no {} tier", args.eaf.display(), run.tier_calib))
    })?;
    let instant = |label: LandmarkLabel| -> Result<f64, CliError> {
        tier.annotations
            .iter()
            .find(|a| a.value.trim() == label.as_str())
            .map(|a| (a.start_ms + a.end_ms) as f64 / 2000.0)
            .ok_or_else(|| {
                calibration("calibration", format!("{} tier has no {} annotation", run.tier_calib, label.as_str()))
            })
    };
    let landmarks = Landmarks {
        rest_s: instant(LandmarkLabel::Rest)?,
        flx_limit_s: instant(LandmarkLabel::FlxLimit)?,
        ext_limit_s: instant(LandmarkLabel::ExtLimit)?,
    };
    let subject = args.subject.clone().unwrap_or_else(|| stem(&args.pose));
    let track = subject_track(run, &args.pose)?;
    let (series, _) = kinematics(run, &track, &subject)?;
    let profile = build_profile(&series, &landmarks).map_err(|e| calibration("calibration", e))?;

    write_atomic(&run.out.join("profile.json"), write_profile(&profile).as_bytes())?;
    let _ = writeln!(stdout, "subject {}", profile.subject_id);
    let _ = write!(stdout, "{}", correspondence_table(&profile));
    if profile.orientation() < 0.0 {
        let _ = writeln!(stderr, "warning: flexion decreases the raw angle for this subject (inverted orientation)");
    }
    Ok(profile)
}

fn ms(t_s: f64) -> u64 {
    (t_s * 1000.0).round().max(0.0) as u64
}

/// Short human-readable form of an event, used as its EAF annotation value.
pub fn event_label(e: &MarkerEvent) -> String {
    match e.kind {
        MarkerKind::Hold { duration_s, median_notch, micro_oscillation, .. } => {
            let micro = if micro_oscillation { " micro-osc" } else { "" };
            format!("HOLD {duration_s:.2}s {}{micro}", median_notch.as_str())
        }
        MarkerKind::NodBurst { cycles, crosses_neutral, max_peak_to_peak_p, peak_speed_deg_s } => {
            let sign = if crosses_neutral { '+' } else { '-' };
            format!("NOD x{cycles} neutral{sign} {peak_speed_deg_s:.1}deg/s p2p={max_peak_to_peak_p:.3}")
        }
        MarkerKind::SpeedBand { band, stat_deg_s } => format!("SPEED {} {stat_deg_s:.1}deg/s", band.as_str()),
    }
}

fn evidence_label(seg: &EpistemicSegment) -> String {
    let mut rules: Vec<(&str, usize)> = Vec::new();
    for ev in &seg.evidence {
        match rules.iter_mut().find(|(r, _)| *r == ev.rule.as_str()) {
            Some(r) => r.1 += 1,
            None => rules.push((ev.rule.as_str(), 1)),
        }
    }
    rules.iter().map(|(r, n)| format!("{r} x{n}")).collect::<Vec<_>>().join("; ")
}

/// A manual segment with its EAF interval.
struct ManualSegment {
    start_ms: u64,
    end_ms: u64,
    label: EpistemicLabel,
}

fn manual_segments(run: &RunConfig, path: &Path) -> Result<(Vec<ManualSegment>, Option<Tier>, Option<MediaDescriptor>), CliError> {
    let doc: EafDocument = read_eaf(&read_bytes("eaf", path)?).map_err(|e| input("eaf", e))?;
    let Some(tier) = doc.tier(&run.tier_episteme) else { return Ok((Vec::new(), None, doc.media)) };
    tier.validate().map_err(|e| input("eaf", e))?;
    let mut segments = Vec::new();
    for a in &tier.annotations {
        let label = match a.value.trim() {
            "CERT" => EpistemicLabel::Cert,
            "INCERT" => EpistemicLabel::Incert,
            other => {
                return Err(input(
                    "eaf",
                    format!("{} annotation at {} ms is {other:?}; expected CERT or INCERT", run.tier_episteme, a.start_ms),
                ))
            }
        };
        segments.push(ManualSegment { start_ms: a.start_ms, end_ms: a.end_ms, label });
    }
    segments.sort_by_key(|s| s.start_ms);
    Ok((segments, Some(tier.clone()), doc.media))
}

fn marker_tier(id: &str, events: &[MarkerEvent], family: Family) -> Tier {
    let annotations = events
        .iter()
        .filter(|e| e.family() == family)
        .map(|e| Annotation::new(ms(e.start_s), ms(e.end_s), event_label(e)))
        .filter(|a| a.start_ms < a.end_ms)
        .collect();
    Tier { id: id.into(), annotations }
}

/// Holds and nods over the whole series, plus one speed band per segment
/// computed from the velocity samples inside it.
pub fn segment_events(
    norm: &NormalizedSeries,
    vel: &VelocitySeries,
    cfg: &DetectorConfig,
    segments: &[(f64, f64)],
) -> Result<Vec<MarkerEvent>, MarkerError> {
    let holds = detect_holds(norm, vel, cfg)?;
    let mut events = holds.clone();
    events.extend(detect_nods(norm, vel, cfg)?);
    let half = 0.5 / vel.fps;
    for &(start, end) in segments {
        let inside = VelocitySeries {
            samples: vel.samples.iter().filter(|s| s.t_s + half >= start && s.t_s + half < end).copied().collect(),
            ..vel.clone()
        };
        if !inside.is_empty() {
            events.push(speed_profile(&inside, &holds, cfg));
        }
    }
    sort_events(&mut events);
    Ok(events)
}

/// Files written by `analyze`, in the order they were written.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOutputs {
    pub files: Vec<PathBuf>,
    pub segments: Vec<EpistemicSegment>,
    pub events: Vec<MarkerEvent>,
    pub summary: CorpusSummary,
}

pub fn cmd_analyze(run: &RunConfig, args: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<AnalyzeOutputs, CliError> {
    run.check()?;
    let cfg = run.detector()?;
    let profiles = read_profiles(&read_text("profile", &args.profile)?).map_err(|e| input("profile", e))?;
    let profile = match &args.subject {
        Some(s) => profiles.iter().find(|p| &p.subject_id == s).cloned().ok_or_else(|| {
            let found: Vec<&str> = profiles.iter().map(|p| p.subject_id.as_str()).collect();
            calibration("calibration", format!("profile file has no profile for subject {s:?} (found {})", found.join(", ")))
        })?,
        None if profiles.len() == 1 => profiles[0].clone(),
        None => return Err(input("profile", format!("file holds {} profiles; pass --subject", profiles.len()))),
    };

    let track = subject_track(run, &args.pose)?;
    let (series, vel) = kinematics(run, &track, &profile.subject_id)?;
    let norm: NormalizedSeries = normalize_series(&series, &profile).map_err(|e| calibration("calibration", e))?;
    let (manual, manual_tier, media) = match &args.eaf {
        Some(path) => manual_segments(run, path)?,
        None => (Vec::new(), None, None),
    };
    let classify_cfg = ClassifyConfig::default();
    let (span_start, span_end) = norm.span();
    let intervals: Vec<(u64, u64, f64, f64)> = if manual.is_empty() {
        vec![(ms(span_start), ms(span_end), span_start, span_end)]
    } else {
        manual.iter().map(|m| (m.start_ms, m.end_ms, m.start_ms as f64 / 1000.0, m.end_ms as f64 / 1000.0)).collect()
    };
    let bounds: Vec<(f64, f64)> = intervals.iter().map(|&(_, _, s, e)| (s, e)).collect();
    let events = segment_events(&norm, &vel, &cfg, &bounds).map_err(|e| match e {
        MarkerError::Config(_) => input("markers", e),
        MarkerError::Misaligned(_) => internal("markers", e),
    })?;
    let predicted: Vec<EpistemicSegment> =
        intervals.iter().map(|&(_, _, s, e)| score_segment(s, e, &events, &classify_cfg)).collect();

    let entries: Vec<CorpusEntry> = predicted
        .iter()
        .enumerate()
        .map(|(i, p)| CorpusEntry {
            language: args.lang.clone(),
            segment: match manual.get(i) {
                Some(m) => EpistemicSegment::manual(p.start_s, p.end_s, m.label),
                None => p.clone(),
            },
            events: events.clone(),
        })
        .collect();
    let summary = summarize_corpus(&entries, &classify_cfg);

    let mut tiers = vec![
        Tier {
            id: PREDICTED_TIER.into(),
            annotations: intervals
                .iter()
                .zip(&predicted)
                .filter(|((s, e, _, _), _)| s < e)
                .map(|(&(s, e, _, _), p)| Annotation::new(s, e, p.label.as_str()))
                .collect(),
        },
        Tier {
            id: EVIDENCE_TIER.into(),
            annotations: intervals
                .iter()
                .zip(&predicted)
                .filter(|((s, e, _, _), p)| s < e && !p.evidence.is_empty())
                .map(|(&(s, e, _, _), p)| Annotation::new(s, e, evidence_label(p)))
                .collect(),
        },
        marker_tier("HOLD", &events, Family::Hold),
        marker_tier("NOD", &events, Family::NodBurst),
        marker_tier("SPEED", &events, Family::SpeedBand),
    ];
    if let Some(t) = manual_tier {
        if !tiers.iter().any(|x| x.id == t.id) {
            tiers.push(t);
        }
    }
    let mut doc = EafDocument::new(tiers);
    doc.media = args.media.as_ref().map(|m| MediaDescriptor::for_path(m.clone())).or(media);
    let eaf = write_document(&doc).map_err(|e| internal("output", e))?;

    let rows = series_rows(&series, &vel).map_err(|e| internal("output", e))?;
    let notches = encode_records(&series_to_records(&norm, NOTCH_MIN_RUN_S)).map_err(|e| internal("typannot", e))?;

    let outputs: [(&str, String); 6] = [
        ("series.csv", write_series(&rows)),
        ("events.csv", write_events(&events)),
        ("notches.txt", notches),
        ("predictions.eaf", eaf),
        ("summary.txt", summary.to_text()),
        ("summary.csv", summary.to_csv()),
    ];
    let mut files = Vec::new();
    for (name, contents) in outputs {
        let path = run.out.join(name);
        write_atomic(&path, contents.as_bytes())?;
        files.push(path);
    }

    let _ = writeln!(stdout, "subject {}  frames {}  events {}", profile.subject_id, norm.len(), events.len());
    for (i, p) in predicted.iter().enumerate() {
        let manual_label = manual.get(i).map_or("-", |m| m.label.as_str());
        let evidence = evidence_label(p);
        let _ = writeln!(
            stdout,
            "segment {:.3}-{:.3}  manual {manual_label}  predicted {}  cert {}  incert {}{}",
            p.start_s,
            p.end_s,
            p.label.as_str(),
            p.cert_score,
            p.incert_score,
            if evidence.is_empty() { String::new() } else { format!("  evidence {evidence}") }
        );
    }
    let _ = write!(stdout, "{}", summary.to_text());
    Ok(AnalyzeOutputs { files, segments: predicted, events, summary })
}

pub fn cmd_plot(run: &RunConfig, args: &PlotArgs, stdout: &mut dyn Write) -> Result<PathBuf, CliError> {
    let cfg = run.detector()?;
    let rows = read_series(&read_text("series", &args.series)?).map_err(|e| input("series", e))?;
    let events = match &args.events {
        Some(p) => read_events(&read_text("events", p)?).map_err(|e| input("events", e))?,
        None => Vec::new(),
    };
    let profile = match &args.profile {
        Some(p) => {
            let mut all = read_profiles(&read_text("profile", p)?).map_err(|e| input("profile", e))?;
            if all.len() != 1 {
                return Err(input("profile", format!("plot needs exactly one profile, file holds {}", all.len())));
            }
            Some(all.remove(0))
        }
        None => None,
    };
    let opts = PlotOptions { speed_high: cfg.speed_high, speed_low: cfg.speed_low };
    let svg = plot_svg(&rows, &events, profile.as_ref(), &opts).map_err(|e| input("plot", e))?;
    let path = run.out.join("plot.svg");
    write_atomic(&path, svg.as_bytes())?;
    let _ = writeln!(stdout, "wrote {}", path.display());
    Ok(path)
}

pub fn agreement_text(report: &AgreementReport) -> String {
    let mut rows = vec![
        vec!["frames".to_string(), report.frames.to_string()],
        vec!["observed".into(), format!("{:.6}", report.observed)],
        vec!["expected".into(), format!("{:.6}", report.expected)],
        vec!["kappa".into(), format!("{:.6}", report.frame_kappa)],
        vec!["overlap".into(), format!("{:.6}", report.overlap_ratio)],
    ];
    let mut out = table(&rows);
    rows = vec![vec!["a".to_string(), "b".into(), "frames".into()]];
    for ((a, b), n) in &report.confusion {
        rows.push(vec![a.clone(), b.clone(), n.to_string()]);
    }
    out.push('\n');
    out.push_str(&table(&rows));
    out
}

pub fn cmd_agree(run: &RunConfig, args: &AgreeArgs, stdout: &mut dyn Write) -> Result<AgreementReport, CliError> {
    run.check()?;
    let tier_a = args.tier.clone().unwrap_or_else(|| run.tier_episteme.clone());
    let tier_b = args.tier_b.clone().unwrap_or_else(|| tier_a.clone());
    let load = |path: &Path, id: &str| -> Result<Tier, CliError> {
        let doc = read_eaf(&read_bytes("eaf", path)?).map_err(|e| input("eaf", e))?;
        doc.tier(id).cloned().ok_or_else(|| input("eaf", format!("{} has no {id} tier", path.display())))
    };
    let a = load(&args.a, &tier_a)?;
    let b = load(&args.b, &tier_b)?;
    let report = agreement(&a, &b, run.fps).map_err(|e| input("agreement", e))?;
    let _ = write!(stdout, "{}", agreement_text(&report));
    Ok(report)
}

fn evaluate_suite(suite: &[(String, TrajectorySpec)], cfg: &DetectorConfig) -> Result<Evaluation, CliError> {
    let profile = synth::reference_profile();
    let mut total = Evaluation::default();
    for (name, spec) in suite {
        let g = synth::generate_with(spec, &profile, cfg).map_err(|e| input("synth", format!("{name}: {e}")))?;
        let detected = detect_all(&g.norm, &g.vel, cfg).map_err(|e| internal("markers", format!("{name}: {e}")))?;
        total.add(&synth::evaluate(&detected, &g.truth, SYNTH_IOU_MIN));
    }
    Ok(total)
}

fn score_rows(suite: &str, eval: &Evaluation, rows: &mut Vec<Vec<String>>) {
    for family in Family::ALL {
        let s = eval.get(family);
        rows.push(vec![
            suite.to_string(),
            family.as_str().into(),
            s.matched.to_string(),
            s.detected.to_string(),
            s.planted.to_string(),
            format!("{:.3}", s.precision()),
            format!("{:.3}", s.recall()),
            format!("{:.3}", s.f1()),
        ]);
    }
}

/// Precision/recall per marker family. Returns the noise-free evaluation
/// followed by the noisy one (only the first when a spec file is given).
pub fn cmd_synth_test(run: &RunConfig, args: &SynthTestArgs, stdout: &mut dyn Write) -> Result<Vec<Evaluation>, CliError> {
    let cfg = run.detector()?;
    let mut rows = vec![["suite", "kind", "matched", "detected", "planted", "precision", "recall", "f1"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    let mut evals = Vec::new();
    match &args.spec {
        Some(path) => {
            let spec: TrajectorySpec =
                serde_json::from_str(&read_text("synth", path)?).map_err(|e| input("synth", format!("bad spec: {e}")))?;
            let eval = evaluate_suite(&[(stem(path), spec)], &cfg)?;
            score_rows(&stem(path), &eval, &mut rows);
            evals.push(eval);
        }
        None => {
            if !(args.sigma >= 0.0) {
                return Err(input("config", "--sigma must be non-negative"));
            }
            let clean = evaluate_suite(&synth::fixture_suite(), &cfg)?;
            score_rows("clean", &clean, &mut rows);
            let noisy = evaluate_suite(&synth::noisy_suite(args.sigma), &cfg)?;
            score_rows(&format!("noisy({})", args.sigma), &noisy, &mut rows);
            evals.push(clean);
            evals.push(noisy);
        }
    }
    let _ = write!(stdout, "{}", table(&rows));
    Ok(evals)
}
