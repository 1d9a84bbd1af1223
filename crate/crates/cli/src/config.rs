use std::fmt;
use std::path::{Path, PathBuf};

use nearfield::channel::PathGainModel;
use nearfield::codebook::{build_grid, RingRule};
use nearfield::geometry::wavelength_from_carrier;
use nearfield::special::MainLobeValue;
use nearfield::{ArrayGeometry, Distance, Layout};
use serde::Deserialize;
use thiserror::Error;

/// The 800-element reference system, shipped with the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {message}")]
    At { origin: String, line: usize, message: String },
    #[error("{origin}: {message}")]
    Whole { origin: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Uca,
    Ula,
    Cylindrical,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub layout: LayoutKind,
    pub elements: usize,
    pub carrier_hz: Option<f64>,
    pub wavelength_m: Option<f64>,
    /// Half-wavelength spacing when omitted.
    pub radius_m: Option<f64>,
    pub aperture_m: Option<f64>,
    pub ring_spacing_m: Option<f64>,
    pub ring_half_count: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub delta: f64,
    pub codebook_delta: f64,
    pub r_min_m: f64,
    pub ring_rule: RingRule,
    pub level: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { delta: 0.05, codebook_delta: 0.5, r_min_m: 4.0, ring_rule: RingRule::Published, level: 0.5 }
    }
}

/// Inclusive range sampled either every `step` or at `points` evenly spaced
/// values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub range: [f64; 2],
    pub step: Option<f64>,
    pub points: Option<usize>,
}

impl Range {
    pub fn grid(&self) -> Vec<f64> {
        let [a, b] = self.range;
        match (self.step, self.points) {
            (Some(step), _) => {
                let n = ((b - a) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| a + step * i as f64).collect()
            }
            (None, Some(0)) => Vec::new(),
            (None, Some(1)) => vec![a],
            (None, Some(n)) => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            (None, None) => unreachable!("validated"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularSweep {
    #[serde(default)]
    pub focus_angle_rad: f64,
    pub distances_m: Vec<f64>,
    /// Offsets from the focus angle.
    pub range: [f64; 2],
    pub step: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceAxis {
    /// Second point moves along the ray through the focus.
    #[default]
    Distance,
    /// Both points fixed while the array radius varies.
    Radius,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSweep {
    #[serde(default)]
    pub axis: DistanceAxis,
    #[serde(default)]
    pub focus_angle_rad: f64,
    pub focus_m: Option<f64>,
    /// Radius axis only.
    pub second_m: Option<f64>,
    /// Radius axis only; defaults to half-wavelength spacing at the largest
    /// radius.
    pub elements: Option<usize>,
    pub range: [f64; 2],
    pub step: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErdSweep {
    pub range: [f64; 2],
    pub step: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderSweep {
    pub ring_spacing_m: f64,
    pub ring_half_counts: Vec<usize>,
    #[serde(default = "far_focus")]
    pub focus_m: Distance,
    pub range: [f64; 2],
    pub step: Option<f64>,
    pub points: Option<usize>,
}

fn far_focus() -> Distance {
    Distance::Infinite
}

impl AngularSweep {
    pub fn axis(&self) -> Range {
        Range { range: self.range, step: self.step, points: self.points }
    }
}

impl DistanceSweep {
    pub fn axis(&self) -> Range {
        Range { range: self.range, step: self.step, points: self.points }
    }
}

impl ErdSweep {
    pub fn axis(&self) -> Range {
        Range { range: self.range, step: self.step, points: self.points }
    }
}

impl CylinderSweep {
    pub fn axis(&self) -> Range {
        Range { range: self.range, step: self.step, points: self.points }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub angular: Option<AngularSweep>,
    pub distance: Option<DistanceSweep>,
    pub erd: Option<ErdSweep>,
    pub cylinder: Option<CylinderSweep>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub paths: usize,
    pub distance_range_m: [f64; 2],
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    pub seeds: usize,
    #[serde(default)]
    pub gain_model: PathGainModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A validated configuration with its source kept for error anchoring.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub geometry: ArrayGeometry,
    source: Source,
}

#[derive(Debug, Clone)]
struct Source {
    origin: String,
    text: String,
}

impl Source {
    fn line_of_offset(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    /// Line of `key` inside `[section]`, falling back to the section header.
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        let mut header = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                if current == section {
                    header = Some(i + 1);
                }
                continue;
            }
            if current == section {
                if let Some(rest) = line.strip_prefix(key) {
                    if rest.trim_start().starts_with('=') {
                        return Some(i + 1);
                    }
                }
            }
        }
        header
    }

    fn error(&self, section: &str, key: &str, message: impl fmt::Display) -> ConfigError {
        let message = format!("[{section}] {key}: {message}");
        match self.line_of(section, key) {
            Some(line) => ConfigError::At { origin: self.origin.clone(), line, message },
            None => ConfigError::Whole { origin: self.origin.clone(), message },
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<Loaded, ConfigError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
            parse(&text, &p.display().to_string())
        }
        None => parse(DEFAULT_CONFIG, "default.toml"),
    }
}

pub fn parse(text: &str, origin: &str) -> Result<Loaded, ConfigError> {
    let source = Source { origin: origin.to_string(), text: text.to_string() };
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().trim().to_string();
        match e.span() {
            Some(span) => ConfigError::At { origin: origin.to_string(), line: source.line_of_offset(span.start), message },
            None => ConfigError::Whole { origin: origin.to_string(), message },
        }
    })?;
    let geometry = validate(&config, &source)?;
    Ok(Loaded { config, geometry, source })
}

fn positive(src: &Source, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(src.error(section, key, format!("must be positive and finite, got {v}")))
    }
}

fn open_unit(src: &Source, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(src.error(section, key, format!("must lie in (0, 1), got {v}")))
    }
}

fn check_range(src: &Source, section: &str, r: &Range) -> Result<(), ConfigError> {
    let [a, b] = r.range;
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(src.error(section, "range", format!("needs finite bounds with start <= stop, got [{a}, {b}]")));
    }
    match (r.step, r.points) {
        (Some(_), Some(_)) => Err(src.error(section, "step", "give either step or points, not both")),
        (None, None) => Err(src.error(section, "range", "needs a step or a point count")),
        (Some(s), None) => {
            positive(src, section, "step", s)?;
            if (b - a) / s > 1e8 {
                return Err(src.error(section, "step", format!("{s} gives more than 1e8 points")));
            }
            Ok(())
        }
        (None, Some(n)) if n > 100_000_000 => Err(src.error(section, "points", format!("{n} is more than 1e8 points"))),
        (None, Some(_)) => Ok(()),
    }
}

fn validate(c: &ExperimentConfig, src: &Source) -> Result<ArrayGeometry, ConfigError> {
    let g = &c.geometry;
    let lambda = match (g.carrier_hz, g.wavelength_m) {
        (Some(_), Some(_)) => return Err(src.error("geometry", "wavelength_m", "give either carrier_hz or wavelength_m")),
        (None, None) => return Err(src.error("geometry", "carrier_hz", "needs carrier_hz or wavelength_m")),
        (Some(f), None) => {
            wavelength_from_carrier(positive(src, "geometry", "carrier_hz", f)?).map_err(|e| src.error("geometry", "carrier_hz", e))?
        }
        (None, Some(l)) => positive(src, "geometry", "wavelength_m", l)?,
    };
    if g.elements == 0 {
        return Err(src.error("geometry", "elements", "must be at least 1"));
    }
    let half = |n: usize| n as f64 * lambda / (4.0 * std::f64::consts::PI);
    let unused = |key: &str, present: bool| {
        if present {
            Err(src.error("geometry", key, format!("not used by a {:?} layout", g.layout).to_lowercase()))
        } else {
            Ok(())
        }
    };
    let layout = match g.layout {
        LayoutKind::Uca => {
            unused("aperture_m", g.aperture_m.is_some())?;
            unused("ring_spacing_m", g.ring_spacing_m.is_some())?;
            unused("ring_half_count", g.ring_half_count.is_some())?;
            let radius = match g.radius_m {
                Some(r) => positive(src, "geometry", "radius_m", r)?,
                None => half(g.elements),
            };
            Layout::Uca { elements: g.elements, radius }
        }
        LayoutKind::Ula => {
            unused("radius_m", g.radius_m.is_some())?;
            unused("ring_spacing_m", g.ring_spacing_m.is_some())?;
            unused("ring_half_count", g.ring_half_count.is_some())?;
            let aperture = match g.aperture_m {
                Some(d) => positive(src, "geometry", "aperture_m", d)?,
                None => (g.elements.max(2) - 1) as f64 * lambda / 2.0,
            };
            Layout::Ula { elements: g.elements, aperture }
        }
        LayoutKind::Cylindrical => {
            unused("aperture_m", g.aperture_m.is_some())?;
            let radius = match g.radius_m {
                Some(r) => positive(src, "geometry", "radius_m", r)?,
                None => half(g.elements),
            };
            let ring_spacing = positive(
                src,
                "geometry",
                "ring_spacing_m",
                g.ring_spacing_m.ok_or_else(|| src.error("geometry", "layout", "cylindrical layout needs ring_spacing_m"))?,
            )?;
            Layout::Cylindrical {
                elements_per_ring: g.elements,
                radius,
                ring_spacing,
                ring_half_count: g.ring_half_count.unwrap_or(0),
            }
        }
    };
    let geometry = ArrayGeometry::new(layout, lambda).map_err(|e| src.error("geometry", "elements", e))?;

    let a = &c.analysis;
    open_unit(src, "analysis", "delta", a.delta)?;
    open_unit(src, "analysis", "level", a.level)?;
    MainLobeValue::new(a.level).map_err(|e| src.error("analysis", "level", e))?;
    positive(src, "analysis", "r_min_m", a.r_min_m)?;
    if g.layout == LayoutKind::Uca {
        build_grid(&geometry, a.codebook_delta, a.r_min_m, a.ring_rule).map_err(|e| src.error("analysis", "codebook_delta", e))?;
    }

    if let Some(s) = &c.sweep.angular {
        check_range(src, "sweep.angular", &s.axis())?;
        if s.distances_m.is_empty() {
            return Err(src.error("sweep.angular", "distances_m", "needs at least one distance"));
        }
        for &r in &s.distances_m {
            positive(src, "sweep.angular", "distances_m", r)?;
        }
        if !s.focus_angle_rad.is_finite() {
            return Err(src.error("sweep.angular", "focus_angle_rad", "must be finite"));
        }
    }
    if let Some(s) = &c.sweep.distance {
        let sec = "sweep.distance";
        check_range(src, sec, &s.axis())?;
        if s.range[0] <= 0.0 {
            return Err(src.error(sec, "range", "distances and radii must be positive"));
        }
        if !s.focus_angle_rad.is_finite() {
            return Err(src.error(sec, "focus_angle_rad", "must be finite"));
        }
        positive(src, sec, "focus_m", s.focus_m.ok_or_else(|| src.error(sec, "focus_m", "is required"))?)?;
        match s.axis {
            DistanceAxis::Distance => {
                if s.second_m.is_some() || s.elements.is_some() {
                    return Err(src.error(sec, "axis", "second_m and elements only apply to the radius axis"));
                }
            }
            DistanceAxis::Radius => {
                let second = s.second_m.ok_or_else(|| src.error(sec, "second_m", "is required on the radius axis"))?;
                positive(src, sec, "second_m", second)?;
                if Some(second) == s.focus_m {
                    return Err(src.error(sec, "second_m", "must differ from focus_m"));
                }
                if s.elements == Some(0) {
                    return Err(src.error(sec, "elements", "must be at least 1"));
                }
            }
        }
    }
    if let Some(s) = &c.sweep.erd {
        check_range(src, "sweep.erd", &s.axis())?;
    }
    if let Some(s) = &c.sweep.cylinder {
        let sec = "sweep.cylinder";
        check_range(src, sec, &s.axis())?;
        if s.range[0] <= 0.0 {
            return Err(src.error(sec, "range", "distances must be positive"));
        }
        positive(src, sec, "ring_spacing_m", s.ring_spacing_m)?;
        if s.ring_half_counts.is_empty() {
            return Err(src.error(sec, "ring_half_counts", "needs at least one value"));
        }
        if let Distance::Finite(r) = s.focus_m {
            positive(src, sec, "focus_m", r)?;
        }
    }
    if let Some(e) = &c.experiment {
        let sec = "experiment";
        if e.paths == 0 {
            return Err(src.error(sec, "paths", "must be at least 1"));
        }
        if e.seeds == 0 {
            return Err(src.error(sec, "seeds", "must be at least 1"));
        }
        if e.seed.checked_add(e.seeds as u64 - 1).is_none() {
            return Err(src.error(sec, "seed", "seed range overflows"));
        }
        let [lo, hi] = e.distance_range_m;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(src.error(sec, "distance_range_m", format!("needs 0 < low <= high, got [{lo}, {hi}]")));
        }
        if e.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(src.error(sec, "snr_db", "values must be finite"));
        }
    }
    Ok(geometry)
}

impl Loaded {
    pub fn origin(&self) -> &str {
        &self.source.origin
    }

    /// Error anchored at `key` of `[section]`.
    pub fn error(&self, section: &str, key: &str, message: impl fmt::Display) -> ConfigError {
        self.source.error(section, key, message)
    }

    pub fn missing(&self, section: &str) -> ConfigError {
        ConfigError::Whole { origin: self.source.origin.clone(), message: format!("missing [{section}] section") }
    }

    /// Element count and radius of a UCA geometry.
    pub fn uca(&self) -> Result<(usize, f64), ConfigError> {
        match *self.geometry.layout() {
            Layout::Uca { elements, radius } => Ok((elements, radius)),
            ref other => Err(self.error("geometry", "layout", format!("this command needs a uca layout, got {}", other.name()))),
        }
    }

    /// Overrides the experiment seed.
    pub fn set_seed(&mut self, seed: u64) -> Result<(), ConfigError> {
        let e = self.config.experiment.as_mut().ok_or_else(|| ConfigError::Whole {
            origin: self.source.origin.clone(),
            message: "--seed given but the config has no [experiment] section".into(),
        })?;
        if seed.checked_add(e.seeds as u64 - 1).is_none() {
            return Err(ConfigError::Whole { origin: "--seed".into(), message: format!("{seed} overflows the seed range") });
        }
        e.seed = seed;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_reference_system() {
        let l = load(None).unwrap();
        assert_eq!(l.geometry.element_count(), 800);
        assert_eq!(l.geometry.radius(), Some(0.64));
        assert!((l.geometry.wavelength() - 0.00999308).abs() < 1e-7);
        assert_eq!(l.config.experiment.unwrap().seeds, 1000);
    }

    #[test]
    fn grids() {
        let r = Range { range: [0.0, 1.0], step: Some(0.25), points: None };
        assert_eq!(r.grid(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let r = Range { range: [0.0, 1.0], step: None, points: Some(3) };
        assert_eq!(r.grid(), vec![0.0, 0.5, 1.0]);
        let r = Range { range: [2.0, 2.0], step: None, points: Some(0) };
        assert!(r.grid().is_empty());
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let text = "[geometry]\nlayout = \"uca\"\nelements = \"many\"\n";
        match parse(text, "x.toml").unwrap_err() {
            ConfigError::At { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn validation_errors_carry_lines() {
        let text = DEFAULT_CONFIG.replace("r_min_m = 4.0", "r_min_m = -4.0");
        let err = parse(&text, "x.toml").unwrap_err();
        let expected = text.lines().position(|l| l.starts_with("r_min_m")).unwrap() + 1;
        match err {
            ConfigError::At { line, ref message, .. } => {
                assert_eq!(line, expected);
                assert!(message.contains("r_min_m"), "{message}");
            }
            e => panic!("{e}"),
        }
        let text = DEFAULT_CONFIG.replace("step = 0.1", "step = 0.0");
        assert!(matches!(parse(&text, "x.toml").unwrap_err(), ConfigError::At { .. }));
        let text = DEFAULT_CONFIG.replace("seeds = 1000", "seeds = 0");
        assert!(parse(&text, "x.toml").unwrap_err().to_string().contains("seeds"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DEFAULT_CONFIG.replace("[output]", "[output]\ncolour = \"red\"");
        let err = parse(&text, "x.toml").unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn half_wavelength_radius_when_omitted() {
        let text = "[geometry]\nlayout = \"uca\"\nelements = 800\ncarrier_hz = 30e9\n";
        let l = parse(text, "x.toml").unwrap();
        assert!((l.geometry.radius().unwrap() - 0.63618).abs() < 1e-4);
    }
}
