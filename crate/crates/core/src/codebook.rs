//! Concentric-ring codebook for uniform circular arrays.
//!
//! Focal points sit on the intersections of rays at angles `s1 phi_step`
//! and rings at distances `r_scale / s2`, with `s2 = 0` the far-field ring.
//! Codewords are indexed s1-major: `index = s1 (S2 + 1) + s2`.
//!
//! Codewords are not stored. The book of the 800-element reference array
//! holds tens of thousands of 800-element vectors, so they are regenerated
//! from focal points whenever needed. Generation is deterministic, so repeated calls are bit-identical.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::gain::exact_gain;
use crate::geometry::{fill_weights, near_focusing_vector, ArrayGeometry, BeamVector, Distance, FocusPoint, Layout};
use crate::special::{inv_j0_main_lobe, MainLobeValue};

/// Peak of the first sidelobe of `|J0|`, rounded up. Thresholds below it
/// cannot separate neighbors from sidelobes.
pub const MIN_THRESHOLD: f64 = 0.403;

/// Tolerance on exact neighbor correlations during verification.
pub const VERIFY_TOLERANCE: f64 = 0.02;

/// Largest codebook accepted by the all-pairs check.
pub const ALL_PAIRS_LIMIT: usize = 4096;

/// How ring radii follow from the correlation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingRule {
    /// `r_scale = 2 pi R^2 / (lambda J0^-1(Delta))`. Consecutive rings are
    /// `J0^-1(Delta) / 4` apart in `zeta`, so their correlation is well
    /// above `Delta`.
    #[default]
    Published,
    /// `r_scale = pi R^2 / (2 lambda J0^-1(Delta))`. Consecutive rings are
    /// exactly `J0^-1(Delta)` apart in `zeta`, so their distance-domain
    /// correlation equals `Delta`.
    ThresholdMatched,
}

impl RingRule {
    pub fn name(self) -> &'static str {
        match self {
            RingRule::Published => "published",
            RingRule::ThresholdMatched => "threshold_matched",
        }
    }
}

/// Angles and ring distances of a codebook.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingGrid {
    pub angular_step: f64,
    pub angles: Vec<f64>,
    pub ring_scale: f64,
    /// `distances[0]` is the far-field sentinel.
    pub distances: Vec<Distance>,
    pub threshold: f64,
    /// `J0^-1(threshold)`.
    pub threshold_argument: f64,
    pub r_min: f64,
    pub rule: RingRule,
}

impl SamplingGrid {
    /// Largest angle index `S1`.
    pub fn max_angle_index(&self) -> usize {
        self.angles.len() - 1
    }

    /// Largest ring index `S2`.
    pub fn max_ring_index(&self) -> usize {
        self.distances.len() - 1
    }

    pub fn len(&self) -> usize {
        self.angles.len() * self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn uca_params(geom: &ArrayGeometry) -> Result<(usize, f64)> {
    match *geom.layout() {
        Layout::Uca { elements, radius } => Ok((elements, radius)),
        other => Err(Error::Codebook(format!("concentric-ring codebooks need a UCA, got {}", other.name()))),
    }
}

pub fn build_grid(geom: &ArrayGeometry, delta: f64, r_min: f64, rule: RingRule) -> Result<SamplingGrid> {
    let (_, radius) = uca_params(geom)?;
    let lambda = geom.wavelength();
    if !(MIN_THRESHOLD..1.0).contains(&delta) {
        return Err(Error::Codebook(format!(
            "threshold {delta} outside [{MIN_THRESHOLD}, 1): below the first sidelobe peak non-neighbors alias, \
             at 1 the grid is infinitely dense"
        )));
    }
    if 1.0 - delta <= 64.0 * f64::EPSILON {
        return Err(Error::Codebook(format!("threshold {delta} is indistinguishable from 1")));
    }
    let arg = inv_j0_main_lobe(MainLobeValue::new(delta)?);
    let s = lambda * arg / (4.0 * PI * radius);
    if s > 1.0 {
        return Err(Error::Codebook("array too small for a single angular step".into()));
    }
    let angular_step = 2.0 * s.asin();
    let rays = (2.0 * PI / angular_step).floor();
    if !(1.0..1e9).contains(&rays) {
        return Err(Error::Codebook(format!("angular step {angular_step} gives an unusable ray count")));
    }
    let ring_scale = match rule {
        RingRule::Published => 2.0 * PI * radius * radius / (lambda * arg),
        RingRule::ThresholdMatched => PI * radius * radius / (2.0 * lambda * arg),
    };
    if !(r_min.is_finite() && r_min > 0.0 && r_min < ring_scale) {
        return Err(Error::Codebook(format!(
            "minimum distance {r_min} m must lie in (0, {ring_scale} m) so at least one finite ring fits"
        )));
    }
    let rings = (ring_scale / r_min).floor();
    if rings >= 1e9 {
        return Err(Error::Codebook(format!("{rings} rings is unusable")));
    }
    let max_angle = rays as usize - 1;
    let angles = (0..=max_angle).map(|s1| s1 as f64 * angular_step).collect();
    let distances = std::iter::once(Distance::Infinite)
        .chain((1..=rings as usize).map(|s2| Distance::Finite(ring_scale / s2 as f64)))
        .collect();
    Ok(SamplingGrid {
        angular_step,
        angles,
        ring_scale,
        distances,
        threshold: delta,
        threshold_argument: arg,
        r_min,
        rule,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    geometry: ArrayGeometry,
    grid: SamplingGrid,
}

impl Codebook {
    pub fn build(geom: &ArrayGeometry, delta: f64, r_min: f64, rule: RingRule) -> Result<Self> {
        let grid = build_grid(geom, delta, r_min, rule)?;
        Ok(Self { geometry: geom.clone(), grid })
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn index(&self, s1: usize, s2: usize) -> Option<usize> {
        (s1 < self.grid.angles.len() && s2 < self.grid.distances.len())
            .then(|| s1 * self.grid.distances.len() + s2)
    }

    pub fn coordinates(&self, index: usize) -> (usize, usize) {
        let rings = self.grid.distances.len();
        (index / rings, index % rings)
    }

    pub fn focal_point(&self, index: usize) -> FocusPoint {
        let (s1, s2) = self.coordinates(index);
        FocusPoint::new(self.grid.distances[s2], self.grid.angles[s1], PI / 2.0)
    }

    pub fn focal_points(&self) -> impl Iterator<Item = FocusPoint> + '_ {
        (0..self.len()).map(|i| self.focal_point(i))
    }

    pub fn codeword(&self, index: usize) -> Result<BeamVector> {
        if index >= self.len() {
            return Err(Error::Codebook(format!("codeword {index} out of range ({})", self.len())));
        }
        near_focusing_vector(&self.geometry, &self.focal_point(index))
    }

    pub fn codewords(&self) -> impl Iterator<Item = (FocusPoint, BeamVector)> + '_ {
        (0..self.len()).map(|i| (self.focal_point(i), self.codeword(i).expect("index in range")))
    }

    /// Best codeword for one channel vector.
    pub fn select(&self, h: &[Complex64]) -> Result<Selection> {
        let mut out = self.select_many(std::slice::from_ref(&h.to_vec()), |_| true)?;
        Ok(out.remove(0))
    }

    /// Best codeword among those accepted by `include`, for each channel.
    pub fn select_many(&self, channels: &[Vec<Complex64>], include: impl Fn(usize) -> bool) -> Result<Vec<Selection>> {
        let norms = channels
            .iter()
            .map(|h| {
                if h.len() != self.geometry.element_count() {
                    return Err(Error::Dimension { expected: self.geometry.element_count(), got: h.len() });
                }
                let n = h.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if n == 0.0 {
                    return Err(crate::error::domain("cannot select a codeword for a zero channel"));
                }
                Ok(n)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best = vec![(usize::MAX, -1.0f64); channels.len()];
        self.scan(channels, &include, |cw, ch, power| {
            if power > best[ch].1 {
                best[ch] = (cw, power);
            }
        });
        best.into_iter()
            .zip(norms)
            .map(|((index, power), norm)| {
                if index == usize::MAX {
                    return Err(Error::Codebook("no codeword passed the selection filter".into()));
                }
                Ok(Selection { index, gain: power.sqrt() / norm, power })
            })
            .collect()
    }

    /// Calls `visit(codeword, channel, |h^H w|^2)` for every accepted
    /// codeword and channel, in ascending codeword order per channel.
    pub(crate) fn scan(
        &self,
        channels: &[Vec<Complex64>],
        include: &dyn Fn(usize) -> bool,
        mut visit: impl FnMut(usize, usize, f64),
    ) {
        let n = self.geometry.element_count();
        let split = SplitVectors::from_complex(channels, n);
        let indices: Vec<usize> = (0..self.len()).filter(|&i| include(i)).collect();
        let mut block = SplitVectors::zeros(SCAN_BLOCK, n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        for chunk in indices.chunks(SCAN_BLOCK) {
            for (row, &cw) in chunk.iter().enumerate() {
                fill_weights(&self.geometry, &self.focal_point(cw), &mut scratch);
                block.set_row(row, &scratch);
            }
            for ch in (0..split.rows).step_by(4) {
                let width = (split.rows - ch).min(4);
                for (row, &cw) in chunk.iter().enumerate() {
                    let powers = block.conj_dot4(row, &split, ch);
                    for (k, &p) in powers.iter().enumerate().take(width) {
                        visit(cw, ch + k, p);
                    }
                }
            }
        }
    }
}

const SCAN_BLOCK: usize = 32;
const LANES: usize = 8;

/// Row-major complex vectors with separate real and imaginary planes.
struct SplitVectors {
    rows: usize,
    len: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitVectors {
    fn zeros(rows: usize, len: usize) -> Self {
        Self { rows, len, re: vec![0.0; rows * len], im: vec![0.0; rows * len] }
    }

    /// Rows are padded with zero vectors up to a multiple of four.
    fn from_complex(vectors: &[Vec<Complex64>], len: usize) -> Self {
        let mut out = Self::zeros(vectors.len().div_ceil(4) * 4, len);
        for (row, v) in vectors.iter().enumerate() {
            out.set_row(row, v);
        }
        out.rows = vectors.len();
        out
    }

    fn set_row(&mut self, row: usize, v: &[Complex64]) {
        let base = row * self.len;
        for (k, x) in v.iter().enumerate() {
            self.re[base + k] = x.re;
            self.im[base + k] = x.im;
        }
    }

    fn row(&self, row: usize) -> (&[f64], &[f64]) {
        let r = row * self.len..(row + 1) * self.len;
        (&self.re[r.clone()], &self.im[r])
    }

    /// `|h_c^H w|^2` for codeword row `row` and channel rows `first..first + 4`.
    fn conj_dot4(&self, row: usize, channels: &SplitVectors, first: usize) -> [f64; 4] {
        let (wr, wi) = self.row(row);
        let h: [(&[f64], &[f64]); 4] = std::array::from_fn(|k| channels.row(first + k));
        let mut acc_re = [[0.0f64; LANES]; 4];
        let mut acc_im = [[0.0f64; LANES]; 4];
        let full = self.len / LANES * LANES;
        for o in (0..full).step_by(LANES) {
            let wr_c: &[f64; LANES] = wr[o..o + LANES].try_into().unwrap();
            let wi_c: &[f64; LANES] = wi[o..o + LANES].try_into().unwrap();
            for c in 0..4 {
                let hr_c: &[f64; LANES] = h[c].0[o..o + LANES].try_into().unwrap();
                let hi_c: &[f64; LANES] = h[c].1[o..o + LANES].try_into().unwrap();
                for j in 0..LANES {
                    acc_re[c][j] += hr_c[j] * wr_c[j] + hi_c[j] * wi_c[j];
                    acc_im[c][j] += hr_c[j] * wi_c[j] - hi_c[j] * wr_c[j];
                }
            }
        }
        std::array::from_fn(|c| {
            let mut re: f64 = acc_re[c].iter().sum();
            let mut im: f64 = acc_im[c].iter().sum();
            for k in full..self.len {
                re += h[c].0[k] * wr[k] + h[c].1[k] * wi[k];
                im += h[c].0[k] * wi[k] - h[c].1[k] * wr[k];
            }
            re * re + im * im
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Selection {
    pub index: usize,
    /// `|h^H w| / ||h||`.
    pub gain: f64,
    /// `|h^H w|^2`.
    pub power: f64,
}

/// Codeword maximizing `|h^H w| / ||h||`; ties go to the lowest index.
pub fn select_codeword(cb: &Codebook, h: &ChannelRealization) -> Result<Selection> {
    cb.select(h.vector())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Neighbors,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub first: usize,
    pub second: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub threshold: f64,
    pub tolerance: f64,
    /// Worst pair of angular neighbors on the same ring.
    pub angular: Option<PairCorrelation>,
    /// Worst pair of consecutive rings on the same ray.
    pub distance: Option<PairCorrelation>,
    /// Worst off-diagonal pair, in all-pairs mode.
    pub all_pairs: Option<PairCorrelation>,
    pub pairs_checked: usize,
    pub passed: bool,
    pub warnings: Vec<String>,
}

fn worst(a: Option<PairCorrelation>, b: PairCorrelation) -> Option<PairCorrelation> {
    match a {
        Some(a) if a.gain >= b.gain => Some(a),
        _ => Some(b),
    }
}

/// Checks codeword correlations on exact gains.
///
/// Neighbor mode compares angular neighbors (including the pair that wraps
/// past `2 pi`) and consecutive rings against `threshold + tolerance`.
/// All-pairs mode only reports; correlations above the threshold between
/// non-neighbors come from sidelobes and are listed as warnings.
pub fn verify_codebook(cb: &Codebook, mode: VerifyMode) -> Result<VerifyReport> {
    let limit = cb.grid.threshold + VERIFY_TOLERANCE;
    let mut report = VerifyReport {
        mode,
        threshold: cb.grid.threshold,
        tolerance: VERIFY_TOLERANCE,
        angular: None,
        distance: None,
        all_pairs: None,
        pairs_checked: 0,
        passed: true,
        warnings: Vec::new(),
    };
    match mode {
        VerifyMode::Neighbors => {
            let rays = cb.grid.angles.len();
            let rings = cb.grid.distances.len();
            let pair = |a: usize, b: usize| -> Result<PairCorrelation> {
                let gain = exact_gain(&cb.geometry, &cb.focal_point(a), &cb.focal_point(b))?.value;
                Ok(PairCorrelation { first: a, second: b, gain })
            };
            if rays > 1 {
                for s1 in 0..rays {
                    for s2 in 0..rings {
                        let a = cb.index(s1, s2).expect("in range");
                        let b = cb.index((s1 + 1) % rays, s2).expect("in range");
                        report.angular = worst(report.angular, pair(a, b)?);
                        report.pairs_checked += 1;
                    }
                }
            }
            for s1 in 0..rays {
                for s2 in 0..rings - 1 {
                    let a = cb.index(s1, s2).expect("in range");
                    report.distance = worst(report.distance, pair(a, a + 1)?);
                    report.pairs_checked += 1;
                }
            }
            report.passed = [report.angular, report.distance].iter().flatten().all(|p| p.gain <= limit);
        }
        VerifyMode::AllPairs => {
            if cb.len() > ALL_PAIRS_LIMIT {
                return Err(Error::Codebook(format!(
                    "all-pairs check limited to {ALL_PAIRS_LIMIT} codewords, codebook has {}",
                    cb.len()
                )));
            }
            let words: Vec<BeamVector> = (0..cb.len()).map(|i| cb.codeword(i)).collect::<Result<_>>()?;
            for i in 0..words.len() {
                for j in i + 1..words.len() {
                    let p = PairCorrelation { first: i, second: j, gain: words[i].gain(&words[j])? };
                    report.all_pairs = worst(report.all_pairs, p);
                    report.pairs_checked += 1;
                    if p.gain > limit {
                        report.warnings.push(format!("codewords {i} and {j} correlate at {:.6}", p.gain));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Header of an exported codebook document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportHeader {
    pub layout: String,
    pub n: usize,
    pub radius_m: f64,
    pub wavelength_m: f64,
    pub delta: f64,
    pub r_min_m: f64,
    pub s1_count: usize,
    pub s2_count: usize,
    #[serde(default)]
    pub ring_rule: RingRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedCodeword {
    pub s1: usize,
    pub s2: usize,
    pub angle_rad: f64,
    pub distance_m: Distance,
    pub phases_rad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookDocument {
    pub header: ExportHeader,
    pub codewords: Vec<ExportedCodeword>,
}

impl CodebookDocument {
    /// Rebuilds the codebook described by the header.
    pub fn rebuild(&self) -> Result<Codebook> {
        let h = &self.header;
        if h.layout != "uca" {
            return Err(Error::Format(format!("unsupported layout {:?}", h.layout)));
        }
        let geom = ArrayGeometry::uca(h.n, h.radius_m, h.wavelength_m)?;
        Codebook::build(&geom, h.delta, h.r_min_m, h.ring_rule)
    }

    pub fn focal_points(&self) -> Vec<FocusPoint> {
        self.codewords.iter().map(|c| FocusPoint::new(c.distance_m, c.angle_rad, PI / 2.0)).collect()
    }
}

fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().expect("formatted float parses")
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

impl Codebook {
    pub fn export_header(&self) -> ExportHeader {
        ExportHeader {
            layout: self.geometry.layout().name().to_string(),
            n: self.geometry.element_count(),
            radius_m: self.geometry.radius().unwrap_or_default(),
            wavelength_m: self.geometry.wavelength(),
            delta: self.grid.threshold,
            r_min_m: self.grid.r_min,
            s1_count: self.grid.angles.len(),
            s2_count: self.grid.distances.len(),
            ring_rule: self.grid.rule,
        }
    }

    /// Streams the JSON document; phases are rounded to 12 significant digits.
    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        out.write_all(b"{\"header\":").map_err(io)?;
        serde_json::to_writer(&mut out, &self.export_header()).map_err(json_err)?;
        out.write_all(b",\"codewords\":[").map_err(io)?;
        for i in 0..self.len() {
            if i > 0 {
                out.write_all(b",").map_err(io)?;
            }
            let (s1, s2) = self.coordinates(i);
            let word = ExportedCodeword {
                s1,
                s2,
                angle_rad: self.grid.angles[s1],
                distance_m: self.grid.distances[s2],
                phases_rad: self.codeword(i)?.phases().into_iter().map(|p| round_significant(p, 12)).collect(),
            };
            serde_json::to_writer(&mut out, &word).map_err(json_err)?;
        }
        out.write_all(b"]}\n").map_err(io)?;
        Ok(())
    }
}

pub fn read_json<R: Read>(input: R) -> Result<CodebookDocument> {
    let doc: CodebookDocument = serde_json::from_reader(input).map_err(json_err)?;
    if doc.codewords.len() != doc.header.s1_count * doc.header.s2_count {
        return Err(Error::Format(format!(
            "{} codewords listed, header implies {}",
            doc.codewords.len(),
            doc.header.s1_count * doc.header.s2_count
        )));
    }
    Ok(doc)
}
