//! Multipath near-field channels and achievable-rate experiments.
//!
//! A channel is `h = sqrt(N / L) sum_l alpha_l b(r_l, phi_l)` with
//! focusing vectors `b` built from exact distances. No path loss is applied
//! beyond the path gains. Rates are `log2(1 + P |h^H w|^2 / sigma^2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, RingRule};
use crate::error::{domain, Result};
use crate::geometry::{inner_product, near_focusing_vector, ArrayGeometry, BeamVector, FocusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathGainModel {
    /// Circularly-symmetric complex normal with unit variance.
    #[default]
    ComplexNormal,
    /// Every path gain equals 1.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub point: FocusPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    paths: Vec<Path>,
    vector: Vec<Complex64>,
    seed: Option<u64>,
}

impl ChannelRealization {
    /// Composite channel of explicit paths.
    pub fn from_paths(geom: &ArrayGeometry, paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(domain("a channel needs at least one path"));
        }
        let scale = (geom.element_count() as f64 / paths.len() as f64).sqrt();
        let mut vector = vec![Complex64::new(0.0, 0.0); geom.element_count()];
        for path in &paths {
            let b = near_focusing_vector(geom, &path.point)?;
            for (h, w) in vector.iter_mut().zip(b.weights()) {
                *h += scale * path.gain * w;
            }
        }
        Ok(Self { paths, vector, seed: None })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    pub fn vector(&self) -> &[Complex64] {
        &self.vector
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn norm_sqr(&self) -> f64 {
        self.vector.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Draws `paths` independent paths with distances uniform on `range`,
/// azimuths uniform on `[0, 2 pi)` and complex normal gains.
pub fn sample_channel(geom: &ArrayGeometry, paths: usize, range: (f64, f64), seed: u64) -> Result<ChannelRealization> {
    sample_channel_with(geom, paths, range, seed, PathGainModel::ComplexNormal)
}

pub fn sample_channel_with(
    geom: &ArrayGeometry,
    paths: usize,
    (low, high): (f64, f64),
    seed: u64,
    model: PathGainModel,
) -> Result<ChannelRealization> {
    if paths == 0 {
        return Err(domain("path count must be at least 1"));
    }
    if !(low.is_finite() && high.is_finite() && low > 0.0 && low < high) {
        return Err(domain(format!("distance range [{low}, {high}] must satisfy 0 < low < high")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = (0..paths)
        .map(|_| {
            let r = rng.random_range(low..=high);
            let phi = rng.random_range(0.0..2.0 * PI);
            let gain = match model {
                PathGainModel::ComplexNormal => {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                }
                PathGainModel::Unit => Complex64::new(1.0, 0.0),
            };
            Path { gain, point: FocusPoint::planar(r, phi) }
        })
        .collect();
    let mut h = ChannelRealization::from_paths(geom, drawn)?;
    h.seed = Some(seed);
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub transmit_power: f64,
    pub noise_power: f64,
}

impl LinkBudget {
    pub fn new(transmit_power: f64, noise_power: f64) -> Result<Self> {
        if !(transmit_power.is_finite() && transmit_power > 0.0 && noise_power.is_finite() && noise_power > 0.0) {
            return Err(domain(format!(
                "link budget needs positive powers, got P = {transmit_power}, noise = {noise_power}"
            )));
        }
        Ok(Self { transmit_power, noise_power })
    }

    /// `P / sigma^2` in dB with unit noise power.
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        Self::new(10f64.powf(snr_db / 10.0), 1.0)
    }

    pub fn snr(&self) -> f64 {
        self.transmit_power / self.noise_power
    }
}

fn rate_from_power(power: f64, lb: &LinkBudget) -> f64 {
    (1.0 + lb.snr() * power).log2()
}

/// `log2(1 + P |h^H w|^2 / sigma^2)`.
pub fn achievable_rate(h: &ChannelRealization, w: &BeamVector, lb: &LinkBudget) -> Result<f64> {
    Ok(rate_from_power(inner_product(h.vector(), w.weights())?.norm_sqr(), lb))
}

/// Rate of the matched filter `w = h / ||h||`.
pub fn matched_filter_rate(h: &ChannelRealization, lb: &LinkBudget) -> f64 {
    rate_from_power(h.norm_sqr(), lb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    MatchedFilter,
    ConcentricRing,
    FarField,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::MatchedFilter, Scheme::ConcentricRing, Scheme::FarField];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::MatchedFilter => "matched_filter",
            Scheme::ConcentricRing => "concentric_ring",
            Scheme::FarField => "far_field",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperiment {
    pub paths: usize,
    pub distance_range: (f64, f64),
    pub snr_db: Vec<f64>,
    pub seed: u64,
    pub seed_count: usize,
    pub delta: f64,
    pub r_min: f64,
    #[serde(default)]
    pub ring_rule: RingRule,
    #[serde(default)]
    pub gain_model: PathGainModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub mean_rate_bps_hz: f64,
    pub stderr: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn row(&self, snr_db: f64, scheme: Scheme) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.snr_db == snr_db && r.scheme == scheme)
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo rates of the matched filter, the concentric-ring codebook and
/// its far-field ring, one channel per seed `seed..seed + seed_count`.
///
/// Rows are ordered by SNR, then matched filter, concentric ring, far field.
pub fn rate_experiment(geom: &ArrayGeometry, cfg: &RateExperiment) -> Result<RateTable> {
    if cfg.seed_count == 0 {
        return Err(domain("rate experiment needs at least one seed"));
    }
    if cfg.snr_db.iter().any(|s| !s.is_finite()) {
        return Err(domain("SNR grid must be finite"));
    }
    let cb = Codebook::build(geom, cfg.delta, cfg.r_min, cfg.ring_rule)?;
    let channels = (0..cfg.seed_count as u64)
        .map(|k| {
            let seed = cfg.seed.checked_add(k).ok_or_else(|| domain("seed range overflows u64"))?;
            sample_channel_with(geom, cfg.paths, cfg.distance_range, seed, cfg.gain_model)
        })
        .collect::<Result<Vec<_>>>()?;
    let vectors: Vec<Vec<Complex64>> = channels.iter().map(|h| h.vector().to_vec()).collect();

    let rings = cb.grid().distances.len();
    let mut ring_best = vec![0.0f64; channels.len()];
    let mut far_best = vec![0.0f64; channels.len()];
    cb.scan(&vectors, &|_| true, |cw, ch, power| {
        if power > ring_best[ch] {
            ring_best[ch] = power;
        }
        if cw % rings == 0 && power > far_best[ch] {
            far_best[ch] = power;
        }
    });
    let matched: Vec<f64> = channels.iter().map(|h| h.norm_sqr()).collect();

    let mut rows = Vec::with_capacity(cfg.snr_db.len() * 3);
    for &snr_db in &cfg.snr_db {
        let lb = LinkBudget::from_snr_db(snr_db)?;
        for scheme in Scheme::ALL {
            let powers = match scheme {
                Scheme::MatchedFilter => &matched,
                Scheme::ConcentricRing => &ring_best,
                Scheme::FarField => &far_best,
            };
            let rates: Vec<f64> = powers.iter().map(|&p| rate_from_power(p, &lb)).collect();
            let (mean, stderr) = mean_stderr(&rates);
            rows.push(RateRow { snr_db, scheme, mean_rate_bps_hz: mean, stderr, n_seeds: rates.len() });
        }
    }
    Ok(RateTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::select_codeword;
    use proptest::prelude::*;

    const LAMBDA: f64 = 0.01;

    fn small_uca() -> ArrayGeometry {
        ArrayGeometry::uca_half_wavelength(64, LAMBDA).unwrap()
    }

    #[test]
    fn same_seed_same_channel() {
        let g = small_uca();
        let a = sample_channel(&g, 3, (4.0, 50.0), 11).unwrap();
        let b = sample_channel(&g, 3, (4.0, 50.0), 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_channel(&g, 3, (4.0, 50.0), 12).unwrap());
        assert_eq!(a.seed(), Some(11));
        assert!(a.paths().iter().all(|p| (4.0..=50.0).contains(&p.point.distance.meters())));
    }

    #[test]
    fn sampling_rejects_bad_input() {
        let g = small_uca();
        assert!(sample_channel(&g, 0, (4.0, 50.0), 1).is_err());
        assert!(sample_channel(&g, 1, (50.0, 4.0), 1).is_err());
        assert!(sample_channel(&g, 1, (0.0, 4.0), 1).is_err());
    }

    #[test]
    fn single_unit_path_is_scaled_focusing_vector() {
        let g = small_uca();
        let p = FocusPoint::planar(7.0, 1.2);
        let h = ChannelRealization::from_paths(&g, vec![Path { gain: Complex64::new(1.0, 0.0), point: p }]).unwrap();
        let b = near_focusing_vector(&g, &p).unwrap();
        let root_n = (g.element_count() as f64).sqrt();
        for (x, w) in h.vector().iter().zip(b.weights()) {
            assert!((x - root_n * w).norm() < 1e-12);
        }
    }

    #[test]
    fn channel_power_normalization() {
        // E ||h||^2 / N = 1 for unit-variance path gains
        let g = ArrayGeometry::uca_half_wavelength(32, LAMBDA).unwrap();
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|s| sample_channel(&g, 3, (4.0, 50.0), s).unwrap().norm_sqr() / 32.0)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn rate_edge_cases() {
        let g = small_uca();
        let p = FocusPoint::planar(9.0, 0.3);
        let alpha = Complex64::new(0.6, -0.8) * 1.5;
        let h = ChannelRealization::from_paths(&g, vec![Path { gain: alpha, point: p }]).unwrap();
        let w = near_focusing_vector(&g, &p).unwrap();
        let unit = LinkBudget::new(1.0, 1.0).unwrap();
        let want = (1.0 + g.element_count() as f64 * alpha.norm_sqr()).log2();
        assert!((achievable_rate(&h, &w, &unit).unwrap() - want).abs() < 1e-12);
        assert!((matched_filter_rate(&h, &unit) - want).abs() < 1e-12);
        assert!(achievable_rate(&h, &w, &LinkBudget::new(1e-300, 1.0).unwrap()).unwrap() < 1e-290);
        assert!(LinkBudget::new(0.0, 1.0).is_err());
        assert!(LinkBudget::new(1.0, 0.0).is_err());

        let two = ArrayGeometry::ula(2, 0.005, LAMBDA).unwrap();
        let h = ChannelRealization::from_paths(&two, vec![Path { gain: Complex64::new(1.0, 0.0), point: FocusPoint::far(0.0) }])
            .unwrap();
        // half-wavelength pair: the endfire beam is orthogonal to the broadside one
        let w = crate::geometry::far_steering_vector(&two, PI / 2.0, PI / 2.0);
        assert!(achievable_rate(&h, &w, &unit).unwrap() < 1e-20);
    }

    #[test]
    fn selection_gain_orders_rates() {
        let g = small_uca();
        let cb = Codebook::build(&g, 0.5, 0.05, RingRule::Published).unwrap();
        let lb = LinkBudget::from_snr_db(5.0).unwrap();
        for seed in 0..8 {
            let h = sample_channel(&g, 2, (0.1, 2.0), seed).unwrap();
            let sel = select_codeword(&cb, &h).unwrap();
            let best = achievable_rate(&h, &cb.codeword(sel.index).unwrap(), &lb).unwrap();
            for other in [0, cb.len() / 3, cb.len() - 1] {
                let rate = achievable_rate(&h, &cb.codeword(other).unwrap(), &lb).unwrap();
                assert!(rate <= best + 1e-12);
            }
            assert!(best <= matched_filter_rate(&h, &lb) + 1e-12);
        }
    }

    fn small_experiment(range: (f64, f64)) -> RateExperiment {
        RateExperiment {
            paths: 3,
            distance_range: range,
            snr_db: vec![-10.0, 0.0, 10.0],
            seed: 100,
            seed_count: 40,
            delta: 0.5,
            r_min: 0.05,
            ring_rule: RingRule::Published,
            gain_model: PathGainModel::ComplexNormal,
        }
    }

    #[test]
    fn experiment_rows_are_nested_and_reproducible() {
        let g = small_uca();
        let cfg = small_experiment((0.05, 1.0));
        let table = rate_experiment(&g, &cfg).unwrap();
        assert_eq!(table.rows.len(), 9);
        assert_eq!(table.rows[0].scheme, Scheme::MatchedFilter);
        assert_eq!(table.rows[2].scheme, Scheme::FarField);
        for snr in &cfg.snr_db {
            let mf = table.row(*snr, Scheme::MatchedFilter).unwrap();
            let cr = table.row(*snr, Scheme::ConcentricRing).unwrap();
            let ff = table.row(*snr, Scheme::FarField).unwrap();
            assert!(mf.mean_rate_bps_hz >= cr.mean_rate_bps_hz);
            assert!(cr.mean_rate_bps_hz >= ff.mean_rate_bps_hz);
            assert_eq!(cr.n_seeds, 40);
        }
        assert_eq!(rate_experiment(&g, &cfg).unwrap(), table);
    }

    #[test]
    fn experiment_rejects_empty_seed_list() {
        let mut cfg = small_experiment((0.05, 1.0));
        cfg.seed_count = 0;
        assert!(rate_experiment(&small_uca(), &cfg).is_err());
    }

    #[test]
    fn stderr_of_known_sample() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[3.0]), (3.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rate_monotone_in_power(seed in 0u64..1000, p1 in 1e-3f64..1e3, p2 in 1e-3f64..1e3) {
            let g = ArrayGeometry::uca_half_wavelength(16, LAMBDA).unwrap();
            let h = sample_channel(&g, 2, (0.5, 5.0), seed).unwrap();
            let w = crate::geometry::far_steering_vector(&g, 0.4, PI / 2.0);
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let r_lo = achievable_rate(&h, &w, &LinkBudget::new(lo, 1.0).unwrap()).unwrap();
            let r_hi = achievable_rate(&h, &w, &LinkBudget::new(hi, 1.0).unwrap()).unwrap();
            prop_assert!(r_lo <= r_hi);
            prop_assert!(r_lo >= 0.0);
        }
    }
}
