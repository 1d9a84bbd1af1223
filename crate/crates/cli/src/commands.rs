use std::f64::consts::{FRAC_PI_2, PI};
use std::io;
use std::path::{Path, PathBuf};

use nearfield::channel::{rate_experiment, RateExperiment};
use nearfield::codebook::{verify_codebook, Codebook, PairCorrelation, VerifyMode, VerifyReport};
use nearfield::gain::{
    angular_gain, cylindrical_gain, distance_gain, erd_numeric, erd_ratio, erd_uca, erd_ula, exact_gain,
    gain_upper_bound,
};
use nearfield::{ArrayGeometry, Distance, FocusPoint};
use thiserror::Error;

use crate::config::{ConfigError, DistanceAxis, Loaded};
use crate::output::{write_atomic, Cell, Table};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] nearfield::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

type Result<T> = std::result::Result<T, CommandError>;

pub const ANGULAR_COLUMNS: &[&str] = &["r_m", "phi_rad", "exact_gain", "approx_gain", "abs_error"];
pub const DISTANCE_COLUMNS: &[&str] = &["r_m", "exact_gain", "approx_gain", "upper_bound", "abs_error"];
pub const RADIUS_COLUMNS: &[&str] = &["radius_m", "exact_gain", "approx_gain", "upper_bound", "abs_error"];
pub const ERD_COLUMNS: &[&str] =
    &["phi_rad", "erd_uca_m", "erd_ula_m", "erd_numeric_m", "ratio", "erd_numeric_ula_m"];
pub const FOCAL_COLUMNS: &[&str] = &["index", "s1", "s2", "angle_rad", "distance_m"];
pub const VERIFY_COLUMNS: &[&str] = &["check", "first", "second", "gain", "limit", "passed"];
pub const RATE_COLUMNS: &[&str] = &["snr_db", "scheme", "mean_rate_bps_hz", "stderr", "n_seeds"];
pub const CYLINDER_COLUMNS: &[&str] = &["r_m", "exact_gain", "fresnel_j0_gain", "abs_error", "M"];

pub fn sweep_angular(l: &Loaded) -> Result<Table> {
    let (_, radius) = l.uca()?;
    let s = l.config.sweep.angular.as_ref().ok_or_else(|| l.missing("sweep.angular"))?;
    let g = &l.geometry;
    let offsets = s.axis().grid();
    let mut t = Table::new(ANGULAR_COLUMNS);
    for &r in &s.distances_m {
        let focus = FocusPoint::planar(r, s.focus_angle_rad);
        for &off in &offsets {
            let phi = s.focus_angle_rad + off;
            let exact = exact_gain(g, &focus, &FocusPoint::planar(r, phi))?.value;
            let approx = angular_gain(radius, g.wavelength(), s.focus_angle_rad, phi)?.value;
            t.push(vec![r.into(), phi.into(), exact.into(), approx.into(), (exact - approx).abs().into()]);
        }
    }
    Ok(t)
}

fn upper_bound_cell(radius: f64, wavelength: f64, r1: f64, r2: f64) -> Result<Cell> {
    if r1 == r2 {
        return Ok(Cell::Num(f64::INFINITY));
    }
    Ok(gain_upper_bound(radius, wavelength, r1, r2)?.into())
}

pub fn sweep_distance(l: &Loaded) -> Result<Table> {
    let s = l.config.sweep.distance.as_ref().ok_or_else(|| l.missing("sweep.distance"))?;
    let lambda = l.geometry.wavelength();
    let focus_m = s.focus_m.expect("validated");
    let grid = s.axis().grid();
    match s.axis {
        DistanceAxis::Distance => {
            let (_, radius) = l.uca()?;
            let focus = FocusPoint::planar(focus_m, s.focus_angle_rad);
            let mut t = Table::new(DISTANCE_COLUMNS);
            for &r in &grid {
                let exact = exact_gain(&l.geometry, &focus, &FocusPoint::planar(r, s.focus_angle_rad))?.value;
                let approx = distance_gain(radius, lambda, Distance::Finite(focus_m), Distance::Finite(r))?.value;
                let bound = upper_bound_cell(radius, lambda, focus_m, r)?;
                t.push(vec![r.into(), exact.into(), approx.into(), bound, (exact - approx).abs().into()]);
            }
            Ok(t)
        }
        DistanceAxis::Radius => {
            let second = s.second_m.expect("validated");
            let elements = s.elements.unwrap_or((4.0 * PI * s.range[1] / lambda).ceil() as usize);
            let p1 = FocusPoint::planar(focus_m, s.focus_angle_rad);
            let p2 = FocusPoint::planar(second, s.focus_angle_rad);
            let mut t = Table::new(RADIUS_COLUMNS);
            for &radius in &grid {
                let g = ArrayGeometry::uca(elements, radius, lambda)?;
                let exact = exact_gain(&g, &p1, &p2)?.value;
                let approx = distance_gain(radius, lambda, Distance::Finite(focus_m), Distance::Finite(second))?.value;
                let bound = upper_bound_cell(radius, lambda, focus_m, second)?;
                t.push(vec![radius.into(), exact.into(), approx.into(), bound, (exact - approx).abs().into()]);
            }
            Ok(t)
        }
    }
}

/// ERD of the configured UCA against a half-wavelength ULA of equal aperture.
pub fn erd_map(l: &Loaded) -> Result<Table> {
    let (_, radius) = l.uca()?;
    let s = l.config.sweep.erd.as_ref().ok_or_else(|| l.missing("sweep.erd"))?;
    let delta = l.config.analysis.delta;
    let lambda = l.geometry.wavelength();
    let aperture = 2.0 * radius;
    let ula = ArrayGeometry::ula((aperture / (lambda / 2.0)).round() as usize + 1, aperture, lambda)?;
    let closed = erd_uca(radius, lambda, delta)?.distance;
    let mut t = Table::new(ERD_COLUMNS);
    for phi in s.axis().grid() {
        t.push(vec![
            phi.into(),
            closed.into(),
            erd_ula(aperture, lambda, phi, delta)?.distance.into(),
            erd_numeric(&l.geometry, phi, delta)?.distance().into(),
            erd_ratio(phi, delta)?.into(),
            erd_numeric(&ula, phi, delta)?.distance().into(),
        ]);
    }
    Ok(t)
}

pub fn build_codebook(l: &Loaded) -> Result<Codebook> {
    l.uca()?;
    let a = &l.config.analysis;
    Ok(Codebook::build(&l.geometry, a.codebook_delta, a.r_min_m, a.ring_rule)?)
}

pub fn focal_table(cb: &Codebook) -> Table {
    let mut t = Table::new(FOCAL_COLUMNS);
    for (i, p) in cb.focal_points().enumerate() {
        let (s1, s2) = cb.coordinates(i);
        t.push(vec![i.into(), s1.into(), s2.into(), p.azimuth.into(), p.distance.into()]);
    }
    t
}

pub fn verify(l: &Loaded, mode: VerifyMode) -> Result<(Table, VerifyReport)> {
    let cb = build_codebook(l)?;
    let report = verify_codebook(&cb, mode)?;
    let limit = report.threshold + report.tolerance;
    let mut t = Table::new(VERIFY_COLUMNS);
    let checks: [(&str, Option<PairCorrelation>); 3] =
        [("angular", report.angular), ("distance", report.distance), ("all_pairs", report.all_pairs)];
    for (name, pair) in checks {
        if let Some(p) = pair {
            // all-pairs results only warn
            let passed = name == "all_pairs" || p.gain <= limit;
            t.push(vec![name.into(), p.first.into(), p.second.into(), p.gain.into(), limit.into(), passed.into()]);
        }
    }
    Ok((t, report))
}

/// Sibling file holding the focal points of an exported codebook.
pub fn focal_path(json: &Path) -> PathBuf {
    json.with_extension("focal.csv")
}

/// Writes the codebook document and its focal-point CSV.
pub fn export(l: &Loaded, path: &Path) -> Result<Codebook> {
    let cb = build_codebook(l)?;
    let mut failure = None;
    write_atomic(path, |w| {
        cb.write_json(&mut *w).map_err(|e| {
            failure = Some(e.clone());
            io::Error::other(e.to_string())
        })?;
        w.flush()
    })
    .map_err(|e| failure.take().map_or(CommandError::Io(e), CommandError::Numeric))?;
    let focal = focal_table(&cb);
    write_atomic(&focal_path(path), |w| focal.write(crate::config::Format::Csv, w))?;
    Ok(cb)
}

pub fn rate(l: &Loaded) -> Result<Table> {
    l.uca()?;
    let e = l.config.experiment.as_ref().ok_or_else(|| l.missing("experiment"))?;
    let a = &l.config.analysis;
    let cfg = RateExperiment {
        paths: e.paths,
        distance_range: (e.distance_range_m[0], e.distance_range_m[1]),
        snr_db: e.snr_db.clone(),
        seed: e.seed,
        seed_count: e.seeds,
        delta: a.codebook_delta,
        r_min: a.r_min_m,
        ring_rule: a.ring_rule,
        gain_model: e.gain_model,
    };
    let table = rate_experiment(&l.geometry, &cfg)?;
    let mut t = Table::new(RATE_COLUMNS);
    for r in table.rows {
        t.push(vec![
            r.snr_db.into(),
            r.scheme.name().into(),
            r.mean_rate_bps_hz.into(),
            r.stderr.into(),
            r.n_seeds.into(),
        ]);
    }
    Ok(t)
}

/// Cylindrical arrays stacking `2M + 1` copies of the configured ring.
pub fn cylinder_sweep(l: &Loaded) -> Result<Table> {
    let (elements, radius) = l.uca()?;
    let s = l.config.sweep.cylinder.as_ref().ok_or_else(|| l.missing("sweep.cylinder"))?;
    let lambda = l.geometry.wavelength();
    let grid = s.axis().grid();
    let focus = FocusPoint::new(s.focus_m, 0.0, FRAC_PI_2);
    let mut t = Table::new(CYLINDER_COLUMNS);
    for &m in &s.ring_half_counts {
        let g = ArrayGeometry::cylindrical(elements, radius, s.ring_spacing_m, m, lambda)?;
        for &r in &grid {
            let exact = exact_gain(&g, &focus, &FocusPoint::planar(r, 0.0))?.value;
            let approx = cylindrical_gain(radius, s.ring_spacing_m, m, lambda, s.focus_m, Distance::Finite(r))?.value;
            t.push(vec![r.into(), exact.into(), approx.into(), (exact - approx).abs().into(), m.into()]);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    const SMALL: &str = r#"
[geometry]
layout = "uca"
elements = 128
wavelength_m = 0.01

[analysis]
codebook_delta = 0.5
r_min_m = 0.5
ring_rule = "threshold_matched"

[sweep.angular]
distances_m = [2.0, 5.0]
range = [-0.05, 0.05]
points = 11

[sweep.distance]
focus_m = 1.0
range = [0.2, 4.0]
step = 0.2

[sweep.cylinder]
ring_spacing_m = 0.005
ring_half_counts = [0, 2]
range = [0.5, 3.0]
step = 0.5
"#;

    fn num(c: &Cell) -> f64 {
        match c {
            Cell::Num(v) => *v,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn angular_approximation_ignores_distance() {
        let t = sweep_angular(&parse(SMALL, "small").unwrap()).unwrap();
        assert_eq!(t.rows.len(), 22);
        let a = t.column("approx_gain").unwrap();
        for i in 0..11 {
            assert_eq!(num(&t.rows[i][a]), num(&t.rows[i + 11][a]));
        }
        let e = t.column("abs_error").unwrap();
        assert!(t.rows.iter().all(|r| num(&r[e]) < 0.02));
    }

    #[test]
    fn zero_point_sweep_is_header_only() {
        let text = SMALL.replace("points = 11", "points = 0");
        let t = sweep_angular(&parse(&text, "small").unwrap()).unwrap();
        assert!(t.rows.is_empty());
    }

    #[test]
    fn focus_row_has_infinite_bound() {
        let t = sweep_distance(&parse(SMALL, "small").unwrap()).unwrap();
        let row = t.rows.iter().find(|r| (num(&r[0]) - 1.0).abs() < 1e-12).unwrap();
        assert_eq!(num(&row[3]), f64::INFINITY);
        assert!((num(&row[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_ring_cylinder_matches_uca_exactly() {
        let l = parse(SMALL, "small").unwrap();
        let t = cylinder_sweep(&l).unwrap();
        let radius = l.geometry.radius().unwrap();
        let far = FocusPoint::new(Distance::Infinite, 0.0, FRAC_PI_2);
        for row in t.rows.iter().filter(|r| r[4] == Cell::Int(0)) {
            let r = num(&row[0]);
            let uca = exact_gain(&l.geometry, &far, &FocusPoint::planar(r, 0.0)).unwrap().value;
            let j0 = distance_gain(radius, 0.01, Distance::Infinite, Distance::Finite(r)).unwrap().value;
            assert_eq!(num(&row[1]), uca);
            assert_eq!(num(&row[2]), j0);
        }
    }

    #[test]
    fn missing_section_is_a_config_error() {
        let l = parse(SMALL, "small").unwrap();
        assert!(matches!(rate(&l), Err(CommandError::Config(_))));
        assert!(matches!(erd_map(&l), Err(CommandError::Config(_))));
    }

    #[test]
    fn ula_layout_rejected_by_uca_commands() {
        let text = SMALL.replace("layout = \"uca\"", "layout = \"ula\"").replace(
            "[analysis]\ncodebook_delta = 0.5\nr_min_m = 0.5\nring_rule = \"threshold_matched\"\n",
            "",
        );
        let l = parse(&text, "small").unwrap();
        match sweep_angular(&l) {
            Err(CommandError::Config(ConfigError::At { line, .. })) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn focal_table_counts_every_codeword() {
        let l = parse(SMALL, "small").unwrap();
        let cb = build_codebook(&l).unwrap();
        let t = focal_table(&cb);
        assert_eq!(t.rows.len(), cb.grid().angles.len() * cb.grid().distances.len());
        assert_eq!(t.rows[0][4], Cell::Text("inf".into()));
    }

    #[test]
    fn export_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.json");
        let cb = export(&parse(SMALL, "small").unwrap(), &path).unwrap();
        let doc = nearfield::codebook::read_json(std::fs::File::open(&path).unwrap()).unwrap();
        assert_eq!(doc.codewords.len(), cb.len());
        let csv = std::fs::read_to_string(focal_path(&path)).unwrap();
        assert_eq!(csv.lines().count(), cb.len() + 1);
    }
}
