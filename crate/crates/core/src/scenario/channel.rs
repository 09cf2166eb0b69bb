//! Rician channel from the LoS path plus one image-method reflection per wall.

use num_complex::Complex64;

use super::{Point, ScenarioConfig, ScenarioError};
use crate::waveform::{Path, PathSet};
use crate::SPEED_OF_LIGHT;

/// Paths between STA 1 and STA 2 at `sta2`.
///
/// LoS gain is `√(κ/(κ+1))` and each of the four wall reflections
/// `1/√(4(κ+1))`, so LoS-to-NLoS power is exactly `κ`. `κ = ∞` yields the
/// LoS path alone.
pub fn realize_channel(sta2: Point, cfg: &ScenarioConfig) -> Result<PathSet, ScenarioError> {
    let room = &cfg.room;
    if !room.contains(&sta2) {
        return Err(ScenarioError::Geometry(format!("STA 2 at ({}, {}) is outside the room", sta2.x, sta2.y)));
    }
    let sta1 = room.sta1();
    let los = sta1.distance(&sta2);
    if !(los > 0.0) {
        return Err(ScenarioError::Geometry("stations are co-located".into()));
    }
    let kappa = cfg.kappa;
    if kappa == f64::INFINITY {
        return Ok(PathSet::line_of_sight(los / SPEED_OF_LIGHT)?);
    }
    let los_gain = (kappa / (kappa + 1.0)).sqrt();
    let nlos_gain = 1.0 / (4.0 * (kappa + 1.0)).sqrt();
    let images = [
        Point::new(-sta2.x, sta2.y),
        Point::new(2.0 * room.width_m - sta2.x, sta2.y),
        Point::new(sta2.x, -sta2.y),
        Point::new(sta2.x, 2.0 * room.height_m - sta2.y),
    ];
    let mut paths = vec![Path { delay_s: los / SPEED_OF_LIGHT, gain: Complex64::new(los_gain, 0.0) }];
    paths.extend(images.iter().map(|img| Path {
        delay_s: sta1.distance(img) / SPEED_OF_LIGHT,
        gain: Complex64::new(nlos_gain, 0.0),
    }));
    Ok(PathSet::new(paths)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn los_and_floor_reflection_delays() {
        let cfg = ScenarioConfig { kappa: 7.0, ..Default::default() };
        let ps = realize_channel(Point::new(2.5, 1.5), &cfg).unwrap();
        assert_eq!(ps.len(), 5);
        assert!((ps.los().delay_s - 1.0 / 3e8).abs() < 1e-20);
        // wall y = 0: image at (2.5, −1.5), 4 m from STA 1
        assert!((ps.paths()[3].delay_s - 4.0 / 3e8).abs() < 1e-20);
    }

    #[test]
    fn rician_power_ratio() {
        for kappa in [0.5, 3.0, 7.0, 1000.0] {
            let cfg = ScenarioConfig { kappa, ..Default::default() };
            let ps = realize_channel(Point::new(1.2, 3.9), &cfg).unwrap();
            let los = ps.los().gain.norm_sqr();
            let nlos: f64 = ps.paths()[1..].iter().map(|p| p.gain.norm_sqr()).sum();
            assert!((los / nlos - kappa).abs() < 1e-9 * kappa);
        }
    }

    #[test]
    fn infinite_kappa_is_single_path() {
        let cfg = ScenarioConfig { kappa: f64::INFINITY, ..Default::default() };
        let ps = realize_channel(Point::new(1.0, 1.0), &cfg).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps.los().gain, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn rejects_degenerate_geometry() {
        let cfg = ScenarioConfig::default();
        assert!(matches!(realize_channel(Point::new(2.5, 2.5), &cfg), Err(ScenarioError::Geometry(_))));
        assert!(matches!(realize_channel(Point::new(6.0, 2.5), &cfg), Err(ScenarioError::Geometry(_))));
    }
}
