//! Random-waypoint motion with zero pause time.

use rand::Rng;

use super::{Point, ScenarioConfig};

/// Piecewise-linear STA 2 track. `times[i]` is when `waypoints[i]` is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    speed_mps: f64,
    waypoints: Vec<Point>,
    times: Vec<f64>,
}

impl Trajectory {
    pub fn stationary(at: Point) -> Self {
        Self { speed_mps: 0.0, waypoints: vec![at], times: vec![0.0] }
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_mps
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    /// Position at time `t_s`; clamped to the ends outside the track.
    pub fn position(&self, t_s: f64) -> Point {
        let n = self.waypoints.len();
        if n == 1 || t_s <= self.times[0] {
            return self.waypoints[0];
        }
        if t_s >= self.times[n - 1] {
            return self.waypoints[n - 1];
        }
        let i = self.times.partition_point(|&t| t <= t_s) - 1;
        let (a, b) = (self.waypoints[i], self.waypoints[i + 1]);
        let span = self.times[i + 1] - self.times[i];
        let f = if span > 0.0 { (t_s - self.times[i]) / span } else { 0.0 };
        Point::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
    }

    /// Distance travelled over `[0, t_s]`.
    pub fn path_length(&self, t_s: f64) -> f64 {
        let mut len = 0.0;
        for i in 1..self.waypoints.len() {
            if self.times[i] <= t_s {
                len += self.waypoints[i].distance(&self.waypoints[i - 1]);
            } else {
                len += self.position(t_s).distance(&self.waypoints[i - 1]);
                break;
            }
        }
        len
    }
}

fn uniform_point<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Point {
    Point::new(
        rng.random_range(0.0..=cfg.room.width_m),
        rng.random_range(0.0..=cfg.room.height_m),
    )
}

/// Uniform waypoints in the room, visited at constant speed until the
/// epoch duration is covered.
pub fn waypoint_trajectory<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Trajectory {
    let start = uniform_point(cfg, rng);
    let speed = cfg.speed_mps;
    if speed <= 0.0 {
        return Trajectory::stationary(start);
    }
    let horizon = cfg.duration_s + 1.0;
    let mut waypoints = vec![start];
    let mut times = vec![0.0];
    while *times.last().unwrap() < horizon {
        let next = uniform_point(cfg, rng);
        let leg = next.distance(waypoints.last().unwrap());
        if leg <= 0.0 {
            continue;
        }
        times.push(times.last().unwrap() + leg / speed);
        waypoints.push(next);
    }
    Trajectory { speed_mps: speed, waypoints, times }
}
