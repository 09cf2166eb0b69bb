//! Jittered nested-array transmit schedule.

use rand::Rng;

use super::{ScenarioConfig, ScenarioError, ScheduleConfig};

/// Nominal (unjittered) transmit time of 1-based exchange `p`.
fn nominal(s: &ScheduleConfig, p: usize) -> (f64, bool) {
    let g = (p - 1) / s.group_size;
    let r = (p - 1) % s.group_size;
    let base = s.group_period_s * g as f64;
    if r >= s.inner_count {
        (base + s.outer_spacing_s * (r + 1 - s.inner_count) as f64, false)
    } else {
        (base + s.inner_spacing_s * r as f64, true)
    }
}

fn check(s: &ScheduleConfig) -> Result<(), ScenarioError> {
    let err = |m: String| Err(ScenarioError::Schedule(m));
    if 2.0 * s.jitter_s >= s.inner_spacing_s {
        return err(format!(
            "jitter ±{} s can reorder inner exchanges spaced {} s",
            s.jitter_s, s.inner_spacing_s
        ));
    }
    let last_inner = s.inner_spacing_s * (s.inner_count - 1) as f64 + s.jitter_s;
    if s.group_size > s.inner_count && last_inner >= s.outer_spacing_s {
        return err("inner burst overlaps the first outer exchange".into());
    }
    let last = nominal(s, s.group_size).0 + if s.group_size > s.inner_count { 0.0 } else { s.jitter_s };
    if last + s.jitter_s >= s.group_period_s {
        return err("group does not fit in its period".into());
    }
    Ok(())
}

/// Transmit times `t1_p` of every exchange whose nominal time falls before
/// the configured duration. Inner exchanges get jitter `Uni[−χ, χ]`.
pub fn schedule_exchanges<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Vec<f64>, ScenarioError> {
    if !(cfg.duration_s > 0.0) {
        return Err(ScenarioError::Config(format!("duration must be positive, got {}", cfg.duration_s)));
    }
    let s = &cfg.schedule;
    if s.group_size == 0 || s.inner_count == 0 || s.inner_count > s.group_size {
        return Err(ScenarioError::Config("schedule group sizes are inconsistent".into()));
    }
    check(s)?;
    let mut times = Vec::new();
    for p in 1.. {
        let (t, inner) = nominal(s, p);
        if t >= cfg.duration_s {
            break;
        }
        let jitter = if inner && s.jitter_s > 0.0 {
            rng.random_range(-s.jitter_s..=s.jitter_s)
        } else {
            0.0
        };
        times.push(t + jitter);
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScenarioError::Schedule("generated times are not increasing".into()));
    }
    Ok(times)
}
