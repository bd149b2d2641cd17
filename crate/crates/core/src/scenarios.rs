//! Canonical urban canyon and urban corner scenes.

use crate::geometry::{Point2, Rect, Scenario, Side, Wall};
use crate::measurement::NoiseProfile;

pub const CANYON_FES: [Point2; 2] = [Point2::new(-1.0, 2.0), Point2::new(21.0, 48.0)];
pub const CORNER_FES: [Point2; 2] = [Point2::new(18.0, 10.0), Point2::new(18.0, 48.0)];

/// Example UE of the canyon scenes.
pub const CANYON_UE: Point2 = Point2::new(10.0, 40.0);
/// UE used for the beamwidth sweep in the one-FE corner.
pub const SWEEP_UE: Point2 = Point2::new(8.0, 35.0);
/// Example UE of the corner scenes.
pub const CORNER_UE: Point2 = Point2::new(15.0, 15.0);

pub const CANYON_REGION: Rect = Rect::new(0.0, 20.0, 0.0, 50.0);
pub const CORNER_REGION: Rect = Rect::new(0.0, 30.0, 0.0, 50.0);

/// Walls at x = 0 and x = 20. FE 1 is mounted behind the left wall, FE 2
/// behind the right one.
pub fn canyon(n_fe: usize, profile: NoiseProfile) -> Scenario {
    assert!((1..=2).contains(&n_fe), "canyon presets have one or two FEs");
    Scenario {
        walls: vec![Wall::vertical(0.0, Side::Positive), Wall::vertical(20.0, Side::Negative)],
        fes: CANYON_FES[..n_fe].to_vec(),
        noise_profile: profile,
        region: CANYON_REGION,
    }
}

/// Walls at x = 0 and y = 0.
pub fn corner(n_fe: usize, profile: NoiseProfile) -> Scenario {
    assert!((1..=2).contains(&n_fe), "corner presets have one or two FEs");
    Scenario {
        walls: vec![Wall::vertical(0.0, Side::Positive), Wall::horizontal(0.0, Side::Positive)],
        fes: CORNER_FES[..n_fe].to_vec(),
        noise_profile: profile,
        region: CORNER_REGION,
    }
}

pub const PRESET_NAMES: [&str; 4] = ["canyon-1fe", "canyon-2fe", "corner-1fe", "corner-2fe"];

/// Preset scene and its example UE by name.
pub fn preset(name: &str, profile: NoiseProfile) -> Option<(Scenario, Point2)> {
    match name {
        "canyon-1fe" => Some((canyon(1, profile), CANYON_UE)),
        "canyon-2fe" => Some((canyon(2, profile), CANYON_UE)),
        "corner-1fe" => Some((corner(1, profile), SWEEP_UE)),
        "corner-2fe" => Some((corner(2, profile), CORNER_UE)),
        _ => None,
    }
}
