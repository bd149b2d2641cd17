//! Planar scene model: axis-aligned walls, fixed equipment (FE) positions and
//! the enumeration of LOS and single-bounce NLOS paths via the image method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::NoiseProfile;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(&self, other: &Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Line `x = offset`.
    Vertical,
    /// Line `y = offset`.
    Horizontal,
}

/// Which half-plane of a wall faces the street.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

/// Infinite axis-aligned reflecting wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub axis: Axis,
    pub offset: f64,
    pub reflective_side: Side,
}

impl Wall {
    pub const fn vertical(x: f64, reflective_side: Side) -> Self {
        Self { axis: Axis::Vertical, offset: x, reflective_side }
    }

    pub const fn horizontal(y: f64, reflective_side: Side) -> Self {
        Self { axis: Axis::Horizontal, offset: y, reflective_side }
    }

    fn coord(&self, p: &Point2) -> f64 {
        match self.axis {
            Axis::Vertical => p.x,
            Axis::Horizontal => p.y,
        }
    }

    /// Signed distance from the wall line, positive on the reflective side.
    pub fn signed_distance(&self, p: &Point2) -> f64 {
        let d = self.coord(p) - self.offset;
        match self.reflective_side {
            Side::Positive => d,
            Side::Negative => -d,
        }
    }

    /// Strictly inside the reflective half-plane.
    pub fn faces(&self, p: &Point2) -> bool {
        self.signed_distance(p) > 0.0
    }
}

/// Rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn padded(&self, pad: f64) -> Rect {
        Rect::new(self.x_min - pad, self.x_max + pad, self.y_min - pad, self.y_max + pad)
    }

    pub fn expand_to(&self, p: &Point2) -> Rect {
        Rect::new(
            self.x_min.min(p.x),
            self.x_max.max(p.x),
            self.y_min.min(p.y),
            self.y_max.max(p.y),
        )
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }
}

/// The world model: walls, FE positions, noise statistics and the UE region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub walls: Vec<Wall>,
    pub fes: Vec<Point2>,
    pub noise_profile: NoiseProfile,
    /// Street area where UEs are placed (used for grids and the default search box).
    pub region: Rect,
}

impl Scenario {
    pub fn new(walls: Vec<Wall>, fes: Vec<Point2>, noise_profile: NoiseProfile, region: Rect) -> Result<Self> {
        let s = Self { walls, fes, noise_profile, region };
        let problems = s.problems();
        if let Some(first) = problems.into_iter().next() {
            return Err(Error::InvalidScenario(first));
        }
        Ok(s)
    }

    /// Every violated scenario invariant, in a stable order. Empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.fes.is_empty() {
            out.push("scenario has no fixed equipment; no LOS or NLOS path can exist".to_string());
        }
        for (i, w) in self.walls.iter().enumerate() {
            if !w.offset.is_finite() {
                out.push(format!("walls[{i}].offset is not finite"));
            }
            for (j, other) in self.walls.iter().enumerate().skip(i + 1) {
                if w.axis == other.axis && w.offset == other.offset {
                    out.push(format!("walls[{i}] and walls[{j}] lie on the same line"));
                }
            }
        }
        for (k, fe) in self.fes.iter().enumerate() {
            if !fe.is_finite() {
                out.push(format!("fes[{k}] is not finite"));
                continue;
            }
            for (i, w) in self.walls.iter().enumerate() {
                if w.signed_distance(fe) == 0.0 {
                    out.push(format!("fes[{k}] lies exactly on walls[{i}]"));
                }
            }
        }
        if !self.region.is_valid() {
            out.push("region must have finite bounds with min < max".to_string());
        }
        out.extend(self.noise_profile.problems());
        out
    }

    /// Region plus every FE, padded by `pad` meters.
    pub fn bounding_box(&self, pad: f64) -> Rect {
        self.fes.iter().fold(self.region, |r, fe| r.expand_to(fe)).padded(pad)
    }

    /// Wall `w` produces a bounce for FE `k` only if the FE faces that wall.
    pub fn wall_reflects_for(&self, wall: usize, fe: usize) -> bool {
        self.walls[wall].faces(&self.fes[fe])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathKind {
    Los,
    Nlos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDescriptor {
    pub kind: PathKind,
    pub fe_index: usize,
    /// Position of this path's scatterer in the NLOS scatterer list (NLOS only).
    pub scatterer_index: Option<usize>,
    /// Ground-truth reflection point (NLOS only).
    pub true_scatterer: Option<Point2>,
    /// Wall that produced the bounce, when known.
    pub wall_index: Option<usize>,
}

impl PathDescriptor {
    pub fn los(fe_index: usize) -> Self {
        Self { kind: PathKind::Los, fe_index, scatterer_index: None, true_scatterer: None, wall_index: None }
    }

    pub fn nlos(fe_index: usize, scatterer_index: usize, true_scatterer: Point2, wall_index: Option<usize>) -> Self {
        Self {
            kind: PathKind::Nlos,
            fe_index,
            scatterer_index: Some(scatterer_index),
            true_scatterer: Some(true_scatterer),
            wall_index,
        }
    }

    pub fn is_los(&self) -> bool {
        self.kind == PathKind::Los
    }
}

/// Ordered path list: all LOS paths first, then NLOS paths whose
/// `scatterer_index` runs 0..n_nlos in order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSet {
    paths: Vec<PathDescriptor>,
}

impl PathSet {
    /// Reorders LOS-first (stable) and renumbers scatterer indices.
    pub fn new(paths: Vec<PathDescriptor>) -> Self {
        let (mut los, nlos): (Vec<_>, Vec<_>) = paths.into_iter().partition(|p| p.is_los());
        for (i, mut p) in nlos.into_iter().enumerate() {
            p.scatterer_index = Some(i);
            los.push(p);
        }
        Self { paths: los }
    }

    pub fn paths(&self) -> &[PathDescriptor] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn n_los(&self) -> usize {
        self.paths.iter().filter(|p| p.is_los()).count()
    }

    pub fn n_nlos(&self) -> usize {
        self.len() - self.n_los()
    }

    pub fn is_sufficient(&self) -> bool {
        self.n_los() >= 1 || self.n_nlos() >= 2
    }

    pub fn check_sufficient(&self) -> Result<()> {
        if self.is_sufficient() {
            Ok(())
        } else {
            Err(Error::InsufficientPaths { n_los: self.n_los(), n_nlos: self.n_nlos() })
        }
    }

    /// Ground-truth scatterers of the NLOS paths, in scatterer-index order.
    pub fn true_scatterers(&self) -> Vec<Point2> {
        self.paths.iter().filter_map(|p| p.true_scatterer).collect()
    }

    /// Paths at the given positions, renumbered. Indices must be ascending.
    pub fn subset(&self, indices: &[usize]) -> PathSet {
        PathSet::new(indices.iter().map(|&i| self.paths[i].clone()).collect())
    }
}

/// Mirror image of `p` across the wall line.
pub fn image_reflect(p: Point2, w: &Wall) -> Point2 {
    match w.axis {
        Axis::Vertical => Point2::new(2.0 * w.offset - p.x, p.y),
        Axis::Horizontal => Point2::new(p.x, 2.0 * w.offset - p.y),
    }
}

/// Reflection point on `w` of the single-bounce path from `fe` to `ue`, if
/// both endpoints face the wall.
pub fn specular_point(fe: Point2, ue: Point2, w: &Wall) -> Option<Point2> {
    if !w.faces(&fe) || !w.faces(&ue) {
        return None;
    }
    let img = image_reflect(fe, w);
    let (a, b) = (w.coord(&img), w.coord(&ue));
    let t = (w.offset - a) / (b - a);
    let s = match w.axis {
        Axis::Vertical => Point2::new(w.offset, img.y + t * (ue.y - img.y)),
        Axis::Horizontal => Point2::new(img.x + t * (ue.x - img.x), w.offset),
    };
    Some(s)
}

/// One LOS path per FE, then one NLOS path per (FE, wall) pair with a valid
/// specular point, FE-major.
pub fn enumerate_paths(s: &Scenario, ue: Point2) -> Result<PathSet> {
    if !ue.is_finite() {
        return Err(Error::DegenerateGeometry("UE position is not finite".into()));
    }
    for (i, w) in s.walls.iter().enumerate() {
        if !w.faces(&ue) {
            return Err(Error::DegenerateGeometry(format!(
                "UE ({}, {}) is not strictly on the reflective side of wall {i}",
                ue.x, ue.y
            )));
        }
    }
    let mut paths: Vec<PathDescriptor> = Vec::with_capacity(s.fes.len() * (1 + s.walls.len()));
    for (k, fe) in s.fes.iter().enumerate() {
        if *fe == ue {
            return Err(Error::DegenerateGeometry(format!("UE coincides with FE {k}")));
        }
        paths.push(PathDescriptor::los(k));
    }
    let mut n_nlos = 0;
    for (k, fe) in s.fes.iter().enumerate() {
        for (i, w) in s.walls.iter().enumerate() {
            if let Some(sp) = specular_point(*fe, ue, w) {
                if sp == ue || sp == *fe {
                    return Err(Error::DegenerateGeometry(format!(
                        "scatterer on wall {i} coincides with an endpoint of FE {k}'s path"
                    )));
                }
                paths.push(PathDescriptor::nlos(k, n_nlos, sp, Some(i)));
                n_nlos += 1;
            }
        }
    }
    Ok(PathSet::new(paths))
}
