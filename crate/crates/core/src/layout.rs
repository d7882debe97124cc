//! Lightboard layouts: the target arrangements a session can be played on.
//!
//! The canonical coordinates live in the versioned JSON files under `layouts/`
//! and are compiled into the crate. The board spans 1.2 m x 1.2 m around its
//! center.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Position3;

/// Version of the shipped layout table. Bump whenever a coordinate changes.
pub const LAYOUT_TABLE_VERSION: u32 = 1;

/// Minimum center-to-center spacing at scale 1.0, in meters.
pub const MIN_SPACING_M: f64 = 0.08;

/// Largest allowed |x| or |y| of any target, after scaling.
pub const MAX_EXTENT_M: f64 = 2.0;

pub const MIN_SCALE_FACTOR: f64 = 0.5;

const SPACING_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("unknown layout `{0}`")]
    UnknownLayout(String),
    #[error("targets {a} and {b} are {spacing:.4} m apart, minimum is {required:.4} m")]
    LayoutTooDense {
        a: usize,
        b: usize,
        spacing: f64,
        required: f64,
    },
    #[error("scale factor {0} is below the minimum of {MIN_SCALE_FACTOR}")]
    InvalidScale(f64),
    #[error("target {index} lies outside the board ({x}, {y})")]
    OutOfBounds { index: usize, x: f64, y: f64 },
    #[error("target {0} is not in the z = 0 plane or is not finite")]
    BadPosition(usize),
    #[error("layout `{name}` must have {expected} targets, found {found}")]
    WrongTargetCount {
        name: LayoutName,
        expected: usize,
        found: usize,
    },
    #[error("malformed layout file: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutName {
    Classic12,
    Grid3x3,
    SmallCircle,
    LargeCircle,
    FourCorner,
    Border,
}

impl LayoutName {
    pub const ALL: [LayoutName; 6] = [
        LayoutName::Classic12,
        LayoutName::Grid3x3,
        LayoutName::SmallCircle,
        LayoutName::LargeCircle,
        LayoutName::FourCorner,
        LayoutName::Border,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayoutName::Classic12 => "classic12",
            LayoutName::Grid3x3 => "grid3x3",
            LayoutName::SmallCircle => "small_circle",
            LayoutName::LargeCircle => "large_circle",
            LayoutName::FourCorner => "four_corner",
            LayoutName::Border => "border",
        }
    }

    /// Number of targets every layout carrying this name must have.
    pub fn target_count(self) -> usize {
        match self {
            LayoutName::Classic12 => 12,
            LayoutName::Grid3x3 => 9,
            LayoutName::SmallCircle => 8,
            LayoutName::LargeCircle => 12,
            LayoutName::FourCorner => 4,
            LayoutName::Border => 12,
        }
    }

    fn table_json(self) -> &'static str {
        match self {
            LayoutName::Classic12 => include_str!("../layouts/classic12.json"),
            LayoutName::Grid3x3 => include_str!("../layouts/grid3x3.json"),
            LayoutName::SmallCircle => include_str!("../layouts/small_circle.json"),
            LayoutName::LargeCircle => include_str!("../layouts/large_circle.json"),
            LayoutName::FourCorner => include_str!("../layouts/four_corner.json"),
            LayoutName::Border => include_str!("../layouts/border.json"),
        }
    }
}

impl fmt::Display for LayoutName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayoutName {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayoutName::ALL
            .into_iter()
            .find(|name| name.as_str() == s)
            .ok_or_else(|| LayoutError::UnknownLayout(s.to_owned()))
    }
}

/// Index of a target within its layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetId(pub u32);

impl TargetId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TargetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A validated arrangement of targets.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutSpec {
    name: LayoutName,
    targets: Vec<Position3>,
    scale_factor: f64,
}

/// On-disk layout file: `{"name": str, "targets": [{"x", "y", "z"}, ...]}`,
/// plus `scale_factor` when it is not 1.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    name: String,
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit_scale")]
    scale_factor: f64,
    targets: Vec<Position3>,
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit_scale(f: &f64) -> bool {
    *f == 1.0
}

impl LayoutSpec {
    /// Builds a layout, checking target count, planarity, extent and spacing.
    pub fn new(
        name: LayoutName,
        targets: Vec<Position3>,
        scale_factor: f64,
    ) -> Result<Self, LayoutError> {
        if !(scale_factor >= MIN_SCALE_FACTOR) || !scale_factor.is_finite() {
            return Err(LayoutError::InvalidScale(scale_factor));
        }
        if targets.len() != name.target_count() {
            return Err(LayoutError::WrongTargetCount {
                name,
                expected: name.target_count(),
                found: targets.len(),
            });
        }
        for (index, p) in targets.iter().enumerate() {
            if !p.is_finite() || p.z != 0.0 {
                return Err(LayoutError::BadPosition(index));
            }
            if p.x.abs() > MAX_EXTENT_M || p.y.abs() > MAX_EXTENT_M {
                return Err(LayoutError::OutOfBounds { index, x: p.x, y: p.y });
            }
        }
        let required = MIN_SPACING_M * scale_factor;
        for a in 0..targets.len() {
            for b in a + 1..targets.len() {
                let spacing = targets[a].distance(targets[b]);
                if spacing < required - SPACING_EPS {
                    return Err(LayoutError::LayoutTooDense {
                        a,
                        b,
                        spacing,
                        required,
                    });
                }
            }
        }
        Ok(Self {
            name,
            targets,
            scale_factor,
        })
    }

    /// Parses a layout file. The result has scale factor 1.0.
    pub fn from_json(bytes: &[u8]) -> Result<Self, LayoutError> {
        let file: LayoutFile = serde_json::from_slice(bytes)?;
        let name = file.name.parse()?;
        Self::new(name, file.targets, file.scale_factor)
    }

    pub fn to_json(&self) -> String {
        let file = LayoutFile {
            name: self.name.as_str().to_owned(),
            scale_factor: self.scale_factor,
            targets: self.targets.clone(),
        };
        serde_json::to_string_pretty(&file).expect("layout serializes") + "\n"
    }

    pub fn name(&self) -> LayoutName {
        self.name
    }

    pub fn targets(&self) -> &[Position3] {
        &self.targets
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn position(&self, id: TargetId) -> Option<Position3> {
        self.targets.get(id.index()).copied()
    }

    pub fn contains(&self, id: TargetId) -> bool {
        id.index() < self.targets.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = TargetId> + '_ {
        (0..self.targets.len() as u32).map(TargetId)
    }

    /// Smallest pairwise distance between targets.
    pub fn min_spacing(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.targets.iter().enumerate() {
            for b in &self.targets[i + 1..] {
                best = best.min(a.distance(*b));
            }
        }
        best
    }
}

/// The canonical built-in layout with scale factor 1.0.
pub fn layout(name: LayoutName) -> LayoutSpec {
    LayoutSpec::from_json(name.table_json().as_bytes())
        .unwrap_or_else(|e| panic!("shipped layout table `{name}` is invalid: {e}"))
}

/// Looks a built-in layout up by its string name.
pub fn layout_by_name(name: &str) -> Result<LayoutSpec, LayoutError> {
    Ok(layout(name.parse()?))
}

/// Multiplies every target's x and y by `factor`.
pub fn scale_layout(spec: &LayoutSpec, factor: f64) -> Result<LayoutSpec, LayoutError> {
    if !(factor >= MIN_SCALE_FACTOR) || !factor.is_finite() {
        return Err(LayoutError::InvalidScale(factor));
    }
    let targets = spec
        .targets
        .iter()
        .map(|p| Position3::new(p.x * factor, p.y * factor, p.z))
        .collect();
    LayoutSpec::new(spec.name, targets, spec.scale_factor * factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_counts() {
        assert_eq!(layout(LayoutName::Classic12).len(), 12);
        assert_eq!(layout(LayoutName::Grid3x3).len(), 9);
        assert_eq!(layout(LayoutName::FourCorner).len(), 4);
        assert_eq!(layout(LayoutName::Border).len(), 12);
        assert_eq!(layout(LayoutName::SmallCircle).len(), 8);
        assert_eq!(layout(LayoutName::LargeCircle).len(), 12);
    }

    #[test]
    fn builtins_are_planar_and_spaced() {
        for name in LayoutName::ALL {
            let spec = layout(name);
            assert_eq!(spec.scale_factor(), 1.0);
            assert!(spec.targets().iter().all(|p| p.z == 0.0), "{name}");
            assert!(spec.min_spacing() >= MIN_SPACING_M, "{name}");
            assert!(
                spec.targets().iter().all(|p| p.x.abs() <= 0.6 && p.y.abs() <= 0.6),
                "{name} leaves the 1.2 m board"
            );
        }
    }

    #[test]
    fn grid_is_three_by_three() {
        let spec = layout(LayoutName::Grid3x3);
        let mut xs: Vec<f64> = spec.targets().iter().map(|p| p.x).collect();
        let mut ys: Vec<f64> = spec.targets().iter().map(|p| p.y).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        assert_eq!(xs.len(), 3);
        assert_eq!(ys.len(), 3);
    }

    #[test]
    fn four_corner_has_one_target_per_quadrant() {
        let spec = layout(LayoutName::FourCorner);
        let mut quadrants: Vec<(bool, bool)> =
            spec.targets().iter().map(|p| (p.x > 0.0, p.y > 0.0)).collect();
        quadrants.sort();
        quadrants.dedup();
        assert_eq!(quadrants.len(), 4);
    }

    #[test]
    fn circle_radii() {
        for (name, r) in [(LayoutName::SmallCircle, 0.35), (LayoutName::LargeCircle, 0.55)] {
            for p in layout(name).targets() {
                assert!((p.norm() - r).abs() < 1e-6, "{name}: {}", p.norm());
            }
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            layout_by_name("hexagon"),
            Err(LayoutError::UnknownLayout(n)) if n == "hexagon"
        ));
        assert_eq!(layout_by_name("grid3x3").unwrap().name(), LayoutName::Grid3x3);
    }

    #[test]
    fn scale_identity() {
        for name in LayoutName::ALL {
            let spec = layout(name);
            assert_eq!(scale_layout(&spec, 1.0).unwrap(), spec);
        }
    }

    #[test]
    fn scale_multiplies_pairwise_distances() {
        let spec = layout(LayoutName::Classic12);
        let scaled = scale_layout(&spec, 1.5).unwrap();
        assert_eq!(scaled.scale_factor(), 1.5);
        for i in 0..spec.len() {
            for j in i + 1..spec.len() {
                let d0 = spec.targets()[i].distance(spec.targets()[j]);
                let d1 = scaled.targets()[i].distance(scaled.targets()[j]);
                assert!((d1 - 1.5 * d0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scale_matches_per_target_loop() {
        let spec = layout(LayoutName::Grid3x3);
        let scaled = scale_layout(&spec, 2.0).unwrap();
        let mut expected = Vec::new();
        for p in spec.targets() {
            expected.push((p.x * 2.0, p.y * 2.0, p.z));
        }
        let got: Vec<_> = scaled.targets().iter().map(|p| (p.x, p.y, p.z)).collect();
        assert_eq!(got, expected);
        let max_x = |s: &LayoutSpec| s.targets().iter().map(|p| p.x.abs()).fold(0.0, f64::max);
        assert_eq!(max_x(&scaled), 2.0 * max_x(&spec));
    }

    #[test]
    fn scale_rejects_small_factor_and_overflow() {
        let spec = layout(LayoutName::FourCorner);
        assert!(matches!(scale_layout(&spec, 0.4), Err(LayoutError::InvalidScale(_))));
        let half = scale_layout(&spec, 0.5).unwrap();
        assert!(matches!(scale_layout(&half, 0.5), Err(LayoutError::InvalidScale(_))));
        assert!(matches!(
            scale_layout(&spec, 5.0),
            Err(LayoutError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn dense_layout_rejected() {
        let mut targets = layout(LayoutName::FourCorner).targets().to_vec();
        targets[1] = Position3::new(targets[0].x + 0.05, targets[0].y, 0.0);
        assert!(matches!(
            LayoutSpec::new(LayoutName::FourCorner, targets, 1.0),
            Err(LayoutError::LayoutTooDense { a: 0, b: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let spec = layout(LayoutName::Border);
        let again = LayoutSpec::from_json(spec.to_json().as_bytes()).unwrap();
        assert_eq!(again, spec);
        assert!(matches!(
            LayoutSpec::from_json(br#"{"name": "border", "targets": ["#),
            Err(LayoutError::Parse(_))
        ));
        assert!(matches!(
            LayoutSpec::from_json(br#"{"name": "grid3x3", "targets": []}"#),
            Err(LayoutError::WrongTargetCount { expected: 9, found: 0, .. })
        ));
    }
}
