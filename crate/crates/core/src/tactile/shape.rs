use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gel thickness, mm. Bounds press depth and sets the indentation falloff width.
pub const GEL_THICKNESS_MM: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Triangle,
    Square,
    Hexagon,
    Circle,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Triangle,
        ShapeKind::Square,
        ShapeKind::Hexagon,
        ShapeKind::Circle,
    ];

    /// Polygon side count; `None` for the circle.
    pub fn sides(self) -> Option<usize> {
        match self {
            ShapeKind::Triangle => Some(3),
            ShapeKind::Square => Some(4),
            ShapeKind::Hexagon => Some(6),
            ShapeKind::Circle => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Triangle => "Triangle",
            ShapeKind::Square => "Square",
            ShapeKind::Hexagon => "Hexagon",
            ShapeKind::Circle => "Circle",
        }
    }

    // Angle of the first vertex at zero rotation: triangle points up, square
    // edges are axis aligned, hexagon has a vertex on +x.
    fn base_angle(self) -> f64 {
        match self {
            ShapeKind::Triangle => -PI / 2.0,
            ShapeKind::Square => PI / 4.0,
            _ => 0.0,
        }
    }
}

/// In-plane placement of an object on the gel. Offsets are from the field center, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x_mm: f64,
    pub y_mm: f64,
    pub rotation_deg: f64,
}

impl Pose {
    pub const CENTERED: Pose = Pose {
        x_mm: 0.0,
        y_mm: 0.0,
        rotation_deg: 0.0,
    };
}

/// An object pressed into the gel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    /// Diameter of the circumscribed circle, mm.
    pub diameter_mm: f64,
    pub pose: Pose,
    pub press_depth_mm: f64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, diameter_mm: f64, pose: Pose, press_depth_mm: f64) -> Self {
        ShapeSpec {
            kind,
            diameter_mm,
            pose,
            press_depth_mm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diameter_mm > 0.0 && self.diameter_mm.is_finite()) {
            return Err(Error::domain(format!(
                "shape diameter must be positive, got {}",
                self.diameter_mm
            )));
        }
        if !(0.0..=GEL_THICKNESS_MM).contains(&self.press_depth_mm) {
            return Err(Error::domain(format!(
                "press depth {} mm outside [0, {GEL_THICKNESS_MM}] mm",
                self.press_depth_mm
            )));
        }
        if ![self.pose.x_mm, self.pose.y_mm, self.pose.rotation_deg]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::domain("pose must be finite"));
        }
        Ok(())
    }

    pub fn circumradius(&self) -> f64 {
        self.diameter_mm / 2.0
    }

    /// Polygon vertices in field coordinates (empty for a circle).
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        let Some(n) = self.kind.sides() else {
            return Vec::new();
        };
        let r = self.circumradius();
        let rot = self.pose.rotation_deg.to_radians() + self.kind.base_angle();
        (0..n)
            .map(|i| {
                let a = rot + TAU * i as f64 / n as f64;
                (self.pose.x_mm + r * a.cos(), self.pose.y_mm + r * a.sin())
            })
            .collect()
    }

    /// Exact footprint area, mm².
    pub fn area(&self) -> f64 {
        let r = self.circumradius();
        match self.kind.sides() {
            None => PI * r * r,
            Some(n) => 0.5 * n as f64 * r * r * (TAU / n as f64).sin(),
        }
    }

    /// Largest |x| and |y| offsets of the footprint from the field center.
    pub fn extent(&self) -> (f64, f64) {
        if self.kind == ShapeKind::Circle {
            let r = self.circumradius();
            return (self.pose.x_mm.abs() + r, self.pose.y_mm.abs() + r);
        }
        self.vertices()
            .iter()
            .fold((0.0f64, 0.0f64), |(ex, ey), &(x, y)| {
                (ex.max(x.abs()), ey.max(y.abs()))
            })
    }

    /// Signed distance to the footprint boundary, negative inside, mm.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.pose.x_mm, y - self.pose.y_mm);
        if self.kind == ShapeKind::Circle {
            return dx.hypot(dy) - self.circumradius();
        }
        let verts = self.vertices();
        let n = verts.len();
        let mut dist = f64::INFINITY;
        let mut inside = true;
        for i in 0..n {
            let (ax, ay) = verts[i];
            let (bx, by) = verts[(i + 1) % n];
            let (ex, ey) = (bx - ax, by - ay);
            let (px, py) = (x - ax, y - ay);
            let t = ((px * ex + py * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
            dist = dist.min((px - t * ex).hypot(py - t * ey));
            // Vertices run counter-clockwise in (x, y); inside is to the left.
            if ex * py - ey * px < 0.0 {
                inside = false;
            }
        }
        if inside {
            -dist
        } else {
            dist
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.signed_distance(x, y) <= 0.0
    }
}
