use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PhysicalConstants;
use crate::error::{Error, Result};
use crate::units::{DEFAULT_DEPTH_NM, GAAS_PERMITTIVITY};

fn default_depth() -> f64 {
    DEFAULT_DEPTH_NM
}

fn default_permittivity() -> f64 {
    GAAS_PERMITTIVITY
}

/// Metal-covered surface regions of a device, in nm.
///
/// Overlapping polygons are merged: a point is metal if any polygon contains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateLayout {
    pub polygons: Vec<Vec<[f64; 2]>>,
    pub bounding_box: [[f64; 2]; 2],
    #[serde(default = "default_depth")]
    pub depth_nm: f64,
    #[serde(default = "default_permittivity")]
    pub rel_permittivity: f64,
}

fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<[f64; 2]> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

impl GateLayout {
    pub fn new(polygons: Vec<Vec<[f64; 2]>>, bounding_box: [[f64; 2]; 2]) -> Result<Self> {
        let layout = Self {
            polygons,
            bounding_box,
            depth_nm: DEFAULT_DEPTH_NM,
            rel_permittivity: GAAS_PERMITTIVITY,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Approximation of a linear-array device: a wall gate below the dot row,
    /// 40 nm plunger fingers above every dot, 40 nm barrier fingers between dots,
    /// and a large sensor block at each end. The dots sit at
    /// `x_k = (k − (n−1)/2)·spacing`, `y = 0`. The box extends 1.5 µm beyond the
    /// outermost dots.
    pub fn paper_like(n_dots: usize, spacing: f64) -> Result<Self> {
        if n_dots == 0 || !(spacing > 0.0) {
            return Err(Error::InvalidInput(
                "paper-like layout needs at least one dot and positive spacing".into(),
            ));
        }
        let xs = dot_positions(n_dots, spacing);
        let (first, last) = (xs[0], xs[n_dots - 1]);
        let half_finger = 20.0;
        let mut polygons = vec![rect(first - 240.0, last + 240.0, -260.0, -70.0)];
        for &x in &xs {
            polygons.push(rect(x - half_finger, x + half_finger, 50.0, 1000.0));
        }
        for k in 0..=n_dots {
            let xb = first - spacing / 2.0 + k as f64 * spacing;
            polygons.push(rect(xb - half_finger, xb + half_finger, 10.0, 1000.0));
        }
        polygons.push(rect(last + 240.0, last + 640.0, -260.0, 400.0));
        polygons.push(rect(first - 640.0, first - 240.0, -260.0, 400.0));
        Self::new(
            polygons,
            [[first - 1500.0, -1500.0], [last + 1500.0, 1500.0]],
        )
    }

    /// A square plate of half-width `half_extent` centred at the origin; the
    /// finite stand-in for a fully metallised surface.
    pub fn full_plane(half_extent: f64) -> Result<Self> {
        let h = half_extent;
        Self::new(vec![rect(-h, h, -h, h)], [[-h, -h], [h, h]])
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let layout: Self = serde_json::from_str(s)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn constants(&self) -> Result<PhysicalConstants> {
        PhysicalConstants::new(self.rel_permittivity, self.depth_nm)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let shift = |p: &[f64; 2]| [p[0] + dx, p[1] + dy];
        Self {
            polygons: self
                .polygons
                .iter()
                .map(|poly| poly.iter().map(shift).collect())
                .collect(),
            bounding_box: [shift(&self.bounding_box[0]), shift(&self.bounding_box[1])],
            depth_nm: self.depth_nm,
            rel_permittivity: self.rel_permittivity,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.polygons.iter().any(|p| polygon_contains(p, x, y))
    }

    pub fn validate(&self) -> Result<()> {
        let [[x0, y0], [x1, y1]] = self.bounding_box;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidInput(
                "bounding_box must be [[xmin, ymin], [xmax, ymax]] with positive extent".into(),
            ));
        }
        PhysicalConstants::new(self.rel_permittivity, self.depth_nm)?;
        for (k, poly) in self.polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "polygon {k} has {} vertices, need at least 3",
                    poly.len()
                )));
            }
            if poly.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "polygon {k} has non-finite vertices"
                )));
            }
            if poly
                .iter()
                .any(|&[x, y]| x < x0 || x > x1 || y < y0 || y > y1)
            {
                return Err(Error::InvalidInput(format!(
                    "polygon {k} extends outside the bounding box"
                )));
            }
            if signed_area(poly).abs() == 0.0 {
                return Err(Error::InvalidInput(format!("polygon {k} has zero area")));
            }
            if !is_simple(poly) {
                return Err(Error::InvalidInput(format!(
                    "polygon {k} is self-intersecting"
                )));
            }
        }
        Ok(())
    }
}

/// Lateral dot positions of a uniform array centred at the origin.
pub fn dot_positions(n: usize, spacing: f64) -> Vec<f64> {
    (0..n)
        .map(|k| (k as f64 - (n as f64 - 1.0) / 2.0) * spacing)
        .collect()
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let [ax, ay] = poly[i];
            let [bx, by] = poly[(i + 1) % n];
            ax * by - bx * ay
        })
        .sum::<f64>()
        / 2.0
}

// Crossing-number test; edges are half-open so shared edges are counted once.
fn polygon_contains(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > y) != (yj > y) {
            let xc = xi + (y - yi) * (xj - xi) / (yj - yi);
            if x < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            // skip edges sharing a vertex with edge i
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip() {
        let l = GateLayout::paper_like(6, 160.0).unwrap();
        let back = GateLayout::from_json_str(&l.to_json().unwrap()).unwrap();
        assert_eq!(l, back);
    }

    #[test]
    fn defaults_filled_and_unknown_keys_rejected() {
        let s = r#"{"polygons": [[[0,0],[10,0],[10,10]]], "bounding_box": [[0,0],[10,10]]}"#;
        let l = GateLayout::from_json_str(s).unwrap();
        assert_eq!(l.depth_nm, 90.0);
        assert_eq!(l.rel_permittivity, 12.9);
        let bad = r#"{"polygons": [], "bounding_box": [[0,0],[1,1]], "colour": 3}"#;
        assert!(GateLayout::from_json_str(bad).is_err());
    }

    #[test]
    fn bowtie_rejected() {
        let bow = vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]];
        assert!(GateLayout::new(vec![bow], [[0.0, 0.0], [10.0, 10.0]]).is_err());
    }

    #[test]
    fn polygon_outside_box_rejected() {
        let tri = vec![[0.0, 0.0], [20.0, 0.0], [0.0, 5.0]];
        assert!(GateLayout::new(vec![tri], [[0.0, 0.0], [10.0, 10.0]]).is_err());
    }

    #[test]
    fn containment_of_l_shape() {
        let l_shape = vec![
            [0.0, 0.0],
            [20.0, 0.0],
            [20.0, 10.0],
            [10.0, 10.0],
            [10.0, 20.0],
            [0.0, 20.0],
        ];
        let layout = GateLayout::new(vec![l_shape], [[0.0, 0.0], [20.0, 20.0]]).unwrap();
        assert!(layout.contains(5.0, 15.0));
        assert!(layout.contains(15.0, 5.0));
        assert!(!layout.contains(15.0, 15.0));
    }
}
