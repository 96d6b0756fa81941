use super::{GateLayout, Point3};
use crate::error::{Error, Result};

/// Largest tile count accepted by the dense direct solver.
pub const MAX_DENSE_TILES: usize = 20_000;

/// Largest tile count accepted by `tile_layout`; only the lattice solver can
/// handle sets between this and `MAX_DENSE_TILES`.
pub const MAX_LATTICE_TILES: usize = 1_000_000;

/// Position of every tile on a regular square grid, when the set came from one.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub pitch: f64,
    pub nx: usize,
    pub ny: usize,
    /// Grid cell (ix, iy) of each tile, in tile order.
    pub cells: Vec<(usize, usize)>,
}

/// Point-charge tiles on the gate surface (z = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct TileSet {
    centers: Vec<Point3>,
    areas: Vec<f64>,
    lattice: Option<Lattice>,
}

impl TileSet {
    /// Arbitrary tile set. Centers must lie in the surface plane.
    pub fn new(centers: Vec<Point3>, areas: Vec<f64>) -> Result<Self> {
        if centers.len() != areas.len() {
            return Err(Error::InvalidInput(format!(
                "{} centers but {} areas",
                centers.len(),
                areas.len()
            )));
        }
        if centers
            .iter()
            .any(|c| c[2] != 0.0 || !c.iter().all(|v| v.is_finite()))
        {
            return Err(Error::InvalidInput(
                "tile centers must be finite and at z = 0".into(),
            ));
        }
        if areas.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidInput("tile areas must be positive".into()));
        }
        Ok(Self {
            centers,
            areas,
            lattice: None,
        })
    }

    pub fn centers(&self) -> &[Point3] {
        &self.centers
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    /// Side length of the (square) tiles, if they are all equal.
    pub fn uniform_side(&self) -> Option<f64> {
        let a0 = *self.areas.first()?;
        self.areas.iter().all(|&a| a == a0).then(|| a0.sqrt())
    }
}

/// Square-grid tiling of the metal. The grid is anchored at the lower-left corner
/// of the bounding box and a tile is kept when its center is covered by metal.
/// Tiles are ordered row-major: by y, then by x.
pub fn tile_layout(layout: &GateLayout, tile_size: f64) -> Result<TileSet> {
    let [[x0, y0], [x1, y1]] = layout.bounding_box;
    let (w, h) = (x1 - x0, y1 - y0);
    if !(tile_size > 0.0) || tile_size > w || tile_size > h {
        return Err(Error::InvalidInput(format!(
            "tile size {tile_size} nm must be positive and fit inside the {w}×{h} nm bounding box"
        )));
    }
    let nx = (w / tile_size + 1e-9).floor() as usize;
    let ny = (h / tile_size + 1e-9).floor() as usize;
    if nx.saturating_mul(ny) > 16 * MAX_LATTICE_TILES {
        return Err(Error::TooManyTiles {
            count: nx.saturating_mul(ny),
            limit: MAX_LATTICE_TILES,
        });
    }
    let area = tile_size * tile_size;
    let mut centers = Vec::new();
    let mut cells = Vec::new();
    for iy in 0..ny {
        let y = y0 + (iy as f64 + 0.5) * tile_size;
        for ix in 0..nx {
            let x = x0 + (ix as f64 + 0.5) * tile_size;
            if layout.contains(x, y) {
                centers.push([x, y, 0.0]);
                cells.push((ix, iy));
            }
        }
    }
    if centers.is_empty() {
        return Err(Error::EmptyTiling { tile_nm: tile_size });
    }
    if centers.len() > MAX_LATTICE_TILES {
        return Err(Error::TooManyTiles {
            count: centers.len(),
            limit: MAX_LATTICE_TILES,
        });
    }
    let areas = vec![area; centers.len()];
    Ok(TileSet {
        centers,
        areas,
        lattice: Some(Lattice {
            pitch: tile_size,
            nx,
            ny,
            cells,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_splits_into_four() {
        let sq = vec![[0.0, 0.0], [100.0, 0.0], [100.0, 100.0], [0.0, 100.0]];
        let layout = GateLayout::new(vec![sq], [[0.0, 0.0], [100.0, 100.0]]).unwrap();
        let tiles = tile_layout(&layout, 50.0).unwrap();
        assert_eq!(tiles.count(), 4);
        assert_eq!(tiles.centers()[1], [75.0, 25.0, 0.0]);
        assert_eq!(tiles.uniform_side(), Some(50.0));
    }

    #[test]
    fn no_metal_is_an_error() {
        let tri = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let layout = GateLayout::new(vec![tri], [[0.0, 0.0], [100.0, 100.0]]).unwrap();
        assert!(matches!(
            tile_layout(&layout, 50.0),
            Err(Error::EmptyTiling { .. })
        ));
    }

    #[test]
    fn oversized_tile_rejected() {
        let layout = GateLayout::full_plane(50.0).unwrap();
        assert!(tile_layout(&layout, 200.0).is_err());
        assert!(tile_layout(&layout, 0.0).is_err());
    }

    #[test]
    fn overlapping_polygons_counted_once() {
        let a = vec![[0.0, 0.0], [60.0, 0.0], [60.0, 40.0], [0.0, 40.0]];
        let b = vec![[20.0, 0.0], [80.0, 0.0], [80.0, 40.0], [20.0, 40.0]];
        let layout = GateLayout::new(vec![a, b], [[0.0, 0.0], [80.0, 40.0]]).unwrap();
        assert_eq!(tile_layout(&layout, 20.0).unwrap().count(), 8);
    }
}
