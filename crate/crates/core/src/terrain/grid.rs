use serde::{Deserialize, Serialize};

/// Placement and size of a regular grid. `origin` is the world position of
/// the center of cell (0, 0); cell (col, row) covers
/// `origin + (col, row) * resolution ± resolution / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub resolution: f64,
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn new(resolution: f64, origin: [f64; 2], width: usize, height: usize) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        assert!(width >= 1 && height >= 1, "grid must have at least one cell");
        Self { resolution, origin, width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Continuous cell coordinates: integer values land on cell centers.
    #[inline]
    pub fn continuous(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin[0]) / self.resolution, (y - self.origin[1]) / self.resolution)
    }

    /// Cell containing `(x, y)`, possibly outside the grid.
    #[inline]
    pub fn cell_unbounded(&self, x: f64, y: f64) -> (isize, isize) {
        let (fx, fy) = self.continuous(x, y);
        ((fx + 0.5).floor() as isize, (fy + 0.5).floor() as isize)
    }

    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (c, r) = self.cell_unbounded(x, y);
        self.checked_cell(c, r)
    }

    #[inline]
    pub fn checked_cell(&self, col: isize, row: isize) -> Option<(usize, usize)> {
        if col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height {
            Some((col as usize, row as usize))
        } else {
            None
        }
    }

    #[inline]
    pub fn cell_center(&self, col: isize, row: isize) -> [f64; 2] {
        [self.origin[0] + col as f64 * self.resolution, self.origin[1] + row as f64 * self.resolution]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    /// World extent as `(min_x, min_y, max_x, max_y)` of the covered area.
    pub fn bounds(&self) -> [f64; 4] {
        let h = 0.5 * self.resolution;
        [
            self.origin[0] - h,
            self.origin[1] - h,
            self.origin[0] - h + self.width as f64 * self.resolution,
            self.origin[1] - h + self.height as f64 * self.resolution,
        ]
    }
}

/// Dense row-major scalar layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMap2D {
    geometry: GridGeometry,
    values: Vec<f64>,
}

impl GridMap2D {
    pub fn filled(geometry: GridGeometry, value: f64) -> Self {
        Self { values: vec![value; geometry.len()], geometry }
    }

    pub fn from_fn(geometry: GridGeometry, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(geometry.len());
        for row in 0..geometry.height {
            for col in 0..geometry.width {
                values.push(f(col, row));
            }
        }
        Self { geometry, values }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), geometry.len(), "value count does not match grid size");
        Self { geometry, values }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.geometry.index(col, row)]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        let i = self.geometry.index(col, row);
        self.values[i] = value;
    }

    /// Value of the cell containing `(x, y)`.
    pub fn value_at(&self, x: f64, y: f64) -> Option<f64> {
        self.geometry.cell_of(x, y).map(|(c, r)| self.get(c, r))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Bilinear interpolation between cell centers, clamped at the border.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let g = &self.geometry;
        let (fx, fy) = g.continuous(x, y);
        let fx = fx.clamp(0.0, (g.width - 1) as f64);
        let fy = fy.clamp(0.0, (g.height - 1) as f64);
        let c0 = (fx.floor() as usize).min(g.width.saturating_sub(2));
        let r0 = (fy.floor() as usize).min(g.height.saturating_sub(2));
        let c1 = (c0 + 1).min(g.width - 1);
        let r1 = (r0 + 1).min(g.height - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let a = self.get(c0, r0) * (1.0 - tx) + self.get(c1, r0) * tx;
        let b = self.get(c0, r1) * (1.0 - tx) + self.get(c1, r1) * tx;
        a * (1.0 - ty) + b * ty
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_lookup_covers_extent() {
        let g = GridGeometry::new(0.5, [1.0, 2.0], 4, 3);
        assert_eq!(g.cell_of(1.0, 2.0), Some((0, 0)));
        assert_eq!(g.cell_of(0.75, 1.75), Some((0, 0)));
        assert_eq!(g.cell_of(0.74, 2.0), None);
        assert_eq!(g.cell_of(2.7, 2.9), Some((3, 2)));
        let [x0, y0, x1, y1] = g.bounds();
        assert_eq!(g.cell_of(x1, y0), None);
        assert_eq!(g.cell_of(x1 - 1e-9, y1 - 1e-9), Some((3, 2)));
        assert_eq!(g.cell_of(x0, y0), Some((0, 0)));
    }

    #[test]
    fn interpolation_is_exact_on_affine_fields() {
        let g = GridGeometry::new(0.5, [0.0, 0.0], 6, 5);
        let m = GridMap2D::from_fn(g, |c, r| 2.0 * c as f64 - 0.5 * r as f64 + 1.0);
        let v = m.interpolate(1.1, 0.7);
        let expect = 2.0 * (1.1 / 0.5) - 0.5 * (0.7 / 0.5) + 1.0;
        assert!((v - expect).abs() < 1e-12);
    }
}
