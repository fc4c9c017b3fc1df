//! Structured rectangular grid with per-cell region labels.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Air,
    /// Conducting, magnetic core.
    Core,
    /// Winding carrying the source current in +z.
    CoilPlus,
    /// Return winding, current in −z.
    CoilMinus,
}

impl Region {
    /// Winding polarity: +1, −1, or 0 outside the coils.
    pub fn polarity(self) -> f64 {
        match self {
            Region::CoilPlus => 1.0,
            Region::CoilMinus => -1.0,
            _ => 0.0,
        }
    }
}

/// Half-open rectangle of cells `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CellRect {
    pub const fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, cx: usize, cy: usize) -> bool {
        (self.x0..self.x1).contains(&cx) && (self.y0..self.y1).contains(&cy)
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }
}

/// `nx × ny` cells of size `hx × hy`. The outer boundary carries a
/// homogeneous Dirichlet condition, so the unknowns are the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    regions: Vec<Region>,
}

impl Grid2D {
    /// An all-air grid.
    pub fn uniform(nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!("cell counts must be >= 1, got {nx}x{ny}")));
        }
        if !(hx > 0.0 && hx.is_finite() && hy > 0.0 && hy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell sizes must be positive, got {hx}x{hy}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            regions: vec![Region::Air; nx * ny],
        })
    }

    /// Labels every cell in `rect`. The rectangle must lie inside the grid.
    pub fn paint(&mut self, rect: CellRect, region: Region) -> Result<()> {
        if rect.x1 > self.nx || rect.y1 > self.ny || rect.is_empty() {
            return Err(Error::InvalidGrid(format!(
                "rectangle {rect:?} is empty or outside the {}x{} grid",
                self.nx, self.ny
            )));
        }
        for cy in rect.y0..rect.y1 {
            for cx in rect.x0..rect.x1 {
                self.regions[cy * self.nx + cx] = region;
            }
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn region(&self, cx: usize, cy: usize) -> Region {
        self.regions[cy * self.nx + cx]
    }

    pub fn count(&self, region: Region) -> usize {
        self.regions.iter().filter(|&&r| r == region).count()
    }

    /// Number of interior nodes, i.e. degrees of freedom.
    pub fn n_dof(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    /// Degree-of-freedom index of node `(i, j)`, `None` on the boundary.
    pub fn dof(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || i >= self.nx || j >= self.ny {
            None
        } else {
            Some((j - 1) * (self.nx - 1) + (i - 1))
        }
    }

    /// Node `(i, j)` of a degree of freedom.
    pub fn node(&self, dof: usize) -> (usize, usize) {
        (dof % (self.nx - 1) + 1, dof / (self.nx - 1) + 1)
    }

    /// Cells sharing node `(i, j)`; boundary nodes have fewer than four.
    pub fn cells_around(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let xs = [i.checked_sub(1), (i < self.nx).then_some(i)];
        let ys = [j.checked_sub(1), (j < self.ny).then_some(j)];
        ys.into_iter()
            .flatten()
            .flat_map(move |cy| xs.into_iter().flatten().map(move |cx| (cx, cy)))
    }
}

/// Cell rectangles of a single-window transformer surrogate: a rectangular
/// core frame with two coil blocks of opposite polarity inside its window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformerLayout {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    pub core_outer: CellRect,
    pub core_window: CellRect,
    pub coil_plus: CellRect,
    pub coil_minus: CellRect,
}

impl Default for TransformerLayout {
    fn default() -> Self {
        Self {
            nx: 16,
            ny: 16,
            width: 0.16,
            height: 0.16,
            core_outer: CellRect::new(1, 2, 15, 14),
            core_window: CellRect::new(4, 5, 12, 11),
            coil_plus: CellRect::new(5, 6, 7, 10),
            coil_minus: CellRect::new(9, 6, 11, 10),
        }
    }
}

impl TransformerLayout {
    pub fn build(&self) -> Result<Grid2D> {
        let mut grid = Grid2D::uniform(
            self.nx,
            self.ny,
            self.width / self.nx as f64,
            self.height / self.ny as f64,
        )?;
        let inside = |inner: &CellRect, outer: &CellRect| {
            inner.x0 >= outer.x0 && inner.x1 <= outer.x1 && inner.y0 >= outer.y0 && inner.y1 <= outer.y1
        };
        if !inside(&self.core_window, &self.core_outer) {
            return Err(Error::InvalidGrid("core window must lie inside the core".into()));
        }
        for coil in [&self.coil_plus, &self.coil_minus] {
            if !inside(coil, &self.core_window) {
                return Err(Error::InvalidGrid(format!(
                    "coil {coil:?} must lie inside the core window"
                )));
            }
        }
        grid.paint(self.core_outer, Region::Core)?;
        grid.paint(self.core_window, Region::Air)?;
        grid.paint(self.coil_plus, Region::CoilPlus)?;
        grid.paint(self.coil_minus, Region::CoilMinus)?;
        Ok(grid)
    }
}
