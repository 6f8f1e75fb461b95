//! Regular grid of 2D correction vectors over the projector image plane.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

/// Which components of the correction vectors were observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionCoverage {
    /// Both fringe directions were measured; `dx` and `dy` are estimated.
    #[serde(rename = "xy")]
    Both,
    /// Only vertical fringes were measured; `dy` is fixed at zero.
    #[serde(rename = "x")]
    XOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionGrid {
    spacing: f64,
    origin: Point2<f64>,
    nx: usize,
    ny: usize,
    values: Vec<Vector2<f64>>,
    support: Vec<u32>,
    extrapolated: Vec<bool>,
    coverage: DirectionCoverage,
}

/// A correction sample: `d = ideal - measured` observed at `ideal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub ideal: Point2<f64>,
    pub d: Vector2<f64>,
}

impl DistortionGrid {
    /// Zero grid whose nodes start at the origin.
    pub fn zeros(spacing: f64, nx: usize, ny: usize) -> Self {
        let n = nx * ny;
        Self {
            spacing,
            origin: Point2::origin(),
            nx,
            ny,
            values: vec![Vector2::zeros(); n],
            support: vec![0; n],
            extrapolated: vec![false; n],
            coverage: DirectionCoverage::Both,
        }
    }

    /// Assembles a grid from stored parts. Returns a message on inconsistent sizes.
    pub fn from_parts(
        spacing: f64,
        origin: Point2<f64>,
        nx: usize,
        ny: usize,
        values: Vec<Vector2<f64>>,
        support: Vec<u32>,
        extrapolated: Vec<bool>,
        coverage: DirectionCoverage,
    ) -> Result<Self, String> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(format!("grid spacing must be positive, got {spacing}"));
        }
        if nx < 2 || ny < 2 {
            return Err(format!("grid needs at least 2x2 nodes, got {nx}x{ny}"));
        }
        let n = nx
            .checked_mul(ny)
            .ok_or_else(|| "grid dimensions overflow".to_string())?;
        if values.len() != n || support.len() != n || extrapolated.len() != n {
            return Err(format!(
                "grid arrays must hold {n} entries (values {}, support {}, extrapolated {})",
                values.len(),
                support.len(),
                extrapolated.len()
            ));
        }
        if !origin.x.is_finite() || !origin.y.is_finite() {
            return Err("non-finite grid origin".into());
        }
        if values.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err("non-finite grid value".into());
        }
        Ok(Self {
            spacing,
            origin,
            nx,
            ny,
            values,
            support,
            extrapolated,
            coverage,
        })
    }

    /// Grid over a `width x height` image whose nodes sample `f`.
    pub fn from_fn(
        spacing: f64,
        width: usize,
        height: usize,
        f: impl Fn(&Point2<f64>) -> Vector2<f64>,
    ) -> Self {
        let (nx, ny) = Self::node_counts(spacing, width, height);
        let mut g = Self::zeros(spacing, nx, ny);
        for j in 0..ny {
            for i in 0..nx {
                g.values[j * nx + i] = f(&g.node_position(i, j));
                g.support[j * nx + i] = 1;
            }
        }
        g
    }

    /// Node count needed to cover a `width x height` image with the given spacing.
    pub fn node_counts(spacing: f64, width: usize, height: usize) -> (usize, usize) {
        let nx = ((width as f64 / spacing).ceil() as usize + 1).max(2);
        let ny = ((height as f64 / spacing).ceil() as usize + 1).max(2);
        (nx, ny)
    }

    /// Averages residual samples onto the nodes with bilinear weights, then
    /// fills unsupported nodes from the nearest supported node.
    ///
    /// Returns `None` when no sample touches the grid.
    pub fn from_residuals(
        residuals: &[Residual],
        spacing: f64,
        width: usize,
        height: usize,
        coverage: DirectionCoverage,
    ) -> Option<Self> {
        let (nx, ny) = Self::node_counts(spacing, width, height);
        let mut grid = Self::zeros(spacing, nx, ny);
        grid.coverage = coverage;
        let mut weight_sum = vec![0.0; nx * ny];
        let mut accum = vec![Vector2::zeros(); nx * ny];
        for r in residuals {
            let Some((i0, j0, fx, fy)) = grid.cell(&r.ideal, false) else {
                continue;
            };
            let d = match coverage {
                DirectionCoverage::Both => r.d,
                DirectionCoverage::XOnly => Vector2::new(r.d.x, 0.0),
            };
            for (di, dj, w) in [
                (0, 0, (1.0 - fx) * (1.0 - fy)),
                (1, 0, fx * (1.0 - fy)),
                (0, 1, (1.0 - fx) * fy),
                (1, 1, fx * fy),
            ] {
                if w <= 0.0 {
                    continue;
                }
                let k = (j0 + dj) * nx + i0 + di;
                weight_sum[k] += w;
                accum[k] += d * w;
                grid.support[k] += 1;
            }
        }
        let supported: Vec<(usize, usize)> = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .filter(|&(i, j)| weight_sum[j * nx + i] > 0.0)
            .collect();
        if supported.is_empty() {
            return None;
        }
        for &(i, j) in &supported {
            let k = j * nx + i;
            grid.values[k] = accum[k] / weight_sum[k];
        }
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if weight_sum[k] > 0.0 {
                    continue;
                }
                // Nearest supported node; ties resolved by scan order.
                let (si, sj) = *supported
                    .iter()
                    .min_by_key(|&&(si, sj)| {
                        let di = si as i64 - i as i64;
                        let dj = sj as i64 - j as i64;
                        di * di + dj * dj
                    })
                    .expect("nonempty");
                grid.values[k] = grid.values[sj * nx + si];
                grid.extrapolated[k] = true;
            }
        }
        Some(grid)
    }

    /// Cell index and fractional offsets. With `clamp`, points outside the
    /// grid use the nearest border cell.
    fn cell(&self, p: &Point2<f64>, clamp: bool) -> Option<(usize, usize, f64, f64)> {
        let gx = (p.x - self.origin.x) / self.spacing;
        let gy = (p.y - self.origin.y) / self.spacing;
        if !gx.is_finite() || !gy.is_finite() {
            return None;
        }
        let max_x = (self.nx - 1) as f64;
        let max_y = (self.ny - 1) as f64;
        let (gx, gy) = if clamp {
            (gx.clamp(0.0, max_x), gy.clamp(0.0, max_y))
        } else if gx < 0.0 || gy < 0.0 || gx > max_x || gy > max_y {
            return None;
        } else {
            (gx, gy)
        };
        let i0 = (gx.floor() as usize).min(self.nx - 2);
        let j0 = (gy.floor() as usize).min(self.ny - 2);
        Some((i0, j0, gx - i0 as f64, gy - j0 as f64))
    }

    /// Bilinear interpolation; outside the grid the border value is held.
    pub fn sample(&self, p: &Point2<f64>) -> Vector2<f64> {
        let Some((i0, j0, fx, fy)) = self.cell(p, true) else {
            return Vector2::zeros();
        };
        let v = |i: usize, j: usize| self.values[j * self.nx + i];
        let top = v(i0, j0) * (1.0 - fx) + v(i0 + 1, j0) * fx;
        let bottom = v(i0, j0 + 1) * (1.0 - fx) + v(i0 + 1, j0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Node-wise sum, used to fold an incremental correction into an installed grid.
    pub fn accumulate(&self, increment: &DistortionGrid) -> DistortionGrid {
        let mut out = self.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = self.node_position(i, j);
                out.values[j * self.nx + i] += increment.sample(&p);
            }
        }
        out
    }

    pub fn node_position(&self, i: usize, j: usize) -> Point2<f64> {
        Point2::new(
            self.origin.x + i as f64 * self.spacing,
            self.origin.y + j as f64 * self.spacing,
        )
    }

    pub fn node(&self, i: usize, j: usize) -> Vector2<f64> {
        self.values[j * self.nx + i]
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Point2<f64> {
        self.origin
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[Vector2<f64>] {
        &self.values
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn extrapolated(&self) -> &[bool] {
        &self.extrapolated
    }

    pub fn coverage(&self) -> DirectionCoverage {
        self.coverage
    }

    /// Largest vector magnitude over supported nodes.
    pub fn max_supported_magnitude(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.support)
            .filter(|(_, &s)| s > 0)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    }
}
