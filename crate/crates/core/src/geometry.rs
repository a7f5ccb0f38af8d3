//! Room geometry: a box of voxels with optional blocked (furniture) cells.
//!
//! Axes are `x` along the room length, `y` along the width and `z` up.
//! Voxel `(i, j, k)` spans `[i·cell, (i+1)·cell)` on each axis and its
//! center sits at `(i + ½)·cell`.

use serde::{Deserialize, Serialize};

use crate::field::FieldError;

/// A point or vector in room coordinates, meters.
pub type Point3 = [f64; 3];

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

/// Normalizes `v`, or returns `None` for a zero or non-finite vector.
pub fn normalize(v: Point3) -> Option<Point3> {
    let n = norm(v);
    if !n.is_finite() || n < 1e-12 {
        return None;
    }
    Some([v[0] / n, v[1] / n, v[2] / n])
}

/// An axis-aligned box in meters, used to describe furniture and partitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub min: Point3,
    pub max: Point3,
}

impl BoxRegion {
    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomGeometry {
    dims_m: Point3,
    cell_m: f64,
    counts: [usize; 3],
    blocked: Vec<bool>,
}

impl RoomGeometry {
    pub fn new(dims_m: Point3, cell_m: f64) -> Result<Self, FieldError> {
        if !(cell_m.is_finite() && cell_m > 0.0) {
            return Err(FieldError::InvalidGeometry(format!(
                "cell size must be positive, got {cell_m}"
            )));
        }
        let mut counts = [0usize; 3];
        for axis in 0..3 {
            let d = dims_m[axis];
            if !(d.is_finite() && d > 0.0) {
                return Err(FieldError::InvalidGeometry(format!(
                    "room dimension {axis} must be positive, got {d}"
                )));
            }
            // Tolerate 3.0 / 0.5 landing a hair above 6.
            let n = (d / cell_m - 1e-9).ceil() as usize;
            if n < 2 {
                return Err(FieldError::InvalidGeometry(format!(
                    "axis {axis} needs at least 2 voxels, got {n} ({d} m / {cell_m} m)"
                )));
            }
            counts[axis] = n;
        }
        let len = counts[0] * counts[1] * counts[2];
        Ok(Self {
            dims_m,
            cell_m,
            counts,
            blocked: vec![false; len],
        })
    }

    /// Marks voxels by index. Indices outside the grid are rejected.
    pub fn with_blocked(mut self, voxels: impl IntoIterator<Item = [usize; 3]>) -> Result<Self, FieldError> {
        for v in voxels {
            if (0..3).any(|a| v[a] >= self.counts[a]) {
                return Err(FieldError::InvalidGeometry(format!(
                    "blocked voxel {v:?} outside grid {:?}",
                    self.counts
                )));
            }
            let idx = self.index(v[0], v[1], v[2]);
            self.blocked[idx] = true;
        }
        Ok(self)
    }

    /// Blocks every voxel whose center lies inside `region`.
    pub fn block_region(&mut self, region: &BoxRegion) {
        for idx in 0..self.len() {
            if region.contains(self.center_of(idx)) {
                self.blocked[idx] = true;
            }
        }
    }

    pub fn dims_m(&self) -> Point3 {
        self.dims_m
    }

    pub fn cell_m(&self) -> f64 {
        self.cell_m
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_m * self.cell_m * self.cell_m
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.counts[1] + j) * self.counts[0] + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.counts[0];
        let ny = self.counts[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3 {
        let h = self.cell_m;
        [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h]
    }

    pub fn center_of(&self, idx: usize) -> Point3 {
        let [i, j, k] = self.coords(idx);
        self.center(i, j, k)
    }

    #[inline]
    pub fn is_blocked(&self, idx: usize) -> bool {
        self.blocked[idx]
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    pub fn open_count(&self) -> usize {
        self.len() - self.blocked_count()
    }

    /// Closed-box containment against the nominal room dimensions.
    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|a| p[a].is_finite() && p[a] >= 0.0 && p[a] <= self.dims_m[a])
    }

    /// Voxel holding `p`, or `None` outside the room.
    pub fn voxel_of(&self, p: Point3) -> Option<[usize; 3]> {
        if !self.contains(p) {
            return None;
        }
        let mut v = [0usize; 3];
        for a in 0..3 {
            v[a] = ((p[a] / self.cell_m).floor() as usize).min(self.counts[a] - 1);
        }
        Some(v)
    }

    pub fn voxel_index_of(&self, p: Point3) -> Option<usize> {
        self.voxel_of(p).map(|[i, j, k]| self.index(i, j, k))
    }

    /// True when `p` is inside the room and not inside a blocked voxel.
    pub fn is_open(&self, p: Point3) -> bool {
        self.voxel_index_of(p).is_some_and(|idx| !self.blocked[idx])
    }

    /// Indices of open voxels face-adjacent to `idx`, in -x,+x,-y,+y,-z,+z order.
    pub fn open_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let [i, j, k] = self.coords(idx);
        let [nx, ny, nz] = self.counts;
        let candidates = [
            (i > 0).then(|| self.index(i - 1, j, k)),
            (i + 1 < nx).then(|| self.index(i + 1, j, k)),
            (j > 0).then(|| self.index(i, j - 1, k)),
            (j + 1 < ny).then(|| self.index(i, j + 1, k)),
            (k > 0).then(|| self.index(i, j, k - 1)),
            (k + 1 < nz).then(|| self.index(i, j, k + 1)),
        ];
        candidates.into_iter().flatten().filter(move |n| !self.blocked[*n])
    }
}
