//! Finite-volume domains: a periodic continuum torus or a finite site lattice.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest spatial dimension supported by the continuum simulator.
pub const MAX_DIM: usize = 3;

/// A continuum position; coordinates past the geometry's dimension are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; MAX_DIM]);

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        let mut x = [0.0; MAX_DIM];
        x[..coords.len()].copy_from_slice(coords);
        Point(x)
    }

    pub fn on_line(x: f64) -> Self {
        Point([x, 0.0, 0.0])
    }
}

impl Eq for Point {}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Periodic box `[0, side)^dim`, minimum-image distances.
    Torus { side: f64, dim: usize },
    /// Periodic one-dimensional lattice of `sites` points `i * spacing`; each
    /// site carries volume `spacing`.
    Ring { sites: usize, spacing: f64 },
    /// Arbitrary site coordinates, optionally periodic with the given period
    /// in every coordinate.
    Lattice { coords: Vec<Vec<f64>>, period: Option<f64>, site_volume: f64 },
}

impl Geometry {
    pub fn torus(side: f64, dim: usize) -> Self {
        Geometry::Torus { side, dim }
    }

    pub fn ring(sites: usize, spacing: f64) -> Self {
        Geometry::Ring { sites, spacing }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Geometry::Torus { side, dim } => {
                if !(side.is_finite() && *side > 0.0) {
                    return Err(Error::InvalidParameter("torus side must be > 0".into()));
                }
                if *dim == 0 || *dim > MAX_DIM {
                    return Err(Error::InvalidParameter(format!("dimension {dim} outside 1..={MAX_DIM}")));
                }
            }
            Geometry::Ring { sites, spacing } => {
                if *sites == 0 || !(spacing.is_finite() && *spacing > 0.0) {
                    return Err(Error::InvalidParameter("ring needs sites >= 1 and spacing > 0".into()));
                }
            }
            Geometry::Lattice { coords, period, site_volume } => {
                if coords.is_empty() {
                    return Err(Error::InvalidParameter("lattice needs at least one site".into()));
                }
                let d = coords[0].len();
                if d == 0 || d > MAX_DIM || coords.iter().any(|c| c.len() != d) {
                    return Err(Error::InvalidParameter("lattice coordinates must share a dimension in 1..=3".into()));
                }
                if !(site_volume.is_finite() && *site_volume > 0.0) {
                    return Err(Error::InvalidParameter("site_volume must be > 0".into()));
                }
                if let Some(p) = period {
                    if !(p.is_finite() && *p > 0.0) {
                        return Err(Error::InvalidParameter("lattice period must be > 0".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Geometry::Torus { dim, .. } => *dim,
            Geometry::Ring { .. } => 1,
            Geometry::Lattice { coords, .. } => coords[0].len(),
        }
    }

    pub fn is_lattice(&self) -> bool {
        !matches!(self, Geometry::Torus { .. })
    }

    /// Total volume `|Λ|` (number of sites times site volume on lattices).
    pub fn volume(&self) -> f64 {
        match self {
            Geometry::Torus { side, dim } => side.powi(*dim as i32),
            Geometry::Ring { sites, spacing } => *sites as f64 * spacing,
            Geometry::Lattice { coords, site_volume, .. } => coords.len() as f64 * site_volume,
        }
    }

    fn period(&self) -> Option<f64> {
        match self {
            Geometry::Torus { side, .. } => Some(*side),
            Geometry::Ring { sites, spacing } => Some(*sites as f64 * spacing),
            Geometry::Lattice { period, .. } => *period,
        }
    }

    /// Minimum-image displacement `b - a` (plain difference when not periodic).
    pub fn displacement(&self, a: &Point, b: &Point) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        let period = self.period();
        for k in 0..self.dim() {
            let mut dx = b.0[k] - a.0[k];
            if let Some(p) = period {
                dx -= p * (dx / p).round();
            }
            out[k] = dx;
        }
        out
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.displacement(a, b).iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Minimum-image norm of a position, i.e. its distance from the origin.
    pub fn norm(&self, a: &Point) -> f64 {
        self.distance(&Point([0.0; MAX_DIM]), a)
    }

    /// Maps a position back into the fundamental cell.
    pub fn wrap(&self, p: &Point) -> Point {
        let mut out = *p;
        if let Geometry::Torus { side, dim } = self {
            for c in out.0.iter_mut().take(*dim) {
                *c = c.rem_euclid(*side);
                if *c >= *side {
                    *c = 0.0;
                }
            }
        }
        out
    }

    pub fn n_sites(&self) -> Option<usize> {
        match self {
            Geometry::Torus { .. } => None,
            Geometry::Ring { sites, .. } => Some(*sites),
            Geometry::Lattice { coords, .. } => Some(coords.len()),
        }
    }

    pub fn site_volume(&self) -> Option<f64> {
        match self {
            Geometry::Torus { .. } => None,
            Geometry::Ring { spacing, .. } => Some(*spacing),
            Geometry::Lattice { site_volume, .. } => Some(*site_volume),
        }
    }

    pub fn site_point(&self, i: usize) -> Point {
        match self {
            Geometry::Ring { spacing, .. } => Point::on_line(i as f64 * spacing),
            Geometry::Lattice { coords, .. } => Point::new(&coords[i]),
            Geometry::Torus { .. } => panic!("site_point on a continuum geometry"),
        }
    }

    pub fn site_distance(&self, i: usize, j: usize) -> f64 {
        self.distance(&self.site_point(i), &self.site_point(j))
    }
}
