use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::combinatorics::FiniteConfig;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point};

/// Radially binned one- and two-point correlation estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelationEstimate {
    pub edges: Vec<f64>,
    pub k20: Vec<f64>,
    pub k11: Vec<f64>,
    pub k02: Vec<f64>,
    pub k20_se: Vec<f64>,
    pub k11_se: Vec<f64>,
    pub k02_se: Vec<f64>,
    pub density_plus: f64,
    pub density_minus: f64,
    pub density_plus_se: f64,
    pub density_minus_se: f64,
    pub replicas: usize,
}

impl PairCorrelationEstimate {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r_lo", "r_hi", "k20", "k20_se", "k11", "k11_se", "k02", "k02_se"])?;
        for b in 0..self.k20.len() {
            let row = [
                self.edges[b],
                self.edges[b + 1],
                self.k20[b],
                self.k20_se[b],
                self.k11[b],
                self.k11_se[b],
                self.k02[b],
                self.k02_se[b],
            ];
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn ball_volume(r: f64, d: usize) -> f64 {
    match d {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        _ => 4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn histogram(a: &[Point], b: &[Point], same: bool, g: &Geometry, edges: &[f64], out: &mut [f64]) {
    let r_max = edges[edges.len() - 1];
    let r_min = edges[0];
    for (i, x) in a.iter().enumerate() {
        let others = if same { &b[i + 1..] } else { b };
        for y in others {
            let r = g.distance(x, y);
            if r < r_min || r >= r_max {
                continue;
            }
            let bin = edges.partition_point(|e| *e <= r) - 1;
            out[bin] += if same { 2.0 } else { 1.0 };
        }
    }
}

/// Point-process estimates from independent replicas on a torus: ordered pair
/// counts in each distance shell divided by `|Λ|` times the shell volume,
/// averaged over replicas, with standard errors from the replica spread.
pub fn estimate_correlations(
    snapshots: &[FiniteConfig<Point>],
    geometry: &Geometry,
    edges: &[f64],
) -> Result<PairCorrelationEstimate> {
    let Geometry::Torus { side, dim } = geometry else {
        return Err(Error::Unsupported("pair correlation estimates need a torus".into()));
    };
    if edges.len() < 2 {
        return Err(Error::EmptyBins);
    }
    if edges[0] < 0.0 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("bin edges must be nonnegative and increasing".into()));
    }
    if edges[edges.len() - 1] > 0.5 * side {
        return Err(Error::InvalidParameter(format!("largest bin edge exceeds half the side {side}")));
    }
    if snapshots.len() < 2 {
        return Err(Error::InvalidParameter("need at least two replicas".into()));
    }
    let vol = geometry.volume();
    let nb = edges.len() - 1;
    let shells: Vec<f64> = edges.windows(2).map(|w| ball_volume(w[1], *dim) - ball_volume(w[0], *dim)).collect();
    let mut per = [vec![vec![0.0; snapshots.len()]; nb], vec![vec![0.0; snapshots.len()]; nb], vec![vec![0.0; snapshots.len()]; nb]];
    let mut dens = [vec![0.0; snapshots.len()], vec![0.0; snapshots.len()]];
    let mut h = vec![0.0; nb];
    for (i, s) in snapshots.iter().enumerate() {
        dens[0][i] = s.plus.len() as f64 / vol;
        dens[1][i] = s.minus.len() as f64 / vol;
        for (k, (a, b, same)) in [(&s.plus, &s.plus, true), (&s.plus, &s.minus, false), (&s.minus, &s.minus, true)]
            .into_iter()
            .enumerate()
        {
            h.iter_mut().for_each(|v| *v = 0.0);
            histogram(a, b, same, geometry, edges, &mut h);
            for bin in 0..nb {
                per[k][bin][i] = h[bin] / (vol * shells[bin]);
            }
        }
    }
    let split = |k: usize| -> (Vec<f64>, Vec<f64>) { per[k].iter().map(|v| mean_se(v)).unzip() };
    let (k20, k20_se) = split(0);
    let (k11, k11_se) = split(1);
    let (k02, k02_se) = split(2);
    let (density_plus, density_plus_se) = mean_se(&dens[0]);
    let (density_minus, density_minus_se) = mean_se(&dens[1]);
    Ok(PairCorrelationEstimate {
        edges: edges.to_vec(),
        k20,
        k11,
        k02,
        k20_se,
        k11_se,
        k02_se,
        density_plus,
        density_minus,
        density_plus_se,
        density_minus_se,
        replicas: snapshots.len(),
    })
}
