use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::combinatorics::MAX_LP_SITES;
use crate::error::{Error, Result};

/// Correlation function components `k^{(n,m)}` on a finite site space for
/// `n ≤ max_plus`, `m ≤ max_minus`, indexed by site bitmasks (so symmetry
/// and vanishing on repeated sites hold by construction).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    n_sites: usize,
    site_volume: f64,
    max_plus: usize,
    max_minus: usize,
    values: Vec<f64>,
}

/// One serialized entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    pub value: f64,
}

fn sites(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

impl CorrelationTable {
    /// Table with `k(∅) = 1` and every other entry zero.
    pub fn new(n_sites: usize, site_volume: f64, max_plus: usize, max_minus: usize) -> Result<Self> {
        if n_sites > MAX_LP_SITES {
            return Err(Error::StateSpaceTooLarge {
                sites: n_sites,
                states: 4u64.saturating_pow(n_sites as u32),
                limit: 4u64.pow(MAX_LP_SITES as u32),
            });
        }
        if max_plus > n_sites || max_minus > n_sites {
            return Err(Error::OrderExceedsSites { plus: max_plus, minus: max_minus, sites: n_sites });
        }
        if !(site_volume.is_finite() && site_volume > 0.0) {
            return Err(Error::InvalidParameter("site_volume must be > 0".into()));
        }
        let mut values = vec![0.0; 1 << (2 * n_sites)];
        values[0] = 1.0;
        Ok(Self { n_sites, site_volume, max_plus, max_minus, values })
    }

    /// Full-order table `k(η) = z₊^{|η⁺|} z₋^{|η⁻|}` of a product Poisson state.
    pub fn poisson(n_sites: usize, site_volume: f64, orders: (usize, usize), z_plus: f64, z_minus: f64) -> Result<Self> {
        let mut t = Self::new(n_sites, site_volume, orders.0, orders.1)?;
        for (p, m) in t.entries().collect::<Vec<_>>() {
            t.set(p, m, z_plus.powi(p.count_ones() as i32) * z_minus.powi(m.count_ones() as i32));
        }
        Ok(t)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn site_volume(&self) -> f64 {
        self.site_volume
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.max_plus, self.max_minus)
    }

    pub fn contains(&self, plus: u32, minus: u32) -> bool {
        plus.count_ones() as usize <= self.max_plus && minus.count_ones() as usize <= self.max_minus
    }

    fn index(&self, plus: u32, minus: u32) -> usize {
        plus as usize | (minus as usize) << self.n_sites
    }

    /// Stored value; entries beyond the orders read as zero.
    pub fn get(&self, plus: u32, minus: u32) -> f64 {
        self.values[self.index(plus, minus)]
    }

    pub fn set(&mut self, plus: u32, minus: u32, value: f64) {
        debug_assert!(self.contains(plus, minus));
        let i = self.index(plus, minus);
        self.values[i] = value;
    }

    /// All `(η⁺, η⁻)` within the orders, `∅` first.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let full = 1u32 << self.n_sites;
        (0..full).flat_map(move |m| (0..full).map(move |p| (p, m))).filter(|&(p, m)| self.contains(p, m))
    }

    /// `‖k‖_{K_α} = max |k(η)| e^{−α⁺|η⁺| − α⁻|η⁻|}`.
    pub fn weighted_norm(&self, alpha_plus: f64, alpha_minus: f64) -> f64 {
        self.entries()
            .map(|(p, m)| {
                self.get(p, m).abs() * (-alpha_plus * p.count_ones() as f64 - alpha_minus * m.count_ones() as f64).exp()
            })
            .fold(0.0, f64::max)
    }

    /// Largest entrywise difference over the common orders.
    pub fn max_abs_diff(&self, other: &CorrelationTable) -> f64 {
        assert_eq!(self.n_sites, other.n_sites);
        self.entries()
            .filter(|&(p, m)| other.contains(p, m))
            .map(|(p, m)| (self.get(p, m) - other.get(p, m)).abs())
            .fold(0.0, f64::max)
    }

    /// Restriction to lower orders.
    pub fn truncated(&self, max_plus: usize, max_minus: usize) -> Result<Self> {
        let mut t = Self::new(self.n_sites, self.site_volume, max_plus.min(self.max_plus), max_minus.min(self.max_minus))?;
        for (p, m) in t.entries().collect::<Vec<_>>() {
            t.set(p, m, self.get(p, m));
        }
        Ok(t)
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `a·self + b·other` entrywise.
    pub(crate) fn axpby(&self, a: f64, other: &CorrelationTable, b: f64) -> CorrelationTable {
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(&other.values) {
            *o = a * *o + b * v;
        }
        out
    }

    pub fn to_entries(&self) -> Vec<TableEntry> {
        self.entries().map(|(p, m)| TableEntry { plus: sites(p), minus: sites(m), value: self.get(p, m) }).collect()
    }

    /// CSV with columns `t, n_plus, n_minus, plus, minus, value`; site lists
    /// are space separated.
    pub fn write_csv<W: Write>(tables: &[(f64, &CorrelationTable)], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "n_plus", "n_minus", "plus", "minus", "value"])?;
        for (t, table) in tables {
            for e in table.to_entries() {
                let join = |v: &[usize]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
                w.write_record([
                    format!("{t}"),
                    e.plus.len().to_string(),
                    e.minus.len().to_string(),
                    join(&e.plus),
                    join(&e.minus),
                    format!("{:e}", e.value),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl Serialize for CorrelationTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            n_sites: usize,
            site_volume: f64,
            max_plus: usize,
            max_minus: usize,
            entries: Vec<TableEntry>,
        }
        Repr {
            n_sites: self.n_sites,
            site_volume: self.site_volume,
            max_plus: self.max_plus,
            max_minus: self.max_minus,
            entries: self.to_entries(),
        }
        .serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_and_orders() {
        let t = CorrelationTable::new(3, 0.5, 2, 1).unwrap();
        assert_eq!(t.get(0, 0), 1.0);
        assert_eq!(t.entries().count(), (1 + 3 + 3) * (1 + 3));
        assert!(CorrelationTable::new(3, 0.5, 4, 0).is_err());
    }

    #[test]
    fn poisson_norm() {
        let t = CorrelationTable::poisson(3, 1.0, (3, 3), 2.0, 0.5).unwrap();
        assert_eq!(t.get(0b111, 0b001), 8.0 * 0.5);
        assert!((t.weighted_norm(2f64.ln(), 0.5f64.ln()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_lists_sites() {
        let t = CorrelationTable::poisson(2, 1.0, (1, 0), 3.0, 1.0).unwrap();
        let j = serde_json::to_value(&t).unwrap();
        assert_eq!(j["entries"][1]["plus"], serde_json::json!([0]));
        assert_eq!(j["entries"][1]["value"], 3.0);
        let mut buf = Vec::new();
        CorrelationTable::write_csv(&[(0.0, &t)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
