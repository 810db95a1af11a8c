//! Fixed-width histograms with associative merge, used by the Monte-Carlo
//! ensembles and the detector sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{num, CsvTable};
use crate::scalar::Real;

/// Uniform binning of `[lo, hi]` into `count` bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BinSpec<R: Real> {
    pub lo: R,
    pub hi: R,
    pub count: usize,
}

impl<R: Real> BinSpec<R> {
    pub fn new(lo: R, hi: R, count: usize) -> Result<Self> {
        let spec = Self { lo, hi, count };
        spec.validate()?;
        Ok(spec)
    }

    /// `[-half_width, half_width]`.
    pub fn symmetric(half_width: R, count: usize) -> Result<Self> {
        Self::new(-half_width, half_width, count)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::param("bin count must be >= 1"));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::param(format!("bin range [{}, {}] is empty", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn width(&self) -> R {
        (self.hi - self.lo) / R::from_usize_lossy(self.count)
    }

    /// Bin index of `x`; `hi` itself falls in the last bin.
    pub fn index(&self, x: R) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let i = ((x - self.lo) / self.width()).floor().to_usize().unwrap_or(usize::MAX);
        Some(i.min(self.count - 1))
    }
}

/// Binned counts.
///
/// `n_total` counts every recorded sample; samples outside the bin range
/// are tallied in `underflow` / `overflow`, so
/// `counts.sum() + underflow + overflow == n_total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Histogram<R: Real> {
    pub edges: Vec<R>,
    pub counts: Vec<u64>,
    pub n_total: u64,
    pub underflow: u64,
    pub overflow: u64,
}

impl<R: Real> Histogram<R> {
    pub fn empty(spec: &BinSpec<R>) -> Self {
        let w = spec.width();
        let mut edges: Vec<R> =
            (0..=spec.count).map(|i| spec.lo + w * R::from_usize_lossy(i)).collect();
        edges[spec.count] = spec.hi;
        Self { edges, counts: vec![0; spec.count], n_total: 0, underflow: 0, overflow: 0 }
    }

    pub fn spec(&self) -> BinSpec<R> {
        BinSpec { lo: self.edges[0], hi: self.edges[self.counts.len()], count: self.counts.len() }
    }

    pub fn record(&mut self, x: R) {
        self.n_total += 1;
        match self.spec().index(x) {
            Some(i) => self.counts[i] += 1,
            None if x < self.edges[0] => self.underflow += 1,
            None => self.overflow += 1,
        }
    }

    /// Adds the counts of `other`, which must share the binning.
    pub fn merge(&mut self, other: &Histogram<R>) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::param("cannot merge histograms with different edges"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_total += other.n_total;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn bin_width(&self) -> R {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<R> {
        self.edges.windows(2).map(|w| (w[0] + w[1]) / R::lit(2.0)).collect()
    }

    /// Fraction of all samples in each bin.
    pub fn frequencies(&self) -> Vec<R> {
        let n = R::from_u64(self.n_total.max(1)).unwrap_or_else(R::one);
        self.counts.iter().map(|&c| R::from_u64(c).unwrap_or_else(R::zero) / n).collect()
    }

    pub fn is_consistent(&self) -> bool {
        let binned: u64 = self.counts.iter().sum();
        binned + self.underflow + self.overflow == self.n_total
            && self.edges.windows(2).all(|w| w[0] < w[1])
    }

    /// CSV with columns `bin_lo, bin_hi, count`.
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["bin_lo", "bin_hi", "count"]);
        for (w, c) in self.edges.windows(2).zip(&self.counts) {
            t.row(&[num(w[0]), num(w[1]), c.to_string()]);
        }
        t.finish()
    }

    /// Index of the bin containing `x`.
    pub fn bin_of(&self, x: R) -> Option<usize> {
        self.spec().index(x)
    }
}

/// Samples per independent random stream in [`fill_parallel`].
pub const CHUNK: usize = 1 << 16;

/// Histograms `n` draws of `sample`, split into fixed chunks of [`CHUNK`]
/// draws. Chunk `k` uses a ChaCha8 generator seeded with `seed` on stream
/// `k`, so the result is bit-identical for any thread count.
pub fn fill_parallel<R, F>(n: usize, seed: u64, spec: &BinSpec<R>, sample: F) -> Result<Histogram<R>>
where
    R: Real,
    F: Fn(&mut ChaCha8Rng) -> R + Sync,
{
    if n == 0 {
        return Err(Error::param("sample count n must be >= 1"));
    }
    spec.validate()?;
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<Histogram<R>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut h = Histogram::empty(spec);
            let len = CHUNK.min(n - k * CHUNK);
            for _ in 0..len {
                h.record(sample(&mut rng));
            }
            h
        })
        .collect();
    let mut total = Histogram::empty(spec);
    for h in &partials {
        total.merge(h)?;
    }
    Ok(total)
}
