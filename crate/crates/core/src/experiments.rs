//! Measurements built on the propagators: where the beams appear to split,
//! whether a reversed second stage restores the initial spin, when a
//! multilayer field resolves two peaks, and a peak counter for profiles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{evolve_packet, ZKernelParams};
use crate::error::{Error, Result};
use crate::histogram::{fill_parallel, BinSpec, Histogram};
use crate::model::{derive_timing, Apparatus, Branch, GaussianPacket, UnitSystem};
use crate::oracle::{evolve_to, FieldSchedule, FieldWindow, Grid1D, GridState};
use crate::quad::simpson;
use crate::scalar::{cis, Real};

/// Straight-line backtracking of the two branch centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CollapseReport<R: Real> {
    /// Beam-axis position where the fitted branch lines cross.
    pub y_collapse: R,
    /// Centre of the field region, for comparison.
    pub y_bar: R,
    /// Fitted branch positions at the detector plane `y_d`.
    pub z_d_plus: R,
    pub z_d_minus: R,
    /// RMS distance of the centroids from their fitted lines; `>= 0`.
    pub residual: R,
    pub times: Vec<R>,
    pub centroids_plus: Vec<R>,
    pub centroids_minus: Vec<R>,
    /// Kick fractions `(at entry, at exit)` of the kernel evaluated at the
    /// detector time.
    pub kick_split: (R, R),
}

/// `count` equally spaced times after the field, the last one at the detector.
pub fn detector_times<R: Real>(
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    count: usize,
) -> Result<Vec<R>> {
    let tm = derive_timing(apparatus, packet, units)?;
    let step = (tm.t_d() - tm.t_c) / R::from_usize_lossy(count.max(1));
    Ok((1..=count).map(|k| tm.t_c + step * R::from_usize_lossy(k)).collect())
}

fn centroid<R: Real>(density: impl Fn(R) -> R, lo: R, hi: R, n: usize) -> R {
    let mass = simpson(lo, hi, n, &density);
    simpson(lo, hi, n, |z| z * density(z)) / mass
}

/// `(intercept, slope, sum of squared residuals)` of `z = a + b y`.
fn fit_line<R: Real>(ys: &[R], zs: &[R]) -> (R, R, R) {
    let n = R::from_usize_lossy(ys.len());
    let my = ys.iter().copied().sum::<R>() / n;
    let mz = zs.iter().copied().sum::<R>() / n;
    let sxy: R = ys.iter().zip(zs).map(|(&y, &z)| (y - my) * (z - mz)).sum();
    let sxx: R = ys.iter().map(|&y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let a = mz - b * my;
    let ss = ys.iter().zip(zs).map(|(&y, &z)| (z - a - b * y).powi(2)).sum();
    (a, b, ss)
}

/// Fits each branch's z centroid at the given post-field `times` (at least
/// three) to a straight line in the beam coordinate `y = y_a + v (t - t')`
/// and intersects the two lines.
pub fn backtrack_collapse<R: Real>(
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    times: &[R],
) -> Result<CollapseReport<R>> {
    if apparatus.grad_bz == R::zero() {
        return Err(Error::NoSplit("zero gradient: the branch lines are parallel".into()));
    }
    if times.len() < 3 {
        return Err(Error::param(format!("need at least 3 sample times, got {}", times.len())));
    }
    let mut centroids = [Vec::new(), Vec::new()];
    let mut ys = Vec::with_capacity(times.len());
    let mut timing = None;
    for &t in times {
        let field = evolve_packet(packet, apparatus, units, t)?;
        let tm = field.timing;
        let w = field.width();
        let reach = (tm.v_z * (t - tm.t_bar)).abs() + R::lit(12.0) * w;
        let z_a = packet.x_a[2];
        let n = (R::lit(2.0) * reach / (w / R::lit(16.0))).ceil().to_usize().unwrap_or(2).max(64);
        for (i, b) in Branch::BOTH.into_iter().enumerate() {
            let prof = field.branch_profile(b);
            centroids[i].push(centroid(|z| prof.density(z), z_a - reach, z_a + reach, n));
        }
        ys.push(field.y_center());
        timing = Some(tm);
    }
    let tm = timing.expect("at least three times");
    let (a_p, b_p, ss_p) = fit_line(&ys, &centroids[0]);
    let (a_m, b_m, ss_m) = fit_line(&ys, &centroids[1]);
    let dslope = b_p - b_m;
    if !(dslope.abs() > R::epsilon() * (b_p.abs() + b_m.abs())) {
        return Err(Error::NoSplit("fitted branch lines are parallel".into()));
    }
    let y_collapse = (a_m - a_p) / dslope;
    let points = R::from_usize_lossy(2 * times.len());
    let t_d = tm.t_d();
    let params = ZKernelParams { t: t_d, t_prime: packet.t_prime, t_bar: tm.t_bar, v_z: tm.v_z, branch: Branch::Plus };
    params.validate()?;
    Ok(CollapseReport {
        y_collapse,
        y_bar: apparatus.y_bar(),
        z_d_plus: a_p + b_p * apparatus.y_d,
        z_d_minus: a_m + b_m * apparatus.y_d,
        residual: ((ss_p + ss_m) / points).sqrt(),
        times: times.to_vec(),
        centroids_plus: centroids[0].clone(),
        centroids_minus: centroids[1].clone(),
        kick_split: params.kick_split(),
    })
}

/// Spin fidelity after two field stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RecombineReport<R: Real> {
    /// Probability of finding the spin back in its initial transverse state.
    pub fidelity: R,
    /// `|<phi_+|phi_->|` after both stages, in `[0, 1]`.
    pub overlap: R,
    /// Net relative velocity `sum_k (u_k^+ - u_k^-)` left between the branches.
    pub net_relative_velocity: R,
    /// Relative displacement of the branches referred back to `t'`.
    pub offset: R,
    pub phase_error: R,
}

/// Passes the packet through `stage1` and then `stage2` (if any) and
/// measures the spin along the initial transverse direction.
///
/// The stages act as momentum kicks at their midpoint times. The two
/// branches are displaced Gaussians of the same width, so their overlap
/// magnitude is `exp(-(Q^2 sigma^2 / hbar^2 + S^2 / sigma^2) / 4)` with
/// `Q = m sum_k du_k` and `S = sum_k du_k (t_bar_k - t')`. `phase_error`
/// is an extra relative phase between the branches; the fidelity is
/// `1/2 + Re(conj(chi_+) chi_- exp(i phase_error)) * overlap`, which is
/// `(1 + overlap cos(phase_error)) / 2` for a `+x` spin.
pub fn recombine<R: Real>(
    packet: &GaussianPacket<R>,
    stage1: &Apparatus<R>,
    stage2: Option<&Apparatus<R>>,
    units: &UnitSystem<R>,
    phase_error: R,
) -> Result<RecombineReport<R>> {
    if !phase_error.is_finite() {
        return Err(Error::param("phase_error must be finite"));
    }
    let mut stages = vec![*stage1];
    if let Some(s2) = stage2 {
        let disjoint = s2.y_b >= stage1.y_c || stage1.y_b >= s2.y_c;
        if !disjoint {
            return Err(Error::InvalidGeometry(format!(
                "stage field regions [{}, {}) and [{}, {}) overlap",
                stage1.y_b, stage1.y_c, s2.y_b, s2.y_c
            )));
        }
        stages.push(*s2);
    }
    let two = R::lit(2.0);
    let mut q = R::zero();
    let mut s = R::zero();
    for st in &stages {
        let tm = derive_timing(st, packet, units)?;
        // kick of the plus branch minus that of the minus branch
        let du = -two * tm.v_z;
        q += du;
        s += du * (tm.t_bar - packet.t_prime);
    }
    let sigma = packet.sigma;
    let p = units.mass * q * sigma / units.hbar;
    let overlap = (-(p * p + s * s / (sigma * sigma)) / R::lit(4.0)).exp();
    let coherence = packet.chi_plus.conj() * packet.chi_minus * cis(phase_error);
    Ok(RecombineReport {
        fidelity: R::lit(0.5) + coherence.re * overlap,
        overlap,
        net_relative_velocity: q,
        offset: s,
        phase_error,
    })
}

/// One same-axis gradient layer on `[y_start, y_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Layer<R: Real> {
    pub y_start: R,
    pub y_end: R,
    pub grad_bz: R,
}

/// Ordered, non-overlapping gradient layers between source and detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LayerStack<R: Real> {
    pub y_a: R,
    pub y_d: R,
    pub layers: Vec<Layer<R>>,
}

impl<R: Real> LayerStack<R> {
    pub fn new(y_a: R, y_d: R, layers: Vec<Layer<R>>) -> Result<Self> {
        let stack = Self { y_a, y_d, layers };
        stack.validate()?;
        Ok(stack)
    }

    /// The single layer of an ordinary apparatus.
    pub fn from_apparatus(app: &Apparatus<R>) -> Result<Self> {
        Self::new(app.y_a, app.y_d, vec![Layer { y_start: app.y_b, y_end: app.y_c, grad_bz: app.grad_bz }])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y_a.is_finite() && self.y_d.is_finite() && self.y_a < self.y_d) {
            return Err(Error::InvalidGeometry(format!("need y_a < y_d, got {} and {}", self.y_a, self.y_d)));
        }
        let mut prev_end = self.y_a;
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.y_start.is_finite() && l.y_end.is_finite() && l.grad_bz.is_finite()) {
                return Err(Error::param(format!("layer {i} has non-finite values")));
            }
            let ordered = if i == 0 { l.y_start > prev_end } else { l.y_start >= prev_end };
            if !(ordered && l.y_start < l.y_end && l.y_end < self.y_d) {
                return Err(Error::InvalidGeometry(format!(
                    "layer {i} [{}, {}) must start after the previous layer and end before y_d = {}",
                    l.y_start, l.y_end, self.y_d
                )));
            }
            prev_end = l.y_end;
        }
        Ok(())
    }

    /// Field windows seen by the beam centre.
    pub fn schedule(&self, packet: &GaussianPacket<R>, units: &UnitSystem<R>) -> Result<FieldSchedule<R>> {
        let v = packet.speed(units);
        let at = |y: R| packet.t_prime + (y - self.y_a) / v;
        FieldSchedule::new(
            self.layers
                .iter()
                .map(|l| FieldWindow { t_on: at(l.y_start), t_off: at(l.y_end), grad: l.grad_bz, impulsive: false })
                .collect(),
        )
    }

    /// Per-layer `(t_bar, v_z)`.
    fn kicks(&self, packet: &GaussianPacket<R>, units: &UnitSystem<R>) -> Vec<(R, R)> {
        let v = packet.speed(units);
        let p_y = packet.p_y(units);
        self.layers
            .iter()
            .map(|l| {
                let mid = (l.y_start + l.y_end) / R::lit(2.0);
                let t_bar = packet.t_prime + (mid - self.y_a) / v;
                (t_bar, (l.y_end - l.y_start) / p_y * units.mu_b * l.grad_bz)
            })
            .collect()
    }

    /// Split parameter `kappa = mu_b B' dt sigma / hbar` of each layer.
    pub fn kappas(&self, packet: &GaussianPacket<R>, units: &UnitSystem<R>) -> Vec<R> {
        self.kicks(packet, units).iter().map(|&(_, v_z)| units.mass * v_z * packet.sigma / units.hbar).collect()
    }
}

/// Numerical settings for [`sandwich`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SandwichOptions<R: Real> {
    /// Grid size; `None` picks the smallest power of two that resolves the
    /// momentum spread and kicks.
    pub n_points: Option<usize>,
    /// Largest Strang step inside a layer.
    pub max_dt: R,
    /// Bins of the density profile and of the detector histogram.
    pub bins: usize,
    /// Born-rule detector samples drawn for the histogram.
    pub samples: usize,
    pub seed: u64,
}

impl<R: Real> Default for SandwichOptions<R> {
    fn default() -> Self {
        Self { n_points: None, max_dt: R::lit(1e-2), bins: 64, samples: 100_000, seed: 0 }
    }
}

/// Outcome of a multilayer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SandwichReport<R: Real> {
    pub peaks: BimodalityReport<R>,
    pub kappas: Vec<R>,
    pub grid: Grid1D<R>,
    pub norm: R,
    /// Probability mass per bin of the final z profile.
    pub profile: Vec<R>,
    pub histogram: Histogram<R>,
}

const MAX_GRID: usize = 1 << 22;

fn sandwich_state<R: Real>(
    packet: &GaussianPacket<R>,
    layers: &LayerStack<R>,
    units: &UnitSystem<R>,
    t_final: R,
    opts: &SandwichOptions<R>,
) -> Result<(GridState<R>, BinSpec<R>, Vec<R>)> {
    layers.validate()?;
    packet.validate()?;
    units.validate()?;
    if (packet.x_a[1] - layers.y_a).abs() > R::lit(1e-9) * R::one().max(layers.y_a.abs()) {
        return Err(Error::InvalidGeometry("packet source must sit at the stack's y_a".into()));
    }
    let schedule = layers.schedule(packet, units)?;
    if let Some(last) = schedule.windows.last() {
        if !(t_final > last.t_off) {
            return Err(Error::domain(format!("t_final = {t_final} must follow the last layer exit {}", last.t_off)));
        }
    } else if !(t_final > packet.t_prime) {
        return Err(Error::domain("t_final must follow emission"));
    }
    let kicks = layers.kicks(packet, units);
    let shift: R = kicks.iter().map(|&(tb, vz)| vz.abs() * (t_final - tb)).sum();
    let width = packet.width_after(units, t_final - packet.t_prime);
    let reach = shift + R::lit(8.0) * width;
    let half = reach * R::lit(1.25);
    let n = match opts.n_points {
        Some(n) => n,
        None => {
            let kick_k: R = kicks.iter().map(|&(_, vz)| vz.abs()).sum::<R>() * units.mass / units.hbar;
            let k_max = R::lit(1.5) * (kick_k + R::lit(8.0) / packet.sigma);
            let dz = R::PI() / k_max;
            let needed = (R::lit(2.0) * half / dz).ceil().to_usize().unwrap_or(usize::MAX);
            if needed > MAX_GRID {
                return Err(Error::Extent(format!("grid would need {needed} points (limit {MAX_GRID})")));
            }
            needed.next_power_of_two().max(1024)
        }
    };
    let grid = Grid1D::centered(packet.x_a[2], half, n)?;
    let start = GridState::from_packet(packet, grid)?;
    let end = evolve_to(&start, &schedule, units, t_final, opts.max_dt)?;
    let bins = BinSpec::symmetric(reach, opts.bins)?;
    let bins = BinSpec::new(bins.lo + packet.x_a[2], bins.hi + packet.x_a[2], bins.count)?;
    let mut profile = vec![R::zero(); bins.count];
    let dz = grid.dz();
    for (j, d) in end.density().into_iter().enumerate() {
        if let Some(i) = bins.index(grid.z(j)) {
            profile[i] += d * dz;
        }
    }
    Ok((end, bins, profile))
}

/// Peak count of the final z profile after the stack, without detector sampling.
pub fn sandwich_peaks<R: Real>(
    packet: &GaussianPacket<R>,
    layers: &LayerStack<R>,
    units: &UnitSystem<R>,
    t_final: R,
    opts: &SandwichOptions<R>,
) -> Result<BimodalityReport<R>> {
    let (_, bins, profile) = sandwich_state(packet, layers, units, t_final, opts)?;
    detect_bimodality(&profile, &bin_centers(&bins))
}

fn bin_centers<R: Real>(bins: &BinSpec<R>) -> Vec<R> {
    let w = bins.width();
    (0..bins.count).map(|i| bins.lo + w * (R::from_usize_lossy(i) + R::lit(0.5))).collect()
}

/// Evolves the packet through the stack on a grid to `t_final`, counts
/// the peaks of the final z profile and draws Born-rule detector samples.
pub fn sandwich<R: Real>(
    packet: &GaussianPacket<R>,
    layers: &LayerStack<R>,
    units: &UnitSystem<R>,
    t_final: R,
    opts: &SandwichOptions<R>,
) -> Result<SandwichReport<R>> {
    let (state, bins, profile) = sandwich_state(packet, layers, units, t_final, opts)?;
    let peaks = detect_bimodality(&profile, &bin_centers(&bins))?;
    let grid = state.grid;
    let dz = grid.dz().as_f64();
    let mut cdf = Vec::with_capacity(grid.n_points + 1);
    let mut acc = 0.0f64;
    cdf.push(0.0);
    for d in state.density() {
        acc += d.as_f64() * dz;
        cdf.push(acc);
    }
    let z0 = grid.z_min.as_f64();
    let histogram = fill_parallel(opts.samples, opts.seed, &bins, |rng| {
        let u = rng.random::<f64>() * acc;
        let j = cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1) - 1;
        let span = cdf[j + 1] - cdf[j];
        let frac = if span > 0.0 { (u - cdf[j]) / span } else { 0.5 };
        R::lit(z0 + (j as f64 + frac) * dz)
    })?;
    Ok(SandwichReport {
        peaks,
        kappas: layers.kappas(packet, units),
        grid,
        norm: state.norm(),
        profile,
        histogram,
    })
}

/// Smallest gradient of a single layer `[y_start, y_end)` for which
/// [`sandwich_peaks`] finds two peaks at `t_final`, by bisection in
/// `log(B')` between `lo` and `hi` to relative precision `rel_tol`.
#[allow(clippy::too_many_arguments)]
pub fn min_split_gradient<R: Real>(
    packet: &GaussianPacket<R>,
    stack: &LayerStack<R>,
    units: &UnitSystem<R>,
    t_final: R,
    opts: &SandwichOptions<R>,
    lo: R,
    hi: R,
    rel_tol: R,
) -> Result<R> {
    if stack.layers.len() != 1 {
        return Err(Error::param("gradient search needs exactly one layer"));
    }
    if !(lo > R::zero() && hi > lo && rel_tol > R::zero()) {
        return Err(Error::param("need 0 < lo < hi and rel_tol > 0"));
    }
    let splits = |g: R| -> Result<bool> {
        let mut s = stack.clone();
        s.layers[0].grad_bz = g;
        Ok(sandwich_peaks(packet, &s, units, t_final, opts)?.peaks >= 2)
    };
    if splits(lo)? || !splits(hi)? {
        return Err(Error::param(format!("split threshold not bracketed by [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    while b / a > R::one() + rel_tol {
        let mid = (a * b).sqrt();
        if splits(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}

/// Peak structure of a sampled profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BimodalityReport<R: Real> {
    pub peaks: usize,
    /// Peak positions, ordered by position.
    pub positions: Vec<R>,
    /// Distance between the two most prominent peaks over the sum of their
    /// outer half widths at half maximum; 0 with fewer than two peaks.
    pub separation_score: R,
}

/// Default prominence threshold as a fraction of the global maximum.
pub const PROMINENCE_FRACTION: f64 = 0.05;

/// Counts peaks of `values` sampled at increasing `positions`.
///
/// The profile is smoothed by a 3-point moving average; a local maximum
/// counts if its topographic prominence is at least 5% of the global
/// maximum. Needs at least 16 samples.
pub fn detect_bimodality<R: Real>(values: &[R], positions: &[R]) -> Result<BimodalityReport<R>> {
    detect_bimodality_with(values, positions, R::lit(PROMINENCE_FRACTION))
}

/// [`detect_bimodality`] on histogram counts.
pub fn detect_bimodality_histogram<R: Real>(hist: &Histogram<R>) -> Result<BimodalityReport<R>> {
    let values: Vec<R> = hist.counts.iter().map(|&c| R::from_u64(c).unwrap_or_else(R::zero)).collect();
    detect_bimodality(&values, &hist.centers())
}

/// [`detect_bimodality`] with an explicit prominence fraction.
pub fn detect_bimodality_with<R: Real>(
    values: &[R],
    positions: &[R],
    prominence_fraction: R,
) -> Result<BimodalityReport<R>> {
    if values.is_empty() {
        return Err(Error::param("empty profile"));
    }
    if values.len() < 16 {
        return Err(Error::param(format!("need at least 16 bins, got {}", values.len())));
    }
    if positions.len() != values.len() || !positions.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::param("positions must be increasing and match the values"));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::param("profile contains non-finite values"));
    }
    let n = values.len();
    let s: Vec<R> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            values[lo..=hi].iter().copied().sum::<R>() / R::from_usize_lossy(hi - lo + 1)
        })
        .collect();
    let top = s.iter().copied().fold(R::neg_infinity(), R::max);
    if !(top > R::zero()) {
        return Ok(BimodalityReport { peaks: 0, positions: Vec::new(), separation_score: R::zero() });
    }
    let threshold = prominence_fraction * top;
    // (index, prominence); plateaus report their left end
    let mut found: Vec<(usize, R)> = Vec::new();
    for i in 0..n {
        let rises = i == 0 || s[i] > s[i - 1];
        let holds = i == n - 1 || s[i] >= s[i + 1];
        if !(rises && holds) {
            continue;
        }
        let mut j = i + 1;
        while j < n && s[j] == s[i] {
            j += 1;
        }
        if j < n && s[j] > s[i] {
            continue;
        }
        let prom = prominence(&s, i, j - 1);
        if prom >= threshold {
            found.push((i, prom));
        }
    }
    let positions_out: Vec<R> = found.iter().map(|&(i, _)| positions[i]).collect();
    let separation_score = if found.len() >= 2 {
        let mut by_prom = found.clone();
        by_prom.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite prominence"));
        let (p, q) = if by_prom[0].0 < by_prom[1].0 { (by_prom[0].0, by_prom[1].0) } else { (by_prom[1].0, by_prom[0].0) };
        let left = outer_hwhm(&s, positions, p, false);
        let right = outer_hwhm(&s, positions, q, true);
        (positions[q] - positions[p]) / (left + right)
    } else {
        R::zero()
    };
    Ok(BimodalityReport { peaks: found.len(), positions: positions_out, separation_score })
}

/// Height above the higher of the two saddles separating the plateau
/// `[i, j]` from strictly higher ground (or from the profile ends).
fn prominence<R: Real>(s: &[R], i: usize, j: usize) -> R {
    let h = s[i];
    let mut left_min = h;
    let mut k = i;
    while k > 0 {
        k -= 1;
        if s[k] > h {
            break;
        }
        left_min = left_min.min(s[k]);
    }
    let mut right_min = h;
    let mut k = j;
    while k + 1 < s.len() {
        k += 1;
        if s[k] > h {
            break;
        }
        right_min = right_min.min(s[k]);
    }
    h - left_min.max(right_min)
}

/// Distance from peak `i` to the half-height crossing on its outer side.
fn outer_hwhm<R: Real>(s: &[R], x: &[R], i: usize, rightward: bool) -> R {
    let half = s[i] / R::lit(2.0);
    let mut k = i;
    loop {
        let next = if rightward {
            if k + 1 >= s.len() {
                return (x[k] - x[i]).abs();
            }
            k + 1
        } else {
            if k == 0 {
                return (x[k] - x[i]).abs();
            }
            k - 1
        };
        if s[next] < half {
            let frac = (s[k] - half) / (s[k] - s[next]);
            let at = x[k] + (x[next] - x[k]) * frac;
            return (at - x[i]).abs();
        }
        k = next;
    }
}
