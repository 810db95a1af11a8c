//! Split-step Fourier propagator for the two spin components along z.
//!
//! x and y separate exactly from z for this potential, so a 1-D grid is
//! enough. Each component evolves independently under
//! `V(z, t) = s mu_b B'(t) z` (`s = Branch::potential_sign`) with Strang
//! splitting: half potential, spectral kinetic step, half potential. The
//! grid is periodic; callers size it so that nothing reaches the edges.
//!
//! A linear potential commutes with the kinetic step up to a c-number, so
//! the splitting error is a global phase per component. Time steps that
//! straddle a field boundary are cut at the boundary.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analytic::evolve_packet;
use crate::error::{Error, Result};
use crate::io::{num, CsvTable};
use crate::model::{derive_timing, Apparatus, Branch, GaussianPacket, UnitSystem};
use crate::scalar::{cis, Cplx, Real};

/// Periodic uniform grid on `[z_min, z_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Grid1D<R: Real> {
    pub z_min: R,
    pub z_max: R,
    pub n_points: usize,
}

impl<R: Real> Grid1D<R> {
    pub fn new(z_min: R, z_max: R, n_points: usize) -> Result<Self> {
        if n_points < 256 || !n_points.is_power_of_two() {
            return Err(Error::param(format!("grid size must be a power of two >= 256, got {n_points}")));
        }
        if !(z_min.is_finite() && z_max.is_finite() && z_min < z_max) {
            return Err(Error::param(format!("grid extent [{z_min}, {z_max}] is empty")));
        }
        Ok(Self { z_min, z_max, n_points })
    }

    /// `[center - half_width, center + half_width)`.
    pub fn centered(center: R, half_width: R, n_points: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, n_points)
    }

    pub fn dz(&self) -> R {
        (self.z_max - self.z_min) / R::from_usize_lossy(self.n_points)
    }

    pub fn z(&self, j: usize) -> R {
        self.z_min + self.dz() * R::from_usize_lossy(j)
    }

    pub fn points(&self) -> Vec<R> {
        (0..self.n_points).map(|j| self.z(j)).collect()
    }

    /// Angular wave numbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<R> {
        let n = self.n_points;
        let dk = R::TAU() / (self.z_max - self.z_min);
        (0..n)
            .map(|j| {
                if j < n / 2 {
                    dk * R::from_usize_lossy(j)
                } else {
                    -dk * R::from_usize_lossy(n - j)
                }
            })
            .collect()
    }

    /// Step size at which the largest kinetic phase per step reaches pi:
    /// `dz^2 m / (pi hbar)`. The spectral step is stable for any step; this
    /// is an accuracy guide only.
    pub fn step_guide(&self, units: &UnitSystem<R>) -> R {
        self.dz() * self.dz() * units.mass / (R::PI() * units.hbar)
    }

    /// Checks that `[center - reach, center + reach]` lies inside the grid.
    pub fn check_covers(&self, center: R, reach: R) -> Result<()> {
        if center - reach < self.z_min || center + reach > self.z_max {
            return Err(Error::Extent(format!(
                "grid [{}, {}] does not cover [{}, {}]",
                self.z_min,
                self.z_max,
                center - reach,
                center + reach
            )));
        }
        Ok(())
    }
}

/// Half-width that contains both branches out to `t_final` with eight
/// widths of margin: `|v_z (t_final - t_bar)| + 8 sigma |f(t_final - t')|`.
pub fn required_reach<R: Real>(
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    t_final: R,
) -> Result<R> {
    let timing = derive_timing(apparatus, packet, units)?;
    let shift = (timing.v_z * (t_final - timing.t_bar).max(R::zero())).abs();
    Ok(shift + R::lit(8.0) * packet.width_after(units, t_final - packet.t_prime))
}

/// Two-component wave function sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridState<R: Real> {
    pub grid: Grid1D<R>,
    pub psi_plus: Vec<Cplx<R>>,
    pub psi_minus: Vec<Cplx<R>>,
    pub t: R,
}

impl<R: Real> GridState<R> {
    /// Initial packet profile along z times the spinor, renormalised on the grid.
    pub fn from_packet(packet: &GaussianPacket<R>, grid: Grid1D<R>) -> Result<Self> {
        packet.validate()?;
        let s2 = packet.sigma * packet.sigma;
        let profile: Vec<R> = grid
            .points()
            .iter()
            .map(|&z| {
                let d = z - packet.x_a[2];
                (-d * d / (R::lit(2.0) * s2)).exp()
            })
            .collect();
        let edge = profile[0].max(profile[grid.n_points - 1]);
        if edge > R::lit(1e-12) {
            return Err(Error::Extent(format!("initial packet reaches the grid edge (amplitude {edge})")));
        }
        let psi = |chi: Cplx<R>| profile.iter().map(|&p| chi * p).collect::<Vec<_>>();
        let mut state = Self { grid, psi_plus: psi(packet.chi_plus), psi_minus: psi(packet.chi_minus), t: packet.t_prime };
        let n = state.norm();
        let scale = R::one() / n.sqrt();
        state.psi_plus.iter_mut().chain(state.psi_minus.iter_mut()).for_each(|v| *v = *v * scale);
        Ok(state)
    }

    pub fn component(&self, branch: Branch) -> &[Cplx<R>] {
        match branch {
            Branch::Plus => &self.psi_plus,
            Branch::Minus => &self.psi_minus,
        }
    }

    fn component_mut(&mut self, branch: Branch) -> &mut Vec<Cplx<R>> {
        match branch {
            Branch::Plus => &mut self.psi_plus,
            Branch::Minus => &mut self.psi_minus,
        }
    }

    pub fn component_norm(&self, branch: Branch) -> R {
        self.component(branch).iter().map(|v| v.norm_sqr()).sum::<R>() * self.grid.dz()
    }

    /// `dz * sum(|psi_+|^2 + |psi_-|^2)`.
    pub fn norm(&self) -> R {
        self.component_norm(Branch::Plus) + self.component_norm(Branch::Minus)
    }

    /// Total density `|psi_+|^2 + |psi_-|^2` at each grid point.
    pub fn density(&self) -> Vec<R> {
        self.psi_plus.iter().zip(&self.psi_minus).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect()
    }

    /// `<z>` of one component, normalised by that component's weight.
    pub fn mean_z(&self, branch: Branch) -> R {
        let psi = self.component(branch);
        let w: R = psi.iter().map(|v| v.norm_sqr()).sum();
        let zw: R = psi.iter().enumerate().map(|(j, v)| self.grid.z(j) * v.norm_sqr()).sum();
        zw / w
    }

    /// `dz * sum(conj(psi_+) psi_-)`.
    pub fn branch_overlap(&self) -> Cplx<R> {
        self.psi_plus.iter().zip(&self.psi_minus).map(|(a, b)| a.conj() * b).sum::<Cplx<R>>() * self.grid.dz()
    }

    /// Probability in the outer sixteenth of the grid on each side.
    pub fn edge_mass(&self) -> R {
        let n = self.grid.n_points;
        let band = n / 16;
        let d = self.density();
        (d[..band].iter().copied().sum::<R>() + d[n - band..].iter().copied().sum::<R>()) * self.grid.dz()
    }

    /// CSV with columns `z, re_psi_plus, im_psi_plus, re_psi_minus, im_psi_minus`.
    pub fn snapshot_csv(&self) -> String {
        let mut t = CsvTable::new(&["z", "re_psi_plus", "im_psi_plus", "re_psi_minus", "im_psi_minus"]);
        for (j, (a, b)) in self.psi_plus.iter().zip(&self.psi_minus).enumerate() {
            t.row(&[num(self.grid.z(j)), num(a.re), num(a.im), num(b.re), num(b.im)]);
        }
        t.finish()
    }
}

/// One period of constant gradient `grad` on `[t_on, t_off)`.
///
/// An impulsive window applies its whole momentum kick at the midpoint
/// instead of as a force, which is the zero-length limit at fixed
/// `grad * (t_off - t_on)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FieldWindow<R: Real> {
    pub t_on: R,
    pub t_off: R,
    pub grad: R,
    pub impulsive: bool,
}

impl<R: Real> FieldWindow<R> {
    pub fn midpoint(&self) -> R {
        (self.t_on + self.t_off) / R::lit(2.0)
    }
}

/// Time profile of the gradient seen by the beam centre.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FieldSchedule<R: Real> {
    pub windows: Vec<FieldWindow<R>>,
}

impl<R: Real> FieldSchedule<R> {
    pub fn new(windows: Vec<FieldWindow<R>>) -> Result<Self> {
        for w in &windows {
            if !(w.t_on.is_finite() && w.t_off.is_finite() && w.grad.is_finite() && w.t_on < w.t_off) {
                return Err(Error::param(format!("field window [{}, {}) is invalid", w.t_on, w.t_off)));
            }
        }
        Ok(Self { windows })
    }

    /// Single window `[t_b, t_c)` for the beam centre crossing the apparatus.
    pub fn from_apparatus(
        apparatus: &Apparatus<R>,
        packet: &GaussianPacket<R>,
        units: &UnitSystem<R>,
        impulsive: bool,
    ) -> Result<Self> {
        let timing = derive_timing(apparatus, packet, units)?;
        Self::new(vec![FieldWindow { t_on: timing.t_b, t_off: timing.t_c, grad: apparatus.grad_bz, impulsive }])
    }

    /// Continuous gradient at time `t` (impulsive windows excluded).
    pub fn gradient_at(&self, t: R) -> R {
        self.windows
            .iter()
            .filter(|w| !w.impulsive && t >= w.t_on && t < w.t_off)
            .map(|w| w.grad)
            .sum()
    }

    /// Times where the evolution must stop: window edges and kick instants.
    fn breakpoints(&self) -> Vec<R> {
        let mut out = Vec::new();
        for w in &self.windows {
            if w.impulsive {
                out.push(w.midpoint());
            } else {
                out.push(w.t_on);
                out.push(w.t_off);
            }
        }
        out
    }

    fn kicks_at(&self, t: R) -> impl Iterator<Item = &FieldWindow<R>> {
        self.windows.iter().filter(move |w| w.impulsive && w.midpoint() == t)
    }
}

/// FFT plans and scratch for one grid.
pub struct SplitStep<R: Real> {
    grid: Grid1D<R>,
    units: UnitSystem<R>,
    forward: Arc<dyn Fft<R>>,
    inverse: Arc<dyn Fft<R>>,
    k2: Vec<R>,
    z: Vec<R>,
    scratch: Vec<Cplx<R>>,
}

impl<R: Real> SplitStep<R> {
    pub fn new(grid: Grid1D<R>, units: UnitSystem<R>) -> Result<Self> {
        units.validate()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n_points);
        let inverse = planner.plan_fft_inverse(grid.n_points);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Ok(Self {
            grid,
            units,
            forward,
            inverse,
            k2: grid.wavenumbers().iter().map(|&k| k * k).collect(),
            z: grid.points(),
            scratch: vec![Complex::new(R::zero(), R::zero()); scratch_len],
        })
    }

    /// Exact free evolution over `dt`.
    pub fn kinetic(&mut self, psi: &mut [Cplx<R>], dt: R) {
        self.forward.process_with_scratch(psi, &mut self.scratch);
        let c = -self.units.hbar * dt / (R::lit(2.0) * self.units.mass);
        let inv_n = R::one() / R::from_usize_lossy(self.grid.n_points);
        for (v, &k2) in psi.iter_mut().zip(&self.k2) {
            *v = *v * cis(c * k2) * inv_n;
        }
        self.inverse.process_with_scratch(psi, &mut self.scratch);
    }

    /// Multiplies by `exp(-i a z / hbar)`: the potential `a z / dt` acting for `dt`.
    pub fn linear_phase(&self, psi: &mut [Cplx<R>], a: R) {
        let c = -a / self.units.hbar;
        for (v, &z) in psi.iter_mut().zip(&self.z) {
            *v = *v * cis(c * z);
        }
    }

    /// Strang step of length `dt` under the force constant `grad` (zero allowed).
    pub fn strang(&mut self, psi: &mut [Cplx<R>], branch: Branch, grad: R, dt: R) {
        if grad == R::zero() {
            self.kinetic(psi, dt);
            return;
        }
        let half = branch.potential_sign::<R>() * self.units.mu_b * grad * dt / R::lit(2.0);
        self.linear_phase(psi, half);
        self.kinetic(psi, dt);
        self.linear_phase(psi, half);
    }
}

/// Advances both components from `state.t` to `t_end`, cutting at every
/// breakpoint inside the interval, with a single Strang step per piece.
fn advance_interval<R: Real>(
    prop: &mut SplitStep<R>,
    state: &mut GridState<R>,
    schedule: &FieldSchedule<R>,
    breaks: &[R],
    t_end: R,
) {
    let mut cuts: Vec<R> = breaks.iter().copied().filter(|&b| b > state.t && b < t_end).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.push(t_end);
    for cut in cuts {
        apply_kicks(prop, state, schedule);
        let h = cut - state.t;
        if h > R::zero() {
            let grad = schedule.gradient_at(state.t + h / R::lit(2.0));
            for b in Branch::BOTH {
                prop.strang(state.component_mut(b), b, grad, h);
            }
        }
        state.t = cut;
    }
}

fn apply_kicks<R: Real>(prop: &SplitStep<R>, state: &mut GridState<R>, schedule: &FieldSchedule<R>) {
    for w in schedule.kicks_at(state.t) {
        for b in Branch::BOTH {
            let a = b.potential_sign::<R>() * prop.units.mu_b * w.grad * (w.t_off - w.t_on);
            prop.linear_phase(state.component_mut(b), a);
        }
    }
}

fn check_edges<R: Real>(state: &GridState<R>) -> Result<()> {
    let edge = state.edge_mass();
    if edge > R::lit(1e-8) {
        return Err(Error::Extent(format!(
            "probability {edge} reached the outer grid band at t = {}; enlarge the grid",
            state.t
        )));
    }
    Ok(())
}

/// `n_steps` uniform steps of `dt_step`.
///
/// Steps crossing a window edge are split at the edge, so the field turns on
/// and off exactly at `t_on` / `t_off`. Impulsive kicks fire when the
/// evolution passes their midpoint.
pub fn split_step_evolve<R: Real>(
    state: &GridState<R>,
    schedule: &FieldSchedule<R>,
    units: &UnitSystem<R>,
    dt_step: R,
    n_steps: usize,
) -> Result<GridState<R>> {
    if !(dt_step > R::zero() && dt_step.is_finite()) {
        return Err(Error::param(format!("dt_step must be > 0, got {dt_step}")));
    }
    let mut out = state.clone();
    if n_steps == 0 {
        return Ok(out);
    }
    let mut prop = SplitStep::new(state.grid, *units)?;
    let breaks = schedule.breakpoints();
    let t0 = state.t;
    for k in 1..=n_steps {
        let t_end = t0 + dt_step * R::from_usize_lossy(k);
        advance_interval(&mut prop, &mut out, schedule, &breaks, t_end);
    }
    check_edges(&out)?;
    Ok(out)
}

/// Evolves to `t_target`, landing exactly on every window edge.
///
/// Field-free stretches take one exact kinetic step; inside a window the
/// stretch is divided into equal steps no longer than `max_dt`.
pub fn evolve_to<R: Real>(
    state: &GridState<R>,
    schedule: &FieldSchedule<R>,
    units: &UnitSystem<R>,
    t_target: R,
    max_dt: R,
) -> Result<GridState<R>> {
    if !(max_dt > R::zero() && max_dt.is_finite()) {
        return Err(Error::param(format!("max_dt must be > 0, got {max_dt}")));
    }
    if !(t_target >= state.t) {
        return Err(Error::domain(format!("cannot evolve backwards from {} to {t_target}", state.t)));
    }
    let mut out = state.clone();
    let mut prop = SplitStep::new(state.grid, *units)?;
    let breaks = schedule.breakpoints();
    let mut cuts: Vec<R> = breaks.iter().copied().filter(|&b| b > state.t && b < t_target).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.push(t_target);
    for cut in cuts {
        apply_kicks(&prop, &mut out, schedule);
        let span = cut - out.t;
        if span > R::zero() {
            let grad = schedule.gradient_at(out.t + span / R::lit(2.0));
            let n = if grad == R::zero() {
                1
            } else {
                (span / max_dt).ceil().to_usize().unwrap_or(1).max(1)
            };
            let h = span / R::from_usize_lossy(n);
            for _ in 0..n {
                for b in Branch::BOTH {
                    prop.strang(out.component_mut(b), b, grad, h);
                }
            }
        }
        out.t = cut;
    }
    apply_kicks(&prop, &mut out, schedule);
    check_edges(&out)?;
    Ok(out)
}

/// Grid used by [`compare_analytic_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridSpec<R: Real> {
    pub n_points: usize,
    /// Half-width around `z_a`; `None` uses 1.25 times [`required_reach`].
    pub half_width: Option<R>,
    /// Largest Strang step inside the field.
    pub max_dt: R,
    /// Replace the finite-length field by its impulsive limit.
    pub impulsive: bool,
}

impl<R: Real> Default for GridSpec<R> {
    fn default() -> Self {
        Self { n_points: 4096, half_width: None, max_dt: R::lit(1e-3), impulsive: false }
    }
}

/// Grid propagation against the closed form at `t_final`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OracleReport<R: Real> {
    pub t_final: R,
    pub grid: Grid1D<R>,
    /// Relative L2 distance per component after removing the best global phase.
    pub l2_error_plus: R,
    pub l2_error_minus: R,
    /// `theta_+ - theta_-` wrapped to `(-pi, pi]`, where `theta_b` is the
    /// phase that best aligns component `b` of the grid state with the closed form.
    pub relative_phase_difference: R,
    pub norm: R,
    /// Transit time as a fraction of `t_final - t'`.
    pub region_fraction: R,
    pub kappa: R,
}

impl<R: Real> OracleReport<R> {
    pub fn max_l2_error(&self) -> R {
        self.l2_error_plus.max(self.l2_error_minus)
    }
}

/// `(relative L2 error, best phase)` of `numeric` against `exact`.
///
/// Two empty components compare as equal with phase zero.
pub fn aligned_error<R: Real>(exact: &[Cplx<R>], numeric: &[Cplx<R>]) -> (R, R) {
    let ip: Cplx<R> = exact.iter().zip(numeric).map(|(a, b)| b.conj() * a).sum();
    let den: R = exact.iter().map(|a| a.norm_sqr()).sum();
    let num_norm: R = numeric.iter().map(|b| b.norm_sqr()).sum();
    if den == R::zero() {
        return (num_norm.sqrt(), R::zero());
    }
    let theta = ip.arg();
    let rot = cis(theta);
    let err: R = exact.iter().zip(numeric).map(|(a, b)| (*b * rot - *a).norm_sqr()).sum();
    ((err / den).sqrt(), theta)
}

fn wrap_phase<R: Real>(x: R) -> R {
    let tau = R::TAU();
    let mut y = x % tau;
    if y <= -R::PI() {
        y += tau;
    } else if y > R::PI() {
        y -= tau;
    }
    y
}

/// Propagates the packet on a grid to `t_final` and compares each
/// component with the closed-form z amplitude times its spinor weight.
pub fn compare_analytic_oracle<R: Real>(
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    t_final: R,
    spec: &GridSpec<R>,
) -> Result<OracleReport<R>> {
    let field = evolve_packet(packet, apparatus, units, t_final)?;
    if !(t_final > field.timing.t_c) {
        return Err(Error::domain(format!("t_final must exceed t_c = {}", field.timing.t_c)));
    }
    let reach = required_reach(packet, apparatus, units, t_final)?;
    let half = spec.half_width.unwrap_or(reach * R::lit(1.25));
    let grid = Grid1D::centered(packet.x_a[2], half, spec.n_points)?;
    grid.check_covers(packet.x_a[2], reach)?;
    let schedule = FieldSchedule::from_apparatus(apparatus, packet, units, spec.impulsive)?;
    let start = GridState::from_packet(packet, grid)?;
    let end = evolve_to(&start, &schedule, units, t_final, spec.max_dt)?;
    let zs = grid.points();
    let mut errs = [R::zero(); 2];
    let mut phases = [R::zero(); 2];
    for (i, b) in Branch::BOTH.into_iter().enumerate() {
        let exact: Vec<Cplx<R>> = zs.iter().map(|&z| field.z_amplitude(b, z) * packet.chi(b)).collect();
        let (e, th) = aligned_error(&exact, end.component(b));
        errs[i] = e;
        phases[i] = th;
    }
    Ok(OracleReport {
        t_final,
        grid,
        l2_error_plus: errs[0],
        l2_error_minus: errs[1],
        relative_phase_difference: wrap_phase(phases[0] - phases[1]),
        norm: end.norm(),
        region_fraction: field.timing.dt / (t_final - packet.t_prime),
        kappa: field.timing.kappa(units, packet.sigma),
    })
}

/// Oracle comparison as the field region grows at fixed `dy * B'`, fixed
/// entry plane and fixed `t_final`. `fractions` are transit times as a
/// fraction of `t_final - t'`.
pub fn region_length_sweep<R: Real>(
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    t_final: R,
    fractions: &[R],
    spec: &GridSpec<R>,
) -> Result<Vec<OracleReport<R>>> {
    let strength = apparatus.dy() * apparatus.grad_bz;
    let v = packet.speed(units);
    let flight = t_final - packet.t_prime;
    fractions
        .iter()
        .map(|&frac| {
            let dy = frac * flight * v;
            let y_c = apparatus.y_b + dy;
            if y_c >= packet.x_a[1] + v * flight {
                return Err(Error::InvalidGeometry(format!("region fraction {frac} does not fit before t_final")));
            }
            let app = Apparatus::new(apparatus.y_a, apparatus.y_b, y_c, apparatus.y_d.max(y_c + dy), strength / dy)?;
            compare_analytic_oracle(packet, &app, units, t_final, spec)
        })
        .collect()
}
