//! Closed-form spin-dependent propagator and the entangled spinor Gaussian
//! it produces.
//!
//! With the field off, the z kernel is the free kernel. With the field on,
//! each spin branch picks up the phase
//! `exp(s * i m v_z [z (t_bar - t') + z' (t - t_bar)] / (hbar (t - t')))`,
//! `s = Branch::kick_sign`, valid once the packet has left the field
//! (`t >= t_c`). Terms quadratic in the field are dropped, including the
//! z-independent phase `-i m v_z^2 (t - t_bar)(t_bar - t') / (2 hbar (t - t'))`,
//! which is the same for both branches and therefore unobservable.
//!
//! Square roots of complex prefactors (`sqrt(1/f)`, `sqrt(m / 2 pi i hbar dt)`)
//! use the principal branch. Since `Re f = 1`, `arg f` stays inside
//! `(-pi/2, pi/2)` and the phase is continuous in `t` without explicit
//! unwrapping.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{num, CsvTable};
use crate::model::{derive_timing, Apparatus, Branch, GaussianPacket, Timing, UnitSystem};
use crate::scalar::{cis, Cplx, Real};

/// Value of the z part of the classical action along a four-point path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ZAction<R: Real> {
    pub value: R,
    /// `None` when `mu_z == 0`.
    pub branch: Option<Branch>,
}

/// Corner points of the piecewise path `(t', z') -> (t_b, z_b) -> (t_c, z_c) -> (t, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PathCorners<R: Real> {
    pub z: R,
    pub z_c: R,
    pub z_b: R,
    pub z_prime: R,
    pub t: R,
    pub t_c: R,
    pub t_b: R,
    pub t_prime: R,
}

/// z action to first order in the field:
/// free segments before and after, and inside the field the chord term plus
/// `mu_z B' (t_c - t_b) (z_c + z_b) / 2`.
pub fn z_action<R: Real>(
    corners: &PathCorners<R>,
    mu_z: R,
    grad_bz: R,
    units: &UnitSystem<R>,
) -> Result<ZAction<R>> {
    let c = corners;
    if !(c.t > c.t_c && c.t_c > c.t_b && c.t_b > c.t_prime) {
        return Err(Error::domain(format!(
            "action needs t > t_c > t_b > t', got {} {} {} {}",
            c.t, c.t_c, c.t_b, c.t_prime
        )));
    }
    let m = units.mass;
    let half = R::lit(0.5);
    let free = |dz: R, dt: R| half * m * dz * dz / dt;
    let dt = c.t_c - c.t_b;
    let value = free(c.z - c.z_c, c.t - c.t_c)
        + free(c.z_c - c.z_b, dt)
        + mu_z * grad_bz * dt * (c.z_c + c.z_b) * half
        + free(c.z_b - c.z_prime, c.t_b - c.t_prime);
    let branch = if mu_z < R::zero() {
        Some(Branch::Plus)
    } else if mu_z > R::zero() {
        Some(Branch::Minus)
    } else {
        None
    };
    Ok(ZAction { value, branch })
}

/// Arguments of the z kernel for one branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ZKernelParams<R: Real> {
    pub t: R,
    pub t_prime: R,
    pub t_bar: R,
    /// Magnitude-carrying kick velocity `v_z` (signed by the gradient).
    pub v_z: R,
    pub branch: Branch,
}

impl<R: Real> ZKernelParams<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > self.t_prime) {
            return Err(Error::domain(format!(
                "kernel needs t > t' (t = {}, t' = {}); the coincident limit is a delta function",
                self.t, self.t_prime
            )));
        }
        if !(self.t_bar >= self.t_prime && self.t_bar <= self.t) {
            return Err(Error::domain(format!("t_bar = {} not inside [t', t]", self.t_bar)));
        }
        if !self.v_z.is_finite() {
            return Err(Error::param("v_z must be finite"));
        }
        Ok(())
    }

    /// Fractions of the momentum kick that appear to act at the start and
    /// at the end of the flight: `((t - t_bar)/(t - t'), (t_bar - t')/(t - t'))`.
    pub fn kick_split(&self) -> (R, R) {
        let tau = self.t - self.t_prime;
        ((self.t - self.t_bar) / tau, (self.t_bar - self.t_prime) / tau)
    }
}

/// Free-particle kernel `sqrt(m / 2 pi i hbar dt) exp(i m (z - z')^2 / (2 hbar dt))`.
pub fn free_kernel<R: Real>(units: &UnitSystem<R>, dt: R, z: R, z_prime: R) -> Result<Cplx<R>> {
    if !(dt > R::zero()) {
        return Err(Error::domain(format!("free kernel needs dt > 0, got {dt}")));
    }
    let two = R::lit(2.0);
    let modulus = (units.mass / (two * R::PI() * units.hbar * dt)).sqrt();
    let d = z - z_prime;
    let phase = units.mass * d * d / (two * units.hbar * dt) - R::FRAC_PI_4();
    Ok(cis(phase) * modulus)
}

/// Stern-Gerlach kernel for one spin branch.
pub fn sg_kernel<R: Real>(
    params: &ZKernelParams<R>,
    units: &UnitSystem<R>,
    z: R,
    z_prime: R,
) -> Result<Cplx<R>> {
    params.validate()?;
    let tau = params.t - params.t_prime;
    let k0 = free_kernel(units, tau, z, z_prime)?;
    let weighted = z * (params.t_bar - params.t_prime) + z_prime * (params.t - params.t_bar);
    let phase = params.branch.kick_sign::<R>() * units.mass * params.v_z * weighted / (units.hbar * tau);
    Ok(k0 * cis(phase))
}

/// One Gaussian branch along z: the initial packet profile propagated with a
/// signed velocity kick `u` acting at `t_bar`.
///
/// `u = -v_z` / `+v_z` gives the spin-up / spin-down branch; the mean-field
/// ansatz uses `u = (<mu_z>/mu_b) v_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KickedGaussian<R: Real> {
    pub units: UnitSystem<R>,
    pub sigma: R,
    pub z_a: R,
    pub t_prime: R,
    pub t_bar: R,
    pub t: R,
    pub u: R,
}

impl<R: Real> KickedGaussian<R> {
    fn tau(&self) -> R {
        self.t - self.t_prime
    }

    fn f(&self) -> Cplx<R> {
        Complex::new(R::one(), self.units.hbar * self.tau() / (self.units.mass * self.sigma * self.sigma))
    }

    /// Complex amplitude, normalised in z.
    pub fn amplitude(&self, z: R) -> Cplx<R> {
        let UnitSystem { hbar, mass, .. } = self.units;
        let two = R::lit(2.0);
        let tau = self.tau();
        let f = self.f();
        let s2 = self.sigma * self.sigma;
        // effective initial wave number from the z' part of the kick phase
        let k = mass * self.u * (self.t - self.t_bar) / (hbar * tau);
        let zeta = z - self.z_a;
        let num = Complex::new(-zeta * zeta / (two * s2), k * zeta - hbar * k * k * tau / (two * mass));
        let outer = k * self.z_a + mass * self.u * z * (self.t_bar - self.t_prime) / (hbar * tau);
        let norm = (R::PI() * s2).powf(R::lit(-0.25));
        (num / f + Complex::new(R::zero(), outer)).exp() * f.powf(R::lit(-0.5)) * norm
    }

    /// Centre of `|amplitude|^2`.
    pub fn center(&self) -> R {
        self.z_a + self.u * (self.t - self.t_bar)
    }

    /// `sigma |f(t - t')|`: `|amplitude|^2 ~ exp(-(z - c)^2 / width^2)`.
    pub fn width(&self) -> R {
        self.sigma * self.f().norm()
    }

    pub fn density(&self, z: R) -> R {
        self.amplitude(z).norm_sqr()
    }
}

/// One point of a grid-sampled spinor field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FieldSample<R: Real> {
    pub x: R,
    pub y: R,
    pub z: R,
    pub phi_plus: Cplx<R>,
    pub phi_minus: Cplx<R>,
}

/// Closed-form entangled state after the packet has crossed the field.
///
/// `phi(branch, x)` is the spatial part of each spin component; the full
/// state is `(phi_plus chi_plus, phi_minus chi_minus)`. The x, y and z
/// dependences factorise, and each factor is normalised on its own axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpinorField<R: Real> {
    pub packet: GaussianPacket<R>,
    pub apparatus: Apparatus<R>,
    pub timing: Timing<R>,
    pub units: UnitSystem<R>,
    pub t: R,
    /// `f(t - t')`
    pub f: Cplx<R>,
}

/// Propagates the packet through the apparatus to time `t >= t_c`.
pub fn evolve_packet<R: Real>(
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    t: R,
) -> Result<SpinorField<R>> {
    let timing = derive_timing(apparatus, packet, units)?;
    if !t.is_finite() || t < timing.t_c {
        return Err(Error::domain(format!(
            "closed form holds only after the field region (t = {t} < t_c = {}); use the grid oracle for earlier times",
            timing.t_c
        )));
    }
    Ok(SpinorField {
        packet: *packet,
        apparatus: *apparatus,
        timing,
        units: *units,
        t,
        f: packet.dispersion(units, t - packet.t_prime),
    })
}

impl<R: Real> SpinorField<R> {
    fn norm_1d(&self) -> Cplx<R> {
        let s2 = self.packet.sigma * self.packet.sigma;
        self.f.powf(R::lit(-0.5)) * (R::PI() * s2).powf(R::lit(-0.25))
    }

    /// Same state at another time.
    pub fn at_time(&self, t: R) -> Result<Self> {
        evolve_packet(&self.packet, &self.apparatus, &self.units, t)
    }

    /// Kicked Gaussian describing one branch along z.
    pub fn branch_profile(&self, branch: Branch) -> KickedGaussian<R> {
        KickedGaussian {
            units: self.units,
            sigma: self.packet.sigma,
            z_a: self.packet.x_a[2],
            t_prime: self.packet.t_prime,
            t_bar: self.timing.t_bar,
            t: self.t,
            u: branch.kick_sign::<R>() * self.timing.v_z,
        }
    }

    pub fn x_amplitude(&self, x: R) -> Cplx<R> {
        let d = x - self.packet.x_a[0];
        let s2 = self.packet.sigma * self.packet.sigma;
        (Complex::new(-d * d / (R::lit(2.0) * s2), R::zero()) / self.f).exp() * self.norm_1d()
    }

    pub fn y_amplitude(&self, y: R) -> Cplx<R> {
        let UnitSystem { hbar, mass, .. } = self.units;
        let two = R::lit(2.0);
        let d = y - self.packet.x_a[1];
        let s2 = self.packet.sigma * self.packet.sigma;
        let k = self.packet.k_y;
        let tau = self.t - self.packet.t_prime;
        let num = Complex::new(-d * d / (two * s2), k * d - hbar * k * k * tau / (two * mass));
        (num / self.f).exp() * self.norm_1d()
    }

    /// z factor of `phi_branch`; this is the z-marginal amplitude.
    pub fn z_amplitude(&self, branch: Branch, z: R) -> Cplx<R> {
        self.branch_profile(branch).amplitude(z)
    }

    /// Spatial wave function of one branch at `point = (x, y, z)`.
    pub fn phi(&self, branch: Branch, point: [R; 3]) -> Cplx<R> {
        self.x_amplitude(point[0]) * self.y_amplitude(point[1]) * self.z_amplitude(branch, point[2])
    }

    /// `|phi_+|^2 |chi_+|^2 + |phi_-|^2 |chi_-|^2`.
    pub fn probability_density(&self, point: [R; 3]) -> R {
        Branch::BOTH
            .iter()
            .map(|&b| self.phi(b, point).norm_sqr() * self.packet.chi(b).norm_sqr())
            .sum()
    }

    /// z-marginal of the probability density.
    pub fn z_density(&self, z: R) -> R {
        Branch::BOTH
            .iter()
            .map(|&b| self.z_amplitude(b, z).norm_sqr() * self.packet.chi(b).norm_sqr())
            .sum()
    }

    /// Predicted peak of each branch, `z_a -/+ v_z (t - t_bar)`.
    pub fn branch_center(&self, branch: Branch) -> R {
        self.branch_profile(branch).center()
    }

    /// Beam centre along y, `y_a + v (t - t')`.
    pub fn y_center(&self) -> R {
        self.packet.x_a[1] + self.timing.v * (self.t - self.packet.t_prime)
    }

    /// `sigma |f(t - t')|`.
    pub fn width(&self) -> R {
        self.packet.sigma * self.f.norm()
    }

    /// Branch separation in units of the width: `v_z (t - t_bar) / (sigma |f|)`.
    pub fn separation(&self) -> R {
        (self.timing.v_z * (self.t - self.timing.t_bar)).abs() / self.width()
    }

    /// Samples the field on the tensor grid `xs x ys x zs` (z fastest).
    pub fn sample_grid(&self, xs: &[R], ys: &[R], zs: &[R]) -> Vec<FieldSample<R>> {
        let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &x in xs {
            let ax = self.x_amplitude(x);
            for &y in ys {
                let axy = ax * self.y_amplitude(y);
                for &z in zs {
                    out.push(FieldSample {
                        x,
                        y,
                        z,
                        phi_plus: axy * self.z_amplitude(Branch::Plus, z),
                        phi_minus: axy * self.z_amplitude(Branch::Minus, z),
                    });
                }
            }
        }
        out
    }

    /// Samples along z through the beam centre.
    pub fn sample_z_line(&self, zs: &[R]) -> Vec<FieldSample<R>> {
        self.sample_grid(&[self.packet.x_a[0]], &[self.y_center()], zs)
    }
}

/// CSV with columns `x, y, z, re_phi_plus, im_phi_plus, re_phi_minus, im_phi_minus`.
pub fn samples_csv<R: Real>(samples: &[FieldSample<R>]) -> String {
    let mut t = CsvTable::new(&["x", "y", "z", "re_phi_plus", "im_phi_plus", "re_phi_minus", "im_phi_minus"]);
    for s in samples {
        t.row(&[
            num(s.x),
            num(s.y),
            num(s.z),
            num(s.phi_plus.re),
            num(s.phi_plus.im),
            num(s.phi_minus.re),
            num(s.phi_minus.im),
        ]);
    }
    t.finish()
}
