//! Classical motion of a point magnetic moment through the gradient region,
//! and the isotropic-spin ensemble built from it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{fill_parallel, BinSpec, Histogram};
use crate::model::{derive_timing, Apparatus, GaussianPacket, UnitSystem};
use crate::scalar::Real;

/// Transverse phase-space point at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClassicalState<R: Real> {
    pub z: R,
    pub p_z: R,
    pub t: R,
}

/// Spin direction: azimuth `alpha` in `[0, 2pi)`, polar angle `beta` in `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpinOrientation<R: Real> {
    pub alpha: R,
    pub beta: R,
}

impl<R: Real> SpinOrientation<R> {
    pub fn new(alpha: R, beta: R) -> Result<Self> {
        if !(alpha >= R::zero() && alpha < R::TAU()) {
            return Err(Error::param(format!("alpha = {alpha} outside [0, 2pi)")));
        }
        if !(beta >= R::zero() && beta <= R::PI()) {
            return Err(Error::param(format!("beta = {beta} outside [0, pi]")));
        }
        Ok(Self { alpha, beta })
    }

    /// `mu_z = -mu_b cos(beta)`.
    pub fn mu_z(&self, units: &UnitSystem<R>) -> R {
        -units.mu_b * self.beta.cos()
    }
}

/// Piecewise trajectory: free flight, uniform force inside `[t_b, t_c]`,
/// free flight again.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalPath<R: Real> {
    pub mu_z: R,
    pub grad_bz: R,
    pub mass: R,
    pub t_prime: R,
    pub t_b: R,
    pub t_c: R,
    pub z0: R,
    pub p_z0: R,
}

impl<R: Real> ClassicalPath<R> {
    /// Path starting at the packet centre with `p_z = 0`.
    pub fn new(
        mu_z: R,
        apparatus: &Apparatus<R>,
        packet: &GaussianPacket<R>,
        units: &UnitSystem<R>,
    ) -> Result<Self> {
        Self::with_initial(mu_z, apparatus, packet, units, packet.x_a[2], R::zero())
    }

    pub fn with_initial(
        mu_z: R,
        apparatus: &Apparatus<R>,
        packet: &GaussianPacket<R>,
        units: &UnitSystem<R>,
        z0: R,
        p_z0: R,
    ) -> Result<Self> {
        let timing = derive_timing(apparatus, packet, units)?;
        if !(mu_z.is_finite() && z0.is_finite() && p_z0.is_finite()) {
            return Err(Error::param("trajectory initial data must be finite"));
        }
        Ok(Self {
            mu_z,
            grad_bz: apparatus.grad_bz,
            mass: units.mass,
            t_prime: packet.t_prime,
            t_b: timing.t_b,
            t_c: timing.t_c,
            z0,
            p_z0,
        })
    }

    fn force(&self) -> R {
        self.mu_z * self.grad_bz
    }

    /// State on entering the field.
    pub fn entry(&self) -> ClassicalState<R> {
        let z = self.z0 + self.p_z0 * (self.t_b - self.t_prime) / self.mass;
        ClassicalState { z, p_z: self.p_z0, t: self.t_b }
    }

    /// State on leaving the field.
    pub fn exit(&self) -> ClassicalState<R> {
        let dt = self.t_c - self.t_b;
        let b = self.entry();
        let z = b.z + b.p_z * dt / self.mass + self.force() / (R::lit(2.0) * self.mass) * dt * dt;
        ClassicalState { z, p_z: b.p_z + self.force() * dt, t: self.t_c }
    }

    pub fn at(&self, t: R) -> Result<ClassicalState<R>> {
        if !t.is_finite() || t < self.t_prime {
            return Err(Error::domain(format!("trajectory time {t} precedes emission t' = {}", self.t_prime)));
        }
        if t < self.t_b {
            let z = self.z0 + self.p_z0 * (t - self.t_prime) / self.mass;
            return Ok(ClassicalState { z, p_z: self.p_z0, t });
        }
        let b = self.entry();
        let c = self.exit();
        if t <= self.t_c {
            // endpoint form of the in-field parabola
            let dt = self.t_c - self.t_b;
            let chord = (c.z - b.z) / dt;
            let t_bar = (self.t_b + self.t_c) / R::lit(2.0);
            let p_z = self.mass * chord + self.force() * (t - t_bar);
            let z = b.z
                + chord * (t - self.t_b)
                + self.force() / (R::lit(2.0) * self.mass) * (t - self.t_b) * (t - self.t_c);
            return Ok(ClassicalState { z, p_z, t });
        }
        Ok(ClassicalState { z: c.z + c.p_z * (t - self.t_c) / self.mass, p_z: c.p_z, t })
    }
}

/// Classical state at time `t` for a moment `mu_z` released from the packet
/// centre with no transverse momentum.
pub fn classical_trajectory<R: Real>(
    mu_z: R,
    apparatus: &Apparatus<R>,
    packet: &GaussianPacket<R>,
    units: &UnitSystem<R>,
    t: R,
) -> Result<ClassicalState<R>> {
    ClassicalPath::new(mu_z, apparatus, packet, units)?.at(t)
}

/// Detector-plane displacement `z_d = -v_z T cos(beta)`, i.e. `-z_max cos(beta)`
/// for a positive gradient.
pub fn deflection<R: Real>(
    beta: R,
    apparatus: &Apparatus<R>,
    packet: &GaussianPacket<R>,
    units: &UnitSystem<R>,
) -> Result<R> {
    if !beta.is_finite() {
        return Err(Error::param("beta must be finite"));
    }
    let timing = derive_timing(apparatus, packet, units)?;
    Ok(-timing.v_z * timing.flight_time * beta.cos())
}

/// Histogram of detector displacements for `n` isotropically oriented
/// spins. `cos(beta)` is drawn uniformly on `[-1, 1]`.
pub fn classical_ensemble<R: Real>(
    n: usize,
    seed: u64,
    apparatus: &Apparatus<R>,
    packet: &GaussianPacket<R>,
    units: &UnitSystem<R>,
    bins: &BinSpec<R>,
) -> Result<Histogram<R>> {
    let timing = derive_timing(apparatus, packet, units)?;
    let reach = (timing.v_z * timing.flight_time).as_f64();
    fill_parallel(n, seed, bins, move |rng| {
        let cos_beta = 2.0 * rng.random::<f64>() - 1.0;
        R::lit(-reach * cos_beta)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn setup(grad: f64) -> (Apparatus<f64>, GaussianPacket<f64>, UnitSystem<f64>) {
        let app = Apparatus::new(0.0, 5.0, 6.0, 25.5, grad).unwrap();
        let packet = GaussianPacket::new(1.0, 0.0, 10.0).unwrap();
        (app, packet, UnitSystem::default())
    }

    // RK4 on zdot = p/m, pdot = F, independent of the closed form.
    fn rk4(z0: f64, p0: f64, force: f64, m: f64, t0: f64, t1: f64, steps: usize) -> (f64, f64) {
        let h = (t1 - t0) / steps as f64;
        let deriv = |_z: f64, p: f64| (p / m, force);
        let (mut z, mut p) = (z0, p0);
        for _ in 0..steps {
            let (a1, b1) = deriv(z, p);
            let (a2, b2) = deriv(z + 0.5 * h * a1, p + 0.5 * h * b1);
            let (a3, b3) = deriv(z + 0.5 * h * a2, p + 0.5 * h * b2);
            let (a4, b4) = deriv(z + h * a3, p + h * b3);
            z += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            p += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        (z, p)
    }

    #[test]
    fn endpoints_are_hit() {
        let (app, packet, units) = setup(2.0);
        let path = ClassicalPath::with_initial(1.0, &app, &packet, &units, 0.3, -0.7).unwrap();
        let b = path.entry();
        let c = path.exit();
        assert_relative_eq!(path.at(b.t).unwrap().z, b.z, epsilon = 1e-15);
        assert_relative_eq!(path.at(c.t).unwrap().z, c.z, epsilon = 1e-15);
    }

    #[test]
    fn mid_interaction_matches_rk4() {
        let (app, packet, units) = setup(2.0);
        let path = ClassicalPath::with_initial(1.0, &app, &packet, &units, 0.3, -0.7).unwrap();
        let b = path.entry();
        let t_mid = 0.537;
        let (z, p) = rk4(b.z, b.p_z, 2.0, 1.0, b.t, t_mid, 200);
        let s = path.at(t_mid).unwrap();
        assert!((s.z - z).abs() < 1e-8, "{} vs {}", s.z, z);
        assert!((s.p_z - p).abs() < 1e-8);
    }

    #[test]
    fn continuous_at_boundaries() {
        let (app, packet, units) = setup(3.0);
        let path = ClassicalPath::with_initial(-1.0, &app, &packet, &units, 0.1, 0.2).unwrap();
        for t in [path.t_b, path.t_c] {
            let eps = 1e-9;
            let lo = path.at(t - eps).unwrap();
            let hi = path.at(t + eps).unwrap();
            assert!((lo.z - hi.z).abs() < 1e-8);
            assert!((lo.p_z - hi.p_z).abs() < 1e-8);
        }
    }

    #[test]
    fn transit_displacement_is_second_order() {
        let (app, packet, units) = setup(2.0);
        let path = ClassicalPath::new(1.0, &app, &packet, &units).unwrap();
        let dt = path.t_c - path.t_b;
        let dz = path.exit().z - path.entry().z;
        assert_relative_eq!(dz, 0.5 * 1.0 * 2.0 * dt * dt, max_relative = 1e-12);
    }

    #[test]
    fn time_before_emission_is_domain_error() {
        let (app, packet, units) = setup(2.0);
        assert!(matches!(
            classical_trajectory(1.0, &app, &packet, &units, -0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn deflection_values() {
        let (app, packet, units) = setup(2.0);
        let z_max = 0.4;
        assert!(deflection(FRAC_PI_2, &app, &packet, &units).unwrap().abs() < 1e-16);
        assert_relative_eq!(deflection(0.0, &app, &packet, &units).unwrap(), -z_max, epsilon = 1e-15);
        assert_relative_eq!(
            deflection(FRAC_PI_3, &app, &packet, &units).unwrap(),
            -z_max / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn spin_up_lands_at_classical_deflection() {
        let (app, packet, units) = setup(2.0);
        let timing = derive_timing(&app, &packet, &units).unwrap();
        let s = classical_trajectory(-1.0, &app, &packet, &units, timing.t_d()).unwrap();
        assert_relative_eq!(s.z, -timing.z_max, epsilon = 1e-14);
    }

    #[test]
    fn ensemble_is_deterministic_and_bounded() {
        let (app, packet, units) = setup(2.0);
        let bins = BinSpec::symmetric(0.4, 20).unwrap();
        let a = classical_ensemble(100_000, 7, &app, &packet, &units, &bins).unwrap();
        let b = classical_ensemble(100_000, 7, &app, &packet, &units, &bins).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.underflow + a.overflow, 0);
        assert!(a.is_consistent());
        let c = classical_ensemble(100_000, 8, &app, &packet, &units, &bins).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn zero_field_collapses_to_zero_bin() {
        let (app, packet, units) = setup(0.0);
        let bins = BinSpec::new(-1.0, 1.0, 9).unwrap();
        let h = classical_ensemble(1000, 1, &app, &packet, &units, &bins).unwrap();
        let zero_bin = h.bin_of(0.0).unwrap();
        assert_eq!(h.counts[zero_bin], 1000);
    }

    #[test]
    fn zero_samples_rejected() {
        let (app, packet, units) = setup(2.0);
        let bins = BinSpec::symmetric(0.4, 20).unwrap();
        assert!(matches!(
            classical_ensemble(0, 1, &app, &packet, &units, &bins),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn orientation_ranges() {
        assert!(SpinOrientation::new(0.0, 4.0).is_err());
        assert!(SpinOrientation::new(7.0, 1.0).is_err());
        let o = SpinOrientation::new(1.0, 0.0).unwrap();
        assert_eq!(o.mu_z(&UnitSystem::default()), -1.0);
    }
}
