//! Disentangled ansatz `psi = phi(t, x) chi`: the spin is frozen at its
//! initial state and the packet feels only the average moment, so each
//! run is a single Gaussian pushed by `<mu_z> B'`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::analytic::{evolve_packet, KickedGaussian};
use crate::error::{Error, Result};
use crate::histogram::{fill_parallel, BinSpec, Histogram};
use crate::model::{derive_timing, Apparatus, GaussianPacket, Timing, UnitSystem};
use crate::quad::simpson;
use crate::scalar::Real;

/// Mean-field state for one spin orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MeanFieldState<R: Real> {
    /// `<mu_z>`; `|<mu_z>| <= mu_b`.
    pub mu_z_avg: R,
    pub packet: GaussianPacket<R>,
    pub apparatus: Apparatus<R>,
    pub timing: Timing<R>,
    pub units: UnitSystem<R>,
    pub t: R,
}

impl<R: Real> MeanFieldState<R> {
    /// Uses the packet's own spinor for `<mu_z> = -mu_b (|chi_+|^2 - |chi_-|^2)`.
    pub fn from_packet(
        packet: &GaussianPacket<R>,
        apparatus: &Apparatus<R>,
        units: &UnitSystem<R>,
        t: R,
    ) -> Result<Self> {
        let timing = derive_timing(apparatus, packet, units)?;
        if !t.is_finite() || t < timing.t_c {
            return Err(Error::domain(format!("mean-field state needs t >= t_c = {}, got {t}", timing.t_c)));
        }
        let s_z = packet.chi_plus.norm_sqr() - packet.chi_minus.norm_sqr();
        Ok(Self { mu_z_avg: -units.mu_b * s_z, packet: *packet, apparatus: *apparatus, timing, units: *units, t })
    }

    /// `<mu> = -mu_b <sigma>` for the frozen spinor.
    pub fn mean_moment(&self) -> [R; 3] {
        let (a, b) = (self.packet.chi_plus, self.packet.chi_minus);
        let cross = a.conj() * b;
        let two = R::lit(2.0);
        let mu_b = self.units.mu_b;
        [-mu_b * two * cross.re, -mu_b * two * cross.im, -mu_b * (a.norm_sqr() - b.norm_sqr())]
    }

    /// Velocity kick `(<mu_z>/mu_b) v_z`.
    pub fn kick(&self) -> R {
        self.mu_z_avg / self.units.mu_b * self.timing.v_z
    }

    pub fn profile(&self) -> KickedGaussian<R> {
        KickedGaussian {
            units: self.units,
            sigma: self.packet.sigma,
            z_a: self.packet.x_a[2],
            t_prime: self.packet.t_prime,
            t_bar: self.timing.t_bar,
            t: self.t,
            u: self.kick(),
        }
    }

    pub fn center(&self) -> R {
        self.profile().center()
    }

    pub fn density(&self, z: R) -> R {
        self.profile().density(z)
    }

    /// Mean z of the packet at any time `s >= t'`: at rest before the field,
    /// uniformly accelerated inside it, uniform drift after.
    pub fn mean_z(&self, s: R) -> R {
        let tm = &self.timing;
        let z_a = self.packet.x_a[2];
        let u = self.kick();
        if s <= tm.t_b {
            z_a
        } else if s <= tm.t_c {
            z_a + u / (R::lit(2.0) * tm.dt) * (s - tm.t_b) * (s - tm.t_b)
        } else {
            z_a + u * (s - tm.t_bar)
        }
    }

    /// `<B_z>(s) = B' <z> P(y_b <= y < y_c)` over the packet at time `s`.
    pub fn mean_b_z(&self, s: R) -> Result<R> {
        if !(s >= self.packet.t_prime) {
            return Err(Error::domain(format!("time {s} precedes emission")));
        }
        let y_c = self.packet.x_a[1] + self.timing.v * (s - self.packet.t_prime);
        // |phi|^2 along y has standard deviation width / sqrt(2)
        let sd = self.packet.width_after(&self.units, s - self.packet.t_prime) * R::FRAC_1_SQRT_2();
        let p = normal_cdf((self.apparatus.y_c - y_c) / sd) - normal_cdf((self.apparatus.y_b - y_c) / sd);
        Ok(self.apparatus.grad_bz * self.mean_z(s) * p)
    }
}

/// Mean-field evolution for a spin at polar angle `beta`; `<mu_z> = -mu_b cos(beta)`.
pub fn meanfield_evolve<R: Real>(
    beta: R,
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    t: R,
) -> Result<MeanFieldState<R>> {
    if !(beta >= R::zero() && beta <= R::PI()) {
        return Err(Error::param(format!("beta = {beta} outside [0, pi]")));
    }
    let oriented = packet.with_orientation(beta, R::zero())?;
    let mut state = MeanFieldState::from_packet(&oriented, apparatus, units, t)?;
    state.mu_z_avg = -units.mu_b * beta.cos();
    Ok(state)
}

/// Detection histogram at time `t` for `n` isotropic spins, one mean-field
/// Gaussian per spin, one Born-rule draw per run.
pub fn meanfield_ensemble<R: Real>(
    n: usize,
    seed: u64,
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    t: R,
    bins: &BinSpec<R>,
) -> Result<Histogram<R>> {
    let model = EnsembleModel::new(packet, apparatus, units, t)?;
    let (z_a, reach, sd) = (model.z_a.as_f64(), model.reach.as_f64(), model.sd.as_f64());
    fill_parallel(n, seed, bins, move |rng| {
        let cos_beta = 2.0 * rng.random::<f64>() - 1.0;
        let g: f64 = rng.sample(StandardNormal);
        R::lit(z_a - reach * cos_beta + sd * g)
    })
}

/// Closed form of the ensemble density: a flat distribution on
/// `z_a +/- reach` convolved with a normal of standard deviation `sd`.
///
/// `sd = sigma |f(t - t')| / sqrt(2)`, since `|phi|^2 ~ exp(-(z - c)^2 / (sigma |f|)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnsembleModel<R: Real> {
    pub z_a: R,
    /// `|v_z| (t - t_bar)`
    pub reach: R,
    pub sd: R,
}

impl<R: Real> EnsembleModel<R> {
    pub fn new(packet: &GaussianPacket<R>, apparatus: &Apparatus<R>, units: &UnitSystem<R>, t: R) -> Result<Self> {
        let field = evolve_packet(packet, apparatus, units, t)?;
        Ok(Self {
            z_a: packet.x_a[2],
            reach: (field.timing.v_z * (t - field.timing.t_bar)).abs(),
            sd: field.width() * R::FRAC_1_SQRT_2(),
        })
    }

    pub fn density(&self, z: R) -> R {
        let (d, s) = (self.reach, self.sd);
        let x = z - self.z_a;
        if d <= s * R::lit(1e-6) {
            return normal_pdf(x / s) / s;
        }
        (normal_cdf((x + d) / s) - normal_cdf((x - d) / s)) / (R::lit(2.0) * d)
    }

    pub fn cdf(&self, z: R) -> R {
        let (d, s) = (self.reach, self.sd);
        let x = z - self.z_a;
        if d <= s * R::lit(1e-6) {
            return normal_cdf(x / s);
        }
        // integral of Phi(u / s) du is u Phi(u / s) + s phi(u / s)
        let g = |u: R| u * normal_cdf(u / s) + s * normal_pdf(u / s);
        (g(x + d) - g(x - d)) / (R::lit(2.0) * d)
    }

    /// Probability mass of each bin of `spec`.
    pub fn bin_probabilities(&self, spec: &BinSpec<R>) -> Vec<R> {
        let w = spec.width();
        (0..spec.count)
            .map(|i| {
                let lo = spec.lo + w * R::from_usize_lossy(i);
                self.cdf(lo + w) - self.cdf(lo)
            })
            .collect()
    }
}

/// Standard normal CDF.
pub fn normal_cdf<R: Real>(x: R) -> R {
    R::lit(0.5 * (1.0 + erf(x.as_f64() / std::f64::consts::SQRT_2)))
}

/// Standard normal density.
pub fn normal_pdf<R: Real>(x: R) -> R {
    let x = x.as_f64();
    R::lit((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

/// `integral |p_entangled(z) - p_meanfield(z)| dz` for the packet's own spinor.
///
/// Zero when the field is off; approaches 2 minus twice the weight of the
/// branch that the mean-field peak sits on once the branches separate.
pub fn l1_distance<R: Real>(
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    t: R,
) -> Result<R> {
    let field = evolve_packet(packet, apparatus, units, t)?;
    let mf = MeanFieldState::from_packet(packet, apparatus, units, t)?;
    let w = field.width();
    let reach = (field.timing.v_z * (t - field.timing.t_bar)).abs() + R::lit(12.0) * w;
    let z_a = packet.x_a[2];
    let n = (R::lit(2.0) * reach / (w / R::lit(16.0))).ceil().to_usize().unwrap_or(2).max(64);
    Ok(simpson(z_a - reach, z_a + reach, n, |z| (field.z_density(z) - mf.density(z)).abs()))
}
