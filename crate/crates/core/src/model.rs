//! Units, apparatus geometry, the initial wave packet and the kinematic
//! quantities derived from them.
//!
//! Sign convention: the magnetic moment is `mu = -mu_b * sigma`, so the
//! spin-up component (`chi_plus`, [`Branch::Plus`]) feels the potential
//! `+mu_b * B' * z` and is deflected toward `-z` when `B' > 0`. Every module
//! goes through [`Branch::kick_sign`] / [`Branch::potential_sign`] so the
//! convention lives in exactly one place.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Cplx, Real};

/// Physical constants in the chosen unit system. Defaults are all 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct UnitSystem<R: Real> {
    pub hbar: R,
    pub mass: R,
    pub mu_b: R,
}

impl<R: Real> Default for UnitSystem<R> {
    fn default() -> Self {
        Self { hbar: R::one(), mass: R::one(), mu_b: R::one() }
    }
}

impl<R: Real> UnitSystem<R> {
    pub fn new(hbar: R, mass: R, mu_b: R) -> Result<Self> {
        let units = Self { hbar, mass, mu_b };
        units.validate()?;
        Ok(units)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("mass", self.mass), ("mu_b", self.mu_b)] {
            if !(v.is_finite() && v > R::zero()) {
                return Err(Error::param(format!("units.{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Spin component along z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    /// Sign of the z-velocity kick received by this branch for `B' > 0`.
    pub fn kick_sign<R: Real>(self) -> R {
        match self {
            Branch::Plus => -R::one(),
            Branch::Minus => R::one(),
        }
    }

    /// Sign `s` in the branch potential `V = s * mu_b * B' * z`.
    pub fn potential_sign<R: Real>(self) -> R {
        -self.kick_sign::<R>()
    }

    /// Moment along z carried by this branch: `-mu_b` for spin up.
    pub fn moment<R: Real>(self, units: &UnitSystem<R>) -> R {
        self.kick_sign::<R>() * units.mu_b
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

/// Stern-Gerlach geometry along the beam axis y.
///
/// The field is `B_z = grad_bz * z` for `y_b <= y < y_c` and zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Apparatus<R: Real> {
    pub y_a: R,
    pub y_b: R,
    pub y_c: R,
    pub y_d: R,
    pub grad_bz: R,
}

impl<R: Real> Apparatus<R> {
    pub fn new(y_a: R, y_b: R, y_c: R, y_d: R, grad_bz: R) -> Result<Self> {
        let app = Self { y_a, y_b, y_c, y_d, grad_bz };
        app.validate()?;
        Ok(app)
    }

    pub fn validate(&self) -> Result<()> {
        if !all_finite(&[self.y_a, self.y_b, self.y_c, self.y_d, self.grad_bz]) {
            return Err(Error::param("apparatus values must be finite"));
        }
        if !(self.y_a < self.y_b && self.y_b < self.y_c && self.y_c < self.y_d) {
            return Err(Error::InvalidGeometry(format!(
                "need y_a < y_b < y_c < y_d, got {} {} {} {}",
                self.y_a, self.y_b, self.y_c, self.y_d
            )));
        }
        Ok(())
    }

    /// Length of the interaction region.
    pub fn dy(&self) -> R {
        self.y_c - self.y_b
    }

    /// Centre of the interaction region.
    pub fn y_bar(&self) -> R {
        (self.y_b + self.y_c) / R::lit(2.0)
    }

    /// Same apparatus with a different gradient.
    pub fn with_gradient(mut self, grad_bz: R) -> Self {
        self.grad_bz = grad_bz;
        self
    }

    /// Rigid translation of every plane along y.
    pub fn translated(mut self, dy: R) -> Self {
        self.y_a += dy;
        self.y_b += dy;
        self.y_c += dy;
        self.y_d += dy;
        self
    }

    pub fn field_at(&self, y: R, z: R) -> R {
        if y >= self.y_b && y < self.y_c {
            self.grad_bz * z
        } else {
            R::zero()
        }
    }
}

/// Minimum-uncertainty Gaussian moving along +y, with a spin-1/2 part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GaussianPacket<R: Real> {
    pub sigma: R,
    pub x_a: [R; 3],
    pub k_y: R,
    pub chi_plus: Cplx<R>,
    pub chi_minus: Cplx<R>,
    pub t_prime: R,
}

impl<R: Real> GaussianPacket<R> {
    /// Packet at `(0, y_a, 0)` emitted at `t' = 0` in the `+x` spin state.
    pub fn new(sigma: R, y_a: R, k_y: R) -> Result<Self> {
        let h = R::FRAC_1_SQRT_2();
        let packet = Self {
            sigma,
            x_a: [R::zero(), y_a, R::zero()],
            k_y,
            chi_plus: Complex::new(h, R::zero()),
            chi_minus: Complex::new(h, R::zero()),
            t_prime: R::zero(),
        };
        packet.validate()?;
        Ok(packet)
    }

    pub fn with_spin(mut self, chi_plus: Cplx<R>, chi_minus: Cplx<R>) -> Result<Self> {
        self.chi_plus = chi_plus;
        self.chi_minus = chi_minus;
        self.validate()?;
        Ok(self)
    }

    /// Spin pointing along polar angle `beta` and azimuth `alpha`.
    pub fn with_orientation(self, beta: R, alpha: R) -> Result<Self> {
        let half = beta / R::lit(2.0);
        let up = Complex::new(half.cos(), R::zero());
        let down = Complex::from_polar(half.sin(), alpha);
        self.with_spin(up, down)
    }

    pub fn with_sigma(mut self, sigma: R) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn chi(&self, branch: Branch) -> Cplx<R> {
        match branch {
            Branch::Plus => self.chi_plus,
            Branch::Minus => self.chi_minus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.sigma,
            self.x_a[0],
            self.x_a[1],
            self.x_a[2],
            self.k_y,
            self.t_prime,
            self.chi_plus.re,
            self.chi_plus.im,
            self.chi_minus.re,
            self.chi_minus.im,
        ];
        if !all_finite(&scalars) {
            return Err(Error::param("packet values must be finite"));
        }
        if self.sigma <= R::zero() {
            return Err(Error::param(format!("packet.sigma must be > 0, got {}", self.sigma)));
        }
        if self.k_y <= R::zero() {
            return Err(Error::param(format!("packet.k_y must be > 0, got {}", self.k_y)));
        }
        let norm = self.chi_plus.norm_sqr() + self.chi_minus.norm_sqr();
        let tol = R::lit(1e-9).max(R::epsilon() * R::lit(100.0));
        if (norm - R::one()).abs() > tol {
            return Err(Error::param(format!("spinor must be normalised, |chi|^2 = {norm}")));
        }
        Ok(())
    }

    /// Momentum along the beam axis, `hbar * k_y`.
    pub fn p_y(&self, units: &UnitSystem<R>) -> R {
        units.hbar * self.k_y
    }

    /// Beam speed `hbar * k_y / m`.
    pub fn speed(&self, units: &UnitSystem<R>) -> R {
        self.p_y(units) / units.mass
    }

    /// Dispersion factor `f(s) = 1 + i hbar s / (m sigma^2)`.
    pub fn dispersion(&self, units: &UnitSystem<R>, s: R) -> Cplx<R> {
        Complex::new(R::one(), units.hbar * s / (units.mass * self.sigma * self.sigma))
    }

    /// Width `sigma * |f(s)|` of the packet after free flight for time `s`.
    pub fn width_after(&self, units: &UnitSystem<R>, s: R) -> R {
        self.sigma * self.dispersion(units, s).norm()
    }
}

/// Timing and kick quantities of one pass through the apparatus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Timing<R: Real> {
    pub t_b: R,
    pub t_c: R,
    pub t_bar: R,
    pub dt: R,
    pub dy: R,
    pub v: R,
    pub v_z: R,
    pub lever_arm: R,
    pub flight_time: R,
    pub z_max: R,
}

impl<R: Real> Timing<R> {
    /// Time at which the beam centre reaches the detection plane.
    pub fn t_d(&self) -> R {
        self.t_bar + self.flight_time
    }

    /// Angular deflection `m v_z / p_y`, which is `v_z / v`.
    pub fn delta_theta(&self) -> R {
        self.v_z / self.v
    }

    /// `z_max` computed through the lever arm instead of the flight time.
    pub fn z_max_via_angle(&self) -> R {
        self.lever_arm * self.delta_theta()
    }

    /// Dimensionless split parameter `mu_b B' dt sigma / hbar`.
    pub fn kappa(&self, units: &UnitSystem<R>, sigma: R) -> R {
        units.mass * self.v_z * sigma / units.hbar
    }
}

/// Post-interaction z velocity `(dy / p_y) * mu_b * B'`.
pub fn kick_velocity<R: Real>(
    apparatus: &Apparatus<R>,
    packet: &GaussianPacket<R>,
    units: &UnitSystem<R>,
) -> Result<R> {
    let p_y = packet.p_y(units);
    if p_y == R::zero() || !p_y.is_finite() {
        return Err(Error::domain(format!("kick velocity needs p_y != 0, got {p_y}")));
    }
    apparatus.validate()?;
    units.validate()?;
    Ok(apparatus.dy() / p_y * units.mu_b * apparatus.grad_bz)
}

/// Entry/exit times, transit time, kick and maximum classical deflection.
pub fn derive_timing<R: Real>(
    apparatus: &Apparatus<R>,
    packet: &GaussianPacket<R>,
    units: &UnitSystem<R>,
) -> Result<Timing<R>> {
    units.validate()?;
    apparatus.validate()?;
    packet.validate()?;
    let y_src = packet.x_a[1];
    let scale = R::one().max(apparatus.y_a.abs());
    if (y_src - apparatus.y_a).abs() > R::lit(1e-9).max(R::epsilon() * R::lit(100.0)) * scale {
        return Err(Error::InvalidGeometry(format!(
            "packet source y = {y_src} does not match apparatus.y_a = {}",
            apparatus.y_a
        )));
    }
    let v = packet.speed(units);
    let dy = apparatus.dy();
    let t_b = packet.t_prime + (apparatus.y_b - apparatus.y_a) / v;
    let t_c = packet.t_prime + (apparatus.y_c - apparatus.y_a) / v;
    let v_z = kick_velocity(apparatus, packet, units)?;
    let lever_arm = apparatus.y_d - apparatus.y_bar();
    let flight_time = lever_arm * units.mass / packet.p_y(units);
    let timing = Timing {
        t_b,
        t_c,
        t_bar: (t_b + t_c) / R::lit(2.0),
        dt: dy / v,
        dy,
        v,
        v_z,
        lever_arm,
        flight_time,
        z_max: (v_z * flight_time).abs(),
    };
    let derived = [timing.t_b, timing.t_c, timing.v_z, timing.z_max, timing.flight_time];
    if !all_finite(&derived) {
        return Err(Error::param("derived timing is not finite"));
    }
    Ok(timing)
}
