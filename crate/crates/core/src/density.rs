//! z-resolved spin density matrices of the post-field state, with and
//! without the off-diagonal coherences.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::analytic::SpinorField;
use crate::error::{Error, Result};
use crate::io::{num, CsvTable};
use crate::model::{derive_timing, Apparatus, Branch, GaussianPacket, UnitSystem};
use crate::quad::simpson;
use crate::scalar::{Cplx, Real};

/// Whether the off-diagonal coherences are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Collapsed,
    CollapseFree,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Collapsed => "collapsed",
            Variant::CollapseFree => "collapse_free",
        }
    }
}

/// 2x2 spin density at one z, indexed `[plus, minus]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DensityMatrixZ<R: Real> {
    pub z: R,
    pub entries: [[Cplx<R>; 2]; 2],
    pub variant: Variant,
}

impl<R: Real> DensityMatrixZ<R> {
    pub fn trace(&self) -> R {
        self.entries[0][0].re + self.entries[1][1].re
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> R {
        let e = &self.entries;
        let off = (e[0][1] - e[1][0].conj()).norm();
        off.max(e[0][0].im.abs()).max(e[1][1].im.abs())
    }

    /// Smaller eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> R {
        let e = &self.entries;
        let (a, d) = (e[0][0].re, e[1][1].re);
        let half = R::lit(0.5);
        let mean = half * (a + d);
        let radius = (half * half * (a - d) * (a - d) + e[0][1].norm_sqr()).sqrt();
        mean - radius
    }

    pub fn coherence(&self) -> Cplx<R> {
        self.entries[0][1]
    }
}

/// Density matrix at `z` built from the z-marginal branch amplitudes.
pub fn density_matrix_z<R: Real>(field: &SpinorField<R>, z: R, variant: Variant) -> DensityMatrixZ<R> {
    let a = field.z_amplitude(Branch::Plus, z) * field.packet.chi_plus;
    let b = field.z_amplitude(Branch::Minus, z) * field.packet.chi_minus;
    let zero = Complex::new(R::zero(), R::zero());
    let (pm, mp) = match variant {
        Variant::CollapseFree => (a * b.conj(), b * a.conj()),
        Variant::Collapsed => (zero, zero),
    };
    DensityMatrixZ {
        z,
        entries: [[Complex::new(a.norm_sqr(), R::zero()), pm], [mp, Complex::new(b.norm_sqr(), R::zero())]],
        variant,
    }
}

/// Density matrices along a list of z values.
pub fn z_sweep<R: Real>(field: &SpinorField<R>, zs: &[R], variant: Variant) -> Vec<DensityMatrixZ<R>> {
    zs.iter().map(|&z| density_matrix_z(field, z, variant)).collect()
}

/// CSV with columns `z, rho_pp, rho_mm, re_rho_pm, im_rho_pm, variant`.
pub fn sweep_csv<R: Real>(rows: &[DensityMatrixZ<R>]) -> String {
    let mut t = CsvTable::new(&["z", "rho_pp", "rho_mm", "re_rho_pm", "im_rho_pm", "variant"]);
    for r in rows {
        let pm = r.entries[0][1];
        t.row(&[
            num(r.z),
            num(r.entries[0][0].re),
            num(r.entries[1][1].re),
            num(pm.re),
            num(pm.im),
            r.variant.label().to_string(),
        ]);
    }
    t.finish()
}

/// `|chi_+ chi_-| * integral |phi_+(z) phi_-(z)| dz`, by Simpson quadrature.
///
/// Equals `|chi_+ chi_-|` when the two branches coincide and decays like
/// `exp(-s^2)` with the separation `s` in units of the width.
pub fn coherence_norm<R: Real>(field: &SpinorField<R>) -> R {
    let weight = (field.packet.chi_plus * field.packet.chi_minus).norm();
    if weight == R::zero() {
        return R::zero();
    }
    let c_plus = field.branch_center(Branch::Plus);
    let c_minus = field.branch_center(Branch::Minus);
    let w = field.width();
    let reach = R::lit(12.0) * w;
    let lo = c_plus.min(c_minus) - reach;
    let hi = c_plus.max(c_minus) + reach;
    let n = ((hi - lo) / (w / R::lit(16.0))).ceil().to_usize().unwrap_or(2).max(64);
    let overlap = simpson(lo, hi, n, |z| {
        (field.z_amplitude(Branch::Plus, z) * field.z_amplitude(Branch::Minus, z)).norm()
    });
    weight * overlap
}

/// Copy of `apparatus` whose gradient puts the branches `s` widths apart at
/// time `t`, with everything else unchanged.
pub fn apparatus_for_separation<R: Real>(
    packet: &GaussianPacket<R>,
    apparatus: &Apparatus<R>,
    units: &UnitSystem<R>,
    t: R,
    s: R,
) -> Result<Apparatus<R>> {
    if !(s >= R::zero() && s.is_finite()) {
        return Err(Error::param(format!("separation must be finite and >= 0, got {s}")));
    }
    let timing = derive_timing(&apparatus.with_gradient(R::one()), packet, units)?;
    if !(t > timing.t_bar) {
        return Err(Error::domain(format!("t = {t} must follow the field midpoint {}", timing.t_bar)));
    }
    let width = packet.width_after(units, t - packet.t_prime);
    // v_z is linear in the gradient; timing.v_z is the kick per unit gradient
    let grad = s * width / ((t - timing.t_bar) * timing.v_z);
    Ok(apparatus.with_gradient(grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::evolve_packet;
    use crate::quad::linspace;
    use approx::assert_relative_eq;

    fn field_at(grad: f64, t: f64) -> SpinorField<f64> {
        let packet = GaussianPacket::new(1.0, 0.0, 10.0).unwrap();
        let app = Apparatus::new(0.0, 5.0, 5.5, 55.5, grad).unwrap();
        evolve_packet(&packet, &app, &UnitSystem::default(), t).unwrap()
    }

    #[test]
    fn traces_agree_and_collapsed_is_diagonal() {
        let f = field_at(3.0, 2.0);
        for z in linspace(-10.0, 10.0, 101) {
            let a = density_matrix_z(&f, z, Variant::CollapseFree);
            let b = density_matrix_z(&f, z, Variant::Collapsed);
            assert_eq!(a.trace(), b.trace());
            assert_eq!(b.coherence(), Complex::new(0.0, 0.0));
            assert_eq!(b.entries[1][0], Complex::new(0.0, 0.0));
            assert!(a.hermiticity_defect() <= 1e-12 * a.trace().max(1e-300));
        }
    }

    #[test]
    fn pure_branch_variants_coincide() {
        let packet = GaussianPacket::new(1.0, 0.0, 10.0)
            .unwrap()
            .with_spin(Complex::new(0.0, 1.0), Complex::new(0.0, 0.0))
            .unwrap();
        let app = Apparatus::new(0.0, 5.0, 5.5, 55.5, 20.0).unwrap();
        let f = evolve_packet(&packet, &app, &UnitSystem::default(), 1.0).unwrap();
        for z in linspace(-5.0, 5.0, 21) {
            let a = density_matrix_z(&f, z, Variant::CollapseFree);
            let b = density_matrix_z(&f, z, Variant::Collapsed);
            assert_eq!(a.entries, b.entries);
        }
        assert_eq!(coherence_norm(&f), 0.0);
    }

    #[test]
    fn widely_separated_branches_have_no_midpoint_coherence() {
        let base = field_at(1.0, 2.0);
        let app = apparatus_for_separation(&base.packet, &base.apparatus, &base.units, 2.0, 8.0).unwrap();
        let f = evolve_packet(&base.packet, &app, &base.units, 2.0).unwrap();
        assert_relative_eq!(f.separation(), 8.0, max_relative = 1e-12);
        let peak = density_matrix_z(&f, f.branch_center(Branch::Plus), Variant::CollapseFree).entries[0][0].re;
        let mid = density_matrix_z(&f, 0.0, Variant::CollapseFree);
        assert!(mid.coherence().norm() < 1e-10 * peak);
    }

    #[test]
    fn coherence_matches_gaussian_overlap() {
        let base = field_at(1.0, 2.0);
        for s in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let app = apparatus_for_separation(&base.packet, &base.apparatus, &base.units, 2.0, s).unwrap();
            let f = evolve_packet(&base.packet, &app, &base.units, 2.0).unwrap();
            assert_relative_eq!(coherence_norm(&f), 0.5 * (-s * s).exp(), max_relative = 1e-9, epsilon = 1e-15);
        }
    }

    #[test]
    fn impulsive_limit_keeps_full_coherence_at_exit() {
        // tiny region, same integrated kick
        let packet = GaussianPacket::<f64>::new(1.0, 0.0, 10.0).unwrap();
        let dy = 1e-6;
        let app = Apparatus::new(0.0, 5.0, 5.0 + dy, 55.5, 10.0 * 0.5 / dy).unwrap();
        let units = UnitSystem::default();
        let t_c = derive_timing(&app, &packet, &units).unwrap().t_c;
        let f = evolve_packet(&packet, &app, &units, t_c).unwrap();
        assert!((coherence_norm(&f) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn positive_semidefinite() {
        let f = field_at(50.0, 3.0);
        for z in linspace(-40.0, 40.0, 161) {
            let r = density_matrix_z(&f, z, Variant::CollapseFree);
            assert!(r.min_eigenvalue() >= -1e-10 * r.trace().max(1e-300));
            assert!(r.coherence().norm() <= (r.entries[0][0].re * r.entries[1][1].re).sqrt() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn csv_columns() {
        let f = field_at(1.0, 2.0);
        let csv = sweep_csv(&z_sweep(&f, &[0.0, 1.0], Variant::Collapsed));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "z,rho_pp,rho_mm,re_rho_pm,im_rho_pm,variant");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",collapsed"));
    }
}
