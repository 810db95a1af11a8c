use num_complex::Complex;
use proptest::prelude::*;

use sternpath::analytic::{evolve_packet, sg_kernel, ZKernelParams};
use sternpath::classical::{classical_ensemble, ClassicalPath};
use sternpath::density::{density_matrix_z, Variant};
use sternpath::experiments::{backtrack_collapse, detector_times, recombine};
use sternpath::histogram::{fill_parallel, BinSpec};
use sternpath::meanfield::meanfield_evolve;
use sternpath::model::Branch;
use sternpath::oracle::{split_step_evolve, FieldSchedule, Grid1D, GridState};
use sternpath::quad::linspace;
use sternpath::{derive_timing, Apparatus, GaussianPacket, UnitSystem};

fn geometry() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    // y_b - y_a, dy, lever beyond y_c, gradient
    (0.5..20.0f64, 0.05..5.0f64, 1.0..100.0f64, -50.0..50.0f64)
}

fn build(gap: f64, dy: f64, tail: f64, grad: f64, k_y: f64) -> (GaussianPacket, Apparatus) {
    let p = GaussianPacket::new(1.0, 0.0, k_y).unwrap();
    let a = Apparatus::new(0.0, gap, gap + dy, gap + dy + tail, grad).unwrap();
    (p, a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn z_max_two_ways((gap, dy, tail, grad) in geometry(), k_y in 1.0..50.0f64) {
        let (p, a) = build(gap, dy, tail, grad, k_y);
        let tm = derive_timing(&a, &p, &UnitSystem::default()).unwrap();
        let via_angle = tm.z_max_via_angle().abs();
        prop_assert!((tm.z_max - via_angle).abs() <= 1e-12 * tm.z_max.max(f64::MIN_POSITIVE));
        prop_assert!(tm.z_max >= 0.0);
        prop_assert!((tm.dt - tm.dy / tm.v).abs() <= 1e-14 * tm.dt);
    }

    #[test]
    fn lengths_and_times_rescale_z_max((gap, dy, tail, grad) in geometry(), lambda in 0.1..10.0f64) {
        let u = UnitSystem::default();
        let (p, a) = build(gap, dy, tail, grad, 10.0);
        // lengths times lambda at fixed speed; the gradient is a field per length
        let (q, b) = build(gap * lambda, dy * lambda, tail * lambda, grad / lambda, 10.0);
        let t1 = derive_timing(&a, &p, &u).unwrap();
        let t2 = derive_timing(&b, &q, &u).unwrap();
        prop_assert!((t2.z_max - lambda * t1.z_max).abs() <= 1e-12 * t2.z_max.max(1e-300));
        prop_assert!((t2.t_c - lambda * t1.t_c).abs() <= 1e-12 * t2.t_c);
    }

    #[test]
    fn classical_path_is_continuous((gap, dy, tail, grad) in geometry(), mu in -1.0..1.0f64) {
        let u = UnitSystem::default();
        let (p, a) = build(gap, dy, tail, grad, 10.0);
        let path = ClassicalPath::new(mu, &a, &p, &u).unwrap();
        let tm = derive_timing(&a, &p, &u).unwrap();
        for t in [tm.t_b, tm.t_c] {
            let eps = 1e-9 * t;
            let (l, r) = (path.at(t - eps).unwrap(), path.at(t + eps).unwrap());
            prop_assert!((l.z - r.z).abs() <= 1e-6 * (1.0 + l.z.abs()));
            prop_assert!((l.p_z - r.p_z).abs() <= 1e-6 * (1.0 + l.p_z.abs()));
        }
        // starting at rest, the displacement across the field is F dt^2 / 2m
        let dz = path.exit().z - path.entry().z;
        let expected = mu * grad * tm.dt * tm.dt / 2.0;
        prop_assert!((dz - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn ensemble_stays_inside_reach((gap, dy, tail, grad) in geometry(), seed in any::<u64>()) {
        let u = UnitSystem::default();
        let (p, a) = build(gap, dy, tail, grad, 10.0);
        let z_max = derive_timing(&a, &p, &u).unwrap().z_max;
        let bins = BinSpec::symmetric(z_max.max(1e-9), 20).unwrap();
        let h = classical_ensemble(5_000, seed, &a, &p, &u, &bins).unwrap();
        prop_assert_eq!(h.underflow + h.overflow, 0);
        prop_assert!(h.is_consistent());
    }

    #[test]
    fn histogram_totals_add_up(n in 1usize..200_000, seed in any::<u64>()) {
        let spec = BinSpec::new(-1.0, 1.0, 17).unwrap();
        let h = fill_parallel(n, seed, &spec, |rng| {
            use rand::Rng;
            rng.random::<f64>() * 3.0 - 1.5
        }).unwrap();
        prop_assert_eq!(h.n_total, n as u64);
        prop_assert!(h.is_consistent());
    }

    #[test]
    fn kernel_parity(z in -20.0..20.0f64, zp in -20.0..20.0f64, v_z in -5.0..5.0f64, frac in 0.0..1.0f64) {
        let u = UnitSystem::default();
        let plus = ZKernelParams { t: 3.0, t_prime: 0.5, t_bar: 0.5 + 2.5 * frac, v_z, branch: Branch::Plus };
        let minus = ZKernelParams { branch: Branch::Minus, ..plus };
        let a = sg_kernel(&plus, &u, z, zp).unwrap();
        let b = sg_kernel(&minus, &u, -z, -zp).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn density_matrices_are_physical(
        (gap, dy, tail, grad) in geometry(),
        beta in 0.0..std::f64::consts::PI,
        alpha in 0.0..std::f64::consts::TAU,
        dt_after in 0.0..20.0f64,
        z in -100.0..100.0f64,
    ) {
        let u = UnitSystem::default();
        let (p, a) = build(gap, dy, tail, grad, 10.0);
        let p = p.with_orientation(beta, alpha).unwrap();
        let t_c = derive_timing(&a, &p, &u).unwrap().t_c;
        let field = evolve_packet(&p, &a, &u, t_c + dt_after).unwrap();
        let free = density_matrix_z(&field, z, Variant::CollapseFree);
        let col = density_matrix_z(&field, z, Variant::Collapsed);
        prop_assert_eq!(free.trace(), col.trace());
        let scale = free.trace().max(f64::MIN_POSITIVE);
        prop_assert!(free.hermiticity_defect() <= 1e-12 * scale);
        prop_assert!(free.min_eigenvalue() >= -1e-10 * scale);
        // squared magnitudes underflow before their product does
        let bound = (field.z_amplitude(Branch::Plus, z) * p.chi_plus).norm()
            * (field.z_amplitude(Branch::Minus, z) * p.chi_minus).norm();
        prop_assert!(free.coherence().norm() <= bound * (1.0 + 1e-12));
        prop_assert_eq!(col.coherence(), Complex::new(0.0, 0.0));
    }

    #[test]
    fn collapse_point_moves_with_the_apparatus((gap, dy, tail, grad) in geometry(), shift in -50.0..50.0f64) {
        prop_assume!(grad.abs() > 1e-3);
        let u = UnitSystem::default();
        let (p, a) = build(gap, dy, tail, grad, 10.0);
        let times = detector_times(&p, &a, &u, 4).unwrap();
        let r1 = backtrack_collapse(&p, &a, &u, &times).unwrap();
        let mut q = p;
        q.x_a[1] += shift;
        let b = a.translated(shift);
        let r2 = backtrack_collapse(&q, &b, &u, &times).unwrap();
        prop_assert!((r2.y_collapse - shift - r1.y_collapse).abs() <= 1e-6 * dy);
        prop_assert!(r1.residual >= 0.0);
    }

    #[test]
    fn fidelity_falls_with_phase_error(grad in 0.0..20.0f64, gap in 0.5..10.0f64, d1 in 0.0..std::f64::consts::PI, d2 in 0.0..std::f64::consts::PI) {
        let u = UnitSystem::default();
        let p = GaussianPacket::new(1.0, 0.0, 10.0).unwrap();
        let s1 = Apparatus::new(0.0, 5.0, 5.5, 100.0, grad).unwrap();
        let s2 = Apparatus::new(0.0, 5.5 + gap, 6.0 + gap, 100.0, -grad).unwrap();
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let f_lo = recombine(&p, &s1, Some(&s2), &u, lo).unwrap().fidelity;
        let f_hi = recombine(&p, &s1, Some(&s2), &u, -hi).unwrap().fidelity;
        prop_assert!(f_hi <= f_lo + 1e-15);
        prop_assert!((0.0..=1.0).contains(&f_lo));
    }

    #[test]
    fn meanfield_density_has_one_peak(beta in 0.0..std::f64::consts::PI, grad in -200.0..200.0f64) {
        let u = UnitSystem::default();
        let (p, a) = build(5.0, 0.5, 50.0, grad, 10.0);
        let mf = meanfield_evolve(beta, &p, &a, &u, 5.55).unwrap();
        let zs = linspace(-120.0, 120.0, 2401);
        let ys: Vec<f64> = zs.iter().map(|&z| mf.density(z)).collect();
        let floor = 1e-12 * ys.iter().copied().fold(0.0, f64::max);
        let maxima = (1..ys.len() - 1)
            .filter(|&i| ys[i] > floor && ys[i] > ys[i - 1] && ys[i] >= ys[i + 1])
            .count();
        prop_assert_eq!(maxima, 1);
        prop_assert!(mf.mu_z_avg.abs() <= u.mu_b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn grid_steps_conserve_norm_and_decouple(grad in -100.0..100.0f64, dt in 0.001..0.2f64, phase in 0.0..6.0f64) {
        let u = UnitSystem::default();
        let p = GaussianPacket::new(1.0, 0.0, 10.0).unwrap();
        let a = Apparatus::new(0.0, 5.0, 5.5, 55.5, grad).unwrap();
        let sched = FieldSchedule::from_apparatus(&a, &p, &u, false).unwrap();
        let grid = Grid1D::centered(0.0, 60.0, 1024).unwrap();
        let start = GridState::from_packet(&p, grid).unwrap();
        let mut other = start.clone();
        for (j, v) in other.psi_minus.iter_mut().enumerate() {
            *v *= Complex::from_polar(1.0, phase * j as f64 / 1024.0);
        }
        let mut s = start.clone();
        let mut o = other;
        let steps = ((1.0 / dt).ceil() as usize).min(200);
        for _ in 0..steps {
            let next = split_step_evolve(&s, &sched, &u, dt, 1).unwrap();
            prop_assert!((next.norm() - s.norm()).abs() <= 1e-12);
            s = next;
            o = split_step_evolve(&o, &sched, &u, dt, 1).unwrap();
        }
        prop_assert_eq!(&s.psi_plus, &o.psi_plus);
        prop_assert!((s.norm() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn f32_scalar_runs_end_to_end() {
    let u = sternpath::model::UnitSystem::<f32>::default();
    let p = sternpath::model::GaussianPacket::<f32>::new(1.0, 0.0, 10.0).unwrap();
    let a = sternpath::model::Apparatus::<f32>::new(0.0, 5.0, 5.5, 55.5, 200.0).unwrap();
    let tm = derive_timing(&a, &p, &u).unwrap();
    assert!((tm.z_max - 50.25).abs() < 1e-3);
    let field = evolve_packet(&p, &a, &u, 5.55f32).unwrap();
    assert!((field.branch_center(Branch::Plus) + 50.25).abs() < 1e-3);
    let grid = Grid1D::<f32>::centered(0.0, 100.0, 4096).unwrap();
    let sched = FieldSchedule::from_apparatus(&a, &p, &u, false).unwrap();
    let end = sternpath::oracle::evolve_to(&GridState::from_packet(&p, grid).unwrap(), &sched, &u, 5.55, 1e-2).unwrap();
    assert!((end.norm() - 1.0).abs() < 1e-4);
    assert!((end.mean_z(Branch::Minus) - 50.25).abs() < 1e-2);
}
