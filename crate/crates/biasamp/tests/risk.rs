use biasamp::fixed_point::{solve_rp_joint, SolverSettings};
use biasamp::risk::*;
use biasamp::spectral::{make_diatomic, make_isotropic, make_power_law, JointSpectrum};
use biasamp::{Group, NoiseAndRegularization, ScalingRegime};
use proptest::prelude::*;

fn st() -> SolverSettings {
    SolverSettings::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn noise(s1: f64, s2: f64, lam: f64) -> NoiseAndRegularization {
    NoiseAndRegularization::uniform(s1, s2, lam).unwrap()
}

#[test]
fn h_functional_basics() {
    let s = make_power_law(20, 1.4, 0.7, 1.0, 1.0).unwrap();
    let r = ScalingRegime::new(0.4, 0.8, 1.1).unwrap();
    let b = s.sigma1().to_vec();
    let c = solve_rp_joint(&s, &r, 0.1, &b, &st()).unwrap();
    let zero = vec![0.0; 20];
    for k in 1..=4 {
        for j in Group::BOTH {
            assert_eq!(h_joint(k, j, &zero, &b, &c, &s, &r).unwrap(), 0.0);
        }
    }
    assert!(h_joint(2, Group::One, &b, s.sigma2(), &c, &s, &r).is_err());
    assert!(h_joint(5, Group::One, &b, &b, &c, &s, &r).is_err());

    let big = solve_rp_joint(&s, &r, 1e10, &b, &st()).unwrap();
    assert!(h_joint(1, Group::One, s.theta(), &b, &big, &s, &r).unwrap().abs() < 1e-9);
}

#[test]
fn h_functionals_symmetric_under_group_swap() {
    let base = make_power_law(25, 1.4, 0.7, 1.0, 1.0).unwrap();
    let s = JointSpectrum::new(base.sigma1().to_vec(), base.sigma1().to_vec(), vec![1.0; 25], vec![0.0; 25]).unwrap();
    let r = ScalingRegime::new(0.5, 0.9, 1.3).unwrap();
    let b = s.sigma1().to_vec();
    let c = solve_rp_joint(&s, &r, 0.05, &b, &st()).unwrap();
    for k in 1..=4 {
        let a = h_joint(k, Group::One, s.theta(), &b, &c, &s, &r).unwrap();
        let z = h_joint(k, Group::Two, s.theta(), &b, &c, &s, &r).unwrap();
        assert!((a - z).abs() <= 1e-14 * a.abs().max(1.0), "k={k}: {a} vs {z}");
    }
}

#[test]
fn fully_symmetric_groups_have_equal_joint_risks() {
    let s = make_power_law(30, 1.2, 0.3, 1.0, 1.0).unwrap();
    let s = JointSpectrum::new(s.sigma1().to_vec(), s.sigma1().to_vec(), vec![1.0; 30], vec![0.0; 30]).unwrap();
    let r = ScalingRegime::new(0.5, 0.7, 1.6).unwrap();
    let nz = noise(0.8, 0.8, 1e-3);
    let r1 = rp_joint_risk(&s, &r, &nz, Group::One, &st()).unwrap();
    let r2 = rp_joint_risk(&s, &r, &nz, Group::Two, &st()).unwrap();
    assert!((r1.total - r2.total).abs() < 1e-12);
    let c1 = classical_joint_risk(&s, &r, &nz, Group::One, &st()).unwrap();
    let c2 = classical_joint_risk(&s, &r, &nz, Group::Two, &st()).unwrap();
    assert!((c1.total - c2.total).abs() < 1e-12);
}

#[test]
fn group_swap_equivariance() {
    let s = make_power_law(30, 1.2, 0.3, 1.0, 0.0).unwrap();
    let s = JointSpectrum::new(s.sigma1().to_vec(), s.sigma2().to_vec(), vec![1.5; 30], vec![0.0; 30]).unwrap();
    let sw = s.swapped().unwrap();
    let r = ScalingRegime::new(0.3, 0.7, 1.6).unwrap();
    let rs = ScalingRegime::new(0.7, 0.7, 1.6).unwrap();
    let nz = noise(0.5, 1.2, 1e-2);
    let nzs = noise(1.2, 0.5, 1e-2);
    for (a, b) in [(Group::One, Group::Two), (Group::Two, Group::One)] {
        let x = rp_joint_risk(&s, &r, &nz, a, &st()).unwrap().total;
        let y = rp_joint_risk(&sw, &rs, &nzs, b, &st()).unwrap().total;
        assert!(rel(x, y) < 1e-10, "{x} vs {y}");
        let x = classical_joint_risk(&s, &r, &nz, a, &st()).unwrap().total;
        let y = classical_joint_risk(&sw, &rs, &nzs, b, &st()).unwrap().total;
        assert!(rel(x, y) < 1e-10);
        let x = rp_separate_risk(&s, &r, &nz, a, &st()).unwrap().total;
        let y = rp_separate_risk(&sw, &rs, &nzs, b, &st()).unwrap().total;
        assert!(rel(x, y) < 1e-10);
    }
}

#[test]
fn separate_unregularized_isotropic_interpolating() {
    let s = make_isotropic(5, 1.0, 1.0, 1.0, 0.0).unwrap();
    let r = ScalingRegime::new(0.5, 0.125, 0.25).unwrap();
    let got = rp_separate_risk(&s, &r, &noise(1.0, 1.0, 1e-8), Group::One, &st()).unwrap();
    assert!((got.variance - 1.0 / 3.0).abs() < 1e-6 && got.bias < 1e-6, "{got:?}");
    let cf = rp_separate_risk_unregularized(&s, &r, 1.0, Group::One, &st()).unwrap();
    assert!((cf.variance - 1.0 / 3.0).abs() < 1e-15 && cf.bias == 0.0);
}

#[test]
fn separate_unregularized_narrow_projection() {
    // ψ_s = γ = 0.5 (φ_s = 1), isotropic: θ₀ = 1, V = ψ_s/(1−ψ_s) = 1,
    // B = θ₀ tr̄ΘΣ(Σ+θ₀)⁻¹/(1−ψ_s) = 1·(1/2)/(1/2) = 1.
    let s = make_isotropic(5, 1.0, 1.0, 1.0, 0.0).unwrap();
    let r = ScalingRegime::new(0.5, 0.5, 0.25).unwrap();
    let cf = rp_separate_risk_unregularized(&s, &r, 1.0, Group::One, &st()).unwrap();
    assert!((cf.variance - 1.0).abs() < 1e-12 && (cf.bias - 1.0).abs() < 1e-9, "{cf:?}");
    let got = rp_separate_risk(&s, &r, &noise(1.0, 1.0, 1e-8), Group::One, &st()).unwrap();
    assert!(rel(got.total, cf.total) < 1e-3);
}

#[test]
fn separate_unregularized_overparam_matches_solver() {
    // ψ_s = 2, φ_s = 2, γ = 1.
    let s = make_isotropic(5, 1.0, 1.0, 1.0, 0.0).unwrap();
    let r = ScalingRegime::new(0.5, 1.0, 1.0).unwrap();
    let cf = rp_separate_risk_unregularized(&s, &r, 1.0, Group::One, &st()).unwrap();
    let got = rp_separate_risk(&s, &r, &noise(1.0, 1.0, 1e-8), Group::One, &st()).unwrap();
    assert!(rel(got.bias, cf.bias) < 1e-3 && rel(got.variance, cf.variance) < 1e-3, "{got:?} {cf:?}");
}

#[test]
fn large_lambda_is_null_model() {
    let s = make_diatomic(20, 0.5, 2.0, 1.0, 0.3, 1.3, 0.4).unwrap();
    let r = ScalingRegime::new(0.4, 0.6, 1.3).unwrap();
    let nz = noise(1.0, 2.0, 1e10);
    for g in Group::BOTH {
        let null = s.tr(|e| e.theta_s(g) * e.sigma(g)).unwrap();
        for risk in [
            rp_separate_risk(&s, &r, &nz, g, &st()).unwrap(),
            rp_joint_risk(&s, &r, &nz, g, &st()).unwrap(),
            classical_joint_risk(&s, &r, &nz, g, &st()).unwrap(),
            classical_separate_risk(&s, r.phi_s(g), 1e10, 1.0, g, &st()).unwrap(),
        ] {
            assert!(risk.variance < 1e-8, "{risk:?}");
            assert!(rel(risk.bias, null) < 1e-6, "{risk:?} vs {null}");
        }
    }
}

#[test]
fn classical_separate_closed_forms() {
    let s = make_isotropic(4, 1.0, 1.0, 1.0, 0.0).unwrap();
    for (phi, v) in [(0.5, 1.0), (0.25, 1.0 / 3.0)] {
        let r = classical_separate_risk(&s, phi, 0.0, 1.0, Group::One, &st()).unwrap();
        assert!((r.variance - v).abs() < 1e-15 && r.bias == 0.0, "{r:?}");
    }
}

#[test]
fn classical_joint_tends_to_separate() {
    let s = make_power_law(40, 1.3, 0.6, 1.0, 1.0).unwrap();
    let r = ScalingRegime::new(1e-4, 0.6, 1.0).unwrap();
    let nz = noise(1.0, 0.7, 0.05);
    let j = classical_joint_risk(&s, &r, &nz, Group::Two, &st()).unwrap();
    let sp = classical_separate_risk(&s, r.phi_s(Group::Two), 0.05, 0.7, Group::Two, &st()).unwrap();
    assert!(rel(j.variance, sp.variance) < 1e-3 && rel(j.bias, sp.bias) < 1e-3, "{j:?} {sp:?}");
}

#[test]
fn classical_joint_bias_without_shift_is_ridge_shrinkage_term() {
    // Δ = 0: only λ² tr̄ Θ_s (p₁u₁Σ₁ + p₂u₂Σ₂ + Σ_s) K⁻² remains.
    let s = make_power_law(30, 1.3, 0.6, 1.0, 1.0).unwrap();
    let s = JointSpectrum::new(s.sigma1().to_vec(), s.sigma2().to_vec(), vec![1.2; 30], vec![0.0; 30]).unwrap();
    let r = ScalingRegime::new(0.35, 0.9, 1.0).unwrap();
    let lam = 0.07;
    let c = biasamp::fixed_point::solve_classical_joint(&s, &r, lam, &st()).unwrap();
    for g in Group::BOTH {
        let (u1, u2) = (c.u(g, Group::One), c.u(g, Group::Two));
        let want = lam * lam
            * s.tr(|e| {
                let k = r.p1 * c.e1 * e.sigma1 + r.p2() * c.e2 * e.sigma2 + lam;
                e.theta * (r.p1 * u1 * e.sigma1 + r.p2() * u2 * e.sigma2 + e.sigma(g)) / (k * k)
            })
            .unwrap();
        let got = classical_joint_risk(&s, &r, &noise(1.0, 1.0, lam), g, &st()).unwrap();
        assert!(rel(got.bias, want) < 1e-12);
    }
}

#[test]
fn rp_joint_limit_chain() {
    let s = make_power_law(40, 1.3, 0.6, 1.0, 1.0).unwrap();
    let nz = noise(0.9, 0.4, 0.02);
    for (p, tol) in [(0.999, 1e-2), (0.9999, 1e-3)] {
        let r = ScalingRegime::new(p, 0.7, 1.3).unwrap();
        let j = rp_joint_risk(&s, &r, &nz, Group::One, &st()).unwrap();
        let sp = rp_separate_risk(&s, &r, &nz, Group::One, &st()).unwrap();
        assert!(rel(j.bias, sp.bias) < tol && rel(j.variance, sp.variance) < tol, "{j:?} {sp:?}");
    }
}

#[test]
fn fig1_edd_peaks_at_interpolation_threshold() {
    let s = make_isotropic(100, 2.0, 1.0, 2.0, 1.0).unwrap();
    let nz = noise(1.0, 1.0, 1e-6);
    let grid: Vec<f64> = (0..41).map(|i| 10f64.powf(-1.0 + i as f64 * 0.05)).collect();
    let edd: Vec<f64> = grid
        .iter()
        .map(|&psi| {
            let r = ScalingRegime::new(0.5, 0.75, psi).unwrap();
            let a = rp_separate_risk(&s, &r, &nz, Group::One, &st()).unwrap().total;
            let b = rp_separate_risk(&s, &r, &nz, Group::Two, &st()).unwrap().total;
            (b - a).abs()
        })
        .collect();
    let arg = (0..grid.len()).max_by(|&i, &j| edd[i].total_cmp(&edd[j])).unwrap();
    assert!((grid[arg] / 0.5).ln().abs() < 0.05 * 10f64.ln() * 1.01, "argmax at {}", grid[arg]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn risks_are_nonnegative(
        d in 1usize..25,
        vals in prop::collection::vec(0.05f64..4.0, 100),
        p1 in 0.1f64..0.9, phi in 0.1f64..3.0, psi in 0.1f64..3.0, loglam in -6.0f64..1.0,
    ) {
        let s = JointSpectrum::new(vals[..d].to_vec(), vals[25..25 + d].to_vec(), vals[50..50 + d].to_vec(), vals[75..75 + d].to_vec()).unwrap();
        let r = ScalingRegime::new(p1, phi, psi).unwrap();
        let nz = noise(0.7, 1.3, 10f64.powf(loglam));
        let st = SolverSettings { max_iter: 500_000, ..SolverSettings::default() };
        for g in Group::BOTH {
            for risk in [
                rp_joint_risk(&s, &r, &nz, g, &st).unwrap(),
                rp_separate_risk(&s, &r, &nz, g, &st).unwrap(),
                classical_joint_risk(&s, &r, &nz, g, &st).unwrap(),
            ] {
                prop_assert!(risk.bias >= 0.0 && risk.variance >= 0.0);
                prop_assert_eq!(risk.total, risk.bias + risk.variance);
            }
            if r.phi_s(g) < 0.95 || nz.lambda1 > 1e-3 {
                let c = classical_separate_risk(&s, r.phi_s(g), nz.lambda_s(g), nz.sigma_sq(g), g, &st).unwrap();
                prop_assert!(c.bias >= 0.0 && c.variance >= 0.0);
            }
        }
    }

    #[test]
    fn add_identity(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0, e in 0.0f64..10.0) {
        let m = metrics(a, b, c, e).unwrap();
        prop_assert_eq!(m.odd, m.signed_odd.abs());
        if let Some(add) = m.add {
            prop_assert!((add * m.edd - m.odd).abs() <= 4.0 * f64::EPSILON * m.odd.max(f64::MIN_POSITIVE));
        } else {
            prop_assert!(m.edd < EDD_ZERO);
        }
    }
}
