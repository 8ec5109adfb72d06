use num_complex::Complex64;
use phasemem::operator::*;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Modes {
    reg: ModeRegistry,
    so1: ModeLabel,
    so2: ModeLabel,
    io1: ModeLabel,
}

fn modes() -> Modes {
    let mut reg = ModeRegistry::new();
    let so1 = reg.register("so1", ModeRole::SignalVacuum, 808e-9).unwrap();
    let so2 = reg.register("so2", ModeRole::SignalVacuum, 808e-9).unwrap();
    let io1 = reg.register("io1", ModeRole::IdlerVacuum, 632e-9).unwrap();
    Modes { reg, so1, so2, io1 }
}

fn gain() -> impl Strategy<Value = Complex64> {
    (0.0..0.099f64, -3.2..3.2f64).prop_map(|(m, ph)| Complex64::from_polar(m, ph))
}

fn unit_phase() -> impl Strategy<Value = Complex64> {
    (-3.2..3.2f64).prop_map(|ph| Complex64::from_polar(1.0, ph))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

proptest! {
    #[test]
    fn first_crystal_commutator_is_one_minus_gain_squared(k in gain()) {
        let m = modes();
        let (s, i) = spdc(&OperatorExpansion::annihilation(&m.so1), &OperatorExpansion::annihilation(&m.io1), k).unwrap();
        prop_assert!(close(s.commutator_norm(), 1.0 - k.norm_sqr(), 1e-12));
        prop_assert!(close(i.commutator_norm(), 1.0 - k.norm_sqr(), 1e-12));
    }

    #[test]
    fn splitter_conserves_commutator(k1 in gain(), k2 in gain(), refl in 0.0..=1.0f64, dx in -1e-6..1e-6f64) {
        let m = modes();
        let (s1, i1) = spdc(&OperatorExpansion::annihilation(&m.so1), &OperatorExpansion::annihilation(&m.io1), k1).unwrap();
        let (s2, _) = spdc(&OperatorExpansion::annihilation(&m.so2), &i1, k2).unwrap();
        let s1 = phase_delay(&s1, dx, 808e-9).unwrap();
        let bs = BeamSplitterParams::from_reflectance(refl).unwrap();
        let (o1, o2) = beam_splitter(&s2, &s1, &bs).unwrap();
        let before = s1.commutator_norm() + s2.commutator_norm();
        let after = o1.commutator_norm() + o2.commutator_norm();
        prop_assert!(close(before, after, 1e-12), "{before} vs {after}");
    }

    #[test]
    fn splitter_with_complex_amplitudes_conserves_commutator(
        t_phase in unit_phase(), r_phase in unit_phase(), refl in 0.0..=1.0f64, k in gain()
    ) {
        let m = modes();
        let bs = BeamSplitterParams::new(t_phase * (1.0 - refl).sqrt(), r_phase * refl.sqrt()).unwrap();
        let a = OperatorExpansion::annihilation(&m.so1).add(&OperatorExpansion::creation(&m.io1).scale(k));
        let b = OperatorExpansion::annihilation(&m.so2);
        let (o1, o2) = beam_splitter(&a, &b, &bs).unwrap();
        let before = a.commutator_norm() + b.commutator_norm();
        prop_assert!(close(before, o1.commutator_norm() + o2.commutator_norm(), 1e-12));
    }

    #[test]
    fn phase_delay_keeps_moduli(k in gain(), dx in -1e-3..1e-3f64, lambda in 100e-9..2e-6f64) {
        let m = modes();
        let (s, _) = spdc(&OperatorExpansion::annihilation(&m.so1), &OperatorExpansion::annihilation(&m.io1), k).unwrap();
        let d = phase_delay(&s, dx, lambda).unwrap();
        prop_assert!(close(d.commutator_norm(), s.commutator_norm(), 1e-14));
        prop_assert_eq!(d.len(), s.len());
        for (a, b) in s.terms().zip(d.terms()) {
            prop_assert_eq!(a.mode.name(), b.mode.name());
            prop_assert!(close(a.coefficient.norm(), b.coefficient.norm(), 1e-15));
        }
    }

    #[test]
    fn attenuation_keeps_unit_commutator(t in 0.0..=1.0f64, ph in unit_phase()) {
        let mut m = modes();
        let anc = m.reg.fresh_ancilla(632e-9).unwrap();
        let x = OperatorExpansion::annihilation(&m.io1).scale(ph);
        let y = attenuate(&x, t, &anc).unwrap();
        prop_assert!(close(y.commutator_norm(), 1.0, 1e-14));
        prop_assert!(close(y.coefficient("io1", LadderKind::Annihilation).norm(), t, 1e-15));
    }

    #[test]
    fn dagger_is_an_involution(k1 in gain(), k2 in gain()) {
        let m = modes();
        let (s1, i1) = spdc(&OperatorExpansion::annihilation(&m.so1), &OperatorExpansion::annihilation(&m.io1), k1).unwrap();
        let (s2, i2) = spdc(&OperatorExpansion::annihilation(&m.so2), &i1, k2).unwrap();
        for x in [s1, s2, i2] {
            prop_assert_eq!(x.dagger().dagger(), x.clone());
            prop_assert!(close(x.dagger().commutator_norm(), -x.commutator_norm(), 1e-14));
        }
    }

    #[test]
    fn operations_are_linear(
        k in gain(), a in -2.0..2.0f64, b in -2.0..2.0f64, ph in unit_phase(),
        dx in -1e-6..1e-6f64, refl in 0.0..=1.0f64
    ) {
        let m = modes();
        let x = OperatorExpansion::annihilation(&m.so1).add(&OperatorExpansion::creation(&m.io1).scale(c(0.3, -0.1)));
        let y = OperatorExpansion::annihilation(&m.so2).scale(ph);
        let combo = x.scale(c(a, 0.0)).add(&y.scale(c(b, 0.0)));
        let tol = 1e-14;
        let same = |p: &OperatorExpansion, q: &OperatorExpansion| {
            let diff = p.add(&q.scale(c(-1.0, 0.0)));
            [LadderKind::Annihilation, LadderKind::Creation]
                .iter()
                .all(|kind| diff.amplitudes(*kind).values().all(|v| v.norm() <= tol))
        };

        let lhs = phase_delay(&combo, dx, 808e-9).unwrap();
        let rhs = phase_delay(&x, dx, 808e-9).unwrap().scale(c(a, 0.0))
            .add(&phase_delay(&y, dx, 808e-9).unwrap().scale(c(b, 0.0)));
        prop_assert!(same(&lhs, &rhs));

        let bs = BeamSplitterParams::from_reflectance(refl).unwrap();
        let (l1, l2) = beam_splitter(&combo, &y, &bs).unwrap();
        let (p1, p2) = beam_splitter(&x, &OperatorExpansion::zero(), &bs).unwrap();
        let (q1, q2) = beam_splitter(&y, &y, &bs).unwrap();
        let (r1, r2) = beam_splitter(&OperatorExpansion::zero(), &y, &bs).unwrap();
        // beam_splitter(a x + b y, y) = a bs(x, 0) + b bs(y, 0) + bs(0, y)
        let (yy1, yy2) = beam_splitter(&y, &OperatorExpansion::zero(), &bs).unwrap();
        prop_assert!(same(&l1, &p1.scale(c(a, 0.0)).add(&yy1.scale(c(b, 0.0))).add(&r1)));
        prop_assert!(same(&l2, &p2.scale(c(a, 0.0)).add(&yy2.scale(c(b, 0.0))).add(&r2)));
        prop_assert!(same(&q1, &yy1.add(&r1)));
        prop_assert!(same(&q2, &yy2.add(&r2)));

        // spdc is additive across its arguments (dagger is antilinear, so only real scaling)
        let (s_sum, i_sum) = spdc(&combo, &y, k).unwrap();
        let (s_x, i_x) = spdc(&x.scale(c(a, 0.0)), &OperatorExpansion::zero(), k).unwrap();
        let (s_y, i_y) = spdc(&y.scale(c(b, 0.0)), &y, k).unwrap();
        prop_assert!(same(&s_sum, &s_x.add(&s_y)));
        prop_assert!(same(&i_sum, &i_x.add(&i_y)));
    }

    #[test]
    fn truncation_only_drops_high_degrees(k1 in gain(), k2 in gain(), max in 0u32..4) {
        let m = modes();
        let (_, i1) = spdc(&OperatorExpansion::annihilation(&m.so1), &OperatorExpansion::annihilation(&m.io1), k1).unwrap();
        let (s2, _) = spdc(&OperatorExpansion::annihilation(&m.so2), &i1, k2).unwrap();
        let t = truncate(&s2, max);
        prop_assert!(t.max_gain_degree() <= max);
        for term in t.terms() {
            prop_assert!(s2.terms().any(|s| s == term));
        }
        prop_assert_eq!(truncate(&s2, 50), s2);
    }
}

#[test]
fn gain_outside_perturbative_range_rejected() {
    let m = modes();
    let a = OperatorExpansion::annihilation(&m.so1);
    let b = OperatorExpansion::annihilation(&m.io1);
    assert!(spdc(&a, &b, c(0.1, 0.0)).is_err());
    assert!(spdc(&a, &b, c(0.0, 0.2)).is_err());
    assert_eq!(spdc(&a, &b, c(0.0, 0.0)).unwrap(), (a, b));
}
