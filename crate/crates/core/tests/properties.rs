use morphoseek::cost::cost_single;
use morphoseek::kernel::{energy_cyclic, energy_noncyclic, random_state, GridDims, Kernel, SamplingRanges, StateVector};
use morphoseek::relations::{negate_ssh, scale_ssh, AffineRelation, Alpha, RelationMeta};
use morphoseek::search::stream;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = GridDims> {
    (1usize..4, 3usize..9, 3usize..9).prop_map(|(t, ny, nx)| GridDims::new(t, ny, nx).unwrap())
}

fn state() -> impl Strategy<Value = StateVector> {
    (dims(), any::<u64>()).prop_map(|(d, seed)| random_state(d, &SamplingRanges::default(), &mut stream(seed, 0)).unwrap())
}

fn scaled_ssh(s: &StateVector, lambda: f64) -> StateVector {
    let mut out = s.clone();
    out.ssh.iter_mut().for_each(|v| *v *= lambda);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_roundtrip(s in state()) {
        let back = StateVector::unflatten(&s.flatten(), s.dims).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn energies_are_nonnegative(s in state()) {
        for e in energy_cyclic(&s).unwrap().0.into_iter().chain(energy_noncyclic(&s).unwrap().0) {
            prop_assert!(e >= 0.0);
        }
    }

    #[test]
    fn energy_is_quadratic_in_ssh(s in state(), k in 0usize..3) {
        let lambda = [-2.0, 0.5, 3.0][k];
        let base = energy_cyclic(&s).unwrap().0;
        let scaled = energy_cyclic(&scaled_ssh(&s, lambda)).unwrap().0;
        for (a, b) in base.iter().zip(&scaled) {
            let expect = lambda * lambda * a;
            prop_assert!((b - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
        }
    }

    #[test]
    fn joint_gf_scaling_is_bit_exact(s in state(), lambda in prop_oneof![Just(2.0), Just(-2.0), Just(0.5), Just(4.0)]) {
        let mut t = s.clone();
        t.gravity *= lambda;
        t.coriolis *= lambda;
        prop_assert_eq!(energy_cyclic(&s).unwrap(), energy_cyclic(&t).unwrap());
        prop_assert_eq!(energy_noncyclic(&s).unwrap(), energy_noncyclic(&t).unwrap());
    }

    #[test]
    fn ssh_negation_is_bit_exact(s in state()) {
        let t = scaled_ssh(&s, -1.0);
        prop_assert_eq!(energy_cyclic(&s).unwrap(), energy_cyclic(&t).unwrap());
        prop_assert_eq!(energy_noncyclic(&s).unwrap(), energy_noncyclic(&t).unwrap());
    }

    #[test]
    fn serialization_preserves_apply(d in dims(), seed in any::<u64>(), coefs in prop::collection::vec(-1e6f64..1e6, 16)) {
        let n = d.state_len();
        let alpha: Vec<f64> = (0..n).map(|k| coefs[k % 16] / (k as f64 + 1.0)).collect();
        let beta: Vec<f64> = (0..n).map(|k| coefs[(k + 7) % 16] * 1e-7 / 3.0).collect();
        let mut rel = AffineRelation::new(d, Alpha::Diagonal(alpha), beta).unwrap();
        rel.meta = RelationMeta { name: Some("p".into()), seed: Some(seed), cost: Some(1.0 / 3.0), iterations: Some(7) };
        let back = AffineRelation::from_json(&rel.to_json()).unwrap();
        prop_assert_eq!(&back, &rel);
        let v = random_state(d, &SamplingRanges::default(), &mut stream(seed, 1)).unwrap().flatten();
        let a = rel.apply(&v).unwrap();
        let b = back.apply(&v).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn extra_priors_scale_the_cost_monotonically(s in state()) {
        let d = s.dims;
        let g = scale_ssh(d, 1.5);
        let id = AffineRelation::identity(d);
        let base = cost_single(&g, std::slice::from_ref(&id), &s, &Kernel::Cyclic).unwrap();
        prop_assume!(base.is_finite() && base > 0.0);
        // a prior whose distance to g is above one lowers the cost
        let far = negate_ssh(d);
        let v = s.flatten();
        let far_dist = morphoseek::relations::distance(&g, &far, &v).unwrap();
        prop_assume!(far_dist > 1.0);
        let lowered = cost_single(&g, &[id.clone(), far], &s, &Kernel::Cyclic).unwrap();
        prop_assert!(lowered <= base);
        // and one closer than one raises it
        let near = scale_ssh(d, 1.5 + 0.1 / v.iter().map(|x| x * x).sum::<f64>().sqrt());
        let near_dist = morphoseek::relations::distance(&g, &near, &v).unwrap();
        prop_assert!(near_dist < 1.0);
        let raised = cost_single(&g, &[id, near], &s, &Kernel::Cyclic).unwrap();
        prop_assert!(raised >= base);
    }
}
