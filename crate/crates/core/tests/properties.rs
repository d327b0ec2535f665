use proptest::prelude::*;
use symcert_core::io::{instance_from_jsonl, xor_from_text, xor_to_text};
use symcert_core::{
    audit_report, refute_csp, refute_xor, CapRule, CspInstance, CspOptions, Instance, Predicate, RefutationReport,
    RefuteOptions, XorInstance,
};

fn cap_rule(i: usize) -> CapRule {
    [CapRule::default(), CapRule::Fixed(2), CapRule::Fixed(1), CapRule::Unbounded][i]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn xor_bounds_are_sound(
        n in 2usize..9,
        k in 1usize..5,
        p in 0.0f64..0.6,
        d in 1usize..3,
        cap in 0usize..4,
        seed in any::<u64>(),
    ) {
        let inst = XorInstance::generate(n, k, p, seed).unwrap();
        let opts = RefuteOptions::default().with_level(d).with_cap(cap_rule(cap));
        let report = refute_xor(&inst, &opts).unwrap();
        prop_assert!((0.0..=1.0).contains(&report.upper_bound));
        let verdict = audit_report(&report, &inst);
        prop_assert!(verdict.pass, "{:?}", verdict.details);
        let s = verdict.soundness.unwrap();
        prop_assert!(s.upper_ok && s.lower_ok);
    }

    #[test]
    fn csp_bounds_are_sound(
        n in 2usize..8,
        k in 1usize..4,
        bits in any::<u8>(),
        p in 0.0f64..0.5,
        twise in proptest::option::of(1usize..3),
        seed in any::<u64>(),
    ) {
        let table: Vec<bool> = (0..1usize << k).map(|b| bits >> b & 1 == 1).collect();
        let pred = Predicate::from_table(k, table).unwrap();
        let inst = CspInstance::generate(pred, n, p, seed).unwrap();
        let opts = CspOptions { xor: RefuteOptions::default().with_level(1), twise, seed, ..Default::default() };
        let report = refute_csp(&inst, &opts).unwrap();
        let verdict = audit_report(&report, &inst);
        prop_assert!(verdict.pass, "{:?}", verdict.details);
        prop_assert!(verdict.soundness.unwrap().upper_ok);
    }

    #[test]
    fn instances_round_trip(n in 1usize..12, k in 1usize..5, p in 0.0f64..0.3, seed in any::<u64>(), csp in any::<bool>()) {
        if csp {
            let pred = Predicate::builtin("NAE", k).unwrap();
            let inst = Instance::Csp(CspInstance::generate(pred, n, p, seed).unwrap());
            let text = inst.to_jsonl();
            let back = instance_from_jsonl(&text).unwrap();
            prop_assert_eq!(back.to_jsonl(), text);
            prop_assert_eq!(back, inst);
        } else {
            let x = XorInstance::generate(n, k, p, seed).unwrap();
            let inst = Instance::Xor(x.clone());
            let text = inst.to_jsonl();
            let back = instance_from_jsonl(&text).unwrap();
            prop_assert_eq!(back.to_jsonl(), text);
            prop_assert_eq!(back, inst);
            let plain = xor_to_text(&x);
            prop_assert_eq!(xor_to_text(&xor_from_text(&plain).unwrap()), plain);
        }
    }

    #[test]
    fn reports_round_trip(n in 2usize..9, k in 2usize..5, p in 0.05f64..0.5, seed in any::<u64>()) {
        let inst = XorInstance::generate(n, k, p, seed).unwrap();
        let report = refute_xor(&inst, &RefuteOptions::default().with_level(1)).unwrap();
        let json = report.to_json().unwrap();
        let back = RefutationReport::from_json(&json).unwrap();
        prop_assert_eq!(&back.to_json().unwrap(), &json);
        prop_assert_eq!(back.upper_bound.to_bits(), report.upper_bound.to_bits());
    }

    /// Negating every sign negates the base matrix, which leaves every norm
    /// and hence the bound unchanged.
    #[test]
    fn even_sign_flip_keeps_bound(n in 3usize..8, p in 0.05f64..0.4, seed in any::<u64>()) {
        let inst = XorInstance::generate(n, 4, p, seed).unwrap();
        let opts = RefuteOptions::default().with_level(1);
        let a = refute_xor(&inst, &opts).unwrap().upper_bound;
        let b = refute_xor(&inst.flipped(), &opts).unwrap().upper_bound;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }
}
