mod common;

use common::generate::{random_inputs, random_module, random_what};
use common::*;
use lilac_core::analysis::normalize;
use lilac_core::interp::{run_with_data, Interpreter};
use lilac_core::ir::{parse_module, print_module, verify, Module};
use lilac_core::parse_spec;
use lilac_core::what::parse_what;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(m: &Module, data: &serde_json::Value) -> String {
    let mut it = Interpreter::new(m).with_step_limit(1_000_000);
    run_with_data(&mut it, &m.functions[0], data)
        .expect("generated programs stay in bounds")
        .to_text()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn printed_modules_parse_back(seed in any::<u64>()) {
        let m = random_module(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(verify(&m), vec![]);
        let text = print_module(&m);
        let back = parse_module(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(print_module(&back), text);
    }

    #[test]
    fn normalization_is_idempotent(seed in any::<u64>()) {
        let m = random_module(&mut ChaCha8Rng::seed_from_u64(seed));
        let once = normalize(&m);
        prop_assert_eq!(verify(&once), vec![]);
        prop_assert_eq!(print_module(&normalize(&once)), print_module(&once));
    }

    #[test]
    fn normalization_preserves_results(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_module(&mut rng);
        let n = normalize(&m);
        for _ in 0..3 {
            let data = random_inputs(&mut rng);
            prop_assert_eq!(run(&m, &data), run(&n, &data), "{}", data);
        }
    }

    #[test]
    fn printed_computations_parse_back(seed in any::<u64>()) {
        let p = random_what(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = p.to_string();
        let back = parse_what(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn jds_and_csr_store_the_same_matrix(seed in any::<u64>()) {
        let a = Csr::random(&mut ChaCha8Rng::seed_from_u64(seed), 24, 0.4);
        prop_assert_eq!(Jds::from_csr(&a).to_dense(a.cols), a.to_dense());
    }
}

#[test]
fn jds_conversion_of_the_example_matrix() {
    assert_eq!(Jds::from_csr(&Csr::example()), Jds::example());
}

#[test]
fn shipped_spec_prints_and_parses_back() {
    let spec = spec();
    let text = spec.to_string();
    let back = parse_spec(&text).unwrap();
    assert_eq!(back, spec);
    assert_eq!(back.to_string(), text);
}

#[test]
fn fixtures_print_and_parse_back() {
    for name in all_fixtures() {
        let m = module(name);
        let text = print_module(&m);
        assert_eq!(parse_module(&text).unwrap(), m, "{name}");
        let n = normalize(&m);
        assert_eq!(print_module(&normalize(&n)), print_module(&n), "{name}");
    }
}
