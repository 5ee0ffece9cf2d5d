mod common;

use common::props::{random_psd, ut_suite};
use nalgebra::Matrix6;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thinnav::planner::{sigma_points, DEFAULT_LAMBDA};

#[test]
fn exact_properties() {
    let f = ut_suite();
    assert!(f.is_empty(), "{f:#?}");
}

proptest! {
    #[test]
    fn normalized_weights_form_a_distribution(seed in any::<u64>(), zero in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = if zero { Matrix6::zeros() } else { random_psd(&mut rng) };
        let set = sigma_points(&[0.3; 6], &sigma, DEFAULT_LAMBDA).unwrap();
        let u = set.unique_normalized();
        prop_assert!(u.iter().all(|(_, w)| *w >= 0.0));
        prop_assert!((u.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        if zero {
            prop_assert_eq!(u.len(), 1);
        }
    }
}
