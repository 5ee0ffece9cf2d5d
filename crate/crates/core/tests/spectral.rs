mod common;

use common::props::{fft_suite, sq_error};
use proptest::prelude::*;
use thinnav::fft::{fft_topk_reconstruct, topk_unclamped};

#[test]
fn exact_properties() {
    let f = fft_suite();
    assert!(f.is_empty(), "{f:#?}");
}

#[test]
fn rejects_bad_k() {
    let g = vec![0.5; 12];
    assert!(topk_unclamped(&g, 3, 4, 0).is_err());
    assert!(topk_unclamped(&g, 3, 4, 13).is_err());
}

proptest! {
    #[test]
    fn error_monotone_in_k(
        (h, w, g) in (2usize..9, 2usize..9).prop_flat_map(|(h, w)| (Just(h), Just(w), prop::collection::vec(0.0f64..1.0, h * w))),
        k in 1usize..40,
    ) {
        let k = k.min(h * w - 1);
        let (a, _) = topk_unclamped(&g, h, w, k).unwrap();
        let (b, _) = topk_unclamped(&g, h, w, k + 1).unwrap();
        prop_assert!(sq_error(&b, &g) <= sq_error(&a, &g) + 1e-12);
    }

    #[test]
    fn clamped_output_in_unit_range(g in prop::collection::vec(0.0f64..1.0, 48), k in 1usize..48) {
        let r = fft_topk_reconstruct(&g, 6, 8, k).unwrap();
        prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
