use proptest::prelude::*;
use scenemorph_core::dataset::FrameRecord;
use scenemorph_core::harness::{
    apply_relation, blur, fog, inconsistency_count, pair_predictions, sweep_bounds, ErrorBound, MetamorphicRelation, Prediction,
};
use scenemorph_core::raster::Image;

fn predictions(values: &[(f64, f64)]) -> (Vec<Prediction>, Vec<Prediction>) {
    values
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let id = format!("f{i}");
            (
                Prediction {
                    frame_id: id.clone(),
                    degrees: a,
                },
                Prediction { frame_id: id, degrees: b },
            )
        })
        .unzip()
}

/// Counts without `abs`, one loop over bounds and one over pairs.
fn brute_force(values: &[(f64, f64)], bounds: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for &eps in bounds {
        let mut n = 0;
        for &(a, b) in values {
            if a - b > eps || b - a > eps {
                n += 1;
            }
        }
        out.push(n);
    }
    out
}

fn angle() -> impl Strategy<Value = f64> {
    prop_oneof![-90.0..90.0f64, (-9i32..9).prop_map(|k| f64::from(k) * 10.0)]
}

fn ascending_bounds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..6000, 1..8).prop_map(|s| s.into_iter().map(|v| f64::from(v) / 100.0).collect())
}

proptest! {
    #[test]
    fn counts_match_brute_force(values in prop::collection::vec((angle(), angle()), 0..300), bounds in ascending_bounds()) {
        let (a, b) = predictions(&values);
        let pairs = pair_predictions(&a, &b).unwrap();
        let bl = ErrorBound::list(&bounds).unwrap();
        let rows = sweep_bounds(&pairs, &bl).unwrap();
        let expected = brute_force(&values, &bounds);
        for (row, e) in rows.iter().zip(&expected) {
            prop_assert_eq!(row.count, *e);
            prop_assert_eq!(row.total_frames, values.len());
        }
    }

    #[test]
    fn counts_never_increase_with_the_bound(values in prop::collection::vec((angle(), angle()), 0..300), bounds in ascending_bounds()) {
        let (a, b) = predictions(&values);
        let pairs = pair_predictions(&a, &b).unwrap();
        let rows = sweep_bounds(&pairs, &ErrorBound::list(&bounds).unwrap()).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[0].count >= w[1].count);
        }
    }

    #[test]
    fn swapping_sides_keeps_counts(values in prop::collection::vec((angle(), angle()), 0..200), eps in 0.01..60.0f64) {
        let (a, b) = predictions(&values);
        let bound = ErrorBound::new(eps).unwrap();
        let forward = inconsistency_count(&pair_predictions(&a, &b).unwrap(), bound);
        let backward = inconsistency_count(&pair_predictions(&b, &a).unwrap(), bound);
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn identical_predictions_are_consistent(values in prop::collection::vec(angle(), 0..200), eps in 0.001..60.0f64) {
        let pairs: Vec<(f64, f64)> = values.iter().map(|&v| (v, v)).collect();
        let (a, b) = predictions(&pairs);
        prop_assert_eq!(inconsistency_count(&pair_predictions(&a, &b).unwrap(), ErrorBound::new(eps).unwrap()), 0);
    }

    #[test]
    fn relations_preserve_length_order_and_ids(n in 0usize..12, seed in 0u32..1000, which in 0usize..3) {
        let stream: Vec<FrameRecord> = (0..n)
            .map(|i| FrameRecord::in_memory(format!("s{seed}_{i}"), i, Image::filled(3, 4, 3, ((seed as usize + i) % 7) as f32 / 7.0)))
            .collect();
        let mr = match which {
            0 => MetamorphicRelation::identity(),
            1 => fog(0.4).unwrap(),
            _ => blur(0.8).unwrap(),
        };
        let out = apply_relation(&mr, &stream).unwrap();
        prop_assert_eq!(out.len(), stream.len());
        for (x, y) in out.iter().zip(&stream) {
            prop_assert_eq!(&x.frame_id, &y.frame_id);
            prop_assert_eq!(x.sequence_index, y.sequence_index);
        }
    }
}

#[test]
fn unsorted_bounds_are_rejected() {
    let (a, b) = predictions(&[(0.0, 50.0)]);
    let pairs = pair_predictions(&a, &b).unwrap();
    let bounds = [ErrorBound::new(20.0).unwrap(), ErrorBound::new(10.0).unwrap()];
    assert!(sweep_bounds(&pairs, &bounds).is_err());
    let single = [ErrorBound::new(10.0).unwrap()];
    assert_eq!(sweep_bounds(&pairs, &single).unwrap()[0].count, inconsistency_count(&pairs, single[0]));
}
