use loopwork_core::metrics::{hungarian, tiou_interval};
use loopwork_core::model::{Interval, Token};
use loopwork_core::mta::{mta_align, progressive_align, AlignConfig};
use loopwork_core::period::dtw_distance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn transcripts(m: std::ops::RangeInclusive<usize>, max_len: usize) -> impl Strategy<Value = Vec<Vec<Token>>> {
    prop::collection::vec(prop::collection::vec((0u32..3).prop_map(Token), 1..=max_len), m)
}

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), len)
}

fn interval() -> impl Strategy<Value = Interval> {
    (0.0f64..100.0, 0.1f64..50.0).prop_map(|(s, l)| Interval::new(s, s + l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn shared_fresh_token_adds_a_full_column(ts in transcripts(2..=3, 4)) {
        let cfg = AlignConfig::default();
        let m = ts.len() as f64;
        let base = mta_align(&ts, &cfg).unwrap().score;
        let grown: Vec<Vec<Token>> = ts.iter().map(|t| {
            let mut t = t.clone();
            t.push(Token(9));
            t
        }).collect();
        let after = mta_align(&grown, &cfg).unwrap().score;
        prop_assert!(after >= base + m * m - m - 1e-9, "{} -> {}", base, after);
    }

    #[test]
    fn joint_alignment_is_valid(ts in transcripts(2..=4, 5)) {
        let al = mta_align(&ts, &AlignConfig::default()).unwrap();
        prop_assert!(al.is_valid_for(&ts));
    }

    #[test]
    fn progressive_alignment_is_valid(ts in transcripts(1..=7, 6)) {
        let al = progressive_align(&ts).unwrap();
        prop_assert!(al.is_valid_for(&ts));
        prop_assert!((al.score - al.column_score()).abs() < 1e-12);
    }

    #[test]
    fn dtw_is_zero_on_itself_and_symmetric(a in series(1..8), b in series(1..8)) {
        prop_assert_eq!(dtw_distance(&a, &a, None).unwrap(), 0.0);
        let ab = dtw_distance(&a, &b, None).unwrap();
        let ba = dtw_distance(&b, &a, None).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn tiou_is_bounded_and_symmetric(a in interval(), b in interval()) {
        let x = tiou_interval(&a, &b);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x, tiou_interval(&b, &a));
        prop_assert_eq!(tiou_interval(&a, &a), 1.0);
    }

    #[test]
    fn hungarian_pairs_are_one_to_one(
        m in (1usize..7, 1usize..7).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0.0f64..1.0, c), r))
    ) {
        let pairs = hungarian(&m);
        prop_assert_eq!(pairs.len(), m.len().min(m[0].len()));
        let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), pairs.len());
        prop_assert_eq!(cols.len(), pairs.len());
    }
}

/// Progressive alignment against the joint optimum on short triples. The
/// agreement count is a regression floor pinned from a measured run.
#[test]
fn progressive_tracks_joint_on_short_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut identical = 0;
    for _ in 0..100 {
        let ts: Vec<Vec<Token>> = (0..3)
            .map(|_| {
                let len = rng.random_range(1..=4);
                (0..len).map(|_| Token(rng.random_range(0..3))).collect()
            })
            .collect();
        let joint = mta_align(&ts, &AlignConfig::default()).unwrap();
        let prog = progressive_align(&ts).unwrap();
        if joint.rows == prog.rows {
            identical += 1;
        } else {
            // never more than one fully matched column short
            assert!(prog.column_score() >= joint.column_score() - 6.0, "{ts:?}");
        }
    }
    assert!(identical >= 46, "{identical} of 100");
}
