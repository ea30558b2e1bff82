use proptest::prelude::*;
use roboprep::align::{pchip_eval, resample_trajectory};
use roboprep::dataqa::{
    frame_sharpness, state_diversity, tremble_score, visual_diversity_frames, GridStatsExtractor,
};
use roboprep::rl_align::{expectile_loss, sample_expectile};
use roboprep::sampler::mixture_weights;
use roboprep::synth::{corpus, FixtureEmbodiment};
use roboprep::unify::{
    map_from_unified, map_to_unified, masked_bc_loss, DimMap, EmbodimentDescriptor, UNIFIED_DIM,
};
use roboprep::{load_episode, save_episode, GrayFrame, Matrix};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn frame(w: usize, h: usize) -> impl Strategy<Value = GrayFrame> {
    prop::collection::vec(any::<u8>(), w * h).prop_map(move |p| GrayFrame::new(w, h, p).unwrap())
}

fn descriptor() -> impl Strategy<Value = EmbodimentDescriptor> {
    (
        Just((0..UNIFIED_DIM).collect::<Vec<_>>()).prop_shuffle(),
        1usize..UNIFIED_DIM,
        prop::collection::vec((0.1f64..5.0, any::<bool>(), -3.0f64..3.0), UNIFIED_DIM),
    )
        .prop_map(|(slots, n, affine)| {
            let dims = (0..n)
                .map(|i| DimMap {
                    native_index: i,
                    slot_index: slots[i],
                    scale: if affine[i].1 {
                        affine[i].0
                    } else {
                        -affine[i].0
                    },
                    offset: affine[i].2,
                })
                .collect();
            let prompt = FixtureEmbodiment::ALL[0].descriptor().prompt();
            EmbodimentDescriptor::new("random", dims, prompt, None).unwrap()
        })
}

proptest! {
    #[test]
    fn mixture_sums_to_one(w in prop::collection::vec(1e-3f64..10.0, 1..20), alpha in 0.0f64..=1.0) {
        let p = mixture_weights(&w, alpha).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn mixture_is_permutation_equivariant(
        w in prop::collection::vec(1e-3f64..10.0, 2..12),
        alpha in 0.0f64..=1.0,
        rot in 0usize..12,
    ) {
        let mut shifted = w.clone();
        shifted.rotate_left(rot % w.len());
        let mut p = mixture_weights(&w, alpha).unwrap();
        p.rotate_left(rot % w.len());
        let q = mixture_weights(&shifted, alpha).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_flattens_as_alpha_drops(w in prop::collection::vec(1e-3f64..10.0, 2..12), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let spread = |p: Vec<f64>| p.iter().cloned().fold(0.0, f64::max) - p.iter().cloned().fold(1.0, f64::min);
        prop_assert!(spread(mixture_weights(&w, lo).unwrap()) <= spread(mixture_weights(&w, hi).unwrap()) + 1e-12);
    }

    #[test]
    fn unified_round_trip(desc in descriptor(), seed in prop::collection::vec(-5.0f64..5.0, UNIFIED_DIM)) {
        let a = &seed[..desc.native_dim()];
        let u = map_to_unified(a, &desc).unwrap();
        prop_assert_eq!(u.mask, desc.mask());
        let back = map_from_unified(&u, &desc).unwrap();
        for (x, y) in a.iter().zip(&back) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn masked_loss_ignores_unmasked_slots(
        desc in descriptor(),
        pred in prop::collection::vec(-5.0f64..5.0, UNIFIED_DIM),
        target in prop::collection::vec(-5.0f64..5.0, UNIFIED_DIM),
        noise in prop::collection::vec(-100.0f64..100.0, UNIFIED_DIM),
    ) {
        let mask = desc.mask();
        let base = masked_bc_loss(&pred, &target, mask).unwrap();
        let mut p2 = pred.clone();
        let mut t2 = target.clone();
        for i in (0..UNIFIED_DIM).filter(|&i| !mask.contains(i)) {
            p2[i] += noise[i];
            t2[i] -= noise[i];
        }
        prop_assert_eq!(masked_bc_loss(&p2, &t2, mask).unwrap(), base);
    }

    #[test]
    fn pchip_stays_monotone_and_bounded(
        steps in prop::collection::vec((0.0f64..3.0, 0.1f64..2.0), 2..25),
        start in -10.0f64..10.0,
    ) {
        let mut x = vec![0.0];
        let mut y = vec![start];
        for (dy, dx) in &steps {
            x.push(x.last().unwrap() + dx);
            y.push(y.last().unwrap() + dy);
        }
        let end = *x.last().unwrap();
        let q: Vec<f64> = (0..200).map(|i| (end * i as f64 / 199.0).min(end)).collect();
        let v = pchip_eval(&x, &y, &q).unwrap();
        prop_assert!(v.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(v.iter().all(|&u| u >= y[0] && u <= *y.last().unwrap()));
    }

    #[test]
    fn resampling_keeps_endpoints(m in matrix(12, 3), stride in 0.25f64..4.0) {
        let r = resample_trajectory(&m, stride).unwrap();
        prop_assert_eq!(r.row(0), m.row(0));
        prop_assert_eq!(r.cols(), 3);
    }

    #[test]
    fn expectile_loss_is_convex(a in -10.0f64..10.0, b in -10.0f64..10.0, t in 0.0f64..=1.0, tau in 0.01f64..0.99) {
        let mid = t * a + (1.0 - t) * b;
        let lhs = expectile_loss(mid, tau).unwrap();
        let rhs = t * expectile_loss(a, tau).unwrap() + (1.0 - t) * expectile_loss(b, tau).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn expectile_is_monotone_in_tau(xs in prop::collection::vec(-10.0f64..10.0, 1..40), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = sample_expectile(&xs, lo).unwrap();
        let b = sample_expectile(&xs, hi).unwrap();
        prop_assert!(a <= b + 1e-9);
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= min - 1e-9 && b <= max + 1e-9);
    }

    #[test]
    fn tremble_ignores_constant_offsets(m in matrix(15, 3), shift in -100.0f64..100.0) {
        let a = tremble_score(&m, 2.0).unwrap();
        let b = tremble_score(&m.map(|v| v + shift), 2.0).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn state_diversity_ignores_translation(m in matrix(10, 4), shift in -100.0f64..100.0) {
        let a = state_diversity(&m).unwrap();
        let b = state_diversity(&m.map(|v| v + shift)).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a));
    }

    #[test]
    fn sharpness_is_invariant_under_inversion(f in frame(64, 64)) {
        let inv = f.invert();
        prop_assert_eq!(frame_sharpness(&f).unwrap(), frame_sharpness(&inv).unwrap());
    }

    #[test]
    fn visual_diversity_ignores_frame_order(frames in prop::collection::vec(frame(16, 16), 2..6), rot in 1usize..6) {
        let ex = GridStatsExtractor::default();
        let a = visual_diversity_frames(&frames, &ex).unwrap();
        let mut shuffled = frames.clone();
        shuffled.rotate_left(rot % frames.len());
        let b = visual_diversity_frames(&shuffled, &ex).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn packs_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    for f in corpus(9, 3, true) {
        let path = dir.path().join(&f.episode.id);
        save_episode(&f.episode, &path).unwrap();
        assert_eq!(load_episode(&path).unwrap(), f.episode, "{}", f.episode.id);
    }
}
