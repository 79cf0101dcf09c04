//! Invariants checked over generated inputs.

use proptest::prelude::*;
use spectraseg::data::pgm::{decode_pgm, encode_pgm};
use spectraseg::align::{align_loss, compute_logits, predict_labels, Logits};
use spectraseg::data::{
    AnchorSet, BinaryMask, FeatureMap, FoldSpec, ImageRgb, NpyArray, NpyData, ReadOptions, SemanticMask,
};
use spectraseg::fusion::fuse_predictions;
use spectraseg::metrics::{compactness, evaluate_fold, iou, pearson, round_half_up, FoldAccumulator};
use spectraseg::shape::{bce_loss, mask_to_edges, sobel, BoundaryMap};
use spectraseg::spectral::{
    color_pos_features, eigensolve, normalized_laplacian, semantic_affinity, shape_affinity, AffinityMatrix,
    DenseAffinity, EigenSegment, LanczosOptions, SolverKind,
};

const IGNORE: u32 = 255;

fn mask(max_label: u32) -> impl Strategy<Value = SemanticMask> {
    (3usize..10, 3usize..10).prop_flat_map(move |(h, w)| {
        prop::collection::vec(prop_oneof![9 => 0..=max_label, 1 => Just(IGNORE)], h * w)
            .prop_map(move |labels| SemanticMask::new(h, w, labels).unwrap())
    })
}

fn same_size_pair(max_label: u32) -> impl Strategy<Value = (SemanticMask, SemanticMask)> {
    (3usize..10, 3usize..10).prop_flat_map(move |(h, w)| {
        let v = || prop::collection::vec(prop_oneof![9 => 0..=max_label, 1 => Just(IGNORE)], h * w);
        (v(), v()).prop_map(move |(a, b)| {
            (SemanticMask::new(h, w, a).unwrap(), SemanticMask::new(h, w, b).unwrap())
        })
    })
}

fn symmetric_affinity() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (3usize..12).prop_flat_map(|n| {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.01f64..1.0], n * n).prop_map(move |raw| {
            let mut z = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    z[i * n + j] = raw[i.min(j) * n + i.max(j)];
                }
            }
            (n, z)
        })
    })
}

fn dense_spectrum(n: usize, z: Vec<f64>) -> Vec<f64> {
    let a = AffinityMatrix::Dense(DenseAffinity::from_rows(n, z).unwrap());
    let l = normalized_laplacian(&a);
    eigensolve(&l, n, SolverKind::Dense, &LanczosOptions::default())
        .unwrap()
        .values()
        .to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_spectrum_is_permutation_invariant(
        (n, z) in symmetric_affinity(),
        seed in any::<u64>(),
    ) {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let mut zp = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                zp[i * n + j] = z[perm[i] * n + perm[j]];
            }
        }
        let a = dense_spectrum(n, z);
        let b = dense_spectrum(n, zp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9, "{a:?} vs {b:?}");
        }
        prop_assert!(a.iter().all(|&v| (-1e-9..=2.0 + 1e-9).contains(&v)));
    }

    #[test]
    fn edges_ignore_label_names(m in mask(4), shift in 1u32..100) {
        // any injective relabelling of non-ignored labels
        let labels: Vec<u32> = m
            .labels()
            .iter()
            .map(|&l| if l == IGNORE { IGNORE } else { (l * 7 + shift) % 97 + 300 })
            .collect();
        let r = SemanticMask::new(m.height(), m.width(), labels).unwrap();
        prop_assert_eq!(mask_to_edges::<f64>(&m), mask_to_edges::<f64>(&r));
    }

    #[test]
    fn sobel_commutes_with_horizontal_flip(
        (h, w, field) in (3usize..12, 3usize..12)
            .prop_flat_map(|(h, w)| (Just(h), Just(w), prop::collection::vec(-5.0f64..5.0, h * w)))
    ) {
        let flipped: Vec<f64> = (0..h)
            .flat_map(|r| (0..w).rev().map(move |c| (r, c)))
            .map(|(r, c)| field[r * w + c])
            .collect();
        let a = sobel(h, w, &field).unwrap().flip_horizontal();
        let b = sobel(h, w, &flipped).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_is_smallest_at_the_target(
        (h, w, g, p) in (1usize..8, 1usize..8).prop_flat_map(|(h, w)| {
            (
                Just(h),
                Just(w),
                prop::collection::vec(prop::bool::ANY, h * w),
                prop::collection::vec(0.0f64..=1.0, h * w),
            )
        })
    ) {
        let g: Vec<f64> = g.into_iter().map(|b| b as u8 as f64).collect();
        let gt = BoundaryMap::new(h, w, g.clone()).unwrap();
        let pred = BoundaryMap::new(h, w, p).unwrap();
        let best = bce_loss(&gt, &gt).unwrap();
        let got = bce_loss(&pred, &gt).unwrap();
        prop_assert!(best >= 0.0 && got >= best - 1e-15);
    }

    #[test]
    fn accumulator_merge_is_order_free(
        pairs in prop::collection::vec(same_size_pair(3), 1..8),
        split in (0usize..8, 0usize..8),
    ) {
        let fold = FoldSpec::custom(3, vec![1, 2]).unwrap();
        let acc = |range: &[(SemanticMask, SemanticMask)]| {
            let mut a = FoldAccumulator::new(&fold);
            for (p, g) in range {
                a.add(p, g).unwrap();
            }
            a
        };
        let n = pairs.len();
        let (i, j) = (split.0.min(split.1) % (n + 1), split.0.max(split.1) % (n + 1));
        let (i, j) = (i.min(j), i.max(j));
        let (x, y, z) = (acc(&pairs[..i]), acc(&pairs[i..j]), acc(&pairs[j..]));

        let mut left = x.clone();
        left.merge(&y);
        left.merge(&z);
        let mut right = y.clone();
        right.merge(&z);
        let mut right_first = z.clone();
        right_first.merge(&x);
        right_first.merge(&y);
        let mut assoc = x;
        assoc.merge(&right);

        let whole = acc(&pairs);
        prop_assert_eq!(&left, &whole);
        prop_assert_eq!(&assoc, &whole);
        prop_assert_eq!(&right_first, &whole);
    }

    #[test]
    fn iou_is_symmetric_and_bounded((a, b) in same_size_pair(1)) {
        let (a, b) = (a.class_mask(1), b.class_mask(1));
        let (x, y) = (iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn fusion_above_one_is_identity(
        (m, segs) in mask(3).prop_flat_map(|m| {
            let (h, w) = (m.height(), m.width());
            (Just(m), prop::collection::vec(prop::collection::vec(prop::bool::ANY, h * w), 0..4))
        }),
        tau in 1.0001f64..3.0,
    ) {
        let segments: Vec<EigenSegment> = segs
            .into_iter()
            .enumerate()
            .map(|(k, d)| EigenSegment {
                mask: BinaryMask::new(m.height(), m.width(), d).unwrap(),
                source_eigenindex: k + 1,
            })
            .collect();
        let (fused, _) = fuse_predictions(&m, &segments, tau, 0).unwrap();
        prop_assert_eq!(fused, m);
    }

    #[test]
    fn fusion_only_uses_predicted_labels(
        (m, segs) in mask(3).prop_flat_map(|m| {
            let (h, w) = (m.height(), m.width());
            (Just(m), prop::collection::vec(prop::collection::vec(prop::bool::ANY, h * w), 0..4))
        }),
        tau in 0.0f64..1.0,
    ) {
        let segments: Vec<EigenSegment> = segs
            .into_iter()
            .enumerate()
            .map(|(k, d)| EigenSegment {
                mask: BinaryMask::new(m.height(), m.width(), d).unwrap(),
                source_eigenindex: k + 1,
            })
            .collect();
        let (fused, trace) = fuse_predictions(&m, &segments, tau, 0).unwrap();
        let allowed = m.present_labels();
        for (i, &l) in fused.labels().iter().enumerate() {
            prop_assert_eq!(fused.is_ignored(i), m.is_ignored(i));
            prop_assert!(fused.is_ignored(i) || l == 0 || allowed.contains(&l));
        }
        for r in &trace.records {
            prop_assert!((0.0..=1.0).contains(&r.iou));
        }
    }

    #[test]
    fn npy_round_trips(
        shape in prop::collection::vec(1usize..5, 1..4),
        seed in any::<u64>(),
    ) {
        let n: usize = shape.iter().product();
        let vals: Vec<f64> = (0..n).map(|i| (seed.wrapping_add(i as u64) % 1000) as f64 / 7.0 - 50.0).collect();
        for data in [
            NpyData::F64(vals.clone()),
            NpyData::F32(vals.iter().map(|&v| v as f32).collect()),
            NpyData::U8(vals.iter().map(|&v| v.abs() as u8).collect()),
            NpyData::I64(vals.iter().map(|&v| v as i64).collect()),
        ] {
            let a = NpyArray::new(shape.clone(), data);
            let bytes = a.to_bytes();
            prop_assert_eq!(bytes.len() % 64, (n * match &a.data {
                NpyData::U8(_) => 1,
                NpyData::F32(_) => 4,
                _ => 8,
            }) % 64);
            prop_assert_eq!(NpyArray::from_bytes(&bytes, ReadOptions::default()).unwrap(), a);
        }
    }

    #[test]
    fn pgm_round_trips(m in mask(20)) {
        let bytes = encode_pgm(&m).unwrap();
        prop_assert_eq!(decode_pgm(&bytes, IGNORE).unwrap(), m);
    }

    #[test]
    fn round_half_up_stays_within_half_a_step(x in -1e4f64..1e4, d in 0u32..4) {
        let step = 10f64.powi(-(d as i32));
        let r = round_half_up(x, d);
        prop_assert!((r - x).abs() <= step / 2.0 + 1e-9);
        prop_assert!(((r / step).round() - r / step).abs() < 1e-6);
    }
}

fn logits_and_gt() -> impl Strategy<Value = (Logits, SemanticMask)> {
    (1usize..6, 1usize..6, 2usize..5).prop_flat_map(|(h, w, k)| {
        (
            prop::collection::vec(-1.0f32..1.0, h * w * k),
            prop::collection::vec(prop_oneof![9 => 0..k as u32, 1 => Just(IGNORE)], h * w),
        )
            .prop_map(move |(s, g)| {
                (Logits::new(h, w, k, s).unwrap(), SemanticMask::new(h, w, g).unwrap())
            })
    })
}

fn blob() -> impl Strategy<Value = BinaryMask> {
    (1usize..9, 1usize..9).prop_flat_map(|(h, w)| {
        prop::collection::vec(prop::bool::weighted(0.6), h * w).prop_map(move |mut d| {
            d[0] = true;
            BinaryMask::new(h, w, d).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn align_loss_is_positive_and_shift_invariant(
        (logits, gt) in logits_and_gt(),
        shift in prop::collection::vec(-3.0f32..3.0, 36),
    ) {
        let k = logits.classes();
        let seen: Vec<u32> = (0..k as u32).collect();
        let base = align_loss(&logits, &gt, &seen).unwrap();
        let counted = (0..gt.len()).filter(|&i| !gt.is_ignored(i)).count();
        prop_assert!(base >= 0.0);
        prop_assert_eq!(base > 0.0, counted > 0);

        let shifted: Vec<f32> = logits
            .scores()
            .iter()
            .enumerate()
            .map(|(i, &s)| s + shift[i / k])
            .collect();
        let moved = Logits::new(logits.height(), logits.width(), k, shifted).unwrap();
        prop_assert!((align_loss(&moved, &gt, &seen).unwrap() - base).abs() <= 1e-5 * base.max(1.0));
    }

    #[test]
    fn logits_ignore_feature_and_anchor_scale(
        (h, w, d, feats, anchors) in (1usize..5, 1usize..5, 2usize..6).prop_flat_map(|(h, w, d)| {
            (
                Just(h),
                Just(w),
                Just(d),
                prop::collection::vec(-1.0f32..1.0, h * w * d),
                prop::collection::vec(0.1f32..1.0, 3 * d),
            )
        }),
        scales in prop::collection::vec(0.01f32..100.0, 30),
    ) {
        let names: Vec<String> = (0..3).map(|i| format!("c{i}")).collect();
        let a = AnchorSet::new(names.clone(), d, anchors.clone()).unwrap();
        let f = FeatureMap::new(h, w, d, feats.clone()).unwrap();
        let scaled_anchors: Vec<f32> = anchors.iter().enumerate().map(|(i, &v)| v * scales[i / d]).collect();
        let scaled_feats: Vec<f32> = feats.iter().enumerate().map(|(i, &v)| v * scales[(i / d) % 30]).collect();
        let a2 = AnchorSet::new(names, d, scaled_anchors).unwrap();
        let f2 = FeatureMap::new(h, w, d, scaled_feats).unwrap();
        let (x, y) = (compute_logits(&f, &a).unwrap(), compute_logits(&f2, &a2).unwrap());
        for (p, q) in x.scores().iter().zip(y.scores()) {
            prop_assert!((p - q).abs() <= 1e-6);
        }
        let ids = [0, 1, 2];
        // near-ties can legitimately flip under rounding
        let sorted_gap = |s: &[f32]| {
            let mut v = s.to_vec();
            v.sort_by(|a, b| b.total_cmp(a));
            v[0] - v[1]
        };
        let px = predict_labels(&x, &ids).unwrap();
        let py = predict_labels(&y, &ids).unwrap();
        for i in 0..h * w {
            if sorted_gap(x.pixel(i)) > 1e-5 {
                prop_assert_eq!(px.labels()[i], py.labels()[i]);
            }
        }
    }

    #[test]
    fn affinities_are_symmetric_and_nonnegative(
        (h, w, rgb, feats) in (2usize..7, 2usize..7).prop_flat_map(|(h, w)| {
            (
                Just(h),
                Just(w),
                prop::collection::vec(any::<u8>(), h * w * 3),
                prop::collection::vec(-1.0f32..1.0, h * w * 4),
            )
        }),
        k in 1usize..4,
    ) {
        let img = ImageRgb::new(h, w, rgb).unwrap();
        let shape = shape_affinity(&color_pos_features::<f64>(&img), k).unwrap();
        let sem = semantic_affinity::<f64>(&FeatureMap::new(h, w, 4, feats).unwrap(), 1000).unwrap();
        for z in [shape, sem] {
            prop_assert!(z.asymmetry() <= 1e-6);
            prop_assert!(z.min_entry() >= 0.0);
        }
    }

    #[test]
    fn evaluation_ignores_stream_order(
        pairs in prop::collection::vec(same_size_pair(3), 1..6),
        rotate in 0usize..6,
    ) {
        let fold = FoldSpec::custom(3, vec![1, 3]).unwrap();
        let (p, g): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let a = evaluate_fold(&p, &g, &fold).unwrap();
        let r = rotate % p.len();
        let (mut p2, mut g2) = (p.clone(), g.clone());
        p2.rotate_left(r);
        g2.rotate_left(r);
        p2.reverse();
        g2.reverse();
        prop_assert_eq!(a, evaluate_fold(&p2, &g2, &fold).unwrap());
    }

    #[test]
    fn compactness_ignores_translation_and_quarter_turns(m in blob(), dy in 0usize..5, dx in 0usize..5) {
        let (h, w) = (m.height(), m.width());
        let moved = BinaryMask::from_fn(h + dy + 2, w + dx + 3, |r, c| {
            r >= dy && c >= dx && r - dy < h && c - dx < w && m.get(r - dy, c - dx)
        });
        let turned = BinaryMask::from_fn(w, h, |r, c| m.get(h - 1 - c, r));
        let co = compactness(&m).unwrap();
        prop_assert_eq!(co, compactness(&moved).unwrap());
        prop_assert_eq!(co, compactness(&turned).unwrap());
    }

    #[test]
    fn pearson_of_affine_images_is_unit(
        xs in prop::collection::vec(-100.0f64..100.0, 3..40),
        a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        b in -100.0f64..100.0,
    ) {
        prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-3));
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let c = pearson(&xs, &ys).unwrap();
        prop_assert!((c.r - a.signum()).abs() <= 1e-12, "r = {}", c.r);
    }

    #[test]
    fn bce_scan_bottoms_out_at_the_mean(
        g in prop::collection::vec(prop::bool::ANY, 4..40),
    ) {
        let n = g.len();
        let gt = BoundaryMap::new(1, n, g.iter().map(|&b| b as u8 as f64).collect()).unwrap();
        let mean = gt.mass() / n as f64;
        let scan: Vec<(f64, f64)> = (1..1000)
            .map(|i| {
                let c = i as f64 / 1000.0;
                (c, bce_loss(&BoundaryMap::new(1, n, vec![c; n]).unwrap(), &gt).unwrap())
            })
            .collect();
        let best = scan.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        // the clamp makes 0 and 1 reachable only up to the grid step
        prop_assert!((best - mean.clamp(0.001, 0.999)).abs() <= 1e-3 + 1e-12, "{best} vs {mean}");
    }
}
