//! Randomized invariants checked against direct, independently written forms.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use recast::codebook::{
    incremental_update, init_codebook, kmeans_plus_plus, lloyd_cluster, nearest_codeword, Codebook, PseudoCodebook,
};
use recast::pipeline::{sample_patches, TrainConfig};
use recast::reliability::{dro_fuse, fuse_and_normalize, ScoreTriple, WeightNorm};
use recast::series::{
    downsample, instance_denormalize, instance_normalize, make_windows, patchify, unpatchify, upsample, window_count,
    SeriesFrame,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-scale..scale, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn sized_matrix(max_rows: usize, max_cols: usize, scale: f64) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(move |(r, c)| matrix(r, c, scale))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn normalization_roundtrips(x in sized_matrix(4, 64, 1e3)) {
        let (norm, stats) = instance_normalize(x.view(), 1e-5);
        let back = instance_denormalize(norm.view(), &stats).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
        for row in norm.outer_iter() {
            prop_assert!(row.mean().unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn patchify_is_lossless(x in sized_matrix(3, 70, 10.0), half in 1usize..9) {
        let set = patchify(x.view(), 2 * half).unwrap();
        prop_assert_eq!(set.patches_per_channel, x.ncols().div_ceil(2 * half));
        prop_assert_eq!(unpatchify(&set), x);
    }

    #[test]
    fn downsample_inverts_upsample(v in prop::collection::vec(-1e6f64..1e6, 1..32)) {
        let v = Array1::from(v);
        prop_assert_eq!(downsample(upsample(v.view()).view()).unwrap(), v);
    }

    #[test]
    fn nearest_codeword_is_first_argmin(cw in sized_matrix(8, 6, 3.0), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = rand::Rng::random_range(&mut rng, 0..cw.nrows());
        // Querying an existing codeword, possibly duplicated, must return its first copy.
        let query = cw.row(pick).to_owned();
        let got = nearest_codeword(cw.view(), query.view());
        let dist = |k: usize| cw.row(k).iter().zip(query.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let best = (0..cw.nrows()).map(dist).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(dist(got), best);
        prop_assert!((0..got).all(|k| dist(k) > best));
    }

    #[test]
    fn dro_is_bounded_softmin(rep in -5.0f64..5.0, delta in -5.0f64..5.0, je in -5.0f64..5.0, log_gamma in -1.0f64..1.5) {
        let gamma = 10f64.powf(log_gamma);
        let z = [rep, delta, je];
        let v = dro_fuse(&ScoreTriple { rep, delta, je }, gamma).unwrap();
        let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
        let direct = -gamma * z.iter().map(|zi| (-zi / gamma).exp()).sum::<f64>().ln();
        prop_assert!((v - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        prop_assert!(v <= min + 1e-12);
        prop_assert!(v >= min - gamma * 3f64.ln() - 1e-12);
    }

    #[test]
    fn mean_one_weights_average_one(raw in prop::collection::vec((0.0f64..1.0, 0.01f64..1.0, 0.0f64..1.0), 1..12)) {
        let scores: Vec<_> = raw.iter().map(|&(rep, delta, je)| ScoreTriple { rep, delta, je }).collect();
        let w = fuse_and_normalize(&scores, 1.0, WeightNorm::MeanOne).unwrap();
        prop_assert!(w.normalized.iter().all(|&x| x > 0.0));
        prop_assert!((w.normalized.mean().unwrap() - 1.0).abs() < 1e-9);
        let s = fuse_and_normalize(&scores, 1.0, WeightNorm::SumOne).unwrap();
        prop_assert!((s.normalized.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn incremental_update_is_running_weighted_average(
        pseudo in prop::collection::vec(matrix(3, 4, 2.0), 2..8),
        weights in prop::collection::vec(prop::collection::vec(0.1f64..3.0, 3), 8),
    ) {
        let mut book = init_codebook(&PseudoCodebook { centers: pseudo[0].clone(), epoch: 1 }).unwrap();
        for (j, centers) in pseudo.iter().enumerate().skip(1) {
            let w = Array1::from(weights[j].clone());
            book = incremental_update(&book, &PseudoCodebook { centers: centers.clone(), epoch: j + 1 }, w.view()).unwrap();
        }
        let t = pseudo.len();
        let mut expected = pseudo[0].clone();
        for (j, centers) in pseudo.iter().enumerate().skip(1) {
            for (k, mut row) in expected.outer_iter_mut().enumerate() {
                row.scaled_add(weights[j][k], &centers.row(k));
            }
        }
        expected /= t as f64;
        prop_assert_eq!(book.epoch, t);
        for (a, b) in book.codewords.iter().zip(expected.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lloyd_energy_never_rises(patches in sized_matrix(40, 5, 4.0), k in 1usize..6, seed in any::<u64>()) {
        prop_assume!(patches.nrows() >= k);
        let init = kmeans_plus_plus(patches.view(), k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let result = lloyd_cluster(patches.view(), k, init.view(), 50, 1).unwrap();
        for w in result.energy_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn sampled_patches_are_an_ordered_subset(n in 1usize..200, ratio in 0.01f64..=1.0, seed in any::<u64>(), epoch in 1usize..30) {
        let pool = Array2::from_shape_fn((n, 2), |(i, j)| (2 * i + j) as f64);
        let sample = sample_patches(pool.view(), ratio, seed, epoch).unwrap();
        // An empty draw falls back to the whole pool.
        let expected = match (n as f64 * ratio).floor() as usize {
            0 => n,
            m => m,
        };
        prop_assert_eq!(sample.nrows(), expected);
        let ids: Vec<usize> = sample.column(0).iter().map(|v| (*v as usize) / 2).collect();
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(sample_patches(pool.view(), ratio, seed, epoch).unwrap(), sample);
    }

    #[test]
    fn window_count_matches_enumeration(len in 1usize..300, l in 1usize..50, h in 1usize..50, stride in 1usize..7) {
        let frame = SeriesFrame::from_values(Array2::from_shape_fn((1, len), |(_, t)| t as f64)).unwrap();
        let windows = make_windows(&frame, l, h, stride);
        prop_assert_eq!(windows.len(), window_count(len, l, h, stride));
        for (i, w) in windows.iter().enumerate() {
            prop_assert_eq!(w.x[[0, 0]], (i * stride) as f64);
            prop_assert_eq!(w.y[[0, 0]], (i * stride + l) as f64);
        }
    }

    #[test]
    fn config_text_roundtrips(lr in 1e-6f64..1.0, gamma in 0.01f64..50.0, seed in any::<u64>(), epochs in 1usize..100) {
        let cfg = TrainConfig { lr, gamma, seed, epochs, ..TrainConfig::default() };
        let back = TrainConfig::from_kv_text(&cfg.to_kv()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back.lr.to_bits(), lr.to_bits());
    }
}

#[test]
fn codebook_rejects_wrong_weight_count() {
    let book = Codebook::new(Array2::<f64>::zeros((3, 2)), 1).unwrap();
    let pseudo = PseudoCodebook { centers: Array2::zeros((3, 2)), epoch: 2 };
    assert!(incremental_update(&book, &pseudo, Array1::ones(2).view()).is_err());
}
