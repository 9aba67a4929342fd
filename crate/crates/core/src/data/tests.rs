use proptest::prelude::*;

use super::skeleton::{mat3_mul, random_rotation, rotate, rotation_matrix};
use super::*;

fn small_spec(seed: u64) -> DistractorSpec {
    DistractorSpec {
        train: 60,
        val: 9,
        test: 30,
        seed,
        ..DistractorSpec::default()
    }
}

#[test]
fn spec_rejects_informative_not_below_dims() {
    for s in [20, 21, 0] {
        let spec = DistractorSpec {
            informative: s,
            ..DistractorSpec::default()
        };
        assert!(gen_distractor(&spec).is_err(), "S = {s}");
    }
    let bad_len = DistractorSpec {
        min_len: 5,
        max_len: 4,
        ..DistractorSpec::default()
    };
    assert!(bad_len.validate().is_err());
}

#[test]
fn generation_is_deterministic_in_seed() {
    let a = gen_distractor(&small_spec(3)).unwrap();
    let b = gen_distractor(&small_spec(3)).unwrap();
    let c = gen_distractor(&small_spec(4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.train, c.train);
}

#[test]
fn splits_have_requested_shapes() {
    let spec = small_spec(1);
    let s = gen_distractor(&spec).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 9, 30));
    assert_eq!(s.informative.len(), spec.informative);
    assert!(s.informative.windows(2).all(|w| w[0] < w[1]));
    for batch in [&s.train, &s.val, &s.test] {
        assert_eq!(batch.dim(), 20);
        for len in batch.lengths() {
            assert!((spec.min_len..=spec.max_len).contains(&len));
        }
        let mut counts = [0usize; 3];
        for &l in batch.labels() {
            counts[l] += 1;
        }
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }
}

#[test]
fn splits_share_no_sequences() {
    let s = gen_distractor(&small_spec(2)).unwrap();
    for x in s.train.inputs() {
        assert!(!s.test.inputs().contains(x));
        assert!(!s.val.inputs().contains(x));
    }
}

#[test]
fn values_are_f32_representable() {
    let s = gen_distractor(&small_spec(5)).unwrap();
    for x in s.train.inputs() {
        assert!(x.data().iter().all(|&v| f64::from(v as f32) == v));
    }
}

#[test]
fn distractors_are_label_independent_noise() {
    let spec = DistractorSpec {
        train: 600,
        val: 0,
        test: 0,
        ..small_spec(9)
    };
    let s = gen_distractor(&spec).unwrap();
    let sd = spec.noise * spec.distractor_scale;
    let noise_dims: Vec<usize> = (0..spec.dims).filter(|d| !s.informative.contains(d)).collect();
    // Per-class mean of every distractor dimension stays within a few
    // standard errors of zero; informative dimensions separate the classes.
    let mut class_means = vec![vec![0.0; spec.dims]; 3];
    let mut class_n = [0usize; 3];
    let mut sq = vec![0.0; spec.dims];
    let mut total = 0usize;
    for (x, &k) in s.train.inputs().iter().zip(s.train.labels()) {
        for t in 0..x.cols() {
            for r in 0..spec.dims {
                class_means[k][r] += x.get(r, t);
                sq[r] += x.get(r, t) * x.get(r, t);
            }
            class_n[k] += 1;
            total += 1;
        }
    }
    for k in 0..3 {
        for r in 0..spec.dims {
            class_means[k][r] /= class_n[k] as f64;
        }
    }
    for &r in &noise_dims {
        let stderr = sd / (class_n.iter().min().copied().unwrap() as f64).sqrt();
        for means in &class_means {
            assert!(means[r].abs() < 5.0 * stderr, "dim {r}: {}", means[r]);
        }
        let var = sq[r] / total as f64;
        assert!((var.sqrt() / sd - 1.0).abs() < 0.05);
    }
    let spread = |r: usize| {
        let m: Vec<f64> = class_means.iter().map(|c| c[r]).collect();
        m.iter().cloned().fold(f64::MIN, f64::max) - m.iter().cloned().fold(f64::MAX, f64::min)
    };
    let best_informative = s.informative.iter().map(|&r| spread(r)).fold(0.0, f64::max);
    let worst_noise = noise_dims.iter().map(|&r| spread(r)).fold(0.0, f64::max);
    assert!(best_informative > worst_noise);
}

#[test]
fn holdout_split_partitions() {
    let s = gen_distractor(&small_spec(1)).unwrap();
    let (kept, held) = holdout_split(&s.train, 0.1, 7);
    assert_eq!(held.len(), 6);
    assert_eq!(kept.len() + held.len(), s.train.len());
    for x in held.inputs() {
        assert!(!kept.inputs().contains(x));
    }
    assert_eq!(holdout_split(&s.train, 0.1, 7), (kept, held));
    let (one, none) = holdout_split(&s.train.subset(&[0]), 0.5, 1);
    assert_eq!((one.len(), none.len()), (1, 0));
}

// --- skeleton ---

fn skeleton(joints: usize, frames: usize, seed: u64) -> SkeletonSequence {
    let mut rng = RngStream::new(seed);
    SkeletonSequence::new(rng.uniform(-2.0, 2.0, 3 * joints, frames).unwrap()).unwrap()
}

fn frame_centroid(seq: &SkeletonSequence, t: usize) -> [f64; 3] {
    let mut c = [0.0; 3];
    for j in 0..seq.joints() {
        for (a, v) in seq.joint(j, t).iter().enumerate() {
            c[a] += v / seq.joints() as f64;
        }
    }
    c
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[test]
fn skeleton_requires_multiple_of_three() {
    assert!(SkeletonSequence::new(Tensor2::zeros(4, 2)).is_err());
    assert!(SkeletonSequence::new(Tensor2::zeros(6, 0)).is_err());
    assert_eq!(skeleton(5, 3, 0).joints(), 5);
}

#[test]
fn centering_zeroes_first_frame_centroid() {
    let seq = skeleton(7, 4, 1);
    let c = center_first_frame(&seq, BodyCenter::Centroid).unwrap();
    for v in frame_centroid(&c, 0) {
        assert!(v.abs() < 1e-12);
    }
    // Later frames move by the same translation.
    let shift = frame_centroid(&seq, 0);
    for a in 0..3 {
        assert!((c.joint(2, 3)[a] - (seq.joint(2, 3)[a] - shift[a])).abs() < 1e-15);
    }
}

#[test]
fn centering_is_idempotent_and_translation_invariant() {
    let seq = skeleton(4, 5, 2);
    let once = center_first_frame(&seq, BodyCenter::Centroid).unwrap();
    let twice = center_first_frame(&once, BodyCenter::Centroid).unwrap();
    assert!(once.frames().sub(twice.frames()).unwrap().max_abs() < 1e-12);

    let offset = [3.5, -1.25, 10.0];
    let mut moved = seq.frames().clone();
    for t in 0..moved.cols() {
        for r in 0..moved.rows() {
            moved.set(r, t, moved.get(r, t) + offset[r % 3]);
        }
    }
    let moved = center_first_frame(&SkeletonSequence::new(moved).unwrap(), BodyCenter::Centroid).unwrap();
    assert!(moved.frames().sub(once.frames()).unwrap().max_abs() < 1e-12);
}

#[test]
fn centering_on_named_joint() {
    let seq = skeleton(4, 3, 3);
    let c = center_first_frame(&seq, BodyCenter::Joint(2)).unwrap();
    assert_eq!(c.joint(2, 0), [0.0, 0.0, 0.0]);
    assert!(center_first_frame(&seq, BodyCenter::Joint(4)).is_err());
}

#[test]
fn zero_angles_give_identity() {
    let r = rotation_matrix(0.0, 0.0, 0.0);
    assert_eq!(r, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let seq = skeleton(3, 2, 4);
    assert_eq!(rotate(&seq, &r), seq);
}

#[test]
fn rotation_order_is_x_then_y_then_z() {
    // Rx(90°)·Ry(90°)·Rz(90°) applied to e_x: Rz e_x = e_y, Ry e_y = e_y,
    // Rx e_y = e_z.
    let h = std::f64::consts::FRAC_PI_2;
    let r = rotation_matrix(h, h, h);
    let ex = [r[0][0], r[1][0], r[2][0]];
    assert!(dist(ex, [0.0, 0.0, 1.0]) < 1e-15);
}

#[test]
fn random_rotations_are_proper() {
    let mut rng = RngStream::new(11);
    for _ in 0..100 {
        let r = random_rotation(&mut rng);
        assert!((det3(&r) - 1.0).abs() < 1e-12);
        let mut rt = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rt[i][j] = r[j][i];
            }
        }
        let id = mat3_mul(&rt, &r);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i][j] - e).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn rotation_angles_stay_in_range() {
    // The X rotation angle is recoverable from Rx·Ry·Rz as atan2(-r12, r22).
    let mut rng = RngStream::new(12);
    let limit = 35f64.to_radians() + 1e-12;
    for _ in 0..200 {
        let r = random_rotation(&mut rng);
        let ax = (-r[1][2]).atan2(r[2][2]);
        let ay = r[0][2].asin();
        let az = (-r[0][1]).atan2(r[0][0]);
        assert!(ax.abs() <= limit && ay.abs() <= limit && az.abs() <= limit);
    }
}

proptest! {
    #[test]
    fn augmentation_preserves_joint_distances(seed in 0u64..500, joints in 2usize..8) {
        let seq = skeleton(joints, 3, seed);
        let out = rotate_augment(&seq, &mut RngStream::new(seed ^ 0xabc));
        for t in 0..3 {
            for a in 0..joints {
                for b in 0..joints {
                    let before = dist(seq.joint(a, t), seq.joint(b, t));
                    let after = dist(out.joint(a, t), out.joint(b, t));
                    prop_assert!((before - after).abs() < 1e-9);
                }
            }
        }
    }
}

// --- files ---

fn dataset(seed: u64) -> Dataset {
    let spec = small_spec(seed);
    Dataset::from_distractor(&spec, gen_distractor(&spec).unwrap())
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let ds = dataset(6);
    let bytes = ds.to_bytes().unwrap();
    let back = Dataset::from_bytes(&bytes).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    let gen = gen_distractor(&small_spec(6)).unwrap();
    assert_eq!(back.informative_dims().unwrap().unwrap(), gen.informative);
}

#[test]
fn dataset_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    let ds = dataset(7);
    save_dataset(&ds, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), ds);
}

#[test]
fn dataset_hash_is_stable() {
    assert_eq!(dataset(8).hash().unwrap(), dataset(8).hash().unwrap());
    assert_ne!(dataset(8).hash().unwrap(), dataset(9).hash().unwrap());
    assert_eq!(dataset(8).hash().unwrap().len(), 64);
}

#[test]
fn dataset_version_mismatch_rejected() {
    let bytes = dataset(1).to_bytes().unwrap();
    let mut body = bytes[..bytes.len() - 4].to_vec();
    let pos = body.windows(10).position(|w| w == b"version=1\n").unwrap();
    body[pos + 8] = b'2';
    let crc = crc32fast::hash(&body);
    body.extend_from_slice(&crc.to_le_bytes());
    assert!(matches!(
        Dataset::from_bytes(&body),
        Err(Error::VersionMismatch { expected: 1, found: 2 })
    ));
}

#[test]
fn dataset_corruption_detected() {
    let bytes = dataset(2).to_bytes().unwrap();
    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(matches!(Dataset::from_bytes(&flipped), Err(Error::Integrity(_))));
    assert!(matches!(Dataset::from_bytes(&bytes[..bytes.len() - 9]), Err(Error::Integrity(_))));
    assert!(Dataset::from_bytes(b"").is_err());
}

#[test]
fn empty_dataset_rejected() {
    let empty = Dataset {
        train: SequenceBatch::empty(3, 2),
        val: SequenceBatch::empty(3, 2),
        test: SequenceBatch::empty(3, 2),
        meta: KvConfig::new(),
    };
    assert!(matches!(empty.to_bytes(), Err(Error::EmptyDataset)));
}
