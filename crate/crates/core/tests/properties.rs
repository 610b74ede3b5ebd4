use gsplat_codec::codec::{self, lossy_divisor};
use gsplat_codec::geometry::{self, Quat};
use gsplat_codec::quantizer::{dequantize_plane, quantize_plane, MAX_INDEX};
use gsplat_codec::vpt::{vpt_forward, vpt_inverse};
use gsplat_codec::{Camera64, Gaussian64, Plane};
use proptest::prelude::*;

fn plane_strategy(max_side: usize, max_value: u16) -> impl Strategy<Value = Plane<u16>> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(w, h)| {
        prop::collection::vec(0..=max_value, w * h).prop_map(move |data| Plane::from_vec(w, h, data))
    })
}

/// Sum of three random low-frequency sinusoids over a 14-bit range.
fn smooth_plane() -> impl Strategy<Value = Plane<u16>> {
    (
        16usize..64,
        16usize..64,
        prop::collection::vec((0.0f64..3000.0, 0.0f64..0.25, 0.0f64..0.25, 0.0f64..6.3), 3),
    )
        .prop_map(|(w, h, waves)| {
            let data = (0..w * h)
                .map(|i| {
                    let (r, c) = ((i / w) as f64, (i % w) as f64);
                    let v: f64 = waves.iter().map(|(a, fx, fy, ph)| a * (fx * c + fy * r + ph).sin()).sum();
                    (8192.0 + v).clamp(0.0, MAX_INDEX as f64) as u16
                })
                .collect();
            Plane::from_vec(w, h, data)
        })
}

fn unit_quat() -> impl Strategy<Value = Quat<f64>> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate", |q| geometry::quat_norm(q) > 0.1)
        .prop_map(|q| geometry::quat_canonical(&geometry::quat_normalize(&q)))
}

fn camera_strategy() -> impl Strategy<Value = Camera64> {
    (unit_quat(), prop::array::uniform3(-3.0f64..3.0), 20.0f64..400.0, 0.8f64..1.25, 4u32..24, 4u32..24).prop_map(
        |(q, t, fx, aspect, w, h)| Camera64 {
            fx,
            fy: fx * aspect,
            cx: w as f64 / 2.0,
            cy: h as f64 / 2.0,
            rotation: geometry::quat_to_mat(&q),
            translation: t,
            width: w,
            height: h,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lossless_round_trip(plane in plane_strategy(48, MAX_INDEX)) {
        let ep = codec::encode_plane_lossless(&plane).unwrap();
        prop_assert!(!ep.payload.is_empty());
        prop_assert_eq!(codec::decode_plane(&ep, None).unwrap(), plane);
    }

    #[test]
    fn lossy_error_within_half_divisor(plane in plane_strategy(32, MAX_INDEX), qp in 0i32..40) {
        let d = lossy_divisor(qp);
        let ep = codec::encode_plane_lossy(&plane, qp).unwrap();
        let back = codec::decode_plane(&ep, None).unwrap();
        for (a, b) in plane.data.iter().zip(&back.data) {
            prop_assert!((*a as i64 - *b as i64).unsigned_abs() <= d.div_ceil(2) as u64);
        }
    }

    #[test]
    fn lossy_rate_monotone_in_qp(plane in smooth_plane()) {
        let sizes: Vec<usize> = [0, 6, 12, 18]
            .iter()
            .map(|&qp| codec::encode_plane_lossy(&plane, qp).unwrap().payload.len())
            .collect();
        for w in sizes.windows(2) {
            prop_assert!(w[1] <= w[0], "{:?}", sizes);
        }
    }

    #[test]
    fn quantizer_error_bound(
        values in prop::collection::vec(-1e3f64..1e3, 1..400),
        alpha in 1.0f64..4096.0,
    ) {
        let n = values.len();
        let plane = Plane::from_vec(n, 1, values);
        let (idx, meta) = quantize_plane(&plane, alpha, None).unwrap();
        let back: Plane<f64> = dequantize_plane(&idx, &meta);
        let step = meta.step as f64;
        for ((v, r), i) in plane.data.iter().zip(&back.data).zip(&idx.data) {
            if *i < MAX_INDEX {
                prop_assert!((v - r).abs() <= step / 2.0 * (1.0 + 1e-9) + 1e-12, "{v} {r} {step}");
            }
        }
    }

    #[test]
    fn constant_planes_are_exact(v in -1e6f32..1e6, w in 1usize..20, h in 1usize..20) {
        let plane = Plane::filled(w, h, v);
        let (idx, meta) = quantize_plane(&plane, 1024.0, None).unwrap();
        let back: Plane<f32> = dequantize_plane(&idx, &meta);
        prop_assert!(back.data.iter().all(|&x| x == v));
    }

    #[test]
    fn vpt_round_trip(cam in camera_strategy(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = (cam.width * cam.height) as usize;
        let records: Vec<Gaussian64> = (0..n)
            .map(|_| {
                let pc = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.2..20.0)];
                let q = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                Gaussian64 {
                    mu: cam.camera_to_world(&pc),
                    q: geometry::quat_canonical(&geometry::quat_normalize(&q)),
                    s: [rng.gen_range(1e-3..1.0), rng.gen_range(1e-3..1.0), rng.gen_range(1e-3..1.0)],
                    sh: vec![],
                    sigma: 0.5,
                }
            })
            .collect();
        let planes = vpt_forward(&cam, &records).unwrap();
        let back = vpt_inverse(&cam, &planes).unwrap();
        for (a, b) in records.iter().zip(&back) {
            for i in 0..3 {
                prop_assert!((a.mu[i] - b.mu[i]).abs() <= 1e-9 * (1.0 + a.mu[i].abs()));
                prop_assert!((a.s[i] - b.s[i]).abs() <= 1e-9 * a.s[i]);
            }
            for i in 0..4 {
                prop_assert!((a.q[i] - b.q[i]).abs() <= 1e-9);
            }
        }
    }
}
