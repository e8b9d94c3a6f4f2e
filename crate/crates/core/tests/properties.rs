use mcsimclr::audio::MultiChannelWaveform;
use mcsimclr::augment::{channel_swap, resize_crop, sample_window, ChannelSwapArrangement, CropWindow, RrcParams};
use mcsimclr::eval::{angular_error, wrap_deg};
use mcsimclr::features::{gcc_phat, stft, FeatureStack, StftConfig};
use mcsimclr::nn::{lr_at, LrSchedule};
use mcsimclr::rng::RngStream;
use mcsimclr::roomsim::{sample_scene, RoomScene};
use mcsimclr::ssl::{nt_xent, NtXentConfig};
use proptest::prelude::*;

fn arrangement() -> impl Strategy<Value = ChannelSwapArrangement> {
    (0..8usize).prop_map(|i| ChannelSwapArrangement::from_index(i).unwrap())
}

fn gaussian_rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = RngStream::new(seed);
    (0..n).map(|_| (0..d).map(|_| rng.gaussian()).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrap_lands_in_half_open_circle(deg in -1e4f64..1e4) {
        let w = wrap_deg(deg);
        prop_assert!(w > -180.0 && w <= 180.0);
        let turns = (deg - w) / 360.0;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn angular_error_is_a_bounded_circular_distance(pred in -180f64..180.0, label in -180f64..180.0, r in 0.01f64..10.0) {
        let (s, c) = pred.to_radians().sin_cos();
        let e = angular_error((r * c, r * s), label);
        prop_assert!((0.0..=180.0 + 1e-9).contains(&e));
        let back = angular_error((label.to_radians().cos(), label.to_radians().sin()), pred);
        prop_assert!((e - back).abs() < 1e-6);
        let direct = (pred - label).abs();
        prop_assert!((e - direct.min(360.0 - direct)).abs() < 1e-6);
    }

    #[test]
    fn swap_arrangements_form_a_group(a in arrangement(), b in arrangement(), theta in -180f64..180.0) {
        let ab = a.compose(&b);
        let lhs = ab.transform_azimuth(theta);
        let rhs = a.transform_azimuth(b.transform_azimuth(theta));
        prop_assert!(angular_error((lhs.to_radians().cos(), lhs.to_radians().sin()), rhs) < 1e-9);
        prop_assert_eq!(a.compose(&a.inverse()), ChannelSwapArrangement::IDENTITY);
        let mut perm_ab = [0usize; 4];
        let (pa, pb) = (a.permutation(), b.permutation());
        for k in 0..4 {
            perm_ab[k] = pb[pa[k]];
        }
        prop_assert_eq!(ab.permutation(), perm_ab);
    }

    #[test]
    fn swap_then_inverse_restores_channels(a in arrangement(), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let chans: Vec<Vec<f64>> = (0..4).map(|_| (0..64).map(|_| rng.gaussian()).collect()).collect();
        let w = MultiChannelWaveform::new(chans, 16_000).unwrap();
        let back = channel_swap(&channel_swap(&w, &a).unwrap(), &a.inverse()).unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn nt_xent_ignores_row_scale_and_pair_order(seed in any::<u64>(), n in 2usize..6, tau in 0.05f64..1.0) {
        let cfg = NtXentConfig { temperature: tau };
        let z = gaussian_rows(seed, 2 * n, 5);
        let base = nt_xent(&z, &cfg).unwrap().loss;
        prop_assert!(base >= 0.0);
        let mut rng = RngStream::new(seed ^ 0x5eed);
        let scaled: Vec<Vec<f64>> = z.iter().map(|r| {
            let k = rng.uniform(0.1, 10.0);
            r.iter().map(|v| v * k).collect()
        }).collect();
        prop_assert!((nt_xent(&scaled, &cfg).unwrap().loss - base).abs() < 1e-9);
        let mut rotated = z[2..].to_vec();
        rotated.extend_from_slice(&z[..2]);
        prop_assert!((nt_xent(&rotated, &cfg).unwrap().loss - base).abs() < 1e-9);
        let mut swapped = z.clone();
        swapped.swap(0, 1);
        prop_assert!((nt_xent(&swapped, &cfg).unwrap().loss - base).abs() < 1e-9);
    }

    #[test]
    fn nt_xent_gradient_is_orthogonal_to_each_row(seed in any::<u64>()) {
        // the loss only sees directions, so radial derivatives vanish
        let z = gaussian_rows(seed, 6, 4);
        let out = nt_xent(&z, &NtXentConfig::default()).unwrap();
        for (row, g) in z.iter().zip(&out.grads) {
            let radial: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
            prop_assert!(radial.abs() < 1e-9);
        }
    }

    #[test]
    fn gcc_is_bounded_by_one(seed in any::<u64>(), mix in 0.0f64..1.0) {
        let mut rng = RngStream::new(seed);
        let a: Vec<f64> = (0..3000).map(|_| rng.gaussian()).collect();
        let b: Vec<f64> = a.iter().map(|v| mix * v + (1.0 - mix) * rng.gaussian()).collect();
        let cfg = StftConfig::default();
        let g = gcc_phat(&stft(&a, cfg).unwrap(), &stft(&b, cfg).unwrap(), 64).unwrap();
        prop_assert!(g.data.iter().all(|v| v.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn crop_windows_fit_and_full_window_is_identity(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let (f, t) = (16, 21);
        if let Some(w) = sample_window(f, t, &RrcParams::default(), &mut rng) {
            prop_assert!(w.freq_start + w.height <= f && w.time_start + w.width <= t);
            prop_assert!(w.height >= 1 && w.width >= 1);
        }
        let roles = mcsimclr::features::stack_roles(4);
        let n = roles.len() * f * t;
        let data: Vec<f32> = (0..n).map(|_| rng.gaussian() as f32).collect();
        let stack = FeatureStack::new(data, f, t, roles).unwrap();
        prop_assert_eq!(resize_crop(&stack, &CropWindow::full(f, t)).unwrap(), stack);
    }

    #[test]
    fn schedule_stays_within_base_rate(base in 1e-4f64..1.0, warm in 0usize..10, extra in 1usize..50) {
        let s = LrSchedule::new(base, warm, warm + extra);
        let lrs: Vec<f64> = (0..warm + extra).map(|e| lr_at(e, &s)).collect();
        prop_assert!(lrs.iter().all(|&l| l >= 0.0 && l <= base * (1.0 + 1e-12)));
        prop_assert!(lrs[warm..].windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn sampled_scenes_respect_their_ranges(seed in any::<u64>()) {
        let scene: RoomScene = sample_scene(&mut RngStream::new(seed)).unwrap();
        prop_assert!(scene.satisfies(&Default::default()));
        prop_assert!(scene.azimuth_deg > -180.0 && scene.azimuth_deg <= 180.0);
    }
}
