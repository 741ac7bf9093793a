//! Property-based invariants across modules.

use std::path::Path;

use proptest::prelude::*;
use stinr::io::{parse_config, ArrayContainer, ArrayData};
use stinr::loss::{dc_loss, nuclear_loss, tv_loss};
use stinr::metrics::{nrmse_kspace, psnr, ssim};
use stinr::numerics::ComplexArray;
use stinr::trajectory::{golden_angle_trajectory, spoke_angle, GOLDEN_ANGLE_DEG};
use stinr::{DynamicImage, Error, C64};

fn wrap(k: f64) -> f64 {
    use std::f64::consts::PI;
    (k + PI).rem_euclid(2.0 * PI) - PI
}

#[test]
fn spokes_144_apart_share_a_line() {
    // 144 · 111.25° = 44 · 360° + 180°: the same line, opposite direction
    for i in 0..200 {
        let a = spoke_angle(i).to_degrees();
        let b = spoke_angle(i + 144).to_degrees();
        let d = (b - a).rem_euclid(360.0);
        assert!((d - 180.0).abs() < 1e-9, "spoke {i}: {d}");
        assert!(d.rem_euclid(180.0).min(180.0 - d.rem_euclid(180.0)) < 0.26);
    }
    assert_eq!(GOLDEN_ANGLE_DEG * 144.0, 44.0 * 360.0 + 180.0);
}

#[test]
fn reversed_spoke_is_reflected_sample_set() {
    let s = 16;
    let traj = golden_angle_trajectory(8, 1, 150, s).unwrap();
    let coords = traj.coords();
    for i in [0, 3, 5] {
        let mut fwd: Vec<[i64; 2]> = coords[i * s..(i + 1) * s]
            .iter()
            .map(|k| [(wrap(-k[0]) * 1e9).round() as i64, (wrap(-k[1]) * 1e9).round() as i64])
            .collect();
        let mut rev: Vec<[i64; 2]> = coords[(i + 144) * s..(i + 145) * s]
            .iter()
            .map(|k| [(wrap(k[0]) * 1e9).round() as i64, (wrap(k[1]) * 1e9).round() as i64])
            .collect();
        fwd.sort();
        rev.sort();
        for (a, b) in fwd.iter().zip(&rev) {
            assert!((a[0] - b[0]).abs() <= 2 && (a[1] - b[1]).abs() <= 2, "{a:?} {b:?}");
        }
    }
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), len)
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dc_is_permutation_invariant(p in complex_vec(12), y in complex_vec(12), perm in Just((0..12).collect::<Vec<usize>>()).prop_shuffle()) {
        let (a, _) = dc_loss(&p, &y, 1e-4).unwrap();
        let pp: Vec<C64> = perm.iter().map(|&i| p[i]).collect();
        let yy: Vec<C64> = perm.iter().map(|&i| y[i]).collect();
        let (b, _) = dc_loss(&pp, &yy, 1e-4).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn tv_is_nonnegative_and_zero_only_when_static(v in complex_vec(18), still in any::<bool>()) {
        let data = if still { [&v[..9], &v[..9]].concat() } else { v.clone() };
        let d = DynamicImage::new(3, 2, data.clone()).unwrap();
        let (tv, _) = tv_loss(&d);
        prop_assert!(tv >= 0.0);
        let moving = (0..9).any(|i| (data[i + 9] - data[i]).norm() > 1e-12);
        prop_assert_eq!(tv == 0.0, !moving);
    }

    #[test]
    fn nuclear_norm_ignores_global_phase(v in complex_vec(48), theta in 0.0f64..6.28) {
        let d = DynamicImage::new(4, 3, v.clone()).unwrap();
        let rot = DynamicImage::new(4, 3, v.iter().map(|z| z * C64::from_polar(1.0, theta)).collect()).unwrap();
        let a = nuclear_loss(&d).unwrap().0;
        let b = nuclear_loss(&rot).unwrap().0;
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn psnr_and_ssim_are_symmetric(a in prop::collection::vec(0.0f64..1.0, 32), b in prop::collection::vec(0.0f64..1.0, 32)) {
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let (s1, s2) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        prop_assert!((s1 - s2).abs() < 1e-15);
        prop_assert!((-1.0..=1.0).contains(&s1));
    }

    #[test]
    fn nrmse_ignores_common_scaling(p in complex_vec(32), m in complex_vec(32), re in 0.1f64..5.0, im in -5.0f64..5.0) {
        let pa = ComplexArray::new(vec![2, 1, 4, 4], p).unwrap();
        let ma = ComplexArray::new(vec![2, 1, 4, 4], m).unwrap();
        prop_assume!(ma.data()[..16].iter().any(|z| z.norm() > 1e-3) && ma.data()[16..].iter().any(|z| z.norm() > 1e-3));
        let base = nrmse_kspace(&pa, &ma).unwrap();
        let (mut ps, mut ms) = (pa.clone(), ma.clone());
        ps.scale(C64::new(re, im));
        ms.scale(C64::new(re, im));
        for (x, y) in base.iter().zip(nrmse_kspace(&ps, &ms).unwrap()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn container_round_trip_is_exact(v in prop::collection::vec(any::<f64>(), 0..40), b in prop::collection::vec(any::<bool>(), 6)) {
        let f = ArrayContainer::new(vec![v.len()], "f", ArrayData::F64(v.clone())).unwrap();
        let back = ArrayContainer::from_bytes(&f.to_bytes(), Path::new("m")).unwrap();
        prop_assert_eq!(back.to_bytes(), f.to_bytes());
        let c = ArrayContainer::new(vec![2, 3], "mask", ArrayData::Bool(b)).unwrap();
        let back = ArrayContainer::from_bytes(&c.to_bytes(), Path::new("m")).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn config_parsing_is_total(text in "[a-z_\\[\\]=. 0-9\"\n]{0,80}") {
        match parse_config(&text) {
            Ok(spec) => prop_assert!(spec.validate().is_ok()),
            Err(Error::Config { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e:?}"),
        }
    }

    #[test]
    fn misspelled_keys_are_located(key in "[a-z]{3,10}") {
        prop_assume!(!["lambda_s", "lambda_l", "eps_dc", "lr", "beta1", "beta2", "eps_adam", "epochs"].contains(&key.as_str()));
        let text = format!("[recon]\nlambda_s = 0.1\nlambda_l = 0.1\n{key} = 1\n");
        match parse_config(&text) {
            Err(Error::Config { line, message }) => {
                prop_assert_eq!(line, 4);
                prop_assert!(message.contains(&key));
            }
            other => prop_assert!(false, "expected config error, got {other:?}"),
        }
    }
}

#[test]
fn roi_on_ramp_disc_tracks_analytic_ramp() {
    use stinr::metrics::{roi_curve, RoiMask};
    use stinr::phantom::{generate_dynamic_image, PhantomSpec};
    let spec = PhantomSpec::cardiac(64, 16);
    let img = generate_dynamic_image(&spec).unwrap();
    let disc = &spec.ellipses[PhantomSpec::CARDIAC_RAMP_DISC];
    let mask = RoiMask::disc(64, disc.center, disc.semi_axes[0] - 1.0).unwrap();
    let curve = roi_curve(&img, &mask).unwrap();
    assert!(curve.values.windows(2).all(|w| w[1] > w[0]));
    // disc interior sits on the torso: 0.3 + 0.1 (1 + ramp t)
    for (t, v) in curve.values.iter().enumerate() {
        let analytic = 0.3 + 0.1 * (1.0 + disc.ramp * t as f64);
        assert!((v - analytic).abs() <= 0.02 * analytic, "t={t}: {v} vs {analytic}");
    }
}
