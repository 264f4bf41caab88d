use proptest::prelude::*;
use tacsim::marker::DisplacementField;
use tacsim::metrics::{image_metrics, marker_l1, ssim, Psnr};
use tacsim::TactileImage;

fn image(w: usize, h: usize) -> impl Strategy<Value = TactileImage> {
    prop::collection::vec(any::<u8>(), w * h * 3).prop_map(move |d| TactileImage::from_vec(w, h, d).unwrap())
}

/// Two images of the same random size; the second is often a perturbed copy.
fn pair() -> impl Strategy<Value = (TactileImage, TactileImage)> {
    (12usize..40, 12usize..40).prop_flat_map(|(w, h)| {
        (image(w, h), image(w, h), prop::collection::vec(-20i16..20, w * h * 3), any::<bool>()).prop_map(
            |(a, b, noise, perturb)| {
                if !perturb {
                    return (a, b);
                }
                let data = a.data().iter().zip(&noise).map(|(v, n)| (*v as i16 + n).clamp(0, 255) as u8).collect();
                let (w, h) = a.dims();
                (a, TactileImage::from_vec(w, h, data).unwrap())
            },
        )
    })
}

fn field(n: usize) -> impl Strategy<Value = DisplacementField> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n).prop_map(|vectors| DisplacementField { vectors })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn image_metrics_are_symmetric((a, b) in pair()) {
        let ab = image_metrics(&a, &b).unwrap();
        let ba = image_metrics(&b, &a).unwrap();
        prop_assert_eq!(ab.l1, ba.l1);
        prop_assert_eq!(ab.mse, ba.mse);
        prop_assert_eq!(ab.ssim, ba.ssim);
        prop_assert_eq!(ab.psnr, ba.psnr);
    }

    #[test]
    fn ssim_of_an_image_with_itself_is_one((a, _) in pair()) {
        prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let r = image_metrics(&a, &a).unwrap();
        prop_assert_eq!(r.mse, 0.0);
        prop_assert_eq!(r.psnr, Psnr::Infinite);
    }

    #[test]
    fn psnr_agrees_with_mse((a, b) in pair()) {
        let r = image_metrics(&a, &b).unwrap();
        match r.psnr {
            Psnr::Finite(p) => {
                let again = 10.0 * (255.0f64 * 255.0 / r.mse).log10();
                prop_assert!((p - again).abs() <= 1e-9, "{p} vs {again}");
            }
            Psnr::Infinite => prop_assert_eq!(r.mse, 0.0),
        }
    }

    #[test]
    fn ssim_is_bounded((a, b) in pair()) {
        let s = ssim(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s), "ssim {s}");
    }

    #[test]
    fn marker_error_is_symmetric_and_zero_on_itself((a, b) in (1usize..40).prop_flat_map(|n| (field(n), field(n)))) {
        prop_assert_eq!(marker_l1(&a, &b).unwrap(), marker_l1(&b, &a).unwrap());
        prop_assert_eq!(marker_l1(&a, &a).unwrap(), 0.0);
    }
}
