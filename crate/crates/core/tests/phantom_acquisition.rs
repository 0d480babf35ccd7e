//! Phantom geometry, acquisition noise and the gold-standard loop.

use std::f64::consts::PI;

use csm::phantom::{
    acquire, generate_coilmaps, generate_magnitude, generate_phantom, PhantomKind, PhantomSpec,
};
use csm::recon::gold_standard;
use csm::sampling::make_mask;
use csm::SamplingMask;

#[test]
fn ventricle_area_tracks_the_analytic_ellipse() {
    let spec = PhantomSpec {
        papillary: false,
        ..PhantomSpec::default()
    };
    let mag = generate_magnitude(&spec).unwrap();
    let n = spec.height * spec.width;
    for k in 0..spec.frames {
        let layout = spec.layout(k);
        let v = layout.ventricle;
        let analytic = PI * v.a * v.b;
        // Blood is the only level above the myocardium; partial-volume
        // pixels contribute their blood fraction.
        let (lo, hi) = (layout.myocardium_level, layout.blood_level);
        let measured: f64 = mag[k * n..(k + 1) * n]
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let (x, y) = ((i % spec.width) as f64, (i / spec.width) as f64);
                (x - v.cx).abs() <= v.a + 2.0 && (y - v.cy).abs() <= v.b + 2.0
            })
            .map(|(_, &m)| ((m - lo) / (hi - lo)).clamp(0.0, 1.0))
            .sum();
        assert!(
            (measured - analytic).abs() <= 0.01 * analytic,
            "frame {k}: {measured} vs {analytic}"
        );
    }
}

#[test]
fn complex_noise_has_the_requested_std() {
    let spec = PhantomSpec {
        frames: 4,
        height: 128,
        width: 128,
        ..PhantomSpec::default()
    };
    let u = generate_phantom(&spec).unwrap();
    let maps = generate_coilmaps(2, 128, 128, 3).unwrap();
    let full = SamplingMask::full(4, 128, 128).unwrap();
    let sigma = 0.05;
    let clean = acquire(&u, &maps, &full, 0.0, 9).unwrap();
    let noisy = acquire(&u, &maps, &full, sigma, 9).unwrap();
    let diffs: Vec<f64> = clean
        .data()
        .iter()
        .zip(noisy.data())
        .map(|(a, b)| (b - a).norm_sqr())
        .collect();
    assert!(diffs.len() >= 100_000);
    let std = (diffs.iter().sum::<f64>() / diffs.len() as f64).sqrt();
    assert!((std - sigma).abs() <= 0.03 * sigma, "empirical std {std}");
}

#[test]
fn unsampled_entries_stay_zero_under_noise() {
    let spec = PhantomSpec {
        frames: 3,
        height: 64,
        width: 64,
        ..PhantomSpec::default()
    };
    let u = generate_phantom(&spec).unwrap();
    let maps = generate_coilmaps(3, 64, 64, 1).unwrap();
    let mask = make_mask(3, 64, 64, 4.0, 8, 3.0, 5).unwrap();
    let y = acquire(&u, &maps, &mask, 0.1, 2).unwrap();
    for k in 0..3 {
        for c in 0..3 {
            for (i, z) in y.slice(k, c).iter().enumerate() {
                if mask.frame(k)[i] == 0 {
                    assert_eq!(z.norm(), 0.0);
                }
            }
        }
    }
}

#[test]
fn gold_standard_of_clean_full_data_is_the_magnitude() {
    for kind in [
        PhantomKind::Cine,
        PhantomKind::Perfusion,
        PhantomKind::Static,
    ] {
        let spec = PhantomSpec {
            kind,
            frames: 4,
            height: 48,
            width: 40,
            motion_amplitude: 2.0,
            ..PhantomSpec::default()
        };
        let u = generate_phantom(&spec).unwrap();
        let maps = generate_coilmaps(4, 48, 40, 2).unwrap();
        let y = acquire(&u, &maps, &SamplingMask::full(4, 48, 40).unwrap(), 0.0, 0).unwrap();
        let gold = gold_standard(&y, &maps).unwrap();
        let err = gold
            .data()
            .iter()
            .zip(u.data())
            .map(|(g, t)| (g.re - t.norm()).abs() + g.im.abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-8, "{kind}: {err}");
    }
}

#[test]
fn acquisitions_are_bitwise_reproducible() {
    let spec = PhantomSpec {
        frames: 3,
        height: 32,
        width: 32,
        motion_amplitude: 2.0,
        ..PhantomSpec::default()
    };
    let u = generate_phantom(&spec).unwrap();
    let maps = generate_coilmaps(2, 32, 32, 7).unwrap();
    let mask = make_mask(3, 32, 32, 2.0, 4, 3.0, 1).unwrap();
    let a = acquire(&u, &maps, &mask, 0.01, 4).unwrap();
    let b = acquire(&u, &maps, &mask, 0.01, 4).unwrap();
    assert_eq!(a, b);
}
