//! End-to-end reconstruction examples on small phantoms.

use csm::metrics::evaluate;
use csm::phantom::{acquire, generate_coilmaps, generate_phantom, PhantomKind, PhantomSpec};
use csm::recon::{
    objective_eq7, reconstruct_cs, reconstruct_csm, reconstruct_ls, zero_fill, LsParams,
};
use csm::sampling::make_mask;
use csm::{
    CoilMaps, FlowField, ImageSequence, KSpaceData, ModelParams, SamplingMask, SolverConfig,
};

struct Case {
    truth: ImageSequence,
    maps: CoilMaps,
    y: KSpaceData,
}

fn case(kind: PhantomKind, frames: usize, size: usize, accel: Option<f64>, sigma: f64) -> Case {
    let spec = PhantomSpec {
        kind,
        frames,
        height: size,
        width: size,
        motion_amplitude: 3.0,
        period: frames as f64,
        ..PhantomSpec::default()
    };
    let truth = generate_phantom(&spec).unwrap();
    let maps = generate_coilmaps(4, size, size, 0).unwrap();
    let mask = match accel {
        Some(a) => make_mask(frames, size, size, a, 8, 3.0, 2).unwrap(),
        None => SamplingMask::full(frames, size, size).unwrap(),
    };
    let y = acquire(&truth, &maps, &mask, sigma, 1).unwrap();
    Case { truth, maps, y }
}

fn magnitude(u: &ImageSequence) -> ImageSequence {
    ImageSequence::from_real(u.frames(), u.height(), u.width(), &u.magnitude()).unwrap()
}

fn max_diff(a: &ImageSequence, b: &ImageSequence) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn cs_with_tiny_weight_on_full_data_recovers_the_truth() {
    let c = case(PhantomKind::Cine, 6, 64, None, 0.0);
    let r = reconstruct_cs(&c.y, &c.maps, 1e-6, &SolverConfig::default()).unwrap();
    let m = evaluate(&magnitude(&c.truth), &r.image).unwrap();
    assert!(m.ssim >= 0.99, "ssim {}", m.ssim);
}

#[test]
fn cs_with_huge_weight_flattens_every_frame() {
    let c = case(PhantomKind::Cine, 3, 32, Some(2.0), 0.0);
    let cfg = SolverConfig {
        max_inner: 3000,
        inner_tol: 1e-9,
        ..Default::default()
    };
    let r = reconstruct_cs(&c.y, &c.maps, 1e3, &cfg).unwrap();
    for k in 0..3 {
        let f = r.image.frame(k);
        let mean = f.iter().sum::<num_complex::Complex64>() / f.len() as f64;
        let spread = f.iter().map(|z| (z - mean).norm()).fold(0.0, f64::max);
        assert!(
            spread <= 1e-3 * mean.norm(),
            "frame {k}: spread {spread}, level {}",
            mean.norm()
        );
    }
}

#[test]
fn zero_fill_is_worse_than_cs_on_undersampled_data() {
    let c = case(PhantomKind::Cine, 6, 64, Some(4.0), 0.002);
    let gold = magnitude(&c.truth);
    let zf = evaluate(&gold, &zero_fill(&c.y, &c.maps).unwrap()).unwrap();
    let cs = evaluate(
        &gold,
        &reconstruct_cs(&c.y, &c.maps, 0.01, &SolverConfig::default())
            .unwrap()
            .image,
    )
    .unwrap();
    assert!(zf.ssim < cs.ssim, "zero fill {} vs cs {}", zf.ssim, cs.ssim);
}

#[test]
fn ls_on_full_clean_data_recovers_the_truth() {
    let c = case(PhantomKind::Cine, 6, 64, None, 0.0);
    let p = LsParams {
        lambda_l: Some(1e-6),
        lambda_s: Some(1e-6),
    };
    let r = reconstruct_ls(&c.y, &c.maps, &p, &SolverConfig::default()).unwrap();
    assert!(
        max_diff(&r.image, &c.truth) <= 1e-4,
        "{}",
        max_diff(&r.image, &c.truth)
    );
}

#[test]
fn ls_puts_a_static_scene_into_the_low_rank_part() {
    let c = case(PhantomKind::Static, 8, 64, Some(4.0), 0.002);
    let r = reconstruct_ls(
        &c.y,
        &c.maps,
        &LsParams::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    let frac = r.components.unwrap().sparse_energy_fraction();
    assert!(frac <= 0.05, "sparse fraction {frac}");
}

#[test]
fn csm_without_coupling_is_cs() {
    let c = case(PhantomKind::Cine, 6, 64, Some(4.0), 0.002);
    let cfg = SolverConfig::default();
    let cs = reconstruct_cs(&c.y, &c.maps, 0.02, &cfg).unwrap();
    let params = ModelParams {
        gamma: 0.02,
        beta: 0.0,
        ..ModelParams::default()
    };
    let csm = reconstruct_csm(&c.y, &c.maps, &params, &cfg).unwrap();
    assert!(max_diff(&cs.image, &csm.image) <= 2.0 * cfg.inner_tol);
}

#[test]
fn csm_descends_and_beats_the_zero_filled_start() {
    let c = case(PhantomKind::Cine, 6, 64, Some(4.0), 0.002);
    let params = ModelParams {
        gamma: 0.02,
        beta: 0.1,
        delta: 0.01,
        max_outer: 4,
        ..ModelParams::default()
    };
    let r = reconstruct_csm(&c.y, &c.maps, &params, &SolverConfig::default()).unwrap();
    assert_eq!(r.objective_trace.len(), r.outer_iters);
    assert!(r.outer_iters >= 1 && r.outer_iters <= params.max_outer);
    for p in r.objective_trace.windows(2) {
        assert!(p[1] <= p[0] * (1.0 + 1e-6), "{:?}", r.objective_trace);
    }
    assert!(r.d_errors.iter().all(|d| d.is_finite()));
    let flow = r.flow.unwrap();
    let at_result = objective_eq7(&r.image, &flow, &c.y, &c.maps, &params).unwrap();
    let zf = zero_fill(&c.y, &c.maps).unwrap();
    let zero = FlowField::zeros(flow.pairs(), flow.height(), flow.width()).unwrap();
    let at_start = objective_eq7(&zf, &zero, &c.y, &c.maps, &params).unwrap();
    assert!(at_result <= at_start, "{at_result} vs {at_start}");
    assert!((at_result - r.objective_trace.last().unwrap()).abs() <= 1e-9 * at_result);
}

#[test]
fn csm_trace_csv_has_one_row_per_outer_iteration() {
    let c = case(PhantomKind::Cine, 4, 32, Some(2.0), 0.002);
    let params = ModelParams {
        gamma: 0.02,
        beta: 0.1,
        delta: 0.01,
        max_outer: 3,
        ..ModelParams::default()
    };
    let r = reconstruct_csm(
        &c.y,
        &c.maps,
        &params,
        &SolverConfig {
            max_inner: 50,
            ..Default::default()
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    r.write_trace_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), r.outer_iters + 1);
    assert!(text.starts_with("outer_iter,objective,d_error,wall_time"));
}
