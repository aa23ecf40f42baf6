// Temporary timing probe for GNCCP at the pipeline's energy resolution.

use leafmatch::energy::{build_bundle, BundleConfig, EnergyWeights};
use leafmatch::geometry::{resample_uniform, Curve, OpenCurve};
use leafmatch::gnccp::{gnccp_optimize, GnccpConfig};
use leafmatch::Point2;

fn wavy_curve(seed: u64, n: usize) -> OpenCurve {
    let pts = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let s = seed as f64;
            Point2::new(
                1000.0 * t,
                80.0 * (6.0 * t + s).sin() + 40.0 * (11.0 * t + 2.0 * s).cos(),
            )
        })
        .collect();
    OpenCurve::new(pts).unwrap()
}

#[test]
#[ignore]
fn time_gnccp_at_100() {
    let mut total = 0.0;
    let mut total_iters = 0usize;
    for pair in 0..5u64 {
        let a = resample_uniform(&wavy_curve(1 + 10 * pair, 400), 100).unwrap();
        let b = resample_uniform(&wavy_curve(2 + 10 * pair, 400), 100).unwrap();
        let ba = build_bundle(&a, &BundleConfig::default()).unwrap();
        let bb = build_bundle(&b, &BundleConfig::default()).unwrap();
        let w = EnergyWeights::default();
        let cfg = GnccpConfig::default();
        let t0 = std::time::Instant::now();
        let r = gnccp_optimize(&ba, &bb, &w, &cfg).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        total += dt;
        total_iters += r.iterations;
        eprintln!(
            "gnccp N=100 pair {pair}: {:.2}s, {} iters, status {:?}, zeta {:.2}, energy {:.1}",
            dt, r.iterations, r.status, r.state.zeta, r.energy
        );
    }
    eprintln!("gnccp N=100 total: {total:.2}s over 5 pairs, {total_iters} iterations");
}
