// Temporary microbenchmark; removed after tuning.
use ndarray::Array2;

#[test]
#[ignore]
fn gemm_and_lap_cost() {
    let a64: Array2<f64> = Array2::from_shape_fn((100, 400), |(i, j)| ((i * 7 + j) % 13) as f64);
    let b64: Array2<f64> = Array2::from_shape_fn((400, 100), |(i, j)| ((i * 3 + j) % 17) as f64);
    let t = std::time::Instant::now();
    let mut acc = 0.0;
    for _ in 0..200 {
        acc += a64.dot(&b64)[(0, 0)];
    }
    eprintln!(
        "f64 (100x400)(400x100) gemm: {:.3} ms/call (acc {acc})",
        t.elapsed().as_secs_f64() * 1e3 / 200.0
    );
    let a32 = a64.mapv(|v| v as f32);
    let b32 = b64.mapv(|v| v as f32);
    let t = std::time::Instant::now();
    let mut acc32 = 0.0f32;
    for _ in 0..200 {
        acc32 += a32.dot(&b32)[(0, 0)];
    }
    eprintln!(
        "f32 same gemm: {:.3} ms/call (acc {acc32})",
        t.elapsed().as_secs_f64() * 1e3 / 200.0
    );
    // the linear assignment at gradient scale
    let g: Array2<f64> =
        Array2::from_shape_fn((100, 100), |(i, j)| ((i * 31 + j * 7) % 101) as f64 - 50.0);
    let t = std::time::Instant::now();
    for k in 0..200 {
        let shifted = g.mapv(|v| v + (k % 3) as f64);
        std::hint::black_box(leafmatch::gnccp::linear_subproblem(&shifted));
    }
    eprintln!("lap 100x100: {:.3} ms/call (incl. one mapv)", t.elapsed().as_secs_f64() * 1e3 / 200.0);
    // near-constant gradient with small structure, as in the convex phase
    let g2: Array2<f64> = Array2::from_shape_fn((100, 100), |(i, j)| {
        1.0 + 1e-6 * (((i * 31 + j * 7) % 101) as f64) + 1e-9 * ((i + j) as f64)
    });
    let t = std::time::Instant::now();
    for _ in 0..200 {
        std::hint::black_box(leafmatch::gnccp::linear_subproblem(&g2));
    }
    eprintln!(
        "lap 100x100 near-uniform: {:.3} ms/call",
        t.elapsed().as_secs_f64() * 1e3 / 200.0
    );
}
