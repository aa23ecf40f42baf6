// Temporary sweep of the homotopy normalization target; removed after tuning.
use leafmatch::energy::{AdjacencyBundle, EnergyWeights};
use leafmatch::gnccp::{gnccp_optimize, GnccpConfig};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_bundle(seed: u64, n: usize) -> AdjacencyBundle<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mk = || {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.gen_range(0.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    };
    AdjacencyBundle { a_local: mk(), a_global: mk(), a_angular: mk(), a_stringcut: mk() }
}

#[test]
#[ignore]
fn planted_recovery_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut cases = Vec::new();
    for t in 0..40u64 {
        let n = 5 + (t as usize % 4);
        let a = random_bundle(1000 + t, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let relabel = |m: &Array2<f64>| {
            let mut out = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    out[(perm[i], perm[j])] = m[(i, j)];
                }
            }
            out
        };
        let b = AdjacencyBundle {
            a_local: relabel(&a.a_local),
            a_global: relabel(&a.a_global),
            a_angular: relabel(&a.a_angular),
            a_stringcut: relabel(&a.a_stringcut),
        };
        cases.push((a, b));
    }
    let w = EnergyWeights::default();
    let cfg = GnccpConfig::default();
    let mut hits = 0;
    let mut iters = 0usize;
    for (a, b) in &cases {
        let r = gnccp_optimize(a, b, &w, &cfg).unwrap();
        if r.energy <= 1e-6 {
            hits += 1;
        }
        iters += r.iterations;
    }
    eprintln!("planted recovery: {hits}/40, avg iterations {}", iters / 40);
}
