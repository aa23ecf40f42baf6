//! Synthetic closed-contour corpus: superformula shape families with
//! per-class parameters and per-instance jitter. A desk-scale stand-in for
//! curated leaf datasets.

use leafmatch::geometry::Point2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Superformula parameters of one shape class (a = b = 1).
#[derive(Debug, Clone, Copy)]
pub struct ShapeClass {
    pub m: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

/// Hand-picked families with visibly distinct silhouettes.
const PRESETS: [ShapeClass; 10] = [
    ShapeClass { m: 3.0, n1: 4.5, n2: 10.0, n3: 10.0 },
    ShapeClass { m: 4.0, n1: 12.0, n2: 15.0, n3: 15.0 },
    ShapeClass { m: 5.0, n1: 4.0, n2: 4.0, n3: 4.0 },
    ShapeClass { m: 6.0, n1: 1.0, n2: 1.0, n3: 1.0 },
    ShapeClass { m: 7.0, n1: 10.0, n2: 6.0, n3: 6.0 },
    ShapeClass { m: 5.0, n1: 1.7, n2: 1.7, n3: 1.7 },
    ShapeClass { m: 8.0, n1: 0.5, n2: 0.5, n3: 8.0 },
    ShapeClass { m: 3.0, n1: 0.5, n2: 0.5, n3: 4.0 },
    ShapeClass { m: 12.0, n1: 15.0, n2: 20.0, n3: 20.0 },
    ShapeClass { m: 4.0, n1: 1.0, n2: 1.0, n3: 1.0 },
];

pub fn class_params(class: usize, rng: &mut ChaCha8Rng) -> ShapeClass {
    if class < PRESETS.len() {
        return PRESETS[class];
    }
    // past the presets, perturb a base family procedurally
    let base = PRESETS[class % PRESETS.len()];
    ShapeClass {
        m: base.m + (class / PRESETS.len()) as f64,
        n1: base.n1 * rng.gen_range(0.7..1.4),
        n2: base.n2 * rng.gen_range(0.7..1.4),
        n3: base.n3 * rng.gen_range(0.7..1.4),
    }
}

fn superformula_radius(p: &ShapeClass, theta: f64) -> f64 {
    let t1 = (p.m * theta / 4.0).cos().abs().powf(p.n2);
    let t2 = (p.m * theta / 4.0).sin().abs().powf(p.n3);
    (t1 + t2).powf(-1.0 / p.n1)
}

/// One jittered instance of a class: exponent wobble, random rotation and a
/// mild scale change, sampled at `points` positions counter-clockwise.
pub fn instance_points(
    class: &ShapeClass,
    rng: &mut ChaCha8Rng,
    points: usize,
) -> Vec<Point2<f64>> {
    let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(0.95..1.05);
    let p = ShapeClass {
        m: class.m,
        n1: class.n1 * jitter(rng),
        n2: class.n2 * jitter(rng),
        n3: class.n3 * jitter(rng),
    };
    let rot: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let scale: f64 = rng.gen_range(0.8..1.25);
    (0..points)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / points as f64;
            let r = superformula_radius(&p, theta) * scale;
            Point2::new(r * (theta + rot).cos(), r * (theta + rot).sin())
        })
        .collect()
}

/// The whole corpus: `classes` x `per_class` instances, deterministic in the
/// seed. Returns (id, species, points) triples in generation order.
pub fn generate_corpus(
    classes: usize,
    per_class: usize,
    seed: u64,
    points: usize,
) -> Vec<(String, String, Vec<Point2<f64>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let params = class_params(c, &mut rng);
        let species = format!("class{c:02}");
        for i in 0..per_class {
            let id = format!("class{c:02}_i{i:02}");
            let pts = instance_points(&params, &mut rng, points);
            out.push((id, species.clone(), pts));
        }
    }
    out
}
