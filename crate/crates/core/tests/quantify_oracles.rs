use ccl_core::quantify::{implication_surface, relation_scores, threshold_grid, trapezoid, ProbVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_pair(n: usize, seed: u64) -> (ProbVector, ProbVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = ProbVector::new((0..n).map(|_| rng.random()).collect()).unwrap();
    let c = ProbVector::new((0..n).map(|_| rng.random()).collect()).unwrap();
    (t, c)
}

/// Midpoint rule over the closed-form F1 of independent uniforms.
fn independent_volume(steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    let mut total = 0.0;
    for i in 0..steps {
        let tt = (i as f64 + 0.5) * h;
        for j in 0..steps {
            let p = 1.0 - (j as f64 + 0.5) * h;
            total += 2.0 * p * tt / (p + tt);
        }
    }
    total * h * h
}

#[test]
fn independent_uniforms_surface_volume() {
    let (t, c) = uniform_pair(100_000, 3);
    let surf = implication_surface(&t, &c, 101, 101).unwrap();
    let oracle = independent_volume(2000);
    assert!((oracle - 0.41).abs() < 0.02, "oracle {oracle}");
    assert!((surf.volume - oracle).abs() < 0.02, "volume {} vs {oracle}", surf.volume);
}

#[test]
fn independent_uniforms_auc_near_half() {
    let (t, c) = uniform_pair(100_000, 5);
    for auc in relation_scores(&t, &c, 101).unwrap().aucs() {
        assert!((auc - 0.5).abs() < 0.01, "{auc}");
    }
}

#[test]
fn closed_form_curve_for_independent_uniforms() {
    // precision and recall both equal t, so F1(t) = t
    let (t, c) = uniform_pair(200_000, 9);
    let curve = &relation_scores(&t, &c, 101).unwrap().necessary;
    for (th, f) in curve.thresholds.iter().zip(&curve.f1) {
        if (0.05..=0.95).contains(th) {
            assert!((f - th).abs() < 0.01, "t {th}: {f}");
        }
    }
    let grid = threshold_grid(101);
    assert!((trapezoid(&grid, &grid) - 0.5).abs() < 1e-12);
}

#[test]
fn anti_diagonal_recovers_the_curve() {
    let (t, c) = uniform_pair(5000, 1);
    let surf = implication_surface(&t, &c, 101, 101).unwrap();
    let curve = relation_scores(&t, &c, 101).unwrap().necessary;
    assert_eq!(surf.anti_diagonal().unwrap(), curve.f1);
}
