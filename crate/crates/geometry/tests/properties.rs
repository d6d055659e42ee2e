use geometry::{bregman, omega, omega_grad, project_simplex, Regularizer, RegularizerConstants};
use ndarray::{arr1, Array1};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_simplex(rng: &mut impl Rng, a: usize) -> Array1<f64> {
    // Exponential spacings give a uniform draw from the simplex.
    let mut v: Vec<f64> = (0..a).map(|_| -(rng.gen::<f64>().max(1e-16)).ln()).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    Array1::from(v)
}

fn assert_is_simplex(p: &Array1<f64>) {
    assert!(p.iter().all(|&x| x >= 0.0), "negative entry in {p:?}");
    assert!((p.sum() - 1.0).abs() <= 1e-12, "sum {} != 1", p.sum());
}

proptest! {
    #[test]
    fn projection_lands_on_simplex(xs in prop::collection::vec(-10.0..10.0f64, 1..6)) {
        let p = project_simplex(arr1(&xs).view());
        assert_is_simplex(&p);
    }

    #[test]
    fn projection_is_idempotent(xs in prop::collection::vec(-10.0..10.0f64, 1..6)) {
        let p = project_simplex(arr1(&xs).view());
        let pp = project_simplex(p.view());
        for (a, b) in p.iter().zip(pp.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_translation_invariant(
        xs in prop::collection::vec(-5.0..5.0f64, 1..6),
        c in -3.0..3.0f64,
    ) {
        let base = project_simplex(arr1(&xs).view());
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let moved = project_simplex(arr1(&shifted).view());
        for (a, b) in base.iter().zip(moved.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn bregman_matches_definition_from_gradient() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for reg in [Regularizer::euclidean(0.0).unwrap(), Regularizer::neg_entropy(0.0).unwrap()] {
        for _ in 0..300 {
            let a = rng.gen_range(2..=5);
            let p = random_simplex(&mut rng, a);
            let q = random_simplex(&mut rng, a);
            let direct = bregman(&reg, p.view(), q.view()).unwrap();
            let grad_q = omega_grad(&reg, q.view()).unwrap();
            let inner: f64 =
                grad_q.iter().zip(p.iter().zip(q.iter())).map(|(g, (pi, qi))| g * (pi - qi)).sum();
            let from_def = omega(&reg, p.view()) - omega(&reg, q.view()) - inner;
            assert!(
                (direct - from_def).abs() <= 1e-12,
                "definition mismatch: {direct} vs {from_def}"
            );
        }
    }
}

#[test]
fn bregman_lower_bounds_hold_on_random_pairs() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let euclid = Regularizer::euclidean(0.0).unwrap();
    let entropy = Regularizer::neg_entropy(0.0).unwrap();
    for _ in 0..1000 {
        let a = rng.gen_range(2..=6);
        let p = random_simplex(&mut rng, a);
        let q = random_simplex(&mut rng, a);

        let l2sq: f64 = p.iter().zip(q.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        let be = bregman(&euclid, p.view(), q.view()).unwrap();
        assert!((be - 0.5 * l2sq).abs() <= 1e-14, "euclidean Bregman is exactly half squared l2");

        let l1: f64 = p.iter().zip(q.iter()).map(|(x, y)| (x - y).abs()).sum();
        let bk = bregman(&entropy, p.view(), q.view()).unwrap();
        assert!(bk >= 0.5 * l1 * l1 - 1e-12, "Pinsker violated: KL={bk}, l1={l1}");
    }
}

#[test]
fn initial_distance_bounded_by_d_omega() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    for reg in [Regularizer::euclidean(0.0).unwrap(), Regularizer::neg_entropy(0.0).unwrap()] {
        for _ in 0..500 {
            let a = rng.gen_range(2..=6);
            let consts = RegularizerConstants::new(&reg, a, 1.0, 0.5).unwrap();
            let uniform = Array1::from_elem(a, 1.0 / a as f64);
            // Include vertices, the extreme case, alongside random draws.
            let mut p = random_simplex(&mut rng, a);
            if rng.gen_bool(0.3) {
                p.fill(0.0);
                p[rng.gen_range(0..a)] = 1.0;
            }
            let b = bregman(&reg, p.view(), uniform.view()).unwrap();
            assert!(b <= consts.d_omega + 1e-12, "B={b} exceeds D_omega={}", consts.d_omega);
        }
    }
}

/// Enumerates the resolution-grid on the simplex and returns the smallest
/// euclidean distance to `x`.
fn grid_min_distance(x: &Array1<f64>, steps: usize) -> f64 {
    let a = x.len();
    let mut best = f64::INFINITY;
    let mut counts = vec![0usize; a];
    fn recurse(
        x: &Array1<f64>,
        steps: usize,
        counts: &mut Vec<usize>,
        idx: usize,
        remaining: usize,
        best: &mut f64,
    ) {
        if idx == counts.len() - 1 {
            counts[idx] = remaining;
            let dist: f64 = counts
                .iter()
                .zip(x.iter())
                .map(|(&c, &xi)| {
                    let pi = c as f64 / steps as f64;
                    (pi - xi) * (pi - xi)
                })
                .sum::<f64>()
                .sqrt();
            if dist < *best {
                *best = dist;
            }
            return;
        }
        for c in 0..=remaining {
            counts[idx] = c;
            recurse(x, steps, counts, idx + 1, remaining - c, best);
        }
    }
    recurse(x, steps, &mut counts, 0, steps, &mut best);
    best
}

#[test]
fn projection_beats_grid_search() {
    let mut rng = ChaCha12Rng::seed_from_u64(19);
    // (n_actions, grid steps): resolution 1/steps, coarser as dimension grows.
    let cases = [(2usize, 10_000usize), (3, 1_000), (4, 200)];
    for &(a, steps) in &cases {
        for _ in 0..3 {
            let x = Array1::from_iter((0..a).map(|_| rng.gen_range(-1.5..1.5)));
            let p = project_simplex(x.view());
            let ours = p
                .iter()
                .zip(x.iter())
                .map(|(pi, xi)| (pi - xi) * (pi - xi))
                .sum::<f64>()
                .sqrt();
            let grid = grid_min_distance(&x, steps);
            // Grid points are feasible, so an exact minimizer can never lose.
            assert!(ours <= grid + 1e-12, "A={a}: ours={ours} worse than grid={grid}");
            let spacing = (a as f64).sqrt() / steps as f64;
            assert!(grid <= ours + spacing, "A={a}: grid={grid} too far above ours={ours}");
        }
    }
}
