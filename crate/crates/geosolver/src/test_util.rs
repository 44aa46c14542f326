//! Gradient-checking helpers shared by module unit tests.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{Ctx, ParamStore};
use crate::tape::{NodeId, Tape};

/// Compare analytic parameter gradients against central finite differences
/// at up to `samples_per_param` randomly chosen entries of every parameter
/// the forward pass touches. `f` must be a pure function of the store.
pub fn check_sampled_param_grads<F>(
    store: &ParamStore,
    samples_per_param: usize,
    seed: u64,
    tol: f64,
    f: F,
) where
    F: Fn(&Ctx) -> NodeId,
{
    let tape = Tape::new(true);
    let ctx = Ctx::new(&tape, store);
    let loss = f(&ctx);
    let grads = tape.backward(loss);
    let bound = ctx.bound_params();
    assert!(!bound.is_empty(), "forward touched no parameters");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    for (pid, node) in bound {
        let base = store.value(pid);
        let (rows, cols) = (base.nrows(), base.ncols());
        let analytic = grads.get_or_zeros(node, (rows, cols));
        let n = samples_per_param.min(rows * cols);
        for _ in 0..n {
            let i = rng.random_range(0..rows);
            let j = rng.random_range(0..cols);
            let eval = |delta: f64| {
                let mut s2 = store.clone();
                let mut v = (*s2.value(pid)).clone();
                v[(i, j)] += delta;
                s2.set_value(pid, v);
                let t2 = Tape::new(true);
                let c2 = Ctx::new(&t2, &s2);
                t2.scalar(f(&c2))
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic[(i, j)];
            let denom = a.abs().max(numeric.abs()).max(1e-4);
            let rel = (a - numeric).abs() / denom;
            assert!(
                rel < tol,
                "param {} [{i},{j}]: analytic {a}, numeric {numeric}, rel {rel}",
                store.entry(pid).name
            );
        }
    }
}

pub fn random_patches(rng: &mut ChaCha8Rng, n_patches: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((n_patches, dim), |_| rng.random_range(0.0..1.0))
}
