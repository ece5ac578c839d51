//! Gradient-check helpers shared by the block tests.

use crate::error::Result;
use crate::nn::finite_diff_grad;
use crate::nn::gradcheck::{max_relative_error, relative_error, sample_coords};
use crate::rng::Seed;
use crate::tensor::Tensor;

use super::Layers;

const H: f64 = 1e-3;
// Parameter gradients can be small (~1e-3) while the loss curvature is not, so
// the O(h^2) truncation term needs a finer step to stay under TOL.
const H_PARAM: f64 = 1e-4;
const TOL: f64 = 1e-5;

/// Checks input and parameter gradients of a single-input block against
/// central differences of `Σ r ⊙ forward(x)`.
pub fn check_block<P, F, B>(p: &P, x: &Tensor<f64>, forward: F, backward: B, seed: Seed)
where
    P: Layers<f64> + Clone,
    F: Fn(&Tensor<f64>, &P) -> Result<Tensor<f64>>,
    B: Fn(&Tensor<f64>, &P, &Tensor<f64>) -> Result<(Tensor<f64>, P)>,
{
    let y = forward(x, p).unwrap();
    let r = Tensor::<f64>::seeded_uniform(y.dims(), -1.0, 1.0, seed.derive("r")).unwrap();
    let (gx, grads) = backward(x, p, &r).unwrap();
    assert_eq!(gx.dims(), x.dims());

    let coords = sample_coords(x.len(), 50, seed.derive("coords"));
    let num = finite_diff_grad(|t| forward(t, p).unwrap().dot_f64(&r).unwrap(), x, &coords, H).unwrap();
    let ana: Vec<f64> = coords.iter().map(|&i| gx.data()[i]).collect();
    let err = max_relative_error(&ana, &num);
    assert!(err <= TOL, "input gradient error {err:e}");

    check_param_grads(p, &grads, |q| forward(x, q).unwrap().dot_f64(&r).unwrap(), seed);
}

/// Samples up to 12 scalars per layer and compares the analytic parameter
/// gradient with central differences of `loss`.
pub fn check_param_grads<P, L>(p: &P, grads: &P, loss: L, seed: Seed)
where
    P: Layers<f64> + Clone,
    L: Fn(&P) -> f64,
{
    let names: Vec<String> = p.layers().into_iter().map(|(n, _)| n).collect();
    let grad_layers = grads.layers();
    for (li, name) in names.iter().enumerate() {
        let g = grad_layers[li].1.weights.flat();
        for i in sample_coords(g.len(), 12, seed.derive(name)) {
            let eval = |delta: f64| {
                let mut q = p.clone();
                *q.layers_mut()[li].1.weights.flat_mut(i) += delta;
                loss(&q)
            };
            let num = (eval(H_PARAM) - eval(-H_PARAM)) / (2.0 * H_PARAM);
            let e = relative_error(g[i], num);
            assert!(e <= TOL, "{name}[{i}]: analytic {} numeric {num} (rel {e:e})", g[i]);
        }
    }
}
