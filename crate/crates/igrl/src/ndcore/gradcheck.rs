//! Central finite differences, the independent oracle for every reverse-mode
//! gradient in the crate. Lives in the library (not just test code) because
//! the CLI self-test replays these checks at runtime.

use crate::ndcore::Tensor2;

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Gradient of `f` w.r.t. every entry of every parameter, by central
/// differences with step `h`. `f` must be a pure function of the parameters.
pub fn central_diff_grad(
    params: &[Tensor2],
    h: f64,
    mut f: impl FnMut(&[Tensor2]) -> f64,
) -> Vec<Tensor2> {
    let mut work: Vec<Tensor2> = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let (r, c) = params[pi].shape();
        let mut g = Tensor2::zeros(r, c);
        for idx in 0..r * c {
            let orig = work[pi].data()[idx];
            work[pi].data_mut()[idx] = orig + h;
            let up = f(&work);
            work[pi].data_mut()[idx] = orig - h;
            let down = f(&work);
            work[pi].data_mut()[idx] = orig;
            g.data_mut()[idx] = (up - down) / (2.0 * h);
        }
        grads.push(g);
    }
    grads
}

/// Worst per-coordinate relative error between two gradient sets.
/// Coordinates where both gradients are below `floor` are treated as exact.
pub fn max_rel_error(analytic: &[Tensor2], numeric: &[Tensor2], floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.shape(), n.shape());
        for (&av, &nv) in a.data().iter().zip(n.data()) {
            let denom = av.abs().max(nv.abs()).max(floor);
            worst = worst.max((av - nv).abs() / denom);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_quadratic_gradient() {
        let p = vec![Tensor2::from_vec(1, 3, vec![1.0, -2.0, 0.5])];
        let g = central_diff_grad(&p, FD_STEP, |ps| {
            ps[0].data().iter().map(|v| v * v).sum::<f64>()
        });
        let expect = [2.0, -4.0, 1.0];
        for (got, want) in g[0].data().iter().zip(expect) {
            assert!((got - want).abs() < 1e-8);
        }
    }
}
