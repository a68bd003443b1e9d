use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};

/// Denominator floor of the relative error, so coordinates whose true
/// derivative is ~0 are judged on absolute error instead.
pub const REL_ERR_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub param: usize,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub tolerance: f64,
    pub max_rel_err: f64,
    /// Up to ten coordinates with the largest relative error, worst first.
    pub worst: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

fn eval<F>(f: &F, params: &[Tensor<f64>]) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
    let out = f(&mut tape, &vars);
    tape.value(out)[0]
}

/// Compares backward gradients of the scalar program `f` with central
/// differences `(f(θ+εe) - f(θ-εe)) / 2ε` on up to `coords_per_param` random
/// coordinates of each parameter (all of them when the parameter is smaller).
pub fn grad_check<F>(
    f: F,
    params: &[Tensor<f64>],
    epsilon: f64,
    tolerance: f64,
    coords_per_param: usize,
    seed: u64,
) -> GradCheckReport
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
    let out = f(&mut tape, &vars);
    tape.backward(out).expect("grad_check needs a scalar program");
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.to_vec();
    let mut entries = Vec::new();
    for (pi, p) in params.iter().enumerate() {
        let count = coords_per_param.min(p.numel());
        for coord in sample(&mut rng, p.numel(), count).into_iter() {
            let orig = p.data[coord];
            work[pi].data[coord] = orig + epsilon;
            let plus = eval(&f, &work);
            work[pi].data[coord] = orig - epsilon;
            let minus = eval(&f, &work);
            work[pi].data[coord] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[pi][coord];
            let rel_err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            entries.push(GradCheckEntry {
                param: pi,
                coord,
                analytic: a,
                numeric,
                rel_err,
            });
        }
    }
    entries.sort_by(|a, b| b.rel_err.total_cmp(&a.rel_err));
    GradCheckReport {
        checked: entries.len(),
        tolerance,
        max_rel_err: entries.first().map_or(0.0, |e| e.rel_err),
        worst: entries.into_iter().take(10).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let w = Tensor::new(vec![3], vec![0.5, -1.25, 2.0]);
        let report = grad_check(
            |tape, p| {
                let s = tape.scale(p[0], 3.0);
                tape.sum(s)
            },
            &[w],
            1e-4,
            1e-10,
            32,
            0,
        );
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.checked, 3);
    }
}
