//! Derivative-free minimisation and finite-difference curvature.

use serde::{Deserialize, Serialize};

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimplexTolerances {
    /// Largest vertex distance (max-norm) from the best vertex.
    pub x_tol: f64,
    /// Spread of objective values across the simplex.
    pub f_tol: f64,
    pub max_evals: usize,
}

impl Default for SimplexTolerances {
    fn default() -> Self {
        Self {
            x_tol: 1e-6,
            f_tol: 1e-8,
            max_evals: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder–Mead minimisation of `f` from `x0`, with initial edge lengths
/// `steps`. Infinite objective values are treated as infeasible points and
/// are never accepted over finite ones.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    tol: &SimplexTolerances,
) -> SimplexOutcome {
    let n = x0.len();
    assert_eq!(steps.len(), n, "one step per coordinate");
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let mut v = eval(&x, &mut evals);
        if !v.is_finite() {
            x[i] = x0[i] - steps[i];
            v = eval(&x, &mut evals);
        }
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while evals < tol.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < tol.x_tol && (worst - best).abs() < tol.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            let v = eval(&x, &mut evals);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    SimplexOutcome {
        x,
        value,
        iterations,
        evals,
        converged,
    }
}

/// Finite-difference step for [`central_hessian`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum HessianStep {
    /// The same step for every coordinate.
    Absolute(f64),
    /// `value * max(1, |x_j|)` for coordinate `j`.
    Relative(f64),
}

impl Default for HessianStep {
    fn default() -> Self {
        HessianStep::Absolute(1e-3)
    }
}

impl HessianStep {
    pub fn for_coordinate(&self, x: f64) -> f64 {
        match *self {
            HessianStep::Absolute(h) => h,
            HessianStep::Relative(h) => h * x.abs().max(1.0),
        }
    }
}

/// Hessian of `f` at `x` restricted to the coordinates in `free`, from the
/// four-point central stencil
/// `(f(++) - f(+-) - f(-+) + f(--)) / (4 h_i h_j)`.
///
/// On the diagonal this is the second difference with step `2 h_i`, which
/// is what differencing a central-difference gradient produces.
pub fn central_hessian<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    free: &[usize],
    step: HessianStep,
) -> Vec<Vec<f64>> {
    let k = free.len();
    let h: Vec<f64> = free.iter().map(|&i| step.for_coordinate(x[i])).collect();
    let mut out = vec![vec![0.0; k]; k];
    let mut probe = |di: f64, i: usize, dj: f64, j: usize| {
        let mut p = x.to_vec();
        p[free[i]] += di * h[i];
        p[free[j]] += dj * h[j];
        f(&p)
    };
    for i in 0..k {
        for j in i..k {
            let v = (probe(1.0, i, 1.0, j) - probe(1.0, i, -1.0, j) - probe(-1.0, i, 1.0, j)
                + probe(-1.0, i, -1.0, j))
                / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}
