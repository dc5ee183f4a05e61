//! Nelder-Mead simplex minimization.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop when every vertex is within `tolerance * (1 + |x_best|)` of the
    /// best vertex in each coordinate and the objective spread is below
    /// `tolerance * (1 + |f_best|)`.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_evaluations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `start`, with the initial simplex spanned by `steps`
/// along the coordinate axes. NaN objective values are treated as +inf.
pub fn nelder_mead<F>(mut f: F, start: &[f64], steps: &[f64], options: SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    assert_eq!(steps.len(), n, "one step per coordinate");
    let evaluations = std::cell::Cell::new(0_usize);
    let mut eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let point = |c: &[f64], w: &[f64], coef: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(c, w)| c + coef * (w - c)).collect()
    };

    let mut converged = false;
    loop {
        // stable sort keeps the order deterministic on ties
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = &simplex[0];
        let x_close = simplex[1..].iter().all(|v| {
            v.iter()
                .zip(best)
                .all(|(a, b)| (a - b).abs() <= options.tolerance * (1.0 + b.abs()))
        });
        let f_close = values[n] - values[0] <= options.tolerance * (1.0 + values[0].abs());
        if x_close && f_close {
            converged = true;
            break;
        }
        if evaluations.get() >= options.max_evaluations {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();

        let reflected = point(&centroid, &worst, -1.0);
        let f_r = eval(&reflected);
        if f_r < values[0] {
            let expanded = point(&centroid, &worst, -2.0);
            let f_e = eval(&expanded);
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }
        // outside contraction when the reflection helped a little, else inside
        let coef = if f_r < values[n] { -0.5 } else { 0.5 };
        let contracted = point(&centroid, &worst, coef);
        let f_c = eval(&contracted);
        if f_c < values[n].min(f_r) {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = point(&best, &simplex[i], 0.5);
            values[i] = eval(&simplex[i]);
        }
    }

    SimplexResult {
        x: simplex[0].clone(),
        value: values[0],
        evaluations: evaluations.get(),
        converged,
    }
}
