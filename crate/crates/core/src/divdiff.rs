//! Divided differences of `x -> s^x` for a fixed base `s` in (0, 1].
//!
//! The closed-form moments of the bridge are sums of terms such as
//! `(s^p - s^q) / (q - p)`, whose denominators vanish on several parameter
//! manifolds. Each such sum is a divided difference of the exponential
//! `x -> exp(c x)` with `c = ln s`, so evaluating the divided difference
//! directly keeps every degenerate case continuous (coincident nodes turn
//! into derivatives automatically).
//!
//! The divided difference at nodes `x_0..x_n` is the top-right entry of
//! `exp(J)` where `J` is upper bidiagonal with `c x_i` on the diagonal and
//! ones above it. `J` is Metzler, so `exp(J)` is entrywise non-negative and
//! the squaring phase of scaling-and-squaring never cancels.

const MAX_NODES: usize = 4;
const TAYLOR_TERMS: usize = 24;

type Mat = [[f64; MAX_NODES]; MAX_NODES];

fn matmul(a: &Mat, b: &Mat, n: usize) -> Mat {
    let mut out = [[0.0; MAX_NODES]; MAX_NODES];
    // upper triangular
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in i..=j {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Divided difference `f[z_0, ..., z_n]` of `exp` (at most four nodes).
pub(crate) fn exp_divided_difference(z: &[f64]) -> f64 {
    let n = z.len();
    assert!((1..=MAX_NODES).contains(&n), "1 to {MAX_NODES} nodes supported");
    if n == 1 {
        return z[0].exp();
    }

    let norm = z.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + 1.0;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5_f64.powi(squarings);

    let mut b = [[0.0; MAX_NODES]; MAX_NODES];
    for i in 0..n {
        b[i][i] = z[i] * scale;
        if i + 1 < n {
            b[i][i + 1] = scale;
        }
    }

    // Taylor series of exp(B), ||B|| <= 1/2
    let mut result = [[0.0; MAX_NODES]; MAX_NODES];
    let mut term = [[0.0; MAX_NODES]; MAX_NODES];
    for i in 0..n {
        result[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for k in 1..=TAYLOR_TERMS {
        term = matmul(&term, &b, n);
        let inv = 1.0 / k as f64;
        for row in term.iter_mut().take(n) {
            for v in row.iter_mut().take(n) {
                *v *= inv;
            }
        }
        for i in 0..n {
            for j in i..n {
                result[i][j] += term[i][j];
            }
        }
    }

    for _ in 0..squarings {
        result = matmul(&result, &result, n);
    }
    result[0][n - 1]
}

/// Divided difference of `x -> s^x` at the given exponents, for `s` in (0, 1].
pub(crate) fn power_divided_difference(s: f64, exponents: &[f64]) -> f64 {
    debug_assert!(s > 0.0 && s <= 1.0);
    let c = s.ln();
    let order = exponents.len() as i32 - 1;
    if c == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let mut z = [0.0; MAX_NODES];
    for (dst, &x) in z.iter_mut().zip(exponents) {
        *dst = c * x;
    }
    c.powi(order) * exp_divided_difference(&z[..exponents.len()])
}
