//! Cubic spline interpolation on uniform grids.
//!
//! Only the pieces the potential table needs: second-derivative solves for
//! periodic and end-clamped (or natural) boundary rules, plus the per-cell
//! weight vectors that turn node values and second derivatives into the
//! interpolant and its first two derivatives.
//!
//! On a cell `[x_i, x_i + dx]` with local coordinate `t`, the interpolant is
//!
//! ```text
//! S(t) = A y0 + B y1 + (A^3 - A) m0 dx^2/6 + (B^3 - B) m1 dx^2/6
//! ```
//!
//! with `A = 1 - t/dx`, `B = t/dx` and `m` the nodal second derivatives.

/// Boundary rule for a non-periodic 1D spline.
#[derive(Debug, Clone, Copy)]
pub enum Boundary {
    /// Zero second derivative at both ends.
    Natural,
    /// Prescribed first derivatives at the two ends.
    Clamped { d_start: f64, d_end: f64 },
}

/// Solves a tridiagonal system in place. `sub`, `diag`, `sup` are the three
/// bands (`sub[0]` and `sup[n-1]` unused), `rhs` becomes the solution.
fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

/// Nodal second derivatives of the cubic spline through `y` with spacing
/// `dx` and boundary rule `bc`. Needs `y.len() >= 3`.
pub fn second_derivs(y: &[f64], dx: f64, bc: Boundary) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 3, "spline needs at least 3 nodes");
    let mut sub = vec![1.0; n];
    let mut diag = vec![4.0; n];
    let mut sup = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..n - 1 {
        rhs[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (dx * dx);
    }
    match bc {
        Boundary::Natural => {
            diag[0] = 1.0;
            sup[0] = 0.0;
            rhs[0] = 0.0;
            diag[n - 1] = 1.0;
            sub[n - 1] = 0.0;
            rhs[n - 1] = 0.0;
        }
        Boundary::Clamped { d_start, d_end } => {
            diag[0] = 2.0;
            sup[0] = 1.0;
            rhs[0] = 6.0 * ((y[1] - y[0]) / dx - d_start) / dx;
            diag[n - 1] = 2.0;
            sub[n - 1] = 1.0;
            rhs[n - 1] = 6.0 * (d_end - (y[n - 1] - y[n - 2]) / dx) / dx;
        }
    }
    thomas(&sub, &mut diag, &sup, &mut rhs);
    rhs
}

/// Nodal second derivatives of the periodic cubic spline through `y`.
/// `y` holds one period of `n` samples with spacing `dx`; the implied
/// continuation is `y[n] = y[0]`. Returns `n` second derivatives.
pub fn second_derivs_periodic(y: &[f64], dx: f64) -> Vec<f64> {
    let n = y.len();
    let h2 = dx * dx;
    let rhs_at = |i: usize| {
        let ip = if i + 1 == n { 0 } else { i + 1 };
        let im = if i == 0 { n - 1 } else { i - 1 };
        6.0 * (y[ip] - 2.0 * y[i] + y[im]) / h2
    };
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            // [4 2; 2 4] from the wrapped sub- and super-diagonals landing
            // on the same entry.
            let r0 = rhs_at(0);
            let r1 = rhs_at(1);
            vec![(2.0 * r0 - r1) / 6.0, (2.0 * r1 - r0) / 6.0]
        }
        _ => {
            // Sherman-Morrison: fold the two corner entries of the cyclic
            // matrix into a rank-one update of a plain tridiagonal system.
            let mut rhs: Vec<f64> = (0..n).map(rhs_at).collect();
            let sub = vec![1.0; n];
            let sup = vec![1.0; n];
            let gamma = -4.0;
            let mut diag = vec![4.0; n];
            diag[0] = 4.0 - gamma;
            diag[n - 1] = 4.0 - 1.0 / gamma;
            let mut diag2 = diag.clone();
            thomas(&sub, &mut diag, &sup, &mut rhs);
            let mut u = vec![0.0; n];
            u[0] = gamma;
            u[n - 1] = 1.0;
            thomas(&sub, &mut diag2, &sup, &mut u);
            let num = rhs[0] + rhs[n - 1] / gamma;
            let den = 1.0 + u[0] + u[n - 1] / gamma;
            let fac = num / den;
            for i in 0..n {
                rhs[i] -= fac * u[i];
            }
            rhs
        }
    }
}

/// Weight vectors for one spline cell at local coordinate `t` in `[0, dx]`.
///
/// Row 0 gives the value, row 1 the first and row 2 the second derivative,
/// each as coefficients of `(y0, y1, m0, m1)`.
#[inline]
pub fn cell_weights(t: f64, dx: f64) -> [[f64; 4]; 3] {
    let b = t / dx;
    let a = 1.0 - b;
    let c6 = dx * dx / 6.0;
    [
        [a, b, (a * a * a - a) * c6, (b * b * b - b) * c6],
        [
            -1.0 / dx,
            1.0 / dx,
            -(3.0 * a * a - 1.0) * dx / 6.0,
            (3.0 * b * b - 1.0) * dx / 6.0,
        ],
        [0.0, 0.0, a, b],
    ]
}

/// Evaluates a 1D spline from precomputed second derivatives.
/// `x` is clamped to the data range for non-periodic use.
pub fn eval(y: &[f64], m: &[f64], dx: f64, x: f64) -> f64 {
    let n = y.len();
    let pos = (x / dx).floor();
    let i = (pos as isize).clamp(0, n as isize - 2) as usize;
    let t = x - i as f64 * dx;
    let w = cell_weights(t, dx)[0];
    w[0] * y[i] + w[1] * y[i + 1] + w[2] * m[i] + w[3] * m[i + 1]
}
