//! Small numerical building blocks: compensated summation, Gauss–Legendre
//! rules and monotone bisection.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::Error;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th largest root
            let k = i as f64 + 1.0;
            let mut x = (std::f64::consts::PI * (k - 0.25) / (nf + 0.5)).cos()
                * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared rule of order `n`, computed once per process.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Plain rule on `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        half * compensated_sum(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| w * f(mid + half * x)),
        )
    }

    /// Rule on `[lo, hi]` after the graded substitution
    /// `x = lo + (hi - lo) * s^m / (s^m + (1 - s)^m)`, which clusters nodes at
    /// both ends and smooths algebraic endpoint behaviour like `x^γ`.
    pub fn integrate_graded(&self, lo: f64, hi: f64, grade: u32, f: impl Fn(f64) -> f64) -> f64 {
        if grade <= 1 {
            return self.integrate(lo, hi, f);
        }
        let m = grade as i32;
        let len = hi - lo;
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(&x, &w)| {
            let s = 0.5 * (x + 1.0);
            let a = s.powi(m);
            let b = (1.0 - s).powi(m);
            let den = a + b;
            let phi = a / den;
            let dphi = m as f64 * s.powi(m - 1) * (1.0 - s).powi(m - 1) / (den * den);
            // 0.5 from ds/dx
            0.5 * w * len * dphi * f(lo + len * phi)
        }))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Outcome of [`bisect_increasing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Finds `x` in `[lo, hi]` with `f(x) ≈ target` for nondecreasing `f`,
/// assuming `f(lo) <= target <= f(hi)`. Stops when the bracket width drops
/// below `x_tol` or `|f(x) - target| <= f_tol`.
pub fn bisect_increasing<E>(
    mut f: impl FnMut(f64) -> std::result::Result<f64, E>,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> std::result::Result<Root, E>
where
    E: From<Error>,
{
    let mut best = Root { x: hi, value: f(hi)?, iterations: 0 };
    if (best.value - target).abs() <= f_tol {
        return Ok(best);
    }
    for it in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if (v - target).abs() < (best.value - target).abs() {
            best = Root { x: mid, value: v, iterations: it };
        }
        if (v - target).abs() <= f_tol {
            return Ok(Root { x: mid, value: v, iterations: it });
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= x_tol {
            let x = 0.5 * (lo + hi);
            let value = f(x)?;
            return Ok(Root { x, value, iterations: it });
        }
    }
    Err(Error::NoConvergence(format!(
        "bisection did not reach tolerance in {max_iter} iterations (best x = {}, residual = {})",
        best.x,
        best.value - target
    ))
    .into())
}
