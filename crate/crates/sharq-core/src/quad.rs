//! Gaussian quadrature rules used by the fading averages.
//!
//! Both rules compute their nodes by Newton iteration on the orthogonal
//! polynomial recurrences, so no linear-algebra dependency is needed. The
//! Laguerre recurrence is evaluated with a running rescale factor because
//! `L_n(x)` overflows `f64` near the largest nodes once n exceeds a few
//! hundred.

use alloc::vec::Vec;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1, "quadrature degree must be at least 1");
        let n = degree;
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Chebyshev estimate of the i-th root, then Newton.
            let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let scale = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + scale * x);
        }
        scale * acc
    }
}

/// Gauss-Laguerre rule: integrates f against the weight e^{-x} on [0, inf).
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Laguerre polynomial values at `x`, all scaled by a common e^{-ln_scale}.
///
/// Returns (L_n, L_{n-1}, L_{n+1}, ln_scale).
fn laguerre_scaled(n: usize, x: f64) -> (f64, f64, f64, f64) {
    const BIG: f64 = 1e100;
    const LN_BIG: f64 = 230.258_509_299_404_57; // ln(1e100)
    if n == 0 {
        return (1.0, 0.0, 1.0 - x, 0.0);
    }
    let mut p_prev = 1.0; // L_{k-1}
    let mut p_cur = 1.0 - x; // L_k at k = 1
    let mut ln_scale = 0.0;
    for k in 1..=n {
        let next = (((2 * k + 1) as f64 - x) * p_cur - k as f64 * p_prev) / (k + 1) as f64;
        p_prev = p_cur;
        p_cur = next;
        if p_cur.abs() > BIG || p_prev.abs() > BIG {
            p_cur /= BIG;
            p_prev /= BIG;
            ln_scale += LN_BIG;
        }
    }
    // The loop leaves p_cur = L_{n+1} and p_prev = L_n; recover L_{n-1} from
    // the three-term recurrence at the same scale.
    let l_np1 = p_cur;
    let l_n = p_prev;
    let l_nm1 = (((2 * n + 1) as f64 - x) * l_n - (n + 1) as f64 * l_np1) / n as f64;
    (l_n, l_nm1, l_np1, ln_scale)
}

impl GaussLaguerre {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1, "quadrature degree must be at least 1");
        let n = degree;
        let nf = n as f64;
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let mut z = 0.0;
        for i in 0..n {
            // Stroud/Secrest style initial guesses as used by the classic
            // gaulag routine (alpha = 0).
            z = match i {
                0 => 3.0 / (1.0 + 2.4 * nf),
                1 => z + 15.0 / (1.0 + 2.5 * nf),
                _ => {
                    let ai = (i - 1) as f64;
                    z + ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - nodes[i - 2])
                }
            };
            // Two extra Newton steps after convergence squeeze out the last
            // digits; node error feeds the weight quadratically.
            let mut settled = 0;
            for _ in 0..100 {
                let (l_n, l_nm1, _, _) = laguerre_scaled(n, z);
                let deriv = nf * (l_n - l_nm1) / z;
                let z1 = z;
                z = z1 - l_n / deriv;
                if (z - z1).abs() <= 1e-14 * z.max(1.0) {
                    settled += 1;
                    if settled >= 3 {
                        break;
                    }
                }
            }
            nodes[i] = z;
            // w_i = x_i / ((n+1) L_{n+1}(x_i))^2, evaluated in logs; the far
            // tail underflows to zero, which is harmless for bounded
            // integrands.
            let (_, _, l_np1, ln_scale) = laguerre_scaled(n, z);
            let l_np1_ln = libm::log(l_np1.abs()) + ln_scale;
            let ln_w = libm::log(z) - 2.0 * (libm::log(nf + 1.0) + l_np1_ln);
            weights[i] = libm::exp(ln_w);
        }
        GaussLaguerre { nodes, weights }
    }

    /// Approximate the integral of f(x) e^{-x} over [0, inf).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            if w > 0.0 {
                acc += w * f(x);
            }
        }
        acc
    }

    pub fn node_weight_pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}
