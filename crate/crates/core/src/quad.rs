//! Globally adaptive Gauss-Legendre quadrature.
//!
//! Each panel is integrated with an `n`-point rule and again as two halves;
//! the difference is the panel's error estimate. The panel with the largest
//! estimate is bisected until the summed estimate drops below the absolute
//! tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    #[inline]
    pub fn apply<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }
}

/// Legendre polynomial P_n(x) and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl Panel {
    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integrator with an absolute error target.
#[derive(Clone, Debug)]
pub struct Adaptive {
    rule: GaussLegendre,
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl Adaptive {
    pub fn new(tolerance: f64) -> Self {
        Adaptive {
            rule: GaussLegendre::new(15),
            tolerance,
            max_evaluations: 4_000_000,
        }
    }

    /// Integrates `f` across consecutive `breakpoints`, each interval first
    /// cut into `initial_panels` equal pieces (at least one).
    pub fn integrate<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        breakpoints: &[f64],
        initial_panels: &[usize],
    ) -> Result<f64> {
        assert!(breakpoints.len() >= 2);
        let n = self.rule.nodes.len();
        let mut evaluations = 0usize;
        let mut heap = BinaryHeap::new();
        let mut total_error = 0.0;

        let make_panel = |f: &mut F, a: f64, b: f64, coarse: f64, evals: &mut usize| {
            let m = 0.5 * (a + b);
            let left = self.rule.apply(f, a, m);
            let right = self.rule.apply(f, m, b);
            *evals += 2 * n;
            Panel {
                a,
                b,
                left,
                right,
                error: (left + right - coarse).abs(),
            }
        };

        for (i, w) in breakpoints.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            if a == b {
                continue;
            }
            let pieces = initial_panels.get(i).copied().unwrap_or(1).max(1);
            let step = (b - a) / pieces as f64;
            for k in 0..pieces {
                let pa = a + step * k as f64;
                let pb = if k + 1 == pieces { b } else { pa + step };
                let coarse = self.rule.apply(&mut f, pa, pb);
                evaluations += n;
                let p = make_panel(&mut f, pa, pb, coarse, &mut evaluations);
                total_error += p.error;
                heap.push(p);
            }
        }

        while total_error > self.tolerance {
            if evaluations > self.max_evaluations {
                return Err(Error::QuadratureFailure {
                    tolerance: self.tolerance,
                    estimate: total_error,
                    evaluations,
                });
            }
            let worst = match heap.pop() {
                Some(p) => p,
                None => break,
            };
            let m = 0.5 * (worst.a + worst.b);
            if m <= worst.a || m >= worst.b {
                // Panel cannot be split further in floating point.
                return Err(Error::QuadratureFailure {
                    tolerance: self.tolerance,
                    estimate: total_error,
                    evaluations,
                });
            }
            let l = make_panel(&mut f, worst.a, m, worst.left, &mut evaluations);
            let r = make_panel(&mut f, m, worst.b, worst.right, &mut evaluations);
            total_error += l.error + r.error - worst.error;
            heap.push(l);
            heap.push(r);
        }

        // Sum small panels first for a reproducible, well-rounded total.
        let mut panels: Vec<Panel> = heap.into_vec();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        Ok(panels.iter().map(Panel::value).sum())
    }
}
