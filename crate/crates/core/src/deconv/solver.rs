//! Least-squares density matching on the probability simplex.

use serde::{Deserialize, Serialize};

use super::grid::PriorGrid;
use super::kernel::BandwidthPair;
use crate::error::{check_len, invalid, Error, Result};
use crate::model::Observation;
use crate::scalar::{from_usize, lit, normal_pdf, Real};

/// Nonnegative weights over grid nodes summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridWeights<T>(Vec<T>);

impl<T: Real> GridWeights<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.is_empty() {
            return Err(invalid("weights are empty"));
        }
        if w.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: T = w.iter().copied().sum();
        if (total - T::one()).abs() > lit(1e-9) {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![T::one() / from_usize(k); k])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop when `|f_old - f_new| <= rel_tol * f_old`.
    pub rel_tol: f64,
    /// Stop when the projected-gradient residual falls below this.
    pub pg_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iter: 20_000, rel_tol: 1e-10, pg_tol: 1e-6 }
    }
}

/// Result of [`fit_weights`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPrior<T> {
    pub grid: PriorGrid<T>,
    pub weights: GridWeights<T>,
    /// Sum of squared residuals between implied and kernel marginals.
    pub objective: T,
    pub iterations: usize,
    /// `||w - P(w - grad F)||` with `F` the objective divided by `m`.
    pub kkt_residual: T,
    pub bandwidths: Option<BandwidthPair<T>>,
    /// Objective after each accepted iterate, starting from the uniform weights.
    #[serde(skip, default = "Vec::new")]
    pub history: Vec<T>,
}

/// Euclidean projection onto `{w : w >= 0, sum w = 1}`.
pub fn project_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - T::one()) / from_usize(j + 1);
        if uj - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(T::zero())).collect()
}

struct Quadratic<T> {
    gram: Vec<T>,
    lin: Vec<T>,
    k: usize,
    m: usize,
}

impl<T: Real> Quadratic<T> {
    fn build(design: &[Vec<T>], target: &[T], k: usize) -> Self {
        let mut gram = vec![T::zero(); k * k];
        let mut lin = vec![T::zero(); k];
        for (row, &b) in design.iter().zip(target) {
            for a in 0..k {
                let ra = row[a];
                lin[a] += ra * b;
                for c in a..k {
                    gram[a * k + c] += ra * row[c];
                }
            }
        }
        for a in 0..k {
            for c in 0..a {
                gram[a * k + c] = gram[c * k + a];
            }
        }
        Self { gram, lin, k, m: target.len() }
    }

    fn gram_times(&self, w: &[T]) -> Vec<T> {
        (0..self.k)
            .map(|a| {
                let row = &self.gram[a * self.k..(a + 1) * self.k];
                row.iter().zip(w).map(|(&g, &x)| g * x).sum()
            })
            .collect()
    }

    /// `w'Gw - 2c'w`, the objective up to the constant `b'b`.
    fn value(&self, w: &[T], gw: &[T]) -> T {
        let two = lit::<T>(2.0);
        w.iter()
            .zip(gw)
            .zip(&self.lin)
            .map(|((&x, &g), &c)| x * g - two * c * x)
            .sum()
    }

    fn gradient(&self, gw: &[T]) -> Vec<T> {
        let two = lit::<T>(2.0);
        gw.iter().zip(&self.lin).map(|(&g, &c)| two * (g - c)).collect()
    }

    fn lipschitz(&self) -> T {
        let two = lit::<T>(2.0);
        (0..self.k)
            .map(|a| self.gram[a * self.k..(a + 1) * self.k].iter().map(|g| g.abs()).sum::<T>())
            .fold(T::zero(), T::max)
            * two
    }

    fn kkt_residual(&self, w: &[T], grad: &[T]) -> T {
        let m = from_usize::<T>(self.m);
        let stepped: Vec<T> = w.iter().zip(grad).map(|(&x, &g)| x - g / m).collect();
        let p = project_simplex(&stepped);
        w.iter().zip(&p).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt()
    }
}

/// Current weights with the cached `Gw`, gradient and reduced objective.
struct Iterate<T> {
    w: Vec<T>,
    gw: Vec<T>,
    grad: Vec<T>,
    f: T,
    hit_limit: bool,
}

impl<T: Real> Iterate<T> {
    fn start(q: &Quadratic<T>, w: Vec<T>) -> Self {
        let gw = q.gram_times(&w);
        let f = q.value(&w, &gw);
        let grad = q.gradient(&gw);
        Self { w, gw, grad, f, hit_limit: false }
    }

    /// Exact minimisation along `d` over `[0, limit]`; `None` if `d` is not a
    /// descent direction or rounding would raise the objective.
    fn line_search(&self, q: &Quadratic<T>, d: &[T], limit: T) -> Option<Self> {
        let slope = dot(&self.grad, d);
        if !(slope < T::zero()) {
            return None;
        }
        let gd = q.gram_times(d);
        let curv = dot(d, &gd);
        let t_star = if curv > T::zero() { -slope / (lit::<T>(2.0) * curv) } else { T::infinity() };
        let hit_limit = t_star >= limit;
        let t = if hit_limit { limit } else { t_star };
        if !t.is_finite() || !(t > T::zero()) {
            return None;
        }
        let mut w: Vec<T> = self.w.iter().zip(d).map(|(&x, &dx)| x + t * dx).collect();
        if hit_limit {
            // the blocking coordinates land on zero exactly
            for (wj, &dj) in w.iter_mut().zip(d) {
                if dj < T::zero() && *wj <= T::zero() {
                    *wj = T::zero();
                }
            }
            for (wj, (&w0, &dj)) in w.iter_mut().zip(self.w.iter().zip(d)) {
                if dj < T::zero() && -w0 / dj == limit {
                    *wj = T::zero();
                }
            }
        }
        let gw: Vec<T> = self.gw.iter().zip(&gd).map(|(&g, &dg)| g + t * dg).collect();
        let f = q.value(&w, &gw);
        if f > self.f {
            return None;
        }
        let grad = q.gradient(&gw);
        Some(Self { w, gw, grad, f, hit_limit })
    }
}

/// Negative gradient projected onto the sum-zero directions of the free coordinates.
fn face_descent<T: Real>(grad: &[T], free: &[bool]) -> Vec<T> {
    let n = free.iter().filter(|&&b| b).count();
    if n == 0 {
        return vec![T::zero(); grad.len()];
    }
    let mean = grad.iter().zip(free).filter(|(_, &b)| b).map(|(&g, _)| g).sum::<T>() / from_usize(n);
    grad.iter()
        .zip(free)
        .map(|(&g, &b)| if b { mean - g } else { T::zero() })
        .collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn residual_objective<T: Real>(design: &[Vec<T>], target: &[T], w: &[T]) -> T {
    design
        .iter()
        .zip(target)
        .map(|(row, &b)| {
            let r = dot(row, w) - b;
            r * r
        })
        .sum()
}

/// Minimise `sum_i (sum_j w_j phi_{sigma_i}(x_i - node_j) - marginal_i)^2` over
/// the probability simplex.
///
/// Spectral projected gradient from the uniform weights, with an exact line
/// search along each projected direction, so the objective never increases.
pub fn fit_weights<T: Real>(
    grid: &PriorGrid<T>,
    observations: &[Observation<T>],
    marginals: &[T],
    options: &SolverOptions,
) -> Result<FittedPrior<T>> {
    check_len("marginals", observations.len(), marginals.len())?;
    if observations.is_empty() {
        return Err(invalid("no observations to fit"));
    }
    if marginals.iter().any(|&b| !(b > T::zero()) || !b.is_finite()) {
        return Err(invalid("kernel marginals must be positive and finite"));
    }
    let k = grid.k();
    let design: Vec<Vec<T>> = observations
        .iter()
        .map(|o| grid.nodes().iter().map(|&s| normal_pdf(o.x - s, o.sigma)).collect())
        .collect();
    let q = Quadratic::build(&design, marginals, k);
    let lip = q.lipschitz().max(T::min_positive_value());
    let (step_min, step_max) = (lit::<T>(1e-12) / lip, lit::<T>(1e12) / lip);
    let rel_tol = lit::<T>(options.rel_tol);
    let pg_tol = lit::<T>(options.pg_tol);
    let bb = dot(marginals, marginals);

    let mut it = Iterate::start(&q, GridWeights::<T>::uniform(k).0);
    let mut step = T::one() / lip;
    let mut history = vec![(it.f + bb).max(T::zero())];
    let mut iterations = 0;
    let mut converged = q.kkt_residual(&it.w, &it.grad) <= pg_tol;

    while !converged && iterations < options.max_iter {
        let f_before = it.f;

        // gradient projection with a spectral step
        iterations += 1;
        let trial: Vec<T> = it.w.iter().zip(&it.grad).map(|(&x, &g)| x - step * g).collect();
        let d: Vec<T> = project_simplex(&trial).iter().zip(&it.w).map(|(&p, &x)| p - x).collect();
        let Some(moved) = it.line_search(&q, &d, T::one()) else {
            break;
        };
        let s: Vec<T> = moved.w.iter().zip(&it.w).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = moved.grad.iter().zip(&it.grad).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > T::zero() {
            (dot(&s, &s) / sy).max(step_min).min(step_max)
        } else {
            step_max
        };
        it = moved;
        history.push((it.f + bb).max(T::zero()));

        // conjugate gradients on the face of the current support
        let free: Vec<bool> = it.w.iter().map(|&v| v > T::zero()).collect();
        let n_free = free.iter().filter(|&&b| b).count();
        let mut r = face_descent(&it.grad, &free);
        let mut rr = dot(&r, &r);
        let mut p = r.clone();
        for _ in 1..n_free {
            if iterations >= options.max_iter || !(rr > T::zero()) {
                break;
            }
            let limit = p
                .iter()
                .zip(&it.w)
                .filter(|(&pj, _)| pj < T::zero())
                .map(|(&pj, &wj)| -wj / pj)
                .fold(T::infinity(), T::min);
            iterations += 1;
            let Some(moved) = it.line_search(&q, &p, limit) else {
                break;
            };
            let blocked = moved.hit_limit;
            it = moved;
            history.push((it.f + bb).max(T::zero()));
            if blocked {
                break;
            }
            r = face_descent(&it.grad, &free);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            p = r.iter().zip(&p).map(|(&a, &b)| a + beta * b).collect();
            rr = rr_new;
        }

        let f_ref = (f_before + bb).abs().max(T::min_positive_value());
        let small_change = (f_before - it.f).abs() <= rel_tol * f_ref;
        converged = small_change || q.kkt_residual(&it.w, &it.grad) <= pg_tol;
    }
    let w = it.w;

    // clean up rounding drift off the simplex
    let mut w: Vec<T> = w.into_iter().map(|v| v.max(T::zero())).collect();
    let total: T = w.iter().copied().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let kkt = q.kkt_residual(&w, &q.gradient(&q.gram_times(&w)));
    let objective = residual_objective(&design, marginals, &w);

    if !converged && iterations >= options.max_iter {
        return Err(Error::NotConverged {
            iterations,
            residual: kkt.to_f64().unwrap_or(f64::NAN),
            best_objective: objective.to_f64().unwrap_or(f64::NAN),
            best_weights: w.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
        });
    }
    Ok(FittedPrior {
        grid: grid.clone(),
        weights: GridWeights(w),
        objective,
        iterations,
        kkt_residual: kkt,
        bandwidths: None,
        history,
    })
}

/// Conditional local fdr of one observation under a fitted prior: the share of
/// the implied marginal at `x` contributed by nodes `<= mu0`.
pub fn clfdr_from_fit<T: Real>(fit: &FittedPrior<T>, obs: &Observation<T>, mu0: T) -> T {
    clfdr_point_masses(fit.grid.nodes(), fit.weights.as_slice(), obs.x, obs.sigma, mu0)
}

/// `f0 / f` for a discrete prior, evaluated with the exponents shifted by their
/// maximum so that distant observations do not underflow to `0 / 0`.
pub(crate) fn clfdr_point_masses<T: Real>(nodes: &[T], weights: &[T], x: T, sigma: T, mu0: T) -> T {
    let half = lit::<T>(0.5);
    let expo = |s: T| {
        let z = (x - s) / sigma;
        -half * z * z
    };
    let shift = nodes
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > T::zero())
        .map(|(&s, _)| expo(s))
        .fold(T::neg_infinity(), T::max);
    if !shift.is_finite() {
        return T::zero();
    }
    let mut f = T::zero();
    let mut f0 = T::zero();
    for (&s, &w) in nodes.iter().zip(weights) {
        if w > T::zero() {
            let term = w * (expo(s) - shift).exp();
            f += term;
            if s <= mu0 {
                f0 += term;
            }
        }
    }
    let floor = lit::<T>(1e-300).max(T::min_positive_value());
    (f0 / f.max(floor)).max(T::zero()).min(T::one())
}
