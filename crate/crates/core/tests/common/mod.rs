//! Independent reference implementations and random instance builders
//! shared by the integration and acceptance tests.

#![allow(dead_code)]

use enetpath::{FeatureMatrix, SurvivalResponse};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Row-major random design with standard normal entries; a fraction
/// `zeros` of the cells is set to exactly zero.
pub fn random_rows(r: &mut ChaCha8Rng, n: usize, p: usize, zeros: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..p)
                .map(|_| if r.gen::<f64>() < zeros { 0.0 } else { normal(r) })
                .collect()
        })
        .collect()
}

pub fn dense(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows(rows).unwrap()
}

pub fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let p = rows[0].len();
    DMatrix::from_fn(n, p, |i, j| rows[i][j])
}

fn with_intercept(x: &DMatrix<f64>, intercept: bool) -> DMatrix<f64> {
    if !intercept {
        return x.clone();
    }
    let n = x.nrows();
    let mut out = DMatrix::from_element(n, x.ncols() + 1, 1.0);
    out.view_mut((0, 1), (n, x.ncols())).copy_from(x);
    out
}

fn split(v: &DVector<f64>, intercept: bool) -> (f64, Vec<f64>) {
    if intercept {
        (v[0], v.iter().skip(1).copied().collect())
    } else {
        (0.0, v.iter().copied().collect())
    }
}

/// Weighted least squares by the normal equations.
pub fn ols(rows: &[Vec<f64>], y: &[f64], w: &[f64], intercept: bool) -> (f64, Vec<f64>) {
    let a = with_intercept(&to_dmatrix(rows), intercept);
    let wm = DVector::from_column_slice(w);
    let mut aw = a.clone();
    for (i, mut row) in aw.row_iter_mut().enumerate() {
        row *= wm[i];
    }
    let lhs = a.transpose() * &aw;
    let rhs = aw.transpose() * DVector::from_column_slice(y);
    let sol = lhs.lu().solve(&rhs).expect("nonsingular normal equations");
    split(&sol, intercept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Canonical {
    Binomial,
    Poisson,
}

/// Unpenalized canonical-link GLM by damped Newton steps.
pub fn newton_glm(rows: &[Vec<f64>], y: &[f64], w: &[f64], kind: Canonical, intercept: bool) -> (f64, Vec<f64>) {
    let a = with_intercept(&to_dmatrix(rows), intercept);
    let n = a.nrows();
    let q = a.ncols();
    let yv = DVector::from_column_slice(y);
    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = &a * beta;
        (0..n)
            .map(|i| {
                let e = eta[i];
                w[i] * match kind {
                    Canonical::Binomial => y[i] * e - (1.0 + e.exp()).ln(),
                    Canonical::Poisson => y[i] * e - e.exp(),
                }
            })
            .sum()
    };
    let mut beta = DVector::zeros(q);
    for _ in 0..200 {
        let eta = &a * &beta;
        let mut grad = DVector::zeros(q);
        let mut hess = DMatrix::zeros(q, q);
        for i in 0..n {
            let (mu, v) = match kind {
                Canonical::Binomial => {
                    let m = 1.0 / (1.0 + (-eta[i]).exp());
                    (m, m * (1.0 - m))
                }
                Canonical::Poisson => {
                    let m = eta[i].exp();
                    (m, m)
                }
            };
            let xi = a.row(i).transpose();
            grad += &xi * (w[i] * (yv[i] - mu));
            hess += &xi * xi.transpose() * (w[i] * v);
        }
        let step = hess.lu().solve(&grad).expect("nonsingular Hessian");
        let base = loglik(&beta);
        let mut t = 1.0;
        let mut next = &beta + &step * t;
        while loglik(&next) < base && t > 1e-8 {
            t *= 0.5;
            next = &beta + &step * t;
        }
        let done = (&next - &beta).amax() < 1e-14;
        beta = next;
        if done {
            break;
        }
    }
    split(&beta, intercept)
}

/// Penalized weighted least squares on an explicit design:
/// `(1/2n) Σ w_i (z_i − b0 − x_i·u)² + λ Σ γ_j ((1−α)/2 u_j² + α|u_j|)`
/// with `lo ≤ u ≤ hi`.
pub struct PwlsInstance {
    pub x: DMatrix<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub lambda: f64,
    pub alpha: f64,
    pub factors: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub intercept: bool,
}

impl PwlsInstance {
    pub fn objective(&self, b0: f64, u: &[f64]) -> f64 {
        let n = self.x.nrows();
        let uv = DVector::from_column_slice(u);
        let fit = &self.x * uv;
        let loss: f64 = (0..n)
            .map(|i| {
                let r = self.z[i] - b0 - fit[i];
                self.w[i] * r * r
            })
            .sum::<f64>()
            / (2.0 * n as f64);
        let pen: f64 = u
            .iter()
            .zip(&self.factors)
            .map(|(&b, &g)| g * (0.5 * (1.0 - self.alpha) * b * b + self.alpha * b.abs()))
            .sum();
        loss + self.lambda * pen
    }

    /// Accelerated projected proximal gradient (FISTA with adaptive
    /// restart) run for `iters` iterations.
    pub fn prox_grad(&self, iters: usize) -> (f64, Vec<f64>) {
        let n = self.x.nrows() as f64;
        let p = self.x.ncols();
        let a = with_intercept(&self.x, self.intercept);
        let off = usize::from(self.intercept);
        let mut wa = a.clone();
        for (i, mut row) in wa.row_iter_mut().enumerate() {
            row *= self.w[i];
        }
        let gram = a.transpose() * &wa / n;
        let lip = gram.symmetric_eigenvalues().max().max(1e-12);
        let step = 1.0 / lip;
        let zw = wa.transpose() * DVector::from_column_slice(&self.z) / n;
        let prox = |v: &DVector<f64>| -> DVector<f64> {
            let mut out = v.clone();
            for j in 0..p {
                let g = self.factors[j];
                let t = step * self.lambda * self.alpha * g;
                let shrunk = v[off + j].signum() * (v[off + j].abs() - t).max(0.0);
                let scaled = shrunk / (1.0 + step * self.lambda * (1.0 - self.alpha) * g);
                out[off + j] = scaled.clamp(self.lower[j], self.upper[j]);
            }
            out
        };
        let full_obj = |v: &DVector<f64>| {
            let (b0, u) = split(v, self.intercept);
            self.objective(b0, &u)
        };
        let mut x = prox(&DVector::zeros(p + off));
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut last = full_obj(&x);
        for _ in 0..iters {
            let grad = &gram * &y - &zw;
            let next = prox(&(&y - grad * step));
            let obj = full_obj(&next);
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            if obj > last {
                // restart momentum
                y = x.clone();
                t = 1.0;
                continue;
            }
            let moved = (&next - &x).amax();
            y = &next + (&next - &x) * ((t - 1.0) / t_next);
            x = next;
            t = t_next;
            last = obj;
            if moved == 0.0 {
                break;
            }
        }
        split(&x, self.intercept)
    }
}

/// Weighted mean and 1/n standard deviation of each column.
pub fn column_moments(rows: &[Vec<f64>], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = rows[0].len();
    let total: f64 = w.iter().sum();
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        let m = rows.iter().zip(w).map(|(r, wi)| wi * r[j]).sum::<f64>() / total;
        let v = rows.iter().zip(w).map(|(r, wi)| wi * (r[j] - m).powi(2)).sum::<f64>() / total;
        means[j] = m;
        sds[j] = v.sqrt();
    }
    (means, sds)
}

/// Breslow log partial likelihood, score and negated Hessian diagonal by
/// direct enumeration of every risk set.
pub struct NaiveCox {
    pub loglik: f64,
    pub grad: Vec<f64>,
    pub wdiag: Vec<f64>,
}

pub fn naive_cox(start: &[f64], stop: &[f64], status: &[bool], strata: &[usize], eta: &[f64], w: &[f64]) -> NaiveCox {
    let n = stop.len();
    let mut loglik = 0.0;
    let mut grad = vec![0.0; n];
    let mut wdiag = vec![0.0; n];
    // distinct (stratum, failure time) pairs
    let mut events: Vec<(usize, f64)> = (0..n).filter(|&i| status[i]).map(|i| (strata[i], stop[i])).collect();
    events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    events.dedup();
    for (s, t) in events {
        let deaths: Vec<usize> = (0..n).filter(|&i| strata[i] == s && status[i] && stop[i] == t).collect();
        let risk: Vec<usize> = (0..n)
            .filter(|&j| strata[j] == s && start[j] < t && t <= stop[j])
            .collect();
        let d: f64 = deaths.iter().map(|&i| w[i]).sum();
        let s0: f64 = risk.iter().map(|&j| w[j] * eta[j].exp()).sum();
        loglik += deaths.iter().map(|&i| w[i] * eta[i]).sum::<f64>() - d * s0.ln();
        for &i in &deaths {
            grad[i] += w[i];
        }
        for &j in &risk {
            let p = w[j] * eta[j].exp() / s0;
            grad[j] -= d * p;
            wdiag[j] += d * (p - p * p);
        }
    }
    NaiveCox { loglik, grad, wdiag }
}

/// Unpenalized Cox regression by Newton's method on the enumerated
/// likelihood (no ties handling beyond Breslow).
pub fn newton_cox(rows: &[Vec<f64>], stop: &[f64], status: &[bool]) -> Vec<f64> {
    let x = to_dmatrix(rows);
    let n = x.nrows();
    let p = x.ncols();
    let w = vec![1.0; n];
    let start = vec![0.0; n];
    let strata = vec![0; n];
    let lik = |b: &DVector<f64>| {
        let eta: Vec<f64> = (&x * b).iter().copied().collect();
        naive_cox(&start, stop, status, &strata, &eta, &w).loglik
    };
    let mut beta = DVector::zeros(p);
    for _ in 0..100 {
        let eta: Vec<f64> = (&x * &beta).iter().copied().collect();
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        let mut events: Vec<f64> = (0..n).filter(|&i| status[i]).map(|i| stop[i]).collect();
        events.sort_by(f64::total_cmp);
        events.dedup();
        for t in events {
            let deaths: Vec<usize> = (0..n).filter(|&i| status[i] && stop[i] == t).collect();
            let risk: Vec<usize> = (0..n).filter(|&j| t <= stop[j]).collect();
            let d = deaths.len() as f64;
            let s0: f64 = risk.iter().map(|&j| eta[j].exp()).sum();
            let mut s1 = DVector::zeros(p);
            let mut s2 = DMatrix::zeros(p, p);
            for &j in &risk {
                let xj = x.row(j).transpose();
                let e = eta[j].exp();
                s1 += &xj * e;
                s2 += &xj * xj.transpose() * e;
            }
            for &i in &deaths {
                grad += x.row(i).transpose();
            }
            grad -= &s1 * (d / s0);
            info += (s2 / s0 - &s1 * s1.transpose() / (s0 * s0)) * d;
        }
        let step = info.lu().solve(&grad).expect("nonsingular information");
        let base = lik(&beta);
        let mut t = 1.0;
        let mut next = &beta + &step * t;
        while lik(&next) < base && t > 1e-8 {
            t *= 0.5;
            next = &beta + &step * t;
        }
        let done = (&next - &beta).amax() < 1e-14;
        beta = next;
        if done {
            break;
        }
    }
    beta.iter().copied().collect()
}

/// Pairwise Mann–Whitney statistic with ties counted one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Random survival data with ties (times on a coarse grid), optional
/// staggered entry and strata.
pub struct SurvData {
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
    pub status: Vec<bool>,
    pub strata: Vec<usize>,
}

impl SurvData {
    pub fn random(r: &mut ChaCha8Rng, n: usize, staggered: bool, n_strata: usize) -> Self {
        let mut start = Vec::with_capacity(n);
        let mut stop = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        let mut strata = Vec::with_capacity(n);
        for _ in 0..n {
            let a = if staggered && r.gen::<f64>() < 0.6 {
                r.gen_range(0..6) as f64 * 0.5
            } else {
                0.0
            };
            let b = a + 0.5 * r.gen_range(1..8) as f64;
            start.push(a);
            stop.push(b);
            status.push(r.gen::<f64>() < 0.7);
            strata.push(r.gen_range(0..n_strata.max(1)));
        }
        if !status.iter().any(|&s| s) {
            status[0] = true;
        }
        Self {
            start,
            stop,
            status,
            strata,
        }
    }

    pub fn response(&self) -> SurvivalResponse {
        let s = SurvivalResponse::counting(self.start.clone(), self.stop.clone(), self.status.clone()).unwrap();
        let labels: Vec<String> = self.strata.iter().map(|k| format!("s{k}")).collect();
        s.with_strata(&labels).unwrap()
    }

    /// Codes in first-appearance order, matching the response's strata.
    pub fn codes(&self) -> Vec<usize> {
        let mut seen: Vec<usize> = Vec::new();
        self.strata
            .iter()
            .map(|k| match seen.iter().position(|s| s == k) {
                Some(i) => i,
                None => {
                    seen.push(*k);
                    seen.len() - 1
                }
            })
            .collect()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
