//! One-vs-one kernel SVM trained by SMO with second-order working-set selection.

use std::collections::VecDeque;

use super::{check_training, ClassifierError, KernelKind, Prediction, SvmParams};
use crate::label::ClassLabel;
use crate::scalar::Real;

const TAU: f64 = 1e-12;

/// Decision function of one class pair: `f(x) = Σ coef_i K(sv_i, x) + bias`,
/// positive values vote for `positive`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm<T> {
    pub positive: ClassLabel,
    pub negative: ClassLabel,
    /// Rows of the shared support-vector pool.
    pub sv_index: Vec<u32>,
    /// `α_i y_i` per support vector.
    pub coef: Vec<T>,
    pub bias: T,
    /// Maximal KKT violation when the solver stopped.
    pub kkt_gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    pub kernel: KernelKind,
    pub gamma: T,
    pub c: T,
    pub dim: usize,
    pub classes: Vec<ClassLabel>,
    /// Support vectors, row-major `n_sv × dim`.
    pub sv: Vec<T>,
    pub pairs: Vec<BinarySvm<T>>,
}

fn kernel_value(kind: KernelKind, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        KernelKind::Rbf => (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp(),
    }
}

/// Lazily computed kernel rows with a bounded FIFO budget.
struct KernelCache<'a> {
    rows_of: Vec<&'a [f64]>,
    kind: KernelKind,
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(rows_of: Vec<&'a [f64]>, kind: KernelKind, gamma: f64, cache_mb: usize) -> Self {
        let n = rows_of.len();
        let capacity = ((cache_mb << 20) / (8 * n.max(1))).max(2);
        Self { rows_of, kind, gamma, rows: vec![None; n], order: VecDeque::new(), capacity }
    }

    fn ensure(&mut self, i: usize, keep: usize) {
        if self.rows[i].is_some() {
            return;
        }
        while self.order.len() >= self.capacity {
            let Some(old) = self.order.pop_front() else { break };
            if old == keep {
                self.order.push_back(old);
                if self.order.len() == 1 {
                    break;
                }
                continue;
            }
            self.rows[old] = None;
        }
        let xi = self.rows_of[i];
        let row = self.rows_of.iter().map(|xj| kernel_value(self.kind, self.gamma, xi, xj)).collect();
        self.rows[i] = Some(row);
        self.order.push_back(i);
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("row ensured before use")
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    gap: f64,
    iterations: usize,
}

/// Dual solver for labels `y ∈ {+1, −1}` (libsvm's WSS2 scheme, no shrinking).
fn smo(cache: &mut KernelCache<'_>, y: &[f64], c: f64, tol: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let qd: Vec<f64> = (0..n).map(|i| kernel_value(cache.kind, cache.gamma, cache.rows_of[i], cache.rows_of[i])).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut gap;
    loop {
        // i: most violating index in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = if y[t] > 0.0 { (alpha[t] < c).then(|| -grad[t]) } else { (alpha[t] > 0.0).then_some(grad[t]) };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            cache.ensure(i, i);
            let ki = cache.row(i);
            for t in 0..n {
                let (in_low, yg) = if y[t] > 0.0 { (alpha[t] > 0.0, grad[t]) } else { (alpha[t] < c, -grad[t]) };
                if !in_low {
                    continue;
                }
                gmax2 = gmax2.max(yg);
                let diff = gmax + yg;
                if diff > 0.0 {
                    let quad = qd[i] + qd[t] - 2.0 * ki[t];
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        gap = gmax + gmax2;
        if i == usize::MAX || j == usize::MAX || gap < tol || iterations >= max_iter {
            break;
        }
        iterations += 1;

        cache.ensure(j, i);
        let (ki, kj) = (cache.row(i), cache.row(j));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let quad = qd[i] + qd[j] + 2.0 * ki[j];
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = qd[i] + qd[j] - 2.0 * ki[j];
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..n {
            // Q_ti = y_t y_i K_ti
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 { free_sum / n_free as f64 } else { (ub + lb) / 2.0 };
    Solution { alpha, rho, gap: gap.max(0.0), iterations }
}

/// Default RBF width: `1 / (dim · var)` over all training values.
fn default_gamma(x: &[f64], dim: usize) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0 / dim as f64
    }
}

pub fn svm_train<T: Real>(data: &[T], dim: usize, labels: &[ClassLabel], p: &SvmParams) -> Result<SvmModel<T>, ClassifierError> {
    let classes = check_training(data, dim, labels)?;
    let x: Vec<f64> = data.iter().map(|v| v.as_f64()).collect();
    let gamma = match p.kernel {
        KernelKind::Linear => 0.0,
        KernelKind::Rbf => p.gamma.unwrap_or_else(|| default_gamma(&x, dim)),
    };
    // the stored width is what prediction uses, so train with its T-rounded value
    let gamma_t = T::from_f64_lossy(gamma);
    let gamma = gamma_t.as_f64();
    let c = T::from_f64_lossy(p.c).as_f64();

    let n = labels.len();
    let mut pool_of = vec![u32::MAX; n];
    let mut pool_rows = Vec::new();
    let mut pairs = Vec::new();
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            let idx: Vec<usize> = (0..n).filter(|&r| labels[r] == a || labels[r] == b).collect();
            let y: Vec<f64> = idx.iter().map(|&r| if labels[r] == a { 1.0 } else { -1.0 }).collect();
            let rows_of = idx.iter().map(|&r| &x[r * dim..(r + 1) * dim]).collect();
            let mut cache = KernelCache::new(rows_of, p.kernel, gamma, p.cache_mb);
            let sol = smo(&mut cache, &y, c, p.tol, p.max_iter);
            if sol.iterations >= p.max_iter {
                log::warn!("SVM {a} vs {b}: stopped at max_iter with KKT gap {:.3e}", sol.gap);
            }
            let mut sv_index = Vec::new();
            let mut coef = Vec::new();
            for (k, &r) in idx.iter().enumerate() {
                if sol.alpha[k] > 0.0 {
                    if pool_of[r] == u32::MAX {
                        pool_of[r] = pool_rows.len() as u32;
                        pool_rows.push(r);
                    }
                    sv_index.push(pool_of[r]);
                    coef.push(T::from_f64_lossy(sol.alpha[k] * y[k]));
                }
            }
            pairs.push(BinarySvm {
                positive: a,
                negative: b,
                sv_index,
                coef,
                bias: T::from_f64_lossy(-sol.rho),
                kkt_gap: sol.gap,
                iterations: sol.iterations,
            });
        }
    }
    let sv = pool_rows.iter().flat_map(|&r| data[r * dim..(r + 1) * dim].iter().copied()).collect();
    Ok(SvmModel { kernel: p.kernel, gamma: gamma_t, c: T::from_f64_lossy(p.c), dim, classes, sv, pairs })
}

impl<T: Real> SvmModel<T> {
    pub fn n_sv(&self) -> usize {
        self.sv.len().checked_div(self.dim).unwrap_or(0)
    }

    fn kernels_to(&self, x: &[T]) -> Vec<f64> {
        let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        let gamma = self.gamma.as_f64();
        self.sv
            .chunks_exact(self.dim)
            .map(|s| {
                let sf: Vec<f64> = s.iter().map(|v| v.as_f64()).collect();
                kernel_value(self.kernel, gamma, &sf, &xf)
            })
            .collect()
    }

    /// Pairwise decision values in `pairs` order.
    pub fn decision_values(&self, x: &[T]) -> Vec<f64> {
        let k = self.kernels_to(x);
        self.pairs
            .iter()
            .map(|p| p.sv_index.iter().zip(&p.coef).map(|(&s, c)| c.as_f64() * k[s as usize]).sum::<f64>() + p.bias.as_f64())
            .collect()
    }

    /// Majority vote; ties go to the larger summed `|f|` of won pairs, then the lower class code.
    pub fn predict(&self, x: &[T]) -> Prediction {
        let dec = self.decision_values(x);
        let mut votes = vec![0.0f64; ClassLabel::COUNT];
        let mut strength = [0.0f64; ClassLabel::COUNT];
        for (p, &f) in self.pairs.iter().zip(&dec) {
            let winner = if f > 0.0 { p.positive } else { p.negative };
            votes[winner.code()] += 1.0;
            strength[winner.code()] += f.abs();
        }
        let mut best = self.classes[0];
        for &c in &self.classes[1..] {
            let (v, s) = (votes[c.code()], strength[c.code()]);
            let (bv, bs) = (votes[best.code()], strength[best.code()]);
            if v > bv || (v == bv && s > bs) {
                best = c;
            }
        }
        let score = votes[best.code()] / self.pairs.len().max(1) as f64;
        Prediction { label: best, score, scores: votes }
    }
}
