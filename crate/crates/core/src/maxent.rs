//! Conditional maximum-entropy model of pairwise coreference.
//!
//! `p(y|x) = exp(Σ λ_i f_i(x,y)) / Z(x)` over binary outcomes, fitted with
//! improved iterative scaling and grown one feature at a time by approximate
//! likelihood gain.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};
use crate::features::{candidate_features, Characteristics, DistanceConfig, EmpiricalDataset, Feature};

#[derive(Debug, Clone, PartialEq)]
pub struct MaxentModel {
    active: Vec<Feature>,
    lambdas: Vec<f64>,
    dcfg: DistanceConfig,
}

impl Default for MaxentModel {
    fn default() -> Self {
        MaxentModel::empty(DistanceConfig::default())
    }
}

impl MaxentModel {
    pub fn empty(dcfg: DistanceConfig) -> Self {
        MaxentModel { active: Vec::new(), lambdas: Vec::new(), dcfg }
    }

    pub fn new(active: Vec<Feature>, lambdas: Vec<f64>, dcfg: DistanceConfig) -> Result<Self> {
        if active.len() != lambdas.len() {
            return Err(CorefError::Config(format!("{} features but {} weights", active.len(), lambdas.len())));
        }
        if let Some(l) = lambdas.iter().find(|l| !l.is_finite()) {
            return Err(CorefError::Config(format!("non-finite weight {l}")));
        }
        for (i, f) in active.iter().enumerate() {
            if active[..i].contains(f) {
                return Err(CorefError::Config(format!("duplicate feature {f}")));
            }
        }
        Ok(MaxentModel { active, lambdas, dcfg })
    }

    pub fn active(&self) -> &[Feature] {
        &self.active
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn weights(&self) -> impl Iterator<Item = (&Feature, f64)> {
        self.active.iter().zip(self.lambdas.iter().copied())
    }

    pub fn distance_config(&self) -> &DistanceConfig {
        &self.dcfg
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    fn score(&self, x: &Characteristics, y: bool) -> f64 {
        self.weights().filter(|(f, _)| f.fires(x, y)).map(|(_, l)| l).sum()
    }

    /// Probability that the pair described by `x` corefers.
    pub fn predict(&self, x: &Characteristics) -> f64 {
        let s0 = self.score(x, false);
        let s1 = self.score(x, true);
        // logistic of s1 - s0, written to avoid overflow in either direction
        let d = s1 - s0;
        if d >= 0.0 {
            1.0 / (1.0 + (-d).exp())
        } else {
            let e = d.exp();
            e / (1.0 + e)
        }
    }

    fn push(&mut self, f: Feature, lambda: f64) {
        self.active.push(f);
        self.lambdas.push(lambda);
    }
}

/// Context-level view of a dataset: empirical marginal and outcome counts.
struct Table {
    xs: Vec<Characteristics>,
    /// p_d(x)
    px: Vec<f64>,
    /// p_d(x, y) indexed by y
    pxy: Vec<[f64; 2]>,
    counts: Vec<[u64; 2]>,
}

impl Table {
    fn new(data: &EmpiricalDataset) -> Self {
        let n = data.total() as f64;
        let mut t = Table { xs: Vec::new(), px: Vec::new(), pxy: Vec::new(), counts: Vec::new() };
        for (x, c) in data.contexts() {
            t.xs.push(*x);
            t.px.push((c[0] + c[1]) as f64 / n);
            t.pxy.push([c[0] as f64 / n, c[1] as f64 / n]);
            t.counts.push(c);
        }
        t
    }

    fn empirical(&self, f: &Feature) -> f64 {
        self.xs
            .iter()
            .zip(&self.pxy)
            .filter(|(x, _)| f.predicate.holds(x))
            .map(|(_, p)| p[usize::from(f.outcome)])
            .sum()
    }

    fn model(&self, model: &MaxentModel, f: &Feature) -> f64 {
        self.xs
            .iter()
            .zip(&self.px)
            .filter(|(x, _)| f.predicate.holds(x))
            .map(|(x, px)| {
                let p1 = model.predict(x);
                px * if f.outcome { p1 } else { 1.0 - p1 }
            })
            .sum()
    }

    /// Reject features whose weight would diverge: never observed, or observed
    /// with its outcome on every context where its predicate holds.
    fn check_degenerate(&self, f: &Feature) -> Result<()> {
        let (mut hit, mut support) = (0u64, 0u64);
        for (x, c) in self.xs.iter().zip(&self.counts) {
            if f.predicate.holds(x) {
                hit += c[usize::from(f.outcome)];
                support += c[0] + c[1];
            }
        }
        let reason = if hit == 0 {
            "empirical expectation is zero"
        } else if hit == support {
            "empirical expectation is saturated"
        } else {
            return Ok(());
        };
        Err(CorefError::DegenerateFeature { feature: f.to_string(), reason: reason.to_string() })
    }
}

/// Outcome of a successful fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub max_residual: f64,
}

/// `|E_d[f_i] - E_model[f_i]|` for every active feature.
pub fn constraint_residuals(model: &MaxentModel, data: &EmpiricalDataset) -> Vec<f64> {
    let table = Table::new(data);
    model.active.iter().map(|f| (table.empirical(f) - table.model(model, f)).abs()).collect()
}

/// Find the root of a strictly increasing function with Newton steps,
/// falling back to bisection whenever a step leaves the bracket.
fn solve_increasing(g: impl Fn(f64) -> (f64, f64), start: f64) -> Option<f64> {
    const TOL: f64 = 1e-14;
    let (g0, _) = g(start);
    if g0 == 0.0 {
        return Some(start);
    }
    // bracket [lo, hi] with g(lo) < 0 < g(hi)
    let (mut lo, mut hi);
    let mut step = 1.0;
    if g0 < 0.0 {
        lo = start;
        hi = start + step;
        while g(hi).0 < 0.0 {
            lo = hi;
            step *= 2.0;
            hi += step;
            if hi > 1e3 {
                return None;
            }
        }
    } else {
        hi = start;
        lo = start - step;
        while g(lo).0 > 0.0 {
            hi = lo;
            step *= 2.0;
            lo -= step;
            if lo < -1e3 {
                return None;
            }
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = g(x);
        if v == 0.0 {
            return Some(x);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / dv;
        let next = if dv > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= TOL * (1.0 + x.abs()) || hi - lo <= TOL {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

/// Fit the weights of the active features by improved iterative scaling until
/// every constraint residual is at most `tol`.
pub fn iis_fit(model: &mut MaxentModel, data: &EmpiricalDataset, tol: f64, max_iters: usize) -> Result<FitReport> {
    let table = Table::new(data);
    for f in &model.active {
        table.check_degenerate(f)?;
    }
    let k = model.active.len();
    if k == 0 {
        return Ok(FitReport { iterations: 0, max_residual: 0.0 });
    }

    let empirical: Vec<f64> = model.active.iter().map(|f| table.empirical(f)).collect();
    // which features fire on (x, y), and f#(x, y)
    let firing: Vec<[Vec<usize>; 2]> = table
        .xs
        .iter()
        .map(|x| [false, true].map(|y| (0..k).filter(|&i| model.active[i].fires(x, y)).collect()))
        .collect();
    let max_sharp = firing.iter().flat_map(|f| f.iter().map(|v| v.len())).max().unwrap_or(1);

    let mut residual = f64::INFINITY;
    for iter in 0..=max_iters {
        // model expectation of each feature, split by f#(x, y)
        let mut by_sharp = vec![vec![0.0; max_sharp + 1]; k];
        for (xi, x) in table.xs.iter().enumerate() {
            let p1 = model.predict(x);
            for (y, py) in [(0usize, 1.0 - p1), (1usize, p1)] {
                let on = &firing[xi][y];
                let w = table.px[xi] * py;
                for &i in on {
                    by_sharp[i][on.len()] += w;
                }
            }
        }
        residual = (0..k).map(|i| (empirical[i] - by_sharp[i].iter().sum::<f64>()).abs()).fold(0.0, f64::max);
        if residual <= tol {
            return Ok(FitReport { iterations: iter, max_residual: residual });
        }
        if iter == max_iters {
            break;
        }

        for i in 0..k {
            let a = &by_sharp[i];
            let target = empirical[i];
            let g = |d: f64| {
                let mut v = -target;
                let mut dv = 0.0;
                for (m, &am) in a.iter().enumerate().skip(1) {
                    if am > 0.0 {
                        let e = am * (m as f64 * d).exp();
                        v += e;
                        dv += m as f64 * e;
                    }
                }
                (v, dv)
            };
            let delta = solve_increasing(g, 0.0).ok_or_else(|| CorefError::DegenerateFeature {
                feature: model.active[i].to_string(),
                reason: "scaling update has no finite solution".into(),
            })?;
            model.lambdas[i] += delta;
        }
    }
    Err(CorefError::NoConvergence { iters: max_iters, residual })
}

/// Approximate gain, in bits per observation, from adding `f` with its best
/// weight while holding the current weights fixed. Returns the gain and that weight.
pub fn feature_gain_with_weight(model: &MaxentModel, data: &EmpiricalDataset, f: &Feature) -> Result<(f64, f64)> {
    let table = Table::new(data);
    table.check_degenerate(f)?;
    let target = table.empirical(f);
    // contexts where f can fire: weight p_d(x) and current q = p(f.outcome | x)
    let support: Vec<(f64, f64)> = table
        .xs
        .iter()
        .zip(&table.px)
        .filter(|(x, _)| f.predicate.holds(x))
        .map(|(x, px)| {
            let p1 = model.predict(x);
            (*px, if f.outcome { p1 } else { 1.0 - p1 })
        })
        .collect();

    // G'(a) = E_d[f] - Σ p(x) q e^a / (1 - q + q e^a), decreasing in a
    let neg_grad = |a: f64| {
        let mut v = -target;
        let mut dv = 0.0;
        for &(px, q) in &support {
            let r = q * a.exp() / (1.0 - q + q * a.exp());
            v += px * r;
            dv += px * r * (1.0 - r);
        }
        (v, dv)
    };
    let alpha = solve_increasing(neg_grad, 0.0).ok_or_else(|| CorefError::DegenerateFeature {
        feature: f.to_string(),
        reason: "gain has no finite maximizer".into(),
    })?;
    let gain_nats = alpha * target - support.iter().map(|&(px, q)| px * (1.0 - q + q * alpha.exp()).ln()).sum::<f64>();
    Ok((gain_nats.max(0.0) / LN_2, alpha))
}

pub fn feature_gain(model: &MaxentModel, data: &EmpiricalDataset, f: &Feature) -> Result<f64> {
    feature_gain_with_weight(model, data, f).map(|(g, _)| g)
}

/// `-Σ p_d(x,y) log2 p_model(y|x)`.
pub fn data_cross_entropy(model: &MaxentModel, data: &EmpiricalDataset) -> f64 {
    let n = data.total();
    if n == 0 {
        return 0.0;
    }
    let mut bits = 0.0;
    for (x, c) in data.contexts() {
        let p1 = model.predict(x);
        if c[1] > 0 {
            bits -= c[1] as f64 * p1.log2();
        }
        if c[0] > 0 {
            bits -= c[0] as f64 * (1.0 - p1).log2();
        }
    }
    bits / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Stop when the best remaining gain (bits per observation) falls below this.
    pub gain_threshold: f64,
    pub max_features: usize,
    /// Largest acceptable constraint residual after each refit.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { gain_threshold: 1e-3, max_features: 40, tol: 1e-6, max_iters: 100_000 }
    }
}

/// One round of feature selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub feature: Feature,
    pub gain: f64,
    pub cross_entropy: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: MaxentModel,
    pub steps: Vec<SelectionStep>,
    pub cross_entropy: f64,
}

/// Greedy feature selection with a full refit after every added feature.
pub fn select_and_train(data: &EmpiricalDataset, dcfg: DistanceConfig, cfg: &TrainConfig) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(CorefError::Config("cannot train on an empty dataset".into()));
    }
    let table = Table::new(data);
    let candidates: Vec<Feature> = candidate_features()
        .into_iter()
        .filter(|f| match table.check_degenerate(f) {
            Ok(()) => true,
            Err(e) => {
                log::debug!("skipping candidate: {e}");
                false
            }
        })
        .collect();

    let mut model = MaxentModel::empty(dcfg);
    let mut steps = Vec::new();
    let mut rejected: Vec<Feature> = Vec::new();
    while model.active.len() < cfg.max_features {
        let mut best: Option<(Feature, f64, f64)> = None;
        for f in candidates.iter().filter(|f| !model.active.contains(f) && !rejected.contains(f)) {
            let (gain, alpha) = match feature_gain_with_weight(&model, data, f) {
                Ok(g) => g,
                Err(CorefError::DegenerateFeature { .. }) => continue,
                Err(e) => return Err(e),
            };
            // strict comparison keeps the earliest candidate on ties
            if best.is_none_or(|(_, g, _)| gain > g) {
                best = Some((*f, gain, alpha));
            }
        }
        let Some((feature, gain, alpha)) = best else { break };
        if gain < cfg.gain_threshold {
            break;
        }
        let previous = model.clone();
        model.push(feature, alpha);
        let fit = match iis_fit(&mut model, data, cfg.tol, cfg.max_iters) {
            Ok(fit) => fit,
            // the data separate along a direction this feature opens up, so the
            // likelihood has no finite maximum with it active
            Err(e @ (CorefError::NoConvergence { .. } | CorefError::DegenerateFeature { .. })) => {
                log::warn!("rejecting {feature}: {e}");
                model = previous;
                rejected.push(feature);
                continue;
            }
            Err(e) => return Err(e),
        };
        let cross_entropy = data_cross_entropy(&model, data);
        log::info!("selected {feature} (gain {gain:.5} bits), training cross-entropy {cross_entropy:.4}");
        steps.push(SelectionStep { feature, gain, cross_entropy, iterations: fit.iterations });
    }
    let cross_entropy = data_cross_entropy(&model, data);
    Ok(TrainedModel { model, steps, cross_entropy })
}
