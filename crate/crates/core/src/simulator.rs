//! Trace-driven simulation of the replacement schemes.
//!
//! The simulator executes the per-request replacement rules on actual caches,
//! estimates hit ratios over independent rounds (each round resamples the rate
//! model and trace from a derived seed), and sweeps the onset-spread parameter
//! the way the hit-ratio experiments do. Within a sweep, every scheme consumes
//! byte-identical request sequences at the same `(round, t0)`, so scheme
//! comparisons are paired.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::popularity::{
    popularity_at, sample_model, sample_trace, ModelConfig, PopularityVector, Predictor,
    RateModel, RequestTrace,
};
use crate::rng::{mix, stream_rng};
use crate::schemes::SchemeSpec;
use crate::state_space::{CacheState, ContentId, StateSpace};

const TAG_MODEL: u64 = 1;
const TAG_TRACE: u64 = 2;
const TAG_REQUESTS: u64 = 3;
const TAG_DECISIONS: u64 = 100;

/// A cache executing one replacement scheme request by request.
///
/// The cache warm-fills: until `cache_size` distinct contents have been
/// requested, every miss inserts without eviction. The recency list is only
/// maintained for LRU, most recent first.
#[derive(Debug, Clone)]
pub struct CacheSim {
    scheme: SchemeSpec,
    cache_size: usize,
    n_contents: usize,
    contents: Vec<ContentId>,
    recency: Vec<ContentId>,
    rng: ChaCha8Rng,
}

impl CacheSim {
    pub fn new(scheme: SchemeSpec, cache_size: usize, n_contents: usize, seed: u64) -> Result<Self> {
        if cache_size == 0 || cache_size >= n_contents {
            return Err(Error::InvalidDimensions {
                n_contents,
                cache_size,
            });
        }
        scheme.validate(cache_size)?;
        if matches!(scheme, SchemeSpec::General { .. }) {
            return Err(Error::UnsupportedScheme("general"));
        }
        Ok(Self {
            scheme,
            cache_size,
            n_contents,
            contents: Vec::with_capacity(cache_size),
            recency: Vec::with_capacity(cache_size),
            rng: stream_rng(seed, 0),
        })
    }

    /// Starts the cache already filled with the given contents. The LRU recency
    /// order is drawn uniformly at random, matching an uninformed start.
    pub fn from_state(
        scheme: SchemeSpec,
        initial: &CacheState,
        n_contents: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut sim = Self::new(scheme, initial.len(), n_contents, seed)?;
        sim.contents = initial.contents().to_vec();
        if matches!(sim.scheme, SchemeSpec::Lru) {
            let mut order = initial.contents().to_vec();
            // Fisher-Yates
            for i in (1..order.len()).rev() {
                let j = (sim.rng.random::<f64>() * (i + 1) as f64) as usize;
                order.swap(i, j.min(i));
            }
            sim.recency = order;
        }
        Ok(sim)
    }

    pub fn contents(&self) -> &[ContentId] {
        &self.contents
    }

    pub fn is_full(&self) -> bool {
        self.contents.len() == self.cache_size
    }

    /// Current cache state (sorted contents).
    pub fn state(&self) -> Result<CacheState> {
        CacheState::new(self.contents.clone())
    }

    fn insert(&mut self, c: ContentId) {
        let pos = self.contents.binary_search(&c).unwrap_err();
        self.contents.insert(pos, c);
        if matches!(self.scheme, SchemeSpec::Lru) {
            self.recency.insert(0, c);
        }
    }

    fn evict(&mut self, victim: ContentId) {
        let pos = self
            .contents
            .binary_search(&victim)
            .expect("victim is cached");
        self.contents.remove(pos);
        if matches!(self.scheme, SchemeSpec::Lru) {
            self.recency.retain(|&c| c != victim);
        }
    }

    /// Processes one request; returns whether it hit. `prediction` is the
    /// popularity predicted for the next request, required by LP and TLP.
    pub fn step(
        &mut self,
        requested: ContentId,
        prediction: Option<&PopularityVector>,
    ) -> Result<bool> {
        if requested.0 >= self.n_contents {
            return Err(Error::UnknownContent {
                id: requested.0,
                n_contents: self.n_contents,
            });
        }
        if self.contents.binary_search(&requested).is_ok() {
            if matches!(self.scheme, SchemeSpec::Lru) {
                self.recency.retain(|&c| c != requested);
                self.recency.insert(0, requested);
            }
            return Ok(true);
        }
        if !self.is_full() {
            // warm fill
            self.insert(requested);
            return Ok(false);
        }
        match &self.scheme {
            SchemeSpec::Rr { phi } => {
                let replace_prob = self.cache_size as f64 * phi;
                if self.rng.random::<f64>() < replace_prob {
                    let victim =
                        self.contents[(self.rng.random::<f64>() * self.cache_size as f64) as usize
                            % self.cache_size];
                    self.evict(victim);
                    self.insert(requested);
                }
            }
            SchemeSpec::Lp { alpha } => {
                let pred = required_prediction(prediction, self.n_contents)?;
                let vl = pred.get(requested);
                let mut gaps: Vec<(ContentId, f64)> = Vec::with_capacity(self.cache_size);
                let mut denom = 0.0;
                for &q in &self.contents {
                    let gap = vl - pred.get(q);
                    if gap > 0.0 {
                        gaps.push((q, gap));
                        denom += gap;
                    }
                }
                if denom > 0.0 && self.rng.random::<f64>() < *alpha {
                    let mut pick = self.rng.random::<f64>() * denom;
                    let mut victim = gaps.last().expect("nonempty gaps").0;
                    for &(q, gap) in &gaps {
                        if pick < gap {
                            victim = q;
                            break;
                        }
                        pick -= gap;
                    }
                    self.evict(victim);
                    self.insert(requested);
                }
            }
            SchemeSpec::TlpA | SchemeSpec::TlpP => {
                let pred = required_prediction(prediction, self.n_contents)?;
                let state = CacheState::new(self.contents.clone())?;
                let qd = crate::schemes::q_dagger(&state, pred);
                let gap = pred.get(requested) - pred.get(qd);
                if gap > 0.0 {
                    let replace = match self.scheme {
                        SchemeSpec::TlpA => true,
                        _ => self.rng.random::<f64>() < gap,
                    };
                    if replace {
                        self.evict(qd);
                        self.insert(requested);
                    }
                }
            }
            SchemeSpec::Lru => {
                let victim = *self.recency.last().expect("full cache has a recency tail");
                self.evict(victim);
                self.insert(requested);
            }
            SchemeSpec::General { .. } => {
                return Err(Error::UnsupportedScheme("general"));
            }
        }
        Ok(false)
    }
}

fn required_prediction(
    prediction: Option<&PopularityVector>,
    n_contents: usize,
) -> Result<&PopularityVector> {
    let pred = prediction.ok_or_else(|| {
        Error::InvalidScheme("scheme requires a popularity prediction".into())
    })?;
    if pred.len() != n_contents {
        return Err(Error::DimensionMismatch {
            expected: n_contents,
            got: pred.len(),
        });
    }
    Ok(pred)
}

/// Per-run simulation settings shared by all schemes.
#[derive(Debug, Clone)]
pub struct TraceRunConfig {
    pub scheme: SchemeSpec,
    pub cache_size: usize,
    /// Predict with the next request's timestamp (on) or the current one (off).
    pub lookahead: bool,
}

/// Materializes the prediction vector available at each request of a trace.
pub fn trace_predictions(
    model: &RateModel,
    trace: &RequestTrace,
    predictor: &Predictor,
    lookahead: bool,
) -> Result<Vec<PopularityVector>> {
    let times: Vec<f64> = trace.times().collect();
    let n = times.len();
    let mut out = Vec::with_capacity(n);
    if let Predictor::Constant(v) = predictor {
        return Ok(vec![v.clone(); n]);
    }
    let mut last: Option<(usize, PopularityVector)> = None;
    for i in 0..n {
        let target = if lookahead { (i + 1).min(n - 1) } else { i };
        let at = match predictor {
            Predictor::Oracle => target,
            Predictor::StaleEveryK(k) => {
                if *k == 0 {
                    return Err(Error::InvalidParameter(
                        "StaleEveryK period must be at least 1".into(),
                    ));
                }
                (target / k) * k
            }
            Predictor::Constant(_) => unreachable!(),
        };
        match &last {
            Some((idx, v)) if *idx == at => out.push(v.clone()),
            _ => {
                let v = popularity_at(model, times[at])?;
                last = Some((at, v.clone()));
                out.push(v);
            }
        }
    }
    Ok(out)
}

/// Replays a trace through one cache; returns the per-request hit indicators.
pub fn run_trace(
    config: &TraceRunConfig,
    trace: &RequestTrace,
    model: &RateModel,
    predictor: &Predictor,
    seed: u64,
) -> Result<Vec<bool>> {
    let predictions = if config.scheme.needs_prediction() {
        Some(trace_predictions(model, trace, predictor, config.lookahead)?)
    } else {
        None
    };
    run_trace_with_predictions(config, trace, model.n_contents(), predictions.as_deref(), seed)
}

/// Replays a trace against pre-materialized predictions (one per request).
pub fn run_trace_with_predictions(
    config: &TraceRunConfig,
    trace: &RequestTrace,
    n_contents: usize,
    predictions: Option<&[PopularityVector]>,
    seed: u64,
) -> Result<Vec<bool>> {
    if let Some(p) = predictions {
        if p.len() != trace.len() {
            return Err(Error::LengthMismatch {
                expected: trace.len(),
                got: p.len(),
            });
        }
    }
    let mut sim = CacheSim::new(config.scheme.clone(), config.cache_size, n_contents, seed)?;
    let mut hits = Vec::with_capacity(trace.len());
    for (i, &(_, c)) in trace.requests().iter().enumerate() {
        let pred = predictions.map(|p| &p[i]);
        hits.push(sim.step(c, pred)?);
    }
    Ok(hits)
}

/// Settings for seeded multi-round hit-ratio estimation.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model_config: ModelConfig,
    pub horizon: f64,
    pub rounds: usize,
    pub cache_size: usize,
    pub master_seed: u64,
    pub predictor: Predictor,
    pub lookahead: bool,
}

/// Aggregated hit ratios over simulation rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub per_round_hit_ratio: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub total_requests: u64,
}

impl SimResult {
    fn from_rounds(ratios: Vec<f64>, total_requests: u64) -> Self {
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let stderr = if ratios.len() > 1 {
            let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            per_round_hit_ratio: ratios,
            mean,
            stderr,
            total_requests,
        }
    }
}

fn round_master(master_seed: u64, t0_max: f64, round: usize) -> u64 {
    mix(master_seed, mix(t0_max.to_bits(), round as u64))
}

/// Runs `rounds` independent rounds, each with a freshly sampled model and
/// trace derived from the master seed and round index.
pub fn run_monte_carlo(scheme: &SchemeSpec, config: &SimConfig) -> Result<SimResult> {
    if config.rounds == 0 {
        return Err(Error::EmptyInput("simulation needs at least one round"));
    }
    let rows = sweep_point(
        &[("scheme".to_string(), scheme.clone())],
        config,
        config.model_config.t0_max,
    )?;
    Ok(rows.into_iter().next().expect("one scheme produces one row"))
}

fn sweep_point(
    schemes: &[(String, SchemeSpec)],
    config: &SimConfig,
    t0_max: f64,
) -> Result<Vec<SimResult>> {
    let mut ratios: Vec<Vec<f64>> = vec![Vec::with_capacity(config.rounds); schemes.len()];
    let mut totals = vec![0u64; schemes.len()];
    let needs_prediction = schemes.iter().any(|(_, s)| s.needs_prediction());
    let model_config = ModelConfig {
        t0_max,
        ..config.model_config.clone()
    };
    for round in 0..config.rounds {
        let rm = round_master(config.master_seed, t0_max, round);
        let model = sample_model(&model_config, mix(rm, TAG_MODEL))?;
        let trace = sample_trace(&model, config.horizon, mix(rm, TAG_TRACE))?;
        let predictions = if needs_prediction && !trace.is_empty() {
            Some(trace_predictions(
                &model,
                &trace,
                &config.predictor,
                config.lookahead,
            )?)
        } else {
            None
        };
        for (i, (_, scheme)) in schemes.iter().enumerate() {
            let run_config = TraceRunConfig {
                scheme: scheme.clone(),
                cache_size: config.cache_size,
                lookahead: config.lookahead,
            };
            let hits = run_trace_with_predictions(
                &run_config,
                &trace,
                model.n_contents(),
                if scheme.needs_prediction() {
                    predictions.as_deref()
                } else {
                    None
                },
                mix(rm, TAG_DECISIONS + i as u64),
            )?;
            let ratio = if hits.is_empty() {
                0.0
            } else {
                hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
            };
            ratios[i].push(ratio);
            totals[i] += hits.len() as u64;
        }
    }
    Ok(ratios
        .into_iter()
        .zip(totals)
        .map(|(r, t)| SimResult::from_rounds(r, t))
        .collect())
}

/// One sweep entry: a scheme's aggregated hit ratio at one onset spread.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub t0_max: f64,
    pub scheme: String,
    pub mean: f64,
    pub stderr: f64,
    pub per_round: Vec<f64>,
}

/// Sweeps the onset spread `t0_max`, running every scheme on byte-identical
/// per-round traces so comparisons between schemes are paired.
pub fn sweep_t0max(
    schemes: &[(String, SchemeSpec)],
    config: &SimConfig,
    t0_values: &[f64],
) -> Result<Vec<SweepRow>> {
    if t0_values.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one t0 value"));
    }
    if schemes.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one scheme"));
    }
    let mut rows = Vec::with_capacity(t0_values.len() * schemes.len());
    for &t0 in t0_values {
        let results = sweep_point(schemes, config, t0)?;
        for ((label, _), result) in schemes.iter().zip(results) {
            rows.push(SweepRow {
                t0_max: t0,
                scheme: label.clone(),
                mean: result.mean,
                stderr: result.stderr,
                per_round: result.per_round_hit_ratio,
            });
        }
    }
    Ok(rows)
}

/// Empirical state occupancy after `popularity_seq.len()` requests, estimated
/// from `rounds` independent executions of the per-request replacement rules
/// with requests drawn independently from each instant's popularity.
///
/// `prediction_seq[t]` is the prediction in force at step `t`; `None` means
/// accurate prediction (the next instant's popularity, last step reusing the
/// final vector), matching the analytic evolution.
pub fn empirical_scp(
    scheme: &SchemeSpec,
    space: &StateSpace,
    popularity_seq: &[PopularityVector],
    prediction_seq: Option<&[PopularityVector]>,
    eta0_state: usize,
    rounds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if rounds == 0 {
        return Err(Error::EmptyInput("occupancy estimation needs rounds"));
    }
    let n = popularity_seq.len();
    if let Some(preds) = prediction_seq {
        if preds.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: preds.len(),
            });
        }
    }
    let initial = space.state(eta0_state)?.clone();
    let mut counts = vec![0u64; space.n_states()];
    for round in 0..rounds {
        let rm = mix(seed, round as u64);
        let mut request_rng = stream_rng(rm, TAG_REQUESTS);
        let mut sim = CacheSim::from_state(
            scheme.clone(),
            &initial,
            space.n_contents(),
            mix(rm, TAG_DECISIONS),
        )?;
        for t in 0..n {
            let requested = popularity_seq[t].sample(&mut request_rng);
            let prediction = match prediction_seq {
                Some(preds) => Some(&preds[t]),
                None => {
                    if scheme.needs_prediction() {
                        Some(&popularity_seq[(t + 1).min(n - 1)])
                    } else {
                        None
                    }
                }
            };
            sim.step(requested, prediction)?;
        }
        let k = space.index_of(&sim.state()?)?;
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / rounds as f64)
        .collect())
}
