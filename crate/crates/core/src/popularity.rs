//! Time-varying content popularity: rate models, per-request probability
//! vectors, and inhomogeneous-Poisson request traces.
//!
//! A rate model assigns each content an instantaneous request rate `y_l(t)`.
//! The per-request popularity vector at time `t` is the normalized rate
//! `y_l(t) / sum_q y_q(t)`: the conditional distribution of the request identity
//! given that a request occurs at `t`. This is the bridge between the analytic
//! per-request probability vectors and the Poisson trace generator.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::state_space::ContentId;

/// A probability vector over the content catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityVector {
    probs: Vec<f64>,
}

impl PopularityVector {
    /// Accepts a vector within `1e-9` of the simplex and renormalizes it exactly.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("popularity vector"));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidParameter(
                "popularity entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "popularity entries sum to {sum}, not 1"
            )));
        }
        Ok(Self::from_rates_unchecked(probs, sum))
    }

    /// Normalizes arbitrary nonnegative rates into a popularity vector.
    pub fn from_rates(rates: &[f64]) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::EmptyInput("rate vector"));
        }
        if rates.iter().any(|&r| !r.is_finite() || r < 0.0) {
            return Err(Error::InvalidParameter(
                "rates must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = rates.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidParameter("rates sum to zero".into()));
        }
        Ok(Self::from_rates_unchecked(rates.to_vec(), sum))
    }

    fn from_rates_unchecked(mut probs: Vec<f64>, sum: f64) -> Self {
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, l: ContentId) -> f64 {
        self.probs[l.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_entry(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Draws a content index from this distribution.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> ContentId {
        let u: f64 = rng.random::<f64>();
        let mut acc = 0.0;
        for (l, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return ContentId(l);
            }
        }
        ContentId(self.probs.len() - 1)
    }
}

/// Per-content shot-noise parameters: an onset time after which the request
/// rate decays exponentially, with lifetime request count `amplitude`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseContent {
    pub amplitude: f64,
    pub decay: f64,
    pub onset: f64,
}

/// Per-content Gaussian-pulse parameters; the pulse width is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianContent {
    pub amplitude: f64,
    pub peak: f64,
}

/// Instantaneous request-rate model for the whole catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum RateModel {
    /// Exponentially decaying rate `A_l b_l exp(-b_l (t - t_{l,0}))` from onset.
    ShotNoise { contents: Vec<ShotNoiseContent> },
    /// Gaussian rate pulse of width `sigma` centered at each content's peak time.
    GaussianPulse {
        contents: Vec<GaussianContent>,
        sigma: f64,
    },
    /// Time-invariant popularity; entries double as request rates.
    Static(PopularityVector),
    /// Step-interpolated popularity breakpoints, strictly increasing in time.
    Piecewise(Vec<(f64, PopularityVector)>),
}

impl RateModel {
    pub fn n_contents(&self) -> usize {
        match self {
            RateModel::ShotNoise { contents } => contents.len(),
            RateModel::GaussianPulse { contents, .. } => contents.len(),
            RateModel::Static(v) => v.len(),
            RateModel::Piecewise(points) => points.first().map_or(0, |(_, v)| v.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RateModel::ShotNoise { contents } => {
                if contents.iter().any(|c| c.amplitude <= 0.0 || c.decay <= 0.0) {
                    return Err(Error::InvalidParameter(
                        "shot-noise amplitude and decay must be positive".into(),
                    ));
                }
            }
            RateModel::GaussianPulse { contents, sigma } => {
                if *sigma <= 0.0 || contents.iter().any(|c| c.amplitude <= 0.0) {
                    return Err(Error::InvalidParameter(
                        "gaussian amplitude and sigma must be positive".into(),
                    ));
                }
            }
            RateModel::Static(_) => {}
            RateModel::Piecewise(points) => {
                if points.is_empty() {
                    return Err(Error::EmptyInput("piecewise breakpoints"));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidParameter(
                        "piecewise breakpoints must be strictly increasing".into(),
                    ));
                }
                let n = points[0].1.len();
                if points.iter().any(|(_, v)| v.len() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: points.iter().find(|(_, v)| v.len() != n).unwrap().1.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Instantaneous rate of content `l` at time `t`, any variant.
    pub fn rate(&self, l: ContentId, t: f64) -> f64 {
        match self {
            RateModel::ShotNoise { contents } => {
                let c = &contents[l.0];
                if t >= c.onset {
                    c.amplitude * c.decay * (-c.decay * (t - c.onset)).exp()
                } else {
                    0.0
                }
            }
            RateModel::GaussianPulse { contents, sigma } => {
                let c = &contents[l.0];
                let dev = t - c.peak;
                c.amplitude / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
                    * (-dev * dev / (2.0 * sigma * sigma)).exp()
            }
            RateModel::Static(v) => v.get(l),
            RateModel::Piecewise(points) => self.piecewise_at(points, t).get(l),
        }
    }

    fn piecewise_at<'a>(
        &self,
        points: &'a [(f64, PopularityVector)],
        t: f64,
    ) -> &'a PopularityVector {
        // Step interpolation: the latest breakpoint at or before t applies;
        // before the first breakpoint the first vector applies.
        let mut current = &points[0].1;
        for (time, v) in points {
            if *time <= t {
                current = v;
            } else {
                break;
            }
        }
        current
    }
}

/// Shot-noise rate `A_l b_l exp(-b_l (t - t_{l,0}))` for `t >= t_{l,0}`, else 0.
pub fn shot_noise_rate(model: &RateModel, l: ContentId, t: f64) -> Result<f64> {
    match model {
        RateModel::ShotNoise { .. } => Ok(model.rate(l, t)),
        _ => Err(Error::WrongVariant {
            expected: "ShotNoise",
        }),
    }
}

/// Gaussian-pulse rate `A_l / (sqrt(2 pi) sigma) * exp(-(t - t_{l,0})^2 / (2 sigma^2))`.
pub fn gaussian_rate(model: &RateModel, l: ContentId, t: f64) -> Result<f64> {
    match model {
        RateModel::GaussianPulse { .. } => Ok(model.rate(l, t)),
        _ => Err(Error::WrongVariant {
            expected: "GaussianPulse",
        }),
    }
}

/// Normalized instantaneous rates: the request-identity distribution at time `t`.
pub fn popularity_at(model: &RateModel, t: f64) -> Result<PopularityVector> {
    if let RateModel::Static(v) = model {
        return Ok(v.clone());
    }
    let n = model.n_contents();
    let rates: Vec<f64> = (0..n).map(|l| model.rate(ContentId(l), t)).collect();
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotalRate { t });
    }
    PopularityVector::from_rates(&rates)
}

/// Shape of the rate model sampled by [`sample_model`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Shot noise with a common decay; default 0.01/s gives life spans of a
    /// few hundred seconds.
    ShotNoise { decay: f64 },
    /// Gaussian pulses with a common width; default 200 s.
    GaussianPulse { sigma: f64 },
    /// A fixed popularity vector; nothing is sampled.
    Static(PopularityVector),
}

pub const DEFAULT_SHOT_NOISE_DECAY: f64 = 0.01;
pub const DEFAULT_GAUSSIAN_SIGMA: f64 = 200.0;

/// Configuration for sampling a random rate model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n_contents: usize,
    /// Onset/peak times are drawn uniformly from `[0, t0_max]`.
    pub t0_max: f64,
    /// Amplitudes are drawn uniformly from `[a_min, a_max]`.
    pub a_min: f64,
    pub a_max: f64,
    pub kind: ModelKind,
}

/// Draws per-content onset/peak times and amplitudes; deterministic given `seed`.
pub fn sample_model(config: &ModelConfig, seed: u64) -> Result<RateModel> {
    if config.n_contents == 0 {
        return Err(Error::EmptyInput("model needs at least one content"));
    }
    if let ModelKind::Static(v) = &config.kind {
        if v.len() != config.n_contents {
            return Err(Error::DimensionMismatch {
                expected: config.n_contents,
                got: v.len(),
            });
        }
        return Ok(RateModel::Static(v.clone()));
    }
    if config.a_min > config.a_max || config.a_min <= 0.0 {
        return Err(Error::InvalidRange(format!(
            "amplitude range [{}, {}]",
            config.a_min, config.a_max
        )));
    }
    if config.t0_max < 0.0 {
        return Err(Error::InvalidRange(format!("t0_max {}", config.t0_max)));
    }
    match config.kind {
        ModelKind::ShotNoise { decay } if decay <= 0.0 => {
            return Err(Error::InvalidRange(format!("decay {decay}")));
        }
        ModelKind::GaussianPulse { sigma } if sigma <= 0.0 => {
            return Err(Error::InvalidRange(format!("sigma {sigma}")));
        }
        _ => {}
    }

    let mut rng = stream_rng(seed, 0);
    let mut onsets = Vec::with_capacity(config.n_contents);
    let mut amplitudes = Vec::with_capacity(config.n_contents);
    for _ in 0..config.n_contents {
        let t0 = if config.t0_max == 0.0 {
            0.0
        } else {
            rng.random::<f64>() * config.t0_max
        };
        let a = config.a_min + rng.random::<f64>() * (config.a_max - config.a_min);
        onsets.push(t0);
        amplitudes.push(a);
    }

    let model = match config.kind {
        ModelKind::ShotNoise { decay } => RateModel::ShotNoise {
            contents: onsets
                .into_iter()
                .zip(amplitudes)
                .map(|(onset, amplitude)| ShotNoiseContent {
                    amplitude,
                    decay,
                    onset,
                })
                .collect(),
        },
        ModelKind::GaussianPulse { sigma } => RateModel::GaussianPulse {
            contents: onsets
                .into_iter()
                .zip(amplitudes)
                .map(|(peak, amplitude)| GaussianContent { amplitude, peak })
                .collect(),
            sigma,
        },
        ModelKind::Static(_) => unreachable!("handled above"),
    };
    Ok(model)
}

/// A time-sorted sequence of content requests.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestTrace {
    requests: Vec<(f64, ContentId)>,
}

impl RequestTrace {
    pub fn from_requests(requests: Vec<(f64, ContentId)>) -> Result<Self> {
        if requests.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::InvalidParameter(
                "request times must be non-decreasing".into(),
            ));
        }
        Ok(Self { requests })
    }

    pub fn requests(&self) -> &[(f64, ContentId)] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.requests.iter().map(|&(t, _)| t)
    }

    /// Writes the `time,content` CSV format, times with six decimal digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,content")?;
        for (t, c) in &self.requests {
            writeln!(w, "{t:.6},{c}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut requests = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line =
                line.map_err(|e| Error::InvalidParameter(format!("trace read: {e}")))?;
            let line = line.trim();
            if i == 0 {
                if line != "time,content" {
                    return Err(Error::InvalidParameter(format!(
                        "expected header 'time,content', got '{line}'"
                    )));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (t, c) = line.split_once(',').ok_or_else(|| {
                Error::InvalidParameter(format!("malformed trace line '{line}'"))
            })?;
            let t: f64 = t
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad time '{t}'")))?;
            let c: usize = c
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad content id '{c}'")))?;
            requests.push((t, ContentId(c)));
        }
        Self::from_requests(requests)
    }
}

/// Standard exponential draw via inversion.
fn exp1<R: Rng>(rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Samples a request trace on `[0, horizon]` from independent per-content
/// inhomogeneous Poisson processes.
///
/// Shot noise uses the closed-form inverse of the integrated rate; Gaussian and
/// piecewise models use thinning against a per-content rate majorant. Each
/// content draws from its own substream, so the result does not depend on
/// sampling order.
pub fn sample_trace(model: &RateModel, horizon: f64, seed: u64) -> Result<RequestTrace> {
    if horizon <= 0.0 {
        return Err(Error::InvalidRange(format!("horizon {horizon}")));
    }
    model.validate()?;
    let n = model.n_contents();
    let mut requests: Vec<(f64, ContentId)> = Vec::new();
    for l in 0..n {
        let content = ContentId(l);
        let mut rng = stream_rng(seed, l as u64);
        match model {
            RateModel::ShotNoise { contents } => {
                let c = &contents[l];
                if c.onset >= horizon {
                    continue;
                }
                // Integrated rate from onset: Lambda(t) = A (1 - exp(-b (t - t0))).
                let cap = c.amplitude * (1.0 - (-c.decay * (horizon - c.onset)).exp());
                let mut s = exp1(&mut rng);
                while s < cap {
                    let t = c.onset - (1.0 - s / c.amplitude).ln() / c.decay;
                    requests.push((t, content));
                    s += exp1(&mut rng);
                }
            }
            RateModel::Static(v) => {
                let rate = v.get(content);
                if rate <= 0.0 {
                    continue;
                }
                let mut t = exp1(&mut rng) / rate;
                while t < horizon {
                    requests.push((t, content));
                    t += exp1(&mut rng) / rate;
                }
            }
            RateModel::GaussianPulse { contents, sigma } => {
                let c = &contents[l];
                let majorant = c.amplitude / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
                thin_content(model, content, majorant, horizon, &mut rng, &mut requests);
            }
            RateModel::Piecewise(points) => {
                let majorant = points
                    .iter()
                    .map(|(_, v)| v.get(content))
                    .fold(0.0, f64::max);
                thin_content(model, content, majorant, horizon, &mut rng, &mut requests);
            }
        }
    }
    requests.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(RequestTrace { requests })
}

fn thin_content<R: Rng>(
    model: &RateModel,
    content: ContentId,
    majorant: f64,
    horizon: f64,
    rng: &mut R,
    requests: &mut Vec<(f64, ContentId)>,
) {
    if majorant <= 0.0 {
        return;
    }
    let mut t = exp1(rng) / majorant;
    while t < horizon {
        if rng.random::<f64>() * majorant < model.rate(content, t) {
            requests.push((t, content));
        }
        t += exp1(rng) / majorant;
    }
}

/// Popularity prediction policy for the replacement schemes.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    /// Exact popularity at the next request's timestamp.
    Oracle,
    /// Oracle refreshed only at request indices that are multiples of `k`.
    StaleEveryK(usize),
    /// A fixed vector, never refreshed.
    Constant(PopularityVector),
}

/// Predicts the popularity of the `(n+1)`th request from the trace timestamps.
pub fn predict(
    predictor: &Predictor,
    model: &RateModel,
    request_times: &[f64],
    n: usize,
) -> Result<PopularityVector> {
    match predictor {
        Predictor::Constant(v) => Ok(v.clone()),
        Predictor::Oracle => {
            let t = *request_times.get(n + 1).ok_or(Error::OutOfBounds {
                index: n + 1,
                len: request_times.len(),
            })?;
            popularity_at(model, t)
        }
        Predictor::StaleEveryK(k) => {
            if *k == 0 {
                return Err(Error::InvalidParameter(
                    "StaleEveryK period must be at least 1".into(),
                ));
            }
            if n + 1 >= request_times.len() {
                return Err(Error::OutOfBounds {
                    index: n + 1,
                    len: request_times.len(),
                });
            }
            let j = ((n + 1) / k) * k;
            popularity_at(model, request_times[j])
        }
    }
}
