//! Order-book events: parsing, binned coefficient fits and price simulation.
//!
//! Relative prices are measured in dollars from the touch, so the unit
//! interval of the model is a one-dollar window on each side of the book.

use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryFunctional;
use crate::coefficients::{Coefficient, ModelCoefficients};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::spde::{run_seeded, CoupledState, RunOptions, SpdeConfig};

/// LOBSTER prices are integers in units of 1e-4 dollars.
pub const LOBSTER_TICKS_PER_DOLLAR: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Bid => 0,
            Side::Ask => 1,
        }
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bid" | "b" | "buy" => Ok(Side::Bid),
            "ask" | "a" | "sell" => Ok(Side::Ask),
            other => Err(Error::Format(format!("unknown side `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Limit,
    Cancel,
    Market,
}

impl EventType {
    /// Sign of the event's contribution to resting volume.
    pub fn sign(self) -> f64 {
        match self {
            EventType::Limit => 1.0,
            EventType::Cancel | EventType::Market => -1.0,
        }
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "limit" => Ok(EventType::Limit),
            "cancel" => Ok(EventType::Cancel),
            "market" => Ok(EventType::Market),
            other => Err(Error::Format(format!("unknown event type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobEvent {
    pub time: f64,
    pub side: Side,
    pub event_type: EventType,
    pub relative_price: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LobEventStream {
    pub events: Vec<LobEvent>,
    pub horizon: (f64, f64),
    /// Rows that failed to parse or validate.
    pub malformed: usize,
    /// Valid rows dropped because the relative price lies outside `[0, 1]`.
    pub out_of_window: usize,
    /// LOBSTER rows with event types that carry no volume change (cross trades, halts).
    pub skipped: usize,
}

impl LobEventStream {
    pub fn duration(&self) -> f64 {
        self.horizon.1 - self.horizon.0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "side", "event_type", "relative_price", "size"])?;
        for e in &self.events {
            let side = match e.side {
                Side::Bid => "bid",
                Side::Ask => "ask",
            };
            let kind = match e.event_type {
                EventType::Limit => "limit",
                EventType::Cancel => "cancel",
                EventType::Market => "market",
            };
            w.write_record(&[e.time.to_string(), side.into(), kind.into(), e.relative_price.to_string(), e.size.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    Normalized,
    LobsterMessage,
}

/// Best bid/ask in dollars over time, looked up as-of (last entry at or before `t`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TouchPrices {
    pub times: Vec<f64>,
    pub best_bid: Vec<f64>,
    pub best_ask: Vec<f64>,
}

impl TouchPrices {
    pub fn new(times: Vec<f64>, best_bid: Vec<f64>, best_ask: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != best_bid.len() || times.len() != best_ask.len() {
            return Err(Error::Config("touch series needs matching non-empty columns".into()));
        }
        if let Some(k) = times.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NonMonotoneTime { row: k + 1, prev: times[k], next: times[k + 1] });
        }
        Ok(Self { times, best_bid, best_ask })
    }

    /// CSV with header `time,best_bid,best_ask`, prices in dollars.
    pub fn parse_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
        let (mut t, mut b, mut a) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Format(format!("touch row {}: bad column {k}", row + 1)))
            };
            t.push(num(0)?);
            b.push(num(1)?);
            a.push(num(2)?);
        }
        Self::new(t, b, a)
    }

    /// Touch prices in force at time `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let k = self.times.partition_point(|&s| s <= t).max(1) - 1;
        (self.best_bid[k], self.best_ask[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParseOptions {
    /// Largest tolerated number of malformed rows.
    pub max_malformed: usize,
    /// Explicit observation window; defaults to the span of the event times.
    pub horizon: Option<(f64, f64)>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { max_malformed: 10, horizon: None }
    }
}

enum RowOutcome {
    Event(LobEvent),
    Skip,
    Malformed,
}

fn parse_normalized(rec: &csv::StringRecord) -> RowOutcome {
    if rec.len() != 5 {
        return RowOutcome::Malformed;
    }
    let parsed = (|| -> Option<LobEvent> {
        Some(LobEvent {
            time: rec[0].parse().ok()?,
            side: rec[1].parse().ok()?,
            event_type: rec[2].parse().ok()?,
            relative_price: rec[3].parse().ok()?,
            size: rec[4].parse().ok()?,
        })
    })();
    match parsed {
        Some(e) if e.time.is_finite() && e.relative_price >= 0.0 && e.relative_price.is_finite() && e.size > 0.0 => {
            RowOutcome::Event(e)
        }
        _ => RowOutcome::Malformed,
    }
}

fn parse_lobster(rec: &csv::StringRecord, touch: &TouchPrices) -> RowOutcome {
    if rec.len() < 6 {
        return RowOutcome::Malformed;
    }
    let fields = (|| -> Option<(f64, i64, f64, f64, i64)> {
        Some((rec[0].parse().ok()?, rec[1].parse().ok()?, rec[3].parse().ok()?, rec[4].parse().ok()?, rec[5].parse().ok()?))
    })();
    let Some((time, code, size, price, direction)) = fields else {
        return RowOutcome::Malformed;
    };
    let event_type = match code {
        1 => EventType::Limit,
        2 | 3 => EventType::Cancel,
        4 | 5 => EventType::Market,
        6 | 7 => return RowOutcome::Skip,
        _ => return RowOutcome::Malformed,
    };
    // direction is the side of the resting limit order, also for executions
    let side = match direction {
        1 => Side::Bid,
        -1 => Side::Ask,
        _ => return RowOutcome::Malformed,
    };
    if !time.is_finite() || !(size > 0.0) {
        return RowOutcome::Malformed;
    }
    let price = price / LOBSTER_TICKS_PER_DOLLAR;
    let (bid, ask) = touch.at(time);
    let rel = match side {
        Side::Bid => bid - price,
        Side::Ask => price - ask,
    };
    // an order improving the touch sits at the (new) touch
    RowOutcome::Event(LobEvent { time, side, event_type, relative_price: rel.max(0.0), size })
}

/// Parses an event file. LOBSTER message files need the touch-price series;
/// the normalized format ignores it.
pub fn parse_events<R: Read>(
    input: R,
    format: InputFormat,
    touch: Option<&TouchPrices>,
    opts: ParseOptions,
) -> Result<LobEventStream> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(format == InputFormat::Normalized)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    if format == InputFormat::Normalized {
        let header = rdr.headers()?.clone();
        let expected = ["time", "side", "event_type", "relative_price", "size"];
        if !header.is_empty() && header.iter().ne(expected.iter().copied()) {
            return Err(Error::Format(format!("expected header `{}`", expected.join(","))));
        }
    }
    let touch = match format {
        InputFormat::LobsterMessage => {
            Some(touch.ok_or_else(|| Error::Config("LOBSTER messages need a touch-price series".into()))?)
        }
        InputFormat::Normalized => None,
    };

    let mut out = LobEventStream::default();
    let mut last: Option<f64> = None;
    for (row, rec) in rdr.records().enumerate() {
        let outcome = match rec {
            Ok(rec) => match touch {
                Some(tp) => parse_lobster(&rec, tp),
                None => parse_normalized(&rec),
            },
            Err(_) => RowOutcome::Malformed,
        };
        match outcome {
            RowOutcome::Malformed => {
                out.malformed += 1;
                if out.malformed > opts.max_malformed {
                    return Err(Error::Format(format!(
                        "{} malformed rows (threshold {}), last at row {}",
                        out.malformed,
                        opts.max_malformed,
                        row + 1
                    )));
                }
            }
            RowOutcome::Skip => out.skipped += 1,
            RowOutcome::Event(e) => {
                if let Some(prev) = last {
                    if e.time < prev {
                        return Err(Error::NonMonotoneTime { row: row + 1, prev, next: e.time });
                    }
                }
                last = Some(e.time);
                let in_horizon = opts.horizon.map_or(true, |(a, b)| e.time >= a && e.time <= b);
                if e.relative_price > 1.0 || !in_horizon {
                    out.out_of_window += 1;
                } else {
                    out.events.push(e);
                }
            }
        }
    }
    out.horizon = opts.horizon.unwrap_or_else(|| match (out.events.first(), out.events.last()) {
        (Some(a), Some(b)) => (a.time, b.time),
        _ => (0.0, 0.0),
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_bins: usize,
    /// Treat both sides as one population.
    pub pool_sides: bool,
    /// Aggregation interval for the volatility estimate, in seconds.
    pub interval: f64,
    /// Bins with fewer events are flagged as insufficient.
    pub min_events: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { n_bins: 10, pool_sides: true, interval: 1.0, min_events: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBin {
    pub x_center: f64,
    pub f: f64,
    pub sigma: f64,
    pub count: usize,
    pub insufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub symmetric: bool,
    /// Pooled bins, or the bid side when `symmetric` is false.
    pub bins: Vec<FitBin>,
    /// Ask-side bins of an unpooled fit.
    pub ask_bins: Option<Vec<FitBin>>,
}

/// Per-side, per-bin estimates before pooling.
struct SideFit {
    f: Vec<f64>,
    var: Vec<f64>,
    count: Vec<usize>,
}

fn fit_side(events: &[&LobEvent], start: f64, duration: f64, opts: &FitOptions) -> SideFit {
    let nb = opts.n_bins;
    let width = 1.0 / nb as f64;
    let n_int = (duration / opts.interval).ceil().max(1.0) as usize;
    let mut net = vec![0.0; nb * n_int];
    let mut count = vec![0usize; nb];
    for e in events {
        let b = ((e.relative_price / width) as usize).min(nb - 1);
        let k = (((e.time - start) / opts.interval) as usize).min(n_int - 1);
        net[b * n_int + k] += e.event_type.sign() * e.size;
        count[b] += 1;
    }
    let norm = duration * width;
    let mut f = vec![0.0; nb];
    let mut var = vec![0.0; nb];
    for b in 0..nb {
        let row = &net[b * n_int..(b + 1) * n_int];
        f[b] = row.iter().sum::<f64>() / norm;
        var[b] = row
            .iter()
            .enumerate()
            .map(|(k, n)| {
                let len = (duration - k as f64 * opts.interval).min(opts.interval);
                (n - f[b] * width * len).powi(2)
            })
            .sum::<f64>()
            / norm;
    }
    SideFit { f, var, count }
}

fn bins_from(f: &[f64], var: &[f64], count: &[usize], opts: &FitOptions) -> Vec<FitBin> {
    let width = 1.0 / opts.n_bins as f64;
    (0..opts.n_bins)
        .map(|b| {
            let insufficient = count[b] < opts.min_events.max(1);
            FitBin {
                x_center: (b as f64 + 0.5) * width,
                f: if insufficient { 0.0 } else { f[b] },
                sigma: if insufficient { 0.0 } else { var[b].sqrt() },
                count: count[b],
                insufficient,
            }
        })
        .collect()
}

/// Binned net-flow estimator: `f = (limit - cancel - market volume) / (H Δ)`,
/// `sigma^2 = Σ_k (N_k - f Δ τ)^2 / (H Δ)` over aggregation intervals `τ`.
pub fn fit_coefficients(stream: &LobEventStream, opts: FitOptions) -> Result<FitResult> {
    if opts.n_bins < 4 {
        return Err(Error::Config(format!("n_bins must be at least 4, got {}", opts.n_bins)));
    }
    if !(opts.interval > 0.0) {
        return Err(Error::Config("aggregation interval must be positive".into()));
    }
    let duration = stream.duration();
    if !(duration > 0.0) {
        return Err(Error::InsufficientData("event stream has no positive horizon".into()));
    }
    let start = stream.horizon.0;
    let fits: Vec<SideFit> = [Side::Bid, Side::Ask]
        .iter()
        .map(|&s| {
            let events: Vec<&LobEvent> = stream.events.iter().filter(|e| e.side == s).collect();
            fit_side(&events, start, duration, &opts)
        })
        .collect();
    if opts.pool_sides {
        let nb = opts.n_bins;
        let f: Vec<f64> = (0..nb).map(|b| 0.5 * (fits[0].f[b] + fits[1].f[b])).collect();
        let var: Vec<f64> = (0..nb).map(|b| 0.5 * (fits[0].var[b] + fits[1].var[b])).collect();
        let count: Vec<usize> = (0..nb).map(|b| fits[0].count[b] + fits[1].count[b]).collect();
        Ok(FitResult { symmetric: true, bins: bins_from(&f, &var, &count, &opts), ask_bins: None })
    } else {
        Ok(FitResult {
            symmetric: false,
            bins: bins_from(&fits[0].f, &fits[0].var, &fits[0].count, &opts),
            ask_bins: Some(bins_from(&fits[1].f, &fits[1].var, &fits[1].count, &opts)),
        })
    }
}

impl FitResult {
    pub fn side(&self, side: Side) -> &[FitBin] {
        match (side, &self.ask_bins) {
            (Side::Ask, Some(a)) => a,
            _ => &self.bins,
        }
    }

    /// Tabulated drift and volatility, interpolating across flagged bins.
    pub fn coefficients(&self) -> Result<ModelCoefficients> {
        let table = |bins: &[FitBin], pick: fn(&FitBin) -> f64| -> Result<Coefficient> {
            let good: Vec<&FitBin> = bins.iter().filter(|b| !b.insufficient).collect();
            if good.is_empty() {
                return Err(Error::InsufficientData("every bin is flagged".into()));
            }
            Ok(Coefficient::Table { x: good.iter().map(|b| b.x_center).collect(), y: good.iter().map(|b| pick(b)).collect() })
        };
        let bid = self.side(Side::Bid);
        let ask = self.side(Side::Ask);
        Ok(ModelCoefficients {
            f1: table(bid, |b| b.f)?,
            f2: table(ask, |b| b.f)?,
            sigma1: table(bid, |b| b.sigma)?,
            sigma2: table(ask, |b| b.sigma)?,
            ..ModelCoefficients::default()
        })
    }

    /// CSV `x_center,f,sigma,count` (ask bins follow with a `side` column when unpooled).
    /// Bins flagged insufficient are written with `NaN` estimates.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        if self.symmetric {
            w.write_record(["x_center", "f", "sigma", "count"])?;
            for b in &self.bins {
                let (f, sigma) = cells(b);
                w.write_record(&[b.x_center.to_string(), f, sigma, b.count.to_string()])?;
            }
        } else {
            w.write_record(["side", "x_center", "f", "sigma", "count"])?;
            for (name, bins) in [("bid", self.side(Side::Bid)), ("ask", self.side(Side::Ask))] {
                for b in bins {
                    let (f, sigma) = cells(b);
                    w.write_record(&[name.to_string(), b.x_center.to_string(), f, sigma, b.count.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a pooled fit written by [`FitResult::write_csv`]; `NaN` or zero-count rows are flagged.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
        let mut bins = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Format(format!("fit row {}: bad column {k}", row + 1)))
            };
            let count = num(3)? as usize;
            let (f, sigma) = (num(1)?, num(2)?);
            let insufficient = count == 0 || !f.is_finite() || !sigma.is_finite();
            let (f, sigma) = if insufficient { (0.0, 0.0) } else { (f, sigma) };
            bins.push(FitBin { x_center: num(0)?, f, sigma, count, insufficient });
        }
        if bins.is_empty() {
            return Err(Error::InsufficientData("empty fit table".into()));
        }
        Ok(FitResult { symmetric: true, bins, ask_bins: None })
    }
}

fn cells(b: &FitBin) -> (String, String) {
    if b.insufficient {
        ("NaN".into(), "NaN".into())
    } else {
        (b.f.to_string(), b.sigma.to_string())
    }
}

/// Known piecewise-constant coefficients for the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// `(f, sigma)` per bin of width `1 / bins.len()`, shared by both sides.
    pub bins: Vec<(f64, f64)>,
    pub horizon: f64,
    /// Order size in shares.
    pub size: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Limit and cancel Poisson rates per bin: the net flow has mean `f Δ` and
    /// variance `sigma^2 Δ` per unit time.
    pub fn rates(&self) -> Result<Vec<(f64, f64)>> {
        let width = 1.0 / self.bins.len() as f64;
        self.bins
            .iter()
            .map(|&(f, sigma)| {
                let diff = f * width / self.size;
                let sum = sigma * sigma * width / (self.size * self.size);
                if sum < diff.abs() {
                    return Err(Error::Config(format!(
                        "order size {} too large for f = {f}, sigma = {sigma}",
                        self.size
                    )));
                }
                Ok((0.5 * (sum + diff), 0.5 * (sum - diff)))
            })
            .collect()
    }
}

/// Poisson limit/cancel streams on both sides with the requested net-flow law.
pub fn synthetic_stream(spec: &SyntheticSpec) -> Result<LobEventStream> {
    if spec.bins.is_empty() || !(spec.horizon > 0.0) || !(spec.size > 0.0) {
        return Err(Error::Config("synthetic spec needs bins, a positive horizon and size".into()));
    }
    let rates = spec.rates()?;
    let width = 1.0 / spec.bins.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut events = Vec::new();
    for side in [Side::Bid, Side::Ask] {
        for (b, &(limit, cancel)) in rates.iter().enumerate() {
            let total = limit + cancel;
            if total <= 0.0 {
                continue;
            }
            let mut t = 0.0;
            loop {
                let u: f64 = 1.0 - rng.gen::<f64>();
                t += -u.ln() / total;
                if t > spec.horizon {
                    break;
                }
                let event_type = if rng.gen::<f64>() * total < limit { EventType::Limit } else { EventType::Cancel };
                let relative_price = (b as f64 + rng.gen::<f64>()) * width;
                events.push(LobEvent { time: t, side, event_type, relative_price, size: spec.size });
            }
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(LobEventStream { events, horizon: (0.0, spec.horizon), ..LobEventStream::default() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub blown_up: bool,
}

impl PriceSeries {
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "p"])?;
        for (t, p) in self.t.iter().zip(&self.p) {
            w.write_record(&[t.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the relative-frame model with the fitted tables and returns `(t, p(t))`.
pub fn simulate_price(
    fit: &FitResult,
    boundary: &BoundaryFunctional,
    grid: GridSpec,
    seed: u64,
    cfg: SpdeConfig,
    p0: f64,
) -> Result<PriceSeries> {
    if grid.domain.is_half_line() {
        return Err(Error::Config("price simulation runs on the compact grid".into()));
    }
    let coeffs = fit.coefficients()?;
    let traj = run_seeded(CoupledState::zero(&grid, p0), &coeffs, boundary, cfg, grid, seed, RunOptions::default())?;
    Ok(PriceSeries {
        t: traj.records.iter().map(|r| r.t).collect(),
        p: traj.p_series(),
        blown_up: traj.blown_up(),
    })
}
