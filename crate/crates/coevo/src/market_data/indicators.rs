//! Technical-indicator registry.
//!
//! The default registry pins 24 indicator families evaluated over multiple
//! windows for a total of 68 features: 20 families at tau in {5, 10, 20}
//! and 4 families at tau in {10, 20}.
//!
//! Every indicator is a pure function of a fixed-length window of bars
//! ending at day t, so truncating the series to the registry's maximum
//! lookback leaves day-t features unchanged by construction.

use super::OhlcvBar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorFamily {
    Sma,
    Ema,
    Wma,
    Momentum,
    Roc,
    Disparity,
    Rsi,
    WilliamsR,
    Cci,
    Atr,
    StochK,
    StochD,
    BollPctB,
    BollBandwidth,
    ObvRoc,
    VolumeRatio,
    CloseStd,
    Mfi,
    Trix,
    Psy,
    HighRatio,
    LowRatio,
    VolumeMomentum,
    AdOsc,
}

impl IndicatorFamily {
    /// All families, in registry order.
    pub const ALL: [IndicatorFamily; 24] = [
        IndicatorFamily::Sma,
        IndicatorFamily::Ema,
        IndicatorFamily::Wma,
        IndicatorFamily::Momentum,
        IndicatorFamily::Roc,
        IndicatorFamily::Disparity,
        IndicatorFamily::Rsi,
        IndicatorFamily::WilliamsR,
        IndicatorFamily::Cci,
        IndicatorFamily::Atr,
        IndicatorFamily::StochK,
        IndicatorFamily::StochD,
        IndicatorFamily::BollPctB,
        IndicatorFamily::BollBandwidth,
        IndicatorFamily::ObvRoc,
        IndicatorFamily::VolumeRatio,
        IndicatorFamily::CloseStd,
        IndicatorFamily::Mfi,
        IndicatorFamily::Trix,
        IndicatorFamily::Psy,
        IndicatorFamily::HighRatio,
        IndicatorFamily::LowRatio,
        IndicatorFamily::VolumeMomentum,
        IndicatorFamily::AdOsc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IndicatorFamily::Sma => "sma",
            IndicatorFamily::Ema => "ema",
            IndicatorFamily::Wma => "wma",
            IndicatorFamily::Momentum => "momentum",
            IndicatorFamily::Roc => "roc",
            IndicatorFamily::Disparity => "disparity",
            IndicatorFamily::Rsi => "rsi",
            IndicatorFamily::WilliamsR => "williams_r",
            IndicatorFamily::Cci => "cci",
            IndicatorFamily::Atr => "atr",
            IndicatorFamily::StochK => "stoch_k",
            IndicatorFamily::StochD => "stoch_d",
            IndicatorFamily::BollPctB => "boll_pct_b",
            IndicatorFamily::BollBandwidth => "boll_bw",
            IndicatorFamily::ObvRoc => "obv_roc",
            IndicatorFamily::VolumeRatio => "vol_ratio",
            IndicatorFamily::CloseStd => "close_std",
            IndicatorFamily::Mfi => "mfi",
            IndicatorFamily::Trix => "trix",
            IndicatorFamily::Psy => "psy",
            IndicatorFamily::HighRatio => "high_ratio",
            IndicatorFamily::LowRatio => "low_ratio",
            IndicatorFamily::VolumeMomentum => "vol_momentum",
            IndicatorFamily::AdOsc => "ad_osc",
        }
    }

    /// Whether the family is part of the three-window set (tau 5/10/20) or
    /// the two-window set (tau 10/20).
    fn three_window(self) -> bool {
        !matches!(
            self,
            IndicatorFamily::HighRatio
                | IndicatorFamily::LowRatio
                | IndicatorFamily::VolumeMomentum
                | IndicatorFamily::AdOsc
        )
    }

    /// Bars required in the window ending at day t, for period tau.
    pub fn lookback(self, period: usize) -> usize {
        match self {
            IndicatorFamily::Momentum
            | IndicatorFamily::Roc
            | IndicatorFamily::Rsi
            | IndicatorFamily::Psy
            | IndicatorFamily::Mfi
            | IndicatorFamily::Atr
            | IndicatorFamily::ObvRoc
            | IndicatorFamily::VolumeMomentum => period + 1,
            IndicatorFamily::StochD => period + 2,
            IndicatorFamily::Trix => 3 * period,
            _ => period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorSpec {
    pub name: String,
    pub family: IndicatorFamily,
    pub period: usize,
}

impl IndicatorSpec {
    pub fn new(family: IndicatorFamily, period: usize) -> Self {
        IndicatorSpec {
            name: format!("{}_{}", family.label(), period),
            family,
            period,
        }
    }

    pub fn lookback(&self) -> usize {
        self.family.lookback(self.period)
    }
}

/// Ordered set of indicator specs defining the feature columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorRegistry {
    specs: Vec<IndicatorSpec>,
}

impl IndicatorRegistry {
    /// The pinned default registry: 24 families, 68 features.
    pub fn standard() -> Self {
        let mut specs = Vec::with_capacity(68);
        for family in IndicatorFamily::ALL {
            let periods: &[usize] = if family.three_window() {
                &[5, 10, 20]
            } else {
                &[10, 20]
            };
            for &p in periods {
                specs.push(IndicatorSpec::new(family, p));
            }
        }
        IndicatorRegistry { specs }
    }

    pub fn from_specs(specs: Vec<IndicatorSpec>) -> Self {
        IndicatorRegistry { specs }
    }

    pub fn specs(&self) -> &[IndicatorSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn family_count(&self) -> usize {
        let mut fams: Vec<IndicatorFamily> = self.specs.iter().map(|s| s.family).collect();
        fams.sort_by_key(|f| *f as usize);
        fams.dedup();
        fams.len()
    }

    pub fn max_lookback(&self) -> usize {
        self.specs.iter().map(|s| s.lookback()).max().unwrap_or(1)
    }
}

fn closes(w: &[OhlcvBar]) -> impl Iterator<Item = f64> + '_ {
    w.iter().map(|b| b.close)
}

fn mean<I: Iterator<Item = f64>>(it: I) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn pop_std(values: &[f64]) -> f64 {
    let m = mean(values.iter().copied());
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

fn sma(w: &[OhlcvBar]) -> f64 {
    mean(closes(w))
}

fn ema_seq(values: &[f64], period: usize) -> Vec<f64> {
    let alpha = 2.0 / (period as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut e = values[0];
    for &v in values {
        e = alpha * v + (1.0 - alpha) * e;
        out.push(e);
    }
    out
}

fn rsi_from_deltas(gains: f64, losses: f64) -> f64 {
    // flat window -> 50, no losses -> 100, no gains -> 0
    if gains == 0.0 && losses == 0.0 {
        50.0
    } else if losses == 0.0 {
        100.0
    } else if gains == 0.0 {
        0.0
    } else {
        100.0 * gains / (gains + losses)
    }
}

fn stoch_k(w: &[OhlcvBar]) -> f64 {
    let hh = w.iter().map(|b| b.high).fold(f64::MIN, f64::max);
    let ll = w.iter().map(|b| b.low).fold(f64::MAX, f64::min);
    let c = w[w.len() - 1].close;
    if hh == ll {
        50.0
    } else {
        100.0 * (c - ll) / (hh - ll)
    }
}

fn true_range(prev_close: f64, bar: &OhlcvBar) -> f64 {
    (bar.high - bar.low)
        .max((bar.high - prev_close).abs())
        .max((bar.low - prev_close).abs())
}

/// Evaluate one indicator on its window. `window.len()` must equal the
/// spec's lookback; the last bar is day t.
pub fn compute_indicator(spec: &IndicatorSpec, window: &[OhlcvBar]) -> f64 {
    debug_assert_eq!(window.len(), spec.lookback());
    let p = spec.period;
    let t = window.len() - 1;
    let c = window[t].close;
    match spec.family {
        IndicatorFamily::Sma => sma(window),
        IndicatorFamily::Ema => {
            let vals: Vec<f64> = closes(window).collect();
            *ema_seq(&vals, p).last().unwrap()
        }
        IndicatorFamily::Wma => {
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, v) in closes(window).enumerate() {
                let wgt = (i + 1) as f64;
                num += wgt * v;
                den += wgt;
            }
            num / den
        }
        IndicatorFamily::Momentum => c - window[0].close,
        IndicatorFamily::Roc => 100.0 * (c - window[0].close) / window[0].close,
        IndicatorFamily::Disparity => c / sma(window),
        IndicatorFamily::Rsi => {
            let mut gains = 0.0;
            let mut losses = 0.0;
            for pair in window.windows(2) {
                let d = pair[1].close - pair[0].close;
                if d > 0.0 {
                    gains += d;
                } else {
                    losses -= d;
                }
            }
            rsi_from_deltas(gains, losses)
        }
        IndicatorFamily::WilliamsR => {
            let hh = window.iter().map(|b| b.high).fold(f64::MIN, f64::max);
            let ll = window.iter().map(|b| b.low).fold(f64::MAX, f64::min);
            if hh == ll {
                -50.0
            } else {
                -100.0 * (hh - c) / (hh - ll)
            }
        }
        IndicatorFamily::Cci => {
            let tp: Vec<f64> = window.iter().map(|b| (b.high + b.low + b.close) / 3.0).collect();
            let m = mean(tp.iter().copied());
            let md = mean(tp.iter().map(|v| (v - m).abs()));
            if md == 0.0 {
                0.0
            } else {
                (tp[tp.len() - 1] - m) / (0.015 * md)
            }
        }
        IndicatorFamily::Atr => {
            let trs: Vec<f64> = window
                .windows(2)
                .map(|pair| true_range(pair[0].close, &pair[1]))
                .collect();
            mean(trs.iter().copied())
        }
        IndicatorFamily::StochK => stoch_k(window),
        IndicatorFamily::StochD => {
            // 3-day average of %K over tau-windows ending at t, t-1, t-2
            let n = window.len();
            mean((0..3).map(|lag| stoch_k(&window[n - p - lag..n - lag])))
        }
        IndicatorFamily::BollPctB => {
            let vals: Vec<f64> = closes(window).collect();
            let m = mean(vals.iter().copied());
            let s = pop_std(&vals);
            if s == 0.0 {
                0.5
            } else {
                (c - (m - 2.0 * s)) / (4.0 * s)
            }
        }
        IndicatorFamily::BollBandwidth => {
            let vals: Vec<f64> = closes(window).collect();
            let s = pop_std(&vals);
            4.0 * s / mean(vals.iter().copied())
        }
        IndicatorFamily::ObvRoc => {
            // signed-volume balance over the window, normalized to [-1, 1]
            let mut signed = 0.0;
            let mut total = 0.0;
            for pair in window.windows(2) {
                let d = pair[1].close - pair[0].close;
                signed += d.signum() * pair[1].volume;
                total += pair[1].volume;
            }
            if total == 0.0 {
                0.0
            } else {
                signed / total
            }
        }
        IndicatorFamily::VolumeRatio => {
            let m = mean(window.iter().map(|b| b.volume));
            if m == 0.0 {
                1.0
            } else {
                window[t].volume / m
            }
        }
        IndicatorFamily::CloseStd => {
            let vals: Vec<f64> = closes(window).collect();
            pop_std(&vals)
        }
        IndicatorFamily::Mfi => {
            let tp: Vec<f64> = window.iter().map(|b| (b.high + b.low + b.close) / 3.0).collect();
            let mut pos = 0.0;
            let mut neg = 0.0;
            for i in 1..window.len() {
                let mf = tp[i] * window[i].volume;
                if tp[i] > tp[i - 1] {
                    pos += mf;
                } else if tp[i] < tp[i - 1] {
                    neg += mf;
                }
            }
            rsi_from_deltas(pos, neg)
        }
        IndicatorFamily::Trix => {
            let vals: Vec<f64> = closes(window).collect();
            let e3 = ema_seq(&ema_seq(&ema_seq(&vals, p), p), p);
            let prev = e3[e3.len() - 2];
            if prev == 0.0 {
                0.0
            } else {
                100.0 * (e3[e3.len() - 1] - prev) / prev.abs()
            }
        }
        IndicatorFamily::Psy => {
            let ups = window
                .windows(2)
                .filter(|pair| pair[1].close > pair[0].close)
                .count();
            100.0 * ups as f64 / p as f64
        }
        IndicatorFamily::HighRatio => c / window.iter().map(|b| b.high).fold(f64::MIN, f64::max),
        IndicatorFamily::LowRatio => c / window.iter().map(|b| b.low).fold(f64::MAX, f64::min),
        IndicatorFamily::VolumeMomentum => {
            (window[t].volume - window[0].volume) / window[0].volume.max(1.0)
        }
        IndicatorFamily::AdOsc => {
            // volume-weighted close-location value over the window
            let mut num = 0.0;
            let mut den = 0.0;
            for b in window {
                let clv = if b.high == b.low {
                    0.0
                } else {
                    ((b.close - b.low) - (b.high - b.close)) / (b.high - b.low)
                };
                num += clv * b.volume;
                den += b.volume;
            }
            if den == 0.0 {
                0.0
            } else {
                num / den
            }
        }
    }
}
