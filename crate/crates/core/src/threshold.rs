//! Confusion bookkeeping and the sensitivity-targeting threshold.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome of one gate decision once the teacher's view is known.
///
/// Positive = the gate queried, "true" = human input was necessary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flag {
    TP,
    TN,
    FP,
    FN,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::TP => "TP",
            Flag::TN => "TN",
            Flag::FP => "FP",
            Flag::FN => "FN",
        }
    }

    pub fn queried(self) -> bool {
        matches!(self, Flag::TP | Flag::FP)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl FlagCounts {
    pub fn add(&mut self, flag: Flag) {
        match flag {
            Flag::TP => self.tp += 1,
            Flag::TN => self.tn += 1,
            Flag::FP => self.fp += 1,
            Flag::FN => self.fn_ += 1,
        }
    }

    fn remove(&mut self, flag: Flag) {
        match flag {
            Flag::TP => self.tp -= 1,
            Flag::TN => self.tn -= 1,
            Flag::FP => self.fp -= 1,
            Flag::FN => self.fn_ -= 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `tp / (tp + fn)`, or `None` with no positives-needed evidence.
    pub fn sensitivity(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `tn / (tn + fp)`, or `None` when undefined.
    pub fn specificity(&self) -> Option<f64> {
        let d = self.tn + self.fp;
        (d > 0).then(|| self.tn as f64 / d as f64)
    }
}

/// Flag history with counts over the most recent `window` decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionLedger {
    window: usize,
    recent: VecDeque<(u64, Flag)>,
    counts: FlagCounts,
    totals: FlagCounts,
    last_t: Option<u64>,
}

impl ConfusionLedger {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("window length must be positive"));
        }
        Ok(ConfusionLedger {
            window,
            recent: VecDeque::with_capacity(window),
            counts: FlagCounts::default(),
            totals: FlagCounts::default(),
            last_t: None,
        })
    }

    pub fn record(&mut self, t: u64, flag: Flag) -> Result<()> {
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(Error::invalid(format!("flag step {t} is not after previous step {last}")));
            }
        }
        self.last_t = Some(t);
        if self.recent.len() == self.window {
            let (_, old) = self.recent.pop_front().expect("full window");
            self.counts.remove(old);
        }
        self.recent.push_back((t, flag));
        self.counts.add(flag);
        self.totals.add(flag);
        Ok(())
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Counts inside the window.
    pub fn counts(&self) -> FlagCounts {
        self.counts
    }

    /// Counts over the whole history.
    pub fn totals(&self) -> FlagCounts {
        self.totals
    }

    pub fn last_step(&self) -> Option<u64> {
        self.last_t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Initial threshold.
    pub p0: f64,
    /// Desired sensitivity.
    pub s_des: f64,
    /// Window length in decisions.
    pub window: usize,
    /// Adaptation rate.
    pub rate: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Use `p0 - rate * (s_des - s)` instead of the integrating update.
    pub paper_literal_update: bool,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            p0: 0.5,
            s_des: 0.9,
            window: 50,
            rate: 0.005,
            p_min: 0.05,
            p_max: 0.95,
            paper_literal_update: false,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.p_min
            && self.p_min <= self.p0
            && self.p0 <= self.p_max
            && self.p_max < 1.0
            && self.s_des > 0.0
            && self.s_des <= 1.0
            && self.rate > 0.0
            && self.window > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "threshold config needs 0 < p_min <= p0 <= p_max < 1, 0 < s_des <= 1, rate > 0, window > 0; got {self:?}"
            )))
        }
    }
}

/// Sensitivity over the ledger window; `s_des` when no evidence exists.
pub fn estimate_sensitivity(ledger: &ConfusionLedger, s_des: f64) -> f64 {
    ledger.counts().sensitivity().unwrap_or(s_des)
}

/// One controller step given the current sensitivity estimate.
pub fn update_threshold<T: Scalar>(p_thr: T, sensitivity: T, cfg: &ThresholdConfig) -> T {
    let error = T::of(cfg.s_des) - sensitivity;
    let next = if cfg.paper_literal_update {
        T::of(cfg.p0) - T::of(cfg.rate) * error
    } else {
        p_thr + T::of(cfg.rate) * error
    };
    next.max(T::of(cfg.p_min)).min(T::of(cfg.p_max))
}

/// Threshold plus ledger for one action role.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdController<T> {
    cfg: ThresholdConfig,
    threshold: T,
    ledger: ConfusionLedger,
}

impl<T: Scalar> ThresholdController<T> {
    pub fn new(cfg: ThresholdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ThresholdController { threshold: T::of(cfg.p0), ledger: ConfusionLedger::new(cfg.window)?, cfg })
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn ledger(&self) -> &ConfusionLedger {
        &self.ledger
    }

    pub fn config(&self) -> &ThresholdConfig {
        &self.cfg
    }

    pub fn sensitivity(&self) -> f64 {
        estimate_sensitivity(&self.ledger, self.cfg.s_des)
    }

    pub fn specificity(&self) -> Option<f64> {
        self.ledger.counts().specificity()
    }

    /// Records the decision's flag and adapts the threshold.
    pub fn observe(&mut self, t: u64, flag: Flag) -> Result<T> {
        self.ledger.record(t, flag)?;
        self.threshold = update_threshold(self.threshold, T::of(self.sensitivity()), &self.cfg);
        Ok(self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_eviction() {
        let mut l = ConfusionLedger::new(2).unwrap();
        l.record(0, Flag::TP).unwrap();
        assert_eq!(l.counts().tp, 1);
        l.record(1, Flag::FN).unwrap();
        l.record(2, Flag::TN).unwrap();
        let c = l.counts();
        assert_eq!((c.tp, c.fn_, c.tn, c.fp), (0, 1, 1, 0));
        assert_eq!(l.totals().tp, 1);
    }

    #[test]
    fn alternating_fifty() {
        let mut l = ConfusionLedger::new(50).unwrap();
        for t in 0..50 {
            l.record(t, if t % 2 == 0 { Flag::TP } else { Flag::FN }).unwrap();
        }
        assert_eq!((l.counts().tp, l.counts().fn_), (25, 25));
    }

    #[test]
    fn non_monotonic_step_rejected() {
        let mut l = ConfusionLedger::new(5).unwrap();
        l.record(3, Flag::TN).unwrap();
        assert!(l.record(3, Flag::TN).is_err());
        assert!(l.record(1, Flag::TN).is_err());
        assert!(ConfusionLedger::new(0).is_err());
    }

    #[test]
    fn sensitivity_estimates() {
        let mut l = ConfusionLedger::new(50).unwrap();
        assert_eq!(estimate_sensitivity(&l, 0.9), 0.9);
        for t in 0..5 {
            l.record(t, Flag::FN).unwrap();
        }
        assert_eq!(estimate_sensitivity(&l, 0.9), 0.0);
        let mut l = ConfusionLedger::new(50).unwrap();
        for t in 0..10 {
            l.record(t, if t == 0 { Flag::FN } else { Flag::TP }).unwrap();
        }
        assert_eq!(estimate_sensitivity(&l, 0.9), 0.9);
    }

    #[test]
    fn update_rule_examples() {
        let cfg = ThresholdConfig::default();
        assert_eq!(update_threshold(0.5f64, 0.9, &cfg), 0.5);
        assert!((update_threshold(0.5f64, 0.8, &cfg) - 0.5005).abs() < 1e-12);
        assert!((update_threshold(0.5f64, 1.0, &cfg) - 0.4995).abs() < 1e-12);
    }

    #[test]
    fn literal_update_anchors_to_p0() {
        let cfg = ThresholdConfig { paper_literal_update: true, ..Default::default() };
        assert!((update_threshold(0.7f64, 0.8, &cfg) - 0.4995).abs() < 1e-12);
    }

    #[test]
    fn clamps() {
        let cfg = ThresholdConfig { rate: 10.0, ..Default::default() };
        assert_eq!(update_threshold(0.5f64, 0.0, &cfg), 0.95);
        assert_eq!(update_threshold(0.5f64, 1.0, &cfg), 0.05);
    }

    #[test]
    fn config_validation() {
        assert!(ThresholdConfig::default().validate().is_ok());
        let bad = ThresholdConfig { p0: 0.99, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(ThresholdController::<f64>::new(bad).is_err());
    }

    #[test]
    fn controller_is_replayable() {
        let flags = [Flag::FN, Flag::TP, Flag::TN, Flag::FP, Flag::FN, Flag::TP];
        let run = || {
            let mut c = ThresholdController::<f64>::new(ThresholdConfig::default()).unwrap();
            for (t, &f) in flags.iter().enumerate() {
                c.observe(t as u64, f).unwrap();
            }
            c
        };
        assert_eq!(run(), run());
        // FN first: sensitivity 0 -> threshold rises.
        let mut c = ThresholdController::<f64>::new(ThresholdConfig::default()).unwrap();
        assert!(c.observe(0, Flag::FN).unwrap() > 0.5);
    }
}
