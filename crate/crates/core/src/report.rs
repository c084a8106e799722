use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        })
    }
}

/// Two-sided ratio bound: extrema of `value / comparator` over a set of
/// points, judged against a cap on `c_high / c_low`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundCheckReport {
    pub name: String,
    pub c_low: f64,
    pub c_high: f64,
    pub cap: f64,
    pub skipped: bool,
    pub verdict: Verdict,
    pub note: String,
}

impl BoundCheckReport {
    pub fn from_ratios(name: impl Into<String>, ratios: impl IntoIterator<Item = f64>, cap: f64) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut any = false;
        let mut bad = false;
        for r in ratios {
            any = true;
            if !r.is_finite() {
                bad = true;
            }
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let ok = any && !bad && lo > 0.0 && lo <= hi && hi.is_finite() && hi / lo <= cap;
        BoundCheckReport {
            name: name.into(),
            c_low: lo,
            c_high: hi,
            cap,
            skipped: false,
            verdict: Verdict::from_bool(ok),
            note: String::new(),
        }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        BoundCheckReport {
            name: name.into(),
            c_low: f64::NAN,
            c_high: f64::NAN,
            cap: f64::NAN,
            skipped: true,
            verdict: Verdict::Skipped,
            note: reason.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn spread(&self) -> f64 {
        self.c_high / self.c_low
    }
}
