//! Coverage of the reduced code space and scenario-count estimation.

mod ccp;
mod emit;

use serde::ser::{Serialize, SerializeMap, SerializeStruct, Serializer};

use crate::refmodel::CombinationCode;
use crate::sim::ScenarioTrace;

pub use ccp::{ccp_mc, ccp_observed, ccp_uniform, CcpError, CcpEstimate, ObservedCcp, CURVE_MAX_EXPONENT};
pub use emit::{emit_csv, emit_report, emit_svg, light_color, ReportFormat, SvgOptions, CSV_HEADER};

/// Per-code counts over all 64 codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub counts: [u64; CombinationCode::SPACE],
    pub total: u64,
    /// Feasible codes below the report's threshold, as produced by [`verdict`].
    pub feasible_uncovered: Vec<CombinationCode>,
}

impl Default for CoverageReport {
    fn default() -> Self {
        Self::from_codes(std::iter::empty())
    }
}

impl CoverageReport {
    pub fn from_codes<I: IntoIterator<Item = CombinationCode>>(codes: I) -> Self {
        let mut counts = [0u64; CombinationCode::SPACE];
        let mut total = 0;
        for code in codes {
            counts[code.index()] += 1;
            total += 1;
        }
        let mut report = CoverageReport {
            counts,
            total,
            feasible_uncovered: Vec::new(),
        };
        report.feasible_uncovered = verdict(&report, 1);
        report
    }

    /// Recomputes `feasible_uncovered` against threshold `k`.
    pub fn with_threshold(mut self, k: u64) -> Self {
        self.feasible_uncovered = verdict(&self, k);
        self
    }

    pub fn count(&self, code: CombinationCode) -> u64 {
        self.counts[code.index()]
    }

    /// Nonzero entries in code order.
    pub fn nonzero(&self) -> impl Iterator<Item = (CombinationCode, u64)> + '_ {
        CombinationCode::all().map(|c| (c, self.count(c))).filter(|&(_, n)| n > 0)
    }

    pub fn infeasible_total(&self) -> u64 {
        CombinationCode::all().filter(|c| !c.is_feasible()).map(|c| self.count(c)).sum()
    }
}

struct Counts<'a>(&'a CoverageReport);

impl Serialize for Counts<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(CombinationCode::SPACE))?;
        for code in CombinationCode::all() {
            map.serialize_entry(&code.to_string(), &self.0.count(code))?;
        }
        map.end()
    }
}

impl Serialize for CoverageReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CoverageReport", 3)?;
        st.serialize_field("total", &self.total)?;
        st.serialize_field("counts", &Counts(self))?;
        st.serialize_field("feasible_uncovered", &self.feasible_uncovered)?;
        st.end()
    }
}

pub fn histogram(traces: &[ScenarioTrace]) -> CoverageReport {
    CoverageReport::from_codes(traces.iter().map(|t| t.code))
}

/// Feasible codes observed fewer than `k` times, rarest first, ties by code.
pub fn verdict(report: &CoverageReport, k: u64) -> Vec<CombinationCode> {
    let mut out: Vec<CombinationCode> = CombinationCode::all()
        .filter(|c| c.is_feasible() && report.count(*c) < k)
        .collect();
    out.sort_by_key(|c| (report.count(*c), *c));
    out
}
