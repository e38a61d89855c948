//! Machine-readable verification reports.
//!
//! Reports serialise to JSON (struct field order, `BTreeMap`-ordered
//! collections) and render to Markdown. The canonical form used for golden
//! comparison and determinism checks zeroes the wall-clock fields, which are
//! the only nondeterministic content.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    Comb,
    Checksum,
    Recursions,
    DeltaScal,
    SymRic,
    Lpos,
    Table1,
    PropS,
    SLemma,
    QrExpansion,
    QrPositivity,
    FinalInequality,
}

pub const ALL_CHECKS: [CheckId; 12] = [
    CheckId::Comb,
    CheckId::Checksum,
    CheckId::Recursions,
    CheckId::DeltaScal,
    CheckId::SymRic,
    CheckId::Lpos,
    CheckId::Table1,
    CheckId::PropS,
    CheckId::SLemma,
    CheckId::QrExpansion,
    CheckId::QrPositivity,
    CheckId::FinalInequality,
];

impl CheckId {
    pub fn name(self) -> &'static str {
        match self {
            CheckId::Comb => "comb",
            CheckId::Checksum => "checksum",
            CheckId::Recursions => "recursions",
            CheckId::DeltaScal => "delta-scal",
            CheckId::SymRic => "sym-ric",
            CheckId::Lpos => "lpos",
            CheckId::Table1 => "table1",
            CheckId::PropS => "prop-s",
            CheckId::SLemma => "s-lemma",
            CheckId::QrExpansion => "qr-expansion",
            CheckId::QrPositivity => "qr-positivity",
            CheckId::FinalInequality => "final-inequality",
        }
    }

    pub fn parse(s: &str) -> Option<CheckId> {
        ALL_CHECKS.iter().copied().find(|c| c.name() == s)
    }

    /// Whether the check takes the jet order as a parameter at all.
    pub fn uses_omega(self) -> bool {
        !matches!(self, CheckId::Comb | CheckId::Recursions | CheckId::DeltaScal)
    }

    /// Smallest jet order the check is defined for.
    pub fn min_omega(self) -> u32 {
        match self {
            CheckId::Comb | CheckId::Recursions | CheckId::DeltaScal => 1,
            CheckId::SymRic | CheckId::PropS => 1,
            CheckId::Checksum
            | CheckId::Lpos
            | CheckId::Table1
            | CheckId::SLemma
            | CheckId::QrExpansion
            | CheckId::QrPositivity
            | CheckId::FinalInequality => 2,
        }
    }

    pub fn max_omega(self) -> u32 {
        match self {
            CheckId::Checksum => 8,
            CheckId::PropS => 4,
            _ => 6,
        }
    }

    /// The identity under test, rendered as a formula (ASCII, `w` for the
    /// jet order), so failures are traceable to their source.
    pub fn identity(self) -> &'static str {
        match self {
            CheckId::Comb => {
                "(w+2) sum_{k=w..2w} (k+1) C(k,w) = (w+3)^2 C(w);  (w+2) sum_{k=w..2w-1} (k+1)(2w-k) C(k,w) = w(w+3) C(w);  sum_{k=w..n-1} C(k,w) = C(n,w+1);  sum_{k=w..n-2} (n-k-1) C(k,w) = C(n,w+2)"
            }
            CheckId::Checksum => {
                "(2w)!(u1+u6+u10) + (2w-2)! sum_{k=2..17, k!=6,10} u_k + (2w-4)! sum_{k=18..27} u_k = (2w+4)!"
            }
            CheckId::Recursions => {
                "T^g = 2g(g-1) T^{g-2}_1 + 2g^2 T^{g-1};  T^{g-2}_1 = 2g(g-1) T^{g-3}_1 + 2(g-3)(g-1) T^{g-4}_2;  T^{g-2}_1 = 2(g-1)(g-2) T^{g-3}_1 + 2(g-1)^2 T^{g-2}_(1,1);  closed forms d^g_l, e^g_l"
            }
            CheckId::DeltaScal => {
                "Tr Sym grad^{2l+2} Ric = 2(2l)!(l+1)^2 lapl^l scal;  Tr Sym grad^{2l+3..} Ric = (2l+2)!(l+2) grad lapl^l scal"
            }
            CheckId::SymRic => "2 T_l + (w-2l)((w-2l-1) N_l + 4 M_l) = 0 for all l <= w/2",
            CheckId::Lpos => {
                "|G(t)|^2 = T t^2 + 2 C(k-2,2) N t + C(k-2,2)(T + C(k-4,2) N + 2(k-4) M);  discriminant <= 0  <=>  -2/(k-2) <= N/T <= 2/((k-2)(k-3))"
            }
            CheckId::Table1 => "Tr Q(R) = sum_k u_k A_k with scheme multiplicities u_k, and A_k = B_k for every applicable row",
            CheckId::PropS => {
                "S = 2(w+2)^2 (2w+2)! lapl^{w+1} scal + C(w)(2(w+3)^2 (S2+S3) + 2w(w+3) S4)"
            }
            CheckId::SLemma => {
                "S3 = 2(w+1)(T^w + 2w^3 M^{w-1});  -S2 = 2(w+1)(T^w + 4w^3(T^{w-1}-M^{w-1}) + 2w^2(w-1) T^{w-2}_1 + 2w^2(w-1) B5);  S4 = 4w(w+1)(w T^{w-1} - w(w+1) M^{w-1} + (w-1) B5 + 2w(w-1)^3 N^{w-2})"
            }
            CheckId::QrExpansion => {
                "Tr Q(R) grouped expansion;  T^{w-2}-M^{w-2} = (T^{w-1}-M^{w-1})/(2(w-1)^2) - (w-2)/(w-1) (T^{w-3}_1-M^{w-3}_1);  B26 = B5/(2(w-1)^2) - (w-2)/(w-1) B22"
            }
            CheckId::QrPositivity => "Tr Q(R) exceeds its stated lower bound by a nonnegative combination, with R_0 > 0 strict",
            CheckId::FinalInequality => {
                "sum-S identity; I_1/I_2 closed sums; I_2 >= sum 2l d^w_l T_l and I_1 >= -sum 2l d^w_l T_l on the certified N/T interval; I > 0"
            }
        }
    }
}

impl std::fmt::Display for CheckId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportItem {
    pub name: String,
    pub status: ItemStatus,
    pub expected: String,
    pub computed: String,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub millis: u64,
}

impl ReportItem {
    pub fn exact(name: impl Into<String>, expected: impl ToString, computed: impl ToString) -> Self {
        let expected = expected.to_string();
        let computed = computed.to_string();
        let status = if expected == computed { ItemStatus::Pass } else { ItemStatus::Fail };
        ReportItem {
            name: name.into(),
            status,
            expected,
            computed,
            exact: true,
            tolerance: None,
            seed: None,
            millis: 0,
        }
    }

    pub fn check(name: impl Into<String>, ok: bool, expected: impl ToString, computed: impl ToString) -> Self {
        ReportItem {
            name: name.into(),
            status: if ok { ItemStatus::Pass } else { ItemStatus::Fail },
            expected: expected.to_string(),
            computed: computed.to_string(),
            exact: true,
            tolerance: None,
            seed: None,
            millis: 0,
        }
    }

    pub fn numeric(
        name: impl Into<String>,
        ok: bool,
        expected: impl ToString,
        computed: impl ToString,
        tolerance: f64,
        seed: u64,
    ) -> Self {
        ReportItem {
            name: name.into(),
            status: if ok { ItemStatus::Pass } else { ItemStatus::Fail },
            expected: expected.to_string(),
            computed: computed.to_string(),
            exact: false,
            tolerance: Some(tolerance),
            seed: Some(seed),
            millis: 0,
        }
    }

    pub fn not_applicable(name: impl Into<String>, reason: impl ToString) -> Self {
        ReportItem {
            name: name.into(),
            status: ItemStatus::NotApplicable,
            expected: reason.to_string(),
            computed: String::new(),
            exact: true,
            tolerance: None,
            seed: None,
            millis: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SystemStats {
    pub monomial_classes: usize,
    pub relation_rows: usize,
    pub max_group_order: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: CheckId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<u32>,
    pub status: ItemStatus,
    pub identity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub items: Vec<ReportItem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<SystemStats>,
    pub millis: u64,
}

impl VerificationReport {
    pub fn new(check: CheckId, omega: Option<u32>) -> Self {
        VerificationReport {
            check,
            omega,
            status: ItemStatus::Pass,
            identity: check.identity().to_string(),
            seed: None,
            items: Vec::new(),
            stats: None,
            millis: 0,
        }
    }

    pub fn push(&mut self, item: ReportItem) {
        if item.status == ItemStatus::Fail {
            self.status = ItemStatus::Fail;
        }
        self.items.push(item);
    }

    pub fn passed(&self) -> bool {
        self.status != ItemStatus::Fail
    }

    /// Canonical form: wall-clock fields zeroed; everything else is already
    /// deterministic for a fixed configuration.
    pub fn canonical(&self) -> VerificationReport {
        let mut out = self.clone();
        out.millis = 0;
        for item in &mut out.items {
            item.millis = 0;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let omega = self.omega.map(|w| format!(" (w = {w})")).unwrap_or_default();
        out.push_str(&format!("## {}{}\n\n", self.check.name(), omega));
        out.push_str(&format!("- status: **{}**\n", status_word(self.status)));
        out.push_str(&format!("- identity: `{}`\n", self.identity));
        if let Some(stats) = &self.stats {
            out.push_str(&format!(
                "- system: {} monomial classes, {} relation rows, symmetry group order {}\n",
                stats.monomial_classes, stats.relation_rows, stats.max_group_order
            ));
        }
        out.push('\n');
        out.push_str("| item | status | expected | computed |\n|---|---|---|---|\n");
        for item in &self.items {
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                item.name,
                status_word(item.status),
                item.expected,
                item.computed
            ));
        }
        out.push('\n');
        out
    }
}

fn status_word(s: ItemStatus) -> &'static str {
    match s {
        ItemStatus::Pass => "pass",
        ItemStatus::Fail => "FAIL",
        ItemStatus::NotApplicable => "not-applicable",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_id_round_trip() {
        for c in ALL_CHECKS {
            assert_eq!(CheckId::parse(c.name()), Some(c));
        }
        assert_eq!(CheckId::parse("nope"), None);
    }

    #[test]
    fn canonical_json_zeroes_timing() {
        let mut r = VerificationReport::new(CheckId::Comb, None);
        let mut item = ReportItem::exact("x", 1, 1);
        item.millis = 55;
        r.push(item);
        r.millis = 99;
        let c = r.canonical();
        assert_eq!(c.millis, 0);
        assert_eq!(c.items[0].millis, 0);
        assert!(r.passed());
    }

    #[test]
    fn failure_propagates_to_report_status() {
        let mut r = VerificationReport::new(CheckId::Comb, None);
        r.push(ReportItem::exact("bad", 1, 2));
        assert!(!r.passed());
        assert_eq!(r.status, ItemStatus::Fail);
    }
}
