use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::stats::{BenchRow, TTestResult, TimeBenefit};

/// Decimal separator of the text report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Locale {
    #[default]
    Comma,
    Dot,
}

impl FromStr for Locale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "comma" => Ok(Locale::Comma),
            "dot" => Ok(Locale::Dot),
            _ => Err(format!("unknown locale `{s}` (expected comma or dot)")),
        }
    }
}

/// Measurements and analysis of one time scope of a use case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeResult {
    pub scope: String,
    pub forecasts: usize,
    pub cube: BenchRow,
    pub naive_phase1: BenchRow,
    pub naive_phase2: BenchRow,
    pub naive_total: BenchRow,
    pub test: TTestResult,
    pub benefit: TimeBenefit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UseCaseResult {
    pub name: String,
    pub scopes: Vec<ScopeResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub dataset: String,
    pub use_cases: Vec<UseCaseResult>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedReport {
    pub text: String,
    pub csv: String,
}

pub fn format_number(v: f64, locale: Locale) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    let s = format!("{v:.3}");
    match locale {
        Locale::Dot => s,
        Locale::Comma => s.replace('.', ","),
    }
}

const LABEL_WIDTH: usize = 36;
const COL_WIDTH: usize = 11;

enum Cell {
    Pair(f64, f64),
    One(String),
}

/// Renders the report as a text table (decimal separator per `locale`) and
/// as long-format CSV (always dot-decimal). Time benefits are shown as
/// negative numbers: time taken away from the daily routine.
pub fn render_report(report: &BenchReport, locale: Locale) -> RenderedReport {
    let num = |v: f64| format_number(v, locale);
    let mut text = String::new();
    writeln!(text, "Balance cube benchmark").unwrap();
    writeln!(text, "seed: {}", report.seed).unwrap();
    if !report.dataset.is_empty() {
        writeln!(text, "dataset: {}", report.dataset).unwrap();
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["seed", "use_case", "scope", "section", "metric", "value"]).unwrap();

    for uc in &report.use_cases {
        writeln!(text, "\n== {} ==", uc.name).unwrap();
        let mut header = format!("{:<LABEL_WIDTH$}", "");
        for s in &uc.scopes {
            write!(header, "{:>w$}", s.scope, w = 2 * COL_WIDTH).unwrap();
        }
        writeln!(text, "{}", header.trim_end()).unwrap();
        let mut sub = format!("{:<LABEL_WIDTH$}", "(seconds unless noted)");
        for _ in &uc.scopes {
            write!(sub, "{:>COL_WIDTH$}{:>COL_WIDTH$}", "avg", "std").unwrap();
        }
        writeln!(text, "{}", sub.trim_end()).unwrap();

        let mut line = |section: &str, label: &str, cell: Option<&dyn Fn(&ScopeResult) -> Cell>| {
            let Some(cell) = cell else {
                writeln!(text, "{label}").unwrap();
                return;
            };
            let mut out = format!("{:<LABEL_WIDTH$}", label);
            for s in &uc.scopes {
                match cell(s) {
                    Cell::Pair(avg, std) => {
                        write!(out, "{:>COL_WIDTH$}{:>COL_WIDTH$}", num(avg), num(std)).unwrap();
                        for (stat, v) in [("avg", avg), ("std", std)] {
                            csv.write_record([
                                report.seed.to_string(),
                                uc.name.clone(),
                                s.scope.clone(),
                                section.to_owned(),
                                format!("{label} {stat}"),
                                format_number(v, Locale::Dot),
                            ])
                            .unwrap();
                        }
                    }
                    Cell::One(v) => {
                        write!(out, "{:>COL_WIDTH$}{:>COL_WIDTH$}", v, "").unwrap();
                        csv.write_record([
                            report.seed.to_string(),
                            uc.name.clone(),
                            s.scope.clone(),
                            section.to_owned(),
                            label.to_owned(),
                            v.replace(',', "."),
                        ])
                        .unwrap();
                    }
                }
            }
            writeln!(text, "{}", out.trim_end()).unwrap();
        };
        let pair = |r: &BenchRow| Cell::Pair(r.mean, r.std);
        let one = |v: f64| Cell::One(num(v));

        line("dataset", "Number of considered forecasts", Some(&|s| Cell::One(s.forecasts.to_string())));
        line("", "Modality I: through the cube", None);
        line("modality I", "  Refresh", Some(&|s| pair(&s.cube)));
        line("", "Modality II: recompute and export", None);
        line("modality II", "  Get daily balances", Some(&|s| pair(&s.naive_phase1)));
        line("modality II", "  Export and aggregate", Some(&|s| pair(&s.naive_phase2)));
        line("modality II", "  Total", Some(&|s| pair(&s.naive_total)));
        line("", "Time benefits", None);
        line("time benefits", "  Per day (minutes)", Some(&|s| one(-s.benefit.per_day_minutes)));
        line("time benefits", "  Per month (minutes)", Some(&|s| one(-s.benefit.per_month_minutes)));
        line("time benefits", "  Per year (hours)", Some(&|s| one(-s.benefit.per_year_hours)));
        line("", "Hypothesis testing", None);
        line("hypothesis testing", "  Difference in means (t)", Some(&|s| one(s.test.t)));
        line("hypothesis testing", "  Degrees of freedom", Some(&|s| Cell::One(s.test.df.to_string())));
        line("hypothesis testing", "  t critical 95% (two-tailed)", Some(&|s| one(s.test.crit95)));
        line("hypothesis testing", "  t critical 99% (two-tailed)", Some(&|s| one(s.test.crit99)));
        let yes = |b: bool| Cell::One(if b { "yes" } else { "no" }.to_owned());
        line("hypothesis testing", "  Significant at 95%", Some(&|s| yes(s.test.significant95)));
        line("hypothesis testing", "  Significant at 99%", Some(&|s| yes(s.test.significant99)));
    }
    RenderedReport {
        text,
        csv: String::from_utf8(csv.into_inner().unwrap()).unwrap(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::stats::{pooled_t, time_benefit};

    fn published_scope() -> ScopeResult {
        let row = |label: &str, mean, std| BenchRow {
            label: label.to_owned(),
            mean,
            std,
        };
        ScopeResult {
            scope: "next month".into(),
            forecasts: 237,
            cube: row("cube", 0.827, 0.045),
            naive_phase1: row("p1", 20.0, 1.0),
            naive_phase2: row("p2", 3.215, 0.5),
            naive_total: row("total", 23.215, 1.515),
            // the published statistic itself; recomputing it from the
            // rounded means and deviations gives 25.584
            test: TTestResult {
                t: 25.590,
                ..pooled_t(0.827, 0.045, 3, 23.215, 1.515, 3).unwrap()
            },
            benefit: time_benefit(0.827, 23.215),
        }
    }

    fn report(use_cases: Vec<UseCaseResult>) -> BenchReport {
        BenchReport {
            seed: 42,
            dataset: String::new(),
            use_cases,
        }
    }

    #[test]
    fn locales() {
        let r = report(vec![UseCaseResult {
            name: "Use case I".into(),
            scopes: vec![published_scope()],
        }]);
        let comma = render_report(&r, Locale::Comma);
        assert!(comma.text.contains("25,590"), "{}", comma.text);
        assert!(comma.text.contains("-0,373"));
        assert!(comma.text.contains("seed: 42"));
        let dot = render_report(&r, Locale::Dot);
        assert!(dot.text.contains("25.590"));
        assert!(dot.csv.contains("25.590"));
        assert_eq!(comma.csv, dot.csv);
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = render_report(&report(vec![]), Locale::Comma);
        assert_eq!(r.text, "Balance cube benchmark\nseed: 42\n");
        assert_eq!(r.csv.lines().count(), 1);
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(1.2344, Locale::Dot), "1.234");
        assert_eq!(format_number(-8.2094, Locale::Comma), "-8,209");
        assert_eq!(format_number(f64::INFINITY, Locale::Comma), "inf");
    }
}
