use serde::{Deserialize, Serialize};

use super::{CubeError, Filter, Level, PivotQuery, TimeGrain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Rows,
    Cols,
    /// The query's time grain, together with the axis level carrying it.
    Time,
}

/// Disambiguates the parent of a level that sits in several hierarchies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hierarchy {
    /// year, semester, quarter, month, day
    Calendar,
    /// iso_year, week, day
    IsoWeek,
    /// company_country, company, account
    CompanyGeo,
    /// bank_country, bank, account
    BankGeo,
    /// currency, account
    Currency,
}

impl Hierarchy {
    fn of_parent(level: Level) -> Option<Hierarchy> {
        match level {
            Level::Company | Level::CompanyCountry => Some(Hierarchy::CompanyGeo),
            Level::Bank | Level::BankCountry => Some(Hierarchy::BankGeo),
            Level::Currency => Some(Hierarchy::Currency),
            Level::Week | Level::IsoYear => Some(Hierarchy::IsoWeek),
            Level::Year | Level::Semester | Level::Quarter | Level::Month => Some(Hierarchy::Calendar),
            Level::Day | Level::Account => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OlapOp {
    RollUp {
        axis: Axis,
        #[serde(default)]
        hierarchy: Option<Hierarchy>,
    },
    DrillDown {
        axis: Axis,
    },
    Slice {
        level: Level,
        member: String,
    },
    Dice {
        level: Level,
        members: Vec<String>,
    },
    PivotSwap,
}

fn parent(level: Level, hierarchy: Option<Hierarchy>) -> Option<Level> {
    use Level::*;
    Some(match (level, hierarchy) {
        (Day, Some(Hierarchy::IsoWeek)) => Week,
        (Day, _) => Month,
        (Week, _) => IsoYear,
        (Month, _) => Quarter,
        (Quarter, _) => Semester,
        (Semester, _) => Year,
        (Account, Some(Hierarchy::BankGeo)) => Bank,
        (Account, Some(Hierarchy::Currency)) => Currency,
        (Account, _) => Company,
        (Company, _) => CompanyCountry,
        (Bank, _) => BankCountry,
        (Year | IsoYear | CompanyCountry | BankCountry | Currency, _) => return None,
    })
}

fn child(level: Level) -> Option<Level> {
    use Level::*;
    Some(match level {
        Year => Semester,
        Semester => Quarter,
        Quarter => Month,
        Month | Week => Day,
        IsoYear => Week,
        CompanyCountry => Company,
        BankCountry => Bank,
        Company | Bank | Currency => Account,
        Day | Account => return None,
    })
}

fn inapplicable(msg: impl Into<String>) -> CubeError {
    CubeError::InapplicableOp(msg.into())
}

/// Applies one navigation step to `query`.
///
/// Roll-up and drill-down replace the innermost level of an axis with its
/// parent or child. When rolling up into a level already on the same axis
/// the innermost level is simply dropped. `Axis::Time` moves the grain and
/// the axis level showing it, if any.
pub fn transform_query(query: &PivotQuery, op: &OlapOp) -> Result<PivotQuery, CubeError> {
    let mut q = query.clone();
    match op {
        OlapOp::PivotSwap => std::mem::swap(&mut q.row_levels, &mut q.col_levels),
        OlapOp::Slice { level, member } => q.filters.push(Filter::new(*level, [member.clone()])),
        OlapOp::Dice { level, members } => {
            if members.is_empty() {
                return Err(inapplicable(format!("dice on {level} needs at least one member")));
            }
            q.filters.push(Filter::new(*level, members.iter().cloned()))
        }
        OlapOp::RollUp { axis: Axis::Time, hierarchy } => {
            let via_week = *hierarchy == Some(Hierarchy::IsoWeek);
            let grain = q
                .time_grain
                .parent(via_week)
                .ok_or_else(|| inapplicable(format!("{} is a root level", q.time_grain)))?;
            set_grain(&mut q, grain)?;
        }
        OlapOp::DrillDown { axis: Axis::Time } => {
            let grain = q
                .time_grain
                .child()
                .ok_or_else(|| inapplicable(format!("{} is a leaf level", q.time_grain)))?;
            set_grain(&mut q, grain)?;
        }
        OlapOp::RollUp { axis, hierarchy } => {
            let (levels, other) = axes(&mut q, *axis);
            let (&inner, rest) = levels
                .split_last()
                .ok_or_else(|| inapplicable(format!("{axis:?} axis has no level")))?;
            let hint = hierarchy.or_else(|| rest.last().copied().and_then(Hierarchy::of_parent));
            let up = parent(inner, hint).ok_or_else(|| inapplicable(format!("{inner} is a root level")))?;
            if other.contains(&up) {
                return Err(inapplicable(format!("{up} is already on the other axis")));
            }
            if levels.contains(&up) {
                levels.pop();
            } else {
                *levels.last_mut().expect("non-empty") = up;
            }
            if let Some(g) = up.time_grain() {
                q.time_grain = g;
            }
        }
        OlapOp::DrillDown { axis } => {
            let (levels, other) = axes(&mut q, *axis);
            let &inner = levels
                .last()
                .ok_or_else(|| inapplicable(format!("{axis:?} axis has no level")))?;
            let down = child(inner).ok_or_else(|| inapplicable(format!("{inner} is a leaf level")))?;
            if levels.contains(&down) || other.contains(&down) {
                return Err(inapplicable(format!("{down} is already on an axis")));
            }
            *levels.last_mut().expect("non-empty") = down;
            if let Some(g) = down.time_grain() {
                q.time_grain = g;
            }
        }
    }
    Ok(q)
}

fn axes(q: &mut PivotQuery, axis: Axis) -> (&mut Vec<Level>, &Vec<Level>) {
    match axis {
        Axis::Rows => (&mut q.row_levels, &q.col_levels),
        Axis::Cols => (&mut q.col_levels, &q.row_levels),
        Axis::Time => unreachable!("handled by the caller"),
    }
}

fn set_grain(q: &mut PivotQuery, grain: TimeGrain) -> Result<(), CubeError> {
    let old = Level::from_grain(q.time_grain);
    let new = Level::from_grain(grain);
    for levels in [&mut q.row_levels, &mut q.col_levels] {
        for l in levels.iter_mut().filter(|l| **l == old) {
            *l = new;
        }
    }
    q.time_grain = grain;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::{Aggregator, Measure, TimeRange};

    fn q(rows: &[Level], cols: &[Level], grain: TimeGrain) -> PivotQuery {
        PivotQuery {
            measure: Measure::BalanceEur,
            time_aggregator: Aggregator::SumClosing,
            row_levels: rows.to_vec(),
            col_levels: cols.to_vec(),
            filters: vec![],
            time_range: TimeRange::new("2015-01-01".parse().unwrap(), "2016-12-31".parse().unwrap()),
            time_grain: grain,
        }
    }

    fn apply(query: &PivotQuery, op: OlapOp) -> Result<PivotQuery, CubeError> {
        transform_query(query, &op)
    }

    #[test]
    fn time_drill_from_year_goes_to_semester() {
        let base = q(&[Level::Bank], &[Level::Year], TimeGrain::Year);
        let d = apply(&base, OlapOp::DrillDown { axis: Axis::Time }).unwrap();
        assert_eq!(d.time_grain, TimeGrain::Semester);
        assert_eq!(d.col_levels, vec![Level::Semester]);
        let d = apply(&base, OlapOp::DrillDown { axis: Axis::Cols }).unwrap();
        assert_eq!(d.time_grain, TimeGrain::Semester);
        let up = apply(&d, OlapOp::RollUp { axis: Axis::Time, hierarchy: None }).unwrap();
        assert_eq!(up, base);
    }

    #[test]
    fn time_without_axis_level() {
        let base = q(&[Level::Bank], &[], TimeGrain::Day);
        let w = apply(&base, OlapOp::RollUp { axis: Axis::Time, hierarchy: Some(Hierarchy::IsoWeek) }).unwrap();
        assert_eq!(w.time_grain, TimeGrain::Week);
        let m = apply(&base, OlapOp::RollUp { axis: Axis::Time, hierarchy: None }).unwrap();
        assert_eq!(m.time_grain, TimeGrain::Month);
        assert!(apply(&base, OlapOp::DrillDown { axis: Axis::Time }).is_err());
        let y = q(&[], &[], TimeGrain::Year);
        assert_eq!(
            apply(&y, OlapOp::RollUp { axis: Axis::Time, hierarchy: None }).unwrap_err().code(),
            "INAPPLICABLE_OP"
        );
    }

    #[test]
    fn account_rollups() {
        let base = q(&[Level::Account], &[], TimeGrain::Year);
        let up = |h| apply(&base, OlapOp::RollUp { axis: Axis::Rows, hierarchy: h }).unwrap().row_levels;
        assert_eq!(up(None), vec![Level::Company]);
        assert_eq!(up(Some(Hierarchy::BankGeo)), vec![Level::Bank]);
        assert_eq!(up(Some(Hierarchy::Currency)), vec![Level::Currency]);

        let nested = q(&[Level::Bank, Level::Account], &[], TimeGrain::Year);
        let r = apply(&nested, OlapOp::RollUp { axis: Axis::Rows, hierarchy: None }).unwrap();
        assert_eq!(r.row_levels, vec![Level::Bank]);
        let r = apply(&r, OlapOp::RollUp { axis: Axis::Rows, hierarchy: None }).unwrap();
        assert_eq!(r.row_levels, vec![Level::BankCountry]);
        assert!(apply(&r, OlapOp::RollUp { axis: Axis::Rows, hierarchy: None }).is_err());
        let r = apply(&r, OlapOp::DrillDown { axis: Axis::Rows }).unwrap();
        assert_eq!(r.row_levels, vec![Level::Bank]);

        let clash = q(&[Level::Account], &[Level::Company], TimeGrain::Year);
        assert!(apply(&clash, OlapOp::RollUp { axis: Axis::Rows, hierarchy: None }).is_err());
        assert!(apply(&q(&[], &[], TimeGrain::Year), OlapOp::DrillDown { axis: Axis::Rows }).is_err());
        assert!(apply(&base, OlapOp::DrillDown { axis: Axis::Rows }).is_err());
    }

    #[test]
    fn slice_dice_swap() {
        let base = q(&[Level::Bank], &[Level::Month], TimeGrain::Month);
        let s = apply(&base, OlapOp::Slice { level: Level::Bank, member: "B1".into() }).unwrap();
        assert_eq!(s.filters, vec![Filter::new(Level::Bank, ["B1"])]);
        let d = apply(&base, OlapOp::Dice { level: Level::Currency, members: vec!["EUR".into(), "USD".into()] }).unwrap();
        assert_eq!(d.filters[0].members.len(), 2);
        let p = apply(&base, OlapOp::PivotSwap).unwrap();
        assert_eq!(p.row_levels, vec![Level::Month]);
        assert_eq!(apply(&p, OlapOp::PivotSwap).unwrap(), base);
    }

    #[test]
    fn op_json() {
        let op: OlapOp = serde_json::from_str(r#"{"op":"roll_up","axis":"rows","hierarchy":"bank_geo"}"#).unwrap();
        assert_eq!(op, OlapOp::RollUp { axis: Axis::Rows, hierarchy: Some(Hierarchy::BankGeo) });
        let op: OlapOp = serde_json::from_str(r#"{"op":"pivot_swap"}"#).unwrap();
        assert_eq!(op, OlapOp::PivotSwap);
    }
}
