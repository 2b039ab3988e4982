//! Daily balance warehouse for treasury data.
//!
//! The crate loads dimension and movement files into a star schema, builds a
//! dense fact table of real and working balances per account and day, and
//! answers pivot queries through an in-memory cube that respects the
//! semi-additive nature of balances. A benchmark harness compares the cube
//! against a naive recompute-and-export workflow.

pub mod bench;
pub mod cube;
pub mod etl;
pub mod kv;
pub mod money;
pub mod star_schema;
pub mod store;
pub mod time_dimension;
pub mod warehouse;

pub use cube::{
    build_cube, query_pivot, reference_evaluator, transform_query, Aggregator, CubeError,
    CubeSnapshot, Filter, Level, Measure, OlapOp, PivotQuery, PivotResult, TimeGrain, TimeRange,
};
pub use money::{CurrencyCode, MoneyMinor, Rate};
pub use star_schema::{validate_star, Dimensions, FactAccountBalance};
pub use store::FactStore;
pub use time_dimension::{build_time_table, extend_time_table, time_attributes, TimeRecord, TimeTable};
