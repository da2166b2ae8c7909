pub mod agent;
pub mod config;
pub mod engine;
pub mod io;
pub mod experiments;
pub mod landscape;
pub mod metrics;
pub mod trading;

// The guide's chapters run as doctests so their snippets stay compilable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/trading.md")]
    mod trading {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
