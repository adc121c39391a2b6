//! One module per subcommand (evaluate/ensemble and stats/report share).

pub mod evaluate;
pub mod inspect;
pub mod prepare;
pub mod report;
pub mod score;
pub mod train;
