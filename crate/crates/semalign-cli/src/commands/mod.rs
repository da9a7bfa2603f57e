pub mod analyze;
pub mod compare_cmd;
pub mod data;
pub mod reports;
pub mod train_cmd;
