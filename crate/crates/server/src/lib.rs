//! HTTP service and command line for the scriptorium library.

pub mod api;
pub mod cli;
pub mod error;
pub mod sessions;

pub use api::{router, AppState, RequestId, REQUEST_ID_HEADER};
pub use cli::run_cli;
pub use error::ApiError;
