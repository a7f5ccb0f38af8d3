//! Host process for the bubble ventilation game: the HTTP API that serves
//! live sessions and the batch commands behind the `airbubble` binary.

pub mod cli;
pub mod png;
pub mod server;
