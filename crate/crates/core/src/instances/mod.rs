pub mod analysis;
pub mod experiments;
pub mod generators;
pub mod optimum;
pub mod schema;

pub use analysis::*;
pub use experiments::*;
pub use generators::*;
pub use optimum::*;
pub use schema::*;
