//! The thirteen corruptions, grouped by what they do to the point set.

pub mod add;
pub mod alter;
pub mod reduce;

pub use add::AdditionResult;
pub use alter::AlterationResult;
pub use reduce::ReductionResult;
