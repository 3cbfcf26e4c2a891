pub mod distributions;
pub mod doob;
pub mod frontend;
pub mod montecarlo;
pub mod ost;
pub mod pipeline;
pub mod recurrence;
pub mod symbolic;
