pub mod channel;
pub mod dilation;
pub mod linalg;
pub mod nsb;
pub mod optimal;
pub mod states;
