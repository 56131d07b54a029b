pub mod canonical;
pub mod cf;
pub mod experiments;
pub mod mat2;
pub mod spectrum;
pub mod words;
