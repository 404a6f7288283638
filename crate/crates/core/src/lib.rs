//! Quotation attribution over annotated novels with chat-completion models,
//! plus the audits used to check how much of the accuracy comes from
//! memorized books or annotations.

pub mod attribution;
pub mod chunking;
pub mod corpus;
pub mod inference;
pub mod memaudit;
pub mod prompting;
pub mod stats;
pub mod synth;
