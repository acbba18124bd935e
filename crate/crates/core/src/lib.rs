pub mod bench;
pub mod compiler;
pub mod machine;
pub mod monitor;
pub mod reader;
pub mod specialized;
pub mod symbol;
pub mod term;
