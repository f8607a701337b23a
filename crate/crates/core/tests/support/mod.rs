pub mod labelled;
pub mod oracle;
pub mod synthetic;
