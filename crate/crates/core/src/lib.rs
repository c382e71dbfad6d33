pub mod attention;
pub mod error;
pub mod extraction;
pub mod grouping;
pub mod page_model;
pub mod session;
pub mod table;
pub mod text;
