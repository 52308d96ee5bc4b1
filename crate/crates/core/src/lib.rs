pub mod alignment;
pub mod cli;
pub mod extraction;
pub mod harness;
pub mod report;
pub mod scoring;
pub mod treebank;
