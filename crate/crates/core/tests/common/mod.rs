#![allow(dead_code)]

pub mod gradcheck;
pub mod grad_suite;
