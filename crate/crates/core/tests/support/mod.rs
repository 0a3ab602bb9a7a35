#![allow(dead_code)]

pub mod mms;
