#![allow(dead_code)]

pub mod selection_props;
