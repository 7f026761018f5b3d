//! Loaders for the frozen conic-solver reference values in `tests/data`.
#![allow(dead_code)]

use seqanm::{c64, Mat};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct SdpCase {
    pub axis: String,
    pub free_dim: usize,
    pub mmv_dim: usize,
    pub fixed: Vec<usize>,
    pub data_rows: usize,
    pub data_cols: usize,
    pub data: Vec<[f64; 2]>,
    pub objective: f64,
}

impl SdpCase {
    pub fn data_matrix(&self) -> Mat<c64> {
        // row-major in the file
        Mat::from_fn(self.data_rows, self.data_cols, |i, j| {
            let [re, im] = self.data[i * self.data_cols + j];
            c64::new(re, im)
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct BpdnCase {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub antennas: Vec<usize>,
    pub pilots: Vec<usize>,
    pub grid_aoa: usize,
    pub grid_delay: usize,
    pub delay_max: f64,
    pub y: Vec<[f64; 2]>,
    pub epsilon: f64,
    pub l1: f64,
}

impl BpdnCase {
    pub fn y_matrix(&self) -> Mat<c64> {
        let cols = self.pilots.len();
        Mat::from_fn(self.antennas.len(), cols, |i, j| {
            let [re, im] = self.y[i * cols + j];
            c64::new(re, im)
        })
    }
}

pub fn sdp_cases() -> Vec<SdpCase> {
    let text = include_str!("data/sdp_oracle.json");
    serde_json::from_str(text).expect("sdp oracle data")
}

pub fn bpdn_cases() -> Vec<BpdnCase> {
    let text = include_str!("data/bpdn_oracle.json");
    serde_json::from_str(text).expect("bpdn oracle data")
}
