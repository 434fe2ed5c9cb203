#![allow(dead_code)]

use std::path::Path;
use std::thread;

use gwas_gls::datagen::{gen_dataset, GenSpec};
use gwas_gls::distgrid::{inproc_world, GridLayout, InProcTransport};
use gwas_gls::io::read_results;
use gwas_gls::{DatasetPaths, SnpResult};

/// Runs `f` once per rank of an in-process world, each on its own thread.
pub fn on_world<R: Send>(
    np: usize,
    f: impl Fn(&InProcTransport, GridLayout) -> R + Sync,
) -> Vec<R> {
    let grid = GridLayout::new(np).unwrap();
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = inproc_world(np)
            .into_iter()
            .map(|t| s.spawn(move || f(&t, grid)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

pub fn dataset(dir: &Path, n: usize, m: usize, p: usize, seed: u64) -> DatasetPaths {
    gen_dataset(&GenSpec::new(n, m, p, seed), dir)
        .unwrap()
        .paths
}

pub fn results(path: &Path) -> Vec<SnpResult> {
    read_results(path).unwrap().1
}

pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
        / scale
}
