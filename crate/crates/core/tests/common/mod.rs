#![allow(dead_code)]

use proptest::prelude::*;

/// Votes in `[-1, 1]` with `lambda` a fraction of the mean margin.
pub fn instance(nmax: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
    (
        prop::collection::vec(-1.0f64..=1.0, 1..=nmax),
        0.02f64..=1.0,
    )
        .prop_filter_map("mean margin too small", |(votes, frac)| {
            let mean = votes.iter().map(|a| a.abs()).sum::<f64>() / votes.len() as f64;
            (mean > 1e-3).then_some((votes, frac * mean))
        })
}

/// Votes on the 1/16 lattice, so ties and zeros show up often.
pub fn lattice_instance(nmax: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(-16i32..=16, 1..=nmax), 0.02f64..=1.0).prop_filter_map(
        "all votes zero",
        |(ks, frac)| {
            let votes: Vec<f64> = ks.iter().map(|&k| k as f64 / 16.0).collect();
            let mean = votes.iter().map(|a| a.abs()).sum::<f64>() / votes.len() as f64;
            (mean > 0.0).then_some((votes, frac * mean))
        },
    )
}

pub fn any_instance(nmax: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
    prop_oneof![instance(nmax), lattice_instance(nmax)]
}
