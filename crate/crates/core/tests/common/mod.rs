//! Brute-force transfer entropy reference, kept deliberately independent of
//! the library: histories are owned byte vectors, marginals are separate
//! hash maps, and the sum runs in probability space rather than over exact
//! count ratios. Agreement between the two routes is therefore meaningful.

// Shared by several test binaries; not every binary calls every helper.
#![allow(dead_code)]

use std::collections::HashMap;

/// Reference TE for k = l = 1 using a fixed 2x2x2 count array.
pub fn te_k1l1(target: &[u8], source: &[u8]) -> f64 {
    assert_eq!(target.len(), source.len());
    assert!(target.len() >= 2);
    let mut c = [[[0u64; 2]; 2]; 2]; // [next][i][j]
    for t in 0..target.len() - 1 {
        c[target[t + 1] as usize][target[t] as usize][source[t] as usize] += 1;
    }
    let total = (target.len() - 1) as f64;
    let mut te = 0.0;
    for n in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let c_nij = c[n][i][j];
                if c_nij == 0 {
                    continue;
                }
                let c_ij = c[0][i][j] + c[1][i][j];
                let c_ni = c[n][i][0] + c[n][i][1];
                let c_i = c[0][i][0] + c[0][i][1] + c[1][i][0] + c[1][i][1];
                let p_nij = c_nij as f64 / total;
                let p_ij = c_ij as f64 / total;
                let p_ni = c_ni as f64 / total;
                let p_i = c_i as f64 / total;
                te += p_nij * ((p_nij * p_i) / (p_ij * p_ni)).log2();
            }
        }
    }
    te
}

/// Reference TE for arbitrary history lengths. Histories are stored as owned
/// slices so no packing scheme is shared with the implementation under test.
pub fn te_general(target: &[u8], source: &[u8], k: usize, l: usize) -> f64 {
    assert_eq!(target.len(), source.len());
    assert!(k >= 1 && l >= 1);
    let h = k.max(l);
    assert!(target.len() > h, "series too short for the requested order");

    type Hist = (u8, Vec<u8>, Vec<u8>);
    let mut joint: HashMap<Hist, u64> = HashMap::new();
    let mut ikjl: HashMap<(Vec<u8>, Vec<u8>), u64> = HashMap::new();
    let mut nik: HashMap<(u8, Vec<u8>), u64> = HashMap::new();
    let mut ik_only: HashMap<Vec<u8>, u64> = HashMap::new();

    let mut total = 0u64;
    for t in (h - 1)..(target.len() - 1) {
        let next = target[t + 1];
        let ik = target[t + 1 - k..=t].to_vec();
        let jl = source[t + 1 - l..=t].to_vec();
        *joint.entry((next, ik.clone(), jl.clone())).or_insert(0) += 1;
        *ikjl.entry((ik.clone(), jl)).or_insert(0) += 1;
        *nik.entry((next, ik.clone())).or_insert(0) += 1;
        *ik_only.entry(ik).or_insert(0) += 1;
        total += 1;
    }

    let total = total as f64;
    let mut te = 0.0;
    for ((next, ik, jl), &c_nij) in &joint {
        let p_nij = c_nij as f64 / total;
        let p_ij = ikjl[&(ik.clone(), jl.clone())] as f64 / total;
        let p_ni = nik[&(*next, ik.clone())] as f64 / total;
        let p_i = ik_only[ik] as f64 / total;
        te += p_nij * ((p_nij * p_i) / (p_ij * p_ni)).log2();
    }
    te
}
