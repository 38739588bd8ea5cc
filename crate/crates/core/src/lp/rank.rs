use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::num::RVec;

pub fn transpose(m: &[RVec]) -> Vec<RVec> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

/// Exact rank by fraction-free (Bareiss) elimination on the integer matrix
/// obtained by clearing each row's denominators.
pub fn matrix_rank(m: &[RVec]) -> usize {
    let mut a: Vec<Vec<BigInt>> = m
        .iter()
        .map(|row| {
            let l = row.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            row.iter().map(|v| v.numer() * (&l / v.denom())).collect()
        })
        .collect();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let v = &a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c];
                a[r][c] = v / &prev;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// A nonzero `c` with `sum c_j v_j = 0`, if the vectors are dependent.
pub fn kernel_vector(vectors: &[RVec]) -> Option<RVec> {
    let k = vectors.len();
    let n = vectors.first().map_or(0, Vec::len);
    // Rows of the n x k matrix whose columns are the vectors.
    let mut a: Vec<RVec> = (0..n).map(|i| vectors.iter().map(|v| v[i].clone()).collect()).collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..k {
        let Some(p) = (row..n).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].recip();
        for v in a[row].iter_mut() {
            *v *= &inv;
        }
        let pr = a[row].clone();
        for (r, other) in a.iter_mut().enumerate() {
            if r != row && !other[col].is_zero() {
                let f = other[col].clone();
                for (v, pv) in other.iter_mut().zip(&pr) {
                    *v -= &f * pv;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free = (0..k).find(|c| !pivots.contains(c))?;
    let mut c = vec![crate::num::zero(); k];
    c[free] = crate::num::one();
    for (r, &pc) in pivots.iter().enumerate() {
        c[pc] = -a[r][free].clone();
    }
    Some(c)
}
